//! Metropolis–Hastings sampling over fibers and the exact conditional test
//! of a smaller model within a larger one.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, Continuous};
use statrs::function::factorial::ln_factorial;

use crate::error::{Error, Result};
use crate::fit::{FitOptions, FitPlan};
use crate::markov::MarkovBasis;
use crate::subspace::Subspace;
use crate::table::Table;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ChainConfig {
    /// Total steps per chain, burn-in included.
    pub steps: u64,
    pub burn_in: u64,
    pub seed: u64,
    pub thinning: u64,
    pub chains: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            steps: 100_000,
            burn_in: 10_000,
            seed: 0,
            thinning: 1,
            chains: 1,
        }
    }
}

/// Batches used for the interval of a single chain.
pub const DEFAULT_BATCHES: usize = 50;

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::InvalidChain("steps must be at least 1".into()));
        }
        if self.burn_in >= self.steps {
            return Err(Error::InvalidChain(format!(
                "burn-in {} must be smaller than steps {}",
                self.burn_in, self.steps
            )));
        }
        if self.thinning == 0 || self.chains == 0 {
            return Err(Error::InvalidChain("thinning and chains must be positive".into()));
        }
        Ok(())
    }

    /// Samples kept per chain.
    pub fn kept(&self) -> usize {
        ((self.steps - self.burn_in) / self.thinning) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TestResult {
    pub observed_statistic: f64,
    pub p_hat: f64,
    pub ci_halfwidth: f64,
    pub df: usize,
    pub acceptance_rate: f64,
    pub certified_basis: bool,
    pub config: ChainConfig,
    /// Post burn-in, thinned statistics, chains concatenated in order.
    pub samples: Vec<f64>,
}

impl TestResult {
    /// JSON without the sample series.
    pub fn summary_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("serializable");
        if let Some(o) = v.as_object_mut() {
            o.remove("samples");
            o.insert("num_samples".into(), self.samples.len().into());
        }
        serde_json::to_string_pretty(&v).expect("serializable")
    }
}

/// One Metropolis step on dense counts `x`. Returns whether the proposal
/// was accepted. Proposals leaving the nonnegative orthant are rejected.
pub fn mh_step<R: Rng + ?Sized>(x: &mut [u64], basis: &MarkovBasis, rng: &mut R) -> bool {
    if basis.is_empty() {
        return false;
    }
    let mv = &basis.moves()[rng.random_range(0..basis.len())];
    let sign: i64 = if rng.random::<bool>() { 1 } else { -1 };
    let mut log_ratio = 0.0;
    for &(c, v) in mv.entries() {
        let y = x[c] as i64 + sign * v;
        if y < 0 {
            return false;
        }
        log_ratio += ln_factorial(x[c]) - ln_factorial(y as u64);
    }
    if log_ratio < 0.0 && rng.random::<f64>().ln() >= log_ratio {
        return false;
    }
    for &(c, v) in mv.entries() {
        x[c] = (x[c] as i64 + sign * v) as u64;
    }
    true
}

/// `1.96 * sd(batch means) / sqrt(batches)` over consecutive equal batches;
/// a remainder shorter than one batch is dropped.
pub fn batch_means_ci(series: &[f64], batches: usize) -> Result<f64> {
    if batches < 2 || series.len() < 2 * batches {
        return Err(Error::InvalidChain(format!(
            "{} samples cannot form {batches} batches",
            series.len()
        )));
    }
    let size = series.len() / batches;
    let means: Vec<f64> = series
        .chunks_exact(size)
        .take(batches)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    Ok(halfwidth(&means))
}

fn halfwidth(means: &[f64]) -> f64 {
    let k = means.len() as f64;
    let mean = means.iter().sum::<f64>() / k;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (k - 1.0);
    1.96 * var.sqrt() / k.sqrt()
}

enum BigModel {
    Saturated,
    Plan(FitPlan),
}

impl BigModel {
    fn loglik(&self, x: &[u64], opts: &FitOptions) -> Result<f64> {
        match self {
            BigModel::Saturated => {
                let n = x.iter().sum::<u64>() as f64;
                Ok(x.iter().filter(|&&v| v > 0).map(|&v| v as f64 * (v as f64 / n).ln()).sum())
            }
            BigModel::Plan(p) => p.loglik(x, opts),
        }
    }
}

fn greater_or_equal(s: f64, obs: f64) -> bool {
    s >= obs - 1e-9 * obs.abs().max(1.0)
}

struct Chain {
    samples: Vec<f64>,
    accepted: u64,
}

/// Exact test of `small` (the null) within `big` (`None`: saturated) using
/// the deviance `2 (loglik_big - loglik_small)`. The small-model term is
/// constant on the fiber, so only the big model is refitted along the chain.
pub fn exact_test(t: &Table, small: &Subspace, big: Option<&Subspace>, basis: &MarkovBasis, cfg: &ChainConfig) -> Result<TestResult> {
    cfg.validate()?;
    if small.shape() != t.shape() || small.mask() != t.mask() {
        return Err(Error::ShapeMismatch("null model and table frames differ".into()));
    }
    if basis.shape() != t.shape() || basis.mask() != t.mask() {
        return Err(Error::ShapeMismatch("basis and table frames differ".into()));
    }
    basis.validate(&small.configuration())?;
    if !basis.is_certified() {
        warn!("running the exact test with an uncertified lattice basis");
    }
    let opts = FitOptions::default();
    let (big_model, df) = match big {
        None => (BigModel::Saturated, small.support().len() - small.dim()),
        Some(b) => {
            if !small.is_subspace_of(b)? {
                return Err(Error::NotNested("null model is not contained in the alternative".into()));
            }
            (BigModel::Plan(FitPlan::new(b)?), b.dim() - small.dim())
        }
    };
    let small_ll = FitPlan::new(small)?.loglik(t.counts(), &opts)?;
    let stat = |x: &[u64]| -> Result<f64> { Ok(2.0 * (big_model.loglik(x, &opts)? - small_ll)) };
    let observed = stat(t.counts())?;
    debug!("observed deviance {observed}, df {df}");

    let run = |c: usize| -> Result<Chain> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(c as u64));
        let mut x = t.counts().to_vec();
        let mut current = observed;
        let mut samples = Vec::with_capacity(cfg.kept());
        let mut accepted = 0;
        for step in 1..=cfg.steps {
            if mh_step(&mut x, basis, &mut rng) {
                accepted += 1;
                current = stat(&x)?;
            }
            if step > cfg.burn_in && (step - cfg.burn_in) % cfg.thinning == 0 {
                samples.push(current);
            }
        }
        Ok(Chain { samples, accepted })
    };
    let chains: Vec<Chain> = (0..cfg.chains).into_par_iter().map(run).collect::<Result<_>>()?;

    let indicator = |s: &f64| if greater_or_equal(*s, observed) { 1.0 } else { 0.0 };
    let total: usize = chains.iter().map(|c| c.samples.len()).sum();
    let hits: f64 = chains.iter().flat_map(|c| c.samples.iter().map(indicator)).sum();
    let p_hat = (1.0 + hits) / (1.0 + total as f64);
    let ci_halfwidth = if cfg.chains > 1 {
        let means: Vec<f64> = chains
            .iter()
            .map(|c| c.samples.iter().map(indicator).sum::<f64>() / c.samples.len().max(1) as f64)
            .collect();
        halfwidth(&means)
    } else {
        let ind: Vec<f64> = chains[0].samples.iter().map(indicator).collect();
        batch_means_ci(&ind, DEFAULT_BATCHES.min(ind.len() / 2).max(2)).unwrap_or(f64::NAN)
    };
    let accepted: u64 = chains.iter().map(|c| c.accepted).sum();
    Ok(TestResult {
        observed_statistic: observed,
        p_hat,
        ci_halfwidth,
        df,
        acceptance_rate: accepted as f64 / (cfg.steps * cfg.chains as u64) as f64,
        certified_basis: basis.is_certified(),
        config: *cfg,
        samples: chains.into_iter().flat_map(|c| c.samples).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramRow {
    pub lower: f64,
    pub upper: f64,
    pub density: f64,
    pub chi_square_density: f64,
}

/// Equal-width histogram of the sampled statistics on `[0, max]` with the
/// chi-square density at `df` evaluated at bin midpoints.
pub fn histogram_series(result: &TestResult, bins: usize) -> Vec<HistogramRow> {
    let bins = bins.max(1);
    let top = result
        .samples
        .iter()
        .copied()
        .chain([result.observed_statistic])
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let width = top / bins as f64;
    let mut counts = vec![0usize; bins];
    for &s in &result.samples {
        let b = ((s.max(0.0) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = result.samples.len().max(1) as f64;
    let chi = ChiSquared::new(result.df as f64).ok();
    counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let lower = b as f64 * width;
            let mid = lower + width / 2.0;
            HistogramRow {
                lower,
                upper: lower + width,
                density: c as f64 / (n * width),
                chi_square_density: chi.as_ref().map(|d| d.pdf(mid)).unwrap_or(f64::NAN),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::quasi_independence;
    use crate::table::Shape;

    #[test]
    fn negative_proposal_stays() {
        let shape = Shape::new(vec![2, 2]).unwrap();
        let b = quasi_independence(&shape, &[false; 4]).unwrap();
        let mut x = vec![1, 0, 0, 0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert!(!mh_step(&mut x, &b, &mut rng));
        }
        assert_eq!(x, vec![1, 0, 0, 0]);
    }

    #[test]
    fn two_state_fiber_is_balanced() {
        let shape = Shape::new(vec![2, 2]).unwrap();
        let b = quasi_independence(&shape, &[false; 4]).unwrap();
        let mut x = vec![1, 0, 0, 1];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let mut first = 0;
        for _ in 0..n {
            mh_step(&mut x, &b, &mut rng);
            first += (x[0] == 1) as usize;
        }
        let f = first as f64 / n as f64;
        // Steps are correlated (half stay put), so allow a wide band.
        assert!((f - 0.5).abs() < 0.02, "{f}");
    }

    #[test]
    fn constant_series_has_zero_halfwidth() {
        assert_eq!(batch_means_ci(&vec![1.0; 100], 10).unwrap(), 0.0);
        assert!(batch_means_ci(&[1.0; 10], 10).is_err());
    }

    #[test]
    fn bernoulli_halfwidth_matches_iid_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<f64> = (0..100_000).map(|_| (rng.random::<f64>() < 0.4) as u8 as f64).collect();
        let h = batch_means_ci(&s, 50).unwrap();
        let iid = 1.96 * (0.24f64 / 1e5).sqrt();
        assert!(h > iid / 2.0 && h < iid * 2.0, "{h} vs {iid}");
    }

    #[test]
    fn config_checks() {
        assert!(ChainConfig { burn_in: 10, steps: 10, ..Default::default() }.validate().is_err());
        assert!(ChainConfig::default().validate().is_ok());
        assert_eq!(ChainConfig::default().kept(), 90_000);
    }
}
