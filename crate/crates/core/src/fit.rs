//! Maximum likelihood fitting.
//!
//! A model is fitted locally on its maximal compact components and the
//! component fits are glued with the divider marginals. Components are
//! fitted by IPF when every generator block is a set of disjoint 0/1
//! indicators, and by Newton's method on the Poisson log-likelihood
//! otherwise.

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::subspace::Subspace;
use crate::table::{Shape, Table};
use crate::varset::VarSet;

#[derive(Clone, Copy, Debug)]
pub struct FitOptions {
    /// Residual tolerance per sufficient statistic, relative to `n`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tolerance: 1e-10,
            max_iterations: 10_000,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FitResult {
    pub shape: Vec<usize>,
    /// Fitted probabilities, row-major over all cells (0 on structural zeros).
    pub p_hat: Vec<f64>,
    pub n: u64,
    /// Sufficient statistic `A x` for the model's generators.
    pub sufficient: Vec<i64>,
    pub loglik: f64,
    /// Deviance against the saturated model.
    pub g2: f64,
    /// Degrees of freedom against the saturated model.
    pub df: usize,
    pub dim: usize,
    pub iterations: usize,
    pub converged: bool,
    pub max_residual: f64,
    pub method: String,
}

impl FitResult {
    /// Fitted counts `n p_hat`.
    pub fn fitted_counts(&self) -> Vec<f64> {
        self.p_hat.iter().map(|p| p * self.n as f64).collect()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            shape: &'a [usize],
            n: u64,
            fitted: Vec<f64>,
            g2: f64,
            df: usize,
            dim: usize,
            loglik: f64,
            iterations: usize,
            converged: bool,
            max_residual: f64,
            method: &'a str,
        }
        serde_json::to_string_pretty(&Out {
            shape: &self.shape,
            n: self.n,
            fitted: self.fitted_counts(),
            g2: self.g2,
            df: self.df,
            dim: self.dim,
            loglik: self.loglik,
            iterations: self.iterations,
            converged: self.converged,
            max_residual: self.max_residual,
            method: &self.method,
        })
        .expect("fit result serializes")
    }
}

fn check_frame(l: &Subspace, t: &Table) -> Result<()> {
    if l.shape() != t.shape() {
        return Err(Error::ShapeMismatch(format!(
            "model shape {:?}, table shape {:?}",
            l.shape().levels(),
            t.shape().levels()
        )));
    }
    if l.mask() != t.mask() {
        return Err(Error::ShapeMismatch("model and table have different structural zeros".into()));
    }
    if t.n() == 0 {
        return Err(Error::InvalidTable("table is empty".into()));
    }
    Ok(())
}

/// Max over generators of `|A(mu - x)|`, each row scaled by its largest entry.
fn residual(rows: &[Vec<i64>], x: &[f64], mu: &[f64]) -> f64 {
    rows.iter()
        .map(|r| {
            let scale = r.iter().map(|v| v.abs()).max().unwrap_or(1).max(1) as f64;
            let s: f64 = r.iter().zip(x.iter().zip(mu)).map(|(&a, (xi, mi))| a as f64 * (mi - xi)).sum();
            s.abs() / scale
        })
        .fold(0.0, f64::max)
}

struct Core {
    /// Fitted means over the support, summing to `n`.
    mu: Vec<f64>,
    iterations: usize,
    converged: bool,
    residual: f64,
    method: &'static str,
}

fn poisson_loglik(x: &[f64], eta: &[f64]) -> f64 {
    x.iter()
        .zip(eta)
        .map(|(&xi, &e)| if xi > 0.0 { xi * e } else { 0.0 } - e.exp())
        .sum()
}

fn fit_core(l: &Subspace, x: &[f64], opts: &FitOptions) -> Result<Core> {
    let n: f64 = x.iter().sum();
    if l.is_saturated_model() {
        return Ok(Core {
            mu: x.to_vec(),
            iterations: 0,
            converged: true,
            residual: 0.0,
            method: "saturated",
        });
    }
    if l.terms().iter().all(|t| t.is_indicator_block()) {
        return ipf(l, x, n, opts);
    }
    newton(l, x, n, opts)
}

fn ipf(l: &Subspace, x: &[f64], n: f64, opts: &FitOptions) -> Result<Core> {
    let s = x.len();
    // Each block is a partition of the support into groups of positions.
    let mut blocks: Vec<Vec<Vec<usize>>> = Vec::new();
    for rows in l.term_rows() {
        let mut covered = vec![false; s];
        let mut groups: Vec<Vec<usize>> = rows
            .iter()
            .map(|r| {
                let g: Vec<usize> = (0..s).filter(|&p| r[p] != 0).collect();
                for &p in &g {
                    covered[p] = true;
                }
                g
            })
            .collect();
        let rest: Vec<usize> = (0..s).filter(|&p| !covered[p]).collect();
        if !rest.is_empty() {
            groups.push(rest);
        }
        blocks.push(groups);
    }
    let targets: Vec<Vec<f64>> = blocks
        .iter()
        .map(|b| b.iter().map(|g| g.iter().map(|&p| x[p]).sum()).collect())
        .collect();
    let mut mu = vec![n / s as f64; s];
    let tol = opts.tolerance * n.max(1.0);
    let mut res = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        for (b, tg) in blocks.iter().zip(&targets) {
            for (g, &t) in b.iter().zip(tg) {
                let cur: f64 = g.iter().map(|&p| mu[p]).sum();
                if cur > 0.0 {
                    let f = t / cur;
                    for &p in g {
                        mu[p] *= f;
                    }
                }
            }
        }
        res = 0.0;
        for (b, tg) in blocks.iter().zip(&targets) {
            for (g, &t) in b.iter().zip(tg) {
                let cur: f64 = g.iter().map(|&p| mu[p]).sum();
                res = f64::max(res, (cur - t).abs());
            }
        }
        if res <= tol {
            return Ok(Core {
                mu,
                iterations: it,
                converged: true,
                residual: res,
                method: "ipf",
            });
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        residual: res,
    })
}

fn newton(l: &Subspace, x: &[f64], n: f64, opts: &FitOptions) -> Result<Core> {
    let s = x.len();
    let r = l.dim();
    let a = DMatrix::from_fn(r, s, |i, j| l.basis()[i][j] as f64);
    let tol = opts.tolerance * n.max(1.0);
    // The constant lies in every model, so a flat start is feasible.
    let mut eta = vec![(n / s as f64).ln(); s];
    let mut ll = poisson_loglik(x, &eta);
    let mut res = f64::INFINITY;
    for it in 1..=opts.max_iterations {
        let mu: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        res = residual(l.basis(), x, &mu);
        if res <= tol {
            let total: f64 = mu.iter().sum();
            return Ok(Core {
                mu: mu.iter().map(|m| m * n / total).collect(),
                iterations: it - 1,
                converged: true,
                residual: res,
                method: "newton",
            });
        }
        let grad = DVector::from_fn(r, |i, _| (0..s).map(|j| a[(i, j)] * (x[j] - mu[j])).sum());
        let mut h = DMatrix::<f64>::zeros(r, r);
        for j in 0..s {
            if mu[j] == 0.0 {
                continue;
            }
            for i in 0..r {
                let aij = a[(i, j)];
                if aij == 0.0 {
                    continue;
                }
                let w = aij * mu[j];
                for k in i..r {
                    h[(i, k)] += w * a[(k, j)];
                }
            }
        }
        for i in 0..r {
            for k in 0..i {
                h[(i, k)] = h[(k, i)];
            }
        }
        let delta = match h.clone().cholesky() {
            Some(c) => c.solve(&grad),
            None => h
                .svd(true, true)
                .solve(&grad, 1e-12)
                .map_err(|e| Error::Internal(format!("singular information matrix: {e}")))?,
        };
        let step: Vec<f64> = (0..s).map(|j| (0..r).map(|i| a[(i, j)] * delta[i]).sum()).collect();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = eta.iter().zip(&step).map(|(e, d)| e + t * d).collect();
            let cll = poisson_loglik(x, &cand);
            if cll.is_finite() && cll >= ll - 1e-13 * ll.abs().max(1.0) {
                eta = cand;
                ll = cll;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return Err(Error::MleNonexistent { residual: res });
        }
        debug!("newton iteration {it}: residual {res:.3e}, step {t}");
    }
    Err(Error::NotConverged {
        iterations: opts.max_iterations,
        residual: res,
    })
}

fn loglik_of(x: &[f64], p: &[f64]) -> f64 {
    x.iter()
        .zip(p)
        .filter(|(&xi, _)| xi > 0.0)
        .map(|(&xi, &pi)| xi * pi.ln())
        .sum()
}

fn g2_saturated(x: &[f64], p: &[f64], n: f64) -> f64 {
    2.0 * x
        .iter()
        .zip(p)
        .filter(|(&xi, _)| xi > 0.0)
        .map(|(&xi, &pi)| xi * (xi / (n * pi)).ln())
        .sum::<f64>()
}

fn finish(l: &Subspace, t: &Table, p_hat: Vec<f64>, iterations: usize, converged: bool, method: String) -> FitResult {
    let n = t.n() as f64;
    let xs: Vec<f64> = l.support().iter().map(|&i| t.counts()[i] as f64).collect();
    let ps: Vec<f64> = l.support().iter().map(|&i| p_hat[i]).collect();
    let mu: Vec<f64> = ps.iter().map(|p| p * n).collect();
    let counts: Vec<i64> = t.counts().iter().map(|&c| c as i64).collect();
    FitResult {
        shape: t.shape().levels().to_vec(),
        n: t.n(),
        sufficient: l.configuration().apply_dense(&counts),
        loglik: loglik_of(&xs, &ps),
        g2: g2_saturated(&xs, &ps, n),
        df: l.support().len() - l.dim(),
        dim: l.dim(),
        iterations,
        converged,
        max_residual: residual(l.basis(), &xs, &mu),
        method,
        p_hat,
    }
}

/// Fits `L` on the whole table without localization.
pub fn fit_component(l: &Subspace, t: &Table) -> Result<FitResult> {
    fit_component_with(l, t, &FitOptions::default())
}

pub fn fit_component_with(l: &Subspace, t: &Table, opts: &FitOptions) -> Result<FitResult> {
    check_frame(l, t)?;
    let x: Vec<f64> = l.support().iter().map(|&i| t.counts()[i] as f64).collect();
    let core = fit_core(l, &x, opts)?;
    debug!("{} fit: {} iterations, residual {:.3e}", core.method, core.iterations, core.residual);
    let n = t.n() as f64;
    let mut p = vec![0.0; t.shape().num_cells()];
    for (&i, m) in l.support().iter().zip(&core.mu) {
        p[i] = m / n;
    }
    Ok(finish(l, t, p, core.iterations, core.converged, core.method.to_string()))
}

/// A fitting strategy computed once per model and reusable across tables
/// with the same support.
#[derive(Clone, Debug)]
pub struct FitPlan {
    model: Subspace,
    kind: PlanKind,
}

#[derive(Clone, Debug)]
enum PlanKind {
    Saturated,
    Whole,
    Product { parts: Vec<PlanPart>, dividers: Vec<(VarSet, Vec<usize>, usize)> },
}

#[derive(Clone, Debug)]
struct PlanPart {
    set: VarSet,
    /// Full cell index to marginal cell index.
    map: Vec<usize>,
    plan: FitPlan,
}

impl FitPlan {
    pub fn new(l: &Subspace) -> Result<FitPlan> {
        let model = l.clone();
        if l.is_saturated_model() {
            return Ok(FitPlan { model, kind: PlanKind::Saturated });
        }
        if l.m() < 2 || l.m() > crate::subspace::MAX_DECOMPOSE_FACTORS {
            return Ok(FitPlan { model, kind: PlanKind::Whole });
        }
        let part = |c: VarSet, sub: Subspace| -> Result<PlanPart> {
            Ok(PlanPart {
                set: c,
                map: l.shape().marginal_map(c),
                plan: FitPlan::new(&sub)?,
            })
        };
        let comps = l.connected_components()?;
        if comps.len() > 1 {
            let parts = comps
                .iter()
                .map(|&c| part(c, l.component_model(c)?))
                .collect::<Result<Vec<_>>>()?;
            return Ok(FitPlan {
                model,
                kind: PlanKind::Product { parts, dividers: vec![] },
            });
        }
        let d = l.decompose()?;
        if d.components.len() < 2 {
            return Ok(FitPlan { model, kind: PlanKind::Whole });
        }
        let parts = d
            .components
            .iter()
            .zip(d.component_models)
            .map(|(&c, sub)| part(c, sub))
            .collect::<Result<Vec<_>>>()?;
        let dividers = d
            .dividers
            .iter()
            .map(|&s| {
                let ms = l.shape().marginal(s);
                (s, l.shape().marginal_map(s), ms.num_cells())
            })
            .collect();
        Ok(FitPlan {
            model,
            kind: PlanKind::Product { parts, dividers },
        })
    }

    pub fn model(&self) -> &Subspace {
        &self.model
    }

    /// Components the fit is localized to (the whole factor set when prime).
    pub fn components(&self) -> Vec<VarSet> {
        match &self.kind {
            PlanKind::Product { parts, .. } => parts.iter().map(|p| p.set).collect(),
            _ => vec![self.model.shape().all_factors()],
        }
    }

    pub fn dividers(&self) -> Vec<VarSet> {
        match &self.kind {
            PlanKind::Product { dividers, .. } => dividers.iter().map(|d| d.0).collect(),
            _ => vec![],
        }
    }

    fn marginal_counts(map: &[usize], cells: usize, counts: &[u64]) -> Vec<u64> {
        let mut out = vec![0u64; cells];
        for (i, &c) in counts.iter().enumerate() {
            out[map[i]] += c;
        }
        out
    }

    /// Fitted probabilities for dense `counts` on the model's support, with
    /// the iteration count summed over component fits.
    pub fn probabilities(&self, counts: &[u64], opts: &FitOptions) -> Result<(Vec<f64>, usize)> {
        let shape = self.model.shape();
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::InvalidTable("table is empty".into()));
        }
        let nf = n as f64;
        match &self.kind {
            PlanKind::Saturated => Ok((counts.iter().map(|&c| c as f64 / nf).collect(), 0)),
            PlanKind::Whole => {
                let x: Vec<f64> = self.model.support().iter().map(|&i| counts[i] as f64).collect();
                let core = fit_core(&self.model, &x, opts)?;
                let mut p = vec![0.0; shape.num_cells()];
                for (&i, m) in self.model.support().iter().zip(&core.mu) {
                    p[i] = m / nf;
                }
                Ok((p, core.iterations))
            }
            PlanKind::Product { parts, dividers } => {
                let fits = parts
                    .par_iter()
                    .map(|part| {
                        let mshape = part.plan.model.shape();
                        let mc = Self::marginal_counts(&part.map, mshape.num_cells(), counts);
                        part.plan.probabilities(&mc, opts)
                    })
                    .collect::<Result<Vec<_>>>()?;
                let div_counts: Vec<Vec<u64>> = dividers
                    .iter()
                    .map(|(_, map, cells)| Self::marginal_counts(map, *cells, counts))
                    .collect();
                let mut p = vec![0.0; shape.num_cells()];
                let mut zero_divider = false;
                for &i in self.model.support() {
                    let mut v = 1.0;
                    for (part, (fp, _)) in parts.iter().zip(&fits) {
                        v *= fp[part.map[i]];
                    }
                    for ((_, map, _), dc) in dividers.iter().zip(&div_counts) {
                        let c = dc[map[i]];
                        if c == 0 {
                            zero_divider = true;
                            v = 0.0;
                            break;
                        }
                        v /= c as f64 / nf;
                    }
                    p[i] = v;
                }
                if zero_divider {
                    warn!("a divider marginal is zero; cells below it are fitted as 0");
                }
                Ok((p, fits.iter().map(|f| f.1).sum()))
            }
        }
    }

    /// `sum_i x(i) log p_hat(i)` for dense counts.
    pub fn loglik(&self, counts: &[u64], opts: &FitOptions) -> Result<f64> {
        let n: u64 = counts.iter().sum();
        let nf = n as f64;
        let xlogx = |c: &[u64]| -> f64 {
            c.iter()
                .filter(|&&v| v > 0)
                .map(|&v| v as f64 * (v as f64 / nf).ln())
                .sum()
        };
        match &self.kind {
            PlanKind::Saturated => Ok(xlogx(counts)),
            PlanKind::Whole => {
                let (p, _) = self.probabilities(counts, opts)?;
                Ok(counts
                    .iter()
                    .zip(&p)
                    .filter(|(&c, _)| c > 0)
                    .map(|(&c, &pi)| c as f64 * pi.ln())
                    .sum())
            }
            PlanKind::Product { parts, dividers } => {
                let mut total = 0.0;
                for part in parts {
                    let mc = Self::marginal_counts(&part.map, part.plan.model.shape().num_cells(), counts);
                    total += part.plan.loglik(&mc, opts)?;
                }
                for (_, map, cells) in dividers {
                    total -= xlogx(&Self::marginal_counts(map, *cells, counts));
                }
                Ok(total)
            }
        }
    }

    pub fn fit(&self, t: &Table, opts: &FitOptions) -> Result<FitResult> {
        check_frame(&self.model, t)?;
        let (p, iterations) = self.probabilities(t.counts(), opts)?;
        let method = match &self.kind {
            PlanKind::Saturated => "saturated".to_string(),
            PlanKind::Whole => "whole".to_string(),
            PlanKind::Product { parts, .. } => format!("localized({} components)", parts.len()),
        };
        Ok(finish(&self.model, t, p, iterations, true, method))
    }
}

/// Localized maximum likelihood fit. Falls back to a whole-table fit when
/// the assembled estimate does not match the sufficient statistics.
pub fn fit_hsm(l: &Subspace, t: &Table) -> Result<FitResult> {
    fit_hsm_with(l, t, &FitOptions::default())
}

pub fn fit_hsm_with(l: &Subspace, t: &Table, opts: &FitOptions) -> Result<FitResult> {
    check_frame(l, t)?;
    let plan = FitPlan::new(l)?;
    let fit = plan.fit(t, opts)?;
    // Assembled fits carry component tolerances; allow for their product.
    let limit = (opts.tolerance * 1e3).max(1e-8) * t.n() as f64;
    if fit.max_residual > limit {
        warn!(
            "localized fit residual {:.3e} exceeds {limit:.3e}; refitting the whole table",
            fit.max_residual
        );
        return fit_component_with(l, t, opts);
    }
    Ok(fit)
}

/// Fits a model that splits along the levels of `b`: each slice model is
/// fitted on its own subtable and the fits are mixed with weights `n_j / n`.
pub fn fit_partitioned(l: &Subspace, b: VarSet, t: &Table) -> Result<FitResult> {
    check_frame(l, t)?;
    if b.is_empty() {
        return fit_hsm(l, t);
    }
    let bshape: Shape = l.shape().marginal(b);
    let mut total_dim = 0;
    let mut p = vec![0.0; t.shape().num_cells()];
    let n = t.n() as f64;
    let mut iterations = 0;
    for j in 0..bshape.num_cells() {
        let level = bshape.cell(j);
        let sub = t.slice(b, &level)?;
        if sub.support_dimension() == 0 {
            continue;
        }
        let sm = l.slice_model(b, &level)?;
        total_dim += sm.dim();
        let (_, cells, _) = l.slice_frame(b, &level)?;
        if sub.n() == 0 {
            warn!("slice {:?} is empty; it gets weight 0", level.iter().map(|v| v + 1).collect::<Vec<_>>());
            continue;
        }
        let f = fit_hsm(&sm, &sub)?;
        iterations += f.iterations;
        let w = sub.n() as f64 / n;
        for (k, &i) in cells.iter().enumerate() {
            p[i] = w * f.p_hat[k];
        }
    }
    if total_dim != l.dim() {
        return Err(Error::InvalidModel(format!(
            "model does not split along {b}: slice dimensions sum to {total_dim}, model has {}",
            l.dim()
        )));
    }
    Ok(finish(l, t, p, iterations, true, format!("partitioned{b}")))
}

/// Deviance `2 sum x log(p_big / p_small)` and `dim big - dim small`.
pub fn deviance(t: &Table, small: &FitResult, big: &FitResult) -> Result<(f64, usize)> {
    if small.dim > big.dim {
        return Err(Error::NotNested(format!(
            "small model has dimension {}, big model {}",
            small.dim, big.dim
        )));
    }
    let mut g2 = 0.0;
    for (i, &x) in t.counts().iter().enumerate() {
        if x == 0 {
            continue;
        }
        let (pb, ps) = (big.p_hat[i], small.p_hat[i]);
        if ps == 0.0 {
            return Ok((f64::INFINITY, big.dim - small.dim));
        }
        g2 += x as f64 * (pb / ps).ln();
    }
    Ok((2.0 * g2, big.dim - small.dim))
}

#[derive(Clone, Debug, Serialize)]
pub struct Comparison {
    pub g2: f64,
    pub df: usize,
    pub p_asymptotic: f64,
    pub small: FitResult,
    pub big: FitResult,
}

/// Fits two nested models and compares them. `big = None` means saturated.
pub fn compare(t: &Table, small: &Subspace, big: Option<&Subspace>) -> Result<Comparison> {
    let small_fit = fit_hsm(small, t)?;
    let big_fit = match big {
        Some(b) => {
            if !small.is_subspace_of(b)? {
                return Err(Error::NotNested("the small model is not contained in the big model".into()));
            }
            fit_hsm(b, t)?
        }
        None => {
            let sat = Subspace::hierarchical(
                t.shape().clone(),
                &crate::hypergraph::Complex::saturated(t.shape().m()),
                Some(t.mask().to_vec()),
            )?;
            fit_hsm(&sat, t)?
        }
    };
    let (g2, df) = deviance(t, &small_fit, &big_fit)?;
    Ok(Comparison {
        g2,
        df,
        p_asymptotic: asymptotic_pvalue(g2, df),
        small: small_fit,
        big: big_fit,
    })
}

/// Upper tail of the chi-square distribution with `df` degrees of freedom.
pub fn asymptotic_pvalue(g2: f64, df: usize) -> f64 {
    if df == 0 || g2 <= 0.0 {
        return 1.0;
    }
    if !g2.is_finite() {
        return 0.0;
    }
    ChiSquared::new(df as f64).map(|c| c.sf(g2)).unwrap_or(f64::NAN)
}
