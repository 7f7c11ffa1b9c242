use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use hsm::fit::{compare, fit_hsm};
use hsm::markov::{auto_basis, BasisOptions, MarkovBasis};
use hsm::mcmc::{exact_test, histogram_series, ChainConfig};
use hsm::spec::ModelSpec;
use hsm::{datasets, Complex, ErrorKind, Subspace, Table, VarSet};

#[derive(Parser)]
#[command(name = "hsm", version, about = "Hierarchical subspace models for contingency tables")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Components, dividers, closure and tightness of a model.
    Decompose(DecomposeArgs),
    /// Maximum likelihood fit, with deviance against the saturated or an alternative model.
    Fit(FitArgs),
    /// Exact conditional test of --model within --alt-model (saturated if omitted).
    Test(TestArgs),
    /// Build, print or cache the Markov basis of a model.
    Basis(BasisArgs),
    /// List the bundled tables and models, or write them to --out.
    Datasets(DatasetArgs),
}

#[derive(Args)]
struct DecomposeArgs {
    /// Model spec: a JSON file or builtin:<name>.
    #[arg(long)]
    model: String,
    /// Complex to check the model against, e.g. "1,2;1,3;2,3". Repeatable.
    #[arg(long = "hsm-of")]
    hsm_of: Vec<String>,
}

#[derive(Args)]
struct FitArgs {
    /// Table: JSON or CSV file, or builtin:<name>.
    #[arg(long)]
    table: String,
    #[arg(long)]
    model: String,
    #[arg(long)]
    alt_model: Option<String>,
    /// Directory for fit.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long)]
    table: String,
    /// Null model.
    #[arg(long)]
    model: String,
    #[arg(long)]
    alt_model: Option<String>,
    #[arg(long, default_value_t = 100_000)]
    steps: u64,
    #[arg(long, default_value_t = 10_000)]
    burn_in: u64,
    /// Overridden by HSM_SEED when set.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    thinning: u64,
    #[arg(long, default_value_t = 1)]
    chains: usize,
    #[arg(long, default_value_t = 40)]
    bins: usize,
    #[command(flatten)]
    basis: BasisFlags,
    /// Directory for test.json, samples.csv and histogram.csv.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BasisFlags {
    /// Directory of cached bases keyed by configuration fingerprint.
    #[arg(long)]
    basis_cache: Option<PathBuf>,
    /// Fall back to an uncertified lattice basis.
    #[arg(long)]
    allow_lattice_basis: bool,
    /// Use this basis file (text format) instead of constructing one.
    #[arg(long)]
    import: Option<PathBuf>,
}

#[derive(Args)]
struct BasisArgs {
    #[arg(long)]
    model: String,
    /// Table whose structural zeros define the support.
    #[arg(long)]
    table: Option<String>,
    #[command(flatten)]
    basis: BasisFlags,
    /// Write the basis in text format to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `x` with six significant digits.
fn sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

fn load_spec(arg: &str) -> Result<ModelSpec> {
    match arg.strip_prefix("builtin:") {
        Some(name) => Ok(datasets::model(name)?),
        None => ModelSpec::load(Path::new(arg)).with_context(|| format!("reading model {arg}")),
    }
}

fn load_table(arg: &str, shape: Option<Vec<usize>>) -> Result<Table> {
    if let Some(name) = arg.strip_prefix("builtin:") {
        return Ok(datasets::table(name)?);
    }
    let path = Path::new(arg);
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        let file = fs::File::open(path).with_context(|| format!("opening {arg}"))?;
        return Table::from_csv(file, shape).with_context(|| format!("reading table {arg}"));
    }
    Table::load(path).with_context(|| format!("reading table {arg}"))
}

fn model_for(spec: &str, table: &Table) -> Result<Subspace> {
    let s = load_spec(spec)?;
    s.build_for(table).with_context(|| format!("building model {spec}"))
}

fn parse_complex(m: usize, text: &str) -> Result<Complex> {
    let mut facets = Vec::new();
    for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let fs: Vec<usize> = part
            .split(',')
            .map(|f| f.trim().parse().with_context(|| format!("bad factor in {part:?}")))
            .collect::<Result<_>>()?;
        facets.push(VarSet::of(&fs));
    }
    Ok(Complex::new(m, facets)?)
}

fn list(sets: &[VarSet]) -> String {
    sets.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
}

fn decompose(a: &DecomposeArgs) -> Result<()> {
    let spec = load_spec(&a.model)?;
    let l = spec.build()?;
    println!("model: {}", spec.name.as_deref().unwrap_or(&a.model));
    println!("dimension: {}", l.dim());
    let comps = l.connected_components()?;
    if comps.len() > 1 {
        println!("connected components: {}", list(&comps));
    } else {
        let d = l.decompose()?;
        println!("components: {}", list(&d.components));
        println!("dividers: {}", list(&d.dividers));
    }
    if l.has_mask() {
        println!("closure: undefined with structural zeros");
    } else {
        let closure = l.hierarchical_closure()?;
        println!("closure: {}", list(closure.facets()));
        if closure.is_connected() {
            let cc = closure.maximal_compact_components()?;
            println!("closure components: {}", list(&cc.components));
            println!("closure dividers: {}", list(&closure.dividers()?));
        }
        println!("tight: {}", l.is_tight_hsm()?);
        if comps.len() == 1 {
            let (ambient, _) = l.ambient_decomposable()?;
            println!("ambient: {}", list(ambient.facets()));
        }
    }
    for text in &a.hsm_of {
        let delta = parse_complex(l.m(), text)?;
        println!("hsm of {}: {}", list(delta.facets()), l.is_hsm_of(&delta)?);
    }
    Ok(())
}

fn fit(a: &FitArgs) -> Result<()> {
    let shape = load_spec(&a.model)?.shape;
    let t = load_table(&a.table, Some(shape))?;
    let l = model_for(&a.model, &t)?;
    let r = fit_hsm(&l, &t)?;
    info!("{} iterations, method {}", r.iterations, r.method);
    println!("n: {}", r.n);
    println!("dimension: {}", r.dim);
    println!("G2 vs saturated: {}", sig(r.g2));
    println!("df: {}", r.df);
    println!("p (asymptotic): {}", sig(hsm::fit::asymptotic_pvalue(r.g2, r.df)));
    let mut out = serde_json::json!({ "fit": serde_json::from_str::<serde_json::Value>(&r.to_json())? });
    if let Some(alt) = &a.alt_model {
        let big = model_for(alt, &t)?;
        let c = compare(&t, &l, Some(&big))?;
        println!("G2 vs alternative: {}", sig(c.g2));
        println!("df vs alternative: {}", c.df);
        println!("p vs alternative (asymptotic): {}", sig(c.p_asymptotic));
        out["comparison"] = serde_json::json!({ "g2": c.g2, "df": c.df, "p_asymptotic": c.p_asymptotic });
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("fit.json"), serde_json::to_string_pretty(&out)?)?;
    }
    Ok(())
}

fn obtain_basis(l: &Subspace, flags: &BasisFlags) -> Result<MarkovBasis> {
    if let Some(path) = &flags.import {
        let text = fs::read_to_string(path).with_context(|| format!("reading basis {}", path.display()))?;
        return Ok(MarkovBasis::from_text(&text, l)?);
    }
    let cached = flags
        .basis_cache
        .as_ref()
        .map(|d| d.join(format!("{}.basis", l.configuration().fingerprint())));
    if let Some(p) = cached.as_ref().filter(|p| p.exists()) {
        info!("using cached basis {}", p.display());
        return Ok(MarkovBasis::from_text(&fs::read_to_string(p)?, l)?);
    }
    let b = auto_basis(
        l,
        &BasisOptions {
            allow_lattice: flags.allow_lattice_basis,
            ..Default::default()
        },
    )?;
    if let Some(p) = cached.filter(|_| b.is_certified()) {
        fs::create_dir_all(p.parent().expect("cache file has a parent"))?;
        fs::write(&p, b.to_text())?;
    }
    Ok(b)
}

fn basis(a: &BasisArgs) -> Result<()> {
    let spec = load_spec(&a.model)?;
    let l = match &a.table {
        Some(t) => model_for(&a.model, &load_table(t, Some(spec.shape.clone()))?)?,
        None => spec.build()?,
    };
    let b = obtain_basis(&l, &a.basis)?;
    println!("moves: {}", b.len());
    println!("max degree: {}", b.max_degree());
    println!("certified: {}", b.is_certified());
    match &a.out {
        Some(p) => fs::write(p, b.to_text())?,
        None => print!("{b}"),
    }
    Ok(())
}

fn test(a: &TestArgs) -> Result<()> {
    let shape = load_spec(&a.model)?.shape;
    let t = load_table(&a.table, Some(shape))?;
    let small = model_for(&a.model, &t)?;
    let big = a.alt_model.as_ref().map(|m| model_for(m, &t)).transpose()?;
    let mut seed = a.seed;
    if let Ok(v) = std::env::var("HSM_SEED") {
        seed = v.trim().parse().with_context(|| format!("HSM_SEED={v:?} is not an integer"))?;
    }
    let cfg = ChainConfig {
        steps: a.steps,
        burn_in: a.burn_in,
        seed,
        thinning: a.thinning,
        chains: a.chains,
    };
    cfg.validate()?;
    let b = obtain_basis(&small, &a.basis)?;
    if !b.is_certified() && !a.basis.allow_lattice_basis {
        return Err(hsm::Error::UncertifiedBasis.into());
    }
    let r = exact_test(&t, &small, big.as_ref(), &b, &cfg)?;
    println!("moves: {}", b.len());
    println!("G2: {}", sig(r.observed_statistic));
    println!("df: {}", r.df);
    println!("p (asymptotic): {}", sig(hsm::fit::asymptotic_pvalue(r.observed_statistic, r.df)));
    println!("p (MCMC): {} +/- {}", sig(r.p_hat), sig(r.ci_halfwidth));
    println!("acceptance rate: {}", sig(r.acceptance_rate));
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("test.json"), r.summary_json())?;
        let samples: String = r.samples.iter().map(|s| format!("{s}\n")).collect();
        fs::write(dir.join("samples.csv"), format!("statistic\n{samples}"))?;
        let mut hist = String::from("lower,upper,density,chi_square_density\n");
        for h in histogram_series(&r, a.bins) {
            hist.push_str(&format!("{},{},{},{}\n", h.lower, h.upper, h.density, h.chi_square_density));
        }
        fs::write(dir.join("histogram.csv"), hist)?;
    }
    Ok(())
}

fn list_datasets(a: &DatasetArgs) -> Result<()> {
    for name in datasets::table_names() {
        let t = datasets::table(name)?;
        println!("table {name}: shape {:?}, n = {}", t.shape().levels(), t.n());
    }
    for name in datasets::model_names() {
        println!("model {name}");
    }
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        for name in datasets::table_names() {
            fs::write(dir.join(format!("{name}.json")), datasets::table(name)?.to_json())?;
        }
        for name in datasets::model_names() {
            let json = datasets::model_json(name).expect("listed model");
            fs::write(dir.join(format!("{name}.json")), json)?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<hsm::Error>()) {
        Some(e) => match e.kind() {
            ErrorKind::Input => 2,
            ErrorKind::Numerical => 3,
            ErrorKind::Basis => 4,
        },
        None => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Decompose(a) => decompose(a),
        Command::Fit(a) => fit(a),
        Command::Test(a) => test(a),
        Command::Basis(a) => basis(a),
        Command::Datasets(a) => list_datasets(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig(1.8512345), "1.85123");
        assert_eq!(sig(142.42133), "142.421");
        assert_eq!(sig(0.3961234), "0.396123");
        assert_eq!(sig(2.0), "2");
        assert_eq!(sig(1.5e-7), "1.50000e-7");
    }

    #[test]
    fn complex_argument() {
        let c = parse_complex(3, "1,2; 2,3").unwrap();
        assert_eq!(c.facets().len(), 2);
    }
}
