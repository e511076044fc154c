//! `dispbound`: relation censuses, displacement-function families, the
//! minimax solver, convexity scans and the hyperbolic displacement test.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use dispbound::convexity::{pd_scan, tangency_point, tangent_curve_residual, Region2};
use dispbound::dispfun::FunctionFamily;
use dispbound::freegroup::{enumerate_sphere, SphereIndexing};
use dispbound::golden::{self, GoldenDiff};
use dispbound::hyperbolic::{minimize_over_base_point, run_trials, sample_schottky, SchottkyConfig};
use dispbound::minimax::{closed_form_alpha, minimize, uniqueness_probe, verify_uniform_optimum, Objective, SolverConfig};
use dispbound::relations::{enumerate_relations, relation_count, RelationCensus};

use output::{Format, Report};

#[derive(Parser, Debug)]
#[command(name = "dispbound", version, about = "Displacement-function minimax and hyperbolic displacement bounds")]
struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Enumerate the relation census (γ, s, S(γ)) for rank n and radius k.
    Relations(RelationsArgs),
    /// List the displacement functions built from the census.
    Family(RankRadius),
    /// Minimize F or G over the simplex.
    Minimize(MinimizeArgs),
    /// Check that the uniform point attains the closed-form optimum.
    Verify(VerifyArgs),
    /// Positive-definiteness scans of the two-variable Hessians.
    Convexity(ConvexityArgs),
    /// Test the displacement lower bound on seeded Schottky groups.
    HyperbolicTest(HyperbolicArgs),
    /// Multi-start agreement and closed-form match for rank n.
    Conjecture(ConjectureArgs),
}

#[derive(Args, Debug, Serialize)]
struct RankRadius {
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..=26))]
    n: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..=12))]
    k: u64,
}

impl RankRadius {
    fn get(&self) -> (usize, usize) {
        (self.n as usize, self.k as usize)
    }
}

#[derive(Args, Debug, Serialize)]
struct RelationsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    rk: RankRadius,
    /// Diff against the bundled reference tables (n = 2, k ∈ {2, 3}).
    #[arg(long)]
    paper_check: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ObjectiveArg {
    F,
    G,
}

#[derive(Args, Debug, Serialize)]
struct SolverArgs {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    restarts: usize,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> anyhow::Result<SolverConfig> {
        if !(self.tol > 0.0) || self.restarts == 0 || self.max_iter == 0 {
            return Err(usage("tol, restarts and max-iter must be positive"));
        }
        Ok(SolverConfig {
            tol: self.tol,
            max_iter: self.max_iter,
            restarts: self.restarts,
            seed: self.seed,
            ..SolverConfig::default()
        })
    }
}

#[derive(Args, Debug, Serialize)]
struct MinimizeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    rk: RankRadius,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::F)]
    objective: ObjectiveArg,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    /// Add a start with one coordinate pinned near zero.
    #[arg(long)]
    adversarial_start: bool,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    #[command(flatten)]
    #[serde(flatten)]
    rk: RankRadius,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
    /// Also diff the census against the bundled reference tables.
    #[arg(long)]
    paper_check: bool,
}

#[derive(Args, Debug, Serialize)]
struct ConvexityArgs {
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug, Serialize)]
struct HyperbolicArgs {
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..=8))]
    k: u64,
    /// Number of seeded Schottky pairs.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Random base points per pair.
    #[arg(long, default_value_t = 10)]
    base_points: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Disk radii as a fraction of half the minimal centre gap, in (0, 1).
    #[arg(long, default_value_t = 0.9)]
    radius_factor: f64,
    /// Also search each pair for the base point of least displacement.
    #[arg(long)]
    infimum: bool,
    /// Write per-run margins as CSV.
    #[arg(long)]
    emit: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ConjectureArgs {
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(2..=26))]
    n: u64,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(2..=12))]
    k: u64,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverArgs,
}

/// Bad arguments that clap cannot catch; mapped to exit code 2.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Library parameter errors are usage errors.
fn lib<T>(r: dispbound::Result<T>) -> anyhow::Result<T> {
    r.map_err(|e| match e {
        dispbound::Error::InvalidParameter(_) | dispbound::Error::CapExceeded { .. } => usage(e.to_string()),
        other => other.into(),
    })
}

/// Loads a census from `DISPBOUND_CACHE_DIR` or computes and stores it.
fn census(n: usize, k: usize) -> anyhow::Result<RelationCensus> {
    let Some(dir) = std::env::var_os("DISPBOUND_CACHE_DIR") else {
        return lib(enumerate_relations(n, k));
    };
    let path = PathBuf::from(dir).join(format!("census-n{n}-k{k}.json"));
    if let Ok(text) = std::fs::read_to_string(&path) {
        if let Ok(c) = serde_json::from_str::<RelationCensus>(&text) {
            if c.n == n && c.k == k && c.total() as u128 == relation_count(n, k) {
                return Ok(c);
            }
        }
    }
    let c = lib(enumerate_relations(n, k))?;
    std::fs::create_dir_all(path.parent().expect("cache file has a parent"))
        .with_context(|| format!("creating cache directory for {}", path.display()))?;
    std::fs::write(&path, serde_json::to_vec(&c)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(c)
}

fn family(n: usize, k: usize) -> anyhow::Result<(FunctionFamily, RelationCensus, SphereIndexing)> {
    let c = census(n, k)?;
    let ix = lib(enumerate_sphere(n, k))?;
    let fam = lib(FunctionFamily::build(&c, &ix))?;
    Ok((fam, c, ix))
}

fn reference_diff(n: usize, k: usize, c: &RelationCensus, ix: &SphereIndexing) -> anyhow::Result<GoldenDiff> {
    if n != 2 || !(2..=3).contains(&k) {
        return Err(usage("--paper-check needs --n 2 and --k 2 or 3"));
    }
    let expected: Vec<_> = golden::tables_for_radius(k)?
        .iter()
        .map(|t| golden::normalize(t, ix))
        .collect::<dispbound::Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(if k == 2 {
        golden::diff(&expected, &c.relations)
    } else {
        golden::diff(&expected, c.with_product_length(0))
    })
}

fn cmd_relations(a: &RelationsArgs) -> anyhow::Result<Report> {
    let (n, k) = a.rk.get();
    let c = census(n, k)?;
    let mut report = Report::new(json!({
        "n": n,
        "k": k,
        "total": c.total(),
        "count_by_product_length": c.count_by_product_length,
        "relations": c.relations,
    }));
    report.csv = output::relations_csv(&c);
    if a.paper_check {
        let ix = lib(enumerate_sphere(n, k))?;
        let diff = reference_diff(n, k, &c, &ix)?;
        report.summary = Some(format!(
            "reference tables: {} expected, {} missing, {} unexpected",
            diff.expected,
            diff.missing.len(),
            diff.unexpected.len()
        ));
        report.failed = !diff.is_clean();
        report.result["reference_diff"] = serde_json::to_value(&diff)?;
    }
    Ok(report)
}

fn cmd_family(a: &RankRadius) -> anyhow::Result<Report> {
    let (n, k) = a.get();
    let (fam, _, _) = family(n, k)?;
    let mut report = Report::new(json!({
        "n": n,
        "k": k,
        "d": fam.d(),
        "count": fam.functions().len(),
        "functions": fam.functions(),
    }));
    report.csv = output::family_csv(&fam);
    Ok(report)
}

fn cmd_minimize(a: &MinimizeArgs) -> anyhow::Result<Report> {
    let (n, k) = a.rk.get();
    let (fam, _, _) = family(n, k)?;
    let cfg = SolverConfig {
        adversarial_start: a.adversarial_start,
        ..a.solver.config()?
    };
    let which = match a.objective {
        ObjectiveArg::F => Objective::F,
        ObjectiveArg::G => Objective::G,
    };
    let r = lib(minimize(&fam, which, &cfg))?;
    let mut report = Report::new(serde_json::to_value(&r)?);
    report.csv = output::point_csv(r.x_star.coords());
    report.summary = Some(format!(
        "alpha*={:.9} closed form={} gap={:.1e} max|x-uniform|={:.1e} converged={}",
        r.alpha_star, r.closed_form, r.residuals.relative_gap, r.residuals.max_deviation_from_uniform, r.converged
    ));
    Ok(report)
}

fn cmd_verify(a: &VerifyArgs) -> anyhow::Result<Report> {
    let (n, k) = a.rk.get();
    let (fam, c, ix) = family(n, k)?;
    let r = lib(minimize(&fam, Objective::F, &a.solver.config()?))?;
    let uniform = verify_uniform_optimum(&fam);
    let gap = r.residuals.relative_gap;
    let dev = r.residuals.max_deviation_from_uniform;
    let mut passed = gap < 1e-6 && dev < 1e-6 && uniform.passed();
    let mut result = json!({
        "n": n,
        "k": k,
        "closed_form": r.closed_form,
        "alpha_star": r.alpha_star,
        "relative_gap": gap,
        "max_deviation_from_uniform": dev,
        "uniform": uniform,
        "kkt": r.kkt,
        "converged": r.converged,
    });
    if a.paper_check {
        let diff = reference_diff(n, k, &c, &ix)?;
        passed &= diff.is_clean();
        result["reference_diff"] = serde_json::to_value(&diff)?;
    }
    result["passed"] = json!(passed);
    let mut report = Report::new(result);
    report.csv = output::restarts_csv(&r);
    report.summary = Some(if passed {
        format!("alpha={}, x*=uniform, gap<1e-6", r.closed_form)
    } else {
        format!("FAIL: alpha*={:.9} expected {} (gap={gap:.1e}, max|x-uniform|={dev:.1e})", r.alpha_star, r.closed_form)
    });
    report.failed = !passed;
    Ok(report)
}

fn cmd_convexity(a: &ConvexityArgs) -> anyhow::Result<Report> {
    if a.samples == 0 {
        return Err(usage("--samples must be positive"));
    }
    let cf = lib(pd_scan(Region2::Cf, a.samples, a.seed))?;
    let cg = lib(pd_scan(Region2::Cg, a.samples, a.seed))?;
    let (px, py) = tangency_point();
    let tangency = json!({
        "point": [px, py],
        "line_residual": Region2::Cf.residual(px, py),
        "curve_residual": tangent_curve_residual(px, py),
    });
    let passed = cf.all_positive_definite() && cg.all_positive_definite();
    let mut report = Report::new(json!({ "scans": [cf, cg], "tangency": tangency, "passed": passed }));
    report.csv = output::scans_csv(&[&cf, &cg]);
    report.summary = Some(format!(
        "C_f: {}/{} positive definite; C_g: {}/{} positive definite",
        cf.positive_definite, cf.samples, cg.positive_definite, cg.samples
    ));
    report.failed = !passed;
    Ok(report)
}

fn cmd_hyperbolic(a: &HyperbolicArgs) -> anyhow::Result<Report> {
    let k = a.k as usize;
    if a.trials == 0 || a.base_points == 0 {
        return Err(usage("--trials and --base-points must be positive"));
    }
    let cfg = SchottkyConfig {
        radius_factor: a.radius_factor,
        ..SchottkyConfig::default()
    };
    let trials = lib(run_trials(a.seed, a.trials, a.base_points, k, &cfg))?;
    let min_margin = trials.iter().map(|t| t.report.margin).fold(f64::INFINITY, f64::min);
    let negatives = trials.iter().filter(|t| !t.report.holds()).count();
    let mut result = json!({
        "k": k,
        "family": "schottky (ping-pong certified)",
        "bound": trials[0].report.bound,
        "runs": trials.len(),
        "min_margin": min_margin,
        "negative_margins": negatives,
        "trials": trials,
    });
    let mut failed = negatives > 0;
    if a.infimum {
        let mut inf = Vec::with_capacity(a.trials);
        for i in 0..a.trials as u64 {
            let seed = a.seed.wrapping_add(i);
            let pair = lib(sample_schottky(seed, &cfg))?;
            let r = lib(minimize_over_base_point(&pair, k))?;
            failed |= !r.holds();
            inf.push(json!({ "seed": seed, "report": r }));
        }
        result["base_point_search"] = json!(inf);
    }
    let csv = output::margins_csv(&trials);
    if let Some(path) = &a.emit {
        output::write_csv(path, &csv).with_context(|| format!("writing {}", path.display()))?;
    }
    let mut report = Report::new(result);
    report.csv = csv;
    report.summary = Some(format!(
        "{} runs, bound={:.5}, min margin={min_margin:.5}, negative margins={negatives}",
        trials.len(),
        trials[0].report.bound
    ));
    report.failed = failed;
    Ok(report)
}

fn cmd_conjecture(a: &ConjectureArgs) -> anyhow::Result<Report> {
    let (n, k) = (a.n as usize, a.k as usize);
    let (fam, _, _) = family(n, k)?;
    let cfg = a.solver.config()?;
    let r = lib(minimize(&fam, Objective::F, &cfg))?;
    let probe = lib(uniqueness_probe(&fam, Objective::F, &cfg))?;
    let target = closed_form_alpha(n, k);
    let rel = (r.alpha_star - target).abs() / target;
    let supported = probe.agree && rel <= 1e-6;
    let status = if supported { "conjecture-supported" } else { "conjecture-not-supported" };
    let mut report = Report::new(json!({
        "n": n,
        "k": k,
        "d": fam.d(),
        "alpha_star": r.alpha_star,
        "closed_form": target,
        "relative_gap": rel,
        "max_pairwise_distance": probe.max_pairwise_distance,
        "restart_alphas": probe.alphas,
        "status": status,
        "ordering": "rank-n letter order is a convention; counts and optimum do not depend on it",
    }));
    report.csv = output::restarts_csv(&r);
    report.summary = Some(format!("{status}: alpha*={:.6} vs {target} (rel {rel:.1e}), restart spread {:.1e}", r.alpha_star, probe.max_pairwise_distance));
    report.failed = !supported;
    Ok(report)
}

fn subcommand_parts(cmd: &Command) -> anyhow::Result<(&'static str, Value, Option<u64>)> {
    Ok(match cmd {
        Command::Relations(a) => ("relations", serde_json::to_value(a)?, None),
        Command::Family(a) => ("family", serde_json::to_value(a)?, None),
        Command::Minimize(a) => ("minimize", serde_json::to_value(a)?, Some(a.solver.seed)),
        Command::Verify(a) => ("verify", serde_json::to_value(a)?, Some(a.solver.seed)),
        Command::Convexity(a) => ("convexity", serde_json::to_value(a)?, Some(a.seed)),
        Command::HyperbolicTest(a) => ("hyperbolic-test", serde_json::to_value(a)?, Some(a.seed)),
        Command::Conjecture(a) => ("conjecture", serde_json::to_value(a)?, Some(a.solver.seed)),
    })
}

fn run(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let (name, config, seed) = subcommand_parts(&cli.command)?;
    let report = match &cli.command {
        Command::Relations(a) => cmd_relations(a)?,
        Command::Family(a) => cmd_family(a)?,
        Command::Minimize(a) => cmd_minimize(a)?,
        Command::Verify(a) => cmd_verify(a)?,
        Command::Convexity(a) => cmd_convexity(a)?,
        Command::HyperbolicTest(a) => cmd_hyperbolic(a)?,
        Command::Conjecture(a) => cmd_conjecture(a)?,
    };
    let meta = output::meta(name, config, seed, cli.threads);
    output::emit(&report, &meta, cli.format, cli.output.as_deref())?;
    Ok(!report.failed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
