//! One line per acceptance criterion. Runs as a plain binary so the lines are
//! printed under `cargo test` without `--nocapture`; exits non-zero on any FAIL.

use std::time::{Duration, Instant};

use dispbound::convexity::{
    det_hessian_f, det_hessian_g, f_critical_curve, g_critical_curve, hessian_f, hessian_g, pd_scan,
    region_d_report, tangency_point, tangent_curve_residual, Region2,
};
use dispbound::dispfun::{FunctionFamily, FunctionTag, SimplexPoint};
use dispbound::freegroup::enumerate_sphere;
use dispbound::golden::{self, TableId};
use dispbound::hyperbolic::{run_trials, SchottkyConfig};
use dispbound::minimax::{closed_form_alpha, minimize, uniqueness_probe, MinimaxResult, Objective, SolverConfig};
use dispbound::relations::{
    census_for_k3_length0, enumerate_relations, r_k_sum_over_cancellations, r_k_sum_over_lengths, verify_census,
};
use dispbound::rng::stream_rng;
use rand::Rng;

const ALPHA_REL_TOL: f64 = 1e-6;
const UNIFORM_TOL: f64 = 1e-6;
const AGREEMENT_TOL: f64 = 1e-5;
const STRATUM_REL_TOL: f64 = 1e-12;
const HESSIAN_REL_TOL: f64 = 1e-6;
const DET_SCALED_TOL: f64 = 1e-6;
const TANGENCY_TOL: f64 = 1e-12;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome { ok, detail: detail.into() }
}

fn single_threaded<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(f)
}

fn relation_counts() -> Outcome {
    let start = Instant::now();
    let mut totals = Vec::new();
    for k in 2..=4 {
        totals.push(enumerate_relations(2, k).unwrap().total());
    }
    let formulas_agree = (2..=4).all(|n| (2..=8).all(|k| r_k_sum_over_cancellations(n, k) == r_k_sum_over_lengths(n, k)));
    let elapsed = start.elapsed();
    outcome(
        totals == [48, 252, 1728] && formulas_agree && elapsed < Duration::from_secs(10),
        format!("totals={totals:?} formulas_agree={formulas_agree} time={elapsed:.2?} (limit 10s)"),
    )
}

fn golden_tables() -> Outcome {
    let ix2 = enumerate_sphere(2, 2).unwrap();
    let want2: Vec<_> = golden::tables_for_radius(2)
        .unwrap()
        .iter()
        .flat_map(|t| golden::normalize(t, &ix2).unwrap())
        .collect();
    let d2 = golden::diff(&want2, &enumerate_relations(2, 2).unwrap().relations);
    let ix3 = enumerate_sphere(2, 3).unwrap();
    let want3 = golden::normalize(&golden::load(TableId::K3LengthZero).unwrap(), &ix3).unwrap();
    let d3 = golden::diff(&want3, &census_for_k3_length0().unwrap());
    outcome(
        d2.is_clean() && d3.is_clean() && d2.expected == 48 && d3.expected == 36,
        format!(
            "k=2: {}/{} matched, {} missing, {} unexpected; k=3 length 0: {}/{} matched, {} missing, {} unexpected",
            d2.actual - d2.unexpected.len(),
            d2.expected,
            d2.missing.len(),
            d2.unexpected.len(),
            d3.actual - d3.unexpected.len(),
            d3.expected,
            d3.missing.len(),
            d3.unexpected.len()
        ),
    )
}

fn relation_validity() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for k in 2..=4 {
        let ix = enumerate_sphere(2, k).unwrap();
        let check = verify_census(&enumerate_relations(2, k).unwrap(), &ix, k + 2).unwrap();
        ok &= check.all_passed();
        parts.push(format!("k={k}: {}/{}", check.passed, check.total));
    }
    outcome(ok, format!("{} at depth k+2", parts.join(", ")))
}

fn solve_f(n: usize, k: usize) -> (MinimaxResult, Duration) {
    let fam = FunctionFamily::for_rank_radius(n, k).unwrap();
    let start = Instant::now();
    let r = single_threaded(|| minimize(&fam, Objective::F, &SolverConfig::default()).unwrap());
    (r, start.elapsed())
}

fn closed_form_optimum() -> (Outcome, Vec<String>) {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut json = Vec::new();
    for k in 2..=4 {
        let (r, elapsed) = solve_f(2, k);
        let fam = FunctionFamily::for_rank_radius(2, k).unwrap();
        let probe = single_threaded(|| uniqueness_probe(&fam, Objective::F, &SolverConfig::default()).unwrap());
        let gap = r.residuals.relative_gap;
        let dev = r.residuals.max_deviation_from_uniform;
        let pass = gap <= ALPHA_REL_TOL
            && dev <= UNIFORM_TOL
            && elapsed < Duration::from_secs(60)
            && probe.max_pairwise_distance <= AGREEMENT_TOL;
        ok &= pass;
        parts.push(format!(
            "k={k} d={} alpha={:.9} gap={gap:.1e} dev={dev:.1e} agree={:.1e} time={elapsed:.2?}",
            r.d, r.alpha_star, probe.max_pairwise_distance
        ));
        json.push(serde_json::to_string(&r).unwrap());
    }
    (outcome(ok, parts.join("; ")), json)
}

fn g_domination() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 2..=4 {
        let fam = FunctionFamily::for_rank_radius(2, k).unwrap();
        let u = SimplexPoint::uniform(fam.d());
        let alpha = closed_form_alpha(2, k);
        let f = fam.eval_f_max(&u).value;
        let g = fam.eval_g_max(&u).value;
        let stratum1 = (4.0 * 3f64.powi(k as i32 - 1) - 1.0) / 3.0;
        let mut max_g_member = f64::NEG_INFINITY;
        let mut stratum_err: f64 = 0.0;
        for func in fam.functions() {
            if let FunctionTag::G { product_length } = func.tag() {
                let v = func.eval(&u).value;
                max_g_member = max_g_member.max(v);
                if product_length == 1 {
                    stratum_err = stratum_err.max((v - stratum1).abs() / stratum1);
                }
            }
        }
        let pass = (f - alpha).abs() <= STRATUM_REL_TOL * alpha
            && (g - alpha).abs() <= STRATUM_REL_TOL * alpha
            && max_g_member < alpha
            && stratum_err <= STRATUM_REL_TOL;
        ok &= pass;
        parts.push(format!(
            "k={k}: F=G={g:.6}, max g-member={max_g_member:.6} < {alpha}, length-1 stratum err={stratum_err:.1e}"
        ));
    }
    outcome(ok, parts.join("; "))
}

/// Independent gradients of `f(x, y) = σ(x)σ(y)` and `g(x, y) = σ(x + y)σ(y)`.
fn grad_f(x: f64, y: f64) -> [f64; 2] {
    let s = |u: f64| (1.0 - u) / u;
    [-s(y) / (x * x), -s(x) / (y * y)]
}

fn grad_g(x: f64, y: f64) -> [f64; 2] {
    let s = |u: f64| (1.0 - u) / u;
    let a = -s(y) / ((x + y) * (x + y));
    [a, a - s(x + y) / (y * y)]
}

/// Central differences of the gradient with step `1e-5` relative to the
/// distance from the triangle's edges.
fn hessian_fd(grad: fn(f64, f64) -> [f64; 2], x: f64, y: f64) -> [[f64; 2]; 2] {
    let h = 1e-5 * x.min(y).min(1.0 - x - y);
    let (gxp, gxm) = (grad(x + h, y), grad(x - h, y));
    let (gyp, gym) = (grad(x, y + h), grad(x, y - h));
    let col_x = [(gxp[0] - gxm[0]) / (2.0 * h), (gxp[1] - gxm[1]) / (2.0 * h)];
    let col_y = [(gyp[0] - gym[0]) / (2.0 * h), (gyp[1] - gym[1]) / (2.0 * h)];
    let off = 0.5 * (col_x[1] + col_y[0]);
    [[col_x[0], off], [off, col_y[1]]]
}

fn convexity_certificates() -> Outcome {
    let mut rng = stream_rng(6, 0);
    let mut worst_fd: f64 = 0.0;
    let mut samples = 0;
    while samples < 1000 {
        let (x, y): (f64, f64) = (rng.gen_range(0.01..0.98), rng.gen_range(0.01..0.98));
        if x + y >= 0.99 {
            continue;
        }
        samples += 1;
        for (h, fd) in [
            (hessian_f(x, y).unwrap(), hessian_fd(grad_f, x, y)),
            (hessian_g(x, y).unwrap(), hessian_fd(grad_g, x, y)),
        ] {
            let scale = h.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
            for i in 0..2 {
                for j in 0..2 {
                    worst_fd = worst_fd.max((h[i][j] - fd[i][j]).abs() / scale);
                }
            }
        }
    }
    let mut worst_det: f64 = 0.0;
    for i in 1..200 {
        let x = 0.75 * i as f64 / 200.0;
        let y = f_critical_curve(x);
        worst_det = worst_det.max((det_hessian_f(x, y) * (x * y).powi(4)).abs());
        let yg = 0.5 * i as f64 / 200.0;
        let xg = g_critical_curve(yg);
        if xg > 0.0 && xg + yg < 1.0 {
            worst_det = worst_det.max((det_hessian_g(xg, yg) * (yg * (xg + yg)).powi(4)).abs());
        }
    }
    let cf = pd_scan(Region2::Cf, 10_000, 6).unwrap();
    let cg = pd_scan(Region2::Cg, 10_000, 6).unwrap();
    let (px, py) = tangency_point();
    let tangency = Region2::Cf.residual(px, py).abs().max(tangent_curve_residual(px, py).abs());
    outcome(
        worst_fd <= HESSIAN_REL_TOL
            && worst_det <= DET_SCALED_TOL
            && cf.all_positive_definite()
            && cg.all_positive_definite()
            && tangency <= TANGENCY_TOL,
        format!(
            "hessian fd err={worst_fd:.1e} on {samples}x2 samples, scaled det on curves={worst_det:.1e}, PD in C_f {}/{}, PD in C_g {}/{}, tangency residual={tangency:.1e}",
            cf.positive_definite, cf.samples, cg.positive_definite, cg.samples
        ),
    )
}

fn region_membership() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in 2..=3 {
        let fam = FunctionFamily::for_rank_radius(2, k).unwrap();
        let r = minimize(&fam, Objective::F, &SolverConfig::default()).unwrap();
        let rep = region_d_report(&fam, &r.x_star);
        ok &= rep.all_inside();
        parts.push(format!("k={k}: {}/{} inside, max residual={:.3e}", rep.inside, rep.d, rep.max_residual));
    }
    outcome(ok, parts.join("; "))
}

fn hyperbolic_bound() -> (Outcome, Vec<String>) {
    let start = Instant::now();
    let mut ok = true;
    let mut parts = Vec::new();
    let mut json = Vec::new();
    for k in 2..=3 {
        let trials = run_trials(7, 100, 10, k, &SchottkyConfig::default()).unwrap();
        let min = trials.iter().map(|t| t.report.margin).fold(f64::INFINITY, f64::min);
        let negatives = trials.iter().filter(|t| !t.report.holds()).count();
        ok &= negatives == 0 && trials.len() == 1000;
        parts.push(format!(
            "k={k}: {} runs, bound={:.5}, min margin={min:.4}, negatives={negatives}",
            trials.len(),
            trials[0].report.bound
        ));
        json.push(serde_json::to_string(&trials).unwrap());
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(300);
    parts.push(format!("time={elapsed:.2?}"));
    (outcome(ok, parts.join("; ")), json)
}

fn conjecture_support() -> (Outcome, String) {
    let (r, elapsed) = solve_f(3, 2);
    let fam = FunctionFamily::for_rank_radius(3, 2).unwrap();
    let probe = uniqueness_probe(&fam, Objective::F, &SolverConfig::default()).unwrap();
    let target = closed_form_alpha(3, 2);
    let rel = (r.alpha_star - target).abs() / target;
    let ok = probe.max_pairwise_distance <= AGREEMENT_TOL && rel <= ALPHA_REL_TOL;
    (
        outcome(
            ok,
            format!(
                "n=3 k=2 d={} alpha={:.9} vs {target} rel={rel:.1e}, agreement={:.1e}, time={elapsed:.2?}, {}",
                r.d,
                r.alpha_star,
                probe.max_pairwise_distance,
                if ok { "conjecture-supported" } else { "not supported" }
            ),
        ),
        serde_json::to_string(&r).unwrap(),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "relation counts", relation_counts()));
    results.push((2, "golden tables", golden_tables()));
    results.push((3, "relation validity", relation_validity()));
    let (c4, json4) = closed_form_optimum();
    results.push((4, "closed-form optimum", c4));
    results.push((5, "G-domination", g_domination()));
    results.push((6, "convexity certificates", convexity_certificates()));
    results.push((7, "minimizer region membership", region_membership()));
    let (c8, json8) = hyperbolic_bound();
    results.push((8, "hyperbolic bound", c8));
    let (c9, json9) = conjecture_support();
    results.push((9, "conjecture support", c9));

    let (_, again4) = closed_form_optimum();
    let (_, again8) = hyperbolic_bound();
    let (_, again9) = conjecture_support();
    let same = json4 == again4 && json8 == again8 && json9 == again9;
    results.push((
        10,
        "determinism",
        outcome(same, format!("criteria 4, 8, 9 rerun byte-identical: {}", same)),
    ));

    let mut failed = 0;
    for (id, name, o) in &results {
        println!("{} criterion {id:>2} ({name}): {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.ok);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
