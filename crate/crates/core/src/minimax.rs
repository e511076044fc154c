//! Minimization of `F = max f_i` (or `G`) over the open simplex.
//!
//! Each restart runs entropic mirror descent on the log-sum-exp smoothing
//! `τ·log Σ exp(log f_i / τ)` for a decreasing sequence of temperatures,
//! then a short subgradient phase on the unsmoothed maximum with gradients
//! averaged over the tie set. The best point seen under the true objective is
//! kept throughout.

use rand_distr::{Dirichlet, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispfun::{DisplacementFunction, FunctionFamily, FunctionTag, PointSums, SimplexPoint, TIE_TOL};
use crate::error::{Error, Result};
use crate::freegroup::check_rank;
use crate::rng::stream_rng;

/// `(2n − 1)(2n(2n − 1)^{k−1} − 1)`; for rank 2 this is `12·3^{k−1} − 3`.
pub fn closed_form_alpha_exact(n: usize, k: usize) -> u128 {
    let q = 2 * n as u128 - 1;
    q * (2 * n as u128 * q.pow(k as u32 - 1) - 1)
}

pub fn closed_form_alpha(n: usize, k: usize) -> f64 {
    closed_form_alpha_exact(n, k) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Objective {
    F,
    G,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Relative objective tolerance between the last two smoothing stages;
    /// each stage also stops once its stationarity drops below `tol / 100`.
    pub tol: f64,
    /// Iteration cap per smoothing stage.
    pub max_iter: usize,
    pub restarts: usize,
    pub seed: u64,
    pub temperatures: Vec<f64>,
    pub subgradient_iters: usize,
    /// Initial relative step of the subgradient phase.
    pub subgradient_step: f64,
    pub kkt_tol: f64,
    /// Adds one start with a coordinate pinned at `1e-6`.
    pub adversarial_start: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-9,
            max_iter: 200_000,
            restarts: 10,
            seed: 42,
            temperatures: vec![1.0, 1e-1, 1e-2, 1e-3, 1e-4],
            subgradient_iters: 2_000,
            subgradient_step: 1e-4,
            kkt_tol: 1e-6,
            adversarial_start: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageRecord {
    pub temperature: Option<f64>,
    pub iterations: usize,
    pub stationarity: f64,
    /// Best true objective seen up to the end of this stage.
    pub best_so_far: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RestartSummary {
    pub id: usize,
    pub start: String,
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_deviation_from_uniform: f64,
    pub stages: Vec<StageRecord>,
    #[serde(skip)]
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Residuals {
    pub max_deviation_from_uniform: f64,
    pub relative_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KktCertificate {
    /// Smallest norm of a projected convex combination of tie-set gradients,
    /// relative to the largest projected gradient.
    pub projected_norm: f64,
    pub satisfied: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct MinimaxResult {
    pub objective: Objective,
    pub n: usize,
    pub k: usize,
    pub d: usize,
    pub x_star: SimplexPoint,
    pub alpha_star: f64,
    pub closed_form: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub best_restart: usize,
    pub tie_set: Vec<usize>,
    pub converged: bool,
    pub residuals: Residuals,
    pub kkt: KktCertificate,
    pub per_restart: Vec<RestartSummary>,
}

struct Problem<'a> {
    funcs: Vec<&'a DisplacementFunction>,
    d: usize,
}

impl<'a> Problem<'a> {
    fn new(family: &'a FunctionFamily, which: Objective) -> Self {
        let funcs = match which {
            Objective::F => family.f_functions().collect(),
            Objective::G => family.functions().iter().collect(),
        };
        Problem { funcs, d: family.d() }
    }

    fn values(&self, x: &[f64]) -> Vec<f64> {
        let sums = PointSums::from_slice(x);
        self.funcs.iter().map(|f| f.eval_with(&sums).value).collect()
    }

    fn max_value(&self, x: &[f64]) -> f64 {
        self.values(x).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smoothed log objective, its gradient, and the true maximum.
    fn smoothed(&self, x: &[f64], tau: f64, want_grad: bool) -> (f64, Vec<f64>, f64) {
        let sums = PointSums::from_slice(x);
        let vals: Vec<f64> = self.funcs.iter().map(|f| f.eval_with(&sums).value).collect();
        let logs: Vec<f64> = vals.iter().map(|v| v.ln()).collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| ((l - m) / tau).exp()).collect();
        let z: f64 = w.iter().sum();
        let value = m + tau * z.ln();
        let mut grad = Vec::new();
        if want_grad {
            grad = vec![0.0; self.d];
            for ((f, wi), v) in self.funcs.iter().zip(&w).zip(&vals) {
                if *wi > 1e-300 {
                    f.add_gradient(&sums, wi / (z * v), &mut grad);
                }
            }
        }
        (value, grad, m.exp())
    }

    /// Gradient of the unsmoothed maximum averaged over its tie set.
    fn tie_gradient(&self, x: &[f64]) -> (f64, Vec<usize>, Vec<f64>) {
        let sums = PointSums::from_slice(x);
        let vals: Vec<f64> = self.funcs.iter().map(|f| f.eval_with(&sums).value).collect();
        let (ties, max) = tie_set(&vals);
        let mut grad = vec![0.0; self.d];
        for &i in &ties {
            self.funcs[i].add_gradient(&sums, 1.0 / ties.len() as f64, &mut grad);
        }
        (max, ties, grad)
    }
}

fn tie_set(vals: &[f64]) -> (Vec<usize>, f64) {
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let cut = max - TIE_TOL * max.abs();
    ((0..vals.len()).filter(|&i| vals[i] >= cut).collect(), max)
}

/// `x ⊙ exp(−η g)`, renormalized, with coordinates floored away from zero.
fn mirror_step(x: &[f64], g: &[f64], eta: f64) -> Vec<f64> {
    let gmin = g.iter().copied().fold(f64::INFINITY, f64::min);
    let mut y: Vec<f64> = x.iter().zip(g).map(|(xi, gi)| xi * (-eta * (gi - gmin)).exp()).collect();
    let s: f64 = y.iter().sum();
    for v in &mut y {
        *v = (*v / s).max(1e-300);
    }
    let s: f64 = y.iter().sum();
    y.iter_mut().for_each(|v| *v /= s);
    y
}

/// `max_i x_i |g_i − ⟨x, g⟩|`, the first-order residual in entropic geometry.
fn stationarity(x: &[f64], g: &[f64]) -> f64 {
    let mean: f64 = x.iter().zip(g).map(|(a, b)| a * b).sum();
    x.iter().zip(g).map(|(a, b)| a * (b - mean).abs()).fold(0.0, f64::max)
}

fn kl(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| a * (a / b).ln()).sum()
}

struct Tracker {
    best_x: Vec<f64>,
    best: f64,
}

impl Tracker {
    fn offer(&mut self, x: &[f64], value: f64) {
        if value < self.best {
            self.best = value;
            self.best_x.clear();
            self.best_x.extend_from_slice(x);
        }
    }
}

fn smoothing_stage(p: &Problem, x: &mut Vec<f64>, tau: f64, cfg: &SolverConfig, tr: &mut Tracker) -> StageRecord {
    let (mut val, mut grad, fmax) = p.smoothed(x, tau, true);
    tr.offer(x, fmax);
    let mut eta = 1.0 / grad.iter().map(|g| g.abs()).fold(1e-300, f64::max);
    let mut iterations = 0;
    let mut stall = 0;
    let mut st = stationarity(x, &grad);
    while iterations < cfg.max_iter && st > cfg.tol * 1e-2 {
        iterations += 1;
        let mut accepted = false;
        while eta > 1e-300 {
            let y = mirror_step(x, &grad, eta);
            let (vy, _, fy) = p.smoothed(&y, tau, false);
            let lin: f64 = grad.iter().zip(y.iter().zip(x.iter())).map(|(g, (a, b))| g * (a - b)).sum();
            let bound = val + lin + kl(&y, x) / eta;
            if vy.is_finite() && vy <= bound + 1e-15 * val.abs() {
                tr.offer(&y, fy);
                let improved = vy < val - 1e-15 * val.abs();
                stall = if improved { 0 } else { stall + 1 };
                let (v2, g2, _) = p.smoothed(&y, tau, true);
                *x = y;
                val = v2;
                grad = g2;
                eta *= 1.25;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        st = stationarity(x, &grad);
        if !accepted || stall > 200 {
            break;
        }
    }
    StageRecord {
        temperature: Some(tau),
        iterations,
        stationarity: st,
        best_so_far: tr.best,
    }
}

fn subgradient_stage(p: &Problem, cfg: &SolverConfig, tr: &mut Tracker) -> StageRecord {
    let mut x = tr.best_x.clone();
    let mut iterations = 0;
    let mut st = 0.0;
    for t in 1..=cfg.subgradient_iters {
        let (fx, _, g) = p.tie_gradient(&x);
        tr.offer(&x, fx);
        let mean: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
        let scale = g.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
        st = stationarity(&x, &g) / fx;
        if scale == 0.0 || !scale.is_finite() {
            break;
        }
        iterations = t;
        let step = cfg.subgradient_step / (t as f64).sqrt() / scale;
        x = mirror_step(&x, &g, step);
    }
    let fx = p.max_value(&x);
    tr.offer(&x, fx);
    StageRecord {
        temperature: None,
        iterations,
        stationarity: st,
        best_so_far: tr.best,
    }
}

fn floor_start(mut x: Vec<f64>) -> Vec<f64> {
    let d = x.len() as f64;
    let floor = 1e-9 / d;
    let s: f64 = x.iter().sum();
    for v in &mut x {
        *v = (*v / s).max(floor);
    }
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= s);
    x
}

/// Start for restart `id`: Dirichlet(1, …, 1) draws from the stream
/// `(seed, id)`; the adversarial start puts mass `1e-6` on one coordinate.
fn start_point(d: usize, seed: u64, id: usize, adversarial: bool) -> (Vec<f64>, String) {
    let mut rng = stream_rng(seed, id as u64);
    let dir = Dirichlet::new(&vec![1.0; d]).expect("valid Dirichlet parameters");
    let mut x: Vec<f64> = dir.sample(&mut rng);
    if adversarial {
        let rest: f64 = x[1..].iter().sum();
        x[0] = 1e-6;
        for v in &mut x[1..] {
            *v *= (1.0 - 1e-6) / rest;
        }
        (floor_start(x), "facet".into())
    } else {
        (floor_start(x), "dirichlet".into())
    }
}

fn run_restart(p: &Problem, cfg: &SolverConfig, id: usize, adversarial: bool) -> RestartSummary {
    let (mut x, start) = start_point(p.d, cfg.seed, id, adversarial);
    let f0 = p.max_value(&x);
    let mut tr = Tracker {
        best_x: x.clone(),
        best: f0,
    };
    let mut stages = Vec::new();
    for &tau in &cfg.temperatures {
        stages.push(smoothing_stage(p, &mut x, tau, cfg, &mut tr));
    }
    if cfg.subgradient_iters > 0 {
        stages.push(subgradient_stage(p, cfg, &mut tr));
    }
    let smoothed: Vec<&StageRecord> = stages.iter().filter(|s| s.temperature.is_some()).collect();
    let converged = match smoothed.as_slice() {
        [.., prev, last] => (prev.best_so_far - last.best_so_far) <= cfg.tol * last.best_so_far,
        [only] => only.stationarity <= cfg.tol,
        [] => false,
    };
    let u = 1.0 / p.d as f64;
    RestartSummary {
        id,
        start,
        alpha: tr.best,
        iterations: stages.iter().map(|s| s.iterations).sum(),
        converged,
        max_deviation_from_uniform: tr.best_x.iter().map(|v| (v - u).abs()).fold(0.0, f64::max),
        stages,
        x: tr.best_x,
    }
}

/// Frank–Wolfe on `min ‖P Σ λ_i g_i‖` over the simplex of weights, where `P`
/// removes the mean component.
fn kkt_certificate(p: &Problem, x: &[f64], ties: &[usize], tol: f64) -> KktCertificate {
    let sums = PointSums::from_slice(x);
    let proj: Vec<Vec<f64>> = ties
        .iter()
        .map(|&i| {
            let mut g = vec![0.0; p.d];
            p.funcs[i].add_gradient(&sums, 1.0, &mut g);
            let mean = g.iter().sum::<f64>() / p.d as f64;
            g.iter().map(|v| v - mean).collect()
        })
        .collect();
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let scale = proj.iter().map(|v| norm(v)).fold(0.0, f64::max);
    if scale == 0.0 {
        return KktCertificate {
            projected_norm: 0.0,
            satisfied: true,
        };
    }
    let mut v: Vec<f64> = (0..p.d)
        .map(|l| proj.iter().map(|q| q[l]).sum::<f64>() / proj.len() as f64)
        .collect();
    for _ in 0..2_000 {
        let (best, _) = proj
            .iter()
            .enumerate()
            .map(|(i, q)| (i, q.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>()))
            .fold((0, f64::INFINITY), |acc, it| if it.1 < acc.1 { it } else { acc });
        let s = &proj[best];
        let diff: Vec<f64> = s.iter().zip(&v).map(|(a, b)| a - b).collect();
        let dd: f64 = diff.iter().map(|a| a * a).sum();
        if dd == 0.0 {
            break;
        }
        let gamma = (-v.iter().zip(&diff).map(|(a, b)| a * b).sum::<f64>() / dd).clamp(0.0, 1.0);
        if gamma == 0.0 {
            break;
        }
        for (vi, di) in v.iter_mut().zip(&diff) {
            *vi += gamma * di;
        }
    }
    let projected_norm = norm(&v) / scale;
    KktCertificate {
        projected_norm,
        satisfied: projected_norm < tol,
    }
}

pub fn minimize(family: &FunctionFamily, which: Objective, cfg: &SolverConfig) -> Result<MinimaxResult> {
    if cfg.restarts == 0 {
        return Err(Error::InvalidParameter("at least one restart is required".into()));
    }
    if cfg.temperatures.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::InvalidParameter("temperatures must be positive".into()));
    }
    let p = Problem::new(family, which);
    let mut jobs: Vec<(usize, bool)> = (0..cfg.restarts).map(|i| (i, false)).collect();
    if cfg.adversarial_start {
        jobs.push((cfg.restarts, true));
    }
    let per_restart: Vec<RestartSummary> = jobs
        .par_iter()
        .map(|&(id, adv)| run_restart(&p, cfg, id, adv))
        .collect();
    let best = per_restart
        .iter()
        .min_by(|a, b| a.alpha.total_cmp(&b.alpha).then(a.id.cmp(&b.id)))
        .expect("at least one restart");
    let x_star = SimplexPoint::new(best.x.clone())?;
    let vals = p.values(x_star.coords());
    let (ties, alpha_star) = tie_set(&vals);
    let kkt = kkt_certificate(&p, x_star.coords(), &ties, cfg.kkt_tol);
    let closed_form = closed_form_alpha(family.n(), family.k());
    let tie_set = match which {
        Objective::F => ties.iter().map(|i| i + 1).collect(),
        Objective::G => ties,
    };
    Ok(MinimaxResult {
        objective: which,
        n: family.n(),
        k: family.k(),
        d: family.d(),
        residuals: Residuals {
            max_deviation_from_uniform: x_star.max_deviation_from_uniform(),
            relative_gap: (alpha_star - closed_form).abs() / closed_form,
        },
        alpha_star,
        closed_form,
        iterations: per_restart.iter().map(|r| r.iterations).sum(),
        restarts: per_restart.len(),
        best_restart: best.id,
        tie_set,
        converged: best.converged,
        kkt,
        x_star,
        per_restart,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Stratum {
    pub product_length: usize,
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub expected: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UniformReport {
    pub closed_form: f64,
    pub f_max: f64,
    pub g_max: f64,
    /// Largest relative deviation of an `F`-member from the closed form.
    pub f_relative_spread: f64,
    pub g_strictly_below: bool,
    pub strata: Vec<Stratum>,
}

impl UniformReport {
    pub fn passed(&self) -> bool {
        self.f_relative_spread < 1e-12
            && self.g_strictly_below
            && self
                .strata
                .iter()
                .all(|s| (s.min - s.expected).abs() <= 1e-12 * s.expected && (s.max - s.expected).abs() <= 1e-12 * s.expected)
    }
}

/// Value of a product-length-`m` member at the uniform point:
/// `σ((d − (2n−1)^{k−m})/d)·σ(1/d)`.
pub fn uniform_stratum_value(n: usize, k: usize, m: usize) -> f64 {
    let d = crate::freegroup::sphere_size(n, k) as f64;
    let cut = ((2 * n - 1) as f64).powi((k - m) as i32);
    let a = (d - cut) / d;
    (1.0 - a) / a * (d - 1.0)
}

pub fn verify_uniform_optimum(family: &FunctionFamily) -> UniformReport {
    let u = SimplexPoint::uniform(family.d());
    let closed_form = closed_form_alpha(family.n(), family.k());
    let mut f_max = f64::NEG_INFINITY;
    let mut spread: f64 = 0.0;
    let mut g_max = f64::NEG_INFINITY;
    let mut strata: std::collections::BTreeMap<usize, Stratum> = Default::default();
    for f in family.functions() {
        let v = f.eval(&u).value;
        match f.tag() {
            FunctionTag::F => {
                f_max = f_max.max(v);
                spread = spread.max((v - closed_form).abs() / closed_form);
            }
            FunctionTag::G { product_length } => {
                g_max = g_max.max(v);
                let s = strata.entry(product_length).or_insert(Stratum {
                    product_length,
                    count: 0,
                    min: f64::INFINITY,
                    max: f64::NEG_INFINITY,
                    expected: uniform_stratum_value(family.n(), family.k(), product_length),
                });
                s.count += 1;
                s.min = s.min.min(v);
                s.max = s.max.max(v);
            }
        }
    }
    UniformReport {
        closed_form,
        f_max,
        g_max: g_max.max(f_max),
        f_relative_spread: spread,
        g_strictly_below: strata.values().all(|s| s.max < closed_form),
        strata: strata.into_values().collect(),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub restarts: usize,
    pub adversarial_included: bool,
    pub max_pairwise_distance: f64,
    pub agree: bool,
    pub alphas: Vec<f64>,
    pub adversarial_deviation_from_uniform: Option<f64>,
}

/// Runs [`minimize`] from at least ten random starts plus one start near a
/// facet and compares the minimizers pairwise.
pub fn uniqueness_probe(family: &FunctionFamily, which: Objective, cfg: &SolverConfig) -> Result<UniquenessReport> {
    if cfg.restarts < 10 {
        return Err(Error::InvalidParameter(format!(
            "uniqueness probe needs at least 10 restarts, got {}",
            cfg.restarts
        )));
    }
    let cfg = SolverConfig {
        adversarial_start: true,
        ..cfg.clone()
    };
    let res = minimize(family, which, &cfg)?;
    let xs: Vec<&Vec<f64>> = res.per_restart.iter().map(|r| &r.x).collect();
    let mut max_pairwise: f64 = 0.0;
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            let dist = xs[i].iter().zip(xs[j]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            max_pairwise = max_pairwise.max(dist);
        }
    }
    Ok(UniquenessReport {
        restarts: res.per_restart.len(),
        adversarial_included: true,
        max_pairwise_distance: max_pairwise,
        agree: max_pairwise < 1e-5,
        alphas: res.per_restart.iter().map(|r| r.alpha).collect(),
        adversarial_deviation_from_uniform: res
            .per_restart
            .iter()
            .find(|r| r.start == "facet")
            .map(|r| r.max_deviation_from_uniform),
    })
}

/// Family for `(n, k)` with rank validation; convenience for callers that
/// only need the solver.
pub fn family_for(n: usize, k: usize) -> Result<FunctionFamily> {
    check_rank(n)?;
    FunctionFamily::for_rank_radius(n, k)
}
