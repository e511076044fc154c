//! Hessians of the two-variable reductions `f(x, y) = σ(x)σ(y)` and
//! `g(x, y) = σ(x + y)σ(y)` on the triangle `Δ = {x, y > 0, x + y < 1}`,
//! the convexity regions `C_f`, `C_g`, and positive-definiteness scans.

use std::f64::consts::SQRT_2;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::dispfun::{FunctionFamily, SimplexPoint, TwoVariableForm};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

pub type Mat2 = [[f64; 2]; 2];

/// Points within this distance of a region boundary are counted as outside.
pub const BOUNDARY_TOL: f64 = 1e-12;
/// Relative margin below which a leading minor is indeterminate.
pub const PD_MARGIN: f64 = 1e-12;

fn check_triangle(x: f64, y: f64) -> Result<()> {
    if x > 0.0 && y > 0.0 && x + y < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { value: if x > 0.0 && x < 1.0 { y } else { x } })
    }
}

pub fn hessian_f(x: f64, y: f64) -> Result<Mat2> {
    check_triangle(x, y)?;
    let off = 1.0 / (x * x * y * y);
    Ok([
        [2.0 * (1.0 - y) / (x.powi(3) * y), off],
        [off, 2.0 * (1.0 - x) / (x * y.powi(3))],
    ])
}

/// `det H_f = (3 + 4x(y − 1) − 4y) / (x⁴y⁴)`.
pub fn det_hessian_f(x: f64, y: f64) -> f64 {
    (3.0 + 4.0 * x * (y - 1.0) - 4.0 * y) / (x * y).powi(4)
}

pub fn hessian_g(x: f64, y: f64) -> Result<Mat2> {
    check_triangle(x, y)?;
    let s3 = (x + y).powi(3);
    let gxx = 2.0 * (1.0 - y) / (y * s3);
    let gxy = (x + 3.0 * y - 2.0 * y * y) / (y * y * s3);
    let gyy = -2.0
        * (x.powi(3) + 3.0 * x * x * y - x * x + 3.0 * x * y * y - 3.0 * x * y + 2.0 * y.powi(3) - 3.0 * y * y)
        / (y.powi(3) * s3);
    Ok([[gxx, gxy], [gxy, gyy]])
}

/// `det H_g = (3 + 4x(y − 1) − 8y + 4y²) / (y⁴(x + y)⁴)`.
pub fn det_hessian_g(x: f64, y: f64) -> f64 {
    (3.0 + 4.0 * x * (y - 1.0) - 8.0 * y + 4.0 * y * y) / (y.powi(4) * (x + y).powi(4))
}

/// Zero set of `det H_f` inside `Δ`: `x + y − xy = 3/4`, solved for `y`.
pub fn f_critical_curve(x: f64) -> f64 {
    (0.75 - x) / (1.0 - x)
}

/// Boundary of `C_g`: `x = (3/4 + y² − 2y)/(1 − y)` for `0 < y < 1/2`.
pub fn g_critical_curve(y: f64) -> f64 {
    (0.75 + y * y - 2.0 * y) / (1.0 - y)
}

/// Second derivative of [`g_critical_curve`], `1 / (2(y − 1)³)`.
pub fn g_critical_curve_second_derivative(y: f64) -> f64 {
    1.0 / (2.0 * (y - 1.0).powi(3))
}

/// The curve `x + xy + y = 3/4` touched by the boundary line of `C_f`.
pub fn tangent_curve_residual(x: f64, y: f64) -> f64 {
    x + x * y + y - 0.75
}

/// Point where the boundary line of `C_f` touches `x + xy + y = 3/4`.
pub fn tangency_point() -> (f64, f64) {
    ((2.0 - SQRT_2) / 2.0, SQRT_2 / 4.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Region2 {
    /// `7x + (18 − 8√2)y < 3 + √2`.
    Cf,
    /// `x + 2y − xy − y² < 3/4`.
    Cg,
}

impl Region2 {
    /// Left side minus right side of the defining inequality.
    pub fn residual(self, x: f64, y: f64) -> f64 {
        match self {
            Region2::Cf => 7.0 * x + (18.0 - 8.0 * SQRT_2) * y - (3.0 + SQRT_2),
            Region2::Cg => x + 2.0 * y - x * y - y * y - 0.75,
        }
    }

    pub fn hessian(self, x: f64, y: f64) -> Result<Mat2> {
        match self {
            Region2::Cf => hessian_f(x, y),
            Region2::Cg => hessian_g(x, y),
        }
    }
}

pub fn in_triangle(x: f64, y: f64) -> bool {
    x > 0.0 && y > 0.0 && x + y < 1.0
}

pub fn in_region2(r: Region2, x: f64, y: f64) -> bool {
    in_triangle(x, y) && r.residual(x, y) < -BOUNDARY_TOL
}

/// Membership of `x` in `C_{f_i}`: `f_i` reduces to `f(Σ_j, x_i)` or
/// `g(Σ_j − x_i, x_i)`, and the pair must lie in `C_f` or `C_g` accordingly.
pub fn in_region_d(family: &FunctionFamily, i: usize, x: &SimplexPoint) -> bool {
    region_d_residual(family, i, x) < -BOUNDARY_TOL
}

pub fn region_d_residual(family: &FunctionFamily, i: usize, x: &SimplexPoint) -> f64 {
    match family.two_variable_form(i, x) {
        TwoVariableForm::F { x, y } => Region2::Cf.residual(x, y),
        TwoVariableForm::G { x, y } => Region2::Cg.residual(x, y),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PdStatus {
    PositiveDefinite,
    NotPositiveDefinite,
    Indeterminate,
}

/// Leading-minor test. Minors are compared against `PD_MARGIN` times the
/// matching power of the largest entry.
pub fn pd_status(h: &Mat2) -> (PdStatus, f64) {
    let scale = h.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return (PdStatus::Indeterminate, 0.0);
    }
    let m1 = h[0][0] / scale;
    let m2 = (h[0][0] * h[1][1] - h[0][1] * h[1][0]) / (scale * scale);
    let margin = m1.min(m2);
    let status = if m1 > PD_MARGIN && m2 > PD_MARGIN {
        PdStatus::PositiveDefinite
    } else if m1 < -PD_MARGIN || m2 < -PD_MARGIN {
        PdStatus::NotPositiveDefinite
    } else {
        PdStatus::Indeterminate
    };
    (status, margin)
}

#[derive(Clone, Debug, Serialize)]
pub struct PdScanReport {
    pub region: Region2,
    pub seed: u64,
    pub samples: usize,
    pub positive_definite: usize,
    pub not_positive_definite: usize,
    pub indeterminate: usize,
    /// Smallest scaled leading minor among inside samples.
    pub min_margin: f64,
    pub outside_samples: usize,
    /// Whether PD failed at some sample violating the region inequality by
    /// more than 0.05.
    pub outside_failure_found: bool,
    pub worst_inside_point: (f64, f64),
}

impl PdScanReport {
    pub fn all_positive_definite(&self) -> bool {
        self.positive_definite == self.samples
    }
}

const BATCH: usize = 1024;

fn sample_where(rng: &mut impl Rng, accept: impl Fn(f64, f64) -> bool) -> (f64, f64) {
    loop {
        let x: f64 = rng.gen();
        let y: f64 = rng.gen();
        if in_triangle(x, y) && accept(x, y) {
            return (x, y);
        }
    }
}

/// Rejection-samples `samples` points inside the region and as many points
/// of `Δ` well outside it, then classifies the Hessian at each.
pub fn pd_scan(region: Region2, samples: usize, seed: u64) -> Result<PdScanReport> {
    if samples == 0 {
        return Err(Error::InvalidParameter("samples must be at least 1".into()));
    }
    let batches = samples.div_ceil(BATCH);
    struct Batch {
        counts: [usize; 3],
        min_margin: f64,
        worst: (f64, f64),
        outside_fail: bool,
    }
    let results: Vec<Batch> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b as u64);
            let n = BATCH.min(samples - b * BATCH);
            let mut out = Batch {
                counts: [0; 3],
                min_margin: f64::INFINITY,
                worst: (f64::NAN, f64::NAN),
                outside_fail: false,
            };
            for _ in 0..n {
                let (x, y) = sample_where(&mut rng, |x, y| in_region2(region, x, y));
                let (status, margin) = pd_status(&region.hessian(x, y).expect("inside Δ"));
                out.counts[status as usize] += 1;
                if margin < out.min_margin {
                    out.min_margin = margin;
                    out.worst = (x, y);
                }
            }
            for _ in 0..n {
                let (x, y) = sample_where(&mut rng, |x, y| region.residual(x, y) > 0.05);
                let (status, _) = pd_status(&region.hessian(x, y).expect("inside Δ"));
                out.outside_fail |= status == PdStatus::NotPositiveDefinite;
            }
            out
        })
        .collect();
    let mut report = PdScanReport {
        region,
        seed,
        samples,
        positive_definite: 0,
        not_positive_definite: 0,
        indeterminate: 0,
        min_margin: f64::INFINITY,
        outside_samples: samples,
        outside_failure_found: false,
        worst_inside_point: (f64::NAN, f64::NAN),
    };
    for b in results {
        report.positive_definite += b.counts[PdStatus::PositiveDefinite as usize];
        report.not_positive_definite += b.counts[PdStatus::NotPositiveDefinite as usize];
        report.indeterminate += b.counts[PdStatus::Indeterminate as usize];
        if b.min_margin < report.min_margin {
            report.min_margin = b.min_margin;
            report.worst_inside_point = b.worst;
        }
        report.outside_failure_found |= b.outside_fail;
    }
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionDReport {
    pub d: usize,
    pub inside: usize,
    /// Largest residual over all `i`; negative means every `C_{f_i}` holds.
    pub max_residual: f64,
    pub worst_index: usize,
}

impl RegionDReport {
    pub fn all_inside(&self) -> bool {
        self.inside == self.d
    }
}

/// Checks `x ∈ C_{f_i}` for every `i`.
pub fn region_d_report(family: &FunctionFamily, x: &SimplexPoint) -> RegionDReport {
    let mut report = RegionDReport {
        d: family.d(),
        inside: 0,
        max_residual: f64::NEG_INFINITY,
        worst_index: 0,
    };
    for i in 1..=family.d() {
        let r = region_d_residual(family, i, x);
        if r < -BOUNDARY_TOL {
            report.inside += 1;
        }
        if r > report.max_residual {
            report.max_residual = r;
            report.worst_index = i;
        }
    }
    report
}
