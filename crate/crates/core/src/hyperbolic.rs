//! Upper half-space model of hyperbolic 3-space, `PSL(2,ℂ)` isometries, a
//! seeded Schottky sampler with a ping-pong certificate, and the empirical
//! test of the displacement lower bound `max_{γ ∈ Γ_k} dist(z₀, γz₀) ≥ ½ log α_k`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::freegroup::{enumerate_ball, Word};
use crate::minimax::closed_form_alpha;
use crate::rng::stream_rng;

const DET_TOL: f64 = 1e-12;
/// Width of the band around classification boundaries reported as indeterminate.
pub const CLASSIFY_BAND: f64 = 1e-9;
const RENORMALIZE_EVERY: usize = 8;
const BOUNDARY_SAMPLES: usize = 64;

/// A normalized matrix `[[a, b], [c, d]]` with `ad − bc = 1`, up to sign.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MoebiusMap {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub d: Complex64,
}

impl MoebiusMap {
    /// Scales by `1/√(ad − bc)`.
    pub fn new(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> Result<Self> {
        let det = a * d - b * c;
        if !(det.norm() > 0.0) || !det.is_finite() {
            return Err(Error::InvalidParameter(format!("singular matrix, det = {det}")));
        }
        let s = det.sqrt().inv();
        Ok(MoebiusMap {
            a: a * s,
            b: b * s,
            c: c * s,
            d: d * s,
        })
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        MoebiusMap {
            a: one,
            b: zero,
            c: zero,
            d: one,
        }
    }

    pub fn diagonal(lambda: Complex64) -> Result<Self> {
        MoebiusMap::new(lambda, 0.0.into(), 0.0.into(), lambda.inv())
    }

    pub fn det(&self) -> Complex64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> Complex64 {
        self.a + self.d
    }

    pub fn inverse(&self) -> Self {
        MoebiusMap {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// Matrix product without renormalization.
    pub fn compose(&self, o: &MoebiusMap) -> Self {
        MoebiusMap {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn renormalized(&self) -> Self {
        let s = self.det().sqrt().inv();
        MoebiusMap {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
            d: self.d * s,
        }
    }

    /// Action on the Riemann sphere, finite points only.
    pub fn apply_complex(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    /// Entrywise distance to `other` or `−other`, whichever is closer.
    pub fn projective_distance(&self, o: &MoebiusMap) -> f64 {
        let diff = |s: f64| {
            [(self.a, o.a), (self.b, o.b), (self.c, o.c), (self.d, o.d)]
                .iter()
                .map(|(x, y)| (x - y * s).norm())
                .fold(0.0, f64::max)
        };
        diff(1.0).min(diff(-1.0))
    }
}

/// `z + t·j` in the upper half-space, `t > 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct H3Point {
    pub z: Complex64,
    pub t: f64,
}

impl H3Point {
    pub fn new(z: Complex64, t: f64) -> Result<Self> {
        if !(t > 0.0) || !t.is_finite() || !z.is_finite() {
            return Err(Error::InvalidParameter(format!("height must be positive and finite, got {t}")));
        }
        Ok(H3Point { z, t })
    }

    pub fn origin() -> Self {
        H3Point {
            z: Complex64::new(0.0, 0.0),
            t: 1.0,
        }
    }
}

impl std::fmt::Display for H3Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({:.6}{:+.6}i, {:.6})", self.z.re, self.z.im, self.t)
    }
}

/// Poincaré extension: `w ↦ (aw + b)(cw + d)⁻¹` with `w = z + tj`.
pub fn apply(m: &MoebiusMap, p: &H3Point) -> H3Point {
    let czd = m.c * p.z + m.d;
    let t2 = p.t * p.t;
    let den = czd.norm_sqr() + m.c.norm_sqr() * t2;
    let z = ((m.a * p.z + m.b) * czd.conj() + m.a * m.c.conj() * t2) / den;
    H3Point { z, t: p.t / den }
}

pub fn distance(p: &H3Point, q: &H3Point) -> f64 {
    let r = ((p.z - q.z).norm_sqr() + (p.t - q.t).powi(2)).sqrt();
    2.0 * (r / (2.0 * (p.t * q.t).sqrt())).asinh()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Isometry {
    Identity,
    Parabolic,
    Elliptic,
    Loxodromic,
    Indeterminate,
}

/// Classification by `tr²`: elliptic on the real segment `[0, 4)`, parabolic
/// or identity at `4`, loxodromic elsewhere.
pub fn classify(m: &MoebiusMap) -> Isometry {
    let m = m.renormalized();
    let tr2 = m.trace() * m.trace();
    let to_four = (tr2 - 4.0).norm();
    if to_four <= DET_TOL {
        let off = m.b.norm().max(m.c.norm()).max((m.a - m.d).norm());
        return if off <= DET_TOL { Isometry::Identity } else { Isometry::Parabolic };
    }
    if to_four <= CLASSIFY_BAND {
        return Isometry::Indeterminate;
    }
    let re = tr2.re.clamp(0.0, 4.0);
    let to_segment = (tr2 - re).norm();
    if to_segment <= DET_TOL {
        Isometry::Elliptic
    } else if to_segment <= CLASSIFY_BAND {
        Isometry::Indeterminate
    } else {
        Isometry::Loxodromic
    }
}

/// Translation length `2·|Re acosh(tr/2)|`.
pub fn translation_length(m: &MoebiusMap) -> f64 {
    let m = m.renormalized();
    2.0 * (m.trace() / 2.0).acosh().re.abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Disk {
    pub center: Complex64,
    pub radius: f64,
}

impl Disk {
    fn boundary(&self) -> impl Iterator<Item = Complex64> + '_ {
        (0..BOUNDARY_SAMPLES).map(move |i| {
            self.center + Complex64::from_polar(self.radius, 2.0 * PI * i as f64 / BOUNDARY_SAMPLES as f64)
        })
    }

    /// `1 − |z − c|/r`: positive inside.
    fn depth(&self, z: Complex64) -> f64 {
        1.0 - (z - self.center).norm() / self.radius
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SchottkyConfig {
    /// Radii are at most this fraction of half the minimal centre gap; in `(0, 1)`.
    pub radius_factor: f64,
    /// Required relative depth of images of the other disks inside the target disk.
    pub certificate_margin: f64,
    pub max_attempts: usize,
}

impl Default for SchottkyConfig {
    fn default() -> Self {
        SchottkyConfig {
            radius_factor: 0.9,
            certificate_margin: 1e-9,
            max_attempts: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Certificate {
    /// Smallest `|c_i − c_j| − r_i − r_j`.
    pub disjointness_margin: f64,
    /// Largest relative error of paired boundary circles.
    pub boundary_error: f64,
    /// Smallest relative depth of mapped boundary samples inside the target disk.
    pub min_depth: f64,
}

/// Generators `ξ: ext D₁ → int D₂` and `η: ext D₃ → int D₄`.
#[derive(Clone, Debug, Serialize)]
pub struct SchottkyPair {
    pub seed: u64,
    pub attempts: usize,
    pub xi: MoebiusMap,
    pub eta: MoebiusMap,
    pub disks: [Disk; 4],
    pub certificate: Certificate,
    pub translation_lengths: [f64; 3],
}

impl SchottkyPair {
    pub fn generator(&self, g: usize) -> MoebiusMap {
        match g {
            1 => self.xi,
            2 => self.eta,
            _ => panic!("a Schottky pair has two generators, got {g}"),
        }
    }

    /// The matrix of a word, folded left to right with periodic renormalization.
    pub fn word_matrix(&self, w: &Word) -> MoebiusMap {
        let mut acc = MoebiusMap::identity();
        for (i, l) in w.letters().iter().enumerate() {
            let g = self.generator(l.generator());
            acc = acc.compose(&if l.is_inverted() { g.inverse() } else { g });
            if (i + 1) % RENORMALIZE_EVERY == 0 {
                acc = acc.renormalized();
            }
        }
        acc
    }
}

/// The map `z ↦ c₂ + r₁r₂u/(z − c₁)` sending the circle about `c₁` to the circle about `c₂`.
fn pairing_map(from: &Disk, to: &Disk, u: Complex64) -> Result<MoebiusMap> {
    let one = Complex64::new(1.0, 0.0);
    MoebiusMap::new(to.center, from.radius * to.radius * u - from.center * to.center, one, -from.center)
}

fn pairing_certificate(m: &MoebiusMap, from: usize, to: usize, disks: &[Disk; 4]) -> (f64, f64) {
    let target = &disks[to];
    let mut boundary_error: f64 = 0.0;
    let mut min_depth = f64::INFINITY;
    for p in disks[from].boundary() {
        boundary_error = boundary_error.max(target.depth(m.apply_complex(p)).abs());
    }
    for (j, disk) in disks.iter().enumerate() {
        if j != from {
            for p in disk.boundary() {
                min_depth = min_depth.min(target.depth(m.apply_complex(p)));
            }
        }
    }
    (boundary_error, min_depth)
}

fn try_sample(rng: &mut impl Rng, cfg: &SchottkyConfig) -> std::result::Result<(MoebiusMap, MoebiusMap, [Disk; 4], Certificate), String> {
    let phase = rng.gen_range(0.0..2.0 * PI);
    let centers: Vec<Complex64> = (0..4)
        .map(|j| Complex64::from_polar(1.0, phase + j as f64 * PI / 2.0 + rng.gen_range(-0.4..0.4)))
        .collect();
    let mut gap = f64::INFINITY;
    for i in 0..4 {
        for j in i + 1..4 {
            gap = gap.min((centers[i] - centers[j]).norm());
        }
    }
    let disks: [Disk; 4] = std::array::from_fn(|j| Disk {
        center: centers[j],
        radius: cfg.radius_factor * gap / 2.0 * rng.gen_range(0.5..1.0),
    });
    let mut disjointness_margin = f64::INFINITY;
    for i in 0..4 {
        for j in i + 1..4 {
            let m = (disks[i].center - disks[j].center).norm() - disks[i].radius - disks[j].radius;
            disjointness_margin = disjointness_margin.min(m);
        }
    }
    if !(disjointness_margin > 0.0) {
        return Err(format!("disks overlap, margin {disjointness_margin:.3e}"));
    }

    // Opposite disks are paired, which keeps the classical ping-pong picture.
    let u1 = Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
    let u2 = Complex64::from_polar(1.0, rng.gen_range(0.0..2.0 * PI));
    let disks = [disks[0], disks[2], disks[1], disks[3]];
    let xi = pairing_map(&disks[0], &disks[1], u1).map_err(|e| e.to_string())?;
    let eta = pairing_map(&disks[2], &disks[3], u2).map_err(|e| e.to_string())?;

    let mut boundary_error: f64 = 0.0;
    let mut min_depth = f64::INFINITY;
    for (m, from, to) in [(xi, 0, 1), (xi.inverse(), 1, 0), (eta, 2, 3), (eta.inverse(), 3, 2)] {
        let (be, md) = pairing_certificate(&m, from, to, &disks);
        boundary_error = boundary_error.max(be);
        min_depth = min_depth.min(md);
    }
    if boundary_error > 1e-9 {
        return Err(format!("paired circles mismatch by {boundary_error:.3e}"));
    }
    if !(min_depth >= cfg.certificate_margin) {
        return Err(format!("ping-pong depth {min_depth:.3e} below margin {:.3e}", cfg.certificate_margin));
    }
    for (name, m) in [("xi", xi), ("eta", eta), ("xi*eta", xi.compose(&eta))] {
        let kind = classify(&m);
        if kind != Isometry::Loxodromic {
            return Err(format!("{name} is {kind:?}"));
        }
    }
    Ok((
        xi,
        eta,
        disks,
        Certificate {
            disjointness_margin,
            boundary_error,
            min_depth,
        },
    ))
}

/// Draws a certified Schottky pair from stream 0 of `seed`.
pub fn sample_schottky(seed: u64, cfg: &SchottkyConfig) -> Result<SchottkyPair> {
    if !(cfg.radius_factor > 0.0 && cfg.radius_factor < 1.0) {
        return Err(Error::InvalidParameter(format!("radius factor must lie in (0, 1), got {}", cfg.radius_factor)));
    }
    if !(cfg.certificate_margin > 0.0) || cfg.max_attempts == 0 {
        return Err(Error::InvalidParameter("certificate margin and attempt budget must be positive".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut last_failure = String::new();
    for attempt in 1..=cfg.max_attempts {
        match try_sample(&mut rng, cfg) {
            Ok((xi, eta, disks, certificate)) => {
                return Ok(SchottkyPair {
                    seed,
                    attempts: attempt,
                    xi,
                    eta,
                    disks,
                    certificate,
                    translation_lengths: [
                        translation_length(&xi),
                        translation_length(&eta),
                        translation_length(&xi.compose(&eta)),
                    ],
                })
            }
            Err(e) => last_failure = e,
        }
    }
    Err(Error::SamplingFailed {
        attempts: cfg.max_attempts,
        last_failure,
    })
}

/// `½ log α_k` for rank 2.
pub fn displacement_bound(k: usize) -> f64 {
    0.5 * closed_form_alpha(2, k).ln()
}

/// Matrices of every non-identity word of length `≤ k`.
pub fn ball_matrices(pair: &SchottkyPair, k: usize) -> Result<Vec<(Word, MoebiusMap)>> {
    Ok(enumerate_ball(2, k)?
        .into_iter()
        .map(|w| {
            let m = pair.word_matrix(&w);
            (w, m)
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub k: usize,
    pub z0: H3Point,
    /// `max_γ dist(z₀, γz₀)` over the ball.
    pub displacement: f64,
    pub bound: f64,
    pub margin: f64,
    pub argmax_word: String,
}

impl BoundReport {
    pub fn holds(&self) -> bool {
        self.margin >= 0.0
    }
}

fn max_displacement(ball: &[(Word, MoebiusMap)], z0: &H3Point) -> (f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, (_, m)) in ball.iter().enumerate() {
        let d = distance(z0, &apply(m, z0));
        if d > best.0 {
            best = (d, i);
        }
    }
    best
}

fn report_from(ball: &[(Word, MoebiusMap)], k: usize, z0: H3Point) -> BoundReport {
    let (displacement, i) = max_displacement(ball, &z0);
    let bound = displacement_bound(k);
    BoundReport {
        k,
        z0,
        displacement,
        bound,
        margin: displacement - bound,
        argmax_word: ball[i].0.to_string(),
    }
}

pub fn test_bound(pair: &SchottkyPair, k: usize, z0: H3Point) -> Result<BoundReport> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("radius must be at least 2, got {k}")));
    }
    Ok(report_from(&ball_matrices(pair, k)?, k, z0))
}

/// A base point with `|z| ≤ 1.5` and `t` log-uniform in `[0.1, 3]`.
pub fn random_base_point(rng: &mut impl Rng) -> H3Point {
    let z = Complex64::from_polar(1.5 * rng.gen::<f64>().sqrt(), rng.gen_range(0.0..2.0 * PI));
    let t = rng.gen_range(0.1f64.ln()..3.0f64.ln()).exp();
    H3Point { z, t }
}

fn point_from(v: [f64; 3]) -> H3Point {
    H3Point {
        z: Complex64::new(v[0], v[1]),
        t: v[2].exp(),
    }
}

/// Approximate `inf_{z₀} max_γ dist(z₀, γz₀)` by a grid over `(Re z, Im z, log t)`
/// followed by a compass search. The result is an upper bound on the infimum.
pub fn minimize_over_base_point(pair: &SchottkyPair, k: usize) -> Result<BoundReport> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("radius must be at least 2, got {k}")));
    }
    let ball = ball_matrices(pair, k)?;
    let objective = |v: [f64; 3]| max_displacement(&ball, &point_from(v)).0;
    let mut best = ([0.0, 0.0, 0.0], f64::INFINITY);
    for i in 0..9 {
        for j in 0..9 {
            for l in 0..7 {
                let v = [
                    -1.5 + 3.0 * i as f64 / 8.0,
                    -1.5 + 3.0 * j as f64 / 8.0,
                    0.1f64.ln() + (3.0f64.ln() - 0.1f64.ln()) * l as f64 / 6.0,
                ];
                let f = objective(v);
                if f < best.1 {
                    best = (v, f);
                }
            }
        }
    }
    let mut step = 0.25;
    while step > 1e-7 {
        let mut improved = false;
        for axis in 0..3 {
            for sign in [1.0, -1.0] {
                let mut v = best.0;
                v[axis] += sign * step;
                let f = objective(v);
                if f < best.1 {
                    best = (v, f);
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    Ok(report_from(&ball, k, point_from(best.0)))
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub report: BoundReport,
}

/// `trials` pairs seeded `master, master + 1, …`, each tested at
/// `base_points` random base points drawn from stream 1 of the pair's seed.
pub fn run_trials(master: u64, trials: usize, base_points: usize, k: usize, cfg: &SchottkyConfig) -> Result<Vec<TrialRecord>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("radius must be at least 2, got {k}")));
    }
    let per_pair: Vec<Result<Vec<TrialRecord>>> = (0..trials as u64)
        .into_par_iter()
        .map(|i| {
            let seed = master.wrapping_add(i);
            let pair = sample_schottky(seed, cfg)?;
            let ball = ball_matrices(&pair, k)?;
            let mut rng = stream_rng(seed, 1);
            Ok((0..base_points)
                .map(|_| TrialRecord {
                    seed,
                    report: report_from(&ball, k, random_base_point(&mut rng)),
                })
                .collect())
        })
        .collect();
    let mut out = Vec::with_capacity(trials * base_points);
    for r in per_pair {
        out.extend(r?);
    }
    Ok(out)
}
