//! Displacement functions `x ↦ σ(Σ_{l∈A} x_l)·σ(x_t)` on the open simplex,
//! with `σ(u) = (1 − u)/u`, and the families `F^k ⊆ G^k` built from a
//! relation census.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freegroup::SphereIndexing;
use crate::relations::{Relation, RelationCensus};

/// Absolute tolerance on `Σ x = 1` before a point is renormalized.
pub const SIMPLEX_TOL: f64 = 1e-12;
/// Relative tolerance for argmax tie sets.
pub const TIE_TOL: f64 = 1e-9;
const SIGMA_LO: f64 = 1e-300;
const SIGMA_HI: f64 = 1.0 - 1e-16;

pub fn sigma(u: f64) -> Result<f64> {
    if u > 0.0 && u < 1.0 {
        Ok((1.0 - u) / u)
    } else {
        Err(Error::Domain { value: u })
    }
}

/// `σ` with its argument clamped to `[1e-300, 1 − 1e-16]`; the flag reports
/// whether clamping happened.
pub fn sigma_clamped(u: f64) -> (f64, bool) {
    let c = u.clamp(SIGMA_LO, SIGMA_HI);
    ((1.0 - c) / c, c != u)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplexPoint {
    coords: Vec<f64>,
    #[serde(default)]
    renormalized: bool,
}

impl SimplexPoint {
    /// Accepts strictly positive finite coordinates; rescales them when the
    /// sum is off by more than [`SIMPLEX_TOL`] and records that in
    /// [`SimplexPoint::was_renormalized`].
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::NotInSimplex("empty coordinate vector".into()));
        }
        if let Some((i, v)) = coords.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NotInSimplex(format!("coordinate {} is {v}", i + 1)));
        }
        let sum: f64 = coords.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            Ok(SimplexPoint {
                coords: coords.iter().map(|v| v / sum).collect(),
                renormalized: true,
            })
        } else {
            Ok(SimplexPoint {
                coords,
                renormalized: false,
            })
        }
    }

    pub fn uniform(d: usize) -> Self {
        SimplexPoint {
            coords: vec![1.0 / d as f64; d],
            renormalized: false,
        }
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn was_renormalized(&self) -> bool {
        self.renormalized
    }

    /// Coordinate at 1-based index `i`.
    pub fn at(&self, i: usize) -> f64 {
        self.coords[i - 1]
    }

    pub fn max_deviation_from_uniform(&self) -> f64 {
        let u = 1.0 / self.dim() as f64;
        self.coords.iter().map(|v| (v - u).abs()).fold(0.0, f64::max)
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FunctionTag {
    F,
    G { product_length: usize },
}

/// Sorted 1-based indices compressed to inclusive ranges.
fn to_ranges(sorted: &[usize]) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for &i in sorted {
        match out.last_mut() {
            Some((_, hi)) if *hi + 1 == i => *hi = i,
            _ => out.push((i, i)),
        }
    }
    out
}

fn complement_ranges(ranges: &[(usize, usize)], d: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut next = 1;
    for &(lo, hi) in ranges {
        if lo > next {
            out.push((next, lo - 1));
        }
        next = hi + 1;
    }
    if next <= d {
        out.push((next, d));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplacementFunction {
    numerator: Vec<(usize, usize)>,
    complement: Vec<(usize, usize)>,
    target: usize,
    tag: FunctionTag,
    gamma: String,
}

/// Prefix sums of a point, shared by every function evaluated there.
pub struct PointSums<'a> {
    x: &'a [f64],
    prefix: Vec<f64>,
}

impl<'a> PointSums<'a> {
    pub fn new(x: &'a SimplexPoint) -> Self {
        PointSums::from_slice(x.coords())
    }

    /// Coordinates are assumed positive and summing to one.
    pub fn from_slice(x: &'a [f64]) -> Self {
        let mut prefix = Vec::with_capacity(x.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for v in x {
            acc += v;
            prefix.push(acc);
        }
        PointSums { x, prefix }
    }

    fn range_sum(&self, ranges: &[(usize, usize)]) -> f64 {
        ranges
            .iter()
            .map(|&(lo, hi)| {
                if hi - lo < 8 {
                    self.x[lo - 1..hi].iter().sum()
                } else {
                    self.prefix[hi] - self.prefix[lo - 1]
                }
            })
            .sum()
    }

    /// Sum over an inclusive 1-based index range.
    pub fn block_sum(&self, block: &RangeInclusive<usize>) -> f64 {
        self.range_sum(&[(*block.start(), *block.end())])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub saturated: bool,
}

impl DisplacementFunction {
    pub fn new(numerator: &[usize], target: usize, d: usize, tag: FunctionTag, gamma: String) -> Result<Self> {
        let mut sorted = numerator.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.is_empty() || sorted.len() >= d {
            return Err(Error::InvalidParameter(
                "numerator set must be a non-empty proper subset".into(),
            ));
        }
        if sorted[0] == 0 || *sorted.last().unwrap() > d || target == 0 || target > d {
            return Err(Error::InvalidParameter(format!("index out of range 1..={d}")));
        }
        let numerator = to_ranges(&sorted);
        let complement = complement_ranges(&numerator, d);
        Ok(DisplacementFunction {
            numerator,
            complement,
            target,
            tag,
            gamma,
        })
    }

    pub fn from_relation(rel: &Relation, indexing: &SphereIndexing) -> Result<Self> {
        let target = indexing
            .index_of(&rel.s)
            .ok_or_else(|| Error::InvalidParameter(format!("{} is not a sphere word", rel.s)))?;
        let tag = if rel.product_length == 0 {
            FunctionTag::F
        } else {
            FunctionTag::G {
                product_length: rel.product_length,
            }
        };
        DisplacementFunction::new(&rel.s_set, target, indexing.d(), tag, rel.gamma.to_string())
    }

    pub fn target(&self) -> usize {
        self.target
    }

    pub fn tag(&self) -> FunctionTag {
        self.tag
    }

    /// The word `γ` of the source relation.
    pub fn gamma(&self) -> &str {
        &self.gamma
    }

    pub fn numerator_ranges(&self) -> &[(usize, usize)] {
        &self.numerator
    }

    pub fn numerator_set(&self) -> Vec<usize> {
        self.numerator.iter().flat_map(|&(lo, hi)| lo..=hi).collect()
    }

    pub fn numerator_contains(&self, i: usize) -> bool {
        self.numerator.iter().any(|&(lo, hi)| lo <= i && i <= hi)
    }

    pub fn numerator_len(&self) -> usize {
        self.numerator.iter().map(|&(lo, hi)| hi - lo + 1).sum()
    }

    /// `σ(Σ_A)` computed as `Σ_{A^c} / Σ_A`, which equals `(1 − Σ_A)/Σ_A` on
    /// the simplex without the cancellation in `1 − Σ_A`.
    fn numerator_factor(&self, sums: &PointSums) -> (f64, f64, bool) {
        let inside = sums.range_sum(&self.numerator);
        let outside = sums.range_sum(&self.complement);
        let sat = inside < SIGMA_LO || outside < SIGMA_LO * inside;
        let inside_c = inside.max(SIGMA_LO);
        (outside / inside_c, inside_c, sat)
    }

    pub fn eval_with(&self, sums: &PointSums) -> Evaluation {
        let (num, _, sat_a) = self.numerator_factor(sums);
        let (den, sat_t) = sigma_clamped(sums.x[self.target - 1]);
        Evaluation {
            value: num * den,
            saturated: sat_a || sat_t,
        }
    }

    pub fn eval(&self, x: &SimplexPoint) -> Evaluation {
        self.eval_with(&PointSums::new(x))
    }

    /// Value with domain checking instead of clamping.
    pub fn eval_strict(&self, x: &SimplexPoint) -> Result<f64> {
        let sums = PointSums::new(x);
        let a = sums.range_sum(&self.numerator);
        Ok(sigma(a)? * sigma(x.at(self.target))?)
    }

    /// Adds `scale · ∇f(x)` into `out` (length `d`).
    pub fn add_gradient(&self, sums: &PointSums, scale: f64, out: &mut [f64]) {
        let (num, inside, _) = self.numerator_factor(sums);
        let xt = sums.x[self.target - 1].clamp(SIGMA_LO, SIGMA_HI);
        let st = (1.0 - xt) / xt;
        let da = -scale * st / (inside * inside);
        for &(lo, hi) in &self.numerator {
            for v in &mut out[lo - 1..hi] {
                *v += da;
            }
        }
        out[self.target - 1] -= scale * num / (xt * xt);
    }

    pub fn gradient(&self, x: &SimplexPoint) -> Vec<f64> {
        let mut g = vec![0.0; x.dim()];
        self.add_gradient(&PointSums::new(x), 1.0, &mut g);
        g
    }
}

/// `f(x, y) = σ(x)·σ(y)`.
pub fn f_two(x: f64, y: f64) -> f64 {
    (1.0 - x) / x * (1.0 - y) / y
}

/// `g(x, y) = σ(x + y)·σ(y)`.
pub fn g_two(x: f64, y: f64) -> f64 {
    (1.0 - x - y) / (x + y) * (1.0 - y) / y
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum TwoVariableForm {
    /// `f(Σ_A, x_t)` when `t ∉ A`.
    F { x: f64, y: f64 },
    /// `g(Σ_A − x_t, x_t)` when `t ∈ A`.
    G { x: f64, y: f64 },
}

impl TwoVariableForm {
    pub fn value(self) -> f64 {
        match self {
            TwoVariableForm::F { x, y } => f_two(x, y),
            TwoVariableForm::G { x, y } => g_two(x, y),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FunctionFamily {
    n: usize,
    k: usize,
    d: usize,
    functions: Vec<DisplacementFunction>,
    /// `f_order[i - 1]` is the position in `functions` of `f_i`.
    f_order: Vec<usize>,
    blocks: Vec<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxEval {
    pub value: f64,
    /// Members within [`TIE_TOL`] of the maximum. For `F` these are the
    /// 1-based indices `i` of `f_i`; for `G` they are positions in
    /// [`FunctionFamily::functions`].
    pub argmax: Vec<usize>,
    pub saturated: bool,
}

fn max_with_ties(values: impl Iterator<Item = (usize, Evaluation)>) -> MaxEval {
    let evals: Vec<(usize, Evaluation)> = values.collect();
    let value = evals.iter().map(|(_, e)| e.value).fold(f64::NEG_INFINITY, f64::max);
    let cut = value - TIE_TOL * value.abs();
    MaxEval {
        value,
        argmax: evals.iter().filter(|(_, e)| e.value >= cut).map(|(i, _)| *i).collect(),
        saturated: evals.iter().any(|(_, e)| e.saturated),
    }
}

impl FunctionFamily {
    pub fn build(census: &RelationCensus, indexing: &SphereIndexing) -> Result<Self> {
        if census.n != indexing.rank() || census.k != indexing.radius() {
            return Err(Error::InvalidParameter(
                "census and sphere indexing disagree on rank or radius".into(),
            ));
        }
        let d = indexing.d();
        let functions: Vec<DisplacementFunction> = census
            .relations
            .iter()
            .map(|r| DisplacementFunction::from_relation(r, indexing))
            .collect::<Result<_>>()?;
        let mut f_order = vec![usize::MAX; d];
        for (pos, f) in functions.iter().enumerate() {
            if f.tag == FunctionTag::F {
                if f_order[f.target - 1] != usize::MAX {
                    return Err(Error::InvalidParameter(format!(
                        "two length-zero relations share target {}",
                        f.target
                    )));
                }
                f_order[f.target - 1] = pos;
            }
        }
        if let Some(i) = f_order.iter().position(|&p| p == usize::MAX) {
            return Err(Error::InvalidParameter(format!("no length-zero relation targets index {}", i + 1)));
        }
        let blocks = indexing.blocks().iter().map(|b| (*b.start(), *b.end())).collect();
        Ok(FunctionFamily {
            n: census.n,
            k: census.k,
            d,
            functions,
            f_order,
            blocks,
        })
    }

    /// Enumerates the census and builds the family in one step.
    pub fn for_rank_radius(n: usize, k: usize) -> Result<Self> {
        let census = crate::relations::enumerate_relations(n, k)?;
        let indexing = crate::freegroup::enumerate_sphere(n, k)?;
        FunctionFamily::build(&census, &indexing)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Every member, in census order.
    pub fn functions(&self) -> &[DisplacementFunction] {
        &self.functions
    }

    /// `f_i`, 1-based.
    pub fn f(&self, i: usize) -> &DisplacementFunction {
        &self.functions[self.f_order[i - 1]]
    }

    pub fn f_functions(&self) -> impl Iterator<Item = &DisplacementFunction> {
        self.f_order.iter().map(|&p| &self.functions[p])
    }

    pub fn blocks(&self) -> Vec<RangeInclusive<usize>> {
        self.blocks.iter().map(|&(lo, hi)| lo..=hi).collect()
    }

    /// `Σ_j(x)` for the 1-based block `j`.
    pub fn block_sum(&self, x: &SimplexPoint, j: usize) -> f64 {
        let (lo, hi) = self.blocks[j - 1];
        x.coords()[lo - 1..hi].iter().sum()
    }

    /// 1-based block containing index `i`.
    pub fn block_of(&self, i: usize) -> usize {
        (i - 1) / (self.d / (2 * self.n)) + 1
    }

    /// Block used by `f_i` under the residue rule: `2n − ((i − 1) mod 2n)`.
    pub fn f_block(&self, i: usize) -> usize {
        2 * self.n - (i - 1) % (2 * self.n)
    }

    pub fn f_values(&self, x: &SimplexPoint) -> Vec<f64> {
        let sums = PointSums::new(x);
        self.f_functions().map(|f| f.eval_with(&sums).value).collect()
    }

    pub fn all_values(&self, x: &SimplexPoint) -> Vec<f64> {
        let sums = PointSums::new(x);
        self.functions.iter().map(|f| f.eval_with(&sums).value).collect()
    }

    pub fn eval_f_max(&self, x: &SimplexPoint) -> MaxEval {
        let sums = PointSums::new(x);
        max_with_ties(self.f_functions().enumerate().map(|(i, f)| (i + 1, f.eval_with(&sums))))
    }

    pub fn eval_g_max(&self, x: &SimplexPoint) -> MaxEval {
        let sums = PointSums::new(x);
        max_with_ties(self.functions.iter().enumerate().map(|(i, f)| (i, f.eval_with(&sums))))
    }

    /// Two-variable reduction of `f_i` at `x`.
    pub fn two_variable_form(&self, i: usize, x: &SimplexPoint) -> TwoVariableForm {
        let f = self.f(i);
        let sums = PointSums::new(x);
        let a = sums.range_sum(&f.numerator);
        let xi = x.at(i);
        if f.numerator_contains(i) {
            TwoVariableForm::G { x: a - xi, y: xi }
        } else {
            TwoVariableForm::F { x: a, y: xi }
        }
    }
}

pub fn eval_function(f: &DisplacementFunction, x: &SimplexPoint) -> f64 {
    f.eval(x).value
}

#[allow(non_snake_case)]
pub fn eval_F(family: &FunctionFamily, x: &SimplexPoint) -> MaxEval {
    family.eval_f_max(x)
}

#[allow(non_snake_case)]
pub fn eval_G(family: &FunctionFamily, x: &SimplexPoint) -> MaxEval {
    family.eval_g_max(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn sigma_values() {
        assert_eq!(sigma(0.5).unwrap(), 1.0);
        assert_eq!(sigma(0.25).unwrap(), 3.0);
        assert!(close(sigma(1.0 / 12.0).unwrap(), 11.0, 1e-15));
        assert!(sigma(0.0).is_err());
        assert!(sigma(1.0).is_err());
        let (v, sat) = sigma_clamped(0.0);
        assert!(sat && v > 1e299);
    }

    #[test]
    fn simplex_point_validation() {
        assert!(SimplexPoint::new(vec![0.5, 0.5]).is_ok());
        assert!(SimplexPoint::new(vec![0.5, 0.0, 0.5]).is_err());
        assert!(SimplexPoint::new(vec![f64::NAN, 1.0]).is_err());
        let p = SimplexPoint::new(vec![1.0, 3.0]).unwrap();
        assert!(p.was_renormalized());
        assert_eq!(p.coords(), &[0.25, 0.75]);
        assert!(!SimplexPoint::new(vec![0.25, 0.75]).unwrap().was_renormalized());
    }

    #[test]
    fn ranges_round_trip() {
        let r = to_ranges(&[1, 2, 3, 5, 7, 8]);
        assert_eq!(r, vec![(1, 3), (5, 5), (7, 8)]);
        assert_eq!(complement_ranges(&r, 10), vec![(4, 4), (6, 6), (9, 10)]);
    }

    #[test]
    fn k2_named_members() {
        let fam = FunctionFamily::for_rank_radius(2, 2).unwrap();
        let f12 = fam.f(12);
        assert_eq!(f12.numerator_set(), vec![1, 2, 3]);
        assert_eq!(f12.target(), 12);
        let g = fam
            .functions()
            .iter()
            .find(|f| f.tag() == FunctionTag::G { product_length: 1 } && f.target() == 1)
            .unwrap();
        assert_eq!(g.numerator_set(), (4..=12).collect::<Vec<_>>());
        let g2: Vec<_> = fam
            .functions()
            .iter()
            .filter(|f| f.tag() == FunctionTag::G { product_length: 2 } && f.target() == 1)
            .collect();
        assert_eq!(g2.len(), 2);
        let mut expected: Vec<usize> = (1..=12).collect();
        expected.retain(|&i| i != 5);
        assert_eq!(g2[0].numerator_set(), expected);
    }

    #[test]
    fn uniform_values() {
        let fam = FunctionFamily::for_rank_radius(2, 2).unwrap();
        let u = SimplexPoint::uniform(12);
        let m = fam.eval_f_max(&u);
        assert!(close(m.value, 33.0, 1e-12));
        assert_eq!(m.argmax.len(), 12);
        let g = fam.eval_g_max(&u);
        assert!(close(g.value, 33.0, 1e-12));
        for f in fam.functions() {
            let v = f.eval(&u).value;
            match f.tag() {
                FunctionTag::F => assert!(close(v, 33.0, 1e-12)),
                FunctionTag::G { product_length: 1 } => assert!(close(v, 11.0 / 3.0, 1e-12)),
                FunctionTag::G { .. } => assert!(close(v, 1.0, 1e-12)),
            }
        }
    }

    #[test]
    fn residue_rule_blocks() {
        let fam = FunctionFamily::for_rank_radius(2, 3).unwrap();
        for i in 1..=fam.d() {
            let j = fam.f_block(i);
            let want = match i % 4 {
                0 => 1,
                1 => 4,
                2 => 3,
                _ => 2,
            };
            assert_eq!(j, want);
            let b = &fam.blocks()[j - 1];
            assert_eq!(fam.f(i).numerator_set(), b.clone().collect::<Vec<_>>());
        }
    }

    #[test]
    fn gradient_zero_outside_support() {
        let fam = FunctionFamily::for_rank_radius(2, 2).unwrap();
        let x = SimplexPoint::new((1..=12).map(|i| i as f64).collect()).unwrap();
        let g = fam.f(12).gradient(&x);
        for (l, v) in g.iter().enumerate() {
            if !(l < 3 || l == 11) {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn strict_eval_matches() {
        let fam = FunctionFamily::for_rank_radius(2, 2).unwrap();
        let x = SimplexPoint::new((1..=12).map(|i| (i * i) as f64).collect()).unwrap();
        for f in fam.functions() {
            assert!(close(f.eval(&x).value, f.eval_strict(&x).unwrap(), 1e-12));
        }
    }
}
