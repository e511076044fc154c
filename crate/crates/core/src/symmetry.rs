//! Permutations of sphere indices that preserve the `F`-family, and the
//! induced maps `T(x)_i = x_{τ(i)}` on the simplex.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::dispfun::{FunctionFamily, SimplexPoint};
use crate::error::{Error, Result};
use crate::freegroup::{LetterBijection, SphereIndexing};

/// A permutation `τ` of `1..=d`, stored as `images[i - 1] = τ(i)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndexPermutation {
    pub name: String,
    images: Vec<usize>,
}

impl IndexPermutation {
    pub fn from_images(name: impl Into<String>, images: Vec<usize>) -> Result<Self> {
        let d = images.len();
        let mut seen = vec![false; d];
        for &i in &images {
            if i == 0 || i > d || seen[i - 1] {
                return Err(Error::InvalidPermutation(format!("{images:?} is not a permutation of 1..={d}")));
            }
            seen[i - 1] = true;
        }
        Ok(IndexPermutation {
            name: name.into(),
            images,
        })
    }

    /// Builds a permutation from disjoint cycles on `1..=d`.
    pub fn from_cycles(name: impl Into<String>, d: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut images: Vec<usize> = (1..=d).collect();
        let mut touched = BTreeSet::new();
        for cycle in cycles {
            for (pos, &a) in cycle.iter().enumerate() {
                if a == 0 || a > d || !touched.insert(a) {
                    return Err(Error::InvalidPermutation(format!("bad or repeated entry {a} in cycles")));
                }
                images[a - 1] = cycle[(pos + 1) % cycle.len()];
            }
        }
        IndexPermutation::from_images(name, images)
    }

    /// The permutation `p(w) ↦ p(φ(w))` induced by a letter relabeling `φ`.
    pub fn from_relabeling(name: impl Into<String>, indexing: &SphereIndexing, phi: &LetterBijection) -> Self {
        let images = indexing
            .words()
            .iter()
            .map(|w| indexing.index_of(&phi.apply(w)).expect("relabeling preserves the sphere"))
            .collect();
        IndexPermutation {
            name: name.into(),
            images,
        }
    }

    pub fn d(&self) -> usize {
        self.images.len()
    }

    pub fn image(&self, i: usize) -> usize {
        self.images[i - 1]
    }

    /// `T(x)_i = x_{τ(i)}`.
    pub fn apply(&self, x: &SimplexPoint) -> SimplexPoint {
        SimplexPoint::new(self.images.iter().map(|&j| x.at(j)).collect()).expect("permuted simplex point")
    }
}

/// Checks that `{(τ(A), τ(t))}` over the `F`-members equals `{(A, t)}`; then
/// `F(T(x)) = F(x)` for every `x`.
pub fn check_preserves_family(family: &FunctionFamily, perm: &IndexPermutation) -> Result<()> {
    if perm.d() != family.d() {
        return Err(Error::InvalidPermutation(format!(
            "{} acts on {} indices, family has {}",
            perm.name,
            perm.d(),
            family.d()
        )));
    }
    let original: BTreeSet<(Vec<usize>, usize)> =
        family.f_functions().map(|f| (f.numerator_set(), f.target())).collect();
    let mapped: BTreeSet<(Vec<usize>, usize)> = family
        .f_functions()
        .map(|f| {
            let mut a: Vec<usize> = f.numerator_set().iter().map(|&l| perm.image(l)).collect();
            a.sort_unstable();
            (a, perm.image(f.target()))
        })
        .collect();
    if original == mapped {
        Ok(())
    } else {
        Err(Error::InvalidPermutation(format!("{} does not map the family onto itself", perm.name)))
    }
}

/// Three generators of `F`-family symmetries for `k = 2`, rank 2.
pub fn k2_reference_permutations() -> Vec<IndexPermutation> {
    vec![
        IndexPermutation::from_cycles("tau1", 12, &[&[1, 12], &[2, 10], &[3, 11], &[4, 5], &[8, 9]]),
        IndexPermutation::from_cycles("tau2", 12, &[&[1, 9], &[2, 8], &[3, 7], &[4, 6], &[10, 12]]),
        IndexPermutation::from_cycles("tau3", 12, &[&[1, 5], &[2, 6], &[3, 4], &[7, 8], &[11, 12]]),
    ]
    .into_iter()
    .map(|p| p.expect("valid cycles"))
    .collect()
}

/// Index permutations induced by all `2^n·n!` letter relabelings.
pub fn relabeling_permutations(indexing: &SphereIndexing) -> Vec<IndexPermutation> {
    LetterBijection::all(indexing.rank())
        .iter()
        .enumerate()
        .map(|(i, phi)| IndexPermutation::from_relabeling(format!("relabel{i}"), indexing, phi))
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryEntry {
    pub name: String,
    pub f_before: f64,
    pub f_after: f64,
    pub relative_difference: f64,
    /// `‖T(x) − x‖∞`.
    pub displacement: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SymmetryReport {
    pub entries: Vec<SymmetryEntry>,
    pub max_relative_difference: f64,
    pub max_displacement: f64,
}

impl SymmetryReport {
    pub fn invariant(&self, tol: f64) -> bool {
        self.max_relative_difference <= tol
    }
}

pub fn symmetry_check(family: &FunctionFamily, x: &SimplexPoint, perms: &[IndexPermutation]) -> Result<SymmetryReport> {
    let before = family.eval_f_max(x).value;
    let mut entries = Vec::with_capacity(perms.len());
    for p in perms {
        check_preserves_family(family, p)?;
        let tx = p.apply(x);
        let after = family.eval_f_max(&tx).value;
        let displacement = tx
            .coords()
            .iter()
            .zip(x.coords())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        entries.push(SymmetryEntry {
            name: p.name.clone(),
            f_before: before,
            f_after: after,
            relative_difference: (after - before).abs() / before.abs(),
            displacement,
        });
    }
    Ok(SymmetryReport {
        max_relative_difference: entries.iter().map(|e| e.relative_difference).fold(0.0, f64::max),
        max_displacement: entries.iter().map(|e| e.displacement).fold(0.0, f64::max),
        entries,
    })
}
