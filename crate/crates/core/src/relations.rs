//! Group-theoretical relations `(γ, s(γ), S(γ))` of the symmetric
//! decomposition `Γ = {1} ∪ Ψ_r^k ∪ ⋃_ψ J_ψ`.
//!
//! A relation says that `γ` carries the cone `J_{s(γ)}` onto the complement of
//! the cones `J_χ`, `χ ∈ S(γ)`, up to finitely many short words. The pairs are
//! enumerated from the parametrization `γ = w·(s_1⋯s_i)^{-1}`; the set `S(γ)`
//! is then recomputed from cone membership alone.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freegroup::{
    check_rank, enumerate_ball, has_prefix, multiply, sphere_size, sphere_words, EnumerationLimits, Letter,
    SphereIndexing, Word,
};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub gamma: Word,
    pub s: Word,
    /// Sorted 1-based sphere indices.
    #[serde(rename = "S")]
    pub s_set: Vec<usize>,
    #[serde(rename = "j")]
    pub product_length: usize,
}

impl Relation {
    pub fn is_length_zero(&self) -> bool {
        self.product_length == 0
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationCensus {
    pub n: usize,
    pub k: usize,
    pub relations: Vec<Relation>,
    pub count_by_product_length: BTreeMap<usize, usize>,
}

impl RelationCensus {
    pub fn total(&self) -> usize {
        self.relations.len()
    }

    pub fn with_product_length(&self, j: usize) -> impl Iterator<Item = &Relation> {
        self.relations.iter().filter(move |r| r.product_length == j)
    }
}

fn geometric_sum(q: u128, terms: usize) -> u128 {
    (0..terms).map(|e| q.pow(e as u32)).sum()
}

/// Relations per sphere word, counted by the number `i` of cancellations in
/// `γ·s(γ)`.
pub fn r_k_sum_over_cancellations(n: usize, k: usize) -> u128 {
    let q = 2 * n as u128 - 1;
    let branch = 2 * n as u128 - 2;
    1 + (1..k)
        .map(|i| 1 + branch * geometric_sum(q, i.min(k - i)))
        .sum::<u128>()
}

/// Relations per sphere word with `length(γ·s(γ)) = j`, for `j = 0..=k`.
pub fn a_j_terms(n: usize, k: usize) -> Vec<u128> {
    let q = 2 * n as u128 - 1;
    let branch = 2 * n as u128 - 2;
    (0..=k)
        .map(|j| match j {
            0 | 1 => 1,
            _ if j == k => branch * geometric_sum(q, k / 2),
            _ => 1 + branch * geometric_sum(q, j / 2),
        })
        .collect()
}

/// Relations per sphere word, counted by product length.
pub fn r_k_sum_over_lengths(n: usize, k: usize) -> u128 {
    a_j_terms(n, k).iter().sum()
}

/// Total number of relations, `d · r_{k,n}`.
pub fn relation_count(n: usize, k: usize) -> u128 {
    sphere_size(n, k) * r_k_sum_over_cancellations(n, k)
}

/// The displayed rank-n count `k + (2n−2) Σ_{l=1}^{k−1} Σ_{s} (2n−1)^{s−1}`.
/// With `include_s_zero` the inner sum starts at `s = 0`, which gives
/// non-integers; starting at `s = 1` recovers `r_{k,n}`.
pub fn displayed_rank_n_count(n: usize, k: usize, include_s_zero: bool) -> f64 {
    let q = (2 * n - 1) as f64;
    let start = if include_s_zero { 0 } else { 1 };
    let inner: f64 = (1..k)
        .map(|l| (start..=l.min(k - l)).map(|s| q.powi(s as i32 - 1)).sum::<f64>())
        .sum();
    k as f64 + (2 * n - 2) as f64 * inner
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ConeStatus {
    Inside,
    Outside,
    Mixed,
}

impl ConeStatus {
    fn merge(self, other: ConeStatus) -> ConeStatus {
        if self == other {
            self
        } else {
            ConeStatus::Mixed
        }
    }
}

/// Whether the cone of `u` lies in `γ·J_s`. Requires `|u| > |γ|` so that the
/// last letter of `u` survives in `γ^{-1}u` and extensions never cancel.
fn cone_status(gamma_inv: &Word, s: &Word, u: &Word, rank: usize) -> ConeStatus {
    let v = multiply(gamma_inv, u);
    if v.len() >= s.len() {
        return if has_prefix(&v, s) {
            ConeStatus::Inside
        } else {
            ConeStatus::Outside
        };
    }
    let last = u.last().expect("non-empty word");
    let mut status: Option<ConeStatus> = None;
    for pos in 0..2 * rank {
        let l = Letter::from_position(pos, rank);
        if l == last.inverse() {
            continue;
        }
        let mut letters = u.letters().to_vec();
        letters.push(l);
        let child = Word::from_reduced(letters).expect("reduced extension");
        let c = cone_status(gamma_inv, s, &child, rank);
        status = Some(status.map_or(c, |st| st.merge(c)));
        if status == Some(ConeStatus::Mixed) {
            break;
        }
    }
    status.expect("rank >= 1")
}

/// `S(γ)`: sphere words whose cones are disjoint from `γ·J_s`. Fails when
/// some cone is split, i.e. `(γ, s)` is not a relation.
pub fn compute_s_set(gamma: &Word, s: &Word, indexing: &SphereIndexing) -> Result<Vec<usize>> {
    let rank = indexing.rank();
    let gamma_inv = gamma.inverse();
    let mut out = Vec::new();
    for (i, chi) in indexing.words().iter().enumerate() {
        let mut status: Option<ConeStatus> = None;
        for pos in 0..2 * rank {
            let l = Letter::from_position(pos, rank);
            if Some(l.inverse()) == chi.last() {
                continue;
            }
            let mut letters = chi.letters().to_vec();
            letters.push(l);
            let child = Word::from_reduced(letters).expect("reduced extension");
            let c = cone_status(&gamma_inv, s, &child, rank);
            status = Some(status.map_or(c, |st| st.merge(c)));
        }
        match status {
            Some(ConeStatus::Outside) => out.push(i + 1),
            Some(ConeStatus::Inside) => {}
            _ => {
                return Err(Error::NotARelation {
                    gamma: gamma.to_string(),
                    s: s.to_string(),
                })
            }
        }
    }
    Ok(out)
}

/// Builds a relation from a pair, computing `S(γ)` and the product length.
pub fn make_relation(gamma: Word, s: Word, indexing: &SphereIndexing) -> Result<Relation> {
    let product_length = multiply(&gamma, &s).len();
    let s_set = compute_s_set(&gamma, &s, indexing)?;
    Ok(Relation {
        gamma,
        s,
        s_set,
        product_length,
    })
}

/// Reduced words of length `m` whose last letter avoids `forbidden_last`.
fn words_with_last_letter_avoiding(m: usize, rank: usize, forbidden_last: &[Letter]) -> Vec<Vec<Letter>> {
    if m == 0 {
        return vec![Vec::new()];
    }
    let all: Vec<Letter> = (0..2 * rank).map(|p| Letter::from_position(p, rank)).collect();
    // Built right to left, stored reversed.
    let mut acc: Vec<Vec<Letter>> = all
        .iter()
        .filter(|l| !forbidden_last.contains(l))
        .map(|&l| vec![l])
        .collect();
    for _ in 1..m {
        let mut next = Vec::with_capacity(acc.len() * (2 * rank - 1));
        for rev in &acc {
            let after = *rev.last().expect("non-empty");
            for &l in &all {
                if l != after.inverse() {
                    let mut v = rev.clone();
                    v.push(l);
                    next.push(v);
                }
            }
        }
        acc = next;
    }
    for v in &mut acc {
        v.reverse();
    }
    acc
}

/// All `γ` with `1 ≤ |γ| ≤ k` and `|γ·s| ≤ k`, ordered by length then by
/// letter positions.
fn gammas_for(s: &Word, k: usize, rank: usize) -> Vec<Word> {
    let letters = s.letters();
    let mut out = Vec::new();
    for i in 1..=k {
        let tail: Vec<Letter> = letters[..i].iter().rev().map(|l| l.inverse()).collect();
        let max_w = if i == k { 0 } else { i.min(k - i) };
        let mut forbidden = vec![letters[i - 1]];
        if i < k {
            forbidden.push(letters[i].inverse());
        }
        for m in 0..=max_w {
            for mut w in words_with_last_letter_avoiding(m, rank, &forbidden) {
                w.extend_from_slice(&tail);
                out.push(Word::from_reduced(w).expect("parametrized γ is reduced"));
            }
        }
    }
    out.sort_by_cached_key(|g| (g.len(), g.positions(rank)));
    out
}

pub fn enumerate_relations(n: usize, k: usize) -> Result<RelationCensus> {
    enumerate_relations_with(n, k, &EnumerationLimits::default())
}

pub fn enumerate_relations_with(n: usize, k: usize, limits: &EnumerationLimits) -> Result<RelationCensus> {
    check_rank(n)?;
    if k < 2 {
        return Err(Error::InvalidParameter(format!("radius must be at least 2, got {k}")));
    }
    let requested = relation_count(n, k);
    if requested > limits.max_words {
        return Err(Error::CapExceeded {
            requested,
            cap: limits.max_words,
        });
    }
    let indexing = crate::freegroup::enumerate_sphere_with(n, k, limits)?;
    let per_word: Vec<Vec<Relation>> = indexing
        .words()
        .par_iter()
        .map(|s| {
            gammas_for(s, k, n)
                .into_iter()
                .map(|g| make_relation(g, s.clone(), &indexing))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let relations: Vec<Relation> = per_word.into_iter().flatten().collect();
    let mut count_by_product_length = BTreeMap::new();
    for r in &relations {
        *count_by_product_length.entry(r.product_length).or_insert(0) += 1;
    }
    Ok(RelationCensus {
        n,
        k,
        relations,
        count_by_product_length,
    })
}

/// The relations with `s(γ) = γ^{-1}`, one per sphere word.
pub fn length_zero_relations(n: usize, k: usize) -> Result<Vec<Relation>> {
    check_rank(n)?;
    let indexing = crate::freegroup::enumerate_sphere(n, k)?;
    indexing
        .words()
        .iter()
        .map(|s| make_relation(s.inverse(), s.clone(), &indexing))
        .collect()
}

/// The 36 length-zero relations of radius 3 in rank 2.
pub fn census_for_k3_length0() -> Result<Vec<Relation>> {
    length_zero_relations(2, 3)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RelationCheck {
    pub ok: bool,
    pub checked_words: usize,
    /// Long words where cone membership disagrees (at most 16 kept).
    pub counterexamples: Vec<Word>,
    /// Words of length `<= k` (identity included) where the literal set
    /// identity fails; these do not affect validity.
    pub short_discrepancies: Vec<Word>,
}

fn in_translated_cone(gamma_inv: &Word, s: &Word, u: &Word) -> bool {
    has_prefix(&multiply(gamma_inv, u), s)
}

fn outside_listed_cones(u: &Word, rel: &Relation, indexing: &SphereIndexing) -> bool {
    let k = indexing.radius();
    if u.len() < k {
        return true;
    }
    let idx = indexing.index_of(&u.prefix(k)).expect("sphere word");
    rel.s_set.binary_search(&idx).is_err()
}

fn check_against(rel: &Relation, indexing: &SphereIndexing, long_words: &[Word], short_words: &[Word]) -> RelationCheck {
    let gamma_inv = rel.gamma.inverse();
    let mut report = RelationCheck {
        ok: true,
        checked_words: long_words.len(),
        ..Default::default()
    };
    for u in long_words {
        if in_translated_cone(&gamma_inv, &rel.s, u) != outside_listed_cones(u, rel, indexing) {
            report.ok = false;
            if report.counterexamples.len() < 16 {
                report.counterexamples.push(u.clone());
            }
        }
    }
    for u in short_words {
        if in_translated_cone(&gamma_inv, &rel.s, u) != outside_listed_cones(u, rel, indexing) {
            report.short_discrepancies.push(u.clone());
        }
    }
    report
}

fn long_words(indexing: &SphereIndexing, depth: usize) -> Result<Vec<Word>> {
    let k = indexing.radius();
    if depth <= k {
        return Err(Error::InvalidParameter(format!("depth {depth} must exceed the radius {k}")));
    }
    let total: u128 = (k + 1..=depth).map(|l| sphere_size(indexing.rank(), l)).sum();
    let cap = EnumerationLimits::default().max_words;
    if total > cap {
        return Err(Error::CapExceeded { requested: total, cap });
    }
    Ok((k + 1..=depth).flat_map(|l| sphere_words(indexing.rank(), l)).collect())
}

fn short_words(indexing: &SphereIndexing) -> Result<Vec<Word>> {
    let mut v = vec![Word::identity()];
    v.extend(enumerate_ball(indexing.rank(), indexing.radius())?);
    Ok(v)
}

/// Checks every reduced `u` with `k < |u| ≤ depth`:
/// `u ∈ γ·J_{s(γ)}` iff `u` lies in no `J_χ` with `χ ∈ S(γ)`.
pub fn verify_relation_detailed(rel: &Relation, indexing: &SphereIndexing, depth: usize) -> Result<RelationCheck> {
    Ok(check_against(rel, indexing, &long_words(indexing, depth)?, &short_words(indexing)?))
}

pub fn verify_relation(rel: &Relation, indexing: &SphereIndexing, depth: usize) -> bool {
    verify_relation_detailed(rel, indexing, depth).is_ok_and(|r| r.ok)
}

#[derive(Clone, Debug, Serialize)]
pub struct CensusCheck {
    pub depth: usize,
    pub total: usize,
    pub passed: usize,
    pub failures: Vec<Relation>,
}

impl CensusCheck {
    pub fn all_passed(&self) -> bool {
        self.passed == self.total
    }
}

/// Runs [`verify_relation`] on every relation of a census.
pub fn verify_census(census: &RelationCensus, indexing: &SphereIndexing, depth: usize) -> Result<CensusCheck> {
    let long = long_words(indexing, depth)?;
    let short = short_words(indexing)?;
    let failures: Vec<Relation> = census
        .relations
        .par_iter()
        .filter(|r| !check_against(r, indexing, &long, &short).ok)
        .cloned()
        .collect();
    Ok(CensusCheck {
        depth,
        total: census.total(),
        passed: census.total() - failures.len(),
        failures,
    })
}
