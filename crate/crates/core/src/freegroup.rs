//! Reduced words in a free group of rank `n`, sphere and ball enumeration,
//! and the canonical sphere index map.
//!
//! Letters are laid out in a fixed cyclic order of length `2n`. For rank 2
//! the order is `ξ, η⁻¹, η, ξ⁻¹` (symbols `x, Y, y, X`); in general position
//! `i < n` holds generator `i + 1`, inverted when `i` is odd, and position
//! `2n - 1 - i` holds its inverse. Inversion is therefore the involution
//! `i ↦ 2n - 1 - i` on positions.
//!
//! Sphere words are indexed by the recursion
//!
//! ```text
//! p(l)       = pos(l) + 1
//! p(w · l)   = (2n - 1)(p(w) - 1) + o,   o ∈ [1, 2n - 1],  o ≡ pos(l) + p(w)  (mod 2n)
//! ```
//!
//! which groups words by first letter into blocks of `(2n-1)^(k-1)`, keeps the
//! extensions of a word contiguous, and makes `p(w) ≡ pos(last letter) + 1
//! (mod 2n)`. For rank 2 this reproduces the published `k = 2` and `k = 3`
//! listings exactly. The rank-n layout is a convention of this crate; counts
//! and optima do not depend on it.

use std::collections::HashMap;
use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Default guardrail on the number of words a single enumeration may produce.
pub const DEFAULT_WORD_CAP: u128 = 1_000_000;

/// Generator symbols; uppercase is the inverse.
const SYMBOLS: &[u8; 26] = b"xyzwabcdefghijklmnopqrstuv";

/// Largest supported rank (one symbol per generator).
pub const MAX_RANK: usize = SYMBOLS.len();

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Letter {
    generator: u8,
    inverted: bool,
}

impl Letter {
    /// `generator` is 1-based.
    pub fn new(generator: usize, inverted: bool) -> Self {
        assert!(
            (1..=MAX_RANK).contains(&generator),
            "generator index {generator} out of range"
        );
        Letter {
            generator: generator as u8,
            inverted,
        }
    }

    pub fn generator(self) -> usize {
        self.generator as usize
    }

    pub fn is_inverted(self) -> bool {
        self.inverted
    }

    pub fn inverse(self) -> Self {
        Letter {
            generator: self.generator,
            inverted: !self.inverted,
        }
    }

    /// Position in the canonical cyclic letter order for rank `rank`.
    pub fn position(self, rank: usize) -> usize {
        let i = self.generator() - 1;
        debug_assert!(i < rank);
        if self.inverted == (i % 2 == 1) {
            i
        } else {
            2 * rank - 1 - i
        }
    }

    pub fn from_position(pos: usize, rank: usize) -> Self {
        assert!(pos < 2 * rank, "position {pos} out of range for rank {rank}");
        if pos < rank {
            Letter::new(pos + 1, pos % 2 == 1)
        } else {
            let i = 2 * rank - 1 - pos;
            Letter::new(i + 1, i.is_multiple_of(2))
        }
    }

    pub fn symbol(self) -> char {
        let c = SYMBOLS[self.generator() - 1] as char;
        if self.inverted {
            c.to_ascii_uppercase()
        } else {
            c
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        let lower = c.to_ascii_lowercase();
        let idx = SYMBOLS.iter().position(|&s| s as char == lower)?;
        Some(Letter::new(idx + 1, c.is_ascii_uppercase()))
    }
}

/// A reduced word. The empty word is the identity.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Word(Vec<Letter>);

impl Word {
    pub fn identity() -> Self {
        Word(Vec::new())
    }

    pub fn letter(l: Letter) -> Self {
        Word(vec![l])
    }

    /// Free reduction of an arbitrary letter sequence.
    pub fn reduce<I: IntoIterator<Item = Letter>>(seq: I) -> Self {
        let mut out: Vec<Letter> = Vec::new();
        for l in seq {
            if out.last() == Some(&l.inverse()) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        Word(out)
    }

    /// Wraps letters that are already reduced.
    pub fn from_reduced(letters: Vec<Letter>) -> Option<Self> {
        if letters.windows(2).any(|p| p[1] == p[0].inverse()) {
            None
        } else {
            Some(Word(letters))
        }
    }

    /// Parses the symbol encoding, e.g. `"xYX"` for ξη⁻¹ξ⁻¹. Non-reduced
    /// strings are rejected.
    pub fn parse(s: &str) -> Result<Self> {
        let mut letters = Vec::with_capacity(s.len());
        for c in s.chars() {
            let l = Letter::from_symbol(c).ok_or_else(|| Error::WordParse {
                input: s.to_string(),
                reason: format!("unknown symbol {c:?}"),
            })?;
            letters.push(l);
        }
        Word::from_reduced(letters).ok_or_else(|| Error::WordParse {
            input: s.to_string(),
            reason: "word is not reduced".into(),
        })
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_identity(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_empty(&self) -> bool {
        self.is_identity()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn first(&self) -> Option<Letter> {
        self.0.first().copied()
    }

    pub fn last(&self) -> Option<Letter> {
        self.0.last().copied()
    }

    pub fn inverse(&self) -> Self {
        Word(self.0.iter().rev().map(|l| l.inverse()).collect())
    }

    pub fn prefix(&self, len: usize) -> Self {
        Word(self.0[..len.min(self.len())].to_vec())
    }

    /// Largest generator index used, 0 for the identity.
    pub fn max_generator(&self) -> usize {
        self.0.iter().map(|l| l.generator()).max().unwrap_or(0)
    }

    /// Letter positions, used as a lexicographic sort key.
    pub fn positions(&self, rank: usize) -> Vec<usize> {
        self.0.iter().map(|l| l.position(rank)).collect()
    }

    fn push_unchecked(&self, l: Letter) -> Self {
        let mut v = self.0.clone();
        v.push(l);
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.0 {
            write!(f, "{}", l.symbol())?;
        }
        Ok(())
    }
}

impl Serialize for Word {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Word {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Word::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Group product: concatenate then reduce.
pub fn multiply(a: &Word, b: &Word) -> Word {
    Word::reduce(a.0.iter().chain(b.0.iter()).copied())
}

/// `true` iff `psi` is an initial segment of `u`.
pub fn has_prefix(u: &Word, psi: &Word) -> bool {
    u.len() >= psi.len() && u.0[..psi.len()] == psi.0[..]
}

/// Number of reduced words of length exactly `k` in rank `n`.
pub fn sphere_size(n: usize, k: usize) -> u128 {
    if k == 0 {
        return 1;
    }
    let n = n as u128;
    2 * n * (2 * n - 1).pow(k as u32 - 1)
}

/// Number of non-identity reduced words of length less than `k`.
pub fn ball_interior_size(n: usize, k: usize) -> u128 {
    (1..k).map(|l| sphere_size(n, l)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationLimits {
    pub max_words: u128,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            max_words: DEFAULT_WORD_CAP,
        }
    }
}

impl EnumerationLimits {
    fn check(&self, requested: u128) -> Result<()> {
        if requested > self.max_words {
            Err(Error::CapExceeded {
                requested,
                cap: self.max_words,
            })
        } else {
            Ok(())
        }
    }
}

pub(crate) fn check_rank(n: usize) -> Result<()> {
    if !(2..=MAX_RANK).contains(&n) {
        return Err(Error::InvalidParameter(format!(
            "rank must lie in [2, {MAX_RANK}], got {n}"
        )));
    }
    Ok(())
}

/// Canonical 1-based index of a reduced word of length `>= 1` among the words
/// of its length.
pub fn canonical_index(word: &Word, rank: usize) -> usize {
    let modulus = 2 * rank;
    let mut letters = word.letters().iter();
    let first = letters.next().expect("canonical_index of the identity");
    let mut p = first.position(rank) + 1;
    for l in letters {
        let mut o = (l.position(rank) + p) % modulus;
        if o == 0 {
            o = modulus;
        }
        debug_assert!(o < modulus, "non-reduced word in canonical_index");
        p = (modulus - 1) * (p - 1) + o;
    }
    p
}

/// The reduced words of length exactly `k`, in canonical order, together with
/// the inverse map `word -> index`.
#[derive(Clone, Debug)]
pub struct SphereIndexing {
    rank: usize,
    radius: usize,
    words: Vec<Word>,
    index: HashMap<Word, usize>,
}

impl SphereIndexing {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Number of sphere words, the simplex dimension plus one.
    pub fn d(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[Word] {
        &self.words
    }

    /// 1-based index of a sphere word.
    pub fn index_of(&self, w: &Word) -> Option<usize> {
        self.index.get(w).copied()
    }

    /// Word at 1-based index `i`.
    pub fn word(&self, i: usize) -> &Word {
        &self.words[i - 1]
    }

    pub fn block_size(&self) -> usize {
        self.d() / (2 * self.rank)
    }

    /// Index blocks `I_1, …, I_{2n}` (1-based, inclusive); block `j` holds the
    /// words whose first letter has position `j - 1`.
    pub fn blocks(&self) -> Vec<RangeInclusive<usize>> {
        let b = self.block_size();
        (0..2 * self.rank)
            .map(|j| j * b + 1..=(j + 1) * b)
            .collect()
    }

    /// 1-based block number of a 1-based index.
    pub fn block_of(&self, i: usize) -> usize {
        (i - 1) / self.block_size() + 1
    }

    /// Indices (1-based) of all sphere words extending `prefix`, which form a
    /// contiguous range. `prefix` must be non-empty with length at most `k`.
    pub fn extension_range(&self, prefix: &Word) -> RangeInclusive<usize> {
        assert!(!prefix.is_identity() && prefix.len() <= self.radius);
        let p = canonical_index(prefix, self.rank);
        let width = (2 * self.rank - 1).pow((self.radius - prefix.len()) as u32);
        (p - 1) * width + 1..=p * width
    }
}

pub fn enumerate_sphere(n: usize, k: usize) -> Result<SphereIndexing> {
    enumerate_sphere_with(n, k, &EnumerationLimits::default())
}

pub fn enumerate_sphere_with(n: usize, k: usize, limits: &EnumerationLimits) -> Result<SphereIndexing> {
    check_rank(n)?;
    if k == 0 {
        return Err(Error::InvalidParameter("radius must be at least 1".into()));
    }
    limits.check(sphere_size(n, k))?;
    let words = sphere_words(n, k);
    let index = words
        .iter()
        .enumerate()
        .map(|(i, w)| (w.clone(), i + 1))
        .collect();
    Ok(SphereIndexing {
        rank: n,
        radius: k,
        words,
        index,
    })
}

/// Words of length `k` in canonical order, generated level by level.
pub(crate) fn sphere_words(n: usize, k: usize) -> Vec<Word> {
    let modulus = 2 * n;
    let mut level: Vec<Word> = (0..modulus)
        .map(|pos| Word::letter(Letter::from_position(pos, n)))
        .collect();
    for _ in 1..k {
        let mut next = Vec::with_capacity(level.len() * (modulus - 1));
        for (i, w) in level.iter().enumerate() {
            let p = i + 1;
            for o in 1..modulus {
                let pos = (o + modulus * p - p) % modulus;
                next.push(w.push_unchecked(Letter::from_position(pos, n)));
            }
        }
        level = next;
    }
    level
}

/// Non-identity reduced words of length `< k`, shortest first, each length in
/// canonical order.
pub fn enumerate_ball_interior(n: usize, k: usize) -> Result<Vec<Word>> {
    enumerate_ball_interior_with(n, k, &EnumerationLimits::default())
}

pub fn enumerate_ball_interior_with(n: usize, k: usize, limits: &EnumerationLimits) -> Result<Vec<Word>> {
    check_rank(n)?;
    if k == 0 {
        return Err(Error::InvalidParameter("radius must be at least 1".into()));
    }
    limits.check(ball_interior_size(n, k))?;
    Ok((1..k).flat_map(|l| sphere_words(n, l)).collect())
}

/// Non-identity reduced words of length `<= k`.
pub fn enumerate_ball(n: usize, k: usize) -> Result<Vec<Word>> {
    let limits = EnumerationLimits::default();
    check_rank(n)?;
    limits.check(ball_interior_size(n, k + 1))?;
    Ok((1..=k).flat_map(|l| sphere_words(n, l)).collect())
}

/// A bijection of the letters that commutes with inversion, i.e. a signed
/// permutation of the generators. Each one induces an automorphism of the
/// free group that maps spheres to spheres.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LetterBijection {
    /// `images[g - 1]` is the image of generator `g`.
    images: Vec<Letter>,
}

impl LetterBijection {
    pub fn new(images: Vec<Letter>) -> Result<Self> {
        let mut seen = vec![false; images.len()];
        for l in &images {
            let g = l.generator();
            if g > images.len() || seen[g - 1] {
                return Err(Error::InvalidParameter(
                    "letter images do not permute the generators".into(),
                ));
            }
            seen[g - 1] = true;
        }
        Ok(LetterBijection { images })
    }

    pub fn apply_letter(&self, l: Letter) -> Letter {
        let img = self.images[l.generator() - 1];
        if l.is_inverted() {
            img.inverse()
        } else {
            img
        }
    }

    pub fn apply(&self, w: &Word) -> Word {
        Word(w.letters().iter().map(|&l| self.apply_letter(l)).collect())
    }

    /// All `2^n · n!` relabelings of rank `n`.
    pub fn all(n: usize) -> Vec<LetterBijection> {
        let mut perms = Vec::new();
        permutations(&mut (1..=n).collect::<Vec<_>>(), 0, &mut perms);
        let mut out = Vec::with_capacity(perms.len() << n);
        for perm in perms {
            for signs in 0u32..(1 << n) {
                let images = perm
                    .iter()
                    .enumerate()
                    .map(|(i, &g)| Letter::new(g, signs >> i & 1 == 1))
                    .collect();
                out.push(LetterBijection { images });
            }
        }
        out
    }
}

fn permutations(items: &mut Vec<usize>, start: usize, out: &mut Vec<Vec<usize>>) {
    if start == items.len() {
        out.push(items.clone());
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permutations(items, start + 1, out);
        items.swap(start, i);
    }
}
