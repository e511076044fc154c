use std::collections::HashSet;

use dispbound::freegroup::{
    canonical_index, enumerate_ball_interior, enumerate_sphere, multiply, sphere_size, Letter, Word,
};
use proptest::prelude::*;

/// Every reduced word of length `k`, by filtering all letter sequences.
fn naive_sphere(n: usize, k: usize) -> Vec<Word> {
    let mut out = Vec::new();
    let total = (2 * n).pow(k as u32);
    for mut code in 0..total {
        let mut letters = Vec::with_capacity(k);
        for _ in 0..k {
            letters.push(Letter::from_position(code % (2 * n), n));
            code /= 2 * n;
        }
        if let Some(w) = Word::from_reduced(letters) {
            out.push(w);
        }
    }
    out
}

fn letter_strategy(n: usize) -> impl Strategy<Value = Letter> {
    (1..=n, any::<bool>()).prop_map(|(g, inv)| Letter::new(g, inv))
}

proptest! {
    #[test]
    fn reduce_is_idempotent(seq in prop::collection::vec(letter_strategy(3), 0..24)) {
        let once = Word::reduce(seq.iter().copied());
        let twice = Word::reduce(once.letters().iter().copied());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn reduced_words_have_no_cancelling_neighbours(seq in prop::collection::vec(letter_strategy(2), 0..24)) {
        let w = Word::reduce(seq);
        for pair in w.letters().windows(2) {
            prop_assert_ne!(pair[0], pair[1].inverse());
        }
    }

    #[test]
    fn multiplication_is_associative(
        a in prop::collection::vec(letter_strategy(2), 0..8),
        b in prop::collection::vec(letter_strategy(2), 0..8),
        c in prop::collection::vec(letter_strategy(2), 0..8),
    ) {
        let (a, b, c) = (Word::reduce(a), Word::reduce(b), Word::reduce(c));
        prop_assert_eq!(multiply(&multiply(&a, &b), &c), multiply(&a, &multiply(&b, &c)));
    }

    #[test]
    fn parse_round_trips(seq in prop::collection::vec(letter_strategy(4), 0..16)) {
        let w = Word::reduce(seq);
        prop_assert_eq!(Word::parse(&w.to_string()).unwrap(), w);
    }
}

#[test]
fn word_times_inverse_is_identity_up_to_length_six() {
    for k in 1..=6 {
        for w in naive_sphere(2, k) {
            assert!(multiply(&w, &w.inverse()).is_identity(), "{w}");
            assert!(multiply(&w.inverse(), &w).is_identity(), "{w}");
        }
    }
}

#[test]
fn sphere_matches_naive_generation() {
    for n in 2..=3 {
        for k in 1..=5 {
            let ix = enumerate_sphere(n, k).unwrap();
            let naive: HashSet<Word> = naive_sphere(n, k).into_iter().collect();
            let ours: HashSet<Word> = ix.words().iter().cloned().collect();
            assert_eq!(ix.d(), 2 * n * (2 * n - 1).pow(k as u32 - 1));
            assert_eq!(ix.d() as u128, sphere_size(n, k));
            assert_eq!(ours.len(), ix.d(), "duplicates at n={n} k={k}");
            assert_eq!(ours, naive, "n={n} k={k}");
        }
    }
}

#[test]
fn indices_are_a_bijection() {
    for n in 2..=3 {
        for k in 1..=4 {
            let ix = enumerate_sphere(n, k).unwrap();
            for i in 1..=ix.d() {
                assert_eq!(ix.index_of(ix.word(i)), Some(i));
                assert_eq!(canonical_index(ix.word(i), n), i);
            }
        }
    }
}

#[test]
fn residue_of_index_names_the_last_letter() {
    for k in 1..=5 {
        let ix = enumerate_sphere(2, k).unwrap();
        for i in 1..=ix.d() {
            let expected = match i % 4 {
                1 => "x",
                2 => "Y",
                3 => "y",
                _ => "X",
            };
            assert_eq!(ix.word(i).last().unwrap().symbol().to_string(), expected, "k={k} i={i}");
        }
    }
}

#[test]
fn residue_counts_per_block() {
    for k in 2..=6 {
        let ix = enumerate_sphere(2, k).unwrap();
        let q = 3usize.pow(k as u32 - 1);
        let (m, n) = (q.div_ceil(4), q / 4);
        for (j, block) in ix.blocks().iter().enumerate() {
            let mut counts = [0usize; 4];
            for i in block.clone() {
                counts[i % 4] += 1;
            }
            // Columns in the order of residues 1, 2, 3, 0.
            let got = [counts[1], counts[2], counts[3], counts[0]];
            let mut want = if k % 2 == 0 { [m; 4] } else { [n; 4] };
            if k % 2 == 0 {
                want[3 - j] = n;
            } else {
                want[j] = m;
            }
            assert_eq!(got, want, "k={k} block {}", j + 1);
        }
    }
}

#[test]
fn first_listings() {
    let ix = enumerate_sphere(2, 2).unwrap();
    let listing: Vec<String> = ix.words().iter().map(|w| w.to_string()).collect();
    assert_eq!(listing, ["xx", "xY", "xy", "YX", "Yx", "YY", "yy", "yX", "yx", "XY", "Xy", "XX"]);
}

#[test]
fn extensions_are_contiguous() {
    for k in 2..=4 {
        let ix = enumerate_sphere(2, k).unwrap();
        for l in 1..k {
            for prefix in naive_sphere(2, l) {
                let r = ix.extension_range(&prefix);
                let members: Vec<usize> =
                    (1..=ix.d()).filter(|&i| ix.word(i).prefix(l) == prefix).collect();
                assert_eq!(members, r.collect::<Vec<_>>(), "prefix {prefix}");
            }
        }
    }
}

#[test]
fn interior_is_shorter_words() {
    let inner = enumerate_ball_interior(2, 3).unwrap();
    assert_eq!(inner.len(), 4 + 12);
    assert!(inner.iter().all(|w| (1..3).contains(&w.len())));
}
