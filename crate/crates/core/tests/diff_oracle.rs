use diffsync_core::diff::{diff, diff_text, patch, Content, EditScript, PatchMode, TextOp};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook O(nm) LCS table.
fn lcs(a: &[char], b: &[char]) -> usize {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 0..a.len() {
        for j in 0..b.len() {
            t[i + 1][j + 1] = if a[i] == b[j] { t[i][j] + 1 } else { t[i][j + 1].max(t[i + 1][j]) };
        }
    }
    t[a.len()][b.len()]
}

fn all_strings(alphabet: &[char], max_len: usize) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut layer = vec![String::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * alphabet.len());
        for s in &layer {
            for &c in alphabet {
                let mut t = s.clone();
                t.push(c);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

fn apply_exact(base: &str, ops: Vec<TextOp>, work: u64) -> String {
    let out = patch(&Content::text(base), &EditScript::text(ops, work), PatchMode::Exact).unwrap();
    assert_eq!(out.dropped, 0);
    out.content.as_text().unwrap().to_string()
}

#[test]
fn shortest_script_on_every_small_pair() {
    let strings = all_strings(&['a', 'b', 'c'], 6);
    assert_eq!(strings.len(), 1093);
    let chars: Vec<Vec<char>> = strings.iter().map(|s| s.chars().collect()).collect();
    let mut pairs = 0u64;
    for (a, ac) in strings.iter().zip(&chars) {
        for (b, bc) in strings.iter().zip(&chars) {
            let (ops, work) = diff_text(a, b);
            let script = EditScript::text(ops.clone(), work);
            assert_eq!(
                script.edit_length(),
                ac.len() + bc.len() - 2 * lcs(ac, bc),
                "{a:?} -> {b:?}"
            );
            assert_eq!(apply_exact(a, ops, work), *b, "{a:?} -> {b:?}");
            pairs += 1;
        }
    }
    assert_eq!(pairs, 1093 * 1093);
}

/// A target made from `base` by a few random splices, or an unrelated string.
fn related_pair(rng: &mut ChaCha8Rng, max_len: usize) -> (String, String) {
    let alphabet: Vec<char> = "abcdefghij é中\n".chars().collect();
    let len = rng.random_range(0..=max_len);
    let base: Vec<char> = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
    if rng.random_bool(0.1) {
        let len = rng.random_range(0..=max_len);
        let other: String = (0..len).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        return (base.iter().collect(), other);
    }
    let mut target = base.clone();
    for _ in 0..rng.random_range(0..8) {
        let at = rng.random_range(0..=target.len());
        let del = rng.random_range(0..=(target.len() - at).min(20));
        let ins: Vec<char> = (0..rng.random_range(0..20))
            .map(|_| alphabet[rng.random_range(0..alphabet.len())])
            .collect();
        target.splice(at..at + del, ins);
    }
    (base.iter().collect(), target.iter().collect())
}

#[test]
fn round_trip_ten_thousand_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for i in 0..10_000 {
        let max_len = if i % 100 == 0 { 10_000 } else { 300 };
        let (a, b) = related_pair(&mut rng, max_len);
        let (ops, work) = diff_text(&a, &b);
        assert_eq!(apply_exact(&a, ops, work), b, "pair {i}");
    }
}

#[test]
fn identical_input_costs_nothing() {
    let s = "x".repeat(10_000);
    let (ops, work) = diff_text(&s, &s);
    assert!(ops.is_empty());
    assert_eq!(work, 0);
}

proptest! {
    #[test]
    fn round_trip(a in "[ab\u{e9}c]{0,60}", b in "[ab\u{e9}c]{0,60}") {
        let (ops, work) = diff_text(&a, &b);
        prop_assert_eq!(apply_exact(&a, ops, work), b);
    }

    #[test]
    fn empty_script_iff_equal(a in "[ab]{0,12}", b in "[ab]{0,12}") {
        let s = diff(&Content::text(&a), &Content::text(&b)).unwrap();
        prop_assert_eq!(s.is_empty(), a == b);
    }

    #[test]
    fn fuzzy_matches_exact_on_the_base(a in "[a-d ]{0,80}", b in "[a-d ]{0,80}") {
        let s = diff(&Content::text(&a), &Content::text(&b)).unwrap();
        let out = patch(&Content::text(&a), &s, PatchMode::Fuzzy).unwrap();
        prop_assert_eq!(out.content, Content::text(&b));
        prop_assert_eq!(out.dropped, 0);
    }

    /// Fuzzy patching onto a drifted copy never fails and accounts for every op.
    #[test]
    fn fuzzy_on_drifted_copy_is_total(
        a in "[a-e]{0,80}",
        b in "[a-e]{0,80}",
        at in 0usize..80,
        junk in "[xyz]{0,10}",
    ) {
        let s = diff(&Content::text(&a), &Content::text(&b)).unwrap();
        let mut drifted: Vec<char> = a.chars().collect();
        let at = at.min(drifted.len());
        drifted.splice(at..at, junk.chars());
        let drifted: String = drifted.into_iter().collect();
        let out = patch(&Content::text(&drifted), &s, PatchMode::Fuzzy).unwrap();
        prop_assert_eq!(out.applied + out.dropped, s.len());
    }
}

proptest! {
    #[test]
    fn work_is_zero_iff_script_is_empty(a in "[ab]{0,10}", b in "[ab]{0,10}") {
        let s = diff(&Content::text(&a), &Content::text(&b)).unwrap();
        prop_assert_eq!(s.work_units == 0, s.is_empty());
    }
}

#[test]
fn annotation_work_is_zero_iff_script_is_empty() {
    use diffsync_core::workload::{generate_trace, WorkloadParams};
    let trace = generate_trace(&WorkloadParams::default(), 3, 4).unwrap();
    let mut item = trace.initial.clone();
    let first = diff(&item, &item).unwrap();
    assert!(first.is_empty() && first.work_units == 0);
    for e in trace.edits.iter().take(50) {
        let script = e.edit.resolve(&item).unwrap();
        let next = patch(&item, &script, PatchMode::Exact).unwrap().content;
        let s = diff(&item, &next).unwrap();
        assert_eq!(s.work_units == 0, s.is_empty());
        item = next;
    }
}
