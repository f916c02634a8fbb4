use alloc::string::String;
use alloc::vec::Vec;

use super::content::{AnnotationEntry, Annotations, Content, ContentKind};
use super::script::{AnnotationOp, EditOp, EditScript, FieldChange, TextChange, TextOp, CONTEXT_LEN, FUZZY_WINDOW};
use super::DiffError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatchMode {
    Exact,
    Fuzzy,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PatchOutcome {
    pub content: Content,
    pub applied: usize,
    pub dropped: usize,
}

type Divergence = (usize, &'static str);

fn divergence((op_index, reason): Divergence) -> DiffError {
    DiffError::ShadowDivergence { op_index, reason }
}

/// Applies `script` to `state`. See the module docs for the two modes.
pub fn patch(state: &Content, script: &EditScript, mode: PatchMode) -> Result<PatchOutcome, DiffError> {
    match state {
        Content::Text(s) => {
            let mut ops = Vec::with_capacity(script.ops.len());
            for op in &script.ops {
                match op {
                    EditOp::Text(t) => ops.push(t),
                    EditOp::Annotation(_) => {
                        return Err(DiffError::VariantMismatch {
                            expected: ContentKind::Text,
                            found: ContentKind::Annotations,
                        })
                    }
                }
            }
            let chars: Vec<char> = s.chars().collect();
            match mode {
                PatchMode::Exact => {
                    let out = exact_text(&chars, ops.iter().copied()).map_err(divergence)?;
                    Ok(PatchOutcome {
                        content: Content::Text(out.into_iter().collect()),
                        applied: ops.len(),
                        dropped: 0,
                    })
                }
                PatchMode::Fuzzy => {
                    let (out, applied, dropped) = fuzzy_text(chars, ops.iter().copied());
                    Ok(PatchOutcome {
                        content: Content::Text(out.into_iter().collect()),
                        applied,
                        dropped,
                    })
                }
            }
        }
        Content::Annotations(map) => {
            let mut ops = Vec::with_capacity(script.ops.len());
            for op in &script.ops {
                match op {
                    EditOp::Annotation(a) => ops.push(a),
                    EditOp::Text(_) => {
                        return Err(DiffError::VariantMismatch {
                            expected: ContentKind::Annotations,
                            found: ContentKind::Text,
                        })
                    }
                }
            }
            let mut map = map.clone();
            let (applied, dropped) = match mode {
                PatchMode::Exact => {
                    exact_annotations(&mut map, &ops).map_err(divergence)?;
                    (ops.len(), 0)
                }
                PatchMode::Fuzzy => fuzzy_annotations(&mut map, &ops),
            };
            Ok(PatchOutcome {
                content: Content::Annotations(map),
                applied,
                dropped,
            })
        }
    }
}

fn ends_with(hay: &[char], ctx: &str) -> bool {
    let n = ctx.chars().count();
    hay.len() >= n && hay[hay.len() - n..].iter().copied().eq(ctx.chars())
}

fn starts_with(hay: &[char], ctx: &str) -> bool {
    let n = ctx.chars().count();
    hay.len() >= n && hay[..n].iter().copied().eq(ctx.chars())
}

/// Exact-mode context check: a context shorter than the maximum must reach
/// the edge of the text.
fn anchored_before(out: &[char], ctx: &str) -> bool {
    ends_with(out, ctx) && (ctx.chars().count() >= CONTEXT_LEN || out.len() == ctx.chars().count())
}

fn anchored_after(rest: &[char], ctx: &str) -> bool {
    starts_with(rest, ctx) && (ctx.chars().count() >= CONTEXT_LEN || rest.len() == ctx.chars().count())
}

fn exact_text<'a>(base: &[char], ops: impl Iterator<Item = &'a TextOp>) -> Result<Vec<char>, Divergence> {
    let mut out = Vec::with_capacity(base.len());
    let mut pos = 0;
    for (i, op) in ops.enumerate() {
        match op {
            TextOp::Retain { len } => {
                if pos + len > base.len() {
                    return Err((i, "retain past end of text"));
                }
                out.extend_from_slice(&base[pos..pos + len]);
                pos += len;
            }
            TextOp::Insert { text, before, after } => {
                if !anchored_before(&out, before) || !anchored_after(&base[pos..], after) {
                    return Err((i, "insert context mismatch"));
                }
                out.extend(text.chars());
            }
            TextOp::Delete { len, before, after } => {
                if pos + len > base.len() {
                    return Err((i, "delete past end of text"));
                }
                if !anchored_before(&out, before) || !anchored_after(&base[pos + len..], after) {
                    return Err((i, "delete context mismatch"));
                }
                pos += len;
            }
        }
    }
    // whatever the script does not reach is kept
    out.extend_from_slice(&base[pos..]);
    Ok(out)
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Fit {
    Partial,
    Full,
}

/// Classifies how well `before`/`after` match around a span of `gap` scalars at `loc`.
fn context_fit(text: &[char], loc: usize, gap: usize, before: &str, after: &str) -> Option<Fit> {
    if loc + gap > text.len() {
        return None;
    }
    let b_ok = ends_with(&text[..loc], before);
    let a_ok = starts_with(&text[loc + gap..], after);
    let strong_b = b_ok && !before.is_empty();
    let strong_a = a_ok && !after.is_empty();
    let both_empty = before.is_empty() && after.is_empty();
    if b_ok && a_ok && (strong_b || strong_a || both_empty) {
        Some(Fit::Full)
    } else if strong_b || strong_a {
        Some(Fit::Partial)
    } else {
        None
    }
}

/// Best location within the window: full fits beat partial ones, then the
/// nearest offset wins, ties going to the lower offset.
pub(crate) fn relocate(
    text: &[char],
    expected: usize,
    gap: usize,
    before: &str,
    after: &str,
    allow_partial: bool,
) -> Option<usize> {
    let lo = expected.saturating_sub(FUZZY_WINDOW);
    let hi = (expected + FUZZY_WINDOW).min(text.len());
    let mut best: Option<(Fit, usize, usize)> = None;
    for loc in lo..=hi {
        let Some(fit) = context_fit(text, loc, gap, before, after) else {
            continue;
        };
        if fit == Fit::Partial && !allow_partial {
            continue;
        }
        let dist = loc.abs_diff(expected);
        let better = match best {
            None => true,
            Some((bf, bd, _)) => fit > bf || (fit == bf && dist < bd),
        };
        if better {
            best = Some((fit, dist, loc));
        }
    }
    best.map(|(_, _, loc)| loc)
}

fn fuzzy_text<'a>(mut text: Vec<char>, ops: impl Iterator<Item = &'a TextOp>) -> (Vec<char>, usize, usize) {
    let mut base_pos = 0usize;
    let mut delta = 0isize;
    let (mut applied, mut dropped) = (0, 0);
    for op in ops {
        let expected = (base_pos as isize + delta).clamp(0, text.len() as isize) as usize;
        match op {
            TextOp::Retain { len } => {
                base_pos += len;
                applied += 1;
            }
            TextOp::Insert { text: s, before, after } => {
                match relocate(&text, expected, 0, before, after, true) {
                    Some(loc) => {
                        let n = s.chars().count();
                        text.splice(loc..loc, s.chars());
                        delta += n as isize + loc as isize - expected as isize;
                        applied += 1;
                    }
                    None => dropped += 1,
                }
            }
            TextOp::Delete { len, before, after } => {
                match relocate(&text, expected, *len, before, after, false) {
                    Some(loc) => {
                        text.drain(loc..loc + len);
                        delta += loc as isize - expected as isize - *len as isize;
                        applied += 1;
                    }
                    None => dropped += 1,
                }
                base_pos += len;
            }
        }
    }
    (text, applied, dropped)
}

fn apply_text_field(field: &mut Option<String>, change: &TextChange, exact: bool) -> Result<bool, &'static str> {
    match change {
        TextChange::Set(v) => {
            *field = v.clone();
            Ok(true)
        }
        TextChange::Edit(ops) => {
            let Some(cur) = field.as_ref() else {
                return if exact { Err("edit of absent text field") } else { Ok(false) };
            };
            let chars: Vec<char> = cur.chars().collect();
            if exact {
                let out = exact_text(&chars, ops.iter()).map_err(|(_, r)| r)?;
                *field = Some(out.into_iter().collect());
                Ok(true)
            } else {
                let (out, _, dropped) = fuzzy_text(chars, ops.iter());
                *field = Some(out.into_iter().collect());
                Ok(dropped == 0)
            }
        }
    }
}

fn apply_changes(entry: &mut AnnotationEntry, changes: &[FieldChange], exact: bool) -> Result<bool, &'static str> {
    let mut clean = true;
    for change in changes {
        match change {
            FieldChange::Author(c) => clean &= apply_text_field(&mut entry.author, c, exact)?,
            FieldChange::Text(c) => clean &= apply_text_field(&mut entry.text, c, exact)?,
            FieldChange::Color(c) => entry.color = *c,
            FieldChange::Kind(k) => entry.kind = *k,
            FieldChange::Position(p) => entry.position = *p,
        }
    }
    Ok(clean)
}

fn exact_annotations(map: &mut Annotations, ops: &[&AnnotationOp]) -> Result<(), Divergence> {
    for (i, op) in ops.iter().enumerate() {
        match op {
            AnnotationOp::PutEntry { id, entry } => {
                if map.insert(id.clone(), entry.clone()).is_some() {
                    return Err((i, "put of an existing entry"));
                }
            }
            AnnotationOp::RemoveEntry { id } => {
                if map.remove(id).is_none() {
                    return Err((i, "remove of a missing entry"));
                }
            }
            AnnotationOp::FieldDiff { id, changes } => {
                let entry = map.get_mut(id).ok_or((i, "field diff on a missing entry"))?;
                apply_changes(entry, changes, true).map_err(|r| (i, r))?;
            }
        }
    }
    Ok(())
}

fn fuzzy_annotations(map: &mut Annotations, ops: &[&AnnotationOp]) -> (usize, usize) {
    let (mut applied, mut dropped) = (0, 0);
    for op in ops {
        match op {
            AnnotationOp::PutEntry { id, entry } => {
                map.insert(id.clone(), entry.clone());
                applied += 1;
            }
            AnnotationOp::RemoveEntry { id } => {
                map.remove(id);
                applied += 1;
            }
            AnnotationOp::FieldDiff { id, changes } => match map.get_mut(id) {
                Some(entry) => {
                    if apply_changes(entry, changes, false).unwrap_or(false) {
                        applied += 1;
                    } else {
                        dropped += 1;
                    }
                }
                None => dropped += 1,
            },
        }
    }
    (applied, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{diff, CONTEXT_LEN};
    use alloc::string::ToString;
    use alloc::vec;

    fn txt(s: &str) -> Content {
        Content::text(s)
    }

    /// Every offset in the window with its fit, scanned independently of `relocate`.
    fn scan(text: &str, expected: usize, before: &str, after: &str) -> Vec<(usize, bool, bool)> {
        let t: Vec<char> = text.chars().collect();
        let mut v = Vec::new();
        for loc in expected.saturating_sub(FUZZY_WINDOW)..=(expected + FUZZY_WINDOW).min(t.len()) {
            let left: String = t[..loc].iter().collect();
            let right: String = t[loc..].iter().collect();
            v.push((loc, left.ends_with(before), right.starts_with(after)));
        }
        v
    }

    #[test]
    fn round_trip_exact() {
        let pairs = [("", "abc"), ("abc", ""), ("kitten", "sitting"), ("AB", "A12B"), ("cat", "bad")];
        for (a, b) in pairs {
            let s = diff(&txt(a), &txt(b)).unwrap();
            let out = patch(&txt(a), &s, PatchMode::Exact).unwrap();
            assert_eq!(out.content, txt(b));
            assert_eq!((out.applied, out.dropped), (s.len(), 0));
        }
    }

    #[test]
    fn empty_script_is_identity() {
        let out = patch(&txt("xyz"), &EditScript::empty(), PatchMode::Exact).unwrap();
        assert_eq!(out.content, txt("xyz"));
    }

    #[test]
    fn insert_relocates_onto_drifted_text() {
        let script = diff(&txt("AB"), &txt("A12B")).unwrap();
        // the reference scanner sees "A" before offset 1 and "B" after offset 2
        let hits = scan("AzB", 1, "A", "B");
        assert_eq!(hits, vec![(0, false, false), (1, true, false), (2, false, true), (3, false, false)]);
        // both are partial fits, offset 1 is nearest to the recorded offset
        let out = patch(&txt("AzB"), &script, PatchMode::Fuzzy).unwrap();
        assert_eq!(out.content, txt("A12zB"));
        assert_eq!(out.dropped, 0);
        assert_eq!(out.applied, script.len());
    }

    #[test]
    fn delete_without_context_match_is_dropped() {
        let script = EditScript::text(
            vec![TextOp::Delete { len: 1, before: "ca".to_string(), after: String::new() }],
            1,
        );
        assert!(scan("XY", 0, "ca", "").iter().all(|&(_, b, _)| !b));
        let out = patch(&txt("XY"), &script, PatchMode::Fuzzy).unwrap();
        assert_eq!((out.content, out.applied, out.dropped), (txt("XY"), 0, 1));
    }

    #[test]
    fn exact_mismatch_is_divergence() {
        let script = diff(&txt("cat"), &txt("ca")).unwrap();
        let err = patch(&txt("dog"), &script, PatchMode::Exact).unwrap_err();
        assert!(matches!(err, DiffError::ShadowDivergence { .. }));
        let err = patch(&txt("cats"), &script, PatchMode::Exact).unwrap_err();
        assert!(matches!(err, DiffError::ShadowDivergence { .. }));
    }

    #[test]
    fn fuzzy_follows_shifted_text() {
        let base = "the quick brown fox jumps over the lazy dog";
        let target = "the quick red fox jumps over the lazy dog";
        let s = diff(&txt(base), &txt(target)).unwrap();
        let drifted = "PREFIX: the quick brown fox jumps over the lazy dog";
        let out = patch(&txt(drifted), &s, PatchMode::Fuzzy).unwrap();
        assert_eq!(out.content, txt("PREFIX: the quick red fox jumps over the lazy dog"));
        assert_eq!(out.dropped, 0);
    }

    #[test]
    fn context_is_bounded() {
        let s = diff(&txt("0123456789abcdefghij"), &txt("0123456789Xabcdefghij")).unwrap();
        for op in &s.ops {
            if let EditOp::Text(TextOp::Insert { before, after, .. }) = op {
                assert_eq!(before.chars().count(), CONTEXT_LEN);
                assert_eq!(after.chars().count(), CONTEXT_LEN);
            }
        }
    }

    #[test]
    fn variant_mismatch() {
        let s = diff(&txt("a"), &txt("b")).unwrap();
        let err = patch(&Content::Annotations(Annotations::new()), &s, PatchMode::Fuzzy).unwrap_err();
        assert!(matches!(err, DiffError::VariantMismatch { .. }));
    }
}
