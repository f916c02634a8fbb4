//! Semantic diff and patch for text sequences and annotation dictionaries.
//!
//! [`diff`] produces an [`EditScript`] whose `work_units` records the search
//! effort, the input to the CPU energy model. [`patch`] applies a script in
//! one of two modes:
//!
//! * [`PatchMode::Exact`]: every op must match at its recorded position and
//!   context, or the whole patch fails with [`DiffError::ShadowDivergence`].
//!   Used on shadows, where a mismatch means the protocol is broken.
//! * [`PatchMode::Fuzzy`]: text ops are relocated by context within
//!   ±[`FUZZY_WINDOW`] scalars; ops that find no home are dropped and
//!   counted. Used on items, which may have drifted.

mod content;
mod myers;
mod patch;
mod script;
pub mod wire;

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

pub use content::{
    AnnotationEntry, AnnotationId, AnnotationKind, Annotations, Color, Content, ContentKind,
    Decimal6, InvalidAnnotationId, Position,
};
pub use patch::{patch, PatchMode, PatchOutcome};
pub use script::{
    AnnotationOp, EditOp, EditScript, FieldChange, TextChange, TextOp, CONTEXT_LEN, FUZZY_WINDOW,
};

use myers::Hunk;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiffError {
    #[error("content variant mismatch: expected {expected}, found {found}")]
    VariantMismatch {
        expected: ContentKind,
        found: ContentKind,
    },
    #[error("shadow divergence at op {op_index}: {reason}")]
    ShadowDivergence { op_index: usize, reason: &'static str },
}

/// Computes the edits turning `base` into `target`.
pub fn diff(base: &Content, target: &Content) -> Result<EditScript, DiffError> {
    match (base, target) {
        (Content::Text(a), Content::Text(b)) => {
            let (ops, work) = diff_text(a, b);
            Ok(EditScript::text(ops, work))
        }
        (Content::Annotations(a), Content::Annotations(b)) => {
            let (ops, work) = diff_annotations(a, b);
            Ok(EditScript::annotations(ops, work))
        }
        _ => Err(DiffError::VariantMismatch {
            expected: base.kind(),
            found: target.kind(),
        }),
    }
}

fn tail(s: &[char], n: usize) -> String {
    s[s.len().saturating_sub(n)..].iter().collect()
}

fn head(s: &[char], n: usize) -> String {
    s[..n.min(s.len())].iter().collect()
}

/// Text diff as ops plus work units. Identical inputs give no ops.
pub fn diff_text(base: &str, target: &str) -> (Vec<TextOp>, u64) {
    if base == target {
        return (Vec::new(), 0);
    }
    let a: Vec<char> = base.chars().collect();
    let b: Vec<char> = target.chars().collect();
    let (hunks, work) = myers::diff_slices(&a, &b);

    let mut ops = Vec::new();
    // target prefix emitted so far, tracked by position only
    let mut out_len = 0usize;
    let mut base_pos = 0usize;
    let mut i = 0;
    while i < hunks.len() {
        if let Hunk::Equal(n) = hunks[i] {
            ops.push(TextOp::Retain { len: n });
            base_pos += n;
            out_len += n;
            i += 1;
            continue;
        }
        // Between two equal runs all deletions are contiguous in the base
        // and all insertions contiguous in the target.
        let mut del = 0;
        let mut ins: Option<(usize, usize)> = None;
        while i < hunks.len() {
            match hunks[i] {
                Hunk::Equal(_) => break,
                Hunk::Delete(n) => del += n,
                Hunk::Insert(s, e) => {
                    ins = Some(match ins {
                        Some((s0, _)) => (s0, e),
                        None => (s, e),
                    })
                }
            }
            i += 1;
        }
        if del > 0 {
            ops.push(TextOp::Delete {
                len: del,
                before: tail(&b[..out_len], CONTEXT_LEN),
                after: head(&a[base_pos + del..], CONTEXT_LEN),
            });
            base_pos += del;
        }
        if let Some((s, e)) = ins {
            ops.push(TextOp::Insert {
                text: b[s..e].iter().collect(),
                before: tail(&b[..out_len], CONTEXT_LEN),
                after: head(&a[base_pos..], CONTEXT_LEN),
            });
            out_len += e - s;
        }
    }
    (ops, work)
}

fn diff_text_field(base: &Option<String>, target: &Option<String>) -> Option<(TextChange, u64)> {
    match (base, target) {
        (Some(a), Some(b)) if a == b => None,
        (Some(a), Some(b)) => {
            let (ops, work) = diff_text(a, b);
            Some((TextChange::Edit(ops), work))
        }
        (None, None) => None,
        _ => Some((TextChange::Set(target.clone()), 0)),
    }
}

fn diff_entry(base: &AnnotationEntry, target: &AnnotationEntry) -> (Vec<FieldChange>, u64) {
    let mut changes = Vec::new();
    let mut work = 0;
    if let Some((c, w)) = diff_text_field(&base.author, &target.author) {
        changes.push(FieldChange::Author(c));
        work += w;
    }
    if base.color != target.color {
        changes.push(FieldChange::Color(target.color));
    }
    if base.kind != target.kind {
        changes.push(FieldChange::Kind(target.kind));
    }
    if base.position != target.position {
        changes.push(FieldChange::Position(target.position));
    }
    if let Some((c, w)) = diff_text_field(&base.text, &target.text) {
        changes.push(FieldChange::Text(c));
        work += w;
    }
    (changes, work)
}

/// Annotation diff: one unit per added, removed or changed entry plus the
/// text work of changed fields. Unchanged entries are free.
pub fn diff_annotations(base: &Annotations, target: &Annotations) -> (Vec<AnnotationOp>, u64) {
    let mut ops = Vec::new();
    let mut work = 0u64;
    let mut a = base.iter().peekable();
    let mut b = target.iter().peekable();
    loop {
        let order = match (a.peek(), b.peek()) {
            (None, None) => break,
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (Some((ka, _)), Some((kb, _))) => ka.cmp(kb),
        };
        match order {
            Ordering::Less => {
                work += 1;
                let (id, _) = a.next().expect("peeked");
                ops.push(AnnotationOp::RemoveEntry { id: id.clone() });
            }
            Ordering::Greater => {
                work += 1;
                let (id, entry) = b.next().expect("peeked");
                ops.push(AnnotationOp::PutEntry {
                    id: id.clone(),
                    entry: entry.clone(),
                });
            }
            Ordering::Equal => {
                let (id, ea) = a.next().expect("peeked");
                let (_, eb) = b.next().expect("peeked");
                if ea != eb {
                    let (changes, w) = diff_entry(ea, eb);
                    work += 1 + w;
                    ops.push(AnnotationOp::FieldDiff {
                        id: id.clone(),
                        changes,
                    });
                }
            }
        }
    }
    (ops, work)
}

/// Canonical serialized size in bytes: UTF-8 for text, canonical JSON for annotations.
pub fn content_size(c: &Content) -> usize {
    match c {
        Content::Text(s) => s.len(),
        Content::Annotations(a) => wire::annotations_json(a).len(),
    }
}
