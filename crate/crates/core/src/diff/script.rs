use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::content::{AnnotationEntry, AnnotationId, AnnotationKind, Color, Position};

/// Scalars of context recorded on each side of a text edit.
pub const CONTEXT_LEN: usize = 8;

/// Fuzzy patching looks this many scalars either side of the expected offset.
pub const FUZZY_WINDOW: usize = 32;

/// Edit on a text sequence. Counts are in unicode scalars and always positive.
///
/// `before` holds up to [`CONTEXT_LEN`] scalars preceding the edit site as
/// the text looks once earlier ops of the same script are applied; `after`
/// holds the scalars following the site (following the deleted span, for a
/// delete) in the base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum TextOp {
    Retain {
        len: usize,
    },
    Insert {
        text: String,
        before: String,
        after: String,
    },
    Delete {
        len: usize,
        before: String,
        after: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum TextChange {
    /// Replace the whole field (used when either side is absent).
    Set(Option<String>),
    Edit(Vec<TextOp>),
}

/// One changed field of an existing annotation. Listed in field-name order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "field", content = "value", rename_all = "snake_case")]
pub enum FieldChange {
    Author(TextChange),
    Color(Color),
    Kind(AnnotationKind),
    Position(Position),
    Text(TextChange),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum AnnotationOp {
    PutEntry {
        id: AnnotationId,
        entry: AnnotationEntry,
    },
    RemoveEntry {
        id: AnnotationId,
    },
    FieldDiff {
        id: AnnotationId,
        changes: Vec<FieldChange>,
    },
}

impl AnnotationOp {
    pub fn id(&self) -> &AnnotationId {
        match self {
            AnnotationOp::PutEntry { id, .. }
            | AnnotationOp::RemoveEntry { id }
            | AnnotationOp::FieldDiff { id, .. } => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EditOp {
    Text(TextOp),
    Annotation(AnnotationOp),
}

/// Ordered edits turning a base into a target, plus the diff effort spent.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditScript {
    pub ops: Vec<EditOp>,
    pub work_units: u64,
}

impl EditScript {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn text(ops: Vec<TextOp>, work_units: u64) -> Self {
        Self {
            ops: ops.into_iter().map(EditOp::Text).collect(),
            work_units,
        }
    }

    pub fn annotations(ops: Vec<AnnotationOp>, work_units: u64) -> Self {
        Self {
            ops: ops.into_iter().map(EditOp::Annotation).collect(),
            work_units,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    /// Scalars inserted plus scalars deleted by the top-level text ops.
    pub fn edit_length(&self) -> usize {
        self.ops
            .iter()
            .map(|op| match op {
                EditOp::Text(TextOp::Insert { text, .. }) => text.chars().count(),
                EditOp::Text(TextOp::Delete { len, .. }) => *len,
                _ => 0,
            })
            .sum()
    }
}
