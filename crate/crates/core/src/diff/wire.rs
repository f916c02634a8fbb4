//! Canonical byte-exact JSON encoding of content, edit ops and packets.
//!
//! No whitespace; object keys in lexicographic order; optional fields
//! omitted when absent; strings escape only `"`, `\` and control characters
//! (non-ASCII is written as raw UTF-8). Ops are compact arrays tagged by a
//! one-letter code:
//!
//! | op            | encoding                              |
//! |---------------|---------------------------------------|
//! | Retain        | `["r",len]`                           |
//! | Insert        | `["i","text","before","after"]`       |
//! | Delete        | `["d",len,"before","after"]`          |
//! | PutEntry      | `["p","id",{entry}]`                  |
//! | RemoveEntry   | `["x","id"]`                          |
//! | FieldDiff     | `["f","id",{changes}]`                |
//!
//! A field change object maps field name to the new value; text fields map
//! to a JSON string / `null` (replace) or to an array of text ops (edit).

use alloc::string::String;
use core::fmt::Write;

use super::content::{AnnotationEntry, Annotations, Position};
use super::script::{AnnotationOp, EditOp, EditScript, FieldChange, TextChange, TextOp};

/// Fixed per-packet cost: envelope, transport and sync metadata.
pub const HEADER_BYTES: usize = 100;

pub fn write_str(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{08}' => out.push_str("\\b"),
            '\u{0c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn write_position(out: &mut String, p: &Position) {
    let _ = write!(out, "{{\"page\":{},\"rect\":[", p.page);
    for (i, r) in p.rect.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "\"{r}\"");
    }
    out.push_str("]}");
}

pub fn write_entry(out: &mut String, e: &AnnotationEntry) {
    out.push('{');
    if let Some(a) = &e.author {
        out.push_str("\"author\":");
        write_str(out, a);
        out.push(',');
    }
    let _ = write!(out, "\"color\":\"{}\",\"kind\":\"{}\",\"position\":", e.color, e.kind.as_str());
    write_position(out, &e.position);
    if let Some(t) = &e.text {
        out.push_str(",\"text\":");
        write_str(out, t);
    }
    out.push('}');
}

pub fn annotations_json(map: &Annotations) -> String {
    let mut out = String::from("{");
    for (i, (id, e)) in map.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_str(&mut out, id.as_str());
        out.push(':');
        write_entry(&mut out, e);
    }
    out.push('}');
    out
}

fn write_text_op(out: &mut String, op: &TextOp) {
    match op {
        TextOp::Retain { len } => {
            let _ = write!(out, "[\"r\",{len}]");
        }
        TextOp::Insert { text, before, after } => {
            out.push_str("[\"i\",");
            write_str(out, text);
            out.push(',');
            write_str(out, before);
            out.push(',');
            write_str(out, after);
            out.push(']');
        }
        TextOp::Delete { len, before, after } => {
            let _ = write!(out, "[\"d\",{len},");
            write_str(out, before);
            out.push(',');
            write_str(out, after);
            out.push(']');
        }
    }
}

fn write_text_change(out: &mut String, c: &TextChange) {
    match c {
        TextChange::Set(Some(s)) => write_str(out, s),
        TextChange::Set(None) => out.push_str("null"),
        TextChange::Edit(ops) => {
            out.push('[');
            for (i, op) in ops.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_text_op(out, op);
            }
            out.push(']');
        }
    }
}

fn write_annotation_op(out: &mut String, op: &AnnotationOp) {
    match op {
        AnnotationOp::PutEntry { id, entry } => {
            out.push_str("[\"p\",");
            write_str(out, id.as_str());
            out.push(',');
            write_entry(out, entry);
            out.push(']');
        }
        AnnotationOp::RemoveEntry { id } => {
            out.push_str("[\"x\",");
            write_str(out, id.as_str());
            out.push(']');
        }
        AnnotationOp::FieldDiff { id, changes } => {
            out.push_str("[\"f\",");
            write_str(out, id.as_str());
            out.push_str(",{");
            for (i, c) in changes.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                match c {
                    FieldChange::Author(t) => {
                        out.push_str("\"author\":");
                        write_text_change(out, t);
                    }
                    FieldChange::Color(c) => {
                        let _ = write!(out, "\"color\":\"{c}\"");
                    }
                    FieldChange::Kind(k) => {
                        let _ = write!(out, "\"kind\":\"{}\"", k.as_str());
                    }
                    FieldChange::Position(p) => {
                        out.push_str("\"position\":");
                        write_position(out, p);
                    }
                    FieldChange::Text(t) => {
                        out.push_str("\"text\":");
                        write_text_change(out, t);
                    }
                }
            }
            out.push_str("}]");
        }
    }
}

pub fn write_op(out: &mut String, op: &EditOp) {
    match op {
        EditOp::Text(t) => write_text_op(out, t),
        EditOp::Annotation(a) => write_annotation_op(out, a),
    }
}

/// The comma-joined ops as they appear inside the packet's `ops` array.
pub fn script_payload(script: &EditScript) -> String {
    let mut out = String::new();
    for (i, op) in script.ops.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        write_op(&mut out, op);
    }
    out
}

pub fn payload_bytes(script: &EditScript) -> usize {
    script_payload(script).len()
}

/// Bytes on the wire for a packet carrying `script`: header plus payload.
pub fn wire_bytes(script: &EditScript) -> usize {
    HEADER_BYTES + payload_bytes(script)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{AnnotationId, Color, Decimal6};
    use alloc::vec;

    #[test]
    fn escapes() {
        let mut s = String::new();
        write_str(&mut s, "a\"b\\c\nd\u{1}é");
        assert_eq!(s, "\"a\\\"b\\\\c\\nd\\u0001é\"");
    }

    #[test]
    fn text_ops_encode_compactly() {
        let script = EditScript::text(
            vec![
                TextOp::Retain { len: 2 },
                TextOp::Delete { len: 1, before: "ca".into(), after: String::new() },
                TextOp::Insert { text: "b".into(), before: "ca".into(), after: String::new() },
            ],
            3,
        );
        assert_eq!(script_payload(&script), r#"["r",2],["d",1,"ca",""],["i","b","ca",""]"#);
        assert_eq!(wire_bytes(&EditScript::empty()), 100);
    }

    #[test]
    fn field_diff_encoding() {
        let id = AnnotationId::parse("00000000-0000-4000-8000-000000000000").unwrap();
        let op = EditOp::Annotation(AnnotationOp::FieldDiff {
            id,
            changes: vec![FieldChange::Color(Color::new(0x00ff00))],
        });
        let mut s = String::new();
        write_op(&mut s, &op);
        assert_eq!(s, r##"["f","00000000-0000-4000-8000-000000000000",{"color":"#00FF00"}]"##);
        let _ = Decimal6::from_micros(0);
    }

    #[test]
    fn colour_change_packet_size() {
        let id = AnnotationId::parse("00000000-0000-4000-8000-000000000000").unwrap();
        let script = EditScript::annotations(
            vec![AnnotationOp::FieldDiff {
                id,
                changes: vec![FieldChange::Color(Color::new(0x00ff00))],
            }],
            1,
        );
        assert_eq!(wire_bytes(&script), 164);
    }
}
