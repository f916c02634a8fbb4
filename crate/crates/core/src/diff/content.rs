use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Stable identifier of one annotation: a lowercase hyphenated UUID.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AnnotationId(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid annotation id {0:?}: expected a 36-character lowercase UUID")]
pub struct InvalidAnnotationId(pub String);

impl AnnotationId {
    pub fn parse(s: &str) -> Result<Self, InvalidAnnotationId> {
        let ok = s.len() == 36
            && uuid::Uuid::try_parse(s).is_ok()
            && !s.bytes().any(|b| b.is_ascii_uppercase());
        if ok {
            Ok(Self(s.to_string()))
        } else {
            Err(InvalidAnnotationId(s.to_string()))
        }
    }

    /// Builds a version-4 id from 16 random bytes.
    pub fn from_random_bytes(bytes: [u8; 16]) -> Self {
        let id = uuid::Builder::from_random_bytes(bytes).into_uuid();
        let mut buf = uuid::Uuid::encode_buffer();
        Self(id.hyphenated().encode_lower(&mut buf).to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AnnotationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Serialize for AnnotationId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for AnnotationId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        AnnotationId::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    Highlight,
    Note,
}

impl AnnotationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AnnotationKind::Highlight => "highlight",
            AnnotationKind::Note => "note",
        }
    }
}

/// 24-bit RGB colour, written as `#RRGGBB`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Color(u32);

impl Color {
    pub const fn new(rgb: u32) -> Self {
        Self(rgb & 0x00ff_ffff)
    }

    pub fn rgb(self) -> u32 {
        self.0
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:06X}", self.0)
    }
}

impl FromStr for Color {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let hex = s.strip_prefix('#').ok_or("colour must start with '#'")?;
        if hex.len() != 6 {
            return Err("colour must have six hex digits");
        }
        u32::from_str_radix(hex, 16)
            .map(Color)
            .map_err(|_| "colour must have six hex digits")
    }
}

impl Serialize for Color {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Color {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Fixed-point rational with six fractional digits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decimal6(i64);

impl Decimal6 {
    pub const SCALE: i64 = 1_000_000;

    pub const fn from_micros(micros: i64) -> Self {
        Self(micros)
    }

    pub fn micros(self) -> i64 {
        self.0
    }
}

impl fmt::Display for Decimal6 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let int = abs / Self::SCALE as u64;
        let mut frac = abs % Self::SCALE as u64;
        if frac == 0 {
            return write!(f, "{sign}{int}");
        }
        let mut digits = 6;
        while frac.is_multiple_of(10) {
            frac /= 10;
            digits -= 1;
        }
        write!(f, "{sign}{int}.{frac:0digits$}")
    }
}

impl FromStr for Decimal6 {
    type Err = &'static str;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        const BAD: &str = "expected a decimal with at most six fractional digits";
        let (neg, body) = match s.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() || frac.len() > 6 || (body.contains('.') && frac.is_empty()) {
            return Err(BAD);
        }
        if !int.bytes().chain(frac.bytes()).all(|b| b.is_ascii_digit()) {
            return Err(BAD);
        }
        let int: i64 = int.parse().map_err(|_| BAD)?;
        let mut f: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| BAD)? };
        for _ in frac.len()..6 {
            f *= 10;
        }
        let v = int.checked_mul(Self::SCALE).and_then(|v| v.checked_add(f)).ok_or(BAD)?;
        Ok(Self(if neg { -v } else { v }))
    }
}

impl Serialize for Decimal6 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Decimal6 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Position {
    pub page: u32,
    pub rect: [Decimal6; 4],
}

/// One PDF annotation. Highlights never carry `text` or `author`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationEntry {
    pub kind: AnnotationKind,
    pub position: Position,
    pub color: Color,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
}

impl AnnotationEntry {
    pub fn highlight(position: Position, color: Color) -> Self {
        Self {
            kind: AnnotationKind::Highlight,
            position,
            color,
            text: None,
            author: None,
        }
    }

    pub fn note(position: Position, color: Color, text: String, author: Option<String>) -> Self {
        Self {
            kind: AnnotationKind::Note,
            position,
            color,
            text: Some(text),
            author,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.position.page >= 1
            && (self.kind == AnnotationKind::Note || (self.text.is_none() && self.author.is_none()))
    }
}

pub type Annotations = BTreeMap<AnnotationId, AnnotationEntry>;

/// Synchronised item state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Content {
    Text(String),
    Annotations(Annotations),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContentKind {
    Text,
    Annotations,
}

impl fmt::Display for ContentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContentKind::Text => "text",
            ContentKind::Annotations => "annotations",
        })
    }
}

impl Content {
    pub fn kind(&self) -> ContentKind {
        match self {
            Content::Text(_) => ContentKind::Text,
            Content::Annotations(_) => ContentKind::Annotations,
        }
    }

    pub fn text(s: &str) -> Self {
        Content::Text(s.to_string())
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Content::Text(s) => Some(s),
            Content::Annotations(_) => None,
        }
    }

    pub fn as_annotations(&self) -> Option<&Annotations> {
        match self {
            Content::Annotations(a) => Some(a),
            Content::Text(_) => None,
        }
    }
}
