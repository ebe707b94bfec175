//! Session-independent identifiers for actionable UI components.
//!
//! A component is named by the path from the application window down to the
//! component itself. Every segment carries the widget kind, an optional label
//! (the text the widget shows) and a sibling index that separates widgets of
//! the same `(kind, label)` class under one parent.
//!
//! Textual form: `kind[label]#index` segments joined by `/`, e.g.
//! `window[main]#0/list[feed]#0/button[Like]#2`. Inside labels the characters
//! `/ [ ] #` and the backslash itself are escaped with a backslash.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Widget kind every component path must start with.
pub const ROOT_KIND: &str = "window";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("component id has no segments")]
    Empty,
    #[error("first segment `{segment}` is not a `window`")]
    RootNotWindow { segment: String },
    #[error("malformed segment `{segment}`: {reason}")]
    Malformed { segment: String, reason: &'static str },
    #[error("segment `{segment}` is missing its `#index`")]
    MissingIndex { segment: String },
    #[error("segment `{segment}` has a non-integer index")]
    BadIndex { segment: String },
}

/// One level of a component path.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Segment {
    pub kind: String,
    pub label: Option<String>,
    pub index: u32,
}

impl Segment {
    pub fn new(kind: impl Into<String>, label: Option<&str>, index: u32) -> Self {
        Self {
            kind: kind.into(),
            label: label.map(ToString::to_string),
            index,
        }
    }

    fn write_to(&self, out: &mut String) {
        out.push_str(&self.kind);
        if let Some(label) = &self.label {
            out.push('[');
            for ch in label.chars() {
                if matches!(ch, '/' | '[' | ']' | '#' | '\\') {
                    out.push('\\');
                }
                out.push(ch);
            }
            out.push(']');
        }
        out.push('#');
        // u32 Display never fails into a String
        let _ = fmt::write(out, format_args!("{}", self.index));
    }
}

fn valid_kind(kind: &str) -> bool {
    !kind.is_empty() && kind.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

/// Layout path of an actionable component, rooted at the application window.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ComponentId {
    segments: Vec<Segment>,
}

impl ComponentId {
    pub fn new(segments: Vec<Segment>) -> Result<Self, IdError> {
        let Some(first) = segments.first() else {
            return Err(IdError::Empty);
        };
        if first.kind != ROOT_KIND {
            let mut text = String::new();
            first.write_to(&mut text);
            return Err(IdError::RootNotWindow { segment: text });
        }
        for seg in &segments {
            if !valid_kind(&seg.kind) {
                let mut text = String::new();
                seg.write_to(&mut text);
                return Err(IdError::Malformed {
                    segment: text,
                    reason: "widget kind must be non-empty [A-Za-z0-9_-]",
                });
            }
        }
        Ok(Self { segments })
    }

    /// `window[label]#0`.
    pub fn root(label: &str) -> Self {
        Self {
            segments: alloc::vec![Segment::new(ROOT_KIND, Some(label), 0)],
        }
    }

    pub fn child(&self, kind: &str, label: Option<&str>, index: u32) -> Self {
        debug_assert!(valid_kind(kind));
        let mut segments = self.segments.clone();
        segments.push(Segment::new(kind, label, index));
        Self { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn leaf(&self) -> &Segment {
        // non-empty by construction
        &self.segments[self.segments.len() - 1]
    }

    pub fn starts_with(&self, prefix: &ComponentId) -> bool {
        self.segments.starts_with(&prefix.segments)
    }

    pub fn encode(&self) -> String {
        let mut out = String::new();
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                out.push('/');
            }
            seg.write_to(&mut out);
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, IdError> {
        parse_component_id(text)
    }
}

/// Encodes a raw segment path, validating the path invariants first.
pub fn encode_component_id(path: &[Segment]) -> Result<String, IdError> {
    Ok(ComponentId::new(path.to_vec())?.encode())
}

/// Splits on `/` that is not escaped, keeping escapes intact.
fn split_segments(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut start = 0;
    let mut escaped = false;
    for (i, ch) in text.char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        match ch {
            '\\' => escaped = true,
            '/' => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

fn parse_segment(raw: &str) -> Result<Segment, IdError> {
    let malformed = |reason| IdError::Malformed {
        segment: raw.to_string(),
        reason,
    };
    let kind_end = raw.find(['[', '#']).unwrap_or(raw.len());
    let kind = &raw[..kind_end];
    if !valid_kind(kind) {
        return Err(malformed("widget kind must be non-empty [A-Za-z0-9_-]"));
    }
    let mut rest = &raw[kind_end..];

    let mut label = None;
    if let Some(after_open) = rest.strip_prefix('[') {
        let mut text = String::new();
        let mut escaped = false;
        let mut close = None;
        for (i, ch) in after_open.char_indices() {
            if escaped {
                text.push(ch);
                escaped = false;
                continue;
            }
            match ch {
                '\\' => escaped = true,
                ']' => {
                    close = Some(i);
                    break;
                }
                '/' | '[' | '#' => return Err(malformed("unescaped special character in label")),
                _ => text.push(ch),
            }
        }
        let Some(close) = close else {
            return Err(malformed("unterminated label"));
        };
        label = Some(text);
        rest = &after_open[close + 1..];
    }

    let Some(digits) = rest.strip_prefix('#') else {
        if rest.is_empty() {
            return Err(IdError::MissingIndex {
                segment: raw.to_string(),
            });
        }
        return Err(malformed("unexpected text after label"));
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(IdError::BadIndex {
            segment: raw.to_string(),
        });
    }
    let index = digits.parse().map_err(|_| IdError::BadIndex {
        segment: raw.to_string(),
    })?;
    Ok(Segment {
        kind: kind.to_string(),
        label,
        index,
    })
}

pub fn parse_component_id(text: &str) -> Result<ComponentId, IdError> {
    if text.is_empty() {
        return Err(IdError::Empty);
    }
    let segments = split_segments(text)
        .into_iter()
        .map(parse_segment)
        .collect::<Result<Vec<_>, _>>()?;
    ComponentId::new(segments)
}

impl fmt::Display for ComponentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl FromStr for ComponentId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_component_id(s)
    }
}

impl Serialize for ComponentId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.encode())
    }
}

impl<'de> Deserialize<'de> for ComponentId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_component_id(&text).map_err(serde::de::Error::custom)
    }
}
