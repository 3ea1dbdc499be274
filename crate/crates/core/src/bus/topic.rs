use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::BusError;

/// A hierarchical topic name such as `/flux/skills/o2/std` or `o2/std`.
///
/// Canonical form: at least one segment, no empty segments, no `/` inside a
/// segment. Repeated or trailing slashes are dropped on parse.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TopicPath {
    absolute: bool,
    segments: Vec<String>,
}

impl TopicPath {
    pub fn parse(s: &str) -> Result<Self, BusError> {
        let absolute = s.starts_with('/');
        let segments: Vec<String> = s.split('/').filter(|seg| !seg.is_empty()).map(str::to_string).collect();
        if segments.is_empty() {
            return Err(BusError::EmptyTopic(s.to_string()));
        }
        if let Some(bad) = segments.iter().find(|seg| *seg == "*" || *seg == "**") {
            return Err(BusError::WildcardInTopic(format!("{s} ({bad})")));
        }
        Ok(TopicPath { absolute, segments })
    }

    pub fn is_absolute(&self) -> bool {
        self.absolute
    }

    pub fn segments(&self) -> &[String] {
        &self.segments
    }

    /// `namespace ++ self` for a relative path.
    pub fn resolve_against(&self, namespace: &TopicPath) -> Result<TopicPath, BusError> {
        if self.absolute {
            return Err(BusError::AlreadyAbsolute(self.to_string()));
        }
        let mut segments = namespace.segments.clone();
        segments.extend(self.segments.iter().cloned());
        Ok(TopicPath { absolute: namespace.absolute, segments })
    }

    pub fn join(&self, relative: &str) -> Result<TopicPath, BusError> {
        TopicPath::parse(relative)?.resolve_against(self)
    }

    pub fn starts_with(&self, prefix: &TopicPath) -> bool {
        self.absolute == prefix.absolute && self.segments.starts_with(&prefix.segments)
    }
}

impl fmt::Display for TopicPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.absolute {
            f.write_str("/")?;
        }
        f.write_str(&self.segments.join("/"))
    }
}

impl FromStr for TopicPath {
    type Err = BusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TopicPath::parse(s)
    }
}

impl Serialize for TopicPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TopicPath {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TopicPath::parse(&s).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PatternSegment {
    Literal(String),
    /// `*`: exactly one segment.
    One,
    /// `**`: one or more trailing segments.
    Rest,
}

/// A topic filter with `*` and trailing `**` wildcards.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TopicPattern {
    absolute: bool,
    segments: Vec<PatternSegment>,
}

impl TopicPattern {
    pub fn parse(s: &str) -> Result<Self, BusError> {
        let absolute = s.starts_with('/');
        let raw: Vec<&str> = s.split('/').filter(|seg| !seg.is_empty()).collect();
        if raw.is_empty() {
            return Err(BusError::MalformedPattern(s.to_string()));
        }
        let mut segments = Vec::with_capacity(raw.len());
        for (i, seg) in raw.iter().enumerate() {
            segments.push(match *seg {
                "*" => PatternSegment::One,
                "**" if i + 1 == raw.len() => PatternSegment::Rest,
                "**" => return Err(BusError::MalformedPattern(s.to_string())),
                lit if lit.contains('*') => return Err(BusError::MalformedPattern(s.to_string())),
                lit => PatternSegment::Literal(lit.to_string()),
            });
        }
        Ok(TopicPattern { absolute, segments })
    }

    pub fn is_absolute(&self) -> bool {
        self.absolute
    }

    pub fn segments(&self) -> &[PatternSegment] {
        &self.segments
    }

    pub fn resolve_against(&self, namespace: &TopicPath) -> Result<TopicPattern, BusError> {
        if self.absolute {
            return Err(BusError::AlreadyAbsolute(self.to_string()));
        }
        let mut segments: Vec<PatternSegment> =
            namespace.segments().iter().cloned().map(PatternSegment::Literal).collect();
        segments.extend(self.segments.iter().cloned());
        Ok(TopicPattern { absolute: namespace.is_absolute(), segments })
    }

    /// Resolves relative patterns; absolute ones pass through.
    pub fn anchored(&self, namespace: &TopicPath) -> TopicPattern {
        if self.absolute {
            self.clone()
        } else {
            self.resolve_against(namespace).expect("relative")
        }
    }

    pub fn matches(&self, topic: &TopicPath) -> bool {
        match_pattern(self, topic)
    }
}

impl From<&TopicPath> for TopicPattern {
    fn from(path: &TopicPath) -> Self {
        TopicPattern {
            absolute: path.is_absolute(),
            segments: path.segments().iter().cloned().map(PatternSegment::Literal).collect(),
        }
    }
}

impl fmt::Display for TopicPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.absolute {
            f.write_str("/")?;
        }
        for (i, seg) in self.segments.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            match seg {
                PatternSegment::Literal(s) => f.write_str(s)?,
                PatternSegment::One => f.write_str("*")?,
                PatternSegment::Rest => f.write_str("**")?,
            }
        }
        Ok(())
    }
}

impl FromStr for TopicPattern {
    type Err = BusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TopicPattern::parse(s)
    }
}

impl Serialize for TopicPattern {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TopicPattern {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        TopicPattern::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Case-sensitive segment alignment. A relative pattern never matches an
/// absolute topic and vice versa.
pub fn match_pattern(pattern: &TopicPattern, topic: &TopicPath) -> bool {
    if pattern.absolute != topic.absolute {
        return false;
    }
    let (pat, top) = (&pattern.segments, &topic.segments);
    for (i, seg) in pat.iter().enumerate() {
        match seg {
            PatternSegment::Rest => return top.len() > i,
            PatternSegment::One => {
                if i >= top.len() {
                    return false;
                }
            }
            PatternSegment::Literal(lit) => {
                if top.get(i) != Some(lit) {
                    return false;
                }
            }
        }
    }
    pat.len() == top.len()
}
