use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Why a link pair is (or is not) excluded from collision checking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AcmReason {
    Adjacent,
    Never,
    Always,
    Default,
    User,
}

impl AcmReason {
    pub const ALL: [AcmReason; 5] = [
        AcmReason::Adjacent,
        AcmReason::Never,
        AcmReason::Always,
        AcmReason::Default,
        AcmReason::User,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AcmReason::Adjacent => "Adjacent",
            AcmReason::Never => "Never",
            AcmReason::Always => "Always",
            AcmReason::Default => "Default",
            AcmReason::User => "User",
        }
    }

    pub fn parse(s: &str) -> Option<AcmReason> {
        AcmReason::ALL.into_iter().find(|r| r.as_str() == s)
    }

    /// Reasons derived from sampling carry their sample statistics.
    pub fn requires_stats(&self) -> bool {
        matches!(self, AcmReason::Never | AcmReason::Always | AcmReason::Default)
    }
}

impl fmt::Display for AcmReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStats {
    pub samples: u64,
    pub collisions: u64,
}

/// Unordered pair of link (or object) names, stored with the smaller name first.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkPair(String, String);

impl LinkPair {
    pub fn new(a: impl Into<String>, b: impl Into<String>) -> LinkPair {
        let (a, b) = (a.into(), b.into());
        if a <= b {
            LinkPair(a, b)
        } else {
            LinkPair(b, a)
        }
    }

    pub fn first(&self) -> &str {
        &self.0
    }

    pub fn second(&self) -> &str {
        &self.1
    }
}

impl fmt::Display for LinkPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}, {}}}", self.0, self.1)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcmEntry {
    pub disabled: bool,
    pub reason: AcmReason,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stats: Option<PairStats>,
}

#[derive(Debug, Error, PartialEq)]
pub enum AcmError {
    #[error("pair {0}: reason {1} requires sample statistics")]
    MissingStats(LinkPair, AcmReason),
    #[error("a link cannot be paired with itself (`{0}`)")]
    SelfPair(String),
}

/// Per-pair collision-checking switches. Pairs without an entry are checked.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AllowedCollisionMatrix {
    entries: BTreeMap<LinkPair, AcmEntry>,
}

impl AllowedCollisionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, a: &str, b: &str, entry: AcmEntry) -> Result<(), AcmError> {
        if a == b {
            return Err(AcmError::SelfPair(a.to_string()));
        }
        let pair = LinkPair::new(a, b);
        if entry.reason.requires_stats() && entry.stats.is_none() {
            return Err(AcmError::MissingStats(pair, entry.reason));
        }
        self.entries.insert(pair, entry);
        Ok(())
    }

    /// Convenience for user edits: disables a pair with reason `User`.
    pub fn disable(&mut self, a: &str, b: &str) -> Result<(), AcmError> {
        self.set(
            a,
            b,
            AcmEntry {
                disabled: true,
                reason: AcmReason::User,
                stats: None,
            },
        )
    }

    pub fn remove(&mut self, a: &str, b: &str) -> Option<AcmEntry> {
        self.entries.remove(&LinkPair::new(a, b))
    }

    pub fn get(&self, a: &str, b: &str) -> Option<&AcmEntry> {
        self.entries.get(&LinkPair::new(a, b))
    }

    pub fn is_disabled(&self, a: &str, b: &str) -> bool {
        self.get(a, b).is_some_and(|e| e.disabled)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LinkPair, &AcmEntry)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn disabled_count(&self) -> usize {
        self.entries.values().filter(|e| e.disabled).count()
    }
}

#[derive(Serialize, Deserialize)]
struct EntryRepr {
    link1: String,
    link2: String,
    disabled: bool,
    reason: AcmReason,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    stats: Option<PairStats>,
}

impl Serialize for AllowedCollisionMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let list: Vec<EntryRepr> = self
            .entries
            .iter()
            .map(|(p, e)| EntryRepr {
                link1: p.0.clone(),
                link2: p.1.clone(),
                disabled: e.disabled,
                reason: e.reason,
                stats: e.stats,
            })
            .collect();
        list.serialize(s)
    }
}

impl<'de> Deserialize<'de> for AllowedCollisionMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let list = Vec::<EntryRepr>::deserialize(d)?;
        let mut acm = AllowedCollisionMatrix::new();
        for e in list {
            acm.set(
                &e.link1,
                &e.link2,
                AcmEntry {
                    disabled: e.disabled,
                    reason: e.reason,
                    stats: e.stats,
                },
            )
            .map_err(D::Error::custom)?;
        }
        Ok(acm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_are_unordered() {
        let mut acm = AllowedCollisionMatrix::new();
        acm.disable("b", "a").unwrap();
        assert!(acm.is_disabled("a", "b"));
        assert!(acm.is_disabled("b", "a"));
        assert!(!acm.is_disabled("a", "c"));
        assert_eq!(acm.iter().next().unwrap().0.first(), "a");
    }

    #[test]
    fn sampled_reasons_need_stats() {
        let mut acm = AllowedCollisionMatrix::new();
        let e = AcmEntry {
            disabled: true,
            reason: AcmReason::Never,
            stats: None,
        };
        assert!(matches!(acm.set("a", "b", e), Err(AcmError::MissingStats(..))));
        assert!(acm.disable("a", "a").is_err());
    }

    #[test]
    fn json_round_trip() {
        let mut acm = AllowedCollisionMatrix::new();
        acm.set(
            "x",
            "w",
            AcmEntry {
                disabled: true,
                reason: AcmReason::Always,
                stats: Some(PairStats { samples: 10, collisions: 10 }),
            },
        )
        .unwrap();
        acm.disable("a", "b").unwrap();
        let j = serde_json::to_string(&acm).unwrap();
        assert!(j.starts_with(r#"[{"link1":"a","link2":"b""#));
        let back: AllowedCollisionMatrix = serde_json::from_str(&j).unwrap();
        assert_eq!(back, acm);
    }
}
