//! Requirement identifiers shared by every pipeline stage.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// One of the ten governance requirements, or `Unmapped` for text units that
/// match no requirement cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RequirementId {
    R1,
    R2,
    R3,
    R4,
    R5,
    R6,
    R7,
    R8,
    R9,
    R10,
    Unmapped,
}

impl RequirementId {
    /// The ten mapped requirements in index order (excludes `Unmapped`).
    pub const ALL: [RequirementId; 10] = [
        RequirementId::R1,
        RequirementId::R2,
        RequirementId::R3,
        RequirementId::R4,
        RequirementId::R5,
        RequirementId::R6,
        RequirementId::R7,
        RequirementId::R8,
        RequirementId::R9,
        RequirementId::R10,
    ];

    /// 1-based requirement index; `None` for `Unmapped`.
    pub fn index(self) -> Option<usize> {
        match self {
            RequirementId::Unmapped => None,
            other => Some(other as usize + 1),
        }
    }

    /// Requirement for a 1-based index in `1..=10`.
    pub fn from_index(index: usize) -> Option<RequirementId> {
        RequirementId::ALL.get(index.wrapping_sub(1)).copied()
    }
}

impl fmt::Display for RequirementId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RequirementId::Unmapped => write!(f, "Unmapped"),
            other => write!(f, "R{}", other.index().unwrap_or(0)),
        }
    }
}

/// Error returned when parsing a requirement id from text.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unrecognized requirement id: {0:?}")]
pub struct ParseRequirementError(pub String);

impl FromStr for RequirementId {
    type Err = ParseRequirementError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("unmapped") {
            return Ok(RequirementId::Unmapped);
        }
        s.strip_prefix(['R', 'r'])
            .and_then(|n| n.parse::<usize>().ok())
            .and_then(RequirementId::from_index)
            .ok_or_else(|| ParseRequirementError(s.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for (i, r) in RequirementId::ALL.iter().enumerate() {
            assert_eq!(r.index(), Some(i + 1));
            assert_eq!(RequirementId::from_index(i + 1), Some(*r));
        }
        assert_eq!(RequirementId::Unmapped.index(), None);
        assert_eq!(RequirementId::from_index(0), None);
        assert_eq!(RequirementId::from_index(11), None);
    }

    #[test]
    fn parse_display_round_trip() {
        for r in RequirementId::ALL.iter().chain([RequirementId::Unmapped].iter()) {
            assert_eq!(r.to_string().parse::<RequirementId>().unwrap(), *r);
        }
        assert!("R11".parse::<RequirementId>().is_err());
        assert!("foo".parse::<RequirementId>().is_err());
    }

    #[test]
    fn ordering_follows_index() {
        assert!(RequirementId::R1 < RequirementId::R2);
        assert!(RequirementId::R9 < RequirementId::R10);
        assert!(RequirementId::R10 < RequirementId::Unmapped);
    }
}
