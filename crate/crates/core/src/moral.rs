use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The four fixed agent dispositions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoralType {
    Universal,
    Reciprocal,
    Kin,
    Selfish,
}

impl MoralType {
    pub const ALL: [MoralType; 4] = [
        MoralType::Universal,
        MoralType::Reciprocal,
        MoralType::Kin,
        MoralType::Selfish,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MoralType::Universal => "universal",
            MoralType::Reciprocal => "reciprocal",
            MoralType::Kin => "kin",
            MoralType::Selfish => "selfish",
        }
    }

    /// Position in [`MoralType::ALL`]; used as a row/column index.
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MoralType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown moral type `{0}` (expected universal, reciprocal, kin or selfish)")]
pub struct UnknownMoralType(pub String);

impl FromStr for MoralType {
    type Err = UnknownMoralType;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "universal" => Ok(MoralType::Universal),
            "reciprocal" => Ok(MoralType::Reciprocal),
            "kin" | "kin_focused" => Ok(MoralType::Kin),
            "selfish" | "reproductive_selfish" => Ok(MoralType::Selfish),
            other => Err(UnknownMoralType(other.to_string())),
        }
    }
}
