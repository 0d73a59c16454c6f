//! Identifiers for one balancing × tuning × method combination.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cfgen::Method;
use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Balancing {
    Original,
    Undersampling,
    Oversampling,
    Smote,
    CostSensitive,
}

impl Balancing {
    /// Column order of the count table.
    pub const ALL: [Balancing; 5] = [
        Balancing::Original,
        Balancing::Undersampling,
        Balancing::Oversampling,
        Balancing::Smote,
        Balancing::CostSensitive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Balancing::Original => "original",
            Balancing::Undersampling => "undersampling",
            Balancing::Oversampling => "oversampling",
            Balancing::Smote => "smote",
            Balancing::CostSensitive => "cost_sensitive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tuning {
    Vanilla,
    Tuned,
}

impl Tuning {
    pub const ALL: [Tuning; 2] = [Tuning::Vanilla, Tuning::Tuned];

    pub fn as_str(self) -> &'static str {
        match self {
            Tuning::Vanilla => "vanilla",
            Tuning::Tuned => "tuned",
        }
    }
}

macro_rules! text_enum {
    ($ty:ty, $what:literal) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                <$ty>::ALL
                    .into_iter()
                    .find(|v| v.as_str() == s)
                    .ok_or_else(|| format!(concat!("unknown ", $what, " {:?}"), s))
            }
        }
    };
}

text_enum!(Balancing, "balancing strategy");
text_enum!(Tuning, "tuning mode");

/// One trained model: balancing strategy plus tuning mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelId {
    pub balancing: Balancing,
    pub tuning: Tuning,
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.balancing, self.tuning)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub balancing: Balancing,
    pub tuning: Tuning,
    pub method: Method,
}

impl CellId {
    pub fn new(balancing: Balancing, tuning: Tuning, method: Method) -> Self {
        CellId {
            balancing,
            tuning,
            method,
        }
    }

    pub fn model(&self) -> ModelId {
        ModelId {
            balancing: self.balancing,
            tuning: self.tuning,
        }
    }

    /// File-system friendly name, e.g. `smote_tuned_nice_sp`.
    pub fn slug(&self) -> String {
        format!("{}_{}_{}", self.balancing, self.tuning, self.method)
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.balancing, self.tuning, self.method)
    }
}

impl FromStr for CellId {
    type Err = Error;

    /// Parses `<balancing>:<tuning>:<method>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [b, t, m] = parts.as_slice() else {
            return Err(Error::InvalidArgument(format!(
                "cell must look like <balancing>:<tuning>:<method>, got {s:?}"
            )));
        };
        Ok(CellId {
            balancing: b.parse().map_err(Error::InvalidArgument)?,
            tuning: t.parse().map_err(Error::InvalidArgument)?,
            method: m.parse().map_err(Error::InvalidArgument)?,
        })
    }
}
