use std::fmt;

use serde::{Deserialize, Serialize};

/// Country label as supplied by configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeaceLabel {
    #[serde(alias = "higher")]
    HigherPeace,
    #[serde(alias = "lower")]
    LowerPeace,
    Intermediate,
}

impl PeaceLabel {
    pub fn class(self) -> Option<Class> {
        match self {
            PeaceLabel::HigherPeace => Some(Class::Higher),
            PeaceLabel::LowerPeace => Some(Class::Lower),
            PeaceLabel::Intermediate => None,
        }
    }
}

impl fmt::Display for PeaceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PeaceLabel::HigherPeace => "higher-peace",
            PeaceLabel::LowerPeace => "lower-peace",
            PeaceLabel::Intermediate => "intermediate",
        })
    }
}

/// Training class. `Higher` is the positive class (+1) for every metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Class {
    #[serde(alias = "higher")]
    Higher,
    #[serde(alias = "lower")]
    Lower,
}

impl Class {
    pub fn sign(self) -> f64 {
        match self {
            Class::Higher => 1.0,
            Class::Lower => -1.0,
        }
    }

    /// Maps a decision value to a class; zero goes to `Higher`.
    pub fn from_decision(value: f64) -> Class {
        if value >= 0.0 {
            Class::Higher
        } else {
            Class::Lower
        }
    }

    pub fn flipped(self) -> Class {
        match self {
            Class::Higher => Class::Lower,
            Class::Lower => Class::Higher,
        }
    }

    pub fn label(self) -> PeaceLabel {
        match self {
            Class::Higher => PeaceLabel::HigherPeace,
            Class::Lower => PeaceLabel::LowerPeace,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.label().fmt(f)
    }
}
