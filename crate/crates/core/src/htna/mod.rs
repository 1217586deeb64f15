//! Heterogeneous transition networks over student/AI interaction chains.
//!
//! Chains are built per chat, either at element granularity (every element
//! code of every turn, in coded order) or at type granularity (one state per
//! turn). A first-order Markov model is then fitted by maximum likelihood.

mod export;
mod network;
mod sequence;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codes::InteractionType;
use crate::corpus::{Actor, ElementCode};

pub use export::{export_comparison, export_network, import_network_json, ExportFormat};
pub use network::{
    fit_network, fit_network_with, threshold_edges, unit_contributions, Edge, NetworkView,
    Pooling, SufficientStats, TransitionNetwork, UnitContribution, UnitKind,
};
pub use sequence::{build_element_sequences, build_type_sequences, SequenceSet};

/// Edge threshold used for element-granularity network views.
pub const ELEMENT_EDGE_THRESHOLD: f64 = 0.4;
/// Edge threshold used for type-granularity network views.
pub const TYPE_EDGE_THRESHOLD: f64 = 0.3;

#[derive(Debug, Error, PartialEq)]
pub enum HtnaError {
    #[error("student filter matches no chats")]
    EmptySelection,
    #[error("sequence set is empty")]
    EmptySequenceSet,
    #[error("chain {chain} is empty")]
    EmptyChain { chain: usize },
    #[error("state `{0}` is not in the alphabet")]
    UnknownState(String),
    #[error("unknown export format `{0}` (expected dot or json)")]
    UnknownFormat(String),
    #[error("per-student averaging requires student permutation units")]
    PoolingNeedsStudentUnits,
    #[error("unsupported network schema version {0}")]
    SchemaVersion(u32),
    #[error("invalid network document: {0}")]
    InvalidDocument(String),
}

pub type Result<T> = std::result::Result<T, HtnaError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeClass {
    Student,
    Ai,
}

impl From<Actor> for NodeClass {
    fn from(a: Actor) -> Self {
        match a {
            Actor::Student => NodeClass::Student,
            Actor::Ai => NodeClass::Ai,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Element,
    Type,
}

impl Granularity {
    pub fn default_edge_threshold(self) -> f64 {
        match self {
            Granularity::Element => ELEMENT_EDGE_THRESHOLD,
            Granularity::Type => TYPE_EDGE_THRESHOLD,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Element => "element",
            Granularity::Type => "type",
        }
    }

    /// Canonical state alphabet for this granularity.
    pub fn alphabet(self) -> Alphabet {
        match self {
            Granularity::Element => Alphabet::new(
                ElementCode::ALL
                    .iter()
                    .map(|c| (c.name().to_string(), c.actor().into())),
            ),
            Granularity::Type => Alphabet::new(
                InteractionType::ALL
                    .iter()
                    .map(|t| (t.name().to_string(), t.actor().into())),
            ),
        }
    }
}

impl fmt::Display for Granularity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Granularity {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "element" | "elements" => Ok(Granularity::Element),
            "type" | "types" => Ok(Granularity::Type),
            other => Err(format!("unknown granularity `{other}`")),
        }
    }
}

/// Ordered state labels with their node classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alphabet {
    labels: Vec<String>,
    classes: Vec<NodeClass>,
}

impl Alphabet {
    pub fn new<I: IntoIterator<Item = (String, NodeClass)>>(states: I) -> Self {
        let (labels, classes) = states.into_iter().unzip();
        Alphabet { labels, classes }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn classes(&self) -> &[NodeClass] {
        &self.classes
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn class(&self, i: usize) -> NodeClass {
        self.classes[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}
