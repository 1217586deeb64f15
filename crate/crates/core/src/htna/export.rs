//! DOT and JSON rendering of networks and group comparisons.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Granularity, HtnaError, NetworkView, NodeClass, Result, TransitionNetwork};
use crate::codes::InteractionType;
use crate::stats::EdgeComparison;

pub const NETWORK_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Dot,
    Json,
}

impl FromStr for ExportFormat {
    type Err = HtnaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dot" => Ok(ExportFormat::Dot),
            "json" => Ok(ExportFormat::Json),
            other => Err(HtnaError::UnknownFormat(other.to_string())),
        }
    }
}

const A_STRONGER: &str = "#d62728";
const B_STRONGER: &str = "#2ca02c";

fn node_color(granularity: Granularity, label: &str, class: NodeClass) -> &'static str {
    if granularity == Granularity::Type {
        if let Ok(t) = label.parse::<InteractionType>() {
            return match t {
                InteractionType::Prompt(p) if p.is_instrumental() => "#4e79a7",
                InteractionType::Prompt(_) => "#76b7b2",
                InteractionType::Role(r) if r.is_pedagogical() => "#bab0ac",
                InteractionType::Role(_) => "#f28e2b",
            };
        }
    }
    match class {
        NodeClass::Student => "#f6d55c",
        NodeClass::Ai => "#b07aa1",
    }
}

fn node_shape(class: NodeClass) -> &'static str {
    match class {
        NodeClass::Student => "ellipse",
        NodeClass::Ai => "box",
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

#[derive(Serialize, Deserialize)]
struct NetworkDocument {
    schema_version: u32,
    network: TransitionNetwork,
}

#[derive(Serialize)]
struct ComparisonDocument<'a> {
    schema_version: u32,
    granularity: Granularity,
    group_a: Option<&'a str>,
    group_b: Option<&'a str>,
    states: &'a [String],
    node_classes: &'a [NodeClass],
    initial_a: &'a [f64],
    initial_b: &'a [f64],
    min_weight: f64,
    edges: &'a [EdgeComparison],
}

pub fn export_network(view: &NetworkView<'_>, format: ExportFormat) -> String {
    let net = view.network;
    match format {
        ExportFormat::Json => {
            let doc = NetworkDocument {
                schema_version: NETWORK_SCHEMA_VERSION,
                network: net.clone(),
            };
            serde_json::to_string_pretty(&doc).expect("network serialises") + "\n"
        }
        ExportFormat::Dot => {
            let name = net.group_label.as_deref().unwrap_or("network");
            let mut out = String::new();
            writeln!(out, "digraph {} {{", quote(name)).unwrap();
            writeln!(out, "  rankdir=LR;").unwrap();
            writeln!(out, "  node [style=filled, fontname=\"Helvetica\"];").unwrap();
            for (i, label) in net.states.iter().enumerate() {
                let class = net.node_classes[i];
                writeln!(
                    out,
                    "  {} [label={}, shape={}, fillcolor={}];",
                    quote(label),
                    quote(&format!("{label}\\ninit {:.3}", net.initial[i])),
                    node_shape(class),
                    quote(node_color(net.granularity, label, class)),
                )
                .unwrap();
            }
            for e in &view.edges {
                writeln!(
                    out,
                    "  {} -> {} [label=\"{:.3}\", penwidth={:.2}];",
                    quote(&net.states[e.from]),
                    quote(&net.states[e.to]),
                    e.weight,
                    1.0 + 4.0 * e.weight,
                )
                .unwrap();
            }
            out.push_str("}\n");
            out
        }
    }
}

pub fn import_network_json(text: &str) -> Result<TransitionNetwork> {
    let doc: NetworkDocument =
        serde_json::from_str(text).map_err(|e| HtnaError::InvalidDocument(e.to_string()))?;
    if doc.schema_version != NETWORK_SCHEMA_VERSION {
        return Err(HtnaError::SchemaVersion(doc.schema_version));
    }
    Ok(doc.network)
}

/// Difference network: edges where either group exceeds `min_weight`,
/// coloured by which group is stronger; significant edges are bold.
pub fn export_comparison(
    net_a: &TransitionNetwork,
    net_b: &TransitionNetwork,
    comparisons: &[EdgeComparison],
    min_weight: f64,
    format: ExportFormat,
) -> String {
    match format {
        ExportFormat::Json => {
            let doc = ComparisonDocument {
                schema_version: NETWORK_SCHEMA_VERSION,
                granularity: net_a.granularity,
                group_a: net_a.group_label.as_deref(),
                group_b: net_b.group_label.as_deref(),
                states: &net_a.states,
                node_classes: &net_a.node_classes,
                initial_a: &net_a.initial,
                initial_b: &net_b.initial,
                min_weight,
                edges: comparisons,
            };
            serde_json::to_string_pretty(&doc).expect("comparison serialises") + "\n"
        }
        ExportFormat::Dot => {
            let a = net_a.group_label.as_deref().unwrap_or("A");
            let b = net_b.group_label.as_deref().unwrap_or("B");
            let mut out = String::new();
            writeln!(out, "digraph {} {{", quote(&format!("{a} vs {b}"))).unwrap();
            writeln!(out, "  rankdir=LR;").unwrap();
            writeln!(out, "  node [style=filled, fontname=\"Helvetica\"];").unwrap();
            for (i, label) in net_a.states.iter().enumerate() {
                let class = net_a.node_classes[i];
                writeln!(
                    out,
                    "  {} [label={}, shape={}, fillcolor={}];",
                    quote(label),
                    quote(&format!(
                        "{label}\\ninit {a} {:.3} / {b} {:.3}",
                        net_a.initial[i], net_b.initial[i]
                    )),
                    node_shape(class),
                    quote(node_color(net_a.granularity, label, class)),
                )
                .unwrap();
            }
            for c in comparisons {
                if c.diff == 0.0 || c.weight_a.max(c.weight_b) <= min_weight {
                    continue;
                }
                let color = if c.diff > 0.0 { A_STRONGER } else { B_STRONGER };
                let style = if c.significant { ", style=bold" } else { "" };
                writeln!(
                    out,
                    "  {} -> {} [label=\"{:+.3}{}\", color={}, fontcolor={}, penwidth={:.2}{}];",
                    quote(&c.from_state),
                    quote(&c.to_state),
                    c.diff,
                    if c.significant { "*" } else { "" },
                    quote(color),
                    quote(color),
                    1.0 + 20.0 * c.diff.abs(),
                    style,
                )
                .unwrap();
            }
            out.push_str("}\n");
            out
        }
    }
}
