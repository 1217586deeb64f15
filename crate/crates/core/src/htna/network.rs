use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Granularity, HtnaError, NodeClass, Result, SequenceSet};

/// How chains are combined into one group network.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    /// Sum raw counts over all chats, then normalise rows.
    #[default]
    PooledCounts,
    /// Normalise each student's counts, then average the per-student
    /// probabilities over students that have data for the row.
    PerStudentAverage,
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::PooledCounts => "pooled-counts",
            Pooling::PerStudentAverage => "per-student-average",
        })
    }
}

/// Resampling unit: one chat, or all chats of one student.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitKind {
    #[default]
    Chat,
    Student,
}

impl FromStr for UnitKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "chat" => Ok(UnitKind::Chat),
            "student" => Ok(UnitKind::Student),
            other => Err(format!("unknown permutation unit `{other}`")),
        }
    }
}

/// Fitted first-order Markov model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionNetwork {
    pub granularity: Granularity,
    pub group_label: Option<String>,
    pub pooling: Pooling,
    pub states: Vec<String>,
    pub node_classes: Vec<NodeClass>,
    pub initial: Vec<f64>,
    /// `transition[i][j]` is the probability of state `j` following state `i`.
    pub transition: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
    pub initial_counts: Vec<u64>,
    /// States with no outgoing transitions; their rows are all zero.
    pub zero_rows: Vec<bool>,
    pub n_sequences: usize,
    pub n_tokens: usize,
}

impl TransitionNetwork {
    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn weight(&self, from: &str, to: &str) -> Option<f64> {
        Some(self.transition[self.state_index(from)?][self.state_index(to)?])
    }

    pub fn total_transitions(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Additive contribution of one resampling unit to a group network.
///
/// Group weights are `sum(numerators) / sum(denominators)`, so any subset of
/// units can be recombined without refitting.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitContribution {
    pub key: String,
    /// `(i * n + j, numerator)` for non-zero transition cells.
    pub transitions: Vec<(usize, f64)>,
    /// `(i, denominator)` for rows with outgoing data.
    pub rows: Vec<(usize, f64)>,
    pub initial: Vec<(usize, f64)>,
    pub initial_mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    n: usize,
    transitions: Vec<f64>,
    rows: Vec<f64>,
    initial: Vec<f64>,
    initial_mass: f64,
}

impl SufficientStats {
    pub fn new(n_states: usize) -> Self {
        SufficientStats {
            n: n_states,
            transitions: vec![0.0; n_states * n_states],
            rows: vec![0.0; n_states],
            initial: vec![0.0; n_states],
            initial_mass: 0.0,
        }
    }

    pub fn clear(&mut self) {
        self.transitions.fill(0.0);
        self.rows.fill(0.0);
        self.initial.fill(0.0);
        self.initial_mass = 0.0;
    }

    pub fn add(&mut self, unit: &UnitContribution) {
        for &(cell, v) in &unit.transitions {
            self.transitions[cell] += v;
        }
        for &(row, v) in &unit.rows {
            self.rows[row] += v;
        }
        for &(s, v) in &unit.initial {
            self.initial[s] += v;
        }
        self.initial_mass += unit.initial_mass;
    }

    pub fn transition_weight(&self, i: usize, j: usize) -> f64 {
        let den = self.rows[i];
        if den > 0.0 {
            self.transitions[i * self.n + j] / den
        } else {
            0.0
        }
    }

    /// Row-major transition weights.
    pub fn transition_weights(&self) -> Vec<f64> {
        (0..self.n * self.n)
            .map(|c| self.transition_weight(c / self.n, c % self.n))
            .collect()
    }

    pub fn initial_weight(&self, s: usize) -> f64 {
        if self.initial_mass > 0.0 {
            self.initial[s] / self.initial_mass
        } else {
            0.0
        }
    }
}

struct RawCounts {
    transitions: Vec<u64>,
    initial: Vec<u64>,
    n_chains: u64,
}

impl RawCounts {
    fn new(n: usize) -> Self {
        RawCounts {
            transitions: vec![0; n * n],
            initial: vec![0; n],
            n_chains: 0,
        }
    }

    fn add_chain(&mut self, n: usize, chain: &[usize]) {
        self.initial[chain[0]] += 1;
        self.n_chains += 1;
        for w in chain.windows(2) {
            self.transitions[w[0] * n + w[1]] += 1;
        }
    }

    fn pooled(&self, n: usize, key: String) -> UnitContribution {
        let mut rows = vec![0u64; n];
        let transitions = self
            .transitions
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(cell, &c)| {
                rows[cell / n] += c;
                (cell, c as f64)
            })
            .collect();
        UnitContribution {
            key,
            transitions,
            rows: sparse(&rows),
            initial: sparse(&self.initial),
            initial_mass: self.n_chains as f64,
        }
    }

    fn normalised(&self, n: usize, key: String) -> UnitContribution {
        let mut row_totals = vec![0u64; n];
        for (cell, &c) in self.transitions.iter().enumerate() {
            row_totals[cell / n] += c;
        }
        let transitions = self
            .transitions
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(cell, &c)| (cell, c as f64 / row_totals[cell / n] as f64))
            .collect();
        let rows = (0..n)
            .filter(|&i| row_totals[i] > 0)
            .map(|i| (i, 1.0))
            .collect();
        let initial = self
            .initial
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(s, &c)| (s, c as f64 / self.n_chains as f64))
            .collect();
        UnitContribution {
            key,
            transitions,
            rows,
            initial,
            initial_mass: 1.0,
        }
    }
}

fn sparse(v: &[u64]) -> Vec<(usize, f64)> {
    v.iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(i, &c)| (i, c as f64))
        .collect()
}

/// Per-unit contributions sorted by unit key.
pub fn unit_contributions(
    seqs: &SequenceSet,
    unit: UnitKind,
    pooling: Pooling,
) -> Result<Vec<UnitContribution>> {
    let n = seqs.alphabet().len();
    let mut grouped: BTreeMap<&str, RawCounts> = BTreeMap::new();
    for (i, chain) in seqs.chains().iter().enumerate() {
        let key = match unit {
            UnitKind::Chat => seqs.chat_ids()[i].as_str(),
            UnitKind::Student => seqs.owners()[i].as_str(),
        };
        grouped
            .entry(key)
            .or_insert_with(|| RawCounts::new(n))
            .add_chain(n, chain);
    }
    match (unit, pooling) {
        (UnitKind::Chat, Pooling::PerStudentAverage) => Err(HtnaError::PoolingNeedsStudentUnits),
        (_, Pooling::PooledCounts) => Ok(grouped
            .into_iter()
            .map(|(k, raw)| raw.pooled(n, k.to_string()))
            .collect()),
        (UnitKind::Student, Pooling::PerStudentAverage) => Ok(grouped
            .into_iter()
            .map(|(k, raw)| raw.normalised(n, k.to_string()))
            .collect()),
    }
}

pub fn fit_network(seqs: &SequenceSet) -> Result<TransitionNetwork> {
    fit_network_with(seqs, Pooling::PooledCounts)
}

pub fn fit_network_with(seqs: &SequenceSet, pooling: Pooling) -> Result<TransitionNetwork> {
    if seqs.is_empty() {
        return Err(HtnaError::EmptySequenceSet);
    }
    let n = seqs.alphabet().len();
    let mut raw = RawCounts::new(n);
    for chain in seqs.chains() {
        raw.add_chain(n, chain);
    }
    let counts: Vec<Vec<u64>> = raw.transitions.chunks(n).map(<[u64]>::to_vec).collect();

    let (transition, initial) = match pooling {
        Pooling::PooledCounts => {
            let transition = counts
                .iter()
                .map(|row| {
                    let total: u64 = row.iter().sum();
                    row.iter()
                        .map(|&c| if total > 0 { c as f64 / total as f64 } else { 0.0 })
                        .collect()
                })
                .collect();
            let initial = raw
                .initial
                .iter()
                .map(|&c| c as f64 / raw.n_chains as f64)
                .collect();
            (transition, initial)
        }
        Pooling::PerStudentAverage => {
            let mut stats = SufficientStats::new(n);
            for unit in unit_contributions(seqs, UnitKind::Student, pooling)? {
                stats.add(&unit);
            }
            let transition = (0..n)
                .map(|i| (0..n).map(|j| stats.transition_weight(i, j)).collect())
                .collect();
            let initial = (0..n).map(|s| stats.initial_weight(s)).collect();
            (transition, initial)
        }
    };
    let zero_rows = counts.iter().map(|r| r.iter().all(|&c| c == 0)).collect();

    Ok(TransitionNetwork {
        granularity: seqs.granularity(),
        group_label: seqs.group_label().map(str::to_string),
        pooling,
        states: seqs.alphabet().labels().to_vec(),
        node_classes: seqs.alphabet().classes().to_vec(),
        initial,
        transition,
        counts,
        initial_counts: raw.initial,
        zero_rows,
        n_sequences: seqs.len(),
        n_tokens: seqs.n_tokens(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub weight: f64,
}

/// A network with weak edges suppressed; the underlying matrix is untouched.
#[derive(Debug, Clone)]
pub struct NetworkView<'a> {
    pub network: &'a TransitionNetwork,
    pub min_weight: f64,
    pub edges: Vec<Edge>,
}

/// Keeps edges with weight strictly above `min_weight`.
pub fn threshold_edges(net: &TransitionNetwork, min_weight: f64) -> NetworkView<'_> {
    let edges = net
        .transition
        .iter()
        .enumerate()
        .flat_map(|(i, row)| {
            row.iter().enumerate().filter_map(move |(j, &w)| {
                (w > 0.0 && w > min_weight).then_some(Edge {
                    from: i,
                    to: j,
                    weight: w,
                })
            })
        })
        .collect();
    NetworkView {
        network: net,
        min_weight,
        edges,
    }
}
