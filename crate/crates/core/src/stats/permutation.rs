use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{permutation_p, replicate_rng, with_workers, Alternative, Result, StatsError};
use crate::htna::{unit_contributions, Pooling, SequenceSet, SufficientStats, UnitContribution, UnitKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeComparison {
    pub from_state: String,
    pub to_state: String,
    pub weight_a: f64,
    pub weight_b: f64,
    /// `weight_a - weight_b`.
    pub diff: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationConfig {
    pub n_perm: usize,
    pub seed: u64,
    pub unit: UnitKind,
    pub pooling: Pooling,
    pub alternative: Alternative,
    pub alpha: f64,
    /// Worker threads; `None` uses the global pool. Results do not depend on it.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl PermutationConfig {
    pub fn new(n_perm: usize, seed: u64) -> Self {
        PermutationConfig {
            n_perm,
            seed,
            unit: UnitKind::Chat,
            pooling: Pooling::PooledCounts,
            alternative: Alternative::TwoSided,
            alpha: super::DEFAULT_ALPHA,
            workers: None,
        }
    }
}

fn group_stats<'a>(n: usize, units: impl Iterator<Item = &'a UnitContribution>) -> SufficientStats {
    let mut stats = SufficientStats::new(n);
    units.for_each(|u| stats.add(u));
    stats
}

/// Permutation test on every edge that carries weight in either group.
///
/// Units (chats or students) of both groups are pooled in key order and, for
/// each replicate, randomly re-split with the original group sizes. The
/// split is anchored on the group holding the smallest unit key, which makes
/// the test invariant to swapping the two inputs.
pub fn compare_edges(
    seqs_a: &SequenceSet,
    seqs_b: &SequenceSet,
    cfg: &PermutationConfig,
) -> Result<Vec<EdgeComparison>> {
    if seqs_a.granularity() != seqs_b.granularity() || seqs_a.alphabet() != seqs_b.alphabet() {
        return Err(StatsError::GranularityMismatch);
    }
    if cfg.n_perm == 0 {
        return Err(StatsError::NoPermutations);
    }
    let owners_a: BTreeSet<&str> = seqs_a.owners().iter().map(String::as_str).collect();
    if let Some(shared) = seqs_b.owners().iter().find(|o| owners_a.contains(o.as_str())) {
        return Err(StatsError::OverlappingOwners(shared.clone()));
    }
    for (set, name) in [(seqs_a, "A"), (seqs_b, "B")] {
        if set.is_empty() {
            return Err(StatsError::EmptyGroup(set.group_label().unwrap_or(name).to_string()));
        }
    }

    let n = seqs_a.alphabet().len();
    let units_a = unit_contributions(seqs_a, cfg.unit, cfg.pooling)?;
    let units_b = unit_contributions(seqs_b, cfg.unit, cfg.pooling)?;

    let obs_a = group_stats(n, units_a.iter());
    let obs_b = group_stats(n, units_b.iter());
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| obs_a.transition_weight(i, j) > 0.0 || obs_b.transition_weight(i, j) > 0.0)
        .collect();
    let observed: Vec<(f64, f64)> = edges
        .iter()
        .map(|&(i, j)| (obs_a.transition_weight(i, j), obs_b.transition_weight(i, j)))
        .collect();
    let observed_diff: Vec<f64> = observed.iter().map(|(a, b)| a - b).collect();

    // Canonical pooled order: all units sorted by key.
    let mut pooled: Vec<(&UnitContribution, bool)> = units_a
        .iter()
        .map(|u| (u, true))
        .chain(units_b.iter().map(|u| (u, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.key.cmp(&y.0.key));
    let anchor_is_a = pooled[0].1;
    let n_anchor = if anchor_is_a { units_a.len() } else { units_b.len() };
    let pooled: Vec<&UnitContribution> = pooled.into_iter().map(|(u, _)| u).collect();

    let exceed = with_workers(cfg.workers, || {
        (0..cfg.n_perm)
            .into_par_iter()
            .fold(
                || Replicator::new(n, pooled.len(), edges.len()),
                |mut rep, r| {
                    rep.run(r, cfg, &pooled, n_anchor, anchor_is_a, &edges, &observed_diff);
                    rep
                },
            )
            .map(|rep| rep.exceed)
            .reduce(
                || vec![0u64; edges.len()],
                |mut x, y| {
                    x.iter_mut().zip(y).for_each(|(a, b)| *a += b);
                    x
                },
            )
    })?;

    let labels = seqs_a.alphabet();
    Ok(edges
        .iter()
        .zip(observed)
        .zip(exceed)
        .map(|((&(i, j), (wa, wb)), count)| {
            let p_value = permutation_p(count, cfg.n_perm);
            EdgeComparison {
                from_state: labels.label(i).to_string(),
                to_state: labels.label(j).to_string(),
                weight_a: wa,
                weight_b: wb,
                diff: wa - wb,
                p_value,
                significant: p_value < cfg.alpha,
            }
        })
        .collect())
}

struct Replicator {
    first: SufficientStats,
    second: SufficientStats,
    order: Vec<usize>,
    exceed: Vec<u64>,
}

impl Replicator {
    fn new(n_states: usize, n_units: usize, n_edges: usize) -> Self {
        Replicator {
            first: SufficientStats::new(n_states),
            second: SufficientStats::new(n_states),
            order: (0..n_units).collect(),
            exceed: vec![0; n_edges],
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn run(
        &mut self,
        replicate: usize,
        cfg: &PermutationConfig,
        pooled: &[&UnitContribution],
        n_anchor: usize,
        anchor_is_a: bool,
        edges: &[(usize, usize)],
        observed_diff: &[f64],
    ) {
        let mut rng = replicate_rng(cfg.seed, replicate);
        for (i, slot) in self.order.iter_mut().enumerate() {
            *slot = i;
        }
        // Partial Fisher-Yates: positions 0..n_anchor become the anchor group.
        let len = self.order.len();
        for i in 0..n_anchor.min(len.saturating_sub(1)) {
            let j = rng.random_range(i..len);
            self.order.swap(i, j);
        }
        self.first.clear();
        self.second.clear();
        for (pos, &u) in self.order.iter().enumerate() {
            if pos < n_anchor {
                self.first.add(pooled[u]);
            } else {
                self.second.add(pooled[u]);
            }
        }
        let (a, b) = if anchor_is_a {
            (&self.first, &self.second)
        } else {
            (&self.second, &self.first)
        };
        for (k, &(i, j)) in edges.iter().enumerate() {
            let d = a.transition_weight(i, j) - b.transition_weight(i, j);
            if cfg.alternative.exceeds(d, observed_diff[k]) {
                self.exceed[k] += 1;
            }
        }
    }
}

/// Tab-delimited edge comparison table.
pub fn render_edge_table(comparisons: &[EdgeComparison], label_a: &str, label_b: &str) -> String {
    let mut out = format!("From\tTo\t{label_a} weight\t{label_b} weight\tdiff\tp\tsignificant\n");
    for c in comparisons {
        writeln!(
            out,
            "{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{}",
            c.from_state,
            c.to_state,
            c.weight_a,
            c.weight_b,
            c.diff,
            c.p_value,
            if c.significant { "yes" } else { "no" }
        )
        .unwrap();
    }
    out
}
