use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{chi_square_sf, pearson_chi_square, Result, StatsError};
use crate::htna::SequenceSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternConfig {
    pub min_len: usize,
    pub max_len: usize,
    /// Keep at most this many patterns; `None` keeps all.
    pub top_k: Option<usize>,
    pub alpha: f64,
}

impl Default for PatternConfig {
    fn default() -> Self {
        PatternConfig {
            min_len: 3,
            max_len: 5,
            top_k: Some(10),
            alpha: super::DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternStats {
    pub pattern: Vec<String>,
    pub n_a: u64,
    pub n_b: u64,
    /// Occurrences over all windows of the same length in group A.
    pub prop_a: f64,
    pub prop_b: f64,
    pub windows_a: u64,
    pub windows_b: u64,
    pub stat: f64,
    pub p_value: f64,
}

/// Sliding-window `k`-gram counts (stride 1, within chains only) and the
/// total number of windows.
pub fn count_kgrams(seqs: &SequenceSet, k: usize) -> (BTreeMap<Vec<usize>, u64>, u64) {
    let mut counts = BTreeMap::new();
    let mut windows = 0;
    for chain in seqs.chains() {
        for w in chain.windows(k) {
            *counts.entry(w.to_vec()).or_insert(0) += 1;
            windows += 1;
        }
    }
    (counts, windows)
}

/// Contiguous patterns whose share of windows differs between two groups.
///
/// Each pattern is tested with a 2x2 Pearson chi-square (occurrences vs other
/// windows of the same length, no continuity correction). Patterns with
/// `p < alpha` are ranked by statistic.
pub fn mine_patterns(
    seqs_a: &SequenceSet,
    seqs_b: &SequenceSet,
    cfg: &PatternConfig,
) -> Result<Vec<PatternStats>> {
    if cfg.min_len < 2 || cfg.min_len > cfg.max_len {
        return Err(StatsError::InvalidPatternLength {
            min: cfg.min_len,
            max: cfg.max_len,
        });
    }
    if seqs_a.alphabet() != seqs_b.alphabet() {
        return Err(StatsError::GranularityMismatch);
    }
    let labels = seqs_a.alphabet();
    let mut out = Vec::new();
    for k in cfg.min_len..=cfg.max_len {
        let (ca, wa) = count_kgrams(seqs_a, k);
        let (cb, wb) = count_kgrams(seqs_b, k);
        if wa == 0 || wb == 0 {
            continue;
        }
        let keys: BTreeSet<&Vec<usize>> = ca.keys().chain(cb.keys()).collect();
        for key in keys {
            let n_a = ca.get(key).copied().unwrap_or(0);
            let n_b = cb.get(key).copied().unwrap_or(0);
            let table = [
                vec![n_a as f64, (wa - n_a) as f64],
                vec![n_b as f64, (wb - n_b) as f64],
            ];
            let (stat, df) = pearson_chi_square(&table);
            let p_value = chi_square_sf(stat, df);
            if p_value < cfg.alpha {
                out.push(PatternStats {
                    pattern: key.iter().map(|&s| labels.label(s).to_string()).collect(),
                    n_a,
                    n_b,
                    prop_a: n_a as f64 / wa as f64,
                    prop_b: n_b as f64 / wb as f64,
                    windows_a: wa,
                    windows_b: wb,
                    stat,
                    p_value,
                });
            }
        }
    }
    out.sort_by(|x, y| {
        y.stat
            .total_cmp(&x.stat)
            .then(x.pattern.len().cmp(&y.pattern.len()))
            .then_with(|| x.pattern.cmp(&y.pattern))
    });
    if let Some(k) = cfg.top_k {
        out.truncate(k);
    }
    Ok(out)
}

/// Pattern table: `Pattern, n, <A> prop., n, <B> prop., stat.` with
/// 3-decimal proportions and 2-decimal statistics.
pub fn render_pattern_table(rows: &[PatternStats], label_a: &str, label_b: &str) -> String {
    let mut out = format!("Pattern\tn\t{label_a} prop.\tn\t{label_b} prop.\tstat.\n");
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{:.3}\t{}\t{:.3}\t{:.2}",
            r.pattern.join("->"),
            r.n_a,
            r.prop_a,
            r.n_b,
            r.prop_b,
            r.stat
        )
        .unwrap();
    }
    out
}
