//! Group-difference inference: edge-weight permutation tests, Pearson
//! residual analysis and n-gram pattern comparison.
//!
//! Every permutation replicate draws from its own ChaCha stream selected by
//! the replicate index, so p-values depend only on `(inputs, seed, n_perm)`
//! and never on how replicates are scheduled across workers.

mod patterns;
mod permutation;
mod residuals;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::htna::HtnaError;

pub use patterns::{
    count_kgrams, mine_patterns, render_pattern_table, PatternConfig, PatternStats,
};
pub use permutation::{compare_edges, render_edge_table, EdgeComparison, PermutationConfig};
pub use residuals::{
    render_mosaic, residual_analysis, ContingencyTable, ResidualReport,
};

/// Default significance level for edge and type-pattern tests.
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Significance preset for element-granularity pattern tables.
pub const ELEMENT_PATTERN_ALPHA: f64 = 0.001;
pub const DEFAULT_N_PERM: usize = 10_000;

/// Slack when comparing a permuted statistic with the observed one, so that
/// exact ties survive floating-point summation order.
pub(crate) const TIE_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sequence sets differ in granularity or state alphabet")]
    GranularityMismatch,
    #[error("student `{0}` appears in both groups")]
    OverlappingOwners(String),
    #[error("n_perm must be at least 1")]
    NoPermutations,
    #[error("invalid pattern length range {min}..={max} (need 2 <= min <= max)")]
    InvalidPatternLength { min: usize, max: usize },
    #[error("group `{0}` is empty")]
    EmptyGroup(String),
    #[error("contingency table is malformed: {0}")]
    Shape(String),
    #[error("worker pool: {0}")]
    Workers(String),
    #[error(transparent)]
    Htna(#[from] HtnaError),
}

pub type Result<T> = std::result::Result<T, StatsError>;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// Group A larger than group B.
    Greater,
    Less,
}

impl fmt::Display for Alternative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Alternative::TwoSided => "two-sided",
            Alternative::Greater => "greater",
            Alternative::Less => "less",
        })
    }
}

impl FromStr for Alternative {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "two-sided" | "two_sided" | "two" => Ok(Alternative::TwoSided),
            "greater" => Ok(Alternative::Greater),
            "less" => Ok(Alternative::Less),
            other => Err(format!("unknown alternative `{other}`")),
        }
    }
}

impl Alternative {
    /// Whether a permuted statistic is at least as extreme as the observed one.
    pub(crate) fn exceeds(self, permuted: f64, observed: f64) -> bool {
        match self {
            Alternative::TwoSided => permuted.abs() >= observed.abs() - TIE_EPS,
            Alternative::Greater => permuted >= observed - TIE_EPS,
            Alternative::Less => permuted <= observed + TIE_EPS,
        }
    }
}

/// `(1 + exceedances) / (n_perm + 1)`.
pub fn permutation_p(exceedances: u64, n_perm: usize) -> f64 {
    (1 + exceedances) as f64 / (n_perm + 1) as f64
}

/// Generator for one permutation replicate.
pub(crate) fn replicate_rng(seed: u64, replicate: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate as u64);
    rng
}

/// Runs `f` on a dedicated pool of `workers` threads, or on the global pool.
pub(crate) fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .map_err(|e| StatsError::Workers(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Pearson chi-square on a table of counts. Columns with a zero margin have
/// zero expected counts everywhere and are left out of both the statistic
/// and the degrees of freedom.
pub(crate) fn pearson_chi_square(table: &[Vec<f64>]) -> (f64, usize) {
    let n_rows = table.len();
    let n_cols = table.first().map_or(0, Vec::len);
    let total: f64 = table.iter().flatten().sum();
    if total <= 0.0 {
        return (0.0, 0);
    }
    let row_totals: Vec<f64> = table.iter().map(|r| r.iter().sum()).collect();
    let mut stat = 0.0;
    let mut kept_cols = 0usize;
    for j in 0..n_cols {
        let col_total: f64 = table.iter().map(|r| r[j]).sum();
        if col_total <= 0.0 {
            continue;
        }
        kept_cols += 1;
        for i in 0..n_rows {
            let expected = row_totals[i] * col_total / total;
            if expected > 0.0 {
                let d = table[i][j] - expected;
                stat += d * d / expected;
            }
        }
    }
    let kept_rows = row_totals.iter().filter(|&&r| r > 0.0).count();
    let df = kept_rows.saturating_sub(1) * kept_cols.saturating_sub(1);
    (stat, df)
}

/// Upper-tail chi-square probability; 1 when there are no degrees of freedom.
pub fn chi_square_sf(stat: f64, df: usize) -> f64 {
    if df == 0 {
        return 1.0;
    }
    ChiSquared::new(df as f64)
        .expect("positive degrees of freedom")
        .sf(stat.max(0.0))
}
