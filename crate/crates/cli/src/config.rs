//! Command-line flags and the validated pipeline configuration.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use helpseek_core::corpus::Quartile;
use helpseek_core::htna::{Granularity, Pooling, UnitKind};
use helpseek_core::regress::{Normalization, DEFAULT_VIF_THRESHOLD};
use helpseek_core::stats::{Alternative, DEFAULT_ALPHA, DEFAULT_N_PERM, ELEMENT_PATTERN_ALPHA};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "helpseek", version, about = "Sequence analytics for coded student-AI dialogues")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub args: ConfigArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Validate coded turns and grades, assign quartiles.
    Ingest,
    /// Derive prompt types and AI roles; element and type frequencies.
    Classify,
    /// Per-code Cohen's kappa between the ingested coding and `--rater-b`.
    Kappa,
    /// Fit one transition network per quartile.
    Fit,
    /// Permutation test on edge weights between the two compared groups.
    Compare,
    /// Pearson residuals of code frequencies with permutation p-values.
    Residuals,
    /// Chi-square tests on n-gram pattern proportions.
    Patterns,
    /// OLS of grade on per-student feature proportions.
    Regress,
    /// Render every available artifact into tables and DOT files.
    ExportReport,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Classify => "classify",
            Command::Kappa => "kappa",
            Command::Fit => "fit",
            Command::Compare => "compare",
            Command::Residuals => "residuals",
            Command::Patterns => "patterns",
            Command::Regress => "regress",
            Command::ExportReport => "export-report",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GranularityArg {
    Element,
    Type,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorSet {
    /// Iterative VIF filtering from all features.
    Vif,
    /// Fixed predictor keep lists.
    Preset,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Coded turns, one JSON object per line.
    #[arg(long, global = true, env = "HELPSEEK_INPUT")]
    pub input: Option<PathBuf>,
    /// `student_id,grade` CSV.
    #[arg(long, global = true, env = "HELPSEEK_GRADES")]
    pub grades: Option<PathBuf>,
    /// Second coder's turns for `kappa`.
    #[arg(long, global = true, env = "HELPSEEK_RATER_B")]
    pub rater_b: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "element", env = "HELPSEEK_GRANULARITY")]
    pub granularity: GranularityArg,
    /// Groups to compare, e.g. `Q1,Q4`.
    #[arg(long, global = true, default_value = "Q1,Q4", env = "HELPSEEK_GROUPS")]
    pub groups: String,
    #[arg(long, global = true, default_value_t = DEFAULT_N_PERM, env = "HELPSEEK_N_PERM")]
    pub n_perm: usize,
    /// Required by stochastic stages.
    #[arg(long, global = true, env = "HELPSEEK_SEED")]
    pub seed: Option<u64>,
    /// Minimum edge weight shown in networks (default 0.4 element, 0.3 type).
    #[arg(long, global = true, env = "HELPSEEK_EDGE_THRESHOLD")]
    pub edge_threshold: Option<f64>,
    /// Pattern length range `min:max`.
    #[arg(long, global = true, default_value = "3:5", env = "HELPSEEK_PATTERN_LEN")]
    pub pattern_len: String,
    /// Significance level (default 0.05; 0.001 for element patterns).
    #[arg(long, global = true, env = "HELPSEEK_ALPHA")]
    pub alpha: Option<f64>,
    #[arg(long, global = true, default_value_t = 10, env = "HELPSEEK_TOP_K")]
    pub top_k: usize,
    #[arg(long, global = true, default_value = "out", env = "HELPSEEK_OUT")]
    pub out: PathBuf,
    /// Downgrade alternation violations to warnings.
    #[arg(long, global = true, env = "HELPSEEK_LENIENT")]
    pub lenient: bool,
    /// Explicit quartile sizes `a,b,c,d`.
    #[arg(long, global = true, env = "HELPSEEK_SIZES")]
    pub sizes: Option<String>,
    /// Average per-student transition probabilities instead of pooling counts.
    #[arg(long, global = true, env = "HELPSEEK_PER_STUDENT_AVERAGE")]
    pub per_student_average: bool,
    /// Permutation unit: `chat` or `student`.
    #[arg(long, global = true, env = "HELPSEEK_PERM_UNIT")]
    pub perm_unit: Option<String>,
    /// `two-sided`, `greater` or `less`.
    #[arg(long, global = true, default_value = "two-sided", env = "HELPSEEK_ALTERNATIVE")]
    pub alternative: String,
    /// `all-codes`, `actor-class` or `per-message`.
    #[arg(long, global = true, default_value = "all-codes", env = "HELPSEEK_NORMALIZE")]
    pub normalize: String,
    #[arg(long, global = true, default_value_t = DEFAULT_VIF_THRESHOLD, env = "HELPSEEK_VIF_THRESHOLD")]
    pub vif_threshold: f64,
    #[arg(long, global = true, value_enum, default_value = "vif", env = "HELPSEEK_PREDICTORS")]
    pub predictors: PredictorSet,
    /// Permutation worker threads (results do not depend on it).
    #[arg(long, global = true, env = "HELPSEEK_WORKERS")]
    pub workers: Option<usize>,
}

/// Validated settings. Everything except paths, granularity and worker count
/// enters the configuration hash.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineConfig {
    #[serde(skip)]
    pub input: Option<PathBuf>,
    #[serde(skip)]
    pub grades: Option<PathBuf>,
    #[serde(skip)]
    pub rater_b: Option<PathBuf>,
    #[serde(skip)]
    pub granularity: Granularity,
    pub groups: (Quartile, Quartile),
    pub n_perm: usize,
    pub seed: Option<u64>,
    pub edge_threshold: Option<f64>,
    pub pattern_len: (usize, usize),
    pub alpha: Option<f64>,
    pub top_k: usize,
    #[serde(skip)]
    pub out: PathBuf,
    pub lenient: bool,
    pub sizes: Option<[usize; 4]>,
    pub pooling: Pooling,
    pub perm_unit: UnitKind,
    pub alternative: Alternative,
    pub normalize: Normalization,
    pub vif_threshold: f64,
    pub predictors: PredictorSet,
    #[serde(skip)]
    pub workers: Option<usize>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn parse_groups(s: &str) -> Result<(Quartile, Quartile), CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let [a, b] = parts.as_slice() else {
        return Err(invalid(format!("--groups expects two groups like Q1,Q4, got `{s}`")));
    };
    let a: Quartile = a.parse().map_err(invalid)?;
    let b: Quartile = b.parse().map_err(invalid)?;
    if a == b {
        return Err(invalid("--groups must name two different groups"));
    }
    Ok((a, b))
}

fn parse_range(s: &str) -> Result<(usize, usize), CliError> {
    let bad = || invalid(format!("--pattern-len expects `min:max`, got `{s}`"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let min: usize = a.trim().parse().map_err(|_| bad())?;
    let max: usize = b.trim().parse().map_err(|_| bad())?;
    if min < 2 || min > max {
        return Err(invalid(format!("--pattern-len needs 2 <= min <= max, got {min}:{max}")));
    }
    Ok((min, max))
}

fn parse_sizes(s: &str) -> Result<[usize; 4], CliError> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| invalid(format!("--sizes expects four integers, got `{s}`")))?;
    if v.contains(&0) {
        return Err(invalid("--sizes entries must be positive"));
    }
    v.try_into()
        .map_err(|_| invalid(format!("--sizes expects four integers, got `{s}`")))
}

fn unit_interval(name: &str, v: Option<f64>) -> Result<(), CliError> {
    match v {
        Some(x) if !(0.0..=1.0).contains(&x) => Err(invalid(format!("{name} must lie in [0, 1], got {x}"))),
        _ => Ok(()),
    }
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig, CliError> {
        unit_interval("--edge-threshold", self.edge_threshold)?;
        unit_interval("--alpha", self.alpha)?;
        if self.n_perm == 0 {
            return Err(invalid("--n-perm must be at least 1"));
        }
        if !(self.vif_threshold > 1.0) {
            return Err(invalid("--vif-threshold must exceed 1"));
        }
        if self.workers == Some(0) {
            return Err(invalid("--workers must be at least 1"));
        }
        let pooling = if self.per_student_average {
            Pooling::PerStudentAverage
        } else {
            Pooling::PooledCounts
        };
        let perm_unit = match &self.perm_unit {
            Some(u) => u.parse().map_err(invalid)?,
            // Averaging needs whole students as resampling units.
            None if self.per_student_average => UnitKind::Student,
            None => UnitKind::Chat,
        };
        if pooling == Pooling::PerStudentAverage && perm_unit == UnitKind::Chat {
            return Err(invalid("--per-student-average requires --perm-unit student"));
        }
        Ok(PipelineConfig {
            input: self.input.clone(),
            grades: self.grades.clone(),
            rater_b: self.rater_b.clone(),
            granularity: match self.granularity {
                GranularityArg::Element => Granularity::Element,
                GranularityArg::Type => Granularity::Type,
            },
            groups: parse_groups(&self.groups)?,
            n_perm: self.n_perm,
            seed: self.seed,
            edge_threshold: self.edge_threshold,
            pattern_len: parse_range(&self.pattern_len)?,
            alpha: self.alpha,
            top_k: self.top_k,
            out: self.out.clone(),
            lenient: self.lenient,
            sizes: self.sizes.as_deref().map(parse_sizes).transpose()?,
            pooling,
            perm_unit,
            alternative: self.alternative.parse().map_err(invalid)?,
            normalize: self.normalize.parse().map_err(invalid)?,
            vif_threshold: self.vif_threshold,
            predictors: self.predictors,
            workers: self.workers,
        })
    }
}

impl PipelineConfig {
    pub fn edge_threshold(&self) -> f64 {
        self.edge_threshold
            .unwrap_or_else(|| self.granularity.default_edge_threshold())
    }

    pub fn edge_alpha(&self) -> f64 {
        self.alpha.unwrap_or(DEFAULT_ALPHA)
    }

    pub fn pattern_alpha(&self) -> f64 {
        self.alpha.unwrap_or(match self.granularity {
            Granularity::Element => ELEMENT_PATTERN_ALPHA,
            Granularity::Type => DEFAULT_ALPHA,
        })
    }

    pub fn require_seed(&self, stage: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| invalid(format!("`{stage}` is stochastic and needs --seed")))
    }

    /// Seed for one stage and granularity, derived from the config seed.
    pub fn stage_seed(&self, stage: &str) -> Result<u64, CliError> {
        let seed = self.require_seed(stage)?;
        let digest = Sha256::digest(format!("{seed}:{stage}:{}", self.granularity.as_str()));
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        Ok(u64::from_le_bytes(bytes))
    }

    /// Hash of the analysis settings together with the input digests.
    pub fn hash(&self, inputs: &InputDigests) -> String {
        #[derive(Serialize)]
        struct Hashed<'a> {
            config: &'a PipelineConfig,
            inputs: &'a InputDigests,
        }
        let canonical = serde_json::to_string(&Hashed { config: self, inputs }).expect("config serialises");
        hex(&Sha256::digest(canonical.as_bytes()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct InputDigests {
    pub turns_sha256: String,
    pub grades_sha256: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(extra: &[&str]) -> ConfigArgs {
        let mut argv = vec!["helpseek", "fit"];
        argv.extend_from_slice(extra);
        Cli::try_parse_from(argv).unwrap().args
    }

    #[test]
    fn defaults() {
        let cfg = args(&[]).resolve().unwrap();
        assert_eq!(cfg.groups, (Quartile::Q1, Quartile::Q4));
        assert_eq!(cfg.pattern_len, (3, 5));
        assert_eq!(cfg.n_perm, 10_000);
        assert_eq!(cfg.edge_threshold(), 0.4);
        assert_eq!(cfg.pattern_alpha(), 0.001);
        let typed = args(&["--granularity", "type"]).resolve().unwrap();
        assert_eq!(typed.edge_threshold(), 0.3);
        assert_eq!(typed.pattern_alpha(), 0.05);
    }

    #[test]
    fn validation() {
        for bad in [
            &["--edge-threshold", "1.5"][..],
            &["--pattern-len", "5:3"],
            &["--pattern-len", "1:3"],
            &["--groups", "Q1,Q1"],
            &["--groups", "Q1"],
            &["--sizes", "1,2,3"],
            &["--n-perm", "0"],
            &["--per-student-average", "--perm-unit", "chat"],
            &["--alternative", "sideways"],
        ] {
            assert!(args(bad).resolve().is_err(), "{bad:?}");
        }
        assert_eq!(
            args(&["--per-student-average"]).resolve().unwrap().perm_unit,
            UnitKind::Student
        );
    }

    #[test]
    fn hash_ignores_paths_granularity_and_workers() {
        let digests = InputDigests {
            turns_sha256: "a".into(),
            grades_sha256: "b".into(),
        };
        let base = args(&["--seed", "1"]).resolve().unwrap().hash(&digests);
        let moved = args(&["--seed", "1", "--out", "elsewhere", "--workers", "3", "--granularity", "type"])
            .resolve()
            .unwrap()
            .hash(&digests);
        assert_eq!(base, moved);
        let reseeded = args(&["--seed", "2"]).resolve().unwrap().hash(&digests);
        assert_ne!(base, reseeded);
    }

    #[test]
    fn stage_seeds_differ_by_stage_and_granularity() {
        let cfg = args(&["--seed", "9"]).resolve().unwrap();
        let typed = args(&["--seed", "9", "--granularity", "type"]).resolve().unwrap();
        let a = cfg.stage_seed("compare").unwrap();
        assert_eq!(a, cfg.stage_seed("compare").unwrap());
        assert_ne!(a, cfg.stage_seed("residuals").unwrap());
        assert_ne!(a, typed.stage_seed("compare").unwrap());
        assert!(args(&[]).resolve().unwrap().stage_seed("compare").is_err());
    }
}
