//! Versioned JSON artifacts exchanged between stages.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use helpseek_core::codes::{InteractionType, KappaResult};
use helpseek_core::corpus::{Corpus, GradeBook, GroupAssignment, Quartile};
use helpseek_core::htna::{Granularity, Pooling, TransitionNetwork};
use helpseek_core::regress::{DroppedPredictor, Normalization, RegressionSummary};
use helpseek_core::stats::{EdgeComparison, PatternConfig, PatternStats, PermutationConfig, ResidualReport};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{InputDigests, PredictorSet};
use crate::CliError;

pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Serialize, Deserialize)]
pub struct Envelope<T> {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub stage: String,
    pub payload: T,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CorpusPayload {
    pub inputs: InputDigests,
    pub corpus: Corpus,
    pub grades: GradeBook,
    pub groups: GroupAssignment,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct TypedPayload {
    /// Aligned with the ingested corpus turns.
    pub types: Vec<InteractionType>,
    pub element_counts: [u64; 11],
    pub type_counts: [u64; 8],
    pub group_element_counts: BTreeMap<Quartile, [u64; 11]>,
    pub group_type_counts: BTreeMap<Quartile, [u64; 8]>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct KappaPayload {
    pub rater_b_sha256: String,
    pub result: KappaResult,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct NetworkPayload {
    pub granularity: Granularity,
    pub pooling: Pooling,
    pub edge_threshold: f64,
    /// One network per quartile with chats, labelled by quartile.
    pub networks: Vec<TransitionNetwork>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ComparisonPayload {
    pub groups: (Quartile, Quartile),
    pub permutation: PermutationConfig,
    pub edge_threshold: f64,
    pub edges: Vec<EdgeComparison>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ResidualPayload {
    pub pair: ResidualReport,
    /// All four quartiles, when every quartile has codes.
    pub all_groups: Option<ResidualReport>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct PatternPayload {
    pub groups: (Quartile, Quartile),
    pub config: PatternConfig,
    pub patterns: Vec<PatternStats>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegressPayload {
    pub normalization: Normalization,
    pub predictors: PredictorSet,
    pub vif_threshold: f64,
    pub dropped: Vec<DroppedPredictor>,
    pub summary: RegressionSummary,
    pub warnings: Vec<String>,
}

/// Artifact file names inside the output directory.
pub struct Layout {
    pub dir: PathBuf,
}

impl Layout {
    pub fn new(dir: &Path) -> Self {
        Layout { dir: dir.to_path_buf() }
    }

    pub fn corpus(&self) -> PathBuf {
        self.dir.join("corpus.json")
    }

    pub fn typed(&self) -> PathBuf {
        self.dir.join("typed.json")
    }

    pub fn kappa(&self) -> PathBuf {
        self.dir.join("kappa.json")
    }

    pub fn per_granularity(&self, stem: &str, g: Granularity, ext: &str) -> PathBuf {
        self.dir.join(format!("{stem}_{}.{ext}", g.as_str()))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.dir.join("report")
    }
}

/// Which command produces an artifact, for remediation hints.
pub fn producer(path: &Path) -> &'static str {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
    match name.split(['_', '.']).next().unwrap_or("") {
        "corpus" => "ingest",
        "typed" => "classify",
        "kappa" => "kappa",
        "network" => "fit",
        "comparison" => "compare",
        "residuals" => "residuals",
        "patterns" => "patterns",
        "regress" => "regress",
        _ => "the producing stage",
    }
}

pub fn write_artifact<T: Serialize>(path: &Path, stage: &str, hash: &str, payload: &T) -> Result<(), CliError> {
    let env = Envelope {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        tool_version: TOOL_VERSION.to_string(),
        config_hash: hash.to_string(),
        stage: stage.to_string(),
        payload,
    };
    let text = serde_json::to_string_pretty(&env).expect("artifact serialises") + "\n";
    write_text(path, &text)
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Reads an artifact without checking its configuration hash.
pub fn read_unchecked<T: DeserializeOwned>(path: &Path) -> Result<Envelope<T>, CliError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CliError::MissingArtifact {
                path: path.to_path_buf(),
                hint: format!("run `helpseek {}` first", producer(path)),
            })
        }
        Err(e) => return Err(CliError::io(path, e)),
    };
    let env: Envelope<T> = serde_json::from_str(&text).map_err(|e| CliError::BadArtifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    if env.schema_version != ARTIFACT_SCHEMA_VERSION {
        return Err(CliError::BadArtifact {
            path: path.to_path_buf(),
            message: format!("schema version {} (expected {ARTIFACT_SCHEMA_VERSION})", env.schema_version),
        });
    }
    Ok(env)
}

/// Reads an artifact and insists it was produced under `hash`.
pub fn read_artifact<T: DeserializeOwned>(path: &Path, hash: &str) -> Result<T, CliError> {
    let env = read_unchecked::<T>(path)?;
    if env.config_hash != hash {
        return Err(CliError::StaleArtifact {
            path: path.to_path_buf(),
            found: env.config_hash,
            expected: hash.to_string(),
            hint: format!("rerun `helpseek {}` with the current flags and inputs", producer(path)),
        });
    }
    Ok(env.payload)
}

/// Like [`read_artifact`] but absent files are `None`.
pub fn read_optional<T: DeserializeOwned>(path: &Path, hash: &str) -> Result<Option<T>, CliError> {
    if path.exists() {
        read_artifact(path, hash).map(Some)
    } else {
        Ok(None)
    }
}
