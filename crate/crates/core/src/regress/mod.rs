//! Grade regression on per-student interaction-feature proportions.
//!
//! [`feature_proportions`] turns a corpus into a student-by-feature matrix,
//! [`vif_filter`] removes multicollinear predictors (or applies a fixed keep
//! list) and [`fit_ols`] fits an ordinary least-squares model with intercept.

mod features;
mod ols;
mod vif;

use thiserror::Error;

pub use features::{feature_proportions, FeatureMatrix, FeatureSource, Normalization};
pub use ols::{fit_ols, render_regression_table, Coefficient, RegressionSummary};
pub use vif::{vif, vif_filter, DroppedPredictor, VifEntry, VifReport};

/// Default VIF cut-off for iterative filtering.
pub const DEFAULT_VIF_THRESHOLD: f64 = 5.0;

/// Element-model predictors (every element except Example).
pub const ELEMENT_PRESET: [&str; 10] = [
    "Error",
    "Code",
    "Exploration",
    "Results",
    "Assignment",
    "Request",
    "Instruction",
    "Feedback",
    "Explanation",
    "Solution",
];

/// Type-model predictors.
pub const TYPE_PRESET: [&str; 5] = ["Debug", "Inquire", "Integrate", "Evaluator", "Executor"];

#[derive(Debug, Error, PartialEq)]
pub enum RegressError {
    #[error("student `{0}` has no grade")]
    UngradedStudent(String),
    #[error("unknown predictor `{0}`")]
    UnknownPredictor(String),
    #[error("need more rows than predictors + 1 (rows = {rows}, predictors = {predictors})")]
    TooFewRows { rows: usize, predictors: usize },
    #[error("design matrix is rank deficient; dependent columns: {}", .0.join(", "))]
    RankDeficient(Vec<String>),
    #[error("VIF filtering needs at least 2 predictors, got {0}")]
    TooFewPredictors(usize),
    #[error("feature matrix is malformed: {0}")]
    Shape(String),
    #[error("no students to regress on")]
    Empty,
}

pub type Result<T> = std::result::Result<T, RegressError>;

/// Serialises non-finite floats as the strings `"Inf"`, `"-Inf"` and `"NaN"`
/// so that summaries of exact fits survive a JSON round trip.
pub(crate) mod nonfinite {
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Token(String),
    }

    fn token(v: f64) -> &'static str {
        if v.is_nan() {
            "NaN"
        } else if v > 0.0 {
            "Inf"
        } else {
            "-Inf"
        }
    }

    fn parse<E: de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Number(v) => Ok(v),
            Repr::Token(t) => match t.as_str() {
                "Inf" => Ok(f64::INFINITY),
                "-Inf" => Ok(f64::NEG_INFINITY),
                "NaN" => Ok(f64::NAN),
                other => Err(E::custom(format!("unexpected float token `{other}`"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(token(*v))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        parse(Repr::deserialize(d)?)
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
            match v {
                Some(x) => super::serialize(x, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
            Option::<Repr>::deserialize(d)?.map(parse).transpose()
        }
    }
}

/// `x` rounded to `digits` significant digits, trailing zeros removed.
pub fn format_significant(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "Inf".into() } else { "-Inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let mut s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit (0.0999 -> 0.100); the
    // extra trailing digit is a zero and is stripped below.
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}
