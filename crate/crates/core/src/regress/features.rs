use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{RegressError, Result};
use crate::codes::{InteractionType, TypedCorpus};
use crate::corpus::{Actor, Corpus, ElementCode, GradeBook, Loaded};

/// Denominator used when turning per-student code counts into proportions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Occurrences over the student's code occurrences of the same actor class.
    ActorClass,
    /// Occurrences over all of the student's code occurrences.
    #[default]
    AllCodes,
    /// Occurrences over the student's messages of the same actor class.
    PerMessage,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::ActorClass => "actor-class",
            Normalization::AllCodes => "all-codes",
            Normalization::PerMessage => "per-message",
        })
    }
}

impl FromStr for Normalization {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "actor-class" | "actor_class" => Ok(Normalization::ActorClass),
            "all-codes" | "all_codes" => Ok(Normalization::AllCodes),
            "per-message" | "per_message" => Ok(Normalization::PerMessage),
            other => Err(format!("unknown normalization `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum FeatureSource<'a> {
    Elements(&'a Corpus),
    Types(&'a TypedCorpus),
}

/// Students (rows, in id order) by named predictors, with the response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    student_ids: Vec<String>,
    names: Vec<String>,
    /// Column-major values, one vector per predictor.
    columns: Vec<Vec<f64>>,
    response: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        student_ids: Vec<String>,
        names: Vec<String>,
        columns: Vec<Vec<f64>>,
        response: Vec<f64>,
    ) -> Result<Self> {
        let n = response.len();
        if student_ids.len() != n {
            return Err(RegressError::Shape(format!(
                "{} row ids for {n} responses",
                student_ids.len()
            )));
        }
        if names.len() != columns.len() {
            return Err(RegressError::Shape(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some((name, c)) = names.iter().zip(&columns).find(|(_, c)| c.len() != n) {
            return Err(RegressError::Shape(format!(
                "column `{name}` has {} rows, expected {n}",
                c.len()
            )));
        }
        let finite = columns.iter().flatten().chain(&response).all(|v| v.is_finite());
        if !finite {
            return Err(RegressError::Shape("non-finite value".into()));
        }
        Ok(FeatureMatrix {
            student_ids,
            names,
            columns,
            response,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.response.len()
    }

    pub fn n_predictors(&self) -> usize {
        self.names.len()
    }

    pub fn student_ids(&self) -> &[String] {
        &self.student_ids
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let j = self.names.iter().position(|n| n == name)?;
        Some(&self.columns[j])
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    /// The named predictors, in the order given.
    pub fn select<S: AsRef<str>>(&self, keep: &[S]) -> Result<FeatureMatrix> {
        let mut names = Vec::with_capacity(keep.len());
        let mut columns = Vec::with_capacity(keep.len());
        for k in keep {
            let k = k.as_ref();
            let j = self
                .names
                .iter()
                .position(|n| n == k)
                .ok_or_else(|| RegressError::UnknownPredictor(k.to_string()))?;
            names.push(self.names[j].clone());
            columns.push(self.columns[j].clone());
        }
        Ok(FeatureMatrix {
            student_ids: self.student_ids.clone(),
            names,
            columns,
            response: self.response.clone(),
        })
    }

    pub(crate) fn without(&self, j: usize) -> FeatureMatrix {
        let mut out = self.clone();
        out.names.remove(j);
        out.columns.remove(j);
        out
    }
}

/// Per-student feature proportions with grades as the response.
///
/// Element features are named by their capitalised code (`Error`, `Code`, ...),
/// type features by the type name. A student without any code of one actor
/// class gets zeros for that class and a warning.
pub fn feature_proportions(
    source: FeatureSource<'_>,
    grades: &GradeBook,
    normalization: Normalization,
) -> Result<Loaded<FeatureMatrix>> {
    let corpus = match source {
        FeatureSource::Elements(c) => c,
        FeatureSource::Types(t) => t.base(),
    };
    let (names, actors): (Vec<String>, Vec<Actor>) = match source {
        FeatureSource::Elements(_) => ElementCode::ALL
            .iter()
            .map(|e| (e.title().to_string(), e.actor()))
            .unzip(),
        FeatureSource::Types(_) => InteractionType::ALL
            .iter()
            .map(|t| (t.name().to_string(), t.actor()))
            .unzip(),
    };
    let n_features = names.len();

    struct Tally {
        counts: Vec<u64>,
        messages: [u64; 2],
    }
    let class = |a: Actor| usize::from(a == Actor::Ai);
    let mut tallies: BTreeMap<&str, Tally> = corpus
        .student_ids()
        .map(|s| {
            (
                s,
                Tally {
                    counts: vec![0; n_features],
                    messages: [0; 2],
                },
            )
        })
        .collect();
    for (i, turn) in corpus.turns().iter().enumerate() {
        let tally = tallies.get_mut(turn.student_id.as_str()).expect("indexed student");
        tally.messages[class(turn.actor)] += 1;
        match source {
            FeatureSource::Elements(_) => {
                for e in &turn.elements {
                    tally.counts[e.index()] += 1;
                }
            }
            FeatureSource::Types(t) => tally.counts[t.types()[i].index()] += 1,
        }
    }
    if tallies.is_empty() {
        return Err(RegressError::Empty);
    }

    let mut warnings = Vec::new();
    let mut student_ids = Vec::with_capacity(tallies.len());
    let mut response = Vec::with_capacity(tallies.len());
    let mut columns = vec![Vec::with_capacity(tallies.len()); n_features];
    for (student, tally) in &tallies {
        let grade = grades
            .get(student)
            .ok_or_else(|| RegressError::UngradedStudent(student.to_string()))?;
        let mut class_codes = [0u64; 2];
        for (j, &c) in tally.counts.iter().enumerate() {
            class_codes[class(actors[j])] += c;
        }
        for actor in [Actor::Student, Actor::Ai] {
            if class_codes[class(actor)] == 0 {
                warnings.push(format!(
                    "student `{student}` has no {} codes; their {} features are zero",
                    actor.as_str(),
                    actor.as_str()
                ));
            }
        }
        let total: u64 = class_codes.iter().sum();
        for (j, &c) in tally.counts.iter().enumerate() {
            let k = class(actors[j]);
            let denom = match normalization {
                Normalization::ActorClass => class_codes[k],
                Normalization::AllCodes => total,
                Normalization::PerMessage => tally.messages[k],
            };
            columns[j].push(if denom == 0 { 0.0 } else { c as f64 / denom as f64 });
        }
        student_ids.push(student.to_string());
        response.push(grade);
    }
    Ok(Loaded {
        value: FeatureMatrix::new(student_ids, names, columns, response)?,
        warnings,
    })
}
