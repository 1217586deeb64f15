use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{nonfinite, FeatureMatrix, RegressError, Result};

/// `1 - R^2_j` at or below this counts as perfect collinearity.
const COLLINEAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifEntry {
    pub name: String,
    /// `+inf` under perfect collinearity.
    #[serde(with = "nonfinite")]
    pub vif: f64,
    pub collinear: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedPredictor {
    pub name: String,
    #[serde(with = "nonfinite")]
    pub vif: f64,
    pub collinear: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VifReport {
    pub matrix: FeatureMatrix,
    /// VIFs of the retained predictors.
    pub vif: Vec<VifEntry>,
    /// Removed predictors in removal order, with their VIF at removal time.
    pub dropped: Vec<DroppedPredictor>,
}

/// `RSS / TSS` of `y` regressed (with intercept) on `xs`. Columns are
/// centred and scaled to unit norm, and the least-squares solve goes through
/// an SVD so collinearity among `xs` is harmless.
fn unexplained_share(y: &[f64], xs: &[&[f64]]) -> f64 {
    let n = y.len();
    let centre = |v: &[f64]| {
        let mean = v.iter().sum::<f64>() / n as f64;
        v.iter().map(|x| x - mean).collect::<Vec<f64>>()
    };
    let yc = DVector::from_vec(centre(y));
    let tss = yc.norm_squared();
    if tss == 0.0 {
        // A constant predictor is a multiple of the intercept.
        return 0.0;
    }
    let cols: Vec<DVector<f64>> = xs
        .iter()
        .map(|c| DVector::from_vec(centre(c)))
        .filter(|c| c.norm() > 0.0)
        .map(|c| c.normalize())
        .collect();
    if cols.is_empty() {
        return 1.0;
    }
    let x = DMatrix::from_columns(&cols);
    let svd = x.clone().svd(true, true);
    let eps = svd.singular_values.max() * 1e-12 * n.max(cols.len()) as f64;
    let beta = svd.solve(&yc, eps).expect("u and v were computed");
    ((&yc - &x * beta).norm_squared() / tss).clamp(0.0, 1.0)
}

fn entry(name: &str, unexplained: f64) -> VifEntry {
    let collinear = unexplained <= COLLINEAR_TOL;
    VifEntry {
        name: name.to_string(),
        vif: if collinear { f64::INFINITY } else { 1.0 / unexplained },
        collinear,
    }
}

/// Variance inflation factor of every predictor against the others.
pub fn vif(features: &FeatureMatrix) -> Vec<VifEntry> {
    let cols = features.columns();
    (0..cols.len())
        .map(|j| {
            let others: Vec<&[f64]> = cols
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, c)| c.as_slice())
                .collect();
            entry(&features.names()[j], unexplained_share(&cols[j], &others))
        })
        .collect()
}

/// With `keep`, restricts the matrix to those predictors and reports their
/// VIFs. Otherwise repeatedly drops the highest-VIF predictor (the later one
/// on ties, so a duplicated column loses its second copy) while any VIF
/// exceeds `threshold`.
pub fn vif_filter<S: AsRef<str>>(
    features: &FeatureMatrix,
    threshold: f64,
    keep: Option<&[S]>,
) -> Result<VifReport> {
    if let Some(keep) = keep {
        let matrix = features.select(keep)?;
        if matrix.n_predictors() < 2 {
            return Err(RegressError::TooFewPredictors(matrix.n_predictors()));
        }
        return Ok(VifReport {
            vif: vif(&matrix),
            matrix,
            dropped: Vec::new(),
        });
    }
    if features.n_predictors() < 2 {
        return Err(RegressError::TooFewPredictors(features.n_predictors()));
    }
    let mut matrix = features.clone();
    let mut dropped = Vec::new();
    loop {
        let current = vif(&matrix);
        if matrix.n_predictors() < 2 {
            return Ok(VifReport {
                vif: current,
                matrix,
                dropped,
            });
        }
        let (worst, top) = current
            .iter()
            .enumerate()
            .fold((0, &current[0]), |best, (j, e)| if e.vif >= best.1.vif { (j, e) } else { best });
        if top.vif <= threshold {
            return Ok(VifReport {
                vif: current,
                matrix,
                dropped,
            });
        }
        dropped.push(DroppedPredictor {
            name: top.name.clone(),
            vif: top.vif,
            collinear: top.collinear,
        });
        matrix = matrix.without(worst);
    }
}
