use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};

use super::{format_significant, nonfinite, vif, FeatureMatrix, RegressError, Result, VifEntry};

/// Relative size below which a QR pivot marks a column as dependent.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    #[serde(with = "nonfinite")]
    pub estimate: f64,
    #[serde(with = "nonfinite")]
    pub std_error: f64,
    #[serde(with = "nonfinite")]
    pub t_value: f64,
    #[serde(with = "nonfinite")]
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionSummary {
    pub n: usize,
    /// Intercept first, then predictors in design order.
    pub coefficients: Vec<Coefficient>,
    #[serde(with = "nonfinite")]
    pub residual_std_error: f64,
    pub df_model: usize,
    pub df_residual: usize,
    #[serde(with = "nonfinite")]
    pub r_squared: f64,
    #[serde(with = "nonfinite")]
    pub adj_r_squared: f64,
    /// Overall F test; absent for an intercept-only model.
    #[serde(with = "nonfinite::option")]
    pub f_statistic: Option<f64>,
    #[serde(with = "nonfinite::option")]
    pub f_p_value: Option<f64>,
    pub vif: Vec<VifEntry>,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl RegressionSummary {
    pub fn coefficient(&self, name: &str) -> Option<&Coefficient> {
        self.coefficients.iter().find(|c| c.name == name)
    }
}

pub(crate) const INTERCEPT: &str = "(Intercept)";

/// Ordinary least squares with intercept, solved by Householder QR.
pub fn fit_ols(features: &FeatureMatrix) -> Result<RegressionSummary> {
    let n = features.n_rows();
    let p = features.n_predictors();
    if n == 0 {
        return Err(RegressError::Empty);
    }
    if n <= p + 1 {
        return Err(RegressError::TooFewRows {
            rows: n,
            predictors: p,
        });
    }
    let x = DMatrix::from_fn(n, p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            features.columns()[j - 1][i]
        }
    });
    let y = DVector::from_column_slice(features.response());

    let qr = x.clone().qr();
    let r = qr.r();
    let dependent: Vec<String> = (0..=p)
        .filter(|&j| {
            let norm = x.column(j).norm();
            norm == 0.0 || r[(j, j)].abs() <= RANK_TOL * norm
        })
        .map(|j| column_name(features, j))
        .collect();
    if !dependent.is_empty() {
        return Err(RegressError::RankDeficient(dependent));
    }

    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .expect("non-singular after rank check");
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p + 1, p + 1))
        .expect("non-singular after rank check");
    let fitted = &x * &beta;
    let residuals = &y - &fitted;

    let df_residual = n - p - 1;
    let rss = residuals.norm_squared();
    let sigma2 = rss / df_residual as f64;
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    let r_squared = if tss > 0.0 { 1.0 - rss / tss } else { 1.0 };
    let adj_r_squared = 1.0 - (1.0 - r_squared) * (n - 1) as f64 / df_residual as f64;

    let t_dist = StudentsT::new(0.0, 1.0, df_residual as f64).expect("positive df");
    let coefficients = (0..=p)
        .map(|j| {
            // diag((X'X)^-1) = squared row norms of R^-1.
            let var = sigma2 * r_inv.row(j).norm_squared();
            let std_error = var.sqrt();
            let t_value = beta[j] / std_error;
            let p_value = if t_value.is_nan() {
                1.0
            } else {
                (2.0 * t_dist.sf(t_value.abs())).min(1.0)
            };
            Coefficient {
                name: column_name(features, j),
                estimate: beta[j],
                std_error,
                t_value,
                p_value,
            }
        })
        .collect();

    let (f_statistic, f_p_value) = if p == 0 {
        (None, None)
    } else {
        let f = ((tss - rss) / p as f64) / sigma2;
        let pv = if f.is_finite() {
            FisherSnedecor::new(p as f64, df_residual as f64)
                .expect("positive df")
                .sf(f.max(0.0))
        } else {
            0.0
        };
        (Some(f), Some(pv))
    };

    let vif = if p >= 2 {
        vif(features)
    } else {
        features
            .names()
            .iter()
            .map(|name| VifEntry {
                name: name.clone(),
                vif: 1.0,
                collinear: false,
            })
            .collect()
    };

    Ok(RegressionSummary {
        n,
        coefficients,
        residual_std_error: sigma2.sqrt(),
        df_model: p,
        df_residual,
        r_squared,
        adj_r_squared,
        f_statistic,
        f_p_value,
        vif,
        fitted: fitted.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
    })
}

fn column_name(features: &FeatureMatrix, j: usize) -> String {
    if j == 0 {
        INTERCEPT.to_string()
    } else {
        features.names()[j - 1].clone()
    }
}

fn significance_code(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "."
    } else {
        ""
    }
}

fn format_p(p: f64) -> String {
    let value = if p < 0.001 { "<0.001".to_string() } else { format!("{p:.3}") };
    value + significance_code(p)
}

/// Coefficient table (`Variable, Estimate, Std. Error, t value, p value`)
/// followed by a notes block with fit statistics and VIFs.
pub fn render_regression_table(summary: &RegressionSummary) -> String {
    let mut out = String::from("Variable\tEstimate\tStd. Error\tt value\tp value\n");
    for c in &summary.coefficients {
        writeln!(
            out,
            "{}\t{:.4}\t{:.4}\t{:.2}\t{}",
            c.name,
            c.estimate,
            c.std_error,
            c.t_value,
            format_p(c.p_value)
        )
        .unwrap();
    }
    out.push('\n');
    writeln!(
        out,
        "Residual standard error: {} on {} degrees of freedom",
        format_significant(summary.residual_std_error, 3),
        summary.df_residual
    )
    .unwrap();
    writeln!(
        out,
        "Multiple R^2: {}, Adjusted R^2: {}",
        format_significant(summary.r_squared, 3),
        format_significant(summary.adj_r_squared, 3)
    )
    .unwrap();
    if let (Some(f), Some(pv)) = (summary.f_statistic, summary.f_p_value) {
        writeln!(
            out,
            "F-statistic: {} on {} and {} DF, p-value: {}",
            format_significant(f, 3),
            summary.df_model,
            summary.df_residual,
            format_significant(pv, 2)
        )
        .unwrap();
    }
    out.push_str("Significance codes: ***p<0.001, **p<0.01, *p<0.05, .p<0.1\n");
    if !summary.vif.is_empty() {
        let parts: Vec<String> = summary
            .vif
            .iter()
            .map(|v| {
                if v.vif.is_finite() {
                    format!("{} = {:.2}", v.name, v.vif)
                } else {
                    format!("{} = Inf", v.name)
                }
            })
            .collect();
        writeln!(out, "VIF values: {}", parts.join(", ")).unwrap();
    }
    out
}
