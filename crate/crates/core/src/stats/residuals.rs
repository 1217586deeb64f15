use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    chi_square_sf, pearson_chi_square, permutation_p, replicate_rng, with_workers, Result,
    StatsError, TIE_EPS,
};

/// Group-by-code count table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ContingencyTable {
    pub fn new(row_labels: Vec<String>, col_labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        if row_labels.len() < 2 {
            return Err(StatsError::Shape("need at least two groups".into()));
        }
        if counts.len() != row_labels.len() || counts.iter().any(|r| r.len() != col_labels.len()) {
            return Err(StatsError::Shape(format!(
                "{} labels x {} codes does not match the count matrix",
                row_labels.len(),
                col_labels.len()
            )));
        }
        if let Some(i) = counts.iter().position(|r| r.iter().sum::<u64>() == 0) {
            return Err(StatsError::EmptyGroup(row_labels[i].clone()));
        }
        Ok(ContingencyTable {
            row_labels,
            col_labels,
            counts,
        })
    }

    /// Two-group table from aligned count vectors.
    pub fn two_groups(
        label_a: &str,
        counts_a: &[u64],
        label_b: &str,
        counts_b: &[u64],
        codes: &[String],
    ) -> Result<Self> {
        ContingencyTable::new(
            vec![label_a.to_string(), label_b.to_string()],
            codes.to_vec(),
            vec![counts_a.to_vec(), counts_b.to_vec()],
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub observed: Vec<Vec<u64>>,
    pub expected: Vec<Vec<f64>>,
    /// `(O - E) / sqrt(E)`; `None` for excluded zero-margin codes.
    pub residuals: Vec<Vec<Option<f64>>>,
    pub cell_p: Vec<Vec<Option<f64>>>,
    /// Codes with a zero column margin.
    pub excluded: Vec<String>,
    pub chi_square: f64,
    pub df: usize,
    /// Asymptotic chi-square p-value.
    pub p_global: f64,
    /// Permutation p-value of the chi-square statistic.
    pub p_global_perm: f64,
    pub n_perm: usize,
}

/// Pearson residuals with permutation p-values per cell.
///
/// The null shuffles group labels over individual code occurrences, which
/// keeps both margins fixed. Rows are shuffled in a canonical order (sorted
/// by their count vectors) so relabelling the groups does not change any
/// p-value.
pub fn residual_analysis(
    table: &ContingencyTable,
    n_perm: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<ResidualReport> {
    if n_perm == 0 {
        return Err(StatsError::NoPermutations);
    }
    let rows = table.counts.len();
    let cols = table.col_labels.len();
    let obs: Vec<Vec<f64>> = table
        .counts
        .iter()
        .map(|r| r.iter().map(|&c| c as f64).collect())
        .collect();
    let total: f64 = obs.iter().flatten().sum();
    let row_tot: Vec<f64> = obs.iter().map(|r| r.iter().sum()).collect();
    let col_tot: Vec<f64> = (0..cols).map(|j| obs.iter().map(|r| r[j]).sum()).collect();
    let expected: Vec<Vec<f64>> = (0..rows)
        .map(|i| (0..cols).map(|j| row_tot[i] * col_tot[j] / total).collect())
        .collect();
    let kept: Vec<bool> = col_tot.iter().map(|&c| c > 0.0).collect();
    let deviation = |i: usize, j: usize, o: f64| o - expected[i][j];

    let (chi_square, df) = pearson_chi_square(&obs);
    let p_global = chi_square_sf(chi_square, df);

    // canonical[k] = original row index of the k-th canonical row
    let mut canonical: Vec<usize> = (0..rows).collect();
    canonical.sort_by(|&x, &y| table.counts[x].cmp(&table.counts[y]));
    let mut labels: Vec<usize> = Vec::with_capacity(total as usize);
    let mut token_cols: Vec<usize> = Vec::with_capacity(total as usize);
    for j in 0..cols {
        for &i in &canonical {
            for _ in 0..table.counts[i][j] {
                labels.push(i);
                token_cols.push(j);
            }
        }
    }

    let (cell_exceed, global_exceed) = with_workers(workers, || {
        (0..n_perm)
            .into_par_iter()
            .fold(
                || (vec![0u64; rows * cols], 0u64, labels.clone(), vec![vec![0.0; cols]; rows]),
                |(mut cells, mut global, mut perm, mut t), r| {
                    perm.copy_from_slice(&labels);
                    perm.shuffle(&mut replicate_rng(seed, r));
                    t.iter_mut().for_each(|row| row.fill(0.0));
                    for (&i, &j) in perm.iter().zip(&token_cols) {
                        t[i][j] += 1.0;
                    }
                    for i in 0..rows {
                        for j in (0..cols).filter(|&j| kept[j]) {
                            let d_star = deviation(i, j, t[i][j]);
                            let d_obs = deviation(i, j, obs[i][j]);
                            if d_star.abs() >= d_obs.abs() - TIE_EPS {
                                cells[i * cols + j] += 1;
                            }
                        }
                    }
                    if pearson_chi_square(&t).0 >= chi_square - TIE_EPS {
                        global += 1;
                    }
                    (cells, global, perm, t)
                },
            )
            .map(|(cells, global, _, _)| (cells, global))
            .reduce(
                || (vec![0u64; rows * cols], 0u64),
                |(mut a, ga), (b, gb)| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    (a, ga + gb)
                },
            )
    })?;

    let residuals = (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| kept[j].then(|| deviation(i, j, obs[i][j]) / expected[i][j].sqrt()))
                .collect()
        })
        .collect();
    let cell_p = (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| kept[j].then(|| permutation_p(cell_exceed[i * cols + j], n_perm)))
                .collect()
        })
        .collect();

    Ok(ResidualReport {
        row_labels: table.row_labels.clone(),
        col_labels: table.col_labels.clone(),
        observed: table.counts.clone(),
        expected,
        residuals,
        cell_p,
        excluded: (0..cols)
            .filter(|&j| !kept[j])
            .map(|j| table.col_labels[j].clone())
            .collect(),
        chi_square,
        df,
        p_global,
        p_global_perm: permutation_p(global_exceed, n_perm),
        n_perm,
    })
}

/// Mosaic-plot data: one `code, group, residual, p` row per cell.
pub fn render_mosaic(report: &ResidualReport) -> String {
    let mut out = String::from("code\tgroup\tobserved\texpected\tresidual\tp\n");
    for (j, code) in report.col_labels.iter().enumerate() {
        for (i, group) in report.row_labels.iter().enumerate() {
            let fmt = |v: Option<f64>, prec: usize| match v {
                Some(x) => format!("{x:.prec$}"),
                None => "NA".to_string(),
            };
            writeln!(
                out,
                "{code}\t{group}\t{}\t{:.2}\t{}\t{}",
                report.observed[i][j],
                report.expected[i][j],
                fmt(report.residuals[i][j], 3),
                fmt(report.cell_p[i][j], 4),
            )
            .unwrap();
        }
    }
    writeln!(
        out,
        "# x2({}) = {:.2}, p = {:.3}, permutation p = {:.4}",
        report.df, report.chi_square, report.p_global, report.p_global_perm
    )
    .unwrap();
    out
}
