// SPDX-License-Identifier: MIT OR Apache-2.0

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::finding::{Finding, FindingKind};
use crate::error::{Error, Result};
use crate::model::GriddedSeries;
use crate::stats::pearson;

pub const MIN_COLLINEAR_ROWS: usize = 30;
const SINGULAR_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollinearParams {
    pub rho_threshold: f64,
    pub vif_threshold: f64,
}

impl Default for CollinearParams {
    fn default() -> Self {
        CollinearParams {
            rho_threshold: 0.95,
            vif_threshold: 10.0,
        }
    }
}

/// Rows where every series has a value (listwise deletion).
fn complete_rows(series: &[GriddedSeries]) -> Vec<Vec<f64>> {
    let n = series[0].len();
    (0..n)
        .filter_map(|k| series.iter().map(|s| s.values()[k]).collect::<Option<Vec<f64>>>())
        .collect()
}

/// Variance inflation factor of column `j` against all other columns plus an intercept.
/// `None` when column `j` is constant.
pub fn vif(rows: &[Vec<f64>], j: usize) -> Option<f64> {
    let n = rows.len();
    let p = rows.first()?.len();
    let y = DVector::from_iterator(n, rows.iter().map(|r| r[j]));
    let mean = y.mean();
    let ss_tot: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if ss_tot <= 0.0 {
        return None;
    }
    let x = DMatrix::from_fn(n, p, |i, c| match c {
        0 => 1.0,
        c if c <= j => rows[i][c - 1],
        c => rows[i][c],
    });
    let beta = x.clone().svd(true, true).solve(&y, 1e-12).ok()?;
    let ss_res = (y - x * beta).norm_squared();
    let one_minus_r2 = ss_res / ss_tot;
    Some(if one_minus_r2 <= SINGULAR_TOL {
        f64::INFINITY
    } else {
        1.0 / one_minus_r2
    })
}

/// Series must share a grid. Pairs with |rho| above the threshold and tags whose
/// VIF exceeds the threshold each produce one finding.
pub fn flag_collinear(series: &[GriddedSeries], p: &CollinearParams) -> Result<Vec<Finding>> {
    if series.len() < 2 {
        return Ok(Vec::new());
    }
    if let Some(s) = series.iter().find(|s| !s.same_grid(&series[0])) {
        return Err(Error::validation(format!(
            "{} is not on the grid of {}",
            s.tag(),
            series[0].tag()
        )));
    }
    let rows = complete_rows(series);
    if rows.len() < MIN_COLLINEAR_ROWS {
        return Err(Error::not_enough(format!(
            "collinearity check needs {MIN_COLLINEAR_ROWS} co-present rows, found {}",
            rows.len()
        )));
    }
    let mut out = Vec::new();
    for a in 0..series.len() {
        for b in a + 1..series.len() {
            let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r[a], r[b])).collect();
            let Some(rho) = pearson(&pairs) else { continue };
            if rho.abs() > p.rho_threshold {
                let (ta, tb) = (series[a].tag(), series[b].tag());
                out.push(
                    Finding::new(
                        FindingKind::Collinear,
                        vec![ta.clone(), tb.clone()],
                        format!("{ta} and {tb} correlate at {rho:.4}; one is likely redundant"),
                    )
                    .with_evidence("rho", rho)
                    .with_evidence("rows", rows.len() as f64),
                );
            }
        }
    }
    for (j, s) in series.iter().enumerate() {
        let Some(v) = vif(&rows, j) else { continue };
        if v > p.vif_threshold {
            out.push(
                Finding::new(
                    FindingKind::Collinear,
                    vec![s.tag().clone()],
                    format!("{} has variance inflation factor {v:.2}", s.tag()),
                )
                .with_evidence("vif", v)
                .with_evidence("rows", rows.len() as f64),
            );
        }
    }
    Ok(out)
}
