//! Occupation numbers of mean-field eigenstates: exclusive filling below a
//! chemical potential, or aufbau filling of a prescribed particle count with
//! fractional occupation shared by a degenerate Fermi cluster.

use serde::{Deserialize, Serialize};

use crate::operator::DEGENERACY_TOL;

/// How the occupied subspace is selected.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode", content = "value")]
pub enum Filling {
    /// `χ_(−∞, μ)`; eigenvalues tied with `μ` stay empty.
    FixedMu(f64),
    /// Total occupation `Tr P`, i.e. `2M + q`.
    FixedCount(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FractionalLevel {
    pub eigenvalue: f64,
    pub multiplicity: usize,
    pub occupation: f64,
}

/// What happened at the Fermi level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FermiReport {
    pub filling: Filling,
    /// Chemical potential consistent with the occupations.
    pub fermi_level: f64,
    pub tolerance: f64,
    /// Eigenvalues within `tolerance` of `μ` left empty (fixed-μ mode).
    pub tied: Vec<f64>,
    /// Partially filled cluster (fixed-count mode).
    pub fractional: Option<FractionalLevel>,
}

/// Occupations for ascending eigenvalues.
pub fn occupations(values: &[f64], filling: Filling) -> (Vec<f64>, FermiReport) {
    let width = match (values.first(), values.last()) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };
    let tol = DEGENERACY_TOL * width;
    match filling {
        Filling::FixedMu(mu) => {
            let occ = values
                .iter()
                .map(|&l| if l < mu - tol { 1.0 } else { 0.0 })
                .collect();
            let tied = values
                .iter()
                .copied()
                .filter(|l| (l - mu).abs() <= tol)
                .collect();
            (
                occ,
                FermiReport {
                    filling,
                    fermi_level: mu,
                    tolerance: tol,
                    tied,
                    fractional: None,
                },
            )
        }
        Filling::FixedCount(target) => {
            let n = values.len();
            let target = target.clamp(0.0, n as f64);
            let mut occ = vec![0.0; n];
            let mut filled = 0.0;
            let mut start = 0;
            let mut fractional = None;
            let mut fermi = f64::NAN;
            while start < n {
                let mut end = start + 1;
                while end < n && values[end] - values[end - 1] <= tol {
                    end += 1;
                }
                let size = (end - start) as f64;
                let room = target - filled;
                if room <= 1e-12 {
                    // Cluster boundary coincides with the target: μ anywhere in the gap.
                    let below = if start > 0 {
                        values[start - 1]
                    } else {
                        values[start] - 1.0
                    };
                    fermi = 0.5 * (below + values[start]);
                    break;
                }
                if room >= size - 1e-12 {
                    occ[start..end].iter_mut().for_each(|o| *o = 1.0);
                    filled += size;
                } else {
                    let f = room / size;
                    occ[start..end].iter_mut().for_each(|o| *o = f);
                    let mean = values[start..end].iter().sum::<f64>() / size;
                    fermi = mean;
                    fractional = Some(FractionalLevel {
                        eigenvalue: mean,
                        multiplicity: end - start,
                        occupation: f,
                    });
                    start = end;
                    break;
                }
                start = end;
            }
            if fermi.is_nan() {
                fermi = if start >= n {
                    values.last().map_or(0.0, |v| v + 1.0)
                } else {
                    values[start]
                };
            }
            (
                occ,
                FermiReport {
                    filling,
                    fermi_level: fermi,
                    tolerance: tol,
                    tied: Vec::new(),
                    fractional,
                },
            )
        }
    }
}
