//! Charge sectors: bisection on `μ` for a target generalized charge, and
//! `μ`-sweeps producing the energy curve `E(q)`.

use serde::{Deserialize, Serialize};

use super::{solve_with, Filling, MeanFieldProblem, Solution, SolverConfig};
use crate::error::{Error, Result};

/// Controls for the charge-constrained search.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChargeSearch {
    /// `|q − q_target|` accepted as a hit.
    pub charge_tolerance: f64,
    /// Bracket width below which the search switches to fractional filling.
    pub mu_tolerance: f64,
    /// The attainable window is probed at `μ = ±(1 − window_margin)`.
    pub window_margin: f64,
}

impl Default for ChargeSearch {
    fn default() -> Self {
        Self {
            charge_tolerance: 1e-8,
            mu_tolerance: 1e-3,
            window_margin: 1e-6,
        }
    }
}

/// Solves for the state of generalized charge `q_target` and returns it with
/// the chemical potential `μ*` (the Fermi level).
///
/// Bisection on `μ` with exclusive filling; once the bracket is narrower than
/// `mu_tolerance`, or a fixed-`μ` solve fails because `μ` sits on a level,
/// the charge is imposed directly with a fractionally filled Fermi cluster.
pub fn solve_charge_constrained(
    problem: &MeanFieldProblem,
    config: &SolverConfig,
    q_target: f64,
    search: &ChargeSearch,
) -> Result<(Solution, f64)> {
    config.validate()?;
    if !q_target.is_finite() {
        return Err(Error::param("q_target", "must be finite"));
    }
    let m = 1.0 - search.window_margin;
    let mut lo = solve_with(problem, config, Filling::FixedMu(-m), None)?;
    if (lo.charge - q_target).abs() < search.charge_tolerance {
        return Ok((lo, -m));
    }
    let mut hi = solve_with(problem, config, Filling::FixedMu(m), Some(&lo.rho))?;
    if (hi.charge - q_target).abs() < search.charge_tolerance {
        return Ok((hi, m));
    }
    if q_target < lo.charge || q_target > hi.charge {
        return Err(Error::OutsideChargeWindow {
            target: q_target,
            q_min: lo.charge,
            q_max: hi.charge,
        });
    }
    let (mut a, mut b) = (-m, m);
    while b - a >= search.mu_tolerance {
        let mid = 0.5 * (a + b);
        let seed = if (mid - a) < (b - mid) {
            &lo.rho
        } else {
            &hi.rho
        };
        let sol = match solve_with(problem, config, Filling::FixedMu(mid), Some(seed)) {
            Ok(s) => s,
            Err(Error::NotConverged(_)) => break,
            Err(e) => return Err(e),
        };
        if (sol.charge - q_target).abs() < search.charge_tolerance {
            return Ok((sol, mid));
        }
        if sol.charge < q_target {
            a = mid;
            lo = sol;
        } else {
            b = mid;
            hi = sol;
        }
    }
    let count = problem.vacuum().dimension() as f64 / 2.0 + q_target;
    let sol = solve_with(problem, config, Filling::FixedCount(count), Some(&hi.rho))?;
    let mu = sol.fermi.fermi_level;
    Ok((sol, mu))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub mu: f64,
    pub q: f64,
    pub energy: f64,
    pub converged: bool,
    pub iters: usize,
}

/// `(μᵢ, qᵢ, Eᵢ)` along a sweep.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyCurve {
    pub points: Vec<CurvePoint>,
}

impl EnergyCurve {
    pub fn charge_nondecreasing(&self) -> bool {
        let c: Vec<_> = self.points.iter().filter(|p| p.converged).collect();
        c.windows(2).all(|w| w[1].q >= w[0].q - 1e-8)
    }

    /// Converged points with distinct charges, sorted by `q` (duplicates at
    /// the same `q` keep the lowest energy).
    pub fn distinct_charges(&self, tol: f64) -> Vec<&CurvePoint> {
        let mut c: Vec<&CurvePoint> = self.points.iter().filter(|p| p.converged).collect();
        c.sort_by(|a, b| a.q.total_cmp(&b.q));
        let mut out: Vec<&CurvePoint> = Vec::new();
        for p in c {
            match out.last_mut() {
                Some(last) if (p.q - last.q).abs() <= tol => {
                    if p.energy < last.energy {
                        *last = p;
                    }
                }
                _ => out.push(p),
            }
        }
        out
    }

    /// Smallest discrete second difference of `E(q)` over distinct charges.
    pub fn min_second_difference(&self) -> Option<f64> {
        let d = self.distinct_charges(1e-8);
        d.windows(3)
            .map(|w| {
                let s1 = (w[1].energy - w[0].energy) / (w[1].q - w[0].q);
                let s2 = (w[2].energy - w[1].energy) / (w[2].q - w[1].q);
                s2 - s1
            })
            .reduce(f64::min)
    }
}

/// Solves at each `μ` in ascending order, warm-starting from the previous
/// converged density. Failures are recorded and the sweep continues.
pub fn mu_sweep(
    problem: &MeanFieldProblem,
    mu_grid: &[f64],
    config: &SolverConfig,
) -> Result<EnergyCurve> {
    config.validate()?;
    if mu_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::param(
            "mu_grid",
            "sweep values must be sorted ascending",
        ));
    }
    let mut curve = EnergyCurve::default();
    let mut warm = None;
    for &mu in mu_grid {
        let cfg = SolverConfig {
            mu,
            ..config.clone()
        };
        cfg.validate()?;
        match solve_with(problem, &cfg, Filling::FixedMu(mu), warm.as_ref()) {
            Ok(sol) => {
                curve.points.push(CurvePoint {
                    mu,
                    q: sol.charge,
                    energy: sol.energy.total,
                    converged: true,
                    iters: sol.iterations,
                });
                warm = Some(sol.rho);
            }
            Err(Error::NotConverged(diag)) => {
                curve.points.push(CurvePoint {
                    mu,
                    q: f64::NAN,
                    energy: f64::NAN,
                    converged: false,
                    iters: diag.iterations,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(curve)
}
