//! Perturbative structure of the renormalized density: the Uehling term,
//! numerical Taylor coefficients `ν_{n,Λ}` in `α_ph`, and the scaling study
//! of the truncation error at fixed `κ`.

mod uehling;

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use uehling::{
    uehling_density, uehling_potential, uehling_weight, RadialGaussian, UehlingTable,
};

use crate::density::ChargeDensity;
use crate::error::{Error, Result};
use crate::lattice::MomentumGrid;
use crate::renorm::{alpha_bare, b_lambda, RenormalizationPoint};
use crate::scf::{solve_signed, Filling, MeanFieldProblem, SolverConfig};

/// Highest coefficient the `{0, ±h/2, ±h, ±2h}` ladder supports.
pub const MAX_ORDER: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionMeta {
    pub cutoff: f64,
    pub b_lambda: f64,
    pub step: f64,
    /// Physical couplings at which the solver was run.
    pub ladder: Vec<f64>,
    /// Richardson steps applied to the central differences.
    pub richardson_order: usize,
    /// `‖D(h) − D(h/2)‖ / ‖ν_n‖` per coefficient, a conditioning indicator.
    pub condition: Vec<f64>,
}

/// `ν_{0..n_max}` at fixed `Λ`, with `ρ_ph = Σ ν_n α_phⁿ + …`.
#[derive(Clone, Debug)]
pub struct SeriesCoefficients {
    pub coefficients: Vec<ChargeDensity>,
    pub meta: ExtractionMeta,
}

impl SeriesCoefficients {
    /// `Σ_{n ≤ n_max} ν_n α_phⁿ`.
    pub fn resum(&self, alpha_ph: f64) -> Result<ChargeDensity> {
        let mut acc = ChargeDensity::zeros(self.coefficients[0].lattice());
        for (n, c) in self.coefficients.iter().enumerate() {
            acc = acc.combine(1.0, c, alpha_ph.powi(n as i32))?;
        }
        Ok(acc)
    }
}

/// `ρ_ph(α_ph) = (1 + αB)(ν − ρ_Q(α))` with `α = α_ph/(1 − α_ph B)`, any sign of `α_ph`.
pub fn renormalized_response(
    problem: &MeanFieldProblem,
    template: &SolverConfig,
    alpha_ph: f64,
) -> Result<ChargeDensity> {
    let nu = problem.external();
    if alpha_ph == 0.0 {
        return Ok(nu.clone());
    }
    let cutoff = problem.grid().cutoff();
    let b = b_lambda(cutoff)?;
    let kappa = alpha_ph * b;
    if kappa >= 1.0 {
        return Err(Error::LandauPole { kappa });
    }
    let alpha = alpha_ph / (1.0 - kappa);
    let cfg = SolverConfig {
        alpha,
        mu: 0.0,
        ..template.clone()
    };
    let sol = solve_signed(problem, &cfg, Filling::FixedMu(0.0), None)?;
    nu.sub(&sol.rho).map(|d| d.scaled(1.0 + alpha * b))
}

/// Taylor coefficients of `α_ph ↦ ρ_ph` at 0 from central differences on
/// the ladder `{0, ±h/2, ±h, ±2h}` and one Richardson step.
pub fn extract_series(
    problem: &MeanFieldProblem,
    template: &SolverConfig,
    n_max: usize,
    step: f64,
) -> Result<SeriesCoefficients> {
    if n_max > MAX_ORDER {
        return Err(Error::param(
            "n_max",
            format!("at most {MAX_ORDER} coefficients can be extracted, got {n_max}"),
        ));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::param("step", format!("must be > 0, got {step}")));
    }
    let cutoff = problem.grid().cutoff();
    let b = b_lambda(cutoff)?;
    let reach = if n_max >= 3 { 2.0 * step } else { step };
    if n_max > 0 {
        alpha_bare(reach, cutoff)?;
    }
    let nu = problem.external().clone();
    let mut meta = ExtractionMeta {
        cutoff,
        b_lambda: b,
        step,
        ladder: vec![0.0],
        richardson_order: 1,
        condition: vec![0.0],
    };
    if n_max == 0 {
        return Ok(SeriesCoefficients {
            coefficients: vec![nu],
            meta,
        });
    }
    let mut points: Vec<f64> = vec![0.5 * step, step];
    if n_max >= 3 {
        points.push(2.0 * step);
    }
    let signed: Vec<f64> = points.iter().flat_map(|&a| [-a, a]).collect();
    let samples = signed
        .iter()
        .map(|&a| renormalized_response(problem, template, a).map(|d| (a, d)))
        .collect::<Result<Vec<_>>>()?;
    meta.ladder.extend(signed.iter().copied());
    let f = |a: f64| -> &ChargeDensity {
        if a == 0.0 {
            &nu
        } else {
            &samples
                .iter()
                .find(|(x, _)| *x == a)
                .expect("ladder point")
                .1
        }
    };
    let lin = |terms: &[(f64, f64)]| -> Result<ChargeDensity> {
        let mut acc = ChargeDensity::zeros(nu.lattice());
        for &(c, a) in terms {
            acc = acc.combine(1.0, f(a), c)?;
        }
        Ok(acc)
    };
    // Central-difference estimates of the n-th Taylor coefficient at spacing h.
    let estimate = |n: usize, h: f64| -> Result<ChargeDensity> {
        match n {
            1 => lin(&[(0.5 / h, h), (-0.5 / h, -h)]),
            2 => lin(&[
                (0.5 / (h * h), h),
                (-1.0 / (h * h), 0.0),
                (0.5 / (h * h), -h),
            ]),
            3 => {
                let c = 1.0 / (12.0 * h * h * h);
                lin(&[(c, 2.0 * h), (-2.0 * c, h), (2.0 * c, -h), (-c, -2.0 * h)])
            }
            _ => unreachable!(),
        }
    };
    let mut coefficients = vec![nu.clone()];
    for n in 1..=n_max {
        let (coarse, fine) = if n == 3 {
            (estimate(3, step)?, estimate(3, 0.5 * step)?)
        } else {
            (estimate(n, step)?, estimate(n, 0.5 * step)?)
        };
        let rich = fine.combine(4.0 / 3.0, &coarse, -1.0 / 3.0)?;
        let spread = fine.sub(&coarse)?.l2_coulomb_norm();
        meta.condition
            .push(spread / rich.l2_coulomb_norm().max(f64::MIN_POSITIVE));
        coefficients.push(rich);
    }
    Ok(SeriesCoefficients { coefficients, meta })
}

/// Grid rule for a scan cell: fixed box side, smallest even `N` resolving
/// the cutoff, refused above `max_dimension`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPolicy {
    pub box_side: f64,
    pub max_dimension: usize,
}

impl GridPolicy {
    pub fn points_per_axis(&self, cutoff: f64) -> usize {
        let n = (cutoff * self.box_side / std::f64::consts::PI).ceil() as usize;
        (n + n % 2 + 2).max(2)
    }

    /// `4 × #{n ∈ ℤ³ : |n| ≤ ΛL/2π}` without building the grid.
    pub fn predicted_dimension(&self, cutoff: f64) -> usize {
        let r = cutoff * self.box_side / (2.0 * std::f64::consts::PI);
        let r2 = r * r * (1.0 + 1e-12);
        let c = r.floor() as i64;
        let mut count = 0usize;
        for x in -c..=c {
            for y in -c..=c {
                let rest = r2 - (x * x + y * y) as f64;
                if rest >= 0.0 {
                    count += 2 * (rest.sqrt().floor() as usize) + 1;
                }
            }
        }
        4 * count
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Computed,
    /// The cutoff needs a larger basis than the policy allows.
    Infeasible,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticCell {
    pub alpha_ph: f64,
    pub kappa: f64,
    pub cutoff: f64,
    pub dimension: usize,
    pub status: CellStatus,
    pub error: Option<f64>,
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub order: u32,
    pub cells: Vec<AsymptoticCell>,
    /// Fitted `p` in `e ≈ C α_ph^p`, per `κ`.
    pub exponents: Vec<(f64, Option<f64>)>,
    /// `max_κ e / min_κ e` per `α_ph`.
    pub spreads: Vec<(f64, Option<f64>)>,
    /// `max_κ e − min_κ e` against `max_κ C_κ α_ph^{N+1}` per `α_ph`.
    pub envelope_checks: Vec<(f64, Option<bool>)>,
}

impl AsymptoticReport {
    pub fn complete(&self) -> bool {
        self.cells.iter().all(|c| c.status == CellStatus::Computed)
    }

    /// Every cell computed, every exponent at least `min_exponent`, every
    /// `κ`-spread inside the envelope.
    pub fn passes(&self, min_exponent: f64) -> bool {
        self.complete()
            && self
                .exponents
                .iter()
                .all(|(_, p)| p.is_some_and(|p| p >= min_exponent))
            && self.envelope_checks.iter().all(|(_, ok)| *ok == Some(true))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPlan {
    pub order: u32,
    pub kappas: Vec<f64>,
    pub alphas: Vec<f64>,
    pub policy: GridPolicy,
}

/// Least-squares slope of `log e` against `log α`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(a, e)| *a > 0.0 && *e > 0.0)
        .map(|(a, e)| (a.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (
        pts.iter().map(|p| p.0).sum::<f64>() / n,
        pts.iter().map(|p| p.1).sum::<f64>() / n,
    );
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Error `‖ρ_ph − Σ_{n≤N} ν_n α_phⁿ‖` (max of discrete `L²` and Coulomb
/// norms, `k = 0` excluded) over the `(α_ph, κ)` table.
pub fn asymptotic_check(
    profile: &RadialGaussian,
    plan: &AsymptoticPlan,
    template: &SolverConfig,
) -> Result<AsymptoticReport> {
    if plan.order > 1 {
        return Err(Error::param(
            "order",
            format!("N must be 0 or 1, got {}", plan.order),
        ));
    }
    let table = if plan.order == 1 {
        Some(Arc::new(UehlingTable::new(profile)?))
    } else {
        None
    };
    let mut jobs = Vec::new();
    for &kappa in &plan.kappas {
        for &alpha_ph in &plan.alphas {
            jobs.push((alpha_ph, kappa));
        }
    }
    let cells: Vec<AsymptoticCell> = jobs
        .par_iter()
        .map(|&(alpha_ph, kappa)| {
            run_cell(profile, plan, template, table.as_deref(), alpha_ph, kappa)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(plan, cells))
}

fn run_cell(
    profile: &RadialGaussian,
    plan: &AsymptoticPlan,
    template: &SolverConfig,
    table: Option<&UehlingTable>,
    alpha_ph: f64,
    kappa: f64,
) -> Result<AsymptoticCell> {
    let point = RenormalizationPoint::from_kappa(alpha_ph, kappa)?;
    let cutoff = point.cutoff();
    let dimension = plan.policy.predicted_dimension(cutoff);
    let mut cell = AsymptoticCell {
        alpha_ph,
        kappa,
        cutoff,
        dimension,
        status: CellStatus::Infeasible,
        error: None,
        note: None,
    };
    if dimension > plan.policy.max_dimension {
        cell.note = Some(format!(
            "needs dimension {dimension} > {}",
            plan.policy.max_dimension
        ));
        return Ok(cell);
    }
    let grid = Arc::new(MomentumGrid::new(
        plan.policy.box_side,
        plan.policy.points_per_axis(cutoff),
        cutoff,
    )?);
    let lat = Arc::clone(grid.density_lattice());
    let problem = MeanFieldProblem::new(grid, profile.on_lattice(&lat), template.flavor)?;
    let rho_ph = match renormalized_response(&problem, template, alpha_ph) {
        Ok(d) => d,
        Err(Error::NotConverged(diag)) => {
            cell.status = CellStatus::Failed;
            cell.note = Some(diag.to_string());
            return Ok(cell);
        }
        Err(e) => return Err(e),
    };
    let mut approx = problem.external().clone();
    if let Some(t) = table {
        approx = approx.combine(1.0, &t.on_lattice(&lat), alpha_ph)?;
    }
    cell.error = Some(rho_ph.sub(&approx)?.l2_coulomb_norm());
    cell.status = CellStatus::Computed;
    Ok(cell)
}

fn summarize(plan: &AsymptoticPlan, cells: Vec<AsymptoticCell>) -> AsymptoticReport {
    let power = f64::from(plan.order + 1);
    let computed = |c: &&AsymptoticCell| c.status == CellStatus::Computed;
    let exponents = plan
        .kappas
        .iter()
        .map(|&k| {
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(computed)
                .filter(|c| c.kappa == k)
                .map(|c| (c.alpha_ph, c.error.unwrap_or(0.0)))
                .collect();
            (
                k,
                if pts.len() == plan.alphas.len() {
                    loglog_slope(&pts)
                } else {
                    None
                },
            )
        })
        .collect();
    // C_κ from a fixed-exponent fit: log C = mean(log e − (N+1) log α).
    let prefactor = |k: f64| -> Option<f64> {
        let v: Vec<f64> = cells
            .iter()
            .filter(computed)
            .filter(|c| c.kappa == k)
            .map(|c| c.error.unwrap_or(0.0).ln() - power * c.alpha_ph.ln())
            .collect();
        (v.len() == plan.alphas.len()).then(|| (v.iter().sum::<f64>() / v.len() as f64).exp())
    };
    let cmax = plan
        .kappas
        .iter()
        .map(|&k| prefactor(k))
        .collect::<Option<Vec<_>>>()
        .map(|v| v.into_iter().fold(0.0, f64::max));
    let mut spreads = Vec::new();
    let mut envelope_checks = Vec::new();
    for &a in &plan.alphas {
        let e: Vec<f64> = cells
            .iter()
            .filter(computed)
            .filter(|c| c.alpha_ph == a)
            .filter_map(|c| c.error)
            .collect();
        let full = e.len() == plan.kappas.len() && !e.is_empty();
        let (lo, hi) = e.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
        spreads.push((a, full.then(|| hi / lo)));
        envelope_checks.push((
            a,
            if full {
                cmax.map(|c| hi - lo <= c * a.powf(power))
            } else {
                None
            },
        ));
    }
    AsymptoticReport {
        order: plan.order,
        cells,
        exponents,
        spreads,
        envelope_checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_fit() {
        let pts: Vec<(f64, f64)> = [0.5, 0.7, 1.0]
            .iter()
            .map(|&a: &f64| (a, 3.0 * a.powi(2)))
            .collect();
        assert!((loglog_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&pts[..1]).is_none());
    }

    #[test]
    fn policy_dimension_matches_grid() {
        let p = GridPolicy {
            box_side: 2.0,
            max_dimension: 5000,
        };
        for cutoff in [4.0, 8.0, 12.3] {
            let g = MomentumGrid::new(p.box_side, p.points_per_axis(cutoff), cutoff).unwrap();
            assert_eq!(g.dimension(), p.predicted_dimension(cutoff));
        }
    }

    #[test]
    fn order_limit() {
        let grid = Arc::new(MomentumGrid::new(2.0, 4, 2.0).unwrap());
        let lat = Arc::clone(grid.density_lattice());
        let problem = MeanFieldProblem::new(
            grid,
            ChargeDensity::gaussian(&lat, 1.0, 0.5, [0.0; 3]),
            Default::default(),
        )
        .unwrap();
        assert!(extract_series(&problem, &SolverConfig::default(), 4, 0.1).is_err());
        let s = extract_series(&problem, &SolverConfig::default(), 0, 0.1).unwrap();
        assert_eq!(s.coefficients.len(), 1);
        assert_eq!(
            s.coefficients[0].coefficients(),
            problem.external().coefficients()
        );
    }
}
