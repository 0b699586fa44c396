//! Self-consistent solution of the cutoff mean-field equation
//! `P = χ_(−∞, μ)(D[ρ_{P−P⁰₋}]) + δ` by damped fixed-point iteration on the
//! density, with optional Anderson extrapolation.

mod constrained;
mod mixing;
mod occupation;

use std::fmt;
use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use constrained::{mu_sweep, solve_charge_constrained, ChargeSearch, CurvePoint, EnergyCurve};
pub use occupation::{occupations, FermiReport, Filling, FractionalLevel};

use crate::density::ChargeDensity;
use crate::energy::{energy_signed, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::lattice::MomentumGrid;
use crate::operator::{eigh, FreeVacuum, StateDelta};
use crate::spinor::CutoffFlavor;
use mixing::{coulomb_weights, Mixer};

/// Iterations between divergence checks, growth factor that triggers a
/// restart, and the number of restarts tolerated.
/// Physical fine-structure constant, the default coupling.
pub const FINE_STRUCTURE: f64 = 1.0 / 137.035_999_084;

const GUARD_WINDOW: usize = 20;
const GUARD_GROWTH: f64 = 10.0;
const GUARD_RESTARTS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InitMode {
    /// `Q = 0`.
    FreeVacuum,
    /// Density of `χ_(−∞,0)(D⁰ + W)` for a seeded random Hermitian `W`.
    RandomAdmissible { seed: u64, strength: f64 },
    /// Density supplied by the caller (e.g. a previous solution).
    WarmRestart,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub alpha: f64,
    pub mu: f64,
    /// Damping `θ ∈ (0, 1]`.
    pub mixing: f64,
    /// Coulomb-norm tolerance on the density increment.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub init: InitMode,
    pub flavor: CutoffFlavor,
    /// Anderson history depth; 0 selects plain linear mixing.
    pub anderson_depth: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: FINE_STRUCTURE,
            mu: 0.0,
            mixing: 0.3,
            tolerance: 1e-10,
            max_iterations: 200,
            init: InitMode::FreeVacuum,
            flavor: CutoffFlavor::Sharp,
            anderson_depth: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::param(
                "alpha",
                format!("α must be >= 0, got {}", self.alpha),
            ));
        }
        self.validate_numerics()
    }

    fn validate_numerics(&self) -> Result<()> {
        if !(self.mu > -1.0 && self.mu < 1.0) {
            return Err(Error::param(
                "mu",
                format!("μ must lie in (−1,1), got {}", self.mu),
            ));
        }
        if !(self.mixing > 0.0 && self.mixing <= 1.0) {
            return Err(Error::param(
                "mixing",
                format!("θ must lie in (0,1], got {}", self.mixing),
            ));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::param(
                "tolerance",
                format!("tolerance must be > 0, got {}", self.tolerance),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max_iterations", "must be at least 1"));
        }
        if let InitMode::RandomAdmissible { strength, .. } = self.init {
            if !(strength >= 0.0 && strength.is_finite()) {
                return Err(Error::param(
                    "init.strength",
                    format!("must be >= 0, got {strength}"),
                ));
            }
        }
        Ok(())
    }
}

/// Grid, free vacuum and external density of one mean-field problem.
#[derive(Clone, Debug)]
pub struct MeanFieldProblem {
    grid: Arc<MomentumGrid>,
    vacuum: Arc<FreeVacuum>,
    external: ChargeDensity,
}

impl MeanFieldProblem {
    pub fn new(
        grid: Arc<MomentumGrid>,
        external: ChargeDensity,
        flavor: CutoffFlavor,
    ) -> Result<Self> {
        external.check_compatible(&ChargeDensity::zeros(grid.density_lattice()))?;
        let vacuum = Arc::new(FreeVacuum::from_grid(&grid, flavor));
        Ok(Self {
            grid,
            vacuum,
            external,
        })
    }

    pub fn grid(&self) -> &Arc<MomentumGrid> {
        &self.grid
    }

    pub fn vacuum(&self) -> &Arc<FreeVacuum> {
        &self.vacuum
    }

    pub fn external(&self) -> &ChargeDensity {
        &self.external
    }

    /// Same grid and vacuum, different external density.
    pub fn with_external(&self, external: ChargeDensity) -> Result<Self> {
        external.check_compatible(&self.external)?;
        Ok(Self {
            grid: Arc::clone(&self.grid),
            vacuum: Arc::clone(&self.vacuum),
            external,
        })
    }

    /// `D[ρ] = D⁰ + α (ρ − ν) ∗ |x|⁻¹` in the grid basis.
    pub fn mean_field_operator(&self, rho: &ChargeDensity, alpha: f64) -> Result<Mat<C64>> {
        assemble(&self.grid, &self.vacuum, rho, &self.external, alpha)
    }
}

/// `D̂(p, p′) = D⁰(p) δ_{pp′} + α 4π (ρ̂ − ν̂)(p − p′)/|p − p′|²`.
pub fn mean_field_operator(
    rho: &ChargeDensity,
    nu: &ChargeDensity,
    alpha: f64,
    grid: &MomentumGrid,
    flavor: CutoffFlavor,
) -> Result<Mat<C64>> {
    let vac = FreeVacuum::from_grid(grid, flavor);
    assemble(grid, &vac, rho, nu, alpha)
}

fn assemble(
    grid: &MomentumGrid,
    vac: &FreeVacuum,
    rho: &ChargeDensity,
    nu: &ChargeDensity,
    alpha: f64,
) -> Result<Mat<C64>> {
    let diff = rho.sub(nu)?;
    diff.check_compatible(&ChargeDensity::zeros(grid.density_lattice()))?;
    let pot: Vec<C64> = diff
        .coulomb_potential()
        .into_iter()
        .map(|v| v * alpha)
        .collect();
    let m = grid.len();
    let table = grid.transfer_table();
    let mut d = vac.free_operator();
    if alpha != 0.0 {
        for j in 0..m {
            for i in 0..m {
                let v = pot[table[i * m + j] as usize];
                for s in 0..4 {
                    d[(4 * i + s, 4 * j + s)] += v;
                }
            }
        }
    }
    Ok(d)
}

/// Diagnostic attached to a failed solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NonConvergence {
    pub reason: String,
    pub iterations: usize,
    pub restarts: usize,
    pub best_residual: f64,
    pub residual_history: Vec<f64>,
}

impl fmt::Display for NonConvergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} after {} iterations ({} restarts); best residual {:.3e}, last residuals {:?}",
            self.reason,
            self.iterations,
            self.restarts,
            self.best_residual,
            &self.residual_history[self.residual_history.len().saturating_sub(5)..]
        )
    }
}

/// Converged solution of the mean-field equation.
#[derive(Clone, Debug)]
pub struct Solution {
    pub q: StateDelta,
    pub rho: ChargeDensity,
    pub external: ChargeDensity,
    pub alpha: f64,
    /// Chemical potential consistent with the occupations.
    pub mu: f64,
    /// Spectrum of the mean-field operator whose projector gave `q`.
    pub spectrum: Vec<f64>,
    pub occupations: Vec<f64>,
    pub charge: f64,
    pub energy: EnergyBreakdown,
    pub fermi: FermiReport,
    pub iterations: usize,
    pub restarts: usize,
    pub residual_history: Vec<f64>,
    pub iterate_energies: Vec<EnergyBreakdown>,
    /// Davis–Kahan bound on `‖P − χ(D[ρ]) − δ‖_HS` from the final residual.
    pub reconstruction_bound: f64,
    /// `min λ(1 − λ)` over the occupations, the admissibility margin of `P`.
    pub admissibility_margin: f64,
}

impl Solution {
    pub fn converged_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }

    /// Recomputes `χ(D[ρ]) + δ` with the same filling and returns
    /// `‖P⁰₋ + Q − χ(D[ρ]) − δ‖_HS`.
    pub fn reconstruction_residual(&self, problem: &MeanFieldProblem) -> Result<f64> {
        let d = problem.mean_field_operator(&self.rho, self.alpha)?;
        let spec = eigh(&d)?;
        let (occ, _) = occupations(&spec.values, self.fermi.filling);
        let p = spec.density_matrix(&occ);
        let diff = &self.q.state() - &p;
        Ok(diff.norm_l2())
    }
}

/// Solves at the configured `μ` (requires `α ≥ 0`).
pub fn solve_fixed_point(
    problem: &MeanFieldProblem,
    config: &SolverConfig,
    initial: Option<&ChargeDensity>,
) -> Result<Solution> {
    config.validate()?;
    solve_with(problem, config, Filling::FixedMu(config.mu), initial)
}

/// Same iteration for any real `α`, used by finite-difference response
/// extraction where the coupling is probed on both sides of zero.
pub fn solve_signed(
    problem: &MeanFieldProblem,
    config: &SolverConfig,
    filling: Filling,
    initial: Option<&ChargeDensity>,
) -> Result<Solution> {
    if !config.alpha.is_finite() {
        return Err(Error::param("alpha", "coupling must be finite"));
    }
    config.validate_numerics()?;
    solve_with(problem, config, filling, initial)
}

pub(crate) fn solve_with(
    problem: &MeanFieldProblem,
    config: &SolverConfig,
    filling: Filling,
    initial: Option<&ChargeDensity>,
) -> Result<Solution> {
    let grid = &problem.grid;
    let lat = grid.density_lattice();
    let alpha = config.alpha;
    let mut rho_in = match (initial, &config.init) {
        (Some(d), _) => {
            d.check_compatible(&problem.external)?;
            d.clone()
        }
        (None, InitMode::WarmRestart) => {
            return Err(Error::param(
                "init",
                "warm restart requested without an initial density",
            ));
        }
        (None, InitMode::FreeVacuum) => ChargeDensity::zeros(lat),
        (None, InitMode::RandomAdmissible { seed, strength }) => {
            random_admissible_density(problem, *seed, *strength)?
        }
    };

    let weights = coulomb_weights(lat);
    let mut mixer = Mixer::new(config.mixing, config.anderson_depth, weights);
    let mut history = Vec::new();
    let mut energies = Vec::new();
    let mut best: Option<(f64, ChargeDensity)> = None;
    let mut restarts = 0;
    let mut since_restart: Vec<f64> = Vec::new();

    for iter in 1..=config.max_iterations {
        let (values, occ, fermi, q) = match free_step(problem, &rho_in, alpha, filling) {
            Some(step) => step,
            None => {
                let d = problem.mean_field_operator(&rho_in, alpha)?;
                let spec = eigh(&d)?;
                let (occ, fermi) = occupations(&spec.values, filling);
                let q = StateDelta::from_state(&problem.vacuum, spec.density_matrix(&occ))?;
                (spec.values, occ, fermi, q)
            }
        };
        let rho_out = q.density(grid)?;
        let energy = energy_signed(q.kinetic_energy(), &rho_out, &problem.external, alpha)?;
        energies.push(energy);
        let delta = rho_out.sub(&rho_in)?;
        let residual = delta.coulomb_norm();
        history.push(residual);
        since_restart.push(residual);

        if !residual.is_finite() {
            return Err(not_converged(
                "non-finite residual",
                iter,
                restarts,
                &best,
                history,
            ));
        }
        if residual < config.tolerance {
            let charge = q.generalized_trace();
            let gap = fermi_gap(&values, &occ);
            let dk = operator_hs_norm(grid, &delta, alpha);
            let margin = occ.iter().map(|o| o * (1.0 - o)).fold(0.0f64, f64::min);
            let mu = fermi.fermi_level;
            return Ok(Solution {
                q,
                rho: rho_out,
                external: problem.external.clone(),
                alpha,
                mu,
                spectrum: values,
                occupations: occ,
                charge,
                energy,
                fermi,
                iterations: iter,
                restarts,
                residual_history: history,
                iterate_energies: energies,
                reconstruction_bound: if gap > 0.0 {
                    std::f64::consts::SQRT_2 * dk / gap
                } else {
                    f64::INFINITY
                },
                admissibility_margin: margin,
            });
        }
        if best.as_ref().map_or(true, |(r, _)| residual < *r) {
            best = Some((residual, rho_in.clone()));
        }
        let k = since_restart.len();
        if k > GUARD_WINDOW && residual > GUARD_GROWTH * since_restart[k - 1 - GUARD_WINDOW] {
            restarts += 1;
            if restarts > GUARD_RESTARTS {
                return Err(not_converged(
                    "residual diverged",
                    iter,
                    restarts - 1,
                    &best,
                    history,
                ));
            }
            mixer.restart(0.5 * mixer.theta());
            since_restart.clear();
            rho_in = best.as_ref().expect("a best iterate exists").1.clone();
            continue;
        }
        let next = mixer.next(rho_in.coefficients(), rho_out.coefficients());
        rho_in = ChargeDensity::from_coefficients(lat, next)?;
        rho_in.symmetrize();
    }
    Err(not_converged(
        "maximum iterations reached",
        config.max_iterations,
        restarts,
        &best,
        history,
    ))
}

/// With no mean field (`α = 0`, or `ρ − ν` carrying no Coulomb potential)
/// and the Fermi level in the gap, `χ(D⁰) = P⁰₋` exactly: the step is taken
/// from the symbols instead of a rounded eigendecomposition.
fn free_step(
    problem: &MeanFieldProblem,
    rho: &ChargeDensity,
    alpha: f64,
    filling: Filling,
) -> Option<(Vec<f64>, Vec<f64>, FermiReport, StateDelta)> {
    if !matches!(filling, Filling::FixedMu(_)) {
        return None;
    }
    let origin = rho.lattice().origin();
    let field_free = alpha == 0.0
        || rho
            .coefficients()
            .iter()
            .zip(problem.external.coefficients())
            .enumerate()
            .all(|(i, (a, b))| i == origin || a == b);
    if !field_free {
        return None;
    }
    let vac = &problem.vacuum;
    let mut values: Vec<f64> = (0..vac.len())
        .flat_map(|i| [-vac.magnitude(i), vac.magnitude(i)])
        .flat_map(|e| [e, e])
        .collect();
    values.sort_by(f64::total_cmp);
    let (occ, fermi) = occupations(&values, filling);
    let vacuum_filling = values
        .iter()
        .zip(&occ)
        .all(|(&e, &o)| o == if e < 0.0 { 1.0 } else { 0.0 });
    vacuum_filling.then(|| (values, occ, fermi, StateDelta::zero(vac)))
}

fn not_converged(
    reason: &str,
    iterations: usize,
    restarts: usize,
    best: &Option<(f64, ChargeDensity)>,
    history: Vec<f64>,
) -> Error {
    Error::NotConverged(Box::new(NonConvergence {
        reason: reason.to_string(),
        iterations,
        restarts,
        best_residual: best.as_ref().map_or(f64::NAN, |b| b.0),
        residual_history: history,
    }))
}

/// Smallest distance between an occupied-cluster eigenvalue and an
/// eigenvalue with different occupation.
fn fermi_gap(values: &[f64], occ: &[f64]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 1..values.len() {
        if occ[i] != occ[i - 1] {
            gap = gap.min(values[i] - values[i - 1]);
        }
    }
    gap
}

/// `‖α V(δρ)‖_HS` as an operator on the grid.
fn operator_hs_norm(grid: &MomentumGrid, delta: &ChargeDensity, alpha: f64) -> f64 {
    let pot = delta.coulomb_potential();
    let m = grid.len();
    let table = grid.transfer_table();
    let s: f64 = table.iter().map(|&t| pot[t as usize].norm_sqr()).sum();
    debug_assert_eq!(table.len(), m * m);
    (4.0 * s).sqrt() * alpha.abs()
}

/// Density of `χ_(−∞,0)(D⁰ + W)`, `W` a seeded Gaussian Hermitian matrix of
/// operator norm about `2·strength`.
pub fn random_admissible_density(
    problem: &MeanFieldProblem,
    seed: u64,
    strength: f64,
) -> Result<ChargeDensity> {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.vacuum.dimension();
    let scale = strength / (n as f64).sqrt();
    let mut g = Mat::<C64>::zeros(n, n);
    for c in 0..n {
        for r in c..n {
            let (a, b): (f64, f64) = (rng.sample(StandardNormal), rng.sample(StandardNormal));
            let v = if r == c {
                C64::new(a * scale, 0.0)
            } else {
                C64::new(a, b) * (scale / std::f64::consts::SQRT_2)
            };
            g[(r, c)] = v;
            g[(c, r)] = v.conj();
        }
    }
    let d = &problem.vacuum.free_operator() + &g;
    let spec = eigh(&d)?;
    let occ: Vec<f64> = spec
        .values
        .iter()
        .map(|&l| if l < 0.0 { 1.0 } else { 0.0 })
        .collect();
    let q = StateDelta::from_state(&problem.vacuum, spec.density_matrix(&occ))?;
    q.density(&problem.grid)
}
