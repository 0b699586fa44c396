//! Quick invariant suite run by `diracvac check`.

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::density::ChargeDensity;
use crate::error::Result;
use crate::family::make_density;
use crate::operator::{eigh, FreeVacuum, StateDelta};
use crate::renorm::{b_lambda, b_lambda_quadrature};
use crate::scf::{mu_sweep, solve_fixed_point, MeanFieldProblem, SolverConfig};
use crate::series::{uehling_potential, RadialGaussian};
use crate::spinor::{free_projector_symbol, CutoffFlavor, SpinorSymbol};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name: name.to_string(),
        passed,
        detail,
    }
}

/// `Q = U diag(λ) U† − P⁰₋` with `λ` drawn from `[−spill, 1 + spill]`, so
/// roughly half the samples leave `[0, 1]` when `spill > 0`.
pub fn sample_state(vacuum: &Arc<FreeVacuum>, rng: &mut impl Rng, spill: f64) -> StateDelta {
    let n = vacuum.dimension();
    let a = Mat::from_fn(n, n, |_, _| {
        C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let h = Mat::from_fn(n, n, |r, c| a[(r, c)] + a[(c, r)].conj());
    let spec = eigh(&h).expect("small Hermitian matrix");
    let mut lam: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
    if spill > 0.0 && rng.random_bool(0.5) {
        let i = rng.random_range(0..n);
        lam[i] = if rng.random_bool(0.5) {
            -rng.random_range(1e-6..spill)
        } else {
            1.0 + rng.random_range(1e-6..spill)
        };
    }
    StateDelta::from_state(vacuum, spec.density_matrix(&lam)).expect("dimension matches")
}

/// Random momenta vacuum of dimension `4·m`.
pub fn small_vacuum(rng: &mut impl Rng, m: usize) -> Arc<FreeVacuum> {
    let momenta = (0..m)
        .map(|_| {
            [
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
            ]
        })
        .collect();
    Arc::new(FreeVacuum::from_momenta(momenta, 4.0, CutoffFlavor::Sharp))
}

/// Runs every check; the configured grid, density and solver are used
/// wherever a self-consistent solution is involved.
pub fn run_checks(cfg: &Config, force: bool) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let grid = Arc::new(cfg.grid.build()?);
    let lat = Arc::clone(grid.density_lattice());

    let mut worst: f64 = 0.0;
    for p in grid.momenta() {
        let d = cfg.solver.flavor.symbol(&p, grid.cutoff());
        let e = cfg.solver.flavor.magnitude(&p, grid.cutoff());
        worst = worst.max(((d * d) - SpinorSymbol::identity().scale(e * e)).frobenius() / (e * e));
        let pm = free_projector_symbol(&p);
        worst = worst
            .max((pm * pm - pm).frobenius())
            .max((pm.trace().re - 2.0).abs());
    }
    out.push(outcome(
        "free symbols",
        worst < 1e-12,
        format!("max defect {worst:.2e}"),
    ));

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut disagreements = 0;
    let mut admissible = 0;
    for i in 0..200 {
        let vac = small_vacuum(&mut rng, 1 + i % 4);
        let q = sample_state(&vac, &mut rng, 0.05);
        let (ok, _) = q.check_admissible()?;
        admissible += usize::from(ok);
        if ok != q.spectral_admissibility()? {
            disagreements += 1;
        }
    }
    out.push(outcome(
        "admissibility equivalence",
        disagreements == 0,
        format!("{disagreements} disagreements in 200 samples ({admissible} admissible)"),
    ));

    let zero = MeanFieldProblem::new(
        Arc::clone(&grid),
        ChargeDensity::zeros(&lat),
        cfg.solver.flavor,
    )?;
    let free_cfg = SolverConfig {
        mu: 0.0,
        ..cfg.solver.clone()
    };
    let sol = solve_fixed_point(&zero, &free_cfg, None)?;
    let n = sol.rho.l2_norm(true).max(sol.rho.coulomb_norm());
    out.push(outcome(
        "free vacuum",
        sol.iterations == 1 && n < 1e-12 && sol.energy.total == 0.0,
        format!(
            "iterations {}, norm {n:.1e}, energy {}",
            sol.iterations, sol.energy.total
        ),
    ));

    let (nu, _) = make_density(&cfg.density, &grid, force)?;
    let problem = MeanFieldProblem::new(Arc::clone(&grid), nu.clone(), cfg.solver.flavor)?;
    let solver = SolverConfig {
        mu: 0.0,
        ..cfg.solver.clone()
    };
    let sol = solve_fixed_point(&problem, &solver, None)?;
    let below = sol
        .iterate_energies
        .iter()
        .filter(|e| e.total < e.lower_bound - 1e-10)
        .count();
    out.push(outcome(
        "energy lower bound",
        below == 0,
        format!(
            "{below} of {} iterates below the bound",
            sol.iterate_energies.len()
        ),
    ));

    let recon = sol.reconstruction_residual(&problem)?;
    out.push(outcome(
        "self-consistency",
        recon < 1e-8,
        format!("‖P − χ(D[ρ]) − δ‖ = {recon:.2e}"),
    ));

    out.push(outcome(
        "relative index",
        sol.charge.abs() < 1e-8,
        format!("Tr_P0 Q = {:.2e} at μ = 0", sol.charge),
    ));

    let neg = problem.with_external(nu.scaled(-1.0))?;
    let sol_neg = solve_fixed_point(&neg, &solver, None)?;
    let cc = sol
        .rho
        .combine(1.0, &sol_neg.rho, 1.0)?
        .coefficients()
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()));
    out.push(outcome(
        "charge conjugation",
        cc < 1e-10,
        format!("max |ρ(ν) + ρ(−ν)| = {cc:.2e}"),
    ));

    let mut bq: f64 = 0.0;
    for l in [0.5, 1.0, 10.0, 100.0, 1e4] {
        bq = bq.max((b_lambda(l)? - b_lambda_quadrature(l)?).abs());
    }
    out.push(outcome(
        "B quadrature",
        bq < 1e-12,
        format!("max |closed − quadrature| = {bq:.2e}"),
    ));

    let mus = [-0.5, 0.0, 0.5];
    let curve = mu_sweep(&problem, &mus, &solver)?;
    let conv = curve.points.iter().all(|p| p.converged);
    out.push(outcome(
        "charge monotone in μ",
        conv && curve.charge_nondecreasing(),
        format!(
            "q = {:?}",
            curve.points.iter().map(|p| p.q).collect::<Vec<_>>()
        ),
    ));

    let profile = RadialGaussian::new(1.0, 0.5)?;
    let v: Vec<f64> = [0.0, 1.0, 3.0]
        .iter()
        .map(|&x| uehling_potential(&profile, x))
        .collect::<Result<_>>()?;
    out.push(outcome(
        "Uehling positivity",
        v.iter().all(|&x| x > 0.0) && v.windows(2).all(|w| w[1] < w[0]),
        format!("V1 = {:.3e}, {:.3e}, {:.3e}", v[0], v[1], v[2]),
    ));

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sampler_produces_both_verdicts() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (mut yes, mut no) = (0, 0);
        for i in 0..40 {
            let vac = small_vacuum(&mut rng, 1 + i % 4);
            let q = sample_state(&vac, &mut rng, 0.05);
            if q.check_admissible().unwrap().0 {
                yes += 1;
            } else {
                no += 1;
            }
        }
        assert!(yes > 5 && no > 5, "{yes} {no}");
    }

    #[test]
    fn suite_passes_on_a_small_grid() {
        let cfg = Config::from_toml(
            "[grid]\nbox_side = 3.0\npoints_per_axis = 6\ncutoff = 2.5\n[solver]\nalpha = 0.1\n",
        )
        .unwrap();
        let res = run_checks(&cfg, false).unwrap();
        for r in &res {
            assert!(r.passed, "{}: {}", r.name, r.detail);
        }
        assert_eq!(res.len(), 10);
    }
}
