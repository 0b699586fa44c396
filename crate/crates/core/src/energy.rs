//! Reduced BDF energy: generalized kinetic term, interaction with the
//! external density and the direct (Hartree) term.

use serde::{Deserialize, Serialize};

use crate::density::{coulomb_pairing, ChargeDensity};
use crate::error::{Error, Result};
use crate::lattice::MomentumGrid;
use crate::operator::StateDelta;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic: f64,
    /// `−α D(ρ_Q, ν)`.
    pub external: f64,
    /// `(α/2) D(ρ_Q, ρ_Q)`.
    pub direct: f64,
    pub total: f64,
    /// `−(α/2) D(ν, ν)`.
    pub lower_bound: f64,
}

/// Energy from a precomputed density `ρ_Q` (avoids re-extracting it).
pub fn energy_from_parts(
    kinetic: f64,
    rho: &ChargeDensity,
    nu: &ChargeDensity,
    alpha: f64,
) -> Result<EnergyBreakdown> {
    if !(alpha >= 0.0) {
        return Err(Error::param(
            "alpha",
            format!("coupling must be >= 0, got {alpha}"),
        ));
    }
    energy_signed(kinetic, rho, nu, alpha)
}

pub(crate) fn energy_signed(
    kinetic: f64,
    rho: &ChargeDensity,
    nu: &ChargeDensity,
    alpha: f64,
) -> Result<EnergyBreakdown> {
    let external = -alpha * coulomb_pairing(rho, nu)?;
    let direct = 0.5 * alpha * coulomb_pairing(rho, rho)?;
    let lower_bound = -0.5 * alpha * coulomb_pairing(nu, nu)?;
    Ok(EnergyBreakdown {
        kinetic,
        external,
        direct,
        total: kinetic + external + direct,
        lower_bound,
    })
}

/// `Tr_{P⁰₋}(D⁰Q) − α D(ρ_Q, ν) + (α/2) D(ρ_Q, ρ_Q)`.
pub fn bdf_energy(
    q: &StateDelta,
    nu: &ChargeDensity,
    alpha: f64,
    grid: &MomentumGrid,
) -> Result<EnergyBreakdown> {
    let rho = q.density(grid)?;
    energy_from_parts(q.kinetic_energy(), &rho, nu, alpha)
}

/// BDF energy minus `μ` times the generalized trace.
pub fn free_energy(
    q: &StateDelta,
    nu: &ChargeDensity,
    alpha: f64,
    mu: f64,
    grid: &MomentumGrid,
) -> Result<f64> {
    if !(mu > -1.0 && mu < 1.0) {
        return Err(Error::param(
            "mu",
            format!("μ must lie in (−1,1), got {mu}"),
        ));
    }
    Ok(bdf_energy(q, nu, alpha, grid)?.total - mu * q.generalized_trace())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::{eigh, FreeVacuum};
    use crate::spinor::CutoffFlavor;
    use faer::Mat;
    use num_complex::Complex64 as C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    struct Fixture {
        grid: MomentumGrid,
        vac: Arc<FreeVacuum>,
        nu: ChargeDensity,
    }

    fn fixture() -> Fixture {
        let grid = MomentumGrid::new(2.0 * std::f64::consts::PI, 4, 1.5).unwrap();
        let vac = Arc::new(FreeVacuum::from_grid(&grid, CutoffFlavor::Sharp));
        let lat = grid.density_lattice();
        let v = lat.volume();
        let nu = ChargeDensity::from_fn(lat, |_, k| {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            C64::new((-0.125 * k2).exp() / v, 0.0)
        });
        Fixture { grid, vac, nu }
    }

    /// `P = U diag(λ) U†` with random unitary `U` and `λ ∈ [0, 1]`.
    fn random_admissible(vac: &Arc<FreeVacuum>, rng: &mut impl Rng) -> StateDelta {
        let n = vac.dimension();
        let a = Mat::from_fn(n, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let h = Mat::from_fn(n, n, |r, c| a[(r, c)] + a[(c, r)].conj());
        let spec = eigh(&h).unwrap();
        let occ: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        StateDelta::from_state(vac, spec.density_matrix(&occ)).unwrap()
    }

    #[test]
    fn zero_state_has_zero_energy() {
        let f = fixture();
        let e = bdf_energy(&StateDelta::zero(&f.vac), &f.nu, 0.7, &f.grid).unwrap();
        assert_eq!(e.total, 0.0);
        assert!(e.lower_bound < 0.0);
        assert_eq!(
            free_energy(&StateDelta::zero(&f.vac), &f.nu, 0.7, 0.4, &f.grid).unwrap(),
            0.0
        );
    }

    #[test]
    fn negative_coupling_rejected() {
        let f = fixture();
        assert!(bdf_energy(&StateDelta::zero(&f.vac), &f.nu, -0.1, &f.grid).is_err());
        assert!(free_energy(&StateDelta::zero(&f.vac), &f.nu, 0.1, 1.0, &f.grid).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn bounds_and_square_completion(seed in any::<u64>(), alpha in 0.0f64..3.0, mu in -0.99f64..0.99) {
                let f = fixture();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let q = random_admissible(&f.vac, &mut rng);
                let e = bdf_energy(&q, &f.nu, alpha, &f.grid).unwrap();
                // Kinetic bounds: Tr(Q²) ≤ Tr(|D⁰|Q²) ≤ kinetic ≤ √(1+Λ²) Tr(Q⁺⁺ − Q⁻⁻).
                let q2 = q.matrix().norm_l2().powi(2);
                let wq2 = q.kinetic_weighted_square();
                prop_assert!(q2 <= wq2 * (1.0 + 1e-12));
                prop_assert!(wq2 <= e.kinetic + 1e-10);
                let emax = (1.0 + f.grid.cutoff().powi(2)).sqrt();
                let pm = q.block(crate::operator::Branch::Plus, crate::operator::Branch::Plus);
                let mm = q.block(crate::operator::Branch::Minus, crate::operator::Branch::Minus);
                let spread: f64 = (0..pm.nrows()).map(|k| pm[(k, k)].re - mm[(k, k)].re).sum();
                prop_assert!(e.kinetic <= emax * spread + 1e-10);
                prop_assert!(e.total >= e.lower_bound - 1e-10);
                prop_assert!((e.total - (e.kinetic + e.external + e.direct)).abs() < 1e-12 * (1.0 + e.total.abs()));
                let rho = q.density(&f.grid).unwrap();
                let diff = rho.sub(&f.nu).unwrap();
                let sq = 0.5 * alpha * coulomb_pairing(&diff, &diff).unwrap();
                prop_assert!((e.total - e.lower_bound - e.kinetic - sq).abs() < 1e-10 * (1.0 + sq));
                let fe = free_energy(&q, &f.nu, alpha, mu, &f.grid).unwrap();
                prop_assert!((fe - (e.total - mu * q.generalized_trace())).abs() < 1e-12 * (1.0 + fe.abs()));
                // Without an external density the energy is nonnegative.
                let zero = ChargeDensity::zeros(f.grid.density_lattice());
                prop_assert!(bdf_energy(&q, &zero, alpha, &f.grid).unwrap().total >= -1e-12);
            }

            #[test]
            fn convexity(seed in any::<u64>(), alpha in 0.0f64..3.0, t in 0.0f64..1.0) {
                let f = fixture();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let a = random_admissible(&f.vac, &mut rng);
                let b = random_admissible(&f.vac, &mut rng);
                let mix = a.interpolate(&b, t).unwrap();
                prop_assert!(mix.check_admissible().unwrap().0);
                let ea = bdf_energy(&a, &f.nu, alpha, &f.grid).unwrap().total;
                let eb = bdf_energy(&b, &f.nu, alpha, &f.grid).unwrap().total;
                let em = bdf_energy(&mix, &f.nu, alpha, &f.grid).unwrap().total;
                prop_assert!(em <= t * ea + (1.0 - t) * eb + 1e-10 * (1.0 + ea.abs() + eb.abs()));
            }

            #[test]
            fn charge_conjugation_invariance(seed in any::<u64>(), alpha in 0.0f64..3.0) {
                let f = fixture();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let q = random_admissible(&f.vac, &mut rng);
                let qc = q.charge_conjugate().unwrap();
                let e = bdf_energy(&q, &f.nu, alpha, &f.grid).unwrap();
                let ec = bdf_energy(&qc, &f.nu.scaled(-1.0), alpha, &f.grid).unwrap();
                prop_assert!((e.total - ec.total).abs() < 1e-10 * (1.0 + e.total.abs()));
                prop_assert!((e.kinetic - ec.kinetic).abs() < 1e-10 * (1.0 + e.kinetic.abs()));
            }
        }
    }
}
