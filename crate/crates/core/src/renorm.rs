//! Charge renormalization: `B_Λ`, the bare/physical coupling maps with the
//! Landau-pole guard, the `κ` parameterization, renormalized densities and
//! the linear-response check of the total-charge relation.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::density::ChargeDensity;
use crate::error::{Error, Result};
use crate::quadrature::{integrate, Tolerance};
use crate::scf::{solve_signed, Filling, MeanFieldProblem, Solution, SolverConfig};

/// Above this cutoff `B_Λ` is taken from its large-`Λ` expansion.
pub const ASYMPTOTIC_CUTOFF: f64 = 1e6;

fn check_cutoff(cutoff: f64) -> Result<()> {
    if cutoff > 0.0 && cutoff.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "cutoff",
            format!("Λ must be positive and finite, got {cutoff}"),
        ))
    }
}

/// `B_Λ = (1/π) ∫₀^a (z² − z⁴/3)/(1 − z²) dz`, `a = Λ/√(1+Λ²)`, in closed form.
///
/// `atanh(a) = asinh(Λ)` avoids the cancellation in `log((1+a)/(1−a))` as `a → 1`.
pub fn b_lambda(cutoff: f64) -> Result<f64> {
    check_cutoff(cutoff)?;
    if cutoff > ASYMPTOTIC_CUTOFF {
        return Ok(b_lambda_asymptotic(cutoff));
    }
    let a = cutoff / (1.0 + cutoff * cutoff).sqrt();
    Ok((2.0 / 3.0 * cutoff.asinh() - 2.0 * a / 3.0 + a.powi(3) / 9.0) / PI)
}

/// `(2/3π) log Λ − 5/9π + 2 log 2/3π + 1/(3πΛ²)`; the next term is `O(Λ⁻⁴)`.
pub fn b_lambda_asymptotic(cutoff: f64) -> f64 {
    (2.0 / 3.0 * cutoff.ln() - 5.0 / 9.0 + 2.0 * LN_2 / 3.0 + 1.0 / (3.0 * cutoff * cutoff)) / PI
}

/// Leading terms only, without the `1/Λ²` correction.
pub fn b_lambda_leading(cutoff: f64) -> f64 {
    (2.0 / 3.0 * cutoff.ln() - 5.0 / 9.0 + 2.0 * LN_2 / 3.0) / PI
}

/// `B_Λ` by adaptive quadrature after `z = tanh s`:
/// `(1/π) ∫₀^{asinh Λ} (tanh²s − tanh⁴s/3) ds`.
pub fn b_lambda_quadrature(cutoff: f64) -> Result<f64> {
    check_cutoff(cutoff)?;
    let tol = Tolerance {
        abs: 1e-15,
        rel: 1e-15,
        max_panels: 10_000,
    };
    let r = integrate(
        |s| {
            let t2 = s.tanh().powi(2);
            t2 - t2 * t2 / 3.0
        },
        0.0,
        cutoff.asinh(),
        tol,
    )?;
    Ok(r.value / PI)
}

/// `α_ph = α / (1 + α B_Λ)`.
pub fn alpha_physical(alpha: f64, cutoff: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::param(
            "alpha",
            format!("α must be >= 0, got {alpha}"),
        ));
    }
    let b = b_lambda(cutoff)?;
    if alpha.is_infinite() {
        return Ok(1.0 / b);
    }
    Ok(alpha / (1.0 + alpha * b))
}

/// `α = α_ph / (1 − α_ph B_Λ)`, refusing `α_ph B_Λ ≥ 1`.
pub fn alpha_bare(alpha_ph: f64, cutoff: f64) -> Result<f64> {
    if !(alpha_ph >= 0.0 && alpha_ph.is_finite()) {
        return Err(Error::param(
            "alpha_ph",
            format!("α_ph must be >= 0, got {alpha_ph}"),
        ));
    }
    let kappa = alpha_ph * b_lambda(cutoff)?;
    if kappa >= 1.0 {
        return Err(Error::LandauPole { kappa });
    }
    Ok(alpha_ph / (1.0 - kappa))
}

/// Cutoff with `B_Λ = κ / α_ph`, by bisection in `log Λ`.
pub fn lambda_from_kappa(alpha_ph: f64, kappa: f64) -> Result<f64> {
    if !(alpha_ph > 0.0 && alpha_ph.is_finite()) {
        return Err(Error::param(
            "alpha_ph",
            format!("α_ph must be > 0, got {alpha_ph}"),
        ));
    }
    check_kappa(kappa)?;
    let target = kappa / alpha_ph;
    let b = |t: f64| b_lambda(t.exp()).expect("positive cutoff");
    // B ~ Λ³/3π at small Λ and ~ (2/3π) log Λ at large Λ.
    let (mut lo, mut hi) = (-60.0f64, 700.0f64);
    if b(hi) < target {
        return Err(Error::param(
            "kappa",
            format!("κ/α_ph = {target} needs log Λ > {hi}"),
        ));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if b(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

pub fn check_kappa(kappa: f64) -> Result<()> {
    if kappa >= 1.0 {
        return Err(Error::LandauPole { kappa });
    }
    if !(kappa > 0.0) {
        return Err(Error::param(
            "kappa",
            format!("κ must lie in (0,1), got {kappa}"),
        ));
    }
    Ok(())
}

/// Consistent `(α, α_ph, Λ, κ)` with `κ = α_ph B_Λ < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormalizationPoint {
    alpha: f64,
    alpha_ph: f64,
    cutoff: f64,
    kappa: f64,
}

impl RenormalizationPoint {
    pub fn from_bare(alpha: f64, cutoff: f64) -> Result<Self> {
        let alpha_ph = alpha_physical(alpha, cutoff)?;
        let kappa = alpha_ph * b_lambda(cutoff)?;
        Self::checked(alpha, alpha_ph, cutoff, kappa)
    }

    pub fn from_physical(alpha_ph: f64, cutoff: f64) -> Result<Self> {
        let alpha = alpha_bare(alpha_ph, cutoff)?;
        Self::checked(alpha, alpha_ph, cutoff, alpha_ph * b_lambda(cutoff)?)
    }

    pub fn from_kappa(alpha_ph: f64, kappa: f64) -> Result<Self> {
        let cutoff = lambda_from_kappa(alpha_ph, kappa)?;
        Self::from_physical(alpha_ph, cutoff)
    }

    fn checked(alpha: f64, alpha_ph: f64, cutoff: f64, kappa: f64) -> Result<Self> {
        if kappa >= 1.0 {
            return Err(Error::LandauPole { kappa });
        }
        Ok(Self {
            alpha,
            alpha_ph,
            cutoff,
            kappa,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn alpha_ph(&self) -> f64 {
        self.alpha_ph
    }
    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
}

/// `ρ_ph = (1 − κ)⁻¹ (ν − ρ_Q)`.
pub fn renormalized_density(
    nu: &ChargeDensity,
    rho_q: &ChargeDensity,
    point: &RenormalizationPoint,
) -> Result<ChargeDensity> {
    Ok(nu.sub(rho_q)?.scaled(1.0 / (1.0 - point.kappa)))
}

/// Number of nonempty shells used by [`localized_charge`].
const SHELLS: usize = 3;

/// Charge of `ρ` that follows `ν` at long wavelength:
/// `∫ν · lim_{k→0} ⟨ν̂, ρ̂⟩_shell / ⟨ν̂, ν̂⟩_shell`.
///
/// On a finite grid `L³ρ̂_Q(0) = Tr Q` exactly, so the literal zero mode
/// cannot see vacuum screening. The screened charge lives in the `k → 0`
/// limit of the response, extrapolated here from the first three shells
/// with the basis `{1, |k|, |k|²}`.
pub fn localized_charge(rho: &ChargeDensity, nu: &ChargeDensity) -> Result<f64> {
    rho.check_compatible(nu)?;
    let z = nu.total_charge();
    if z == 0.0 {
        return Err(Error::param("nu", "external density has zero total charge"));
    }
    let lat = nu.lattice();
    let mut shells: std::collections::BTreeMap<i64, (f64, f64)> = Default::default();
    for i in 0..lat.len() {
        let s = lat.shell(i);
        if s == 0 {
            continue;
        }
        let e = shells.entry(s).or_default();
        e.0 += (nu.coefficients()[i].conj() * rho.coefficients()[i]).re;
        e.1 += nu.coefficients()[i].norm_sqr();
    }
    let pts: Vec<(f64, f64)> = shells
        .into_iter()
        .filter(|(_, (_, d))| *d > 0.0)
        .take(SHELLS)
        .map(|(s, (n, d))| ((s as f64).sqrt() * 2.0 * PI / lat.box_side(), n / d))
        .collect();
    if pts.len() < SHELLS {
        return Err(Error::param(
            "lattice",
            "fewer than three populated momentum shells",
        ));
    }
    // Lagrange interpolation in |k| of a quadratic, evaluated at 0.
    let mut c0 = 0.0;
    for (i, &(xi, yi)) in pts.iter().enumerate() {
        let mut l = 1.0;
        for (j, &(xj, _)) in pts.iter().enumerate() {
            if i != j {
                l *= xj / (xj - xi);
            }
        }
        c0 += yi * l;
    }
    Ok(z * c0)
}

/// Which `B` a charge-relation residual used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BSource {
    Continuum,
    DiscreteResponse,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeRelation {
    pub alpha: f64,
    pub integral_nu: f64,
    /// `∫ρ_Q` as the long-wavelength (screening) charge.
    pub integral_rho: f64,
    /// `L³ ρ̂_Q(0)`, equal to `Tr Q` on the grid.
    pub zero_mode_charge: f64,
    pub generalized_charge: f64,
    pub b_used: f64,
    pub b_source: BSource,
    /// `[∫ν − ∫ρ_Q] − [∫ν − Tr_{P⁰₋}Q]/(1 + α B)`.
    pub residual: f64,
}

pub fn verify_charge_relation(
    sol: &Solution,
    point: &RenormalizationPoint,
    b_used: f64,
    b_source: BSource,
) -> Result<ChargeRelation> {
    if (point.alpha - sol.alpha).abs() > 1e-12 * sol.alpha.abs().max(1.0) {
        return Err(Error::param(
            "point",
            format!(
                "bare coupling {} differs from the solution's {}",
                point.alpha, sol.alpha
            ),
        ));
    }
    let z = sol.external.total_charge();
    let integral_rho = if sol.alpha == 0.0 {
        0.0
    } else {
        localized_charge(&sol.rho, &sol.external)?
    };
    let residual = (z - integral_rho) - (z - sol.charge) / (1.0 + sol.alpha * b_used);
    Ok(ChargeRelation {
        alpha: sol.alpha,
        integral_nu: z,
        integral_rho,
        zero_mode_charge: sol.rho.total_charge(),
        generalized_charge: sol.charge,
        b_used,
        b_source,
        residual,
    })
}

/// Lattice analogue of `B_Λ` from the linear response of the screening charge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteResponse {
    pub b: f64,
    /// `(h, central difference of ∫ρ_Q / ∫ν at step h)`.
    pub ladder: Vec<(f64, f64)>,
}

/// `B_disc = (d/dα)|₀ ∫ρ_Q(α) / ∫ν` at `μ = 0`, from central differences at
/// `h` and `h/2` combined by one Richardson step.
pub fn discrete_response_b(
    problem: &MeanFieldProblem,
    template: &SolverConfig,
    step: f64,
) -> Result<DiscreteResponse> {
    let nu = problem.external();
    if nu.total_charge() == 0.0 {
        return Err(Error::param("nu", "external density has zero total charge"));
    }
    if !(step > 0.0) {
        return Err(Error::param("step", format!("must be > 0, got {step}")));
    }
    let z = nu.total_charge();
    let charge = |alpha: f64| -> Result<f64> {
        let cfg = SolverConfig {
            alpha,
            mu: 0.0,
            ..template.clone()
        };
        let sol = solve_signed(problem, &cfg, Filling::FixedMu(0.0), None)?;
        localized_charge(&sol.rho, nu)
    };
    let mut ladder = Vec::new();
    for h in [step, 0.5 * step] {
        let d = (charge(h)? - charge(-h)?) / (2.0 * h) / z;
        ladder.push((h, d));
    }
    let (d1, d2) = (ladder[0].1, ladder[1].1);
    let b = (4.0 * d2 - d1) / 3.0;
    if !b.is_finite() || (d1 - d2).abs() > 0.05 * d2.abs() {
        return Err(Error::Extrapolation(format!(
            "step ladder {ladder:?} does not settle"
        )));
    }
    Ok(DiscreteResponse { b, ladder })
}

/// One row of the `renorm` table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenormRow {
    #[serde(rename = "Lambda")]
    pub cutoff: f64,
    #[serde(rename = "B_Lambda")]
    pub b: f64,
    pub alpha: f64,
    pub alpha_ph: f64,
    pub kappa: f64,
}

pub fn renorm_table(cutoffs: &[f64], alpha: f64) -> Result<Vec<RenormRow>> {
    cutoffs
        .iter()
        .map(|&c| {
            let p = RenormalizationPoint::from_bare(alpha, c)?;
            Ok(RenormRow {
                cutoff: c,
                b: b_lambda(c)?,
                alpha,
                alpha_ph: p.alpha_ph,
                kappa: p.kappa,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_value_at_one() {
        // a = 1/√2: (1/π)[(2/3) asinh 1 − (2/3)(0.70711) + 0.35355/9].
        let b = b_lambda(1.0).unwrap();
        assert!((b - 0.049_485_0).abs() < 5e-7, "{b}");
    }

    #[test]
    fn quadrature_matches_closed_form() {
        for l in [0.5, 1.0, 10.0, 100.0, 1e4] {
            let (q, c) = (b_lambda_quadrature(l).unwrap(), b_lambda(l).unwrap());
            assert!((q - c).abs() < 1e-12, "Λ={l}: {q} vs {c}");
        }
    }

    #[test]
    fn small_cutoff_behaviour() {
        // B ≈ Λ³/(3π) as Λ → 0.
        for l in [1e-2, 1e-3] {
            let b = b_lambda(l).unwrap();
            assert!((b / (l.powi(3) / (3.0 * PI)) - 1.0).abs() < 1e-3);
        }
        assert!(b_lambda(0.0).is_err());
        assert!(b_lambda(-1.0).is_err());
    }

    #[test]
    fn asymptotic_switch_is_continuous() {
        let below = {
            let a = ASYMPTOTIC_CUTOFF / (1.0 + ASYMPTOTIC_CUTOFF.powi(2)).sqrt();
            (2.0 / 3.0 * ASYMPTOTIC_CUTOFF.asinh() - 2.0 * a / 3.0 + a.powi(3) / 9.0) / PI
        };
        assert!((below - b_lambda_asymptotic(ASYMPTOTIC_CUTOFF)).abs() < 1e-13);
    }

    #[test]
    fn next_order_coefficient() {
        // (B − leading) Λ² → 1/(3π).
        for l in [100.0, 300.0, 1000.0] {
            let e = (b_lambda(l).unwrap() - b_lambda_leading(l)) * l * l;
            assert!((e - 1.0 / (3.0 * PI)).abs() < 1e-3, "{e}");
        }
    }

    #[test]
    fn coupling_maps() {
        assert_eq!(alpha_physical(0.0, 5.0).unwrap(), 0.0);
        let l = 50.0;
        let b = b_lambda(l).unwrap();
        for x in [0.01, 0.3, 1.0, 0.99 / b] {
            let back = alpha_physical(alpha_bare(x, l).unwrap(), l).unwrap();
            assert!((back - x).abs() < 1e-12 * x.max(1.0));
        }
        assert!((alpha_physical(f64::INFINITY, l).unwrap() - 1.0 / b).abs() < 1e-15);
        assert!((alpha_physical(1e12, l).unwrap() - 1.0 / b).abs() < 1e-9);
        let err = alpha_bare(1.0 / b, l).unwrap_err();
        assert!(err.to_string().contains("Landau pole"));
    }

    #[test]
    fn kappa_parameterization() {
        let l = lambda_from_kappa(1.0, 0.5).unwrap();
        assert!((b_lambda(l).unwrap() - 0.5).abs() < 1e-10);
        assert!((l - 12.097).abs() < 0.001, "{l}");
        assert!(lambda_from_kappa(1.0, 1e-6).unwrap() < 0.05);
        assert!(lambda_from_kappa(1.0, 1.0).is_err());
        assert!(RenormalizationPoint::from_kappa(0.5, 1.2).is_err());
        // Λ ≈ C e^{3πκ/2α_ph}: log Λ − 3πκ/(2α_ph) tends to a constant.
        let c: Vec<f64> = [0.05, 0.04, 0.03]
            .iter()
            .map(|&a| lambda_from_kappa(a, 0.3).unwrap().ln() - 3.0 * PI * 0.3 / (2.0 * a))
            .collect();
        let want = 5.0 / 6.0 - LN_2;
        for v in c {
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn point_invariants() {
        let p = RenormalizationPoint::from_bare(0.7, 20.0).unwrap();
        assert!(
            (p.alpha_ph() - p.alpha() / (1.0 + p.alpha() * b_lambda(20.0).unwrap())).abs() < 1e-12
        );
        let q = RenormalizationPoint::from_physical(p.alpha_ph(), 20.0).unwrap();
        assert!((q.alpha() - p.alpha()).abs() < 1e-12);
        assert!(p.kappa() < 1.0 && p.alpha_ph() < p.alpha());
    }

    #[test]
    fn renorm_table_rows() {
        let rows = renorm_table(&[2.0, 20.0], 0.5).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].b > rows[0].b && rows[1].alpha_ph < rows[0].alpha_ph);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_in_cutoff(t in -3.0f64..12.0, dt in 1e-3f64..1.0) {
                let (a, b) = (t.exp(), (t + dt).exp());
                prop_assert!(b_lambda(a).unwrap() < b_lambda(b).unwrap());
            }

            #[test]
            fn physical_below_bound(alpha in 0.0f64..1e6, t in -2.0f64..10.0) {
                let l = t.exp();
                let ap = alpha_physical(alpha, l).unwrap();
                prop_assert!(ap < 1.0 / b_lambda(l).unwrap());
                prop_assert!(ap <= alpha);
            }
        }
    }
}
