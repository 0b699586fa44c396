//! 4×4 spinor symbols: Dirac matrices in the Dirac–Pauli representation,
//! the free Dirac symbol and the free vacuum projector.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

const Z: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// A 4×4 complex matrix attached to one momentum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinorSymbol(pub [[C64; 4]; 4]);

impl SpinorSymbol {
    pub const ZERO: Self = Self([[Z; 4]; 4]);

    pub fn identity() -> Self {
        Self::diagonal([1.0; 4])
    }

    pub fn diagonal(d: [f64; 4]) -> Self {
        let mut m = Self::ZERO;
        for (s, v) in d.into_iter().enumerate() {
            m.0[s][s] = C64::new(v, 0.0);
        }
        m
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z *= c);
        m
    }

    pub fn adjoint(&self) -> Self {
        let mut m = Self::ZERO;
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] = self.0[c][r].conj();
            }
        }
        m
    }

    pub fn conj(&self) -> Self {
        let mut m = *self;
        m.0.iter_mut().flatten().for_each(|z| *z = z.conj());
        m
    }

    pub fn trace(&self) -> C64 {
        (0..4).map(|s| self.0[s][s]).sum()
    }

    pub fn frobenius(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (*self - self.adjoint()).frobenius()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        *self * *other - *other * *self
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> [f64; 4] {
        let h = faer::Mat::<C64>::from_fn(4, 4, |r, c| 0.5 * (self.0[r][c] + self.0[c][r].conj()));
        let ev = h
            .self_adjoint_eigenvalues(faer::Side::Lower)
            .expect("4x4 Hermitian eigenvalues");
        [ev[0], ev[1], ev[2], ev[3]]
    }
}

impl Add for SpinorSymbol {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        for r in 0..4 {
            for c in 0..4 {
                self.0[r][c] += rhs.0[r][c];
            }
        }
        self
    }
}

impl Sub for SpinorSymbol {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        for r in 0..4 {
            for c in 0..4 {
                self.0[r][c] -= rhs.0[r][c];
            }
        }
        self
    }
}

impl Mul for SpinorSymbol {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut m = Self::ZERO;
        for r in 0..4 {
            for c in 0..4 {
                m.0[r][c] = (0..4).map(|k| self.0[r][k] * rhs.0[k][c]).sum();
            }
        }
        m
    }
}

fn block(sigma: [[C64; 2]; 2]) -> SpinorSymbol {
    // [[0, σ], [σ, 0]]
    let mut m = SpinorSymbol::ZERO;
    for r in 0..2 {
        for c in 0..2 {
            m.0[r][c + 2] = sigma[r][c];
            m.0[r + 2][c] = sigma[r][c];
        }
    }
    m
}

/// `β = diag(1, 1, −1, −1)`.
pub fn beta() -> SpinorSymbol {
    SpinorSymbol::diagonal([1.0, 1.0, -1.0, -1.0])
}

/// `α_j = [[0, σ_j], [σ_j, 0]]`, `j ∈ {0, 1, 2}`.
pub fn alpha(j: usize) -> SpinorSymbol {
    match j {
        0 => block([[Z, ONE], [ONE, Z]]),
        1 => block([[Z, -I], [I, Z]]),
        2 => block([[ONE, Z], [Z, -ONE]]),
        _ => panic!("Dirac matrix index {j} out of range"),
    }
}

/// Charge-conjugation matrix `C = iβα₂` (real, `C² = 1`).
pub fn charge_conjugation() -> SpinorSymbol {
    let mut m = beta() * alpha(1);
    m.0.iter_mut().flatten().for_each(|z| *z *= I);
    m
}

pub fn energy(p: &[f64; 3]) -> f64 {
    (1.0 + p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

/// `α·p + β`.
pub fn dirac_symbol(p: &[f64; 3]) -> SpinorSymbol {
    let mut m = beta();
    for (j, &pj) in p.iter().enumerate() {
        m = m + alpha(j).scale(pj);
    }
    m
}

/// `½ − (α·p + β) / (2 E(p))`.
pub fn free_projector_symbol(p: &[f64; 3]) -> SpinorSymbol {
    SpinorSymbol::identity().scale(0.5) - dirac_symbol(p).scale(0.5 / energy(p))
}

/// `(α·p + β)(1 + |p|²/Λ²)`.
pub fn smooth_dirac_symbol(p: &[f64; 3], cutoff: f64) -> SpinorSymbol {
    let p2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
    dirac_symbol(p).scale(1.0 + p2 / (cutoff * cutoff))
}

/// How the kinetic operator grows with momentum.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffFlavor {
    /// Sharp ball, unmodified `D⁰`.
    #[default]
    Sharp,
    /// Sharp ball with `D⁰(1 + |p|²/Λ²)`.
    Smooth,
}

impl CutoffFlavor {
    pub fn symbol(self, p: &[f64; 3], cutoff: f64) -> SpinorSymbol {
        match self {
            CutoffFlavor::Sharp => dirac_symbol(p),
            CutoffFlavor::Smooth => smooth_dirac_symbol(p, cutoff),
        }
    }

    /// Positive eigenvalue of the kinetic symbol, `|D⁰|` at `p`.
    pub fn magnitude(self, p: &[f64; 3], cutoff: f64) -> f64 {
        match self {
            CutoffFlavor::Sharp => energy(p),
            CutoffFlavor::Smooth => {
                let p2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                energy(p) * (1.0 + p2 / (cutoff * cutoff))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &SpinorSymbol, b: &SpinorSymbol, tol: f64) -> bool {
        (*a - *b).frobenius() < tol
    }

    #[test]
    fn clifford_relations() {
        let id = SpinorSymbol::identity();
        let b = beta();
        assert!(close(&(b * b), &id, 1e-15));
        for j in 0..3 {
            let aj = alpha(j);
            assert!(aj.hermiticity_defect() < 1e-15);
            assert!(close(&(aj * b + b * aj), &SpinorSymbol::ZERO, 1e-15));
            for k in 0..3 {
                let anti = aj * alpha(k) + alpha(k) * aj;
                let want = if j == k {
                    id.scale(2.0)
                } else {
                    SpinorSymbol::ZERO
                };
                assert!(close(&anti, &want, 1e-15));
            }
        }
    }

    #[test]
    fn zero_momentum_symbols() {
        assert_eq!(dirac_symbol(&[0.0; 3]), beta());
        let p = free_projector_symbol(&[0.0; 3]);
        assert!(close(
            &p,
            &SpinorSymbol::diagonal([0.0, 0.0, 1.0, 1.0]),
            1e-15
        ));
        assert!(close(&smooth_dirac_symbol(&[0.0; 3], 2.0), &beta(), 1e-15));
    }

    #[test]
    fn square_of_symbol_at_three() {
        let d = dirac_symbol(&[3.0, 0.0, 0.0]);
        // Explicit product, not via eigenvalues.
        assert!(close(
            &(d * d),
            &SpinorSymbol::identity().scale(10.0),
            1e-12
        ));
    }

    #[test]
    fn projector_commutes_with_symbol() {
        let p = [1.0, 1.0, 1.0];
        let c = dirac_symbol(&p).commutator(&free_projector_symbol(&p));
        assert!(c.frobenius() < 1e-13);
    }

    #[test]
    fn smooth_symbol_at_cutoff() {
        let cutoff = 2.5;
        let p = [0.0, cutoff * 0.6, cutoff * 0.8];
        let ev = smooth_dirac_symbol(&p, cutoff).eigenvalues();
        let want = 2.0 * (1.0 + cutoff * cutoff).sqrt();
        for (e, s) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
            assert!((e - s * want).abs() < 1e-12);
        }
        assert!((CutoffFlavor::Smooth.magnitude(&p, cutoff) - want).abs() < 1e-13);
    }

    #[test]
    fn smooth_symbol_large_cutoff_limit() {
        let p = [0.3, -1.2, 0.7];
        let d = dirac_symbol(&p);
        let mut prev = f64::INFINITY;
        for cutoff in [1e1, 1e2, 1e3, 1e4] {
            let err = (smooth_dirac_symbol(&p, cutoff) - d).frobenius();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 1e-7);
    }

    #[test]
    fn charge_conjugation_matrix() {
        let c = charge_conjugation();
        assert!(close(&(c * c), &SpinorSymbol::identity(), 1e-15));
        assert!(c.0.iter().flatten().all(|z| z.im == 0.0));
        // C maps the free vacuum at -p onto the positive-energy projector at p.
        let p = [0.4, -0.9, 1.3];
        let pm = free_projector_symbol(&[-p[0], -p[1], -p[2]]);
        let pp = SpinorSymbol::identity() - free_projector_symbol(&p);
        assert!(close(&(c * pm.conj() * c), &pp, 1e-14));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn momentum() -> impl Strategy<Value = [f64; 3]> {
            prop::array::uniform3(-20.0f64..20.0)
        }

        proptest! {
            #[test]
            fn symbol_squares_to_energy(p in momentum()) {
                let d = dirac_symbol(&p);
                let e2 = 1.0 + p.iter().map(|x| x * x).sum::<f64>();
                prop_assert!(d.hermiticity_defect() < 1e-12);
                prop_assert!((d * d - SpinorSymbol::identity().scale(e2)).frobenius() < 1e-12 * e2.max(1.0));
                let ev = d.eigenvalues();
                let e = e2.sqrt();
                for (x, s) in ev.iter().zip([-1.0, -1.0, 1.0, 1.0]) {
                    prop_assert!((x - s * e).abs() < 1e-12 * e);
                }
            }

            #[test]
            fn projector_is_rank_two_idempotent(p in momentum()) {
                let pm = free_projector_symbol(&p);
                prop_assert!(pm.hermiticity_defect() < 1e-12);
                prop_assert!((pm * pm - pm).frobenius() < 1e-12);
                prop_assert!((pm.trace() - C64::new(2.0, 0.0)).norm() < 1e-12);
                let centred = pm - SpinorSymbol::identity().scale(0.5);
                prop_assert!(centred.trace().norm() < 1e-12);
            }

            #[test]
            fn negation_preserves_spectrum(p in momentum()) {
                let a = free_projector_symbol(&p);
                let b = free_projector_symbol(&[-p[0], -p[1], -p[2]]);
                prop_assert!((a.trace() - b.trace()).norm() < 1e-12);
                let (ea, eb) = (a.eigenvalues(), b.eigenvalues());
                for k in 0..4 {
                    prop_assert!((ea[k] - eb[k]).abs() < 1e-12);
                }
            }
        }
    }
}
