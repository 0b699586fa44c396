//! Charge densities as Fourier coefficients on a [`DensityLattice`], with the
//! Coulomb pairing (uniform-background convention: the `k = 0` mode carries
//! no Coulomb energy).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{DensityLattice, IntVec};

/// Real charge density `ρ(x) = Σ_k ρ̂(k) e^{ik·x}` on a periodic box.
#[derive(Clone, Debug)]
pub struct ChargeDensity {
    lattice: Arc<DensityLattice>,
    coeffs: Vec<C64>,
}

impl ChargeDensity {
    pub fn zeros(lattice: &Arc<DensityLattice>) -> Self {
        Self {
            lattice: Arc::clone(lattice),
            coeffs: vec![C64::new(0.0, 0.0); lattice.len()],
        }
    }

    pub fn from_coefficients(lattice: &Arc<DensityLattice>, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != lattice.len() {
            return Err(Error::DimensionMismatch {
                expected: lattice.len(),
                found: coeffs.len(),
            });
        }
        Ok(Self {
            lattice: Arc::clone(lattice),
            coeffs,
        })
    }

    /// Builds coefficients from `f(slot, k)`.
    pub fn from_fn(
        lattice: &Arc<DensityLattice>,
        mut f: impl FnMut(usize, [f64; 3]) -> C64,
    ) -> Self {
        let coeffs = (0..lattice.len())
            .map(|i| f(i, lattice.momentum(i)))
            .collect();
        Self {
            lattice: Arc::clone(lattice),
            coeffs,
        }
    }

    /// Normalized Gaussian of standard deviation `width` per axis:
    /// `ν̂(k) = Z e^{−s²k²/2} e^{−ik·c} / L³`.
    pub fn gaussian(
        lattice: &Arc<DensityLattice>,
        charge: f64,
        width: f64,
        center: [f64; 3],
    ) -> Self {
        let v = lattice.volume();
        Self::from_fn(lattice, |_, k| {
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let ph = -(k[0] * center[0] + k[1] * center[1] + k[2] * center[2]);
            C64::from_polar(charge / v * (-0.5 * width * width * k2).exp(), ph)
        })
    }

    pub fn lattice(&self) -> &Arc<DensityLattice> {
        &self.lattice
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [C64] {
        &mut self.coeffs
    }

    pub fn coefficient(&self, n: &IntVec) -> Option<C64> {
        self.lattice.index_of(n).map(|i| self.coeffs[i])
    }

    /// `∫ρ = L³ ρ̂(0)`.
    pub fn total_charge(&self) -> f64 {
        self.lattice.volume() * self.coeffs[self.lattice.origin()].re
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if Arc::ptr_eq(&self.lattice, &other.lattice) || self.lattice.hash() == other.lattice.hash()
        {
            Ok(())
        } else {
            Err(Error::LatticeMismatch {
                left: self.lattice.hash()[..12].to_string(),
                right: other.lattice.hash()[..12].to_string(),
            })
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            lattice: Arc::clone(&self.lattice),
            coeffs: self.coeffs.iter().map(|z| z * c).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.check_compatible(other)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(x, y)| x * a + y * b)
            .collect();
        Ok(Self {
            lattice: Arc::clone(&self.lattice),
            coeffs,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, -1.0)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(1.0, other, 1.0)
    }

    /// `max_k |ρ̂(−k) − conj ρ̂(k)|`.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|i| (self.coeffs[self.lattice.negated(i)] - self.coeffs[i].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Replaces the coefficients by their conjugate-symmetric part.
    pub fn symmetrize(&mut self) {
        let old = self.coeffs.clone();
        for (i, c) in self.coeffs.iter_mut().enumerate() {
            *c = 0.5 * (old[i] + old[self.lattice.negated(i)].conj());
        }
    }

    /// `‖ρ‖_𝒞 = √D(ρ, ρ)`.
    pub fn coulomb_norm(&self) -> f64 {
        coulomb_pairing(self, self)
            .expect("same lattice")
            .max(0.0)
            .sqrt()
    }

    /// Discrete `L²` norm `√(L³ Σ_k |ρ̂(k)|²)`, optionally skipping `k = 0`.
    pub fn l2_norm(&self, include_origin: bool) -> f64 {
        let o = self.lattice.origin();
        let s: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| include_origin || *i != o)
            .map(|(_, z)| z.norm_sqr())
            .sum();
        (self.lattice.volume() * s).sqrt()
    }

    /// `max(‖ρ‖_{L²}, ‖ρ‖_𝒞)` with `k = 0` excluded from both.
    pub fn l2_coulomb_norm(&self) -> f64 {
        self.l2_norm(false).max(self.coulomb_norm())
    }

    pub fn max_abs_difference(&self, other: &Self) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Fourier coefficients of the Coulomb potential `ρ ∗ |x|⁻¹`, zero at `k = 0`.
    pub fn coulomb_potential(&self) -> Vec<C64> {
        let o = self.lattice.origin();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, z)| {
                if i == o {
                    C64::new(0.0, 0.0)
                } else {
                    z * (4.0 * PI / self.lattice.momentum_sq(i))
                }
            })
            .collect()
    }

    /// Real-space value of the lattice Coulomb potential at `x`.
    pub fn potential_at(&self, x: [f64; 3]) -> f64 {
        let v = self.coulomb_potential();
        (0..v.len())
            .map(|i| {
                let k = self.lattice.momentum(i);
                let ph = k[0] * x[0] + k[1] * x[1] + k[2] * x[2];
                (v[i] * C64::from_polar(1.0, ph)).re
            })
            .sum()
    }

    /// `L³ Σ_k log(1+|k|)^{2N+2} |ρ̂(k)|²`.
    pub fn log_weighted_norm(&self, order: u32) -> LogWeightedNorm {
        let p = 2 * order as i32 + 2;
        let value = self.lattice.volume()
            * self
                .coeffs
                .iter()
                .enumerate()
                .map(|(i, z)| {
                    (1.0 + self.lattice.momentum_sq(i).sqrt()).ln().powi(p) * z.norm_sqr()
                })
                .sum::<f64>();
        LogWeightedNorm { order, value }
    }

    pub fn to_record(&self) -> DensityRecord {
        DensityRecord {
            lattice_hash: self.lattice.hash().to_string(),
            box_side: self.lattice.box_side(),
            max_momentum: self.lattice.max_momentum(),
            coefficients: self
                .lattice
                .nodes()
                .iter()
                .zip(&self.coeffs)
                .map(|(n, z)| (*n, z.re, z.im))
                .collect(),
        }
    }

    pub fn from_record(lattice: &Arc<DensityLattice>, record: &DensityRecord) -> Result<Self> {
        if record.lattice_hash != lattice.hash() {
            return Err(Error::LatticeMismatch {
                left: record.lattice_hash.chars().take(12).collect(),
                right: lattice.hash()[..12].to_string(),
            });
        }
        let mut d = Self::zeros(lattice);
        for (n, re, im) in &record.coefficients {
            let i = lattice.index_of(n).ok_or_else(|| {
                Error::Config(format!("density coefficient at {n:?} is off the lattice"))
            })?;
            d.coeffs[i] = C64::new(*re, *im);
        }
        Ok(d)
    }
}

/// `D(f, g) = 4π L³ Σ_{k≠0} Re(conj f̂(k) ĝ(k)) / |k|²`.
pub fn coulomb_pairing(f: &ChargeDensity, g: &ChargeDensity) -> Result<f64> {
    f.check_compatible(g)?;
    let lat = &f.lattice;
    let o = lat.origin();
    let s: f64 = (0..lat.len())
        .filter(|&i| i != o)
        .map(|i| (f.coeffs[i].conj() * g.coeffs[i]).re / lat.momentum_sq(i))
        .sum();
    Ok(4.0 * PI * lat.volume() * s)
}

/// Log-weighted Fourier norm, the finiteness diagnostic for the series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogWeightedNorm {
    pub order: u32,
    pub value: f64,
}

/// JSON form of a density: lattice hash plus `(k-index, re, im)` triples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityRecord {
    pub lattice_hash: String,
    pub box_side: f64,
    pub max_momentum: f64,
    pub coefficients: Vec<(IntVec, f64, f64)>,
}
