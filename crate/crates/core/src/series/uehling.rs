//! First-order vacuum polarization of a radial charge: the Uehling potential
//! `V₁ = ν₁ ∗ |x|⁻¹` and its density `ν₁` on a momentum lattice.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::ChargeDensity;
use crate::error::{Error, Result};
use crate::lattice::DensityLattice;
use crate::quadrature::{gauss_legendre, integrate, Tolerance};

/// Radially symmetric charge distribution centred at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialGaussian {
    pub charge: f64,
    /// Standard deviation per axis.
    pub width: f64,
}

impl RadialGaussian {
    pub fn new(charge: f64, width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::param(
                "width",
                format!("must be positive, got {width}"),
            ));
        }
        if !charge.is_finite() {
            return Err(Error::param("charge", "must be finite"));
        }
        Ok(Self { charge, width })
    }

    pub fn density(&self, r: f64) -> f64 {
        let s2 = self.width * self.width;
        self.charge * (2.0 * PI * s2).powf(-1.5) * (-0.5 * r * r / s2).exp()
    }

    /// Continuum Fourier transform `∫ν e^{−ik·x} dx`.
    pub fn fourier(&self, k: f64) -> f64 {
        self.charge * (-0.5 * self.width * self.width * k * k).exp()
    }

    /// Radius beyond which the density is below `e^{−98}` of its peak.
    pub fn support_radius(&self) -> f64 {
        14.0 * self.width
    }

    /// Lattice coefficients `ν̂(k) = ν̃(|k|)/L³`.
    pub fn on_lattice(&self, lattice: &Arc<DensityLattice>) -> ChargeDensity {
        ChargeDensity::gaussian(lattice, self.charge, self.width, [0.0; 3])
    }
}

/// `√(t²−1)(2/t² + 1/t⁴)`, positive on `(1, ∞)`.
pub fn uehling_weight(t: f64) -> f64 {
    (t * t - 1.0).max(0.0).sqrt() * (2.0 / (t * t) + 1.0 / t.powi(4))
}

/// Tail of `e^{−s}` beyond which contributions are dropped relative to the peak.
const EXP_WINDOW: f64 = 60.0;

/// `∫ e^{−μ|x−y|} ν(y)/|x−y| dy` for radial `ν`, after `s = μ|r − x|`:
/// `(2π/μ) [J₋/(μx) + (1 − e^{−2μx})/(μx) · J₊]`.
fn yukawa(profile: &RadialGaussian, x: f64, mu: f64, tol: Tolerance) -> Result<f64> {
    let rmax = profile.support_radius();
    let y = mu * x;
    let mut total = 0.0;
    if x > 0.0 {
        let lo = (mu * (x - rmax)).max(0.0);
        let hi = y.min(lo + EXP_WINDOW);
        if hi > lo {
            let j = integrate(
                |s| {
                    let r = x - s / mu;
                    r * profile.density(r) * (-s).exp() * -(-2.0 * (y - s)).exp_m1()
                },
                lo,
                hi,
                tol,
            )?;
            total += j.value / y;
        }
    }
    if x < rmax {
        let hi = (mu * (rmax - x)).min(EXP_WINDOW);
        let j = integrate(
            |s| {
                let r = x + s / mu;
                r * profile.density(r) * (-s).exp()
            },
            0.0,
            hi,
            tol,
        )?;
        let factor = if y == 0.0 {
            2.0
        } else {
            -(-2.0 * y).exp_m1() / y
        };
        total += factor * j.value;
    }
    Ok(2.0 * PI / mu * total)
}

/// `V₁(x) = (1/3π) ∫₁^∞ dt w(t) ∫ e^{−2t|x−y|} ν(y)/|x−y| dy`, outer
/// integral in `t = cosh u`.
pub fn uehling_potential(profile: &RadialGaussian, x: f64) -> Result<f64> {
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::param("x", format!("radius must be >= 0, got {x}")));
    }
    if profile.charge == 0.0 {
        return Ok(0.0);
    }
    let inner = Tolerance {
        abs: 0.0,
        rel: 1e-12,
        max_panels: 2000,
    };
    let outer = Tolerance {
        abs: 0.0,
        rel: 1e-11,
        max_panels: 4000,
    };
    let mut failure = None;
    let r = integrate(
        |u| {
            let (c, sh) = (u.cosh(), u.sinh());
            let w = sh * sh * (2.0 / (c * c) + 1.0 / c.powi(4));
            match yukawa(profile, x, 2.0 * c, inner) {
                Ok(v) => w * v,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            }
        },
        0.0,
        30.0,
        outer,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(r.value / (3.0 * PI))
}

/// Radial panels for the Fourier transform of `V₁`: fine near the charge,
/// coarser in the exponential tail.
fn radial_nodes(profile: &RadialGaussian) -> Vec<(f64, f64)> {
    let (gx, gw) = gauss_legendre(16);
    let inner_end = (profile.support_radius() * 0.6).max(2.0);
    let outer_end = profile.support_radius() + 20.0;
    let mut edges = Vec::new();
    let mut r = 0.0;
    while r < inner_end - 1e-12 {
        edges.push(r);
        r += 0.1;
    }
    while r < outer_end - 1e-12 {
        edges.push(r);
        r += 0.5;
    }
    edges.push(outer_end);
    let mut nodes = Vec::new();
    for w in edges.windows(2) {
        let (c, h) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for (x, wt) in gx.iter().zip(&gw) {
            nodes.push((c + h * x, h * wt));
        }
    }
    nodes
}

/// Tabulated `V₁` on the radial quadrature nodes (used for Fourier transforms).
#[derive(Clone, Debug)]
pub struct UehlingTable {
    nodes: Vec<(f64, f64)>,
    values: Vec<f64>,
}

impl UehlingTable {
    pub fn new(profile: &RadialGaussian) -> Result<Self> {
        let nodes = radial_nodes(profile);
        let values = nodes
            .par_iter()
            .map(|&(r, _)| uehling_potential(profile, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { nodes, values })
    }

    /// `|k|² V̂₁(k) / 4π = k ∫ r V₁(r) sin(kr) dr`; zero at `k = 0`.
    pub fn density_transform(&self, k: f64) -> f64 {
        if k == 0.0 {
            return 0.0;
        }
        k * self
            .nodes
            .iter()
            .zip(&self.values)
            .map(|(&(r, w), v)| w * r * v * (k * r).sin())
            .sum::<f64>()
    }

    /// `V̂₁(0) = 4π ∫ r² V₁(r) dr`.
    pub fn potential_integral(&self) -> f64 {
        4.0 * PI
            * self
                .nodes
                .iter()
                .zip(&self.values)
                .map(|(&(r, w), v)| w * r * r * v)
                .sum::<f64>()
    }

    /// `ν̂₁` on a lattice (one transform per shell).
    pub fn on_lattice(&self, lattice: &Arc<DensityLattice>) -> ChargeDensity {
        let v = lattice.volume();
        let mut cache = std::collections::HashMap::new();
        ChargeDensity::from_fn(lattice, |i, _| {
            let s = lattice.shell(i);
            let val = *cache
                .entry(s)
                .or_insert_with(|| self.density_transform(lattice.momentum_sq(i).sqrt()));
            C64::new(val / v, 0.0)
        })
    }
}

/// `ν̂₁(k) = |k|² V̂₁(|k|) / 4π` sampled on the lattice.
pub fn uehling_density(
    profile: &RadialGaussian,
    lattice: &Arc<DensityLattice>,
) -> Result<ChargeDensity> {
    if profile.charge == 0.0 {
        return Ok(ChargeDensity::zeros(lattice));
    }
    Ok(UehlingTable::new(profile)?.on_lattice(lattice))
}
