//! External charge distributions built from a short description.
//!
//! Point nuclei are always smeared into Gaussians: a delta charge has
//! infinite Coulomb energy.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::ChargeDensity;
use crate::error::{Error, Result};
use crate::lattice::MomentumGrid;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityFamily {
    /// Normalized Gaussian of charge `charge` and standard deviation `width`.
    Gaussian {
        charge: f64,
        width: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    /// Nucleus of charge `charge` at `center`, smeared over `width`.
    RegularizedPoint {
        charge: f64,
        width: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    Sum {
        parts: Vec<DensityFamily>,
    },
}

impl DensityFamily {
    pub fn gaussian(charge: f64, width: f64) -> Self {
        Self::Gaussian {
            charge,
            width,
            center: [0.0; 3],
        }
    }

    pub fn total_charge(&self) -> f64 {
        match self {
            Self::Gaussian { charge, .. } | Self::RegularizedPoint { charge, .. } => *charge,
            Self::Sum { parts } => parts.iter().map(Self::total_charge).sum(),
        }
    }

    /// Smallest smearing width among the components.
    pub fn min_width(&self) -> Option<f64> {
        match self {
            Self::Gaussian { width, .. } | Self::RegularizedPoint { width, .. } => Some(*width),
            Self::Sum { parts } => parts.iter().filter_map(Self::min_width).reduce(f64::min),
        }
    }

    /// `(charge, width)` of a single centred component, the input of the
    /// radial Uehling routines.
    pub fn radial_profile(&self) -> Option<(f64, f64)> {
        match self {
            Self::Gaussian {
                charge,
                width,
                center,
            }
            | Self::RegularizedPoint {
                charge,
                width,
                center,
            } if *center == [0.0; 3] => Some((*charge, *width)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian {
                charge,
                width,
                center,
            }
            | Self::RegularizedPoint {
                charge,
                width,
                center,
            } => {
                if !charge.is_finite() {
                    return Err(Error::param("density.charge", "must be finite"));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(Error::param(
                        "density.width",
                        format!("must be > 0, got {width}"),
                    ));
                }
                if center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::param("density.center", "must be finite"));
                }
                Ok(())
            }
            Self::Sum { parts } => {
                if parts.is_empty() {
                    return Err(Error::param(
                        "density.parts",
                        "a sum needs at least one part",
                    ));
                }
                parts.iter().try_for_each(Self::validate)
            }
        }
    }
}

/// Total charge, Coulomb norm and log-weighted norms of a built density.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub total_charge: f64,
    pub coulomb_norm: f64,
    /// `Σ log(1+|k|)^{2N+2} |ν̂(k)|²` for `N = 0, 1`.
    pub log_weighted: [f64; 2],
    pub warnings: Vec<String>,
}

/// Fourier coefficients of `family` on the density lattice of `grid`.
///
/// Widths below the real-space spacing `L/N` are not resolved by the grid;
/// they are refused unless `force` is set, in which case a warning is kept.
pub fn make_density(
    family: &DensityFamily,
    grid: &MomentumGrid,
    force: bool,
) -> Result<(ChargeDensity, DensityReport)> {
    family.validate()?;
    let spacing = grid.box_side() / grid.points_per_axis() as f64;
    let mut warnings = Vec::new();
    if let Some(w) = family.min_width() {
        if w < spacing {
            let msg = format!("width {w} is below the grid spacing L/N = {spacing}");
            if !force {
                return Err(Error::Refused(msg));
            }
            warnings.push(msg);
        }
    }
    let lat = grid.density_lattice();
    let nu = build(family, lat);
    let report = DensityReport {
        total_charge: nu.total_charge(),
        coulomb_norm: nu.coulomb_norm(),
        log_weighted: [nu.log_weighted_norm(0).value, nu.log_weighted_norm(1).value],
        warnings,
    };
    Ok((nu, report))
}

fn build(family: &DensityFamily, lat: &Arc<crate::lattice::DensityLattice>) -> ChargeDensity {
    match family {
        DensityFamily::Gaussian {
            charge,
            width,
            center,
        }
        | DensityFamily::RegularizedPoint {
            charge,
            width,
            center,
        } => ChargeDensity::gaussian(lat, *charge, *width, *center),
        DensityFamily::Sum { parts } => parts
            .iter()
            .map(|p| build(p, lat))
            .reduce(|a, b| a.add(&b).expect("same lattice"))
            .unwrap_or_else(|| ChargeDensity::zeros(lat)),
    }
}
