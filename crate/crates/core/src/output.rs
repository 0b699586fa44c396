//! Result files: solution JSON, CSV tables and the manifest beside them.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::density::{ChargeDensity, DensityRecord};
use crate::energy::EnergyBreakdown;
use crate::error::Result;
use crate::lattice::{DensityLattice, GridDescriptor, MomentumGrid};
use crate::manifest::{RunManifest, MANIFEST_FILE};
use crate::renorm::{ChargeRelation, RenormRow};
use crate::scf::{EnergyCurve, FermiReport, Solution, SolverConfig};
use crate::series::{AsymptoticReport, ExtractionMeta, SeriesCoefficients};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolutionRecord {
    pub manifest_hash: String,
    pub grid: GridDescriptor,
    pub config: SolverConfig,
    pub alpha: f64,
    pub mu: f64,
    /// Generalized trace `Tr_{P⁰₋} Q`.
    pub charge: f64,
    pub energy: EnergyBreakdown,
    pub fermi: FermiReport,
    pub spectrum: Vec<f64>,
    pub iterations: usize,
    pub restarts: usize,
    pub residual_history: Vec<f64>,
    pub reconstruction_bound: f64,
    pub admissibility_margin: f64,
    pub renormalization: Option<ChargeRelation>,
    pub density: DensityRecord,
    pub external: DensityRecord,
}

impl SolutionRecord {
    pub fn new(
        sol: &Solution,
        grid: &MomentumGrid,
        config: &SolverConfig,
        manifest_hash: &str,
        renormalization: Option<ChargeRelation>,
    ) -> Self {
        Self {
            manifest_hash: manifest_hash.to_string(),
            grid: grid.descriptor(),
            config: config.clone(),
            alpha: sol.alpha,
            mu: sol.mu,
            charge: sol.charge,
            energy: sol.energy,
            fermi: sol.fermi.clone(),
            spectrum: sol.spectrum.clone(),
            iterations: sol.iterations,
            restarts: sol.restarts,
            residual_history: sol.residual_history.clone(),
            reconstruction_bound: sol.reconstruction_bound,
            admissibility_margin: sol.admissibility_margin,
            renormalization,
            density: sol.rho.to_record(),
            external: sol.external.to_record(),
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    pub fn density(&self, lattice: &Arc<DensityLattice>) -> Result<ChargeDensity> {
        ChargeDensity::from_record(lattice, &self.density)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub manifest_hash: String,
    pub grid: GridDescriptor,
    pub meta: ExtractionMeta,
    pub coefficients: Vec<DensityRecord>,
}

impl SeriesRecord {
    pub fn new(series: &SeriesCoefficients, grid: &MomentumGrid, manifest_hash: &str) -> Self {
        Self {
            manifest_hash: manifest_hash.to_string(),
            grid: grid.descriptor(),
            meta: series.meta.clone(),
            coefficients: series
                .coefficients
                .iter()
                .map(ChargeDensity::to_record)
                .collect(),
        }
    }
}

/// Writes result files into one directory and keeps its manifest current.
pub struct OutputDir {
    dir: PathBuf,
    manifest: RunManifest,
}

impl OutputDir {
    pub fn create(dir: &Path, manifest: RunManifest) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn register(&mut self, name: &str) -> PathBuf {
        self.manifest.add_output(name);
        self.path(name)
    }

    /// JSON outputs carry the manifest hash themselves; it is stamped from
    /// the final manifest in [`OutputDir::finish`].
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.register(name);
        fs::write(p, serde_json::to_vec_pretty(value)?)?;
        Ok(())
    }

    pub fn write_csv<T: Serialize>(
        &mut self,
        name: &str,
        rows: impl IntoIterator<Item = T>,
    ) -> Result<()> {
        let p = self.register(name);
        let mut w = csv::Writer::from_path(p)?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `manifest.json` and rewrites the `manifest_hash` field of every
    /// JSON output to the final hash.
    pub fn finish(mut self) -> Result<RunManifest> {
        self.manifest.finish();
        let hash = self.manifest.hash.clone();
        for name in &self.manifest.outputs {
            if name.ends_with(".json") {
                let p = self.dir.join(name);
                let mut v: serde_json::Value = serde_json::from_slice(&fs::read(&p)?)?;
                if let Some(obj) = v.as_object_mut() {
                    if obj.contains_key("manifest_hash") {
                        obj.insert(
                            "manifest_hash".into(),
                            serde_json::Value::String(hash.clone()),
                        );
                        fs::write(&p, serde_json::to_vec_pretty(&v)?)?;
                    }
                }
            }
        }
        fs::write(
            self.dir.join(MANIFEST_FILE),
            serde_json::to_vec_pretty(&self.manifest)?,
        )?;
        Ok(self.manifest)
    }
}

#[derive(Serialize)]
pub struct UehlingRow {
    pub x: f64,
    #[serde(rename = "V1")]
    pub v1: f64,
}

#[derive(Serialize)]
pub struct AsymRow {
    pub alpha_ph: f64,
    pub kappa: f64,
    #[serde(rename = "Lambda")]
    pub cutoff: f64,
    pub error: Option<f64>,
    pub exponent_fit: Option<f64>,
}

pub fn asym_rows(report: &AsymptoticReport) -> Vec<AsymRow> {
    report
        .cells
        .iter()
        .map(|c| AsymRow {
            alpha_ph: c.alpha_ph,
            kappa: c.kappa,
            cutoff: c.cutoff,
            error: c.error,
            exponent_fit: report
                .exponents
                .iter()
                .find(|(k, _)| *k == c.kappa)
                .and_then(|(_, p)| *p),
        })
        .collect()
}

pub fn curve_rows(curve: &EnergyCurve) -> impl Iterator<Item = &crate::scf::CurvePoint> {
    curve.points.iter()
}

pub fn renorm_rows(rows: &[RenormRow]) -> impl Iterator<Item = &RenormRow> {
    rows.iter()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Config;
    use crate::scf::CurvePoint;

    #[test]
    fn csv_headers_and_manifest_stamp() {
        let dir = tempfile::tempdir().unwrap();
        let m = RunManifest::new("sweep", vec![], 0, Config::default(), None);
        let mut out = OutputDir::create(dir.path(), m).unwrap();
        let curve = EnergyCurve {
            points: vec![CurvePoint {
                mu: 0.0,
                q: 0.0,
                energy: -1.5,
                converged: true,
                iters: 3,
            }],
        };
        out.write_csv("curve.csv", curve_rows(&curve)).unwrap();
        out.write_csv("u.csv", [UehlingRow { x: 0.5, v1: 0.25 }])
            .unwrap();
        out.write_json("x.json", &serde_json::json!({"manifest_hash": "", "v": 1}))
            .unwrap();
        let m = out.finish().unwrap();
        let text = fs::read_to_string(dir.path().join("curve.csv")).unwrap();
        assert_eq!(text.lines().next().unwrap(), "mu,q,energy,converged,iters");
        assert_eq!(
            fs::read_to_string(dir.path().join("u.csv"))
                .unwrap()
                .lines()
                .next()
                .unwrap(),
            "x,V1"
        );
        let v: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("x.json")).unwrap()).unwrap();
        assert_eq!(v["manifest_hash"], m.hash.as_str());
        let back: RunManifest =
            serde_json::from_slice(&fs::read(dir.path().join(MANIFEST_FILE)).unwrap()).unwrap();
        assert_eq!(back.outputs, vec!["curve.csv", "u.csv", "x.json"]);
        assert_eq!(back.compute_hash(), m.hash);
    }
}
