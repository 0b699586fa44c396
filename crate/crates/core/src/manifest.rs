//! Run manifests: what produced a set of output files.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::lattice::GridDescriptor;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub invocation: Vec<String>,
    pub seed: u64,
    pub config: Config,
    pub grid: Option<GridDescriptor>,
    /// Conventions every number in the outputs depends on.
    pub conventions: Vec<String>,
    /// Output files, relative to the manifest.
    pub outputs: Vec<String>,
    pub started_unix: f64,
    pub finished_unix: Option<f64>,
    /// SHA-256 of the manifest with the timestamp fields cleared.
    pub hash: String,
}

pub fn now_unix() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn new(
        subcommand: &str,
        invocation: Vec<String>,
        seed: u64,
        config: Config,
        grid: Option<GridDescriptor>,
    ) -> Self {
        let mut m = Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            subcommand: subcommand.to_string(),
            invocation,
            seed,
            config,
            grid,
            conventions: vec![
                "units m = c = 1".to_string(),
                "Coulomb pairing excludes k = 0 (uniform background)".to_string(),
                "density lattice |k| <= 2 Lambda".to_string(),
                "Dirac-Pauli representation, beta = diag(1,1,-1,-1)".to_string(),
            ],
            outputs: Vec::new(),
            started_unix: now_unix(),
            finished_unix: None,
            hash: String::new(),
        };
        m.rehash();
        m
    }

    pub fn add_output(&mut self, name: &str) {
        if !self.outputs.iter().any(|o| o == name) {
            self.outputs.push(name.to_string());
            self.rehash();
        }
    }

    pub fn finish(&mut self) {
        self.finished_unix = Some(now_unix());
    }

    pub fn compute_hash(&self) -> String {
        let mut clean = self.clone();
        clean.started_unix = 0.0;
        clean.finished_unix = None;
        clean.hash = String::new();
        let bytes = serde_json::to_vec(&clean).expect("manifest serializes");
        Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn rehash(&mut self) {
        self.hash = self.compute_hash();
    }
}
