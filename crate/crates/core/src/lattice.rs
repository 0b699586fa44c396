//! Momentum lattices: the discretized one-particle cutoff space and the
//! lattice on which charge densities live.
//!
//! A [`MomentumGrid`] lists the momenta `p = (2π/L) n` of a periodic box of
//! side `L` that lie inside the cutoff ball `|p| ≤ Λ`. The one-particle space
//! is `ℂ⁴ ⊗ span{p}`, basis slot `4 i + s` for momentum `i`, spinor index `s`.

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Relative slack on the ball test so that lattice points lying exactly on
/// the sphere are kept regardless of rounding in `Λ L / 2π`.
const BALL_SLACK: f64 = 1e-12;

pub type IntVec = [i32; 3];

fn norm2_int(n: &IntVec) -> i64 {
    n.iter().map(|&c| i64::from(c) * i64::from(c)).sum()
}

fn ball_nodes(radius: f64, half_width: Option<i32>) -> Vec<IntVec> {
    let r2 = radius * radius * (1.0 + BALL_SLACK);
    let mut c = radius.floor() as i32;
    if let Some(h) = half_width {
        c = c.min(h);
    }
    let mut out = Vec::new();
    // Lexicographic on (n_x, n_y, n_z).
    for x in -c..=c {
        for y in -c..=c {
            for z in -c..=c {
                let n = [x, y, z];
                if (norm2_int(&n) as f64) <= r2 {
                    out.push(n);
                }
            }
        }
    }
    out
}

fn fingerprint(tag: &str, floats: &[f64], ints: &[i64], nodes: &[IntVec]) -> String {
    let mut h = Sha256::new();
    h.update(tag.as_bytes());
    for f in floats {
        h.update(f.to_bits().to_le_bytes());
    }
    for i in ints {
        h.update(i.to_le_bytes());
    }
    for n in nodes {
        for c in n {
            h.update(c.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Serializable summary of a grid, embedded in result files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDescriptor {
    pub box_side: f64,
    pub points_per_axis: usize,
    pub cutoff: f64,
    pub momentum_count: usize,
    pub dimension: usize,
    pub hash: String,
}

/// Integer lattice `{k = (2π/L) m : |k| ≤ k_max}` carrying density Fourier
/// coefficients.
#[derive(Debug)]
pub struct DensityLattice {
    box_side: f64,
    max_momentum: f64,
    nodes: Vec<IntVec>,
    cube: i32,
    slots: Vec<u32>,
    negation: Vec<u32>,
    hash: String,
}

const ABSENT: u32 = u32::MAX;

impl DensityLattice {
    pub fn new(box_side: f64, max_momentum: f64) -> Result<Self> {
        if !(box_side > 0.0 && box_side.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "box side must be positive, got {box_side}"
            )));
        }
        if !(max_momentum >= 0.0 && max_momentum.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "density lattice radius must be nonnegative, got {max_momentum}"
            )));
        }
        let radius = max_momentum * box_side / (2.0 * PI);
        let nodes = ball_nodes(radius, None);
        let cube = radius.floor() as i32;
        let side = (2 * cube + 1) as usize;
        let mut slots = vec![ABSENT; side * side * side];
        for (i, n) in nodes.iter().enumerate() {
            slots[Self::cube_offset(cube, n)] = i as u32;
        }
        let negation = nodes
            .iter()
            .map(|n| slots[Self::cube_offset(cube, &[-n[0], -n[1], -n[2]])])
            .collect();
        let hash = fingerprint("density-lattice", &[box_side, max_momentum], &[], &nodes);
        Ok(Self {
            box_side,
            max_momentum,
            nodes,
            cube,
            slots,
            negation,
            hash,
        })
    }

    fn cube_offset(cube: i32, n: &IntVec) -> usize {
        let side = 2 * cube + 1;
        (((n[0] + cube) * side + (n[1] + cube)) * side + (n[2] + cube)) as usize
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn box_side(&self) -> f64 {
        self.box_side
    }

    pub fn volume(&self) -> f64 {
        self.box_side.powi(3)
    }

    pub fn max_momentum(&self) -> f64 {
        self.max_momentum
    }

    pub fn nodes(&self) -> &[IntVec] {
        &self.nodes
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    /// Slot of the origin `k = 0`.
    pub fn origin(&self) -> usize {
        self.slots[Self::cube_offset(self.cube, &[0, 0, 0])] as usize
    }

    pub fn index_of(&self, n: &IntVec) -> Option<usize> {
        if n.iter().any(|c| c.abs() > self.cube) {
            return None;
        }
        match self.slots[Self::cube_offset(self.cube, n)] {
            ABSENT => None,
            i => Some(i as usize),
        }
    }

    /// Slot of `−k` for the node in slot `i`.
    pub fn negated(&self, i: usize) -> usize {
        self.negation[i] as usize
    }

    pub fn momentum(&self, i: usize) -> [f64; 3] {
        let s = 2.0 * PI / self.box_side;
        let n = self.nodes[i];
        [
            s * f64::from(n[0]),
            s * f64::from(n[1]),
            s * f64::from(n[2]),
        ]
    }

    /// `|k|²` of slot `i`.
    pub fn momentum_sq(&self, i: usize) -> f64 {
        let s = 2.0 * PI / self.box_side;
        s * s * norm2_int(&self.nodes[i]) as f64
    }

    /// Integer `|m|²` of slot `i`, the shell label.
    pub fn shell(&self, i: usize) -> i64 {
        norm2_int(&self.nodes[i])
    }
}

/// Finite momentum grid representing the cutoff one-particle space.
#[derive(Debug)]
pub struct MomentumGrid {
    box_side: f64,
    points_per_axis: usize,
    cutoff: f64,
    nodes: Vec<IntVec>,
    density_lattice: Arc<DensityLattice>,
    transfer: OnceLock<Vec<u32>>,
    hash: String,
}

impl MomentumGrid {
    /// Lists `p = (2π/L) n` with `|p| ≤ Λ` and `|n_i| < N/2`.
    ///
    /// The strict bound keeps the list closed under `p ↦ −p`.
    pub fn new(box_side: f64, points_per_axis: usize, cutoff: f64) -> Result<Self> {
        if !(box_side > 0.0 && box_side.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "box side L must be positive, got {box_side}"
            )));
        }
        if points_per_axis < 2 || points_per_axis % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis N must be an even integer >= 2, got {points_per_axis}"
            )));
        }
        if !(cutoff > 0.0 && cutoff.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "cutoff must be positive, got {cutoff}"
            )));
        }
        let nyquist = PI * points_per_axis as f64 / box_side;
        if cutoff > nyquist * (1.0 + BALL_SLACK) {
            return Err(Error::InvalidGrid(format!(
                "cutoff {cutoff} exceeds the grid Nyquist momentum pi*N/L = {nyquist:.6}; \
                 increase N to at least {}",
                2 * (cutoff * box_side / (2.0 * PI)).ceil() as usize
            )));
        }
        let half = (points_per_axis / 2) as i32 - 1;
        let radius = cutoff * box_side / (2.0 * PI);
        let nodes = ball_nodes(radius, Some(half));
        let density_lattice = Arc::new(DensityLattice::new(box_side, 2.0 * cutoff)?);
        let hash = fingerprint(
            "momentum-grid",
            &[box_side, cutoff],
            &[points_per_axis as i64],
            &nodes,
        );
        Ok(Self {
            box_side,
            points_per_axis,
            cutoff,
            nodes,
            density_lattice,
            transfer: OnceLock::new(),
            hash,
        })
    }

    pub fn box_side(&self) -> f64 {
        self.box_side
    }

    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn volume(&self) -> f64 {
        self.box_side.powi(3)
    }

    /// Number of momenta `M`.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// One-particle dimension `4 M`.
    pub fn dimension(&self) -> usize {
        4 * self.nodes.len()
    }

    pub fn nodes(&self) -> &[IntVec] {
        &self.nodes
    }

    pub fn momentum(&self, i: usize) -> [f64; 3] {
        let s = 2.0 * PI / self.box_side;
        let n = self.nodes[i];
        [
            s * f64::from(n[0]),
            s * f64::from(n[1]),
            s * f64::from(n[2]),
        ]
    }

    pub fn momenta(&self) -> Vec<[f64; 3]> {
        (0..self.len()).map(|i| self.momentum(i)).collect()
    }

    pub fn index_of(&self, n: &IntVec) -> Option<usize> {
        self.nodes.binary_search(n).ok()
    }

    /// The `|k| ≤ 2Λ` lattice carrying densities of operators on this grid.
    pub fn density_lattice(&self) -> &Arc<DensityLattice> {
        &self.density_lattice
    }

    /// Row-major `M × M` table: density-lattice slot of `p_i − p_j`.
    pub fn transfer_table(&self) -> &[u32] {
        self.transfer.get_or_init(|| {
            let m = self.len();
            let lat = &self.density_lattice;
            let mut t = Vec::with_capacity(m * m);
            for a in &self.nodes {
                for b in &self.nodes {
                    let k = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
                    // |n_i - n_j| ≤ 2R, so the transfer is always on the lattice.
                    t.push(
                        lat.index_of(&k)
                            .expect("momentum transfer inside the 2Λ ball")
                            as u32,
                    );
                }
            }
            t
        })
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn descriptor(&self) -> GridDescriptor {
        GridDescriptor {
            box_side: self.box_side,
            points_per_axis: self.points_per_axis,
            cutoff: self.cutoff,
            momentum_count: self.len(),
            dimension: self.dimension(),
            hash: self.hash.clone(),
        }
    }
}
