//! Density mixing: linear damping and Anderson (Pulay) extrapolation in the
//! Coulomb metric.

use std::collections::VecDeque;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::lattice::DensityLattice;

/// Per-mode weights `4πL³/|k|²`; the `k = 0` mode gets the weight of the
/// first shell so that it is still mixed.
pub(crate) fn coulomb_weights(lat: &DensityLattice) -> Vec<f64> {
    let o = lat.origin();
    let v = lat.volume();
    let kmin2 = (0..lat.len())
        .filter(|&i| i != o)
        .map(|i| lat.momentum_sq(i))
        .fold(f64::INFINITY, f64::min);
    (0..lat.len())
        .map(|i| {
            if i == o {
                if kmin2.is_finite() {
                    4.0 * PI * v / kmin2
                } else {
                    1.0
                }
            } else {
                4.0 * PI * v / lat.momentum_sq(i)
            }
        })
        .collect()
}

fn dot(w: &[f64], a: &[C64], b: &[C64]) -> f64 {
    w.iter()
        .zip(a.iter().zip(b))
        .map(|(w, (a, b))| w * (a.conj() * b).re)
        .sum()
}

pub(crate) struct Mixer {
    theta: f64,
    depth: usize,
    weights: Vec<f64>,
    history: VecDeque<(Vec<C64>, Vec<C64>)>,
}

impl Mixer {
    pub fn new(theta: f64, depth: usize, weights: Vec<f64>) -> Self {
        Self {
            theta,
            depth,
            weights,
            history: VecDeque::new(),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn restart(&mut self, theta: f64) {
        self.theta = theta;
        self.history.clear();
    }

    /// Next input density from input `x` and output `y`.
    pub fn next(&mut self, x: &[C64], y: &[C64]) -> Vec<C64> {
        let f: Vec<C64> = y.iter().zip(x).map(|(y, x)| y - x).collect();
        let theta = self.theta;
        let mut out: Vec<C64> = x.iter().zip(&f).map(|(x, f)| x + f * theta).collect();
        if self.depth > 0 {
            self.history.push_back((x.to_vec(), f.clone()));
            if self.history.len() > self.depth + 1 {
                self.history.pop_front();
            }
            let m = self.history.len() - 1;
            if m > 0 {
                let n = x.len();
                let dx: Vec<Vec<C64>> = (0..m)
                    .map(|j| {
                        (0..n)
                            .map(|k| self.history[j + 1].0[k] - self.history[j].0[k])
                            .collect()
                    })
                    .collect();
                let df: Vec<Vec<C64>> = (0..m)
                    .map(|j| {
                        (0..n)
                            .map(|k| self.history[j + 1].1[k] - self.history[j].1[k])
                            .collect()
                    })
                    .collect();
                let mut a = vec![vec![0.0; m]; m];
                let mut b = vec![0.0; m];
                for i in 0..m {
                    for j in 0..m {
                        a[i][j] = dot(&self.weights, &df[i], &df[j]);
                    }
                    b[i] = dot(&self.weights, &df[i], &f);
                }
                let scale = (0..m).map(|i| a[i][i]).fold(0.0, f64::max);
                for (i, row) in a.iter_mut().enumerate() {
                    row[i] += 1e-12 * scale + f64::MIN_POSITIVE;
                }
                if let Some(gamma) = solve_small(a, b) {
                    for j in 0..m {
                        for k in 0..n {
                            out[k] -= (dx[j][k] + df[j][k] * theta) * gamma[j];
                        }
                    }
                }
            }
        }
        out
    }
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() == 0.0 || !a[p][c].is_finite() {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            for k in c..n {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}
