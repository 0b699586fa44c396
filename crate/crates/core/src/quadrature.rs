//! One-dimensional quadrature: globally adaptive Gauss–Kronrod (21 points)
//! and Gauss–Legendre rules for fixed composite grids.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the odd-indexed Kronrod nodes (the 10-point rule).
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

fn gk21(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[10] * fc;
    let mut g = 0.0;
    for j in 0..10 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Panel {
    err: f64,
    a: f64,
    b: f64,
    value: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// Tolerances for [`integrate`]; the target is `max(abs, rel·|I|)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_panels: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-13,
            rel: 1e-12,
            max_panels: 4000,
        }
    }
}

/// Globally adaptive bisection with the 21-point Kronrod rule.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Integral> {
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (v, e) = gk21(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        err: e,
        a,
        b,
        value: v,
    });
    let (mut total, mut err) = (v, e);
    let mut evals = 21;
    while err > tol.abs.max(tol.rel * total.abs()) {
        if heap.len() >= tol.max_panels {
            return Err(Error::Quadrature {
                a,
                b,
                error: err,
                evaluations: evals,
            });
        }
        let p = heap.pop().expect("nonempty");
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk21(&mut f, p.a, m);
        let (v2, e2) = gk21(&mut f, m, p.b);
        evals += 42;
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.err;
        heap.push(Panel {
            err: e1,
            a: p.a,
            b: m,
            value: v1,
        });
        heap.push(Panel {
            err: e2,
            a: m,
            b: p.b,
            value: v2,
        });
        if !total.is_finite() {
            return Err(Error::Quadrature {
                a,
                b,
                error: f64::INFINITY,
                evaluations: evals,
            });
        }
    }
    // Re-sum to shed accumulated rounding from the running totals.
    let value = heap.iter().map(|p| p.value).sum();
    let error = heap.iter().map(|p| p.err).sum();
    Ok(Integral {
        value,
        error,
        evaluations: evals,
    })
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exactness() {
        let r = integrate(|x| x.powi(7) - 3.0 * x * x, -1.0, 2.0, Tolerance::default()).unwrap();
        let exact = (256.0 - 1.0) / 8.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-13);
        assert_eq!(r.evaluations, 21);
    }

    #[test]
    fn endpoint_singularity() {
        // ∫₀¹ x^{-1/2} dx = 2.
        let r = integrate(
            |x| x.powf(-0.5),
            0.0,
            1.0,
            Tolerance {
                abs: 1e-11,
                rel: 1e-11,
                max_panels: 4000,
            },
        )
        .unwrap();
        assert!((r.value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn oscillatory() {
        let r = integrate(
            |x| (30.0 * x).sin() * x,
            0.0,
            std::f64::consts::PI,
            Tolerance::default(),
        )
        .unwrap();
        let exact = -std::f64::consts::PI / 30.0;
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_reported() {
        let err = integrate(
            |x| 1.0 / x,
            0.0,
            1.0,
            Tolerance {
                abs: 1e-12,
                rel: 0.0,
                max_panels: 50,
            },
        )
        .unwrap_err();
        assert_eq!(err.kind(), "quadrature");
    }

    #[test]
    fn gauss_legendre_rules() {
        for n in [1, 2, 5, 16, 33] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            // Exact for degree 2n − 1.
            let d = 2 * n as i32 - 1;
            let approx: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(d - 1)).sum();
            let exact = if (d - 1) % 2 == 0 {
                2.0 / d as f64
            } else {
                0.0
            };
            assert!((approx - exact).abs() < 1e-13, "n={n}");
        }
    }
}
