//! Adaptive Gauss-Kronrod (7/15) quadrature with global error control.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, Copy)]
struct Interval {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> Interval {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    let value = kronrod * h;
    let error = ((kronrod - gauss) * h).abs();
    Interval { a, b, value, error }
}

/// `int_a^b f`, refined until the error estimate is below `max(abs_tol, rel_tol |I|)`.
pub fn integrate(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Quad> {
    if a == b {
        return Ok(Quad {
            value: 0.0,
            error: 0.0,
        });
    }
    let first = gk15(&f, a, b);
    let mut heap = BinaryHeap::new();
    let mut value = first.value;
    let mut error = first.error;
    heap.push(first);
    while error > abs_tol.max(rel_tol * value.abs()) {
        if heap.len() >= MAX_INTERVALS {
            return Err(Error::DivergentIntegral(format!(
                "no convergence on [{a}, {b}] after {MAX_INTERVALS} subdivisions (estimate {value:.6e} +- {error:.2e})"
            )));
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        // resum periodically to keep round-off out of the running totals
        if heap.len() % 64 == 0 {
            value = heap.iter().map(|i| i.value).sum();
            error = heap.iter().map(|i| i.error).sum();
        }
    }
    if !value.is_finite() {
        return Err(Error::DivergentIntegral(format!(
            "non-finite value on [{a}, {b}]"
        )));
    }
    Ok(Quad { value, error })
}

/// `int_a^inf f` through the map `x = a + u / (1 - u)`.
pub fn integrate_to_infinity(
    f: impl Fn(f64) -> f64,
    a: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Quad> {
    integrate(
        |u| {
            if u >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - u;
            let v = f(a + u / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        rel_tol,
        abs_tol,
    )
}

/// `int_0^inf r^(gamma - 1) g(r) dr` for `gamma > 0`.
///
/// The algebraic endpoint factor on `[0, s]` is removed exactly by `r = s u^(1/gamma)`.
/// `breaks` lists interior points where `g` has kinks or compact-support edges.
pub fn integrate_radial_power(
    g: impl Fn(f64) -> f64,
    gamma: f64,
    split: f64,
    breaks: &[f64],
    rel_tol: f64,
) -> Result<Quad> {
    if gamma <= 0.0 {
        return Err(Error::DivergentIntegral(format!(
            "radial weight r^{:.4} is not integrable at the origin",
            gamma - 1.0
        )));
    }
    let abs_tol = 1e-300;
    // r = split * u^(1/gamma): r^(gamma-1) dr = split^gamma / gamma du
    let inv = 1.0 / gamma;
    let pre = split.powf(gamma) / gamma;
    let mut inner_breaks: Vec<f64> = breaks
        .iter()
        .filter(|&&b| b > 0.0 && b < split)
        .map(|&b| (b / split).powf(gamma))
        .collect();
    inner_breaks.sort_by(f64::total_cmp);
    let mut total = Quad {
        value: 0.0,
        error: 0.0,
    };
    let mut lo = 0.0;
    for hi in inner_breaks.into_iter().chain(std::iter::once(1.0)) {
        let q = integrate(|u| g(split * u.powf(inv)), lo, hi, rel_tol, abs_tol)?;
        total.value += pre * q.value;
        total.error += pre * q.error;
        lo = hi;
    }
    let mut outer_breaks: Vec<f64> = breaks.iter().copied().filter(|&b| b > split).collect();
    outer_breaks.sort_by(f64::total_cmp);
    let mut lo = split;
    for hi in outer_breaks {
        let q = integrate(|r| r.powf(gamma - 1.0) * g(r), lo, hi, rel_tol, abs_tol)?;
        total.value += q.value;
        total.error += q.error;
        lo = hi;
    }
    let tail = integrate_to_infinity(|r| r.powf(gamma - 1.0) * g(r), lo, rel_tol, abs_tol)?;
    total.value += tail.value;
    total.error += tail.error;
    Ok(total)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration.
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
            let pn = if n == 0 { 1.0 } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
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
