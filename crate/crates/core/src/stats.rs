//! Limit laws of the fluctuations and the ensemble estimators used to test them.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::evolution::{propagate, PropagatorSpec, Spectral};
use crate::grid::{check_grid, Field, FourierPlan, GridSpec};
use crate::medium::riesz_constant;
use crate::quadrature::{gauss_legendre, integrate};
use crate::spectrum::PowerSpectrum;

/// Minimum ensemble size accepted by [`ensemble_stats`].
pub const MIN_SAMPLES: usize = 100;

/// `M_t(x) = int_0^t (G_s M)(x) (G_(t-s) u0)(x) ds` with `G = exp(-t(|D|^m - rho))`,
/// by the trapezoid rule with `steps` intervals.
pub fn script_m(t: f64, test: &Field, u0: &Field, rho: f64, m: f64, steps: usize) -> Result<Field> {
    check_grid(test.grid(), u0.grid())?;
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParams(format!("t = {t} must be >= 0")));
    }
    if steps == 0 {
        return Err(Error::InvalidParams(
            "script_m needs at least one step".into(),
        ));
    }
    let grid = *u0.grid();
    let mut acc = vec![0.0; grid.len()];
    if t == 0.0 {
        return Field::new(grid, acc);
    }
    let h = t / steps as f64;
    let prop = PropagatorSpec::Homogenized(rho);
    for j in 0..=steps {
        let s = j as f64 * h;
        let w = if j == 0 || j == steps { 0.5 * h } else { h };
        let a = propagate(test, &prop, m, s)?;
        let b = propagate(u0, &prop, m, t - s)?;
        for ((x, p), q) in acc.iter_mut().zip(a.values()).zip(b.values()) {
            *x += w * p * q;
        }
    }
    Field::new(grid, acc)
}

/// `sigma^2 = (2pi)^d R^(0)`, the integral of the covariance.
pub fn sigma_squared(spec: &PowerSpectrum, d: usize) -> Result<f64> {
    if spec.is_long_range() {
        return Err(Error::InvalidSpectrum(
            "sigma^2 is infinite for long-range spectra".into(),
        ));
    }
    Ok((2.0 * PI).powi(d as i32) * spec.eval(0.0))
}

/// `(2pi)^d R^(0) int M_t^2 dx`.
pub fn limit_variance_short(spec: &PowerSpectrum, mt: &Field) -> Result<f64> {
    Ok(sigma_squared(spec, mt.grid().dim())? * mt.energy())
}

/// Both evaluations of the long-range limit variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongRangeVariance {
    /// `S^(0) int |M_t^(xi)|^2 |xi|^-n dxi`.
    pub spectral: f64,
    /// `(2pi)^d S^(0) int int M_t(x) c_n |x - y|^(n-d) M_t(y) dx dy`.
    pub kernel: f64,
}

impl LongRangeVariance {
    pub fn relative_gap(&self) -> f64 {
        (self.spectral - self.kernel).abs() / self.spectral.abs().max(f64::MIN_POSITIVE)
    }
}

/// Cells within this sup-norm distance of the singular point use cell averages.
const NEAR_CELLS: i64 = 3;

/// `(1 / s^d) int_cell |x|^-p dx` over the cube of side `s` centred at `s * center`.
pub fn cell_average_power(d: usize, center: &[i64], side: f64, p: f64) -> Result<f64> {
    if p >= d as f64 {
        return Err(Error::KernelSingular(format!(
            "|x|^-{p} is not locally integrable in d = {d}"
        )));
    }
    let half = 0.5 * side;
    if center.iter().all(|&c| c == 0) {
        let df = d as f64;
        let radial = half.powf(df - p) / (df - p);
        let angular = match d {
            1 => Ok(2.0),
            2 => integrate(|u| (1.0 + u * u).powf(-0.5 * p), 0.0, 1.0, 1e-12, 0.0)
                .map(|q| 8.0 * q.value),
            3 => integrate(
                |u| {
                    integrate(
                        |v| (1.0 + u * u + v * v).powf(-0.5 * p),
                        0.0,
                        u,
                        1e-12,
                        1e-300,
                    )
                    .map(|q| q.value)
                    .unwrap_or(f64::NAN)
                },
                0.0,
                1.0,
                1e-11,
                0.0,
            )
            .map(|q| 48.0 * q.value),
            _ => return Err(Error::Domain(format!("dimension {d} not supported"))),
        }
        .map_err(|e| Error::KernelSingular(e.to_string()))?;
        let value = angular * radial / side.powi(d as i32);
        if !value.is_finite() {
            return Err(Error::KernelSingular(
                "origin cell integral is not finite".into(),
            ));
        }
        return Ok(value);
    }
    let (x, w) = gauss_legendre(16);
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let mut r2 = 0.0;
        let mut weight = 1.0;
        for a in 0..d {
            let coord = side * center[a] as f64 + half * x[idx[a]];
            r2 += coord * coord;
            weight *= 0.5 * w[idx[a]];
        }
        total += weight * r2.powf(-0.5 * p);
        let mut a = 0;
        loop {
            if a == d {
                return Ok(total);
            }
            idx[a] += 1;
            if idx[a] < x.len() {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

/// Table of `|x|^-p` weights on a lattice of spacing `side`: cell averages near the origin,
/// point values elsewhere. `offsets(k)` gives the integer offset of flat index `k`.
fn power_weights(
    grid: &GridSpec,
    side: f64,
    p: f64,
    offset: impl Fn(usize) -> [i64; 3],
) -> Result<Vec<f64>> {
    let d = grid.dim();
    (0..grid.len())
        .map(|k| {
            let o = offset(k);
            let o = &o[..d];
            if o.iter().all(|c| c.abs() <= NEAR_CELLS) {
                cell_average_power(d, o, side, p)
            } else {
                let r = side * o.iter().map(|&c| (c * c) as f64).sum::<f64>().sqrt();
                Ok(r.powf(-p))
            }
        })
        .collect()
}

/// Copies `f` into the corner of a grid `factor` times larger per axis.
fn zero_padded(f: &Field, factor: usize) -> Result<Field> {
    let g = f.grid();
    let big = GridSpec::new(g.dim(), g.points() * factor, g.length() * factor as f64)?;
    let mut values = vec![0.0; big.len()];
    for (k, &v) in f.values().iter().enumerate() {
        let idx = g.unflatten(k);
        values[big.flatten(&idx[..g.dim()])] = v;
    }
    Field::new(big, values)
}

/// Long-range limit variance in spectral and Riesz-kernel form.
///
/// Both sides use a grid twice as large per axis, so the kernel convolution is
/// linear rather than periodic and the spectral sum samples `M_t^` twice as
/// finely. Weights of the singular factor are cell-averaged near its pole.
pub fn limit_variance_long(spec: &PowerSpectrum, mt: &Field) -> Result<LongRangeVariance> {
    let d = mt.grid().dim();
    if !spec.is_long_range() {
        return Err(Error::InvalidSpectrum(
            "limit_variance_long needs a long-range spectrum".into(),
        ));
    }
    spec.validate_for(d)?;
    let n_hat = spec.exponent();
    let s0 = spec.value_at_origin();
    let padded = zero_padded(mt, 2)?;
    let big = *padded.grid();

    let spectrum = FourierPlan::new(&big).forward(&padded);
    let dxi = big.freq_step();
    let w_spec = power_weights(&big, dxi, n_hat, |k| big.wave_vector(k))?;
    let spectral = s0
        * big.freq_cell_volume()
        * spectrum
            .coeffs()
            .iter()
            .zip(&w_spec)
            .map(|(c, w)| c.norm_sqr() * w)
            .sum::<f64>();

    let dx = big.spacing();
    let c_n = riesz_constant(d, n_hat)?;
    let w_ker = power_weights(&big, dx, d as f64 - n_hat, |k| big.wave_vector(k))?;
    let sp = Spectral::new(&big);
    let kernel_hat = sp.coeffs(&w_ker);
    let m_hat = sp.coeffs(padded.values());
    let conv: Vec<Complex64> = kernel_hat
        .iter()
        .zip(&m_hat)
        .map(|(a, b)| a * b * big.len() as f64)
        .collect();
    let smoothed = sp.physical(&conv);
    let dv = big.cell_volume();
    let double = padded
        .values()
        .iter()
        .zip(&smoothed)
        .map(|(a, b)| a * b)
        .sum::<f64>()
        * dv
        * dv;
    let kernel = (2.0 * PI).powi(d as i32) * s0 * c_n * double;
    Ok(LongRangeVariance { spectral, kernel })
}

/// `sup_tau int_(|xi| < 1) |u0^(xi + tau)|^2 |xi|^-n dxi` over lattice shifts `tau`.
pub fn regularity_integral(u0: &Field, n_hat: f64) -> Result<f64> {
    let grid = *u0.grid();
    let d = grid.dim();
    let spectrum = FourierPlan::new(&grid).forward(u0);
    let dxi = grid.freq_step();
    let ball: Vec<(usize, f64)> = (0..grid.len())
        .filter(|&k| grid.freq_norm(k) < 1.0)
        .map(|k| {
            let w = grid.wave_vector(k);
            cell_average_power(d, &w[..d], dxi, n_hat).map(|v| (k, v))
        })
        .collect::<Result<_>>()?;
    let vol = grid.freq_cell_volume();
    let mut sup = 0.0f64;
    for tau in 0..grid.len() {
        let wt = grid.wave_vector(tau);
        let mut acc = 0.0;
        for &(k, w) in &ball {
            let wk = grid.wave_vector(k);
            let mut shifted = [0i64; 3];
            for a in 0..d {
                shifted[a] = wk[a] + wt[a];
            }
            let flat = grid.flat_of_wave(&shifted);
            acc += spectrum.coeffs()[flat].norm_sqr() * w;
        }
        sup = sup.max(acc * vol);
    }
    Ok(sup)
}

/// Fractional Brownian covariance `E{B(x) B(y)}`.
///
/// Isotropic: `(|x|^2H + |y|^2H - |x - y|^2H) / 2`. With per-axis exponents the
/// product form `2^-d prod_i (|x_i|^2H_i + |y_i|^2H_i - |x_i - y_i|^2H_i)` is used.
pub fn fbm_covariance(
    x: &[f64],
    y: &[f64],
    hurst: f64,
    anisotropic: Option<&[f64]>,
) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Domain("points have different dimensions".into()));
    }
    let check = |h: f64| {
        if h > 0.0 && h < 1.0 {
            Ok(())
        } else {
            Err(Error::Domain(format!("Hurst parameter {h} not in (0, 1)")))
        }
    };
    match anisotropic {
        None => {
            check(hurst)?;
            let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            let e = 2.0 * hurst;
            Ok(0.5 * (norm(x).powf(e) + norm(y).powf(e) - norm(&diff).powf(e)))
        }
        Some(hs) => {
            if hs.len() != x.len() {
                return Err(Error::Domain(
                    "one Hurst parameter per axis required".into(),
                ));
            }
            let mut prod = 1.0;
            for ((&a, &b), &h) in x.iter().zip(y).zip(hs) {
                check(h)?;
                let e = 2.0 * h;
                prod *= 0.5 * (a.abs().powf(e) + b.abs().powf(e) - (a - b).abs().powf(e));
            }
            Ok(prod)
        }
    }
}

/// One weighted moment of one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSample {
    pub eps: f64,
    pub seed: u64,
    /// `(u, M)` or its normalized fluctuation.
    pub x: f64,
    /// `int |u|^2 dx`.
    pub energy: f64,
    pub t: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub n: usize,
    pub mean: f64,
    /// Unbiased sample variance.
    pub var: f64,
    /// Standard error of the mean.
    pub se: f64,
    /// Standard error of `var`, `sqrt((mu_4 - var^2) / n)`.
    pub var_se: f64,
    pub skew: f64,
    pub excess_kurtosis: f64,
    /// Kolmogorov-Smirnov distance to the normal law with the sample mean and variance.
    pub ks_stat: Option<f64>,
    pub ks_p: Option<f64>,
    /// All samples equal: higher moments and the KS test are undefined.
    pub degenerate: bool,
}

/// `Phi(z)`.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let l2 = lambda * lambda;
        let mut cdf = 0.0;
        for k in 1..=20 {
            let j = (2 * k - 1) as f64;
            cdf += (-j * j * PI * PI / (8.0 * l2)).exp();
        }
        (1.0 - cdf * (2.0 * PI).sqrt() / lambda).clamp(0.0, 1.0)
    } else {
        let mut q = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            q += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * q).clamp(0.0, 1.0)
    }
}

/// Moments, standard errors and a normality test of `values`.
pub fn ensemble_stats(values: &[f64]) -> Result<EnsembleStats> {
    let n = values.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_SAMPLES,
            got: n,
        });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in values {
        let c = v - mean;
        let c2 = c * c;
        m2 += c2;
        m3 += c2 * c;
        m4 += c2 * c2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    let var = m2 * nf / (nf - 1.0);
    let se = (var / nf).sqrt();
    let var_se = ((m4 - m2 * m2).max(0.0) / nf).sqrt();
    let spread = values.iter().fold(0.0f64, |a, &v| a.max((v - mean).abs()));
    if m2 == 0.0 || spread <= 1e-14 * mean.abs() {
        return Ok(EnsembleStats {
            n,
            mean,
            var: 0.0,
            se: 0.0,
            var_se: 0.0,
            skew: 0.0,
            excess_kurtosis: 0.0,
            ks_stat: None,
            ks_p: None,
            degenerate: true,
        });
    }
    let skew = m3 / m2.powf(1.5);
    let excess_kurtosis = m4 / (m2 * m2) - 3.0;
    let sd = var.sqrt();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut d = 0.0f64;
    for (i, &v) in sorted.iter().enumerate() {
        let f = normal_cdf((v - mean) / sd);
        d = d.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf);
    }
    let root = nf.sqrt();
    let p = kolmogorov_survival((root + 0.12 + 0.11 / root) * d);
    Ok(EnsembleStats {
        n,
        mean,
        var,
        se,
        var_se,
        skew,
        excess_kurtosis,
        ks_stat: Some(d),
        ks_p: Some(p),
        degenerate: false,
    })
}

/// Least-squares line through `(ln eps, ln error)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn rate_fit(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 4 {
        return Err(Error::TooFewSamples {
            required: 4,
            got: points.len(),
        });
    }
    for &(e, err) in points {
        if !(e > 0.0) || !(err > 0.0) {
            return Err(Error::NonPositive(format!("(eps, error) = ({e}, {err})")));
        }
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let nf = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParams(
            "rate fit needs distinct eps values".into(),
        ));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(RateFit {
        slope,
        intercept,
        r2,
    })
}
