//! Closed-form constants of the homogenized limit: the effective potential,
//! its finite-`eps` version, the scaling exponents, the admissible horizon,
//! and the long-range constants.

use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::quadrature::{integrate, integrate_radial_power};
use crate::spectrum::{sphere_measure, PowerSpectrum};

/// Relative tolerance of every radial quadrature in this module.
pub const QUAD_TOL: f64 = 1e-10;

/// Relative gap kept below `1 / (4 rho_f)` when choosing the horizon.
pub const HORIZON_MARGIN: f64 = 1e-3;

fn critical(d: usize, m: f64) -> bool {
    (d as f64 - m).abs() <= 1e-12 * m.max(1.0)
}

fn check_order(d: usize, m: f64) -> Result<()> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::Domain(format!("symbol order m = {m} must be > 0")));
    }
    if (d as f64) < m && !critical(d, m) {
        return Err(Error::Domain(format!(
            "d = {d} < m = {m}: the limit is stochastic there and out of scope"
        )));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Domain(format!("eps = {eps} not in (0, 1)")));
    }
    Ok(())
}

/// `eps^alpha`: `eps^(m/2) |ln eps|^(1/2)` when `d = m`, `eps^(m/2)` when `d > m`.
pub fn alpha_scale(d: usize, m: f64, eps: f64) -> Result<f64> {
    check_order(d, m)?;
    check_eps(eps)?;
    let base = eps.powf(m / 2.0);
    Ok(if critical(d, m) {
        base * eps.ln().abs().sqrt()
    } else {
        base
    })
}

/// `eps^beta`, the squared-error scale of the homogenization error.
pub fn beta_scale(d: usize, m: f64, eps: f64) -> Result<f64> {
    check_order(d, m)?;
    check_eps(eps)?;
    let df = d as f64;
    let lnabs = eps.ln().abs();
    Ok(if critical(d, m) {
        1.0 / lnabs
    } else if critical(d, 2.0 * m) {
        eps.powf(m) * lnabs
    } else if df < 2.0 * m {
        eps.powf(df - m)
    } else {
        eps.powf(m)
    })
}

/// Pure exponent `beta` where one exists (logarithmic branches return `None`).
pub fn beta_exponent(d: usize, m: f64) -> Option<f64> {
    let df = d as f64;
    if critical(d, m) || critical(d, 2.0 * m) {
        None
    } else if df < 2.0 * m {
        Some(df - m)
    } else {
        Some(m)
    }
}

/// Pure exponent `alpha` where one exists.
pub fn alpha_exponent(d: usize, m: f64) -> Option<f64> {
    if critical(d, m) {
        None
    } else {
        Some(m / 2.0)
    }
}

/// `c_d int_0^inf r^(d-1-m) g(r) dr` with `g = r^n R^` folded in for long-range spectra.
fn radial_moment(spec: &PowerSpectrum, d: usize, m: f64) -> Result<f64> {
    let n = spec.exponent();
    let gamma_exp = d as f64 - m - n;
    if gamma_exp <= 0.0 {
        return Err(Error::DivergentIntegral(format!(
            "int R^(xi) |xi|^-m dxi diverges at the origin: d = {d} <= m + n = {}",
            m + n
        )));
    }
    if spec.amplitude() == 0.0 {
        return Ok(0.0);
    }
    let base = spec.base();
    let q = integrate_radial_power(
        |r| base.eval(r),
        gamma_exp,
        spec.scale(),
        &spec.breakpoints(),
        QUAD_TOL,
    )?;
    Ok(sphere_measure(d) * q.value)
}

/// Effective potential `rho`: `c_d R^(0)` when `d = m`, `int R^ / |xi|^m` when `d > m`.
pub fn compute_rho(spec: &PowerSpectrum, d: usize, m: f64) -> Result<f64> {
    check_order(d, m)?;
    spec.validate_for(d)?;
    if critical(d, m) {
        if spec.is_long_range() {
            return Err(Error::DivergentIntegral(
                "long-range spectra need d > m + n".into(),
            ));
        }
        return Ok(sphere_measure(d) * spec.eval(0.0));
    }
    radial_moment(spec, d, m)
}

/// `rho_eps(xi) = int R^(xi_1 - eps xi) / |xi_1|^m dxi_1` (`c_d R^(eps xi)` when `d = m`).
pub fn compute_rho_eps(
    spec: &PowerSpectrum,
    d: usize,
    m: f64,
    eps: f64,
    xi: &[f64],
) -> Result<f64> {
    check_order(d, m)?;
    spec.validate_for(d)?;
    if xi.len() != d {
        return Err(Error::Domain(format!(
            "frequency has {} components, expected {d}",
            xi.len()
        )));
    }
    let shift = eps * xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    if critical(d, m) {
        if spec.is_long_range() {
            return Err(Error::DivergentIntegral(
                "long-range spectra need d > m + n".into(),
            ));
        }
        return Ok(sphere_measure(d) * spec.eval(shift));
    }
    if shift == 0.0 {
        return compute_rho(spec, d, m);
    }
    shifted_moment(spec, d, m, shift)
}

/// `int R^(|xi_1 - y|) |xi_1|^-m dxi_1` with `|y| = b > 0`, by polar reduction about the origin.
fn shifted_moment(spec: &PowerSpectrum, d: usize, m: f64, b: f64) -> Result<f64> {
    let gamma_exp = d as f64 - m;
    if spec.is_long_range() && d as f64 - m - spec.exponent() <= 0.0 {
        return Err(Error::DivergentIntegral(format!(
            "d = {d} <= m + n = {}",
            m + spec.exponent()
        )));
    }
    if spec.amplitude() == 0.0 {
        return Ok(0.0);
    }
    let mut breaks = vec![b];
    for edge in spec.breakpoints() {
        breaks.push(b + edge);
        if edge > b {
            breaks.push(edge - b);
        } else if edge < b {
            breaks.push(b - edge);
        }
    }
    let inner_fail = std::cell::Cell::new(None::<Error>);
    let shell = |r: f64| -> f64 {
        let v = match d {
            1 => Ok(spec.eval((r - b).abs()) + spec.eval(r + b)),
            2 => integrate(
                |phi: f64| {
                    let s2 = (r * r + b * b - 2.0 * r * b * phi.cos()).max(0.0);
                    spec.eval(s2.sqrt())
                },
                0.0,
                PI,
                QUAD_TOL,
                1e-300,
            )
            .map(|q| 2.0 * q.value),
            _ => {
                // int over the sphere = (2pi / (r b)) int_{|r-b|}^{r+b} R^(s) s ds
                let lo = (r - b).abs();
                let hi = r + b;
                let mut pts: Vec<f64> = spec
                    .breakpoints()
                    .into_iter()
                    .filter(|&p| p > lo && p < hi)
                    .collect();
                pts.insert(0, lo);
                pts.push(hi);
                let mut acc = 0.0;
                let mut res = Ok(());
                for w in pts.windows(2) {
                    match integrate(|s| spec.eval(s) * s, w[0], w[1], QUAD_TOL, 1e-300) {
                        Ok(q) => acc += q.value,
                        Err(e) => {
                            res = Err(e);
                            break;
                        }
                    }
                }
                res.map(|_| 2.0 * PI * acc / (r * b))
            }
        };
        match v {
            Ok(v) => v,
            Err(e) => {
                inner_fail.set(Some(e));
                0.0
            }
        }
    };
    let q = integrate_radial_power(shell, gamma_exp, b.max(spec.scale()), &breaks, QUAD_TOL)?;
    if let Some(e) = inner_fail.take() {
        return Err(e);
    }
    Ok(q.value)
}

/// `rho_eps(xi_k)` at every lattice mode, in flat order.
///
/// Values depend on `|xi_k|` only and are computed once per distinct radius.
pub fn rho_eps_lattice(
    spec: &PowerSpectrum,
    grid: &GridSpec,
    m: f64,
    eps: f64,
) -> Result<Vec<f64>> {
    let d = grid.dim();
    let radii: Vec<f64> = (0..grid.len()).map(|k| grid.freq_norm(k)).collect();
    let mut unique: Vec<u64> = radii.iter().map(|r| r.to_bits()).collect();
    unique.sort_unstable();
    unique.dedup();
    let values: Vec<(u64, f64)> = unique
        .par_iter()
        .map(|&bits| {
            let r = f64::from_bits(bits);
            let mut xi = vec![0.0; d];
            xi[0] = r;
            compute_rho_eps(spec, d, m, eps, &xi).map(|v| (bits, v))
        })
        .collect::<Result<_>>()?;
    let table: HashMap<u64, f64> = values.into_iter().collect();
    Ok(radii.iter().map(|r| table[&r.to_bits()]).collect())
}

/// Radial bound `f(r) >= R^(xi)` with its tail constant `f(r) <= tau_f r^-n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialBound {
    pub profile: Option<PowerSpectrum>,
    pub tau_f: f64,
    pub exponent: f64,
}

impl RadialBound {
    /// `f = 0`.
    pub fn zero() -> Self {
        Self {
            profile: None,
            tau_f: 0.0,
            exponent: 0.0,
        }
    }

    /// The model spectra are radially decreasing, so each bounds itself with
    /// `tau_f = S^(0)`.
    pub fn dominating(spec: &PowerSpectrum) -> Self {
        Self {
            profile: Some(spec.clone()),
            tau_f: spec.value_at_origin(),
            exponent: spec.exponent(),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.profile.as_ref().map_or(0.0, |p| p.eval(r))
    }
}

/// `(rho_f, T_max)` with `T_max = (1 - margin) / (4 rho_f)`; `T_max = inf` when `rho_f = 0`.
pub fn rho_f_bound(bound: &RadialBound, d: usize, m: f64) -> Result<(f64, f64)> {
    check_order(d, m)?;
    let rho_f = match &bound.profile {
        None => bound.tau_f.max(0.0),
        Some(profile) => {
            profile.validate_for(d)?;
            if critical(d, m) {
                if profile.is_long_range() {
                    return Err(Error::DivergentIntegral(
                        "long-range bounds need d > m + n".into(),
                    ));
                }
                sphere_measure(d) * profile.eval(0.0)
            } else {
                radial_moment(profile, d, m)?.max(bound.tau_f)
            }
        }
    };
    let t_max = if rho_f > 0.0 {
        (1.0 - HORIZON_MARGIN) / (4.0 * rho_f)
    } else {
        f64::INFINITY
    };
    Ok((rho_f, t_max))
}

/// Riesz normalization `c_n = Gamma((d-n)/2) / (2^n pi^(d/2) Gamma(n/2))`:
/// the inverse transform of `|xi|^-n` is `c_n |x|^(n-d)`.
pub fn riesz_constant(d: usize, n: f64) -> Result<f64> {
    let df = d as f64;
    if !(n > 0.0 && n < df) {
        return Err(Error::Domain(format!(
            "need 0 < n < d, got n = {n}, d = {d}"
        )));
    }
    Ok(gamma((df - n) / 2.0) / (2f64.powf(n) * PI.powf(df / 2.0) * gamma(n / 2.0)))
}

/// Hurst parameter of the limiting fractional field, `H = (1 + n/d) / 2`.
pub fn hurst(d: usize, n: f64) -> f64 {
    0.5 * (1.0 + n / d as f64)
}

/// Every scalar constant of the limit theory for one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumConstants {
    pub d: usize,
    pub m: f64,
    pub rho: f64,
    pub rho_f: f64,
    pub t_max: f64,
}

impl MediumConstants {
    pub fn compute(spec: &PowerSpectrum, d: usize, m: f64) -> Result<Self> {
        let rho = compute_rho(spec, d, m)?;
        let (rho_f, t_max) = rho_f_bound(&RadialBound::dominating(spec), d, m)?;
        Ok(Self {
            d,
            m,
            rho,
            rho_f,
            t_max,
        })
    }

    pub fn alpha(&self, eps: f64) -> Result<f64> {
        alpha_scale(self.d, self.m, eps)
    }

    pub fn beta(&self, eps: f64) -> Result<f64> {
        beta_scale(self.d, self.m, eps)
    }
}
