//! Stationary Gaussian fields synthesized from a power spectrum.
//!
//! A field on the torus is `q(x_j) = sum_k c_k exp(i xi_k . x_j)` with
//! Hermitian Gaussian coefficients, `E|c_k|^2 = R^(xi_k) dxi^d`. Its covariance
//! at grid lags is therefore exactly the lattice sum
//! `sum_k R^(xi_k) dxi^d exp(i xi_k . x)`, the periodized `R`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::grid::{check_grid, Field, FourierPlan, GridSpec};
use crate::medium::alpha_scale;
use crate::spectrum::PowerSpectrum;

/// Largest admissible fraction of spectral mass beyond the Nyquist frequency.
pub const RESOLUTION_LIMIT: f64 = 1e-2;

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-realization seed derived from `(base, eps index, realization index)`.
///
/// Streams never depend on scheduling, so parallel ensembles are reproducible.
pub fn stream_seed(base: u64, eps_index: u64, realization: u64) -> u64 {
    mix64(mix64(mix64(base) ^ eps_index.wrapping_mul(0xD6E8_FEB8_6659_FD93)) ^ realization)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A realized potential together with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample {
    pub field: Field,
    pub seed: u64,
    pub spectrum: PowerSpectrum,
    /// Correlation scale `eps` (1 for an unscaled draw).
    pub scale: f64,
    /// Amplitude factor `eps^alpha` used to build the potential.
    pub eps_alpha: f64,
}

/// How the potential amplitude `eps^-alpha` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaRule {
    /// From the symbol order `m` through the dimension-dependent rule.
    Order { m: f64 },
    /// A fixed exponent `alpha`.
    Exponent(f64),
}

/// Draws a Hermitian coefficient set with variances `variance(flat)` and
/// returns the real field `sum_k c_k exp(i xi_k x)`.
fn draw_field(grid: &GridSpec, seed: u64, variance: &[f64]) -> Field {
    let mut rng = rng_from_seed(seed);
    let mut c = vec![Complex64::new(0.0, 0.0); grid.len()];
    let mut done = vec![false; grid.len()];
    for k in 0..grid.len() {
        if done[k] {
            continue;
        }
        let nk = grid.negate(k);
        let sd = variance[k].sqrt();
        if nk == k {
            let z: f64 = rng.sample(StandardNormal);
            c[k] = Complex64::new(sd * z, 0.0);
        } else {
            let x: f64 = rng.sample(StandardNormal);
            let y: f64 = rng.sample(StandardNormal);
            let z = Complex64::new(x, y) * (sd * std::f64::consts::FRAC_1_SQRT_2);
            c[k] = z;
            c[nk] = z.conj();
            done[nk] = true;
        }
        done[k] = true;
    }
    FourierPlan::new(grid).inverse_raw(&mut c);
    Field::from_raw(*grid, c.into_iter().map(|z| z.re).collect())
}

/// Lattice variances `R^(|xi_k|) dxi^d` for `profile`, zero mode dropped when singular.
fn lattice_variances(grid: &GridSpec, profile: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let dv = grid.freq_cell_volume();
    (0..grid.len())
        .map(|k| {
            let r = grid.freq_norm(k);
            let v = profile(r);
            if k == 0 && !v.is_finite() {
                // singular origin of a long-range spectrum: the zero mode is removed
                return Ok(0.0);
            }
            if v < 0.0 || v.is_nan() {
                return Err(Error::SpectrumNegative {
                    value: v,
                    radius: r,
                });
            }
            Ok(v * dv)
        })
        .collect()
}

/// Mean-zero Gaussian field with power spectrum `spec` on `grid`.
pub fn synthesize(spec: &PowerSpectrum, grid: &GridSpec, seed: u64) -> Result<FieldSample> {
    spec.validate_for(grid.dim())?;
    let var = lattice_variances(grid, |r| spec.eval(r))?;
    Ok(FieldSample {
        field: draw_field(grid, seed, &var),
        seed,
        spectrum: spec.clone(),
        scale: 1.0,
        eps_alpha: 1.0,
    })
}

/// Spectrum `eps^d (eps^alpha)^-2 R^(eps xi)` of the potential `eps^-alpha q(x / eps)`.
pub fn scaled_spectrum_value(
    spec: &PowerSpectrum,
    d: usize,
    eps: f64,
    eps_alpha: f64,
    r: f64,
) -> f64 {
    eps.powi(d as i32) / (eps_alpha * eps_alpha) * spec.eval(eps * r)
}

/// Resolves the amplitude factor `eps^alpha` for a rule.
pub fn resolve_eps_alpha(d: usize, eps: f64, rule: AlphaRule) -> Result<f64> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Domain(format!("eps = {eps} not in (0, 1]")));
    }
    match rule {
        AlphaRule::Exponent(a) => Ok(eps.powf(a)),
        AlphaRule::Order { m } => {
            if eps == 1.0 {
                // identity scaling; the d = m logarithm would vanish here
                Ok(1.0)
            } else {
                alpha_scale(d, m, eps)
            }
        }
    }
}

/// Fraction of the spectral mass of `R^(eps .)` lying beyond the grid's Nyquist radius.
pub fn unresolved_fraction(spec: &PowerSpectrum, grid: &GridSpec, eps: f64) -> Result<f64> {
    let total = spec.total_mass(grid.dim())?;
    if total == 0.0 {
        return Ok(0.0);
    }
    Ok(spec.mass_beyond(grid.dim(), eps * grid.nyquist())? / total)
}

/// `E|c_k|^2` of the lattice coefficients of the potential `eps^-alpha q(x / eps)`.
pub fn potential_variances(
    spec: &PowerSpectrum,
    grid: &GridSpec,
    eps: f64,
    eps_alpha: f64,
) -> Result<Vec<f64>> {
    let d = grid.dim();
    lattice_variances(grid, |r| scaled_spectrum_value(spec, d, eps, eps_alpha, r))
}

/// Samples the rescaled potential `eps^-alpha q(x / eps)` directly on `grid`.
pub fn scaled_potential(
    spec: &PowerSpectrum,
    grid: &GridSpec,
    eps: f64,
    rule: AlphaRule,
    seed: u64,
) -> Result<FieldSample> {
    spec.validate_for(grid.dim())?;
    let eps_alpha = resolve_eps_alpha(grid.dim(), eps, rule)?;
    let fraction = unresolved_fraction(spec, grid, eps)?;
    if fraction > RESOLUTION_LIMIT {
        return Err(Error::Resolution { fraction });
    }
    let var = potential_variances(spec, grid, eps, eps_alpha)?;
    Ok(FieldSample {
        field: draw_field(grid, seed, &var),
        seed,
        spectrum: spec.clone(),
        scale: eps,
        eps_alpha,
    })
}

/// Covariance estimates along the first axis.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    /// Lag in grid steps.
    pub lags: Vec<usize>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
}

/// Site- and sample-averaged `E{q(x) q(x + lag e_1)}` for lags `0..=max_lag`.
///
/// Fields are mean zero by construction, so products are not re-centred. The
/// standard error treats samples as independent replicates.
pub fn empirical_covariance(samples: &[FieldSample], max_lag: usize) -> Result<CovarianceEstimate> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            required: 2,
            got: samples.len(),
        });
    }
    let grid = *samples[0].field.grid();
    for s in &samples[1..] {
        check_grid(&grid, s.field.grid())?;
    }
    let n = grid.points();
    let max_lag = max_lag.min(n - 1);
    let stride = n.pow(grid.dim() as u32 - 1);
    let ns = samples.len() as f64;
    let mut values = Vec::with_capacity(max_lag + 1);
    let mut errors = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        let per_sample: Vec<f64> = samples
            .iter()
            .map(|s| {
                let v = s.field.values();
                let total: f64 = (0..v.len())
                    .map(|j| {
                        let i0 = j / stride;
                        let shifted = ((i0 + lag) % n) * stride + j % stride;
                        v[j] * v[shifted]
                    })
                    .sum();
                total / v.len() as f64
            })
            .collect();
        let mean = per_sample.iter().sum::<f64>() / ns;
        let var = per_sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (ns - 1.0);
        values.push(mean);
        errors.push((var / ns).sqrt());
    }
    Ok(CovarianceEstimate {
        lags: (0..=max_lag).collect(),
        values,
        std_errors: errors,
    })
}
