//! Radially symmetric power spectra `R^(xi)` of the stationary potential.
//!
//! Normalization: `R(x) = int exp(i xi.x) R^(xi) dxi`, so `R(0) = int R^` and
//! `int R(x) dx = (2pi)^d R^(0)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_radial_power;

/// Surface measure of the unit sphere `S^(d-1)`: 2, 2pi, 4pi for d = 1, 2, 3.
pub fn sphere_measure(d: usize) -> f64 {
    let half = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(half) / statrs::function::gamma::gamma(half)
}

/// Model power spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PowerSpectrum {
    /// `A exp(-|xi|^2 / w^2)`.
    Gaussian { amplitude: f64, width: f64 },
    /// `A max(0, 1 - |xi| / r_c)^2`.
    Bump { amplitude: f64, cutoff: f64 },
    /// `|xi|^(-n) S^(xi)` with a short-range base `S^`.
    LongRange {
        exponent: f64,
        base: Box<PowerSpectrum>,
    },
}

impl PowerSpectrum {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self::Gaussian { amplitude, width }
    }

    pub fn bump(amplitude: f64, cutoff: f64) -> Self {
        Self::Bump { amplitude, cutoff }
    }

    pub fn long_range(exponent: f64, base: PowerSpectrum) -> Self {
        Self::LongRange {
            exponent,
            base: Box::new(base),
        }
    }

    /// Parameter sanity, independent of dimension.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Gaussian { amplitude, width } => {
                if !amplitude.is_finite() || !(width.is_finite() && *width > 0.0) {
                    return Err(Error::InvalidSpectrum(format!(
                        "gaussian needs finite amplitude and width > 0 (got {amplitude}, {width})"
                    )));
                }
                if *amplitude < 0.0 {
                    return Err(Error::SpectrumNegative {
                        value: *amplitude,
                        radius: 0.0,
                    });
                }
            }
            Self::Bump { amplitude, cutoff } => {
                if !amplitude.is_finite() || !(cutoff.is_finite() && *cutoff > 0.0) {
                    return Err(Error::InvalidSpectrum(format!(
                        "bump needs finite amplitude and cutoff > 0 (got {amplitude}, {cutoff})"
                    )));
                }
                if *amplitude < 0.0 {
                    return Err(Error::SpectrumNegative {
                        value: *amplitude,
                        radius: 0.0,
                    });
                }
            }
            Self::LongRange { exponent, base } => {
                if !(exponent.is_finite() && *exponent > 0.0) {
                    return Err(Error::InvalidSpectrum(format!(
                        "long-range exponent must be > 0, got {exponent}"
                    )));
                }
                if base.is_long_range() {
                    return Err(Error::InvalidSpectrum(
                        "long-range base spectrum must be short-range".into(),
                    ));
                }
                base.validate()?;
            }
        }
        Ok(())
    }

    /// Checks that the spectrum fits dimension `d` (long range needs `0 < n < d`).
    pub fn validate_for(&self, d: usize) -> Result<()> {
        self.validate()?;
        if let Self::LongRange { exponent, .. } = self {
            if *exponent >= d as f64 {
                return Err(Error::InvalidSpectrum(format!(
                    "long-range exponent {exponent} must be < d = {d}"
                )));
            }
        }
        Ok(())
    }

    /// `R^` at radius `r = |xi|`; `+inf` at the origin for long-range spectra.
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Self::Gaussian { amplitude, width } => amplitude * (-(r * r) / (width * width)).exp(),
            Self::Bump { amplitude, cutoff } => {
                let s = 1.0 - r / cutoff;
                if s > 0.0 {
                    amplitude * s * s
                } else {
                    0.0
                }
            }
            Self::LongRange { exponent, base } => {
                if r == 0.0 {
                    f64::INFINITY
                } else {
                    r.powf(-exponent) * base.eval(r)
                }
            }
        }
    }

    pub fn eval_vec(&self, xi: &[f64]) -> f64 {
        self.eval(xi.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    pub fn is_long_range(&self) -> bool {
        matches!(self, Self::LongRange { .. })
    }

    /// Singularity exponent `n` (zero for short-range spectra).
    pub fn exponent(&self) -> f64 {
        match self {
            Self::LongRange { exponent, .. } => *exponent,
            _ => 0.0,
        }
    }

    /// Short-range factor `S^` (the spectrum itself when short-range).
    pub fn base(&self) -> &PowerSpectrum {
        match self {
            Self::LongRange { base, .. } => base,
            other => other,
        }
    }

    /// `R^(0)` for short-range spectra, `S^(0)` for long-range ones.
    pub fn value_at_origin(&self) -> f64 {
        self.base().eval(0.0)
    }

    pub fn amplitude(&self) -> f64 {
        match self {
            Self::Gaussian { amplitude, .. } | Self::Bump { amplitude, .. } => *amplitude,
            Self::LongRange { base, .. } => base.amplitude(),
        }
    }

    /// Same spectrum with the amplitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match self {
            Self::Gaussian { amplitude, width } => Self::Gaussian {
                amplitude: amplitude * factor,
                width: *width,
            },
            Self::Bump { amplitude, cutoff } => Self::Bump {
                amplitude: amplitude * factor,
                cutoff: *cutoff,
            },
            Self::LongRange { exponent, base } => Self::LongRange {
                exponent: *exponent,
                base: Box::new(base.scaled(factor)),
            },
        }
    }

    /// Radii where the profile is not smooth (used as quadrature breakpoints).
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Gaussian { .. } => vec![],
            Self::Bump { cutoff, .. } => vec![*cutoff],
            Self::LongRange { base, .. } => base.breakpoints(),
        }
    }

    /// Radius beyond which the profile is identically zero, if any.
    pub fn support_radius(&self) -> Option<f64> {
        match self {
            Self::Gaussian { .. } => None,
            Self::Bump { cutoff, .. } => Some(*cutoff),
            Self::LongRange { base, .. } => base.support_radius(),
        }
    }

    /// Natural radial scale of the profile (width or cutoff).
    pub fn scale(&self) -> f64 {
        match self {
            Self::Gaussian { width, .. } => *width,
            Self::Bump { cutoff, .. } => *cutoff,
            Self::LongRange { base, .. } => base.scale(),
        }
    }

    /// `int_(|xi| > radius) R^ dxi` in dimension `d`.
    pub fn mass_beyond(&self, d: usize, radius: f64) -> Result<f64> {
        let gamma = d as f64 - self.exponent();
        let g = |r: f64| {
            if r <= radius {
                0.0
            } else {
                r.powf(self.exponent()) * self.eval(r)
            }
        };
        let mut breaks = self.breakpoints();
        breaks.push(radius);
        let q = integrate_radial_power(g, gamma, self.scale(), &breaks, 1e-10)?;
        Ok(sphere_measure(d) * q.value)
    }

    /// `R(0) = int R^ dxi` in dimension `d`.
    pub fn total_mass(&self, d: usize) -> Result<f64> {
        self.mass_beyond(d, 0.0)
    }
}
