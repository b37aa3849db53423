//! Periodic torus discretization and the discrete Fourier transform pair.
//!
//! Conventions, fixed once for the whole crate:
//!
//! * forward: `F(xi_k) = dx^d * sum_j f(x_j) exp(-i xi_k . x_j)`
//! * inverse: `f(x_j) = (dxi / 2pi)^d * sum_k F(xi_k) exp(i xi_k . x_j) = L^-d * sum_k ...`
//!
//! With this pair the discrete objects approximate the continuum transforms
//! `F(xi) = int f(x) exp(-i xi.x) dx` and its inverse. Frequencies are stored in
//! wrap-around order per axis, zero mode at index 0, and flat indices are
//! row-major (last axis fastest).

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative asymmetry above which a spectrum is rejected as non-Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Periodic grid: `points` samples per axis on `[0, length)^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    points: usize,
    length: f64,
}

impl GridSpec {
    pub fn new(dim: usize, points: usize, length: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if points < 4 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis {points} must be a power of two >= 4"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "side length {length} must be > 0"
            )));
        }
        Ok(Self {
            dim,
            points,
            length,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// Total number of lattice sites, `points^dim`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Lattice spacing `dx = L / N`.
    pub fn spacing(&self) -> f64 {
        self.length / self.points as f64
    }

    /// Cell volume `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Frequency spacing `dxi = 2pi / L`.
    pub fn freq_step(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Frequency cell volume `dxi^d`.
    pub fn freq_cell_volume(&self) -> f64 {
        self.freq_step().powi(self.dim as i32)
    }

    /// Largest resolved frequency magnitude per axis, `pi N / L`.
    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / self.length
    }

    /// Signed wave number of an axis index in wrap-around order.
    pub fn wave_number(&self, i: usize) -> i64 {
        let n = self.points as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    /// Axis index of a signed wave number, reduced modulo `N`.
    pub fn axis_index(&self, k: i64) -> usize {
        k.rem_euclid(self.points as i64) as usize
    }

    /// Multi-index of a flat index (unused axes are zero).
    pub fn unflatten(&self, mut flat: usize) -> [usize; 3] {
        let mut idx = [0usize; 3];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.points;
            flat /= self.points;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .take(self.dim)
            .fold(0usize, |acc, &i| acc * self.points + i)
    }

    /// Signed wave-number vector of a flat index.
    pub fn wave_vector(&self, flat: usize) -> [i64; 3] {
        let idx = self.unflatten(flat);
        let mut k = [0i64; 3];
        for a in 0..self.dim {
            k[a] = self.wave_number(idx[a]);
        }
        k
    }

    /// Flat index of a signed wave-number vector (wrapped modulo `N`).
    pub fn flat_of_wave(&self, k: &[i64; 3]) -> usize {
        let mut idx = [0usize; 3];
        for a in 0..self.dim {
            idx[a] = self.axis_index(k[a]);
        }
        self.flatten(&idx[..self.dim])
    }

    /// Physical frequency vector `xi_k = 2pi k / L`.
    pub fn frequency(&self, flat: usize) -> [f64; 3] {
        let k = self.wave_vector(flat);
        let s = self.freq_step();
        let mut xi = [0.0; 3];
        for a in 0..self.dim {
            xi[a] = s * k[a] as f64;
        }
        xi
    }

    /// `|xi_k|`.
    pub fn freq_norm(&self, flat: usize) -> f64 {
        let xi = self.frequency(flat);
        xi[..self.dim].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Flat index of `-k`.
    pub fn negate(&self, flat: usize) -> usize {
        let k = self.wave_vector(flat);
        self.flat_of_wave(&[-k[0], -k[1], -k[2]])
    }

    /// Physical coordinates of a site, `x_j = j * dx`.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let h = self.spacing();
        let mut x = [0.0; 3];
        for a in 0..self.dim {
            x[a] = idx[a] as f64 * h;
        }
        x
    }

    /// Box centre, `L/2` on every axis.
    pub fn center(&self) -> [f64; 3] {
        let mut c = [0.0; 3];
        for v in c.iter_mut().take(self.dim) {
            *v = 0.5 * self.length;
        }
        c
    }
}

/// Real scalar field sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "field has {} values, grid has {} sites",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite field value {v}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f` at every lattice site.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|j| f(&grid.position(j)[..grid.dim()]))
            .collect();
        Self { grid, values }
    }

    /// Isotropic Gaussian bump `amplitude * exp(-|x - c|^2 / (2 w^2))`, centred in the box.
    pub fn gaussian_bump(grid: GridSpec, amplitude: f64, width: f64) -> Self {
        let c = grid.center();
        Self::from_fn(grid, |x| {
            let r2: f64 = x.iter().zip(c.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            amplitude * (-r2 / (2.0 * width * width)).exp()
        })
    }

    pub(crate) fn from_raw(grid: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `sum |f|^2 dx^d`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn l2_norm(&self) -> f64 {
        self.energy().sqrt()
    }

    /// `sum f dx^d`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Physical pairing `(f, g) = sum f g dx^d`.
    pub fn dot(&self, other: &Field) -> Result<f64> {
        same_grid(&self.grid, &other.grid)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.grid.cell_volume())
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|v| a * v).collect())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, other: &Field, b: f64) -> Result<Field> {
        same_grid(&self.grid, &other.grid)?;
        Ok(Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        ))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Fourier coefficients of a field under the crate's normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    grid: GridSpec,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn new(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "spectrum has {} coefficients, grid has {} modes",
                coeffs.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            coeffs: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// `sum |F|^2 (dxi/2pi)^d`, equal to the physical energy by Parseval.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>()
            / self.grid.length().powi(self.grid.dim() as i32)
    }

    /// Largest `|F(-k) - conj F(k)|`, relative to `max |F|`.
    pub fn hermitian_asymmetry(&self) -> f64 {
        let scale = self.coeffs.iter().fold(0.0f64, |m, c| m.max(c.norm()));
        if scale == 0.0 {
            return 0.0;
        }
        let worst = (0..self.coeffs.len())
            .map(|k| (self.coeffs[self.grid.negate(k)] - self.coeffs[k].conj()).norm())
            .fold(0.0f64, f64::max);
        worst / scale
    }
}

fn same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!("{a:?} vs {b:?}")));
    }
    Ok(())
}

pub(crate) fn check_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    same_grid(a, b)
}

/// Cached FFT plans for one grid; transforms are unnormalized and in place.
#[derive(Clone)]
pub struct FourierPlan {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for FourierPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FourierPlan")
            .field("grid", &self.grid)
            .finish()
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

impl FourierPlan {
    pub fn new(grid: &GridSpec) -> Self {
        let (forward, inverse) = PLANNER.with(|p| {
            let mut p = p.borrow_mut();
            (
                p.plan_fft_forward(grid.points()),
                p.plan_fft_inverse(grid.points()),
            )
        });
        Self {
            grid: *grid,
            forward,
            inverse,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// `sum_j a_j exp(-i 2pi j.k / N)` over every axis.
    pub fn forward_raw(&self, data: &mut [Complex64]) {
        self.transform(data, &self.forward);
    }

    /// `sum_k a_k exp(+i 2pi j.k / N)` over every axis.
    pub fn inverse_raw(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.points();
        let d = self.grid.dim();
        debug_assert_eq!(data.len(), self.grid.len());
        if d == 1 {
            fft.process(data);
            return;
        }
        let total = data.len();
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for axis in 0..d {
            // stride of this axis in row-major order
            let stride = n.pow((d - 1 - axis) as u32);
            let block = stride * n;
            if stride == 1 {
                for chunk in data.chunks_exact_mut(n) {
                    fft.process_with_scratch(chunk, &mut scratch);
                }
                continue;
            }
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = data[base + i * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (i, v) in line.iter().enumerate() {
                        data[base + i * stride] = *v;
                    }
                }
            }
        }
    }

    pub fn forward(&self, f: &Field) -> SpectralField {
        let mut data: Vec<Complex64> = f.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_raw(&mut data);
        let dv = self.grid.cell_volume();
        for c in data.iter_mut() {
            *c *= dv;
        }
        SpectralField {
            grid: self.grid,
            coeffs: data,
        }
    }

    pub fn inverse(&self, spec: &SpectralField) -> Result<Field> {
        let asym = spec.hermitian_asymmetry();
        if asym > HERMITIAN_TOL {
            return Err(Error::HermitianViolation { asymmetry: asym });
        }
        let mut data = spec.coeffs().to_vec();
        self.inverse_raw(&mut data);
        let scale = 1.0 / self.grid.length().powi(self.grid.dim() as i32);
        Ok(Field::from_raw(
            self.grid,
            data.iter().map(|c| c.re * scale).collect(),
        ))
    }
}

/// Discrete forward transform of a real field.
pub fn forward_transform(f: &Field) -> SpectralField {
    FourierPlan::new(f.grid()).forward(f)
}

/// Inverse transform; rejects spectra that do not represent a real field.
pub fn inverse_transform(spec: &SpectralField) -> Result<Field> {
    FourierPlan::new(spec.grid()).inverse(spec)
}

/// Pointwise product `F(xi_k) * symbol(xi_k)`.
pub fn apply_multiplier(
    spec: &SpectralField,
    symbol: impl Fn(&[f64]) -> Complex64,
) -> SpectralField {
    let grid = *spec.grid();
    let coeffs = spec
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| c * symbol(&grid.frequency(k)[..grid.dim()]))
        .collect();
    SpectralField { grid, coeffs }
}

/// [`apply_multiplier`] for radial real symbols `s(|xi|)`.
pub fn apply_radial_multiplier(spec: &SpectralField, symbol: impl Fn(f64) -> f64) -> SpectralField {
    let grid = *spec.grid();
    let coeffs = spec
        .coeffs()
        .iter()
        .enumerate()
        .map(|(k, c)| c * symbol(grid.freq_norm(k)))
        .collect();
    SpectralField { grid, coeffs }
}

/// `|xi|` at every lattice mode, in flat order.
pub fn frequency_norms(grid: &GridSpec) -> Vec<f64> {
    (0..grid.len()).map(|k| grid.freq_norm(k)).collect()
}

/// `|xi|^m` on the lattice, with `|0|^m = 0`.
pub fn symbol_powers(grid: &GridSpec, m: f64) -> Vec<f64> {
    frequency_norms(grid)
        .into_iter()
        .map(|r| if r == 0.0 { 0.0 } else { r.powf(m) })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid1(n: usize) -> GridSpec {
        GridSpec::new(1, n, 2.0 * PI).unwrap()
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(0, 8, 1.0).is_err());
        assert!(GridSpec::new(4, 8, 1.0).is_err());
        assert!(GridSpec::new(1, 12, 1.0).is_err());
        assert!(GridSpec::new(1, 2, 1.0).is_err());
        assert!(GridSpec::new(1, 8, 0.0).is_err());
        assert!(GridSpec::new(2, 8, f64::NAN).is_err());
    }

    #[test]
    fn wrap_around_order() {
        let g = GridSpec::new(1, 8, 2.0 * PI).unwrap();
        let ks: Vec<i64> = (0..8).map(|i| g.wave_number(i)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(g.frequency(0)[0], 0.0);
        assert_relative_eq!(g.frequency(7)[0], -1.0);
        assert_eq!(g.negate(1), 7);
        assert_eq!(g.negate(4), 4);
    }

    #[test]
    fn constant_field_is_dc_only() {
        let g = GridSpec::new(2, 8, 3.0).unwrap();
        let f = Field::constant(g, 2.5);
        let spec = forward_transform(&f);
        // DC coefficient is c * L^d under the dx^d normalization
        assert_relative_eq!(spec.coeffs()[0].re, 2.5 * 9.0, epsilon = 1e-12);
        for c in &spec.coeffs()[1..] {
            assert!(c.norm() < 1e-12);
        }
    }

    #[test]
    fn cosine_has_two_conjugate_modes() {
        let g = grid1(16);
        let f = Field::from_fn(g, |x| x[0].cos());
        let spec = forward_transform(&f);
        let nonzero: Vec<usize> = (0..16)
            .filter(|&k| spec.coeffs()[k].norm() > 1e-9)
            .collect();
        assert_eq!(nonzero, vec![1, 15]);
        assert_relative_eq!(spec.coeffs()[1].re, PI, epsilon = 1e-12);
        assert_relative_eq!(spec.coeffs()[15].re, spec.coeffs()[1].re, epsilon = 1e-12);
    }

    #[test]
    fn zero_and_dc_inverse() {
        let g = GridSpec::new(3, 4, 1.0).unwrap();
        let z = inverse_transform(&SpectralField::zeros(g)).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        let mut dc = SpectralField::zeros(g);
        dc.coeffs_mut()[0] = Complex64::new(3.0, 0.0);
        let f = inverse_transform(&dc).unwrap();
        assert!(f.values().iter().all(|&v| (v - 3.0).abs() < 1e-14));
    }

    #[test]
    fn asymmetric_spectrum_is_rejected() {
        let g = grid1(8);
        let mut s = SpectralField::zeros(g);
        s.coeffs_mut()[1] = Complex64::new(1.0, 0.0);
        match inverse_transform(&s) {
            Err(Error::HermitianViolation { asymmetry }) => assert!(asymmetry > 0.5),
            other => panic!("expected HermitianViolation, got {other:?}"),
        }
    }

    #[test]
    fn identity_and_heat_multipliers() {
        let g = grid1(32);
        let f = Field::from_fn(g, |x| (3.0 * x[0]).cos() + 0.5);
        let spec = forward_transform(&f);
        let same = apply_multiplier(&spec, |_| Complex64::new(1.0, 0.0));
        assert_eq!(same, spec);
        let t = 0.3;
        let heated = apply_radial_multiplier(&spec, |r| (-t * r * r).exp());
        assert_relative_eq!(
            heated.coeffs()[3].re,
            spec.coeffs()[3].re * (-t * 9.0f64).exp(),
            epsilon = 1e-12
        );
        // zero mode untouched by exp(-t |0|^m)
        let powers = symbol_powers(&g, 0.7);
        assert_eq!(powers[0], 0.0);
        assert_eq!(heated.coeffs()[0], spec.coeffs()[0]);
    }

    #[test]
    fn multi_axis_transform_matches_separable_product() {
        let g = GridSpec::new(2, 8, 2.0 * PI).unwrap();
        let f = Field::from_fn(g, |x| x[0].cos() * (2.0 * x[1]).sin());
        let spec = forward_transform(&f);
        let back = inverse_transform(&spec).unwrap();
        for (a, b) in f.values().iter().zip(back.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        // cos(x) sin(2y): modes (+-1, +-2) only
        let significant: Vec<[i64; 3]> = (0..g.len())
            .filter(|&k| spec.coeffs()[k].norm() > 1e-9)
            .map(|k| g.wave_vector(k))
            .collect();
        assert_eq!(significant.len(), 4);
        assert!(significant
            .iter()
            .all(|k| k[0].abs() == 1 && k[1].abs() == 2));
    }
}
