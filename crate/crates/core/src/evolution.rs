//! Propagators and time steppers: exact spectral semigroups, the Strang
//! splitting solver for the random potential, truncated Duhamel iterates and
//! the single-scattering corrector.
//!
//! Internally fields are held as lattice coefficients `a_k` with
//! `u(x_j) = sum_k a_k exp(i xi_k . x_j)`, so a pointwise product in space is
//! an exact circular convolution of coefficients.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{check_grid, symbol_powers, Field, FourierPlan, GridSpec};
use crate::random_field::FieldSample;

/// Magnitude beyond which the solver reports [`Error::Overflow`].
pub const OVERFLOW_LIMIT: f64 = 1e100;

/// Symbol order, scale, horizon and step of one evolution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionParams {
    pub d: usize,
    pub m: f64,
    pub eps: f64,
    pub t_final: f64,
    pub dt: f64,
    /// Two-thirds rule truncation in the splitting solver.
    #[serde(default)]
    pub dealias: bool,
}

impl EvolutionParams {
    pub fn new(d: usize, m: f64, eps: f64, t_final: f64, dt: f64) -> Result<Self> {
        let p = Self {
            d,
            m,
            eps,
            t_final,
            dt,
            dealias: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_dealias(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    /// Same parameters with the step replaced.
    pub fn with_dt(self, dt: f64) -> Result<Self> {
        let p = Self { dt, ..self };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.d) {
            return Err(Error::InvalidParams(format!(
                "dimension {} not in 1..=3",
                self.d
            )));
        }
        if !(self.m.is_finite() && self.m > 0.0) {
            return Err(Error::InvalidParams(format!("m = {} must be > 0", self.m)));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "eps = {} not in (0, 1]",
                self.eps
            )));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "t_final = {} must be >= 0",
                self.t_final
            )));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidParams(format!(
                "dt = {} must be > 0",
                self.dt
            )));
        }
        let steps = (self.t_final / self.dt).round();
        if (steps * self.dt - self.t_final).abs() > 1e-9 * self.t_final.max(self.dt) {
            return Err(Error::InvalidParams(format!(
                "t_final / dt = {} is not an integer",
                self.t_final / self.dt
            )));
        }
        Ok(())
    }

    /// Fails unless `t_final < t_max`.
    pub fn check_horizon(&self, t_max: f64) -> Result<()> {
        if self.t_final >= t_max {
            return Err(Error::InvalidParams(format!(
                "t_final = {} is not below T_max = {t_max:.6} (4 rho_f T < 1 violated)",
                self.t_final
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Which deterministic semigroup to apply.
#[derive(Debug, Clone, PartialEq)]
pub enum PropagatorSpec {
    /// `exp(-t |xi|^m)`.
    Free,
    /// `exp(-t (|xi|^m - rho))`.
    Homogenized(f64),
    /// `exp(-t (|xi|^m - rho_eps(xi)))` with `rho_eps` given per lattice mode.
    Corrected(Vec<f64>),
}

impl PropagatorSpec {
    fn shift(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        match self {
            Self::Free => Ok(vec![0.0; grid.len()]),
            Self::Homogenized(rho) => Ok(vec![*rho; grid.len()]),
            Self::Corrected(v) => {
                if v.len() != grid.len() {
                    return Err(Error::GridMismatch(format!(
                        "rho_eps has {} entries, grid has {} modes",
                        v.len(),
                        grid.len()
                    )));
                }
                Ok(v.clone())
            }
        }
    }

    /// Decay rates `|xi_k|^m - shift_k`.
    pub fn rates(&self, grid: &GridSpec, m: f64) -> Result<Vec<f64>> {
        let shift = self.shift(grid)?;
        Ok(symbol_powers(grid, m)
            .into_iter()
            .zip(shift)
            .map(|(s, r)| s - r)
            .collect())
    }
}

/// Coefficient-space helper bound to one grid.
pub(crate) struct Spectral {
    plan: FourierPlan,
    inv_len: f64,
}

impl Spectral {
    pub(crate) fn new(grid: &GridSpec) -> Self {
        Self {
            plan: FourierPlan::new(grid),
            inv_len: 1.0 / grid.len() as f64,
        }
    }

    pub(crate) fn coeffs(&self, values: &[f64]) -> Vec<Complex64> {
        let mut a: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.plan.forward_raw(&mut a);
        for c in a.iter_mut() {
            *c *= self.inv_len;
        }
        a
    }

    pub(crate) fn physical(&self, a: &[Complex64]) -> Vec<f64> {
        let mut b = a.to_vec();
        self.plan.inverse_raw(&mut b);
        b.into_iter().map(|c| c.re).collect()
    }

    /// Coefficients of the pointwise product `v * u` where `u` has coefficients `a`.
    pub(crate) fn multiply(&self, v: &[f64], a: &[Complex64]) -> Vec<Complex64> {
        let mut b = a.to_vec();
        self.plan.inverse_raw(&mut b);
        for (x, &w) in b.iter_mut().zip(v) {
            *x = Complex64::new(x.re * w, 0.0);
        }
        self.plan.forward_raw(&mut b);
        for c in b.iter_mut() {
            *c *= self.inv_len;
        }
        b
    }
}

/// Exact semigroup `exp(-t (|xi|^m - shift))` applied to `u0`.
pub fn propagate(u0: &Field, spec: &PropagatorSpec, m: f64, t: f64) -> Result<Field> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidParams(format!("t = {t} must be >= 0")));
    }
    let grid = *u0.grid();
    let rates = spec.rates(&grid, m)?;
    let sp = Spectral::new(&grid);
    let mut a = sp.coeffs(u0.values());
    for (c, r) in a.iter_mut().zip(&rates) {
        *c *= (-t * r).exp();
    }
    Field::new(grid, sp.physical(&a))
}

/// A field recorded during a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub field: Field,
}

fn check_potential(u0: &Field, potential: &FieldSample, p: &EvolutionParams) -> Result<()> {
    p.validate()?;
    check_grid(u0.grid(), potential.field.grid())?;
    if u0.grid().dim() != p.d {
        return Err(Error::GridMismatch(format!(
            "params say d = {}, grid has d = {}",
            p.d,
            u0.grid().dim()
        )));
    }
    Ok(())
}

fn dealias_mask(grid: &GridSpec) -> Vec<f64> {
    let cut = grid.points() as i64 / 3;
    (0..grid.len())
        .map(|k| {
            let w = grid.wave_vector(k);
            if w[..grid.dim()].iter().any(|&v| v.abs() > cut) {
                0.0
            } else {
                1.0
            }
        })
        .collect()
}

/// Strang splitting for `u_t + |D|^m u - V u = 0`.
pub fn solve_random(u0: &Field, potential: &FieldSample, p: &EvolutionParams) -> Result<Field> {
    solve_random_with_snapshots(u0, potential, p, &[]).map(|(u, _)| u)
}

/// [`solve_random`] that also records the solution at the requested times
/// (each rounded to the nearest step).
pub fn solve_random_with_snapshots(
    u0: &Field,
    potential: &FieldSample,
    p: &EvolutionParams,
    times: &[f64],
) -> Result<(Field, Vec<Snapshot>)> {
    check_potential(u0, potential, p)?;
    let grid = *u0.grid();
    let steps = p.steps();
    let h = p.dt;
    let v = potential.field.values();
    let half: Vec<f64> = v.iter().map(|&x| (0.5 * h * x).exp()).collect();
    let full: Vec<f64> = v.iter().map(|&x| (h * x).exp()).collect();
    let inv_len = 1.0 / grid.len() as f64;
    let mut mult: Vec<f64> = symbol_powers(&grid, p.m)
        .into_iter()
        .map(|s| (-h * s).exp() * inv_len)
        .collect();
    if p.dealias {
        for (x, k) in mult.iter_mut().zip(dealias_mask(&grid)) {
            *x *= k;
        }
    }
    let mut wanted: Vec<(usize, f64)> = times
        .iter()
        .map(|&t| (((t / h).round().max(0.0) as usize).min(steps), t))
        .collect();
    wanted.sort_by_key(|w| w.0);
    let mut snaps = Vec::with_capacity(wanted.len());
    let plan = FourierPlan::new(&grid);
    let mut buf: Vec<Complex64> = u0
        .values()
        .iter()
        .zip(&half)
        .map(|(&u, &e)| Complex64::new(u, 0.0) * if steps > 0 { e } else { 1.0 })
        .collect();
    let mut next = 0;
    while next < wanted.len() && wanted[next].0 == 0 {
        snaps.push(Snapshot {
            time: 0.0,
            field: u0.clone(),
        });
        next += 1;
    }
    for step in 1..=steps {
        plan.forward_raw(&mut buf);
        for (c, &k) in buf.iter_mut().zip(&mult) {
            *c *= k;
        }
        plan.inverse_raw(&mut buf);
        let record = next < wanted.len() && wanted[next].0 == step;
        let last = step == steps;
        let mut peak = 0.0f64;
        if record || last {
            for (c, &e) in buf.iter_mut().zip(&half) {
                *c = Complex64::new(c.re * e, 0.0);
                peak = peak.max(c.re.abs());
            }
            let values: Vec<f64> = buf.iter().map(|c| c.re).collect();
            check_peak(peak, step, h)?;
            while next < wanted.len() && wanted[next].0 == step {
                snaps.push(Snapshot {
                    time: step as f64 * h,
                    field: Field::new(grid, values.clone())?,
                });
                next += 1;
            }
            if !last {
                for (c, &e) in buf.iter_mut().zip(&half) {
                    *c = Complex64::new(c.re * e, 0.0);
                }
            }
        } else {
            for (c, &e) in buf.iter_mut().zip(&full) {
                *c = Complex64::new(c.re * e, 0.0);
                peak = peak.max(c.re.abs());
            }
            check_peak(peak, step, h)?;
        }
    }
    let values: Vec<f64> = buf.into_iter().map(|c| c.re).collect();
    Ok((Field::new(grid, values)?, snaps))
}

fn check_peak(peak: f64, step: usize, h: f64) -> Result<()> {
    if !(peak <= OVERFLOW_LIMIT) {
        return Err(Error::Overflow {
            step,
            time: step as f64 * h,
        });
    }
    Ok(())
}

/// Trapezoid Duhamel integrals `P_J = sum_j w_j exp(-(t_J - s_j) rate) g_j` for every `J`.
///
/// `w` is the trapezoid rule on `[0, t_J]`; `P_0 = 0`.
fn trapezoid_history(rates: &[f64], h: f64, g: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let len = rates.len();
    let decay: Vec<f64> = rates.iter().map(|r| (-h * r).exp()).collect();
    let mut out = Vec::with_capacity(g.len());
    out.push(vec![Complex64::new(0.0, 0.0); len]);
    let mut s = vec![Complex64::new(0.0, 0.0); len];
    let mut first = g[0].clone();
    for j in 1..g.len() {
        let mut p = vec![Complex64::new(0.0, 0.0); len];
        for k in 0..len {
            s[k] = decay[k] * (s[k] + h * g[j - 1][k]);
            first[k] *= decay[k];
            p[k] = s[k] - 0.5 * h * first[k] + 0.5 * h * g[j][k];
        }
        out.push(p);
    }
    out
}

/// [`trapezoid_history`] at the final time only, consuming sources one at a time.
fn trapezoid_final(
    rates: &[f64],
    h: f64,
    steps: usize,
    mut source: impl FnMut(usize) -> Vec<Complex64>,
) -> Vec<Complex64> {
    let len = rates.len();
    if steps == 0 {
        return vec![Complex64::new(0.0, 0.0); len];
    }
    let decay: Vec<f64> = rates.iter().map(|r| (-h * r).exp()).collect();
    let mut prev = source(0);
    let mut first = prev.clone();
    let mut s = vec![Complex64::new(0.0, 0.0); len];
    for j in 1..=steps {
        for k in 0..len {
            s[k] = decay[k] * (s[k] + h * prev[k]);
            first[k] *= decay[k];
        }
        prev = source(j);
    }
    (0..len)
        .map(|k| s[k] - 0.5 * h * first[k] + 0.5 * h * prev[k])
        .collect()
}

/// Duhamel iterates `u_0, ..., u_{n_max}` at `t_final`.
///
/// `u_n(t) = int_0^t Free(t - s)[V u_{n-1}(s)] ds` with the trapezoid rule on the step grid.
pub fn duhamel_terms(
    u0: &Field,
    potential: &FieldSample,
    p: &EvolutionParams,
    n_max: usize,
) -> Result<Vec<Field>> {
    check_potential(u0, potential, p)?;
    let grid = *u0.grid();
    let sp = Spectral::new(&grid);
    let rates = PropagatorSpec::Free.rates(&grid, p.m)?;
    let steps = p.steps();
    let h = p.dt;
    let a0 = sp.coeffs(u0.values());
    let mut level: Vec<Vec<Complex64>> = (0..=steps)
        .map(|j| {
            let t = j as f64 * h;
            a0.iter()
                .zip(&rates)
                .map(|(c, r)| c * (-t * r).exp())
                .collect()
        })
        .collect();
    let v = potential.field.values();
    let mut out = vec![Field::new(grid, sp.physical(&level[steps]))?];
    for _ in 1..=n_max {
        let g: Vec<Vec<Complex64>> = level.iter().map(|a| sp.multiply(v, a)).collect();
        level = trapezoid_history(&rates, h, &g);
        out.push(Field::new(grid, sp.physical(&level[steps]))?);
    }
    Ok(out)
}

/// The `n`-th Duhamel iterate at `t_final`.
pub fn duhamel_term(
    n: usize,
    u0: &Field,
    potential: &FieldSample,
    p: &EvolutionParams,
) -> Result<Field> {
    let mut all = duhamel_terms(u0, potential, p, n)?;
    Ok(all.pop().expect("n + 1 terms"))
}

/// Single-scattering corrector `u^c(t) = int_0^t G_(t-s)[V G_s u0] ds` with `G = exp(-t(|xi|^m - rho))`.
pub fn corrector(
    u0: &Field,
    potential: &FieldSample,
    rho: f64,
    p: &EvolutionParams,
) -> Result<Field> {
    check_potential(u0, potential, p)?;
    let grid = *u0.grid();
    let sp = Spectral::new(&grid);
    let rates = PropagatorSpec::Homogenized(rho).rates(&grid, p.m)?;
    let a0 = sp.coeffs(u0.values());
    let v = potential.field.values();
    let h = p.dt;
    let a = trapezoid_final(&rates, h, p.steps(), |j| {
        let t = j as f64 * h;
        let aj: Vec<Complex64> = a0
            .iter()
            .zip(&rates)
            .map(|(c, r)| c * (-t * r).exp())
            .collect();
        sp.multiply(v, &aj)
    });
    Field::new(grid, sp.physical(&a))
}

/// Sidecar metadata for a raw field dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub dim: usize,
    pub points: usize,
    pub length: f64,
    pub time: f64,
    pub dtype: String,
    pub order: String,
    pub data_file: String,
}

/// Writes `<stem>.f64` (little-endian float64, row-major, last axis fastest)
/// and `<stem>.json` into `dir`; returns the data path.
pub fn write_snapshot(dir: &Path, stem: &str, snap: &Snapshot) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let data_name = format!("{stem}.f64");
    let data_path = dir.join(&data_name);
    let bytes: Vec<u8> = snap
        .field
        .values()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    fs::write(&data_path, bytes)?;
    let g = snap.field.grid();
    let meta = SnapshotMeta {
        dim: g.dim(),
        points: g.points(),
        length: g.length(),
        time: snap.time,
        dtype: "float64-le".into(),
        order: "row-major, last axis fastest".into(),
        data_file: data_name,
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(dir.join(format!("{stem}.json")), text)?;
    Ok(data_path)
}

/// Reads a dump written by [`write_snapshot`].
pub fn read_snapshot(dir: &Path, stem: &str) -> Result<Snapshot> {
    let text = fs::read_to_string(dir.join(format!("{stem}.json")))?;
    let meta: SnapshotMeta = serde_json::from_str(&text).map_err(|e| Error::Io(e.to_string()))?;
    let bytes = fs::read(dir.join(&meta.data_file))?;
    let grid = GridSpec::new(meta.dim, meta.points, meta.length)?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Io(format!(
            "{} holds {} bytes, expected {}",
            meta.data_file,
            bytes.len(),
            8 * grid.len()
        )));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Snapshot {
        time: meta.time,
        field: Field::new(grid, values)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random_field::{scaled_potential, AlphaRule};
    use crate::spectrum::PowerSpectrum;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn grid() -> GridSpec {
        GridSpec::new(1, 64, 2.0 * PI).unwrap()
    }

    fn constant_potential(c: f64) -> FieldSample {
        FieldSample {
            field: Field::constant(grid(), c),
            seed: 0,
            spectrum: PowerSpectrum::gaussian(0.0, 1.0),
            scale: 1.0,
            eps_alpha: 1.0,
        }
    }

    fn rel_diff(a: &Field, b: &Field) -> f64 {
        a.combine(1.0, b, -1.0).unwrap().l2_norm() / b.l2_norm()
    }

    #[test]
    fn params_validation() {
        assert!(EvolutionParams::new(1, 0.4, 0.1, 1.0, 0.01).is_ok());
        assert!(EvolutionParams::new(1, 0.4, 0.1, 1.0, 0.3).is_err());
        assert!(EvolutionParams::new(1, 0.0, 0.1, 1.0, 0.1).is_err());
        assert!(EvolutionParams::new(1, 0.4, 1.5, 1.0, 0.1).is_err());
        let p = EvolutionParams::new(1, 0.4, 0.1, 1.0, 0.01).unwrap();
        assert_eq!(p.steps(), 100);
        assert!(p.check_horizon(1.5).is_ok());
        assert!(p.check_horizon(0.9).is_err());
    }

    #[test]
    fn propagate_identities() {
        let g = grid();
        let u0 = Field::from_fn(g, |x| (x[0]).cos() + 0.5);
        let same = propagate(&u0, &PropagatorSpec::Free, 1.3, 0.0).unwrap();
        assert!(rel_diff(&same, &u0) < 1e-14);
        let out = propagate(&u0, &PropagatorSpec::Free, 1.3, 0.7).unwrap();
        let expect = Field::from_fn(g, |x| (-0.7f64).exp() * x[0].cos() + 0.5);
        assert!(rel_diff(&out, &expect) < 1e-13);
        let hom = propagate(&u0, &PropagatorSpec::Homogenized(0.4), 1.3, 0.7).unwrap();
        assert_relative_eq!(
            hom.mass() / u0.mass(),
            (0.28f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn corrected_needs_full_lattice() {
        let u0 = Field::constant(grid(), 1.0);
        assert!(propagate(&u0, &PropagatorSpec::Corrected(vec![0.0; 3]), 1.0, 1.0).is_err());
    }

    #[test]
    fn zero_and_constant_potential_are_exact() {
        let g = grid();
        let u0 = Field::gaussian_bump(g, 1.0, 0.6);
        let p = EvolutionParams::new(1, 0.8, 1.0, 0.5, 0.05).unwrap();
        let free = propagate(&u0, &PropagatorSpec::Free, 0.8, 0.5).unwrap();
        let u = solve_random(&u0, &constant_potential(0.0), &p).unwrap();
        assert!(rel_diff(&u, &free) < 1e-12);
        let u = solve_random(&u0, &constant_potential(1.7), &p).unwrap();
        assert!(rel_diff(&u, &free.scaled((1.7f64 * 0.5).exp())) < 1e-10);
    }

    #[test]
    fn overflow_is_reported() {
        let u0 = Field::constant(grid(), 1.0);
        let p = EvolutionParams::new(1, 1.0, 1.0, 10.0, 0.5).unwrap();
        assert!(matches!(
            solve_random(&u0, &constant_potential(30.0), &p),
            Err(Error::Overflow { .. })
        ));
    }

    #[test]
    fn snapshots_hit_requested_steps() {
        let u0 = Field::gaussian_bump(grid(), 1.0, 0.6);
        let p = EvolutionParams::new(1, 1.0, 1.0, 1.0, 0.1).unwrap();
        let (u, snaps) =
            solve_random_with_snapshots(&u0, &constant_potential(0.0), &p, &[0.0, 0.5, 1.0])
                .unwrap();
        assert_eq!(snaps.len(), 3);
        assert_eq!(snaps[0].field, u0);
        assert_eq!(snaps[2].field, u);
        let mid = propagate(&u0, &PropagatorSpec::Free, 1.0, 0.5).unwrap();
        assert!(rel_diff(&snaps[1].field, &mid) < 1e-12);
    }

    #[test]
    fn duhamel_constant_potential() {
        let g = grid();
        let u0 = Field::gaussian_bump(g, 1.0, 0.6);
        let p = EvolutionParams::new(1, 1.0, 1.0, 0.8, 0.01).unwrap();
        let terms = duhamel_terms(&u0, &constant_potential(0.3), &p, 3).unwrap();
        let free = propagate(&u0, &PropagatorSpec::Free, 1.0, 0.8).unwrap();
        assert!(rel_diff(&terms[0], &free) < 1e-13);
        // u_n = (c t)^n / n! free, and the trapezoid rule is exact for these polynomials up to O(dt^2)
        assert!(rel_diff(&terms[1], &free.scaled(0.3 * 0.8)) < 1e-12);
        let second = free.scaled((0.3f64 * 0.8).powi(2) / 2.0);
        assert!(rel_diff(&terms[2], &second) < 1e-4);
    }

    #[test]
    fn corrector_vanishes_without_potential() {
        let u0 = Field::gaussian_bump(grid(), 1.0, 0.6);
        let p = EvolutionParams::new(1, 1.0, 1.0, 0.8, 0.1).unwrap();
        let c = corrector(&u0, &constant_potential(0.0), 0.5, &p).unwrap();
        assert_eq!(c.max_abs(), 0.0);
    }

    #[test]
    fn corrector_matches_first_duhamel_term_without_shift() {
        let g = grid();
        let u0 = Field::gaussian_bump(g, 1.0, 0.6);
        let pot = scaled_potential(
            &PowerSpectrum::gaussian(1.0, 3.0),
            &g,
            1.0,
            AlphaRule::Exponent(0.0),
            11,
        )
        .unwrap();
        let p = EvolutionParams::new(1, 1.0, 1.0, 0.5, 0.05).unwrap();
        let c = corrector(&u0, &pot, 0.0, &p).unwrap();
        let d1 = duhamel_term(1, &u0, &pot, &p).unwrap();
        assert!(rel_diff(&c, &d1) < 1e-12);
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let snap = Snapshot {
            time: 0.25,
            field: Field::gaussian_bump(GridSpec::new(2, 8, 1.0).unwrap(), 1.0, 0.2),
        };
        let path = write_snapshot(dir.path(), "u", &snap).unwrap();
        assert_eq!(std::fs::metadata(path).unwrap().len(), 8 * 64);
        assert_eq!(read_snapshot(dir.path(), "u").unwrap(), snap);
    }
}
