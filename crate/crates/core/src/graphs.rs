//! Wick pairings of the moment expansion, their classification, and direct
//! lattice evaluation of low-order moment contributions.
//!
//! Factors are numbered `1..=n + m`: `1..=n` belong to the upper row (the
//! `n`-th Duhamel term) and `n + 1..=n + m` to the lower row. Within a row the
//! first factor is the outermost one in time. A pair is crossing when it
//! couples the two rows and simple when it joins adjacent factors of one row.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::Spectral;
use crate::grid::{check_grid, forward_transform, symbol_powers, Field, GridSpec};
use crate::medium::rho_eps_lattice;
use crate::spectrum::PowerSpectrum;

/// Largest `nbar` accepted by [`enumerate_pairings`].
pub const MAX_NBAR: usize = 7;

/// A perfect matching of `1..=2 nbar`, each pair stored as `(k, l)` with `k < l`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GraphPairing {
    pub nbar: usize,
    pub pairs: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphClass {
    pub is_crossing: bool,
    pub is_simple_graph: bool,
    pub is_crossing_simple: bool,
}

/// Which graphs a moment evaluation keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphFilter {
    All,
    Crossing,
    NonCrossing,
    Simple,
    CrossingSimple,
}

impl GraphFilter {
    pub fn admits(self, class: GraphClass) -> bool {
        match self {
            Self::All => true,
            Self::Crossing => class.is_crossing,
            Self::NonCrossing => !class.is_crossing,
            Self::Simple => class.is_simple_graph,
            Self::CrossingSimple => class.is_crossing_simple,
        }
    }
}

/// `(2 nbar - 1)!!`.
pub fn pairing_count(nbar: usize) -> u64 {
    (1..=nbar as u64).map(|k| 2 * k - 1).product()
}

/// Every perfect matching of `1..=2 nbar`, in lexicographic order.
pub fn enumerate_pairings(nbar: usize) -> Result<Vec<GraphPairing>> {
    if nbar > MAX_NBAR {
        return Err(Error::TooLarge(format!(
            "nbar = {nbar} exceeds {MAX_NBAR} ({} pairings)",
            pairing_count(nbar)
        )));
    }
    let mut out = Vec::with_capacity(pairing_count(nbar) as usize);
    let mut free: Vec<usize> = (1..=2 * nbar).collect();
    let mut current = Vec::with_capacity(nbar);
    extend(&mut free, &mut current, &mut |pairs| {
        out.push(GraphPairing {
            nbar,
            pairs: pairs.to_vec(),
        })
    });
    Ok(out)
}

fn extend(
    free: &mut Vec<usize>,
    current: &mut Vec<(usize, usize)>,
    emit: &mut impl FnMut(&[(usize, usize)]),
) {
    if free.is_empty() {
        emit(current);
        return;
    }
    let first = free.remove(0);
    for i in 0..free.len() {
        let partner = free.remove(i);
        current.push((first, partner));
        extend(free, current, emit);
        current.pop();
        free.insert(i, partner);
    }
    free.insert(0, first);
}

/// Crossing and simplicity flags of `g` for the row split `(n, m)`.
pub fn classify(g: &GraphPairing, n: usize, m: usize) -> Result<GraphClass> {
    if n + m != 2 * g.nbar {
        return Err(Error::SplitMismatch {
            n,
            m,
            factors: 2 * g.nbar,
        });
    }
    let crossing = |&(k, l): &(usize, usize)| k <= n && l > n;
    let simple = |&(k, l): &(usize, usize)| l == k + 1 && !crossing(&(k, l));
    let crossings = g.pairs.iter().filter(|p| crossing(p)).count();
    let simples = g.pairs.iter().filter(|p| simple(p)).count();
    Ok(GraphClass {
        is_crossing: crossings > 0,
        is_simple_graph: simples == g.pairs.len(),
        is_crossing_simple: crossings == 1 && simples + 1 == g.pairs.len(),
    })
}

/// Net coefficient of each pair momentum in the upper and lower row sums.
///
/// Pair `i` carries `+p_i` on its first factor and `-p_i` on its second, so a
/// row whose entries all vanish has equal input and output frequencies.
pub fn row_momentum(g: &GraphPairing, n: usize, m: usize) -> Result<(Vec<i32>, Vec<i32>)> {
    classify(g, n, m)?;
    let mut upper = vec![0; g.pairs.len()];
    let mut lower = vec![0; g.pairs.len()];
    for (i, &(k, l)) in g.pairs.iter().enumerate() {
        for (slot, sign) in [(k, 1), (l, -1)] {
            if slot <= n {
                upper[i] += sign;
            } else {
                lower[i] += sign;
            }
        }
    }
    Ok((upper, lower))
}

/// Class counts for one `(nbar, n, m)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusRow {
    pub nbar: usize,
    pub n: usize,
    pub m: usize,
    pub total: u64,
    pub crossing: u64,
    pub simple: u64,
    pub crossing_simple: u64,
}

/// Class counts for every `nbar <= nbar_max` and every split `n + m = 2 nbar`.
pub fn census(nbar_max: usize) -> Result<Vec<CensusRow>> {
    if nbar_max > MAX_NBAR {
        return Err(Error::TooLarge(format!(
            "nbar_max = {nbar_max} exceeds {MAX_NBAR}"
        )));
    }
    let mut rows = Vec::new();
    for nbar in 1..=nbar_max {
        let graphs = enumerate_pairings(nbar)?;
        for n in 0..=2 * nbar {
            let m = 2 * nbar - n;
            let mut row = CensusRow {
                nbar,
                n,
                m,
                total: graphs.len() as u64,
                crossing: 0,
                simple: 0,
                crossing_simple: 0,
            };
            for g in &graphs {
                let c = classify(g, n, m)?;
                row.crossing += c.is_crossing as u64;
                row.simple += c.is_simple_graph as u64;
                row.crossing_simple += c.is_crossing_simple as u64;
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Writes census rows as CSV with a header line.
pub fn write_census_csv(rows: &[CensusRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Inputs of a lattice moment evaluation.
#[derive(Debug, Clone)]
pub struct MomentProblem {
    pub grid: GridSpec,
    /// `E|c_k|^2` of the potential's lattice coefficients.
    pub variances: Vec<f64>,
    pub m: f64,
    pub t: f64,
    pub dt: f64,
    /// Propagators are `exp(-t (|xi|^m - shift))`.
    pub shift: f64,
    pub u0: Field,
    pub test: Field,
}

/// Guard on the direct summation cost.
pub const MAX_MOMENT_POINTS: usize = 64;
pub const MAX_MOMENT_ORDER: usize = 4;

struct Chain<'a> {
    rates: &'a [f64],
    a0: &'a [Complex64],
    b: &'a [Complex64],
    n: usize,
    steps: usize,
    h: f64,
    volume: f64,
}

impl Chain<'_> {
    /// `L^d sum_k0 conj(b_out) f(t)` for a row with the given slot momenta (outermost first).
    fn row_value(&self, momenta: &[usize]) -> Complex64 {
        if momenta.is_empty() {
            return self.volume
                * self
                    .a0
                    .iter()
                    .zip(self.b)
                    .zip(self.rates)
                    .map(|((a, b), r)| a * b.conj() * (-self.h * self.steps as f64 * r).exp())
                    .sum::<Complex64>();
        }
        let mut total = Complex64::new(0.0, 0.0);
        let mut hist = vec![Complex64::new(0.0, 0.0); self.steps + 1];
        let mut next = vec![Complex64::new(0.0, 0.0); self.steps + 1];
        for k0 in 0..self.n {
            if self.a0[k0] == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut kappa = k0;
            let r0 = self.rates[k0];
            for (j, v) in hist.iter_mut().enumerate() {
                *v = self.a0[k0] * (-(j as f64) * self.h * r0).exp();
            }
            for &q in momenta.iter().rev() {
                kappa = (kappa + q) % self.n;
                trapezoid_scalar(self.rates[kappa], self.h, &hist, &mut next);
                std::mem::swap(&mut hist, &mut next);
            }
            total += self.b[kappa].conj() * hist[self.steps];
        }
        self.volume * total
    }
}

/// Scalar version of the trapezoid Duhamel recurrence.
fn trapezoid_scalar(rate: f64, h: f64, g: &[Complex64], out: &mut [Complex64]) {
    let decay = (-h * rate).exp();
    let mut s = Complex64::new(0.0, 0.0);
    let mut first = g[0];
    out[0] = Complex64::new(0.0, 0.0);
    for j in 1..g.len() {
        s = decay * (s + h * g[j - 1]);
        first *= decay;
        out[j] = s - 0.5 * h * first + 0.5 * h * g[j];
    }
}

/// `E[(u_n, M)(u_m, M)]` restricted to the graphs admitted by `filter`, by
/// direct summation over the frequency lattice.
///
/// `u_n` is the `n`-th trapezoid Duhamel iterate built with the shifted
/// propagator; the result is exact for the lattice potential law, so it can be
/// compared against Monte Carlo without discretization mismatch.
pub fn evaluate_moment(
    n: usize,
    m: usize,
    problem: &MomentProblem,
    filter: GraphFilter,
) -> Result<Complex64> {
    let grid = problem.grid;
    if grid.dim() != 1 || grid.points() > MAX_MOMENT_POINTS || n + m > MAX_MOMENT_ORDER {
        return Err(Error::TooLarge(format!(
            "direct evaluation needs d = 1, N <= {MAX_MOMENT_POINTS}, n + m <= {MAX_MOMENT_ORDER} (got d = {}, N = {}, n + m = {})",
            grid.dim(),
            grid.points(),
            n + m
        )));
    }
    check_grid(&grid, problem.u0.grid())?;
    check_grid(&grid, problem.test.grid())?;
    if problem.variances.len() != grid.len() {
        return Err(Error::GridMismatch(
            "variance table does not match grid".into(),
        ));
    }
    if !(problem.dt > 0.0 && problem.t >= 0.0) {
        return Err(Error::InvalidParams("need dt > 0 and t >= 0".into()));
    }
    let steps = (problem.t / problem.dt).round() as usize;
    if ((steps as f64) * problem.dt - problem.t).abs() > 1e-9 * problem.t.max(problem.dt) {
        return Err(Error::InvalidParams("t / dt is not an integer".into()));
    }
    if (n + m) % 2 == 1 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let sp = Spectral::new(&grid);
    let a0 = sp.coeffs(problem.u0.values());
    let b = sp.coeffs(problem.test.values());
    let rates: Vec<f64> = symbol_powers(&grid, problem.m)
        .into_iter()
        .map(|s| s - problem.shift)
        .collect();
    let chain = Chain {
        rates: &rates,
        a0: &a0,
        b: &b,
        n: grid.len(),
        steps,
        h: problem.dt,
        volume: grid.length().powi(grid.dim() as i32),
    };
    let nbar = (n + m) / 2;
    if nbar == 0 {
        let x = chain.row_value(&[]);
        return Ok(
            if filter.admits(GraphClass {
                is_crossing: false,
                is_simple_graph: true,
                is_crossing_simple: false,
            }) {
                x * x
            } else {
                Complex64::new(0.0, 0.0)
            },
        );
    }
    let graphs: Vec<GraphPairing> = enumerate_pairings(nbar)?
        .into_iter()
        .filter(|g| classify(g, n, m).map(|c| filter.admits(c)).unwrap_or(false))
        .collect();
    let size = grid.len();
    let tuples = size.pow(nbar as u32);
    let lower_free = (m == 0).then(|| chain.row_value(&[]));
    let upper_free = (n == 0).then(|| chain.row_value(&[]));
    let mut total = Complex64::new(0.0, 0.0);
    for g in &graphs {
        let parts: Vec<Complex64> = (0..tuples)
            .into_par_iter()
            .map(|code| {
                let mut slots = vec![0usize; n + m];
                let mut weight = 1.0;
                let mut c = code;
                for &(k, l) in &g.pairs {
                    let p = c % size;
                    c /= size;
                    weight *= problem.variances[p];
                    slots[k - 1] = p;
                    slots[l - 1] = (size - p) % size;
                }
                if weight == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let up = upper_free.unwrap_or_else(|| chain.row_value(&slots[..n]));
                let low = lower_free.unwrap_or_else(|| chain.row_value(&slots[n..]));
                weight * up * low
            })
            .collect();
        total += parts.into_iter().sum::<Complex64>();
    }
    Ok(total)
}

/// `sup_(t_J, xi_k) |(I - B_eps) U_eps - exp(-t xi^m) u0^| / max |u0^|` where
/// `U_eps = exp(-t(xi^m - rho_eps)) u0^` and `B_eps` is evaluated by the trapezoid rule.
pub fn mean_field_residual(
    spec: &PowerSpectrum,
    grid: &GridSpec,
    m: f64,
    eps: f64,
    t: f64,
    dt: f64,
    u0: &Field,
) -> Result<f64> {
    check_grid(grid, u0.grid())?;
    let rho_eps = rho_eps_lattice(spec, grid, m, eps)?;
    residual_with_shift(grid, m, t, dt, u0, &rho_eps)
}

fn residual_with_shift(
    grid: &GridSpec,
    m: f64,
    t: f64,
    dt: f64,
    u0: &Field,
    rho_eps: &[f64],
) -> Result<f64> {
    let steps = (t / dt).round() as usize;
    if !(dt > 0.0) || ((steps as f64) * dt - t).abs() > 1e-9 * t.max(dt) {
        return Err(Error::InvalidParams(
            "t / dt must be a positive integer".into(),
        ));
    }
    let u_hat = forward_transform(u0);
    let scale = u_hat.coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(0.0);
    }
    let sym = symbol_powers(grid, m);
    let worst = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let a = sym[k];
            let r = rho_eps[k];
            let u = u_hat.coeffs()[k];
            let mut sup = 0.0f64;
            for jj in 0..=steps {
                let tj = jj as f64 * dt;
                let big_u = |s: f64| (-s * (a - r)).exp();
                let mut integral = 0.0;
                if jj > 0 {
                    for i in 0..=jj {
                        let v = i as f64 * dt;
                        let w = if i == 0 || i == jj { 0.5 } else { 1.0 };
                        integral += w * (-a * v).exp() * big_u(tj - v);
                    }
                    integral *= dt;
                }
                let res = (big_u(tj) - r * integral - (-tj * a).exp()) * u.norm();
                sup = sup.max(res.abs());
            }
            sup
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max);
    Ok(worst / scale)
}

/// `sup_k |exp(-t(xi^m - rho_eps)) - exp(-t(xi^m - rho))|` over the lattice.
pub fn propagator_gap(grid: &GridSpec, m: f64, t: f64, rho: f64, rho_eps: &[f64]) -> Result<f64> {
    if rho_eps.len() != grid.len() {
        return Err(Error::GridMismatch("rho_eps does not match grid".into()));
    }
    Ok(symbol_powers(grid, m)
        .iter()
        .zip(rho_eps)
        .map(|(a, re)| ((-t * (a - re)).exp() - (-t * (a - rho)).exp()).abs())
        .fold(0.0, f64::max))
}
