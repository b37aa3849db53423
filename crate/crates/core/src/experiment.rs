//! Batch experiments: configuration, ensemble orchestration and reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::evolution::{
    corrector, duhamel_terms, propagate, solve_random, solve_random_with_snapshots, write_snapshot,
    EvolutionParams, PropagatorSpec,
};
use crate::graphs::{census, evaluate_moment, write_census_csv, GraphFilter, MomentProblem};
use crate::grid::{Field, GridSpec};
use crate::medium::{
    alpha_exponent, alpha_scale, beta_exponent, beta_scale, compute_rho, hurst, rho_eps_lattice,
    riesz_constant, MediumConstants,
};
use crate::random_field::{
    potential_variances, resolve_eps_alpha, scaled_potential, stream_seed, unresolved_fraction,
    AlphaRule, FieldSample, RESOLUTION_LIMIT,
};
use crate::spectrum::PowerSpectrum;
use crate::stats::{
    ensemble_stats, limit_variance_long, limit_variance_short, rate_fit, regularity_integral,
    script_m, EnsembleStats, RateFit,
};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rho,
    Simulate,
    Converge,
    Fluctuate,
    Graphs,
    Longrange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub dim: usize,
    pub points: usize,
    pub length: f64,
}

/// Centred Gaussian profile `amplitude exp(-|x - c|^2 / width^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BumpConfig {
    pub amplitude: f64,
    pub width: f64,
}

impl Default for BumpConfig {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            width: 1.0,
        }
    }
}

fn default_script_m_steps() -> usize {
    256
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    pub m: f64,
    pub t_final: f64,
    pub dt: f64,
    #[serde(default)]
    pub dealias: bool,
    /// Trapezoid intervals used for `M_t`.
    #[serde(default = "default_script_m_steps")]
    pub script_m_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub eps: Vec<f64>,
    pub realizations: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_nbar_max() -> usize {
    6
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphsConfig {
    #[serde(default = "default_nbar_max")]
    pub nbar_max: usize,
}

impl Default for GraphsConfig {
    fn default() -> Self {
        Self {
            nbar_max: default_nbar_max(),
        }
    }
}

fn default_ks() -> f64 {
    0.01
}
fn default_skew() -> f64 {
    0.1
}
fn default_kurt() -> f64 {
    0.2
}

/// Desk-scale thresholds of the normality checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatsConfig {
    #[serde(default = "default_ks")]
    pub ks_threshold: f64,
    #[serde(default = "default_skew")]
    pub max_abs_skew: f64,
    #[serde(default = "default_kurt")]
    pub max_abs_excess_kurtosis: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        Self {
            ks_threshold: default_ks(),
            max_abs_skew: default_skew(),
            max_abs_excess_kurtosis: default_kurt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Run directory; the command line may override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Times at which realization 0 of each `eps` is dumped (simulate runs).
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub grid: GridConfig,
    pub spectrum: PowerSpectrum,
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub ensemble: EnsembleConfig,
    #[serde(default)]
    pub initial: BumpConfig,
    #[serde(default)]
    pub test: BumpConfig,
    #[serde(default)]
    pub graphs: GraphsConfig,
    #[serde(default)]
    pub stats: StatsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// A validated configuration with the derived objects every run needs.
#[derive(Debug, Clone)]
pub struct Setup {
    pub config: ExperimentConfig,
    pub grid: GridSpec,
    pub params: EvolutionParams,
    pub constants: Option<MediumConstants>,
    pub u0: Field,
    pub test: Field,
}

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| cfg_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| cfg_err(e.to_string()))
    }

    /// SHA-256 of the canonical JSON form of the configuration, output location excluded.
    pub fn hash(&self) -> String {
        let mut cfg = self.clone();
        cfg.output.dir = None;
        let canonical = serde_json::to_vec(&cfg).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Checks every invariant and builds the grid, parameters and profiles.
    pub fn validate(&self) -> Result<Setup> {
        let g = &self.grid;
        let grid = GridSpec::new(g.dim, g.points, g.length).map_err(|e| cfg_err(e.to_string()))?;
        let d = grid.dim();
        self.spectrum
            .validate_for(d)
            .map_err(|e| cfg_err(format!("spectrum: {e}")))?;
        let ev = &self.evolution;
        let m = ev.m;
        if !(m > 0.0) {
            return Err(cfg_err(format!("evolution.m = {m} must be > 0")));
        }
        if (d as f64) < m {
            return Err(cfg_err(format!(
                "d = {d} < m = {m}: the homogenization regime needs d >= m"
            )));
        }
        let n_hat = self.spectrum.exponent();
        if self.spectrum.is_long_range() && d as f64 <= m + n_hat {
            return Err(cfg_err(format!(
                "long-range spectrum needs d > m + n (d = {d}, m + n = {})",
                m + n_hat
            )));
        }
        for &eps in &self.ensemble.eps {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(cfg_err(format!("eps = {eps} not in (0, 1]")));
            }
        }
        let first_eps = self.ensemble.eps.first().copied().unwrap_or(1.0);
        let params = EvolutionParams::new(d, m, first_eps, ev.t_final, ev.dt)
            .map_err(|e| cfg_err(e.to_string()))?
            .with_dealias(ev.dealias);
        if ev.script_m_steps == 0 {
            return Err(cfg_err("evolution.script_m_steps must be >= 1"));
        }
        let constants = if self.spectrum.is_long_range() {
            None
        } else {
            let c = MediumConstants::compute(&self.spectrum, d, m)
                .map_err(|e| cfg_err(format!("effective constants: {e}")))?;
            if ev.t_final >= c.t_max {
                return Err(cfg_err(format!(
                    "4 rho_f T < 1 violated: t_final = {} but T_max = {:.6} (rho_f = {:.6})",
                    ev.t_final, c.t_max, c.rho_f
                )));
            }
            Some(c)
        };
        let needs_ensemble = matches!(
            self.kind,
            ExperimentKind::Simulate
                | ExperimentKind::Converge
                | ExperimentKind::Fluctuate
                | ExperimentKind::Graphs
        );
        if needs_ensemble {
            if self.ensemble.eps.is_empty() {
                return Err(cfg_err("ensemble.eps must list at least one scale"));
            }
            if self.ensemble.realizations == 0 {
                return Err(cfg_err("ensemble.realizations must be >= 1"));
            }
            for &eps in &self.ensemble.eps {
                let frac = unresolved_fraction(&self.spectrum, &grid, eps)
                    .map_err(|e| cfg_err(e.to_string()))?;
                if frac > RESOLUTION_LIMIT {
                    return Err(cfg_err(format!(
                        "eps = {eps}: {frac:.3e} of the potential spectrum lies beyond the Nyquist frequency (limit {RESOLUTION_LIMIT})"
                    )));
                }
                if eps < 1.0 {
                    alpha_scale(d, m, eps).map_err(|e| cfg_err(e.to_string()))?;
                }
            }
        }
        if self.kind == ExperimentKind::Converge && self.ensemble.eps.len() < 4 {
            return Err(cfg_err(
                "converge runs need at least 4 eps values for the rate fit",
            ));
        }
        if self.kind == ExperimentKind::Fluctuate && self.ensemble.realizations < 100 {
            return Err(cfg_err("fluctuate runs need at least 100 realizations"));
        }
        if self.kind == ExperimentKind::Longrange && !self.spectrum.is_long_range() {
            return Err(cfg_err("longrange runs need a long_range spectrum"));
        }
        let u0 = Field::gaussian_bump(grid, self.initial.amplitude, self.initial.width);
        let test = Field::gaussian_bump(grid, self.test.amplitude, self.test.width);
        Ok(Setup {
            config: self.clone(),
            grid,
            params,
            constants,
            u0,
            test,
        })
    }
}

/// Runs `f(0..count)` in parallel and returns the results in index order.
pub fn ensemble<T: Send>(
    count: usize,
    f: impl Fn(usize) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..count).into_par_iter().map(f).collect()
}

impl Setup {
    fn potential(&self, eps_index: usize, eps: f64, realization: usize) -> Result<FieldSample> {
        let seed = stream_seed(
            self.config.ensemble.seed,
            eps_index as u64,
            realization as u64,
        );
        scaled_potential(
            &self.config.spectrum,
            &self.grid,
            eps,
            AlphaRule::Order { m: self.params.m },
            seed,
        )
    }

    fn params_at(&self, eps: f64) -> EvolutionParams {
        EvolutionParams { eps, ..self.params }
    }

    fn rho(&self) -> Result<f64> {
        match &self.constants {
            Some(c) => Ok(c.rho),
            None => compute_rho(&self.config.spectrum, self.grid.dim(), self.params.m),
        }
    }

    /// `eps^d / (eps^alpha)^2 * eps^-n`, the variance scale of the weighted fluctuations.
    pub fn variance_scale(&self, eps: f64) -> Result<f64> {
        let d = self.grid.dim();
        let ea = resolve_eps_alpha(d, eps, AlphaRule::Order { m: self.params.m })?;
        Ok(eps.powi(d as i32) / (ea * ea) * eps.powf(-self.config.spectrum.exponent()))
    }

    /// `exp(-t(|xi|^m - rho_eps)) u0` at the final time.
    pub fn mean_field(&self, eps: f64) -> Result<Field> {
        let shift = rho_eps_lattice(&self.config.spectrum, &self.grid, self.params.m, eps)?;
        propagate(
            &self.u0,
            &PropagatorSpec::Corrected(shift),
            self.params.m,
            self.params.t_final,
        )
    }

    /// `M_t` for the configured profiles.
    pub fn script_m(&self) -> Result<Field> {
        script_m(
            self.params.t_final,
            &self.test,
            &self.u0,
            self.rho()?,
            self.params.m,
            self.config.evolution.script_m_steps,
        )
    }

    /// Limit variance of the weighted fluctuation (short- or long-range law).
    pub fn limit_variance(&self) -> Result<f64> {
        let mt = self.script_m()?;
        if self.config.spectrum.is_long_range() {
            Ok(limit_variance_long(&self.config.spectrum, &mt)?.spectral)
        } else {
            limit_variance_short(&self.config.spectrum, &mt)
        }
    }
}

/// Rate-table row of a converge run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergeRow {
    pub eps: f64,
    pub n_samples: usize,
    /// `(E ||u_eps - U_eps||^2)^(1/2)` on the grid.
    pub error: f64,
    pub error_se: f64,
    /// Same with the homogenized solution in place of `U_eps`.
    pub error_homogenized: f64,
    /// `||E{u_eps} - U_eps||` with the ensemble mean.
    pub mean_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeReport {
    pub rows: Vec<ConvergeRow>,
    pub fit: RateFit,
    /// `beta / 2` where `beta` is a pure exponent.
    pub theory_slope: Option<f64>,
}

pub fn converge_study(setup: &Setup) -> Result<ConvergeReport> {
    let eps_list = &setup.config.ensemble.eps;
    let r = setup.config.ensemble.realizations;
    let grid = setup.grid;
    let homogenized = propagate(
        &setup.u0,
        &PropagatorSpec::Homogenized(setup.rho()?),
        setup.params.m,
        setup.params.t_final,
    )?;
    let mut rows = Vec::with_capacity(eps_list.len());
    for (ei, &eps) in eps_list.iter().enumerate() {
        let target = setup.mean_field(eps)?;
        let p = setup.params_at(eps);
        let samples = ensemble(r, |i| {
            let pot = setup.potential(ei, eps, i)?;
            let u = solve_random(&setup.u0, &pot, &p)?;
            let e = u.combine(1.0, &target, -1.0)?.energy();
            let eh = u.combine(1.0, &homogenized, -1.0)?.energy();
            Ok((e, eh, u.into_values()))
        })?;
        let nf = r as f64;
        let sq: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let mean_sq = sq.iter().sum::<f64>() / nf;
        let mean_sq_h = samples.iter().map(|s| s.1).sum::<f64>() / nf;
        let var_sq = if r > 1 {
            sq.iter().map(|v| (v - mean_sq).powi(2)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        let error = mean_sq.sqrt();
        let error_se = if error > 0.0 {
            (var_sq / nf).sqrt() / (2.0 * error)
        } else {
            0.0
        };
        let mut mean_u = vec![0.0; grid.len()];
        for s in &samples {
            for (a, b) in mean_u.iter_mut().zip(&s.2) {
                *a += b;
            }
        }
        for a in mean_u.iter_mut() {
            *a /= nf;
        }
        let mean_gap = Field::new(grid, mean_u)?
            .combine(1.0, &target, -1.0)?
            .l2_norm();
        rows.push(ConvergeRow {
            eps,
            n_samples: r,
            error,
            error_se,
            error_homogenized: mean_sq_h.sqrt(),
            mean_gap,
        });
    }
    let fit = rate_fit(&rows.iter().map(|r| (r.eps, r.error)).collect::<Vec<_>>())?;
    Ok(ConvergeReport {
        rows,
        fit,
        theory_slope: beta_exponent(grid.dim(), setup.params.m).map(|b| b / 2.0),
    })
}

/// Statistics-table row (`kurt` is the plain kurtosis, 3 for a normal law).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub eps: f64,
    pub n_samples: usize,
    pub mean: f64,
    pub var: f64,
    pub se: f64,
    pub skew: f64,
    pub kurt: f64,
    pub ks_p: Option<f64>,
}

impl StatsRow {
    fn new(eps: f64, s: &EnsembleStats) -> Self {
        Self {
            eps,
            n_samples: s.n,
            mean: s.mean,
            var: s.var,
            se: s.se,
            skew: s.skew,
            kurt: s.excess_kurtosis + 3.0,
            ks_p: s.ks_p,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluctuationRow {
    pub eps: f64,
    pub n_samples: usize,
    /// `Var[(u_eps - mean, M)] / eps^(d - 2 alpha)` (with `eps^-n` for long-range spectra).
    pub normalized_var: f64,
    pub normalized_var_se: f64,
    /// `E[(u_eps - U_eps, M)^2]` with the same normalization.
    pub normalized_msq_mean_field: f64,
    pub limit_variance: f64,
    /// `(normalized_var - limit) / normalized_var_se`.
    pub z: f64,
    /// Moments of the standardized samples.
    pub skew: f64,
    pub excess_kurtosis: f64,
    pub ks_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluctuationReport {
    pub rows: Vec<FluctuationRow>,
    pub stats: Vec<StatsRow>,
    pub limit_variance: f64,
    /// Largest `|r_i - r_j| / sqrt(se_i^2 + se_j^2)` over the normalized variances.
    pub scaling_max_z: f64,
}

/// `(u_eps(t), M)` for every realization at one scale.
pub fn weighted_moments(setup: &Setup, eps_index: usize) -> Result<Vec<f64>> {
    let eps = setup.config.ensemble.eps[eps_index];
    let p = setup.params_at(eps);
    ensemble(setup.config.ensemble.realizations, |i| {
        let pot = setup.potential(eps_index, eps, i)?;
        solve_random(&setup.u0, &pot, &p)?.dot(&setup.test)
    })
}

pub fn fluctuation_study(setup: &Setup) -> Result<FluctuationReport> {
    let limit = setup.limit_variance()?;
    let mut rows = Vec::new();
    let mut stats = Vec::new();
    for (ei, &eps) in setup.config.ensemble.eps.iter().enumerate() {
        let xs = weighted_moments(setup, ei)?;
        let s = ensemble_stats(&xs)?;
        let scale = setup.variance_scale(eps)?;
        let x_mean_field = setup.mean_field(eps)?.dot(&setup.test)?;
        let msq = xs.iter().map(|x| (x - x_mean_field).powi(2)).sum::<f64>() / xs.len() as f64;
        let (skew, kurt, ks) = if s.degenerate {
            (0.0, 0.0, None)
        } else {
            let sd = s.var.sqrt();
            let z: Vec<f64> = xs.iter().map(|x| (x - s.mean) / sd).collect();
            let sn = ensemble_stats(&z)?;
            (sn.skew, sn.excess_kurtosis, sn.ks_p)
        };
        let nv = s.var / scale;
        let nse = s.var_se / scale;
        rows.push(FluctuationRow {
            eps,
            n_samples: s.n,
            normalized_var: nv,
            normalized_var_se: nse,
            normalized_msq_mean_field: msq / scale,
            limit_variance: limit,
            z: if nse > 0.0 { (nv - limit) / nse } else { 0.0 },
            skew,
            excess_kurtosis: kurt,
            ks_p: ks,
        });
        stats.push(StatsRow::new(eps, &s));
    }
    let mut scaling_max_z = 0.0f64;
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            let se = (rows[i].normalized_var_se.powi(2) + rows[j].normalized_var_se.powi(2)).sqrt();
            if se > 0.0 {
                scaling_max_z =
                    scaling_max_z.max((rows[i].normalized_var - rows[j].normalized_var).abs() / se);
            }
        }
    }
    Ok(FluctuationReport {
        rows,
        stats,
        limit_variance: limit,
        scaling_max_z,
    })
}

/// Lattice oracle against its Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub oracle: f64,
    pub monte_carlo: f64,
    pub se: f64,
    pub z: f64,
}

impl OracleComparison {
    fn new(oracle: f64, samples: &[f64]) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let se = (var / n).sqrt();
        Self {
            oracle,
            monte_carlo: mean,
            se,
            z: if se > 0.0 { (mean - oracle) / se } else { 0.0 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphOracleReport {
    /// Simple graph of `(n, m) = (2, 0)` against `E[(u_2, M)(u_0, M)]`.
    pub simple_2_0: OracleComparison,
    /// Crossing graph of `(1, 1)` with shift `rho` against `E[(u^c, M)^2]`.
    pub crossing_1_1: OracleComparison,
}

/// Compares lattice graph evaluations with Monte Carlo at the first configured `eps`.
pub fn graph_oracle_check(setup: &Setup) -> Result<GraphOracleReport> {
    let eps = setup.config.ensemble.eps[0];
    let p = setup.params_at(eps);
    let eps_alpha = resolve_eps_alpha(setup.grid.dim(), eps, AlphaRule::Order { m: p.m })?;
    let rho = setup.rho()?;
    let base = MomentProblem {
        grid: setup.grid,
        variances: potential_variances(&setup.config.spectrum, &setup.grid, eps, eps_alpha)?,
        m: p.m,
        t: p.t_final,
        dt: p.dt,
        shift: 0.0,
        u0: setup.u0.clone(),
        test: setup.test.clone(),
    };
    let simple = evaluate_moment(2, 0, &base, GraphFilter::Simple)?.re;
    let crossing = evaluate_moment(
        1,
        1,
        &MomentProblem {
            shift: rho,
            ..base.clone()
        },
        GraphFilter::Crossing,
    )?
    .re;
    let x0 = propagate(&setup.u0, &PropagatorSpec::Free, p.m, p.t_final)?.dot(&setup.test)?;
    let samples = ensemble(setup.config.ensemble.realizations, |i| {
        let pot = setup.potential(0, eps, i)?;
        let terms = duhamel_terms(&setup.u0, &pot, &p, 2)?;
        let c = corrector(&setup.u0, &pot, rho, &p)?.dot(&setup.test)?;
        Ok((terms[2].dot(&setup.test)? * x0, c * c))
    })?;
    let a: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let b: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(GraphOracleReport {
        simple_2_0: OracleComparison::new(simple, &a),
        crossing_1_1: OracleComparison::new(crossing, &b),
    })
}

/// Results of a completed run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub summary: Value,
    pub files: Vec<PathBuf>,
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

fn theory_block(setup: &Setup) -> Result<Value> {
    let d = setup.grid.dim();
    let m = setup.params.m;
    let mut scales = Vec::new();
    for &eps in &setup.config.ensemble.eps {
        if eps < 1.0 {
            scales.push(json!({
                "eps": eps,
                "alpha": alpha_scale(d, m, eps)?,
                "beta": beta_scale(d, m, eps)?,
            }));
        }
    }
    let mut block = json!({
        "d": d,
        "m": m,
        "alpha_exponent": alpha_exponent(d, m),
        "beta_exponent": beta_exponent(d, m),
        "scales": scales,
    });
    if let Some(c) = &setup.constants {
        block["rho"] = json!(c.rho);
        block["rho_f"] = json!(c.rho_f);
        block["t_max"] = json!(c.t_max);
        if let Ok(s) = crate::stats::sigma_squared(&setup.config.spectrum, d) {
            block["sigma2"] = json!(s);
        }
    }
    Ok(block)
}

/// Executes a validated configuration, writing artifacts into `out_dir`.
///
/// The directory must be absent or empty. `summary.json` and the CSV tables are
/// deterministic for a fixed configuration; wall-clock data goes to `timing.json`.
pub fn run(setup: &Setup, out_dir: &Path, workers: Option<usize>) -> Result<RunOutput> {
    if out_dir.exists() {
        let mut entries = fs::read_dir(out_dir)?;
        if entries.next().is_some() {
            return Err(cfg_err(format!(
                "output directory {} is not empty; runs never overwrite results",
                out_dir.display()
            )));
        }
    }
    fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| cfg_err(e.to_string()))?;
    let threads = pool.current_num_threads();
    let mut out = pool.install(|| execute(setup, out_dir))?;
    let config_path = out_dir.join("config.toml");
    fs::write(&config_path, setup.config.to_toml_string()?)?;
    out.files.push(config_path);
    let timing_path = out_dir.join("timing.json");
    write_json(
        &timing_path,
        &json!({
            "wall_seconds": started.elapsed().as_secs_f64(),
            "workers": threads,
        }),
    )?;
    out.files.push(timing_path);
    Ok(out)
}

fn execute(setup: &Setup, dir: &Path) -> Result<RunOutput> {
    let cfg = &setup.config;
    let mut files = Vec::new();
    let mut summary = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": cfg.kind,
        "config_hash": cfg.hash(),
        "theory": theory_block(setup)?,
    });
    match cfg.kind {
        ExperimentKind::Rho => {}
        ExperimentKind::Simulate => {
            let mut rows = Vec::new();
            for (ei, &eps) in cfg.ensemble.eps.iter().enumerate() {
                let xs = weighted_moments(setup, ei)?;
                if !cfg.output.snapshot_times.is_empty() {
                    let pot = setup.potential(ei, eps, 0)?;
                    let (_, snaps) = solve_random_with_snapshots(
                        &setup.u0,
                        &pot,
                        &setup.params_at(eps),
                        &cfg.output.snapshot_times,
                    )?;
                    for (si, snap) in snaps.iter().enumerate() {
                        files.push(write_snapshot(
                            &dir.join("snapshots"),
                            &format!("eps{ei}_t{si}"),
                            snap,
                        )?);
                    }
                }
                if xs.len() >= crate::stats::MIN_SAMPLES {
                    rows.push(StatsRow::new(eps, &ensemble_stats(&xs)?));
                } else {
                    let n = xs.len() as f64;
                    let mean = xs.iter().sum::<f64>() / n;
                    let var = if xs.len() > 1 {
                        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
                    } else {
                        0.0
                    };
                    rows.push(StatsRow {
                        eps,
                        n_samples: xs.len(),
                        mean,
                        var,
                        se: (var / n).sqrt(),
                        skew: f64::NAN,
                        kurt: f64::NAN,
                        ks_p: None,
                    });
                }
            }
            let path = dir.join("stats.csv");
            write_csv(&path, &rows)?;
            files.push(path);
            summary["results"] = json!({ "stats": rows });
        }
        ExperimentKind::Converge => {
            let report = converge_study(setup)?;
            let path = dir.join("converge.csv");
            write_csv(&path, &report.rows)?;
            files.push(path);
            summary["results"] = json!({
                "fitted_slope": report.fit.slope,
                "theory_slope": report.theory_slope,
                "intercept": report.fit.intercept,
                "r2": report.fit.r2,
                "rows": report.rows,
            });
        }
        ExperimentKind::Fluctuate => {
            let report = fluctuation_study(setup)?;
            let path = dir.join("stats.csv");
            write_csv(&path, &report.stats)?;
            files.push(path);
            let path = dir.join("fluctuation.csv");
            write_csv(&path, &report.rows)?;
            files.push(path);
            let s = cfg.stats;
            let gaussian: Vec<bool> = report
                .rows
                .iter()
                .map(|r| {
                    r.skew.abs() < s.max_abs_skew
                        && r.excess_kurtosis.abs() < s.max_abs_excess_kurtosis
                        && r.ks_p.is_some_and(|p| p > s.ks_threshold)
                })
                .collect();
            summary["results"] = json!({
                "limit_variance": report.limit_variance,
                "scaling_max_z": report.scaling_max_z,
                "normality_passed": gaussian,
                "rows": report.rows,
            });
        }
        ExperimentKind::Graphs => {
            let rows = census(cfg.graphs.nbar_max)?;
            let path = dir.join("census.csv");
            write_census_csv(&rows, fs::File::create(&path)?)?;
            files.push(path);
            let g = setup.grid;
            summary["results"] = if g.dim() == 1 && g.points() <= crate::graphs::MAX_MOMENT_POINTS {
                json!({ "census_rows": rows.len(), "oracle": to_value(&graph_oracle_check(setup)?) })
            } else {
                json!({ "census_rows": rows.len(), "oracle": null })
            };
        }
        ExperimentKind::Longrange => {
            let d = setup.grid.dim();
            let n_hat = cfg.spectrum.exponent();
            let rho = setup.rho()?;
            let mt = setup.script_m()?;
            let v = limit_variance_long(&cfg.spectrum, &mt)?;
            summary["theory"]["rho"] = json!(rho);
            summary["results"] = json!({
                "sigma_m_spectral": v.spectral,
                "sigma_m_kernel": v.kernel,
                "relative_gap": v.relative_gap(),
                "hurst": hurst(d, n_hat),
                "riesz_constant": riesz_constant(d, n_hat)?,
                "regularity_integral": regularity_integral(&setup.u0, n_hat)?,
            });
        }
    }
    let path = dir.join("summary.json");
    write_json(&path, &summary)?;
    files.push(path);
    Ok(RunOutput { summary, files })
}

#[cfg(test)]
mod tests {
    use super::*;

    const RHO_CONFIG: &str = r#"
kind = "rho"

[grid]
dim = 2
points = 16
length = 8.0

[spectrum]
kind = "gaussian"
amplitude = 0.05
width = 1.0

[evolution]
m = 1.0
t_final = 0.5
dt = 0.05

[ensemble]
eps = [0.1, 0.01]
realizations = 1
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = ExperimentConfig::from_toml_str(RHO_CONFIG).unwrap();
        let setup = cfg.validate().unwrap();
        assert!(setup.constants.unwrap().rho > 0.0);
        assert_eq!(cfg.hash(), cfg.clone().hash());
        assert_eq!(cfg.hash().len(), 64);
        let mut moved = cfg.clone();
        moved.output.dir = Some("elsewhere".into());
        assert_eq!(moved.hash(), cfg.hash());
        moved.ensemble.seed += 1;
        assert_ne!(moved.hash(), cfg.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = RHO_CONFIG.replace("dt = 0.05", "dt = 0.05\nstep_size = 3");
        assert!(matches!(
            ExperimentConfig::from_toml_str(&text),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn horizon_violation_names_the_condition() {
        let text = RHO_CONFIG.replace("t_final = 0.5", "t_final = 50.0");
        let err = ExperimentConfig::from_toml_str(&text)
            .unwrap()
            .validate()
            .unwrap_err();
        assert!(err.to_string().contains("4 rho_f T < 1"));
    }

    #[test]
    fn d_below_m_is_rejected() {
        let text = RHO_CONFIG.replace("m = 1.0", "m = 2.5");
        assert!(ExperimentConfig::from_toml_str(&text)
            .unwrap()
            .validate()
            .is_err());
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml_str(RHO_CONFIG).unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn ensemble_keeps_index_order() {
        let v = ensemble(50, |i| Ok(i * i)).unwrap();
        assert_eq!(v, (0..50).map(|i| i * i).collect::<Vec<_>>());
    }
}
