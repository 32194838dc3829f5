//! Seeded Monte Carlo estimation of outage probability over an SNR grid,
//! Wilson intervals, and log-log diversity slope fits.
//!
//! Trial `t` of grid point `i` always draws its channel from stream
//! `(i << 40) | t` under the sweep's master seed, so counts are independent of
//! the worker count and adding grid points never perturbs existing ones.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{db_to_linear, sample_realization, SystemConfig};
use crate::error::{Error, Result};
use crate::metrics::{channel_eigenvalues, mutual_info_joint, outage_bound_statistic, outage_separate};
use crate::numerics::SeedSpec;
use crate::theory;
use crate::transceiver::{build_design, error_cov_direct};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;
pub const DEFAULT_MIN_COUNT: u64 = 20;
pub const DEFAULT_ADAPTIVE_TARGET: u64 = 200;
pub const MIN_TRIALS: u64 = 100;

pub const TRIAL_BITS: u32 = 40;
const FIRST_BATCH: u64 = 1_000;
const MAX_BATCH: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutageMode {
    /// Exact joint-encoding MI of the designed transceiver.
    Exact,
    /// Eigenvalue-only upper-bound event; no transceiver is built.
    #[default]
    Bound,
    /// Per-stream encoding baseline on the designed transceiver.
    Separate,
}

impl std::str::FromStr for OutageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(OutageMode::Exact),
            "bound" => Ok(OutageMode::Bound),
            "separate" => Ok(OutageMode::Separate),
            other => Err(Error::InvalidConfig(format!("unknown outage mode `{other}`"))),
        }
    }
}

impl std::fmt::Display for OutageMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OutageMode::Exact => "exact",
            OutageMode::Bound => "bound",
            OutageMode::Separate => "separate",
        })
    }
}

/// Antennas and rate of a sweep; the SNR is supplied per grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemTemplate {
    pub n_s: usize,
    pub n_r: usize,
    pub n_d: usize,
    pub rate_bpcu: f64,
    /// Fixed relay budget; when absent the budget tracks `rho * N_S`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_r: Option<f64>,
}

impl SystemTemplate {
    pub fn at_snr_db(&self, snr_db: f64) -> Result<SystemConfig> {
        let cfg = SystemConfig::new(self.n_s, self.n_r, self.n_d, db_to_linear(snr_db), self.rate_bpcu)?;
        match self.p_r {
            Some(p) => cfg.with_relay_power(p),
            None => Ok(cfg),
        }
    }

    pub fn d_theory(&self) -> usize {
        theory::drt(self.n_s, self.n_r, self.n_d, self.rate_bpcu)
    }
}

/// Stop a point once this many outages are seen; `trials_per_point` becomes the cap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveStop {
    #[serde(default = "default_target")]
    pub target_outages: u64,
}

fn default_target() -> u64 {
    DEFAULT_ADAPTIVE_TARGET
}

impl Default for AdaptiveStop {
    fn default() -> Self {
        Self {
            target_outages: DEFAULT_ADAPTIVE_TARGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub config: SystemTemplate,
    pub snr_grid_db: Vec<f64>,
    pub trials_per_point: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adaptive: Option<AdaptiveStop>,
    #[serde(default)]
    pub outage_mode: OutageMode,
    pub master_seed: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.snr_grid_db.is_empty() {
            return Err(Error::InvalidConfig("snr_grid_db is empty".into()));
        }
        if self.snr_grid_db.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidConfig("snr_grid_db has non-finite entries".into()));
        }
        if self.snr_grid_db.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("snr_grid_db must be strictly ascending".into()));
        }
        if self.trials_per_point < MIN_TRIALS {
            return Err(Error::InvalidConfig(format!(
                "trials_per_point must be at least {MIN_TRIALS}, got {}",
                self.trials_per_point
            )));
        }
        if self.trials_per_point >= 1 << TRIAL_BITS {
            return Err(Error::InvalidConfig(format!("trials_per_point must be below 2^{TRIAL_BITS}")));
        }
        if self.snr_grid_db.len() >= 1 << (64 - TRIAL_BITS) {
            return Err(Error::InvalidConfig("snr grid too long".into()));
        }
        if let Some(a) = self.adaptive {
            if a.target_outages == 0 {
                return Err(Error::InvalidConfig("adaptive target_outages must be positive".into()));
            }
        }
        for &db in &self.snr_grid_db {
            self.config.at_snr_db(db)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub snr_db: f64,
    pub p_out: f64,
    pub trials: u64,
    pub outages: u64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl CurvePoint {
    pub fn new(snr_db: f64, outages: u64, trials: u64) -> Self {
        let (ci_low, ci_high) = wilson_interval(outages, trials, Z_95);
        Self {
            snr_db,
            p_out: if trials > 0 { outages as f64 / trials as f64 } else { 0.0 },
            trials,
            outages,
            ci_low,
            ci_high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageCurve {
    pub points: Vec<CurvePoint>,
    pub mode: OutageMode,
    pub config_echo: SystemTemplate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointCount {
    pub outages: u64,
    pub trials: u64,
}

pub fn trial_stream(point_index: usize, trial: u64) -> u64 {
    debug_assert!(trial < 1 << TRIAL_BITS);
    ((point_index as u64) << TRIAL_BITS) | trial
}

/// One quasi-static draw: `true` when the link is in outage under `mode`.
pub fn trial_outage(config: &SystemConfig, mode: OutageMode, seed: SeedSpec) -> Result<bool> {
    let chan = sample_realization(config, seed);
    match mode {
        OutageMode::Bound => {
            let (lambda_h, lambda_g) = channel_eigenvalues(config, &chan)?;
            let (stat, m) = outage_bound_statistic(&lambda_h, &lambda_g, config.rho, config.n_s, config.m_dim(), config.rate_bpcu);
            Ok(stat >= m)
        }
        OutageMode::Exact | OutageMode::Separate => {
            let design = build_design(config, &chan)?;
            let err = error_cov_direct(config, &chan, &design.q)?;
            Ok(match mode {
                OutageMode::Exact => mutual_info_joint(&err.gamma, true) <= config.rate_bpcu,
                _ => outage_separate(&err.gamma, config.rate_bpcu, config.n_s),
            })
        }
    }
}

fn count_range(config: &SystemConfig, point_index: usize, range: std::ops::Range<u64>, mode: OutageMode, master_seed: u64) -> Result<u64> {
    range
        .into_par_iter()
        .map(|t| {
            let seed = SeedSpec::new(master_seed, trial_stream(point_index, t));
            trial_outage(config, mode, seed).map(u64::from).map_err(|e| Error::Trial {
                point: point_index,
                trial: t,
                source: Box::new(e),
            })
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))
}

/// Runs `trials` draws at one grid point on the current rayon pool.
pub fn run_point(config: &SystemConfig, point_index: usize, trials: u64, mode: OutageMode, master_seed: u64) -> Result<PointCount> {
    let outages = count_range(config, point_index, 0..trials, mode, master_seed)?;
    Ok(PointCount { outages, trials })
}

/// Runs geometrically growing batches until `target` outages or `cap` trials.
/// Batch boundaries are fixed, so the stopping point is reproducible.
pub fn run_point_adaptive(
    config: &SystemConfig,
    point_index: usize,
    cap: u64,
    target: u64,
    mode: OutageMode,
    master_seed: u64,
) -> Result<PointCount> {
    let mut done = 0;
    let mut outages = 0;
    let mut batch = FIRST_BATCH;
    while done < cap && outages < target {
        let end = (done + batch).min(cap);
        outages += count_range(config, point_index, done..end, mode, master_seed)?;
        done = end;
        batch = (batch * 2).min(MAX_BATCH);
    }
    Ok(PointCount { outages, trials: done })
}

/// Runs every grid point on the current rayon pool.
pub fn run_sweep(spec: &SweepSpec) -> Result<OutageCurve> {
    spec.validate()?;
    let mut points = Vec::with_capacity(spec.snr_grid_db.len());
    for (i, &db) in spec.snr_grid_db.iter().enumerate() {
        let cfg = spec.config.at_snr_db(db)?;
        let count = match spec.adaptive {
            Some(a) => run_point_adaptive(&cfg, i, spec.trials_per_point, a.target_outages, spec.outage_mode, spec.master_seed)?,
            None => run_point(&cfg, i, spec.trials_per_point, spec.outage_mode, spec.master_seed)?,
        };
        points.push(CurvePoint::new(db, count.outages, count.trials));
    }
    Ok(OutageCurve {
        points,
        mode: spec.outage_mode,
        config_echo: spec.config,
    })
}

/// [`run_sweep`] on a dedicated pool of `threads` workers.
pub fn run_sweep_with_threads(spec: &SweepSpec, threads: usize) -> Result<OutageCurve> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {threads} workers: {e}")))?;
    pool.install(|| run_sweep(spec))
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = ((center - half) / denom).clamp(0.0, 1.0).min(p);
    let hi = ((center + half) / denom).clamp(0.0, 1.0).max(p);
    (lo, hi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    /// Negated log-log slope.
    pub d_hat: f64,
    pub intercept: f64,
    /// SNR points (dB) used in the fit.
    pub window: Vec<f64>,
    /// Sum of squared residuals in `log10 p_out`.
    pub residual: f64,
    pub d_theory: usize,
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, sum of squared residuals)`.
pub fn least_squares_line(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = points.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    (slope, intercept, ssr)
}

/// Fits `log10 p_out` against `log10 rho` over the highest-SNR run of
/// consecutive points that each saw at least `min_count` outages.
pub fn fit_slope(curve: &OutageCurve, min_count: u64) -> Result<SlopeFit> {
    const REQUIRED: usize = 3;
    let min_count = min_count.max(1);
    let counts: Vec<u64> = curve.points.iter().map(|p| p.outages).collect();
    let infeasible = |usable| Error::FitInfeasible {
        usable,
        required: REQUIRED,
        counts: counts.clone(),
    };

    let Some(last) = curve.points.iter().rposition(|p| p.outages >= min_count && p.trials > 0) else {
        return Err(infeasible(0));
    };
    let mut first = last;
    while first > 0 && curve.points[first - 1].outages >= min_count && curve.points[first - 1].trials > 0 {
        first -= 1;
    }
    let window = &curve.points[first..=last];
    if window.len() < REQUIRED {
        return Err(infeasible(window.len()));
    }

    let xy: Vec<(f64, f64)> = window.iter().map(|p| (p.snr_db / 10.0, p.p_out.log10())).collect();
    let (slope, intercept, residual) = least_squares_line(&xy);
    Ok(SlopeFit {
        d_hat: -slope,
        intercept,
        window: window.iter().map(|p| p.snr_db).collect(),
        residual,
        d_theory: curve.config_echo.d_theory(),
    })
}
