//! Mutual information of the joint-encoding MMSE link, its trace lower bound,
//! and the outage indicators built on them. All rates are in bits per channel use.

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::Result;
use crate::numerics::gram_eigvals_desc;
use crate::theory::snap_ceil;
use crate::transceiver::{ErrorCovariance, TransceiverDesign};

/// SINRs this far below zero are round-off at the `R_e = rho I` boundary.
const GAMMA_CLIP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct MiReport {
    pub mi_exact: f64,
    pub mi_lower_bound: f64,
    /// Left-hand side of the outage-bound event.
    pub bound_statistic: f64,
    pub m_threshold: f64,
    pub outage_exact: bool,
    pub outage_bound: bool,
    pub outage_separate: bool,
}

fn clip_gamma(g: f64) -> f64 {
    if g < 0.0 && g >= -GAMMA_CLIP {
        0.0
    } else {
        g
    }
}

/// `(1/2) sum_k log(1 + gamma_k)`; the half accounts for the two relaying phases.
pub fn mutual_info_joint(gamma: &[f64], log_base_2: bool) -> f64 {
    let nats: f64 = gamma.iter().map(|&g| clip_gamma(g).ln_1p()).sum::<f64>() * 0.5;
    if log_base_2 {
        nats / std::f64::consts::LN_2
    } else {
        nats
    }
}

/// `rho / lambda_y,k` from the first-hop eigenvalue: `1 + 1 / (rho lambda_h,k)`.
pub fn rho_over_lambda_y(lambda_h: f64, rho: f64) -> f64 {
    1.0 + 1.0 / (rho * lambda_h)
}

/// Eigenvalue of `R_y` implied by an eigenvalue of `H^H H`: `rho^2 l / (rho l + 1)`.
pub fn lambda_y_from_lambda_h(lambda_h: f64, rho: f64) -> f64 {
    rho * rho * lambda_h / (rho * lambda_h + 1.0)
}

/// Trace lower bound on the mutual information with the unit-gain precoder
/// `Phi = I` substituted for the optimal one:
///
/// `-(N_S/2) log2( (1/N_S) [ sum_{k<N_S} 1/(rho l_h,k + 1) + sum_{k<M} 1/(rho l_g,k + rho/l_y,k) ] )`.
///
/// `lambda_h` is zero-padded to `n_s` entries; `lambda_g` and `lambda_y` carry `M` entries.
pub fn mi_lower_bound(lambda_h: &[f64], lambda_g: &[f64], lambda_y: &[f64], rho: f64, n_s: usize) -> f64 {
    let first: f64 = (0..n_s)
        .map(|k| 1.0 / (rho * lambda_h.get(k).copied().unwrap_or(0.0) + 1.0))
        .sum();
    let second: f64 = lambda_g
        .iter()
        .zip(lambda_y)
        .map(|(&g, &y)| 1.0 / (rho * g + rho / y))
        .sum();
    -(n_s as f64) / 2.0 * ((first + second) / n_s as f64).log2()
}

/// `-(N_S/2) log2(Tr(R_e) / (rho N_S))`, the Jensen step between exact MI and the bound.
pub fn mi_trace_bound(err: &ErrorCovariance, rho: f64) -> f64 {
    let n_s = err.per_stream_mse.len() as f64;
    -n_s / 2.0 * (err.total_mse() / (rho * n_s)).log2()
}

/// `m = N_S 2^(-2R/N_S) - (N_S - M)`.
pub fn m_threshold(n_s: usize, m_dim: usize, rate_bpcu: f64) -> f64 {
    let ns = n_s as f64;
    ns * (-2.0 * rate_bpcu / ns).exp2() - (ns - m_dim as f64)
}

/// `ceil(m^+)` for the threshold above, snapped at integers.
pub fn m_bar_from_threshold(m: f64) -> usize {
    snap_ceil(m.max(0.0))
}

/// Outage-bound statistic
/// `sum_k 1/(1 + rho l_h,k) + sum_k 1/(rho l_g,k + 1 + 1/(rho l_h,k))` over the top `M` modes,
/// with its threshold `m`. Outage under the bound is `statistic >= m`.
pub fn outage_bound_statistic(
    lambda_h: &[f64],
    lambda_g: &[f64],
    rho: f64,
    n_s: usize,
    m_dim: usize,
    rate_bpcu: f64,
) -> (f64, f64) {
    let stat: f64 = (0..m_dim)
        .map(|k| {
            let lh = lambda_h.get(k).copied().unwrap_or(0.0);
            let lg = lambda_g.get(k).copied().unwrap_or(0.0);
            1.0 / (1.0 + rho * lh) + 1.0 / (rho * lg + rho_over_lambda_y(lh, rho))
        })
        .sum();
    (stat, m_threshold(n_s, m_dim, rate_bpcu))
}

/// Separate-encoding baseline: each antenna carries rate `R / N_S` and the
/// codeword set fails if any single stream does.
pub fn outage_separate(gamma: &[f64], rate_bpcu: f64, n_s: usize) -> bool {
    let per_stream = rate_bpcu / n_s as f64;
    gamma
        .iter()
        .map(|&g| 0.5 * clip_gamma(g).ln_1p() / std::f64::consts::LN_2)
        .any(|mi| mi < per_stream)
}

/// Top-`M` eigenvalues of `H^H H` and of `G^H G` (the latter zeroed past
/// `min(n_r, n_d)`), the only channel statistics the outage bound needs.
pub fn channel_eigenvalues(config: &SystemConfig, chan: &ChannelRealization) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = config.m_dim();
    let mut lambda_h = gram_eigvals_desc(&chan.h);
    lambda_h.truncate(m);
    let rank = config.n_r.min(config.n_d);
    let vals = gram_eigvals_desc(&chan.g);
    let lambda_g = (0..m).map(|k| if k < rank { vals[k] } else { 0.0 }).collect();
    Ok((lambda_h, lambda_g))
}

/// Evaluates every outage indicator for one designed realization.
pub fn evaluate(
    config: &SystemConfig,
    chan: &ChannelRealization,
    design: &TransceiverDesign,
    err: &ErrorCovariance,
) -> Result<MiReport> {
    let (lambda_h, _) = channel_eigenvalues(config, chan)?;
    let mi_exact = mutual_info_joint(&err.gamma, true);
    let mi_lb = mi_lower_bound(&lambda_h, &design.lambda_g, &design.lambda_y, config.rho, config.n_s);
    let (stat, m) = outage_bound_statistic(&lambda_h, &design.lambda_g, config.rho, config.n_s, config.m_dim(), config.rate_bpcu);
    Ok(MiReport {
        mi_exact,
        mi_lower_bound: mi_lb,
        bound_statistic: stat,
        m_threshold: m,
        outage_exact: mi_exact <= config.rate_bpcu,
        outage_bound: stat >= m,
        outage_separate: outage_separate(&err.gamma, config.rate_bpcu, config.n_s),
    })
}
