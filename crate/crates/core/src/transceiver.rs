//! Jointly MMSE-optimal relay matrix and destination receiver.
//!
//! The relay matrix factors as `Q = B L`: `L` is the first-hop Wiener filter
//! and `B = V_g~ diag(phi) U_y~^H` maps the `M` strongest modes of the relay
//! output covariance `R_y` onto the `M` strongest right singular directions
//! of `G`, with mode powers set by water-filling under the relay budget.
//!
//! The error covariance is available by two independent routes:
//! [`error_cov_decomposed`] (first-hop term plus second-hop term) and
//! [`error_cov_direct`] (plain MMSE algebra on `y_D = GQHx + GQn_R + n_D`).

use crate::channel::{ChannelRealization, SystemConfig};
use crate::error::{Error, Result};
use crate::numerics::{eig_hermitian_desc, inverse_hermitian_pd, solve_hermitian_psd, CMatrix};

/// Bisection stops once the allocated power is this close to the budget.
const POWER_RTOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;
/// `lambda_y[M-1] / lambda_y[0]` below this means `R_y` lost rank.
const RANK_FLOOR: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct TransceiverDesign {
    /// Relay Wiener receiver, `n_s x n_r`.
    pub l: CMatrix,
    /// Relay receiver output covariance, `n_s x n_s`.
    pub r_y: CMatrix,
    /// Leading `M` eigenvectors of `R_y`.
    pub u_y_tilde: CMatrix,
    pub lambda_y: Vec<f64>,
    /// Leading `M` eigenvectors of `G^H G`.
    pub v_g_tilde: CMatrix,
    /// Leading `M` eigenvalues of `G^H G`, exact zeros past `min(n_r, n_d)`.
    pub lambda_g: Vec<f64>,
    /// Mode amplitudes `|phi_k|`.
    pub phi: Vec<f64>,
    /// Water level; `f64::INFINITY` when no mode can carry power.
    pub nu: f64,
    /// Relay precoder `V_g~ diag(phi) U_y~^H`, `n_r x n_s`.
    pub b: CMatrix,
    /// Relay matrix `B L`, `n_r x n_r`.
    pub q: CMatrix,
    /// Destination MMSE receiver, `n_s x n_d`.
    pub w: CMatrix,
}

impl TransceiverDesign {
    pub fn m_dim(&self) -> usize {
        self.lambda_y.len()
    }
}

#[derive(Debug, Clone)]
pub struct ErrorCovariance {
    pub r_e: CMatrix,
    pub per_stream_mse: Vec<f64>,
    /// Per-stream SINR `rho / [R_e]_kk - 1`.
    pub gamma: Vec<f64>,
}

impl ErrorCovariance {
    pub fn from_matrix(r_e: CMatrix, rho: f64) -> Self {
        let r_e = r_e.hermitian_part();
        let per_stream_mse = r_e.diag_real();
        let gamma = per_stream_mse.iter().map(|&e| rho / e - 1.0).collect();
        Self {
            r_e,
            per_stream_mse,
            gamma,
        }
    }

    pub fn total_mse(&self) -> f64 {
        self.r_e.trace().re
    }
}

/// Water-filling result: amplitudes and the water level that meets the budget.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    pub phi: Vec<f64>,
    pub nu: f64,
}

/// `rho H^H (rho H H^H + I)^-1`.
pub fn relay_receiver(h: &CMatrix, rho: f64) -> Result<CMatrix> {
    let a = first_hop_covariance(h, rho);
    // A is Hermitian, so L^H = rho A^-1 H.
    Ok(solve_hermitian_psd(&a, &h.scale(rho))?.adjoint())
}

/// Covariance of the relay's received signal, `rho H H^H + I`.
pub fn first_hop_covariance(h: &CMatrix, rho: f64) -> CMatrix {
    (h * &h.adjoint()).scale(rho).add_identity(1.0).hermitian_part()
}

/// `R_y = L (rho H H^H + I) L^H`.
pub fn signal_covariance(h: &CMatrix, rho: f64) -> Result<CMatrix> {
    let l = relay_receiver(h, rho)?;
    Ok(signal_covariance_with(&l, h, rho))
}

fn signal_covariance_with(l: &CMatrix, h: &CMatrix, rho: f64) -> CMatrix {
    (&(l * &first_hop_covariance(h, rho)) * &l.adjoint()).hermitian_part()
}

/// `rho I - (H^H H + rho^-1 I)^-1`, algebraically equal to [`signal_covariance`].
pub fn signal_covariance_closed_form(h: &CMatrix, rho: f64) -> Result<CMatrix> {
    let n_s = h.cols();
    let inv = first_hop_error(h, rho)?;
    Ok(&CMatrix::identity(n_s).scale(rho) - &inv)
}

/// First-hop MMSE error covariance `(H^H H + rho^-1 I)^-1`.
pub fn first_hop_error(h: &CMatrix, rho: f64) -> Result<CMatrix> {
    let gram = (&h.adjoint() * h).add_identity(1.0 / rho).hermitian_part();
    inverse_hermitian_pd(&gram)
}

/// Mode powers `|phi_k|^2 = (sqrt(a_k / nu) - 1)^+ / a_k` with `a_k = lambda_y,k lambda_g,k`,
/// and the water level `nu` at which `sum_k lambda_y,k |phi_k|^2 = p_r`.
///
/// `nu` is located by bisection on `log nu`, then snapped to the closed form
/// of the active set found, when that closed form reproduces the same set.
pub fn waterfill_phi(lambda_y: &[f64], lambda_g: &[f64], p_r: f64) -> Result<WaterFill> {
    if lambda_y.len() != lambda_g.len() {
        return Err(Error::ShapeMismatch {
            op: "waterfill_phi",
            left: (lambda_y.len(), 1),
            right: (lambda_g.len(), 1),
        });
    }
    for &x in lambda_y {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::NegativeInput { what: "lambda_y", value: x });
        }
    }
    for &x in lambda_g {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::NegativeInput { what: "lambda_g", value: x });
        }
    }
    if !(p_r > 0.0) || !p_r.is_finite() {
        return Err(Error::InvalidConfig(format!("relay budget must be positive, got {p_r}")));
    }

    let gains: Vec<f64> = lambda_y.iter().zip(lambda_g).map(|(y, g)| y * g).collect();
    let top = gains.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return Ok(WaterFill {
            phi: vec![0.0; gains.len()],
            nu: f64::INFINITY,
        });
    }

    let power = |nu: f64| -> f64 {
        gains
            .iter()
            .zip(lambda_g)
            .filter(|(a, _)| **a > nu)
            .map(|(a, g)| ((a / nu).sqrt() - 1.0) / g)
            .sum()
    };

    // power(top) = 0; shrink until the budget is exceeded.
    let mut hi = top;
    let mut lo = top;
    while power(lo) < p_r {
        hi = lo;
        lo *= 0.25;
        if lo < f64::MIN_POSITIVE {
            return Err(Error::InvalidConfig(format!("relay budget {p_r} cannot be reached")));
        }
    }

    let mut nu = lo;
    for _ in 0..MAX_BISECTIONS {
        let mid = (lo * hi).sqrt();
        let p = power(mid);
        nu = mid;
        if (p - p_r).abs() <= POWER_RTOL * p_r {
            break;
        }
        if p > p_r {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Closed form on the active set: sqrt(1/nu) * sum sqrt(a)/g = p_r + sum 1/g.
    let (num, den) = gains
        .iter()
        .zip(lambda_g)
        .filter(|(a, _)| **a > nu)
        .fold((0.0, 0.0), |(n, d), (a, g)| (n + a.sqrt() / g, d + 1.0 / g));
    if num > 0.0 {
        let snapped = (num / (p_r + den)).powi(2);
        let same_set = gains.iter().all(|&a| (a > nu) == (a > snapped));
        if same_set && snapped.is_finite() && snapped > 0.0 {
            nu = snapped;
        }
    }

    let phi = gains
        .iter()
        .map(|&a| if a > nu { (((a / nu).sqrt() - 1.0) / a).sqrt() } else { 0.0 })
        .collect();
    Ok(WaterFill { phi, nu })
}

/// `V_g~ diag(phi) U_y~^H`.
pub fn precoder(v_g_tilde: &CMatrix, phi: &[f64], u_y_tilde: &CMatrix) -> CMatrix {
    &v_g_tilde.scale_columns(phi) * &u_y_tilde.adjoint()
}

/// Joint MMSE destination receiver for an arbitrary relay matrix `q`:
/// `rho T^H (rho T T^H + G Q Q^H G^H + I)^-1` with `T = G Q H`.
pub fn mmse_receiver(h: &CMatrix, g: &CMatrix, q: &CMatrix, rho: f64) -> Result<CMatrix> {
    let (t, k) = destination_statistics(h, g, q, rho)?;
    Ok(solve_hermitian_psd(&k, &t.scale(rho))?.adjoint())
}

/// Second-hop Wiener receiver for input `y`: `R_y B^H G^H (G B R_y B^H G^H + I)^-1`.
pub fn second_hop_receiver(g: &CMatrix, b: &CMatrix, r_y: &CMatrix) -> Result<CMatrix> {
    let gb = g.try_mul(b)?;
    let gbr = gb.try_mul(r_y)?;
    let k = (&gbr * &gb.adjoint()).add_identity(1.0).hermitian_part();
    Ok(solve_hermitian_psd(&k, &gbr)?.adjoint())
}

/// Returns `T = G Q H` and the destination covariance `rho T T^H + G Q Q^H G^H + I`.
fn destination_statistics(h: &CMatrix, g: &CMatrix, q: &CMatrix, rho: f64) -> Result<(CMatrix, CMatrix)> {
    let gq = g.try_mul(q)?;
    let t = gq.try_mul(h)?;
    let k = (&(&t * &t.adjoint()).scale(rho) + &(&gq * &gq.adjoint()))
        .add_identity(1.0)
        .hermitian_part();
    Ok((t, k))
}

/// Transmit power at the relay, `Tr(Q (rho H H^H + I) Q^H)`.
pub fn relay_power(h: &CMatrix, q: &CMatrix, rho: f64) -> f64 {
    (&(q * &first_hop_covariance(h, rho)) * &q.adjoint()).trace().re
}

/// Runs the full design pipeline for one channel draw.
pub fn build_design(config: &SystemConfig, chan: &ChannelRealization) -> Result<TransceiverDesign> {
    let m = config.m_dim();
    let rho = config.rho;
    let h = &chan.h;
    let g = &chan.g;

    let l = relay_receiver(h, rho)?;
    let r_y = signal_covariance_with(&l, h, rho);
    let eig_y = eig_hermitian_desc(&r_y)?;
    let u_y_tilde = eig_y.vectors.leading_columns(m);
    let lambda_y = eig_y.values[..m].to_vec();

    let eig_g = eig_hermitian_desc(&(&g.adjoint() * g).hermitian_part())?;
    let v_g_tilde = eig_g.vectors.leading_columns(m);
    let rank_g = config.n_r.min(config.n_d);
    let lambda_g: Vec<f64> = (0..m).map(|k| if k < rank_g { eig_g.values[k] } else { 0.0 }).collect();

    let WaterFill { phi, nu } = waterfill_phi(&lambda_y, &lambda_g, config.p_r)?;
    let b = precoder(&v_g_tilde, &phi, &u_y_tilde);
    let q = &b * &l;
    let w = mmse_receiver(h, g, &q, rho)?;

    Ok(TransceiverDesign {
        l,
        r_y,
        u_y_tilde,
        lambda_y,
        v_g_tilde,
        lambda_g,
        phi,
        nu,
        b,
        q,
        w,
    })
}

fn check_rank(lambda_y: &[f64]) -> Result<()> {
    let largest = lambda_y.first().copied().unwrap_or(0.0);
    let smallest = lambda_y.last().copied().unwrap_or(0.0);
    if !(largest > 0.0) || smallest <= RANK_FLOOR * largest {
        return Err(Error::RankDeficient { smallest, largest });
    }
    Ok(())
}

/// Error covariance as first-hop plus second-hop terms, for the designed precoder.
pub fn error_cov_decomposed(config: &SystemConfig, chan: &ChannelRealization, design: &TransceiverDesign) -> Result<ErrorCovariance> {
    error_cov_decomposed_for(&chan.h, &chan.g, config.rho, &design.b, &design.u_y_tilde, &design.lambda_y)
}

/// Two-term error covariance for any precoder `b`:
/// `(H^H H + rho^-1 I)^-1 + U~ (U~^H B^H G^H G B U~ + Lambda~^-1)^-1 U~^H`.
pub fn error_cov_decomposed_for(
    h: &CMatrix,
    g: &CMatrix,
    rho: f64,
    b: &CMatrix,
    u_y_tilde: &CMatrix,
    lambda_y: &[f64],
) -> Result<ErrorCovariance> {
    check_rank(lambda_y)?;
    let first = first_hop_error(h, rho)?;
    let gbu = g.try_mul(b)?.try_mul(u_y_tilde)?;
    let inv_lambda: Vec<f64> = lambda_y.iter().map(|x| 1.0 / x).collect();
    let inner = (&(&gbu.adjoint() * &gbu) + &CMatrix::from_diag(&inv_lambda)).hermitian_part();
    let second = &(u_y_tilde * &inverse_hermitian_pd(&inner)?) * &u_y_tilde.adjoint();
    Ok(ErrorCovariance::from_matrix(&first + &second, rho))
}

/// Same as [`error_cov_decomposed`] but with the second term in its diagonal
/// form `U~ (Phi Lambda_g~ Phi + Lambda_y~^-1)^-1 U~^H`, valid for the optimal precoder.
pub fn error_cov_optimal_form(config: &SystemConfig, chan: &ChannelRealization, design: &TransceiverDesign) -> Result<ErrorCovariance> {
    check_rank(&design.lambda_y)?;
    let first = first_hop_error(&chan.h, config.rho)?;
    let diag: Vec<f64> = design
        .phi
        .iter()
        .zip(&design.lambda_g)
        .zip(&design.lambda_y)
        .map(|((p, g), y)| 1.0 / (p * p * g + 1.0 / y))
        .collect();
    let second = &design.u_y_tilde.scale_columns(&diag) * &design.u_y_tilde.adjoint();
    Ok(ErrorCovariance::from_matrix(&first + &second, config.rho))
}

/// Direct MMSE error covariance for any relay matrix `q`:
/// `rho I - rho^2 T^H (rho T T^H + C)^-1 T`, `T = G Q H`, `C = G Q Q^H G^H + I`.
pub fn error_cov_direct(config: &SystemConfig, chan: &ChannelRealization, q: &CMatrix) -> Result<ErrorCovariance> {
    let rho = config.rho;
    let (t, k) = destination_statistics(&chan.h, &chan.g, q, rho)?;
    let kt = solve_hermitian_psd(&k, &t)?;
    let r_e = &CMatrix::identity(config.n_s).scale(rho) - &(&t.adjoint() * &kt).scale(rho * rho);
    Ok(ErrorCovariance::from_matrix(r_e, rho))
}
