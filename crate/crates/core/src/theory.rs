//! Closed-form diversity of the MMSE relay transceiver: the fixed-rate
//! diversity-rate tradeoff and the diversity-multiplexing tradeoff.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Distance to an integer within which a ceiling argument is treated as exact.
const INTEGER_SNAP: f64 = 1e-12;

/// `ceil(x)`, except that values within `1e-12` of an integer map to that integer.
pub fn snap_ceil(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= INTEGER_SNAP {
        r.max(0.0) as usize
    } else {
        x.ceil().max(0.0) as usize
    }
}

/// `ceil((N_S 2^(-2R/N_S) + M - N_S)^+)`.
pub fn m_bar(n_s: usize, m_dim: usize, rate_bpcu: f64) -> usize {
    let ns = n_s as f64;
    let arg = ns * (-2.0 * rate_bpcu / ns).exp2() + m_dim as f64 - ns;
    snap_ceil(arg.max(0.0))
}

/// Fixed-rate diversity
/// `min( mb (N_R + N_S - 2M + mb), (N_R - M + mb) (N_D - M + mb)^+ )`,
/// and zero when `mb = 0` (the rate is never supported).
pub fn drt(n_s: usize, n_r: usize, n_d: usize, rate_bpcu: f64) -> usize {
    let m = n_s.min(n_r) as i64;
    let mb = m_bar(n_s, m as usize, rate_bpcu) as i64;
    if mb == 0 {
        return 0;
    }
    let (ns, nr, nd) = (n_s as i64, n_r as i64, n_d as i64);
    let first_hop = mb * (nr + ns - 2 * m + mb);
    let second_hop = (nr - m + mb) * (nd - m + mb).max(0);
    first_hop.min(second_hop).max(0) as usize
}

/// Diversity at multiplexing gain `r`: `(N_R - N_S + 1)(1 - 2r/N_S)^+` when
/// `N_S <= min(N_R, N_D)`, zero otherwise.
pub fn dmt(n_s: usize, n_r: usize, n_d: usize, r_mult: f64) -> f64 {
    if n_s <= n_r.min(n_d) {
        (n_r - n_s + 1) as f64 * (1.0 - 2.0 * r_mult / n_s as f64).max(0.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// `R >= (N_S/2) log2 N_S`: fixed-rate diversity collapses to the DMT at `r = 0`.
    HighRate,
    Intermediate,
    /// `R < (N_S/2) log2(N_S/(N_S-1))`: `m_bar = M`.
    FullDiversity,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::HighRate => "high-rate",
            Regime::Intermediate => "intermediate",
            Regime::FullDiversity => "full-diversity",
        })
    }
}

pub fn classify_regime(n_s: usize, rate_bpcu: f64) -> Regime {
    if n_s <= 1 {
        return Regime::FullDiversity;
    }
    let ns = n_s as f64;
    if rate_bpcu >= ns / 2.0 * ns.log2() {
        Regime::HighRate
    } else if rate_bpcu < ns / 2.0 * (ns / (ns - 1.0)).log2() {
        Regime::FullDiversity
    } else {
        Regime::Intermediate
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityPrediction {
    pub m_bar: usize,
    pub d_drt: usize,
    pub d_dmt: f64,
    pub full_diversity: bool,
    pub regime: Regime,
}

impl DiversityPrediction {
    pub fn new(n_s: usize, n_r: usize, n_d: usize, rate_bpcu: f64, r_mult: f64) -> Self {
        let d_drt = drt(n_s, n_r, n_d, rate_bpcu);
        Self {
            m_bar: m_bar(n_s, n_s.min(n_r), rate_bpcu),
            d_drt,
            d_dmt: dmt(n_s, n_r, n_d, r_mult),
            full_diversity: d_drt == n_r * n_s.min(n_d),
            regime: classify_regime(n_s, rate_bpcu),
        }
    }
}
