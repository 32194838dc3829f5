//! System configuration and i.i.d. Rayleigh draws for the two-hop link.
//!
//! Noise at relay and destination is fixed to CN(0, I); every closed form in
//! [`crate::transceiver`] relies on that normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sample_complex_gaussian, CMatrix, SeedSpec};

/// Static parameters of one experiment point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_s: usize,
    pub n_r: usize,
    pub n_d: usize,
    /// Per-antenna source SNR (linear), `P_S / N_S`.
    pub rho: f64,
    /// Relay power budget (linear).
    pub p_r: f64,
    /// Target rate in bits per channel use.
    pub rate_bpcu: f64,
}

impl SystemConfig {
    /// Config with the relay budget tied to the source power, see [`default_power_coupling`].
    pub fn new(n_s: usize, n_r: usize, n_d: usize, rho: f64, rate_bpcu: f64) -> Result<Self> {
        Self {
            n_s,
            n_r,
            n_d,
            rho,
            p_r: default_power_coupling(n_s, rho),
            rate_bpcu,
        }
        .validated()
    }

    pub fn from_snr_db(n_s: usize, n_r: usize, n_d: usize, snr_db: f64, rate_bpcu: f64) -> Result<Self> {
        Self::new(n_s, n_r, n_d, db_to_linear(snr_db), rate_bpcu)
    }

    pub fn with_relay_power(mut self, p_r: f64) -> Result<Self> {
        self.p_r = p_r;
        self.validated()
    }

    pub fn validated(self) -> Result<Self> {
        if self.n_s == 0 || self.n_r == 0 || self.n_d == 0 {
            return Err(Error::InvalidConfig(format!(
                "antenna counts must be positive, got {}x{}x{}",
                self.n_s, self.n_r, self.n_d
            )));
        }
        if !(self.rho > 0.0) || !self.rho.is_finite() {
            return Err(Error::InvalidConfig(format!("rho must be positive and finite, got {}", self.rho)));
        }
        if !(self.p_r > 0.0) || !self.p_r.is_finite() {
            return Err(Error::InvalidConfig(format!("p_r must be positive and finite, got {}", self.p_r)));
        }
        if !(self.rate_bpcu >= 0.0) || !self.rate_bpcu.is_finite() {
            return Err(Error::InvalidConfig(format!("rate must be nonnegative, got {}", self.rate_bpcu)));
        }
        Ok(self)
    }

    /// `M = min(N_S, N_R)`, the rank of the relay receiver output covariance.
    pub fn m_dim(&self) -> usize {
        self.n_s.min(self.n_r)
    }

    pub fn source_power(&self) -> f64 {
        self.rho * self.n_s as f64
    }
}

/// Relay budget `P_R = rho * N_t`.
///
/// `N_t` is read as the source antenna count `N_S`, which makes the relay
/// budget equal to the total source power `P_S`.
pub fn default_power_coupling(n_s: usize, rho: f64) -> f64 {
    rho * n_s as f64
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One quasi-static draw of both hops.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Source to relay, `n_r x n_s`.
    pub h: CMatrix,
    /// Relay to destination, `n_d x n_r`.
    pub g: CMatrix,
}

impl ChannelRealization {
    pub fn new(config: &SystemConfig, h: CMatrix, g: CMatrix) -> Result<Self> {
        if h.shape() != (config.n_r, config.n_s) {
            return Err(Error::ShapeMismatch {
                op: "channel h",
                left: (config.n_r, config.n_s),
                right: h.shape(),
            });
        }
        if g.shape() != (config.n_d, config.n_r) {
            return Err(Error::ShapeMismatch {
                op: "channel g",
                left: (config.n_d, config.n_r),
                right: g.shape(),
            });
        }
        Ok(Self { h, g })
    }
}

const FIRST_HOP: u64 = 1;
const SECOND_HOP: u64 = 2;

/// Draws `H` and `G` from two independent keyed streams of `seed`, so the
/// first hop does not depend on the destination antenna count.
pub fn sample_realization(config: &SystemConfig, seed: SeedSpec) -> ChannelRealization {
    ChannelRealization {
        h: sample_complex_gaussian(config.n_r, config.n_s, seed.subkey(FIRST_HOP)),
        g: sample_complex_gaussian(config.n_d, config.n_r, seed.subkey(SECOND_HOP)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn power_coupling() {
        assert_eq!(default_power_coupling(2, 10.0), 20.0);
        assert_eq!(default_power_coupling(1, 1.0), 1.0);
        assert_eq!(default_power_coupling(4, 100.0), 400.0);
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::new(0, 2, 2, 1.0, 1.0).is_err());
        assert!(SystemConfig::new(2, 2, 2, 0.0, 1.0).is_err());
        assert!(SystemConfig::new(2, 2, 2, 1.0, -0.1).is_err());
        let c = SystemConfig::new(3, 2, 4, 10.0, 0.0).unwrap();
        assert_eq!(c.m_dim(), 2);
        assert_eq!(c.p_r, 30.0);
        assert!(c.with_relay_power(-1.0).is_err());
        assert!((SystemConfig::from_snr_db(2, 2, 2, 20.0, 1.0).unwrap().rho - 100.0).abs() < 1e-12);
    }

    #[test]
    fn shapes() {
        let c = SystemConfig::new(2, 2, 2, 10.0, 1.0).unwrap();
        let r = sample_realization(&c, SeedSpec::new(1, 0));
        assert_eq!(r.h.shape(), (2, 2));
        assert_eq!(r.g.shape(), (2, 2));
        let c = SystemConfig::new(2, 2, 1, 10.0, 1.0).unwrap();
        let r = sample_realization(&c, SeedSpec::new(1, 0));
        assert_eq!(r.g.shape(), (1, 2));
    }

    #[test]
    fn realization_is_pure_and_hops_are_decoupled() {
        let a = SystemConfig::new(2, 3, 1, 10.0, 1.0).unwrap();
        let b = SystemConfig::new(2, 3, 4, 10.0, 1.0).unwrap();
        let s = SeedSpec::new(77, 12);
        assert_eq!(sample_realization(&a, s), sample_realization(&a, s));
        assert_eq!(sample_realization(&a, s).h, sample_realization(&b, s).h);
    }

    #[test]
    fn first_hop_energy_and_hop_independence() {
        let c = SystemConfig::new(2, 2, 2, 1.0, 1.0).unwrap();
        let n = 100_000u64;
        let mut energy = 0.0;
        let mut cross = Complex64::new(0.0, 0.0);
        for t in 0..n {
            let r = sample_realization(&c, SeedSpec::new(4242, t));
            energy += r.h.frobenius_norm().powi(2);
            cross += r.h[(0, 0)] * r.g[(0, 0)].conj();
        }
        let energy = energy / n as f64;
        let cross = cross / n as f64;
        assert!((energy - 4.0).abs() <= 0.05, "E||H||^2 = {energy}");
        assert!(cross.norm() <= 0.01, "hop correlation {cross}");
    }

    #[test]
    fn explicit_realization_checks_shapes() {
        let c = SystemConfig::new(2, 2, 1, 1.0, 1.0).unwrap();
        assert!(ChannelRealization::new(&c, CMatrix::zeros(2, 2), CMatrix::zeros(2, 2)).is_err());
        assert!(ChannelRealization::new(&c, CMatrix::zeros(2, 2), CMatrix::zeros(1, 2)).is_ok());
    }
}
