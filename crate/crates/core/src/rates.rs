//! Instantaneous rates of the common and confidential streams and their
//! ergodic averages. All rates are in bits/s/Hz.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{in_secure_set, FadingGrid, FadingSample};
use crate::numeric::pairwise_sum;

/// Per-state SNR split between the common (`mu0`) and confidential (`mu1`)
/// messages.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerPair {
    pub mu0: f64,
    pub mu1: f64,
}

impl PowerPair {
    pub const ZERO: PowerPair = PowerPair { mu0: 0.0, mu1: 0.0 };

    pub fn new(mu0: f64, mu1: f64) -> Self {
        PowerPair { mu0, mu1 }
    }

    fn check(&self) -> Result<()> {
        if self.mu0 >= 0.0 && self.mu1 >= 0.0 && self.mu0.is_finite() && self.mu1.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("powers must be finite and >= 0, got ({}, {})", self.mu0, self.mu1)))
        }
    }
}

/// Power allocation aligned index-by-index with a [`FadingGrid`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PowerPolicy {
    pub pairs: Vec<PowerPair>,
}

impl PowerPolicy {
    pub fn zeros(n: usize) -> Self {
        PowerPolicy {
            pairs: vec![PowerPair::ZERO; n],
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Average consumed SNR, `E{mu0 + mu1}`.
    pub fn average_power(&self, grid: &FadingGrid) -> f64 {
        let terms: Vec<f64> = grid
            .samples()
            .iter()
            .zip(&self.pairs)
            .map(|(s, p)| s.weight * (p.mu0 + p.mu1))
            .collect();
        pairwise_sum(&terms)
    }

    /// Checks alignment, sign, the `mu1 = 0` rule outside the secure set and
    /// the average power budget (with 1e-9 slack).
    pub fn validate(&self, grid: &FadingGrid, gamma: f64, snr: f64) -> Result<()> {
        check_aligned(grid, self)?;
        for (i, (s, p)) in grid.samples().iter().zip(&self.pairs).enumerate() {
            p.check().map_err(|e| Error::invalid(format!("state {i}: {e}")))?;
            if !in_secure_set(s, gamma) && p.mu1 != 0.0 {
                return Err(Error::invalid(format!(
                    "state {i} lies outside the secure set but carries mu1 = {}",
                    p.mu1
                )));
            }
        }
        let used = self.average_power(grid);
        if used > snr + 1e-9 {
            return Err(Error::invalid(format!("average power {used} exceeds budget {snr}")));
        }
        Ok(())
    }
}

pub(crate) fn check_aligned(grid: &FadingGrid, policy: &PowerPolicy) -> Result<()> {
    if grid.len() != policy.len() {
        return Err(Error::invalid(format!(
            "policy has {} entries but the grid has {} states",
            policy.len(),
            grid.len()
        )));
    }
    Ok(())
}

// Natural-log forms ln(1 + sinr) used by the effective-throughput functionals.

pub(crate) fn ln_common_main(s: &FadingSample, p: PowerPair, gamma: f64) -> f64 {
    if in_secure_set(s, gamma) {
        (p.mu0 * s.z_m / (1.0 + p.mu1 * s.z_m)).ln_1p()
    } else {
        (p.mu0 * s.z_m).ln_1p()
    }
}

pub(crate) fn ln_common_eve(s: &FadingSample, p: PowerPair, gamma: f64) -> f64 {
    let g = gamma * s.z_e;
    if in_secure_set(s, gamma) {
        (p.mu0 * g / (1.0 + p.mu1 * g)).ln_1p()
    } else {
        (p.mu0 * g).ln_1p()
    }
}

pub(crate) fn ln_confidential(s: &FadingSample, p: PowerPair, gamma: f64) -> f64 {
    if in_secure_set(s, gamma) {
        let g = gamma * s.z_e;
        (p.mu1 * (s.z_m - g) / (1.0 + p.mu1 * g)).ln_1p()
    } else {
        0.0
    }
}

/// Which common-rate expression an optimization case works with: the main
/// receiver's (`I`), the second receiver's (`II`), or the `delta`-weighted
/// combination of both (`III`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseSpec {
    I,
    II,
    III(f64),
}

impl CaseSpec {
    /// Weights on the main and second-receiver common terms.
    pub fn mix(&self) -> (f64, f64) {
        match *self {
            CaseSpec::I => (1.0, 0.0),
            CaseSpec::II => (0.0, 1.0),
            CaseSpec::III(delta) => (delta, 1.0 - delta),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CaseSpec::III(delta) if !(0.0..=1.0).contains(&delta) => {
                Err(Error::invalid(format!("delta must lie in [0, 1], got {delta}")))
            }
            _ => Ok(()),
        }
    }
}

/// Confidential rate `log2((1 + mu1 z_M) / (1 + gamma mu1 z_E))` on the secure
/// set, zero elsewhere.
pub fn rate_r1(s: &FadingSample, p: PowerPair, gamma: f64) -> Result<f64> {
    p.check()?;
    Ok(ln_confidential(s, p, gamma) / LN_2)
}

/// Common-message rate decodable at the main receiver.
pub fn rate_r01(s: &FadingSample, p: PowerPair, gamma: f64) -> Result<f64> {
    p.check()?;
    Ok(ln_common_main(s, p, gamma) / LN_2)
}

/// Common-message rate decodable at the second receiver.
pub fn rate_r02(s: &FadingSample, p: PowerPair, gamma: f64) -> Result<f64> {
    p.check()?;
    Ok(ln_common_eve(s, p, gamma) / LN_2)
}

/// Ergodic averages of the two common-rate terms and the confidential rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErgodicRates {
    pub r01: f64,
    pub r02: f64,
    pub r1: f64,
}

pub fn ergodic_rates(grid: &FadingGrid, policy: &PowerPolicy, gamma: f64) -> Result<ErgodicRates> {
    check_aligned(grid, policy)?;
    let n = grid.len();
    let (mut a, mut b, mut c) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for (s, &p) in grid.samples().iter().zip(&policy.pairs) {
        p.check()?;
        a.push(s.weight * ln_common_main(s, p, gamma));
        b.push(s.weight * ln_common_eve(s, p, gamma));
        c.push(s.weight * ln_confidential(s, p, gamma));
    }
    Ok(ErgodicRates {
        r01: pairwise_sum(&a) / LN_2,
        r02: pairwise_sum(&b) / LN_2,
        r1: pairwise_sum(&c) / LN_2,
    })
}

/// Per-state rate profiles `(R01, R02, R1)` of a policy.
pub fn rate_profiles(grid: &FadingGrid, policy: &PowerPolicy, gamma: f64) -> Result<[Vec<f64>; 3]> {
    check_aligned(grid, policy)?;
    let mut out = [Vec::new(), Vec::new(), Vec::new()];
    for (s, &p) in grid.samples().iter().zip(&policy.pairs) {
        out[0].push(rate_r01(s, p, gamma)?);
        out[1].push(rate_r02(s, p, gamma)?);
        out[2].push(rate_r1(s, p, gamma)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(z_m: f64, z_e: f64) -> FadingSample {
        FadingSample::new(z_m, z_e, 1.0)
    }

    #[test]
    fn confidential_rate_examples() {
        let r = rate_r1(&st(1.0, 0.5), PowerPair::new(0.0, 1.0), 1.0).unwrap();
        assert!((r - (2.0f64 / 1.5).log2()).abs() < 1e-15);
        assert!((r - 0.4150).abs() < 1e-4);
        assert_eq!(rate_r1(&st(1.0, 2.0), PowerPair::ZERO, 1.0).unwrap(), 0.0);
        let r = rate_r1(&st(4.0, 0.0), PowerPair::new(0.0, 0.25), 1.0).unwrap();
        assert!((r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn common_rate_main_examples() {
        let r = rate_r01(&st(3.0, 5.0), PowerPair::new(1.0, 0.0), 1.0).unwrap();
        assert!((r - 2.0).abs() < 1e-15);
        let r = rate_r01(&st(4.0, 0.0), PowerPair::new(0.2331, 0.1469), 1.0).unwrap();
        assert!((r - (1.0f64 + 0.2331 * 4.0 / (1.0 + 0.1469 * 4.0)).log2()).abs() < 1e-15);
        assert!((r - 0.6667).abs() < 1e-3);
        assert_eq!(rate_r01(&st(4.0, 1.0), PowerPair::new(0.0, 1.0), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn common_rate_eve_examples() {
        let r = rate_r02(&st(1.0, 1.0), PowerPair::new(1.5, 0.0), 2.0).unwrap();
        assert!((r - 2.0).abs() < 1e-15);
        assert_eq!(rate_r02(&st(3.0, 1.0), PowerPair::new(0.0, 2.0), 1.0).unwrap(), 0.0);
        let r = rate_r02(&st(3.0, 1.0), PowerPair::new(1.0, 1.0), 1.0).unwrap();
        assert!((r - 1.5f64.log2()).abs() < 1e-15);
    }

    #[test]
    fn negative_power_is_rejected() {
        assert!(rate_r1(&st(1.0, 0.0), PowerPair::new(0.0, -1.0), 1.0).is_err());
        assert!(rate_r01(&st(1.0, 0.0), PowerPair::new(-0.1, 0.0), 1.0).is_err());
    }

    #[test]
    fn ergodic_rates_examples() {
        let g = FadingGrid::explicit(vec![
            FadingSample::new(4.0, 0.0, 0.5),
            FadingSample::new(1.0, 2.0, 0.5),
        ])
        .unwrap();
        let zero = ergodic_rates(&g, &PowerPolicy::zeros(2), 1.0).unwrap();
        assert_eq!((zero.r01, zero.r02, zero.r1), (0.0, 0.0, 0.0));

        let policy = PowerPolicy {
            pairs: vec![PowerPair::new(0.0, 0.25), PowerPair::ZERO],
        };
        let e = ergodic_rates(&g, &policy, 1.0).unwrap();
        assert!((e.r1 - 0.5).abs() < 1e-15);

        let one = FadingGrid::explicit(vec![FadingSample::new(4.0, 1.0, 1.0)]).unwrap();
        let p = PowerPolicy {
            pairs: vec![PowerPair::new(0.3, 0.2)],
        };
        let e = ergodic_rates(&one, &p, 1.0).unwrap();
        let s = one.samples()[0];
        assert_eq!(e.r01, rate_r01(&s, p.pairs[0], 1.0).unwrap());
        assert_eq!(e.r02, rate_r02(&s, p.pairs[0], 1.0).unwrap());
        assert_eq!(e.r1, rate_r1(&s, p.pairs[0], 1.0).unwrap());

        assert!(ergodic_rates(&g, &PowerPolicy::zeros(3), 1.0).is_err());
    }

    #[test]
    fn policy_validation() {
        let g = FadingGrid::explicit(vec![
            FadingSample::new(4.0, 0.0, 0.5),
            FadingSample::new(1.0, 2.0, 0.5),
        ])
        .unwrap();
        let ok = PowerPolicy {
            pairs: vec![PowerPair::new(0.5, 0.5), PowerPair::new(1.0, 0.0)],
        };
        assert!(ok.validate(&g, 1.0, 1.0).is_ok());
        let leak = PowerPolicy {
            pairs: vec![PowerPair::new(0.5, 0.5), PowerPair::new(0.5, 0.1)],
        };
        assert!(leak.validate(&g, 1.0, 1.0).is_err());
        assert!(ok.validate(&g, 1.0, 0.9).is_err());
    }
}
