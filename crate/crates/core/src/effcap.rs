//! Effective throughput of a rate profile under a QoS exponent, and the
//! normalization functionals that couple the per-state power solutions.
//!
//! For i.i.d. block fading the effective throughput in bits/s/Hz is
//! `C = -(1 / (beta ln 2)) ln E{(1 + sinr)^(-beta)}`, i.e.
//! `-(1/beta) log2 E{2^(-beta r)}` for the rate `r = log2(1 + sinr)`.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{FadingGrid, QosConfig};
use crate::numeric::{log_sum_exp, pairwise_sum};
use crate::rates::{check_aligned, ln_common_eve, ln_common_main, ln_confidential, CaseSpec, PowerPolicy};

/// Pair of effective throughputs (common, confidential) in bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThroughputPair {
    pub c0: f64,
    pub c1: f64,
}

/// The normalization values `E{(1 + sinr)^(-beta)}` of the common and
/// confidential streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiPair {
    pub phi0: f64,
    pub phi1: f64,
}

impl PhiPair {
    pub const ONE: PhiPair = PhiPair { phi0: 1.0, phi1: 1.0 };
}

/// `ln E{exp(-beta L)}` for per-state natural-log factors `L >= 0`.
///
/// Small exponents go through `expm1`/`ln_1p` so that the result keeps full
/// relative precision as `beta -> 0`; large ones use a log-sum-exp so the
/// expectation never underflows.
pub(crate) fn log_mgf(weights: &[f64], logs: &[f64], beta: f64) -> f64 {
    let terms: Vec<f64> = weights
        .iter()
        .zip(logs)
        .map(|(&w, &l)| w * (-beta * l).exp_m1())
        .collect();
    let m = pairwise_sum(&terms);
    if m > -0.5 {
        m.ln_1p()
    } else {
        let exps: Vec<f64> = weights.iter().zip(logs).map(|(&w, &l)| w.ln() - beta * l).collect();
        log_sum_exp(&exps)
    }
}

/// `E{exp(-beta L)}`, accurate both near one and near zero.
pub(crate) fn mgf(weights: &[f64], logs: &[f64], beta: f64) -> f64 {
    let terms: Vec<f64> = weights
        .iter()
        .zip(logs)
        .map(|(&w, &l)| w * (-beta * l).exp_m1())
        .collect();
    let m = pairwise_sum(&terms);
    if m > -0.5 {
        1.0 + m
    } else {
        let direct: Vec<f64> = weights.iter().zip(logs).map(|(&w, &l)| w * (-beta * l).exp()).collect();
        pairwise_sum(&direct)
    }
}

/// Effective throughput from natural-log factors. `beta == 0` gives the
/// ergodic mean rate.
fn raw_throughput(weights: &[f64], logs: &[f64], beta: f64) -> f64 {
    if beta == 0.0 {
        let terms: Vec<f64> = weights.iter().zip(logs).map(|(&w, &l)| w * l).collect();
        return pairwise_sum(&terms) / LN_2;
    }
    -log_mgf(weights, logs, beta) / (beta * LN_2)
}

/// Throughput of a policy's log-rate profile. The log-rates are
/// nonnegative, so round-off below zero (and `-0`) is cleared.
pub(crate) fn throughput_from_logs(weights: &[f64], logs: &[f64], beta: f64) -> f64 {
    let c = raw_throughput(weights, logs, beta);
    if c > 0.0 {
        c
    } else {
        0.0
    }
}

/// Effective throughput of a per-state rate profile (bits/s/Hz).
pub fn effective_throughput(rates: &[f64], grid: &FadingGrid, qos: &QosConfig) -> Result<f64> {
    effective_throughput_with_beta(rates, grid, qos.beta)
}

/// As [`effective_throughput`] with an explicit exponent; `beta = 0` is the
/// no-QoS (ergodic) limit.
pub fn effective_throughput_with_beta(rates: &[f64], grid: &FadingGrid, beta: f64) -> Result<f64> {
    if rates.len() != grid.len() {
        return Err(Error::invalid(format!(
            "rate profile has {} entries but the grid has {} states",
            rates.len(),
            grid.len()
        )));
    }
    if !beta.is_finite() {
        return Err(Error::invalid("beta must be finite"));
    }
    let weights: Vec<f64> = grid.samples().iter().map(|s| s.weight).collect();
    let logs: Vec<f64> = rates.iter().map(|r| r * LN_2).collect();
    Ok(raw_throughput(&weights, &logs, beta))
}

/// Throughputs of the two common-rate terms and the confidential stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyThroughputs {
    pub c01: f64,
    pub c02: f64,
    pub c1: f64,
}

pub(crate) struct LogProfiles {
    pub weights: Vec<f64>,
    pub main: Vec<f64>,
    pub eve: Vec<f64>,
    pub conf: Vec<f64>,
}

pub(crate) fn log_profiles(grid: &FadingGrid, policy: &PowerPolicy, gamma: f64) -> LogProfiles {
    let n = grid.len();
    let mut out = LogProfiles {
        weights: Vec::with_capacity(n),
        main: Vec::with_capacity(n),
        eve: Vec::with_capacity(n),
        conf: Vec::with_capacity(n),
    };
    for (s, &p) in grid.samples().iter().zip(&policy.pairs) {
        out.weights.push(s.weight);
        out.main.push(ln_common_main(s, p, gamma));
        out.eve.push(ln_common_eve(s, p, gamma));
        out.conf.push(ln_confidential(s, p, gamma));
    }
    out
}

pub fn policy_throughputs(grid: &FadingGrid, policy: &PowerPolicy, qos: &QosConfig) -> Result<PolicyThroughputs> {
    check_aligned(grid, policy)?;
    let lp = log_profiles(grid, policy, qos.gamma);
    Ok(PolicyThroughputs {
        c01: throughput_from_logs(&lp.weights, &lp.main, qos.beta),
        c02: throughput_from_logs(&lp.weights, &lp.eve, qos.beta),
        c1: throughput_from_logs(&lp.weights, &lp.conf, qos.beta),
    })
}

pub(crate) fn phi_from_profiles(lp: &LogProfiles, beta: f64, case: CaseSpec) -> PhiPair {
    let (wm, we) = case.mix();
    let mut phi0 = 0.0;
    if wm > 0.0 {
        phi0 += wm * mgf(&lp.weights, &lp.main, beta);
    }
    if we > 0.0 {
        phi0 += we * mgf(&lp.weights, &lp.eve, beta);
    }
    PhiPair {
        phi0,
        phi1: mgf(&lp.weights, &lp.conf, beta),
    }
}

/// `(ln phi0, ln phi1)`; never underflows.
pub(crate) fn ln_phi_from_profiles(lp: &LogProfiles, beta: f64, case: CaseSpec) -> (f64, f64) {
    let l1 = log_mgf(&lp.weights, &lp.conf, beta);
    let l0 = match case.mix() {
        (_, 0.0) => log_mgf(&lp.weights, &lp.main, beta),
        (0.0, _) => log_mgf(&lp.weights, &lp.eve, beta),
        (wm, _) => mix_logs(wm, log_mgf(&lp.weights, &lp.main, beta), log_mgf(&lp.weights, &lp.eve, beta)),
    };
    (l0, l1)
}

/// `ln(delta e^a + (1 - delta) e^b)`, accurate when `a` and `b` are close.
pub(crate) fn mix_logs(delta: f64, a: f64, b: f64) -> f64 {
    if delta >= 1.0 {
        a
    } else if delta <= 0.0 {
        b
    } else if a >= b {
        a + ((1.0 - delta) * (b - a).exp_m1()).ln_1p()
    } else {
        b + (delta * (a - b).exp_m1()).ln_1p()
    }
}

/// The normalization functionals of a policy for the given case. Case III
/// mixes the two common-term values with weights `(delta, 1 - delta)`.
pub fn phi_functionals(policy: &PowerPolicy, grid: &FadingGrid, qos: &QosConfig, case: CaseSpec) -> Result<PhiPair> {
    case.validate()?;
    check_aligned(grid, policy)?;
    let lp = log_profiles(grid, policy, qos.gamma);
    Ok(phi_from_profiles(&lp, qos.beta, case))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FadingSample;
    use crate::rates::{rate_profiles, PowerPair};

    fn two_state() -> FadingGrid {
        FadingGrid::explicit(vec![FadingSample::new(3.0, 1.0, 0.5), FadingSample::new(0.5, 2.0, 0.5)]).unwrap()
    }

    #[test]
    fn constant_rate_is_preserved() {
        let g = two_state();
        for beta in [1e-6, 0.3, 1.0, 50.0] {
            let q = QosConfig::from_beta(beta, 1.0, 1.0).unwrap();
            let c = effective_throughput(&[1.7, 1.7], &g, &q).unwrap();
            assert!((c - 1.7).abs() < 1e-12, "beta {beta}: {c}");
        }
    }

    #[test]
    fn two_point_closed_form() {
        let g = two_state();
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        let c = effective_throughput(&[0.0, 2.0], &g, &q).unwrap();
        assert!((c - 1.6f64.log2()).abs() < 1e-15);
        assert!((c - 0.6781).abs() < 1e-4);
    }

    #[test]
    fn small_exponent_tends_to_mean() {
        let g = two_state();
        let q = QosConfig::from_beta(1e-9, 1.0, 1.0).unwrap();
        let c = effective_throughput(&[0.0, 2.0], &g, &q).unwrap();
        assert!((c - 1.0).abs() < 1e-6);
    }

    #[test]
    fn huge_exponent_does_not_underflow() {
        let g = two_state();
        let q = QosConfig::from_beta(2000.0, 1.0, 1.0).unwrap();
        let c = effective_throughput(&[3.0, 5.0], &g, &q).unwrap();
        // dominated by the worst state: C -> 3 + 1/beta
        assert!(c.is_finite());
        assert!((c - (3.0 + 1.0 / 2000.0)).abs() < 1e-6, "{c}");
    }

    #[test]
    fn phi_of_zero_policy_is_one() {
        let g = two_state();
        let q = QosConfig::from_beta(1.3, 1.0, 1.0).unwrap();
        for case in [CaseSpec::I, CaseSpec::II, CaseSpec::III(0.3)] {
            let phi = phi_functionals(&PowerPolicy::zeros(2), &g, &q, case).unwrap();
            assert_eq!(phi, PhiPair::ONE);
        }
    }

    #[test]
    fn phi1_for_unit_confidential_rate() {
        // R1 = 1 bit/s/Hz everywhere: z_E = 0, mu1 z_M = 1
        let g = FadingGrid::explicit(vec![FadingSample::new(2.0, 0.0, 0.5), FadingSample::new(4.0, 0.0, 0.5)]).unwrap();
        let p = PowerPolicy {
            pairs: vec![PowerPair::new(0.0, 0.5), PowerPair::new(0.0, 0.25)],
        };
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        let phi = phi_functionals(&p, &g, &q, CaseSpec::I).unwrap();
        assert!((phi.phi1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn phi_rejects_bad_delta() {
        let g = two_state();
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        assert!(phi_functionals(&PowerPolicy::zeros(2), &g, &q, CaseSpec::III(1.5)).is_err());
    }

    #[test]
    fn throughput_matches_log_phi() {
        let g = two_state();
        let q = QosConfig::from_beta(0.7, 1.0, 1.0).unwrap();
        let p = PowerPolicy {
            pairs: vec![PowerPair::new(0.4, 0.9), PowerPair::new(1.1, 0.0)],
        };
        let phi = phi_functionals(&p, &g, &q, CaseSpec::I).unwrap();
        let [r01, r02, r1] = rate_profiles(&g, &p, 1.0).unwrap();
        let c1 = effective_throughput(&r1, &g, &q).unwrap();
        assert!((c1 + phi.phi1.ln() / (q.beta * LN_2)).abs() < 1e-13);
        let c01 = effective_throughput(&r01, &g, &q).unwrap();
        assert!((c01 + phi.phi0.ln() / (q.beta * LN_2)).abs() < 1e-13);
        let phi2 = phi_functionals(&p, &g, &q, CaseSpec::II).unwrap();
        let c02 = effective_throughput(&r02, &g, &q).unwrap();
        assert!((c02 + phi2.phi0.ln() / (q.beta * LN_2)).abs() < 1e-13);
        let mixed = phi_functionals(&p, &g, &q, CaseSpec::III(0.25)).unwrap();
        assert!((mixed.phi0 - (0.25 * phi.phi0 + 0.75 * phi2.phi0)).abs() < 1e-15);
    }
}
