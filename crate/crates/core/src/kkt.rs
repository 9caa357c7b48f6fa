//! Per-fading-state optimal power split for fixed multipliers.
//!
//! With the multipliers frozen, the Lagrangian decouples across fading states
//! and each state maximizes, in units of the power price `kappa`,
//!
//! ```text
//! f(mu0, mu1) = (1/alpha1) sum_k w_k [1 - (1 + x_k)^(-beta)] / beta
//!             + (1/alpha2) [1 - u^(-beta)] / beta - mu0 - mu1
//! ```
//!
//! where `x_k = mu0 c_k / (1 + mu1 c_k)` are the common-message SINRs seen by
//! the receiver(s) whose rate bounds the common stream (`c = z_M` for case I,
//! `c = gamma z_E` for case II, both with weights `(delta, 1 - delta)` for
//! case III) and `u = (1 + mu1 z_M) / (1 + gamma mu1 z_E)`.
//!
//! The solver follows the gate structure of the power-control procedures:
//! confidential power is only allocated when `z_M - gamma z_E > alpha2`; the
//! confidential-only candidate decides whether common power is worth adding;
//! the marginal value of confidential power at zero decides between the
//! interior solution and the common-only closed form.

use std::f64::consts::LN_2;

use crate::effcap::PhiPair;
use crate::error::{Error, Result};
use crate::model::{in_secure_set, FadingSample};
use crate::numeric::{brent, RootError, RootTol};
use crate::rates::{CaseSpec, PowerPair};

/// Multipliers of the boundary problem and the derived per-state thresholds
/// `alpha1 = kappa phi0 ln2 / lambda0`, `alpha2 = kappa phi1 ln2 / lambda1`.
///
/// A zero weight disables the corresponding stream: its threshold is `+inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierSet {
    pub kappa: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub alpha1: f64,
    pub alpha2: f64,
}

fn threshold(kappa: f64, phi: f64, lambda: f64) -> f64 {
    if lambda > 0.0 {
        kappa * phi * LN_2 / lambda
    } else {
        f64::INFINITY
    }
}

impl MultiplierSet {
    pub fn new(kappa: f64, phi: PhiPair, lambda0: f64, lambda1: f64) -> Result<Self> {
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(Error::invalid(format!("kappa must be positive and finite, got {kappa}")));
        }
        if !(lambda0 >= 0.0 && lambda1 >= 0.0) {
            return Err(Error::invalid("weights must be nonnegative"));
        }
        Ok(MultiplierSet {
            kappa,
            phi0: phi.phi0,
            phi1: phi.phi1,
            lambda0,
            lambda1,
            alpha1: threshold(kappa, phi.phi0, lambda0),
            alpha2: threshold(kappa, phi.phi1, lambda1),
        })
    }

    /// Multipliers that realize the given thresholds with `kappa = phi = 1`.
    pub fn from_thresholds(alpha1: f64, alpha2: f64) -> Self {
        let weight = |a: f64| if a.is_finite() { LN_2 / a } else { 0.0 };
        MultiplierSet {
            kappa: 1.0,
            phi0: 1.0,
            phi1: 1.0,
            lambda0: weight(alpha1),
            lambda1: weight(alpha2),
            alpha1,
            alpha2,
        }
    }
}

/// Which branch of the gate logic produced a state's allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `mu1 = 0`, `mu0` from the common-only stationarity (possibly clamped to 0).
    CommonOnly,
    /// `mu0 = 0`, `mu1` from the confidential-only stationarity.
    ConfidentialOnly,
    /// Both powers positive from the coupled stationarity system.
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSolution {
    pub pair: PowerPair,
    pub branch: Branch,
}

/// Per-state problem data. At most two common-rate components.
#[derive(Debug, Clone, Copy)]
struct StateProblem {
    beta: f64,
    alpha1: f64,
    alpha2: f64,
    secure: bool,
    z_m: f64,
    g: f64,
    d: f64,
    comps: [(f64, f64); 2],
    ncomp: usize,
}

impl StateProblem {
    fn new(s: &FadingSample, alpha1: f64, alpha2: f64, case: CaseSpec, beta: f64, gamma: f64) -> Self {
        let g = gamma * s.z_e;
        let (wm, we) = case.mix();
        let mut comps = [(0.0, 0.0); 2];
        let mut ncomp = 0;
        for (w, c) in [(wm, s.z_m), (we, g)] {
            if w > 0.0 {
                comps[ncomp] = (w, c);
                ncomp += 1;
            }
        }
        StateProblem {
            beta,
            alpha1,
            alpha2,
            secure: in_secure_set(s, gamma),
            z_m: s.z_m,
            g,
            d: s.z_m - g,
            comps,
            ncomp,
        }
    }

    fn comps(&self) -> &[(f64, f64)] {
        &self.comps[..self.ncomp]
    }

    /// Effective common gains `c_k / (1 + mu1 c_k)`.
    fn eff_gain(c: f64, mu1: f64) -> f64 {
        c / (1.0 + mu1 * c)
    }

    /// Marginal common-stream value of `mu0` (before division by `alpha1`).
    fn common_marginal(&self, mu0: f64, mu1: f64) -> f64 {
        let e = -(self.beta + 1.0);
        self.comps()
            .iter()
            .map(|&(w, c)| {
                let a = Self::eff_gain(c, mu1);
                w * a * (e * (mu0 * a).ln_1p()).exp()
            })
            .sum()
    }

    /// Loss in common-stream value per unit of `mu1`, divided by `alpha1`.
    fn interference(&self, mu0: f64, mu1: f64) -> f64 {
        if mu0 == 0.0 || !self.alpha1.is_finite() {
            return 0.0;
        }
        let e = -(self.beta + 1.0);
        let s: f64 = self
            .comps()
            .iter()
            .map(|&(w, c)| {
                let a = Self::eff_gain(c, mu1);
                w * (e * (mu0 * a).ln_1p()).exp() * mu0 * a * a
            })
            .sum();
        s / self.alpha1
    }

    /// `ln` of the marginal confidential value `u^(-beta-1) d / (1 + g mu1)^2`.
    fn ln_conf_marginal(&self, mu1: f64) -> f64 {
        let ln_u = (mu1 * self.d / (1.0 + mu1 * self.g)).ln_1p();
        self.d.ln() - (self.beta + 1.0) * ln_u - 2.0 * (mu1 * self.g).ln_1p()
    }

    fn fail(&self, what: &str, err: RootError) -> Error {
        let (detail, residual) = match err {
            RootError::NotBracketed { fa, fb } => (format!("{what}: no sign change ({fa:e}, {fb:e})"), fa.abs().min(fb.abs())),
            RootError::NotConverged { x, fx } => (format!("{what}: not converged at {x:e}"), fx.abs()),
            RootError::NonFinite { x } => (format!("{what}: non-finite value at {x:e}"), f64::NAN),
        };
        Error::numeric(
            format!("per-state solve (z_M={}, gamma z_E={}, alpha1={}, alpha2={})", self.z_m, self.g, self.alpha1, self.alpha2),
            detail,
            residual,
        )
    }

    /// Optimal `mu0` for a fixed `mu1`, clamped at zero.
    fn mu0_star(&self, mu1: f64) -> Result<f64> {
        let m0 = self.common_marginal(0.0, mu1);
        if !(m0 > self.alpha1) {
            return Ok(0.0);
        }
        let p = 1.0 / (self.beta + 1.0);
        let r = (p * (m0 / self.alpha1).ln()).exp_m1();
        let gains = self.comps().iter().map(|&(_, c)| Self::eff_gain(c, mu1)).filter(|&a| a > 0.0);
        let a_max = gains.clone().fold(0.0, f64::max);
        let a_min = gains.fold(f64::INFINITY, f64::min);
        if self.ncomp == 1 {
            return Ok(r / a_max);
        }
        // M(mu0) is bracketed by M(0) (1 + mu0 a)^(-beta-1) for a in {a_min, a_max}.
        let (lo, hi) = (r / a_max, r / a_min);
        let ln_a1 = self.alpha1.ln();
        let f = |mu0: f64| self.common_marginal(mu0, mu1).ln() - ln_a1;
        let (flo, fhi) = (f(lo), f(hi));
        if flo <= 0.0 {
            return Ok(lo);
        }
        if fhi >= 0.0 {
            return Ok(hi);
        }
        brent(f, lo, hi, flo, fhi, RootTol::default())
            .map(|r| r.x)
            .map_err(|e| self.fail("common-power equation", e))
    }

    /// Confidential power when no common power is sent: the root of
    /// `u^(-beta-1) d / (1 + g mu1)^2 = alpha2`. Requires `d > alpha2`.
    fn mu1_alone(&self) -> Result<f64> {
        let ln_ratio = (self.d / self.alpha2).ln();
        if self.g == 0.0 {
            return Ok((ln_ratio / (self.beta + 1.0)).exp_m1() / self.z_m);
        }
        let hi = (0.5 * ln_ratio).exp_m1() / self.g;
        let ln_a2 = self.alpha2.ln();
        let f = |mu1: f64| self.ln_conf_marginal(mu1) - ln_a2;
        let (f0, fhi) = (ln_ratio, f(hi));
        if fhi >= 0.0 {
            return Ok(hi);
        }
        brent(f, 0.0, hi, f0, fhi, RootTol::default())
            .map(|r| r.x)
            .map_err(|e| self.fail("confidential-power equation", e))
    }

    /// Marginal value of `mu1` (log form) with `mu0` re-optimized.
    fn coupled_gap(&self, mu1: f64) -> Result<(f64, f64)> {
        let mu0 = self.mu0_star(mu1)?;
        let gap = self.ln_conf_marginal(mu1) - self.alpha2.ln() - self.interference(mu0, mu1).ln_1p();
        Ok((gap, mu0))
    }

    fn solve(&self) -> Result<StateSolution> {
        let common_only = |this: &Self| -> Result<StateSolution> {
            Ok(StateSolution {
                pair: PowerPair::new(this.mu0_star(0.0)?, 0.0),
                branch: Branch::CommonOnly,
            })
        };
        if !(self.secure && self.d > self.alpha2) {
            return common_only(self);
        }
        let mu1_alone = self.mu1_alone()?;
        if !(self.common_marginal(0.0, mu1_alone) > self.alpha1) {
            return Ok(StateSolution {
                pair: PowerPair::new(0.0, mu1_alone),
                branch: Branch::ConfidentialOnly,
            });
        }
        let (gap0, mu0_at_zero) = self.coupled_gap(0.0)?;
        if !(gap0 > 0.0) {
            return Ok(StateSolution {
                pair: PowerPair::new(mu0_at_zero, 0.0),
                branch: Branch::CommonOnly,
            });
        }
        let mut inner_err = None;
        let f = |mu1: f64| match self.coupled_gap(mu1) {
            Ok((gap, _)) => gap,
            Err(e) => {
                inner_err = Some(e);
                f64::NAN
            }
        };
        let (gap_hi, _) = self.coupled_gap(mu1_alone)?;
        let root = brent(f, 0.0, mu1_alone, gap0, gap_hi, RootTol::default());
        if let Some(e) = inner_err {
            return Err(e);
        }
        let mu1 = root.map_err(|e| self.fail("coupled stationarity system", e))?.x;
        let mu0 = self.mu0_star(mu1)?;
        Ok(StateSolution {
            pair: PowerPair::new(mu0, mu1),
            branch: Branch::Interior,
        })
    }

    fn objective(&self, p: PowerPair) -> f64 {
        let b = self.beta;
        // (1 - (1+x)^(-beta)) / beta, stable for small beta
        let gain = |ln1px: f64| -(-b * ln1px).exp_m1() / b;
        let mu1 = if self.secure { p.mu1 } else { 0.0 };
        let mut val = -(p.mu0 + p.mu1);
        if self.alpha1.is_finite() {
            let common: f64 = self
                .comps()
                .iter()
                .map(|&(w, c)| w * gain((p.mu0 * Self::eff_gain(c, mu1)).ln_1p()))
                .sum();
            val += common / self.alpha1;
        }
        if self.alpha2.is_finite() && self.secure {
            val += gain((mu1 * self.d / (1.0 + mu1 * self.g)).ln_1p()) / self.alpha2;
        }
        val
    }
}

/// Optimal per-state pair for thresholds `(alpha1, alpha2)` under the given
/// case. Thresholds may be `+inf` to disable a stream.
pub fn solve_state(s: &FadingSample, alpha1: f64, alpha2: f64, case: CaseSpec, beta: f64, gamma: f64) -> Result<StateSolution> {
    case.validate()?;
    if !(beta > 0.0) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    if !(alpha1 > 0.0 && alpha2 > 0.0) {
        return Err(Error::invalid("thresholds must be positive"));
    }
    StateProblem::new(s, alpha1, alpha2, case, beta, gamma).solve()
}

/// [`solve_state`] without argument validation, for inner loops.
pub(crate) fn solve_state_unchecked(s: &FadingSample, alpha1: f64, alpha2: f64, case: CaseSpec, beta: f64, gamma: f64) -> Result<StateSolution> {
    StateProblem::new(s, alpha1, alpha2, case, beta, gamma).solve()
}

/// Case I: the common stream is limited by the main receiver.
pub fn solve_state_case1(s: &FadingSample, m: &MultiplierSet, beta: f64, gamma: f64) -> Result<PowerPair> {
    solve_state(s, m.alpha1, m.alpha2, CaseSpec::I, beta, gamma).map(|x| x.pair)
}

/// Case II: the common stream is limited by the second receiver.
pub fn solve_state_case2(s: &FadingSample, m: &MultiplierSet, beta: f64, gamma: f64) -> Result<PowerPair> {
    solve_state(s, m.alpha1, m.alpha2, CaseSpec::II, beta, gamma).map(|x| x.pair)
}

/// Case III with time-sharing weight `delta` between the two common terms.
pub fn solve_state_case3(s: &FadingSample, m: &MultiplierSet, delta: f64, beta: f64, gamma: f64) -> Result<PowerPair> {
    solve_state(s, m.alpha1, m.alpha2, CaseSpec::III(delta), beta, gamma).map(|x| x.pair)
}

/// Relative residuals of the stationarity equations at a pair; `None` for a
/// variable sitting at zero (its equation is then an inequality).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationarityResiduals {
    pub common: Option<f64>,
    pub confidential: Option<f64>,
}

pub fn stationarity_residuals(
    s: &FadingSample,
    p: PowerPair,
    alpha1: f64,
    alpha2: f64,
    case: CaseSpec,
    beta: f64,
    gamma: f64,
) -> StationarityResiduals {
    let sp = StateProblem::new(s, alpha1, alpha2, case, beta, gamma);
    let mu1 = if sp.secure { p.mu1 } else { 0.0 };
    let common = (p.mu0 > 0.0).then(|| sp.common_marginal(p.mu0, mu1) / alpha1 - 1.0);
    let confidential = (sp.secure && p.mu1 > 0.0)
        .then(|| (sp.ln_conf_marginal(mu1) - alpha2.ln() - sp.interference(p.mu0, mu1).ln_1p()).exp_m1());
    StationarityResiduals { common, confidential }
}

/// Per-state Lagrangian integrand in units of `kappa` (up to a constant).
pub fn state_objective(s: &FadingSample, p: PowerPair, alpha1: f64, alpha2: f64, case: CaseSpec, beta: f64, gamma: f64) -> f64 {
    StateProblem::new(s, alpha1, alpha2, case, beta, gamma).objective(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(z_m: f64, z_e: f64) -> FadingSample {
        FadingSample::new(z_m, z_e, 1.0)
    }

    #[test]
    fn thresholds_from_multipliers() {
        let m = MultiplierSet::new(2.0, PhiPair { phi0: 0.5, phi1: 0.25 }, 0.5, 0.0).unwrap();
        assert!((m.alpha1 - 2.0 * 0.5 * LN_2 / 0.5).abs() < 1e-15);
        assert!(m.alpha2.is_infinite());
        assert!(MultiplierSet::new(0.0, PhiPair::ONE, 1.0, 1.0).is_err());
    }

    #[test]
    fn case1_common_only_closed_form() {
        let m = MultiplierSet::from_thresholds(1.0, 0.5);
        let p = solve_state_case1(&st(4.0, 3.9), &m, 1.0, 1.0).unwrap();
        assert_eq!(p.mu1, 0.0);
        assert!((p.mu0 - 0.25).abs() < 1e-14);
    }

    #[test]
    fn case1_clamped_negative() {
        let m = MultiplierSet::from_thresholds(1.0, 1.0);
        let p = solve_state_case1(&st(0.5, 0.1), &m, 1.0, 1.0).unwrap();
        assert_eq!(p, PowerPair::ZERO);
    }

    #[test]
    fn case1_interior_hand_solution() {
        let m = MultiplierSet::from_thresholds(1.0, 1.0);
        let s = st(4.0, 0.0);
        let sol = solve_state(&s, 1.0, 1.0, CaseSpec::I, 1.0, 1.0).unwrap();
        assert_eq!(sol.branch, Branch::Interior);
        let y = 2f64.powf(2.0 / 3.0);
        let mu1 = (y - 1.0) / 4.0;
        let mu0 = (y - 1.0) * y / 4.0;
        assert!((sol.pair.mu1 - mu1).abs() < 1e-13, "{:?}", sol.pair);
        assert!((sol.pair.mu0 - mu0).abs() < 1e-13, "{:?}", sol.pair);
        assert!((sol.pair.mu1 - 0.1469).abs() < 1e-4);
        assert!((sol.pair.mu0 - 0.2331).abs() < 1e-4);
        let p = solve_state_case1(&s, &m, 1.0, 1.0).unwrap();
        assert_eq!(p, sol.pair);
        let r = stationarity_residuals(&s, p, 1.0, 1.0, CaseSpec::I, 1.0, 1.0);
        assert!(r.common.unwrap().abs() < 1e-10);
        assert!(r.confidential.unwrap().abs() < 1e-10);
    }

    #[test]
    fn case2_common_only_closed_form() {
        let m = MultiplierSet::from_thresholds(1.0, 0.5);
        let p = solve_state_case2(&st(4.0, 3.9), &m, 1.0, 1.0).unwrap();
        assert_eq!(p.mu1, 0.0);
        let expect = 1.0 / 3.9f64.sqrt() - 1.0 / 3.9;
        assert!((p.mu0 - expect).abs() < 1e-14);
        assert!((p.mu0 - 0.24996).abs() < 1e-5);
    }

    #[test]
    fn case2_weak_second_receiver_sends_confidential_only() {
        // gamma z_E < alpha1 and z_M - gamma z_E > alpha2
        let m = MultiplierSet::from_thresholds(1.0, 1.0);
        let s = st(5.0, 0.5);
        let p = solve_state_case2(&s, &m, 1.0, 1.0).unwrap();
        assert_eq!(p.mu0, 0.0);
        assert!(p.mu1 > 0.0);
        let r = stationarity_residuals(&s, p, 1.0, 1.0, CaseSpec::II, 1.0, 1.0);
        assert!(r.confidential.unwrap().abs() < 1e-12);
    }

    #[test]
    fn zero_gain_state_gets_nothing() {
        let m = MultiplierSet::from_thresholds(0.3, 0.3);
        for case in [CaseSpec::I, CaseSpec::II, CaseSpec::III(0.4)] {
            let sol = solve_state(&st(0.0, 0.0), m.alpha1, m.alpha2, case, 1.0, 1.0).unwrap();
            assert_eq!(sol.pair, PowerPair::ZERO);
        }
    }

    #[test]
    fn case3_endpoints_reduce_to_cases_1_and_2() {
        let m = MultiplierSet::from_thresholds(0.7, 0.9);
        for s in [st(4.0, 1.0), st(2.0, 3.0), st(6.0, 0.2)] {
            assert_eq!(
                solve_state_case3(&s, &m, 1.0, 0.8, 1.2).unwrap(),
                solve_state_case1(&s, &m, 0.8, 1.2).unwrap()
            );
            assert_eq!(
                solve_state_case3(&s, &m, 0.0, 0.8, 1.2).unwrap(),
                solve_state_case2(&s, &m, 0.8, 1.2).unwrap()
            );
        }
    }

    #[test]
    fn case3_mixed_interior_residuals() {
        let s = st(4.0, 1.0);
        let case = CaseSpec::III(0.5);
        let sol = solve_state(&s, 1.0, 1.0, case, 1.0, 1.0).unwrap();
        let r = stationarity_residuals(&s, sol.pair, 1.0, 1.0, case, 1.0, 1.0);
        if let Some(c) = r.common {
            assert!(c.abs() < 1e-9);
        }
        if let Some(c) = r.confidential {
            assert!(c.abs() < 1e-9);
        }
        // brute-force scan of the per-state integrand, step 1e-3
        let best = state_objective(&s, sol.pair, 1.0, 1.0, case, 1.0, 1.0);
        let mut scan = f64::NEG_INFINITY;
        for i in 0..=1000 {
            for j in 0..=1000 {
                let p = PowerPair::new(i as f64 * 1e-3, j as f64 * 1e-3);
                scan = scan.max(state_objective(&s, p, 1.0, 1.0, case, 1.0, 1.0));
            }
        }
        assert!(best >= scan - 1e-9, "solver {best} vs scan {scan}");
    }

    #[test]
    fn disabled_streams() {
        let s = st(5.0, 0.5);
        let sol = solve_state(&s, f64::INFINITY, 0.5, CaseSpec::I, 1.0, 1.0).unwrap();
        assert_eq!(sol.pair.mu0, 0.0);
        assert!(sol.pair.mu1 > 0.0);
        let sol = solve_state(&s, 0.5, f64::INFINITY, CaseSpec::I, 1.0, 1.0).unwrap();
        assert_eq!(sol.pair.mu1, 0.0);
        assert!(sol.pair.mu0 > 0.0);
    }

    #[test]
    fn rejects_bad_delta() {
        assert!(solve_state(&st(1.0, 0.0), 1.0, 1.0, CaseSpec::III(-0.1), 1.0, 1.0).is_err());
    }
}
