//! Brute-force reference optimizer for small explicit grids.
//!
//! The oracle knows nothing about the case decomposition or the stationarity
//! conditions. It maximizes `lambda0 C0 + lambda1 C1` where `C0` is the
//! effective throughput of whichever common-rate term has the smaller ergodic
//! mean (the larger of the two on an exact tie), over per-state allocations
//! satisfying the average power budget.
//!
//! Search: exhaustive enumeration on a power lattice, with the last state
//! taking whatever budget is left (spending more power can always be routed to
//! the common stream, so the optimum uses the whole budget). The best lattice
//! points are then refined by a pattern search that moves power between
//! states and streams at a fixed total budget.

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::effcap::{log_profiles, throughput_from_logs, ThroughputPair};
use crate::error::{Error, Result};
use crate::model::{in_secure_set, FadingGrid, FadingSample, GridMethod, QosConfig};
use crate::outer::SolveReport;
use crate::rates::{PowerPair, PowerPolicy};

/// Largest number of lattice policies the enumeration may visit.
pub const MAX_CANDIDATES: f64 = 1e9;
const MAX_STATES: usize = 4;

/// Which throughput notion the oracle optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleObjective {
    /// Effective throughputs at the configured QoS exponent.
    Effective,
    /// Ergodic mean rates (the no-delay-constraint region).
    Ergodic,
}

#[derive(Debug, Clone)]
pub struct OracleProblem {
    pub grid: FadingGrid,
    pub qos: QosConfig,
    pub lambda: (f64, f64),
    pub power_step: f64,
    /// Per-state bound on `mu0 + mu1`.
    pub power_cap: f64,
    pub objective: OracleObjective,
}

impl OracleProblem {
    /// Problem with the default per-state cap of `4 snr`.
    pub fn new(grid: FadingGrid, qos: QosConfig, lambda: (f64, f64), power_step: f64) -> Self {
        let cap = 4.0 * qos.snr;
        OracleProblem {
            grid,
            qos,
            lambda,
            power_step,
            power_cap: cap,
            objective: OracleObjective::Effective,
        }
    }

    pub fn ergodic(mut self) -> Self {
        self.objective = OracleObjective::Ergodic;
        self
    }

    fn beta(&self) -> f64 {
        match self.objective {
            OracleObjective::Effective => self.qos.beta,
            OracleObjective::Ergodic => 0.0,
        }
    }

    fn normalized_lambda(&self) -> (f64, f64) {
        let s = self.lambda.0 + self.lambda.1;
        (self.lambda.0 / s, self.lambda.1 / s)
    }

    fn validate(&self) -> Result<()> {
        let n = self.grid.len();
        if n == 0 || n > MAX_STATES {
            return Err(Error::invalid(format!("the oracle handles 1 to {MAX_STATES} states, got {n}")));
        }
        if self.grid.method() != GridMethod::Explicit {
            return Err(Error::invalid("the oracle needs an explicit grid"));
        }
        if !(self.power_step > 0.0) || !self.power_step.is_finite() {
            return Err(Error::invalid("power_step must be positive"));
        }
        if !(self.power_cap >= 0.0) {
            return Err(Error::invalid("power_cap must be nonnegative"));
        }
        let (l0, l1) = self.lambda;
        if !(l0 >= 0.0 && l1 >= 0.0) || l0 + l1 <= 0.0 {
            return Err(Error::invalid("weights must be nonnegative with a positive sum"));
        }
        Ok(())
    }

    /// Lattice resolution allowance: the largest per-state rate slope,
    /// `max z / ln 2` per unit power, times the power step.
    pub fn lattice_bound(&self) -> f64 {
        let z_max = self
            .grid
            .samples()
            .iter()
            .map(|s| s.z_m.max(self.qos.gamma * s.z_e))
            .fold(0.0, f64::max);
        self.power_step * z_max / LN_2
    }
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub objective: f64,
    pub policy: PowerPolicy,
    pub throughput: ThroughputPair,
    /// Best objective found on the lattice before refinement.
    pub lattice_objective: f64,
    pub lattice_bound: f64,
    pub candidates: u64,
}

/// Case-free objective of a policy and its throughput pair.
pub fn policy_objective(grid: &FadingGrid, qos: &QosConfig, lambda: (f64, f64), policy: &PowerPolicy, objective: OracleObjective) -> (f64, ThroughputPair) {
    let beta = match objective {
        OracleObjective::Effective => qos.beta,
        OracleObjective::Ergodic => 0.0,
    };
    let lp = log_profiles(grid, policy, qos.gamma);
    let mean = |v: &[f64]| lp.weights.iter().zip(v).map(|(w, l)| w * l).sum::<f64>();
    let (r01, r02) = (mean(&lp.main), mean(&lp.eve));
    let c01 = throughput_from_logs(&lp.weights, &lp.main, beta);
    let c02 = throughput_from_logs(&lp.weights, &lp.eve, beta);
    let c0 = if r01 < r02 {
        c01
    } else if r02 < r01 {
        c02
    } else {
        c01.max(c02)
    };
    let c1 = throughput_from_logs(&lp.weights, &lp.conf, beta);
    let s = lambda.0 + lambda.1;
    ((lambda.0 * c0 + lambda.1 * c1) / s, ThroughputPair { c0, c1 })
}

/// Sums carried down the enumeration: `E{e^(-beta L)}` and `E{L}` for the
/// main common, second common and confidential log-rates.
type Sums = [f64; 6];

fn state_terms(s: &FadingSample, p: PowerPair, gamma: f64, beta: f64) -> Sums {
    let g = gamma * s.z_e;
    let l01 = (p.mu0 * s.z_m / (1.0 + p.mu1 * s.z_m)).ln_1p();
    let l02 = (p.mu0 * g / (1.0 + p.mu1 * g)).ln_1p();
    let l1 = if in_secure_set(s, gamma) {
        (p.mu1 * (s.z_m - g) / (1.0 + p.mu1 * g)).ln_1p()
    } else {
        0.0
    };
    let w = s.weight;
    [
        w * (-beta * l01).exp(),
        w * (-beta * l02).exp(),
        w * (-beta * l1).exp(),
        w * l01,
        w * l02,
        w * l1,
    ]
}

struct Enumerator<'a> {
    p: &'a OracleProblem,
    lambda: (f64, f64),
    beta: f64,
    /// Lattice options of every state but the last: (cost, terms, pair),
    /// sorted by cost.
    tables: Vec<Vec<(f64, Sums, PowerPair)>>,
    choice: Vec<PowerPair>,
    candidates: u64,
    /// Best candidates kept for refinement: overall and per binding term.
    best: Vec<(f64, Vec<PowerPair>)>,
    best_by_side: [Option<(f64, Vec<PowerPair>)>; 3],
}

const KEEP: usize = 4;

impl<'a> Enumerator<'a> {
    fn value(&self, s: &Sums) -> (f64, usize) {
        let c = |e: f64, m: f64| if self.beta == 0.0 { m / LN_2 } else { -e.ln() / (self.beta * LN_2) };
        let (c01, c02, c1) = (c(s[0], s[3]), c(s[1], s[4]), c(s[2], s[5]));
        let (c0, side) = if s[3] < s[4] {
            (c01, 0)
        } else if s[4] < s[3] {
            (c02, 1)
        } else {
            (c01.max(c02), 2)
        };
        (self.lambda.0 * c0 + self.lambda.1 * c1, side)
    }

    fn record(&mut self, v: f64, side: usize) {
        if self.best.len() < KEEP || v > self.best[KEEP - 1].0 {
            let pos = self.best.iter().position(|b| v > b.0).unwrap_or(self.best.len());
            self.best.insert(pos, (v, self.choice.clone()));
            self.best.truncate(KEEP);
        }
        if self.best_by_side[side].as_ref().is_none_or(|b| v > b.0) {
            self.best_by_side[side] = Some((v, self.choice.clone()));
        }
    }

    fn walk(&mut self, level: usize, budget: f64, sums: Sums) {
        let samples = self.p.grid.samples();
        let n = samples.len();
        if level + 1 == n {
            let s = samples[level];
            let total = (budget.max(0.0) / s.weight).min(self.p.power_cap);
            let splits = if in_secure_set(&s, self.p.qos.gamma) {
                (total / self.p.power_step + 1e-9).floor() as usize
            } else {
                0
            };
            for b in 0..=splits {
                let mu1 = (b as f64 * self.p.power_step).min(total);
                let pair = PowerPair::new(total - mu1, mu1);
                let t = state_terms(&s, pair, self.p.qos.gamma, self.beta);
                let mut acc = sums;
                for k in 0..6 {
                    acc[k] += t[k];
                }
                self.candidates += 1;
                self.choice[level] = pair;
                let (v, side) = self.value(&acc);
                self.record(v, side);
            }
            return;
        }
        for idx in 0..self.tables[level].len() {
            let (cost, t, pair) = self.tables[level][idx];
            if cost > budget + 1e-12 {
                break;
            }
            let mut acc = sums;
            for k in 0..6 {
                acc[k] += t[k];
            }
            self.choice[level] = pair;
            self.walk(level + 1, budget - cost, acc);
        }
    }
}

fn lattice_pairs(s: &FadingSample, p: &OracleProblem) -> Vec<PowerPair> {
    let h = p.power_step;
    let levels = (p.power_cap.min(p.qos.snr / s.weight) / h + 1e-9).floor() as usize;
    let secure = in_secure_set(s, p.qos.gamma);
    let mut out = Vec::new();
    for a in 0..=levels {
        for b in 0..=(if secure { levels - a } else { 0 }) {
            out.push(PowerPair::new(a as f64 * h, b as f64 * h));
        }
    }
    out
}

/// Number of lattice policies the enumeration would visit.
pub fn count_candidates(p: &OracleProblem) -> f64 {
    let samples = p.grid.samples();
    let costs: Vec<Vec<f64>> = samples[..samples.len() - 1]
        .iter()
        .map(|s| {
            let mut c: Vec<f64> = lattice_pairs(s, p).iter().map(|q| s.weight * (q.mu0 + q.mu1)).collect();
            c.sort_by(f64::total_cmp);
            c
        })
        .collect();
    let last = samples[samples.len() - 1];
    let secure = in_secure_set(&last, p.qos.gamma);
    fn rec(costs: &[Vec<f64>], budget: f64, leaf: &dyn Fn(f64) -> f64, limit: f64) -> f64 {
        match costs.split_first() {
            None => leaf(budget),
            Some((head, rest)) => {
                let mut n = 0.0;
                for &c in head {
                    if c > budget + 1e-12 || n > limit {
                        break;
                    }
                    n += rec(rest, budget - c, leaf, limit);
                }
                n
            }
        }
    }
    let leaf = |budget: f64| {
        if secure {
            ((budget.max(0.0) / last.weight).min(p.power_cap) / p.power_step + 1e-9).floor() + 1.0
        } else {
            1.0
        }
    };
    rec(&costs, p.qos.snr, &leaf, MAX_CANDIDATES)
}

/// Maximizes the weighted throughput by lattice enumeration plus local
/// refinement.
pub fn brute_force_point(p: &OracleProblem) -> Result<OracleResult> {
    p.validate()?;
    let count = count_candidates(p);
    if count > MAX_CANDIDATES {
        return Err(Error::invalid(format!(
            "oracle search space has more than {MAX_CANDIDATES:e} candidates; increase power_step"
        )));
    }
    let lambda = p.normalized_lambda();
    let beta = p.beta();
    let samples = p.grid.samples();
    let n = samples.len();
    let tables = samples[..n - 1]
        .iter()
        .map(|s| {
            let mut t: Vec<(f64, Sums, PowerPair)> = lattice_pairs(s, p)
                .into_iter()
                .map(|q| (s.weight * (q.mu0 + q.mu1), state_terms(s, q, p.qos.gamma, beta), q))
                .collect();
            t.sort_by(|a, b| a.0.total_cmp(&b.0));
            t
        })
        .collect();
    let mut e = Enumerator {
        p,
        lambda,
        beta,
        tables,
        choice: vec![PowerPair::ZERO; n],
        candidates: 0,
        best: Vec::new(),
        best_by_side: [None, None, None],
    };
    e.walk(0, p.qos.snr, [0.0; 6]);
    let lattice_objective = e.best.first().map_or(f64::NEG_INFINITY, |b| b.0);
    let mut starts: Vec<Vec<PowerPair>> = e.best.iter().map(|b| b.1.clone()).collect();
    starts.extend(e.best_by_side.iter().flatten().map(|b| b.1.clone()));

    let mut best: Option<(f64, PowerPolicy)> = None;
    for s in starts {
        let (v, pol) = refine(p, PowerPolicy { pairs: s });
        if best.as_ref().is_none_or(|b| v > b.0) {
            best = Some((v, pol));
        }
    }
    let (objective, policy) = best.expect("the lattice always contains the zero policy");
    let (_, throughput) = policy_objective(&p.grid, &p.qos, lambda, &policy, p.objective);
    Ok(OracleResult {
        objective,
        policy,
        throughput,
        lattice_objective,
        lattice_bound: p.lattice_bound(),
        candidates: e.candidates,
    })
}

/// Pattern search at fixed total budget: pairwise transfers between all
/// power variables plus seeded random directions, with a halving step.
fn refine(p: &OracleProblem, start: PowerPolicy) -> (f64, PowerPolicy) {
    let lambda = p.normalized_lambda();
    let samples = p.grid.samples();
    let gamma = p.qos.gamma;
    // variable k -> (state, is_confidential)
    let mut vars = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        vars.push((i, false));
        if in_secure_set(s, gamma) {
            vars.push((i, true));
        }
    }
    let get = |pol: &PowerPolicy, (i, c): (usize, bool)| if c { pol.pairs[i].mu1 } else { pol.pairs[i].mu0 };
    let set = |pol: &mut PowerPolicy, (i, c): (usize, bool), v: f64| {
        if c {
            pol.pairs[i].mu1 = v;
        } else {
            pol.pairs[i].mu0 = v;
        }
    };
    let eval = |pol: &PowerPolicy| policy_objective(&p.grid, &p.qos, lambda, pol, p.objective).0;
    let within_cap = |pol: &PowerPolicy, i: usize| pol.pairs[i].mu0 + pol.pairs[i].mu1 <= p.power_cap * (1.0 + 1e-12);
    let feasible = |pol: &PowerPolicy| pol.pairs.iter().enumerate().all(|(i, q)| q.mu0 >= 0.0 && q.mu1 >= 0.0 && within_cap(pol, i));
    let imbalance = |pol: &PowerPolicy| {
        let lp = log_profiles(&p.grid, pol, gamma);
        lp.weights.iter().zip(lp.main.iter().zip(&lp.eve)).map(|(w, (a, b))| w * (a - b)).sum::<f64>()
    };
    let weights: Vec<f64> = vars.iter().map(|v| samples[v.0].weight).collect();
    let project = |d: &mut [f64]| {
        let proj = d.iter().zip(&weights).map(|(a, b)| a * b).sum::<f64>() / weights.iter().map(|b| b * b).sum::<f64>();
        for (dk, wk) in d.iter_mut().zip(&weights) {
            *dk -= proj * wk;
        }
    };
    // Direction along which the imbalance changes fastest at fixed budget.
    let repair_direction = |pol: &PowerPolicy| {
        let g0 = imbalance(pol);
        let mut r: Vec<f64> = vars
            .iter()
            .map(|&v| {
                let h = 1e-7 * (1.0 + get(pol, v));
                let mut q = pol.clone();
                set(&mut q, v, get(pol, v) + h);
                (imbalance(&q) - g0) / h
            })
            .collect();
        project(&mut r);
        r
    };
    // A move that crosses the kink E{R01} = E{R02} is pulled back onto the
    // side it started from, so the search can slide along the kink.
    let pull_back = |cand: &PowerPolicy, side: f64, r: &[f64]| -> Option<PowerPolicy> {
        let rr: f64 = r.iter().map(|x| x * x).sum();
        if !(rr > 0.0) {
            return None;
        }
        let mut q = cand.clone();
        for _ in 0..6 {
            let g = imbalance(&q);
            if g * side > 0.0 {
                return feasible(&q).then_some(q);
            }
            // aim slightly past the kink
            let t = -(g - side * 1e-13 * (1.0 + g.abs())) / rr;
            for (k, &v) in vars.iter().enumerate() {
                let x = get(&q, v) + t * r[k];
                set(&mut q, v, x);
            }
        }
        let g = imbalance(&q);
        (g * side > 0.0 && feasible(&q)).then_some(q)
    };

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut cur = start;
    let mut val = eval(&cur);
    let mut step = p.power_step;
    while step > 1e-10 {
        let mut improved = false;
        let g = imbalance(&cur);
        let side = if g < 0.0 { -1.0 } else { 1.0 };
        let r = if g.abs() < 1e-3 { repair_direction(&cur) } else { Vec::new() };
        let consider = |cand: PowerPolicy, cur: &mut PowerPolicy, val: &mut f64| {
            let v = eval(&cand);
            if v > *val {
                *cur = cand;
                *val = v;
                return true;
            }
            if !r.is_empty() && imbalance(&cand) * side <= 0.0 {
                if let Some(q) = pull_back(&cand, side, &r) {
                    let v = eval(&q);
                    if v > *val {
                        *cur = q;
                        *val = v;
                        return true;
                    }
                }
            }
            false
        };
        for a in 0..vars.len() {
            for b in 0..vars.len() {
                if a == b {
                    continue;
                }
                let (va, vb) = (vars[a], vars[b]);
                let (wa, wb) = (samples[va.0].weight, samples[vb.0].weight);
                let have = get(&cur, va);
                if have <= 0.0 {
                    continue;
                }
                // budget moved, in units of average power
                let moved = step.min(have * wa);
                let mut cand = cur.clone();
                set(&mut cand, va, (have - moved / wa).max(0.0));
                set(&mut cand, vb, get(&cur, vb) + moved / wb);
                if !within_cap(&cand, vb.0) {
                    continue;
                }
                improved |= consider(cand, &mut cur, &mut val);
            }
        }
        for _ in 0..2 * vars.len() {
            let mut d: Vec<f64> = vars.iter().map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            project(&mut d);
            let scale = d.iter().zip(&weights).map(|(a, b)| (a * b).abs()).fold(0.0, f64::max);
            if scale == 0.0 {
                continue;
            }
            let mut cand = cur.clone();
            for (k, &v) in vars.iter().enumerate() {
                set(&mut cand, v, get(&cur, v) + d[k] * step / scale);
            }
            if !feasible(&cand) {
                continue;
            }
            improved |= consider(cand, &mut cur, &mut val);
        }
        if !improved {
            step *= 0.5;
        }
    }
    (val, cur)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub ok: bool,
    /// Oracle objective minus the solver's objective.
    pub gap: f64,
    pub oracle_objective: f64,
    pub solver_objective: f64,
    /// Case-free objective of the solver's policy.
    pub policy_objective: f64,
    pub lattice_bound: f64,
}

/// Compares a solver report with the oracle optimum of the same problem.
pub fn certify(report: &SolveReport, p: &OracleProblem) -> Result<Certificate> {
    p.validate()?;
    if report.policy.len() != p.grid.len() {
        return Err(Error::invalid("report and oracle problem use different grids"));
    }
    let lambda = p.normalized_lambda();
    if (report.lambda.0 - lambda.0).abs() > 1e-12 || (report.lambda.1 - lambda.1).abs() > 1e-12 {
        return Err(Error::invalid("report and oracle problem use different weights"));
    }
    let power = report.policy.average_power(&p.grid);
    if power > p.qos.snr * (1.0 + 1e-6) + 1e-12 {
        return Err(Error::invalid("report policy exceeds the oracle power budget"));
    }
    let oracle = brute_force_point(p)?;
    Ok(certify_against(report, p, &oracle))
}

/// As [`certify`] with a precomputed oracle result.
pub fn certify_against(report: &SolveReport, p: &OracleProblem, oracle: &OracleResult) -> Certificate {
    let lambda = p.normalized_lambda();
    let (policy_objective, _) = policy_objective(&p.grid, &p.qos, lambda, &report.policy, p.objective);
    let solver_objective = report.objective();
    let gap = oracle.objective - solver_objective;
    Certificate {
        ok: gap <= 1e-3 + oracle.lattice_bound,
        gap,
        oracle_objective: oracle.objective,
        solver_objective,
        policy_objective,
        lattice_bound: oracle.lattice_bound,
    }
}

/// The explicit grids used for certification: one, two and three states.
pub fn builtin_grids() -> Vec<(&'static str, FadingGrid)> {
    let mk = |v: &[(f64, f64, f64)]| FadingGrid::explicit(v.iter().map(|&(m, e, w)| FadingSample::new(m, e, w)).collect()).expect("built-in grid is valid");
    vec![
        ("one-state", mk(&[(4.0, 1.0, 1.0)])),
        ("two-state", mk(&[(2.0, 0.5, 0.6), (0.5, 1.5, 0.4)])),
        ("three-state", mk(&[(3.0, 0.5, 0.4), (1.0, 1.2, 0.35), (0.4, 0.2, 0.25)])),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(z_m: f64, z_e: f64) -> FadingGrid {
        FadingGrid::explicit(vec![FadingSample::new(z_m, z_e, 1.0)]).unwrap()
    }

    #[test]
    fn single_state_confidential_only() {
        let q = QosConfig::from_beta(1.0, 0.5, 1.0).unwrap();
        let r = brute_force_point(&OracleProblem::new(single(4.0, 0.0), q, (0.0, 1.0), 1e-3)).unwrap();
        assert!((r.objective - 3f64.log2()).abs() < 2e-3, "{}", r.objective);
    }

    #[test]
    fn common_only_spends_nothing_on_confidential() {
        let (_, g) = builtin_grids().remove(2);
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        let r = brute_force_point(&OracleProblem::new(g, q, (1.0, 0.0), 0.05)).unwrap();
        assert!(r.policy.pairs.iter().all(|p| p.mu1 < 1e-6), "{:?}", r.policy);
    }

    #[test]
    fn guard_rejects_huge_lattices() {
        let (_, g) = builtin_grids().remove(2);
        let q = QosConfig::from_beta(1.0, 1.0, 0.5).unwrap();
        assert!(brute_force_point(&OracleProblem::new(g, q, (0.5, 0.5), 1e-3)).is_err());
    }

    #[test]
    fn rejects_non_explicit_or_large_grids() {
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        let g = crate::model::build_rayleigh_grid(1.0, 1.0, 4, GridMethod::Quadrature, None).unwrap();
        assert!(brute_force_point(&OracleProblem::new(g, q, (0.5, 0.5), 0.1)).is_err());
    }

    #[test]
    fn invariant_to_state_order() {
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        let a = FadingGrid::explicit(vec![FadingSample::new(2.0, 0.5, 0.6), FadingSample::new(0.5, 1.5, 0.4)]).unwrap();
        let b = FadingGrid::explicit(vec![FadingSample::new(0.5, 1.5, 0.4), FadingSample::new(2.0, 0.5, 0.6)]).unwrap();
        let ra = brute_force_point(&OracleProblem::new(a, q, (0.5, 0.5), 0.02)).unwrap();
        let rb = brute_force_point(&OracleProblem::new(b, q, (0.5, 0.5), 0.02)).unwrap();
        assert!((ra.objective - rb.objective).abs() < 1e-7, "{} {}", ra.objective, rb.objective);
    }

    #[test]
    fn nondecreasing_in_snr_and_cap() {
        let (_, g) = builtin_grids().remove(1);
        let q = QosConfig::from_beta(1.0, 0.5, 1.0).unwrap();
        let lo = brute_force_point(&OracleProblem::new(g.clone(), q, (0.5, 0.5), 0.02)).unwrap();
        let hi = brute_force_point(&OracleProblem::new(g.clone(), q.with_snr(1.0).unwrap(), (0.5, 0.5), 0.02)).unwrap();
        assert!(hi.objective >= lo.objective - 1e-7);
        let mut capped = OracleProblem::new(g, q, (0.5, 0.5), 0.02);
        capped.power_cap = 0.5;
        let c = brute_force_point(&capped).unwrap();
        assert!(lo.objective >= c.objective - 1e-7, "{} {} {:?} {:?}", lo.objective, c.objective, lo.policy, c.policy);
    }

    #[test]
    fn finer_lattice_within_bound() {
        let (_, g) = builtin_grids().remove(1);
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        let coarse = OracleProblem::new(g.clone(), q, (0.25, 0.75), 0.04);
        let fine = OracleProblem::new(g, q, (0.25, 0.75), 0.02);
        let (a, b) = (brute_force_point(&coarse).unwrap(), brute_force_point(&fine).unwrap());
        assert!(b.objective >= a.objective - fine.lattice_bound());
        assert!(b.lattice_objective >= a.lattice_objective - fine.lattice_bound());
    }
}
