//! The `verify` command: oracle certification and property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use secthru_core::effcap::effective_throughput_with_beta;
use secthru_core::model::{in_secure_set, FadingGrid, FadingSample, QosConfig};
use secthru_core::oracle::{brute_force_point, builtin_grids, certify_against, OracleProblem};
use secthru_core::outer::{master_pc_with, SolveReport, SolverOptions};
use secthru_core::region::{check_convexity, ergodic_limit_point, monotonicity_violation, sweep_boundary_with};

use crate::config::RunConfig;
use crate::CliError;

/// Deliberate defects for exercising the checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Fault {
    /// Evaluates the effective throughput with `-beta`.
    BetaSignFlip,
    /// Gives one state outside the secure set confidential power.
    ZcMu1,
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

const LAMBDA0: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

fn oracle_step(states: usize) -> f64 {
    match states {
        1 => 1e-3,
        2 => 1e-2,
        _ => 4e-2,
    }
}

fn summary(bad: &[String]) -> String {
    match bad.first() {
        None => String::new(),
        Some(b) => format!("; {} failing, first: {b}", bad.len()),
    }
}

pub fn run(cfg: &RunConfig, fault: Option<Fault>) -> Result<Vec<Check>, CliError> {
    let opts = cfg.solver_options();
    let mut reports: Vec<(FadingGrid, QosConfig, SolveReport)> = Vec::new();
    let mut checks = vec![oracle(&opts, &mut reports), ergodic(), theta_monotonicity(cfg, &opts)?, holder(cfg, fault)?];
    checks.push(convexity(cfg, &opts, &mut reports)?);
    if fault == Some(Fault::ZcMu1) {
        inject_zc_mu1(&mut reports);
    }
    checks.push(policy_invariants(&reports));
    Ok(checks)
}

fn oracle(opts: &SolverOptions, keep: &mut Vec<(FadingGrid, QosConfig, SolveReport)>) -> Check {
    let (mut worst, mut bad, mut n) = (f64::NEG_INFINITY, Vec::new(), 0);
    for (name, g) in builtin_grids() {
        for gamma in [0.5, 1.0, 2.0] {
            let q = QosConfig::from_beta(1.0, 1.0, gamma).expect("fixed parameters are valid");
            for l0 in LAMBDA0 {
                n += 1;
                let label = format!("{name} gamma={gamma} lambda0={l0}");
                let r = match master_pc_with(&g, &q, (l0, 1.0 - l0), opts, None) {
                    Ok(r) => r,
                    Err(e) => {
                        bad.push(format!("{label}: {e}"));
                        continue;
                    }
                };
                let p = OracleProblem::new(g.clone(), q, (l0, 1.0 - l0), oracle_step(g.len()));
                match brute_force_point(&p) {
                    Ok(o) => {
                        let c = certify_against(&r, &p, &o);
                        worst = worst.max(c.gap);
                        if !c.ok {
                            bad.push(format!("{label}: gap {:.3e}", c.gap));
                        }
                    }
                    Err(e) => bad.push(format!("{label}: oracle {e}")),
                }
                keep.push((g.clone(), q, r));
            }
        }
    }
    Check {
        name: "oracle certification",
        pass: bad.is_empty(),
        detail: format!("{n} points on the built-in grids, worst gap {worst:.2e}{}", summary(&bad)),
    }
}

fn ergodic() -> Check {
    let (mut worst, mut bad) = (0.0f64, Vec::new());
    for (name, g) in builtin_grids() {
        let q = QosConfig::from_beta(1e-8, 1.0, 1.0).expect("fixed parameters are valid");
        for l0 in LAMBDA0 {
            let lambda = (l0, 1.0 - l0);
            let oracle = brute_force_point(&OracleProblem::new(g.clone(), q, lambda, oracle_step(g.len())).ergodic());
            match (ergodic_limit_point(&g, &q, lambda), oracle) {
                (Ok(t), Ok(o)) => {
                    let d = (l0 * t.c0 + (1.0 - l0) * t.c1 - o.objective).abs();
                    worst = worst.max(d);
                    if d > 1e-3 {
                        bad.push(format!("{name} lambda0={l0}: |diff| {d:.3e}"));
                    }
                }
                (Err(e), _) | (_, Err(e)) => bad.push(format!("{name} lambda0={l0}: {e}")),
            }
        }
    }
    Check {
        name: "ergodic limit",
        pass: bad.is_empty(),
        detail: format!("beta = 1e-8 against the ergodic oracle, worst |diff| {worst:.2e}{}", summary(&bad)),
    }
}

/// The weighted objective at fixed weights cannot grow with `theta`, and no
/// effective throughput exceeds its mean rate.
fn theta_monotonicity(cfg: &RunConfig, opts: &SolverOptions) -> Result<Check, CliError> {
    let (mut worst, mut bad) = (0.0f64, Vec::new());
    for (name, g) in builtin_grids().into_iter().skip(1) {
        for l0 in LAMBDA0 {
            let mut prev: Option<f64> = None;
            for theta in [1e-6, 1e-4, 1e-2, 1.0] {
                let q = cfg.qos()?.with_theta(theta).map_err(|e| CliError::Config(e.to_string()))?;
                let label = format!("{name} lambda0={l0} theta={theta:e}");
                let r = match master_pc_with(&g, &q, (l0, 1.0 - l0), opts, None) {
                    Ok(r) => r,
                    Err(e) => {
                        bad.push(format!("{label}: {e}"));
                        continue;
                    }
                };
                let (t, e) = (r.terms, r.ergodic);
                if t.c01 > e.r01 + 1e-12 || t.c02 > e.r02 + 1e-12 || t.c1 > e.r1 + 1e-12 {
                    bad.push(format!("{label}: throughput above the mean rate"));
                }
                let obj = r.objective();
                if let Some(p) = prev {
                    worst = worst.max(obj - p);
                    if obj > p + 1e-9 {
                        bad.push(format!("{label}: objective rose by {:.3e}", obj - p));
                    }
                }
                prev = Some(obj);
            }
        }
    }
    Ok(Check {
        name: "theta monotonicity",
        pass: bad.is_empty(),
        detail: format!("theta in {{1e-6, 1e-4, 1e-2, 1}}, largest objective rise {worst:.2e}{}", summary(&bad)),
    })
}

fn holder(cfg: &RunConfig, fault: Option<Fault>) -> Result<Check, CliError> {
    let mut beta = cfg.qos()?.beta;
    if fault == Some(Fault::BetaSignFlip) {
        beta = -beta;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(2..=12);
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = w.iter().sum();
        let g = FadingGrid::explicit(w.iter().map(|w| FadingSample::new(1.0, 1.0, w / total)).collect()).map_err(|e| CliError::Numeric(e.to_string()))?;
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..6.0)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..6.0)).collect();
        let a = rng.random_range(0.0..=1.0);
        let mix: Vec<f64> = r.iter().zip(&s).map(|(x, y)| a * x + (1.0 - a) * y).collect();
        let c = |v: &[f64]| effective_throughput_with_beta(v, &g, beta).map_err(|e| CliError::Numeric(e.to_string()));
        worst = worst.max(a * c(&r)? + (1.0 - a) * c(&s)? - c(&mix)?);
    }
    Ok(Check {
        name: "Holder / time sharing",
        pass: worst <= 1e-12,
        detail: format!("100 random profile pairs at beta = {beta:.4e}, worst excess {worst:.2e}"),
    })
}

fn convexity(cfg: &RunConfig, opts: &SolverOptions, keep: &mut Vec<(FadingGrid, QosConfig, SolveReport)>) -> Result<Check, CliError> {
    let (g, q) = (cfg.grid()?, cfg.qos()?);
    let s = sweep_boundary_with(&g, &q, cfg.num_lambda, opts).map_err(|e| CliError::Config(e.to_string()))?;
    let c = check_convexity(&s);
    let mono = monotonicity_violation(&s.frontier());
    let failed = s.failed();
    for p in s.points {
        if let Ok(r) = p.report {
            keep.push((g.clone(), q, r));
        }
    }
    Ok(Check {
        name: "convexity",
        pass: c.ok && mono <= 1e-9 && failed == 0,
        detail: format!(
            "{} weights on the configured grid ({} states): max violation {:.2e}, monotonicity {mono:.2e}, failed {failed}",
            cfg.num_lambda,
            g.len(),
            c.max_violation
        ),
    })
}

fn inject_zc_mu1(reports: &mut [(FadingGrid, QosConfig, SolveReport)]) {
    for (g, q, r) in reports.iter_mut() {
        if let Some(i) = g.samples().iter().position(|s| !in_secure_set(s, q.gamma)) {
            r.policy.pairs[i].mu1 = 0.1;
            return;
        }
    }
}

fn policy_invariants(reports: &[(FadingGrid, QosConfig, SolveReport)]) -> Check {
    let mut bad = Vec::new();
    for (g, q, r) in reports {
        // validate() allows 1e-9 absolute slack; the solver meets the budget to 1e-6 relative
        if let Err(e) = r.policy.validate(g, q.gamma, q.snr * (1.0 + 1e-6)) {
            bad.push(format!("lambda0={}: {e}", r.lambda.0));
        }
        if r.power_gap.abs() > 1e-6 || r.phi_residual > 1e-8 {
            bad.push(format!("lambda0={}: power gap {:.2e}, phi residual {:.2e}", r.lambda.0, r.power_gap, r.phi_residual));
        }
    }
    Check {
        name: "policy invariants",
        pass: bad.is_empty(),
        detail: format!("{} policies: mu >= 0, mu1 = 0 off the secure set, power and phi residuals{}", reports.len(), summary(&bad)),
    }
}
