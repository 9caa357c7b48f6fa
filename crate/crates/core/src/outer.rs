//! Multiplier resolution for one boundary point and the master case selection.
//!
//! For fixed `(phi0, phi1)` the per-state allocations depend on the power
//! price `kappa` only through the thresholds `alpha1`, `alpha2`, and a common
//! rescaling of `kappa` and `phi` leaves them unchanged. The solver therefore
//! works with two scalars:
//!
//! - `t = ln(kappa) + (ln phi0 + ln phi1) / 2`, fixed by the power constraint;
//! - `x = ln(phi0 / phi1)`, fixed by the consistency condition
//!   `phi(policy) = phi`, which only constrains the ratio once `kappa` absorbs
//!   the scale.
//!
//! The inner loop solves the power equation in `t` by a bracketed root search,
//! the outer loop solves the ratio consistency equation in `x` the same way.
//! After convergence the scale of `phi` is fixed by the actual functionals of
//! the final policy and `kappa` is backed out from `t`.
//!
//! The master solver maximizes over both terms of the common-rate minimum.
//! When a term's unconstrained optimum violates its own condition, the point
//! lies on the kink `E{R01} = E{R02}`; it is found by a joint Newton
//! iteration on `(t, x, eta)` with the kink price `eta`, falling back to
//! nested bracketed searches when the residuals are not smooth enough.

use std::f64::consts::LN_2;
use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::effcap::{ln_phi_from_profiles, log_profiles, throughput_from_logs, PolicyThroughputs, ThroughputPair};
use crate::error::{Error, Result};
use crate::kink::{problem as kink_problem, Side};
use crate::kkt::{solve_state_unchecked, MultiplierSet};
use crate::model::{FadingGrid, QosConfig};
use crate::numeric::{brent, pairwise_sum, RootError, RootTol};
use crate::rates::{ergodic_rates, CaseSpec, ErgodicRates, PowerPair, PowerPolicy};

/// Which case of the three-case decomposition a boundary point falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CaseTag {
    I,
    II,
    IIIA,
    IIIB,
    IIIC,
}

impl fmt::Display for CaseTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CaseTag::I => "I",
            CaseTag::II => "II",
            CaseTag::IIIA => "IIIA",
            CaseTag::IIIB => "IIIB",
            CaseTag::IIIC => "IIIC",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for CaseTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" => Ok(CaseTag::I),
            "II" => Ok(CaseTag::II),
            "IIIA" => Ok(CaseTag::IIIA),
            "IIIB" => Ok(CaseTag::IIIB),
            "IIIC" => Ok(CaseTag::IIIC),
            _ => Err(Error::invalid(format!("unknown case tag {s:?}"))),
        }
    }
}

impl CaseTag {
    /// The optimization case whose policy a report with this tag carries.
    pub fn spec(&self, delta: Option<f64>) -> CaseSpec {
        match self {
            CaseTag::I | CaseTag::IIIA => CaseSpec::I,
            CaseTag::II | CaseTag::IIIB => CaseSpec::II,
            CaseTag::IIIC => CaseSpec::III(delta.unwrap_or(0.0)),
        }
    }
}

/// How the master solver settles the common-rate minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CaseSelection {
    /// Both sides of the minimum, each solved unconstrained or on the kink
    /// `E{R01} = E{R02}`, keeping the better one.
    #[default]
    Exact,
    /// Case I, then Case II, then the time-sharing search, accepting the
    /// first case whose condition holds.
    Sequential,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub selection: CaseSelection,
    /// Relative tolerance on the consumed power, `|E{mu0+mu1} - snr| / snr`.
    pub power_tol: f64,
    /// Componentwise relative tolerance on `phi(policy) = phi`.
    pub phi_tol: f64,
    pub max_kappa_iter: usize,
    pub max_phi_iter: usize,
    /// Relative tolerance for deciding `E{R01} = E{R02}`.
    pub case_tol: f64,
    /// Number of points of the fallback scan over `delta`.
    pub delta_scan: usize,
    /// Record per-iteration trace records in the report.
    pub trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            selection: CaseSelection::Exact,
            power_tol: 1e-6,
            phi_tol: 1e-8,
            max_kappa_iter: 200,
            max_phi_iter: 500,
            case_tol: 1e-6,
            delta_scan: 33,
            trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IterationCounts {
    /// Policy evaluations spent on the power equation.
    pub kappa: usize,
    /// Evaluations of the `phi` consistency map.
    pub phi: usize,
    /// Case solves spent in the time-sharing search.
    pub delta: usize,
}

impl IterationCounts {
    fn add(&mut self, o: IterationCounts) {
        self.kappa += o.kappa;
        self.phi += o.phi;
        self.delta += o.delta;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub kappa: f64,
    pub phi0: f64,
    pub phi1: f64,
    /// `(E{mu0+mu1} - snr) / snr` at this iterate.
    pub power_gap: f64,
}

/// Starting point for the multiplier search, taken from a nearby solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarmStart {
    pub ln_scale: f64,
    pub ln_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    /// Normalized weights `(lambda0, lambda1)`, summing to one.
    pub lambda: (f64, f64),
    pub case: CaseTag,
    /// The optimization case that produced `policy`.
    pub spec: CaseSpec,
    pub delta: Option<f64>,
    /// Charged side and price of the constraint `E{R01} = E{R02}` for points
    /// on the kink; the price is in units of `kappa`.
    pub kink: Option<(Side, f64)>,
    /// Set when any `delta` is optimal (no common-message weight).
    pub degenerate: bool,
    pub policy: PowerPolicy,
    pub multipliers: MultiplierSet,
    pub throughput: ThroughputPair,
    pub terms: PolicyThroughputs,
    pub ergodic: ErgodicRates,
    pub power_used: f64,
    /// `(power_used - snr) / snr`, zero when `snr = 0`.
    pub power_gap: f64,
    /// `max_i |phi_i(policy) / phi_i - 1|`.
    pub phi_residual: f64,
    pub iterations: IterationCounts,
    pub trace: Vec<TraceRecord>,
    pub warm: WarmStart,
}

impl SolveReport {
    pub fn objective(&self) -> f64 {
        self.lambda.0 * self.throughput.c0 + self.lambda.1 * self.throughput.c1
    }
}

fn normalize_lambda(lambda: (f64, f64)) -> Result<(f64, f64)> {
    let (l0, l1) = lambda;
    if !(l0 >= 0.0 && l1 >= 0.0 && l0.is_finite() && l1.is_finite()) || l0 + l1 <= 0.0 {
        return Err(Error::invalid(format!("weights must be nonnegative with a positive sum, got ({l0}, {l1})")));
    }
    let s = l0 + l1;
    Ok((l0 / s, l1 / s))
}

struct CaseSolver<'a> {
    grid: &'a FadingGrid,
    qos: &'a QosConfig,
    case: CaseSpec,
    lambda: (f64, f64),
    opts: &'a SolverOptions,
    /// `ln(ln2 / lambda_i)`.
    k0: f64,
    k1: f64,
    pairs: Vec<PowerPair>,
    spent: Vec<f64>,
    counts: IterationCounts,
    trace: Vec<TraceRecord>,
    t: f64,
    /// Kink price: per-state solves use the kink Lagrangian of the side
    /// matching `case`.
    kink: Option<(Side, f64)>,
    /// Follow each state's local maximizer from the previous allocation
    /// instead of solving the kink problem globally.
    track: bool,
    /// Remaining per-state solves before the solve is abandoned.
    budget: usize,
}

const T_LIMIT: f64 = 700.0;

impl<'a> CaseSolver<'a> {
    fn new(grid: &'a FadingGrid, qos: &'a QosConfig, case: CaseSpec, lambda: (f64, f64), opts: &'a SolverOptions) -> Self {
        let k = |l: f64| if l > 0.0 { (LN_2 / l).ln() } else { f64::INFINITY };
        CaseSolver {
            grid,
            qos,
            case,
            lambda,
            opts,
            k0: k(lambda.0),
            k1: k(lambda.1),
            pairs: vec![PowerPair::ZERO; grid.len()],
            spent: vec![0.0; grid.len()],
            counts: IterationCounts::default(),
            trace: Vec::new(),
            t: 0.0,
            kink: None,
            track: false,
            budget: usize::MAX,
        }
    }

    fn alphas(&self, t: f64, x: f64) -> (f64, f64) {
        let a = |ln: f64| if ln.is_infinite() { f64::INFINITY } else { ln.exp().max(f64::MIN_POSITIVE) };
        (a(t + 0.5 * x + self.k0), a(t - 0.5 * x + self.k1))
    }

    /// Fills `pairs` with the per-state solution and returns the relative
    /// power gap.
    fn spend(&mut self, t: f64, x: f64) -> Result<f64> {
        self.counts.kappa += 1;
        if self.budget < self.grid.len() {
            return Err(Error::numeric(format!("case {:?} solve at lambda = {:?}", self.case, self.lambda), "evaluation budget exhausted", f64::NAN));
        }
        self.budget -= self.grid.len();
        let (a1, a2) = self.alphas(t, x);
        let (beta, gamma) = (self.qos.beta, self.qos.gamma);
        for (i, s) in self.grid.samples().iter().enumerate() {
            let p = match self.kink {
                Some((side, eta)) => {
                    let pr = kink_problem(s, a1, a2, side, eta, beta, gamma);
                    if self.track {
                        pr.polish(self.pairs[i])
                    } else {
                        pr.global()
                    }
                }
                None => solve_state_unchecked(s, a1, a2, self.case, beta, gamma)?.pair,
            };
            self.pairs[i] = p;
            self.spent[i] = s.weight * (p.mu0 + p.mu1);
        }
        Ok(pairwise_sum(&self.spent) / self.qos.snr - 1.0)
    }

    fn root_failure(&self, what: &str, e: RootError) -> Error {
        let (detail, residual) = match e {
            RootError::NotBracketed { fa, fb } => (format!("{what}: no sign change ({fa:e}, {fb:e})"), fa.abs().min(fb.abs())),
            RootError::NotConverged { x, fx } => (format!("{what}: iteration cap reached at {x:e}"), fx.abs()),
            RootError::NonFinite { x } => (format!("{what}: non-finite value at {x:e}"), f64::NAN),
        };
        Error::numeric(format!("case {:?} solve at lambda = {:?}", self.case, self.lambda), detail, residual)
    }

    /// Solves the power equation in `t` at fixed ratio `x`, starting from the
    /// last solution. Leaves the matching policy in `pairs`.
    fn solve_power(&mut self, x: f64) -> Result<f64> {
        let mut t0 = self.t;
        let mut h0 = self.spend(t0, x)?;
        if h0 == 0.0 {
            return Ok(0.0);
        }
        // gap is nonincreasing in t: walk towards the sign change
        let dir = h0.signum();
        let mut step = 0.25;
        let (mut t1, mut h1);
        loop {
            t1 = (t0 + dir * step).clamp(-T_LIMIT, T_LIMIT);
            h1 = self.spend(t1, x)?;
            if h1 == 0.0 {
                self.t = t1;
                return Ok(0.0);
            }
            if h1.signum() != h0.signum() {
                break;
            }
            if t1.abs() >= T_LIMIT || self.counts.kappa > self.opts.max_kappa_iter * 4 {
                return Err(Error::numeric(
                    format!("case {:?} solve at lambda = {:?}", self.case, self.lambda),
                    "the power budget cannot be met by any power price",
                    h1.abs(),
                ));
            }
            t0 = t1;
            h0 = h1;
            step *= 2.0;
        }
        let mut err = None;
        let max_iter = self.opts.max_kappa_iter;
        let root = {
            let f = |t: f64| match self.spend(t, x) {
                Ok(h) => h,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            };
            brent(
                f,
                t0,
                t1,
                h0,
                h1,
                RootTol {
                    x_abs: 0.0,
                    f_abs: 1e-14,
                    max_iter,
                },
            )
        };
        if let Some(e) = err {
            return Err(e);
        }
        let root = root.map_err(|e| self.root_failure("power equation", e))?;
        // brent may have evaluated elsewhere last
        let h = self.spend(root.x, x)?;
        self.t = root.x;
        if !(h.abs() <= self.opts.power_tol) {
            return Err(Error::numeric(
                format!("case {:?} solve at lambda = {:?}", self.case, self.lambda),
                format!("consumed power jumps across the budget at ln-scale {:e}", root.x),
                h.abs(),
            ));
        }
        Ok(h)
    }

    fn ln_phi(&self) -> (f64, f64) {
        let policy = PowerPolicy { pairs: self.pairs.clone() };
        let lp = log_profiles(self.grid, &policy, self.qos.gamma);
        ln_phi_from_profiles(&lp, self.qos.beta, self.case)
    }

    /// Ratio consistency map: `ln(phi0/phi1)` of the policy at ratio `x`,
    /// minus `x`.
    fn ratio_gap(&mut self, x: f64) -> Result<f64> {
        self.counts.phi += 1;
        let h = self.solve_power(x)?;
        let (l0, l1) = self.ln_phi();
        let gap = (l0 - l1) - x;
        if self.opts.trace {
            let (lp0, lp1) = (l0 - 0.5 * gap, l1 + 0.5 * gap);
            self.trace.push(TraceRecord {
                iteration: self.counts.phi,
                kappa: (self.t + 0.5 * x - lp0).exp(),
                phi0: lp0.exp(),
                phi1: lp1.exp(),
                power_gap: h,
            });
        }
        Ok(gap)
    }

    fn solve_ratio(&mut self, x0: f64) -> Result<f64> {
        // the policy depends on x only when both streams carry weight
        if !(self.lambda.0 > 0.0 && self.lambda.1 > 0.0) {
            let h = self.solve_power(0.0)?;
            if self.opts.trace {
                let (l0, l1) = self.ln_phi();
                let lp = if self.lambda.0 > 0.0 { l0 } else { l1 };
                self.trace.push(TraceRecord {
                    iteration: 1,
                    kappa: (self.t - lp).exp(),
                    phi0: l0.exp(),
                    phi1: l1.exp(),
                    power_gap: h,
                });
            }
            self.counts.phi += 1;
            return Ok(0.0);
        }
        // 2 |gap| bounds the componentwise residual after rescaling
        let tol = 0.5 * self.opts.phi_tol * 1e-2;
        let g0 = self.ratio_gap(x0)?;
        if g0.abs() <= tol {
            return Ok(x0);
        }
        // the gap tends to -inf as x -> inf and to +inf as x -> -inf
        let (mut xa, mut ga) = (x0, g0);
        let mut step = g0.abs().max(1e-3);
        let (xb, gb) = loop {
            let xb = xa + step.copysign(ga);
            let gb = self.ratio_gap(xb)?;
            if gb.abs() <= tol {
                return Ok(xb);
            }
            if gb.signum() != ga.signum() {
                break (xb, gb);
            }
            if self.counts.phi >= self.opts.max_phi_iter {
                return Err(Error::numeric(
                    format!("case {:?} solve at lambda = {:?}", self.case, self.lambda),
                    "phi fixed point not bracketed within the iteration cap",
                    gb.abs(),
                ));
            }
            xa = xb;
            ga = gb;
            step *= 2.0;
        };
        let mut err = None;
        let remaining = self.opts.max_phi_iter.saturating_sub(self.counts.phi);
        let root = {
            let f = |x: f64| match self.ratio_gap(x) {
                Ok(g) => g,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            };
            brent(f, xa, xb, ga, gb, RootTol { x_abs: 0.0, f_abs: tol, max_iter: remaining })
        };
        if let Some(e) = err {
            return Err(e);
        }
        let root = root.map_err(|e| self.root_failure("phi fixed point", e))?;
        // re-establish the policy of the accepted iterate
        self.ratio_gap(root.x)?;
        Ok(root.x)
    }

    fn run(mut self, warm: Option<WarmStart>) -> Result<SolveReport> {
        if let Some(w) = warm {
            self.t = w.ln_scale;
        }
        let x0 = warm.map_or(0.0, |w| w.ln_ratio);
        let x = self.solve_ratio(x0)?;
        self.finish(x)
    }

    /// Report for the allocation currently in `pairs`, computed at `(t, x)`.
    fn finish(mut self, x: f64) -> Result<SolveReport> {
        let policy = PowerPolicy { pairs: std::mem::take(&mut self.pairs) };
        let lp = log_profiles(self.grid, &policy, self.qos.gamma);
        let (l0, l1) = ln_phi_from_profiles(&lp, self.qos.beta, self.case);
        let (lp0, lp1, ln_kappa) = match (self.lambda.0 > 0.0, self.lambda.1 > 0.0) {
            (true, true) => {
                let gap = (l0 - l1) - x;
                let (lp0, lp1) = (l0 - 0.5 * gap, l1 + 0.5 * gap);
                (lp0, lp1, self.t + 0.5 * x - lp0)
            }
            (true, false) => (l0, l1, self.t - l0),
            _ => (l0, l1, self.t - l1),
        };
        let phi_residual = ((l0 - lp0).exp_m1().abs()).max((l1 - lp1).exp_m1().abs());
        let (alpha1, alpha2) = self.alphas(self.t, x);
        let multipliers = MultiplierSet {
            kappa: ln_kappa.exp(),
            phi0: lp0.exp(),
            phi1: lp1.exp(),
            lambda0: self.lambda.0,
            lambda1: self.lambda.1,
            alpha1,
            alpha2,
        };
        let beta = self.qos.beta;
        let terms = PolicyThroughputs {
            c01: throughput_from_logs(&lp.weights, &lp.main, beta),
            c02: throughput_from_logs(&lp.weights, &lp.eve, beta),
            c1: throughput_from_logs(&lp.weights, &lp.conf, beta),
        };
        let power_used = policy.average_power(self.grid);
        let ergodic = ergodic_rates(self.grid, &policy, self.qos.gamma)?;
        Ok(SolveReport {
            lambda: self.lambda,
            case: match self.case {
                CaseSpec::I => CaseTag::I,
                CaseSpec::II => CaseTag::II,
                CaseSpec::III(_) => CaseTag::IIIC,
            },
            spec: self.case,
            delta: match self.case {
                CaseSpec::III(d) => Some(d),
                _ => None,
            },
            kink: self.kink,
            degenerate: false,
            throughput: ThroughputPair {
                c0: common_throughput(&terms, self.case),
                c1: terms.c1,
            },
            terms,
            ergodic,
            policy,
            multipliers,
            power_used,
            power_gap: power_used / self.qos.snr - 1.0,
            phi_residual,
            iterations: self.counts,
            trace: self.trace,
            warm: WarmStart { ln_scale: self.t, ln_ratio: x },
        })
    }
}

impl CaseSolver<'_> {
    /// Replaces tracked allocations that are beaten by the global per-state
    /// maximizer at `(t, x)`; returns how many states switched.
    fn globalize(&mut self, t: f64, x: f64) -> usize {
        let Some((side, eta)) = self.kink else { return 0 };
        let (a1, a2) = self.alphas(t, x);
        let (beta, gamma) = (self.qos.beta, self.qos.gamma);
        let mut switched = 0;
        for (i, s) in self.grid.samples().iter().enumerate() {
            let pr = kink_problem(s, a1, a2, side, eta, beta, gamma);
            let g = pr.global();
            let (vg, vt) = (pr.objective(g), pr.objective(self.pairs[i]));
            if vg > vt + 1e-12 * (1.0 + vt.abs()) {
                self.pairs[i] = g;
                switched += 1;
            }
        }
        switched
    }

    /// Kink residuals at `y = (t, x, eta)`: relative power gap, ratio
    /// consistency gap and the relative common-rate excess shifted so that
    /// the root lies just inside the feasible side.
    fn kink_residuals(&mut self, side: Side, y: [f64; 3], scale: f64) -> Result<[f64; 3]> {
        self.kink = Some((side, y[2]));
        let h = self.spend(y[0], y[1])?;
        let (l0, l1) = self.ln_phi();
        let gap = if self.lambda.1 > 0.0 { (l0 - l1) - y[1] } else { 0.0 };
        let policy = PowerPolicy { pairs: self.pairs.clone() };
        let e = ergodic_rates(self.grid, &policy, self.qos.gamma)?;
        let ex = match side {
            Side::Main => e.r01 - e.r02,
            Side::Second => e.r02 - e.r01,
        };
        Ok([h, gap, ex / scale + KINK_MARGIN])
    }

    /// Joint Newton iteration on `(t, x, eta)` with tracked per-state
    /// allocations and a global per-state check after convergence. Leaves
    /// the final allocation in `pairs`, `t` and `eta` in place and returns
    /// `x`.
    fn kink_newton(&mut self, side: Side, start: &SolveReport, scale: f64) -> Result<f64> {
        let lam = self.lambda;
        let fail = move |detail: String, residual: f64| Error::numeric(format!("kink solve at lambda = {lam:?}"), detail, residual);
        self.track = true;
        self.pairs = start.policy.pairs.clone();
        let both = self.lambda.1 > 0.0;
        let idx: Vec<usize> = if both { vec![0, 1, 2] } else { vec![0, 2] };
        let tol = [1e-11, 0.5e-2 * self.opts.phi_tol];
        // relative excess within [-2, 0] margins; an exact tie is accepted
        let settled = |f: &[f64; 3]| f[0].abs() <= tol[0] && (!both || f[1].abs() <= tol[1]) && f[2] >= -KINK_MARGIN && f[2] <= KINK_MARGIN;
        let unit = 1.0 / start.multipliers.alpha1;
        let mut y = [start.warm.ln_scale, if both { start.warm.ln_ratio } else { 0.0 }, 0.0];
        let merit = |f: &[f64; 3]| idx.iter().map(|&i| f[i] * f[i]).sum::<f64>();
        let mut f = self.kink_residuals(side, y, scale)?;
        let mut rounds = 0;
        for _ in 0..60 {
            self.counts.phi += 1;
            if settled(&f) {
                self.kink = Some((side, y[2]));
                let tracked = self.pairs.clone();
                if self.globalize(y[0], y[1]) == 0 {
                    self.t = y[0];
                    return Ok(y[1]);
                }
                rounds += 1;
                if rounds > 5 {
                    // some state keeps flipping between two branches; the
                    // tracked allocation is feasible and kept
                    self.pairs = tracked;
                    self.t = y[0];
                    return Ok(y[1]);
                }
                f = self.kink_residuals(side, y, scale)?;
                continue;
            }
            let base = self.pairs.clone();
            let n = idx.len();
            let mut jac = DMatrix::zeros(n, n);
            for (c, &j) in idx.iter().enumerate() {
                let step = match j {
                    2 => 1e-7 * y[2].max(unit),
                    _ => 1e-7,
                };
                let mut yj = y;
                yj[j] += step;
                let fj = self.kink_residuals(side, yj, scale)?;
                self.pairs.clone_from(&base);
                for (r, &i) in idx.iter().enumerate() {
                    jac[(r, c)] = (fj[i] - f[i]) / step;
                }
            }
            let rhs = DVector::from_iterator(n, idx.iter().map(|&i| -f[i]));
            let Some(d) = jac.lu().solve(&rhs) else {
                return Err(fail("singular Jacobian".into(), merit(&f).sqrt()));
            };
            let m0 = merit(&f);
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let mut yn = y;
                for (c, &j) in idx.iter().enumerate() {
                    yn[j] += lambda * d[c];
                }
                yn[2] = yn[2].max(0.0);
                let fnew = self.kink_residuals(side, yn, scale)?;
                if merit(&fnew) < m0 {
                    y = yn;
                    f = fnew;
                    accepted = true;
                    break;
                }
                self.pairs.clone_from(&base);
                lambda *= 0.5;
            }
            if !accepted {
                // stalled at the noise floor of the residuals: accept a
                // looser settlement, a tie well inside `case_tol`
                let near = f[0].abs() <= 1e-9 && (!both || f[1].abs() <= tol[1]) && f[2].abs() <= 1e-9;
                self.kink = Some((side, y[2]));
                if near && self.globalize(y[0], y[1]) == 0 {
                    self.t = y[0];
                    return Ok(y[1]);
                }
                return Err(fail("Newton step makes no progress".into(), m0.sqrt()));
            }
        }
        Err(fail("Newton iteration did not settle".into(), merit(&f).sqrt()))
    }
}

/// Target of the relative common-rate excess on the kink.
const KINK_MARGIN: f64 = 1e-11;

/// Common-message throughput the case attributes to a policy; the mixed case
/// time-shares the two terms.
fn common_throughput(terms: &PolicyThroughputs, case: CaseSpec) -> f64 {
    match case {
        CaseSpec::I => terms.c01,
        CaseSpec::II => terms.c02,
        CaseSpec::III(d) => d * terms.c01 + (1.0 - d) * terms.c02,
    }
}

fn zero_report(grid: &FadingGrid, lambda: (f64, f64), case: CaseSpec) -> SolveReport {
    let policy = PowerPolicy::zeros(grid.len());
    SolveReport {
        lambda,
        case: match case {
            CaseSpec::I => CaseTag::I,
            CaseSpec::II => CaseTag::II,
            CaseSpec::III(_) => CaseTag::IIIC,
        },
        spec: case,
        delta: match case {
            CaseSpec::III(d) => Some(d),
            _ => None,
        },
        kink: None,
        degenerate: false,
        policy,
        multipliers: MultiplierSet {
            kappa: f64::INFINITY,
            phi0: 1.0,
            phi1: 1.0,
            lambda0: lambda.0,
            lambda1: lambda.1,
            alpha1: f64::INFINITY,
            alpha2: f64::INFINITY,
        },
        throughput: ThroughputPair { c0: 0.0, c1: 0.0 },
        terms: PolicyThroughputs { c01: 0.0, c02: 0.0, c1: 0.0 },
        ergodic: ErgodicRates { r01: 0.0, r02: 0.0, r1: 0.0 },
        power_used: 0.0,
        power_gap: 0.0,
        phi_residual: 0.0,
        iterations: IterationCounts::default(),
        trace: Vec::new(),
        warm: WarmStart { ln_scale: 0.0, ln_ratio: 0.0 },
    }
}

/// Optimal policy of one case for the weights `lambda` (normalized to sum to
/// one), with the power constraint met with equality.
pub fn solve_case(grid: &FadingGrid, qos: &QosConfig, lambda: (f64, f64), case: CaseSpec) -> Result<SolveReport> {
    solve_case_with(grid, qos, lambda, case, &SolverOptions::default(), None)
}

pub fn solve_case_with(
    grid: &FadingGrid,
    qos: &QosConfig,
    lambda: (f64, f64),
    case: CaseSpec,
    opts: &SolverOptions,
    warm: Option<WarmStart>,
) -> Result<SolveReport> {
    case.validate()?;
    let lambda = normalize_lambda(lambda)?;
    if grid.is_empty() {
        return Err(Error::invalid("empty fading grid"));
    }
    if !(qos.beta > 0.0) {
        return Err(Error::invalid("the QoS exponent must be positive"));
    }
    if qos.snr == 0.0 {
        return Ok(zero_report(grid, lambda, case));
    }
    CaseSolver::new(grid, qos, case, lambda, opts).run(warm)
}

fn rel_tie(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Boundary point for the weights `lambda`: the maximizer of
/// `lambda0 C0 + lambda1 C1` with the common rate limited by the weaker
/// receiver. The case selection follows `SolverOptions::selection`.
pub fn master_pc(grid: &FadingGrid, qos: &QosConfig, lambda: (f64, f64)) -> Result<SolveReport> {
    master_pc_with(grid, qos, lambda, &SolverOptions::default(), None)
}

pub fn master_pc_with(
    grid: &FadingGrid,
    qos: &QosConfig,
    lambda: (f64, f64),
    opts: &SolverOptions,
    warm: Option<WarmStart>,
) -> Result<SolveReport> {
    let lambda = normalize_lambda(lambda)?;
    if lambda.0 == 0.0 || qos.snr == 0.0 {
        // no common message: every case yields the same policy
        let mut r = solve_case_with(grid, qos, lambda, CaseSpec::III(0.0), opts, warm)?;
        r.case = CaseTag::IIIC;
        r.degenerate = true;
        return Ok(r);
    }
    match opts.selection {
        CaseSelection::Exact => master_exact(grid, qos, lambda, opts, warm),
        CaseSelection::Sequential => master_sequential(grid, qos, lambda, opts, warm),
    }
}

fn master_sequential(
    grid: &FadingGrid,
    qos: &QosConfig,
    lambda: (f64, f64),
    opts: &SolverOptions,
    warm: Option<WarmStart>,
) -> Result<SolveReport> {
    let mut counts = IterationCounts::default();
    let mut r1 = solve_case_with(grid, qos, lambda, CaseSpec::I, opts, warm)?;
    counts.add(r1.iterations);
    let e = r1.ergodic;
    if !rel_tie(e.r01, e.r02, opts.case_tol) {
        if e.r01 < e.r02 {
            r1.iterations = counts;
            return Ok(r1);
        }
    } else if r1.terms.c01 > r1.terms.c02 {
        r1.case = CaseTag::IIIA;
        r1.iterations = counts;
        return Ok(r1);
    }
    let mut r2 = solve_case_with(grid, qos, lambda, CaseSpec::II, opts, Some(r1.warm))?;
    counts.add(r2.iterations);
    let e = r2.ergodic;
    if !rel_tie(e.r01, e.r02, opts.case_tol) {
        if e.r01 > e.r02 {
            r2.iterations = counts;
            return Ok(r2);
        }
    } else if r2.terms.c01 < r2.terms.c02 {
        r2.case = CaseTag::IIIB;
        r2.iterations = counts;
        return Ok(r2);
    }
    let mut r3 = search_delta(grid, qos, lambda, opts, r1, r2)?;
    counts.add(r3.iterations);
    r3.iterations = counts;
    Ok(r3)
}

/// Time-sharing search of Case III-C: finds `delta` in `[0, 1]` at which the
/// Case III policy balances the two ergodic common-rate terms.
pub fn delta_search(grid: &FadingGrid, qos: &QosConfig, lambda: (f64, f64)) -> Result<(f64, SolveReport)> {
    let opts = SolverOptions::default();
    let r1 = solve_case_with(grid, qos, lambda, CaseSpec::I, &opts, None)?;
    let r2 = solve_case_with(grid, qos, lambda, CaseSpec::II, &opts, Some(r1.warm))?;
    let r = search_delta(grid, qos, normalize_lambda(lambda)?, &opts, r1, r2)?;
    Ok((r.delta.unwrap_or(0.0), r))
}

/// `E{R01} - E{R02}` of a report.
fn imbalance(r: &SolveReport) -> f64 {
    r.ergodic.r01 - r.ergodic.r02
}

fn balanced(r: &SolveReport, opts: &SolverOptions) -> bool {
    rel_tie(r.ergodic.r01, r.ergodic.r02, opts.case_tol)
}

/// Reached only when Case I leaves `E{R01} >= E{R02}` and Case II leaves
/// `E{R01} <= E{R02}`, so the imbalance changes sign between `delta = 1` and
/// `delta = 0`. The scan covers the degenerate situation where it does not.
fn search_delta(
    grid: &FadingGrid,
    qos: &QosConfig,
    lambda: (f64, f64),
    opts: &SolverOptions,
    r1: SolveReport,
    r2: SolveReport,
) -> Result<SolveReport> {
    let mut counts = IterationCounts::default();
    let mut solve = |delta: f64, warm: WarmStart| -> Result<SolveReport> {
        let r = solve_case_with(grid, qos, lambda, CaseSpec::III(delta), opts, Some(warm))?;
        counts.add(r.iterations);
        counts.delta += 1;
        Ok(r)
    };
    let tag = |mut r: SolveReport, counts: IterationCounts| {
        r.case = CaseTag::IIIC;
        r.iterations = counts;
        r
    };
    // the endpoint policies coincide with the Case I and II solves
    let as_case3 = |mut r: SolveReport, delta: f64| {
        r.spec = CaseSpec::III(delta);
        r.delta = Some(delta);
        r.throughput.c0 = common_throughput(&r.terms, r.spec);
        r
    };
    if balanced(&r1, opts) {
        return Ok(tag(as_case3(r1, 1.0), counts));
    }
    if balanced(&r2, opts) {
        return Ok(tag(as_case3(r2, 0.0), counts));
    }
    let (h1, h0) = (imbalance(&r1), imbalance(&r2));
    let mut bracket = None;
    if h0.signum() != h1.signum() {
        bracket = Some(((0.0, h0, r2.warm), (1.0, h1, r1.warm)));
    } else {
        let n = opts.delta_scan.max(3);
        let mut prev = (0.0, h0, r2.warm);
        let mut profile = vec![(0.0, h0)];
        for k in 1..n {
            let d = k as f64 / (n - 1) as f64;
            let (h, w) = if k == n - 1 {
                (h1, r1.warm)
            } else {
                let r = solve(d, prev.2)?;
                if balanced(&r, opts) {
                    return Ok(tag(r, counts));
                }
                (imbalance(&r), r.warm)
            };
            profile.push((d, h));
            if h.signum() != prev.1.signum() {
                bracket = Some((prev, (d, h, w)));
                break;
            }
            prev = (d, h, w);
        }
        if bracket.is_none() {
            let shown: Vec<String> = profile.iter().map(|(d, h)| format!("{d:.4}:{h:.3e}")).collect();
            return Err(Error::numeric(
                format!("time-sharing search at lambda = {lambda:?}"),
                format!("E{{R01}} - E{{R02}} keeps its sign over the scan [{}]", shown.join(", ")),
                profile.iter().map(|p| p.1.abs()).fold(f64::INFINITY, f64::min),
            ));
        }
    }
    let ((da, ha, wa), (db, hb, _)) = bracket.unwrap();
    let mut err = None;
    let mut best: Option<SolveReport> = None;
    let mut warm = wa;
    let f_abs = 0.1 * opts.case_tol * r1.ergodic.r01.abs().max(r2.ergodic.r02.abs());
    let root = {
        let f = |d: f64| match solve(d, warm) {
            Ok(r) => {
                let h = imbalance(&r);
                warm = r.warm;
                if best.as_ref().is_none_or(|b| h.abs() < imbalance(b).abs()) {
                    best = Some(r);
                }
                h
            }
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        };
        brent(f, da, db, ha, hb, RootTol { x_abs: 1e-15, f_abs, max_iter: 100 })
    };
    if let Some(e) = err {
        return Err(e);
    }
    if let Err(e) = root {
        let (detail, residual) = match e {
            RootError::NotConverged { x, fx } => (format!("no balance found near delta = {x}"), fx.abs()),
            other => (format!("{other:?}"), f64::NAN),
        };
        return Err(Error::numeric(format!("time-sharing search at lambda = {lambda:?}"), detail, residual));
    }
    // brent's last iterate is its best; keep the best seen in any case
    let r = best.expect("brent evaluates at least once on a strict bracket");
    if !balanced(&r, opts) {
        return Err(Error::numeric(
            format!("time-sharing search at lambda = {lambda:?}"),
            "the common-rate imbalance jumps across zero",
            imbalance(&r).abs(),
        ));
    }
    Ok(tag(r, counts))
}

fn solve_kink_with(
    grid: &FadingGrid,
    qos: &QosConfig,
    lambda: (f64, f64),
    side: Side,
    eta: f64,
    opts: &SolverOptions,
    warm: Option<WarmStart>,
    budget: &mut usize,
) -> Result<SolveReport> {
    let case = match side {
        Side::Main => CaseSpec::I,
        Side::Second => CaseSpec::II,
    };
    let mut s = CaseSolver::new(grid, qos, case, lambda, opts);
    s.kink = Some((side, eta));
    s.budget = *budget;
    let r = s.run(warm);
    *budget = budget.saturating_sub(r.as_ref().map_or(*budget, |r| r.iterations.kappa * grid.len()));
    r
}

/// Charged common term minus the other one; positive when the side's own
/// condition fails.
fn excess(r: &SolveReport, side: Side) -> f64 {
    match side {
        Side::Main => r.ergodic.r01 - r.ergodic.r02,
        Side::Second => r.ergodic.r02 - r.ergodic.r01,
    }
}

/// Kink point of one side by the joint Newton iteration.
fn kink_side_fast(
    grid: &FadingGrid,
    qos: &QosConfig,
    lambda: (f64, f64),
    side: Side,
    opts: &SolverOptions,
    start: &SolveReport,
) -> Result<SolveReport> {
    let scale = start.ergodic.r01.abs().max(start.ergodic.r02.abs());
    let case = match side {
        Side::Main => CaseSpec::I,
        Side::Second => CaseSpec::II,
    };
    let mut s = CaseSolver::new(grid, qos, case, lambda, opts);
    let x = s.kink_newton(side, start, scale)?;
    s.finish(x)
}

/// Per-state solves the nested kink search may spend.
const KINK_FALLBACK_WORK: usize = 200_000;

/// Kink point of one side by nested bracketed searches on `eta`, `x` and `t`
/// with globally solved states. Slower than [`kink_side_fast`] but does not
/// rely on smooth residuals.
fn kink_side(
    grid: &FadingGrid,
    qos: &QosConfig,
    lambda: (f64, f64),
    side: Side,
    opts: &SolverOptions,
    start: &SolveReport,
) -> Result<SolveReport> {
    let scale = start.ergodic.r01.abs().max(start.ergodic.r02.abs());
    let mut counts = IterationCounts::default();
    let mut budget = KINK_FALLBACK_WORK;
    let mut solve = |eta: f64, warm: WarmStart| -> Result<SolveReport> {
        let r = solve_kink_with(grid, qos, lambda, side, eta, opts, Some(warm), &mut budget)?;
        counts.add(r.iterations);
        counts.delta += 1;
        Ok(r)
    };
    let unit = 1.0 / start.multipliers.alpha1;
    let mut lo = (0.0, excess(start, side), start.warm);
    let mut eta = 0.1 * unit;
    let hi = loop {
        let r = solve(eta, lo.2)?;
        let e = excess(&r, side);
        if e <= 0.0 {
            break (eta, e, r);
        }
        if eta > 1e8 * unit {
            return Err(Error::numeric(format!("kink search at lambda = {lambda:?}"), "the common-rate excess stays positive", e));
        }
        lo = (eta, e, r.warm);
        eta *= 2.0;
    };
    let mut best = hi.2;
    let mut err = None;
    let mut warm = lo.2;
    let f_abs = 1e-3 * opts.case_tol * scale;
    if excess(&best, side).abs() > f_abs {
        let f = |eta: f64| match solve(eta, warm) {
            Ok(r) => {
                let e = excess(&r, side);
                warm = r.warm;
                if e <= 0.0 && e > excess(&best, side) {
                    best = r;
                }
                e
            }
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        };
        let _ = brent(f, lo.0, hi.0, lo.1, hi.1, RootTol { x_abs: 1e-15 * hi.0, f_abs: 0.0, max_iter: 100 });
    }
    if let Some(e) = err {
        return Err(e);
    }
    let mut r = best;
    r.iterations = counts;
    Ok(r)
}

/// Strict improvement beyond round-off, so that exact ties between the two
/// sides keep the one evaluated first.
fn better(a: &SolveReport, b: &SolveReport) -> bool {
    a.objective() > b.objective() + 1e-10 * b.objective().abs()
}

/// Tags a report by the common-rate condition its policy satisfies. On a tie
/// of the ergodic terms the common rate is the larger effective throughput.
fn classify(mut r: SolveReport, opts: &SolverOptions) -> SolveReport {
    let (e, t) = (r.ergodic, r.terms);
    let (case, c0) = if rel_tie(e.r01, e.r02, opts.case_tol) {
        if t.c01 >= t.c02 {
            (CaseTag::IIIA, t.c01)
        } else {
            (CaseTag::IIIB, t.c02)
        }
    } else if e.r01 < e.r02 {
        (CaseTag::I, t.c01)
    } else {
        (CaseTag::II, t.c02)
    };
    r.case = case;
    r.throughput.c0 = c0;
    r
}

/// Each side of the minimum is solved unconstrained; a side whose own
/// condition fails is re-solved on the kink unless its unconstrained value
/// already loses to the other side.
fn master_exact(
    grid: &FadingGrid,
    qos: &QosConfig,
    lambda: (f64, f64),
    opts: &SolverOptions,
    warm: Option<WarmStart>,
) -> Result<SolveReport> {
    let mut counts = IterationCounts::default();
    let r1 = solve_case_with(grid, qos, lambda, CaseSpec::I, opts, warm)?;
    let r2 = solve_case_with(grid, qos, lambda, CaseSpec::II, opts, Some(r1.warm))?;
    counts.add(r1.iterations);
    counts.add(r2.iterations);
    let mut best: Option<SolveReport> = None;
    let mut pending = Vec::new();
    for (side, r) in [(Side::Main, r1), (Side::Second, r2)] {
        let scale = r.ergodic.r01.abs().max(r.ergodic.r02.abs());
        if excess(&r, side) <= opts.case_tol * scale {
            let r = classify(r, opts);
            if best.as_ref().is_none_or(|b| better(&r, b)) {
                best = Some(r);
            }
        } else {
            pending.push((side, r));
        }
    }
    pending.sort_by(|a, b| b.1.objective().total_cmp(&a.1.objective()));
    for (side, r) in pending {
        // the unconstrained value bounds the side from above
        if best.as_ref().is_some_and(|b| b.objective() >= r.objective()) {
            continue;
        }
        let k = match kink_side_fast(grid, qos, lambda, side, opts, &r).or_else(|_| kink_side(grid, qos, lambda, side, opts, &r)) {
            Ok(k) => k,
            // per-state optima jump across the kink: the side has no
            // stationary point and the other candidate stands
            Err(_) if best.is_some() => continue,
            Err(e) => return Err(e),
        };
        counts.add(k.iterations);
        let k = classify(k, opts);
        if best.as_ref().is_none_or(|b| better(&k, b)) {
            best = Some(k);
        }
    }
    let mut r = best.expect("at least one side is evaluated");
    r.iterations = counts;
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FadingSample;

    fn grid(states: &[(f64, f64, f64)]) -> FadingGrid {
        FadingGrid::explicit(states.iter().map(|&(m, e, w)| FadingSample::new(m, e, w)).collect()).unwrap()
    }

    #[test]
    fn single_state_confidential_only() {
        let g = grid(&[(4.0, 0.0, 1.0)]);
        let q = QosConfig::from_beta(1.0, 0.5, 1.0).unwrap();
        let r = solve_case(&g, &q, (0.0, 1.0), CaseSpec::I).unwrap();
        assert_eq!(r.policy.pairs[0].mu0, 0.0);
        assert!((r.policy.pairs[0].mu1 - 0.5).abs() < 1e-9);
        assert!((r.throughput.c1 - 3f64.log2()).abs() < 1e-9);
    }

    #[test]
    fn common_only_weights_send_no_confidential_power() {
        let g = grid(&[(3.0, 0.5, 0.4), (1.0, 1.2, 0.35), (0.4, 0.2, 0.25)]);
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        for case in [CaseSpec::I, CaseSpec::II] {
            let r = solve_case(&g, &q, (1.0, 0.0), case).unwrap();
            assert!(r.policy.pairs.iter().all(|p| p.mu1 == 0.0));
            assert!(r.power_gap.abs() <= 1e-6);
            assert!(r.phi_residual <= 1e-8);
        }
    }

    #[test]
    fn confidential_only_weights_send_no_common_power() {
        let g = grid(&[(3.0, 0.5, 0.4), (1.0, 1.2, 0.35), (0.4, 0.2, 0.25)]);
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        let r = master_pc(&g, &q, (0.0, 1.0)).unwrap();
        assert!(r.policy.pairs.iter().all(|p| p.mu0 == 0.0));
        assert_eq!(r.case, CaseTag::IIIC);
        assert!(r.degenerate);
        assert_eq!(r.policy.pairs[1].mu1, 0.0);
        assert!(r.power_gap.abs() <= 1e-6);
    }

    #[test]
    fn mixed_weights_converge() {
        let g = grid(&[(3.0, 0.5, 0.4), (1.0, 1.2, 0.35), (0.4, 0.2, 0.25)]);
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        for case in [CaseSpec::I, CaseSpec::II, CaseSpec::III(0.3)] {
            let r = solve_case(&g, &q, (0.5, 0.5), case).unwrap();
            assert!(r.power_gap.abs() <= 1e-6, "{:?}", r.power_gap);
            assert!(r.phi_residual <= 1e-8, "{:?}", r.phi_residual);
            let m = MultiplierSet::new(r.multipliers.kappa, crate::effcap::PhiPair { phi0: r.multipliers.phi0, phi1: r.multipliers.phi1 }, 0.5, 0.5).unwrap();
            assert!((m.alpha1 / r.multipliers.alpha1 - 1.0).abs() < 1e-12);
            assert!((m.alpha2 / r.multipliers.alpha2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_snr_gives_zero_point() {
        let g = grid(&[(3.0, 0.5, 0.5), (1.0, 1.2, 0.5)]);
        let q = QosConfig::from_beta(1.0, 0.0, 1.0).unwrap();
        let r = master_pc(&g, &q, (0.5, 0.5)).unwrap();
        assert_eq!(r.throughput, ThroughputPair { c0: 0.0, c1: 0.0 });
        assert_eq!(r.power_used, 0.0);
    }

    #[test]
    fn weak_second_receiver_is_case_two() {
        // the second receiver always decodes less common rate
        let g = grid(&[(3.0, 0.3, 0.5), (2.0, 0.5, 0.5)]);
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        let r = master_pc(&g, &q, (0.8, 0.2)).unwrap();
        assert_eq!(r.case, CaseTag::II, "{:?}", r.ergodic);
        assert!(r.ergodic.r01 > r.ergodic.r02);
        // Case II sends no common power, so both conditions tie at zero and
        // the sequential rule stops at delta = 0
        let opts = SolverOptions { selection: CaseSelection::Sequential, ..SolverOptions::default() };
        let seq = master_pc_with(&g, &q, (0.5, 0.5), &opts, None).unwrap();
        assert_eq!((seq.case, seq.delta), (CaseTag::IIIC, Some(0.0)));
        assert_eq!(seq.ergodic.r01, seq.ergodic.r02);
        // the exact selection tags the zero-rate tie by the C comparison
        let r = master_pc(&g, &q, (0.5, 0.5)).unwrap();
        assert_eq!(r.case, CaseTag::IIIA);
        assert!(r.objective() >= seq.objective() - 1e-12);
        let p = crate::oracle::OracleProblem::new(g, q, (0.5, 0.5), 0.005);
        let o = crate::oracle::brute_force_point(&p).unwrap();
        let c = crate::oracle::certify_against(&r, &p, &o);
        assert!(c.ok && c.gap.abs() < 1e-3, "{c:?}");
    }

    #[test]
    fn rejects_bad_weights() {
        let g = grid(&[(3.0, 0.2, 1.0)]);
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        assert!(solve_case(&g, &q, (0.0, 0.0), CaseSpec::I).is_err());
        assert!(solve_case(&g, &q, (-1.0, 1.0), CaseSpec::I).is_err());
    }
}
