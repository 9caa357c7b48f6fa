//! Per-state allocation on the kink `E{R01} = E{R02}`.
//!
//! When the unconstrained optimum of one common-rate term violates its own
//! side condition, the boundary point sits on the set where the two ergodic
//! common rates coincide. Pricing that constraint with a multiplier `eta`
//! gives the per-state problem, in units of `kappa`,
//!
//! ```text
//! J(mu0, mu1) = (1/alpha1) h(La) - eta (La - Lb) + (1/alpha2) h(L1) - mu0 - mu1
//! ```
//!
//! with `h(L) = (1 - e^(-beta L)) / beta`, `La` the log-rate of the common
//! term being optimized, `Lb` the other one and `L1` the confidential
//! log-rate. `J` is not concave, so the solver searches globally: the best
//! `mu0` for a fixed `mu1` comes from a bracketed search over the monotone
//! pieces of the stationarity equation, and `mu1` is located by a scan
//! followed by golden-section refinement.

use crate::model::{in_secure_set, FadingSample};
use crate::numeric::{brent, RootTol};
use crate::rates::PowerPair;

/// Which common-rate term is charged to the common message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    /// The main receiver's term `R01` (the Case I objective).
    Main,
    /// The second receiver's term `R02` (the Case II objective).
    Second,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Main => Side::Second,
            Side::Second => Side::Main,
        }
    }
}

const SCAN: usize = 32;

#[derive(Debug, Clone, Copy)]
pub(crate) struct KinkProblem {
    beta: f64,
    /// `1/alpha1`, `1/alpha2` (zero for a disabled stream).
    ia1: f64,
    ia2: f64,
    eta: f64,
    /// Gains of the charged and the other common term.
    ca: f64,
    cb: f64,
    secure: bool,
    z_m: f64,
    g: f64,
}

fn h(l: f64, beta: f64) -> f64 {
    -(-beta * l).exp_m1() / beta
}

impl KinkProblem {
    /// Common-stream part of `J` at effective gains `(ea, eb)`.
    fn common_value(&self, mu0: f64, ea: f64, eb: f64) -> f64 {
        let la = (mu0 * ea).ln_1p();
        let lb = (mu0 * eb).ln_1p();
        self.ia1 * h(la, self.beta) - self.eta * (la - lb) - mu0
    }

    /// Derivative of [`Self::common_value`] in `mu0`.
    fn common_slope(&self, mu0: f64, ea: f64, eb: f64) -> f64 {
        let sa = 1.0 + mu0 * ea;
        self.ia1 * ea * (-(self.beta + 1.0) * sa.ln()).exp() - self.eta * ea / sa + self.eta * eb / (1.0 + mu0 * eb) - 1.0
    }

    /// Global maximizer of the common part over `mu0 >= 0`.
    fn best_mu0(&self, ea: f64, eb: f64) -> (f64, f64) {
        let tol = RootTol::default();
        if eb >= ea {
            // the slope is decreasing: single crossing
            let d0 = self.common_slope(0.0, ea, eb);
            if !(d0 > 0.0) {
                return (0.0, 0.0);
            }
            let hi = 2.0 * (self.ia1 + self.eta);
            let dhi = self.common_slope(hi, ea, eb);
            let mu0 = brent(|m| self.common_slope(m, ea, eb), 0.0, hi, d0, dhi, tol).map_or(hi, |r| r.x);
            return (mu0, self.common_value(mu0, ea, eb));
        }
        // ea > eb >= 0: slope > 0 iff rt(mu0) < ia1 ea, where
        // rt = s^(beta+1) + eta (ea - eb) s^beta / (1 + mu0 eb), s = 1 + mu0 ea
        let target = self.ia1 * ea;
        if !(target > 1.0) {
            return (0.0, 0.0);
        }
        let b = self.beta;
        let m_hi = ((target.ln()) / (b + 1.0)).exp_m1() / ea;
        let k = self.eta * (ea - eb);
        let rt = |m: f64| {
            let s = 1.0 + m * ea;
            (b * s.ln()).exp() * (s + k / (1.0 + m * eb)) / target - 1.0
        };
        // sign of rt' is the sign of a cubic that is convex on m >= 0
        let p = |m: f64| {
            let s = 1.0 + m * ea;
            let q = 1.0 + m * eb;
            (b + 1.0) * s * q * q + k * (b * q - s * eb / ea)
        };
        let dp = |m: f64| {
            let s = 1.0 + m * ea;
            let q = 1.0 + m * eb;
            (b + 1.0) * (ea * q * q + 2.0 * eb * s * q) + k * eb * (b - 1.0)
        };
        let mut breaks = vec![0.0];
        if k > 0.0 && b < 1.0 {
            let (d0, dh) = (dp(0.0), dp(m_hi));
            let m_min = if d0 >= 0.0 {
                0.0
            } else if dh <= 0.0 {
                m_hi
            } else {
                brent(dp, 0.0, m_hi, d0, dh, tol).map_or(0.0, |r| r.x)
            };
            let pmin = p(m_min);
            if pmin < 0.0 {
                let p0 = p(0.0);
                if p0 > 0.0 {
                    if let Ok(r) = brent(p, 0.0, m_min, p0, pmin, tol) {
                        breaks.push(r.x);
                    }
                }
                let ph = p(m_hi);
                if ph > 0.0 {
                    if let Ok(r) = brent(p, m_min, m_hi, pmin, ph, tol) {
                        breaks.push(r.x);
                    }
                }
            }
        }
        breaks.push(m_hi);
        let mut best = (0.0, 0.0);
        for w in breaks.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let (flo, fhi) = (rt(lo), rt(hi));
            if flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
                continue;
            }
            if let Ok(r) = brent(rt, lo, hi, flo, fhi, tol) {
                let v = self.common_value(r.x, ea, eb);
                if v > best.1 {
                    best = (r.x, v);
                }
            }
        }
        best
    }

    fn gains(&self, mu1: f64) -> (f64, f64) {
        (self.ca / (1.0 + mu1 * self.ca), self.cb / (1.0 + mu1 * self.cb))
    }

    fn conf_value(&self, mu1: f64) -> f64 {
        if self.ia2 == 0.0 {
            return 0.0;
        }
        let l1 = (mu1 * (self.z_m - self.g) / (1.0 + mu1 * self.g)).ln_1p();
        self.ia2 * h(l1, self.beta)
    }

    /// Value of the best `mu0` response to `mu1`.
    fn profile(&self, mu1: f64) -> (f64, f64) {
        let (ea, eb) = self.gains(mu1);
        let (mu0, v) = self.best_mu0(ea, eb);
        (mu0, v + self.conf_value(mu1) - mu1)
    }

    fn solve(&self) -> PowerPair {
        if !self.secure {
            let (mu0, _) = self.best_mu0(self.ca, self.cb);
            return PowerPair::new(mu0, 0.0);
        }
        // dJ/dmu1 <= (eta + 1/alpha2) / mu1 - 1
        let m_max = self.eta + self.ia2;
        let (mu0_at_zero, v0) = self.profile(0.0);
        if !(m_max > 0.0) {
            return PowerPair::new(mu0_at_zero, 0.0);
        }
        let grid: Vec<f64> = (0..=SCAN).map(|i| m_max * (i as f64 / SCAN as f64).powi(2)).collect();
        let mut vals = vec![v0];
        vals.extend(grid[1..].iter().map(|&m| self.profile(m).1));
        let ib = (0..vals.len()).fold(0, |b, i| if vals[i] > vals[b] { i } else { b });
        let (mut lo, mut hi) = (grid[ib.saturating_sub(1)], grid[(ib + 1).min(SCAN)]);
        // golden section on the bracket around the best scan point
        let r = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi - r * (hi - lo);
        let mut x2 = lo + r * (hi - lo);
        let (mut f1, mut f2) = (self.profile(x1).1, self.profile(x2).1);
        while hi - lo > 1e-13 * (1.0 + hi) {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - r * (hi - lo);
                f1 = self.profile(x1).1;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + r * (hi - lo);
                f2 = self.profile(x2).1;
            }
        }
        let mut best = (grid[ib], vals[ib]);
        for m in [x1, x2] {
            let v = self.profile(m).1;
            if v > best.1 {
                best = (m, v);
            }
        }
        let (mu0, _) = self.profile(best.0);
        PowerPair::new(mu0, best.0)
    }

    /// Value, gradient and Hessian of `J` in `(mu0, mu1)`.
    fn derivs(&self, mu0: f64, m: f64) -> (f64, [f64; 2], [f64; 3]) {
        let b = self.beta;
        let (ea, eb) = self.gains(m);
        let (la, lb) = ((mu0 * ea).ln_1p(), (mu0 * eb).ln_1p());
        let (pa, pb) = (ea / (1.0 + mu0 * ea), eb / (1.0 + mu0 * eb));
        let ea_exp = (-b * la).exp();
        let d1 = self.ia1 * ea_exp - self.eta;
        let d2 = -b * self.ia1 * ea_exp;
        let mut val = self.ia1 * h(la, b) - self.eta * (la - lb) - mu0 - m;
        let la_m = -mu0 * ea * pa;
        let lb_m = -mu0 * eb * pb;
        let g0 = d1 * pa + self.eta * pb - 1.0;
        let mut gm = d1 * la_m + self.eta * lb_m - 1.0;
        let h00 = d2 * pa * pa - d1 * pa * pa - self.eta * pb * pb;
        let h01 = d2 * pa * la_m - d1 * pa * pa - self.eta * pb * pb;
        let mut h11 = d2 * la_m * la_m + d1 * mu0 * ea * pa * pa * (2.0 + mu0 * ea) + self.eta * mu0 * eb * pb * pb * (2.0 + mu0 * eb);
        if self.secure && self.ia2 > 0.0 {
            let (q1, q2) = (self.z_m / (1.0 + m * self.z_m), self.g / (1.0 + m * self.g));
            let l1 = (m * (self.z_m - self.g) / (1.0 + m * self.g)).ln_1p();
            let w1 = self.ia2 * (-b * l1).exp();
            val += self.ia2 * h(l1, b);
            gm += w1 * (q1 - q2);
            h11 += -b * w1 * (q1 - q2) * (q1 - q2) + w1 * (q2 * q2 - q1 * q1);
        }
        (val, [g0, gm], [h00, h01, h11])
    }

    /// Local ascent from `start` by projected Newton steps with a
    /// backtracking line search.
    pub(crate) fn polish(&self, start: PowerPair) -> PowerPair {
        let mut x = [start.mu0.max(0.0), if self.secure { start.mu1.max(0.0) } else { 0.0 }];
        let nvar = if self.secure { 2 } else { 1 };
        let (mut val, mut g, mut hs) = self.derivs(x[0], x[1]);
        for _ in 0..100 {
            let free: Vec<usize> = (0..nvar).filter(|&i| !(x[i] == 0.0 && g[i] <= 0.0)).collect();
            let gscale = 1.0 + self.ia1 + self.ia2 + self.eta;
            if free.iter().all(|&i| g[i].abs() <= 1e-15 * gscale) {
                break;
            }
            let mut d = [0.0; 2];
            if free.len() == 2 {
                let (a, c, e) = (hs[0], hs[1], hs[2]);
                // shift the Hessian to be negative definite if needed
                let lmax = 0.5 * (a + e) + (0.25 * (a - e) * (a - e) + c * c).sqrt();
                let tau = if lmax < 0.0 { 0.0 } else { lmax + 1e-3 * (a.abs() + e.abs()) + 1e-300 };
                let (a, e) = (a - tau, e - tau);
                let det = a * e - c * c;
                d[0] = -(e * g[0] - c * g[1]) / det;
                d[1] = -(a * g[1] - c * g[0]) / det;
            } else {
                let i = free[0];
                let hii = hs[if i == 0 { 0 } else { 2 }];
                d[i] = if hii < 0.0 { -g[i] / hii } else { g[i] * (1.0 + x[i]) / gscale };
            }
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let y = [(x[0] + step * d[0]).max(0.0), (x[1] + step * d[1]).max(0.0)];
                let (v, gy, hy) = self.derivs(y[0], y[1]);
                if v >= val - 1e-15 * val.abs() && (v > val || gy.iter().zip(&g).any(|(a, b)| a.abs() < b.abs())) {
                    moved = y != x;
                    x = y;
                    val = v;
                    g = gy;
                    hs = hy;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        PowerPair::new(x[0], x[1])
    }

    /// Global maximizer, polished.
    pub(crate) fn global(&self) -> PowerPair {
        self.polish(self.solve())
    }

    pub(crate) fn objective(&self, p: PowerPair) -> f64 {
        let mu1 = if self.secure { p.mu1 } else { 0.0 };
        let (ea, eb) = self.gains(mu1);
        let conf = if self.secure { self.conf_value(mu1) } else { 0.0 };
        self.common_value(p.mu0, ea, eb) + conf - mu1
    }
}

pub(crate) fn problem(s: &FadingSample, alpha1: f64, alpha2: f64, side: Side, eta: f64, beta: f64, gamma: f64) -> KinkProblem {
    let g = gamma * s.z_e;
    let inv = |a: f64| if a.is_finite() { 1.0 / a } else { 0.0 };
    let (ca, cb) = match side {
        Side::Main => (s.z_m, g),
        Side::Second => (g, s.z_m),
    };
    KinkProblem {
        beta,
        ia1: inv(alpha1),
        ia2: inv(alpha2),
        eta,
        ca,
        cb,
        // a disabled confidential stream gets no power
        secure: in_secure_set(s, gamma) && alpha2.is_finite(),
        z_m: s.z_m,
        g,
    }
}

/// Per-state maximizer of the kink Lagrangian for thresholds
/// `(alpha1, alpha2)` and kink price `eta >= 0`.
pub fn solve_state_kink(s: &FadingSample, alpha1: f64, alpha2: f64, side: Side, eta: f64, beta: f64, gamma: f64) -> PowerPair {
    problem(s, alpha1, alpha2, side, eta, beta, gamma).global()
}

/// The kink Lagrangian integrand of a pair, in units of `kappa`.
pub fn kink_objective(s: &FadingSample, p: PowerPair, alpha1: f64, alpha2: f64, side: Side, eta: f64, beta: f64, gamma: f64) -> f64 {
    problem(s, alpha1, alpha2, side, eta, beta, gamma).objective(p)
}
