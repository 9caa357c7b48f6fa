//! Small numerical kernels shared by the solvers: deterministic summation and
//! a bracketed scalar root finder.

/// Pairwise (cascade) summation with a fixed split order.
///
/// The tree shape depends only on the slice length, so repeated reductions
/// over the same data are bit-identical.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 16;
    if xs.len() <= LEAF {
        return xs.iter().fold(0.0, |acc, &x| acc + x);
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Natural log of `sum(exp(x_i))` computed without overflow.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    let shifted: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
    max + pairwise_sum(&shifted).ln()
}

/// Termination settings for [`brent`].
#[derive(Debug, Clone, Copy)]
pub struct RootTol {
    /// Absolute tolerance on the abscissa.
    pub x_abs: f64,
    /// Stop as soon as `|f(x)| <= f_abs`.
    pub f_abs: f64,
    pub max_iter: usize,
}

impl Default for RootTol {
    fn default() -> Self {
        RootTol {
            x_abs: 1e-300,
            f_abs: 0.0,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Root {
    pub x: f64,
    pub fx: f64,
    pub evals: usize,
}

/// Failure modes of the bracketed solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RootError {
    NotBracketed { fa: f64, fb: f64 },
    NotConverged { x: f64, fx: f64 },
    NonFinite { x: f64 },
}

/// Brent's method (zeroin) on a bracket `[a, b]` with known end values.
///
/// Combines inverse quadratic interpolation, secant steps and bisection; the
/// bracket always keeps a sign change so convergence is guaranteed for a
/// continuous `f`.
pub fn brent<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, tol: RootTol) -> Result<Root, RootError>
where
    F: FnMut(f64) -> f64,
{
    if fa == 0.0 {
        return Ok(Root { x: a, fx: fa, evals: 0 });
    }
    if fb == 0.0 {
        return Ok(Root { x: b, fx: fb, evals: 0 });
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(RootError::NotBracketed { fa, fb });
    }

    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    let mut evals = 0;

    loop {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.x_abs;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 || fb.abs() <= tol.f_abs {
            return Ok(Root { x: b, fx: fb, evals });
        }
        if evals >= tol.max_iter {
            return Err(RootError::NotConverged { x: b, fx: fb });
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
        evals += 1;
        if !fb.is_finite() {
            return Err(RootError::NonFinite { x: b });
        }
    }
}

/// Grows `hi` geometrically from `start` until `f(hi) <= 0`, for a function
/// that is positive at the lower end of its domain and eventually negative.
pub fn grow_upper<F>(mut f: F, start: f64, factor: f64, max_steps: usize) -> Option<(f64, f64)>
where
    F: FnMut(f64) -> f64,
{
    let mut hi = start;
    for _ in 0..max_steps {
        let v = f(hi);
        if v <= 0.0 {
            return Some((hi, v));
        }
        hi *= factor;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brent_finds_sqrt2() {
        let f = |x: f64| x * x - 2.0;
        let r = brent(f, 0.0, 2.0, f(0.0), f(2.0), RootTol::default()).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn brent_rejects_unbracketed() {
        let f = |x: f64| x * x + 1.0;
        let err = brent(f, -1.0, 1.0, f(-1.0), f(1.0), RootTol::default()).unwrap_err();
        assert!(matches!(err, RootError::NotBracketed { .. }));
    }

    #[test]
    fn brent_handles_steep_log_function() {
        // ln(1 + 1e6 x) - 3, root at (e^3 - 1) / 1e6
        let f = |x: f64| (1e6 * x).ln_1p() - 3.0;
        let r = brent(f, 0.0, 10.0, f(0.0), f(10.0), RootTol::default()).unwrap();
        assert!((r.x - (3f64.exp() - 1.0) / 1e6).abs() < 1e-18);
    }

    #[test]
    fn pairwise_sum_is_order_fixed() {
        let xs: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        assert_eq!(pairwise_sum(&xs).to_bits(), pairwise_sum(&xs).to_bits());
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-12);
    }

    #[test]
    fn log_sum_exp_survives_large_negative_exponents() {
        let xs = [-800.0, -801.0];
        let expect = -800.0 + (1.0 + (-1.0f64).exp()).ln();
        assert!((log_sum_exp(&xs) - expect).abs() < 1e-12);
    }

    #[test]
    fn grow_upper_brackets() {
        let (hi, v) = grow_upper(|x| 10.0 - x, 1.0, 2.0, 10).unwrap();
        assert_eq!(hi, 16.0);
        assert!(v < 0.0);
    }
}
