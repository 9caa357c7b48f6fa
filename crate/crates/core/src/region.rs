//! Boundary of the effective secrecy throughput region.
//!
//! The objective `lambda0 C0 + lambda1 C1` is positively homogeneous in the
//! weights, so the sweep uses `lambda0` on a uniform grid over `[0, 1]` with
//! `lambda1 = 1 - lambda0`. Points are solved in order of increasing
//! `lambda0`, each warm-started from the last successful one.

use crate::effcap::ThroughputPair;
use crate::error::{Error, Result};
use crate::model::{FadingGrid, QosConfig};
use crate::outer::{master_pc_with, SolveReport, SolverOptions};

#[derive(Debug)]
pub struct BoundaryPoint {
    pub lambda: (f64, f64),
    /// The solve, or the failure that stopped it.
    pub report: Result<SolveReport>,
}

impl BoundaryPoint {
    pub fn throughput(&self) -> Option<ThroughputPair> {
        self.report.as_ref().ok().map(|r| r.throughput)
    }

    pub fn is_ok(&self) -> bool {
        self.report.is_ok()
    }
}

#[derive(Debug)]
pub struct RegionSweep {
    /// Ordered by `lambda0` ascending, endpoints included.
    pub points: Vec<BoundaryPoint>,
    pub qos: QosConfig,
    pub grid_states: usize,
    pub options: SolverOptions,
}

impl RegionSweep {
    /// `(C0, C1)` of the successful points, in sweep order.
    pub fn frontier(&self) -> Vec<(f64, f64)> {
        self.points.iter().filter_map(|p| p.throughput()).map(|t| (t.c0, t.c1)).collect()
    }

    pub fn failed(&self) -> usize {
        self.points.iter().filter(|p| !p.is_ok()).count()
    }
}

/// Uniform weight grid `lambda0 = k / (n - 1)`.
pub fn lambda_grid(num_lambda: usize) -> Vec<(f64, f64)> {
    let n = num_lambda.max(2);
    (0..n)
        .map(|k| {
            let l0 = k as f64 / (n - 1) as f64;
            (l0, 1.0 - l0)
        })
        .collect()
}

pub fn sweep_boundary(grid: &FadingGrid, qos: &QosConfig, num_lambda: usize) -> Result<RegionSweep> {
    sweep_boundary_with(grid, qos, num_lambda, &SolverOptions::default())
}

/// Solves one boundary point per weight. A failed point is recorded and the
/// sweep continues.
pub fn sweep_boundary_with(grid: &FadingGrid, qos: &QosConfig, num_lambda: usize, opts: &SolverOptions) -> Result<RegionSweep> {
    if num_lambda < 2 {
        return Err(Error::invalid(format!("a sweep needs at least two weights, got {num_lambda}")));
    }
    let mut warm = None;
    let mut points = Vec::with_capacity(num_lambda);
    for lambda in lambda_grid(num_lambda) {
        let report = master_pc_with(grid, qos, lambda, opts, warm);
        if let Ok(r) = &report {
            if !r.degenerate {
                warm = Some(r.warm);
            }
        }
        points.push(BoundaryPoint { lambda, report });
    }
    Ok(RegionSweep {
        points,
        qos: *qos,
        grid_states: grid.len(),
        options: opts.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityReport {
    /// Largest signed distance of a point inside the chord of its two
    /// neighbours; negative when every point is strictly outside.
    pub max_violation: f64,
    pub ok: bool,
    /// Index (into the frontier) of the worst point.
    pub worst: Option<usize>,
}

pub const CONVEXITY_TOL: f64 = 1e-6;

pub fn check_convexity(sweep: &RegionSweep) -> ConvexityReport {
    check_convexity_points(&sweep.frontier())
}

/// Chord test on a frontier ordered from the `C1` axis to the `C0` axis.
pub fn check_convexity_points(points: &[(f64, f64)]) -> ConvexityReport {
    let mut worst: Option<(usize, f64)> = None;
    for i in 1..points.len().saturating_sub(1) {
        let (a, p, b) = (points[i - 1], points[i], points[i + 1]);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len = dx.hypot(dy);
        // coincident neighbours define no chord
        let deficit = if len > 0.0 { -(dx * (p.1 - a.1) - dy * (p.0 - a.0)) / len } else { 0.0 };
        if worst.is_none_or(|(_, w)| deficit > w) {
            worst = Some((i, deficit));
        }
    }
    let max_violation = worst.map_or(0.0, |w| w.1);
    ConvexityReport {
        max_violation,
        ok: max_violation <= CONVEXITY_TOL,
        worst: worst.map(|w| w.0),
    }
}

/// Largest step against the frontier's direction: `C0` should not decrease
/// and `C1` should not increase with `lambda0`.
pub fn monotonicity_violation(points: &[(f64, f64)]) -> f64 {
    points.windows(2).map(|w| (w[0].0 - w[1].0).max(w[1].1 - w[0].1)).fold(0.0, f64::max)
}

/// Largest exponent accepted as the ergodic limit.
pub const ERGODIC_BETA: f64 = 1e-8;

/// Boundary point in the no-QoS limit; the configuration must have
/// `beta <= 1e-8`.
pub fn ergodic_limit_point(grid: &FadingGrid, qos: &QosConfig, lambda: (f64, f64)) -> Result<ThroughputPair> {
    if !(qos.beta <= ERGODIC_BETA) {
        return Err(Error::invalid(format!("the ergodic limit needs beta <= {ERGODIC_BETA:e}, got {:e}", qos.beta)));
    }
    Ok(master_pc_with(grid, qos, lambda, &SolverOptions::default(), None)?.throughput)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FadingSample;

    fn three_state() -> FadingGrid {
        FadingGrid::explicit(vec![
            FadingSample::new(3.0, 0.5, 0.4),
            FadingSample::new(1.0, 1.2, 0.35),
            FadingSample::new(0.4, 0.2, 0.25),
        ])
        .unwrap()
    }

    #[test]
    fn collinear_points_have_zero_violation() {
        let pts = [(0.0, 2.0), (1.0, 1.0), (2.0, 0.0)];
        let c = check_convexity_points(&pts);
        assert_eq!(c.max_violation, 0.0);
        assert!(c.ok);
    }

    #[test]
    fn inward_point_is_flagged() {
        // quarter circle; the chord over two steps sags by 7.5e-5
        let pts: Vec<(f64, f64)> = (0..=128).map(|k| (k as f64 / 128.0 * std::f64::consts::FRAC_PI_2).sin_cos()).collect();
        assert!(check_convexity_points(&pts).ok);
        let mut bad = pts.clone();
        bad[64].0 -= 1e-3 * std::f64::consts::FRAC_1_SQRT_2;
        bad[64].1 -= 1e-3 * std::f64::consts::FRAC_1_SQRT_2;
        let c = check_convexity_points(&bad);
        assert!(!c.ok);
        assert_eq!(c.worst, Some(64));
    }

    #[test]
    fn two_weights_give_the_axis_endpoints() {
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        let s = sweep_boundary(&three_state(), &q, 2).unwrap();
        assert_eq!(s.points.len(), 2);
        let f = s.frontier();
        assert_eq!(f[0].0, 0.0);
        assert!(f[0].1 > 0.0 && f[1].0 > 0.0);
        assert_eq!(f[1].1, 0.0);
    }

    #[test]
    fn zero_snr_sweep_is_all_zero() {
        let q = QosConfig::from_beta(1.0, 0.0, 1.0).unwrap();
        let s = sweep_boundary(&three_state(), &q, 5).unwrap();
        assert!(s.frontier().iter().all(|&p| p == (0.0, 0.0)));
    }

    #[test]
    fn sweep_is_monotone_and_convex() {
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        let s = sweep_boundary(&three_state(), &q, 17).unwrap();
        assert_eq!(s.failed(), 0);
        let f = s.frontier();
        assert!(monotonicity_violation(&f) <= 1e-9, "{f:?}");
        let c = check_convexity(&s);
        assert!(c.ok, "{c:?}");
    }

    #[test]
    fn weight_scaling_leaves_the_point_unchanged() {
        let q = QosConfig::from_beta(1.0, 1.0, 1.0).unwrap();
        let g = three_state();
        let opts = SolverOptions::default();
        for l0 in [0.2, 0.5, 0.9] {
            let a = master_pc_with(&g, &q, (l0, 1.0 - l0), &opts, None).unwrap();
            let b = master_pc_with(&g, &q, (3.0 * l0, 3.0 * (1.0 - l0)), &opts, None).unwrap();
            assert!((a.throughput.c0 - b.throughput.c0).abs() <= 1e-12);
            assert!((a.throughput.c1 - b.throughput.c1).abs() <= 1e-12);
        }
    }

    #[test]
    fn ergodic_limit_rejects_large_beta() {
        let q = QosConfig::from_beta(1e-3, 1.0, 1.0).unwrap();
        assert!(ergodic_limit_point(&three_state(), &q, (0.5, 0.5)).is_err());
    }

    #[test]
    fn single_state_ergodic_limit_is_the_rate_optimum() {
        // constant channel: the weighted-rate optimum is independent of beta
        let g = FadingGrid::explicit(vec![FadingSample::new(4.0, 0.0, 1.0)]).unwrap();
        let q = QosConfig::from_beta(1e-9, 0.5, 1.0).unwrap();
        let t = ergodic_limit_point(&g, &q, (0.0, 1.0)).unwrap();
        assert!((t.c1 - 3f64.log2()).abs() < 1e-8);
    }
}
