use proptest::prelude::*;

use secthru_core::effcap::effective_throughput_with_beta;
use secthru_core::model::{FadingGrid, FadingSample};

fn profile_grid(weights: &[f64]) -> FadingGrid {
    let total: f64 = weights.iter().sum();
    FadingGrid::explicit(weights.iter().map(|w| FadingSample::new(1.0, 1.0, w / total)).collect()).unwrap()
}

/// Weights and two rate profiles of a common length.
fn profiles() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1usize..10).prop_flat_map(|n| {
        (
            prop::collection::vec(0.05f64..1.0, n),
            prop::collection::vec(0.0f64..8.0, n),
            prop::collection::vec(0.0f64..8.0, n),
        )
    })
}

proptest! {
    #[test]
    fn time_sharing_never_loses((w, r, s) in profiles(), a in 0.0f64..=1.0, log_beta in -5.0f64..2.0) {
        let g = profile_grid(&w);
        let beta = 10f64.powf(log_beta);
        let c = |v: &[f64]| effective_throughput_with_beta(v, &g, beta).unwrap();
        let mix: Vec<f64> = r.iter().zip(&s).map(|(x, y)| a * x + (1.0 - a) * y).collect();
        prop_assert!(a * c(&r) + (1.0 - a) * c(&s) <= c(&mix) + 1e-12);
    }

    #[test]
    fn throughput_falls_with_the_exponent_and_stays_below_the_mean((w, r, _) in profiles(), lo in -6.0f64..1.0, step in 0.0f64..2.0) {
        let g = profile_grid(&w);
        let (b_lo, b_hi) = (10f64.powf(lo), 10f64.powf(lo + step));
        let c_lo = effective_throughput_with_beta(&r, &g, b_lo).unwrap();
        let c_hi = effective_throughput_with_beta(&r, &g, b_hi).unwrap();
        let mean: f64 = g.samples().iter().zip(&r).map(|(s, r)| s.weight * r).sum();
        prop_assert!(c_hi <= c_lo + 1e-12 * (1.0 + c_lo));
        prop_assert!(c_lo <= mean + 1e-12 * (1.0 + mean));
        let min = r.iter().cloned().fold(f64::INFINITY, f64::min);
        prop_assert!(c_hi >= min - 1e-12 * (1.0 + min));
    }

    #[test]
    fn constant_profiles_are_served_in_full(w in prop::collection::vec(0.05f64..1.0, 1..10), rate in 0.0f64..8.0, log_beta in -5.0f64..2.0) {
        let g = profile_grid(&w);
        let c = effective_throughput_with_beta(&vec![rate; w.len()], &g, 10f64.powf(log_beta)).unwrap();
        prop_assert!((c - rate).abs() <= 1e-12 * (1.0 + rate));
    }
}
