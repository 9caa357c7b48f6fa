//! Domain types and fading-state discretization.
//!
//! Channel gains are magnitude-squares `z_M` (main receiver) and `z_E`
//! (second receiver, eavesdropper for the confidential stream). Expectations
//! over the fading distribution are weighted sums over a [`FadingGrid`].

use std::f64::consts::LN_2;
use std::io::Read;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_laguerre, gauss_legendre_unit};

/// QoS exponent, framing and link-budget parameters.
///
/// `beta = theta * frame_t * bandwidth_b / ln 2` is the dimensionless exponent
/// that turns `exp(-theta T B r)` into `(1 + sinr)^(-beta)` for a rate `r` in
/// bits/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QosConfig {
    pub theta: f64,
    pub frame_t: f64,
    pub bandwidth_b: f64,
    pub snr: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl QosConfig {
    pub fn new(theta: f64, frame_t: f64, bandwidth_b: f64, snr: f64, gamma: f64) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("theta", theta)?;
        positive("frame_t", frame_t)?;
        positive("bandwidth_b", bandwidth_b)?;
        positive("gamma", gamma)?;
        if !(snr >= 0.0 && snr.is_finite()) {
            return Err(Error::invalid(format!("snr must be finite and >= 0, got {snr}")));
        }
        Ok(QosConfig {
            theta,
            frame_t,
            bandwidth_b,
            snr,
            gamma,
            beta: theta * frame_t * bandwidth_b / LN_2,
        })
    }

    /// Configuration with a prescribed exponent (`T = B = 1`).
    pub fn from_beta(beta: f64, snr: f64, gamma: f64) -> Result<Self> {
        let mut q = QosConfig::new(beta * LN_2, 1.0, 1.0, snr, gamma)?;
        q.beta = beta;
        Ok(q)
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        QosConfig::new(theta, self.frame_t, self.bandwidth_b, self.snr, self.gamma)
    }

    pub fn with_snr(&self, snr: f64) -> Result<Self> {
        let mut q = *self;
        if !(snr >= 0.0 && snr.is_finite()) {
            return Err(Error::invalid(format!("snr must be finite and >= 0, got {snr}")));
        }
        q.snr = snr;
        Ok(q)
    }
}

/// Converts a dB figure to a linear ratio; `-inf` dB maps to zero.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// One joint fading state with its probability mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingSample {
    pub z_m: f64,
    pub z_e: f64,
    pub weight: f64,
}

impl FadingSample {
    pub fn new(z_m: f64, z_e: f64, weight: f64) -> Self {
        FadingSample { z_m, z_e, weight }
    }
}

/// True iff the state admits confidential transmission, `z_M > gamma z_E`.
/// States on the boundary belong to the complement.
pub fn in_secure_set(s: &FadingSample, gamma: f64) -> bool {
    s.z_m > gamma * s.z_e
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridMethod {
    Quadrature,
    MonteCarlo,
    Explicit,
}

/// Immutable discretization of the joint fading distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingGrid {
    samples: Vec<FadingSample>,
    method: GridMethod,
    seed: Option<u64>,
}

const WEIGHT_SUM_TOL: f64 = 1e-6;

impl FadingGrid {
    /// Grid from user-supplied states. Weights must be positive and sum to one
    /// within 1e-6; they are renormalized to sum to one.
    pub fn explicit(samples: Vec<FadingSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("explicit grid needs at least one state"));
        }
        for (i, s) in samples.iter().enumerate() {
            let ok = s.z_m >= 0.0 && s.z_e >= 0.0 && s.z_m.is_finite() && s.z_e.is_finite();
            if !ok {
                return Err(Error::invalid(format!("state {i}: gains must be finite and >= 0")));
            }
            if !(s.weight > 0.0 && s.weight <= 1.0) {
                return Err(Error::invalid(format!("state {i}: weight must lie in (0, 1]")));
            }
        }
        let total: f64 = samples.iter().map(|s| s.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        Ok(FadingGrid {
            samples: normalized(samples),
            method: GridMethod::Explicit,
            seed: None,
        })
    }

    /// Reads `z_M, z_E, weight` rows. A leading header row and `#` comments are
    /// skipped.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut samples = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::invalid(format!("grid csv: {e}")))?;
            if rec.len() != 3 {
                return Err(Error::invalid(format!(
                    "grid csv row {}: expected 3 columns, found {}",
                    line + 1,
                    rec.len()
                )));
            }
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => samples.push(FadingSample::new(v[0], v[1], v[2])),
                Err(_) if line == 0 => continue,
                Err(e) => return Err(Error::invalid(format!("grid csv row {}: {e}", line + 1))),
            }
        }
        FadingGrid::explicit(samples)
    }

    pub fn samples(&self) -> &[FadingSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn method(&self) -> GridMethod {
        self.method
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Probability mass of the secure set `z_M > gamma z_E`.
    pub fn secure_mass(&self, gamma: f64) -> f64 {
        let w: Vec<f64> = self
            .samples
            .iter()
            .map(|s| if in_secure_set(s, gamma) { s.weight } else { 0.0 })
            .collect();
        crate::numeric::pairwise_sum(&w)
    }

    /// Weighted mean of `f` over the grid.
    pub fn expect<F: Fn(&FadingSample) -> f64>(&self, f: F) -> f64 {
        let terms: Vec<f64> = self.samples.iter().map(|s| s.weight * f(s)).collect();
        crate::numeric::pairwise_sum(&terms)
    }
}

fn normalized(mut samples: Vec<FadingSample>) -> Vec<FadingSample> {
    let w: Vec<f64> = samples.iter().map(|s| s.weight).collect();
    let total = crate::numeric::pairwise_sum(&w);
    for s in samples.iter_mut() {
        s.weight /= total;
    }
    samples
}

/// Discretizes independent Rayleigh fading: `z_M ~ Exp(mean_m)`,
/// `z_E ~ Exp(mean_e)`.
///
/// The quadrature grid is a tensor product in the coordinates
/// `s = z_M/mean_m + z_E/mean_e` (Gamma(2,1), generalized Gauss-Laguerre) and
/// `u = (z_M/mean_m) / s` (uniform, Gauss-Legendre), which are independent.
/// It reproduces the polynomial moments of both gains and keeps the
/// exchange `z_M <-> z_E` exact when the means agree. Monte Carlo draws
/// `nodes_per_dim^2` i.i.d. pairs from a seeded ChaCha8 stream.
pub fn build_rayleigh_grid(
    mean_m: f64,
    mean_e: f64,
    nodes_per_dim: usize,
    method: GridMethod,
    seed: Option<u64>,
) -> Result<FadingGrid> {
    if !(mean_m > 0.0 && mean_e > 0.0 && mean_m.is_finite() && mean_e.is_finite()) {
        return Err(Error::invalid("fading means must be positive and finite"));
    }
    if nodes_per_dim < 2 {
        return Err(Error::invalid("nodes_per_dim must be at least 2"));
    }
    let samples = match method {
        GridMethod::Quadrature => {
            let radial = gauss_laguerre(nodes_per_dim, 1.0);
            let split = gauss_legendre_unit(nodes_per_dim);
            let mut out = Vec::with_capacity(nodes_per_dim * nodes_per_dim);
            for (&s, &ws) in radial.nodes.iter().zip(&radial.weights) {
                for (&u, &wu) in split.nodes.iter().zip(&split.weights) {
                    out.push(FadingSample::new(mean_m * (s * u), mean_e * (s * (1.0 - u)), ws * wu));
                }
            }
            normalized(out)
        }
        GridMethod::MonteCarlo => {
            let n = nodes_per_dim * nodes_per_dim;
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
            let w = 1.0 / n as f64;
            (0..n)
                .map(|_| {
                    let a: f64 = rng.sample(Exp1);
                    let b: f64 = rng.sample(Exp1);
                    FadingSample::new(mean_m * a, mean_e * b, w)
                })
                .collect()
        }
        GridMethod::Explicit => {
            return Err(Error::invalid("explicit grids are built from listed states, not generated"));
        }
    };
    Ok(FadingGrid {
        samples,
        method,
        seed: if method == GridMethod::MonteCarlo { Some(seed.unwrap_or(0)) } else { None },
    })
}
