//! Gauss quadrature rules from the Golub-Welsch eigenvalue construction.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and probability weights of a Gauss rule (weights sum to one).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn golub_welsch(diag: &[f64], offdiag: &[f64]) -> GaussRule {
    let n = diag.len();
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            diag[i]
        } else if i + 1 == j {
            offdiag[i]
        } else if j + 1 == i {
            offdiag[j]
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    GaussRule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1 / total).collect(),
    }
}

/// Generalized Gauss-Laguerre rule for the density `x^alpha e^{-x} / Gamma(alpha+1)`.
pub fn gauss_laguerre(n: usize, alpha: f64) -> GaussRule {
    let diag: Vec<f64> = (0..n).map(|i| 2.0 * i as f64 + alpha + 1.0).collect();
    let off: Vec<f64> = (1..n)
        .map(|i| {
            let i = i as f64;
            (i * (i + alpha)).sqrt()
        })
        .collect();
    golub_welsch(&diag, &off)
}

/// Gauss-Legendre rule for the uniform density on `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> GaussRule {
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n)
        .map(|i| {
            let i = i as f64;
            i / (4.0 * i * i - 1.0).sqrt()
        })
        .collect();
    let mut rule = golub_welsch(&diag, &off);
    // Pair u and 1-u exactly: the upper node is rounded once and the lower
    // one is its exact complement.
    for k in 0..n / 2 {
        let j = n - 1 - k;
        let x = 0.5 * (rule.nodes[j] - rule.nodes[k]);
        let w = 0.5 * (rule.weights[j] + rule.weights[k]);
        let upper = 0.5 + 0.5 * x;
        rule.nodes[j] = upper;
        rule.nodes[k] = 1.0 - upper;
        rule.weights[k] = w;
        rule.weights[j] = w;
    }
    if n % 2 == 1 {
        rule.nodes[n / 2] = 0.5;
    }
    rule
}
