//! Gauss–Hermite rules for expectations over a normal variable.
//!
//! Nodes start from the eigenvalues of the Jacobi matrix and are polished by
//! Newton iteration on the orthonormal Hermite recurrence, which also gives
//! the weights to full relative precision.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Nodes and weights for `∫ e^{-x²} f(x) dx`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

const PI_M4: f64 = 0.751_125_544_464_942_5; // π^(-1/4)

/// Orthonormal Hermite value `h_n(z)` and derivative `√(2n)·h_{n−1}(z)`.
fn orthonormal_hermite(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = PI_M4;
    let mut p2 = 0.0;
    for j in 1..=n {
        let jf = j as f64;
        let p3 = p2;
        p2 = p1;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

impl GaussHermite {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("order", "quadrature order must be positive"));
        }
        let n = order;
        // Jacobi matrix of the Hermite weight: zero diagonal, off-diagonal √(k/2).
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i + 1 == j || j + 1 == i {
                (i.max(j) as f64 / 2.0).sqrt()
            } else {
                0.0
            }
        });
        let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        guesses.sort_by(|a, b| b.total_cmp(a));

        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Newton polish on the orthonormal recurrence; also yields the weight.
            let mut z = if 2 * i + 1 == n { 0.0 } else { guesses[i] };
            for _ in 0..8 {
                let (p1, dp) = orthonormal_hermite(n, z);
                let step = p1 / dp;
                z -= step;
                if step.abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, pp) = orthonormal_hermite(n, z);
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Ok(Self { nodes, weights })
    }

    /// Shared, lazily built rule of the given order.
    pub fn cached(order: usize) -> Result<Arc<Self>> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = cache.lock().expect("quadrature cache poisoned").get(&order) {
            return Ok(Arc::clone(rule));
        }
        let rule = Arc::new(Self::new(order)?);
        cache
            .lock()
            .expect("quadrature cache poisoned")
            .insert(order, Arc::clone(&rule));
        Ok(rule)
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `∫ e^{-x²} f(x) dx`
    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// `E[f(Z)]` for `Z ~ N(0, variance)`.
    pub fn normal_expectation<F: Fn(f64) -> f64>(&self, variance: f64, f: F) -> f64 {
        let scale = (2.0 * variance).sqrt();
        self.integrate(|x| f(scale * x)) / std::f64::consts::PI.sqrt()
    }
}
