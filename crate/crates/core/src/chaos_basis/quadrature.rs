use nalgebra::{DMatrix, SymmetricEigen};

use super::hermite::hermite_table;
use crate::error::{Error, Result};

/// Largest tensor grid accepted by [`QuadratureGrid::tensor`].
pub const DEFAULT_NODE_CAP: usize = 4_000_000;

/// One-dimensional Gauss-Hermite rule for `γ₁`, nodes ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite1d {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite1d {
    pub fn new(q: usize) -> Result<Self> {
        if q == 0 {
            return Err(Error::Argument("quadrature needs at least one node".into()));
        }
        if q == 1 {
            return Ok(GaussHermite1d {
                nodes: vec![0.0],
                weights: vec![1.0],
            });
        }
        // Jacobi matrix of the orthonormal recurrence: zero diagonal, √i off-diagonal.
        let mut jacobi = DMatrix::<f64>::zeros(q, q);
        for i in 1..q {
            let b = (i as f64).sqrt();
            jacobi[(i - 1, i)] = b;
            jacobi[(i, i - 1)] = b;
        }
        let eig = SymmetricEigen::new(jacobi);
        let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));

        // Newton polish on h_Q; weights from the Christoffel formula
        // w = 1 / (Q h_{Q-1}(x)^2), which keeps relative accuracy in the tails.
        let sqrt_q = (q as f64).sqrt();
        let mut weights = Vec::with_capacity(q);
        for x in nodes.iter_mut() {
            let mut converged = false;
            let mut last_step = f64::INFINITY;
            for _ in 0..50 {
                let t = hermite_table(q, *x);
                let step = t[q] / (sqrt_q * t[q - 1]);
                if !step.is_finite() {
                    break;
                }
                *x -= step;
                last_step = step.abs();
                if last_step <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged && !(last_step <= 1e-12 * x.abs().max(1.0)) {
                return Err(Error::Numeric(format!(
                    "Gauss-Hermite node refinement did not converge for Q={q} near x={x}"
                )));
            }
            let t = hermite_table(q - 1, *x);
            weights.push(1.0 / (q as f64 * t[q - 1] * t[q - 1]));
        }

        // Enforce exact symmetry of the rule.
        for i in 0..q / 2 {
            let j = q - 1 - i;
            let x = 0.5 * (nodes[j] - nodes[i]);
            let w = 0.5 * (weights[i] + weights[j]);
            nodes[i] = -x;
            nodes[j] = x;
            weights[i] = w;
            weights[j] = w;
        }
        if q % 2 == 1 {
            nodes[q / 2] = 0.0;
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Numeric(format!(
                "Gauss-Hermite weights for Q={q} are not positive and finite"
            )));
        }
        Ok(GaussHermite1d { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Tensor-product Gauss-Hermite grid for `γ_k`.
///
/// Nodes are stored row-major (`node j` occupies `nodes[j*k..(j+1)*k]`), with
/// the last coordinate varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureGrid {
    dim: usize,
    rule: GaussHermite1d,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// The one-dimensional rule as a grid of dimension one.
pub fn gauss_hermite(q: usize) -> Result<QuadratureGrid> {
    QuadratureGrid::tensor(q, 1)
}

impl QuadratureGrid {
    pub fn tensor(q: usize, dim: usize) -> Result<Self> {
        Self::tensor_with_cap(q, dim, DEFAULT_NODE_CAP)
    }

    pub fn tensor_with_cap(q: usize, dim: usize, cap: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("grid dimension must be at least 1".into()));
        }
        let count = (q as u128).checked_pow(dim as u32).unwrap_or(u128::MAX);
        if count > cap as u128 {
            return Err(Error::GridTooLarge { count, cap });
        }
        let rule = GaussHermite1d::new(q)?;
        Ok(Self::from_rule(rule, dim))
    }

    pub fn from_rule(rule: GaussHermite1d, dim: usize) -> Self {
        let q = rule.len();
        let n = q.pow(dim as u32);
        let mut nodes = Vec::with_capacity(n * dim);
        let mut weights = Vec::with_capacity(n);
        let mut digits = vec![0usize; dim];
        for _ in 0..n {
            let mut w = 1.0;
            for &d in &digits {
                nodes.push(rule.nodes[d]);
                w *= rule.weights[d];
            }
            weights.push(w);
            for pos in (0..dim).rev() {
                digits[pos] += 1;
                if digits[pos] < q {
                    break;
                }
                digits[pos] = 0;
            }
        }
        QuadratureGrid {
            dim,
            rule,
            nodes,
            weights,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Nodes per dimension.
    pub fn q(&self) -> usize {
        self.rule.len()
    }

    pub fn rule(&self) -> &GaussHermite1d {
        &self.rule
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j * self.dim..(j + 1) * self.dim]
    }

    pub fn nodes_flat(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Index of node `j` along coordinate `coord` of the 1-D rule.
    pub fn digit(&self, j: usize, coord: usize) -> usize {
        let q = self.q();
        (j / q.pow((self.dim - 1 - coord) as u32)) % q
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        (0..self.len())
            .map(|j| self.weights[j] * f(self.node(j)))
            .sum()
    }
}
