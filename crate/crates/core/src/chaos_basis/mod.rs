//! Tensor Hermite chaos basis of `L²(γ_k)`.
//!
//! Multi-indices are enumerated in graded lexicographic order, the
//! normalized probabilists' Hermite polynomials `h_n` are orthonormal
//! against the standard Gaussian `γ₁`, and Gauss-Hermite rules integrate
//! against `γ_k` with weights summing to one.

mod hermite;
mod quadrature;
mod table;

pub use hermite::{hermite_derivative, hermite_eval, hermite_table};
pub use quadrature::{gauss_hermite, GaussHermite1d, QuadratureGrid, DEFAULT_NODE_CAP};
pub use table::BasisTable;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest basis accepted by [`ChaosBasis::new`]; dense factorization stays
/// tractable below this.
pub const DEFAULT_BASIS_CAP: usize = 5_000;

/// Exponent vector `α` of the tensor Hermite function `h_α = Π h_{α_i}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(k: usize) -> Self {
        MultiIndex(vec![0; k])
    }

    /// `e_i` scaled by `n`.
    pub fn unit(k: usize, coord: usize, n: u32) -> Self {
        let mut e = vec![0; k];
        e[coord] = n;
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    /// `α − e_i`, or `None` when `α_i = 0`.
    pub fn lowered(&self, coord: usize) -> Option<MultiIndex> {
        let mut e = self.0.clone();
        if e[coord] == 0 {
            return None;
        }
        e[coord] -= 1;
        Some(MultiIndex(e))
    }

    /// Evaluates `h_α(x)` from per-coordinate Hermite tables, `tables[i][n] = h_n(x_i)`.
    pub fn eval_from_tables(&self, tables: &[Vec<f64>]) -> f64 {
        self.0
            .iter()
            .zip(tables)
            .map(|(&e, t)| t[e as usize])
            .product()
    }
}

impl fmt::Debug for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

/// All multi-indices of dimension `k` and total degree at most `N`, graded
/// lexicographically: degree-major, and within one degree the first
/// coordinate varies slowest, highest first.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosBasis {
    dim: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
}

/// `binomial(n, r)` without overflow for the sizes we care about.
pub fn binomial(n: u64, r: u64) -> u128 {
    let r = r.min(n - r.min(n));
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

impl ChaosBasis {
    pub fn new(dim: usize, degree: u32) -> Result<Self> {
        Self::with_cap(dim, degree, DEFAULT_BASIS_CAP)
    }

    pub fn with_cap(dim: usize, degree: u32, cap: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Argument("basis dimension must be at least 1".into()));
        }
        let count = binomial(degree as u64 + dim as u64, dim as u64);
        if count > cap as u128 {
            return Err(Error::BasisTooLarge { count, cap });
        }
        let mut indices = Vec::with_capacity(count as usize);
        let mut scratch = vec![0u32; dim];
        for d in 0..=degree {
            push_degree(&mut indices, &mut scratch, 0, d);
        }
        debug_assert_eq!(indices.len() as u128, count);
        let lookup = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        Ok(ChaosBasis {
            dim,
            degree,
            indices,
            lookup,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn multi_index(&self, pos: usize) -> &MultiIndex {
        &self.indices[pos]
    }

    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.lookup.get(alpha).copied()
    }

    /// Number of leading indices with degree `≤ d`; graded order makes this a prefix.
    pub fn prefix_len(&self, d: u32) -> usize {
        if d >= self.degree {
            return self.len();
        }
        binomial(d as u64 + self.dim as u64, self.dim as u64) as usize
    }

    /// Evaluates every basis function at `x`.
    pub fn eval_all(&self, x: &[f64]) -> Vec<f64> {
        let tables: Vec<Vec<f64>> = x
            .iter()
            .map(|&xi| hermite_table(self.degree as usize, xi))
            .collect();
        self.indices
            .iter()
            .map(|a| a.eval_from_tables(&tables))
            .collect()
    }
}

fn push_degree(out: &mut Vec<MultiIndex>, scratch: &mut [u32], coord: usize, remaining: u32) {
    if coord + 1 == scratch.len() {
        scratch[coord] = remaining;
        out.push(MultiIndex(scratch.to_vec()));
        return;
    }
    for e in (0..=remaining).rev() {
        scratch[coord] = e;
        push_degree(out, scratch, coord + 1, remaining - e);
    }
    scratch[coord] = 0;
}
