use nalgebra::DMatrix;

use super::{hermite_table, ChaosBasis, QuadratureGrid};
use crate::error::{Error, Result};

/// Values `h_α(x_j)` of every basis function at every grid node, stored with
/// one column per node.
#[derive(Clone, Debug)]
pub struct BasisTable {
    values: DMatrix<f64>,
}

impl BasisTable {
    pub fn new(basis: &ChaosBasis, grid: &QuadratureGrid) -> Result<Self> {
        if basis.dim() != grid.dim() {
            return Err(Error::Argument(format!(
                "basis dimension {} does not match grid dimension {}",
                basis.dim(),
                grid.dim()
            )));
        }
        let n = basis.degree() as usize;
        let rule = grid.rule();
        let per_node: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| hermite_table(n, x)).collect();
        let k = basis.dim();
        let mut values = DMatrix::<f64>::zeros(basis.len(), grid.len());
        let mut digits = vec![0usize; k];
        for j in 0..grid.len() {
            for (c, d) in digits.iter_mut().enumerate() {
                *d = grid.digit(j, c);
            }
            let mut col = values.column_mut(j);
            for (pos, alpha) in basis.indices().iter().enumerate() {
                let mut v = 1.0;
                for (c, &e) in alpha.exponents().iter().enumerate() {
                    v *= per_node[digits[c]][e as usize];
                }
                col[pos] = v;
            }
        }
        Ok(BasisTable { values })
    }

    /// `rows × nodes` matrix of basis values.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn basis_len(&self) -> usize {
        self.values.nrows()
    }

    pub fn node_count(&self) -> usize {
        self.values.ncols()
    }

    /// `Σ_α c_α h_α(x_j)` for every node.
    pub fn combine(&self, coefficients: &[f64]) -> Vec<f64> {
        assert_eq!(coefficients.len(), self.basis_len());
        (0..self.node_count())
            .map(|j| {
                self.values
                    .column(j)
                    .iter()
                    .zip(coefficients)
                    .map(|(h, c)| h * c)
                    .sum()
            })
            .collect()
    }
}
