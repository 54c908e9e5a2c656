use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Normalized density beyond which the box is considered too small.
const BOUNDARY_LIMIT: f64 = 1e-12;

/// A Lebesgue density sampled on a uniform grid over `[−L, L]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridDensity1D {
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    /// Normalization constant of the unnormalized profile (up to the
    /// arbitrary shift used to avoid overflow).
    pub z: f64,
}

fn trapezoid(h: f64, f: &[f64]) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1]))
}

fn uniform_grid(l: f64, n: usize) -> Result<(Vec<f64>, f64)> {
    if !(l > 0.0 && l.is_finite()) || n < 3 {
        return Err(Error::Argument(format!(
            "need L > 0 and at least 3 points, got L={l}, n={n}"
        )));
    }
    let h = 2.0 * l / (n - 1) as f64;
    Ok(((0..n).map(|i| -l + i as f64 * h).collect(), h))
}

impl GridDensity1D {
    pub fn spacing(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn mass(&self) -> f64 {
        trapezoid(self.spacing(), &self.values)
    }

    /// `∫ f(x) p(x) dx` by the trapezoidal rule.
    pub fn expectation<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let g: Vec<f64> = self
            .x
            .iter()
            .zip(&self.values)
            .map(|(&x, &p)| f(x) * p)
            .collect();
        trapezoid(self.spacing(), &g)
    }

    /// Density relative to `γ₁`: `p(x) √(2π) e^{x²/2}`.
    pub fn gamma_relative(&self) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.values)
            .map(|(&x, &p)| p * (2.0 * PI).sqrt() * (0.5 * x * x).exp())
            .collect()
    }

    /// `‖f − ρ‖_{L²(γ)}` where `ρ` is the γ-relative form of this density,
    /// computed as `∫ (f φ − p)² / φ dx` so the tails stay finite.
    pub fn l2_gamma_distance<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        let g: Vec<f64> = self
            .x
            .iter()
            .zip(&self.values)
            .map(|(&x, &p)| {
                let phi = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
                let d = f(x) * phi - p;
                d * d / phi
            })
            .collect();
        trapezoid(self.spacing(), &g).sqrt()
    }

    /// `x,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,value\n");
        for (x, p) in self.x.iter().zip(&self.values) {
            let _ = writeln!(out, "{x:e},{p:e}");
        }
        out
    }
}

/// Stationary density of `dX = (−X + v(X))dt + √2 dW` on the line:
/// `p ∝ exp(−x²/2 + ∫₀ˣ v)`. The running integral of `v` uses Simpson's
/// rule on each cell.
pub fn oracle_1d<F>(v: F, l: f64, n_points: usize) -> Result<GridDensity1D>
where
    F: Fn(f64) -> f64 + Sync,
{
    let (x, h) = uniform_grid(l, n_points)?;
    let at_nodes: Vec<f64> = x.par_iter().map(|&xi| v(xi)).collect();
    let at_mid: Vec<f64> = x[..n_points - 1]
        .par_iter()
        .map(|&xi| v(xi + 0.5 * h))
        .collect();
    from_drift_samples(x, h, &at_nodes, &at_mid)
}

fn from_drift_samples(
    x: Vec<f64>,
    h: f64,
    at_nodes: &[f64],
    at_mid: &[f64],
) -> Result<GridDensity1D> {
    let n = x.len();
    if let Some(bad) = at_nodes.iter().chain(at_mid).find(|v| !v.is_finite()) {
        return Err(Error::Argument(format!(
            "drift is not finite on the grid ({bad})"
        )));
    }
    let mut log_p = vec![0.0; n];
    let mut running = 0.0;
    log_p[0] = -0.5 * x[0] * x[0];
    for i in 1..n {
        running += h / 6.0 * (at_nodes[i - 1] + 4.0 * at_mid[i - 1] + at_nodes[i]);
        log_p[i] = -0.5 * x[i] * x[i] + running;
    }
    let top = log_p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_p.iter().map(|l| (l - top).exp()).collect();
    let z = trapezoid(h, &raw);
    let values: Vec<f64> = raw.iter().map(|r| r / z).collect();
    let boundary = values[0].max(values[n - 1]);
    if boundary > BOUNDARY_LIMIT {
        return Err(Error::DomainTooSmall {
            boundary,
            limit: BOUNDARY_LIMIT,
        });
    }
    Ok(GridDensity1D { x, values, z })
}

/// Result of iterating the 1-D closed form to self-consistency.
#[derive(Clone, Debug)]
pub struct SelfConsistent1D {
    pub density: GridDensity1D,
    pub iterations: usize,
    /// Sup-norm change of the grid values in the last iteration.
    pub last_difference: f64,
}

/// Stationary density of the 1-D Vlasov equation with drift
/// `v(x) = ∫ b₀(x − y) p(y) dy`, by Picard iteration on the closed form
/// from `p₀ = γ₁` until successive grid densities differ by less than `tol`.
pub fn oracle_vlasov_1d<K>(
    kernel: K,
    l: f64,
    n_points: usize,
    tol: f64,
    max_iterations: usize,
) -> Result<SelfConsistent1D>
where
    K: Fn(f64) -> f64 + Sync,
{
    let (x, h) = uniform_grid(l, n_points)?;
    let mut p: Vec<f64> = x
        .iter()
        .map(|&xi| (-0.5 * xi * xi).exp() / (2.0 * PI).sqrt())
        .collect();
    let convolve = |p: &[f64], at: f64| -> f64 {
        let g: Vec<f64> = x
            .iter()
            .zip(p)
            .map(|(&y, &py)| kernel(at - y) * py)
            .collect();
        trapezoid(h, &g)
    };
    for iteration in 1..=max_iterations {
        let at_nodes: Vec<f64> = x.par_iter().map(|&xi| convolve(&p, xi)).collect();
        let at_mid: Vec<f64> = x[..n_points - 1]
            .par_iter()
            .map(|&xi| convolve(&p, xi + 0.5 * h))
            .collect();
        let next = from_drift_samples(x.clone(), h, &at_nodes, &at_mid)?;
        let diff = next
            .values
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        p.clone_from(&next.values);
        if diff < tol {
            return Ok(SelfConsistent1D {
                density: next,
                iterations: iteration,
                last_difference: diff,
            });
        }
    }
    Err(Error::Numeric(format!(
        "self-consistent 1-D oracle did not settle within {max_iterations} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_drift_is_standard_gaussian() {
        let g = oracle_1d(|_| 0.0, 10.0, 20_001).unwrap();
        assert!((g.mass() - 1.0).abs() < 1e-10);
        for (x, p) in g.x.iter().zip(&g.values).step_by(997) {
            let want = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
            assert!((p - want).abs() < 1e-12);
        }
        assert!(g.l2_gamma_distance(|_| 1.0) < 1e-10);
    }

    #[test]
    fn constant_drift_is_shifted_gaussian() {
        let c = 0.3;
        let g = oracle_1d(|_| c, 10.0, 20_001).unwrap();
        assert!((g.expectation(|x| x) - c).abs() < 1e-10);
        let rel = g.gamma_relative();
        for (x, r) in g.x.iter().zip(&rel).skip(5000).step_by(1000).take(10) {
            assert!((r - (c * x - 0.5 * c * c).exp()).abs() < 1e-9);
        }
        assert!(g.l2_gamma_distance(|x| (c * x - 0.5 * c * c).exp()) < 1e-9);
    }

    #[test]
    fn small_box_is_rejected() {
        assert!(matches!(
            oracle_1d(|_| 0.0, 3.0, 1001),
            Err(Error::DomainTooSmall { .. })
        ));
    }

    #[test]
    fn vlasov_oracle_is_symmetric_and_normalized() {
        let sc = oracle_vlasov_1d(|z| 0.2 * z.tanh(), 10.0, 801, 1e-12, 100).unwrap();
        let d = &sc.density;
        assert!((d.mass() - 1.0).abs() < 1e-10);
        assert!(sc.last_difference < 1e-12);
        let n = d.values.len();
        for i in 0..n / 2 {
            assert!((d.values[i] - d.values[n - 1 - i]).abs() < 1e-13);
        }
        // b₀(x − y) = 0.2 tanh(x − y) pushes mass away from the mean
        assert!(d.expectation(|x| x * x) > 1.0);
        assert!(d.to_csv().starts_with("x,value\n"));
    }
}
