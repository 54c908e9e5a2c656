use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::drift::FrozenDrift;
use crate::error::{Error, Result};

/// Lebesgue density on the cell centres of a uniform `n × n` mesh over
/// `[−L, L]²`; `values[i * n + j]` sits at `(centers[i], centers[j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity2D {
    pub l: f64,
    pub n: usize,
    pub h: f64,
    pub centers: Vec<f64>,
    pub values: Vec<f64>,
}

impl GridDensity2D {
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.h * self.h
    }

    /// Marginal density of coordinate `coord ∈ {0, 1}` at the cell centres.
    pub fn marginal(&self, coord: usize) -> Vec<f64> {
        let n = self.n;
        (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| {
                        if coord == 0 {
                            self.value(a, b)
                        } else {
                            self.value(b, a)
                        }
                    })
                    .sum::<f64>()
                    * self.h
            })
            .collect()
    }

    /// `∫ f(x) p(x) dx` by the midpoint rule.
    pub fn expectation<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                total += f(&[self.centers[i], self.centers[j]]) * self.value(i, j);
            }
        }
        total * self.h * self.h
    }

    /// `x,y,value` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,value\n");
        for i in 0..self.n {
            for j in 0..self.n {
                let _ = writeln!(
                    out,
                    "{:e},{:e},{:e}",
                    self.centers[i],
                    self.centers[j],
                    self.value(i, j)
                );
            }
        }
        out
    }
}

/// `B(z) = z / (e^z − 1)`.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-12 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Row-major band storage with half-width `w`; LU without pivoting.
struct Banded {
    size: usize,
    w: usize,
    data: Vec<f64>,
}

impl Banded {
    fn new(size: usize, w: usize) -> Self {
        Banded {
            size,
            w,
            data: vec![0.0; size * (2 * w + 1)],
        }
    }

    fn at(&mut self, r: usize, c: usize) -> &mut f64 {
        debug_assert!(r.abs_diff(c) <= self.w);
        &mut self.data[r * (2 * self.w + 1) + (c + self.w - r)]
    }

    fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * (2 * self.w + 1) + (c + self.w - r)]
    }

    #[allow(clippy::needless_range_loop)]
    fn solve(mut self, mut rhs: Vec<f64>) -> Result<Vec<f64>> {
        let (n, w) = (self.size, self.w);
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let pivot = self.get(k, k);
            if !(pivot.abs() > 1e-13 * scale) {
                return Err(Error::Discretization(format!(
                    "zero pivot {pivot:e} at row {k}; the discrete operator has a larger null space"
                )));
            }
            let last = (k + w).min(n - 1);
            for r in k + 1..=last {
                let l = self.get(r, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                *self.at(r, k) = 0.0;
                for c in k + 1..=last {
                    let u = self.get(k, c);
                    *self.at(r, c) -= l * u;
                }
                rhs[r] -= l * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let last = (k + w).min(n - 1);
            let mut s = rhs[k];
            for c in k + 1..=last {
                s -= self.get(k, c) * rhs[c];
            }
            rhs[k] = s / self.get(k, k);
        }
        Ok(rhs)
    }
}

/// Finite-volume solution of `∇·(∇u − b u) = 0`, `b = −x + v(x)`, on
/// `[−L, L]²` with zero-flux walls and unit mass. Face fluxes use
/// Scharfetter-Gummel exponential fitting, which keeps the discrete density
/// positive for any cell Péclet number.
pub fn oracle_fd_2d(v: &FrozenDrift, l: f64, n: usize) -> Result<GridDensity2D> {
    if v.dim() != 2 {
        return Err(Error::Argument(format!(
            "finite-volume oracle is 2-D, drift has dim {}",
            v.dim()
        )));
    }
    if !(l > 0.0 && l.is_finite()) || n < 4 {
        return Err(Error::Argument(format!(
            "need L > 0 and n >= 4, got L={l}, n={n}"
        )));
    }
    let h = 2.0 * l / n as f64;
    let centers: Vec<f64> = (0..n).map(|i| -l + (i as f64 + 0.5) * h).collect();
    let idx = |i: usize, j: usize| i * n + j;
    let mut a = Banded::new(n * n, n);
    let mut vbuf = [0.0; 2];

    // Flux from cell p to cell q across a face with normal drift component
    // `bn` (pointing p → q): h·J = B(−s) u_p − B(s) u_q, s = bn·h.
    let add_face = |a: &mut Banded, p: usize, q: usize, bn: f64| {
        let s = bn * h;
        let (bm, bp) = (bernoulli(-s), bernoulli(s));
        *a.at(p, p) += bm;
        *a.at(p, q) -= bp;
        *a.at(q, q) += bp;
        *a.at(q, p) -= bm;
    };
    for i in 0..n {
        for j in 0..n {
            if i + 1 < n {
                let x = [centers[i] + 0.5 * h, centers[j]];
                v.eval_into(&x, &mut vbuf)?;
                add_face(&mut a, idx(i, j), idx(i + 1, j), vbuf[0] - x[0]);
            }
            if j + 1 < n {
                let x = [centers[i], centers[j] + 0.5 * h];
                v.eval_into(&x, &mut vbuf)?;
                add_face(&mut a, idx(i, j), idx(i, j + 1), vbuf[1] - x[1]);
            }
        }
    }
    // the operator annihilates constants in the adjoint sense; pin one cell
    let pin = idx(n / 2, n / 2);
    let lo = pin.saturating_sub(n);
    let hi = (pin + n).min(n * n - 1);
    for c in lo..=hi {
        *a.at(pin, c) = 0.0;
    }
    *a.at(pin, pin) = 1.0;
    let mut rhs = vec![0.0; n * n];
    rhs[pin] = 1.0;
    let u = a.solve(rhs)?;
    if let Some((k, bad)) = u.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
        return Err(Error::Discretization(format!(
            "non-positive discrete density {bad:e} at cell {k}"
        )));
    }
    let total: f64 = u.iter().sum::<f64>() * h * h;
    Ok(GridDensity2D {
        l,
        n,
        h,
        centers,
        values: u.into_iter().map(|x| x / total).collect(),
    })
}
