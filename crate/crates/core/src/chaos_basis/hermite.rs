/// Normalized probabilists' Hermite polynomial `h_n(x)`, orthonormal in `L²(γ₁)`.
///
/// Uses `h_{n+1}(x) = (x h_n(x) − √n h_{n−1}(x)) / √(n+1)` from `h_0 = 1`.
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let mut prev = 0.0;
    let mut cur = 1.0;
    for m in 0..n {
        let next = (x * cur - (m as f64).sqrt() * prev) / ((m + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// `[h_0(x), …, h_n(x)]`.
pub fn hermite_table(n: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(1.0);
    if n == 0 {
        return out;
    }
    out.push(x);
    for m in 1..n {
        let next = (x * out[m] - (m as f64).sqrt() * out[m - 1]) / ((m + 1) as f64).sqrt();
        out.push(next);
    }
    out
}

/// `h_n'(x) = √n h_{n−1}(x)`.
pub fn hermite_derivative(n: usize, x: f64) -> f64 {
    if n == 0 {
        0.0
    } else {
        (n as f64).sqrt() * hermite_eval(n - 1, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Unnormalized He_n via the textbook recurrence He_{n+1} = x He_n − n He_{n−1}.
    fn he_unnormalized(n: usize, x: f64) -> f64 {
        let (mut a, mut b) = (1.0, x);
        if n == 0 {
            return a;
        }
        for m in 1..n {
            let c = x * b - m as f64 * a;
            a = b;
            b = c;
        }
        b
    }

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn low_order_values() {
        assert_eq!(hermite_eval(0, 7.3), 1.0);
        assert_eq!(hermite_eval(1, 0.5), 0.5);
        // h_2(1) = (1 − 1)/√2
        assert!(hermite_eval(2, 1.0).abs() < 1e-15);
        let x = 0.7;
        assert!((hermite_eval(2, x) - (x * x - 1.0) / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn matches_normalized_textbook_recurrence() {
        for n in 0..15 {
            for &x in &[-3.1, -0.4, 0.0, 1.3, 2.9] {
                let oracle = he_unnormalized(n, x) / factorial(n).sqrt();
                let got = hermite_eval(n, x);
                assert!(
                    (got - oracle).abs() <= 1e-12 * oracle.abs().max(1.0),
                    "n={n} x={x}"
                );
            }
        }
    }

    #[test]
    fn table_agrees_with_pointwise_evaluation() {
        let t = hermite_table(10, 1.7);
        for (n, v) in t.iter().enumerate() {
            assert!((v - hermite_eval(n, 1.7)).abs() < 1e-14);
        }
        assert_eq!(hermite_table(0, 3.0), vec![1.0]);
    }

    #[test]
    fn derivative_matches_central_difference() {
        let h = 1e-6;
        for n in 0..8 {
            let x = 0.37;
            let fd = (hermite_eval(n, x + h) - hermite_eval(n, x - h)) / (2.0 * h);
            assert!((hermite_derivative(n, x) - fd).abs() < 1e-7);
        }
    }
}
