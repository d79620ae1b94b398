//! Trapezoidal quadrature on uniform samples.

/// Composite trapezoid rule over all samples.
pub fn trapezoid(values: &[f64], h: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Trapezoid weights for `n` samples.
pub fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n > 0 {
        w[0] *= 0.5;
        w[n - 1] *= 0.5;
    }
    if n == 1 {
        w[0] = 0.0;
    }
    w
}

/// Weights integrating the piecewise-linear interpolant of samples at
/// `origin + k h` exactly over `[lo, hi]`. Ends falling between nodes get
/// fractional cells.
pub fn trapezoid_weights_between(n: usize, origin: f64, h: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut w = vec![0.0; n];
    if n < 2 || hi <= lo {
        return w;
    }
    for k in 0..n - 1 {
        let a = origin + k as f64 * h;
        let b = a + h;
        let l = lo.max(a);
        let r = hi.min(b);
        if r <= l {
            continue;
        }
        // integral of the two hat functions over [l, r]
        let (sl, sr) = ((l - a) / h, (r - a) / h);
        let right = 0.5 * (sr * sr - sl * sl) * h;
        let left = (r - l) - right;
        w[k] += left;
        w[k + 1] += right;
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_exact_for_linear() {
        let h = 0.1;
        let v: Vec<f64> = (0..11).map(|i| 2.0 * i as f64 * h + 1.0).collect();
        assert!((trapezoid(&v, h) - 2.0).abs() < 1e-14);
        let w = trapezoid_weights(11, h);
        let s: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        assert!((s - 2.0).abs() < 1e-14);
    }

    #[test]
    fn fractional_cells() {
        let h = 1.0 / 7.0;
        let w = trapezoid_weights_between(8, 0.0, h, 0.25, 0.8);
        let total: f64 = w.iter().sum();
        assert!((total - 0.55).abs() < 1e-14);
        let lin: f64 = w.iter().enumerate().map(|(k, wk)| wk * (k as f64 * h)).sum();
        assert!((lin - 0.5 * (0.8f64.powi(2) - 0.25f64.powi(2))).abs() < 1e-14);
    }
}
