//! Closed-form profiles used as test data, bases and ground truths.

/// `exp(1 - 1/(1 - y^2))` on `|y| < 1` with `y = (x - center) / half_width`,
/// zero outside. Smooth, compactly supported, peak value 1.
pub fn smooth_bump(x: f64, center: f64, half_width: f64) -> f64 {
    let y = (x - center) / half_width;
    if y.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - y * y)).exp()
    }
}

/// `(1 - y^2)^k` on `|y| < 1`, zero outside; `C^{k-1}` at the support ends.
pub fn polynomial_bump(x: f64, center: f64, half_width: f64, k: i32) -> f64 {
    let y = (x - center) / half_width;
    if y.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - y * y).powi(k)
    }
}

/// Smooth step rising from 0 at `s <= 0` to 1 at `s >= 1`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / s).exp();
        let b = (-1.0 / (1.0 - s)).exp();
        a / (a + b)
    }
}
