//! Small numeric helpers shared by the closed-form solvers.

/// Discriminants within this relative band of zero are double roots.
pub const ZERO_SLACK: f64 = 1e-14;

/// Square root of a discriminant `d` whose natural magnitude is `scale`.
///
/// `None` when `d` is negative beyond rounding, `Some(0.0)` inside the
/// rounding band (a double root), `Some(√d)` otherwise.
pub fn root_sqrt(d: f64, scale: f64) -> Option<f64> {
    let band = ZERO_SLACK * scale;
    if d < -band {
        None
    } else if d <= band {
        Some(0.0)
    } else {
        Some(d.sqrt())
    }
}

/// `1 - c²` evaluated as `(1 - c)(1 + c)`.
pub fn one_minus_sq(c: f64) -> f64 {
    (1.0 - c) * (1.0 + c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discriminant_bands() {
        assert_eq!(root_sqrt(-1.0, 1.0), None);
        assert_eq!(root_sqrt(-1e-16, 1.0), Some(0.0));
        assert_eq!(root_sqrt(1e-16, 1.0), Some(0.0));
        assert_eq!(root_sqrt(4.0, 1.0), Some(2.0));
        assert_eq!(root_sqrt(1e-8, 5e4), Some(1e-4));
    }
}
