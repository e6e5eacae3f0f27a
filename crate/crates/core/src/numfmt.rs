//! Stable decimal rendering for reports and exports.

/// Rounds to 9 significant digits and prints the shortest decimal form,
/// switching to exponent notation outside `[1e-4, 1e15)`.
pub fn sig9(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.8e}").parse().expect("own exponent format parses");
    if rounded == 0.0 {
        return "0".into();
    }
    let a = rounded.abs();
    if (1e-4..1e15).contains(&a) {
        rounded.to_string()
    } else {
        format!("{rounded:e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders() {
        assert_eq!(sig9(350.0), "350");
        assert_eq!(sig9(-25.0), "-25");
        assert_eq!(sig9(25.263315612345), "25.2633156");
        assert_eq!(sig9(-0.0), "0");
        assert_eq!(sig9(1.23456789012e-9), "1.23456789e-9");
        assert_eq!(sig9(f64::NAN), "nan");
        assert_eq!(sig9(0.5), "0.5");
    }
}
