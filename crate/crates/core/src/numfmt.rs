//! Numeric serialization at 12 significant digits, for cross-run diffing.

/// Quantizes a finite value to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if x.is_finite() && x != 0.0 {
        format!("{x:.11e}").parse().unwrap_or(x)
    } else {
        x
    }
}

/// Shortest decimal form of the 12-significant-digit value; NaN prints
/// as `nan` and parses back with `f64::from_str`.
pub fn fmt_sig12(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else {
        format!("{}", sig12(x))
    }
}
