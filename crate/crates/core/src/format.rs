//! Number formatting shared by every emitted file.

/// Scientific notation with 12 significant digits, e.g. `1.23456789012e-3`.
pub fn sig12(v: f64) -> String {
    if v == 0.0 {
        // Avoid "-0.00000000000e0" for negative zero.
        return format!("{:.11e}", 0.0f64);
    }
    format!("{v:.11e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(sig12(2.0), "2.00000000000e0");
        assert_eq!(sig12(-0.0), "0.00000000000e0");
        assert_eq!(sig12(1.0 / 3.0), "3.33333333333e-1");
        assert_eq!(sig12(sig12(0.123456789012345).parse().unwrap()), sig12(0.123456789012345));
    }
}
