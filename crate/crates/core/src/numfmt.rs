//! Number formatting for exported artifacts.

/// Rounds to 9 significant decimal digits. Non-finite values pass through.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}

/// Formats `x` with at most 9 significant digits, shortest form.
pub fn sig9(x: f64) -> String {
    let r = round_sig9(x);
    if r == 0.0 {
        // normalizes -0.0
        return "0".to_string();
    }
    format!("{r}")
}

/// Formats `x` so that parsing it back yields the identical `f64`.
pub fn lossless(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_significant_digits() {
        assert_eq!(sig9(0.123456789123), "0.123456789");
        assert_eq!(sig9(1.0), "1");
        assert_eq!(sig9(-0.0), "0");
        assert_eq!(sig9(12345.6789012), "12345.6789");
        assert_eq!(sig9(2.0 / 3.0), "0.666666667");
    }

    #[test]
    fn lossless_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 123456.789e10] {
            assert_eq!(lossless(x).parse::<f64>().unwrap(), x);
        }
    }
}
