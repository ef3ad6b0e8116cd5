//! Fixed-precision text output shared by every CSV writer in the crate.

/// Formats `x` with `digits` significant digits, `%g` style: fixed notation
/// for moderate exponents, scientific otherwise, trailing zeros removed.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format has an exponent");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if exponent < -4 || exponent >= digits as i32 {
        return format!("{}e{}", trim_zeros(mantissa), exponent);
    }
    let decimals = (digits as i32 - 1 - exponent).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Rounds `x` to what [`sig`] would print.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    sig(x, digits).parse().unwrap_or(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig(-29.81234, 6), "-29.8123");
        assert_eq!(sig(0.0015, 6), "0.0015");
        assert_eq!(sig(6.8181818e-4, 6), "0.000681818");
        assert_eq!(sig(1.0e-6, 6), "1e-6");
        assert_eq!(sig(9.9999996, 6), "10");
        assert_eq!(sig(1234567.0, 6), "1.23457e6");
        assert_eq!(sig(0.0, 6), "0");
        assert_eq!(sig(-300.0, 6), "-300");
        assert_eq!(sig(8.0, 6), "8");
    }

    #[test]
    fn rounding_is_idempotent() {
        for &x in &[0.123456789, -42.4242424, 3.0e-9, 7.77777777e12] {
            let r = round_sig(x, 6);
            assert_eq!(sig(r, 6), sig(x, 6));
            assert_eq!(round_sig(r, 6), r);
        }
    }
}
