//! Number formatting shared by the CSV writers.

/// Formats `x` like C's `%.{digits}g`: `digits` significant digits, trailing
/// zeros removed, scientific notation outside `[1e-4, 10^digits)`.
pub fn sig_digits(x: f64, digits: usize) -> String {
    assert!(digits >= 1);
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::sig_digits;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig_digits(0.0, 9), "0");
        assert_eq!(sig_digits(0.375, 9), "0.375");
        assert_eq!(sig_digits(1.0 / 3.0, 9), "0.333333333");
        assert_eq!(sig_digits(123456789.0, 9), "123456789");
        assert_eq!(sig_digits(1234567890.0, 9), "1.23456789e+09");
        assert_eq!(sig_digits(0.000012345, 9), "1.2345e-05");
        assert_eq!(sig_digits(-2.5, 9), "-2.5");
        assert_eq!(sig_digits(0.0001, 3), "0.0001");
    }
}
