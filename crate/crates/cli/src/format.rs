use wreathmix_core::BigRational;
use wreathmix_core::exact;

/// Significant digits in every rendered float.
pub const SIG_DIGITS: usize = 12;

/// `%.12g`-style rendering: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros trimmed.
pub fn g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= SIG_DIGITS as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
    trim_zeros(&format!("{:.*}", decimals, x)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// An exact quantity, as `num/den` or as a 12-digit float.
pub fn rational(r: &BigRational, exact_strings: bool) -> String {
    if exact_strings {
        format!("{}/{}", r.numer(), r.denom())
    } else {
        g(exact::to_f64(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_printf_g() {
        let cases = [
            (0.31606027941427883, "0.316060279414"),
            (1.0, "1"),
            (-2.5, "-2.5"),
            (123456789012.0, "123456789012"),
            (1234567890123.0, "1.23456789012e+12"),
            (1e-5, "1e-05"),
            (0.0001, "0.0001"),
            (2.0 / 3.0, "0.666666666667"),
            (1e300, "1e+300"),
        ];
        for (x, want) in cases {
            assert_eq!(g(x), want, "{x}");
        }
        assert_eq!(g(f64::INFINITY), "inf");
    }
}
