//! Fixed significant-digit formatting for CSV output.

/// Significant digits written to CSV files.
pub const CSV_SIG_DIGITS: usize = 6;

/// Formats `x` with [`CSV_SIG_DIGITS`] significant digits in the style of
/// C's `%g`: fixed notation for exponents in [-4, 6), scientific otherwise,
/// trailing zeros removed. NaN and infinities print as `NaN`, `inf`, `-inf`.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let p = CSV_SIG_DIGITS;
    // the exponent after rounding to p digits decides the notation
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..p as i32).contains(&exp) {
        let decimals = (p as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// [`sig6`] for an optional value; `None` becomes an empty field.
pub fn sig6_opt(x: Option<f64>) -> String {
    x.map(sig6).unwrap_or_default()
}
