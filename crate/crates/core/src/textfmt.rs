//! Fixed-point text emission shared by the result files.
//!
//! Long fixed formats carry 17 significant digits followed by zero padding.
//! Seventeen digits are enough to
//! recover every `f64`, so parsing an emitted value gives back the original
//! unless it is too small to show 17 digits inside the field.

/// Formats `x` with exactly `decimals` digits after the point.
pub fn fixed(x: f64, decimals: usize) -> String {
    if !x.is_finite() || x == 0.0 || decimals < 17 {
        return format!("{:.*}", decimals, x);
    }
    let sci = format!("{:.16e}", x.abs());
    let (mant, exp) = sci.split_once('e').expect("scientific form");
    let exp: i64 = exp.parse().expect("exponent");
    let digits: String = mant.chars().filter(|c| *c != '.').collect();
    // Position of the last significant digit relative to the point.
    let last = 16 - exp;
    if last > decimals as i64 {
        return format!("{:.*}", decimals, x);
    }
    let mut out = String::with_capacity(decimals + 24);
    if x < 0.0 {
        out.push('-');
    }
    if exp < 0 {
        out.push('0');
        out.push('.');
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            for _ in digits.len()..int_len {
                out.push('0');
            }
            out.push('.');
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    let frac_len = out.len() - out.find('.').unwrap() - 1;
    for _ in frac_len..decimals {
        out.push('0');
    }
    out
}

/// Probability columns.
pub fn fixed50(x: f64) -> String {
    fixed(x, 50)
}

/// Ruin-factor and allocation columns.
pub fn fixed10(x: f64) -> String {
    format!("{:.10}", x)
}
