//! Results table in CSV form.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::simlab::SweepRow;

pub const HEADER: &str = "scheme,f,alpha,m,trials,true_n,mean_est,bias_norm,var_norm,theory_var_norm,cr_var_norm,improvement_of_ml,fallback_count,seed";

/// Formats like C's `%.9g`.
pub fn format_g9(x: f64) -> String {
    const DIGITS: i32 = 9;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_g9).unwrap_or_default()
}

/// Header plus one line per row, in the order given.
pub fn to_csv_string(rows: &[SweepRow]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        let fields = [
            r.scheme.label().to_string(),
            format_g9(r.f),
            format_g9(r.alpha),
            r.m.to_string(),
            r.trials.to_string(),
            r.true_n.to_string(),
            format_g9(r.mean_est),
            opt(r.bias_norm),
            opt(r.var_norm),
            opt(r.theory_var_norm),
            opt(r.cr_var_norm),
            opt(r.improvement_of_ml),
            r.fallback_count.to_string(),
            r.seed.to_string(),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::InvalidConfig("no results to write".into()));
    }
    fs::write(path, to_csv_string(rows))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g9_matches_printf() {
        let cases = [
            (0.0, "0"),
            (1.0, "1"),
            (0.05, "0.05"),
            (0.00293, "0.00293"),
            (2.14285714285e-3, "0.00214285714"),
            (2.14285714285e-5, "2.14285714e-05"),
            (5000.0, "5000"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (-0.5, "-0.5"),
            (1.0 / 3.0, "0.333333333"),
            (0.0001, "0.0001"),
            (9.9999999999, "10"),
        ];
        for (x, s) in cases {
            assert_eq!(format_g9(x), s, "{x}");
        }
    }

    #[test]
    fn g9_round_trips_to_nine_digits() {
        for x in [0.123456789123, 98765.4321987, 3.3e-7, 1e12 / 7.0] {
            let back: f64 = format_g9(x).parse().unwrap();
            assert!(((back - x) / x).abs() < 5e-9);
        }
    }
}
