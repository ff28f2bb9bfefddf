//! CSV output of sweep rows.
//!
//! Header `variable,value,scheme,mean_sum_rate,stderr,feasible_frac,n_trials`,
//! LF line endings, floats printed with 9 significant digits in `%g` style.

use std::path::Path;

use crate::baselines::BaselineKind;
use crate::error::{Error, Result};

use super::sweep::SweepRow;

pub const HEADER: &str = "variable,value,scheme,mean_sum_rate,stderr,feasible_frac,n_trials";

const SIG_DIGITS: i32 = 9;

/// `%.9g`: fixed notation for exponents in `[-5, 9)`, scientific otherwise,
/// trailing zeros removed. NaN prints as `NaN`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // the exponent after rounding to the target precision
    let sci = format!("{:.*e}", (SIG_DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIG_DIGITS).contains(&exp) {
        let decimals = (SIG_DIGITS - 1 - exp).max(0) as usize;
        strip_zeros(format!("{x:.decimals$}"))
    } else {
        let m = strip_zeros(mantissa.to_string());
        format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
    }
}

fn strip_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// The file contents for `rows`.
pub fn write_csv(rows: &[SweepRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.variable,
            format_float(r.value),
            r.scheme,
            format_float(r.mean_sum_rate),
            format_float(r.stderr),
            format_float(r.feasible_frac),
            r.n_trials
        ));
    }
    out
}

/// Writes `rows` to `path`.
pub fn emit_csv(rows: &[SweepRow], path: &Path) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::Domain("no rows to write".into()));
    }
    std::fs::write(path, write_csv(rows)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Parses text produced by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(Error::Config("missing or unexpected CSV header".into()));
    }
    let num = |s: &str, line: usize| -> Result<f64> {
        s.parse::<f64>().map_err(|_| Error::Config(format!("line {line}: bad number {s:?}")))
    };
    lines
        .enumerate()
        .map(|(i, line)| {
            let ln = i + 2;
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::Config(format!("line {ln}: expected 7 fields, got {}", f.len())));
            }
            Ok(SweepRow {
                variable: f[0].parse()?,
                value: num(f[1], ln)?,
                scheme: f[2].parse::<BaselineKind>()?,
                mean_sum_rate: num(f[3], ln)?,
                stderr: num(f[4], ln)?,
                feasible_frac: num(f[5], ln)?,
                n_trials: f[6].parse().map_err(|_| Error::Config(format!("line {ln}: bad count {:?}", f[6])))?,
            })
        })
        .collect()
}
