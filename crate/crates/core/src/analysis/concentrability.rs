use std::io::Write;

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::textfmt::fmt17;

/// Largest density ratio between an optimal occupancy and the data
/// distribution, plain and with the numerator clipped at `1/S`. Discounted
/// inputs use a single step. `+inf` marks a cell that the data never covers.
#[derive(Clone, Debug)]
pub struct ConcentrabilityReport {
    pub c_star: f64,
    pub c_star_clipped: f64,
    /// `(h, s, a)` of the maximizing cell; `None` when every ratio is `0/0`.
    pub argmax: Option<(usize, usize, usize)>,
    pub argmax_clipped: Option<(usize, usize, usize)>,
    pub d_star: Array3<f64>,
    pub d_b: Array3<f64>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den == 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// Both coefficients over arrays `[steps, S, A]`, using `0/0 = 0`.
pub fn concentrability(d_star: &Array3<f64>, d_b: &Array3<f64>) -> Result<ConcentrabilityReport> {
    if d_star.dim() != d_b.dim() {
        return Err(Error::invalid("occupancies differ in shape"));
    }
    if d_star
        .iter()
        .chain(d_b.iter())
        .any(|&x| !(x >= 0.0 && x.is_finite()))
    {
        return Err(Error::invalid("occupancies must be finite and nonnegative"));
    }
    let (_, ns, _) = d_star.dim();
    let clip = 1.0 / ns as f64;
    let mut best = (0.0f64, None);
    let mut best_clipped = (0.0f64, None);
    for ((idx, &num), &den) in d_star.indexed_iter().zip(d_b.iter()) {
        let r = ratio(num, den);
        if r > best.0 || (best.1.is_none() && num > 0.0) {
            best = (r, Some(idx));
        }
        let rc = ratio(num.min(clip), den);
        if rc > best_clipped.0 || (best_clipped.1.is_none() && num > 0.0) {
            best_clipped = (rc, Some(idx));
        }
    }
    Ok(ConcentrabilityReport {
        c_star: best.0,
        c_star_clipped: best_clipped.0,
        argmax: best.1,
        argmax_clipped: best_clipped.1,
        d_star: d_star.clone(),
        d_b: d_b.clone(),
    })
}

/// Report CSV `metric,value,argmax_s,argmax_a[,argmax_h]` with 1-based steps.
pub fn write_report_csv<W: Write>(
    report: &ConcentrabilityReport,
    episodic: bool,
    w: &mut W,
) -> Result<()> {
    writeln!(
        w,
        "{}",
        if episodic {
            "metric,value,argmax_s,argmax_a,argmax_h"
        } else {
            "metric,value,argmax_s,argmax_a"
        }
    )?;
    let rows = [
        ("C_star", report.c_star, report.argmax),
        (
            "C_star_clipped",
            report.c_star_clipped,
            report.argmax_clipped,
        ),
    ];
    for (name, value, cell) in rows {
        let (h, s, a) = match cell {
            Some((h, s, a)) => ((h + 1).to_string(), s.to_string(), a.to_string()),
            None => (String::new(), String::new(), String::new()),
        };
        if episodic {
            writeln!(w, "{name},{},{s},{a},{h}", fmt17(value))?;
        } else {
            writeln!(w, "{name},{},{s},{a}", fmt17(value))?;
        }
    }
    Ok(())
}
