//! Per-cell CSV dump (`s,a,Q,b,N`, with a leading 1-based `h` for episodic
//! runs) and a plain-text run summary.

use std::io::Write;

use crate::error::Result;
use crate::textfmt::fmt17;
use crate::vilcb::solver::VilcbResult;

pub fn write_result_csv<W: Write>(result: &VilcbResult, episodic: bool, w: &mut W) -> Result<()> {
    let (hz, ns, na) = result.q.dim();
    writeln!(w, "{}", if episodic { "h,s,a,Q,b,N" } else { "s,a,Q,b,N" })?;
    for h in 0..hz {
        for s in 0..ns {
            for a in 0..na {
                if episodic {
                    write!(w, "{},", h + 1)?;
                }
                writeln!(
                    w,
                    "{s},{a},{},{},{}",
                    fmt17(result.q[[h, s, a]]),
                    fmt17(result.penalty[[h, s, a]]),
                    result.counts[[h, s, a]]
                )?;
            }
        }
    }
    Ok(())
}

/// `key=value` lines. `gap` is included when known.
pub fn write_summary<W: Write>(result: &VilcbResult, gap: Option<f64>, w: &mut W) -> Result<()> {
    if let Some(g) = gap {
        writeln!(w, "gap={}", fmt17(g))?;
    }
    writeln!(w, "samples={}", result.sample_size)?;
    writeln!(w, "iterations={}", result.iterations)?;
    if let Some(last) = result.deltas.last() {
        writeln!(w, "final_residual={}", fmt17(*last))?;
    }
    let residuals: Vec<String> = result.deltas.iter().map(|d| fmt17(*d)).collect();
    writeln!(w, "residuals={}", residuals.join(" "))?;
    Ok(())
}
