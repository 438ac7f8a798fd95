//! Shared number formatting for every text and CSV output.

/// Formats a float with 17 significant digits in scientific notation, which
/// round-trips every `f64` exactly. Infinities print as `inf` / `-inf`.
pub fn fmt17(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}
