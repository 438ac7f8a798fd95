use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    ViLcb,
    Vi,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::ViLcb => "vi-lcb",
            Algorithm::Vi => "vi",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vi-lcb" => Ok(Algorithm::ViLcb),
            "vi" => Ok(Algorithm::Vi),
            other => Err(Error::invalid(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Settings shared by the experiment drivers.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub c_b: f64,
    pub delta: f64,
    pub tau_max: Option<usize>,
    pub grid: Vec<u64>,
    pub trials: usize,
    pub out: Option<PathBuf>,
    /// Read grid values as total sample sizes instead of per-cell counts.
    pub total_n: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            algorithms: vec![Algorithm::ViLcb],
            c_b: 0.05,
            delta: 0.1,
            tau_max: None,
            grid: exp_grid(4.0, 0.5, 13),
            trials: 10,
            out: None,
            total_n: false,
        }
    }
}

/// `floor(e^{start + step k})` for `k = 0..count`.
pub fn exp_grid(start: f64, step: f64, count: usize) -> Vec<u64> {
    (0..count)
        .map(|k| (start + step * k as f64).exp().floor() as u64)
        .collect()
}

/// Comma-separated integers.
pub fn parse_grid(s: &str) -> Result<Vec<u64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<u64>()
                .map_err(|e| Error::invalid(format!("grid entry `{x}`: {e}")))
        })
        .collect()
}

fn parse_value<T: FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e| Error::invalid(format!("{key}: {e}")))
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::invalid("sample grid is empty"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("at least one trial is required"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("no algorithm selected"));
        }
        if !(self.c_b > 0.0) {
            return Err(Error::invalid("c_b must be positive"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0,1)"));
        }
        Ok(())
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "seed" => self.seed = parse_value(key, value)?,
            "cb" | "c_b" => self.c_b = parse_value(key, value)?,
            "delta" => self.delta = parse_value(key, value)?,
            "trials" => self.trials = parse_value(key, value)?,
            "tau_max" | "tau-max" => self.tau_max = Some(parse_value(key, value)?),
            "grid" => self.grid = parse_grid(value)?,
            "algo" => {
                self.algorithms = value
                    .split(',')
                    .map(|a| a.trim().parse())
                    .collect::<Result<_>>()?
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "total_n" | "total-n" => self.total_n = parse_value(key, value)?,
            other => {
                return Err(Error::invalid(format!(
                    "unknown configuration key `{other}`"
                )))
            }
        }
        Ok(())
    }

    /// Applies a `key=value` file; blank lines and `#` comments are skipped.
    /// Keys not understood here are returned for the caller.
    pub fn apply_file(&mut self, text: &str) -> Result<BTreeMap<String, String>> {
        let mut rest = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, "expected key=value"))?;
            match self.set(k, v) {
                Ok(()) => {}
                Err(Error::Invalid(msg)) if msg.starts_with("unknown configuration key") => {
                    rest.insert(k.trim().to_string(), v.trim().to_string());
                }
                Err(e) => return Err(e),
            }
        }
        Ok(rest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_matches_reference_points() {
        let g = exp_grid(4.0, 0.5, 13);
        assert_eq!(g.len(), 13);
        assert_eq!(&g[..3], &[54, 90, 148]);
        assert_eq!(*g.last().unwrap(), 22026);
    }

    #[test]
    fn file_settings() {
        let mut c = RunConfig::default();
        let rest = c
            .apply_file("# comment\nseed=7\ncb = 0.5\ngrid=1,2,3\nalgo=vi-lcb,vi\nstates=5\n")
            .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.c_b, 0.5);
        assert_eq!(c.grid, vec![1, 2, 3]);
        assert_eq!(c.algorithms, vec![Algorithm::ViLcb, Algorithm::Vi]);
        assert_eq!(rest.get("states").map(String::as_str), Some("5"));
        assert!(c.apply_file("seed 7\n").is_err());
        assert!(c.apply_file("trials=x\n").is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.trials = 0;
        assert!(c.validate().is_err());
    }
}
