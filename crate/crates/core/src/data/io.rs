//! Dataset CSV (`s,a,s'` or `h,s,a,s'`, steps 1-based) and trajectory files
//! (one trajectory per line, states and actions alternating).

use std::io::{BufRead, Write};

use crate::data::dataset::{Trajectory, Transition, TransitionDataset};
use crate::error::{Error, Result};

pub fn write_dataset_csv<W: Write>(data: &TransitionDataset, w: &mut W) -> Result<()> {
    let episodic = data.horizon().is_some();
    writeln!(w, "{}", if episodic { "h,s,a,s'" } else { "s,a,s'" })?;
    for t in data.transitions() {
        if episodic {
            writeln!(
                w,
                "{},{},{},{}",
                t.step + 1,
                t.state,
                t.action,
                t.next_state
            )?;
        } else {
            writeln!(w, "{},{},{}", t.state, t.action, t.next_state)?;
        }
    }
    Ok(())
}

/// Reads a dataset CSV. The header decides whether steps are present; `horizon`
/// must then be given.
pub fn read_dataset_csv<R: BufRead>(
    reader: R,
    num_states: usize,
    num_actions: usize,
    horizon: Option<usize>,
) -> Result<TransitionDataset> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(1, "missing header"))?;
    let header = header?;
    let episodic = match header.trim() {
        "s,a,s'" => false,
        "h,s,a,s'" => true,
        other => return Err(Error::parse(1, format!("unknown header `{other}`"))),
    };
    if episodic != horizon.is_some() {
        return Err(Error::invalid(
            "horizon must be given exactly for step-annotated data",
        ));
    }
    let width = if episodic { 4 } else { 3 };
    let mut transitions = Vec::new();
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<usize> = line
            .split(',')
            .map(|f| f.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::parse(i + 1, e.to_string()))?;
        if fields.len() != width {
            return Err(Error::parse(i + 1, format!("expected {width} fields")));
        }
        let t = if episodic {
            if fields[0] == 0 {
                return Err(Error::parse(i + 1, "steps start at 1"));
            }
            Transition::at_step(fields[0] - 1, fields[1], fields[2], fields[3])
        } else {
            Transition::new(fields[0], fields[1], fields[2])
        };
        transitions.push(t);
    }
    TransitionDataset::new(num_states, num_actions, horizon, transitions)
}

fn write_alternating<W: Write>(states: &[usize], actions: &[usize], w: &mut W) -> Result<()> {
    let mut parts = Vec::with_capacity(states.len() + actions.len());
    for (i, s) in states.iter().enumerate() {
        parts.push(s.to_string());
        if let Some(a) = actions.get(i) {
            parts.push(a.to_string());
        }
    }
    writeln!(w, "{}", parts.join(" "))?;
    Ok(())
}

pub fn write_trajectories<W: Write>(trajectories: &[Trajectory], w: &mut W) -> Result<()> {
    for t in trajectories {
        write_alternating(&t.states, &t.actions, w)?;
    }
    Ok(())
}

/// Splits every nonempty line into `(states, actions)`. A line with an odd
/// number of tokens ends in a state.
pub fn read_trajectories<R: BufRead>(reader: R) -> Result<Vec<Trajectory>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let tokens: Vec<usize> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e: std::num::ParseIntError| Error::parse(i + 1, e.to_string()))?;
        let states = tokens.iter().step_by(2).copied().collect();
        let actions = tokens.iter().skip(1).step_by(2).copied().collect();
        out.push(Trajectory { states, actions });
    }
    Ok(out)
}
