//! Plain-text matrix format for tabular MDPs.
//!
//! ```text
//! S A gamma            (discounted)   |   S A H   (episodic)
//! reward block         S lines of A values (H such blocks when episodic)
//! kernel blocks        S*A lines of S values, row (s, a) in s-major order
//! [mask]               optional: the word `mask` then S lines of A 0/1 flags
//! ```
//!
//! Fields are separated by one space; numbers use 17 significant digits.
//! A discount is always printed in scientific notation, a horizon as a bare
//! integer, which is how the reader tells the two headers apart.

use std::io::{BufRead, Write};

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::mdp::model::{ActionMask, DiscountedMDP, EpisodicMDP, Kernel, TransitionRow};
use crate::textfmt::fmt17;

#[derive(Clone, Debug)]
pub enum MdpFile {
    Discounted(DiscountedMDP),
    Episodic(EpisodicMDP),
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt17).collect::<Vec<_>>().join(" ")
}

fn write_rewards<W: Write>(w: &mut W, reward: ndarray::ArrayView2<f64>) -> Result<()> {
    for row in reward.outer_iter() {
        writeln!(w, "{}", join(row.iter().copied()))?;
    }
    Ok(())
}

fn write_kernel<W: Write>(w: &mut W, kernel: &Kernel) -> Result<()> {
    for row in kernel.rows() {
        writeln!(w, "{}", join(row.to_dense(kernel.num_states())))?;
    }
    Ok(())
}

fn write_mask<W: Write>(w: &mut W, mask: Option<&ActionMask>) -> Result<()> {
    let Some(mask) = mask else { return Ok(()) };
    writeln!(w, "mask")?;
    for s in 0..mask.num_states() {
        let flags: Vec<&str> = (0..mask.num_actions())
            .map(|a| if mask.is_allowed(s, a) { "1" } else { "0" })
            .collect();
        writeln!(w, "{}", flags.join(" "))?;
    }
    Ok(())
}

pub fn write_discounted<W: Write>(mdp: &DiscountedMDP, w: &mut W) -> Result<()> {
    writeln!(
        w,
        "{} {} {}",
        mdp.num_states(),
        mdp.num_actions(),
        fmt17(mdp.gamma())
    )?;
    write_rewards(w, mdp.reward().view())?;
    write_kernel(w, mdp.kernel())?;
    write_mask(w, mdp.mask())
}

pub fn write_episodic<W: Write>(mdp: &EpisodicMDP, w: &mut W) -> Result<()> {
    writeln!(
        w,
        "{} {} {}",
        mdp.num_states(),
        mdp.num_actions(),
        mdp.horizon()
    )?;
    for block in mdp.reward().outer_iter() {
        write_rewards(w, block)?;
    }
    for kernel in mdp.kernels() {
        write_kernel(w, kernel)?;
    }
    write_mask(w, mdp.mask())
}

pub fn write_mdp<W: Write>(file: &MdpFile, w: &mut W) -> Result<()> {
    match file {
        MdpFile::Discounted(m) => write_discounted(m, w),
        MdpFile::Episodic(m) => write_episodic(m, w),
    }
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self) -> Result<Option<String>> {
        loop {
            match self.inner.next() {
                None => return Ok(None),
                Some(l) => {
                    self.line += 1;
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(Some(l));
                    }
                }
            }
        }
    }

    fn numbers(&mut self, expected: usize) -> Result<Vec<f64>> {
        let line = self
            .next_line()?
            .ok_or_else(|| Error::parse(self.line + 1, "unexpected end of file"))?;
        let values = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| Error::parse(self.line, format!("bad number `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.len() != expected {
            return Err(Error::parse(
                self.line,
                format!("expected {expected} values, found {}", values.len()),
            ));
        }
        Ok(values)
    }
}

fn read_kernel<R: BufRead>(lines: &mut Lines<R>, ns: usize, na: usize) -> Result<Kernel> {
    let mut rows = Vec::with_capacity(ns * na);
    for _ in 0..ns * na {
        rows.push(TransitionRow::from_dense(&lines.numbers(ns)?));
    }
    Kernel::new(ns, na, rows)
}

fn read_rewards<R: BufRead>(lines: &mut Lines<R>, ns: usize, na: usize) -> Result<Array2<f64>> {
    let mut flat = Vec::with_capacity(ns * na);
    for _ in 0..ns {
        flat.extend(lines.numbers(na)?);
    }
    Ok(Array2::from_shape_vec((ns, na), flat).expect("shape"))
}

fn read_mask<R: BufRead>(lines: &mut Lines<R>, ns: usize, na: usize) -> Result<Option<ActionMask>> {
    match lines.next_line()? {
        None => Ok(None),
        Some(l) if l.trim() == "mask" => {
            let mut flags = Vec::with_capacity(ns * na);
            for _ in 0..ns {
                flags.extend(lines.numbers(na)?.into_iter().map(|x| x != 0.0));
            }
            Ok(Some(ActionMask::new(ns, na, flags)?))
        }
        Some(_) => Err(Error::parse(
            lines.line,
            "trailing content after kernel blocks",
        )),
    }
}

pub fn read_mdp<R: BufRead>(reader: R) -> Result<MdpFile> {
    let mut lines = Lines {
        inner: reader.lines(),
        line: 0,
    };
    let header = lines
        .next_line()?
        .ok_or_else(|| Error::parse(1, "empty file"))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 3 {
        return Err(Error::parse(
            lines.line,
            "header must be `S A gamma` or `S A H`",
        ));
    }
    let parse_usize = |t: &str| {
        t.parse::<usize>()
            .map_err(|_| Error::parse(1, format!("bad integer `{t}`")))
    };
    let ns = parse_usize(tokens[0])?;
    let na = parse_usize(tokens[1])?;
    let third = tokens[2];
    let is_discount = third.contains(['.', 'e', 'E']) || third == "0";
    if is_discount {
        let gamma: f64 = third
            .parse()
            .map_err(|_| Error::parse(1, format!("bad discount `{third}`")))?;
        let reward = read_rewards(&mut lines, ns, na)?;
        let kernel = read_kernel(&mut lines, ns, na)?;
        let mut mdp = DiscountedMDP::new(kernel, reward, gamma)?;
        if let Some(mask) = read_mask(&mut lines, ns, na)? {
            mdp = mdp.with_mask(mask)?;
        }
        Ok(MdpFile::Discounted(mdp))
    } else {
        let hz = parse_usize(third)?;
        let mut flat = Vec::with_capacity(hz * ns * na);
        for _ in 0..hz {
            flat.extend(read_rewards(&mut lines, ns, na)?);
        }
        let reward = Array3::from_shape_vec((hz, ns, na), flat).expect("shape");
        let kernels = (0..hz)
            .map(|_| read_kernel(&mut lines, ns, na))
            .collect::<Result<Vec<_>>>()?;
        let mut mdp = EpisodicMDP::new(kernels, reward)?;
        if let Some(mask) = read_mask(&mut lines, ns, na)? {
            mdp = mdp.with_mask(mask)?;
        }
        Ok(MdpFile::Episodic(mdp))
    }
}
