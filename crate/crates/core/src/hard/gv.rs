use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream;

/// Largest horizon handled by the exhaustive lexicographic construction.
pub const LEXICOGRAPHIC_MAX_H: usize = 24;
pub const MAX_REJECTIONS: u64 = 10_000_000;

/// Binary code of length `horizon` with pairwise Hamming distance at least
/// `min_distance`. Bit `h` of a codeword is `theta_{h+1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GvCode {
    pub horizon: usize,
    pub min_distance: usize,
    pub codewords: Vec<u128>,
}

impl GvCode {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Codeword `i` as a 0/1 vector.
    pub fn bits(&self, i: usize) -> Vec<u8> {
        to_bits(self.codewords[i], self.horizon)
    }

    /// Smallest pairwise distance by exhaustive comparison (`None` below two words).
    pub fn min_pairwise_distance(&self) -> Option<u32> {
        let w = &self.codewords;
        (0..w.len())
            .flat_map(|i| (i + 1..w.len()).map(move |j| (w[i] ^ w[j]).count_ones()))
            .min()
    }
}

pub fn to_bits(word: u128, horizon: usize) -> Vec<u8> {
    (0..horizon).map(|h| ((word >> h) & 1) as u8).collect()
}

pub fn default_min_distance(horizon: usize) -> usize {
    horizon.div_ceil(8)
}

pub fn default_code_size(horizon: usize) -> usize {
    (horizon as f64 / 8.0).exp().ceil() as usize
}

/// Greedy code with distance `ceil(H/8)`, stopped at `target` words (default
/// `ceil(e^{H/8})`). Lexicographic for `H <= 24`, randomized beyond.
pub fn gilbert_varshamov(horizon: usize, target: Option<usize>, seed: u64) -> Result<GvCode> {
    if horizon == 0 || horizon > 128 {
        return Err(Error::invalid("code length must lie in 1..=128"));
    }
    let d = default_min_distance(horizon);
    let target = target.unwrap_or_else(|| default_code_size(horizon));
    let codewords = if horizon <= LEXICOGRAPHIC_MAX_H {
        lexicographic(horizon, d, target)
    } else {
        randomized(horizon, d, target, seed)
    };
    if codewords.len() < target {
        return Err(Error::invalid(format!(
            "greedy construction stopped at {} codewords, below the target {target}",
            codewords.len()
        )));
    }
    Ok(GvCode {
        horizon,
        min_distance: d,
        codewords,
    })
}

fn mark_ball(covered: &mut [u64], center: u32, horizon: usize, radius: usize, from: usize) {
    let i = center as usize;
    covered[i / 64] |= 1 << (i % 64);
    if radius == 0 {
        return;
    }
    for bit in from..horizon {
        mark_ball(covered, center ^ (1 << bit), horizon, radius - 1, bit + 1);
    }
}

fn lexicographic(horizon: usize, d: usize, target: usize) -> Vec<u128> {
    let n = 1usize << horizon;
    let mut covered = vec![0u64; n.div_ceil(64)];
    let mut out = Vec::new();
    for x in 0..n {
        if out.len() >= target {
            break;
        }
        if covered[x / 64] >> (x % 64) & 1 == 1 {
            continue;
        }
        out.push(x as u128);
        mark_ball(&mut covered, x as u32, horizon, d - 1, 0);
    }
    out
}

fn randomized(horizon: usize, d: usize, target: usize, seed: u64) -> Vec<u128> {
    let mask = if horizon == 128 {
        u128::MAX
    } else {
        (1u128 << horizon) - 1
    };
    let mut rng = stream(seed, "gv", 0);
    let mut out: Vec<u128> = Vec::new();
    let mut rejections = 0;
    while out.len() < target && rejections < MAX_REJECTIONS {
        let x = rng.random::<u128>() & mask;
        if out.iter().all(|&w| (w ^ x).count_ones() as usize >= d) {
            out.push(x);
        } else {
            rejections += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_one_takes_everything() {
        let c = gilbert_varshamov(8, Some(256), 0).unwrap();
        assert_eq!(c.min_distance, 1);
        assert_eq!(c.len(), 256);
        assert!(c.len() >= default_code_size(8));
    }

    #[test]
    fn distance_two_is_even_weight_code() {
        let c = gilbert_varshamov(16, Some(1 << 15), 0).unwrap();
        assert_eq!(c.len(), 1 << 15);
        assert!(c.codewords.iter().all(|w| w.count_ones() % 2 == 0));
        assert!(gilbert_varshamov(16, Some((1 << 15) + 1), 0).is_err());
    }

    #[test]
    fn default_target_and_distances() {
        let c = gilbert_varshamov(24, None, 0).unwrap();
        assert_eq!(c.len(), 21);
        assert!(c.min_pairwise_distance().unwrap() >= 3);
        let r = gilbert_varshamov(64, None, 5).unwrap();
        assert_eq!(r.len(), default_code_size(64));
        assert!(r.min_pairwise_distance().unwrap() >= 8);
        assert!(r.codewords.iter().all(|w| w >> 64 == 0));
    }

    #[test]
    fn bits_round_trip() {
        assert_eq!(to_bits(0b1011, 5), vec![1, 1, 0, 1, 0]);
    }
}
