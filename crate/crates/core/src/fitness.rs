//! Scalar fitness of a trace from the visit frequencies of the states it
//! passes through. Rarely visited states make a test case fitter.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which fitness function to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FitnessKind {
    /// Share of path states visited less often than the path's median.
    LowerThanMedian,
    /// Inverse of the rank-weighted sum of ascending visit frequencies.
    WeightedSum,
}

impl fmt::Display for FitnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitnessKind::LowerThanMedian => "lm",
            FitnessKind::WeightedSum => "ws",
        })
    }
}

impl FromStr for FitnessKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lm" => Ok(FitnessKind::LowerThanMedian),
            "ws" => Ok(FitnessKind::WeightedSum),
            other => Err(format!(
                "unknown fitness function `{other}` (expected lm or ws)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fitness {
    pub value: f64,
    pub kind: FitnessKind,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FitnessError {
    #[error("cannot score an empty path")]
    EmptyPath,
    #[error("path contains a state with zero visits")]
    ZeroFrequency,
}

fn check(freqs: &[u64]) -> Result<(), FitnessError> {
    if freqs.is_empty() {
        return Err(FitnessError::EmptyPath);
    }
    if freqs.contains(&0) {
        return Err(FitnessError::ZeroFrequency);
    }
    Ok(())
}

/// Lower-than-median fitness.
///
/// A single-state path scores the inverse of that state's frequency;
/// longer paths score the fraction of entries strictly below the median
/// (even lengths average the two middle values).
pub fn fitness_lm(freqs: &[u64]) -> Result<Fitness, FitnessError> {
    check(freqs)?;
    let value = if let [only] = freqs {
        1.0 / *only as f64
    } else {
        let mut sorted = freqs.to_vec();
        sorted.sort_unstable();
        let n = sorted.len();
        // doubled to stay in integers
        let median2 = if n.is_multiple_of(2) {
            sorted[n / 2 - 1] + sorted[n / 2]
        } else {
            2 * sorted[n / 2]
        };
        let below = sorted.iter().filter(|&&f| 2 * f < median2).count();
        below as f64 / n as f64
    };
    Ok(Fitness {
        value,
        kind: FitnessKind::LowerThanMedian,
    })
}

/// Weighted-sum fitness: `1 / Σ i·f_i` over the ascending frequencies,
/// ranks starting at one.
pub fn fitness_ws(freqs: &[u64]) -> Result<Fitness, FitnessError> {
    check(freqs)?;
    let mut sorted = freqs.to_vec();
    sorted.sort_unstable();
    let weighted: u128 = sorted
        .iter()
        .enumerate()
        .map(|(i, &f)| (i as u128 + 1) * f as u128)
        .sum();
    Ok(Fitness {
        value: 1.0 / weighted as f64,
        kind: FitnessKind::WeightedSum,
    })
}

pub fn fitness(kind: FitnessKind, freqs: &[u64]) -> Result<Fitness, FitnessError> {
    match kind {
        FitnessKind::LowerThanMedian => fitness_lm(freqs),
        FitnessKind::WeightedSum => fitness_ws(freqs),
    }
}
