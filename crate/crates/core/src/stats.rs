//! Comparison statistics over per-run samples: the unpaired Wilcoxon
//! rank-sum test and the Vargha-Delaney A12 effect size.

use std::cmp::Ordering;
use std::fmt;

use serde::Serialize;
use statrs::function::erf::erfc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("sample `{label}` has {len} values, at least {min} required")]
    TooFewValues {
        label: String,
        len: usize,
        min: usize,
    },
    #[error("sample `{0}` contains a non-finite value")]
    NonFinite(String),
}

/// Named sample of per-run measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub label: String,
    pub values: Vec<f64>,
}

impl SampleSet {
    pub fn new(label: impl Into<String>, values: Vec<f64>) -> Result<Self, StatsError> {
        let label = label.into();
        if values.is_empty() {
            return Err(StatsError::TooFewValues {
                label,
                len: 0,
                min: 1,
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StatsError::NonFinite(label));
        }
        Ok(Self { label, values })
    }

    pub fn median(&self) -> f64 {
        quantile(&self.values, 0.5)
    }

    pub fn iqr(&self) -> f64 {
        quantile(&self.values, 0.75) - quantile(&self.values, 0.25)
    }
}

/// Linearly interpolated quantile of the sorted values.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Outcome of a two-sided rank-sum test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSumTest {
    /// Mann-Whitney U of the first sample.
    pub u: f64,
    pub z: f64,
    pub p_value: f64,
    /// Every value in both samples was identical; `p_value` is 1.
    pub degenerate: bool,
}

/// Two-sided unpaired Wilcoxon rank-sum test: midranks for ties,
/// tie-corrected normal approximation with continuity correction.
pub fn wilcoxon_rank_sum(a: &SampleSet, b: &SampleSet) -> Result<RankSumTest, StatsError> {
    for s in [a, b] {
        if s.values.len() < 3 {
            return Err(StatsError::TooFewValues {
                label: s.label.clone(),
                len: s.values.len(),
                min: 3,
            });
        }
    }
    let (n1, n2) = (a.values.len(), b.values.len());
    let n = n1 + n2;
    let mut pooled: Vec<(f64, bool)> = a
        .values
        .iter()
        .map(|&v| (v, true))
        .chain(b.values.iter().map(|&v| (v, false)))
        .collect();
    pooled.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let midrank = (i + j + 1) as f64 / 2.0;
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += midrank * pooled[i..j].iter().filter(|p| p.1).count() as f64;
        i = j;
    }

    let (n1f, n2f, nf) = (n1 as f64, n2 as f64, n as f64);
    let u1 = rank_sum_a - n1f * (n1f + 1.0) / 2.0;
    let u2 = n1f * n2f - u1;
    let mean = n1f * n2f / 2.0;
    let var = n1f * n2f / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return Ok(RankSumTest {
            u: u1,
            z: 0.0,
            p_value: 1.0,
            degenerate: true,
        });
    }
    let z = (u1.max(u2) - mean - 0.5) / var.sqrt();
    // two-sided: 2 * (1 - Phi(z))
    let p = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(RankSumTest {
        u: u1,
        z,
        p_value: p,
        degenerate: false,
    })
}

/// Conventional magnitude label of an A12 value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Magnitude {
    Negligible,
    Small,
    Medium,
    Large,
}

impl fmt::Display for Magnitude {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Magnitude::Negligible => "negligible",
            Magnitude::Small => "small",
            Magnitude::Medium => "medium",
            Magnitude::Large => "large",
        })
    }
}

impl Magnitude {
    pub fn of(a12: f64) -> Self {
        // rounded so that e.g. 0.71 lands on the boundary, not below it
        let d = ((a12 - 0.5).abs() * 1e9).round() / 1e9;
        if d < 0.06 {
            Magnitude::Negligible
        } else if d < 0.14 {
            Magnitude::Small
        } else if d < 0.21 {
            Magnitude::Medium
        } else {
            Magnitude::Large
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectSize {
    pub a12: f64,
    pub magnitude: Magnitude,
}

/// Probability that a draw from `a` beats a draw from `b`, ties counting
/// half.
pub fn vargha_delaney_a12(a: &SampleSet, b: &SampleSet) -> EffectSize {
    let mut wins: u64 = 0;
    let mut ties: u64 = 0;
    for x in &a.values {
        for y in &b.values {
            match x.total_cmp(y) {
                Ordering::Greater => wins += 1,
                Ordering::Equal => ties += 1,
                Ordering::Less => {}
            }
        }
    }
    let pairs = (a.values.len() * b.values.len()) as u64;
    let a12 = (2 * wins + ties) as f64 / (2 * pairs) as f64;
    EffectSize {
        a12,
        magnitude: Magnitude::of(a12),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(label: &str, v: &[f64]) -> SampleSet {
        SampleSet::new(label, v.to_vec()).unwrap()
    }

    #[test]
    fn identical_samples() {
        let a = set("a", &[1.0, 2.0, 3.0, 4.0]);
        let t = wilcoxon_rank_sum(&a, &a).unwrap();
        assert_eq!(t.p_value, 1.0);
        let e = vargha_delaney_a12(&a, &a);
        assert_eq!(e.a12, 0.5);
        assert_eq!(e.magnitude, Magnitude::Negligible);
    }

    #[test]
    fn separated_samples() {
        let a = set("a", &(1..=10).map(f64::from).collect::<Vec<_>>());
        let b = set("b", &(11..=20).map(f64::from).collect::<Vec<_>>());
        assert!(wilcoxon_rank_sum(&a, &b).unwrap().p_value < 0.001);
        let e = vargha_delaney_a12(&b, &a);
        assert_eq!(e.a12, 1.0);
        assert_eq!(e.magnitude, Magnitude::Large);
    }

    #[test]
    fn overlapping_small_samples() {
        let a = set("a", &[1.0, 2.0, 3.0]);
        let b = set("b", &[2.0, 3.0, 4.0]);
        assert!(wilcoxon_rank_sum(&a, &b).unwrap().p_value > 0.05);
    }

    #[test]
    fn a12_counts_ties_half() {
        let a = set("a", &[1.0, 2.0]);
        assert_eq!(vargha_delaney_a12(&a, &a).a12, 0.5);
    }

    #[test]
    fn degenerate_sample() {
        let a = set("a", &[2.0, 2.0, 2.0]);
        let t = wilcoxon_rank_sum(&a, &a).unwrap();
        assert!(t.degenerate);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn input_validation() {
        assert!(SampleSet::new("x", vec![]).is_err());
        assert!(SampleSet::new("x", vec![f64::NAN]).is_err());
        let small = set("s", &[1.0, 2.0]);
        let ok = set("o", &[1.0, 2.0, 3.0]);
        assert!(matches!(
            wilcoxon_rank_sum(&small, &ok),
            Err(StatsError::TooFewValues { min: 3, .. })
        ));
    }

    #[test]
    fn magnitude_thresholds() {
        assert_eq!(Magnitude::of(0.55), Magnitude::Negligible);
        assert_eq!(Magnitude::of(0.44), Magnitude::Small);
        assert_eq!(Magnitude::of(0.64), Magnitude::Medium);
        assert_eq!(Magnitude::of(0.29), Magnitude::Large);
        assert_eq!(Magnitude::of(0.71), Magnitude::Large);
    }

    #[test]
    fn quantiles() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(set("v", &v).iqr(), 1.5);
    }
}
