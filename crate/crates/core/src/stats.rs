//! Paired significance tests and summaries for comparing routers.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StatsError {
    LengthMismatch { a: usize, b: usize },
    TooFewSamples(usize),
    InvalidPValue,
}

impl fmt::Display for StatsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatsError::LengthMismatch { a, b } => write!(f, "paired samples differ in length ({a} vs {b})"),
            StatsError::TooFewSamples(n) => write!(f, "need at least two pairs, got {n}"),
            StatsError::InvalidPValue => write!(f, "p-values must lie in [0, 1]"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for StatsError {}

/// Relative slack when comparing permuted means with the observed one, so
/// sign flips that reproduce it up to rounding count as ties.
const TIE_EPS: f64 = 1e-12;

/// One-sided paired permutation test of `H0: mean(b) >= mean(a)`.
///
/// Signs of the pairwise differences are flipped at random; the p-value is
/// `(1 + #{permuted mean >= observed}) / (1 + n_permutations)`.
pub fn permutation_test<R: Rng>(a: &[f64], b: &[f64], n_permutations: usize, rng: &mut R) -> Result<f64, StatsError> {
    let diffs = paired_differences(a, b)?;
    let n = diffs.len() as f64;
    let observed: f64 = diffs.iter().sum::<f64>() / n;
    let scale: f64 = diffs.iter().map(|d| d.abs()).sum::<f64>() / n;
    let threshold = observed - TIE_EPS * scale.max(f64::MIN_POSITIVE);
    let mut count = 0usize;
    for _ in 0..n_permutations {
        let mut sum = 0.0;
        // 64 signs per random word.
        for chunk in diffs.chunks(64) {
            let bits: u64 = rng.random();
            for (k, d) in chunk.iter().enumerate() {
                sum += if bits >> k & 1 == 1 { *d } else { -*d };
            }
        }
        if sum / n >= threshold {
            count += 1;
        }
    }
    Ok((1 + count) as f64 / (1 + n_permutations) as f64)
}

/// Fraction of all `2^n` sign assignments whose mean reaches the observed
/// one. Exact counterpart of [`permutation_test`] for small `n`.
pub fn exact_sign_flip_p(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let diffs = paired_differences(a, b)?;
    assert!(diffs.len() <= 24, "exact enumeration is limited to 24 pairs");
    let n = diffs.len();
    let observed: f64 = diffs.iter().sum::<f64>() / n as f64;
    let scale: f64 = diffs.iter().map(|d| d.abs()).sum::<f64>() / n as f64;
    let threshold = observed - TIE_EPS * scale.max(f64::MIN_POSITIVE);
    let total = 1u64 << n;
    let hits = (0..total)
        .filter(|mask| {
            let s: f64 = diffs.iter().enumerate().map(|(k, d)| if mask >> k & 1 == 1 { *d } else { -*d }).sum();
            s / n as f64 >= threshold
        })
        .count();
    Ok(hits as f64 / total as f64)
}

fn paired_differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>, StatsError> {
    if a.len() != b.len() {
        return Err(StatsError::LengthMismatch { a: a.len(), b: b.len() });
    }
    if a.len() < 2 {
        return Err(StatsError::TooFewSamples(a.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).collect())
}

/// Holm step-down adjustment, returned in input order.
pub fn holm_bonferroni(p_values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if p_values.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(StatsError::InvalidPValue);
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| p_values[i].total_cmp(&p_values[j]).then(i.cmp(&j)));
    let mut adjusted = alloc::vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        let scaled = ((m - rank) as f64 * p_values[i]).min(1.0);
        running = running.max(scaled);
        adjusted[i] = running;
    }
    Ok(adjusted)
}

/// Location and spread of a sample; quantiles interpolate linearly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Self {
        if samples.is_empty() {
            return Self { n: 0, mean: 0.0, median: 0.0, q25: 0.0, q75: 0.0, min: 0.0, max: 0.0 };
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        Self {
            n: s.len(),
            mean: s.iter().sum::<f64>() / s.len() as f64,
            median: quantile_sorted(&s, 0.5),
            q25: quantile_sorted(&s, 0.25),
            q75: quantile_sorted(&s, 0.75),
            min: s[0],
            max: s[s.len() - 1],
        }
    }
}

fn quantile_sorted(s: &[f64], q: f64) -> f64 {
    let pos = q * (s.len() - 1) as f64;
    let lo = crate::math::floor(pos) as usize;
    let hi = (lo + 1).min(s.len() - 1);
    let frac = pos - lo as f64;
    s[lo] + (s[hi] - s[lo]) * frac
}
