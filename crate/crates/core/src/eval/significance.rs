use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PERMUTATIONS: usize = 10_000;

/// Absolute slack when comparing a permuted difference with the observed
/// one, so sums that differ only by rounding still count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificanceResult {
    pub metric: String,
    /// mean(A) - mean(B).
    pub observed_diff: f64,
    pub p_value: f64,
    pub permutations: usize,
}

/// Paired randomization test. Each permutation swaps the two systems'
/// values for every query independently with probability 1/2; the
/// two-tailed p-value is `(#{|perm diff| >= |observed|} + 1) / (P + 1)`.
pub fn stratified_shuffle_test(
    metric: &str,
    a: &BTreeMap<String, f64>,
    b: &BTreeMap<String, f64>,
    permutations: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    if a.len() != b.len() || a.keys().zip(b.keys()).any(|(x, y)| x != y) {
        return Err(Error::Contract("significance test needs identical query sets".into()));
    }
    if a.is_empty() {
        return Err(Error::Contract("significance test needs at least one query".into()));
    }
    if permutations == 0 {
        return Err(Error::Config("permutation count must be positive".into()));
    }
    let diffs: Vec<f64> = a.values().zip(b.values()).map(|(x, y)| x - y).collect();
    let n = diffs.len() as f64;
    let observed = diffs.iter().sum::<f64>() / n;
    let threshold = observed.abs() - TIE_TOLERANCE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut count = 0usize;
    let mut bits = 0u64;
    let mut left = 0u32;
    for _ in 0..permutations {
        let mut s = 0.0;
        for &d in &diffs {
            if left == 0 {
                bits = rng.random();
                left = 64;
            }
            s += if bits & 1 == 1 { -d } else { d };
            bits >>= 1;
            left -= 1;
        }
        if (s / n).abs() >= threshold {
            count += 1;
        }
    }
    Ok(SignificanceResult {
        metric: metric.to_string(),
        observed_diff: observed,
        p_value: (count + 1) as f64 / (permutations + 1) as f64,
        permutations,
    })
}
