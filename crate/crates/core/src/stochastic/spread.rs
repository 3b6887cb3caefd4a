//! Support-radius estimators for samples on the circle.

use super::StochasticError;

pub const MIN_BINS: usize = 16;

/// Radius of the smallest arc covering every sample: half of one minus the
/// largest empty circular gap.
pub fn spread_upper(samples: &[f64]) -> Result<f64, StochasticError> {
    if samples.is_empty() {
        return Err(StochasticError::EmptySamples);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let wrap_gap = 1.0 - sorted[sorted.len() - 1] + sorted[0];
    let gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(wrap_gap, f64::max);
    Ok(((1.0 - gap) / 2.0).clamp(0.0, 0.5))
}

/// Occupancy of `bins` equal circular cells.
pub fn histogram(samples: &[f64], bins: usize) -> Vec<u64> {
    let mut counts = vec![0u64; bins];
    for &x in samples {
        let k = ((x * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    counts
}

/// Radius of the largest arc inside the support, estimated as half the
/// longest circular run of occupied cells. A point mass gives `1/(2 bins)`.
pub fn spread_lower(samples: &[f64], bins: usize) -> Result<f64, StochasticError> {
    if samples.is_empty() {
        return Err(StochasticError::EmptySamples);
    }
    if bins < MIN_BINS {
        return Err(StochasticError::TooFewBins(bins));
    }
    Ok(longest_run(&histogram(samples, bins)) as f64 / (2.0 * bins as f64))
}

/// Longest circular run of nonzero cells.
pub fn longest_run(counts: &[u64]) -> usize {
    let n = counts.len();
    if counts.iter().all(|&c| c > 0) {
        return n;
    }
    let mut best = 0;
    let mut run = 0;
    // two passes let a run cross the wrap point
    for k in 0..2 * n {
        if counts[k % n] > 0 {
            run += 1;
            best = best.max(run);
        } else {
            run = 0;
        }
    }
    best.min(n)
}

/// Spearman rank correlation, with tied values sharing their average rank.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn uniform(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        (0..n).map(|_| rng.gen_range(lo..hi)).collect()
    }

    #[test]
    fn upper_examples() {
        assert_eq!(spread_upper(&[0.3]).unwrap(), 0.0);
        assert!((spread_upper(&[0.0, 0.2]).unwrap() - 0.1).abs() < 1e-15);
        assert!((spread_upper(&[0.95, 0.05]).unwrap() - 0.05).abs() < 1e-15);
        assert!((spread_upper(&uniform(10_000, 0.0, 1.0)).unwrap() - 0.5).abs() < 0.01);
        assert_eq!(spread_upper(&[]), Err(StochasticError::EmptySamples));
    }

    #[test]
    fn lower_examples() {
        assert_eq!(spread_lower(&uniform(10_000, 0.0, 1.0), 64).unwrap(), 0.5);
        assert_eq!(spread_lower(&[0.4; 10], 64).unwrap(), 1.0 / 128.0);
        assert!((spread_lower(&uniform(10_000, 0.0, 0.2), 100).unwrap() - 0.1).abs() < 0.02);
        assert_eq!(spread_lower(&[0.4], 8), Err(StochasticError::TooFewBins(8)));
        // a run across the wrap point
        let mut wrapped = uniform(5_000, 0.9, 1.0);
        wrapped.extend(uniform(5_000, 0.0, 0.1));
        assert!((spread_lower(&wrapped, 100).unwrap() - 0.1).abs() < 0.01);
    }

    #[test]
    fn spearman_with_ties() {
        assert!(
            (spearman(&[1.0, 1.0, 2.0, 2.0], &[0.1, 0.2, 0.3, 0.4]) - 0.894_427_190_999_916).abs()
                < 1e-12
        );
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), -1.0);
    }
}
