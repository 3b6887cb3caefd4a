//! Exact 1-Wasserstein distance between empirical measures on the circle.

use super::StochasticError;

/// `W1(μ, ν) = min_α ∫₀¹ |F_μ(t) − F_ν(t) − α| dt`, the optimum over rotations
/// of the transport plan, attained at a weighted median `α` of `F_μ − F_ν`.
///
/// The CDF difference is tracked in integer units of `1 / (n m)`.
pub fn w1_circle(a: &[f64], b: &[f64]) -> Result<f64, StochasticError> {
    if a.is_empty() || b.is_empty() {
        return Err(StochasticError::EmptySamples);
    }
    let (n, m) = (a.len() as i128, b.len() as i128);
    let mut events: Vec<(f64, i128)> = a
        .iter()
        .map(|&x| (x, m))
        .chain(b.iter().map(|&y| (y, -n)))
        .collect();
    events.sort_by(|p, q| p.0.total_cmp(&q.0));

    // (value of F_μ − F_ν in units, length of the interval where it holds)
    let mut segments: Vec<(i128, f64)> = Vec::with_capacity(events.len() + 1);
    let mut level = 0i128;
    let mut prev = 0.0;
    for (x, w) in events {
        if x > prev {
            segments.push((level, x - prev));
            prev = x;
        }
        level += w;
    }
    if prev < 1.0 {
        segments.push((level, 1.0 - prev));
    }

    let mut by_level = segments.clone();
    by_level.sort_by_key(|s| s.0);
    let total: f64 = by_level.iter().map(|s| s.1).sum();
    let mut acc = 0.0;
    let mut median = by_level[0].0;
    for (level, len) in &by_level {
        acc += len;
        median = *level;
        if acc >= total / 2.0 {
            break;
        }
    }
    let unit = (n * m) as f64;
    Ok(segments
        .iter()
        .map(|(level, len)| len * ((level - median).abs() as f64 / unit))
        .sum())
}
