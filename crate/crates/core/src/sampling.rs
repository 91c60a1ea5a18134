//! Categorical sampling helpers shared by every kernel.

use rand::Rng;

/// `ln(Σ exp(x_i))`, returning `-inf` for an empty or all `-inf` slice.
pub fn log_sum_exp(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + log_weights.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalized probabilities from log-weights (max-shifted, so huge weights
/// do not overflow).
pub fn probabilities_from_log_weights(log_weights: &[f64]) -> Vec<f64> {
    let total = log_sum_exp(log_weights);
    log_weights.iter().map(|&x| (x - total).exp()).collect()
}

/// Index `i` drawn with probability proportional to `exp(log_weights[i])`.
///
/// Returns `None` when every weight is zero.
pub fn sample_log_weights<R: Rng + ?Sized>(log_weights: &[f64], rng: &mut R) -> Option<usize> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let scaled: Vec<f64> = log_weights.iter().map(|&x| (x - max).exp()).collect();
    sample_weights(&scaled, rng)
}

/// Index `i` drawn with probability proportional to `weights[i] >= 0`.
pub fn sample_weights<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = Some(i);
            if target < acc {
                return Some(i);
            }
        }
    }
    // Rounding can leave `target` a hair above the accumulated total.
    last_positive
}
