//! Entropy and varentropy of an emotion score vector, in nats.
//!
//! Zero components contribute nothing to either sum (the `0 ln 0 = 0` limit),
//! so vectors with exact zeros from an underflowing softmax are handled.

use crate::types::EmotionScore;

/// Log base the thresholds are expressed in, recorded in calibration metadata.
pub const LOG_BASE: &str = "e";

pub fn entropy(p: &EmotionScore) -> f64 {
    entropy_of(p.probs())
}

pub fn varentropy(p: &EmotionScore) -> f64 {
    varentropy_of(p.probs())
}

/// `-Σ p ln p` over an arbitrary probability slice.
pub fn entropy_of(p: &[f64]) -> f64 {
    let h: f64 = p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum();
    // rounding can leave -0.0 or a tiny negative for one-hot vectors
    h.max(0.0)
}

/// `Σ p (ln p + H)²`: the variance of the surprisal under `p`.
pub fn varentropy_of(p: &[f64]) -> f64 {
    let h = entropy_of(p);
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| {
            let d = x.ln() + h;
            x * d * d
        })
        .sum()
}
