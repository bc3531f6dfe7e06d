//! Token-level credit redistribution.
//!
//! Within a segment, tokens with higher generation entropy carried more of
//! the decision, so they receive a larger share of the segment advantage:
//!
//! ```text
//! w_t = clip(1 + beta * (H_t - mean) / (std + epsilon), delta_min, delta_max)
//! A_t = A_k * w_t
//! ```
//!
//! Statistics are segment-local and population-form, computed over valid
//! tokens only. Invalid tokens still receive the plain segment advantage
//! (weight 1); they are excluded from the statistics so a run of masked
//! tokens cannot drag the mean. Before clipping the weights average exactly
//! 1 over the valid tokens, so redistribution shifts credit without
//! inventing any.

use crate::config::ShapingConfig;
use crate::error::Error;
use crate::trajectory::{SegmentPlan, TokenInfo};

/// Entropy-proportional weights for one segment's valid tokens.
///
/// A single token (or any constant-entropy segment) centers to zero and gets
/// weight exactly 1. `epsilon` only guards the division; passing 0 is legal
/// when the entropies are known non-constant.
pub fn entropy_weights(
    entropies: &[f64],
    beta: f64,
    delta_min: f64,
    delta_max: f64,
    epsilon: f64,
) -> Result<Vec<f64>, Error> {
    if entropies.is_empty() {
        return Err(Error::NoValidTokens);
    }
    // a constant segment (single tokens included) carries no signal to
    // redistribute on; short-circuit before the mean can pick up rounding
    let first = entropies[0];
    if entropies.iter().all(|&h| h == first) {
        return Ok(vec![1.0; entropies.len()]);
    }
    let n = entropies.len() as f64;
    let mean = entropies.iter().sum::<f64>() / n;
    let var = entropies.iter().map(|h| (h - mean) * (h - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + epsilon;
    Ok(entropies
        .iter()
        .map(|h| (1.0 + beta * ((h - mean) / denom)).clamp(delta_min, delta_max))
        .collect())
}

/// Spreads segment advantages over tokens.
///
/// Valid tokens get `A_k * w_t` with segment-local weights; invalid tokens
/// get `A_k`. A segment whose tokens are all invalid degrades to a uniform
/// broadcast (there is nothing to compute statistics over).
pub fn redistribute(
    segment_advantages: &[f64],
    plan: &SegmentPlan,
    tokens: &[TokenInfo],
    config: &ShapingConfig,
) -> Result<Vec<f64>, Error> {
    if segment_advantages.len() != plan.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} segment advantages for a plan of {} segments",
            segment_advantages.len(),
            plan.k()
        )));
    }
    let lengths = plan.segment_lengths(tokens.len())?;

    let mut out = Vec::with_capacity(tokens.len());
    let mut start = 0usize;
    for (seg, &len) in lengths.iter().enumerate() {
        let slice = &tokens[start..start + len];
        let a_k = segment_advantages[seg];

        let valid_entropies: Vec<f64> =
            slice.iter().filter(|t| t.valid).map(|t| t.entropy).collect();
        if valid_entropies.is_empty() {
            out.extend(std::iter::repeat(a_k).take(len));
        } else {
            let weights = entropy_weights(
                &valid_entropies,
                config.beta,
                config.delta_min,
                config.delta_max,
                config.epsilon,
            )?;
            let mut w = weights.iter();
            for tok in slice {
                if tok.valid {
                    out.push(a_k * w.next().expect("one weight per valid token"));
                } else {
                    out.push(a_k);
                }
            }
        }
        start += len;
    }
    Ok(out)
}

/// Uniform broadcast: every token gets its segment's advantage unchanged.
/// This is the `--no-tcr` path and the token rule for estimators that do not
/// model within-segment credit.
pub fn broadcast(
    segment_advantages: &[f64],
    plan: &SegmentPlan,
    token_count: usize,
) -> Result<Vec<f64>, Error> {
    if segment_advantages.len() != plan.k() {
        return Err(Error::DimensionMismatch(format!(
            "{} segment advantages for a plan of {} segments",
            segment_advantages.len(),
            plan.k()
        )));
    }
    let lengths = plan.segment_lengths(token_count)?;
    let mut out = Vec::with_capacity(token_count);
    for (seg, &len) in lengths.iter().enumerate() {
        out.extend(std::iter::repeat(segment_advantages[seg]).take(len));
    }
    Ok(out)
}
