//! Segment-level advantage rules.
//!
//! The shaping rule scores segment k of a trajectory with outcome R as
//!
//! ```text
//! A_k = R + alpha * F_k,    F_k = gamma_k(L_k) * Phi(s_{k+1}) - Phi(s_k)
//! ```
//!
//! where the discount falls linearly with segment length L_k from 1 to
//! gamma_min at l_ref. F_k is evaluated through its gain/tax split
//!
//! ```text
//! F_k = gamma_k * (Phi(s_{k+1}) - Phi(s_k)) - (1 - gamma_k) * Phi(s_k)
//! ```
//!
//! which is the same number algebraically and the form the diagnostics
//! report. Pinning one evaluation order makes [`shaping_term`] and
//! [`tax_decomposition`] agree bit for bit instead of merely to rounding.
//!
//! Two baselines live here for comparison: `mrt_advantages` (outcome plus
//! alpha times outcome-minus-potential, blind to segment length) and
//! `grpo_advantages` (group-relative normalized outcome, blind to segments).

use crate::config::ShapingConfig;
use crate::error::Error;
use crate::trajectory::{PotentialProfile, SegmentShaping};

/// Stabilizer in the group-relative denominator. Fixed rather than drawn
/// from config: changing it silently rescales baselines across runs.
pub const GRPO_EPSILON: f64 = 1e-8;

/// Length-dependent discount on real-valued lengths. The kink sits at
/// `l_ref`; beyond it the discount is clamped to `gamma_min`.
pub fn gamma_at_length(length: f64, l_ref: f64, gamma_min: f64) -> f64 {
    (1.0 - (length / l_ref) * (1.0 - gamma_min)).max(gamma_min)
}

/// Discount for a segment of `length` tokens.
///
/// `gamma(0) = 1`, `gamma(l_ref) = gamma_min` exactly, constant at
/// `gamma_min` beyond. Length 0 cannot arise from a segment plan (segments
/// are non-empty) but is accepted for synthetic inputs.
pub fn dynamic_gamma(length: usize, l_ref: u32, gamma_min: f64) -> Result<f64, Error> {
    if l_ref == 0 {
        return Err(Error::Config("l_ref must be positive".into()));
    }
    Ok(gamma_at_length(length as f64, f64::from(l_ref), gamma_min))
}

/// Gain/tax split of the shaping term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaxSplit {
    /// Undiscounted potential change of the transition.
    pub raw_gain: f64,
    /// Cost of occupying the starting state: (1 - gamma) * Phi(s_k).
    pub tax: f64,
}

/// Splits the shaping term into its undiscounted gain and stagnation tax.
/// `gamma * raw_gain - tax` recombines to [`shaping_term`] bit for bit.
pub fn tax_decomposition(phi_k: f64, phi_next: f64, gamma_k: f64) -> TaxSplit {
    TaxSplit { raw_gain: phi_next - phi_k, tax: (1.0 - gamma_k) * phi_k }
}

/// Shaping term for one segment transition, evaluated through the gain/tax
/// split (see the module doc for why the order is pinned).
pub fn shaping_term(phi_k: f64, phi_next: f64, gamma_k: f64) -> f64 {
    let split = tax_decomposition(phi_k, phi_next, gamma_k);
    gamma_k * split.raw_gain - split.tax
}

/// Per-segment discounts for a list of segment lengths.
pub fn segment_gammas(lengths: &[usize], l_ref: u32, gamma_min: f64) -> Result<Vec<f64>, Error> {
    lengths.iter().map(|&l| dynamic_gamma(l, l_ref, gamma_min)).collect()
}

/// Shaped advantages with explicit per-segment discounts. This is the entry
/// point for discount ablations (pass a constant vector for fixed gamma).
pub fn shape_advantages_with_gammas(
    profile: &PotentialProfile,
    gammas: &[f64],
    r_outcome: f64,
    alpha: f64,
) -> Result<Vec<f64>, Error> {
    let k = profile.k();
    if gammas.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "profile covers {k} segments but {} discounts were given",
            gammas.len()
        )));
    }
    let phi = profile.values();
    Ok((0..k)
        .map(|i| r_outcome + alpha * shaping_term(phi[i], phi[i + 1], gammas[i]))
        .collect())
}

/// Shaped advantages for one trajectory: outcome base plus the discounted
/// shaping term per segment. `r_outcome` is the raw binary outcome by
/// default; callers using a group-normalized base pass that instead.
pub fn shape_advantages(
    profile: &PotentialProfile,
    lengths: &[usize],
    r_outcome: f64,
    config: &ShapingConfig,
) -> Result<Vec<f64>, Error> {
    if lengths.len() != profile.k() {
        return Err(Error::DimensionMismatch(format!(
            "profile covers {} segments but {} lengths were given",
            profile.k(),
            lengths.len()
        )));
    }
    let gammas = segment_gammas(lengths, config.l_ref, config.gamma_min)?;
    shape_advantages_with_gammas(profile, &gammas, r_outcome, config.alpha)
}

/// Per-segment diagnostics (gain, tax, discount, length) for a sheet.
pub fn shaping_breakdown(
    profile: &PotentialProfile,
    gammas: &[f64],
    lengths: &[usize],
) -> Result<Vec<SegmentShaping>, Error> {
    let k = profile.k();
    if gammas.len() != k || lengths.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "profile covers {k} segments, got {} discounts and {} lengths",
            gammas.len(),
            lengths.len()
        )));
    }
    let phi = profile.values();
    Ok((0..k)
        .map(|i| {
            let split = tax_decomposition(phi[i], phi[i + 1], gammas[i]);
            SegmentShaping {
                raw_gain: split.raw_gain,
                tax: split.tax,
                gamma: gammas[i],
                length: lengths[i],
            }
        })
        .collect())
}

/// Baseline that rewards recovery: A_k = R + alpha * (R - Phi(s_k)). Uses
/// the K body potentials only; segment lengths never enter.
pub fn mrt_advantages(
    profile: &PotentialProfile,
    r_outcome: f64,
    alpha: f64,
) -> Result<Vec<f64>, Error> {
    let phi = profile.values();
    Ok((0..profile.k()).map(|i| r_outcome + alpha * (r_outcome - phi[i])).collect())
}

/// Centers values by their mean and divides by the population standard
/// deviation plus [`GRPO_EPSILON`].
pub fn group_normalize(values: &[f64]) -> Result<Vec<f64>, Error> {
    if values.len() < 2 {
        return Err(Error::GroupTooSmall(values.len()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + GRPO_EPSILON;
    Ok(values.iter().map(|v| (v - mean) / denom).collect())
}

/// Group-relative advantage: normalized outcome per trajectory, constant
/// within a trajectory.
pub fn grpo_advantages(outcomes: &[u8]) -> Result<Vec<f64>, Error> {
    let values: Vec<f64> = outcomes.iter().map(|&r| f64::from(r)).collect();
    group_normalize(&values)
}

/// Total shaped reward of a trajectory: the sum of its segment advantages.
/// With alpha < 0.5 the total of any correct trajectory (at least 1 - alpha)
/// exceeds the total of any incorrect one (at most alpha).
pub fn total_reward(
    profile: &PotentialProfile,
    lengths: &[usize],
    r_outcome: f64,
    config: &ShapingConfig,
) -> Result<f64, Error> {
    Ok(shape_advantages(profile, lengths, r_outcome, config)?.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::PotentialSource;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn profile(values: &[f64]) -> PotentialProfile {
        PotentialProfile::from_values(values.to_vec(), 8, PotentialSource::Log).unwrap()
    }

    #[test]
    fn gamma_endpoints() {
        assert_eq!(dynamic_gamma(0, 512, 0.9).unwrap(), 1.0);
        // the discount bottoms out exactly at l_ref
        assert_eq!(dynamic_gamma(512, 512, 0.9).unwrap(), 0.9);
        assert_eq!(dynamic_gamma(1024, 512, 0.9).unwrap(), 0.9);
        assert_relative_eq!(dynamic_gamma(256, 512, 0.9).unwrap(), 0.95, epsilon = 1e-12);
    }

    #[test]
    fn gamma_rejects_zero_l_ref() {
        assert!(dynamic_gamma(10, 0, 0.9).is_err());
    }

    #[test]
    fn shaping_term_matches_hand_value() {
        // gamma 0.9 on the 5/8 -> 7/8 transition
        let f = shaping_term(0.625, 0.875, 0.9);
        assert_relative_eq!(f, 0.1625, epsilon = 1e-12);
        // printed-precision target from the discount sweep
        assert!((f - 0.163).abs() <= 5e-4);
    }

    #[test]
    fn tax_split_values() {
        let split = tax_decomposition(0.5, 0.75, 0.9);
        assert_relative_eq!(split.raw_gain, 0.25, epsilon = 1e-15);
        assert_relative_eq!(split.tax, 0.05, epsilon = 1e-15);
        let recombined = 0.9 * split.raw_gain - split.tax;
        assert_relative_eq!(recombined, 0.175, epsilon = 1e-15);
        assert_eq!(recombined.to_bits(), shaping_term(0.5, 0.75, 0.9).to_bits());
    }

    #[test]
    fn shape_advantages_two_segment_example() {
        // K = 2, outcome 1, potentials [0.5, 0.875, 1.0], first segment at
        // l_ref (discount floors at 0.9), second of length 0 (discount 1)
        let cfg = ShapingConfig::default();
        let p = profile(&[0.5, 0.875, 1.0]);
        let a = shape_advantages(&p, &[512, 0], 1.0, &cfg).unwrap();

        // independent scalar route, direct form of the shaping term
        let a1 = 1.0 + 0.3 * (0.9 * 0.875 - 0.5);
        let a2 = 1.0 + 0.3 * (1.0 * 1.0 - 0.875);
        assert_relative_eq!(a[0], a1, epsilon = 1e-12);
        assert_relative_eq!(a[1], a2, epsilon = 1e-12);
        assert_relative_eq!(a[0], 1.08625, epsilon = 1e-9);
        assert_relative_eq!(a[1], 1.0375, epsilon = 1e-9);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let cfg = ShapingConfig::default();
        let p = profile(&[0.5, 0.875, 1.0]);
        assert!(matches!(
            shape_advantages(&p, &[512], 1.0, &cfg),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(shape_advantages_with_gammas(&p, &[0.9], 1.0, 0.3).is_err());
    }

    #[test]
    fn mrt_recovery_bonus() {
        let p = profile(&[0.5, 0.875, 1.0]);
        let a = mrt_advantages(&p, 1.0, 0.3).unwrap();
        // A_k = 1 + 0.3 * (1 - phi_k); terminal entry unused
        assert_eq!(a.len(), 2);
        assert_relative_eq!(a[0], 1.15, epsilon = 1e-12);
        assert_relative_eq!(a[1], 1.0375, epsilon = 1e-12);
    }

    #[test]
    fn grpo_pair() {
        let a = grpo_advantages(&[1, 0]).unwrap();
        // brute force: mean 0.5, population std 0.5
        let expect = 0.5 / (0.5 + GRPO_EPSILON);
        assert_relative_eq!(a[0], expect, epsilon = 1e-15);
        assert_relative_eq!(a[1], -expect, epsilon = 1e-15);
        assert!((a[0] - 1.0).abs() < 1e-7);
    }

    #[test]
    fn grpo_uniform_group_collapses_to_zero() {
        let a = grpo_advantages(&[1, 1, 1]).unwrap();
        assert!(a.iter().all(|&x| x == 0.0), "{a:?}");
    }

    #[test]
    fn grpo_skewed_group() {
        let a = grpo_advantages(&[1, 0, 0, 0]).unwrap();
        // brute force: mean 0.25, variance (0.75^2 + 3 * 0.25^2) / 4 = 3/16
        let std = (3.0f64 / 16.0).sqrt();
        assert_relative_eq!(a[0], 0.75 / (std + GRPO_EPSILON), epsilon = 1e-12);
        for &x in &a[1..] {
            assert_relative_eq!(x, -0.25 / (std + GRPO_EPSILON), epsilon = 1e-12);
        }
        assert!(a[0] > 0.0 && a[1..].iter().all(|&x| x < 0.0));
    }

    #[test]
    fn grpo_needs_two() {
        assert!(matches!(grpo_advantages(&[1]), Err(Error::GroupTooSmall(1))));
    }

    #[test]
    fn total_reward_extremes() {
        let cfg = ShapingConfig::default();
        // worst correct trajectory: one segment, potential collapses 1 -> 0,
        // discount floored. Lands exactly on 1 - alpha.
        let worst = total_reward(&profile(&[1.0, 0.0]), &[512], 1.0, &cfg).unwrap();
        assert_eq!(worst, 0.7);
        // best incorrect trajectory: potential jumps 0 -> 1 at discount 1.
        // Lands exactly on alpha.
        let best_wrong = total_reward(&profile(&[0.0, 1.0]), &[0], 0.0, &cfg).unwrap();
        assert_eq!(best_wrong, 0.3);
        assert!(worst > best_wrong);
        // flat zero potentials, incorrect: nothing to earn
        let zero = total_reward(&profile(&[0.0, 0.0]), &[64], 0.0, &cfg).unwrap();
        assert_eq!(zero, 0.0);
    }

    #[test]
    fn stage_awareness_same_gain_different_start() {
        // same raw gain 0.2, same discount: starting lower is cheaper
        let lo = shaping_term(0.2, 0.4, 0.9);
        let hi = shaping_term(0.6, 0.8, 0.9);
        assert_relative_eq!(lo - hi, 0.4 * (1.0 - 0.9), epsilon = 1e-12);
        assert!(lo > hi);
    }

    #[test]
    fn longer_segments_earn_less_on_gains() {
        let cfg = ShapingConfig { l_ref: 128, ..Default::default() };
        let p = profile(&[0.25, 0.75, 1.0]);
        let short = shape_advantages(&p, &[16, 16], 1.0, &cfg).unwrap();
        let long = shape_advantages(&p, &[96, 16], 1.0, &cfg).unwrap();
        assert!(long[0] < short[0]);
        assert_eq!(long[1], short[1]);
    }

    #[test]
    fn telescoping_at_gamma_one_on_grid() {
        // with gamma = 1 everywhere the terms collapse to endpoint minus
        // start; on the 1/8 grid every intermediate sum is exact
        let p = profile(&[0.125, 0.5, 0.25, 0.875, 1.0]);
        let gammas = vec![1.0; 4];
        let a = shape_advantages_with_gammas(&p, &gammas, 0.0, 1.0).unwrap();
        let sum: f64 = a.iter().sum();
        assert_eq!(sum, 1.0 - 0.125);
    }

    #[test]
    fn mrt_sum_restates_as_count_minus_potentials() {
        let p = profile(&[0.125, 0.5, 0.25, 0.875, 1.0]);
        let a = mrt_advantages(&p, 1.0, 0.3).unwrap();
        let direct: f64 = a.iter().sum();
        let phi_sum: f64 = p.values()[..p.k()].iter().sum();
        let restated = p.k() as f64 * (1.0 + 0.3) - 0.3 * phi_sum;
        assert_relative_eq!(direct, restated, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn recombination_is_bit_exact(
            phi_k in 0.0f64..=1.0,
            phi_next in 0.0f64..=1.0,
            gamma in 0.5f64..=1.0,
        ) {
            let split = tax_decomposition(phi_k, phi_next, gamma);
            let recombined = gamma * split.raw_gain - split.tax;
            prop_assert_eq!(recombined.to_bits(), shaping_term(phi_k, phi_next, gamma).to_bits());
        }

        #[test]
        fn gamma_stays_in_band(length in 0usize..4096, l_ref in 1u32..2048) {
            let g = dynamic_gamma(length, l_ref, 0.9).unwrap();
            prop_assert!((0.9..=1.0).contains(&g));
            // monotone non-increasing in length
            let g2 = dynamic_gamma(length + 7, l_ref, 0.9).unwrap();
            prop_assert!(g2 <= g);
        }
    }
}
