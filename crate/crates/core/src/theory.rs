//! Numerical verification of the bounds the shaping rule promises.
//!
//! Four families of checks:
//!
//! * a discount sweep over the 5/8 -> 7/8 transition, reproducing the
//!   reference table of shaping values and the sign flip below the critical
//!   discount;
//! * exhaustive sign enumeration over every strictly improving transition on
//!   the 1/m grid;
//! * randomized outcome-consistency fuzzing: for alpha < 0.5 every correct
//!   trajectory must out-earn every incorrect one, whatever the potentials,
//!   lengths, and segment counts do;
//! * finite-difference checks of the two closed-form sensitivities (slope
//!   gamma - 1 in the starting potential at fixed gain; slope
//!   -Phi(s_next) * (1 - gamma_min) / l_ref in segment length below the
//!   clamp, 0 above it).
//!
//! Everything is deterministic given a seed and returns reports as plain
//! data so callers can gate on them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::ShapingConfig;
use crate::error::Error;
use crate::exec;
use crate::shaping::{gamma_at_length, shaping_term, total_reward};
use crate::trajectory::{PotentialProfile, PotentialSource};

/// One row of the discount sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaTableRow {
    pub gamma: f64,
    /// gamma times the destination potential.
    pub discounted_next: f64,
    /// Shaping value of the 5/8 -> 7/8 transition at this discount.
    pub shaping: f64,
}

/// The transition the sweep examines.
pub const GAMMA_TABLE_PHI_K: f64 = 0.625;
pub const GAMMA_TABLE_PHI_NEXT: f64 = 0.875;

/// Printed reference values: (gamma, discounted_next, shaping).
pub const GAMMA_TABLE_REFERENCE: [(f64, f64, f64); 5] = [
    (1.0, 0.875, 0.250),
    (0.9, 0.788, 0.163),
    (0.8, 0.700, 0.075),
    (0.7, 0.613, -0.013),
    (0.6, 0.525, -0.100),
];

/// Sweeps the discount over {1.0, 0.9, 0.8, 0.7, 0.6} for the 5/8 -> 7/8
/// transition. The sign flips between 0.8 and 0.7 because the critical
/// discount of the pair is 5/7 ~ 0.714.
pub fn reproduce_gamma_table() -> Vec<GammaTableRow> {
    GAMMA_TABLE_REFERENCE
        .iter()
        .map(|&(gamma, _, _)| GammaTableRow {
            gamma,
            discounted_next: gamma * GAMMA_TABLE_PHI_NEXT,
            shaping: shaping_term(GAMMA_TABLE_PHI_K, GAMMA_TABLE_PHI_NEXT, gamma),
        })
        .collect()
}

/// Discount below which a strictly improving transition stops paying:
/// Phi(s_k) / Phi(s_next). Undefined when the destination is 0.
pub fn critical_gamma(phi_k: f64, phi_next: f64) -> Result<f64, Error> {
    if phi_next == 0.0 {
        return Err(Error::Config("critical discount undefined for phi_next = 0".into()));
    }
    Ok(phi_k / phi_next)
}

/// A strictly improving grid transition with a non-positive shaping value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignViolation {
    pub phi_k: f64,
    pub phi_next: f64,
    pub shaping: f64,
}

/// Result of enumerating all strictly improving transitions on the 1/m grid
/// at one discount.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignReport {
    pub gamma: f64,
    /// Number of strictly improving pairs examined: m * (m + 1) / 2.
    pub pairs: usize,
    /// Smallest shaping value seen.
    pub min_shaping: f64,
    /// Pairs with shaping <= 0 (empty when gamma clears every critical
    /// ratio; the worst ratio on the grid is (m-1)/m).
    pub non_positive: Vec<SignViolation>,
}

/// Enumerates every strictly improving transition phi_k < phi_next on the
/// 1/m grid and records the shaping sign at discount `gamma`.
pub fn sign_consistency(gamma: f64, m: usize) -> Result<SignReport, Error> {
    if m == 0 {
        return Err(Error::Config("grid resolution m must be positive".into()));
    }
    let mut pairs = 0usize;
    let mut min_shaping = f64::INFINITY;
    let mut non_positive = Vec::new();
    for i in 0..m {
        for j in (i + 1)..=m {
            let phi_k = i as f64 / m as f64;
            let phi_next = j as f64 / m as f64;
            let f = shaping_term(phi_k, phi_next, gamma);
            pairs += 1;
            min_shaping = min_shaping.min(f);
            if f <= 0.0 {
                non_positive.push(SignViolation { phi_k, phi_next, shaping: f });
            }
        }
    }
    Ok(SignReport { gamma, pairs, min_shaping, non_positive })
}

/// Outcome of the randomized consistency fuzz.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub trials: usize,
    /// Trials where a correct total fell below 1 - alpha or an incorrect
    /// total rose above alpha. Must be 0.
    pub violations: usize,
    /// Smallest total reward seen with outcome 1.
    pub min_correct: f64,
    /// Largest total reward seen with outcome 0.
    pub max_incorrect: f64,
    /// min_correct - max_incorrect.
    pub margin: f64,
    /// Guaranteed lower bound on the margin: 1 - 2 * alpha.
    pub margin_bound: f64,
}

/// Maximum segment count the fuzzer samples.
pub const FUZZ_MAX_SEGMENTS: usize = 24;

/// One fuzz trial: a random grid profile with K in [1, 24] and random
/// segment lengths in [0, 2 * l_ref], scored once as correct and once as
/// incorrect. Returns (correct_total, incorrect_total).
pub fn consistency_trial(seed: u64, index: usize, config: &ShapingConfig) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(exec::mix_seed(seed, 0xC0, index as u64));
    let m = config.m_rollouts;
    let k = rng.gen_range(1..=FUZZ_MAX_SEGMENTS);
    let values: Vec<f64> = (0..=k).map(|_| rng.gen_range(0..=m) as f64 / m as f64).collect();
    let lengths: Vec<usize> =
        (0..k).map(|_| rng.gen_range(0..=2 * config.l_ref as usize)).collect();
    let profile = PotentialProfile::from_values(values, m, PotentialSource::Log)
        .expect("grid values are in range");
    let correct = total_reward(&profile, &lengths, 1.0, config).expect("lengths match");
    let incorrect = total_reward(&profile, &lengths, 0.0, config).expect("lengths match");
    (correct, incorrect)
}

/// Fuzzes the outcome-consistency bound: min correct total >= 1 - alpha and
/// max incorrect total <= alpha, however potentials and lengths fall.
/// Requires alpha < 0.5 (validated); trials run concurrently and reduce by
/// min/max/count, so scheduling cannot change the report.
pub fn fuzz_task_consistency(
    trials: usize,
    seed: u64,
    config: &ShapingConfig,
) -> Result<ConsistencyReport, Error> {
    config.validate()?;
    if trials == 0 {
        return Err(Error::Config("trials must be positive".into()));
    }
    let totals = exec::map_range(trials, |i| consistency_trial(seed, i, config));

    let floor = 1.0 - config.alpha;
    let ceiling = config.alpha;
    let mut violations = 0usize;
    let mut min_correct = f64::INFINITY;
    let mut max_incorrect = f64::NEG_INFINITY;
    for &(correct, incorrect) in &totals {
        if correct < floor || incorrect > ceiling {
            violations += 1;
        }
        min_correct = min_correct.min(correct);
        max_incorrect = max_incorrect.max(incorrect);
    }
    Ok(ConsistencyReport {
        trials,
        violations,
        min_correct,
        max_incorrect,
        margin: min_correct - max_incorrect,
        margin_bound: 1.0 - 2.0 * config.alpha,
    })
}

/// Result of the finite-difference sensitivity checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub samples: usize,
    pub step: f64,
    /// Worst |fd - (gamma - 1)| for the starting-potential slope at fixed
    /// gain and length.
    pub max_err_phi: f64,
    /// Worst |fd - analytic| for the length slope at fixed potentials,
    /// sampled on both sides of the clamp.
    pub max_err_length: f64,
}

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

/// Parameters the length-sensitivity check runs at.
const FD_GAMMA_MIN: f64 = 0.9;
const FD_L_REF: f64 = 512.0;

/// Central-difference check of both closed-form sensitivities at `samples`
/// random operating points. Lengths are sampled away from the clamp kink at
/// l_ref (margin 10 * step) so each difference stays within one regime.
pub fn derivative_check(samples: usize, step: f64, seed: u64) -> Result<DerivativeReport, Error> {
    if samples == 0 || !(step > 0.0) {
        return Err(Error::Config(format!(
            "need positive samples and step, got {samples} and {step}"
        )));
    }
    let margin = (10.0 * step).max(1e-3);

    let errs = exec::map_range(samples, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(exec::mix_seed(seed, 0xFD, i as u64));

        // slope in the starting potential, holding the raw gain fixed
        let phi_k: f64 = rng.gen_range(0.0..1.0);
        let delta: f64 = rng.gen_range(-phi_k..(1.0 - phi_k));
        let length: f64 = rng.gen_range(0.0..2.0 * FD_L_REF);
        let gamma = gamma_at_length(length, FD_L_REF, FD_GAMMA_MIN);
        let f = |p: f64| shaping_term(p, p + delta, gamma);
        let fd_phi = (f(phi_k + step) - f(phi_k - step)) / (2.0 * step);
        let err_phi = (fd_phi - (gamma - 1.0)).abs();

        // slope in the segment length, one side of the clamp at a time
        let phi_k2: f64 = rng.gen_range(0.0..1.0);
        let phi_next: f64 = rng.gen_range(0.0..1.0);
        let clamped = i % 2 == 1;
        let (length2, analytic) = if clamped {
            (rng.gen_range(FD_L_REF + margin..2.0 * FD_L_REF - margin), 0.0)
        } else {
            let l = rng.gen_range(margin..FD_L_REF - margin);
            (l, -phi_next * (1.0 - FD_GAMMA_MIN) / FD_L_REF)
        };
        let g = |l: f64| shaping_term(phi_k2, phi_next, gamma_at_length(l, FD_L_REF, FD_GAMMA_MIN));
        let fd_len = (g(length2 + step) - g(length2 - step)) / (2.0 * step);
        let err_len = (fd_len - analytic).abs();

        (err_phi, err_len)
    });

    let mut max_err_phi = 0.0f64;
    let mut max_err_length = 0.0f64;
    for &(p, l) in &errs {
        max_err_phi = max_err_phi.max(p);
        max_err_length = max_err_length.max(l);
    }
    Ok(DerivativeReport { samples, step, max_err_phi, max_err_length })
}
