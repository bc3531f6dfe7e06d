//! End-to-end scoring: segment, estimate potentials, shape, redistribute.
//!
//! [`score_record`] runs the full per-trajectory pipeline for the
//! stage-aware estimators. [`score_batch`] adds the pieces that only make
//! sense across trajectories: group-normalized outcome baselines and the
//! group-relative estimator itself, plus per-record seed streams so a batch
//! scores identically however it is scheduled.

use std::collections::BTreeMap;

use crate::config::ShapingConfig;
use crate::error::Error;
use crate::exec;
use crate::potential::{build_profile, RolloutOracle};
use crate::redistribution::{broadcast, redistribute};
use crate::segmentation::segment_entropies;
use crate::shaping::{
    group_normalize, mrt_advantages, segment_gammas, shape_advantages_with_gammas,
    shaping_breakdown,
};
use crate::trajectory::{self, AdvantageSheet, Estimator, SegmentPlan, TrajectoryRecord};

/// Knobs for one scoring run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreOptions {
    pub estimator: Estimator,
    /// Spread each segment advantage over its tokens by entropy weight.
    /// When off, every token inherits its segment's value unchanged. Only
    /// the shape estimator redistributes either way.
    pub token_weighting: bool,
    /// Ablation: replace the dynamic per-segment discount with a constant.
    pub fixed_gamma: Option<f64>,
    /// Use within-group normalized outcomes as the base reward in place of
    /// the raw binary outcome.
    pub normalize_outcome: bool,
    /// Base seed; each record draws rollouts from its own disjoint stream.
    pub seed: u64,
}

impl ScoreOptions {
    pub fn new(estimator: Estimator) -> Self {
        ScoreOptions {
            estimator,
            token_weighting: true,
            fixed_gamma: None,
            normalize_outcome: false,
            seed: 0,
        }
    }
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions::new(Estimator::Shape)
    }
}

fn check_options(options: &ScoreOptions) -> Result<(), Error> {
    if let Some(g) = options.fixed_gamma {
        if !(g > 0.0 && g <= 1.0) {
            return Err(Error::Config(format!("fixed gamma must be in (0, 1], got {g}")));
        }
    }
    Ok(())
}

fn first_violation(record: &TrajectoryRecord, config: &ShapingConfig) -> Result<(), Error> {
    if let Some(v) = trajectory::validate(record, config).into_iter().next() {
        return Err(Error::Record { id: record.id.clone(), message: v.to_string() });
    }
    Ok(())
}

/// Segment count for a record: logged profiles fix K as their length minus
/// one, otherwise the configured K applies.
fn segment_count(record: &TrajectoryRecord, config: &ShapingConfig) -> Result<usize, Error> {
    match &record.boundary_potentials {
        Some(logged) if logged.len() < 2 => Err(Error::DimensionMismatch(format!(
            "record {} logs {} potential(s); a profile needs at least 2",
            record.id,
            logged.len()
        ))),
        Some(logged) => Ok(logged.len() - 1),
        None => Ok(config.k_segments),
    }
}

fn plan_for(record: &TrajectoryRecord, config: &ShapingConfig) -> Result<SegmentPlan, Error> {
    let k = segment_count(record, config)?;
    segment_entropies(&record.entropies(), config.tau, k)
}

/// Scores one trajectory with a stage-aware estimator.
///
/// The group-relative estimator cannot be computed from a single record;
/// use [`score_batch`] for it. `outcome_reward` is the base reward, the raw
/// outcome unless the caller normalized it across a group.
pub fn score_record(
    record: &TrajectoryRecord,
    outcome_reward: f64,
    oracle: Option<&dyn RolloutOracle>,
    config: &ShapingConfig,
    options: &ScoreOptions,
    seed: u64,
) -> Result<AdvantageSheet, Error> {
    check_options(options)?;
    first_violation(record, config)?;
    let plan = plan_for(record, config)?;
    let token_count = record.tokens.len();

    match options.estimator {
        Estimator::Grpo => Err(Error::Config(
            "the group-relative estimator needs a batch of trajectories".into(),
        )),
        Estimator::Shape => {
            let profile = build_profile(record, &plan, oracle, config, seed)?;
            let lengths = plan.segment_lengths(token_count)?;
            let gammas = match options.fixed_gamma {
                Some(g) => vec![g; plan.k()],
                None => segment_gammas(&lengths, config.l_ref, config.gamma_min)?,
            };
            let segment_advantages =
                shape_advantages_with_gammas(&profile, &gammas, outcome_reward, config.alpha)?;
            let token_advantages = if options.token_weighting {
                redistribute(&segment_advantages, &plan, &record.tokens, config)?
            } else {
                broadcast(&segment_advantages, &plan, token_count)?
            };
            let terms = shaping_breakdown(&profile, &gammas, &lengths)?;
            Ok(AdvantageSheet {
                id: record.id.clone(),
                estimator: Estimator::Shape,
                boundaries: plan.boundaries().to_vec(),
                potentials: Some(profile.values().to_vec()),
                segment_advantages,
                token_advantages,
                shaping_terms: Some(terms),
            })
        }
        Estimator::Mrt => {
            let profile = build_profile(record, &plan, oracle, config, seed)?;
            let segment_advantages = mrt_advantages(&profile, outcome_reward, config.alpha)?;
            let token_advantages = broadcast(&segment_advantages, &plan, token_count)?;
            Ok(AdvantageSheet {
                id: record.id.clone(),
                estimator: Estimator::Mrt,
                boundaries: plan.boundaries().to_vec(),
                potentials: Some(profile.values().to_vec()),
                segment_advantages,
                token_advantages,
                shaping_terms: None,
            })
        }
    }
}

/// Within-group z-scores of the outcomes, scattered back to record order.
/// Records without a group id form one shared anonymous group.
fn grouped_outcome_scores(records: &[TrajectoryRecord]) -> Result<Vec<f64>, Error> {
    let mut groups: BTreeMap<Option<&str>, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(r.group_id.as_deref()).or_default().push(i);
    }
    let mut scores = vec![0.0; records.len()];
    for indices in groups.values() {
        let outcomes: Vec<f64> =
            indices.iter().map(|&i| f64::from(records[i].outcome)).collect();
        let z = group_normalize(&outcomes)?;
        for (&i, z) in indices.iter().zip(z) {
            scores[i] = z;
        }
    }
    Ok(scores)
}

/// Scores a batch of trajectories with one estimator.
///
/// Stage-aware estimators score records independently (and in parallel when
/// the `parallel` feature is on), each on the seed stream derived from its
/// position, so results never depend on scheduling. The group-relative
/// estimator z-scores outcomes within each group and broadcasts the score
/// to every token.
pub fn score_batch(
    records: &[TrajectoryRecord],
    oracle: Option<&dyn RolloutOracle>,
    config: &ShapingConfig,
    options: &ScoreOptions,
) -> Result<Vec<AdvantageSheet>, Error> {
    config.validate()?;
    check_options(options)?;
    for record in records {
        first_violation(record, config)?;
    }

    match options.estimator {
        Estimator::Grpo => {
            let scores = grouped_outcome_scores(records)?;
            Ok(records
                .iter()
                .zip(scores)
                .map(|(record, z)| AdvantageSheet {
                    id: record.id.clone(),
                    estimator: Estimator::Grpo,
                    boundaries: Vec::new(),
                    potentials: None,
                    segment_advantages: vec![z],
                    token_advantages: vec![z; record.tokens.len()],
                    shaping_terms: None,
                })
                .collect())
        }
        _ => {
            let rewards = if options.normalize_outcome {
                grouped_outcome_scores(records)?
            } else {
                records.iter().map(|r| f64::from(r.outcome)).collect()
            };
            exec::map_range(records.len(), |i| {
                let seed = exec::mix_seed(options.seed, 0x5C, i as u64);
                score_record(&records[i], rewards[i], oracle, config, options, seed)
            })
            .into_iter()
            .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shaping::{shape_advantages, GRPO_EPSILON};
    use crate::simulator::{
        rollout_oracle, sample_episode, ChainEnv, TabularPolicy,
    };
    use crate::trajectory::PotentialSource;

    fn cfg() -> ShapingConfig {
        ShapingConfig::default()
    }

    /// 12 tokens with spikes at 4 and 8; logged potentials for K = 3.
    fn logged_record(id: &str, outcome: u8) -> TrajectoryRecord {
        let mut entropies = vec![0.2; 12];
        entropies[4] = 2.0;
        entropies[8] = 2.4;
        let mut rec = TrajectoryRecord::new(id, outcome, &entropies);
        rec.boundary_potentials = Some(vec![0.125, 0.5, 0.75, 0.0]);
        rec
    }

    #[test]
    fn shape_sheet_matches_direct_computation() {
        let config = cfg();
        let rec = logged_record("t0", 1);
        let options = ScoreOptions::new(Estimator::Shape);
        let sheet = score_record(&rec, 1.0, None, &config, &options, 0).unwrap();

        assert_eq!(sheet.boundaries, vec![4, 8]);
        // terminal overwritten by the outcome despite the logged 0.0
        let potentials = sheet.potentials.clone().unwrap();
        assert_eq!(potentials, vec![0.125, 0.5, 0.75, 1.0]);

        let profile = crate::trajectory::PotentialProfile::from_values(
            potentials,
            config.m_rollouts,
            PotentialSource::Log,
        )
        .unwrap();
        let expected = shape_advantages(&profile, &[4, 4, 4], 1.0, &config).unwrap();
        assert_eq!(sheet.segment_advantages, expected);

        let terms = sheet.shaping_terms.as_ref().unwrap();
        assert_eq!(terms.len(), 3);
        assert_eq!(terms[0].length, 4);

        // token advantages compose segment advantage with entropy weights:
        // the constant first segment passes through, the spiked ones scale
        assert_eq!(&sheet.token_advantages[..4], &vec![expected[0]; 4][..]);
        for seg in 1..3 {
            let slice: Vec<f64> =
                rec.tokens[seg * 4..(seg + 1) * 4].iter().map(|t| t.entropy).collect();
            let weights = crate::redistribution::entropy_weights(
                &slice,
                config.beta,
                config.delta_min,
                config.delta_max,
                config.epsilon,
            )
            .unwrap();
            for (t, w) in weights.iter().enumerate() {
                let got = sheet.token_advantages[seg * 4 + t];
                assert!((got - expected[seg] * w).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn disabling_token_weighting_broadcasts() {
        let config = cfg();
        let rec = logged_record("t0", 1);
        let mut options = ScoreOptions::new(Estimator::Shape);
        options.token_weighting = false;
        let sheet = score_record(&rec, 1.0, None, &config, &options, 0).unwrap();
        for (t, &a) in sheet.token_advantages.iter().enumerate() {
            assert_eq!(a, sheet.segment_advantages[t / 4]);
        }
    }

    #[test]
    fn fixed_gamma_overrides_lengths() {
        let config = cfg();
        let rec = logged_record("t0", 1);
        let mut options = ScoreOptions::new(Estimator::Shape);
        options.fixed_gamma = Some(1.0);
        let sheet = score_record(&rec, 1.0, None, &config, &options, 0).unwrap();
        for term in sheet.shaping_terms.as_ref().unwrap() {
            assert_eq!(term.gamma, 1.0);
        }
        // undiscounted terms telescope: sum of F = terminal - start
        let total: f64 = sheet
            .segment_advantages
            .iter()
            .map(|a| (a - 1.0) / config.alpha)
            .sum();
        assert!((total - (1.0 - 0.125)).abs() < 1e-9);

        options.fixed_gamma = Some(1.5);
        assert!(score_record(&rec, 1.0, None, &config, &options, 0).is_err());
    }

    #[test]
    fn mrt_sheet_broadcasts_and_skips_breakdown() {
        let config = cfg();
        let rec = logged_record("t0", 0);
        let options = ScoreOptions::new(Estimator::Mrt);
        let sheet = score_record(&rec, 0.0, None, &config, &options, 0).unwrap();
        assert!(sheet.shaping_terms.is_none());
        // A_k = R + alpha (R - phi_k) with R = 0
        let expected: Vec<f64> =
            [0.125, 0.5, 0.75].iter().map(|p| -config.alpha * p).collect();
        assert_eq!(sheet.segment_advantages, expected);
        assert_eq!(sheet.token_advantages[0], expected[0]);
        assert_eq!(sheet.token_advantages[11], expected[2]);
    }

    #[test]
    fn single_records_cannot_be_group_relative() {
        let config = cfg();
        let rec = logged_record("t0", 1);
        let options = ScoreOptions::new(Estimator::Grpo);
        assert!(score_record(&rec, 1.0, None, &config, &options, 0).is_err());
    }

    #[test]
    fn grpo_batch_normalizes_within_groups() {
        let config = cfg();
        let mut records = Vec::new();
        for (i, (group, outcome)) in
            [("a", 1), ("a", 0), ("b", 1), ("b", 1), ("b", 0), ("b", 0)].iter().enumerate()
        {
            let mut r = logged_record(&format!("t{i}"), *outcome);
            r.group_id = Some((*group).to_string());
            records.push(r);
        }
        let options = ScoreOptions::new(Estimator::Grpo);
        let sheets = score_batch(&records, None, &config, &options).unwrap();

        let expected = 0.5 / (0.5 + GRPO_EPSILON);
        assert!((sheets[0].segment_advantages[0] - expected).abs() < 1e-12);
        assert!((sheets[1].segment_advantages[0] + expected).abs() < 1e-12);
        // group b: mean 0.5, population std 0.5
        assert!((sheets[2].segment_advantages[0] - expected).abs() < 1e-12);
        assert!((sheets[5].segment_advantages[0] + expected).abs() < 1e-12);
        // sequence-level: every token carries the same value
        assert!(sheets[0].token_advantages.iter().all(|&a| a == sheets[0].segment_advantages[0]));
        assert!(sheets[0].potentials.is_none());
        assert!(sheets[0].boundaries.is_empty());
    }

    #[test]
    fn ungrouped_records_share_one_group() {
        let config = cfg();
        let records = vec![logged_record("t0", 1), logged_record("t1", 0)];
        let options = ScoreOptions::new(Estimator::Grpo);
        let sheets = score_batch(&records, None, &config, &options).unwrap();
        let expected = 0.5 / (0.5 + GRPO_EPSILON);
        assert!((sheets[0].segment_advantages[0] - expected).abs() < 1e-12);
        assert!((sheets[1].segment_advantages[0] + expected).abs() < 1e-12);
    }

    #[test]
    fn singleton_group_is_an_error() {
        let config = cfg();
        let options = ScoreOptions::new(Estimator::Grpo);
        let records = vec![logged_record("only", 1)];
        assert!(matches!(
            score_batch(&records, None, &config, &options),
            Err(Error::GroupTooSmall(1))
        ));
    }

    #[test]
    fn normalized_outcome_shifts_the_base_reward() {
        let config = cfg();
        let records = vec![logged_record("t0", 1), logged_record("t1", 0)];
        let mut options = ScoreOptions::new(Estimator::Shape);
        options.normalize_outcome = true;
        let sheets = score_batch(&records, None, &config, &options).unwrap();

        let z = 0.5 / (0.5 + GRPO_EPSILON);
        let raw = ScoreOptions::new(Estimator::Shape);
        let direct = score_record(
            &records[0],
            z,
            None,
            &config,
            &raw,
            exec::mix_seed(options.seed, 0x5C, 0),
        )
        .unwrap();
        assert_eq!(sheets[0].segment_advantages, direct.segment_advantages);
        // shaping terms only differ at the terminal, where the realized
        // outcome (1 vs 0) replaces the logged potential
        let t0 = sheets[0].shaping_terms.as_ref().unwrap();
        let t1 = sheets[1].shaping_terms.as_ref().unwrap();
        assert_eq!(&t0[..2], &t1[..2]);
        assert!((t0[2].raw_gain - t1[2].raw_gain - 1.0).abs() < 1e-12);
    }

    #[test]
    fn batch_equals_per_record_kernel() {
        let config = cfg();
        let records: Vec<TrajectoryRecord> =
            (0..6).map(|i| logged_record(&format!("t{i}"), (i % 2) as u8)).collect();
        let options = ScoreOptions::new(Estimator::Shape);
        let sheets = score_batch(&records, None, &config, &options).unwrap();
        for (i, record) in records.iter().enumerate() {
            let seed = exec::mix_seed(options.seed, 0x5C, i as u64);
            let solo =
                score_record(record, f64::from(record.outcome), None, &config, &options, seed)
                    .unwrap();
            assert_eq!(sheets[i], solo);
        }
    }

    #[test]
    fn oracle_path_scores_simulated_records() {
        let env = ChainEnv::default_chain();
        let policy = TabularPolicy::uniform(&env);
        let config = crate::simulator::recommended_config(&env);
        let records: Vec<TrajectoryRecord> = (0..4)
            .map(|i| {
                sample_episode(&env, &policy, 100 + i).to_trajectory_record(
                    format!("ep{i}"),
                    &env,
                    false,
                )
            })
            .collect();
        let oracle = rollout_oracle(env, policy);
        let options = ScoreOptions::new(Estimator::Shape);
        let sheets = score_batch(&records, Some(&oracle), &config, &options).unwrap();
        let again = score_batch(&records, Some(&oracle), &config, &options).unwrap();
        assert_eq!(sheets, again);
        for (sheet, record) in sheets.iter().zip(&records) {
            // config K applies when nothing is logged
            assert_eq!(sheet.segment_advantages.len(), config.k_segments);
            assert_eq!(sheet.token_advantages.len(), record.tokens.len());
            let potentials = sheet.potentials.as_ref().unwrap();
            for &p in &potentials[..potentials.len() - 1] {
                // rollout estimates land on the 1/m grid
                let scaled = p * config.m_rollouts as f64;
                assert_eq!(scaled.round(), scaled);
            }
            assert_eq!(*potentials.last().unwrap(), f64::from(record.outcome));
        }
    }

    #[test]
    fn no_source_and_bad_records_error() {
        let config = cfg();
        let mut rec = logged_record("t0", 1);
        rec.boundary_potentials = None;
        let options = ScoreOptions::new(Estimator::Shape);
        assert!(matches!(
            score_record(&rec, 1.0, None, &config, &options, 0),
            Err(Error::NoPotentialSource { .. })
        ));

        let bad = TrajectoryRecord::new("t9", 3, &[0.2, 0.3, 0.4]);
        assert!(matches!(
            score_record(&bad, 1.0, None, &config, &options, 0),
            Err(Error::Record { .. })
        ));

        let mut short = logged_record("t2", 1);
        short.boundary_potentials = Some(vec![0.5]);
        assert!(score_record(&short, 1.0, None, &config, &options, 0).is_err());
    }
}
