//! Policy-gradient training on the chain, one run per estimator.
//!
//! Episodes are generated in batches under the policy as of the batch
//! start, each from its own seeded RNG, so a run is reproducible bit for
//! bit regardless of thread count. The update itself is a plain REINFORCE
//! step: every stage's logits move along `A_k * grad log pi(a_k)`,
//! averaged over the batch, where `A_k` comes from the estimator under
//! test. A zero estimator is included as a control; it must leave the
//! policy untouched.

use serde::{Deserialize, Serialize};

use super::{sample_batch, Action, ChainEnv, EpisodeTrace, TabularPolicy};
use crate::config::ShapingConfig;
use crate::error::Error;
use crate::shaping::{group_normalize, mrt_advantages, shape_advantages};
use crate::trajectory::Estimator;

pub const LEARNING_RATE: f64 = 1.0;
pub const BATCH_SIZE: usize = 16;
/// Metrics are aggregated over fixed windows of this many episodes; a
/// trailing partial window is dropped.
pub const WINDOW_EPISODES: usize = 200;
/// A logit beyond this bound aborts the run as diverged.
pub const LOGIT_GUARD: f64 = 50.0;

/// Advantage source driving the policy update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainEstimator {
    Shape,
    Mrt,
    Grpo,
    /// All advantages forced to zero; control arm.
    Zero,
}

impl From<Estimator> for TrainEstimator {
    fn from(e: Estimator) -> Self {
        match e {
            Estimator::Shape => TrainEstimator::Shape,
            Estimator::Mrt => TrainEstimator::Mrt,
            Estimator::Grpo => TrainEstimator::Grpo,
        }
    }
}

impl std::fmt::Display for TrainEstimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            TrainEstimator::Shape => "shape",
            TrainEstimator::Mrt => "mrt",
            TrainEstimator::Grpo => "grpo",
            TrainEstimator::Zero => "zero",
        };
        f.write_str(name)
    }
}

/// Aggregates over one fixed window of episodes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowMetrics {
    pub window: usize,
    pub first_episode: usize,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_tokens: f64,
    /// Fraction of stage transitions whose true potential decreased.
    pub potential_drop_rate: f64,
}

/// One observed stage transition of the true potential, tagged with the
/// batch it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainTransition {
    pub batch: usize,
    pub phi_k: f64,
    pub delta: f64,
    pub outcome: u8,
}

/// Everything a training run produced.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainingRun {
    pub estimator: TrainEstimator,
    pub seed: u64,
    pub episodes: usize,
    pub windows: Vec<WindowMetrics>,
    pub transitions: Vec<GainTransition>,
    pub policy: TabularPolicy,
}

/// Shaping parameters matched to an environment: the reference length set
/// to the long action's cost and the discount floor dropped to 0.5 so the
/// short and long advance land on clearly separated discounts, segmentation
/// sized to the stage count, and the shaping weight pushed near its
/// consistency ceiling so the shaping term is a strong learning signal next
/// to the outcome base.
pub fn recommended_config(env: &ChainEnv) -> ShapingConfig {
    ShapingConfig {
        alpha: 0.45,
        gamma_min: 0.5,
        l_ref: env.long_cost() as u32,
        k_segments: env.n_stages(),
        m_rollouts: env.m_grid(),
        ..ShapingConfig::default()
    }
}

fn batch_advantages(
    estimator: TrainEstimator,
    env: &ChainEnv,
    traces: &[EpisodeTrace],
    config: &ShapingConfig,
) -> Result<Vec<Vec<f64>>, Error> {
    match estimator {
        TrainEstimator::Shape => traces
            .iter()
            .map(|t| {
                let profile = t.potential_profile(env)?;
                shape_advantages(&profile, &t.stage_lengths(), f64::from(t.outcome), config)
            })
            .collect(),
        TrainEstimator::Mrt => traces
            .iter()
            .map(|t| {
                let profile = t.potential_profile(env)?;
                mrt_advantages(&profile, f64::from(t.outcome), config.alpha)
            })
            .collect(),
        TrainEstimator::Grpo => {
            let outcomes: Vec<u8> = traces.iter().map(|t| t.outcome).collect();
            // a singleton batch normalizes to zero advantage
            let scores = if outcomes.len() < 2 {
                vec![0.0; outcomes.len()]
            } else {
                let raw: Vec<f64> = outcomes.iter().map(|&o| f64::from(o)).collect();
                group_normalize(&raw)?
            };
            Ok(traces
                .iter()
                .zip(scores)
                .map(|(t, s)| vec![s; t.stages.len()])
                .collect())
        }
        TrainEstimator::Zero => {
            Ok(traces.iter().map(|t| vec![0.0; t.stages.len()]).collect())
        }
    }
}

/// Runs `episodes` episodes of REINFORCE with the given advantage
/// estimator and returns learning curves, the observed potential
/// transitions, and the final policy.
pub fn train(
    env: &ChainEnv,
    estimator: TrainEstimator,
    episodes: usize,
    seed: u64,
    config: &ShapingConfig,
) -> Result<TrainingRun, Error> {
    config.validate()?;
    if episodes == 0 {
        return Err(Error::Config("episode count must be positive".into()));
    }

    let mut policy = TabularPolicy::uniform(env);
    let mut successes = Vec::with_capacity(episodes);
    let mut token_counts = Vec::with_capacity(episodes);
    let mut drop_counts = Vec::with_capacity(episodes);
    let mut transitions = Vec::new();

    let mut start = 0;
    let mut batch_index = 0;
    while start < episodes {
        let len = BATCH_SIZE.min(episodes - start);
        let traces = sample_batch(env, &policy, seed, start, len);
        let advantages = batch_advantages(estimator, env, &traces, config)?;

        // gradients are taken at the policy the batch was sampled from
        let frozen = policy.clone();
        for (trace, advs) in traces.iter().zip(advantages.iter()) {
            let mut progress = trace.initial_progress;
            for (stage_idx, stage) in trace.stages.iter().enumerate() {
                let step = LEARNING_RATE * advs[stage_idx] / len as f64;
                let probs = frozen.action_probabilities(stage_idx, progress);
                for (i, &action) in Action::ALL.iter().enumerate() {
                    let indicator = if action == stage.action { 1.0 } else { 0.0 };
                    *policy.logit_mut(stage_idx, progress, action) +=
                        step * (indicator - probs[i]);
                }
                progress = stage.progress;
            }
        }
        let extreme = policy.max_abs_logit();
        if extreme > LOGIT_GUARD {
            return Err(Error::Diverged(extreme, LOGIT_GUARD));
        }

        for trace in &traces {
            successes.push(trace.outcome);
            token_counts.push(trace.token_count());
            drop_counts.push(trace.potential_drop_count(env));
            let path = trace.progress_path();
            for pair in path.windows(2) {
                let phi_k = env.solvability(pair[0]);
                transitions.push(GainTransition {
                    batch: batch_index,
                    phi_k,
                    delta: env.solvability(pair[1]) - phi_k,
                    outcome: trace.outcome,
                });
            }
        }

        start += len;
        batch_index += 1;
    }

    let transitions_per_episode = env.n_stages();
    let windows = (0..episodes / WINDOW_EPISODES)
        .map(|w| {
            let range = w * WINDOW_EPISODES..(w + 1) * WINDOW_EPISODES;
            let n = WINDOW_EPISODES as f64;
            let succ: u32 = successes[range.clone()].iter().map(|&s| u32::from(s)).sum();
            let tokens: usize = token_counts[range.clone()].iter().sum();
            let drops: usize = drop_counts[range.clone()].iter().sum();
            WindowMetrics {
                window: w,
                first_episode: range.start,
                episodes: WINDOW_EPISODES,
                success_rate: f64::from(succ) / n,
                mean_tokens: tokens as f64 / n,
                potential_drop_rate: drops as f64
                    / (WINDOW_EPISODES * transitions_per_episode) as f64,
            }
        })
        .collect();

    Ok(TrainingRun { estimator, seed, episodes, windows, transitions, policy })
}

/// Side-by-side totals for an honest run and a sandbagged one.
///
/// Both trajectories end in success. The honest path climbs the chain in
/// even steps. The sandbagged one first climbs, then deliberately regresses
/// to the floor and climbs again, engineering a large final stretch of
/// potential gain while burning tokens on the round trip. The report gives
/// each estimator's total intermediate bonus (sum of advantages in excess
/// of the outcome reward) for both paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandbagReport {
    pub monotone_profile: Vec<f64>,
    pub monotone_lengths: Vec<usize>,
    pub dip_profile: Vec<f64>,
    pub dip_lengths: Vec<usize>,
    pub mrt_bonus_monotone: f64,
    pub mrt_bonus_dip: f64,
    pub shape_bonus_monotone: f64,
    pub shape_bonus_dip: f64,
}

impl SandbagReport {
    /// True when the dip strategy pays under the stage-only bonus but not
    /// under the discounted one.
    pub fn dip_pays_only_without_discounting(&self) -> bool {
        self.mrt_bonus_dip > self.mrt_bonus_monotone
            && self.shape_bonus_dip < self.shape_bonus_monotone
    }
}

/// Progress level whose solvability equals `target` exactly.
fn level_for(env: &ChainEnv, target: f64) -> Result<usize, Error> {
    (0..=env.max_progress())
        .find(|&p| env.solvability(p) == target)
        .ok_or_else(|| {
            Error::Config(format!("environment has no progress level with solvability {target}"))
        })
}

/// Walks waypoint progress levels into per-leg profiles and token lengths.
/// Every unit of progress moved, in either direction, costs one short
/// action's worth of tokens.
fn path_from_waypoints(env: &ChainEnv, waypoints: &[usize]) -> (Vec<f64>, Vec<usize>) {
    let mut profile = Vec::with_capacity(waypoints.len());
    let mut lengths = Vec::with_capacity(waypoints.len() - 1);
    for pair in waypoints.windows(2) {
        profile.push(env.solvability(pair[0]));
        let distance = pair[0].abs_diff(pair[1]).max(1);
        lengths.push(distance * env.short_cost());
    }
    profile.push(1.0);
    (profile, lengths)
}

fn bonus(advantages: &[f64], outcome_reward: f64) -> f64 {
    advantages.iter().map(|a| a - outcome_reward).sum()
}

/// Compares the two estimators on the honest and sandbagged paths.
pub fn sandbag_comparison(
    env: &ChainEnv,
    config: &ShapingConfig,
) -> Result<SandbagReport, Error> {
    config.validate()?;
    let quarter = level_for(env, 0.25)?;
    let half = level_for(env, 0.5)?;
    let three_quarters = level_for(env, 0.75)?;
    let floor = level_for(env, 0.0)?;
    let top = level_for(env, 1.0)?;

    let monotone = [floor, quarter, half, three_quarters, top];
    let dip = [floor, half, floor, three_quarters, top];
    let (monotone_profile, monotone_lengths) = path_from_waypoints(env, &monotone);
    let (dip_profile, dip_lengths) = path_from_waypoints(env, &dip);

    let outcome = 1.0;
    let mut totals = [0.0; 4];
    for (i, (profile, lengths)) in
        [(&monotone_profile, &monotone_lengths), (&dip_profile, &dip_lengths)]
            .iter()
            .enumerate()
    {
        let profile =
            crate::trajectory::PotentialProfile::from_values(
                (*profile).clone(),
                env.m_grid(),
                crate::trajectory::PotentialSource::Log,
            )?;
        totals[i] = bonus(&mrt_advantages(&profile, outcome, config.alpha)?, outcome);
        totals[2 + i] =
            bonus(&shape_advantages(&profile, lengths, outcome, config)?, outcome);
    }

    Ok(SandbagReport {
        monotone_profile,
        monotone_lengths,
        dip_profile,
        dip_lengths,
        mrt_bonus_monotone: totals[0],
        mrt_bonus_dip: totals[1],
        shape_bonus_monotone: totals[2],
        shape_bonus_dip: totals[3],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> ChainEnv {
        ChainEnv::default_chain()
    }

    #[test]
    fn zero_estimator_never_moves_the_policy() {
        let env = env();
        let cfg = recommended_config(&env);
        let run = train(&env, TrainEstimator::Zero, 200, 17, &cfg).unwrap();
        assert_eq!(run.policy, TabularPolicy::uniform(&env));
        assert_eq!(run.windows.len(), 1);
        // uniform policy rarely reaches high progress; success stays low
        let overall: f64 =
            run.windows.iter().map(|w| w.success_rate).sum::<f64>() / run.windows.len() as f64;
        assert!(overall < 0.5, "uniform-policy success rate {overall}");
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let env = env();
        let cfg = recommended_config(&env);
        let a = train(&env, TrainEstimator::Shape, 160, 3, &cfg).unwrap();
        let b = train(&env, TrainEstimator::Shape, 160, 3, &cfg).unwrap();
        assert_eq!(a, b);
        let c = train(&env, TrainEstimator::Shape, 160, 4, &cfg).unwrap();
        assert_ne!(a.policy, c.policy);
    }

    #[test]
    fn training_improves_success_rate() {
        let env = env();
        let cfg = recommended_config(&env);
        for estimator in [TrainEstimator::Shape, TrainEstimator::Mrt, TrainEstimator::Grpo] {
            let run = train(&env, estimator, 1000, 11, &cfg).unwrap();
            let first = run.windows.first().unwrap().success_rate;
            let last = run.windows.last().unwrap().success_rate;
            assert!(
                last > first + 0.2,
                "{estimator}: first window {first}, last window {last}"
            );
        }
    }

    #[test]
    fn transitions_cover_every_stage() {
        let env = env();
        let cfg = recommended_config(&env);
        let run = train(&env, TrainEstimator::Mrt, 96, 5, &cfg).unwrap();
        assert_eq!(run.transitions.len(), 96 * env.n_stages());
        assert!(run.transitions.iter().all(|t| t.batch < 6));
        // deltas live on the solvability grid
        for t in &run.transitions {
            assert_eq!((t.delta * 8.0).round(), t.delta * 8.0);
            assert!(t.phi_k >= 0.0 && t.phi_k <= 1.0);
        }
    }

    #[test]
    fn window_fold_is_exact() {
        let env = env();
        let cfg = recommended_config(&env);
        // 430 episodes: two full windows, 30 left over and dropped
        let run = train(&env, TrainEstimator::Zero, 430, 23, &cfg).unwrap();
        assert_eq!(run.windows.len(), 2);
        assert_eq!(run.windows[1].first_episode, 200);
        assert_eq!(run.windows[1].episodes, 200);
    }

    #[test]
    fn rejects_empty_runs_and_bad_configs() {
        let env = env();
        let cfg = recommended_config(&env);
        assert!(train(&env, TrainEstimator::Shape, 0, 1, &cfg).is_err());
        let bad = ShapingConfig { alpha: 0.7, ..cfg };
        assert!(train(&env, TrainEstimator::Shape, 100, 1, &bad).is_err());
    }

    #[test]
    fn sandbag_report_reproduces_hand_totals() {
        // defaults: alpha 0.3, gamma_min 0.9, l_ref 512, short cost 8.
        // honest waypoints 0-2-3-4-6 walk [16, 8, 8, 16] tokens; the dip
        // path 0-3-0-4-6 walks [24, 24, 32, 16].
        //
        // stage-only bonuses: 0.3 * (1 + .75 + .5 + .25) = 0.75 honest,
        // 0.3 * (1 + .5 + 1 + .25) = 0.825 for the dip.
        // discounted: gamma(16) = .996875, gamma(8) = .9984375,
        // gamma(24) = .9953125, gamma(32) = .99375, so the shaped sums are
        // .24921875 + .24921875 + .248828125 + .246875 = .994140625 honest
        // and .49765625 - .5 + .7453125 + .246875 = .98984375 for the dip.
        let env = env();
        let cfg = ShapingConfig::default();
        let report = sandbag_comparison(&env, &cfg).unwrap();

        assert_eq!(report.monotone_profile, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(report.dip_profile, vec![0.0, 0.5, 0.0, 0.75, 1.0]);
        assert_eq!(report.monotone_lengths, vec![16, 8, 8, 16]);
        assert_eq!(report.dip_lengths, vec![24, 24, 32, 16]);

        assert!((report.mrt_bonus_monotone - 0.75).abs() < 1e-12);
        assert!((report.mrt_bonus_dip - 0.825).abs() < 1e-12);
        assert!((report.shape_bonus_monotone - 0.2982421875).abs() < 1e-12);
        assert!((report.shape_bonus_dip - 0.296953125).abs() < 1e-12);
        assert!(report.dip_pays_only_without_discounting());
    }

    #[test]
    fn sandbag_holds_under_matched_config_too() {
        // shorter reference length pushes the dip legs onto the gamma floor
        let env = env();
        let report = sandbag_comparison(&env, &recommended_config(&env)).unwrap();
        assert!(report.dip_pays_only_without_discounting());
        assert_eq!(report, sandbag_comparison(&env, &recommended_config(&env)).unwrap());
    }

    #[test]
    fn sandbag_needs_matching_levels() {
        // a two-level table has no solvability 0.25 state
        let flat = ChainEnv::new(4, vec![0.0, 1.0], 8, 8, 32).unwrap();
        assert!(sandbag_comparison(&flat, &ShapingConfig::default()).is_err());
    }
}
