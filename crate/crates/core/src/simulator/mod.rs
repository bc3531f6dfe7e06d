//! Synthetic reasoning chain used to exercise the estimators end to end.
//!
//! An episode is `n_stages` decisions. Each stage picks one of four actions:
//! a short or a long advance (progress +1), a stall (0), or a regress (-1),
//! costing `short_cost` tokens except the long advance at `long_cost`. After
//! the last stage the episode succeeds with probability
//! `solvability_map(final progress)`, a non-decreasing table on the 1/m
//! grid. The short and long advances are deliberately interchangeable in
//! outcome: only a length-aware estimator has any reason to prefer one.
//!
//! Tokens draw synthetic entropies on two levels, high for the first token
//! of a stage and low inside, so entropy segmentation can recover the true
//! stage boundaries. Each token also carries a `stage:progress` text label;
//! the rollout oracle reads the label at a cut to know where to resume.

mod oracle;
mod policy;
mod train;

pub use oracle::{rollout_oracle, SimulatorOracle};
pub use policy::TabularPolicy;
pub use train::{
    recommended_config, sandbag_comparison, train, GainTransition, SandbagReport,
    TrainEstimator, TrainingRun, WindowMetrics, BATCH_SIZE, LEARNING_RATE, LOGIT_GUARD,
    WINDOW_EPISODES,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Error;
use crate::exec;
use crate::trajectory::{
    snap_to_grid, PotentialProfile, PotentialSource, TokenInfo, TrajectoryRecord,
    GRID_SNAP_TOLERANCE,
};

/// Entropy band for the first token of a stage.
pub const ENTROPY_BOUNDARY: (f64, f64) = (2.0, 2.5);
/// Entropy band for interior tokens. Disjoint from the boundary band so a
/// threshold between them separates stages with certainty, not just with
/// high probability.
pub const ENTROPY_INTERIOR: (f64, f64) = (0.1, 0.5);

/// One of the four stage decisions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    AdvanceShort,
    AdvanceLong,
    Stall,
    Regress,
}

impl Action {
    pub const ALL: [Action; 4] =
        [Action::AdvanceShort, Action::AdvanceLong, Action::Stall, Action::Regress];

    pub fn index(self) -> usize {
        match self {
            Action::AdvanceShort => 0,
            Action::AdvanceLong => 1,
            Action::Stall => 2,
            Action::Regress => 3,
        }
    }

    pub fn progress_delta(self) -> i64 {
        match self {
            Action::AdvanceShort | Action::AdvanceLong => 1,
            Action::Stall => 0,
            Action::Regress => -1,
        }
    }
}

/// The chain environment.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainEnv {
    n_stages: usize,
    short_cost: usize,
    long_cost: usize,
    /// Success probability of a terminal draw at each progress level.
    solvability: Vec<f64>,
    m_grid: usize,
}

impl ChainEnv {
    /// Validates the solvability table (non-decreasing, on the 1/m grid)
    /// and the cost ordering (long strictly dearer than short).
    pub fn new(
        n_stages: usize,
        solvability: Vec<f64>,
        m_grid: usize,
        short_cost: usize,
        long_cost: usize,
    ) -> Result<Self, Error> {
        if n_stages == 0 {
            return Err(Error::Config("n_stages must be positive".into()));
        }
        if solvability.len() < 2 {
            return Err(Error::Config("solvability table needs at least 2 levels".into()));
        }
        if m_grid == 0 {
            return Err(Error::Config("grid resolution m must be positive".into()));
        }
        if !(short_cost >= 1 && long_cost > short_cost) {
            return Err(Error::Config(format!(
                "costs must satisfy 1 <= short < long, got {short_cost} and {long_cost}"
            )));
        }
        let mut snapped = Vec::with_capacity(solvability.len());
        for &v in &solvability {
            snapped.push(
                snap_to_grid(v, m_grid, GRID_SNAP_TOLERANCE)
                    .ok_or(Error::OffGrid { value: v, m: m_grid })?,
            );
        }
        for pair in snapped.windows(2) {
            if pair[1] < pair[0] {
                return Err(Error::Config(format!(
                    "solvability must be non-decreasing, got {} after {}",
                    pair[1], pair[0]
                )));
            }
        }
        Ok(ChainEnv { n_stages, short_cost, long_cost, solvability: snapped, m_grid })
    }

    /// 8 stages over progress 0..=6, short cost 8, long cost 32.
    ///
    /// Two stages of slack: a policy can waste two decisions and still
    /// reach the top. Early regressions are therefore recoverable, which
    /// keeps them alive under estimators that only punish them through the
    /// final outcome.
    pub fn default_chain() -> Self {
        let solvability = vec![0.0, 0.125, 0.25, 0.5, 0.75, 0.875, 1.0];
        ChainEnv::new(8, solvability, 8, 8, 32).expect("default table is valid")
    }

    pub fn n_stages(&self) -> usize {
        self.n_stages
    }

    pub fn max_progress(&self) -> usize {
        self.solvability.len() - 1
    }

    pub fn m_grid(&self) -> usize {
        self.m_grid
    }

    pub fn short_cost(&self) -> usize {
        self.short_cost
    }

    pub fn long_cost(&self) -> usize {
        self.long_cost
    }

    pub fn solvability(&self, progress: usize) -> f64 {
        self.solvability[progress.min(self.max_progress())]
    }

    pub fn token_cost(&self, action: Action) -> usize {
        match action {
            Action::AdvanceLong => self.long_cost,
            _ => self.short_cost,
        }
    }

    /// Applies an action's progress delta, clamped to the table range.
    pub fn step_progress(&self, progress: usize, action: Action) -> usize {
        let next = progress as i64 + action.progress_delta();
        next.clamp(0, self.max_progress() as i64) as usize
    }
}

/// One resolved stage of an episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRecord {
    pub action: Action,
    /// Progress after the action resolved.
    pub progress: usize,
    /// Synthetic entropies of the tokens this stage emitted.
    pub entropies: Vec<f64>,
    /// True potential after the action: solvability at `progress`.
    pub phi: f64,
}

/// A full episode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeTrace {
    pub initial_progress: usize,
    pub stages: Vec<StageRecord>,
    pub outcome: u8,
}

impl EpisodeTrace {
    pub fn token_count(&self) -> usize {
        self.stages.iter().map(|s| s.entropies.len()).sum()
    }

    /// Progress before each stage's action, then the final progress.
    pub fn progress_path(&self) -> Vec<usize> {
        let mut path = Vec::with_capacity(self.stages.len() + 1);
        path.push(self.initial_progress);
        path.extend(self.stages.iter().map(|s| s.progress));
        path
    }

    /// Tokens per stage, in stage order.
    pub fn stage_lengths(&self) -> Vec<usize> {
        self.stages.iter().map(|s| s.entropies.len()).collect()
    }

    /// Token indices where stages 2.. begin; these are the boundaries
    /// entropy segmentation should recover.
    pub fn true_boundaries(&self) -> Vec<usize> {
        let mut boundaries = Vec::with_capacity(self.stages.len().saturating_sub(1));
        let mut offset = 0;
        for stage in &self.stages[..self.stages.len() - 1] {
            offset += stage.entropies.len();
            boundaries.push(offset);
        }
        boundaries
    }

    /// Potential profile under stage-level segmentation: solvability at the
    /// start of each stage, with the realized outcome as terminal entry.
    pub fn profile_values(&self, env: &ChainEnv) -> Vec<f64> {
        let n = self.stages.len();
        let mut values = Vec::with_capacity(n + 1);
        values.push(env.solvability(self.initial_progress));
        for stage in &self.stages[..n - 1] {
            values.push(stage.phi);
        }
        values.push(f64::from(self.outcome));
        values
    }

    /// Same values wrapped as a profile on the environment grid.
    pub fn potential_profile(&self, env: &ChainEnv) -> Result<PotentialProfile, Error> {
        PotentialProfile::from_values(
            self.profile_values(env),
            env.m_grid(),
            PotentialSource::Oracle,
        )
    }

    /// Fraction of stage transitions where the true potential decreased.
    pub fn potential_drop_count(&self, env: &ChainEnv) -> usize {
        let mut prev = env.solvability(self.initial_progress);
        let mut drops = 0;
        for stage in &self.stages {
            if stage.phi < prev {
                drops += 1;
            }
            prev = stage.phi;
        }
        drops
    }

    /// Flattens the episode into a trajectory record. Token text labels
    /// carry `stage:progress` so the rollout oracle can resume from any cut;
    /// with `with_potentials` the true stage-start potentials are logged on
    /// the record as well.
    pub fn to_trajectory_record(
        &self,
        id: impl Into<String>,
        env: &ChainEnv,
        with_potentials: bool,
    ) -> TrajectoryRecord {
        let mut tokens = Vec::with_capacity(self.token_count());
        for (stage_idx, stage) in self.stages.iter().enumerate() {
            for &h in &stage.entropies {
                let mut tok = TokenInfo::new(tokens.len(), h);
                tok.text = Some(format!("{stage_idx}:{}", stage.progress));
                tokens.push(tok);
            }
        }
        TrajectoryRecord {
            id: id.into(),
            group_id: None,
            outcome: self.outcome,
            tokens,
            boundary_potentials: with_potentials.then(|| self.profile_values(env)),
        }
    }
}

/// Runs one episode under `policy`, drawing from `rng`.
pub fn sample_episode_rng<R: Rng>(
    env: &ChainEnv,
    policy: &TabularPolicy,
    rng: &mut R,
) -> EpisodeTrace {
    let initial_progress = 0;
    let mut progress = initial_progress;
    let mut stages = Vec::with_capacity(env.n_stages());
    for stage in 0..env.n_stages() {
        let action = policy.sample(stage, progress, rng);
        progress = env.step_progress(progress, action);
        let cost = env.token_cost(action);
        let mut entropies = Vec::with_capacity(cost);
        entropies.push(rng.gen_range(ENTROPY_BOUNDARY.0..ENTROPY_BOUNDARY.1));
        for _ in 1..cost {
            entropies.push(rng.gen_range(ENTROPY_INTERIOR.0..ENTROPY_INTERIOR.1));
        }
        stages.push(StageRecord { action, progress, entropies, phi: env.solvability(progress) });
    }
    let outcome = u8::from(rng.gen::<f64>() < env.solvability(progress));
    EpisodeTrace { initial_progress, stages, outcome }
}

/// Seeded wrapper around [`sample_episode_rng`].
pub fn sample_episode(env: &ChainEnv, policy: &TabularPolicy, seed: u64) -> EpisodeTrace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_episode_rng(env, policy, &mut rng)
}

/// Generates a batch of episodes, one independent RNG per episode, indexed
/// so results are identical however the batch is scheduled.
pub fn sample_batch(
    env: &ChainEnv,
    policy: &TabularPolicy,
    seed: u64,
    first_episode: usize,
    count: usize,
) -> Vec<EpisodeTrace> {
    exec::map_range(count, |i| {
        let episode_seed = exec::mix_seed(seed, 0xE9, (first_episode + i) as u64);
        sample_episode(env, policy, episode_seed)
    })
}

/// Exact success probability from (stage, progress) under a policy, by
/// backward induction over the chain. `stage` counts decisions already
/// resolved, so stage = n_stages is the terminal draw itself.
pub fn completion_probability(
    env: &ChainEnv,
    policy: &TabularPolicy,
    stage: usize,
    progress: usize,
) -> f64 {
    let n = env.n_stages();
    let width = env.max_progress() + 1;
    // value[p] holds V(j, p) for the j currently being computed
    let mut value: Vec<f64> = (0..width).map(|p| env.solvability(p)).collect();
    for j in (stage..n).rev() {
        let next = value.clone();
        for (p, slot) in value.iter_mut().enumerate() {
            let probs = policy.action_probabilities(j, p);
            *slot = Action::ALL
                .iter()
                .zip(probs.iter())
                .map(|(&a, &pr)| pr * next[env.step_progress(p, a)])
                .sum();
        }
    }
    value[progress.min(env.max_progress())]
}
