//! Rollout oracle backed by the chain environment.
//!
//! Trajectory records produced by the simulator label every token with the
//! stage and progress in force when it was emitted. A completion from a cut
//! therefore needs no replay: the label of the last prefix token says where
//! the episode stands, and the oracle plays the remaining stages under its
//! policy and makes the terminal draw.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ChainEnv, TabularPolicy};
use crate::error::Error;
use crate::potential::RolloutOracle;
use crate::trajectory::TrajectoryRecord;

pub struct SimulatorOracle {
    env: ChainEnv,
    policy: TabularPolicy,
}

impl SimulatorOracle {
    pub fn new(env: ChainEnv, policy: TabularPolicy) -> Self {
        SimulatorOracle { env, policy }
    }

    pub fn env(&self) -> &ChainEnv {
        &self.env
    }

    /// (next stage to play, current progress) at a token boundary.
    fn resume_point(&self, record: &TrajectoryRecord, boundary: usize) -> Result<(usize, usize), Error> {
        if boundary == 0 {
            return Ok((0, 0));
        }
        let token = record.tokens.get(boundary - 1).ok_or(Error::OracleUnavailable {
            boundary,
            reason: "boundary past end of trajectory".into(),
        })?;
        let label = token.text.as_deref().ok_or(Error::OracleUnavailable {
            boundary,
            reason: "token has no stage label".into(),
        })?;
        let (stage, progress) = label
            .split_once(':')
            .and_then(|(s, p)| Some((s.parse::<usize>().ok()?, p.parse::<usize>().ok()?)))
            .ok_or_else(|| Error::OracleUnavailable {
                boundary,
                reason: format!("unparseable stage label {label:?}"),
            })?;
        if stage >= self.env.n_stages() || progress > self.env.max_progress() {
            return Err(Error::OracleUnavailable {
                boundary,
                reason: format!("label {label:?} outside the environment"),
            });
        }
        Ok((stage + 1, progress))
    }
}

/// Convenience constructor mirroring the other module entry points.
pub fn rollout_oracle(env: ChainEnv, policy: TabularPolicy) -> SimulatorOracle {
    SimulatorOracle::new(env, policy)
}

impl RolloutOracle for SimulatorOracle {
    fn rollout(&self, record: &TrajectoryRecord, boundary: usize, seed: u64) -> Result<bool, Error> {
        let (next_stage, mut progress) = self.resume_point(record, boundary)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for stage in next_stage..self.env.n_stages() {
            let action = self.policy.sample(stage, progress, &mut rng);
            progress = self.env.step_progress(progress, action);
        }
        Ok(rng.gen::<f64>() < self.env.solvability(progress))
    }
}
