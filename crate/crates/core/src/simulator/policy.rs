//! Tabular softmax policy over (stage, progress) states.

use rand::Rng;
use serde::Serialize;

use super::{Action, ChainEnv};

/// One logit per (stage, progress, action) triple, turned into action
/// probabilities by a temperature softmax. Small enough to clone freely.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TabularPolicy {
    n_stages: usize,
    n_progress: usize,
    temperature: f64,
    logits: Vec<f64>,
}

impl TabularPolicy {
    /// All-zero logits: uniform over the four actions everywhere.
    pub fn uniform(env: &ChainEnv) -> Self {
        let n_stages = env.n_stages();
        let n_progress = env.max_progress() + 1;
        TabularPolicy {
            n_stages,
            n_progress,
            temperature: 1.0,
            logits: vec![0.0; n_stages * n_progress * Action::ALL.len()],
        }
    }

    /// Uniform except one action raised by `weight` in every state. With a
    /// large weight this is effectively a deterministic policy; handy as a
    /// test fixture.
    pub fn biased_toward(env: &ChainEnv, action: Action, weight: f64) -> Self {
        let mut policy = TabularPolicy::uniform(env);
        for stage in 0..policy.n_stages {
            for progress in 0..policy.n_progress {
                *policy.logit_mut(stage, progress, action) += weight;
            }
        }
        policy
    }

    fn base(&self, stage: usize, progress: usize) -> usize {
        debug_assert!(stage < self.n_stages && progress < self.n_progress);
        (stage * self.n_progress + progress) * Action::ALL.len()
    }

    pub fn logit(&self, stage: usize, progress: usize, action: Action) -> f64 {
        self.logits[self.base(stage, progress) + action.index()]
    }

    pub fn logit_mut(&mut self, stage: usize, progress: usize, action: Action) -> &mut f64 {
        let idx = self.base(stage, progress) + action.index();
        &mut self.logits[idx]
    }

    /// Softmax of the state's logits at the current temperature.
    pub fn action_probabilities(&self, stage: usize, progress: usize) -> [f64; 4] {
        let base = self.base(stage, progress);
        let scaled: Vec<f64> =
            self.logits[base..base + 4].iter().map(|&l| l / self.temperature).collect();
        let max = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs = [0.0; 4];
        let mut sum = 0.0;
        for (slot, &s) in probs.iter_mut().zip(scaled.iter()) {
            *slot = (s - max).exp();
            sum += *slot;
        }
        for slot in &mut probs {
            *slot /= sum;
        }
        probs
    }

    pub fn sample<R: Rng>(&self, stage: usize, progress: usize, rng: &mut R) -> Action {
        let probs = self.action_probabilities(stage, progress);
        let draw = rng.gen::<f64>();
        let mut acc = 0.0;
        for (&action, &p) in Action::ALL.iter().zip(probs.iter()) {
            acc += p;
            if draw < acc {
                return action;
            }
        }
        // rounding can leave acc fractionally below 1
        *Action::ALL.last().unwrap()
    }

    /// Adds `step * (1[action = taken] - pi(action))` to every logit of the
    /// state: the score-function gradient of log pi(taken) scaled by `step`.
    pub fn reinforce(&mut self, stage: usize, progress: usize, taken: Action, step: f64) {
        let probs = self.action_probabilities(stage, progress);
        let base = self.base(stage, progress);
        for (i, &p) in probs.iter().enumerate() {
            let indicator = if i == taken.index() { 1.0 } else { 0.0 };
            self.logits[base + i] += step * (indicator - p);
        }
    }

    pub fn max_abs_logit(&self) -> f64 {
        self.logits.iter().fold(0.0, |m, &l| m.max(l.abs()))
    }

    /// Marginal probability of picking a short advance over all states,
    /// weighted uniformly. A coarse summary used by training reports.
    pub fn mean_probability_of(&self, action: Action) -> f64 {
        let mut total = 0.0;
        let states = self.n_stages * self.n_progress;
        for stage in 0..self.n_stages {
            for progress in 0..self.n_progress {
                total += self.action_probabilities(stage, progress)[action.index()];
            }
        }
        total / states as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn env() -> ChainEnv {
        ChainEnv::default_chain()
    }

    #[test]
    fn uniform_policy_is_uniform() {
        let policy = TabularPolicy::uniform(&env());
        let probs = policy.action_probabilities(3, 5);
        for &p in &probs {
            assert!((p - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn probabilities_sum_to_one_after_updates() {
        let mut policy = TabularPolicy::uniform(&env());
        *policy.logit_mut(2, 4, Action::Regress) += 3.5;
        *policy.logit_mut(2, 4, Action::AdvanceLong) -= 1.25;
        let probs = policy.action_probabilities(2, 4);
        let sum: f64 = probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        assert!(probs[Action::Regress.index()] > probs[Action::AdvanceShort.index()]);
        assert!(probs[Action::AdvanceLong.index()] < probs[Action::AdvanceShort.index()]);
    }

    #[test]
    fn biased_policy_concentrates() {
        let policy = TabularPolicy::biased_toward(&env(), Action::AdvanceShort, 60.0);
        let probs = policy.action_probabilities(0, 0);
        assert!(probs[Action::AdvanceShort.index()] > 1.0 - 1e-12);
    }

    #[test]
    fn sampling_tracks_probabilities() {
        let mut policy = TabularPolicy::uniform(&env());
        *policy.logit_mut(1, 1, Action::Stall) += 2.0;
        let probs = policy.action_probabilities(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0usize; 4];
        let n = 40_000;
        for _ in 0..n {
            counts[policy.sample(1, 1, &mut rng).index()] += 1;
        }
        for (c, &p) in counts.iter().zip(probs.iter()) {
            let freq = *c as f64 / n as f64;
            // 5 sigma of a binomial proportion
            let se = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 5.0 * se + 1e-9, "freq {freq} vs p {p}");
        }
    }

    #[test]
    fn reinforce_moves_mass_toward_taken_action() {
        let mut policy = TabularPolicy::uniform(&env());
        let before = policy.action_probabilities(4, 2)[Action::AdvanceLong.index()];
        policy.reinforce(4, 2, Action::AdvanceLong, 0.5);
        let after = policy.action_probabilities(4, 2)[Action::AdvanceLong.index()];
        assert!(after > before);
        // a negative step pushes the other way
        policy.reinforce(4, 2, Action::AdvanceLong, -1.0);
        let reversed = policy.action_probabilities(4, 2)[Action::AdvanceLong.index()];
        assert!(reversed < after);
    }

    #[test]
    fn reinforce_gradient_matches_softmax_identity() {
        // after one step from zero logits, logit(taken) = step * (1 - 1/4)
        // and the others sit at -step / 4
        let mut policy = TabularPolicy::uniform(&env());
        policy.reinforce(0, 0, Action::Stall, 0.2);
        assert!((policy.logit(0, 0, Action::Stall) - 0.15).abs() < 1e-12);
        assert!((policy.logit(0, 0, Action::Regress) + 0.05).abs() < 1e-12);
        assert!((policy.logit(0, 0, Action::AdvanceShort) + 0.05).abs() < 1e-12);
    }

    #[test]
    fn mean_probability_reflects_bias() {
        let policy = TabularPolicy::biased_toward(&env(), Action::AdvanceShort, 60.0);
        assert!(policy.mean_probability_of(Action::AdvanceShort) > 0.999);
        assert!(TabularPolicy::uniform(&env()).mean_probability_of(Action::Stall) - 0.25 < 1e-12);
    }

    #[test]
    fn max_abs_logit_tracks_updates() {
        let mut policy = TabularPolicy::uniform(&env());
        assert_eq!(policy.max_abs_logit(), 0.0);
        *policy.logit_mut(7, 6, Action::Regress) = -12.5;
        assert_eq!(policy.max_abs_logit(), 12.5);
    }
}
