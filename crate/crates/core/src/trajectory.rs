//! Core data model: trajectories, segment plans, potential profiles, and the
//! advantage sheets the estimators produce.
//!
//! Wire format (one JSON object per line):
//!
//! ```json
//! {"id": "t1", "group_id": "g0", "outcome": 1,
//!  "tokens": [{"h": 0.12}, {"h": 2.31, "t": "so", "valid": false}],
//!  "boundary_potentials": [0.0, 0.375, 1.0]}
//! ```
//!
//! Token indices are positional and not serialized; parsing assigns them
//! consecutively from 0. `valid` defaults to true, `boundary_potentials` is
//! optional and, when present, must hold K+1 values on the 1/m grid.

use serde::{Deserialize, Serialize};

use crate::config::ShapingConfig;
use crate::error::Error;

/// One token of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenInfo {
    /// Position in the stream, assigned at parse time.
    #[serde(skip)]
    pub index: usize,
    /// Generation entropy in nats.
    #[serde(rename = "h")]
    pub entropy: f64,
    /// Optional surface text; never interpreted by the pipeline.
    #[serde(rename = "t", default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Tokens marked invalid are excluded from weight statistics but still
    /// receive their segment's advantage.
    #[serde(default = "default_true", skip_serializing_if = "is_true")]
    pub valid: bool,
}

fn default_true() -> bool {
    true
}

#[allow(clippy::trivially_copy_pass_by_ref)]
fn is_true(b: &bool) -> bool {
    *b
}

impl TokenInfo {
    pub fn new(index: usize, entropy: f64) -> Self {
        TokenInfo { index, entropy, text: None, valid: true }
    }
}

/// A scored rollout: token stream plus binary outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub id: String,
    /// Trajectories sharing a group id were sampled for the same prompt;
    /// group-relative baselines normalize within a group.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group_id: Option<String>,
    /// 1 if the final answer was correct, 0 otherwise.
    pub outcome: u8,
    pub tokens: Vec<TokenInfo>,
    /// Logged boundary potentials (K+1 values including the terminal entry),
    /// an alternative to running rollouts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary_potentials: Option<Vec<f64>>,
}

impl TrajectoryRecord {
    pub fn new(id: impl Into<String>, outcome: u8, entropies: &[f64]) -> Self {
        TrajectoryRecord {
            id: id.into(),
            group_id: None,
            outcome,
            tokens: entropies
                .iter()
                .enumerate()
                .map(|(i, &h)| TokenInfo::new(i, h))
                .collect(),
            boundary_potentials: None,
        }
    }

    /// Parses one JSONL line and assigns token indices.
    pub fn from_json_line(line: &str) -> Result<Self, Error> {
        let mut record: TrajectoryRecord = serde_json::from_str(line)?;
        for (i, tok) in record.tokens.iter_mut().enumerate() {
            tok.index = i;
        }
        Ok(record)
    }

    pub fn to_json_line(&self) -> Result<String, Error> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn entropies(&self) -> Vec<f64> {
        self.tokens.iter().map(|t| t.entropy).collect()
    }
}

/// One violated invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

/// Checks every record invariant and returns the violations as data instead
/// of failing on the first. Empty result means the record is well formed.
/// Pure: repeated calls return identical lists.
pub fn validate(record: &TrajectoryRecord, config: &ShapingConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |message: String| out.push(Violation { message });

    if record.tokens.is_empty() {
        push("empty trajectory".into());
    }
    if record.outcome > 1 {
        push(format!("outcome not binary: {}", record.outcome));
    }
    for (i, tok) in record.tokens.iter().enumerate() {
        if tok.index != i {
            push(format!("token index {} at position {i} not consecutive from 0", tok.index));
        }
        if !(tok.entropy >= 0.0 && tok.entropy.is_finite()) {
            push(format!("token {i} entropy {} not a finite non-negative value", tok.entropy));
        }
    }
    if let Some(values) = &record.boundary_potentials {
        let m = config.m_rollouts;
        for (i, &v) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                push(format!("boundary potential {i} = {v} outside [0, 1]"));
            } else if snap_to_grid(v, m, GRID_SNAP_TOLERANCE).is_none() {
                push(format!("boundary potential {i} = {v} off 1/{m} grid"));
            }
        }
    }
    out
}

/// Absolute tolerance when matching logged potentials to the 1/m grid.
pub const GRID_SNAP_TOLERANCE: f64 = 1e-9;

/// Nearest 1/m grid value if `x` is within `tol` of one, else None.
pub fn snap_to_grid(x: f64, m: usize, tol: f64) -> Option<f64> {
    let steps = (x * m as f64).round();
    if steps < 0.0 || steps > m as f64 {
        return None;
    }
    let snapped = steps / m as f64;
    ((x - snapped).abs() <= tol).then_some(snapped)
}

/// Interior cut indices describing K non-empty segments of a token stream.
/// Boundary b means "a new segment starts at token b"; segment k covers
/// tokens [b_{k-1}, b_k) with implicit b_0 = 0 and b_K = token_count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentPlan {
    boundaries: Vec<usize>,
    k: usize,
}

impl SegmentPlan {
    /// Validates strict order and interior placement for `token_count`.
    pub fn new(boundaries: Vec<usize>, token_count: usize) -> Result<Self, Error> {
        if token_count == 0 {
            return Err(Error::EmptyTrajectory);
        }
        for pair in boundaries.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::InvalidPlan(format!(
                    "boundaries not strictly increasing: {} then {}",
                    pair[0], pair[1]
                )));
            }
        }
        if let (Some(&first), Some(&last)) = (boundaries.first(), boundaries.last()) {
            if first == 0 || last >= token_count {
                return Err(Error::InvalidPlan(format!(
                    "boundaries must be interior: got {first}..{last} for {token_count} tokens"
                )));
            }
        }
        let k = boundaries.len() + 1;
        Ok(SegmentPlan { boundaries, k })
    }

    /// Number of segments.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// Segment index owning token `t` (boundary tokens open a new segment).
    pub fn segment_of_token(&self, t: usize) -> usize {
        self.boundaries.partition_point(|&b| b <= t)
    }

    /// Token count per segment; sums to `token_count`, every entry positive.
    pub fn segment_lengths(&self, token_count: usize) -> Result<Vec<usize>, Error> {
        if let Some(&last) = self.boundaries.last() {
            if last >= token_count {
                return Err(Error::InvalidPlan(format!(
                    "plan boundary {last} outside stream of {token_count} tokens"
                )));
            }
        }
        let mut prev = 0;
        let mut lengths = Vec::with_capacity(self.k);
        for &b in &self.boundaries {
            lengths.push(b - prev);
            prev = b;
        }
        lengths.push(token_count - prev);
        Ok(lengths)
    }
}

/// Where a potential profile's body values came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialSource {
    /// Estimated by forced-completion rollouts.
    Oracle,
    /// Logged alongside the trajectory.
    Log,
    /// The terminal entry, which is always the realized outcome.
    TerminalOutcome,
}

/// Boundary potentials for one trajectory: K body values (one per segment
/// start) plus the terminal entry, which is always the realized outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialProfile {
    values: Vec<f64>,
    m: usize,
    source: PotentialSource,
}

impl PotentialProfile {
    /// Wraps raw values, checking only the [0, 1] range and minimum length.
    /// Rollout- and log-backed construction with the terminal-overwrite rule
    /// lives in [`crate::potential::build_profile`]; this constructor exists
    /// for synthetic profiles in analyses and tests.
    pub fn from_values(values: Vec<f64>, m: usize, source: PotentialSource) -> Result<Self, Error> {
        if values.len() < 2 {
            return Err(Error::DimensionMismatch(format!(
                "profile needs at least 2 entries (one segment plus terminal), got {}",
                values.len()
            )));
        }
        if m == 0 {
            return Err(Error::Config("rollout width m must be positive".into()));
        }
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("potential {v} outside [0, 1]")));
            }
        }
        Ok(PotentialProfile { values, m, source })
    }

    /// All K+1 values, terminal last.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of segments covered (values minus the terminal entry).
    pub fn k(&self) -> usize {
        self.values.len() - 1
    }

    /// Grid resolution the body values live on.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Provenance of the body values.
    pub fn source(&self) -> PotentialSource {
        self.source
    }

    /// Provenance by index: body entries carry the profile source, the last
    /// entry is always the outcome.
    pub fn source_of(&self, index: usize) -> PotentialSource {
        if index + 1 == self.values.len() {
            PotentialSource::TerminalOutcome
        } else {
            self.source
        }
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("profile has at least 2 entries")
    }
}

/// Which credit-assignment rule produced an advantage sheet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    /// Length-discounted potential shaping with token redistribution.
    Shape,
    /// Outcome plus alpha times (outcome minus boundary potential).
    Mrt,
    /// Group-relative normalized outcome, uniform over the trajectory.
    Grpo,
}

impl std::str::FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "shape" => Ok(Estimator::Shape),
            "mrt" => Ok(Estimator::Mrt),
            "grpo" => Ok(Estimator::Grpo),
            other => Err(Error::Config(format!(
                "unknown estimator {other:?}, expected shape, mrt, or grpo"
            ))),
        }
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Estimator::Shape => "shape",
            Estimator::Mrt => "mrt",
            Estimator::Grpo => "grpo",
        })
    }
}

/// Per-segment shaping diagnostics carried on SHAPE sheets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentShaping {
    /// Potential gain of the transition before discounting.
    pub raw_gain: f64,
    /// Stagnation tax (1 - gamma) times the starting potential.
    pub tax: f64,
    /// Discount applied to this segment.
    pub gamma: f64,
    /// Segment length in tokens.
    pub length: usize,
}

/// Full output of scoring one trajectory with one estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageSheet {
    pub id: String,
    pub estimator: Estimator,
    /// Interior cutpoints the advantages were computed over; empty for
    /// grpo, which scores the sequence as a whole.
    #[serde(default)]
    pub boundaries: Vec<usize>,
    /// Checkpoint potentials used, terminal entry included. Absent for
    /// grpo.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potentials: Option<Vec<f64>>,
    /// One advantage per segment (a single entry for grpo).
    pub segment_advantages: Vec<f64>,
    /// One advantage per token, same order as the input stream.
    pub token_advantages: Vec<f64>,
    /// Present only for the shape estimator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shaping_terms: Option<Vec<SegmentShaping>>,
}
