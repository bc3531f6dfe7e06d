//! Boundary potential estimation.
//!
//! The potential of a prefix is the probability that forcing completion from
//! it succeeds. With m rollouts per boundary the estimate is a success count
//! over m, so estimates live exactly on the 1/m grid. Records that carry
//! logged potentials skip the rollouts; either way the terminal entry of a
//! profile is overwritten with the realized outcome, because by then the
//! success probability has collapsed to a fact.

use crate::config::ShapingConfig;
use crate::error::Error;
use crate::exec;
use crate::trajectory::{
    snap_to_grid, PotentialProfile, PotentialSource, SegmentPlan, TrajectoryRecord,
    GRID_SNAP_TOLERANCE,
};

/// A source of forced-completion rollouts.
///
/// `boundary` is a token index; the prefix is `tokens[..boundary]` (empty at
/// 0, meaning prompt-conditioned). A rollout must be a pure function of
/// (record, boundary, seed) so estimates are reproducible and safe to run
/// concurrently.
pub trait RolloutOracle: Sync {
    fn rollout(&self, record: &TrajectoryRecord, boundary: usize, seed: u64) -> Result<bool, Error>;
}

/// Mean success over rollouts with seeds `seed .. seed + m`.
///
/// The estimate is formed as an integer success count divided by m, so it
/// lies on the 1/m grid exactly. Rollouts may execute concurrently; the
/// count is a commutative sum, so seed order cannot change the value.
pub fn estimate_potential(
    record: &TrajectoryRecord,
    boundary: usize,
    oracle: &dyn RolloutOracle,
    m: usize,
    seed: u64,
) -> Result<f64, Error> {
    if m == 0 {
        return Err(Error::Config("rollout width m must be positive".into()));
    }
    if boundary > record.tokens.len() {
        return Err(Error::OracleUnavailable {
            boundary,
            reason: format!("beyond stream of {} tokens", record.tokens.len()),
        });
    }
    let outcomes = exec::map_range(m, |i| oracle.rollout(record, boundary, seed + i as u64));
    let mut successes = 0usize;
    for outcome in outcomes {
        if outcome? {
            successes += 1;
        }
    }
    Ok(successes as f64 / m as f64)
}

/// Builds the K+1 potential profile for a segmented trajectory.
///
/// Body values come from logged `boundary_potentials` when present (snapped
/// to the 1/m grid), otherwise from `oracle` rollouts at each segment start;
/// with neither source the record cannot be scored. Boundary i uses the
/// disjoint seed range `seed + i*m ..`, so boundaries are independent and
/// the whole profile is a pure function of (record, plan, seed).
pub fn build_profile(
    record: &TrajectoryRecord,
    plan: &SegmentPlan,
    oracle: Option<&dyn RolloutOracle>,
    config: &ShapingConfig,
    seed: u64,
) -> Result<PotentialProfile, Error> {
    let k = plan.k();
    let m = config.m_rollouts;

    let mut values;
    let source;
    if let Some(logged) = &record.boundary_potentials {
        if logged.len() != k + 1 {
            return Err(Error::DimensionMismatch(format!(
                "record {} logs {} potentials but the plan has {} segments (need K+1 = {})",
                record.id,
                logged.len(),
                k,
                k + 1
            )));
        }
        values = Vec::with_capacity(k + 1);
        for &v in logged {
            values.push(
                snap_to_grid(v, m, GRID_SNAP_TOLERANCE).ok_or(Error::OffGrid { value: v, m })?,
            );
        }
        source = PotentialSource::Log;
    } else if let Some(oracle) = oracle {
        // evaluation points: segment starts (0 is the prompt-conditioned
        // start of segment 1), terminal filled below
        let mut points = Vec::with_capacity(k);
        points.push(0usize);
        points.extend_from_slice(plan.boundaries());
        values = Vec::with_capacity(k + 1);
        for (i, &b) in points.iter().enumerate() {
            values.push(estimate_potential(record, b, oracle, m, seed + (i * m) as u64)?);
        }
        values.push(0.0); // placeholder, overwritten with the outcome
        source = PotentialSource::Oracle;
    } else {
        return Err(Error::NoPotentialSource { id: record.id.clone() });
    }

    // the terminal potential is always the realized outcome
    let terminal = values.len() - 1;
    values[terminal] = f64::from(record.outcome.min(1));

    PotentialProfile::from_values(values, m, source)
}
