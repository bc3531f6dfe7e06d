//! Experiment reports over observed potential transitions.
//!
//! Both reports consume (starting potential, gain, outcome) triples, as
//! harvested from training runs. The regression asks how predictive a
//! potential gain is of eventual success at low versus high starting
//! potential; the distribution asks where in the potential range the gains
//! actually happen.

use serde::Serialize;

use crate::error::Error;
use crate::simulator::GainTransition;

/// Transitions starting at or below this potential belong to the low group.
pub const DEFAULT_THRESHOLD_LOW: f64 = 0.25;
/// Transitions starting at or above this potential belong to the high group.
pub const DEFAULT_THRESHOLD_HIGH: f64 = 0.5;
/// Floor filter: starting this low, a gain this negative means the
/// potential was pinned at the floor, and the sample is dropped.
pub const FLOOR_PHI: f64 = 0.25;
pub const FLOOR_DELTA: f64 = -0.24;
/// Shift margin keeping every bin's adjusted mean strictly positive.
pub const DISTRIBUTION_EPSILON: f64 = 0.03;

pub const BIN_LABELS: [&str; 4] = ["low", "mid-low", "mid-high", "high"];

/// Per-group least-squares fits of outcome against gain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionReport {
    pub slope_low: f64,
    pub slope_high: f64,
    /// Raw intercepts; the centered fit subtracts these, which leaves the
    /// slopes untouched.
    pub intercept_low: f64,
    pub intercept_high: f64,
    pub n_low: usize,
    pub n_high: usize,
    /// Samples removed by the floor filter.
    pub dropped: usize,
}

/// Where the raw gains happen across four starting-potential bins.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    pub counts: [usize; 4],
    /// Mean raw gain per bin; empty bins count as 0.
    pub bin_means: [f64; 4],
    /// Means shifted by the global minimum minus epsilon; all positive.
    pub shifted: [f64; 4],
    /// Shifted means normalized to sum to 100.
    pub percentages: [f64; 4],
    pub epsilon: f64,
}

fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64), Error> {
    if xs.len() < 2 {
        return Err(Error::GroupTooSmall(xs.len()));
    }
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mean_x) * (x - mean_x)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateGroup("zero variance in the gains".into()));
    }
    let sxy: f64 =
        xs.iter().zip(ys.iter()).map(|(x, y)| (x - mean_x) * (y - mean_y)).sum();
    let slope = sxy / sxx;
    Ok((slope, mean_y - slope * mean_x))
}

/// Fits outcome against gain separately for transitions starting at low
/// and at high potential. Floor-pinned samples (start at or below
/// [`FLOOR_PHI`], gain at or below [`FLOOR_DELTA`]) are dropped first;
/// they say more about the floor than about the step.
pub fn gain_regression(
    transitions: &[GainTransition],
    threshold_low: f64,
    threshold_high: f64,
) -> Result<RegressionReport, Error> {
    if !(threshold_low < threshold_high) {
        return Err(Error::Config(format!(
            "low threshold {threshold_low} must sit below high threshold {threshold_high}"
        )));
    }
    let mut dropped = 0;
    let mut low: (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    let mut high: (Vec<f64>, Vec<f64>) = (Vec::new(), Vec::new());
    for t in transitions {
        if t.phi_k <= FLOOR_PHI && t.delta <= FLOOR_DELTA {
            dropped += 1;
            continue;
        }
        let bucket = if t.phi_k <= threshold_low {
            &mut low
        } else if t.phi_k >= threshold_high {
            &mut high
        } else {
            continue;
        };
        bucket.0.push(t.delta);
        bucket.1.push(f64::from(t.outcome));
    }
    let (slope_low, intercept_low) = ols(&low.0, &low.1)?;
    let (slope_high, intercept_high) = ols(&high.0, &high.1)?;
    Ok(RegressionReport {
        slope_low,
        slope_high,
        intercept_low,
        intercept_high,
        n_low: low.0.len(),
        n_high: high.0.len(),
        dropped,
    })
}

/// Bin index of a starting potential: quarters of the unit range, with the
/// top edge folded into the last bin.
pub fn potential_bin(phi_k: f64) -> usize {
    ((phi_k * 4.0).floor() as usize).min(3)
}

/// Shares of the total raw gain contributed by each starting-potential
/// bin. Bin means can be negative, so each is shifted by the global
/// minimum minus [`DISTRIBUTION_EPSILON`] before normalizing; the shares
/// then sum to 100.
pub fn gain_distribution(transitions: &[GainTransition]) -> Result<DistributionReport, Error> {
    if transitions.is_empty() {
        return Err(Error::Config("gain distribution needs at least one transition".into()));
    }
    let mut sums = [0.0f64; 4];
    let mut counts = [0usize; 4];
    for t in transitions {
        let bin = potential_bin(t.phi_k);
        sums[bin] += t.delta;
        counts[bin] += 1;
    }
    let mut bin_means = [0.0f64; 4];
    for (i, mean) in bin_means.iter_mut().enumerate() {
        if counts[i] > 0 {
            *mean = sums[i] / counts[i] as f64;
        }
    }
    let min = bin_means.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut shifted = [0.0f64; 4];
    for (s, m) in shifted.iter_mut().zip(bin_means.iter()) {
        *s = m - (min - DISTRIBUTION_EPSILON);
    }
    let total: f64 = shifted.iter().sum();
    let mut percentages = [0.0f64; 4];
    for (p, s) in percentages.iter_mut().zip(shifted.iter()) {
        *p = 100.0 * s / total;
    }
    Ok(DistributionReport {
        counts,
        bin_means,
        shifted,
        percentages,
        epsilon: DISTRIBUTION_EPSILON,
    })
}
