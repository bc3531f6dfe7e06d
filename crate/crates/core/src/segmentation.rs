//! Entropy-triggered segmentation of token streams.
//!
//! High generation entropy marks forks in the reasoning, so segment
//! boundaries are placed at interior tokens whose entropy exceeds a
//! threshold tau. When more candidates fire than the fixed segment budget K
//! allows, a greedy pass keeps the highest-entropy candidates subject to a
//! minimum spacing; when too few fire, the largest segments are split at
//! their midpoints until K segments exist.

use crate::error::Error;
use crate::trajectory::SegmentPlan;

/// Interior indices whose entropy strictly exceeds `tau`, ascending.
/// Index 0 and the final index are never candidates: a boundary at 0 would
/// make the first segment empty, and the final token cannot open a segment
/// worth scoring separately.
pub fn find_cutpoints(entropies: &[f64], tau: f64) -> Result<Vec<usize>, Error> {
    if entropies.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    let last = entropies.len() - 1;
    Ok((1..last).filter(|&i| entropies[i] > tau).collect())
}

/// Spacing default: a quarter of the mean segment length, at least 1.
pub fn default_min_gap(token_count: usize, k: usize) -> usize {
    (token_count / (4 * k.max(1))).max(1)
}

/// Reduces `candidates` to exactly K segments over `token_count` tokens.
///
/// Greedy selection: repeatedly take the highest-entropy remaining candidate
/// (ties broken toward the earlier index) and drop candidates closer than
/// `min_gap` to any selected boundary. If fewer than K-1 boundaries survive,
/// the largest segment (earliest on ties) is split at its midpoint until the
/// budget is met; the fallback ignores `min_gap` because producing K
/// non-empty segments outranks spacing.
pub fn downsample(
    candidates: &[usize],
    entropies: &[f64],
    token_count: usize,
    k: usize,
    min_gap: usize,
) -> Result<SegmentPlan, Error> {
    if token_count == 0 {
        return Err(Error::EmptyTrajectory);
    }
    if k == 0 || min_gap == 0 {
        return Err(Error::Config(format!(
            "segment count {k} and min_gap {min_gap} must be positive"
        )));
    }
    if token_count < k {
        return Err(Error::TooFewTokens { token_count, k });
    }
    for &c in candidates {
        if c == 0 || c >= token_count {
            return Err(Error::InvalidPlan(format!(
                "candidate {c} not interior to stream of {token_count} tokens"
            )));
        }
        if c >= entropies.len() {
            return Err(Error::DimensionMismatch(format!(
                "candidate {c} outside entropy stream of {} values",
                entropies.len()
            )));
        }
    }

    let mut selected: Vec<usize> = Vec::with_capacity(k - 1);
    let mut remaining: Vec<usize> = candidates.to_vec();
    remaining.sort_unstable();
    remaining.dedup();

    while selected.len() < k - 1 && !remaining.is_empty() {
        // highest entropy wins; on equal entropy the earlier index wins
        let &best = remaining
            .iter()
            .max_by(|&&a, &&b| {
                entropies[a]
                    .partial_cmp(&entropies[b])
                    .expect("entropies are finite")
                    .then(b.cmp(&a))
            })
            .expect("remaining is non-empty");
        selected.push(best);
        remaining.retain(|&c| c.abs_diff(best) >= min_gap);
    }

    selected.sort_unstable();

    // midpoint fallback: split the largest segment until K segments exist
    while selected.len() < k - 1 {
        let mut edges = Vec::with_capacity(selected.len() + 2);
        edges.push(0);
        edges.extend_from_slice(&selected);
        edges.push(token_count);
        let (start, end) = edges
            .windows(2)
            .map(|w| (w[0], w[1]))
            .max_by_key(|&(s, e)| e - s)
            .expect("at least one segment");
        if end - start < 2 {
            // cannot happen while token_count >= k, kept as a guard
            return Err(Error::TooFewTokens { token_count, k });
        }
        let mid = (start + end) / 2;
        let pos = selected.partition_point(|&b| b < mid);
        selected.insert(pos, mid);
    }

    SegmentPlan::new(selected, token_count)
}

/// One-call segmentation: candidates above `tau`, downsampled to `k`
/// segments with the default spacing.
pub fn segment_entropies(entropies: &[f64], tau: f64, k: usize) -> Result<SegmentPlan, Error> {
    let candidates = find_cutpoints(entropies, tau)?;
    let min_gap = default_min_gap(entropies.len(), k);
    downsample(&candidates, entropies, entropies.len(), k, min_gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cutpoints_are_interior_threshold_crossings() {
        let entropies = [0.1, 2.0, 0.1, 3.0, 0.2];
        assert_eq!(find_cutpoints(&entropies, 1.5).unwrap(), vec![1, 3]);
    }

    #[test]
    fn edge_indices_never_fire() {
        // both ends above tau, still excluded
        let entropies = [9.0, 0.1, 9.0];
        assert_eq!(find_cutpoints(&entropies, 1.0).unwrap(), Vec::<usize>::new());
        // a single token has no interior
        assert_eq!(find_cutpoints(&[5.0], 1.0).unwrap(), Vec::<usize>::new());
    }

    #[test]
    fn empty_stream_rejected() {
        assert!(matches!(find_cutpoints(&[], 1.0), Err(Error::EmptyTrajectory)));
    }

    #[test]
    fn threshold_is_strict() {
        let entropies = [0.0, 1.5, 0.0];
        assert_eq!(find_cutpoints(&entropies, 1.5).unwrap(), Vec::<usize>::new());
        assert_eq!(find_cutpoints(&entropies, 1.5 - 1e-12).unwrap(), vec![1]);
    }

    #[test]
    fn downsample_keeps_all_when_under_budget() {
        let mut entropies = vec![0.0; 10];
        entropies[1] = 2.0;
        entropies[3] = 3.0;
        let plan = downsample(&[1, 3], &entropies, 10, 3, 1).unwrap();
        assert_eq!(plan.boundaries(), &[1, 3]);
    }

    #[test]
    fn greedy_picks_highest_entropy_and_enforces_gap() {
        let mut entropies = vec![0.0; 10];
        entropies[4] = 1.6;
        entropies[5] = 2.9;
        entropies[6] = 1.7;
        // 5 wins on entropy; 4 and 6 fall inside its exclusion zone
        let plan = downsample(&[4, 5, 6], &entropies, 10, 2, 2).unwrap();
        assert_eq!(plan.boundaries(), &[5]);
    }

    #[test]
    fn tie_breaks_toward_earlier_index() {
        let mut entropies = vec![0.0; 10];
        entropies[3] = 2.0;
        entropies[7] = 2.0;
        let plan = downsample(&[3, 7], &entropies, 10, 2, 1).unwrap();
        assert_eq!(plan.boundaries(), &[3]);
    }

    #[test]
    fn midpoint_fallback_without_candidates() {
        let entropies = vec![0.0; 8];
        let plan = downsample(&[], &entropies, 8, 2, 1).unwrap();
        assert_eq!(plan.boundaries(), &[4]);
    }

    #[test]
    fn fallback_tops_up_partial_candidate_sets() {
        // one candidate, three segments wanted: largest remainder is split
        let mut entropies = vec![0.0; 12];
        entropies[2] = 2.0;
        let plan = downsample(&[2], &entropies, 12, 3, 1).unwrap();
        assert_eq!(plan.k(), 3);
        assert!(plan.boundaries().contains(&2));
        // [2, 12) is the larger piece, midpoint (2 + 12) / 2 = 7
        assert_eq!(plan.boundaries(), &[2, 7]);
    }

    #[test]
    fn too_few_tokens_rejected() {
        let entropies = vec![0.0; 3];
        assert!(matches!(
            downsample(&[], &entropies, 3, 4, 1),
            Err(Error::TooFewTokens { token_count: 3, k: 4 })
        ));
    }

    #[test]
    fn default_gap_floors_at_one() {
        assert_eq!(default_min_gap(64, 8), 2);
        assert_eq!(default_min_gap(8, 8), 1);
        assert_eq!(default_min_gap(0, 8), 1);
    }

    #[test]
    fn one_token_one_segment() {
        let plan = downsample(&[], &[0.3], 1, 1, 1).unwrap();
        assert_eq!(plan.k(), 1);
        assert_eq!(plan.boundaries(), &[] as &[usize]);
    }

    proptest! {
        #[test]
        fn coverage_and_determinism(
            entropies in proptest::collection::vec(0.0f64..4.0, 1..80),
            tau in 0.0f64..4.0,
            k in 1usize..9,
        ) {
            prop_assume!(entropies.len() >= k);
            let a = segment_entropies(&entropies, tau, k).unwrap();
            let b = segment_entropies(&entropies, tau, k).unwrap();
            // identical inputs, identical plans
            prop_assert_eq!(&a, &b);
            // exactly k non-empty segments covering the stream
            let lengths = a.segment_lengths(entropies.len()).unwrap();
            prop_assert_eq!(lengths.len(), k);
            prop_assert!(lengths.iter().all(|&l| l > 0));
            prop_assert_eq!(lengths.iter().sum::<usize>(), entropies.len());
        }

        #[test]
        fn raising_tau_never_adds_candidates(
            entropies in proptest::collection::vec(0.0f64..4.0, 2..60),
            tau in 0.0f64..4.0,
            bump in 0.0f64..2.0,
        ) {
            let lo = find_cutpoints(&entropies, tau).unwrap();
            let hi = find_cutpoints(&entropies, tau + bump).unwrap();
            prop_assert!(hi.len() <= lo.len());
            // and hi is a subset of lo
            prop_assert!(hi.iter().all(|c| lo.contains(c)));
        }
    }
}
