//! Ensemble grouping under the coercivity margin condition.
//!
//! Members of one group share a system matrix built from their mean
//! coefficient; the per-member deviation is treated explicitly, which is
//! stable when `theta_hat > 3 * theta_plus`, where `theta_hat` is the
//! smallest coefficient value over the group and `theta_plus` the largest
//! pointwise deviation from the group mean. Both are estimated on a probe
//! set combining the assembly quadrature points with a uniform lattice.
//!
//! A whole sample set that satisfies the margin runs as one group in input
//! order. Otherwise samples are ordered by their probe-average value and
//! grown greedily into maximal stable chunks; singleton groups have zero
//! deviation, so the procedure always terminates for positive coefficients.

use crate::coefficient::CoefficientSample;
use crate::{Error, Result};

/// Side length of the uniform stability probe lattice.
const LATTICE_SIDE: usize = 65;

/// Uniform lattice over the closed unit square, boundary included.
pub fn probe_lattice() -> Vec<[f64; 2]> {
    let mut points = Vec::with_capacity(LATTICE_SIDE * LATTICE_SIDE);
    let step = 1.0 / (LATTICE_SIDE - 1) as f64;
    for j in 0..LATTICE_SIDE {
        for i in 0..LATTICE_SIDE {
            points.push([i as f64 * step, j as f64 * step]);
        }
    }
    points
}

/// Probe points reduced per coefficient family so that extremes over the
/// reduced set equal extremes over the raw set.
pub struct StabilityProbes {
    points: Vec<[f64; 2]>,
}

impl StabilityProbes {
    /// Reduces `raw` for the family of `sample`.
    ///
    /// Constant fields need one probe; the sine-product family is monotone
    /// in `sin(xy)`, so only the probes attaining its extremes matter; the
    /// KL family varies in the second coordinate only, so probes are
    /// deduplicated by it.
    pub fn for_family(sample: &CoefficientSample, raw: &[[f64; 2]]) -> Self {
        assert!(!raw.is_empty(), "empty probe set");
        let points = match sample {
            CoefficientSample::Constant(_) => vec![raw[0]],
            CoefficientSample::SineProduct { .. } => {
                let mut lo = raw[0];
                let mut hi = raw[0];
                for &[x, y] in raw {
                    if x * y < lo[0] * lo[1] {
                        lo = [x, y];
                    }
                    if x * y > hi[0] * hi[1] {
                        hi = [x, y];
                    }
                }
                vec![lo, hi]
            }
            CoefficientSample::KlExpansion { .. } => {
                let mut ys: Vec<f64> = raw.iter().map(|p| p[1]).collect();
                ys.sort_by(f64::total_cmp);
                ys.dedup();
                ys.into_iter().map(|y| [0.0, y]).collect()
            }
        };
        StabilityProbes { points }
    }

    /// Number of retained probes.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Whether the probe set is empty (it never is after construction).
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// The two stability numbers of one group.
#[derive(Clone, Copy, Debug)]
pub struct StabilityEstimate {
    /// Smallest coefficient value over members and probes.
    pub theta_hat: f64,
    /// Largest pointwise deviation from the group mean.
    pub theta_plus: f64,
}

impl StabilityEstimate {
    /// The coercivity margin condition.
    pub fn is_stable(&self) -> bool {
        self.theta_hat > 0.0 && self.theta_hat > 3.0 * self.theta_plus
    }
}

/// One ensemble group: member indices, their mean coefficient, and the
/// stability numbers the time stepper certifies against.
#[derive(Clone, Debug)]
pub struct EnsembleGroup {
    /// Indices into the level's sample vector.
    pub members: Vec<usize>,
    /// Mean coefficient shared by the group's system matrix.
    pub mean: CoefficientSample,
    /// Stability numbers on the probe set used for partitioning.
    pub estimate: StabilityEstimate,
}

/// Definition-faithful stability estimate of one candidate group.
pub fn estimate_stability(
    samples: &[CoefficientSample],
    members: &[usize],
    mean: &CoefficientSample,
    probes: &StabilityProbes,
) -> StabilityEstimate {
    let mut theta_hat = f64::INFINITY;
    let mut theta_plus = 0.0f64;
    for &[x, y] in &probes.points {
        let mean_v = mean.eval(x, y);
        for &j in members {
            let v = samples[j].eval(x, y);
            theta_hat = theta_hat.min(v);
            theta_plus = theta_plus.max((v - mean_v).abs());
        }
    }
    StabilityEstimate { theta_hat, theta_plus }
}

/// Partitions a sample set into stable groups.
///
/// Returns the groups in the order their first members appear (input order
/// when the whole set is stable, probe-average order otherwise). Every
/// sample lands in exactly one group.
pub fn partition_stable(
    samples: &[CoefficientSample],
    probes: &StabilityProbes,
) -> Result<Vec<EnsembleGroup>> {
    if samples.is_empty() {
        return Ok(Vec::new());
    }

    // Probe-value matrix and per-sample minima.
    let np = probes.points.len();
    let values: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| probes.points.iter().map(|&[x, y]| s.eval(x, y)).collect())
        .collect();
    let row_min: Vec<f64> = values
        .iter()
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();
    if let Some(worst) = row_min.iter().copied().reduce(f64::min) {
        if worst <= 0.0 {
            return Err(Error::CoefficientNotPositive { lower_bound: worst });
        }
    }

    // Whole set first: maximal sharing, input order preserved.
    let all: Vec<usize> = (0..samples.len()).collect();
    if let Some(group) = try_group(samples, &all, probes)? {
        return Ok(vec![group]);
    }

    // Order by probe-average value so similar coefficients sit together.
    let keys: Vec<f64> = values
        .iter()
        .map(|row| row.iter().sum::<f64>() / np as f64)
        .collect();
    let mut order = all;
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));

    let mut groups = Vec::new();
    let mut start = 0;
    while start < order.len() {
        // Incremental growth with a range-based shortcut: the column range
        // brackets the exact deviation within a factor of two.
        let mut col_min = values[order[start]].clone();
        let mut col_max = col_min.clone();
        let mut col_sum = col_min.clone();
        let mut chunk_min = row_min[order[start]];
        let mut end = start + 1;
        while end < order.len() {
            let cand = &values[order[end]];
            let cand_chunk_min = chunk_min.min(row_min[order[end]]);
            let mut range = 0.0f64;
            for p in 0..np {
                range = range.max(col_max[p].max(cand[p]) - col_min[p].min(cand[p]));
            }
            let accept = if cand_chunk_min > 3.0 * range {
                true
            } else if cand_chunk_min <= 1.5 * range {
                false
            } else {
                // Exact check against the candidate chunk's mean.
                let k = (end - start + 1) as f64;
                let mut dev = 0.0f64;
                for p in 0..np {
                    let mean_p = (col_sum[p] + cand[p]) / k;
                    for &j in &order[start..end] {
                        dev = dev.max((values[j][p] - mean_p).abs());
                    }
                    dev = dev.max((cand[p] - mean_p).abs());
                }
                cand_chunk_min > 3.0 * dev
            };
            if !accept {
                break;
            }
            for p in 0..np {
                col_min[p] = col_min[p].min(cand[p]);
                col_max[p] = col_max[p].max(cand[p]);
                col_sum[p] += cand[p];
            }
            chunk_min = cand_chunk_min;
            end += 1;
        }

        // Certify with the definition-faithful estimate; shrink on the rare
        // rounding-level disagreement with the probe-value path.
        let mut stop = end;
        loop {
            let members = order[start..stop].to_vec();
            if let Some(group) = try_group(samples, &members, probes)? {
                groups.push(group);
                break;
            }
            stop -= 1;
            assert!(stop > start, "singleton group failed its stability check");
        }
        start = stop;
    }
    Ok(groups)
}

/// Builds the group when its definition-faithful estimate is stable.
fn try_group(
    samples: &[CoefficientSample],
    members: &[usize],
    probes: &StabilityProbes,
) -> Result<Option<EnsembleGroup>> {
    let set: Vec<CoefficientSample> = members.iter().map(|&j| samples[j].clone()).collect();
    let mean = CoefficientSample::mean_of(&set)?;
    let estimate = estimate_stability(samples, members, &mean, probes);
    if estimate.is_stable() {
        Ok(Some(EnsembleGroup { members: members.to_vec(), mean, estimate }))
    } else {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::KlParams;
    use crate::sampling::SampleStream;

    fn sine_probes() -> StabilityProbes {
        let first = CoefficientSample::SineProduct { omega: 0.0 };
        StabilityProbes::for_family(&first, &probe_lattice())
    }

    #[test]
    fn lattice_covers_the_closed_square() {
        let lattice = probe_lattice();
        assert_eq!(lattice.len(), 65 * 65);
        assert!(lattice.contains(&[0.0, 0.0]));
        assert!(lattice.contains(&[1.0, 1.0]));
        assert!(lattice.contains(&[0.5, 0.5]));
    }

    #[test]
    fn sine_family_reduces_to_two_probes() {
        let probes = sine_probes();
        assert_eq!(probes.len(), 2);
    }

    #[test]
    fn kl_family_reduces_to_distinct_heights() {
        let params = KlParams { mean: 1.0, sigma: 0.15, correlation_length: 0.25, n_frequencies: 3 };
        let sample = CoefficientSample::KlExpansion { params, modes: vec![0.0; 7] };
        let probes = StabilityProbes::for_family(&sample, &probe_lattice());
        assert_eq!(probes.len(), 65);
    }

    #[test]
    fn stability_numbers_match_frozen_values() {
        // Samples omega in {-sqrt3, 0, sqrt3}: the mean coefficient is
        // 8 + sin(xy); the smallest value is 8 + (1 - sqrt3) sin(1) and the
        // largest deviation is sqrt3 sin(1), both attained at (1, 1).
        let s3 = 3.0f64.sqrt();
        let samples = [
            CoefficientSample::SineProduct { omega: -s3 },
            CoefficientSample::SineProduct { omega: 0.0 },
            CoefficientSample::SineProduct { omega: s3 },
        ];
        let mean = CoefficientSample::mean_of(&samples).unwrap();
        let probes = sine_probes();
        let est = estimate_stability(&samples, &[0, 1, 2], &mean, &probes);
        assert!((est.theta_hat - 7.3840004860256009).abs() <= 1e-12, "{}", est.theta_hat);
        assert!((est.theta_plus - 1.4574704987822956).abs() <= 1e-12, "{}", est.theta_plus);
        assert!(est.is_stable());
    }

    #[test]
    fn stable_whole_set_stays_one_group_in_input_order() {
        let samples: Vec<CoefficientSample> = [0.5, -0.3, 1.2, -1.0, 0.0]
            .iter()
            .map(|&omega| CoefficientSample::SineProduct { omega })
            .collect();
        let groups = partition_stable(&samples, &sine_probes()).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].members, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn spread_constants_split_into_singletons() {
        // Mean 5.5, deviation 4.5, smallest value 1: the margin fails and no
        // pair of these constants can share a group.
        let samples = [CoefficientSample::Constant(10.0), CoefficientSample::Constant(1.0)];
        let probes = StabilityProbes::for_family(&samples[0], &probe_lattice());
        let est = estimate_stability(
            &samples,
            &[0, 1],
            &CoefficientSample::mean_of(&samples).unwrap(),
            &probes,
        );
        assert_eq!(est.theta_hat, 1.0);
        assert_eq!(est.theta_plus, 4.5);
        assert!(!est.is_stable());

        let groups = partition_stable(&samples, &probes).unwrap();
        assert_eq!(groups.len(), 2);
        // Sorted by value: the constant 1 group comes first.
        assert_eq!(groups[0].members, vec![1]);
        assert_eq!(groups[1].members, vec![0]);
        for g in &groups {
            assert_eq!(g.estimate.theta_plus, 0.0);
            assert!(g.estimate.is_stable());
        }
    }

    #[test]
    fn close_constants_share_one_group() {
        let samples: Vec<CoefficientSample> =
            [5.0, 5.1, 4.9, 5.05].iter().map(|&c| CoefficientSample::Constant(c)).collect();
        let probes = StabilityProbes::for_family(&samples[0], &probe_lattice());
        let groups = partition_stable(&samples, &probes).unwrap();
        assert_eq!(groups.len(), 1);
    }

    #[test]
    fn non_positive_coefficients_are_rejected() {
        let samples = [CoefficientSample::Constant(2.0), CoefficientSample::Constant(-0.5)];
        let probes = StabilityProbes::for_family(&samples[0], &probe_lattice());
        match partition_stable(&samples, &probes) {
            Err(Error::CoefficientNotPositive { lower_bound }) => {
                assert_eq!(lower_bound, -0.5);
            }
            other => panic!("expected positivity error, got {other:?}"),
        }
    }

    #[test]
    fn kl_partition_is_lossless_stable_and_deterministic() {
        let params = KlParams { mean: 1.0, sigma: 0.15, correlation_length: 0.25, n_frequencies: 3 };
        let stream = SampleStream::new(11);
        let samples: Vec<CoefficientSample> = (0..64)
            .map(|j| CoefficientSample::KlExpansion {
                params: params.clone(),
                modes: stream.uniform_sym_vec(0, 0, j, 7),
            })
            .collect();
        let probes = StabilityProbes::for_family(&samples[0], &probe_lattice());
        let groups = partition_stable(&samples, &probes).unwrap();

        // Lossless: every sample in exactly one group.
        let mut seen: Vec<usize> = groups.iter().flat_map(|g| g.members.clone()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..64).collect::<Vec<_>>());

        // Each group independently certified.
        for g in &groups {
            let est = estimate_stability(&samples, &g.members, &g.mean, &probes);
            assert!(est.is_stable(), "group {:?} not stable", g.members);
        }

        // Bit-identical on a rerun.
        let again = partition_stable(&samples, &probes).unwrap();
        assert_eq!(groups.len(), again.len());
        for (a, b) in groups.iter().zip(&again) {
            assert_eq!(a.members, b.members);
            assert_eq!(a.estimate.theta_hat.to_bits(), b.estimate.theta_hat.to_bits());
        }
    }

    #[test]
    fn wide_kl_spread_forces_multiple_groups() {
        // Extreme opposite mode vectors cannot share a group: deviations
        // reach the full spread while the minimum drops toward the bound.
        let params = KlParams { mean: 1.0, sigma: 0.15, correlation_length: 0.25, n_frequencies: 3 };
        let s3 = 3.0f64.sqrt();
        let samples = [
            CoefficientSample::KlExpansion { params: params.clone(), modes: vec![s3; 7] },
            CoefficientSample::KlExpansion { params: params.clone(), modes: vec![-s3; 7] },
        ];
        let probes = StabilityProbes::for_family(&samples[0], &probe_lattice());
        let groups = partition_stable(&samples, &probes).unwrap();
        assert_eq!(groups.len(), 2);
    }
}
