//! Random diffusion coefficient families.
//!
//! Both built-in families are affine in their random parameters, so the
//! ensemble mean of a set of samples is the same kind of coefficient with
//! averaged parameters. That keeps the shared-matrix splitting exact: the
//! mean coefficient and the per-member deviations live in one family and are
//! evaluated through the same code path.

use std::f64::consts::PI;

use crate::{Error, Result};

/// Parameters of the truncated Karhunen-Loève diffusion field. The field
/// varies in the second coordinate only; the mode vector holds the constant
/// mode followed by `n_frequencies` cosine and then sine amplitudes.
#[derive(Clone, Debug, PartialEq)]
pub struct KlParams {
    /// Mean field value.
    pub mean: f64,
    /// Amplitude scale of the random part.
    pub sigma: f64,
    /// Correlation length of the underlying Gaussian kernel.
    pub correlation_length: f64,
    /// Number of retained cosine/sine frequency pairs.
    pub n_frequencies: usize,
}

impl KlParams {
    /// Eigenvalue of mode `i` (0 is the constant mode).
    pub fn eigenvalue(&self, i: usize) -> f64 {
        let lc = self.correlation_length;
        if i == 0 {
            PI.sqrt() * lc / 2.0
        } else {
            let arg = i as f64 * PI * lc;
            PI.sqrt() * lc * (-arg * arg / 4.0).exp()
        }
    }

    /// Length of the mode vector: constant mode plus a cosine and a sine
    /// amplitude per frequency.
    pub fn n_modes(&self) -> usize {
        1 + 2 * self.n_frequencies
    }

    /// Guaranteed lower bound of the field over all mode vectors with
    /// entries in `[-amp, amp]`, bounding every trigonometric factor by one.
    pub fn worst_case_lower_bound(&self, amp: f64) -> f64 {
        let mut dev = self.eigenvalue(0).sqrt();
        for i in 1..=self.n_frequencies {
            dev += 2.0 * self.eigenvalue(i).sqrt();
        }
        self.mean - self.sigma * amp * dev
    }
}

/// One realization of a diffusion coefficient.
#[derive(Clone, Debug, PartialEq)]
pub enum CoefficientSample {
    /// Spatially constant coefficient.
    Constant(f64),
    /// `8 + (1 + omega) sin(x y)` on the unit square.
    SineProduct { omega: f64 },
    /// Truncated KL expansion in the second coordinate.
    KlExpansion { params: KlParams, modes: Vec<f64> },
}

impl CoefficientSample {
    /// Point evaluation.
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            CoefficientSample::Constant(c) => *c,
            CoefficientSample::SineProduct { omega } => 8.0 + (1.0 + omega) * (x * y).sin(),
            CoefficientSample::KlExpansion { params, modes } => {
                let mut v = params.mean + params.sigma * params.eigenvalue(0).sqrt() * modes[0];
                for i in 1..=params.n_frequencies {
                    let s = params.sigma * params.eigenvalue(i).sqrt();
                    let phase = i as f64 * PI * y;
                    v += s * (modes[i] * phase.cos() + modes[params.n_frequencies + i] * phase.sin());
                }
                v
            }
        }
    }

    /// A pointwise lower bound valid over the whole unit square.
    pub fn lower_bound(&self) -> f64 {
        match self {
            CoefficientSample::Constant(c) => *c,
            CoefficientSample::SineProduct { omega } => {
                // sin(xy) ranges over [0, sin 1] on the unit square.
                8.0 + ((1.0 + omega) * 1.0f64.sin()).min(0.0)
            }
            CoefficientSample::KlExpansion { params, modes } => {
                let mut v = params.mean + params.sigma * params.eigenvalue(0).sqrt() * modes[0];
                for i in 1..=params.n_frequencies {
                    let s = params.sigma * params.eigenvalue(i).sqrt();
                    let amp = (modes[i] * modes[i]
                        + modes[params.n_frequencies + i] * modes[params.n_frequencies + i])
                        .sqrt();
                    v -= s * amp;
                }
                v
            }
        }
    }

    /// Ensemble mean of a set of same-family samples, exploiting that each
    /// family is affine in its parameters.
    pub fn mean_of(samples: &[CoefficientSample]) -> Result<CoefficientSample> {
        let first = samples.first().ok_or_else(|| {
            Error::InvalidArgument("mean of an empty coefficient set".into())
        })?;
        let inv = 1.0 / samples.len() as f64;
        match first {
            CoefficientSample::Constant(_) => {
                let mut acc = 0.0;
                for s in samples {
                    match s {
                        CoefficientSample::Constant(c) => acc += c,
                        _ => return Err(mixed_families()),
                    }
                }
                Ok(CoefficientSample::Constant(acc * inv))
            }
            CoefficientSample::SineProduct { .. } => {
                let mut acc = 0.0;
                for s in samples {
                    match s {
                        CoefficientSample::SineProduct { omega } => acc += omega,
                        _ => return Err(mixed_families()),
                    }
                }
                Ok(CoefficientSample::SineProduct { omega: acc * inv })
            }
            CoefficientSample::KlExpansion { params, modes } => {
                let mut acc = vec![0.0; modes.len()];
                for s in samples {
                    match s {
                        CoefficientSample::KlExpansion { params: p, modes: m }
                            if p == params && m.len() == modes.len() =>
                        {
                            for (a, v) in acc.iter_mut().zip(m) {
                                *a += v;
                            }
                        }
                        _ => return Err(mixed_families()),
                    }
                }
                for a in &mut acc {
                    *a *= inv;
                }
                Ok(CoefficientSample::KlExpansion { params: params.clone(), modes: acc })
            }
        }
    }
}

fn mixed_families() -> Error {
    Error::InvalidArgument("coefficient samples come from different families".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kl_params() -> KlParams {
        KlParams { mean: 1.0, sigma: 0.15, correlation_length: 0.25, n_frequencies: 3 }
    }

    #[test]
    fn kl_eigenvalues_match_frozen_values() {
        let p = kl_params();
        // Independent high-precision evaluation of sqrt(pi)*Lc/2 and
        // sqrt(pi)*Lc*exp(-(i pi Lc)^2/4).
        assert!((p.eigenvalue(0) - 0.2215567313631895).abs() <= 1e-15);
        assert!((p.eigenvalue(1) - 0.37978803407363514).abs() <= 1e-15);
        assert!((p.eigenvalue(2) - 0.23912240741086758).abs() <= 1e-15);
        assert!((p.eigenvalue(3) - 0.11059918740216979).abs() <= 1e-15);
        assert_eq!(p.n_modes(), 7);
    }

    #[test]
    fn kl_worst_case_bound_is_positive() {
        let p = kl_params();
        let bound = p.worst_case_lower_bound(3.0f64.sqrt());
        assert!((bound - 0.1305878226085205).abs() <= 1e-13);
        assert!(bound > 0.13);
    }

    #[test]
    fn sine_product_point_value_matches_frozen_literal() {
        let a = CoefficientSample::SineProduct { omega: 3.0f64.sqrt() };
        assert!((a.eval(0.5, 0.5) - 8.675920186677057).abs() <= 1e-14);
    }

    #[test]
    fn sine_product_lower_bound_brackets_grid_evaluations() {
        for omega in [-(3.0f64.sqrt()), -0.4, 0.0, 3.0f64.sqrt()] {
            let a = CoefficientSample::SineProduct { omega };
            let bound = a.lower_bound();
            let mut grid_min = f64::INFINITY;
            for i in 0..=40 {
                for j in 0..=40 {
                    grid_min = grid_min.min(a.eval(i as f64 / 40.0, j as f64 / 40.0));
                }
            }
            assert!(bound <= grid_min + 1e-12, "omega {omega}: {bound} vs {grid_min}");
            // The bound is sharp: for negative slope the corner (1,1) attains it.
            if omega < -1.0 {
                assert!((grid_min - bound).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn sine_product_minimum_at_lowest_parameter_matches_frozen_value() {
        let a = CoefficientSample::SineProduct { omega: -(3.0f64.sqrt()) };
        // 8 + (1 - sqrt(3)) sin(1), evaluated independently.
        assert!((a.lower_bound() - 7.3840004860256009).abs() <= 1e-13);
    }

    #[test]
    fn kl_lower_bound_brackets_grid_evaluations() {
        let p = kl_params();
        let modes = vec![-1.0, 0.8, -1.2, 0.3, 1.5, -0.7, 0.2];
        let a = CoefficientSample::KlExpansion { params: p, modes };
        let bound = a.lower_bound();
        let mut grid_min = f64::INFINITY;
        for j in 0..=200 {
            grid_min = grid_min.min(a.eval(0.3, j as f64 / 200.0));
        }
        assert!(bound <= grid_min + 1e-12, "{bound} vs {grid_min}");
    }

    #[test]
    fn means_average_parameters() {
        let set = [
            CoefficientSample::SineProduct { omega: -0.5 },
            CoefficientSample::SineProduct { omega: 1.5 },
        ];
        match CoefficientSample::mean_of(&set).unwrap() {
            CoefficientSample::SineProduct { omega } => assert_eq!(omega, 0.5),
            other => panic!("wrong family: {other:?}"),
        }

        let p = kl_params();
        let set = [
            CoefficientSample::KlExpansion { params: p.clone(), modes: vec![1.0; 7] },
            CoefficientSample::KlExpansion { params: p.clone(), modes: vec![-1.0; 7] },
            CoefficientSample::KlExpansion { params: p.clone(), modes: vec![3.0; 7] },
        ];
        match CoefficientSample::mean_of(&set).unwrap() {
            CoefficientSample::KlExpansion { modes, .. } => {
                assert!(modes.iter().all(|&m| (m - 1.0).abs() <= 1e-15));
            }
            other => panic!("wrong family: {other:?}"),
        }
    }

    #[test]
    fn mean_point_values_match_averaged_evaluations() {
        // Affinity check: eval(mean) == mean(eval) at arbitrary points.
        let p = kl_params();
        let samples: Vec<CoefficientSample> = (0..5)
            .map(|k| CoefficientSample::KlExpansion {
                params: p.clone(),
                modes: (0..7).map(|i| ((k * 7 + i) as f64 * 0.7).sin()).collect(),
            })
            .collect();
        let mean = CoefficientSample::mean_of(&samples).unwrap();
        for &(x, y) in &[(0.1, 0.9), (0.5, 0.3), (0.77, 0.52)] {
            let avg: f64 =
                samples.iter().map(|s| s.eval(x, y)).sum::<f64>() / samples.len() as f64;
            assert!((mean.eval(x, y) - avg).abs() <= 1e-14);
        }
    }

    #[test]
    fn mixed_or_empty_sets_are_rejected() {
        assert!(CoefficientSample::mean_of(&[]).is_err());
        let set = [
            CoefficientSample::Constant(1.0),
            CoefficientSample::SineProduct { omega: 0.0 },
        ];
        assert!(CoefficientSample::mean_of(&set).is_err());
    }
}
