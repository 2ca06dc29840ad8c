//! The built-in model problems: per-sample data bundles for the heat
//! equation `u_t - div(a grad u) = f` on the unit square with Dirichlet
//! boundary data.
//!
//! One problem has a random-amplitude manufactured solution (so errors are
//! measurable exactly); the other is a boundary-driven flow with a truncated
//! KL diffusion field and no closed-form solution.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::coefficient::{CoefficientSample, KlParams};

/// Space-time scalar function.
pub type SpaceTimeFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;
/// Spatial scalar function.
pub type SpatialFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Space-time gradient function.
pub type SpaceTimeGrad = Arc<dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync>;

/// Everything one ensemble member contributes to the discrete system.
#[derive(Clone)]
pub struct SampleData {
    /// Diffusion coefficient realization.
    pub coefficient: CoefficientSample,
    /// Forcing term `f(x, y, t)`.
    pub forcing: SpaceTimeFn,
    /// Dirichlet boundary data `g(x, y, t)`.
    pub boundary: SpaceTimeFn,
    /// Initial state `u(x, y, 0)`.
    pub initial: SpatialFn,
    /// Exact solution, when the problem has one.
    pub exact: Option<SpaceTimeFn>,
}

/// Exact expectation of the random solution, for error measurement.
#[derive(Clone)]
pub struct MeanExact {
    /// `E[u](x, y, t)`.
    pub value: SpaceTimeFn,
    /// Spatial gradient of `E[u]`.
    pub gradient: SpaceTimeGrad,
}

/// A model problem: a recipe turning random draws into sample data.
#[derive(Clone, Debug)]
pub enum Problem {
    /// `a = 8 + (1+omega) sin(xy)` with the manufactured solution
    /// `u = (1+omega)(sin(2πx) sin(2πy) + sin(4πt))`, `omega` uniform with
    /// zero mean and unit variance.
    ManufacturedSine,
    /// The manufactured-solution problem with `omega` pinned: deterministic
    /// data, zero random dimensions, exact mean equal to the exact solution.
    FrozenSine { omega: f64 },
    /// Zero forcing, zero initial state, profile `y(1-y)` entering through
    /// the left edge, and a truncated KL diffusion field.
    KlBoundaryDriven { params: KlParams },
}

fn sine_mode(x: f64, y: f64) -> f64 {
    (2.0 * PI * x).sin() * (2.0 * PI * y).sin()
}

fn sine_sample(omega: f64) -> SampleData {
    let amp = 1.0 + omega;
    let exact = move |x: f64, y: f64, t: f64| amp * (sine_mode(x, y) + (4.0 * PI * t).sin());
    SampleData {
        coefficient: CoefficientSample::SineProduct { omega },
        forcing: Arc::new(move |x, y, t| {
            let s = sine_mode(x, y);
            let a = 8.0 + amp * (x * y).sin();
            let grad_dot = y * (2.0 * PI * x).cos() * (2.0 * PI * y).sin()
                + x * (2.0 * PI * x).sin() * (2.0 * PI * y).cos();
            amp * 4.0 * PI * (4.0 * PI * t).cos() + a * amp * 8.0 * PI * PI * s
                - amp * amp * 2.0 * PI * (x * y).cos() * grad_dot
        }),
        // The spatial mode vanishes on the boundary, leaving the
        // spatially constant trace.
        boundary: Arc::new(move |_, _, t| amp * (4.0 * PI * t).sin()),
        initial: Arc::new(move |x, y| amp * sine_mode(x, y)),
        exact: Some(Arc::new(exact)),
    }
}

impl Problem {
    /// How many scalar draws one sample consumes.
    pub fn n_random_dims(&self) -> usize {
        match self {
            Problem::ManufacturedSine => 1,
            Problem::FrozenSine { .. } => 0,
            Problem::KlBoundaryDriven { params } => params.n_modes(),
        }
    }

    /// Default final time of the built-in experiments.
    pub fn default_final_time(&self) -> f64 {
        match self {
            Problem::ManufacturedSine | Problem::FrozenSine { .. } => 1.0,
            Problem::KlBoundaryDriven { .. } => 0.5,
        }
    }

    /// Materializes one sample from its draws (`draws.len()` must equal
    /// `n_random_dims`).
    pub fn sample(&self, draws: &[f64]) -> SampleData {
        assert_eq!(draws.len(), self.n_random_dims(), "draw count mismatch");
        match self {
            Problem::ManufacturedSine => sine_sample(draws[0]),
            Problem::FrozenSine { omega } => sine_sample(*omega),
            Problem::KlBoundaryDriven { params } => SampleData {
                coefficient: CoefficientSample::KlExpansion {
                    params: params.clone(),
                    modes: draws.to_vec(),
                },
                forcing: Arc::new(|_, _, _| 0.0),
                boundary: Arc::new(|x, y, _| if x <= 0.0 { y * (1.0 - y) } else { 0.0 }),
                initial: Arc::new(|_, _| 0.0),
                exact: None,
            },
        }
    }

    /// Exact mean solution, when known.
    pub fn mean_exact(&self) -> Option<MeanExact> {
        match self {
            Problem::ManufacturedSine => Some(MeanExact {
                value: Arc::new(|x, y, t| sine_mode(x, y) + (4.0 * PI * t).sin()),
                gradient: Arc::new(|x, y, _| {
                    [
                        2.0 * PI * (2.0 * PI * x).cos() * (2.0 * PI * y).sin(),
                        2.0 * PI * (2.0 * PI * x).sin() * (2.0 * PI * y).cos(),
                    ]
                }),
            }),
            Problem::FrozenSine { omega } => {
                let amp = 1.0 + omega;
                Some(MeanExact {
                    value: Arc::new(move |x, y, t| {
                        amp * (sine_mode(x, y) + (4.0 * PI * t).sin())
                    }),
                    gradient: Arc::new(move |x, y, _| {
                        [
                            amp * 2.0 * PI * (2.0 * PI * x).cos() * (2.0 * PI * y).sin(),
                            amp * 2.0 * PI * (2.0 * PI * x).sin() * (2.0 * PI * y).cos(),
                        ]
                    }),
                })
            }
            Problem::KlBoundaryDriven { .. } => None,
        }
    }
}
