//! Symmetric quadrature rules on the reference triangle.
//!
//! Points are stored as barycentric coordinates and weights are normalized to
//! sum to one, so the integral of `f` over a physical triangle `T` is
//! `area(T) * sum_q w_q f(x_q)`.  Two rules are used throughout the crate:
//! a 7-point degree-5 rule for operator/load assembly and a 16-point degree-8
//! rule for error norms and quadrature oracles in tests.

/// A quadrature rule on the reference triangle in barycentric form.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    /// Barycentric coordinates `(l0, l1, l2)` of each node, each summing to 1.
    pub points: Vec<[f64; 3]>,
    /// Weights normalized to sum to 1.
    pub weights: Vec<f64>,
    /// Highest total polynomial degree integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    /// Number of quadrature nodes.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// True when the rule holds no nodes (never the case for shipped rules).
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// 7-point degree-5 symmetric rule used for assembly.
    pub fn degree5() -> Self {
        let sqrt15 = 15.0_f64.sqrt();
        let w_center = 9.0 / 40.0;
        let w_a = (155.0 + sqrt15) / 1200.0;
        let w_b = (155.0 - sqrt15) / 1200.0;
        // Interior vertex-symmetric orbits: (a, b, b) with its rotations.
        let b_a = (6.0 + sqrt15) / 21.0;
        let a_a = 1.0 - 2.0 * b_a;
        let b_b = (6.0 - sqrt15) / 21.0;
        let a_b = 1.0 - 2.0 * b_b;

        let mut points = vec![[1.0 / 3.0; 3]];
        let mut weights = vec![w_center];
        for (a, b, w) in [(a_a, b_a, w_a), (a_b, b_b, w_b)] {
            for p in orbit3(a, b) {
                points.push(p);
                weights.push(w);
            }
        }
        QuadratureRule { points, weights, degree: 5 }
    }

    /// 16-point degree-8 symmetric rule used for error norms and test oracles.
    pub fn degree8() -> Self {
        // Classical degree-8 triangle rule: centroid + three 3-point orbits +
        // one 6-point orbit, weights normalized to sum to 1.  The constants
        // solve the moment equations for all symmetric polynomials of degree
        // <= 8; they are stated to full f64 precision.
        let orbits3 = [
            (0.459_292_588_292_723_16, 0.095_091_634_267_284_62),
            (0.170_569_307_751_760_21, 0.103_217_370_534_718_25),
            (0.050_547_228_317_030_975, 0.032_458_497_623_198_08),
        ];
        let orbit6 = (
            0.008_394_777_409_957_605,
            0.263_112_829_634_638_1,
            0.027_230_314_174_434_994,
        );

        let mut points = vec![[1.0 / 3.0; 3]];
        let mut weights = vec![0.144_315_607_677_787_17];
        for (b, w) in orbits3 {
            for p in orbit3(1.0 - 2.0 * b, b) {
                points.push(p);
                weights.push(w);
            }
        }
        let (a, b, w) = orbit6;
        for p in orbit6_perms(a, b, 1.0 - a - b) {
            points.push(p);
            weights.push(w);
        }
        QuadratureRule { points, weights, degree: 8 }
    }
}

/// The three rotations of the barycentric point `(a, b, b)`.
fn orbit3(a: f64, b: f64) -> [[f64; 3]; 3] {
    [[a, b, b], [b, a, b], [b, b, a]]
}

/// All six permutations of the barycentric point `(a, b, c)`.
fn orbit6_perms(a: f64, b: f64, c: f64) -> [[f64; 3]; 6] {
    [
        [a, b, c],
        [a, c, b],
        [b, a, c],
        [b, c, a],
        [c, a, b],
        [c, b, a],
    ]
}
