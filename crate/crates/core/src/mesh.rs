//! Graded meshes on `[0, 1]` and the P1 weighted operators built on them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{BcKind, CoefficientSpec};
use crate::tridiag::SymTridiag;

/// Nodes `x_j = (j/N)^gamma`, `j = 0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<f64>,
    pub grading_gamma: f64,
    pub n: usize,
}

impl Mesh {
    pub fn cells(&self) -> usize {
        self.n
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.windows(2).map(|w| w[1] - w[0])
    }

    pub fn midpoints(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1]))
    }

    /// Width of the last cell, adjacent to `x = 1`.
    pub fn last_width(&self) -> f64 {
        self.nodes[self.n] - self.nodes[self.n - 1]
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&x| f(x)).collect()
    }
}

/// Grading exponent that roughly equidistributes the travel time of the
/// degenerate wave speed `sqrt(a)`, clamped to `[1, 4]`.
pub fn default_gamma(mu_a: f64) -> f64 {
    (2.0 / (2.0 - mu_a)).clamp(1.0, 4.0)
}

pub fn build_mesh(n: usize, gamma: f64) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::BadMeshParams(format!("need at least 2 cells, got {n}")));
    }
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(Error::BadMeshParams(format!("grading exponent must be >= 1, got {gamma}")));
    }
    let nodes =
        (0..=n).map(|j| if gamma == 1.0 { j as f64 / n as f64 } else { (j as f64 / n as f64).powf(gamma) }).collect();
    Ok(Mesh { nodes, grading_gamma: gamma, n })
}

/// Lumped mass and P1 stiffness with the coefficient sampled at element
/// midpoints, so `a` is never evaluated at `x = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteOperators {
    pub mass: Vec<f64>,
    pub stiffness: SymTridiag,
    pub bc_kind: BcKind,
    /// `a` at each element midpoint.
    pub a_mid: Vec<f64>,
    pub a_of_1: f64,
}

impl DiscreteOperators {
    /// First node carrying a degree of freedom.
    pub fn first_free(&self) -> usize {
        match self.bc_kind {
            BcKind::DirichletLeft => 1,
            BcKind::NaturalLeft => 0,
        }
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn last(&self) -> usize {
        self.mass.len() - 1
    }

    pub fn mass_form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass.iter().zip(u).zip(v).map(|((m, a), b)| m * a * b).sum()
    }

    /// Zeroes the entries that the left boundary condition pins.
    pub fn constrain(&self, u: &mut [f64]) {
        u[..self.first_free()].iter_mut().for_each(|x| *x = 0.0);
    }
}

pub fn assemble_operators(spec: &CoefficientSpec, mesh: &Mesh, bc_kind: BcKind) -> Result<DiscreteOperators> {
    if bc_kind != spec.bc_kind() {
        return Err(Error::BcMismatch { mu_a: spec.mu_a, requested: bc_kind.name() });
    }
    let n = mesh.n;
    let mut stiffness = SymTridiag::zeros(n + 1);
    let mut mass = vec![0.0; n + 1];
    let mut a_mid = Vec::with_capacity(n);
    for (e, (h, xm)) in mesh.widths().zip(mesh.midpoints()).enumerate() {
        let a = spec.eval(xm);
        a_mid.push(a);
        let k = a / h;
        stiffness.diag[e] += k;
        stiffness.diag[e + 1] += k;
        stiffness.off[e] -= k;
        mass[e] += 0.5 * h;
        mass[e + 1] += 0.5 * h;
    }
    Ok(DiscreteOperators { mass, stiffness, bc_kind, a_mid, a_of_1: spec.a_of_1 })
}

/// The three parts of the weighted energy norm of a discrete pair `(u, v)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedNorms {
    /// `u^T K u`, approximating the integral of `a u_x^2`.
    pub h1a_part: f64,
    /// `v^T M v`, approximating the integral of `v^2`.
    pub l2_part: f64,
    /// `beta a(1) u_N^2`
    pub boundary_part: f64,
}

pub fn weighted_norms(u: &[f64], v: &[f64], ops: &DiscreteOperators, beta: f64) -> Result<WeightedNorms> {
    for x in [u, v] {
        if x.len() != ops.len() {
            return Err(Error::ShapeMismatch { expected: ops.len(), got: x.len() });
        }
    }
    let un = u[ops.last()];
    Ok(WeightedNorms {
        h1a_part: ops.stiffness.quad_form(u),
        l2_part: ops.mass_form(v, v),
        boundary_part: beta * ops.a_of_1 * un * un,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_coefficient, CoefficientKind};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pow(alpha: f64) -> CoefficientSpec {
        make_coefficient(CoefficientKind::Power { alpha }).unwrap()
    }

    #[test]
    fn mesh_examples() {
        assert_eq!(build_mesh(4, 1.0).unwrap().nodes, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(build_mesh(4, 2.0).unwrap().nodes, vec![0.0, 1.0 / 16.0, 0.25, 9.0 / 16.0, 1.0]);
        let m = build_mesh(7, 1.0).unwrap();
        assert_eq!(m.nodes.len(), 8);
        assert!(m.widths().all(|h| (h - 1.0 / 7.0).abs() < 1e-15));
        assert!(build_mesh(1, 1.0).is_err());
        assert!(build_mesh(8, 0.5).is_err());
    }

    #[test]
    fn unit_coefficient_assembly() {
        let ops = assemble_operators(&pow(0.0), &build_mesh(2, 1.0).unwrap(), BcKind::DirichletLeft).unwrap();
        // hand P1 assembly with h = 1/2
        assert_eq!(ops.stiffness.diag, vec![2.0, 4.0, 2.0]);
        assert_eq!(ops.stiffness.off, vec![-2.0, -2.0]);
        assert_eq!(ops.mass, vec![0.25, 0.5, 0.25]);
    }

    #[test]
    fn midpoint_values_populate_off_diagonals() {
        let ops = assemble_operators(&pow(1.0), &build_mesh(2, 1.0).unwrap(), BcKind::NaturalLeft).unwrap();
        assert_eq!(ops.a_mid, vec![0.25, 0.75]);
        assert_eq!(ops.stiffness.off, vec![-0.5, -1.5]);
    }

    #[test]
    fn bc_must_match_regime() {
        let mesh = build_mesh(8, 1.0).unwrap();
        assert!(matches!(assemble_operators(&pow(0.5), &mesh, BcKind::NaturalLeft), Err(Error::BcMismatch { .. })));
        assert!(matches!(assemble_operators(&pow(1.5), &mesh, BcKind::DirichletLeft), Err(Error::BcMismatch { .. })));
    }

    #[test]
    fn norm_examples() {
        let spec = pow(0.5);
        let mesh = build_mesh(512, default_gamma(0.5)).unwrap();
        let ops = assemble_operators(&spec, &mesh, spec.bc_kind()).unwrap();
        let zero = vec![0.0; 513];
        let n = weighted_norms(&zero, &zero, &ops, 1.0).unwrap();
        assert_eq!((n.h1a_part, n.l2_part, n.boundary_part), (0.0, 0.0, 0.0));

        let u = mesh.sample(|x| x);
        let ones = vec![1.0; 513];
        let n = weighted_norms(&u, &ones, &ops, 1.0).unwrap();
        assert!((n.h1a_part - 2.0 / 3.0).abs() < 1e-3);
        assert!((n.l2_part - 1.0).abs() < 1e-14);
        assert_eq!(n.boundary_part, 1.0);

        assert!(matches!(weighted_norms(&u[..4], &ones, &ops, 1.0), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn stiffness_consistency_order_two_on_uniform_mesh() {
        // a = 1 + x is bounded away from zero; u = sin(x), exact integral of a u_x^2
        let exact = {
            // antiderivative of (1+x) cos^2 x
            let f = |x: f64| {
                let s = (2.0 * x).sin();
                x / 2.0 + s / 4.0 + x * x / 4.0 + x * s / 4.0 + (2.0 * x).cos() / 8.0
            };
            f(1.0) - f(0.0)
        };
        let spec = make_coefficient(CoefficientKind::PowerTimesFactor {
            alpha: 0.0,
            factor: crate::model::SmoothFactor::OnePlusX,
        })
        .unwrap();
        let err = |n: usize| {
            let mesh = build_mesh(n, 1.0).unwrap();
            let ops = assemble_operators(&spec, &mesh, BcKind::DirichletLeft).unwrap();
            (ops.stiffness.quad_form(&mesh.sample(f64::sin)) - exact).abs()
        };
        let order = (err(64) / err(128)).log2();
        assert!(order > 1.9, "observed order {order}");
    }

    #[test]
    fn discrete_poincare_holds_on_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for alpha in [0.0, 0.3, 0.5, 0.9, 1.2, 1.8] {
            let spec = pow(alpha);
            let c = crate::model::coefficient_constants(&spec, 1.0);
            let mesh = build_mesh(256, default_gamma(alpha)).unwrap();
            let ops = assemble_operators(&spec, &mesh, spec.bc_kind()).unwrap();
            for _ in 0..50 {
                let mut u: Vec<f64> = (0..=256).map(|_| rng.gen_range(-1.0..1.0)).collect();
                ops.constrain(&mut u);
                let n = weighted_norms(&u, &u, &ops, 1.0).unwrap();
                let un2 = u[256] * u[256];
                let slack = 0.05 * (n.h1a_part + un2);
                assert!(n.l2_part <= 2.0 * un2 + c.c_a_prime * n.h1a_part + slack);
            }
        }
    }

    proptest! {
        #[test]
        fn stiffness_symmetric_psd_with_constant_kernel(alpha in 0.0f64..1.99, n in 4usize..64, seed in 0u64..1000) {
            let spec = pow(alpha);
            let mesh = build_mesh(n, default_gamma(alpha)).unwrap();
            let ops = assemble_operators(&spec, &mesh, spec.bc_kind()).unwrap();
            let mut out = vec![0.0; n + 1];
            ops.stiffness.apply(&vec![1.0; n + 1], &mut out);
            let scale = ops.stiffness.diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            prop_assert!(out.iter().all(|r| r.abs() <= 1e-12 * scale));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u: Vec<f64> = (0..=n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            prop_assert!(ops.stiffness.quad_form(&u) >= -1e-12 * scale);
            prop_assert!(ops.mass.iter().all(|m| *m > 0.0));
            for (j, x) in mesh.nodes.iter().enumerate() {
                prop_assert!((x - (j as f64 / n as f64).powf(mesh.grading_gamma)).abs() <= 1e-14);
            }
        }
    }
}
