//! The auxiliary problem `-(a z')' = 0`, `z'(1) + beta z(1) = lambda`, with
//! `z(0) = 0` in the weakly degenerate regime.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{assemble_operators, Mesh};
use crate::model::{coefficient_constants, CoefficientSpec};
use crate::tridiag::solve_from;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EllipticReport {
    pub z: Vec<f64>,
    /// `int a z'^2 + beta a(1) z(1)^2`
    pub energy_norm_sq: f64,
    pub l2_norm_sq: f64,
    /// `a(1) lambda^2 / beta`
    pub energy_bound: f64,
    /// `a(1) lambda^2 / (beta alpha_a)`
    pub l2_bound: f64,
    pub energy_ok: bool,
    pub l2_ok: bool,
}

/// Solves `int a z' phi' + beta a(1) z(1) phi(1) = lambda a(1) phi(1)` on the
/// P1 space of `mesh` and checks both a priori bounds.
pub fn solve_auxiliary_elliptic(spec: &CoefficientSpec, beta: f64, lambda: f64, mesh: &Mesh) -> Result<EllipticReport> {
    if !(beta > 0.0) {
        return Err(Error::BadParameter(format!("beta = {beta} must be positive")));
    }
    let ops = assemble_operators(spec, mesh, spec.bc_kind())?;
    let a1 = spec.a_of_1;
    let n = ops.last();
    let mut system = ops.stiffness.clone();
    system.diag[n] += beta * a1;
    let mut z = vec![0.0; n + 1];
    z[n] = lambda * a1;
    solve_from(&system, ops.first_free(), &mut z)?;
    ops.constrain(&mut z);

    let energy_norm_sq = ops.stiffness.quad_form(&z) + beta * a1 * z[n] * z[n];
    let l2_norm_sq = ops.mass_form(&z, &z);
    let alpha_a = coefficient_constants(spec, beta).alpha_a;
    let energy_bound = a1 * lambda * lambda / beta;
    let l2_bound = energy_bound / alpha_a;
    let tol = 1e-12 * (1.0 + energy_bound);
    Ok(EllipticReport {
        z,
        energy_norm_sq,
        l2_norm_sq,
        energy_bound,
        l2_bound,
        energy_ok: energy_norm_sq <= energy_bound + tol,
        l2_ok: l2_norm_sq <= l2_bound + tol,
    })
}

/// Grading for the elliptic solve. Midpoint stiffness integrates `1/a` on
/// the first cell with error `O(h_1^{1 - mu_a})`; `gamma = 2/(1 - mu_a)`
/// (clamped to `[1, 8]`) makes that `O(N^-2)` where the clamp allows.
pub fn elliptic_gamma(mu_a: f64) -> f64 {
    if mu_a >= 1.0 {
        1.0
    } else {
        (2.0 / (1.0 - mu_a)).clamp(1.0, 8.0)
    }
}

/// Exact solution for `a = x^alpha`.
pub fn power_law_solution(alpha: f64, beta: f64, lambda: f64) -> impl Fn(f64) -> f64 {
    move |x: f64| {
        if alpha < 1.0 {
            let c = lambda * (1.0 - alpha) / (1.0 - alpha + beta);
            c * x.powf(1.0 - alpha) / (1.0 - alpha)
        } else {
            lambda / beta
        }
    }
}
