//! `operator-check` and `elliptic-check`.

use degenwave_core::analysis::{elliptic_gamma, power_law_solution, solve_auxiliary_elliptic};
use degenwave_core::operator_checks::{
    derivative_bound, dissipativity_probe, norm_ratio_bound, resolvent_probe, DerivativeReport, DissipativityReport,
    NormRatioReport, ResolventReport,
};
use degenwave_core::{build_mesh, make_coefficient, CoefficientKind, RunConfig, Setup};
use serde::Serialize;

const DERIVATIVE_TRIALS: usize = 20;

pub fn default_times(t_end: f64) -> Vec<f64> {
    vec![0.0, 0.5 * t_end, t_end]
}

#[derive(Debug, Clone, Serialize)]
pub struct OperatorCheckReport {
    pub times: Vec<f64>,
    pub seed: u64,
    pub dissipativity: Vec<DissipativityReport>,
    pub resolvent: Vec<ResolventReport>,
    /// Every ordered pair `t < s` of the probed times.
    pub norm_ratio: Vec<NormRatioReport>,
    pub derivative: Vec<DerivativeReport>,
    pub claims: Claims,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Claims {
    pub dissipative: bool,
    /// Largest shifted form value seen; positive means a counterexample.
    pub max_form: f64,
    pub resolvent: bool,
    pub norm_ratio: bool,
    pub derivative: bool,
}

impl OperatorCheckReport {
    pub fn failed(&self) -> Vec<String> {
        let c = &self.claims;
        [
            ("dissipative", c.dissipative),
            ("resolvent", c.resolvent),
            ("norm_ratio", c.norm_ratio),
            ("derivative", c.derivative),
        ]
        .into_iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name.to_string())
        .collect()
    }
}

pub fn operator_check(
    setup: &Setup,
    times: &[f64],
    trials: usize,
    resolvent_trials: usize,
    seed: u64,
) -> anyhow::Result<OperatorCheckReport> {
    let dissipativity: Vec<_> = times.iter().map(|&t| dissipativity_probe(setup, t, trials, seed)).collect();
    let resolvent =
        times.iter().map(|&t| resolvent_probe(setup, t, resolvent_trials, seed)).collect::<Result<Vec<_>, _>>()?;
    let mut norm_ratio = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        for &s in &times[i + 1..] {
            norm_ratio.push(norm_ratio_bound(setup, t, s, trials, seed));
        }
    }
    let derivative: Vec<_> = times.iter().map(|&t| derivative_bound(setup, t, DERIVATIVE_TRIALS, seed)).collect();

    let claims = Claims {
        dissipative: dissipativity.iter().all(|r| r.pass),
        max_form: dissipativity.iter().map(|r| r.max_form).fold(f64::NEG_INFINITY, f64::max),
        resolvent: resolvent.iter().all(|r| r.pass),
        norm_ratio: norm_ratio.iter().all(|r| r.pass),
        derivative: derivative.iter().all(|r| r.finite && r.bounded),
    };
    let pass = claims.dissipative && claims.resolvent && claims.norm_ratio && claims.derivative;
    Ok(OperatorCheckReport {
        times: times.to_vec(),
        seed,
        dissipativity,
        resolvent,
        norm_ratio,
        derivative,
        claims,
        pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipticRow {
    pub n: usize,
    pub gamma: f64,
    pub energy_norm_sq: f64,
    pub energy_bound: f64,
    pub l2_norm_sq: f64,
    pub l2_bound: f64,
    pub energy_ok: bool,
    pub l2_ok: bool,
    /// Discrete L2 distance to the closed form, for power-law coefficients.
    pub l2_error: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EllipticCheckReport {
    pub coefficient: &'static str,
    pub mu_a: f64,
    pub beta: f64,
    pub lambda: f64,
    pub rows: Vec<EllipticRow>,
    pub pass: bool,
}

impl EllipticCheckReport {
    pub fn failed(&self) -> Vec<String> {
        self.rows.iter().filter(|r| !(r.energy_ok && r.l2_ok)).map(|r| format!("N = {}", r.n)).collect()
    }
}

/// Mass-lumped L2 distance between nodal values and `exact`.
fn nodal_l2_error(nodes: &[f64], z: &[f64], exact: impl Fn(f64) -> f64) -> f64 {
    let n = nodes.len() - 1;
    let mut acc = 0.0;
    for j in 0..=n {
        let left = if j > 0 { nodes[j] - nodes[j - 1] } else { 0.0 };
        let right = if j < n { nodes[j + 1] - nodes[j] } else { 0.0 };
        acc += 0.5 * (left + right) * (z[j] - exact(nodes[j])).powi(2);
    }
    acc.sqrt()
}

pub fn elliptic_check(config: &RunConfig, sizes: &[usize], lambda: f64) -> anyhow::Result<EllipticCheckReport> {
    let kind = config.coefficient_kind()?;
    let spec = make_coefficient(kind.clone())?;
    let beta = config.gains()?.beta;
    let gamma = elliptic_gamma(spec.mu_a);
    let exact = match kind {
        CoefficientKind::Power { alpha } => Some(power_law_solution(alpha, beta, lambda)),
        _ => None,
    };
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mesh = build_mesh(n, gamma)?;
        let r = solve_auxiliary_elliptic(&spec, beta, lambda, &mesh)?;
        rows.push(EllipticRow {
            n,
            gamma,
            energy_norm_sq: r.energy_norm_sq,
            energy_bound: r.energy_bound,
            l2_norm_sq: r.l2_norm_sq,
            l2_bound: r.l2_bound,
            energy_ok: r.energy_ok,
            l2_ok: r.l2_ok,
            l2_error: exact.as_ref().map(|f| nodal_l2_error(&mesh.nodes, &r.z, f)),
        });
    }
    let pass = rows.iter().all(|r| r.energy_ok && r.l2_ok);
    Ok(EllipticCheckReport { coefficient: spec.kind.name(), mu_a: spec.mu_a, beta, lambda, rows, pass })
}
