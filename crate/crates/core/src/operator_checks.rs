//! Checks of the evolution-family machinery on the discretized generator
//! `A(t)(u, v, w) = (v, (a u')', (delta tau' - 1)/tau w_delta)`.
//!
//! A discrete state carries, besides `(u, v, w)`, the boundary slope
//! `phi = u'(1)`. The domain is cut out by two rows: `w_0 = v_N` and
//! `mu1 v_N + mu2 w_N + phi + beta u_N = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::Setup;
use crate::delay_channel::TransportChannel;
use crate::error::{Error, Result};
use crate::mesh::DiscreteOperators;
use crate::model::{DelaySpec, GainSet};
use crate::tridiag::solve_from;

#[derive(Debug, Clone, PartialEq)]
pub struct GenState {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub phi: f64,
}

impl GenState {
    pub fn zeros(n_nodes: usize, n_delta: usize) -> Self {
        GenState { u: vec![0.0; n_nodes], v: vec![0.0; n_nodes], w: vec![0.0; n_delta + 1], phi: 0.0 }
    }
}

/// The generator frozen at time `t`.
#[derive(Debug, Clone, Copy)]
pub struct DiscreteGenerator<'a> {
    pub t: f64,
    pub tau: f64,
    pub tau_prime: f64,
    pub iota: f64,
    pub ops: &'a DiscreteOperators,
    pub gains: &'a GainSet,
}

/// `sqrt(1 + tau'^2) / (2 tau)`
pub fn iota(tau: f64, tau_prime: f64) -> f64 {
    (1.0 + tau_prime * tau_prime).sqrt() / (2.0 * tau)
}

impl<'a> DiscreteGenerator<'a> {
    pub fn new(t: f64, delay: &DelaySpec, ops: &'a DiscreteOperators, gains: &'a GainSet) -> Self {
        let (tau, tau_prime) = (delay.tau(t), delay.tau_prime(t));
        DiscreteGenerator { t, tau, tau_prime, iota: iota(tau, tau_prime), ops, gains }
    }

    /// Explicit coefficients, for tests and finite differences in `t`.
    pub fn with_tau(t: f64, tau: f64, tau_prime: f64, ops: &'a DiscreteOperators, gains: &'a GainSet) -> Self {
        DiscreteGenerator { t, tau, tau_prime, iota: iota(tau, tau_prime), ops, gains }
    }

    fn n(&self) -> usize {
        self.ops.last()
    }

    /// `(w_0 - v_N, mu1 v_N + mu2 w_N + phi + beta u_N)`
    pub fn constraint_residuals(&self, x: &GenState) -> [f64; 2] {
        let n = self.n();
        let nd = x.w.len() - 1;
        [x.w[0] - x.v[n], self.gains.mu1 * x.v[n] + self.gains.mu2 * x.w[nd] + x.phi + self.gains.beta * x.u[n]]
    }

    /// Least-norm correction of `(v_N, w_0, w_N, u_N, phi)` onto both
    /// constraint rows; returns the size of the correction.
    pub fn project(&self, x: &mut GenState) -> f64 {
        let g = self.gains;
        let rows = [[-1.0, 1.0, 0.0, 0.0, 0.0], [g.mu1, 0.0, g.mu2, g.beta, 1.0]];
        let r = self.constraint_residuals(x);
        let mut gram = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                gram[i][j] = (0..5).map(|k| rows[i][k] * rows[j][k]).sum();
            }
        }
        let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
        let y = [(gram[1][1] * r[0] - gram[0][1] * r[1]) / det, (gram[0][0] * r[1] - gram[1][0] * r[0]) / det];
        let corr: Vec<f64> = (0..5).map(|k| rows[0][k] * y[0] + rows[1][k] * y[1]).collect();
        let n = self.n();
        let nd = x.w.len() - 1;
        x.v[n] -= corr[0];
        x.w[0] -= corr[1];
        x.w[nd] -= corr[2];
        x.u[n] -= corr[3];
        x.phi -= corr[4];
        corr.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `A(t) x`. The `w_0` slot of the result repeats the `v_N` slot, as
    /// required for the image of a domain element; `phi` of the result is 0.
    pub fn apply(&self, x: &GenState, project: bool) -> Result<GenState> {
        let mut x = x.clone();
        if project {
            self.project(&mut x);
        } else {
            let r = self.constraint_residuals(&x);
            let violation = r[0].abs().max(r[1].abs());
            if violation > 1e-10 {
                return Err(Error::DomainViolation { violation });
            }
        }
        let ops = self.ops;
        let n = self.n();
        let nd = x.w.len() - 1;
        let mut out = GenState::zeros(ops.len(), nd);
        out.u.copy_from_slice(&x.v);
        ops.stiffness.apply(&x.u, &mut out.v);
        out.v.iter_mut().for_each(|y| *y = -*y);
        out.v[n] += ops.a_of_1 * x.phi;
        for (y, m) in out.v.iter_mut().zip(&ops.mass) {
            *y /= m;
        }
        ops.constrain(&mut out.u);
        ops.constrain(&mut out.v);
        let h = 1.0 / nd as f64;
        for i in 1..=nd {
            let coef = (i as f64 * h * self.tau_prime - 1.0) / self.tau;
            out.w[i] = coef * (x.w[i] - x.w[i - 1]) / h;
        }
        out.w[0] = out.v[n];
        Ok(out)
    }

    /// `<x, y>_t`: mass, stiffness, the `beta a(1)` boundary term and the
    /// `mu1 a(1) tau(t)` channel term.
    pub fn inner(&self, x: &GenState, y: &GenState) -> f64 {
        inner_with_tau(self.ops, self.gains, self.tau, x, y)
    }

    pub fn norm_sq(&self, x: &GenState) -> f64 {
        self.inner(x, x)
    }
}

pub fn inner_with_tau(ops: &DiscreteOperators, gains: &GainSet, tau: f64, x: &GenState, y: &GenState) -> f64 {
    let n = ops.last();
    let a1 = ops.a_of_1;
    let nd = x.w.len() - 1;
    let channel: f64 = (1..=nd).map(|i| x.w[i] * y.w[i]).sum::<f64>() / nd as f64;
    ops.mass_form(&x.v, &y.v)
        + ops.stiffness.bilinear(&x.u, &y.u)
        + gains.beta * a1 * x.u[n] * y.u[n]
        + gains.mu1 * a1 * tau * channel
}

/// Random probe: rough (independent entries) or smooth (a few sine modes).
fn random_probe(rng: &mut ChaCha8Rng, ops: &DiscreteOperators, nodes: &[f64], n_delta: usize) -> GenState {
    let smooth = rng.gen_bool(0.5);
    let mut field = |xs: &mut dyn Iterator<Item = f64>| -> Vec<f64> {
        if smooth {
            let modes: Vec<(f64, f64)> = (0..4).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(0.0..6.3))).collect();
            xs.map(|x| {
                modes
                    .iter()
                    .enumerate()
                    .map(|(k, (c, p))| c * ((k + 1) as f64 * std::f64::consts::PI * x + p).sin())
                    .sum()
            })
            .collect()
        } else {
            xs.map(|_| rng.gen_range(-1.0..1.0)).collect()
        }
    };
    let mut u = field(&mut nodes.iter().copied());
    let mut v = field(&mut nodes.iter().copied());
    let w = field(&mut (0..=n_delta).map(|i| i as f64 / n_delta as f64));
    ops.constrain(&mut u);
    ops.constrain(&mut v);
    let phi = rng.gen_range(-1.0..1.0);
    GenState { u, v, w, phi }
}

/// Probe concentrated at the boundary: `u = 0`, `v = v_N e_N`, `w` linear
/// from `v_N` to a random outflow.
fn boundary_probe(rng: &mut ChaCha8Rng, ops: &DiscreteOperators, n_delta: usize) -> GenState {
    let mut x = GenState::zeros(ops.len(), n_delta);
    let vn = rng.gen_range(-1.0..1.0);
    let wn = rng.gen_range(-1.0..1.0);
    x.v[ops.last()] = vn;
    for i in 0..=n_delta {
        let d = i as f64 / n_delta as f64;
        x.w[i] = vn + d * (wn - vn);
    }
    x
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipativityReport {
    pub t: f64,
    pub iota: f64,
    pub trials: usize,
    pub seed: u64,
    /// `max <(A - iota) U, U>_t / ||U||_t^2`
    pub max_ratio: f64,
    /// `max <(A - iota) U, U>_t`
    pub max_form: f64,
    pub max_projection: f64,
    pub pass: bool,
}

pub const TOL_DISSIPATIVITY: f64 = 1e-8;

/// Largest value of the shifted quadratic form over projected random probes.
pub fn dissipativity_probe(setup: &Setup, t: f64, trials: usize, seed: u64) -> DissipativityReport {
    let gen = DiscreteGenerator::new(t, &setup.delay, &setup.ops, &setup.gains);
    let mut report = DissipativityReport {
        t,
        iota: gen.iota,
        trials,
        seed,
        max_ratio: f64::NEG_INFINITY,
        max_form: f64::NEG_INFINITY,
        max_projection: 0.0,
        pass: true,
    };
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let mut x = if trial % 4 == 3 {
            boundary_probe(&mut rng, &setup.ops, setup.n_delta)
        } else {
            random_probe(&mut rng, &setup.ops, &setup.mesh.nodes, setup.n_delta)
        };
        report.max_projection = report.max_projection.max(gen.project(&mut x));
        let ax = gen.apply(&x, false).expect("projected probe lies in the domain");
        let norm = gen.norm_sq(&x);
        let form = gen.inner(&ax, &x) - gen.iota * norm;
        report.max_form = report.max_form.max(form);
        if norm > 0.0 {
            report.max_ratio = report.max_ratio.max(form / norm);
        }
    }
    if trials == 0 {
        report.max_ratio = 0.0;
        report.max_form = 0.0;
    }
    report.pass = report.max_ratio <= TOL_DISSIPATIVITY;
    report
}

/// Transport weight `exp(-tau int_0^1 dd / (1 - d tau'))` of the continuous
/// problem: `e^{-tau}` for `tau' = 0`, `e^{(tau/tau') ln(1 - tau')}` otherwise.
pub fn continuous_outflow_weight(tau: f64, tau_prime: f64) -> f64 {
    if tau_prime.abs() < 1e-8 {
        // (1/tau') ln(1 - tau') = -1 - tau'/2 - tau'^2/3 - ...
        (-tau * (1.0 + tau_prime / 2.0 + tau_prime * tau_prime / 3.0)).exp()
    } else {
        (tau / tau_prime * (-tau_prime).ln_1p()).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSolution {
    pub x: GenState,
    /// Discrete outflow weight `w_N = rho v_N + eta`.
    pub rho: f64,
    pub rho_continuous: f64,
    /// `|mu1 v_N + mu2 w_N + phi + beta u_N|` with `phi` recovered from the
    /// last row of the velocity equation.
    pub boundary_identity: f64,
    /// `||(I - A) U - G||_t / max(||G||_t, ||U||_t)`
    pub residual: f64,
}

/// Solves `(I - A(t)) U = G`. `G.w[0]` is ignored (the image of a domain
/// element carries `v_N` there) and `G.phi` is unused.
pub fn resolvent_solve(setup: &Setup, t: f64, g: &GenState) -> Result<ResolventSolution> {
    let gen = DiscreteGenerator::new(t, &setup.delay, &setup.ops, &setup.gains);
    let ops = &setup.ops;
    let gains = &setup.gains;
    let n = ops.last();
    let nd = g.w.len() - 1;
    let a1 = ops.a_of_1;
    let h = 1.0 / nd as f64;

    // w_i = (h_i + lambda_i w_{i-1}) / (1 + lambda_i), split as rho w_0 + eta
    let (mut rho, mut eta) = (1.0, 0.0);
    for i in 1..=nd {
        let lambda = (1.0 - i as f64 * h * gen.tau_prime) / (gen.tau * h);
        rho = lambda * rho / (1.0 + lambda);
        eta = (g.w[i] + lambda * eta) / (1.0 + lambda);
    }

    let mut system = ops.stiffness.clone();
    system.diag.iter_mut().zip(&ops.mass).for_each(|(d, m)| *d += m);
    let weight = gains.mu1 + gains.mu2 * rho + gains.beta;
    system.diag[n] += a1 * weight;
    let mut u: Vec<f64> = (0..=n).map(|j| ops.mass[j] * (g.u[j] + g.v[j])).collect();
    u[n] += a1 * ((gains.mu1 + gains.mu2 * rho) * g.u[n] - gains.mu2 * eta);
    solve_from(&system, ops.first_free(), &mut u)?;
    ops.constrain(&mut u);

    let mut v: Vec<f64> = u.iter().zip(&g.u).map(|(a, b)| a - b).collect();
    ops.constrain(&mut v);
    let mut w = vec![0.0; nd + 1];
    w[0] = v[n];
    for i in 1..=nd {
        let lambda = (1.0 - i as f64 * h * gen.tau_prime) / (gen.tau * h);
        w[i] = (g.w[i] + lambda * w[i - 1]) / (1.0 + lambda);
    }
    let mut ku = vec![0.0; n + 1];
    ops.stiffness.apply(&u, &mut ku);
    let phi = (ops.mass[n] * (v[n] - g.v[n]) + ku[n]) / a1;
    let x = GenState { u, v, w, phi };

    let boundary_identity = gen.constraint_residuals(&x)[1].abs();
    let ax = gen.apply(&x, true)?;
    let mut r = GenState::zeros(n + 1, nd);
    for j in 0..=n {
        r.u[j] = x.u[j] - ax.u[j] - g.u[j];
        r.v[j] = x.v[j] - ax.v[j] - g.v[j];
    }
    ops.constrain(&mut r.u);
    ops.constrain(&mut r.v);
    for i in 1..=nd {
        r.w[i] = x.w[i] - ax.w[i] - g.w[i];
    }
    let scale = gen.norm_sq(g).max(gen.norm_sq(&x)).sqrt();
    let residual = if scale > 0.0 { gen.norm_sq(&r).sqrt() / scale } else { gen.norm_sq(&r).sqrt() };

    Ok(ResolventSolution {
        x,
        rho,
        rho_continuous: continuous_outflow_weight(gen.tau, gen.tau_prime),
        boundary_identity,
        residual,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolventReport {
    pub t: f64,
    pub trials: usize,
    pub seed: u64,
    pub max_residual: f64,
    pub max_boundary_identity: f64,
    pub rho_discrete: f64,
    pub rho_continuous: f64,
    pub pass: bool,
}

pub const TOL_RESOLVENT: f64 = 1e-8;

pub fn resolvent_probe(setup: &Setup, t: f64, trials: usize, seed: u64) -> Result<ResolventReport> {
    let mut report = ResolventReport {
        t,
        trials,
        seed,
        max_residual: 0.0,
        max_boundary_identity: 0.0,
        rho_discrete: f64::NAN,
        rho_continuous: f64::NAN,
        pass: true,
    };
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let g = random_probe(&mut rng, &setup.ops, &setup.mesh.nodes, setup.n_delta);
        let sol = resolvent_solve(setup, t, &g)?;
        report.max_residual = report.max_residual.max(sol.residual);
        // identity scaled by the size of the boundary data
        let n = setup.ops.last();
        let scale = 1.0f64.max(sol.x.v[n].abs()).max(sol.x.phi.abs()).max(sol.x.u[n].abs());
        report.max_boundary_identity = report.max_boundary_identity.max(sol.boundary_identity / scale);
        report.rho_discrete = sol.rho;
        report.rho_continuous = sol.rho_continuous;
    }
    report.pass = report.max_residual <= TOL_RESOLVENT && report.max_boundary_identity <= TOL_RESOLVENT;
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormRatioReport {
    pub t: f64,
    pub s: f64,
    pub trials: usize,
    pub max_ratio: f64,
    /// `e^{(d / (2 tau0)) |t - s|}`, the stated bound.
    pub bound: f64,
    /// `e^{(d / tau0) |t - s|}`, the weaker exponent used in its proof.
    pub bound_proof_exponent: f64,
    pub excess: f64,
    pub pass: bool,
}

pub const TOL_NORM_RATIO: f64 = 1e-12;

pub fn norm_ratio_bound(setup: &Setup, t: f64, s: f64, trials: usize, seed: u64) -> NormRatioReport {
    let (tau_t, tau_s) = (setup.delay.tau(t), setup.delay.tau(s));
    let mut max_ratio = 0.0f64;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let x = random_probe(&mut rng, &setup.ops, &setup.mesh.nodes, setup.n_delta);
        let nt = inner_with_tau(&setup.ops, &setup.gains, tau_t, &x, &x);
        let ns = inner_with_tau(&setup.ops, &setup.gains, tau_s, &x, &x);
        if ns > 0.0 {
            max_ratio = max_ratio.max((nt / ns).sqrt());
        }
    }
    let rate = setup.delay.d / setup.delay.tau0 * (t - s).abs();
    let bound = (0.5 * rate).exp();
    let excess = (max_ratio - bound).max(0.0);
    NormRatioReport {
        t,
        s,
        trials,
        max_ratio,
        bound,
        bound_proof_exponent: rate.exp(),
        excess,
        pass: excess <= TOL_NORM_RATIO,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeReport {
    pub t: f64,
    pub steps: Vec<f64>,
    /// Estimated `||(A(t+h) - A(t)) / h||` from the graph norm to `||.||_t`.
    pub norms: Vec<f64>,
    pub finite: bool,
    /// No growth by more than a factor 2 from one step to the next smaller.
    pub bounded: bool,
}

pub fn derivative_bound(setup: &Setup, t: f64, trials: usize, seed: u64) -> DerivativeReport {
    let steps = vec![1e-2, 1e-3, 1e-4];
    let gen = DiscreteGenerator::new(t, &setup.delay, &setup.ops, &setup.gains);
    let probes: Vec<GenState> = (0..trials)
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let mut x = random_probe(&mut rng, &setup.ops, &setup.mesh.nodes, setup.n_delta);
            gen.project(&mut x);
            x
        })
        .collect();
    let norms: Vec<f64> = steps
        .iter()
        .map(|&h| {
            let later = DiscreteGenerator::new(t + h, &setup.delay, &setup.ops, &setup.gains);
            probes
                .iter()
                .map(|x| {
                    let a0 = gen.apply(x, false).expect("projected");
                    let a1 = later.apply(x, false).expect("projected");
                    let mut d = GenState::zeros(x.u.len(), setup.n_delta);
                    for i in 0..x.w.len() {
                        d.w[i] = (a1.w[i] - a0.w[i]) / h;
                    }
                    d.w[0] = 0.0;
                    let graph = (gen.norm_sq(x).sqrt() + gen.norm_sq(&a0).sqrt()).max(f64::MIN_POSITIVE);
                    gen.norm_sq(&d).sqrt() / graph
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let finite = norms.iter().all(|x| x.is_finite());
    let bounded = finite && norms.windows(2).all(|w| w[1] <= 2.0 * w[0] + 1e-12);
    DerivativeReport { t, steps, norms, finite, bounded }
}

/// `min{tau0, 1} ||U||_H^2 <= ||U||_t^2 <= max{tau1, 1} ||U||_H^2`, with
/// `||.||_H` the `tau = 1` norm. Returns the worst violation.
pub fn norm_equivalence_violation(setup: &Setup, t: f64, trials: usize, seed: u64) -> f64 {
    let tau = setup.delay.tau(t);
    let (lo, hi) = (setup.delay.tau0.min(1.0), setup.delay.tau1.max(1.0));
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let x = random_probe(&mut rng, &setup.ops, &setup.mesh.nodes, setup.n_delta);
        let nt = inner_with_tau(&setup.ops, &setup.gains, tau, &x, &x);
        let nh = inner_with_tau(&setup.ops, &setup.gains, 1.0, &x, &x);
        worst = worst.max(lo * nh - nt).max(nt - hi * nh);
    }
    worst
}

/// Channel profile of a generator state, for energy evaluation.
pub fn channel_of(x: &GenState) -> TransportChannel {
    TransportChannel { w: x.w.clone() }
}
