//! Time stepping of the closed loop: P1 wave interior, delayed boundary
//! feedback at `x = 1`, and the transport channel alongside a raw history.

use serde::Serialize;

use crate::analysis::functionals::{energy, lyapunov, lyapunov_params_or_sandwich, LyapunovParams};
use crate::config::{RunConfig, Setup};
use crate::delay_channel::{init_channel, HistoryBuffer, TransportChannel};
use crate::error::{Error, Result};
use crate::model::{BcKind, CoefficientSpec};
use crate::tridiag::{SymTridiag, TridiagFactor};

/// Displacement and velocity presets for `(u0, u1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Zero,
    /// `u0 = x`, `u1 = 0`
    Ramp,
    /// `u0 = sin(pi x) x^max(0, 1 - mu_a)`, `u1 = 0`
    SineBump,
    /// `u0 = 0`, `u1` a smooth bump supported in `[0.55, 0.95]`
    VelocityKick,
}

impl Preset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(Preset::Zero),
            "ramp" => Ok(Preset::Ramp),
            "sine-bump" | "bump" => Ok(Preset::SineBump),
            "velocity-kick" => Ok(Preset::VelocityKick),
            other => Err(Error::ConfigParse(format!("unknown initial preset '{other}'"))),
        }
    }

    pub fn u0(self, x: f64, mu_a: f64) -> f64 {
        match self {
            Preset::Zero | Preset::VelocityKick => 0.0,
            Preset::Ramp => x,
            Preset::SineBump => (std::f64::consts::PI * x).sin() * x.powf((1.0 - mu_a).max(0.0)),
        }
    }

    pub fn u1(self, x: f64) -> f64 {
        match self {
            Preset::VelocityKick => {
                let r = (x - 0.75).abs() / 0.2;
                if r < 1.0 {
                    (1.0 - 1.0 / (1.0 - r * r)).exp()
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }
}

/// Past boundary velocity `f0(s)` for `s` in `[-tau(0), 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryPreset {
    Zero,
    Constant,
    /// Raised cosine `amp (1 - cos(2 pi s / tau(0))) / 2`, zero at `s = 0`.
    Cosine,
    /// `amp sin^4(pi s / tau(0))`, flat to third order at both ends of
    /// `[-tau(0), 0]` so the trace joins it smoothly.
    Pulse,
}

impl HistoryPreset {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "zero" => Ok(HistoryPreset::Zero),
            "constant" => Ok(HistoryPreset::Constant),
            "cosine" => Ok(HistoryPreset::Cosine),
            "pulse" => Ok(HistoryPreset::Pulse),
            other => Err(Error::ConfigParse(format!("unknown history preset '{other}'"))),
        }
    }

    pub fn eval(self, s: f64, amp: f64, tau_at_0: f64) -> f64 {
        match self {
            HistoryPreset::Zero => 0.0,
            HistoryPreset::Constant => amp,
            HistoryPreset::Cosine => amp * 0.5 * (1.0 - (2.0 * std::f64::consts::PI * s / tau_at_0).cos()),
            HistoryPreset::Pulse => amp * (std::f64::consts::PI * s / tau_at_0).sin().powi(4),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialData {
    pub preset: Preset,
    pub f0: HistoryPreset,
    pub f0_amp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub channel: TransportChannel,
    pub buffer: HistoryBuffer,
}

impl SimState {
    pub fn trace_v(&self) -> f64 {
        self.v[self.v.len() - 1]
    }

    fn max_abs(&self) -> f64 {
        self.u.iter().chain(&self.v).chain(&self.channel.w).fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// One recorded row of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergySample {
    pub t: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "E_tilde")]
    pub e_tilde: f64,
    pub trace_v: f64,
    /// `u_t(t - tau(t), 1)` read from the history buffer.
    pub trace_v_delayed: f64,
    /// `w(1, t)`, the same trace as carried by the transport channel.
    pub channel_outflow: f64,
    pub bc_residual: f64,
    pub channel_discrepancy: f64,
}

/// Copy of the state at a recorded sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<EnergySample>,
    pub final_state: SimState,
    pub snapshots: Vec<Snapshot>,
    pub warnings: Vec<String>,
    pub params: LyapunovParams,
    /// Smallest `C` with `bc_residual <= C (dt + 1/N)` at every sample.
    pub bc_residual_constant: f64,
    pub dt: f64,
    /// Fingerprint of the originating config, empty when run from a bare setup.
    pub fingerprint: String,
}

/// Samples `(u0, u1)` on the mesh and `f0` into channel and history.
/// `f0(0)` is overridden by `u1(1)` in the channel inflow and in the
/// history at `t = 0`; a mismatch is reported as a warning.
pub fn init_state_from(
    setup: &Setup,
    u0: impl Fn(f64) -> f64,
    u1: impl Fn(f64) -> f64,
    f0: impl Fn(f64) -> f64,
) -> Result<(SimState, Vec<String>)> {
    let mut warnings = Vec::new();
    if setup.ops.bc_kind == BcKind::DirichletLeft {
        let left = u0(0.0);
        if left.abs() > 1e-12 {
            return Err(Error::IncompatibleInitialData { value: left });
        }
    }
    let mut u = setup.mesh.sample(&u0);
    let mut v = setup.mesh.sample(&u1);
    setup.ops.constrain(&mut u);
    setup.ops.constrain(&mut v);
    let vn = v[v.len() - 1];

    let tau_at_0 = setup.delay.tau(0.0);
    let f0_at_0 = f0(0.0);
    if (f0_at_0 - vn).abs() > 1e-12 {
        warnings.push(format!(
            "initial history f0(0) = {f0_at_0:e} differs from u1(1) = {vn:e}; the channel inflow uses u1(1)"
        ));
    }
    let mut channel = init_channel(&f0, tau_at_0, setup.n_delta)?;
    channel.w[0] = vn;

    let mut buffer = HistoryBuffer::new(setup.delay.tau1 + 2.0 * setup.dt);
    let seeds = (tau_at_0 / setup.dt).ceil() as usize;
    for k in (1..=seeds).rev() {
        let s = -(k as f64) * setup.dt;
        buffer.push(s, f0(s))?;
    }
    buffer.push(0.0, vn)?;

    Ok((SimState { t: 0.0, u, v, channel, buffer }, warnings))
}

/// Initial state from the configured presets.
pub fn init_state(setup: &Setup) -> Result<(SimState, Vec<String>)> {
    let init = setup.initial;
    let mu_a = setup.coefficient.mu_a;
    let tau_at_0 = setup.delay.tau(0.0);
    init_state_from(
        setup,
        |x| init.preset.u0(x, mu_a),
        |x| init.preset.u1(x),
        |s| init.f0.eval(s, init.f0_amp, tau_at_0),
    )
}

/// Advances a [`SimState`] by fixed steps of size `dt`.
///
/// Per step, the midpoint velocity `vb = (v + v')/2` solves
/// `[(2/dt) M + (dt/2) K + a(1)(mu1 + beta dt/2) e_N e_N^T] vb
///   = (2/dt) M v - K u - a(1)(mu2 w_del + beta u_N) e_N`
/// with `w_del` the history at `t_mid - tau(t_mid)`. Then `v' = 2 vb - v`,
/// `u' = u + dt vb`. The channel is advanced with inflow `vb_N` and its
/// inflow node is then reset to `v'_N`.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub setup: Setup,
    factor: TridiagFactor,
    steps_taken: u64,
    rhs: Vec<f64>,
    ku: Vec<f64>,
}

impl Stepper {
    pub fn new(setup: Setup) -> Result<Self> {
        let dt = setup.dt;
        let ops = &setup.ops;
        let n = ops.len();
        let mut lhs = SymTridiag::zeros(n);
        for i in 0..n {
            lhs.diag[i] = 2.0 / dt * ops.mass[i] + 0.5 * dt * ops.stiffness.diag[i];
        }
        for i in 0..n - 1 {
            lhs.off[i] = 0.5 * dt * ops.stiffness.off[i];
        }
        lhs.diag[n - 1] += ops.a_of_1 * (setup.gains.mu1 + 0.5 * dt * setup.gains.beta);
        let factor = TridiagFactor::new(&lhs, ops.first_free())?;
        Ok(Stepper { setup, factor, steps_taken: 0, rhs: vec![0.0; n], ku: vec![0.0; n] })
    }

    pub fn time_of(&self, steps: u64) -> f64 {
        steps as f64 * self.setup.dt
    }

    pub fn step(&mut self, state: &mut SimState) -> Result<()> {
        let Setup { ref ops, ref gains, ref delay, dt, .. } = self.setup;
        let n = ops.last();
        let a1 = ops.a_of_1;
        let t0 = self.time_of(self.steps_taken);
        let t1 = self.time_of(self.steps_taken + 1);
        let t_mid = 0.5 * (t0 + t1);
        let w_del = if gains.mu2 != 0.0 { state.buffer.sample(t_mid - delay.tau(t_mid))? } else { 0.0 };

        ops.stiffness.apply(&state.u, &mut self.ku);
        for i in 0..=n {
            self.rhs[i] = 2.0 / dt * ops.mass[i] * state.v[i] - self.ku[i];
        }
        self.rhs[n] -= a1 * (gains.mu2 * w_del + gains.beta * state.u[n]);
        self.factor.solve(&mut self.rhs)?;
        ops.constrain(&mut self.rhs);
        let vb = &self.rhs;
        for ((u, v), &w) in state.u.iter_mut().zip(state.v.iter_mut()).zip(vb) {
            *u += dt * w;
            *v = 2.0 * w - *v;
        }

        let (tau0, tau1) = (delay.tau(t0), delay.tau(t1));
        state.channel.transport_step(tau1, (tau1 - tau0) / dt, dt, vb[n]);
        state.channel.w[0] = state.v[n];
        state.buffer.push(t1, state.v[n])?;
        state.t = t1;
        self.steps_taken += 1;

        if self.steps_taken.is_multiple_of(64) && state.max_abs() < 1e-150 {
            // flush values that would otherwise drift into subnormals
            state.u.iter_mut().chain(state.v.iter_mut()).chain(state.channel.w.iter_mut()).for_each(|x| *x = 0.0);
            state.buffer.clear_values();
        }
        if !state.u[n].is_finite() || !state.v[n].is_finite() {
            return Err(Error::SolveFailure(format!("non-finite state at t = {t1}")));
        }
        Ok(())
    }

    /// Energy row for the current state.
    pub fn sample(&self, state: &SimState, params: &LyapunovParams) -> Result<EnergySample> {
        let Setup { ref ops, ref gains, ref delay, ref mesh, .. } = self.setup;
        let n = ops.last();
        let t = state.t;
        let w_del = state.buffer.sample(t - delay.tau(t))?;
        let flux = (state.u[n] - state.u[n - 1]) / mesh.last_width();
        let vn = state.v[n];
        Ok(EnergySample {
            t,
            e: energy(state, ops, gains, delay),
            e_tilde: lyapunov(state, mesh, ops, gains, delay, params),
            trace_v: vn,
            trace_v_delayed: w_del,
            channel_outflow: state.channel.outflow(),
            bc_residual: (gains.mu1 * vn + gains.mu2 * w_del + flux + gains.beta * state.u[n]).abs(),
            channel_discrepancy: (state.channel.outflow() - w_del).abs(),
        })
    }
}

fn snapshot(state: &SimState) -> Snapshot {
    Snapshot { t: state.t, u: state.u.clone(), v: state.v.clone(), w: state.channel.w.clone() }
}

/// Runs a validated setup over its full horizon.
pub fn run(setup: &Setup) -> Result<Trajectory> {
    let (state, warnings) = init_state(setup)?;
    run_from(setup, state, warnings)
}

/// Builds and runs a config, tagging the trajectory with its fingerprint.
pub fn run_config(config: &RunConfig) -> Result<Trajectory> {
    let mut traj = run(&config.build()?)?;
    traj.fingerprint = config.fingerprint();
    Ok(traj)
}

pub fn run_from(setup: &Setup, mut state: SimState, warnings: Vec<String>) -> Result<Trajectory> {
    let params = lyapunov_params_or_sandwich(&setup.coefficient, &setup.gains, &setup.delay);
    let mut stepper = Stepper::new(setup.clone())?;
    let mut samples = Vec::with_capacity(setup.n_steps / setup.record_every + 2);
    let mut snapshots = Vec::new();
    samples.push(stepper.sample(&state, &params)?);
    if setup.snapshots {
        snapshots.push(snapshot(&state));
    }
    for k in 1..=setup.n_steps {
        stepper.step(&mut state)?;
        if k % setup.record_every == 0 || k == setup.n_steps {
            samples.push(stepper.sample(&state, &params)?);
            if setup.snapshots {
                snapshots.push(snapshot(&state));
            }
        }
    }
    let scale = setup.dt + 1.0 / setup.mesh.n as f64;
    let bc_residual_constant = samples.iter().map(|s| s.bc_residual / scale).fold(0.0, f64::max);
    Ok(Trajectory {
        samples,
        final_state: state,
        snapshots,
        warnings,
        params,
        bc_residual_constant,
        dt: setup.dt,
        fingerprint: String::new(),
    })
}

/// Coefficient regime string used in reports.
pub fn regime(spec: &CoefficientSpec) -> &'static str {
    if spec.is_strongly_degenerate() {
        "strong"
    } else {
        "weak"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup_with(overrides: &[&str]) -> Setup {
        let mut c = RunConfig::scenario("baseline").unwrap();
        for o in overrides {
            c.apply_override(o).unwrap();
        }
        c.build().unwrap()
    }

    #[test]
    fn zero_state_stays_zero() {
        let setup = setup_with(&["initial.preset=zero", "integrator.t_end=0.5"]);
        let traj = run(&setup).unwrap();
        assert!(traj.samples.iter().all(|s| s.e == 0.0 && s.bc_residual == 0.0 && s.e_tilde == 0.0));
        assert!(traj.final_state.u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_horizon_gives_single_sample() {
        let setup = setup_with(&["integrator.t_end=0"]);
        let traj = run(&setup).unwrap();
        assert_eq!(traj.samples.len(), 1);
        assert_eq!(traj.samples[0].t, 0.0);
    }

    #[test]
    fn ramp_energy_tends_to_five_sixths() {
        let setup = setup_with(&["initial.preset=ramp", "mesh.n=1024", "integrator.t_end=0"]);
        let traj = run(&setup).unwrap();
        assert!((traj.samples[0].e - 5.0 / 6.0).abs() < 1e-3, "{}", traj.samples[0].e);
    }

    #[test]
    fn history_energy_uses_channel_quadrature() {
        let setup = setup_with(&["initial.preset=sine-bump", "initial.f0=cosine", "integrator.t_end=0"]);
        let (state, warnings) = init_state(&setup).unwrap();
        assert!(warnings.is_empty());
        let tau = setup.delay.tau(0.0);
        let f0 = |s: f64| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * s / tau).cos());
        let nd = setup.n_delta;
        let quad: f64 = (1..=nd).map(|i| f0(-(i as f64) / nd as f64 * tau).powi(2)).sum::<f64>() / nd as f64;
        let ops = &setup.ops;
        let n = ops.last();
        let local = 0.5
            * (ops.mass_form(&state.v, &state.v)
                + ops.stiffness.quad_form(&state.u)
                + setup.gains.beta * ops.a_of_1 * state.u[n] * state.u[n]);
        let expected = local + 0.5 * setup.gains.mu1 * ops.a_of_1 * tau * quad;
        let e = energy(&state, ops, &setup.gains, &setup.delay);
        assert!((e - expected).abs() < 1e-14 * expected);
    }

    #[test]
    fn mismatched_history_warns_and_runs() {
        let setup = setup_with(&["initial.f0=constant", "integrator.t_end=0.1"]);
        let traj = run(&setup).unwrap();
        assert_eq!(traj.warnings.len(), 1);
        assert_eq!(traj.samples.len(), 101);
    }

    #[test]
    fn dirichlet_rejects_nonzero_left_value() {
        let setup = setup_with(&[]);
        let err = init_state_from(&setup, |_| 1.0, |_| 0.0, |_| 0.0).unwrap_err();
        assert!(matches!(err, Error::IncompatibleInitialData { .. }));
    }

    #[test]
    fn coupling_invariant_holds_every_step() {
        let setup = setup_with(&["integrator.t_end=0.3", "initial.f0=cosine"]);
        let (mut state, _) = init_state(&setup).unwrap();
        let mut stepper = Stepper::new(setup).unwrap();
        for _ in 0..300 {
            stepper.step(&mut state).unwrap();
            assert_eq!(state.channel.w[0], state.trace_v());
            assert_eq!(state.u[0], 0.0);
            assert_eq!(state.v[0], 0.0);
        }
    }

    #[test]
    fn pure_damping_is_monotone_with_unit_coefficient() {
        let setup = setup_with(&[
            "coefficient.alpha=0",
            "gains.mu2=0",
            "delay.kind=constant",
            "delay.tau=1",
            "initial.preset=sine-bump",
            "mesh.n=64",
            "integrator.dt=2e-3",
            "integrator.t_end=4",
        ]);
        let traj = run(&setup).unwrap();
        let e0 = traj.samples[0].e;
        for w in traj.samples.windows(2) {
            assert!(w[1].e <= w[0].e + 1e-10 * e0 + 1e-14, "{} -> {}", w[0].e, w[1].e);
        }
        assert!(traj.samples.last().unwrap().e < 0.5 * e0);
    }

    #[test]
    fn conservative_limit_nearly_conserves_energy() {
        let mut setup = setup_with(&["initial.preset=sine-bump", "integrator.t_end=10"]);
        setup.gains.mu1 = 0.0;
        setup.gains.mu2 = 0.0;
        let traj = run(&setup).unwrap();
        let e0 = traj.samples[0].e;
        let drift = traj.samples.iter().map(|s| (s.e - e0).abs()).fold(0.0, f64::max);
        assert!(drift < 1e-6 * e0, "drift {drift}");
    }

    #[test]
    fn midpoint_order_in_time() {
        let terminal = |dt: &str| {
            let setup = setup_with(&[
                "initial.preset=sine-bump",
                "mesh.n=64",
                &format!("integrator.dt={dt}"),
                "integrator.t_end=1",
                "gains.mu2=0",
            ]);
            run(&setup).unwrap().final_state
        };
        let (a, b, c) = (terminal("4e-3"), terminal("2e-3"), terminal("1e-3"));
        let diff = |x: &SimState, y: &SimState| x.u.iter().zip(&y.u).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let order = (diff(&a, &b) / diff(&b, &c)).log2();
        assert!(order >= 1.0, "observed order {order}");
    }

    #[test]
    fn boundary_residual_constant_is_reported() {
        let setup = setup_with(&["integrator.t_end=2"]);
        let traj = run(&setup).unwrap();
        let scale = setup.dt + 1.0 / setup.mesh.n as f64;
        assert!(traj.samples.iter().all(|s| s.bc_residual <= traj.bc_residual_constant * scale * (1.0 + 1e-12)));
        assert!(traj.bc_residual_constant.is_finite());
    }
}
