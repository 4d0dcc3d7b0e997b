//! Energy, Lyapunov functional and the constants that tie them together.

use serde::Serialize;

use crate::delay_channel::TransportChannel;
use crate::error::{Error, Result};
use crate::mesh::{DiscreteOperators, Mesh};
use crate::model::{coefficient_constants, feedback_margins, CoefficientSpec, DelaySpec, GainSet, StructuralConstants};
use crate::stepper::SimState;

/// Perturbation size and the comparison constants of the Lyapunov functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovParams {
    pub epsilon: f64,
    #[serde(rename = "C4")]
    pub c4: f64,
    #[serde(rename = "C5")]
    pub c5: f64,
    /// Only its sign matters: nonnegative means the trace terms stay damped.
    #[serde(rename = "C6")]
    pub c6: f64,
    #[serde(rename = "C7")]
    pub c7: f64,
    pub eps_sandwich: f64,
    pub eps_damping: f64,
    /// `max{1 + mu_a/4, 1/a(1) + mu_a C_a'/4, mu_a/(2 beta a(1))}`
    pub sandwich_max: f64,
    pub mu_a: f64,
}

/// `(u_x)_e` on every element.
fn element_slopes<'a>(u: &'a [f64], mesh: &'a Mesh) -> impl Iterator<Item = f64> + 'a {
    u.windows(2).zip(mesh.widths()).map(|(p, h)| (p[1] - p[0]) / h)
}

/// Energy from its pieces, with `tau = tau(t)`.
pub fn energy_of(
    u: &[f64],
    v: &[f64],
    channel: &TransportChannel,
    tau: f64,
    ops: &DiscreteOperators,
    gains: &GainSet,
) -> f64 {
    let a1 = ops.a_of_1;
    let un = u[ops.last()];
    0.5 * (ops.mass_form(v, v)
        + ops.stiffness.quad_form(u)
        + gains.beta * a1 * un * un
        + gains.mu1 * a1 * tau * channel.square_integral())
}

pub fn energy(state: &SimState, ops: &DiscreteOperators, gains: &GainSet, delay: &DelaySpec) -> f64 {
    energy_of(&state.u, &state.v, &state.channel, delay.tau(state.t), ops, gains)
}

/// The bracket multiplied by `epsilon` in the Lyapunov functional.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_perturbation(
    u: &[f64],
    v: &[f64],
    channel: &TransportChannel,
    tau: f64,
    mesh: &Mesh,
    ops: &DiscreteOperators,
    mu_a: f64,
    gains: &GainSet,
) -> f64 {
    let multiplier: f64 = element_slopes(u, mesh)
        .zip(mesh.midpoints().zip(mesh.widths()))
        .zip(v.windows(2))
        .map(|((ux, (xm, h)), vv)| h * 2.0 * xm * ux * 0.5 * (vv[0] + vv[1]))
        .sum();
    let lower = 0.5 * mu_a * ops.mass_form(u, v);
    let delayed = gains.mu1 * ops.a_of_1 * tau * channel.weighted_square_integral(|d| (-2.0 * d * tau).exp());
    multiplier + lower + delayed
}

pub fn lyapunov(
    state: &SimState,
    mesh: &Mesh,
    ops: &DiscreteOperators,
    gains: &GainSet,
    delay: &DelaySpec,
    params: &LyapunovParams,
) -> f64 {
    let tau = delay.tau(state.t);
    energy_of(&state.u, &state.v, &state.channel, tau, ops, gains)
        + params.epsilon * lyapunov_perturbation(&state.u, &state.v, &state.channel, tau, mesh, ops, params.mu_a, gains)
}

/// `C7 = beta (beta - mu_a + 1) + (2 beta - mu_a/2)^2`
pub fn c7(mu_a: f64, beta: f64) -> f64 {
    beta * (beta - mu_a + 1.0) + (2.0 * beta - mu_a / 2.0).powi(2)
}

fn sandwich_max(spec: &CoefficientSpec, beta: f64) -> f64 {
    let a1 = spec.a_of_1;
    let mu_a = spec.mu_a;
    let c_a_prime = coefficient_constants(spec, beta).c_a_prime;
    (1.0 + mu_a / 4.0).max(1.0 / a1 + mu_a * c_a_prime / 4.0).max(mu_a / (2.0 * beta * a1))
}

fn params_with(spec: &CoefficientSpec, gains: &GainSet, c3: f64, eps_damping: f64, epsilon: f64) -> LyapunovParams {
    let a1 = spec.a_of_1;
    let q = sandwich_max(spec, gains.beta);
    let current = c3 * a1 - epsilon * (1.0 + 2.5 * a1 * gains.mu1 * gains.mu1 + gains.mu1 * a1);
    let delayed = c3 * a1 - epsilon * 2.5 * a1 * gains.mu2 * gains.mu2;
    LyapunovParams {
        epsilon,
        c4: 1.0 - 2.0 * epsilon * q,
        c5: 1.0 + 2.0 * epsilon * q,
        c6: current.min(delayed),
        c7: c7(spec.mu_a, gains.beta),
        eps_sandwich: 1.0 / (4.0 * q),
        eps_damping,
        sandwich_max: q,
        mu_a: spec.mu_a,
    }
}

/// `epsilon = min(eps_sandwich, eps_damping)`: the first forces `C4 = 1/2`,
/// the second is the largest value keeping both trace coefficients damped.
pub fn choose_epsilon(spec: &CoefficientSpec, gains: &GainSet, delay: &DelaySpec) -> Result<LyapunovParams> {
    let c3 = feedback_margins(gains, delay).c3;
    if !(c3 > 0.0) {
        return Err(Error::NoStrictDamping { c3 });
    }
    let a1 = spec.a_of_1;
    let eps_damping =
        c3 * a1 / (1.0 + 2.5 * a1 * gains.mu1 * gains.mu1 + gains.mu1 * a1).max(2.5 * a1 * gains.mu2 * gains.mu2);
    let eps_sandwich = 1.0 / (4.0 * sandwich_max(spec, gains.beta));
    Ok(params_with(spec, gains, c3, eps_damping, eps_sandwich.min(eps_damping)))
}

/// [`choose_epsilon`] when the gains are strictly damping, otherwise the
/// sandwich-only choice (with `eps_damping = 0` and a negative `C6`).
pub fn lyapunov_params_or_sandwich(spec: &CoefficientSpec, gains: &GainSet, delay: &DelaySpec) -> LyapunovParams {
    choose_epsilon(spec, gains, delay).unwrap_or_else(|_| {
        let c3 = feedback_margins(gains, delay).c3;
        let eps = 1.0 / (4.0 * sandwich_max(spec, gains.beta));
        params_with(spec, gains, c3, 0.0, eps)
    })
}

/// Decay constant `M~` of the certified envelope `E(t) <= E(0) e^{1 - t/M~}`.
pub fn m_tilde(params: &LyapunovParams, constants: &StructuralConstants, beta: f64, tau1: f64) -> f64 {
    let eps = params.epsilon;
    let c3 = constants.c3;
    let c7 = params.c7;
    let m = (2.0 - params.mu_a).min((-2.0 * tau1).exp());
    let k = c7 * c7 * (1.0 + 2.0 / beta.powi(3)) / m;
    2.0 / (eps * m)
        * (params.c5
            + eps * k / (beta * constants.alpha_a * c3)
            + 2.0 * eps * c7 / (beta * constants.alpha_a.sqrt())
            + k * eps / c3)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;
    use crate::model::{make_coefficient, make_delay, CoefficientKind, DelayKind};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn power(alpha: f64) -> CoefficientSpec {
        make_coefficient(CoefficientKind::Power { alpha }).unwrap()
    }

    fn constant_delay(tau: f64) -> DelaySpec {
        make_delay(DelayKind::Constant { tau }).unwrap()
    }

    #[test]
    fn sandwich_epsilon_for_nondegenerate_unit_case() {
        let gains = GainSet::new(10.0, 0.0, 1.0).unwrap();
        let p = lyapunov_params_or_sandwich(&power(0.0), &gains, &constant_delay(1.0));
        assert_eq!(p.sandwich_max, 1.0);
        assert_eq!(p.eps_sandwich, 0.25);
        let s = params_with(&power(0.0), &gains, 1.0, 1.0, p.eps_sandwich);
        assert_eq!((s.c4, s.c5), (0.5, 1.5));
    }

    #[test]
    fn damping_epsilon_example() {
        let gains = GainSet::new(1.0, 0.0, 1.0).unwrap();
        let p = choose_epsilon(&power(0.0), &gains, &constant_delay(1.0)).unwrap();
        assert!((p.eps_damping - 1.0 / 9.0).abs() < 1e-15);
        assert_eq!(p.epsilon, p.eps_damping);
        assert!(p.c6.abs() < 1e-15);
    }

    #[test]
    fn no_strict_damping_is_an_error() {
        let gains = GainSet::new(1.0, 0.5, 1.0).unwrap();
        assert!(matches!(
            choose_epsilon(&power(0.5), &gains, &constant_delay(1.0)),
            Err(Error::NoStrictDamping { .. })
        ));
        let p = lyapunov_params_or_sandwich(&power(0.5), &gains, &constant_delay(1.0));
        assert!(p.c4 > 0.0 && p.c6 < 0.0);
    }

    #[test]
    fn baseline_constants() {
        let setup = RunConfig::scenario("baseline").unwrap().build().unwrap();
        let p = choose_epsilon(&setup.coefficient, &setup.gains, &setup.delay).unwrap();
        assert!((p.sandwich_max - 7.0 / 6.0).abs() < 1e-12);
        assert_eq!(p.c7, 4.5625);
        assert!(p.epsilon < p.eps_sandwich);
        let k = StructuralConstants::new(&setup.coefficient, &setup.gains, &setup.delay);
        let m = m_tilde(&p, &k, 1.0, 1.0);
        assert!(m > 2.5e4 && m < 3.5e4, "{m}");
    }

    #[test]
    fn zero_state_energies_vanish() {
        let setup = RunConfig::scenario("baseline").unwrap().build().unwrap();
        let (mut state, _) = crate::stepper::init_state(&setup).unwrap();
        state.v.iter_mut().for_each(|x| *x = 0.0);
        state.channel.w.iter_mut().for_each(|x| *x = 0.0);
        let p = choose_epsilon(&setup.coefficient, &setup.gains, &setup.delay).unwrap();
        assert_eq!(energy(&state, &setup.ops, &setup.gains, &setup.delay), 0.0);
        assert_eq!(lyapunov(&state, &setup.mesh, &setup.ops, &setup.gains, &setup.delay, &p), 0.0);
    }

    #[test]
    fn delay_term_alone() {
        let setup = RunConfig::scenario("baseline").unwrap().build().unwrap();
        let gains = GainSet { mu1: 1.0, mu2: 0.0, beta: 1.0 };
        let n = setup.ops.len();
        let channel = TransportChannel { w: vec![1.0; 33] };
        let e = energy_of(&vec![0.0; n], &vec![0.0; n], &channel, 0.8, &setup.ops, &gains);
        assert!((e - 0.4).abs() < 1e-15);
    }

    #[test]
    fn energy_is_sum_of_parts() {
        let setup = RunConfig::scenario("strong-degeneracy").unwrap().build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = setup.ops.len();
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let channel = TransportChannel { w: (0..65).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let parts = crate::mesh::weighted_norms(&u, &v, &setup.ops, setup.gains.beta).unwrap();
        let delay = setup.gains.mu1 * setup.ops.a_of_1 * 0.7 * channel.square_integral();
        let e = energy_of(&u, &v, &channel, 0.7, &setup.ops, &setup.gains);
        let sum = 0.5 * (parts.h1a_part + parts.l2_part + parts.boundary_part + delay);
        assert!((e - sum).abs() <= 1e-14 * e);
    }

    proptest! {
        #[test]
        fn sandwich_on_random_states(alpha in 0.0f64..1.95, seed in 0u64..10_000, smooth in proptest::bool::ANY) {
            let spec = power(alpha);
            let gains = GainSet::new(2.0, 0.2, 1.0).unwrap();
            let delay = constant_delay(0.8);
            let p = lyapunov_params_or_sandwich(&spec, &gains, &delay);
            let mesh = crate::mesh::build_mesh(64, crate::mesh::default_gamma(spec.mu_a)).unwrap();
            let ops = crate::mesh::assemble_operators(&spec, &mesh, spec.bc_kind()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draw = |len: usize| -> Vec<f64> {
                if smooth {
                    let c: [f64; 3] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
                    (0..len).map(|i| {
                        let x = i as f64 / (len - 1) as f64;
                        c[0] * x + c[1] * (3.0 * x).sin() + c[2] * (7.0 * x).sin()
                    }).collect()
                } else {
                    (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
                }
            };
            let mut u = draw(65);
            let mut v = draw(65);
            ops.constrain(&mut u);
            ops.constrain(&mut v);
            let channel = TransportChannel { w: draw(17) };
            let e = energy_of(&u, &v, &channel, 0.8, &ops, &gains);
            let lt = e + p.epsilon * lyapunov_perturbation(&u, &v, &channel, 0.8, &mesh, &ops, spec.mu_a, &gains);
            prop_assert!(p.c4 * e <= lt && lt <= p.c5 * e, "{} {} {}", p.c4 * e, lt, p.c5 * e);
        }
    }
}
