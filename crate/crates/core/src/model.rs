//! Coefficient and delay families, hypothesis validation, and the closed-form
//! structural constants used by the stability analysis.

use serde::Serialize;

use crate::error::{Error, Result};

/// Smooth positive factor multiplying a power law.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothFactor {
    /// `1 + x`
    OnePlusX,
    /// `exp(x)`
    ExpX,
}

impl SmoothFactor {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "one_plus_x" => Ok(SmoothFactor::OnePlusX),
            "exp_x" => Ok(SmoothFactor::ExpX),
            other => Err(Error::BadParameter(format!("unknown coefficient factor '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SmoothFactor::OnePlusX => "one_plus_x",
            SmoothFactor::ExpX => "exp_x",
        }
    }

    fn value(&self, x: f64) -> f64 {
        match self {
            SmoothFactor::OnePlusX => 1.0 + x,
            SmoothFactor::ExpX => x.exp(),
        }
    }

    /// `x f'(x) / f(x)`
    fn log_slope(&self, x: f64) -> f64 {
        match self {
            SmoothFactor::OnePlusX => x / (1.0 + x),
            SmoothFactor::ExpX => x,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientKind {
    /// `a(x) = x^alpha`
    Power { alpha: f64 },
    /// `a(x) = x^alpha f(x)`
    PowerTimesFactor { alpha: f64, factor: SmoothFactor },
    /// Positive samples on `0 < x_0 < ... < x_m = 1`, interpolated piecewise
    /// linearly in `(ln x, ln a)` and continued below `x_0` as the first
    /// segment's power law.
    Tabulated { xs: Vec<f64>, values: Vec<f64> },
}

impl CoefficientKind {
    pub fn name(&self) -> &'static str {
        match self {
            CoefficientKind::Power { .. } => "power",
            CoefficientKind::PowerTimesFactor { .. } => "power_times_factor",
            CoefficientKind::Tabulated { .. } => "tabulated",
        }
    }
}

/// A validated degenerate coefficient `a(x)` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientSpec {
    pub kind: CoefficientKind,
    pub a_of_1: f64,
    pub mu_a: f64,
}

/// Which condition is imposed at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    /// `u(t, 0) = 0`, weak degeneracy.
    DirichletLeft,
    /// `a(x) u_x -> 0`, strong degeneracy.
    NaturalLeft,
}

impl BcKind {
    pub fn name(&self) -> &'static str {
        match self {
            BcKind::DirichletLeft => "dirichlet_left",
            BcKind::NaturalLeft => "natural_left",
        }
    }
}

impl CoefficientSpec {
    /// Evaluates `a(x)` for `x` in `[0, 1]`.
    pub fn eval(&self, x: f64) -> f64 {
        match &self.kind {
            CoefficientKind::Power { alpha } => power(x, *alpha),
            CoefficientKind::PowerTimesFactor { alpha, factor } => power(x, *alpha) * factor.value(x),
            CoefficientKind::Tabulated { xs, values } => {
                if x <= 0.0 {
                    return 0.0;
                }
                let (k, slope) = table_segment(xs, values, x);
                values[k] * (x / xs[k]).powf(slope)
            }
        }
    }

    /// `x a'(x) / a(x)` on `(0, 1]`, from the closed form of each family.
    pub fn log_slope(&self, x: f64) -> f64 {
        match &self.kind {
            CoefficientKind::Power { alpha } => *alpha,
            CoefficientKind::PowerTimesFactor { alpha, factor } => alpha + factor.log_slope(x),
            CoefficientKind::Tabulated { xs, values } => table_segment(xs, values, x).1,
        }
    }

    /// `a'(x)` on `(0, 1]`.
    pub fn derivative(&self, x: f64) -> f64 {
        self.log_slope(x) * self.eval(x) / x
    }

    pub fn is_strongly_degenerate(&self) -> bool {
        self.mu_a >= 1.0
    }

    /// The left boundary condition dictated by the degeneracy regime.
    pub fn bc_kind(&self) -> BcKind {
        if self.mu_a < 1.0 {
            BcKind::DirichletLeft
        } else {
            BcKind::NaturalLeft
        }
    }

    /// Power exponent when the family has one.
    pub fn alpha(&self) -> Option<f64> {
        match &self.kind {
            CoefficientKind::Power { alpha } | CoefficientKind::PowerTimesFactor { alpha, .. } => Some(*alpha),
            CoefficientKind::Tabulated { .. } => None,
        }
    }
}

fn power(x: f64, alpha: f64) -> f64 {
    if alpha == 0.0 {
        1.0
    } else if x <= 0.0 {
        0.0
    } else {
        x.powf(alpha)
    }
}

/// Segment index and log-log slope used at `x`.
fn table_segment(xs: &[f64], values: &[f64], x: f64) -> (usize, f64) {
    let m = xs.len() - 1;
    let k = xs.partition_point(|&xk| xk <= x).saturating_sub(1).min(m - 1);
    let slope = (values[k + 1] / values[k]).ln() / (xs[k + 1] / xs[k]).ln();
    (k, slope)
}

/// Builds and validates a coefficient against the degeneracy hypotheses.
pub fn make_coefficient(kind: CoefficientKind) -> Result<CoefficientSpec> {
    match &kind {
        CoefficientKind::Power { alpha } | CoefficientKind::PowerTimesFactor { alpha, .. } => {
            if !alpha.is_finite() || *alpha < 0.0 {
                return Err(Error::BadParameter(format!("power exponent must be >= 0, got {alpha}")));
            }
        }
        CoefficientKind::Tabulated { xs, values } => validate_table(xs, values)?,
    }
    let mut spec = CoefficientSpec { kind, a_of_1: 0.0, mu_a: 0.0 };
    spec.a_of_1 = spec.eval(1.0);

    for x in positivity_samples() {
        let value = spec.eval(x);
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositive { x, value });
        }
    }
    // a table degenerates at 0 only if its power-law continuation does
    if let CoefficientKind::Tabulated { xs, values } = &spec.kind {
        if table_segment(xs, values, xs[0]).1 <= 0.0 {
            return Err(Error::NotDegenerateAtOrigin { value: values[0] });
        }
    }
    // alpha = 0 is the non-degenerate limit a(0) > 0, kept for reference runs.
    let a0 = spec.eval(0.0);
    if a0 != 0.0 && spec.alpha() != Some(0.0) {
        return Err(Error::NotDegenerateAtOrigin { value: a0 });
    }

    spec.mu_a = match &spec.kind {
        CoefficientKind::Power { alpha } => *alpha,
        CoefficientKind::Tabulated { xs, values } => (0..xs.len() - 1)
            .map(|k| ((values[k + 1] / values[k]).ln() / (xs[k + 1] / xs[k]).ln()).abs())
            .fold(0.0, f64::max),
        CoefficientKind::PowerTimesFactor { .. } => degeneracy_mu_a(&spec, 4096)?,
    };
    if spec.mu_a >= 2.0 {
        return Err(Error::DegeneracyOutOfRange { mu_a: spec.mu_a });
    }
    Ok(spec)
}

fn validate_table(xs: &[f64], values: &[f64]) -> Result<()> {
    if xs.len() != values.len() || xs.len() < 2 {
        return Err(Error::BadParameter("tabulated coefficient needs >= 2 matching (x, a) samples".into()));
    }
    if xs[0] <= 0.0 || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::BadParameter("tabulated x must be strictly increasing in (0, 1]".into()));
    }
    if (xs[xs.len() - 1] - 1.0).abs() > 1e-14 {
        return Err(Error::BadParameter("tabulated x must end at 1".into()));
    }
    if let Some((x, value)) = xs.iter().zip(values).find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositive { x: *x, value: *value });
    }
    Ok(())
}

fn positivity_samples() -> impl Iterator<Item = f64> {
    let geometric = (0..200).map(|j| 10f64.powf(-12.0 * j as f64 / 199.0));
    let uniform = (1..=200).map(|j| j as f64 / 200.0);
    geometric.chain(uniform)
}

/// Sup of `x |a'(x)| / a(x)` over the geometric sample `x_j = r^j`, `j = 0..n`,
/// spanning `[1e-12, 1]`. Tabulated nodes are included so that no segment is
/// skipped.
pub fn degeneracy_mu_a(spec: &CoefficientSpec, n_samples: usize) -> Result<f64> {
    if n_samples < 100 {
        return Err(Error::BadParameter(format!("need at least 100 samples, got {n_samples}")));
    }
    let ratio = 1e-12f64.powf(1.0 / (n_samples - 1) as f64);
    let mut sup = 0.0f64;
    let mut probe = |x: f64| -> Result<()> {
        let a = spec.eval(x);
        if !(a > 0.0) {
            return Err(Error::NonPositive { x, value: a });
        }
        sup = sup.max(spec.log_slope(x).abs());
        Ok(())
    };
    let mut x = 1.0;
    for _ in 0..n_samples {
        probe(x)?;
        x *= ratio;
    }
    if let CoefficientKind::Tabulated { xs, .. } = &spec.kind {
        for &node in xs {
            probe(node)?;
        }
    }
    Ok(sup)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelayKind {
    Constant {
        tau: f64,
    },
    /// `tau(t) = tau1 - (tau1 - tau0) exp(-k t)`
    SaturatingExponential {
        tau0: f64,
        tau1: f64,
        k: f64,
    },
    /// `tau0` until `t_start`, then a cubic smoothstep to `tau1` over `ramp`.
    PiecewiseSmooth {
        tau0: f64,
        tau1: f64,
        t_start: f64,
        ramp: f64,
    },
}

/// A validated time-varying delay with bounds `tau0 <= tau <= tau1` and
/// `0 <= tau' <= d < 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelaySpec {
    pub kind: DelayKind,
    pub tau0: f64,
    pub tau1: f64,
    pub d: f64,
}

impl DelaySpec {
    pub fn tau(&self, t: f64) -> f64 {
        match self.kind {
            DelayKind::Constant { tau } => tau,
            DelayKind::SaturatingExponential { tau0, tau1, k } => tau1 - (tau1 - tau0) * (-k * t).exp(),
            DelayKind::PiecewiseSmooth { tau0, tau1, t_start, ramp } => {
                let s = ((t - t_start) / ramp).clamp(0.0, 1.0);
                tau0 + (tau1 - tau0) * s * s * (3.0 - 2.0 * s)
            }
        }
    }

    pub fn tau_prime(&self, t: f64) -> f64 {
        match self.kind {
            DelayKind::Constant { .. } => 0.0,
            DelayKind::SaturatingExponential { tau0, tau1, k } => k * (tau1 - tau0) * (-k * t).exp(),
            DelayKind::PiecewiseSmooth { tau0, tau1, t_start, ramp } => {
                let s = (t - t_start) / ramp;
                if !(0.0..=1.0).contains(&s) {
                    0.0
                } else {
                    (tau1 - tau0) * 6.0 * s * (1.0 - s) / ramp
                }
            }
        }
    }

    pub fn tau_second(&self, t: f64) -> f64 {
        match self.kind {
            DelayKind::Constant { .. } => 0.0,
            DelayKind::SaturatingExponential { tau0, tau1, k } => -k * k * (tau1 - tau0) * (-k * t).exp(),
            DelayKind::PiecewiseSmooth { tau0, tau1, t_start, ramp } => {
                let s = (t - t_start) / ramp;
                if !(0.0..=1.0).contains(&s) {
                    0.0
                } else {
                    (tau1 - tau0) * 6.0 * (1.0 - 2.0 * s) / (ramp * ramp)
                }
            }
        }
    }

    /// Checks the delay bounds at `n` equally spaced times on `[0, horizon]`.
    pub fn check_samples(&self, horizon: f64, n: usize) -> Result<()> {
        const TOL: f64 = 1e-12;
        for j in 0..n {
            let t = horizon * j as f64 / (n.max(2) - 1) as f64;
            let (tau, dtau) = (self.tau(t), self.tau_prime(t));
            if !tau.is_finite() || !dtau.is_finite() || !self.tau_second(t).is_finite() {
                return Err(Error::DelayHypothesisViolated(format!("non-finite delay at t = {t}")));
            }
            if tau < self.tau0 - TOL || tau > self.tau1 + TOL {
                return Err(Error::DelayHypothesisViolated(format!(
                    "tau({t}) = {tau} leaves [{}, {}]",
                    self.tau0, self.tau1
                )));
            }
            if dtau < -TOL || dtau > self.d + TOL {
                return Err(Error::DelayHypothesisViolated(format!("tau'({t}) = {dtau} leaves [0, {}]", self.d)));
            }
        }
        Ok(())
    }
}

/// Builds a delay, derives `(tau0, tau1, d)` from the family's closed form and
/// validates the delay hypotheses.
pub fn make_delay(kind: DelayKind) -> Result<DelaySpec> {
    let bad = |msg: String| Err(Error::DelayHypothesisViolated(msg));
    let (tau0, tau1, d, horizon) = match kind {
        DelayKind::Constant { tau } => (tau, tau, 0.0, 1.0),
        DelayKind::SaturatingExponential { tau0, tau1, k } => {
            if !(k >= 0.0) || !k.is_finite() {
                return bad(format!("rate k = {k} must be finite and >= 0"));
            }
            let horizon = if k > 0.0 { 50.0 / k } else { 1.0 };
            (tau0, tau1, k * (tau1 - tau0), horizon)
        }
        DelayKind::PiecewiseSmooth { tau0, tau1, t_start, ramp } => {
            if !(ramp > 0.0) || !(t_start >= 0.0) {
                return bad(format!("ramp = {ramp} must be > 0 and t_start = {t_start} >= 0"));
            }
            (tau0, tau1, 1.5 * (tau1 - tau0) / ramp, 2.0 * (t_start + ramp))
        }
    };
    if !(tau0 > 0.0) || !tau0.is_finite() {
        return bad(format!("tau0 = {tau0} must be positive"));
    }
    if !(tau1 >= tau0) || !tau1.is_finite() {
        return bad(format!("tau1 = {tau1} must be >= tau0 = {tau0}"));
    }
    if !(d < 1.0) {
        return bad(format!("derivative bound d = {d} must be < 1"));
    }
    let spec = DelaySpec { kind, tau0, tau1, d };
    spec.check_samples(horizon, 10_000)?;
    Ok(spec)
}

/// Feedback gains `mu1`, `mu2` and the elastic boundary coefficient `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainSet {
    pub mu1: f64,
    pub mu2: f64,
    pub beta: f64,
}

impl GainSet {
    pub fn new(mu1: f64, mu2: f64, beta: f64) -> Result<Self> {
        if !(mu1 > 0.0) || !mu1.is_finite() {
            return Err(Error::BadParameter(format!("mu1 = {mu1} must be positive")));
        }
        if !mu2.is_finite() {
            return Err(Error::BadParameter(format!("mu2 = {mu2} must be finite")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::BadParameter(format!("beta = {beta} must be positive")));
        }
        Ok(GainSet { mu1, mu2, beta })
    }
}

/// Gain margins: the well-posedness margin `mu1 - |mu2|/sqrt(1-d)` and the
/// damping constant `C3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeedbackMargins {
    pub eps_margin: f64,
    pub c3: f64,
    /// The two expressions whose minimum is `C3` (current trace, delayed trace).
    pub c3_branches: [f64; 2],
    pub wellposed: bool,
    pub strictly_damped: bool,
}

pub fn feedback_margins(gains: &GainSet, delay: &DelaySpec) -> FeedbackMargins {
    let root = (1.0 - delay.d).sqrt();
    let abs_mu2 = gains.mu2.abs();
    let eps_margin = gains.mu1 - abs_mu2 / root;
    let current = gains.mu1 / 2.0 - abs_mu2 / root;
    let delayed = gains.mu1 / 2.0 * (1.0 - delay.d) - abs_mu2 / 2.0 * root;
    let c3 = current.min(delayed);
    FeedbackMargins {
        eps_margin,
        c3,
        c3_branches: [current, delayed],
        wellposed: eps_margin >= 0.0,
        strictly_damped: c3 > 0.0,
    }
}

/// Constants that depend only on the coefficient and `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoefficientConstants {
    /// Weighted Poincare constant.
    pub c_a_prime: f64,
    /// Coercivity constant of the auxiliary elliptic problem.
    pub alpha_a: f64,
    /// Trace constant: `u(1)^2 <= trace_const * ||u||_{1,a}^2`.
    pub trace_const: f64,
}

pub fn coefficient_constants(spec: &CoefficientSpec, beta: f64) -> CoefficientConstants {
    let a1 = spec.a_of_1;
    let c_a_prime = (4.0f64).min(2.0 / (2.0 - spec.mu_a)) / a1;
    CoefficientConstants {
        c_a_prime,
        alpha_a: (1.0 / c_a_prime).min(beta * a1 / 2.0),
        trace_const: (2.0f64).max(1.0 / a1),
    }
}

/// Every closed-form constant of the model in one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructuralConstants {
    #[serde(rename = "C_a_prime")]
    pub c_a_prime: f64,
    pub alpha_a: f64,
    pub trace_const: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    pub eps_margin: f64,
}

impl StructuralConstants {
    pub fn new(spec: &CoefficientSpec, gains: &GainSet, delay: &DelaySpec) -> Self {
        let coeff = coefficient_constants(spec, gains.beta);
        let margins = feedback_margins(gains, delay);
        StructuralConstants {
            c_a_prime: coeff.c_a_prime,
            alpha_a: coeff.alpha_a,
            trace_const: coeff.trace_const,
            c3: margins.c3,
            eps_margin: margins.eps_margin,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pow(alpha: f64) -> CoefficientSpec {
        make_coefficient(CoefficientKind::Power { alpha }).unwrap()
    }

    #[test]
    fn power_coefficients() {
        let weak = pow(0.5);
        assert_eq!(weak.mu_a, 0.5);
        assert_eq!(weak.a_of_1, 1.0);
        assert!(!weak.is_strongly_degenerate());
        let strong = pow(1.5);
        assert_eq!(strong.mu_a, 1.5);
        assert!(strong.is_strongly_degenerate());
        assert_eq!(strong.bc_kind(), BcKind::NaturalLeft);
        assert_eq!(
            make_coefficient(CoefficientKind::Power { alpha: 2.0 }),
            Err(Error::DegeneracyOutOfRange { mu_a: 2.0 })
        );
    }

    #[test]
    fn mu_a_estimates() {
        assert_eq!(degeneracy_mu_a(&pow(0.7), 500).unwrap(), 0.7);
        assert_eq!(degeneracy_mu_a(&pow(1.0), 500).unwrap(), 1.0);

        let spec =
            make_coefficient(CoefficientKind::PowerTimesFactor { alpha: 0.5, factor: SmoothFactor::OnePlusX }).unwrap();
        // dense sampling of 0.5 + x/(1+x) on (0, 1]
        let oracle = (1..=100_000)
            .map(|j| {
                let x = j as f64 / 100_000.0;
                0.5 + x / (1.0 + x)
            })
            .fold(0.0, f64::max);
        assert!((spec.mu_a - oracle).abs() < 1e-12);
        assert!((spec.mu_a - 1.0).abs() < 1e-15);
        assert_eq!(spec.a_of_1, 2.0);
    }

    #[test]
    fn mu_a_needs_enough_samples() {
        assert!(matches!(degeneracy_mu_a(&pow(0.5), 10), Err(Error::BadParameter(_))));
    }

    #[test]
    fn tabulated_coefficient() {
        // samples of x^0.8 reproduce the power law exactly in log-log space
        let xs: Vec<f64> = (1..=10).map(|j| j as f64 / 10.0).collect();
        let values: Vec<f64> = xs.iter().map(|x| x.powf(0.8)).collect();
        let spec = make_coefficient(CoefficientKind::Tabulated { xs, values }).unwrap();
        assert!((spec.mu_a - 0.8).abs() < 1e-12);
        assert!((spec.eval(0.37) - 0.37f64.powf(0.8)).abs() < 1e-12);
        assert!((spec.eval(0.01) - 0.01f64.powf(0.8)).abs() < 1e-12);
        assert_eq!(spec.eval(0.0), 0.0);

        let flat = make_coefficient(CoefficientKind::Tabulated { xs: vec![0.5, 1.0], values: vec![1.0, 1.0] });
        assert!(matches!(flat, Err(Error::NotDegenerateAtOrigin { .. })));
        let negative = make_coefficient(CoefficientKind::Tabulated { xs: vec![0.5, 1.0], values: vec![-1.0, 1.0] });
        assert!(matches!(negative, Err(Error::NonPositive { .. })));
    }

    #[test]
    fn delays() {
        let constant = make_delay(DelayKind::Constant { tau: 1.0 }).unwrap();
        assert_eq!((constant.tau0, constant.tau1, constant.d), (1.0, 1.0, 0.0));

        let sat = make_delay(DelayKind::SaturatingExponential { tau0: 0.5, tau1: 1.0, k: 0.4 }).unwrap();
        assert!((sat.d - 0.2).abs() < 1e-15);
        assert_eq!(sat.tau(0.0), 0.5);
        assert!((sat.tau_prime(0.0) - 0.2).abs() < 1e-15);

        let fast = make_delay(DelayKind::SaturatingExponential { tau0: 0.5, tau1: 1.0, k: 3.0 });
        assert!(matches!(fast, Err(Error::DelayHypothesisViolated(_))));

        let ramp = make_delay(DelayKind::PiecewiseSmooth { tau0: 0.5, tau1: 0.8, t_start: 1.0, ramp: 2.0 }).unwrap();
        assert!((ramp.d - 0.225).abs() < 1e-15);
        assert!((ramp.tau_prime(2.0) - 0.225).abs() < 1e-15);
        assert_eq!(ramp.tau(10.0), 0.8);

        assert!(make_delay(DelayKind::Constant { tau: 0.0 }).is_err());
    }

    #[test]
    fn feedback_margin_examples() {
        let zero = make_delay(DelayKind::Constant { tau: 1.0 }).unwrap();
        let m = feedback_margins(&GainSet::new(2.0, 0.2, 1.0).unwrap(), &zero);
        assert!((m.eps_margin - 1.8).abs() < 1e-15);
        assert!((m.c3 - 0.8).abs() < 1e-15);

        let half = DelaySpec { kind: DelayKind::Constant { tau: 1.0 }, tau0: 1.0, tau1: 1.0, d: 0.5 };
        let m = feedback_margins(&GainSet::new(1.0, 0.0, 1.0).unwrap(), &half);
        assert_eq!(m.eps_margin, 1.0);
        assert_eq!(m.c3, 0.25);

        let m = feedback_margins(&GainSet::new(1.0, 1.5, 1.0).unwrap(), &zero);
        assert_eq!(m.eps_margin, -0.5);
        assert!(!m.wellposed);
        assert!(!m.strictly_damped);
    }

    #[test]
    fn coefficient_constant_examples() {
        let c = coefficient_constants(&pow(0.5), 1.0);
        assert!((c.c_a_prime - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.alpha_a, 0.5);
        assert_eq!(c.trace_const, 2.0);

        let c = coefficient_constants(&pow(1.5), 1.0);
        assert_eq!(c.c_a_prime, 4.0);
        assert_eq!(c.alpha_a, 0.25);

        let c = coefficient_constants(&pow(0.0), 2.0);
        assert_eq!(c.c_a_prime, 1.0);
        assert_eq!(c.alpha_a, 1.0);
    }

    #[test]
    fn gain_validation() {
        assert!(GainSet::new(0.0, 0.0, 1.0).is_err());
        assert!(GainSet::new(1.0, 0.0, 0.0).is_err());
        assert!(GainSet::new(1.0, -3.0, 1.0).is_ok());
    }

    proptest! {
        #[test]
        fn power_mu_a_is_exact(alpha in 0.0f64..1.999) {
            let spec = pow(alpha);
            prop_assert_eq!(degeneracy_mu_a(&spec, 300).unwrap(), alpha);
        }

        #[test]
        fn c3_without_delay_gain(mu1 in 0.01f64..10.0, d in 0.0f64..0.99) {
            let delay = DelaySpec { kind: DelayKind::Constant { tau: 1.0 }, tau0: 1.0, tau1: 1.0, d };
            let m = feedback_margins(&GainSet::new(mu1, 0.0, 1.0).unwrap(), &delay);
            prop_assert!((m.c3 - mu1 * (1.0 - d) / 2.0).abs() <= 1e-14 * mu1);
        }

        #[test]
        fn c3_sign_matches_strict_condition(mu1 in 0.01f64..5.0, mu2 in -5.0f64..5.0, d in 0.0f64..0.99) {
            let delay = DelaySpec { kind: DelayKind::Constant { tau: 1.0 }, tau0: 1.0, tau1: 1.0, d };
            let m = feedback_margins(&GainSet::new(mu1, mu2, 1.0).unwrap(), &delay);
            let threshold = 2.0 * mu2.abs() / (1.0 - d).sqrt();
            // skip a thin band where rounding decides the comparison
            prop_assume!((mu1 - threshold).abs() > 1e-12 * (1.0 + mu1));
            prop_assert_eq!(m.c3 > 0.0, mu1 > threshold);
        }

        #[test]
        fn poincare_constant_monotone_in_mu_a(a in 0.0f64..1.99, b in 0.0f64..1.99) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(coefficient_constants(&pow(lo), 1.0).c_a_prime <= coefficient_constants(&pow(hi), 1.0).c_a_prime);
        }

        #[test]
        fn validated_delays_hold_bounds(tau0 in 0.05f64..2.0, spread in 0.0f64..2.0, k in 0.0f64..5.0) {
            let tau1 = tau0 + spread;
            prop_assume!(k * spread < 0.999);
            let delay = make_delay(DelayKind::SaturatingExponential { tau0, tau1, k }).unwrap();
            prop_assert!(delay.check_samples(100.0, 10_000).is_ok());
        }
    }
}
