//! Trajectory audits: the energy dissipation inequality and the
//! exponential decay certificate.

use serde::Serialize;

use crate::stepper::EnergySample;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationAudit {
    /// `max(0, max_k [E'(t_k) + C3 a(1) (v_N^2 + w(1)^2)])` with centered
    /// `E'`, where `w(1)` is the channel outflow that the energy integrates.
    pub worst_violation: f64,
    pub worst_at: f64,
    /// The same with the delayed trace read from the history buffer; it
    /// also absorbs the gap between the two delay realizations.
    pub worst_violation_history: f64,
    /// Consecutive samples with `E_{k+1} > E_k + tolerance`.
    pub monotonicity_violations: usize,
    pub max_increase: f64,
}

pub fn dissipation_audit(samples: &[EnergySample], c3: f64, a1: f64, monotone_tol: f64) -> DissipationAudit {
    let mut audit = DissipationAudit {
        worst_violation: 0.0,
        worst_at: 0.0,
        worst_violation_history: 0.0,
        monotonicity_violations: 0,
        max_increase: 0.0,
    };
    for w in samples.windows(2) {
        let inc = w[1].e - w[0].e;
        audit.max_increase = audit.max_increase.max(inc);
        if inc > monotone_tol {
            audit.monotonicity_violations += 1;
        }
    }
    for w in samples.windows(3) {
        let rate = (w[2].e - w[0].e) / (w[2].t - w[0].t);
        let s = &w[1];
        let current = c3 * a1 * s.trace_v * s.trace_v;
        let history = rate + current + c3 * a1 * s.trace_v_delayed * s.trace_v_delayed;
        audit.worst_violation_history = audit.worst_violation_history.max(history);
        let excess = rate + current + c3 * a1 * s.channel_outflow * s.channel_outflow;
        if excess > audit.worst_violation {
            audit.worst_violation = excess;
            audit.worst_at = s.t;
        }
    }
    audit
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayCertificate {
    #[serde(rename = "M_tilde")]
    pub m_tilde: f64,
    pub omega_fit: f64,
    #[serde(rename = "M_empirical")]
    pub m_empirical: f64,
    pub envelope_ok: bool,
    /// Largest `E(t) / (E(0) e^{1 - t/M~})` over `t >= M~`.
    pub envelope_ratio: f64,
    /// `T >= 3 M~`
    pub horizon_ok: bool,
    pub fit_points: usize,
    /// The fit fell back to the whole trajectory because the `[0.1 T, T]`
    /// window held fewer than three usable samples.
    pub fit_fallback: bool,
}

const ENVELOPE_TOL: f64 = 1.05;

/// Certificate for samples `(t_k, E_k)` against a given `M~`.
pub fn decay_certificate(t: &[f64], e: &[f64], m_tilde: f64) -> DecayCertificate {
    let e0 = e.first().copied().unwrap_or(0.0);
    let t_end = t.last().copied().unwrap_or(0.0);
    let floor = 1e-14 * e0;

    let usable = |k: &usize| e[*k] > floor && e[*k] > 0.0;
    let mut window: Vec<usize> = (0..t.len()).filter(|&k| t[k] >= 0.1 * t_end).filter(usable).collect();
    let fit_fallback = window.len() < 3;
    if fit_fallback {
        window = (0..t.len()).filter(usable).collect();
    }
    let omega_fit = if window.len() >= 2 {
        let n = window.len() as f64;
        let mt = window.iter().map(|&k| t[k]).sum::<f64>() / n;
        let ml = window.iter().map(|&k| e[k].ln()).sum::<f64>() / n;
        let sxy: f64 = window.iter().map(|&k| (t[k] - mt) * (e[k].ln() - ml)).sum();
        let sxx: f64 = window.iter().map(|&k| (t[k] - mt).powi(2)).sum();
        -sxy / sxx
    } else {
        f64::NAN
    };

    // tail[k] = integral of E from t_k to T
    let mut tail = vec![0.0; t.len()];
    for k in (0..t.len().saturating_sub(1)).rev() {
        tail[k] = tail[k + 1] + 0.5 * (e[k] + e[k + 1]) * (t[k + 1] - t[k]);
    }
    let m_empirical = (0..t.len()).filter(usable).map(|k| tail[k] / e[k]).fold(0.0, f64::max);

    let envelope_ratio = (0..t.len())
        .filter(|&k| t[k] >= m_tilde)
        .map(|k| if e0 > 0.0 { e[k] / (e0 * (1.0 - t[k] / m_tilde).exp()) } else { 0.0 })
        .fold(0.0, f64::max);

    DecayCertificate {
        m_tilde,
        omega_fit,
        m_empirical,
        envelope_ok: envelope_ratio <= ENVELOPE_TOL,
        envelope_ratio,
        horizon_ok: t_end >= 3.0 * m_tilde,
        fit_points: window.len(),
        fit_fallback,
    }
}

pub fn decay_certificate_for(samples: &[EnergySample], m_tilde: f64) -> DecayCertificate {
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let e: Vec<f64> = samples.iter().map(|s| s.e).collect();
    decay_certificate(&t, &e, m_tilde)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_series(rate: f64, t_end: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
        let t: Vec<f64> = (0..=n).map(|k| t_end * k as f64 / n as f64).collect();
        let e = t.iter().map(|&s| (rate * s).exp()).collect();
        (t, e)
    }

    #[test]
    fn exponential_fit_and_integral_constant() {
        let (t, e) = exp_series(-2.0, 10.0, 20_000);
        let c = decay_certificate(&t, &e, 1.0);
        assert!((c.omega_fit - 2.0).abs() < 1e-6, "{}", c.omega_fit);
        assert!((c.m_empirical - 0.5).abs() < 1e-3, "{}", c.m_empirical);
        assert!(c.envelope_ok && c.horizon_ok);
        assert!(!c.fit_fallback);
    }

    #[test]
    fn growing_trajectory_fails_envelope() {
        let (t, e) = exp_series(0.5, 10.0, 1000);
        let c = decay_certificate(&t, &e, 1.0);
        assert!(!c.envelope_ok);
    }

    #[test]
    fn short_horizon_is_flagged() {
        let (t, e) = exp_series(-1.0, 2.0, 100);
        let c = decay_certificate(&t, &e, 5.0);
        assert!(!c.horizon_ok);
        assert!(c.envelope_ok);
    }

    #[test]
    fn fit_ignores_round_off_floor() {
        let (t, mut e) = exp_series(-3.0, 20.0, 2000);
        for x in e.iter_mut() {
            if *x < 1e-15 {
                *x = 1e-30;
            }
        }
        let c = decay_certificate(&t, &e, 1.0);
        assert!((c.omega_fit - 3.0).abs() < 1e-6, "{}", c.omega_fit);
    }

    fn sample(t: f64, e: f64, v: f64, vd: f64) -> EnergySample {
        EnergySample {
            t,
            e,
            e_tilde: e,
            trace_v: v,
            trace_v_delayed: vd,
            channel_outflow: vd,
            bc_residual: 0.0,
            channel_discrepancy: 0.0,
        }
    }

    #[test]
    fn audit_of_zero_trajectory() {
        let s: Vec<_> = (0..5).map(|k| sample(k as f64, 0.0, 0.0, 0.0)).collect();
        let a = dissipation_audit(&s, 0.5, 1.0, 0.0);
        assert_eq!((a.worst_violation, a.monotonicity_violations), (0.0, 0));
    }

    #[test]
    fn audit_detects_insufficient_dissipation() {
        // E' = -1 while the bound demands E' <= -C3 (v^2 + vd^2) = -2
        let s: Vec<_> = (0..5).map(|k| sample(k as f64, 10.0 - k as f64, 1.0, 1.0)).collect();
        let a = dissipation_audit(&s, 1.0, 1.0, 0.0);
        assert!((a.worst_violation - 1.0).abs() < 1e-12);
        let grow: Vec<_> = (0..5).map(|k| sample(k as f64, k as f64, 0.0, 0.0)).collect();
        assert_eq!(dissipation_audit(&grow, 1.0, 1.0, 0.5).monotonicity_violations, 4);
    }
}
