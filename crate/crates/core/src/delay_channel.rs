//! Two realizations of the delayed boundary trace `u_t(t - tau(t), 1)`:
//! the transport profile `w(delta, t) = u_t(t - delta tau(t), 1)` on a
//! uniform `delta` grid, and a raw history of past boundary velocities.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::stepper::EnergySample;

/// Nodal values `w_i = w(i / N_delta)`, `i = 0..=N_delta`. `w[0]` is the
/// inflow, the current boundary velocity.
///
/// Integrals over `delta` use the upwind-cell rule: cell `(delta_{i-1},
/// delta_i]` carries the value at its downstream node, so the inflow node has
/// zero weight. This is the quadrature under which implicit upwinding is
/// exactly dissipative.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportChannel {
    pub w: Vec<f64>,
}

impl TransportChannel {
    pub fn n_delta(&self) -> usize {
        self.w.len() - 1
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.n_delta() as f64
    }

    pub fn delta(&self, i: usize) -> f64 {
        i as f64 / self.n_delta() as f64
    }

    pub fn inflow(&self) -> f64 {
        self.w[0]
    }

    /// `w(1, t)`, the delayed trace as seen by the channel.
    pub fn outflow(&self) -> f64 {
        self.w[self.n_delta()]
    }

    /// Integral over `delta in (0, 1)` of `weight(delta) w^2`.
    pub fn weighted_square_integral(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let h = self.spacing();
        (1..self.w.len()).map(|i| weight(self.delta(i)) * self.w[i] * self.w[i]).sum::<f64>() * h
    }

    pub fn square_integral(&self) -> f64 {
        self.w[1..].iter().map(|x| x * x).sum::<f64>() * self.spacing()
    }

    /// One backward-Euler upwind step of
    /// `tau w_t + (1 - delta tau') w_delta = 0` with `w(0) = inflow`.
    pub fn transport_step(&mut self, tau: f64, tau_prime: f64, dt: f64, inflow: f64) {
        let h = self.spacing();
        self.w[0] = inflow;
        for i in 1..self.w.len() {
            let lambda = dt * (1.0 - self.delta(i) * tau_prime) / (tau * h);
            self.w[i] = (self.w[i] + lambda * self.w[i - 1]) / (1.0 + lambda);
        }
    }
}

/// Samples `w_i = f0(-delta_i tau(0))`.
pub fn init_channel(f0: impl Fn(f64) -> f64, tau_at_0: f64, n_delta: usize) -> Result<TransportChannel> {
    if n_delta < 1 {
        return Err(Error::BadParameter("channel needs at least one cell".into()));
    }
    let w = (0..=n_delta).map(|i| f0(-(i as f64 / n_delta as f64) * tau_at_0)).collect();
    Ok(TransportChannel { w })
}

/// Time-ordered past boundary velocities with linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryBuffer {
    samples: VecDeque<(f64, f64)>,
    /// How far behind the newest sample history must remain available.
    retain: f64,
}

impl HistoryBuffer {
    pub fn new(retain: f64) -> Self {
        HistoryBuffer { samples: VecDeque::new(), retain }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((self.samples.front()?.0, self.samples.back()?.0))
    }

    pub fn samples(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().copied()
    }

    /// Appends a sample; times must be strictly increasing. Samples older
    /// than `t - retain` are dropped, keeping one at or before that time.
    pub fn push(&mut self, t: f64, value: f64) -> Result<()> {
        if let Some(&(last, _)) = self.samples.back() {
            if !(t > last) {
                return Err(Error::BadParameter(format!("history time {t} does not follow {last}")));
            }
        }
        self.samples.push_back((t, value));
        let cutoff = t - self.retain;
        while self.samples.len() > 2 && self.samples[1].0 <= cutoff {
            self.samples.pop_front();
        }
        Ok(())
    }

    /// Linear interpolation at `s`.
    pub fn sample(&self, s: f64) -> Result<f64> {
        let (start, end) = self.span().ok_or(Error::OutOfSpan { s, start: f64::NAN, end: f64::NAN })?;
        if !(s >= start && s <= end) {
            return Err(Error::OutOfSpan { s, start, end });
        }
        let k = self.samples.partition_point(|&(t, _)| t < s);
        let (t1, v1) = self.samples[k];
        if t1 == s || k == 0 {
            return Ok(v1);
        }
        let (t0, v0) = self.samples[k - 1];
        let theta = (s - t0) / (t1 - t0);
        Ok(v0 + theta * (v1 - v0))
    }

    /// Zeroes every stored value, keeping the time stamps.
    pub fn clear_values(&mut self) {
        self.samples.iter_mut().for_each(|s| s.1 = 0.0);
    }
}

/// Largest recorded gap between the channel outflow `w(1, t)` and the
/// interpolated history at `t - tau(t)`.
pub fn channel_crosscheck(samples: &[EnergySample]) -> f64 {
    samples.iter().map(|s| s.channel_discrepancy).fold(0.0, f64::max)
}
