//! Self-convergence: N, N_delta and 1/dt doubled together per level.

use std::fmt::Write as _;

use anyhow::bail;
use degenwave_core::{run, RunConfig};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Level {
    pub level: usize,
    pub n: usize,
    pub n_delta: usize,
    pub dt: f64,
    #[serde(rename = "E_T")]
    pub e_final: f64,
    pub trace_final: f64,
}

/// Observed order `log2(D_k / D_{k+1})`, or `Exact` when the finer
/// difference vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Order {
    Observed(f64),
    #[serde(serialize_with = "exact")]
    Exact,
}

fn exact<S: serde::Serializer>(s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str("exact")
}

impl Order {
    fn between(coarse: f64, fine: f64) -> Order {
        if fine == 0.0 {
            Order::Exact
        } else {
            Order::Observed((coarse.abs() / fine.abs()).log2())
        }
    }

    /// `Exact` counts as infinitely high.
    pub fn at_least(&self, p: f64) -> bool {
        match *self {
            Order::Exact => true,
            Order::Observed(q) => q >= p,
        }
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Order::Exact => f.write_str("exact"),
            Order::Observed(q) => write!(f, "{q:.4}"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Difference {
    /// Levels `k` and `k + 1`.
    pub levels: (usize, usize),
    #[serde(rename = "diff_E")]
    pub diff_e: f64,
    pub diff_trace: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceStudy {
    pub levels: Vec<Level>,
    pub differences: Vec<Difference>,
    #[serde(rename = "order_E")]
    pub order_e: Vec<Order>,
    pub order_trace: Vec<Order>,
}

impl ConvergenceStudy {
    pub fn min_order_e_at_least(&self, p: f64) -> bool {
        self.order_e.iter().all(|o| o.at_least(p))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,N,N_delta,dt,E_T,trace_v_T,diff_E,diff_trace,order_E,order_trace\n");
        for (k, l) in self.levels.iter().enumerate() {
            let _ = write!(
                out,
                "{},{},{},{:.16e},{:.16e},{:.16e}",
                l.level, l.n, l.n_delta, l.dt, l.e_final, l.trace_final
            );
            match self.differences.get(k) {
                Some(d) => {
                    let _ = write!(out, ",{:.16e},{:.16e}", d.diff_e, d.diff_trace);
                }
                None => out.push_str(",,"),
            }
            match (self.order_e.get(k), self.order_trace.get(k)) {
                (Some(a), Some(b)) => {
                    let _ = writeln!(out, ",{a},{b}");
                }
                _ => out.push_str(",,\n"),
            }
        }
        out
    }
}

pub fn converge(base: &RunConfig, levels: usize) -> anyhow::Result<ConvergenceStudy> {
    if levels < 3 {
        bail!("a convergence study needs at least 3 levels, got {levels}");
    }
    let coarse = base.build()?;
    let configs = (0..levels)
        .map(|k| {
            let mut c = base.clone();
            let scale = 1usize << k;
            c.set("mesh.n", &(coarse.mesh.n * scale).to_string())?;
            // the grading stays fixed so that meshes are nested
            c.set("mesh.gamma", &coarse.mesh.grading_gamma.to_string())?;
            c.set("channel.n_delta", &(coarse.n_delta * scale).to_string())?;
            c.set("integrator.dt", &(coarse.dt / scale as f64).to_string())?;
            // only the terminal state is compared
            c.set("integrator.record_every", &(coarse.n_steps.max(1) * scale).to_string())?;
            Ok(c)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;

    let results = configs
        .par_iter()
        .enumerate()
        .map(|(k, c)| -> anyhow::Result<Level> {
            let setup = c.build()?;
            let traj = run(&setup)?;
            let last = traj.samples.last().expect("a run records its final sample");
            Ok(Level {
                level: k,
                n: setup.mesh.n,
                n_delta: setup.n_delta,
                dt: setup.dt,
                e_final: last.e,
                trace_final: last.trace_v,
            })
        })
        .collect::<Vec<_>>();
    let levels = results.into_iter().collect::<anyhow::Result<Vec<_>>>()?;

    let differences: Vec<Difference> = levels
        .windows(2)
        .map(|w| Difference {
            levels: (w[0].level, w[1].level),
            diff_e: w[1].e_final - w[0].e_final,
            diff_trace: w[1].trace_final - w[0].trace_final,
        })
        .collect();
    let orders = |f: fn(&Difference) -> f64| -> Vec<Order> {
        differences.windows(2).map(|d| Order::between(f(&d[0]), f(&d[1]))).collect()
    };
    let order_e = orders(|d| d.diff_e);
    let order_trace = orders(|d| d.diff_trace);
    Ok(ConvergenceStudy { levels, differences, order_e, order_trace })
}
