//! Grid sweeps over up to three config keys.

use std::fmt::Write as _;

use anyhow::{bail, Context};
use degenwave_core::RunConfig;
use rayon::prelude::*;
use serde::Serialize;

use crate::simulate::evaluate;

pub const MAX_AXES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub key: String,
    pub values: Vec<String>,
}

impl Axis {
    /// `key=v1,v2,...` or `key=start:stop:step` (inclusive of `stop`).
    pub fn parse(spec: &str) -> anyhow::Result<Axis> {
        let (key, values) = spec.split_once('=').with_context(|| format!("axis '{spec}' is not key=values"))?;
        let key = key.trim().to_string();
        let values = values.trim();
        let parts: Vec<&str> = values.split(':').collect();
        let values = if parts.len() == 3 {
            let [start, stop, step] = [parts[0], parts[1], parts[2]]
                .map(|p| p.trim().parse::<f64>().with_context(|| format!("bad range bound '{p}' in '{spec}'")));
            let (start, stop, step) = (start?, stop?, step?);
            if step.is_nan() || step <= 0.0 || stop < start {
                bail!("range '{values}' needs start <= stop and a positive step");
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|i| format_value(start + i as f64 * step)).collect()
        } else {
            values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect::<Vec<_>>()
        };
        if values.is_empty() {
            bail!("axis '{key}' has no values");
        }
        Ok(Axis { key, values })
    }
}

/// Shortest decimal after rounding away accumulated step error.
fn format_value(x: f64) -> String {
    let rounded = (x * 1e12).round() / 1e12;
    format!("{}", if rounded == 0.0 { 0.0 } else { rounded })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub params: Vec<(String, String)>,
    pub seed: u64,
    #[serde(rename = "C3")]
    pub c3: Option<f64>,
    pub omega_fit: Option<f64>,
    pub envelope_ok: Option<bool>,
    #[serde(rename = "M_tilde")]
    pub m_tilde: Option<f64>,
    pub e_final: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepTable {
    pub keys: Vec<String>,
    pub rows: Vec<SweepRow>,
}

/// Per-row seed derived from the master seed (splitmix64 of the index).
pub fn row_seed(master: u64, index: usize) -> u64 {
    let mut z = master.wrapping_add((index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Grid points in row-major order: the first axis varies slowest.
pub fn grid(axes: &[Axis]) -> Vec<Vec<(String, String)>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((axis.key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    points
}

/// Config for one grid point.
pub fn row_config(base: &RunConfig, params: &[(String, String)], seed: u64) -> anyhow::Result<RunConfig> {
    let mut config = base.clone();
    for (k, v) in params {
        config.set(k, v)?;
    }
    config.set("seed", &seed.to_string())?;
    Ok(config)
}

pub fn run_row(base: &RunConfig, index: usize, params: Vec<(String, String)>, seed: u64) -> SweepRow {
    let mut row = SweepRow {
        index,
        params,
        seed,
        c3: None,
        omega_fit: None,
        envelope_ok: None,
        m_tilde: None,
        e_final: None,
        error: None,
    };
    let outcome = row_config(base, &row.params, seed).and_then(|c| evaluate(&c, false));
    match outcome {
        Ok(o) => {
            let r = &o.report;
            row.c3 = Some(r.constants.c3);
            row.m_tilde = r.m_tilde;
            row.omega_fit = r.certificate.map(|c| c.omega_fit);
            row.envelope_ok = r.certificate.map(|c| c.envelope_ok);
            row.e_final = o.trajectory.samples.last().map(|s| s.e);
        }
        Err(e) => row.error = Some(format!("{e:#}")),
    }
    row
}

/// Runs every grid point in the current rayon pool. Row order is the grid
/// order regardless of scheduling; a failing row does not stop the others.
pub fn sweep(base: &RunConfig, axes: &[Axis]) -> anyhow::Result<SweepTable> {
    if axes.len() > MAX_AXES {
        bail!("at most {MAX_AXES} sweep axes are supported, got {}", axes.len());
    }
    for (i, a) in axes.iter().enumerate() {
        if axes[..i].iter().any(|b| b.key == a.key) {
            bail!("axis '{}' given twice", a.key);
        }
        // fail fast on unknown keys instead of marking every row
        base.clone().set(&a.key, &a.values[0])?;
    }
    let master = base.seed()?;
    let rows = grid(axes)
        .into_par_iter()
        .enumerate()
        .map(|(index, params)| run_row(base, index, params, row_seed(master, index)))
        .collect();
    Ok(SweepTable { keys: axes.iter().map(|a| a.key.clone()).collect(), rows })
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.16e}")).unwrap_or_default()
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index");
        for k in &self.keys {
            out.push(',');
            out.push_str(k);
        }
        out.push_str(",seed,status,C3,omega_fit,envelope_ok,M_tilde,E_final,error\n");
        for r in &self.rows {
            let _ = write!(out, "{}", r.index);
            for (_, v) in &r.params {
                let _ = write!(out, ",{v}");
            }
            let status = if r.error.is_some() { "failed" } else { "ok" };
            let error = r.error.as_deref().unwrap_or("").replace(['"', ',', '\n'], ";");
            let _ = writeln!(
                out,
                ",{},{status},{},{},{},{},{},{error}",
                r.seed,
                opt_f64(r.c3),
                opt_f64(r.omega_fit),
                r.envelope_ok.map(|b| b.to_string()).unwrap_or_default(),
                opt_f64(r.m_tilde),
                opt_f64(r.e_final),
            );
        }
        out
    }
}
