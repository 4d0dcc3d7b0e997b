use std::fmt::Write as _;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use degenwave_core::model::feedback_margins;
use degenwave_core::operator_checks::{TOL_DISSIPATIVITY, TOL_NORM_RATIO, TOL_RESOLVENT};
use degenwave_core::stepper::regime;
use degenwave_core::{
    decay_certificate_for, dissipation_audit, m_tilde, run, EnergySample, RunConfig, Setup, StructuralConstants,
    Trajectory,
};

use crate::checks::{default_times, operator_check, OperatorCheckReport};
use crate::report::{
    Checks, Discretization, ModelInfo, Report, SandwichCheck, Tolerances, AUDIT_REL, MONOTONE_REL, NOTES,
};

pub const CSV_HEADER: &str = "t,E,E_tilde,trace_v,trace_v_delayed,bc_residual,channel_discrepancy";

/// Trial counts for the operator probes embedded in a run report.
pub const REPORT_PROBE_TRIALS: usize = 100;
pub const REPORT_RESOLVENT_TRIALS: usize = 20;

pub struct Outcome {
    pub setup: Setup,
    pub trajectory: Trajectory,
    pub report: Report,
}

/// Builds, runs and audits `config`, including operator probes.
pub fn simulate(config: &RunConfig) -> anyhow::Result<Outcome> {
    evaluate(config, true)
}

/// As [`simulate`]; `with_operator = false` skips the operator probes.
pub fn evaluate(config: &RunConfig, with_operator: bool) -> anyhow::Result<Outcome> {
    let setup = config.build()?;
    let mut trajectory = run(&setup)?;
    trajectory.fingerprint = config.fingerprint();
    let operator = if with_operator {
        let times = default_times(setup.t_end);
        Some(operator_check(&setup, &times, REPORT_PROBE_TRIALS, REPORT_RESOLVENT_TRIALS, config.seed()?)?)
    } else {
        None
    };
    let report = build_report(config, &setup, &trajectory, operator);
    Ok(Outcome { setup, trajectory, report })
}

pub fn build_report(
    config: &RunConfig,
    setup: &Setup,
    traj: &Trajectory,
    operator: Option<OperatorCheckReport>,
) -> Report {
    let samples = &traj.samples;
    let constants = StructuralConstants::new(&setup.coefficient, &setup.gains, &setup.delay);
    let margins = feedback_margins(&setup.gains, &setup.delay);
    let params = traj.params;
    let a1 = setup.coefficient.a_of_1;
    let e0 = samples.first().map_or(0.0, |s| s.e);

    let monotone_tol = MONOTONE_REL * e0;
    let dissipation_tol = AUDIT_REL * e0 / setup.t_end.max(setup.dt);
    let audit = dissipation_audit(samples, constants.c3, a1, monotone_tol);

    let m_tilde = margins.strictly_damped.then(|| m_tilde(&params, &constants, setup.gains.beta, setup.delay.tau1));
    let certificate = m_tilde.map(|m| decay_certificate_for(samples, m));
    let sandwich = SandwichCheck::new(samples, &params);
    let channel_discrepancy = degenwave_core::channel_crosscheck(samples);

    let checks = Checks {
        monotone: audit.monotonicity_violations == 0,
        dissipation: audit.worst_violation <= dissipation_tol,
        sandwich: sandwich.violations == 0,
        envelope: certificate.map(|c| c.envelope_ok),
        horizon: certificate.map(|c| c.horizon_ok),
        operator: operator.as_ref().map(|o| o.pass),
    };

    Report {
        version: crate::report::VERSION,
        config_fingerprint: config.fingerprint(),
        config: config.entries().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        model: ModelInfo {
            regime: regime(&setup.coefficient),
            bc_left: setup.ops.bc_kind.name(),
            mu_a: setup.coefficient.mu_a,
            a_of_1: a1,
            tau0: setup.delay.tau0,
            tau1: setup.delay.tau1,
            d: setup.delay.d,
        },
        discretization: Discretization {
            n: setup.mesh.n,
            gamma: setup.mesh.grading_gamma,
            n_delta: setup.n_delta,
            dt: setup.dt,
            n_steps: setup.n_steps,
            t_end: setup.t_end,
            record_every: setup.record_every,
        },
        constants,
        margins,
        params,
        m_tilde,
        certificate,
        audit,
        sandwich,
        channel_discrepancy,
        bc_residual_constant: traj.bc_residual_constant,
        operator,
        tolerances: Tolerances {
            monotone: monotone_tol,
            dissipation: dissipation_tol,
            envelope_factor: 1.05,
            dissipativity: TOL_DISSIPATIVITY,
            resolvent: TOL_RESOLVENT,
            norm_ratio: TOL_NORM_RATIO,
        },
        checks,
        warnings: traj.warnings.clone(),
        notes: NOTES.to_vec(),
    }
}

/// The trajectory table, one row per recorded sample.
pub fn trajectory_csv(samples: &[EnergySample]) -> String {
    let mut out = String::with_capacity(samples.len() * 170 + 80);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.t, s.e, s.e_tilde, s.trace_v, s.trace_v_delayed, s.bc_residual, s.channel_discrepancy
        );
    }
    out
}

fn output_path(config: &RunConfig, dir: &Path, key: &str, default: &str) -> PathBuf {
    dir.join(config.get(key).unwrap_or(default))
}

/// Writes CSV, report and (when configured) snapshots; returns the paths.
pub fn write_outputs(outcome: &Outcome, config: &RunConfig, dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let csv = output_path(config, dir, "outputs.csv", "trajectory.csv");
    std::fs::write(&csv, trajectory_csv(&outcome.trajectory.samples))
        .with_context(|| format!("writing {}", csv.display()))?;
    let report = output_path(config, dir, "outputs.report", "report.json");
    std::fs::write(&report, serde_json::to_string_pretty(&outcome.report)? + "\n")
        .with_context(|| format!("writing {}", report.display()))?;
    let mut paths = vec![csv, report];
    if config.get("outputs.snapshots").is_some() {
        let path = output_path(config, dir, "outputs.snapshots", "snapshots.jsonl");
        let file = std::fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        let mut w = BufWriter::new(file);
        for snap in &outcome.trajectory.snapshots {
            serde_json::to_writer(&mut w, snap)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        paths.push(path);
    }
    Ok(paths)
}
