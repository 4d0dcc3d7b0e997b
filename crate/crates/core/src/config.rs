//! Run configuration: a flat `key = value` text format with `#` comments,
//! overrides, and validation into a ready-to-run [`Setup`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mesh::{assemble_operators, build_mesh, default_gamma, DiscreteOperators, Mesh};
use crate::model::{
    make_coefficient, make_delay, CoefficientKind, CoefficientSpec, DelayKind, DelaySpec, GainSet, SmoothFactor,
};
use crate::stepper::{HistoryPreset, InitialData, Preset};

const KNOWN_KEYS: &[&str] = &[
    "coefficient.kind",
    "coefficient.alpha",
    "coefficient.factor",
    "coefficient.table_x",
    "coefficient.table_a",
    "delay.kind",
    "delay.tau",
    "delay.tau0",
    "delay.tau1",
    "delay.k",
    "delay.t_start",
    "delay.ramp",
    "gains.mu1",
    "gains.mu2",
    "gains.beta",
    "mesh.n",
    "mesh.gamma",
    "channel.n_delta",
    "integrator.dt",
    "integrator.t_end",
    "integrator.record_every",
    "initial.preset",
    "initial.f0",
    "initial.f0_amp",
    "outputs.csv",
    "outputs.report",
    "outputs.snapshots",
    "seed",
];

pub const SCENARIOS: &[(&str, &str)] = &[
    ("baseline", include_str!("../../../scenarios/baseline.cfg")),
    ("nodelay", include_str!("../../../scenarios/nodelay.cfg")),
    ("constant-delay", include_str!("../../../scenarios/constant-delay.cfg")),
    ("strong-degeneracy", include_str!("../../../scenarios/strong-degeneracy.cfg")),
    ("margin-violation", include_str!("../../../scenarios/margin-violation.cfg")),
];

/// A run description as an ordered map of dotted keys to raw values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut config = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::ConfigParse(format!("line {}: expected 'key = value'", lineno + 1)))?;
            config
                .set(key.trim(), value.trim())
                .map_err(|e| Error::ConfigParse(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(config)
    }
}

impl RunConfig {
    /// One of the shipped scenarios by name.
    pub fn scenario(name: &str) -> Option<RunConfig> {
        SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, text)| text.parse().expect("shipped scenario parses"))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            return Err(Error::ConfigParse(format!("unknown key '{key}'")));
        }
        if value.is_empty() {
            return Err(Error::ConfigParse(format!("empty value for '{key}'")));
        }
        self.entries.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::ConfigParse(format!("override '{assignment}' is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Canonical text: sorted keys, one per line.
    pub fn to_canonical_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hex SHA-256 of the canonical text.
    pub fn fingerprint(&self) -> String {
        Sha256::digest(self.to_canonical_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn raw(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| Error::ConfigParse(format!("missing key '{key}'")))
    }

    fn real(&self, key: &str) -> Result<f64> {
        let raw = self.raw(key)?;
        raw.parse::<f64>().map_err(|_| Error::ConfigParse(format!("'{key}' = '{raw}' is not a number")))
    }

    fn real_or_auto(&self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None | Some("auto") => Ok(None),
            Some(_) => self.real(key).map(Some),
        }
    }

    fn count(&self, key: &str) -> Result<usize> {
        let raw = self.raw(key)?;
        raw.parse::<usize>().map_err(|_| Error::ConfigParse(format!("'{key}' = '{raw}' is not a count")))
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        self.raw(key)?
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::ConfigParse(format!("bad number in '{key}'"))))
            .collect()
    }

    pub fn coefficient_kind(&self) -> Result<CoefficientKind> {
        match self.raw("coefficient.kind")? {
            "power" => Ok(CoefficientKind::Power { alpha: self.real("coefficient.alpha")? }),
            "power_times_factor" => Ok(CoefficientKind::PowerTimesFactor {
                alpha: self.real("coefficient.alpha")?,
                factor: SmoothFactor::parse(self.raw("coefficient.factor")?)?,
            }),
            "tabulated" => Ok(CoefficientKind::Tabulated {
                xs: self.list("coefficient.table_x")?,
                values: self.list("coefficient.table_a")?,
            }),
            other => Err(Error::ConfigParse(format!("unknown coefficient.kind '{other}'"))),
        }
    }

    pub fn delay_kind(&self) -> Result<DelayKind> {
        match self.raw("delay.kind")? {
            "constant" => Ok(DelayKind::Constant { tau: self.real("delay.tau")? }),
            "saturating_exponential" => Ok(DelayKind::SaturatingExponential {
                tau0: self.real("delay.tau0")?,
                tau1: self.real("delay.tau1")?,
                k: self.real("delay.k")?,
            }),
            "piecewise_smooth" => Ok(DelayKind::PiecewiseSmooth {
                tau0: self.real("delay.tau0")?,
                tau1: self.real("delay.tau1")?,
                t_start: self.real("delay.t_start")?,
                ramp: self.real("delay.ramp")?,
            }),
            other => Err(Error::ConfigParse(format!("unknown delay.kind '{other}'"))),
        }
    }

    pub fn gains(&self) -> Result<GainSet> {
        GainSet::new(self.real("gains.mu1")?, self.real("gains.mu2")?, self.real("gains.beta")?)
    }

    pub fn seed(&self) -> Result<u64> {
        match self.get("seed") {
            None => Ok(0),
            Some(raw) => raw.parse().map_err(|_| Error::ConfigParse(format!("seed '{raw}' is not an integer"))),
        }
    }

    pub fn t_end(&self) -> Result<f64> {
        self.real("integrator.t_end")
    }

    /// Validates every component and assembles the discretization.
    pub fn build(&self) -> Result<Setup> {
        let coefficient = make_coefficient(self.coefficient_kind()?)?;
        let delay = make_delay(self.delay_kind()?)?;
        let gains = self.gains()?;

        let n = self.count("mesh.n")?;
        if n < 8 {
            return Err(Error::BadMeshParams(format!("mesh.n = {n} must be >= 8")));
        }
        let gamma = self.real_or_auto("mesh.gamma")?.unwrap_or_else(|| default_gamma(coefficient.mu_a));
        let mesh = build_mesh(n, gamma)?;
        let ops = assemble_operators(&coefficient, &mesh, coefficient.bc_kind())?;

        let n_delta = self.count("channel.n_delta")?;
        if n_delta < 8 {
            return Err(Error::BadParameter(format!("channel.n_delta = {n_delta} must be >= 8")));
        }

        let t_end = self.t_end()?;
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::BadParameter(format!("integrator.t_end = {t_end} must be >= 0")));
        }
        let dt_request = self
            .real_or_auto("integrator.dt")?
            .unwrap_or_else(|| (1e-3f64).min(0.5 * mesh.last_width() / coefficient.a_of_1.sqrt()));
        if !(dt_request > 0.0) {
            return Err(Error::BadParameter(format!("integrator.dt = {dt_request} must be positive")));
        }
        if dt_request > delay.tau0 {
            return Err(Error::BadParameter(format!(
                "integrator.dt = {dt_request} must not exceed the minimal delay {}",
                delay.tau0
            )));
        }
        // shrink dt slightly so that the horizon is an integer number of steps
        let n_steps = (t_end / dt_request - 1e-9).ceil().max(0.0) as usize;
        let dt = if n_steps == 0 { dt_request } else { t_end / n_steps as f64 };
        let record_every = match self.get("integrator.record_every") {
            None => 1,
            Some(_) => self.count("integrator.record_every")?.max(1),
        };

        let initial = InitialData {
            preset: Preset::parse(self.get("initial.preset").unwrap_or("zero"))?,
            f0: HistoryPreset::parse(self.get("initial.f0").unwrap_or("zero"))?,
            f0_amp: match self.get("initial.f0_amp") {
                None => 1.0,
                Some(_) => self.real("initial.f0_amp")?,
            },
        };

        Ok(Setup {
            coefficient,
            delay,
            gains,
            mesh,
            ops,
            n_delta,
            dt,
            n_steps,
            t_end,
            record_every,
            initial,
            snapshots: self.get("outputs.snapshots").is_some(),
        })
    }
}

/// A validated, discretized problem ready to run.
#[derive(Debug, Clone)]
pub struct Setup {
    pub coefficient: CoefficientSpec,
    pub delay: DelaySpec,
    pub gains: GainSet,
    pub mesh: Mesh,
    pub ops: DiscreteOperators,
    pub n_delta: usize,
    /// Effective step, `t_end / n_steps`.
    pub dt: f64,
    pub n_steps: usize,
    pub t_end: f64,
    pub record_every: usize,
    pub initial: InitialData,
    pub snapshots: bool,
}
