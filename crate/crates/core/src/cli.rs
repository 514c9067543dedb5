//! Configuration-driven pipeline behind the `rollwave` binary.
//!
//! Every stage returns its artifacts as text together with the criteria it
//! decides; [`run_pipeline`] is the only place that touches the output
//! directory, so reruns with the same configuration produce identical files.

use crate::assembly::{k_minus, k_plus, mu, scaling_study, ApproxSolution, CutoffConfig, ScalingOptions};
use crate::corrector::{CorrectorOptions, CorrectorSet};
use crate::error::{Error, Result};
use crate::evans::{evans_check, EvansOptions};
use crate::green::{kernel_checks, verify_green_bounds, GreenOptions, ProjectionSet};
use crate::io;
use crate::profile::{decay_rate, solve_profile};
use crate::system::{
    build_dressler_rollwave, build_sawtooth_rollwave, eigen_decompose, DresslerParams, HyperbolicSystem, RollWave,
    SaintVenant,
};
use crate::viscous::{convergence_study, ViscousOptions};
use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Debug, Parser)]
#[command(name = "rollwave", version, about = "Viscous roll-wave approximation and certification pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the inviscid roll-wave and check Rankine-Hugoniot and Lax conditions.
    Rollwave(Overrides),
    /// Solve the viscous shock profile and fit its decay.
    Profile(Overrides),
    /// Build the outer and inner correctors and the shock shifts.
    Corrector(Overrides),
    /// Assemble the approximate solution at one viscosity and sample its residual.
    Assemble(Overrides),
    /// Residual norms over a viscosity family and their log-log slopes.
    ResidualScaling(Overrides),
    /// Resolved viscous runs compared with the inviscid and approximate solutions.
    ViscousConverge(Overrides),
    /// Numerical Green's function bounds of the linearised operator.
    GreenVerify(Overrides),
    /// Evans-function winding and derivative at the origin for the shock layer.
    EvansCheck(Overrides),
    /// Every stage and every acceptance criterion.
    Full(Overrides),
}

impl Command {
    pub fn parts(&self) -> (Stage, &Overrides) {
        match self {
            Command::Rollwave(o) => (Stage::Rollwave, o),
            Command::Profile(o) => (Stage::Profile, o),
            Command::Corrector(o) => (Stage::Corrector, o),
            Command::Assemble(o) => (Stage::Assemble, o),
            Command::ResidualScaling(o) => (Stage::ResidualScaling, o),
            Command::ViscousConverge(o) => (Stage::ViscousConverge, o),
            Command::GreenVerify(o) => (Stage::GreenVerify, o),
            Command::EvansCheck(o) => (Stage::EvansCheck, o),
            Command::Full(o) => (Stage::Full, o),
        }
    }
}

/// Command-line values; each maps onto the configuration key of the same
/// name and overrides the configuration file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Flat `key = value` file, or JSON object.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `sawtooth` or `dressler`.
    #[arg(long)]
    pub system: Option<String>,
    #[arg(long)]
    pub gamma: Option<String>,
    #[arg(long)]
    pub eps: Option<String>,
    /// Comma list, or a power range such as `2^-6..2^-12`.
    #[arg(long = "eps-list", allow_hyphen_values = true)]
    pub eps_list: Option<String>,
    #[arg(long)]
    pub eta: Option<String>,
    /// Cells per viscosity length, or `auto` (8).
    #[arg(long = "N-per-eps")]
    pub n_per_eps: Option<String>,
    #[arg(long = "tau-samples")]
    pub tau_samples: Option<String>,
    /// Outer contour radius, or `auto`.
    #[arg(long = "R")]
    pub radius: Option<String>,
    #[arg(long)]
    pub period: Option<String>,
    #[arg(long)]
    pub order: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// File name of the main CSV, relative to the output directory.
    #[arg(long)]
    pub out: Option<String>,
    #[arg(long = "out-dir")]
    pub out_dir: Option<String>,
    /// Any configuration key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl Overrides {
    fn entries(&self) -> Result<BTreeMap<String, String>> {
        let mut map = BTreeMap::new();
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{s}`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let flags = [
            ("system", &self.system),
            ("gamma", &self.gamma),
            ("eps", &self.eps),
            ("eps_list", &self.eps_list),
            ("eta", &self.eta),
            ("N_per_eps", &self.n_per_eps),
            ("tau_samples", &self.tau_samples),
            ("R", &self.radius),
            ("period", &self.period),
            ("order", &self.order),
            ("seed", &self.seed),
            ("out", &self.out),
            ("out_dir", &self.out_dir),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                map.insert(k.to_string(), v.clone());
            }
        }
        Ok(map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Rollwave,
    Profile,
    Corrector,
    Assemble,
    ResidualScaling,
    ViscousConverge,
    GreenVerify,
    EvansCheck,
    Full,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Rollwave => "rollwave",
            Stage::Profile => "profile",
            Stage::Corrector => "corrector",
            Stage::Assemble => "assemble",
            Stage::ResidualScaling => "residual-scaling",
            Stage::ViscousConverge => "viscous-converge",
            Stage::GreenVerify => "green-verify",
            Stage::EvansCheck => "evans-check",
            Stage::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Sawtooth,
    Dressler,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub system: SystemKind,
    /// Wave period; `None` uses the stage default (sawtooth: 12 for residual
    /// scaling, 2 elsewhere; Dressler: 20).
    pub period: Option<f64>,
    /// Sawtooth wave speed.
    pub speed: f64,
    pub t_star: Option<f64>,
    pub g_cos: f64,
    pub g_sin: f64,
    pub c_f: f64,
    pub sonic_depth: f64,
    pub dressler_speed: Option<f64>,
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
    /// Viscosities of the convergence and Green stages of `full`.
    pub conv_eps_list: Vec<f64>,
    pub eta: f64,
    /// `None` is `auto` (8 cells per `ε`).
    pub n_per_eps: Option<usize>,
    pub order: usize,
    pub tau_samples: usize,
    pub radius: Option<f64>,
    /// Allowed max/min ratio of the Green's function bounds.
    pub band: f64,
    pub out_dir: PathBuf,
    pub out: Option<String>,
    pub seed: u64,
}

const KEYS: [&str; 22] = [
    "system",
    "period",
    "speed",
    "t_star",
    "g_cos",
    "g_sin",
    "c_f",
    "sonic_depth",
    "dressler_speed",
    "gamma",
    "eps",
    "eps_list",
    "conv_eps_list",
    "eta",
    "N_per_eps",
    "order",
    "tau_samples",
    "R",
    "band",
    "out_dir",
    "out",
    "seed",
];

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{field}`: {msg}"))
}

/// A number, also in the form `b^e`.
pub fn parse_number(field: &str, s: &str) -> Result<f64> {
    let s = s.trim();
    let parsed = match s.split_once('^') {
        Some((b, e)) => match (b.trim().parse::<f64>(), e.trim().parse::<f64>()) {
            (Ok(b), Ok(e)) => Some(b.powf(e)),
            _ => None,
        },
        None => s.parse::<f64>().ok(),
    };
    match parsed {
        Some(v) if v.is_finite() => Ok(v),
        _ => Err(field_error(field, format!("cannot read `{s}` as a number"))),
    }
}

/// Comma-separated numbers, or `b^e1..b^e2` for every integer exponent in
/// between. The result must be strictly decreasing and inside `(0, 1)`.
pub fn parse_eps_list(field: &str, s: &str) -> Result<Vec<f64>> {
    let list = if let Some((a, b)) = s.split_once("..") {
        let split = |p: &str| -> Result<(f64, i32)> {
            let (base, e) = p
                .trim()
                .split_once('^')
                .ok_or_else(|| field_error(field, format!("range ends must look like 2^-6, got `{p}`")))?;
            let base = parse_number(field, base)?;
            let e = e
                .trim()
                .parse::<i32>()
                .map_err(|_| field_error(field, format!("range exponent `{e}` is not an integer")))?;
            Ok((base, e))
        };
        let ((b1, e1), (b2, e2)) = (split(a)?, split(b)?);
        if b1 != b2 {
            return Err(field_error(field, "range ends need the same base"));
        }
        let step = if e2 >= e1 { 1 } else { -1 };
        let mut v = Vec::new();
        let mut e = e1;
        loop {
            v.push(b1.powi(e));
            if e == e2 {
                break;
            }
            e += step;
        }
        v
    } else {
        s.split(',')
            .filter(|p| !p.trim().is_empty())
            .map(|p| parse_number(field, p))
            .collect::<Result<Vec<_>>>()?
    };
    if list.is_empty() {
        return Err(field_error(field, "empty list"));
    }
    if list.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
        return Err(field_error(field, "every viscosity must lie in (0, 1)"));
    }
    if list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(field_error(field, "viscosities must be strictly decreasing"));
    }
    Ok(list)
}

/// Flat `key = value` lines (`#` starts a comment), or a JSON object when
/// the text starts with `{`.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    if text.trim_start().starts_with('{') {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON configuration: {e}")))?;
        let obj = v
            .as_object()
            .ok_or_else(|| Error::Config("JSON configuration must be an object".into()))?;
        for (k, v) in obj {
            let s = match v {
                Value::Null => continue,
                Value::String(s) => s.clone(),
                Value::Array(items) => items
                    .iter()
                    .map(|i| match i {
                        Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            map.insert(k.clone(), s);
        }
        return Ok(map);
    }
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let d = DresslerParams::default();
        Self {
            system: SystemKind::Sawtooth,
            period: None,
            speed: 0.0,
            t_star: None,
            g_cos: d.g_cos,
            g_sin: d.g_sin,
            c_f: d.c_f,
            sonic_depth: d.sonic_depth,
            dressler_speed: None,
            gamma: None,
            eps: None,
            eps_list: None,
            conv_eps_list: vec![1e-2, 5e-3, 2.5e-3],
            eta: 0.5,
            n_per_eps: None,
            order: 2,
            tau_samples: 5,
            radius: None,
            band: 3.0,
            out_dir: PathBuf::from("rollwave-out"),
            out: None,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config(format!("unknown configuration key `{k}`")));
        }
        let mut c = Self::default();
        let num = |k: &str| map.get(k).map(|v| parse_number(k, v)).transpose();
        let auto = |k: &str| -> Result<Option<f64>> {
            match map.get(k) {
                Some(v) if v.trim() == "auto" => Ok(None),
                Some(v) => parse_number(k, v).map(Some),
                None => Ok(None),
            }
        };
        let count = |k: &str| -> Result<Option<usize>> {
            map.get(k)
                .map(|v| {
                    v.trim()
                        .parse::<usize>()
                        .map_err(|_| field_error(k, format!("expected a non-negative integer, got `{v}`")))
                })
                .transpose()
        };
        if let Some(s) = map.get("system") {
            c.system = match s.trim() {
                "sawtooth" => SystemKind::Sawtooth,
                "dressler" => SystemKind::Dressler,
                other => return Err(field_error("system", format!("expected sawtooth or dressler, got `{other}`"))),
            };
        }
        c.period = num("period")?;
        if let Some(p) = c.period {
            if p <= 0.0 {
                return Err(field_error("period", "must be positive"));
            }
        }
        c.speed = num("speed")?.unwrap_or(c.speed);
        c.t_star = num("t_star")?;
        if let Some(t) = c.t_star {
            if t <= 0.0 {
                return Err(field_error("t_star", "must be positive"));
            }
        }
        c.g_cos = num("g_cos")?.unwrap_or(c.g_cos);
        c.g_sin = num("g_sin")?.unwrap_or(c.g_sin);
        c.c_f = num("c_f")?.unwrap_or(c.c_f);
        c.sonic_depth = num("sonic_depth")?.unwrap_or(c.sonic_depth);
        c.dressler_speed = num("dressler_speed")?;
        c.gamma = num("gamma")?;
        if let Some(g) = c.gamma {
            CutoffConfig::new(g).map_err(|_| field_error("gamma", format!("must lie in (2/3, 1), got {g}")))?;
        }
        c.eps = num("eps")?;
        if let Some(e) = c.eps {
            if !(e > 0.0 && e < 1.0) {
                return Err(field_error("eps", format!("must lie in (0, 1), got {e}")));
            }
        }
        c.eps_list = map.get("eps_list").map(|v| parse_eps_list("eps_list", v)).transpose()?;
        if let Some(v) = map.get("conv_eps_list") {
            c.conv_eps_list = parse_eps_list("conv_eps_list", v)?;
        }
        c.eta = num("eta")?.unwrap_or(c.eta);
        if !(c.eta > 0.0 && c.eta < 1.0) {
            return Err(field_error("eta", format!("must lie in (0, 1), got {}", c.eta)));
        }
        c.n_per_eps = match map.get("N_per_eps").map(|s| s.trim()) {
            None | Some("auto") => None,
            Some(_) => count("N_per_eps")?,
        };
        if let Some(n) = c.n_per_eps {
            if n < 8 {
                return Err(field_error("N_per_eps", format!("at least 8 cells per eps are needed, got {n}")));
            }
        }
        c.order = count("order")?.unwrap_or(c.order);
        if c.order != 1 && c.order != 2 {
            return Err(field_error("order", format!("must be 1 or 2, got {}", c.order)));
        }
        c.tau_samples = count("tau_samples")?.unwrap_or(c.tau_samples);
        if c.tau_samples == 0 {
            return Err(field_error("tau_samples", "must be at least 1"));
        }
        c.radius = auto("R")?;
        if let Some(r) = c.radius {
            if r <= 0.0 {
                return Err(field_error("R", "must be positive"));
            }
        }
        c.band = num("band")?.unwrap_or(c.band);
        if c.band < 1.0 {
            return Err(field_error("band", "must be at least 1"));
        }
        if let Some(d) = map.get("out_dir") {
            c.out_dir = PathBuf::from(d);
        }
        c.out = map.get("out").cloned();
        c.seed = match map.get("seed") {
            Some(s) => s
                .trim()
                .parse()
                .map_err(|_| field_error("seed", format!("expected an unsigned integer, got `{s}`")))?,
            None => 0,
        };
        Ok(c)
    }

    pub fn gamma(&self) -> Result<f64> {
        self.gamma.ok_or_else(|| Error::Config("missing required field `gamma`".into()))
    }

    fn gamma_or_default(&self) -> f64 {
        self.gamma.unwrap_or(CutoffConfig::default().gamma)
    }

    fn eps_list(&self) -> Result<&[f64]> {
        self.eps_list
            .as_deref()
            .ok_or_else(|| Error::Config("missing required field `eps_list`".into()))
    }

    fn eps(&self) -> Result<f64> {
        self.eps.ok_or_else(|| Error::Config("missing required field `eps`".into()))
    }

    fn dressler(&self) -> DresslerParams {
        DresslerParams {
            g_cos: self.g_cos,
            g_sin: self.g_sin,
            c_f: self.c_f,
            sonic_depth: self.sonic_depth,
            speed: self.dressler_speed,
            period: self.period.unwrap_or(DresslerParams::default().period),
            t_star: self.t_star.unwrap_or(DresslerParams::default().t_star),
        }
    }

    /// The configured wave; `sawtooth_period` is the stage default for the
    /// sawtooth.
    pub fn rollwave(&self, sawtooth_period: f64) -> Result<RollWave> {
        match self.system {
            SystemKind::Sawtooth => {
                let mut rw = build_sawtooth_rollwave(self.period.unwrap_or(sawtooth_period), self.speed);
                if let Some(t) = self.t_star {
                    rw.t_star = t;
                }
                Ok(rw)
            }
            SystemKind::Dressler => build_dressler_rollwave(&self.dressler()).map_err(|e| e.context("system")),
        }
    }

    fn with_system(&self, system: SystemKind, period: Option<f64>) -> Self {
        Self {
            system,
            period,
            ..self.clone()
        }
    }
}

/// Configuration file (if any) overlaid with command-line values.
pub fn load_config(o: &Overrides) -> Result<ExperimentConfig> {
    let mut map = match &o.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read configuration {}: {e}", p.display())))?;
            parse_config_text(&text)?
        }
        None => BTreeMap::new(),
    };
    map.extend(o.entries()?);
    ExperimentConfig::from_map(&map)
}

#[derive(Debug, Clone, Serialize)]
pub struct Criterion {
    pub id: String,
    pub pass: bool,
    pub detail: Value,
}

impl Criterion {
    fn new(id: &str, pass: bool, detail: Value) -> Self {
        Self {
            id: id.to_string(),
            pass,
            detail,
        }
    }
}

/// Artifacts (file name, contents) and decisions of one stage.
#[derive(Debug, Clone, Default)]
pub struct StageOutput {
    pub files: Vec<(String, String)>,
    pub criteria: Vec<Criterion>,
    pub summary: Value,
}

impl StageOutput {
    fn json(&mut self, name: &str, value: &Value) {
        let mut text = serde_json::to_string_pretty(value).expect("JSON values always serialise");
        text.push('\n');
        self.files.push((name.to_string(), text));
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub criteria: BTreeMap<String, Criterion>,
    pub all_pass: bool,
    pub stages: BTreeMap<String, Value>,
    pub files: Vec<String>,
}

/// Run one stage, write its artifacts and `report.json` into the output
/// directory.
pub fn run_pipeline(stage: Stage, cfg: &ExperimentConfig) -> Result<Report> {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| field_error("out_dir", format!("cannot create {}: {e}", cfg.out_dir.display())))?;
    let (outputs, names) = match stage {
        Stage::Full => full(cfg)?,
        s => (vec![run_stage(s, cfg)?], vec![s.name().to_string()]),
    };
    let mut criteria = BTreeMap::new();
    let mut stages = BTreeMap::new();
    let mut files = Vec::new();
    for (out, name) in outputs.iter().zip(&names) {
        for (f, text) in &out.files {
            io::write_text(&cfg.out_dir.join(f), text)?;
            files.push(f.clone());
        }
        for c in &out.criteria {
            criteria.insert(c.id.clone(), c.clone());
        }
        stages.insert(name.clone(), out.summary.clone());
    }
    files.push("report.json".into());
    let report = Report {
        command: stage.name().to_string(),
        seed: cfg.seed,
        config: cfg.clone(),
        all_pass: criteria.values().all(|c| c.pass),
        criteria,
        stages,
        files,
    };
    io::write_json(
        &cfg.out_dir.join("report.json"),
        &serde_json::to_value(&report).expect("report serialises"),
    )?;
    Ok(report)
}

/// Compute one stage without writing anything.
pub fn run_stage(stage: Stage, cfg: &ExperimentConfig) -> Result<StageOutput> {
    match stage {
        Stage::Rollwave => stage_rollwave(cfg),
        Stage::Profile => stage_profile(cfg),
        Stage::Corrector => stage_corrector(cfg),
        Stage::Assemble => stage_assemble(cfg),
        Stage::ResidualScaling => stage_scaling(cfg),
        Stage::ViscousConverge => stage_viscous(cfg),
        Stage::GreenVerify => stage_green(cfg),
        Stage::EvansCheck => stage_evans(cfg),
        Stage::Full => Err(Error::Config("`full` is not a single stage".into())),
    }
}

fn main_csv(cfg: &ExperimentConfig, default: &str) -> String {
    cfg.out.clone().unwrap_or_else(|| default.to_string())
}

fn sidecar(csv: &str) -> String {
    match csv.strip_suffix(".csv") {
        Some(stem) => format!("{stem}.json"),
        None => format!("{csv}.json"),
    }
}

fn stage_rollwave(cfg: &ExperimentConfig) -> Result<StageOutput> {
    let rw = cfg.rollwave(2.0)?;
    let mut out = StageOutput::default();
    let name = main_csv(cfg, "rollwave.csv");
    out.files.push((name.clone(), rw.csv(512, 11)));
    let check = rw.check_invariants(41, 1e-10);
    let mut meta = rw.metadata_json();
    let detail = match &check {
        Ok(margin) => json!({ "lax_margin": margin }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    meta["invariants"] = detail.clone();
    out.json(&sidecar(&name), &meta);
    out.criteria.push(Criterion::new("rh_lax", check.is_ok(), detail));
    out.summary = meta;
    Ok(out)
}

/// Sup distance of the first profile component from
/// `c − (L/2) tanh(Lξ/4)`, the sawtooth's exact layer.
fn tanh_distance(profile: &crate::profile::ShockProfile, c: f64, l: f64) -> f64 {
    let n = 4000;
    (0..=n)
        .map(|i| {
            let xi = -profile.xi_max + 2.0 * profile.xi_max * i as f64 / n as f64;
            (profile.value(xi)[0] - (c - 0.5 * l * (0.25 * l * xi).tanh())).abs()
        })
        .fold(0.0, f64::max)
}

fn stage_profile(cfg: &ExperimentConfig) -> Result<StageOutput> {
    let rw = cfg.rollwave(2.0)?;
    let profile = solve_profile(&rw.system, &rw.u_minus(), &rw.u_plus(), rw.speed, 0.0).map_err(|e| e.context("profile"))?;
    let (omega, decay_const) = decay_rate(&profile).map_err(|e| e.context("profile"))?;
    let residual = profile.first_integral_residual();
    let mut out = StageOutput::default();
    let name = main_csv(cfg, "profile.csv");
    out.files.push((name.clone(), profile.csv()));
    let mut summary = json!({
        "u_minus": rw.u_minus().as_slice(),
        "u_plus": rw.u_plus().as_slice(),
        "speed": rw.speed,
        "xi_max": profile.xi_max,
        "omega": omega,
        "decay_const": decay_const,
        "first_integral_residual": residual,
    });
    match cfg.system {
        SystemKind::Sawtooth => {
            let sup = tanh_distance(&profile, rw.speed, rw.period);
            let ratio = omega / (0.5 * rw.period);
            summary["tanh_sup_error"] = json!(sup);
            summary["omega_ratio"] = json!(ratio);
            let pass = sup <= 1e-8 && residual <= 1e-8 && (0.95..=1.05).contains(&ratio);
            out.criteria.push(Criterion::new("profile_exactness", pass, summary.clone()));
        }
        SystemKind::Dressler => {
            let pass = residual <= 1e-8 && omega > 0.0;
            out.criteria.push(Criterion::new("profile_residual", pass, summary.clone()));
        }
    }
    out.json(&sidecar(&name), &summary);
    out.summary = summary;
    Ok(out)
}

/// Correctors of the requested order. Order 2 falls back to order 1 when
/// the inner source does not decay; the returned note records the fallback.
pub fn build_correctors(rw: &RollWave, order: usize) -> Result<(CorrectorSet, Option<String>)> {
    let opts = |order| CorrectorOptions {
        order,
        ..Default::default()
    };
    match CorrectorSet::build(rw, &opts(order)) {
        Err(e) if order == 2 && matches!(e.root(), Error::NoDecay(_)) => {
            let set = CorrectorSet::build(rw, &opts(1)).map_err(|e| e.context("corrector"))?;
            Ok((set, Some(format!("order 2 unavailable ({e}); using order 1"))))
        }
        r => r.map(|s| (s, None)).map_err(|e| e.context("corrector")),
    }
}

fn time_samples(t_star: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| t_star * i as f64 / (n - 1) as f64).collect()
}

fn stage_corrector(cfg: &ExperimentConfig) -> Result<StageOutput> {
    let rw = cfg.rollwave(2.0)?;
    let (set, fallback) = build_correctors(&rw, cfg.order)?;
    let ts = time_samples(set.t_star(), 21);
    let c1: Vec<Vec<f64>> = ts.iter().map(|&t| set.c1(t).as_slice().to_vec()).collect();
    let delta0_sup = ts.iter().map(|&t| set.delta0(t).abs()).fold(0.0, f64::max);
    let jump = ts.iter().map(|&t| set.jump_residual(t)).fold(0.0, f64::max);
    let order_used = if set.second.is_some() { 2 } else { 1 };
    let summary = json!({
        "order_requested": cfg.order,
        "order_used": order_used,
        "fallback": fallback,
        "k": set.k,
        "H_plus": set.h_plus.as_slice(),
        "H_minus": set.h_minus.as_slice(),
        "C1": c1,
        "times": ts,
        "delta0_sup": delta0_sup,
        "u1_sup": set.u1.sup_norm(),
        "matching_error": set.matching_error(),
        "jump_residual": jump,
        "outer_residual": set.outer_residual(50),
    });
    let mut out = StageOutput::default();
    let n = set.n();
    let name = main_csv(cfg, "corrector.csv");
    let header: Vec<String> = std::iter::once("xi".to_string()).chain((1..=n).map(|i| format!("V1_{i}"))).collect();
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let inner = io::numeric_csv(
        &header,
        (0..=800).map(|i| {
            let xi = -20.0 + 0.05 * i as f64;
            std::iter::once(xi).chain(set.v1(xi, 0.0)[0].iter().copied()).collect()
        }),
    );
    out.files.push((name.clone(), inner));
    let header: Vec<String> = ["x", "t"]
        .iter()
        .map(|s| s.to_string())
        .chain((1..=n).map(|i| format!("u1_{i}")))
        .collect();
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let l = rw.period;
    let outer = io::numeric_csv(
        &header,
        time_samples(set.t_star(), 5).into_iter().flat_map(|t| {
            let set = &set;
            (0..200).map(move |i| {
                let x = l * i as f64 / 200.0;
                [x, t].into_iter().chain(set.u1(x, t, 0).iter().copied()).collect()
            })
        }),
    );
    out.files.push(("corrector_outer.csv".into(), outer));
    match cfg.system {
        SystemKind::Sawtooth => {
            let target = 2.0 * 2f64.ln();
            let h_err = set
                .h_plus
                .iter()
                .chain(set.h_minus.iter())
                .map(|h| (h + target).abs())
                .fold(0.0, f64::max);
            let c_err = c1.iter().flatten().map(|c| (c - target).abs()).fold(0.0, f64::max);
            let u1_sup = set.u1.sup_norm();
            let pass = h_err <= 1e-6 && c_err <= 1e-6 && u1_sup <= 1e-10 && delta0_sup <= 1e-10;
            out.criteria.push(Criterion::new(
                "corrector_constants",
                pass,
                json!({ "H_error": h_err, "C_error": c_err, "u1_sup": u1_sup, "delta0_sup": delta0_sup }),
            ));
        }
        SystemKind::Dressler => {
            let pass = jump <= 1e-6;
            out.criteria.push(Criterion::new(
                "corrector_jump",
                pass,
                json!({ "jump_residual": jump, "matching_error": set.matching_error() }),
            ));
        }
    }
    out.json(&sidecar(&name), &summary);
    out.summary = summary;
    Ok(out)
}

fn approx_family(set: &Arc<CorrectorSet>, gamma: f64, eps: &[f64]) -> Result<Vec<ApproxSolution>> {
    let cutoff = CutoffConfig::new(gamma)?;
    eps.iter()
        .map(|&e| ApproxSolution::new(set.clone(), cutoff, e).map_err(|e| e.context("assembly")))
        .collect()
}

fn stage_assemble(cfg: &ExperimentConfig) -> Result<StageOutput> {
    let gamma = cfg.gamma()?;
    let eps = cfg.eps()?;
    let rw = cfg.rollwave(2.0)?;
    let (set, fallback) = build_correctors(&rw, cfg.order)?;
    let approx = approx_family(&Arc::new(set), gamma, &[eps])?.remove(0);
    let n = rw.system.n();
    let mut header = vec!["x".to_string(), "t".to_string()];
    header.extend((1..=n).map(|i| format!("u_{i}")));
    header.extend((1..=n).map(|i| format!("q_{i}")));
    let header: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let mut worst = 0.0f64;
    let mut rows = Vec::new();
    for t in time_samples(approx.correctors.t_star(), 3) {
        let frame = approx.at(t);
        for i in 0..800 {
            let x = rw.period * i as f64 / 800.0;
            let p = frame.eval(x);
            worst = worst.max(p.disagreement());
            rows.push([x, t].into_iter().chain(p.u.iter().copied()).chain(p.q.iter().copied()).collect());
        }
    }
    let mut out = StageOutput::default();
    let name = main_csv(cfg, "assemble.csv");
    out.files.push((name.clone(), io::numeric_csv(&header, rows)));
    let summary = json!({
        "eps": eps,
        "gamma": gamma,
        "order": approx.order(),
        "fallback": fallback,
        "min_phi_z": approx.min_phi_z,
        "max_disagreement": worst,
    });
    out.criteria.push(Criterion::new(
        "phi_monotone",
        approx.min_phi_z > 0.0,
        json!({ "min_phi_z": approx.min_phi_z }),
    ));
    out.criteria.push(Criterion::new(
        "residual_agreement",
        worst <= 1.0,
        json!({ "max_disagreement_in_tolerance_units": worst }),
    ));
    out.json(&sidecar(&name), &summary);
    out.summary = summary;
    Ok(out)
}

fn stage_scaling(cfg: &ExperimentConfig) -> Result<StageOutput> {
    let gamma = cfg.gamma()?;
    let eps = cfg.eps_list()?.to_vec();
    let rw = cfg.rollwave(12.0)?;
    let (set, fallback) = build_correctors(&rw, cfg.order)?;
    let set = Arc::new(set);
    let cutoff = CutoffConfig::new(gamma)?;
    let report = scaling_study(
        |e| ApproxSolution::new(set.clone(), cutoff, e),
        &eps,
        gamma,
        &ScalingOptions::default(),
    )
    .map_err(|e| e.context("assembly"))?;
    let mut csv = String::from("eps,norm_name,value\n");
    for s in &report.sets {
        for (norm, v) in s.entries() {
            csv += &io::csv_line(&[io::cell(s.eps), norm, io::cell(v)]);
        }
    }
    let mut out = StageOutput::default();
    let name = main_csv(cfg, "scaling.csv");
    out.files.push((name.clone(), csv));
    let summary = json!({
        "period": rw.period,
        "fallback": fallback,
        "pass": report.pass(),
        "verdicts": report.verdicts,
        "supports_exact": report.supports_exact,
        "max_disagreement": report.max_disagreement,
    });
    out.criteria.push(Criterion::new("residual_scaling", report.pass(), summary.clone()));
    out.json(&sidecar(&name), &summary);
    out.summary = summary;
    Ok(out)
}

fn stage_viscous(cfg: &ExperimentConfig) -> Result<StageOutput> {
    let eps = cfg.eps_list.clone().unwrap_or_else(|| cfg.conv_eps_list.clone());
    let rw = cfg.rollwave(2.0)?;
    let (set, fallback) = build_correctors(&rw, cfg.order)?;
    let set = Arc::new(set);
    let cutoff = CutoffConfig::new(cfg.gamma_or_default())?;
    let opts = ViscousOptions {
        refine: cfg.n_per_eps.map_or(1, |n| n.div_ceil(8)),
        ..Default::default()
    };
    let report = convergence_study(&rw, &eps, cfg.eta, &opts, |e| ApproxSolution::new(set.clone(), cutoff, e))
        .map_err(|e| e.context("viscous"))?;
    let mut out = StageOutput::default();
    let name = main_csv(cfg, "conv.csv");
    out.files.push((name.clone(), report.table()));
    let pass = report.check().is_ok() && report.away_ratio <= 0.25;
    let summary = json!({
        "period": rw.period,
        "fallback": fallback,
        "eta": report.eta,
        "monotone": report.monotone,
        "away_ratio": report.away_ratio,
        "app_l1_slope": report.app_l1_slope,
        "app_closer": report.app_closer,
        "rows": report.rows,
    });
    out.criteria.push(Criterion::new("viscous_convergence", pass, summary.clone()));
    out.json(&sidecar(&name), &summary);
    out.summary = summary;
    Ok(out)
}

fn stage_green(cfg: &ExperimentConfig) -> Result<StageOutput> {
    let eps = cfg.eps_list.clone().unwrap_or_else(|| cfg.conv_eps_list.clone());
    let rw = cfg.rollwave(2.0)?;
    let (set, fallback) = build_correctors(&rw, cfg.order)?;
    let family = approx_family(&Arc::new(set), cfg.gamma_or_default(), &eps)?;
    let report = verify_green_bounds(&family, cfg.band, &GreenOptions::default()).map_err(|e| e.context("green"))?;
    let checks = kernel_checks(eps[0]).map_err(|e| e.context("green"))?;
    let bound = report.check();
    let mut out = StageOutput::default();
    let name = main_csv(cfg, "green.csv");
    out.files.push((name.clone(), report.table()));
    let summary = json!({
        "period": rw.period,
        "fallback": fallback,
        "eps": report.eps,
        "sup_int_abs_G": report.sup_g,
        "sup_sqrt_eps_int_abs_Gz": report.sup_gz,
        "spread_G": report.spread_g,
        "spread_Gz": report.spread_gz,
        "band": report.band,
        "loglog_trend_Gz": report.trend_gz,
        "kernel_checks": checks,
    });
    out.criteria.push(Criterion::new("green_bound", bound.is_ok() && checks.pass(), summary.clone()));
    out.json(&sidecar(&name), &summary);
    out.summary = summary;
    Ok(out)
}

/// Evans rows for the configured wave; a nonzero winding or a degenerate
/// derivative is a failed row rather than an error.
fn evans_rows(rw: &RollWave, taus: &[f64], radius: Option<f64>) -> Result<(String, Vec<Value>, bool)> {
    let opts = EvansOptions {
        radius,
        ..Default::default()
    };
    let mut csv = String::from("tau,j,winding,abs_Dprime0\n");
    let mut rows = Vec::new();
    let mut pass = true;
    for &tau in taus {
        match evans_check(rw, &[tau], &opts) {
            Ok(found) => {
                for r in found {
                    let ok = r.winding == 0 && r.abs_dprime0 > 1e-6 && r.majda_liu.abs() > 1e-8;
                    pass &= ok;
                    csv += &io::csv_line(&[io::cell(r.tau), r.j.to_string(), r.winding.to_string(), io::cell(r.abs_dprime0)]);
                    rows.push(json!({ "pass": ok, "row": r }));
                }
            }
            Err(e) => match *e.root() {
                Error::UnstableSpectrum(w) => {
                    pass = false;
                    csv += &io::csv_line(&[io::cell(tau), "1".into(), w.to_string(), "NaN".into()]);
                    rows.push(json!({ "pass": false, "tau": tau, "error": e.to_string() }));
                }
                Error::DegenerateZero(d) => {
                    pass = false;
                    csv += &io::csv_line(&[io::cell(tau), "1".into(), "0".into(), io::cell(d)]);
                    rows.push(json!({ "pass": false, "tau": tau, "error": e.to_string() }));
                }
                _ => return Err(e.context("evans")),
            },
        }
    }
    Ok((csv, rows, pass))
}

fn stage_evans(cfg: &ExperimentConfig) -> Result<StageOutput> {
    let rw = cfg.rollwave(2.0)?;
    let taus = time_samples(rw.t_star, cfg.tau_samples);
    let (csv, rows, pass) = evans_rows(&rw, &taus, cfg.radius)?;
    let mut out = StageOutput::default();
    let name = main_csv(cfg, "evans.csv");
    out.files.push((name.clone(), csv));
    let summary = json!({ "system": rw.system.name(), "rows": rows });
    out.criteria.push(Criterion::new("evans_stability", pass, summary.clone()));
    out.json(&sidecar(&name), &summary);
    out.summary = summary;
    Ok(out)
}

/// `[a, a', a'']·[b, b', b'']` by the product rule.
fn product(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] * b[0], a[1] * b[0] + a[0] * b[1], a[2] * b[0] + 2.0 * a[1] * b[1] + a[0] * b[2]]
}

fn one_minus(a: [f64; 3]) -> [f64; 3] {
    [1.0 - a[0], -a[1], -a[2]]
}

/// Structural invariants on seeded random samples: RH/Lax, eigen
/// reconstruction, the bump identity, φ monotonicity, projection
/// completeness, residual agreement, and rerun determinism of the cheap
/// stages.
pub fn structural_invariants(cfg: &ExperimentConfig) -> Result<Criterion> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let saw = build_sawtooth_rollwave(2.0, cfg.speed);
    let dressler = build_dressler_rollwave(&cfg.dressler()).map_err(|e| e.context("system"))?;
    let mut detail = serde_json::Map::new();
    let mut pass = true;

    let mut margins = Vec::new();
    for rw in [&saw, &dressler] {
        match rw.check_invariants(41, 1e-10) {
            Ok(m) => margins.push(json!(m)),
            Err(e) => {
                pass = false;
                margins.push(json!(e.to_string()));
            }
        }
    }
    detail.insert("rh_lax_margins".into(), json!(margins));

    let sv = HyperbolicSystem::new(SaintVenant {
        g_cos: cfg.g_cos,
        g_sin: cfg.g_sin,
        c_f: cfg.c_f,
    });
    let mut eig = 0.0f64;
    for _ in 0..200 {
        let u = DVector::from_vec(vec![rng.gen_range(0.3..3.0), rng.gen_range(-2.0..4.0)]);
        let e = eigen_decompose(&sv, &u)?;
        let a = sv.df(&u);
        let back = &e.p * DMatrix::from_diagonal(&DVector::from_vec(e.lambdas.clone())) * &e.p_inv;
        eig = eig.max((back - &a).amax() / a.amax().max(1.0));
    }
    pass &= eig <= 1e-12;
    detail.insert("eigen_reconstruction".into(), json!(eig));

    let mut bump = 0.0f64;
    for _ in 0..2000 {
        let x = rng.gen_range(-3.0..3.0);
        let want = product(one_minus(k_plus(x)), one_minus(k_minus(x)));
        let got = mu(x);
        for d in 0..3 {
            bump = bump.max((got[d] - want[d]).abs());
        }
    }
    pass &= bump <= 1e-12;
    detail.insert("mu_identity".into(), json!(bump));

    let gamma = cfg.gamma_or_default();
    let mut min_phi_z = f64::INFINITY;
    let mut projection = 0.0f64;
    let mut agreement = 0.0f64;
    for rw in [&saw, &dressler] {
        let (set, _) = build_correctors(rw, 1)?;
        let approx = approx_family(&Arc::new(set), gamma, &[1e-2])?.remove(0);
        min_phi_z = min_phi_z.min(approx.min_phi_z);
        let t_star = approx.correctors.t_star();
        for _ in 0..100 {
            let t = rng.gen_range(0.0..t_star);
            let z = rng.gen_range(0.0..rw.period);
            projection = projection.max(ProjectionSet::at(rw, &approx.phi, t, z)?.defect());
            // Half the samples inside the matching zone, where both forms are busiest.
            let zs = [z, rw.shock_position(1, 0.0) + rng.gen_range(-3.0..3.0) * 1e-2f64.powf(gamma)];
            let frame = approx.at(t);
            for z in zs {
                agreement = agreement.max(frame.eval_z(z).disagreement());
            }
        }
    }
    pass &= min_phi_z > 0.0 && projection <= 1e-10 && agreement <= 1.0;
    detail.insert("min_phi_z".into(), json!(min_phi_z));
    detail.insert("projection_defect".into(), json!(projection));
    detail.insert("residual_disagreement_units".into(), json!(agreement));

    let probe = cfg.with_system(SystemKind::Sawtooth, Some(2.0));
    let mut same = true;
    for stage in [Stage::Rollwave, Stage::Profile, Stage::Corrector] {
        let a = run_stage(stage, &probe)?;
        let b = run_stage(stage, &probe)?;
        same &= a.files == b.files;
    }
    pass &= same;
    detail.insert("rerun_identical".into(), json!(same));
    Ok(Criterion::new("structural_invariants", pass, Value::Object(detail)))
}

fn rename(mut c: Criterion, id: &str) -> Criterion {
    c.id = id.to_string();
    c
}

fn single(out: &StageOutput) -> Criterion {
    out.criteria[0].clone()
}

/// Every acceptance criterion with its stage outputs.
fn full(cfg: &ExperimentConfig) -> Result<(Vec<StageOutput>, Vec<String>)> {
    cfg.gamma()?;
    cfg.eps_list()?;
    let mut outputs = Vec::new();
    let mut names = Vec::new();
    let mut plain = cfg.clone();
    plain.out = None;

    let rollwave = stage_rollwave(&plain)?;
    outputs.push(StageOutput {
        criteria: Vec::new(),
        ..rollwave
    });
    names.push("rollwave".to_string());

    let burgers = plain.with_system(SystemKind::Sawtooth, Some(2.0));
    let burgers = ExperimentConfig { speed: 0.0, ..burgers };
    let mut profile = stage_profile(&burgers)?;
    profile.criteria = vec![rename(single(&profile), "1_profile_exactness")];
    outputs.push(profile);
    names.push("profile".into());

    let saw = plain.with_system(SystemKind::Sawtooth, plain.period.filter(|_| plain.system == SystemKind::Sawtooth));
    let mut corrector = stage_corrector(&ExperimentConfig { order: 2, ..saw })?;
    corrector.criteria = vec![rename(single(&corrector), "2_corrector_constants")];
    outputs.push(corrector);
    names.push("corrector".into());

    let mut scaling = stage_scaling(&plain)?;
    scaling.criteria = vec![rename(single(&scaling), "3_residual_scaling")];
    outputs.push(scaling);
    names.push("residual-scaling".into());

    let conv_cfg = ExperimentConfig {
        eps_list: Some(plain.conv_eps_list.clone()),
        ..plain.clone()
    };
    let mut viscous = stage_viscous(&conv_cfg)?;
    viscous.criteria = vec![rename(single(&viscous), "4_viscous_convergence")];
    outputs.push(viscous);
    names.push("viscous-converge".into());

    let mut green = stage_green(&conv_cfg)?;
    green.criteria = vec![rename(single(&green), "5_green_bound")];
    outputs.push(green);
    names.push("green-verify".into());

    let saw_rw = build_sawtooth_rollwave(2.0, 0.0);
    let (burgers_csv, burgers_rows, burgers_pass) = evans_rows(&saw_rw, &[0.0], plain.radius)?;
    let dressler_rw = build_dressler_rollwave(&plain.dressler()).map_err(|e| e.context("system"))?;
    let taus = time_samples(dressler_rw.t_star, 5);
    let (dressler_csv, dressler_rows, dressler_pass) = evans_rows(&dressler_rw, &taus, plain.radius)?;
    let summary = json!({ "burgers": burgers_rows, "dressler": dressler_rows });
    let mut evans = StageOutput {
        files: vec![
            ("evans_burgers.csv".into(), burgers_csv),
            ("evans_dressler.csv".into(), dressler_csv),
        ],
        criteria: vec![Criterion::new("6_evans_stability", burgers_pass && dressler_pass, summary.clone())],
        summary: summary.clone(),
    };
    evans.json("evans.json", &summary);
    outputs.push(evans);
    names.push("evans-check".into());

    let invariants = rename(structural_invariants(&plain)?, "7_structural_invariants");
    outputs.push(StageOutput {
        files: Vec::new(),
        summary: invariants.detail.clone(),
        criteria: vec![invariants],
    });
    names.push("invariants".into());
    Ok((outputs, names))
}

/// `ROLLWAVE_THREADS` caps the worker pool.
pub fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ROLLWAVE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::Config(format!("ROLLWAVE_THREADS must be a positive integer, got `{v}`")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot size the thread pool: {e}")))?;
    }
    Ok(())
}

/// 0 all pass, 2 criteria failed, 3 configuration error, 4 numerical failure.
pub fn exit_code(result: &Result<Report>) -> i32 {
    match result {
        Ok(r) if r.all_pass => 0,
        Ok(_) => 2,
        Err(e) => match e.root() {
            Error::Config(_) => 3,
            _ => 4,
        },
    }
}

/// Parse, run and report; returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    let (stage, overrides) = cli.command.parts();
    let result = configure_threads()
        .and_then(|_| load_config(overrides))
        .and_then(|cfg| run_pipeline(stage, &cfg).map(|r| (r, cfg.out_dir)));
    match result {
        Ok((report, dir)) => {
            for c in report.criteria.values() {
                println!("{} {}", if c.pass { "PASS" } else { "FAIL" }, c.id);
            }
            println!("report: {}", Path::new(&dir).join("report.json").display());
            exit_code(&Ok(report))
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&Err(e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn power_range_expands_every_exponent() {
        let v = parse_eps_list("eps_list", "2^-6..2^-12").unwrap();
        assert_eq!(v.len(), 7);
        assert_eq!(v[0], 1.0 / 64.0);
        assert_eq!(v[6], 1.0 / 4096.0);
        assert_eq!(parse_eps_list("e", "1e-2, 5e-3,2.5e-3").unwrap(), vec![1e-2, 5e-3, 2.5e-3]);
    }

    #[test]
    fn increasing_lists_are_rejected() {
        let e = parse_eps_list("eps_list", "2^-12..2^-6").unwrap_err();
        assert!(e.to_string().contains("eps_list"), "{e}");
        assert!(parse_eps_list("eps_list", "0.1,0.1").is_err());
        assert!(parse_eps_list("eps_list", "2,1").is_err());
    }

    #[test]
    fn missing_gamma_names_the_field() {
        let cfg = ExperimentConfig::from_map(&map(&[("eps_list", "2^-6..2^-8")])).unwrap();
        let e = run_stage(Stage::ResidualScaling, &cfg).unwrap_err();
        assert!(matches!(e, Error::Config(_)));
        assert!(e.to_string().contains("`gamma`"), "{e}");
    }

    #[test]
    fn bad_values_name_their_field() {
        for (k, v) in [("gamma", "0.5"), ("eta", "1.5"), ("system", "euler"), ("order", "3"), ("N_per_eps", "4")] {
            let e = ExperimentConfig::from_map(&map(&[(k, v)])).unwrap_err();
            assert!(e.to_string().contains(&format!("`{k}`")), "{k}: {e}");
        }
        let e = ExperimentConfig::from_map(&map(&[("gama", "0.75")])).unwrap_err();
        assert!(e.to_string().contains("gama"));
    }

    #[test]
    fn key_value_and_json_agree() {
        let kv = parse_config_text("# comment\nsystem = dressler\ngamma = 0.8\neps_list = 1e-2, 5e-3\n").unwrap();
        let js = parse_config_text(r#"{"system": "dressler", "gamma": 0.8, "eps_list": [1e-2, 5e-3]}"#).unwrap();
        let a = ExperimentConfig::from_map(&kv).unwrap();
        let b = ExperimentConfig::from_map(&js).unwrap();
        assert_eq!(a.system, SystemKind::Dressler);
        assert_eq!(a.gamma, b.gamma);
        assert_eq!(a.eps_list, b.eps_list);
        assert!(parse_config_text("gamma 0.8").is_err());
    }

    #[test]
    fn command_line_values_override_the_file() {
        let o = Overrides {
            gamma: Some("0.9".into()),
            set: vec!["seed=7".into()],
            ..Default::default()
        };
        let mut m = map(&[("gamma", "0.7")]);
        m.extend(o.entries().unwrap());
        let c = ExperimentConfig::from_map(&m).unwrap();
        assert_eq!(c.gamma, Some(0.9));
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn bump_matches_the_cutoff_product() {
        for x in [-2.5, -1.7, -1.2, 0.0, 0.4, 1.3, 1.99, 2.2] {
            let want = product(one_minus(k_plus(x)), one_minus(k_minus(x)));
            let got = mu(x);
            for d in 0..3 {
                assert!((got[d] - want[d]).abs() < 1e-12, "x = {x}, order {d}");
            }
        }
    }

    #[test]
    fn exit_codes_follow_the_error_kind() {
        assert_eq!(exit_code(&Err(Error::Config("x".into()))), 3);
        assert_eq!(exit_code(&Err(Error::Blowup(1.0).context("viscous"))), 4);
    }
}
