//! Batch front-end: run configuration, command dispatch and CSV/JSON writers.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    default_nu_grid, doppler_sweep, loss_interval, pareto_sweep, uniform_grid, LossRule,
    ParetoOutcome, ParetoPoint,
};
use crate::crb::crb_pair;
use crate::error::Error;
use crate::linalg::{CMat, C64};
use crate::model::{
    generalized_barker_32, load_reference_code, model_matrices, p3_code, CodeVector, Interference,
    RadarScenario,
};
use crate::oracle::validation_battery;
use crate::solver::{
    benchmark_crb_code, benchmark_sinr_code, synthesize, SolverOptions, SynthesisResult,
};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

/// Complex number as serialized in configs and results.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexRecord {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for ComplexRecord {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InterferenceConfig {
    Exponential { rho: f64 },
    Explicit { matrix: Vec<Vec<ComplexRecord>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub pulses: usize,
    pub pri: f64,
    pub bandwidth: f64,
    pub pulse_width: f64,
    pub sample_step: f64,
    pub fast_samples: usize,
    pub amplitude_power: f64,
    pub normalized_doppler: f64,
    pub pfa: f64,
    pub interference: InterferenceConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let d = RadarScenario::default();
        let Interference::Exponential { rho } = d.interference else {
            unreachable!("default interference is exponential")
        };
        Self {
            pulses: d.pulses,
            pri: d.pri,
            bandwidth: d.bandwidth,
            pulse_width: d.pulse_width,
            sample_step: d.sample_step,
            fast_samples: d.fast_samples,
            amplitude_power: d.amplitude_power,
            normalized_doppler: d.normalized_doppler,
            pfa: d.pfa,
            interference: InterferenceConfig::Exponential { rho },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    /// Falls back to the command's own default when absent.
    pub beta: Option<f64>,
    pub zeta: Option<f64>,
    pub epsilon: f64,
    pub n_iter_max: usize,
    pub mu1: Option<f64>,
    pub mu2: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            beta: None,
            zeta: None,
            epsilon: o.epsilon,
            n_iter_max: o.n_iter_max,
            mu1: None,
            mu2: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// `"p3"` or `"generalized_barker"`.
    Builtin(String),
    File(PathBuf),
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec::Builtin("p3".into())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            start: -0.5,
            stop: 0.5,
            points: 1001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub betas: Vec<f64>,
    pub zetas: Vec<f64>,
    pub nu_grid: GridSpec,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            betas: vec![0.0, 1e-4, 1e-3, 1e-2, 0.1, 1.0],
            zetas: vec![0.1, 0.4, 1.0],
            nu_grid: GridSpec::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Files are written here; results go to stdout when absent.
    pub directory: Option<PathBuf>,
    pub format: Format,
}

/// A complete batch run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub scenario: ScenarioConfig,
    pub solver: SolverSection,
    pub reference: ReferenceSpec,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioConfig::default(),
            solver: SolverSection::default(),
            reference: ReferenceSpec::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
            seed: 0,
        }
    }
}

/// Failure of a command, carrying its exit code.
#[derive(Debug)]
pub struct CommandError {
    pub kind: &'static str,
    pub message: String,
}

impl CommandError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            kind: "config",
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            "config" => EXIT_CONFIG,
            "validation" => EXIT_VALIDATION,
            _ => EXIT_SOLVER,
        }
    }

    pub fn record(&self) -> Value {
        json!({ "error": { "kind": self.kind, "message": self.message } })
    }
}

fn scenario_error(e: Error) -> CommandError {
    match e {
        Error::InvalidInput { field, reason } => {
            CommandError::config(format!("scenario.{field}: {reason}"))
        }
        Error::IllConditioned { .. } => CommandError::config(format!("scenario.interference: {e}")),
        other => CommandError::config(other.to_string()),
    }
}

fn solver_error(e: Error) -> CommandError {
    match e {
        Error::InvalidInput { field, reason } => {
            CommandError::config(format!("solver.{field}: {reason}"))
        }
        other => CommandError {
            kind: "solver",
            message: other.to_string(),
        },
    }
}

impl RunConfig {
    /// Parse JSON text, reporting the line and column of syntax or schema errors.
    pub fn from_json(text: &str, origin: &Path) -> Result<Self, CommandError> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| CommandError::config(format!("{}: {e}", origin.display())))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(CommandError::config(format!(
                "schema_version: unsupported version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            )));
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CommandError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CommandError::config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path)
    }

    fn check(&self) -> Result<(), CommandError> {
        self.scenario()?;
        let s = &self.solver;
        if let Some(b) = s.beta {
            if !(0.0..=1.0).contains(&b) {
                return Err(CommandError::config(format!(
                    "solver.beta: must lie in [0, 1], got {b}"
                )));
            }
        }
        if let Some(z) = s.zeta {
            if !(0.0..=2.0).contains(&z) {
                return Err(CommandError::config(format!(
                    "solver.zeta: must lie in [0, 2], got {z}"
                )));
            }
        }
        if !(s.epsilon >= 0.0 && s.epsilon.is_finite()) {
            return Err(CommandError::config(
                "solver.epsilon: must be finite and nonnegative",
            ));
        }
        for (field, v) in [("solver.mu1", s.mu1), ("solver.mu2", s.mu2)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(CommandError::config(format!(
                        "{field}: must be finite and nonnegative"
                    )));
                }
            }
        }
        for (k, b) in self.sweep.betas.iter().enumerate() {
            if !(0.0..=1.0).contains(b) {
                return Err(CommandError::config(format!(
                    "sweep.betas[{k}]: must lie in [0, 1], got {b}"
                )));
            }
        }
        for (k, z) in self.sweep.zetas.iter().enumerate() {
            if !(0.0..=2.0).contains(z) {
                return Err(CommandError::config(format!(
                    "sweep.zetas[{k}]: must lie in [0, 2], got {z}"
                )));
            }
        }
        let g = &self.sweep.nu_grid;
        if g.points == 0
            || !(-0.5..=0.5).contains(&g.start)
            || !(-0.5..=0.5).contains(&g.stop)
            || g.start > g.stop
        {
            return Err(CommandError::config(
                "sweep.nu_grid: need points >= 1 and -0.5 <= start <= stop <= 0.5",
            ));
        }
        if let ReferenceSpec::Builtin(name) = &self.reference {
            if name != "p3" && name != "generalized_barker" {
                return Err(CommandError::config(format!(
                    "reference.builtin: unknown code \"{name}\" (expected \"p3\" or \"generalized_barker\")"
                )));
            }
        }
        Ok(())
    }

    pub fn scenario(&self) -> Result<RadarScenario, CommandError> {
        let s = &self.scenario;
        let interference = match &s.interference {
            InterferenceConfig::Exponential { rho } => Interference::Exponential { rho: *rho },
            InterferenceConfig::Explicit { matrix } => {
                let n = matrix.len();
                if let Some((row, r)) = matrix.iter().enumerate().find(|(_, r)| r.len() != n) {
                    return Err(CommandError::config(format!(
                        "scenario.interference.explicit.matrix[{row}]: expected {n} entries, found {}",
                        r.len()
                    )));
                }
                Interference::Explicit(CMat::from_fn(n, n, |i, j| {
                    C64::new(matrix[i][j].re, matrix[i][j].im)
                }))
            }
        };
        let sc = RadarScenario {
            pulses: s.pulses,
            pri: s.pri,
            bandwidth: s.bandwidth,
            pulse_width: s.pulse_width,
            sample_step: s.sample_step,
            fast_samples: s.fast_samples,
            amplitude_power: s.amplitude_power,
            normalized_doppler: s.normalized_doppler,
            pfa: s.pfa,
            interference,
        };
        sc.validate().map_err(scenario_error)?;
        Ok(sc)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            epsilon: self.solver.epsilon,
            n_iter_max: self.solver.n_iter_max,
            mu1: self.solver.mu1,
            mu2: self.solver.mu2,
        }
    }

    /// Reference code and a short label for it.
    pub fn reference_code(&self, pulses: usize) -> Result<(CodeVector, String), CommandError> {
        let (code, label) = match &self.reference {
            ReferenceSpec::Builtin(name) if name == "p3" => (p3_code(pulses), "p3".to_string()),
            ReferenceSpec::Builtin(_) => {
                (generalized_barker_32(), "generalized_barker".to_string())
            }
            ReferenceSpec::File(path) => {
                let r = load_reference_code(path)
                    .map_err(|e| CommandError::config(format!("reference.file: {e}")))?;
                (r.code, path.display().to_string())
            }
        };
        if code.len() != pulses {
            return Err(CommandError::config(format!(
                "reference: code has {} entries but scenario.pulses is {pulses}",
                code.len()
            )));
        }
        Ok((code, label))
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "radcode",
    version,
    about = "Radar code synthesis for joint detection and delay-Doppler estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CommandKind {
    Synthesize,
    Pareto,
    Doppler,
    Validate,
    Benchmark,
}

#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// SINR/CRB weight in [0, 1], overriding the config.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Similarity level in [0, 2], overriding the config.
    #[arg(long)]
    pub zeta: Option<f64>,
    /// Seed for Monte-Carlo and random probes.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output format, csv by default.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design one code and report its figures of merit.
    Synthesize(CommonArgs),
    /// Sweep the weight to trace SINR against inverse det(CRB).
    Pareto(CommonArgs),
    /// Doppler-mismatch ratios of a designed code and its reference.
    Doppler(CommonArgs),
    /// Run the numerical cross-check battery.
    Validate(CommonArgs),
    /// SINR-optimal and CRB-optimal benchmark codes.
    Benchmark(CommonArgs),
}

/// A CSV table with a units comment row.
#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub units: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str, units: &str, header: &[&'static str]) -> Self {
        Self {
            name,
            units: units.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        let body =
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields");
        format!("# units: {}\n{body}", self.units)
    }
}

/// Result of one command: a JSON record plus the equivalent CSV tables.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub record: Value,
    pub tables: Vec<Table>,
}

fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else if x == 0.0 || (1e-4..1e7).contains(&x.abs()) || x.is_infinite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn code_json(c: &CodeVector) -> Value {
    json!(c
        .entries()
        .iter()
        .map(|z| ComplexRecord::from(*z))
        .collect::<Vec<_>>())
}

fn code_table(name: &'static str, c: &CodeVector) -> Table {
    let mut t = Table::new(name, "index=1, re=1, im=1", &["index", "re", "im"]);
    for (k, z) in c.entries().iter().enumerate() {
        t.rows.push(vec![k.to_string(), num(z.re), num(z.im)]);
    }
    t
}

fn synthesis_json(r: &SynthesisResult) -> Value {
    json!({
        "beta": r.params.beta,
        "zeta": r.params.zeta,
        "mu1": r.params.mu1,
        "mu2": r.params.mu2,
        "upsilon": r.upsilon,
        "upsilon_db": r.upsilon_db,
        "objective": r.augmented,
        "objective_db": r.augmented_db,
        "selected_block": r.selected_block,
        "sinr": r.sinr,
        "sinr_db": r.sinr_db,
        "crb_tau": r.crb.crb_tau,
        "crb_fd": r.crb.crb_fd,
        "det_crb": r.crb.det,
        "pd": r.pd,
        "papr": r.papr,
        "isl_db": r.isl_db,
        "iterations": r.trace.iterations(),
        "terminated_by": r.trace.terminated_by.as_str(),
        "code": code_json(&r.code),
    })
}

const RESULT_UNITS: &str = "beta=1, zeta=1, mu1=1, mu2=1, upsilon=1, upsilon_db=dB (20log10), objective=1, \
objective_db=dB (20log10), sinr_db=dB, crb_tau=s^2, crb_fd=Hz^2, det_crb=s^2*Hz^2, pd=1, papr=1, isl_db=dB, iterations=1";
const RESULT_HEADER: [&str; 17] = [
    "beta",
    "zeta",
    "mu1",
    "mu2",
    "upsilon",
    "upsilon_db",
    "objective",
    "objective_db",
    "sinr_db",
    "crb_tau",
    "crb_fd",
    "det_crb",
    "pd",
    "papr",
    "isl_db",
    "iterations",
    "terminated_by",
];

fn synthesis_row(r: &SynthesisResult) -> Vec<String> {
    vec![
        num(r.params.beta),
        num(r.params.zeta),
        num(r.params.mu1),
        num(r.params.mu2),
        num(r.upsilon),
        num(r.upsilon_db),
        num(r.augmented),
        num(r.augmented_db),
        num(r.sinr_db),
        num(r.crb.crb_tau),
        num(r.crb.crb_fd),
        num(r.crb.det),
        num(r.pd),
        num(r.papr),
        num(r.isl_db),
        r.trace.iterations().to_string(),
        r.trace.terminated_by.as_str().to_string(),
    ]
}

/// Command-line overrides applied on top of a configuration.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub beta: Option<f64>,
    pub zeta: Option<f64>,
    pub seed: Option<u64>,
}

fn weights(
    cfg: &RunConfig,
    ov: &Overrides,
    beta: f64,
    zeta: f64,
) -> Result<(f64, f64), CommandError> {
    let b = ov.beta.or(cfg.solver.beta).unwrap_or(beta);
    let z = ov.zeta.or(cfg.solver.zeta).unwrap_or(zeta);
    if !(0.0..=1.0).contains(&b) {
        return Err(CommandError::config(format!(
            "beta: must lie in [0, 1], got {b}"
        )));
    }
    if !(0.0..=2.0).contains(&z) {
        return Err(CommandError::config(format!(
            "zeta: must lie in [0, 2], got {z}"
        )));
    }
    Ok((b, z))
}

pub fn cmd_synthesize(cfg: &RunConfig, ov: &Overrides) -> Result<Report, CommandError> {
    let scenario = cfg.scenario()?;
    let (beta, zeta) = weights(cfg, ov, 0.0, 0.1)?;
    let (reference, label) = cfg.reference_code(scenario.pulses)?;
    let r = synthesize(&scenario, beta, zeta, &reference, &cfg.solver_options())
        .map_err(solver_error)?;
    let mut record = synthesis_json(&r);
    record["command"] = json!("synthesize");
    record["schema_version"] = json!(SCHEMA_VERSION);
    record["reference"] = json!(label);
    record["seed"] = json!(ov.seed.unwrap_or(cfg.seed));
    record["trace"] = json!({ "upsilon": r.trace.upsilon, "chosen_block": r.trace.chosen_block });
    let mut result = Table::new("result", RESULT_UNITS, &RESULT_HEADER);
    result.rows.push(synthesis_row(&r));
    let mut trace = Table::new(
        "trace",
        "iteration=1, upsilon=1, upsilon_db=dB (20log10), block=1",
        &["iteration", "upsilon", "upsilon_db", "block"],
    );
    for (n, v) in r.trace.upsilon.iter().enumerate() {
        let block = if n == 0 {
            String::new()
        } else {
            r.trace.chosen_block[n - 1].to_string()
        };
        trace.rows.push(vec![
            n.to_string(),
            num(*v),
            num(crate::solver::objective_db(*v)),
            block,
        ]);
    }
    Ok(Report {
        command: "synthesize",
        record,
        tables: vec![result, code_table("code", &r.code), trace],
    })
}

const PARETO_HEADER: [&str; 9] = [
    "label",
    "beta",
    "zeta",
    "sinr_db",
    "inv_det_crb",
    "pd",
    "papr",
    "isl_db",
    "status",
];
const PARETO_UNITS: &str =
    "label=text, beta=1, zeta=1, sinr_db=dB, inv_det_crb=1/(s^2*Hz^2), pd=1, papr=1, isl_db=dB, status=text";

fn pareto_row(p: &ParetoPoint) -> Vec<String> {
    vec![
        p.label.clone(),
        opt(p.beta),
        opt(p.zeta),
        num(p.sinr_db),
        num(p.inv_det_crb),
        num(p.pd),
        num(p.papr),
        num(p.isl_db),
        "ok".into(),
    ]
}

fn pareto_json(p: &ParetoPoint) -> Value {
    json!({
        "label": p.label, "beta": p.beta, "zeta": p.zeta, "sinr_db": p.sinr_db,
        "inv_det_crb": p.inv_det_crb, "pd": p.pd, "papr": p.papr, "isl_db": p.isl_db, "status": "ok",
        "code": code_json(&p.code),
    })
}

pub fn cmd_pareto(cfg: &RunConfig, ov: &Overrides) -> Result<Report, CommandError> {
    let scenario = cfg.scenario()?;
    let (reference, label) = cfg.reference_code(scenario.pulses)?;
    let zetas: Vec<f64> = match ov.zeta {
        Some(z) => vec![z],
        None => cfg.sweep.zetas.clone(),
    };
    let betas: Vec<f64> = match ov.beta {
        Some(b) => vec![b],
        None => cfg.sweep.betas.clone(),
    };
    let options = cfg.solver_options();
    let sweeps: Vec<Vec<ParetoOutcome>> = zetas
        .par_iter()
        .map(|&z| pareto_sweep(&betas, z, &scenario, &reference, &options))
        .collect::<Result<_, _>>()
        .map_err(solver_error)?;
    let mats = model_matrices(&scenario, scenario.normalized_doppler).map_err(scenario_error)?;
    let mut fixed = vec![("p3", p3_code(scenario.pulses))];
    if scenario.pulses == 32 {
        fixed.push(("generalized_barker", generalized_barker_32()));
    }
    let mut table = Table::new("pareto", PARETO_UNITS, &PARETO_HEADER);
    let mut rows = Vec::new();
    for o in sweeps.iter().flatten() {
        match &o.point {
            Ok(p) => {
                table.rows.push(pareto_row(p));
                rows.push(pareto_json(p));
            }
            Err(msg) => {
                let mut r = vec![String::new(); PARETO_HEADER.len()];
                r[0] = "designed".into();
                r[1] = num(o.beta);
                r[2] = num(o.zeta);
                r[8] = format!("failed: {msg}");
                table.rows.push(r);
                rows.push(json!({ "label": "designed", "beta": o.beta, "zeta": o.zeta, "status": "failed", "error": msg }));
            }
        }
    }
    for (name, code) in fixed {
        match ParetoPoint::from_code(name, &code, &mats, &scenario) {
            Ok(p) => {
                table.rows.push(pareto_row(&p));
                rows.push(pareto_json(&p));
            }
            Err(e) => {
                let mut r = vec![String::new(); PARETO_HEADER.len()];
                r[0] = name.into();
                r[8] = format!("failed: {e}");
                table.rows.push(r);
            }
        }
    }
    Ok(Report {
        command: "pareto",
        record: json!({
            "command": "pareto", "schema_version": SCHEMA_VERSION, "reference": label, "points": rows,
        }),
        tables: vec![table],
    })
}

pub fn cmd_doppler(cfg: &RunConfig, ov: &Overrides) -> Result<Report, CommandError> {
    let scenario = cfg.scenario()?;
    let (beta, zeta) = weights(cfg, ov, 0.01, 0.4)?;
    let (reference, label) = cfg.reference_code(scenario.pulses)?;
    let designed = synthesize(&scenario, beta, zeta, &reference, &cfg.solver_options())
        .map_err(solver_error)?;
    let g = &cfg.sweep.nu_grid;
    let grid = if *g == GridSpec::default() {
        default_nu_grid()
    } else {
        uniform_grid(g.start, g.stop, g.points)
    };
    let sweep =
        doppler_sweep(&designed.code, &reference, &scenario, &grid).map_err(solver_error)?;
    let rule = LossRule::default();
    let interval = |c| loss_interval(c, &sweep.nu_grid, scenario.normalized_doppler, &rule);
    let designed_span = interval(&sweep.designed);
    let reference_span = interval(&sweep.reference);
    let mut table = Table::new(
        "doppler",
        "nu=1 (f_d*T_r); all ratios dimensionless, normalized by the designed code at the design Doppler",
        &[
            "nu",
            "designed_tau_ratio",
            "designed_fd_ratio",
            "designed_pd_ratio",
            "designed_degenerate",
            "reference_tau_ratio",
            "reference_fd_ratio",
            "reference_pd_ratio",
            "reference_degenerate",
        ],
    );
    for k in 0..sweep.nu_grid.len() {
        let d = &sweep.designed;
        let r = &sweep.reference;
        table.rows.push(vec![
            num(sweep.nu_grid[k]),
            num(d.tau[k]),
            num(d.fd[k]),
            num(d.pd[k]),
            d.degenerate[k].to_string(),
            num(r.tau[k]),
            num(r.fd[k]),
            num(r.pd[k]),
            r.degenerate[k].to_string(),
        ]);
    }
    let mut summary = Table::new(
        "doppler_summary",
        "code=text, nu_low=1, nu_high=1 (span where CRB growth <= 10% and Pd ratio >= 0.9)",
        &["code", "nu_low", "nu_high"],
    );
    for (name, span) in [("designed", designed_span), ("reference", reference_span)] {
        summary.rows.push(vec![
            name.into(),
            opt(span.map(|s| s.0)),
            opt(span.map(|s| s.1)),
        ]);
    }
    let span_json = |s: Option<(f64, f64)>| s.map(|(a, b)| json!([a, b]));
    Ok(Report {
        command: "doppler",
        record: json!({
            "command": "doppler",
            "schema_version": SCHEMA_VERSION,
            "reference": label,
            "beta": beta,
            "zeta": zeta,
            "design_nu": scenario.normalized_doppler,
            "designed_interval": span_json(designed_span),
            "reference_interval": span_json(reference_span),
            "nu": sweep.nu_grid,
            "designed": { "tau": sweep.designed.tau, "fd": sweep.designed.fd, "pd": sweep.designed.pd },
            "reference_curves": { "tau": sweep.reference.tau, "fd": sweep.reference.fd, "pd": sweep.reference.pd },
            "code": code_json(&designed.code),
        }),
        tables: vec![table, summary],
    })
}

pub fn cmd_validate(cfg: &RunConfig, ov: &Overrides) -> Result<Report, CommandError> {
    let scenario = cfg.scenario()?;
    let seed = ov.seed.unwrap_or(cfg.seed);
    let checks = validation_battery(&scenario, seed).map_err(solver_error)?;
    let mut table = Table::new(
        "validate",
        "check=text, passed=bool, detail=text",
        &["check", "passed", "detail"],
    );
    for c in &checks {
        table.rows.push(vec![
            c.name.to_string(),
            c.passed.to_string(),
            c.detail.clone(),
        ]);
    }
    let all = checks.iter().all(|c| c.passed);
    Ok(Report {
        command: "validate",
        record: json!({
            "command": "validate",
            "schema_version": SCHEMA_VERSION,
            "seed": seed,
            "passed": all,
            "checks": checks.iter().map(|c| json!({"check": c.name, "passed": c.passed, "detail": c.detail})).collect::<Vec<_>>(),
        }),
        tables: vec![table],
    })
}

pub fn cmd_benchmark(cfg: &RunConfig, _ov: &Overrides) -> Result<Report, CommandError> {
    let scenario = cfg.scenario()?;
    let mats = model_matrices(&scenario, scenario.normalized_doppler).map_err(scenario_error)?;
    let sinr_code = benchmark_sinr_code(&mats);
    let sinr_point = ParetoPoint::from_code("sinr_benchmark", &sinr_code, &mats, &scenario)
        .map_err(solver_error)?;
    let sinr_crb = crb_pair(&sinr_code, &mats, &scenario).map_err(solver_error)?;
    let crb_run = benchmark_crb_code(&scenario, &mats).map_err(solver_error)?;
    let mut table = Table::new(
        "benchmark",
        "pd_bm=1, crb_tau_bm=s^2, crb_fd_bm=Hz^2, det_crb_bm=s^2*Hz^2",
        &["pd_bm", "crb_tau_bm", "crb_fd_bm", "det_crb_bm"],
    );
    table.rows.push(vec![
        num(sinr_point.pd),
        num(sinr_crb.crb_tau),
        num(crb_run.crb.crb_fd),
        num(crb_run.crb.det),
    ]);
    Ok(Report {
        command: "benchmark",
        record: json!({
            "command": "benchmark",
            "schema_version": SCHEMA_VERSION,
            "pd_bm": sinr_point.pd,
            "crb_tau_bm": sinr_crb.crb_tau,
            "crb_fd_bm": crb_run.crb.crb_fd,
            "det_crb_bm": crb_run.crb.det,
            "sinr_benchmark": pareto_json(&sinr_point),
            "crb_benchmark": synthesis_json(&crb_run),
        }),
        tables: vec![
            table,
            code_table("sinr_benchmark_code", &sinr_code),
            code_table("crb_benchmark_code", &crb_run.code),
        ],
    })
}

/// Render a report in `format`, either into `dir` or as one text blob.
pub fn emit(report: &Report, format: Format, dir: Option<&Path>) -> Result<String, CommandError> {
    let io = |p: &Path, e: std::io::Error| CommandError {
        kind: "io",
        message: format!("{}: {e}", p.display()),
    };
    let json_text =
        || serde_json::to_string_pretty(&report.record).expect("serializable record") + "\n";
    match dir {
        None => Ok(match format {
            Format::Json => json_text(),
            Format::Csv => {
                let mut s = String::new();
                for (k, t) in report.tables.iter().enumerate() {
                    if k > 0 {
                        s.push('\n');
                    }
                    let _ = writeln!(s, "# table: {}", t.name);
                    s.push_str(&t.to_csv());
                }
                s
            }
        }),
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
            let mut written = String::new();
            match format {
                Format::Json => {
                    let p = dir.join(format!("{}.json", report.command));
                    fs::write(&p, json_text()).map_err(|e| io(&p, e))?;
                    let _ = writeln!(written, "{}", p.display());
                }
                Format::Csv => {
                    for t in &report.tables {
                        let p = dir.join(format!("{}.csv", t.name));
                        fs::write(&p, t.to_csv()).map_err(|e| io(&p, e))?;
                        let _ = writeln!(written, "{}", p.display());
                    }
                }
            }
            Ok(written)
        }
    }
}

/// Parse arguments, run the command, print results; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => {
            use std::io::Write;
            // A closed pipe downstream is not an error of ours.
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("{}", e.record());
            e.exit_code()
        }
    }
}

/// Run a parsed command and return what would be printed on success.
pub fn execute(cli: &Cli) -> Result<String, CommandError> {
    let (kind, args) = match &cli.command {
        Command::Synthesize(a) => (CommandKind::Synthesize, a),
        Command::Pareto(a) => (CommandKind::Pareto, a),
        Command::Doppler(a) => (CommandKind::Doppler, a),
        Command::Validate(a) => (CommandKind::Validate, a),
        Command::Benchmark(a) => (CommandKind::Benchmark, a),
    };
    let cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let ov = Overrides {
        beta: args.beta,
        zeta: args.zeta,
        seed: args.seed,
    };
    let report = match kind {
        CommandKind::Synthesize => cmd_synthesize(&cfg, &ov)?,
        CommandKind::Pareto => cmd_pareto(&cfg, &ov)?,
        CommandKind::Doppler => cmd_doppler(&cfg, &ov)?,
        CommandKind::Validate => cmd_validate(&cfg, &ov)?,
        CommandKind::Benchmark => cmd_benchmark(&cfg, &ov)?,
    };
    let format = args.format.unwrap_or(cfg.output.format);
    let dir = args.out.as_deref().or(cfg.output.directory.as_deref());
    let text = emit(&report, format, dir)?;
    if kind == CommandKind::Validate && report.record["passed"] == json!(false) {
        return Err(CommandError {
            kind: "validation",
            message: format!("one or more checks failed\n{text}"),
        });
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = RunConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = RunConfig::from_json(&text, Path::new("mem")).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn empty_object_is_default() {
        let cfg = RunConfig::from_json("{}", Path::new("mem")).unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_field_reports_position() {
        let err = RunConfig::from_json(
            "{\n  \"scenario\": {\"pulsez\": 3}\n}",
            Path::new("cfg.json"),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), EXIT_CONFIG);
        assert!(err.message.contains("line 2"), "{}", err.message);
    }

    #[test]
    fn invalid_values_name_the_field() {
        let err =
            RunConfig::from_json(r#"{"scenario": {"pulses": 1}}"#, Path::new("mem")).unwrap_err();
        assert!(
            err.message.starts_with("scenario.pulses"),
            "{}",
            err.message
        );
        let err = RunConfig::from_json(r#"{"sweep": {"betas": [0.5, 2.0]}}"#, Path::new("mem"))
            .unwrap_err();
        assert!(err.message.starts_with("sweep.betas[1]"), "{}", err.message);
        let err = RunConfig::from_json(r#"{"schema_version": 9}"#, Path::new("mem")).unwrap_err();
        assert!(err.message.starts_with("schema_version"), "{}", err.message);
        let err = RunConfig::from_json(r#"{"reference": {"builtin": "frank"}}"#, Path::new("mem"))
            .unwrap_err();
        assert!(
            err.message.starts_with("reference.builtin"),
            "{}",
            err.message
        );
    }

    #[test]
    fn explicit_covariance_parses() {
        let text = r#"{"scenario": {"pulses": 2, "interference": {"explicit": {"matrix": [
            [{"re": 1.0, "im": 0.0}, {"re": 0.5, "im": 0.1}],
            [{"re": 0.5, "im": -0.1}, {"re": 1.0, "im": 0.0}]]}}}}"#;
        let cfg = RunConfig::from_json(text, Path::new("mem")).unwrap();
        assert!(matches!(
            cfg.scenario().unwrap().interference,
            Interference::Explicit(_)
        ));
    }

    #[test]
    fn csv_has_units_row() {
        let mut t = Table::new("t", "x=1", &["x"]);
        t.rows.push(vec![num(0.1)]);
        assert_eq!(t.to_csv(), "# units: x=1\nx\n0.1\n");
    }
}
