//! Command-line front end: flat key-value configs, the five commands, and
//! deterministic artifacts (JSON reports, CSVs, plot scripts, manifests).

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, ValueEnum};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::clf::{ClfId, Pairing};
use crate::controllers::{control, negativity_predicate, ConstantRate, ControllerSpec, Epsilon};
use crate::dynamics::{ModelId, PopulationState};
use crate::error::{Error, Result};
use crate::figures::{self, FigureId, FigureParams, OPEN_LOOP_LEVELS};
use crate::simulator::{
    integrate, integrate_dense, invariant_drift, log_uniform_initial_conditions, orbit_recurrence,
    IntegratorConfig,
};
use crate::verifier::{
    classify_regions, consistency_sweep, nonstrict_witness, ray_unboundedness_probe,
    scan_positive_definite, scan_vdot_negative, scan_vdot_nonpositive, uniform_rays, DomainGrid,
    VerificationReport,
};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

/// Name of the manifest written into every output directory.
pub const MANIFEST: &str = "manifest.json";
/// Wall-clock sidecar, kept out of the manifest so manifests stay comparable.
pub const TIMING: &str = "timing.json";

/// Log-space half-width of the box sampled by `--sweep`.
pub const SWEEP_LOG_BOUND: f64 = 2.0;

const DRIFT_TOL: f64 = 1e-7;
const RECURRENCE_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Verify,
    Simulate,
    Figures,
    Regions,
    Invariant,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Simulate => "simulate",
            Command::Figures => "figures",
            Command::Regions => "regions",
            Command::Invariant => "invariant",
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ppclf",
    version,
    about = "Strict CLF certification and simulation for harvested predator-prey models"
)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Flat `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `predator-only` or `simultaneous`.
    #[arg(long)]
    model: Option<String>,
    /// constant, predator-linear, mixed-linear, forwarding,
    /// backstepping-conventional, backstepping-positive.
    #[arg(long)]
    controller: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    /// Constant input for the `constant` controller.
    #[arg(long)]
    u0: Option<String>,
    /// CLF id, repeatable or comma-separated.
    #[arg(long)]
    clf: Vec<String>,
    #[arg(long = "grid-a")]
    grid_a: Option<String>,
    #[arg(long = "grid-n")]
    grid_n: Option<String>,
    /// Relative integrator tolerance; the absolute one is 1e-2 times it.
    #[arg(long)]
    tol: Option<String>,
    #[arg(long = "t-end")]
    t_end: Option<String>,
    /// Initial condition `X,Y`, repeatable or `;`-separated.
    #[arg(long)]
    x0: Vec<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Number of seeded log-uniform initial conditions to add.
    #[arg(long)]
    sweep: Option<String>,
    /// Demand strict decrease even from non-strict candidates.
    #[arg(long)]
    strict: bool,
    /// Figure id or `all`.
    #[arg(long)]
    id: Option<String>,
    /// Output samples per trajectory.
    #[arg(long)]
    samples: Option<String>,
}

const KEYS: [&str; 16] = [
    "model",
    "controller",
    "eps",
    "u0",
    "clf",
    "grid-a",
    "grid-n",
    "tol",
    "t-end",
    "x0",
    "out",
    "seed",
    "sweep",
    "strict",
    "id",
    "samples",
];

impl Cli {
    fn overrides(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: &Option<String>| {
            if let Some(v) = v {
                m.insert(k.to_string(), v.clone());
            }
        };
        put("model", &self.model);
        put("controller", &self.controller);
        put("eps", &self.eps);
        put("u0", &self.u0);
        put("grid-a", &self.grid_a);
        put("grid-n", &self.grid_n);
        put("tol", &self.tol);
        put("t-end", &self.t_end);
        put("out", &self.out);
        put("seed", &self.seed);
        put("sweep", &self.sweep);
        put("id", &self.id);
        put("samples", &self.samples);
        if !self.clf.is_empty() {
            m.insert("clf".into(), self.clf.join(","));
        }
        if !self.x0.is_empty() {
            m.insert("x0".into(), self.x0.join(";"));
        }
        if self.strict {
            m.insert("strict".into(), "true".into());
        }
        m
    }
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are
/// ignored; underscores in keys are read as dashes.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut m = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key = value", no + 1)))?;
        let key = k.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Parse(format!(
                "config line {}: unknown key '{key}'",
                no + 1
            )));
        }
        m.insert(key, v.trim().to_string());
    }
    Ok(m)
}

/// Fully resolved and validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub model: Option<ModelId>,
    pub controller: Option<ControllerSpec>,
    pub eps: Option<Epsilon>,
    pub clfs: Vec<ClfId>,
    pub grid: DomainGrid,
    pub tol: Option<f64>,
    pub t_end: Option<f64>,
    pub samples: Option<usize>,
    pub x0: Vec<PopulationState>,
    pub out: PathBuf,
    pub seed: u64,
    pub sweep: usize,
    pub strict: bool,
    pub figures: Vec<FigureId>,
}

fn num<T: std::str::FromStr>(m: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    m.get(key)
        .map(|v| {
            v.trim()
                .parse::<T>()
                .map_err(|_| Error::Parse(format!("{key}: cannot parse '{v}'")))
        })
        .transpose()
}

fn parse_state(text: &str) -> Result<PopulationState> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [x, y] = parts[..] else {
        return Err(Error::Parse(format!("x0: expected 'X,Y', got '{text}'")));
    };
    let p = |v: &str| {
        v.parse::<f64>()
            .map_err(|_| Error::Parse(format!("x0: cannot parse '{v}'")))
    };
    PopulationState::new(p(x)?, p(y)?)
}

impl ExperimentConfig {
    /// Builds a config from merged key-value pairs, rejecting values out of
    /// range, unknown names, and non-designated CLF/controller pairs.
    pub fn from_pairs(command: Command, m: &BTreeMap<String, String>) -> Result<Self> {
        let eps_raw: Option<f64> = num(m, "eps")?;
        let eps = eps_raw.map(Epsilon::new).transpose()?;
        let u0: Option<f64> = num(m, "u0")?;
        if let Some(u) = u0 {
            ConstantRate::new(u)?;
        }
        let model = m.get("model").map(|s| s.parse::<ModelId>()).transpose()?;
        let controller = m
            .get("controller")
            .map(|name| {
                let needs_eps = matches!(name.trim(), "mixed-linear" | "MixedLinear");
                let e = if needs_eps {
                    eps_raw.or(Some(0.5))
                } else {
                    eps_raw
                };
                ControllerSpec::from_name(name, e, u0)
            })
            .transpose()?;
        let clfs = match m.get("clf") {
            Some(list) => list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|name| {
                    let e = if name.contains("BOTH") && !name.contains('(') {
                        eps_raw.or(Some(0.5))
                    } else {
                        eps_raw
                    };
                    ClfId::from_name(name, e)
                })
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let grid = DomainGrid::new(
            num(m, "grid-a")?.unwrap_or(3.0),
            num(m, "grid-n")?.unwrap_or(200),
        )?;
        let tol: Option<f64> = num(m, "tol")?;
        let t_end: Option<f64> = num(m, "t-end")?;
        let samples: Option<usize> = num(m, "samples")?;
        let x0 = match m.get("x0") {
            Some(list) => list
                .split(';')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(parse_state)
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        let strict = match m.get("strict").map(|s| s.trim()) {
            None | Some("false") | Some("0") => false,
            Some("true") | Some("1") => true,
            Some(other) => {
                return Err(Error::Parse(format!(
                    "strict: expected true/false, got '{other}'"
                )))
            }
        };
        let figures = match command {
            Command::Figures => FigureId::parse(m.get("id").map(String::as_str).unwrap_or("all"))?,
            _ => Vec::new(),
        };
        let cfg = Self {
            command,
            model,
            controller,
            eps,
            clfs,
            grid,
            tol,
            t_end,
            samples,
            x0,
            out: PathBuf::from(m.get("out").map(String::as_str).unwrap_or("out")),
            seed: num(m, "seed")?.unwrap_or(0),
            sweep: num(m, "sweep")?.unwrap_or(0),
            strict,
            figures,
        };
        cfg.validate_combinations()?;
        Ok(cfg)
    }

    fn validate_combinations(&self) -> Result<()> {
        if let (Some(model), Some(ctrl)) = (self.model, self.controller) {
            ctrl.ensure_targets(model)?;
        }
        if let Some(model) = self.model {
            for id in &self.clfs {
                if id.model() != model {
                    return Err(Error::ModelMismatch {
                        controller: id.to_string(),
                        model: model.name().into(),
                    });
                }
            }
        }
        // an open-loop run may monitor any candidate
        let monitoring = self.command == Command::Simulate
            && matches!(self.controller, Some(ControllerSpec::Constant(_)));
        if let Some(ctrl) = self.controller {
            if !monitoring {
                for id in &self.clfs {
                    Pairing::new(*id, ctrl)?;
                }
            }
        }
        match self.command {
            Command::Regions => {
                let (ctrl, id) = self.region_pair();
                if !id.has_decomposition() {
                    return Err(Error::NoDecomposition(id.to_string()));
                }
                Pairing::new(id, ctrl)?;
            }
            Command::Invariant => {
                if let Some(c) = self.controller {
                    if c != ControllerSpec::OPEN_LOOP {
                        return Err(Error::Parse(
                            "invariant: the invariant holds only for the open loop U = 1".into(),
                        ));
                    }
                }
            }
            Command::Verify if self.clfs.is_empty() && self.pairings()?.is_empty() => {
                return Err(Error::Parse(
                    "verify: no designated pairing matches the selection".into(),
                ));
            }
            _ => {}
        }
        if self.clfs.len() > 1 && self.command == Command::Regions {
            return Err(Error::Parse("regions: give at most one --clf".into()));
        }
        self.integrator()?.validate()?;
        Ok(())
    }

    fn default_eps(&self) -> Epsilon {
        self.eps.unwrap_or(Epsilon::new(0.5).expect("valid"))
    }

    /// Designated pairings selected by `--clf`, `--controller`, `--model`.
    pub fn pairings(&self) -> Result<Vec<Pairing>> {
        let clfs: Vec<ClfId> = if self.clfs.is_empty() {
            ClfId::catalog(self.default_eps())
                .into_iter()
                .filter(|id| self.model.is_none_or(|m| id.model() == m))
                .filter(|id| {
                    self.controller
                        .is_none_or(|c| id.designated_controllers().contains(&c))
                })
                .collect()
        } else {
            self.clfs.clone()
        };
        let mut out = Vec::new();
        for id in clfs {
            match self.controller {
                Some(c) => out.push(Pairing::new(id, c)?),
                None => {
                    for c in id.designated_controllers() {
                        out.push(Pairing::new(id, c)?);
                    }
                }
            }
        }
        Ok(out)
    }

    fn region_pair(&self) -> (ControllerSpec, ClfId) {
        let ctrl = self
            .controller
            .unwrap_or(ControllerSpec::ForwardingFeedback);
        let id = self.clfs.first().copied().unwrap_or(match ctrl {
            ControllerSpec::ForwardingFeedback => ClfId::VForwarding,
            _ => ClfId::VBackstepping,
        });
        (ctrl, id)
    }

    fn sim_controller(&self) -> ControllerSpec {
        self.controller.unwrap_or_else(|| match self.clfs.first() {
            Some(id) => id.designated_controllers()[0],
            None => ControllerSpec::OPEN_LOOP,
        })
    }

    fn sim_model(&self) -> ModelId {
        self.model.unwrap_or_else(|| match self.clfs.first() {
            Some(id) => id.model(),
            None => self.sim_controller().targets()[0],
        })
    }

    /// Integrator settings, with command-dependent defaults.
    pub fn integrator(&self) -> Result<IntegratorConfig> {
        let (t_end, tol, samples) = match self.command {
            Command::Invariant => (100.0, 1e-10, 2001),
            _ => (50.0, 1e-8, 501),
        };
        let mut cfg =
            IntegratorConfig::with_tolerance(self.t_end.unwrap_or(t_end), self.tol.unwrap_or(tol));
        cfg.samples = self.samples.unwrap_or(samples);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Explicit initial conditions followed by the seeded sweep.
    pub fn initial_conditions(&self, default: &[PopulationState]) -> Vec<PopulationState> {
        let mut v = self.x0.clone();
        v.extend(log_uniform_initial_conditions(
            self.seed,
            self.sweep,
            SWEEP_LOG_BOUND,
        ));
        if v.is_empty() {
            v.extend_from_slice(default);
        }
        v
    }

    /// Everything that determines the outputs, in a stable order. The output
    /// directory is left out so relocated runs compare equal.
    pub fn echo(&self) -> Value {
        let mut m = Map::new();
        m.insert("command".into(), self.command.name().into());
        if let Some(model) = self.model {
            m.insert("model".into(), model.name().into());
        }
        if let Some(c) = self.controller {
            m.insert("controller".into(), c.to_string().into());
        }
        if let Some(e) = self.eps {
            m.insert("eps".into(), e.value().into());
        }
        if !self.clfs.is_empty() {
            m.insert(
                "clf".into(),
                self.clfs
                    .iter()
                    .map(|c| c.to_string())
                    .collect::<Vec<_>>()
                    .into(),
            );
        }
        m.insert("grid_a".into(), self.grid.log_bound.into());
        m.insert("grid_n".into(), (self.grid.points_per_axis as u64).into());
        if let Ok(ic) = self.integrator() {
            m.insert("integrator".into(), serde_json::to_value(ic).expect("json"));
        }
        if !self.x0.is_empty() {
            m.insert(
                "x0".into(),
                self.x0
                    .iter()
                    .map(|s| s.as_array().to_vec())
                    .collect::<Vec<_>>()
                    .into(),
            );
        }
        m.insert("seed".into(), self.seed.into());
        m.insert("sweep".into(), (self.sweep as u64).into());
        m.insert(
            "sweep_generator".into(),
            "ChaCha8Rng::seed_from_u64, ln X and ln Y uniform in [-2, 2]".into(),
        );
        m.insert("strict".into(), self.strict.into());
        if !self.figures.is_empty() {
            m.insert(
                "figures".into(),
                self.figures
                    .iter()
                    .map(|f| f.name())
                    .collect::<Vec<_>>()
                    .into(),
            );
        }
        Value::Object(m)
    }
}

/// Writes `contents` to `dir/rel` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, rel: &str, contents: &[u8]) -> std::io::Result<()> {
    let path = dir.join(rel);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let file_name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{file_name}.tmp"));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, &path)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects outputs and writes them with a manifest at the end.
struct Artifacts {
    dir: PathBuf,
    outputs: Vec<(String, String, usize)>,
    notes: Map<String, Value>,
}

impl Artifacts {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            outputs: Vec::new(),
            notes: Map::new(),
        }
    }

    fn put(&mut self, rel: &str, contents: &str) -> std::io::Result<()> {
        write_atomic(&self.dir, rel, contents.as_bytes())?;
        self.outputs.push((
            rel.to_string(),
            sha256_hex(contents.as_bytes()),
            contents.len(),
        ));
        Ok(())
    }

    fn finish(
        mut self,
        cfg: &ExperimentConfig,
        status: &str,
        started: Instant,
    ) -> std::io::Result<()> {
        self.outputs.sort();
        let outputs: Vec<Value> = self
            .outputs
            .iter()
            .map(|(p, h, n)| json!({"path": p, "sha256": h, "bytes": n}))
            .collect();
        let manifest = json!({
            "tool": "ppclf",
            "version": env!("CARGO_PKG_VERSION"),
            "config": cfg.echo(),
            "status": status,
            "notes": Value::Object(std::mem::take(&mut self.notes)),
            "outputs": outputs,
        });
        let text = serde_json::to_string_pretty(&manifest).expect("json") + "\n";
        write_atomic(&self.dir, MANIFEST, text.as_bytes())?;
        let timing = json!({"wall_clock_seconds": started.elapsed().as_secs_f64()});
        write_atomic(&self.dir, TIMING, (timing.to_string() + "\n").as_bytes())
    }
}

/// Result of a command: exit code and a human-readable summary.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub summary: String,
}

fn reports_json(command: &str, reports: &[VerificationReport]) -> String {
    let passed = reports.iter().all(VerificationReport::passed);
    serde_json::to_string_pretty(&json!({
        "command": command,
        "passed": passed,
        "reports": reports,
    }))
    .expect("json")
        + "\n"
}

fn summarize(reports: &[VerificationReport]) -> String {
    reports.iter().map(|r| format!("{r}\n")).collect()
}

fn io_failure(e: std::io::Error) -> Outcome {
    Outcome {
        code: EXIT_FAILURE,
        summary: format!("error: writing outputs: {e}\n"),
    }
}

pub fn cmd_verify(cfg: &ExperimentConfig) -> Outcome {
    let started = Instant::now();
    let mut reports = Vec::new();
    let pairings = match cfg.pairings() {
        Ok(p) => p,
        Err(e) => {
            return Outcome {
                code: EXIT_CONFIG,
                summary: format!("error: {e}\n"),
            }
        }
    };
    let rays = uniform_rays(16);
    for p in &pairings {
        let id = p.clf();
        let tag = |r: VerificationReport| r.param("pairing", p.to_string());
        reports.push(tag(scan_positive_definite(id, &cfg.grid)));
        reports.push(tag(ray_unboundedness_probe(id, &rays, 60)));
        if id.is_strict() || cfg.strict {
            match scan_vdot_negative(id, p.model(), p.controller(), &cfg.grid) {
                Ok(r) => reports.push(r),
                Err(e) => return config_error(e),
            }
        } else {
            match scan_vdot_nonpositive(id, p.model(), p.controller(), &cfg.grid) {
                Ok(r) => reports.push(r),
                Err(e) => return config_error(e),
            }
            if let Ok(w) = nonstrict_witness(id, p.model(), p.controller()) {
                reports.push(
                    VerificationReport::new("nonstrict_witness", true, w, 0.0, 1)
                        .param("pairing", p.to_string())
                        .param("meaning", "derivative vanishes away from the equilibrium"),
                );
            }
        }
    }
    if cfg.clfs.is_empty() && cfg.controller.is_none() && cfg.model.is_none() {
        let sweep = consistency_sweep(&cfg.grid);
        reports.push(sweep.summary);
        reports.extend(sweep.checks);
    }
    let passed = reports.iter().all(VerificationReport::passed);
    let mut art = Artifacts::new(&cfg.out);
    let res = art
        .put("verify_report.json", &reports_json("verify", &reports))
        .and_then(|_| art.finish(cfg, if passed { "pass" } else { "check_failed" }, started));
    if let Err(e) = res {
        return io_failure(e);
    }
    Outcome {
        code: if passed { EXIT_PASS } else { EXIT_FAILURE },
        summary: summarize(&reports),
    }
}

fn config_error(e: Error) -> Outcome {
    Outcome {
        code: EXIT_CONFIG,
        summary: format!("error: {e}\n"),
    }
}

fn failure_time(e: &Error) -> Option<f64> {
    match e {
        Error::StepSizeUnderflow { t }
        | Error::TooManySteps { t }
        | Error::NonFiniteDerivative { t } => Some(*t),
        _ => None,
    }
}

pub fn cmd_simulate(cfg: &ExperimentConfig) -> Outcome {
    let started = Instant::now();
    let ctrl = cfg.sim_controller();
    let model = cfg.sim_model();
    let ic = match cfg.integrator() {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let starts = cfg.initial_conditions(&[PopulationState::new(2.0, 1.0).expect("positive")]);
    let mut art = Artifacts::new(&cfg.out);
    let mut runs = Vec::new();
    let mut failure = None;
    for (k, s0) in starts.iter().enumerate() {
        match integrate(model, ctrl, *s0, &ic) {
            Ok(tr) => {
                let mut tr = cfg.clfs.iter().fold(tr, |t, id| t.with_clf(*id));
                if ctrl == ControllerSpec::OPEN_LOOP {
                    tr = tr.with_invariant();
                }
                let file = format!("traj_{k:03}.csv");
                if let Err(e) = art.put(&file, &tr.to_csv()) {
                    return io_failure(e);
                }
                let mut run = json!({
                    "file": file,
                    "x0": s0.as_array(),
                    "final_state": tr.final_state().as_array(),
                });
                if tr.invariant.is_some() {
                    run["invariant_drift"] = invariant_drift(&tr).into();
                }
                runs.push(run);
            }
            Err(e) => {
                failure = Some(json!({
                    "index": k,
                    "x0": s0.as_array(),
                    "time": failure_time(&e),
                    "message": e.to_string(),
                }));
                break;
            }
        }
    }
    art.notes
        .insert("resolved_model".into(), model.name().into());
    art.notes
        .insert("resolved_controller".into(), ctrl.to_string().into());
    art.notes.insert("runs".into(), runs.into());
    let status = if failure.is_some() {
        "integration_failed"
    } else {
        "pass"
    };
    let summary = match &failure {
        Some(f) => format!("integration failed: {f}\n"),
        None => format!(
            "{} trajectories written to {}\n",
            starts.len(),
            cfg.out.display()
        ),
    };
    if let Some(f) = failure.clone() {
        art.notes.insert("failure".into(), f);
    }
    if let Err(e) = art.finish(cfg, status, started) {
        return io_failure(e);
    }
    Outcome {
        code: if failure.is_some() {
            EXIT_FAILURE
        } else {
            EXIT_PASS
        },
        summary,
    }
}

pub fn cmd_figures(cfg: &ExperimentConfig) -> Outcome {
    let started = Instant::now();
    let defaults = FigureParams::default();
    let params = FigureParams {
        eps_grid: cfg.eps.unwrap_or(defaults.eps_grid),
        eps_levels: cfg.eps.unwrap_or(defaults.eps_levels),
        rel_tol: cfg.tol.unwrap_or(defaults.rel_tol),
    };
    let mut art = Artifacts::new(&cfg.out);
    let mut summary = String::new();
    for fig in &cfg.figures {
        let files = match figures::generate(*fig, &params) {
            Ok(f) => f,
            Err(e) => {
                return Outcome {
                    code: EXIT_FAILURE,
                    summary: format!("error: figure {}: {e}\n", fig.name()),
                }
            }
        };
        for f in &files {
            if let Err(e) = art.put(&f.path, &f.contents) {
                return io_failure(e);
            }
        }
        summary.push_str(&format!("{:<22} {} files\n", fig.name(), files.len()));
    }
    if cfg.figures.contains(&FigureId::OpenLoop) {
        art.notes
            .insert("open_loop_levels".into(), OPEN_LOOP_LEVELS.to_vec().into());
    }
    art.notes
        .insert("eps_value_grid".into(), params.eps_grid.value().into());
    art.notes
        .insert("eps_level_sets".into(), params.eps_levels.value().into());
    if let Err(e) = art.finish(cfg, "pass", started) {
        return io_failure(e);
    }
    Outcome {
        code: EXIT_PASS,
        summary,
    }
}

pub fn cmd_regions(cfg: &ExperimentConfig) -> Outcome {
    let started = Instant::now();
    let (ctrl, id) = cfg.region_pair();
    let map = match classify_regions(&cfg.grid, ctrl, id) {
        Ok(m) => m,
        Err(e) => return config_error(e),
    };
    let mut reports = Vec::new();
    // sign of the law against its closed-form negativity set
    let mut mismatches = 0usize;
    let mut first_mismatch = PopulationState::EQUILIBRIUM;
    let mut checked = 0usize;
    for s in &map.points {
        let u = control(ctrl, *s);
        let pred = negativity_predicate(ctrl, *s);
        if u.abs() <= 1e-12 {
            continue;
        }
        checked += 1;
        if (u < 0.0) != pred.negative {
            if mismatches == 0 {
                first_mismatch = *s;
            }
            mismatches += 1;
        }
    }
    reports.push(
        VerificationReport::new(
            "negativity_predicate",
            mismatches == 0,
            first_mismatch,
            mismatches as f64,
            checked,
        )
        .param("controller", ctrl.to_string())
        .param("u_negative_points", map.count_u_negative() as u64)
        .param(
            "pass_if",
            "sign of U matches the closed-form set wherever |U| > 1e-12",
        ),
    );
    let failure_at = map
        .points
        .iter()
        .zip(&map.labels)
        .find(|(_, l)| l.clf_failure)
        .map(|(s, _)| *s);
    let failures = map.count_clf_failure();
    reports.push(
        VerificationReport::new(
            "input_positive_clf",
            failures == 0,
            failure_at.unwrap_or(PopulationState::EQUILIBRIUM),
            failures as f64,
            map.points.len(),
        )
        .param("clf", id.to_string())
        .param("pass_if", "no grid point with L > 0 and G > 0"),
    );
    let mut art = Artifacts::new(&cfg.out);
    let passed = reports.iter().all(VerificationReport::passed);
    let res = art
        .put("regions.csv", &map.to_csv())
        .and_then(|_| art.put("regions_report.json", &reports_json("regions", &reports)))
        .and_then(|_| art.finish(cfg, if passed { "pass" } else { "check_failed" }, started));
    if let Err(e) = res {
        return io_failure(e);
    }
    Outcome {
        code: if passed { EXIT_PASS } else { EXIT_FAILURE },
        summary: summarize(&reports),
    }
}

pub fn cmd_invariant(cfg: &ExperimentConfig) -> Outcome {
    let started = Instant::now();
    let model = cfg.model.unwrap_or(ModelId::PredatorOnlyHarvest);
    let ic = match cfg.integrator() {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    let starts = cfg.initial_conditions(&[
        PopulationState::new(2.0, 1.0).expect("positive"),
        PopulationState::new(0.5, 3.0).expect("positive"),
    ]);
    let mut art = Artifacts::new(&cfg.out);
    let mut reports = Vec::new();
    for (k, s0) in starts.iter().enumerate() {
        let dense = match integrate_dense(model, ControllerSpec::OPEN_LOOP, *s0, &ic) {
            Ok(d) => d,
            Err(e) => {
                reports.push(
                    VerificationReport::new(
                        "integration",
                        false,
                        *s0,
                        failure_time(&e).unwrap_or(f64::NAN),
                        0,
                    )
                    .param("message", e.to_string()),
                );
                continue;
            }
        };
        let tr = dense.sample(&ic).with_invariant();
        let drift = invariant_drift(&tr);
        let file = format!("invariant_{k:03}.csv");
        if let Err(e) = art.put(&file, &tr.to_csv()) {
            return io_failure(e);
        }
        reports.push(
            VerificationReport::new("invariant_drift", drift < DRIFT_TOL, *s0, drift, tr.len())
                .param("file", file.clone())
                .param("rel_tol", ic.rel_tol)
                .param("t_end", ic.t_end)
                .param("pass_if", "max |C(t) - C(0)| < 1e-7"),
        );
        if s0.distance_to_equilibrium() > 0.0 {
            let (t, d) = orbit_recurrence(&dense).unwrap_or((f64::NAN, f64::INFINITY));
            reports.push(
                VerificationReport::new("orbit_recurrence", d < RECURRENCE_TOL, *s0, d, 1)
                    .param("file", file)
                    .param("return_time", t)
                    .param("pass_if", "closest return to the start < 1e-4"),
            );
        }
    }
    let passed = reports.iter().all(VerificationReport::passed);
    let res = art
        .put(
            "invariant_report.json",
            &reports_json("invariant", &reports),
        )
        .and_then(|_| art.finish(cfg, if passed { "pass" } else { "check_failed" }, started));
    if let Err(e) = res {
        return io_failure(e);
    }
    Outcome {
        code: if passed { EXIT_PASS } else { EXIT_FAILURE },
        summary: summarize(&reports),
    }
}

pub fn execute(cfg: &ExperimentConfig) -> Outcome {
    match cfg.command {
        Command::Verify => cmd_verify(cfg),
        Command::Simulate => cmd_simulate(cfg),
        Command::Figures => cmd_figures(cfg),
        Command::Regions => cmd_regions(cfg),
        Command::Invariant => cmd_invariant(cfg),
    }
}

/// Parses arguments (including the config file) into a validated config.
pub fn parse_args<I, T>(args: I) -> std::result::Result<ExperimentConfig, Outcome>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Outcome {
        code: if e.use_stderr() {
            EXIT_CONFIG
        } else {
            EXIT_PASS
        },
        summary: e.render().to_string(),
    })?;
    let mut pairs = match &cli.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("config {}: {e}", path.display())))
            .and_then(|t| parse_config_text(&t))
            .map_err(config_error)?,
        None => BTreeMap::new(),
    };
    pairs.extend(cli.overrides());
    ExperimentConfig::from_pairs(cli.command, &pairs).map_err(config_error)
}

/// Entry point used by the binary; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let outcome = match parse_args(args) {
        Ok(cfg) => execute(&cfg),
        Err(o) => o,
    };
    if outcome.code == EXIT_PASS {
        print!("{}", outcome.summary);
    } else {
        eprint!("{}", outcome.summary);
    }
    outcome.code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(kv: &[(&str, &str)]) -> BTreeMap<String, String> {
        kv.iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect()
    }

    #[test]
    fn config_text_parses_and_rejects_unknown_keys() {
        let m = parse_config_text("# demo\nclf = V_SF_STRICT\n grid_n=50 # small\n\n").unwrap();
        assert_eq!(m["clf"], "V_SF_STRICT");
        assert_eq!(m["grid-n"], "50");
        assert!(parse_config_text("colour = red").is_err());
        assert!(parse_config_text("just words").is_err());
    }

    #[test]
    fn non_designated_pair_is_rejected_with_designation() {
        let e = ExperimentConfig::from_pairs(
            Command::Verify,
            &pairs(&[("clf", "V_SF_STRICT"), ("controller", "forwarding")]),
        )
        .unwrap_err();
        assert!(e.to_string().contains("predator-linear"), "{e}");
    }

    #[test]
    fn eps_out_of_range_is_a_config_error() {
        let r = ExperimentConfig::from_pairs(
            Command::Verify,
            &pairs(&[("clf", "V_BOTH_STRICT"), ("eps", "1.5")]),
        );
        assert!(r.is_err());
    }

    #[test]
    fn model_mismatch_rejected() {
        let r = ExperimentConfig::from_pairs(
            Command::Simulate,
            &pairs(&[("model", "predator-only"), ("controller", "mixed-linear")]),
        );
        assert!(r.is_err());
    }

    #[test]
    fn verify_selects_designated_controllers() {
        let cfg =
            ExperimentConfig::from_pairs(Command::Verify, &pairs(&[("clf", "V_BACKSTEPPING")]))
                .unwrap();
        assert_eq!(cfg.pairings().unwrap().len(), 2);
        let all = ExperimentConfig::from_pairs(Command::Verify, &BTreeMap::new()).unwrap();
        assert_eq!(all.pairings().unwrap().len(), 7);
    }

    #[test]
    fn sweep_is_seeded() {
        let cfg = ExperimentConfig::from_pairs(
            Command::Simulate,
            &pairs(&[("sweep", "3"), ("seed", "7")]),
        )
        .unwrap();
        let a = cfg.initial_conditions(&[]);
        let b = cfg.initial_conditions(&[]);
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }
}
