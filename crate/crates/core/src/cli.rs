//! Command-line front end.
//!
//! Every command writes into one output directory:
//!
//! | file | contents |
//! |------|----------|
//! | `config.toml` | canonical echo of the effective configuration |
//! | `manifest.json` | config hash and the list of artifacts written so far |
//! | `run.jsonl` | one JSON object per event: start, solver reports, checks, failures, end |
//! | `*.csv` | tabular results, last column `config_hash` |
//! | `*.json` | full results, with a `config_hash` key |
//! | `*.hffld`, `*.hfenv` | binary field and environment dumps |
//! | `*.ppm` | P6 heatmaps, the config hash in a header comment |
//!
//! A directory whose manifest carries a different config hash is refused.
//!
//! Exit codes: 0 success, 2 configuration or input error, 3 solver failure,
//! 4 failed check.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{RateExperiment, RunConfig};
use crate::environment::{sample_environment, Conductances};
use crate::error::{Error, Result};
use crate::experiments::{
    bilap_error_rate_with, discretization_rate, gff_covariance_limit, ids, pseudo_eigen_rate_with,
    resolve_ahom, ExperimentKind, RatePoint, RateSeries,
};
use crate::figure::figure_one;
use crate::field::LatticeField;
use crate::grid::TorusGrid;
use crate::heatmap::{render, Palette};
use crate::homogenization::{estimate_ahom, AhomEstimate};
use crate::sampler::{sample_bilaplacian, sample_noise, FieldKind, FieldSample, GffBackend, GffSampler};
use crate::seed::{tags, Seed};
use crate::solver::Medium;

#[derive(Debug, Parser)]
#[command(name = "hfield", version, about = "Random-conductance Gaussian fields on the discrete torus")]
pub struct Cli {
    /// TOML configuration file; built-in defaults when absent.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Master seed, overriding `run.seed`.
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "hfield-out")]
    pub out: PathBuf,

    /// Also write a heatmap of the sampled field.
    #[arg(long, global = true)]
    pub heatmap: bool,

    /// Free-field backend (spectral, dense, krylov), overriding `sample.backend`.
    #[arg(long, global = true, value_name = "NAME")]
    pub backend: Option<GffBackend>,

    /// Heatmap palette (diverging, grayscale), overriding `sample.palette`.
    #[arg(long, global = true, value_name = "NAME")]
    pub palette: Option<Palette>,

    /// Worker threads; does not change any result.
    #[arg(long, global = true, value_name = "INT", env = "HF_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Sample one field and write its dump.
    Sample,
    /// Estimate the effective coefficient.
    Ahom,
    /// Run a convergence-rate experiment and fit its log-log slope.
    Rates {
        /// pseudo_eigen, bilap_error, discretization or synthetic; overrides `experiment.name`.
        #[arg(long, value_name = "NAME")]
        experiment: Option<RateExperiment>,
    },
    /// Spectral covariance of the free field in a random environment.
    Cov,
    /// Four bi-Laplacian fields from one noise in four environments.
    Figure1,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Sample => "sample",
            Command::Ahom => "ahom",
            Command::Rates { .. } => "rates",
            Command::Cov => "cov",
            Command::Figure1 => "figure1",
        }
    }
}

/// Outcome of one command-level assertion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    config_hash: String,
    version: String,
    artifacts: BTreeSet<String>,
}

/// Output directory bound to one configuration hash.
pub struct Output {
    dir: PathBuf,
    hash: String,
    manifest: Manifest,
    log: BufWriter<File>,
}

impl Output {
    pub fn open(dir: &Path, cfg: &RunConfig) -> Result<Self> {
        let hash = cfg.hash()?;
        fs::create_dir_all(dir)?;
        let manifest_path = dir.join("manifest.json");
        let manifest = if manifest_path.exists() {
            let text = fs::read_to_string(&manifest_path)?;
            let m: Manifest = serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("unreadable manifest {}: {e}", manifest_path.display())))?;
            if m.config_hash != hash {
                return Err(Error::Config(format!(
                    "{} holds outputs of config {}, this run is config {hash}",
                    dir.display(),
                    m.config_hash
                )));
            }
            m
        } else {
            Manifest {
                config_hash: hash.clone(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                artifacts: BTreeSet::new(),
            }
        };
        fs::write(dir.join("config.toml"), cfg.to_toml()?)?;
        let log = OpenOptions::new().create(true).append(true).open(dir.join("run.jsonl"))?;
        let out = Output {
            dir: dir.to_path_buf(),
            hash,
            manifest,
            log: BufWriter::new(log),
        };
        out.save_manifest()?;
        Ok(out)
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    fn save_manifest(&self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(self.dir.join("manifest.json"), text + "\n")?;
        Ok(())
    }

    fn record(&mut self, name: &str) -> Result<PathBuf> {
        self.manifest.artifacts.insert(name.to_string());
        self.save_manifest()?;
        Ok(self.dir.join(name))
    }

    /// Appends `{"event": .., "config_hash": .., ..payload}` to `run.jsonl`.
    pub fn log(&mut self, event: &str, payload: Value) -> Result<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("event".into(), json!(event));
        obj.insert("config_hash".into(), json!(self.hash));
        if let Value::Object(m) = payload {
            obj.extend(m);
        } else {
            obj.insert("data".into(), payload);
        }
        serde_json::to_writer(&mut self.log, &Value::Object(obj)).map_err(|e| Error::Format(e.to_string()))?;
        self.log.write_all(b"\n")?;
        self.log.flush()?;
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let path = self.record(name)?;
        let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
        let mut h: Vec<&str> = header.to_vec();
        h.push("config_hash");
        w.write_record(&h).map_err(csv_error)?;
        for row in rows {
            let mut r = row.clone();
            r.push(self.hash.clone());
            w.write_record(&r).map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: Value) -> Result<()> {
        let mut obj = serde_json::Map::new();
        obj.insert("config_hash".into(), json!(self.hash));
        match value {
            Value::Object(m) => obj.extend(m),
            other => {
                obj.insert("data".into(), other);
            }
        }
        let text = serde_json::to_string_pretty(&Value::Object(obj)).map_err(|e| Error::Format(e.to_string()))?;
        let path = self.record(name)?;
        fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.record(name)?;
        fs::write(path, bytes)?;
        Ok(())
    }

    fn write_field(&mut self, name: &str, sample: &FieldSample) -> Result<()> {
        let mut buf = Vec::new();
        sample.write_to(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    fn write_environment(&mut self, name: &str, a: &Conductances) -> Result<()> {
        let mut buf = Vec::new();
        a.write_to(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    /// Writes `<stem>.ppm` and its `<stem>.ppm.json` sidecar.
    fn write_heatmap(&mut self, stem: &str, sample: &FieldSample, palette: Palette) -> Result<()> {
        let h = render(&sample.field, palette)?;
        let comment = format!("config_hash {}", self.hash);
        self.write_bytes(&format!("{stem}.ppm"), &h.to_ppm_annotated(Some(&comment)))?;
        self.write_json(
            &format!("{stem}.ppm.json"),
            json!({
                "width": h.width,
                "height": h.height,
                "min": h.min,
                "max": h.max,
                "palette": palette,
                "noise_seed": sample.noise_seed,
                "environment_seed": sample.environment_seed,
            }),
        )
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn mean_zero_check(label: &str, field: &LatticeField<f64>) -> Check {
    let scale = field.max_abs().max(f64::MIN_POSITIVE);
    let mean = field.mean();
    Check::new(
        format!("{label}_mean_zero"),
        mean.abs() <= 1e-10 * scale,
        format!("mean {mean:e}, max |x| {scale:e}"),
    )
}

/// Applies command-line overrides to the loaded configuration.
pub fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.run.seed = s;
    }
    if let Some(b) = cli.backend {
        cfg.sample.backend = Some(b);
    }
    if let Some(p) = cli.palette {
        cfg.sample.palette = p;
    }
    if let Command::Rates { experiment: Some(e) } = cli.command {
        cfg.experiment.name = e;
    }
    Ok(cfg)
}

fn cmd_sample(cfg: &RunConfig, out: &mut Output, heatmap: bool) -> Result<Vec<Check>> {
    let grid = TorusGrid::new(cfg.grid.side, cfg.grid.dim)?;
    let seed = Seed(cfg.run.seed);
    let kind = cfg.sample.kind;
    let needs_env = matches!(kind, FieldKind::GffEnv | FieldKind::BilapEnv);
    let env_seed = seed.derive(tags::ENVIRONMENT);
    let env = if needs_env {
        Some(sample_environment(&cfg.law()?, &grid, env_seed)?)
    } else {
        None
    };
    let medium = match &env {
        Some(a) => Medium::Environment(a),
        None => Medium::Homogeneous(grid),
    };
    let noise_seed = seed.derive(tags::NOISE);
    let backend = cfg.sample.backend.unwrap_or(if needs_env {
        GffBackend::Krylov
    } else {
        GffBackend::Spectral
    });
    let mut sample = if kind.is_gff() {
        GffSampler::with_options(medium, backend, cfg.krylov)?.sample(noise_seed)?
    } else {
        let w = sample_noise(&grid, noise_seed);
        let mut s = sample_bilaplacian(medium, &w, &cfg.solver)?;
        s.noise_seed = Some(noise_seed.0);
        s
    };
    if needs_env {
        sample.environment_seed = Some(env_seed.0);
    }
    if let Some(rep) = &sample.report {
        out.log("solve", json!({ "target": "field", "report": rep }))?;
    }
    out.write_field("field.hffld", &sample)?;
    if let Some(a) = &env {
        out.write_environment("environment.hfenv", a)?;
    }
    let f = &sample.field;
    let (min, max) = f
        .values()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    out.write_json(
        "field.json",
        json!({
            "kind": kind,
            "dim": grid.dim(),
            "side": grid.side(),
            "law": if needs_env { Some(cfg.environment.law.clone()) } else { None },
            "backend": if kind.is_gff() { Some(backend) } else { None },
            "noise_seed": sample.noise_seed,
            "environment_seed": sample.environment_seed,
            "min": min,
            "max": max,
            "report": sample.report,
        }),
    )?;
    if heatmap {
        out.write_heatmap("field", &sample, cfg.sample.palette)?;
    }
    Ok(vec![mean_zero_check("field", f)])
}

fn cmd_ahom(cfg: &RunConfig, out: &mut Output) -> Result<Vec<Check>> {
    let law = cfg.law()?;
    let grid = TorusGrid::new(cfg.grid.side, cfg.grid.dim)?;
    let est = estimate_ahom(
        &law,
        &grid,
        cfg.ahom.replicates,
        Seed(cfg.run.seed).derive(ids::AHOM),
        &cfg.solver,
    )?;
    for r in &est.records {
        out.log("replicate", to_json(r))?;
    }
    for f in &est.failures {
        out.log("replicate_failure", json!({ "code": 3, "replicate": f.replicate, "message": f.message }))?;
    }
    out.write_csv("ahom.csv", &AhomEstimate::CSV_HEADER, &[est.csv_record()])?;
    out.write_json("ahom.json", to_json(&est))?;

    let slack = 4.0 * est.stderr + 1e-10 * est.mean.abs();
    let (lo, hi) = (law.harmonic_mean(), law.mean());
    let mut checks = vec![Check::new(
        "ahom_between_harmonic_and_arithmetic_mean",
        est.mean >= lo - slack && est.mean <= hi + slack,
        format!("{lo:.6} <= {:.6} <= {hi:.6} (slack {slack:.2e})", est.mean),
    )];
    if law.is_constant() {
        let c = law.mean();
        checks.push(Check::new(
            "ahom_constant_exact",
            (est.mean - c).abs() <= 1e-10 && est.stderr == 0.0,
            format!("mean {:e}, stderr {:e}, expected {c}", est.mean, est.stderr),
        ));
    }
    Ok(checks)
}

fn slope_check(series: &RateSeries, tol: f64) -> Check {
    match (series.fit, series.expected_slope) {
        (Some(fit), Some(expected)) => Check::new(
            format!("{}_slope", series.quantity),
            fit.within(expected, tol),
            format!(
                "slope {:.4} (95% half-width {:.4}), expected {expected} +/- {tol}",
                fit.slope, fit.half_width
            ),
        ),
        _ => {
            let max = series.points.iter().map(|p| p.value.abs()).fold(0.0, f64::max);
            Check::new(
                format!("{}_vanishes", series.quantity),
                max <= 1e-12,
                format!("largest value {max:e} (no fit for a constant environment)"),
            )
        }
    }
}

fn cmd_rates(cfg: &RunConfig, out: &mut Output) -> Result<Vec<Check>> {
    let ecfg = cfg.experiment_config()?;
    let tol = cfg.experiment.slope_tolerance;
    let mut series = Vec::new();
    let mut extra = serde_json::Map::new();
    let mut checks = Vec::new();
    match cfg.experiment.name {
        RateExperiment::PseudoEigen => {
            ecfg.validate(ExperimentKind::PseudoEigen)?;
            let ahom = resolve_ahom(&ecfg)?;
            out.log("ahom", to_json(&ahom))?;
            extra.insert("ahom".into(), to_json(&ahom));
            for k in &ecfg.modes {
                series.push(pseudo_eigen_rate_with(&ecfg, ahom.value, k)?);
            }
        }
        RateExperiment::BilapError => {
            ecfg.validate(ExperimentKind::BilapError)?;
            let ahom = resolve_ahom(&ecfg)?;
            out.log("ahom", to_json(&ahom))?;
            extra.insert("ahom".into(), to_json(&ahom));
            let report = bilap_error_rate_with(&ecfg, ahom.value)?;
            if let Some(c) = &report.check {
                checks.push(Check::new(
                    "bilap_estimators_agree",
                    c.z <= 3.0,
                    format!(
                        "N = {}: exact {:.4e} +/- {:.1e}, Monte-Carlo {:.4e} +/- {:.1e}, z = {:.2}",
                        c.side, c.exact_mean, c.exact_stderr, c.mc_mean, c.mc_stderr, c.z
                    ),
                ));
                extra.insert("estimator_check".into(), to_json(c));
            }
            series.push(report.series);
        }
        RateExperiment::Discretization => {
            series.push(discretization_rate(&ecfg)?);
        }
        RateExperiment::Synthetic => {
            let e = cfg.experiment.synthetic_exponent;
            let points = ecfg
                .sides
                .iter()
                .map(|&n| RatePoint {
                    side: n,
                    value: (n as f64).powf(e),
                    stderr: 0.0,
                    samples: 1,
                })
                .collect();
            let mut s = RateSeries::new("synthetic", ecfg.dim, points, false, true)?;
            s.expected_slope = Some(e);
            series.push(s);
        }
    }
    for s in &series {
        out.log("series", to_json(s))?;
        checks.push(slope_check(s, tol));
    }
    let rows: Vec<Vec<String>> = series.iter().flat_map(|s| s.csv_records()).collect();
    out.write_csv("rates.csv", &RateSeries::CSV_HEADER, &rows)?;
    extra.insert("series".into(), to_json(&series));
    out.write_json("rates.json", Value::Object(extra))?;
    Ok(checks)
}

fn cmd_cov(cfg: &RunConfig, out: &mut Output) -> Result<Vec<Check>> {
    let ecfg = cfg.experiment_config()?;
    ecfg.validate(ExperimentKind::GffCovariance)?;
    let report = gff_covariance_limit(&ecfg)?;
    let band = cfg.experiment.z_band;
    let mut rows = Vec::new();
    for level in &report.levels {
        out.log("covariance_level", to_json(level))?;
        for (i, ki) in report.modes.iter().enumerate() {
            for (j, kj) in report.modes.iter().enumerate() {
                rows.push(vec![
                    level.side.to_string(),
                    format!("{:?}", ki.0),
                    format!("{:?}", kj.0),
                    format!("{:.12e}", level.cov_re[i][j]),
                    format!("{:.12e}", level.cov_im[i][j]),
                    format!("{:.12e}", level.stderr_re[i][j]),
                    format!("{:.12e}", level.stderr_im[i][j]),
                ]);
            }
        }
    }
    out.write_csv(
        "cov.csv",
        &["N", "k", "l", "cov_re", "cov_im", "stderr_re", "stderr_im"],
        &rows,
    )?;
    out.write_json("cov.json", to_json(&report))?;

    let mut checks = Vec::new();
    if let (Some(first), Some(last)) = (report.levels.first(), report.levels.last()) {
        checks.push(Check::new(
            "cov_offdiag_zero",
            last.max_offdiag_z <= band,
            format!("N = {}: max |z| {:.2} (band {band})", last.side, last.max_offdiag_z),
        ));
        checks.push(Check::new(
            "cov_diag_inverse_eigenvalue",
            last.max_diag_z <= band,
            format!(
                "N = {}: fitted constant {:.4e} (limit {:.4e}), max |z| {:.2}",
                last.side, last.diag_constant, last.predicted_constant, last.max_diag_z
            ),
        ));
        if report.levels.len() > 1 {
            checks.push(Check::new(
                "cov_offdiag_mass_decreases",
                last.offdiag_mass < first.offdiag_mass,
                format!(
                    "N = {}: {:.4e}, N = {}: {:.4e}",
                    first.side, first.offdiag_mass, last.side, last.offdiag_mass
                ),
            ));
        }
    }
    Ok(checks)
}

fn cmd_figure1(cfg: &RunConfig, out: &mut Output) -> Result<Vec<Check>> {
    let fig = figure_one(cfg.figure.side, Seed(cfg.run.seed), &cfg.solver)?;
    let mut panels = Vec::new();
    let mut checks = Vec::new();
    for p in &fig.panels {
        let stem = format!("figure1_{}", p.label);
        if let Some(rep) = &p.sample.report {
            out.log("solve", json!({ "target": stem, "report": rep }))?;
        }
        out.write_field(&format!("{stem}.hffld"), &p.sample)?;
        out.write_heatmap(&stem, &p.sample, cfg.sample.palette)?;
        checks.push(mean_zero_check(&stem, &p.sample.field));
        panels.push(json!({
            "label": p.label,
            "law": p.law.to_string(),
            "environment_seed": p.environment_seed,
            "report": p.sample.report,
        }));
    }
    for (label, t) in &fig.sign_tests {
        checks.push(Check::new(
            format!("figure1_{label}_sign_test"),
            t.passed,
            format!(
                "{} of {} signs agree with the constant panel, z = {:.1}, p = {:.2e} (level {})",
                t.agree, t.sites, t.z, t.p_value, t.level
            ),
        ));
    }
    let tests: Vec<Value> = fig
        .sign_tests
        .iter()
        .map(|(l, t)| json!({ "label": l, "test": t }))
        .collect();
    out.write_json(
        "figure1.json",
        json!({
            "side": cfg.figure.side,
            "noise_seed": fig.noise_seed,
            "panels": panels,
            "sign_tests": tests,
        }),
    )?;
    Ok(checks)
}

fn execute(cli: &Cli, cfg: &RunConfig, out: &mut Output) -> Result<Vec<Check>> {
    match &cli.command {
        Command::Sample => cmd_sample(cfg, out, cli.heatmap),
        Command::Ahom => cmd_ahom(cfg, out),
        Command::Rates { .. } => cmd_rates(cfg, out),
        Command::Cov => cmd_cov(cfg, out),
        Command::Figure1 => cmd_figure1(cfg, out),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let start = Instant::now();
    let cfg = match effective_config(cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    if let Some(n) = cli.threads.or(cfg.run.threads) {
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut out = match Output::open(&cli.out, &cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let command = cli.command.name();
    let logged = out.log(
        "start",
        json!({ "command": command, "version": env!("CARGO_PKG_VERSION"), "config": to_json(&cfg) }),
    );
    let code = match logged.and_then(|_| execute(cli, &cfg, &mut out)) {
        Ok(checks) => {
            let mut code = 0;
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
                let _ = out.log("check", to_json(c));
                if !c.passed {
                    code = 4;
                    let _ = out.log("failure", json!({ "code": 4, "kind": "assertion", "check": c.name, "message": c.detail }));
                }
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            let mut rec = json!({ "code": code, "message": e.to_string() });
            if let Error::NotConverged(rep) = &e {
                rec["report"] = to_json(rep);
            }
            let _ = out.log("failure", rec);
            code
        }
    };
    let _ = out.log(
        "end",
        json!({ "command": command, "exit_code": code, "wall_clock_seconds": start.elapsed().as_secs_f64() }),
    );
    code
}

/// Parses `args` (including the program name) and runs; help and version exit 0, usage errors 2.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                2
            } else {
                0
            }
        }
    }
}

/// Reads back a CSV written by [`Output::write_csv`] and checks that every row carries `hash`.
pub fn check_csv_hash(path: &Path, hash: &str) -> Result<()> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let col = r
        .headers()
        .map_err(csv_error)?
        .iter()
        .position(|h| h == "config_hash")
        .ok_or_else(|| Error::Format(format!("{} has no config_hash column", path.display())))?;
    for rec in r.records() {
        let rec = rec.map_err(csv_error)?;
        if rec.get(col) != Some(hash) {
            return Err(Error::Config(format!("{} mixes outputs of different configs", path.display())));
        }
    }
    Ok(())
}
