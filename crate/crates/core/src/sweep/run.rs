//! Executes the tasks of a validated configuration over its points.

use std::fs;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{SweepConfig, Task};
use super::output::{self, point_key, run_header, write_table, Header, Manifest};
use crate::convergence::check_truncation;
use crate::correlations::{
    emission_spectrum, g2_cross_filtered, g2_tau, normalize_set, Normalization, Spectrum,
    StationarySource,
};
use crate::dressed::{dress, level_sweep};
use crate::dynamics::{standard_me_g2, BathSpec};
use crate::error::Error;
use crate::format::sig12;
use crate::model::RabiParams;
use crate::thermal::{g2_zero, thermal_state, Region};

/// Outcome at one point of the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub label: Option<String>,
    pub g: f64,
    pub temperature: f64,
    pub observable: String,
    pub value: Option<f64>,
    pub region: Option<Region>,
    pub n_fock: usize,
    /// `None` when the doubling check was not run.
    pub converged: Option<bool>,
    pub error: Option<String>,
    /// Trace file written for this point, relative to the output directory.
    pub file: Option<String>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub records: Vec<PointRecord>,
    pub files: Vec<String>,
    /// Points taken over from an earlier run.
    pub reused: usize,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_UNCONVERGED: i32 = 4;

impl SweepResult {
    pub fn exit_code(&self) -> i32 {
        if self.records.iter().any(|r| r.error.is_some()) {
            EXIT_NUMERICAL
        } else if self.records.iter().any(|r| r.converged == Some(false)) {
            EXIT_UNCONVERGED
        } else {
            EXIT_OK
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] super::config::ConfigError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Model(#[from] Error),
}

impl SweepError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SweepError::Config(_) => EXIT_CONFIG,
            _ => EXIT_NUMERICAL,
        }
    }
}

/// Everything a point computation produces besides bookkeeping.
struct PointOutput {
    value: Option<f64>,
    region: Option<Region>,
    converged: Option<bool>,
    file: Option<String>,
}

/// Runs the configured task, writing every file into the output directory.
pub fn run(config: &SweepConfig) -> Result<SweepResult, SweepError> {
    config.validate()?;
    let dir = config.out_dir();
    fs::create_dir_all(&dir)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.resolved_workers())
        .build()
        .map_err(|e| SweepError::Pool(e.to_string()))?;
    pool.install(|| match config.task {
        Task::Levels => run_levels(config, &dir),
        Task::Spectrum if config.normalize == Normalization::PaperFigure => {
            run_spectrum_set(config, &dir)
        }
        _ => run_points(config, &dir),
    })
}

/// Grid-point tasks, reusing successful records of an identical earlier run.
fn run_points(config: &SweepConfig, dir: &Path) -> Result<SweepResult, SweepError> {
    let prior = output::prior_records(dir, config);
    let points = config.points();
    let records: Vec<(PointRecord, bool)> = points
        .par_iter()
        .map(|&(label, g, t)| {
            if let Some(r) = prior.get(&point_key(g, t)) {
                return (r.clone(), true);
            }
            let start = Instant::now();
            let outcome = match config.task {
                Task::G2zero => g2zero_point(config, g, t),
                Task::Baseline => baseline_point(config, g, t),
                Task::G2tau | Task::Crosscorr | Task::Spectrum => {
                    trace_point(config, dir, label, g, t)
                }
                Task::Levels => unreachable!("levels is a single sweep"),
            };
            (finish(config, label, g, t, outcome, start), false)
        })
        .collect();
    let reused = records.iter().filter(|r| r.1).count();
    let records: Vec<PointRecord> = records.into_iter().map(|r| r.0).collect();
    write_all(config, dir, records, Vec::new(), reused)
}

fn finish(
    config: &SweepConfig,
    label: Option<&str>,
    g: f64,
    t: f64,
    outcome: crate::error::Result<PointOutput>,
    start: Instant,
) -> PointRecord {
    let observable = observable(config.task).to_string();
    let n_fock = match config.task {
        Task::Baseline => config.baseline_n_fock,
        _ => config.n_fock,
    };
    let (value, region, converged, file, error) = match outcome {
        Ok(o) => (o.value, o.region, o.converged, o.file, None),
        Err(e) => (None, None, None, None, Some(e.code().to_string())),
    };
    PointRecord {
        label: label.map(str::to_string),
        g,
        temperature: t,
        observable,
        value,
        region,
        n_fock,
        converged,
        error,
        file,
        wall_time_s: start.elapsed().as_secs_f64(),
    }
}

fn observable(task: Task) -> &'static str {
    match task {
        Task::G2zero => "g2",
        Task::Baseline => "g2_standard_me",
        Task::G2tau => "g2_at_first_tau",
        Task::Crosscorr => "g2_cross_max",
        Task::Spectrum => "flux",
        Task::Levels => "gap_10",
    }
}

fn write_all(
    config: &SweepConfig,
    dir: &Path,
    records: Vec<PointRecord>,
    mut files: Vec<String>,
    reused: usize,
) -> Result<SweepResult, SweepError> {
    files.extend(records.iter().filter_map(|r| r.file.clone()));
    files.push(output::write_records(dir, config, &run_header(config), &records)?);
    let manifest = Manifest::new(config, &records, files);
    manifest.write(dir)?;
    Ok(SweepResult { records, files: manifest.files, reused })
}

fn convergence(config: &SweepConfig, g: f64, t: f64) -> crate::error::Result<Option<bool>> {
    if !config.check_convergence {
        return Ok(None);
    }
    Ok(Some(check_truncation(&config.model_spec(g), t)?.passed()))
}

fn g2zero_point(config: &SweepConfig, g: f64, t: f64) -> crate::error::Result<PointOutput> {
    let (basis, table) = dress(&config.model_spec(g).build()?)?;
    let state = thermal_state(&basis, t)?;
    let cut = config.level_cut.unwrap_or_else(|| basis.default_level_cut(t)).min(basis.dim());
    let value = g2_zero(&basis, &table, &state, cut)?;
    Ok(PointOutput {
        value: Some(value),
        region: Some(Region::classify(value)),
        converged: convergence(config, g, t)?,
        file: None,
    })
}

fn baseline_point(config: &SweepConfig, g: f64, t: f64) -> crate::error::Result<PointOutput> {
    let params =
        RabiParams { omega0: 1.0, omega_x: config.omega_x, g, n_fock: config.baseline_n_fock };
    let value = standard_me_g2(&params, &BathSpec::new(config.gamma_a, config.gamma_x, t)?)?;
    Ok(PointOutput {
        value: Some(value),
        region: Some(Region::classify(value)),
        converged: None,
        file: None,
    })
}

fn source(config: &SweepConfig, g: f64, t: f64) -> crate::error::Result<StationarySource> {
    let bath = BathSpec::new(config.gamma_a, config.gamma_x, t)?;
    StationarySource::new(&config.model_spec(g).build()?, bath, config.level_cut)
}

fn point_name(label: Option<&str>, g: f64, t: f64) -> String {
    match label {
        Some(l) => l.to_string(),
        None => format!("g{g}_T{t}"),
    }
}

fn trace_header(config: &SweepConfig, label: Option<&str>, g: f64, t: f64, cut: usize) -> Header {
    let mut h = run_header(config);
    if let Some(l) = label {
        h.push("label", l);
    }
    h.push("g", sig12(g)).push("T", sig12(t)).push("level_cut_used", cut);
    h
}

/// Delay grid from the configuration, or the linewidth-based default
/// (mirrored to negative delays for the cross-correlation).
fn delays(config: &SweepConfig, src: &StationarySource) -> crate::error::Result<Vec<f64>> {
    if let Some(spec) = &config.tau {
        return Ok(spec.values());
    }
    let positive = src.default_tau_grid()?;
    if config.task != Task::Crosscorr {
        return Ok(positive);
    }
    let mut all: Vec<f64> = positive[1..].iter().rev().map(|t| -t).collect();
    all.extend(positive);
    Ok(all)
}

fn trace_point(
    config: &SweepConfig,
    dir: &Path,
    label: Option<&str>,
    g: f64,
    t: f64,
) -> crate::error::Result<PointOutput> {
    let src = source(config, g, t)?;
    let header = trace_header(config, label, g, t, src.level_cut());
    let name = format!("{}_{}.{}", config.task.as_str(), point_name(label, g, t), ext(config));
    let path = dir.join(&name);
    let io = |e: std::io::Error| Error::Numerical(format!("cannot write {name}: {e}"));
    let value = match config.task {
        Task::G2tau => {
            let trace = g2_tau(&src, &delays(config, &src)?)?;
            write_table(&path, config.format, &header, &[("tau", &trace.tau), ("g2", &trace.values)])
                .map_err(io)?;
            trace.values[0]
        }
        Task::Crosscorr => {
            let trace = g2_cross_filtered(&src, &delays(config, &src)?)?;
            write_table(
                &path,
                config.format,
                &header,
                &[("tau", &trace.tau), ("g2_21_10", &trace.values)],
            )
            .map_err(io)?;
            trace.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
        Task::Spectrum => {
            let s = emission_spectrum(&src, &config.omega.values(), config.normalize)?;
            write_spectrum(&path, config, header, &s).map_err(io)?;
            s.flux
        }
        _ => unreachable!("not a trace task"),
    };
    Ok(PointOutput { value: Some(value), region: None, converged: convergence(config, g, t)?, file: Some(name) })
}

fn write_spectrum(
    path: &Path,
    config: &SweepConfig,
    mut header: Header,
    s: &Spectrum,
) -> std::io::Result<()> {
    header.push("normalization", s.normalization.as_str()).push("flux", sig12(s.flux));
    write_table(path, config.format, &header, &[("omega", &s.omega), ("S", &s.values)])
}

/// Spectra normalized together; every point is recomputed because the scale
/// depends on the whole set.
fn run_spectrum_set(config: &SweepConfig, dir: &Path) -> Result<SweepResult, SweepError> {
    let omega = config.omega.values();
    let points = config.points();
    let computed: Vec<(crate::error::Result<(Spectrum, usize)>, f64)> = points
        .par_iter()
        .map(|&(_, g, t)| {
            let start = Instant::now();
            let out = source(config, g, t).and_then(|src| {
                Ok((emission_spectrum(&src, &omega, Normalization::Raw)?, src.level_cut()))
            });
            (out, start.elapsed().as_secs_f64())
        })
        .collect();
    let mut ok: Vec<Spectrum> =
        computed.iter().filter_map(|(r, _)| r.as_ref().ok().map(|s| s.0.clone())).collect();
    if !ok.is_empty() {
        normalize_set(&mut ok)?;
    }
    let mut normalized = ok.into_iter();
    let mut records = Vec::with_capacity(points.len());
    for (&(label, g, t), (result, wall)) in points.iter().zip(computed) {
        let start = Instant::now();
        let outcome = match result {
            Ok((_, cut)) => {
                let s = normalized.next().expect("one normalized spectrum per success");
                let name = format!("spectrum_{}.{}", point_name(label, g, t), ext(config));
                let header = trace_header(config, label, g, t, cut);
                write_spectrum(&dir.join(&name), config, header, &s)?;
                convergence(config, g, t).map(|converged| PointOutput {
                    value: Some(s.flux),
                    region: None,
                    converged,
                    file: Some(name),
                })
            }
            Err(e) => Err(e),
        };
        let mut r = finish(config, label, g, t, outcome, start);
        r.wall_time_s += wall;
        records.push(r);
    }
    write_all(config, dir, records, Vec::new(), 0)
}

fn ext(config: &SweepConfig) -> &'static str {
    match config.format {
        super::config::OutputFormat::Csv => "csv",
        super::config::OutputFormat::Json => "json",
    }
}

/// Dressed levels along the coupling grid, with one record per coupling.
fn run_levels(config: &SweepConfig, dir: &Path) -> Result<SweepResult, SweepError> {
    let start = Instant::now();
    let grid = config.g.values();
    let sweep = level_sweep(|g| config.model_spec(g).build(), &grid, config.levels)?;
    let name = format!("energies.{}", ext(config));
    let mut header = run_header(config);
    header.push("levels", config.levels);
    let text = match config.format {
        super::config::OutputFormat::Csv => {
            let mut s = header.csv();
            s.push_str(&sweep.to_csv());
            s
        }
        super::config::OutputFormat::Json => {
            let crossings: Vec<_> = sweep
                .crossings
                .iter()
                .map(|c| serde_json::json!({
                    "lower": c.lower, "upper": c.upper,
                    "g_before": c.g_before, "g_after": c.g_after,
                }))
                .collect();
            let v = serde_json::json!({
                "metadata": header.json(), "g": sweep.g, "energies": sweep.energies, "crossings": crossings,
            });
            serde_json::to_string_pretty(&v).expect("levels serialize") + "\n"
        }
    };
    fs::write(dir.join(&name), text)?;
    let wall = start.elapsed().as_secs_f64() / grid.len().max(1) as f64;
    let records = sweep
        .g
        .iter()
        .zip(&sweep.energies)
        .map(|(&g, e)| PointRecord {
            label: None,
            g,
            temperature: config.t.min,
            observable: observable(Task::Levels).into(),
            value: Some(e[1] - e[0]),
            region: None,
            n_fock: config.n_fock,
            converged: None,
            error: None,
            file: None,
            wall_time_s: wall,
        })
        .collect();
    write_all(config, dir, records, vec![name], 0)
}
