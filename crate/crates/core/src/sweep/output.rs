//! Files written by a sweep: record tables, per-point traces and the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{OutputFormat, SweepConfig};
use super::run::PointRecord;
use crate::format::sig12;
use crate::thermal::Region;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORD_COLUMNS: &str =
    "label,g,T,observable,value,region,n_fock,converged,error,file,wall_time_s";

/// `#key=value` header lines in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Header(pub Vec<(String, String)>);

impl Header {
    pub fn push(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.0.push((key.to_string(), value.to_string()));
        self
    }

    pub(crate) fn csv(&self) -> String {
        self.0.iter().map(|(k, v)| format!("#{k}={v}\n")).collect()
    }

    pub(crate) fn json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.0.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect(),
        )
    }
}

/// Metadata lines shared by every file of a run.
pub fn run_header(config: &SweepConfig) -> Header {
    let mut h = Header::default();
    h.push("task", config.task.as_str())
        .push("model", config.model)
        .push("omega_x", sig12(config.omega_x))
        .push("gamma_a", sig12(config.gamma_a))
        .push("gamma_x", sig12(config.gamma_x))
        .push("n_fock", config.n_fock)
        .push("level_cut", config.level_cut.map_or("auto".to_string(), |c| c.to_string()))
        .push("config_sha256", config.hash());
    h
}

/// Columns of equal length, written as CSV or as a JSON object.
pub fn write_table(
    path: &Path,
    format: OutputFormat,
    header: &Header,
    columns: &[(&str, &[f64])],
) -> std::io::Result<()> {
    let rows = columns.first().map_or(0, |c| c.1.len());
    let text = match format {
        OutputFormat::Csv => {
            let mut s = header.csv();
            s.push_str(&columns.iter().map(|c| c.0).collect::<Vec<_>>().join(","));
            s.push('\n');
            for i in 0..rows {
                let row: Vec<String> = columns.iter().map(|c| sig12(c.1[i])).collect();
                s.push_str(&row.join(","));
                s.push('\n');
            }
            s
        }
        OutputFormat::Json => {
            let mut obj = serde_json::Map::new();
            obj.insert("metadata".into(), header.json());
            for (name, values) in columns {
                obj.insert((*name).into(), serde_json::json!(values));
            }
            let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(obj))
                .expect("numbers serialize");
            s.push('\n');
            s
        }
    };
    fs::write(path, text)
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(sig12).unwrap_or_default()
}

pub fn records_csv(header: &Header, records: &[PointRecord]) -> String {
    let mut s = header.csv();
    s.push_str(RECORD_COLUMNS);
    s.push('\n');
    for r in records {
        let fields = [
            r.label.clone().unwrap_or_default(),
            sig12(r.g),
            sig12(r.temperature),
            r.observable.clone(),
            opt_f64(r.value),
            r.region.map(|x| x.as_str().to_string()).unwrap_or_default(),
            r.n_fock.to_string(),
            r.converged.map(|c| c.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
            r.file.clone().unwrap_or_default(),
            format!("{:.6}", r.wall_time_s),
        ];
        s.push_str(&fields.join(","));
        s.push('\n');
    }
    s
}

fn parse_records_csv(text: &str) -> Option<Vec<PointRecord>> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    if lines.next()? != RECORD_COLUMNS {
        return None;
    }
    let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
    lines
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 11 {
                return None;
            }
            Some(PointRecord {
                label: opt(f[0]),
                g: f[1].parse().ok()?,
                temperature: f[2].parse().ok()?,
                observable: f[3].to_string(),
                value: if f[4].is_empty() { None } else { Some(f[4].parse().ok()?) },
                region: match f[5] {
                    "" => None,
                    s => Some(serde_json::from_value::<Region>(s.into()).ok()?),
                },
                n_fock: f[6].parse().ok()?,
                converged: if f[7].is_empty() { None } else { Some(f[7].parse().ok()?) },
                error: opt(f[8]),
                file: opt(f[9]),
                wall_time_s: f[10].parse().ok()?,
            })
        })
        .collect()
}

pub fn records_file_name(config: &SweepConfig) -> String {
    match config.format {
        OutputFormat::Csv => format!("{}.csv", config.task.as_str()),
        OutputFormat::Json => format!("{}.json", config.task.as_str()),
    }
}

pub fn write_records(
    dir: &Path,
    config: &SweepConfig,
    header: &Header,
    records: &[PointRecord],
) -> std::io::Result<String> {
    let name = records_file_name(config);
    let text = match config.format {
        OutputFormat::Csv => records_csv(header, records),
        OutputFormat::Json => {
            let v = serde_json::json!({ "metadata": header.json(), "records": records });
            let mut s = serde_json::to_string_pretty(&v).expect("records serialize");
            s.push('\n');
            s
        }
    };
    fs::write(dir.join(&name), text)?;
    Ok(name)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub task: String,
    pub config_sha256: String,
    pub config: SweepConfig,
    pub points: usize,
    pub failed: usize,
    pub unconverged: usize,
    pub files: Vec<String>,
}

impl Manifest {
    pub fn new(config: &SweepConfig, records: &[PointRecord], mut files: Vec<String>) -> Self {
        let mut canonical = config.clone();
        canonical.out = None;
        canonical.workers = None;
        files.sort();
        files.dedup();
        Self {
            tool: "ustrong".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            task: config.task.as_str().into(),
            config_sha256: config.hash(),
            config: canonical,
            points: records.len(),
            failed: records.iter().filter(|r| r.error.is_some()).count(),
            unconverged: records.iter().filter(|r| r.converged == Some(false)).count(),
            files,
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        fs::write(dir.join(MANIFEST_FILE), s)
    }
}

/// Successful records of an earlier run of the same configuration, keyed by
/// the formatted `(g, T)` of each point. Empty when nothing can be reused.
pub fn prior_records(dir: &Path, config: &SweepConfig) -> BTreeMap<(String, String), PointRecord> {
    let mut out = BTreeMap::new();
    let Ok(text) = fs::read_to_string(dir.join(MANIFEST_FILE)) else {
        return out;
    };
    let Ok(manifest) = serde_json::from_str::<Manifest>(&text) else {
        return out;
    };
    if manifest.config_sha256 != config.hash() {
        return out;
    }
    let Ok(text) = fs::read_to_string(dir.join(records_file_name(config))) else {
        return out;
    };
    let records = match config.format {
        OutputFormat::Csv => parse_records_csv(&text),
        OutputFormat::Json => serde_json::from_str::<serde_json::Value>(&text)
            .ok()
            .and_then(|v| serde_json::from_value(v.get("records")?.clone()).ok()),
    };
    for r in records.unwrap_or_default() {
        let file_ok = r.file.as_ref().map_or(true, |f| dir.join(f).is_file());
        if r.error.is_none() && file_ok {
            out.insert(point_key(r.g, r.temperature), r);
        }
    }
    out
}

pub fn point_key(g: f64, t: f64) -> (String, String) {
    (sig12(g), sig12(t))
}
