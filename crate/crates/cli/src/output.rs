//! Output files, plot specs and the run record written next to them.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub subcommand: String,
    pub version: String,
    pub parameters: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub outputs: Vec<PathBuf>,
    pub duration_s: f64,
}

pub struct Run {
    record: RunRecord,
    started: Instant,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `dir/stem.csv` → `dir/stem{suffix}`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

impl Run {
    pub fn new(subcommand: &str, parameters: impl Serialize) -> Result<Self> {
        Ok(Self {
            record: RunRecord {
                subcommand: subcommand.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                parameters: serde_json::to_value(parameters)?,
                inputs: Vec::new(),
                seed: None,
                outputs: Vec::new(),
                duration_s: 0.0,
            },
            started: Instant::now(),
        })
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.record.inputs.push(InputDigest { path: path.to_path_buf(), sha256 });
        Ok(())
    }

    pub fn seed(&mut self, seed: u64) {
        self.record.seed = Some(seed);
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.record.outputs.push(path.to_path_buf());
        Ok(())
    }

    pub fn write_json(&mut self, path: &Path, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(path, text.as_bytes())
    }

    /// Writes `stem.plot.json` describing how to draw `data`.
    pub fn plot(&mut self, data: &Path, spec: PlotSpec) -> Result<()> {
        let file = data.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
        let spec = PlotFile { data: file, ..spec.into() };
        self.write_json(&sibling(data, ".plot.json"), &spec)
    }

    /// Writes the record to `stem.run.json` next to `primary`.
    pub fn finish(mut self, primary: &Path) -> Result<RunRecord> {
        self.record.duration_s = self.started.elapsed().as_secs_f64();
        let path = sibling(primary, ".run.json");
        let mut text = serde_json::to_string_pretty(&self.record)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(self.record)
    }
}

/// CSV with one column per series, written with shortest round-trip floats.
pub fn table(headers: &[&str], columns: &[&[f64]]) -> Result<Vec<u8>> {
    let rows = columns.first().map_or(0, |c| c.len());
    anyhow::ensure!(columns.iter().all(|c| c.len() == rows), "table columns differ in length");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(headers)?;
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| c[i].to_string()))?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))
}

#[derive(Debug, Clone, Serialize)]
pub struct Series {
    pub column: String,
    pub label: String,
    /// `line`, `steps` or `points`.
    pub style: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_column: Option<String>,
}

impl Series {
    pub fn new(column: &str, label: &str, style: &str) -> Self {
        Self { column: column.into(), label: label.into(), style: style.into(), error_column: None }
    }

    pub fn with_errors(mut self, column: &str) -> Self {
        self.error_column = Some(column.into());
        self
    }
}

/// Axis description; plotted value = column value × scale.
#[derive(Debug, Clone, Serialize)]
pub struct Axis {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    pub label: String,
    pub scale: f64,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub log: bool,
}

impl Axis {
    pub fn x(column: &str, label: &str, scale: f64) -> Self {
        Self { column: Some(column.into()), label: label.into(), scale, log: false }
    }

    pub fn y(label: &str) -> Self {
        Self { column: None, label: label.into(), scale: 1.0, log: false }
    }

    pub fn log(mut self) -> Self {
        self.log = true;
        self
    }
}

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x: Axis,
    pub y: Axis,
    pub series: Vec<Series>,
}

#[derive(Debug, Clone, Serialize)]
struct PlotFile {
    title: String,
    data: String,
    x: Axis,
    y: Axis,
    series: Vec<Series>,
}

impl From<PlotSpec> for PlotFile {
    fn from(p: PlotSpec) -> Self {
        Self { title: p.title, data: String::new(), x: p.x, y: p.y, series: p.series }
    }
}

/// Frequency-offset axis in GHz for CSVs keyed by `offset_hz`.
pub fn offset_axis(label: &str) -> Axis {
    Axis::x("offset_hz", label, 1e-9)
}

/// Delay axis in ns for CSVs keyed by `delay_s`.
pub fn delay_axis() -> Axis {
    Axis::x("delay_s", "delay (ns)", 1e9)
}
