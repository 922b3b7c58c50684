//! Monte-Carlo click streams and synthetic datasets.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use qdvapor::constants::{celsius_to_kelvin, ghz_to_rad};
use qdvapor::fit::manifest::IrfSpec;
use qdvapor::instrument::LaserModel;
use qdvapor::simkit::synth::{Binning, DecaySpec, G2Spec, ScanSource, ScanSpec};
use qdvapor::simkit::{correlate_stream, simulate_clickstream, synthesize_dataset, DatasetSpec, NoiseModel, SyntheticData};
use qdvapor::spectrum::FrequencyGrid;
use qdvapor::{BlinkingParams, DecayParams, VaporCell};

use crate::args::{BlinkingArgs, EmitterArgs, EmitterGhz};
use crate::output::{delay_axis, offset_axis, sibling, Axis, PlotSpec, Run, Series};

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// Photon arrival times from the quantum-jump simulation
    Stream(StreamArgs),
    /// Click stream correlated into a normalized g² histogram
    G2(SimG2Args),
    /// Noisy synthetic scan or histogram from a JSON request
    Dataset(DatasetArgs),
}

pub fn simulate(cmd: &SimulateCommand) -> Result<()> {
    match cmd {
        SimulateCommand::Stream(a) => stream(a),
        SimulateCommand::G2(a) => sim_g2(a),
        SimulateCommand::Dataset(a) => dataset(a),
    }
}

#[derive(Debug, Args, Serialize)]
pub struct SourceArgs {
    #[command(flatten)]
    pub emitter: EmitterArgs,
    #[command(flatten)]
    pub blinking: BlinkingArgs,
    /// Detection efficiency applied to every photon
    #[arg(long, default_value_t = 1.0)]
    pub efficiency: f64,
    #[arg(long)]
    pub seed: u64,
}

impl SourceArgs {
    fn clicks(&self, run: &mut Run, duration_s: f64) -> Result<qdvapor::simkit::ClickStream> {
        run.seed(self.seed);
        let e = self.emitter.resolve(Some(run))?;
        let blinking = self.blinking.params()?.unwrap_or(BlinkingParams::new(1.0, self.blinking.tau_c_ns * 1e-9)?);
        let s = simulate_clickstream(&e.params()?, &blinking, duration_s, self.seed)?;
        Ok(if self.efficiency < 1.0 { s.thinned(self.efficiency)? } else { s })
    }
}

#[derive(Debug, Args, Serialize)]
pub struct StreamArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 10.0)]
    pub duration_us: f64,
    /// Split into two detector channels (`<stem>_ch0.csv`, `<stem>_ch1.csv`)
    #[arg(long)]
    pub split: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn stream(a: &StreamArgs) -> Result<()> {
    let mut run = Run::new("simulate stream", a)?;
    let s = a.source.clicks(&mut run, a.duration_us * 1e-6)?;
    if a.split {
        let s = s.split()?;
        for k in 0..2 {
            let mut buf = Vec::new();
            s.write_channel_csv(k, &mut buf)?;
            run.write(&sibling(&a.output, &format!("_ch{k}.csv")), &buf)?;
        }
    } else {
        let mut buf = Vec::new();
        s.write_channel_csv(0, &mut buf)?;
        run.write(&a.output, &buf)?;
    }
    run.finish(&a.output)?;
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct SimG2Args {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = 1.0)]
    pub duration_ms: f64,
    #[arg(long, default_value_t = 100.0)]
    pub bin_ps: f64,
    /// Histogram covers ±span
    #[arg(long, default_value_t = 5.0)]
    pub span_ns: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Serialize)]
struct StreamSummary {
    clicks: usize,
    duration_s: f64,
    mean_rate_hz: f64,
}

fn sim_g2(a: &SimG2Args) -> Result<()> {
    let mut run = Run::new("simulate g2", a)?;
    let s = a.source.clicks(&mut run, a.duration_ms * 1e-3)?;
    let h = correlate_stream(&s, a.bin_ps * 1e-12, a.span_ns * 1e-9)?;
    let mut buf = Vec::new();
    h.write_csv(&mut buf)?;
    run.write(&a.output, &buf)?;
    let summary = StreamSummary { clicks: s.total_clicks(), duration_s: s.duration, mean_rate_hz: s.mean_rate() };
    run.write_json(&sibling(&a.output, ".json"), &summary)?;
    run.plot(
        &a.output,
        PlotSpec {
            title: format!("Simulated g² ({} clicks, seed {})", s.total_clicks(), a.source.seed),
            x: delay_axis(),
            y: Axis::y("g²(τ)"),
            series: vec![Series::new("value", "simulation", "points").with_errors("sigma")],
        },
    )?;
    run.finish(&a.output)?;
    Ok(())
}

fn default_length_mm() -> f64 {
    75.0
}

fn default_laser_mhz() -> f64 {
    1.0
}

/// Source of a simulated transmission scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceRequest {
    Laser,
    Nonresonant {
        linewidth_ghz: f64,
    },
    Resonant {
        gamma_sp_ghz: f64,
        #[serde(default)]
        gamma_star_ghz: f64,
        rabi_ghz: f64,
        #[serde(default = "default_laser_mhz")]
        laser_fwhm_mhz: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlinkingRequest {
    pub on_fraction: f64,
    pub correlation_time_ns: f64,
}

/// What to synthesize, in the CLI's units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetRequest {
    TransmissionScan {
        #[serde(default = "default_length_mm")]
        cell_length_mm: f64,
        cell_temp_c: f64,
        source: SourceRequest,
        start_ghz: f64,
        step_mhz: f64,
        points: usize,
        counts_per_point: f64,
        #[serde(default)]
        baseline_slope_per_ghz: f64,
        #[serde(default)]
        background: f64,
    },
    G2 {
        emitter: EmitterGhz,
        #[serde(default)]
        blinking: Option<BlinkingRequest>,
        irf: IrfSpec,
        start_ns: f64,
        bin_ps: f64,
        bins: usize,
        coincidences_per_bin: f64,
    },
    Decay {
        gamma_sp_ghz: f64,
        gamma_c_ghz: f64,
        irf: IrfSpec,
        #[serde(default)]
        start_ns: f64,
        bin_ps: f64,
        bins: usize,
        amplitude: f64,
        time_offset_ns: f64,
        #[serde(default)]
        background: f64,
    },
}

impl DatasetRequest {
    /// IRF files are resolved against `base`.
    pub fn spec(&self, base: &Path) -> Result<DatasetSpec> {
        Ok(match self {
            Self::TransmissionScan {
                cell_length_mm,
                cell_temp_c,
                source,
                start_ghz,
                step_mhz,
                points,
                counts_per_point,
                baseline_slope_per_ghz,
                background,
            } => DatasetSpec::TransmissionScan(ScanSpec {
                cell: VaporCell::new(cell_length_mm * 1e-3, celsius_to_kelvin(*cell_temp_c))?,
                source: match source {
                    SourceRequest::Laser => ScanSource::Laser,
                    SourceRequest::Nonresonant { linewidth_ghz } => {
                        ScanSource::NonResonant { linewidth: ghz_to_rad(*linewidth_ghz) }
                    }
                    SourceRequest::Resonant { gamma_sp_ghz, gamma_star_ghz, rabi_ghz, laser_fwhm_mhz } => ScanSource::Resonant {
                        emitter: EmitterGhz { gamma_sp_ghz: *gamma_sp_ghz, gamma_star_ghz: *gamma_star_ghz, rabi_ghz: *rabi_ghz }
                            .params()?,
                        laser: LaserModel::new(laser_fwhm_mhz * 1e6)?,
                    },
                },
                grid: FrequencyGrid::new(start_ghz * 1e9, step_mhz * 1e6, *points)?,
                counts_per_point: *counts_per_point,
                baseline_slope_per_ghz: *baseline_slope_per_ghz,
                background: *background,
            }),
            Self::G2 { emitter, blinking, irf, start_ns, bin_ps, bins, coincidences_per_bin } => DatasetSpec::G2(G2Spec {
                emitter: emitter.params()?,
                blinking: blinking
                    .map(|b| BlinkingParams::new(b.on_fraction, b.correlation_time_ns * 1e-9))
                    .transpose()?,
                irf: irf.resolve(base)?,
                binning: Binning { start_s: start_ns * 1e-9, bin_width_s: bin_ps * 1e-12, bins: *bins },
                coincidences_per_bin: *coincidences_per_bin,
            }),
            Self::Decay { gamma_sp_ghz, gamma_c_ghz, irf, start_ns, bin_ps, bins, amplitude, time_offset_ns, background } => {
                DatasetSpec::Decay(DecaySpec {
                    decay: DecayParams::new(ghz_to_rad(*gamma_c_ghz), ghz_to_rad(*gamma_sp_ghz))?,
                    irf: irf.resolve(base)?,
                    binning: Binning { start_s: start_ns * 1e-9, bin_width_s: bin_ps * 1e-12, bins: *bins },
                    amplitude: *amplitude,
                    time_offset_s: time_offset_ns * 1e-9,
                    background: *background,
                })
            }
        })
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    None,
    Poisson,
}

impl From<Noise> for NoiseModel {
    fn from(n: Noise) -> Self {
        match n {
            Noise::None => NoiseModel::None,
            Noise::Poisson => NoiseModel::Poisson,
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct DatasetArgs {
    /// JSON dataset request
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long, value_enum, default_value = "poisson")]
    pub noise: Noise,
    #[arg(long)]
    pub seed: u64,
    /// Data CSV; the ground truth goes to `<stem>.truth.json`
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    truth: &'a DatasetRequest,
    noise: Noise,
    seed: u64,
}

fn dataset(a: &DatasetArgs) -> Result<()> {
    let mut run = Run::new("simulate dataset", a)?;
    run.seed(a.seed);
    run.input(&a.spec)?;
    let text = std::fs::read_to_string(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let request: DatasetRequest =
        serde_json::from_str(&text).with_context(|| format!("parsing dataset request {}", a.spec.display()))?;
    let base = a.spec.parent().unwrap_or(Path::new(""));
    if let DatasetRequest::G2 { irf: IrfSpec::File { path }, .. } | DatasetRequest::Decay { irf: IrfSpec::File { path }, .. } =
        &request
    {
        run.input(&base.join(path))?;
    }
    let d = synthesize_dataset(&request.spec(base)?, a.noise.into(), a.seed)?;
    let mut buf = Vec::new();
    let plot = match &d.data {
        SyntheticData::Spectrum(s) => {
            s.write_csv(&mut buf)?;
            PlotSpec {
                title: "Synthetic transmission scan".into(),
                x: offset_axis("frequency offset (GHz)"),
                y: Axis::y("counts"),
                series: vec![Series::new("value", "data", "points").with_errors("sigma")],
            }
        }
        SyntheticData::Histogram(h) => {
            h.write_csv(&mut buf)?;
            PlotSpec {
                title: "Synthetic histogram".into(),
                x: delay_axis(),
                y: Axis::y("value"),
                series: vec![Series::new("value", "data", "points").with_errors("sigma")],
            }
        }
    };
    if buf.is_empty() {
        bail!("nothing synthesized");
    }
    run.write(&a.output, &buf)?;
    run.write_json(&sibling(&a.output, ".truth.json"), &Sidecar { truth: &request, noise: a.noise, seed: a.seed })?;
    run.plot(&a.output, plot)?;
    run.finish(&a.output)?;
    Ok(())
}
