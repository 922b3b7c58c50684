//! Forward-model subcommands: catalog, vapor, rf, g2, transmit, decay.

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;

use qdvapor::constants::{catalog_entries, ghz_to_rad, rad_to_ghz};
use qdvapor::emitter::{
    coherent_fraction, excited_population, incoherent_weight, power_broadened_fwhm, rf_spectrum,
};
use qdvapor::instrument::{predict_transmission_nonresonant, predict_transmission_resonant, LaserModel};
use qdvapor::simkit::synth::{decay_model, Binning, G2Spec};
use qdvapor::vapor::transmission_spectrum;
use qdvapor::{DecayParams, EmitterParams, PowerCalibration, Spectrum};

use crate::args::{BlinkingArgs, CellArgs, EmitterArgs, GridArgs, IrfArgs};
use crate::output::{delay_axis, offset_axis, sibling, table, Axis, PlotSpec, Run, Series};

fn spectrum_bytes(s: &Spectrum) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    s.write_csv(&mut buf)?;
    Ok(buf)
}

fn histogram_bytes(h: &qdvapor::Histogram) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    h.write_csv(&mut buf)?;
    Ok(buf)
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CatalogFormat {
    Json,
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct CatalogArgs {
    #[arg(long, value_enum, default_value = "json")]
    pub format: CatalogFormat,
    /// Output file; printed to stdout when omitted
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

pub fn catalog(a: &CatalogArgs) -> Result<()> {
    let entries = catalog_entries();
    let bytes = match a.format {
        CatalogFormat::Json => {
            let mut s = serde_json::to_string_pretty(&entries)?;
            s.push('\n');
            s.into_bytes()
        }
        CatalogFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for e in &entries {
                w.serialize(e)?;
            }
            w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?
        }
    };
    match &a.output {
        Some(path) => {
            let mut run = Run::new("catalog", a)?;
            run.write(path, &bytes)?;
            run.finish(path)?;
        }
        None => print!("{}", String::from_utf8(bytes)?),
    }
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct VaporArgs {
    #[command(flatten)]
    pub cell: CellArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Laser transmission of the vapor cell.
pub fn vapor(a: &VaporArgs) -> Result<()> {
    let mut run = Run::new("vapor", a)?;
    let s = transmission_spectrum(&a.grid.grid()?, &a.cell.cell()?)?;
    run.write(&a.output, &spectrum_bytes(&s)?)?;
    run.plot(
        &a.output,
        PlotSpec {
            title: format!("Rb D2 transmission, {} mm cell at {} °C", a.cell.cell_length_mm, a.cell.cell_temp_c),
            x: offset_axis("laser detuning (GHz)"),
            y: Axis::y("transmission"),
            series: vec![Series::new("value", "transmission", "line")],
        },
    )?;
    run.finish(&a.output)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "kebab-case")]
pub enum RfCurve {
    /// Incoherent emission spectrum plus the coherent weight
    Emission,
    /// Fluorescence intensity against laser detuning
    Excitation,
    /// Linewidth and coherent fraction against resonant intensity
    PowerBroadening,
}

#[derive(Debug, Args, Serialize)]
pub struct RfArgs {
    #[command(flatten)]
    pub emitter: EmitterArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long, value_enum, default_value = "emission")]
    pub curve: RfCurve,
    /// Highest intensity of the power-broadening sweep, nW/µm²
    #[arg(long, default_value_t = 600.0)]
    pub max_intensity_nw_um2: f64,
    /// Points in the power-broadening sweep
    #[arg(long, default_value_t = 121)]
    pub points: usize,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Serialize)]
struct RfSummary {
    gamma_sp_ghz: f64,
    gamma_star_ghz: f64,
    rabi_ghz: f64,
    coherent_weight: f64,
    incoherent_weight: f64,
    /// Coherent plus incoherent weight, the latter by adaptive quadrature.
    normalization: f64,
    /// Incoherent weight that falls inside the written grid.
    grid_captured_fraction: f64,
    /// FWHM of the excitation line (GHz).
    excitation_fwhm_ghz: f64,
}

fn excitation_fwhm(p: &EmitterParams) -> f64 {
    let g2 = 0.5 * p.gamma_sp + p.gamma_star;
    2.0 * (g2 * g2 + p.rabi * p.rabi * g2 / p.gamma_sp).sqrt()
}

pub fn rf(a: &RfArgs) -> Result<()> {
    let mut run = Run::new("rf", a)?;
    let e = a.emitter.resolve(Some(&mut run))?;
    let p = e.params()?;
    match a.curve {
        RfCurve::Emission => {
            let spec = rf_spectrum(&a.grid.grid()?, &p)?;
            let inc = incoherent_weight(&p)?;
            let summary = RfSummary {
                gamma_sp_ghz: e.gamma_sp_ghz,
                gamma_star_ghz: e.gamma_star_ghz,
                rabi_ghz: e.rabi_ghz,
                coherent_weight: spec.delta_weight,
                incoherent_weight: inc,
                normalization: spec.delta_weight + inc,
                grid_captured_fraction: spec.captured_fraction,
                excitation_fwhm_ghz: rad_to_ghz(excitation_fwhm(&p)),
            };
            run.write(&a.output, &spectrum_bytes(&spec.incoherent)?)?;
            run.write_json(&sibling(&a.output, ".json"), &summary)?;
            run.plot(
                &a.output,
                PlotSpec {
                    title: format!("Incoherent resonance fluorescence (coherent weight {:.3})", spec.delta_weight),
                    x: offset_axis("detuning from the emitter (GHz)"),
                    y: Axis::y("spectral density (1/Hz)"),
                    series: vec![Series::new("value", "incoherent part", "line")],
                },
            )?;
        }
        RfCurve::Excitation => {
            let grid = a.grid.grid()?;
            let x = grid.points();
            let peak = excited_population(0.0, &p);
            let v: Vec<f64> = x.iter().map(|hz| excited_population(ghz_to_rad(hz * 1e-9), &p) / peak).collect();
            run.write(&a.output, &spectrum_bytes(&Spectrum::new(grid, v)?)?)?;
            run.plot(
                &a.output,
                PlotSpec {
                    title: format!("Resonance fluorescence vs laser detuning, FWHM {:.3} GHz", rad_to_ghz(excitation_fwhm(&p))),
                    x: offset_axis("laser detuning (GHz)"),
                    y: Axis::y("normalized intensity"),
                    series: vec![Series::new("value", "two-level model", "line")],
                },
            )?;
        }
        RfCurve::PowerBroadening => {
            if a.points < 2 || !(a.max_intensity_nw_um2 > 0.0) {
                bail!("the power sweep needs --points ≥ 2 and a positive --max-intensity-nw-um2");
            }
            let coeff = a.emitter.broadening_coefficient;
            let mut cols: [Vec<f64>; 4] = Default::default();
            for k in 0..a.points {
                let i = a.max_intensity_nw_um2 * k as f64 / (a.points - 1) as f64;
                let cal = PowerCalibration::new(coeff, i)?;
                let q = EmitterParams::new(p.gamma_sp, p.gamma_star, cal.rabi_frequency())?;
                let fwhm = if p.gamma_star == 0.0 { power_broadened_fwhm(p.gamma_sp, &cal) } else { excitation_fwhm(&q) };
                cols[0].push(i);
                cols[1].push(rad_to_ghz(cal.rabi_frequency()));
                cols[2].push(rad_to_ghz(fwhm));
                cols[3].push(coherent_fraction(&q));
            }
            let headers = ["intensity_nw_um2", "rabi_ghz", "fwhm_ghz", "coherent_fraction"];
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            run.write(&a.output, &table(&headers, &refs)?)?;
            run.plot(
                &a.output,
                PlotSpec {
                    title: "Power broadening of the resonance fluorescence".into(),
                    x: Axis::x("intensity_nw_um2", "resonant intensity (nW/µm²)", 1.0),
                    y: Axis::y("FWHM (GHz)"),
                    series: vec![Series::new("fwhm_ghz", "√(Γ_sp² + 2AI)", "line")],
                },
            )?;
        }
    }
    run.finish(&a.output)?;
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct G2Args {
    #[command(flatten)]
    pub emitter: EmitterArgs,
    #[command(flatten)]
    pub blinking: BlinkingArgs,
    #[command(flatten)]
    pub irf: IrfArgs,
    /// Histogram covers ±span
    #[arg(long, default_value_t = 5.0)]
    pub span_ns: f64,
    #[arg(long, default_value_t = 50.0)]
    pub bin_ps: f64,
    /// Use a logarithmic delay axis in the plot spec
    #[arg(long)]
    pub log_delay: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

fn symmetric_binning(span_s: f64, bin_s: f64) -> Result<Binning> {
    if !(span_s > 0.0 && bin_s > 0.0 && bin_s < span_s) {
        bail!("need 0 < bin width < span");
    }
    let half = (span_s / bin_s).round() as usize;
    Ok(Binning { start_s: -(half as f64 + 0.5) * bin_s, bin_width_s: bin_s, bins: 2 * half + 1 })
}

/// Bin-averaged, IRF-convolved g² model.
pub fn g2(a: &G2Args) -> Result<()> {
    let mut run = Run::new("g2", a)?;
    let e = a.emitter.resolve(Some(&mut run))?;
    let spec = G2Spec {
        emitter: e.params()?,
        blinking: a.blinking.params()?,
        irf: a.irf.resolve(&mut run)?,
        binning: symmetric_binning(a.span_ns * 1e-9, a.bin_ps * 1e-12)?,
        coincidences_per_bin: 1.0,
    };
    let h = spec.model()?;
    run.write(&a.output, &histogram_bytes(&h)?)?;
    let x = if a.log_delay { delay_axis().log() } else { delay_axis() };
    run.plot(
        &a.output,
        PlotSpec {
            title: match spec.blinking {
                Some(b) => format!("g² with blinking, β = {}, τ_c = {} ns", b.on_fraction, b.correlation_time * 1e9),
                None => "g² of the driven two-level system".into(),
            },
            x,
            y: Axis::y("g²(τ)"),
            series: vec![Series::new("value", "model", "line")],
        },
    )?;
    run.finish(&a.output)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum TransmitMode {
    /// Narrow laser (the calibration scan)
    Laser,
    /// Lorentzian photoluminescence line
    Nonresonant,
    /// Resonance fluorescence of the driven emitter
    Resonant,
}

#[derive(Debug, Args, Serialize)]
pub struct TransmitArgs {
    #[arg(long, value_enum)]
    pub mode: TransmitMode,
    #[command(flatten)]
    pub cell: CellArgs,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Emitter linewidth Γ_NR/2π for non-resonant excitation
    #[arg(long, default_value_t = 1.6)]
    pub linewidth_ghz: f64,
    #[command(flatten)]
    pub emitter: EmitterArgs,
    /// Laser FWHM (Gaussian)
    #[arg(long, default_value_t = 1e6)]
    pub laser_fwhm_hz: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Transmission through the cell against the emitter (or laser) frequency.
pub fn transmit(a: &TransmitArgs) -> Result<()> {
    let mut run = Run::new("transmit", a)?;
    let cell = a.cell.cell()?;
    let grid = a.grid.grid()?;
    let (s, label) = match a.mode {
        TransmitMode::Laser => (transmission_spectrum(&grid, &cell)?, "laser".to_string()),
        TransmitMode::Nonresonant => (
            predict_transmission_nonresonant(&cell, ghz_to_rad(a.linewidth_ghz), &grid)?,
            format!("Lorentzian source, Γ_NR/2π = {} GHz", a.linewidth_ghz),
        ),
        TransmitMode::Resonant => {
            let e = a.emitter.resolve(Some(&mut run))?;
            let laser = LaserModel::new(a.laser_fwhm_hz)?;
            (
                predict_transmission_resonant(&cell, &e.params()?, &laser, &grid)?,
                format!(
                    "resonance fluorescence, Γ_sp/2π = {} GHz, γ*/2π = {} GHz, Ω/2π = {:.3} GHz",
                    e.gamma_sp_ghz, e.gamma_star_ghz, e.rabi_ghz
                ),
            )
        }
    };
    run.write(&a.output, &spectrum_bytes(&s)?)?;
    run.plot(
        &a.output,
        PlotSpec {
            title: format!("Transmission of the {} mm cell at {} °C: {label}", a.cell.cell_length_mm, a.cell.cell_temp_c),
            x: offset_axis("source frequency offset (GHz)"),
            y: Axis::y("transmission"),
            series: vec![Series::new("value", "model", "line")],
        },
    )?;
    run.finish(&a.output)?;
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct DecayArgs {
    /// Radiative decay rate Γ_sp/2π
    #[arg(long, default_value_t = 1.7)]
    pub gamma_sp_ghz: f64,
    /// Relaxation rate Γ_c/2π into the emitting state
    #[arg(long, default_value_t = 0.176)]
    pub gamma_c_ghz: f64,
    #[command(flatten)]
    pub irf: IrfArgs,
    #[arg(long, default_value_t = 8.0)]
    pub bin_ps: f64,
    #[arg(long, default_value_t = 12.5)]
    pub span_ns: f64,
    /// Arrival time of the excitation pulse
    #[arg(long, default_value_t = 1.0)]
    pub t0_ns: f64,
    /// Scale of the population curve (counts per bin)
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// Constant background per bin
    #[arg(long, default_value_t = 0.0)]
    pub background: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn decay(a: &DecayArgs) -> Result<()> {
    let mut run = Run::new("decay", a)?;
    let d = DecayParams::new(ghz_to_rad(a.gamma_c_ghz), ghz_to_rad(a.gamma_sp_ghz))?;
    let irf = a.irf.resolve(&mut run)?;
    let bins = (a.span_ns * 1e3 / a.bin_ps).round() as usize;
    if bins < 2 {
        bail!("--span-ns must cover at least two bins");
    }
    let template = Binning { start_s: 0.0, bin_width_s: a.bin_ps * 1e-12, bins }.template()?;
    let h = decay_model(&d, &irf, &template, a.amplitude, a.t0_ns * 1e-9, a.background)?;
    run.write(&a.output, &histogram_bytes(&h)?)?;
    run.plot(
        &a.output,
        PlotSpec {
            title: format!("Decay after pulsed excitation, rates {} and {} GHz", a.gamma_sp_ghz, a.gamma_c_ghz),
            x: delay_axis(),
            y: Axis::y("counts per bin").log(),
            series: vec![Series::new("value", "IRF-convolved model", "line")],
        },
    )?;
    run.finish(&a.output)?;
    Ok(())
}
