//! `fit`: manifest-driven χ² fits, or the power-broadening regression.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use qdvapor::constants::{ghz_to_rad, rad_to_ghz};
use qdvapor::fit::manifest::FitManifest;
use qdvapor::fit::tasks::{fit_power_broadening, PowerPoint};
use qdvapor::fit::FitResult;
use qdvapor::PowerCalibration;

use crate::output::{sibling, table, Axis, PlotSpec, Run, Series};

#[derive(Debug, Args, Serialize)]
pub struct FitArgs {
    /// JSON fit manifest (datasets, models, parameter table)
    #[arg(long, required_unless_present = "power_data", conflicts_with = "power_data")]
    pub manifest: Option<PathBuf>,
    /// Linewidth-vs-power CSV with header `intensity_nw_um2,fwhm_ghz[,sigma_ghz]`
    #[arg(long)]
    pub power_data: Option<PathBuf>,
    /// Γ_sp/2π subtracted in the power-broadening fit
    #[arg(long, default_value_t = 1.42)]
    pub gamma_sp_ghz: f64,
    /// Overrides the manifest seed
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the number of optimizer starts
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Skip the profile-likelihood intervals
    #[arg(long)]
    pub no_profile: bool,
    /// Overrides the baseline distance of every normalized scan
    #[arg(long)]
    pub baseline_mask_ghz: Option<f64>,
    /// Result JSON; fitted curves go to `<stem>_<dataset>.csv`
    #[arg(short, long)]
    pub output: PathBuf,
}

pub fn fit(a: &FitArgs) -> Result<()> {
    match (&a.manifest, &a.power_data) {
        (Some(m), _) => fit_manifest(a, m),
        (None, Some(p)) => fit_power(a, p),
        (None, None) => unreachable!("clap requires one of them"),
    }
}

fn fit_manifest(a: &FitArgs, path: &Path) -> Result<()> {
    let mut run = Run::new("fit", a)?;
    run.input(path)?;
    let mut manifest = FitManifest::load(path).with_context(|| format!("loading manifest {}", path.display()))?;
    if let Some(seed) = a.seed {
        manifest.seed = seed;
    }
    let mut config = manifest.fit_config();
    if let Some(r) = a.restarts {
        config.restarts = r;
    }
    if a.no_profile {
        config.profile = false;
    }
    manifest.config = Some(config);
    if let Some(mask) = a.baseline_mask_ghz {
        for d in &mut manifest.datasets {
            if let Some(n) = d.normalize.as_mut() {
                n.mask_ghz = mask;
            }
        }
    }
    run.seed(manifest.seed);
    let base = path.parent().unwrap_or(Path::new(""));
    for file in manifest.input_files(base) {
        run.input(&file)?;
    }
    let result = manifest.run(base)?;
    run.write_json(&a.output, &result)?;
    for c in manifest.curves(base, &result.theta())? {
        let file = sibling(&a.output, &format!("_{}.csv", c.dataset));
        let residual: Vec<f64> = c.values.iter().zip(&c.model).zip(&c.sigma).map(|((v, m), s)| (v - m) / s).collect();
        let headers = [c.axis.as_str(), "value", "sigma", "model", "residual"];
        run.write(&file, &table(&headers, &[&c.x, &c.values, &c.sigma, &c.model, &residual])?)?;
        let (x, label) = if c.axis == "offset_hz" {
            (Axis::x("offset_hz", "frequency offset (GHz)", 1e-9), "transmission")
        } else {
            (Axis::x("delay_s", "delay (ns)", 1e9), "value")
        };
        run.plot(
            &file,
            PlotSpec {
                title: format!("{}: data and best fit", c.dataset),
                x,
                y: Axis::y(label),
                series: vec![
                    Series::new("value", "data", "points").with_errors("sigma"),
                    Series::new("model", "fit", "line"),
                ],
            },
        )?;
    }
    print_summary(&result);
    run.finish(&a.output)?;
    Ok(())
}

fn print_summary(r: &FitResult) {
    // A closed stdout (e.g. piped into `head`) is not an error for a summary.
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "χ²_min = {:.3}, dof = {}, χ²/dof = {:.3}, converged = {}", r.chi2_min, r.dof, r.reduced_chi2(), r.converged);
    for p in &r.parameters {
        let _ = match (&p.interval, p.fixed) {
            (_, true) => writeln!(out, "  {:<24} {:>12.6}  (fixed)", p.name, p.value),
            (Some(iv), _) => writeln!(
                out,
                "  {:<24} {:>12.6}  +{:.6} / -{:.6}{}",
                p.name,
                p.value,
                iv.upper_error,
                iv.lower_error,
                if iv.lower_limited || iv.upper_limited { "  (bound reached)" } else { "" }
            ),
            (None, _) => writeln!(out, "  {:<24} {:>12.6}", p.name, p.value),
        };
    }
}

#[derive(Debug, Deserialize)]
struct PowerRow {
    intensity_nw_um2: f64,
    fwhm_ghz: f64,
    #[serde(default)]
    sigma_ghz: Option<f64>,
}

#[derive(Serialize)]
struct PowerReport {
    /// A in (rad/s)² per nW/µm².
    coefficient: f64,
    coefficient_sigma: f64,
    chi2: f64,
    dof: usize,
    gamma_sp_ghz: f64,
    /// Ω/2π implied at 141 nW/µm².
    rabi_at_141_ghz: f64,
}

fn fit_power(a: &FitArgs, path: &Path) -> Result<()> {
    let mut run = Run::new("fit", a)?;
    run.input(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let rows: Vec<PowerRow> = rdr.deserialize().collect::<std::result::Result<_, _>>().context("parsing power data")?;
    let points: Vec<PowerPoint> = rows
        .iter()
        .map(|r| PowerPoint {
            intensity: r.intensity_nw_um2,
            fwhm: ghz_to_rad(r.fwhm_ghz),
            sigma: r.sigma_ghz.map(ghz_to_rad),
        })
        .collect();
    let gamma_sp = ghz_to_rad(a.gamma_sp_ghz);
    let f = fit_power_broadening(&points, gamma_sp)?;
    let report = PowerReport {
        coefficient: f.coefficient,
        coefficient_sigma: f.sigma,
        chi2: f.chi2,
        dof: f.dof,
        gamma_sp_ghz: a.gamma_sp_ghz,
        rabi_at_141_ghz: rad_to_ghz(PowerCalibration::new(f.coefficient, 141.0)?.rabi_frequency()),
    };
    run.write_json(&a.output, &report)?;
    let x: Vec<f64> = rows.iter().map(|r| r.intensity_nw_um2).collect();
    let data: Vec<f64> = rows.iter().map(|r| r.fwhm_ghz).collect();
    let model: Vec<f64> = x.iter().map(|i| rad_to_ghz((gamma_sp * gamma_sp + 2.0 * f.coefficient * i).sqrt())).collect();
    let curve = sibling(&a.output, "_power.csv");
    run.write(&curve, &table(&["intensity_nw_um2", "fwhm_ghz", "model_ghz"], &[&x, &data, &model])?)?;
    run.plot(
        &curve,
        PlotSpec {
            title: format!("Power broadening, A = {:.3e} (rad/s)²/(nW/µm²)", f.coefficient),
            x: Axis::x("intensity_nw_um2", "resonant intensity (nW/µm²)", 1.0),
            y: Axis::y("FWHM (GHz)"),
            series: vec![Series::new("fwhm_ghz", "data", "points"), Series::new("model_ghz", "fit", "line")],
        },
    )?;
    println!("A = {:.4e} ± {:.2e} (rad/s)²/(nW/µm²); Ω(141)/2π = {:.4} GHz", f.coefficient, f.sigma, report.rabi_at_141_ghz);
    run.finish(&a.output)?;
    Ok(())
}
