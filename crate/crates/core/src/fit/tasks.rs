//! The individual analyses: temperature calibration, non-resonant linewidth,
//! the joint (Γ_sp, γ*, Ω) fit, power broadening, decay and blinking.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::models::{DecayModel, G2Model, NonResonantScanModel, ResonantScanModel, VaporScanModel};
use super::optimize::{fit, FitConfig, FitResult, ParameterEstimate};
use super::problem::{FitProblem, Parameter};
use crate::emitter::EmitterParams;
use crate::error::{domain, invalid, Error, Result};
use crate::instrument::{default_baseline_mask, normalize_baseline, InstrumentResponse, LaserModel};
use crate::spectrum::{Histogram, Spectrum};
use crate::vapor::{VaporCell, MAX_TEMPERATURE_K, MIN_TEMPERATURE_K};

/// Baseline points must lie this far from every hyperfine line.
pub const BASELINE_DISTANCE_HZ: f64 = 4e9;

/// Divides a raw-count scan by the straight baseline through the points far
/// from all lines; σ follows to first order.
pub fn normalized_scan(raw: &Spectrum, background: f64) -> Result<Spectrum> {
    normalize_baseline(raw, &default_baseline_mask(&raw.grid, BASELINE_DISTANCE_HZ), background)
}

fn sigma_of<'a>(name: &str, sigma: &'a Option<Vec<f64>>) -> Result<&'a Vec<f64>> {
    sigma.as_ref().ok_or_else(|| invalid(format!("{name} needs per-point σ")))
}

/// Fits the cell temperature (°C) to a normalized laser transmission scan.
pub fn calibrate_temperature(scan: &Spectrum, length_m: f64, init_c: f64, config: &FitConfig) -> Result<FitResult> {
    let lo = (init_c - 20.0).max(MIN_TEMPERATURE_K - 273.15);
    let hi = (init_c + 20.0).min(MAX_TEMPERATURE_K - 273.15);
    let mut pr = FitProblem::new(vec![Parameter::free("temperature_c", init_c.clamp(lo, hi), lo, hi)])?;
    let model = VaporScanModel { grid: scan.grid, length_m };
    pr.add_dataset("scan", scan.values.clone(), sigma_of("scan", &scan.sigma)?.clone(), Arc::new(model), &HashMap::new())?;
    fit(&pr, config)
}

/// Fits the FWHM (GHz) of non-resonantly excited emission swept across the
/// cell.
pub fn fit_nonresonant_linewidth(scan: &Spectrum, cell: &VaporCell, init_ghz: f64, config: &FitConfig) -> Result<FitResult> {
    let mut pr = FitProblem::new(vec![Parameter::free("linewidth_ghz", init_ghz.clamp(1e-3, 30.0), 1e-3, 30.0)])?;
    let model = NonResonantScanModel::new(cell, &scan.grid)?;
    pr.add_dataset("scan", scan.values.clone(), sigma_of("scan", &scan.sigma)?.clone(), Arc::new(model), &HashMap::new())?;
    fit(&pr, config)
}

/// Joint fit of (Γ_sp, γ*, Ω) to a resonant transmission scan and/or a g²
/// histogram. Rates are in GHz (x/2π).
#[derive(Debug, Clone)]
pub struct GlobalFit {
    pub cell: VaporCell,
    pub laser: LaserModel,
    pub irf: InstrumentResponse,
    /// Normalized transmission with σ.
    pub scan: Option<Spectrum>,
    /// Normalized g² with σ.
    pub g2: Option<Histogram>,
    pub gamma_sp: Parameter,
    pub gamma_star: Parameter,
    pub rabi: Parameter,
}

impl GlobalFit {
    pub fn new(cell: VaporCell, laser: LaserModel, irf: InstrumentResponse) -> Self {
        Self {
            cell,
            laser,
            irf,
            scan: None,
            g2: None,
            gamma_sp: Parameter::free("gamma_sp_ghz", 1.0, 0.2, 5.0),
            gamma_star: Parameter::free("gamma_star_ghz", 0.2, 0.0, 3.0),
            rabi: Parameter::free("rabi_ghz", 0.3, 0.01, 3.0),
        }
    }

    pub fn problem(&self) -> Result<FitProblem> {
        let mut pr = FitProblem::new(vec![self.gamma_sp.clone(), self.gamma_star.clone(), self.rabi.clone()])?;
        let none = HashMap::new();
        if let Some(s) = &self.scan {
            let model = ResonantScanModel::new(&self.cell, &self.laser, &s.grid)?;
            pr.add_dataset("transmission", s.values.clone(), sigma_of("scan", &s.sigma)?.clone(), Arc::new(model), &none)?;
        }
        if let Some(h) = &self.g2 {
            let model = G2Model { bins: super::models::template(h)?, irf: self.irf.clone(), blinking: false };
            pr.add_dataset("g2", h.values.clone(), sigma_of("g2", &h.sigma)?.clone(), Arc::new(model), &none)?;
        }
        Ok(pr)
    }
}

pub fn fit_global(setup: &GlobalFit, config: &FitConfig) -> Result<FitResult> {
    fit(&setup.problem()?, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    /// Resonant intensity I_R (nW/µm²).
    pub intensity: f64,
    /// Measured linewidth (rad/s).
    pub fwhm: f64,
    /// Uncertainty of the linewidth (rad/s); unweighted fit when absent.
    pub sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerBroadeningFit {
    /// A in (rad/s)² per nW/µm².
    pub coefficient: f64,
    pub sigma: f64,
    pub chi2: f64,
    pub dof: usize,
}

/// Weighted least squares of FWHM² − Γ_sp² = 2A·I through the origin.
/// At least two distinct intensities are required.
pub fn fit_power_broadening(points: &[PowerPoint], gamma_sp: f64) -> Result<PowerBroadeningFit> {
    if points.len() < 2 {
        return Err(invalid("power broadening needs at least two points"));
    }
    if points.iter().any(|p| !(p.intensity >= 0.0 && p.intensity.is_finite() && p.fwhm > 0.0 && p.fwhm.is_finite())) {
        return Err(invalid("intensities must be ≥ 0 and linewidths positive"));
    }
    let first = points[0].intensity;
    if points.iter().all(|p| p.intensity == first) {
        return Err(Error::Rank("all intensities are equal".into()));
    }
    let weighted = points.iter().all(|p| p.sigma.is_some());
    let rows: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|p| {
            let x = 2.0 * p.intensity;
            let y = p.fwhm * p.fwhm - gamma_sp * gamma_sp;
            let w = match p.sigma {
                Some(s) if weighted => 1.0 / (2.0 * p.fwhm * s).powi(2),
                _ => 1.0,
            };
            (x, y, w)
        })
        .collect();
    let sxx: f64 = rows.iter().map(|(x, _, w)| w * x * x).sum();
    let sxy: f64 = rows.iter().map(|(x, y, w)| w * x * y).sum();
    let a = sxy / sxx;
    if !(a > 0.0) {
        return Err(domain(format!("data imply a non-positive broadening coefficient ({a})")));
    }
    let chi2: f64 = rows.iter().map(|(x, y, w)| w * (y - a * x).powi(2)).sum();
    let dof = points.len() - 1;
    let sigma = if weighted { (1.0 / sxx).sqrt() } else { (chi2 / dof as f64 / sxx).sqrt() };
    Ok(PowerBroadeningFit { coefficient: a, sigma, chi2, dof })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Larger of the two fitted rates (GHz).
    pub fast: ParameterEstimate,
    pub slow: ParameterEstimate,
    pub result: FitResult,
}

/// Fits two rates, amplitude and time offset to a decay histogram (counts
/// with σ). Rates are labelled only by magnitude.
pub fn fit_decay(h: &Histogram, irf: &InstrumentResponse, background: f64, config: &FitConfig) -> Result<DecayFit> {
    let sigma = sigma_of("decay histogram", &h.sigma)?.clone();
    let span_ns = (h.end() - h.start_s) * 1e9;
    let bin_ns = h.bin_width_s * 1e9;
    let rate_lo = 0.2 / (std::f64::consts::TAU * span_ns);
    let rate_hi = 1.0 / (std::f64::consts::TAU * bin_ns);
    let peak = h.values.iter().cloned().fold(f64::MIN, f64::max);
    if !(peak > background) {
        return Err(Error::EmptyData("decay histogram has no signal above background".into()));
    }
    let k_max = h.values.iter().position(|v| *v == peak).unwrap_or(0);
    let t_lo = h.start_s * 1e9;
    let t_hi = t_lo + 0.5 * span_ns;
    let t_init = (h.centre(k_max) * 1e9 - 0.2).clamp(t_lo, t_hi);
    let mid = (rate_lo * rate_hi).sqrt();
    let params = vec![
        Parameter::free("rate_a_ghz", (4.0 * mid).min(rate_hi), rate_lo, rate_hi),
        Parameter::free("rate_b_ghz", (0.25 * mid).max(rate_lo), rate_lo, rate_hi),
        Parameter::free("amplitude", 1.2 * (peak - background), 0.0, 50.0 * (peak - background)),
        Parameter::free("time_offset_ns", t_init, t_lo, t_hi),
    ];
    let mut pr = FitProblem::new(params)?;
    let model = DecayModel { bins: super::models::template(h)?, irf: irf.clone(), background };
    pr.add_dataset("decay", h.values.clone(), sigma, Arc::new(model), &HashMap::new())?;
    let result = fit(&pr, config)?;
    let (a, b) = (result.parameters[0].clone(), result.parameters[1].clone());
    let (fast, slow) = if a.value >= b.value { (a, b) } else { (b, a) };
    Ok(DecayFit { fast, slow, result })
}

/// Fits (β, τ_c) to a normalized g² histogram with the two-level part held
/// at `p`.
pub fn fit_blinking(h: &Histogram, p: &EmitterParams, irf: &InstrumentResponse, config: &FitConfig) -> Result<FitResult> {
    let sigma = sigma_of("g2 histogram", &h.sigma)?.clone();
    let reach_ns = h.start_s.abs().max(h.end().abs()) * 1e9;
    let tau_lo = (h.bin_width_s * 1e9).max(1e-3);
    let tau_hi = 2.0 * reach_ns;
    if !(tau_hi > tau_lo) {
        return Err(invalid("histogram span is too short to fit a correlation time"));
    }
    let to_ghz = |w: f64| w / std::f64::consts::TAU * 1e-9;
    let params = vec![
        Parameter::fixed("gamma_sp_ghz", to_ghz(p.gamma_sp)),
        Parameter::fixed("gamma_star_ghz", to_ghz(p.gamma_star)),
        Parameter::fixed("rabi_ghz", to_ghz(p.rabi)),
        Parameter::free("on_fraction", 0.5, 0.01, 1.0),
        Parameter::free("correlation_time_ns", (0.1 * reach_ns).clamp(tau_lo, tau_hi), tau_lo, tau_hi),
    ];
    let mut pr = FitProblem::new(params)?;
    let model = G2Model { bins: super::models::template(h)?, irf: irf.clone(), blinking: true };
    pr.add_dataset("g2", h.values.clone(), sigma, Arc::new(model), &HashMap::new())?;
    fit(&pr, config)
}
