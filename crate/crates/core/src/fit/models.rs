//! Forward models in the units used by fit manifests and reports: rates and
//! linewidths in GHz (x/2π), temperatures in °C, times in ns.

use crate::constants::{celsius_to_kelvin, ghz_to_rad};
use crate::emitter::{g2_blinking, g2_tls, BlinkingParams, DecayParams, EmitterParams};
use crate::error::{invalid, Result};
use crate::instrument::{convolve_histogram, Extension, InstrumentResponse, LaserModel, VaporAbsorbance};
use crate::simkit::synth::decay_model;
use crate::spectrum::{FrequencyGrid, Histogram};
use crate::vapor::{transmission_spectrum, VaporCell};

use super::problem::ForwardModel;

/// Absorbance tabulation step used inside fits.
pub const FIT_ABSORBANCE_STEP_HZ: f64 = 25e6;

pub const EMITTER_INPUTS: [&str; 3] = ["gamma_sp_ghz", "gamma_star_ghz", "rabi_ghz"];

fn emitter(p: &[f64]) -> Result<EmitterParams> {
    EmitterParams::from_ghz(p[0], p[1], p[2])
}

/// Laser transmission through a cell of unknown temperature.
#[derive(Debug, Clone)]
pub struct VaporScanModel {
    pub grid: FrequencyGrid,
    pub length_m: f64,
}

impl ForwardModel for VaporScanModel {
    fn inputs(&self) -> Vec<&'static str> {
        vec!["temperature_c"]
    }

    fn evaluate(&self, p: &[f64]) -> Result<Vec<f64>> {
        let cell = VaporCell::new(self.length_m, celsius_to_kelvin(p[0]))?;
        Ok(transmission_spectrum(&self.grid, &cell)?.values)
    }
}

/// Transmission of a Lorentzian line of unknown FWHM swept across the cell.
#[derive(Debug, Clone)]
pub struct NonResonantScanModel {
    absorbance: VaporAbsorbance,
    centres: Vec<f64>,
}

impl NonResonantScanModel {
    pub fn new(cell: &VaporCell, centres: &FrequencyGrid) -> Result<Self> {
        Ok(Self { absorbance: VaporAbsorbance::with_step(cell, FIT_ABSORBANCE_STEP_HZ)?, centres: centres.points() })
    }
}

impl ForwardModel for NonResonantScanModel {
    fn inputs(&self) -> Vec<&'static str> {
        vec!["linewidth_ghz"]
    }

    fn evaluate(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.absorbance.nonresonant_many(&self.centres, ghz_to_rad(p[0]))
    }
}

/// Resonance fluorescence transmitted through the cell while emitter and
/// laser are tuned together.
#[derive(Debug, Clone)]
pub struct ResonantScanModel {
    absorbance: VaporAbsorbance,
    centres: Vec<f64>,
    laser_averaged: Vec<f64>,
}

impl ResonantScanModel {
    pub fn new(cell: &VaporCell, laser: &LaserModel, centres: &FrequencyGrid) -> Result<Self> {
        Self::with_step(cell, laser, centres, FIT_ABSORBANCE_STEP_HZ)
    }

    pub fn with_step(cell: &VaporCell, laser: &LaserModel, centres: &FrequencyGrid, step_hz: f64) -> Result<Self> {
        let absorbance = VaporAbsorbance::with_step(cell, step_hz)?;
        let centres = centres.points();
        let laser_averaged = centres.iter().map(|c| absorbance.laser_averaged(*c, laser)).collect::<Result<Vec<_>>>()?;
        Ok(Self { absorbance, centres, laser_averaged })
    }
}

impl ForwardModel for ResonantScanModel {
    fn inputs(&self) -> Vec<&'static str> {
        EMITTER_INPUTS.to_vec()
    }

    fn evaluate(&self, p: &[f64]) -> Result<Vec<f64>> {
        self.absorbance.resonant_many(&self.centres, &emitter(p)?.mollow(), &self.laser_averaged)
    }
}

/// Normalized, IRF-convolved g²(τ), optionally with telegraph blinking.
#[derive(Debug, Clone)]
pub struct G2Model {
    pub bins: Histogram,
    pub irf: InstrumentResponse,
    pub blinking: bool,
}

impl ForwardModel for G2Model {
    fn inputs(&self) -> Vec<&'static str> {
        let mut v = EMITTER_INPUTS.to_vec();
        if self.blinking {
            v.extend(["on_fraction", "correlation_time_ns"]);
        }
        v
    }

    fn evaluate(&self, p: &[f64]) -> Result<Vec<f64>> {
        let e = emitter(p)?;
        let h = if self.blinking {
            let b = BlinkingParams::new(p[3], p[4] * 1e-9)?;
            convolve_histogram(|t| g2_blinking(t, &e, &b).unwrap_or(f64::NAN), &self.bins, &self.irf, Extension::Symmetric)?
        } else {
            convolve_histogram(|t| g2_tls(t, &e).unwrap_or(f64::NAN), &self.bins, &self.irf, Extension::Symmetric)?
        };
        Ok(h.values)
    }
}

/// Cascade-fed decay histogram: amplitude · (IRF ⊛ N)(t − t₀) + background.
#[derive(Debug, Clone)]
pub struct DecayModel {
    pub bins: Histogram,
    pub irf: InstrumentResponse,
    pub background: f64,
}

impl ForwardModel for DecayModel {
    fn inputs(&self) -> Vec<&'static str> {
        vec!["rate_a_ghz", "rate_b_ghz", "amplitude", "time_offset_ns"]
    }

    fn evaluate(&self, p: &[f64]) -> Result<Vec<f64>> {
        let d = DecayParams::new(ghz_to_rad(p[0]), ghz_to_rad(p[1]))?;
        Ok(decay_model(&d, &self.irf, &self.bins, p[2], p[3] * 1e-9, self.background)?.values)
    }
}

/// Same bins as `h` with the values cleared.
pub fn template(h: &Histogram) -> Result<Histogram> {
    if h.is_empty() {
        return Err(invalid("histogram has no bins"));
    }
    Histogram::new(h.start_s, h.bin_width_s, vec![0.0; h.len()])
}
