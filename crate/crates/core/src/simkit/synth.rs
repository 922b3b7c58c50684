//! Noisy synthetic datasets for exercising the fits.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::stream::rng_for;
use crate::emitter::{decay_population, g2_blinking, g2_tls, BlinkingParams, DecayParams, EmitterParams};
use crate::error::{invalid, Result};
use crate::instrument::{
    convolve_histogram, predict_transmission_nonresonant, predict_transmission_resonant, Extension,
    InstrumentResponse, LaserModel,
};
use crate::spectrum::{FrequencyGrid, Histogram, Spectrum};
use crate::vapor::{transmission_spectrum, VaporCell};

const STREAM_NOISE: u64 = 5;

/// Light source probed through the cell in a transmission scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScanSource {
    /// Narrow laser tuned across the lines.
    Laser,
    /// Lorentzian emission of FWHM Γ_NR (rad/s).
    NonResonant { linewidth: f64 },
    /// Resonance fluorescence of a driven emitter tracking the laser.
    Resonant { emitter: EmitterParams, laser: LaserModel },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub cell: VaporCell,
    pub source: ScanSource,
    pub grid: FrequencyGrid,
    /// Counts per point at unit transmission on the baseline centre.
    pub counts_per_point: f64,
    /// Relative baseline tilt per GHz of offset from the grid centre.
    pub baseline_slope_per_ghz: f64,
    /// Constant counts added at every point.
    pub background: f64,
}

impl ScanSpec {
    pub fn transmission(&self) -> Result<Spectrum> {
        match &self.source {
            ScanSource::Laser => transmission_spectrum(&self.grid, &self.cell),
            ScanSource::NonResonant { linewidth } => predict_transmission_nonresonant(&self.cell, *linewidth, &self.grid),
            ScanSource::Resonant { emitter, laser } => predict_transmission_resonant(&self.cell, emitter, laser, &self.grid),
        }
    }

    fn expected_counts(&self) -> Result<Vec<f64>> {
        let centre = 0.5 * (self.grid.start() + self.grid.end());
        let t = self.transmission()?;
        Ok(self
            .grid
            .points()
            .iter()
            .zip(&t.values)
            .map(|(f, t)| self.counts_per_point * (1.0 + self.baseline_slope_per_ghz * (f - centre) * 1e-9) * t + self.background)
            .collect())
    }
}

/// Delay bins of a time-domain histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Binning {
    /// Centre of the first bin (s).
    pub start_s: f64,
    pub bin_width_s: f64,
    pub bins: usize,
}

impl Binning {
    pub fn template(&self) -> Result<Histogram> {
        Histogram::new(self.start_s, self.bin_width_s, vec![0.0; self.bins])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Spec {
    pub emitter: EmitterParams,
    pub blinking: Option<BlinkingParams>,
    pub irf: InstrumentResponse,
    pub binning: Binning,
    /// Expected coincidences per bin for uncorrelated light.
    pub coincidences_per_bin: f64,
}

impl G2Spec {
    pub fn model(&self) -> Result<Histogram> {
        let bins = self.binning.template()?;
        let p = self.emitter;
        match self.blinking {
            Some(b) => convolve_histogram(|t| g2_blinking(t, &p, &b).unwrap_or(f64::NAN), &bins, &self.irf, Extension::Symmetric),
            None => convolve_histogram(|t| g2_tls(t, &p).unwrap_or(f64::NAN), &bins, &self.irf, Extension::Symmetric),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySpec {
    pub decay: DecayParams,
    pub irf: InstrumentResponse,
    pub binning: Binning,
    /// Counts per bin per unit population.
    pub amplitude: f64,
    /// Excitation time (s).
    pub time_offset_s: f64,
    pub background: f64,
}

impl DecaySpec {
    pub fn model(&self) -> Result<Histogram> {
        decay_model(&self.decay, &self.irf, &self.binning.template()?, self.amplitude, self.time_offset_s, self.background)
    }
}

/// amplitude · (IRF ⊛ N)(t − t₀) + background, bin-averaged.
pub fn decay_model(
    d: &DecayParams,
    irf: &InstrumentResponse,
    bins: &Histogram,
    amplitude: f64,
    time_offset_s: f64,
    background: f64,
) -> Result<Histogram> {
    let shifted = Histogram::new(bins.start_s - time_offset_s, bins.bin_width_s, vec![0.0; bins.len()])?;
    let mut h = convolve_histogram(|t| decay_population(t, d).unwrap_or(f64::NAN), &shifted, irf, Extension::Causal)?;
    h.start_s = bins.start_s;
    h.values.iter_mut().for_each(|v| *v = amplitude * *v + background);
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    TransmissionScan(ScanSpec),
    G2(G2Spec),
    Decay(DecaySpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    Poisson,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SyntheticData {
    /// Raw counts per scan point.
    Spectrum(Spectrum),
    /// Normalized g² or raw decay counts.
    Histogram(Histogram),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub data: SyntheticData,
    pub truth: DatasetSpec,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl SyntheticDataset {
    /// Ground truth, noise model and seed.
    pub fn sidecar(&self) -> serde_json::Value {
        serde_json::json!({ "truth": self.truth, "noise": self.noise, "seed": self.seed })
    }
}

fn draw<R: Rng>(mean: f64, noise: NoiseModel, rng: &mut R) -> Result<f64> {
    if !(mean.is_finite() && mean >= 0.0) {
        return Err(invalid(format!("expected count {mean} is not a valid Poisson mean")));
    }
    Ok(match noise {
        NoiseModel::None => mean,
        NoiseModel::Poisson if mean == 0.0 => 0.0,
        NoiseModel::Poisson => Poisson::new(mean).map_err(|e| invalid(e.to_string()))?.sample(rng),
    })
}

fn shot_sigma(counts: &[f64]) -> Vec<f64> {
    counts.iter().map(|c| c.max(1.0).sqrt()).collect()
}

/// Evaluates the forward model of `spec`, scales it to counts and applies
/// independent per-point noise. σ is the shot noise of the drawn counts.
pub fn synthesize_dataset(spec: &DatasetSpec, noise: NoiseModel, seed: u64) -> Result<SyntheticDataset> {
    let mut rng = rng_for(seed, STREAM_NOISE);
    let data = match spec {
        DatasetSpec::TransmissionScan(s) => {
            if !(s.counts_per_point > 0.0) {
                return Err(invalid("counts per point must be positive"));
            }
            let counts = s.expected_counts()?.into_iter().map(|m| draw(m, noise, &mut rng)).collect::<Result<Vec<_>>>()?;
            let sigma = shot_sigma(&counts);
            SyntheticData::Spectrum(Spectrum::new(s.grid, counts)?.with_sigma(sigma)?)
        }
        DatasetSpec::G2(s) => {
            let n = s.coincidences_per_bin;
            if !(n > 0.0) {
                return Err(invalid("coincidences per bin must be positive"));
            }
            let model = s.model()?;
            let counts = model.values.iter().map(|g| draw(n * g, noise, &mut rng)).collect::<Result<Vec<_>>>()?;
            let sigma = shot_sigma(&counts).into_iter().map(|v| v / n).collect();
            let values = counts.iter().map(|c| c / n).collect();
            SyntheticData::Histogram(Histogram::new(model.start_s, model.bin_width_s, values)?.with_sigma(sigma)?)
        }
        DatasetSpec::Decay(s) => {
            let model = s.model()?;
            let counts = model.values.iter().map(|m| draw(*m, noise, &mut rng)).collect::<Result<Vec<_>>>()?;
            let sigma = shot_sigma(&counts);
            SyntheticData::Histogram(Histogram::new(model.start_s, model.bin_width_s, counts)?.with_sigma(sigma)?)
        }
    };
    Ok(SyntheticDataset { data, truth: spec.clone(), noise, seed })
}
