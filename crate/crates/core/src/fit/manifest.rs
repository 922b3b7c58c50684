//! JSON fit manifests: datasets on disk, named model bindings and the
//! parameter table.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::models::{template, DecayModel, G2Model, NonResonantScanModel, ResonantScanModel, VaporScanModel};
use super::optimize::{fit, FitConfig, FitResult};
use super::problem::{FitProblem, ForwardModel, Parameter};
use super::tasks::BASELINE_DISTANCE_HZ;
use crate::constants::celsius_to_kelvin;
use crate::error::{invalid, Result};
use crate::instrument::{default_baseline_mask, normalize_baseline, InstrumentResponse, LaserModel};
use crate::spectrum::{Histogram, Spectrum};
use crate::vapor::VaporCell;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum IrfSpec {
    Delta,
    Gaussian { fwhm_ps: f64 },
    /// Two-column `delay_s,weight` CSV, relative to the manifest.
    File { path: PathBuf },
}

impl IrfSpec {
    pub fn resolve(&self, base: &Path) -> Result<InstrumentResponse> {
        match self {
            Self::Delta => Ok(InstrumentResponse::Delta),
            Self::Gaussian { fwhm_ps } => InstrumentResponse::gaussian(fwhm_ps * 1e-12),
            Self::File { path } => InstrumentResponse::load(base.join(path)),
        }
    }
}

fn default_laser_mhz() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// Inputs: temperature_c.
    VaporTransmission { cell_length_mm: f64 },
    /// Inputs: linewidth_ghz.
    NonresonantTransmission { cell_length_mm: f64, cell_temp_c: f64 },
    /// Inputs: gamma_sp_ghz, gamma_star_ghz, rabi_ghz.
    ResonantTransmission {
        cell_length_mm: f64,
        cell_temp_c: f64,
        #[serde(default = "default_laser_mhz")]
        laser_fwhm_mhz: f64,
    },
    /// Inputs: gamma_sp_ghz, gamma_star_ghz, rabi_ghz [, on_fraction, correlation_time_ns].
    G2 {
        irf: IrfSpec,
        #[serde(default)]
        blinking: bool,
    },
    /// Inputs: rate_a_ghz, rate_b_ghz, amplitude, time_offset_ns.
    Decay {
        irf: IrfSpec,
        #[serde(default)]
        background: f64,
    },
}

impl ModelSpec {
    fn is_spectral(&self) -> bool {
        matches!(self, Self::VaporTransmission { .. } | Self::NonresonantTransmission { .. } | Self::ResonantTransmission { .. })
    }
}

fn default_mask_ghz() -> f64 {
    BASELINE_DISTANCE_HZ * 1e-9
}

/// Raw scan counts are divided by their baseline before fitting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Normalization {
    #[serde(default)]
    pub background: f64,
    /// Baseline points lie at least this far (GHz) from every line.
    #[serde(default = "default_mask_ghz")]
    pub mask_ghz: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Self { background: 0.0, mask_ghz: default_mask_ghz() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    /// CSV path relative to the manifest.
    pub path: PathBuf,
    pub model: ModelSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<Normalization>,
    /// Uniform σ for files without a sigma column.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Model input → parameter name, where they differ.
    #[serde(default, skip_serializing_if = "HashMap::is_empty")]
    pub bind: HashMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitManifest {
    pub seed: u64,
    #[serde(default)]
    pub config: Option<FitConfig>,
    pub parameters: Vec<Parameter>,
    pub datasets: Vec<DatasetEntry>,
}

enum Loaded {
    Spectrum(Spectrum),
    Histogram(Histogram),
}

/// A dataset next to its model evaluated at some parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedCurve {
    pub dataset: String,
    /// `offset_hz` for scans, `delay_s` (bin centres) for histograms.
    pub axis: String,
    pub x: Vec<f64>,
    pub values: Vec<f64>,
    pub sigma: Vec<f64>,
    pub model: Vec<f64>,
}

impl FitManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig { seed: self.seed, ..self.config.clone().unwrap_or_default() }
    }

    /// Every file the manifest reads, resolved against `base`.
    pub fn input_files(&self, base: &Path) -> Vec<PathBuf> {
        let mut files = Vec::new();
        for d in &self.datasets {
            files.push(base.join(&d.path));
            if let ModelSpec::G2 { irf: IrfSpec::File { path }, .. } | ModelSpec::Decay { irf: IrfSpec::File { path }, .. } = &d.model {
                files.push(base.join(path));
            }
        }
        files
    }

    fn load_data(entry: &DatasetEntry, base: &Path) -> Result<Loaded> {
        let path = base.join(&entry.path);
        if entry.model.is_spectral() {
            let s = Spectrum::load(&path)?;
            let s = match entry.normalize {
                Some(n) => normalize_baseline(&s, &default_baseline_mask(&s.grid, n.mask_ghz * 1e9), n.background)?,
                None => s,
            };
            Ok(Loaded::Spectrum(s))
        } else {
            if entry.normalize.is_some() {
                return Err(invalid(format!("dataset `{}`: `normalize` applies to scans only", entry.name)));
            }
            Ok(Loaded::Histogram(Histogram::load(&path)?))
        }
    }

    fn build_model(entry: &DatasetEntry, data: &Loaded, base: &Path) -> Result<Arc<dyn ForwardModel>> {
        let cell = |mm: f64, c: f64| VaporCell::new(mm * 1e-3, celsius_to_kelvin(c));
        Ok(match (&entry.model, data) {
            (ModelSpec::VaporTransmission { cell_length_mm }, Loaded::Spectrum(s)) => {
                Arc::new(VaporScanModel { grid: s.grid, length_m: cell_length_mm * 1e-3 })
            }
            (ModelSpec::NonresonantTransmission { cell_length_mm, cell_temp_c }, Loaded::Spectrum(s)) => {
                Arc::new(NonResonantScanModel::new(&cell(*cell_length_mm, *cell_temp_c)?, &s.grid)?)
            }
            (ModelSpec::ResonantTransmission { cell_length_mm, cell_temp_c, laser_fwhm_mhz }, Loaded::Spectrum(s)) => {
                let laser = LaserModel::new(laser_fwhm_mhz * 1e6)?;
                Arc::new(ResonantScanModel::new(&cell(*cell_length_mm, *cell_temp_c)?, &laser, &s.grid)?)
            }
            (ModelSpec::G2 { irf, blinking }, Loaded::Histogram(h)) => {
                Arc::new(G2Model { bins: template(h)?, irf: irf.resolve(base)?, blinking: *blinking })
            }
            (ModelSpec::Decay { irf, background }, Loaded::Histogram(h)) => {
                Arc::new(DecayModel { bins: template(h)?, irf: irf.resolve(base)?, background: *background })
            }
            _ => unreachable!("data kind follows the model"),
        })
    }

    /// Reads the datasets (paths relative to `base`) and binds the models.
    pub fn build(&self, base: &Path) -> Result<FitProblem> {
        let mut pr = FitProblem::new(self.parameters.clone())?;
        for entry in &self.datasets {
            let data = Self::load_data(entry, base)?;
            let model = Self::build_model(entry, &data, base)?;
            let (values, sigma) = match data {
                Loaded::Spectrum(s) => (s.values, s.sigma),
                Loaded::Histogram(h) => (h.values, h.sigma),
            };
            let sigma = match (sigma, entry.sigma) {
                (Some(s), None) => s,
                (None, Some(u)) => vec![u; values.len()],
                (Some(_), Some(_)) => {
                    return Err(invalid(format!("dataset `{}`: file has a sigma column and `sigma` is also set", entry.name)))
                }
                (None, None) => return Err(invalid(format!("dataset `{}` has no sigma column and no `sigma`", entry.name))),
            };
            pr.add_dataset(&entry.name, values, sigma, model, &entry.bind)?;
        }
        pr.validate()?;
        Ok(pr)
    }

    pub fn run(&self, base: &Path) -> Result<FitResult> {
        fit(&self.build(base)?, &self.fit_config())
    }

    /// Data and model for every dataset at the full parameter vector `theta`.
    pub fn curves(&self, base: &Path, theta: &[f64]) -> Result<Vec<FittedCurve>> {
        let problem = self.build(base)?;
        self.datasets
            .iter()
            .zip(problem.datasets())
            .enumerate()
            .map(|(k, (entry, d))| {
                let (axis, x) = match Self::load_data(entry, base)? {
                    Loaded::Spectrum(s) => ("offset_hz", s.grid.points()),
                    Loaded::Histogram(h) => ("delay_s", h.centres()),
                };
                Ok(FittedCurve {
                    dataset: entry.name.clone(),
                    axis: axis.into(),
                    x,
                    values: d.values.clone(),
                    sigma: d.sigma.clone(),
                    model: problem.model_values(k, theta)?,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_fields() {
        let text = r#"{
            "seed": 3,
            "parameters": [{"name": "temperature_c", "init": 20, "lower": 0, "upper": 50, "mode": "shared"}],
            "datasets": [{"name": "scan", "path": "scan.csv",
                          "model": {"type": "vapor_transmission", "cell_length_mm": 75},
                          "normalize": {"background": 0}}]
        }"#;
        let m = FitManifest::from_json(text).unwrap();
        assert_eq!(m.fit_config().seed, 3);
        assert_eq!(m.fit_config().restarts, 8);
        assert!(FitManifest::from_json(&text.replace("\"seed\"", "\"sead\"")).is_err());
        assert!(FitManifest::from_json(&text.replace("vapor_transmission", "nope")).is_err());
    }
}
