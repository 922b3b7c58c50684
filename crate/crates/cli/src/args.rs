//! Argument groups shared by several subcommands. All frequencies are linear
//! frequencies in GHz (or MHz/Hz where the flag says so).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use qdvapor::constants::{celsius_to_kelvin, ghz_to_rad};
use qdvapor::fit::manifest::IrfSpec;
use qdvapor::instrument::InstrumentResponse;
use qdvapor::spectrum::FrequencyGrid;
use qdvapor::{BlinkingParams, EmitterParams, PowerCalibration, VaporCell};

use crate::output::Run;

/// Broadening coefficient A in (rad/s)²/(nW/µm²): Ω² = A·I.
pub const DEFAULT_BROADENING: f64 = 0.34e17;

/// Emitter parameters in GHz, as read from `--params` files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterGhz {
    pub gamma_sp_ghz: f64,
    #[serde(default)]
    pub gamma_star_ghz: f64,
    pub rabi_ghz: f64,
}

impl EmitterGhz {
    pub const REFERENCE: Self = Self { gamma_sp_ghz: 1.42, gamma_star_ghz: 0.0, rabi_ghz: 0.39 };

    pub fn params(&self) -> Result<EmitterParams> {
        Ok(EmitterParams::from_ghz(self.gamma_sp_ghz, self.gamma_star_ghz, self.rabi_ghz)?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct EmitterArgs {
    /// JSON file with gamma_sp_ghz, gamma_star_ghz, rabi_ghz; flags override it
    #[arg(long)]
    pub params: Option<PathBuf>,
    /// Radiative decay rate Γ_sp/2π [default: 1.42]
    #[arg(long)]
    pub gamma_sp_ghz: Option<f64>,
    /// Pure dephasing rate γ*/2π [default: 0]
    #[arg(long)]
    pub gamma_star_ghz: Option<f64>,
    /// Rabi frequency Ω/2π [default: 0.39]
    #[arg(long, conflicts_with = "intensity_nw_um2")]
    pub rabi_ghz: Option<f64>,
    /// Resonant intensity in nW/µm²; sets Ω = √(A·I)
    #[arg(long)]
    pub intensity_nw_um2: Option<f64>,
    /// Broadening coefficient A in (rad/s)²/(nW/µm²)
    #[arg(long, default_value_t = DEFAULT_BROADENING)]
    pub broadening_coefficient: f64,
}

impl EmitterArgs {
    pub fn resolve(&self, run: Option<&mut Run>) -> Result<EmitterGhz> {
        let mut e = match &self.params {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                if let Some(run) = run {
                    run.input(path)?;
                }
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => EmitterGhz::REFERENCE,
        };
        if let Some(v) = self.gamma_sp_ghz {
            e.gamma_sp_ghz = v;
        }
        if let Some(v) = self.gamma_star_ghz {
            e.gamma_star_ghz = v;
        }
        if let Some(v) = self.rabi_ghz {
            e.rabi_ghz = v;
        }
        if let Some(i) = self.intensity_nw_um2 {
            let rabi = PowerCalibration::new(self.broadening_coefficient, i)?.rabi_frequency();
            e.rabi_ghz = rabi / ghz_to_rad(1.0);
        }
        e.params()?;
        Ok(e)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CellArgs {
    /// Vapor cell length
    #[arg(long, default_value_t = 75.0)]
    pub cell_length_mm: f64,
    /// Vapor cell temperature
    #[arg(long, default_value_t = 24.8)]
    pub cell_temp_c: f64,
}

impl CellArgs {
    pub fn cell(&self) -> Result<VaporCell> {
        Ok(VaporCell::new(self.cell_length_mm * 1e-3, celsius_to_kelvin(self.cell_temp_c))?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GridArgs {
    /// Grid centre, offset from the reference frequency
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub center_ghz: f64,
    /// Half-width of the grid
    #[arg(long, default_value_t = 10.0)]
    pub span_ghz: f64,
    /// Grid spacing
    #[arg(long, default_value_t = 10.0)]
    pub step_mhz: f64,
}

impl GridArgs {
    pub fn grid(&self) -> Result<FrequencyGrid> {
        if !(self.span_ghz > 0.0) {
            bail!("--span-ghz must be positive");
        }
        Ok(FrequencyGrid::centered(self.center_ghz * 1e9, self.span_ghz * 1e9, self.step_mhz * 1e6)?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IrfArgs {
    /// Gaussian instrument response FWHM
    #[arg(long, conflicts_with = "irf_file")]
    pub irf_fwhm_ps: Option<f64>,
    /// Measured instrument response, two-column `delay_s,weight` CSV
    #[arg(long)]
    pub irf_file: Option<PathBuf>,
}

impl IrfArgs {
    pub fn spec(&self) -> IrfSpec {
        match (&self.irf_file, self.irf_fwhm_ps) {
            (Some(path), _) => IrfSpec::File { path: path.clone() },
            (None, Some(fwhm_ps)) => IrfSpec::Gaussian { fwhm_ps },
            (None, None) => IrfSpec::Delta,
        }
    }

    pub fn resolve(&self, run: &mut Run) -> Result<InstrumentResponse> {
        if let Some(path) = &self.irf_file {
            run.input(path)?;
        }
        Ok(self.spec().resolve(Path::new(""))?)
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BlinkingArgs {
    /// Fraction of time the emitter is on; omit for no blinking
    #[arg(long)]
    pub beta: Option<f64>,
    /// Blinking correlation time
    #[arg(long, default_value_t = 580.0)]
    pub tau_c_ns: f64,
}

impl BlinkingArgs {
    pub fn params(&self) -> Result<Option<BlinkingParams>> {
        self.beta.map(|b| BlinkingParams::new(b, self.tau_c_ns * 1e-9).map_err(Into::into)).transpose()
    }
}
