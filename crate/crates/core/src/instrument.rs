//! Everything between the ideal models and recorded data: laser line, detector
//! response, convolutions, transmission of QD light through the vapor, and the
//! normalizations applied to raw scans and coincidence histograms.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::constants::{hz_to_rad, CATALOG};
use crate::emitter::{coherent_fraction, EmitterParams, MollowCoefficients, SpectralPole};
use crate::error::{domain, invalid, Error, Result};
use crate::quadrature::gauss_hermite;
use crate::spectrum::{FrequencyGrid, Histogram, Spectrum};
use crate::vapor::{AbsorptionModel, VaporCell};

const GAUSS_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3; // 2√(2 ln 2)

/// Gaussian laser line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaserModel {
    pub fwhm_hz: f64,
}

impl LaserModel {
    pub fn new(fwhm_hz: f64) -> Result<Self> {
        if !(fwhm_hz > 0.0 && fwhm_hz.is_finite()) {
            return Err(invalid(format!("laser FWHM must be positive, got {fwhm_hz} Hz")));
        }
        Ok(Self { fwhm_hz })
    }

    pub fn sigma_hz(&self) -> f64 {
        self.fwhm_hz / GAUSS_FWHM_PER_SIGMA
    }

    /// Offsets (Hz) and weights of a 20-point Gauss–Hermite average over the
    /// line.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let (x, w) = gauss_hermite(20);
        let s = 2f64.sqrt() * self.sigma_hz();
        x.iter().zip(&w).map(|(x, w)| (s * x, w / PI.sqrt())).collect()
    }
}

impl Default for LaserModel {
    fn default() -> Self {
        Self { fwhm_hz: 1e6 }
    }
}

/// Convolution kernel for spectra, normalized to unit area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SpectralKernel {
    Lorentzian { fwhm_hz: f64 },
    Gaussian { fwhm_hz: f64 },
}

impl SpectralKernel {
    fn fwhm(&self) -> f64 {
        match *self {
            Self::Lorentzian { fwhm_hz } | Self::Gaussian { fwhm_hz } => fwhm_hz,
        }
    }

    fn density(&self, x: f64) -> f64 {
        match *self {
            Self::Lorentzian { fwhm_hz } => {
                let g = 0.5 * fwhm_hz;
                g / (PI * (x * x + g * g))
            }
            Self::Gaussian { fwhm_hz } => {
                let s = fwhm_hz / GAUSS_FWHM_PER_SIGMA;
                (-0.5 * (x / s).powi(2)).exp()
            }
        }
    }
}

/// Convolves a spectrum with a unit-area kernel on its own grid.
///
/// The discrete kernel is renormalized to unit sum; values beyond the grid
/// are taken as zero.
pub fn convolve_spectrum(s: &Spectrum, kernel: SpectralKernel) -> Result<Spectrum> {
    let h = s.grid.step();
    if !(kernel.fwhm() >= h * (1.0 - 1e-12)) {
        return Err(Error::Resolution(format!(
            "kernel FWHM {} Hz is narrower than the grid step {h} Hz",
            kernel.fwhm()
        )));
    }
    let n = s.values.len();
    let half = match kernel {
        SpectralKernel::Lorentzian { .. } => n - 1,
        SpectralKernel::Gaussian { fwhm_hz } => ((8.0 * fwhm_hz / GAUSS_FWHM_PER_SIGMA / h).ceil() as usize).min(n - 1),
    };
    let mut k: Vec<f64> = (0..=2 * half).map(|i| kernel.density((i as f64 - half as f64) * h)).collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    let full = fft_convolve(&s.values, &k);
    let values = full[half..half + n].to_vec();
    let out = Spectrum::new(s.grid, values)?;
    match &s.sigma {
        // independent errors propagate through the squared kernel
        Some(sig) => {
            let var: Vec<f64> = sig.iter().map(|v| v * v).collect();
            let k2: Vec<f64> = k.iter().map(|v| v * v).collect();
            let prop = fft_convolve(&var, &k2);
            out.with_sigma(prop[half..half + n].iter().map(|v| v.max(0.0).sqrt()).collect())
        }
        None => Ok(out),
    }
}

/// Linear convolution of two real sequences via zero-padded FFT.
pub(crate) fn fft_convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len() + b.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let pad = |x: &[f64]| {
        let mut v: Vec<Complex64> = x.iter().map(|&r| Complex64::new(r, 0.0)).collect();
        v.resize(size, Complex64::new(0.0, 0.0));
        v
    };
    let mut fa = pad(a);
    let mut fb = pad(b);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    inv.process(&mut fa);
    fa.truncate(len);
    fa.into_iter().map(|c| c.re / size as f64).collect()
}

/// Vapor absorbance 1 − T tabulated on a fine grid, for integrating
/// emission spectra against the cell.
#[derive(Debug, Clone)]
pub struct VaporAbsorbance {
    model: AbsorptionModel,
    grid: FrequencyGrid,
    absorbance: Vec<f64>,
}

impl VaporAbsorbance {
    pub const DEFAULT_STEP_HZ: f64 = 5e6;
    pub const START_HZ: f64 = -20e9;
    pub const END_HZ: f64 = 27e9;

    pub fn new(cell: &VaporCell) -> Result<Self> {
        Self::with_step(cell, Self::DEFAULT_STEP_HZ)
    }

    pub fn with_step(cell: &VaporCell, step_hz: f64) -> Result<Self> {
        let n = ((Self::END_HZ - Self::START_HZ) / step_hz).round() as usize + 1;
        let grid = FrequencyGrid::new(Self::START_HZ, step_hz, n)?;
        let model = AbsorptionModel::new(cell)?;
        let absorbance = grid
            .points()
            .into_iter()
            .map(|hz| model.optical_depth(hz_to_rad(hz)).map(|od| -(-od).exp_m1()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { model, grid, absorbance })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.absorbance
    }

    pub fn cell(&self) -> &VaporCell {
        self.model.cell()
    }

    /// Exact vapor transmission at `hz`.
    pub fn transmission_at(&self, hz: f64) -> Result<f64> {
        self.model.transmission(hz_to_rad(hz))
    }

    /// Vapor transmission averaged over the laser line centred at `hz`.
    pub fn laser_averaged(&self, hz: f64, laser: &LaserModel) -> Result<f64> {
        laser.nodes().iter().map(|(x, w)| Ok(w * self.transmission_at(hz + x)?)).sum()
    }

    fn check_centre(&self, hz: f64) -> Result<()> {
        if hz >= self.grid.start() && hz <= self.grid.end() {
            Ok(())
        } else {
            Err(domain(format!(
                "centre {hz} Hz outside the tabulated absorbance range [{}, {}] Hz",
                self.grid.start(),
                self.grid.end()
            )))
        }
    }

    /// ∫ K(f − centre) A(f) df for a kernel given as poles in Hz units.
    pub fn kernel_integral(&self, centre_hz: f64, poles: &[SpectralPole]) -> f64 {
        let h = self.grid.step();
        let narrowest = poles.iter().map(|p| p.rate.re).fold(f64::INFINITY, f64::min);
        if narrowest >= 5.0 * h {
            let mut acc = 0.0;
            for (k, a) in self.absorbance.iter().enumerate() {
                if *a == 0.0 {
                    continue;
                }
                let x = self.grid.at(k) - centre_hz;
                acc += a * poles.iter().map(|p| p.density(x)).sum::<f64>();
            }
            acc * h
        } else {
            poles.iter().map(|p| self.pole_integral_exact(centre_hz, p)).sum()
        }
    }

    /// [`Self::kernel_integral`] at many centres. Centres lying on the
    /// absorbance grid share one FFT correlation when the trapezoid rule
    /// applies; the rest are integrated one by one.
    pub fn kernel_integrals(&self, centres_hz: &[f64], poles: &[SpectralPole]) -> Vec<f64> {
        let h = self.grid.step();
        let narrowest = poles.iter().map(|p| p.rate.re).fold(f64::INFINITY, f64::min);
        let node = |c: f64| {
            let k = ((c - self.grid.start()) / h).round();
            let on_grid = (c - self.grid.start() - k * h).abs() <= 1e-6 * h && k >= 0.0 && (k as usize) < self.grid.len();
            on_grid.then_some(k as usize)
        };
        let nodes: Vec<Option<usize>> = centres_hz.iter().map(|c| node(*c)).collect();
        if narrowest < 5.0 * h || nodes.iter().filter(|k| k.is_some()).count() < 2 {
            return centres_hz.iter().map(|c| self.kernel_integral(*c, poles)).collect();
        }
        let n = self.absorbance.len();
        // reversed kernel at offsets (n−1−t)·h, t = 0..2n−2
        let kernel: Vec<f64> = (0..2 * n - 1)
            .map(|t| {
                let x = (n as f64 - 1.0 - t as f64) * h;
                poles.iter().map(|p| p.density(x)).sum::<f64>()
            })
            .collect();
        let corr = fft_convolve(&self.absorbance, &kernel);
        centres_hz
            .iter()
            .zip(&nodes)
            .map(|(c, k)| match k {
                Some(i) => corr[n - 1 + i] * h,
                None => self.kernel_integral(*c, poles),
            })
            .collect()
    }

    /// [`Self::resonant`] at many centres with their cached laser averages.
    pub fn resonant_many(&self, centres_hz: &[f64], mollow: &MollowCoefficients, laser_avg: &[f64]) -> Result<Vec<f64>> {
        if laser_avg.len() != centres_hz.len() {
            return Err(invalid("one laser average per centre is required"));
        }
        for c in centres_hz {
            self.check_centre(*c)?;
        }
        let poles = mollow.incoherent_poles().map(|p| p.rescaled(2.0 * PI));
        let weight: f64 = poles.iter().map(|p| p.weight.re).sum();
        Ok(self
            .kernel_integrals(centres_hz, &poles)
            .into_iter()
            .zip(laser_avg)
            .map(|(k, la)| mollow.coherent * la + weight - k)
            .collect())
    }

    /// [`Self::nonresonant`] at many centres.
    pub fn nonresonant_many(&self, centres_hz: &[f64], gamma_nr: f64) -> Result<Vec<f64>> {
        for c in centres_hz {
            self.check_centre(*c)?;
        }
        if !(gamma_nr > 0.0 && gamma_nr.is_finite()) {
            return Err(invalid(format!("linewidth must be positive, got {gamma_nr}")));
        }
        let pole = SpectralPole { weight: Complex64::new(1.0, 0.0), rate: Complex64::new(gamma_nr / (4.0 * PI), 0.0) };
        Ok(self.kernel_integrals(centres_hz, &[pole]).into_iter().map(|k| 1.0 - k).collect())
    }

    /// Exact integral of one pole against the piecewise-linear absorbance,
    /// via second differences of F(x) = (1/π) Re[−c (u ln u − u)], u = r + ix.
    fn pole_integral_exact(&self, centre_hz: f64, pole: &SpectralPole) -> f64 {
        let h = self.grid.step();
        let n = self.absorbance.len();
        let f2 = |k: isize| {
            let u = pole.rate + Complex64::new(0.0, self.grid.start() + k as f64 * h - centre_hz);
            (-pole.weight * (u * u.ln() - u)).re / PI
        };
        let mut prev = f2(-1);
        let mut cur = f2(0);
        let mut acc = 0.0;
        for k in 0..n {
            let next = f2(k as isize + 1);
            let a = self.absorbance[k];
            if a != 0.0 {
                acc += a * (next - 2.0 * cur + prev);
            }
            prev = cur;
            cur = next;
        }
        acc / h
    }

    /// Transmission of light with a Lorentzian spectrum of FWHM `gamma_nr`
    /// (rad/s) centred at `centre_hz`.
    pub fn nonresonant(&self, centre_hz: f64, gamma_nr: f64) -> Result<f64> {
        self.check_centre(centre_hz)?;
        if !(gamma_nr > 0.0 && gamma_nr.is_finite()) {
            return Err(invalid(format!("linewidth must be positive, got {gamma_nr}")));
        }
        let pole = SpectralPole { weight: Complex64::new(1.0, 0.0), rate: Complex64::new(gamma_nr / (4.0 * PI), 0.0) };
        Ok(1.0 - self.kernel_integral(centre_hz, &[pole]))
    }

    /// Transmission of resonance fluorescence with emitter and laser co-tuned
    /// to `centre_hz`. `laser_avg` is [`Self::laser_averaged`] at the centre,
    /// which does not depend on the emitter and can be cached.
    pub fn resonant(&self, centre_hz: f64, mollow: &MollowCoefficients, laser_avg: f64) -> Result<f64> {
        self.check_centre(centre_hz)?;
        let poles = mollow.incoherent_poles().map(|p| p.rescaled(2.0 * PI));
        let weight: f64 = poles.iter().map(|p| p.weight.re).sum();
        Ok(mollow.coherent * laser_avg + weight - self.kernel_integral(centre_hz, &poles))
    }
}

/// Lorentzian (FWHM `gamma_nr`, rad/s) emission swept across `centres`.
pub fn predict_transmission_nonresonant(cell: &VaporCell, gamma_nr: f64, centres: &FrequencyGrid) -> Result<Spectrum> {
    let abs = VaporAbsorbance::new(cell)?;
    Spectrum::new(*centres, abs.nonresonant_many(&centres.points(), gamma_nr)?)
}

/// Resonance fluorescence (coherent part on the laser line, incoherent part
/// from the Mollow spectrum) swept across `centres`.
pub fn predict_transmission_resonant(
    cell: &VaporCell,
    p: &EmitterParams,
    laser: &LaserModel,
    centres: &FrequencyGrid,
) -> Result<Spectrum> {
    let abs = VaporAbsorbance::new(cell)?;
    let m = p.mollow();
    debug_assert_eq!(m.coherent, coherent_fraction(p));
    let points = centres.points();
    let laser_avg = points.iter().map(|c| abs.laser_averaged(*c, laser)).collect::<Result<Vec<_>>>()?;
    Spectrum::new(*centres, abs.resonant_many(&points, &m, &laser_avg)?)
}

/// Detector timing response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InstrumentResponse {
    Delta,
    Gaussian { fwhm_s: f64 },
    /// Measured response on a uniform delay grid, normalized to unit area.
    /// Delays are taken relative to the weighted centroid.
    Sampled { start_s: f64, step_s: f64, weights: Vec<f64> },
}

impl InstrumentResponse {
    pub fn gaussian(fwhm_s: f64) -> Result<Self> {
        if !(fwhm_s > 0.0 && fwhm_s.is_finite()) {
            return Err(invalid(format!("IRF FWHM must be positive, got {fwhm_s}")));
        }
        Ok(Self::Gaussian { fwhm_s })
    }

    pub fn sampled(start_s: f64, step_s: f64, weights: Vec<f64>) -> Result<Self> {
        if !(step_s > 0.0) || weights.len() < 2 {
            return Err(invalid("sampled IRF needs ≥ 2 points on a positive step"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(invalid("IRF weights must be finite and ≥ 0"));
        }
        let area: f64 = weights.iter().sum::<f64>() * step_s;
        if !(area > 0.0) {
            return Err(invalid("IRF has zero area"));
        }
        let weights = weights.into_iter().map(|w| w / area).collect();
        Ok(Self::Sampled { start_s, step_s, weights })
    }

    /// Reads a two-column `delay_s,weight` CSV.
    pub fn from_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["delay_s", "weight"] {
            return Err(invalid("IRF CSV must have header `delay_s,weight`"));
        }
        let mut t = Vec::new();
        let mut w = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let get = |i: usize| -> Result<f64> {
                rec.get(i).unwrap_or("").parse::<f64>().map_err(|e| invalid(format!("IRF CSV: {e}")))
            };
            t.push(get(0)?);
            w.push(get(1)?);
        }
        let grid = FrequencyGrid::from_points(&t)?;
        Self::sampled(grid.start(), grid.step(), w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv(std::fs::File::open(path)?)
    }

    /// Width used for resolution checks: FWHM, or the full support of a
    /// sampled response.
    pub fn width(&self) -> f64 {
        match self {
            Self::Delta => 0.0,
            Self::Gaussian { fwhm_s } => *fwhm_s,
            Self::Sampled { step_s, weights, .. } => step_s * (weights.len() - 1) as f64,
        }
    }

    /// Unit-sum kernel at offsets k·h, k = −K..=K.
    fn discrete(&self, h: f64) -> Vec<f64> {
        let mut k = match self {
            Self::Delta => vec![1.0],
            Self::Gaussian { fwhm_s } => {
                let s = fwhm_s / GAUSS_FWHM_PER_SIGMA;
                let half = (6.0 * s / h).ceil() as i64;
                (-half..=half).map(|i| (-0.5 * (i as f64 * h / s).powi(2)).exp()).collect()
            }
            Self::Sampled { start_s, step_s, weights } => {
                let centroid = weights.iter().enumerate().map(|(i, w)| w * (start_s + i as f64 * step_s)).sum::<f64>()
                    / weights.iter().sum::<f64>();
                let lo = start_s - centroid;
                let hi = lo + step_s * (weights.len() - 1) as f64;
                let half = (lo.abs().max(hi.abs()) / h).ceil() as i64;
                (-half..=half)
                    .map(|i| {
                        let x = (i as f64 * h - lo) / step_s;
                        if x < 0.0 || x > (weights.len() - 1) as f64 {
                            return 0.0;
                        }
                        let j = (x.floor() as usize).min(weights.len() - 2);
                        let f = x - j as f64;
                        weights[j] * (1.0 - f) + weights[j + 1] * f
                    })
                    .collect()
            }
        };
        let total: f64 = k.iter().sum();
        k.iter_mut().for_each(|v| *v /= total);
        k
    }

    fn fine_step(&self, bin_width: f64) -> f64 {
        match self {
            Self::Delta => bin_width / 8.0,
            Self::Gaussian { fwhm_s } => fwhm_s / 10.0,
            Self::Sampled { step_s, .. } => *step_s,
        }
    }
}

/// How a model defined for τ ≥ 0 continues to negative delays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extension {
    /// f(−τ) = f(τ), as for correlation functions.
    Symmetric,
    /// f(τ) = 0 for τ < 0, as for decay curves.
    Causal,
}

/// Convolves `model` with the detector response and averages it over the bins
/// of `bins` (whose values are ignored).
pub fn convolve_histogram<F: Fn(f64) -> f64>(
    model: F,
    bins: &Histogram,
    irf: &InstrumentResponse,
    extension: Extension,
) -> Result<Histogram> {
    let w = bins.bin_width_s;
    let lo = bins.start_s - 0.5 * w;
    let span = w * bins.len() as f64;
    if irf.width() > span {
        return Err(Error::Resolution(format!(
            "IRF width {} s exceeds the histogram span {span} s",
            irf.width()
        )));
    }
    let m = (w / irf.fine_step(w)).ceil().max(1.0) as usize;
    let h = w / m as f64;
    let kernel = irf.discrete(h);
    let half = (kernel.len() - 1) / 2;
    let n_fine = bins.len() * m;
    let ext: Vec<f64> = (0..n_fine + 2 * half)
        .map(|j| {
            let t = lo + (j as f64 + 0.5 - half as f64) * h;
            match extension {
                Extension::Symmetric => model(t.abs()),
                Extension::Causal if t < 0.0 => 0.0,
                Extension::Causal => model(t),
            }
        })
        .collect();
    let fine: Vec<f64> = if half == 0 { ext } else { fft_convolve(&ext, &kernel)[2 * half..2 * half + n_fine].to_vec() };
    let values = fine.chunks(m).map(|c| c.iter().sum::<f64>() / m as f64).collect();
    Histogram::new(bins.start_s, w, values)
}

/// Expected coincidences per bin for uncorrelated streams, N = N₁N₂τ_bT.
pub fn coincidence_normalization(bin_width: f64, rate1: f64, rate2: f64, duration: f64) -> Result<f64> {
    if !(bin_width > 0.0) {
        return Err(invalid(format!("bin width must be positive, got {bin_width}")));
    }
    if !(rate1 > 0.0 && rate2 > 0.0 && duration > 0.0) {
        return Err(invalid("count rates and duration must be positive"));
    }
    Ok(rate1 * rate2 * bin_width * duration)
}

/// Raw coincidence counts to g²; σ = √counts / N (at least 1/N).
pub fn normalize_g2(raw: &Histogram, rate1: f64, rate2: f64, duration: f64) -> Result<Histogram> {
    let n = coincidence_normalization(raw.bin_width_s, rate1, rate2, duration)?;
    if raw.values.iter().any(|c| *c < 0.0) {
        return Err(invalid("coincidence counts must be ≥ 0"));
    }
    let values = raw.values.iter().map(|c| c / n).collect();
    let sigma = raw.values.iter().map(|c| c.max(1.0).sqrt() / n).collect();
    Histogram::new(raw.start_s, raw.bin_width_s, values)?.with_sigma(sigma)
}

/// Inverse of [`normalize_g2`] on the values.
pub fn denormalize_g2(g2: &Histogram, rate1: f64, rate2: f64, duration: f64) -> Result<Histogram> {
    let n = coincidence_normalization(g2.bin_width_s, rate1, rate2, duration)?;
    Histogram::new(g2.start_s, g2.bin_width_s, g2.values.iter().map(|v| v * n).collect())
}

/// Points farther than `min_distance_hz` from every hyperfine line.
pub fn default_baseline_mask(grid: &FrequencyGrid, min_distance_hz: f64) -> Vec<bool> {
    grid.points()
        .into_iter()
        .map(|f| CATALOG.iter().all(|l| (f - l.detuning_hz).abs() > min_distance_hz))
        .collect()
}

/// Divides a scan by the least-squares line through the masked points, after
/// subtracting a constant `background`.
pub fn normalize_baseline(s: &Spectrum, mask: &[bool], background: f64) -> Result<Spectrum> {
    if mask.len() != s.values.len() {
        return Err(invalid(format!("mask has {} entries for {} points", mask.len(), s.values.len())));
    }
    let x0 = 0.5 * (s.grid.start() + s.grid.end());
    let scale = 0.5 * (s.grid.end() - s.grid.start());
    let pts: Vec<(f64, f64)> = s
        .offsets()
        .into_iter()
        .zip(&s.values)
        .zip(mask)
        .filter(|(_, m)| **m)
        .map(|((x, y), _)| ((x - x0) / scale, y - background))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if pts.len() < 2 || !(sxx > 1e-24) {
        return Err(Error::Rank("baseline mask needs at least two distinct abscissae".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let line: Vec<f64> = s.offsets().iter().map(|x| my + slope * ((x - x0) / scale - mx)).collect();
    if line.iter().any(|l| !(*l > 0.0)) {
        return Err(domain("fitted baseline is not positive across the scan"));
    }
    let values = s.values.iter().zip(&line).map(|(y, l)| (y - background) / l).collect();
    let out = Spectrum::new(s.grid, values)?;
    match &s.sigma {
        Some(sig) => out.with_sigma(sig.iter().zip(&line).map(|(e, l)| e / l).collect()),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::ghz_to_rad;
    use crate::vapor::{dip_groups, transmission};

    fn cell() -> VaporCell {
        VaporCell::reference(24.8).unwrap()
    }

    #[test]
    fn batched_kernel_integrals_match_single() {
        let abs = VaporAbsorbance::with_step(&cell(), 25e6).unwrap();
        let m = EmitterParams::from_ghz(1.42, 0.1, 0.39).unwrap().mollow();
        let poles = m.incoherent_poles().map(|p| p.rescaled(2.0 * PI));
        // on-grid centres plus one off-grid centre
        let mut centres: Vec<f64> = (0..40).map(|k| -6e9 + k as f64 * 0.5e9).collect();
        centres.push(1.234_567e9);
        let many = abs.kernel_integrals(&centres, &poles);
        for (c, v) in centres.iter().zip(&many) {
            let one = abs.kernel_integral(*c, &poles);
            assert!((v - one).abs() < 1e-12, "{c}: {v} vs {one}");
        }
    }

    #[test]
    fn fft_convolution_matches_direct() {
        let a = [1.0, 2.0, 3.0];
        let b = [0.5, -1.0];
        let c = fft_convolve(&a, &b);
        let expect = [0.5, 0.0, -0.5, -3.0];
        for (x, y) in c.iter().zip(expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_convolution_area_and_semigroup() {
        let g = FrequencyGrid::centered(0.0, 10e9, 10e6).unwrap();
        let mut v = vec![0.0; g.len()];
        v[1000] = 1.0;
        let s = Spectrum::new(g, v).unwrap();
        let out = convolve_spectrum(&s, SpectralKernel::Gaussian { fwhm_hz: 10e6 }).unwrap();
        assert!((out.values.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(convolve_spectrum(&s, SpectralKernel::Gaussian { fwhm_hz: 5e6 }).is_err());

        let bump: Vec<f64> = g.points().iter().map(|x| (-(x / 0.3e9).powi(2)).exp()).collect();
        let s = Spectrum::new(g, bump).unwrap();
        let (f1, f2) = (200e6, 350e6);
        let two = convolve_spectrum(
            &convolve_spectrum(&s, SpectralKernel::Gaussian { fwhm_hz: f1 }).unwrap(),
            SpectralKernel::Gaussian { fwhm_hz: f2 },
        )
        .unwrap();
        let one = convolve_spectrum(&s, SpectralKernel::Gaussian { fwhm_hz: f1.hypot(f2) }).unwrap();
        for (a, b) in two.values.iter().zip(&one.values) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn convolved_dips_are_shallower() {
        let g = FrequencyGrid::centered(2e9, 12e9, 10e6).unwrap();
        let t = crate::vapor::transmission_spectrum(&g, &cell()).unwrap();
        // work on absorbance so the zero padding is harmless
        let a = Spectrum::new(g, t.values.iter().map(|v| 1.0 - v).collect()).unwrap();
        let c = convolve_spectrum(&a, SpectralKernel::Lorentzian { fwhm_hz: 1.6e9 }).unwrap();
        let max_in = a.values.iter().cloned().fold(0.0, f64::max);
        let max_out = c.values.iter().cloned().fold(0.0, f64::max);
        assert!(max_out < 0.5 * max_in);
    }

    #[test]
    fn nonresonant_narrow_limit_and_monotonicity() {
        let abs = VaporAbsorbance::new(&cell()).unwrap();
        for grp in dip_groups() {
            let bare = abs.transmission_at(grp.center_hz).unwrap();
            let narrow = abs.nonresonant(grp.center_hz, ghz_to_rad(1e-5)).unwrap();
            assert!((narrow - bare).abs() < 1e-4, "{narrow} vs {bare}");
            let mut last = narrow;
            for w in [0.5, 1.6, 3.0] {
                let t = abs.nonresonant(grp.center_hz, ghz_to_rad(w)).unwrap();
                assert!(t > last);
                last = t;
            }
        }
    }

    #[test]
    fn exact_and_trapezoid_paths_agree() {
        let abs = VaporAbsorbance::new(&cell()).unwrap();
        let c = dip_groups()[2].center_hz;
        let hwhm = 5.0 * abs.grid().step();
        let pole = SpectralPole { weight: Complex64::new(1.0, 0.0), rate: Complex64::new(hwhm, 0.0) };
        let trap = abs.kernel_integral(c, &[pole]);
        let exact = abs.pole_integral_exact(c, &pole);
        // the exact path is limited by linear interpolation of the absorbance
        assert!((trap - exact).abs() < 5e-5 * exact, "{trap} vs {exact}");
    }

    #[test]
    fn resonant_prediction_limits() {
        let abs = VaporAbsorbance::new(&cell()).unwrap();
        let laser = LaserModel::default();
        let weak = EmitterParams::from_ghz(1.42, 0.0, 1e-4).unwrap().mollow();
        let reference = EmitterParams::from_ghz(1.42, 0.0, 0.39).unwrap().mollow();
        let dephased = EmitterParams::from_ghz(1.42, 0.3, 0.39).unwrap().mollow();
        for grp in dip_groups() {
            let c = grp.center_hz;
            let avg = abs.laser_averaged(c, &laser).unwrap();
            let bare = abs.transmission_at(c).unwrap();
            assert!((avg - bare).abs() < 1e-4);
            let r_weak = abs.resonant(c, &weak, avg).unwrap();
            assert!((r_weak - bare).abs() < 1e-6);
            let r = abs.resonant(c, &reference, avg).unwrap();
            let nr = abs.nonresonant(c, ghz_to_rad(1.6)).unwrap();
            assert!(r >= bare && r < nr && r <= 1.0, "{r} {bare} {nr}");
            assert!(abs.resonant(c, &dephased, avg).unwrap() > r);
        }
    }

    #[test]
    fn histogram_convolution_delta_and_asymptote() {
        let bins = Histogram::zeros(-2e-9, 2e-9, 50e-12).unwrap();
        let lin = |t: f64| 1.0 + 0.25e9 * t;
        let out = convolve_histogram(lin, &bins, &InstrumentResponse::Delta, Extension::Causal).unwrap();
        for (i, v) in out.values.iter().enumerate() {
            let t = out.centre(i);
            let expect = if t > 0.0 { lin(t) } else { 0.0 };
            // the bin straddling zero is half filled
            if t.abs() > 1e-15 {
                assert!((v - expect).abs() < 1e-9, "{t}: {v}");
            }
        }
        let p = EmitterParams::from_ghz(1.42, 0.0, 0.39).unwrap();
        let m = p.mollow();
        let bins = Histogram::zeros(-5e-9, 5e-9, 20e-12).unwrap();
        let irf = InstrumentResponse::gaussian(100e-12).unwrap();
        let g = convolve_histogram(|t| m.g2(t), &bins, &irf, Extension::Symmetric).unwrap();
        let mid = g.values[g.len() / 2];
        // ≈ (aσ)²/2 for a 42 ps rms response and a = 3Γ/4
        assert!(mid > 0.01 && mid < 0.1, "{mid}");
        assert!((g.values[0] - 1.0).abs() < 1e-9);
        let wide = InstrumentResponse::gaussian(20e-9).unwrap();
        assert!(matches!(
            convolve_histogram(|t| m.g2(t), &bins, &wide, Extension::Symmetric),
            Err(Error::Resolution(_))
        ));
    }

    #[test]
    fn sampled_irf_matches_gaussian() {
        let fwhm = 100e-12;
        let s = fwhm / GAUSS_FWHM_PER_SIGMA;
        let step = 2e-12;
        let w: Vec<f64> = (0..401).map(|i| (-0.5 * ((i as f64 - 200.0) * step / s).powi(2)).exp()).collect();
        let sampled = InstrumentResponse::sampled(1e-9, step, w).unwrap();
        let gauss = InstrumentResponse::gaussian(fwhm).unwrap();
        let d = DecayParamsForTest::new();
        let bins = Histogram::zeros(0.0, 3e-9, 8e-12).unwrap();
        let a = convolve_histogram(|t| d.f(t), &bins, &sampled, Extension::Causal).unwrap();
        let b = convolve_histogram(|t| d.f(t), &bins, &gauss, Extension::Causal).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 2e-3, "{x} {y}");
        }
        let csv = "delay_s,weight\n0,0\n1e-12,1\n2e-12,3\n3e-12,1\n4e-12,0\n";
        match InstrumentResponse::from_csv(csv.as_bytes()).unwrap() {
            InstrumentResponse::Sampled { weights, step_s, .. } => {
                assert!((weights.iter().sum::<f64>() * step_s - 1.0).abs() < 1e-9)
            }
            _ => unreachable!(),
        }
    }

    struct DecayParamsForTest(crate::emitter::DecayParams);
    impl DecayParamsForTest {
        fn new() -> Self {
            Self(crate::emitter::DecayParams::new(ghz_to_rad(0.176), ghz_to_rad(1.7)).unwrap())
        }
        fn f(&self, t: f64) -> f64 {
            self.0.population(t)
        }
    }

    #[test]
    fn g2_normalization() {
        let n = coincidence_normalization(512e-12, 5000.0, 5000.0, 3600.0).unwrap();
        assert!((n - 46.08).abs() < 1e-9);
        let raw = Histogram::new(-1e-9, 512e-12, vec![46.08, 92.16, 0.0, 10.0, 4.0]).unwrap();
        let g = normalize_g2(&raw, 5000.0, 5000.0, 3600.0).unwrap();
        assert!((g.values[0] - 1.0).abs() < 1e-12);
        let back = denormalize_g2(&g, 5000.0, 5000.0, 3600.0).unwrap();
        for (a, b) in back.values.iter().zip(&raw.values) {
            assert!((a - b).abs() < 1e-12);
        }
        let doubled = Histogram::new(-1e-9, 512e-12, raw.values.iter().map(|c| 2.0 * c).collect()).unwrap();
        let g2 = normalize_g2(&doubled, 5000.0, 5000.0, 7200.0).unwrap();
        let var = |h: &Histogram| h.sigma.as_ref().unwrap()[1].powi(2);
        assert!((var(&g2) / var(&g) - 0.5).abs() < 1e-12);
        assert!(normalize_g2(&raw, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn baseline_normalization() {
        let g = FrequencyGrid::centered(3e9, 9e9, 50e6).unwrap();
        let mask = default_baseline_mask(&g, 4e9);
        let flat = Spectrum::new(g, vec![0.7; g.len()]).unwrap();
        let out = normalize_baseline(&flat, &mask, 0.0).unwrap();
        assert!(out.values.iter().all(|v| (v - 1.0).abs() < 1e-12));

        let t = crate::vapor::transmission_spectrum(&g, &cell()).unwrap();
        let tilted: Vec<f64> = t.offsets().iter().zip(&t.values).map(|(x, v)| v * (1.0 + 0.01 * x / 1e9)).collect();
        let tilted = Spectrum::new(g, tilted).unwrap();
        let all = vec![true; g.len()];
        // an exact line through every point divided out
        let line = Spectrum::new(g, t.offsets().iter().map(|x| 2.0 * (1.0 + 0.01 * x / 1e9)).collect()).unwrap();
        let n = normalize_baseline(&line, &all, 0.0).unwrap();
        assert!(n.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
        let rec = normalize_baseline(&tilted, &mask, 0.0).unwrap();
        for (a, b) in rec.values.iter().zip(&t.values) {
            assert!((a - b).abs() < 1e-4);
        }
        let mut one = vec![false; g.len()];
        one[0] = true;
        assert!(matches!(normalize_baseline(&flat, &one, 0.0), Err(Error::Rank(_))));
    }

    #[test]
    fn transmission_helper_consistent() {
        let abs = VaporAbsorbance::new(&cell()).unwrap();
        let i = 4000;
        let hz = abs.grid().at(i);
        let t = transmission(hz_to_rad(hz), &cell()).unwrap();
        assert!((abs.values()[i] - (1.0 - t)).abs() < 1e-12);
    }
}
