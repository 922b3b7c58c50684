//! Weak-probe absorption and transmission of a natural-abundance Rb vapor cell.

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::constants::{
    hz_to_rad, Isotope, CATALOG, PHYSICAL, RB_MELTING_POINT_K, REFERENCE_FREQUENCY_HZ,
};
use crate::error::{domain, invalid, Result};
use crate::faddeeva::voigt_k;
use crate::quadrature::integrate;
use crate::spectrum::{FrequencyGrid, Spectrum};

pub const MIN_TEMPERATURE_K: f64 = 250.0;
pub const MAX_TEMPERATURE_K: f64 = 400.0;

/// Largest detuning accepted by the lineshape and absorption functions.
pub const DETUNING_GUARD: f64 = 2.0 * PI * 1e12;

const TORR_TO_PA: f64 = 133.322_368;

/// Probe wavevector k = ω_ref / c (rad/m).
pub fn wavevector() -> f64 {
    2.0 * PI * REFERENCE_FREQUENCY_HZ / PHYSICAL.speed_of_light
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaporCell {
    pub length_m: f64,
    pub temperature_k: f64,
}

impl VaporCell {
    pub fn new(length_m: f64, temperature_k: f64) -> Result<Self> {
        if !(length_m.is_finite() && length_m >= 0.0) {
            return Err(invalid(format!("cell length must be ≥ 0, got {length_m} m")));
        }
        check_window(temperature_k)?;
        Ok(Self { length_m, temperature_k })
    }

    /// The 75 mm cell used throughout, at the given temperature in °C.
    pub fn reference(temp_c: f64) -> Result<Self> {
        Self::new(0.075, crate::constants::celsius_to_kelvin(temp_c))
    }
}

fn check_window(t: f64) -> Result<()> {
    if (MIN_TEMPERATURE_K..=MAX_TEMPERATURE_K).contains(&t) {
        Ok(())
    } else {
        Err(domain(format!(
            "temperature {t} K outside the {MIN_TEMPERATURE_K}-{MAX_TEMPERATURE_K} K model window"
        )))
    }
}

/// Saturated vapor pressure in Pa (solid below the melting point, liquid above).
pub fn vapor_pressure(t: f64) -> Result<f64> {
    check_window(t)?;
    let log10_torr = if t < RB_MELTING_POINT_K {
        2.881 + 4.857 - 4215.0 / t
    } else {
        2.881 + 4.312 - 4040.0 / t
    };
    Ok(10f64.powf(log10_torr) * TORR_TO_PA)
}

/// Total atomic density n = p / (k_B T), in m⁻³.
pub fn number_density(t: f64) -> Result<f64> {
    Ok(vapor_pressure(t)? / (PHYSICAL.k_boltzmann * t))
}

pub fn isotope_density(isotope: Isotope, t: f64) -> Result<f64> {
    Ok(isotope.data().abundance * number_density(t)?)
}

/// Density per ground-state Zeeman sublevel, n_i / (2(2I+1)).
pub fn sublevel_density(isotope: Isotope, t: f64) -> Result<f64> {
    Ok(isotope_density(isotope, t)? / isotope.data().sublevel_count() as f64)
}

/// Doppler parameters of one isotope at temperature `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopplerParams {
    pub isotope: Isotope,
    /// 1/e velocity width √(2 k_B T / m), m/s.
    pub velocity_width: f64,
    /// rad/m.
    pub wavevector: f64,
}

impl DopplerParams {
    pub fn new(isotope: Isotope, t: f64) -> Result<Self> {
        if !(t > 0.0 && t.is_finite()) {
            return Err(invalid(format!("temperature must be positive, got {t} K")));
        }
        let velocity_width = (2.0 * PHYSICAL.k_boltzmann * t / isotope.data().mass).sqrt();
        Ok(Self { isotope, velocity_width, wavevector: wavevector() })
    }

    /// 1/e half width of the Gaussian in angular frequency, kσ.
    pub fn doppler_width(&self) -> f64 {
        self.wavevector * self.velocity_width
    }

    /// FWHM of the Doppler Gaussian, 2√ln2 kσ (rad/s).
    pub fn doppler_fwhm(&self) -> f64 {
        2.0 * LN_2.sqrt() * self.doppler_width()
    }
}

/// Doppler-broadened lineshape s(δ) in seconds: a Lorentzian of HWHM Γ_nat/2
/// and unit peak height times Γ_nat/2, averaged over the velocity distribution.
/// Its integral over δ is π.
pub fn voigt_lineshape(delta: f64, isotope: Isotope, t: f64) -> Result<f64> {
    if !(delta.abs() <= DETUNING_GUARD) {
        return Err(domain(format!("detuning {delta} rad/s beyond the ±2π·1 THz guard")));
    }
    let d = DopplerParams::new(isotope, t)?;
    Ok(voigt_unchecked(delta, isotope.data().natural_linewidth(), d.doppler_width()))
}

fn voigt_unchecked(delta: f64, gamma_nat: f64, u: f64) -> f64 {
    PI.sqrt() * voigt_k(delta / u, 0.5 * gamma_nat / u) / u
}

/// The same lineshape by direct adaptive quadrature over velocity. Slow;
/// kept as a reference for the fast path.
pub fn voigt_lineshape_quadrature(delta: f64, isotope: Isotope, t: f64) -> Result<f64> {
    let d = DopplerParams::new(isotope, t)?;
    let u = d.doppler_width();
    let g = 0.5 * isotope.data().natural_linewidth();
    // x = v/σ; the Lorentzian peak sits at x = δ/u with width g/u
    let f = |x: f64| g / (g * g + (delta - u * x).powi(2)) * (-x * x).exp() / PI.sqrt();
    let peak = delta / u;
    let mut cuts = vec![-12.0, 12.0];
    for w in [0.0, -1.0, 1.0, -20.0, 20.0] {
        let c = peak + w * g / u;
        if c > -12.0 && c < 12.0 {
            cuts.push(c);
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut total = 0.0;
    for w in cuts.windows(2) {
        total += integrate(f, w[0], w[1], 0.0, 1e-12)?;
    }
    Ok(total)
}

/// Absorption coefficient of a single isotope (1/m) at angular detuning
/// `delta` from ω_ref.
pub fn isotope_absorption(delta: f64, isotope: Isotope, cell: &VaporCell) -> Result<f64> {
    check_guard(delta)?;
    let prefactor = absorption_prefactor(isotope, cell.temperature_k)?;
    let u = DopplerParams::new(isotope, cell.temperature_k)?.doppler_width();
    let gamma = isotope.data().natural_linewidth();
    Ok(prefactor * line_sum(delta, isotope, gamma, u))
}

/// α = α₈₅ + α₈₇ (1/m) at angular detuning `delta` from ω_ref.
pub fn absorption_coefficient(delta: f64, cell: &VaporCell) -> Result<f64> {
    Ok(isotope_absorption(delta, Isotope::Rb85, cell)? + isotope_absorption(delta, Isotope::Rb87, cell)?)
}

/// e^{-αL} at angular detuning `delta`.
pub fn transmission(delta: f64, cell: &VaporCell) -> Result<f64> {
    Ok((-absorption_coefficient(delta, cell)? * cell.length_m).exp())
}

pub fn transmission_spectrum(grid: &FrequencyGrid, cell: &VaporCell) -> Result<Spectrum> {
    let model = AbsorptionModel::new(cell)?;
    let values = grid
        .points()
        .into_iter()
        .map(|hz| model.transmission(hz_to_rad(hz)))
        .collect::<Result<Vec<_>>>()?;
    Spectrum::new(*grid, values)
}

/// Temperature-dependent pieces of α precomputed for repeated evaluation.
#[derive(Debug, Clone, Copy)]
pub struct AbsorptionModel {
    cell: VaporCell,
    prefactor: [f64; 2],
    doppler: [f64; 2],
}

impl AbsorptionModel {
    pub fn new(cell: &VaporCell) -> Result<Self> {
        let mut prefactor = [0.0; 2];
        let mut doppler = [0.0; 2];
        for (i, iso) in Isotope::ALL.into_iter().enumerate() {
            prefactor[i] = absorption_prefactor(iso, cell.temperature_k)?;
            doppler[i] = DopplerParams::new(iso, cell.temperature_k)?.doppler_width();
        }
        Ok(Self { cell: *cell, prefactor, doppler })
    }

    pub fn cell(&self) -> &VaporCell {
        &self.cell
    }

    pub fn absorption(&self, delta: f64) -> Result<f64> {
        check_guard(delta)?;
        let mut alpha = 0.0;
        for (i, iso) in Isotope::ALL.into_iter().enumerate() {
            alpha += self.prefactor[i] * line_sum(delta, iso, iso.data().natural_linewidth(), self.doppler[i]);
        }
        Ok(alpha)
    }

    /// Optical depth αL.
    pub fn optical_depth(&self, delta: f64) -> Result<f64> {
        Ok(self.absorption(delta)? * self.cell.length_m)
    }

    pub fn transmission(&self, delta: f64) -> Result<f64> {
        Ok((-self.optical_depth(delta)?).exp())
    }
}

fn check_guard(delta: f64) -> Result<()> {
    if delta.abs() <= DETUNING_GUARD {
        Ok(())
    } else {
        Err(domain(format!("detuning {delta} rad/s beyond the ±2π·1 THz guard")))
    }
}

/// k n_sub d² / (ħ ε₀), per unit of Σ C² s.
fn absorption_prefactor(isotope: Isotope, t: f64) -> Result<f64> {
    let d = isotope.data().dipole_element();
    Ok(wavevector() * sublevel_density(isotope, t)? * d * d / (PHYSICAL.hbar * PHYSICAL.epsilon0))
}

fn line_sum(delta: f64, isotope: Isotope, gamma_nat: f64, u: f64) -> f64 {
    isotope
        .lines()
        .iter()
        .map(|l| l.strength.to_f64() * voigt_unchecked(delta - l.angular_offset(), gamma_nat, u))
        .sum()
}

/// One of the four Doppler-broadened absorption groups, labelled by ground
/// hyperfine level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DipGroup {
    pub isotope: Isotope,
    pub ground_f: u8,
    /// Strength-weighted mean detuning of the member lines (Hz).
    pub center_hz: f64,
}

/// The four dip groups, ordered ⁸⁷Rb F=1, ⁸⁵Rb F=2, ⁸⁵Rb F=3, ⁸⁷Rb F=2.
pub fn dip_groups() -> [DipGroup; 4] {
    let group = |isotope: Isotope, ground_f: u8, range: std::ops::Range<usize>| {
        let lines = &CATALOG[range];
        let w: f64 = lines.iter().map(|l| l.strength.to_f64()).sum();
        let c: f64 = lines.iter().map(|l| l.strength.to_f64() * l.detuning_hz).sum();
        DipGroup { isotope, ground_f, center_hz: c / w }
    };
    [
        group(Isotope::Rb87, 1, 3..6),
        group(Isotope::Rb85, 2, 9..12),
        group(Isotope::Rb85, 3, 6..9),
        group(Isotope::Rb87, 2, 0..3),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constants::{celsius_to_kelvin, ghz_to_rad};
    use proptest::prelude::*;

    #[test]
    fn sublevel_divisors() {
        assert_eq!(Isotope::Rb85.data().sublevel_count(), 12);
        assert_eq!(Isotope::Rb87.data().sublevel_count(), 8);
        let t = 300.0;
        let r = isotope_density(Isotope::Rb85, t).unwrap() / isotope_density(Isotope::Rb87, t).unwrap();
        assert!((r - 72.17 / 27.83).abs() < 1e-12);
    }

    #[test]
    fn pressure_is_monotone_and_windowed() {
        assert!(vapor_pressure(299.0).unwrap() > vapor_pressure(298.0).unwrap());
        assert!(vapor_pressure(312.45).unwrap() > vapor_pressure(297.95).unwrap());
        assert!(vapor_pressure(249.0).is_err());
        assert!(vapor_pressure(400.1).is_err());
        let n = number_density(298.0).unwrap();
        let p = vapor_pressure(298.0).unwrap();
        assert_eq!(n, p / (PHYSICAL.k_boltzmann * 298.0));
    }

    #[test]
    fn phase_boundary_jump_is_bounded() {
        // the two tabulated branches differ by ~3.5% at the melting point
        let below = vapor_pressure(RB_MELTING_POINT_K - 1e-9).unwrap();
        let above = vapor_pressure(RB_MELTING_POINT_K).unwrap();
        assert!((above / below - 1.0).abs() < 0.04);
    }

    #[test]
    fn room_temperature_density() {
        // ~1e16 m⁻³ near 25 °C
        let n = number_density(celsius_to_kelvin(24.8)).unwrap();
        assert!(n > 0.9e16 && n < 1.6e16, "n = {n}");
    }

    #[test]
    fn doppler_fwhm_at_room_temperature() {
        let t = celsius_to_kelvin(24.8);
        let f87 = DopplerParams::new(Isotope::Rb87, t).unwrap().doppler_fwhm() / (2.0 * PI);
        let f85 = DopplerParams::new(Isotope::Rb85, t).unwrap().doppler_fwhm() / (2.0 * PI);
        assert!((f87 - 0.51e9).abs() < 2.55e6, "{f87}");
        assert!(f85 > f87);
    }

    #[test]
    fn voigt_symmetric_and_normalised() {
        let t = 298.0;
        let a = voigt_lineshape(ghz_to_rad(1.0), Isotope::Rb85, t).unwrap();
        let b = voigt_lineshape(ghz_to_rad(-1.0), Isotope::Rb85, t).unwrap();
        assert_eq!(a, b);
        let area = crate::quadrature::integrate_real_line(
            |d| voigt_lineshape(d, Isotope::Rb85, t).unwrap(),
            0.0,
            ghz_to_rad(0.3),
            0.0,
            1e-10,
        )
        .unwrap();
        assert!((area / PI - 1.0).abs() < 1e-7, "{area}");
        assert!(voigt_lineshape(2.0 * DETUNING_GUARD, Isotope::Rb85, t).is_err());
    }

    #[test]
    fn cold_limit_is_lorentzian() {
        let g = Isotope::Rb87.data().natural_linewidth() / 2.0;
        // at 1 K the Doppler width (~2π·30 MHz) still exceeds Γ_nat, so the
        // Lorentzian limit needs a far colder gas
        for delta in [0.0, g, 3.0 * g] {
            let s = voigt_lineshape(delta, Isotope::Rb87, 1e-4).unwrap();
            let lorentz = g / (g * g + delta * delta);
            assert!((s / lorentz - 1.0).abs() < 0.01, "{s} vs {lorentz}");
        }
    }

    #[test]
    fn far_detuned_is_transparent() {
        let cell = VaporCell::reference(24.8).unwrap();
        let a = absorption_coefficient(ghz_to_rad(500.0), &cell).unwrap();
        assert!(a * cell.length_m < 1e-6);
    }

    #[test]
    fn stronger_line_absorbs_more() {
        let cell = VaporCell::reference(24.8).unwrap();
        let j3 = crate::constants::lookup_line(85, 3).unwrap().angular_offset();
        let j1 = crate::constants::lookup_line(85, 1).unwrap().angular_offset();
        assert!(absorption_coefficient(j3, &cell).unwrap() > absorption_coefficient(j1, &cell).unwrap());
    }

    #[test]
    fn isotope_sum_is_bitwise_additive() {
        let cell = VaporCell::reference(30.0).unwrap();
        for ghz in [-1.0, 0.1, 1.3, 4.2, 6.7] {
            let d = ghz_to_rad(ghz);
            let sum = isotope_absorption(d, Isotope::Rb85, &cell).unwrap()
                + isotope_absorption(d, Isotope::Rb87, &cell).unwrap();
            assert_eq!(sum.to_bits(), absorption_coefficient(d, &cell).unwrap().to_bits());
        }
    }

    #[test]
    fn empty_cell_transmits_everything() {
        let cell = VaporCell::new(0.0, 300.0).unwrap();
        let g = FrequencyGrid::centered(0.0, 10e9, 10e6).unwrap();
        let s = transmission_spectrum(&g, &cell).unwrap();
        assert!(s.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn four_dips_at_group_centres() {
        let cell = VaporCell::reference(24.8).unwrap();
        for g in dip_groups() {
            let at = transmission(hz_to_rad(g.center_hz), &cell).unwrap();
            let off = transmission(hz_to_rad(g.center_hz + 2.0e9 * if g.center_hz > 3e9 { -1.0 } else { 1.0 }), &cell).unwrap();
            assert!(at < 0.9 && at < off, "{g:?}: {at} vs {off}");
        }
    }

    #[test]
    fn golden_dip_transmission() {
        // velocity quadrature with scipy, independent of this crate
        let cell = VaporCell::reference(24.8).unwrap();
        let g = dip_groups()[3];
        assert!((g.center_hz - 178_809_350.0).abs() < 1.0);
        let t = transmission(hz_to_rad(g.center_hz), &cell).unwrap();
        assert!((t / 0.627_180_777_359_282_6 - 1.0).abs() < 2e-6, "{t}");
        let a = absorption_coefficient(hz_to_rad(1391.134e6), &cell).unwrap();
        assert!((a / 16.620_551_223_106_357 - 1.0).abs() < 2e-6, "{a}");
    }

    #[test]
    fn model_matches_free_functions() {
        let cell = VaporCell::reference(26.0).unwrap();
        let m = AbsorptionModel::new(&cell).unwrap();
        for ghz in [-2.0, 0.0, 1.39, 6.8] {
            let d = ghz_to_rad(ghz);
            let a = absorption_coefficient(d, &cell).unwrap();
            assert!((m.absorption(d).unwrap() - a).abs() <= 1e-14 * a.abs());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn voigt_matches_quadrature(ghz in -3.0f64..3.0, t in 250.0f64..400.0) {
            let d = ghz_to_rad(ghz);
            let fast = voigt_lineshape(d, Isotope::Rb85, t).unwrap();
            let slow = voigt_lineshape_quadrature(d, Isotope::Rb85, t).unwrap();
            prop_assert!((fast / slow - 1.0).abs() < 1e-6, "{} vs {}", fast, slow);
        }

        #[test]
        fn transmission_in_unit_interval(ghz in -20.0f64..27.0, t in 250.0f64..330.0, l in 0.0f64..0.2) {
            let cell = VaporCell::new(l, t).unwrap();
            let v = transmission(ghz_to_rad(ghz), &cell).unwrap();
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }
}
