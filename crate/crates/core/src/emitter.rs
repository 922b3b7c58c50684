//! Resonantly driven two-level emitter: coherent fraction, first- and
//! second-order correlations, resonance fluorescence spectrum, blinking,
//! power broadening and cascade decay.
//!
//! All rates are angular (rad/s), times in seconds.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::{ghz_to_rad, hz_to_rad};
use crate::error::{domain, invalid, Result};
use crate::quadrature::integrate_real_line;
use crate::spectrum::{FrequencyGrid, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterParams {
    /// Spontaneous emission rate Γ_sp.
    pub gamma_sp: f64,
    /// Pure dephasing rate γ*.
    pub gamma_star: f64,
    /// Rabi frequency Ω.
    pub rabi: f64,
    /// Transition frequency as an angular offset from ω_ref.
    pub center: f64,
}

impl EmitterParams {
    pub fn new(gamma_sp: f64, gamma_star: f64, rabi: f64) -> Result<Self> {
        if !(gamma_sp.is_finite() && gamma_sp > 0.0) {
            return Err(invalid(format!("gamma_sp must be positive, got {gamma_sp}")));
        }
        if !(gamma_star.is_finite() && gamma_star >= 0.0) {
            return Err(invalid(format!("gamma_star must be ≥ 0, got {gamma_star}")));
        }
        if !(rabi.is_finite() && rabi >= 0.0) {
            return Err(invalid(format!("rabi frequency must be ≥ 0, got {rabi}")));
        }
        Ok(Self { gamma_sp, gamma_star, rabi, center: 0.0 })
    }

    /// Rates given as linear frequencies in GHz (the x/2π convention).
    pub fn from_ghz(gamma_sp: f64, gamma_star: f64, rabi: f64) -> Result<Self> {
        Self::new(ghz_to_rad(gamma_sp), ghz_to_rad(gamma_star), ghz_to_rad(rabi))
    }

    /// Moves the transition to `offset_hz` from the reference.
    pub fn at_offset_hz(mut self, offset_hz: f64) -> Self {
        self.center = hz_to_rad(offset_hz);
        self
    }

    pub fn t1(&self) -> f64 {
        1.0 / self.gamma_sp
    }

    pub fn t2(&self) -> f64 {
        1.0 / (0.5 * self.gamma_sp + self.gamma_star)
    }

    pub fn mollow(&self) -> MollowCoefficients {
        MollowCoefficients::new(self)
    }
}

/// Constants of the closed-form correlation functions.
///
/// The transient part of g¹ is e^{-aτ}[P/2 cos λτ + (Qλ/2) sin λτ / λ]; only
/// λ² and the product Qλ enter, so both damping regimes share one form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MollowCoefficients {
    /// λ² = Ω² − (Γ_sp/4 − γ*/2)²; negative in the overdamped regime.
    pub lambda_sq: f64,
    /// Damping of the sidebands, (3Γ_sp + 2γ*)/4.
    pub sideband_damping: f64,
    /// Damping of the central incoherent peak, 1/T₂.
    pub central_damping: f64,
    /// Sideband amplitude P.
    pub p: f64,
    /// Sideband asymmetry times λ, Qλ (rad/s).
    pub q_lambda: f64,
    pub coherent: f64,
}

impl MollowCoefficients {
    fn new(e: &EmitterParams) -> Self {
        let (g, gs, o2) = (e.gamma_sp, e.gamma_star, e.rabi * e.rabi);
        let denom = 2.0 * o2 + g * g + 2.0 * gs * g;
        let shift = 0.25 * g - 0.5 * gs;
        let q_num = o2 * (5.0 * g - 2.0 * gs) - 2.0 * gs * gs * g + 2.0 * gs * g * g - 0.5 * g * g * g;
        Self {
            lambda_sq: o2 - shift * shift,
            sideband_damping: 0.75 * g + 0.5 * gs,
            central_damping: 0.5 * g + gs,
            p: (2.0 * o2 - g * g + 2.0 * gs * g) / denom,
            q_lambda: q_num / (2.0 * denom),
            coherent: coherent_fraction(e),
        }
    }

    pub fn is_overdamped(&self) -> bool {
        self.lambda_sq < 0.0
    }

    /// Generalized Rabi frequency λ, or `None` when it is imaginary.
    pub fn lambda(&self) -> Option<f64> {
        (self.lambda_sq >= 0.0).then(|| self.lambda_sq.sqrt())
    }

    /// Q itself (undefined at λ = 0 and in the overdamped regime).
    pub fn q(&self) -> Option<f64> {
        self.lambda().filter(|l| *l > 0.0).map(|l| self.q_lambda / l)
    }

    /// (e^{-aτ} cos λτ, e^{-aτ} sin λτ / λ), continued analytically to
    /// cosh/sinh when λ² < 0.
    fn damped(&self, tau: f64) -> (f64, f64) {
        let a = self.sideband_damping;
        let l2 = self.lambda_sq;
        if l2 > 0.0 {
            let l = l2.sqrt();
            let env = (-a * tau).exp();
            let (s, c) = (l * tau).sin_cos();
            (env * c, env * s / l)
        } else if l2 < 0.0 {
            let k = (-l2).sqrt();
            // κ < a always, so e^{-(a-κ)τ} is the slow term
            let slow = (-(a - k) * tau).exp();
            let fast = (-(a + k) * tau).exp();
            (0.5 * (slow + fast), slow * -(-2.0 * k * tau).exp_m1() / (2.0 * k))
        } else {
            let env = (-a * tau).exp();
            (env, env * tau)
        }
    }

    pub fn g1(&self, tau: f64) -> f64 {
        let (c, s) = self.damped(tau);
        self.coherent + 0.5 * (-self.central_damping * tau).exp() + 0.5 * self.p * c + 0.5 * self.q_lambda * s
    }

    pub fn g2(&self, tau: f64) -> f64 {
        let (c, s) = self.damped(tau);
        1.0 - (c + self.sideband_damping * s)
    }

    /// Incoherent spectral density per unit angular frequency at detuning
    /// Δ = ω − ω₀; integrates to 1 − coherent over the real line.
    pub fn incoherent_density(&self, detuning: f64) -> f64 {
        let b = self.central_damping;
        let a = self.sideband_damping;
        let central = b / (detuning * detuning + b * b) / (2.0 * PI);
        // Re[(A s + q/2)/(s² + λ²)] with s = a + iΔ
        let (sr, si) = (a, detuning);
        let num_r = 0.5 * self.p * sr + 0.5 * self.q_lambda;
        let num_i = 0.5 * self.p * si;
        let den_r = sr * sr - si * si + self.lambda_sq;
        let den_i = 2.0 * sr * si;
        let side = (num_r * den_r + num_i * den_i) / (den_r * den_r + den_i * den_i) / PI;
        (central + side).max(0.0)
    }

    /// The incoherent density as a sum of complex poles,
    /// Σ (1/π) Re[c / (r + iΔ)]. At λ = 0 the double pole is split by a
    /// relative 1e-12 in λ², far below any other error.
    pub fn incoherent_poles(&self) -> [SpectralPole; 3] {
        let a = self.sideband_damping;
        let floor = 1e-12 * a * a;
        let l2 = if self.lambda_sq.abs() < floor { floor } else { self.lambda_sq };
        let mu = Complex64::new(l2, 0.0).sqrt();
        let i = Complex64::i();
        let amp = 0.5 * self.p;
        let half_q = 0.5 * self.q_lambda;
        [
            SpectralPole { weight: Complex64::new(0.5, 0.0), rate: Complex64::new(self.central_damping, 0.0) },
            SpectralPole { weight: (amp * i * mu + half_q) / (2.0 * i * mu), rate: a - i * mu },
            SpectralPole { weight: (half_q - amp * i * mu) / (-2.0 * i * mu), rate: a + i * mu },
        ]
    }
}

/// One term (1/π) Re[weight / (rate + iΔ)] of a pole expansion. Re(rate) > 0
/// is the half width; the term integrates to Re(weight) over Δ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPole {
    pub weight: Complex64,
    pub rate: Complex64,
}

impl SpectralPole {
    pub fn density(&self, detuning: f64) -> f64 {
        (self.weight / (self.rate + Complex64::new(0.0, detuning))).re / PI
    }

    /// The same pole with the detuning axis divided by `factor` (e.g. 2π to
    /// go from rad/s to Hz, density per new unit).
    pub fn rescaled(&self, factor: f64) -> Self {
        Self { weight: self.weight, rate: self.rate / factor }
    }
}

/// Weight of the elastically scattered (coherent) component,
/// Γ_sp² / (2Ω² + Γ_sp² + 2γ*Γ_sp).
pub fn coherent_fraction(p: &EmitterParams) -> f64 {
    let g = p.gamma_sp;
    g * g / (2.0 * p.rabi * p.rabi + g * g + 2.0 * p.gamma_star * g)
}

/// Steady-state excited population for a drive detuned by `detuning`
/// (rad/s) from the transition. Its FWHM in the detuning is
/// 2√(γ₂² + Ω²γ₂/Γ_sp) with γ₂ = Γ_sp/2 + γ*.
pub fn excited_population(detuning: f64, p: &EmitterParams) -> f64 {
    let g2 = 0.5 * p.gamma_sp + p.gamma_star;
    let o2 = p.rabi * p.rabi;
    0.5 * o2 * g2 / p.gamma_sp / (detuning * detuning + g2 * g2 + o2 * g2 / p.gamma_sp)
}

fn check_delay(tau: f64) -> Result<()> {
    if tau >= 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("delay must be finite and ≥ 0, got {tau}")))
    }
}

/// Normalized first-order correlation with the optical carrier removed.
/// Real-valued since the drive is exactly resonant.
pub fn g1(tau: f64, p: &EmitterParams) -> Result<f64> {
    check_delay(tau)?;
    Ok(p.mollow().g1(tau))
}

/// Second-order correlation of the two-level system.
pub fn g2_tls(tau: f64, p: &EmitterParams) -> Result<f64> {
    check_delay(tau)?;
    Ok(p.mollow().g2(tau))
}

/// Incoherent RF spectral density (per rad/s) at angular detuning from ω₀.
pub fn incoherent_density(detuning: f64, p: &EmitterParams) -> f64 {
    p.mollow().incoherent_density(detuning)
}

/// Resonance fluorescence spectrum on a Hz grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfSpectrum {
    /// Weight of the delta function at ω₀.
    pub delta_weight: f64,
    /// Incoherent density per Hz.
    pub incoherent: Spectrum,
    /// Fraction of the incoherent weight inside the grid.
    pub captured_fraction: f64,
}

impl RfSpectrum {
    /// Below 99.9% of the incoherent weight on the grid.
    pub fn is_truncated(&self) -> bool {
        self.captured_fraction < 0.999
    }
}

pub fn rf_spectrum(grid: &FrequencyGrid, p: &EmitterParams) -> Result<RfSpectrum> {
    let m = p.mollow();
    let values = grid
        .points()
        .into_iter()
        .map(|hz| 2.0 * PI * m.incoherent_density(hz_to_rad(hz) - p.center))
        .collect();
    let incoherent = Spectrum::new(*grid, values)?;
    let delta_weight = coherent_fraction(p);
    let inc_total = 1.0 - delta_weight;
    let captured_fraction = if inc_total > 0.0 {
        let lo = hz_to_rad(grid.start()) - p.center;
        let hi = hz_to_rad(grid.end()) - p.center;
        let inside = crate::quadrature::integrate(|d| m.incoherent_density(d), lo, hi, 1e-14, 1e-10)?;
        (inside / inc_total).min(1.0)
    } else {
        1.0
    };
    Ok(RfSpectrum { delta_weight, incoherent, captured_fraction })
}

/// ∫ incoherent density over the whole real line, by quadrature.
pub fn incoherent_weight(p: &EmitterParams) -> Result<f64> {
    let m = p.mollow();
    let scale = m.central_damping.max(p.rabi);
    integrate_real_line(|d| m.incoherent_density(d), 0.0, scale, 1e-14, 1e-11)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlinkingParams {
    /// Stationary probability β of the emitting state.
    pub on_fraction: f64,
    /// Correlation time τ_c of the telegraph process (s).
    pub correlation_time: f64,
}

impl BlinkingParams {
    pub fn new(on_fraction: f64, correlation_time: f64) -> Result<Self> {
        if !(on_fraction > 0.0 && on_fraction <= 1.0) {
            return Err(invalid(format!("on fraction must be in (0, 1], got {on_fraction}")));
        }
        if !(correlation_time > 0.0 && correlation_time.is_finite()) {
            return Err(invalid(format!("correlation time must be positive, got {correlation_time}")));
        }
        Ok(Self { on_fraction, correlation_time })
    }

    /// Bunching factor 1 + ((1−β)/β) e^{−τ/τ_c}.
    pub fn bunching(&self, tau: f64) -> f64 {
        let b = self.on_fraction;
        1.0 + (1.0 - b) / b * (-tau / self.correlation_time).exp()
    }
}

pub fn g2_blinking(tau: f64, p: &EmitterParams, b: &BlinkingParams) -> Result<f64> {
    Ok(b.bunching(tau) * g2_tls(tau, p)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCalibration {
    /// A, in (rad/s)² per nW/µm².
    pub coefficient: f64,
    /// Resonant intensity I_R in nW/µm².
    pub intensity: f64,
}

impl PowerCalibration {
    pub fn new(coefficient: f64, intensity: f64) -> Result<Self> {
        if !(coefficient > 0.0 && coefficient.is_finite()) {
            return Err(invalid(format!("broadening coefficient must be positive, got {coefficient}")));
        }
        if !(intensity >= 0.0 && intensity.is_finite()) {
            return Err(invalid(format!("intensity must be ≥ 0, got {intensity}")));
        }
        Ok(Self { coefficient, intensity })
    }

    /// Ω = √(A I_R).
    pub fn rabi_frequency(&self) -> f64 {
        (self.coefficient * self.intensity).sqrt()
    }
}

/// √(Γ_sp² + 2 A I_R).
pub fn power_broadened_fwhm(gamma_sp: f64, cal: &PowerCalibration) -> f64 {
    (gamma_sp * gamma_sp + 2.0 * cal.coefficient * cal.intensity).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayParams {
    /// Relaxation rate Γ_c feeding the emitting state.
    pub gamma_c: f64,
    pub gamma_sp: f64,
}

impl DecayParams {
    pub fn new(gamma_c: f64, gamma_sp: f64) -> Result<Self> {
        if !(gamma_c > 0.0 && gamma_c.is_finite() && gamma_sp > 0.0 && gamma_sp.is_finite()) {
            return Err(invalid(format!("decay rates must be positive, got {gamma_c}, {gamma_sp}")));
        }
        Ok(Self { gamma_c, gamma_sp })
    }

    fn ordered(&self) -> (f64, f64) {
        (self.gamma_c.min(self.gamma_sp), self.gamma_c.max(self.gamma_sp))
    }

    /// Time of the population maximum, ln(Γ_c/Γ_sp)/(Γ_c − Γ_sp).
    pub fn peak_time(&self) -> f64 {
        let (slow, fast) = self.ordered();
        let d = fast - slow;
        if d == 0.0 {
            1.0 / slow
        } else {
            (d / slow).ln_1p() / d
        }
    }

    /// Unchecked population at t ≥ 0.
    pub fn population(&self, t: f64) -> f64 {
        let (slow, fast) = self.ordered();
        let d = fast - slow;
        let growth = if d == 0.0 { t } else { -(-d * t).exp_m1() / d };
        self.gamma_c * (-slow * t).exp() * growth
    }
}

/// Γ_c/(Γ_c − Γ_sp) (e^{−Γ_sp t} − e^{−Γ_c t}), with the Γ t e^{−Γt} limit on
/// the diagonal.
pub fn decay_population(t: f64, d: &DecayParams) -> Result<f64> {
    check_delay(t)?;
    Ok(d.population(t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> EmitterParams {
        EmitterParams::from_ghz(1.42, 0.0, 0.39).unwrap()
    }

    #[test]
    fn excited_population_matches_the_bloch_steady_state() {
        for p in [reference(), EmitterParams::from_ghz(1.0, 0.4, 2.0).unwrap()] {
            let ss = crate::simkit::bloch_steady_state(&p);
            assert!((excited_population(0.0, &p) - ss.rho_ee).abs() < 1e-12);
            let g2 = 0.5 * p.gamma_sp + p.gamma_star;
            let hwhm = (g2 * g2 + p.rabi * p.rabi * g2 / p.gamma_sp).sqrt();
            assert!((excited_population(hwhm, &p) / ss.rho_ee - 0.5).abs() < 1e-12);
        }
        // γ* = 0 width is the power-broadened linewidth
        let p = reference();
        let cal = PowerCalibration::new(p.rabi * p.rabi, 1.0).unwrap();
        let w = power_broadened_fwhm(p.gamma_sp, &cal);
        assert!((excited_population(0.5 * w, &p) / excited_population(0.0, &p) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn coherent_fraction_examples() {
        assert!((coherent_fraction(&reference()) - 0.869).abs() < 5e-4);
        let weak = EmitterParams::from_ghz(1.0, 0.0, 0.0).unwrap();
        assert_eq!(coherent_fraction(&weak), 1.0);
        let g = ghz_to_rad(1.0);
        let sat = EmitterParams::new(g, 0.0, g).unwrap();
        assert!((coherent_fraction(&sat) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(EmitterParams::new(0.0, 0.0, 0.0).is_err());
        assert!(EmitterParams::new(1.0, -1.0, 0.0).is_err());
        assert!(EmitterParams::new(1.0, 0.0, f64::NAN).is_err());
        assert!(g1(-1e-12, &reference()).is_err());
        assert!(g2_tls(-1e-12, &reference()).is_err());
        let p = reference();
        assert!(p.t2() <= 2.0 * p.t1());
    }

    #[test]
    fn g1_limits() {
        let p = reference();
        assert!((g1(0.0, &p).unwrap() - 1.0).abs() < 1e-12);
        let late = g1(100.0 / p.gamma_sp, &p).unwrap();
        assert!((late - coherent_fraction(&p)).abs() < 1e-6);
        let weak = EmitterParams::from_ghz(1.42, 0.0, 0.0).unwrap();
        for tau in [0.0, 1e-10, 1e-9] {
            assert!((g1(tau, &weak).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn g2_limits() {
        let p = reference();
        assert_eq!(g2_tls(0.0, &p).unwrap(), 0.0);
        assert!((g2_tls(1e-6, &p).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn critical_damping_is_continuous() {
        // λ = 0 at Ω = Γ/4 when γ* = 0
        let g = ghz_to_rad(1.0);
        let at = EmitterParams::new(g, 0.0, g / 4.0).unwrap();
        assert_eq!(at.mollow().lambda_sq, 0.0);
        for tau in [0.2e-9, 1e-9, 3e-9] {
            let mid = at.mollow();
            for eps in [1e-7, -1e-7] {
                let near = EmitterParams::new(g, 0.0, g / 4.0 * (1.0 + eps)).unwrap().mollow();
                assert!((near.g2(tau) - mid.g2(tau)).abs() < 1e-6);
                assert!((near.g1(tau) - mid.g1(tau)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn strong_drive_sidebands_at_lambda() {
        let g = ghz_to_rad(1.0);
        let p = EmitterParams::new(g, 0.0, 10.0 * g).unwrap();
        let m = p.mollow();
        let lambda = m.lambda().unwrap();
        assert!((lambda / p.rabi - 1.0).abs() < 0.01);
        // locate the sideband maximum by golden-section on [0.8λ, 1.2λ]
        let (mut lo, mut hi) = (0.8 * lambda, 1.2 * lambda);
        for _ in 0..200 {
            let a = lo + 0.382 * (hi - lo);
            let b = lo + 0.618 * (hi - lo);
            if m.incoherent_density(a) > m.incoherent_density(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        assert!((0.5 * (lo + hi) / lambda - 1.0).abs() < 0.01);
        assert_eq!(m.incoherent_density(lambda), m.incoherent_density(-lambda));
    }

    #[test]
    fn spectrum_normalization_reference_parameters() {
        let p = reference();
        let total = coherent_fraction(&p) + incoherent_weight(&p).unwrap();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn rf_spectrum_reports_truncation() {
        let p = reference();
        let narrow = FrequencyGrid::centered(0.0, 1e9, 10e6).unwrap();
        let wide = FrequencyGrid::centered(0.0, 2000e9, 100e6).unwrap();
        let a = rf_spectrum(&narrow, &p).unwrap();
        let b = rf_spectrum(&wide, &p).unwrap();
        assert_eq!(a.delta_weight.to_bits(), coherent_fraction(&p).to_bits());
        assert!(a.is_truncated());
        assert!(!b.is_truncated());
        assert!(a.incoherent.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn pole_expansion_matches_density() {
        for (g, gs, o) in [(1.42, 0.0, 0.39), (1.0, 0.0, 0.25), (1.0, 0.3, 0.05), (1.0, 0.0, 4.0)] {
            let m = EmitterParams::from_ghz(g, gs, o).unwrap().mollow();
            let poles = m.incoherent_poles();
            let w: f64 = poles.iter().map(|p| p.weight.re).sum();
            assert!((w - (1.0 - m.coherent)).abs() < 1e-9, "{w}");
            for ghz in [-7.0, -1.0, 0.0, 0.3, 2.0] {
                let d = ghz_to_rad(ghz);
                let direct = m.incoherent_density(d);
                let sum: f64 = poles.iter().map(|p| p.density(d)).sum();
                assert!((sum - direct).abs() < 1e-9 * m.incoherent_density(0.0), "{g} {gs} {o} {ghz}");
            }
        }
    }

    #[test]
    fn fourier_consistency() {
        // S_inc(Δ) = (1/π) ∫₀^∞ (g1(τ) − C) cos Δτ dτ
        let p = EmitterParams::from_ghz(1.1, 0.2, 0.8).unwrap();
        let m = p.mollow();
        let tmax = 50.0 * p.t2();
        for ghz in [0.0, 0.5, 1.3, 3.0] {
            let d = ghz_to_rad(ghz);
            let ft = crate::quadrature::integrate(|t| (m.g1(t) - m.coherent) * (d * t).cos(), 0.0, tmax, 1e-22, 1e-10)
                .unwrap()
                / PI;
            let direct = m.incoherent_density(d);
            let peak = m.incoherent_density(0.0);
            assert!((ft - direct).abs() < 1e-4 * peak, "{ghz}: {ft} vs {direct}");
        }
    }

    #[test]
    fn blinking_examples() {
        let p = reference();
        let none = BlinkingParams::new(1.0, 580e-9).unwrap();
        for tau in [0.0, 1e-10, 1e-9, 1e-6] {
            assert_eq!(g2_blinking(tau, &p, &none).unwrap(), g2_tls(tau, &p).unwrap());
        }
        let b = BlinkingParams::new(0.16, 1e-6).unwrap();
        let plateau = g2_blinking(5e-9, &p, &b).unwrap();
        assert!((plateau - 1.0 / 0.16).abs() < 0.05);
        let b = BlinkingParams::new(0.8, 580e-9).unwrap();
        let half = (b.bunching(580e-9 * 2f64.ln()) - 1.0) / (b.bunching(0.0) - 1.0);
        assert!((half - 0.5).abs() < 1e-12);
        assert!(BlinkingParams::new(0.0, 1.0).is_err());
        assert!(BlinkingParams::new(1.1, 1.0).is_err());
    }

    #[test]
    fn power_broadening_examples() {
        let cal = PowerCalibration::new(0.34e17, 141.0).unwrap();
        let omega = cal.rabi_frequency() / (2.0 * PI * 1e9);
        assert!((omega - 0.35).abs() < 0.007, "{omega}");
        let fwhm = power_broadened_fwhm(ghz_to_rad(1.42), &cal) / (2.0 * PI * 1e9);
        assert!((fwhm - 1.50).abs() < 0.01, "{fwhm}");
        let off = PowerCalibration::new(0.34e17, 0.0).unwrap();
        assert_eq!(power_broadened_fwhm(3.0, &off), 3.0);
    }

    #[test]
    fn decay_examples() {
        let d = DecayParams::new(ghz_to_rad(0.176), ghz_to_rad(1.7)).unwrap();
        assert!((d.peak_time() - 237e-12).abs() < 1e-12, "{}", d.peak_time());
        assert_eq!(decay_population(0.0, &d).unwrap(), 0.0);
        assert!(decay_population(-1.0, &d).is_err());

        let g = 1e9;
        let equal = DecayParams::new(g, g).unwrap();
        assert!((equal.peak_time() - 1.0 / g).abs() < 1e-24);
        let t = 0.7e-9;
        assert!((equal.population(t) - g * t * (-g * t).exp()).abs() < 1e-15);

        let instant = DecayParams::new(1e6 * g, g).unwrap();
        // e^{-10} = 4.5e-5 is still visible at t = 10/Γ_c, so start at 12/Γ_c
        for t in [12.0 / (1e6 * g), 1e-9, 5e-9] {
            assert!((instant.population(t) - (-g * t).exp()).abs() < 1e-5);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]
        #[test]
        fn g2_bounded(g in 0.2f64..3.0, gs in 0.0f64..1.0, o in 0.0f64..3.0, tau in 0.0f64..20e-9) {
            let p = EmitterParams::from_ghz(g, gs, o).unwrap();
            let v = g2_tls(tau, &p).unwrap();
            prop_assert!(v >= -1e-12);
            // overshoot is bounded by the envelope e^{-aτ}
            prop_assert!(v <= 2.0);
        }

        #[test]
        fn incoherent_nonnegative(g in 0.2f64..3.0, gs in 0.0f64..1.0, o in 0.0f64..3.0, d in -20.0f64..20.0) {
            let p = EmitterParams::from_ghz(g, gs, o).unwrap();
            let m = p.mollow();
            let b = m.central_damping;
            let raw = {
                let dd = ghz_to_rad(d);
                let a = m.sideband_damping;
                let central = b / (dd * dd + b * b) / (2.0 * PI);
                let (nr, ni) = (0.5 * m.p * a + 0.5 * m.q_lambda, 0.5 * m.p * dd);
                let (dr, di) = (a * a - dd * dd + m.lambda_sq, 2.0 * a * dd);
                central + (nr * dr + ni * di) / (dr * dr + di * di) / PI
            };
            prop_assert!(raw >= -1e-12 * central_peak(&m));
        }

        #[test]
        fn decay_continuous_across_diagonal(g in 0.1f64..5.0, t in 0.0f64..10.0) {
            let g = g * 1e9;
            let t = t * 1e-9;
            let on = DecayParams::new(g, g).unwrap().population(t);
            let near = DecayParams::new(g * (1.0 + 1e-9), g).unwrap().population(t);
            prop_assert!((on - near).abs() <= 1e-7 * on.max(1e-12));
        }
    }

    fn central_peak(m: &MollowCoefficients) -> f64 {
        1.0 / (2.0 * PI * m.central_damping)
    }
}
