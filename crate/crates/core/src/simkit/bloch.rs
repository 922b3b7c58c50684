//! Optical Bloch equations of the resonantly driven two-level system and
//! quantum-regression correlators, integrated numerically.
//!
//! Integration runs in units of the radiative lifetime (u = Γ_sp τ) so that
//! every component is O(1) for the error control.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ode::{integrate, Tolerance};
use crate::emitter::EmitterParams;
use crate::error::{invalid, Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const POSITIVITY_TOL: f64 = 1e-8;

/// Populations and coherence of the emitter in the frame of the drive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub rho_ee: f64,
    /// ρ_eg = ⟨e|ρ|g⟩.
    pub rho_eg: Complex64,
}

impl BlochState {
    pub fn ground() -> Self {
        Self { rho_ee: 0.0, rho_eg: ZERO }
    }

    /// 0 ≤ ρ_ee ≤ 1 and |ρ_eg|² ≤ ρ_ee(1−ρ_ee), each up to `tol`.
    pub fn is_physical(&self, tol: f64) -> bool {
        self.rho_ee >= -tol
            && self.rho_ee <= 1.0 + tol
            && self.rho_eg.norm_sqr() <= self.rho_ee * (1.0 - self.rho_ee) + tol
    }

    fn to_elements(self) -> Vec<Complex64> {
        vec![Complex64::new(1.0 - self.rho_ee, 0.0), self.rho_eg.conj(), self.rho_eg, Complex64::new(self.rho_ee, 0.0)]
    }

    fn from_elements(x: &[Complex64]) -> Self {
        Self { rho_ee: x[3].re, rho_eg: x[2] }
    }
}

pub fn bloch_steady_state(p: &EmitterParams) -> BlochState {
    let (t1, t2) = (p.t1(), p.t2());
    let s = (p.rabi * p.rabi * t1 * t2).min(f64::MAX);
    let rho_ee = if s.is_infinite() { 0.5 } else { 0.5 * s / (1.0 + s) };
    let rho_eg = -I * (0.5 * p.rabi * t2 * (1.0 - 2.0 * rho_ee));
    BlochState { rho_ee, rho_eg }
}

/// Bloch generator in scaled time, acting on [gg, ge, eg, ee].
#[derive(Debug, Clone, Copy)]
struct Generator {
    half_rabi: f64,
    coherence_decay: f64,
}

impl Generator {
    fn new(p: &EmitterParams) -> Self {
        Self { half_rabi: 0.5 * p.rabi / p.gamma_sp, coherence_decay: 0.5 + p.gamma_star / p.gamma_sp }
    }

    fn apply(&self, x: &[Complex64], dx: &mut [Complex64]) {
        let h = -I * self.half_rabi;
        dx[0] = h * (x[2] - x[1]) + x[3];
        dx[1] = h * (x[3] - x[0]) - self.coherence_decay * x[1];
        dx[2] = h * (x[0] - x[3]) - self.coherence_decay * x[2];
        dx[3] = h * (x[1] - x[2]) - x[3];
    }
}

fn check_delays(delays: &[f64]) -> Result<()> {
    if delays.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(invalid("delays must be finite and ≥ 0"));
    }
    Ok(())
}

/// Integrates `x0` under the Bloch generator and returns the states at the
/// given scaled times, in the caller's order.
fn evolve_elements(gen: Generator, x0: Vec<Complex64>, scaled: &[f64], tol: Tolerance) -> Result<Vec<Vec<Complex64>>> {
    let mut order: Vec<usize> = (0..scaled.len()).collect();
    order.sort_by(|&a, &b| scaled[a].total_cmp(&scaled[b]));
    let sorted: Vec<f64> = order.iter().map(|&i| scaled[i]).collect();
    let ys = integrate(|_, x, dx| gen.apply(x, dx), x0, &sorted, tol)?;
    let mut out = vec![Vec::new(); scaled.len()];
    for (y, &i) in ys.into_iter().zip(&order) {
        out[i] = y;
    }
    Ok(out)
}

/// Density matrix at times `times` (s) starting from `initial`.
pub fn evolve_bloch(p: &EmitterParams, initial: BlochState, times: &[f64]) -> Result<Vec<BlochState>> {
    check_delays(times)?;
    let scaled: Vec<f64> = times.iter().map(|t| t * p.gamma_sp).collect();
    let states: Vec<BlochState> = evolve_elements(Generator::new(p), initial.to_elements(), &scaled, Tolerance::default())?
        .iter()
        .map(|x| BlochState::from_elements(x))
        .collect();
    if let Some((t, s)) = times.iter().zip(&states).find(|(_, s)| !s.is_physical(POSITIVITY_TOL)) {
        return Err(Error::Numeric(format!("Bloch state left the physical region at t = {t} s: {s:?}")));
    }
    Ok(states)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelatorOrder {
    First,
    Second,
}

/// Normalized g¹(τ) or g²(τ) from the quantum regression theorem. Second-order
/// values are real and returned with zero imaginary part.
pub fn regression_correlator(p: &EmitterParams, order: CorrelatorOrder, delays: &[f64]) -> Result<Vec<Complex64>> {
    match order {
        CorrelatorOrder::First => regression_g1(p, delays),
        CorrelatorOrder::Second => Ok(regression_g2(p, delays)?.into_iter().map(|v| Complex64::new(v, 0.0)).collect()),
    }
}

/// ⟨σ₊(0)σ₋(τ)⟩/ρ_ee, propagating ρσ₊.
pub fn regression_g1(p: &EmitterParams, delays: &[f64]) -> Result<Vec<Complex64>> {
    check_delays(delays)?;
    let ss = bloch_steady_state(p);
    if ss.rho_ee == 0.0 {
        return Err(invalid("g1 is undefined without drive (ρ_ee = 0)"));
    }
    let x0 = vec![ss.rho_eg.conj(), ZERO, Complex64::new(ss.rho_ee, 0.0), ZERO];
    let scaled: Vec<f64> = delays.iter().map(|t| t * p.gamma_sp).collect();
    Ok(evolve_elements(Generator::new(p), x0, &scaled, Tolerance::default())?
        .iter()
        .map(|x| x[2] / ss.rho_ee)
        .collect())
}

/// ⟨σ₊(0)σ₊σ₋(τ)σ₋(0)⟩/ρ_ee², propagating σ₋ρσ₊ ∝ |g⟩⟨g|.
pub fn regression_g2(p: &EmitterParams, delays: &[f64]) -> Result<Vec<f64>> {
    check_delays(delays)?;
    let ss = bloch_steady_state(p);
    if ss.rho_ee == 0.0 {
        return Err(invalid("g2 is undefined without drive (ρ_ee = 0)"));
    }
    let x0 = vec![Complex64::new(1.0, 0.0), ZERO, ZERO, ZERO];
    let scaled: Vec<f64> = delays.iter().map(|t| t * p.gamma_sp).collect();
    Ok(evolve_elements(Generator::new(p), x0, &scaled, Tolerance::default())?
        .iter()
        .map(|x| x[3].re / ss.rho_ee)
        .collect())
}

/// Incoherent spectral density (per rad/s) at angular detunings from the
/// drive, as (1/π) Re ∫₀^∞ [g¹(τ) − g¹(∞)] e^{−iΔτ} dτ accumulated alongside
/// the regression dynamics.
pub fn regression_spectrum(p: &EmitterParams, detunings: &[f64]) -> Result<Vec<f64>> {
    if detunings.iter().any(|d| !d.is_finite()) {
        return Err(invalid("detunings must be finite"));
    }
    let ss = bloch_steady_state(p);
    if ss.rho_ee == 0.0 {
        return Err(invalid("spectrum is undefined without drive (ρ_ee = 0)"));
    }
    let gen = Generator::new(p);
    let ge = ss.rho_eg.conj();
    // regression initial condition minus its stationary limit Tr(X₀)ρ_ss
    let mut y0 = vec![
        ge - ge * (1.0 - ss.rho_ee),
        -ge * ss.rho_eg.conj(),
        Complex64::new(ss.rho_ee, 0.0) - ge * ss.rho_eg,
        -ge * ss.rho_ee,
    ];
    y0.extend(std::iter::repeat(ZERO).take(detunings.len()));
    let scaled: Vec<f64> = detunings.iter().map(|d| d / p.gamma_sp).collect();
    let inv_ee = 1.0 / ss.rho_ee;
    // every transient decays at least as fast as Γ_sp/2
    let horizon = 80.0;
    let ys = integrate(
        |u, y, dy| {
            gen.apply(&y[..4], &mut dy[..4]);
            for (k, d) in scaled.iter().enumerate() {
                dy[4 + k] = y[2] * Complex64::from_polar(inv_ee, -d * u);
            }
        },
        y0,
        &[horizon],
        Tolerance::default(),
    )?;
    Ok(ys[0][4..].iter().map(|f| f.re / (PI * p.gamma_sp)).collect())
}
