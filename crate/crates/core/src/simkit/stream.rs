//! Photon click streams: quantum-jump Monte Carlo of the driven emitter under
//! telegraph blinking, and a constant-rate Poisson reference.

use std::f64::consts::TAU;
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::telegraph::{TelegraphRates, TelegraphTrajectory};
use crate::emitter::{BlinkingParams, EmitterParams};
use crate::error::{invalid, Error, Result};

const STREAM_TELEGRAPH: u64 = 0;
const STREAM_JUMPS: u64 = 1;
const STREAM_DEPHASING: u64 = 2;
const STREAM_SPLIT: u64 = 3;
const STREAM_THINNING: u64 = 4;

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Photon arrival times on one or two detectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ClickStream {
    pub channels: Vec<Vec<f64>>,
    pub duration: f64,
    pub seed: u64,
}

impl ClickStream {
    pub fn new(channels: Vec<Vec<f64>>, duration: f64, seed: u64) -> Result<Self> {
        if !(1..=2).contains(&channels.len()) {
            return Err(invalid("a click stream has one or two channels"));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(invalid(format!("duration must be positive, got {duration}")));
        }
        for ch in &channels {
            if ch.windows(2).any(|w| w[1] <= w[0]) || ch.iter().any(|t| !(*t >= 0.0 && *t < duration)) {
                return Err(invalid("arrival times must be strictly increasing within [0, duration)"));
            }
        }
        Ok(Self { channels, duration, seed })
    }

    pub fn total_clicks(&self) -> usize {
        self.channels.iter().map(Vec::len).sum()
    }

    pub fn mean_rate(&self) -> f64 {
        self.total_clicks() as f64 / self.duration
    }

    /// Sends each click of a single-channel stream to one of two detectors
    /// with probability ½.
    pub fn split(&self) -> Result<Self> {
        if self.channels.len() != 1 {
            return Err(invalid("only a single-channel stream can be split"));
        }
        let mut rng = rng_for(self.seed, STREAM_SPLIT);
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for &t in &self.channels[0] {
            if rng.random::<bool>() {
                a.push(t);
            } else {
                b.push(t);
            }
        }
        Ok(Self { channels: vec![a, b], duration: self.duration, seed: self.seed })
    }

    /// Keeps each click with probability `efficiency`.
    pub fn thinned(&self, efficiency: f64) -> Result<Self> {
        if !(efficiency > 0.0 && efficiency <= 1.0) {
            return Err(invalid(format!("efficiency must be in (0, 1], got {efficiency}")));
        }
        let mut rng = rng_for(self.seed, STREAM_THINNING);
        let channels = self
            .channels
            .iter()
            .map(|ch| ch.iter().copied().filter(|_| rng.random::<f64>() < efficiency).collect())
            .collect();
        Ok(Self { channels, duration: self.duration, seed: self.seed })
    }

    /// Single-column `time_s` CSV of one channel.
    pub fn write_channel_csv<W: Write>(&self, channel: usize, w: W) -> Result<()> {
        let ch = self.channels.get(channel).ok_or_else(|| invalid(format!("no channel {channel}")))?;
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["time_s"])?;
        for t in ch {
            wtr.write_record([format!("{t:e}")])?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn save_channel(&self, channel: usize, path: impl AsRef<Path>) -> Result<()> {
        self.write_channel_csv(channel, std::fs::File::create(path)?)
    }

    pub fn read_channel_csv<R: Read>(r: R) -> Result<Vec<f64>> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        if rdr.headers()?.iter().collect::<Vec<_>>() != ["time_s"] {
            return Err(invalid("click CSV must have the single header `time_s`"));
        }
        rdr.records()
            .map(|rec| {
                let rec = rec?;
                rec.get(0).unwrap_or("").parse::<f64>().map_err(|e| invalid(format!("click CSV: {e}")))
            })
            .collect()
    }
}

/// e^{Mt} for the no-jump generator M = [[0, −iΩ/2], [−iΩ/2, −Γ/2]] acting
/// on (c_g, c_e), written as e^{mt}[cosh νt + sinh(νt)/ν (M − m)] with
/// m = −Γ/4 and ν² = Γ²/16 − Ω²/4.
#[derive(Debug, Clone, Copy)]
struct NoJumpPropagator {
    gamma: f64,
    half_rabi: f64,
    nu_sq: f64,
}

impl NoJumpPropagator {
    fn new(p: &EmitterParams) -> Self {
        let gamma = p.gamma_sp;
        let half_rabi = 0.5 * p.rabi;
        Self { gamma, half_rabi, nu_sq: gamma * gamma / 16.0 - half_rabi * half_rabi }
    }

    fn apply(&self, psi: [Complex64; 2], t: f64) -> [Complex64; 2] {
        let m = -0.25 * self.gamma;
        let (ch, sh) = if self.nu_sq > 0.0 {
            let nu = self.nu_sq.sqrt();
            let fast = ((m + nu) * t).exp();
            (0.5 * (fast + ((m - nu) * t).exp()), fast * -(-2.0 * nu * t).exp_m1() / (2.0 * nu))
        } else if self.nu_sq < 0.0 {
            let w = (-self.nu_sq).sqrt();
            let env = (m * t).exp();
            (env * (w * t).cos(), env * (w * t).sin() / w)
        } else {
            let env = (m * t).exp();
            (env, env * t)
        };
        let off = Complex64::new(0.0, -self.half_rabi);
        let q = 0.25 * self.gamma;
        [
            psi[0] * (ch + sh * q) + psi[1] * (off * sh),
            psi[0] * (off * sh) + psi[1] * (ch - sh * q),
        ]
    }
}

fn norm_sqr(psi: &[Complex64; 2]) -> f64 {
    psi[0].norm_sqr() + psi[1].norm_sqr()
}

/// Quantum-jump emission times of an emitter switched on at `start` (in the
/// ground state) and off at `end`.
struct JumpSampler<'a> {
    prop: NoJumpPropagator,
    dephasing: Option<Exp<f64>>,
    jumps: &'a mut ChaCha8Rng,
    phases: &'a mut ChaCha8Rng,
}

impl JumpSampler<'_> {
    fn run(&mut self, start: f64, end: f64, out: &mut Vec<f64>) {
        let ground = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let mut anchor = start;
        let mut psi = ground;
        let mut threshold: f64 = self.jumps.random();
        let mut next_phase = self.next_phase_event(anchor);
        loop {
            let limit = next_phase.min(end);
            let at_limit = self.prop.apply(psi, limit - anchor);
            if norm_sqr(&at_limit) > threshold {
                if limit >= end {
                    return;
                }
                let phase: f64 = TAU * self.phases.random::<f64>();
                psi = [at_limit[0], at_limit[1] * Complex64::from_polar(1.0, phase)];
                anchor = limit;
                next_phase = self.next_phase_event(anchor);
                continue;
            }
            let dt = self.jump_delay(psi, threshold, limit - anchor);
            let t = anchor + dt;
            // a click can only be registered strictly after the previous one
            if out.last().map_or(true, |&prev| t > prev) && t < end {
                out.push(t);
            }
            anchor = t;
            psi = ground;
            threshold = self.jumps.random();
        }
    }

    fn next_phase_event(&mut self, from: f64) -> f64 {
        match &self.dephasing {
            Some(e) => from + e.sample(self.phases),
            None => f64::INFINITY,
        }
    }

    /// Solves ‖e^{Mt}ψ‖² = r on (0, max], knowing the norm there is ≤ r.
    fn jump_delay(&self, psi: [Complex64; 2], r: f64, max: f64) -> f64 {
        let ln_r = r.ln();
        let f = |t: f64| {
            let s = self.prop.apply(psi, t);
            let n = norm_sqr(&s);
            (n.ln() - ln_r, -self.prop.gamma * s[1].norm_sqr() / n)
        };
        let mut lo = 0.0;
        let mut hi = max;
        let mut step = 1.0 / self.prop.gamma;
        while step < hi {
            if f(step).0 <= 0.0 {
                hi = step;
                break;
            }
            lo = step;
            step *= 2.0;
        }
        let mut t = 0.5 * (lo + hi);
        for _ in 0..200 {
            let (v, d) = f(t);
            if v.abs() < 1e-14 {
                return t;
            }
            if v > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let newton = t - v / d;
            t = if d < 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if hi - lo <= 1e-15 * hi.max(1e-300) {
                break;
            }
        }
        t
    }
}

/// Photon emissions of a blinking, driven two-level emitter over `duration`.
/// The telegraph process starts in its stationary state; the emitter restarts
/// from the ground state at every switch-on.
pub fn simulate_clickstream(p: &EmitterParams, b: &BlinkingParams, duration: f64, seed: u64) -> Result<ClickStream> {
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(invalid(format!("duration must be positive, got {duration}")));
    }
    let rates = TelegraphRates::from_blinking(b);
    let trajectory = TelegraphTrajectory::simulate(&rates, duration, &mut rng_for(seed, STREAM_TELEGRAPH))?;
    let mut jumps = rng_for(seed, STREAM_JUMPS);
    let mut phases = rng_for(seed, STREAM_DEPHASING);
    let dephasing = if p.gamma_star > 0.0 {
        Some(Exp::new(p.gamma_star).map_err(|e| Error::InvalidArgument(e.to_string()))?)
    } else {
        None
    };
    let mut sampler = JumpSampler { prop: NoJumpPropagator::new(p), dephasing, jumps: &mut jumps, phases: &mut phases };
    let mut clicks = Vec::new();
    for &(a, z) in &trajectory.on_intervals {
        sampler.run(a, z, &mut clicks);
    }
    ClickStream::new(vec![clicks], duration, seed)
}

/// Uncorrelated clicks at a constant `rate`.
pub fn poisson_stream(rate: f64, duration: f64, seed: u64) -> Result<ClickStream> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(invalid(format!("rate must be positive, got {rate}")));
    }
    if !(duration > 0.0 && duration.is_finite()) {
        return Err(invalid(format!("duration must be positive, got {duration}")));
    }
    let mut rng = rng_for(seed, STREAM_JUMPS);
    let gap = Exp::new(rate).map_err(|e| invalid(e.to_string()))?;
    let mut t = 0.0;
    let mut clicks = Vec::new();
    loop {
        t += gap.sample(&mut rng);
        if t >= duration {
            break;
        }
        if clicks.last().map_or(true, |&prev| t > prev) {
            clicks.push(t);
        }
    }
    ClickStream::new(vec![clicks], duration, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simkit::bloch::{bloch_steady_state, evolve_bloch, BlochState};

    fn reference() -> EmitterParams {
        EmitterParams::from_ghz(1.42, 0.0, 0.39).unwrap()
    }

    #[test]
    fn propagator_matches_matrix_exponential_series() {
        for (g, o) in [(1.0, 0.3), (1.0, 0.5), (1.0, 2.0)] {
            let p = EmitterParams::new(g, 0.0, o).unwrap();
            let prop = NoJumpPropagator::new(&p);
            let psi = [Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)];
            let t = 1.7;
            // Taylor series of e^{Mt}ψ
            let m = [[Complex64::new(0.0, 0.0), Complex64::new(0.0, -0.5 * o)], [Complex64::new(0.0, -0.5 * o), Complex64::new(-0.5 * g, 0.0)]];
            let mut term = psi;
            let mut sum = psi;
            for k in 1..60 {
                term = [
                    (m[0][0] * term[0] + m[0][1] * term[1]) * (t / k as f64),
                    (m[1][0] * term[0] + m[1][1] * term[1]) * (t / k as f64),
                ];
                sum = [sum[0] + term[0], sum[1] + term[1]];
            }
            let got = prop.apply(psi, t);
            assert!((got[0] - sum[0]).norm() < 1e-13 && (got[1] - sum[1]).norm() < 1e-13, "{g} {o}");
        }
    }

    #[test]
    fn seeded_determinism() {
        let p = reference();
        let b = BlinkingParams::new(0.8, 580e-9).unwrap();
        let a = simulate_clickstream(&p, &b, 2e-5, 7).unwrap();
        let c = simulate_clickstream(&p, &b, 2e-5, 7).unwrap();
        assert_eq!(a, c);
        assert_ne!(a, simulate_clickstream(&p, &b, 2e-5, 8).unwrap());
    }

    #[test]
    fn mean_rate_matches_steady_state() {
        let p = reference();
        let b = BlinkingParams::new(1.0, 1e-6).unwrap();
        let duration = 2e-4;
        let s = simulate_clickstream(&p, &b, duration, 11).unwrap();
        let expected = p.gamma_sp * bloch_steady_state(&p).rho_ee;
        // antibunched light is sub-Poissonian, so √N overestimates the spread
        let sd = (expected * duration).sqrt() / duration;
        assert!((s.mean_rate() - expected).abs() < 3.0 * sd, "{} vs {expected}", s.mean_rate());
    }

    #[test]
    fn dephasing_reproduces_bloch_population() {
        // ensemble of short runs from the ground state vs the Bloch transient
        let p = EmitterParams::from_ghz(1.0, 0.5, 1.2).unwrap();
        let b = BlinkingParams::new(1.0, 1.0).unwrap();
        let horizon = 1.5 / p.gamma_sp;
        let runs = 20_000;
        let total: usize = (0..runs)
            .map(|s| simulate_clickstream(&p, &b, horizon, s as u64).unwrap().channels[0].len())
            .sum();
        let times: Vec<f64> = (0..=60).map(|k| horizon * k as f64 / 60.0).collect();
        let pops = evolve_bloch(&p, BlochState::ground(), &times).unwrap();
        let integral: f64 = pops.windows(2).map(|w| 0.5 * (w[0].rho_ee + w[1].rho_ee)).sum::<f64>() * horizon / 60.0;
        let expected = p.gamma_sp * integral;
        let mean = total as f64 / runs as f64;
        let sd = (mean / runs as f64).sqrt();
        assert!((mean - expected).abs() < 4.0 * sd, "{mean} vs {expected}");
    }

    #[test]
    fn poisson_and_split() {
        let s = poisson_stream(1e6, 0.01, 5).unwrap();
        let n = s.total_clicks() as f64;
        assert!((n - 1e4).abs() < 3.0 * 100.0);
        let two = s.split().unwrap();
        assert_eq!(two.total_clicks(), s.total_clicks());
        let a = two.channels[0].len() as f64;
        assert!((a - n / 2.0).abs() < 3.0 * (n / 4.0).sqrt());
        let thin = s.thinned(0.5).unwrap();
        assert!((thin.total_clicks() as f64 - n / 2.0).abs() < 3.0 * (n / 4.0).sqrt());
    }

    #[test]
    fn csv_round_trip() {
        let s = poisson_stream(1e6, 1e-4, 2).unwrap();
        let mut buf = Vec::new();
        s.write_channel_csv(0, &mut buf).unwrap();
        assert_eq!(ClickStream::read_channel_csv(&buf[..]).unwrap(), s.channels[0]);
    }
}
