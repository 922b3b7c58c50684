//! Two-state Markov (random telegraph) blinking process.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::emitter::BlinkingParams;
use crate::error::{invalid, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelegraphRates {
    /// off → on (1/s).
    pub k_on: f64,
    /// on → off (1/s). Zero means the emitter never switches off (β = 1).
    pub k_off: f64,
}

impl TelegraphRates {
    pub fn new(k_on: f64, k_off: f64) -> Result<Self> {
        if !(k_on > 0.0 && k_on.is_finite()) || !(k_off >= 0.0 && k_off.is_finite()) {
            return Err(invalid(format!("telegraph rates must be positive, got k_on={k_on}, k_off={k_off}")));
        }
        Ok(Self { k_on, k_off })
    }

    /// k₊ = β/τ_c, k₋ = (1−β)/τ_c.
    pub fn from_blinking(b: &BlinkingParams) -> Self {
        Self {
            k_on: b.on_fraction / b.correlation_time,
            k_off: (1.0 - b.on_fraction) / b.correlation_time,
        }
    }

    pub fn on_fraction(&self) -> f64 {
        self.k_on / (self.k_on + self.k_off)
    }

    pub fn correlation_time(&self) -> f64 {
        1.0 / (self.k_on + self.k_off)
    }
}

/// On-intervals of one telegraph realisation on [0, duration).
#[derive(Debug, Clone, PartialEq)]
pub struct TelegraphTrajectory {
    pub on_intervals: Vec<(f64, f64)>,
    pub duration: f64,
}

impl TelegraphTrajectory {
    /// Starts from the stationary distribution.
    pub fn simulate<R: Rng>(rates: &TelegraphRates, duration: f64, rng: &mut R) -> Result<Self> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(invalid(format!("duration must be positive, got {duration}")));
        }
        let dwell_off = Exp::new(rates.k_on).map_err(|e| invalid(e.to_string()))?;
        let dwell_on = if rates.k_off > 0.0 { Some(Exp::new(rates.k_off).map_err(|e| invalid(e.to_string()))?) } else { None };
        let mut on = rng.random::<f64>() < rates.on_fraction();
        let mut t = 0.0;
        let mut on_intervals = Vec::new();
        while t < duration {
            if on {
                let d = dwell_on.as_ref().map_or(f64::INFINITY, |e| e.sample(rng));
                let end = (t + d).min(duration);
                if end > t {
                    on_intervals.push((t, end));
                }
                t += d;
            } else {
                t += dwell_off.sample(rng);
            }
            on = !on;
        }
        Ok(Self { on_intervals, duration })
    }

    pub fn on_time(&self) -> f64 {
        self.on_intervals.iter().map(|(a, b)| b - a).sum()
    }

    pub fn on_fraction(&self) -> f64 {
        self.on_time() / self.duration
    }

    /// Rates estimated from the mean dwell times, ignoring dwells cut by the
    /// ends of the record.
    pub fn estimated_rates(&self) -> Option<TelegraphRates> {
        let iv = &self.on_intervals;
        let inner_on: Vec<f64> = iv.iter().filter(|(a, b)| *a > 0.0 && *b < self.duration).map(|(a, b)| b - a).collect();
        let gaps: Vec<f64> = iv.windows(2).map(|w| w[1].0 - w[0].1).collect();
        if inner_on.is_empty() || gaps.is_empty() {
            return None;
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        TelegraphRates::new(1.0 / mean(&gaps), 1.0 / mean(&inner_on)).ok()
    }
}
