//! Profile-likelihood intervals: each parameter is moved until χ² rises by
//! one while the others are re-minimized.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimize::{nelder_mead, FitConfig, Scaling};
use super::problem::FitProblem;
use crate::error::Result;

const TARGET: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower_error: f64,
    pub upper_error: f64,
    /// The profile stayed below Δχ² = 1 all the way to the lower bound.
    pub lower_limited: bool,
    pub upper_limited: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub value: f64,
    pub delta_chi2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileTrace {
    pub parameter: String,
    pub points: Vec<ProfilePoint>,
}

struct Profiler<'a> {
    problem: &'a FitProblem,
    index: usize,
    others: Vec<usize>,
    chi2_min: f64,
    config: &'a FitConfig,
    trace: Vec<ProfilePoint>,
}

impl Profiler<'_> {
    /// Δχ² with parameter `index` held at `v`, re-minimizing the others from
    /// `warm` (updated to the new optimum).
    fn delta(&mut self, v: f64, warm: &mut Vec<f64>) -> f64 {
        let mut base = warm.clone();
        base[self.index] = v;
        let scaling = Scaling::new(self.problem, base, self.others.clone());
        let run = nelder_mead(
            |x| self.problem.chi_square(&scaling.to_theta(x)),
            &scaling.to_unit(warm),
            self.config.tolerance,
            self.config.max_evaluations,
        );
        *warm = scaling.to_theta(&run.x);
        let d = run.f - self.chi2_min;
        self.trace.push(ProfilePoint { value: v, delta_chi2: d });
        d
    }

    /// Initial step from the curvature of χ² along the parameter alone.
    fn initial_step(&self, best: &[f64]) -> f64 {
        let p = &self.problem.parameters()[self.index];
        let range = p.range();
        let x = best[self.index];
        let h = 1e-3 * range;
        let at = |v: f64| {
            let mut t = best.to_vec();
            t[self.index] = v;
            self.problem.chi_square(&t).unwrap_or(f64::NAN)
        };
        let f0 = self.chi2_min;
        let curvature = if x - h >= p.lower && x + h <= p.upper {
            (at(x + h) + at(x - h) - 2.0 * f0) / (h * h)
        } else {
            let s = if x + 2.0 * h <= p.upper { h } else { -h };
            (at(x + 2.0 * s) - 2.0 * at(x + s) + f0) / (h * h)
        };
        let step = if curvature.is_finite() && curvature > 0.0 { (2.0 / curvature).sqrt() } else { 0.01 * range };
        step.clamp(1e-6 * range, range)
    }

    /// Distance to Δχ² = 1 in direction `sign`, and whether the bound was hit
    /// first.
    fn side(&mut self, best: &[f64], sign: f64) -> (f64, bool) {
        let p = &self.problem.parameters()[self.index];
        let x0 = best[self.index];
        let range = p.range();
        let room = if sign < 0.0 { x0 - p.lower } else { p.upper - x0 };
        if room <= 1e-9 * range {
            return (0.0, true);
        }
        let mut step = self.initial_step(best);
        let mut inside = (0.0, -TARGET, best.to_vec());
        let outside;
        loop {
            let d = step.min(room);
            let mut warm = inside.2.clone();
            let g = self.delta(x0 + sign * d, &mut warm) - TARGET;
            if g >= 0.0 {
                outside = (d, g, warm);
                break;
            }
            inside = (d, g, warm);
            if d >= room {
                return (room, true);
            }
            step *= 2.0;
        }
        // Illinois regula falsi on g(d) = Δχ²(d) − 1
        let (mut a, mut ga, mut wa) = inside;
        let (mut b, mut gb, _) = outside;
        let mut side_kept = 0i8;
        for _ in 0..60 {
            if gb.abs() < 1e-3 || (b - a).abs() < 1e-7 * range {
                break;
            }
            let c = b - gb * (b - a) / (gb - ga);
            let c = if c > a.min(b) && c < a.max(b) { c } else { 0.5 * (a + b) };
            let mut warm = wa.clone();
            let gc = self.delta(x0 + sign * c, &mut warm) - TARGET;
            if gc >= 0.0 {
                b = c;
                gb = gc;
                if side_kept == -1 {
                    ga *= 0.5;
                }
                side_kept = -1;
            } else {
                a = c;
                ga = gc;
                wa = warm;
                if side_kept == 1 {
                    gb *= 0.5;
                }
                side_kept = 1;
            }
        }
        (if gb.abs() < ga.abs() { b } else { a }, false)
    }
}

pub(crate) fn profile_intervals(
    problem: &FitProblem,
    best: &[f64],
    chi2_min: f64,
    config: &FitConfig,
) -> Result<(Vec<Option<Interval>>, Vec<ProfileTrace>)> {
    let free = problem.free_indices();
    let results: Vec<(usize, Interval, ProfileTrace)> = free
        .par_iter()
        .map(|&index| {
            let mut pr = Profiler {
                problem,
                index,
                others: free.iter().copied().filter(|&i| i != index).collect(),
                chi2_min,
                config,
                trace: Vec::new(),
            };
            let (lower_error, lower_limited) = pr.side(best, -1.0);
            let (upper_error, upper_limited) = pr.side(best, 1.0);
            let mut points = pr.trace;
            points.sort_by(|a, b| a.value.total_cmp(&b.value));
            let trace = ProfileTrace { parameter: problem.parameters()[index].name.clone(), points };
            (index, Interval { lower_error, upper_error, lower_limited, upper_limited }, trace)
        })
        .collect();
    let mut intervals = vec![None; problem.parameters().len()];
    let mut traces = Vec::new();
    for (i, iv, tr) in results {
        intervals[i] = Some(iv);
        traces.push(tr);
    }
    Ok((intervals, traces))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::optimize::fit;
    use crate::fit::problem::{ForwardModel, Parameter};
    use std::collections::HashMap;
    use std::sync::Arc;

    struct Constant;

    impl ForwardModel for Constant {
        fn inputs(&self) -> Vec<&'static str> {
            vec!["mu"]
        }
        fn evaluate(&self, p: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![p[0]])
        }
    }

    #[test]
    fn gaussian_interval_is_sigma() {
        let mut pr = FitProblem::new(vec![Parameter::free("mu", 0.0, -10.0, 10.0)]).unwrap();
        pr.add_dataset("d", vec![1.5], vec![0.4], Arc::new(Constant), &HashMap::new()).unwrap();
        let r = fit(&pr, &FitConfig::default()).unwrap();
        let iv = r.parameters[0].interval.unwrap();
        assert!((iv.lower_error - 0.4).abs() < 0.02 * 0.4);
        assert!((iv.upper_error - 0.4).abs() < 0.02 * 0.4);
        assert!(!iv.lower_limited && !iv.upper_limited);
        assert!(!r.profiles[0].points.is_empty());
    }

    #[test]
    fn zero_boundary_is_one_sided() {
        // data prefer a negative value; the bound holds it at 0
        let mut pr = FitProblem::new(vec![Parameter::free("mu", 0.5, 0.0, 10.0)]).unwrap();
        pr.add_dataset("d", vec![-0.1], vec![0.4], Arc::new(Constant), &HashMap::new()).unwrap();
        let r = fit(&pr, &FitConfig::default()).unwrap();
        let iv = r.parameters[0].interval.unwrap();
        assert_eq!(r.parameters[0].value, 0.0);
        assert_eq!(iv.lower_error, 0.0);
        assert!(iv.lower_limited);
        // Δχ² = ((x + 0.1)² − 0.01)/0.16 = 1 → x = √0.17 − 0.1
        assert!((iv.upper_error - (0.17f64.sqrt() - 0.1)).abs() < 0.01);
    }

    #[test]
    fn flat_direction_reports_bound() {
        let mut pr = FitProblem::new(vec![Parameter::free("mu", 0.0, -1.0, 1.0)]).unwrap();
        pr.add_dataset("d", vec![0.0], vec![100.0], Arc::new(Constant), &HashMap::new()).unwrap();
        let r = fit(&pr, &FitConfig::default()).unwrap();
        let iv = r.parameters[0].interval.unwrap();
        assert!(iv.lower_limited && iv.upper_limited);
        assert!((iv.lower_error - 1.0).abs() < 1e-5 && (iv.upper_error - 1.0).abs() < 1e-5);
    }
}
