//! Bounded multi-start Nelder–Mead minimization of a [`FitProblem`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::problem::FitProblem;
use super::profile::{profile_intervals, Interval, ProfileTrace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Number of simplex runs: the first starts at the initial values, the
    /// rest at Latin-hypercube points.
    pub restarts: usize,
    pub seed: u64,
    /// Simplex diameter, in units of each parameter's bound range, at which a
    /// run is considered converged.
    pub tolerance: f64,
    /// Evaluation budget per run.
    pub max_evaluations: usize,
    /// Whether to compute profile-likelihood intervals.
    pub profile: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { restarts: 8, seed: 0, tolerance: 1e-6, max_evaluations: 100_000, profile: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartRecord {
    pub index: usize,
    pub start: Vec<f64>,
    pub theta: Vec<f64>,
    pub chi2: f64,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEstimate {
    pub name: String,
    pub value: f64,
    pub fixed: bool,
    /// Profile-likelihood 1σ interval, when computed.
    pub interval: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub parameters: Vec<ParameterEstimate>,
    pub chi2_min: f64,
    pub dof: usize,
    pub converged: bool,
    pub evaluations: usize,
    pub restarts: Vec<RestartRecord>,
    pub profiles: Vec<ProfileTrace>,
    pub config: FitConfig,
}

impl FitResult {
    pub fn theta(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }

    pub fn get(&self, name: &str) -> Option<&ParameterEstimate> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.get(name).map(|p| p.value)
    }

    pub fn reduced_chi2(&self) -> f64 {
        self.chi2_min / self.dof.max(1) as f64
    }
}

/// Outcome of one simplex run, in unit-cube coordinates.
#[derive(Debug, Clone)]
pub(crate) struct SimplexRun {
    pub x: Vec<f64>,
    pub f: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead on [0, 1]^n with trial points projected onto the cube.
/// Errors from the objective count as +∞.
pub(crate) fn nelder_mead<F: Fn(&[f64]) -> Result<f64>>(
    f: F,
    x0: &[f64],
    tolerance: f64,
    max_evaluations: usize,
) -> SimplexRun {
    let n = x0.len();
    let evaluations = std::cell::Cell::new(0usize);
    let eval = |x: &[f64]| {
        evaluations.set(evaluations.get() + 1);
        f(x).ok().filter(|v| v.is_finite()).unwrap_or(f64::INFINITY)
    };
    if n == 0 {
        let v = eval(x0);
        return SimplexRun { x: vec![], f: v, evaluations: evaluations.get(), converged: true };
    }
    let project = |x: &mut Vec<f64>| x.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if x0[i] + 0.1 <= 1.0 { 0.1 } else { -0.1 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| eval(x)).collect();
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let diameter = simplex[1..]
            .iter()
            .map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter < tolerance {
            return SimplexRun { x: simplex[0].clone(), f: values[0], evaluations: evaluations.get(), converged: true };
        }
        if evaluations.get() >= max_evaluations {
            return SimplexRun { x: simplex[0].clone(), f: values[0], evaluations: evaluations.get(), converged: false };
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        let towards = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid.iter().zip(&simplex[n]).map(|(c, w)| c + t * (c - w)).collect();
            project(&mut p);
            p
        };
        let xr = towards(1.0);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = towards(2.0);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let xc = towards(if fr < values[n] { 0.5 } else { -0.5 });
        let fc = eval(&xc);
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        let best = simplex[0].clone();
        for i in 1..=n {
            simplex[i] = simplex[i].iter().zip(&best).map(|(x, b)| b + 0.5 * (x - b)).collect();
            values[i] = eval(&simplex[i]);
        }
    }
}

/// Maps free parameters between θ and the unit cube.
#[derive(Debug, Clone)]
pub(crate) struct Scaling {
    pub free: Vec<usize>,
    pub lower: Vec<f64>,
    pub range: Vec<f64>,
    pub base: Vec<f64>,
}

impl Scaling {
    pub fn new(problem: &FitProblem, base: Vec<f64>, free: Vec<usize>) -> Self {
        let ps = problem.parameters();
        Self {
            lower: free.iter().map(|&i| ps[i].lower).collect(),
            range: free.iter().map(|&i| ps[i].range()).collect(),
            free,
            base,
        }
    }

    pub fn to_theta(&self, x: &[f64]) -> Vec<f64> {
        let mut t = self.base.clone();
        for (k, &i) in self.free.iter().enumerate() {
            t[i] = self.lower[k] + x[k].clamp(0.0, 1.0) * self.range[k];
        }
        t
    }

    pub fn to_unit(&self, theta: &[f64]) -> Vec<f64> {
        self.free.iter().enumerate().map(|(k, &i)| ((theta[i] - self.lower[k]) / self.range[k]).clamp(0.0, 1.0)).collect()
    }
}

fn latin_hypercube(n_points: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; n_points];
    for d in 0..dim {
        let mut strata: Vec<usize> = (0..n_points).collect();
        strata.shuffle(rng);
        for (p, s) in pts.iter_mut().zip(strata) {
            p[d] = (s as f64 + rng.random::<f64>()) / n_points as f64;
        }
    }
    pts
}

/// Best terminal point over all restarts; ties broken by restart index.
pub fn minimize(problem: &FitProblem, config: &FitConfig) -> Result<FitResult> {
    problem.validate()?;
    let free = problem.free_indices();
    let scaling = Scaling::new(problem, problem.initial_theta(), free.clone());
    let restarts = config.restarts.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut starts = vec![scaling.to_unit(&problem.initial_theta())];
    starts.extend(latin_hypercube(restarts - 1, free.len(), &mut rng));

    let runs: Vec<RestartRecord> = starts
        .par_iter()
        .enumerate()
        .map(|(index, x0)| {
            let run = nelder_mead(|x| problem.chi_square(&scaling.to_theta(x)), x0, config.tolerance, config.max_evaluations);
            RestartRecord {
                index,
                start: scaling.to_theta(x0),
                theta: scaling.to_theta(&run.x),
                chi2: run.f,
                evaluations: run.evaluations,
                converged: run.converged,
            }
        })
        .collect();

    let best = runs
        .iter()
        .filter(|r| r.chi2.is_finite())
        .min_by(|a, b| a.chi2.total_cmp(&b.chi2).then(a.index.cmp(&b.index)))
        .cloned();
    let Some(best) = best else {
        // surface the model's own error
        problem.chi_square(&problem.initial_theta())?;
        return Err(Error::NonConvergence { restarts, best_chi2: f64::INFINITY, best_theta: problem.initial_theta() });
    };
    if !runs.iter().any(|r| r.converged) {
        return Err(Error::NonConvergence { restarts, best_chi2: best.chi2, best_theta: best.theta });
    }
    let parameters = problem
        .parameters()
        .iter()
        .zip(&best.theta)
        .map(|(p, v)| ParameterEstimate { name: p.name.clone(), value: *v, fixed: !p.is_free(), interval: None })
        .collect();
    Ok(FitResult {
        parameters,
        chi2_min: best.chi2,
        dof: problem.degrees_of_freedom(),
        converged: best.converged,
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        restarts: runs,
        profiles: Vec::new(),
        config: config.clone(),
    })
}

/// Attaches profile-likelihood intervals to a minimization result.
pub fn uncertainty_1sigma(problem: &FitProblem, result: &mut FitResult) -> Result<()> {
    let (intervals, traces) = profile_intervals(problem, &result.theta(), result.chi2_min, &result.config)?;
    for (p, iv) in result.parameters.iter_mut().zip(intervals) {
        p.interval = iv;
    }
    result.profiles = traces;
    Ok(())
}

/// [`minimize`] followed by [`uncertainty_1sigma`] when `config.profile`.
pub fn fit(problem: &FitProblem, config: &FitConfig) -> Result<FitResult> {
    let mut r = minimize(problem, config)?;
    if config.profile {
        uncertainty_1sigma(problem, &mut r)?;
    }
    Ok(r)
}
