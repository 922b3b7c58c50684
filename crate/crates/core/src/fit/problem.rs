//! Parameter tables, dataset bindings and the χ² objective.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A model evaluated at the points of one dataset from its named inputs.
pub trait ForwardModel: Send + Sync {
    fn inputs(&self) -> Vec<&'static str>;
    fn evaluate(&self, inputs: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterMode {
    /// Free, may feed several datasets.
    Shared,
    /// Free, feeds exactly one dataset.
    Local,
    /// Held at its initial value.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Parameter {
    pub name: String,
    pub init: f64,
    pub lower: f64,
    pub upper: f64,
    pub mode: ParameterMode,
}

impl Parameter {
    pub fn free(name: &str, init: f64, lower: f64, upper: f64) -> Self {
        Self { name: name.into(), init, lower, upper, mode: ParameterMode::Shared }
    }

    pub fn fixed(name: &str, value: f64) -> Self {
        Self { name: name.into(), init: value, lower: value, upper: value, mode: ParameterMode::Fixed }
    }

    pub fn is_free(&self) -> bool {
        self.mode != ParameterMode::Fixed
    }

    pub fn range(&self) -> f64 {
        self.upper - self.lower
    }
}

pub struct Dataset {
    pub name: String,
    pub values: Vec<f64>,
    pub sigma: Vec<f64>,
    pub model: Arc<dyn ForwardModel>,
    /// Parameter index feeding each model input.
    pub binding: Vec<usize>,
}

impl std::fmt::Debug for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dataset")
            .field("name", &self.name)
            .field("points", &self.values.len())
            .field("inputs", &self.model.inputs())
            .field("binding", &self.binding)
            .finish()
    }
}

#[derive(Debug)]
pub struct FitProblem {
    parameters: Vec<Parameter>,
    datasets: Vec<Dataset>,
}

impl FitProblem {
    pub fn new(parameters: Vec<Parameter>) -> Result<Self> {
        let mut seen = HashSet::new();
        for p in &parameters {
            if !seen.insert(p.name.as_str()) {
                return Err(invalid(format!("duplicate parameter `{}`", p.name)));
            }
            if !(p.lower.is_finite() && p.upper.is_finite() && p.init.is_finite()) {
                return Err(invalid(format!("parameter `{}` needs finite init and bounds", p.name)));
            }
            if p.is_free() && !(p.lower < p.upper) {
                return Err(invalid(format!("parameter `{}` has empty bounds [{}, {}]", p.name, p.lower, p.upper)));
            }
            if p.is_free() && !(p.init >= p.lower && p.init <= p.upper) {
                return Err(invalid(format!("parameter `{}` starts at {} outside [{}, {}]", p.name, p.init, p.lower, p.upper)));
            }
        }
        Ok(Self { parameters, datasets: Vec::new() })
    }

    /// Adds a dataset whose model inputs are bound to parameters of the same
    /// name unless renamed in `rename` (input → parameter).
    pub fn add_dataset(
        &mut self,
        name: &str,
        values: Vec<f64>,
        sigma: Vec<f64>,
        model: Arc<dyn ForwardModel>,
        rename: &HashMap<String, String>,
    ) -> Result<()> {
        if values.is_empty() {
            return Err(Error::EmptyData(format!("dataset `{name}` has no points")));
        }
        if sigma.len() != values.len() {
            return Err(invalid(format!("dataset `{name}`: {} values but {} σ", values.len(), sigma.len())));
        }
        if let Some(k) = sigma.iter().position(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid(format!("dataset `{name}`: σ must be positive (point {k})")));
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("dataset `{name}`: non-finite value at point {k}")));
        }
        if self.datasets.iter().any(|d| d.name == name) {
            return Err(invalid(format!("duplicate dataset `{name}`")));
        }
        let binding = model
            .inputs()
            .iter()
            .map(|input| {
                let target = rename.get(*input).map_or(*input, String::as_str);
                self.parameters
                    .iter()
                    .position(|p| p.name == target)
                    .ok_or_else(|| invalid(format!("dataset `{name}`: model input `{input}` is not bound to a parameter")))
            })
            .collect::<Result<Vec<_>>>()?;
        for key in rename.keys() {
            if !model.inputs().contains(&key.as_str()) {
                return Err(invalid(format!("dataset `{name}`: model has no input `{key}`")));
            }
        }
        self.datasets.push(Dataset { name: name.into(), values, sigma, model, binding });
        Ok(())
    }

    /// Checks that every free parameter is used and local ones by exactly one
    /// dataset.
    pub fn validate(&self) -> Result<()> {
        if self.datasets.is_empty() {
            return Err(Error::EmptyData("fit problem has no datasets".into()));
        }
        for (i, p) in self.parameters.iter().enumerate() {
            let users = self.datasets.iter().filter(|d| d.binding.contains(&i)).count();
            match p.mode {
                ParameterMode::Local if users != 1 => {
                    return Err(invalid(format!("local parameter `{}` is used by {users} datasets", p.name)))
                }
                ParameterMode::Shared | ParameterMode::Local if users == 0 => {
                    return Err(invalid(format!("free parameter `{}` is not used by any dataset", p.name)))
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn datasets(&self) -> &[Dataset] {
        &self.datasets
    }

    pub fn initial_theta(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.init).collect()
    }

    pub fn free_indices(&self) -> Vec<usize> {
        (0..self.parameters.len()).filter(|&i| self.parameters[i].is_free()).collect()
    }

    pub fn n_points(&self) -> usize {
        self.datasets.iter().map(|d| d.values.len()).sum()
    }

    pub fn degrees_of_freedom(&self) -> usize {
        self.n_points().saturating_sub(self.free_indices().len())
    }

    /// Model values of dataset `k` at θ.
    pub fn model_values(&self, k: usize, theta: &[f64]) -> Result<Vec<f64>> {
        let d = &self.datasets[k];
        let inputs: Vec<f64> = d.binding.iter().map(|&i| theta[i]).collect();
        let m = d.model.evaluate(&inputs).map_err(|e| Error::Model { dataset: d.name.clone(), index: 0, message: e.to_string() })?;
        if m.len() != d.values.len() {
            return Err(Error::Model {
                dataset: d.name.clone(),
                index: m.len().min(d.values.len()),
                message: format!("model returned {} points for {} data", m.len(), d.values.len()),
            });
        }
        if let Some(k) = m.iter().position(|v| !v.is_finite()) {
            return Err(Error::Model { dataset: d.name.clone(), index: k, message: "non-finite model value".into() });
        }
        Ok(m)
    }

    /// χ² of one dataset.
    pub fn dataset_chi_square(&self, k: usize, theta: &[f64]) -> Result<f64> {
        let d = &self.datasets[k];
        let m = self.model_values(k, theta)?;
        Ok(d.values.iter().zip(&m).zip(&d.sigma).map(|((y, f), s)| ((y - f) / s).powi(2)).sum())
    }

    /// Σ over datasets and points of ((data − model)/σ)².
    pub fn chi_square(&self, theta: &[f64]) -> Result<f64> {
        if theta.len() != self.parameters.len() {
            return Err(invalid(format!("θ has {} entries for {} parameters", theta.len(), self.parameters.len())));
        }
        for (p, v) in self.parameters.iter().zip(theta) {
            let slack = 1e-12 * p.range().max(p.lower.abs().max(p.upper.abs()));
            if p.is_free() && !(*v >= p.lower - slack && *v <= p.upper + slack) {
                return Err(invalid(format!("parameter `{}` = {v} outside [{}, {}]", p.name, p.lower, p.upper)));
            }
        }
        (0..self.datasets.len()).map(|k| self.dataset_chi_square(k, theta)).sum()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// y = a + b·x on fixed abscissae.
    pub struct Line(pub Vec<f64>);

    impl ForwardModel for Line {
        fn inputs(&self) -> Vec<&'static str> {
            vec!["a", "b"]
        }
        fn evaluate(&self, p: &[f64]) -> Result<Vec<f64>> {
            Ok(self.0.iter().map(|x| p[0] + p[1] * x).collect())
        }
    }

    fn problem() -> FitProblem {
        FitProblem::new(vec![Parameter::free("a", 0.0, -5.0, 5.0), Parameter::free("b", 1.0, -5.0, 5.0)]).unwrap()
    }

    #[test]
    fn chi_square_basics() {
        let mut pr = problem();
        pr.add_dataset("d", vec![1.0, 2.0, 3.0], vec![1.0; 3], Arc::new(Line(vec![0.0, 1.0, 2.0])), &HashMap::new())
            .unwrap();
        assert_eq!(pr.chi_square(&[1.0, 1.0]).unwrap(), 0.0);
        // residual 2σ at one point
        let mut single = problem();
        single.add_dataset("s", vec![3.0], vec![0.5], Arc::new(Line(vec![0.0])), &HashMap::new()).unwrap();
        assert!((single.chi_square(&[2.0, 0.0]).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn joint_is_sum() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y1 = vec![0.3, 1.1, 2.5, 2.9];
        let y2 = vec![1.0, 0.0, 4.0, 2.0];
        let theta = [0.2, 0.9];
        let single = |y: &Vec<f64>| {
            let mut p = problem();
            p.add_dataset("d", y.clone(), vec![0.7; 4], Arc::new(Line(x.clone())), &HashMap::new()).unwrap();
            p.chi_square(&theta).unwrap()
        };
        let mut joint = problem();
        joint.add_dataset("one", y1.clone(), vec![0.7; 4], Arc::new(Line(x.clone())), &HashMap::new()).unwrap();
        joint.add_dataset("two", y2.clone(), vec![0.7; 4], Arc::new(Line(x.clone())), &HashMap::new()).unwrap();
        assert!((joint.chi_square(&theta).unwrap() - single(&y1) - single(&y2)).abs() < 1e-12);
    }

    #[test]
    fn binding_must_be_total() {
        let mut pr = FitProblem::new(vec![Parameter::free("a", 0.0, -1.0, 1.0)]).unwrap();
        let err = pr.add_dataset("d", vec![1.0], vec![1.0], Arc::new(Line(vec![0.0])), &HashMap::new());
        assert!(err.is_err());
        let rename = HashMap::from([("b".to_string(), "a".to_string())]);
        pr.add_dataset("d", vec![1.0], vec![1.0], Arc::new(Line(vec![0.0])), &rename).unwrap();
        pr.validate().unwrap();
    }

    #[test]
    fn errors_carry_dataset_and_point() {
        struct Bad;
        impl ForwardModel for Bad {
            fn inputs(&self) -> Vec<&'static str> {
                vec!["a"]
            }
            fn evaluate(&self, _: &[f64]) -> Result<Vec<f64>> {
                Ok(vec![1.0, f64::NAN])
            }
        }
        let mut pr = FitProblem::new(vec![Parameter::free("a", 0.0, -1.0, 1.0)]).unwrap();
        pr.add_dataset("bad", vec![1.0, 1.0], vec![1.0; 2], Arc::new(Bad), &HashMap::new()).unwrap();
        match pr.chi_square(&[0.0]) {
            Err(Error::Model { dataset, index, .. }) => assert_eq!((dataset.as_str(), index), ("bad", 1)),
            other => panic!("{other:?}"),
        }
        assert!(pr.chi_square(&[2.0]).is_err());
    }

    #[test]
    fn sigma_must_be_positive() {
        let mut pr = problem();
        assert!(pr.add_dataset("d", vec![1.0], vec![0.0], Arc::new(Line(vec![0.0])), &HashMap::new()).is_err());
    }
}
