//! Sampled functions of frequency and delay, and their CSV representation.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const UNIFORM_TOL: f64 = 1e-9;

/// Uniform grid of frequency offsets from the reference, in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    start_hz: f64,
    step_hz: f64,
    len: usize,
}

impl FrequencyGrid {
    pub fn new(start_hz: f64, step_hz: f64, len: usize) -> Result<Self> {
        if len < 2 {
            return Err(invalid(format!("grid needs at least 2 points, got {len}")));
        }
        if !(start_hz.is_finite() && step_hz.is_finite() && step_hz > 0.0) {
            return Err(invalid(format!("bad grid start {start_hz} / step {step_hz}")));
        }
        Ok(Self { start_hz, step_hz, len })
    }

    /// `[center - span, center + span]` in steps of `step_hz`; the span is
    /// rounded to a whole number of steps.
    pub fn centered(center_hz: f64, half_span_hz: f64, step_hz: f64) -> Result<Self> {
        if !(half_span_hz > 0.0 && step_hz > 0.0) {
            return Err(invalid("span and step must be positive"));
        }
        let half = (half_span_hz / step_hz).round() as usize;
        Self::new(center_hz - half as f64 * step_hz, step_hz, 2 * half + 1)
    }

    /// Rebuilds a grid from explicit abscissae, which must be uniform.
    pub fn from_points(points: &[f64]) -> Result<Self> {
        let n = points.len();
        if n < 2 {
            return Err(invalid(format!("grid needs at least 2 points, got {n}")));
        }
        let step = (points[n - 1] - points[0]) / (n - 1) as f64;
        let grid = Self::new(points[0], step, n)?;
        for (i, &x) in points.iter().enumerate() {
            let expected = grid.at(i);
            if (x - expected).abs() > UNIFORM_TOL * step + 4.0 * f64::EPSILON * x.abs() {
                return Err(invalid(format!("abscissa {i} ({x}) breaks uniform spacing")));
            }
        }
        Ok(grid)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn start(&self) -> f64 {
        self.start_hz
    }

    pub fn step(&self) -> f64 {
        self.step_hz
    }

    pub fn end(&self) -> f64 {
        self.at(self.len - 1)
    }

    pub fn at(&self, i: usize) -> f64 {
        self.start_hz + i as f64 * self.step_hz
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.at(i)).collect()
    }
}

/// Values on a [`FrequencyGrid`], with optional per-point standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub grid: FrequencyGrid,
    pub values: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl Spectrum {
    pub fn new(grid: FrequencyGrid, values: Vec<f64>) -> Result<Self> {
        check_values(grid.len(), &values, "spectrum")?;
        Ok(Self { grid, values, sigma: None })
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Result<Self> {
        check_sigma(self.values.len(), &sigma)?;
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn offsets(&self) -> Vec<f64> {
        self.grid.points()
    }

    /// Trapezoidal ∫ value d(offset_hz).
    pub fn integral(&self) -> f64 {
        trapezoid(&self.values, self.grid.step())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_columns(w, "offset_hz", &self.offsets(), &self.values, self.sigma.as_deref())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (x, v, s) = read_columns(r, "offset_hz")?;
        let spec = Self::new(FrequencyGrid::from_points(&x)?, v)?;
        match s {
            Some(s) => spec.with_sigma(s),
            None => Ok(spec),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Values on uniform delay bins. `start_s` is the centre of the first bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub start_s: f64,
    pub bin_width_s: f64,
    pub values: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

impl Histogram {
    pub fn new(start_s: f64, bin_width_s: f64, values: Vec<f64>) -> Result<Self> {
        if !(bin_width_s > 0.0 && bin_width_s.is_finite()) {
            return Err(invalid(format!("bin width must be positive, got {bin_width_s}")));
        }
        if !start_s.is_finite() {
            return Err(invalid("histogram start must be finite"));
        }
        if values.is_empty() {
            return Err(Error::EmptyData("histogram has no bins".into()));
        }
        check_values(values.len(), &values, "histogram")?;
        Ok(Self { start_s, bin_width_s, values, sigma: None })
    }

    /// Bins centred on `start_s + k·width` covering `[start_s, end_s]`.
    pub fn zeros(start_s: f64, end_s: f64, bin_width_s: f64) -> Result<Self> {
        let n = ((end_s - start_s) / bin_width_s).round() as usize + 1;
        Self::new(start_s, bin_width_s, vec![0.0; n])
    }

    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Result<Self> {
        check_sigma(self.values.len(), &sigma)?;
        self.sigma = Some(sigma);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn centre(&self, i: usize) -> f64 {
        self.start_s + i as f64 * self.bin_width_s
    }

    pub fn centres(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.centre(i)).collect()
    }

    pub fn end(&self) -> f64 {
        self.centre(self.len() - 1)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_columns(w, "delay_s", &self.centres(), &self.values, self.sigma.as_deref())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let (x, v, s) = read_columns(r, "delay_s")?;
        let width = if x.len() >= 2 {
            let g = FrequencyGrid::from_points(&x)?;
            g.step()
        } else {
            return Err(Error::EmptyData("histogram CSV needs at least 2 rows".into()));
        };
        let h = Self::new(x[0], width, v)?;
        match s {
            Some(s) => h.with_sigma(s),
            None => Ok(h),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

pub(crate) fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, .., last] => step * (values.iter().sum::<f64>() - 0.5 * (first + last)),
    }
}

fn check_values(n: usize, values: &[f64], what: &str) -> Result<()> {
    if values.len() != n {
        return Err(invalid(format!("{what}: {} values for {n} abscissae", values.len())));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(invalid(format!("{what}: value {i} is not finite")));
    }
    Ok(())
}

fn check_sigma(n: usize, sigma: &[f64]) -> Result<()> {
    if sigma.len() != n {
        return Err(invalid(format!("{} sigmas for {n} values", sigma.len())));
    }
    if let Some(i) = sigma.iter().position(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(invalid(format!("sigma {i} is negative or not finite")));
    }
    Ok(())
}

fn write_columns<W: Write>(w: W, xname: &str, x: &[f64], v: &[f64], s: Option<&[f64]>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    match s {
        Some(s) => {
            out.write_record([xname, "value", "sigma"])?;
            for ((x, v), s) in x.iter().zip(v).zip(s) {
                out.write_record([x.to_string(), v.to_string(), s.to_string()])?;
            }
        }
        None => {
            out.write_record([xname, "value"])?;
            for (x, v) in x.iter().zip(v) {
                out.write_record([x.to_string(), v.to_string()])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

type Columns = (Vec<f64>, Vec<f64>, Option<Vec<f64>>);

fn read_columns<R: Read>(r: R, xname: &str) -> Result<Columns> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let headers = rdr.headers()?.clone();
    let names: Vec<&str> = headers.iter().collect();
    let has_sigma = match names.as_slice() {
        [x, "value"] if *x == xname => false,
        [x, "value", "sigma"] if *x == xname => true,
        _ => {
            return Err(invalid(format!(
                "expected header `{xname},value[,sigma]`, found `{}`",
                names.join(",")
            )))
        }
    };
    let (mut x, mut v, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| invalid(format!("row {row}: missing column {i}")))?
                .parse::<f64>()
                .map_err(|e| invalid(format!("row {row}, column {i}: {e}")))
        };
        x.push(parse(0)?);
        v.push(parse(1)?);
        if has_sigma {
            s.push(parse(2)?);
        }
    }
    Ok((x, v, has_sigma.then_some(s)))
}
