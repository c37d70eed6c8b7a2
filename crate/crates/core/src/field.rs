use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::check_grid;

/// A density sampled at the centres of `M` equal cells of a circle.
///
/// Cell `i` covers `[i h, (i + 1) h)` and its value is attached to the
/// midpoint `(i + 1/2) h`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field {
    values: Vec<f64>,
    length: f64,
}

impl Field {
    /// Builds a field, rejecting negative or non-finite values.
    pub fn new(values: Vec<f64>, length: f64) -> Result<Self> {
        check_grid(length, values.len())?;
        if let Some((cell, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::NegativeInput {
                value,
                time_index: 0,
                cell,
            });
        }
        Ok(Self { values, length })
    }

    /// Solver output; may carry round-off negatives above the stability floor.
    pub(crate) fn from_raw(values: Vec<f64>, length: f64) -> Self {
        Self { values, length }
    }

    pub fn constant(value: f64, length: f64, sites: usize) -> Result<Self> {
        Self::new(vec![value; sites], length)
    }

    pub fn from_fn(length: f64, sites: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = length / sites as f64;
        Self::new((0..sites).map(|i| f((i as f64 + 0.5) * h)).collect(), length)
    }

    /// `mean + amplitude * sin(2 pi mode x / L)`.
    pub fn sinusoid(mean: f64, amplitude: f64, mode: u32, length: f64, sites: usize) -> Result<Self> {
        let k = 2.0 * std::f64::consts::PI * mode as f64 / length;
        Self::from_fn(length, sites, |x| mean + amplitude * (k * x).sin())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn sites(&self) -> usize {
        self.values.len()
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.values.len() as f64
    }

    pub fn cell_center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.spacing()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `h * sum(values)`.
    pub fn integral(&self) -> f64 {
        self.spacing() * self.values.iter().sum::<f64>()
    }

    pub(crate) fn check_same_grid(&self, sites: usize, length: f64) -> Result<()> {
        if self.sites() != sites || (self.length - length).abs() > 1e-12 * length {
            return Err(Error::GridMismatch {
                expected: sites,
                expected_length: length,
                found: self.sites(),
                found_length: self.length,
            });
        }
        Ok(())
    }
}
