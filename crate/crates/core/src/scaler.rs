//! Column scalers for model inputs and outputs.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScalerKind {
    /// Mean / population standard deviation.
    Std,
    /// Median / median absolute deviation.
    Median,
    /// Median/MAD centering followed by asinh.
    Arcsinh,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub kind: ScalerKind,
    pub location: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ScalerParams {
    /// Fits per-column parameters on row-major `values` with `n_cols` columns.
    pub fn fit(kind: ScalerKind, values: &[f64], n_cols: usize) -> Result<Self> {
        if n_cols == 0 || !values.len().is_multiple_of(n_cols) {
            return Err(Error::DimensionMismatch { expected: n_cols, got: values.len() });
        }
        let n_rows = values.len() / n_cols;
        if n_rows < 2 {
            return Err(Error::TooFewRows { needed: 2, got: n_rows });
        }
        let mut location = Vec::with_capacity(n_cols);
        let mut scale = Vec::with_capacity(n_cols);
        let mut column = Vec::with_capacity(n_rows);
        for c in 0..n_cols {
            column.clear();
            column.extend(values.iter().skip(c).step_by(n_cols).copied());
            let (loc, spread) = match kind {
                ScalerKind::Std => (math::mean(&column), math::population_std(&column)),
                ScalerKind::Median | ScalerKind::Arcsinh => {
                    let med = math::median(&column);
                    let deviations: Vec<f64> = column.iter().map(|x| (x - med).abs()).collect();
                    (med, math::median(&deviations))
                }
            };
            location.push(loc);
            scale.push(if spread > 0.0 && spread.is_finite() { spread } else { 1.0 });
        }
        Ok(ScalerParams { kind, location, scale })
    }

    /// Identity scaler of the given kind (location 0, scale 1).
    pub fn identity(kind: ScalerKind, n_cols: usize) -> Self {
        ScalerParams { kind, location: alloc::vec![0.0; n_cols], scale: alloc::vec![1.0; n_cols] }
    }

    pub fn n_cols(&self) -> usize {
        self.location.len()
    }

    #[inline]
    pub fn transform_one(&self, col: usize, x: f64) -> f64 {
        let u = (x - self.location[col]) / self.scale[col];
        match self.kind {
            ScalerKind::Std | ScalerKind::Median => u,
            ScalerKind::Arcsinh => libm::asinh(u),
        }
    }

    #[inline]
    pub fn inverse_one(&self, col: usize, y: f64) -> f64 {
        let u = match self.kind {
            ScalerKind::Std | ScalerKind::Median => y,
            ScalerKind::Arcsinh => libm::sinh(y),
        };
        self.location[col] + self.scale[col] * u
    }

    /// d inverse_one / dy at `y`.
    #[inline]
    pub fn inverse_derivative(&self, col: usize, y: f64) -> f64 {
        match self.kind {
            ScalerKind::Std | ScalerKind::Median => self.scale[col],
            ScalerKind::Arcsinh => self.scale[col] * libm::cosh(y),
        }
    }

    fn check(&self, len: usize) -> Result<()> {
        if self.n_cols() == 0 || !len.is_multiple_of(self.n_cols()) {
            return Err(Error::DimensionMismatch { expected: self.n_cols(), got: len });
        }
        Ok(())
    }

    /// Transforms row-major values in place.
    pub fn transform_in_place(&self, values: &mut [f64]) -> Result<()> {
        self.check(values.len())?;
        let n = self.n_cols();
        for (k, v) in values.iter_mut().enumerate() {
            *v = self.transform_one(k % n, *v);
        }
        Ok(())
    }

    pub fn inverse_in_place(&self, values: &mut [f64]) -> Result<()> {
        self.check(values.len())?;
        let n = self.n_cols();
        for (k, v) in values.iter_mut().enumerate() {
            *v = self.inverse_one(k % n, *v);
        }
        Ok(())
    }

    pub fn transform(&self, values: &[f64]) -> Result<Vec<f64>> {
        let mut out = values.to_vec();
        self.transform_in_place(&mut out)?;
        Ok(out)
    }

    pub fn inverse_transform(&self, values: &[f64]) -> Result<Vec<f64>> {
        let mut out = values.to_vec();
        self.inverse_in_place(&mut out)?;
        Ok(out)
    }
}
