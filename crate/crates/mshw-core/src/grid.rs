//! Deterministic `(K+1)`-dimensional paths on a uniform time grid.
//!
//! The first coordinate carries the scalar `x`/`u` component and the remaining
//! `K` coordinates the `z`/`v` component. Grid paths are the common currency
//! between the simulator, the integral-map solver and the limit samplers.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum GridError {
    /// `dt` or the horizon is not strictly positive (or not finite).
    BadGrid,
    /// Path values contain NaN or infinity, or the length is inconsistent.
    BadValues,
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GridError::BadGrid => write!(f, "grid step and horizon must be positive and finite"),
            GridError::BadValues => write!(f, "path values must be finite and fill the grid"),
        }
    }
}

impl core::error::Error for GridError {}

/// Number of grid points for step `dt` on `[0, horizon]`: `floor(T/dt) + 1`,
/// with a relative guard so that `horizon = m*dt` lands on `m + 1` points.
pub fn points_for(dt: f64, horizon: f64) -> usize {
    ((horizon / dt) * (1.0 + 1e-12)) as usize + 1
}

/// A path of `(K+1)`-vectors sampled at `0, dt, 2dt, …`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    dt: f64,
    zdim: usize,
    values: Vec<f64>, // row-major, width zdim + 1
}

impl GridPath {
    pub fn zeros(zdim: usize, dt: f64, horizon: f64) -> Result<Self, GridError> {
        if !(dt > 0.0) || !(horizon > 0.0) || !dt.is_finite() || !horizon.is_finite() {
            return Err(GridError::BadGrid);
        }
        let npts = points_for(dt, horizon);
        Ok(GridPath { dt, zdim, values: vec![0.0; npts * (zdim + 1)] })
    }

    /// Wraps existing row-major values of width `zdim + 1`.
    pub fn from_values(zdim: usize, dt: f64, values: Vec<f64>) -> Result<Self, GridError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(GridError::BadGrid);
        }
        let width = zdim + 1;
        if values.is_empty() || values.len() % width != 0 || values.iter().any(|v| !v.is_finite())
        {
            return Err(GridError::BadValues);
        }
        Ok(GridPath { dt, zdim, values })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn zdim(&self) -> usize {
        self.zdim
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.zdim + 1
    }

    #[inline]
    pub fn num_points(&self) -> usize {
        self.values.len() / self.width()
    }

    pub fn horizon(&self) -> f64 {
        (self.num_points() - 1) as f64 * self.dt
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    /// Index of the grid point closest to `t` from below.
    pub fn index_at(&self, t: f64) -> usize {
        (((t / self.dt) * (1.0 + 1e-12)) as usize).min(self.num_points() - 1)
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    #[inline]
    pub fn point_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.width();
        &mut self.values[i * w..(i + 1) * w]
    }

    /// Scalar (first) coordinate at grid index `i`.
    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.values[i * self.width()]
    }

    /// Vector (remaining) coordinates at grid index `i`.
    #[inline]
    pub fn z(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w + 1..(i + 1) * w]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&self, a: f64) -> GridPath {
        GridPath {
            dt: self.dt,
            zdim: self.zdim,
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Supremum distance over all grid points and coordinates.
    pub fn sup_distance(&self, other: &GridPath) -> f64 {
        assert_eq!(self.values.len(), other.values.len(), "grid shape mismatch");
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Supremum distance against a path on a `factor`-times finer grid,
    /// compared at the shared (coarse) points.
    pub fn sup_distance_to_refined(&self, fine: &GridPath, factor: usize) -> f64 {
        assert_eq!(self.zdim, fine.zdim);
        let mut worst = 0.0f64;
        for i in 0..self.num_points() {
            let fi = i * factor;
            if fi >= fine.num_points() {
                break;
            }
            for (a, b) in self.point(i).iter().zip(fine.point(fi)) {
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }
}
