//! Vector-valued paths sampled on a time grid.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// `points` equally spaced times from `0` to `horizon` inclusive.
pub fn uniform_grid(horizon: f64, points: usize) -> Result<Vec<f64>> {
    if points < 2 || !(horizon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "a grid needs >= 2 points on a positive horizon (got {points} on {horizon})"
        )));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i == points - 1 { horizon } else { horizon * (i as f64 / last) })
        .collect())
}

/// Values in `R^dim` at strictly increasing grid times, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPath {
    times: Vec<f64>,
    dim: usize,
    values: Vec<f64>,
}

impl GridPath {
    pub fn new(times: Vec<f64>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || times.is_empty() || values.len() != times.len() * dim {
            return Err(Error::InvalidParameter(format!(
                "{} values do not fill {} points of dimension {dim}",
                values.len(),
                times.len()
            )));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) || !times.iter().all(|t| t.is_finite()) {
            return Err(Error::InvalidParameter("grid must be strictly increasing".into()));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("path values must be finite".into()));
        }
        Ok(GridPath { times, dim, values })
    }

    /// Builds a path row by row from `f(j, t_j, row)`.
    pub fn from_fn(times: Vec<f64>, dim: usize, mut f: impl FnMut(usize, f64, &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; times.len() * dim];
        for (j, row) in values.chunks_mut(dim).enumerate() {
            f(j, times[j], row);
        }
        Self::new(times, dim, values)
    }

    pub fn scalar(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        Self::new(times, 1, values)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn value(&self, j: usize) -> &[f64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn terminal(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim)
    }

    pub fn component(&self, i: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(i).step_by(self.dim).copied()
    }

    pub fn same_grid(&self, other: &GridPath) -> bool {
        self.times == other.times
    }

    /// `sup_j ||self(t_j) - other(t_j)||` in the Euclidean norm.
    pub fn sup_distance(&self, other: &GridPath) -> Result<f64> {
        if !self.same_grid(other) || self.dim != other.dim {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .rows()
            .zip(other.rows())
            .map(|(a, b)| norm(a.iter().zip(b).map(|(x, y)| x - y)))
            .fold(0.0, f64::max))
    }

    /// Grid modulus of continuity: the largest `||f(t_u) - f(t_s)||` with
    /// `t_s < t_u <= t_s + theta`.
    pub fn modulus(&self, theta: f64) -> f64 {
        let mut w: f64 = 0.0;
        for s in 0..self.len() {
            let fs = self.value(s);
            for u in s + 1..self.len() {
                if self.times[u] > self.times[s] + theta {
                    break;
                }
                let d = norm(self.value(u).iter().zip(fs).map(|(x, y)| x - y));
                w = w.max(d);
            }
        }
        w
    }
}

pub(crate) fn norm(it: impl Iterator<Item = f64>) -> f64 {
    libm::sqrt(it.map(|x| x * x).sum())
}
