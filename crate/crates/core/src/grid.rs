//! Physical constants, uniform grids and boundary conditions.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Action quanta, speed scale and inertial parameter.
///
/// Natural units (`hbar = mass = c = 1`) are the default; `h` is always
/// derived from `hbar` so the two cannot drift apart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    hbar: f64,
    c: f64,
    mass: f64,
}

impl PhysicalConstants {
    pub fn new(hbar: f64, c: f64, mass: f64) -> Result<Self> {
        for (name, value) in [("hbar", hbar), ("c", c), ("mass", mass)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("{name} must be finite and positive, got {value}")));
            }
        }
        Ok(Self { hbar, c, mass })
    }

    /// Constants specified through the unreduced quantum `h`.
    pub fn from_h(h: f64, c: f64, mass: f64) -> Result<Self> {
        Self::new(h / (2.0 * PI), c, mass)
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn h(&self) -> f64 {
        2.0 * PI * self.hbar
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { hbar: 1.0, c: 1.0, mass: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Hard wall: the field vanishes just outside the first and last point.
    #[default]
    Dirichlet,
    /// The last point neighbours the first.
    Periodic,
}

/// Uniform one-dimensional grid including both end points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    min: f64,
    max: f64,
}

impl Grid {
    pub fn new(n: usize, min: f64, max: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("grid needs at least 2 points, got {n}")));
        }
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::Config(format!("grid bounds must be finite, got [{min}, {max}]")));
        }
        if max <= min {
            return Err(Error::Config(format!("grid requires max > min, got [{min}, {max}]")));
        }
        Ok(Self { n, min, max })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn spacing(&self) -> f64 {
        (self.max - self.min) / (self.n - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        // Pin the last point to `max` exactly.
        if i + 1 == self.n {
            self.max
        } else {
            self.min + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.point(i))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.points().collect()
    }

    /// Length of one period when the grid is used with periodic wrap-around.
    pub fn period(&self) -> f64 {
        self.n as f64 * self.spacing()
    }
}

/// Convenience constructor mirroring the grid builder operation.
pub fn build_grid(n: usize, min: f64, max: f64) -> Result<Grid> {
    Grid::new(n, min, max)
}
