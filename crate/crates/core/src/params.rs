//! Shared domain types: model parameters, velocity signs, cell-centred grids,
//! density pairs and the per-path random stream contract.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed `v`, switching rate `lambda` and, for relativistic work, the light speed `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub v: f64,
    pub lambda: f64,
    pub c: Option<f64>,
}

impl ModelParams {
    pub fn new(v: f64, lambda: f64) -> Result<Self> {
        validate_params(ModelParams { v, lambda, c: None }, false)
    }

    pub fn relativistic(v: f64, lambda: f64, c: f64) -> Result<Self> {
        validate_params(
            ModelParams {
                v,
                lambda,
                c: Some(c),
            },
            true,
        )
    }

    pub fn light_speed(&self) -> Result<f64> {
        self.c.ok_or(Error::MissingLightSpeed)
    }

    pub fn with_lambda(self, lambda: f64) -> Self {
        ModelParams { lambda, ..self }
    }
}

/// Checks the parameter invariants. `v >= c` is only rejected when `relativistic` is set.
pub fn validate_params(p: ModelParams, relativistic: bool) -> Result<ModelParams> {
    if !(p.v > 0.0 && p.v.is_finite()) {
        return Err(Error::NonPositiveSpeed(p.v));
    }
    if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
        return Err(Error::NegativeRate(p.lambda));
    }
    if let Some(c) = p.c {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "light speed must be positive, got {c}"
            )));
        }
    }
    if relativistic {
        let c = p.c.ok_or(Error::MissingLightSpeed)?;
        if p.v >= c {
            return Err(Error::SuperluminalSpeed { v: p.v, c });
        }
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacetimeEvent {
    pub t: f64,
    pub x: f64,
}

impl SpacetimeEvent {
    pub fn new(t: f64, x: f64) -> Self {
        SpacetimeEvent { t, x }
    }
}

/// Direction of motion; the velocity is `sign * v`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VelocitySign {
    Plus,
    Minus,
}

impl VelocitySign {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            VelocitySign::Plus => 1.0,
            VelocitySign::Minus => -1.0,
        }
    }

    #[inline]
    pub fn flip(self) -> Self {
        match self {
            VelocitySign::Plus => VelocitySign::Minus,
            VelocitySign::Minus => VelocitySign::Plus,
        }
    }

    /// Sign after `n` switches.
    #[inline]
    pub fn after_switches(self, n: usize) -> Self {
        if n.is_multiple_of(2) {
            self
        } else {
            self.flip()
        }
    }
}

/// Initial velocity law: a fixed sign, or each sign with probability 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Start {
    Signed(VelocitySign),
    Symmetric,
}

impl Start {
    /// Probability weights of the initial `+` and `-` states.
    pub fn weights(self) -> (f64, f64) {
        match self {
            Start::Signed(VelocitySign::Plus) => (1.0, 0.0),
            Start::Signed(VelocitySign::Minus) => (0.0, 1.0),
            Start::Symmetric => (0.5, 0.5),
        }
    }
}

/// Uniform cell-centred grid on `[x_min, x_max]` with `nx` cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_min: f64,
    x_max: f64,
    nx: usize,
}

impl Grid1D {
    pub fn new(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidGrid(format!(
                "need x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        if nx < 2 {
            return Err(Error::InvalidGrid(format!("need nx >= 2, got {nx}")));
        }
        Ok(Grid1D { x_min, x_max, nx })
    }

    /// Grid with spacing `dx` whose left edge is `x_min`.
    pub fn with_spacing(x_min: f64, dx: f64, nx: usize) -> Result<Self> {
        Grid1D::new(x_min, x_min + dx * nx as f64, nx)
    }

    /// Grid with `nx` (even) cells of width `dx` placed symmetrically about `center`,
    /// so `center` sits on a cell edge.
    pub fn symmetric(center: f64, dx: f64, nx: usize) -> Result<Self> {
        if !nx.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "symmetric grid needs even nx, got {nx}"
            )));
        }
        let half = dx * (nx / 2) as f64;
        Grid1D::new(center - half, center + half, nx)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    /// Left edge of cell `i`; `edge(nx)` is `x_max`.
    #[inline]
    pub fn edge(&self, i: usize) -> f64 {
        if i == self.nx {
            self.x_max
        } else {
            self.x_min + i as f64 * self.dx()
        }
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.center(i)).collect()
    }

    /// Index of the cell containing `x`; the right boundary belongs to the last cell.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if !(x >= self.x_min && x <= self.x_max) {
            return None;
        }
        let i = ((x - self.x_min) / self.dx()).floor() as usize;
        Some(i.min(self.nx - 1))
    }

    pub fn contains_interval(&self, lo: f64, hi: f64) -> bool {
        lo >= self.x_min && hi <= self.x_max
    }

    /// Errors unless `[lo, hi]` lies inside the grid.
    pub fn require_interval(&self, lo: f64, hi: f64) -> Result<()> {
        if self.contains_interval(lo, hi) {
            Ok(())
        } else {
            Err(Error::GridTooSmall {
                x_min: self.x_min,
                x_max: self.x_max,
                lo,
                hi,
            })
        }
    }
}

/// Densities of the `+` and `-` velocity states at the cell centres of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldPair {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl FieldPair {
    pub fn zeros(nx: usize) -> Self {
        FieldPair {
            plus: vec![0.0; nx],
            minus: vec![0.0; nx],
        }
    }

    pub fn new(plus: Vec<f64>, minus: Vec<f64>) -> Result<Self> {
        if plus.len() != minus.len() {
            return Err(Error::InvalidArgument(format!(
                "component lengths differ: {} vs {}",
                plus.len(),
                minus.len()
            )));
        }
        Ok(FieldPair { plus, minus })
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    /// `dx * sum(f+ + f-)`.
    pub fn mass(&self, dx: f64) -> f64 {
        dx * self
            .plus
            .iter()
            .zip(&self.minus)
            .map(|(a, b)| a + b)
            .sum::<f64>()
    }

    /// Pointwise `f+ + f-`.
    pub fn total(&self) -> Vec<f64> {
        self.plus
            .iter()
            .zip(&self.minus)
            .map(|(a, b)| a + b)
            .collect()
    }

    pub fn min_value(&self) -> f64 {
        self.plus
            .iter()
            .chain(&self.minus)
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

pub type PathRng = ChaCha8Rng;

/// Random stream for path `path_index`: a pure function of `(seed, path_index)`.
///
/// Each path gets its own ChaCha stream id, so results do not depend on how
/// paths are distributed over workers.
pub fn path_rng(seed: RngSeed, path_index: u64) -> PathRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.0);
    rng.set_stream(path_index);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn valid_params_pass_through() {
        let p = ModelParams {
            v: 1.0,
            lambda: 1.0,
            c: None,
        };
        assert_eq!(validate_params(p, false), Ok(p));
        // idempotent
        assert_eq!(
            validate_params(validate_params(p, false).unwrap(), false),
            Ok(p)
        );
    }

    #[test]
    fn rejects_bad_params() {
        let p = ModelParams {
            v: 1.5,
            lambda: 1.0,
            c: Some(1.0),
        };
        assert!(matches!(
            validate_params(p, true),
            Err(Error::SuperluminalSpeed { .. })
        ));
        // v > c is fine outside relativistic use
        assert!(validate_params(p, false).is_ok());
        assert_eq!(
            ModelParams::new(0.0, 1.0),
            Err(Error::NonPositiveSpeed(0.0))
        );
        assert_eq!(ModelParams::new(1.0, -0.1), Err(Error::NegativeRate(-0.1)));
        assert!(matches!(
            ModelParams::relativistic(1.0, 1.0, 1.0),
            Err(Error::SuperluminalSpeed { .. })
        ));
        let no_c = ModelParams::new(0.5, 1.0).unwrap();
        assert_eq!(validate_params(no_c, true), Err(Error::MissingLightSpeed));
    }

    #[test]
    fn grid_geometry() {
        let g = Grid1D::new(-1.0, 1.0, 4).unwrap();
        assert_eq!(g.dx(), 0.5);
        assert_eq!(g.center(0), -0.75);
        assert_eq!(g.cell_of(1.0), Some(3));
        assert_eq!(g.cell_of(-1.0), Some(0));
        assert_eq!(g.cell_of(1.1), None);
        assert!(Grid1D::new(1.0, 1.0, 4).is_err());
        assert!(Grid1D::new(0.0, 1.0, 1).is_err());
        let s = Grid1D::symmetric(0.0, 0.25, 8).unwrap();
        assert_eq!(s.edge(4), 0.0);
    }

    #[test]
    fn path_streams_are_pure_and_distinct() {
        let a: u64 = path_rng(RngSeed(42), 0).random();
        let b: u64 = path_rng(RngSeed(42), 0).random();
        let c: u64 = path_rng(RngSeed(42), 1).random();
        let d: u64 = path_rng(RngSeed(43), 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
