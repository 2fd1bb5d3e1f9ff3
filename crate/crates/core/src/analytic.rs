//! Closed-form law of the telegraph process started at the origin.
//!
//! For `|x| < vt`, with `z = λ √(t² − x²/v²)`, the absolutely continuous part is
//!
//! ```text
//! symmetric start: λ e^{-λt} / (2v) · [ I₀(z) + λ t I₁(z)/z ]
//! start sign ±:    λ e^{-λt} / (2v) · [ I₀(z) + λ (t ± x/v) I₁(z)/z ]
//! ```
//!
//! plus atoms of total weight `e^{-λt}` at `±vt`, split according to the
//! initial sign law.

use serde::{Deserialize, Serialize};

use crate::bessel::{i0e, i1e_over_x};
use crate::error::{Error, Result};
use crate::params::{Grid1D, ModelParams, Start, VelocitySign};
use crate::quad::composite_gauss;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticDensity {
    /// Density of the absolutely continuous part at `x`.
    pub ac: f64,
    /// Point mass at `+vt`.
    pub atom_plus: f64,
    /// Point mass at `-vt`.
    pub atom_minus: f64,
}

fn check_time(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "analytic density needs t > 0, got {t}"
        )))
    }
}

/// Absolutely continuous density at displacement `x`; zero outside the open cone.
pub fn kernel_ac(p: &ModelParams, t: f64, x: f64, start: Start) -> f64 {
    let (v, lambda) = (p.v, p.lambda);
    if lambda == 0.0 || x.abs() >= v * t {
        return 0.0;
    }
    let s = x / v;
    let z = lambda * ((t - s) * (t + s)).sqrt();
    let drift = match start {
        Start::Symmetric => t,
        Start::Signed(VelocitySign::Plus) => t + s,
        Start::Signed(VelocitySign::Minus) => t - s,
    };
    let scale = lambda / (2.0 * v) * (z - lambda * t).exp();
    scale * (i0e(z) + lambda * drift * i1e_over_x(z))
}

/// Density and atom weights of `x(t) - x(0)` at displacement `x`.
pub fn analytic_density(p: &ModelParams, t: f64, x: f64, start: Start) -> Result<AnalyticDensity> {
    check_time(t)?;
    let (wp, wm) = start.weights();
    let survive = (-p.lambda * t).exp();
    Ok(AnalyticDensity {
        ac: kernel_ac(p, t, x, start),
        atom_plus: wp * survive,
        atom_minus: wm * survive,
    })
}

/// Probability mass per cell for a process started at `x0`, integrating the
/// continuous part over each cell. Atoms are added when `include_atoms` is
/// set; an atom on a cell edge is shared between the two neighbours.
pub fn analytic_cell_masses(
    p: &ModelParams,
    t: f64,
    x0: f64,
    start: Start,
    grid: &Grid1D,
    include_atoms: bool,
) -> Result<Vec<f64>> {
    check_time(t)?;
    let reach = p.v * t;
    grid.require_interval(x0 - reach, x0 + reach)?;
    let mut m: Vec<f64> = (0..grid.nx())
        .map(|i| {
            let lo = (grid.edge(i) - x0).max(-reach);
            let hi = (grid.edge(i + 1) - x0).min(reach);
            if hi <= lo {
                0.0
            } else {
                composite_gauss(|x| kernel_ac(p, t, x, start), lo, hi, 2)
            }
        })
        .collect();
    if include_atoms {
        let d = analytic_density(p, t, 0.0, start)?;
        for (pos, w) in [(x0 + reach, d.atom_plus), (x0 - reach, d.atom_minus)] {
            add_point_mass(grid, &mut m, pos, w);
        }
    }
    Ok(m)
}

/// Adds mass `w` at `x`, splitting it when `x` falls on an interior cell edge.
pub(crate) fn add_point_mass(grid: &Grid1D, m: &mut [f64], x: f64, w: f64) {
    if w == 0.0 {
        return;
    }
    let s = (x - grid.x_min()) / grid.dx();
    let k = s.round();
    if (s - k).abs() < 1e-9 && k >= 1.0 && (k as usize) < grid.nx() {
        m[k as usize - 1] += 0.5 * w;
        m[k as usize] += 0.5 * w;
    } else if let Some(i) = grid.cell_of(x) {
        m[i] += w;
    }
}

/// `Σ |a_i − b_i|`: L1 distance between two per-cell mass vectors.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}
