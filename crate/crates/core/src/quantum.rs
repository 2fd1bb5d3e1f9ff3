//! Quantized random evolution. The Hamiltonians `±v p̂` only translate a
//! state, so along each environment history the position density is `|ψ₀|²`
//! shifted by the path's displacement. Averaging over histories gives
//! `ρ±(t, ·)`, which evolves by the forward Chapman-Kolmogorov system.
//!
//! States are represented by their position densities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mc::SwitchRecord;
use crate::moments::InitialMoments;
use crate::params::{Grid1D, ModelParams, VelocitySign};
use crate::strategy::DensityStrategy;

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Shape of `|ψ₀|²`, each with compact support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Profile {
    Uniform {
        a: f64,
        b: f64,
    },
    TruncatedGaussian {
        mean: f64,
        std: f64,
        a: f64,
        b: f64,
    },
    RaisedCosine {
        center: f64,
        half_width: f64,
    },
    /// Piecewise-constant density given by normalized cell masses.
    Sampled {
        x_min: f64,
        dx: f64,
        masses: Vec<f64>,
        cumulative: Vec<f64>,
    },
}

/// Position density `|ψ|²` of a state: a profile translated by `offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WavePacket {
    profile: Profile,
    offset: f64,
    /// `(Φ(α), Φ(β) − Φ(α))` for a truncated Gaussian, unused otherwise.
    normalizer: (f64, f64),
}

impl WavePacket {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        check_support(a, b)?;
        Ok(Self::from_profile(Profile::Uniform { a, b }))
    }

    pub fn truncated_gaussian(mean: f64, std: f64, a: f64, b: f64) -> Result<Self> {
        check_support(a, b)?;
        if !(std > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "std must be positive, got {std}"
            )));
        }
        Ok(Self::from_profile(Profile::TruncatedGaussian {
            mean,
            std,
            a,
            b,
        }))
    }

    pub fn raised_cosine(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && center.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "half width must be positive, got {half_width}"
            )));
        }
        Ok(Self::from_profile(Profile::RaisedCosine {
            center,
            half_width,
        }))
    }

    /// Piecewise-constant packet from non-negative cell values on a grid; normalized to unit mass.
    pub fn sampled(grid: &Grid1D, density: &[f64]) -> Result<Self> {
        if density.len() != grid.nx() || density.iter().any(|&d| !(d >= 0.0 && d.is_finite())) {
            return Err(Error::InvalidArgument(
                "sampled density must be non-negative with one value per cell".into(),
            ));
        }
        let total: f64 = density.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidArgument(
                "sampled density has zero mass".into(),
            ));
        }
        let masses: Vec<f64> = density.iter().map(|d| d / total).collect();
        let mut cumulative = Vec::with_capacity(masses.len() + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for m in &masses {
            acc += m;
            cumulative.push(acc);
        }
        Ok(Self::from_profile(Profile::Sampled {
            x_min: grid.x_min(),
            dx: grid.dx(),
            masses,
            cumulative,
        }))
    }

    fn from_profile(profile: Profile) -> Self {
        let normalizer = match &profile {
            Profile::TruncatedGaussian { mean, std, a, b } => {
                let fa = normal_cdf((a - mean) / std);
                (fa, normal_cdf((b - mean) / std) - fa)
            }
            _ => (0.0, 1.0),
        };
        WavePacket {
            profile,
            offset: 0.0,
            normalizer,
        }
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    /// Support `(a, b)` of the density.
    pub fn support(&self) -> (f64, f64) {
        let (a, b) = match &self.profile {
            Profile::Uniform { a, b } | Profile::TruncatedGaussian { a, b, .. } => (*a, *b),
            Profile::RaisedCosine { center, half_width } => {
                (center - half_width, center + half_width)
            }
            Profile::Sampled {
                x_min, dx, masses, ..
            } => (*x_min, x_min + dx * masses.len() as f64),
        };
        (a + self.offset, b + self.offset)
    }

    pub fn density(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo || x >= hi {
            return 0.0;
        }
        let u = x - self.offset;
        match &self.profile {
            Profile::Uniform { a, b } => 1.0 / (b - a),
            Profile::TruncatedGaussian { mean, std, .. } => {
                normal_pdf((u - mean) / std) / (std * self.normalizer.1)
            }
            Profile::RaisedCosine { center, half_width } => {
                let w = *half_width;
                (1.0 + (std::f64::consts::PI * (u - center) / w).cos()) / (2.0 * w)
            }
            Profile::Sampled {
                x_min, dx, masses, ..
            } => {
                let i = (((u - x_min) / dx).floor() as usize).min(masses.len() - 1);
                masses[i] / dx
            }
        }
    }

    /// Cumulative distribution; exactly 0 below the support and 1 above it.
    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        let u = x - self.offset;
        let v = match &self.profile {
            Profile::Uniform { a, b } => (u - a) / (b - a),
            Profile::TruncatedGaussian { mean, std, .. } => {
                let (fa, z) = self.normalizer;
                (normal_cdf((u - mean) / std) - fa) / z
            }
            Profile::RaisedCosine { center, half_width } => {
                let w = *half_width;
                let s = u - center;
                (s + w + w / std::f64::consts::PI * (std::f64::consts::PI * s / w).sin())
                    / (2.0 * w)
            }
            Profile::Sampled {
                x_min,
                dx,
                masses,
                cumulative,
            } => {
                let s = (u - x_min) / dx;
                let i = (s.floor() as usize).min(masses.len() - 1);
                cumulative[i] + (s - i as f64) * masses[i]
            }
        };
        v.clamp(0.0, 1.0)
    }

    pub fn mass_between(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            0.0
        } else {
            self.cdf(hi) - self.cdf(lo)
        }
    }

    /// Total probability, `∫|ψ|²`.
    pub fn norm(&self) -> f64 {
        let (a, b) = self.support();
        self.mass_between(a, b)
    }

    /// Closed-form `⟨x⟩` and `⟨x²⟩`.
    pub fn moments(&self) -> InitialMoments {
        let (mean, var) = match &self.profile {
            Profile::Uniform { a, b } => (0.5 * (a + b), (b - a).powi(2) / 12.0),
            Profile::TruncatedGaussian { mean, std, a, b } => {
                let (al, be) = ((a - mean) / std, (b - mean) / std);
                let z = normal_cdf(be) - normal_cdf(al);
                let (pa, pb) = (normal_pdf(al), normal_pdf(be));
                let shift = (pa - pb) / z;
                let var = std * std * (1.0 + (al * pa - be * pb) / z - shift * shift);
                (mean + std * shift, var)
            }
            Profile::RaisedCosine { center, half_width } => {
                let pi2 = std::f64::consts::PI * std::f64::consts::PI;
                (*center, half_width * half_width * (1.0 / 3.0 - 2.0 / pi2))
            }
            Profile::Sampled {
                x_min, dx, masses, ..
            } => {
                let c = |i: usize| x_min + (i as f64 + 0.5) * dx;
                let m1: f64 = masses.iter().enumerate().map(|(i, m)| m * c(i)).sum();
                let m2: f64 = masses
                    .iter()
                    .enumerate()
                    .map(|(i, m)| m * (c(i) * c(i) + dx * dx / 12.0))
                    .sum();
                (m1, m2 - m1 * m1)
            }
        };
        let mean = mean + self.offset;
        InitialMoments {
            m1: mean,
            m2: var + mean * mean,
        }
    }

    /// The same density translated by `d`.
    pub fn shifted(&self, d: f64) -> WavePacket {
        WavePacket {
            offset: self.offset + d,
            ..self.clone()
        }
    }

    /// Probability mass in each grid cell.
    pub fn cell_masses(&self, grid: &Grid1D) -> Vec<f64> {
        let mut m = vec![0.0; grid.nx()];
        self.add_cell_masses(grid, 0.0, 1.0, &mut m);
        m
    }

    /// Adds `weight` times the cell masses of this density translated by `shift`.
    pub(crate) fn add_cell_masses(&self, grid: &Grid1D, shift: f64, weight: f64, out: &mut [f64]) {
        let (lo, hi) = self.support();
        let (lo, hi) = (lo + shift, hi + shift);
        let dx = grid.dx();
        let first = ((lo - grid.x_min()) / dx).floor().max(0.0) as usize;
        let last = (((hi - grid.x_min()) / dx).ceil().max(0.0) as usize).min(grid.nx());
        if first >= last {
            return;
        }
        let mut below = self.cdf(grid.edge(first) - shift);
        for (i, cell) in out.iter_mut().enumerate().take(last).skip(first) {
            let above = self.cdf(grid.edge(i + 1) - shift);
            *cell += weight * (above - below);
            below = above;
        }
    }
}

fn check_support(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "support needs a < b, got ({a}, {b})"
        )))
    }
}

/// Free evolution under `±v p̂`: translation by `sign·v·t`.
pub fn unitary_shift(
    w: &WavePacket,
    sign: VelocitySign,
    p: &ModelParams,
    t: f64,
) -> Result<WavePacket> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "time must be >= 0, got {t}"
        )));
    }
    Ok(w.shifted(sign.value() * p.v * t))
}

/// Density of the state after the environment history `rec` up to time `t`.
pub fn random_state_density(
    w: &WavePacket,
    rec: &SwitchRecord,
    p: &ModelParams,
    t: f64,
) -> Result<WavePacket> {
    Ok(w.shifted(rec.displacement_integral(p.v, t)?))
}

/// Path-averaged position densities for the two initial environment states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AveragedDensity {
    pub grid: Grid1D,
    pub t: f64,
    pub rho_plus: Vec<f64>,
    pub rho_minus: Vec<f64>,
}

impl AveragedDensity {
    /// Builds densities from per-cell masses.
    pub fn from_masses(grid: Grid1D, t: f64, plus: Vec<f64>, minus: Vec<f64>) -> Self {
        let dx = grid.dx();
        AveragedDensity {
            grid,
            t,
            rho_plus: plus.into_iter().map(|m| m / dx).collect(),
            rho_minus: minus.into_iter().map(|m| m / dx).collect(),
        }
    }

    pub fn rho(&self, sign: VelocitySign) -> &[f64] {
        match sign {
            VelocitySign::Plus => &self.rho_plus,
            VelocitySign::Minus => &self.rho_minus,
        }
    }

    pub fn cell_masses(&self, sign: VelocitySign) -> Vec<f64> {
        let dx = self.grid.dx();
        self.rho(sign).iter().map(|r| r * dx).collect()
    }
}

/// `ρ±` at time `t` computed by the given strategy.
pub fn averaged_density(
    w: &WavePacket,
    p: &ModelParams,
    t: f64,
    grid: &Grid1D,
    method: &dyn DensityStrategy,
) -> Result<AveragedDensity> {
    method.averaged_density(w, p, t, grid)
}

/// `dx Σ f(xᵢ) ρᵢ`.
pub fn expected_observable<F: Fn(f64) -> f64>(f: F, rho: &[f64], grid: &Grid1D) -> f64 {
    let dx = grid.dx();
    rho.iter()
        .enumerate()
        .map(|(i, r)| f(grid.center(i)) * r)
        .sum::<f64>()
        * dx
}

/// Mass of `ρ±` inside a probe interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightconeReport {
    pub plus: f64,
    pub minus: f64,
    /// Whether the probe misses `(a − vt, b + vt)` entirely.
    pub outside_cone: bool,
}

impl LightconeReport {
    pub fn max(&self) -> f64 {
        self.plus.max(self.minus)
    }
}

pub fn lightcone_violation_mass(
    rho: &AveragedDensity,
    w: &WavePacket,
    p: &ModelParams,
    probe: (f64, f64),
) -> Result<LightconeReport> {
    let (lo, hi) = probe;
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!(
            "probe needs lo < hi, got ({lo}, {hi})"
        )));
    }
    let grid = &rho.grid;
    let dx = grid.dx();
    let mass_in = |r: &[f64]| {
        let mut s = 0.0;
        for (i, &ri) in r.iter().enumerate() {
            let overlap = grid.edge(i + 1).min(hi) - grid.edge(i).max(lo);
            if overlap > 0.0 {
                s += ri * overlap.min(dx);
            }
        }
        s
    };
    let (a, b) = w.support();
    let reach = p.v * rho.t;
    Ok(LightconeReport {
        plus: mass_in(&rho.rho_plus),
        minus: mass_in(&rho.rho_minus),
        outside_cone: hi <= a - reach || lo >= b + reach,
    })
}
