//! First and second moments of the path-averaged position law.
//!
//! The closed forms below follow from the moment system obtained by pairing
//! the forward equations with `1, x, x²`:
//!
//! ```text
//! d⟨ν⟩/dt  = −2λ⟨ν⟩            ⟨ν⟩(0) = s v
//! dm₁/dt   = ⟨ν⟩               m₁(0)  = ⟨x⟩₀
//! dq/dt    = v² − 2λ q         q(0)   = s v ⟨x⟩₀,   q = ⟨ν x⟩
//! dm₂/dt   = 2 q               m₂(0)  = ⟨x²⟩₀
//! ```
//!
//! [`moment_ode_oracle`] integrates that system numerically and is the
//! reference every closed form is tested against.
//!
//! Integrating `m₂'' + 2λ m₂' = 2v²` once gives `m₂' + 2λ m₂ = 2v² t + C₂`
//! with `C₂ = m₂'(0) + 2λ m₂(0) = 2λ⟨x²⟩₀ + 2 s v ⟨x⟩₀`; the `+` sign (and the
//! factor 2 on the cross term) is what the oracle confirms.

use serde::{Deserialize, Serialize};

use crate::analytic::l1_distance;
use crate::error::{Error, Result};
use crate::ode::{integrate, Tolerance};
use crate::params::{Grid1D, ModelParams, Start, VelocitySign};
use crate::pde::{gaussian_cells, point_mass, solve_forward, OutputTimes};

/// `⟨x⟩` and `⟨x²⟩` of the initial packet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialMoments {
    pub m1: f64,
    pub m2: f64,
}

impl InitialMoments {
    pub fn new(m1: f64, m2: f64) -> Result<Self> {
        if !(m1.is_finite() && m2.is_finite()) || m2 < m1 * m1 * (1.0 - 1e-12) {
            return Err(Error::InvalidArgument(format!(
                "need <x²> >= <x>², got m1={m1}, m2={m2}"
            )));
        }
        Ok(InitialMoments { m1, m2 })
    }

    pub fn from_mean_variance(mean: f64, variance: f64) -> Result<Self> {
        InitialMoments::new(mean, variance + mean * mean)
    }

    pub fn variance(&self) -> f64 {
        (self.m2 - self.m1 * self.m1).max(0.0)
    }
}

/// `1 − e^{−y}`.
fn one_minus_exp(y: f64) -> f64 {
    -(-y).exp_m1()
}

/// `y − 1 + e^{−y}`, accurate for small `y`.
fn excess(y: f64) -> f64 {
    if y < 1e-2 {
        let y2 = y * y;
        y2 * (0.5 - y / 6.0 + y2 / 24.0 - y2 * y / 120.0 + y2 * y2 / 720.0)
    } else {
        y - one_minus_exp(y)
    }
}

/// `⟨x⟩(t) = ⟨x⟩₀ + s (v / 2λ)(1 − e^{−2λt})`, ballistic when `λ = 0`.
pub fn mean_closed_form(im: &InitialMoments, p: &ModelParams, t: f64, sign: VelocitySign) -> f64 {
    let s = sign.value();
    if p.lambda == 0.0 {
        return im.m1 + s * p.v * t;
    }
    im.m1 + s * p.v / (2.0 * p.lambda) * one_minus_exp(2.0 * p.lambda * t)
}

/// Mean velocity `⟨ν⟩(t) = s v e^{−2λt}`.
pub fn mean_velocity(p: &ModelParams, t: f64, sign: VelocitySign) -> f64 {
    sign.value() * p.v * (-2.0 * p.lambda * t).exp()
}

/// `⟨x²⟩(t) = ⟨x²⟩₀ + (s v ⟨x⟩₀ / λ)(1 − e^{−2λt}) + (v² / 2λ²)(2λt − 1 + e^{−2λt})`.
pub fn second_moment_closed_form(
    im: &InitialMoments,
    p: &ModelParams,
    t: f64,
    sign: VelocitySign,
) -> f64 {
    let (v, lambda, s) = (p.v, p.lambda, sign.value());
    if lambda == 0.0 {
        return im.m2 + 2.0 * s * v * im.m1 * t + v * v * t * t;
    }
    let y = 2.0 * lambda * t;
    im.m2 + s * v * im.m1 / lambda * one_minus_exp(y) + v * v / (2.0 * lambda * lambda) * excess(y)
}

/// Integration constant of `m₂' + 2λ m₂ = 2v² t + C₂`.
pub fn second_moment_constant(im: &InitialMoments, p: &ModelParams, sign: VelocitySign) -> f64 {
    2.0 * p.lambda * im.m2 + 2.0 * sign.value() * p.v * im.m1
}

/// `Var x(t) = Var₀ + (v²/2λ²)(2λt − 1 + e^{−2λt}) − (v²/4λ²)(1 − e^{−2λt})²`.
///
/// Independent of the start sign and of `⟨x⟩₀`.
pub fn variance_closed_form(im: &InitialMoments, p: &ModelParams, t: f64) -> f64 {
    let (v, lambda) = (p.v, p.lambda);
    if lambda == 0.0 {
        return im.variance();
    }
    let y = 2.0 * lambda * t;
    let h = one_minus_exp(y);
    let k = v * v / (4.0 * lambda * lambda);
    im.variance() + 2.0 * k * excess(y) - k * h * h
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCurve {
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
    pub stdev: Vec<f64>,
}

/// Numerical solution of the moment system; the reference for every closed form here.
pub fn moment_ode_oracle(
    im: &InitialMoments,
    p: &ModelParams,
    sign: VelocitySign,
    t_grid: &[f64],
) -> Result<MomentCurve> {
    if t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidArgument(
            "time grid must start at t >= 0".into(),
        ));
    }
    let (v, lambda, s) = (p.v, p.lambda, sign.value());
    // state: [⟨ν⟩, m₁, q, m₂]
    let y0 = [s * v, im.m1, s * v * im.m1, im.m2];
    let rhs = |_t: f64, y: &[f64; 4]| {
        [
            -2.0 * lambda * y[0],
            y[0],
            v * v - 2.0 * lambda * y[2],
            2.0 * y[2],
        ]
    };
    let mut ts = Vec::with_capacity(t_grid.len() + 1);
    let prepend = t_grid.first().is_none_or(|&t| t > 0.0);
    if prepend {
        ts.push(0.0);
    }
    ts.extend_from_slice(t_grid);
    let mut states = integrate(rhs, y0, &ts, Tolerance::default())?;
    if prepend {
        states.remove(0);
    }
    let mean: Vec<f64> = states.iter().map(|y| y[1]).collect();
    let second: Vec<f64> = states.iter().map(|y| y[3]).collect();
    let stdev = mean
        .iter()
        .zip(&second)
        .map(|(m, m2)| (m2 - m * m).max(0.0).sqrt())
        .collect();
    Ok(MomentCurve {
        times: t_grid.to_vec(),
        mean,
        second_moment: second,
        stdev,
    })
}

/// Closed-form curve together with the leading-order standard deviation
/// `√(Var₀ + (v²t/λ)(1 − e^{−2λt}))` and the remainder the oracle implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StdevReport {
    pub curve: MomentCurve,
    pub leading: Vec<f64>,
    /// `R(λ, t) = Var_oracle − leading²`.
    pub remainder: Vec<f64>,
    /// `max_t λ² |R| / v²`; bounded in `λ` for fixed speed.
    pub scaled_remainder_max: f64,
}

pub fn stdev_curve(
    im: &InitialMoments,
    p: &ModelParams,
    t_grid: &[f64],
    sign: VelocitySign,
) -> Result<StdevReport> {
    if p.lambda == 0.0 {
        return Err(Error::InvalidArgument(
            "stdev asymptotics need λ > 0".into(),
        ));
    }
    let oracle = moment_ode_oracle(im, p, sign, t_grid)?;
    let (v, lambda) = (p.v, p.lambda);
    let mut curve = MomentCurve {
        times: t_grid.to_vec(),
        mean: Vec::new(),
        second_moment: Vec::new(),
        stdev: Vec::new(),
    };
    let mut leading = Vec::new();
    let mut remainder = Vec::new();
    for (k, &t) in t_grid.iter().enumerate() {
        curve.mean.push(mean_closed_form(im, p, t, sign));
        curve
            .second_moment
            .push(second_moment_closed_form(im, p, t, sign));
        curve.stdev.push(variance_closed_form(im, p, t).sqrt());
        let lead2 = im.variance() + v * v * t / lambda * one_minus_exp(2.0 * lambda * t);
        leading.push(lead2.sqrt());
        let var_oracle = oracle.second_moment[k] - oracle.mean[k] * oracle.mean[k];
        remainder.push(var_oracle - lead2);
    }
    let scaled_remainder_max = remainder
        .iter()
        .map(|r| lambda * lambda * r.abs() / (v * v))
        .fold(0.0, f64::max);
    Ok(StdevReport {
        curve,
        leading,
        remainder,
        scaled_remainder_max,
    })
}

/// Settings for the diffusive-limit ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusiveStudy {
    /// Target diffusivity `σ = v²/λ`.
    pub sigma: f64,
    pub lambdas: Vec<f64>,
    pub t: f64,
    /// Half-width of the spatial window, in units of `√(σt)`.
    pub half_width_sd: f64,
    /// Upper bound on `λ dt` for each solve.
    pub max_lambda_dt: f64,
    /// Upper bound on the cell width in units of `√(σt)`.
    pub max_dx_sd: f64,
}

impl DiffusiveStudy {
    pub fn new(sigma: f64, lambdas: Vec<f64>, t: f64) -> Self {
        DiffusiveStudy {
            sigma,
            lambdas,
            t,
            half_width_sd: 10.0,
            max_lambda_dt: 0.05,
            max_dx_sd: 1.0 / 64.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitRow {
    pub lambda: f64,
    pub v: f64,
    pub dx: f64,
    pub steps: usize,
    /// L1 distance between the telegraph law and `N(0, σt)`, cell by cell.
    pub l1: f64,
    pub mass_drift: f64,
    pub min_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitTable {
    pub rows: Vec<LimitRow>,
    pub strictly_decreasing: bool,
}

/// For each `λ`, solves the forward system with `v = √(σλ)` from a symmetric
/// point start and measures its L1 distance to the heat kernel of variance `σt`.
pub fn diffusive_limit_study(study: &DiffusiveStudy) -> Result<LimitTable> {
    if !(study.sigma > 0.0 && study.t > 0.0) {
        return Err(Error::InvalidArgument(
            "sigma and t must be positive".into(),
        ));
    }
    let sd = (study.sigma * study.t).sqrt();
    let mut rows = Vec::with_capacity(study.lambdas.len());
    for &lambda in &study.lambdas {
        if !(lambda > 0.0) {
            return Err(Error::NegativeRate(lambda));
        }
        let v = (study.sigma * lambda).sqrt();
        let p = ModelParams::new(v, lambda)?;
        // dt must divide t and respect both the λdt and dx bounds.
        let dt_max = (study.max_lambda_dt / lambda).min(study.max_dx_sd * sd / v);
        let steps = (study.t / dt_max).ceil() as usize;
        let dx = v * study.t / steps as f64;
        let half = (study.half_width_sd * sd).min(v * study.t + 2.0 * dx);
        let half_cells = (half / dx).ceil() as usize + 1;
        let grid = Grid1D::symmetric(0.0, dx, 2 * half_cells)?;
        let init = point_mass(&grid, 0.0, Start::Symmetric)?;
        let r = solve_forward(&p, &init, &grid, study.t, &OutputTimes::At(vec![study.t]))?;
        let tele: Vec<f64> = r.last().total().iter().map(|f| f * dx).collect();
        let gauss: Vec<f64> = gaussian_cells(&grid, 0.0, sd)
            .iter()
            .map(|g| g * dx)
            .collect();
        rows.push(LimitRow {
            lambda,
            v,
            dx,
            steps,
            l1: l1_distance(&tele, &gauss),
            mass_drift: r.mass_drift(),
            min_value: r.min_value(),
        });
    }
    let strictly_decreasing = rows.windows(2).all(|w| w[1].l1 < w[0].l1);
    Ok(LimitTable {
        rows,
        strictly_decreasing,
    })
}
