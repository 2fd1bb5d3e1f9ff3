//! Lorentz boosts, velocity addition, rate rescaling, and the residual check
//! that the Chapman-Kolmogorov system keeps its form in a moving frame.
//!
//! In the lab frame the switching rate seen along a worldline of speed `v`
//! is `λ̃ = √(1 − v²/c²) λ`. Pulling the lab solution back into a frame moving
//! with speed `V`, each component must satisfy
//!
//! ```text
//! ∂ₜ' f̃₊ + v'  ∂ₓ' f̃₊ = λ̃'  (f̃₋ − f̃₊),   v'  = (v − V)/(1 − vV/c²)
//! ∂ₜ' f̃₋ + v'' ∂ₓ' f̃₋ = λ̃'' (f̃₊ − f̃₋),   v'' = −(v + V)/(1 + vV/c²)
//! ```
//!
//! with `λ̃' = √(1 − v'²/c²) λ` and `λ̃'' = √(1 − v''²/c²) λ`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{validate_params, FieldPair, Grid1D, ModelParams, SpacetimeEvent};
use crate::pde::{solve_forward, OutputTimes, SolveResult};

/// Change to a frame moving with velocity `velocity` relative to the lab.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boost {
    velocity: f64,
    c: f64,
    gamma: f64,
}

/// `√(1 − (u/c)²)`, computed as `√((1 − β)(1 + β))`.
fn contraction(u: f64, c: f64) -> f64 {
    let beta = u / c;
    ((1.0 - beta) * (1.0 + beta)).sqrt()
}

impl Boost {
    pub fn new(velocity: f64, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "light speed must be positive, got {c}"
            )));
        }
        if !(velocity.abs() < c) {
            return Err(Error::SuperluminalSpeed { v: velocity, c });
        }
        Ok(Boost {
            velocity,
            c,
            gamma: 1.0 / contraction(velocity, c),
        })
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Lab `(t, x)` to moving `(t', x')`: `t' = γ(t − Vx/c²)`, `x' = γ(x − Vt)`.
    pub fn apply(&self, e: SpacetimeEvent) -> SpacetimeEvent {
        let (g, v, c2) = (self.gamma, self.velocity, self.c * self.c);
        SpacetimeEvent {
            t: g * (e.t - v * e.x / c2),
            x: g * (e.x - v * e.t),
        }
    }

    /// Moving `(t', x')` back to the lab.
    pub fn invert(&self, e: SpacetimeEvent) -> SpacetimeEvent {
        let (g, v, c2) = (self.gamma, self.velocity, self.c * self.c);
        SpacetimeEvent {
            t: g * (e.t + v * e.x / c2),
            x: g * (e.x + v * e.t),
        }
    }
}

pub fn boost_event(b: &Boost, e: SpacetimeEvent) -> SpacetimeEvent {
    b.apply(e)
}

pub fn inverse_boost(b: &Boost, e: SpacetimeEvent) -> SpacetimeEvent {
    b.invert(e)
}

/// Speed `v` seen from a frame moving with `frame_velocity`: `(v − V)/(1 − vV/c²)`.
pub fn add_velocities(v: f64, frame_velocity: f64, c: f64) -> f64 {
    (v - frame_velocity) / (1.0 - v * frame_velocity / (c * c))
}

/// `λ̃ = √(1 − (v/c)²) λ`.
pub fn rescale_rate(lambda: f64, v: f64, c: f64) -> Result<f64> {
    if !(v.abs() < c) {
        return Err(Error::SuperluminalSpeed { v, c });
    }
    Ok(contraction(v, c) * lambda)
}

/// `dt/dτ = 1/√(1 − (v/c)²)`.
pub fn proper_time_factor(v: f64, c: f64) -> Result<f64> {
    if !(v.abs() < c) {
        return Err(Error::SuperluminalSpeed { v, c });
    }
    Ok(1.0 / contraction(v, c))
}

/// Transport speeds and switching rates of both components in the moving frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransformedRates {
    pub v_prime: f64,
    pub v_doubleprime: f64,
    pub lambda_prime: f64,
    pub lambda_doubleprime: f64,
}

pub fn transformed_params(p: &ModelParams, b: &Boost) -> Result<TransformedRates> {
    let p = validate_params(*p, true)?;
    let c = b.c();
    let v_prime = add_velocities(p.v, b.velocity(), c);
    let v_doubleprime = add_velocities(-p.v, b.velocity(), c);
    Ok(TransformedRates {
        v_prime,
        v_doubleprime,
        lambda_prime: rescale_rate(p.lambda, v_prime, c)?,
        lambda_doubleprime: rescale_rate(p.lambda, v_doubleprime, c)?,
    })
}

/// Rate used for the lab-frame solve: the rest-frame rate dilated along the worldline.
pub fn lab_rate(p: &ModelParams) -> Result<f64> {
    let p = validate_params(*p, true)?;
    rescale_rate(p.lambda, p.v, p.light_speed()?)
}

/// Lab-frame forward solve with the dilated rate, storing every step.
pub fn solve_lab(
    p: &ModelParams,
    init: &FieldPair,
    grid: &Grid1D,
    t_final: f64,
) -> Result<SolveResult> {
    let lab = p.with_lambda(lab_rate(p)?);
    solve_forward(&lab, init, grid, t_final, &OutputTimes::EveryStep)
}

/// Smallest `n ≤ max_den` making `n·r` (nearly) an integer; the best approximation otherwise.
fn small_multiple(r: f64, max_den: u32) -> (u32, i64) {
    let mut best = (1, r.round() as i64, f64::INFINITY);
    for n in 1..=max_den {
        let x = n as f64 * r;
        let err = (x - x.round()).abs();
        if err < 1e-9 {
            return (n, x.round() as i64);
        }
        if err < best.2 {
            best = (n, x.round() as i64, err);
        }
    }
    (best.0, best.1)
}

/// Rectangular sampling grid in the moving frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MovingGrid {
    pub t0: f64,
    pub dt: f64,
    pub nt: usize,
    pub x0: f64,
    pub dx: f64,
    pub nx: usize,
}

impl MovingGrid {
    pub fn point(&self, j: usize, i: usize) -> SpacetimeEvent {
        SpacetimeEvent {
            t: self.t0 + j as f64 * self.dt,
            x: self.x0 + i as f64 * self.dx,
        }
    }

    /// Grid whose steps pull back to lab lattice vectors, centred on the image
    /// of `center_lab` and spanning about `±half_t`, `±half_x` in the moving frame.
    ///
    /// A step of `a·dt_lab/γ` in `t'` maps to the lab offset `(a dt, a (V/v) dx)`,
    /// and `k·dx_lab/γ` in `x'` maps to `(k (vV/c²) dt, k dx)`, so `a` and `k`
    /// are picked to make those offsets integral. Every sample then sits at the
    /// same fractional lattice position and the bilinear interpolation error
    /// cancels in the differences.
    pub fn commensurate(
        p: &ModelParams,
        b: &Boost,
        lab_dx: f64,
        center_lab: SpacetimeEvent,
        half_t: f64,
        half_x: f64,
    ) -> Result<Self> {
        let c = b.c();
        let lab_dt = lab_dx / p.v;
        let (a, _) = small_multiple(b.velocity() / p.v, 64);
        let (k, _) = small_multiple(p.v * b.velocity() / (c * c), 64);
        let dt = a as f64 * lab_dt / b.gamma();
        let dx = k as f64 * lab_dx / b.gamma();
        let ht = (half_t / dt).round().max(1.0) as usize;
        let hx = (half_x / dx).round().max(1.0) as usize;
        let center = b.apply(center_lab);
        Ok(MovingGrid {
            t0: center.t - ht as f64 * dt,
            dt,
            nt: 2 * ht + 1,
            x0: center.x - hx as f64 * dx,
            dx,
            nx: 2 * hx + 1,
        })
    }
}

/// Bilinear interpolation of a stored lab solution at lab event `e`.
struct LabField<'a> {
    lab: &'a SolveResult,
    tau: f64,
}

impl<'a> LabField<'a> {
    fn new(lab: &'a SolveResult) -> Result<Self> {
        let n = lab.times.len();
        if n < 2 {
            return Err(Error::InsufficientSnapshots(n));
        }
        let tau = lab.times[1] - lab.times[0];
        if lab
            .times
            .windows(2)
            .any(|w| ((w[1] - w[0]) - tau).abs() > 1e-9 * tau)
        {
            return Err(Error::InvalidArgument(
                "lab snapshots must be uniformly spaced".into(),
            ));
        }
        Ok(LabField { lab, tau })
    }

    /// `(f₊, f₋)` at a lab event, or `None` outside the stored window.
    fn sample(&self, e: SpacetimeEvent) -> Option<(f64, f64)> {
        let grid = &self.lab.grid;
        let nt = self.lab.times.len();
        let st = (e.t - self.lab.times[0]) / self.tau;
        let sx = (e.x - grid.center(0)) / grid.dx();
        let eps = 1e-9;
        if !(st >= -eps
            && st <= (nt - 1) as f64 + eps
            && sx >= -eps
            && sx <= (grid.nx() - 1) as f64 + eps)
        {
            return None;
        }
        let st = st.clamp(0.0, (nt - 1) as f64);
        let sx = sx.clamp(0.0, (grid.nx() - 1) as f64);
        let j = (st.floor() as usize).min(nt - 2);
        let i = (sx.floor() as usize).min(grid.nx() - 2);
        let (wt, wx) = (st - j as f64, sx - i as f64);
        let lerp = |f: &dyn Fn(&FieldPair) -> &Vec<f64>| {
            let a = f(&self.lab.fields[j]);
            let b = f(&self.lab.fields[j + 1]);
            (1.0 - wt) * ((1.0 - wx) * a[i] + wx * a[i + 1])
                + wt * ((1.0 - wx) * b[i] + wx * b[i + 1])
        };
        Some((lerp(&|f| &f.plus), lerp(&|f| &f.minus)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceResidual {
    pub plus: f64,
    pub minus: f64,
    /// Moving-frame points that entered the norm.
    pub points: usize,
}

/// L2 norm (over interior moving-frame points) of the transformed system's
/// residual, evaluated on the pulled-back lab solution by centred differences.
///
/// `lab` must come from [`solve_lab`] (or any solve with the dilated rate).
/// Points near the characteristics `x0 ± vt` of the given atom origins are skipped.
pub fn covariance_residual(
    lab: &SolveResult,
    p: &ModelParams,
    b: &Boost,
    moving: &MovingGrid,
    atom_origins: &[f64],
) -> Result<CovarianceResidual> {
    let rates = transformed_params(p, b)?;
    let field = LabField::new(lab)?;
    let (ht, hx) = (moving.dt, moving.dx);
    if moving.nt < 3 || moving.nx < 3 {
        return Err(Error::InvalidArgument(
            "moving grid needs at least 3×3 points".into(),
        ));
    }
    let lab_dx = lab.grid.dx();
    let reach = 2.0 * lab_dx + b.gamma() * (b.velocity().abs() * ht + hx);
    let at = |e: SpacetimeEvent| {
        field
            .sample(b.invert(e))
            .ok_or(Error::DomainNotCovered { t: e.t, x: e.x })
    };
    let (mut sp, mut sm, mut count) = (0.0, 0.0, 0usize);
    for j in 1..moving.nt - 1 {
        for i in 1..moving.nx - 1 {
            let c = moving.point(j, i);
            let lab_c = b.invert(c);
            if atom_origins.iter().any(|&x0| {
                (lab_c.x - (x0 + p.v * lab_c.t)).abs() <= reach
                    || (lab_c.x - (x0 - p.v * lab_c.t)).abs() <= reach
            }) {
                continue;
            }
            let g = at(c)?;
            let tp = at(moving.point(j + 1, i))?;
            let tm = at(moving.point(j - 1, i))?;
            let xp = at(moving.point(j, i + 1))?;
            let xm = at(moving.point(j, i - 1))?;
            let rp = (tp.0 - tm.0) / (2.0 * ht) + rates.v_prime * (xp.0 - xm.0) / (2.0 * hx)
                - rates.lambda_prime * (g.1 - g.0);
            let rm = (tp.1 - tm.1) / (2.0 * ht) + rates.v_doubleprime * (xp.1 - xm.1) / (2.0 * hx)
                - rates.lambda_doubleprime * (g.0 - g.1);
            sp += rp * rp;
            sm += rm * rm;
            count += 1;
        }
    }
    let w = ht * hx;
    Ok(CovarianceResidual {
        plus: (sp * w).sqrt(),
        minus: (sm * w).sqrt(),
        points: count,
    })
}

/// Observed convergence order `log₂(r_coarse / r_fine)` for a halving ladder.
pub fn observed_orders(residuals: &[f64]) -> Vec<f64> {
    residuals.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boost_values() {
        let b = Boost::new(0.0, 1.0).unwrap();
        let e = SpacetimeEvent::new(0.3, -1.2);
        assert_eq!(b.apply(e), e);

        let b = Boost::new(0.6, 1.0).unwrap();
        assert!((b.gamma() - 1.25).abs() < 1e-15);
        let e = b.apply(SpacetimeEvent::new(1.0, 0.0));
        assert!((e.t - 1.25).abs() < 1e-15 && (e.x + 0.75).abs() < 1e-15);
        let back = b.invert(e);
        assert!((back.t - 1.0).abs() < 1e-15 && back.x.abs() < 1e-15);

        // light ray x = ct stays on the cone
        let b = Boost::new(-0.35, 2.0).unwrap();
        let ray = b.apply(SpacetimeEvent::new(1.7, 3.4));
        assert!((ray.x - 2.0 * ray.t).abs() < 1e-14);
        assert!(Boost::new(1.0, 1.0).is_err());
        assert!((b.gamma() * contraction(-0.35, 2.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn velocity_addition_and_rates() {
        assert!((add_velocities(0.8, 0.5, 1.0) - 0.5).abs() <= 1e-15);
        assert_eq!(add_velocities(1.0, 0.7, 1.0), 1.0);
        assert_eq!(add_velocities(0.4, 0.0, 1.0), 0.4);
        assert_eq!(rescale_rate(2.0, 0.0, 1.0).unwrap(), 2.0);
        assert!((rescale_rate(1.0, 0.8, 1.0).unwrap() - 0.6).abs() <= 1e-15);
        assert!(rescale_rate(1.0, 1.0, 1.0).is_err());
        assert_eq!(proper_time_factor(0.0, 1.0).unwrap(), 1.0);
        assert!((proper_time_factor(0.6, 1.0).unwrap() - 1.25).abs() < 1e-15);
    }

    #[test]
    fn proper_time_composition_identity() {
        let (v, vf, c) = (0.8, 0.5, 1.0);
        let lhs = proper_time_factor(add_velocities(v, vf, c), c).unwrap();
        let rhs = (1.0 - v * vf / (c * c))
            * proper_time_factor(vf, c).unwrap()
            * proper_time_factor(v, c).unwrap();
        assert!((lhs - rhs).abs() < 1e-12 * rhs);
    }

    #[test]
    fn transformed_rates_spot_values() {
        let p = ModelParams::relativistic(0.8, 1.0, 1.0).unwrap();
        let r = transformed_params(&p, &Boost::new(0.5, 1.0).unwrap()).unwrap();
        assert!((r.v_prime - 0.5).abs() < 1e-15);
        assert!((r.v_doubleprime + 1.3 / 1.4).abs() < 1e-15);

        let r0 = transformed_params(&p, &Boost::new(0.0, 1.0).unwrap()).unwrap();
        assert_eq!((r0.v_prime, r0.v_doubleprime), (0.8, -0.8));
        assert!((r0.lambda_prime - 0.6).abs() < 1e-15);
        assert_eq!(r0.lambda_prime, r0.lambda_doubleprime);

        // mirror: V → −V swaps the roles of the two components
        let a = transformed_params(&p, &Boost::new(0.3, 1.0).unwrap()).unwrap();
        let m = transformed_params(&p, &Boost::new(-0.3, 1.0).unwrap()).unwrap();
        assert!((a.v_prime + m.v_doubleprime).abs() < 1e-15);
        assert!((a.lambda_prime - m.lambda_doubleprime).abs() < 1e-15);
    }

    #[test]
    fn commensurate_steps() {
        assert_eq!(small_multiple(0.3 / 0.8, 64), (8, 3));
        assert_eq!(small_multiple(0.24, 64), (25, 6));
        assert_eq!(small_multiple(0.0, 64), (1, 0));
    }

    proptest! {
        #[test]
        fn boost_round_trip_and_interval(vf in -0.99f64..0.99, t in -10.0f64..10.0, x in -10.0f64..10.0) {
            let b = Boost::new(vf, 1.0).unwrap();
            let e = SpacetimeEvent::new(t, x);
            let back = b.invert(b.apply(e));
            let scale = t.abs().max(x.abs()).max(1e-300);
            prop_assert!((back.t - t).abs() <= 1e-12 * scale * b.gamma() * b.gamma());
            prop_assert!((back.x - x).abs() <= 1e-12 * scale * b.gamma() * b.gamma());
        }

        #[test]
        fn rapidities_subtract(v in -0.95f64..0.95, vf in -0.95f64..0.95) {
            let w = add_velocities(v, vf, 1.0);
            prop_assert!((w.atanh() - (v.atanh() - vf.atanh())).abs() < 1e-12);
            prop_assert!(w.abs() < 1.0);
        }

        #[test]
        fn rescaled_rate_decreases_with_speed(a in 0.0f64..0.99, b in 0.0f64..0.99) {
            prop_assume!(a < b);
            prop_assert!(rescale_rate(1.0, b, 1.0).unwrap() < rescale_rate(1.0, a, 1.0).unwrap());
        }
    }
}
