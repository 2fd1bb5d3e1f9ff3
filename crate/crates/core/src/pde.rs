//! Chapman-Kolmogorov solver at unit CFL.
//!
//! With `dt = dx / v` the transport part is an exact one-cell shift, and the
//! switching part is the exact 2×2 matrix exponential. The two are combined by
//! Strang splitting (half switch, shift, half switch). Advection adds no
//! numerical diffusion, so zero cells outside the light cone stay exactly zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{FieldPair, Grid1D, ModelParams, Start};

/// Mass allowed to leave through the boundary, relative to the total.
pub const BOUNDARY_LOSS_TOL: f64 = 1e-12;

/// Exact relaxation `exp(dt λ [[-1, 1], [1, -1]])` applied pointwise.
pub fn switching_step(fields: &mut FieldPair, lambda: f64, dt: f64) {
    if lambda == 0.0 || dt == 0.0 {
        return;
    }
    // (1 - μ)/2 with μ = e^{-2λ dt}
    let b = -0.5 * (-2.0 * lambda * dt).exp_m1();
    for (p, m) in fields.plus.iter_mut().zip(fields.minus.iter_mut()) {
        let d = b * (*p - *m);
        *p -= d;
        *m += d;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Forward,
    Backward,
}

/// One Strang step. Returns the mass pushed off the grid.
fn strang_step(f: &mut FieldPair, lambda: f64, dt: f64, dir: Direction) -> f64 {
    switching_step(f, lambda, 0.5 * dt);
    let n = f.len();
    let lost = match dir {
        Direction::Forward => {
            f.plus.rotate_right(1);
            f.minus.rotate_left(1);
            let lost = f.plus[0] + f.minus[n - 1];
            f.plus[0] = 0.0;
            f.minus[n - 1] = 0.0;
            lost
        }
        Direction::Backward => {
            f.plus.rotate_left(1);
            f.minus.rotate_right(1);
            let lost = f.plus[n - 1] + f.minus[0];
            f.plus[n - 1] = 0.0;
            f.minus[0] = 0.0;
            lost
        }
    };
    switching_step(f, lambda, 0.5 * dt);
    lost
}

/// Which steps to keep in a [`SolveResult`].
#[derive(Debug, Clone, PartialEq)]
pub enum OutputTimes {
    /// Every step, including the initial state.
    EveryStep,
    /// Every `k`-th step, plus the initial and final states.
    Stride(usize),
    /// Requested times, snapped to the nearest step.
    At(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeMeta {
    pub dx: f64,
    pub dt: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub grid: Grid1D,
    pub times: Vec<f64>,
    pub fields: Vec<FieldPair>,
    pub meta: SchemeMeta,
    pub initial_mass: f64,
    /// Mass that left through the boundary over the whole solve.
    pub lost_mass: f64,
}

impl SolveResult {
    pub fn masses(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        self.fields.iter().map(|f| f.mass(dx)).collect()
    }

    /// Largest `|mass(t) - mass(0)| / mass(0)` over the stored times.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.initial_mass;
        if m0 == 0.0 {
            return 0.0;
        }
        self.masses()
            .iter()
            .map(|m| (m - m0).abs() / m0)
            .fold(0.0, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.fields
            .iter()
            .map(FieldPair::min_value)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn last(&self) -> &FieldPair {
        self.fields
            .last()
            .expect("a solve stores at least one snapshot")
    }

    /// Snapshot index whose time is closest to `t`.
    pub fn index_near(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, &s) in self.times.iter().enumerate() {
            if (s - t).abs() < (self.times[best] - t).abs() {
                best = i;
            }
        }
        best
    }
}

/// Number of unit-CFL steps for `t_final`, snapping (with a warning) when it is not a multiple of `dt`.
fn step_count(t_final: f64, dt: f64) -> Result<usize> {
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "t_final must be >= 0, got {t_final}"
        )));
    }
    let n = (t_final / dt).round();
    if (n * dt - t_final).abs() > 1e-9 * dt.max(t_final) {
        log::warn!(
            "t_final = {t_final} is not a multiple of dt = {dt}; snapped to {}",
            n * dt
        );
    }
    Ok(n as usize)
}

fn output_steps(output: &OutputTimes, steps: usize, dt: f64) -> Vec<usize> {
    let mut idx: Vec<usize> = match output {
        OutputTimes::EveryStep => (0..=steps).collect(),
        OutputTimes::Stride(k) => {
            let k = (*k).max(1);
            let mut v: Vec<usize> = (0..=steps).step_by(k).collect();
            v.push(steps);
            v
        }
        OutputTimes::At(ts) => ts
            .iter()
            .map(|&t| {
                let k = (t / dt).round().max(0.0);
                if (k * dt - t).abs() > 1e-9 * dt.max(t.abs()) {
                    log::warn!("output time {t} snapped to {}", k * dt);
                }
                (k as usize).min(steps)
            })
            .collect(),
    };
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Solves the forward system (f₊ moves right, f₋ moves left) up to `t_final`.
pub fn solve_forward(
    p: &ModelParams,
    init: &FieldPair,
    grid: &Grid1D,
    t_final: f64,
    output: &OutputTimes,
) -> Result<SolveResult> {
    if init.len() != grid.nx() {
        return Err(Error::InvalidArgument(format!(
            "initial data has {} cells, grid has {}",
            init.len(),
            grid.nx()
        )));
    }
    let dx = grid.dx();
    let dt = dx / p.v;
    debug_assert!(
        (p.v * dt / dx - 1.0).abs() < 1e-12,
        "scheme requires unit CFL"
    );
    let steps = step_count(t_final, dt)?;
    let keep = output_steps(output, steps, dt);

    let initial_mass = init.mass(dx);
    let mut f = init.clone();
    let mut lost = 0.0;
    let mut times = Vec::with_capacity(keep.len());
    let mut fields = Vec::with_capacity(keep.len());
    let mut next = keep.iter().peekable();
    for k in 0..=steps {
        if k > 0 {
            lost += strang_step(&mut f, p.lambda, dt, Direction::Forward) * dx;
        }
        if next.peek() == Some(&&k) {
            next.next();
            times.push(k as f64 * dt);
            fields.push(f.clone());
        }
    }
    if lost > BOUNDARY_LOSS_TOL * initial_mass.abs() {
        return Err(Error::MassLeftGrid {
            lost,
            total: initial_mass,
        });
    }
    Ok(SolveResult {
        grid: *grid,
        times,
        fields,
        meta: SchemeMeta { dx, dt, steps },
        initial_mass,
        lost_mass: lost,
    })
}

/// Expectation functions `u(t, x, ±v) = E^{x,±v}[F(x(t), ν(t))]` on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardSolution {
    pub grid: Grid1D,
    pub t: f64,
    pub meta: SchemeMeta,
    pub u_plus: Vec<f64>,
    pub u_minus: Vec<f64>,
}

impl BackwardSolution {
    /// Linear interpolation between cell centres (clamped at the ends).
    pub fn value_at(&self, sign: crate::params::VelocitySign, x: f64) -> f64 {
        let u = match sign {
            crate::params::VelocitySign::Plus => &self.u_plus,
            crate::params::VelocitySign::Minus => &self.u_minus,
        };
        let s = ((x - self.grid.x_min()) / self.grid.dx() - 0.5).clamp(0.0, (u.len() - 1) as f64);
        let i = (s.floor() as usize).min(u.len() - 2);
        let w = s - i as f64;
        (1.0 - w) * u[i] + w * u[i + 1]
    }
}

/// Solves the backward system with terminal data `F(·, +v)`, `F(·, -v)`.
///
/// The data are functions, so the grid is padded internally by one cell per
/// step on each side; no boundary condition is involved.
pub fn solve_backward<Fp, Fm>(
    p: &ModelParams,
    f_plus: Fp,
    f_minus: Fm,
    grid: &Grid1D,
    t_final: f64,
) -> Result<BackwardSolution>
where
    Fp: Fn(f64) -> f64,
    Fm: Fn(f64) -> f64,
{
    let dx = grid.dx();
    let dt = dx / p.v;
    let steps = step_count(t_final, dt)?;
    let n = grid.nx() + 2 * steps;
    let x_at = |j: usize| grid.x_min() + (j as f64 - steps as f64 + 0.5) * dx;
    let mut u = FieldPair {
        plus: (0..n).map(|j| f_plus(x_at(j))).collect(),
        minus: (0..n).map(|j| f_minus(x_at(j))).collect(),
    };
    for _ in 0..steps {
        strang_step(&mut u, p.lambda, dt, Direction::Backward);
    }
    let keep = steps..steps + grid.nx();
    Ok(BackwardSolution {
        grid: *grid,
        t: steps as f64 * dt,
        meta: SchemeMeta { dx, dt, steps },
        u_plus: u.plus[keep.clone()].to_vec(),
        u_minus: u.minus[keep].to_vec(),
    })
}

/// L2 norms of the telegraph-equation residual at one interior snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelegraphResidual {
    pub t: f64,
    pub plus: f64,
    pub minus: f64,
}

/// Cells within this many cells of an atom characteristic are skipped.
const ATOM_COLLAR_CELLS: f64 = 2.0;

/// Residual of `∂²ₜf + 2λ∂ₜf − v²∂²ₓf` by centred differences for each stored
/// snapshot triple. `atom_origins` lists start points of point masses whose
/// characteristics `x0 ± v t` must be excluded.
pub fn telegraph_residual(
    result: &SolveResult,
    p: &ModelParams,
    atom_origins: &[f64],
) -> Result<Vec<TelegraphResidual>> {
    let nt = result.times.len();
    if nt < 3 {
        return Err(Error::InsufficientSnapshots(nt));
    }
    let h = result.times[1] - result.times[0];
    if h <= 0.0
        || result
            .times
            .windows(2)
            .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h)
    {
        return Err(Error::InvalidArgument(
            "snapshots must be uniformly spaced".into(),
        ));
    }
    let grid = &result.grid;
    let dx = grid.dx();
    let v2 = p.v * p.v;
    let reach = (ATOM_COLLAR_CELLS + 1.0) * dx;
    let mut out = Vec::with_capacity(nt - 2);
    for n in 1..nt - 1 {
        let (prev, cur, next) = (
            &result.fields[n - 1],
            &result.fields[n],
            &result.fields[n + 1],
        );
        let near_atom = |x: f64| {
            atom_origins.iter().any(|&x0| {
                [-1.0, 0.0, 1.0].iter().any(|&k| {
                    let tau = result.times[n] + k * h;
                    (x - (x0 + p.v * tau)).abs() <= reach || (x - (x0 - p.v * tau)).abs() <= reach
                })
            })
        };
        let norm = |fp: &[f64], fc: &[f64], fn_: &[f64]| {
            let mut s = 0.0;
            for i in 1..grid.nx() - 1 {
                if near_atom(grid.center(i)) {
                    continue;
                }
                let ftt = (fn_[i] - 2.0 * fc[i] + fp[i]) / (h * h);
                let ft = (fn_[i] - fp[i]) / (2.0 * h);
                let fxx = (fc[i + 1] - 2.0 * fc[i] + fc[i - 1]) / (dx * dx);
                let r = ftt + 2.0 * p.lambda * ft - v2 * fxx;
                s += r * r;
            }
            (s * dx).sqrt()
        };
        out.push(TelegraphResidual {
            t: result.times[n],
            plus: norm(&prev.plus, &cur.plus, &next.plus),
            minus: norm(&prev.minus, &cur.minus, &next.minus),
        });
    }
    Ok(out)
}

/// Unit point mass at `x0` split by the start law. When `x0` is a cell edge
/// the mass is shared equally between the two adjacent cells.
pub fn point_mass(grid: &Grid1D, x0: f64, start: Start) -> Result<FieldPair> {
    grid.require_interval(x0, x0)?;
    let dx = grid.dx();
    let s = (x0 - grid.x_min()) / dx;
    let mut cells = Vec::new();
    let k = s.round();
    if (s - k).abs() < 1e-9 && k >= 1.0 && (k as usize) < grid.nx() {
        cells.push((k as usize - 1, 0.5));
        cells.push((k as usize, 0.5));
    } else {
        cells.push((grid.cell_of(x0).expect("checked above"), 1.0));
    }
    let (wp, wm) = start.weights();
    let mut f = FieldPair::zeros(grid.nx());
    for (i, w) in cells {
        f.plus[i] += wp * w / dx;
        f.minus[i] += wm * w / dx;
    }
    Ok(f)
}

/// Cell averages of a normal density with the given mean and standard deviation.
pub fn gaussian_cells(grid: &Grid1D, mean: f64, std: f64) -> Vec<f64> {
    let dx = grid.dx();
    let cdf = |x: f64| 0.5 * libm::erfc(-(x - mean) / (std * std::f64::consts::SQRT_2));
    (0..grid.nx())
        .map(|i| (cdf(grid.edge(i + 1)) - cdf(grid.edge(i))) / dx)
        .collect()
}

/// Gaussian initial data split by the start law.
pub fn gaussian_fields(grid: &Grid1D, mean: f64, std: f64, start: Start) -> FieldPair {
    let g = gaussian_cells(grid, mean, std);
    let (wp, wm) = start.weights();
    FieldPair {
        plus: g.iter().map(|x| wp * x).collect(),
        minus: g.iter().map(|x| wm * x).collect(),
    }
}
