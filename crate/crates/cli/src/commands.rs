use anyhow::Result;
use serde::Serialize;
use telegraph_core::lorentz::{covariance_residual, observed_orders, solve_lab, Boost, MovingGrid};
use telegraph_core::mc::{empirical_density, estimate_moments, EnsembleConfig};
use telegraph_core::moments::{
    diffusive_limit_study, mean_closed_form, second_moment_closed_form, DiffusiveStudy,
    InitialMoments,
};
use telegraph_core::pde::{
    gaussian_fields, point_mass, solve_forward, telegraph_residual, OutputTimes, SolveResult,
};
use telegraph_core::quantum::{
    averaged_density, expected_observable, lightcone_violation_mass, WavePacket,
};
use telegraph_core::strategy::{StrategyOptions, StrategyRegistry};
use telegraph_core::{Error, Grid1D, ModelParams, SpacetimeEvent, Start, VelocitySign};

use crate::output::{Table, Writer};
use crate::{
    Common, CovarianceArgs, InitialArg, LimitArgs, PacketArg, QuantumArgs, SimulateArgs, SolveArgs,
    StartArg,
};

impl Common {
    fn params(&self) -> Result<ModelParams> {
        Ok(match self.c {
            Some(c) => ModelParams::relativistic(self.v, self.lambda, c)?,
            None => ModelParams::new(self.v, self.lambda)?,
        })
    }

    fn check_time(&self) -> Result<()> {
        if !(self.t >= 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidArgument(format!("--t must be >= 0, got {}", self.t)).into());
        }
        Ok(())
    }

    fn ensemble(&self) -> EnsembleConfig {
        let cfg = EnsembleConfig::new(self.n_paths, self.seed);
        match self.workers {
            Some(w) => cfg.with_workers(w),
            None => cfg,
        }
    }

    /// Grid from the flags, falling back to `[lo, hi]` and `nx_default` cells.
    fn grid(&self, lo: f64, hi: f64, nx_default: usize) -> Result<Grid1D> {
        Ok(Grid1D::new(
            self.x_min.unwrap_or(lo),
            self.x_max.unwrap_or(hi),
            self.nx.unwrap_or(nx_default),
        )?)
    }

    /// Like [`Common::grid`], but when no grid flag is given the spacing is
    /// chosen so that `reach = v t` is a whole number of cells (and `t` a whole
    /// number of solver steps).
    fn lattice(&self, lo: f64, hi: f64, reach: f64, nx_default: usize) -> Result<Grid1D> {
        if self.x_min.is_some() || self.x_max.is_some() || self.nx.is_some() || !(reach > 0.0) {
            return self.grid(lo, hi, nx_default);
        }
        let dx = reach / (reach * nx_default as f64 / (hi - lo)).ceil();
        Ok(Grid1D::with_spacing(
            lo,
            dx,
            ((hi - lo) / dx).ceil() as usize,
        )?)
    }
}

fn start_of(s: StartArg) -> Start {
    match s {
        StartArg::Plus => Start::Signed(VelocitySign::Plus),
        StartArg::Minus => Start::Signed(VelocitySign::Minus),
        StartArg::Symmetric => Start::Symmetric,
    }
}

#[derive(Serialize)]
struct Compared {
    estimate: f64,
    std_error: f64,
    closed_form: f64,
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let c = &args.common;
    let p = c.params()?;
    c.check_time()?;
    let reach = p.v * c.t;
    let grid = c.grid(
        args.x0 - 1.25 * reach - 0.25,
        args.x0 + 1.25 * reach + 0.25,
        400,
    )?;
    let start = start_of(args.start);
    let cfg = c.ensemble();
    let d = empirical_density(args.x0, start, c.t, &p, &grid, &cfg)?;
    let [m1, m2] = estimate_moments(args.x0, start, c.t, &p, &cfg)?;

    let im = InitialMoments::new(args.x0, args.x0 * args.x0)?;
    let (wp, wm) = start.weights();
    let closed =
        |f: &dyn Fn(VelocitySign) -> f64| wp * f(VelocitySign::Plus) + wm * f(VelocitySign::Minus);
    let mean = closed(&|s| mean_closed_form(&im, &p, c.t, s));
    let second = closed(&|s| second_moment_closed_form(&im, &p, c.t, s));

    let mut table = Table::new(&["x", "f_plus", "f_minus"]);
    for i in 0..grid.nx() {
        table.push(vec![grid.center(i), d.fields.plus[i], d.fields.minus[i]]);
    }
    for (name, a) in [("atom_plus", d.atom_plus), ("atom_minus", d.atom_minus)] {
        table.notes.push(format!(
            "{name}: position={} weight={} std_error={}",
            a.position, a.weight, a.std_error
        ));
    }
    let w = Writer::new(&c.out, c.format, args)?;
    w.table("density", &table)?;
    w.summary(
        "moments",
        &serde_json::json!({
            "mean": Compared { estimate: m1.value, std_error: m1.std_error, closed_form: mean },
            "second_moment": Compared { estimate: m2.value, std_error: m2.std_error, closed_form: second },
            "atom_plus": d.atom_plus,
            "atom_minus": d.atom_minus,
            "n_paths": d.n_paths,
        }),
    )
}

/// Keeps the snapshots with the given step indices.
fn select(r: &SolveResult, idx: &[usize]) -> SolveResult {
    SolveResult {
        times: idx.iter().map(|&k| r.times[k]).collect(),
        fields: idx.iter().map(|&k| r.fields[k].clone()).collect(),
        ..r.clone()
    }
}

pub fn solve(args: &SolveArgs) -> Result<()> {
    let c = &args.common;
    let p = c.params()?;
    c.check_time()?;
    if args.snapshots < 2 {
        return Err(Error::InvalidArgument("--snapshots must be >= 2".into()).into());
    }
    let reach = p.v * c.t;
    let (init_half, origins) = match args.initial {
        InitialArg::Point => (0.25, vec![args.x0]),
        InitialArg::Gaussian => (8.0 * args.width, vec![]),
    };
    let grid = c.lattice(
        args.x0 - reach - init_half,
        args.x0 + reach + init_half,
        reach,
        512,
    )?;
    let start = start_of(args.start);
    let init = match args.initial {
        InitialArg::Point => point_mass(&grid, args.x0, start)?,
        InitialArg::Gaussian => {
            if !(args.width > 0.0) {
                return Err(Error::InvalidArgument("--width must be positive".into()).into());
            }
            gaussian_fields(&grid, args.x0, args.width, start)
        }
    };
    let full = solve_forward(&p, &init, &grid, c.t, &OutputTimes::EveryStep)?;
    let steps = full.meta.steps;
    let stride = (steps / (args.snapshots - 1)).max(1);
    let uniform: Vec<usize> = (0..=steps).step_by(stride).collect();
    let snaps = select(&full, &uniform);
    let mut written = uniform.clone();
    if written.last() != Some(&steps) {
        written.push(steps);
    }
    let out = select(&full, &written);
    let residuals = if snaps.times.len() >= 3 {
        telegraph_residual(&snaps, &p, &origins)?
    } else {
        Vec::new()
    };

    let mut table = Table::new(&["t", "x", "f_plus", "f_minus"]);
    for (t, f) in out.times.iter().zip(&out.fields) {
        for i in 0..grid.nx() {
            table.push(vec![*t, grid.center(i), f.plus[i], f.minus[i]]);
        }
    }
    let w = Writer::new(&c.out, c.format, args)?;
    w.table("snapshots", &table)?;
    w.summary(
        "solve",
        &serde_json::json!({
            "dx": full.meta.dx,
            "dt": full.meta.dt,
            "steps": steps,
            "t_final": full.times[full.times.len() - 1],
            "initial_mass": full.initial_mass,
            "masses": out.masses(),
            "mass_drift": full.mass_drift(),
            "lost_mass": full.lost_mass,
            "min_value": full.min_value(),
            "telegraph_residual": residuals,
        }),
    )
}

#[derive(Serialize)]
struct CovarianceLevel {
    dx: f64,
    points: usize,
    residual_plus: f64,
    residual_minus: f64,
}

pub fn covariance(args: &CovarianceArgs) -> Result<()> {
    let c = &args.common;
    let light = c.c.unwrap_or(1.0);
    let p = ModelParams::relativistic(c.v, c.lambda, light)?;
    let boost = Boost::new(args.frame_velocity, light)?;
    c.check_time()?;
    if args.levels < 2 || !(args.width > 0.0) {
        return Err(Error::InvalidArgument("need --levels >= 2 and --width > 0".into()).into());
    }
    let (lo, hi) = (c.x_min.unwrap_or(-7.0), c.x_max.unwrap_or(7.0));
    let base_nx =
        c.nx.unwrap_or(((hi - lo) * 128.0).round().max(2.0) as usize);
    let mut levels = Vec::with_capacity(args.levels);
    for k in 0..args.levels {
        let grid = Grid1D::new(lo, hi, base_nx << k)?;
        let dx = grid.dx();
        let dt = dx / p.v;
        let init = gaussian_fields(&grid, 0.5 * (lo + hi), args.width, Start::Symmetric);
        let lab = solve_lab(&p, &init, &grid, c.t)?;
        // centre off the lattice so no sample lands on a node
        let centre = SpacetimeEvent::new(0.5 * c.t + 0.37 * dt, 0.5 * (lo + hi) + 0.29 * dx);
        let moving = MovingGrid::commensurate(&p, &boost, dx, centre, args.half_t, args.half_x)?;
        let r = covariance_residual(&lab, &p, &boost, &moving, &[])?;
        levels.push(CovarianceLevel {
            dx,
            points: r.points,
            residual_plus: r.plus,
            residual_minus: r.minus,
        });
    }
    let plus: Vec<f64> = levels.iter().map(|l| l.residual_plus).collect();
    let minus: Vec<f64> = levels.iter().map(|l| l.residual_minus).collect();
    let (op, om) = (observed_orders(&plus), observed_orders(&minus));

    let mut table = Table::new(&[
        "dx",
        "residual_plus",
        "residual_minus",
        "observed_order_plus",
        "observed_order_minus",
    ]);
    for (k, l) in levels.iter().enumerate() {
        let order = |o: &[f64]| k.checked_sub(1).map(|j| o[j]);
        table.rows.push(vec![
            Some(l.dx),
            Some(l.residual_plus),
            Some(l.residual_minus),
            order(&op),
            order(&om),
        ]);
    }
    let w = Writer::new(&c.out, c.format, args)?;
    w.table("covariance", &table)?;
    w.summary(
        "covariance_summary",
        &serde_json::json!({
            "gamma": boost.gamma(),
            "levels": levels,
            "observed_order_plus": op,
            "observed_order_minus": om,
        }),
    )
}

#[derive(Serialize)]
struct Observables {
    mean: f64,
    mean_closed_form: f64,
    second_moment: f64,
    second_moment_closed_form: f64,
    stdev: f64,
    stdev_closed_form: f64,
}

pub fn quantum(args: &QuantumArgs) -> Result<()> {
    let c = &args.common;
    let p = c.params()?;
    c.check_time()?;
    let packet = match args.packet {
        PacketArg::Uniform => WavePacket::uniform(args.a, args.b)?,
        PacketArg::Gaussian => {
            WavePacket::truncated_gaussian(0.5 * (args.a + args.b), args.width, args.a, args.b)?
        }
        PacketArg::Cosine => {
            WavePacket::raised_cosine(0.5 * (args.a + args.b), 0.5 * (args.b - args.a))?
        }
    };
    let probe = match (args.probe_lo, args.probe_hi) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => {
            return Err(Error::InvalidArgument("give both --probe-lo and --probe-hi".into()).into())
        }
    };
    let registry = StrategyRegistry::with_defaults();
    let method = registry.create(
        &args.method,
        &StrategyOptions {
            ensemble: c.ensemble(),
        },
    )?;

    let (a, b) = packet.support();
    let reach = p.v * c.t;
    let (mut lo, mut hi) = (a - reach - 0.25, b + reach + 0.25);
    if let Some((pl, ph)) = probe {
        lo = lo.min(pl - 0.25);
        hi = hi.max(ph + 0.25);
    }
    let grid = c.lattice(lo, hi, reach, 512)?;
    let rho = averaged_density(&packet, &p, c.t, &grid, method.as_ref())?;

    let im = packet.moments();
    let observe = |sign: VelocitySign| {
        let r = rho.rho(sign);
        let mean = expected_observable(|x| x, r, &grid);
        let second = expected_observable(|x| x * x, r, &grid);
        let mean_cf = mean_closed_form(&im, &p, rho.t, sign);
        let second_cf = second_moment_closed_form(&im, &p, rho.t, sign);
        Observables {
            mean,
            mean_closed_form: mean_cf,
            second_moment: second,
            second_moment_closed_form: second_cf,
            stdev: (second - mean * mean).max(0.0).sqrt(),
            stdev_closed_form: (second_cf - mean_cf * mean_cf).max(0.0).sqrt(),
        }
    };
    // whole cells outside (a − vt, b + vt)
    let edge_below = |x: f64| {
        grid.edge((((x - grid.x_min()) / grid.dx()).floor().max(0.0) as usize).min(grid.nx()))
    };
    let edge_above = |x: f64| {
        grid.edge((((x - grid.x_min()) / grid.dx()).ceil().max(0.0) as usize).min(grid.nx()))
    };
    let outside = [
        (grid.x_min(), edge_below(a - reach)),
        (edge_above(b + reach), grid.x_max()),
    ]
    .into_iter()
    .filter(|(l, h)| l < h)
    .map(|iv| lightcone_violation_mass(&rho, &packet, &p, iv))
    .collect::<telegraph_core::Result<Vec<_>>>()?;
    let cone_violation = outside.iter().map(|r| r.plus + r.minus).sum::<f64>();
    let probe_report = probe
        .map(|iv| lightcone_violation_mass(&rho, &packet, &p, iv))
        .transpose()?;

    let mut table = Table::new(&["x", "rho_plus", "rho_minus"]);
    for i in 0..grid.nx() {
        table.push(vec![grid.center(i), rho.rho_plus[i], rho.rho_minus[i]]);
    }
    let w = Writer::new(&c.out, c.format, args)?;
    w.table("averaged_density", &table)?;
    w.summary(
        "quantum",
        &serde_json::json!({
            "method": method.name(),
            "t": rho.t,
            "plus": observe(VelocitySign::Plus),
            "minus": observe(VelocitySign::Minus),
            "cone_violation_mass": cone_violation,
            "probe": probe_report,
        }),
    )
}

pub fn limit(args: &LimitArgs) -> Result<()> {
    let c = &args.common;
    if args.lambdas.is_empty() {
        return Err(Error::InvalidArgument("--lambdas must not be empty".into()).into());
    }
    if !(args.sigma > 0.0) || !(c.t > 0.0) {
        return Err(Error::InvalidArgument("--sigma and --t must be positive".into()).into());
    }
    if let Some(&l) = args.lambdas.iter().find(|&&l| !(l > 0.0 && l.is_finite())) {
        return Err(Error::NegativeRate(l).into());
    }
    let table_data =
        diffusive_limit_study(&DiffusiveStudy::new(args.sigma, args.lambdas.clone(), c.t))?;
    let mut table = Table::new(&["lambda", "v", "dx", "steps", "l1"]);
    for r in &table_data.rows {
        table.push(vec![r.lambda, r.v, r.dx, r.steps as f64, r.l1]);
    }
    table.notes.push(format!(
        "strictly_decreasing: {}",
        table_data.strictly_decreasing
    ));
    let w = Writer::new(&c.out, c.format, args)?;
    w.table("limit", &table)?;
    w.summary("limit_summary", &table_data)
}
