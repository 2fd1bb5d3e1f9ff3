//! Exact event-driven Monte Carlo for the velocity-switching process.
//!
//! Paths are piecewise linear, so nothing is discretized in time: switch
//! epochs are drawn as cumulative exponential gaps and positions follow by
//! summing signed segment lengths. Ensembles are split into fixed blocks of
//! path indices; each path draws from `path_rng(seed, index)` and block
//! results are merged in index order, so every estimator is bit-identical
//! for any worker count.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{path_rng, FieldPair, Grid1D, ModelParams, RngSeed, Start, VelocitySign};

/// Paths per work item. Fixed so the reduction tree does not depend on scheduling.
const BLOCK: u64 = 4096;

/// One sampled trajectory: the initial sign and the ordered switch epochs in `(0, t_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchRecord {
    pub sign0: VelocitySign,
    pub times: Vec<f64>,
    pub t_max: f64,
}

impl SwitchRecord {
    /// A record with explicitly given switch times (must be strictly increasing in `(0, t_max]`).
    pub fn from_times(sign0: VelocitySign, times: Vec<f64>, t_max: f64) -> Result<Self> {
        let mut prev = 0.0;
        for &s in &times {
            if !(s > prev && s <= t_max) {
                return Err(Error::InvalidArgument(format!(
                    "switch times must be strictly increasing in (0, {t_max}]"
                )));
            }
            prev = s;
        }
        Ok(SwitchRecord {
            sign0,
            times,
            t_max,
        })
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t >= 0.0 && t <= self.t_max {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange {
                t,
                t_max: self.t_max,
            })
        }
    }

    /// Number of switches in `(0, t]`.
    pub fn switches_by(&self, t: f64) -> usize {
        self.times.partition_point(|&s| s <= t)
    }

    pub fn sign_at(&self, t: f64) -> Result<VelocitySign> {
        self.check_time(t)?;
        Ok(self.sign0.after_switches(self.switches_by(t)))
    }

    /// `∫₀ᵗ ν(s) ds`.
    pub fn displacement_integral(&self, v: f64, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let mut now = 0.0;
        let mut sign = self.sign0.value();
        let mut signed_time = 0.0;
        for &s in self.times.iter().take_while(|&&s| s <= t) {
            signed_time += sign * (s - now);
            now = s;
            sign = -sign;
        }
        signed_time += sign * (t - now);
        Ok(v * signed_time.clamp(-t, t))
    }

    /// Position and velocity sign at time `t` for a path started at `x0`.
    pub fn position_at(&self, x0: f64, v: f64, t: f64) -> Result<(f64, VelocitySign)> {
        let d = self.displacement_integral(v, t)?;
        Ok((x0 + d, self.sign0.after_switches(self.switches_by(t))))
    }
}

#[inline]
fn exp_gap<R: Rng + ?Sized>(rng: &mut R, lambda: f64) -> f64 {
    let e: f64 = Exp1.sample(rng);
    e / lambda
}

/// Draws switch epochs up to `t_max` with i.i.d. Exponential(λ) gaps.
pub fn sample_switches<R: Rng + ?Sized>(
    p: &ModelParams,
    sign0: VelocitySign,
    t_max: f64,
    rng: &mut R,
) -> SwitchRecord {
    let mut times = Vec::new();
    if p.lambda > 0.0 {
        let mut now = 0.0;
        loop {
            let next = now + exp_gap(rng, p.lambda);
            if next > t_max {
                break;
            }
            times.push(next);
            now = next;
        }
    }
    SwitchRecord {
        sign0,
        times,
        t_max,
    }
}

/// End state of one path at time `t`, without storing the switch list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint {
    pub displacement: f64,
    pub sign: VelocitySign,
    pub switches: usize,
}

/// Streaming counterpart of [`sample_switches`] followed by
/// [`SwitchRecord::position_at`]; consumes the stream identically.
pub fn sample_endpoint<R: Rng + ?Sized>(
    p: &ModelParams,
    sign0: VelocitySign,
    t: f64,
    rng: &mut R,
) -> Endpoint {
    let mut now = 0.0;
    let mut sign = sign0.value();
    let mut signed_time = 0.0;
    let mut switches = 0;
    if p.lambda > 0.0 {
        loop {
            let next = now + exp_gap(rng, p.lambda);
            if next > t {
                break;
            }
            signed_time += sign * (next - now);
            now = next;
            sign = -sign;
            switches += 1;
        }
    }
    signed_time += sign * (t - now);
    Endpoint {
        displacement: p.v * signed_time.clamp(-t, t),
        sign: sign0.after_switches(switches),
        switches,
    }
}

fn draw_sign0<R: Rng + ?Sized>(start: Start, rng: &mut R) -> VelocitySign {
    match start {
        Start::Signed(s) => s,
        Start::Symmetric => {
            if rng.random::<bool>() {
                VelocitySign::Plus
            } else {
                VelocitySign::Minus
            }
        }
    }
}

/// Ensemble size, seed and (optional) worker count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n_paths: u64,
    pub seed: RngSeed,
    pub workers: Option<usize>,
}

impl EnsembleConfig {
    pub fn new(n_paths: u64, seed: u64) -> Self {
        EnsembleConfig {
            n_paths,
            seed: RngSeed(seed),
            workers: None,
        }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        EnsembleConfig {
            workers: Some(workers),
            ..self
        }
    }

    fn check(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be >= 1".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be >= 1".into()));
        }
        Ok(())
    }

    fn blocks(&self) -> Vec<Range<u64>> {
        (0..self.n_paths.div_ceil(BLOCK))
            .map(|b| b * BLOCK..((b + 1) * BLOCK).min(self.n_paths))
            .collect()
    }
}

/// Maps `f` over the fixed path blocks (in parallel) and returns results in block order.
pub(crate) fn map_blocks<A, F>(cfg: &EnsembleConfig, f: F) -> Result<Vec<A>>
where
    A: Send,
    F: Fn(Range<u64>) -> A + Sync + Send,
{
    cfg.check()?;
    let blocks = cfg.blocks();
    let run = || blocks.into_par_iter().map(&f).collect::<Vec<A>>();
    match cfg.workers {
        None => Ok(run()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(run))
        }
    }
}

/// Single-pass mean/variance accumulator (Welford), mergeable.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    #[inline]
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &RunningStats) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += delta * w;
        self.m2 += other.m2 + delta * delta * self.n as f64 * w;
        self.n = n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero for fewer than two samples.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn estimate(&self) -> EnsembleEstimate {
        EnsembleEstimate {
            value: self.mean,
            std_error: (self.variance() / self.n as f64).sqrt(),
            n_paths: self.n,
        }
    }
}

/// Sample mean with its standard error `sd / sqrt(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: u64,
}

impl EnsembleEstimate {
    /// Whether `target` lies within `k` standard errors (an exact match always passes).
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Estimates `E[F_k(x(t), ν(t))]` for several observables from one ensemble.
pub fn estimate_vector<const K: usize, F>(
    f: F,
    x0: f64,
    start: Start,
    t: f64,
    p: &ModelParams,
    cfg: &EnsembleConfig,
) -> Result<[EnsembleEstimate; K]>
where
    F: Fn(f64, VelocitySign) -> [f64; K] + Sync + Send,
{
    check_time(t)?;
    let partials = map_blocks(cfg, |range| {
        let mut acc = [RunningStats::default(); K];
        for i in range {
            let mut rng = path_rng(cfg.seed, i);
            let sign0 = draw_sign0(start, &mut rng);
            let end = sample_endpoint(p, sign0, t, &mut rng);
            let values = f(x0 + end.displacement, end.sign);
            for (a, v) in acc.iter_mut().zip(values) {
                a.push(v);
            }
        }
        acc
    })?;
    let mut total = [RunningStats::default(); K];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    Ok(total.map(|s| s.estimate()))
}

/// Monte Carlo estimate of `u(t, x0, sign0) = E[F(x(t), ν(t))]`.
pub fn estimate_expectation<F>(
    f: F,
    x0: f64,
    sign0: VelocitySign,
    t: f64,
    p: &ModelParams,
    cfg: &EnsembleConfig,
) -> Result<EnsembleEstimate>
where
    F: Fn(f64, VelocitySign) -> f64 + Sync + Send,
{
    let [e] = estimate_vector(|x, s| [f(x, s)], x0, Start::Signed(sign0), t, p, cfg)?;
    Ok(e)
}

/// Monte Carlo mean and second moment of `x(t)`.
pub fn estimate_moments(
    x0: f64,
    start: Start,
    t: f64,
    p: &ModelParams,
    cfg: &EnsembleConfig,
) -> Result<[EnsembleEstimate; 2]> {
    estimate_vector(|x, _| [x, x * x], x0, start, t, p, cfg)
}

/// Mean and variance of the per-path switch count `N(t)`.
pub fn switch_count_stats(p: &ModelParams, t: f64, cfg: &EnsembleConfig) -> Result<RunningStats> {
    check_time(t)?;
    let partials = map_blocks(cfg, |range| {
        let mut acc = RunningStats::default();
        for i in range {
            let mut rng = path_rng(cfg.seed, i);
            let end = sample_endpoint(p, VelocitySign::Plus, t, &mut rng);
            acc.push(end.switches as f64);
        }
        acc
    })?;
    let mut total = RunningStats::default();
    for part in &partials {
        total.merge(part);
    }
    Ok(total)
}

fn check_time(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "time must be >= 0, got {t}"
        )))
    }
}

/// Point mass of paths that never switched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    pub weight: f64,
    pub std_error: f64,
}

/// Histogram of final positions split by final sign, with the two
/// never-switched atoms reported separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDensity {
    pub grid: Grid1D,
    pub t: f64,
    /// Density (per unit length) of switched paths by final sign.
    pub fields: FieldPair,
    /// Atom at `x0 + v t`.
    pub atom_plus: Atom,
    /// Atom at `x0 - v t`.
    pub atom_minus: Atom,
    pub n_paths: u64,
}

impl EmpiricalDensity {
    /// Per-cell probability mass with both atoms folded in. An atom on an
    /// interior cell edge is shared between the two neighbours.
    pub fn cell_masses_with_atoms(&self) -> Vec<f64> {
        let dx = self.grid.dx();
        let mut m: Vec<f64> = self.fields.total().iter().map(|f| f * dx).collect();
        for atom in [self.atom_plus, self.atom_minus] {
            crate::analytic::add_point_mass(&self.grid, &mut m, atom.position, atom.weight);
        }
        m
    }
}

pub fn empirical_density(
    x0: f64,
    start: Start,
    t: f64,
    p: &ModelParams,
    grid: &Grid1D,
    cfg: &EnsembleConfig,
) -> Result<EmpiricalDensity> {
    check_time(t)?;
    let reach = p.v * t;
    grid.require_interval(x0 - reach, x0 + reach)?;
    let nx = grid.nx();
    // [plus bins | minus bins | atom+ | atom-]
    let counts = map_blocks(cfg, |range| {
        let mut c = vec![0u64; 2 * nx + 2];
        for i in range {
            let mut rng = path_rng(cfg.seed, i);
            let sign0 = draw_sign0(start, &mut rng);
            let end = sample_endpoint(p, sign0, t, &mut rng);
            if end.switches == 0 {
                match sign0 {
                    VelocitySign::Plus => c[2 * nx] += 1,
                    VelocitySign::Minus => c[2 * nx + 1] += 1,
                }
                continue;
            }
            let x = x0 + end.displacement;
            let bin = grid
                .cell_of(x)
                .unwrap_or(if x < grid.x_min() { 0 } else { nx - 1 });
            match end.sign {
                VelocitySign::Plus => c[bin] += 1,
                VelocitySign::Minus => c[nx + bin] += 1,
            }
        }
        c
    })?
    .into_iter()
    .reduce(|mut a, b| {
        a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
        a
    })
    .unwrap_or_else(|| vec![0; 2 * nx + 2]);

    let n = cfg.n_paths as f64;
    let scale = 1.0 / (n * grid.dx());
    let plus = counts[..nx].iter().map(|&k| k as f64 * scale).collect();
    let minus = counts[nx..2 * nx]
        .iter()
        .map(|&k| k as f64 * scale)
        .collect();
    let atom = |k: u64, position: f64| {
        let w = k as f64 / n;
        Atom {
            position,
            weight: w,
            std_error: (w * (1.0 - w) / n).sqrt(),
        }
    };
    Ok(EmpiricalDensity {
        grid: *grid,
        t,
        fields: FieldPair { plus, minus },
        atom_plus: atom(counts[2 * nx], x0 + reach),
        atom_minus: atom(counts[2 * nx + 1], x0 - reach),
        n_paths: cfg.n_paths,
    })
}

/// Draws `n` switch records with the per-path stream contract (for small studies and tests).
pub fn sample_records(
    p: &ModelParams,
    start: Start,
    t_max: f64,
    n: u64,
    seed: RngSeed,
) -> Vec<SwitchRecord> {
    (0..n)
        .map(|i| {
            let mut rng = path_rng(seed, i);
            let sign0 = draw_sign0(start, &mut rng);
            sample_switches(p, sign0, t_max, &mut rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(v: f64, lambda: f64) -> ModelParams {
        ModelParams::new(v, lambda).unwrap()
    }

    #[test]
    fn no_switching_without_rate() {
        let mut rng = path_rng(RngSeed(1), 0);
        let rec = sample_switches(&params(1.0, 0.0), VelocitySign::Plus, 100.0, &mut rng);
        assert!(rec.times.is_empty());
    }

    #[test]
    fn hand_evaluated_paths() {
        let x0 = 0.25;
        let rec = SwitchRecord::from_times(VelocitySign::Plus, vec![], 3.0).unwrap();
        assert_eq!(
            rec.position_at(x0, 2.0, 0.0).unwrap(),
            (x0, VelocitySign::Plus)
        );
        assert_eq!(
            rec.position_at(x0, 2.0, 3.0).unwrap(),
            (x0 + 6.0, VelocitySign::Plus)
        );

        let rec = SwitchRecord::from_times(VelocitySign::Plus, vec![1.0, 2.0], 3.0).unwrap();
        // +1 -1 +1, segment by segment
        assert_eq!(
            rec.position_at(x0, 1.0, 3.0).unwrap(),
            (x0 + 1.0, VelocitySign::Plus)
        );
        assert_eq!(rec.sign_at(1.5).unwrap(), VelocitySign::Minus);

        let rec = SwitchRecord::from_times(VelocitySign::Minus, vec![], 2.0).unwrap();
        assert_eq!(rec.displacement_integral(1.0, 2.0).unwrap(), -2.0);
        assert_eq!(rec.displacement_integral(1.0, 0.0).unwrap(), 0.0);

        let rec = SwitchRecord::from_times(VelocitySign::Plus, vec![0.5], 1.0).unwrap();
        assert_eq!(rec.displacement_integral(1.0, 1.0).unwrap(), 0.0);
        assert!(matches!(
            rec.displacement_integral(1.0, 1.5),
            Err(Error::TimeOutOfRange { .. })
        ));
    }

    #[test]
    fn streaming_matches_record() {
        let p = params(1.3, 2.0);
        for i in 0..200 {
            let rec = sample_switches(&p, VelocitySign::Minus, 1.7, &mut path_rng(RngSeed(9), i));
            let end = sample_endpoint(&p, VelocitySign::Minus, 1.7, &mut path_rng(RngSeed(9), i));
            let (x, s) = rec.position_at(0.0, p.v, 1.7).unwrap();
            assert_eq!(x, end.displacement);
            assert_eq!(s, end.sign);
            assert_eq!(rec.times.len(), end.switches);
        }
    }

    #[test]
    fn constant_observable_is_exact() {
        let p = params(1.0, 1.0);
        let e = estimate_expectation(
            |_, _| 1.0,
            0.0,
            VelocitySign::Plus,
            1.0,
            &p,
            &EnsembleConfig::new(10_000, 3),
        )
        .unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
        assert_eq!(e.n_paths, 10_000);
    }

    #[test]
    fn ballistic_expectation() {
        let p = params(1.0, 0.0);
        let e = estimate_expectation(
            |x, _| x,
            0.5,
            VelocitySign::Plus,
            2.0,
            &p,
            &EnsembleConfig::new(1000, 3),
        )
        .unwrap();
        assert_eq!(e.value, 2.5);
    }

    #[test]
    fn switch_count_is_poisson() {
        // Poisson(λt): mean = var = λt
        let cfg = EnsembleConfig::new(100_000, 11);
        let s = switch_count_stats(&params(1.0, 1.0), 1.0, &cfg).unwrap();
        let n = s.count() as f64;
        assert!((s.mean() - 1.0).abs() < 4.0 * (1.0f64 / n).sqrt());
        let s = switch_count_stats(&params(1.0, 2.0), 3.0, &cfg).unwrap();
        // var of the sample variance for Poisson(μ): (μ + 2μ²)/n approximately
        let mu = 6.0;
        assert!((s.mean() - mu).abs() < 4.0 * (mu / n).sqrt());
        assert!((s.variance() - mu).abs() < 4.0 * ((mu + 2.0 * mu * mu) / n).sqrt());
    }

    #[test]
    fn atom_weight_and_zero_rate_density() {
        let grid = Grid1D::new(-2.0, 2.0, 64).unwrap();
        let cfg = EnsembleConfig::new(100_000, 5);
        let d = empirical_density(
            0.0,
            Start::Signed(VelocitySign::Plus),
            1.0,
            &params(1.0, 0.0),
            &grid,
            &cfg,
        )
        .unwrap();
        assert_eq!(d.atom_plus.weight, 1.0);
        assert_eq!(d.atom_minus.weight, 0.0);
        assert!(d
            .fields
            .plus
            .iter()
            .chain(&d.fields.minus)
            .all(|&f| f == 0.0));

        let d = empirical_density(
            0.0,
            Start::Signed(VelocitySign::Plus),
            1.0,
            &params(1.0, 1.0),
            &grid,
            &cfg,
        )
        .unwrap();
        let w = (-1.0f64).exp();
        assert!((d.atom_plus.weight - w).abs() < 4.0 * d.atom_plus.std_error);
        let total = d.fields.mass(grid.dx()) + d.atom_plus.weight + d.atom_minus.weight;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_must_cover_cone() {
        let grid = Grid1D::new(-0.5, 0.5, 16).unwrap();
        let r = empirical_density(
            0.0,
            Start::Symmetric,
            1.0,
            &params(1.0, 1.0),
            &grid,
            &EnsembleConfig::new(10, 1),
        );
        assert!(matches!(r, Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let p = params(1.0, 1.0);
        let base = EnsembleConfig::new(20_000, 77);
        let a = estimate_moments(0.0, Start::Symmetric, 1.0, &p, &base.with_workers(1)).unwrap();
        let b = estimate_moments(0.0, Start::Symmetric, 1.0, &p, &base.with_workers(8)).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.value.to_bits(), y.value.to_bits());
            assert_eq!(x.std_error.to_bits(), y.std_error.to_bits());
        }
    }

    #[test]
    fn running_stats_merge_matches_sequential() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = RunningStats::default();
        xs.iter().for_each(|&x| whole.push(x));
        let mut a = RunningStats::default();
        let mut b = RunningStats::default();
        xs[..333].iter().for_each(|&x| a.push(x));
        xs[333..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean() - whole.mean()).abs() < 1e-12);
        assert!((a.variance() - whole.variance()).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn paths_stay_in_the_cone(seed in any::<u64>(), lambda in 0.0f64..20.0, v in 0.1f64..5.0, t in 0.0f64..4.0) {
            let p = params(v, lambda);
            let rec = sample_switches(&p, VelocitySign::Plus, t, &mut path_rng(RngSeed(seed), 0));
            for k in 0..=8 {
                let s = t * k as f64 / 8.0;
                let d = rec.displacement_integral(v, s).unwrap();
                prop_assert!(d.abs() <= v * s);
                let (x, _) = rec.position_at(0.0, v, s).unwrap();
                prop_assert_eq!(x, d);
            }
            for w in rec.times.windows(2) {
                prop_assert!(w[0] < w[1]);
            }
            prop_assert!(rec.times.iter().all(|&s| s > 0.0 && s <= t));
        }
    }
}
