//! Interchangeable ways of computing the path-averaged densities `ρ±`,
//! registered by name and selected at runtime.
//!
//! * `mc`: average of translated packets over sampled switch histories.
//! * `pde`: forward Chapman-Kolmogorov solve from `(|ψ₀|², 0)` and `(0, |ψ₀|²)`.
//! * `analytic`: closed-form telegraph kernel convolved with `|ψ₀|²` by quadrature.

use std::collections::BTreeMap;

use crate::analytic::kernel_ac;
use crate::error::{Error, Result};
use crate::mc::{map_blocks, sample_endpoint, EnsembleConfig};
use crate::params::{path_rng, FieldPair, Grid1D, ModelParams, Start, VelocitySign};
use crate::pde::{solve_forward, OutputTimes};
use crate::quad::composite_gauss;
use crate::quantum::{AveragedDensity, WavePacket};

pub trait DensityStrategy: Send + Sync {
    fn name(&self) -> &'static str;

    fn averaged_density(
        &self,
        packet: &WavePacket,
        p: &ModelParams,
        t: f64,
        grid: &Grid1D,
    ) -> Result<AveragedDensity>;
}

fn check_inputs(packet: &WavePacket, p: &ModelParams, t: f64, grid: &Grid1D) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "time must be >= 0, got {t}"
        )));
    }
    let (a, b) = packet.support();
    grid.require_interval(a - p.v * t, b + p.v * t)
}

#[derive(Debug, Clone, Copy)]
pub struct MonteCarloStrategy {
    pub ensemble: EnsembleConfig,
}

impl MonteCarloStrategy {
    fn masses(
        &self,
        packet: &WavePacket,
        p: &ModelParams,
        t: f64,
        grid: &Grid1D,
        sign: VelocitySign,
    ) -> Result<Vec<f64>> {
        let cfg = self.ensemble;
        // independent streams for the two starting signs
        let stream_base = match sign {
            VelocitySign::Plus => 0,
            VelocitySign::Minus => cfg.n_paths,
        };
        let parts = map_blocks(&cfg, |range| {
            let mut acc = vec![0.0; grid.nx()];
            for i in range {
                let mut rng = path_rng(cfg.seed, stream_base + i);
                let end = sample_endpoint(p, sign, t, &mut rng);
                packet.add_cell_masses(grid, end.displacement, 1.0, &mut acc);
            }
            acc
        })?;
        let mut total = vec![0.0; grid.nx()];
        for part in &parts {
            total.iter_mut().zip(part).for_each(|(a, b)| *a += b);
        }
        let n = cfg.n_paths as f64;
        total.iter_mut().for_each(|m| *m /= n);
        Ok(total)
    }
}

impl DensityStrategy for MonteCarloStrategy {
    fn name(&self) -> &'static str {
        "mc"
    }

    fn averaged_density(
        &self,
        packet: &WavePacket,
        p: &ModelParams,
        t: f64,
        grid: &Grid1D,
    ) -> Result<AveragedDensity> {
        check_inputs(packet, p, t, grid)?;
        let plus = self.masses(packet, p, t, grid, VelocitySign::Plus)?;
        let minus = self.masses(packet, p, t, grid, VelocitySign::Minus)?;
        Ok(AveragedDensity::from_masses(*grid, t, plus, minus))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PdeStrategy;

impl DensityStrategy for PdeStrategy {
    fn name(&self) -> &'static str {
        "pde"
    }

    fn averaged_density(
        &self,
        packet: &WavePacket,
        p: &ModelParams,
        t: f64,
        grid: &Grid1D,
    ) -> Result<AveragedDensity> {
        check_inputs(packet, p, t, grid)?;
        let dx = grid.dx();
        let psi: Vec<f64> = packet.cell_masses(grid).iter().map(|m| m / dx).collect();
        let zero = vec![0.0; grid.nx()];
        let run = |init: FieldPair| -> Result<(f64, Vec<f64>)> {
            let r = solve_forward(p, &init, grid, t, &OutputTimes::At(vec![t]))?;
            Ok((r.times[r.times.len() - 1], r.last().total()))
        };
        let (t_plus, rho_plus) = run(FieldPair::new(psi.clone(), zero.clone())?)?;
        let (_, rho_minus) = run(FieldPair::new(zero, psi)?)?;
        Ok(AveragedDensity {
            grid: *grid,
            t: t_plus,
            rho_plus,
            rho_minus,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyticStrategy {
    /// Gauss-Legendre panels per smooth piece of the convolution integrand.
    pub panels: usize,
}

impl Default for AnalyticStrategy {
    fn default() -> Self {
        AnalyticStrategy { panels: 4 }
    }
}

impl AnalyticStrategy {
    fn masses(
        &self,
        packet: &WavePacket,
        p: &ModelParams,
        t: f64,
        grid: &Grid1D,
        sign: VelocitySign,
    ) -> Vec<f64> {
        let reach = p.v * t;
        let mut m = vec![0.0; grid.nx()];
        // never-switched paths carry the packet rigidly
        packet.add_cell_masses(grid, sign.value() * reach, (-p.lambda * t).exp(), &mut m);
        if p.lambda == 0.0 || t == 0.0 {
            return m;
        }
        let (a, b) = packet.support();
        let start = Start::Signed(sign);
        for (i, cell) in m.iter_mut().enumerate() {
            let (lo_edge, hi_edge) = (grid.edge(i), grid.edge(i + 1));
            let lo = (lo_edge - b).max(-reach);
            let hi = (hi_edge - a).min(reach);
            if hi <= lo {
                continue;
            }
            let mut cuts = vec![lo, hi];
            for c in [lo_edge - b, lo_edge - a, hi_edge - b, hi_edge - a] {
                if c > lo && c < hi {
                    cuts.push(c);
                }
            }
            cuts.sort_by(f64::total_cmp);
            let integrand =
                |y: f64| kernel_ac(p, t, y, start) * packet.mass_between(lo_edge - y, hi_edge - y);
            *cell += cuts
                .windows(2)
                .map(|w| composite_gauss(integrand, w[0], w[1], self.panels))
                .sum::<f64>();
        }
        m
    }
}

impl DensityStrategy for AnalyticStrategy {
    fn name(&self) -> &'static str {
        "analytic"
    }

    fn averaged_density(
        &self,
        packet: &WavePacket,
        p: &ModelParams,
        t: f64,
        grid: &Grid1D,
    ) -> Result<AveragedDensity> {
        check_inputs(packet, p, t, grid)?;
        let plus = self.masses(packet, p, t, grid, VelocitySign::Plus);
        let minus = self.masses(packet, p, t, grid, VelocitySign::Minus);
        Ok(AveragedDensity::from_masses(*grid, t, plus, minus))
    }
}

/// Settings handed to strategy factories.
#[derive(Debug, Clone, Copy)]
pub struct StrategyOptions {
    pub ensemble: EnsembleConfig,
}

impl Default for StrategyOptions {
    fn default() -> Self {
        StrategyOptions {
            ensemble: EnsembleConfig::new(100_000, 0),
        }
    }
}

type Factory = Box<dyn Fn(&StrategyOptions) -> Box<dyn DensityStrategy> + Send + Sync>;

pub struct StrategyRegistry {
    factories: BTreeMap<String, Factory>,
}

impl StrategyRegistry {
    pub fn new() -> Self {
        StrategyRegistry {
            factories: BTreeMap::new(),
        }
    }

    /// Registry holding `mc`, `pde` and `analytic`.
    pub fn with_defaults() -> Self {
        let mut r = StrategyRegistry::new();
        r.register("mc", |o| {
            Box::new(MonteCarloStrategy {
                ensemble: o.ensemble,
            })
        });
        r.register("pde", |_| Box::new(PdeStrategy));
        r.register("analytic", |_| Box::new(AnalyticStrategy::default()));
        r
    }

    pub fn register<F>(&mut self, name: &str, factory: F)
    where
        F: Fn(&StrategyOptions) -> Box<dyn DensityStrategy> + Send + Sync + 'static,
    {
        self.factories.insert(name.to_string(), Box::new(factory));
    }

    pub fn create(
        &self,
        name: &str,
        options: &StrategyOptions,
    ) -> Result<Box<dyn DensityStrategy>> {
        self.factories
            .get(name)
            .map(|f| f(options))
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.factories.keys().map(String::as_str).collect()
    }
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self::with_defaults()
    }
}
