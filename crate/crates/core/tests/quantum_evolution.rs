use proptest::prelude::*;
use telegraph_core::analytic::l1_distance;
use telegraph_core::mc::{sample_records, EnsembleConfig};
use telegraph_core::moments::{mean_closed_form, second_moment_closed_form};
use telegraph_core::quantum::{
    averaged_density, expected_observable, lightcone_violation_mass, random_state_density,
    AveragedDensity, WavePacket,
};
use telegraph_core::strategy::{
    AnalyticStrategy, DensityStrategy, MonteCarloStrategy, PdeStrategy,
};
use telegraph_core::{Grid1D, ModelParams, RngSeed, Start, VelocitySign};

fn symmetric_masses(rho: &AveragedDensity) -> Vec<f64> {
    let plus = rho.cell_masses(VelocitySign::Plus);
    let minus = rho.cell_masses(VelocitySign::Minus);
    plus.iter()
        .zip(&minus)
        .map(|(a, b)| 0.5 * (a + b))
        .collect()
}

#[test]
fn monte_carlo_matches_kernel_convolution() {
    let p = ModelParams::new(1.0, 1.0).unwrap();
    let packet = WavePacket::raised_cosine(0.0, 0.2).unwrap();
    let grid = Grid1D::with_spacing(-1.5, 1.0 / 128.0, 384).unwrap();
    let mc = MonteCarloStrategy {
        ensemble: EnsembleConfig::new(1_000_000, 8),
    };
    let a = averaged_density(&packet, &p, 1.0, &grid, &mc).unwrap();
    let b = averaged_density(&packet, &p, 1.0, &grid, &AnalyticStrategy::default()).unwrap();
    let l1 = l1_distance(&symmetric_masses(&a), &symmetric_masses(&b));
    assert!(l1 < 0.02, "{l1}");
}

#[test]
fn pde_matches_kernel_convolution_and_monte_carlo() {
    let p = ModelParams::new(1.0, 2.0).unwrap();
    let packet = WavePacket::uniform(-0.1, 0.1).unwrap();
    let grid = Grid1D::with_spacing(-1.5, 1.0 / 256.0, 768).unwrap();
    let pde = averaged_density(&packet, &p, 1.0, &grid, &PdeStrategy).unwrap();
    let exact = averaged_density(&packet, &p, 1.0, &grid, &AnalyticStrategy::default()).unwrap();
    let mc = averaged_density(
        &packet,
        &p,
        1.0,
        &grid,
        &MonteCarloStrategy {
            ensemble: EnsembleConfig::new(200_000, 1),
        },
    )
    .unwrap();
    for sign in [VelocitySign::Plus, VelocitySign::Minus] {
        let e = exact.cell_masses(sign);
        assert!(l1_distance(&pde.cell_masses(sign), &e) < 10.0 * grid.dx());
        assert!(l1_distance(&mc.cell_masses(sign), &pde.cell_masses(sign)) < 0.02);
    }
}

#[test]
fn observables_follow_the_moment_closed_forms() {
    let p = ModelParams::new(1.0, 1.5).unwrap();
    let packet = WavePacket::truncated_gaussian(0.2, 0.1, 0.0, 0.5).unwrap();
    let im = packet.moments();
    let grid = Grid1D::with_spacing(-2.0, 1.0 / 256.0, 1024).unwrap();
    let dx = grid.dx();
    let n = 50_000;
    let methods: Vec<Box<dyn DensityStrategy>> = vec![
        Box::new(PdeStrategy),
        Box::new(AnalyticStrategy::default()),
        Box::new(MonteCarloStrategy {
            ensemble: EnsembleConfig::new(n, 3),
        }),
    ];
    for t in [0.0, 0.5, 1.0, 1.5] {
        for m in &methods {
            let rho = averaged_density(&packet, &p, t, &grid, m.as_ref()).unwrap();
            for sign in [VelocitySign::Plus, VelocitySign::Minus] {
                let r = rho.rho(sign);
                let m1 = expected_observable(|x| x, r, &grid);
                let m2 = expected_observable(|x| x * x, r, &grid);
                let cf1 = mean_closed_form(&im, &p, t, sign);
                let cf2 = second_moment_closed_form(&im, &p, t, sign);
                // 4σ of a per-path mean with spread below v t + packet width
                let sigma = (p.v * t + 0.5) / (n as f64).sqrt();
                let tol = (10.0 * dx).max(4.0 * sigma);
                assert!((m1 - cf1).abs() < tol, "{} t={t}: {m1} vs {cf1}", m.name());
                assert!((m2 - cf2).abs() < tol, "{} t={t}: {m2} vs {cf2}", m.name());
            }
        }
    }
}

#[test]
fn time_zero_second_moment_is_the_packets() {
    let packet = WavePacket::raised_cosine(0.1, 0.3).unwrap();
    let grid = Grid1D::with_spacing(-1.0, 1.0 / 2048.0, 4096).unwrap();
    let p = ModelParams::new(1.0, 1.0).unwrap();
    let rho = averaged_density(&packet, &p, 0.0, &grid, &PdeStrategy).unwrap();
    let m2 = expected_observable(|x| x * x, &rho.rho_plus, &grid);
    // midpoint rule on cell averages: O(dx²) away from the exact value
    assert!((m2 - packet.moments().m2).abs() < grid.dx() * grid.dx());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn each_history_translates_the_packet(seed in any::<u64>(), lambda in 0.0f64..10.0, t in 0.0f64..2.0, c in -1.0f64..1.0) {
        let p = ModelParams::new(1.5, lambda).unwrap();
        let packet = WavePacket::raised_cosine(c, 0.25).unwrap();
        for rec in sample_records(&p, Start::Symmetric, 2.0, 8, RngSeed(seed)) {
            let moved = random_state_density(&packet, &rec, &p, t).unwrap();
            let d = rec.displacement_integral(p.v, t).unwrap();
            let (a, b) = packet.support();
            let (a2, b2) = moved.support();
            prop_assert!((a2 - (a + d)).abs() < 1e-12 && (b2 - (b + d)).abs() < 1e-12);
            for k in 0..=10 {
                let x = a + (b - a) * k as f64 / 10.0;
                prop_assert!((moved.density(x + d) - packet.density(x)).abs() < 1e-9);
            }
            prop_assert_eq!(moved.norm(), 1.0);
        }
    }

    #[test]
    fn averaged_densities_stay_in_the_cone(
        lambda in 0.0f64..5.0,
        t in 0.0f64..1.5,
        lo in -0.3f64..0.0,
        width in 0.05f64..0.3,
        seed in any::<u64>(),
    ) {
        let p = ModelParams::new(1.0, lambda).unwrap();
        let packet = WavePacket::uniform(lo, lo + width).unwrap();
        let grid = Grid1D::with_spacing(-3.0, 1.0 / 64.0, 384).unwrap();
        let (a, b) = packet.support();
        let left = (grid.x_min(), grid.edge(((a - t - grid.x_min()) / grid.dx()).floor() as usize));
        let right = (grid.edge(((b + t - grid.x_min()) / grid.dx()).ceil() as usize), grid.x_max());
        let mc = MonteCarloStrategy { ensemble: EnsembleConfig::new(2000, seed) };
        let rho = averaged_density(&packet, &p, t, &grid, &mc).unwrap();
        for probe in [left, right] {
            prop_assert_eq!(lightcone_violation_mass(&rho, &packet, &p, probe).unwrap().max(), 0.0);
        }
        let rho = averaged_density(&packet, &p, t, &grid, &PdeStrategy).unwrap();
        let reach = rho.t;
        let left = (grid.x_min(), grid.edge(((a - reach - grid.x_min()) / grid.dx()).floor() as usize));
        let right = (grid.edge(((b + reach - grid.x_min()) / grid.dx()).ceil() as usize), grid.x_max());
        for probe in [left, right] {
            prop_assert!(lightcone_violation_mass(&rho, &packet, &p, probe).unwrap().max() <= 1e-12);
        }
    }
}
