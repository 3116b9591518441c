use proptest::prelude::*;
use spde_mcn::grid::{Field, SpatialGrid};
use spde_mcn::harness::{
    collect_errors, parse_csv, run_study, write_csv, ConvergenceRow, ConvergenceTable, ErrorNorm, MeanEstimate,
    StudyConfig,
};
use spde_mcn::heat::{run_heat, HeatProblem, HeatScheme};
use spde_mcn::noise::{NoiseCoefficient, TimeMesh, WienerPath};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_heat() -> StudyConfig {
    StudyConfig {
        n_list: vec![4, 8, 16],
        k: 12,
        mc_count: 20,
        master_steps: 1024,
        ..StudyConfig::heat_default()
    }
}

fn csv_of(table: &ConvergenceTable) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(table, &mut buf).unwrap();
    buf
}

proptest! {
    #[test]
    fn csv_round_trips(rows in prop::collection::vec((1usize..5000, 1e-300f64..1e3, 0.0f64..1e3, 0.0f64..1e3), 0..12)) {
        let table = ConvergenceTable::new(
            rows.iter()
                .map(|&(n, tau, rms_error, standard_error)| ConvergenceRow { n, tau, rms_error, standard_error })
                .collect(),
        );
        let text = String::from_utf8(csv_of(&table)).unwrap();
        prop_assert_eq!(parse_csv(&text).unwrap(), table.rows);
    }
}

#[test]
fn identical_configs_give_identical_csv() {
    let a = run_study(&small_heat()).unwrap();
    let b = run_study(&StudyConfig {
        workers: Some(2),
        ..small_heat()
    })
    .unwrap();
    assert_eq!(csv_of(&a), csv_of(&b));
    let c = run_study(&StudyConfig {
        base_seed: 1,
        ..small_heat()
    })
    .unwrap();
    assert_ne!(csv_of(&a), csv_of(&c));
}

#[test]
fn every_n_sees_the_same_path() {
    let mut config = small_heat();
    config.mc_count = 2;
    config.exact_mode = spde_mcn::heat::ExactMode::Semidiscrete;
    let samples = collect_errors(&config).unwrap();
    let grid = SpatialGrid::new(12).unwrap();
    let mesh = TimeMesh::unit(16).unwrap();
    let path = WienerPath::sample_stream(config.base_seed, 1, &mesh, 1, 1024).unwrap();
    let exact = spde_mcn::heat::exact_heat_solution(&path, grid, 1.0, config.exact_mode).unwrap();
    for (i, &n) in config.n_list.iter().enumerate() {
        let p = HeatProblem::benchmark(grid, TimeMesh::unit(n).unwrap()).unwrap();
        let x = run_heat(&p, &path, HeatScheme::Mcn).unwrap();
        let e = exact.difference(&x).unwrap().l2_norm().powi(2);
        let got = samples.squared[ErrorNorm::L2.index()][i][1];
        assert!((got - e).abs() <= 1e-13 * e, "N={n}: {got} vs {e}");
    }
}

#[test]
fn standard_error_scales_with_inverse_root_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws: Vec<f64> = (0..4000).map(|_| rng.gen_range(0.0..2.0f64)).collect();
    let small = MeanEstimate::from_samples(&draws[..1000]).standard_error;
    let large = MeanEstimate::from_samples(&draws).standard_error;
    let ratio = small / large;
    assert!((ratio / 2.0 - 1.0).abs() <= 0.2, "{ratio}");
    let (_, se_small) = MeanEstimate::rms_from_squares(&draws[..1000]);
    let (_, se_large) = MeanEstimate::rms_from_squares(&draws);
    assert!((se_small / se_large / 2.0 - 1.0).abs() <= 0.2);
}

#[test]
fn noise_free_study_has_zero_standard_error() {
    // run through the study machinery by hand, with Phi = 0
    let grid = SpatialGrid::new(10).unwrap();
    let exact = grid.sine_mode(1).scaled((-grid.laplacian_eigenvalue(1)).exp());
    let path_mesh = TimeMesh::unit(16).unwrap();
    let squares: Vec<f64> = (0..5u64)
        .map(|r| {
            let path = WienerPath::sample_stream(1, r, &path_mesh, 1, 256).unwrap();
            let p = HeatProblem::new(
                grid,
                NoiseCoefficient::zero(grid, 1).unwrap(),
                grid.sine_mode(1),
                TimeMesh::unit(16).unwrap(),
            )
            .unwrap();
            let x: Field = run_heat(&p, &path, HeatScheme::Mcn).unwrap();
            exact.difference(&x).unwrap().l2_norm().powi(2)
        })
        .collect();
    let (rms, se) = MeanEstimate::rms_from_squares(&squares);
    assert!(rms > 0.0);
    assert_eq!(se, 0.0);
}

#[test]
fn average_error_decreases_with_n() {
    let mut config = small_heat();
    config.mc_count = 100;
    config.n_list = vec![8, 16, 32];
    config.k = 20;
    let table = run_study(&config).unwrap();
    for w in table.rows.windows(2) {
        assert!(w[1].rms_error < w[0].rms_error, "{:?}", table.rows);
    }
}

#[test]
fn invalid_configs_are_rejected() {
    for bad in [
        StudyConfig { n_list: vec![], ..small_heat() },
        StudyConfig { n_list: vec![6], ..small_heat() },
        StudyConfig { master_steps: 1000, ..small_heat() },
        StudyConfig { n_list: vec![64], master_steps: 1024, ..small_heat() },
        StudyConfig { fit_range: Some(vec![32]), ..small_heat() },
        StudyConfig { error_norm: ErrorNorm::L2Velocity, ..small_heat() },
        StudyConfig { n_ref: 128, n_list: vec![128], ..StudyConfig::wave_default() },
    ] {
        assert!(run_study(&bad).is_err(), "{bad:?}");
    }
}
