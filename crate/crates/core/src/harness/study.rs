//! Monte Carlo strong-error studies.
//!
//! Realization `r` draws one Wiener path from stream `r` of the base seed and
//! runs every `N` of the study on that same path. Per-realization results are
//! collected in index order before any reduction, so the output does not
//! depend on the number of worker threads.

use super::config::{Equation, ErrorNorm, StudyConfig};
use super::stats::MeanEstimate;
use super::table::{ConvergenceRow, ConvergenceTable};
use crate::error::{Error, Result};
use crate::grid::{Field, SpatialGrid};
use crate::heat::{self, check_benchmark_configuration, exact_heat_solution, ExactMode, HeatProblem};
use crate::noise::{TimeMesh, WienerPath};
use crate::wave::{reference_wave_solution, run_wave, WaveProblem};
use rayon::prelude::*;

/// Squared errors of every realization, for every `N` and every norm.
#[derive(Debug, Clone)]
pub struct ErrorSamples {
    pub n_list: Vec<usize>,
    pub t_final: f64,
    /// `squared[norm][n_index][realization]`; empty for norms that do not apply.
    pub squared: [Vec<Vec<f64>>; 3],
    /// Squared difference between continuous and semidiscrete closed forms
    /// (heat only), `floor[norm][realization]`.
    pub floor: Option<[Vec<f64>; 2]>,
}

struct Realization {
    /// `[norm][n_index]`
    squared: [Vec<f64>; 3],
    floor: Option<[f64; 2]>,
}

fn displacement_norms(diff: &Field) -> (f64, f64) {
    (diff.l2_norm().powi(2), diff.h1_seminorm().powi(2))
}

fn in_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Runs every realization and keeps all squared errors.
pub fn collect_errors(config: &StudyConfig) -> Result<ErrorSamples> {
    let mut config = config.clone();
    config.validate()?;
    let grid = SpatialGrid::new(config.k)?;
    let n_max = *config.n_list.last().unwrap();
    let path_mesh = TimeMesh::new(config.t_final, n_max)?;

    let results: Vec<Realization> = match config.equation {
        Equation::Heat => {
            let problems = config
                .n_list
                .iter()
                .map(|&n| HeatProblem::benchmark(grid, TimeMesh::new(config.t_final, n)?))
                .collect::<Result<Vec<_>>>()?;
            check_benchmark_configuration(&problems[0])?;
            in_pool(config.workers, || {
                (0..config.mc_count as u64)
                    .into_par_iter()
                    .map(|r| heat_realization(&config, grid, &path_mesh, &problems, r))
                    .collect::<Result<Vec<_>>>()
            })??
        }
        Equation::Wave => {
            let problems = config
                .n_list
                .iter()
                .map(|&n| WaveProblem::benchmark(grid, TimeMesh::new(config.t_final, n)?))
                .collect::<Result<Vec<_>>>()?;
            in_pool(config.workers, || {
                (0..config.mc_count as u64)
                    .into_par_iter()
                    .map(|r| wave_realization(&config, &path_mesh, &problems, r))
                    .collect::<Result<Vec<_>>>()
            })??
        }
    };

    let n_count = config.n_list.len();
    let mut squared: [Vec<Vec<f64>>; 3] = Default::default();
    for norm in ErrorNorm::ALL {
        let idx = norm.index();
        if results.first().is_none_or(|r| r.squared[idx].is_empty()) {
            continue;
        }
        squared[idx] = (0..n_count)
            .map(|ni| results.iter().map(|r| r.squared[idx][ni]).collect())
            .collect();
    }
    let floor = if results.iter().all(|r| r.floor.is_some()) && !results.is_empty() {
        Some([0, 1].map(|i| results.iter().map(|r| r.floor.unwrap()[i]).collect()))
    } else {
        None
    };
    Ok(ErrorSamples {
        n_list: config.n_list.clone(),
        t_final: config.t_final,
        squared,
        floor,
    })
}

fn heat_realization(
    config: &StudyConfig,
    grid: SpatialGrid,
    path_mesh: &TimeMesh,
    problems: &[HeatProblem],
    r: u64,
) -> Result<Realization> {
    let path = WienerPath::sample_stream(config.base_seed, r, path_mesh, 1, config.master_steps)?;
    let t = config.t_final;
    let exact = exact_heat_solution(&path, grid, t, config.exact_mode)?;
    let floor = if config.exact_mode == ExactMode::Continuous {
        let semi = exact_heat_solution(&path, grid, t, ExactMode::Semidiscrete)?;
        let (a, b) = displacement_norms(&exact.difference(&semi)?);
        Some([a, b])
    } else {
        None
    };
    let mut squared: [Vec<f64>; 3] = Default::default();
    for problem in problems {
        let x = heat::run_heat(problem, &path, config.scheme)?;
        let (l2, h1) = displacement_norms(&exact.difference(&x)?);
        squared[0].push(l2);
        squared[1].push(h1);
    }
    Ok(Realization { squared, floor })
}

fn wave_realization(
    config: &StudyConfig,
    path_mesh: &TimeMesh,
    problems: &[WaveProblem],
    r: u64,
) -> Result<Realization> {
    let path = WienerPath::sample_stream(config.base_seed, r, path_mesh, 1, config.master_steps)?;
    let (x_ref, y_ref) = reference_wave_solution(&problems[0], &path, config.n_ref)?;
    let mut squared: [Vec<f64>; 3] = Default::default();
    for problem in problems {
        let (x, y) = run_wave(problem, &path)?;
        let (l2, h1) = displacement_norms(&x_ref.difference(&x)?);
        squared[0].push(l2);
        squared[1].push(h1);
        squared[2].push(y_ref.difference(&y)?.l2_norm().powi(2));
    }
    Ok(Realization {
        squared,
        floor: None,
    })
}

impl ErrorSamples {
    /// Builds the convergence table for `norm` and fits its rate.
    ///
    /// Without an explicit range the fit drops the coarsest `N` (when at least
    /// three rows exist) and any `N` whose error is within 3x of the
    /// measured spatial floor.
    pub fn table(&self, norm: ErrorNorm, fit_range: Option<&[usize]>) -> Result<ConvergenceTable> {
        let per_n = &self.squared[norm.index()];
        if per_n.is_empty() {
            return Err(Error::Config(format!("norm {norm} was not recorded for this study")));
        }
        let rows = self
            .n_list
            .iter()
            .zip(per_n)
            .map(|(&n, sq)| {
                let (rms_error, standard_error) = MeanEstimate::rms_from_squares(sq);
                ConvergenceRow {
                    n,
                    tau: self.t_final / n as f64,
                    rms_error,
                    standard_error,
                }
            })
            .collect();
        let mut table = ConvergenceTable::new(rows);
        table.spatial_floor = match (&self.floor, norm) {
            (Some(f), ErrorNorm::L2) => Some(MeanEstimate::rms_from_squares(&f[0]).0),
            (Some(f), ErrorNorm::H1Displacement) => Some(MeanEstimate::rms_from_squares(&f[1]).0),
            _ => None,
        };
        let range = match fit_range {
            Some(r) => r.to_vec(),
            None => default_fit_range(&table),
        };
        // A table whose automatic range is degenerate is still returned, unfitted.
        match table.refit(range.clone()) {
            Ok(_) => {}
            Err(e) if fit_range.is_some() => return Err(e),
            Err(_) => table.fit_range = range,
        }
        Ok(table)
    }
}

pub fn default_fit_range(table: &ConvergenceTable) -> Vec<usize> {
    let skip = usize::from(table.rows.len() >= 3);
    table
        .rows
        .iter()
        .skip(skip)
        .filter(|r| table.spatial_floor.is_none_or(|f| r.rms_error > 3.0 * f))
        .map(|r| r.n)
        .collect()
}

/// Runs the study described by `config` and returns its table in the
/// configured norm.
pub fn run_study(config: &StudyConfig) -> Result<ConvergenceTable> {
    let samples = collect_errors(config)?;
    samples.table(config.error_norm, config.fit_range.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heat::HeatScheme;

    fn small_heat() -> StudyConfig {
        StudyConfig {
            n_list: vec![4, 8, 16],
            k: 12,
            mc_count: 6,
            master_steps: 256,
            ..StudyConfig::heat_default()
        }
    }

    #[test]
    fn single_realization_equals_direct_computation() {
        let mut c = small_heat();
        c.mc_count = 1;
        c.exact_mode = ExactMode::Semidiscrete;
        let t = run_study(&c).unwrap();
        let grid = SpatialGrid::new(12).unwrap();
        let mesh = TimeMesh::unit(16).unwrap();
        let path = WienerPath::sample_stream(c.base_seed, 0, &mesh, 1, 256).unwrap();
        let exact = exact_heat_solution(&path, grid, 1.0, ExactMode::Semidiscrete).unwrap();
        for row in &t.rows {
            let p = HeatProblem::benchmark(grid, TimeMesh::unit(row.n).unwrap()).unwrap();
            let x = heat::run_heat(&p, &path, HeatScheme::Mcn).unwrap();
            let e = exact.difference(&x).unwrap().l2_norm();
            assert!((row.rms_error - e).abs() <= 1e-14 * e.max(1e-300), "{} {e}", row.rms_error);
            assert_eq!(row.standard_error, 0.0);
        }
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut a = small_heat();
        a.workers = Some(1);
        let mut b = small_heat();
        b.workers = Some(3);
        assert_eq!(run_study(&a).unwrap(), run_study(&b).unwrap());
    }

    #[test]
    fn wave_records_all_norms() {
        let c = StudyConfig {
            n_list: vec![2, 4],
            n_ref: 8,
            k: 8,
            mc_count: 3,
            master_steps: 64,
            ..StudyConfig::wave_default()
        };
        let s = collect_errors(&c).unwrap();
        for norm in ErrorNorm::ALL {
            let t = s.table(norm, None).unwrap();
            assert_eq!(t.rows.len(), 2);
            assert!(t.rows.iter().all(|r| r.rms_error > 0.0));
        }
    }

    #[test]
    fn heat_rejects_velocity_norm() {
        let s = collect_errors(&small_heat()).unwrap();
        assert!(s.table(ErrorNorm::L2Velocity, None).is_err());
        assert!(s.floor.is_some());
    }
}
