//! Time-steppers for the stochastic heat equation `dX - Delta X dt = Phi dW`
//! on `(0,1)` with homogeneous Dirichlet data.
//!
//! Both schemes work directly on `X`. The modified Crank-Nicolson step adds a
//! micro-grid correction to the trapezoidal right-hand side, which lifts the
//! strong order from 1 to 3/2 for smooth additive noise.

use crate::error::{Error, Result};
use crate::grid::{build_discrete_laplacian, Field, SpatialGrid, TridiagonalLu, TridiagonalOperator};
use crate::noise::{coarse_increment, heat_correction, NoiseCoefficient, TimeMesh, WienerPath};
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HeatScheme {
    /// Implicit Euler-Maruyama.
    Em,
    /// Modified Crank-Nicolson.
    Mcn,
}

impl FromStr for HeatScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "em" => Ok(Self::Em),
            "mcn" => Ok(Self::Mcn),
            other => Err(Error::Config(format!("unknown heat scheme `{other}` (em | mcn)"))),
        }
    }
}

impl fmt::Display for HeatScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Em => "em",
            Self::Mcn => "mcn",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatState {
    pub j: usize,
    pub x: Field,
}

/// Heat problem data plus the factored implicit matrices for its mesh.
#[derive(Debug, Clone)]
pub struct HeatProblem {
    grid: SpatialGrid,
    phi: NoiseCoefficient,
    x0: Field,
    mesh: TimeMesh,
    laplacian: TridiagonalOperator,
    /// `I + tau L_h`
    euler: TridiagonalLu,
    /// `I + (tau/2) L_h`
    crank_nicolson: TridiagonalLu,
}

impl HeatProblem {
    pub fn new(grid: SpatialGrid, phi: NoiseCoefficient, x0: Field, mesh: TimeMesh) -> Result<Self> {
        if phi.grid() != grid || x0.grid() != grid {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: if x0.grid() != grid { x0.grid().len() } else { phi.grid().len() },
            });
        }
        let laplacian = build_discrete_laplacian(grid);
        let tau = mesh.tau();
        let euler = laplacian.shifted(1.0, -tau).factor()?;
        let crank_nicolson = laplacian.shifted(1.0, -0.5 * tau).factor()?;
        Ok(Self {
            grid,
            phi,
            x0,
            mesh,
            laplacian,
            euler,
            crank_nicolson,
        })
    }

    /// Benchmark configuration: `X0 = sin(pi x)`, `Phi = sin(2 pi x) + sin(3 pi x)`, `m = 1`.
    pub fn benchmark(grid: SpatialGrid, mesh: TimeMesh) -> Result<Self> {
        let phi = benchmark_noise(grid)?;
        Self::new(grid, phi, grid.sine_mode(1), mesh)
    }

    /// Same data on a different time mesh.
    pub fn with_mesh(&self, mesh: TimeMesh) -> Result<Self> {
        Self::new(self.grid, self.phi.clone(), self.x0.clone(), mesh)
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn phi(&self) -> &NoiseCoefficient {
        &self.phi
    }

    pub fn x0(&self) -> &Field {
        &self.x0
    }

    pub fn mesh(&self) -> &TimeMesh {
        &self.mesh
    }

    pub fn initial_state(&self) -> HeatState {
        HeatState {
            j: 0,
            x: self.x0.clone(),
        }
    }

    fn check_step(&self, state: &HeatState) -> Result<()> {
        if state.j >= self.mesh.steps() {
            return Err(Error::Config(format!(
                "step index {} is past the final step {}",
                state.j,
                self.mesh.steps()
            )));
        }
        state.x.check_same_grid(&self.x0)
    }

    /// `Phi (W(t_{j+1}) - W(t_j))`.
    pub fn noise_increment(&self, path: &WienerPath, j: usize) -> Result<Field> {
        self.phi.check_path(path)?;
        Ok(self.phi.combine(&coarse_increment(path, &self.mesh, j)?))
    }

    /// Trapezoidal step with explicit forcing:
    /// `(I + (tau/2) L_h) X_{j+1} = (I - (tau/2) L_h) X_j + forcing`.
    pub fn crank_nicolson_step(&self, state: &HeatState, forcing: &Field) -> Result<HeatState> {
        self.check_step(state)?;
        let mut rhs = self.laplacian.apply(&state.x)?;
        rhs.scale(0.5 * self.mesh.tau());
        rhs.axpy(1.0, &state.x)?;
        rhs.axpy(1.0, forcing)?;
        self.crank_nicolson.solve_in_place(rhs.values_mut())?;
        Ok(HeatState {
            j: state.j + 1,
            x: rhs,
        })
    }
}

/// `Phi = sin(2 pi x) + sin(3 pi x)` as a single noise component.
pub fn benchmark_noise(grid: SpatialGrid) -> Result<NoiseCoefficient> {
    let mut phi = grid.sine_mode(2);
    phi.axpy(1.0, &grid.sine_mode(3))?;
    NoiseCoefficient::new(grid, vec![phi])
}

/// Implicit Euler-Maruyama: `(I + tau L_h) X_{j+1} = X_j + Phi Delta_{j+1} W`.
pub fn em_step(state: &HeatState, path: &WienerPath, problem: &HeatProblem) -> Result<HeatState> {
    problem.check_step(state)?;
    let mut rhs = problem.noise_increment(path, state.j)?;
    rhs.axpy(1.0, &state.x)?;
    problem.euler.solve_in_place(rhs.values_mut())?;
    Ok(HeatState {
        j: state.j + 1,
        x: rhs,
    })
}

/// Modified Crank-Nicolson:
/// `(I + (tau/2) L_h) X_{j+1} = (I - (tau/2) L_h) X_j + Phi Delta_{j+1} W + E_{j+1}(W)`.
pub fn mcn_heat_step(state: &HeatState, path: &WienerPath, problem: &HeatProblem) -> Result<HeatState> {
    let mut forcing = problem.noise_increment(path, state.j)?;
    forcing.axpy(1.0, &heat_correction(path, &problem.mesh, state.j, &problem.phi)?)?;
    problem.crank_nicolson_step(state, &forcing)
}

pub fn step(
    scheme: HeatScheme,
    state: &HeatState,
    path: &WienerPath,
    problem: &HeatProblem,
) -> Result<HeatState> {
    match scheme {
        HeatScheme::Em => em_step(state, path, problem),
        HeatScheme::Mcn => mcn_heat_step(state, path, problem),
    }
}

/// Runs all `N` steps and returns `X_N`.
pub fn run_heat(problem: &HeatProblem, path: &WienerPath, scheme: HeatScheme) -> Result<Field> {
    path.stride(problem.mesh())?;
    let mut state = problem.initial_state();
    for _ in 0..problem.mesh.steps() {
        state = step(scheme, &state, path, problem)?;
    }
    Ok(state.x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExactMode {
    /// Eigenvalues `(k pi)^2` of the continuous Laplacian.
    Continuous,
    /// Eigenvalues `lambda_k^h` of the second-difference Laplacian.
    Semidiscrete,
}

impl FromStr for ExactMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" => Ok(Self::Continuous),
            "semidiscrete" => Ok(Self::Semidiscrete),
            other => Err(Error::Config(format!(
                "unknown exact mode `{other}` (continuous | semidiscrete)"
            ))),
        }
    }
}

impl fmt::Display for ExactMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Continuous => "continuous",
            Self::Semidiscrete => "semidiscrete",
        })
    }
}

impl ExactMode {
    pub fn eigenvalue(self, grid: SpatialGrid, k: usize) -> f64 {
        match self {
            Self::Continuous => (k as f64 * PI).powi(2),
            Self::Semidiscrete => grid.laplacian_eigenvalue(k),
        }
    }
}

/// Stochastic convolution `int_0^t exp(-rate (t - s)) dW_i(s)` evaluated on the
/// master grid.
///
/// Each master increment is weighted by the cell average of the kernel,
/// `exp(-rate (t - s_{k+1})) (1 - exp(-rate delta)) / (rate delta)`, i.e. the Ito
/// integral against the piecewise-linear interpolant of the sampled path.
pub fn stochastic_convolution(path: &WienerPath, component: usize, t: f64, rate: f64) -> Result<f64> {
    let delta = path.delta();
    let end = master_index(path, t)?;
    let x = rate * delta;
    let cell = if x.abs() < 1e-8 { 1.0 - 0.5 * x } else { -(-x).exp_m1() / x };
    Ok(path.weighted_increment_sum(component, 0..end, |k| {
        (-rate * (t - (k + 1) as f64 * delta)).exp() * cell
    }))
}

fn master_index(path: &WienerPath, t: f64) -> Result<usize> {
    let delta = path.delta();
    let k = (t / delta).round();
    if k < 0.0 || k > path.master_steps() as f64 || (k * delta - t).abs() > 1e-12 * path.t_final() {
        return Err(Error::Misaligned { t, step: delta });
    }
    Ok(k as usize)
}

/// Closed-form solution of the benchmark problem at time `t`:
/// `e^{-mu_1 t} sin(pi x) + sum_{k=2,3} (int_0^t e^{-mu_k (t-s)} dW(s)) sin(k pi x)`.
pub fn exact_heat_solution(path: &WienerPath, grid: SpatialGrid, t: f64, mode: ExactMode) -> Result<Field> {
    if path.dim() != 1 {
        return Err(Error::Config(format!(
            "the closed-form heat solution needs scalar noise, got m = {}",
            path.dim()
        )));
    }
    let mut out = grid.sine_mode(1);
    out.scale((-mode.eigenvalue(grid, 1) * t).exp());
    for k in [2usize, 3] {
        let c = stochastic_convolution(path, 0, t, mode.eigenvalue(grid, k))?;
        out.axpy(c, &grid.sine_mode(k))?;
    }
    Ok(out)
}

/// Verifies that `problem` carries the benchmark data the closed-form
/// solution is valid for.
pub fn check_benchmark_configuration(problem: &HeatProblem) -> Result<()> {
    let grid = problem.grid();
    let reference = benchmark_noise(grid)?;
    let same = |a: &Field, b: &Field| a.difference(b).map(|d| d.max_abs() <= 1e-12).unwrap_or(false);
    if problem.phi().dim() != 1
        || !same(&problem.phi().components()[0], &reference.components()[0])
        || !same(problem.x0(), &grid.sine_mode(1))
    {
        return Err(Error::Config(
            "closed-form heat solution requires X0 = sin(pi x) and Phi = sin(2 pi x) + sin(3 pi x)".into(),
        ));
    }
    Ok(())
}
