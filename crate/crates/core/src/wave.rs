//! Modified Crank-Nicolson stepper for the stochastic wave equation
//! `dX_t - Delta X dt = Phi dW` in displacement-velocity form.
//!
//! Each step is a 2x2 block system in `(X_{j+1}, Y_{j+1})`. Substituting the
//! displacement equation into the velocity equation leaves one SPD tridiagonal
//! solve with `I + (tau^2/4) L_h`, after which `X_{j+1}` is explicit.

use crate::error::{Error, Result};
use crate::grid::{build_discrete_laplacian, Field, SpatialGrid, TridiagonalLu, TridiagonalOperator};
use crate::heat::benchmark_noise;
use crate::noise::{
    coarse_increment, wave_correction_1, wave_correction_2, NoiseCoefficient, TimeMesh, WienerPath,
};

#[derive(Debug, Clone, PartialEq)]
pub struct WaveState {
    pub j: usize,
    /// Displacement.
    pub x: Field,
    /// Velocity.
    pub y: Field,
}

#[derive(Debug, Clone)]
pub struct WaveProblem {
    grid: SpatialGrid,
    phi: NoiseCoefficient,
    x0: Field,
    x1: Field,
    mesh: TimeMesh,
    laplacian: TridiagonalOperator,
    schur: TridiagonalLu,
}

impl WaveProblem {
    pub fn new(
        grid: SpatialGrid,
        phi: NoiseCoefficient,
        x0: Field,
        x1: Field,
        mesh: TimeMesh,
    ) -> Result<Self> {
        for f in [&x0, &x1, &phi.components()[0]] {
            if f.grid() != grid {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    found: f.grid().len(),
                });
            }
        }
        let laplacian = build_discrete_laplacian(grid);
        let tau = mesh.tau();
        let schur = laplacian.shifted(1.0, -0.25 * tau * tau).factor()?;
        Ok(Self {
            grid,
            phi,
            x0,
            x1,
            mesh,
            laplacian,
            schur,
        })
    }

    /// Benchmark data: `X0 = sin(pi x)`, `X1 = 0`, `Phi = sin(2 pi x) + sin(3 pi x)`.
    pub fn benchmark(grid: SpatialGrid, mesh: TimeMesh) -> Result<Self> {
        Self::new(grid, benchmark_noise(grid)?, grid.sine_mode(1), grid.zeros(), mesh)
    }

    pub fn with_mesh(&self, mesh: TimeMesh) -> Result<Self> {
        Self::new(self.grid, self.phi.clone(), self.x0.clone(), self.x1.clone(), mesh)
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn phi(&self) -> &NoiseCoefficient {
        &self.phi
    }

    pub fn mesh(&self) -> &TimeMesh {
        &self.mesh
    }

    pub fn laplacian(&self) -> &TridiagonalOperator {
        &self.laplacian
    }

    pub fn initial_state(&self) -> WaveState {
        WaveState {
            j: 0,
            x: self.x0.clone(),
            y: self.x1.clone(),
        }
    }

    /// Trapezoidal step with explicit corrections:
    ///
    /// ```text
    /// X_{j+1} - X_j = (tau/2) (Y_{j+1} + Y_j) + e1
    /// Y_{j+1} - Y_j = (tau/2) Delta_h (X_{j+1} + X_j) + forcing
    /// ```
    pub fn crank_nicolson_step(&self, state: &WaveState, e1: &Field, forcing: &Field) -> Result<WaveState> {
        if state.j >= self.mesh.steps() {
            return Err(Error::Config(format!(
                "step index {} is past the final step {}",
                state.j,
                self.mesh.steps()
            )));
        }
        let tau = self.mesh.tau();
        // Delta_h [tau X_j + (tau^2/4) Y_j + (tau/2) e1]
        let mut inner = state.x.scaled(tau);
        inner.axpy(0.25 * tau * tau, &state.y)?;
        inner.axpy(0.5 * tau, e1)?;
        let mut y_next = self.laplacian.apply(&inner)?;
        y_next.axpy(1.0, &state.y)?;
        y_next.axpy(1.0, forcing)?;
        self.schur.solve_in_place(y_next.values_mut())?;

        let mut x_next = state.x.clone();
        x_next.axpy(0.5 * tau, &y_next)?;
        x_next.axpy(0.5 * tau, &state.y)?;
        x_next.axpy(1.0, e1)?;

        let next = WaveState {
            j: state.j + 1,
            x: x_next,
            y: y_next,
        };
        #[cfg(debug_assertions)]
        {
            let (r1, r2) = self.residuals(state, &next, e1, forcing)?;
            let scale = 1.0 + next.x.max_abs() + next.y.max_abs();
            debug_assert!(r1 <= 1e-10 * scale && r2 <= 1e-10 * scale, "block residuals {r1:e} {r2:e}");
        }
        Ok(next)
    }

    /// Max-norm residuals of the displacement and velocity equations.
    pub fn residuals(
        &self,
        prev: &WaveState,
        next: &WaveState,
        e1: &Field,
        forcing: &Field,
    ) -> Result<(f64, f64)> {
        let tau = self.mesh.tau();
        let mut r1 = next.x.difference(&prev.x)?;
        r1.axpy(-0.5 * tau, &next.y)?;
        r1.axpy(-0.5 * tau, &prev.y)?;
        r1.axpy(-1.0, e1)?;

        let mut sum_x = next.x.clone();
        sum_x.axpy(1.0, &prev.x)?;
        let mut r2 = next.y.difference(&prev.y)?;
        r2.axpy(-0.5 * tau, &self.laplacian.apply(&sum_x)?)?;
        r2.axpy(-1.0, forcing)?;
        Ok((r1.max_abs(), r2.max_abs()))
    }

    /// Correction `E_1`, and `Phi Delta_{j+1} W + E_2`, for interval `j`.
    pub fn step_terms(&self, path: &WienerPath, j: usize) -> Result<(Field, Field)> {
        self.phi.check_path(path)?;
        let e1 = wave_correction_1(path, &self.mesh, j, &self.phi)?;
        let mut forcing = self.phi.combine(&coarse_increment(path, &self.mesh, j)?);
        forcing.axpy(1.0, &wave_correction_2(path, &self.mesh, j, &self.phi)?)?;
        Ok((e1, forcing))
    }

    /// `||Y||^2 + <L_h X, X>_h`, conserved by the noise-free scheme.
    pub fn discrete_energy(&self, state: &WaveState) -> Result<f64> {
        let lx = self.laplacian.apply(&state.x)?;
        Ok(state.y.inner(&state.y)? - lx.inner(&state.x)?)
    }
}

pub fn mcn_wave_step(state: &WaveState, path: &WienerPath, problem: &WaveProblem) -> Result<WaveState> {
    let (e1, forcing) = problem.step_terms(path, state.j)?;
    problem.crank_nicolson_step(state, &e1, &forcing)
}

/// Runs all `N` steps; returns `(X_N, Y_N)`.
pub fn run_wave(problem: &WaveProblem, path: &WienerPath) -> Result<(Field, Field)> {
    path.stride(problem.mesh())?;
    let mut state = problem.initial_state();
    for _ in 0..problem.mesh.steps() {
        state = mcn_wave_step(&state, path, problem)?;
    }
    Ok((state.x, state.y))
}

/// Same scheme on `n_ref` steps over the same path.
pub fn reference_wave_solution(
    problem: &WaveProblem,
    path: &WienerPath,
    n_ref: usize,
) -> Result<(Field, Field)> {
    if !n_ref.is_power_of_two() {
        return Err(Error::Config(format!("reference step count {n_ref} is not a power of two")));
    }
    let mesh = TimeMesh::new(problem.mesh.t_final(), n_ref)?;
    if !path.master_steps().is_multiple_of(mesh.total_ticks()) {
        return Err(Error::Alignment(format!(
            "reference micro grid of {} steps does not divide master step count {}",
            mesh.total_ticks(),
            path.master_steps()
        )));
    }
    run_wave(&problem.with_mesh(mesh)?, path)
}
