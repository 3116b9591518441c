use crate::error::{Error, Result};
use crate::heat::{ExactMode, HeatScheme};
use crate::noise::TimeMesh;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Equation {
    Heat,
    Wave,
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Heat => "heat",
            Self::Wave => "wave",
        })
    }
}

/// Norm in which the error at the final time is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorNorm {
    /// `L^2` norm of the displacement (the heat solution itself).
    L2,
    /// `H^1_0` seminorm of the displacement.
    H1Displacement,
    /// `L^2` norm of the velocity (wave only).
    L2Velocity,
}

impl ErrorNorm {
    pub const ALL: [ErrorNorm; 3] = [Self::L2, Self::H1Displacement, Self::L2Velocity];

    pub fn index(self) -> usize {
        match self {
            Self::L2 => 0,
            Self::H1Displacement => 1,
            Self::L2Velocity => 2,
        }
    }
}

impl FromStr for ErrorNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l2" => Ok(Self::L2),
            "h1_displacement" | "h1" => Ok(Self::H1Displacement),
            "l2_velocity" => Ok(Self::L2Velocity),
            other => Err(Error::Config(format!(
                "unknown error norm `{other}` (l2 | h1_displacement | l2_velocity)"
            ))),
        }
    }
}

impl fmt::Display for ErrorNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::L2 => "l2",
            Self::H1Displacement => "h1_displacement",
            Self::L2Velocity => "l2_velocity",
        })
    }
}

/// One Monte Carlo convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub equation: Equation,
    /// Heat scheme; the wave study always uses modified Crank-Nicolson.
    pub scheme: HeatScheme,
    pub n_list: Vec<usize>,
    /// Interior spatial nodes.
    pub k: usize,
    pub t_final: f64,
    pub mc_count: usize,
    pub base_seed: u64,
    pub master_steps: usize,
    pub n_ref: usize,
    pub exact_mode: ExactMode,
    pub error_norm: ErrorNorm,
    /// Explicit fit range; `None` selects it automatically.
    pub fit_range: Option<Vec<usize>>,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
}

fn powers_of_two(lo: usize, hi: usize) -> Vec<usize> {
    std::iter::successors(Some(lo), |n| Some(n * 2))
        .take_while(|&n| n <= hi)
        .collect()
}

impl StudyConfig {
    /// Desk-scale heat study: `N = 8..256`, 500 paths, `S = 2^16`.
    pub fn heat_default() -> Self {
        Self {
            equation: Equation::Heat,
            scheme: HeatScheme::Mcn,
            n_list: powers_of_two(8, 256),
            k: 40,
            t_final: 1.0,
            mc_count: 500,
            base_seed: 2024,
            master_steps: 1 << 16,
            n_ref: 1024,
            exact_mode: ExactMode::Continuous,
            error_norm: ErrorNorm::L2,
            fit_range: None,
            workers: None,
        }
    }

    /// Desk-scale wave study: `N = 8..128`, `N_ref = 1024`, 300 paths, `S = 2^20`.
    pub fn wave_default() -> Self {
        Self {
            equation: Equation::Wave,
            scheme: HeatScheme::Mcn,
            n_list: powers_of_two(8, 128),
            k: 40,
            t_final: 1.0,
            mc_count: 300,
            base_seed: 2024,
            master_steps: 1 << 20,
            n_ref: 1024,
            exact_mode: ExactMode::Continuous,
            error_norm: ErrorNorm::H1Displacement,
            fit_range: None,
            workers: None,
        }
    }

    /// Full-size benchmark: `N = 4..1024`, 1000 paths, `S = 2^20`
    /// (`S = 2^24` and `N_ref = 4096` for the wave equation).
    pub fn apply_full_size_preset(&mut self) {
        self.n_list = powers_of_two(4, 1024);
        self.mc_count = 1000;
        self.k = 40;
        self.t_final = 1.0;
        match self.equation {
            Equation::Heat => self.master_steps = 1 << 20,
            Equation::Wave => {
                self.n_ref = 4096;
                self.master_steps = 1 << 24;
            }
        }
    }

    pub fn validate(&mut self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(Error::Config("N list is empty".into()));
        }
        self.n_list.sort_unstable();
        self.n_list.dedup();
        if self.mc_count == 0 {
            return Err(Error::Config("Monte Carlo count must be positive".into()));
        }
        if self.k < 2 {
            return Err(Error::Config(format!("need at least 2 interior nodes, got {}", self.k)));
        }
        if !self.master_steps.is_power_of_two() {
            return Err(Error::Config(format!(
                "master step count {} is not a power of two",
                self.master_steps
            )));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("worker count must be positive".into()));
        }
        for &n in &self.n_list {
            if !n.is_power_of_two() {
                return Err(Error::Config(format!("N = {n} is not a power of two")));
            }
            self.check_aligned(n)?;
        }
        let n_max = *self.n_list.last().unwrap();
        match self.equation {
            Equation::Heat => {
                if self.error_norm == ErrorNorm::L2Velocity {
                    return Err(Error::Config("l2_velocity is only defined for the wave equation".into()));
                }
            }
            Equation::Wave => {
                if !self.n_ref.is_power_of_two() || self.n_ref <= n_max {
                    return Err(Error::Config(format!(
                        "reference steps {} must be a power of two above max N = {n_max}",
                        self.n_ref
                    )));
                }
                self.check_aligned(self.n_ref)?;
            }
        }
        if let Some(range) = &self.fit_range {
            if let Some(bad) = range.iter().find(|n| !self.n_list.contains(n)) {
                return Err(Error::Config(format!("fit range entry {bad} is not in the N list")));
            }
        }
        Ok(())
    }

    fn check_aligned(&self, n: usize) -> Result<TimeMesh> {
        let mesh = TimeMesh::new(self.t_final, n)?;
        if !self.master_steps.is_multiple_of(mesh.total_ticks()) {
            return Err(Error::Config(format!(
                "micro grid of N = {n} needs N * M = {} to divide master steps {}",
                mesh.total_ticks(),
                self.master_steps
            )));
        }
        Ok(mesh)
    }
}
