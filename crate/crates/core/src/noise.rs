//! Wiener paths on a dyadic master grid and the micro-grid quadratures built
//! on top of them.
//!
//! Every coarse node `t_j = j tau` and every micro node
//! `t_{j,l} = t_j + l tau^2` must coincide with a master node, so all sums
//! below are plain lookups into the stored cumulative path. No value is ever
//! interpolated.

use crate::error::{Error, Result};
use crate::grid::{build_discrete_laplacian, Field, SpatialGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Default master step count, `1024 x 1024`.
pub const DEFAULT_MASTER_STEPS: usize = 1 << 20;

const ALIGN_TOL: f64 = 1e-12;

/// Coarse grid `t_j = j tau` with `M = 1 / tau` micro steps of width `tau^2`
/// inside every coarse interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMesh {
    t_final: f64,
    steps: usize,
    micro: usize,
}

impl TimeMesh {
    /// Requires `N >= 1` and `N / T` to be a positive integer.
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final.is_finite() && t_final > 0.0) {
            return Err(Error::InvalidMesh(format!("final time must be positive, got {t_final}")));
        }
        if steps == 0 {
            return Err(Error::InvalidMesh("step count must be positive".into()));
        }
        let inv_tau = steps as f64 / t_final;
        let micro = inv_tau.round();
        if micro < 1.0 || (inv_tau - micro).abs() > ALIGN_TOL * inv_tau {
            return Err(Error::InvalidMesh(format!(
                "1/tau = {inv_tau} is not a positive integer (T = {t_final}, N = {steps})"
            )));
        }
        Ok(Self {
            t_final,
            steps,
            micro: micro as usize,
        })
    }

    /// Mesh on `[0, 1]`, where `M = N`.
    pub fn unit(steps: usize) -> Result<Self> {
        Self::new(1.0, steps)
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Micro steps per coarse interval, `M = 1 / tau`.
    pub fn micro(&self) -> usize {
        self.micro
    }

    pub fn tau(&self) -> f64 {
        1.0 / self.micro as f64
    }

    /// Width of one micro step, `tau^2 = T / (N M)`.
    pub fn micro_width(&self) -> f64 {
        self.t_final / (self.steps * self.micro) as f64
    }

    /// Global micro tick of `t_{j,l}`: `j M + l`.
    pub fn tick(&self, j: usize, l: usize) -> usize {
        j * self.micro + l
    }

    pub fn total_ticks(&self) -> usize {
        self.steps * self.micro
    }

    pub fn coarse_node(&self, j: usize) -> f64 {
        self.micro_node(j, 0)
    }

    pub fn micro_node(&self, j: usize, l: usize) -> f64 {
        self.tick(j, l) as f64 * self.micro_width()
    }

    fn check_interval(&self, j: usize) -> Result<()> {
        if j >= self.steps {
            return Err(Error::Alignment(format!(
                "interval index {j} out of range for N = {}",
                self.steps
            )));
        }
        Ok(())
    }
}

/// One `m`-dimensional Wiener realization on `S` uniform master steps.
///
/// Values are stored row-major: entry `k * m + i` is component `i` at master
/// node `s_k = k T / S`.
#[derive(Debug, Clone)]
pub struct WienerPath {
    t_final: f64,
    dim: usize,
    master_steps: usize,
    increments: Vec<f64>,
    cumulative: Vec<f64>,
}

impl WienerPath {
    /// Samples a path with the stream `0` of `seed`.
    pub fn sample(seed: u64, mesh: &TimeMesh, dim: usize, master_steps: usize) -> Result<Self> {
        Self::sample_stream(seed, 0, mesh, dim, master_steps)
    }

    /// Samples a path from an independent ChaCha stream selected by `stream`.
    ///
    /// Monte Carlo realization `r` uses `stream = r` under a shared base seed.
    pub fn sample_stream(
        seed: u64,
        stream: u64,
        mesh: &TimeMesh,
        dim: usize,
        master_steps: usize,
    ) -> Result<Self> {
        check_master_steps(mesh, master_steps)?;
        if dim == 0 {
            return Err(Error::Config("noise dimension must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let std = (mesh.t_final() / master_steps as f64).sqrt();
        let increments: Vec<f64> = (0..master_steps * dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                std * z
            })
            .collect();
        Ok(Self::from_increments(mesh.t_final(), dim, increments))
    }

    /// Builds a path from row-major increments (`S * m` values).
    ///
    /// The stored increments are re-derived from the accumulated values so
    /// that `W(s_k) - W(s_{k-1})` reproduces them exactly.
    pub fn from_increments(t_final: f64, dim: usize, mut increments: Vec<f64>) -> Self {
        let master_steps = increments.len() / dim;
        let mut cumulative = vec![0.0; (master_steps + 1) * dim];
        for k in 0..master_steps {
            for i in 0..dim {
                cumulative[(k + 1) * dim + i] = cumulative[k * dim + i] + increments[k * dim + i];
            }
        }
        for (idx, inc) in increments.iter_mut().enumerate() {
            *inc = cumulative[idx + dim] - cumulative[idx];
        }
        Self {
            t_final,
            dim,
            master_steps,
            increments,
            cumulative,
        }
    }

    /// Deterministic test path `W(s_k) = f(s_k)` for every component.
    ///
    /// `f(0)` need not vanish; this is how degenerate constant paths are built.
    pub fn from_fn(t_final: f64, dim: usize, master_steps: usize, f: impl Fn(f64) -> f64) -> Self {
        let delta = t_final / master_steps as f64;
        let mut cumulative = Vec::with_capacity((master_steps + 1) * dim);
        for k in 0..=master_steps {
            let v = f(k as f64 * delta);
            cumulative.extend(std::iter::repeat_n(v, dim));
        }
        let increments = (0..master_steps * dim)
            .map(|idx| cumulative[idx + dim] - cumulative[idx])
            .collect();
        Self {
            t_final,
            dim,
            master_steps,
            increments,
            cumulative,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn master_steps(&self) -> usize {
        self.master_steps
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    /// Master step `delta = T / S`.
    pub fn delta(&self) -> f64 {
        self.t_final / self.master_steps as f64
    }

    /// `W(s_k)` for master index `k`.
    pub fn at_index(&self, k: usize) -> &[f64] {
        &self.cumulative[k * self.dim..(k + 1) * self.dim]
    }

    /// `W(s_k) - W(s_{k-1})` for `k >= 1`, exactly as sampled.
    pub fn increment(&self, k: usize) -> &[f64] {
        &self.increments[(k - 1) * self.dim..k * self.dim]
    }

    fn component(&self, k: usize, i: usize) -> f64 {
        self.cumulative[k * self.dim + i]
    }

    /// `W(t)`; `t` must be a master node to within `1e-12 T`.
    pub fn value_at(&self, t: f64) -> Result<Vec<f64>> {
        let delta = self.delta();
        let k = (t / delta).round();
        if !(0.0..=self.master_steps as f64).contains(&k)
            || (k * delta - t).abs() > ALIGN_TOL * self.t_final
        {
            return Err(Error::Misaligned { t, step: delta });
        }
        Ok(self.at_index(k as usize).to_vec())
    }

    /// Master steps per micro step for `mesh`.
    pub fn stride(&self, mesh: &TimeMesh) -> Result<usize> {
        if (self.t_final - mesh.t_final()).abs() > ALIGN_TOL * mesh.t_final() {
            return Err(Error::Alignment(format!(
                "path covers [0, {}] but mesh covers [0, {}]",
                self.t_final,
                mesh.t_final()
            )));
        }
        let ticks = mesh.total_ticks();
        if !self.master_steps.is_multiple_of(ticks) {
            return Err(Error::Alignment(format!(
                "N * M = {ticks} does not divide master step count {}",
                self.master_steps
            )));
        }
        Ok(self.master_steps / ticks)
    }

    /// `W(t_{j,l})`.
    pub fn micro_value(&self, mesh: &TimeMesh, j: usize, l: usize) -> Result<&[f64]> {
        let stride = self.stride(mesh)?;
        Ok(self.at_index(mesh.tick(j, l) * stride))
    }

    /// Left-point Ito sum `sum_k g(s_k) (W(s_{k+1}) - W(s_k))` of component `i`
    /// over the master steps `k` in `range`.
    pub fn weighted_increment_sum(
        &self,
        i: usize,
        range: std::ops::Range<usize>,
        mut weight: impl FnMut(usize) -> f64,
    ) -> f64 {
        range.map(|k| weight(k) * self.increments[k * self.dim + i]).sum()
    }

    /// Trapezoidal integral of `g(s) (W_i(s) - c)` over master nodes `lo..=hi`.
    fn trapezoid(&self, i: usize, lo: usize, hi: usize, c: f64, g: impl Fn(f64) -> f64) -> f64 {
        let delta = self.delta();
        let f = |k: usize| g(k as f64 * delta) * (self.component(k, i) - c);
        let mut s = 0.5 * (f(lo) + f(hi));
        for k in lo + 1..hi {
            s += f(k);
        }
        s * delta
    }
}

fn check_master_steps(mesh: &TimeMesh, master_steps: usize) -> Result<()> {
    if !master_steps.is_power_of_two() {
        return Err(Error::Alignment(format!(
            "master step count {master_steps} is not a power of two"
        )));
    }
    let ticks = mesh.total_ticks();
    if !master_steps.is_multiple_of(ticks) {
        return Err(Error::Alignment(format!(
            "micro grid of N * M = {ticks} steps does not divide master step count {master_steps}"
        )));
    }
    Ok(())
}

/// Additive noise coefficient `Phi = (Phi_1, ..., Phi_m)` with the discrete
/// Laplacians `Delta_h Phi_i` precomputed once.
#[derive(Debug, Clone)]
pub struct NoiseCoefficient {
    components: Vec<Field>,
    laplacians: Vec<Field>,
}

impl NoiseCoefficient {
    pub fn new(grid: SpatialGrid, components: Vec<Field>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("noise coefficient needs at least one component".into()));
        }
        let lap = build_discrete_laplacian(grid);
        let mut laplacians = Vec::with_capacity(components.len());
        for c in &components {
            if c.grid() != grid {
                return Err(Error::DimensionMismatch {
                    expected: grid.len(),
                    found: c.grid().len(),
                });
            }
            laplacians.push(lap.apply(c)?);
        }
        Ok(Self {
            components,
            laplacians,
        })
    }

    /// `Phi = 0` with `m` components.
    pub fn zero(grid: SpatialGrid, dim: usize) -> Result<Self> {
        Self::new(grid, vec![grid.zeros(); dim])
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn grid(&self) -> SpatialGrid {
        self.components[0].grid()
    }

    pub fn components(&self) -> &[Field] {
        &self.components
    }

    pub fn laplacians(&self) -> &[Field] {
        &self.laplacians
    }

    /// `sum_i Phi_i w_i`.
    pub fn combine(&self, weights: &[f64]) -> Field {
        combine(&self.components, weights)
    }

    /// `sum_i (Delta_h Phi_i) w_i`.
    pub fn combine_laplacian(&self, weights: &[f64]) -> Field {
        combine(&self.laplacians, weights)
    }

    pub fn check_path(&self, path: &WienerPath) -> Result<()> {
        if path.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: path.dim(),
            });
        }
        Ok(())
    }
}

fn combine(fields: &[Field], weights: &[f64]) -> Field {
    let mut out = fields[0].grid().zeros();
    for (f, &w) in fields.iter().zip(weights) {
        if w != 0.0 {
            for (o, v) in out.values_mut().iter_mut().zip(f.values()) {
                *o += w * v;
            }
        }
    }
    out
}

/// Coarse increment `W(t_{j+1}) - W(t_j)`.
pub fn coarse_increment(path: &WienerPath, mesh: &TimeMesh, j: usize) -> Result<Vec<f64>> {
    mesh.check_interval(j)?;
    let stride = path.stride(mesh)?;
    let a = path.at_index(mesh.tick(j, 0) * stride);
    let b = path.at_index(mesh.tick(j + 1, 0) * stride);
    Ok(b.iter().zip(a).map(|(b, a)| b - a).collect())
}

/// `sum_{l=1}^{M} c_l W(t_{j,l})` componentwise.
fn weighted_micro_sum(
    path: &WienerPath,
    mesh: &TimeMesh,
    j: usize,
    coefficient: impl Fn(usize) -> f64,
) -> Result<Vec<f64>> {
    mesh.check_interval(j)?;
    let stride = path.stride(mesh)?;
    let mut out = vec![0.0; path.dim()];
    for l in 1..=mesh.micro() {
        let c = coefficient(l);
        let w = path.at_index(mesh.tick(j, l) * stride);
        for (o, v) in out.iter_mut().zip(w) {
            *o += c * v;
        }
    }
    Ok(out)
}

/// Micro-grid Riemann sum `sum_{l=1}^{M} tau^2 W(t_{j,l})` approximating
/// `int_{t_j}^{t_{j+1}} W(s) ds`.
pub fn micro_sum_heat(path: &WienerPath, mesh: &TimeMesh, j: usize) -> Result<Vec<f64>> {
    let w = mesh.micro_width();
    weighted_micro_sum(path, mesh, j, |_| w)
}

/// Scalar weights `I_j - (tau/2) (W(t_{j+1}) + W(t_j))` shared by the heat
/// correction and the first wave correction.
fn trapezoid_mismatch(path: &WienerPath, mesh: &TimeMesh, j: usize) -> Result<Vec<f64>> {
    let mut sum = micro_sum_heat(path, mesh, j)?;
    let stride = path.stride(mesh)?;
    let a = path.at_index(mesh.tick(j, 0) * stride);
    let b = path.at_index(mesh.tick(j + 1, 0) * stride);
    let half_tau = 0.5 * mesh.tau();
    for ((s, a), b) in sum.iter_mut().zip(a).zip(b) {
        *s -= half_tau * (a + b);
    }
    Ok(sum)
}

/// Heat correction term: `Delta_h [Phi I_j] - (tau/2) Delta_h [Phi (W(t_{j+1}) + W(t_j))]`.
pub fn heat_correction(
    path: &WienerPath,
    mesh: &TimeMesh,
    j: usize,
    phi: &NoiseCoefficient,
) -> Result<Field> {
    phi.check_path(path)?;
    Ok(phi.combine_laplacian(&trapezoid_mismatch(path, mesh, j)?))
}

/// First wave correction: `sum_l tau^2 Phi W(t_{j,l}) - (tau/2) Phi (W(t_{j+1}) + W(t_j))`.
pub fn wave_correction_1(
    path: &WienerPath,
    mesh: &TimeMesh,
    j: usize,
    phi: &NoiseCoefficient,
) -> Result<Field> {
    phi.check_path(path)?;
    Ok(phi.combine(&trapezoid_mismatch(path, mesh, j)?))
}

/// Scalar part of the second wave correction,
/// `(1/2) sum_l (2 t_{j+1} - tau - 2 t_{j,l}) tau^2 W(t_{j,l})`.
///
/// With `t_{j+1} - t_{j,l} = (M - l) tau^2` the weight is `(M - 2l) tau^4 / 2`.
pub fn wave_second_weights(path: &WienerPath, mesh: &TimeMesh, j: usize) -> Result<Vec<f64>> {
    let w = mesh.micro_width();
    let half_w2 = 0.5 * w * w;
    let m = mesh.micro() as f64;
    weighted_micro_sum(path, mesh, j, |l| (m - 2.0 * l as f64) * half_w2)
}

/// Second wave correction: `(1/2) sum_l (2 t_{j+1} - tau - 2 t_{j,l}) tau^2 Delta_h [Phi W(t_{j,l})]`.
pub fn wave_correction_2(
    path: &WienerPath,
    mesh: &TimeMesh,
    j: usize,
    phi: &NoiseCoefficient,
) -> Result<Field> {
    phi.check_path(path)?;
    Ok(phi.combine_laplacian(&wave_second_weights(path, mesh, j)?))
}

/// Quadrature defect `int_{t_j}^{t_{j+1}} W ds - I_j`.
///
/// The integral is taken with the trapezoidal rule on the master grid.
pub fn micro_defect_heat(path: &WienerPath, mesh: &TimeMesh, j: usize) -> Result<Vec<f64>> {
    let ijw = micro_sum_heat(path, mesh, j)?;
    let stride = path.stride(mesh)?;
    let lo = mesh.tick(j, 0) * stride;
    let hi = mesh.tick(j + 1, 0) * stride;
    Ok((0..path.dim())
        .map(|i| path.trapezoid(i, lo, hi, 0.0, |_| 1.0) - ijw[i])
        .collect())
}

/// Pieces of the wave double-integral defect on interval `j`:
/// `Q_{j+1} - I_{j+1} = old + curr + s`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveDefect {
    /// `tau int_0^{t_j} W ds - tau sum_{m<j} sum_l tau^2 W(t_{m,l})`.
    pub old: Vec<f64>,
    /// `sum_l int (t_{j+1} - s) (W(s) - W(t_{j,l})) ds` over the micro intervals of `j`.
    pub curr: Vec<f64>,
    /// `sum_l (tau^4 / 2) W(t_{j,l})`.
    pub s: Vec<f64>,
}

impl WaveDefect {
    pub fn total(&self) -> Vec<f64> {
        self.old
            .iter()
            .zip(&self.curr)
            .zip(&self.s)
            .map(|((a, b), c)| a + b + c)
            .collect()
    }
}

/// Computes the wave defect decomposition, with every continuous integral
/// evaluated by the master-grid trapezoidal rule.
pub fn wave_defect(path: &WienerPath, mesh: &TimeMesh, j: usize) -> Result<WaveDefect> {
    mesh.check_interval(j)?;
    let stride = path.stride(mesh)?;
    let dim = path.dim();
    let tau = mesh.tau();
    let w = mesh.micro_width();
    let t_next = mesh.coarse_node(j + 1);

    let mut old = vec![0.0; dim];
    let mut curr = vec![0.0; dim];
    let mut s = vec![0.0; dim];
    for i in 0..dim {
        for m in 0..j {
            for l in 1..=mesh.micro() {
                let b = mesh.tick(m, l) * stride;
                let a = b - stride;
                old[i] += tau * path.trapezoid(i, a, b, path.component(b, i), |_| 1.0);
            }
        }
        for l in 1..=mesh.micro() {
            let b = mesh.tick(j, l) * stride;
            let a = b - stride;
            let wb = path.component(b, i);
            curr[i] += path.trapezoid(i, a, b, wb, |t| t_next - t);
            s[i] += 0.5 * w * w * wb;
        }
    }
    Ok(WaveDefect { old, curr, s })
}

/// `E |J_j|^2 = (m/3) tau^5` for the heat micro-grid defect.
pub fn micro_moment_exact_heat(tau: f64, dim: usize) -> f64 {
    dim as f64 / 3.0 * tau.powi(5)
}

/// `E |S_j|^2 = (m tau^8 / 4) sum_{l,l'=1}^{M} min(t_{j,l}, t_{j,l'})`.
///
/// The symmetric double sum collapses to `sum_l t_{j,l} (2 (M - l) + 1)`.
pub fn s_moment_exact_wave(mesh: &TimeMesh, j: usize, dim: usize) -> f64 {
    let big_m = mesh.micro();
    let sum: f64 = (1..=big_m)
        .map(|l| mesh.micro_node(j, l) * (2 * (big_m - l) + 1) as f64)
        .sum();
    dim as f64 * mesh.tau().powi(8) / 4.0 * sum
}

/// Exact `E |old_j|^2 = m t_j tau^6 / 3` (the `j M` micro intervals before
/// `t_j` each contribute `tau^2 * tau^6 / 3`).
pub fn old_moment_exact_wave(mesh: &TimeMesh, j: usize, dim: usize) -> f64 {
    dim as f64 * mesh.coarse_node(j) * mesh.tau().powi(6) / 3.0
}

/// Upper bound `m t_j tau^5 / 3` on `E |old_j|^2`.
pub fn old_moment_bound_wave(mesh: &TimeMesh, j: usize, dim: usize) -> f64 {
    dim as f64 * mesh.coarse_node(j) * mesh.tau().powi(5) / 3.0
}

/// Upper bound `m tau^6` on `E |curr_j|^2`.
pub fn curr_moment_bound_wave(tau: f64, dim: usize) -> f64 {
    dim as f64 * tau.powi(6)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mesh(n: usize) -> TimeMesh {
        TimeMesh::unit(n).unwrap()
    }

    #[test]
    fn mesh_requires_integer_inverse_step() {
        assert!(TimeMesh::new(1.0, 0).is_err());
        assert!(TimeMesh::new(1.5, 2).is_err());
        assert!(TimeMesh::new(-1.0, 2).is_err());
        let m = TimeMesh::new(0.25, 4).unwrap();
        assert_eq!(m.micro(), 16);
        assert_eq!(mesh(8).micro(), 8);
    }

    #[test]
    fn micro_grid_tiles_coarse_grid_exactly() {
        for n in [1usize, 2, 4, 8, 16, 64] {
            let m = mesh(n);
            for j in 0..n {
                assert_eq!(m.micro_node(j, m.micro()), m.coarse_node(j + 1));
                assert_eq!(m.coarse_node(j), j as f64 * m.tau());
            }
        }
        let m = TimeMesh::new(0.375, 3).unwrap();
        for j in 0..3 {
            assert_eq!(m.micro_node(j, m.micro()).to_bits(), m.coarse_node(j + 1).to_bits());
        }
    }

    #[test]
    fn sampling_is_deterministic_and_checks_alignment() {
        let m = mesh(8);
        let a = WienerPath::sample(11, &m, 2, 256).unwrap();
        let b = WienerPath::sample(11, &m, 2, 256).unwrap();
        assert_eq!(a.cumulative, b.cumulative);
        let c = WienerPath::sample_stream(11, 1, &m, 2, 256).unwrap();
        assert_ne!(a.cumulative, c.cumulative);
        assert!(WienerPath::sample(11, &m, 1, 32).is_err());
        assert!(WienerPath::sample(11, &m, 1, 192).is_err());
        assert!(WienerPath::sample(11, &m, 0, 256).is_err());
    }

    #[test]
    fn cumulative_values_match_increments() {
        let m = mesh(4);
        let p = WienerPath::sample(3, &m, 2, 64).unwrap();
        assert_eq!(p.at_index(0), &[0.0, 0.0]);
        for k in 1..=64 {
            for i in 0..2 {
                assert_eq!(p.component(k, i) - p.component(k - 1, i), p.increment(k)[i]);
            }
        }
    }

    #[test]
    fn value_at_rejects_off_grid_times() {
        let m = mesh(4);
        let p = WienerPath::sample(5, &m, 1, 64).unwrap();
        assert_eq!(p.value_at(0.0).unwrap(), vec![0.0]);
        assert_eq!(p.value_at(0.5).unwrap(), p.at_index(32).to_vec());
        assert!(matches!(p.value_at(0.5 + 1.0 / 128.0), Err(Error::Misaligned { .. })));
        assert!(p.value_at(1.5).is_err());
    }

    #[test]
    fn micro_sum_of_identity_path() {
        let n = 8;
        let m = mesh(n);
        let p = WienerPath::from_fn(1.0, 1, 256, |t| t);
        let tau = m.tau();
        for j in 0..n {
            let got = micro_sum_heat(&p, &m, j).unwrap()[0];
            let tj = m.coarse_node(j);
            let closed = tau * tj + tau * tau * (1.0 + tau) / 2.0;
            let direct: f64 = (1..=m.micro()).map(|l| tau * tau * (tj + l as f64 * tau * tau)).sum();
            assert!((got - closed).abs() < 1e-14, "{got} {closed}");
            assert!((got - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn micro_sum_of_constant_and_zero_paths() {
        let m = mesh(16);
        let p = WienerPath::from_fn(1.0, 2, 256, |_| 2.5);
        let s = micro_sum_heat(&p, &m, 0).unwrap();
        assert!(s.iter().all(|v| (v - m.tau() * 2.5).abs() < 1e-15));
        let z = WienerPath::from_fn(1.0, 1, 256, |_| 0.0);
        assert_eq!(micro_sum_heat(&z, &m, 3).unwrap(), vec![0.0]);
        assert!(micro_sum_heat(&z, &m, 16).is_err());
    }

    fn spike_phi(grid: SpatialGrid) -> NoiseCoefficient {
        let mut f = grid.zeros();
        f.values_mut()[2] = 1.0;
        NoiseCoefficient::new(grid, vec![f]).unwrap()
    }

    #[test]
    fn corrections_vanish_on_zero_and_constant_paths() {
        let g = SpatialGrid::new(6).unwrap();
        let phi = spike_phi(g);
        let m = mesh(8);
        for c in [0.0, 1.7, -3.0] {
            let p = WienerPath::from_fn(1.0, 1, 64, |_| c);
            for j in 0..8 {
                assert!(heat_correction(&p, &m, j, &phi).unwrap().max_abs() < 1e-14);
                assert!(wave_correction_1(&p, &m, j, &phi).unwrap().max_abs() < 1e-14);
            }
        }
    }

    #[test]
    fn heat_correction_on_identity_path() {
        let g = SpatialGrid::new(6).unwrap();
        let phi = NoiseCoefficient::new(g, vec![g.sine_mode(2)]).unwrap();
        let m = mesh(8);
        let tau = m.tau();
        let p = WienerPath::from_fn(1.0, 1, 64, |t| t);
        for j in 0..8 {
            let tj = m.coarse_node(j);
            let scalar = tau * tj + tau * tau * (1.0 + tau) / 2.0 - tau / 2.0 * (2.0 * tj + tau);
            // equals tau^3 / 2
            assert!((scalar - tau.powi(3) / 2.0).abs() < 1e-15);
            let expect = phi.laplacians()[0].scaled(scalar);
            let got = heat_correction(&p, &m, j, &phi).unwrap();
            assert!(got.difference(&expect).unwrap().max_abs() < 1e-11);
        }
    }

    #[test]
    fn first_wave_correction_on_identity_path_by_direct_summation() {
        let g = SpatialGrid::new(6).unwrap();
        let phi = spike_phi(g);
        let m = mesh(16);
        let tau = m.tau();
        let p = WienerPath::from_fn(1.0, 1, 256, |t| t);
        for j in [0, 5, 15] {
            let tj = j as f64 * tau;
            let direct: f64 = (1..=16).map(|l| tau * tau * (tj + l as f64 * tau * tau)).sum::<f64>()
                - tau / 2.0 * (tj + (tj + tau));
            let got = wave_correction_1(&p, &m, j, &phi).unwrap();
            assert!((got.values()[2] - direct).abs() < 1e-15);
            assert_eq!(got.values()[0], 0.0);
        }
    }

    #[test]
    fn second_wave_correction_on_constant_path() {
        let g = SpatialGrid::new(5).unwrap();
        let phi = NoiseCoefficient::new(g, vec![g.sine_mode(1)]).unwrap();
        let c = 0.8;
        for n in [2usize, 4, 8, 16] {
            let m = mesh(n);
            let tau = m.tau();
            let p = WienerPath::from_fn(1.0, 1, n * n, |_| c);
            // sum_l (2 t_{j+1} - tau - 2 t_{j,l}) tau^2 = -tau^3
            let direct: f64 = (1..=n)
                .map(|l| (2.0 * tau - tau - 2.0 * l as f64 * tau * tau) * tau * tau)
                .sum();
            assert!((direct + tau.powi(3)).abs() < 1e-15);
            let expect = phi.laplacians()[0].scaled(-0.5 * tau.powi(3) * c);
            for j in 0..n {
                let got = wave_correction_2(&p, &m, j, &phi).unwrap();
                let scale = expect.max_abs();
                assert!(got.difference(&expect).unwrap().max_abs() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn heat_defect_of_identity_path() {
        // int_{t_j}^{t_{j+1}} s ds = tau t_j + tau^2/2; trapezoid is exact for linear W.
        let m = mesh(8);
        let tau = m.tau();
        let p = WienerPath::from_fn(1.0, 1, 1024, |t| t);
        for j in 0..8 {
            let tj = m.coarse_node(j);
            let exact = tau * tj + tau * tau / 2.0;
            let ijw = tau * tj + tau * tau * (1.0 + tau) / 2.0;
            let got = micro_defect_heat(&p, &m, j).unwrap()[0];
            assert!((got - (exact - ijw)).abs() < 1e-14);
        }
        let z = WienerPath::from_fn(1.0, 2, 64, |_| 0.0);
        assert_eq!(micro_defect_heat(&z, &m, 1).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn exact_moment_formulas() {
        assert!((micro_moment_exact_heat(1.0 / 16.0, 1) - 16f64.powi(-5) / 3.0).abs() < 1e-22);
        assert_eq!(micro_moment_exact_heat(0.25, 0), 0.0);
        assert!((micro_moment_exact_heat(0.25, 3) - 4f64.powi(-5)).abs() < 1e-18);

        let m = mesh(2);
        let tau = 0.5f64;
        assert_eq!(s_moment_exact_wave(&m, 0, 0), 0.0);
        let expect = 5.0 * tau.powi(10) / 4.0;
        assert!((s_moment_exact_wave(&m, 0, 1) - expect).abs() < 1e-18);
    }

    #[test]
    fn s_moment_matches_double_loop() {
        for n in [2usize, 4, 8] {
            let m = mesh(n);
            for j in 0..n {
                let mut brute = 0.0;
                for l in 1..=m.micro() {
                    for lp in 1..=m.micro() {
                        brute += m.micro_node(j, l).min(m.micro_node(j, lp));
                    }
                }
                brute *= 2.0 * m.tau().powi(8) / 4.0;
                let got = s_moment_exact_wave(&m, j, 2);
                assert!((got - brute).abs() <= 1e-12 * brute);
            }
        }
    }

    #[test]
    fn wave_defect_pieces_sum_to_full_quadrature_error() {
        let m = TimeMesh::new(0.5, 4).unwrap();
        let p = WienerPath::sample(9, &m, 2, 4 * 8 * 16).unwrap();
        let tau = m.tau();
        let stride = p.stride(&m).unwrap();
        for j in 0..4 {
            let d = wave_defect(&p, &m, j).unwrap();
            let t_next = m.coarse_node(j + 1);
            let t_j = m.coarse_node(j);
            for i in 0..2 {
                // Q_{j+1} = tau int_0^{t_j} W + int_{t_j}^{t_{j+1}} (t_{j+1} - s) W ds
                let lo = m.tick(j, 0) * stride;
                let hi = m.tick(j + 1, 0) * stride;
                let q = tau * p.trapezoid(i, 0, lo, 0.0, |_| 1.0)
                    + p.trapezoid(i, lo, hi, 0.0, |s| t_next - s);
                let mut riemann = 0.0;
                for mm in 0..j {
                    for l in 1..=m.micro() {
                        riemann += tau * tau * tau * p.value_at(m.micro_node(mm, l)).unwrap()[i];
                    }
                }
                for l in 1..=m.micro() {
                    let t = m.micro_node(j, l);
                    riemann += (t_next - t) * tau * tau * p.value_at(t).unwrap()[i];
                }
                let total = d.total()[i];
                assert!(
                    (total - (q - riemann)).abs() < 1e-13,
                    "j={j} t_j={t_j} {total} {}",
                    q - riemann
                );
            }
        }
    }
}
