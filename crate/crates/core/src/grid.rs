//! Uniform finite-difference mesh on the unit interval with homogeneous
//! Dirichlet boundary values.
//!
//! Only interior nodes `x_i = i h`, `i = 1..=K`, are stored. The boundary
//! values at `x = 0` and `x = 1` are zero everywhere in this module, so every
//! [`Field`] satisfies the Dirichlet condition structurally.

use crate::error::{Error, Result};
use std::f64::consts::PI;

/// Smallest pivot magnitude accepted by the tridiagonal elimination.
pub const PIVOT_TOLERANCE: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpatialGrid {
    interior: usize,
}

impl SpatialGrid {
    pub fn new(interior: usize) -> Result<Self> {
        if interior < 2 {
            return Err(Error::Config(format!(
                "spatial grid needs at least 2 interior nodes, got {interior}"
            )));
        }
        Ok(Self { interior })
    }

    /// Number of interior nodes `K`.
    pub fn len(&self) -> usize {
        self.interior
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Mesh width `h = 1 / (K + 1)`.
    pub fn h(&self) -> f64 {
        1.0 / (self.interior + 1) as f64
    }

    /// Coordinate of interior node `i` (1-based, `1 ..= K`).
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.interior).map(move |i| self.node(i))
    }

    pub fn zeros(&self) -> Field {
        Field {
            grid: *self,
            values: vec![0.0; self.interior],
        }
    }

    /// Samples `f` at the interior nodes.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: *self,
            values: self.nodes().map(f).collect(),
        }
    }

    /// Grid samples of `sin(k pi x)`.
    pub fn sine_mode(&self, k: usize) -> Field {
        let kf = k as f64;
        self.sample(|x| (kf * PI * x).sin())
    }

    /// Eigenvalue of `-Delta_h` belonging to `sin(k pi x)`: `(4/h^2) sin^2(k pi h / 2)`.
    pub fn laplacian_eigenvalue(&self, k: usize) -> f64 {
        let h = self.h();
        let s = (k as f64 * PI * h / 2.0).sin();
        4.0 / (h * h) * s * s
    }
}

/// Real values on the interior nodes of a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: SpatialGrid,
    values: Vec<f64>,
}

impl Field {
    pub fn from_values(grid: SpatialGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                found: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn grid(&self) -> SpatialGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch {
                expected: self.grid.len(),
                found: other.grid.len(),
            });
        }
        Ok(())
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &Field) -> Result<()> {
        self.check_same_grid(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn scaled(&self, alpha: f64) -> Field {
        let mut out = self.clone();
        out.scale(alpha);
        out
    }

    pub fn difference(&self, other: &Field) -> Result<Field> {
        let mut out = self.clone();
        out.axpy(-1.0, other)?;
        Ok(out)
    }

    /// Discrete inner product `h * sum_i f_i g_i`.
    pub fn inner(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        let s: f64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum();
        Ok(self.grid.h() * s)
    }

    /// Rectangle-rule `L^2(0,1)` norm.
    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v * v).sum();
        (self.grid.h() * s).sqrt()
    }

    /// Discrete `H^1_0` seminorm from forward differences, boundary values included.
    pub fn h1_seminorm(&self) -> f64 {
        let h = self.grid.h();
        let n = self.values.len();
        let at = |i: usize| -> f64 {
            if i == 0 || i == n + 1 {
                0.0
            } else {
                self.values[i - 1]
            }
        };
        let s: f64 = (0..=n)
            .map(|i| {
                let d = (at(i + 1) - at(i)) / h;
                d * d
            })
            .sum();
        (h * s).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Tridiagonal matrix stored by diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalOperator {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalOperator {
    pub fn new(lower: Vec<f64>, diag: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        for band in [&lower, &upper] {
            if band.len() + 1 != n {
                return Err(Error::DimensionMismatch {
                    expected: n.saturating_sub(1),
                    found: band.len(),
                });
            }
        }
        Ok(Self { lower, diag, upper })
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, alpha: f64) -> Self {
        Self {
            lower: vec![0.0; n.saturating_sub(1)],
            diag: vec![alpha; n],
            upper: vec![0.0; n.saturating_sub(1)],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// `alpha * I + beta * self`.
    pub fn shifted(&self, alpha: f64, beta: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|v| beta * v).collect(),
            diag: self.diag.iter().map(|v| alpha + beta * v).collect(),
            upper: self.upper.iter().map(|v| beta * v).collect(),
        }
    }

    pub fn is_symmetric(&self) -> bool {
        self.lower == self.upper
    }

    pub fn is_strictly_diagonally_dominant(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| {
            let off = if i > 0 { self.lower[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.upper[i].abs() } else { 0.0 };
            self.diag[i].abs() > off
        })
    }

    pub fn apply_slice(&self, f: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if f.len() != n || out.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if f.len() != n { f.len() } else { out.len() },
            });
        }
        for i in 0..n {
            let mut v = self.diag[i] * f[i];
            if i > 0 {
                v += self.lower[i - 1] * f[i - 1];
            }
            if i + 1 < n {
                v += self.upper[i] * f[i + 1];
            }
            out[i] = v;
        }
        Ok(())
    }

    /// Matrix-vector product.
    pub fn apply(&self, f: &Field) -> Result<Field> {
        let mut out = f.grid.zeros();
        self.apply_slice(&f.values, &mut out.values)?;
        Ok(out)
    }

    /// LU factorization without pivoting, reusable across right-hand sides.
    pub fn factor(&self) -> Result<TridiagonalLu> {
        let n = self.dim();
        let mut pivots = Vec::with_capacity(n);
        let mut multipliers = Vec::with_capacity(n.saturating_sub(1));
        let mut pivot = self.diag.first().copied().unwrap_or(1.0);
        for i in 0..n {
            if i > 0 {
                let l = self.lower[i - 1] / pivots[i - 1];
                multipliers.push(l);
                pivot = self.diag[i] - l * self.upper[i - 1];
            }
            if pivot.abs() < PIVOT_TOLERANCE {
                return Err(Error::SingularPivot { row: i, pivot });
            }
            pivots.push(pivot);
        }
        Ok(TridiagonalLu {
            multipliers,
            pivots,
            upper: self.upper.clone(),
        })
    }

    pub fn solve(&self, rhs: &Field) -> Result<Field> {
        self.factor()?.solve(rhs)
    }
}

/// Forward-sweep / back-substitution factors of a [`TridiagonalOperator`].
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    multipliers: Vec<f64>,
    pivots: Vec<f64>,
    upper: Vec<f64>,
}

impl TridiagonalLu {
    pub fn dim(&self) -> usize {
        self.pivots.len()
    }

    /// Solves in place: on return `x` holds the solution for right side `x`.
    pub fn solve_in_place(&self, x: &mut [f64]) -> Result<()> {
        let n = self.dim();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: x.len(),
            });
        }
        for i in 1..n {
            x[i] -= self.multipliers[i - 1] * x[i - 1];
        }
        for i in (0..n).rev() {
            if i + 1 < n {
                x[i] -= self.upper[i] * x[i + 1];
            }
            x[i] /= self.pivots[i];
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &Field) -> Result<Field> {
        let mut out = rhs.clone();
        self.solve_in_place(&mut out.values)?;
        Ok(out)
    }
}

/// Second-difference approximation of the Laplacian, `(f_{i-1} - 2 f_i + f_{i+1}) / h^2`.
pub fn build_discrete_laplacian(grid: SpatialGrid) -> TridiagonalOperator {
    let n = grid.len();
    let inv_h2 = 1.0 / (grid.h() * grid.h());
    TridiagonalOperator {
        lower: vec![inv_h2; n - 1],
        diag: vec![-2.0 * inv_h2; n],
        upper: vec![inv_h2; n - 1],
    }
}

pub fn solve_tridiagonal(op: &TridiagonalOperator, rhs: &Field) -> Result<Field> {
    op.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(op: &TridiagonalOperator) -> Vec<Vec<f64>> {
        let n = op.dim();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            a[i][i] = op.diag()[i];
            if i > 0 {
                a[i][i - 1] = op.lower()[i - 1];
            }
            if i + 1 < n {
                a[i][i + 1] = op.upper()[i];
            }
        }
        a
    }

    fn dense_matvec(a: &[Vec<f64>], f: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(f).map(|(x, y)| x * y).sum())
            .collect()
    }

    #[test]
    fn grid_rejects_single_node() {
        assert!(SpatialGrid::new(1).is_err());
        let g = SpatialGrid::new(40).unwrap();
        assert!((g.h() * 41.0 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn laplacian_of_zero_is_zero() {
        let g = SpatialGrid::new(7).unwrap();
        let lap = build_discrete_laplacian(g);
        assert_eq!(lap.apply(&g.zeros()).unwrap(), g.zeros());
    }

    #[test]
    fn laplacian_two_by_two_by_hand() {
        // h = 1/3: (0 - 2 + 1) * 9 = -9 in both rows.
        let g = SpatialGrid::new(2).unwrap();
        let f = Field::from_values(g, vec![1.0, 1.0]).unwrap();
        let out = build_discrete_laplacian(g).apply(&f).unwrap();
        for v in out.values() {
            assert!((v + 9.0).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn sine_modes_are_eigenvectors_by_dense_product() {
        for k_nodes in 2..=16 {
            let g = SpatialGrid::new(k_nodes).unwrap();
            let lap = build_discrete_laplacian(g);
            let a = dense(&lap);
            for k in 1..=k_nodes {
                let f = g.sine_mode(k);
                let lf = dense_matvec(&a, f.values());
                let lam = g.laplacian_eigenvalue(k);
                for (x, y) in lf.iter().zip(f.values()) {
                    assert!((x + lam * y).abs() < 1e-9 * lam.max(1.0), "K={k_nodes} k={k}");
                }
            }
        }
    }

    #[test]
    fn identity_and_zero_operators() {
        let g = SpatialGrid::new(5).unwrap();
        let f = g.sample(|x| x * (1.0 - x) + 0.3);
        assert_eq!(TridiagonalOperator::identity(5).apply(&f).unwrap(), f);
        assert_eq!(TridiagonalOperator::scaled_identity(5, 0.0).apply(&f).unwrap(), g.zeros());
        assert_eq!(TridiagonalOperator::identity(5).solve(&f).unwrap(), f);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = SpatialGrid::new(4).unwrap().zeros();
        let op = TridiagonalOperator::identity(5);
        assert!(matches!(op.apply(&f), Err(Error::DimensionMismatch { .. })));
        assert!(op.solve(&f).is_err());
        assert!(TridiagonalOperator::new(vec![0.0; 3], vec![1.0; 3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn zero_step_implicit_matrix_is_identity() {
        let g = SpatialGrid::new(9).unwrap();
        let lap = build_discrete_laplacian(g);
        // I + tau * L_h with L_h = -Delta_h and tau = 0.
        let m = lap.shifted(1.0, -0.0);
        let rhs = g.sample(|x| x.sin());
        let x = m.solve(&rhs).unwrap();
        assert_eq!(x, rhs);
    }

    #[test]
    fn singular_pivot_is_rejected() {
        let op = TridiagonalOperator::new(vec![1.0], vec![1.0, 1.0], vec![1.0]).unwrap();
        let f = SpatialGrid::new(2).unwrap().zeros();
        assert!(matches!(op.solve(&f), Err(Error::SingularPivot { row: 1, .. })));
    }

    #[test]
    fn spd_solve_recovers_known_vector() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let g = SpatialGrid::new(8).unwrap();
        let off: Vec<f64> = (0..7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag: Vec<f64> = (0..8).map(|_| 2.5 + rng.gen_range(0.0..1.0)).collect();
        let op = TridiagonalOperator::new(off.clone(), diag, off).unwrap();
        let truth = g.sample(|x| (3.0 * x).cos() - x);
        let rhs = op.apply(&truth).unwrap();
        let x = solve_tridiagonal(&op, &rhs).unwrap();
        assert!(x.difference(&truth).unwrap().max_abs() < 1e-10);
        let resid = op.apply(&x).unwrap().difference(&rhs).unwrap().max_abs();
        assert!(resid <= 1e-12 * rhs.max_abs().max(1.0));
    }

    #[test]
    fn norms_of_first_sine_mode() {
        let g = SpatialGrid::new(1000).unwrap();
        let f = g.sine_mode(1);
        assert!((f.l2_norm() - 0.5f64.sqrt()).abs() < 1e-3);
        let expect = PI * 0.5f64.sqrt();
        assert!((f.h1_seminorm() - expect).abs() < 0.01 * expect);
        assert_eq!(g.zeros().l2_norm(), 0.0);
        assert_eq!(g.zeros().h1_seminorm(), 0.0);
    }

    #[test]
    fn implicit_matrices_are_diagonally_dominant_and_symmetric() {
        let g = SpatialGrid::new(40).unwrap();
        let lap = build_discrete_laplacian(g);
        assert!(lap.is_symmetric());
        for c in [1e-6, 0.01, 1.0, 100.0] {
            assert!(lap.shifted(1.0, -c).is_strictly_diagonally_dominant());
        }
    }
}
