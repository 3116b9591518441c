//! Statistical checks of the noise quadratures against their closed-form
//! moments, plus the deterministic trapezoid defect bound.
//!
//! Failures are report entries, never errors.

use super::stats::MeanEstimate;
use crate::error::Result;
use crate::noise::{
    curr_moment_bound_wave, micro_defect_heat, micro_moment_exact_heat, old_moment_bound_wave,
    old_moment_exact_wave, s_moment_exact_wave, wave_defect, TimeMesh, WienerPath,
};
use rayon::prelude::*;
use std::fmt;

/// Master steps per micro step in the moment checks. With the trapezoidal
/// master-grid quadrature the relative bias of the defect moments is
/// about `1 / (4 n^2)`.
const MASTER_PER_MICRO: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckKind {
    /// `|observed - expected| <= sigmas * se`.
    Equal { sigmas: u32 },
    /// `observed <= expected + sigmas * se`.
    AtMost { sigmas: u32 },
    /// `|observed - expected| <= tol * |expected|`.
    Relative { tol: f64 },
    /// `observed <= expected` (deterministic bound).
    Bound,
}

impl CheckKind {
    fn passes(self, observed: f64, expected: f64, se: f64) -> bool {
        match self {
            Self::Equal { sigmas } => (observed - expected).abs() <= sigmas as f64 * se,
            Self::AtMost { sigmas } => observed <= expected + sigmas as f64 * se,
            Self::Relative { tol } => (observed - expected).abs() <= tol * expected.abs(),
            Self::Bound => observed <= expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub standard_error: f64,
    pub kind: CheckKind,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: String, observed: f64, expected: f64, standard_error: f64, kind: CheckKind) -> Self {
        let passed = kind.passes(observed, expected, standard_error);
        Self {
            name,
            observed,
            expected,
            standard_error,
            kind,
            passed,
        }
    }

    fn from_estimate(name: String, est: MeanEstimate, expected: f64, kind: CheckKind) -> Self {
        Self::new(name, est.mean, expected, est.standard_error, kind)
    }
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rule = match self.kind {
            CheckKind::Equal { sigmas } => format!("|obs-exp| <= {sigmas} se"),
            CheckKind::AtMost { sigmas } => format!("obs <= bound + {sigmas} se"),
            CheckKind::Relative { tol } => format!("rel err <= {tol:e}"),
            CheckKind::Bound => "obs <= bound".to_string(),
        };
        write!(
            f,
            "[{}] {:<48} observed {:>13.6e}  expected {:>13.6e}  se {:>10.3e}  ({rule})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.observed,
            self.expected,
            self.standard_error,
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<CheckResult>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn find(&self, prefix: &str) -> impl Iterator<Item = &CheckResult> {
        let prefix = prefix.to_string();
        self.checks.iter().filter(move |c| c.name.starts_with(&prefix))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        writeln!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

/// Trapezoid defect `|(f(a) + f(a + kappa)) / 2 - (1/kappa) int_a^{a+kappa} f|`
/// given the exact integral.
pub fn trapezoid_defect(f: impl Fn(f64) -> f64, a: f64, kappa: f64, integral: f64) -> f64 {
    (0.5 * (f(a) + f(a + kappa)) - integral / kappa).abs()
}

/// Bound `C / ((gamma + 2)(gamma + 3)) kappa^{1 + gamma}` for `f` with
/// `gamma`-Holder derivative of constant `C`.
pub fn trapezoid_defect_bound(c_tilde: f64, gamma: f64, kappa: f64) -> f64 {
    c_tilde / ((gamma + 2.0) * (gamma + 3.0)) * kappa.powf(1.0 + gamma)
}

fn per_sample<T: Send>(
    config: &ValidationConfig,
    stream_offset: u64,
    f: impl Fn(u64) -> Result<T> + Sync + Send,
) -> Result<Vec<T>> {
    (0..config.samples as u64)
        .into_par_iter()
        .map(|r| f(stream_offset + r))
        .collect()
}

fn squared_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// `E |J_j|^2 = (m/3) tau^5` for the heat micro-grid defect.
pub fn heat_defect_checks(config: &ValidationConfig, inv_tau: usize, dim: usize, offset: u64) -> Result<CheckResult> {
    let tau = 1.0 / inv_tau as f64;
    // Two coarse intervals; the identity is checked on the second.
    let mesh = TimeMesh::new(2.0 * tau, 2)?;
    let s = mesh.total_ticks() * MASTER_PER_MICRO;
    let samples = per_sample(config, offset, |r| {
        let path = WienerPath::sample_stream(config.seed, r, &mesh, dim, s)?;
        Ok(squared_norm(&micro_defect_heat(&path, &mesh, 1)?))
    })?;
    Ok(CheckResult::from_estimate(
        format!("heat defect E|J|^2, tau=1/{inv_tau}, m={dim}"),
        MeanEstimate::from_samples(&samples),
        micro_moment_exact_heat(tau, dim),
        CheckKind::Equal { sigmas: 3 },
    ))
}

/// Moment checks of the three wave defect pieces on interval `j = 3` of a
/// four-interval mesh.
pub fn wave_defect_checks(
    config: &ValidationConfig,
    inv_tau: usize,
    dim: usize,
    offset: u64,
) -> Result<Vec<CheckResult>> {
    let tau = 1.0 / inv_tau as f64;
    let n = 4;
    let j = n - 1;
    let mesh = TimeMesh::new(n as f64 * tau, n)?;
    let s = mesh.total_ticks() * MASTER_PER_MICRO;
    let samples = per_sample(config, offset, |r| {
        let path = WienerPath::sample_stream(config.seed, r, &mesh, dim, s)?;
        let d = wave_defect(&path, &mesh, j)?;
        Ok([squared_norm(&d.s), squared_norm(&d.curr), squared_norm(&d.old)])
    })?;
    let est = |i: usize| MeanEstimate::from_samples(&samples.iter().map(|v| v[i]).collect::<Vec<_>>());
    let tag = format!("tau=1/{inv_tau}, m={dim}, j={j}");
    Ok(vec![
        CheckResult::from_estimate(
            format!("wave E|S|^2 exact, {tag}"),
            est(0),
            s_moment_exact_wave(&mesh, j, dim),
            CheckKind::Equal { sigmas: 3 },
        ),
        CheckResult::from_estimate(
            format!("wave E|J_curr|^2 bound, {tag}"),
            est(1),
            curr_moment_bound_wave(tau, dim),
            CheckKind::AtMost { sigmas: 3 },
        ),
        CheckResult::from_estimate(
            format!("wave E|J_old|^2 bound, {tag}"),
            est(2),
            old_moment_bound_wave(&mesh, j, dim),
            CheckKind::AtMost { sigmas: 3 },
        ),
        CheckResult::from_estimate(
            format!("wave E|J_old|^2 exact, {tag}"),
            est(2),
            old_moment_exact_wave(&mesh, j, dim),
            CheckKind::Equal { sigmas: 3 },
        ),
    ])
}

/// `E[(W(t) - W(s)) (W(t) - W(r))^T] = (t - max(s, r)) I`, including the
/// vanishing cross-component terms.
pub fn covariance_checks(config: &ValidationConfig, offset: u64) -> Result<Vec<CheckResult>> {
    let dim = 2;
    let mesh = TimeMesh::unit(4)?;
    let t = 1.0;
    let pairs = [(0.25, 0.5), (0.5, 0.5), (0.0, 0.75)];
    let samples = per_sample(config, offset, |r| {
        let path = WienerPath::sample_stream(config.seed, r, &mesh, dim, 64)?;
        let wt = path.value_at(t)?;
        let mut out = Vec::with_capacity(pairs.len() * 3);
        for &(s, q) in &pairs {
            let ws = path.value_at(s)?;
            let wq = path.value_at(q)?;
            let a = [wt[0] - ws[0], wt[1] - ws[1]];
            let b = [wt[0] - wq[0], wt[1] - wq[1]];
            out.extend([a[0] * b[0], a[1] * b[1], a[0] * b[1]]);
        }
        Ok(out)
    })?;
    let mut checks = Vec::new();
    for (p, &(s, q)) in pairs.iter().enumerate() {
        let expected = t - f64::max(s, q);
        for (c, label, exp) in [(0, "W1 W1", expected), (1, "W2 W2", expected), (2, "W1 W2", 0.0)] {
            let col: Vec<f64> = samples.iter().map(|v| v[p * 3 + c]).collect();
            checks.push(CheckResult::from_estimate(
                format!("covariance {label}, t={t}, s={s}, r={q}"),
                MeanEstimate::from_samples(&col),
                exp,
                CheckKind::Equal { sigmas: 4 },
            ));
        }
    }
    Ok(checks)
}

/// Trapezoid defect of `t^2` equals the bound with `gamma = 1`, `C = 2`;
/// constants have zero defect.
pub fn trapezoid_bound_checks() -> Vec<CheckResult> {
    let mut checks = Vec::new();
    for kappa in [1.0, 0.5, 1.0 / 16.0] {
        let defect = trapezoid_defect(|t| t * t, 0.0, kappa, kappa.powi(3) / 3.0);
        let bound = trapezoid_defect_bound(2.0, 1.0, kappa);
        let closed = kappa * kappa / 6.0;
        checks.push(CheckResult::new(
            format!("trapezoid defect t^2 = kappa^2/6, kappa={kappa}"),
            defect,
            closed,
            0.0,
            CheckKind::Relative { tol: 1e-12 },
        ));
        checks.push(CheckResult::new(
            format!("trapezoid bound tight for t^2, kappa={kappa}"),
            bound,
            closed,
            0.0,
            CheckKind::Relative { tol: 1e-12 },
        ));
        let c = 2.5;
        checks.push(CheckResult::new(
            format!("trapezoid defect constant, kappa={kappa}"),
            trapezoid_defect(|_| c, 0.0, kappa, c * kappa),
            bound,
            0.0,
            CheckKind::Bound,
        ));
    }
    checks
}

/// Runs every check. Each group draws from its own block of streams.
pub fn validate_statistics(config: &ValidationConfig) -> Result<ValidationReport> {
    let block = config.samples as u64;
    let mut offset = 0u64;
    let mut next = || {
        let o = offset;
        offset += block;
        o
    };
    let mut checks = Vec::new();
    for inv_tau in [8usize, 16] {
        for dim in [1usize, 2] {
            checks.push(heat_defect_checks(config, inv_tau, dim, next())?);
        }
    }
    for inv_tau in [8usize, 16] {
        for dim in [1usize, 2] {
            checks.extend(wave_defect_checks(config, inv_tau, dim, next())?);
        }
    }
    checks.extend(covariance_checks(config, next())?);
    checks.extend(trapezoid_bound_checks());
    Ok(ValidationReport { checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_bound_checks_pass() {
        for c in trapezoid_bound_checks() {
            assert!(c.passed, "{c}");
        }
    }

    #[test]
    fn check_kinds() {
        assert!(CheckKind::Equal { sigmas: 3 }.passes(1.0, 1.2, 0.1));
        assert!(!CheckKind::Equal { sigmas: 3 }.passes(1.0, 1.4, 0.1));
        assert!(CheckKind::AtMost { sigmas: 3 }.passes(1.2, 1.0, 0.1));
        assert!(CheckKind::Bound.passes(0.0, 0.0, 0.0));
    }

    #[test]
    fn small_run_produces_every_check() {
        let report = validate_statistics(&ValidationConfig {
            samples: 200,
            seed: 1,
        })
        .unwrap();
        // 4 heat + 16 wave + 9 covariance + 9 trapezoid
        assert_eq!(report.checks.len(), 38);
        assert!(report.to_string().contains("checks"));
    }
}
