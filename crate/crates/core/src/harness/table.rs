use super::config::StudyConfig;
use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

pub const CSV_HEADER: &str = "N,tau,rms_error,standard_error";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub tau: f64,
    pub rms_error: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTable {
    /// Sorted by `n`.
    pub rows: Vec<ConvergenceRow>,
    pub fitted_rate: Option<f64>,
    pub fit_range: Vec<usize>,
    /// RMS spatial discretization error, when it could be measured.
    pub spatial_floor: Option<f64>,
}

impl ConvergenceTable {
    pub fn new(mut rows: Vec<ConvergenceRow>) -> Self {
        rows.sort_by_key(|r| r.n);
        Self {
            rows,
            ..Self::default()
        }
    }

    pub fn row(&self, n: usize) -> Option<&ConvergenceRow> {
        self.rows.iter().find(|r| r.n == n)
    }

    /// Fits over `range` and stores the result.
    pub fn refit(&mut self, range: Vec<usize>) -> Result<f64> {
        let rate = fit_rate(self, &range)?;
        self.fitted_rate = Some(rate);
        self.fit_range = range;
        Ok(rate)
    }
}

/// Least-squares slope of `log2(error)` against `log2(tau)` over the rows
/// whose `N` is in `range`.
pub fn fit_rate(table: &ConvergenceTable, range: &[usize]) -> Result<f64> {
    let points: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| range.contains(&r.n))
        .map(|r| {
            if r.rms_error > 0.0 && r.rms_error.is_finite() {
                Ok((r.tau.log2(), r.rms_error.log2()))
            } else {
                Err(Error::DegenerateFit(format!("error at N = {} is {}", r.n, r.rms_error)))
            }
        })
        .collect::<Result<_>>()?;
    if points.len() < 2 {
        return Err(Error::DegenerateFit(format!(
            "need at least two points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all points share the same tau".into()));
    }
    Ok(sxy / sxx)
}

/// Decimal notation with 17 significant digits, which round-trips every `f64`.
fn decimal(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.12}");
    }
    let exponent = v.abs().log10().floor() as i32;
    let places = (16 - exponent).max(0) as usize;
    format!("{v:.places$}")
}

pub fn write_csv(table: &ConvergenceTable, mut out: impl Write) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in &table.rows {
        writeln!(
            out,
            "{},{},{},{}",
            r.n,
            decimal(r.tau),
            decimal(r.rms_error),
            decimal(r.standard_error)
        )?;
    }
    Ok(())
}

pub fn emit_csv(table: &ConvergenceTable, destination: &Path) -> Result<()> {
    let file = std::fs::File::create(destination)?;
    let mut w = std::io::BufWriter::new(file);
    write_csv(table, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn parse_csv(text: &str) -> Result<Vec<ConvergenceRow>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                reason: format!("expected header `{CSV_HEADER}`"),
            })
        }
    }
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| Error::Parse { line: idx + 1, reason };
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(bad(format!("expected 4 columns, got {}", cols.len())));
        }
        let float = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("`{s}`: {e}")));
        rows.push(ConvergenceRow {
            n: cols[0].parse().map_err(|e| bad(format!("`{}`: {e}", cols[0])))?,
            tau: float(cols[1])?,
            rms_error: float(cols[2])?,
            standard_error: float(cols[3])?,
        });
    }
    Ok(rows)
}

pub fn format_report(table: &ConvergenceTable, config: &StudyConfig) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "equation        {}", config.equation);
    if config.equation == super::config::Equation::Heat {
        let _ = writeln!(s, "scheme          {}", config.scheme);
        let _ = writeln!(s, "exact mode      {}", config.exact_mode);
    } else {
        let _ = writeln!(s, "scheme          mcn");
        let _ = writeln!(s, "reference N     {}", config.n_ref);
    }
    let _ = writeln!(s, "error norm      {}", config.error_norm);
    let _ = writeln!(s, "N list          {:?}", config.n_list);
    let _ = writeln!(s, "interior nodes  {}", config.k);
    let _ = writeln!(s, "final time      {}", config.t_final);
    let _ = writeln!(s, "realizations    {}", config.mc_count);
    let _ = writeln!(s, "master steps    {}", config.master_steps);
    let _ = writeln!(s, "base seed       {}", config.base_seed);
    let _ = writeln!(s);
    let _ = writeln!(s, "{:>6}  {:>12}  {:>14}  {:>14}  {:>8}", "N", "tau", "rms error", "std error", "order");
    let mut prev: Option<&ConvergenceRow> = None;
    for r in &table.rows {
        let order = match prev {
            Some(p) if p.rms_error > 0.0 && r.rms_error > 0.0 => {
                format!("{:.3}", (p.rms_error / r.rms_error).log2() / (p.tau / r.tau).log2())
            }
            _ => "-".to_string(),
        };
        let _ = writeln!(
            s,
            "{:>6}  {:>12.6e}  {:>14.6e}  {:>14.6e}  {:>8}",
            r.n, r.tau, r.rms_error, r.standard_error, order
        );
        prev = Some(r);
    }
    let _ = writeln!(s);
    if let Some(floor) = table.spatial_floor {
        let _ = writeln!(s, "spatial floor   {floor:.6e}");
    }
    let _ = writeln!(s, "fit range       {:?}", table.fit_range);
    match table.fitted_rate {
        Some(r) => {
            let _ = writeln!(s, "fitted rate     {r:.4}");
        }
        None => {
            let _ = writeln!(s, "fitted rate     n/a");
        }
    }
    s
}

pub fn emit_report(table: &ConvergenceTable, config: &StudyConfig, destination: &Path) -> Result<()> {
    std::fs::write(destination, format_report(table, config))?;
    Ok(())
}
