//! Parallel (γ, β) parameter scans.

use std::fmt;

use log::{info, warn};
use rayon::prelude::*;

use crate::config::{Metric, Reference, ScanConfig};
use crate::csv::{opt, Table};
use crate::error::{BenchError, Result};
use crate::scenario::{averaged_error, run_dynamics, run_steady, Point};

/// Environment variable overriding the worker-pool size.
pub const THREADS_ENV: &str = "OQS_BENCH_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellStatus {
    Ok,
    PositivityViolation,
    TruncationFail,
    IntegrationFail,
}

impl CellStatus {
    pub fn name(self) -> &'static str {
        match self {
            CellStatus::Ok => "ok",
            CellStatus::PositivityViolation => "positivity_violation",
            CellStatus::TruncationFail => "truncation_fail",
            CellStatus::IntegrationFail => "integration_fail",
        }
    }
}

impl fmt::Display for CellStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One grid cell; `metric` is present iff the status is `ok` or
/// `positivity_violation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub gamma: f64,
    pub beta: f64,
    pub metric: Option<f64>,
    pub status: CellStatus,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub config: ScanConfig,
    pub gammas: Vec<f64>,
    pub betas: Vec<f64>,
    /// γ-major order.
    pub cells: Vec<Cell>,
}

impl ScanResult {
    pub fn cell(&self, i_gamma: usize, i_beta: usize) -> &Cell {
        &self.cells[i_gamma * self.betas.len() + i_beta]
    }

    pub fn to_csv(&self) -> String {
        let mut t = Table::new("scan");
        t.comment("config:");
        t.comment(&self.config.to_toml());
        t.row(&["gamma", "beta", self.config.metric.name(), "status"]);
        for c in &self.cells {
            t.row(&[
                crate::csv::num(c.gamma),
                crate::csv::num(c.beta),
                opt(c.metric),
                c.status.to_string(),
            ]);
        }
        t.into_string()
    }
}

/// Value and status of a single cell; failures never escape.
pub fn evaluate_cell(cfg: &ScanConfig, gamma: f64, beta: f64) -> Cell {
    let point = Point {
        gamma,
        beta,
        cutoff: cfg.fixed.cutoff,
        dim: cfg.fixed.dim,
    };
    let outcome = if cfg.metric.is_transient() {
        transient_cell(cfg, &point)
    } else {
        steady_cell(cfg, &point)
    };
    let (metric, status) = outcome.unwrap_or_else(|e| {
        warn!("cell gamma = {gamma}, beta = {beta}: {e}");
        (None, CellStatus::IntegrationFail)
    });
    Cell {
        gamma,
        beta,
        metric,
        status,
    }
}

fn transient_cell(cfg: &ScanConfig, p: &Point) -> Result<(Option<f64>, CellStatus)> {
    let tau = cfg.fixed.tau_r_rule.window(p.gamma, 1.0)?;
    let run = run_dynamics(
        cfg.method,
        Some(Reference::Exact),
        p,
        tau,
        oqs_core::dynamics::DEFAULT_SAMPLES,
    )?;
    if run.max_tail() > oqs_core::dynamics::TRUNCATION_TOL {
        return Ok((None, CellStatus::TruncationFail));
    }
    let value = averaged_error(&run, tau)?;
    let status = if run.positivity_violated() {
        CellStatus::PositivityViolation
    } else {
        CellStatus::Ok
    };
    Ok((Some(value), status))
}

fn steady_cell(cfg: &ScanConfig, p: &Point) -> Result<(Option<f64>, CellStatus)> {
    let row = run_steady(cfg.method, cfg.reference, p)?;
    if row.truncation_failed() {
        return Ok((None, CellStatus::TruncationFail));
    }
    let value = match cfg.metric {
        Metric::SteadyTraceDist => row.trace_dist,
        Metric::SteadyTraceDistOverGamma => row.trace_dist_over_gamma,
        Metric::OdDistOverGamma => row.od_dist_over_gamma,
        Metric::AvgTraceDist => unreachable!("transient metric in a steady cell"),
    };
    let status = if row.positivity_violated() {
        CellStatus::PositivityViolation
    } else {
        CellStatus::Ok
    };
    Ok((Some(value), status))
}

/// Worker count from [`THREADS_ENV`], if set.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(BenchError::Config(format!(
                "{THREADS_ENV} must be a positive integer, got {v:?}"
            ))),
        },
    }
}

/// Runs every cell on a pool of `threads` workers (all cores when `None`).
pub fn run_scan(cfg: &ScanConfig, threads: Option<usize>) -> Result<ScanResult> {
    cfg.validate()?;
    let gammas = cfg.grid.gamma.values();
    let betas = cfg.grid.beta.values();
    let points: Vec<(f64, f64)> = gammas
        .iter()
        .flat_map(|&g| betas.iter().map(move |&b| (g, b)))
        .collect();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| BenchError::Config(e.to_string()))?;
    info!(
        "scan of {} cells on {} workers",
        points.len(),
        pool.current_num_threads()
    );
    let cells = pool.install(|| {
        points
            .par_iter()
            .map(|&(g, b)| evaluate_cell(cfg, g, b))
            .collect()
    });
    Ok(ScanResult {
        config: cfg.clone(),
        gammas,
        betas,
        cells,
    })
}
