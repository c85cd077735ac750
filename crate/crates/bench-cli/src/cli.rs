//! Argument parsing and command dispatch.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;
use oqs_core::bath::{BathKernels, BathSpec};
use oqs_core::dynamics::TRUNCATION_TOL;

use crate::config::{Method, Metric, Reference, ScanConfig};
use crate::csv::{num, opt, Table};
use crate::error::{BenchError, Result};
use crate::plot;
use crate::scan::{run_scan, threads_from_env, CellStatus};
use crate::scenario::{hpz_table, kernel_row, oscillator_f_block, run_dynamics, run_steady, Point};

#[derive(Debug, Parser)]
#[command(
    name = "oqs-bench",
    version,
    about = "Benchmarks of quantum master equations for a damped oscillator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Scan configuration; its method, reference and fixed values also
    /// serve as defaults for the other commands.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Exit with status 4 on truncation or positivity failures.
    #[arg(long, global = true)]
    pub strict: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Time evolution of the benchmark initial state.
    Dynamics(DynamicsArgs),
    /// Steady-state errors, one row per (gamma, beta) pair.
    Steady(SteadyArgs),
    /// Parallel (gamma, beta) heatmap scan.
    Scan(ScanArgs),
    /// Bath kernel table.
    Kernels(KernelArgs),
    /// Time-dependent coefficients of the exact equation.
    HpzCoeffs(HpzArgs),
}

#[derive(Debug, Args)]
pub struct DynamicsArgs {
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub beta: f64,
    /// Drude cutoff [default: 5].
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Truncation dimension [default: 30].
    #[arg(long)]
    pub dim: Option<usize>,
    /// End time [default: 5/gamma, or 5 when gamma = 0].
    #[arg(long)]
    pub tmax: Option<f64>,
    #[arg(long, default_value_t = oqs_core::dynamics::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long, value_enum)]
    pub reference: Option<Reference>,
    /// Skip the reference computation.
    #[arg(long, conflicts_with = "reference")]
    pub no_reference: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SteadyArgs {
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Comma-separated coupling strengths.
    #[arg(long, value_delimiter = ',', required = true)]
    pub gamma: Vec<f64>,
    /// Comma-separated inverse temperatures.
    #[arg(long, value_delimiter = ',', required = true)]
    pub beta: Vec<f64>,
    /// Drude cutoff [default: 1].
    #[arg(long)]
    pub cutoff: Option<f64>,
    /// Truncation dimension [default: 30].
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long, value_enum)]
    pub reference: Option<Reference>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Start from a named preset (fig3, fig4, fig5, fig6).
    #[arg(long, conflicts_with = "config")]
    pub preset: Option<String>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    #[arg(long, value_enum)]
    pub metric: Option<Metric>,
    #[arg(long, value_enum)]
    pub reference: Option<Reference>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Do not write the plotting script.
    #[arg(long)]
    pub no_plot: bool,
}

#[derive(Debug, Args)]
pub struct KernelArgs {
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 5.0)]
    pub cutoff: f64,
    /// Uniform grid `min:max:n`.
    #[arg(long, default_value = "-3:3:61")]
    pub delta_grid: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HpzArgs {
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub beta: f64,
    #[arg(long, default_value_t = 5.0)]
    pub cutoff: f64,
    #[arg(long, default_value_t = 10.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = oqs_core::dynamics::DEFAULT_SAMPLES)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Values a configuration file may supply to the single-point commands.
#[derive(Debug, Clone, Copy, Default)]
struct Defaults {
    method: Option<Method>,
    reference: Option<Reference>,
    cutoff: Option<f64>,
    dim: Option<usize>,
}

impl Defaults {
    fn from(cfg: Option<&ScanConfig>) -> Self {
        cfg.map(|c| Defaults {
            method: Some(c.method),
            reference: Some(c.reference),
            cutoff: Some(c.fixed.cutoff),
            dim: Some(c.fixed.dim),
        })
        .unwrap_or_default()
    }
}

/// Runs the parsed command, writing tables without `--out` to `stdout`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    let cfg = cli.config.as_deref().map(ScanConfig::load).transpose()?;
    let defaults = Defaults::from(cfg.as_ref());
    match &cli.command {
        Command::Dynamics(a) => dynamics(a, defaults, cli.strict, stdout),
        Command::Steady(a) => steady(a, defaults, cli.strict, stdout),
        Command::Scan(a) => scan(a, cfg, cli.strict),
        Command::Kernels(a) => kernels(a, cli.strict, stdout),
        Command::HpzCoeffs(a) => hpz_coeffs(a, stdout),
    }
}

fn emit(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn require_method(m: Option<Method>) -> Result<Method> {
    m.ok_or_else(|| BenchError::Config("--method is required (or a --config supplying it)".into()))
}

fn echo_point(t: &mut Table, method: Method, p: &Point) {
    t.param("method", method.name());
    t.param("gamma", num(p.gamma));
    t.param("beta", num(p.beta));
    t.param("cutoff", num(p.cutoff));
    t.param("dim", p.dim);
    t.param("omega", num(1.0));
    t.param("mass", num(1.0));
    t.param("counterterm", true);
}

fn dynamics(a: &DynamicsArgs, d: Defaults, strict: bool, stdout: &mut dyn Write) -> Result<()> {
    let method = require_method(a.method.or(d.method))?;
    let point = Point {
        gamma: a.gamma,
        beta: a.beta,
        cutoff: a.cutoff.or(d.cutoff).unwrap_or(5.0),
        dim: a.dim.or(d.dim).unwrap_or(30),
    };
    let tmax = a
        .tmax
        .unwrap_or(if a.gamma > 0.0 { 5.0 / a.gamma } else { 5.0 });
    let reference = (!a.no_reference).then(|| a.reference.or(d.reference).unwrap_or_default());
    let run = run_dynamics(method, reference, &point, tmax, a.samples)?;

    let mut t = Table::new("dynamics");
    echo_point(&mut t, method, &point);
    t.param("tmax", num(tmax));
    t.param("samples", a.samples);
    t.param("reference", reference.map_or("none", Reference::name));
    t.param("initial_state", "(|0> + |1>)/sqrt(2) in the Fock basis");
    t.row(&["t", "n_expect", "trace_dist_to_exact", "min_eig", "trace"]);
    let traj = &run.trajectory;
    let number = traj.number.as_ref().expect("number operator is sampled");
    for k in 0..traj.len() {
        let dist = run.distances.as_ref().map(|v| v[k]);
        t.row(&[
            num(traj.times[k]),
            num(number[k]),
            opt(dist),
            num(traj.min_eigenvalue[k]),
            num(traj.trace[k]),
        ]);
    }
    emit(a.out.as_deref(), t.as_str(), stdout)?;

    if strict {
        if run.positivity_violated() {
            return Err(BenchError::Validity(format!(
                "minimum eigenvalue {:e}",
                run.min_eigenvalue()
            )));
        }
        if run.max_tail() > TRUNCATION_TOL {
            return Err(BenchError::Validity(format!(
                "tail population {:e}",
                run.max_tail()
            )));
        }
    }
    Ok(())
}

fn steady(a: &SteadyArgs, d: Defaults, strict: bool, stdout: &mut dyn Write) -> Result<()> {
    let method = require_method(a.method.or(d.method))?;
    let reference = a.reference.or(d.reference).unwrap_or_default();
    let cutoff = a.cutoff.or(d.cutoff).unwrap_or(1.0);
    let dim = a.dim.or(d.dim).unwrap_or(30);
    let mut t = Table::new("steady");
    t.param("method", method.name());
    t.param("reference", reference.name());
    t.param("cutoff", num(cutoff));
    t.param("dim", dim);
    t.param("omega", num(1.0));
    t.param("mass", num(1.0));
    t.param("counterterm", true);
    t.row(&[
        "gamma",
        "beta",
        "trace_dist",
        "trace_dist_over_gamma",
        "od_dist_over_gamma",
        "residual",
        "tail_population",
    ]);
    let mut problems = Vec::new();
    for &gamma in &a.gamma {
        for &beta in &a.beta {
            let row = run_steady(
                method,
                reference,
                &Point {
                    gamma,
                    beta,
                    cutoff,
                    dim,
                },
            )?;
            if row.truncation_failed() {
                problems.push(format!(
                    "tail population {:e} at ({gamma}, {beta})",
                    row.tail_population
                ));
            }
            if row.positivity_violated() {
                problems.push(format!(
                    "minimum eigenvalue {:e} at ({gamma}, {beta})",
                    row.min_eigenvalue
                ));
            }
            t.row(&[
                num(row.gamma),
                num(row.beta),
                num(row.trace_dist),
                num(row.trace_dist_over_gamma),
                num(row.od_dist_over_gamma),
                num(row.residual),
                num(row.tail_population),
            ]);
        }
    }
    emit(a.out.as_deref(), t.as_str(), stdout)?;
    if strict && !problems.is_empty() {
        return Err(BenchError::Validity(problems.join("; ")));
    }
    Ok(())
}

/// Resolves the scan configuration: preset or file, then flag overrides.
pub fn scan_config(a: &ScanArgs, file: Option<ScanConfig>) -> Result<ScanConfig> {
    let mut cfg = match (&a.preset, file) {
        (Some(name), _) => ScanConfig::preset(name)?,
        (None, Some(cfg)) => cfg,
        (None, None) => return Err(BenchError::Config("scan needs --config or --preset".into())),
    };
    if let Some(m) = a.method {
        cfg.method = m;
    }
    if let Some(m) = a.metric {
        cfg.metric = m;
    }
    if let Some(r) = a.reference {
        cfg.reference = r;
    }
    if let Some(c) = a.cutoff {
        cfg.fixed.cutoff = c;
    }
    if let Some(dim) = a.dim {
        cfg.fixed.dim = dim;
    }
    if let Some(o) = &a.output {
        cfg.output = o.clone();
    }
    if a.no_plot {
        cfg.plot = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn scan(a: &ScanArgs, file: Option<ScanConfig>, strict: bool) -> Result<()> {
    let cfg = scan_config(a, file)?;
    let result = run_scan(&cfg, threads_from_env()?)?;
    std::fs::write(&cfg.output, result.to_csv())?;
    if cfg.plot {
        std::fs::write(
            plot::script_path(&cfg.output),
            plot::script(&cfg, &cfg.output),
        )?;
    }
    let bad = result
        .cells
        .iter()
        .filter(|c| c.status != CellStatus::Ok)
        .count();
    info!(
        "scan written to {}; {bad} cells flagged",
        cfg.output.display()
    );
    if strict && bad > 0 {
        return Err(BenchError::Validity(format!(
            "{bad} of {} cells flagged",
            result.cells.len()
        )));
    }
    Ok(())
}

/// Parses `min:max:n` into `n` uniform points.
pub fn delta_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || BenchError::Config(format!("--delta-grid must be min:max:n, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts.as_slice() else {
        return Err(bad());
    };
    let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
    let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if n == 0 || !(lo.is_finite() && hi.is_finite()) || (n > 1 && !(lo < hi)) {
        return Err(bad());
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect())
}

fn echo_bath(t: &mut Table, b: &BathSpec) {
    t.param("gamma", num(b.gamma));
    t.param("beta", num(b.beta));
    t.param("cutoff", num(b.cutoff));
    t.param("omega", num(1.0));
}

fn kernels(a: &KernelArgs, strict: bool, stdout: &mut dyn Write) -> Result<()> {
    let deltas = delta_grid(&a.delta_grid)?;
    let bath = BathSpec::new(a.gamma, a.beta, a.cutoff)?;
    let kernels = BathKernels::new(bath);
    let mut t = Table::new("kernels");
    echo_bath(&mut t, &bath);
    t.param("delta_grid", &a.delta_grid);
    t.row(&[
        "delta",
        "J",
        "G_inf_r",
        "G_inf_i_matsubara",
        "G_inf_i_pv",
        "h",
        "status",
    ]);
    let mut failed = 0;
    for &delta in &deltas {
        let r = kernel_row(&kernels, delta);
        failed += usize::from(!r.ok());
        let status = if r.ok() { "ok" } else { "quadrature_fail" };
        t.row(&[
            num(delta),
            num(r.j),
            opt(r.g_inf_r),
            opt(r.g_inf_i_matsubara),
            opt(r.g_inf_i_pv),
            num(r.h),
            status.to_string(),
        ]);
    }
    t.comment("f block: distinct Lamb-shift integrals of the oscillator spectrum");
    t.row(&["delta1", "delta2", "f"]);
    for (d1, d2, f) in oscillator_f_block(&kernels, 1.0)? {
        t.row(&[num(d1), num(d2), num(f)]);
    }
    emit(a.out.as_deref(), t.as_str(), stdout)?;
    if strict && failed > 0 {
        return Err(BenchError::Numerical(format!(
            "{failed} kernel rows failed"
        )));
    }
    Ok(())
}

fn hpz_coeffs(a: &HpzArgs, stdout: &mut dyn Write) -> Result<()> {
    let bath = BathSpec::new(a.gamma, a.beta, a.cutoff)?;
    let table = hpz_table(&bath, a.tmax, a.samples)?;
    let mut t = Table::new("hpz-coeffs");
    echo_bath(&mut t, &bath);
    t.param("mass", num(1.0));
    t.param("tmax", num(a.tmax));
    t.param("samples", a.samples);
    t.row(&["t", "gamma_x", "gamma_p", "D_x", "D_p"]);
    for (time, c) in &table.rows {
        t.row(&[
            num(*time),
            num(c.gamma_x),
            num(c.gamma_p),
            num(c.d_x),
            num(c.d_p),
        ]);
    }
    let c = table.asymptotic;
    t.comment("asymptotic");
    t.row(&[
        "inf".to_string(),
        num(c.gamma_x),
        num(c.gamma_p),
        num(c.d_x),
        num(c.d_p),
    ]);
    emit(a.out.as_deref(), t.as_str(), stdout)
}
