//! Time propagation, steady states and the benchmark metrics.

use std::collections::{HashMap, VecDeque};

use ndarray::{Array1, Array2, ArrayView2, ShapeBuilder};
use ndarray_linalg::{FactorizeInto, ReciprocalConditionNum, Solve};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::generators::Liouvillian;
use crate::linalg::{self, ONE, ZERO};
use crate::ode::{self, OdeOptions, OdeStats};
use crate::oscillator::{
    expectation, offdiag_distance, trace_distance, DensityMatrix, OperatorMatrix,
};

/// Largest tolerated `|Tr ρ − 1|` along a trajectory.
pub const TRACE_DRIFT_TOL: f64 = 1e-6;
/// Eigenvalues below this flag a positivity violation.
pub const POSITIVITY_TOL: f64 = -1e-8;
/// Default number of output intervals.
pub const DEFAULT_SAMPLES: usize = 400;

#[derive(Debug, Clone)]
pub struct EvolveControls {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Sampled as `⟨n̂⟩` when present.
    pub number: Option<OperatorMatrix>,
}

impl Default for EvolveControls {
    fn default() -> Self {
        EvolveControls {
            rtol: 1e-9,
            atol: 1e-11,
            max_steps: 5_000_000,
            number: None,
        }
    }
}

impl EvolveControls {
    pub fn with_number(mut self, number: &OperatorMatrix) -> Self {
        self.number = Some(number.clone());
        self
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// `⟨n̂⟩` per sample, when requested.
    pub number: Option<Vec<f64>>,
    pub min_eigenvalue: Vec<f64>,
    /// Trace of the raw integrator output.
    pub trace: Vec<f64>,
    pub stats: OdeStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &DensityMatrix {
        self.states.last().expect("trajectories are non-empty")
    }
}

/// `n + 1` uniform times on `[0, t_end]`.
pub fn uniform_times(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

/// Evolves `rho0` from `t = 0` with samples on `DEFAULT_SAMPLES` uniform intervals.
pub fn evolve(
    gen: &Liouvillian,
    rho0: &DensityMatrix,
    t_end: f64,
    controls: &EvolveControls,
) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "time span must be positive, got {t_end}"
        )));
    }
    evolve_on(gen, rho0, &uniform_times(t_end, DEFAULT_SAMPLES), controls)
}

/// Evolves `rho0` from `t = times[0]`, sampling at each of `times`.
pub fn evolve_on(
    gen: &Liouvillian,
    rho0: &DensityMatrix,
    times: &[f64],
    controls: &EvolveControls,
) -> Result<Trajectory> {
    let d = gen.dim();
    if rho0.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho0.dim(),
        });
    }
    if times.is_empty() || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "sample times must be strictly increasing".into(),
        ));
    }
    let y0: Vec<C64> = rho0.entries().t().iter().copied().collect();
    let opts = OdeOptions {
        rtol: controls.rtol,
        atol: controls.atol,
        max_steps: controls.max_steps,
        ..OdeOptions::default()
    };
    let mut traj = Trajectory {
        times: times.to_vec(),
        states: Vec::with_capacity(times.len()),
        number: controls
            .number
            .as_ref()
            .map(|_| Vec::with_capacity(times.len())),
        min_eigenvalue: Vec::with_capacity(times.len()),
        trace: Vec::with_capacity(times.len()),
        stats: OdeStats::default(),
    };
    let rhs = |t: f64, y: &[C64], dy: &mut [C64]| gen.apply_flat(t, y, dy);
    let stats = ode::integrate_with(rhs, times[0], &y0, times, &opts, |_, t, y| {
        let raw =
            ArrayView2::from_shape((d, d).f(), y).map_err(|e| Error::Linalg(e.to_string()))?;
        let trace = linalg::trace(&raw).re;
        if (trace - 1.0).abs() > TRACE_DRIFT_TOL || !trace.is_finite() {
            return Err(Error::TraceDrift { t, trace });
        }
        let rho = DensityMatrix::from_integrator(&raw);
        traj.min_eigenvalue.push(rho.min_eigenvalue()?);
        if let (Some(op), Some(series)) = (&controls.number, traj.number.as_mut()) {
            series.push(expectation(op, &rho)?.re);
        }
        traj.trace.push(trace);
        traj.states.push(rho);
        Ok(())
    })?;
    traj.stats = stats;
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SteadyMethod {
    Nullspace,
    LongTime,
}

#[derive(Debug, Clone)]
pub struct SteadyStateResult {
    pub state: DensityMatrix,
    pub method: SteadyMethod,
    /// Frobenius norm of the generator applied to the state.
    pub residual: f64,
    pub positivity_min_eig: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyOptions {
    /// Integration horizon of the long-time fallback.
    pub horizon: Option<f64>,
    /// Convergence threshold `d(ρ(t), ρ(t/2))` of the fallback.
    pub convergence: f64,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            horizon: None,
            convergence: 1e-8,
        }
    }
}

/// Relative size below which superoperator entries do not connect indices.
const SECTOR_PRUNE: f64 = 1e-13;
/// Reciprocal condition number below which the stationary problem is singular.
const SINGULAR_RCOND: f64 = 1e-13;

/// Fixed point of a time-independent generator.
pub fn steady_state(gen: &Liouvillian) -> Result<SteadyStateResult> {
    steady_state_with(gen, &SteadyOptions::default())
}

/// As [`steady_state`], falling back to long-time integration when the
/// generator has no matrix form and a horizon is given.
pub fn steady_state_with(gen: &Liouvillian, opts: &SteadyOptions) -> Result<SteadyStateResult> {
    match gen.matrix_entries() {
        Ok(entries) => nullspace_state(gen, &entries),
        Err(Error::NoMatrixForm) => match opts.horizon {
            Some(t) => long_time_state(gen, t, opts.convergence),
            None => Err(Error::NoMatrixForm),
        },
        Err(e) => Err(e),
    }
}

/// Solves `L ρ = 0` with `Tr ρ = 1` on the block of the superoperator that
/// contains the populations.
fn nullspace_state(
    gen: &Liouvillian,
    entries: &[(usize, usize, C64)],
) -> Result<SteadyStateResult> {
    let d = gen.dim();
    let n = d * d;
    let scale = entries.iter().map(|e| e.2.norm()).fold(0.0, f64::max);
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(i, j, v) in entries {
        if i != j && v.norm() > SECTOR_PRUNE * scale {
            adj[i].push(j);
            adj[j].push(i);
        }
    }
    // Component of each population index.
    let mut comp = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    comp[0] = 0;
    queue.push_back(0);
    while let Some(i) = queue.pop_front() {
        for &j in &adj[i] {
            if comp[j] == usize::MAX {
                comp[j] = 0;
                queue.push_back(j);
            }
        }
    }
    if (0..d).any(|k| comp[k * (d + 1)] != 0) {
        return Err(Error::DegenerateNullspace);
    }
    let sector: Vec<usize> = (0..n).filter(|&i| comp[i] == 0).collect();
    let local: HashMap<usize, usize> = sector.iter().enumerate().map(|(a, &g)| (g, a)).collect();
    let m = sector.len();
    let mut a = Array2::<C64>::zeros((m, m).f());
    for &(i, j, v) in entries {
        if let (Some(&li), Some(&lj)) = (local.get(&i), local.get(&j)) {
            a[(li, lj)] += v;
        }
    }
    // Replace the equation for ρ_00 by the normalization.
    a.row_mut(0).fill(ZERO);
    for k in 0..d {
        a[(0, local[&(k * (d + 1))])] = ONE;
    }
    let mut b = Array1::<C64>::zeros(m);
    b[0] = ONE;
    let lu = a.factorize_into().map_err(|_| Error::DegenerateNullspace)?;
    if lu.rcond()? < SINGULAR_RCOND {
        return Err(Error::DegenerateNullspace);
    }
    let x = lu.solve_into(b)?;
    let mut flat = vec![ZERO; n];
    for (a, &g) in sector.iter().enumerate() {
        flat[g] = x[a];
    }
    let rho = Array2::from_shape_vec((d, d).f(), flat).map_err(|e| Error::Linalg(e.to_string()))?;
    finish(gen, rho, SteadyMethod::Nullspace)
}

/// Steady state by integrating the maximally mixed state to `horizon`,
/// accepted when `d(ρ(horizon), ρ(horizon/2)) < convergence`.
pub fn long_time_state(
    gen: &Liouvillian,
    horizon: f64,
    convergence: f64,
) -> Result<SteadyStateResult> {
    let d = gen.dim();
    let rho0 = DensityMatrix::diagonal(&vec![1.0 / d as f64; d])?;
    let t0 = gen.span().0.max(0.0);
    let traj = evolve_on(
        gen,
        &rho0,
        &[t0, t0 + 0.5 * horizon, t0 + horizon],
        &EvolveControls::default(),
    )?;
    let distance = trace_distance(&traj.states[1], &traj.states[2])?;
    if distance >= convergence {
        return Err(Error::NotConverged { distance });
    }
    let frozen = gen.frozen(gen.span().1.min(t0 + horizon))?;
    finish(
        &frozen,
        traj.states[2].entries().clone(),
        SteadyMethod::LongTime,
    )
}

fn finish(gen: &Liouvillian, rho: Array2<C64>, method: SteadyMethod) -> Result<SteadyStateResult> {
    let state = DensityMatrix::normalized(rho)?;
    let r = gen.apply(gen.span().1.min(f64::MAX), &state)?;
    let residual = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let positivity_min_eig = state.min_eigenvalue()?;
    Ok(SteadyStateResult {
        state,
        method,
        residual,
        positivity_min_eig,
    })
}

/// `(1/τ_R) ∫_0^{τ_R} d(ρ_ref, ρ_test) dt` by the trapezoid rule on the
/// shared samples.
pub fn avg_trace_distance(reference: &Trajectory, test: &Trajectory, tau_r: f64) -> Result<f64> {
    if !(tau_r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "averaging window must be positive, got {tau_r}"
        )));
    }
    let tol = 1e-9 * tau_r;
    let n = reference
        .times
        .iter()
        .take_while(|&&t| t <= tau_r + tol)
        .count();
    if n < 2 || test.times.len() < n || (reference.times[n - 1] - tau_r).abs() > tol {
        return Err(Error::GridMismatch);
    }
    if reference.times[..n]
        .iter()
        .zip(&test.times[..n])
        .any(|(a, b)| (a - b).abs() > tol)
    {
        return Err(Error::GridMismatch);
    }
    let mut dist = Vec::with_capacity(n);
    for k in 0..n {
        dist.push(trace_distance(&reference.states[k], &test.states[k])?);
    }
    let mut sum = 0.0;
    for k in 1..n {
        sum += 0.5 * (dist[k] + dist[k - 1]) * (reference.times[k] - reference.times[k - 1]);
    }
    Ok(sum / (reference.times[n - 1] - reference.times[0]))
}

/// `(d(ρ_exact, ρ)/γ, d_OD(ρ_exact, ρ)/γ)`.
pub fn scaled_steady_errors(
    exact: &DensityMatrix,
    approx: &DensityMatrix,
    gamma: f64,
) -> Result<(f64, f64)> {
    if !(gamma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    Ok((
        trace_distance(exact, approx)? / gamma,
        offdiag_distance(exact, approx)? / gamma,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationReport {
    pub tail_population: f64,
    pub pass: bool,
}

/// Default tolerance of [`truncation_check`].
pub const TRUNCATION_TOL: f64 = 1e-3;

/// Population of the highest `⌈dim/10⌉` levels against `tol`.
pub fn truncation_check(rho: &DensityMatrix, tol: f64) -> TruncationReport {
    let pops = rho.populations();
    let top = pops.len().div_ceil(10);
    let tail_population: f64 = pops[pops.len() - top..].iter().sum();
    TruncationReport {
        tail_population,
        pass: tail_population <= tol,
    }
}

/// One evaluation of the temperature search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaProbe {
    pub tail_population: f64,
    /// Steady-state error at this temperature.
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaTolerance {
    pub beta: f64,
    pub probe: BetaProbe,
    pub evaluations: usize,
}

/// Relative resolution of the bisection in `β`.
pub const BETA_TOL_RESOLUTION: f64 = 1e-3;

/// Smallest `β` in `bracket` whose tail population is within `tol`,
/// assuming the tail shrinks as `β` grows.
pub fn beta_tol_search<F>(bracket: (f64, f64), tol: f64, mut probe: F) -> Result<BetaTolerance>
where
    F: FnMut(f64) -> Result<BetaProbe>,
{
    let (mut lo, mut hi) = bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter(format!(
            "invalid bracket ({lo}, {hi})"
        )));
    }
    let low = probe(lo)?;
    if low.tail_population <= tol {
        return Ok(BetaTolerance {
            beta: lo,
            probe: low,
            evaluations: 1,
        });
    }
    let mut best = probe(hi)?;
    let mut evaluations = 2;
    if best.tail_population > tol {
        return Err(Error::Bracket { lo, hi });
    }
    while hi - lo > BETA_TOL_RESOLUTION * hi {
        let mid = 0.5 * (lo + hi);
        let p = probe(mid)?;
        evaluations += 1;
        if p.tail_population <= tol {
            hi = mid;
            best = p;
        } else {
            lo = mid;
        }
    }
    Ok(BetaTolerance {
        beta: hi,
        probe: best,
        evaluations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PositivityReport {
    pub min_eigenvalues: Vec<f64>,
    pub first_violation: Option<f64>,
}

/// Per-sample minimum eigenvalue and the first time it drops below
/// [`POSITIVITY_TOL`].
pub fn positivity_diagnostics(traj: &Trajectory) -> PositivityReport {
    let first_violation = traj
        .min_eigenvalue
        .iter()
        .position(|&v| v < POSITIVITY_TOL)
        .map(|k| traj.times[k]);
    PositivityReport {
        min_eigenvalues: traj.min_eigenvalue.clone(),
        first_violation,
    }
}
