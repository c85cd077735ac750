//! Single-point computations shared by the commands and the scan cells.

use oqs_core::bath::{
    imag_coupling_matsubara, imag_coupling_pv, spectral_density, BathKernels, BathSpec,
};
use oqs_core::dynamics::{
    avg_trace_distance, evolve_on, steady_state, truncation_check, uniform_times, EvolveControls,
    Trajectory, POSITIVITY_TOL, TRUNCATION_TOL,
};
use oqs_core::generators::{Liouvillian, Model, REDFIELD_GRID_STEP};
use oqs_core::hpz::{
    equilibrium_state, hpz_coefficients, hpz_liouvillian, hpz_static_coefficients,
    hpz_static_liouvillian, StaticCoefficients, TimeGrid,
};
use oqs_core::oscillator::{offdiag_distance, trace_distance, DensityMatrix, SystemSpec};

use crate::config::{Method, Reference};
use crate::error::{BenchError, Result};

/// Physical parameters of one benchmark point, in units ħ = m = ω = 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub gamma: f64,
    pub beta: f64,
    pub cutoff: f64,
    pub dim: usize,
}

impl Point {
    pub fn system(&self) -> Result<SystemSpec> {
        Ok(SystemSpec::with_dim(self.dim)?)
    }

    pub fn bath(&self) -> Result<BathSpec> {
        Ok(BathSpec::new(self.gamma, self.beta, self.cutoff)?)
    }

    pub fn model(&self) -> Result<Model> {
        Ok(Model::new(&self.system()?, &self.bath()?)?)
    }
}

/// Generator for propagation up to `t_end`.
pub fn transient_generator(method: Method, model: &Model, t_end: f64) -> Result<Liouvillian> {
    let spec = model.basis().spec();
    Ok(match method {
        Method::Exact => {
            let grid = TimeGrid::for_model(t_end, spec, model.bath())?;
            hpz_liouvillian(&hpz_coefficients(model.bath(), spec, &grid)?, spec)?
        }
        Method::Redfield => model.redfield_td(REDFIELD_GRID_STEP / spec.omega)?,
        Method::RedfieldTi => model.redfield_ti()?,
        Method::Rwa => model.rwa()?,
        Method::Nr => model.nr()?,
    })
}

/// Generator whose fixed point is the method's steady state. Both Redfield
/// variants share the asymptotic generator.
pub fn stationary_generator(method: Method, model: &Model) -> Result<Liouvillian> {
    let spec = model.basis().spec();
    Ok(match method {
        Method::Exact => {
            let c = hpz_static_coefficients(model.bath(), spec)?;
            hpz_static_liouvillian(model.bath(), spec, &c)?
        }
        Method::Redfield | Method::RedfieldTi => model.redfield_ti()?,
        Method::Rwa => model.rwa()?,
        Method::Nr => model.nr()?,
    })
}

pub fn steady_reference(reference: Reference, model: &Model) -> Result<DensityMatrix> {
    Ok(match reference {
        Reference::Exact => equilibrium_state(model.bath(), model.basis().spec())?,
        Reference::Gibbs => model.basis().gibbs(model.bath().beta)?,
    })
}

#[derive(Debug, Clone)]
pub struct DynamicsRun {
    pub trajectory: Trajectory,
    /// Exact trajectory on the same samples, when requested.
    pub reference: Option<Trajectory>,
    /// Trace distance to the reference per sample.
    pub distances: Option<Vec<f64>>,
}

impl DynamicsRun {
    pub fn min_eigenvalue(&self) -> f64 {
        self.trajectory
            .min_eigenvalue
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn positivity_violated(&self) -> bool {
        self.min_eigenvalue() < POSITIVITY_TOL
    }

    /// Largest top-decile population along the reference, or along the
    /// trajectory itself without one.
    pub fn max_tail(&self) -> f64 {
        let traj = self.reference.as_ref().unwrap_or(&self.trajectory);
        traj.states
            .iter()
            .map(|s| truncation_check(s, TRUNCATION_TOL).tail_population)
            .fold(0.0, f64::max)
    }
}

/// Evolves the benchmark initial state on `samples` uniform intervals of `[0, t_end]`.
pub fn run_dynamics(
    method: Method,
    reference: Option<Reference>,
    point: &Point,
    t_end: f64,
    samples: usize,
) -> Result<DynamicsRun> {
    if samples < 1 {
        return Err(BenchError::Config("samples must be positive".into()));
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(BenchError::Config(format!(
            "tmax must be positive, got {t_end}"
        )));
    }
    let model = point.model()?;
    let basis = model.basis();
    let rho0 = basis.initial_state();
    let times = uniform_times(t_end, samples);
    let controls = EvolveControls::default().with_number(basis.number());
    let propagate = |m: Method| -> Result<Trajectory> {
        let gen = transient_generator(m, &model, t_end)?;
        Ok(evolve_on(&gen, &rho0, &times, &controls)?)
    };
    let trajectory = propagate(method)?;
    let (reference, distances) = match reference {
        None => (None, None),
        Some(Reference::Gibbs) => {
            let gibbs = basis.gibbs(point.beta)?;
            let d = trajectory
                .states
                .iter()
                .map(|s| trace_distance(&gibbs, s))
                .collect::<std::result::Result<_, oqs_core::Error>>()?;
            (None, Some(d))
        }
        Some(Reference::Exact) => {
            let exact = if method == Method::Exact {
                trajectory.clone()
            } else {
                propagate(Method::Exact)?
            };
            let d = exact
                .states
                .iter()
                .zip(&trajectory.states)
                .map(|(e, s)| trace_distance(e, s))
                .collect::<std::result::Result<_, oqs_core::Error>>()?;
            (Some(exact), Some(d))
        }
    };
    Ok(DynamicsRun {
        trajectory,
        reference,
        distances,
    })
}

/// Time-averaged trace distance to the exact solution over `[0, τ_R]`.
pub fn averaged_error(run: &DynamicsRun, tau_r: f64) -> Result<f64> {
    let reference = run
        .reference
        .as_ref()
        .ok_or_else(|| BenchError::Config("averaged error needs the exact reference".into()))?;
    Ok(avg_trace_distance(reference, &run.trajectory, tau_r)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyRow {
    pub gamma: f64,
    pub beta: f64,
    pub trace_dist: f64,
    pub trace_dist_over_gamma: f64,
    pub od_dist_over_gamma: f64,
    pub residual: f64,
    /// Top-decile population of the method's steady state.
    pub tail_population: f64,
    pub reference_tail: f64,
    pub min_eigenvalue: f64,
}

impl SteadyRow {
    pub fn truncation_failed(&self) -> bool {
        self.tail_population.max(self.reference_tail) > TRUNCATION_TOL
    }

    pub fn positivity_violated(&self) -> bool {
        self.min_eigenvalue < POSITIVITY_TOL
    }
}

pub fn run_steady(method: Method, reference: Reference, point: &Point) -> Result<SteadyRow> {
    let model = point.model()?;
    let ss = steady_state(&stationary_generator(method, &model)?)?;
    let target = steady_reference(reference, &model)?;
    let trace_dist = trace_distance(&target, &ss.state)?;
    let od = offdiag_distance(&target, &ss.state)?;
    Ok(SteadyRow {
        gamma: point.gamma,
        beta: point.beta,
        trace_dist,
        trace_dist_over_gamma: trace_dist / point.gamma,
        od_dist_over_gamma: od / point.gamma,
        residual: ss.residual,
        tail_population: truncation_check(&ss.state, TRUNCATION_TOL).tail_population,
        reference_tail: truncation_check(&target, TRUNCATION_TOL).tail_population,
        min_eigenvalue: ss.positivity_min_eig,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRow {
    pub delta: f64,
    pub j: f64,
    pub g_inf_r: Option<f64>,
    pub g_inf_i_matsubara: Option<f64>,
    pub g_inf_i_pv: Option<f64>,
    pub h: f64,
}

impl KernelRow {
    pub fn ok(&self) -> bool {
        self.g_inf_r.is_some() && self.g_inf_i_matsubara.is_some() && self.g_inf_i_pv.is_some()
    }
}

pub fn kernel_row(kernels: &BathKernels, delta: f64) -> KernelRow {
    let bath = kernels.spec();
    KernelRow {
        delta,
        j: spectral_density(delta, bath),
        g_inf_r: kernels.g_inf(delta).ok().map(|g| g.re),
        g_inf_i_matsubara: imag_coupling_matsubara(delta, bath).ok(),
        g_inf_i_pv: imag_coupling_pv(delta, bath).ok(),
        h: kernels.h(delta),
    }
}

/// The distinct Lamb-shift integrals of an equidistant spectrum with spacing `omega`.
pub fn oscillator_f_block(kernels: &BathKernels, omega: f64) -> Result<Vec<(f64, f64, f64)>> {
    [(omega, omega), (omega, -omega), (-omega, omega)]
        .into_iter()
        .map(|(a, b)| Ok((a, b, kernels.f(a, b)?)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct HpzTable {
    pub rows: Vec<(f64, StaticCoefficients)>,
    pub asymptotic: StaticCoefficients,
}

pub fn hpz_table(bath: &BathSpec, t_end: f64, samples: usize) -> Result<HpzTable> {
    if samples < 1 {
        return Err(BenchError::Config("samples must be positive".into()));
    }
    let spec = SystemSpec::with_dim(2)?;
    let grid = TimeGrid::for_model(t_end, &spec, bath)?;
    let coeffs = hpz_coefficients(bath, &spec, &grid)?;
    let rows = uniform_times(t_end, samples)
        .into_iter()
        .map(|t| Ok((t, coeffs.at(t)?)))
        .collect::<Result<_>>()?;
    Ok(HpzTable {
        rows,
        asymptotic: coeffs.asymptotic,
    })
}
