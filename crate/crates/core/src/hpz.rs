//! Exact reduced dynamics of the oscillator in the Drude bath and the
//! time-local master equation it implies.
//!
//! The Drude dissipation kernel is embedded exactly with one auxiliary
//! coordinate `z`, giving the linear drift `(x, p, z)' = A (x, p, z)` plus a
//! Gaussian force with correlation `ν(τ) = Re C(τ)` acting on `p`. Mean values
//! propagate with `Φ(t) = e^{At}`, and the noise adds the covariance
//! `N(t) = ∫∫ Φ(t−s) e_p e_pᵀ Φ(t−s')ᵀ ν(s−s') ds ds'`, which the eigenbasis
//! of `A` reduces to one-dimensional transforms of `ν` known in closed form.
//! The master-equation coefficients follow by matching the moment equations
//!
//! `⟨x⟩' = ⟨p⟩/m`, `⟨p⟩' = −mγ_x⟨x⟩ − γ_p⟨p⟩`,
//! `⟨p²⟩' = −2mγ_x C − 2γ_p⟨p²⟩ + 2m²D_p`,
//! `C' = ⟨p²⟩/m − mγ_x⟨x²⟩ − γ_p C + m²D_x`, with `C = ⟨{x,p}⟩/2`.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::Array2;
use ndarray_linalg::{Eig, Inverse};
use num_complex::Complex64 as C64;

use crate::bath::BathSpec;
use crate::error::{Error, Result};
use crate::generators::{lagrange4, GeneratorKind, Liouvillian, Sandwich};
use crate::linalg::{self, I, ZERO};
use crate::ode::{self, OdeOptions};
use crate::oscillator::{DensityMatrix, EnergyBasis, OperatorLabel, OperatorMatrix, SystemSpec};
use crate::special::{self, ZETA2, ZETA3};

/// Largest admissible grid step, in units of `min(1/ω, 1/E_c)`.
pub const GRID_STEP_FACTOR: f64 = 0.005;

/// Uniform grid `t_i = i·step`, `i = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    step: f64,
    len: usize,
}

impl TimeGrid {
    /// Grid from 0 to at least `t_end` with the given step.
    pub fn new(t_end: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) || !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "invalid time grid: end {t_end}, step {step}"
            )));
        }
        let n = (t_end / step - 1e-9).ceil().max(1.0) as usize;
        Ok(TimeGrid { step, len: n + 1 })
    }

    /// Grid to `t_end` with the largest admissible step for this model.
    pub fn for_model(t_end: f64, spec: &SystemSpec, bath: &BathSpec) -> Result<Self> {
        TimeGrid::new(t_end, max_grid_step(spec, bath))
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn end(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|i| self.time(i)).collect()
    }
}

pub fn max_grid_step(spec: &SystemSpec, bath: &BathSpec) -> f64 {
    GRID_STEP_FACTOR * (1.0 / spec.omega).min(1.0 / bath.cutoff)
}

fn check_grid(grid: &TimeGrid, spec: &SystemSpec, bath: &BathSpec) -> Result<()> {
    let limit = max_grid_step(spec, bath);
    if grid.step > limit * (1.0 + 1e-12) {
        return Err(Error::GridTooCoarse {
            step: grid.step,
            limit,
        });
    }
    Ok(())
}

/// Squared frequency of the bare potential including the counterterm.
fn potential_frequency_sq(spec: &SystemSpec, bath: &BathSpec) -> f64 {
    let shift = if spec.counterterm {
        2.0 * bath.reorganization_energy() / spec.mass
    } else {
        0.0
    };
    spec.omega * spec.omega + shift
}

type Mat3 = [[f64; 3]; 3];

/// The embedded linear drift and its eigendecomposition.
#[derive(Debug, Clone)]
pub struct Drift {
    matrix: Mat3,
    /// Eigenvalues, slowest (largest real part) first.
    rates: [C64; 3],
    /// Eigenvectors as columns.
    modes: [[C64; 3]; 3],
    /// `W⁻¹ e_p`.
    weights: [C64; 3],
    /// Absent without coupling.
    noise: Option<NoiseTransform>,
}

impl Drift {
    pub fn new(spec: &SystemSpec, bath: &BathSpec) -> Result<Self> {
        spec.validate()?;
        bath.validate()?;
        let m = spec.mass;
        let e = bath.cutoff;
        let matrix = [
            [0.0, 1.0 / m, 0.0],
            [
                -m * potential_frequency_sq(spec, bath),
                0.0,
                bath.gamma * e * e,
            ],
            [1.0, 0.0, -e],
        ];
        let a = Array2::from_shape_fn((3, 3), |(i, j)| matrix[i][j]);
        let (vals, vecs) = a.eig()?;
        let mut order = [0usize, 1, 2];
        order.sort_by(|&i, &j| {
            vals[j]
                .re
                .partial_cmp(&vals[i].re)
                .unwrap()
                .then(vals[j].im.total_cmp(&vals[i].im))
        });
        let w = Array2::from_shape_fn((3, 3), |(i, j)| vecs[(i, order[j])]);
        let winv = w.inv()?;
        let rates = [vals[order[0]], vals[order[1]], vals[order[2]]];
        let noise = if bath.gamma > 0.0 {
            Some(NoiseTransform::new(bath, &rates)?)
        } else {
            None
        };
        Ok(Drift {
            matrix,
            rates,
            noise,
            modes: std::array::from_fn(|i| std::array::from_fn(|j| w[(i, j)])),
            weights: std::array::from_fn(|j| winv[(j, 1)]),
        })
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.matrix
    }

    pub fn rates(&self) -> &[C64; 3] {
        &self.rates
    }

    /// `e^{At}` from the eigendecomposition.
    pub fn propagator(&self, t: f64) -> Result<Mat3> {
        let w = Array2::from_shape_fn((3, 3), |(i, j)| self.modes[i][j]);
        let winv = w.inv()?;
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = (0..3)
                    .map(|j| w[(i, j)] * (self.rates[j] * t).exp() * winv[(j, k)])
                    .sum::<C64>()
                    .re;
            }
        }
        Ok(out)
    }

    /// Noise covariance `N(t)` of `(x, p, z)` and its time derivative.
    pub fn noise_covariance(&self, t: f64) -> Result<(Mat3, Mat3)> {
        let nt = match &self.noise {
            Some(nt) if t > 0.0 => nt,
            _ => return Ok(([[0.0; 3]; 3], [[0.0; 3]; 3])),
        };
        let mut fwd = [ZERO; 3];
        let mut bwd = [ZERO; 3];
        for j in 0..3 {
            fwd[j] = nt.forward(j, t)?;
            bwd[j] = nt.backward(j, t)?;
        }
        let growth: [C64; 3] = std::array::from_fn(|j| (self.rates[j] * t).exp());
        let tilde = |j: usize, k: usize| {
            let lambda = self.rates[j] + self.rates[k];
            self.weights[j]
                * self.weights[k]
                * (growth[j] * bwd[k] + growth[k] * bwd[j] - fwd[j] - fwd[k])
                / lambda
        };
        let n = self.assemble(tilde);
        let r: [f64; 3] = std::array::from_fn(|i| {
            (0..3)
                .map(|j| self.modes[i][j] * self.weights[j] * fwd[j])
                .sum::<C64>()
                .re
        });
        Ok((n, self.lyapunov_rhs(&n, &r)))
    }

    /// `lim_{t→∞} N(t)`.
    pub fn stationary_covariance(&self) -> Result<Mat3> {
        let Some(nt) = &self.noise else {
            return Ok([[0.0; 3]; 3]);
        };
        if self.rates[0].re >= 0.0 {
            return Err(Error::InvalidState("drift has no stationary state".into()));
        }
        let lim: [C64; 3] = std::array::from_fn(|j| nt.forward_limit(j));
        Ok(self.assemble(|j, k| {
            -self.weights[j] * self.weights[k] * (lim[j] + lim[k]) / (self.rates[j] + self.rates[k])
        }))
    }

    /// `W Ñ Wᵀ`, real part.
    fn assemble(&self, tilde: impl Fn(usize, usize) -> C64) -> Mat3 {
        let t: [[C64; 3]; 3] = std::array::from_fn(|j| std::array::from_fn(|k| tilde(j, k)));
        let w = &self.modes;
        std::array::from_fn(|a| {
            std::array::from_fn(|b| {
                let mut s = ZERO;
                for (j, tj) in t.iter().enumerate() {
                    for (k, tjk) in tj.iter().enumerate() {
                        s += w[a][j] * tjk * w[b][k];
                    }
                }
                s.re
            })
        })
    }

    /// `AN + NAᵀ + e_p rᵀ + r e_pᵀ`.
    fn lyapunov_rhs(&self, n: &Mat3, r: &[f64; 3]) -> Mat3 {
        let a = &self.matrix;
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut v = 0.0;
                for k in 0..3 {
                    v += a[i][k] * n[k][j] + n[i][k] * a[j][k];
                }
                if i == 1 {
                    v += r[j];
                }
                if j == 1 {
                    v += r[i];
                }
                v
            })
        })
    }

    /// Coefficients of the effective two-dimensional drift of the slow pair.
    fn slow_drift(&self) -> Result<[[f64; 2]; 2]> {
        let u = Array2::from_shape_fn((2, 2), |(i, j)| self.modes[i][j]);
        let uinv = u.inv()?;
        Ok(std::array::from_fn(|i| {
            std::array::from_fn(|k| {
                (0..2)
                    .map(|j| u[(i, j)] * self.rates[j] * uinv[(j, k)])
                    .sum::<C64>()
                    .re
            })
        }))
    }
}

/// `(e^{zt} − 1)/z` without cancellation at small `zt`.
fn expm1_over(z: C64, t: f64) -> C64 {
    let zt = z * t;
    if zt.norm() < 1e-3 {
        t * (C64::from(1.0) + zt / 2.0 * (C64::from(1.0) + zt / 3.0 * (C64::from(1.0) + zt / 4.0)))
    } else {
        (zt.exp() - 1.0) / z
    }
}

/// One-sided transforms of `ν(τ) = c_E e^{−E τ} + Σ_l c_l e^{−ν_l τ}`:
///
/// forward `I(μ,t) = ∫_0^t e^{μu} ν(u) du`, backward `B(μ,t) = ∫_0^t e^{μ(t−u)} ν(u) du`.
///
/// The Matsubara part is `Σ_l c_l/(ν_l − μ)·(1 − e^{(μ−ν_l)t})`. Its `1/ν²` and
/// `1/ν³` asymptotes are summed as `ζ(2), ζ(3)` (or `Li₂, Li₃` of `e^{−2πt/β}`),
/// the `O(ν⁻⁴)` remainder explicitly with an integral tail estimate.
#[derive(Debug, Clone)]
struct NoiseTransform {
    bath: BathSpec,
    rates: [C64; 3],
    /// `Σ_l c_l/(ν_l − μ_j)` and `Σ_l c_l/(ν_l + μ_j)`.
    sum_fwd: [C64; 3],
    sum_bwd: [C64; 3],
}

impl NoiseTransform {
    fn new(bath: &BathSpec, rates: &[C64; 3]) -> Result<Self> {
        let mut sum_fwd = [ZERO; 3];
        let mut sum_bwd = [ZERO; 3];
        for j in 0..3 {
            sum_fwd[j] = matsubara_sum(bath, rates[j], None)?;
            sum_bwd[j] = matsubara_sum(bath, -rates[j], None)?;
        }
        Ok(NoiseTransform {
            bath: *bath,
            rates: *rates,
            sum_fwd,
            sum_bwd,
        })
    }

    fn forward(&self, j: usize, t: f64) -> Result<C64> {
        let mu = self.rates[j];
        let e = self.bath.cutoff;
        let cut = self.bath.cutoff_coefficient() * expm1_over(mu - e, t);
        let tail = matsubara_sum(&self.bath, mu, Some(t))?;
        Ok(cut + self.sum_fwd[j] - (mu * t).exp() * tail)
    }

    fn forward_limit(&self, j: usize) -> C64 {
        self.bath.cutoff_coefficient() / (self.bath.cutoff - self.rates[j]) + self.sum_fwd[j]
    }

    fn backward(&self, j: usize, t: f64) -> Result<C64> {
        let mu = self.rates[j];
        let e = self.bath.cutoff;
        let z = mu + e;
        let shape = if (z * t).norm() < 1e-3 {
            (-e * t).exp() * expm1_over(z, t)
        } else {
            ((mu * t).exp() - (-e * t).exp()) / z
        };
        let cut = self.bath.cutoff_coefficient() * shape;
        let tail = matsubara_sum(&self.bath, -mu, Some(t))?;
        Ok(cut + (mu * t).exp() * self.sum_bwd[j] - tail)
    }
}

/// `Σ_l c_l q^l/(ν_l − μ)` with `q = e^{−2πt/β}`, or `q = 1` for `t = None`.
fn matsubara_sum(bath: &BathSpec, mu: C64, t: Option<f64>) -> Result<C64> {
    let c = 2.0 * PI / bath.beta;
    let s = 1.0 / c;
    let e2 = bath.cutoff * bath.cutoff;
    let kappa = 2.0 * bath.gamma * e2 / bath.beta;
    let a = t.map_or(0.0, |t| c * t);
    let (li2, li3) = match t {
        None => (ZETA2, ZETA3),
        Some(_) => {
            let q = (-a).exp();
            (special::li2_unit(q, -(-a).exp_m1()), special::li3_exp(a))
        }
    };
    let head = kappa * s * s * li2 + kappa * mu * s.powi(3) * li3;
    let scale = kappa * s * s * ZETA2 + (kappa * mu).norm() * s.powi(3) * ZETA3;
    let tol = 1e-14 * scale;
    let mu2 = mu * mu;
    let c4 = kappa * (e2 + mu2) * s.powi(4);
    let c5 = kappa * (e2 + mu2) * mu * s.powi(5);
    let l_min = ((2.0 * (mu.norm() + bath.cutoff) / c).ceil() as usize).max(2);
    let q = (-a).exp();
    let mut ql = 1.0;
    let mut rem = ZERO;
    for l in 1..=bath.matsubara_terms {
        ql *= q;
        let nu = c * l as f64;
        let nu2 = nu * nu;
        let r = kappa * (nu2 * (e2 + mu2) - e2 * mu2) / (nu2 * nu * (nu2 - e2) * (nu - mu));
        rem += r * ql;
        if l >= l_min {
            let m = l as f64 + 0.5;
            let z = a * m;
            let tail =
                c4 * special::expint_n(4, z) / m.powi(3) + c5 * special::expint_n(5, z) / m.powi(4);
            let rel = (e2 + mu.norm_sqr()) / (c * m).powi(2) + (a + 4.0 / m).powi(2) / 24.0;
            if tail.norm() * rel <= tol {
                return Ok(head + rem + tail);
            }
        }
    }
    Err(Error::SeriesCap {
        terms: bath.matsubara_terms,
    })
}

/// Fundamental solutions `M(t)` (top-left 2×2 block of `e^{At}`, columns for
/// initial `(x, p) = (1, 0)` and `(0, 1)`) and their derivatives on a grid.
#[derive(Debug, Clone)]
pub struct FundamentalSolutions {
    pub grid: TimeGrid,
    pub m: Vec<[[f64; 2]; 2]>,
    pub m_dot: Vec<[[f64; 2]; 2]>,
}

pub fn fundamental_solutions(
    bath: &BathSpec,
    spec: &SystemSpec,
    grid: &TimeGrid,
) -> Result<FundamentalSolutions> {
    check_grid(grid, spec, bath)?;
    let drift = Drift::new(spec, bath)?;
    let a = *drift.matrix();
    let mut y0 = vec![0.0; 9];
    for k in 0..3 {
        y0[k * 3 + k] = 1.0;
    }
    // Columns of Φ stored contiguously: y[3c + r] = Φ_rc.
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| -> Result<()> {
        for col in 0..3 {
            for row in 0..3 {
                dy[3 * col + row] = (0..3).map(|k| a[row][k] * y[3 * col + k]).sum();
            }
        }
        Ok(())
    };
    let opts = OdeOptions::with_tolerances(1e-12, 1e-14);
    let times = grid.times();
    let mut m = Vec::with_capacity(grid.len());
    let mut m_dot = Vec::with_capacity(grid.len());
    ode::integrate_with(rhs, 0.0, &y0, &times, &opts, |_, _, y: &[f64]| {
        let phi = |r: usize, c: usize| y[3 * c + r];
        m.push([[phi(0, 0), phi(0, 1)], [phi(1, 0), phi(1, 1)]]);
        let d = |r: usize, c: usize| (0..3).map(|k| a[r][k] * phi(k, c)).sum::<f64>();
        m_dot.push([[d(0, 0), d(0, 1)], [d(1, 0), d(1, 1)]]);
        Ok(())
    })?;
    Ok(FundamentalSolutions {
        grid: *grid,
        m,
        m_dot,
    })
}

/// First and second moments of a state: `(⟨x⟩, ⟨p⟩)` and
/// `(⟨x²⟩, ⟨p²⟩, ⟨{x,p}⟩/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: [f64; 2],
    pub covariance: [f64; 3],
}

impl Moments {
    /// Uncertainty product `⟨x²⟩⟨p²⟩ − C²` of the centred moments.
    pub fn uncertainty(&self) -> f64 {
        let [x, p] = self.mean;
        let [xx, pp, xp] = self.covariance;
        (xx - x * x) * (pp - p * p) - (xp - x * p).powi(2)
    }

    /// Moments of the Gaussian ground state of the free oscillator.
    pub fn vacuum(spec: &SystemSpec) -> Self {
        let m = spec.mass;
        let w = spec.omega;
        Moments {
            mean: [0.0, 0.0],
            covariance: [0.5 / (m * w), 0.5 * m * w, 0.0],
        }
    }
}

/// Exact moment trajectory on a grid.
#[derive(Debug, Clone)]
pub struct ExactMoments {
    pub grid: TimeGrid,
    pub moments: Vec<Moments>,
}

pub fn exact_moments(
    bath: &BathSpec,
    spec: &SystemSpec,
    initial: &Moments,
    grid: &TimeGrid,
) -> Result<ExactMoments> {
    let fund = fundamental_solutions(bath, spec, grid)?;
    let drift = Drift::new(spec, bath)?;
    let [xx, pp, xp] = initial.covariance;
    let s0 = [[xx, xp], [xp, pp]];
    let mut moments = Vec::with_capacity(grid.len());
    for (i, m) in fund.m.iter().enumerate() {
        let (n, _) = drift.noise_covariance(grid.time(i))?;
        let mean = [
            m[0][0] * initial.mean[0] + m[0][1] * initial.mean[1],
            m[1][0] * initial.mean[0] + m[1][1] * initial.mean[1],
        ];
        let s = |a: usize, b: usize| {
            let mut v = n[a][b];
            for j in 0..2 {
                for k in 0..2 {
                    v += m[a][j] * s0[j][k] * m[b][k];
                }
            }
            v
        };
        moments.push(Moments {
            mean,
            covariance: [s(0, 0), s(1, 1), s(0, 1)],
        });
    }
    Ok(ExactMoments {
        grid: *grid,
        moments,
    })
}

/// Master-equation coefficients at one instant. `d_p` multiplies
/// `−m²[x,[x,ρ]]` and `d_x` multiplies `m²[x,[p,ρ]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StaticCoefficients {
    pub gamma_x: f64,
    pub gamma_p: f64,
    pub d_x: f64,
    pub d_p: f64,
}

/// Time-dependent coefficients on a uniform grid plus their `t → ∞` limits.
#[derive(Debug, Clone)]
pub struct HpzCoefficients {
    pub bath: BathSpec,
    pub spec: SystemSpec,
    pub grid: TimeGrid,
    pub gamma_x: Vec<f64>,
    pub gamma_p: Vec<f64>,
    pub d_x: Vec<f64>,
    pub d_p: Vec<f64>,
    pub asymptotic: StaticCoefficients,
}

impl HpzCoefficients {
    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    /// Coefficients at `t` by local cubic interpolation.
    pub fn at(&self, t: f64) -> Result<StaticCoefficients> {
        let end = self.grid.end();
        if !(t >= 0.0 && t <= end * (1.0 + 1e-12)) {
            return Err(Error::OutsideGrid { t, start: 0.0, end });
        }
        let n = self.grid.len();
        if n < 4 {
            let i = ((t / self.grid.step()).round() as usize).min(n - 1);
            return Ok(self.sample(i));
        }
        let u = t / self.grid.step();
        let i = (u.floor() as usize).min(n - 2);
        let base = i.saturating_sub(1).min(n - 4);
        let w = lagrange4(u - base as f64);
        let mix = |v: &[f64]| (0..4).map(|k| w[k] * v[base + k]).sum::<f64>();
        Ok(StaticCoefficients {
            gamma_x: mix(&self.gamma_x),
            gamma_p: mix(&self.gamma_p),
            d_x: mix(&self.d_x),
            d_p: mix(&self.d_p),
        })
    }

    pub fn sample(&self, i: usize) -> StaticCoefficients {
        StaticCoefficients {
            gamma_x: self.gamma_x[i],
            gamma_p: self.gamma_p[i],
            d_x: self.d_x[i],
            d_p: self.d_p[i],
        }
    }
}

/// Relative size of `det M` below which the mean-value inversion is skipped.
const SINGULAR_DET: f64 = 1e-10;

pub fn hpz_coefficients(
    bath: &BathSpec,
    spec: &SystemSpec,
    grid: &TimeGrid,
) -> Result<HpzCoefficients> {
    let fund = fundamental_solutions(bath, spec, grid)?;
    let drift = Drift::new(spec, bath)?;
    let m = spec.mass;
    let n = grid.len();
    let mut gamma_x = vec![f64::NAN; n];
    let mut gamma_p = vec![f64::NAN; n];
    let mut singular = Vec::new();
    for i in 0..n {
        let mm = &fund.m[i];
        let det = mm[0][0] * mm[1][1] - mm[0][1] * mm[1][0];
        let norm2 = mm.iter().flatten().map(|v| v * v).sum::<f64>();
        if det.abs() < SINGULAR_DET * norm2 {
            singular.push(i);
            continue;
        }
        // Row p of Ṁ M⁻¹.
        let md = &fund.m_dot[i][1];
        let r0 = (md[0] * mm[1][1] - md[1] * mm[1][0]) / det;
        let r1 = (-md[0] * mm[0][1] + md[1] * mm[0][0]) / det;
        gamma_x[i] = -r0 / m;
        gamma_p[i] = -r1;
    }
    if !singular.is_empty() {
        log::warn!(
            "mean-value matrix singular at {} grid times; coefficients interpolated",
            singular.len()
        );
        bridge(&mut gamma_x)?;
        bridge(&mut gamma_p)?;
    }
    let mut d_x = vec![0.0; n];
    let mut d_p = vec![0.0; n];
    for i in 0..n {
        let (nc, nd) = drift.noise_covariance(grid.time(i))?;
        let (gx, gp) = (gamma_x[i], gamma_p[i]);
        let k_xx = 0.5 * (nd[1][1] + 2.0 * m * gx * nc[0][1] + 2.0 * gp * nc[1][1]);
        let k_xp = nd[0][1] - nc[1][1] / m + m * gx * nc[0][0] + gp * nc[0][1];
        d_p[i] = k_xx / (m * m);
        d_x[i] = k_xp / (m * m);
    }
    Ok(HpzCoefficients {
        bath: *bath,
        spec: *spec,
        grid: *grid,
        gamma_x,
        gamma_p,
        d_x,
        d_p,
        asymptotic: asymptotic_coefficients(&drift, spec)?,
    })
}

/// Linear interpolation across NaN runs.
fn bridge(v: &mut [f64]) -> Result<()> {
    let known: Vec<usize> = (0..v.len()).filter(|&i| v[i].is_finite()).collect();
    if known.is_empty() {
        return Err(Error::InvalidState(
            "mean-value matrix singular on the whole grid".into(),
        ));
    }
    for i in 0..v.len() {
        if v[i].is_finite() {
            continue;
        }
        let hi = known.partition_point(|&k| k < i);
        v[i] = match (hi.checked_sub(1).map(|j| known[j]), known.get(hi)) {
            (Some(a), Some(&b)) => v[a] + (v[b] - v[a]) * (i - a) as f64 / (b - a) as f64,
            (Some(a), None) => v[a],
            (None, Some(&b)) => v[b],
            (None, None) => unreachable!(),
        };
    }
    Ok(())
}

/// `t → ∞` coefficients: the fast mode has decayed, the mean drift is that
/// of the slow eigenpair and the covariance is stationary.
fn asymptotic_coefficients(drift: &Drift, spec: &SystemSpec) -> Result<StaticCoefficients> {
    let m = spec.mass;
    let a = drift.slow_drift()?;
    let gx = -a[1][0] / m;
    let gp = -a[1][1];
    let n = drift.stationary_covariance()?;
    let (xx, pp, xp) = (n[0][0], n[1][1], n[0][1]);
    let k_xx = m * gx * xp + gp * pp;
    let k_xp = -pp / m + m * gx * xx + gp * xp;
    Ok(StaticCoefficients {
        gamma_x: gx,
        gamma_p: gp,
        d_x: k_xp / (m * m),
        d_p: k_xx / (m * m),
    })
}

/// Asymptotic coefficients alone, without a time grid.
pub fn hpz_static_coefficients(bath: &BathSpec, spec: &SystemSpec) -> Result<StaticCoefficients> {
    asymptotic_coefficients(&Drift::new(spec, bath)?, spec)
}

/// Operators shared by every evaluation of the generator.
struct Operators {
    h: Array2<C64>,
    x: Array2<C64>,
    p: Array2<C64>,
    x2: Array2<C64>,
    xp: Array2<C64>,
    px: Array2<C64>,
    h_s: Array2<C64>,
    mass: f64,
    freq_sq: f64,
}

impl Operators {
    fn new(spec: &SystemSpec, bath: &BathSpec) -> Result<Self> {
        let basis = EnergyBasis::new(spec, bath)?;
        let x = basis.position().entries().clone();
        let p = basis.momentum().entries().clone();
        Ok(Operators {
            h: basis.hamiltonian().entries().clone(),
            x2: x.dot(&x),
            xp: x.dot(&p),
            px: p.dot(&x),
            h_s: basis.hamiltonian().entries().clone(),
            x,
            p,
            mass: spec.mass,
            freq_sq: potential_frequency_sq(spec, bath),
        })
    }

    fn sandwich(&self, c: &StaticCoefficients) -> Sandwich {
        let m = self.mass;
        let k_xx = C64::from(c.d_p * m * m);
        let k_xp = C64::from(c.d_x * m * m);
        let half_gp = C64::from(0.5 * c.gamma_p);
        let h = &self.h + &(&self.x2 * C64::from(0.5 * m * (c.gamma_x - self.freq_sq)));
        let left = &(&h * (-I)) + &(&self.xp * (k_xp - I * half_gp)) - &(&self.x2 * k_xx);
        let right = &(&h * I) + &(&self.px * (k_xp + I * half_gp)) - &(&self.x2 * k_xx);
        let pairs = vec![
            (&self.x * (-I * half_gp - k_xp), self.p.clone()),
            (&self.p * (I * half_gp - k_xp), self.x.clone()),
            (&self.x * (C64::from(2.0) * k_xx), self.x.clone()),
        ];
        Sandwich {
            left,
            right,
            pairs,
            transfer: Vec::new(),
        }
    }

    fn lamb_shift(&self, c: &StaticCoefficients) -> OperatorMatrix {
        let s = self.sandwich(c);
        let h = linalg::hermitian_part(&(&s.left * I).view()) - &self.h_s;
        OperatorMatrix::new(h, OperatorLabel::Generic).expect("square operator")
    }
}

fn check_spec(coeffs: &HpzCoefficients, spec: &SystemSpec) -> Result<()> {
    let c = &coeffs.spec;
    if c.omega != spec.omega || c.mass != spec.mass || c.counterterm != spec.counterterm {
        return Err(Error::InvalidParameter(
            "system parameters differ from those of the coefficients".into(),
        ));
    }
    spec.validate()
}

/// Time-dependent exact generator on the span of the coefficient grid.
pub fn hpz_liouvillian(coeffs: &HpzCoefficients, spec: &SystemSpec) -> Result<Liouvillian> {
    check_spec(coeffs, spec)?;
    let ops = Arc::new(Operators::new(spec, &coeffs.bath)?);
    let lamb = ops.lamb_shift(&coeffs.asymptotic);
    let table = Arc::new(coeffs.clone());
    let span = (0.0, coeffs.grid.end());
    let build = move |t: f64| -> Result<Sandwich> { Ok(ops.sandwich(&table.at(t)?)) };
    Ok(Liouvillian::driven(
        GeneratorKind::Hpz,
        spec.dim,
        lamb,
        span,
        Arc::new(build),
    ))
}

/// Exact generator with the asymptotic coefficients, whose fixed point is
/// the exact steady state.
pub fn hpz_static_liouvillian(
    bath: &BathSpec,
    spec: &SystemSpec,
    coeffs: &StaticCoefficients,
) -> Result<Liouvillian> {
    let ops = Operators::new(spec, bath)?;
    Ok(Liouvillian::fixed(
        GeneratorKind::Hpz,
        ops.lamb_shift(coeffs),
        ops.sandwich(coeffs),
    ))
}

/// Exact equilibrium state in the energy basis: the centred Gaussian state
/// with the stationary covariance of the drift. Equilibrium forces
/// `⟨{x,p}⟩ = 0`, so the state is thermal for `p²/2m + mΩ²x²/2` with
/// `Ω = √(⟨p²⟩/⟨x²⟩)/m` and `n̄ + ½ = √(⟨x²⟩⟨p²⟩)`. It is assembled in the
/// Fock basis from the squeezed number states `|φ_k⟩ = S|k⟩` and projected
/// onto the model's energy levels, so it does not inherit edge effects of
/// the truncated generator.
pub fn equilibrium_state(bath: &BathSpec, spec: &SystemSpec) -> Result<DensityMatrix> {
    let basis = EnergyBasis::new(spec, bath)?;
    if bath.gamma == 0.0 {
        return basis.gibbs(bath.beta);
    }
    let cov = Drift::new(spec, bath)?.stationary_covariance()?;
    let (xx, pp) = (cov[0][0], cov[1][1]);
    let nu = (xx * pp).sqrt();
    if !(xx > 0.0 && pp > 0.0 && nu >= 0.5 - 1e-12) {
        return Err(Error::InvalidState(format!(
            "covariance ({xx}, {pp}) violates the uncertainty bound"
        )));
    }
    let omega = (pp / xx).sqrt() / spec.mass;
    let q = ((nu - 0.5) / (nu + 0.5)).max(0.0);
    // Thermal weights below 1e-17 are dropped.
    let kept = if q > 0.0 {
        ((1e-17f64).ln() / q.ln()).ceil() as usize
    } else {
        1
    };
    // b = cosh r·a + sinh r·a† with e^{2r} = Ω/ω annihilates |φ_0⟩, and
    // |φ_{k+1}⟩ = b†|φ_k⟩/√(k+1). Truncating the Fock vectors at `len`
    // corrupts one further component per step from the top, so rows below
    // `d` stay exact when len ≥ d + kept.
    let r = 0.5 * (omega / spec.omega).ln();
    let (mu, sigma) = (r.cosh(), r.sinh());
    let t = r.tanh();
    let d = spec.dim;
    let len = d + kept + 2;
    let mut phi = vec![0.0; len];
    phi[0] = 1.0 / mu.sqrt();
    for n in (2..len).step_by(2) {
        phi[n] = -t * ((n - 1) as f64 / n as f64).sqrt() * phi[n - 2];
    }
    let mut rho = Array2::<f64>::zeros((d, d));
    let mut w = 1.0 - q;
    let mut next = vec![0.0; len];
    for k in 0..kept {
        for i in 0..d {
            let vi = w * phi[i];
            for j in 0..d {
                rho[(i, j)] += vi * phi[j];
            }
        }
        let norm = 1.0 / ((k + 1) as f64).sqrt();
        for m in 0..len {
            let up = if m > 0 {
                mu * (m as f64).sqrt() * phi[m - 1]
            } else {
                0.0
            };
            let down = if m + 1 < len {
                sigma * ((m + 1) as f64).sqrt() * phi[m + 1]
            } else {
                0.0
            };
            next[m] = norm * (up + down);
        }
        std::mem::swap(&mut phi, &mut next);
        w *= q;
    }
    DensityMatrix::normalized(linalg::transform(
        &basis.unitary().view(),
        &rho.mapv(C64::from).view(),
    ))
}
