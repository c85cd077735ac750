//! Ohmic-Drude bath: spectral density, correlation function, coupling
//! densities and the kernels `h`, `f` of the Nathan-Rudner construction.
//!
//! Conventions (ħ = 1):
//!
//! * `J(Δ) = (γΔ/π) / (1 + (Δ/E_c)²)`
//! * `C(τ) = ∫ dΩ J(Ω) n(Ω) e^{iΩτ}` with `n(Ω) = 1/(e^{βΩ} − 1)`
//! * `G_t(Δ) = ∫_0^t C(τ) e^{−iΔτ} dτ`, and `G_∞ = πJn + i·PV∫ Jn(Ω)/(Ω − Δ) dΩ`
//!
//! For `τ > 0` the correlation function is the exponential series
//! `C(τ) = (c_E − iγE_c²/2) e^{−E_c τ} + Σ_l c_l e^{−ν_l τ}` with Matsubara
//! energies `ν_l = 2πl/β`, `c_E = (γE_c²/2) cot(βE_c/2)` and
//! `c_l = (2γ/β) E_c² ν_l / (ν_l² − E_c²)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex64 as C64;
use parking_lot::RwLock;

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};
use crate::special::{self, ZETA2, ZETA3, ZETA5};

/// Relative width of the forbidden band around `βE_c/(2π) ∈ ℕ`.
pub const POLE_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BathSpec {
    pub gamma: f64,
    pub beta: f64,
    pub cutoff: f64,
    pub matsubara_terms: usize,
    pub quad_rel_tol: f64,
}

impl BathSpec {
    pub fn new(gamma: f64, beta: f64, cutoff: f64) -> Result<Self> {
        let spec = BathSpec {
            gamma,
            beta,
            cutoff,
            matsubara_terms: 10_000,
            quad_rel_tol: 1e-9,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_numerics(mut self, matsubara_terms: usize, quad_rel_tol: f64) -> Result<Self> {
        self.matsubara_terms = matsubara_terms;
        self.quad_rel_tol = quad_rel_tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !(self.cutoff > 0.0 && self.cutoff.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cutoff must be positive, got {}",
                self.cutoff
            )));
        }
        if self.matsubara_terms == 0 {
            return Err(Error::InvalidParameter(
                "matsubara_terms must be positive".into(),
            ));
        }
        if !(self.quad_rel_tol > 0.0 && self.quad_rel_tol < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "quad_rel_tol out of range: {}",
                self.quad_rel_tol
            )));
        }
        let ratio = self.beta * self.cutoff / (2.0 * PI);
        let nearest = ratio.round();
        if nearest >= 1.0 && (ratio - nearest).abs() <= POLE_GUARD * ratio {
            return Err(Error::MatsubaraPole { ratio });
        }
        Ok(())
    }

    /// `G_R = ∫_0^∞ J(ω)/ω dω = γE_c/2`.
    pub fn reorganization_energy(&self) -> f64 {
        0.5 * self.gamma * self.cutoff
    }

    pub fn matsubara(&self, l: usize) -> f64 {
        2.0 * PI * l as f64 / self.beta
    }

    /// Coefficient `c_E` of `e^{−E_c τ}` in `Re C(τ)`.
    pub fn cutoff_coefficient(&self) -> f64 {
        let e = self.cutoff;
        0.5 * self.gamma * e * e / (0.5 * self.beta * e).tan()
    }

    /// Coefficient `c_l` of `e^{−ν_l τ}` in `C(τ)`.
    pub fn matsubara_coefficient(&self, l: usize) -> f64 {
        let nu = self.matsubara(l);
        let e2 = self.cutoff * self.cutoff;
        2.0 * self.gamma / self.beta * e2 * nu / (nu * nu - e2)
    }

    fn opts(&self) -> QuadOptions {
        QuadOptions::new(self.quad_rel_tol, 1e-15 * self.gamma.max(1e-300))
    }
}

/// Time horizon of a coupling density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingDensityValue {
    pub real_part: f64,
    pub imag_part: f64,
    pub delta: f64,
    pub horizon: Horizon,
}

impl CouplingDensityValue {
    pub fn value(&self) -> C64 {
        C64::new(self.real_part, self.imag_part)
    }
}

/// `J(Δ)`.
pub fn spectral_density(delta: f64, bath: &BathSpec) -> f64 {
    let r = delta / bath.cutoff;
    bath.gamma * delta / PI / (1.0 + r * r)
}

/// `J(Δ) n(Δ)`, non-negative for all `Δ`, with the limit `γ/(πβ)` at zero.
pub fn thermal_weight(delta: f64, bath: &BathSpec) -> f64 {
    let x = bath.beta * delta;
    let r = delta / bath.cutoff;
    let ratio = if x.abs() < 1e-12 {
        1.0 - 0.5 * x
    } else {
        x / x.exp_m1()
    };
    bath.gamma / (PI * bath.beta) / (1.0 + r * r) * ratio
}

/// Bath correlation function `C(τ)`.
///
/// The thermal part `2∫_0^∞ J n cos(Ωτ) dΩ` is integrated numerically; the
/// vacuum part `∫_0^∞ J cos(Ωτ) dΩ` and the imaginary part are closed-form.
/// `C` diverges logarithmically at `τ = 0`, which is rejected.
pub fn bath_correlation(tau: f64, bath: &BathSpec) -> Result<C64> {
    if bath.gamma == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    if tau == 0.0 {
        return Err(Error::InvalidParameter(
            "C(τ) diverges logarithmically at τ = 0".into(),
        ));
    }
    let s = tau.abs();
    let e = bath.cutoff;
    let vacuum = bath.gamma * e * e / PI * special::cosine_lorentz_transform(e * s);
    let imag = -0.5 * bath.gamma * e * e * (-e * s).exp() * tau.signum();

    let top = (40.0 - bath.quad_rel_tol.ln()) / bath.beta;
    let period = 2.0 * PI / s;
    let nbreaks = ((top / period).ceil() as usize).min(2000);
    let mut breaks: Vec<f64> = (1..nbreaks)
        .map(|k| k as f64 * top / nbreaks as f64)
        .collect();
    breaks.push(1.0 / bath.beta);
    breaks.push(e);
    let (thermal, _) = quad::integrate_with_breaks(
        |w: f64| 2.0 * thermal_weight(w, bath) * (w * s).cos(),
        0.0,
        top,
        &breaks,
        &bath.opts(),
    )?;
    Ok(C64::new(vacuum + thermal, imag))
}

/// `Re C(τ)` from the exponential series, `τ > 0`. Used as an independent
/// check of [`bath_correlation`].
pub fn noise_kernel_series(tau: f64, bath: &BathSpec) -> Result<f64> {
    let mut sum = bath.cutoff_coefficient() * (-bath.cutoff * tau).exp();
    for l in 1..=bath.matsubara_terms {
        let t = bath.matsubara_coefficient(l) * (-bath.matsubara(l) * tau).exp();
        sum += t;
        if t.abs() < 1e-17 * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::SeriesCap {
        terms: bath.matsubara_terms,
    })
}

/// Imaginary part of `G_∞(Δ)` from the Matsubara series.
pub fn imag_coupling_matsubara(delta: f64, bath: &BathSpec) -> Result<f64> {
    let g = bath.gamma;
    if g == 0.0 {
        return Ok(0.0);
    }
    let e = bath.cutoff;
    let e2 = e * e;
    let d2 = delta * delta;
    let head = -g * e2 * e / (2.0 * (e2 + d2));
    let cot = 1.0 / (0.5 * bath.beta * e).tan();
    // Σ_l ν_l/((Δ² + ν_l²)(1 − ν_l²/E²)): the −E²/ν_l³ and
    // −E²(E² − Δ²)/ν_l⁵ asymptotes are summed exactly via ζ(3) and ζ(5),
    // leaving terms that decay as 1/l⁷.
    let scale = bath.beta / (2.0 * PI);
    let asym = -e2 * scale.powi(3) * ZETA3 - e2 * (e2 - d2) * scale.powi(5) * ZETA5;
    let min_terms = (1.0 / (bath.beta * e.min(1.0))).ceil() as usize;
    let mut rem = 0.0;
    let mut converged = false;
    for l in 1..=bath.matsubara_terms {
        let nu = bath.matsubara(l);
        let nu2 = nu * nu;
        let num = nu2 * (e2 * d2 + (e2 - d2) * (e2 - d2)) + e2 * d2 * (e2 - d2);
        let t = e2 * num / (nu2 * nu2 * nu * (d2 + nu2) * (e2 - nu2));
        rem += t;
        let tail = t.abs() * l as f64 / 6.0;
        if l >= min_terms && tail <= bath.quad_rel_tol * 1e-3 * (rem + asym).abs().max(1e-300) {
            rem += t * l as f64 / 6.0;
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SeriesCap {
            terms: bath.matsubara_terms,
        });
    }
    let bracket = -e2 * cot / (2.0 * (e2 + d2)) + 2.0 / bath.beta * (rem + asym);
    Ok(head + delta * g * bracket)
}

/// Imaginary part of `G_∞(Δ)` by principal-value quadrature,
/// `∫_0^∞ [w(Δ + s) − w(Δ − s)]/s ds` with `w = Jn`.
pub fn imag_coupling_pv(delta: f64, bath: &BathSpec) -> Result<f64> {
    if bath.gamma == 0.0 {
        return Ok(0.0);
    }
    let breaks = scale_breaks(&[delta.abs(), 1.0 / bath.beta, bath.cutoff]);
    let opts = QuadOptions::new(bath.quad_rel_tol * 1e-2, 1e-14 * bath.gamma);
    let (v, _) = quad::integrate_to_infinity(
        |s: f64| {
            if s == 0.0 {
                return 0.0;
            }
            (thermal_weight(delta + s, bath) - thermal_weight(delta - s, bath)) / s
        },
        0.0,
        &breaks,
        &opts,
    )?;
    Ok(v)
}

fn scale_breaks(scales: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for &s in scales {
        if s > 0.0 && s.is_finite() {
            for m in [0.25, 1.0, 4.0, 16.0] {
                out.push(s * m);
            }
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// `G_t(Δ)` for finite `t` from the exponential decomposition of `C(τ)`:
/// `G_t = G_∞ − e^{−iΔt} F_t(Δ)`.
fn finite_coupling(delta: f64, t: f64, g_inf: C64, bath: &BathSpec) -> Result<C64> {
    if t == 0.0 || bath.gamma == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    let tail = finite_envelope(delta, t, g_inf, bath)?;
    let phase = C64::new(0.0, -delta * t).exp();
    Ok(g_inf - phase * tail)
}

/// Slowly varying envelope `F_t(Δ) = Σ_k c_k e^{−λ_k t}/(λ_k + iΔ)`, equal to
/// `G_∞` at `t = 0` and decaying to zero.
fn finite_envelope(delta: f64, t: f64, g_inf: C64, bath: &BathSpec) -> Result<C64> {
    if bath.gamma == 0.0 {
        return Ok(C64::new(0.0, 0.0));
    }
    if t == 0.0 {
        return Ok(g_inf);
    }
    let e = bath.cutoff;
    let i_delta = C64::new(0.0, delta);
    let c_e = C64::new(bath.cutoff_coefficient(), -0.5 * bath.gamma * e * e);
    let mut tail = c_e * (-e * t).exp() / (e + i_delta);

    // Matsubara part Σ_l c_l q^l/(ν_l + iΔ), q = e^{−2πt/β}. The leading
    // κ/ν_l² behaviour is summed by the dilogarithm; the 1/ν_l³ remainder
    // explicitly, with an integral estimate of what is left.
    let a = 2.0 * PI * t / bath.beta;
    let q = (-a).exp();
    let one_minus_q = -(-a).exp_m1();
    let kappa = 2.0 * bath.gamma * e * e / bath.beta;
    let scale = bath.beta / (2.0 * PI);
    let mut mats = C64::from(kappa * scale * scale * special::li2_unit(q, one_minus_q));
    let e2 = e * e;
    let width = 1.0 + e.max(delta.abs()) * scale;
    let target = bath.quad_rel_tol * 1e-2 * g_inf.norm().max(1e-300);
    let mut ql = 1.0;
    let mut done = false;
    for l in 1..=bath.matsubara_terms {
        ql *= q;
        let nu = bath.matsubara(l);
        let nu2 = nu * nu;
        let num = C64::new(e2 * nu, delta * (e2 - nu2));
        let r = kappa * num / (nu2 * (nu2 - e2) * C64::new(nu, delta));
        let term = r * ql;
        mats += term;
        let lf = l as f64;
        let bound = term.norm() * (0.5 * lf).min(q / one_minus_q.max(1e-300));
        if bound <= target || bound * width / lf <= target {
            // Remaining Σ_{j>l} r_j q^j ≈ −iκΔ(β/2π)³ Σ_{j>l} q^j/j³.
            let m = lf + 0.5;
            let z = a * m;
            if z < 30.0 {
                let e3 = e3_integral(z);
                mats += C64::new(0.0, -kappa * delta * scale.powi(3)) * e3 / (m * m);
            }
            done = true;
            break;
        }
    }
    if !done {
        return Err(Error::SeriesCap {
            terms: bath.matsubara_terms,
        });
    }
    tail += mats;
    Ok(tail)
}

/// `E_3(z) = ∫_1^∞ e^{−zt}/t³ dt` for `z ≥ 0`.
fn e3_integral(z: f64) -> f64 {
    if z == 0.0 {
        return 0.5;
    }
    let e1 = special::e1_scaled(z) * (-z).exp();
    let ez = (-z).exp();
    let e2 = ez - z * e1;
    0.5 * (ez - z * e2)
}

/// Coupling density at horizon `t` or asymptotically.
pub fn coupling_density(
    delta: f64,
    horizon: Horizon,
    bath: &BathSpec,
) -> Result<CouplingDensityValue> {
    let g_inf = asymptotic_coupling(delta, bath)?;
    let value = match horizon {
        Horizon::Asymptotic => g_inf,
        Horizon::Finite(t) => {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "horizon must be non-negative, got {t}"
                )));
            }
            if t.is_infinite() {
                g_inf
            } else {
                finite_coupling(delta, t, g_inf, bath)?
            }
        }
    };
    Ok(CouplingDensityValue {
        real_part: value.re,
        imag_part: value.im,
        delta,
        horizon,
    })
}

fn asymptotic_coupling(delta: f64, bath: &BathSpec) -> Result<C64> {
    Ok(C64::new(
        PI * thermal_weight(delta, bath),
        imag_coupling_matsubara(delta, bath)?,
    ))
}

/// `G_∞(Δ)` summed directly from the exponential decomposition,
/// `c_E'/(E_c + iΔ) + Σ_l c_l/(ν_l + iΔ)`. An independent cross-check.
pub fn asymptotic_coupling_series(delta: f64, bath: &BathSpec) -> Result<C64> {
    let e = bath.cutoff;
    let c_e = C64::new(bath.cutoff_coefficient(), -0.5 * bath.gamma * e * e);
    let mut sum = c_e / C64::new(e, delta);
    let kappa = 2.0 * bath.gamma * e * e / bath.beta;
    let scale = bath.beta / (2.0 * PI);
    // Leading 1/ν² and 1/ν³ parts summed through ζ(2) and ζ(3).
    sum += kappa * scale * scale * ZETA2;
    sum += C64::new(0.0, -kappa * delta * scale.powi(3) * ZETA3);
    let e2 = e * e;
    let cap = bath.matsubara_terms.max(1_000_000);
    for l in 1..=cap {
        let nu = bath.matsubara(l);
        let nu2 = nu * nu;
        let t = kappa * (nu2 * (e2 - delta * delta) + delta * delta * e2)
            / (nu2 * nu * (nu2 - e2) * C64::new(nu, delta));
        sum += t;
        if t.norm() * l as f64 <= 1e-13 * sum.norm() {
            return Ok(sum);
        }
    }
    Err(Error::SeriesCap { terms: cap })
}

/// `h(Δ) = √(J(Δ) n(Δ) / 2π)`.
pub fn nr_h(delta: f64, bath: &BathSpec) -> f64 {
    (thermal_weight(delta, bath) / (2.0 * PI)).sqrt()
}

/// `f(Δ₁, Δ₂) = 2π PV∫ dω/ω h(ω + Δ₁) h(ω − Δ₂)`, folded onto `(0, ∞)`.
pub fn nr_f(delta1: f64, delta2: f64, bath: &BathSpec) -> Result<f64> {
    if bath.gamma == 0.0 {
        return Ok(0.0);
    }
    let ff = |w: f64| nr_h(w + delta1, bath) * nr_h(w - delta2, bath);
    let breaks = scale_breaks(&[delta1.abs(), delta2.abs(), 1.0 / bath.beta, bath.cutoff]);
    let opts = QuadOptions::new(bath.quad_rel_tol * 1e-2, 1e-14 * bath.gamma);
    let (v, _) = quad::integrate_to_infinity(
        |w: f64| if w == 0.0 { 0.0 } else { (ff(w) - ff(-w)) / w },
        0.0,
        &breaks,
        &opts,
    )?;
    Ok(2.0 * PI * v)
}

fn quantize(delta: f64) -> i64 {
    (delta * 1e9).round() as i64
}

fn dequantize(key: i64) -> f64 {
    key as f64 * 1e-9
}

/// Memoizing kernel evaluator shared by generator assembly. Energies are
/// keyed on a 1e-9 grid, so Bohr frequencies that agree to that resolution
/// share one evaluation.
#[derive(Debug)]
pub struct BathKernels {
    spec: BathSpec,
    f_cache: RwLock<HashMap<(i64, i64), f64>>,
    g_cache: RwLock<HashMap<i64, C64>>,
    f_quadratures: AtomicUsize,
}

impl BathKernels {
    pub fn new(spec: BathSpec) -> Self {
        BathKernels {
            spec,
            f_cache: RwLock::new(HashMap::new()),
            g_cache: RwLock::new(HashMap::new()),
            f_quadratures: AtomicUsize::new(0),
        }
    }

    pub fn spec(&self) -> &BathSpec {
        &self.spec
    }

    /// `G_∞(Δ)`.
    pub fn g_inf(&self, delta: f64) -> Result<C64> {
        let key = quantize(delta);
        if let Some(v) = self.g_cache.read().get(&key) {
            return Ok(*v);
        }
        let v = asymptotic_coupling(dequantize(key), &self.spec)?;
        self.g_cache.write().insert(key, v);
        Ok(v)
    }

    /// `G_t(Δ)`; not cached because callers tabulate it themselves.
    pub fn g_t(&self, delta: f64, t: f64) -> Result<C64> {
        let key = quantize(delta);
        let inf = self.g_inf(delta)?;
        finite_coupling(dequantize(key), t, inf, &self.spec)
    }

    /// Envelope `F_t(Δ)` with `G_t = G_∞ − e^{−iΔt} F_t`; smooth in `t`, so
    /// it is the quantity worth tabulating.
    pub fn g_t_envelope(&self, delta: f64, t: f64) -> Result<C64> {
        let key = quantize(delta);
        let inf = self.g_inf(delta)?;
        finite_envelope(dequantize(key), t, inf, &self.spec)
    }

    pub fn h(&self, delta: f64) -> f64 {
        nr_h(dequantize(quantize(delta)), &self.spec)
    }

    /// `f(Δ₁, Δ₂)` using the symmetry `f(Δ₁, Δ₂) = f(−Δ₂, −Δ₁)` to share
    /// cache entries.
    pub fn f(&self, delta1: f64, delta2: f64) -> Result<f64> {
        let a = (quantize(delta1), quantize(delta2));
        let b = (-a.1, -a.0);
        let key = a.min(b);
        if let Some(v) = self.f_cache.read().get(&key) {
            return Ok(*v);
        }
        let v = nr_f(dequantize(key.0), dequantize(key.1), &self.spec)?;
        self.f_quadratures.fetch_add(1, Ordering::Relaxed);
        self.f_cache.write().insert(key, v);
        Ok(v)
    }

    /// Number of `f` quadratures performed so far.
    pub fn f_evaluations(&self) -> usize {
        self.f_quadratures.load(Ordering::Relaxed)
    }
}
