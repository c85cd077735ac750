//! Liouvillians of the approximate master equations. Every generator acts on
//! density matrices in the energy eigenbasis of `H_S` and is represented as
//!
//! `L(ρ) = K_l ρ + ρ K_r + Σ_j A_j ρ B_j + W[diag ρ]`
//!
//! where `W` moves population `ρ_kk → ρ_ll` at rate `W_lk`. Time-dependent
//! kinds rebuild that form at each requested time.

use std::fmt;
use std::sync::Arc;

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, ShapeBuilder};
use num_complex::Complex64 as C64;

use crate::bath::{BathKernels, BathSpec};
use crate::error::{Error, Result};
use crate::linalg::{self, I, ONE, ZERO};
use crate::oscillator::{DensityMatrix, EnergyBasis, OperatorLabel, OperatorMatrix, SystemSpec};

/// Relative cutoff below which coupling-operator entries are treated as zero.
pub const PRUNE: f64 = 1e-13;
/// Bohr frequencies closer than this (times ω) are identified.
pub const SECULAR_TOL: f64 = 1e-9;
/// Default spacing (in units of 1/ω) of the time-dependent Redfield table.
pub const REDFIELD_GRID_STEP: f64 = 0.0025;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorKind {
    RedfieldTD,
    RedfieldTI,
    Rwa,
    NathanRudner,
    Hpz,
}

impl GeneratorKind {
    pub fn name(self) -> &'static str {
        match self {
            GeneratorKind::RedfieldTD => "redfield",
            GeneratorKind::RedfieldTI => "redfield_ti",
            GeneratorKind::Rwa => "rwa",
            GeneratorKind::NathanRudner => "nr",
            GeneratorKind::Hpz => "exact",
        }
    }
}

/// `ρ ↦ K_l ρ + ρ K_r + Σ A ρ B + W[diag ρ]`.
#[derive(Debug, Clone)]
pub struct Sandwich {
    pub left: Array2<C64>,
    pub right: Array2<C64>,
    pub pairs: Vec<(Array2<C64>, Array2<C64>)>,
    pub transfer: Vec<(usize, usize, f64)>,
}

impl Sandwich {
    pub fn dim(&self) -> usize {
        self.left.nrows()
    }

    /// `out = L(ρ)`; `rho` and `out` may have any memory layout.
    pub fn apply_into(&self, rho: &ArrayView2<C64>, out: &mut ArrayViewMut2<C64>) {
        general_mat_mul(ONE, &self.left, rho, ZERO, out);
        general_mat_mul(ONE, rho, &self.right, ONE, out);
        let d = self.dim();
        let mut tmp = Array2::<C64>::zeros((d, d));
        for (a, b) in &self.pairs {
            general_mat_mul(ONE, a, rho, ZERO, &mut tmp);
            general_mat_mul(ONE, &tmp, b, ONE, out);
        }
        for &(l, k, w) in &self.transfer {
            out[(l, l)] += rho[(k, k)] * w;
        }
    }

    pub fn apply(&self, rho: &ArrayView2<C64>) -> Array2<C64> {
        let d = self.dim();
        let mut out = Array2::zeros((d, d));
        self.apply_into(rho, &mut out.view_mut());
        out
    }

    /// Nonzero superoperator entries `(row, col, value)` in column-stacking
    /// order (element `(r, c)` of ρ at index `r + c·D`). Entries may repeat.
    pub fn entries(&self) -> Vec<(usize, usize, C64)> {
        let d = self.dim();
        let nz = |a: &Array2<C64>| -> Vec<(usize, usize, C64)> {
            a.indexed_iter()
                .filter(|(_, v)| **v != ZERO)
                .map(|((r, c), v)| (r, c, *v))
                .collect()
        };
        let mut out = Vec::new();
        for (i, j, v) in nz(&self.left) {
            for c in 0..d {
                out.push((i + c * d, j + c * d, v));
            }
        }
        for (k, l, v) in nz(&self.right) {
            for r in 0..d {
                out.push((r + l * d, r + k * d, v));
            }
        }
        for (a, b) in &self.pairs {
            let (na, nb) = (nz(a), nz(b));
            for &(i, j, va) in &na {
                for &(k, l, vb) in &nb {
                    out.push((i + l * d, j + k * d, va * vb));
                }
            }
        }
        for &(l, k, w) in &self.transfer {
            out.push((l + l * d, k + k * d, C64::from(w)));
        }
        out
    }

    pub fn matrix(&self) -> Array2<C64> {
        let n = self.dim() * self.dim();
        let mut m = Array2::zeros((n, n));
        for (r, c, v) in self.entries() {
            m[(r, c)] += v;
        }
        m
    }
}

type Builder = dyn Fn(f64) -> Result<Sandwich> + Send + Sync;

#[derive(Clone)]
enum Action {
    Fixed(Arc<Sandwich>),
    Driven {
        build: Arc<Builder>,
        span: (f64, f64),
    },
}

/// A master-equation generator in the energy eigenbasis. Immutable and
/// cheap to clone; time-dependent kinds share their coefficient tables.
#[derive(Clone)]
pub struct Liouvillian {
    kind: GeneratorKind,
    dim: usize,
    lamb_shift: OperatorMatrix,
    action: Action,
}

impl fmt::Debug for Liouvillian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Liouvillian")
            .field("kind", &self.kind)
            .field("dim", &self.dim)
            .field("time_dependent", &self.is_time_dependent())
            .finish()
    }
}

impl Liouvillian {
    pub(crate) fn fixed(
        kind: GeneratorKind,
        lamb_shift: OperatorMatrix,
        sandwich: Sandwich,
    ) -> Self {
        Liouvillian {
            kind,
            dim: sandwich.dim(),
            lamb_shift,
            action: Action::Fixed(Arc::new(sandwich)),
        }
    }

    pub(crate) fn driven(
        kind: GeneratorKind,
        dim: usize,
        lamb_shift: OperatorMatrix,
        span: (f64, f64),
        build: Arc<Builder>,
    ) -> Self {
        Liouvillian {
            kind,
            dim,
            lamb_shift,
            action: Action::Driven { build, span },
        }
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Hermitian energy renormalization of this kind (asymptotic value for
    /// time-dependent kinds).
    pub fn lamb_shift(&self) -> &OperatorMatrix {
        &self.lamb_shift
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self.action, Action::Driven { .. })
    }

    /// Time interval on which the generator is defined.
    pub fn span(&self) -> (f64, f64) {
        match &self.action {
            Action::Fixed(_) => (f64::NEG_INFINITY, f64::INFINITY),
            Action::Driven { span, .. } => *span,
        }
    }

    /// The superoperator structure at time `t`.
    pub fn sandwich_at(&self, t: f64) -> Result<Arc<Sandwich>> {
        match &self.action {
            Action::Fixed(s) => Ok(Arc::clone(s)),
            Action::Driven { build, span } => {
                if !(t >= span.0 && t <= span.1) {
                    return Err(Error::OutsideGrid {
                        t,
                        start: span.0,
                        end: span.1,
                    });
                }
                Ok(Arc::new(build(t)?))
            }
        }
    }

    /// `L_t(ρ)`.
    pub fn apply(&self, t: f64, rho: &DensityMatrix) -> Result<Array2<C64>> {
        self.apply_matrix(t, &rho.view())
    }

    /// `L_t(A)` for an arbitrary square matrix `A`.
    pub fn apply_matrix(&self, t: f64, a: &ArrayView2<C64>) -> Result<Array2<C64>> {
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: a.nrows(),
            });
        }
        Ok(self.sandwich_at(t)?.apply(a))
    }

    /// Right-hand side on column-stacked flat vectors, as used by the integrator.
    pub(crate) fn apply_flat(&self, t: f64, rho: &[C64], out: &mut [C64]) -> Result<()> {
        let d = self.dim;
        let s = self.sandwich_at(t)?;
        let rv =
            ArrayView2::from_shape((d, d).f(), rho).map_err(|e| Error::Linalg(e.to_string()))?;
        let mut ov =
            ArrayViewMut2::from_shape((d, d).f(), out).map_err(|e| Error::Linalg(e.to_string()))?;
        s.apply_into(&rv, &mut ov);
        Ok(())
    }

    /// Dense `D² × D²` superoperator (column stacking) of a time-independent kind.
    pub fn matrix_form(&self) -> Result<Array2<C64>> {
        match &self.action {
            Action::Fixed(s) => Ok(s.matrix()),
            Action::Driven { .. } => Err(Error::NoMatrixForm),
        }
    }

    /// Sparse superoperator entries of a time-independent kind.
    pub fn matrix_entries(&self) -> Result<Vec<(usize, usize, C64)>> {
        match &self.action {
            Action::Fixed(s) => Ok(s.entries()),
            Action::Driven { .. } => Err(Error::NoMatrixForm),
        }
    }

    /// Time-independent generator equal to this one at time `t`.
    pub fn frozen(&self, t: f64) -> Result<Liouvillian> {
        let s = self.sandwich_at(t)?;
        Ok(Liouvillian {
            kind: self.kind,
            dim: self.dim,
            lamb_shift: self.lamb_shift.clone(),
            action: Action::Fixed(s),
        })
    }
}

/// Bohr frequencies `Δ_lk = ε_l − ε_k` grouped within a tolerance. Groups are
/// built on `Δ > 0` and mirrored, so the representative of `−Δ` is exactly
/// minus that of `Δ`.
#[derive(Debug, Clone)]
pub struct BohrClusters {
    values: Vec<f64>,
    index: Array2<usize>,
}

impl BohrClusters {
    pub fn new(energies: &[f64], tol: f64) -> Self {
        let d = energies.len();
        let mut pos: Vec<(f64, usize, usize)> = Vec::new();
        for l in 0..d {
            for k in 0..d {
                let v = energies[l] - energies[k];
                if v > 0.0 {
                    pos.push((v, l, k));
                }
            }
        }
        pos.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut reps: Vec<f64> = Vec::new();
        let mut start = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for &(v, l, k) in &pos {
            if v - start > tol || groups.is_empty() {
                if let Some(g) = groups.last() {
                    reps.push(sum / g.len() as f64);
                }
                groups.push(Vec::new());
                start = v;
                sum = 0.0;
            }
            sum += v;
            groups.last_mut().unwrap().push((l, k));
        }
        if let Some(g) = groups.last() {
            reps.push(sum / g.len() as f64);
        }
        let n = reps.len();
        let mut values = vec![0.0];
        values.extend(reps.iter().copied());
        values.extend(reps.iter().map(|v| -v));
        let mut index = Array2::zeros((d, d));
        for (g, members) in groups.iter().enumerate() {
            for &(l, k) in members {
                index[(l, k)] = 1 + g;
                index[(k, l)] = 1 + n + g;
            }
        }
        BohrClusters { values, index }
    }

    /// Distinct representative frequencies; index 0 is `Δ = 0`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn index(&self, l: usize, k: usize) -> usize {
        self.index[(l, k)]
    }

    pub fn delta(&self, l: usize, k: usize) -> f64 {
        self.values[self.index[(l, k)]]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// True when every Bohr frequency is an integer multiple of the
    /// smallest, i.e. the spectrum is equidistant to the clustering tolerance.
    pub fn is_equidistant(&self, energies: &[f64], tol: f64) -> bool {
        let gaps: Vec<f64> = energies.windows(2).map(|w| w[1] - w[0]).collect();
        match gaps.first() {
            None => true,
            Some(&g0) => gaps.iter().all(|g| (g - g0).abs() <= tol),
        }
    }
}

/// Energy basis, pruned coupling operator and kernel cache for one
/// `(SystemSpec, BathSpec)` pair; the common input of every builder.
#[derive(Debug, Clone)]
pub struct Model {
    basis: EnergyBasis,
    kernels: Arc<BathKernels>,
    clusters: BohrClusters,
    coupling: Array2<C64>,
    links: Vec<(usize, usize, C64)>,
}

impl Model {
    pub fn new(spec: &SystemSpec, bath: &BathSpec) -> Result<Self> {
        Self::with_kernels(spec, Arc::new(BathKernels::new(*bath)))
    }

    /// Reuses an existing kernel cache (it must belong to the same bath).
    pub fn with_kernels(spec: &SystemSpec, kernels: Arc<BathKernels>) -> Result<Self> {
        let bath = *kernels.spec();
        bath.validate()?;
        let basis = EnergyBasis::new(spec, &bath)?;
        let energies: Vec<f64> = basis.energies().to_vec();
        let mut clusters = BohrClusters::new(&energies, SECULAR_TOL * spec.omega);
        if clusters.is_equidistant(&energies, SECULAR_TOL * spec.omega) {
            // Snap to exact multiples of the level spacing so each distinct
            // frequency carries one kernel value.
            let gap =
                (energies[energies.len() - 1] - energies[0]) / (energies.len() - 1).max(1) as f64;
            for v in clusters.values.iter_mut() {
                *v = (*v / gap).round() * gap;
            }
        }
        let coupling = prune(basis.position().entries());
        let links = coupling
            .indexed_iter()
            .filter(|(_, v)| **v != ZERO)
            .map(|((l, k), v)| (l, k, *v))
            .collect();
        Ok(Model {
            basis,
            kernels,
            clusters,
            coupling,
            links,
        })
    }

    pub fn basis(&self) -> &EnergyBasis {
        &self.basis
    }

    pub fn kernels(&self) -> &Arc<BathKernels> {
        &self.kernels
    }

    pub fn bath(&self) -> &BathSpec {
        self.kernels.spec()
    }

    pub fn clusters(&self) -> &BohrClusters {
        &self.clusters
    }

    /// Position operator in the energy basis with entries below
    /// `PRUNE·max|x|` set to zero.
    pub fn coupling(&self) -> &Array2<C64> {
        &self.coupling
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn hamiltonian(&self) -> Array2<C64> {
        self.basis.hamiltonian().entries().clone()
    }

    /// `(𝕊)_{lk} = g(Δ_lk)·x_lk` with `g` evaluated once per cluster.
    fn dressed<F: FnMut(usize) -> Result<C64>>(&self, mut g: F) -> Result<Array2<C64>> {
        let d = self.dim();
        let mut s = Array2::zeros((d, d));
        let mut cache: Vec<Option<C64>> = vec![None; self.clusters.len()];
        for &(l, k, x) in &self.links {
            let idx = self.clusters.index(l, k);
            let v = match cache[idx] {
                Some(v) => v,
                None => {
                    let v = g(idx)?;
                    cache[idx] = Some(v);
                    v
                }
            };
            s[(l, k)] = v * x;
        }
        Ok(s)
    }

    fn redfield_sandwich(&self, h: &Array2<C64>, s: &Array2<C64>) -> Sandwich {
        let x = &self.coupling;
        let sd = linalg::dagger(&s.view());
        let left = h.mapv(|v| -I * v) - x.dot(s);
        let right = h.mapv(|v| I * v) - sd.dot(x);
        Sandwich {
            left,
            right,
            pairs: vec![(x.clone(), sd), (s.clone(), x.clone())],
            transfer: Vec::new(),
        }
    }

    fn redfield_lamb(&self, s: &Array2<C64>) -> OperatorMatrix {
        let x = &self.coupling;
        let xs = x.dot(s);
        let lamb = (xs.clone() - linalg::dagger(&xs.view())).mapv(|v| v / (2.0 * I));
        OperatorMatrix::from_square(lamb, OperatorLabel::Generic)
    }

    /// `𝕊_∞` with entries `G_∞(Δ_lk)·x_lk`.
    pub fn asymptotic_dressing(&self) -> Result<Array2<C64>> {
        let vals = self.clusters.values();
        self.dressed(|i| self.kernels.g_inf(vals[i]))
    }

    /// `𝕊_t` computed directly from the finite-horizon coupling density.
    pub fn dressing_at(&self, t: f64) -> Result<Array2<C64>> {
        let vals = self.clusters.values();
        self.dressed(|i| self.kernels.g_t(vals[i], t))
    }

    /// Time-independent Redfield generator with `𝕊_∞`.
    pub fn redfield_ti(&self) -> Result<Liouvillian> {
        let s = self.asymptotic_dressing()?;
        let h = self.hamiltonian();
        Ok(Liouvillian::fixed(
            GeneratorKind::RedfieldTI,
            self.redfield_lamb(&s),
            self.redfield_sandwich(&h, &s),
        ))
    }

    /// Redfield generator with `𝕊_t` frozen at horizon `t`.
    pub fn redfield_frozen(&self, t: f64) -> Result<Liouvillian> {
        let s = self.dressing_at(t)?;
        let h = self.hamiltonian();
        Ok(Liouvillian::fixed(
            GeneratorKind::RedfieldTI,
            self.redfield_lamb(&s),
            self.redfield_sandwich(&h, &s),
        ))
    }

    /// Horizon after which `𝕊_t` is replaced by `𝕊_∞`: forty decay times of
    /// the slower of the cutoff and first Matsubara exponentials, which puts
    /// the switch below double precision.
    pub fn redfield_saturation(&self) -> f64 {
        let b = self.bath();
        (40.0 / b.cutoff).max(40.0 * b.beta / (2.0 * std::f64::consts::PI))
    }

    /// Time-dependent Redfield generator. `𝕊_t` is tabulated through the
    /// smooth envelope `F_t` (`G_t = G_∞ − e^{−iΔt}F_t`) on a uniform grid and
    /// interpolated by local cubics; beyond the grid `𝕊_t = 𝕊_∞`.
    pub fn redfield_td(&self, step: f64) -> Result<Liouvillian> {
        if !(step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "grid step must be positive, got {step}"
            )));
        }
        let vals = self.clusters.values().to_vec();
        let mut used: Vec<usize> = self
            .links
            .iter()
            .map(|&(l, k, _)| self.clusters.index(l, k))
            .collect();
        used.sort_unstable();
        used.dedup();
        let t_end = self.redfield_saturation();
        let n = ((t_end / step).ceil() as usize).max(3);
        let mut g_inf = vec![ZERO; vals.len()];
        let mut table = Array2::<C64>::zeros((n + 1, vals.len()));
        for &j in &used {
            g_inf[j] = self.kernels.g_inf(vals[j])?;
            for i in 0..=n {
                table[(i, j)] = self.kernels.g_t_envelope(vals[j], i as f64 * step)?;
            }
        }
        let s_inf = self.asymptotic_dressing()?;
        let lamb = self.redfield_lamb(&s_inf);
        let model = self.clone();
        let h = self.hamiltonian();
        let grid_end = n as f64 * step;
        let build = move |t: f64| -> Result<Sandwich> {
            let s = if t >= grid_end {
                s_inf.clone()
            } else {
                let u = t / step;
                let i = (u.floor() as usize).min(n - 1);
                let base = i.saturating_sub(1).min(n.saturating_sub(3));
                let w = lagrange4(u - base as f64);
                let d = model.dim();
                let mut cache = vec![None; vals.len()];
                let mut s = Array2::zeros((d, d));
                for &(l, k, x) in &model.links {
                    let j = model.clusters.index(l, k);
                    let g = *cache[j].get_or_insert_with(|| {
                        let mut env = ZERO;
                        for (m, wm) in w.iter().enumerate() {
                            env += table[(base + m, j)] * *wm;
                        }
                        g_inf[j] - C64::new(0.0, -vals[j] * t).exp() * env
                    });
                    s[(l, k)] = g * x;
                }
                s
            };
            Ok(model.redfield_sandwich(&h, &s))
        };
        Ok(Liouvillian::driven(
            GeneratorKind::RedfieldTD,
            self.dim(),
            lamb,
            (0.0, f64::INFINITY),
            Arc::new(build),
        ))
    }

    /// Secular (quantum-optical) generator with clustered jump operators
    /// `A_c = Σ_{Δ_lk ∈ c} x_lk |l⟩⟨k|` at rates `2G_∞^r(Δ_c)`.
    pub fn rwa(&self) -> Result<Liouvillian> {
        let d = self.dim();
        let vals = self.clusters.values();
        let mut members: Vec<Vec<(usize, usize, C64)>> = vec![Vec::new(); vals.len()];
        for &(l, k, x) in &self.links {
            members[self.clusters.index(l, k)].push((l, k, x));
        }
        let h = self.hamiltonian();
        let mut lamb = Array2::<C64>::zeros((d, d));
        let mut decay = Array2::<C64>::zeros((d, d));
        let mut pairs = Vec::new();
        let mut transfer = Vec::new();
        for (c, list) in members.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let g = self.kernels.g_inf(vals[c])?;
            let rate = 2.0 * g.re;
            // (A†A)_{kk'} = Σ_l x*_lk x_lk'.
            for &(l, k, x) in list {
                for &(l2, k2, x2) in list {
                    if l == l2 {
                        let v = x.conj() * x2;
                        lamb[(k, k2)] += g.im * v;
                        decay[(k, k2)] += rate * v;
                    }
                }
            }
            if list.len() == 1 {
                let (l, k, x) = list[0];
                transfer.push((l, k, rate * x.norm_sqr()));
            } else {
                let mut a = Array2::<C64>::zeros((d, d));
                for &(l, k, x) in list {
                    a[(l, k)] = x;
                }
                let ad = linalg::dagger(&a.view());
                pairs.push((a.mapv(|v| v * rate), ad));
            }
        }
        let left = (&h + &lamb).mapv(|v| -I * v) - decay.mapv(|v| 0.5 * v);
        let right = (&h + &lamb).mapv(|v| I * v) - decay.mapv(|v| 0.5 * v);
        let sandwich = Sandwich {
            left,
            right,
            pairs,
            transfer,
        };
        Ok(Liouvillian::fixed(
            GeneratorKind::Rwa,
            OperatorMatrix::from_square(lamb, OperatorLabel::Generic),
            sandwich,
        ))
    }

    /// Jump operator and Lamb shift of the Nathan–Rudner equation.
    pub fn nr_ingredients(&self) -> Result<NRIngredients> {
        let d = self.dim();
        let vals = self.clusters.values();
        let jump = self.dressed(|i| {
            Ok(C64::from(
                2.0 * std::f64::consts::PI * self.kernels.h(vals[i]),
            ))
        })?;
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); d];
        for &(l, n, x) in &self.links {
            rows[l].push((n, x));
        }
        let scale = self
            .links
            .iter()
            .map(|l| l.2.norm())
            .fold(0.0, f64::max)
            .powi(2);
        let mut lamb = Array2::<C64>::zeros((d, d));
        for l in 0..d {
            for &(n, x_ln) in &rows[l] {
                for &(k, x_nk) in &rows[n] {
                    let prod = x_ln * x_nk;
                    if prod.norm() < PRUNE * scale {
                        continue;
                    }
                    let f = self
                        .kernels
                        .f(self.clusters.delta(n, l), self.clusters.delta(k, n))?;
                    lamb[(l, k)] += f * prod;
                }
            }
        }
        Ok(NRIngredients {
            jump: OperatorMatrix::from_square(jump, OperatorLabel::Generic),
            lamb: OperatorMatrix::from_square(lamb, OperatorLabel::Generic),
        })
    }

    /// `dρ/dt = −i[H_S + Λ, ρ] − ½{L†L, ρ} + LρL†`.
    pub fn nr(&self) -> Result<Liouvillian> {
        let ing = self.nr_ingredients()?;
        let l = ing.jump.entries();
        let ld = linalg::dagger(&l.view());
        let ll = ld.dot(l).mapv(|v| 0.5 * v);
        let h = self.hamiltonian() + ing.lamb.entries();
        let left = h.mapv(|v| -I * v) - &ll;
        let right = h.mapv(|v| I * v) - &ll;
        let sandwich = Sandwich {
            left,
            right,
            pairs: vec![(l.clone(), ld)],
            transfer: Vec::new(),
        };
        Ok(Liouvillian::fixed(
            GeneratorKind::NathanRudner,
            ing.lamb,
            sandwich,
        ))
    }
}

/// Ingredients of the Nathan–Rudner generator.
#[derive(Debug, Clone)]
pub struct NRIngredients {
    /// `L_lk = 2π·h(Δ_lk)·x_lk`.
    pub jump: OperatorMatrix,
    /// `Λ_lk = Σ_n f(Δ_nl, Δ_kn)·x_ln·x_nk`.
    pub lamb: OperatorMatrix,
}

fn prune(a: &Array2<C64>) -> Array2<C64> {
    let m = linalg::max_abs(&a.view());
    a.mapv(|v| if v.norm() < PRUNE * m { ZERO } else { v })
}

/// Cubic Lagrange weights on nodes 0, 1, 2, 3 at abscissa `s`.
pub(crate) fn lagrange4(s: f64) -> [f64; 4] {
    let (a, b, c, d) = (s, s - 1.0, s - 2.0, s - 3.0);
    [
        -b * c * d / 6.0,
        a * c * d / 2.0,
        -a * b * d / 2.0,
        a * b * c / 6.0,
    ]
}

/// Redfield generator, time-dependent or with the asymptotic coupling density.
pub fn redfield_liouvillian(
    spec: &SystemSpec,
    bath: &BathSpec,
    time_dependent: bool,
) -> Result<Liouvillian> {
    let model = Model::new(spec, bath)?;
    if time_dependent {
        model.redfield_td(REDFIELD_GRID_STEP / spec.omega)
    } else {
        model.redfield_ti()
    }
}

pub fn rwa_liouvillian(spec: &SystemSpec, bath: &BathSpec) -> Result<Liouvillian> {
    Model::new(spec, bath)?.rwa()
}

pub fn nr_ingredients(spec: &SystemSpec, bath: &BathSpec) -> Result<NRIngredients> {
    Model::new(spec, bath)?.nr_ingredients()
}

pub fn nr_liouvillian(spec: &SystemSpec, bath: &BathSpec) -> Result<Liouvillian> {
    Model::new(spec, bath)?.nr()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lagrange_reproduces_cubics() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        for s in [0.3, 1.5, 2.9] {
            let w = lagrange4(s);
            let v: f64 = (0..4).map(|i| w[i] * p(i as f64)).sum();
            assert!((v - p(s)).abs() < 1e-12);
        }
    }

    #[test]
    fn clusters_mirror_and_group() {
        let e = [0.0, 1.0, 2.0 + 1e-12, 3.5];
        let c = BohrClusters::new(&e, 1e-9);
        assert_eq!(c.delta(0, 0), 0.0);
        assert_eq!(c.index(1, 0), c.index(2, 1));
        assert_eq!(c.delta(0, 1), -c.delta(1, 0));
        assert_ne!(c.index(3, 2), c.index(1, 0));
        assert!(c.is_equidistant(&e[..3], 1e-9));
        assert!(!c.is_equidistant(&e, 1e-9));
    }

    #[test]
    fn entries_match_direct_action() {
        let d = 3;
        let m = |s: f64| {
            Array2::from_shape_fn((d, d), |(r, c)| {
                C64::new(s * (r as f64 - c as f64), s + r as f64 * 0.3)
            })
        };
        let sw = Sandwich {
            left: m(0.7),
            right: m(-0.2),
            pairs: vec![(m(1.1), m(0.4))],
            transfer: vec![(0, 2, 0.9)],
        };
        let rho = m(0.25);
        let direct = sw.apply(&rho.view());
        let v = linalg::vectorize(&rho.view());
        let out = sw.matrix().dot(&v);
        let back = linalg::unvectorize(out.as_slice().unwrap(), d);
        assert!(linalg::max_abs(&(direct - back).view()) < 1e-13);
    }
}
