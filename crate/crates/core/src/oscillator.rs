//! Truncated harmonic-oscillator space: operators, reference states and
//! distance metrics.
//!
//! Working units are ħ = 1; energies and inverse temperatures are quoted in
//! units of ω.

use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64 as C64;

use crate::bath::BathSpec;
use crate::error::{Error, Result};
use crate::linalg::{self, I, ONE, ZERO};

/// Hermiticity tolerance of [`DensityMatrix`] (max elementwise |ρ − ρ†|).
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Trace tolerance of [`DensityMatrix`].
pub const TRACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemSpec {
    pub dim: usize,
    pub omega: f64,
    pub mass: f64,
    /// Include the reorganization energy `G_R x²` in the system Hamiltonian.
    pub counterterm: bool,
}

impl SystemSpec {
    pub fn new(dim: usize, omega: f64, mass: f64, counterterm: bool) -> Result<Self> {
        let spec = SystemSpec {
            dim,
            omega,
            mass,
            counterterm,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_dim(dim: usize) -> Result<Self> {
        SystemSpec::new(dim, 1.0, 1.0, true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "dim must be at least 2, got {}",
                self.dim
            )));
        }
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mass must be positive, got {}",
                self.mass
            )));
        }
        Ok(())
    }
}

impl Default for SystemSpec {
    fn default() -> Self {
        SystemSpec {
            dim: 30,
            omega: 1.0,
            mass: 1.0,
            counterterm: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorLabel {
    Position,
    Momentum,
    Number,
    Hamiltonian,
    Generic,
}

/// A square complex matrix tagged with its physical role.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: Array2<C64>,
    label: OperatorLabel,
}

impl OperatorMatrix {
    pub fn new(entries: Array2<C64>, label: OperatorLabel) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        Ok(OperatorMatrix { entries, label })
    }

    pub(crate) fn from_square(entries: Array2<C64>, label: OperatorLabel) -> Self {
        debug_assert!(entries.is_square());
        OperatorMatrix { entries, label }
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn view(&self) -> ArrayView2<'_, C64> {
        self.entries.view()
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    pub fn label(&self) -> OperatorLabel {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn dagger(&self) -> OperatorMatrix {
        OperatorMatrix::from_square(linalg::dagger(&self.view()), self.label)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        linalg::hermiticity_defect(&self.view()) <= tol
    }

    pub fn relabel(mut self, label: OperatorLabel) -> Self {
        self.label = label;
        self
    }
}

/// Hermitian, unit-trace matrix. Positivity is deliberately not enforced:
/// Redfield dynamics can leave the positive cone.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: Array2<C64>,
}

impl DensityMatrix {
    pub fn new(entries: Array2<C64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: entries.nrows(),
                found: entries.ncols(),
            });
        }
        let h = linalg::hermiticity_defect(&entries.view());
        if h > HERMITIAN_TOL {
            return Err(Error::InvalidState(format!("Hermiticity defect {h:e}")));
        }
        let tr = linalg::trace(&entries.view());
        if (tr - ONE).norm() > TRACE_TOL {
            return Err(Error::InvalidState(format!("trace {tr}")));
        }
        Ok(DensityMatrix { entries })
    }

    /// Hermitian-symmetrizes and rescales to unit trace before validating.
    pub fn normalized(entries: Array2<C64>) -> Result<Self> {
        let h = linalg::hermitian_part(&entries.view());
        let tr = linalg::trace(&h.view()).re;
        if !(tr.abs() > 0.0 && tr.is_finite()) {
            return Err(Error::InvalidState(format!("cannot normalize trace {tr}")));
        }
        DensityMatrix::new(h / C64::from(tr))
    }

    /// Symmetrized copy of integrator output; the trace is checked by the caller.
    pub(crate) fn from_integrator(entries: &ArrayView2<C64>) -> Self {
        DensityMatrix {
            entries: linalg::hermitian_part(entries),
        }
    }

    pub fn pure(psi: &Array1<C64>) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let d = psi.len();
        let rho = Array2::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj() / norm2);
        DensityMatrix::new(rho)
    }

    pub fn diagonal(populations: &[f64]) -> Result<Self> {
        let diag: Array1<C64> = populations.iter().map(|&p| C64::from(p)).collect();
        DensityMatrix::new(Array2::from_diag(&diag))
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn view(&self) -> ArrayView2<'_, C64> {
        self.entries.view()
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn trace(&self) -> f64 {
        linalg::trace(&self.view()).re
    }

    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.entries.diag().iter().map(|z| z.re).collect()
    }

    pub fn eigenvalues(&self) -> Result<Array1<f64>> {
        linalg::eigvalsh(&self.view())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }
}

/// Annihilation, creation and number operators in the Fock basis.
pub fn build_ladder(spec: &SystemSpec) -> (OperatorMatrix, OperatorMatrix, OperatorMatrix) {
    let d = spec.dim;
    let mut a = Array2::zeros((d, d));
    for n in 0..d - 1 {
        a[(n, n + 1)] = C64::from(((n + 1) as f64).sqrt());
    }
    let adag = linalg::dagger(&a.view());
    // a†a is diagonal with exact integer entries.
    let number = Array2::from_diag(&Array1::from_shape_fn(d, |n| C64::from(n as f64)));
    (
        OperatorMatrix::from_square(a, OperatorLabel::Generic),
        OperatorMatrix::from_square(adag, OperatorLabel::Generic),
        OperatorMatrix::from_square(number, OperatorLabel::Number),
    )
}

/// Position and momentum in the Fock basis.
pub fn build_position_momentum(spec: &SystemSpec) -> (OperatorMatrix, OperatorMatrix) {
    let (a, adag, _) = build_ladder(spec);
    let sx = (1.0 / (2.0 * spec.mass * spec.omega)).sqrt();
    let sp = (spec.mass * spec.omega / 2.0).sqrt();
    let x = (a.entries() + adag.entries()) * C64::from(sx);
    let p = (adag.entries() - a.entries()) * (I * sp);
    (
        OperatorMatrix::from_square(x, OperatorLabel::Position),
        OperatorMatrix::from_square(p, OperatorLabel::Momentum),
    )
}

/// `ω(n̂ + ½) + G_R x̂²` in the Fock basis, with `G_R = γ E_c / 2` when the
/// counterterm is enabled.
pub fn system_hamiltonian(spec: &SystemSpec, bath: &BathSpec) -> OperatorMatrix {
    let (_, _, n) = build_ladder(spec);
    let mut h = n.into_entries() * C64::from(spec.omega);
    for k in 0..spec.dim {
        h[(k, k)] += C64::from(0.5 * spec.omega);
    }
    if spec.counterterm && bath.gamma > 0.0 {
        let (x, _) = build_position_momentum(spec);
        let x2 = x.entries().dot(x.entries());
        h = h + x2 * C64::from(bath.reorganization_energy());
    }
    OperatorMatrix::from_square(h, OperatorLabel::Hamiltonian)
}

/// Canonical state `e^{−βH}/Z`, in the basis in which `h` is given.
pub fn gibbs_state(h: &OperatorMatrix, beta: f64) -> Result<DensityMatrix> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "beta must be non-negative, got {beta}"
        )));
    }
    if !h.is_hermitian(1e-10) {
        return Err(Error::InvalidParameter(
            "Hamiltonian is not Hermitian".into(),
        ));
    }
    let (w, v) = linalg::eigh(&h.view())?;
    let e0 = w[0];
    let weights: Vec<f64> = w.iter().map(|&e| (-beta * (e - e0)).exp()).collect();
    let z: f64 = weights.iter().sum();
    let d = h.dim();
    let mut rho = Array2::<C64>::zeros((d, d));
    for (k, &wk) in weights.iter().enumerate() {
        if wk == 0.0 {
            continue;
        }
        let col = v.column(k);
        for i in 0..d {
            let a = col[i] * (wk / z);
            for j in 0..d {
                rho[(i, j)] += a * col[j].conj();
            }
        }
    }
    DensityMatrix::normalized(rho)
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            found: b,
        });
    }
    Ok(())
}

/// `½ Σ|λᵢ(a − b)|`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let diff = a.entries() - b.entries();
    let w = linalg::eigvalsh(&diff.view())?;
    Ok(0.5 * w.iter().map(|x| x.abs()).sum::<f64>())
}

/// Frobenius distance of the off-diagonal parts.
pub fn offdiag_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let mut s = 0.0;
    for ((i, j), x) in a.entries().indexed_iter() {
        if i != j {
            s += (x - b.entries()[(i, j)]).norm_sqr();
        }
    }
    Ok(s.sqrt())
}

/// Equal superposition `(|0⟩ + |1⟩)/√2` of the two lowest basis states.
/// In the Fock basis this is the benchmark initial state; use
/// [`EnergyBasis::initial_state`] for its energy-basis representation.
pub fn initial_state(spec: &SystemSpec) -> DensityMatrix {
    let mut rho = Array2::zeros((spec.dim, spec.dim));
    for i in 0..2 {
        for j in 0..2 {
            rho[(i, j)] = C64::from(0.5);
        }
    }
    DensityMatrix { entries: rho }
}

/// `Tr(op ρ)`.
pub fn expectation(op: &OperatorMatrix, rho: &DensityMatrix) -> Result<C64> {
    check_dims(op.dim(), rho.dim())?;
    let (o, r) = (op.entries(), rho.entries());
    let d = op.dim();
    let mut s = ZERO;
    for i in 0..d {
        for k in 0..d {
            s += o[(i, k)] * r[(k, i)];
        }
    }
    Ok(s)
}

/// Eigenbasis of the system Hamiltonian with the coupling and observable
/// operators expressed in it. All generators act on matrices in this basis.
#[derive(Debug, Clone)]
pub struct EnergyBasis {
    spec: SystemSpec,
    energies: Array1<f64>,
    unitary: Array2<C64>,
    hamiltonian: OperatorMatrix,
    position: OperatorMatrix,
    momentum: OperatorMatrix,
    number: OperatorMatrix,
}

impl EnergyBasis {
    pub fn new(spec: &SystemSpec, bath: &BathSpec) -> Result<Self> {
        spec.validate()?;
        let h = system_hamiltonian(spec, bath);
        let (energies, u) = linalg::eigh(&h.view())?;
        let (x, p) = build_position_momentum(spec);
        let (_, _, n) = build_ladder(spec);
        let uv = u.view();
        let x_e = linalg::hermitian_part(&linalg::transform(&uv, &x.view()).view());
        let p_e = linalg::hermitian_part(&linalg::transform(&uv, &p.view()).view());
        let n_e = linalg::hermitian_part(&linalg::transform(&uv, &n.view()).view());
        let h_e = Array2::from_diag(&energies.mapv(C64::from));
        Ok(EnergyBasis {
            spec: *spec,
            energies,
            unitary: u,
            hamiltonian: OperatorMatrix::from_square(h_e, OperatorLabel::Hamiltonian),
            position: OperatorMatrix::from_square(x_e, OperatorLabel::Position),
            momentum: OperatorMatrix::from_square(p_e, OperatorLabel::Momentum),
            number: OperatorMatrix::from_square(n_e, OperatorLabel::Number),
        })
    }

    pub fn spec(&self) -> &SystemSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn energies(&self) -> &Array1<f64> {
        &self.energies
    }

    /// Bohr frequency `ε_l − ε_k`.
    pub fn delta(&self, l: usize, k: usize) -> f64 {
        self.energies[l] - self.energies[k]
    }

    /// Columns are the energy eigenvectors in the Fock basis.
    pub fn unitary(&self) -> &Array2<C64> {
        &self.unitary
    }

    pub fn hamiltonian(&self) -> &OperatorMatrix {
        &self.hamiltonian
    }

    pub fn position(&self) -> &OperatorMatrix {
        &self.position
    }

    pub fn momentum(&self) -> &OperatorMatrix {
        &self.momentum
    }

    pub fn number(&self) -> &OperatorMatrix {
        &self.number
    }

    /// Re-express a Fock-basis operator in the energy basis.
    pub fn to_energy(&self, op: &OperatorMatrix) -> OperatorMatrix {
        OperatorMatrix::from_square(
            linalg::transform(&self.unitary.view(), &op.view()),
            op.label(),
        )
    }

    /// Re-express an energy-basis matrix in the Fock basis.
    pub fn to_fock(&self, a: &ArrayView2<C64>) -> Array2<C64> {
        self.unitary
            .dot(a)
            .dot(&linalg::dagger(&self.unitary.view()))
    }

    /// The Fock superposition `(|0⟩ + a†|0⟩)/√2` in the energy basis.
    pub fn initial_state(&self) -> DensityMatrix {
        let fock = initial_state(&self.spec);
        let rho =
            linalg::hermitian_part(&linalg::transform(&self.unitary.view(), &fock.view()).view());
        DensityMatrix { entries: rho }
    }

    /// Canonical state of the system Hamiltonian, in the energy basis.
    pub fn gibbs(&self, beta: f64) -> Result<DensityMatrix> {
        gibbs_state(&self.hamiltonian, beta)
    }
}
