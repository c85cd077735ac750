use ndarray::Array2;
use num_complex::Complex64 as C64;
use oqs_core::bath::BathSpec;
use oqs_core::dynamics::{
    avg_trace_distance, beta_tol_search, evolve, evolve_on, long_time_state,
    positivity_diagnostics, scaled_steady_errors, steady_state, steady_state_with,
    truncation_check, uniform_times, BetaProbe, EvolveControls, SteadyMethod, SteadyOptions,
    TRUNCATION_TOL,
};
use oqs_core::generators::{
    nr_liouvillian, redfield_liouvillian, rwa_liouvillian, Liouvillian, Model,
};
use oqs_core::hpz::{exact_moments, hpz_coefficients, hpz_liouvillian, Moments, TimeGrid};
use oqs_core::linalg;
use oqs_core::oscillator::{initial_state, trace_distance, DensityMatrix, EnergyBasis, SystemSpec};
use oqs_core::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(dim: usize) -> SystemSpec {
    SystemSpec::with_dim(dim).unwrap()
}

fn random_state(rng: &mut impl Rng, d: usize) -> DensityMatrix {
    let g = Array2::from_shape_fn((d, d), |_| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    DensityMatrix::normalized(g.dot(&linalg::dagger(&g.view()))).unwrap()
}

fn state_from(values: &[f64], d: usize) -> DensityMatrix {
    let g = Array2::from_shape_fn((d, d), |(i, j)| {
        C64::new(values[i * d + j], values[d * d + i * d + j])
    });
    DensityMatrix::normalized(g.dot(&linalg::dagger(&g.view()))).unwrap()
}

fn all_generators(s: &SystemSpec, bath: &BathSpec) -> Vec<Liouvillian> {
    let model = Model::new(s, bath).unwrap();
    vec![
        model.redfield_ti().unwrap(),
        model.redfield_td(0.01).unwrap(),
        model.rwa().unwrap(),
        model.nr().unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]
    #[test]
    fn generators_preserve_trace_and_hermiticity(values in prop::collection::vec(-1.0f64..1.0, 2 * 8 * 8), t in 0.0f64..3.0) {
        let s = spec(8);
        let bath = BathSpec::new(0.3, 1.0, 5.0).unwrap();
        let rho = state_from(&values, 8);
        for gen in all_generators(&s, &bath) {
            let d = gen.apply(t, &rho).unwrap();
            prop_assert!(linalg::trace(&d.view()).norm() < 1e-12, "{:?}", gen.kind());
            prop_assert!(linalg::hermiticity_defect(&d.view()) < 1e-12, "{:?}", gen.kind());
        }
        let grid = TimeGrid::for_model(3.0, &s, &bath).unwrap();
        let exact = hpz_liouvillian(&hpz_coefficients(&bath, &s, &grid).unwrap(), &s).unwrap();
        let d = exact.apply(t, &rho).unwrap();
        prop_assert!(linalg::trace(&d.view()).norm() < 1e-12);
        prop_assert!(linalg::hermiticity_defect(&d.view()) < 1e-12);
    }
}

#[test]
fn unitary_evolution_of_superposition() {
    let s = spec(10);
    let bath = BathSpec::new(0.0, 1.0, 5.0).unwrap();
    let basis = EnergyBasis::new(&s, &bath).unwrap();
    let gen = rwa_liouvillian(&s, &bath).unwrap();
    let controls = EvolveControls::default().with_number(basis.number());
    let traj = evolve(&gen, &initial_state(&s), 10.0, &controls).unwrap();
    for (k, rho) in traj.states.iter().enumerate() {
        assert!((rho.entries()[(0, 1)].norm() - 0.5).abs() < 1e-9);
        assert!((traj.number.as_ref().unwrap()[k] - 0.5).abs() < 1e-9);
        let t = traj.times[k];
        assert!((rho.entries()[(0, 1)] - C64::new(0.0, t).exp() * 0.5).norm() < 1e-8);
    }
    assert!(matches!(
        steady_state(&gen),
        Err(Error::DegenerateNullspace)
    ));
}

#[test]
fn rwa_relaxes_to_bose_occupation() {
    // Bare Hamiltonian, so that the Gibbs occupation is the Bose value.
    let s = SystemSpec::new(30, 1.0, 1.0, false).unwrap();
    let bath = BathSpec::new(0.1, 1.0, 5.0).unwrap();
    let basis = EnergyBasis::new(&s, &bath).unwrap();
    let gen = rwa_liouvillian(&s, &bath).unwrap();
    let traj = evolve(
        &gen,
        &initial_state(&s),
        200.0,
        &EvolveControls::default().with_number(basis.number()),
    )
    .unwrap();
    let gibbs = basis.gibbs(1.0).unwrap();
    // Coherences decay at half the energy relaxation rate, about e^{−10} here.
    let d = trace_distance(traj.last(), &gibbs).unwrap();
    assert!(d < 1e-4, "{d}");
    let n = *traj.number.as_ref().unwrap().last().unwrap();
    let bose = 1.0 / (1.0f64.exp() - 1.0);
    assert!((n - bose).abs() < 1e-4, "{n}");
}

#[test]
fn rwa_steady_state_is_gibbs() {
    for (g, b, e) in [(0.1, 1.0, 1.0), (1.0, 5.0, 5.0), (0.1, 5.0, 5.0)] {
        let s = spec(30);
        let bath = BathSpec::new(g, b, e).unwrap();
        let ss = steady_state(&rwa_liouvillian(&s, &bath).unwrap()).unwrap();
        let gibbs = EnergyBasis::new(&s, &bath).unwrap().gibbs(b).unwrap();
        assert_eq!(ss.method, SteadyMethod::Nullspace);
        assert!(trace_distance(&ss.state, &gibbs).unwrap() < 1e-8);
        assert!(ss.residual < 1e-10, "{}", ss.residual);
    }
}

#[test]
fn nullspace_and_long_time_agree() {
    let s = spec(30);
    let bath = BathSpec::new(0.1, 1.0, 5.0).unwrap();
    let gen = nr_liouvillian(&s, &bath).unwrap();
    let a = steady_state(&gen).unwrap();
    let b = long_time_state(&gen, 500.0, 1e-8).unwrap();
    assert_eq!(b.method, SteadyMethod::LongTime);
    assert!(trace_distance(&a.state, &b.state).unwrap() < 1e-7);
    assert!(a.residual < 1e-10);
    assert!(matches!(
        steady_state(&redfield_liouvillian(&s, &bath, true).unwrap()),
        Err(Error::NoMatrixForm)
    ));
}

#[test]
fn time_dependent_redfield_saturates() {
    let s = spec(12);
    let bath = BathSpec::new(0.2, 1.0, 5.0).unwrap();
    let model = Model::new(&s, &bath).unwrap();
    let td = model.redfield_td(0.01).unwrap();
    let ti = model.redfield_ti().unwrap();
    let t = model.redfield_saturation() + 1.0;
    let a = td.frozen(t).unwrap().matrix_form().unwrap();
    let b = ti.matrix_form().unwrap();
    assert!((&a - &b).iter().all(|z| z.norm() < 1e-12));
    // Long-time steady states then coincide.
    let opts = SteadyOptions {
        horizon: Some(300.0),
        convergence: 1e-8,
    };
    let x = steady_state_with(&td, &opts).unwrap();
    let y = steady_state(&ti).unwrap();
    assert!(trace_distance(&x.state, &y.state).unwrap() < 1e-7);
}

#[test]
fn gksl_generators_are_contractive() {
    let s = spec(10);
    let bath = BathSpec::new(0.5, 1.0, 5.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let times = uniform_times(4.0, 40);
    for gen in [
        rwa_liouvillian(&s, &bath).unwrap(),
        nr_liouvillian(&s, &bath).unwrap(),
    ] {
        for _ in 0..5 {
            let a = evolve_on(
                &gen,
                &random_state(&mut rng, 10),
                &times,
                &EvolveControls::default(),
            )
            .unwrap();
            let b = evolve_on(
                &gen,
                &random_state(&mut rng, 10),
                &times,
                &EvolveControls::default(),
            )
            .unwrap();
            let mut last = f64::INFINITY;
            for k in 0..times.len() {
                let d = trace_distance(&a.states[k], &b.states[k]).unwrap();
                assert!(d <= last + 1e-8, "{:?} at t={}", gen.kind(), times[k]);
                last = d;
            }
        }
    }
}

#[test]
fn integrator_self_convergence() {
    let s = spec(20);
    let bath = BathSpec::new(0.5, 1.0, 5.0).unwrap();
    let gen = redfield_liouvillian(&s, &bath, true).unwrap();
    let coarse = evolve(
        &gen,
        &initial_state(&s),
        5.0,
        &EvolveControls::default().with_tolerances(1e-7, 1e-9),
    )
    .unwrap();
    let fine = evolve(
        &gen,
        &initial_state(&s),
        5.0,
        &EvolveControls::default().with_tolerances(5e-8, 5e-10),
    )
    .unwrap();
    let d = trace_distance(coarse.last(), fine.last()).unwrap();
    assert!(d < 1e-7, "{d}");
}

#[test]
fn exact_generator_reproduces_exact_moments() {
    let s = spec(30);
    let bath = BathSpec::new(0.3, 1.0, 5.0).unwrap();
    let basis = EnergyBasis::new(&s, &bath).unwrap();
    let grid = TimeGrid::for_model(6.0, &s, &bath).unwrap();
    let gen = hpz_liouvillian(&hpz_coefficients(&bath, &s, &grid).unwrap(), &s).unwrap();
    let rho0 = initial_state(&s);
    let traj = evolve_on(
        &gen,
        &rho0,
        &uniform_times(6.0, 12),
        &EvolveControls::default(),
    )
    .unwrap();
    let (x, p) = (basis.position().entries(), basis.momentum().entries());
    let ev = |op: &Array2<C64>, r: &DensityMatrix| linalg::trace(&op.dot(r.entries()).view()).re;
    let sym = (x.dot(p) + p.dot(x)) * C64::from(0.5);
    let m0 = Moments {
        mean: [ev(x, &rho0), ev(p, &rho0)],
        covariance: [ev(&x.dot(x), &rho0), ev(&p.dot(p), &rho0), ev(&sym, &rho0)],
    };
    let exact = exact_moments(&bath, &s, &m0, &grid).unwrap();
    for (k, &t) in traj.times.iter().enumerate() {
        let i = (t / grid.step()).round() as usize;
        let e = &exact.moments[i];
        let r = &traj.states[k];
        let got = [
            ev(x, r),
            ev(p, r),
            ev(&x.dot(x), r),
            ev(&p.dot(p), r),
            ev(&sym, r),
        ];
        let want = [
            e.mean[0],
            e.mean[1],
            e.covariance[0],
            e.covariance[1],
            e.covariance[2],
        ];
        for j in 0..5 {
            assert!(
                (got[j] - want[j]).abs() < 1e-5,
                "t={t} moment {j}: {} vs {}",
                got[j],
                want[j]
            );
        }
        assert!(traj.min_eigenvalue[k] > -1e-6);
    }
}

#[test]
fn metrics_basic_properties() {
    let s = spec(30);
    let bath = BathSpec::new(0.2, 1.0, 5.0).unwrap();
    let gen = rwa_liouvillian(&s, &bath).unwrap();
    let traj = evolve(&gen, &initial_state(&s), 10.0, &EvolveControls::default()).unwrap();
    assert_eq!(avg_trace_distance(&traj, &traj, 10.0).unwrap(), 0.0);
    let short = evolve(&gen, &initial_state(&s), 5.0, &EvolveControls::default()).unwrap();
    assert!(matches!(
        avg_trace_distance(&traj, &short, 10.0),
        Err(Error::GridMismatch)
    ));
    let rho = traj.last().clone();
    assert_eq!(scaled_steady_errors(&rho, &rho, 0.1).unwrap(), (0.0, 0.0));
    assert!(scaled_steady_errors(&rho, &rho, 0.0).is_err());
    assert!(positivity_diagnostics(&traj).first_violation.is_none());

    let ground = DensityMatrix::diagonal(&[1.0, 0.0, 0.0, 0.0]).unwrap();
    assert_eq!(
        truncation_check(&ground, TRUNCATION_TOL).tail_population,
        0.0
    );
    let mixed = DensityMatrix::diagonal(&vec![1.0 / 30.0; 30]).unwrap();
    let rep = truncation_check(&mixed, TRUNCATION_TOL);
    assert!((rep.tail_population - 0.1).abs() < 1e-14 && !rep.pass);
    let gibbs = EnergyBasis::new(&s, &BathSpec::new(0.0, 1.0, 5.0).unwrap())
        .unwrap()
        .gibbs(1.0)
        .unwrap();
    let rep = truncation_check(&gibbs, TRUNCATION_TOL);
    let expect = (-27.0f64).exp() * (1.0 - (-3.0f64).exp()) / (1.0 - (-30.0f64).exp());
    assert!(rep.pass && (rep.tail_population / expect - 1.0).abs() < 1e-10);
}

#[test]
fn beta_search_bisects_monotone_tail() {
    let probe = |b: f64| {
        Ok(BetaProbe {
            tail_population: (-b).exp(),
            distance: b,
        })
    };
    let r = beta_tol_search((0.1, 20.0), 1e-3, probe).unwrap();
    assert!((r.beta / 1e-3f64.ln().abs() - 1.0).abs() < 2e-3, "{r:?}");
    let r = beta_tol_search((0.1, 20.0), 1.0, probe).unwrap();
    assert_eq!(r.beta, 0.1);
    assert!(matches!(
        beta_tol_search((0.1, 1.0), 1e-3, probe),
        Err(Error::Bracket { .. })
    ));
}
