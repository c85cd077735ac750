use ndarray::Array2;
use num_complex::Complex64 as C64;
use oqs_core::bath::{bath_correlation, BathSpec};
use oqs_core::dynamics::{evolve, steady_state, EvolveControls};
use oqs_core::hpz::{
    equilibrium_state, exact_moments, fundamental_solutions, hpz_coefficients, hpz_liouvillian,
    hpz_static_coefficients, hpz_static_liouvillian, Drift, Moments, TimeGrid,
};
use oqs_core::linalg;
use oqs_core::oscillator::{
    expectation, trace_distance, EnergyBasis, OperatorLabel, OperatorMatrix, SystemSpec,
};
use oqs_core::quad::{self, QuadOptions};
use oqs_core::Error;
use std::f64::consts::PI;

fn spec(dim: usize) -> SystemSpec {
    SystemSpec::with_dim(dim).unwrap()
}

#[test]
fn fundamental_solutions_match_matrix_exponential() {
    let bath = BathSpec::new(0.3, 1.0, 5.0).unwrap();
    let s = spec(10);
    let grid = TimeGrid::for_model(6.0, &s, &bath).unwrap();
    let fund = fundamental_solutions(&bath, &s, &grid).unwrap();
    let drift = Drift::new(&s, &bath).unwrap();
    for i in (0..grid.len()).step_by(397) {
        let phi = drift.propagator(grid.time(i)).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!(
                    (phi[r][c] - fund.m[i][r][c]).abs() < 1e-10,
                    "t={} ({r},{c})",
                    grid.time(i)
                );
            }
        }
    }
    assert!(matches!(
        fundamental_solutions(&bath, &s, &TimeGrid::new(1.0, 0.01).unwrap()),
        Err(Error::GridTooCoarse { .. })
    ));
}

#[test]
fn free_oscillator_rotates() {
    let bath = BathSpec::new(0.0, 1.0, 5.0).unwrap();
    let s = spec(10);
    let grid = TimeGrid::for_model(2.0 * PI, &s, &bath).unwrap();
    let fund = fundamental_solutions(&bath, &s, &grid).unwrap();
    for (i, m) in fund.m.iter().enumerate() {
        let t = grid.time(i);
        assert!((m[0][0] - t.cos()).abs() < 1e-10 && (m[0][1] - t.sin()).abs() < 1e-10);
        assert!((m[1][0] + t.sin()).abs() < 1e-10 && (m[1][1] - t.cos()).abs() < 1e-10);
    }
    let c = hpz_coefficients(&bath, &s, &TimeGrid::for_model(3.0, &s, &bath).unwrap()).unwrap();
    for i in 0..c.grid.len() {
        assert!((c.gamma_x[i] - 1.0).abs() < 1e-8 && c.gamma_p[i].abs() < 1e-8);
        assert!(c.d_x[i] == 0.0 && c.d_p[i] == 0.0);
    }
    let initial = Moments {
        mean: [0.3, -0.2],
        covariance: [0.7, 0.9, 0.1],
    };
    let ex = exact_moments(&bath, &s, &initial, &c.grid).unwrap();
    let u0 = initial.uncertainty();
    assert!(ex
        .moments
        .iter()
        .all(|m| (m.uncertainty() - u0).abs() < 1e-9));
}

/// Noise covariance by direct quadrature of
/// `∫_{−t}^{t} ν(τ) ∫ Φ_ap(u) Φ_bp(u − τ) du dτ`.
fn noise_by_quadrature(drift: &Drift, bath: &BathSpec, t: f64, a: usize, b: usize) -> f64 {
    let opts = QuadOptions::new(1e-9, 1e-13);
    let inner = |tau: f64| {
        let (lo, hi) = (tau.max(0.0), t.min(t + tau));
        let f =
            |u: f64| drift.propagator(u).unwrap()[a][1] * drift.propagator(u - tau).unwrap()[b][1];
        quad::integrate(f, lo, hi, &opts).unwrap().0
    };
    let nu = |tau: f64| bath_correlation(tau.abs(), bath).unwrap().re;
    let brk = [1e-9, 1e-6, 1e-4, 1e-2, 0.1 * t, 0.5 * t];
    let pos = quad::integrate_with_breaks(|tau| nu(tau) * inner(tau), 0.0, t, &brk, &opts)
        .unwrap()
        .0;
    let neg = quad::integrate_with_breaks(|s| nu(s) * inner(-s), 0.0, t, &brk, &opts)
        .unwrap()
        .0;
    pos + neg
}

#[test]
fn noise_covariance_matches_double_integral() {
    let bath = BathSpec::new(0.4, 1.5, 2.0).unwrap();
    let s = spec(10);
    let drift = Drift::new(&s, &bath).unwrap();
    for t in [0.3, 1.7] {
        let (n, _) = drift.noise_covariance(t).unwrap();
        for (a, b) in [(0, 0), (1, 1), (0, 1)] {
            let q = noise_by_quadrature(&drift, &bath, t, a, b);
            assert!(
                (n[a][b] - q).abs() < 1e-7 * n[1][1].abs(),
                "t={t} ({a},{b}): {} vs {q}",
                n[a][b]
            );
        }
    }
}

#[test]
fn noise_covariance_derivative_is_consistent() {
    let bath = BathSpec::new(0.2, 2.0, 5.0).unwrap();
    let drift = Drift::new(&spec(10), &bath).unwrap();
    let h = 1e-4;
    for t in [0.05, 0.8, 4.0] {
        let (_, nd) = drift.noise_covariance(t).unwrap();
        let (np, _) = drift.noise_covariance(t + h).unwrap();
        let (nm, _) = drift.noise_covariance(t - h).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let fd = (np[a][b] - nm[a][b]) / (2.0 * h);
                assert!(
                    (fd - nd[a][b]).abs() < 1e-6 * (1.0 + nd[a][b].abs()),
                    "t={t} ({a},{b})"
                );
            }
        }
    }
    let late = drift.noise_covariance(200.0).unwrap().0;
    let stat = drift.stationary_covariance().unwrap();
    for a in 0..3 {
        for b in 0..3 {
            assert!(
                (late[a][b] - stat[a][b]).abs() < 1e-9,
                "({a},{b}): {} vs {}",
                late[a][b],
                stat[a][b]
            );
        }
    }
}

/// Stationary `⟨x²⟩, ⟨p²⟩` from the fluctuation-dissipation theorem with the
/// susceptibility `χ(Ω) = 1/(mΩ₀² − mΩ² − γE²/(E − iΩ))`.
fn fdt_moments(bath: &BathSpec, s: &SystemSpec) -> (f64, f64) {
    let m = s.mass;
    let w0 = s.omega * s.omega + 2.0 * bath.reorganization_energy() / m;
    let e = bath.cutoff;
    let im_chi = |w: f64| {
        let k = C64::new(bath.gamma * e * e, 0.0) / C64::new(e, -w);
        (C64::new(1.0, 0.0) / (C64::new(m * w0 - m * w * w, 0.0) - k)).im
    };
    let coth = |w: f64| 1.0 / (0.5 * bath.beta * w).tanh();
    let opts = QuadOptions::new(1e-11, 1e-15);
    let brk = [
        0.5 * s.omega,
        0.9 * s.omega,
        s.omega,
        1.1 * s.omega,
        2.0 * s.omega,
        10.0 * e,
    ];
    let x = quad::integrate_to_infinity(|w| coth(w) * im_chi(w), 0.0, &brk, &opts)
        .unwrap()
        .0
        / PI;
    let p = quad::integrate_to_infinity(|w| w * w * coth(w) * im_chi(w), 0.0, &brk, &opts)
        .unwrap()
        .0
        * m
        * m
        / PI;
    (x, p)
}

#[test]
fn stationary_moments_obey_fluctuation_dissipation() {
    for (g, b, e) in [
        (0.1, 1.0, 5.0),
        (0.5, 5.0, 1.0),
        (1.0, 0.2, 5.0),
        (0.05, 3.0, 2.0),
    ] {
        let bath = BathSpec::new(g, b, e).unwrap();
        let s = spec(10);
        let n = Drift::new(&s, &bath)
            .unwrap()
            .stationary_covariance()
            .unwrap();
        let (x, p) = fdt_moments(&bath, &s);
        assert!(
            (n[0][0] / x - 1.0).abs() < 1e-7,
            "γ={g} β={b} E={e}: ⟨x²⟩ {} vs {x}",
            n[0][0]
        );
        assert!(
            (n[1][1] / p - 1.0).abs() < 1e-6,
            "γ={g} β={b} E={e}: ⟨p²⟩ {} vs {p}",
            n[1][1]
        );
        assert!(n[0][1].abs() < 1e-10);
    }
}

#[test]
fn moments_relax_and_respect_uncertainty() {
    let bath = BathSpec::new(0.5, 2.0, 5.0).unwrap();
    let s = spec(10);
    let grid = TimeGrid::for_model(60.0, &s, &bath).unwrap();
    let a = exact_moments(&bath, &s, &Moments::vacuum(&s), &grid).unwrap();
    let b = exact_moments(
        &bath,
        &s,
        &Moments {
            mean: [1.0, -0.5],
            covariance: [2.0, 1.5, 0.3],
        },
        &grid,
    )
    .unwrap();
    for m in a.moments.iter().chain(&b.moments) {
        assert!(m.uncertainty() >= 0.25 - 1e-9, "{m:?}");
    }
    let (ea, eb) = (a.moments.last().unwrap(), b.moments.last().unwrap());
    for k in 0..3 {
        assert!((ea.covariance[k] - eb.covariance[k]).abs() < 1e-6);
    }
}

#[test]
fn mean_motion_decays_stroboscopically() {
    let bath = BathSpec::new(0.1, 1.0, 5.0).unwrap();
    let s = spec(10);
    let drift = Drift::new(&s, &bath).unwrap();
    let mut last = f64::INFINITY;
    for n in 1..30 {
        let phi = drift.propagator(2.0 * PI * n as f64).unwrap();
        let energy = 0.5 * (phi[0][0].powi(2) + phi[1][0].powi(2));
        assert!(energy < last);
        last = energy;
    }
    // Envelope decay rate is γ/2 up to corrections in γ and ω/E_c.
    let rate = -drift.rates()[0].re;
    assert!((rate / 0.05 - 1.0).abs() < 0.1, "{rate}");
}

#[test]
fn frequency_coefficients_are_temperature_independent() {
    let s = spec(10);
    let hot = BathSpec::new(0.3, 0.5, 5.0).unwrap();
    let cold = BathSpec::new(0.3, 5.0, 5.0).unwrap();
    let grid = TimeGrid::for_model(4.0, &s, &hot).unwrap();
    let a = hpz_coefficients(&hot, &s, &grid).unwrap();
    let b = hpz_coefficients(&cold, &s, &grid).unwrap();
    for i in 0..grid.len() {
        assert!((a.gamma_x[i] - b.gamma_x[i]).abs() <= 1e-8 * a.gamma_x[i].abs());
        assert!((a.gamma_p[i] - b.gamma_p[i]).abs() <= 1e-8 * a.gamma_p[i].abs().max(1e-300));
    }
    assert!((a.gamma_x[0] - (1.0 + 2.0 * hot.reorganization_energy())).abs() < 1e-9);
    assert!(a.gamma_p[0].abs() < 1e-9);
}

#[test]
fn coefficients_plateau_at_asymptotic_values() {
    let bath = BathSpec::new(0.1, 1.0, 5.0).unwrap();
    let s = spec(10);
    let grid = TimeGrid::for_model(12.0, &s, &bath).unwrap();
    let c = hpz_coefficients(&bath, &s, &grid).unwrap();
    let last = c.sample(grid.len() - 1);
    let asy = c.asymptotic;
    assert!((last.gamma_x - asy.gamma_x).abs() < 1e-6 * asy.gamma_x.abs());
    assert!((last.gamma_p - asy.gamma_p).abs() < 1e-6 * asy.gamma_p.abs());
    assert!((last.d_p - asy.d_p).abs() < 1e-6 * asy.d_p.abs());
    assert!((last.d_x - asy.d_x).abs() < 1e-6 * asy.d_p.abs());
    let fast = hpz_static_coefficients(&bath, &s).unwrap();
    assert_eq!(fast, asy);
}

/// Moment derivatives read off the generator agree with the moment equations.
#[test]
fn generator_reproduces_moment_equations() {
    let bath = BathSpec::new(0.3, 1.0, 5.0).unwrap();
    let s = spec(40);
    let c = hpz_static_coefficients(&bath, &s).unwrap();
    let gen = hpz_static_liouvillian(&bath, &s, &c).unwrap();
    let basis = EnergyBasis::new(&s, &bath).unwrap();
    let (x, p) = (basis.position().entries(), basis.momentum().entries());
    // A low-lying mixed state with coherences.
    let d = s.dim;
    let mut rho = Array2::<C64>::zeros((d, d));
    let pops = [0.5, 0.3, 0.2];
    for (k, &w) in pops.iter().enumerate() {
        rho[(k, k)] = C64::from(w);
    }
    rho[(0, 1)] = C64::new(0.1, 0.05);
    rho[(1, 0)] = rho[(0, 1)].conj();
    rho[(1, 2)] = C64::new(-0.04, 0.08);
    rho[(2, 1)] = rho[(1, 2)].conj();
    let drho = gen.apply_matrix(0.0, &rho.view()).unwrap();
    let ev = |op: &Array2<C64>, r: &Array2<C64>| linalg::trace(&op.dot(r).view()).re;
    let xp_sym = (x.dot(p) + p.dot(x)) * C64::from(0.5);
    let (xx, pp, cc) = (x.dot(x), p.dot(p), xp_sym);
    let (mx, mp) = (ev(x, &rho), ev(p, &rho));
    let (vx, vp, vc) = (ev(&xx, &rho), ev(&pp, &rho), ev(&cc, &rho));
    let m = s.mass;
    let checks = [
        (ev(x, &drho), mp / m),
        (ev(p, &drho), -m * c.gamma_x * mx - c.gamma_p * mp),
        (ev(&xx, &drho), 2.0 * vc / m),
        (
            ev(&pp, &drho),
            -2.0 * m * c.gamma_x * vc - 2.0 * c.gamma_p * vp + 2.0 * m * m * c.d_p,
        ),
        (
            ev(&cc, &drho),
            vp / m - m * c.gamma_x * vx - c.gamma_p * vc + m * m * c.d_x,
        ),
    ];
    for (k, (got, want)) in checks.iter().enumerate() {
        assert!((got - want).abs() < 1e-10, "moment {k}: {got} vs {want}");
    }
    assert!(linalg::trace(&drho.view()).norm() < 1e-12);
}

#[test]
fn time_dependent_generator_respects_grid() {
    let bath = BathSpec::new(0.1, 1.0, 5.0).unwrap();
    let s = spec(8);
    let grid = TimeGrid::for_model(1.0, &s, &bath).unwrap();
    let c = hpz_coefficients(&bath, &s, &grid).unwrap();
    let gen = hpz_liouvillian(&c, &s).unwrap();
    let rho = EnergyBasis::new(&s, &bath).unwrap().gibbs(1.0).unwrap();
    assert!(gen.apply(0.5, &rho).is_ok());
    assert!(matches!(
        gen.apply(1.5, &rho),
        Err(Error::OutsideGrid { .. })
    ));
    let other = SystemSpec::new(8, 2.0, 1.0, true).unwrap();
    assert!(hpz_liouvillian(&c, &other).is_err());
}

#[test]
fn static_limit_coefficients() {
    let bath = BathSpec::new(0.01, 0.1, 5.0).unwrap();
    let s = spec(10);
    let c = hpz_static_coefficients(&bath, &s).unwrap();
    assert!((c.gamma_x - 1.0).abs() < 0.05, "{c:?}");
    assert!((c.gamma_p / 0.01 - 1.0).abs() < 0.1, "{c:?}");
    assert!((c.d_p * 0.1 / 0.01 - 1.0).abs() < 0.1, "{c:?}");
}

#[test]
fn equilibrium_state_is_fixed_point_of_static_generator() {
    for (gamma, beta, cutoff) in [(0.2, 5.0, 1.0), (0.5, 1.0, 1.0), (0.3, 2.0, 5.0)] {
        let bath = BathSpec::new(gamma, beta, cutoff).unwrap();
        let s = spec(30);
        let eq = equilibrium_state(&bath, &s).unwrap();
        let c = hpz_static_coefficients(&bath, &s).unwrap();
        let ss = steady_state(&hpz_static_liouvillian(&bath, &s, &c).unwrap()).unwrap();
        let d = trace_distance(&eq, &ss.state).unwrap();
        assert!(d < 1e-8, "({gamma}, {beta}, {cutoff}): {d:e}");
    }
}

#[test]
fn equilibrium_state_has_stationary_moments() {
    let bath = BathSpec::new(0.8, 0.5, 1.0).unwrap();
    let s = spec(60);
    let basis = EnergyBasis::new(&s, &bath).unwrap();
    let eq = equilibrium_state(&bath, &s).unwrap();
    let n = Drift::new(&s, &bath)
        .unwrap()
        .stationary_covariance()
        .unwrap();
    let (x, p) = (basis.position().entries(), basis.momentum().entries());
    let ev = |a: Array2<C64>| {
        expectation(
            &OperatorMatrix::new(a, OperatorLabel::Generic).unwrap(),
            &eq,
        )
        .unwrap()
    };
    let sym = (x.dot(p) + p.dot(x)) * C64::from(0.5);
    assert!((ev(x.dot(x)).re - n[0][0]).abs() < 1e-8);
    assert!((ev(p.dot(p)).re - n[1][1]).abs() < 1e-8);
    assert!(ev(sym).norm() < 1e-8);
    assert!(ev(x.clone()).norm() < 1e-12);
}

#[test]
fn equilibrium_state_approaches_gibbs_linearly() {
    let s = spec(20);
    let ratio: Vec<f64> = [1e-3, 1e-2]
        .iter()
        .map(|&g| {
            let bath = BathSpec::new(g, 1.0, 1.0).unwrap();
            let gibbs = EnergyBasis::new(&s, &bath).unwrap().gibbs(1.0).unwrap();
            trace_distance(&equilibrium_state(&bath, &s).unwrap(), &gibbs).unwrap() / g
        })
        .collect();
    assert!((ratio[0] / ratio[1] - 1.0).abs() < 0.05, "{ratio:?}");
    let bath = BathSpec::new(0.0, 1.0, 1.0).unwrap();
    let gibbs = EnergyBasis::new(&s, &bath).unwrap().gibbs(1.0).unwrap();
    assert!(trace_distance(&equilibrium_state(&bath, &s).unwrap(), &gibbs).unwrap() < 1e-14);
}

#[test]
fn time_dependent_evolution_relaxes_to_equilibrium() {
    let bath = BathSpec::new(0.5, 1.0, 5.0).unwrap();
    let s = spec(12);
    let t_end = 60.0;
    let grid = TimeGrid::for_model(t_end, &s, &bath).unwrap();
    let gen = hpz_liouvillian(&hpz_coefficients(&bath, &s, &grid).unwrap(), &s).unwrap();
    let basis = EnergyBasis::new(&s, &bath).unwrap();
    let traj = evolve(
        &gen,
        &basis.initial_state(),
        t_end,
        &EvolveControls::default(),
    )
    .unwrap();
    let c = hpz_static_coefficients(&bath, &s).unwrap();
    let ss = steady_state(&hpz_static_liouvillian(&bath, &s, &c).unwrap()).unwrap();
    let d = trace_distance(traj.last(), &ss.state).unwrap();
    assert!(d < 1e-6, "{d:e}");
}
