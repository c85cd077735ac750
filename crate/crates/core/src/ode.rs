//! Explicit Dormand–Prince 8(5,3) integrator for linear and nonlinear
//! systems on flat real or complex state vectors. Output times are hit
//! exactly by clipping the step, without dense interpolation.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub trait Element:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn zero() -> Self;
    fn modulus(self) -> f64;
}

impl Element for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Element for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub h_max: f64,
    pub h_init: Option<f64>,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rtol: 1e-9,
            atol: 1e-11,
            max_steps: 2_000_000,
            h_max: f64::INFINITY,
            h_init: None,
        }
    }
}

impl OdeOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        OdeOptions {
            rtol,
            atol,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

const C: [f64; 12] = [
    0.0,
    0.526001519587677318785587544488E-01,
    0.789002279381515978178381316732E-01,
    0.118350341907227396726757197510E+00,
    0.281649658092772603273242802490E+00,
    0.333333333333333333333333333333E+00,
    0.25E+00,
    0.307692307692307692307692307692E+00,
    0.651282051282051282051282051282E+00,
    0.6E+00,
    0.857142857142857142857142857142E+00,
    1.0,
];

// Sparse rows of the Butcher matrix: (stage index, coefficient).
const A: [&[(usize, f64)]; 12] = [
    &[],
    &[(0, 5.26001519587677318785587544488E-2)],
    &[
        (0, 1.97250569845378994544595329183E-2),
        (1, 5.91751709536136983633785987549E-2),
    ],
    &[
        (0, 2.95875854768068491816892993775E-2),
        (2, 8.87627564304205475450678981324E-2),
    ],
    &[
        (0, 2.41365134159266685502369798665E-1),
        (2, -8.84549479328286085344864962717E-1),
        (3, 9.24834003261792003115737966543E-1),
    ],
    &[
        (0, 3.7037037037037037037037037037E-2),
        (3, 1.70828608729473871279604482173E-1),
        (4, 1.25467687566822425016691814123E-1),
    ],
    &[
        (0, 3.7109375E-2),
        (3, 1.70252211019544039314978060272E-1),
        (4, 6.02165389804559606850219397283E-2),
        (5, -1.7578125E-2),
    ],
    &[
        (0, 3.70920001185047927108779319836E-2),
        (3, 1.70383925712239993810214054705E-1),
        (4, 1.07262030446373284651809199168E-1),
        (5, -1.53194377486244017527936158236E-2),
        (6, 8.27378916381402288758473766002E-3),
    ],
    &[
        (0, 6.24110958716075717114429577812E-1),
        (3, -3.36089262944694129406857109825E0),
        (4, -8.68219346841726006818189891453E-1),
        (5, 2.75920996994467083049415600797E1),
        (6, 2.01540675504778934086186788979E1),
        (7, -4.34898841810699588477366255144E1),
    ],
    &[
        (0, 4.77662536438264365890433908527E-1),
        (3, -2.48811461997166764192642586468E0),
        (4, -5.90290826836842996371446475743E-1),
        (5, 2.12300514481811942347288949897E1),
        (6, 1.52792336328824235832596922938E1),
        (7, -3.32882109689848629194453265587E1),
        (8, -2.03312017085086261358222928593E-2),
    ],
    &[
        (0, -9.3714243008598732571704021658E-1),
        (3, 5.18637242884406370830023853209E0),
        (4, 1.09143734899672957818500254654E0),
        (5, -8.14978701074692612513997267357E0),
        (6, -1.85200656599969598641566180701E1),
        (7, 2.27394870993505042818970056734E1),
        (8, 2.49360555267965238987089396762E0),
        (9, -3.0467644718982195003823669022E0),
    ],
    &[
        (0, 2.27331014751653820792359768449E0),
        (3, -1.05344954667372501984066689879E1),
        (4, -2.00087205822486249909675718444E0),
        (5, -1.79589318631187989172765950534E1),
        (6, 2.79488845294199600508499808837E1),
        (7, -2.85899827713502369474065508674E0),
        (8, -8.87285693353062954433549289258E0),
        (9, 1.23605671757943030647266201528E1),
        (10, 6.43392746015763530355970484046E-1),
    ],
];

const B: [(usize, f64); 8] = [
    (0, 5.42937341165687622380535766363E-2),
    (5, 4.45031289275240888144113950566E0),
    (6, 1.89151789931450038304281599044E0),
    (7, -5.8012039600105847814672114227E0),
    (8, 3.1116436695781989440891606237E-1),
    (9, -1.52160949662516078556178806805E-1),
    (10, 2.01365400804030348374776537501E-1),
    (11, 4.47106157277725905176885569043E-2),
];

const BHH: [(usize, f64); 3] = [
    (0, 0.244094488188976377952755905512E+00),
    (8, 0.733846688281611857341361741547E+00),
    (11, 0.220588235294117647058823529412E-01),
];

const ER: [(usize, f64); 8] = [
    (0, 0.1312004499419488073250102996E-01),
    (5, -0.1225156446376204440720569753E+01),
    (6, -0.4957589496572501915214079952E+00),
    (7, 0.1664377182454986536961530415E+01),
    (8, -0.3503288487499736816886487290E+00),
    (9, 0.3341791187130174790297318841E+00),
    (10, 0.8192320648511571246570742613E-01),
    (11, -0.2235530786388629525884427845E-01),
];

const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.333;
const FAC_MAX: f64 = 6.0;

fn combine<T: Element>(y: &[T], k: &[Vec<T>], row: &[(usize, f64)], h: f64, out: &mut [T]) {
    out.copy_from_slice(y);
    for &(j, a) in row {
        let c = a * h;
        for (o, &kj) in out.iter_mut().zip(&k[j]) {
            *o = *o + kj * c;
        }
    }
}

fn initial_step<T: Element, F>(
    rhs: &mut F,
    t: f64,
    y: &[T],
    f0: &[T],
    opts: &OdeOptions,
) -> Result<f64>
where
    F: FnMut(f64, &[T], &mut [T]) -> Result<()>,
{
    let sk: Vec<f64> = y
        .iter()
        .map(|v| opts.atol + opts.rtol * v.modulus())
        .collect();
    let n = y.len().max(1) as f64;
    let dnf = f0
        .iter()
        .zip(&sk)
        .map(|(v, s)| (v.modulus() / s).powi(2))
        .sum::<f64>()
        / n;
    let dny = y
        .iter()
        .zip(&sk)
        .map(|(v, s)| (v.modulus() / s).powi(2))
        .sum::<f64>()
        / n;
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        0.01 * (dny / dnf).sqrt()
    };
    h = h.min(opts.h_max);
    let trial: Vec<T> = y.iter().zip(f0).map(|(&a, &b)| a + b * h).collect();
    let mut f1 = vec![T::zero(); y.len()];
    rhs(t + h, &trial, &mut f1)?;
    let der2 = (f1
        .iter()
        .zip(f0)
        .zip(&sk)
        .map(|((a, b), s)| ((*a - *b).modulus() / s).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(1.0 / 8.0)
    };
    Ok((100.0 * h).min(h1).min(opts.h_max))
}

/// Integrates `y' = rhs(t, y)` from `t0`, calling `sink(i, t_i, y(t_i))` at
/// each of the increasing `outputs` (all `≥ t0`).
pub fn integrate_with<T, F, S>(
    mut rhs: F,
    t0: f64,
    y0: &[T],
    outputs: &[f64],
    opts: &OdeOptions,
    mut sink: S,
) -> Result<OdeStats>
where
    T: Element,
    F: FnMut(f64, &[T], &mut [T]) -> Result<()>,
    S: FnMut(usize, f64, &[T]) -> Result<()>,
{
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.first().is_some_and(|&t| t < t0) {
        return Err(Error::InvalidParameter(
            "output times must be non-decreasing and not before the start".into(),
        ));
    }
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k: Vec<Vec<T>> = (0..12).map(|_| vec![T::zero(); n]).collect();
    let mut stage = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    rhs(t, &y, &mut k[0])?;
    stats.evaluations += 1;
    let mut h = match opts.h_init {
        Some(h) => h,
        None => {
            stats.evaluations += 1;
            initial_step(&mut rhs, t, &y, &k[0], opts)?
        }
    };
    let mut rejected_last = false;
    for (i, &t_out) in outputs.iter().enumerate() {
        while t < t_out {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::TooManySteps(opts.max_steps));
            }
            let remaining = t_out - t;
            let clipped = h >= remaining;
            let h_try = if clipped { remaining } else { h };
            if h_try.abs() <= 16.0 * f64::EPSILON * t.abs().max(1.0) && !clipped {
                return Err(Error::StepSizeUnderflow { t });
            }
            for s in 1..12 {
                combine(&y, &k, A[s], h_try, &mut stage);
                rhs(t + C[s] * h_try, &stage, &mut k[s])?;
            }
            stats.evaluations += 11;
            combine(&y, &k, &B, h_try, &mut y_new);
            let mut err = 0.0;
            let mut err2 = 0.0;
            for idx in 0..n {
                let sk = opts.atol + opts.rtol * y[idx].modulus().max(y_new[idx].modulus());
                let mut incr = T::zero();
                for &(j, b) in &B {
                    incr = incr + k[j][idx] * b;
                }
                let mut e2 = incr;
                for &(j, b) in &BHH {
                    e2 = e2 - k[j][idx] * b;
                }
                let mut e = T::zero();
                for &(j, c) in &ER {
                    e = e + k[j][idx] * c;
                }
                err2 += (e2.modulus() / sk).powi(2);
                err += (e.modulus() / sk).powi(2);
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h_try.abs() * err * (1.0 / (deno * n.max(1) as f64)).sqrt();
            if !err.is_finite() {
                stats.rejected += 1;
                h = h_try * FAC_MIN;
                rejected_last = true;
                continue;
            }
            let fac11 = err.powf(1.0 / 8.0);
            let fac = (1.0 / FAC_MAX).max((1.0 / FAC_MIN).min(fac11 / SAFE));
            let mut h_new = h_try / fac;
            if err <= 1.0 {
                stats.accepted += 1;
                t = if clipped { t_out } else { t + h_try };
                std::mem::swap(&mut y, &mut y_new);
                rhs(t, &y, &mut k[0])?;
                stats.evaluations += 1;
                if rejected_last {
                    h_new = h_new.min(h_try);
                    rejected_last = false;
                }
                h = if clipped { h_new.max(h) } else { h_new };
            } else {
                h = h_try / (1.0 / FAC_MIN).min(fac11 / SAFE);
                rejected_last = true;
                stats.rejected += 1;
            }
            h = h.min(opts.h_max);
        }
        sink(i, t, &y)?;
    }
    Ok(stats)
}

/// Convenience form collecting the state at every output time.
pub fn integrate<T, F>(
    rhs: F,
    t0: f64,
    y0: &[T],
    outputs: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<Vec<T>>, OdeStats)>
where
    T: Element,
    F: FnMut(f64, &[T], &mut [T]) -> Result<()>,
{
    let mut states = Vec::with_capacity(outputs.len());
    let stats = integrate_with(rhs, t0, y0, outputs, opts, |_, _, y| {
        states.push(y.to_vec());
        Ok(())
    })?;
    Ok((states, stats))
}
