//! Globally adaptive Gauss–Kronrod (10/21-point) quadrature for real or
//! complex integrands, with a tangent map for semi-infinite ranges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl QuadOptions {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        QuadOptions {
            rel_tol,
            abs_tol,
            max_intervals: 4000,
        }
    }
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions::new(1e-9, 1e-15)
    }
}

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_980_223,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

fn kronrod21<T: QuadValue, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = T::zero();
    let mut abs_sum = fc.magnitude() * WGK[10];
    let mut fv = [(T::zero(), T::zero()); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[j] = (f1, f2);
        kronrod = kronrod + (f1 + f2) * WGK[j];
        abs_sum += (f1.magnitude() + f2.magnitude()) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut asc = (fc - mean).magnitude() * WGK[10];
    for j in 0..10 {
        asc += ((fv[j].0 - mean).magnitude() + (fv[j].1 - mean).magnitude()) * WGK[j];
    }
    let result = kronrod * half;
    let asc = asc * half.abs();
    let mut err = ((kronrod - gauss) * half).magnitude();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    let abs_int = abs_sum * half.abs();
    if abs_int > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * abs_int);
    }
    (result, err)
}

struct Piece<T> {
    lo: f64,
    hi: f64,
    value: T,
    err: f64,
}

impl<T> PartialEq for Piece<T> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<T> Eq for Piece<T> {}
impl<T> PartialOrd for Piece<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Piece<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Global adaptive integration over the listed consecutive break points.
fn adapt<T: QuadValue, F: Fn(f64) -> T>(
    f: &F,
    points: &[f64],
    opts: &QuadOptions,
) -> Result<(T, f64)> {
    let mut heap = BinaryHeap::new();
    let mut total = T::zero();
    let mut total_err = 0.0;
    for w in points.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let (v, e) = kronrod21(f, w[0], w[1]);
        total = total + v;
        total_err += e;
        heap.push(Piece {
            lo: w[0],
            hi: w[1],
            value: v,
            err: e,
        });
    }
    let mut frozen: Vec<Piece<T>> = Vec::new();
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if total_err <= target {
            return Ok((total, total_err));
        }
        if heap.len() >= opts.max_intervals {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.lo + worst.hi);
        if (worst.hi - worst.lo).abs() <= 1e-14 * mid.abs().max(1e-300) {
            // Cannot refine further; keep its contribution as-is.
            frozen.push(worst);
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (v1, e1) = kronrod21(f, worst.lo, mid);
        let (v2, e2) = kronrod21(f, mid, worst.hi);
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.err + e1 + e2;
        heap.push(Piece {
            lo: worst.lo,
            hi: mid,
            value: v1,
            err: e1,
        });
        heap.push(Piece {
            lo: mid,
            hi: worst.hi,
            value: v2,
            err: e2,
        });
    }
    // Re-sum to limit accumulated cancellation before judging convergence.
    let mut sum = T::zero();
    let mut err = 0.0;
    for p in heap.iter().chain(frozen.iter()) {
        sum = sum + p.value;
        err += p.err;
    }
    let target = opts.abs_tol.max(opts.rel_tol * sum.magnitude());
    if err <= target {
        Ok((sum, err))
    } else {
        Err(Error::Quadrature {
            value: sum.magnitude(),
            error: err,
        })
    }
}

/// `∫_a^b f`.
pub fn integrate<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<(T, f64)> {
    adapt(&f, &[a, b], opts)
}

/// `∫_a^b f` with initial subdivision at the interior `breaks` inside `(a, b)`.
pub fn integrate_with_breaks<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<(T, f64)> {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > a && x < b).collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    pts.push(b);
    adapt(&f, &pts, opts)
}

/// `∫_a^∞ f`. The interval up to the largest break point is integrated
/// directly; the remainder `[c, ∞)` is mapped by `ω = c + s·tan θ` with `s`
/// the largest scale, which turns algebraic tails into smooth integrands.
pub fn integrate_to_infinity<T: QuadValue, F: Fn(f64) -> T>(
    f: F,
    a: f64,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<(T, f64)> {
    let mut pts = vec![a];
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a && x.is_finite())
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup();
    pts.extend(inner);
    let c = *pts.last().unwrap_or(&a);
    let scale = (c - a).max(1.0);
    let quarter = std::f64::consts::FRAC_PI_2;
    // Build one global problem on a parameter axis: u ∈ [a, c] is physical,
    // u ∈ (c, c + π/2) is the tangent-mapped tail.
    let mapped = |u: f64| -> T {
        if u <= c {
            f(u)
        } else {
            let th = u - c;
            let (s, co) = th.sin_cos();
            if co <= 0.0 {
                return T::zero();
            }
            let w = c + scale * s / co;
            f(w) * (scale / (co * co))
        }
    };
    let mut all = pts.clone();
    let tail_pts = [0.25, 0.5, 0.75].map(|r| c + r * quarter);
    all.extend_from_slice(&tail_pts);
    all.push(c + quarter);
    adapt(&mapped, &all, opts)
}
