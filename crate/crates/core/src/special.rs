//! Special functions needed by the bath kernels.

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
pub const ZETA2: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;
pub const ZETA3: f64 = 1.202_056_903_159_594_3;
pub const ZETA5: f64 = 1.036_927_755_143_369_9;

/// Dilogarithm on `[0, 1]`, given both `q` and `1 − q` so that arguments
/// near one keep full precision.
pub fn li2_unit(q: f64, one_minus_q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if one_minus_q <= 0.0 {
        return ZETA2;
    }
    if q <= 0.5 {
        li2_series(q)
    } else {
        ZETA2 - q.ln() * one_minus_q.ln() - li2_series(one_minus_q)
    }
}

fn li2_series(q: f64) -> f64 {
    let mut term = q;
    let mut sum: f64 = 0.0;
    let mut k = 1.0;
    while term > 1e-18 * sum.max(1e-300) {
        sum += term / (k * k);
        k += 1.0;
        term *= q;
    }
    sum
}

/// Trilogarithm `Li₃(e^{−a})` for `a ≥ 0`.
pub fn li3_exp(a: f64) -> f64 {
    if a >= 1.0 {
        let q = (-a).exp();
        let mut sum = 0.0;
        let mut qk = q;
        let mut k = 1.0_f64;
        while qk > 1e-18 * sum {
            sum += qk / (k * k * k);
            k += 1.0;
            qk *= q;
        }
        return sum;
    }
    if a == 0.0 {
        return ZETA3;
    }
    // Expansion about q = 1: ζ(3) − ζ(2)a + (a²/2)(3/2 − ln a) + Σ_{k≥3} ζ(3−k)(−a)^k/k!,
    // with ζ(−n) = −B_{n+1}/(n+1).
    const ZETA_NEG: [(i32, f64); 8] = [
        (3, -0.5),
        (4, -1.0 / 12.0),
        (6, 1.0 / 120.0),
        (8, -1.0 / 252.0),
        (10, 1.0 / 240.0),
        (12, -1.0 / 132.0),
        (14, 691.0 / 32760.0),
        (16, -1.0 / 12.0),
    ];
    let mut sum = ZETA3 - ZETA2 * a + 0.5 * a * a * (1.5 - a.ln());
    for (k, z) in ZETA_NEG {
        let fact: f64 = (1..=k).map(f64::from).product();
        sum += z * (-a).powi(k) / fact;
    }
    sum
}

/// Generalized exponential integral `E_n(x) = ∫_1^∞ e^{−xt} t^{−n} dt`
/// for integer `n ≥ 1` and `x ≥ 0` (`x > 0` when `n = 1`).
pub fn expint_n(n: u32, x: f64) -> f64 {
    debug_assert!(n >= 1 && x >= 0.0);
    let nm1 = n as i64 - 1;
    if x == 0.0 {
        return 1.0 / nm1 as f64;
    }
    if x > 1.0 {
        let tiny = 1e-300;
        let mut b = x + n as f64;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let a = -(i as f64) * (nm1 as f64 + i as f64);
            b += 2.0;
            d = 1.0 / (a * d + b);
            c = b + a / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h * (-x).exp()
    } else {
        let mut ans = if nm1 != 0 {
            1.0 / nm1 as f64
        } else {
            -x.ln() - EULER_GAMMA
        };
        let mut fact = 1.0;
        for i in 1..200_i64 {
            fact *= -x / i as f64;
            let del = if i != nm1 {
                -fact / (i - nm1) as f64
            } else {
                let psi = -EULER_GAMMA + (1..=nm1).map(|k| 1.0 / k as f64).sum::<f64>();
                fact * (-x.ln() + psi)
            };
            ans += del;
            if del.abs() < ans.abs() * 1e-17 {
                break;
            }
        }
        ans
    }
}

/// `e^{x} E₁(x)` for `x > 0`.
pub fn e1_scaled(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..60 {
            term *= -x / k as f64;
            let t = term / k as f64;
            sum += t;
            if t.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        (-EULER_GAMMA - x.ln() - sum) * x.exp()
    } else {
        // Modified Lentz evaluation of the continued fraction.
        let tiny = 1e-300;
        let mut b = x + 1.0;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -((i * i) as f64);
            b += 2.0;
            d = 1.0 / (an * d + b);
            c = b + an / c;
            let del = c * d;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
        }
        h
    }
}

/// `e^{−x} Ei(x)` for `x > 0`.
pub fn ei_scaled(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 40.0 {
        let mut sum = 0.0;
        let mut fact = 1.0;
        for k in 1..200 {
            fact *= x / k as f64;
            let t = fact / k as f64;
            sum += t;
            if t < 1e-17 * sum {
                break;
            }
        }
        (EULER_GAMMA + x.ln() + sum) * (-x).exp()
    } else {
        let mut sum = 1.0;
        let mut term = 1.0;
        for k in 1..40 {
            let next = term * k as f64 / x;
            if next > term {
                break;
            }
            term = next;
            sum += term;
            if term < 1e-17 {
                break;
            }
        }
        sum / x
    }
}

/// `∫₀^∞ u cos(s u)/(1 + u²) du` for `s > 0`.
pub fn cosine_lorentz_transform(s: f64) -> f64 {
    if s > 40.0 {
        // Asymptotic form of ½[e^{s}E₁(s) − e^{−s}Ei(s)] = −Σ_{k odd} k!/s^{k+1}.
        let mut sum = 0.0;
        let mut term = 1.0 / (s * s);
        let mut k = 1.0_f64;
        for _ in 0..20 {
            sum += term;
            let next = term * (k + 1.0) * (k + 2.0) / (s * s);
            if next > term || next < 1e-17 * sum {
                break;
            }
            term = next;
            k += 2.0;
        }
        -sum
    } else {
        0.5 * (e1_scaled(s) - ei_scaled(s))
    }
}
