//! Adaptive Gauss-Kronrod quadrature and the substitutions used for
//! power-singular integrands.

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_5,
    0.149_445_554_002_916_9,
];

// 10-point Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            max_intervals: 4000,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::new(1e-13, 1e-11)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

fn kronrod21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(10).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

/// Adaptive bisection driven by the largest local error estimate.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<Estimate> {
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let (value, error) = kronrod21(&f, a, b);
    let mut segments = vec![Segment { a, b, value, error }];
    let mut total = value;
    let mut total_err = error;
    loop {
        if !total.is_finite() {
            return Err(Error::Quadrature {
                estimate: f64::INFINITY,
                intervals: segments.len(),
            });
        }
        if total_err <= tol.abs.max(tol.rel * total.abs()) {
            break;
        }
        if segments.len() >= tol.max_intervals {
            return Err(Error::Quadrature {
                estimate: total_err,
                intervals: segments.len(),
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("nonempty");
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // interval cannot be split further in floating point
            segments.push(seg);
            return Err(Error::Quadrature {
                estimate: total_err,
                intervals: segments.len(),
            });
        }
        let (v1, e1) = kronrod21(&f, seg.a, mid);
        let (v2, e2) = kronrod21(&f, mid, seg.b);
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        segments.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        segments.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
    }
    // re-sum to shed the drift of the running update
    let value = segments.iter().map(|s| s.value).sum();
    let error = segments.iter().map(|s| s.error).sum();
    Ok(Estimate { value, error })
}

/// ∫_a^b f over consecutive breakpoints, summing in order.
pub fn integrate_pieces<F: Fn(f64) -> f64>(
    f: F,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    let mut value = 0.0;
    let mut error = 0.0;
    for w in breaks.windows(2) {
        let est = integrate(&f, w[0], w[1], tol)?;
        value += est.value;
        error += est.error;
    }
    Ok(Estimate { value, error })
}

/// ∫_lo^hi u^{-α} g(u) du for 0 ≤ lo < hi and α < 1, with g smooth.
///
/// The substitution v = u^{1-α} absorbs the singularity at the origin, and the
/// range is cut at decades so each piece sees a well-scaled integrand.
pub fn integrate_power_weight<G: Fn(f64) -> f64>(
    g: G,
    alpha: f64,
    lo: f64,
    hi: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    assert!(alpha < 1.0 && lo >= 0.0 && hi >= lo);
    if hi == lo {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let p = 1.0 - alpha;
    let integrand = |v: f64| {
        let u = v.max(0.0).powf(1.0 / p);
        g(u) / p
    };
    let mut breaks = vec![lo];
    let mut edge = if lo > 0.0 {
        10f64.powf(lo.log10().floor() + 1.0)
    } else {
        (hi * 1e-12).max(f64::MIN_POSITIVE)
    };
    while edge < hi {
        if edge > lo {
            breaks.push(edge);
        }
        edge *= 10.0;
    }
    breaks.push(hi);
    let vbreaks: Vec<f64> = breaks.iter().map(|u| u.powf(p)).collect();
    integrate_pieces(integrand, &vbreaks, tol)
}

/// ∫_a^b f for integrands with integrable power singularities at either end.
///
/// Each half is mapped through s = edge ± (half-width)·w^q, which flattens
/// singularities of order greater than -1 + 1/q. The integrand is called as
/// `f(s, s - a, b - s)` with both distances computed without cancellation.
pub fn integrate_endpoint_singular<F: Fn(f64, f64, f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<Estimate> {
    const Q: f64 = 8.0;
    if a == b {
        return Ok(Estimate {
            value: 0.0,
            error: 0.0,
        });
    }
    let mid = 0.5 * (a + b);
    let half = mid - a;
    let left = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let da = half * w.powf(Q);
        if da == 0.0 {
            return 0.0;
        }
        let s = a + da;
        f(s, da, (b - s).max(da)) * Q * half * w.powf(Q - 1.0)
    };
    let right = |w: f64| {
        if w <= 0.0 {
            return 0.0;
        }
        let db = half * w.powf(Q);
        if db == 0.0 {
            return 0.0;
        }
        let s = b - db;
        f(s, (s - a).max(db), db) * Q * half * w.powf(Q - 1.0)
    };
    let l = integrate(left, 0.0, 1.0, tol)?;
    let r = integrate(right, 0.0, 1.0, tol)?;
    Ok(Estimate {
        value: l.value + r.value,
        error: l.error + r.error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let est = integrate(|x| x.powi(5) - 3.0 * x, 0.0, 2.0, Tolerance::default()).unwrap();
        assert!((est.value - (64.0 / 6.0 - 6.0)).abs() < 1e-13);
    }

    #[test]
    fn oscillatory_integrand() {
        let est = integrate(|x: f64| (10.0 * x).sin(), 0.0, 3.0, Tolerance::default()).unwrap();
        let exact = (1.0 - (30.0f64).cos()) / 10.0;
        assert!((est.value - exact).abs() < 1e-11);
    }

    #[test]
    fn power_weight_matches_closed_form() {
        // ∫_0^2 u^{-0.7} du = 2^{0.3}/0.3
        let est = integrate_power_weight(|_| 1.0, 0.7, 0.0, 2.0, Tolerance::default()).unwrap();
        let exact = 2f64.powf(0.3) / 0.3;
        assert!((est.value - exact).abs() < 1e-11 * exact);
        // ∫_1^{1e6} u^{-0.7} e^{-u} du, nonzero lower limit
        let est = integrate_power_weight(|u| (-u).exp(), 0.7, 1.0, 1e6, Tolerance::default()).unwrap();
        let exact = statrs::function::gamma::gamma_ui(0.3, 1.0);
        assert!((est.value - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn endpoint_singularities_on_both_sides() {
        // ∫_0^1 s^{-0.7}(1-s)^{-0.7} ds = B(0.3, 0.3)
        let est = integrate_endpoint_singular(
            |_, da: f64, db: f64| da.powf(-0.7) * db.powf(-0.7),
            0.0,
            1.0,
            Tolerance::new(1e-12, 1e-10),
        )
        .unwrap();
        let g = statrs::function::gamma::gamma;
        let exact = g(0.3) * g(0.3) / g(0.6);
        assert!((est.value - exact).abs() < 1e-8 * exact, "{} vs {}", est.value, exact);
    }

    #[test]
    fn divergent_integrand_is_reported() {
        let tol = Tolerance {
            max_intervals: 200,
            ..Tolerance::default()
        };
        assert!(integrate(|x: f64| 1.0 / x, 0.0, 1.0, tol).is_err());
    }
}
