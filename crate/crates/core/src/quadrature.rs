//! Adaptive Gauss–Kronrod (7/15) quadrature.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Maximum number of subintervals kept by the adaptive driver.
const MAX_SEGMENTS: usize = 2000;

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Integrates `f` over `[lo, hi]` until the summed error estimate falls below
/// `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature> {
    if lo == hi {
        return Ok(Quadrature {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        });
    }
    let (first, err) = kronrod(&mut f, lo, hi);
    let mut segs = vec![(lo, hi, first, err)];
    let mut evaluations = 15;
    loop {
        let total: f64 = segs.iter().map(|s| s.2).sum();
        let total_err: f64 = segs.iter().map(|s| s.3).sum();
        if !total.is_finite() || !total_err.is_finite() {
            return Err(Error::QuadratureFailure {
                lower: lo,
                upper: hi,
                tol: abs_tol.max(rel_tol * total.abs()),
                estimate: total_err,
            });
        }
        let tol = abs_tol.max(rel_tol * total.abs());
        if total_err <= tol {
            return Ok(Quadrature {
                value: total,
                error: total_err,
                evaluations,
            });
        }
        if segs.len() >= MAX_SEGMENTS {
            return Err(Error::QuadratureFailure {
                lower: lo,
                upper: hi,
                tol,
                estimate: total_err,
            });
        }
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .map(|(i, _)| i)
            .unwrap();
        let (a, b, _, _) = segs.swap_remove(worst);
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            return Err(Error::QuadratureFailure {
                lower: lo,
                upper: hi,
                tol,
                estimate: total_err,
            });
        }
        let (l, le) = kronrod(&mut f, a, mid);
        let (r, re) = kronrod(&mut f, mid, b);
        evaluations += 30;
        segs.push((a, mid, l, le));
        segs.push((mid, b, r, re));
    }
}

/// Integrates over `[lo, ∞)` through the substitution `s = lo + u / (1 - u)`.
pub fn integrate_to_infinity<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Quadrature> {
    integrate(
        |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let w = 1.0 - u;
            let v = f(lo + u / w) / (w * w);
            if v.is_finite() {
                v
            } else {
                0.0
            }
        },
        0.0,
        1.0,
        abs_tol,
        rel_tol,
    )
}
