//! One-dimensional quadrature used throughout the crate.
//!
//! Two building blocks:
//!
//! * [`integrate`]: globally adaptive Gauss–Kronrod (7/15) on a finite interval,
//!   always bisecting the panel with the largest error estimate.
//! * [`integrate_to_infinity`]: `[a, ∞)` split into geometrically growing panels
//!   `[a + w(2^k − 1), a + w(2^{k+1} − 1)]`, each integrated adaptively. Panels are
//!   added until two consecutive ones are negligible, so both exponential and
//!   algebraic decay are handled without a change of variable.
//!
//! [`gauss_legendre`] supplies fixed rules for tensor-product grids.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Tolerances and subdivision limit for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadControl {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadControl {
    fn default() -> Self {
        QuadControl { rel_tol: 1e-13, abs_tol: 0.0, max_panels: 4000 }
    }
}

/// Integral value with the accumulated Kronrod error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    (value, error)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive Gauss–Kronrod integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, ctrl: QuadControl) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult { value: 0.0, error: 0.0 });
    }
    let (v, e) = gk15(&f, a, b);
    if !v.is_finite() {
        return Err(Error::Domain(format!("integrand is not finite on [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    let mut panels = 1;
    loop {
        let target = ctrl.abs_tol.max(ctrl.rel_tol * total.abs());
        if total_err <= target {
            break;
        }
        if panels >= ctrl.max_panels {
            // Stuck at rounding level: accept when the estimate is dominated by noise.
            if total_err <= 1e3 * f64::EPSILON * total.abs().max(ctrl.abs_tol) {
                break;
            }
            return Err(Error::NonConvergence { what: "adaptive quadrature".into(), terms: panels });
        }
        let worst = heap.pop().expect("heap holds at least one panel");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split any further in floating point.
            heap.push(Panel { error: 0.0, ..worst });
            total_err = heap.iter().map(|p| p.error).sum();
            if total_err == 0.0 {
                break;
            }
            continue;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::Domain("integrand is not finite".into()));
        }
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2 });
        panels += 1;
        if panels % 64 == 0 {
            // Re-sum to shed accumulated cancellation in the running totals.
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    Ok(QuadResult { value, error })
}

/// Integral of `f` over `[a, ∞)` using geometrically widening panels of initial
/// width `width`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    width: f64,
    ctrl: QuadControl,
) -> Result<QuadResult> {
    let mut total = 0.0;
    let mut error = 0.0;
    let mut quiet = 0;
    let mut left = a;
    let mut w = width;
    for _ in 0..200 {
        let right = left + w;
        let panel = integrate(&f, left, right, QuadControl { abs_tol: 0.0, ..ctrl })?;
        total += panel.value;
        error += panel.error;
        if panel.value.abs() <= 1e-3 * ctrl.rel_tol * total.abs() || panel.value == 0.0 {
            quiet += 1;
            if quiet >= 2 {
                return Ok(QuadResult { value: total, error: error + panel.value.abs() });
            }
        } else {
            quiet = 0;
        }
        if !right.is_finite() {
            break;
        }
        left = right;
        w *= 2.0;
    }
    Err(Error::NonConvergence { what: "semi-infinite quadrature".into(), terms: 200 })
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_m.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Fixed Gauss–Legendre rule mapped to `[a, b]`.
pub fn fixed_gl<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, nodes: &[f64], weights: &[f64]) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    nodes.iter().zip(weights).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_is_exact_for_high_degree_polynomials() {
        // K15 integrates degree 3·7 + 2 = 23 exactly on a single panel.
        let (v, _) = gk15(&|x: f64| x.powi(22) + x.powi(23), 0.0, 1.0);
        assert!((v - (1.0 / 23.0 + 1.0 / 24.0)).abs() < 1e-15);
    }

    #[test]
    fn gauss_embedded_rule_is_exact_to_degree_13() {
        let f = |x: f64| x.powi(12);
        let (v, e) = gk15(&f, -1.0, 1.0);
        assert!((v - 2.0 / 13.0).abs() < 1e-15);
        assert!(e < 1e-14);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, QuadControl::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn semi_infinite_exponential_and_algebraic() {
        let e = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, 1.0, QuadControl::default()).unwrap();
        assert!((e.value - 1.0).abs() < 1e-13);
        let a = integrate_to_infinity(|x: f64| 1.0 / (x * x), 1.0, 1.0, QuadControl::default()).unwrap();
        assert!((a.value - 1.0).abs() < 1e-11, "{}", a.value);
    }

    #[test]
    fn gauss_legendre_weights_and_exactness() {
        for m in [1, 2, 5, 10, 33] {
            let (x, w) = gauss_legendre(m);
            let s: f64 = w.iter().sum();
            assert!((s - 2.0).abs() < 1e-13);
            let deg = 2 * m - 2;
            let exact = if deg % 2 == 0 { 2.0 / (deg as f64 + 1.0) } else { 0.0 };
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((got - exact).abs() < 1e-13, "m={m}");
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let ctrl = QuadControl { rel_tol: 1e-15, abs_tol: 0.0, max_panels: 3 };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, ctrl);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }
}
