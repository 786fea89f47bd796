//! Scalar special functions behind the closed-form normalizing constants.
//!
//! All series at `z = −1` are summed through the Euler (binomial) transform
//! `Σ (−1)^k a_k = Σ_n Δ^n a_0 / 2^{n+1}`. For completely monotone `a_k` the
//! transformed terms are positive and decreasing, so the truncation error is
//! bounded by the last term kept. The transform also assigns the Abel value to
//! the slowly divergent sequences that show up for `μ = 2, s ≤ 1`, which is the
//! value of the integral representation of Ψ*.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Truncation control for the series evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    rel_tol: f64,
    max_terms: usize,
}

impl SeriesControl {
    pub fn new(rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(rel_tol > 0.0 && rel_tol.is_finite()) {
            return Err(Error::InvalidArgument(format!("rel_tol must be positive, got {rel_tol}")));
        }
        if max_terms < 1 {
            return Err(Error::InvalidArgument("max_terms must be at least 1".into()));
        }
        Ok(SeriesControl { rel_tol, max_terms })
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol
    }

    pub fn max_terms(&self) -> usize {
        self.max_terms
    }
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl { rel_tol: 1e-12, max_terms: 1_000_000 }
    }
}

const LANCZOS: [f64; 14] = [
    57.156_235_665_862_923_5,
    -59.597_960_355_475_491_2,
    14.136_097_974_741_747_1,
    -0.491_913_816_097_620_199,
    0.339_946_499_848_118_887e-4,
    0.465_236_289_270_485_756e-4,
    -0.983_744_753_048_795_646e-4,
    0.158_088_703_224_912_494e-3,
    -0.210_264_441_724_104_883e-3,
    0.217_439_618_115_212_643e-3,
    -0.164_318_106_536_763_890e-3,
    0.844_182_239_838_527_433e-4,
    -0.261_908_384_015_814_087e-4,
    0.368_991_826_595_316_234e-5,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 671/128).
pub fn log_gamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    if x < 0.5 {
        // Γ(x) = Γ(x + 1) / x keeps the approximation inside its accurate range.
        return Ok(log_gamma(x + 1.0)? - x.ln());
    }
    let tmp = x + 5.242_187_5;
    let tmp = (x + 0.5) * tmp.ln() - tmp;
    let mut ser = 0.999_999_999_999_997_092;
    let mut y = x;
    for c in LANCZOS {
        y += 1.0;
        ser += c / y;
    }
    Ok(tmp + (2.506_628_274_631_000_5 * ser / x).ln())
}

/// Beta function `B(a, b) = Γ(a)Γ(b)/Γ(a+b)`.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("beta_fn requires a, b > 0, got ({a}, {b})")));
    }
    Ok((log_gamma(a)? + log_gamma(b)? - log_gamma(a + b)?).exp())
}

/// `Σ_{k≥0} (−1)^k a_k` through the Euler transform.
pub(crate) fn alternating_sum<F: Fn(usize) -> f64>(a: F, ctrl: SeriesControl) -> Result<f64> {
    // 2^{-(n+1)} underflows and binomials overflow well past this point.
    let cap = ctrl.max_terms.min(1000);
    let mut coeffs: Vec<f64> = Vec::with_capacity(64);
    let mut sum = 0.0;
    let mut quiet = 0;
    let mut scale = 0.5;
    for n in 0..cap {
        coeffs.push(a(n));
        let mut binom = 1.0;
        let mut diff = 0.0;
        for (k, ak) in coeffs.iter().enumerate() {
            let t = binom * ak;
            if k % 2 == 0 {
                diff += t;
            } else {
                diff -= t;
            }
            binom *= (n - k) as f64 / (k + 1) as f64;
        }
        let term = diff * scale;
        scale *= 0.5;
        sum += term;
        if !sum.is_finite() {
            return Err(Error::Domain("alternating series produced a non-finite sum".into()));
        }
        if term.abs() <= ctrl.rel_tol * sum.abs() {
            quiet += 1;
            if quiet >= 2 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NonConvergence { what: "alternating series".into(), terms: cap })
}

/// Riemann zeta for real `s > 0`, `s ≠ 1`.
///
/// `s > 1`: odd-term series `(1 − 2^{−s})^{−1} Σ (2k−1)^{−s}` with an
/// Euler–Maclaurin tail. `0 < s < 1`: `η(s) / (1 − 2^{1−s})`.
pub fn riemann_zeta(s: f64) -> Result<f64> {
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::Domain(format!("riemann_zeta requires s > 0, got {s}")));
    }
    if s == 1.0 {
        return Err(Error::Pole("riemann_zeta has a simple pole at s = 1".into()));
    }
    if s > 1.0 {
        Ok(odd_zeta_sum(s) / (1.0 - (-s).exp2()))
    } else {
        let eta = dirichlet_eta(s, SeriesControl::default())?;
        Ok(eta / (1.0 - (1.0 - s).exp2()))
    }
}

/// Dirichlet eta `Σ_{k≥1} (−1)^{k+1} k^{−s}`, `s > 0`.
pub fn dirichlet_eta(s: f64, ctrl: SeriesControl) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::Domain(format!("dirichlet_eta requires s > 0, got {s}")));
    }
    alternating_sum(|k| ((k + 1) as f64).powf(-s), ctrl)
}

// Bernoulli numbers B_2 .. B_14.
const BERNOULLI: [f64; 7] =
    [1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0];

fn odd_zeta_sum(s: f64) -> f64 {
    const N: usize = 20;
    let head: f64 = (1..N).rev().map(|k| ((2 * k - 1) as f64).powf(-s)).sum();
    let x = (2 * N - 1) as f64;
    // Σ_{k≥N} f(k) with f(k) = (2k − 1)^{−s}.
    let mut tail = x.powf(1.0 - s) / (2.0 * (s - 1.0)) + 0.5 * x.powf(-s);
    // f^{(m)}(N) = (−2)^m (s)_m x^{−s−m}
    let mut rising = s; // (s)_1
    let mut deriv_scale = -2.0; // (−2)^1
    let mut factorial = 2.0; // (2j)!
    for (j, b) in BERNOULLI.iter().enumerate() {
        let m = 2 * j + 1;
        let deriv = deriv_scale * rising * x.powf(-s - m as f64);
        tail -= b / factorial * deriv;
        // advance m by two
        rising *= (s + m as f64) * (s + m as f64 + 1.0);
        deriv_scale *= 4.0;
        factorial *= ((2 * j + 3) * (2 * j + 4)) as f64;
    }
    head + tail
}

/// Generalized Hurwitz–Lerch zeta
/// `Ψ*_μ(z, s, a) = Γ(μ)^{−1} Σ_{n≥0} Γ(μ+n)/n! · z^n / (n+a)^s`.
///
/// Supports `μ > 0`, `s > 0`, `a > 0` and `−1 ≤ z < 1`.
pub fn hurwitz_lerch_psi(mu: f64, z: f64, s: f64, a: f64, ctrl: SeriesControl) -> Result<f64> {
    if !(mu > 0.0 && s > 0.0 && a > 0.0) || !(mu.is_finite() && s.is_finite() && a.is_finite()) {
        return Err(Error::Domain(format!("Ψ* requires μ, s, a > 0, got μ={mu}, s={s}, a={a}")));
    }
    if !(-1.0..1.0).contains(&z) {
        return Err(Error::Domain(format!("Ψ* is implemented for −1 ≤ z < 1, got z={z}")));
    }
    let coeff = |n: usize| -> f64 {
        if mu == 1.0 {
            1.0
        } else if mu == 2.0 {
            (n + 1) as f64
        } else {
            let l = log_gamma(mu + n as f64).unwrap_or(f64::NAN)
                - log_gamma(mu).unwrap_or(f64::NAN)
                - log_gamma(n as f64 + 1.0).unwrap_or(f64::NAN);
            l.exp()
        }
    };
    if z == -1.0 {
        return alternating_sum(|n| coeff(n) * (n as f64 + a).powf(-s), ctrl);
    }
    if z == 0.0 {
        return Ok(a.powf(-s));
    }
    let mut sum = 0.0;
    let mut zpow = 1.0;
    for n in 0..ctrl.max_terms {
        let term = coeff(n) * zpow * (n as f64 + a).powf(-s);
        sum += term;
        // Past n > μ the term ratio is bounded by |z|, so the tail is at most
        // |term|·|z|/(1 − |z|).
        if n as f64 > mu && term.abs() * z.abs() / (1.0 - z.abs()) <= ctrl.rel_tol * sum.abs() {
            return Ok(sum);
        }
        zpow *= z;
    }
    Err(Error::NonConvergence { what: "Hurwitz-Lerch series".into(), terms: ctrl.max_terms })
}

/// `ln((2π)^{n/2})`
pub(crate) fn ln_two_pi_pow(n: f64) -> f64 {
    0.5 * n * (2.0 * PI).ln()
}
