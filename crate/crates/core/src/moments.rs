//! Moment identities for elliptical vectors.
//!
//! Every identity here has the shape
//!
//! ```text
//! a·E f(X) + b·E f(X*) + Σ_i g_i E ∇_i f(X*) + Σ_ij H_ij E ∇_ij f(X**)
//! ```
//!
//! so an identity is a set of [`IdentityCoefficients`] and the work is in the
//! inner expectations. Under a Monte Carlo budget those share random numbers:
//! one sphere direction and one uniform `u` per draw, pushed through the radial
//! quantile of each level, which keeps `X`, `X*`, `X**` draws comonotone.
//!
//! `f` must satisfy the tail conditions that make the integrations by parts
//! valid. That cannot be checked mechanically, so [`SmoothFunction`] carries a
//! caller assertion instead. Polynomials times bounded functions satisfy it for
//! every built-in family that has enough moments.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::elliptical::{EllipticalDistribution, RadialLaw};
use crate::error::{Error, Result};
use crate::generator_families::{GeneratorFamily, Level};
use crate::linalg::SymMatrix;
use crate::oracles::{finite_diff_check, grid_fold, quadrature_radius, whitened_axis};
use crate::partition::{PartitionPlan, Welford};

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type FillFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// `f: ℝⁿ → ℝ` with optional analytic gradient and Hessian.
///
/// Missing derivatives fall back to central differences with steps
/// `fd_scale·(1+|x_i|)·ε^{1/3}` (gradient) and `fd_scale·(1+|x_i|)·ε^{1/4}`
/// (Hessian).
#[derive(Clone)]
pub struct SmoothFunction {
    eval: Arc<EvalFn>,
    grad: Option<Arc<FillFn>>,
    hess: Option<Arc<FillFn>>,
    fd_scale: f64,
    regular: bool,
    constant: Option<f64>,
}

impl fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFunction")
            .field("grad", &self.grad.is_some())
            .field("hess", &self.hess.is_some())
            .field("fd_scale", &self.fd_scale)
            .field("regular", &self.regular)
            .field("constant", &self.constant)
            .finish()
    }
}

impl SmoothFunction {
    pub fn new<F>(eval: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        SmoothFunction { eval: Arc::new(eval), grad: None, hess: None, fd_scale: 1.0, regular: false, constant: None }
    }

    /// Supplies `∇f`; the closure writes into a slice of length `n`.
    pub fn with_gradient<G>(mut self, grad: G) -> Self
    where
        G: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.grad = Some(Arc::new(grad));
        self
    }

    /// Supplies `∇²f`, written row-major into a slice of length `n²`.
    pub fn with_hessian<H>(mut self, hess: H) -> Self
    where
        H: Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.hess = Some(Arc::new(hess));
        self
    }

    pub fn with_fd_scale(mut self, fd_scale: f64) -> Self {
        self.fd_scale = fd_scale;
        self
    }

    /// Caller's statement that the tail conditions of the moment identities
    /// hold for this `f` and the distributions it will be used with.
    pub fn assert_regular(mut self) -> Self {
        self.regular = true;
        self
    }

    pub fn is_regular(&self) -> bool {
        self.regular
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    pub fn has_hessian(&self) -> bool {
        self.hess.is_some()
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn constant(c: f64) -> Self {
        let mut f = SmoothFunction::new(move |_| c)
            .with_gradient(|_, g| g.fill(0.0))
            .with_hessian(|_, h| h.fill(0.0))
            .assert_regular();
        f.constant = Some(c);
        f
    }

    /// `coeff·∏ x_i^{p_i}` with exact derivatives.
    pub fn monomial(exponents: &MonomialExponents, coeff: f64) -> Self {
        if exponents.degree() == 0 {
            return SmoothFunction::constant(coeff);
        }
        let p: Arc<Vec<u32>> = Arc::new(exponents.p.clone());
        let (pe, pg, ph) = (p.clone(), p.clone(), p);
        SmoothFunction::new(move |x| coeff * monomial_value(&pe, x, &[]))
            .with_gradient(move |x, g| {
                for (i, gi) in g.iter_mut().enumerate() {
                    *gi = if pg[i] == 0 { 0.0 } else { coeff * pg[i] as f64 * monomial_value(&pg, x, &[i]) };
                }
            })
            .with_hessian(move |x, h| {
                let n = ph.len();
                for i in 0..n {
                    for j in 0..n {
                        let c = if i == j {
                            ph[i] as f64 * (ph[i] as f64 - 1.0)
                        } else {
                            ph[i] as f64 * ph[j] as f64
                        };
                        h[i * n + j] = if c == 0.0 { 0.0 } else { coeff * c * monomial_value(&ph, x, &[i, j]) };
                    }
                }
            })
            .assert_regular()
    }

    /// `aᵀx`.
    pub fn linear(a: Vec<f64>) -> Self {
        let a = Arc::new(a);
        let (ae, ag) = (a.clone(), a);
        SmoothFunction::new(move |x| ae.iter().zip(x).map(|(a, x)| a * x).sum())
            .with_gradient(move |_, g| g.copy_from_slice(&ag))
            .with_hessian(|_, h| h.fill(0.0))
            .assert_regular()
    }

    /// `exp(−‖x‖²/scale)`.
    pub fn gaussian_bump(scale: f64) -> Self {
        let e = move |x: &[f64]| (-x.iter().map(|v| v * v).sum::<f64>() / scale).exp();
        SmoothFunction::new(e)
            .with_gradient(move |x, g| {
                let v = e(x);
                for (gi, xi) in g.iter_mut().zip(x) {
                    *gi = -2.0 * xi / scale * v;
                }
            })
            .with_hessian(move |x, h| {
                let n = x.len();
                let v = e(x);
                for i in 0..n {
                    for j in 0..n {
                        let diag = if i == j { 2.0 / scale } else { 0.0 };
                        h[i * n + j] = v * (4.0 * x[i] * x[j] / (scale * scale) - diag);
                    }
                }
            })
            .assert_regular()
    }

    /// `sin(Σ_{i ∈ idx} x_i)`.
    pub fn sin_sum(idx: Vec<usize>) -> Self {
        let idx = Arc::new(idx);
        let arg = {
            let idx = idx.clone();
            move |x: &[f64]| idx.iter().map(|&i| x[i]).sum::<f64>()
        };
        let (a1, a2, a3) = (arg.clone(), arg.clone(), arg);
        let (ig, ih) = (idx.clone(), idx);
        SmoothFunction::new(move |x| a1(x).sin())
            .with_gradient(move |x, g| {
                g.fill(0.0);
                let c = a2(x).cos();
                for &i in ig.iter() {
                    g[i] += c;
                }
            })
            .with_hessian(move |x, h| {
                let n = x.len();
                h.fill(0.0);
                let s = -a3(x).sin();
                for &i in ih.iter() {
                    for &j in ih.iter() {
                        h[i * n + j] += s;
                    }
                }
            })
            .assert_regular()
    }

    /// `αf₁ + βf₂`. Derivatives are analytic only where both parts have them.
    pub fn linear_combination(alpha: f64, f1: &SmoothFunction, beta: f64, f2: &SmoothFunction) -> Self {
        let (a, b) = (f1.clone(), f2.clone());
        let mut out = SmoothFunction::new(move |x| alpha * a.value(x) + beta * b.value(x));
        out.fd_scale = f1.fd_scale.min(f2.fd_scale);
        out.regular = f1.regular && f2.regular;
        if let (Some(c1), Some(c2)) = (f1.constant, f2.constant) {
            return SmoothFunction::constant(alpha * c1 + beta * c2);
        }
        if f1.grad.is_some() && f2.grad.is_some() {
            let (a, b) = (f1.clone(), f2.clone());
            out.grad = Some(Arc::new(move |x: &[f64], g: &mut [f64]| {
                let mut tmp = vec![0.0; g.len()];
                a.gradient_into(x, g);
                b.gradient_into(x, &mut tmp);
                for (gi, ti) in g.iter_mut().zip(&tmp) {
                    *gi = alpha * *gi + beta * ti;
                }
            }));
        }
        if f1.hess.is_some() && f2.hess.is_some() {
            let (a, b) = (f1.clone(), f2.clone());
            out.hess = Some(Arc::new(move |x: &[f64], h: &mut [f64]| {
                let mut tmp = vec![0.0; h.len()];
                a.hessian_into(x, h);
                b.hessian_into(x, &mut tmp);
                for (hi, ti) in h.iter_mut().zip(&tmp) {
                    *hi = alpha * *hi + beta * ti;
                }
            }));
        }
        out
    }

    /// `f'(x') = f(y)` with `y[perm[i]] = x'[i]`: the same function seen in
    /// coordinates relabeled by `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let perm: Arc<Vec<usize>> = Arc::new(perm.to_vec());
        let unpermute = {
            let perm = perm.clone();
            move |xp: &[f64]| {
                let mut y = vec![0.0; xp.len()];
                for (i, &pi) in perm.iter().enumerate() {
                    y[pi] = xp[i];
                }
                y
            }
        };
        let base = self.clone();
        let u = unpermute.clone();
        let mut out = SmoothFunction::new(move |x| base.value(&u(x)));
        out.fd_scale = self.fd_scale;
        out.regular = self.regular;
        out.constant = self.constant;
        if self.grad.is_some() {
            let (base, u, perm) = (self.clone(), unpermute.clone(), perm.clone());
            out.grad = Some(Arc::new(move |x: &[f64], g: &mut [f64]| {
                let mut full = vec![0.0; g.len()];
                base.gradient_into(&u(x), &mut full);
                for (i, &pi) in perm.iter().enumerate() {
                    g[i] = full[pi];
                }
            }));
        }
        if self.hess.is_some() {
            let (base, u, perm) = (self.clone(), unpermute, perm);
            out.hess = Some(Arc::new(move |x: &[f64], h: &mut [f64]| {
                let n = perm.len();
                let mut full = vec![0.0; n * n];
                base.hessian_into(&u(x), &mut full);
                for i in 0..n {
                    for j in 0..n {
                        h[i * n + j] = full[perm[i] * n + perm[j]];
                    }
                }
            }));
        }
        out
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn gradient_into(&self, x: &[f64], g: &mut [f64]) {
        match &self.grad {
            Some(grad) => grad(x, g),
            None => self.fd_gradient_into(x, g),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.gradient_into(x, &mut g);
        g
    }

    /// Row-major `n × n` Hessian.
    pub fn hessian_into(&self, x: &[f64], h: &mut [f64]) {
        match &self.hess {
            Some(hess) => hess(x, h),
            None => self.fd_hessian_into(x, h),
        }
    }

    pub fn hessian(&self, x: &[f64]) -> SymMatrix {
        let n = x.len();
        let mut h = vec![0.0; n * n];
        self.hessian_into(x, &mut h);
        SymMatrix::from_fn(n, |i, j| 0.5 * (h[i * n + j] + h[j * n + i]))
    }

    pub(crate) fn fd_gradient_into(&self, x: &[f64], g: &mut [f64]) {
        let mut z = x.to_vec();
        let base = self.fd_scale * f64::EPSILON.cbrt();
        for i in 0..x.len() {
            let h = base * (1.0 + x[i].abs());
            z[i] = x[i] + h;
            let up = self.value(&z);
            z[i] = x[i] - h;
            let down = self.value(&z);
            z[i] = x[i];
            g[i] = (up - down) / (2.0 * h);
        }
    }

    pub(crate) fn fd_hessian_into(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let mut z = x.to_vec();
        let base = self.fd_scale * f64::EPSILON.powf(0.25);
        let steps: Vec<f64> = x.iter().map(|v| base * (1.0 + v.abs())).collect();
        let f0 = self.value(x);
        for i in 0..n {
            let hi = steps[i];
            z[i] = x[i] + hi;
            let up = self.value(&z);
            z[i] = x[i] - hi;
            let down = self.value(&z);
            z[i] = x[i];
            out[i * n + i] = (up - 2.0 * f0 + down) / (hi * hi);
            for j in 0..i {
                let hj = steps[j];
                let mut corner = |si: f64, sj: f64| {
                    z[i] = x[i] + si * hi;
                    z[j] = x[j] + sj * hj;
                    let v = self.value(&z);
                    z[i] = x[i];
                    z[j] = x[j];
                    v
                };
                let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * hi * hj);
                out[i * n + j] = v;
                out[j * n + i] = v;
            }
        }
    }

    /// Compares supplied derivatives against central differences at 10
    /// seeded probe points.
    pub fn check_derivatives(&self, n: usize, seed: u64) -> Result<()> {
        if self.grad.is_none() && self.hess.is_none() || self.constant.is_some() {
            return Ok(());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<Vec<f64>> = (0..10).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let report = finite_diff_check(self, &points);
        if report.pass {
            Ok(())
        } else {
            Err(Error::Validity(format!(
                "supplied derivatives disagree with finite differences (gradient {:.3e}, Hessian {:.3e})",
                report.max_grad_deviation, report.max_hess_deviation
            )))
        }
    }
}

fn monomial_value(p: &[u32], x: &[f64], lowered: &[usize]) -> f64 {
    let mut v = 1.0;
    for (i, (&pi, &xi)) in p.iter().zip(x).enumerate() {
        let k = pi as i32 - lowered.iter().filter(|&&l| l == i).count() as i32;
        if k > 0 {
            v *= xi.powi(k);
        }
    }
    v
}

/// Exponent vector `(p₁, …, p_n)` of `∏ x_i^{p_i}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MonomialExponents {
    p: Vec<u32>,
}

impl MonomialExponents {
    pub fn new(p: Vec<u32>) -> Self {
        MonomialExponents { p }
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.len()
    }

    pub fn degree(&self) -> u32 {
        self.p.iter().sum()
    }
}

/// Which derivation produced an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Thm1,
    Thm2,
    McDirect,
    Quadrature,
    Isserlis,
    Recursion,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Thm1 => "thm1",
            Method::Thm2 => "thm2",
            Method::McDirect => "mc-direct",
            Method::Quadrature => "quadrature",
            Method::Isserlis => "isserlis",
            Method::Recursion => "recursion",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    /// Monte Carlo standard error; 0 for deterministic paths.
    pub stderr: f64,
    pub method: Method,
    pub breakdown: Vec<(String, f64)>,
}

impl MomentEstimate {
    fn exact(value: f64, method: Method) -> Self {
        MomentEstimate { value, stderr: 0.0, method, breakdown: Vec::new() }
    }
}

/// How inner expectations are computed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Budget {
    MonteCarlo { samples: usize, seed: u64 },
    /// Tensor Gauss–Legendre; `nodes_per_dim` nodes per panel of each axis.
    Quadrature { nodes_per_dim: usize },
}

/// `E f(X)`, `E f(X*)`, `E ∇f(X*)` and `E ∇²f(X**)` (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct InnerExpectations {
    pub f_base: f64,
    pub f_star: f64,
    pub grad_star: Vec<f64>,
    pub hess_dstar: Vec<f64>,
}

/// Coefficients of one identity; see the module docs.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCoefficients {
    pub n: usize,
    pub base: f64,
    pub star: f64,
    pub grad_star: Vec<f64>,
    pub hess_dstar: Vec<f64>,
}

const SUMMANDS: [&str; 4] = ["scale_term", "hessian_term", "gradient_term", "location_term"];

impl IdentityCoefficients {
    /// Value and the four summands `[scale, hessian, gradient, location]`.
    pub fn apply(&self, inner: &InnerExpectations) -> (f64, [f64; 4]) {
        let scale = self.star * inner.f_star;
        let hess: f64 = self.hess_dstar.iter().zip(&inner.hess_dstar).map(|(a, b)| a * b).sum();
        let grad: f64 = self.grad_star.iter().zip(&inner.grad_star).map(|(a, b)| a * b).sum();
        let loc = self.base * inner.f_base;
        (scale + hess + grad + loc, [scale, hess, grad, loc])
    }

    fn needs(&self) -> [bool; 3] {
        [
            self.base != 0.0,
            self.star != 0.0 || self.grad_star.iter().any(|v| *v != 0.0),
            self.hess_dstar.iter().any(|v| *v != 0.0),
        ]
    }
}

/// `σ₁₁b*E f(X*) + b**ΣΣσ_{i1}σ_{j1}E∇_{ij}f(X**) + 2μ₁b*Σσ_{i1}E∇_i f(X*) + μ₁²E f(X)`
pub fn thm1_coefficients(d: &EllipticalDistribution) -> Result<IdentityCoefficients> {
    let c = d.constants();
    let (bs, bss) = (c.b_star()?, c.b_dstar()?);
    let s = d.sigma();
    let n = d.n();
    let mu1 = d.mu()[0];
    Ok(IdentityCoefficients {
        n,
        base: mu1 * mu1,
        star: s.get(0, 0) * bs,
        grad_star: (0..n).map(|i| 2.0 * mu1 * bs * s.get(i, 0)).collect(),
        hess_dstar: (0..n * n).map(|k| bss * s.get(k / n, 0) * s.get(k % n, 0)).collect(),
    })
}

/// The characteristic-generator form, with `φ′(0) = −b*` and
/// `φ*′(0) = −b**/b*`. Valid for positive semidefinite `Σ`.
pub fn thm2_coefficients(d: &EllipticalDistribution) -> Result<IdentityCoefficients> {
    let c = d.constants();
    let phi = -c.b_star()?;
    let phi_star = -c.b_dstar()? / c.b_star()?;
    let s = d.sigma();
    let n = d.n();
    let mu1 = d.mu()[0];
    Ok(IdentityCoefficients {
        n,
        base: mu1 * mu1,
        star: -phi * s.get(0, 0),
        grad_star: (0..n).map(|i| -2.0 * mu1 * phi * s.get(0, i)).collect(),
        hess_dstar: (0..n * n).map(|k| phi * phi_star * s.get(0, k / n) * s.get(0, k % n)).collect(),
    })
}

fn require_regular(f: &SmoothFunction, d: &EllipticalDistribution, seed: u64) -> Result<()> {
    if !f.is_regular() {
        return Err(Error::RegularityNotAsserted);
    }
    f.check_derivatives(d.n(), seed)
}

fn budget_seed(budget: &Budget) -> u64 {
    match budget {
        Budget::MonteCarlo { seed, .. } => *seed,
        Budget::Quadrature { .. } => 0,
    }
}

/// `E[X₁² f(X)]` through the first identity (positive definite `Σ`).
pub fn x1sq_moment_thm1(d: &EllipticalDistribution, f: &SmoothFunction, budget: Budget) -> Result<MomentEstimate> {
    if !d.factor().is_full_rank() {
        return Err(Error::Singular("the first identity needs positive definite Σ; use the second".into()));
    }
    d.at_level(Level::DoubleStar)?;
    require_regular(f, d, budget_seed(&budget))?;
    let coeffs = thm1_coefficients(d)?;
    evaluate_identity(d, f, &coeffs, budget, Method::Thm1)
}

/// `E[X₁² f(X)]` through the characteristic-generator identity (positive
/// semidefinite `Σ`).
pub fn x1sq_moment_thm2(d: &EllipticalDistribution, f: &SmoothFunction, budget: Budget) -> Result<MomentEstimate> {
    d.at_level(Level::DoubleStar)?;
    require_regular(f, d, budget_seed(&budget))?;
    let coeffs = thm2_coefficients(d)?;
    evaluate_identity(d, f, &coeffs, budget, Method::Thm2)
}

/// `E[X_k² f(X)]` by relabeling coordinate `k` to the first position.
pub fn xk_sq_moment_thm1(
    d: &EllipticalDistribution,
    k: usize,
    f: &SmoothFunction,
    budget: Budget,
) -> Result<MomentEstimate> {
    let (dp, fp) = relabel(d, k, f)?;
    x1sq_moment_thm1(&dp, &fp, budget)
}

/// Swaps coordinates `0` and `k` in `μ`, `Σ` and `f`.
pub fn relabel(d: &EllipticalDistribution, k: usize, f: &SmoothFunction) -> Result<(EllipticalDistribution, SmoothFunction)> {
    let n = d.n();
    if k >= n {
        return Err(Error::InvalidArgument(format!("coordinate {k} out of range for dimension {n}")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.swap(0, k);
    let mu: Vec<f64> = perm.iter().map(|&i| d.mu()[i]).collect();
    let dp = EllipticalDistribution::new(mu, d.sigma().permuted(&perm), d.family().clone())?;
    Ok((dp, f.permuted(&perm)))
}

/// `E[X₁ f(X)] = Σ_i b*σ_{1i} E∇_i f(X*) + μ₁ E f(X)`.
pub fn stein_first_moment(d: &EllipticalDistribution, f: &SmoothFunction, budget: Budget) -> Result<MomentEstimate> {
    d.at_level(Level::Star)?;
    f.check_derivatives(d.n(), budget_seed(&budget))?;
    let bs = d.constants().b_star()?;
    let n = d.n();
    let coeffs = IdentityCoefficients {
        n,
        base: d.mu()[0],
        star: 0.0,
        grad_star: (0..n).map(|i| bs * d.sigma().get(0, i)).collect(),
        hess_dstar: vec![0.0; n * n],
    };
    let mut est = evaluate_identity(d, f, &coeffs, budget, Method::Thm2)?;
    est.breakdown.retain(|(name, _)| name == "gradient_term" || name == "location_term");
    Ok(est)
}

/// Inner expectations alone, for injecting into several identities.
pub fn inner_expectations(d: &EllipticalDistribution, f: &SmoothFunction, budget: Budget) -> Result<InnerExpectations> {
    let n = d.n();
    let probe = IdentityCoefficients {
        n,
        base: 1.0,
        star: 1.0,
        grad_star: vec![1.0; n],
        hess_dstar: vec![1.0; n * n],
    };
    Ok(run_engine(d, f, &probe, budget)?.inner)
}

struct EngineOutput {
    inner: InnerExpectations,
    value: f64,
    stderr: f64,
    summands: [f64; 4],
}

fn evaluate_identity(
    d: &EllipticalDistribution,
    f: &SmoothFunction,
    coeffs: &IdentityCoefficients,
    budget: Budget,
    method: Method,
) -> Result<MomentEstimate> {
    let out = run_engine(d, f, coeffs, budget)?;
    let breakdown = SUMMANDS.iter().zip(out.summands).map(|(k, v)| (k.to_string(), v)).collect();
    Ok(MomentEstimate { value: out.value, stderr: out.stderr, method, breakdown })
}

fn run_engine(
    d: &EllipticalDistribution,
    f: &SmoothFunction,
    coeffs: &IdentityCoefficients,
    budget: Budget,
) -> Result<EngineOutput> {
    let n = d.n();
    if let Some(c) = f.as_constant() {
        let inner = InnerExpectations { f_base: c, f_star: c, grad_star: vec![0.0; n], hess_dstar: vec![0.0; n * n] };
        let (value, summands) = coeffs.apply(&inner);
        return Ok(EngineOutput { inner, value, stderr: 0.0, summands });
    }
    match budget {
        Budget::MonteCarlo { samples, seed } => mc_engine(d, f, coeffs, samples, seed),
        Budget::Quadrature { nodes_per_dim } => quad_engine(d, f, coeffs, nodes_per_dim),
    }
}

/// Per-draw components in a fixed layout: `[f_base, f_star, ∇f*(n), ∇²f**(n²)]`.
struct Layout {
    n: usize,
}

impl Layout {
    fn len(&self) -> usize {
        2 + self.n + self.n * self.n
    }
}

fn combine(coeffs: &IdentityCoefficients, comp: &[f64]) -> [f64; 4] {
    let n = coeffs.n;
    let scale = coeffs.star * comp[1];
    let grad: f64 = coeffs.grad_star.iter().zip(&comp[2..2 + n]).map(|(a, b)| a * b).sum();
    let hess: f64 = coeffs.hess_dstar.iter().zip(&comp[2 + n..]).map(|(a, b)| a * b).sum();
    let loc = coeffs.base * comp[0];
    [scale, hess, grad, loc]
}

fn fill_components(
    f: &SmoothFunction,
    needs: [bool; 3],
    points: [&[f64]; 3],
    n: usize,
    comp: &mut [f64],
) {
    if needs[0] {
        comp[0] = f.value(points[0]);
    }
    if needs[1] {
        comp[1] = f.value(points[1]);
        f.gradient_into(points[1], &mut comp[2..2 + n]);
    }
    if needs[2] {
        f.hessian_into(points[2], &mut comp[2 + n..]);
    }
}

#[derive(Clone)]
struct ChunkAcc {
    total: Welford,
    summands: [Welford; 4],
    components: Vec<Welford>,
    bad: Option<(usize, f64)>,
}

fn mc_engine(
    d: &EllipticalDistribution,
    f: &SmoothFunction,
    coeffs: &IdentityCoefficients,
    samples: usize,
    seed: u64,
) -> Result<EngineOutput> {
    if samples < 2 {
        return Err(Error::InvalidArgument("Monte Carlo budget needs at least 2 samples".into()));
    }
    let n = d.n();
    let layout = Layout { n };
    let needs = coeffs.needs();
    let levels = [Level::Base, Level::Star, Level::DoubleStar];
    let mut laws: Vec<Option<Arc<RadialLaw>>> = Vec::with_capacity(3);
    for (need, level) in needs.iter().zip(levels) {
        laws.push(if *need { Some(d.radial_law_at(level)?) } else { None });
    }
    let plan = PartitionPlan::default();
    let chunk_size = plan.chunk_size;
    let accs = plan.run(seed, samples, |chunk, len, rng| {
        let mut acc = ChunkAcc {
            total: Welford::default(),
            summands: [Welford::default(); 4],
            components: vec![Welford::default(); layout.len()],
            bad: None,
        };
        let mut dir = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pts = vec![vec![0.0; n]; 3];
        let mut comp = vec![0.0; layout.len()];
        for k in 0..len {
            for v in dir.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            let u: f64 = rng.random();
            let mut last: Option<(f64, usize)> = None;
            for (slot, law) in laws.iter().enumerate() {
                let Some(law) = law else { continue };
                let r = law.quantile(u);
                // Identical laws (normal family) give identical points.
                if let Some((prev_r, prev)) = last {
                    if prev_r == r {
                        let (a, b) = if prev < slot { pts.split_at_mut(slot) } else { unreachable!() };
                        b[0].copy_from_slice(&a[prev]);
                        continue;
                    }
                }
                for (yi, di) in y.iter_mut().zip(&dir) {
                    *yi = di * r / norm;
                }
                d.factor().apply_into(&y, &mut pts[slot]);
                for (xi, mi) in pts[slot].iter_mut().zip(d.mu()) {
                    *xi += mi;
                }
                last = Some((r, slot));
            }
            fill_components(f, needs, [&pts[0], &pts[1], &pts[2]], n, &mut comp);
            let parts = combine(coeffs, &comp);
            let v: f64 = parts.iter().sum();
            if !v.is_finite() && acc.bad.is_none() {
                acc.bad = Some((chunk * chunk_size + k, v));
            }
            acc.total.push(v);
            for (w, p) in acc.summands.iter_mut().zip(parts) {
                w.push(p);
            }
            for (w, c) in acc.components.iter_mut().zip(&comp) {
                w.push(*c);
            }
        }
        acc
    });
    let mut total = Welford::default();
    let mut summands = [Welford::default(); 4];
    let mut components = vec![Welford::default(); layout.len()];
    for acc in &accs {
        if let Some((index, value)) = acc.bad {
            return Err(Error::NonFinite { index, value });
        }
        total.merge(&acc.total);
        for (a, b) in summands.iter_mut().zip(&acc.summands) {
            a.merge(b);
        }
        for (a, b) in components.iter_mut().zip(&acc.components) {
            a.merge(b);
        }
    }
    let means: Vec<f64> = components.iter().map(Welford::mean).collect();
    let inner = InnerExpectations {
        f_base: means[0],
        f_star: means[1],
        grad_star: means[2..2 + n].to_vec(),
        hess_dstar: means[2 + n..].to_vec(),
    };
    Ok(EngineOutput {
        inner,
        value: total.mean(),
        stderr: total.stderr(),
        summands: [summands[0].mean(), summands[1].mean(), summands[2].mean(), summands[3].mean()],
    })
}

fn quad_engine(
    d: &EllipticalDistribution,
    f: &SmoothFunction,
    coeffs: &IdentityCoefficients,
    nodes_per_dim: usize,
) -> Result<EngineOutput> {
    let n = d.n();
    if n > 3 {
        return Err(Error::Dimension { n, reason: "tensor quadrature is limited to n ≤ 3".into() });
    }
    if !d.factor().is_full_rank() {
        return Err(Error::Singular("quadrature needs a full-rank scale matrix".into()));
    }
    let needs = coeffs.needs();
    let levels = [Level::Base, Level::Star, Level::DoubleStar];
    let mut dens: Vec<Option<(f64, EllipticalDistribution)>> = Vec::with_capacity(3);
    let mut radius = 0.0f64;
    for (need, level) in needs.iter().zip(levels) {
        if *need {
            let dl = d.at_level(level)?;
            radius = radius.max(quadrature_radius(&dl)?);
            dens.push(Some((d.constants().constant(level)?, dl)));
        } else {
            dens.push(None);
        }
    }
    let axis = whitened_axis(radius, nodes_per_dim);
    let layout = Layout { n };
    let len = layout.len();
    let sums = grid_fold(&axis, n, len, |y, w, acc| {
        let half_sq = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
        let mut x = vec![0.0; n];
        d.factor().apply_into(y, &mut x);
        for (xi, mi) in x.iter_mut().zip(d.mu()) {
            *xi += mi;
        }
        let mut comp = vec![0.0; len];
        fill_components(f, needs, [&x, &x, &x], n, &mut comp);
        let weight = |slot: usize| match &dens[slot] {
            Some((c, dl)) => w * c * dl.triple().eval(dl.level(), half_sq),
            None => 0.0,
        };
        let (w0, w1, w2) = (weight(0), weight(1), weight(2));
        acc[0] += w0 * comp[0];
        for k in 1..2 + n {
            acc[k] += w1 * comp[k];
        }
        for k in 2 + n..len {
            acc[k] += w2 * comp[k];
        }
    });
    let inner = InnerExpectations {
        f_base: sums[0],
        f_star: sums[1],
        grad_star: sums[2..2 + n].to_vec(),
        hess_dstar: sums[2 + n..].to_vec(),
    };
    let (value, summands) = coeffs.apply(&inner);
    Ok(EngineOutput { inner, value, stderr: 0.0, summands })
}

/// One expectation `coeff·E[∏ X_i^{q_i}]` under a given level.
#[derive(Debug, Clone, PartialEq)]
pub struct MonomialTerm {
    pub coeff: f64,
    pub level: Level,
    pub exponents: Vec<u32>,
}

fn lowered(p: &[u32], idx: &[usize]) -> Vec<u32> {
    let mut q = p.to_vec();
    for &i in idx {
        q[i] -= 1;
    }
    q
}

/// Product-moment expansion obtained by applying the first identity to
/// `f = x₁^{p₁−2} ∏_{k≥2} x_k^{p_k}`.
pub fn product_moment_terms(d: &EllipticalDistribution, e: &MonomialExponents) -> Result<Vec<MonomialTerm>> {
    check_exponents(d, e)?;
    let coeffs = thm1_coefficients(d)?;
    let n = d.n();
    let mut q = e.as_slice().to_vec();
    q[0] -= 2;
    let mut terms = vec![
        MonomialTerm { coeff: coeffs.star, level: Level::Star, exponents: q.clone() },
        MonomialTerm { coeff: coeffs.base, level: Level::Base, exponents: q.clone() },
    ];
    for i in 0..n {
        if q[i] > 0 {
            let c = coeffs.grad_star[i] * q[i] as f64;
            terms.push(MonomialTerm { coeff: c, level: Level::Star, exponents: lowered(&q, &[i]) });
        }
        for j in 0..n {
            let mult = if i == j {
                q[i] as f64 * (q[i] as f64 - 1.0)
            } else {
                q[i] as f64 * q[j] as f64
            };
            if mult > 0.0 {
                let c = coeffs.hess_dstar[i * n + j] * mult;
                terms.push(MonomialTerm { coeff: c, level: Level::DoubleStar, exponents: lowered(&q, &[i, j]) });
            }
        }
    }
    terms.retain(|t| t.coeff != 0.0);
    Ok(terms)
}

/// The product-moment expansion exactly as displayed in the source
/// derivation, where the `σ₁₁(p₁−2)` location term is taken under `X**`.
/// Kept for adjudication against [`product_moment_terms`].
pub fn product_moment_terms_as_printed(d: &EllipticalDistribution, e: &MonomialExponents) -> Result<Vec<MonomialTerm>> {
    check_exponents(d, e)?;
    let c = d.constants();
    let (bs, bss) = (c.b_star()?, c.b_dstar()?);
    let s = d.sigma();
    let mu1 = d.mu()[0];
    let p = e.as_slice();
    let n = p.len();
    let p1 = p[0] as f64;
    let mut base = p.to_vec();
    base[0] -= 2;
    let mut terms = vec![MonomialTerm { coeff: bs * s.get(0, 0), level: Level::Star, exponents: base.clone() }];
    let mut push = |coeff: f64, level: Level, lower: &[usize]| {
        if coeff != 0.0 {
            terms.push(MonomialTerm { coeff, level, exponents: lowered(&base, lower) });
        }
    };
    push(bss * s.get(0, 0).powi(2) * (p1 - 2.0) * (p1 - 3.0), Level::DoubleStar, &[0, 0]);
    for j in 1..n {
        let pj = p[j] as f64;
        push(2.0 * bss * s.get(0, 0) * s.get(j, 0) * (p1 - 2.0) * pj, Level::DoubleStar, &[0, j]);
        push(bss * s.get(j, 0).powi(2) * pj * (pj - 1.0), Level::DoubleStar, &[j, j]);
        for i in 1..n {
            if i != j {
                let pi = p[i] as f64;
                push(bss * s.get(j, 0) * s.get(i, 0) * pj * pi, Level::DoubleStar, &[i, j]);
            }
        }
    }
    push(2.0 * bs * mu1 * s.get(0, 0) * (p1 - 2.0), Level::DoubleStar, &[0]);
    for j in 1..n {
        push(2.0 * bs * mu1 * s.get(j, 0) * p[j] as f64, Level::Star, &[j]);
    }
    push(mu1 * mu1, Level::Base, &[]);
    Ok(terms)
}

fn check_exponents(d: &EllipticalDistribution, e: &MonomialExponents) -> Result<()> {
    if e.n() != d.n() {
        return Err(Error::DimensionMismatch { expected: d.n(), got: e.n() });
    }
    if e.as_slice()[0] < 2 {
        return Err(Error::InvalidArgument("the product-moment identity needs p₁ ≥ 2".into()));
    }
    if let GeneratorFamily::StudentT { p } = d.family() {
        if e.degree() as f64 >= *p {
            return Err(Error::MomentNonexistence { degree: e.degree(), family: d.family().to_string() });
        }
    }
    Ok(())
}

/// `E[∏ X_i^{p_i}]` for `p₁ ≥ 2`.
///
/// Normal: exact recursion. Other families: the first identity with
/// `f = x₁^{p₁−2} ∏ x_k^{p_k}`, inner expectations per `budget`.
pub fn product_moment(d: &EllipticalDistribution, e: &MonomialExponents, budget: Budget) -> Result<MomentEstimate> {
    check_exponents(d, e)?;
    if d.family().is_normal() {
        let v = normal_product_moment(d.mu(), d.sigma(), e)?;
        return Ok(MomentEstimate::exact(v, Method::Recursion));
    }
    let mut q = e.as_slice().to_vec();
    q[0] -= 2;
    let f = SmoothFunction::monomial(&MonomialExponents::new(q), 1.0);
    if d.factor().is_full_rank() {
        x1sq_moment_thm1(d, &f, budget)
    } else {
        x1sq_moment_thm2(d, &f, budget)
    }
}

/// Gaussian product moment `E[∏ X_i^{p_i}]` by recursion on the coordinate
/// with the largest exponent.
pub fn normal_product_moment(mu: &[f64], sigma: &SymMatrix, e: &MonomialExponents) -> Result<f64> {
    let n = mu.len();
    if sigma.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sigma.n() });
    }
    if e.n() != n {
        return Err(Error::DimensionMismatch { expected: n, got: e.n() });
    }
    let mut memo = HashMap::new();
    Ok(gaussian_recursion(mu, sigma, e.as_slice().to_vec(), &mut memo))
}

fn gaussian_recursion(mu: &[f64], sigma: &SymMatrix, p: Vec<u32>, memo: &mut HashMap<Vec<u32>, f64>) -> f64 {
    if let Some(v) = memo.get(&p) {
        return *v;
    }
    let n = p.len();
    let (k, &pk) = p.iter().enumerate().max_by_key(|(i, v)| (**v, std::cmp::Reverse(*i))).expect("n ≥ 1");
    let value = if pk == 0 {
        1.0
    } else if pk == 1 {
        // E[X_k g] = Σ_i σ_{ki} E[∂_i g] + μ_k E[g],   g = the other factors.
        let mut g = p.clone();
        g[k] = 0;
        let mut v = mu[k] * gaussian_recursion(mu, sigma, g.clone(), memo);
        for i in 0..n {
            if g[i] > 0 && sigma.get(k, i) != 0.0 {
                let lower = lowered(&g, &[i]);
                v += sigma.get(k, i) * g[i] as f64 * gaussian_recursion(mu, sigma, lower, memo);
            }
        }
        v
    } else {
        // First identity with b* = b** = 1 and f = x_k^{p_k−2} · rest.
        let mut q = p.clone();
        q[k] -= 2;
        let skk = sigma.get(k, k);
        let mut v = (skk + mu[k] * mu[k]) * gaussian_recursion(mu, sigma, q.clone(), memo);
        for i in 0..n {
            let ski = sigma.get(k, i);
            if ski == 0.0 {
                continue;
            }
            if q[i] > 0 && mu[k] != 0.0 {
                v += 2.0 * mu[k] * ski * q[i] as f64 * gaussian_recursion(mu, sigma, lowered(&q, &[i]), memo);
            }
            for j in 0..n {
                let skj = sigma.get(k, j);
                let mult = if i == j { q[i] as f64 * (q[i] as f64 - 1.0) } else { q[i] as f64 * q[j] as f64 };
                if mult > 0.0 && skj != 0.0 {
                    v += ski * skj * mult * gaussian_recursion(mu, sigma, lowered(&q, &[i, j]), memo);
                }
            }
        }
        v
    };
    memo.insert(p, value);
    value
}

/// `E[X₁^{p₁} f(X)]` for normal `X`, expanding `∇(x₁^{p₁−2} f)` and
/// `∇²(x₁^{p₁−2} f)` into derivatives of `f`.
pub fn normal_power_moment(
    d: &EllipticalDistribution,
    p1: u32,
    f: &SmoothFunction,
    budget: Budget,
) -> Result<MomentEstimate> {
    if !d.family().is_normal() {
        return Err(Error::FamilyMismatch(d.family().to_string()));
    }
    if p1 < 2 {
        return Err(Error::InvalidArgument("the power recursion needs p₁ ≥ 2".into()));
    }
    if !f.is_regular() {
        return Err(Error::RegularityNotAsserted);
    }
    f.check_derivatives(d.n(), budget_seed(&budget))?;
    let n = d.n();
    let k = p1 as i32 - 2;
    let s = d.sigma().clone();
    let mu1 = d.mu()[0];
    let s11 = s.get(0, 0);
    let (kf, fc) = (k as f64, f.clone());
    let pow = move |x: f64, e: i32| match e {
        e if e < 0 => 0.0,
        0 => 1.0,
        e => x.powi(e),
    };
    // With g = x₁^k f:  ΣΣσ_{1i}σ_{1j}x₁^k∇_{ij}f + 2kσ₁₁x₁^{k−1}Σσ_{1j}∇_j f
    //   + σ₁₁²k(k−1)x₁^{k−2}f + 2μ₁Σσ_{1i}x₁^k∇_i f + 2μ₁σ₁₁k x₁^{k−1}f + (σ₁₁ + μ₁²)x₁^k f
    let integrand = SmoothFunction::new(move |x: &[f64]| {
        let fx = fc.value(x);
        let mut g = vec![0.0; n];
        let mut h = vec![0.0; n * n];
        fc.gradient_into(x, &mut g);
        fc.hessian_into(x, &mut h);
        let xk = pow(x[0], k);
        let mut v = (s11 + mu1 * mu1) * xk * fx;
        v += s11 * s11 * kf * (kf - 1.0) * pow(x[0], k - 2) * fx;
        v += 2.0 * mu1 * s11 * kf * pow(x[0], k - 1) * fx;
        let xk1 = pow(x[0], k - 1);
        for i in 0..n {
            v += 2.0 * mu1 * s.get(0, i) * xk * g[i];
            v += 2.0 * kf * s11 * s.get(0, i) * xk1 * g[i];
            for j in 0..n {
                v += s.get(0, i) * s.get(0, j) * xk * h[i * n + j];
            }
        }
        v
    });
    if let Some(c) = f.as_constant() {
        if p1 == 2 {
            return Ok(MomentEstimate::exact(c * (s11 + mu1 * mu1), Method::Recursion));
        }
    }
    let est = match budget {
        Budget::MonteCarlo { samples, seed } => {
            let r = crate::oracles::mc_expectation(d, |x| integrand.value(x), samples, seed)?;
            MomentEstimate { value: r.mean, stderr: r.stderr, method: Method::Recursion, breakdown: Vec::new() }
        }
        Budget::Quadrature { nodes_per_dim } => {
            let v = crate::oracles::quad_expectation(d, |x| integrand.value(x), nodes_per_dim)?;
            MomentEstimate::exact(v, Method::Recursion)
        }
    };
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_spd;
    use crate::oracles::{elliptical_monomial_moment, isserlis_moment, mc_expectation};

    fn dist(fam: GeneratorFamily, mu: Vec<f64>, rows: &[Vec<f64>]) -> EllipticalDistribution {
        EllipticalDistribution::new(mu, SymMatrix::from_rows(rows).unwrap(), fam).unwrap()
    }

    fn x2sq() -> SmoothFunction {
        SmoothFunction::monomial(&MonomialExponents::new(vec![0, 2]), 1.0)
    }

    const MC: Budget = Budget::MonteCarlo { samples: 200_000, seed: 17 };

    #[test]
    fn constant_collapse_is_exact() {
        let d = dist(GeneratorFamily::Laplace, vec![0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let e = x1sq_moment_thm1(&d, &SmoothFunction::constant(1.0), MC).unwrap();
        assert!((e.value - 3.0).abs() < 1e-12);
        assert_eq!(e.stderr, 0.0);
        let d = dist(GeneratorFamily::Normal, vec![1.5, 0.0], &[vec![2.0, 0.4], vec![0.4, 1.0]]);
        let e = x1sq_moment_thm1(&d, &SmoothFunction::constant(1.0), MC).unwrap();
        assert_eq!(e.value, 2.0 + 2.25);
    }

    #[test]
    fn breakdown_sums_to_value() {
        let d = dist(GeneratorFamily::Logistic, vec![0.3, -0.2], &[vec![1.0, 0.2], vec![0.2, 0.7]]);
        let e = x1sq_moment_thm1(&d, &x2sq(), Budget::MonteCarlo { samples: 20_000, seed: 1 }).unwrap();
        let s: f64 = e.breakdown.iter().map(|(_, v)| v).sum();
        assert!((s - e.value).abs() < 1e-12 * (1.0 + e.value.abs()));
        assert_eq!(e.breakdown.len(), 4);
    }

    #[test]
    fn normal_x2sq_by_quadrature() {
        let d = dist(GeneratorFamily::Normal, vec![0.0, 0.0], &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        let e = x1sq_moment_thm1(&d, &x2sq(), Budget::Quadrature { nodes_per_dim: 10 }).unwrap();
        assert!((e.value - 1.0).abs() < 1e-9, "{}", e.value);
        let e = x1sq_moment_thm1(&d, &x2sq(), MC).unwrap();
        assert!((e.value - 1.0).abs() < 3.0 * e.stderr + 1e-12, "{} ± {}", e.value, e.stderr);
    }

    #[test]
    fn thm1_matches_exact_moment_for_each_family() {
        let rows = [vec![2.0, 1.0], vec![1.0, 2.0]];
        for fam in [GeneratorFamily::student_t(9.0).unwrap(), GeneratorFamily::Logistic, GeneratorFamily::Laplace] {
            let d = dist(fam.clone(), vec![0.5, -0.3], &rows);
            let exact = elliptical_monomial_moment(&d, &MonomialExponents::new(vec![2, 2])).unwrap();
            let q = x1sq_moment_thm1(&d, &x2sq(), Budget::Quadrature { nodes_per_dim: 12 }).unwrap();
            assert!((q.value / exact - 1.0).abs() < 1e-6, "{fam}: {} vs {exact}", q.value);
            let m = x1sq_moment_thm1(&d, &x2sq(), MC).unwrap();
            assert!((m.value - exact).abs() < 4.0 * m.stderr, "{fam}: {} ± {} vs {exact}", m.value, m.stderr);
        }
    }

    #[test]
    fn thm2_handles_rank_one_sigma() {
        let d = dist(GeneratorFamily::Normal, vec![0.0, 0.0], &[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(matches!(x1sq_moment_thm1(&d, &x2sq(), MC), Err(Error::Singular(_))));
        let e = x1sq_moment_thm2(&d, &x2sq(), MC).unwrap();
        assert!((e.value - 3.0).abs() < 3.0 * e.stderr, "{} ± {}", e.value, e.stderr);
    }

    #[test]
    fn thm1_and_thm2_coefficients_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d0 = EllipticalDistribution::standard(3, GeneratorFamily::student_t(10.0).unwrap()).unwrap();
        let s = random_spd(3, 0.2, &mut rng);
        let d = EllipticalDistribution::new(vec![0.4, 0.1, -1.0], s, d0.family().clone()).unwrap();
        let inner = InnerExpectations {
            f_base: 0.7,
            f_star: 0.5,
            grad_star: vec![0.1, -0.2, 0.3],
            hess_dstar: (0..9).map(|k| (k as f64 * 0.37).sin()).collect(),
        };
        let (a, _) = thm1_coefficients(&d).unwrap().apply(&inner);
        let (b, _) = thm2_coefficients(&d).unwrap().apply(&inner);
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn regularity_must_be_asserted() {
        let d = EllipticalDistribution::standard(2, GeneratorFamily::Normal).unwrap();
        let f = SmoothFunction::new(|x| x[0].sin());
        assert!(matches!(x1sq_moment_thm1(&d, &f, MC), Err(Error::RegularityNotAsserted)));
        assert!(x1sq_moment_thm1(&d, &f.assert_regular(), Budget::MonteCarlo { samples: 100, seed: 1 }).is_ok());
    }

    #[test]
    fn wrong_gradient_is_rejected() {
        let d = EllipticalDistribution::standard(2, GeneratorFamily::Normal).unwrap();
        let f = SmoothFunction::new(|x| x[0] * x[0]).with_gradient(|x, g| {
            g[0] = 4.0 * x[0];
            g[1] = 0.0;
        });
        assert!(matches!(stein_first_moment(&d, &f, MC), Err(Error::Validity(_))));
    }

    #[test]
    fn stein_examples() {
        let d = dist(GeneratorFamily::Normal, vec![0.5, 2.0], &[vec![1.0, 0.3], vec![0.3, 1.0]]);
        let f = SmoothFunction::monomial(&MonomialExponents::new(vec![0, 1]), 1.0);
        let e = stein_first_moment(&d, &f, Budget::Quadrature { nodes_per_dim: 10 }).unwrap();
        assert!((e.value - (0.3 + 0.5 * 2.0)).abs() < 1e-9, "{}", e.value);
        let e = stein_first_moment(&d, &SmoothFunction::constant(1.0), MC).unwrap();
        assert_eq!(e.value, 0.5);
        let d = EllipticalDistribution::standard(2, GeneratorFamily::student_t(9.0).unwrap()).unwrap();
        let e = stein_first_moment(&d, &x2sq(), MC).unwrap();
        assert!(e.value.abs() < 3.0 * e.stderr + 1e-15, "{} ± {}", e.value, e.stderr);
    }

    #[test]
    fn relabeled_moment() {
        let d = dist(GeneratorFamily::Normal, vec![0.0, 0.0], &[vec![1.0, 0.5], vec![0.5, 3.0]]);
        let f = SmoothFunction::monomial(&MonomialExponents::new(vec![2, 0]), 1.0);
        let e = xk_sq_moment_thm1(&d, 1, &f, Budget::Quadrature { nodes_per_dim: 10 }).unwrap();
        // E[X₂²X₁²] = σ₁₁σ₂₂ + 2σ₁₂²
        assert!((e.value - (3.0 + 0.5)).abs() < 1e-9, "{}", e.value);
    }

    #[test]
    fn product_moment_examples() {
        let d = EllipticalDistribution::standard(2, GeneratorFamily::Normal).unwrap();
        let e = product_moment(&d, &MonomialExponents::new(vec![2, 0]), MC).unwrap();
        assert_eq!(e.value, 1.0);
        let d = dist(GeneratorFamily::Normal, vec![0.0, 0.0], &[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let e = product_moment(&d, &MonomialExponents::new(vec![2, 2]), MC).unwrap();
        assert!((e.value - 6.0).abs() < 1e-12);
        let d = EllipticalDistribution::standard(2, GeneratorFamily::Laplace).unwrap();
        let e = product_moment(&d, &MonomialExponents::new(vec![2, 0]), MC).unwrap();
        assert!((e.value - 3.0).abs() < 1e-12);
        let d = EllipticalDistribution::standard(2, GeneratorFamily::student_t(5.0).unwrap()).unwrap();
        assert!(matches!(
            product_moment(&d, &MonomialExponents::new(vec![4, 2]), MC),
            Err(Error::MomentNonexistence { .. })
        ));
        assert!(matches!(product_moment(&d, &MonomialExponents::new(vec![1, 2]), MC), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn derived_terms_reproduce_exact_moments() {
        let rows = [vec![1.5, 0.4, 0.2], vec![0.4, 1.0, -0.3], vec![0.2, -0.3, 0.8]];
        for fam in [GeneratorFamily::Laplace, GeneratorFamily::Logistic, GeneratorFamily::student_t(12.0).unwrap()] {
            let d = dist(fam.clone(), vec![0.7, -0.4, 0.2], &rows);
            for p in [vec![2, 0, 0], vec![3, 1, 0], vec![3, 2, 1], vec![4, 1, 2]] {
                let e = MonomialExponents::new(p.clone());
                let exact = elliptical_monomial_moment(&d, &e).unwrap();
                let sum: f64 = product_moment_terms(&d, &e)
                    .unwrap()
                    .iter()
                    .map(|t| {
                        t.coeff
                            * elliptical_monomial_moment(&d.at_level(t.level).unwrap(), &MonomialExponents::new(t.exponents.clone()))
                                .unwrap()
                    })
                    .sum();
                assert!((sum / exact - 1.0).abs() < 1e-9, "{fam} {p:?}: {sum} vs {exact}");
            }
        }
    }

    #[test]
    fn printed_terms_agree_when_mu1_or_p1_vanish() {
        let d = dist(GeneratorFamily::Laplace, vec![0.0, 0.5], &[vec![1.0, 0.3], vec![0.3, 1.0]]);
        let e = MonomialExponents::new(vec![3, 2]);
        let total = |terms: Vec<MonomialTerm>| -> f64 {
            terms
                .iter()
                .map(|t| {
                    t.coeff
                        * elliptical_monomial_moment(&d.at_level(t.level).unwrap(), &MonomialExponents::new(t.exponents.clone()))
                            .unwrap()
                })
                .sum()
        };
        let a = total(product_moment_terms(&d, &e).unwrap());
        let b = total(product_moment_terms_as_printed(&d, &e).unwrap());
        assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
    }

    #[test]
    fn gaussian_recursion_examples() {
        let one = SymMatrix::identity(1);
        assert_eq!(normal_product_moment(&[0.0], &one, &MonomialExponents::new(vec![4])).unwrap(), 3.0);
        let s = SymMatrix::from_rows(&[vec![2.5]]).unwrap();
        let v = normal_product_moment(&[1.2], &s, &MonomialExponents::new(vec![2])).unwrap();
        assert!((v - (2.5 + 1.44)).abs() < 1e-14);
        let rho = 0.35;
        let s = SymMatrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]).unwrap();
        let v = normal_product_moment(&[0.0, 0.0], &s, &MonomialExponents::new(vec![3, 1])).unwrap();
        assert!((v - 3.0 * rho).abs() < 1e-14);
    }

    #[test]
    fn gaussian_recursion_against_isserlis() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let s = random_spd(3, 0.3, &mut rng);
        let mu = [0.3, -0.7, 1.1];
        for p in [vec![2, 2, 2], vec![5, 0, 1], vec![1, 3, 4], vec![0, 0, 7]] {
            let e = MonomialExponents::new(p);
            let a = normal_product_moment(&mu, &s, &e).unwrap();
            let b = isserlis_moment(&mu, &s, &e).unwrap();
            assert!((a - b).abs() <= 1e-10 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn power_moment_examples() {
        let rho = 0.6;
        let d = dist(GeneratorFamily::Normal, vec![0.0, 0.0], &[vec![1.0, rho], vec![rho, 1.0]]);
        let q = Budget::Quadrature { nodes_per_dim: 12 };
        let e = normal_power_moment(&d, 2, &SmoothFunction::constant(1.0), q).unwrap();
        assert_eq!(e.value, 1.0);
        let e = normal_power_moment(&d, 4, &SmoothFunction::constant(1.0), q).unwrap();
        assert!((e.value - 3.0).abs() < 1e-9);
        let f = SmoothFunction::monomial(&MonomialExponents::new(vec![0, 1]), 1.0);
        let e = normal_power_moment(&d, 3, &f, q).unwrap();
        assert!((e.value - 3.0 * rho).abs() < 1e-9, "{}", e.value);
        let laplace = EllipticalDistribution::standard(2, GeneratorFamily::Laplace).unwrap();
        assert!(matches!(normal_power_moment(&laplace, 2, &f, q), Err(Error::FamilyMismatch(_))));
    }

    #[test]
    fn linearity_with_common_random_numbers() {
        let d = dist(GeneratorFamily::Logistic, vec![0.2, 0.1], &[vec![1.0, 0.2], vec![0.2, 1.0]]);
        let f1 = x2sq();
        let f2 = SmoothFunction::new(|x: &[f64]| (x[0] + x[1]).sin()).assert_regular();
        let combo = SmoothFunction::linear_combination(2.0, &f1, -0.5, &f2);
        let b = Budget::MonteCarlo { samples: 30_000, seed: 5 };
        let a1 = x1sq_moment_thm1(&d, &f1, b).unwrap().value;
        let a2 = x1sq_moment_thm1(&d, &f2, b).unwrap().value;
        let c = x1sq_moment_thm1(&d, &combo, b).unwrap().value;
        assert!((c - (2.0 * a1 - 0.5 * a2)).abs() < 1e-9 * (1.0 + c.abs()));
    }

    #[test]
    fn direct_mc_agrees_with_thm1_for_bounded_f() {
        let d = dist(GeneratorFamily::Laplace, vec![0.2, 0.0], &[vec![1.0, 0.3], vec![0.3, 1.0]]);
        let f = SmoothFunction::new(|x: &[f64]| (x[0] + x[1]).sin())
            .with_gradient(|x, g| {
                let c = (x[0] + x[1]).cos();
                g[0] = c;
                g[1] = c;
            })
            .with_hessian(|x, h| h.fill(-(x[0] + x[1]).sin()))
            .assert_regular();
        let t = x1sq_moment_thm1(&d, &f, Budget::MonteCarlo { samples: 400_000, seed: 2 }).unwrap();
        let m = mc_expectation(&d, |x| x[0] * x[0] * (x[0] + x[1]).sin(), 400_000, 3).unwrap();
        let se = (t.stderr.powi(2) + m.stderr.powi(2)).sqrt();
        assert!((t.value - m.mean).abs() < 3.0 * se, "{} vs {} ± {se}", t.value, m.mean);
    }
}
