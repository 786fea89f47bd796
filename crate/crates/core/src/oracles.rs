//! Ground truth that does not go through the moment identities: direct Monte
//! Carlo, tensor quadrature in whitened coordinates, exact product moments
//! (Gaussian pair partitions and their elliptical generalization) and
//! finite-difference derivative checks.

use rayon::prelude::*;

use crate::elliptical::{even_radial_moment, EllipticalDistribution};
use crate::error::{Error, Result};
use crate::generator_families::{GeneratorFamily, Level};
use crate::linalg::SymMatrix;
use crate::moments::{MonomialExponents, SmoothFunction};
use crate::partition::{PartitionPlan, Welford};
use crate::quadrature::gauss_legendre;

pub const ISSERLIS_DEGREE_LIMIT: u32 = 12;
/// Radial mass left outside the quadrature box. Far below what normalization
/// needs, so that polynomial integrands under heavy tails lose little.
pub const QUAD_TAIL_MASS: f64 = 1e-16;
const PANEL_RATIO: f64 = 0.35;
const INNER_PANEL: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McResult {
    pub mean: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
}

/// Sample mean of `h(X)` over `samples` draws.
pub fn mc_expectation<H>(d: &EllipticalDistribution, h: H, samples: usize, seed: u64) -> Result<McResult>
where
    H: Fn(&[f64]) -> f64 + Sync,
{
    if samples < 2 {
        return Err(Error::InvalidArgument("Monte Carlo needs at least 2 samples".into()));
    }
    let law = d.radial_law()?;
    let n = d.n();
    let plan = PartitionPlan::default();
    let chunk_size = plan.chunk_size;
    let parts = plan.run(seed, samples, |chunk, len, rng| {
        let mut acc = Welford::default();
        let mut y = vec![0.0; n];
        let mut x = vec![0.0; n];
        for k in 0..len {
            d.draw_with(&law, rng, &mut y, &mut x);
            let v = h(&x);
            if !v.is_finite() {
                return Err(Error::NonFinite { index: chunk * chunk_size + k, value: v });
            }
            acc.push(v);
        }
        Ok(acc)
    });
    let mut total = Welford::default();
    for p in parts {
        total.merge(&p?);
    }
    Ok(McResult { mean: total.mean(), stderr: total.stderr(), n_samples: samples, seed })
}

/// Half-width of a box in whitened coordinates holding all but
/// [`QUAD_TAIL_MASS`] of the radial law of `d`.
pub(crate) fn quadrature_radius(d: &EllipticalDistribution) -> Result<f64> {
    let r = d.radial_law()?.quantile_upper(QUAD_TAIL_MASS);
    if !r.is_finite() || r <= 0.0 {
        return Err(Error::NonConvergence { what: "quadrature truncation radius".into(), terms: 0 });
    }
    Ok(r)
}

/// Nodes and weights on `[−radius, radius]` with `nodes_per_panel`
/// Gauss–Legendre nodes per panel. Panel edges grow geometrically from the
/// origin, which resolves cusped generators at 0, but a panel is never wider
/// than `max(1.5, 0.75·start)`, which keeps light tails resolved while heavy
/// tails still reach a far radius in few panels.
pub(crate) fn whitened_axis(radius: f64, nodes_per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let mut edges = vec![0.0, INNER_PANEL.min(radius)];
    while *edges.last().expect("non-empty") < radius {
        let e = *edges.last().expect("non-empty");
        let width = (e / PANEL_RATIO - e).min((0.75 * e).max(1.5));
        edges.push((e + width).min(radius));
    }
    let (gx, gw) = gauss_legendre(nodes_per_panel.max(1));
    let mut half_nodes = Vec::new();
    let mut half_weights = Vec::new();
    for w in edges.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        for (x, wt) in gx.iter().zip(&gw) {
            half_nodes.push(mid + half * x);
            half_weights.push(half * wt);
        }
    }
    let mut nodes: Vec<f64> = half_nodes.iter().rev().map(|v| -v).collect();
    let mut weights: Vec<f64> = half_weights.iter().rev().copied().collect();
    nodes.extend(&half_nodes);
    weights.extend(&half_weights);
    (nodes, weights)
}

/// Sums `visit(y, w, acc)` over the `n`-fold tensor grid. Parallel over the
/// first axis, reduced in index order so results are reproducible.
pub(crate) fn grid_fold<F>(axis: &(Vec<f64>, Vec<f64>), n: usize, width: usize, visit: F) -> Vec<f64>
where
    F: Fn(&[f64], f64, &mut [f64]) + Sync,
{
    let (nodes, weights) = axis;
    let m = nodes.len();
    let inner_count = m.pow(n as u32 - 1);
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i0| {
            let mut acc = vec![0.0; width];
            let mut y = vec![0.0; n];
            y[0] = nodes[i0];
            for flat in 0..inner_count {
                let mut w = weights[i0];
                let mut rest = flat;
                for yk in y.iter_mut().skip(1) {
                    let idx = rest % m;
                    rest /= m;
                    *yk = nodes[idx];
                    w *= weights[idx];
                }
                visit(&y, w, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; width];
    for row in rows {
        for (t, r) in total.iter_mut().zip(row) {
            *t += r;
        }
    }
    total
}

/// `E h(X)` by tensor Gauss–Legendre after the substitution `y = A⁻¹(x−μ)`.
pub fn quad_expectation<H>(d: &EllipticalDistribution, h: H, nodes_per_dim: usize) -> Result<f64>
where
    H: Fn(&[f64]) -> f64 + Sync,
{
    let n = d.n();
    if n > 3 {
        return Err(Error::Dimension { n, reason: "tensor quadrature is limited to n ≤ 3".into() });
    }
    if !d.factor().is_full_rank() {
        return Err(Error::Singular("quadrature needs a full-rank scale matrix".into()));
    }
    let c = d.constants().constant(d.level())?;
    let axis = whitened_axis(quadrature_radius(d)?, nodes_per_dim);
    let sums = grid_fold(&axis, n, 1, |y, w, acc| {
        let half_sq = 0.5 * y.iter().map(|v| v * v).sum::<f64>();
        let g = d.triple().eval(d.level(), half_sq);
        if g == 0.0 {
            return;
        }
        let mut x = d.factor().apply(y);
        for (xi, mi) in x.iter_mut().zip(d.mu()) {
            *xi += mi;
        }
        acc[0] += w * c * g * h(&x);
    });
    Ok(sums[0])
}

/// Centered Gaussian moment `E[∏ Z_i^{q_i}]`, `Z ~ N(0, Σ)`, by matching the
/// first remaining index with each later one.
fn wick(sigma: &SymMatrix, idx: &mut Vec<usize>) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    if idx.len() % 2 == 1 {
        return 0.0;
    }
    let first = idx.remove(0);
    let mut total = 0.0;
    for k in 0..idx.len() {
        let s = sigma.get(first, idx[k]);
        if s == 0.0 {
            continue;
        }
        let partner = idx.remove(k);
        total += s * wick(sigma, idx);
        idx.insert(k, partner);
    }
    idx.insert(0, first);
    total
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Sum over `q ≤ p` of `∏ C(p_i, q_i) μ_i^{p_i−q_i} · weight(|q|) · Wick(Σ, q)`.
fn binomial_wick_sum<W>(mu: &[f64], sigma: &SymMatrix, p: &[u32], mut weight: W) -> Result<f64>
where
    W: FnMut(u32) -> Result<f64>,
{
    let n = p.len();
    let mut q = vec![0u32; n];
    let mut total = 0.0;
    loop {
        let deg: u32 = q.iter().sum();
        if deg % 2 == 0 {
            let mut coeff = 1.0;
            for i in 0..n {
                coeff *= binomial(p[i], q[i]);
                let rest = (p[i] - q[i]) as i32;
                if rest > 0 {
                    coeff *= mu[i].powi(rest);
                }
            }
            if coeff != 0.0 {
                let mut idx: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, q[i] as usize)).collect();
                let w = wick(sigma, &mut idx);
                if w != 0.0 {
                    total += coeff * weight(deg)? * w;
                }
            }
        }
        // Odometer over 0..=p_i.
        let mut k = 0;
        while k < n {
            if q[k] < p[k] {
                q[k] += 1;
                break;
            }
            q[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    Ok(total)
}

fn check_shapes(mu: &[f64], sigma: &SymMatrix, e: &MonomialExponents) -> Result<()> {
    if sigma.n() != mu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), got: sigma.n() });
    }
    if e.n() != mu.len() {
        return Err(Error::DimensionMismatch { expected: mu.len(), got: e.n() });
    }
    if e.degree() > ISSERLIS_DEGREE_LIMIT {
        return Err(Error::DegreeLimit { degree: e.degree(), limit: ISSERLIS_DEGREE_LIMIT });
    }
    Ok(())
}

/// `E[∏ X_i^{p_i}]` for `X ~ N(μ, Σ)`.
pub fn isserlis_moment(mu: &[f64], sigma: &SymMatrix, e: &MonomialExponents) -> Result<f64> {
    check_shapes(mu, sigma, e)?;
    binomial_wick_sum(mu, sigma, e.as_slice(), |_| Ok(1.0))
}

/// `E[∏ X_i^{p_i}]` for any elliptical `X`, at the level `d` carries.
///
/// With `X = μ + AY`, `Y = R·U`: a centered moment of degree `2m` is the
/// Gaussian one scaled by `E[R^{2m}] / E[χ_n^{2m}]`.
pub fn elliptical_monomial_moment(d: &EllipticalDistribution, e: &MonomialExponents) -> Result<f64> {
    check_shapes(d.mu(), d.sigma(), e)?;
    if let GeneratorFamily::StudentT { p } = d.family() {
        let drop = match d.level() {
            Level::Base => 0.0,
            Level::Star => 2.0,
            Level::DoubleStar => 4.0,
        };
        if e.degree() as f64 >= p - drop {
            return Err(Error::MomentNonexistence {
                degree: e.degree(),
                family: format!("{}{}", d.family(), d.level().suffix()),
            });
        }
    }
    let generator = d.generator()?;
    let n = d.n() as f64;
    let mut cache: Vec<Option<f64>> = vec![None; e.degree() as usize / 2 + 1];
    binomial_wick_sum(d.mu(), d.sigma(), e.as_slice(), |deg| {
        let m = deg as usize / 2;
        if m == 0 {
            return Ok(1.0);
        }
        if let Some(v) = cache[m] {
            return Ok(v);
        }
        let chi = (0..m).map(|k| n + 2.0 * k as f64).product::<f64>();
        let v = if d.family().is_normal() { 1.0 } else { even_radial_moment(&generator, m)? / chi };
        cache[m] = Some(v);
        Ok(v)
    })
}

/// Largest relative deviations of supplied derivatives from central
/// differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    pub max_grad_deviation: f64,
    pub max_hess_deviation: f64,
    pub pass: bool,
}

pub const FD_TOLERANCE: f64 = 1e-4;

fn deviation(supplied: &[f64], fd: &[f64]) -> f64 {
    let scale = fd.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    supplied
        .iter()
        .zip(fd)
        .map(|(s, f)| (s - f).abs() / f.abs().max(1e-2 * scale).max(1e-8))
        .fold(0.0, f64::max)
}

pub fn finite_diff_check(f: &SmoothFunction, points: &[Vec<f64>]) -> FdReport {
    let mut grad_dev = 0.0f64;
    let mut hess_dev = 0.0f64;
    for x in points {
        let n = x.len();
        if f.has_gradient() {
            let mut supplied = vec![0.0; n];
            let mut fd = vec![0.0; n];
            f.gradient_into(x, &mut supplied);
            f.fd_gradient_into(x, &mut fd);
            grad_dev = grad_dev.max(deviation(&supplied, &fd));
        }
        if f.has_hessian() {
            let mut supplied = vec![0.0; n * n];
            let mut fd = vec![0.0; n * n];
            f.hessian_into(x, &mut supplied);
            f.fd_hessian_into(x, &mut fd);
            hess_dev = hess_dev.max(deviation(&supplied, &fd));
        }
    }
    // NaN deviations must fail.
    let pass = grad_dev <= FD_TOLERANCE && hess_dev <= FD_TOLERANCE;
    FdReport { max_grad_deviation: grad_dev, max_hess_deviation: hess_dev, pass }
}
