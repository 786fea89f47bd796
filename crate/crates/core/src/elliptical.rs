//! Elliptical distributions `X = μ + A Y` with `A Aᵀ = Σ` and `Y` spherical.
//!
//! `Y` is drawn as `R·U` with `U` uniform on the sphere and `R` from the
//! [`RadialLaw`]. Rank-deficient `Σ` is handled by the same map: the law of
//! `μ + A Y` depends on `A` only through `A Aᵀ`.

use std::sync::{Arc, OnceLock};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::generator_families::{
    generator_triple, normalizing_constants, radial_moment_integral, GeneratorFamily, GeneratorTriple, Level,
    LevelGenerator, NormalizingConstants,
};
use crate::interp::{bracket, hermite, limit_slopes};
use crate::linalg::{factor, mahalanobis_half, LowerFactor, SymMatrix};
use crate::partition::PartitionPlan;
use crate::quadrature::{integrate, integrate_to_infinity, QuadControl};
use crate::special_functions::log_gamma;

/// How radii are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerKind {
    /// `Y ~ N(0, I)`.
    ExactNormal,
    /// `R ~ Gamma(n, 1)`.
    ExactLaplace,
    /// `Y = Z·√(p/W)`, `W ~ χ²_p`.
    ExactStudent { p: f64 },
    /// Inverse CDF from the tabulated radial law.
    Tabulated,
}

const RADIAL_NODES: usize = 2048;
const TAIL_MASS: f64 = 1e-9;

/// Law of the Mahalanobis radius `R = ‖A⁻¹(X − μ)‖`,
/// `f_R(r) = c·(2π^{n/2}/Γ(n/2))·r^{n−1} h(r²/2)`.
#[derive(Debug, Clone)]
pub struct RadialLaw {
    n: usize,
    generator: LevelGenerator,
    log_norm: f64,
    kind: SamplerKind,
    r: Vec<f64>,
    cdf: Vec<f64>,
    cdf_slope: Vec<f64>,
    sf: Vec<f64>,
    sf_slope: Vec<f64>,
    // Quantile tables: r against F on the lower half, r against S (ascending) on the upper half.
    q_lo_slope: Vec<f64>,
    s_asc: Vec<f64>,
    r_desc: Vec<f64>,
    q_hi_slope: Vec<f64>,
    tail_index: f64,
    mass_discrepancy: f64,
}

impl RadialLaw {
    pub fn new(generator: LevelGenerator, kind: SamplerKind) -> Result<Self> {
        let n = generator.n();
        let nf = n as f64;
        let log_norm = generator.constant().ln() + 2f64.ln() + (nf / 2.0) * std::f64::consts::PI.ln()
            - log_gamma(nf / 2.0)?;
        let gen = generator.clone();
        let density = move |r: f64| {
            if r <= 0.0 {
                return if n == 1 { (log_norm).exp() * gen.density(0.0) } else { 0.0 };
            }
            (log_norm + (nf - 1.0) * r.ln()).exp() * gen.density(0.5 * r * r)
        };
        let ctrl = QuadControl { rel_tol: 1e-12, abs_tol: 1e-300, max_panels: 1000 };

        let h0 = generator.density(0.0);
        let near_zero = log_norm.exp() * h0;
        let mut r_lo = if h0 > 0.0 { (nf * TAIL_MASS / near_zero).powf(1.0 / nf) } else { 1e-3 };
        r_lo = r_lo.min(0.5);
        let mut r_hi = 1.0f64.max(2.0 * r_lo);
        let mut s_hi = integrate_to_infinity(&density, r_hi, r_hi, ctrl)?.value;
        while s_hi > TAIL_MASS {
            r_hi *= 2.0;
            if r_hi > 1e30 {
                return Err(Error::NonConvergence { what: "radial tail search".into(), terms: 100 });
            }
            s_hi = integrate_to_infinity(&density, r_hi, r_hi, ctrl)?.value;
        }
        let f_lo = integrate(&density, 0.0, r_lo, ctrl)?.value;

        let step = (r_hi / r_lo).ln() / (RADIAL_NODES - 1) as f64;
        let mut r: Vec<f64> = (0..RADIAL_NODES).map(|i| r_lo * (step * i as f64).exp()).collect();
        r[RADIAL_NODES - 1] = r_hi;
        let mut inc = Vec::with_capacity(RADIAL_NODES - 1);
        for w in r.windows(2) {
            inc.push(integrate(&density, w[0], w[1], ctrl)?.value);
        }
        let total = f_lo + inc.iter().sum::<f64>() + s_hi;
        let mass_discrepancy = (total - 1.0).abs();

        let mut cdf = Vec::with_capacity(RADIAL_NODES);
        let mut acc = f_lo;
        cdf.push(acc / total);
        for v in &inc {
            acc += v;
            cdf.push(acc / total);
        }
        let mut sf = vec![0.0; RADIAL_NODES];
        let mut acc = s_hi;
        sf[RADIAL_NODES - 1] = acc / total;
        for i in (0..RADIAL_NODES - 1).rev() {
            acc += inc[i];
            sf[i] = acc / total;
        }
        let dens: Vec<f64> = r.iter().map(|&v| density(v) / total).collect();
        if dens.iter().any(|d| !d.is_finite()) {
            return Err(Error::Domain("radial density is not finite on its table".into()));
        }

        let mut cdf_slope = dens.clone();
        limit_slopes(&r, &cdf, &mut cdf_slope);
        let mut sf_slope: Vec<f64> = dens.iter().map(|d| -d).collect();
        limit_slopes(&r, &sf, &mut sf_slope);
        let inv = |d: f64| if d > 0.0 { 1.0 / d } else { f64::MAX.sqrt() };
        let mut q_lo_slope: Vec<f64> = dens.iter().map(|&d| inv(d)).collect();
        limit_slopes(&cdf, &r, &mut q_lo_slope);
        let s_asc: Vec<f64> = sf.iter().rev().copied().collect();
        let r_desc: Vec<f64> = r.iter().rev().copied().collect();
        let mut q_hi_slope: Vec<f64> = dens.iter().rev().map(|&d| -inv(d)).collect();
        limit_slopes(&s_asc, &r_desc, &mut q_hi_slope);

        let tail_index = (r_hi * dens[RADIAL_NODES - 1] / sf[RADIAL_NODES - 1]).max(1e-3);
        Ok(RadialLaw {
            n,
            generator,
            log_norm: log_norm - total.ln(),
            kind,
            r,
            cdf,
            cdf_slope,
            sf,
            sf_slope,
            q_lo_slope,
            s_asc,
            r_desc,
            q_hi_slope,
            tail_index,
            mass_discrepancy,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> SamplerKind {
        self.kind
    }

    pub fn generator(&self) -> &LevelGenerator {
        &self.generator
    }

    /// `|∫ f_R − 1|` before the table was renormalized.
    pub fn mass_discrepancy(&self) -> f64 {
        self.mass_discrepancy
    }

    pub fn density(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return if self.n == 1 { self.log_norm.exp() * self.generator.density(0.0) } else { 0.0 };
        }
        (self.log_norm + (self.n as f64 - 1.0) * r.ln()).exp() * self.generator.density(0.5 * r * r)
    }

    fn r_lo(&self) -> f64 {
        self.r[0]
    }

    fn r_hi(&self) -> f64 {
        self.r[RADIAL_NODES - 1]
    }

    pub fn cdf(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r <= self.r_lo() {
            return self.cdf[0] * (r / self.r_lo()).powi(self.n as i32);
        }
        let k = bracket(&self.r, r);
        if r >= self.r_hi() || self.cdf[k] > 0.5 {
            return 1.0 - self.sf(r);
        }
        hermite(self.r[k], self.r[k + 1], self.cdf[k], self.cdf[k + 1], self.cdf_slope[k], self.cdf_slope[k + 1], r)
    }

    /// `P(R > r)`.
    pub fn sf(&self, r: f64) -> f64 {
        let s_hi = self.s_asc[0];
        if r >= self.r_hi() {
            return s_hi * (r / self.r_hi()).powf(-self.tail_index);
        }
        let k = bracket(&self.r, r);
        if r <= self.r_lo() || self.cdf[k] <= 0.5 {
            return 1.0 - self.cdf(r);
        }
        hermite(self.r[k], self.r[k + 1], self.sf[k], self.sf[k + 1], self.sf_slope[k], self.sf_slope[k + 1], r)
    }

    /// Inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= 0.5 {
            self.quantile_lower(u)
        } else {
            self.quantile_upper(1.0 - u)
        }
    }

    fn quantile_lower(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u <= self.cdf[0] {
            return self.r_lo() * (u / self.cdf[0]).powf(1.0 / self.n as f64);
        }
        let k = bracket(&self.cdf, u);
        hermite(self.cdf[k], self.cdf[k + 1], self.r[k], self.r[k + 1], self.q_lo_slope[k], self.q_lo_slope[k + 1], u)
    }

    /// Radius with survival probability `s`.
    pub fn quantile_upper(&self, s: f64) -> f64 {
        if s <= self.s_asc[0] {
            if s <= 0.0 {
                return f64::INFINITY;
            }
            return self.r_hi() * (s / self.s_asc[0]).powf(-1.0 / self.tail_index);
        }
        if s >= *self.s_asc.last().expect("table is non-empty") {
            return self.quantile_lower(1.0 - s);
        }
        let k = bracket(&self.s_asc, s);
        hermite(
            self.s_asc[k],
            self.s_asc[k + 1],
            self.r_desc[k],
            self.r_desc[k + 1],
            self.q_hi_slope[k],
            self.q_hi_slope[k + 1],
            s,
        )
    }

    /// `E[R^{2m}] = c·(2π)^{n/2}/Γ(n/2) · 2^m ∫ t^{n/2+m−1} h(t) dt`.
    pub fn even_moment(&self, m: usize) -> Result<f64> {
        even_radial_moment(&self.generator, m)
    }

    /// Fills `y` with one draw of the spherical vector `Y`.
    pub fn draw(&self, rng: &mut ChaCha8Rng, y: &mut [f64]) {
        for v in y.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let radius = match self.kind {
            SamplerKind::ExactNormal => return,
            SamplerKind::ExactStudent { p } => {
                let w: f64 = ChiSquared::new(p).expect("p > 0").sample(rng);
                let scale = (p / w).sqrt();
                y.iter_mut().for_each(|v| *v *= scale);
                return;
            }
            SamplerKind::ExactLaplace => Gamma::new(self.n as f64, 1.0).expect("n > 0").sample(rng),
            SamplerKind::Tabulated => self.quantile(rng.random::<f64>()),
        };
        scale_to_radius(y, radius);
    }
}

/// Rescales a nonzero vector to Euclidean norm `radius`.
pub(crate) fn scale_to_radius(y: &mut [f64], radius: f64) {
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        let s = radius / norm;
        y.iter_mut().for_each(|v| *v *= s);
    }
}

pub(crate) fn even_radial_moment(generator: &LevelGenerator, m: usize) -> Result<f64> {
    let n = generator.n();
    let nf = n as f64;
    let integral = radial_moment_integral(|t| generator.density(t), n + 2 * m)?;
    let log = generator.constant().ln() + (nf / 2.0) * (2.0 * std::f64::consts::PI).ln() - log_gamma(nf / 2.0)?
        + (m as f64) * 2f64.ln()
        + integral.ln();
    Ok(log.exp())
}

struct Chain {
    triple: GeneratorTriple,
    constants: NormalizingConstants,
    laws: [OnceLock<Result<Arc<RadialLaw>>>; 3],
}

fn level_index(level: Level) -> usize {
    match level {
        Level::Base => 0,
        Level::Star => 1,
        Level::DoubleStar => 2,
    }
}

/// `E_n(μ, Σ, h)` where `h` is one level of a family's generator chain.
#[derive(Clone)]
pub struct EllipticalDistribution {
    mu: Vec<f64>,
    sigma: SymMatrix,
    family: GeneratorFamily,
    level: Level,
    factor: LowerFactor,
    chain: Arc<Chain>,
}

impl std::fmt::Debug for EllipticalDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticalDistribution")
            .field("family", &self.family.to_string())
            .field("level", &self.level)
            .field("mu", &self.mu)
            .field("sigma", &self.sigma)
            .finish()
    }
}

impl EllipticalDistribution {
    pub fn new(mu: Vec<f64>, sigma: SymMatrix, family: GeneratorFamily) -> Result<Self> {
        let n = mu.len();
        if n == 0 {
            return Err(Error::InvalidArgument("location vector is empty".into()));
        }
        if sigma.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: sigma.n() });
        }
        if let Some(i) = mu.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i, value: mu[i] });
        }
        let factor = factor(&sigma)?;
        let triple = generator_triple(&family, n)?;
        let constants = normalizing_constants(&family, n)?;
        let chain = Chain { triple, constants, laws: Default::default() };
        Ok(EllipticalDistribution { mu, sigma, family, level: Level::Base, factor, chain: Arc::new(chain) })
    }

    /// `E_n(0, I, family)`.
    pub fn standard(n: usize, family: GeneratorFamily) -> Result<Self> {
        Self::new(vec![0.0; n], SymMatrix::identity(n), family)
    }

    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn sigma(&self) -> &SymMatrix {
        &self.sigma
    }

    pub fn family(&self) -> &GeneratorFamily {
        &self.family
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn factor(&self) -> &LowerFactor {
        &self.factor
    }

    pub fn triple(&self) -> &GeneratorTriple {
        &self.chain.triple
    }

    /// Constants of the underlying family (not of this level alone).
    pub fn constants(&self) -> &NormalizingConstants {
        &self.chain.constants
    }

    pub fn generator(&self) -> Result<LevelGenerator> {
        LevelGenerator::new(self.chain.triple.clone(), self.level, &self.chain.constants)
    }

    /// Same `μ`, `Σ` and family at another level of the generator chain.
    pub fn at_level(&self, level: Level) -> Result<Self> {
        self.chain.triple.check_level(level)?;
        self.chain.constants.constant(level)?;
        Ok(EllipticalDistribution { level, ..self.clone() })
    }

    /// `(X*, X**)`.
    pub fn associated_distributions(&self) -> Result<(Self, Self)> {
        Ok((self.at_level(Level::Star)?, self.at_level(Level::DoubleStar)?))
    }

    /// Same family with a different location (shares cached tables).
    pub fn with_mu(&self, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: mu.len() });
        }
        Ok(EllipticalDistribution { mu, ..self.clone() })
    }

    pub fn sampler_kind(&self) -> SamplerKind {
        match (&self.family, self.level) {
            (GeneratorFamily::Normal, _) => SamplerKind::ExactNormal,
            (GeneratorFamily::Laplace, Level::Base) => SamplerKind::ExactLaplace,
            (GeneratorFamily::StudentT { p }, Level::Base) => SamplerKind::ExactStudent { p: *p },
            _ => SamplerKind::Tabulated,
        }
    }

    /// Radial law of this level, built once and shared by every
    /// distribution derived from the same family object.
    pub fn radial_law(&self) -> Result<Arc<RadialLaw>> {
        self.radial_law_at(self.level)
    }

    pub fn radial_law_at(&self, level: Level) -> Result<Arc<RadialLaw>> {
        let other = self.at_level(level)?;
        let kind = other.sampler_kind();
        self.chain.laws[level_index(level)]
            .get_or_init(|| {
                let generator = other.generator()?;
                RadialLaw::new(generator, kind).map(Arc::new)
            })
            .clone()
    }

    /// Density of the form `c/√|Σ| · h(½(x−μ)ᵀΣ⁻¹(x−μ))`.
    pub fn pdf(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: x.len() });
        }
        if !self.factor.is_full_rank() {
            return Err(Error::Singular("the density does not exist for a singular scale matrix".into()));
        }
        let q = mahalanobis_half(&self.factor, x, &self.mu)?;
        let c = self.chain.constants.constant(self.level)?;
        Ok((c.ln() - 0.5 * self.factor.log_det()?).exp() * self.chain.triple.eval(self.level, q))
    }

    /// `‖A⁻¹(x − μ)‖`.
    pub fn mahalanobis_radius(&self, x: &[f64]) -> Result<f64> {
        Ok((2.0 * mahalanobis_half(&self.factor, x, &self.mu)?).sqrt())
    }

    /// Covariance scale `k` with `Cov(X) = kΣ`: `b*` for `X`, `b**/b*` for `X*`.
    pub fn covariance_scale(&self) -> Result<f64> {
        let c = &self.chain.constants;
        match self.level {
            Level::Base => c.b_star().map_err(|_| self.no_second_moment()),
            Level::Star => Ok(c.b_dstar().map_err(|_| self.no_second_moment())? / c.b_star()?),
            Level::DoubleStar => {
                let g = self.generator()?;
                even_radial_moment(&g, 1)
                    .map(|m2| m2 / self.n() as f64)
                    .map_err(|_| self.no_second_moment())
            }
        }
    }

    fn no_second_moment(&self) -> Error {
        Error::MomentNonexistence { degree: 2, family: format!("{}{}", self.family, self.level.suffix()) }
    }

    pub fn covariance(&self) -> Result<SymMatrix> {
        Ok(self.sigma.scaled(self.covariance_scale()?))
    }

    /// Writes one draw into `x`, using `y` as scratch for the spherical part.
    pub fn draw_with(&self, law: &RadialLaw, rng: &mut ChaCha8Rng, y: &mut [f64], x: &mut [f64]) {
        law.draw(rng, y);
        self.factor.apply_into(y, x);
        for (xi, mi) in x.iter_mut().zip(&self.mu) {
            *xi += mi;
        }
    }

    /// `count` draws, deterministic in `(seed, count)` under the default
    /// partition plan.
    pub fn sample(&self, seed: u64, count: usize) -> Result<Vec<Vec<f64>>> {
        self.sample_with_plan(seed, count, PartitionPlan::default())
    }

    pub fn sample_with_plan(&self, seed: u64, count: usize, plan: PartitionPlan) -> Result<Vec<Vec<f64>>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        let law = self.radial_law()?;
        let n = self.n();
        let chunks = plan.run(seed, count, |_, len, rng| {
            let mut y = vec![0.0; n];
            (0..len)
                .map(|_| {
                    let mut x = vec![0.0; n];
                    self.draw_with(&law, rng, &mut y, &mut x);
                    x
                })
                .collect::<Vec<_>>()
        });
        Ok(chunks.into_iter().flatten().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Welford;
    use std::f64::consts::PI;

    fn families() -> Vec<GeneratorFamily> {
        vec![
            GeneratorFamily::Normal,
            GeneratorFamily::student_t(5.0).unwrap(),
            GeneratorFamily::Logistic,
            GeneratorFamily::Laplace,
        ]
    }

    #[test]
    fn pdf_at_origin() {
        let d = EllipticalDistribution::standard(2, GeneratorFamily::Normal).unwrap();
        assert!((d.pdf(&[0.0, 0.0]).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        let d = EllipticalDistribution::standard(2, GeneratorFamily::Laplace).unwrap();
        assert!((d.pdf(&[0.0, 0.0]).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn student_pdf_matches_textbook_formula() {
        let p = 5.0;
        let sigma = SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let mu = vec![0.5, -1.0];
        let d = EllipticalDistribution::new(mu.clone(), sigma.clone(), GeneratorFamily::student_t(p).unwrap()).unwrap();
        let x = [1.7, 0.2];
        // Γ((p+n)/2) / (Γ(p/2) (pπ)^{n/2} √|Σ|) · (1 + δᵀΣ⁻¹δ/p)^{−(p+n)/2}
        let det = 2.0 * 1.0 - 0.09;
        let (d0, d1) = (x[0] - mu[0], x[1] - mu[1]);
        let quad = (1.0 * d0 * d0 - 2.0 * 0.3 * d0 * d1 + 2.0 * d1 * d1) / det;
        let lg = |v: f64| log_gamma(v).unwrap();
        let expected = (lg(3.5) - lg(2.5) - (p * PI).ln() - 0.5 * det.ln()).exp() * (1.0 + quad / p).powf(-3.5);
        assert!((d.pdf(&x).unwrap() / expected - 1.0).abs() < 1e-13);
    }

    #[test]
    fn singular_sigma_has_no_density_but_samples() {
        let sigma = SymMatrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let d = EllipticalDistribution::new(vec![0.0, 0.0], sigma, GeneratorFamily::Normal).unwrap();
        assert!(matches!(d.pdf(&[0.0, 0.0]), Err(Error::Singular(_))));
        for x in d.sample(3, 100).unwrap() {
            assert!((x[0] - x[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn sample_is_deterministic_and_empty_for_zero() {
        let d = EllipticalDistribution::standard(3, GeneratorFamily::Logistic).unwrap();
        assert!(d.sample(1, 0).unwrap().is_empty());
        assert_eq!(d.sample(9, 40_000).unwrap(), d.sample(9, 40_000).unwrap());
        assert_ne!(d.sample(9, 10).unwrap(), d.sample(10, 10).unwrap());
    }

    #[test]
    fn radial_tables_are_normalized_and_monotone() {
        for fam in families() {
            for n in [1, 2, 5] {
                let d = EllipticalDistribution::standard(n, fam.clone()).unwrap();
                for level in [Level::Base, Level::Star, Level::DoubleStar] {
                    let law = d.radial_law_at(level).unwrap();
                    assert!(law.mass_discrepancy() < 1e-8, "{fam} n={n} {level:?}: {}", law.mass_discrepancy());
                    assert!(law.cdf.windows(2).all(|w| w[1] >= w[0]), "{fam} n={n}");
                    assert!(law.s_asc.windows(2).all(|w| w[1] > w[0]), "{fam} n={n}");
                    for u in [1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1.0 - 1e-8] {
                        let r = law.quantile(u);
                        assert!((law.cdf(r) - u).abs() < 1e-9 * (1.0 + u / (1.0 - u).max(1e-3)), "{fam} n={n} u={u}");
                    }
                }
            }
        }
    }

    #[test]
    fn normal_radial_cdf_is_chi() {
        // n = 2: F(r) = 1 − e^{−r²/2}
        let d = EllipticalDistribution::standard(2, GeneratorFamily::Normal).unwrap();
        let law = d.radial_law().unwrap();
        for r in [0.01, 0.5, 1.0, 2.5, 5.0] {
            assert!((law.cdf(r) - (1.0 - (-r * r / 2.0f64).exp())).abs() < 1e-11, "r={r}");
        }
    }

    #[test]
    fn laplace_mean_radius() {
        let d = EllipticalDistribution::standard(2, GeneratorFamily::Laplace).unwrap();
        let mut w = Welford::default();
        for x in d.sample(11, 100_000).unwrap() {
            w.push(d.mahalanobis_radius(&x).unwrap());
        }
        assert!((w.mean() - 2.0).abs() < 3.0 * w.stderr(), "{} ± {}", w.mean(), w.stderr());
    }

    #[test]
    fn even_moments_match_covariance_scale() {
        for fam in families() {
            let d = EllipticalDistribution::standard(3, fam.clone()).unwrap();
            let law = d.radial_law().unwrap();
            let m2 = law.even_moment(1).unwrap() / 3.0;
            assert!((m2 / d.covariance_scale().unwrap() - 1.0).abs() < 1e-9, "{fam}");
        }
    }

    #[test]
    fn student_star_covariance_scale() {
        let d = EllipticalDistribution::standard(2, GeneratorFamily::student_t(8.0).unwrap()).unwrap();
        let (star, _) = d.associated_distributions().unwrap();
        assert!((star.covariance_scale().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn associated_gates() {
        let d = EllipticalDistribution::standard(2, GeneratorFamily::student_t(3.0).unwrap()).unwrap();
        assert!(d.at_level(Level::Star).is_ok());
        assert!(matches!(d.associated_distributions(), Err(Error::Validity(_))));
    }

    #[test]
    fn normal_associated_are_identical() {
        let d = EllipticalDistribution::standard(2, GeneratorFamily::Normal).unwrap();
        let (s, ss) = d.associated_distributions().unwrap();
        let x = [0.3, -1.2];
        assert_eq!(d.pdf(&x).unwrap(), s.pdf(&x).unwrap());
        assert_eq!(d.pdf(&x).unwrap(), ss.pdf(&x).unwrap());
        assert_eq!(d.sample(5, 100).unwrap(), s.sample(5, 100).unwrap());
    }
}
