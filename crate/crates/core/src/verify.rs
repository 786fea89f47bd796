//! The verification suite behind `ellipmoment verify`.
//!
//! Each criterion is a function returning [`Run`]s; [`run_all`] collects them
//! into a [`VerificationReport`] together with two adjudication tables: the
//! Student-t covariance constants next to their printed simplifications, and
//! the product-moment expansion derived from the first identity next to the
//! displayed one.
//!
//! Reals are written with 17 significant digits and the report carries no
//! timing, so a given `(seed, samples)` always yields the same bytes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::ser::Error as _;
use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

use crate::elliptical::EllipticalDistribution;
use crate::error::Result;
use crate::generator_families::{
    constant_by_quadrature, generator_triple, normalizing_constants,
    student_t_printed_simplifications, GeneratorFamily, Level,
};
use crate::linalg::{random_spd, SymMatrix};
use crate::moments::{
    normal_product_moment, product_moment_terms, product_moment_terms_as_printed, thm1_coefficients,
    thm2_coefficients, x1sq_moment_thm1, Budget, InnerExpectations, MonomialExponents, MonomialTerm, SmoothFunction,
};
use crate::oracles::{elliptical_monomial_moment, isserlis_moment, mc_expectation};
use crate::partition::{PartitionPlan, Welford};

pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_SAMPLES: usize = 1_000_000;

/// Run parameters. `samples` is the per-estimate Monte Carlo size of the
/// identity-vs-MC checks; the covariance checks use twice that and the
/// radial KS checks a tenth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { seed: DEFAULT_SEED, samples: DEFAULT_SAMPLES }
    }
}

pub(crate) fn real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        RawValue::from_string(format!("{v:.16e}")).map_err(S::Error::custom)?.serialize(s)
    } else {
        s.serialize_none()
    }
}

fn reals<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        let raw = if x.is_finite() {
            Some(RawValue::from_string(format!("{x:.16e}")).map_err(S::Error::custom)?)
        } else {
            None
        };
        seq.serialize_element(&raw)?;
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Run {
    pub check: String,
    pub criterion: u32,
    pub family: String,
    pub n: usize,
    #[serde(serialize_with = "real")]
    pub expected: f64,
    #[serde(serialize_with = "real")]
    pub got: f64,
    #[serde(serialize_with = "real")]
    pub tolerance: f64,
    pub pass: bool,
}

impl Run {
    fn new(check: impl Into<String>, criterion: u32, family: &str, n: usize, expected: f64, got: f64, tolerance: f64) -> Self {
        let pass = (got - expected).abs() <= tolerance;
        Run { check: check.into(), criterion, family: family.to_string(), n, expected, got, tolerance, pass }
    }

    fn relative(check: impl Into<String>, criterion: u32, family: &str, n: usize, expected: f64, got: f64, rel: f64) -> Self {
        Run::new(check, criterion, family, n, expected, got, rel * expected.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub seed: u64,
    pub samples: usize,
    pub version: String,
}

/// Student-t `b*`, `b**` by quadrature, by formula, and as printed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudentTConstants {
    #[serde(serialize_with = "real")]
    pub p: f64,
    pub n: usize,
    #[serde(serialize_with = "real")]
    pub b_star_quadrature: f64,
    #[serde(serialize_with = "real")]
    pub b_star_formula: f64,
    #[serde(serialize_with = "real")]
    pub b_star_printed: f64,
    #[serde(serialize_with = "real")]
    pub b_dstar_quadrature: f64,
    #[serde(serialize_with = "real")]
    pub b_dstar_formula: f64,
    #[serde(serialize_with = "real")]
    pub b_dstar_printed: f64,
    pub formula_matches: bool,
    pub printed_matches: bool,
}

/// One product moment through both expansions, the exact oracle and MC.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductExpansion {
    pub family: String,
    pub exponents: Vec<u32>,
    #[serde(serialize_with = "reals")]
    pub mu: Vec<f64>,
    #[serde(serialize_with = "real")]
    pub exact: f64,
    #[serde(serialize_with = "real")]
    pub derived: f64,
    #[serde(serialize_with = "real")]
    pub printed: f64,
    #[serde(serialize_with = "real")]
    pub mc: f64,
    #[serde(serialize_with = "real")]
    pub mc_stderr: f64,
    pub derived_matches_exact: bool,
    pub printed_matches_exact: bool,
    pub derived_within_3_stderr: bool,
    pub printed_within_3_stderr: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub metadata: Metadata,
    pub pass: bool,
    pub runs: Vec<Run>,
    pub student_t_constants: Vec<StudentTConstants>,
    pub product_expansion: Vec<ProductExpansion>,
}

impl VerificationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Families named by the constants criteria.
pub fn constant_families() -> Vec<GeneratorFamily> {
    vec![
        GeneratorFamily::Normal,
        GeneratorFamily::StudentT { p: 5.0 },
        GeneratorFamily::StudentT { p: 6.0 },
        GeneratorFamily::StudentT { p: 10.0 },
        GeneratorFamily::Logistic,
        GeneratorFamily::Laplace,
    ]
}

const LEVELS: [Level; 3] = [Level::Base, Level::Star, Level::DoubleStar];

fn level_name(level: Level) -> &'static str {
    match level {
        Level::Base => "c_n",
        Level::Star => "c_n_star",
        Level::DoubleStar => "c_n_dstar",
    }
}

/// Closed-form constants against radial quadrature.
pub fn criterion_1() -> Result<Vec<Run>> {
    let mut runs = Vec::new();
    for fam in constant_families() {
        let tol = if matches!(fam, GeneratorFamily::Logistic) { 1e-7 } else { 1e-9 };
        for n in [1, 2, 3, 5] {
            let c = normalizing_constants(&fam, n)?;
            let triple = generator_triple(&fam, n)?;
            for level in LEVELS {
                let Ok(stored) = c.constant(level) else { continue };
                let quad = constant_by_quadrature(|t| triple.eval(level, t), n)?;
                runs.push(Run::relative(format!("{} closed form vs quadrature", level_name(level)), 1, &fam.to_string(), n, stored, quad, tol));
            }
        }
    }
    Ok(runs)
}

/// Printed constant values.
pub fn criterion_2() -> Result<Vec<Run>> {
    let pi = std::f64::consts::PI;
    let series = normalizing_constants(&GeneratorFamily::Logistic, 2)?.c_n();
    let triple = generator_triple(&GeneratorFamily::Logistic, 2)?;
    let quad = constant_by_quadrature(|t| triple.g(t), 2)?;
    let mut runs = vec![
        Run::relative("logistic c_2 (series) = 1/pi", 2, "logistic", 2, 1.0 / pi, series, 1e-10),
        Run::relative("logistic c_2 (quadrature) = 1/pi", 2, "logistic", 2, 1.0 / pi, quad, 1e-10),
    ];
    for n in 1..=5 {
        let c = normalizing_constants(&GeneratorFamily::Laplace, n)?;
        let nf = n as f64;
        runs.push(Run::relative("laplace b_star = n+1", 2, "laplace", n, nf + 1.0, c.b_star()?, 1e-10));
        runs.push(Run::relative("laplace b_dstar = (n+1)(n+3)", 2, "laplace", n, (nf + 1.0) * (nf + 3.0), c.b_dstar()?, 1e-10));
    }
    for n in [1, 2, 3, 5] {
        let c = normalizing_constants(&GeneratorFamily::Normal, n)?;
        runs.push(Run::new("normal b_star = 1 exactly", 2, "normal", n, 1.0, c.b_star()?, 0.0));
        runs.push(Run::new("normal b_dstar = 1 exactly", 2, "normal", n, 1.0, c.b_dstar()?, 0.0));
    }
    Ok(runs)
}

/// Families of the covariance check. Student-t uses p = 10: the standard
/// error of a sample covariance of `X*` needs fourth moments of `X*`, which
/// exist only for p > 6.
pub fn covariance_families() -> Vec<GeneratorFamily> {
    vec![GeneratorFamily::Normal, GeneratorFamily::StudentT { p: 10.0 }, GeneratorFamily::Logistic, GeneratorFamily::Laplace]
}

/// Sample covariance entries with standard errors; `μ` is known.
fn sample_covariance(d: &EllipticalDistribution, count: usize, seed: u64) -> Result<[(f64, f64); 3]> {
    let law = d.radial_law()?;
    let parts = PartitionPlan::default().run(seed, count, |_, len, rng| {
        let mut acc = [Welford::default(); 3];
        let (mut y, mut x) = ([0.0; 2], [0.0; 2]);
        for _ in 0..len {
            d.draw_with(&law, rng, &mut y, &mut x);
            let (a, b) = (x[0] - d.mu()[0], x[1] - d.mu()[1]);
            acc[0].push(a * a);
            acc[1].push(a * b);
            acc[2].push(b * b);
        }
        acc
    });
    let mut acc = [Welford::default(); 3];
    for p in &parts {
        for (a, b) in acc.iter_mut().zip(p) {
            a.merge(b);
        }
    }
    Ok(acc.map(|w| (w.mean(), w.stderr())))
}

/// `Cov(X) = b*Σ` and `Cov(X*) = (b**/b*)Σ` from draws.
pub fn criterion_3(cfg: VerifyConfig) -> Result<Vec<Run>> {
    let sigma = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]])?;
    let count = 2 * cfg.samples;
    let mut runs = Vec::new();
    for (k, fam) in covariance_families().into_iter().enumerate() {
        let d = EllipticalDistribution::new(vec![0.0, 0.0], sigma.clone(), fam.clone())?;
        let c = d.constants();
        for (j, (level, scale, label)) in [
            (Level::Base, c.b_star()?, "Cov(X) = b_star Sigma"),
            (Level::Star, c.b_dstar()? / c.b_star()?, "Cov(X*) = (b_dstar/b_star) Sigma"),
        ]
        .into_iter()
        .enumerate()
        {
            let dl = d.at_level(level)?;
            let est = sample_covariance(&dl, count, cfg.seed.wrapping_add(1000 + 10 * k as u64 + j as u64))?;
            for ((i, jj), (mean, se)) in [(0, 0), (0, 1), (1, 1)].into_iter().zip(est) {
                runs.push(Run::new(
                    format!("{label} [{},{}]", i + 1, jj + 1),
                    3,
                    &fam.to_string(),
                    2,
                    scale * sigma.get(i, jj),
                    mean,
                    3.0 * se,
                ));
            }
        }
    }
    Ok(runs)
}

/// Student-t `b*`, `b**` by quadrature against the derived formulas, with
/// the printed simplifications alongside.
pub fn student_t_table() -> Result<Vec<StudentTConstants>> {
    let mut rows = Vec::new();
    for p in [5.0, 6.0, 10.0] {
        let fam = GeneratorFamily::StudentT { p };
        for n in [1, 2, 3, 5] {
            let triple = generator_triple(&fam, n)?;
            let q = |level: Level| constant_by_quadrature(|t| triple.eval(level, t), n);
            let (c0, c1, c2) = (q(Level::Base)?, q(Level::Star)?, q(Level::DoubleStar)?);
            let (bs, bss) = (c0 / c1, c0 / c2);
            let (fs, fss) = (p / (p - 2.0), p * p / ((p - 2.0) * (p - 4.0)));
            let (ps, pss) = student_t_printed_simplifications(p);
            let close = |a: f64, b: f64| ((a - b) / b).abs() <= 1e-9;
            rows.push(StudentTConstants {
                p,
                n,
                b_star_quadrature: bs,
                b_star_formula: fs,
                b_star_printed: ps,
                b_dstar_quadrature: bss,
                b_dstar_formula: fss,
                b_dstar_printed: pss,
                formula_matches: close(bs, fs) && close(bss, fss),
                printed_matches: close(bs, ps) && close(bss, pss),
            });
        }
    }
    Ok(rows)
}

pub fn criterion_4() -> Result<Vec<Run>> {
    let mut runs = Vec::new();
    for row in student_t_table()? {
        let fam = GeneratorFamily::StudentT { p: row.p }.to_string();
        runs.push(Run::relative("b_star quadrature = p/(p-2)", 4, &fam, row.n, row.b_star_formula, row.b_star_quadrature, 1e-9));
        runs.push(Run::relative(
            "b_dstar quadrature = p^2/((p-2)(p-4))",
            4,
            &fam,
            row.n,
            row.b_dstar_formula,
            row.b_dstar_quadrature,
            1e-9,
        ));
    }
    Ok(runs)
}

pub fn identity_families() -> Vec<GeneratorFamily> {
    vec![GeneratorFamily::Normal, GeneratorFamily::StudentT { p: 9.0 }, GeneratorFamily::Laplace, GeneratorFamily::Logistic]
}

/// The three test functions of the identity-vs-MC check, with the plain
/// closures used for the direct estimate.
pub fn identity_functions(n: usize) -> Vec<(&'static str, SmoothFunction, fn(&[f64]) -> f64)> {
    fn x2sq(x: &[f64]) -> f64 {
        x[1] * x[1]
    }
    fn bump(x: &[f64]) -> f64 {
        (-x.iter().map(|v| v * v).sum::<f64>() / 4.0).exp()
    }
    fn sin_sum(x: &[f64]) -> f64 {
        (x[0] + x[1]).sin()
    }
    vec![
        ("x2^2", monomial_x2sq(n), x2sq as fn(&[f64]) -> f64),
        ("exp(-|x|^2/4)", SmoothFunction::gaussian_bump(4.0), bump),
        ("sin(x1+x2)", SmoothFunction::sin_sum(vec![0, 1]), sin_sum),
    ]
}

fn monomial_x2sq(n: usize) -> SmoothFunction {
    let mut p = vec![0; n];
    p[1] = 2;
    SmoothFunction::monomial(&MonomialExponents::new(p), 1.0)
}

/// Seeded location and scale for instance `k` of a check.
fn random_instance(seed: u64, stream: u64, n: usize) -> (Vec<f64>, SymMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mu = (0..n).map(|_| rng.random_range(-0.5..0.5)).collect();
    (mu, random_spd(n, 0.5, &mut rng))
}

/// First identity against direct MC of `x₁²f`.
pub fn criterion_5(cfg: VerifyConfig) -> Result<Vec<Run>> {
    let mut runs = Vec::new();
    let mut k = 0u64;
    for fam in identity_families() {
        for n in [2, 3] {
            let (mu, sigma) = random_instance(cfg.seed, 5000 + k, n);
            let d = EllipticalDistribution::new(mu, sigma, fam.clone())?;
            for (name, f, plain) in identity_functions(n) {
                let budget = Budget::MonteCarlo { samples: cfg.samples, seed: cfg.seed.wrapping_add(2 * k + 1) };
                let t = x1sq_moment_thm1(&d, &f, budget)?;
                let m = mc_expectation(&d, |x| x[0] * x[0] * plain(x), cfg.samples, cfg.seed.wrapping_add(2 * k + 2))?;
                let se = (t.stderr * t.stderr + m.stderr * m.stderr).sqrt();
                runs.push(Run::new(format!("E[X1^2 f] first identity vs direct MC, f = {name}"), 5, &fam.to_string(), n, m.mean, t.value, 3.0 * se));
                k += 1;
            }
        }
    }
    Ok(runs)
}

/// Both coefficient sets applied to identical random inner expectations.
pub fn criterion_6(cfg: VerifyConfig) -> Result<Vec<Run>> {
    let fams = [GeneratorFamily::Normal, GeneratorFamily::StudentT { p: 10.0 }, GeneratorFamily::Logistic, GeneratorFamily::Laplace];
    let mut worst = vec![0.0f64; fams.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(6);
    for i in 0..200 {
        let n = 1 + i % 5;
        let fi = i % fams.len();
        let (mu, sigma) = random_instance(cfg.seed, 6000 + i as u64, n);
        let d = EllipticalDistribution::new(mu, sigma, fams[fi].clone())?;
        let mut r = || rng.random_range(-2.0..2.0);
        let inner = InnerExpectations {
            f_base: r(),
            f_star: r(),
            grad_star: (0..n).map(|_| r()).collect(),
            hess_dstar: (0..n * n).map(|_| r()).collect(),
        };
        let (a, _) = thm1_coefficients(&d)?.apply(&inner);
        let (b, _) = thm2_coefficients(&d)?.apply(&inner);
        worst[fi] = worst[fi].max((a - b).abs() / (1.0 + a.abs()));
    }
    Ok(fams
        .iter()
        .zip(worst)
        .map(|(f, w)| Run::new("|thm1 - thm2| / (1 + |thm1|), 50 instances, n = 1..5", 6, &f.to_string(), 0, 0.0, w, 1e-12))
        .collect())
}

/// Every exponent vector of total degree at most `max_degree`.
pub fn exponent_vectors(n: usize, max_degree: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=left {
            cur[i] = v;
            rec(i + 1, left - v, cur, out);
        }
        cur[i] = 0;
    }
    rec(0, max_degree, &mut cur, &mut out);
    out
}

/// Gaussian recursion against the pair-partition oracle.
pub fn criterion_7(cfg: VerifyConfig) -> Result<Vec<Run>> {
    let mut worst = [0.0f64; 4];
    let mut count = [0usize; 4];
    for i in 0..50u64 {
        let n = 1 + (i % 4) as usize;
        let (mu, sigma) = random_instance(cfg.seed, 7000 + i, n);
        let mu: Vec<f64> = mu.iter().map(|m| 2.0 * m).collect();
        for p in exponent_vectors(n, 8) {
            let e = MonomialExponents::new(p);
            let a = normal_product_moment(&mu, &sigma, &e)?;
            let b = isserlis_moment(&mu, &sigma, &e)?;
            let rel = if a == b { 0.0 } else { (a - b).abs() / b.abs() };
            worst[n - 1] = worst[n - 1].max(rel);
            count[n - 1] += 1;
        }
    }
    Ok((0..4)
        .map(|k| Run::new(format!("recursion vs pair partitions, relative error, {} cases", count[k]), 7, "normal", k + 1, 0.0, worst[k], 1e-9))
        .collect())
}

/// Kolmogorov–Smirnov distance of Mahalanobis radii from the radial CDF.
pub fn ks_radii(d: &EllipticalDistribution, count: usize, seed: u64) -> Result<f64> {
    let law = d.radial_law()?;
    let mut radii: Vec<f64> =
        d.sample(seed, count)?.iter().map(|x| d.mahalanobis_radius(x)).collect::<Result<_>>()?;
    radii.sort_by(f64::total_cmp);
    let nf = radii.len() as f64;
    Ok(radii.iter().enumerate().fold(0.0f64, |m, (i, &r)| {
        let f = law.cdf(r);
        m.max((i as f64 + 1.0) / nf - f).max(f - i as f64 / nf)
    }))
}

pub fn criterion_8(cfg: VerifyConfig) -> Result<Vec<Run>> {
    let count = (cfg.samples / 10).max(100);
    let crit = 1.63 / (count as f64).sqrt();
    let mut runs = Vec::new();
    for (k, fam) in constant_families().into_iter().enumerate() {
        for n in [2, 5] {
            let (mu, sigma) = random_instance(cfg.seed, 8000 + 10 * k as u64 + n as u64, n);
            let d = EllipticalDistribution::new(mu, sigma, fam.clone())?;
            let ks = ks_radii(&d, count, cfg.seed.wrapping_add(8000 + 10 * k as u64 + n as u64))?;
            runs.push(Run::new(format!("KS statistic of {count} radii (1% critical value)"), 8, &fam.to_string(), n, 0.0, ks, crit));
        }
    }
    Ok(runs)
}

/// `E[X₁²·1] = σ₁₁b* + μ₁²` with no sampling error.
pub fn criterion_9(cfg: VerifyConfig) -> Result<Vec<Run>> {
    let mut runs = Vec::new();
    let one = SmoothFunction::constant(1.0);
    for (k, fam) in constant_families().into_iter().enumerate() {
        let mut worst = 0.0f64;
        let mut max_stderr = 0.0f64;
        for i in 0..20u64 {
            let n = 1 + (i % 4) as usize;
            let (mu, sigma) = random_instance(cfg.seed, 9000 + 100 * k as u64 + i, n);
            let d = EllipticalDistribution::new(mu, sigma, fam.clone())?;
            let expected = d.sigma().get(0, 0) * d.constants().b_star()? + d.mu()[0] * d.mu()[0];
            let est = x1sq_moment_thm1(&d, &one, Budget::MonteCarlo { samples: cfg.samples, seed: cfg.seed })?;
            worst = worst.max((est.value - expected).abs() / (1.0 + expected.abs()));
            max_stderr = max_stderr.max(est.stderr);
        }
        runs.push(Run::new("constant f: |thm1 - (s11 b_star + mu1^2)| / (1 + |.|), 20 instances", 9, &fam.to_string(), 0, 0.0, worst, 1e-12));
        runs.push(Run::new("constant f: stochastic error", 9, &fam.to_string(), 0, 0.0, max_stderr, 0.0));
    }
    Ok(runs)
}

fn expand(d: &EllipticalDistribution, terms: &[MonomialTerm]) -> Result<f64> {
    let mut total = 0.0;
    for t in terms {
        let dl = d.at_level(t.level)?;
        total += t.coeff * elliptical_monomial_moment(&dl, &MonomialExponents::new(t.exponents.clone()))?;
    }
    Ok(total)
}

/// The product-moment expansion derived from the first identity and the
/// displayed one, each summed with exact lower-order moments, against the
/// exact oracle and direct MC.
pub fn product_expansion_table(cfg: VerifyConfig) -> Result<Vec<ProductExpansion>> {
    let sigma = SymMatrix::from_rows(&[vec![1.5, 0.4, 0.2], vec![0.4, 1.0, -0.3], vec![0.2, -0.3, 0.8]])?;
    let mu = vec![0.7, -0.4, 0.2];
    let mut rows = Vec::new();
    let mut k = 0u64;
    for fam in [GeneratorFamily::Laplace, GeneratorFamily::Logistic, GeneratorFamily::StudentT { p: 20.0 }] {
        let d = EllipticalDistribution::new(mu.clone(), sigma.clone(), fam.clone())?;
        for p in [vec![3, 1, 0], vec![3, 2, 1], vec![4, 1, 2]] {
            let e = MonomialExponents::new(p.clone());
            let exact = elliptical_monomial_moment(&d, &e)?;
            let derived = expand(&d, &product_moment_terms(&d, &e)?)?;
            let printed = expand(&d, &product_moment_terms_as_printed(&d, &e)?)?;
            let q = p.clone();
            let m = mc_expectation(
                &d,
                move |x| x.iter().zip(&q).map(|(v, &k)| v.powi(k as i32)).product(),
                cfg.samples,
                cfg.seed.wrapping_add(12_000 + k),
            )?;
            k += 1;
            let close = |a: f64| ((a - exact) / exact).abs() <= 1e-9;
            rows.push(ProductExpansion {
                family: fam.to_string(),
                exponents: p,
                mu: mu.clone(),
                exact,
                derived,
                printed,
                mc: m.mean,
                mc_stderr: m.stderr,
                derived_matches_exact: close(derived),
                printed_matches_exact: close(printed),
                derived_within_3_stderr: (derived - m.mean).abs() <= 3.0 * m.stderr,
                printed_within_3_stderr: (printed - m.mean).abs() <= 3.0 * m.stderr,
            });
        }
    }
    Ok(rows)
}

/// Criteria 1–9 plus the two adjudication tables.
pub fn run_all(cfg: VerifyConfig) -> Result<VerificationReport> {
    let mut runs = Vec::new();
    runs.extend(criterion_1()?);
    runs.extend(criterion_2()?);
    runs.extend(criterion_3(cfg)?);
    runs.extend(criterion_4()?);
    runs.extend(criterion_5(cfg)?);
    runs.extend(criterion_6(cfg)?);
    runs.extend(criterion_7(cfg)?);
    runs.extend(criterion_8(cfg)?);
    runs.extend(criterion_9(cfg)?);
    let product_expansion = product_expansion_table(cfg)?;
    for row in &product_expansion {
        runs.push(Run::relative(
            format!("derived product-moment expansion, exponents {:?}", row.exponents),
            0,
            &row.family,
            row.exponents.len(),
            row.exact,
            row.derived,
            1e-9,
        ));
    }
    let pass = runs.iter().all(|r| r.pass);
    Ok(VerificationReport {
        metadata: Metadata { seed: cfg.seed, samples: cfg.samples, version: env!("CARGO_PKG_VERSION").to_string() },
        pass,
        runs,
        student_t_constants: student_t_table()?,
        product_expansion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_use_seventeen_digits() {
        let run = Run::new("x", 0, "normal", 1, 1.0 / 3.0, 0.1, 0.0);
        let s = serde_json::to_string(&run).unwrap();
        assert!(s.contains("\"expected\":3.3333333333333331e-1"), "{s}");
        assert!(s.contains("\"tolerance\":0.0000000000000000e0"), "{s}");
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["expected"].as_f64().unwrap(), 1.0 / 3.0);
        let keys: Vec<&str> = ["check", "criterion", "family", "n", "expected", "got", "tolerance", "pass"].to_vec();
        let mut last = 0;
        for k in keys {
            let at = s.find(&format!("\"{k}\"")).unwrap();
            assert!(at >= last);
            last = at;
        }
    }

    #[test]
    fn exponent_enumeration_counts() {
        assert_eq!(exponent_vectors(1, 8).len(), 9);
        assert_eq!(exponent_vectors(4, 8).len(), 495);
    }

    #[test]
    fn student_t_table_separates_formula_from_print() {
        let rows = student_t_table().unwrap();
        assert!(rows.iter().all(|r| r.formula_matches && !r.printed_matches));
    }

    #[test]
    fn small_suite_is_deterministic() {
        let cfg = VerifyConfig { seed: 3, samples: 2000 };
        let a = criterion_5(cfg).unwrap();
        let b = criterion_5(cfg).unwrap();
        assert_eq!(a, b);
    }
}
