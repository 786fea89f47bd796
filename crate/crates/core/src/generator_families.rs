//! Density generators, their cumulative generators and normalizing constants.
//!
//! For a density generator `g_n` the cumulative generators are the tail
//! integrals
//!
//! ```text
//! Ḡ_n(t) = ∫_t^∞ g_n(v) dv,      𝒢̄_n(t) = ∫_t^∞ Ḡ_n(v) dv,
//! ```
//!
//! and each of `g_n`, `Ḡ_n`, `𝒢̄_n` is normalized on `ℝⁿ` by
//! `c = Γ(n/2) / ((2π)^{n/2} ∫_0^∞ t^{n/2−1} h(t) dt)`. The three constants are
//! `c_n`, `c_n*`, `c_n**`, and their ratios `b* = c_n/c_n*`, `b** = c_n/c_n**`
//! are the coefficients of the moment identities in [`crate::moments`].
//!
//! The built-in families carry closed forms. A [`CustomGenerator`] tabulates
//! `Ḡ` and `𝒢̄` once and answers every later evaluation from the table.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interp::{bracket, hermite, limit_slopes};
use crate::quadrature::{integrate, integrate_to_infinity, QuadControl};
use crate::special_functions::{beta_fn, hurwitz_lerch_psi, ln_two_pi_pow, log_gamma, riemann_zeta, SeriesControl};

/// Which member of the generator chain a distribution uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    /// `g_n`, the distribution `X`.
    Base,
    /// `Ḡ_n`, the associated distribution `X*`.
    Star,
    /// `𝒢̄_n`, the associated distribution `X**`.
    DoubleStar,
}

impl Level {
    pub fn suffix(self) -> &'static str {
        match self {
            Level::Base => "",
            Level::Star => "*",
            Level::DoubleStar => "**",
        }
    }
}

/// A user-supplied density generator with cached cumulative generators.
#[derive(Clone)]
pub struct CustomGenerator {
    name: String,
    g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    tables: Arc<TailTables>,
}

impl fmt::Debug for CustomGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomGenerator").field("name", &self.name).field("nodes", &self.tables.t.len()).finish()
    }
}

const TABLE_NODES: usize = 2048;
const TABLE_T_MIN: f64 = 1e-6;

/// `Ḡ` and `𝒢̄` on a log-spaced grid (plus `t = 0`), with exact end slopes
/// `−g` and `−Ḡ` for the Hermite pieces and an exponential fit past the end.
struct TailTables {
    t: Vec<f64>,
    gbar: Vec<f64>,
    gbar_slope: Vec<f64>,
    gdbar: Vec<f64>,
    gdbar_slope: Vec<f64>,
    gbar_rate: f64,
    gdbar_rate: f64,
}

impl TailTables {
    fn build(g: &(dyn Fn(f64) -> f64 + Send + Sync)) -> Result<Self> {
        let g0 = g(0.0);
        if !(g0.is_finite() && g0 >= 0.0) {
            return Err(Error::Validity(format!("custom generator g(0) = {g0} is not a finite nonnegative number")));
        }
        let reference = g0.max(g(1.0));
        if reference <= 0.0 {
            return Err(Error::Validity("custom generator vanishes at t = 0 and t = 1".into()));
        }
        let mut t_max = 1.0f64;
        for k in 0..=60 {
            t_max = (k as f64).exp2();
            let v = g(t_max);
            if v == 0.0 || t_max.powi(4) * v <= 1e-18 * reference {
                break;
            }
        }
        let mut t = Vec::with_capacity(TABLE_NODES);
        t.push(0.0);
        let ratio = (t_max / TABLE_T_MIN).ln() / (TABLE_NODES - 2) as f64;
        for i in 0..TABLE_NODES - 1 {
            t.push(TABLE_T_MIN * (ratio * i as f64).exp());
        }
        *t.last_mut().expect("table is non-empty") = t_max;

        let ctrl = QuadControl { rel_tol: 1e-13, abs_tol: 1e-300, max_panels: 400 };
        let m = t.len();
        let mut gbar = vec![0.0; m];
        let mut gdbar = vec![0.0; m];
        // A divergent tail leaves that cumulative generator infinite; the
        // dimension gate in `generator_triple` never hands it out.
        gbar[m - 1] = integrate_to_infinity(g, t_max, t_max, ctrl).map_or(f64::INFINITY, |r| r.value);
        gdbar[m - 1] = integrate_to_infinity(|v| (v - t_max) * g(v), t_max, t_max, ctrl).map_or(f64::INFINITY, |r| r.value);
        for i in (0..m - 1).rev() {
            let (a, b) = (t[i], t[i + 1]);
            let mass = integrate(g, a, b, ctrl)?.value;
            // ∫_a^b Ḡ(v) dv = (b − a) Ḡ(b) + ∫_a^b (v − a) g(v) dv
            let first = integrate(|v| (v - a) * g(v), a, b, ctrl)?.value;
            gbar[i] = gbar[i + 1] + mass;
            gdbar[i] = gdbar[i + 1] + (b - a) * gbar[i + 1] + first;
        }
        let mut gbar_slope: Vec<f64> = t.iter().map(|&v| -g(v)).collect();
        let mut gdbar_slope: Vec<f64> = gbar.iter().map(|v| -v).collect();
        if gbar_slope.iter().any(|v| !v.is_finite() || *v > 0.0) {
            return Err(Error::Validity("custom generator must be finite and nonnegative on the grid".into()));
        }
        limit_slopes(&t, &gbar, &mut gbar_slope);
        limit_slopes(&t, &gdbar, &mut gdbar_slope);
        let rate = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
        let gbar_rate = rate(g(t_max), gbar[m - 1]);
        let gdbar_rate = rate(gbar[m - 1], gdbar[m - 1]);
        Ok(TailTables { t, gbar, gbar_slope, gdbar, gdbar_slope, gbar_rate, gdbar_rate })
    }

    fn eval(&self, values: &[f64], slopes: &[f64], rate: f64, t: f64) -> f64 {
        let t = t.max(0.0);
        let last = self.t.len() - 1;
        if t >= self.t[last] {
            return values[last] * (-rate * (t - self.t[last])).exp();
        }
        let k = bracket(&self.t, t);
        hermite(self.t[k], self.t[k + 1], values[k], values[k + 1], slopes[k], slopes[k + 1], t)
    }
}

impl CustomGenerator {
    /// Wraps `g` and tabulates its cumulative generators.
    pub fn new<F>(name: impl Into<String>, g: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let g: Arc<dyn Fn(f64) -> f64 + Send + Sync> = Arc::new(g);
        let tables = Arc::new(TailTables::build(g.as_ref())?);
        Ok(CustomGenerator { name: name.into(), g, tables })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn g(&self, t: f64) -> f64 {
        (self.g)(t)
    }

    pub fn g_bar(&self, t: f64) -> f64 {
        let tb = &self.tables;
        tb.eval(&tb.gbar, &tb.gbar_slope, tb.gbar_rate, t)
    }

    pub fn g_dbar(&self, t: f64) -> f64 {
        let tb = &self.tables;
        tb.eval(&tb.gdbar, &tb.gdbar_slope, tb.gdbar_rate, t)
    }
}

/// Named density-generator family.
#[derive(Debug, Clone)]
pub enum GeneratorFamily {
    Normal,
    /// Student-t with `p` degrees of freedom, `g_n(t) = (1 + 2t/p)^{−(p+n)/2}`.
    StudentT { p: f64 },
    Logistic,
    Laplace,
    Custom(CustomGenerator),
}

impl GeneratorFamily {
    pub fn student_t(p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(Error::Validity(format!("Student-t needs p > 0, got {p}")));
        }
        Ok(GeneratorFamily::StudentT { p })
    }

    pub fn name(&self) -> String {
        self.to_string()
    }

    pub fn is_normal(&self) -> bool {
        matches!(self, GeneratorFamily::Normal)
    }

    /// Largest total degree for which moments of `X` exist, if bounded.
    pub fn moment_limit(&self) -> Option<f64> {
        match self {
            GeneratorFamily::StudentT { p } => Some(*p),
            _ => None,
        }
    }
}

impl fmt::Display for GeneratorFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorFamily::Normal => write!(f, "normal"),
            GeneratorFamily::StudentT { p } => write!(f, "t(p={p})"),
            GeneratorFamily::Logistic => write!(f, "logistic"),
            GeneratorFamily::Laplace => write!(f, "laplace"),
            GeneratorFamily::Custom(c) => write!(f, "custom({})", c.name),
        }
    }
}

impl FromStr for GeneratorFamily {
    type Err = Error;

    /// `normal | t(p=<real>) | logistic | laplace`
    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        match compact.as_str() {
            "normal" => Ok(GeneratorFamily::Normal),
            "logistic" => Ok(GeneratorFamily::Logistic),
            "laplace" => Ok(GeneratorFamily::Laplace),
            other => {
                let inner = other
                    .strip_prefix("t(p=")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::Parse(format!("unknown family '{s}'")))?;
                let p: f64 = inner.parse().map_err(|_| Error::Parse(format!("bad degrees of freedom in '{s}'")))?;
                GeneratorFamily::student_t(p).map_err(|e| Error::Parse(e.to_string()))
            }
        }
    }
}

/// `g_n`, `Ḡ_n`, `𝒢̄_n` for one family in one dimension.
#[derive(Debug, Clone)]
pub struct GeneratorTriple {
    family: GeneratorFamily,
    n: usize,
    max_level: Level,
}

impl GeneratorTriple {
    pub fn family(&self) -> &GeneratorFamily {
        &self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Deepest level whose generator is normalizable in dimension `n`.
    pub fn max_level(&self) -> Level {
        self.max_level
    }

    pub fn g(&self, t: f64) -> f64 {
        let n = self.n as f64;
        match &self.family {
            GeneratorFamily::Normal => (-t).exp(),
            GeneratorFamily::StudentT { p } => (1.0 + 2.0 * t / p).powf(-(p + n) / 2.0),
            GeneratorFamily::Logistic => {
                let e = (-t).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
            GeneratorFamily::Laplace => (-(2.0 * t).sqrt()).exp(),
            GeneratorFamily::Custom(c) => c.g(t),
        }
    }

    pub fn g_bar(&self, t: f64) -> f64 {
        let n = self.n as f64;
        match &self.family {
            GeneratorFamily::Normal => (-t).exp(),
            GeneratorFamily::StudentT { p } => {
                p / (p + n - 2.0) * (1.0 + 2.0 * t / p).powf(-(p + n - 2.0) / 2.0)
            }
            GeneratorFamily::Logistic => {
                let e = (-t).exp();
                e / (1.0 + e)
            }
            GeneratorFamily::Laplace => {
                let r = (2.0 * t).sqrt();
                (1.0 + r) * (-r).exp()
            }
            GeneratorFamily::Custom(c) => c.g_bar(t),
        }
    }

    pub fn g_dbar(&self, t: f64) -> f64 {
        let n = self.n as f64;
        match &self.family {
            GeneratorFamily::Normal => (-t).exp(),
            GeneratorFamily::StudentT { p } => {
                p / (p + n - 2.0) * p / (p + n - 4.0) * (1.0 + 2.0 * t / p).powf(-(p + n - 4.0) / 2.0)
            }
            // ln(1 + e^{−t}) with e^{−t} ≤ 1, exact for large t through ln_1p.
            GeneratorFamily::Logistic => (-t).exp().ln_1p(),
            GeneratorFamily::Laplace => {
                let r = (2.0 * t).sqrt();
                (3.0 + 2.0 * t + 3.0 * r) * (-r).exp()
            }
            GeneratorFamily::Custom(c) => c.g_dbar(t),
        }
    }

    pub fn eval(&self, level: Level, t: f64) -> f64 {
        match level {
            Level::Base => self.g(t),
            Level::Star => self.g_bar(t),
            Level::DoubleStar => self.g_dbar(t),
        }
    }

    pub fn check_level(&self, level: Level) -> Result<()> {
        if level <= self.max_level {
            Ok(())
        } else {
            Err(Error::Validity(format!(
                "{} in dimension {}: the X{} generator is not normalizable{}",
                self.family,
                self.n,
                level.suffix(),
                match (&self.family, level) {
                    (GeneratorFamily::StudentT { .. }, Level::Star) => " (needs p > 2)",
                    (GeneratorFamily::StudentT { .. }, Level::DoubleStar) => " (needs p > 4)",
                    _ => "",
                }
            )))
        }
    }
}

/// Builds the generator triple of `family` in dimension `n`.
pub fn generator_triple(family: &GeneratorFamily, n: usize) -> Result<GeneratorTriple> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let max_level = match family {
        GeneratorFamily::StudentT { p } => {
            if !(*p > 0.0 && p.is_finite()) {
                return Err(Error::Validity(format!("Student-t needs p > 0, got {p}")));
            }
            if *p > 4.0 {
                Level::DoubleStar
            } else if *p > 2.0 {
                Level::Star
            } else {
                Level::Base
            }
        }
        GeneratorFamily::Custom(c) => {
            // ∫ t^{n/2−1}Ḡ and ∫ t^{n/2−1}𝒢̄ are finite iff g has the next two
            // radial moments. Quadrature alone cannot see a logarithmic
            // divergence once the integrand underflows, so the far-tail decay
            // exponent of g decides as well.
            let alpha = tail_exponent(|t| c.g(t));
            let has = |k: usize| {
                alpha > (k as f64) / 2.0 + 1e-3 && radial_moment_integral(|t| c.g(t), k).is_ok_and(f64::is_finite)
            };
            if !has(n) {
                return Err(Error::Validity(format!(
                    "custom generator '{}' is not integrable against t^(n/2-1) for n = {n}",
                    c.name
                )));
            }
            if has(n + 4) {
                Level::DoubleStar
            } else if has(n + 2) {
                Level::Star
            } else {
                Level::Base
            }
        }
        _ => Level::DoubleStar,
    };
    Ok(GeneratorTriple { family: family.clone(), n, max_level })
}

/// Power-law decay rate `−d ln g / d ln t` far in the tail; infinite when `g`
/// has already underflowed there (exponential or faster decay).
fn tail_exponent<G: Fn(f64) -> f64>(g: G) -> f64 {
    let (t1, t2) = (1e8, 1e9);
    let (g1, g2) = (g(t1), g(t2));
    if g1 <= 0.0 || g2 <= 0.0 {
        return f64::INFINITY;
    }
    -(g2 / g1).ln() / (t2 / t1).ln()
}

/// `∫_0^∞ u^{n/2−1} h(u) du`.
///
/// Evaluated as `∫_0^∞ 2 v^{n−1} h(v²) dv`, which removes the `u^{−1/2}`
/// endpoint singularity at odd `n`, split at `v = 1` with geometric panels on
/// the tail.
pub fn radial_moment_integral<H: Fn(f64) -> f64>(h: H, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let k = (n - 1) as i32;
    let integrand = |v: f64| 2.0 * v.powi(k) * h(v * v);
    let ctrl = QuadControl { rel_tol: 1e-13, abs_tol: 0.0, max_panels: 2000 };
    let head = integrate(integrand, 0.0, 1.0, ctrl)?;
    let tail = integrate_to_infinity(integrand, 1.0, 1.0, ctrl)?;
    let value = head.value + tail.value;
    let error = head.error + tail.error;
    if !value.is_finite() {
        return Err(Error::NonConvergence { what: "radial moment integral".into(), terms: 0 });
    }
    if error > 1e-11 * value.abs() {
        return Err(Error::NonConvergence { what: "radial moment integral (error estimate)".into(), terms: 0 });
    }
    Ok(value)
}

/// `Γ(n/2) / ((2π)^{n/2} ∫_0^∞ t^{n/2−1} h(t) dt)`
pub fn constant_by_quadrature<H: Fn(f64) -> f64>(h: H, n: usize) -> Result<f64> {
    let nf = n as f64;
    let integral = radial_moment_integral(h, n)?;
    Ok((log_gamma(nf / 2.0)? - ln_two_pi_pow(nf) - integral.ln()).exp())
}

/// `c_n`, `c_n*`, `c_n**` and the ratios `b* = c_n/c_n*`, `b** = c_n/c_n**`.
///
/// `c_n*`/`c_n**` are absent when the corresponding generator is not
/// normalizable (Student-t with `p ≤ 2` / `p ≤ 4`).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizingConstants {
    n: usize,
    c_n: f64,
    c_n_star: Option<f64>,
    c_n_dstar: Option<f64>,
    quadrature_discrepancy: f64,
}

impl NormalizingConstants {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn c_n(&self) -> f64 {
        self.c_n
    }

    pub fn c_n_star(&self) -> Result<f64> {
        self.c_n_star.ok_or_else(|| Error::Validity("c_n* does not exist for this family".into()))
    }

    pub fn c_n_dstar(&self) -> Result<f64> {
        self.c_n_dstar.ok_or_else(|| Error::Validity("c_n** does not exist for this family".into()))
    }

    pub fn b_star(&self) -> Result<f64> {
        Ok(self.c_n / self.c_n_star()?)
    }

    pub fn b_dstar(&self) -> Result<f64> {
        Ok(self.c_n / self.c_n_dstar()?)
    }

    pub fn constant(&self, level: Level) -> Result<f64> {
        match level {
            Level::Base => Ok(self.c_n),
            Level::Star => self.c_n_star(),
            Level::DoubleStar => self.c_n_dstar(),
        }
    }

    /// Largest relative gap between the stored constants and an independent
    /// radial-quadrature recomputation.
    pub fn quadrature_discrepancy(&self) -> f64 {
        self.quadrature_discrepancy
    }
}

fn closed_form_constant(family: &GeneratorFamily, n: usize, level: Level) -> Result<Option<f64>> {
    let nf = n as f64;
    let half = nf / 2.0;
    Ok(match family {
        GeneratorFamily::Normal => Some((-ln_two_pi_pow(nf)).exp()),
        GeneratorFamily::StudentT { p } => {
            let p = *p;
            let common = -half * (p * std::f64::consts::PI).ln();
            match level {
                Level::Base => Some((log_gamma((p + nf) / 2.0)? - log_gamma(p / 2.0)? + common).exp()),
                Level::Star => Some(
                    (p + nf - 2.0) * (log_gamma(half)? + common).exp() / (p * beta_fn(half, (p - 2.0) / 2.0)?),
                ),
                Level::DoubleStar => Some(
                    (p + nf - 2.0) * (p + nf - 4.0) * (log_gamma(half)? + common).exp()
                        / (p * p * beta_fn(half, (p - 4.0) / 2.0)?),
                ),
            }
        }
        GeneratorFamily::Logistic => {
            let ctrl = SeriesControl::default();
            let psi = match level {
                Level::Base => hurwitz_lerch_psi(2.0, -1.0, half, 1.0, ctrl)?,
                Level::Star => hurwitz_lerch_psi(1.0, -1.0, half, 1.0, ctrl)?,
                Level::DoubleStar => hurwitz_lerch_psi(1.0, -1.0, half + 1.0, 1.0, ctrl)?,
            };
            Some(1.0 / ((ln_two_pi_pow(nf)).exp() * psi))
        }
        GeneratorFamily::Laplace => {
            // Γ(n/2)/(2π^{n/2}) · {1/Γ(n), n/Γ(n+2), n(n+2)/Γ(n+4)}
            let lead = log_gamma(half)? - 2f64.ln() - half * std::f64::consts::PI.ln();
            Some(match level {
                Level::Base => (lead - log_gamma(nf)?).exp(),
                Level::Star => nf * (lead - log_gamma(nf + 2.0)?).exp(),
                Level::DoubleStar => nf * (nf + 2.0) * (lead - log_gamma(nf + 4.0)?).exp(),
            })
        }
        GeneratorFamily::Custom(_) => None,
    })
}

/// Normalizing constants of `family` in dimension `n`.
pub fn normalizing_constants(family: &GeneratorFamily, n: usize) -> Result<NormalizingConstants> {
    let triple = generator_triple(family, n)?;
    let levels = [Level::Base, Level::Star, Level::DoubleStar];
    let mut values = [None; 3];
    let mut discrepancy = 0.0f64;
    for (slot, level) in values.iter_mut().zip(levels) {
        if level > triple.max_level() {
            continue;
        }
        let by_quadrature = constant_by_quadrature(|t| triple.eval(level, t), n)?;
        let stored = match closed_form_constant(family, n, level)? {
            Some(v) => v,
            None => {
                // Custom: compare against the moment route, which uses g only.
                // ∫t^{n/2−1}Ḡ = (2/n)∫t^{n/2}g, ∫t^{n/2−1}𝒢̄ = (4/(n(n+2)))∫t^{n/2+1}g
                let nf = n as f64;
                let moment = match level {
                    Level::Base => radial_moment_integral(|t| triple.g(t), n)?,
                    Level::Star => 2.0 / nf * radial_moment_integral(|t| triple.g(t), n + 2)?,
                    Level::DoubleStar => 4.0 / (nf * (nf + 2.0)) * radial_moment_integral(|t| triple.g(t), n + 4)?,
                };
                let route = (log_gamma(nf / 2.0)? - ln_two_pi_pow(nf) - moment.ln()).exp();
                discrepancy = discrepancy.max(((route - by_quadrature) / route).abs());
                by_quadrature
            }
        };
        discrepancy = discrepancy.max(((stored - by_quadrature) / stored).abs());
        *slot = Some(stored);
    }
    Ok(NormalizingConstants {
        n,
        c_n: values[0].expect("base level is always normalizable"),
        c_n_star: values[1],
        c_n_dstar: values[2],
        quadrature_discrepancy: discrepancy,
    })
}

/// A generator at one level, packaged with the constant that normalizes it.
#[derive(Debug, Clone)]
pub struct LevelGenerator {
    triple: GeneratorTriple,
    level: Level,
    constant: f64,
}

impl LevelGenerator {
    pub fn new(triple: GeneratorTriple, level: Level, constants: &NormalizingConstants) -> Result<Self> {
        triple.check_level(level)?;
        let constant = constants.constant(level)?;
        Ok(LevelGenerator { triple, level, constant })
    }

    pub fn level(&self) -> Level {
        self.level
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn triple(&self) -> &GeneratorTriple {
        &self.triple
    }

    pub fn n(&self) -> usize {
        self.triple.n
    }

    /// Density generator of this level.
    pub fn density(&self, t: f64) -> f64 {
        self.triple.eval(self.level, t)
    }

    /// Cumulative generator of this level, where the chain provides it.
    pub fn tail(&self, t: f64) -> Option<f64> {
        match self.level {
            Level::Base => Some(self.triple.g_bar(t)),
            Level::Star => Some(self.triple.g_dbar(t)),
            Level::DoubleStar => None,
        }
    }
}

/// Generators of `X*` (base density `Ḡ_n`, constant `c_n*`) and `X**` (base
/// density `𝒢̄_n`, constant `c_n**`).
pub fn associated_families(family: &GeneratorFamily, n: usize) -> Result<(LevelGenerator, LevelGenerator)> {
    let triple = generator_triple(family, n)?;
    triple.check_level(Level::DoubleStar)?;
    let constants = normalizing_constants(family, n)?;
    Ok((
        LevelGenerator::new(triple.clone(), Level::Star, &constants)?,
        LevelGenerator::new(triple, Level::DoubleStar, &constants)?,
    ))
}

/// `c_n` of the logistic family through the zeta-function special cases
/// (`n = 1` falls back to Ψ₂*).
pub fn logistic_c_n_closed(n: usize) -> Result<f64> {
    let nf = n as f64;
    let pi = std::f64::consts::PI;
    match n {
        0 => Err(Error::InvalidArgument("dimension must be positive".into())),
        1 => Ok(1.0
            / ((2.0 * pi).sqrt() * hurwitz_lerch_psi(2.0, -1.0, 0.5, 1.0, SeriesControl::default())?)),
        2 => Ok(1.0 / pi),
        4 => Ok(1.0 / (4.0 * pi * pi * 2f64.ln())),
        _ => Ok(1.0 / (pi.powf(nf / 2.0) * ((nf / 2.0).exp2() - 4.0) * riemann_zeta(nf / 2.0 - 1.0)?)),
    }
}

/// One-line simplifications printed for Student-t in the source derivation
/// (`p²/(p−2)` and `p/((p−2)(p−4))`), kept only for reporting next to the
/// values the integrals actually give.
pub fn student_t_printed_simplifications(p: f64) -> (f64, f64) {
    (p * p / (p - 2.0), p / ((p - 2.0) * (p - 4.0)))
}
