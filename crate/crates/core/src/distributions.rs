//! Scalar distributions for idea quality and review noise, plus the
//! quadrature kernel used by every integral in the crate.

use std::fmt;
use std::sync::{Arc, OnceLock};

use statrs::function::erf::{erfc, erfc_inv};
use thiserror::Error;

use crate::roots::bisect;

/// Infinite integration limits are replaced by `mean ± DEFAULT_TRUNCATION_SIGMAS · sd`.
pub const DEFAULT_TRUNCATION_SIGMAS: f64 = 10.0;

const GL_ORDER: usize = 64;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("probability {0} is outside (0, 1)")]
    OutOfRange(f64),
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("quantile bracket failure at p = {0}")]
    QuantileBracket(f64),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand returned a non-finite value at x = {0}")]
    NonFinite(f64),
    #[error("adaptive subdivision budget exhausted on [{lo}, {hi}]")]
    BudgetExceeded { lo: f64, hi: f64 },
    #[error("invalid integration interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
}

#[derive(Clone)]
pub enum Family {
    Normal {
        mean: f64,
        variance: f64,
    },
    Custom {
        pdf: RealFn,
        cdf: RealFn,
        quantile: Option<RealFn>,
    },
    /// Finite mixture `Σ w_i · F_i`; weights sum to one.
    Mixture(Vec<(f64, ScalarDistribution)>),
}

/// A continuous distribution on the real line with a strictly positive
/// density, together with the interval used to truncate its integrals.
#[derive(Clone)]
pub struct ScalarDistribution {
    family: Family,
    support: (f64, f64),
}

impl fmt::Debug for ScalarDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.family {
            Family::Normal { mean, variance } => f
                .debug_struct("Normal")
                .field("mean", mean)
                .field("variance", variance)
                .finish(),
            Family::Custom { .. } => f
                .debug_struct("Custom")
                .field("support", &self.support)
                .finish(),
            Family::Mixture(parts) => f.debug_tuple("Mixture").field(parts).finish(),
        }
    }
}

impl ScalarDistribution {
    pub fn normal(mean: f64, variance: f64) -> Result<Self, DistError> {
        if !mean.is_finite() {
            return Err(DistError::InvalidParameter(format!("mean must be finite, got {mean}")));
        }
        if !(variance.is_finite() && variance > 0.0) {
            return Err(DistError::InvalidParameter(format!(
                "variance must be positive, got {variance}"
            )));
        }
        let sd = variance.sqrt();
        Ok(Self {
            family: Family::Normal { mean, variance },
            support: (
                mean - DEFAULT_TRUNCATION_SIGMAS * sd,
                mean + DEFAULT_TRUNCATION_SIGMAS * sd,
            ),
        })
    }

    pub fn standard_normal() -> Self {
        Self::normal(0.0, 1.0).expect("valid parameters")
    }

    /// Builds a distribution from user supplied handles. When `quantile` is
    /// `None` it is synthesized by bisection on `cdf`.
    pub fn custom(
        pdf: RealFn,
        cdf: RealFn,
        quantile: Option<RealFn>,
        support: (f64, f64),
    ) -> Result<Self, DistError> {
        let (lo, hi) = support;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(DistError::InvalidParameter(format!(
                "support hint must be a finite interval, got [{lo}, {hi}]"
            )));
        }
        Ok(Self {
            family: Family::Custom { pdf, cdf, quantile },
            support,
        })
    }

    pub fn mixture(parts: Vec<(f64, ScalarDistribution)>) -> Result<Self, DistError> {
        if parts.is_empty() {
            return Err(DistError::InvalidParameter("empty mixture".into()));
        }
        let total: f64 = parts.iter().map(|(w, _)| *w).sum();
        if parts.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(DistError::InvalidParameter(format!(
                "mixture weights must be non-negative and sum to 1, got {total}"
            )));
        }
        let lo = parts.iter().map(|(_, d)| d.support.0).fold(f64::INFINITY, f64::min);
        let hi = parts.iter().map(|(_, d)| d.support.1).fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            family: Family::Mixture(parts),
            support: (lo, hi),
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// Interval used in place of infinite integration limits.
    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Location of the distribution (the mean for normals, the midpoint of
    /// the support hint otherwise).
    pub fn center(&self) -> f64 {
        match &self.family {
            Family::Normal { mean, .. } => *mean,
            Family::Mixture(parts) => parts.iter().map(|(w, d)| w * d.center()).sum(),
            Family::Custom { .. } => 0.5 * (self.support.0 + self.support.1),
        }
    }

    /// Scale of the distribution (standard deviation for normals and mixtures,
    /// a twentieth of the support width otherwise).
    pub fn scale(&self) -> f64 {
        match &self.family {
            Family::Normal { variance, .. } => variance.sqrt(),
            Family::Mixture(parts) => {
                let m = self.center();
                let second: f64 = parts
                    .iter()
                    .map(|(w, d)| {
                        let (c, s) = (d.center(), d.scale());
                        w * (s * s + (c - m) * (c - m))
                    })
                    .sum();
                second.sqrt()
            }
            Family::Custom { .. } => (self.support.1 - self.support.0) / (2.0 * DEFAULT_TRUNCATION_SIGMAS),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match &self.family {
            Family::Normal { mean, variance } => {
                let z = (x - mean) / variance.sqrt();
                (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI * variance).sqrt()
            }
            Family::Custom { pdf, .. } => pdf(x),
            Family::Mixture(parts) => parts.iter().map(|(w, d)| w * d.pdf(x)).sum(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        if x == f64::INFINITY {
            return 1.0;
        }
        match &self.family {
            Family::Normal { mean, variance } => {
                0.5 * erfc(-(x - mean) / (2.0 * variance).sqrt())
            }
            Family::Custom { cdf, .. } => cdf(x),
            Family::Mixture(parts) => parts.iter().map(|(w, d)| w * d.cdf(x)).sum(),
        }
    }

    /// Survival function `1 − cdf(x)`, evaluated without cancellation for normals.
    pub fn sf(&self, x: f64) -> f64 {
        if x == f64::NEG_INFINITY {
            return 1.0;
        }
        if x == f64::INFINITY {
            return 0.0;
        }
        match &self.family {
            Family::Normal { mean, variance } => 0.5 * erfc((x - mean) / (2.0 * variance).sqrt()),
            Family::Custom { cdf, .. } => 1.0 - cdf(x),
            Family::Mixture(parts) => parts.iter().map(|(w, d)| w * d.sf(x)).sum(),
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64, DistError> {
        if !(p > 0.0 && p < 1.0) {
            return Err(DistError::OutOfRange(p));
        }
        match &self.family {
            Family::Normal { mean, variance } => {
                let sd = variance.sqrt();
                let mut x = mean - sd * std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
                // erfc_inv loses a few digits in the tails; polish with Newton steps
                for _ in 0..4 {
                    let dens = self.pdf(x);
                    if dens <= 0.0 {
                        break;
                    }
                    let err = if p < 0.5 { self.cdf(x) - p } else { p - self.sf(x) };
                    let step = err / dens;
                    if !step.is_finite() || step.abs() >= 1e-3 * sd {
                        break;
                    }
                    x -= step;
                    if step.abs() <= 1e-15 * (1.0 + x.abs()) {
                        break;
                    }
                }
                Ok(x)
            }
            Family::Custom {
                quantile: Some(q), ..
            } => Ok(q(p)),
            _ => self.quantile_by_bisection(p),
        }
    }

    fn quantile_by_bisection(&self, p: f64) -> Result<f64, DistError> {
        let (mut lo, mut hi) = match &self.family {
            Family::Mixture(parts) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (_, d) in parts {
                    let x = d.quantile(p)?;
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
                (lo - 1e-9 * (1.0 + lo.abs()), hi + 1e-9 * (1.0 + hi.abs()))
            }
            _ => self.support,
        };
        let width = (self.support.1 - self.support.0).max(1e-12);
        let mut grow = 0;
        while self.cdf(lo) > p {
            lo -= width;
            grow += 1;
            if grow > 60 {
                return Err(DistError::QuantileBracket(p));
            }
        }
        while self.cdf(hi) < p {
            hi += width;
            grow += 1;
            if grow > 60 {
                return Err(DistError::QuantileBracket(p));
            }
        }
        bisect(|x| self.cdf(x) - p, lo, hi, 1e-14 * (1.0 + lo.abs().max(hi.abs())), 200)
            .map_err(|_| DistError::QuantileBracket(p))
    }

    /// Maps two independent uniforms to one draw: Box–Muller for normals,
    /// inverse transform (using `u1` only) otherwise.
    pub fn draw_from_uniforms(&self, u1: f64, u2: f64) -> f64 {
        match &self.family {
            Family::Normal { mean, variance } => {
                let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
                mean + variance.sqrt() * z
            }
            _ => {
                let u = u1.clamp(1e-300, 1.0 - f64::EPSILON);
                self.quantile(u).unwrap_or(self.support.0)
            }
        }
    }
}

/// Integration rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuadMethod {
    AdaptiveSimpson,
    /// Composite 64-point Gauss–Legendre on equal panels.
    GaussLegendreComposite { panels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub method: QuadMethod,
    pub abs_tol: f64,
    pub truncation_sigmas: f64,
    pub max_depth: u32,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self {
            method: QuadMethod::AdaptiveSimpson,
            abs_tol: 1e-10,
            truncation_sigmas: DEFAULT_TRUNCATION_SIGMAS,
            max_depth: 48,
        }
    }
}

impl Quadrature {
    pub fn gauss_legendre(panels: usize) -> Self {
        Self {
            method: QuadMethod::GaussLegendreComposite { panels: panels.max(1) },
            ..Self::default()
        }
    }
}

/// Replaces infinite endpoints with `center ± sigmas · scale` of `dist`.
pub fn truncate_limits(lo: f64, hi: f64, dist: &ScalarDistribution, sigmas: f64) -> (f64, f64) {
    let (c, s) = (dist.center(), dist.scale());
    let lo = if lo == f64::NEG_INFINITY { c - sigmas * s } else { lo };
    let hi = if hi == f64::INFINITY { c + sigmas * s } else { hi };
    (lo, hi)
}

/// Integrates `f` over `[lo, hi]`. Infinite endpoints are truncated using
/// the scale of `governing`.
pub fn integrate<F>(
    f: F,
    lo: f64,
    hi: f64,
    governing: &ScalarDistribution,
    quad: &Quadrature,
) -> Result<f64, QuadError>
where
    F: Fn(f64) -> f64,
{
    let (lo, hi) = truncate_limits(lo, hi, governing, quad.truncation_sigmas);
    integrate_finite(f, lo, hi, quad)
}

pub fn integrate_finite<F>(f: F, lo: f64, hi: f64, quad: &Quadrature) -> Result<f64, QuadError>
where
    F: Fn(f64) -> f64,
{
    if lo.is_nan() || hi.is_nan() || !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(QuadError::InvalidInterval { lo, hi });
    }
    if lo == hi {
        return Ok(0.0);
    }
    match quad.method {
        QuadMethod::AdaptiveSimpson => adaptive_simpson(&f, lo, hi, quad.abs_tol, quad.max_depth),
        QuadMethod::GaussLegendreComposite { panels } => {
            let mut total = 0.0;
            let mut err = None;
            gauss_legendre_nodes(lo, hi, panels, |x, w| {
                let y = f(x);
                if !y.is_finite() && err.is_none() {
                    err = Some(x);
                }
                total += w * y;
            });
            match err {
                Some(x) => Err(QuadError::NonFinite(x)),
                None => Ok(total),
            }
        }
    }
}

/// Visits every node and weight of a composite Gauss–Legendre rule on `[lo, hi]`.
pub fn gauss_legendre_nodes<V: FnMut(f64, f64)>(lo: f64, hi: f64, panels: usize, mut visit: V) {
    let (nodes, weights) = legendre_table();
    let panels = panels.max(1);
    let width = (hi - lo) / panels as f64;
    for p in 0..panels {
        let a = lo + p as f64 * width;
        let half = 0.5 * width;
        let mid = a + half;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            visit(mid + half * x, half * w);
        }
    }
}

fn legendre_table() -> &'static (Vec<f64>, Vec<f64>) {
    static TABLE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = GL_ORDER;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for j in 2..=n {
                    let p2 = ((2 * j - 1) as f64 * x * p1 - (j - 1) as f64 * p0) / j as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        (nodes, weights)
    })
}

fn adaptive_simpson<F>(f: &F, lo: f64, hi: f64, tol: f64, max_depth: u32) -> Result<f64, QuadError>
where
    F: Fn(f64) -> f64,
{
    let eval = |x: f64| -> Result<f64, QuadError> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadError::NonFinite(x))
        }
    };
    // start from a few panels so narrow features are not skipped by the first estimate
    const START_PANELS: usize = 8;
    let width = (hi - lo) / START_PANELS as f64;
    let mut total = 0.0;
    for p in 0..START_PANELS {
        let a = lo + p as f64 * width;
        let b = if p + 1 == START_PANELS { hi } else { a + width };
        let (fa, fb) = (eval(a)?, eval(b)?);
        let m = 0.5 * (a + b);
        let fm = eval(m)?;
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        total += simpson_step(&eval, a, b, fa, fm, fb, whole, tol / START_PANELS as f64, max_depth)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<E>(
    eval: &E,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, QuadError>
where
    E: Fn(f64) -> Result<f64, QuadError>,
{
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (eval(lm)?, eval(rm)?);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(QuadError::BudgetExceeded { lo: a, hi: b });
    }
    Ok(simpson_step(eval, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(eval, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}
