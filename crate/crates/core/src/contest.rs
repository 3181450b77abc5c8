//! Model primitives, submission profiles, the noisy-review success function
//! and the per-researcher payoff functionals.

use std::cmp::Ordering;
use std::fmt;

use thiserror::Error;

use crate::distributions::{gauss_legendre_nodes, DistError, ScalarDistribution};
use crate::roots::RootError;

/// Panels of 64 Gauss–Legendre nodes used for every profile integral.
pub const PROFILE_PANELS: usize = 4;

/// Volumes within this slack of the budget count as under-subscribed.
pub const VOLUME_SLACK: f64 = 1e-12;

const CLEARING_BRACKET_SIGMAS: f64 = 10.0;
const CLEARING_MAX_SIGMAS: f64 = 50.0;
const CLEARING_X_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContestError {
    #[error("invalid model parameter: {0}")]
    InvalidParams(String),
    #[error("invalid submission profile: {0}")]
    InvalidProfile(String),
    #[error("no sign change of the clearing condition within ±50σ (volume {volume})")]
    BracketFailure { volume: f64 },
    #[error(transparent)]
    Distribution(#[from] DistError),
    #[error(transparent)]
    Root(#[from] RootError),
}

/// A point of the extended real line. Used both for entry cutoffs
/// (`PosInf` = never submit, `NegInf` = always submit) and for signal
/// thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

pub type Cutoff = ExtReal;

impl ExtReal {
    /// Panics on NaN.
    pub fn from_f64(x: f64) -> Self {
        assert!(!x.is_nan(), "NaN is not an extended real");
        if x == f64::INFINITY {
            ExtReal::PosInf
        } else if x == f64::NEG_INFINITY {
            ExtReal::NegInf
        } else {
            ExtReal::Finite(x)
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(x) => x,
            ExtReal::PosInf => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(x) => Some(x),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn cdf(self, dist: &ScalarDistribution) -> f64 {
        match self {
            ExtReal::NegInf => 0.0,
            ExtReal::Finite(x) => dist.cdf(x),
            ExtReal::PosInf => 1.0,
        }
    }

    pub fn sf(self, dist: &ScalarDistribution) -> f64 {
        match self {
            ExtReal::NegInf => 1.0,
            ExtReal::Finite(x) => dist.sf(x),
            ExtReal::PosInf => 0.0,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(x: f64) -> Self {
        ExtReal::from_f64(x)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::NegInf => write!(f, "-inf"),
            ExtReal::Finite(x) => write!(f, "{x}"),
            ExtReal::PosInf => write!(f, "inf"),
        }
    }
}

/// A persistent researcher type: population weight and quality distribution.
#[derive(Debug, Clone)]
pub struct ResearcherType {
    pub weight: f64,
    pub quality: ScalarDistribution,
}

/// The primitives of the repeated contest.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Benefit of a funded submission.
    pub win_value: f64,
    /// Loss from a rejected submission.
    pub rejection_cost: f64,
    /// Mass of awards funded each period.
    pub budget: f64,
    pub discount: f64,
    /// Population quality distribution (the type mixture when types are set).
    pub quality: ScalarDistribution,
    /// Review noise; signals are `q + ε` with `ε ~ noise`.
    pub noise: ScalarDistribution,
    pub types: Option<Vec<ResearcherType>>,
}

impl ModelParams {
    pub fn new(
        win_value: f64,
        rejection_cost: f64,
        budget: f64,
        discount: f64,
        quality: ScalarDistribution,
        noise: ScalarDistribution,
    ) -> Result<Self, ContestError> {
        let p = Self {
            win_value,
            rejection_cost,
            budget,
            discount,
            quality,
            noise,
            types: None,
        };
        p.validate()?;
        Ok(p)
    }

    /// Normal quality `N(mu_q, var_q)` and zero-mean normal noise `N(0, var_s)`.
    pub fn normal_normal(
        mu_q: f64,
        var_q: f64,
        var_s: f64,
        rejection_cost: f64,
        win_value: f64,
        budget: f64,
        discount: f64,
    ) -> Result<Self, ContestError> {
        Self::new(
            win_value,
            rejection_cost,
            budget,
            discount,
            ScalarDistribution::normal(mu_q, var_q)?,
            ScalarDistribution::normal(0.0, var_s)?,
        )
    }

    /// Replaces the population with a finite set of types; the population
    /// quality distribution becomes their mixture.
    pub fn with_types(mut self, types: Vec<ResearcherType>) -> Result<Self, ContestError> {
        let total: f64 = types.iter().map(|t| t.weight).sum();
        if types.is_empty() || types.iter().any(|t| !(t.weight > 0.0 && t.weight <= 1.0)) {
            return Err(ContestError::InvalidParams(
                "type weights must lie in (0,1]".into(),
            ));
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(ContestError::InvalidParams(format!(
                "type weights must sum to 1, got {total}"
            )));
        }
        self.quality = ScalarDistribution::mixture(
            types.iter().map(|t| (t.weight, t.quality.clone())).collect(),
        )?;
        self.types = Some(types);
        Ok(self)
    }

    pub fn validate(&self) -> Result<(), ContestError> {
        let bad = |m: &str| Err(ContestError::InvalidParams(m.to_string()));
        if !(self.win_value > 0.0 && self.win_value.is_finite()) {
            return bad("V must be positive");
        }
        if !(self.rejection_cost > 0.0 && self.rejection_cost.is_finite()) {
            return bad("C must be positive");
        }
        if !(self.budget > 0.0 && self.budget < 1.0) {
            return bad("k must lie in (0,1)");
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return bad("delta must lie in (0,1)");
        }
        Ok(())
    }

    /// Type distributions, or the single population distribution.
    pub fn type_list(&self) -> Vec<ResearcherType> {
        match &self.types {
            Some(t) => t.clone(),
            None => vec![ResearcherType {
                weight: 1.0,
                quality: self.quality.clone(),
            }],
        }
    }

    /// Socially optimal entry cutoff: the top-`k` quantile of quality.
    pub fn first_best_cutoff(&self) -> Result<f64, ContestError> {
        Ok(self.quality.quantile(1.0 - self.budget)?)
    }

    /// Indifference ratio `C / (C + V)` of the static entry decision.
    pub fn static_indifference(&self) -> f64 {
        self.rejection_cost / (self.rejection_cost + self.win_value)
    }
}

/// One block `weight · eligibility · base^{cutoff}` of a submission profile.
#[derive(Debug, Clone)]
pub struct ProfileComponent {
    /// Share of the component's population that is eligible.
    pub eligibility: f64,
    pub cutoff: Cutoff,
    /// Population weight of the component.
    pub weight: f64,
    pub base: ScalarDistribution,
}

impl ProfileComponent {
    pub fn volume(&self) -> f64 {
        self.weight * self.eligibility * self.cutoff.sf(&self.base)
    }

    pub fn density(&self, q: f64) -> f64 {
        if ExtReal::Finite(q) >= self.cutoff {
            self.weight * self.eligibility * self.base.pdf(q)
        } else {
            0.0
        }
    }

    /// Integration interval `[max(cutoff, lo), hi]` on the truncated support,
    /// or `None` when it is empty.
    pub fn interval(&self) -> Option<(f64, f64)> {
        let (lo, hi) = self.base.support();
        let a = match self.cutoff {
            ExtReal::NegInf => lo,
            ExtReal::Finite(x) => x.max(lo),
            ExtReal::PosInf => return None,
        };
        (a < hi).then_some((a, hi))
    }
}

/// Quality distribution of submissions: a finite mixture of truncated
/// base densities.
#[derive(Debug, Clone)]
pub struct SubmissionProfile {
    components: Vec<ProfileComponent>,
}

impl SubmissionProfile {
    pub fn new(components: Vec<ProfileComponent>) -> Result<Self, ContestError> {
        for c in &components {
            if !(0.0..=1.0).contains(&c.eligibility) {
                return Err(ContestError::InvalidProfile(format!(
                    "eligibility {} outside [0,1]",
                    c.eligibility
                )));
            }
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(ContestError::InvalidProfile(format!(
                    "weight {} outside (0,1]",
                    c.weight
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if total > 1.0 + 1e-12 {
            return Err(ContestError::InvalidProfile(format!(
                "component weights sum to {total} > 1"
            )));
        }
        Ok(Self { components })
    }

    /// `f^Q`: everyone with quality at least `cutoff` submits.
    pub fn truncated(base: &ScalarDistribution, cutoff: Cutoff) -> Self {
        Self::scaled(base, 1.0, cutoff)
    }

    /// `eligibility · f^Q`.
    pub fn scaled(base: &ScalarDistribution, eligibility: f64, cutoff: Cutoff) -> Self {
        Self {
            components: vec![ProfileComponent {
                eligibility: eligibility.clamp(0.0, 1.0),
                cutoff,
                weight: 1.0,
                base: base.clone(),
            }],
        }
    }

    pub fn components(&self) -> &[ProfileComponent] {
        &self.components
    }

    /// The same profile with every eligibility multiplied by `factor ∈ [0,1]`.
    pub fn scale(&self, factor: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| ProfileComponent {
                    eligibility: (c.eligibility * factor).clamp(0.0, 1.0),
                    ..c.clone()
                })
                .collect(),
        }
    }

    pub fn density(&self, q: f64) -> f64 {
        self.components.iter().map(|c| c.density(q)).sum()
    }

    /// Submission volume `v(φ)`.
    pub fn volume(&self) -> f64 {
        self.components.iter().map(|c| c.volume()).sum()
    }

    /// Quadrature nodes `(q_j, w_j)` such that `∫ φ h ≈ Σ w_j h(q_j)`.
    pub fn nodes(&self) -> ProfileNodes {
        let mut q = Vec::new();
        let mut w = Vec::new();
        for c in &self.components {
            let scale = c.weight * c.eligibility;
            if scale == 0.0 {
                continue;
            }
            if let Some((a, b)) = c.interval() {
                gauss_legendre_nodes(a, b, PROFILE_PANELS, |x, wt| {
                    q.push(x);
                    w.push(wt * scale * c.base.pdf(x));
                });
            }
        }
        ProfileNodes { q, w }
    }

    pub fn integrate<H: Fn(f64) -> f64>(&self, h: H) -> f64 {
        self.nodes().integrate(h)
    }
}

#[derive(Debug, Clone)]
pub struct ProfileNodes {
    pub q: Vec<f64>,
    pub w: Vec<f64>,
}

impl ProfileNodes {
    pub fn integrate<H: Fn(f64) -> f64>(&self, h: H) -> f64 {
        self.q.iter().zip(&self.w).map(|(&q, &w)| w * h(q)).sum()
    }
}

/// Success function of a submission profile: the market-clearing signal
/// threshold and `W(q) = 1 − G(s̄ − q)`.
#[derive(Debug, Clone)]
pub struct SuccessEvaluation {
    sbar: ExtReal,
    volume: f64,
    profile: SubmissionProfile,
    noise: ScalarDistribution,
}

impl SuccessEvaluation {
    pub fn new(profile: &SubmissionProfile, params: &ModelParams) -> Result<Self, ContestError> {
        let sbar = signal_cutoff(profile, params)?;
        Ok(Self {
            sbar,
            volume: profile.volume(),
            profile: profile.clone(),
            noise: params.noise.clone(),
        })
    }

    pub fn sbar(&self) -> ExtReal {
        self.sbar
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn profile(&self) -> &SubmissionProfile {
        &self.profile
    }

    /// `W(q, φ)`.
    pub fn win_prob(&self, q: f64) -> f64 {
        match self.sbar {
            ExtReal::NegInf => 1.0,
            ExtReal::Finite(s) => self.noise.sf(s - q),
            ExtReal::PosInf => 0.0,
        }
    }

    /// Mass of funded submissions `∫ φ W`.
    pub fn funded_mass(&self) -> f64 {
        self.profile.integrate(|q| self.win_prob(q))
    }
}

/// Market-clearing signal threshold `s̄(φ)`; `NegInf` when the volume does
/// not exceed the budget.
pub fn signal_cutoff(profile: &SubmissionProfile, params: &ModelParams) -> Result<ExtReal, ContestError> {
    let k = params.budget;
    let volume = profile.volume();
    if volume <= k + VOLUME_SLACK {
        return Ok(ExtReal::NegInf);
    }
    let nodes = profile.nodes();
    // the clearing sum tends to the node volume as s → −∞
    if nodes.w.iter().sum::<f64>() <= k + VOLUME_SLACK {
        return Ok(ExtReal::NegInf);
    }
    let noise = &params.noise;
    let clearing = |s: f64| -> f64 {
        nodes
            .q
            .iter()
            .zip(&nodes.w)
            .map(|(&q, &w)| w * noise.sf(s - q))
            .sum::<f64>()
            - k
    };
    let center = params.quality.center() + noise.center();
    let spread = params.quality.scale().hypot(noise.scale());
    let mut half = CLEARING_BRACKET_SIGMAS * spread;
    let (lo, hi) = loop {
        let (lo, hi) = (center - half, center + half);
        if clearing(lo) > 0.0 && clearing(hi) < 0.0 {
            break (lo, hi);
        }
        if half >= CLEARING_MAX_SIGMAS * spread {
            return Err(ContestError::BracketFailure { volume });
        }
        half = (half * 2.0).min(CLEARING_MAX_SIGMAS * spread);
    };
    let s = newton_in_bracket(&nodes, noise, k, lo, hi)?;
    Ok(ExtReal::Finite(s))
}

/// Safeguarded Newton iteration on the clearing condition; falls back to
/// bisection whenever a step leaves the bracket.
fn newton_in_bracket(
    nodes: &ProfileNodes,
    noise: &ScalarDistribution,
    k: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64, ContestError> {
    let eval = |s: f64| -> (f64, f64) {
        let mut v = 0.0;
        let mut d = 0.0;
        for (&q, &w) in nodes.q.iter().zip(&nodes.w) {
            v += w * noise.sf(s - q);
            d += w * noise.pdf(s - q);
        }
        (v - k, -d)
    };
    let mut s = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d) = eval(s);
        if !v.is_finite() {
            return Err(RootError::NonFinite(s).into());
        }
        if v == 0.0 {
            return Ok(s);
        }
        if v > 0.0 {
            lo = s;
        } else {
            hi = s;
        }
        let newton = s - v / d;
        let next = if d < 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - s).abs() <= CLEARING_X_TOL * (1.0 + s.abs()) || hi - lo <= CLEARING_X_TOL {
            return Ok(next);
        }
        s = next;
    }
    Ok(s)
}

/// `∫_{cutoff}^{∞} base(q) · h(q) dq` on the truncated support of `base`.
pub(crate) fn integrate_above<H: Fn(f64) -> f64>(cutoff: Cutoff, base: &ScalarDistribution, h: H) -> f64 {
    let c = ProfileComponent {
        eligibility: 1.0,
        cutoff,
        weight: 1.0,
        base: base.clone(),
    };
    let Some((a, b)) = c.interval() else {
        return 0.0;
    };
    let mut total = 0.0;
    gauss_legendre_nodes(a, b, PROFILE_PANELS, |x, w| total += w * base.pdf(x) * h(x));
    total
}

/// Ex-ante winning probability `Win(Q, φ) = ∫_Q^∞ f W`.
pub fn win_mass(cutoff: Cutoff, eval: &SuccessEvaluation, base: &ScalarDistribution) -> f64 {
    match eval.sbar {
        ExtReal::NegInf => cutoff.sf(base),
        _ => integrate_above(cutoff, base, |q| eval.win_prob(q)).clamp(0.0, cutoff.sf(base)),
    }
}

/// Ex-ante exclusion probability `Ban(Q, s̄) = ∫_Q^∞ f(q) G(s̄ − q) dq`.
pub fn ban_mass(cutoff: Cutoff, sbar_ban: ExtReal, base: &ScalarDistribution, noise: &ScalarDistribution) -> f64 {
    match sbar_ban {
        ExtReal::NegInf => 0.0,
        ExtReal::PosInf => cutoff.sf(base),
        ExtReal::Finite(s) => integrate_above(cutoff, base, |q| noise.cdf(s - q)).clamp(0.0, cutoff.sf(base)),
    }
}

/// Current-period expected payoff numerator `Win·V − (1 − F(Q) − Win)·C`
/// together with the rejection mass `1 − F(Q) − Win`.
fn period_terms(cutoff: Cutoff, eval: &SuccessEvaluation, base: &ScalarDistribution, params: &ModelParams) -> (f64, f64) {
    let win = win_mass(cutoff, eval, base);
    let rejected = (cutoff.sf(base) - win).max(0.0);
    (win * params.win_value - rejected * params.rejection_cost, rejected)
}

/// Lifetime payoff with one-period exclusion after rejection.
pub fn lifetime_payoff(cutoff: Cutoff, eval: &SuccessEvaluation, params: &ModelParams) -> f64 {
    lifetime_payoff_typed(cutoff, eval, &params.quality, params)
}

/// Lifetime payoff when exclusion is triggered by a signal below `sbar_ban`.
pub fn lifetime_payoff_general(
    cutoff: Cutoff,
    eval: &SuccessEvaluation,
    sbar_ban: ExtReal,
    params: &ModelParams,
) -> f64 {
    let (num, _) = period_terms(cutoff, eval, &params.quality, params);
    let ban = ban_mass(cutoff, sbar_ban, &params.quality, &params.noise);
    let d = params.discount;
    num / ((1.0 - d) * (1.0 + d * ban))
}

/// Lifetime payoff when a rejection excludes for `periods ≥ 1` periods.
pub fn lifetime_payoff_multi(cutoff: Cutoff, eval: &SuccessEvaluation, periods: u32, params: &ModelParams) -> f64 {
    let (num, rejected) = period_terms(cutoff, eval, &params.quality, params);
    let d = params.discount;
    num / ((1.0 - d) * (1.0 + d * rejected * discount_sum(d, periods)))
}

/// Lifetime payoff of a researcher whose ideas are drawn from `type_dist`.
pub fn lifetime_payoff_typed(
    cutoff: Cutoff,
    eval: &SuccessEvaluation,
    type_dist: &ScalarDistribution,
    params: &ModelParams,
) -> f64 {
    let (num, rejected) = period_terms(cutoff, eval, type_dist, params);
    let d = params.discount;
    num / ((1.0 - d) * (1.0 + d * rejected))
}

/// `1 + δ + … + δ^{t−1}`.
pub fn discount_sum(discount: f64, periods: u32) -> f64 {
    (1.0 - discount.powi(periods as i32)) / (1.0 - discount)
}

/// Per-period aggregate welfare of researchers.
pub fn welfare(profile: &SubmissionProfile, params: &ModelParams) -> f64 {
    welfare_from_volume(profile.volume(), params)
}

pub fn welfare_from_volume(volume: f64, params: &ModelParams) -> f64 {
    let k = params.budget;
    if volume >= k {
        k * params.win_value - (volume - k) * params.rejection_cost
    } else {
        volume * params.win_value
    }
}
