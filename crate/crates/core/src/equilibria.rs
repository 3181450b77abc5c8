//! Steady-state equilibria under the five policy regimes, best responses,
//! and the two-type eligibility fixed point.
//!
//! Single-cutoff regimes are solved by a global sign scan of the
//! equilibrium equation on `[F⁻¹(1e-6), Q*)` followed by bisection; every
//! root is reported and the smallest one is canonical.

use std::fmt;

use thiserror::Error;

use crate::contest::{
    ban_mass, discount_sum, lifetime_payoff, lifetime_payoff_general, lifetime_payoff_multi,
    lifetime_payoff_typed, welfare, win_mass, ContestError, Cutoff, ExtReal, ModelParams,
    ProfileComponent, ResearcherType, SubmissionProfile, SuccessEvaluation,
};
use crate::distributions::{DistError, ScalarDistribution};
use crate::par::{self, Execution};
use crate::roots::{bisect, half_open_grid, scan_roots, RootError};

pub const SCAN_POINTS: usize = 2000;
/// Lower end of the root scan, as a quantile of the quality distribution.
pub const SCAN_LOWER_PROB: f64 = 1e-6;
pub const RESIDUAL_TOL: f64 = 1e-8;
const ROOT_X_TOL: f64 = 1e-12;

const ELIGIBILITY_DAMPING: f64 = 0.5;
const ELIGIBILITY_TOL: f64 = 1e-12;
const ELIGIBILITY_MAX_ITER: usize = 10_000;
const OUTER_DAMPING: f64 = 0.5;
const OUTER_TOL: f64 = 1e-10;
const OUTER_MAX_ITER: usize = 500;
const OUTER_STALL: usize = 40;
const FALLBACK_GRID: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime {
    Benchmark,
    /// One-period exclusion after every rejection.
    Exclusion,
    /// Exclusion for one period whenever the review signal falls below the threshold.
    SignalCutoff(ExtReal),
    /// Exclusion for `t` periods after every rejection.
    MultiPeriod(u32),
    /// One-period exclusion with two persistent researcher types.
    TwoType,
}

impl Regime {
    pub fn name(&self) -> &'static str {
        match self {
            Regime::Benchmark => "benchmark",
            Regime::Exclusion => "exclusion",
            Regime::SignalCutoff(_) => "signal_cutoff",
            Regime::MultiPeriod(_) => "multi_period",
            Regime::TwoType => "two_type",
        }
    }

    /// The exclusion rule faced by an individual researcher.
    pub fn policy(&self) -> Policy {
        match *self {
            Regime::Benchmark => Policy::NoExclusion,
            Regime::Exclusion | Regime::TwoType => Policy::Exclusion(1),
            Regime::MultiPeriod(t) => Policy::Exclusion(t),
            Regime::SignalCutoff(s) => Policy::SignalCutoff(s),
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::SignalCutoff(s) => write!(f, "signal_cutoff(sbar_ban={s})"),
            Regime::MultiPeriod(t) => write!(f, "multi_period(t={t})"),
            other => f.write_str(other.name()),
        }
    }
}

/// Exclusion rule applied to an individual submitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    NoExclusion,
    /// Ineligible for `t` periods after a rejection.
    Exclusion(u32),
    /// Ineligible for one period after a signal below the threshold.
    SignalCutoff(ExtReal),
}

#[derive(Debug, Error, Clone)]
pub enum EquilibriumError {
    #[error("no sign change of the {regime} equilibrium equation on the scan grid")]
    NoRoot { regime: String },
    #[error("corner equilibrium: k >= 1/(1+Ban(-inf, sbar_ban)) = {bound}; every eligible researcher applies and wins")]
    CornerEquilibrium {
        bound: f64,
        outcome: Box<EquilibriumOutcome>,
    },
    #[error("two-type iteration did not converge (best residual {best_residual:e})")]
    NoConvergence { best_residual: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Contest(#[from] ContestError),
}

impl From<DistError> for EquilibriumError {
    fn from(e: DistError) -> Self {
        EquilibriumError::Contest(e.into())
    }
}

impl From<RootError> for EquilibriumError {
    fn from(e: RootError) -> Self {
        EquilibriumError::Contest(e.into())
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumOutcome {
    pub regime: Regime,
    /// One cutoff per type (a single entry outside the two-type regime).
    pub cutoffs: Vec<Cutoff>,
    /// Steady-state eligible mass per type; for two types these are the
    /// absolute masses `α_i ≤ λ_i`.
    pub eligibility: Vec<f64>,
    pub sbar: ExtReal,
    pub submission_volume: f64,
    /// Largest absolute residual of the defining equations at the solution.
    pub residual: f64,
    /// Residual of the eligibility fixed point (two types only).
    pub eligibility_residual: Option<f64>,
    /// Every candidate solution found, ascending; the canonical one is first.
    pub all_roots: Vec<Vec<Cutoff>>,
    pub welfare: f64,
    /// Lifetime payoff of an eligible researcher, per type.
    pub payoff_x: Vec<f64>,
    pub profile: SubmissionProfile,
    /// The sufficient existence condition on `V/C` does not hold.
    pub hypothesis_unmet: bool,
}

impl EquilibriumOutcome {
    pub fn cutoff(&self) -> Cutoff {
        self.cutoffs[0]
    }

    pub fn alpha(&self) -> f64 {
        self.eligibility[0]
    }

    pub fn payoff(&self) -> f64 {
        self.payoff_x[0]
    }

    pub fn evaluation(&self, params: &ModelParams) -> Result<SuccessEvaluation, EquilibriumError> {
        Ok(SuccessEvaluation::new(&self.profile, params)?)
    }
}

/// Both sides of a single-cutoff equilibrium equation at one cutoff.
#[derive(Debug, Clone)]
pub struct EquationPoint {
    pub cutoff: f64,
    /// `W(Q, φ^Q)` for the regime's steady-state profile.
    pub lhs: f64,
    pub rhs: f64,
    pub eligibility: f64,
    pub profile: SubmissionProfile,
    pub eval: SuccessEvaluation,
}

impl EquationPoint {
    pub fn residual(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Steady-state eligibility share induced by a common cutoff.
pub fn steady_state_eligibility(params: &ModelParams, regime: &Regime, q: Cutoff) -> f64 {
    let f = &params.quality;
    let k = params.budget;
    let big_f = q.cdf(f);
    let nominal = 1.0 - big_f;
    match *regime {
        Regime::Benchmark => 1.0,
        _ if nominal <= k => 1.0,
        Regime::Exclusion | Regime::TwoType => (1.0 + k) / (2.0 - big_f),
        Regime::MultiPeriod(t) => {
            let t = t as f64;
            (1.0 + t * k) / (1.0 + t * nominal)
        }
        Regime::SignalCutoff(s) => 1.0 / (1.0 + ban_mass(q, s, f, &params.noise)),
    }
}

/// Evaluates both sides of the regime's equilibrium equation at cutoff `q`.
pub fn equation_sides(params: &ModelParams, regime: &Regime, q: f64) -> Result<EquationPoint, EquilibriumError> {
    let f = &params.quality;
    let (c, v, k, d) = (
        params.rejection_cost,
        params.win_value,
        params.budget,
        params.discount,
    );
    let cut = ExtReal::Finite(q);
    let big_f = f.cdf(q);
    let alpha = steady_state_eligibility(params, regime, cut);
    let profile = SubmissionProfile::scaled(f, alpha, cut);
    let eval = SuccessEvaluation::new(&profile, params)?;
    let lhs = eval.win_prob(q);
    let rhs = match *regime {
        Regime::Benchmark => params.static_indifference(),
        Regime::Exclusion | Regime::TwoType => {
            ((1.0 + k) * c + k * d * (2.0 - big_f) * v)
                / ((1.0 + k) * c + (1.0 + k) * (1.0 + d - d * big_f) * v)
        }
        Regime::MultiPeriod(t) => {
            let tf = t as f64;
            let s = discount_sum(d, t);
            let rej = 1.0 - big_f;
            ((1.0 + tf * k) * c + k * d * s * (1.0 + tf * rej) * v)
                / ((1.0 + tf * k) * c + (1.0 + tf * k) * (1.0 + d * s * rej) * v)
        }
        Regime::SignalCutoff(sb) => {
            let ban = ban_mass(cut, sb, f, &params.noise);
            let g = match sb {
                ExtReal::NegInf => 0.0,
                ExtReal::PosInf => 1.0,
                ExtReal::Finite(s) => params.noise.cdf(s - q),
            };
            let kb = k * (1.0 + ban);
            (c * (1.0 + d * ban) + d * g * (kb * v - (1.0 - big_f - kb) * c)) / ((c + v) * (1.0 + d * ban))
        }
    };
    Ok(EquationPoint {
        cutoff: q,
        lhs,
        rhs,
        eligibility: alpha,
        profile,
        eval,
    })
}

/// Sign-change roots of the equilibrium equation, ascending.
pub fn scan_equation(params: &ModelParams, regime: &Regime, exec: Execution) -> Result<Vec<f64>, EquilibriumError> {
    let qs = params.first_best_cutoff()?;
    let lo = params.quality.quantile(SCAN_LOWER_PROB)?;
    let f = |q: f64| equation_sides(params, regime, q).map(|p| p.residual());
    let roots = scan_roots(&f, &half_open_grid(lo, qs, SCAN_POINTS), ROOT_X_TOL, exec)?;
    if !roots.is_empty() {
        return Ok(roots);
    }
    // very large V pushes the root into the far left tail
    let floor = params.quality.support().0;
    if floor < lo {
        return scan_roots(&f, &half_open_grid(floor, lo, SCAN_POINTS), ROOT_X_TOL, exec);
    }
    Ok(roots)
}

fn hypothesis_unmet(params: &ModelParams, regime: &Regime) -> bool {
    let ratio = params.win_value / params.rejection_cost;
    let k = params.budget;
    match *regime {
        Regime::Exclusion | Regime::TwoType => ratio < (1.0 - k) / (2.0 * k),
        Regime::MultiPeriod(t) => ratio < (1.0 - k) / ((t as f64 + 1.0) * k),
        _ => false,
    }
}

fn regime_payoff(params: &ModelParams, regime: &Regime, q: Cutoff, eval: &SuccessEvaluation) -> f64 {
    match *regime {
        Regime::Benchmark => lifetime_payoff_general(q, eval, ExtReal::NegInf, params),
        Regime::Exclusion | Regime::TwoType => lifetime_payoff(q, eval, params),
        Regime::MultiPeriod(t) => lifetime_payoff_multi(q, eval, t, params),
        Regime::SignalCutoff(s) => lifetime_payoff_general(q, eval, s, params),
    }
}

/// Builds the full outcome of a single-cutoff regime at a given root.
pub fn outcome_at(params: &ModelParams, regime: &Regime, q: f64) -> Result<EquilibriumOutcome, EquilibriumError> {
    let point = equation_sides(params, regime, q)?;
    let cut = ExtReal::Finite(q);
    Ok(EquilibriumOutcome {
        regime: *regime,
        cutoffs: vec![cut],
        eligibility: vec![point.eligibility],
        sbar: point.eval.sbar(),
        submission_volume: point.profile.volume(),
        residual: point.residual().abs(),
        eligibility_residual: None,
        all_roots: vec![vec![cut]],
        welfare: welfare(&point.profile, params),
        payoff_x: vec![regime_payoff(params, regime, cut, &point.eval)],
        hypothesis_unmet: hypothesis_unmet(params, regime),
        profile: point.profile,
    })
}

/// Solves any regime. Single-cutoff regimes return the smallest admissible
/// root with every admissible root listed in `all_roots`.
pub fn solve(params: &ModelParams, regime: &Regime, exec: Execution) -> Result<EquilibriumOutcome, EquilibriumError> {
    params.validate()?;
    match *regime {
        Regime::TwoType => return solve_two_type_with(params, exec),
        Regime::MultiPeriod(0) => return Err(EquilibriumError::Invalid("t must be at least 1".into())),
        Regime::SignalCutoff(s) => {
            let bound = 1.0 / (1.0 + ban_mass(ExtReal::NegInf, s, &params.quality, &params.noise));
            if params.budget >= bound {
                return Err(EquilibriumError::CornerEquilibrium {
                    bound,
                    outcome: Box::new(corner_outcome(params, regime, bound)?),
                });
            }
        }
        _ => {}
    }
    let roots = scan_equation(params, regime, exec)?;
    let mut outcomes = Vec::new();
    for q in roots {
        let out = outcome_at(params, regime, q)?;
        // the equation presumes an over-subscribed steady state and x > 0
        if out.submission_volume > params.budget && out.payoff() > 0.0 {
            outcomes.push(out);
        }
    }
    let all: Vec<Vec<Cutoff>> = outcomes.iter().map(|o| o.cutoffs.clone()).collect();
    let mut first = outcomes.into_iter().next().ok_or_else(|| EquilibriumError::NoRoot {
        regime: regime.to_string(),
    })?;
    first.all_roots = all;
    Ok(first)
}

fn corner_outcome(params: &ModelParams, regime: &Regime, alpha: f64) -> Result<EquilibriumOutcome, EquilibriumError> {
    let profile = SubmissionProfile::scaled(&params.quality, alpha, ExtReal::NegInf);
    let eval = SuccessEvaluation::new(&profile, params)?;
    Ok(EquilibriumOutcome {
        regime: *regime,
        cutoffs: vec![ExtReal::NegInf],
        eligibility: vec![alpha],
        sbar: eval.sbar(),
        submission_volume: profile.volume(),
        residual: 0.0,
        eligibility_residual: None,
        all_roots: vec![vec![ExtReal::NegInf]],
        welfare: welfare(&profile, params),
        payoff_x: vec![regime_payoff(params, regime, ExtReal::NegInf, &eval)],
        hypothesis_unmet: false,
        profile,
    })
}

pub fn solve_benchmark(params: &ModelParams) -> Result<EquilibriumOutcome, EquilibriumError> {
    solve(params, &Regime::Benchmark, Execution::default())
}

pub fn solve_exclusion(params: &ModelParams) -> Result<EquilibriumOutcome, EquilibriumError> {
    solve(params, &Regime::Exclusion, Execution::default())
}

pub fn solve_signal_cutoff(params: &ModelParams, sbar_ban: ExtReal) -> Result<EquilibriumOutcome, EquilibriumError> {
    solve(params, &Regime::SignalCutoff(sbar_ban), Execution::default())
}

pub fn solve_multi_period(params: &ModelParams, t: u32) -> Result<EquilibriumOutcome, EquilibriumError> {
    solve(params, &Regime::MultiPeriod(t), Execution::default())
}

pub fn solve_two_type(params: &ModelParams) -> Result<EquilibriumOutcome, EquilibriumError> {
    solve(params, &Regime::TwoType, Execution::default())
}

/// Residual `W(Q) − RHS(Q)` of the best-response equation under `policy`,
/// together with the lifetime payoff at `Q`.
pub fn best_response_residual(
    q: f64,
    eval: &SuccessEvaluation,
    params: &ModelParams,
    policy: &Policy,
) -> (f64, f64) {
    let (c, v, d) = (params.rejection_cost, params.win_value, params.discount);
    let cut = ExtReal::Finite(q);
    let w = eval.win_prob(q);
    match *policy {
        Policy::NoExclusion => (w - c / (c + v), lifetime_payoff_general(cut, eval, ExtReal::NegInf, params)),
        Policy::Exclusion(t) => {
            let x = lifetime_payoff_multi(cut, eval, t, params);
            let a = c + d * (1.0 - d.powi(t as i32)) * x;
            (w - a / (a + v), x)
        }
        Policy::SignalCutoff(sb) => {
            let x = lifetime_payoff_general(cut, eval, sb, params);
            let g = match sb {
                ExtReal::NegInf => 0.0,
                ExtReal::PosInf => 1.0,
                ExtReal::Finite(s) => params.noise.cdf(s - q),
            };
            (w - (c + d * (1.0 - d) * g * x) / (c + v), x)
        }
    }
}

/// Residual of the best-response equation of a researcher whose ideas are
/// drawn from `type_dist` under one-period exclusion.
pub fn typed_best_response_residual(
    q: f64,
    eval: &SuccessEvaluation,
    type_dist: &ScalarDistribution,
    params: &ModelParams,
) -> (f64, f64) {
    let (c, v, d) = (params.rejection_cost, params.win_value, params.discount);
    let x = lifetime_payoff_typed(ExtReal::Finite(q), eval, type_dist, params);
    let a = c + d * (1.0 - d) * x;
    (eval.win_prob(q) - a / (a + v), x)
}

/// Unique best-response cutoff to a recurrent submission profile.
pub fn best_response(phi: &SubmissionProfile, params: &ModelParams, policy: &Policy) -> Result<Cutoff, EquilibriumError> {
    let eval = SuccessEvaluation::new(phi, params)?;
    best_response_to(&eval, params, &params.quality, |q| {
        best_response_residual(q, &eval, params, policy)
    })
}

/// Best response of a type drawing ideas from `type_dist` (one-period exclusion).
pub fn best_response_typed(
    phi: &SubmissionProfile,
    params: &ModelParams,
    type_dist: &ScalarDistribution,
) -> Result<Cutoff, EquilibriumError> {
    let eval = SuccessEvaluation::new(phi, params)?;
    best_response_typed_to(&eval, params, type_dist)
}

fn best_response_typed_to(
    eval: &SuccessEvaluation,
    params: &ModelParams,
    type_dist: &ScalarDistribution,
) -> Result<Cutoff, EquilibriumError> {
    best_response_to(eval, params, type_dist, |q| {
        typed_best_response_residual(q, eval, type_dist, params)
    })
}

fn best_response_to<R>(
    eval: &SuccessEvaluation,
    params: &ModelParams,
    dist: &ScalarDistribution,
    residual: R,
) -> Result<Cutoff, EquilibriumError>
where
    R: Fn(f64) -> (f64, f64),
{
    let sbar = match eval.sbar() {
        ExtReal::Finite(s) => s,
        _ => return Ok(ExtReal::NegInf),
    };
    let (c, v) = (params.rejection_cost, params.win_value);
    // the no-exclusion best response is a lower bound for every policy
    let q_lo = sbar - params.noise.quantile(v / (c + v))?;
    let (r_lo, _) = residual(q_lo);
    if r_lo >= 0.0 {
        return Ok(ExtReal::Finite(q_lo));
    }
    let mut step = dist.scale().max(1e-3);
    let mut q_hi = q_lo + step;
    let mut tries = 0;
    while residual(q_hi).0 < 0.0 {
        step *= 2.0;
        q_hi = q_lo + step;
        tries += 1;
        if tries > 60 {
            return Err(RootError::NoSignChange { lo: q_lo, hi: q_hi }.into());
        }
    }
    let q = bisect(|q| residual(q).0, q_lo, q_hi, ROOT_X_TOL, 200)?;
    let (_, x) = residual(q);
    if x < 0.0 {
        return Err(EquilibriumError::Invalid(format!(
            "best response at {q} has negative payoff {x}"
        )));
    }
    Ok(ExtReal::Finite(q))
}

/// Submission profile `Σ α_i f_i^{Q_i}` with absolute eligible masses `α_i`.
pub fn typed_profile(types: &[ResearcherType], alphas: &[f64], cutoffs: &[Cutoff]) -> Result<SubmissionProfile, EquilibriumError> {
    let components = types
        .iter()
        .zip(alphas)
        .zip(cutoffs)
        .map(|((t, &a), &q)| ProfileComponent {
            eligibility: (a / t.weight).clamp(0.0, 1.0),
            cutoff: q,
            weight: t.weight,
            base: t.quality.clone(),
        })
        .collect();
    Ok(SubmissionProfile::new(components)?)
}

/// Steady-state eligible masses for per-type cutoffs, by damped iteration
/// of `α_i ← λ_i − [α_i (1 − F_i(Q_i)) − k_i(α)]`. Returns the masses and
/// the final fixed-point residual.
pub fn eligibility_fixed_point(
    params: &ModelParams,
    cutoffs: &[Cutoff],
    start: Option<&[f64]>,
) -> Result<(Vec<f64>, f64), EquilibriumError> {
    let types = params.type_list();
    if cutoffs.len() != types.len() {
        return Err(EquilibriumError::Invalid(format!(
            "{} cutoffs for {} types",
            cutoffs.len(),
            types.len()
        )));
    }
    let lambdas: Vec<f64> = types.iter().map(|t| t.weight).collect();
    let nominal: f64 = types.iter().zip(cutoffs).map(|(t, q)| t.weight * q.sf(&t.quality)).sum();
    if nominal <= params.budget {
        return Ok((lambdas, 0.0));
    }
    let mut alpha: Vec<f64> = match start {
        Some(a) => a.to_vec(),
        None => lambdas.clone(),
    };
    let mut resid = f64::INFINITY;
    for _ in 0..ELIGIBILITY_MAX_ITER {
        let next = eligibility_map(params, &types, &alpha, cutoffs)?;
        resid = next.iter().zip(&alpha).map(|(n, a)| (n - a).abs()).fold(0.0, f64::max);
        if resid < ELIGIBILITY_TOL {
            return Ok((alpha, resid));
        }
        for ((a, n), l) in alpha.iter_mut().zip(&next).zip(&lambdas) {
            *a = ((1.0 - ELIGIBILITY_DAMPING) * *a + ELIGIBILITY_DAMPING * n).clamp(0.0, *l);
        }
    }
    Err(EquilibriumError::NoConvergence { best_residual: resid })
}

/// One undamped application of the eligibility map.
pub fn eligibility_map(
    params: &ModelParams,
    types: &[ResearcherType],
    alpha: &[f64],
    cutoffs: &[Cutoff],
) -> Result<Vec<f64>, EquilibriumError> {
    let profile = typed_profile(types, alpha, cutoffs)?;
    let eval = SuccessEvaluation::new(&profile, params)?;
    Ok(types
        .iter()
        .zip(alpha)
        .zip(cutoffs)
        .map(|((t, &a), &q)| {
            let won = a * win_mass(q, &eval, &t.quality);
            t.weight - (a * q.sf(&t.quality) - won)
        })
        .collect())
}

struct TypedState {
    alpha: Vec<f64>,
    eval: SuccessEvaluation,
    responses: Vec<f64>,
    gap: f64,
}

fn typed_state(
    params: &ModelParams,
    types: &[ResearcherType],
    cutoffs: &[f64],
    warm: Option<&[f64]>,
    floor: &[f64],
) -> Result<TypedState, EquilibriumError> {
    let cuts: Vec<Cutoff> = cutoffs.iter().map(|&q| ExtReal::Finite(q)).collect();
    let (alpha, _) = eligibility_fixed_point(params, &cuts, warm)?;
    let profile = typed_profile(types, &alpha, &cuts)?;
    let eval = SuccessEvaluation::new(&profile, params)?;
    let mut responses = Vec::with_capacity(types.len());
    for (t, &lo) in types.iter().zip(floor) {
        let br = best_response_typed_to(&eval, params, &t.quality)?;
        responses.push(br.finite().unwrap_or(lo).max(lo));
    }
    let gap = responses
        .iter()
        .zip(cutoffs)
        .map(|(r, q)| (r - q).abs())
        .fold(0.0, f64::max);
    Ok(TypedState {
        alpha,
        eval,
        responses,
        gap,
    })
}

fn solve_two_type_with(params: &ModelParams, exec: Execution) -> Result<EquilibriumOutcome, EquilibriumError> {
    let types = match &params.types {
        Some(t) if t.len() == 2 => t.clone(),
        _ => {
            return Err(EquilibriumError::Invalid(
                "the two-type regime needs exactly two researcher types".into(),
            ))
        }
    };
    let floor: Vec<f64> = types
        .iter()
        .map(|t| t.quality.support().0)
        .collect();
    let pooled = solve(params, &Regime::Exclusion, exec)?;
    let start = pooled.cutoff().finite().unwrap_or(floor[0]);
    let mut q = vec![start; 2];
    let mut warm: Option<Vec<f64>> = None;
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut since_best = 0;
    let mut fallback_used = false;
    let mut iter = 0;
    let state = loop {
        let st = typed_state(params, &types, &q, warm.as_deref(), &floor)?;
        if st.gap < OUTER_TOL {
            break st;
        }
        match &best {
            Some((g, _)) if st.gap >= 0.5 * g => since_best += 1,
            _ => {
                best = Some((st.gap, q.clone()));
                since_best = 0;
            }
        }
        iter += 1;
        if since_best >= OUTER_STALL || iter >= OUTER_MAX_ITER {
            if fallback_used || iter >= OUTER_MAX_ITER {
                let best_residual = best.map(|b| b.0).unwrap_or(st.gap);
                return Err(EquilibriumError::NoConvergence { best_residual });
            }
            fallback_used = true;
            q = grid_restart(params, &types, &q, &floor, exec)?;
            best = None;
            since_best = 0;
            warm = None;
            continue;
        }
        for (qi, r) in q.iter_mut().zip(&st.responses) {
            *qi += OUTER_DAMPING * (r - *qi);
        }
        warm = Some(st.alpha);
    };

    let cuts: Vec<Cutoff> = q.iter().map(|&x| ExtReal::Finite(x)).collect();
    let next = eligibility_map(params, &types, &state.alpha, &cuts)?;
    let elig_resid = next
        .iter()
        .zip(&state.alpha)
        .map(|(n, a)| (n - a).abs())
        .fold(0.0, f64::max);
    let mut residual: f64 = 0.0;
    let mut payoffs = Vec::new();
    for (t, &qi) in types.iter().zip(&q) {
        let (r, x) = typed_best_response_residual(qi, &state.eval, &t.quality, params);
        residual = residual.max(r.abs());
        payoffs.push(x);
    }
    if dominates(&types[0].quality, &types[1].quality) && q[0] < q[1] - 1e-9 {
        return Err(EquilibriumError::Invalid(format!(
            "dominant type has the lower cutoff ({} < {})",
            q[0], q[1]
        )));
    }
    let profile = state.eval.profile().clone();
    Ok(EquilibriumOutcome {
        regime: Regime::TwoType,
        cutoffs: cuts.clone(),
        eligibility: state.alpha,
        sbar: state.eval.sbar(),
        submission_volume: profile.volume(),
        residual,
        eligibility_residual: Some(elig_resid),
        all_roots: vec![cuts],
        welfare: welfare(&profile, params),
        payoff_x: payoffs,
        profile,
        hypothesis_unmet: hypothesis_unmet(params, &Regime::TwoType),
    })
}

/// Coarse residual grid around `center`, used to restart an oscillating
/// outer iteration from the best grid point.
fn grid_restart(
    params: &ModelParams,
    types: &[ResearcherType],
    center: &[f64],
    floor: &[f64],
    exec: Execution,
) -> Result<Vec<f64>, EquilibriumError> {
    let n = FALLBACK_GRID;
    let half = 1.0;
    let axis = |c: f64| -> Vec<f64> { (0..n).map(|i| c - half + 2.0 * half * i as f64 / (n - 1) as f64).collect() };
    let (ax, ay) = (axis(center[0]), axis(center[1]));
    let gaps = par::map_range(n * n, exec, |idx| {
        let q = [ax[idx / n], ay[idx % n]];
        typed_state(params, types, &q, None, floor).map(|s| s.gap).unwrap_or(f64::INFINITY)
    });
    let (best, _) = gaps
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &g)| if g < acc.1 { (i, g) } else { acc });
    Ok(vec![ax[best / n], ay[best % n]])
}

/// `a` first-order stochastically dominates `b` on a grid over both supports.
fn dominates(a: &ScalarDistribution, b: &ScalarDistribution) -> bool {
    let lo = a.support().0.min(b.support().0);
    let hi = a.support().1.max(b.support().1);
    (0..=1000).all(|i| {
        let x = lo + (hi - lo) * i as f64 / 1000.0;
        a.cdf(x) <= b.cdf(x) + 1e-12
    })
}
