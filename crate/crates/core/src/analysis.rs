//! Winner densities, dominance comparisons, first-best benchmarks,
//! parameter sweeps and trend diagnostics.

use thiserror::Error;

use crate::contest::{ContestError, ExtReal, ModelParams, SubmissionProfile, SuccessEvaluation};
use crate::distributions::{gauss_legendre_nodes, integrate_finite, DistError, Quadrature, ScalarDistribution};
use crate::equilibria::{solve, EquilibriumError, EquilibriumOutcome, Regime};
use crate::par::{self, Execution};
use crate::roots::bisect;

/// Slack applied to cumulative differences in dominance tests.
pub const CDF_SLACK: f64 = 1e-9;
/// Slack applied to pointwise density differences when reading sign patterns.
pub const DENSITY_SLACK: f64 = 1e-10;

#[derive(Debug, Error, Clone)]
pub enum AnalysisError {
    #[error("winner densities are on different grids")]
    GridMismatch,
    #[error("signal distribution fails the increasing hazard rate check near {0}")]
    HypothesisUnmet(f64),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Contest(#[from] ContestError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
}

impl From<DistError> for AnalysisError {
    fn from(e: DistError) -> Self {
        AnalysisError::Contest(e.into())
    }
}

/// Quality density of funded submissions, `h(q) = φ(q) W(q, φ)`, tabulated
/// on a uniform grid over the truncated quality support.
#[derive(Debug, Clone)]
pub struct WinnerDensity {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// `∫_{grid[0]}^{grid[i]} h`, integrated exactly cell by cell.
    pub cumulative: Vec<f64>,
    pub total_mass: f64,
    eval: SuccessEvaluation,
}

impl WinnerDensity {
    pub fn at(&self, q: f64) -> f64 {
        self.eval.profile().density(q) * self.eval.win_prob(q)
    }

    pub fn evaluation(&self) -> &SuccessEvaluation {
        &self.eval
    }

    /// Winner mass on `[a, b]`.
    pub fn mass_between(&self, a: f64, b: f64) -> f64 {
        let mut breaks: Vec<f64> = self
            .eval
            .profile()
            .components()
            .iter()
            .filter_map(|c| c.cutoff.finite())
            .filter(|&x| x > a && x < b)
            .collect();
        breaks.sort_by(f64::total_cmp);
        let mut pts = vec![a];
        pts.extend(breaks);
        pts.push(b);
        let mut total = 0.0;
        for w in pts.windows(2) {
            gauss_legendre_nodes(w[0], w[1], 1, |x, wt| total += wt * self.at(x));
        }
        total
    }
}

pub fn winner_density(phi: &SubmissionProfile, params: &ModelParams, grid_size: usize) -> Result<WinnerDensity, AnalysisError> {
    if grid_size < 100 {
        return Err(AnalysisError::Invalid(format!("grid_size must be at least 100, got {grid_size}")));
    }
    let eval = SuccessEvaluation::new(phi, params)?;
    let (lo, hi) = params.quality.support();
    let grid: Vec<f64> = (0..grid_size)
        .map(|i| lo + (hi - lo) * i as f64 / (grid_size - 1) as f64)
        .collect();
    let mut out = WinnerDensity {
        grid: Vec::new(),
        values: Vec::new(),
        cumulative: Vec::new(),
        total_mass: 0.0,
        eval,
    };
    out.values = grid.iter().map(|&q| out.at(q)).collect();
    let mut acc = 0.0;
    out.cumulative.push(0.0);
    for w in grid.windows(2) {
        acc += out.mass_between(w[0], w[1]);
        out.cumulative.push(acc);
    }
    out.total_mass = acc;
    out.grid = grid;
    Ok(out)
}

/// Winner mass of `phi` in each cell delimited by `edges`.
pub fn winner_bin_masses(phi: &SubmissionProfile, params: &ModelParams, edges: &[f64]) -> Result<Vec<f64>, AnalysisError> {
    let h = winner_density(phi, params, 100)?;
    Ok(edges.windows(2).map(|e| h.mass_between(e[0], e[1])).collect())
}

/// `½ Σ |a_i − b_i|` for two vectors of bin masses.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    /// `h` first-order stochastically dominates `h0`.
    FirstOrderDominates,
    DominatedBy,
    /// `h ≥ h0` on `[cutoff, Q̄]` and `h ≤ h0` elsewhere.
    SingleCrossing(f64),
    Incomparable,
}

#[derive(Debug, Clone)]
pub struct DominanceReport {
    pub verdict: Verdict,
    pub h_dominates: bool,
    pub h0_dominates: bool,
    /// `H(q) − H0(q)` on the common grid.
    pub evidence: Vec<f64>,
}

/// Checks that `pdf / sf` is non-decreasing on a grid over the support.
pub fn has_increasing_hazard(dist: &ScalarDistribution) -> Result<(), AnalysisError> {
    let (lo, hi) = dist.support();
    let mut prev = 0.0;
    for i in 0..=1000 {
        let x = lo + (hi - lo) * i as f64 / 1000.0;
        let sf = dist.sf(x);
        if sf <= 0.0 {
            break;
        }
        let h = dist.pdf(x) / sf;
        if h < prev * (1.0 - 1e-9) {
            return Err(AnalysisError::HypothesisUnmet(x));
        }
        prev = h;
    }
    Ok(())
}

/// Compares two winner densities on a common grid. With `hazard` set, the
/// signal distribution is first checked for an increasing hazard rate.
pub fn compare_winners(
    h: &WinnerDensity,
    h0: &WinnerDensity,
    hazard: Option<&ScalarDistribution>,
) -> Result<DominanceReport, AnalysisError> {
    if h.grid.len() != h0.grid.len() || h.grid.iter().zip(&h0.grid).any(|(a, b)| (a - b).abs() > 1e-12) {
        return Err(AnalysisError::GridMismatch);
    }
    if let Some(g) = hazard {
        has_increasing_hazard(g)?;
    }
    let evidence: Vec<f64> = h.cumulative.iter().zip(&h0.cumulative).map(|(a, b)| a - b).collect();
    let h_dominates = evidence.iter().all(|&d| d <= CDF_SLACK);
    let h0_dominates = evidence.iter().all(|&d| d >= -CDF_SLACK);
    let verdict = match (h_dominates, h0_dominates) {
        (true, true) => Verdict::Incomparable,
        (true, false) => Verdict::FirstOrderDominates,
        (false, true) => Verdict::DominatedBy,
        (false, false) => match single_crossing(h, h0) {
            Some(q) => Verdict::SingleCrossing(q),
            None => Verdict::Incomparable,
        },
    };
    Ok(DominanceReport {
        verdict,
        h_dominates,
        h0_dominates,
        evidence,
    })
}

/// Locates `Q̄` when `h − h0` follows the pattern `≤0 … >0 … <0` on the grid.
fn single_crossing(h: &WinnerDensity, h0: &WinnerDensity) -> Option<f64> {
    let diff: Vec<f64> = h.values.iter().zip(&h0.values).map(|(a, b)| a - b).collect();
    let sign = |d: f64| {
        if d > DENSITY_SLACK {
            1
        } else if d < -DENSITY_SLACK {
            -1
        } else {
            0
        }
    };
    let mut stage = 0; // 0: non-positive prefix, 1: positive block, 2: negative tail
    let mut last_pos = None;
    let mut first_neg_after = None;
    for (i, &d) in diff.iter().enumerate() {
        match (stage, sign(d)) {
            (0, 1) => {
                stage = 1;
                last_pos = Some(i);
            }
            (0, _) => {}
            (1, 1) => last_pos = Some(i),
            (1, -1) => {
                stage = 2;
                first_neg_after = Some(i);
            }
            (1, 0) => {}
            (2, 1) => return None,
            (2, _) => {}
            _ => unreachable!(),
        }
    }
    let (a, b) = (h.grid[last_pos?], h.grid[first_neg_after?]);
    let f = |q: f64| {
        let d = h.at(q) - h0.at(q);
        if d > DENSITY_SLACK {
            1.0
        } else {
            -1.0
        }
    };
    bisect(f, a, b, 1e-12, 200).ok()
}

#[derive(Debug, Clone)]
pub struct FirstBest {
    pub q_star: f64,
    pub welfare: f64,
    pub winner_density: WinnerDensity,
}

pub fn first_best(params: &ModelParams, grid_size: usize) -> Result<FirstBest, AnalysisError> {
    let q_star = params.first_best_cutoff()?;
    let phi = SubmissionProfile::truncated(&params.quality, ExtReal::Finite(q_star));
    Ok(FirstBest {
        q_star,
        welfare: params.budget * params.win_value,
        winner_density: winner_density(&phi, params, grid_size)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    WinValue,
    Periods,
    SbarBan,
    Discount,
    Budget,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "V" => SweepAxis::WinValue,
            "t" => SweepAxis::Periods,
            "sbar_ban" => SweepAxis::SbarBan,
            "delta" => SweepAxis::Discount,
            "k" => SweepAxis::Budget,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::WinValue => "V",
            SweepAxis::Periods => "t",
            SweepAxis::SbarBan => "sbar_ban",
            SweepAxis::Discount => "delta",
            SweepAxis::Budget => "k",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: Result<EquilibriumOutcome, String>,
}

/// Applies one sweep value to the parameters and regime.
pub fn sweep_point(params: &ModelParams, axis: SweepAxis, value: f64, regime: &Regime) -> Result<(ModelParams, Regime), String> {
    let mut p = params.clone();
    let mut r = *regime;
    match axis {
        SweepAxis::WinValue => p.win_value = value,
        SweepAxis::Discount => p.discount = value,
        SweepAxis::Budget => p.budget = value,
        SweepAxis::Periods => {
            if value < 1.0 || value.fract() != 0.0 {
                return Err(format!("t must be a positive integer, got {value}"));
            }
            r = Regime::MultiPeriod(value as u32);
        }
        SweepAxis::SbarBan => r = Regime::SignalCutoff(ExtReal::from_f64(value)),
    }
    p.validate().map_err(|e| e.to_string())?;
    Ok((p, r))
}

/// Solves the regime at every value along `axis`. Failures are kept inline.
pub fn sweep(
    params: &ModelParams,
    axis: SweepAxis,
    values: &[f64],
    regime: &Regime,
    exec: Execution,
) -> Result<Vec<SweepRow>, AnalysisError> {
    if values.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(AnalysisError::Invalid("sweep values must be sorted".into()));
    }
    match (axis, regime) {
        (SweepAxis::Periods, Regime::MultiPeriod(_)) | (SweepAxis::SbarBan, Regime::SignalCutoff(_)) => {}
        (SweepAxis::Periods | SweepAxis::SbarBan, _) => {
            return Err(AnalysisError::Invalid(format!(
                "axis {} does not apply to the {} regime",
                axis.name(),
                regime.name()
            )))
        }
        _ => {}
    }
    // each solve is sequential; the sweep itself is the parallel loop
    Ok(par::map(values, exec, |&value| SweepRow {
        value,
        outcome: sweep_point(params, axis, value, regime)
            .and_then(|(p, r)| solve(&p, &r, Execution::Sequential).map_err(|e| e.to_string())),
    }))
}

/// `∫ |a − b|` over `[lo, hi]`, splitting the domain at `breaks`.
pub fn l1_distance<A, B>(a: A, b: B, lo: f64, hi: f64, breaks: &[f64]) -> Result<f64, AnalysisError>
where
    A: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    let mut pts = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    inner.sort_by(f64::total_cmp);
    pts.extend(inner);
    pts.push(hi);
    // Gauss nodes never touch the segment ends, where the integrand may jump
    let quad = Quadrature::gauss_legendre(16);
    let mut total = 0.0;
    for w in pts.windows(2) {
        total += integrate_finite(|q| (a(q) - b(q)).abs(), w[0], w[1], &quad)
            .map_err(|e| AnalysisError::Invalid(e.to_string()))?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MannKendall {
    pub s: f64,
    pub z: f64,
}

impl MannKendall {
    /// Two-sided 1% critical value of the standard normal.
    pub const CRITICAL_1PCT: f64 = 2.5758293035489004;

    pub fn trend_free(&self) -> bool {
        self.z.abs() < Self::CRITICAL_1PCT
    }
}

/// Mann–Kendall trend statistic with the tie-corrected variance.
pub fn mann_kendall(series: &[f64]) -> MannKendall {
    let n = series.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += (series[j] - series[i]).signum() * f64::from(series[j] != series[i]);
        }
    }
    let mut sorted = series.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * (t - 1.0) * (2.0 * t + 5.0);
        i = j;
    }
    let nf = n as f64;
    let var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - tie_term) / 18.0;
    let z = if var <= 0.0 {
        0.0
    } else if s > 0.0 {
        (s - 1.0) / var.sqrt()
    } else if s < 0.0 {
        (s + 1.0) / var.sqrt()
    } else {
        0.0
    };
    MannKendall { s, z }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn static_case() -> ModelParams {
        ModelParams::normal_normal(0.0, 1.0, 2.0, 1.0, 30.0, 0.1, 0.97).unwrap()
    }

    #[test]
    fn first_best_fig1() {
        let fb = first_best(&static_case(), 1000).unwrap();
        assert!((fb.q_star - 1.2815515655446004).abs() < 1e-9);
        assert!((fb.welfare - 3.0).abs() < 1e-15);
        assert!((fb.winner_density.total_mass - 0.1).abs() < 1e-9);
    }

    #[test]
    fn identical_densities_incomparable() {
        let p = static_case();
        let phi = SubmissionProfile::truncated(&p.quality, ExtReal::Finite(0.0));
        let h = winner_density(&phi, &p, 500).unwrap();
        let r = compare_winners(&h, &h, Some(&p.noise)).unwrap();
        assert_eq!(r.verdict, Verdict::Incomparable);
        assert!(r.h_dominates && r.h0_dominates);
    }

    #[test]
    fn grid_mismatch_rejected() {
        let p = static_case();
        let phi = SubmissionProfile::truncated(&p.quality, ExtReal::Finite(0.0));
        let a = winner_density(&phi, &p, 500).unwrap();
        let b = winner_density(&phi, &p, 600).unwrap();
        assert!(matches!(compare_winners(&a, &b, None), Err(AnalysisError::GridMismatch)));
    }

    #[test]
    fn decreasing_hazard_detected() {
        let scale_mix = ScalarDistribution::mixture(vec![
            (0.5, ScalarDistribution::normal(0.0, 1.0).unwrap()),
            (0.5, ScalarDistribution::normal(0.0, 25.0).unwrap()),
        ])
        .unwrap();
        assert!(has_increasing_hazard(&ScalarDistribution::standard_normal()).is_ok());
        assert!(has_increasing_hazard(&scale_mix).is_err());
    }

    #[test]
    fn mann_kendall_examples() {
        let up: Vec<f64> = (0..50).map(|i| i as f64).collect();
        assert!(!mann_kendall(&up).trend_free());
        let flat = vec![1.0; 50];
        assert_eq!(mann_kendall(&flat).z, 0.0);
        let alt: Vec<f64> = (0..50).map(|i| (i % 2) as f64).collect();
        assert!(mann_kendall(&alt).trend_free());
    }

    #[test]
    fn l1_distance_of_truncations() {
        let f = ScalarDistribution::standard_normal();
        let d = l1_distance(|q| f.pdf(q), |q| if q >= 0.0 { f.pdf(q) } else { 0.0 }, -10.0, 10.0, &[0.0]).unwrap();
        assert!((d - 0.5).abs() < 1e-9);
    }
}
