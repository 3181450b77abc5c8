//! Configuration parsing and command dispatch for the `contest-eq` binary.
//!
//! Config files are TOML with `[model]`, `[policy]`, `[sim]` and `[output]`
//! sections; `--set section.key=value` overrides are applied to the parsed
//! document before validation.

pub mod output;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    compare_winners, first_best, mann_kendall, sweep, total_variation, winner_bin_masses, winner_density,
    AnalysisError, SweepAxis, Verdict,
};
use crate::contest::{ContestError, ExtReal, ModelParams, ResearcherType, SubmissionProfile};
use crate::distributions::ScalarDistribution;
use crate::equilibria::{
    equation_sides, solve, EquilibriumError, EquilibriumOutcome, Regime, RESIDUAL_TOL, SCAN_LOWER_PROB,
};
use crate::par::Execution;
use crate::sim::{deviator_payoffs, run_simulation, InitialState, SimConfig, SimError};

use output::{fmt_ext, fmt_num, Table};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse(_) => "ParseError",
            CliError::Validation(_) => "ValidationError",
            CliError::Equilibrium(e) => match e {
                EquilibriumError::NoRoot { .. } => "NoRoot",
                EquilibriumError::CornerEquilibrium { .. } => "CornerEquilibrium",
                EquilibriumError::NoConvergence { .. } => "NoConvergence",
                _ => "SolverError",
            },
            CliError::Analysis(AnalysisError::HypothesisUnmet(_)) => "HypothesisUnmet",
            CliError::Analysis(_) => "AnalysisError",
            CliError::Sim(_) => "SimulationError",
            CliError::Io { .. } => "IoError",
        }
    }

    /// One-line JSON record for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Sweep,
    Simulate,
    Compare,
    Figures,
}

impl Command {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "solve" => Command::Solve,
            "sweep" => Command::Sweep,
            "simulate" => Command::Simulate,
            "compare" => Command::Compare,
            "figures" => Command::Figures,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Figures => "figures",
        }
    }
}

fn default_delta() -> f64 {
    0.97
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypeSection {
    pub lambda: f64,
    pub mu_q: f64,
    pub var_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub mu_q: f64,
    pub var_q: f64,
    #[serde(default)]
    pub mu_s: f64,
    pub var_s: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "V")]
    pub v: f64,
    pub k: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub types: Option<Vec<TypeSection>>,
}

fn default_t_values() -> Vec<u32> {
    vec![1, 5, 50]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum ExtRealRepr {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicySection {
    #[serde(default)]
    regime: Option<String>,
    #[serde(default)]
    t: Option<u32>,
    #[serde(default)]
    sbar_ban: Option<ExtRealRepr>,
    #[serde(default)]
    compare_with: Option<String>,
    #[serde(default = "default_t_values")]
    t_values: Vec<u32>,
    #[serde(default)]
    sweep_axis: Option<String>,
    #[serde(default)]
    sweep_values: Option<Vec<f64>>,
}

impl Default for PolicySection {
    fn default() -> Self {
        Self {
            regime: None,
            t: None,
            sbar_ban: None,
            compare_with: None,
            t_values: default_t_values(),
            sweep_axis: None,
            sweep_values: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub n_agents: usize,
    pub n_periods: usize,
    pub burn_in: usize,
    pub seed: Option<u64>,
    pub histogram_bins: usize,
    /// Deviator draws per period for the empirical best response; 0 skips it.
    pub deviators: usize,
    /// Allowed gap between simulated and analytic eligibility.
    pub eligibility_tol: f64,
    /// Start from the analytic steady state rather than full eligibility.
    pub steady_start: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            n_agents: 200_000,
            n_periods: 1000,
            burn_in: 200,
            seed: None,
            histogram_bins: 200,
            deviators: 10_000,
            eligibility_tol: 0.01,
            steady_start: true,
        }
    }
}

fn default_grid_size() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    #[serde(default)]
    path: Option<String>,
    #[serde(default = "default_grid_size")]
    grid_size: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            path: None,
            grid_size: default_grid_size(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: ModelSection,
    #[serde(default)]
    policy: PolicySection,
    #[serde(default)]
    sim: SimSection,
    #[serde(default)]
    output: OutputSection,
}

/// A validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    /// The model section as written (after overrides and defaults).
    pub model: ModelSection,
    pub params: ModelParams,
    pub regime: Regime,
    pub compare_with: Regime,
    pub t_values: Vec<u32>,
    pub sweep: Option<(SweepAxis, Vec<f64>)>,
    pub sim: SimSection,
    pub output_path: Option<PathBuf>,
    pub grid_size: usize,
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    parse_config_with(text, &[])
}

/// Parses `text`, applies `key=value` overrides and validates the result.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut doc: toml::Table = toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    let raw: RawConfig = toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Parse(e.to_string()))?;
    validate(raw)
}

fn apply_override(doc: &mut toml::Table, item: &str) -> Result<(), CliError> {
    let (key, value) = item
        .split_once('=')
        .ok_or_else(|| CliError::Parse(format!("override `{item}` is not key=value")))?;
    let value = value.trim();
    let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut table = doc;
    for p in path {
        let entry = table
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Parse(format!("override key `{key}`: `{p}` is not a section")))?;
    }
    table.insert(last.to_string(), parsed);
    Ok(())
}

fn parse_ext(v: &ExtRealRepr) -> Result<ExtReal, CliError> {
    match v {
        ExtRealRepr::Num(x) if !x.is_nan() => Ok(ExtReal::from_f64(*x)),
        ExtRealRepr::Text(s) => match s.as_str() {
            "inf" | "+inf" => Ok(ExtReal::PosInf),
            "-inf" => Ok(ExtReal::NegInf),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|x| !x.is_nan())
                .map(ExtReal::from_f64)
                .ok_or_else(|| CliError::Validation(format!("sbar_ban `{other}` is not a number or ±inf"))),
        },
        _ => Err(CliError::Validation("sbar_ban must not be NaN".into())),
    }
}

fn parse_regime(name: &str, policy: &PolicySection) -> Result<Regime, CliError> {
    Ok(match name {
        "benchmark" => Regime::Benchmark,
        "exclusion" => Regime::Exclusion,
        "multi_period" => {
            let t = policy
                .t
                .ok_or_else(|| CliError::Validation("multi_period needs policy.t".into()))?;
            if t == 0 {
                return Err(CliError::Validation("t must be at least 1".into()));
            }
            Regime::MultiPeriod(t)
        }
        "signal_cutoff" => {
            let s = policy
                .sbar_ban
                .as_ref()
                .ok_or_else(|| CliError::Validation("signal_cutoff needs policy.sbar_ban".into()))?;
            Regime::SignalCutoff(parse_ext(s)?)
        }
        "two_type" => Regime::TwoType,
        other => return Err(CliError::Validation(format!("unknown regime `{other}`"))),
    })
}

fn validate(raw: RawConfig) -> Result<RunConfig, CliError> {
    let m = &raw.model;
    let bad = |s: &str| Err(CliError::Validation(s.to_string()));
    if !(m.k > 0.0 && m.k < 1.0) {
        return bad("k must lie in (0,1)");
    }
    if !(m.delta > 0.0 && m.delta < 1.0) {
        return bad("delta must lie in (0,1)");
    }
    if !(m.c > 0.0 && m.c.is_finite()) {
        return bad("C must be positive");
    }
    if !(m.v > 0.0 && m.v.is_finite()) {
        return bad("V must be positive");
    }
    if !(m.var_q > 0.0) {
        return bad("var_q must be positive");
    }
    if !(m.var_s > 0.0) {
        return bad("var_s must be positive");
    }
    let verr = |e: ContestError| CliError::Validation(e.to_string());
    let noise = ScalarDistribution::normal(m.mu_s, m.var_s).map_err(|e| verr(e.into()))?;
    let quality = ScalarDistribution::normal(m.mu_q, m.var_q).map_err(|e| verr(e.into()))?;
    let mut params = ModelParams::new(m.v, m.c, m.k, m.delta, quality, noise).map_err(verr)?;
    if let Some(types) = &m.types {
        let mut list = Vec::new();
        for t in types {
            if !(t.var_q > 0.0) {
                return bad("type var_q must be positive");
            }
            list.push(ResearcherType {
                weight: t.lambda,
                quality: ScalarDistribution::normal(t.mu_q, t.var_q).map_err(|e| verr(e.into()))?,
            });
        }
        if list.len() != 2 {
            return bad("exactly two [[model.types]] entries are supported");
        }
        params = params.with_types(list).map_err(verr)?;
    }

    let p = &raw.policy;
    let regime = parse_regime(p.regime.as_deref().unwrap_or("benchmark"), p)?;
    if regime == Regime::TwoType && params.types.is_none() {
        return bad("the two_type regime needs [[model.types]]");
    }
    let compare_with = parse_regime(p.compare_with.as_deref().unwrap_or("benchmark"), p)?;
    if p.t_values.is_empty() || p.t_values.contains(&0) {
        return bad("t_values must be non-empty and at least 1");
    }
    let sweep = match (&p.sweep_axis, &p.sweep_values) {
        (Some(a), Some(v)) => {
            let axis = SweepAxis::parse(a)
                .ok_or_else(|| CliError::Validation(format!("unknown sweep_axis `{a}`")))?;
            Some((axis, v.clone()))
        }
        (None, None) => None,
        _ => return bad("sweep_axis and sweep_values must be given together"),
    };
    let s = &raw.sim;
    if s.n_agents < 1000 {
        return bad("n_agents must be at least 1000");
    }
    if s.burn_in >= s.n_periods {
        return bad("burn_in must be below n_periods");
    }
    if raw.output.grid_size < 100 {
        return bad("grid_size must be at least 100");
    }
    Ok(RunConfig {
        model: raw.model,
        params,
        regime,
        compare_with,
        t_values: p.t_values.clone(),
        sweep,
        sim: raw.sim,
        output_path: raw.output.path.map(PathBuf::from),
        grid_size: raw.output.grid_size,
    })
}

/// Files written by a command and whether every contract held.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub contracts_met: bool,
    pub notes: Vec<String>,
}

pub fn run_command(cmd: Command, cfg: &RunConfig, out: Option<&Path>) -> Result<RunReport, CliError> {
    let default = match cmd {
        Command::Figures => PathBuf::from("figures"),
        other => PathBuf::from(format!("{}.csv", other.name())),
    };
    let path = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_path.clone())
        .unwrap_or(default);
    match cmd {
        Command::Solve => run_solve(cfg, &path),
        Command::Sweep => run_sweep(cfg, &path),
        Command::Simulate => run_simulate(cfg, &path),
        Command::Compare => run_compare(cfg, &path),
        Command::Figures => run_figures(cfg, &path),
    }
}

const OUTCOME_COLUMNS: [&str; 10] = [
    "cutoff",
    "cutoff_2",
    "eligibility",
    "eligibility_2",
    "sbar",
    "volume",
    "welfare",
    "payoff_x",
    "payoff_x_2",
    "residual",
];

fn outcome_cells(o: &EquilibriumOutcome) -> Vec<String> {
    let second = |v: &[f64]| v.get(1).map(|&x| fmt_num(x)).unwrap_or_default();
    vec![
        fmt_ext(o.cutoffs[0]),
        o.cutoffs.get(1).map(|&c| fmt_ext(c)).unwrap_or_default(),
        fmt_num(o.eligibility[0]),
        second(&o.eligibility),
        fmt_ext(o.sbar),
        fmt_num(o.submission_volume),
        fmt_num(o.welfare),
        fmt_num(o.payoff_x[0]),
        second(&o.payoff_x),
        fmt_num(o.residual),
    ]
}

fn meets_contract(o: &EquilibriumOutcome) -> bool {
    o.residual < RESIDUAL_TOL && o.eligibility_residual.is_none_or(|r| r < 1e-9)
}

/// Solves the configured regime; a corner outcome counts as a solution.
fn solve_all(cfg: &RunConfig, regime: &Regime) -> Result<(Vec<EquilibriumOutcome>, Vec<String>), CliError> {
    let params = &cfg.params;
    match solve(params, regime, Execution::default()) {
        Ok(first) => {
            let mut outs = Vec::new();
            for roots in &first.all_roots {
                if roots == &first.cutoffs {
                    outs.push(first.clone());
                } else if let Some(q) = roots[0].finite() {
                    let mut o = crate::equilibria::outcome_at(params, regime, q)?;
                    o.all_roots = first.all_roots.clone();
                    outs.push(o);
                }
            }
            Ok((outs, Vec::new()))
        }
        Err(EquilibriumError::CornerEquilibrium { bound, outcome }) => Ok((
            vec![*outcome],
            vec![format!("corner equilibrium: k >= 1/(1+Ban(-inf, sbar_ban)) = {bound}")],
        )),
        Err(e) => Err(e.into()),
    }
}

fn run_solve(cfg: &RunConfig, path: &Path) -> Result<RunReport, CliError> {
    let (outs, notes) = solve_all(cfg, &cfg.regime)?;
    let mut header = vec!["regime", "root_index"];
    header.extend(OUTCOME_COLUMNS);
    let mut t = Table::new(&header);
    for (i, o) in outs.iter().enumerate() {
        let mut row = vec![o.regime.name().to_string(), i.to_string()];
        row.extend(outcome_cells(o));
        t.push(row);
    }
    t.write(path).map_err(|e| io_err(path, e))?;
    let mut notes = notes;
    if outs.iter().any(|o| o.hypothesis_unmet) {
        notes.push("hypothesis unmet: V/C is below the sufficient existence bound".into());
    }
    Ok(RunReport {
        files: vec![path.to_path_buf()],
        contracts_met: outs.iter().all(meets_contract),
        notes,
    })
}

fn run_sweep(cfg: &RunConfig, path: &Path) -> Result<RunReport, CliError> {
    let (axis, values) = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Validation("sweep needs policy.sweep_axis and policy.sweep_values".into()))?;
    let rows = sweep(&cfg.params, *axis, values, &cfg.regime, Execution::default())?;
    let mut header = vec!["axis", "value", "regime"];
    header.extend(OUTCOME_COLUMNS);
    header.extend(["n_roots", "error"]);
    let mut t = Table::new(&header);
    let mut ok = true;
    for r in &rows {
        let mut row = vec![axis.name().to_string(), fmt_num(r.value)];
        match &r.outcome {
            Ok(o) => {
                ok &= meets_contract(o);
                row.push(o.regime.name().to_string());
                row.extend(outcome_cells(o));
                row.push(o.all_roots.len().to_string());
                row.push(String::new());
            }
            Err(e) => {
                ok = false;
                row.push(cfg.regime.name().to_string());
                row.extend(std::iter::repeat_n(String::new(), OUTCOME_COLUMNS.len() + 1));
                row.push(e.clone());
            }
        }
        t.push(row);
    }
    t.write(path).map_err(|e| io_err(path, e))?;
    Ok(RunReport {
        files: vec![path.to_path_buf()],
        contracts_met: ok,
        notes: Vec::new(),
    })
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn run_simulate(cfg: &RunConfig, path: &Path) -> Result<RunReport, CliError> {
    let seed = cfg
        .sim
        .seed
        .ok_or_else(|| CliError::Validation("simulate needs sim.seed".into()))?;
    let params = &cfg.params;
    let (outs, _) = solve_all(cfg, &cfg.regime)?;
    let eq = &outs[0];
    // within-type eligible shares implied by the analytic steady state
    let types = params.type_list();
    let analytic: Vec<f64> = eq.eligibility.iter().zip(&types).map(|(a, t)| {
        if eq.regime == Regime::TwoType {
            a / t.weight
        } else {
            *a
        }
    }).collect();
    let mut sc = SimConfig::new(seed, cfg.regime.policy(), eq.cutoffs.clone());
    sc.n_agents = cfg.sim.n_agents;
    sc.n_periods = cfg.sim.n_periods;
    sc.burn_in = cfg.sim.burn_in;
    sc.histogram_bins = cfg.sim.histogram_bins;
    if cfg.sim.steady_start {
        sc.initial = InitialState::SteadyState(analytic.clone());
    }
    let res = run_simulation(&sc, params)?;

    let mut series = Table::new(&["period", "eligibility", "volume", "sbar"]);
    for i in 0..res.eligibility_trajectory.len() {
        series.push(vec![
            i.to_string(),
            fmt_num(res.eligibility_trajectory[i]),
            fmt_num(res.volume_trajectory[i]),
            fmt_ext(res.sbar_trajectory[i]),
        ]);
    }
    series.write(path).map_err(|e| io_err(path, e))?;

    let hist = &res.winner_quality_histogram;
    let analytic_mass = winner_bin_masses(&eq.profile, params, &hist.edges)?;
    let sim_mass = hist.masses();
    let mut ht = Table::new(&["bin_lo", "bin_hi", "sim_mass", "analytic_mass"]);
    for (i, e) in hist.edges.windows(2).enumerate() {
        ht.push(vec![fmt_num(e[0]), fmt_num(e[1]), fmt_num(sim_mass[i]), fmt_num(analytic_mass[i])]);
    }
    let hpath = sibling(path, "histogram");
    ht.write(&hpath).map_err(|e| io_err(&hpath, e))?;

    // compared as distributions of winner quality, each scaled to unit mass
    let unit = |m: &[f64]| {
        let total: f64 = m.iter().sum();
        m.iter().map(|x| x / total).collect::<Vec<f64>>()
    };
    let tv = total_variation(&unit(&sim_mass), &unit(&analytic_mass));
    let thinned: Vec<f64> = res.recorded_eligibility().iter().step_by(10).copied().collect();
    let mk = mann_kendall(&thinned);
    let mut summary = Table::new(&["metric", "value"]);
    let mut add = |k: String, v: String| summary.push(vec![k, v]);
    let mut ok = true;
    for (i, (s, a)) in res.mean_eligibility.iter().zip(&analytic).enumerate() {
        add(format!("mean_eligibility_{}", i + 1), fmt_num(*s));
        add(format!("analytic_eligibility_{}", i + 1), fmt_num(*a));
        ok &= (s - a).abs() < cfg.sim.eligibility_tol;
    }
    add("mean_volume".into(), fmt_num(res.mean_volume));
    add("analytic_volume".into(), fmt_num(eq.submission_volume));
    add("mean_funded".into(), fmt_num(res.mean_funded));
    add("mean_welfare".into(), fmt_num(res.mean_welfare_per_period));
    add("analytic_welfare".into(), fmt_num(eq.welfare));
    add("winner_tv_distance".into(), fmt_num(tv));
    add("mann_kendall_z".into(), fmt_num(mk.z));
    add("undersubscribed_periods".into(), res.undersubscribed_periods.to_string());
    if cfg.sim.deviators > 0 && eq.cutoffs.len() == 1 {
        if let Some(q) = eq.cutoff().finite() {
            let candidates: Vec<f64> = (-20..=20).map(|i| q + 0.05 * i as f64).collect();
            let br = deviator_payoffs(
                &res,
                params,
                cfg.regime.policy(),
                &candidates,
                cfg.sim.deviators,
                seed,
                Execution::default(),
            )?;
            add("empirical_best_response".into(), fmt_num(br.cutoff));
            add("analytic_cutoff".into(), fmt_num(q));
            ok &= (br.cutoff - q).abs() <= 0.05 + 1e-9;
        }
    }
    let spath = sibling(path, "summary");
    summary.write(&spath).map_err(|e| io_err(&spath, e))?;
    Ok(RunReport {
        files: vec![path.to_path_buf(), hpath, spath],
        contracts_met: ok && meets_contract(eq),
        notes: Vec::new(),
    })
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::FirstOrderDominates => "first_order_dominates",
        Verdict::DominatedBy => "dominated_by",
        Verdict::SingleCrossing(_) => "single_crossing",
        Verdict::Incomparable => "incomparable",
    }
}

fn run_compare(cfg: &RunConfig, path: &Path) -> Result<RunReport, CliError> {
    let params = &cfg.params;
    let (a, _) = solve_all(cfg, &cfg.regime)?;
    let (b, _) = solve_all(cfg, &cfg.compare_with)?;
    let h = winner_density(&a[0].profile, params, cfg.grid_size)?;
    let h0 = winner_density(&b[0].profile, params, cfg.grid_size)?;
    let report = compare_winners(&h, &h0, Some(&params.noise))?;
    let mut t = Table::new(&["q", "h", "h0", "cdf_diff"]);
    for i in 0..h.grid.len() {
        t.push(vec![
            fmt_num(h.grid[i]),
            fmt_num(h.values[i]),
            fmt_num(h0.values[i]),
            fmt_num(report.evidence[i]),
        ]);
    }
    t.write(path).map_err(|e| io_err(path, e))?;
    let mut r = Table::new(&["regime", "compare_with", "cutoff", "cutoff_0", "verdict", "qbar", "h_dominates", "h0_dominates"]);
    let qbar = match report.verdict {
        Verdict::SingleCrossing(q) => fmt_num(q),
        _ => String::new(),
    };
    r.push(vec![
        cfg.regime.name().into(),
        cfg.compare_with.name().into(),
        fmt_ext(a[0].cutoff()),
        fmt_ext(b[0].cutoff()),
        verdict_name(report.verdict).into(),
        qbar,
        report.h_dominates.to_string(),
        report.h0_dominates.to_string(),
    ]);
    let rpath = sibling(path, "report");
    r.write(&rpath).map_err(|e| io_err(&rpath, e))?;
    Ok(RunReport {
        files: vec![path.to_path_buf(), rpath],
        contracts_met: meets_contract(&a[0]) && meets_contract(&b[0]),
        notes: Vec::new(),
    })
}

fn curve_grid(params: &ModelParams, n: usize) -> Result<Vec<f64>, CliError> {
    let lo = params
        .quality
        .quantile(SCAN_LOWER_PROB)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let hi = params
        .first_best_cutoff()
        .map_err(|e| CliError::Validation(e.to_string()))?;
    Ok(crate::roots::half_open_grid(lo, hi, n))
}

fn sides(params: &ModelParams, regime: &Regime, q: f64) -> Result<(f64, f64), CliError> {
    let p = equation_sides(params, regime, q)?;
    Ok((p.lhs, p.rhs))
}

fn run_figures(cfg: &RunConfig, dir: &Path) -> Result<RunReport, CliError> {
    let params = &cfg.params;
    let n = cfg.grid_size;
    let grid = curve_grid(params, n)?;
    let mut files = Vec::new();
    let mut ok = true;
    let write = |name: &str, t: &Table, files: &mut Vec<PathBuf>| -> Result<(), CliError> {
        let p = dir.join(name);
        t.write(&p).map_err(|e| io_err(&p, e))?;
        files.push(p);
        Ok(())
    };

    let bench = solve(params, &Regime::Benchmark, Execution::default())?;
    let excl = solve(params, &Regime::Exclusion, Execution::default())?;
    ok &= meets_contract(&bench) && meets_contract(&excl);

    let mut c1 = Table::new(&["q", "lhs", "rhs"]);
    let mut c2 = Table::new(&["q", "benchmark_lhs", "benchmark_rhs", "exclusion_lhs", "exclusion_rhs"]);
    for &q in &grid {
        let (l0, r0) = sides(params, &Regime::Benchmark, q)?;
        let (l1, r1) = sides(params, &Regime::Exclusion, q)?;
        c1.push(vec![fmt_num(q), fmt_num(l0), fmt_num(r0)]);
        c2.push(vec![fmt_num(q), fmt_num(l0), fmt_num(r0), fmt_num(l1), fmt_num(r1)]);
    }
    write("fig1_curves.csv", &c1, &mut files)?;
    write("fig2_curves.csv", &c2, &mut files)?;

    let fb = first_best(params, n)?;
    let h0 = winner_density(&bench.profile, params, n)?;
    let h1 = winner_density(&excl.profile, params, n)?;
    let first_best_profile = SubmissionProfile::truncated(&params.quality, ExtReal::Finite(fb.q_star));
    let mut d1 = Table::new(&["q", "quality", "submissions", "winners", "first_best"]);
    let mut d2 = Table::new(&[
        "q",
        "benchmark_submissions",
        "benchmark_winners",
        "exclusion_submissions",
        "exclusion_winners",
    ]);
    for (i, &q) in h0.grid.iter().enumerate() {
        d1.push(vec![
            fmt_num(q),
            fmt_num(params.quality.pdf(q)),
            fmt_num(bench.profile.density(q)),
            fmt_num(h0.values[i]),
            fmt_num(first_best_profile.density(q)),
        ]);
        d2.push(vec![
            fmt_num(q),
            fmt_num(bench.profile.density(q)),
            fmt_num(h0.values[i]),
            fmt_num(excl.profile.density(q)),
            fmt_num(h1.values[i]),
        ]);
    }
    write("fig1_densities.csv", &d1, &mut files)?;
    write("fig2_densities.csv", &d2, &mut files)?;

    let mut header = vec!["q".to_string()];
    for t in &cfg.t_values {
        header.push(format!("lhs_t{t}"));
        header.push(format!("rhs_t{t}"));
    }
    let mut c3 = Table::new(&header);
    for &q in &grid {
        let mut row = vec![fmt_num(q)];
        for &t in &cfg.t_values {
            let (l, r) = sides(params, &Regime::MultiPeriod(t), q)?;
            row.push(fmt_num(l));
            row.push(fmt_num(r));
        }
        c3.push(row);
    }
    write("fig3_curves.csv", &c3, &mut files)?;

    let header: Vec<String> = cfg.t_values.iter().map(|t| format!("root_t{t}")).collect();
    let mut r3 = Table::new(&header);
    let mut row = Vec::new();
    for &t in &cfg.t_values {
        let o = solve(params, &Regime::MultiPeriod(t), Execution::default())?;
        ok &= meets_contract(&o);
        row.push(fmt_ext(o.cutoff()));
    }
    r3.push(row);
    write("fig3_roots.csv", &r3, &mut files)?;

    Ok(RunReport {
        files,
        contracts_met: ok,
        notes: Vec::new(),
    })
}
