//! Finite-population simulation of the repeated contest.
//!
//! Every agent-period owns a fixed window of a counter-based ChaCha8 stream
//! (`stream = purpose << 48 | period`, word offset `8 · agent`), so draws do
//! not depend on the order in which agents are processed.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::contest::{Cutoff, ExtReal, ModelParams};
use crate::distributions::ScalarDistribution;
use crate::equilibria::Policy;
use crate::par::{self, Execution};

const STREAM_POPULATION: u64 = 1;
const STREAM_DEVIATOR: u64 = 2;
const WORDS_PER_DRAW: u128 = 8;
const CHUNK: usize = 8192;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
}

/// Eligibility at period zero.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    AllEligible,
    /// Within-type eligible shares; ineligible agents get remaining ban
    /// lengths spread evenly over `1..=t`.
    SteadyState(Vec<f64>),
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n_agents: usize,
    pub n_periods: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub policy: Policy,
    /// One cutoff per researcher type.
    pub cutoffs: Vec<Cutoff>,
    pub initial: InitialState,
    pub histogram_bins: usize,
    pub execution: Execution,
}

impl SimConfig {
    pub fn new(seed: u64, policy: Policy, cutoffs: Vec<Cutoff>) -> Self {
        Self {
            n_agents: 200_000,
            n_periods: 1000,
            burn_in: 200,
            seed,
            policy,
            cutoffs,
            initial: InitialState::AllEligible,
            histogram_bins: 200,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.n_agents < 1000 {
            return bad(format!("n_agents must be at least 1000, got {}", self.n_agents));
        }
        if self.burn_in >= self.n_periods {
            return bad(format!(
                "burn_in ({}) must be below n_periods ({})",
                self.burn_in, self.n_periods
            ));
        }
        if self.histogram_bins == 0 {
            return bad("histogram_bins must be positive".into());
        }
        let n_types = params.type_list().len();
        if self.cutoffs.len() != n_types {
            return bad(format!("{} cutoffs for {} types", self.cutoffs.len(), n_types));
        }
        if let Policy::Exclusion(0) = self.policy {
            return bad("exclusion length must be at least 1".into());
        }
        if let InitialState::SteadyState(s) = &self.initial {
            if s.len() != n_types || s.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return bad("initial eligibility shares must be one value in [0,1] per type".into());
            }
        }
        Ok(())
    }
}

/// Winner qualities binned on a fixed grid, summed over recorded periods.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Agent-periods the counts are normalised by.
    pub exposure: f64,
}

impl Histogram {
    fn new(lo: f64, hi: f64, bins: usize) -> Self {
        let edges = (0..=bins)
            .map(|i| lo + (hi - lo) * i as f64 / bins as f64)
            .collect();
        Self {
            edges,
            counts: vec![0; bins],
            exposure: 0.0,
        }
    }

    fn bin(&self, q: f64) -> Option<usize> {
        let lo = self.edges[0];
        let hi = *self.edges.last().unwrap();
        if !(q >= lo && q < hi) {
            return None;
        }
        let n = self.counts.len();
        Some((((q - lo) / (hi - lo) * n as f64) as usize).min(n - 1))
    }

    /// Per-capita winner mass in each bin.
    pub fn masses(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.exposure).collect()
    }

    /// Per-capita density, integrating to the mean winner volume.
    pub fn density(&self) -> Vec<f64> {
        self.masses()
            .iter()
            .zip(self.edges.windows(2))
            .map(|(m, e)| m / (e[1] - e[0]))
            .collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|e| 0.5 * (e[0] + e[1])).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Post-burn-in mean within-type eligible share.
    pub mean_eligibility: Vec<f64>,
    /// Post-burn-in mean eligible share of the whole population.
    pub mean_total_eligibility: f64,
    /// Submissions per capita.
    pub mean_volume: f64,
    /// Funded submissions per capita.
    pub mean_funded: f64,
    pub mean_welfare_per_period: f64,
    pub winner_quality_histogram: Histogram,
    /// Population eligible share at the start of every period.
    pub eligibility_trajectory: Vec<f64>,
    pub volume_trajectory: Vec<f64>,
    /// Midpoint between the last funded and first unfunded signal; `-inf`
    /// when every submission was funded.
    pub sbar_trajectory: Vec<ExtReal>,
    /// Periods in which every submission was funded.
    pub undersubscribed_periods: usize,
    pub burn_in: usize,
}

impl SimResult {
    /// Post-burn-in signal thresholds.
    pub fn recorded_sbar(&self) -> &[ExtReal] {
        &self.sbar_trajectory[self.burn_in..]
    }

    pub fn recorded_eligibility(&self) -> &[f64] {
        &self.eligibility_trajectory[self.burn_in..]
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Slot {
    quality: f64,
    signal: f64,
    submitted: bool,
}

#[inline]
fn unit_open(x: u64) -> f64 {
    // (0, 1]
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn stream_rng(base: &ChaCha8Rng, purpose: u64, period: u64, first: usize) -> ChaCha8Rng {
    let mut rng = base.clone();
    rng.set_stream((purpose << 48) | period);
    rng.set_word_pos(first as u128 * WORDS_PER_DRAW);
    rng
}

fn agent_types(params: &ModelParams, n: usize) -> (Vec<u8>, Vec<usize>) {
    let types = params.type_list();
    let mut out = Vec::with_capacity(n);
    let mut sizes = Vec::with_capacity(types.len());
    let mut acc = 0.0;
    for (i, t) in types.iter().enumerate() {
        acc += t.weight;
        let end = if i + 1 == types.len() {
            n
        } else {
            ((acc * n as f64).round() as usize).min(n)
        };
        sizes.push(end - out.len());
        out.resize(end, i as u8);
    }
    (out, sizes)
}

fn initial_counters(cfg: &SimConfig, types: &[u8], sizes: &[usize]) -> Vec<u32> {
    let mut counters = vec![0u32; types.len()];
    let InitialState::SteadyState(shares) = &cfg.initial else {
        return counters;
    };
    let ban = match cfg.policy {
        Policy::Exclusion(t) => t,
        Policy::SignalCutoff(_) => 1,
        Policy::NoExclusion => return counters,
    };
    let mut local = vec![0usize; sizes.len()];
    for (c, &ty) in counters.iter_mut().zip(types) {
        let ty = ty as usize;
        let j = local[ty];
        local[ty] += 1;
        let eligible = (shares[ty] * sizes[ty] as f64).round() as usize;
        if j >= eligible {
            *c = 1 + ((j - eligible) as u32 % ban);
        }
    }
    counters
}

/// Runs the population dynamics. Deterministic for a given config and
/// independent of the execution strategy.
pub fn run_simulation(cfg: &SimConfig, params: &ModelParams) -> Result<SimResult, SimError> {
    cfg.validate(params)?;
    let n = cfg.n_agents;
    let type_list = params.type_list();
    let dists: Vec<ScalarDistribution> = type_list.iter().map(|t| t.quality.clone()).collect();
    let cutoffs: Vec<f64> = cfg.cutoffs.iter().map(|c| c.to_f64()).collect();
    let (types, sizes) = agent_types(params, n);
    let mut counters = initial_counters(cfg, &types, &sizes);
    let budget = (params.budget * n as f64).floor() as usize;
    let base = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lo, hi) = params.quality.support();
    let mut hist = Histogram::new(lo, hi, cfg.histogram_bins);

    let mut slots = vec![Slot::default(); n];
    let mut submitters: Vec<usize> = Vec::with_capacity(n);
    let mut elig_traj = Vec::with_capacity(cfg.n_periods);
    let mut vol_traj = Vec::with_capacity(cfg.n_periods);
    let mut sbar_traj = Vec::with_capacity(cfg.n_periods);
    let mut elig_sum = vec![0.0; sizes.len()];
    let (mut vol_sum, mut funded_sum, mut welfare_sum) = (0.0, 0.0, 0.0);
    let mut undersubscribed = 0;

    for period in 0..cfg.n_periods {
        let recording = period >= cfg.burn_in;
        let mut eligible_by_type = vec![0usize; sizes.len()];
        for (&c, &t) in counters.iter().zip(&types) {
            if c == 0 {
                eligible_by_type[t as usize] += 1;
            }
        }
        {
            let counters = &counters;
            let types = &types;
            let dists = &dists;
            let cutoffs = &cutoffs;
            let noise = &params.noise;
            let base = &base;
            par::for_each_chunk_mut(&mut slots, CHUNK, cfg.execution, |offset, chunk| {
                let mut rng = stream_rng(base, STREAM_POPULATION, period as u64, offset);
                for (i, slot) in chunk.iter_mut().enumerate() {
                    let a = offset + i;
                    let (u1, u2, u3, u4) = (
                        unit_open(rng.next_u64()),
                        unit_open(rng.next_u64()),
                        unit_open(rng.next_u64()),
                        unit_open(rng.next_u64()),
                    );
                    slot.submitted = false;
                    if counters[a] > 0 {
                        continue;
                    }
                    let ty = types[a] as usize;
                    let q = dists[ty].draw_from_uniforms(u1, u2);
                    // ties favour submission
                    if q >= cutoffs[ty] {
                        slot.submitted = true;
                        slot.quality = q;
                        slot.signal = q + noise.draw_from_uniforms(u3, u4);
                    }
                }
            });
        }
        submitters.clear();
        submitters.extend((0..n).filter(|&a| slots[a].submitted));
        let m = submitters.len();
        let funded_count;
        let sbar;
        let by_signal = |a: &usize, b: &usize| {
            slots[*b]
                .signal
                .total_cmp(&slots[*a].signal)
                .then(a.cmp(b))
        };
        if m <= budget {
            funded_count = m;
            sbar = ExtReal::NegInf;
            undersubscribed += usize::from(recording);
        } else {
            funded_count = budget;
            if budget == 0 {
                let top = submitters.iter().map(|&a| slots[a].signal).fold(f64::NEG_INFINITY, f64::max);
                sbar = ExtReal::Finite(top);
            } else {
                submitters.select_nth_unstable_by(budget - 1, by_signal);
                let last_in = slots[submitters[budget - 1]].signal;
                let first_out = submitters[budget..]
                    .iter()
                    .map(|&a| slots[a].signal)
                    .fold(f64::NEG_INFINITY, f64::max);
                sbar = ExtReal::Finite(0.5 * (last_in + first_out));
            }
        }
        // bookkeeping for the next period
        for c in counters.iter_mut() {
            if *c > 0 {
                *c -= 1;
            }
        }
        for (rank, &a) in submitters.iter().enumerate() {
            let funded = rank < funded_count;
            let s = slots[a];
            if funded && recording {
                if let Some(b) = hist.bin(s.quality) {
                    hist.counts[b] += 1;
                }
            }
            let banned = match cfg.policy {
                Policy::NoExclusion => 0,
                Policy::Exclusion(t) => {
                    if funded {
                        0
                    } else {
                        t
                    }
                }
                Policy::SignalCutoff(sb) => u32::from(ExtReal::Finite(s.signal) < sb),
            };
            counters[a] = banned;
        }

        let total_eligible: usize = eligible_by_type.iter().sum();
        elig_traj.push(total_eligible as f64 / n as f64);
        vol_traj.push(m as f64 / n as f64);
        sbar_traj.push(sbar);
        if recording {
            for ((s, e), size) in elig_sum.iter_mut().zip(&eligible_by_type).zip(&sizes) {
                *s += *e as f64 / (*size).max(1) as f64;
            }
            vol_sum += m as f64 / n as f64;
            funded_sum += funded_count as f64 / n as f64;
            welfare_sum += (funded_count as f64 * params.win_value
                - (m - funded_count) as f64 * params.rejection_cost)
                / n as f64;
        }
    }
    let recorded = (cfg.n_periods - cfg.burn_in) as f64;
    hist.exposure = recorded * n as f64;
    let mean_total = elig_traj[cfg.burn_in..].iter().sum::<f64>() / recorded;
    Ok(SimResult {
        mean_eligibility: elig_sum.iter().map(|s| s / recorded).collect(),
        mean_total_eligibility: mean_total,
        mean_volume: vol_sum / recorded,
        mean_funded: funded_sum / recorded,
        mean_welfare_per_period: welfare_sum / recorded,
        winner_quality_histogram: hist,
        eligibility_trajectory: elig_traj,
        volume_trajectory: vol_traj,
        sbar_trajectory: sbar_traj,
        undersubscribed_periods: undersubscribed,
        burn_in: cfg.burn_in,
    })
}

/// Estimated lifetime payoff of a single deviating researcher for each
/// candidate cutoff, and the maximiser.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalBestResponse {
    pub cutoff: f64,
    pub candidates: Vec<f64>,
    pub payoffs: Vec<f64>,
}

/// Runs the population and estimates the deviator's best response among
/// `candidates` with `deviators` quality draws per period.
pub fn empirical_best_response(
    cfg: &SimConfig,
    params: &ModelParams,
    candidates: &[f64],
    deviators: usize,
) -> Result<EmpiricalBestResponse, SimError> {
    let result = run_simulation(cfg, params)?;
    deviator_payoffs(&result, params, cfg.policy, candidates, deviators, cfg.seed, cfg.execution)
}

/// Payoff estimates against the post-burn-in thresholds of `result`, which
/// are replayed cyclically over a horizon long enough that `δ^H < 1e-12`.
///
/// Each period draws `deviators` qualities shared by all candidates; the
/// review noise is integrated exactly given the period's threshold, and the
/// continuation values follow by backward induction.
pub fn deviator_payoffs(
    result: &SimResult,
    params: &ModelParams,
    policy: Policy,
    candidates: &[f64],
    deviators: usize,
    seed: u64,
    exec: Execution,
) -> Result<EmpiricalBestResponse, SimError> {
    if candidates.is_empty() || deviators == 0 {
        return Err(SimError::InvalidConfig("need candidates and deviators".into()));
    }
    let d = params.discount;
    let horizon = (1e-12f64.ln() / d.ln()).ceil() as usize;
    let sbars = result.recorded_sbar();
    let ban_len = match policy {
        Policy::Exclusion(t) => t as usize,
        _ => 1,
    };
    let base = ChaCha8Rng::seed_from_u64(seed);
    let (v, c) = (params.win_value, params.rejection_cost);
    let noise = &params.noise;
    let quality = &params.quality;

    // per period and candidate: (Σ immediate payoff, Σ exclusion probability) over draws ≥ Q
    let sums: Vec<Vec<(f64, f64)>> = par::map_range(horizon, exec, |period| {
        let mut rng = stream_rng(&base, STREAM_DEVIATOR, period as u64, 0);
        let mut draws: Vec<f64> = (0..deviators)
            .map(|_| {
                let u1 = unit_open(rng.next_u64());
                let u2 = unit_open(rng.next_u64());
                let _ = (rng.next_u64(), rng.next_u64());
                quality.draw_from_uniforms(u1, u2)
            })
            .collect();
        draws.sort_by(f64::total_cmp);
        let sbar = sbars[period % sbars.len()];
        let mut pay = vec![0.0; deviators + 1];
        let mut ban = vec![0.0; deviators + 1];
        for j in (0..deviators).rev() {
            let q = draws[j];
            let w = match sbar {
                ExtReal::Finite(s) => noise.sf(s - q),
                ExtReal::NegInf => 1.0,
                ExtReal::PosInf => 0.0,
            };
            let b = match policy {
                Policy::NoExclusion => 0.0,
                Policy::Exclusion(_) => 1.0 - w,
                Policy::SignalCutoff(sb) => match sb {
                    ExtReal::Finite(s) => noise.cdf(s - q),
                    ExtReal::NegInf => 0.0,
                    ExtReal::PosInf => 1.0,
                },
            };
            pay[j] = pay[j + 1] + w * v - (1.0 - w) * c;
            ban[j] = ban[j + 1] + b;
        }
        candidates
            .iter()
            .map(|&cut| {
                let idx = draws.partition_point(|&q| q < cut);
                (pay[idx], ban[idx])
            })
            .collect()
    });

    let r = deviators as f64;
    let dt = d.powi(ban_len as i32 + 1);
    let payoffs: Vec<f64> = (0..candidates.len())
        .map(|ci| {
            let mut x = vec![0.0; horizon + ban_len + 2];
            for n in (0..horizon).rev() {
                let (p, b) = sums[n][ci];
                let stay = d * x[n + 1];
                x[n] = stay + (p + b * (dt * x[n + ban_len + 1] - stay)) / r;
            }
            x[0]
        })
        .collect();
    let mut best = 0;
    for (i, &p) in payoffs.iter().enumerate() {
        if p > payoffs[best] {
            best = i;
        }
    }
    Ok(EmpiricalBestResponse {
        cutoff: candidates[best],
        candidates: candidates.to_vec(),
        payoffs,
    })
}
