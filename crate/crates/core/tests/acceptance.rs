//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::{iterate_linear, Ref};
use contest_eq::analysis::{compare_winners, first_best, l1_distance, total_variation, winner_bin_masses, winner_density, Verdict};
use contest_eq::contest::{lifetime_payoff, lifetime_payoff_multi, lifetime_payoff_typed, SuccessEvaluation};
use contest_eq::equilibria::{
    solve_benchmark, solve_exclusion, solve_multi_period, solve_signal_cutoff, solve_two_type, EquilibriumOutcome, Policy,
};
use contest_eq::sim::{deviator_payoffs, run_simulation, SimConfig};
use contest_eq::{Execution, ExtReal, ModelParams, ResearcherType, ScalarDistribution, SubmissionProfile};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

const STATIC_Q0: f64 = -0.4396185104029234;
const EXCLUSION_Q0: f64 = -1.2478297822405462;
const EXCLUSION_Q1: f64 = -0.27162262779119817;
const BAN_LENGTH: [(u32, f64, f64); 5] = [
    (1, 0.2777606435776547, 0.7910265645575729),
    (5, 0.42284152186004204, 0.5594870446343783),
    (50, -0.17328183579142967, 0.20380952278965594),
    (200, -1.0580606673222752, 0.12209499557448708),
    (1000, -2.146367350386602, 0.10252993539692695),
];

type Check = Result<String, String>;

fn static_case() -> ModelParams {
    ModelParams::normal_normal(0.0, 1.0, 2.0, 1.0, 30.0, 0.1, 0.97).unwrap()
}

fn exclusion_case() -> ModelParams {
    ModelParams::normal_normal(0.0, 2.0, 5.0, 1.0, 50.0, 0.1, 0.97).unwrap()
}

fn ban_length_case() -> ModelParams {
    ModelParams::normal_normal(0.0, 1.0, 1.0, 1.0, 20.0, 0.1, 0.85).unwrap()
}

fn exclusion_ref() -> Ref {
    Ref { mu_q: 0.0, sd_q: 2f64.sqrt(), sd_s: 5f64.sqrt(), k: 0.1 }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn q(o: &EquilibriumOutcome) -> f64 {
    o.cutoff().to_f64()
}

fn within(elapsed: Duration, limit: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit, format!("took {:.2} s, limit {limit} s", elapsed.as_secs_f64()))
}

fn ac1() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("solve.csv");
    std::fs::write(&cfg, "[model]\nmu_q = 0.0\nvar_q = 1.0\nvar_s = 2.0\nC = 1.0\nV = 30.0\nk = 0.1\n")
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_contest-eq"))
        .args(["solve", "--regime", "benchmark", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(status.status.success(), format!("exit {:?}", status.status.code()))?;
    let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
    let rows: Vec<&str> = text.lines().skip(1).collect();
    ensure(rows.len() == 1, format!("{} roots reported", rows.len()))?;
    let q0: f64 = rows[0].split(',').nth(2).unwrap().parse().map_err(|_| "bad cutoff")?;

    let p = static_case();
    let o = solve_benchmark(&p).map_err(|e| e.to_string())?;
    let r = Ref { mu_q: 0.0, sd_q: 1.0, sd_s: 2f64.sqrt(), k: 0.1 };
    let w = r.win(r.sbar(1.0, q(&o)), q(&o));
    let resid = (w - 1.0 / 31.0).abs();
    let q_star = p.first_best_cutoff().unwrap();
    ensure(resid < 1e-8, format!("|W - 1/31| = {resid:e}"))?;
    ensure((q0 - q(&o)).abs() < 1e-9, "CLI and library disagree")?;
    ensure((q(&o) - STATIC_Q0).abs() < 1e-7, format!("Q0 = {} vs reference {STATIC_Q0}", q(&o)))?;
    ensure(q(&o) < q_star, "Q0 >= Q*")?;
    within(elapsed, 1.0)?;
    Ok(format!("Q0 = {:.10}, |W - 1/31| = {resid:.1e}, Q* = {q_star:.6}, cli {:.3} s", q(&o), elapsed.as_secs_f64()))
}

fn ac2() -> Check {
    let p = exclusion_case();
    let start = Instant::now();
    let ex = solve_exclusion(&p).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let bench = solve_benchmark(&p).map_err(|e| e.to_string())?;
    let r = exclusion_ref();
    let q1 = q(&ex);
    let big_f = r.f().cdf(q1);
    let alpha = 1.1 / (2.0 - big_f);
    let w = r.win(r.sbar(alpha, q1), q1);
    let (c, v, k, d) = (1.0, 50.0, 0.1, 0.97);
    let rhs = ((1.0 + k) * c + k * d * (2.0 - big_f) * v) / ((1.0 + k) * c + (1.0 + k) * (1.0 + d - d * big_f) * v);
    let resid = (w - rhs).abs();
    ensure(resid < 1e-8, format!("exclusion residual {resid:e}"))?;
    ensure((q1 - EXCLUSION_Q1).abs() < 1e-7, format!("Q1 = {q1} vs reference {EXCLUSION_Q1}"))?;
    ensure((q(&bench) - EXCLUSION_Q0).abs() < 1e-7, format!("Q0 = {} vs reference {EXCLUSION_Q0}", q(&bench)))?;
    ensure(q1 > q(&bench), "Q1 <= Q0")?;
    ensure(ex.submission_volume < bench.submission_volume, "volume not reduced")?;
    ensure(ex.welfare > bench.welfare, "welfare not improved")?;
    within(elapsed, 5.0)?;
    Ok(format!(
        "Q1 = {q1:.10} > Q0 = {:.10}, residual {resid:.1e}, volume {:.4} < {:.4}, welfare {:.4} > {:.4}, {:.3} s",
        q(&bench),
        ex.submission_volume,
        bench.submission_volume,
        ex.welfare,
        bench.welfare,
        elapsed.as_secs_f64()
    ))
}

fn ac3() -> Check {
    let p = ban_length_case();
    let start = Instant::now();
    let mut qs = Vec::new();
    for t in [1, 5, 50] {
        qs.push(q(&solve_multi_period(&p, t).map_err(|e| e.to_string())?));
    }
    let elapsed = start.elapsed();
    for ((t, reference, _), got) in BAN_LENGTH.iter().zip(&qs) {
        ensure((got - reference).abs() < 1e-7, format!("Q_{t} = {got} vs reference {reference}"))?;
    }
    ensure(qs[2] < qs[0] && qs[0] < qs[1], format!("ordering violated: {qs:?}"))?;
    within(elapsed, 10.0)?;
    Ok(format!("Q50 = {:.6} < Q1 = {:.6} < Q5 = {:.6}, {:.3} s", qs[2], qs[0], qs[1], elapsed.as_secs_f64()))
}

fn ac4() -> Check {
    let p = ban_length_case();
    let mut outs = Vec::new();
    for (t, reference, elig) in BAN_LENGTH {
        let o = solve_multi_period(&p, t).map_err(|e| e.to_string())?;
        ensure((q(&o) - reference).abs() < 1e-7, format!("Q_{t} = {} vs reference {reference}", q(&o)))?;
        ensure((o.alpha() - elig).abs() < 1e-7, format!("alpha_{t} = {} vs reference {elig}", o.alpha()))?;
        outs.push(o);
    }
    let (o50, o1000) = (&outs[2], &outs[4]);
    ensure(q(o1000) < q(o50) - 1.0, "Q1000 >= Q50 - 1")?;
    let tail: Vec<f64> = outs[2..].iter().map(q).collect();
    ensure(tail.windows(2).all(|w| w[1] < w[0]), format!("not decreasing over t >= 50: {tail:?}"))?;
    let gap = (o1000.alpha() - 0.1).abs();
    ensure(gap < 0.02, format!("|alpha - k| = {gap}"))?;
    let f = &p.quality;
    let q1000 = q(o1000);
    let phi = |x: f64| if x >= q1000 { o1000.alpha() * f.pdf(x) } else { 0.0 };
    let kf = |x: f64| 0.1 * f.pdf(x);
    let tv = 0.5 * l1_distance(phi, kf, -12.0, 12.0, &[q1000]).map_err(|e| e.to_string())?;
    ensure(tv < 0.05, format!("TV = {tv}"))?;
    Ok(format!("Q1000 = {q1000:.4} < Q50 - 1 = {:.4}, |alpha - k| = {gap:.4}, TV = {tv:.4}", q(o50) - 1.0))
}

fn ac5() -> Check {
    let p = exclusion_case();
    let ex = solve_exclusion(&p).map_err(|e| e.to_string())?;
    let m1 = solve_multi_period(&p, 1).map_err(|e| e.to_string())?;
    ensure(ex.all_roots.len() == m1.all_roots.len(), "root counts differ")?;
    let mut worst_a: f64 = 0.0;
    for (a, b) in ex.all_roots.iter().zip(&m1.all_roots) {
        worst_a = worst_a.max((a[0].to_f64() - b[0].to_f64()).abs());
    }
    ensure(worst_a < 1e-9, format!("(a) differ by {worst_a:e}"))?;

    let bench = solve_benchmark(&p).map_err(|e| e.to_string())?;
    let sc = solve_signal_cutoff(&p, ExtReal::NegInf).map_err(|e| e.to_string())?;
    let diff_b = (q(&bench) - q(&sc)).abs().max((bench.alpha() - sc.alpha()).abs());
    ensure(bench.all_roots.len() == sc.all_roots.len(), "(b) root counts differ")?;
    ensure(diff_b < 1e-9, format!("(b) differ by {diff_b:e}"))?;

    let sbar1 = ex.sbar;
    let gen = solve_signal_cutoff(&p, sbar1).map_err(|e| e.to_string())?;
    let near = gen
        .all_roots
        .iter()
        .map(|r| (r[0].to_f64() - q(&ex)).abs())
        .fold(f64::INFINITY, f64::min);
    ensure(near < 1e-6, format!("(c) nearest root {near:e} away"))?;
    Ok(format!("(a) {worst_a:.1e}, (b) {diff_b:.1e}, (c) {near:.1e} at sbar = {sbar1}"))
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

struct Draw {
    params: ModelParams,
    r: Ref,
}

fn random_model(rng: &mut ChaCha8Rng) -> Draw {
    let mu_q = uniform(rng, -1.0, 1.0);
    let var_q = uniform(rng, 0.5, 3.0);
    let var_s = uniform(rng, 0.5, 6.0);
    let k = uniform(rng, 0.05, 0.3);
    let c = uniform(rng, 0.5, 2.0);
    let v = uniform(rng, 5.0, 60.0);
    let d = uniform(rng, 0.5, 0.98);
    Draw {
        params: ModelParams::normal_normal(mu_q, var_q, var_s, c, v, k, d).unwrap(),
        r: Ref { mu_q, sd_q: var_q.sqrt(), sd_s: var_s.sqrt(), k },
    }
}

/// A random oversubscribed single-cutoff profile `(α, Q)`.
fn random_profile(rng: &mut ChaCha8Rng, m: &Draw) -> (f64, f64) {
    let f = &m.params.quality;
    loop {
        let alpha = uniform(rng, 0.2, 1.0);
        let q = f.quantile(uniform(rng, 0.01, 0.8)).unwrap();
        if alpha * f.sf(q) > 1.2 * m.r.k {
            return (alpha, q);
        }
    }
}

fn ac6() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_clear: f64 = 0.0;
    for _ in 0..20 {
        let m = random_model(&mut rng);
        let (alpha, q0) = random_profile(&mut rng, &m);
        let phi = SubmissionProfile::scaled(&m.params.quality, alpha, ExtReal::Finite(q0));
        let eval = SuccessEvaluation::new(&phi, &m.params).map_err(|e| e.to_string())?;
        let s = eval.sbar().finite().ok_or("oversubscribed profile has no finite sbar")?;
        let g = m.r.g();
        let funded = m.r.integral(alpha, q0, |x| g.sf(s - x));
        worst_clear = worst_clear.max((funded - m.r.k).abs());

        let sd = m.r.sd_s;
        let mut prev = -1.0;
        for i in 0..1000 {
            let x = s - 6.0 * sd + 12.0 * sd * i as f64 / 999.0;
            let w = eval.win_prob(x);
            ensure(w > prev, format!("W not strictly increasing at q = {x}"))?;
            prev = w;
        }

        for _ in 0..10 {
            let (a1, c1) = random_profile(&mut rng, &m);
            let a2 = uniform(&mut rng, a1, 1.0);
            let c2 = c1 - uniform(&mut rng, 0.0, 1.0);
            let small = SubmissionProfile::scaled(&m.params.quality, a1, ExtReal::Finite(c1));
            let big = SubmissionProfile::scaled(&m.params.quality, a2, ExtReal::Finite(c2));
            let es = SuccessEvaluation::new(&small, &m.params).map_err(|e| e.to_string())?;
            let eb = SuccessEvaluation::new(&big, &m.params).map_err(|e| e.to_string())?;
            for i in 0..100 {
                let x = m.r.mu_q - 4.0 * m.r.sd_q + 8.0 * m.r.sd_q * i as f64 / 99.0;
                ensure(
                    es.win_prob(x) >= eb.win_prob(x) - 1e-12,
                    format!("larger profile wins more often at q = {x}"),
                )?;
            }
        }
    }
    ensure(worst_clear < 1e-8, format!("clearing residual {worst_clear:e}"))?;
    Ok(format!("20 draws, worst clearing residual {worst_clear:.1e}, monotone W, 200 nested pairs ordered"))
}

fn ac7() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: [f64; 3] = [0.0; 3];
    for _ in 0..100 {
        let m = random_model(&mut rng);
        let p = &m.params;
        let (alpha, q0) = random_profile(&mut rng, &m);
        let phi = SubmissionProfile::scaled(&p.quality, alpha, ExtReal::Finite(q0));
        let eval = SuccessEvaluation::new(&phi, p).map_err(|e| e.to_string())?;
        let sbar = eval.sbar().finite();
        let (c, v, d) = (p.rejection_cost, p.win_value, p.discount);
        let cut = p.quality.quantile(uniform(&mut rng, 0.02, 0.95)).unwrap();
        let t = 1 + (rng.next_u64() % 40) as u32;

        let oracle = |r: &Ref, periods: u32| {
            let f = r.f();
            let win = r.win_mass(sbar, cut);
            let rej = f.sf(cut) - win;
            // x = F δ x + Win (V + δ x) + Rej (−C + δ^{t+1} x)
            iterate_linear(win * v - rej * c, d * f.cdf(cut) + d * win + rej * d.powi(periods as i32 + 1))
        };

        let x = lifetime_payoff(ExtReal::Finite(cut), &eval, p);
        worst[0] = worst[0].max((x - oracle(&m.r, 1)).abs());
        let xt = lifetime_payoff_multi(ExtReal::Finite(cut), &eval, t, p);
        worst[1] = worst[1].max((xt - oracle(&m.r, t)).abs());
        let shift = uniform(&mut rng, -1.0, 1.0);
        let ti = Ref { mu_q: m.r.mu_q + shift, ..m.r };
        let xi = lifetime_payoff_typed(ExtReal::Finite(cut), &eval, &ti.f(), p);
        worst[2] = worst[2].max((xi - oracle(&ti, 1)).abs());
    }
    ensure(worst.iter().all(|&w| w < 1e-8), format!("worst gaps x {:e}, x_t {:e}, x_i {:e}", worst[0], worst[1], worst[2]))?;
    Ok(format!("100 draws, worst gaps x {:.1e}, x_t {:.1e}, x_i {:.1e}", worst[0], worst[1], worst[2]))
}

fn ac8() -> Check {
    let p = exclusion_case();
    let start = Instant::now();
    let ex = solve_exclusion(&p).map_err(|e| e.to_string())?;
    let q1 = q(&ex);
    let mut cfg = SimConfig::new(2024, Policy::Exclusion(1), vec![ex.cutoff()]);
    cfg.n_agents = 200_000;
    let res = run_simulation(&cfg, &p).map_err(|e| e.to_string())?;
    let target = 1.1 / (2.0 - p.quality.cdf(q1));
    let gap = (res.mean_total_eligibility - target).abs();

    let hist = &res.winner_quality_histogram;
    let analytic = winner_bin_masses(&ex.profile, &p, &hist.edges).map_err(|e| e.to_string())?;
    let normalise = |m: Vec<f64>| {
        let s: f64 = m.iter().sum();
        m.into_iter().map(|x| x / s).collect::<Vec<_>>()
    };
    let tv = total_variation(&normalise(hist.masses()), &normalise(analytic));

    let candidates: Vec<f64> = (-20..=20).map(|i| q1 + 0.05 * i as f64).collect();
    let br = deviator_payoffs(&res, &p, cfg.policy, &candidates, 10_000, cfg.seed, Execution::default())
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let miss = (br.cutoff - q1).abs();
    ensure(gap < 0.01, format!("eligibility {} vs {target}", res.mean_total_eligibility))?;
    ensure(tv < 0.03, format!("winner TV {tv}"))?;
    ensure(miss <= 0.05 + 1e-9, format!("empirical best response {} vs Q1 {q1}", br.cutoff))?;
    within(elapsed, 120.0)?;
    Ok(format!(
        "eligibility {:.5} vs {target:.5}, winner TV {tv:.4}, best response {:.3} vs Q1 {q1:.3}, {:.1} s",
        res.mean_total_eligibility,
        br.cutoff,
        elapsed.as_secs_f64()
    ))
}

fn two_type(hi: f64, lo: f64) -> ModelParams {
    exclusion_case()
        .with_types(vec![
            ResearcherType { weight: 0.5, quality: ScalarDistribution::normal(hi, 2.0).unwrap() },
            ResearcherType { weight: 0.5, quality: ScalarDistribution::normal(lo, 2.0).unwrap() },
        ])
        .unwrap()
}

fn ac9() -> Check {
    let p = two_type(0.5, 0.0);
    let o = solve_two_type(&p).map_err(|e| e.to_string())?;
    let elig_resid = o.eligibility_residual.unwrap_or(f64::NAN);
    ensure(o.residual < 1e-8 && elig_resid < 1e-8, format!("residuals {:e}, {elig_resid:e}", o.residual))?;
    let (qh, ql) = (o.cutoffs[0].to_f64(), o.cutoffs[1].to_f64());
    ensure(qh > ql, format!("Q_H = {qh} <= Q_L = {ql}"))?;

    // independent steady-state check: within-type share a = 1 / (1 + rejected mass)
    let sbar = o.sbar.finite();
    let mut worst_share: f64 = 0.0;
    for (i, mu) in [0.5, 0.0].into_iter().enumerate() {
        let r = Ref { mu_q: mu, ..exclusion_ref() };
        let cut = o.cutoffs[i].to_f64();
        let rej = r.f().sf(cut) - r.win_mass(sbar, cut);
        worst_share = worst_share.max((o.eligibility[i] / 0.5 - 1.0 / (1.0 + rej)).abs());
    }
    ensure(worst_share < 1e-8, format!("eligibility shares off by {worst_share:e}"))?;

    let same = solve_two_type(&two_type(0.0, 0.0)).map_err(|e| e.to_string())?;
    let pooled = q(&solve_exclusion(&exclusion_case()).map_err(|e| e.to_string())?);
    let dev = same.cutoffs.iter().map(|c| (c.to_f64() - pooled).abs()).fold(0.0, f64::max);
    ensure(dev < 1e-8, format!("identical types deviate from pooled root by {dev:e}"))?;
    Ok(format!(
        "Q_H = {qh:.6} > Q_L = {ql:.6}, residuals {:.1e}/{elig_resid:.1e}, share check {worst_share:.1e}, identical types {dev:.1e}",
        o.residual
    ))
}

fn ac10() -> Check {
    let p = exclusion_case();
    let ex = solve_exclusion(&p).map_err(|e| e.to_string())?;
    let bench = solve_benchmark(&p).map_err(|e| e.to_string())?;
    let h = winner_density(&ex.profile, &p, 2000).map_err(|e| e.to_string())?;
    let h0 = winner_density(&bench.profile, &p, 2000).map_err(|e| e.to_string())?;
    let report = compare_winners(&h, &h0, Some(&p.noise)).map_err(|e| e.to_string())?;
    let q1 = q(&ex);
    let qbar = match report.verdict {
        Verdict::SingleCrossing(x) => x,
        v => return Err(format!("verdict {v:?}")),
    };
    ensure(qbar > q1, format!("Qbar = {qbar} <= Q1 = {q1}"))?;
    for (i, &x) in h.grid.iter().enumerate() {
        let d = h.values[i] - h0.values[i];
        let ok = if x < q1 || x > qbar { d <= 1e-10 } else { d >= -1e-10 };
        ensure(ok, format!("sign pattern broken at q = {x}: {d:e}"))?;
    }

    let mut tested = 0;
    let mut check_fb = |params: &ModelParams, profiles: Vec<SubmissionProfile>| -> Result<(), String> {
        let fb = first_best(params, 2000).map_err(|e| e.to_string())?;
        for phi in profiles {
            let hw = winner_density(&phi, params, 2000).map_err(|e| e.to_string())?;
            let r = compare_winners(&fb.winner_density, &hw, None).map_err(|e| e.to_string())?;
            ensure(r.verdict == Verdict::FirstOrderDominates, format!("first best verdict {:?}", r.verdict))?;
            tested += 1;
        }
        Ok(())
    };
    check_fb(&p, vec![ex.profile.clone(), bench.profile.clone()])?;
    let p1 = static_case();
    check_fb(&p1, vec![solve_benchmark(&p1).map_err(|e| e.to_string())?.profile])?;
    let p3 = ban_length_case();
    let mut prof3 = Vec::new();
    for (t, _, _) in BAN_LENGTH {
        prof3.push(solve_multi_period(&p3, t).map_err(|e| e.to_string())?.profile);
    }
    prof3.push(solve_benchmark(&p3).map_err(|e| e.to_string())?.profile);
    check_fb(&p3, prof3)?;
    Ok(format!("single crossing at Qbar = {qbar:.6} > Q1 = {q1:.6}; first best dominates {tested} equilibria"))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("AC1 benchmark reproduction", ac1),
        ("AC2 exclusion reproduction", ac2),
        ("AC3 multi-period ordering", ac3),
        ("AC4 long-ban limit", ac4),
        ("AC5 reduction identities", ac5),
        ("AC6 assumption suite", ac6),
        ("AC7 payoff identities", ac7),
        ("AC8 simulator cross-validation", ac8),
        ("AC9 two-type suite", ac9),
        ("AC10 dominance suite", ac10),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
