use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use contest_eq::analysis::{sweep, SweepAxis};
use contest_eq::equilibria::{solve, Policy, Regime};
use contest_eq::sim::{run_simulation, SimConfig};
use contest_eq::{Execution, ExtReal, ModelParams};

fn exclusion_case() -> ModelParams {
    ModelParams::normal_normal(0.0, 2.0, 5.0, 1.0, 50.0, 0.1, 0.97).unwrap()
}

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn exclusion_scan(c: &mut Criterion) {
    let p = exclusion_case();
    let mut g = c.benchmark_group("exclusion_scan");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| solve(&p, &Regime::Exclusion, exec).unwrap())
        });
    }
    g.finish();
}

fn simulation(c: &mut Criterion) {
    let p = exclusion_case();
    let q1 = solve(&p, &Regime::Exclusion, Execution::default()).unwrap().cutoff();
    let mut g = c.benchmark_group("simulation_50k_x_50");
    g.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = SimConfig::new(1, Policy::Exclusion(1), vec![q1]);
        cfg.n_agents = 50_000;
        cfg.n_periods = 50;
        cfg.burn_in = 10;
        cfg.execution = exec;
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_simulation(&cfg, &p).unwrap())
        });
    }
    g.finish();
}

fn value_sweep(c: &mut Criterion) {
    let p = exclusion_case();
    let values = [50.0, 100.0, 500.0, 1000.0];
    let mut g = c.benchmark_group("sweep_v");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| sweep(&p, SweepAxis::WinValue, &values, &Regime::SignalCutoff(ExtReal::PosInf), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, exclusion_scan, simulation, value_sweep);
criterion_main!(benches);
