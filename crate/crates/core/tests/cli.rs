use std::path::Path;
use std::process::{Command, Output};

const STATIC: &str = "[model]\nmu_q = 0.0\nvar_q = 1.0\nvar_s = 2.0\nC = 1.0\nV = 30.0\nk = 0.1\n";
const EXCLUSION: &str = "[model]\nmu_q = 0.0\nvar_q = 2.0\nvar_s = 5.0\nC = 1.0\nV = 50.0\nk = 0.1\ndelta = 0.97\n";
const BAN_LENGTH: &str = "[model]\nmu_q = 0.0\nvar_q = 1.0\nvar_s = 1.0\nC = 1.0\nV = 20.0\nk = 0.1\ndelta = 0.85\n\n[policy]\nt_values = [1, 5, 50]\n";

fn run(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_contest-eq"))
        .args(&args[..1])
        .arg("--config")
        .arg(&cfg)
        .args(&args[1..])
        .output()
        .unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.ends_with('\n') && !text.contains('\r'));
    let mut lines = text.lines().map(|l| l.split(',').map(str::to_string).collect::<Vec<_>>());
    let header = lines.next().unwrap();
    (header, lines.collect())
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name} in {header:?}"))
}

#[test]
fn solve_benchmark_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("solve.csv");
    let o = run(dir.path(), STATIC, &["solve", "--regime", "benchmark", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(rows.len(), 1);
    let resid: f64 = rows[0][column(&header, "residual")].parse().unwrap();
    assert!(resid.abs() < 1e-8);
    let q: f64 = rows[0][column(&header, "cutoff")].parse().unwrap();
    assert!((q - -0.4396185104029234).abs() < 1e-9);
}

#[test]
fn output_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    run(dir.path(), EXCLUSION, &["solve", "--regime", "exclusion", "--out", a.to_str().unwrap()]);
    run(dir.path(), EXCLUSION, &["solve", "--set", "policy.regime=\"exclusion\"", "--out", b.to_str().unwrap()]);
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn invalid_budget_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = run(dir.path(), STATIC, &["solve", "--set", "model.k=1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert!(err["message"].as_str().unwrap().contains("k must lie in (0,1)"), "{err}");
    assert!(!out.exists());
}

#[test]
fn malformed_config_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(dir.path(), "[model\nmu_q = ", &["solve"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(dir.path(), STATIC, &["bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn figures_order_ban_length_roots() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("figs");
    let o = run(dir.path(), BAN_LENGTH, &["figures", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out.join("fig3_roots.csv"));
    let get = |t: &str| -> f64 { rows[0][column(&header, t)].parse().unwrap() };
    let (q1, q5, q50) = (get("root_t1"), get("root_t5"), get("root_t50"));
    assert!(q50 < q1 && q1 < q5, "{q1} {q5} {q50}");
    for f in ["fig1_curves.csv", "fig2_curves.csv", "fig1_densities.csv", "fig2_densities.csv", "fig3_curves.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn simulate_matches_analytic_eligibility() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.csv");
    let cfg = format!("{EXCLUSION}\n[policy]\nregime = \"exclusion\"\n\n[sim]\nseed = 7\nn_agents = 50000\nn_periods = 200\nburn_in = 50\ndeviators = 0\n");
    let o = run(dir.path(), &cfg, &["simulate", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    let e = column(&header, "eligibility");
    let tail: Vec<f64> = rows[50..].iter().map(|r| r[e].parse().unwrap()).collect();
    let mean = tail.iter().sum::<f64>() / tail.len() as f64;
    let (_, summary) = read_csv(&dir.path().join("sim.summary.csv"));
    let analytic: f64 = summary.iter().find(|r| r[0] == "analytic_eligibility_1").unwrap()[1].parse().unwrap();
    assert!((mean - analytic).abs() < 0.01, "{mean} vs {analytic}");
    assert!(dir.path().join("sim.histogram.csv").exists());
}

#[test]
fn sweep_and_compare_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep.csv");
    let cfg = format!("{EXCLUSION}\n[policy]\nregime = \"exclusion\"\nsweep_axis = \"V\"\nsweep_values = [50, 100, 500]\n");
    let o = run(dir.path(), &cfg, &["sweep", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r[column(&header, "error")].is_empty()));

    let out = dir.path().join("cmp.csv");
    let cfg = format!("{EXCLUSION}\n[policy]\nregime = \"exclusion\"\ncompare_with = \"benchmark\"\n");
    let o = run(dir.path(), &cfg, &["compare", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&dir.path().join("cmp.report.csv"));
    assert_eq!(rows[0][column(&header, "verdict")], "single_crossing");
}
