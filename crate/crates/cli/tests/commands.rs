use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pi_bounds::fixtures::m2;
use pi_bounds::generators::{generate, save};
use pi_bounds::{Family, GenSpec, Mdp};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_pi-bounds"));
    c.env_remove("PI_BOUNDS_BUDGET");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_mdp(dir: &Path, name: &str, mdp: &Mdp) -> String {
    let path = dir.join(name);
    save(mdp, &path).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn generate_writes_a_valid_deterministic_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let o = run(&[
            "generate", "--family", "deterministic", "--n", "5", "--m", "2", "--gamma", "0.9",
            "--seed", "7", "--out", p.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        assert!(stdout(&o).contains("family=deterministic n=5 m=2 gamma=0.9 seed=7"));
    }
    let mdp = pi_bounds::generators::load(&a).unwrap();
    assert!(mdp.is_deterministic());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn generate_rejects_empty_state_space() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let o = run(&[
        "generate", "--family", "dense-random", "--n", "0", "--m", "2", "--gamma", "0.9",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("InvalidSpec"));
    assert!(!out.exists());
}

#[test]
fn solve_m2_takes_one_iteration_for_both_variants() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_mdp(dir.path(), "m2.json", &m2());
    for variant in ["howard", "simplex"] {
        let trace = dir.path().join(format!("{variant}.json"));
        let o = run(&["solve", &path, "--variant", variant, "--out", trace.to_str().unwrap()]);
        assert!(o.status.success());
        let text = stdout(&o);
        assert!(text.contains("iterations: 1\n"), "{text}");
        assert!(text.contains("final policy: (a1,a0)"), "{text}");
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
        assert_eq!(json["iterations"], 1);
    }
}

#[test]
fn solve_single_action_model_takes_no_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = generate(&GenSpec::new(Family::DenseRandom, 4, 1, 0.9, 3)).unwrap();
    let path = write_mdp(dir.path(), "one.json", &mdp);
    let o = run(&["solve", &path]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("iterations: 0\n"));
}

#[test]
fn solve_reports_iteration_limit() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_mdp(dir.path(), "m2.json", &m2());
    let o = run(&["solve", &path, "--max-iter", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solve_rejects_malformed_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "not json").unwrap();
    let o = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Parse"));
}

#[test]
fn verify_m2_simplex_passes() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_mdp(dir.path(), "m2.json", &m2());
    let o = run(&["verify", &path, "--variant", "simplex"]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("Lemma spicontraction: PASS"), "{text}");
    assert!(text.contains("worst slack"));
    assert!(text.contains("verdict: PASS"));
}

#[test]
fn verify_single_action_passes_vacuously() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = generate(&GenSpec::new(Family::Garnet { branching: 2 }, 5, 1, 0.99, 8)).unwrap();
    let path = write_mdp(dir.path(), "one.json", &mdp);
    let report = dir.path().join("report.json");
    let o = run(&["verify", &path, "--out", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for r in json.as_array().unwrap() {
        assert_eq!(r["iterations"], 0);
        assert_eq!(r["passed"], true);
    }
}

#[test]
fn verify_skips_structure_beyond_budget() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = generate(&GenSpec::new(Family::DenseRandom, 6, 3, 0.9, 1)).unwrap();
    let path = write_mdp(dir.path(), "d.json", &mdp);
    let o = run(&["verify", &path, "--budget", "100"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("structure: skipped (729 policies exceed the budget of 100)"));

    let o = bin()
        .args(["verify", &path])
        .env("PI_BOUNDS_BUDGET", "10")
        .output()
        .unwrap();
    assert!(stdout(&o).contains("budget of 10)"));
}

#[test]
fn structure_m2() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_mdp(dir.path(), "m2.json", &m2());
    let report = dir.path().join("s.json");
    let o = run(&["structure", &path, "--out", report.to_str().unwrap()]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("tau_r = 2\n"), "{text}");
    assert!(text.contains("assumption2 = false"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(json["tau_r"], 2.0);
    assert_eq!(json["assumption2"], false);
}

#[test]
fn structure_two_block_reports_partition() {
    let dir = tempfile::tempdir().unwrap();
    let spec = GenSpec::new(
        Family::TwoBlockAssumption2 {
            transient: 2,
            recurrent: 3,
        },
        5,
        2,
        0.9,
        4,
    );
    let path = write_mdp(dir.path(), "tb.json", &generate(&spec).unwrap());
    let o = run(&["structure", &path]);
    let text = stdout(&o);
    assert!(o.status.success(), "{text}");
    assert!(text.contains("assumption2 = true"));
    assert!(text.contains("partition: T = [0, 1], R = [2, 3, 4]"), "{text}");
}

#[test]
fn structure_budget_exceeded() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = generate(&GenSpec::new(Family::Deterministic, 10, 10, 0.9, 0)).unwrap();
    let path = write_mdp(dir.path(), "big.json", &mdp);
    let o = run(&["structure", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("10000000000"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("BudgetExceeded"));
}

fn sweep_config(dir: &Path, jobs: usize) -> PathBuf {
    let cfg = serde_json::json!({
        "grids": [{
            "families": [{"kind": "dense_random"}, {"kind": "garnet", "branching": 2}],
            "n": [3],
            "m": [2],
            "gamma": [0.9],
            "seeds": [5, 9]
        }],
        "jobs": jobs,
        "out_dir": dir.join(format!("out{jobs}")),
    });
    let path = dir.join(format!("sweep{jobs}.json"));
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

#[test]
fn sweep_counts_rows_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let one = sweep_config(dir.path(), 1);
    let eight = sweep_config(dir.path(), 8);
    let o = run(&["sweep", one.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("rows: 8\n"));
    let first = std::fs::read(dir.path().join("out1/rows.csv")).unwrap();
    assert_eq!(String::from_utf8_lossy(&first).lines().count(), 9);

    let again = dir.path().join("again");
    let o = run(&["sweep", one.to_str().unwrap(), "--out", again.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(again.join("rows.csv")).unwrap(), first);

    let o = run(&["sweep", eight.to_str().unwrap()]);
    assert!(o.status.success());
    for f in ["rows.csv", "aggregates.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(dir.path().join("out1").join(f)).unwrap(),
            std::fs::read(dir.path().join("out8").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn sweep_rejects_repeated_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let cfg = r#"{"grids":[{"families":[{"kind":"deterministic"}],"n":[3],"m":[2],"gamma":[0.9],"seeds":[1,1]}]}"#;
    std::fs::write(&path, cfg).unwrap();
    let o = run(&["sweep", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
}
