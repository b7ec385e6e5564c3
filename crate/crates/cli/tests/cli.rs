use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use oracle_core::io::read_matrix_market;

fn agmas(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agmas"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn key(text: &str, k: &str) -> Option<String> {
    text.lines().find_map(|l| l.strip_prefix(&format!("{k}=")).map(str::to_string))
}

fn final_row(csv: &str) -> Vec<String> {
    csv.lines()
        .find(|l| l.starts_with("final,"))
        .expect("summary row")
        .split(',')
        .map(str::to_string)
        .collect()
}

#[test]
fn powerlaw_gen_matches_trace() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("pl.spec"), "kind=powerlaw\nd=60\nalpha=1\ntau=2\nmu_floor=1e-3\nseed=4\n").unwrap();
    let o = agmas(dir.path(), &["gen", "pl.spec", "--out", "pl"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for ext in ["mtx", "b.csv", "cert", "manifest"] {
        assert!(dir.path().join(format!("pl.{ext}")).exists(), "missing pl.{ext}");
    }
    // alpha = 1: sum of eigenvalues is 2 H_60 + 60 * 1e-3, and rotation keeps the trace.
    let harmonic: f64 = (1..=60).map(|i| 1.0 / i as f64).sum();
    let expected = 2.0 * harmonic + 0.06;
    let cert = fs::read_to_string(dir.path().join("pl.cert")).unwrap();
    let tau: f64 = key(&cert, "tau_alpha").unwrap().parse().unwrap();
    assert!((tau - expected).abs() < 1e-10 * expected, "{tau} vs {expected}");
    let a = read_matrix_market(dir.path().join("pl.mtx")).unwrap();
    let trace: f64 = a.diag().iter().sum();
    assert!((trace - expected).abs() < 1e-9 * expected, "{trace} vs {expected}");
}

#[test]
fn gen_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.spec"), "kind=powerlaw\nd=40\nalpha=2\ntau=1\nseed=9\n").unwrap();
    assert_eq!(code(&agmas(dir.path(), &["gen", "s.spec", "--out", "a"])), 0);
    assert_eq!(code(&agmas(dir.path(), &["gen", "s.spec", "--out", "b"])), 0);
    for ext in ["mtx", "b.csv", "cert"] {
        let x = fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        let y = fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
        assert_eq!(x, y, "{ext} differs");
    }
    assert_eq!(code(&agmas(dir.path(), &["gen", "s.spec", "--out", "c", "--seed", "10"])), 0);
    assert_ne!(fs::read(dir.path().join("a.mtx")).unwrap(), fs::read(dir.path().join("c.mtx")).unwrap());
}

#[test]
fn inconsistent_wishart_names_the_clause() {
    let dir = tempfile::tempdir().unwrap();
    // case2 needs mu^(-1/2) >= tau^alpha: 10 < 20.
    fs::write(dir.path().join("w.spec"), "kind=wishart\nd=200\nmu=1e-2\ntau_alpha=20\nregime=case2\n").unwrap();
    let o = agmas(dir.path(), &["gen", "w.spec", "--out", "w"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("mu^(-1/2) >= tau_alpha^alpha"), "{}", stderr(&o));
    assert!(!dir.path().join("w.mtx").exists());
}

#[test]
fn unknown_spec_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("s.spec"), "kind=flat\nd=10\nlevle=1\n").unwrap();
    let o = agmas(dir.path(), &["gen", "s.spec", "--out", "s"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("levle"));
}

#[test]
fn flat_spectrum_takes_agd_branch() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("f.spec"), "kind=flat\nd=50\nlevel=1\nmu_floor=1e-2\nseed=1\n").unwrap();
    let o = agmas(dir.path(), &["solve", "f.spec", "--solver", "agmas", "--out", "f.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("f.csv")).unwrap();
    assert!(csv.starts_with("iter,grad_calls,hvp_calls,data_accesses,objective,residual,branch\n"));
    assert_eq!(final_row(&csv)[6], "agd");
    let manifest = fs::read_to_string(dir.path().join("f.csv.manifest")).unwrap();
    assert_eq!(key(&manifest, "command").as_deref(), Some("solve"));
    assert_eq!(key(&manifest, "summary.branch").as_deref(), Some("agd"));
}

#[test]
fn cg_finishes_within_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let values: Vec<String> = (1..=30).map(|i| format!("{}", 1.0 / i as f64)).collect();
    fs::write(dir.path().join("e.spec"), format!("kind=explicit\nvalues={}\nseed=2\n", values.join(","))).unwrap();
    assert_eq!(code(&agmas(dir.path(), &["gen", "e.spec", "--out", "e"])), 0);
    let o = agmas(dir.path(), &["solve", "e.mtx", "--solver", "cg", "--out", "e.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("e.csv")).unwrap();
    let row = final_row(&csv);
    let grads: u64 = row[1].parse().unwrap();
    assert!(grads <= 35, "cg used {grads} products at d = 30");
    assert_eq!(row[6], "cg");
}

#[test]
fn cubic_on_double_well_passes_ssp() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("dw.spec"), "kind=doublewell\nd=8\nseed=3\n").unwrap();
    let o = agmas(dir.path(), &["solve", "dw.spec", "--solver", "cubic", "--eps", "1e-4", "--out", "dw.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(key(&stderr(&o), "ssp_pass").as_deref(), Some("true"));
    let lmin: f64 = key(&stderr(&o), "ssp_lambda_min").unwrap().parse().unwrap();
    assert!(lmin > 0.0);
}

#[test]
fn solver_instance_mismatch_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("dw.spec"), "kind=doublewell\nd=4\n").unwrap();
    let o = agmas(dir.path(), &["solve", "dw.spec", "--solver", "cg"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("does not accept"));
}

#[test]
fn erm_on_generated_regression() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("r.spec"), "kind=regression\nn=400\nd=20\nalpha=1\ntau=1\nnoise=0.01\nseed=5\n").unwrap();
    assert_eq!(code(&agmas(dir.path(), &["gen", "r.spec", "--out", "r"])), 0);
    let o = agmas(dir.path(), &["solve", "r.csv", "--solver", "erm", "--mu", "1e-3", "--eps", "1e-6", "--out", "r.out.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = fs::read_to_string(dir.path().join("r.out.csv")).unwrap();
    let accesses: u64 = final_row(&csv)[3].parse().unwrap();
    assert!(accesses > 0);
    let o = agmas(dir.path(), &["solve", "r.csv", "--solver", "erm"]);
    assert_eq!(code(&o), 1, "missing --mu is a config error");
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&agmas(dir.path(), &["--help"])), 0);
    assert_eq!(code(&agmas(dir.path(), &["--version"])), 0);
    assert_eq!(code(&agmas(dir.path(), &["solve"])), 1);
}

const SWEEP: &str = "kind=powerlaw\nd=80\nalpha=1\ntau=1\nparam=mu_floor\nvalues=1e-2,3e-3,1e-3,3e-4\nseeds=1,2\nsolvers=agmas,agd,cg\neps=1e-8\n";

#[test]
fn bench_is_reproducible_across_jobs_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("sw.spec"), SWEEP).unwrap();
    let o = agmas(dir.path(), &["bench", "sw.spec", "--out", "a.csv", "--jobs", "1", "--plot", "a.plot"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(code(&agmas(dir.path(), &["bench", "sw.spec", "--out", "b.csv", "--jobs", "4"])), 0);
    let a = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert_eq!(a, fs::read_to_string(dir.path().join("b.csv")).unwrap());
    assert_eq!(a.lines().count(), 1 + 3 * 4 * 2);

    let fit = fs::read_to_string(dir.path().join("a.csv.fit")).unwrap();
    for s in ["agmas", "agd", "cg"] {
        let slope: f64 = key(&fit, &format!("{s}.slope")).unwrap().parse().unwrap();
        assert!(slope.is_finite());
    }
    assert_eq!(fs::read_to_string(dir.path().join("a.plot")).unwrap().lines().count(), 1 + 3 * 4);

    let o = agmas(dir.path(), &["replay", "a.csv.manifest", "--out", "c.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(a, fs::read_to_string(dir.path().join("c.csv")).unwrap());
}

#[test]
fn single_point_sweep_refuses_fit() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("one.spec"), "kind=flat\nd=20\nmu_floor=1e-2\nparam=mu_floor\nvalues=1e-2\nsolvers=agd\n").unwrap();
    let o = agmas(dir.path(), &["bench", "one.spec", "--out", "one.csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let fit = fs::read_to_string(dir.path().join("one.csv.fit")).unwrap();
    assert!(key(&fit, "agd.slope").is_none());
    assert!(key(&fit, "agd.error").unwrap().contains("at least 4"));
}

#[test]
fn failing_rows_give_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    // agd has no mu on a nesterov chain.
    fs::write(dir.path().join("n.spec"), "kind=nesterov\nparam=d\nvalues=10,20\nsolvers=agd\n").unwrap();
    let o = agmas(dir.path(), &["bench", "n.spec", "--out", "n.csv"]);
    assert_eq!(code(&o), 2);
    let csv = fs::read_to_string(dir.path().join("n.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| !l.ends_with(",ok")));
}
