use std::path::Path;
use std::process::{Command, Output};

fn surrodist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_surrodist")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_record_trace_and_cdf() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = surrodist(&[
        "run", "--benchmark", "4", "--surrogate", "gp", "--enrich", "mov", "--pool", "400", "--max-doe", "20",
        "--seed", "2", "--stopping", "budget", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("BudgetExhausted after 20 evaluations"));
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("doe_size,eps_f,eps_s,eps_v,selected,y_star,fallback,fit_diagnostic,wall_seconds\n"));
    assert_eq!(trace.lines().count(), 1 + 9);
    let cdf = std::fs::read_to_string(out.join("cdf.csv")).unwrap();
    assert_eq!(cdf.lines().count(), 1 + 101);
    let record: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("record.json")).unwrap()).unwrap();
    assert_eq!(record["evaluations"], 20);
}

#[test]
fn run_rejects_missing_tolerance_and_small_pools() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = surrodist(&["run", "--benchmark", "4", "--stopping", "static", "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("--tol"));
    let o = surrodist(&["run", "--benchmark", "4", "--pool", "100", "--out", out]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("10 x budget"));
}

#[test]
fn range_prints_recomputed_and_tabulated_endpoints() {
    let o = surrodist(&["range", "--benchmark", "4", "--n", "10000", "--seed", "3"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "benchmark,n,seed,recomputed_min,recomputed_max,table_min,table_max");
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..3], &["4", "10000", "3"]);
    assert_eq!(&row[5..], &["-4.67", "2.63"]);
    let o = surrodist(&["range", "--benchmark", "4", "--n", "100"]);
    assert!(!o.status.success());
}

#[test]
fn cards_are_json() {
    let o = surrodist(&["card"]);
    let cards: Vec<serde_json::Value> = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(cards.len(), 16);
    assert_eq!(cards[14]["dimension"], 20);
    assert_eq!(cards[12]["dimension"], 8);
    assert_eq!(cards[13]["status"], "OutOfScope");
}

#[test]
fn ground_motion_regenerates_the_bundled_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gm.txt");
    assert!(surrodist(&["ground-motion", "--out", path.to_str().unwrap()]).status.success());
    let bundled = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/elcentro_synthetic.txt");
    assert_eq!(std::fs::read_to_string(path).unwrap(), std::fs::read_to_string(bundled).unwrap());
}

#[test]
fn design_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let p = path.to_str().unwrap();
    assert!(surrodist(&["design", "--benchmark", "8", "--n", "15", "--pool", "500", "--out", p]).status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 16);
    assert_eq!(text.lines().next().unwrap().split(',').count(), 5);
    assert!(surrodist(&["design", "--kind", "sobol", "--dim", "3", "--n", "8", "--out", p]).status.success());
    assert!(!surrodist(&["design", "--n", "8", "--out", p]).status.success());
}

#[test]
fn campaign_resume_and_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("m.ini");
    std::fs::write(
        &matrix,
        "[campaign]\nseed = 1\nreps = 1\n[defaults]\npool = 300\nmax_doe = 16\n[cell]\nbenchmark = 2\nsurrogate = gp\nenrich = md, mov\n",
    )
    .unwrap();
    let out = dir.path().join("c");
    let args = ["campaign", "--matrix", matrix.to_str().unwrap(), "--reps", "2", "--out", out.to_str().unwrap()];
    let o = surrodist(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("4 runs (4 executed"));
    let mut resumed = args.to_vec();
    resumed.push("--resume");
    assert!(stdout(&surrodist(&resumed)).starts_with("4 runs (0 executed, 4 loaded"));
    let report = dir.path().join("r");
    let o = surrodist(&["analyze", "--in", out.to_str().unwrap(), "--tols", "0.1,0.2", "--out", report.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 7);
    assert!(report.join("al_benefit.csv").is_file());
}
