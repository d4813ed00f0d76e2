use std::path::Path;
use std::process::{Command, Output};

use search_contracts::corner::SweepRow;
use search_contracts::feasible::{
    alpha_interval_extended, diagonal_roots, h_value_extended, PointTag,
};
use search_contracts::io::{read_boundary, read_csv, LabeledPoint};
use search_contracts::objectives::{Regime, SolveResult};
use search_contracts::sim::EmpiricalOutcome;
use search_contracts::SearchEnv;
use search_contracts_cli::{Figure3Row, Figure3Series, KeyValue};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_search-contracts"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> (Output, Vec<u8>) {
    let path = dir.join(name);
    let mut full: Vec<&str> = args.to_vec();
    let p = path.to_str().unwrap().to_string();
    full.push("--out");
    full.push(&p);
    let out = run(&full);
    let bytes = std::fs::read(&path).unwrap_or_default();
    (out, bytes)
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn boundary_rows_lie_on_h_zero_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (out, bytes) = run_to(
        dir.path(),
        "bd.csv",
        &["boundary", "--A", "0.7", "--n", "512"],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.starts_with("p1,p2,tag\n"));
    assert!(!text.contains('\r'));
    let curve = read_boundary(text.as_bytes()).unwrap();
    assert!(curve.points.len() >= 512);
    let env = SearchEnv::uniform_from_threshold(0.7).unwrap();
    for p in &curve.points {
        assert!(
            h_value_extended(&env, p.prices()).unwrap().abs() <= 1e-9,
            "{p:?}"
        );
    }
    for tag in [
        PointTag::MLeft,
        PointTag::MRight,
        PointTag::MLow,
        PointTag::MHigh,
        PointTag::DiagLow,
        PointTag::DiagHigh,
    ] {
        assert!(curve.points.iter().any(|p| p.tag == tag), "missing {tag:?}");
    }
    // Re-serialising the parsed rows gives the same bytes.
    let again = search_contracts::io::write_csv_string(&curve.points).unwrap();
    assert_eq!(again, text);
    // Environment echo goes to stderr for CSV output.
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("input=A") && err.contains("cost=0.045"),
        "{err}"
    );
}

#[test]
fn solve_profit_max_is_symmetric_at_low_cost() {
    let dir = tempfile::tempdir().unwrap();
    let (out, bytes) = run_to(
        dir.path(),
        "r.json",
        &[
            "solve",
            "--A",
            "0.8",
            "--objective",
            "profit",
            "--direction",
            "max",
        ],
    );
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["regime"], "SYMMETRIC_DIAGONAL");
    assert_eq!(v["alpha"], 0.5);
    assert_eq!(v["input"], "A");
    assert_eq!(v["threshold"], 0.8);
    assert!((v["cost"].as_f64().unwrap() - 0.02).abs() < 1e-15);
    let r: SolveResult = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(r.regime, Regime::SymmetricDiagonal);
    assert!(r.certificate.unwrap().certified);
    let again = serde_json::to_value(&r).unwrap();
    for (k, x) in again.as_object().unwrap() {
        assert_eq!(&v[k], x, "field {k}");
    }
}

#[test]
fn cost_input_echoes_threshold() {
    let out = run(&["demand", "--s", "0.045", "--p1", "0.4", "--p2", "0.3"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["input"], "s");
    assert_eq!(v["cost"], 0.045);
    assert!((v["threshold"].as_f64().unwrap() - 0.7).abs() < 1e-12);
    assert!((v["d11"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert!((v["d22"].as_f64().unwrap() - 0.48).abs() < 1e-12);
}

#[test]
fn record_csv_is_key_value() {
    let out = run(&["critical", "--format", "csv"]);
    assert_eq!(code(&out), 0);
    let rows: Vec<KeyValue> = read_csv(out.stdout.as_slice()).unwrap();
    let get = |k: &str| rows.iter().find(|r| r.key == k).unwrap().value.clone();
    let p_high: f64 = get("p_high").parse().unwrap();
    assert!((p_high - 3f64.sqrt() / 3.0).abs() <= 1e-6);
    let a: f64 = get("threshold").parse().unwrap();
    assert!((a - 0.7).abs() <= 0.01);
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 4] = [
        &[
            "simulate", "--A", "0.7", "--p1", "0.4", "--p2", "0.3", "--alpha", "1", "--n",
            "200000", "--seed", "9",
        ],
        &["figure4", "--A", "0.5", "--n", "40"],
        &["boundary", "--s", "0.045", "--n", "128"],
        &[
            "figure3", "--A", "0.7", "--alpha", "0.5", "--n", "50", "--grid", "20",
        ],
    ];
    for (k, args) in cases.iter().enumerate() {
        let (o1, a) = run_to(dir.path(), &format!("a{k}"), args);
        let (o2, b) = run_to(dir.path(), &format!("b{k}"), args);
        assert_eq!((code(&o1), code(&o2)), (0, 0));
        assert!(!a.is_empty());
        assert_eq!(a, b, "{args:?}");
    }
    // No temporary files are left behind.
    let names: Vec<String> = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(names.len(), 8, "{names:?}");
}

#[test]
fn simulate_json_round_trips() {
    let out = run(&[
        "simulate", "--A", "0.7", "--p1", "0.4", "--p2", "0.3", "--alpha", "1", "--n", "100000",
        "--seed", "5",
    ]);
    assert_eq!(code(&out), 0);
    let o: EmpiricalOutcome = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!((o.n, o.seed), (100_000, 5));
    assert!(o.d11.within(0.4, 4.0));
}

#[test]
fn figure2_points_are_implementable() {
    let out = run(&["figure2", "--A", "0.7", "--n", "128"]);
    assert_eq!(code(&out), 0);
    let rows: Vec<LabeledPoint> = read_csv(out.stdout.as_slice()).unwrap();
    assert!(rows.iter().all(|r| r.inside), "a point lies outside P");
    let get = |l: &str| {
        rows.iter()
            .find(|r| r.label == l)
            .unwrap_or_else(|| panic!("missing {l}"))
    };
    let roots = diagonal_roots(&SearchEnv::uniform_from_threshold(0.7).unwrap()).unwrap();
    let r = get("random");
    assert!((r.p1 - r.p2).abs() <= 1e-8);
    assert!(r.p1 > roots.low && r.p1 < roots.high);
    let p1 = get("prominence_1");
    assert!(p1.p1 > p1.p2);
    let p2 = get("prominence_2");
    assert!((p2.p1 - p1.p2).abs() < 1e-8 && (p2.p2 - p1.p1).abs() < 1e-8);
    assert!(rows.iter().filter(|r| r.label == "boundary").count() >= 128);
}

#[test]
fn figure3_region_is_bounded_by_the_ic2_locus() {
    let out = run(&[
        "figure3", "--A", "0.7", "--alpha", "0.5", "--n", "80", "--grid", "30",
    ]);
    assert_eq!(code(&out), 0);
    let rows: Vec<Figure3Row> = read_csv(out.stdout.as_slice()).unwrap();
    let count = |s: Figure3Series| rows.iter().filter(|r| r.series == s).count();
    assert!(count(Figure3Series::Ic1Locus) > 0);
    assert!(count(Figure3Series::Ic2Locus) > 0);
    assert!(count(Figure3Series::Ic2Region) > 0);
    let env = SearchEnv::uniform_from_threshold(0.7).unwrap();
    for r in &rows {
        let p = search_contracts::PricePair::new(r.p1, r.p2).unwrap();
        let hi = alpha_interval_extended(&env, p).unwrap().hi;
        match r.series {
            Figure3Series::Ic2Locus => assert!((hi - 0.5).abs() <= 1e-6, "{r:?}: hi {hi}"),
            Figure3Series::Ic2Region => assert!(hi >= 0.5, "{r:?}: hi {hi}"),
            Figure3Series::Ic1Locus => {}
        }
    }
}

#[test]
fn figure4_sweep_has_no_inclusion_violations() {
    let out = run(&["figure4", "--A", "0.65", "--n", "100"]);
    assert_eq!(code(&out), 0);
    let rows: Vec<SweepRow> = read_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(rows.len(), 10_000);
    assert!(rows.iter().all(|r| !r.in_hat || r.in_plain));
}

#[test]
fn verify_reports_price_directed_deviation() {
    let out = run(&[
        "verify",
        "--A",
        "0.7",
        "--p1",
        "0.4",
        "--p2",
        "0.4",
        "--algorithm",
        "price-directed",
        "--grid",
        "200",
    ]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["is_equilibrium"], false);
    assert_eq!(v["algorithm"]["kind"], "PRICE_DIRECTED");
}

#[test]
fn verify_contract_on_the_path_is_an_equilibrium() {
    let out = run(&[
        "verify",
        "--A",
        "0.7",
        "--p1",
        "0.4",
        "--p2",
        "0.4",
        "--algorithm",
        "contract",
        "--alpha",
        "0.5",
    ]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["is_equilibrium"], true);
}

#[test]
fn custom_table_algorithm_is_read_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("t.csv");
    std::fs::write(&table, "p1,p2,alpha\n0.4,0.4,0.5\n").unwrap();
    let out = run(&[
        "verify",
        "--A",
        "0.7",
        "--p1",
        "0.4",
        "--p2",
        "0.4",
        "--algorithm",
        "custom",
        "--table",
        table.to_str().unwrap(),
        "--grid",
        "100",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let missing = run(&[
        "verify",
        "--A",
        "0.7",
        "--p1",
        "0.4",
        "--p2",
        "0.4",
        "--algorithm",
        "custom",
    ]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &[
            "solve",
            "--A",
            "0.7",
            "--s",
            "0.045",
            "--objective",
            "profit",
        ][..],
        &["solve", "--objective", "profit"],
        &["nonsense"],
        &["boundary", "--A", "0.7", "--n", "10"],
        &["solve", "--A", "0.7", "--objective", "utility"],
        &[
            "simulate", "--A", "0.7", "--p1", "0.4", "--p2", "0.3", "--alpha", "1.5",
        ],
        &["demand", "--A", "0.7", "--p1", "abc", "--p2", "0.3"],
        &[],
    ] {
        let out = run(args);
        assert_eq!(code(&out), 2, "{args:?}");
        assert!(
            String::from_utf8_lossy(&out.stderr).contains("Usage"),
            "{args:?}"
        );
        assert!(out.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn domain_errors_exit_three() {
    for args in [
        &["demand", "--A", "0.7", "--p1", "0.9", "--p2", "0.1"][..],
        &["phi", "--A", "0.7", "--p1", "0.69", "--p2", "0.05"],
        &["solve", "--s", "0.7", "--objective", "profit"],
        &["demand", "--A", "0.7", "--p1", "1.5", "--p2", "0.3"],
        &["critical", "--s-lo", "0.06", "--s-hi", "0.08"],
    ] {
        let out = run(args);
        assert_eq!(
            code(&out),
            3,
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(
            String::from_utf8_lossy(&out.stderr).starts_with("error:"),
            "{args:?}"
        );
    }
}

#[test]
fn corner_below_threshold_uses_the_plain_set() {
    let out = run(&["corner", "--A", "0.7", "--p1", "0.3", "--p2", "0.3"]);
    assert_eq!(code(&out), 0);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["regime"], "BOTH_BELOW");
    assert!(v["hat"].is_null());
    assert_eq!(v["in_hat"], v["in_plain"]);
}

#[test]
fn failed_runs_leave_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let (out, bytes) = run_to(
        dir.path(),
        "x.json",
        &["demand", "--A", "0.7", "--p1", "0.9", "--p2", "0.1"],
    );
    assert_eq!(code(&out), 3);
    assert!(bytes.is_empty());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn help_exits_zero() {
    let out = run(&["--help"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in [
        "demand",
        "boundary",
        "phi",
        "solve",
        "first-best",
        "critical",
        "verify",
        "simulate",
        "corner",
        "figure2",
        "figure3",
        "figure4",
    ] {
        assert!(text.contains(cmd), "{cmd}");
    }
}
