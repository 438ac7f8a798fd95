use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MDP: &str = "2 2 9.0000000000000000e-1
0 0.3
1 0.2
0.7 0.3
0 1
0.4 0.6
1 0
";

fn vilcb(dir: &Path, args: &[&str]) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_vilcb"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .args(args)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.txt"), MDP).unwrap();
    dir
}

#[test]
fn gen_data_then_solve() {
    let dir = setup();
    vilcb(
        dir.path(),
        &[
            "gen-data", "--mdp", "m.txt", "--n", "500", "--seed", "4", "--out", "d.csv",
        ],
    );
    let data = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert_eq!(data.lines().count(), 501);
    assert_eq!(data.lines().next(), Some("s,a,s'"));
    vilcb(
        dir.path(),
        &[
            "solve",
            "--mdp",
            "m.txt",
            "--data",
            "d.csv",
            "--cb",
            "1",
            "--out",
            "q.csv",
            "--summary",
            "s.txt",
        ],
    );
    let q = fs::read_to_string(dir.path().join("q.csv")).unwrap();
    assert_eq!(q.lines().next(), Some("s,a,Q,b,N"));
    assert_eq!(q.lines().count(), 5);
    let summary = fs::read_to_string(dir.path().join("s.txt")).unwrap();
    assert!(summary.starts_with("gap="));
    assert!(summary.contains("samples=500"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = setup();
    fs::write(
        dir.path().join("run.cfg"),
        "# sweep\nseed=4\ntrials=2\ngrid=30,60\nalgo=vi-lcb,vi\n",
    )
    .unwrap();
    vilcb(
        dir.path(),
        &[
            "gambler",
            "--goal",
            "6",
            "--horizon",
            "5",
            "--config",
            "run.cfg",
            "--trials",
            "3",
            "--out",
            "g.csv",
        ],
    );
    let text = fs::read_to_string(dir.path().join("g.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "n,total_samples,algorithm,mean_gap,std_gap,trials"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("30,") && lines[1].ends_with(",3"));
    assert!(lines[2].contains(",vi,"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = setup();
    let args = [
        "scaling", "--mdp", "m.txt", "--grid", "100,400", "--trials", "3", "--seed", "9",
    ];
    let a = vilcb(dir.path(), &args).stdout;
    let b = vilcb(dir.path(), &args).stdout;
    assert_eq!(a, b);
    assert!(String::from_utf8(a)
        .unwrap()
        .lines()
        .all(|l| !l.contains('\r')));
}

#[test]
fn hard_instance_report_and_files() {
    let dir = setup();
    let out = vilcb(
        dir.path(),
        &[
            "hard-instance",
            "--epsilon",
            "0.05",
            "--theta",
            "1",
            "--mdp-out",
            "h.txt",
        ],
    );
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.starts_with("check,passed,deviation\n"));
    assert!(report
        .lines()
        .skip(1)
        .all(|l| l.split(',').nth(1) == Some("true")));
    assert!(fs::read_to_string(dir.path().join("h.theta"))
        .unwrap()
        .starts_with("1 "));
    let demo = vilcb(
        dir.path(),
        &[
            "hard-instance",
            "--demo",
            "--epsilon",
            "0.05",
            "--grid",
            "0",
            "--trials",
            "4",
        ],
    );
    assert_eq!(
        String::from_utf8(demo.stdout).unwrap(),
        "n,error_rate,trials\n0,5.0000000000000000e-1,4\n"
    );
}

#[test]
fn analyze_reports_concentrability() {
    let dir = setup();
    let out = vilcb(dir.path(), &["analyze", "--mdp", "m.txt"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("metric,value,argmax_s,argmax_a\nC_star,"));
    assert!(text.contains("\nC_star_clipped,"));
}

#[test]
fn bad_input_fails_cleanly() {
    let dir = setup();
    let out = Command::new(env!("CARGO_BIN_EXE_vilcb"))
        .current_dir(dir.path())
        .args(["gambler", "--trials", "0"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    let out = Command::new(env!("CARGO_BIN_EXE_vilcb"))
        .current_dir(dir.path())
        .args(["gambler", "--grid", "10", "--out", "no/such/dir/x.csv"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}
