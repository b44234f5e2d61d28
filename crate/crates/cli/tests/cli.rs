use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sqg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqg"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn sqg")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn data_rows(text: &str) -> usize {
    text.lines().skip(1).filter(|l| !l.starts_with('#')).count()
}

#[test]
fn zero_horizon_run_has_header_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = sqg(dir.path(), &["run", "--N", "8", "--t_max", "0", "--output_path", "a.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("a.csv")).unwrap();
    assert!(text.starts_with(
        "t,l2,hm12,combined,tail,theta_e,J,sigma,Sigma,W_phi,W_k2,low_mass,h_half,sob_half,sob_s,case\n"
    ));
    assert_eq!(data_rows(&text), 1);
    assert!(text.contains("# status=ok\n"));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("base.cfg"), "# base\nN=8\ntau=0.02\nt_max=0.25\n").unwrap();
    fs::write(dir.path().join("direct.cfg"), "N=8\ntau=0.03\nt_max=0.25\n").unwrap();
    let a = sqg(
        dir.path(),
        &["run", "--config", "base.cfg", "--tau", "0.03", "--output_path", "a.csv"],
    );
    let b = sqg(dir.path(), &["run", "--config", "direct.cfg", "--output_path", "b.csv"]);
    let c = sqg(dir.path(), &["run", "--config", "base.cfg", "--output_path", "c.csv"]);
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(code(&b), 0);
    assert_eq!(code(&c), 0);
    let read = |f: &str| fs::read(dir.path().join(f)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
}

#[test]
fn usage_errors_exit_two_and_name_the_source() {
    let dir = tempfile::tempdir().unwrap();
    let out = sqg(dir.path(), &["run", "--tau", "-1"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--tau: constraint tau>0 violated"), "{}", stderr(&out));

    fs::write(dir.path().join("bad.cfg"), "N=8\n\ngamma=3\n").unwrap();
    let out = sqg(dir.path(), &["run", "--config", "bad.cfg"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 3: unknown key `gamma`"), "{}", stderr(&out));

    let out = sqg(dir.path(), &["scan", "--scan_box", "1"]);
    assert_eq!(code(&out), 2);

    let out = sqg(dir.path(), &["frobnicate"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn missing_config_or_output_directory_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = sqg(dir.path(), &["run", "--config", "nope.cfg"]);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let out = sqg(
        dir.path(),
        &["run", "--N", "8", "--t_max", "0", "--output_path", "no/such/dir.csv"],
    );
    assert_eq!(code(&out), 1, "{}", stderr(&out));
}

#[test]
fn drift_breach_and_blow_up_have_distinct_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = sqg(
        dir.path(),
        &[
            "run", "--N", "8", "--tau", "0.1", "--t_max", "1", "--drift_budget", "1e-300",
            "--halve_on_breach", "false", "--output_path", "d.csv",
        ],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert!(text.contains("# status=drift_breach"));

    let out = sqg(
        dir.path(),
        &[
            "run", "--N", "8", "--tau", "0.1", "--dt", "1e80", "--t_max", "1e81",
            "--output_path", "n.csv",
        ],
    );
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("n.csv")).unwrap();
    assert!(text.contains("# status=non_finite"));
}

#[test]
fn sweep_writes_three_runs_and_a_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = sqg(
        dir.path(),
        &[
            "sweep", "--N", "8", "--t_max", "0.5", "--sweep_tau", "0.1,0.05,0.02",
            "--output_path", "sw.csv",
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for tau in ["0.1", "0.05", "0.02"] {
        let member = dir.path().join(format!("sw_tau{tau}.csv"));
        assert!(member.exists(), "{}", member.display());
    }
    let summary = fs::read_to_string(dir.path().join("sw_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("tau,max_J_over_tau2,t_of_max,final_case,status\n"));
}

#[test]
fn scan_box_four() {
    let dir = tempfile::tempdir().unwrap();
    let out = sqg(dir.path(), &["scan", "--scan_box", "4", "--output_path", "q.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = fs::read_to_string(dir.path().join("q.csv")).unwrap();
    assert!(text.starts_with("k1,k2,a,b,c,lambda_min,lambda_min_times_k3\n"));
    assert_eq!(data_rows(&text), 2 * 4 * 4 + 4);
    let c_star: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("# c_star="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(c_star > 0.0);
    // Apart from the two sites coupling the unit mode (0,1), every form is
    // positive semidefinite.
    for line in text.lines().skip(1).filter(|l| !l.starts_with('#')) {
        let f: Vec<&str> = line.split(',').collect();
        let (k1, k2): (i64, i64) = (f[0].parse().unwrap(), f[1].parse().unwrap());
        let lambda: f64 = f[5].parse().unwrap();
        if k1.abs() == 1 && k2 == 1 {
            assert!(lambda < -0.1);
        } else {
            assert!(lambda >= -1e-14, "({k1},{k2}) {lambda}");
        }
    }
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = sqg(dir.path(), &["selftest", "--seed", "3"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("0 failed"));
}
