use std::fs;
use std::process::{Command, Output};

fn fracsolve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracsolve"))
        .args(args)
        .env_remove("FRACSOLVE_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn coeffs_classical_limit() {
    let out = stdout(&fracsolve(&["coeffs", "--alpha", "2", "--n", "5"]));
    assert_eq!(out, "k,g_k\n0,1\n1,-2\n2,1\n3,0\n4,0\n5,0\n");
}

#[test]
fn config_file_and_out_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("ranks.csv");
    fs::write(&cfg, "# small sweep\nalpha = 1.5\nn = 128, 256, 512\ntrunc_tol = 1e-8\nleaf_size = 32\n").unwrap();
    let o = fracsolve(&["rank-study", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(!text.contains('\r'));
    let r = rows(&text);
    assert_eq!(r[0], ["N", "measured_qsrank", "bound_fd", "hodlr_max_rank", "storage_bytes"]);
    assert_eq!(r.len(), 4);
    for row in &r[1..] {
        let measured: usize = row[1].parse().unwrap();
        let bound: usize = row[2].parse().unwrap();
        assert!(measured <= bound, "{row:?}");
    }
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "alpha = 1.5\n\nn 64\n").unwrap();
    let o = fracsolve(&["coeffs", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
}

#[test]
fn unknown_preset_lists_alternatives() {
    let o = fracsolve(&["solve2d", "--preset", "bss-3d"]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["dms-1d-a12", "dms-1d-a18", "bss-2d-const", "bss-2d-var"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn solve2d_preset_meets_tolerance() {
    let out = stdout(&fracsolve(&["solve2d", "--preset", "bss-2d-const", "--n", "64"]));
    let r = rows(&out);
    assert_eq!(r[0], ["step", "rank", "ek_iterations", "residual", "time"]);
    assert_eq!(r.len(), 9);
    for row in &r[1..] {
        let res: f64 = row[3].parse().unwrap();
        assert!(res <= 1e-6, "{row:?}");
        // three decimals
        assert_eq!(row[4].split('.').nth(1).map(str::len), Some(3), "{row:?}");
    }
}

#[test]
fn solve1d_is_reproducible_apart_from_timings() {
    let args = ["solve1d", "--preset", "dms-1d-a18", "--n", "255"];
    let strip = |s: String| -> Vec<Vec<String>> {
        rows(&s).into_iter().map(|mut r| {
            r.truncate(r.len() - 2);
            r
        })
        .collect()
    };
    let a = strip(stdout(&fracsolve(&args)));
    let b = strip(stdout(&fracsolve(&args)));
    assert_eq!(a, b);
    assert_eq!(a.len(), 9);
    let err: f64 = a.last().unwrap()[5].parse().unwrap();
    assert!(err < 1e-2, "max error {err}");
}

#[test]
fn thread_variable_is_validated() {
    let o = Command::new(env!("CARGO_BIN_EXE_fracsolve"))
        .args(["coeffs", "--n", "2"])
        .env("FRACSOLVE_THREADS", "zero")
        .output()
        .unwrap();
    assert!(!o.status.success());
    let o = Command::new(env!("CARGO_BIN_EXE_fracsolve"))
        .args(["coeffs", "--n", "2"])
        .env("FRACSOLVE_THREADS", "2")
        .output()
        .unwrap();
    assert!(o.status.success());
}
