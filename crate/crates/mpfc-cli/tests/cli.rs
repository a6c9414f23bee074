//! End-to-end tests of the `mpfc` binary: exit codes, error wording, file
//! outputs, reproducibility, and thread-count independence.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mpfc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mpfc"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.cfg");
    std::fs::write(&path, body).unwrap();
    path
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

const SMALL: &str = "m = 16\nn = 16\nh = 2.0\ns = 0.1\nT = 1.0\nalpha = 1.0\nbeta = 1.0\n\
                     snapshot_interval = 5\n";

/// Column index in the energy trace CSV.
fn column(header: &str, name: &str) -> usize {
    header.split(',').position(|c| c == name).unwrap()
}

fn read_trace(dir: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(dir.join("energy.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn run_with_constant_ic_keeps_energy_and_residuals_flat() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}ic_offset = 0.1\n"));
    let out_dir = tmp.path().join("out");
    let out = mpfc()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));

    assert!(out_dir.join("config.resolved").exists());
    assert!(out_dir.join("phi_00000000.bin").exists());
    assert!(out_dir.join("phi_00000010.bin").exists());

    let (header, rows) = read_trace(&out_dir);
    assert_eq!(rows.len(), 11, "one initial row plus ten steps");
    let modified = column(&header, "modified");
    let residual = column(&header, "dissipation_residual");
    for row in &rows {
        assert!((row[modified] - rows[0][modified]).abs() < 1e-13);
        assert!(row[residual].abs() < 1e-13);
    }
}

#[test]
fn run_with_smooth_ic_dissipates_energy_monotonically() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}ic_preset = benchmark\n"));
    let out_dir = tmp.path().join("out");
    let out = mpfc()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));

    let (header, rows) = read_trace(&out_dir);
    let modified = column(&header, "modified");
    let mass = column(&header, "mass");
    for pair in rows.windows(2) {
        let slack = 1e-8 * (1.0 + pair[1][modified].abs());
        assert!(pair[1][modified] <= pair[0][modified] + slack);
        assert!((pair[1][mass] - rows[0][mass]).abs() <= 1e-11 * rows[0][mass].abs());
    }
    assert!(
        rows.last().unwrap()[modified] < rows[0][modified],
        "ten steps of a smooth profile must dissipate something"
    );
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!("{SMALL}ic_offset = 0.07\nic_mode = -0.02,1,1,0.5,-0.25\nic_mode = 0.01,2,1,0,0\nseed = 9\n"),
    );
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out_dir = tmp.path().join(name);
        let out = mpfc()
            .args(["run", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", stderr_of(&out));
        outputs.push((
            std::fs::read(out_dir.join("energy.csv")).unwrap(),
            std::fs::read(out_dir.join("phi_00000010.bin")).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "energy traces differ");
    assert_eq!(outputs[0].1, outputs[1].1, "snapshots differ");
}

#[test]
fn negative_beta_is_rejected_with_the_rule() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &SMALL.replace("beta = 1.0", "beta = -1"));
    let out = mpfc().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("beta >= 0"), "{}", stderr_of(&out));
}

#[test]
fn unknown_config_key_is_rejected_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}gamma = 3\n"));
    let out = mpfc().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(
        stderr_of(&out).contains("unknown key 'gamma'"),
        "{}",
        stderr_of(&out)
    );
}

#[test]
fn unresolvable_mode_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}ic_mode = 0.1,16,0,0,0\n"));
    let out = mpfc().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("kx"), "{}", stderr_of(&out));
}

#[test]
fn unwritable_output_directory_fails_without_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), SMALL);
    let blocker = tmp.path().join("blocker");
    std::fs::write(&blocker, b"file, not dir").unwrap();
    let out_dir = blocker.join("out");
    let out = mpfc()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(
        stderr_of(&out).contains("creating output directory"),
        "{}",
        stderr_of(&out)
    );
    assert!(!out_dir.exists());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}ic_preset = benchmark\n"));
    let first = tmp.path().join("first");
    let out = mpfc()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&first)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));

    // Re-run from the resolved copy; it pins out_dir, so redirect it.
    let second = tmp.path().join("second");
    let out = mpfc()
        .args(["run", "--config"])
        .arg(first.join("config.resolved"))
        .arg("--out")
        .arg(&second)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    assert_eq!(
        std::fs::read(first.join("energy.csv")).unwrap(),
        std::fs::read(second.join("energy.csv")).unwrap()
    );
}

#[test]
fn converge_is_thread_count_independent_to_the_byte() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "m = 8\nn = 8\nh = 4.0\ns = 0.5\nT = 1.0\nalpha = 1.0\nbeta = 1.0\nic_preset = benchmark\n",
    );
    let mut csvs = Vec::new();
    for (name, threads, env) in [("t1", Some("1"), None), ("t2", None, Some("2"))] {
        let out_dir = tmp.path().join(name);
        let mut cmd = mpfc();
        cmd.args(["converge", "--levels", "2", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir);
        if let Some(t) = threads {
            cmd.args(["--threads", t]);
        }
        if let Some(t) = env {
            cmd.env("MPFC_THREADS", t);
        }
        let out = cmd.output().unwrap();
        // Orders on an 8x8 base may sit outside the strict band; only the
        // computation itself must succeed identically.
        assert!(
            out_dir.join("convergence.csv").exists(),
            "{}",
            stderr_of(&out)
        );
        csvs.push(std::fs::read(out_dir.join("convergence.csv")).unwrap());
    }
    assert_eq!(csvs[0], csvs[1], "thread count changed the results");
}

#[test]
fn converge_default_ladder_smoke() {
    // Two levels of the built-in benchmark: fast, and the CSV shape is
    // stable. (The full four-level band check lives in the library's
    // acceptance suite.)
    let tmp = tempfile::tempdir().unwrap();
    let out = mpfc()
        .args(["converge", "--levels", "2", "--out"])
        .arg(tmp.path())
        .output()
        .unwrap();
    let text = stdout_of(&out);
    assert!(
        text.starts_with("level,m,s,error_h3_final,error_h3_max_over_time,order_vs_next"),
        "{text}"
    );
    assert!(tmp.path().join("convergence.csv").exists());
}

#[test]
fn probe_reports_monotone_decay_for_large_steps() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}ic_preset = benchmark\n"));
    let out = mpfc()
        .args(["probe", "--s-list", "0.5,5", "--steps", "5", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr_of(&out));
    let text = stdout_of(&out);
    assert!(text.contains("monotone = true"), "{text}");
    assert!(text.contains("decayed monotonically"), "{text}");
}

#[test]
fn probe_rejects_bad_step_lists() {
    let out = mpfc().args(["probe", "--s-list", "0.1,-2"]).output().unwrap();
    assert!(!out.status.success());
    assert!(stderr_of(&out).contains("positive"), "{}", stderr_of(&out));
}

#[test]
fn check_passes_on_fixed_seeds() {
    for seed in ["0", "7"] {
        let out = mpfc().args(["check", "--seed", seed]).output().unwrap();
        assert!(out.status.success(), "{}", stderr_of(&out));
        let text = stdout_of(&out);
        assert!(text.contains("all oracle checks passed"), "{text}");
        assert!(text.contains("summation_by_parts_x"), "{text}");
    }
}
