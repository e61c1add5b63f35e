use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
c = 8.0
t_final = 0.2
nx = 32
np1 = 20
np2 = 20
x_max = 8.0
p_margin = 1.0
dt_cap = 0.05
profile = "neutral-two-species"
r0 = 1.0
q0 = 2.0

[species.1]
label = "electron"
charge = -1.0
mass = 1.0
amplitude = 0.3183098861837907
density_pert = 0.2
drift_pert = 0.2

[species.2]
label = "ion"
charge = 1.0
mass = 2.0
amplitude = 0.3183098861837907
density_pert = 0.2
drift_pert = -0.2
"#;

fn vmlimit(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vmlimit"));
    cmd.args(args).env_remove("VMLIMIT_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn vmlimit")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn validate_accepts_a_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", SMALL);
    let out = vmlimit(&["validate", "--config", &cfg], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("grid 32x20x20 cells"));
}

#[test]
fn validation_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let tiny = write_config(dir.path(), "tiny.toml", &SMALL.replace("nx = 32", "nx = 4"));
    let out = vmlimit(&["validate", "--config", &tiny], &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nx"));

    let strong = write_config(dir.path(), "strong.toml", &SMALL.replacen("density_pert = 0.2", "density_pert = 5.0", 1));
    let out = vmlimit(&["run", "--config", &strong], &[]);
    assert_eq!(out.status.code(), Some(2));

    let out = vmlimit(&["validate", "--config", "/nonexistent/run.toml"], &[]);
    assert_eq!(out.status.code(), Some(2));

    let out = vmlimit(&["diagnose", "--history", "/nonexistent", "--apex", "0.1,0"], &[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_thread_cap_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", SMALL);
    let out = vmlimit(&["validate", "--config", &cfg], &[("VMLIMIT_THREADS", "zero")]);
    assert_eq!(out.status.code(), Some(2));
    let out = vmlimit(&["validate", "--config", &cfg], &[("VMLIMIT_THREADS", "2")]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn run_writes_outputs_and_diagnose_reads_them() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", SMALL);
    let run_dir = dir.path().join("out");
    let out = vmlimit(&["run", "--config", &cfg, "--out", run_dir.to_str().unwrap()], &[("VMLIMIT_THREADS", "2")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("reached t = 0.2"));
    for file in ["series.csv", "history.json", "config.toml"] {
        assert!(run_dir.join(file).is_file(), "missing {file}");
    }
    assert!(fs::read_dir(run_dir.join("snapshots")).unwrap().count() >= 1);

    let out = vmlimit(&["diagnose", "--history", run_dir.to_str().unwrap(), "--apex", "0.1,0", "--apex", "0.15,-0.5"], &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert_eq!(text.matches("apex (").count(), 2);
    assert!(text.contains("far field"));
}

#[test]
fn support_overflow_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("p_margin = 1.0", "p1_max = 2.0\np2_max = 2.0");
    let cfg = write_config(dir.path(), "run.toml", &text);
    let out = vmlimit(&["run", "--config", &cfg], &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("momentum support"));
}

#[test]
fn sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "run.toml", SMALL);
    let sweep_dir = dir.path().join("sweep");
    let out = vmlimit(
        &["sweep", "--config", &cfg, "--c-list", "8,4", "--jobs", "2", "--out", sweep_dir.to_str().unwrap()],
        &[],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("gap ~ c^"));
    assert!(sweep_dir.join("sweep.csv").is_file());

    let out = vmlimit(&["sweep", "--config", &cfg, "--c-list", "8,-1"], &[]);
    assert_eq!(out.status.code(), Some(2));
}
