use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn expfbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expfbm")).args(args).output().unwrap()
}

fn config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

const SMALL: &str = "n = 3\nhurst_values = 0.7\ncoarse_steps = 2,4,8\nref_steps = 64\npaths = 8\nseed = 2\nsteps = 8\n";

#[test]
fn converge_writes_reproducible_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let mut runs = Vec::new();
    for sub in ["a", "b"] {
        let out = dir.path().join(sub);
        let o = expfbm(&["converge", &cfg, "--output-dir", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        let files: Vec<Vec<u8>> =
            ["errors.csv", "slopes.csv", "manifest.txt"].iter().map(|f| fs::read(out.join(f)).unwrap()).collect();
        runs.push(files);
    }
    assert_eq!(runs[0], runs[1]);
    let errors = String::from_utf8(runs[0][0].clone()).unwrap();
    assert!(errors.starts_with("H,h,rmse,stderr,paths\n"));
    assert_eq!(errors.lines().count(), 4);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let read = |seed: &str, sub: &str| {
        let out = dir.path().join(sub);
        let o = expfbm(&["converge", &cfg, "--seed", seed, "--output-dir", out.to_str().unwrap()]);
        assert!(o.status.success());
        fs::read_to_string(out.join("errors.csv")).unwrap()
    };
    assert_ne!(read("2", "x"), read("3", "y"));
    assert!(fs::read_to_string(dir.path().join("y/manifest.txt")).unwrap().contains("seed = 3"));
}

#[test]
fn other_subcommands_write_their_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let out = dir.path().join("o");
    let out = out.to_str().unwrap();
    for (cmd, files) in [
        ("simulate", &["trajectory.csv"][..]),
        ("stability", &["stability.csv"][..]),
        ("covariance", &["covariance.csv", "covariance_diagnostics.txt"][..]),
    ] {
        let o = expfbm(&[cmd, &cfg, "--output-dir", out]);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        for f in files {
            assert!(Path::new(out).join(f).is_file(), "{cmd} did not write {f}");
        }
    }
    let stab = fs::read_to_string(Path::new(out).join("stability.csv")).unwrap();
    assert!(stab.starts_with("lhs,rhs,condition_holds,h_star,residual\n"));
    let traj = fs::read_to_string(Path::new(out).join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,x1,x2,x3\n"));
    assert_eq!(traj.lines().count(), 10);
}

#[test]
fn bad_config_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "n = 3\nbogus = 1\n");
    let o = expfbm(&["converge", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let missing = dir.path().join("nope.cfg");
    assert_eq!(expfbm(&["simulate", missing.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn runtime_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), SMALL);
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = expfbm(&["converge", &cfg, "--output-dir", blocker.join("sub").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}
