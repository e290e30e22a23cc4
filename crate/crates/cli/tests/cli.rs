use std::process::Command;

fn paa() -> Command {
    Command::new(env!("CARGO_BIN_EXE_paa"))
}

#[test]
fn list_problems_names_all_four() {
    let out = paa().arg("list-problems").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["kelley", "trig", "bratu", "convdiff"] {
        assert!(text.contains(name), "missing {name} in:\n{text}");
    }
}

#[test]
fn run_writes_outputs_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        format!(
            "problem = trig\nparam.n = 5\nruns = 2\nseed = 4\nout = {}\n\
             lower = 0.73\nupper = 0.84\nsolver.diag = precond=diag m=2\n",
            dir.path().join("res").display()
        ),
    )
    .unwrap();
    let out = paa().args(["run", "--config"]).arg(&cfg).output().unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for f in ["history.csv", "summary.csv", "summary.txt"] {
        assert!(dir.path().join("res").join(f).is_file(), "missing {f}");
    }
    let summary = String::from_utf8(out.stdout).unwrap();
    assert!(summary.contains("diag"));
}

#[test]
fn flag_overrides_replace_config_solvers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(
        &cfg,
        format!(
            "problem = trig\nparam.n = 5\nseed = 4\nout = {}\n\
             lower = 0.73\nupper = 0.84\nsolver.a = precond=diag\nsolver.b = precond=full\n",
            dir.path().join("res").display()
        ),
    )
    .unwrap();
    let out = paa()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--precond", "full", "--m", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let summary = std::fs::read_to_string(dir.path().join("res/summary.csv")).unwrap();
    assert!(summary.contains("default"));
    assert!(!summary.contains("\na,"));
}

#[test]
fn exit_codes_distinguish_spec_and_io_errors() {
    let out = paa()
        .args(["run", "--problem", "nope", "--precond", "diag", "--x0", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = paa()
        .args(["run", "--config", "/definitely/not/here.cfg"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
