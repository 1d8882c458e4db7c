use std::path::Path;
use std::process::{Command, Output};

fn jamnull(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jamnull"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn bounds_prints_default_link() {
    let dir = tempfile::tempdir().unwrap();
    let o = jamnull(dir.path(), &["bounds"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("77.7977"), "{text}");
    assert!(text.contains("C_ub"), "{text}");
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[system]\nantennas = 8\n").unwrap();
    let o = jamnull(dir.path(), &["bounds", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("system"));

    let o = jamnull(dir.path(), &["simulate", "--frames", "0"]);
    assert_eq!(o.status.code(), Some(2));

    let o = jamnull(dir.path(), &["simulate", "--policy", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_not_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = jamnull(dir.path(), &["bounds", "--config", "/nonexistent/x.toml"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_writes_one_row_per_frame_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let o = jamnull(
            d,
            &[
                "simulate", "--policy", "fixed:5", "--frames", "7", "--seed", "3",
            ],
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let frames = std::fs::read_to_string(a.join("frames.csv")).unwrap();
    assert_eq!(frames.lines().count(), 8);
    assert!(frames.starts_with("policy,frame,action"));
    for name in ["frames.csv", "summary.csv"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap()
        );
    }
}

#[test]
fn evaluate_fixed_reports_every_action_and_the_average() {
    let dir = tempfile::tempdir().unwrap();
    let o = jamnull(
        dir.path(),
        &["evaluate", "--policy", "fixed", "--frames", "2"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 16 + 1);
    assert!(summary.lines().last().unwrap().starts_with("fixed,"));
}

#[test]
fn train_then_evaluate_learned() {
    let dir = tempfile::tempdir().unwrap();
    let o = jamnull(dir.path(), &["train", "--iterations", "0"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let ckpts: Vec<_> = std::fs::read_dir(dir.path().join("checkpoints"))
        .unwrap()
        .collect();
    assert_eq!(ckpts.len(), 1);
    assert!(dir.path().join("agent.bin").exists());

    let o = jamnull(dir.path(), &["train", "--iterations", "40"]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read_to_string(dir.path().join("training.csv"))
            .unwrap()
            .lines()
            .count(),
        41
    );
    let o = jamnull(
        dir.path(),
        &["evaluate", "--policy", "learned", "--frames", "3"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("learned"));
}

#[test]
fn learned_policy_rejects_a_network_for_another_config() {
    let dir = tempfile::tempdir().unwrap();
    assert!(jamnull(dir.path(), &["train", "--iterations", "0"])
        .status
        .success());
    let cfg = dir.path().join("h4.toml");
    std::fs::write(&cfg, "[agent]\nhistory = 4\n").unwrap();
    let o = jamnull(
        dir.path(),
        &[
            "evaluate",
            "--policy",
            "learned",
            "--frames",
            "1",
            "--config",
            cfg.to_str().unwrap(),
        ],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn switch_requires_the_switch_inside_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let o = jamnull(dir.path(), &["switch", "--iterations", "10"]);
    assert_eq!(o.status.code(), Some(2));
}
