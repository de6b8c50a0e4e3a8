mod common;

use std::fs;

use common::{cumppi, desk, ok, rerun_differences, COMMANDS};

#[test]
fn every_command_is_deterministic() {
    let dir = desk();
    for cmd in COMMANDS {
        let diff = rerun_differences(dir.path(), cmd).unwrap();
        assert!(diff.is_empty(), "{cmd:?}: {diff:?} differ between reruns");
    }
}

#[test]
fn command_outputs_exist() {
    let dir = desk();
    let d = dir.path();
    let expect: [(&str, &[&str]); 5] = [
        (
            "sample",
            &[
                "trajectories.csv",
                "fan.ppm",
                "fan.svg",
                "resolved_config.json",
            ],
        ),
        (
            "analyze",
            &[
                "uniformity.csv",
                "transition_uniformity.csv",
                "coverage.csv",
                "analysis.json",
            ],
        ),
        (
            "simulate",
            &["episode.csv", "episode.json", "episode.ppm", "episode.svg"],
        ),
        ("benchmark", &["results.csv", "summary.csv"]),
        ("build-levelsets", &["levelsets.culs", "levelsets.csv"]),
    ];
    for (cmd, files) in expect {
        ok(d, &["--config", "desk.toml", "--out-dir", cmd, cmd]);
        for f in files {
            assert!(d.join(cmd).join(f).is_file(), "{cmd} did not write {f}");
        }
    }
    let traj = fs::read_to_string(d.join("sample/trajectories.csv")).unwrap();
    assert!(
        traj.starts_with("traj_id,t,x,y,psi,delta\n"),
        "{}",
        &traj[..60.min(traj.len())]
    );
    let uni = fs::read_to_string(d.join("analyze/uniformity.csv")).unwrap();
    assert!(uni.starts_with("level_t,cells,ratio\n"));
}

#[test]
fn open_world_cu_mppi_reaches_the_goal() {
    let dir = desk();
    let d = dir.path();
    ok(
        d,
        &[
            "--config",
            "desk.toml",
            "--method",
            "cu-mppi",
            "--out-dir",
            "sim",
            "simulate",
        ],
    );
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(d.join("sim/episode.json")).unwrap()).unwrap();
    assert_eq!(summary["outcome"], "success", "{summary}");
    assert_eq!(summary["method"], "cu-mppi");
}

#[test]
fn zero_trials_give_header_only_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("zero.toml"), "[experiment.sweep]\ntrials = 0\n").unwrap();
    ok(
        d,
        &["--config", "zero.toml", "--out-dir", "out", "benchmark"],
    );
    let results = fs::read_to_string(d.join("out/results.csv")).unwrap();
    assert_eq!(
        results,
        "method,sigma,n_traj,env_id,reveal_dist,outcome,path_length\n"
    );
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(cumppi(d, &["--help"]).status.code(), Some(0));
    assert_eq!(cumppi(d, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(
        cumppi(d, &["--method", "nope", "simulate"]).status.code(),
        Some(1)
    );
    assert_eq!(
        cumppi(d, &["--config", "missing.toml", "train"])
            .status
            .code(),
        Some(2)
    );
    fs::write(d.join("bad.toml"), "[train]\nunknown_key = 1\n").unwrap();
    assert_eq!(
        cumppi(d, &["--config", "bad.toml", "train"]).status.code(),
        Some(2)
    );
    // cu-mppi needs a model
    let out = cumppi(d, &["--method", "cu-mppi", "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: "));
    fs::write(d.join("broken.cunn"), b"not a model").unwrap();
    let out = cumppi(
        d,
        &["--model", "broken.cunn", "--method", "cu-mppi", "simulate"],
    );
    assert_eq!(out.status.code(), Some(3));
}
