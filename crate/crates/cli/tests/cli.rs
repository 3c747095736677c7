use std::path::PathBuf;
use std::process::{Command, Output};

use persuade_cli::schema::{parse_strategy, strategy_to_value, ScenarioFile};
use serde_json::Value;

fn scenario(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", name]
        .iter()
        .collect();
    p.to_string_lossy().into_owned()
}

fn persuade(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_persuade"))
        .args(args)
        .env_remove("PERSUADE_LEAF_CAP")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn lines(out: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&out.stdout)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn update_trajectories() {
    let base = [
        "update",
        "--scenario",
        &scenario("example1.json"),
        "--experiment",
        &scenario("example1_experiment.json"),
    ];
    let out = persuade(&[&base[..], &["--signals", "x1,x1"]].concat());
    let rows = lines(&out);
    assert_eq!(rows.len(), 3);
    let biased = rows[2]["biased"][1].as_f64().unwrap();
    assert!((biased - 0.7292).abs() < 5e-5);
    assert!((rows[2]["bayesian"][1].as_f64().unwrap() - 0.9).abs() < 1e-12);

    let out = persuade(&base);
    let rows = lines(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["biased"][1].as_f64().unwrap(), 0.5);

    let out = persuade(&[&base[..], &["--signals", "x1,x1", "--procedure", "pbp-o"]].concat());
    let biased = lines(&out)[2]["biased"][1].as_f64().unwrap();
    assert!((biased - 2.0 / 3.0).abs() < 5e-5);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let reveal = dir.path().join("reveal.json");
    std::fs::write(
        &reveal,
        r#"{"signals": ["w0", "w1"], "kernel": [[1, 0], [0, 1]]}"#,
    )
    .unwrap();
    let out = persuade(&[
        "update",
        "--scenario",
        &scenario("example1.json"),
        "--experiment",
        reveal.to_str().unwrap(),
        "--signals",
        "w0,w1",
    ]);
    assert_eq!(out.status.code(), Some(3));

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        std::fs::read_to_string(scenario("example1.json"))
            .unwrap()
            .replace("0.5,", "0.7,"),
    )
    .unwrap();
    let out = persuade(&[
        "solve",
        "--scenario",
        bad.to_str().unwrap(),
        "--program",
        "V",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("prior"));

    let out = Command::new(env!("CARGO_BIN_EXE_persuade"))
        .args([
            "eval",
            "--scenario",
            &scenario("example1.json"),
            "--strategy",
            &scenario("example1_strategy.json"),
        ])
        .env("PERSUADE_LEAF_CAP", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));

    let out = persuade(&[
        "solve",
        "--scenario",
        &scenario("cs.json"),
        "--program",
        "transparent",
    ]);
    assert_eq!(out.status.code(), Some(5));
    let out = persuade(&[
        "construct",
        "--scenario",
        &scenario("cs.json"),
        "--kind",
        "booster",
    ]);
    assert_eq!(out.status.code(), Some(5));
    let out = persuade(&[
        "solve",
        "--scenario",
        &scenario("cs.json"),
        "--program",
        "nonsense",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn eval_reports() {
    let ex2 = [
        "eval",
        "--scenario",
        &scenario("example2.json"),
        "--strategy",
        &scenario("example2_strategy.json"),
    ];
    let report = stdout_json(&persuade(&ex2));
    assert!((report["payoff"].as_f64().unwrap() - 0.5625).abs() < 1e-12);
    assert_eq!(report["outcomes"].as_array().unwrap().len(), 2);
    let report = stdout_json(&persuade(&[&ex2[..], &["--alpha", "0"]].concat()));
    assert!((report["payoff"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    let stop = stdout_json(&persuade(&[
        "eval",
        "--scenario",
        &scenario("prosecutor.json"),
        "--strategy",
        &scenario("stop.json"),
    ]));
    assert_eq!(stop["payoff"].as_f64().unwrap(), 0.0);
    assert_eq!(stop["receiver_distribution"].as_array().unwrap().len(), 1);
}

#[test]
fn solve_programs() {
    let value = |program: &str| {
        stdout_json(&persuade(&[
            "solve",
            "--scenario",
            &scenario("prosecutor.json"),
            "--program",
            program,
        ]))["value"]
            .as_f64()
            .unwrap()
    };
    assert!((value("V") - 0.6).abs() < 1e-9);
    assert!((value("V-alpha") - 3.0 / 7.0).abs() < 1e-9);
    assert!((value("V-alpha-biased") - 0.42857).abs() < 5e-6);
    assert!((value("transparent") - 3.0 / 7.0).abs() < 1e-9);
    assert_eq!(value("sup-F"), 1.0);
}

#[test]
fn constructed_strategies_evaluate() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("geo.json");
    let out = persuade(&[
        "construct",
        "--scenario",
        &scenario("prosecutor_biased_pbpo.json"),
        "--kind",
        "pbpo-geometric",
        "--target",
        "0.5,0.5",
        "--gamma",
        "1.75",
        "--periods",
        "20",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report = stdout_json(&persuade(&[
        "eval",
        "--scenario",
        &scenario("prosecutor_biased_pbpo.json"),
        "--strategy",
        path.to_str().unwrap(),
    ]));
    let want = 1.0 - (4.0 / 7.0) * (11.0f64 / 14.0).powi(19);
    assert!((report["payoff"].as_f64().unwrap() - want).abs() < 1e-9);

    let path = dir.path().join("boost.json");
    let out = persuade(&[
        "construct",
        "--scenario",
        &scenario("prosecutor.json"),
        "--kind",
        "booster",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report = stdout_json(&persuade(&[
        "eval",
        "--scenario",
        &scenario("prosecutor.json"),
        "--strategy",
        path.to_str().unwrap(),
    ]));
    assert!(report["payoff"].as_f64().unwrap() > 3.0 / 7.0 + 1e-4);
}

#[test]
fn repro_suites_pass_and_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["example1", "example2", "prop2", "prop4", "prop5", "prop6"] {
        let a = dir.path().join(format!("{name}-a.csv"));
        let b = dir.path().join(format!("{name}-b.csv"));
        let first = persuade(&["repro", name, "--out", a.to_str().unwrap()]);
        let second = persuade(&["repro", name, "--out", b.to_str().unwrap()]);
        assert!(
            first.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&first.stdout)
        );
        assert_eq!(first.stdout, second.stdout);
        let csv_a = std::fs::read(&a).unwrap();
        assert_eq!(csv_a, std::fs::read(&b).unwrap());
        assert!(csv_a.starts_with(b"series,x,y\n"));
    }
}

#[test]
fn bundled_files_round_trip() {
    let dir: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios"].iter().collect();
    let mut scenarios = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        if let Ok(file) = ScenarioFile::parse(&text) {
            scenarios += 1;
            assert_eq!(ScenarioFile::parse(&file.to_json()).unwrap(), file);
            file.validate().unwrap();
        } else if text.contains("\"stop\"") || text.contains("\"children\"") {
            let node = parse_strategy(&text).unwrap();
            assert_eq!(
                parse_strategy(&strategy_to_value(&node).to_string()).unwrap(),
                node
            );
        }
    }
    assert!(scenarios >= 5);
}
