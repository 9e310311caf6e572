use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use hqi_core::env::Environment;
use hqi_core::eval::EvalReport;
use hqi_core::hierarchy::{dag1, TaskDag};
use hqi_core::io::{load_policy, read_dataset, RunManifest};
use hqi_core::taxi::Taxi;

fn hqi(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hqi")).current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = hqi(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn shipped(name: &str) -> String {
    configs().join(name).to_str().unwrap().to_string()
}

fn mean_of(stdout: &str) -> f64 {
    let rest = stdout.split("mean return ").nth(1).expect("mean printed");
    rest.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn validate_dag_on_shipped_dag1_prints_training_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(dir.path(), &["validate-dag", "--dag", &shipped("dag1.toml")]);
    assert!(out.contains("training order: navi_get, navi_put, get, put, root"), "{out}");
    for name in ["dag2.toml", "dag3.toml", "flat.toml"] {
        ok(dir.path(), &["validate-dag", "--dag", &shipped(name)]);
    }
    assert!(dir.path().join("validate-dag.manifest.json").exists());
}

#[test]
fn invalid_dag_lists_violations_and_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let text = std::fs::read_to_string(configs().join("dag1.toml")).unwrap().replace("[\"get\", \"put\"]", "[\"get\", \"root\"]");
    std::fs::write(dir.path().join("bad.toml"), text).unwrap();
    let out = hqi(dir.path(), &["validate-dag", "--dag", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("violation"), "{stdout}");
}

#[test]
fn exit_codes_separate_contract_and_io_failures() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(hqi(dir.path(), &["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(hqi(dir.path(), &["collect"]).status.code(), Some(1), "missing --out");
    assert_eq!(hqi(dir.path(), &["train", "--dataset", "missing.txt", "--out", "p.json"]).status.code(), Some(2));
    assert_eq!(hqi(dir.path(), &["collect", "-n", "10", "--out", "no/such/dir/d.txt"]).status.code(), Some(2));
    std::fs::write(dir.path().join("c.toml"), "samples = 10\nbogus = 1\n").unwrap();
    let out = hqi(dir.path(), &["collect", "--config", "c.toml", "--out", "d.txt"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("c.toml:2"));
    assert_eq!(hqi(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.toml"), "samples = 300\nseed = 4\nout = \"from-file.txt\"\n").unwrap();
    ok(dir.path(), &["collect", "--config", "c.toml", "--seed", "9", "--out", "d.txt"]);
    assert!(!dir.path().join("from-file.txt").exists());
    assert_eq!(read_dataset(&dir.path().join("d.txt")).unwrap().len(), 300);
    let m = RunManifest::load(&dir.path().join("d.txt.manifest.json")).unwrap();
    assert_eq!(m.seed, Some(9));
    assert!(m.config.contains("samples = 300") && m.config.contains("seed = 9"), "{}", m.config);

    // the recorded config reproduces the run
    std::fs::write(dir.path().join("again.toml"), m.config.replace("d.txt", "again.txt")).unwrap();
    ok(dir.path(), &["collect", "--config", "again.toml", "--manifest", "again.json"]);
    assert_eq!(std::fs::read(dir.path().join("d.txt")).unwrap(), std::fs::read(dir.path().join("again.txt")).unwrap());
}

/// Every artifact is read by every command that consumes its type.
#[test]
fn compatibility_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let env = shipped("taxi.toml");
    ok(d, &["collect", "--env", &env, "-n", "20000", "--seed", "3", "--out", "data.txt"]);
    let data = read_dataset(&d.join("data.txt")).unwrap();
    assert_eq!(data.len(), 20000);

    std::fs::write(d.join("small-forest.toml"), "[fitted]\nmax_iter = 3\n\n[regressor]\nkind = \"tree-ensemble\"\nn_trees = 4\n").unwrap();
    let dag3 = shipped("dag3.toml");
    // (policy, train flags, evaluate flags)
    let trained: [(&str, Vec<&str>, Vec<&str>); 4] = [
        ("sa.json", vec!["--dag", "dag1"], vec!["--dag", "dag1"]),
        ("full.json", vec!["--abstraction", "false"], vec!["--abstraction", "false"]),
        ("dag3.json", vec!["--dag", &dag3], vec!["--dag", &dag3]),
        ("fitted.json", vec!["--kind", "fitted", "--learner", "small-forest.toml"], vec![]),
    ];
    ok(d, &["oracle", "--env", &env, "--episodes", "50", "--out", "oracle.json"]);
    let mut means = Vec::new();
    for (out, train, eval) in &trained {
        let mut args = vec!["train", "--dataset", "data.txt", "--env", &env, "--out", out];
        args.extend(train);
        ok(d, &args);
        let mut args = vec!["evaluate", "--policy", out, "--episodes", "20", "--out", "summary.json"];
        args.extend(eval);
        means.push(mean_of(&ok(d, &args)));
        RunManifest::load(&d.join(format!("{out}.manifest.json"))).unwrap();
    }
    means.push(mean_of(&ok(d, &["evaluate", "--policy", "oracle.json", "--dag", "flat", "--episodes", "20"])));
    assert!(means.iter().all(|m| m.is_finite()), "{means:?}");

    // the library reads what the binary wrote
    let taxi = Taxi::standard();
    let dag = TaskDag::build(dag1(), taxi.states(), taxi.actions(), &taxi.predicates()).unwrap();
    load_policy(&d.join("sa.json"), &dag).unwrap();
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["episodes"], 20);

    // a policy does not load against another hierarchy
    let out = hqi(d, &["evaluate", "--policy", "sa.json", "--dag", "dag2"]);
    assert_eq!(out.status.code(), Some(1));
    // a dataset from another map does not train here
    std::fs::write(d.join("wide.toml"), "width = 6\n").unwrap();
    ok(d, &["collect", "--env", "wide.toml", "-n", "100", "--out", "wide.txt"]);
    assert_eq!(hqi(d, &["train", "--dataset", "wide.txt", "--out", "w.json"]).status.code(), Some(1));

    // experiment results load as reports
    std::fs::write(
        d.join("exp.toml"),
        "checkpoints = [2000, 4000]\nrepeats = 2\neval_episodes = 10\n[[arm]]\nname = \"a\"\ndag = \"dag1\"\n",
    )
    .unwrap();
    ok(d, &["experiment", "--spec", "exp.toml", "--out-dir", "res", "--quiet", "true"]);
    let report = EvalReport::from_cells_csv(&std::fs::read_to_string(d.join("res/cells.csv")).unwrap()).unwrap();
    assert_eq!(report.cells.len(), 2 * (1 + 2));
    RunManifest::load(&d.join("res/manifest.json")).unwrap();
}

#[test]
fn tabular_runs_are_bit_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for tag in ["a", "b"] {
        ok(d, &["collect", "-n", "5000", "--seed", "11", "--out", &format!("{tag}.txt")]);
        ok(d, &["train", "--dataset", &format!("{tag}.txt"), "--out", &format!("{tag}.json")]);
    }
    assert_eq!(std::fs::read(d.join("a.txt")).unwrap(), std::fs::read(d.join("b.txt")).unwrap());
    assert_eq!(std::fs::read(d.join("a.json")).unwrap(), std::fs::read(d.join("b.json")).unwrap());
    let ma = RunManifest::load(&d.join("a.json.manifest.json")).unwrap();
    let mb = RunManifest::load(&d.join("b.json.manifest.json")).unwrap();
    assert_eq!(ma.outputs[0].sha256, mb.outputs[0].sha256);
}

#[test]
fn shipped_learner_config_matches_the_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["collect", "-n", "3000", "--out", "d.txt"]);
    ok(d, &["train", "--dataset", "d.txt", "--out", "default.json"]);
    ok(d, &["train", "--dataset", "d.txt", "--learner", &shipped("learner.toml"), "--out", "shipped.json"]);
    assert_eq!(std::fs::read(d.join("default.json")).unwrap(), std::fs::read(d.join("shipped.json")).unwrap());
}

#[test]
fn experiment_on_the_shipped_spec_writes_3_learners_by_12_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["experiment", "--spec", &shipped("experiment.toml"), "--repeats", "1", "--out-dir", "out", "--quiet"]);
    let text = std::fs::read_to_string(d.join("out/aggregate.csv")).unwrap();
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let mut learners = std::collections::BTreeMap::<String, usize>::new();
    for r in rows.records() {
        *learners.entry(r.unwrap()[1].to_string()).or_default() += 1;
    }
    assert_eq!(learners.remove("oracle"), Some(1));
    assert_eq!(learners.into_iter().collect::<Vec<_>>(), [("fqi".into(), 12), ("hqi".into(), 12), ("hqi-sa".into(), 12)]);
}
