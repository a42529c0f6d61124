use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn uidgnn(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uidgnn"))
        .args(args)
        .current_dir(dir)
        .env_remove("UIDGNN_OUT")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const TINY: &str = "\
experiment=tiny
seed=5

[data]
kind=triangle
nodes=20
train_graphs=3
test_graphs=2
train_m=2
test_m=2,3

[model]
layers=2
hidden_dim=8
rnf_dim=4

[train]
mode=siri
k=2
epochs=4
";

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(uidgnn(&[], dir.path()).status.code(), Some(1));
    assert_eq!(uidgnn(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(uidgnn(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn invalid_inputs_exit_2_and_name_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.cfg"), TINY.replace("epochs=4", "epochs=0")).unwrap();
    let out = uidgnn(&["train", "bad.cfg", "--out", "run"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`epochs`"), "{}", stderr(&out));

    let out = uidgnn(&["train", "missing.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing.cfg"));

    let out = uidgnn(&["reproduce", "nope"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("nope"));
}

#[test]
fn oracle_and_grad_checks_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = uidgnn(&["oracle-check"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(!String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    let out = uidgnn(&["grad-check"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
}

#[test]
fn train_is_byte_identical_and_feeds_the_evaluations() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("tiny.cfg"), TINY).unwrap();
    for run in ["a", "b"] {
        let out = uidgnn(&["train", "tiny.cfg", "--out", run], d);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    for file in ["metrics.csv", "checkpoint.txt", "manifest.cfg"] {
        assert_eq!(
            fs::read(d.join("a").join(file)).unwrap(),
            fs::read(d.join("b").join(file)).unwrap(),
            "{file}"
        );
    }
    let metrics = fs::read_to_string(d.join("a/metrics.csv")).unwrap();
    assert!(metrics.starts_with("epoch,task_loss,contrastive_loss,total_loss,train_acc,test_acc\n"));
    assert_eq!(metrics.lines().count(), 5);

    let out = uidgnn(&["gen-data", "tiny.cfg", "--out", "data"], d);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(d.join("data/train/g0002.graph").exists());
    assert!(d.join("data/test-m3/g0001.labels").exists());

    let out = uidgnn(
        &[
            "eval-invariance",
            "--checkpoint",
            "a/checkpoint.txt",
            "--train",
            "data/train",
            "--test",
            "data/test-m2",
            "-t",
            "5",
            "--seeds",
            "2",
            "--out",
            "inv.csv",
        ],
        d,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(d.join("inv.csv")).unwrap();
    assert!(csv.starts_with("set,node,ratio\n"));
    assert!(csv.contains("\ntest,mean,"));
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches("seed ").count(), 2);
}

#[test]
fn pair_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let manifest = "experiment=pairs\n[data]\nkind=pair-families\nfamilies=wl1-hard-basic:1,csl:1\n[model]\nlayers=2\nhidden_dim=8\nrnf_dim=4\n[train]\ntask=pair-siamese\nepochs=3\n";
    fs::write(d.join("pairs.cfg"), manifest).unwrap();
    let out = uidgnn(&["gen-data", "pairs.cfg", "--out", "data"], d);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(fs::read_to_string(d.join("data/pairs.txt")).unwrap().lines().count(), 2);
    let out = uidgnn(&["train", "pairs.cfg", "--out", "run"], d);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = uidgnn(
        &[
            "eval-pairs",
            "--checkpoint",
            "run/checkpoint.txt",
            "--pairs",
            "data/pairs.txt",
            "-s",
            "4",
            "--out",
            "suite.csv",
        ],
        d,
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(d.join("suite.csv")).unwrap();
    assert!(csv.starts_with("family,pair_id,distance,distinguished,reliable\n"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn reproduce_writes_summary_under_the_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_uidgnn"))
        .args(["reproduce", "triangle-interp", "--scale", "0.2"])
        .current_dir(dir.path())
        .env("UIDGNN_OUT", dir.path().join("root"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("root/triangle-interp/summary.csv")).unwrap();
    assert!(summary.starts_with("variant,run,set,accuracy\n"));
    for variant in ["constant", "rni", "siri"] {
        assert!(summary.contains(&format!("\n{variant},mean,test-m2,")), "{summary}");
    }
}
