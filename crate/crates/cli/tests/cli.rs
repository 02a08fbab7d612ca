use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn gazecit(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazecit"))
        .current_dir(cwd)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Synthetic recording in `<tmp>/rec`.
fn synth(tmp: &Path, preset: &str, participants: usize, tpc: usize) -> PathBuf {
    let o = gazecit(
        tmp,
        &[
            "synth",
            "--set",
            &format!("synth.preset={preset}"),
            "--set",
            &format!("synth.participants={participants}"),
            "--set",
            &format!("synth.trials_per_condition={tpc}"),
            "--seed",
            "11",
            "--out",
            "rec",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    tmp.join("rec")
}

fn featurize(tmp: &Path, out: &str) -> Output {
    gazecit(tmp, &["featurize", "--set", "input.dir=rec", "--out", out])
}

fn list_tree(dir: &Path) -> Vec<String> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            out.push(p.strip_prefix(dir).unwrap().display().to_string());
            if p.is_dir() {
                stack.push(p);
            }
        }
    }
    out.sort();
    out
}

#[test]
fn verify_passes_on_fresh_build() {
    let tmp = TempDir::new().unwrap();
    let o = gazecit(tmp.path(), &["verify"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS ")).count(), 5, "{text}");
    assert!(text.contains("majority baselines"));
    assert!(list_tree(tmp.path()).is_empty());
}

#[test]
fn verify_fails_on_perturbed_golden_lambda() {
    let tmp = TempDir::new().unwrap();
    let mut fixture: serde_json::Value = serde_json::from_str(gazecit::verify::GOLDEN_MODEL).unwrap();
    let lambda = fixture["model"]["params"]["lambda"].as_f64().unwrap();
    fixture["model"]["params"]["lambda"] = serde_json::json!(lambda + 0.5);
    let path = tmp.path().join("golden.json");
    fs::write(&path, fixture.to_string()).unwrap();
    let o = gazecit(tmp.path(), &["verify", "--golden", "golden.json"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("FAIL golden model leaf weights"));
    assert!(stderr(&o).contains("golden model leaf weights"));
}

#[test]
fn featurize_counts_rows_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), "null", 10, 2);
    let o = featurize(tmp.path(), "a");
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("rows: 60"), "{text}");
    assert!(text.contains("participants: 10"));
    let first = fs::read(tmp.path().join("a/features.csv")).unwrap();
    assert_eq!(first.iter().filter(|&&b| b == b'\n').count(), 61);
    assert!(featurize(tmp.path(), "b").status.success());
    assert_eq!(first, fs::read(tmp.path().join("b/features.csv")).unwrap());
}

#[test]
fn unknown_label_is_a_validation_error_naming_the_row() {
    let tmp = TempDir::new().unwrap();
    let rec = synth(tmp.path(), "null", 5, 1);
    let trials = rec.join("trials.csv");
    let text = fs::read_to_string(&trials).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[3] = lines[3].replacen("Revealing", "Bluffing", 1).replacen("Concealing", "Bluffing", 1).replacen("Faking", "Bluffing", 1);
    fs::write(&trials, lines.join("\n") + "\n").unwrap();
    let o = featurize(tmp.path(), "f");
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("trials.csv:4"), "{err}");
    assert!(err.contains("Bluffing"), "{err}");
    assert!(!tmp.path().join("f").exists());
}

#[test]
fn bad_config_line_exits_with_line_number() {
    let tmp = TempDir::new().unwrap();
    fs::write(tmp.path().join("run.cfg"), "task = binary\nsearch_n = many\n").unwrap();
    let o = gazecit(tmp.path(), &["run", "--config", "run.cfg"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("run.cfg:2"), "{}", stderr(&o));

    let o = gazecit(tmp.path(), &["run", "--task", "four_class", "--set", "synth.preset=null"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn two_input_sources_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let o = gazecit(
        tmp.path(),
        &["featurize", "--set", "synth.preset=null", "--set", "input.features=x.csv", "--out", "o"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("more than one input source"));
}

#[test]
fn dry_run_prints_plan_without_writing() {
    let tmp = TempDir::new().unwrap();
    let o = gazecit(
        tmp.path(),
        &["run", "--set", "synth.preset=null", "--set", "synth.participants=10", "--set", "synth.trials_per_condition=2", "--out", "never", "--dry-run"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("split plan (seed 42"));
    assert_eq!(text.matches("  test: ").count(), 5);
    assert_eq!(text.matches("  early_stop: ").count(), 5);
    assert!(list_tree(tmp.path()).is_empty());
}

#[test]
fn pupil_group_three_class_report_has_53_columns() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), "null", 10, 2);
    assert!(featurize(tmp.path(), "feat").status.success());
    let o = gazecit(
        tmp.path(),
        &["run", "--set", "input.features=feat/features.csv", "--set", "search_n=2", "--task", "three_class", "--group", "pupil", "--out", "run"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("run/report.json")).unwrap()).unwrap();
    assert_eq!(report["n_features"], 53);
    assert_eq!(report["task"], "three_class");
    assert_eq!(report["feature_group"], "pupil");
    assert_eq!(report["final_models"], 5);
    let ranking = report["replications"][0]["importance"].as_array().unwrap();
    assert_eq!(ranking.len(), 53);
    assert!(ranking.iter().all(|f| f["feature"].as_str().unwrap().starts_with("pupil_")));
}

#[test]
fn planted_config_run_beats_baseline_and_finds_planted_feature() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("planted.cfg"),
        "# reduced planted-signal run\nsynth.preset = planted\nsynth.participants = 20\nsynth.trials_per_condition = 6\nsearch_n = 3\nseed = 3\nout = res\n",
    )
    .unwrap();
    let o = gazecit(tmp.path(), &["run", "--config", "planted.cfg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("res/report.json")).unwrap()).unwrap();
    let mean = report["mean_accuracy"].as_f64().unwrap();
    let baseline = report["baseline"].as_f64().unwrap();
    assert!(mean > baseline, "{mean} vs {baseline}");
    let top: Vec<&str> = report["top_features"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| o["feature"].as_str().unwrap())
        .collect();
    assert!(top.iter().any(|f| *f == "saccade_number" || f.starts_with("pupil_")), "{top:?}");
    assert!(tmp.path().join("res/importance.json").exists());

    let r = gazecit(tmp.path(), &["report", "res/report.json"]);
    assert!(r.status.success());
    assert!(stdout(&r).contains("baseline 0.500"));
}

#[test]
fn run_is_byte_identical_and_stays_in_out_dir() {
    let tmp = TempDir::new().unwrap();
    let args = |out: &'static str| {
        vec![
            "run",
            "--set",
            "synth.preset=planted",
            "--set",
            "synth.participants=10",
            "--set",
            "synth.trials_per_condition=2",
            "--set",
            "search_n=2",
            "--seed",
            "5",
            "--out",
            out,
        ]
    };
    assert!(gazecit(tmp.path(), &args("one")).status.success());
    assert!(gazecit(tmp.path(), &args("two")).status.success());
    for f in ["report.json", "importance.json"] {
        assert_eq!(
            fs::read(tmp.path().join("one").join(f)).unwrap(),
            fs::read(tmp.path().join("two").join(f)).unwrap(),
            "{f}"
        );
    }
    assert_eq!(
        list_tree(tmp.path()),
        ["one", "one/importance.json", "one/report.json", "two", "two/importance.json", "two/report.json"]
    );
}

#[test]
fn synth_writes_manifest_and_is_deterministic() {
    let tmp = TempDir::new().unwrap();
    let a = synth(tmp.path(), "literature", 5, 1);
    let first: Vec<Vec<u8>> = ["samples.csv", "events.csv", "trials.csv", "manifest.json"]
        .iter()
        .map(|f| fs::read(a.join(f)).unwrap())
        .collect();
    fs::remove_dir_all(&a).unwrap();
    synth(tmp.path(), "literature", 5, 1);
    for (i, f) in ["samples.csv", "events.csv", "trials.csv", "manifest.json"].iter().enumerate() {
        assert_eq!(first[i], fs::read(a.join(f)).unwrap(), "{f}");
    }
}
