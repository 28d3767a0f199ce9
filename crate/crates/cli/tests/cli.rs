use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fuselect_core::fusion::{write_merged, MergedRow};
use fuselect_core::scorefile::{read_score_path, write_score_file};
use fuselect_core::synth::{generate_corpus, CorpusSpec, Regime};
use fuselect_core::{CalibrationArtifact, ClassThresholds, EmotionClass, Split};
use tempfile::TempDir;

fn fuselect(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fuselect"))
        .args(args)
        .env_remove("FUSELECT_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, records: usize, folds: u32, seed: u64) -> PathBuf {
    let out = dir.join("corpus");
    ok(&fuselect(&[
        "synth",
        "--out",
        s(&out),
        "--records",
        &records.to_string(),
        "--fold-count",
        &folds.to_string(),
        "--seed",
        &seed.to_string(),
    ]));
    out.join("scores.csv")
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn calibrate_writes_one_deterministic_artifact_per_fold() {
    let tmp = TempDir::new().unwrap();
    let scores = synth(tmp.path(), 300, 2, 4);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ok(&fuselect(&[
        "calibrate",
        "--scores",
        s(&scores),
        "--out",
        s(&a),
    ]));
    ok(&fuselect(&[
        "calibrate",
        "--scores",
        s(&scores),
        "--out",
        s(&b),
    ]));
    assert_eq!(listing(&a), ["calib_fold1.json", "calib_fold2.json"]);
    for f in listing(&a) {
        assert_eq!(fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap());
    }
    let artifact =
        CalibrationArtifact::from_json(&fs::read_to_string(a.join("calib_fold2.json")).unwrap())
            .unwrap();
    assert_eq!(artifact.meta.created_from_fold, 2);
    assert_eq!(artifact.meta.delta_percentile, 10);
}

#[test]
fn fold_without_train_rows_exits_2_naming_it() {
    let tmp = TempDir::new().unwrap();
    let scores = synth(tmp.path(), 200, 2, 1);
    // keep only fold 2's test rows
    let records: Vec<_> = read_score_path(&scores)
        .unwrap()
        .into_iter()
        .filter(|r| r.fold() == 1 || r.split() == Split::Test)
        .collect();
    let trimmed = tmp.path().join("trimmed.csv");
    write_score_file(fs::File::create(&trimmed).unwrap(), &records).unwrap();
    let out = fuselect(&[
        "calibrate",
        "--scores",
        s(&trimmed),
        "--out",
        s(&tmp.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("fold 2"), "{}", stderr(&out));

    let out = fuselect(&[
        "calibrate",
        "--scores",
        s(&trimmed),
        "--folds",
        "1",
        "--out",
        s(&tmp.path().join("o")),
    ]);
    ok(&out);
}

#[test]
fn apply_rejects_artifact_from_another_fold() {
    let tmp = TempDir::new().unwrap();
    let scores = synth(tmp.path(), 200, 2, 1);
    let out = tmp.path().join("o");
    ok(&fuselect(&[
        "calibrate",
        "--scores",
        s(&scores),
        "--out",
        s(&out),
    ]));
    let artifact = out.join("calib_fold1.json");
    let res = fuselect(&[
        "apply",
        "--scores",
        s(&scores),
        "--artifact",
        s(&artifact),
        "--fold",
        "2",
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("fold 1"));

    ok(&fuselect(&[
        "apply",
        "--scores",
        s(&scores),
        "--artifact",
        s(&artifact),
        "--out",
        s(&out),
    ]));
    let merged = fs::read_to_string(out.join("merged_fold1.csv")).unwrap();
    assert!(merged.starts_with("id,fold,split,label,primary,final,triggered,reverted\n"));
    // only test rows are merged: utterances 0, 2, 4, ... for fold 1 of 2
    assert_eq!(merged.lines().count(), 1 + 100);
    assert!(merged.lines().skip(1).all(|l| l.contains(",1,test,")));
    assert!(out.join("changelog_fold1.json").exists());
}

#[test]
fn never_trigger_artifact_gives_zero_change() {
    let tmp = TempDir::new().unwrap();
    let scores = synth(tmp.path(), 200, 2, 3);
    let out = tmp.path().join("o");
    ok(&fuselect(&[
        "calibrate",
        "--scores",
        s(&scores),
        "--folds",
        "1",
        "--out",
        s(&out),
    ]));
    let mut artifact =
        CalibrationArtifact::from_json(&fs::read_to_string(out.join("calib_fold1.json")).unwrap())
            .unwrap();
    artifact.thresholds = EmotionClass::ALL
        .into_iter()
        .map(|c| (c, ClassThresholds::never_trigger()))
        .collect();
    let never = out.join("never.json");
    fs::write(&never, artifact.to_json().unwrap()).unwrap();

    ok(&fuselect(&[
        "apply",
        "--scores",
        s(&scores),
        "--artifact",
        s(&never),
        "--out",
        s(&out),
    ]));
    let table = ok(&fuselect(&[
        "evaluate",
        s(&out.join("merged_fold1.csv")),
        "--out",
        s(&out),
    ]));
    assert!(table.contains("AVG"));
    let changes = fs::read_to_string(out.join("changes.csv")).unwrap();
    let mut lines = changes.lines();
    assert_eq!(lines.next(), Some("fold,ua,wa,f1"));
    for line in lines {
        assert!(line.ends_with(",0.0000,0.0000,0.0000"), "{line}");
    }
    // single fold: AVG row repeats it
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = report
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect())
        .collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[0][2..], rows[2][2..]);
    assert_eq!(rows[2][0], "AVG");
}

/// Merged rows with the given before-UA per fold: 2500 rows per class, with
/// `ua * 100` correct predictions spread as evenly as possible over classes.
fn merged_fixture(dir: &Path, uas: &[f64]) -> Vec<PathBuf> {
    uas.iter()
        .enumerate()
        .map(|(i, ua)| {
            let fold = i as u32 + 1;
            let total_hits = (ua * 100.0).round() as usize;
            let mut rows = Vec::new();
            for c in EmotionClass::ALL {
                let hits = total_hits / 4 + usize::from(c.index() < total_hits % 4);
                let wrong = EmotionClass::ALL[(c.index() + 1) % 4];
                for j in 0..2500 {
                    let primary = if j < hits { c } else { wrong };
                    rows.push(MergedRow {
                        id: format!("{c}{j}"),
                        fold,
                        split: Split::Test,
                        label: c,
                        primary,
                        final_label: primary,
                        triggered: false,
                        reverted: false,
                    });
                }
            }
            let path = dir.join(format!("merged_fold{fold}.csv"));
            write_merged(fs::File::create(&path).unwrap(), &rows).unwrap();
            path
        })
        .collect()
}

#[test]
fn evaluate_reproduces_fold_averaged_ua() {
    let tmp = TempDir::new().unwrap();
    let uas = [
        71.04, 70.86, 67.89, 70.80, 62.58, 62.41, 61.10, 66.48, 64.43, 56.02,
    ];
    let files = merged_fixture(tmp.path(), &uas);
    let mut args = vec!["evaluate".to_string()];
    args.extend(files.iter().map(|p| s(p).to_string()));
    args.extend(["--out".to_string(), s(tmp.path()).to_string()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&fuselect(&args));
    let report = fs::read_to_string(tmp.path().join("report.csv")).unwrap();
    let avg = report
        .lines()
        .find(|l| l.starts_with("AVG,before,"))
        .unwrap();
    let ua: f64 = avg.split(',').nth(2).unwrap().parse().unwrap();
    assert_eq!(format!("{ua:.2}"), "65.36");
    assert!(report.lines().any(|l| l.starts_with("1,before,71.0400,")));
}

#[test]
fn diagnose_separates_confused_errors() {
    let tmp = TempDir::new().unwrap();
    let spec = CorpusSpec {
        n_records: 600,
        folds: 1,
        regime_mix: [
            (Regime::ConfidentCorrect, 0.7),
            (Regime::ConfusedWrongSentimentHurts, 0.3),
        ]
        .into(),
        ..CorpusSpec::default()
    };
    let corpus = generate_corpus(&spec).unwrap();
    let scores = tmp.path().join("scores.csv");
    write_score_file(fs::File::create(&scores).unwrap(), &corpus.records).unwrap();
    let out = tmp.path().join("d");
    ok(&fuselect(&[
        "diagnose",
        "--scores",
        s(&scores),
        "--out",
        s(&out),
        "--bins",
        "20",
    ]));
    let text = fs::read_to_string(out.join("diagnostics_fold1.csv")).unwrap();
    assert!(text.starts_with("class,outcome,measure,bin,lo,hi,count\n"));

    // centre of mass of entropy per outcome and class
    let mut mass: std::collections::BTreeMap<(String, String), (f64, f64)> = Default::default();
    let mut per_class: std::collections::BTreeMap<String, u64> = Default::default();
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let count: f64 = f[6].parse().unwrap();
        if f[2] == "entropy" {
            *per_class.entry(f[0].to_string()).or_default() += count as u64;
            let centre = (f[4].parse::<f64>().unwrap() + f[5].parse::<f64>().unwrap()) / 2.0;
            let e = mass
                .entry((f[0].to_string(), f[1].to_string()))
                .or_default();
            e.0 += centre * count;
            e.1 += count;
        }
    }
    for c in EmotionClass::ALL {
        let n = corpus
            .records
            .iter()
            .filter(|r| r.prediction() == c)
            .count() as u64;
        assert_eq!(per_class[c.as_str()], n);
        let (cs, cn) = mass[&(c.to_string(), "correct".to_string())];
        let (ws, wn) = mass[&(c.to_string(), "incorrect".to_string())];
        assert!(ws / wn > cs / cn, "class {c}");
    }
}

#[test]
fn pipeline_runs_only_selected_folds_and_is_repeatable() {
    let tmp = TempDir::new().unwrap();
    let scores = synth(tmp.path(), 300, 3, 8);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let table = ok(&fuselect(&[
        "pipeline",
        "--scores",
        s(&scores),
        "--out",
        s(&a),
        "--folds",
        "1,3",
    ]));
    assert!(table.lines().any(|l| l.trim_start().starts_with("AVG")));
    assert_eq!(
        listing(&a),
        [
            "calib_fold1.json",
            "calib_fold3.json",
            "changelog_fold1.json",
            "changelog_fold3.json",
            "changes.csv",
            "merged_fold1.csv",
            "merged_fold3.csv",
            "report.csv"
        ]
    );
    let res = Command::new(env!("CARGO_BIN_EXE_fuselect"))
        .args([
            "pipeline",
            "--scores",
            s(&scores),
            "--out",
            s(&b),
            "--folds",
            "1,3",
        ])
        .env("FUSELECT_THREADS", "1")
        .output()
        .unwrap();
    ok(&res);
    for f in listing(&a) {
        assert_eq!(
            fs::read(a.join(&f)).unwrap(),
            fs::read(b.join(&f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn config_file_supplies_settings() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("run.toml");
    let corpus = tmp.path().join("c");
    fs::write(
        &cfg,
        format!(
            "delta = 5\nstep = 5\ntau_m_step = 0.1\nfolds = [2]\nscores = \"{}\"\nout = \"{}\"\n\n[synth]\nn_records = 120\nfolds = 2\nseed = 5\n",
            s(&corpus.join("scores.csv")),
            s(&tmp.path().join("run")),
        ),
    )
    .unwrap();
    ok(&fuselect(&[
        "synth",
        "--config",
        s(&cfg),
        "--out",
        s(&corpus),
    ]));
    assert_eq!(
        read_score_path(corpus.join("scores.csv")).unwrap().len(),
        240
    );
    ok(&fuselect(&["pipeline", "--config", s(&cfg)]));
    let artifact = CalibrationArtifact::from_json(
        &fs::read_to_string(tmp.path().join("run").join("calib_fold2.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(artifact.meta.delta_percentile, 5);
    assert_eq!(artifact.meta.step_percentile, 5);
    assert_eq!(artifact.meta.tau_m_step, 0.1);
    assert!(!tmp.path().join("run").join("calib_fold1.json").exists());
}

#[test]
fn bad_inputs_exit_2() {
    let tmp = TempDir::new().unwrap();
    let bad = tmp.path().join("bad.csv");
    fs::write(
        &bad,
        "id,fold,split,label,ps_ang,ps_sad,ps_hap,pt_neg,pt_neu,pt_pos\n",
    )
    .unwrap();
    let res = fuselect(&["pipeline", "--scores", s(&bad), "--out", s(tmp.path())]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("ps_neu"));

    let res = fuselect(&["pipeline", "--scores", s(&tmp.path().join("missing.csv"))]);
    assert_eq!(res.status.code(), Some(2));

    let res = fuselect(&["pipeline", "--out", s(tmp.path())]);
    assert_eq!(res.status.code(), Some(2));

    let scores = synth(tmp.path(), 50, 2, 1);
    let res = fuselect(&[
        "pipeline",
        "--scores",
        s(&scores),
        "--step",
        "3",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(res.status.code(), Some(2));

    let res = Command::new(env!("CARGO_BIN_EXE_fuselect"))
        .args(["pipeline", "--scores", s(&scores), "--out", s(tmp.path())])
        .env("FUSELECT_THREADS", "0")
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("FUSELECT_THREADS"));

    let res = fuselect(&["calibrate", "--folds", "x"]);
    assert_eq!(res.status.code(), Some(2));
}
