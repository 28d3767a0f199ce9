//! Acceptance criteria 1–9. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Duration;

use fuselect::commands::{cmd_pipeline, cmd_synth, default_pipeline, REPORT_FILE, THREADS_ENV};
use fuselect::config::FoldSelection;
use fuselect_core::calibrator::{calibrate_fold, search_thresholds, CalibrationConfig};
use fuselect_core::fusion::{merge_corpus, merge_record};
use fuselect_core::metrics::{average_folds, confusion, macro_f1, ua, wa, FoldReport, MetricSet};
use fuselect_core::synth::oracle::{
    oracle_entropy, oracle_grid_search, oracle_merge, oracle_varentropy,
};
use fuselect_core::synth::{
    generate_corpus, random_artifact, random_record, sample_simplex, CorpusSpec, Regime,
};
use fuselect_core::uncertainty::{entropy, varentropy};
use fuselect_core::{
    CalibrationArtifact, ClassThresholds, EmotionClass, EmotionScore, ExclusionSet, ScoreRecord,
    Split,
};
use fuselect_verify::{brute_force_metrics, timed, Verdicts};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = (bool, String);

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

/// 1. Entropy and varentropy against the double-double oracle.
fn uncertainty_math() -> Outcome {
    const CONCENTRATIONS: [f64; 6] = [0.05, 0.3, 1.0, 3.0, 20.0, 200.0];
    let mut r = rng(1);
    let vectors: Vec<[f64; 4]> = (0..10_000)
        .map(|i| {
            let conc = CONCENTRATIONS[i % CONCENTRATIONS.len()];
            if i % 10 == 9 {
                // one exact zero component
                let v = sample_simplex(3, conc, &mut r);
                let mut p = [0.0; 4];
                let zero = r.random_range(0..4);
                let mut j = 0;
                for (slot, x) in p.iter_mut().enumerate() {
                    if slot != zero {
                        *x = v[j];
                        j += 1;
                    }
                }
                p
            } else {
                let v = sample_simplex(4, conc, &mut r);
                [v[0], v[1], v[2], v[3]]
            }
        })
        .collect();

    let (worst, elapsed) = timed(|| {
        let mut worst: f64 = 0.0;
        for p in &vectors {
            let s = EmotionScore::new(*p).expect("simplex vector");
            worst = worst
                .max((entropy(&s) - oracle_entropy(s.probs())).abs())
                .max((varentropy(&s) - oracle_varentropy(s.probs())).abs());
        }
        worst
    });
    let uniform = EmotionScore::new([0.25; 4]).unwrap();
    let uniform_ok =
        (entropy(&uniform) - 4f64.ln()).abs() <= 1e-12 && varentropy(&uniform).abs() <= 1e-12;
    let ok = worst <= 1e-12 && uniform_ok && elapsed < Duration::from_secs(1);
    (
        ok,
        format!(
            "10000 vectors, max |error| {worst:.2e} (limit 1e-12), uniform-4 exact: {uniform_ok}, {}",
            secs(elapsed)
        ),
    )
}

/// 2. Production merge against the independent transcription.
fn merge_equivalence() -> Outcome {
    let mut r = rng(2);
    let ((agree, total), elapsed) = timed(|| {
        let mut agree = 0usize;
        let mut total = 0usize;
        for i in 0..100_000 {
            let rec = random_record(&mut r, "x", 1, Split::Test);
            let near = (i % 2 == 0).then_some(&rec);
            let calib = random_artifact(&mut r, near);
            total += 1;
            if merge_record(&rec, &calib).final_label == oracle_merge(&rec, &calib) {
                agree += 1;
            }
        }
        (agree, total)
    });
    let ok = agree == total && elapsed < Duration::from_secs(10);
    (
        ok,
        format!("{agree}/{total} pairs agree, {}", secs(elapsed)),
    )
}

/// 3. Grid search against the exhaustive recount.
fn grid_search_optimality() -> Outcome {
    let mut r = rng(3);
    let corpora: Vec<(EmotionClass, Vec<ScoreRecord>)> = (0..1000)
        .map(|_| {
            let n = r.random_range(1..=500);
            let mut records: Vec<ScoreRecord> = (0..n)
                .map(|i| random_record(&mut r, &format!("r{i}"), 1, Split::Train))
                .collect();
            if r.random_bool(0.25) {
                // repeated rows make percentile and flag-count ties common
                let k = records.len();
                for i in 0..k.min(100) {
                    records.push(records[i % 7 % k].clone());
                }
            }
            let class = records[r.random_range(0..records.len())].prediction();
            (class, records)
        })
        .collect();

    let ((agree, total), elapsed) = timed(|| {
        let mut agree = 0;
        for (class, records) in &corpora {
            let ours = search_thresholds(records, *class, 10, 1)
                .ok()
                .map(|s| (s.tau_e, s.tau_v));
            if ours == oracle_grid_search(records, *class, 10, 1) {
                agree += 1;
            }
        }
        (agree, corpora.len())
    });
    let ok = agree == total && elapsed < Duration::from_secs(60);
    (
        ok,
        format!("{agree}/{total} class-corpora agree, {}", secs(elapsed)),
    )
}

fn seeded_corpus(seed: u64, n: usize) -> Vec<ScoreRecord> {
    let mut r = rng(seed);
    let weights: Vec<f64> = Regime::ALL
        .iter()
        .map(|_| r.random_range(0.05..1.0))
        .collect();
    let total: f64 = weights.iter().sum();
    let mix: BTreeMap<Regime, f64> = Regime::ALL
        .iter()
        .zip(&weights)
        .map(|(g, w)| (*g, w / total))
        .collect();
    generate_corpus(&CorpusSpec {
        n_records: n,
        folds: 1,
        regime_mix: mix,
        seed,
        ..CorpusSpec::default()
    })
    .expect("valid spec")
    .records
}

fn calibrated(records: &[ScoreRecord]) -> CalibrationArtifact {
    calibrate_fold(records, &CalibrationConfig::default(), 1).expect("calibration")
}

/// 4. Full exclusion or never-trigger thresholds leave predictions untouched.
fn identity_invariants() -> Outcome {
    let mut violations = 0;
    for seed in 0..100 {
        let records = seeded_corpus(seed, 300);
        let base = calibrated(&records);
        let mut full = base.clone();
        full.exclusion = ExclusionSet::full();
        let mut never = base.clone();
        never.thresholds = EmotionClass::ALL
            .into_iter()
            .map(|c| (c, ClassThresholds::never_trigger()))
            .collect();
        for calib in [full, never] {
            let (outcomes, _) = merge_corpus(&records, &calib);
            violations += outcomes
                .iter()
                .zip(&records)
                .filter(|(o, r)| o.final_label != r.prediction())
                .count();
        }
    }
    (
        violations == 0,
        format!("100 corpora x 2 identity configurations, {violations} changed labels"),
    )
}

fn training_correct(records: &[ScoreRecord], calib: &CalibrationArtifact) -> usize {
    records
        .iter()
        .filter(|r| merge_record(r, calib).final_label == r.label())
        .count()
}

/// 5. The built exclusion list never lowers training accuracy.
fn exclusion_soundness() -> Outcome {
    let mut worse = 0;
    let mut nonempty = 0;
    for seed in 0..100 {
        let records = seeded_corpus(1000 + seed, 300);
        let calib = calibrated(&records);
        let mut open = calib.clone();
        open.exclusion = ExclusionSet::new();
        if !calib.exclusion.is_empty() {
            nonempty += 1;
        }
        if training_correct(&records, &calib) < training_correct(&records, &open) {
            worse += 1;
        }
    }
    (
        worse == 0,
        format!("100 corpora ({nonempty} with a non-empty exclusion list), {worse} lost training accuracy"),
    )
}

fn read_avg(dir: &Path) -> (MetricSet, MetricSet) {
    let text = std::fs::read_to_string(dir.join(REPORT_FILE)).expect("report written");
    let mut before = None;
    let mut after = None;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f[0] != "AVG" {
            continue;
        }
        let m = MetricSet {
            ua: f[2].parse().unwrap(),
            wa: f[3].parse().unwrap(),
            f1: f[4].parse().unwrap(),
        };
        match f[1] {
            "before" => before = Some(m),
            _ => after = Some(m),
        }
    }
    (
        before.expect("AVG before row"),
        after.expect("AVG after row"),
    )
}

/// 6. End-to-end lift on a planted 10-fold corpus.
fn fusion_lift() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec::default();
    let helps = spec.regime_mix[&Regime::ConfusedWrongSentimentHelps]
        / spec.regime_mix.values().sum::<f64>();
    let (_, elapsed) = timed(|| {
        let [scores, _] = cmd_synth(&spec, dir.path()).expect("synth");
        let out = dir.path().join("run");
        cmd_pipeline(&default_pipeline(&scores, &out, FoldSelection::All)).expect("pipeline");
    });
    let (b, a) = read_avg(&dir.path().join("run"));
    let lift = a.minus(&b);
    let ok = spec.folds == 10
        && helps >= 0.3
        && lift.ua >= 2.0
        && lift.wa >= 2.0
        && lift.f1 >= 2.0
        && elapsed < Duration::from_secs(10);
    (
        ok,
        format!(
            "{} folds, {:.0}% sentiment-helps: UA {:.2}->{:.2}, WA {:.2}->{:.2}, F1 {:.2}->{:.2}, {}",
            spec.folds,
            helps * 100.0,
            b.ua,
            a.ua,
            b.wa,
            a.wa,
            b.f1,
            a.f1,
            secs(elapsed)
        ),
    )
}

fn folds_of(before: &[[f64; 3]], after: &[[f64; 3]]) -> Vec<FoldReport> {
    before
        .iter()
        .zip(after)
        .enumerate()
        .map(|(i, (b, a))| FoldReport {
            fold: Some(i as u32 + 1),
            before: MetricSet {
                ua: b[0],
                wa: b[1],
                f1: b[2],
            },
            after: MetricSet {
                ua: a[0],
                wa: a[1],
                f1: a[2],
            },
        })
        .collect()
}

/// 7. Fold averages of the published per-fold tables.
fn paper_arithmetic() -> Outcome {
    let iv_before = [
        [71.04, 68.18, 68.12],
        [70.86, 69.30, 69.91],
        [67.89, 68.81, 69.95],
        [70.80, 67.34, 68.83],
        [62.58, 63.03, 60.60],
        [62.41, 62.32, 61.98],
        [61.10, 62.12, 59.49],
        [66.48, 64.02, 63.98],
        [64.43, 66.27, 67.28],
        [56.02, 54.99, 50.00],
    ];
    let iv_after = [
        [70.53, 67.80, 67.72],
        [70.58, 69.12, 69.73],
        [69.40, 70.06, 71.34],
        [71.34, 67.71, 69.10],
        [64.09, 64.37, 62.50],
        [62.79, 62.96, 62.59],
        [61.54, 62.88, 60.25],
        [65.31, 63.22, 63.18],
        [64.98, 65.93, 67.23],
        [57.77, 56.53, 51.95],
    ];
    let v_before = [
        [58.80, 65.02, 58.55],
        [50.74, 59.59, 51.81],
        [50.16, 65.33, 50.55],
        [49.76, 54.69, 51.12],
        [59.17, 63.10, 60.72],
        [44.71, 50.17, 43.99],
    ];
    let v_after = [
        [58.41, 64.55, 58.08],
        [52.88, 61.07, 54.30],
        [52.05, 65.90, 52.73],
        [50.95, 55.84, 52.50],
        [59.06, 63.10, 60.48],
        [46.11, 51.16, 45.70],
    ];
    let iv = average_folds(&folds_of(&iv_before, &iv_after)).unwrap();
    let v = average_folds(&folds_of(&v_before, &v_after)).unwrap();
    let two = |x: f64| format!("{x:.2}");

    let mut cells = Vec::new();
    let mut ok = true;
    let mut check = |name: &str, got: f64, want: &str| {
        let pass = two(got) == want;
        ok &= pass;
        cells.push(format!(
            "{name} {} vs {want}{}",
            two(got),
            if pass { "" } else { " MISMATCH" }
        ));
    };
    check("IV UA", iv.before.ua, "65.36");
    check("IV WA", iv.before.wa, "64.64");
    check("IV F1", iv.before.f1, "64.01");
    check("V UA", v.before.ua, "52.22");
    check("V WA", v.before.wa, "59.67");
    check("V F1", v.before.f1, "52.79");
    let after_ua_ok = (iv.after.ua - 65.81).abs() <= 0.05;
    ok &= after_ua_ok;
    cells.push(format!(
        "IV after UA {:.3} vs 65.81±0.05{}",
        iv.after.ua,
        if after_ua_ok { "" } else { " MISMATCH" }
    ));
    (ok, cells.join("; "))
}

/// 8. Metrics against a brute-force recount from label lists.
fn metrics_oracle() -> Outcome {
    let mut r = rng(8);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut gold = Vec::new();
        let mut pred = Vec::new();
        let sparse = r.random_bool(0.3);
        for g in EmotionClass::ALL {
            for p in EmotionClass::ALL {
                let n = if sparse && r.random_bool(0.5) {
                    0
                } else {
                    r.random_range(0..40)
                };
                for _ in 0..n {
                    gold.push(g);
                    pred.push(p);
                }
            }
        }
        if gold.is_empty() {
            gold.push(EmotionClass::Neu);
            pred.push(EmotionClass::Hap);
        }
        let cm = confusion(&gold, &pred).unwrap();
        let (bua, bwa, bf1) = brute_force_metrics(&gold, &pred);
        worst = worst
            .max((ua(&cm).unwrap() - bua).abs())
            .max((wa(&cm).unwrap() - bwa).abs())
            .max((macro_f1(&cm).unwrap() - bf1).abs());
    }
    (
        worst <= 1e-12,
        format!("1000 matrices, max |error| {worst:.2e} (limit 1e-12)"),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

/// 9. Pipeline outputs are byte-identical across reruns and thread counts.
fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = CorpusSpec {
        n_records: 600,
        folds: 4,
        seed: 9,
        ..CorpusSpec::default()
    };
    let [scores, _] = cmd_synth(&spec, dir.path()).unwrap();
    let run = |name: &str, threads: Option<&str>| {
        match threads {
            Some(t) => std::env::set_var(THREADS_ENV, t),
            None => std::env::remove_var(THREADS_ENV),
        }
        let out = dir.path().join(name);
        cmd_pipeline(&default_pipeline(&scores, &out, FoldSelection::All)).unwrap();
        snapshot(&out)
    };
    let a = run("a", None);
    let b = run("b", None);
    let c = run("c", Some("1"));
    std::env::remove_var(THREADS_ENV);
    let ok = a.len() == 4 * 3 + 2 && a == b && a == c;
    (
        ok,
        format!(
            "3 runs (default threads x2, 1 thread), {} files each, identical: {}",
            a.len(),
            a == b && a == c
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, uncertainty_math),
        (2, merge_equivalence),
        (3, grid_search_optimality),
        (4, identity_invariants),
        (5, exclusion_soundness),
        (6, fusion_lift),
        (7, paper_arithmetic),
        (8, metrics_oracle),
        (9, determinism),
    ];
    let mut verdicts = Verdicts::default();
    for (n, check) in criteria {
        match catch_unwind(AssertUnwindSafe(check)) {
            Ok((ok, detail)) => verdicts.record(n, ok, &detail),
            Err(_) => verdicts.record(n, false, "panicked"),
        }
    }
    if !verdicts.failed().is_empty() {
        println!("failed criteria: {:?}", verdicts.failed());
        std::process::exit(1);
    }
}
