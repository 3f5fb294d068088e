//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any failed.

mod common;

use std::collections::HashMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use screenkit::corpus::read_corpus;
use screenkit::engine::{
    run_screening, DecisionStore, ProtocolIndex, RunOptions, ScreeningDecision, ScreeningSource,
};
use screenkit::ensemble::{evaluate_ensembles, EnsembleConfig, EnsembleMode};
use screenkit::evaluation::{
    cohen_kappa, compute_metrics, round3, tabulate_confusion, ConfusionMatrix,
};
use screenkit::gateway::{
    complete_with_retry, BackendConfig, CacheMode, Gateway, MockClock, RetryPolicy, Transport,
    TransportFailure,
};
use screenkit::protocol::{Decision, Dialect, PromptSet};
use screenkit::{BiasLevel, GroundTruth, Record, ReviewProtocol};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

const POSITIVES: usize = 271;
const NEGATIVES: usize = 529;

/// Printed rows of the 800-record comparison: sensitivity, specificity,
/// balanced accuracy, precision, NPV, F1.
const SUBSET_ROWS: [(&str, [f64; 6]); 9] = [
    ("Alpha", [0.745, 0.962, 0.854, 0.910, 0.881, 0.819]),
    ("Bravo", [0.720, 0.964, 0.842, 0.911, 0.870, 0.804]),
    ("Charlie", [0.775, 0.955, 0.865, 0.897, 0.892, 0.832]),
    ("GPT-3.5", [1.000, 0.393, 0.697, 0.458, 1.000, 0.628]),
    ("GPT-4", [0.605, 0.975, 0.857, 0.927, 0.828, 0.732]),
    ("GPT-4o", [0.911, 0.896, 0.904, 0.818, 0.952, 0.862]),
    ("Gemini 1.5 Pro", [0.760, 0.943, 0.852, 0.873, 0.885, 0.813]),
    ("LLaMA 3", [0.871, 0.675, 0.773, 0.578, 0.911, 0.695]),
    ("Sonnet 3.5", [0.819, 0.966, 0.893, 0.925, 0.913, 0.869]),
];

/// Printed rows of the full-scale comparison, same column order.
const FULL_SCALE_ROWS: [(&str, [f64; 6]); 6] = [
    ("Cochrane", [1.000, 0.993, 0.996, 0.235, 1.000, 0.381]),
    ("GPT-3.5", [1.000, 0.419, 0.710, 0.004, 1.000, 0.008]),
    ("GPT-4o", [0.904, 0.949, 0.926, 0.038, 1.000, 0.074]),
    ("Gemini 1.5 Pro", [0.756, 0.976, 0.866, 0.068, 0.999, 0.125]),
    ("LLaMA 3", [0.841, 0.776, 0.809, 0.008, 1.000, 0.017]),
    ("Sonnet 3.5", [0.823, 0.982, 0.903, 0.096, 1.000, 0.172]),
];

const METRIC_NAMES: [&str; 6] = [
    "sensitivity",
    "specificity",
    "balanced_accuracy",
    "precision",
    "npv",
    "f1",
];

fn within(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol + 1e-12
}

fn timed(limit: Duration, start: Instant) -> Result<Duration, String> {
    let elapsed = start.elapsed();
    if elapsed < limit {
        Ok(elapsed)
    } else {
        Err(format!("took {elapsed:?}, limit {limit:?}"))
    }
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for (name, [sens, spec, ba, prec, _npv, f1]) in SUBSET_ROWS {
        let ba_calc = (sens + spec) / 2.0;
        if !within(ba_calc, ba, 0.001) {
            failures.push(format!(
                "{name}: (sens+spec)/2 = {ba_calc:.4}, printed {ba:.3}"
            ));
        }
        let f1_calc = 2.0 * prec * sens / (prec + sens);
        if !within(f1_calc, f1, 0.001) {
            failures.push(format!("{name}: 2PR/(P+R) = {f1_calc:.4}, printed {f1:.3}"));
        }
    }
    let elapsed = timed(Duration::from_secs(1), start)?;
    if failures.is_empty() {
        Ok(format!("9 rows consistent in {elapsed:?}"))
    } else {
        Err(failures.join("; "))
    }
}

/// 271 positives then 529 negatives in one review.
fn subset_records() -> Vec<Record> {
    (0..POSITIVES + NEGATIVES)
        .map(|i| {
            let positive = i < POSITIVES;
            Record {
                record_id: if positive {
                    format!("pos-{i:03}")
                } else {
                    format!("neg-{:03}", i - POSITIVES)
                },
                review_id: "subset".into(),
                title: format!("Record {i}"),
                abstract_text: Some("Abstract.".into()),
                year: Some(2018),
                authors: vec![],
                ground_truth: if positive {
                    GroundTruth::IncludedInReview
                } else {
                    GroundTruth::ExcludedFromReview
                },
                drop_reason: None,
            }
        })
        .collect()
}

/// Decisions including the first `tp` positives and the first `fp` negatives.
fn fixture_decisions(records: &[Record], tp: usize, fp: usize) -> HashMap<String, Decision> {
    let (mut pos, mut neg) = (0, 0);
    records
        .iter()
        .map(|r| {
            let include = if r.ground_truth == GroundTruth::IncludedInReview {
                pos += 1;
                pos <= tp
            } else {
                neg += 1;
                neg <= fp
            };
            (
                r.record_id.clone(),
                if include {
                    Decision::Include
                } else {
                    Decision::Exclude
                },
            )
        })
        .collect()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let records = subset_records();
    let mut failures = Vec::new();
    for (name, printed) in SUBSET_ROWS {
        // Counts solved from the printed rates and the class totals.
        let tp = (printed[0] * POSITIVES as f64).round() as usize;
        let tn = (printed[1] * NEGATIVES as f64).round() as usize;
        let decisions = fixture_decisions(&records, tp, NEGATIVES - tn);
        let cm = tabulate_confusion(&decisions, &records, name).map_err(|e| e.to_string())?;
        let m = compute_metrics(&cm);
        let computed = [
            m.sensitivity,
            m.specificity,
            m.balanced_accuracy,
            m.precision,
            m.npv,
            m.f1,
        ];
        for ((metric, value), want) in METRIC_NAMES.iter().zip(computed).zip(printed) {
            let got = value.map(round3);
            if got != Some(want) {
                failures.push(format!(
                    "{name} {metric}: fixture (tp={tp}, fn={}, tn={tn}, fp={}) gives {got:?}, printed {want:.3}",
                    POSITIVES - tp,
                    NEGATIVES - tn
                ));
            }
        }
    }
    let elapsed = timed(Duration::from_secs(1), start)?;
    if failures.is_empty() {
        Ok(format!("54 metrics reproduced in {elapsed:?}"))
    } else {
        Err(failures.join("; "))
    }
}

fn criterion_3() -> Outcome {
    let (pos, neg) = (271u64, 119_424u64);
    let mut failures = Vec::new();

    let [sens, spec, ba, prec, npv, f1] = FULL_SCALE_ROWS[0].1;
    let tp = (sens * pos as f64).round() as u64;
    let fp = (tp as f64 / prec - tp as f64).round() as u64;
    let cm = ConfusionMatrix::new(tp, neg - fp, fp, pos - tp);
    let m = compute_metrics(&cm);
    let checks = [
        ("specificity", m.specificity, spec),
        ("balanced_accuracy", m.balanced_accuracy, ba),
        ("precision", m.precision, prec),
        ("npv", m.npv, npv),
        ("f1", m.f1, f1),
    ];
    for (metric, got, want) in checks {
        let got = got.unwrap_or(f64::NAN);
        if !within(got, want, 0.01) {
            failures.push(format!(
                "Cochrane {metric}: {got:.4} from fp={fp}, printed {want:.3}"
            ));
        }
    }
    for (name, [sens, spec, ba, ..]) in &FULL_SCALE_ROWS[1..] {
        let calc = (sens + spec) / 2.0;
        if !within(calc, *ba, 0.001) {
            failures.push(format!(
                "{name}: (sens+spec)/2 = {calc:.4}, printed {ba:.3}"
            ));
        }
    }
    if failures.is_empty() {
        Ok(format!(
            "ceiling row consistent with fp={fp}; 5 LLM rows satisfy the identity"
        ))
    } else {
        Err(failures.join("; "))
    }
}

fn criterion_4() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = dir.path().join("corpus.jsonl");
    write_records(&corpus, &review_corpus(37));
    let mut outputs = Vec::new();
    for name in ["a.jsonl", "b.jsonl"] {
        let out = dir.path().join(name);
        let result = run(&["sample", "--corpus", p(&corpus), "--out", p(&out)]);
        if !result.status.success() {
            return Err(stderr(&result));
        }
        outputs.push(fs::read(&out).map_err(|e| e.to_string())?);
    }
    if outputs[0] != outputs[1] {
        return Err("two runs with the default seed differ".into());
    }
    let subset = read_corpus(outputs[0].as_slice()).map_err(|e| e.to_string())?;
    let positives = subset
        .iter()
        .filter(|r| r.ground_truth == GroundTruth::IncludedInReview)
        .count();
    let mut negatives: HashMap<&str, usize> = HashMap::new();
    for r in subset
        .iter()
        .filter(|r| r.ground_truth == GroundTruth::ExcludedFromReview)
    {
        *negatives.entry(r.review_id.as_str()).or_default() += 1;
    }
    if subset.len() != 800
        || positives != 271
        || negatives.len() != 23
        || negatives.values().any(|&n| n != 23)
    {
        return Err(format!(
            "{} records, {positives} positives, negatives per review {negatives:?}",
            subset.len()
        ));
    }
    Ok(
        "800 records, 271 positives, 23 negatives in each of 23 reviews, byte-identical reruns"
            .into(),
    )
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let corpus = prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 1..300);
    let cases = std::cell::Cell::new(0u32);
    let result = runner.run(&corpus, |rows| {
        cases.set(cases.get() + 1);
        let records: Vec<Record> = rows
            .iter()
            .enumerate()
            .map(|(i, (truth, _, _))| Record {
                record_id: format!("r{i}"),
                review_id: "x".into(),
                title: String::new(),
                abstract_text: None,
                year: None,
                authors: vec![],
                ground_truth: if *truth {
                    GroundTruth::IncludedInReview
                } else {
                    GroundTruth::ExcludedFromReview
                },
                drop_reason: None,
            })
            .collect();
        let verdict = |b: bool| {
            if b {
                Decision::Include
            } else {
                Decision::Exclude
            }
        };
        let a: HashMap<String, Decision> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (format!("r{i}"), verdict(r.1)))
            .collect();
        let b: HashMap<String, Decision> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (format!("r{i}"), verdict(r.2)))
            .collect();
        // A column that includes everything: sensitivity 1.
        let all: HashMap<String, Decision> =
            a.keys().map(|k| (k.clone(), Decision::Include)).collect();

        let mut store = DecisionStore::in_memory();
        let sources = [
            ScreeningSource::human("a"),
            ScreeningSource::human("b"),
            ScreeningSource::human("all"),
        ];
        for (source, column) in sources.iter().zip([&a, &b, &all]) {
            for (id, v) in column {
                store
                    .append(ScreeningDecision {
                        record_id: id.clone(),
                        source: source.clone(),
                        verdict: *v,
                        raw_text: None,
                        fallback: false,
                        attempts: 1,
                        status: None,
                        created_at: chrono::DateTime::UNIX_EPOCH,
                    })
                    .map_err(|e| TestCaseError::fail(e.to_string()))?;
            }
        }
        let config = |mode, x: &ScreeningSource, y: &ScreeningSource| {
            EnsembleConfig::new(mode, x.clone(), y.clone()).unwrap()
        };
        let configs = [
            config(EnsembleMode::Parallel, &sources[0], &sources[1]),
            config(EnsembleMode::Series, &sources[0], &sources[1]),
            config(EnsembleMode::Parallel, &sources[2], &sources[1]),
        ];
        let results = evaluate_ensembles(&store, &records, &configs)
            .map_err(|e| TestCaseError::fail(e.to_string()))?;
        let find = |mode, first: &ScreeningSource| {
            results
                .iter()
                .find(|r| r.config.mode() == mode && r.config.component_a() == first)
                .unwrap()
                .metrics
        };
        let ma = compute_metrics(&tabulate_confusion(&a, &records, "a").unwrap());
        let mb = compute_metrics(&tabulate_confusion(&b, &records, "b").unwrap());
        let par = find(EnsembleMode::Parallel, &sources[0]);
        let ser = find(EnsembleMode::Series, &sources[0]);
        let forced = find(EnsembleMode::Parallel, &sources[2]);
        prop_assert!(
            par.sensitivity.unwrap() >= ma.sensitivity.unwrap().max(mb.sensitivity.unwrap())
        );
        if let (Some(s), Some(sa), Some(sb)) = (ser.specificity, ma.specificity, mb.specificity) {
            prop_assert!(s >= sa.max(sb));
        }
        prop_assert_eq!(forced.sensitivity, Some(1.0));
        Ok(())
    });
    let elapsed = timed(Duration::from_secs(10), start)?;
    match result {
        Ok(()) => Ok(format!(
            "{} random corpora, no counterexample, {elapsed:?}",
            cases.get()
        )),
        Err(e) => Err(format!("counterexample: {e}")),
    }
}

fn criterion_6() -> Outcome {
    let records = subset_records();
    let gpt = ScreeningSource::model("gpt-3.5-turbo-0125", BiasLevel::Heavy, 1);
    let bravo = ScreeningSource::human("Bravo");
    let mut store = DecisionStore::in_memory();
    for (source, column) in [
        (&gpt, fixture_decisions(&records, 271, 321)),
        (&bravo, fixture_decisions(&records, 195, 19)),
    ] {
        for record in &records {
            store
                .append(ScreeningDecision {
                    record_id: record.record_id.clone(),
                    source: source.clone(),
                    verdict: column[&record.record_id],
                    raw_text: None,
                    fallback: false,
                    attempts: 1,
                    status: None,
                    created_at: chrono::DateTime::UNIX_EPOCH,
                })
                .map_err(|e| e.to_string())?;
        }
    }
    let config =
        EnsembleConfig::new(EnsembleMode::Parallel, gpt, bravo).map_err(|e| e.to_string())?;
    let result = evaluate_ensembles(&store, &records, &[config]).map_err(|e| e.to_string())?;
    let m = result[0].metrics;
    let (sens, prec) = (
        m.sensitivity.unwrap_or(f64::NAN),
        m.precision.unwrap_or(f64::NAN),
    );
    if round3(sens) == 1.0 && within(prec, 0.458, 0.001) {
        Ok(format!("sensitivity {sens:.3}, precision {prec:.4}"))
    } else {
        Err(format!("sensitivity {sens:.4}, precision {prec:.4}"))
    }
}

/// Answers scripted by a marker in the rendered prompt.
struct Scripted;

impl Transport for Scripted {
    fn send(&self, prompt: &str) -> Result<String, TransportFailure> {
        if prompt.contains("case-include") {
            Ok("Include".into())
        } else if prompt.contains("case-exclude") {
            Ok("Exclude".into())
        } else if prompt.contains("case-refused") {
            Err(TransportFailure::ContentViolation("content_filter".into()))
        } else if prompt.contains("case-empty") {
            Ok(String::new())
        } else {
            Err(TransportFailure::Transport(
                "503 Service Unavailable".into(),
            ))
        }
    }
}

fn criterion_7() -> Outcome {
    let cases = [
        "case-include",
        "case-exclude",
        "case-refused",
        "case-empty",
        "case-unreachable",
    ];
    let records: Vec<Record> = cases
        .iter()
        .enumerate()
        .map(|(i, case)| Record {
            record_id: format!("r{i}"),
            review_id: "fixture".into(),
            title: format!("Title {case}"),
            abstract_text: Some("Abstract.".into()),
            year: None,
            authors: vec![],
            ground_truth: GroundTruth::Unlabelled,
            drop_reason: None,
        })
        .collect();
    let protocols: ProtocolIndex = [(
        "fixture".to_string(),
        ReviewProtocol {
            review_id: "fixture".into(),
            review_title: "Fixture review".into(),
            inclusion_criteria: vec!["Anything".into()],
            exclusion_criteria: vec![],
            search_year: 2024,
        },
    )]
    .into();
    let config = BackendConfig::new(
        "fixture",
        "http://127.0.0.1:9/v1/chat/completions",
        "fixture-model",
    );
    let gateway = Gateway::new(
        config,
        CacheMode::Live,
        Some(Arc::new(Scripted)),
        None,
        Arc::new(MockClock::new()),
    )
    .map_err(|e| e.to_string())?;
    let prompt = PromptSet::canonical().spec(BiasLevel::Heavy, Dialect::Plain);
    let mut store = DecisionStore::in_memory();
    run_screening(
        &records,
        &protocols,
        &prompt,
        &gateway,
        &mut store,
        1,
        RunOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let got: Vec<(Decision, bool)> = store
        .decisions()
        .iter()
        .map(|d| (d.verdict, d.fallback))
        .collect();
    use Decision::{Exclude as E, Include as I};
    let want = vec![(I, false), (E, false), (I, true), (I, true), (I, true)];
    if got == want {
        Ok("verdicts I,E,I,I,I with fallback F,F,T,T,T".into())
    } else {
        Err(format!("got {got:?}"))
    }
}

struct AlwaysDown;

impl Transport for AlwaysDown {
    fn send(&self, _: &str) -> Result<String, TransportFailure> {
        Err(TransportFailure::Transport("connection refused".into()))
    }
}

fn criterion_8() -> Outcome {
    let policy = RetryPolicy {
        max_attempts: 10,
        base_delay: Duration::from_secs(1),
        multiplier: 2.0,
        max_delay: Duration::from_secs(60),
        jitter_fraction: 0.0,
        ..RetryPolicy::default()
    };
    let clock = MockClock::new();
    let outcome = complete_with_retry(&AlwaysDown, &policy, &clock, "prompt");
    let got: Vec<u64> = clock.sleeps().iter().map(Duration::as_secs).collect();
    let exact = clock.sleeps().iter().all(|d| d.subsec_nanos() == 0);
    let want = vec![1, 2, 4, 8, 16, 32, 60, 60, 60];
    if got == want && exact && outcome.attempts == 10 {
        Ok(format!(
            "delays {got:?} s over {} attempts",
            outcome.attempts
        ))
    } else {
        Err(format!(
            "delays {:?} over {} attempts",
            clock.sleeps(),
            outcome.attempts
        ))
    }
}

fn column(verdicts: &[Decision]) -> HashMap<String, Decision> {
    verdicts
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("r{i}"), *v))
        .collect()
}

fn criterion_9() -> Outcome {
    use Decision::{Exclude as E, Include as I};
    let cases: [(&[Decision], &[Decision], f64); 3] = [
        (&[I, E, E, I, E], &[I, E, E, I, E], 1.0),
        (&[I, I, E, E], &[E, E, I, I], -1.0),
        (&[I, E, I, E], &[I, E, E, E], 0.5),
    ];
    for (a, b, want) in cases {
        let kappa = cohen_kappa(&column(a), &column(b))
            .map_err(|e| e.to_string())?
            .kappa;
        match kappa {
            Some(k) if (k - want).abs() <= 1e-12 => {}
            other => return Err(format!("{a:?} vs {b:?}: kappa {other:?}, expected {want}")),
        }
    }
    let mut runner = TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    });
    let pairs = prop::collection::vec((any::<bool>(), any::<bool>()), 1..100);
    runner
        .run(&pairs, |rows| {
            let v = |b: bool| if b { I } else { E };
            let a = column(&rows.iter().map(|r| v(r.0)).collect::<Vec<_>>());
            let b = column(&rows.iter().map(|r| v(r.1)).collect::<Vec<_>>());
            let ab = cohen_kappa(&a, &b).unwrap().kappa;
            let ba = cohen_kappa(&b, &a).unwrap().kappa;
            prop_assert_eq!(ab, ba);
            Ok(())
        })
        .map_err(|e| format!("symmetry: {e}"))?;
    Ok("3 hand-computed cases within 1e-12; symmetric on 1000 random pairs".into())
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = MockServer::start();
    let corpus = dir.path().join("corpus.jsonl");
    let subset = dir.path().join("subset.jsonl");
    write_records(&corpus, &review_corpus(30));
    let sampled = run(&["sample", "--corpus", p(&corpus), "--out", p(&subset)]);
    if !sampled.status.success() {
        return Err(stderr(&sampled));
    }
    let records = read_corpus(fs::read(&subset).map_err(|e| e.to_string())?.as_slice())
        .map_err(|e| e.to_string())?;
    let protocols = write_protocols(dir.path(), &records);
    let backends = dir.path().join("backends.json");
    write_backend_config(&backends, &server.url, None);
    let cache = dir.path().join("cache.jsonl");

    let screen = |mode: &str, store: &Path| {
        let mut args: Vec<String> = vec![
            "screen".into(),
            "--corpus".into(),
            p(&subset).into(),
            "--backend-config".into(),
            p(&backends).into(),
            "--model".into(),
            "mock".into(),
            "--bias".into(),
            "heavy".into(),
            "--cache-mode".into(),
            mode.into(),
            "--cache".into(),
            p(&cache).into(),
            "--store".into(),
            p(store).into(),
        ];
        for path in &protocols {
            args.push("--protocol".into());
            args.push(p(path).into());
        }
        run(&args.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let recorded = screen("record-replay", &dir.path().join("recorded.jsonl"));
    if !recorded.status.success() {
        return Err(stderr(&recorded));
    }
    let live_hits = server.hits();

    let mut stores = Vec::new();
    let mut reports = Vec::new();
    for name in ["replay-1", "replay-2"] {
        let store = dir.path().join(format!("{name}.jsonl"));
        let out = screen("replay", &store);
        if !out.status.success() {
            return Err(stderr(&out));
        }
        let metrics = dir.path().join(format!("{name}.csv"));
        let eval = run(&[
            "evaluate",
            "--store",
            p(&store),
            "--corpus",
            p(&subset),
            "--per-review",
            "--out",
            p(&metrics),
        ]);
        if !eval.status.success() {
            return Err(stderr(&eval));
        }
        stores.push(fs::read(&store).map_err(|e| e.to_string())?);
        reports.push(fs::read(&metrics).map_err(|e| e.to_string())?);
    }
    let replay_hits = server.hits() - live_hits;
    if stores[0] != stores[1] || reports[0] != reports[1] {
        return Err("replayed stores or metrics differ".into());
    }
    if replay_hits != 0 {
        return Err(format!("{replay_hits} network calls during replay"));
    }
    if live_hits != records.len() as u64 {
        return Err(format!(
            "recording made {live_hits} calls for {} records",
            records.len()
        ));
    }
    Ok(format!(
        "{} records replayed twice, identical stores and metrics, 0 network calls",
        records.len()
    ))
}

fn criterion_11() -> Outcome {
    const DRAFTS: usize = 128_299;
    const NO_ABSTRACT: usize = 8_604;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let ris = dir.path().join("search.ris");
    let mut text = String::with_capacity(DRAFTS * 90);
    for i in 0..DRAFTS {
        text.push_str(&format!(
            "TY  - JOUR\nTI  - Synthetic record number {i}\nPY  - 2019\n"
        ));
        // Spread the abstract-less records through the file.
        if i % 14 != 7 || i / 14 >= NO_ABSTRACT {
            text.push_str("AB  - Methods and results.\n");
        }
        text.push_str("ER  - \n");
    }
    fs::write(&ris, text).map_err(|e| e.to_string())?;
    let protocol = dir.path().join("protocol.json");
    fs::write(
        &protocol,
        r#"{"review_id":"large","review_title":"Large search","inclusion_criteria":["Anything"],"search_year":2020}"#,
    )
    .map_err(|e| e.to_string())?;
    let out = dir.path().join("corpus.jsonl");
    let result = run(&[
        "ingest",
        "--ris",
        p(&ris),
        "--protocol",
        p(&protocol),
        "--out",
        p(&out),
    ]);
    if !result.status.success() {
        return Err(stderr(&result));
    }
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("corpus.jsonl.manifest.json"))
            .map_err(|e| e.to_string())?,
    )
    .map_err(|e| e.to_string())?;
    let summary = &manifest["summary"];
    let (drafts, missing, kept, rate) = (
        summary["drafts"].as_u64(),
        summary["missing_abstract"].as_u64(),
        summary["kept"].as_u64(),
        summary["drop_rate_percent"].as_f64(),
    );
    let corpus = read_corpus(fs::read(&out).map_err(|e| e.to_string())?.as_slice())
        .map_err(|e| e.to_string())?;
    let kept_in_file = corpus.iter().filter(|r| r.is_kept()).count();
    if drafts == Some(DRAFTS as u64)
        && missing == Some(NO_ABSTRACT as u64)
        && kept == Some(119_695)
        && kept_in_file == 119_695
        && rate == Some(6.71)
    {
        Ok(format!(
            "{DRAFTS} drafts, {NO_ABSTRACT} without abstract, 119695 kept, 6.71% dropped"
        ))
    } else {
        Err(format!("summary {summary}, kept in file {kept_in_file}"))
    }
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("1 subset metric arithmetic", criterion_1),
        ("2 subset fixture reproduction", criterion_2),
        ("3 full-scale consistency", criterion_3),
        ("4 balanced subset construction", criterion_4),
        ("5 ensemble dominance properties", criterion_5),
        ("6 parallel ensemble fixture", criterion_6),
        ("7 include-on-failure policy", criterion_7),
        ("8 backoff schedule", criterion_8),
        ("9 kappa oracle and symmetry", criterion_9),
        ("10 replay determinism", criterion_10),
        ("11 cleaning drop rate", criterion_11),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|payload| {
            let message = payload
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| payload.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {message}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {name}: PASS ({detail})"),
            Err(detail) => {
                failed += 1;
                println!("criterion {name}: FAIL ({detail})");
            }
        }
    }
    let _ = panic::take_hook();
    println!("acceptance: {} passed, {failed} failed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
