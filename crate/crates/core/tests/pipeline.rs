mod common;

use bayescoh::assembly::{
    read_csv, read_jsonl, score_tuples, write_csv, write_jsonl, AssemblyPolicy, FailMode,
    ScoreOptions,
};
use bayescoh::backend::{tabular_oracle, BackendError, ModelBackend, ScoreRequest, ScoreResult};
use bayescoh::metrics::compute_report;
use common::{bind, class_name, grid, random_world, rng, shape};

/// Delegates to an inner backend but refuses any request whose continuation
/// is `poisoned`.
struct Refusing<B> {
    inner: B,
    poisoned: String,
}

impl<B: ModelBackend> ModelBackend for Refusing<B> {
    fn id(&self) -> &str {
        "refusing"
    }

    fn score(&self, request: &ScoreRequest) -> Result<ScoreResult, BackendError> {
        if request.continuation == self.poisoned {
            return Err(BackendError::Tokenization(format!(
                "refused {:?}",
                request.continuation
            )));
        }
        self.inner.score(request)
    }
}

#[test]
fn skip_mode_drops_only_affected_tuples() {
    let ds = grid(&[shape(5, 10, 3)]);
    let world = random_world(&mut rng(12), 5, 10);
    let oracle = tabular_oracle(world.clone(), bind(&ds, &world)).unwrap();
    let backend = Refusing {
        inner: oracle,
        poisoned: class_name(0, 4),
    };

    let fast = score_tuples(&ds, &backend, &ScoreOptions::default());
    assert!(matches!(
        fast.unwrap_err().backend_error(),
        Some(BackendError::Tokenization(_))
    ));

    let opts = ScoreOptions {
        fail_mode: FailMode::Skip,
        ..ScoreOptions::default()
    };
    let run = score_tuples(&ds, &backend, &opts).unwrap();
    // 4 of the 10 class pairs involve the refused class
    assert_eq!(run.skipped.len(), 4 * 10 * 3);
    assert_eq!(run.records.len(), 6 * 10 * 3);
    assert!(run
        .records
        .iter()
        .all(|r| r.c1 != backend.poisoned && r.c2 != backend.poisoned));
    let report = compute_report(&run.records).unwrap();
    assert!((report.bcc.unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn records_round_trip_through_jsonl_and_csv() {
    let ds = grid(&[shape(5, 6, 3)]);
    let world = random_world(&mut rng(13), 5, 6);
    let oracle = tabular_oracle(world.clone(), bind(&ds, &world)).unwrap();
    let records = score_tuples(&ds, &oracle, &ScoreOptions::default())
        .unwrap()
        .records;
    assert!(records.iter().all(|r| r.invariants_hold()));

    let dir = tempfile::tempdir().unwrap();
    let jsonl = dir.path().join("t.jsonl");
    write_jsonl(&records, std::fs::File::create(&jsonl).unwrap()).unwrap();
    assert_eq!(read_jsonl(&jsonl).unwrap(), records);
    let csv = dir.path().join("t.csv");
    write_csv(&records, std::fs::File::create(&csv).unwrap()).unwrap();
    assert_eq!(read_csv(&csv).unwrap(), records);
}

#[test]
fn policy_without_history_keeps_oracle_coherent() {
    let ds = grid(&[shape(5, 6, 3)]);
    let world = random_world(&mut rng(14), 5, 6);
    let oracle = tabular_oracle(world.clone(), bind(&ds, &world)).unwrap();
    let policy = AssemblyPolicy::parse("prior=ce;likelihood=ce+c+ee;posterior=ee+e+ce").unwrap();
    assert_ne!(policy.id(), "standard");
    let opts = ScoreOptions {
        policy,
        ..ScoreOptions::default()
    };
    let run = score_tuples(&ds, &oracle, &opts).unwrap();
    let standard = score_tuples(&ds, &oracle, &ScoreOptions::default()).unwrap();
    // histories are invisible to the oracle, so only the request count changes
    assert!(run.unique_requests < standard.unique_requests);
    let report = compute_report(&run.records).unwrap();
    assert!((report.bcc.unwrap() - 1.0).abs() < 1e-9);
    assert!((report.update_gradient.unwrap() - 1.0).abs() < 1e-9);
}
