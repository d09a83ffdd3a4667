//! Context assembly and the scoring pipeline.
//!
//! Every tuple (c1, c2, x, h, k) needs six scores: the prior, likelihood, and
//! posterior of each class. Contexts are plain concatenations of dataset
//! strings; nothing is inserted between segments, so datasets carry their own
//! leading spaces.

mod policy;
mod records;

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{score, BackendError, ModelBackend, ScoreRequest};
use crate::dataset::{Category, ClassLabel, Dataset, Evidence, TupleIndex};

pub use policy::{AssemblyPolicy, Segment};
pub use records::{read_csv, read_jsonl, to_jsonl, write_csv, write_jsonl, TupleRecord};

#[derive(Debug, Error)]
pub enum AssemblyError {
    #[error("tuple {coords}: {source}")]
    Tuple {
        coords: Box<TupleCoords>,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("invalid options: {0}")]
    Options(String),
    #[error("invalid assembly policy: {0}")]
    Policy(String),
    #[error("{path}: {message}")]
    Records { path: String, message: String },
}

impl AssemblyError {
    /// The backend error underneath, if any.
    pub fn backend_error(&self) -> Option<&BackendError> {
        match self {
            AssemblyError::Tuple { source, .. } => Some(source),
            AssemblyError::Backend(e) => Some(e),
            _ => None,
        }
    }
}

/// Human-readable tuple coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleCoords {
    pub category: String,
    pub c1: String,
    pub c2: String,
    pub evidence: String,
    pub history: usize,
}

impl TupleCoords {
    pub fn of(dataset: &Dataset, t: &TupleIndex) -> Self {
        let cat = &dataset.categories[t.category];
        Self {
            category: cat.name.clone(),
            c1: cat.classes[t.c1].text().to_string(),
            c2: cat.classes[t.c2].text().to_string(),
            evidence: cat.evidences[t.evidence].text.clone(),
            history: t.history,
        }
    }
}

impl std::fmt::Display for TupleCoords {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "(category {:?}, c1 {:?}, c2 {:?}, evidence {:?}, history {})",
            self.category, self.c1, self.c2, self.evidence, self.history
        )
    }
}

/// The three scoring requests for one (class, evidence, history) triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextTriple {
    pub prior_context: String,
    pub prior_continuation: String,
    pub likelihood_context: String,
    pub likelihood_continuation: String,
    pub posterior_context: String,
    pub posterior_continuation: String,
}

/// Contexts under the standard policy:
///
/// ```text
/// prior      = history + class_elicitation                                   → class
/// likelihood = history + class_elicitation + class + evidence_elicitation    → evidence
/// posterior  = history + evidence_elicitation + evidence + class_elicitation → class
/// ```
pub fn build_contexts(
    category: &Category,
    class: &ClassLabel,
    evidence: &Evidence,
    history: &str,
) -> ContextTriple {
    AssemblyPolicy::standard().contexts(category, class, evidence, history)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FailMode {
    /// Abort on the first failing tuple.
    #[default]
    Fast,
    /// Drop failing tuples and list them in the run.
    Skip,
}

impl std::str::FromStr for FailMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fast" => Ok(FailMode::Fast),
            "skip" => Ok(FailMode::Skip),
            other => Err(format!(
                "unknown fail mode {other:?} (expected fast or skip)"
            )),
        }
    }
}

impl std::fmt::Display for FailMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FailMode::Fast => "fast",
            FailMode::Skip => "skip",
        })
    }
}

#[derive(Debug, Clone)]
pub struct ScoreOptions {
    pub temperature: f64,
    pub policy: AssemblyPolicy,
    /// Maximum number of requests in flight.
    pub concurrency: usize,
    pub fail_mode: FailMode,
    /// Shuffle the order in which requests are issued. Recorded values do
    /// not depend on it.
    pub shuffle_seed: Option<u64>,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            policy: AssemblyPolicy::standard(),
            concurrency: 8,
            fail_mode: FailMode::Fast,
            shuffle_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedTuple {
    #[serde(flatten)]
    pub coords: TupleCoords,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRun {
    /// One record per scored tuple, in enumeration order.
    pub records: Vec<TupleRecord>,
    pub skipped: Vec<SkippedTuple>,
    pub tuple_count: usize,
    /// Distinct (context, continuation) requests sent to the backend.
    pub unique_requests: usize,
}

/// Indices into the deduplicated request table for one tuple.
struct TuplePlan {
    prior: [usize; 2],
    likelihood: [usize; 2],
    posterior: [usize; 2],
}

impl TuplePlan {
    fn requests(&self) -> [usize; 6] {
        [
            self.prior[0],
            self.prior[1],
            self.likelihood[0],
            self.likelihood[1],
            self.posterior[0],
            self.posterior[1],
        ]
    }
}

#[derive(Default)]
struct RequestTable {
    requests: Vec<(String, String)>,
    index: HashMap<(String, String), usize>,
}

impl RequestTable {
    fn intern(&mut self, context: String, continuation: String) -> usize {
        let key = (context, continuation);
        if let Some(&i) = self.index.get(&key) {
            return i;
        }
        let i = self.requests.len();
        self.requests.push(key.clone());
        self.index.insert(key, i);
        i
    }
}

/// Score every tuple of `dataset` on `backend`.
///
/// Identical (context, continuation) pairs are requested once. Requests run
/// on a pool of `options.concurrency` threads; records are assembled in
/// enumeration order afterwards, so completion order never shows in the
/// output.
pub fn score_tuples<B: ModelBackend + ?Sized>(
    dataset: &Dataset,
    backend: &B,
    options: &ScoreOptions,
) -> Result<ScoreRun, AssemblyError> {
    if options.concurrency == 0 {
        return Err(AssemblyError::Options(
            "concurrency must be at least 1".into(),
        ));
    }
    if !(options.temperature > 0.0 && options.temperature.is_finite()) {
        return Err(AssemblyError::Options(format!(
            "temperature must be positive and finite, got {}",
            options.temperature
        )));
    }
    if !backend.supports_temperature(options.temperature) {
        return Err(AssemblyError::Backend(
            BackendError::UnsupportedTemperature {
                backend: backend.id().to_string(),
                temperature: options.temperature,
            },
        ));
    }

    let tuples = dataset.enumerate_tuples();
    let mut table = RequestTable::default();
    let plans: Vec<TuplePlan> = tuples
        .iter()
        .map(|t| {
            let cat = &dataset.categories[t.category];
            let ev = &cat.evidences[t.evidence];
            let history = &cat.histories[t.history];
            let mut one = |class: usize| {
                let ctx = options
                    .policy
                    .contexts(cat, &cat.classes[class], ev, history);
                (
                    table.intern(ctx.prior_context, ctx.prior_continuation),
                    table.intern(ctx.likelihood_context, ctx.likelihood_continuation),
                    table.intern(ctx.posterior_context, ctx.posterior_continuation),
                )
            };
            let (p1, l1, q1) = one(t.c1);
            let (p2, l2, q2) = one(t.c2);
            TuplePlan {
                prior: [p1, p2],
                likelihood: [l1, l2],
                posterior: [q1, q2],
            }
        })
        .collect();

    let mut order: Vec<usize> = (0..table.requests.len()).collect();
    if let Some(seed) = options.shuffle_seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }

    let stop = AtomicBool::new(false);
    let issued = AtomicU64::new(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.concurrency)
        .build()
        .map_err(|e| AssemblyError::Options(format!("cannot start worker pool: {e}")))?;
    let fail_fast = options.fail_mode == FailMode::Fast;
    let mut results: Vec<Option<Result<f64, BackendError>>> = vec![None; table.requests.len()];
    let scored: Vec<(usize, Option<Result<f64, BackendError>>)> = pool.install(|| {
        order
            .par_iter()
            .with_max_len(1)
            .map(|&i| {
                if fail_fast && stop.load(Ordering::Relaxed) {
                    return (i, None);
                }
                issued.fetch_add(1, Ordering::Relaxed);
                let (context, continuation) = &table.requests[i];
                let req =
                    ScoreRequest::new(context.as_str(), continuation.as_str(), options.temperature);
                let r = score(backend, &req).map(|s| s.cumulative);
                if r.is_err() {
                    stop.store(true, Ordering::Relaxed);
                }
                (i, Some(r))
            })
            .collect()
    });
    for (i, r) in scored {
        results[i] = r;
    }
    log::debug!(
        "{}: {} unique requests, {} issued",
        backend.id(),
        table.requests.len(),
        issued.load(Ordering::Relaxed)
    );

    let mut records = Vec::with_capacity(tuples.len());
    let mut skipped = Vec::new();
    for (t, plan) in tuples.iter().zip(&plans) {
        let failure = plan.requests().iter().find_map(|&i| match &results[i] {
            Some(Err(e)) => Some(e.clone()),
            _ => None,
        });
        if let Some(err) = failure {
            let coords = TupleCoords::of(dataset, t);
            match options.fail_mode {
                FailMode::Fast => {
                    return Err(AssemblyError::Tuple {
                        coords: Box::new(coords),
                        source: err,
                    })
                }
                FailMode::Skip => {
                    log::warn!("skipping tuple {coords}: {err}");
                    skipped.push(SkippedTuple {
                        coords,
                        error: err.to_string(),
                    });
                    continue;
                }
            }
        }
        let get = |i: usize| match &results[i] {
            Some(Ok(v)) => Some(*v),
            _ => None,
        };
        let values: Option<Vec<f64>> = plan.requests().iter().map(|&i| get(i)).collect();
        let Some(v) = values else {
            // fail-fast halted before this tuple's requests ran; a later
            // tuple carries the error that caused the halt
            continue;
        };
        let coords = TupleCoords::of(dataset, t);
        records.push(TupleRecord::from_scores(
            coords,
            [v[0], v[1]],
            [v[2], v[3]],
            [v[4], v[5]],
        ));
    }
    Ok(ScoreRun {
        records,
        skipped,
        tuple_count: tuples.len(),
        unique_requests: table.requests.len(),
    })
}

/// Metadata written next to `tuples.jsonl`. The timestamp is the only field
/// that changes between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub dataset_path: String,
    pub dataset_hash: String,
    pub backend_id: String,
    pub temperature: f64,
    pub assembly_policy: String,
    pub fail_mode: FailMode,
    pub tuple_count: usize,
    pub record_count: usize,
    pub skipped_count: usize,
    pub skipped: Vec<SkippedTuple>,
    pub unique_requests: usize,
    pub logical_scores: usize,
    pub created_unix_ms: u128,
}

impl RunManifest {
    pub fn new(
        dataset: &Dataset,
        backend_id: &str,
        options: &ScoreOptions,
        run: &ScoreRun,
    ) -> Self {
        let created_unix_ms = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_path: dataset.source_path.clone(),
            dataset_hash: dataset.content_hash(),
            backend_id: backend_id.to_string(),
            temperature: options.temperature,
            assembly_policy: options.policy.id().to_string(),
            fail_mode: options.fail_mode,
            tuple_count: run.tuple_count,
            record_count: run.records.len(),
            skipped_count: run.skipped.len(),
            skipped: run.skipped.clone(),
            unique_requests: run.unique_requests,
            logical_scores: 6 * run.tuple_count,
            created_unix_ms,
        }
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}
