//! Shared fixtures for the integration tests: synthetic corpora, random
//! worlds, and a mock scoring server.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use bayescoh::backend::{Binding, ModelBackend, ScoreRequest, TabularWorld};
use bayescoh::dataset::{load_dataset_str, Dataset};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

pub const CLASS_ELICITATION: &str = " I pick";
pub const EVIDENCE_ELICITATION: &str = " I saw";

pub fn class_name(category: usize, i: usize) -> String {
    format!(" k{category:02}c{i:03}")
}

pub fn evidence_name(category: usize, j: usize) -> String {
    format!(" k{category:02}x{j:03}")
}

/// Shape of one synthetic category.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub classes: usize,
    pub evidences: usize,
    pub histories: usize,
}

pub const fn shape(classes: usize, evidences: usize, histories: usize) -> Shape {
    Shape {
        classes,
        evidences,
        histories,
    }
}

/// Dataset JSON with one category per shape. Category `k` uses class texts
/// `class_name(k, i)` and evidence texts `evidence_name(k, j)`, so texts
/// never collide across categories.
pub fn grid_json(shapes: &[Shape]) -> String {
    let cats: Vec<_> = shapes
        .iter()
        .enumerate()
        .map(|(k, s)| {
            json!({
                "class_type": format!("category {k}"),
                "conversation_history": (0..s.histories).map(|h| format!("Conversation {h} about topic {k}.")).collect::<Vec<_>>(),
                "candidate_classes": (0..s.classes).map(|i| class_name(k, i)).collect::<Vec<_>>(),
                "class_elicitation": CLASS_ELICITATION,
                "evidence_elicitation": EVIDENCE_ELICITATION,
                "evidence": (0..s.evidences).map(|j| json!({
                    "evidence_text": evidence_name(k, j),
                    "points_to_classes": [class_name(k, j % s.classes)],
                })).collect::<Vec<_>>(),
            })
        })
        .collect();
    serde_json::to_string_pretty(&json!({ "bayesian_reasoning": cats })).unwrap()
}

pub fn grid(shapes: &[Shape]) -> Dataset {
    load_dataset_str(&grid_json(shapes)).unwrap()
}

/// Ten categories totalling 6460 tuples: eight of 5 classes × 20 evidences
/// × 3 histories, one with 5 histories, one with 22 evidences.
pub fn corpus_shapes() -> Vec<Shape> {
    let mut s = vec![shape(5, 20, 3); 8];
    s.push(shape(5, 20, 5));
    s.push(shape(5, 22, 3));
    s
}

/// World over `classes` × `evidences` with random priors and likelihood
/// columns summing to between 0.5 and 0.95.
pub fn random_world(rng: &mut ChaCha8Rng, classes: usize, evidences: usize) -> TabularWorld {
    let mut prior: Vec<f64> = (0..classes).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = prior.iter().sum();
    prior.iter_mut().for_each(|p| *p /= total);
    let mut likelihood = vec![vec![0.0; classes]; evidences];
    for c in 0..classes {
        let raw: Vec<f64> = (0..evidences)
            .map(|_| rng.random_range(0.01..1.0))
            .collect();
        let mass = rng.random_range(0.5..0.95);
        let sum: f64 = raw.iter().sum();
        for (row, r) in likelihood.iter_mut().zip(&raw) {
            row[c] = r / sum * mass;
        }
    }
    TabularWorld::new(
        (0..classes).map(|i| format!("class {i}")).collect(),
        (0..evidences).map(|j| format!("evidence {j}")).collect(),
        prior,
        likelihood,
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Positional binding for a grid dataset onto `world`.
pub fn bind(ds: &Dataset, world: &TabularWorld) -> Binding {
    Binding::positional(ds, world).unwrap()
}

/// World file JSON for `world`.
pub fn write_world(world: &TabularWorld, path: &Path) {
    std::fs::write(
        path,
        serde_json::to_string_pretty(&world.to_file()).unwrap(),
    )
    .unwrap();
}

pub type Handler = dyn Fn(&str, &str) -> (u16, String) + Send + Sync;

/// Minimal HTTP/1.1 server on 127.0.0.1 that answers every request with
/// `handler(path, body)`.
pub struct MockServer {
    pub url: String,
    hits: Arc<AtomicUsize>,
    stop: Arc<AtomicBool>,
    addr: std::net::SocketAddr,
}

impl MockServer {
    pub fn start(handler: Arc<Handler>) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicUsize::new(0));
        let stop = Arc::new(AtomicBool::new(false));
        let (h, s) = (hits.clone(), stop.clone());
        std::thread::spawn(move || {
            for conn in listener.incoming() {
                if s.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(conn) = conn else { continue };
                let (handler, hits) = (handler.clone(), h.clone());
                std::thread::spawn(move || serve(conn, handler, hits));
            }
        });
        Self {
            url: format!("http://{addr}"),
            hits,
            stop,
            addr,
        }
    }

    /// Serve `backend` over the scoring protocol.
    pub fn scoring(backend: Arc<dyn ModelBackend>) -> Self {
        Self::start(Arc::new(move |path, body| {
            if path != "/v1/score" {
                return (404, json!({"error": "not found"}).to_string());
            }
            let req: ScoreRequest = match serde_json::from_str(body) {
                Ok(r) => r,
                Err(e) => return (400, json!({"error": e.to_string()}).to_string()),
            };
            match backend.score(&req) {
                Ok(r) => (200, r.to_json()),
                Err(e) => (422, json!({"error": e.to_string()}).to_string()),
            }
        }))
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
    }
}

fn serve(conn: TcpStream, handler: Arc<Handler>, hits: Arc<AtomicUsize>) {
    let mut reader = BufReader::new(conn.try_clone().unwrap());
    let mut conn = conn;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        let path = request_line
            .split_whitespace()
            .nth(1)
            .unwrap_or("/")
            .to_string();
        let mut content_length = 0usize;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    content_length = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; content_length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        hits.fetch_add(1, Ordering::SeqCst);
        let (status, reply) = handler(&path, &String::from_utf8_lossy(&body));
        let head = format!(
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n",
            reply.len()
        );
        if conn.write_all(head.as_bytes()).is_err() || conn.write_all(reply.as_bytes()).is_err() {
            return;
        }
    }
}
