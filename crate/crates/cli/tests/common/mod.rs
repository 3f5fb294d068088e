//! Shared fixtures for the CLI test targets.
#![allow(dead_code)]

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use screenkit::corpus::write_corpus;
use screenkit::{GroundTruth, Record};

/// Reviews and their included-study counts in the evaluation subset.
pub const REVIEW_INCLUDES: [(&str, usize); 23] = [
    ("bellon", 23),
    ("buchan", 4),
    ("clezar", 31),
    ("cutting", 3),
    ("dopper", 8),
    ("ghoraba", 5),
    ("hjetland", 12),
    ("karkou", 3),
    ("lin", 16),
    ("lynch", 7),
    ("malik", 20),
    ("mohamed", 11),
    ("roy", 28),
    ("santos", 5),
    ("sethawong", 21),
    ("sevaux", 4),
    ("singh1", 17),
    ("singh2", 16),
    ("sulewski", 9),
    ("sulisty", 0),
    ("white", 22),
    ("younis", 2),
    ("zhu", 4),
];

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_screenkit"))
}

pub fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("screenkit runs")
}

pub fn run_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(bin());
    cmd.args(args).env_remove("RUST_LOG");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("screenkit runs")
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

/// A labelled corpus shaped like the evaluation reviews: every review gets
/// its include count of positives and `excludes` negatives. Positives carry
/// an `[inc]` marker in the title that the mock model keys on, except every
/// fifth one, which the model will miss.
pub fn review_corpus(excludes: usize) -> Vec<Record> {
    let mut records = Vec::new();
    for (review, includes) in REVIEW_INCLUDES {
        for i in 0..includes + excludes {
            let positive = i < includes;
            let flagged = if positive { i % 5 != 4 } else { i % 7 == 0 };
            let marker = if flagged { " [inc]" } else { "" };
            records.push(Record {
                record_id: format!("{review}-{:06}", i + 1),
                review_id: review.to_string(),
                title: format!("Study {i} of {review}{marker}"),
                abstract_text: Some(format!("Background and methods of study {i}.")),
                year: Some(2010 + (i % 10) as i32),
                authors: vec![format!("Author {i}")],
                ground_truth: if positive {
                    GroundTruth::IncludedInReview
                } else {
                    GroundTruth::ExcludedFromReview
                },
                drop_reason: None,
            });
        }
    }
    records
}

pub fn write_records(path: &Path, records: &[Record]) {
    let file = File::create(path).unwrap();
    write_corpus(BufWriter::new(file), records).unwrap();
}

/// One protocol file per review in `records`.
pub fn write_protocols(dir: &Path, records: &[Record]) -> Vec<PathBuf> {
    let mut reviews: Vec<&str> = records.iter().map(|r| r.review_id.as_str()).collect();
    reviews.sort_unstable();
    reviews.dedup();
    reviews
        .into_iter()
        .map(|review| {
            let path = dir.join(format!("{review}.protocol.json"));
            let json = serde_json::json!({
                "review_id": review,
                "review_title": format!("Interventions studied in {review}"),
                "inclusion_criteria": ["Randomised controlled trials", "Adult participants"],
                "exclusion_criteria": ["Conference abstracts"],
                "search_year": 2020
            });
            fs::write(&path, serde_json::to_string_pretty(&json).unwrap()).unwrap();
            path
        })
        .collect()
}

pub fn write_backend_config(path: &Path, url: &str, credentials_env_var: Option<&str>) {
    let json = serde_json::json!({
        "backends": [{
            "name": "mock",
            "endpoint_url": url,
            "model_id": "mock-model-0001",
            "credentials_env_var": credentials_env_var,
            "concurrency": 4,
            "request_timeout_secs": 10,
            "retry": {"max_attempts": 2, "base_delay_secs": 0.001, "max_delay_secs": 0.002}
        }]
    });
    fs::write(path, serde_json::to_string_pretty(&json).unwrap()).unwrap();
}

/// Chat-completions stand-in on a local port.
///
/// Prompts containing `[inc]` are answered "Include", prompts containing
/// `[flagged]` get a content-filter refusal, everything else "Exclude".
pub struct MockServer {
    pub url: String,
    pub hits: Arc<AtomicU64>,
    pub auth_headers: Arc<Mutex<Vec<String>>>,
}

impl MockServer {
    pub fn start() -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        let hits = Arc::new(AtomicU64::new(0));
        let auth_headers = Arc::new(Mutex::new(Vec::new()));
        let (h, a) = (hits.clone(), auth_headers.clone());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let (h, a) = (h.clone(), a.clone());
                thread::spawn(move || serve(stream, &h, &a));
            }
        });
        Self {
            url: format!("http://{addr}/v1/chat/completions"),
            hits,
            auth_headers,
        }
    }

    pub fn hits(&self) -> u64 {
        self.hits.load(Ordering::SeqCst)
    }
}

fn serve(stream: TcpStream, hits: &AtomicU64, auth: &Mutex<Vec<String>>) {
    let mut writer = stream.try_clone().unwrap();
    let mut reader = BufReader::new(stream);
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
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
            if let Some((name, value)) = line.split_once(':') {
                if name.eq_ignore_ascii_case("content-length") {
                    content_length = value.trim().parse().unwrap_or(0);
                } else if name.eq_ignore_ascii_case("authorization") {
                    auth.lock().unwrap().push(value.trim().to_string());
                }
            }
        }
        let mut body = vec![0; content_length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        hits.fetch_add(1, Ordering::SeqCst);
        let request: serde_json::Value = serde_json::from_slice(&body).unwrap_or_default();
        let prompt = request["messages"][0]["content"].as_str().unwrap_or("");
        let (status, payload) = if prompt.contains("[flagged]") {
            (
                "400 Bad Request",
                serde_json::json!({"error": {"code": "content_filter", "message": "flagged"}}),
            )
        } else {
            let answer = if prompt.contains("[inc]") {
                "Include"
            } else {
                "Exclude"
            };
            (
                "200 OK",
                serde_json::json!({
                    "choices": [{"message": {"role": "assistant", "content": answer}, "finish_reason": "stop"}]
                }),
            )
        };
        let body = payload.to_string();
        let response = format!(
            "HTTP/1.1 {status}\r\ncontent-type: application/json\r\ncontent-length: {}\r\n\r\n{body}",
            body.len()
        );
        if writer.write_all(response.as_bytes()).is_err() {
            return;
        }
    }
}
