#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vqa_prefilter::ensemble::VariantScoreTriple;
use vqa_prefilter::imaging::codec;
use vqa_prefilter::taxonomy::{CategorySet, QuestionCategory};
use vqa_prefilter::ImageBuffer;

pub const QUESTIONS: [(&str, &str); 8] = [
    ("What color is the hose on the astronaut?", "The hose is black."),
    ("How many buttons are there on the kitten's sweater?", "There are three buttons on the kitten's sweater"),
    ("What is the man holding?", "He is holding a sword."),
    ("How many total jellyfish are in this image?", "There are two jellyfish pictured."),
    ("Is the light on?", "Yes, the light is on."),
    ("Which colour is the bus?", "The bus is red."),
    ("Where is the cat sitting?", "The cat is on the sofa."),
    ("Does the woman wear glasses?", "No, she does not."),
];

pub fn noise_image(rng: &mut impl Rng, width: usize, height: usize) -> ImageBuffer {
    ImageBuffer::from_fn(width, height, |_, _, _| rng.gen()).unwrap()
}

/// Writes `n` records with small random PNGs and returns the manifest path.
pub fn write_corpus(dir: &Path, n: usize, seed: u64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let images = dir.join("images");
    std::fs::create_dir_all(&images).unwrap();
    let mut lines = String::new();
    for i in 0..n {
        let (w, h) = (rng.gen_range(1..24), rng.gen_range(1..24));
        let img = noise_image(&mut rng, w, h);
        let name = format!("img{i:04}.png");
        std::fs::write(images.join(&name), codec::encode_png(&img).unwrap()).unwrap();
        let (q, a) = QUESTIONS[i % QUESTIONS.len()];
        let line = serde_json::json!({
            "id": format!("r{i:04}"),
            "image": format!("images/{name}"),
            "question": q,
            "reference_answer": a,
        });
        lines.push_str(&line.to_string());
        lines.push('\n');
    }
    let path = dir.join("manifest.jsonl");
    std::fs::write(&path, lines).unwrap();
    path
}

pub fn read_all(dir: &Path, names: &[&str]) -> Vec<(String, Vec<u8>)> {
    names
        .iter()
        .map(|n| (n.to_string(), std::fs::read(dir.join(n)).unwrap()))
        .collect()
}

/// Strict-winner counts the win-count fixture is built to: EE, NR, ORG.
pub const WINNER_COUNTS: (usize, usize, usize) = (260, 311, 290);

/// 1000 triples with exactly [`WINNER_COUNTS`] strict winners, the
/// remainder all-equal ties. Within each winner block the order of the two
/// losers is split so that NR < ORG holds 448 times and NR < EE 497 times.
///
/// Scores: winner in [0.05, 0.15], runner-up in [0.5, 0.7], last in [0.85, 0.95].
pub fn win_count_fixture(seed: u64) -> (Vec<VariantScoreTriple>, Vec<CategorySet>) {
    use QuestionCategory::*;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (org rank, ee rank, nr rank, count); rank 0 wins.
    let blocks: [([u8; 3], usize); 7] = [
        ([2, 0, 1], 137), // EE < NR < ORG
        ([1, 0, 2], 123), // EE < ORG < NR
        ([2, 1, 0], 155), // NR < EE < ORG
        ([1, 2, 0], 156), // NR < ORG < EE
        ([0, 2, 1], 186), // ORG < NR < EE
        ([0, 1, 2], 104), // ORG < EE < NR
        ([0, 0, 0], 139), // all equal
    ];
    let mut rows: Vec<[f64; 3]> = Vec::new();
    for (ranks, count) in blocks {
        for _ in 0..count {
            if ranks == [0, 0, 0] {
                let v = rng.gen_range(0.3..0.7);
                rows.push([v, v, v]);
                continue;
            }
            let mut row = [0.0; 3];
            for (slot, r) in row.iter_mut().zip(ranks) {
                *slot = match r {
                    0 => rng.gen_range(0.05..0.15),
                    1 => rng.gen_range(0.5..0.7),
                    _ => rng.gen_range(0.85..0.95),
                };
            }
            rows.push(row);
        }
    }
    rows.shuffle(&mut rng);
    let groups: [&[QuestionCategory]; 5] = [
        &[ObjectIdentification],
        &[Quantity],
        &[Color],
        &[ObjectIdentification, Color],
        &[Other],
    ];
    let triples = rows
        .iter()
        .enumerate()
        .map(|(i, [o, e, n])| VariantScoreTriple::new(format!("t{i:04}"), *o, *e, *n))
        .collect();
    let cats = (0..rows.len())
        .map(|_| CategorySet::from_iter(groups[rng.gen_range(0..groups.len())].iter().copied()))
        .collect();
    (triples, cats)
}

/// A recorded HTTP request.
#[derive(Clone, Debug)]
pub struct Seen {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl Seen {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).unwrap()
    }
}

/// One-thread HTTP/1.1 server answering every request with `handler`.
pub struct TestServer {
    pub url: String,
    pub seen: Arc<Mutex<Vec<Seen>>>,
    _thread: JoinHandle<()>,
}

impl TestServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(usize, &Seen) -> (u16, String) + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&seen);
        let thread = std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                let Some(req) = read_request(&stream) else { continue };
                let n = {
                    let mut log = log.lock().unwrap();
                    log.push(req.clone());
                    log.len() - 1
                };
                let (status, body) = handler(n, &req);
                let _ = write_response(stream, status, &body);
            }
        });
        Self {
            url,
            seen,
            _thread: thread,
        }
    }

    pub fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

fn read_request(stream: &TcpStream) -> Option<Seen> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    let mut parts = line.split_whitespace();
    let method = parts.next()?.to_string();
    let path = parts.next()?.to_string();
    let mut headers = Vec::new();
    loop {
        let mut h = String::new();
        reader.read_line(&mut h).ok()?;
        let h = h.trim_end();
        if h.is_empty() {
            break;
        }
        let (k, v) = h.split_once(':')?;
        headers.push((k.trim().to_string(), v.trim().to_string()));
    }
    let len = headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.parse::<usize>().ok())
        .unwrap_or(0);
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body).ok()?;
    Some(Seen {
        method,
        path,
        headers,
        body: String::from_utf8_lossy(&body).into_owned(),
    })
}

fn write_response(mut stream: TcpStream, status: u16, body: &str) -> std::io::Result<()> {
    write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    )?;
    stream.flush()
}
