//! Evaluation corpus: one JSON object per line with exactly the keys
//! `id`, `image`, `question` and `reference_answer`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::error::{Error, Result};
use crate::fsutil::{sha256_hex, write_atomic};
use crate::taxonomy::{classify, CategorySet};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestLine {
    id: String,
    image: String,
    question: String,
    reference_answer: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusRecord {
    pub id: String,
    /// Relative path (against the manifest directory), absolute path, or http(s) URL.
    pub image: String,
    pub question: String,
    pub reference_answer: String,
    pub categories: CategorySet,
    /// Set when a local image file was missing at load time.
    pub skippable: bool,
}

impl CorpusRecord {
    pub fn image_is_url(&self) -> bool {
        is_url(&self.image)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorpusManifest {
    pub records: Vec<CorpusRecord>,
    pub source_name: String,
    pub record_limit: Option<usize>,
    /// Directory relative image paths are resolved against.
    pub base_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    pub limit: Option<usize>,
    /// Missing local images become errors instead of warnings.
    pub strict: bool,
}

pub fn load_manifest(path: &Path, limit: Option<usize>) -> Result<CorpusManifest> {
    load_manifest_with(path, LoadOptions { limit, strict: false })
}

pub fn load_manifest_with(path: &Path, opts: LoadOptions) -> Result<CorpusManifest> {
    let file = std::fs::File::open(path)?;
    let base_dir = path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let source_name = path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();

    let bad_line = |line: usize, message: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut records = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        if opts.limit.is_some_and(|n| records.len() >= n) {
            break;
        }
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: ManifestLine =
            serde_json::from_str(&line).map_err(|e| bad_line(lineno, e.to_string()))?;
        if raw.id.trim().is_empty() {
            return Err(bad_line(lineno, "empty id".into()));
        }
        if raw.question.trim().is_empty() {
            return Err(bad_line(lineno, "empty question".into()));
        }
        if raw.reference_answer.trim().is_empty() {
            return Err(bad_line(lineno, "empty reference_answer".into()));
        }
        if raw.image.trim().is_empty() {
            return Err(bad_line(lineno, "empty image reference".into()));
        }
        if let Some(&first_line) = seen.get(&raw.id) {
            return Err(Error::DuplicateId {
                id: raw.id,
                first_line,
                second_line: lineno,
            });
        }
        seen.insert(raw.id.clone(), lineno);

        let categories = classify(&raw.question)?;
        let skippable = !is_url(&raw.image) && !resolve_path(&base_dir, &raw.image).exists();
        if skippable {
            if opts.strict {
                return Err(Error::MissingImage(raw.image));
            }
            warn!(record = %raw.id, image = %raw.image, "image file not found; record will be skipped");
        }
        records.push(CorpusRecord {
            id: raw.id,
            image: raw.image,
            question: raw.question,
            reference_answer: raw.reference_answer,
            categories,
            skippable,
        });
    }

    Ok(CorpusManifest {
        records,
        source_name,
        record_limit: opts.limit,
        base_dir,
    })
}

impl CorpusManifest {
    /// Serializes the records back into manifest lines.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            let line = ManifestLine {
                id: r.id.clone(),
                image: r.image.clone(),
                question: r.question.clone(),
                reference_answer: r.reference_answer.clone(),
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn image_path(&self, record: &CorpusRecord) -> PathBuf {
        resolve_path(&self.base_dir, &record.image)
    }
}

fn is_url(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://")
}

fn resolve_path(base: &Path, image: &str) -> PathBuf {
    let p = Path::new(image);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads record images from disk or over HTTP. Downloads are cached under
/// `cache_dir/images/` keyed by the SHA-256 of the URL.
#[derive(Clone, Debug)]
pub struct ImageFetcher {
    cache_dir: PathBuf,
}

impl ImageFetcher {
    pub fn new(cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            cache_dir: cache_dir.into(),
        }
    }

    pub fn url_cache_path(&self, url: &str) -> PathBuf {
        self.cache_dir
            .join("images")
            .join(sha256_hex(url.as_bytes()))
    }

    pub fn fetch(&self, manifest: &CorpusManifest, record: &CorpusRecord) -> Result<Vec<u8>> {
        if !record.image_is_url() {
            let path = manifest.image_path(record);
            return std::fs::read(&path).map_err(|e| match e.kind() {
                std::io::ErrorKind::NotFound => Error::MissingImage(path.display().to_string()),
                _ => Error::Io(e),
            });
        }
        let cached = self.url_cache_path(&record.image);
        if let Ok(bytes) = std::fs::read(&cached) {
            return Ok(bytes);
        }
        let resp = ureq::get(&record.image)
            .call()
            .map_err(|e| Error::MissingImage(format!("{}: {e}", record.image)))?;
        let mut bytes = Vec::new();
        std::io::Read::read_to_end(&mut resp.into_reader(), &mut bytes)?;
        write_atomic(&cached, &bytes)?;
        Ok(bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taxonomy::QuestionCategory;
    use std::io::Write;

    fn write_manifest(dir: &Path, lines: &[&str]) -> PathBuf {
        let path = dir.join("manifest.jsonl");
        let mut f = std::fs::File::create(&path).unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        path
    }

    fn line(id: &str, image: &str, q: &str) -> String {
        serde_json::json!({"id": id, "image": image, "question": q, "reference_answer": "It is red."})
            .to_string()
    }

    fn touch(dir: &Path, name: &str) {
        std::fs::write(dir.join(name), b"x").unwrap();
    }

    #[test]
    fn limit_truncates_from_front() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.png");
        let lines = [
            line("q1", "a.png", "What is this?"),
            line("q2", "a.png", "How many cats?"),
            line("q3", "a.png", "What color is it?"),
        ];
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let path = write_manifest(dir.path(), &refs);
        let m = load_manifest(&path, Some(2)).unwrap();
        assert_eq!(m.records.len(), 2);
        assert_eq!(m.records[0].id, "q1");
        assert_eq!(m.records[1].id, "q2");
        assert_eq!(m.record_limit, Some(2));
        assert!(m.records[1].categories.contains(QuestionCategory::Quantity));
    }

    #[test]
    fn duplicate_id_names_both_lines() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.png");
        let lines = [
            line("q7", "a.png", "What is this?"),
            String::new(),
            line("q7", "a.png", "What is that?"),
        ];
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let err = load_manifest(&write_manifest(dir.path(), &refs), None).unwrap_err();
        match err {
            Error::DuplicateId {
                id,
                first_line,
                second_line,
            } => assert_eq!((id.as_str(), first_line, second_line), ("q7", 1, 3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.png");
        let good = line("q1", "a.png", "What?");
        let path = write_manifest(dir.path(), &[&good, "{not json"]);
        match load_manifest(&path, None).unwrap_err() {
            Error::Manifest { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_or_missing_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let extra = r#"{"id":"a","image":"x.png","question":"q?","reference_answer":"r","extra":1}"#;
        let missing = r#"{"id":"a","image":"x.png","question":"q?"}"#;
        for l in [extra, missing] {
            let path = write_manifest(dir.path(), &[l]);
            assert!(matches!(load_manifest(&path, None), Err(Error::Manifest { line: 1, .. })));
        }
    }

    #[test]
    fn missing_image_warns_or_fails_in_strict_mode() {
        let dir = tempfile::tempdir().unwrap();
        let l = line("q1", "nope.png", "What is this?");
        let path = write_manifest(dir.path(), &[&l]);
        let m = load_manifest(&path, None).unwrap();
        assert!(m.records[0].skippable);
        let strict = load_manifest_with(&path, LoadOptions { limit: None, strict: true });
        assert!(matches!(strict, Err(Error::MissingImage(_))));
    }

    #[test]
    fn urls_are_not_checked_at_load() {
        let dir = tempfile::tempdir().unwrap();
        let l = line("q1", "https://example.invalid/img.png", "What is this?");
        let m = load_manifest(&write_manifest(dir.path(), &[&l]), None).unwrap();
        assert!(!m.records[0].skippable);
        assert!(m.records[0].image_is_url());
    }

    #[test]
    fn serialize_then_reload_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        touch(dir.path(), "a.png");
        let lines = [
            line("q1", "a.png", "What color is the \"hose\"?"),
            line("q2", "a.png", "How many buttons are there? ünïcode"),
        ];
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        let path = write_manifest(dir.path(), &refs);
        let first = load_manifest(&path, None).unwrap();
        std::fs::write(&path, first.to_jsonl().unwrap()).unwrap();
        let second = load_manifest(&path, None).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn cached_url_images_are_served_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let l = line("q1", "http://127.0.0.1:9/never.png", "What?");
        let m = load_manifest(&write_manifest(dir.path(), &[&l]), None).unwrap();
        let fetcher = ImageFetcher::new(dir.path().join("cache"));
        let cached = fetcher.url_cache_path(&m.records[0].image);
        write_atomic(&cached, b"cached bytes").unwrap();
        assert_eq!(fetcher.fetch(&m, &m.records[0]).unwrap(), b"cached bytes");
    }
}
