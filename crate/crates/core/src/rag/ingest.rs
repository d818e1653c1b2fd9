use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use walkdir::WalkDir;

use super::Corpus;
use crate::error::{Error, Result};
use crate::types::Document;

#[derive(Deserialize)]
struct JsonlDocument {
    id: String,
    text: String,
    #[serde(default)]
    metadata: std::collections::BTreeMap<String, String>,
}

/// Load a corpus from a `.txt`/`.jsonl` file or a directory of them.
///
/// Text files become one document each, keyed by their path relative to
/// `path`. JSONL files contribute one document per non-blank line. The
/// result is ordered by id.
pub fn ingest(path: &Path) -> Result<Corpus> {
    if !path.exists() {
        return Err(ingest_err(path, "path does not exist"));
    }
    let mut documents = Vec::new();
    if path.is_file() {
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        read_file(path, &name, &mut documents)?;
    } else {
        for entry in WalkDir::new(path).sort_by_file_name() {
            let entry = entry.map_err(|e| ingest_err(path, &e.to_string()))?;
            if !entry.file_type().is_file() {
                continue;
            }
            let rel = entry
                .path()
                .strip_prefix(path)
                .expect("walkdir yields children of root")
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            read_file(entry.path(), &rel, &mut documents)?;
        }
    }
    documents.sort_by(|a, b| a.id.cmp(&b.id));
    if let Some(pair) = documents.windows(2).find(|w| w[0].id == w[1].id) {
        return Err(Error::DuplicateId(pair[0].id.clone()));
    }
    Corpus::new(documents)
}

fn read_file(path: &Path, rel: &str, out: &mut Vec<Document>) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("txt") => {
            let text = fs::read_to_string(path).map_err(|e| ingest_err(path, &e.to_string()))?;
            let title = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let doc = Document::new(rel, text.trim_end())
                .map_err(|_| ingest_err(path, "empty document"))?
                .with_metadata("source", rel)
                .with_metadata("title", title);
            out.push(doc);
        }
        Some("jsonl") => {
            let raw = fs::read_to_string(path).map_err(|e| ingest_err(path, &e.to_string()))?;
            for (lineno, line) in raw.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let rec: JsonlDocument = serde_json::from_str(line)
                    .map_err(|e| ingest_err(path, &format!("line {}: {e}", lineno + 1)))?;
                let mut doc = Document::new(rec.id, rec.text)
                    .map_err(|_| ingest_err(path, &format!("line {}: empty text", lineno + 1)))?;
                doc.metadata = rec.metadata;
                doc.metadata.entry("source".into()).or_insert_with(|| rel.to_string());
                out.push(doc);
            }
        }
        _ => {}
    }
    Ok(())
}

fn ingest_err(path: &Path, reason: &str) -> Error {
    Error::Ingest {
        path: PathBuf::from(path),
        reason: reason.to_string(),
    }
}
