use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, Retrieved};
use crate::backends::{check_batch, cosine, embed_one, Embedder, EmbeddingVector, EMBED_BATCH_SIZE};
use crate::error::{Error, Result};
use crate::types::{BackendDescriptor, Document};

const MAGIC: &[u8; 8] = b"RAGXIDX1";

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub document: Document,
    pub vector: EmbeddingVector,
}

/// Flat in-memory index searched exhaustively by cosine similarity.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    pub embedder: BackendDescriptor,
    dimension: usize,
    entries: Vec<IndexEntry>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    version: u32,
    embedder: BackendDescriptor,
    dimension: usize,
    documents: Vec<Document>,
}

pub async fn build_index(corpus: &Corpus, embedder: &dyn Embedder) -> Result<VectorIndex> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let mut entries = Vec::with_capacity(corpus.len());
    for chunk in corpus.documents().chunks(EMBED_BATCH_SIZE) {
        let texts: Vec<String> = chunk.iter().map(|d| d.text.clone()).collect();
        let vectors = embedder.embed(&texts).await?;
        check_batch(&vectors, texts.len())?;
        entries.extend(chunk.iter().cloned().zip(vectors).map(|(document, vector)| IndexEntry { document, vector }));
    }
    let dimension = entries[0].vector.dimension();
    if let Some(bad) = entries.iter().find(|e| e.vector.dimension() != dimension) {
        return Err(Error::BackendProtocol(format!(
            "document `{}` embedded with dimension {}, expected {dimension}",
            bad.document.id,
            bad.vector.dimension()
        )));
    }
    Ok(VectorIndex {
        embedder: embedder.descriptor(),
        dimension,
        entries,
    })
}

impl VectorIndex {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn corpus(&self) -> Corpus {
        Corpus::new(self.entries.iter().map(|e| e.document.clone()).collect())
            .expect("index ids are unique")
    }

    pub fn document(&self, id: &str) -> Option<&Document> {
        self.entries.iter().map(|e| &e.document).find(|d| d.id == id)
    }

    /// Top-k documents by cosine to `question`, ties broken by id.
    pub async fn search(&self, embedder: &dyn Embedder, question: &str, k: usize) -> Result<Vec<Retrieved>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let query = embed_one(embedder, question).await?;
        self.search_vector(&query, k)
    }

    pub fn search_vector(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Retrieved>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let mut scored = self
            .entries
            .iter()
            .map(|e| Ok((cosine(query, &e.vector)?, &e.document)))
            .collect::<Result<Vec<_>>>()?;
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(score, doc)| Retrieved {
                doc: doc.clone(),
                score,
            })
            .collect())
    }

    /// Write the index: magic, u64 LE header length, JSON header, then the
    /// vectors as row-major little-endian f32.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = serde_json::to_vec(&Header {
            version: 1,
            embedder: self.embedder.clone(),
            dimension: self.dimension,
            documents: self.entries.iter().map(|e| e.document.clone()).collect(),
        })?;
        let mut buf = Vec::with_capacity(16 + header.len() + 4 * self.dimension * self.entries.len());
        buf.write_all(MAGIC)?;
        buf.write_all(&(header.len() as u64).to_le_bytes())?;
        buf.write_all(&header)?;
        for entry in &self.entries {
            for v in entry.vector.values() {
                buf.write_all(&(*v as f32).to_le_bytes())?;
            }
        }
        fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(Error::IndexFormat("missing magic".into()));
        }
        let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = bytes
            .get(16..16 + header_len)
            .ok_or_else(|| Error::IndexFormat("truncated header".into()))?;
        let header: Header = serde_json::from_slice(body)?;
        if header.version != 1 {
            return Err(Error::IndexFormat(format!("unsupported version {}", header.version)));
        }
        let floats = &bytes[16 + header_len..];
        let expected = 4 * header.dimension * header.documents.len();
        if floats.len() != expected {
            return Err(Error::IndexFormat(format!("expected {expected} vector bytes, found {}", floats.len())));
        }
        let mut entries = Vec::with_capacity(header.documents.len());
        let row = 4 * header.dimension;
        for (i, document) in header.documents.into_iter().enumerate() {
            let values = floats[i * row..(i + 1) * row]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
                .collect();
            entries.push(IndexEntry {
                document,
                vector: EmbeddingVector::normalized(values)?,
            });
        }
        Ok(VectorIndex {
            embedder: header.embedder,
            dimension: header.dimension,
            entries,
        })
    }
}
