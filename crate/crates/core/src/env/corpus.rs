use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader, Read};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{normalize_whitespace, tokenize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    #[serde(rename = "rel", default, skip_serializing_if = "Option::is_none")]
    pub judged_relevance: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    Jsonl,
    TrecText,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("duplicate doc_id \"{0}\"")]
    DuplicateId(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("read error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    /// Index into the id-sorted document table.
    pub doc: usize,
    pub tf: u32,
}

/// Immutable inverted index over document bodies.
#[derive(Debug, Clone)]
pub struct CorpusIndex {
    /// Sorted by `doc_id`, so index order doubles as the id tie-break order.
    documents: Vec<Document>,
    by_id: HashMap<String, usize>,
    postings: BTreeMap<String, Vec<Posting>>,
    doc_lengths: Vec<u32>,
    avg_doc_length: f64,
}

impl CorpusIndex {
    pub fn build(docs: Vec<Document>) -> Result<Self, IngestError> {
        let mut documents = docs;
        documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        if let Some(w) = documents.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
            return Err(IngestError::DuplicateId(w[0].doc_id.clone()));
        }
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();
        let mut doc_lengths = Vec::with_capacity(documents.len());
        for (i, doc) in documents.iter().enumerate() {
            let tokens = tokenize(&doc.body);
            doc_lengths.push(tokens.len() as u32);
            let mut tf: BTreeMap<String, u32> = BTreeMap::new();
            for t in tokens {
                *tf.entry(t).or_default() += 1;
            }
            for (term, count) in tf {
                postings.entry(term).or_default().push(Posting { doc: i, tf: count });
            }
        }
        let avg_doc_length = if documents.is_empty() {
            0.0
        } else {
            doc_lengths.iter().map(|&l| f64::from(l)).sum::<f64>() / documents.len() as f64
        };
        let by_id = documents.iter().enumerate().map(|(i, d)| (d.doc_id.clone(), i)).collect();
        Ok(CorpusIndex { documents, by_id, postings, doc_lengths, avg_doc_length })
    }

    pub fn corpus_size(&self) -> usize {
        self.documents.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn doc(&self, idx: usize) -> &Document {
        &self.documents[idx]
    }

    pub fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.by_id.get(doc_id).copied()
    }

    pub fn get(&self, doc_id: &str) -> Option<&Document> {
        self.doc_index(doc_id).map(|i| &self.documents[i])
    }

    pub fn doc_length(&self, idx: usize) -> u32 {
        self.doc_lengths[idx]
    }

    pub fn postings(&self, term: &str) -> &[Posting] {
        self.postings.get(term).map_or(&[], Vec::as_slice)
    }

    pub fn document_frequency(&self, term: &str) -> usize {
        self.postings(term).len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.postings.len()
    }

    pub fn grade(&self, doc_id: &str) -> Option<u8> {
        self.get(doc_id).and_then(|d| d.judged_relevance)
    }
}

fn normalized(mut doc: Document, line: usize) -> Result<Document, IngestError> {
    if doc.doc_id.trim().is_empty() {
        return Err(IngestError::Malformed { line, message: "empty doc_id".into() });
    }
    if let Some(g) = doc.judged_relevance {
        if g > 3 {
            return Err(IngestError::Malformed { line, message: format!("relevance grade {g} outside 0..=3") });
        }
    }
    doc.title = normalize_whitespace(&doc.title);
    doc.body = normalize_whitespace(&doc.body);
    Ok(doc)
}

pub fn ingest_corpus<R: Read>(source: R, format: CorpusFormat) -> Result<CorpusIndex, IngestError> {
    let docs = match format {
        CorpusFormat::Jsonl => read_jsonl(source)?,
        CorpusFormat::TrecText => read_trec(source)?,
    };
    CorpusIndex::build(docs)
}

fn read_jsonl<R: Read>(source: R) -> Result<Vec<Document>, IngestError> {
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| IngestError::Malformed { line: i + 1, message: e.to_string() })?;
        docs.push(normalized(doc, i + 1)?);
    }
    Ok(docs)
}

fn tag_content<'a>(block: &'a str, tag: &str) -> Option<&'a str> {
    let open = format!("<{tag}>");
    let close = format!("</{tag}>");
    let start = block.find(&open)? + open.len();
    let end = block[start..].find(&close)? + start;
    Some(&block[start..end])
}

fn read_trec<R: Read>(mut source: R) -> Result<Vec<Document>, IngestError> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;
    let line_of = |offset: usize| text[..offset].matches('\n').count() + 1;
    let mut docs = Vec::new();
    let mut pos = 0;
    while let Some(start) = text[pos..].find("<DOC>").map(|i| i + pos) {
        if let Some(stray) = text[pos..start].find(|c: char| !c.is_whitespace()) {
            return Err(IngestError::Malformed { line: line_of(pos + stray), message: "text outside <DOC> block".into() });
        }
        let end = text[start..].find("</DOC>").map(|i| i + start).ok_or_else(|| IngestError::Malformed {
            line: line_of(start),
            message: "unterminated <DOC> block".into(),
        })?;
        let block = &text[start + 5..end];
        let line = line_of(start);
        let doc_id = tag_content(block, "DOCNO")
            .ok_or_else(|| IngestError::Malformed { line, message: "missing <DOCNO>".into() })?
            .trim()
            .to_string();
        let body = tag_content(block, "TEXT")
            .ok_or_else(|| IngestError::Malformed { line, message: "missing <TEXT>".into() })?
            .to_string();
        let title = tag_content(block, "TITLE").map_or_else(|| doc_id.clone(), str::to_string);
        docs.push(normalized(Document { doc_id, title, body, judged_relevance: None }, line)?);
        pos = end + 6;
    }
    if let Some(stray) = text[pos..].find(|c: char| !c.is_whitespace()) {
        return Err(IngestError::Malformed { line: line_of(pos + stray), message: "text outside <DOC> block".into() });
    }
    Ok(docs)
}
