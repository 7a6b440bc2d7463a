//! Timestamped multilabel documents, the label space, and JSON Lines I/O.

mod features;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{featurize_text, fnv1a64, hash_token, tokenize, FeatureDim, FeatureVector};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

/// One timestamped, multilabel-annotated text record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub timestamp: NaiveDate,
    pub text: String,
    /// Sorted and deduplicated.
    pub labels: Vec<String>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        timestamp: NaiveDate,
        text: impl Into<String>,
        labels: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        let labels: BTreeSet<String> = labels.into_iter().map(Into::into).collect();
        Document {
            id: id.into(),
            timestamp,
            text: text.into(),
            labels: labels.into_iter().collect(),
        }
    }

    pub fn has_label(&self, label: &str) -> bool {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).is_ok()
    }
}

/// Featurizes a document's text.
pub fn featurize(doc: &Document, dim: FeatureDim) -> FeatureVector {
    featurize_text(&doc.text, dim)
}

/// Ordered set of distinct label ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSpace {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.len() < 2 {
            return Err(Error::InvalidLabelSpace(format!(
                "need at least 2 labels, got {}",
                labels.len()
            )));
        }
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::InvalidLabelSpace(format!("duplicate label {l:?}")));
            }
        }
        Ok(LabelSpace { labels, index })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.labels[index]
    }

    /// Maps label names to sorted indices.
    pub fn encode<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        let mut out = labels
            .iter()
            .map(|l| {
                self.index_of(l.as_ref())
                    .ok_or_else(|| Error::UnknownLabel { label: l.as_ref().to_owned() })
            })
            .collect::<Result<Vec<_>>>()?;
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Stable fingerprint of the ordered label list, embedded in model files.
    pub fn fingerprint(&self) -> u64 {
        let mut joined = String::new();
        for l in &self.labels {
            joined.push_str(l);
            joined.push('\u{1f}');
        }
        fnv1a64(joined.as_bytes())
    }
}

/// Lookup of documents by id.
pub trait DocumentSource {
    fn document(&self, id: &str) -> Option<&Document>;
}

/// Options for [`load_corpus`].
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Explicit label space. When absent, the union of observed labels
    /// (sorted) is used.
    pub labels: Option<Vec<String>>,
}

/// Documents sorted by `(timestamp, id)` plus their label space.
#[derive(Debug, Clone)]
pub struct Corpus {
    documents: Vec<Document>,
    label_space: LabelSpace,
    by_id: HashMap<String, usize>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    timestamp: String,
    text: String,
    labels: Vec<String>,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    timestamp: String,
    text: &'a str,
    labels: &'a [String],
}

impl Corpus {
    /// Builds a corpus, sorting documents and validating labels and ids.
    pub fn new(mut documents: Vec<Document>, label_space: LabelSpace) -> Result<Self> {
        documents.sort_by(|a, b| (a.timestamp, &a.id).cmp(&(b.timestamp, &b.id)));
        let mut by_id = HashMap::with_capacity(documents.len());
        for (i, d) in documents.iter().enumerate() {
            if d.labels.is_empty() {
                return Err(Error::InvalidConfig(format!("document {:?} has no labels", d.id)));
            }
            for l in &d.labels {
                if label_space.index_of(l).is_none() {
                    return Err(Error::UnknownLabel { label: l.clone() });
                }
            }
            if by_id.insert(d.id.clone(), i).is_some() {
                return Err(Error::InvalidConfig(format!("duplicate id {:?}", d.id)));
            }
        }
        Ok(Corpus { documents, label_space, by_id })
    }

    /// Builds a corpus whose label space is the sorted union of observed labels.
    pub fn from_documents(documents: Vec<Document>) -> Result<Self> {
        let labels: BTreeSet<String> =
            documents.iter().flat_map(|d| d.labels.iter().cloned()).collect();
        let space = LabelSpace::new(labels.into_iter().collect())?;
        Corpus::new(documents, space)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    /// `[min_date, max_date]` over all documents.
    pub fn date_range(&self) -> Option<(NaiveDate, NaiveDate)> {
        Some((self.documents.first()?.timestamp, self.documents.last()?.timestamp))
    }

    /// Index range of documents with `from <= timestamp < to`.
    pub fn range_by_date(&self, from: NaiveDate, to: NaiveDate) -> Result<std::ops::Range<usize>> {
        if from >= to {
            return Err(Error::EmptyDateRange { from, to });
        }
        let start = self.documents.partition_point(|d| d.timestamp < from);
        let end = self.documents.partition_point(|d| d.timestamp < to);
        Ok(start..end)
    }

    /// Documents with `from <= timestamp < to`, in chronological order.
    pub fn slice_by_date(&self, from: NaiveDate, to: NaiveDate) -> Result<&[Document]> {
        Ok(&self.documents[self.range_by_date(from, to)?])
    }

    /// Serializes to JSON Lines in corpus order.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for d in &self.documents {
            let rec = OutRecord {
                id: &d.id,
                timestamp: d.timestamp.format(DATE_FORMAT).to_string(),
                text: &d.text,
                labels: &d.labels,
            };
            // serializing plain strings cannot fail
            let line = serde_json::to_string(&rec).expect("record serializes");
            let _ = writeln!(out, "{line}");
        }
        out
    }

    pub fn write_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// Featurizes every document and encodes its labels, in corpus order.
    pub fn encode(&self, dim: FeatureDim) -> Vec<EncodedDoc> {
        self.documents
            .par_iter()
            .enumerate()
            .map(|(position, d)| EncodedDoc {
                position,
                features: featurize(d, dim),
                labels: self.label_space.encode(&d.labels).expect("validated at construction"),
            })
            .collect()
    }
}

impl DocumentSource for Corpus {
    fn document(&self, id: &str) -> Option<&Document> {
        self.position(id).map(|i| &self.documents[i])
    }
}

/// A document reduced to what a model consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDoc {
    /// Position of the source document in its corpus.
    pub position: usize,
    pub features: FeatureVector,
    /// Sorted label indices into the corpus label space.
    pub labels: Vec<usize>,
}

/// Parses JSON Lines text into a corpus. Blank lines are skipped.
pub fn parse_corpus(text: &str, options: &LoadOptions) -> Result<Corpus> {
    if text.starts_with('\u{feff}') {
        return Err(Error::ByteOrderMark);
    }
    let explicit = options.labels.clone().map(LabelSpace::new).transpose()?;
    let mut documents = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let rec: RawRecord = serde_json::from_str(raw_line)
            .map_err(|e| Error::MalformedRecord { line, message: e.to_string() })?;
        if rec.labels.is_empty() {
            return Err(Error::EmptyLabelSet { line });
        }
        let timestamp = NaiveDate::parse_from_str(&rec.timestamp, DATE_FORMAT)
            .map_err(|_| Error::BadDate { line, value: rec.timestamp.clone() })?;
        if seen.insert(rec.id.clone(), line).is_some() {
            return Err(Error::DuplicateId { line, id: rec.id });
        }
        if let Some(space) = &explicit {
            if let Some(bad) = rec.labels.iter().find(|l| space.index_of(l).is_none()) {
                return Err(Error::MalformedRecord {
                    line,
                    message: format!("label {bad:?} is not in the declared label space"),
                });
            }
        }
        documents.push(Document::new(rec.id, timestamp, rec.text, rec.labels));
    }
    match explicit {
        Some(space) => Corpus::new(documents, space),
        None => Corpus::from_documents(documents),
    }
}

/// Reads a JSON Lines corpus file.
pub fn load_corpus(path: impl AsRef<Path>, options: &LoadOptions) -> Result<Corpus> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(&[0xEF, 0xBB, 0xBF]) {
        return Err(Error::ByteOrderMark);
    }
    let text = String::from_utf8(bytes).map_err(|e| Error::MalformedRecord {
        line: 0,
        message: format!("invalid UTF-8: {e}"),
    })?;
    parse_corpus(&text, options)
}
