//! Document data model and the JSONL corpus format.

mod split;
mod synthetic;

pub use split::{split_labeled, DatasetSplit, SplitRatios};
pub use synthetic::{
    generate_synthetic_corpus, LabelSampling, SyntheticCorpus, SyntheticSpec, CREDENTIAL_LEXICON,
    DRUG_LEXICON, SALE_LEXICON, WEAPON_LEXICON,
};

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Where a document was collected. Telegram and Reddit both map to `SocialMedia`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    DeepWeb,
    DarkWeb,
    SocialMedia,
    Pastebin,
}

impl Source {
    pub const ALL: [Source; 4] = [
        Source::DeepWeb,
        Source::DarkWeb,
        Source::SocialMedia,
        Source::Pastebin,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Source::DeepWeb => "deep_web",
            Source::DarkWeb => "dark_web",
            Source::SocialMedia => "social_media",
            Source::Pastebin => "pastebin",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Source::ALL
            .into_iter()
            .find(|src| src.as_str() == s)
            .ok_or_else(|| Error::schema("source", format!("unknown source `{s}`")))
    }
}

/// Ground-truth labels. Category sales are kinds of sales, so a non-sale
/// document carries no category.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelSet {
    pub sale: bool,
    pub drug: bool,
    pub weapon: bool,
    pub credential: bool,
}

/// The four evaluated labels, in reporting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Sale,
    Drug,
    Weapon,
    Credential,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::Sale, Label::Drug, Label::Weapon, Label::Credential];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Sale => "sale",
            Label::Drug => "drug",
            Label::Weapon => "weapon",
            Label::Credential => "credential",
        }
    }
}

/// The Stage 2 sale categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Drug,
    Weapon,
    Credential,
}

impl Category {
    pub const ALL: [Category; 3] = [Category::Drug, Category::Weapon, Category::Credential];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::Drug => "drug",
            Category::Weapon => "weapon",
            Category::Credential => "credential",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Category::Drug => 0,
            Category::Weapon => 1,
            Category::Credential => 2,
        }
    }
}

impl LabelSet {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn get(&self, label: Label) -> bool {
        match label {
            Label::Sale => self.sale,
            Label::Drug => self.drug,
            Label::Weapon => self.weapon,
            Label::Credential => self.credential,
        }
    }

    pub fn category(&self, cat: Category) -> bool {
        match cat {
            Category::Drug => self.drug,
            Category::Weapon => self.weapon,
            Category::Credential => self.credential,
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.sale || !(self.drug || self.weapon || self.credential)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub id: String,
    pub source: Source,
    pub timestamp: DateTime<Utc>,
    pub raw_text: String,
    pub labels: Option<LabelSet>,
}

impl Document {
    pub fn is_labeled(&self) -> bool {
        self.labels.is_some()
    }

    /// Serializes the document as one JSON object (no trailing newline).
    pub fn to_json(&self) -> String {
        let mut obj = Map::new();
        obj.insert("id".into(), Value::String(self.id.clone()));
        obj.insert("source".into(), Value::String(self.source.as_str().into()));
        obj.insert(
            "timestamp".into(),
            Value::String(self.timestamp.to_rfc3339_opts(SecondsFormat::AutoSi, true)),
        );
        obj.insert("raw_text".into(), Value::String(self.raw_text.clone()));
        if let Some(labels) = &self.labels {
            obj.insert(
                "labels".into(),
                serde_json::to_value(labels).expect("label set serializes"),
            );
        }
        Value::Object(obj).to_string()
    }
}

/// Converts serde_json's 1-based line/column into a byte offset into `text`.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let mut offset = 0;
    for (i, l) in text.split_inclusive('\n').enumerate() {
        if i + 1 == line {
            return (offset + column.saturating_sub(1)).min(text.len());
        }
        offset += l.len();
    }
    text.len()
}

fn required_str<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a str> {
    match obj.get(field) {
        None | Some(Value::Null) => Err(Error::schema(field, "missing required field")),
        Some(Value::String(s)) => Ok(s),
        Some(_) => Err(Error::schema(field, "expected a string")),
    }
}

fn parse_labels(value: &Value) -> Result<LabelSet> {
    let obj = value
        .as_object()
        .ok_or_else(|| Error::schema("labels", "expected an object"))?;
    let flag = |name: &str| -> Result<bool> {
        match obj.get(name) {
            Some(Value::Bool(b)) => Ok(*b),
            None => Err(Error::schema(
                format!("labels.{name}"),
                "missing required field",
            )),
            Some(_) => Err(Error::schema(
                format!("labels.{name}"),
                "expected a boolean",
            )),
        }
    };
    let labels = LabelSet {
        sale: flag("sale")?,
        drug: flag("drug")?,
        weapon: flag("weapon")?,
        credential: flag("credential")?,
    };
    if !labels.is_consistent() {
        return Err(Error::schema(
            "labels",
            "category label set on a non-sale document",
        ));
    }
    Ok(labels)
}

/// Parses one corpus record. Unknown keys are ignored.
pub fn parse_document(json_text: &str) -> Result<Document> {
    let value: Value = serde_json::from_str(json_text).map_err(|e| Error::Parse {
        offset: byte_offset(json_text, e.line(), e.column()),
        message: e.to_string(),
    })?;
    let obj = value.as_object().ok_or_else(|| Error::Parse {
        offset: 0,
        message: "expected a JSON object".into(),
    })?;

    let id = required_str(obj, "id")?;
    if id.is_empty() {
        return Err(Error::schema("id", "must be non-empty"));
    }
    let source: Source = required_str(obj, "source")?.parse()?;
    let ts = required_str(obj, "timestamp")?;
    let timestamp = DateTime::parse_from_rfc3339(ts)
        .map_err(|e| Error::schema("timestamp", format!("not ISO-8601: {e}")))?
        .with_timezone(&Utc);
    let raw_text = required_str(obj, "raw_text")?.to_string();
    let labels = match obj.get("labels") {
        None | Some(Value::Null) => None,
        Some(v) => Some(parse_labels(v)?),
    };

    Ok(Document {
        id: id.to_string(),
        source,
        timestamp,
        raw_text,
        labels,
    })
}

/// Parses a JSONL corpus. Blank lines are skipped; ids must be unique.
pub fn parse_corpus(text: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        if !trimmed.is_empty() {
            let doc = parse_document(trimmed).map_err(|e| match e {
                Error::Parse { offset: o, message } => Error::Parse {
                    offset: offset + o,
                    message,
                },
                other => other,
            })?;
            if !seen.insert(doc.id.clone()) {
                return Err(Error::schema("id", format!("duplicate id `{}`", doc.id)));
            }
            docs.push(doc);
        }
        offset += line.len();
    }
    Ok(docs)
}

pub fn read_corpus(path: &Path) -> Result<Vec<Document>> {
    parse_corpus(&crate::io::read_to_string(path)?)
}

pub fn corpus_to_jsonl(docs: &[Document]) -> String {
    let mut out = String::new();
    for doc in docs {
        out.push_str(&doc.to_json());
        out.push('\n');
    }
    out
}

pub fn write_corpus(path: &Path, docs: &[Document]) -> Result<()> {
    crate::io::write_atomic(path, corpus_to_jsonl(docs).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_record() {
        let doc = parse_document(
            r#"{"id":"a1","source":"dark_web","timestamp":"2022-01-05T00:00:00Z","raw_text":"x"}"#,
        )
        .unwrap();
        assert_eq!(doc.id, "a1");
        assert_eq!(doc.source, Source::DarkWeb);
        assert_eq!(doc.raw_text, "x");
        assert!(doc.labels.is_none());
    }

    #[test]
    fn labelled_record() {
        let doc = parse_document(
            r#"{"id":"a2","source":"pastebin","timestamp":"2022-01-05T00:00:00Z","raw_text":"",
               "labels":{"sale":true,"drug":true,"weapon":false,"credential":false},"extra":1}"#,
        )
        .unwrap();
        let labels = doc.labels.unwrap();
        assert!(labels.sale && labels.drug && !labels.weapon && !labels.credential);
        assert_eq!(doc.raw_text, "");
    }

    #[test]
    fn unknown_source_is_schema_error() {
        let err = parse_document(
            r#"{"id":"a1","source":"forum","timestamp":"2022-01-05T00:00:00Z","raw_text":"x"}"#,
        )
        .unwrap_err();
        match err {
            Error::Schema { field, message } => {
                assert_eq!(field, "source");
                assert!(message.contains("unknown source"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_fields_are_named() {
        for field in ["id", "source", "timestamp", "raw_text"] {
            let mut obj: Map<String, Value> = serde_json::from_str(
                r#"{"id":"a1","source":"dark_web","timestamp":"2022-01-05T00:00:00Z","raw_text":"x"}"#,
            )
            .unwrap();
            obj.remove(field);
            match parse_document(&Value::Object(obj).to_string()).unwrap_err() {
                Error::Schema { field: f, .. } => assert_eq!(f, field),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn malformed_json_reports_offset() {
        let text = r#"{"id":"a1", "source" "dark_web"}"#;
        match parse_document(text).unwrap_err() {
            Error::Parse { offset, .. } => assert_eq!(offset, 21),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inconsistent_labels_rejected() {
        let err = parse_document(
            r#"{"id":"a1","source":"dark_web","timestamp":"2022-01-05T00:00:00Z","raw_text":"x",
               "labels":{"sale":false,"drug":true,"weapon":false,"credential":false}}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema { ref field, .. } if field == "labels"));
    }

    #[test]
    fn bad_timestamp_rejected() {
        let err = parse_document(
            r#"{"id":"a1","source":"dark_web","timestamp":"yesterday","raw_text":"x"}"#,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Schema { ref field, .. } if field == "timestamp"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let line =
            r#"{"id":"a1","source":"dark_web","timestamp":"2022-01-05T00:00:00Z","raw_text":"x"}"#;
        let err = parse_corpus(&format!("{line}\n{line}\n")).unwrap_err();
        assert!(matches!(err, Error::Schema { ref field, .. } if field == "id"));
    }
}
