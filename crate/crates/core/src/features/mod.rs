//! Manual document features: layout statistics, pattern-specific items and
//! metadata, concatenated into a fixed 31-column block.

mod layout;
mod metadata;
mod patterns;

pub use layout::{layout_features, LayoutFeatures};
pub use metadata::{metadata_features, MetadataFeatures};
pub use patterns::{find_items, pattern_item_features, ItemKind, PatternItemFeatures};

use std::path::Path;

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};

pub const MANUAL_FEATURE_COUNT: usize = 31;
pub const SCHEMA_VERSION: u32 = 1;

/// Column names of the manual block, in vector order.
pub static MANUAL_SCHEMA: Lazy<Vec<String>> = Lazy::new(|| {
    let mut names: Vec<String> = ["width", "indent"]
        .iter()
        .flat_map(|p| {
            ["min", "max", "mean", "median", "std", "var"]
                .iter()
                .map(move |s| format!("{p}_{s}"))
        })
        .collect();
    names.push("nonempty_lines".into());
    names.push("empty_lines".into());
    for kind in ItemKind::ALL {
        names.push(format!("item_{}_count", kind.as_str()));
        names.push(format!("item_{}_weight", kind.as_str()));
    }
    for n in [
        "src_deep",
        "src_dark",
        "src_social",
        "src_pastebin",
        "date_scalar",
    ] {
        names.push(n.into());
    }
    names
});

#[derive(Debug, Clone, PartialEq)]
pub struct ManualFeatureVector {
    pub values: [f64; MANUAL_FEATURE_COUNT],
}

impl ManualFeatureVector {
    pub fn schema() -> &'static [String] {
        &MANUAL_SCHEMA
    }
}

pub fn assemble_manual_features(doc: &Document) -> ManualFeatureVector {
    let mut values = [0.0; MANUAL_FEATURE_COUNT];
    values[..14].copy_from_slice(&layout_features(&doc.raw_text).values());
    values[14..26].copy_from_slice(&pattern_item_features(&doc.raw_text).values());
    values[26..].copy_from_slice(&metadata_features(doc).values());
    ManualFeatureVector { values }
}

/// One row of the `extract-features` output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManualFeatureRow {
    pub id: String,
    pub manual: Vec<f64>,
    pub schema_version: u32,
}

pub fn extract_rows(docs: &[Document]) -> Vec<ManualFeatureRow> {
    docs.iter()
        .map(|d| ManualFeatureRow {
            id: d.id.clone(),
            manual: assemble_manual_features(d).values.to_vec(),
            schema_version: SCHEMA_VERSION,
        })
        .collect()
}

pub fn rows_to_jsonl(rows: &[ManualFeatureRow]) -> Result<String> {
    let bytes = crate::io::to_jsonl(rows)?;
    Ok(String::from_utf8(bytes).expect("serde_json emits UTF-8"))
}

pub fn read_feature_rows(path: &Path) -> Result<Vec<ManualFeatureRow>> {
    let text = crate::io::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: ManualFeatureRow = serde_json::from_str(line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), i + 1)))?;
        if row.manual.len() != MANUAL_FEATURE_COUNT || row.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "{}:{}: expected {MANUAL_FEATURE_COUNT} manual features at schema version {SCHEMA_VERSION}",
                path.display(),
                i + 1
            )));
        }
        rows.push(row);
    }
    Ok(rows)
}
