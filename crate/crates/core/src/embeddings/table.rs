use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One row of the shared vector file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorRow {
    pub id: String,
    pub vector: Vec<f64>,
}

/// Precomputed document embeddings keyed by document id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// An empty table has no dimension and cannot feed a model.
    pub fn is_usable(&self) -> bool {
        self.dim > 0 && !self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&[f64]> {
        self.entries.get(id).map(Vec::as_slice)
    }

    pub fn from_rows(rows: impl IntoIterator<Item = VectorRow>) -> Result<Self> {
        let mut table = EmbeddingTable::default();
        for (i, row) in rows.into_iter().enumerate() {
            if i == 0 {
                table.dim = row.vector.len();
            } else if row.vector.len() != table.dim {
                return Err(Error::Format(format!(
                    "row `{}` has dimension {}, expected {}",
                    row.id,
                    row.vector.len(),
                    table.dim
                )));
            }
            if row.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format(format!(
                    "row `{}` contains a non-finite value",
                    row.id
                )));
            }
            if table.entries.contains_key(&row.id) {
                return Err(Error::Format(format!("duplicate id `{}`", row.id)));
            }
            table.entries.insert(row.id, row.vector);
        }
        Ok(table)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let row: VectorRow = serde_json::from_str(line)
                .map_err(|e| Error::Format(format!("line {}: invalid vector row: {e}", i + 1)))?;
            rows.push(row);
        }
        Self::from_rows(rows)
    }
}

pub fn load_embedding_table(path: &Path) -> Result<EmbeddingTable> {
    EmbeddingTable::parse(&crate::io::read_to_string(path)?)
}
