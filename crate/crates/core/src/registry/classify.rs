use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DocumentIndexEntry, RegistryError};

const BUNDLED_TABLE: &str = include_str!("../../../../data/classification.v1");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DocumentClass {
    CorporateModification,
    FinancialStatement,
}

/// Keyword tables, matched case-insensitively as substrings. The
/// `kind_hint` is consulted before the title; within one text, modification
/// keywords take precedence, and anything unmatched is a modification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassificationTable {
    pub version: String,
    pub corporate_modification: Vec<String>,
    pub financial_statement: Vec<String>,
}

impl ClassificationTable {
    pub fn bundled() -> Self {
        Self::from_json(BUNDLED_TABLE).expect("bundled classification table is valid")
    }

    pub fn from_json(text: &str) -> Result<Self, RegistryError> {
        let mut table: Self = serde_json::from_str(text)
            .map_err(|e| RegistryError::Malformed(format!("classification table: {e}")))?;
        for list in [
            &mut table.corporate_modification,
            &mut table.financial_statement,
        ] {
            for kw in list.iter_mut() {
                *kw = kw.to_lowercase();
            }
            list.retain(|kw| !kw.trim().is_empty());
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, RegistryError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RegistryError::Malformed(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn match_text(&self, text: &str) -> Option<DocumentClass> {
        let text = text.to_lowercase();
        if self
            .corporate_modification
            .iter()
            .any(|kw| text.contains(kw.as_str()))
        {
            Some(DocumentClass::CorporateModification)
        } else if self
            .financial_statement
            .iter()
            .any(|kw| text.contains(kw.as_str()))
        {
            Some(DocumentClass::FinancialStatement)
        } else {
            None
        }
    }

    pub fn classify(&self, entry: &DocumentIndexEntry) -> DocumentClass {
        entry
            .kind_hint
            .as_deref()
            .and_then(|hint| self.match_text(hint))
            .or_else(|| self.match_text(&entry.title))
            .unwrap_or(DocumentClass::CorporateModification)
    }
}

/// Splits entries into (modifications, financial statements), preserving order.
pub fn classify_documents(
    entries: &[DocumentIndexEntry],
    table: &ClassificationTable,
) -> (Vec<DocumentIndexEntry>, Vec<DocumentIndexEntry>) {
    entries
        .iter()
        .cloned()
        .partition(|e| table.classify(e) == DocumentClass::CorporateModification)
}
