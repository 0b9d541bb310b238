//! Layout-ordered text extraction and the financial / modification summaries
//! distilled from it.

mod amount;
mod layout;
mod summarize;

use std::io::Write;
use std::process::{Command, Stdio};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::registry::PdfBlob;

pub use amount::{parse_amount, AmountError, NumberConvention, ParsedAmount};
pub use layout::{TextLayerExtractor, NO_TEXT_LAYER};
pub use summarize::{
    summarize_financials, summarize_modifications, CorporateEvent, FinancialStatementRecord,
    LineItem, Metric, Summary,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextBlock {
    pub text: String,
    pub reading_order_index: u32,
    pub page_number: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    pub page_number: u32,
    pub blocks: Vec<TextBlock>,
}

impl Page {
    pub fn text(&self) -> String {
        self.blocks
            .iter()
            .map(|b| b.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractedDocument {
    pub doc_id: String,
    pub retrieved_at: DateTime<Utc>,
    pub pages: Vec<Page>,
    /// Extraction caveats, such as pages without a text layer.
    #[serde(default)]
    pub notes: Vec<String>,
}

impl ExtractedDocument {
    pub fn page_count(&self) -> u32 {
        self.pages.len() as u32
    }

    pub fn page(&self, number: u32) -> Option<&Page> {
        self.pages.iter().find(|p| p.page_number == number)
    }

    /// Content hash used to compare extractions.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("document serializes");
        hex::encode(Sha256::digest(bytes))
    }

    /// Checks page numbering and per-page reading order.
    pub fn check(&self) -> Result<(), String> {
        let count = self.page_count();
        for page in &self.pages {
            if !(1..=count).contains(&page.page_number) {
                return Err(format!(
                    "page number {} outside [1, {count}]",
                    page.page_number
                ));
            }
            for pair in page.blocks.windows(2) {
                if pair[1].reading_order_index <= pair[0].reading_order_index {
                    return Err(format!(
                        "reading order not increasing on page {}",
                        page.page_number
                    ));
                }
            }
            if page
                .blocks
                .iter()
                .any(|b| b.page_number != page.page_number)
            {
                return Err(format!(
                    "block on page {} carries another page number",
                    page.page_number
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExtractError {
    #[error("corrupt PDF {doc_id}: {reason}")]
    CorruptPdf { doc_id: String, reason: String },
    #[error("extractor backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("extractor produced an invalid document: {0}")]
    InvalidDocument(String),
}

pub trait ExtractorBackend: Send + Sync {
    fn name(&self) -> &str;
    fn extract(&self, pdf: &PdfBlob) -> Result<ExtractedDocument, ExtractError>;
}

/// Runs `extract_text` and checks the document invariants on the result.
pub fn extract_text(
    pdf: &PdfBlob,
    backend: &dyn ExtractorBackend,
) -> Result<ExtractedDocument, ExtractError> {
    let doc = backend.extract(pdf)?;
    doc.check().map_err(ExtractError::InvalidDocument)?;
    Ok(doc)
}

/// Adapter slot for an external extraction tool. The command receives the PDF
/// on stdin and must print an [`ExtractedDocument`] as JSON on stdout.
#[derive(Debug, Clone)]
pub struct ExternalToolExtractor {
    program: String,
    args: Vec<String>,
}

impl ExternalToolExtractor {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
        }
    }
}

impl ExtractorBackend for ExternalToolExtractor {
    fn name(&self) -> &str {
        &self.program
    }

    fn extract(&self, pdf: &PdfBlob) -> Result<ExtractedDocument, ExtractError> {
        let unavailable =
            |e: std::io::Error| ExtractError::BackendUnavailable(format!("{}: {e}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(unavailable)?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(&pdf.bytes)
            .map_err(unavailable)?;
        let output = child.wait_with_output().map_err(unavailable)?;
        if !output.status.success() {
            return Err(ExtractError::BackendUnavailable(format!(
                "{} exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            )));
        }
        serde_json::from_slice(&output.stdout)
            .map_err(|e| ExtractError::InvalidDocument(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_tool_is_unavailable() {
        let tool = ExternalToolExtractor::new("/nonexistent/extractor", vec![]);
        let blob = PdfBlob::new("d", b"%PDF-1.4".to_vec(), Utc::now()).unwrap();
        assert!(matches!(
            tool.extract(&blob),
            Err(ExtractError::BackendUnavailable(_))
        ));
    }

    #[test]
    fn check_rejects_bad_order() {
        let doc = ExtractedDocument {
            doc_id: "d".into(),
            retrieved_at: Utc::now(),
            pages: vec![Page {
                page_number: 1,
                blocks: vec![
                    TextBlock {
                        text: "a".into(),
                        reading_order_index: 1,
                        page_number: 1,
                    },
                    TextBlock {
                        text: "b".into(),
                        reading_order_index: 1,
                        page_number: 1,
                    },
                ],
            }],
            notes: vec![],
        };
        assert!(doc.check().is_err());
    }
}
