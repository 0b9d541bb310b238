use std::collections::BTreeMap;

use chrono::NaiveDate;
use rust_decimal::Decimal;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::amount::{parse_amount, NumberConvention};
use super::ExtractedDocument;
use crate::agents::schema::{EventKind, FinSummaryPayload, ModSummaryPayload};
use crate::agents::{AgentError, AgentOutput, AgentRole, AgentRunner, Citation, ContextDocument};
use crate::intake::CompanyRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    Assets,
    Liabilities,
    Revenue,
    #[serde(rename = "EBIT")]
    Ebit,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Assets,
        Metric::Liabilities,
        Metric::Revenue,
        Metric::Ebit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Assets => "Assets",
            Metric::Liabilities => "Liabilities",
            Metric::Revenue => "Revenue",
            Metric::Ebit => "EBIT",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == name)
    }

    /// Only EBIT may be negative.
    pub fn allows_negative(self) -> bool {
        self == Metric::Ebit
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineItem {
    /// Amount in EUR.
    #[serde(with = "rust_decimal::serde::str")]
    pub amount: Decimal,
    /// The amount exactly as printed in the filing.
    pub raw: String,
    pub convention: NumberConvention,
    pub citation: Citation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinancialStatementRecord {
    pub fiscal_year: i32,
    pub line_items: BTreeMap<Metric, LineItem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorporateEvent {
    pub date: NaiveDate,
    pub kind: EventKind,
    pub description: String,
    pub citation: Citation,
}

/// Accepted items plus the reasons any proposed item was dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary<T> {
    pub items: Vec<T>,
    pub rejected: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_fingerprint: Option<String>,
}

impl<T> Summary<T> {
    fn empty() -> Self {
        Self {
            items: Vec::new(),
            rejected: Vec::new(),
            provider_fingerprint: None,
        }
    }
}

fn context_documents(docs: &[ExtractedDocument]) -> Vec<ContextDocument> {
    docs.iter()
        .map(|d| ContextDocument {
            source_ref: d.doc_id.clone(),
            retrieved_at: d.retrieved_at,
            snippet: None,
            pages: Some(d.pages.iter().map(|p| p.text()).collect()),
        })
        .collect()
}

/// Looks up the cited page and returns its text if it exists.
fn cited_page(docs: &[ExtractedDocument], citation: &Citation) -> Result<String, String> {
    let doc = docs
        .iter()
        .find(|d| d.doc_id == citation.source_ref)
        .ok_or_else(|| {
            format!(
                "cites {:?}, which was not extracted in this run",
                citation.source_ref
            )
        })?;
    let page = citation.page.ok_or("citation has no page")?;
    doc.page(page).map(|p| p.text()).ok_or_else(|| {
        format!(
            "cites page {page} of {}, which has {} pages",
            doc.doc_id,
            doc.page_count()
        )
    })
}

async fn run(
    role: AgentRole,
    docs: &[ExtractedDocument],
    company: &CompanyRecord,
    agents: &AgentRunner,
) -> Result<AgentOutput, AgentError> {
    let inputs = BTreeMap::from([(
        "company".to_string(),
        serde_json::to_value(company).expect("record serializes"),
    )]);
    agents
        .run_agent_with_documents(role, &company.company_id, &inputs, context_documents(docs))
        .await
}

fn typed<T: for<'de> Deserialize<'de>>(role: AgentRole, payload: &Value) -> Result<T, AgentError> {
    serde_json::from_value(payload.clone()).map_err(|e| AgentError::Provider {
        role,
        message: format!("accepted payload does not deserialize: {e}"),
    })
}

/// Distills financial statements into one record per fiscal year, newest
/// first. A record is dropped whole if any of its cells cites a page that
/// does not exist or does not print the quoted amount.
pub async fn summarize_financials(
    docs: &[ExtractedDocument],
    company: &CompanyRecord,
    agents: &AgentRunner,
) -> Result<Summary<FinancialStatementRecord>, AgentError> {
    if docs.is_empty() {
        return Ok(Summary::empty());
    }
    let output = run(AgentRole::FinSummary, docs, company, agents).await?;
    let payload: FinSummaryPayload = typed(AgentRole::FinSummary, &output.payload)?;
    let mut summary = Summary::empty();
    summary.provider_fingerprint = Some(output.provider_fingerprint.clone());

    'records: for draft in payload.records {
        let mut line_items = BTreeMap::new();
        for (metric, cell) in draft.line_items {
            let citation = output.citations[cell.citation].clone();
            let page_text = match cited_page(docs, &citation) {
                Ok(text) => text,
                Err(reason) => {
                    summary.rejected.push(format!(
                        "FY{} {}: {reason}",
                        draft.fiscal_year,
                        metric.name()
                    ));
                    continue 'records;
                }
            };
            if !page_text.contains(&cell.amount) {
                summary.rejected.push(format!(
                    "FY{} {}: amount {:?} does not appear on the cited page",
                    draft.fiscal_year,
                    metric.name(),
                    cell.amount
                ));
                continue 'records;
            }
            let parsed = parse_amount(&cell.amount).expect("schema checked the amount");
            line_items.insert(
                metric,
                LineItem {
                    amount: parsed.value,
                    raw: cell.amount,
                    convention: parsed.convention,
                    citation,
                },
            );
        }
        summary.items.push(FinancialStatementRecord {
            fiscal_year: draft.fiscal_year,
            line_items,
        });
    }
    summary
        .items
        .sort_by_key(|r| std::cmp::Reverse(r.fiscal_year));
    Ok(summary)
}

/// Distills modification filings into a timeline, oldest first; events on the
/// same date keep document order.
pub async fn summarize_modifications(
    docs: &[ExtractedDocument],
    company: &CompanyRecord,
    agents: &AgentRunner,
) -> Result<Summary<CorporateEvent>, AgentError> {
    if docs.is_empty() {
        return Ok(Summary::empty());
    }
    let output = run(AgentRole::ModSummary, docs, company, agents).await?;
    let payload: ModSummaryPayload = typed(AgentRole::ModSummary, &output.payload)?;
    let mut summary = Summary::empty();
    summary.provider_fingerprint = Some(output.provider_fingerprint.clone());

    for draft in payload.events {
        let citation = output.citations[draft.citation].clone();
        if let Err(reason) = cited_page(docs, &citation) {
            summary
                .rejected
                .push(format!("event {}: {reason}", draft.date));
            continue;
        }
        summary.items.push(CorporateEvent {
            date: draft.date,
            kind: draft.kind,
            description: draft.description,
            citation,
        });
    }
    summary.items.sort_by(|a, b| {
        a.date
            .cmp(&b.date)
            .then_with(|| a.citation.source_ref.cmp(&b.citation.source_ref))
    });
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names_round_trip() {
        for m in Metric::ALL {
            assert_eq!(Metric::from_name(m.name()), Some(m));
            assert_eq!(
                serde_json::to_value(m).unwrap(),
                Value::String(m.name().into())
            );
        }
        assert!(Metric::Ebit.allows_negative());
        assert!(!Metric::Revenue.allows_negative());
    }
}
