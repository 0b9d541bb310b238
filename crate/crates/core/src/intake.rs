//! Company database, trigger payloads and the anchoring company profile.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::{DateTime, Datelike, Utc};
use serde::{Deserialize, Serialize};

use crate::agents::{numeral_tokens, AgentError, AgentRole, AgentRunner};

pub const PROFILE_SUMMARY_LIMIT: usize = 1200;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanyRecord {
    pub company_id: String,
    pub name: String,
    pub founders: Vec<String>,
    pub sector: String,
    pub initial_investment_year: i32,
    pub headquarters: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub registration: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alt_identifiers: Option<BTreeMap<String, String>>,
}

impl CompanyRecord {
    /// The record's attributes as (attribute, value) pairs, in a fixed order.
    /// Founders contribute one pair each; an absent registration contributes none.
    pub fn facts(&self) -> Vec<AnchorFact> {
        let mut facts = vec![
            AnchorFact::new("name", &self.name),
            AnchorFact::new("sector", &self.sector),
            AnchorFact::new(
                "initial_investment_year",
                self.initial_investment_year.to_string(),
            ),
            AnchorFact::new("headquarters", &self.headquarters),
        ];
        facts.extend(self.founders.iter().map(|f| AnchorFact::new("founder", f)));
        if let Some(reg) = &self.registration {
            facts.push(AnchorFact::new("registration", reg));
        }
        facts
    }

    fn check(&self, current_year: i32) -> Result<(), String> {
        if self.company_id.trim().is_empty() {
            return Err("company_id must not be empty".into());
        }
        if self.name.trim().is_empty() {
            return Err(format!("{}: name must not be empty", self.company_id));
        }
        if !(1900..=current_year).contains(&self.initial_investment_year) {
            return Err(format!(
                "{}: initial_investment_year {} outside [1900, {current_year}]",
                self.company_id, self.initial_investment_year
            ));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum IntakeError {
    #[error("company database not found: {0}")]
    MissingFile(String),
    #[error("company database parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid company record: {0}")]
    InvalidRecord(String),
    #[error("duplicate company_id: {0}")]
    DuplicateId(String),
    #[error("company not found: {0}")]
    NotFound(String),
    #[error("invalid trigger payload: {0}")]
    InvalidPayload(String),
    #[error("anchor fact verification failed: {0}")]
    AnchorMismatch(String),
    #[error(transparent)]
    Agent(#[from] AgentError),
}

/// Read-only after load; shared across runs.
#[derive(Debug, Clone, Default)]
pub struct CompanyDb {
    records: Vec<CompanyRecord>,
}

impl CompanyDb {
    pub fn from_json(text: &str) -> Result<Self, IntakeError> {
        let records: Vec<CompanyRecord> =
            serde_json::from_str(text).map_err(|e| IntakeError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        Self::from_records(records)
    }

    pub fn from_records(records: Vec<CompanyRecord>) -> Result<Self, IntakeError> {
        let current_year = Utc::now().year();
        let mut seen = HashSet::new();
        for record in &records {
            record
                .check(current_year)
                .map_err(IntakeError::InvalidRecord)?;
            if !seen.insert(record.company_id.clone()) {
                return Err(IntakeError::DuplicateId(record.company_id.clone()));
            }
        }
        Ok(Self { records })
    }

    pub fn records(&self) -> &[CompanyRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, company_id: &str) -> Option<&CompanyRecord> {
        self.records.iter().find(|r| r.company_id == company_id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.records).expect("records serialize")
    }
}

pub fn load_company_db(path: impl AsRef<Path>) -> Result<CompanyDb, IntakeError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|_| IntakeError::MissingFile(path.display().to_string()))?;
    CompanyDb::from_json(&text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriggerPayload {
    pub company_id: String,
    pub requested_by: String,
    pub requested_at: DateTime<Utc>,
}

impl TriggerPayload {
    pub fn new(company_id: impl Into<String>, requested_by: impl Into<String>) -> Self {
        Self {
            company_id: company_id.into(),
            requested_by: requested_by.into(),
            requested_at: Utc::now(),
        }
    }

    pub fn validate(&self) -> Result<(), IntakeError> {
        if self.company_id.trim().is_empty() {
            return Err(IntakeError::InvalidPayload(
                "company_id must not be empty".into(),
            ));
        }
        if !is_valid_email(&self.requested_by) {
            return Err(IntakeError::InvalidPayload(format!(
                "requested_by is not an email address: {:?}",
                self.requested_by
            )));
        }
        Ok(())
    }
}

/// Syntactic check only: one `@`, non-empty local part, dotted domain, no whitespace.
pub fn is_valid_email(candidate: &str) -> bool {
    if candidate.chars().any(char::is_whitespace) {
        return false;
    }
    let Some((local, domain)) = candidate.split_once('@') else {
        return false;
    };
    !local.is_empty()
        && !domain.contains('@')
        && domain.contains('.')
        && domain.split('.').all(|label| !label.is_empty())
}

/// Exact, case-sensitive lookup.
pub fn resolve_company<'a>(
    payload: &TriggerPayload,
    db: &'a CompanyDb,
) -> Result<&'a CompanyRecord, IntakeError> {
    db.get(&payload.company_id)
        .ok_or_else(|| IntakeError::NotFound(payload.company_id.clone()))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnchorFact {
    pub attribute: String,
    pub value: String,
}

impl AnchorFact {
    pub fn new(attribute: impl Into<String>, value: impl Into<String>) -> Self {
        Self {
            attribute: attribute.into(),
            value: value.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanyProfile {
    pub summary: String,
    pub anchor_facts: Vec<AnchorFact>,
}

/// Every anchor fact must be one of the record's own (attribute, value)
/// pairs, and every numeral in the summary must come from the record.
pub fn verify_profile(profile: &CompanyProfile, record: &CompanyRecord) -> Result<(), IntakeError> {
    if profile.summary.trim().is_empty() {
        return Err(IntakeError::AnchorMismatch(
            "profile summary is empty".into(),
        ));
    }
    let chars = profile.summary.chars().count();
    if chars > PROFILE_SUMMARY_LIMIT {
        return Err(IntakeError::AnchorMismatch(format!(
            "profile summary is {chars} characters, limit is {PROFILE_SUMMARY_LIMIT}"
        )));
    }
    let facts = record.facts();
    for fact in &profile.anchor_facts {
        if !facts.contains(fact) {
            return Err(IntakeError::AnchorMismatch(format!(
                "{} = {:?} does not appear in the company record",
                fact.attribute, fact.value
            )));
        }
    }
    let record_numerals: HashSet<String> = facts
        .iter()
        .flat_map(|f| numeral_tokens(&f.value))
        .collect();
    for token in numeral_tokens(&profile.summary) {
        if !record_numerals.contains(&token) {
            return Err(IntakeError::AnchorMismatch(format!(
                "summary numeral {token:?} is not a company record value"
            )));
        }
    }
    Ok(())
}

/// Runs the context agent over the record and gates its output on
/// [`verify_profile`].
pub async fn build_profile(
    record: &CompanyRecord,
    agents: &AgentRunner,
) -> Result<CompanyProfile, IntakeError> {
    let inputs = BTreeMap::from([(
        "company".to_string(),
        serde_json::to_value(record).expect("record serializes"),
    )]);
    let output = agents
        .run_agent(AgentRole::ContextAgent, &record.company_id, &inputs)
        .await?;
    let profile: CompanyProfile = serde_json::from_value(output.payload.clone())
        .map_err(|e| IntakeError::AnchorMismatch(format!("profile payload: {e}")))?;
    verify_profile(&profile, record)?;
    Ok(profile)
}
