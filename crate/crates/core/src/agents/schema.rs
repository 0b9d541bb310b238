//! Per-role output schemas.
//!
//! Validation walks the raw JSON so that every broken constraint is reported,
//! not just the first one serde would trip over. Accepted payloads are then
//! read through the typed structs below.
//!
//! Citation rule: an item that carries a numeric field, or a numeral inside
//! one of its designated text fields, must reference at least one citation.
//! Analyst scores and recommendation horizons are judgments, not retrieved
//! facts, and are exempt. News events, financial line items and corporate
//! events must always be cited.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::claims::contains_numeral;
use super::AgentRole;
use crate::extract::{parse_amount, Metric};

pub const SNIPPET_LIMIT: usize = 300;
pub const SCORE_RANGE: (i64, i64) = (1, 10);
pub const HORIZON_RANGE: (i64, i64) = (30, 180);
pub const EARLIEST_FISCAL_YEAR: i32 = 1990;

/// A citation as emitted by a completion, before it is resolved against the
/// sources that were actually in context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationDraft {
    pub source_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub page: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snippet: Option<String>,
}

/// Parsed completion: the role payload plus its citation list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentCandidate {
    pub payload: Value,
    #[serde(default)]
    pub citations: Vec<CitationDraft>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemaViolation {
    pub path: String,
    pub rule: String,
}

impl fmt::Display for SchemaViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.rule)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct OutputReport {
    pub ok: bool,
    pub violations: Vec<SchemaViolation>,
}

impl OutputReport {
    pub fn has_rule(&self, rule: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }
}

impl fmt::Display for OutputReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.violations.iter().map(ToString::to_string).collect();
        write!(f, "{}", lines.join("; "))
    }
}

pub const UNCITED: &str = "uncited quantitative claim";

pub fn validate_output(role: AgentRole, candidate: &AgentCandidate) -> OutputReport {
    let mut w = Walker {
        citations: &candidate.citations,
        out: Vec::new(),
    };
    for (i, c) in candidate.citations.iter().enumerate() {
        let path = format!("citations[{i}]");
        if c.source_ref.trim().is_empty() {
            w.push(&path, "empty source_ref");
        }
        if c.page == Some(0) {
            w.push(&path, "page must be positive");
        }
        if c.snippet
            .as_ref()
            .is_some_and(|s| s.chars().count() > SNIPPET_LIMIT)
        {
            w.push(&path, "snippet longer than 300 characters");
        }
    }
    let Some(root) = w.object("payload", &candidate.payload) else {
        return w.finish();
    };
    match role {
        AgentRole::ContextAgent => context_agent(&mut w, root),
        AgentRole::SourceMapper => source_mapper(&mut w, root),
        AgentRole::Sector => sector(&mut w, root),
        AgentRole::Competition => competition(&mut w, root),
        AgentRole::News => news(&mut w, root),
        AgentRole::Signals => signals(&mut w, root),
        AgentRole::Researcher => researcher(&mut w, root),
        AgentRole::Analyst => analyst(&mut w, root),
        AgentRole::OverallInfo => overall_info(&mut w, root),
        AgentRole::FinSummary => fin_summary(&mut w, root),
        AgentRole::ModSummary => mod_summary(&mut w, root),
        AgentRole::AltFinancials => alt_financials(&mut w, root),
    }
    w.finish()
}

struct Walker<'a> {
    citations: &'a [CitationDraft],
    out: Vec<SchemaViolation>,
}

impl<'a> Walker<'a> {
    fn push(&mut self, path: &str, rule: impl Into<String>) {
        self.out.push(SchemaViolation {
            path: path.to_string(),
            rule: rule.into(),
        });
    }

    fn finish(self) -> OutputReport {
        OutputReport {
            ok: self.out.is_empty(),
            violations: self.out,
        }
    }

    fn object<'v>(&mut self, path: &str, v: &'v Value) -> Option<&'v Map<String, Value>> {
        match v.as_object() {
            Some(m) => Some(m),
            None => {
                self.push(path, "expected object");
                None
            }
        }
    }

    fn array<'v>(&mut self, path: &str, map: &'v Map<String, Value>, key: &str) -> &'v [Value] {
        match map.get(key) {
            Some(Value::Array(items)) => items,
            Some(_) => {
                self.push(&format!("{path}.{key}"), "expected array");
                &[]
            }
            None => {
                self.push(&format!("{path}.{key}"), "missing field");
                &[]
            }
        }
    }

    fn items<'v>(
        &mut self,
        path: &str,
        map: &'v Map<String, Value>,
        key: &str,
    ) -> Vec<(String, &'v Map<String, Value>)> {
        let items = self.array(path, map, key);
        let mut out = Vec::new();
        for (i, item) in items.iter().enumerate() {
            let p = format!("{path}.{key}[{i}]");
            if let Some(m) = self.object(&p, item) {
                out.push((p, m));
            }
        }
        out
    }

    fn string<'v>(
        &mut self,
        path: &str,
        map: &'v Map<String, Value>,
        key: &str,
    ) -> Option<&'v str> {
        match map.get(key) {
            Some(Value::String(s)) if !s.trim().is_empty() => Some(s),
            Some(Value::String(_)) => {
                self.push(&format!("{path}.{key}"), "empty string");
                None
            }
            Some(_) => {
                self.push(&format!("{path}.{key}"), "expected string");
                None
            }
            None => {
                self.push(&format!("{path}.{key}"), "missing field");
                None
            }
        }
    }

    fn number(&mut self, path: &str, map: &Map<String, Value>, key: &str) -> Option<f64> {
        match map.get(key) {
            Some(Value::Number(n)) => n.as_f64(),
            Some(_) => {
                self.push(&format!("{path}.{key}"), "expected number");
                None
            }
            None => {
                self.push(&format!("{path}.{key}"), "missing field");
                None
            }
        }
    }

    fn integer(&mut self, path: &str, map: &Map<String, Value>, key: &str) -> Option<i64> {
        match map.get(key) {
            Some(Value::Number(n)) if n.is_i64() || n.is_u64() => n.as_i64(),
            Some(_) => {
                self.push(&format!("{path}.{key}"), "expected integer");
                None
            }
            None => {
                self.push(&format!("{path}.{key}"), "missing field");
                None
            }
        }
    }

    fn in_range(
        &mut self,
        path: &str,
        map: &Map<String, Value>,
        key: &str,
        (lo, hi): (i64, i64),
        rule: &str,
    ) {
        if let Some(v) = self.integer(path, map, key) {
            if !(lo..=hi).contains(&v) {
                self.push(&format!("{path}.{key}"), rule);
            }
        }
    }

    fn choice(
        &mut self,
        path: &str,
        map: &Map<String, Value>,
        key: &str,
        allowed: &[&str],
        rule: &str,
    ) {
        if let Some(s) = self.string(path, map, key) {
            if !allowed.contains(&s) {
                self.push(&format!("{path}.{key}"), rule);
            }
        }
    }

    fn date(&mut self, path: &str, map: &Map<String, Value>, key: &str) -> Option<NaiveDate> {
        let s = self.string(path, map, key)?;
        match NaiveDate::parse_from_str(s, "%Y-%m-%d") {
            Ok(d) => Some(d),
            Err(_) => {
                self.push(
                    &format!("{path}.{key}"),
                    "invalid date (expected YYYY-MM-DD)",
                );
                None
            }
        }
    }

    fn check_index(&mut self, path: &str, v: &Value) -> Option<usize> {
        match v.as_u64() {
            Some(i) if (i as usize) < self.citations.len() => Some(i as usize),
            Some(_) => {
                self.push(path, "citation index out of range");
                None
            }
            None => {
                self.push(path, "citation index must be a non-negative integer");
                None
            }
        }
    }

    /// Optional list of citation indices; returns the valid ones.
    fn cite_list(&mut self, path: &str, map: &Map<String, Value>, key: &str) -> Vec<usize> {
        let p = format!("{path}.{key}");
        match map.get(key) {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .filter_map(|(i, v)| self.check_index(&format!("{p}[{i}]"), v))
                .collect(),
            Some(_) => {
                self.push(&p, "expected array of citation indices");
                Vec::new()
            }
        }
    }

    /// Optional single citation index.
    fn cite_one(&mut self, path: &str, map: &Map<String, Value>, key: &str) -> Option<usize> {
        match map.get(key) {
            None | Some(Value::Null) => None,
            Some(v) => self.check_index(&format!("{path}.{key}"), v),
        }
    }

    fn claim(&mut self, path: &str, quantitative: bool, cited: bool) {
        if quantitative && !cited {
            self.push(path, UNCITED);
        }
    }

    fn require_cited(&mut self, path: &str, cited: bool) {
        if !cited {
            self.push(path, "missing citation");
        }
    }

    fn require_page(&mut self, path: &str, index: Option<usize>) {
        if let Some(i) = index {
            if self.citations[i].page.is_none() {
                self.push(path, "document citation without page");
            }
        }
    }

    fn text_has_numeral(&mut self, path: &str, map: &Map<String, Value>, key: &str) -> bool {
        self.string(path, map, key).is_some_and(contains_numeral)
    }
}

fn context_agent(w: &mut Walker, root: &Map<String, Value>) {
    w.string("payload", root, "summary");
    for (p, fact) in w.items("payload", root, "anchor_facts") {
        w.string(&p, fact, "attribute");
        w.string(&p, fact, "value");
    }
}

fn source_mapper(w: &mut Walker, root: &Map<String, Value>) {
    for (p, src) in w.items("payload", root, "sources") {
        w.string(&p, src, "name");
        w.string(&p, src, "url");
        let numeric = w.text_has_numeral(&p, src, "rationale");
        let cites = w.cite_list(&p, src, "citations");
        w.claim(&p, numeric, !cites.is_empty());
    }
}

fn sector(w: &mut Walker, root: &Map<String, Value>) {
    for (p, claim) in w.items("payload", root, "market_size") {
        w.string(&p, claim, "label");
        w.number(&p, claim, "value");
        w.string(&p, claim, "unit");
        if claim.contains_key("year") {
            w.integer(&p, claim, "year");
        }
        let cites = w.cite_list(&p, claim, "citations");
        w.claim(&p, true, !cites.is_empty());
    }
    for (p, trend) in w.items("payload", root, "trends") {
        let numeric = w.text_has_numeral(&p, trend, "text");
        let cites = w.cite_list(&p, trend, "citations");
        w.claim(&p, numeric, !cites.is_empty());
        w.require_cited(&p, !cites.is_empty());
    }
}

fn competition(w: &mut Walker, root: &Map<String, Value>) {
    for (p, entry) in w.items("payload", root, "competitors") {
        let named = w.text_has_numeral(&p, entry, "name");
        w.choice(&p, entry, "tier", CompetitorTier::NAMES, "unknown tier");
        let a = w.text_has_numeral(&p, entry, "funding_status");
        let b = w.text_has_numeral(&p, entry, "activity_note");
        let cites = w.cite_list(&p, entry, "citations");
        w.claim(&p, named || a || b, !cites.is_empty());
    }
}

fn news(w: &mut Walker, root: &Map<String, Value>) {
    for (p, event) in w.items("payload", root, "events") {
        w.date(&p, event, "date");
        w.choice(&p, event, "kind", NewsKind::NAMES, "unknown news kind");
        let numeric = w.text_has_numeral(&p, event, "headline");
        let cite = w.cite_one(&p, event, "citation");
        w.claim(&p, numeric, cite.is_some());
        w.require_cited(&p, cite.is_some());
    }
}

fn signals(w: &mut Walker, root: &Map<String, Value>) {
    for (p, entry) in w.items("payload", root, "signals") {
        w.string(&p, entry, "metric");
        w.number(&p, entry, "value");
        w.choice(
            &p,
            entry,
            "direction",
            Direction::NAMES,
            "unknown direction",
        );
        let cite = w.cite_one(&p, entry, "citation");
        w.claim(&p, true, cite.is_some());
    }
}

fn note_items(w: &mut Walker, root: &Map<String, Value>, key: &str) {
    for (p, item) in w.items("payload", root, key) {
        let numeric = w.text_has_numeral(&p, item, "text");
        let cites = w.cite_list(&p, item, "citations");
        w.claim(&p, numeric, !cites.is_empty());
    }
}

fn researcher(w: &mut Walker, root: &Map<String, Value>) {
    note_items(w, root, "developments");
    note_items(w, root, "blind_spots");
}

fn analyst(w: &mut Walker, root: &Map<String, Value>) {
    let numeric = w.text_has_numeral("payload", root, "executive_summary");
    let cites = w.cite_list("payload", root, "summary_citations");
    w.claim("payload.executive_summary", numeric, !cites.is_empty());

    match root.get("scores") {
        Some(Value::Object(scores)) => {
            w.in_range(
                "payload.scores",
                scores,
                "market_timing",
                SCORE_RANGE,
                "score out of range 1-10",
            );
            w.in_range(
                "payload.scores",
                scores,
                "product_differentiation",
                SCORE_RANGE,
                "score out of range 1-10",
            );
        }
        Some(_) => w.push("payload.scores", "expected object"),
        None => w.push("payload.scores", "missing field"),
    }

    let mut audiences = BTreeSet::new();
    for (p, rec) in w.items("payload", root, "recommendations") {
        w.choice(&p, rec, "audience", Audience::NAMES, "unknown audience");
        if let Some(a) = rec.get("audience").and_then(Value::as_str) {
            audiences.insert(a.to_string());
        }
        w.in_range(
            &p,
            rec,
            "horizon_days",
            HORIZON_RANGE,
            "horizon_days out of range 30-180",
        );
        let numeric = w.text_has_numeral(&p, rec, "action");
        let cites = w.cite_list(&p, rec, "citations");
        w.claim(&p, numeric, !cites.is_empty());
    }
    for audience in Audience::NAMES {
        if !audiences.contains(*audience) {
            w.push(
                "payload.recommendations",
                format!("no recommendation for audience {audience}"),
            );
        }
    }
}

fn overall_info(w: &mut Walker, root: &Map<String, Value>) {
    let numeric = w.text_has_numeral("payload", root, "summary");
    let cites = w.cite_list("payload", root, "citations");
    w.claim("payload.summary", numeric, !cites.is_empty());
}

fn fin_summary(w: &mut Walker, root: &Map<String, Value>) {
    let current_year = Utc::now().year();
    let mut years = BTreeSet::new();
    for (p, record) in w.items("payload", root, "records") {
        if let Some(year) = w.integer(&p, record, "fiscal_year") {
            if !(i64::from(EARLIEST_FISCAL_YEAR)..=i64::from(current_year)).contains(&year) {
                w.push(&format!("{p}.fiscal_year"), "fiscal_year out of range");
            } else if !years.insert(year) {
                w.push(&format!("{p}.fiscal_year"), "duplicate fiscal_year");
            }
        }
        let Some(items) = record.get("line_items").and_then(Value::as_object) else {
            w.push(&format!("{p}.line_items"), "expected object");
            continue;
        };
        for (name, item) in items {
            let ip = format!("{p}.line_items.{name}");
            let Some(metric) = Metric::from_name(name) else {
                w.push(&ip, "unknown metric");
                continue;
            };
            let Some(item) = w.object(&ip, item) else {
                continue;
            };
            if let Some(raw) = w.string(&ip, item, "amount") {
                match parse_amount(raw) {
                    Ok(parsed) => {
                        if parsed.value.is_sign_negative() && !metric.allows_negative() {
                            w.push(&format!("{ip}.amount"), "negative amount not permitted");
                        }
                    }
                    Err(e) => w.push(&format!("{ip}.amount"), format!("unparseable amount: {e}")),
                }
            }
            let cite = w.cite_one(&ip, item, "citation");
            w.claim(&ip, true, cite.is_some());
            w.require_page(&ip, cite);
        }
    }
}

fn mod_summary(w: &mut Walker, root: &Map<String, Value>) {
    for (p, event) in w.items("payload", root, "events") {
        w.date(&p, event, "date");
        w.choice(&p, event, "kind", EventKind::NAMES, "unknown event kind");
        w.string(&p, event, "description");
        let cite = w.cite_one(&p, event, "citation");
        w.require_cited(&p, cite.is_some());
        w.require_page(&p, cite);
    }
}

fn alt_financials(w: &mut Walker, root: &Map<String, Value>) {
    w.string("payload", root, "provider");
    for (p, field) in w.items("payload", root, "fields") {
        let named = w.text_has_numeral(&p, field, "name");
        let numeric = named
            || match field.get("value") {
                Some(Value::Number(_)) => true,
                Some(Value::String(s)) => contains_numeral(s),
                Some(_) => {
                    w.push(&format!("{p}.value"), "expected number or string");
                    false
                }
                None => {
                    w.push(&format!("{p}.value"), "missing field");
                    false
                }
            };
        let cite = w.cite_one(&p, field, "citation");
        w.claim(&p, numeric, cite.is_some());
    }
}

macro_rules! closed_enum {
    ($name:ident { $($variant:ident),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const NAMES: &'static [&'static str] = &[$(stringify!($variant)),+];
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => stringify!($variant)),+ }
            }
        }
    };
}

closed_enum!(CompetitorTier {
    Direct,
    Adjacent,
    NicheInnovator
});
closed_enum!(NewsKind {
    Partnership,
    ProductLaunch,
    Funding,
    Other
});
closed_enum!(Direction { Up, Down, Flat });
closed_enum!(Audience { Fund, Startup });
closed_enum!(EventKind {
    BoardChange,
    CapitalIncrease,
    StatutoryModification,
    Other
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub name: String,
    pub url: String,
    pub rationale: String,
    #[serde(default)]
    pub citations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceMapPayload {
    pub sources: Vec<SourceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSizeClaim {
    pub label: String,
    pub value: f64,
    pub unit: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    pub citations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CitedText {
    pub text: String,
    #[serde(default)]
    pub citations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorPayload {
    pub market_size: Vec<MarketSizeClaim>,
    pub trends: Vec<CitedText>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitorEntry {
    pub name: String,
    pub tier: CompetitorTier,
    pub funding_status: String,
    pub activity_note: String,
    #[serde(default)]
    pub citations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitionPayload {
    pub competitors: Vec<CompetitorEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsEvent {
    pub date: NaiveDate,
    pub kind: NewsKind,
    pub headline: String,
    pub citation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsPayload {
    pub events: Vec<NewsEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalEntry {
    pub metric: String,
    pub value: f64,
    pub direction: Direction,
    pub citation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalsPayload {
    pub signals: Vec<SignalEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearchNote {
    pub developments: Vec<CitedText>,
    pub blind_spots: Vec<CitedText>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scores {
    pub market_timing: u8,
    pub product_differentiation: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub audience: Audience,
    pub horizon_days: u16,
    pub action: String,
    #[serde(default)]
    pub citations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalystPayload {
    pub executive_summary: String,
    #[serde(default)]
    pub summary_citations: Vec<usize>,
    pub scores: Scores,
    pub recommendations: Vec<Recommendation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallInfoPayload {
    pub summary: String,
    #[serde(default)]
    pub citations: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineItemDraft {
    pub amount: String,
    pub citation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinRecordDraft {
    pub fiscal_year: i32,
    pub line_items: BTreeMap<Metric, LineItemDraft>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinSummaryPayload {
    pub records: Vec<FinRecordDraft>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDraft {
    pub date: NaiveDate,
    pub kind: EventKind,
    pub description: String,
    pub citation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModSummaryPayload {
    pub events: Vec<EventDraft>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltFieldDraft {
    pub name: String,
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub citation: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltFinancialsPayload {
    pub provider: String,
    pub fields: Vec<AltFieldDraft>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn cite(n: usize) -> Vec<CitationDraft> {
        (0..n)
            .map(|i| CitationDraft {
                source_ref: format!("https://src.example/{i}"),
                page: None,
                snippet: None,
            })
            .collect()
    }

    fn check(role: AgentRole, payload: Value, citations: Vec<CitationDraft>) -> OutputReport {
        validate_output(role, &AgentCandidate { payload, citations })
    }

    #[test]
    fn numerals_in_rendered_labels_need_citations() {
        let competitor = json!({"competitors": [
            {"name": "Robotec 360", "tier": "Direct", "funding_status": "Private", "activity_note": "Hiring"}
        ]});
        let report = check(AgentRole::Competition, competitor, vec![]);
        assert!(
            report.violations.iter().any(|v| v.rule == UNCITED),
            "{report}"
        );

        let alt = json!({"provider": "p", "fields": [{"name": "Revenue 2023", "value": "strong"}]});
        let report = check(AgentRole::AltFinancials, alt, vec![]);
        assert!(
            report.violations.iter().any(|v| v.rule == UNCITED),
            "{report}"
        );

        let plain = json!({"competitors": [
            {"name": "PackBot GmbH", "tier": "Adjacent", "funding_status": "Private", "activity_note": "Hiring"}
        ]});
        assert!(check(AgentRole::Competition, plain, vec![])
            .violations
            .is_empty());
    }

    fn analyst_payload(mt: i64, pd: i64, horizon: i64) -> Value {
        json!({
            "executive_summary": "Strong positioning.",
            "scores": {"market_timing": mt, "product_differentiation": pd},
            "recommendations": [
                {"audience": "Fund", "horizon_days": horizon, "action": "Schedule a follow-up review."},
                {"audience": "Startup", "horizon_days": 90, "action": "Hire a CFO."}
            ]
        })
    }

    #[test]
    fn analyst_boundary_scores_accepted() {
        let report = check(AgentRole::Analyst, analyst_payload(10, 1, 30), vec![]);
        assert!(report.ok, "{report}");
        assert!(check(AgentRole::Analyst, analyst_payload(5, 5, 180), vec![]).ok);
    }

    #[test]
    fn analyst_out_of_range_rejected() {
        let report = check(AgentRole::Analyst, analyst_payload(11, 0, 200), vec![]);
        assert!(report.has_rule("score out of range 1-10"));
        assert!(report.has_rule("horizon_days out of range 30-180"));
        assert_eq!(report.violations.len(), 3);
        assert!(!check(AgentRole::Analyst, analyst_payload(5, 5, 29), vec![]).ok);
    }

    #[test]
    fn analyst_needs_both_audiences() {
        let mut payload = analyst_payload(5, 5, 60);
        payload["recommendations"].as_array_mut().unwrap().pop();
        let report = check(AgentRole::Analyst, payload, vec![]);
        assert!(report.has_rule("no recommendation for audience Startup"));
    }

    #[test]
    fn unknown_tier_rejected() {
        let payload = json!({"competitors": [
            {"name": "X", "tier": "Indirect", "funding_status": "Seed", "activity_note": "Hiring"}
        ]});
        let report = check(AgentRole::Competition, payload, vec![]);
        assert!(report.has_rule("unknown tier"), "{report}");
    }

    #[test]
    fn three_tiers_accepted() {
        let payload = json!({"competitors": [
            {"name": "A", "tier": "Direct", "funding_status": "Series B", "activity_note": "Expanding", "citations": [0]},
            {"name": "B", "tier": "Adjacent", "funding_status": "Bootstrapped", "activity_note": "Quiet"},
            {"name": "C", "tier": "NicheInnovator", "funding_status": "Raised 3M", "activity_note": "Pilot", "citations": [1]}
        ]});
        assert!(check(AgentRole::Competition, payload, cite(2)).ok);
    }

    #[test]
    fn uncited_signal_value_rejected() {
        let payload = json!({"signals": [{"metric": "headcount", "value": 42, "direction": "Up"}]});
        let report = check(AgentRole::Signals, payload.clone(), vec![]);
        assert!(report.has_rule(UNCITED));
        let mut cited = payload;
        cited["signals"][0]["citation"] = json!(0);
        assert!(check(AgentRole::Signals, cited, cite(1)).ok);
    }

    #[test]
    fn numerals_in_free_text_need_citations() {
        let payload = json!({"summary": "Revenue grew 40% last year."});
        assert!(check(AgentRole::OverallInfo, payload, vec![]).has_rule(UNCITED));
        let payload = json!({"summary": "A growing robotics company."});
        assert!(check(AgentRole::OverallInfo, payload, vec![]).ok);
    }

    #[test]
    fn citation_index_must_resolve() {
        let payload = json!({"summary": "Up 40%.", "citations": [3]});
        let report = check(AgentRole::OverallInfo, payload, cite(1));
        assert!(report.has_rule("citation index out of range"));
        assert!(report.has_rule(UNCITED));
    }

    #[test]
    fn financial_items_need_paged_citations() {
        let payload = json!({"records": [{"fiscal_year": 2023, "line_items": {
            "Assets": {"amount": "1.250.000,00", "citation": 0},
            "EBIT": {"amount": "(45.000,00)", "citation": 0}
        }}]});
        let report = check(AgentRole::FinSummary, payload.clone(), cite(1));
        assert!(report.has_rule("document citation without page"));
        let mut paged = cite(1);
        paged[0].page = Some(2);
        assert!(check(AgentRole::FinSummary, payload, paged).ok);
    }

    #[test]
    fn financial_sign_and_year_rules() {
        let mut paged = cite(1);
        paged[0].page = Some(1);
        let payload = json!({"records": [
            {"fiscal_year": 2023, "line_items": {"Revenue": {"amount": "-10,00", "citation": 0}}},
            {"fiscal_year": 2023, "line_items": {"Cash": {"amount": "1,00", "citation": 0}}},
            {"fiscal_year": 1980, "line_items": {}}
        ]});
        let report = check(AgentRole::FinSummary, payload, paged);
        assert!(report.has_rule("negative amount not permitted"));
        assert!(report.has_rule("duplicate fiscal_year"));
        assert!(report.has_rule("unknown metric"));
        assert!(report.has_rule("fiscal_year out of range"));
    }

    #[test]
    fn news_requires_valid_kind_date_and_citation() {
        let payload = json!({"events": [
            {"date": "2024-02-30", "kind": "Rumour", "headline": "Something happened"}
        ]});
        let report = check(AgentRole::News, payload, vec![]);
        assert!(report.has_rule("invalid date (expected YYYY-MM-DD)"));
        assert!(report.has_rule("unknown news kind"));
        assert!(report.has_rule("missing citation"));
    }

    #[test]
    fn non_object_payload() {
        assert!(check(AgentRole::Sector, json!([1, 2]), vec![]).has_rule("expected object"));
    }

    #[test]
    fn citation_drafts_checked() {
        let bad = vec![CitationDraft {
            source_ref: " ".into(),
            page: Some(0),
            snippet: Some("x".repeat(301)),
        }];
        let report = check(AgentRole::OverallInfo, json!({"summary": "ok"}), bad);
        assert_eq!(report.violations.len(), 3);
    }
}
