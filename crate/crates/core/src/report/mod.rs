//! Six-section report assembled from run artifacts.
//!
//! Citations are numbered globally in order of first appearance, walking the
//! sections in render order; the same (source, page) pair keeps one number.

mod html;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::agents::schema::{
    AnalystPayload, Audience, CompetitionPayload, CompetitorTier, EventKind, NewsKind, NewsPayload,
    OverallInfoPayload, ResearchNote, Scores, SectorPayload,
};
use crate::agents::{AgentOutput, Citation};
use crate::engine::RunContext;
use crate::extract::Metric;
use crate::fallback::{EpistemicState, FinancialSection};
use crate::intake::CompanyRecord;
use crate::nodes;

pub use html::{render_html, NOT_FOUND_FLAG, NO_EVENTS_LINE};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReportError {
    #[error("missing mandatory artifact {0}")]
    MissingArtifact(&'static str),
    #[error("artifact {node} is malformed: {message}")]
    Malformed { node: &'static str, message: String },
}

/// A piece of text plus the global citation numbers that support it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub text: String,
    pub cites: Vec<usize>,
}

/// Either the content of an optional stream or the reason it is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Block<T> {
    Present(T),
    Gap(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompanyHeader {
    pub company_id: String,
    pub name: String,
    pub sector: String,
    pub headquarters: String,
    pub founders: Vec<String>,
    pub initial_investment_year: i32,
    pub registration: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSizeItem {
    pub claim: Claim,
    pub year: Option<i32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectorBlock {
    pub market_size: Vec<MarketSizeItem>,
    pub trends: Vec<Claim>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsItem {
    pub date: NaiveDate,
    pub kind: NewsKind,
    pub headline: Claim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketIntelligence {
    pub sector: Block<SectorBlock>,
    pub news: Block<Vec<NewsItem>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompetitorRow {
    pub name: String,
    pub tier: CompetitorTier,
    pub funding_status: String,
    pub activity_note: String,
    pub cites: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinancialCell {
    pub text: String,
    pub cites: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FinancialView {
    Registry {
        years: Vec<i32>,
        rows: Vec<(Metric, Vec<Option<FinancialCell>>)>,
    },
    ThirdParty {
        provider: String,
        rows: Vec<(String, FinancialCell)>,
    },
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinancialBlock {
    pub state: EpistemicState,
    pub view: FinancialView,
    pub provenance_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventItem {
    pub date: NaiveDate,
    pub kind: EventKind,
    pub description: Claim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationItem {
    pub audience: Audience,
    pub horizon_days: u16,
    pub action: Claim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResearchBlock {
    pub developments: Vec<Claim>,
    pub blind_spots: Vec<Claim>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalystAssessment {
    pub executive_summary: Claim,
    pub scores: Scores,
    pub recommendations: Vec<RecommendationItem>,
    pub research: Block<ResearchBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub company: CompanyHeader,
    pub overview: Claim,
    pub market: MarketIntelligence,
    pub competition: Block<Vec<CompetitorRow>>,
    pub financial: FinancialBlock,
    pub events: Block<Vec<EventItem>>,
    pub analyst: AnalystAssessment,
    pub citation_index: Vec<Citation>,
}

impl ReportDocument {
    pub fn state(&self) -> EpistemicState {
        self.financial.state
    }
}

#[derive(Default)]
struct CitationIndex {
    entries: Vec<Citation>,
    numbers: HashMap<(String, Option<u32>), usize>,
}

impl CitationIndex {
    fn number(&mut self, citation: &Citation) -> usize {
        let key = (citation.source_ref.clone(), citation.page);
        if let Some(n) = self.numbers.get(&key) {
            return *n;
        }
        self.entries.push(citation.clone());
        let n = self.entries.len();
        self.numbers.insert(key, n);
        n
    }
}

/// Resolves local citation indices of one agent output into global numbers.
struct Cites<'a> {
    node: &'static str,
    local: &'a [Citation],
}

impl Cites<'_> {
    fn map(&self, index: &mut CitationIndex, locals: &[usize]) -> Result<Vec<usize>, ReportError> {
        let mut out = Vec::with_capacity(locals.len());
        for &i in locals {
            let c = self.local.get(i).ok_or_else(|| ReportError::Malformed {
                node: self.node,
                message: format!("citation index {i} out of range"),
            })?;
            let n = index.number(c);
            if !out.contains(&n) {
                out.push(n);
            }
        }
        Ok(out)
    }
}

type Artifacts = BTreeMap<String, Arc<Value>>;

fn artifact<'a>(artifacts: &'a Artifacts, node: &'static str) -> Option<&'a Value> {
    artifacts.get(node).map(|a| a.as_ref())
}

fn agent_output<T: for<'de> Deserialize<'de>>(
    artifacts: &Artifacts,
    node: &'static str,
) -> Result<Option<(AgentOutput, T)>, ReportError> {
    let Some(value) = artifact(artifacts, node) else {
        return Ok(None);
    };
    let malformed = |e: serde_json::Error| ReportError::Malformed {
        node,
        message: e.to_string(),
    };
    let output: AgentOutput = serde_json::from_value(value.clone()).map_err(malformed)?;
    let payload: T = serde_json::from_value(output.payload.clone()).map_err(malformed)?;
    Ok(Some((output, payload)))
}

fn gap(what: &str) -> String {
    format!("{what} unavailable: the stream did not complete in this run.")
}

pub fn assemble_report(ctx: &RunContext) -> Result<ReportDocument, ReportError> {
    assemble_from(ctx.artifacts())
}

/// Builds the report from a node-id keyed artifact map.
pub fn assemble_from(artifacts: &Artifacts) -> Result<ReportDocument, ReportError> {
    let record: CompanyRecord = artifact(artifacts, nodes::INTAKE)
        .and_then(|v| v.get("company"))
        .ok_or(ReportError::MissingArtifact(nodes::INTAKE))
        .and_then(|v| {
            serde_json::from_value(v.clone()).map_err(|e| ReportError::Malformed {
                node: nodes::INTAKE,
                message: e.to_string(),
            })
        })?;
    let (overall, overall_payload) =
        agent_output::<OverallInfoPayload>(artifacts, nodes::OVERALL_INFO)?
            .ok_or(ReportError::MissingArtifact(nodes::OVERALL_INFO))?;
    let (analyst, analyst_payload) = agent_output::<AnalystPayload>(artifacts, nodes::ANALYST)?
        .ok_or(ReportError::MissingArtifact(nodes::ANALYST))?;
    let section: FinancialSection = artifact(artifacts, nodes::FINANCIAL_JOIN)
        .ok_or(ReportError::MissingArtifact(nodes::FINANCIAL_JOIN))
        .and_then(|v| {
            serde_json::from_value(v.clone()).map_err(|e| ReportError::Malformed {
                node: nodes::FINANCIAL_JOIN,
                message: e.to_string(),
            })
        })?;
    section
        .validate()
        .map_err(|message| ReportError::Malformed {
            node: nodes::FINANCIAL_JOIN,
            message,
        })?;

    let mut index = CitationIndex::default();

    // Company overview.
    let cites = Cites {
        node: nodes::OVERALL_INFO,
        local: &overall.citations,
    };
    let overview = Claim {
        text: overall_payload.summary,
        cites: cites.map(&mut index, &overall_payload.citations)?,
    };

    // Market intelligence.
    let sector = match agent_output::<SectorPayload>(artifacts, nodes::SECTOR)? {
        Some((out, payload)) => {
            let cites = Cites {
                node: nodes::SECTOR,
                local: &out.citations,
            };
            let mut market_size = Vec::new();
            for m in payload.market_size {
                market_size.push(MarketSizeItem {
                    claim: Claim {
                        text: format!("{}: {} {}", m.label, m.value, m.unit),
                        cites: cites.map(&mut index, &m.citations)?,
                    },
                    year: m.year,
                });
            }
            let mut trends = Vec::new();
            for t in payload.trends {
                trends.push(Claim {
                    text: t.text,
                    cites: cites.map(&mut index, &t.citations)?,
                });
            }
            Block::Present(SectorBlock {
                market_size,
                trends,
            })
        }
        None => Block::Gap(gap("Sector analysis")),
    };
    let news = match agent_output::<NewsPayload>(artifacts, nodes::NEWS)? {
        Some((out, payload)) => {
            let cites = Cites {
                node: nodes::NEWS,
                local: &out.citations,
            };
            let mut events = payload.events;
            events.sort_by_key(|e| std::cmp::Reverse(e.date));
            let mut items = Vec::new();
            for e in events {
                items.push(NewsItem {
                    date: e.date,
                    kind: e.kind,
                    headline: Claim {
                        text: e.headline,
                        cites: cites.map(&mut index, &[e.citation])?,
                    },
                });
            }
            Block::Present(items)
        }
        None => Block::Gap(gap("News timeline")),
    };

    // Competitive landscape.
    let competition = match agent_output::<CompetitionPayload>(artifacts, nodes::COMPETITION)? {
        Some((out, payload)) => {
            let cites = Cites {
                node: nodes::COMPETITION,
                local: &out.citations,
            };
            let mut rows = Vec::new();
            for c in payload.competitors {
                rows.push(CompetitorRow {
                    cites: cites.map(&mut index, &c.citations)?,
                    name: c.name,
                    tier: c.tier,
                    funding_status: c.funding_status,
                    activity_note: c.activity_note,
                });
            }
            Block::Present(rows)
        }
        None => Block::Gap(gap("Competitive landscape")),
    };

    // Financial summary and corporate events.
    let view = match section.state {
        EpistemicState::RegistryVerified => {
            let years: Vec<i32> = section
                .registry_records
                .iter()
                .map(|r| r.fiscal_year)
                .collect();
            let mut rows = Vec::new();
            for metric in Metric::ALL {
                let cells = section
                    .registry_records
                    .iter()
                    .map(|r| {
                        r.line_items.get(&metric).map(|item| FinancialCell {
                            text: item.raw.clone(),
                            cites: vec![index.number(&item.citation)],
                        })
                    })
                    .collect();
                rows.push((metric, cells));
            }
            FinancialView::Registry { years, rows }
        }
        EpistemicState::ThirdPartyApprox => {
            let entry = section
                .third_party
                .as_ref()
                .expect("validated third-party section");
            let mut rows = Vec::new();
            for field in &entry.fields {
                let value = match &field.value {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                let text = match &field.unit {
                    Some(unit) => format!("{value} {unit}"),
                    None => value,
                };
                let cites = match field.citation {
                    Some(i) => {
                        let c = entry
                            .citations
                            .get(i)
                            .ok_or_else(|| ReportError::Malformed {
                                node: nodes::FINANCIAL_JOIN,
                                message: format!("third-party citation {i} out of range"),
                            })?;
                        vec![index.number(c)]
                    }
                    None => Vec::new(),
                };
                rows.push((field.name.clone(), FinancialCell { text, cites }));
            }
            FinancialView::ThirdParty {
                provider: entry.provider.clone(),
                rows,
            }
        }
        EpistemicState::NotFound => FinancialView::NotFound,
    };
    let financial = FinancialBlock {
        state: section.state,
        view,
        provenance_note: section.provenance_note.clone(),
    };
    let events = match section.state {
        EpistemicState::RegistryVerified => Block::Present(
            section
                .corporate_events
                .iter()
                .map(|e| EventItem {
                    date: e.date,
                    kind: e.kind,
                    description: Claim {
                        text: e.description.clone(),
                        cites: vec![index.number(&e.citation)],
                    },
                })
                .collect(),
        ),
        _ => Block::Gap(
            "Corporate events unavailable: no registry filings were retrieved for this company."
                .into(),
        ),
    };

    // Analyst assessment.
    let cites = Cites {
        node: nodes::ANALYST,
        local: &analyst.citations,
    };
    let executive_summary = Claim {
        text: analyst_payload.executive_summary,
        cites: cites.map(&mut index, &analyst_payload.summary_citations)?,
    };
    let mut recommendations = Vec::new();
    for r in analyst_payload.recommendations {
        recommendations.push(RecommendationItem {
            audience: r.audience,
            horizon_days: r.horizon_days,
            action: Claim {
                text: r.action,
                cites: cites.map(&mut index, &r.citations)?,
            },
        });
    }
    let research = match agent_output::<ResearchNote>(artifacts, nodes::RESEARCHER)? {
        Some((out, payload)) => {
            let cites = Cites {
                node: nodes::RESEARCHER,
                local: &out.citations,
            };
            let mut developments = Vec::new();
            for d in payload.developments {
                developments.push(Claim {
                    text: d.text,
                    cites: cites.map(&mut index, &d.citations)?,
                });
            }
            let mut blind_spots = Vec::new();
            for b in payload.blind_spots {
                blind_spots.push(Claim {
                    text: b.text,
                    cites: cites.map(&mut index, &b.citations)?,
                });
            }
            Block::Present(ResearchBlock {
                developments,
                blind_spots,
            })
        }
        None => Block::Gap(gap("Research note")),
    };

    Ok(ReportDocument {
        company: CompanyHeader {
            company_id: record.company_id,
            name: record.name,
            sector: record.sector,
            headquarters: record.headquarters,
            founders: record.founders,
            initial_investment_year: record.initial_investment_year,
            registration: record.registration,
        },
        overview,
        market: MarketIntelligence { sector, news },
        competition,
        financial,
        events,
        analyst: AnalystAssessment {
            executive_summary,
            scores: analyst_payload.scores,
            recommendations,
            research,
        },
        citation_index: index.entries,
    })
}
