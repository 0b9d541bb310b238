//! Deterministic HTML rendering with inline styles only.
//!
//! Markup conventions the tests and the console rely on:
//! - every claim sits in an element with `data-claim`, its anchors inside it;
//! - numbers that are structure rather than claims (fiscal-year headers,
//!   dates, scores, horizons, the company header, the citation list) sit in
//!   elements carrying a `data-role`;
//! - the financial section carries `data-state`.

use std::fmt::Write;

use html_escape::{encode_double_quoted_attribute as attr, encode_text as text};

use super::{
    Block, Claim, EventItem, FinancialCell, FinancialView, NewsItem, ReportDocument, ResearchBlock,
    SectorBlock,
};
use crate::agents::Citation;

pub const NO_EVENTS_LINE: &str = "No statutory changes retrieved.";
pub const NOT_FOUND_FLAG: &str = "Not Found";

const BODY: &str = "font-family:Georgia,serif;color:#1d2330;max-width:880px;margin:0 auto;padding:24px;line-height:1.5";
const H2: &str =
    "font-size:20px;border-bottom:2px solid #d8dde6;padding-bottom:4px;margin-top:32px";
const H3: &str = "font-size:16px;margin:16px 0 6px";
const TABLE: &str = "border-collapse:collapse;width:100%;font-size:14px";
const TH: &str = "text-align:left;border:1px solid #d8dde6;background:#f3f5f8;padding:6px 8px";
const TD: &str = "border:1px solid #d8dde6;padding:6px 8px";
const FLAG: &str =
    "border:1px solid #d8dde6;padding:6px 8px;background:#fdecea;color:#a12622;font-weight:bold";
const GAP: &str = "color:#7a5b00;background:#fff8e1;padding:6px 10px;border-left:3px solid #e0b400";
const NOTE: &str = "font-size:13px;color:#4a5263;font-style:italic";
const BADGE: &str =
    "display:inline-block;font-size:12px;padding:2px 8px;border-radius:10px;background:#e8edf5";

struct Out(String);

impl Out {
    fn push(&mut self, s: &str) {
        self.0.push_str(s);
    }

    fn text(&mut self, s: &str) {
        self.0.push_str(&text(s));
    }

    fn anchors(&mut self, cites: &[usize]) {
        for n in cites {
            let _ = write!(
                self.0,
                r##"<sup class="cite" style="font-size:11px"><a href="#cite-{n}">[{n}]</a></sup>"##
            );
        }
    }

    fn claim(&mut self, tag: &str, claim: &Claim) {
        let _ = write!(self.0, "<{tag} data-claim>");
        self.text(&claim.text);
        self.anchors(&claim.cites);
        let _ = write!(self.0, "</{tag}>");
    }

    fn gap(&mut self, line: &str) {
        let _ = write!(self.0, r#"<p class="gap" data-gap style="{GAP}">"#);
        self.text(line);
        self.push("</p>");
    }

    fn section_open(&mut self, id: &str, title: &str) {
        let _ = write!(
            self.0,
            r#"<section id="{id}" data-section="{id}"><h2 style="{H2}">"#
        );
        self.text(title);
        self.push("</h2>");
    }
}

/// Renders the report; identical documents give byte-identical output.
pub fn render_html(report: &ReportDocument) -> String {
    let mut out = Out(String::with_capacity(16 * 1024));
    out.push(
        "<!DOCTYPE html>\n<html lang=\"en\"><head><meta charset=\"utf-8\"><title>Due diligence: ",
    );
    out.text(&report.company.name);
    let _ = write!(out.0, "</title></head>\n<body style=\"{BODY}\">\n");

    header(&mut out, report);
    out.section_open("company-overview", "Company Overview");
    out.claim("p", &report.overview);
    out.push("</section>\n");

    out.section_open("market-intelligence", "Market Intelligence");
    sector(&mut out, &report.market.sector);
    news(&mut out, &report.market.news);
    out.push("</section>\n");

    out.section_open("competitive-landscape", "Competitive Landscape");
    competition(&mut out, report);
    out.push("</section>\n");

    financial(&mut out, report);

    out.section_open("corporate-events", "Corporate Events");
    events(&mut out, &report.events);
    out.push("</section>\n");

    analyst(&mut out, report);
    citations(&mut out, &report.citation_index);
    out.push("</body></html>\n");
    out.0
}

fn header(out: &mut Out, report: &ReportDocument) {
    let c = &report.company;
    out.push(r#"<header data-role="record"><h1 style="font-size:26px;margin-bottom:4px">"#);
    out.text(&c.name);
    let _ = write!(out.0, r#"</h1><p style="{NOTE}">"#);
    out.text(&format!(
        "{} | {} | Founders: {} | Initial investment: {}",
        c.sector,
        c.headquarters,
        c.founders.join(", "),
        c.initial_investment_year
    ));
    if let Some(reg) = &c.registration {
        out.text(&format!(" | Registry number: {reg}"));
    }
    out.push("</p></header>\n");
}

fn sector(out: &mut Out, block: &Block<SectorBlock>) {
    let _ = write!(
        out.0,
        r#"<div data-block="sector"><h3 style="{H3}">Sector</h3>"#
    );
    match block {
        Block::Present(s) => {
            if !s.market_size.is_empty() {
                out.push("<ul>");
                for m in &s.market_size {
                    out.push("<li data-claim>");
                    out.text(&m.claim.text);
                    if let Some(year) = m.year {
                        let _ = write!(out.0, r#" (<span data-role="period">{year}</span>)"#);
                    }
                    out.anchors(&m.claim.cites);
                    out.push("</li>");
                }
                out.push("</ul>");
            }
            if !s.trends.is_empty() {
                out.push("<ul>");
                for t in &s.trends {
                    out.claim("li", t);
                }
                out.push("</ul>");
            }
        }
        Block::Gap(line) => out.gap(line),
    }
    out.push("</div>");
}

fn news(out: &mut Out, block: &Block<Vec<NewsItem>>) {
    let _ = write!(
        out.0,
        r#"<div data-block="news"><h3 style="{H3}">News</h3>"#
    );
    match block {
        Block::Present(items) if items.is_empty() => out.gap("No recent news events were found."),
        Block::Present(items) => {
            out.push("<ul>");
            for item in items {
                out.push("<li data-claim>");
                let _ = write!(out.0, r#"<time data-role="date">{}</time> "#, item.date);
                let _ = write!(
                    out.0,
                    r#"<span style="{BADGE}">{}</span> "#,
                    item.kind.as_str()
                );
                out.text(&item.headline.text);
                out.anchors(&item.headline.cites);
                out.push("</li>");
            }
            out.push("</ul>");
        }
        Block::Gap(line) => out.gap(line),
    }
    out.push("</div>");
}

fn competition(out: &mut Out, report: &ReportDocument) {
    match &report.competition {
        Block::Present(rows) if rows.is_empty() => out.gap("No competitors were identified."),
        Block::Present(rows) => {
            let _ = write!(
                out.0,
                r#"<table style="{TABLE}"><thead><tr><th style="{TH}">Competitor</th><th style="{TH}">Tier</th><th style="{TH}">Funding</th><th style="{TH}">Recent activity</th></tr></thead><tbody>"#
            );
            for row in rows {
                out.push("<tr data-claim>");
                for (i, cell) in [
                    row.name.as_str(),
                    row.tier.as_str(),
                    &row.funding_status,
                    &row.activity_note,
                ]
                .into_iter()
                .enumerate()
                {
                    let _ = write!(out.0, r#"<td style="{TD}">"#);
                    out.text(cell);
                    if i == 3 {
                        out.anchors(&row.cites);
                    }
                    out.push("</td>");
                }
                out.push("</tr>");
            }
            out.push("</tbody></table>");
        }
        Block::Gap(line) => out.gap(line),
    }
}

fn cell(out: &mut Out, cell: &FinancialCell) {
    let _ = write!(out.0, r#"<td data-claim style="{TD}">"#);
    out.text(&cell.text);
    out.anchors(&cell.cites);
    out.push("</td>");
}

fn financial(out: &mut Out, report: &ReportDocument) {
    let f = &report.financial;
    let _ = write!(
        out.0,
        r#"<section id="financial-summary" data-section="financial-summary" data-state="{}"><h2 style="{H2}">Financial Summary</h2>"#,
        f.state.marker()
    );
    let _ = write!(
        out.0,
        r#"<table data-role="financials" style="{TABLE}"><thead><tr><th style="{TH}">Metric</th>"#
    );
    match &f.view {
        FinancialView::Registry { years, rows } => {
            for year in years {
                let _ = write!(
                    out.0,
                    r#"<th data-role="period" style="{TH}">FY{year}</th>"#
                );
            }
            out.push("</tr></thead><tbody>");
            for (metric, cells) in rows {
                let _ = write!(
                    out.0,
                    r#"<tr><th scope="row" style="{TH}">{}</th>"#,
                    metric.name()
                );
                for c in cells {
                    match c {
                        Some(c) => cell(out, c),
                        None => {
                            let _ = write!(out.0, r#"<td data-missing style="{TD}">n/a</td>"#);
                        }
                    }
                }
                out.push("</tr>");
            }
        }
        FinancialView::ThirdParty { provider, rows } => {
            let _ = write!(out.0, r#"<th data-role="source" style="{TH}">"#);
            out.text(provider);
            out.push(" (third-party)</th></tr></thead><tbody>");
            // The label is part of the claim: the whole row carries it.
            for (name, c) in rows {
                let _ = write!(out.0, r#"<tr data-claim><th scope="row" style="{TH}">"#);
                out.text(name);
                let _ = write!(out.0, r#"</th><td style="{TD}">"#);
                out.text(&c.text);
                out.anchors(&c.cites);
                out.push("</td></tr>");
            }
        }
        FinancialView::NotFound => {
            let _ = write!(out.0, r#"<th style="{TH}">Status</th></tr></thead><tbody>"#);
            let _ = write!(
                out.0,
                r#"<tr><th scope="row" style="{TH}">Financial figures</th><td data-flag="not-found" style="{FLAG}">{NOT_FOUND_FLAG}</td></tr>"#
            );
        }
    }
    out.push("</tbody></table>");
    let _ = write!(out.0, r#"<p data-role="provenance" style="{NOTE}">"#);
    out.text(&f.provenance_note);
    out.push("</p></section>\n");
}

fn events(out: &mut Out, block: &Block<Vec<EventItem>>) {
    match block {
        Block::Present(items) if items.is_empty() => out.gap(NO_EVENTS_LINE),
        Block::Present(items) => {
            out.push("<ul>");
            for e in items {
                out.push("<li data-claim>");
                let _ = write!(out.0, r#"<time data-role="date">{}</time> "#, e.date);
                let _ = write!(
                    out.0,
                    r#"<span style="{BADGE}">{}</span> "#,
                    e.kind.as_str()
                );
                out.text(&e.description.text);
                out.anchors(&e.description.cites);
                out.push("</li>");
            }
            out.push("</ul>");
        }
        Block::Gap(line) => out.gap(line),
    }
}

fn research(out: &mut Out, block: &Block<ResearchBlock>) {
    let _ = write!(
        out.0,
        r#"<div data-block="research"><h3 style="{H3}">Research note</h3>"#
    );
    match block {
        Block::Present(r) => {
            for (title, items) in [
                ("Recent developments", &r.developments),
                ("Blind spots", &r.blind_spots),
            ] {
                let _ = write!(out.0, r#"<p style="{NOTE}">{title}</p><ul>"#);
                for item in items {
                    out.claim("li", item);
                }
                out.push("</ul>");
            }
        }
        Block::Gap(line) => out.gap(line),
    }
    out.push("</div>");
}

fn analyst(out: &mut Out, report: &ReportDocument) {
    let a = &report.analyst;
    out.section_open("analyst-assessment", "Analyst Assessment");
    out.claim("p", &a.executive_summary);
    let _ = write!(
        out.0,
        r#"<p>Market timing: <span data-role="score">{}/10</span> | Product differentiation: <span data-role="score">{}/10</span></p>"#,
        a.scores.market_timing, a.scores.product_differentiation
    );
    if !a.recommendations.is_empty() {
        let _ = write!(
            out.0,
            r#"<table style="{TABLE}"><thead><tr><th style="{TH}">Audience</th><th style="{TH}">Horizon</th><th style="{TH}">Action</th></tr></thead><tbody>"#
        );
        for r in &a.recommendations {
            let _ = write!(
                out.0,
                r#"<tr><td style="{TD}">{}</td><td style="{TD}"><span data-role="horizon">{} days</span></td>"#,
                r.audience.as_str(),
                r.horizon_days
            );
            let _ = write!(out.0, r#"<td data-claim style="{TD}">"#);
            out.text(&r.action.text);
            out.anchors(&r.action.cites);
            out.push("</td></tr>");
        }
        out.push("</tbody></table>");
    }
    research(out, &a.research);
    out.push("</section>\n");
}

fn citations(out: &mut Out, index: &[Citation]) {
    out.section_open("citations", "Sources");
    out.push(r#"<ol data-role="citation-index" style="font-size:13px">"#);
    for (i, c) in index.iter().enumerate() {
        let _ = write!(out.0, r#"<li id="cite-{}">"#, i + 1);
        if c.source_ref.starts_with("http://") || c.source_ref.starts_with("https://") {
            let _ = write!(out.0, r#"<a href="{}">"#, attr(&c.source_ref));
            out.text(&c.source_ref);
            out.push("</a>");
        } else {
            out.text(&c.source_ref);
        }
        if let Some(page) = c.page {
            let _ = write!(out.0, ", page {page}");
        }
        let _ = write!(out.0, ", retrieved {}", c.retrieved_at.format("%Y-%m-%d"));
        if let Some(snippet) = &c.snippet {
            out.push(r#" <q style="color:#4a5263">"#);
            out.text(snippet);
            out.push("</q>");
        }
        out.push("</li>");
    }
    out.push("</ol></section>\n");
}
