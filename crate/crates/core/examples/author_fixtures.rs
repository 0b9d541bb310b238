//! Authors the checked-in fixture corpus: company DB, registry PDFs and
//! indexes, the MANIFEST of planted values, agent completions, retrieval
//! results and third-party provider files.
//!
//! Run from anywhere: `cargo run -p diligence-core --example author_fixtures`.
//! Output is deterministic; re-running rewrites identical files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use diligence_core::agents::{AgentRole, PromptLibrary};
use diligence_core::registry::sha256_hex;
use lopdf::content::{Content, Operation};
use lopdf::{dictionary, Document, Object, Stream};
use serde_json::{json, Value};

const RETRIEVED_AT: &str = "2024-06-01T09:00:00Z";

fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../..")
        .canonicalize()
        .unwrap()
}

fn write_json(path: &Path, value: &Value) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, serde_json::to_string_pretty(value).unwrap() + "\n").unwrap();
}

/// One positioned text run: x, y, font size, text.
type Run = (f32, f32, f32, &'static str);

fn pdf(pages: &[Vec<Run>]) -> Vec<u8> {
    let mut doc = Document::with_version("1.5");
    let pages_id = doc.new_object_id();
    let font_id = doc.add_object(dictionary! {
        "Type" => "Font",
        "Subtype" => "Type1",
        "BaseFont" => "Helvetica",
        "Encoding" => "WinAnsiEncoding",
    });
    let resources_id = doc.add_object(dictionary! {
        "Font" => dictionary! { "F1" => font_id },
    });
    let mut kids = Vec::new();
    for runs in pages {
        let mut operations = Vec::new();
        for &(x, y, size, text) in runs {
            operations.push(Operation::new("BT", vec![]));
            operations.push(Operation::new("Tf", vec!["F1".into(), size.into()]));
            operations.push(Operation::new("Td", vec![x.into(), y.into()]));
            operations.push(Operation::new("Tj", vec![Object::string_literal(text)]));
            operations.push(Operation::new("ET", vec![]));
        }
        let content = Content { operations };
        let content_id = doc.add_object(Stream::new(dictionary! {}, content.encode().unwrap()));
        let page_id = doc.add_object(dictionary! {
            "Type" => "Page",
            "Parent" => pages_id,
            "Contents" => content_id,
            "MediaBox" => vec![0.into(), 0.into(), 612.into(), 792.into()],
        });
        kids.push(page_id.into());
    }
    let count = kids.len() as i64;
    doc.objects.insert(
        pages_id,
        Object::Dictionary(dictionary! {
            "Type" => "Pages",
            "Kids" => kids,
            "Count" => count,
            "Resources" => resources_id,
        }),
    );
    let catalog_id = doc.add_object(dictionary! {
        "Type" => "Catalog",
        "Pages" => pages_id,
    });
    doc.trailer.set("Root", catalog_id);
    let mut bytes = Vec::new();
    doc.save_to(&mut bytes).unwrap();
    bytes
}

struct Statement {
    year: i32,
    /// (label, amount) rows of the left column.
    assets: [(&'static str, &'static str); 6],
    /// (label, amount) rows of the right column.
    equity: [(&'static str, &'static str); 7],
    income: [(&'static str, &'static str); 7],
    title_bs: &'static str,
    title_is: &'static str,
}

fn statement_pdf(s: &Statement) -> Vec<u8> {
    let mut p1: Vec<Run> = vec![
        (72.0, 740.0, 12.0, s.title_bs),
        (72.0, 722.0, 9.0, "GEMI 045612378000 - amounts in EUR"),
        (72.0, 690.0, 10.0, "ASSETS"),
        (330.0, 690.0, 10.0, "EQUITY AND LIABILITIES"),
    ];
    let mut y = 670.0;
    for (label, amount) in s.assets {
        p1.push((72.0, y, 10.0, label));
        p1.push((220.0, y, 10.0, amount));
        y -= 15.0;
    }
    let mut y = 670.0;
    for (label, amount) in s.equity {
        p1.push((330.0, y, 10.0, label));
        p1.push((480.0, y, 10.0, amount));
        y -= 15.0;
    }
    p1.push((
        72.0,
        80.0,
        9.0,
        "The accompanying notes form an integral part of these financial statements. Page 1 of 2",
    ));

    let mut p2: Vec<Run> = vec![(72.0, 740.0, 12.0, s.title_is)];
    let mut y = 700.0;
    for (label, amount) in s.income {
        p2.push((72.0, y, 10.0, label));
        p2.push((220.0, y, 10.0, amount));
        y -= 15.0;
    }
    p2.push((
        72.0,
        80.0,
        9.0,
        "The accompanying notes form an integral part of these financial statements. Page 2 of 2",
    ));
    pdf(&[p1, p2])
}

struct Company {
    id: &'static str,
    record: Value,
    intel: Intel,
}

struct Intel {
    market: (&'static str, f64, &'static str, i32),
    trend: &'static str,
    competitors: [(&'static str, &'static str, &'static str, &'static str); 2],
    news: [(&'static str, &'static str, &'static str); 2],
    signal: (&'static str, f64, &'static str),
    development: &'static str,
    blind_spot: &'static str,
    executive_summary: &'static str,
    scores: (u8, u8),
    fund_action: &'static str,
    startup_action: &'static str,
    overall: &'static str,
}

fn companies() -> Vec<Company> {
    vec![
        Company {
            id: "aegean-robotics",
            record: json!({
                "company_id": "aegean-robotics",
                "name": "Aegean Robotics S.A.",
                "founders": ["Eleni Papadaki", "Nikos Vlachos"],
                "sector": "Industrial robotics",
                "initial_investment_year": 2019,
                "headquarters": "Athens, Greece",
                "registration": "045612378000",
                "alt_identifiers": {"crunchbase": "aegean-robotics"}
            }),
            intel: Intel {
                market: ("Greek industrial automation market", 1.4, "EUR bn", 2023),
                trend: "Mid-sized food processors are automating palletising lines, with adoption up 18% year on year.",
                competitors: [
                    ("Robotec Hellas", "Direct", "Series B, EUR 22m raised", "Opened a Thessaloniki integration centre"),
                    ("PackBot GmbH", "Adjacent", "Corporate-backed", "Entered the Greek market through distributors"),
                ],
                news: [
                    ("2024-03-14", "Partnership", "Aegean Robotics partners with a Cretan olive oil cooperative on automated bottling"),
                    ("2024-05-02", "ProductLaunch", "Aegean Robotics launches the AR-7 palletising cell"),
                ],
                signal: ("open engineering roles", 14.0, "Up"),
                development: "A second manufacturing partnership is reported for the second half of the year.",
                blind_spot: "No public data on customer concentration was found.",
                executive_summary: "Aegean Robotics holds a growing position in Greek food-sector automation, a market estimated at EUR 1.4bn.",
                scores: (7, 6),
                fund_action: "Support a follow-on round tied to the AR-7 rollout.",
                startup_action: "Reduce customer concentration before the next round.",
                overall: "Aegean Robotics is an Athens-based industrial robotics company with registry-verified accounts and an expanding product line.",
            },
        },
        Company {
            id: "nordic-drones",
            record: json!({
                "company_id": "nordic-drones",
                "name": "Nordic Drones AS",
                "founders": ["Ingrid Solberg"],
                "sector": "Drone logistics",
                "initial_investment_year": 2021,
                "headquarters": "Oslo, Norway",
                "alt_identifiers": {"crunchbase": "nordic-drones"}
            }),
            intel: Intel {
                market: ("Nordic drone delivery market", 310.0, "EUR m", 2023),
                trend: "Regulators in Norway opened 6 new beyond-visual-line-of-sight corridors.",
                competitors: [
                    ("Fjord Air Logistics", "Direct", "Seed stage", "Piloting medical deliveries in Bergen"),
                    ("SkyCargo Labs", "NicheInnovator", "Series A, EUR 9m raised", "Focus on offshore platforms"),
                ],
                news: [
                    ("2024-01-22", "Funding", "Nordic Drones closes a Series A round"),
                    ("2024-04-10", "Partnership", "Nordic Drones signs a pilot with a Norwegian hospital trust"),
                ],
                signal: ("monthly web visits", 42000.0, "Up"),
                development: "Hospital logistics pilots are expanding to a second region.",
                blind_spot: "The company is not registered in the Greek registry, so no statutory filings were reviewed.",
                executive_summary: "Nordic Drones is an early leader in regulated medical drone logistics, with traffic growth to 42,000 monthly visits.",
                scores: (8, 6),
                fund_action: "Monitor the hospital pilot outcomes before committing further capital.",
                startup_action: "Publish audited accounts to reduce reliance on third-party estimates.",
                overall: "Nordic Drones is an Oslo-based drone logistics company; financial figures come from a labelled third-party source.",
            },
        },
        Company {
            id: "thessaly-agritech",
            record: json!({
                "company_id": "thessaly-agritech",
                "name": "Thessaly Agritech P.C.",
                "founders": ["Giorgos Kalogirou"],
                "sector": "Precision agriculture",
                "initial_investment_year": 2020,
                "headquarters": "Larissa, Greece",
                "registration": "082233441000"
            }),
            intel: Intel {
                market: ("Greek precision agriculture market", 95.0, "EUR m", 2023),
                trend: "EU subsidy schemes now cover 40% of sensor deployment costs for cotton growers.",
                competitors: [
                    ("AgroSense", "Direct", "Bootstrapped", "Active in Central Macedonia"),
                    ("FieldMind", "Adjacent", "Series A, EUR 6m raised", "Satellite analytics for cereals"),
                ],
                news: [
                    ("2023-11-08", "ProductLaunch", "Thessaly Agritech releases a soil moisture sensor for cotton fields"),
                    ("2024-02-19", "Other", "Thessaly Agritech joins a regional irrigation research consortium"),
                ],
                signal: ("open field roles", 3.0, "Flat"),
                development: "The irrigation consortium may provide access to public pilot funding.",
                blind_spot: "No financial statements were found in the registry or in third-party databases.",
                executive_summary: "Thessaly Agritech addresses a subsidised niche, but the absence of any financial disclosure limits the assessment.",
                scores: (6, 5),
                fund_action: "Request management accounts before any further commitment.",
                startup_action: "File annual accounts with the registry.",
                overall: "Thessaly Agritech is a Larissa-based precision agriculture company whose financial figures could not be found.",
            },
        },
        Company {
            id: "cretan-solar",
            record: json!({
                "company_id": "cretan-solar",
                "name": "Cretan Solar Systems S.A.",
                "founders": ["Maria Daskalaki", "Stelios Manolakis"],
                "sector": "Solar energy storage",
                "initial_investment_year": 2018,
                "headquarters": "Heraklion, Greece",
                "registration": "099887766000",
                "alt_identifiers": {"dealroom": "cretan-solar-systems"}
            }),
            intel: Intel {
                market: ("Greek behind-the-meter storage market", 260.0, "EUR m", 2023),
                trend: "Island grids face curtailment, and storage tenders grew by 3 rounds last year.",
                competitors: [
                    ("Helios Storage", "Direct", "Series C, EUR 48m raised", "Large tender wins on the mainland"),
                    ("VoltIsland", "NicheInnovator", "Seed stage", "Microgrids for small Cycladic islands"),
                ],
                news: [
                    ("2023-12-05", "Funding", "Cretan Solar Systems raises growth capital from a regional fund"),
                    ("2024-04-28", "ProductLaunch", "Cretan Solar Systems unveils a hotel storage package"),
                ],
                signal: ("installed sites", 120.0, "Up"),
                development: "Hotel storage demand rises with the 2024 tourism season.",
                blind_spot: "Registry filings could not be retrieved, so figures rely on a third-party estimate.",
                executive_summary: "Cretan Solar Systems benefits from island grid constraints and has reached 120 installed sites.",
                scores: (8, 7),
                fund_action: "Prepare a growth allocation once audited accounts are available.",
                startup_action: "Resolve the registry filing gap to support diligence.",
                overall: "Cretan Solar Systems is a Heraklion-based storage company; its figures are a labelled third-party approximation.",
            },
        },
        Company {
            id: "ionian-biotech",
            record: json!({
                "company_id": "ionian-biotech",
                "name": "Ionian Biotech",
                "founders": ["Alexis Moraitis"],
                "sector": "Marine biotechnology",
                "initial_investment_year": 2022,
                "headquarters": "Corfu, Greece"
            }),
            intel: Intel {
                market: ("European blue biotechnology market", 1.1, "EUR bn", 2023),
                trend: "Algae-derived cosmetic ingredients attract growing licensing interest.",
                competitors: [
                    ("AlgaLab", "Direct", "Grant funded", "Cultivation trials in the Adriatic"),
                    ("BlueCell Bio", "Adjacent", "Series A, EUR 12m raised", "Marine collagen for nutrition"),
                ],
                news: [
                    ("2024-02-01", "Other", "Ionian Biotech presents algae extraction results at a Patras conference"),
                    ("2024-05-20", "Partnership", "Ionian Biotech signs a research agreement with a cosmetics group"),
                ],
                signal: ("patent filings", 2.0, "Up"),
                development: "The cosmetics agreement may lead to a first licensing deal.",
                blind_spot: "No registry number and no third-party financial entry were found.",
                executive_summary: "Ionian Biotech is a pre-revenue research company with an early commercial partnership.",
                scores: (5, 7),
                fund_action: "Keep the position under observation until licensing terms are known.",
                startup_action: "Establish a registry presence and publish basic financials.",
                overall: "Ionian Biotech is a Corfu-based marine biotechnology company with no financial figures found.",
            },
        },
    ]
}

fn sources(company: &str, slug: &str, topic: &str) -> Vec<Value> {
    let host = match slug {
        "source_mapper" => "portals.example",
        "sector" => "market-data.example",
        "competition" => "competitors.example",
        "news" => "news.example",
        _ => "signals.example",
    };
    (1..=3)
        .map(|i| {
            json!({
                "source_ref": format!("https://{host}/{company}/{slug}-{i}"),
                "snippet": format!("{topic} (result {i})"),
                "retrieved_at": RETRIEVED_AT,
            })
        })
        .collect()
}

fn cite(source: &Value) -> Value {
    json!({"source_ref": source["source_ref"]})
}

struct Authored {
    completions: BTreeMap<&'static str, Value>,
    queries: Vec<Value>,
}

fn author_agents(c: &Company, prompts: &PromptLibrary) -> Authored {
    let i = &c.intel;
    let mut completions = BTreeMap::new();
    let mut queries = Vec::new();
    let mut inputs = BTreeMap::from([("company".to_string(), c.record.clone())]);
    let mut results_for =
        |role: AgentRole, inputs: &BTreeMap<String, Value>, topic: &str| -> Vec<Value> {
            let rendered = prompts.queries(role, inputs).unwrap();
            let results = sources(c.id, role.slug(), topic);
            for q in rendered {
                queries.push(json!({"query": q, "results": results}));
            }
            results
        };

    let portals = results_for(AgentRole::SourceMapper, &inputs, "Industry data portal");
    let source_map = json!({
        "payload": {"sources": [
            {"name": "National statistics office", "url": portals[0]["source_ref"], "rationale": "Official sector statistics", "citations": [0]},
            {"name": "Sector association reports", "url": portals[1]["source_ref"], "rationale": "Annual member surveys", "citations": [1]},
            {"name": "EU open data portal", "url": portals[2]["source_ref"], "rationale": "Cross-country comparisons", "citations": [2]}
        ]},
        "citations": portals.iter().map(cite).collect::<Vec<_>>()
    });
    inputs.insert("source_map".into(), source_map.clone());
    completions.insert("source_mapper", source_map);

    let market = results_for(AgentRole::Sector, &inputs, "Market size and trends");
    completions.insert(
        "sector",
        json!({
            "payload": {
                "market_size": [{"label": i.market.0, "value": i.market.1, "unit": i.market.2, "year": i.market.3, "citations": [0]}],
                "trends": [{"text": i.trend, "citations": [1]}]
            },
            "citations": [cite(&market[0]), cite(&market[1])]
        }),
    );

    let rivals = results_for(AgentRole::Competition, &inputs, "Competitor profile");
    completions.insert(
        "competition",
        json!({
            "payload": {"competitors": i.competitors.iter().enumerate().map(|(k, (name, tier, funding, note))| json!({
                "name": name, "tier": tier, "funding_status": funding, "activity_note": note, "citations": [k]
            })).collect::<Vec<_>>()},
            "citations": [cite(&rivals[0]), cite(&rivals[1])]
        }),
    );

    let press = results_for(AgentRole::News, &inputs, "News article");
    completions.insert(
        "news",
        json!({
            "payload": {"events": i.news.iter().enumerate().map(|(k, (date, kind, headline))| json!({
                "date": date, "kind": kind, "headline": headline, "citation": k
            })).collect::<Vec<_>>()},
            "citations": [cite(&press[0]), cite(&press[1])]
        }),
    );

    let signals = results_for(AgentRole::Signals, &inputs, "Investment signal");
    completions.insert(
        "signals",
        json!({
            "payload": {"signals": [{"metric": i.signal.0, "value": i.signal.1, "direction": i.signal.2, "citation": 0}]},
            "citations": [cite(&signals[0])]
        }),
    );

    // Synthesis agents cite sources already carried by upstream outputs.
    completions.insert(
        "researcher",
        json!({
            "payload": {
                "developments": [{"text": i.development, "citations": [0]}],
                "blind_spots": [{"text": i.blind_spot, "citations": []}]
            },
            "citations": [cite(&press[1])]
        }),
    );
    completions.insert(
        "analyst",
        json!({
            "payload": {
                "executive_summary": i.executive_summary,
                "summary_citations": [0, 1],
                "scores": {"market_timing": i.scores.0, "product_differentiation": i.scores.1},
                "recommendations": [
                    {"audience": "Fund", "horizon_days": 90, "action": i.fund_action, "citations": [1]},
                    {"audience": "Startup", "horizon_days": 180, "action": i.startup_action, "citations": []}
                ]
            },
            "citations": [cite(&market[0]), cite(&signals[0])]
        }),
    );
    completions.insert(
        "overall_info",
        json!({
            "payload": {"summary": i.overall, "citations": [0]},
            "citations": [cite(&press[1])]
        }),
    );
    Authored {
        completions,
        queries,
    }
}

fn statements() -> [(&'static str, &'static str, Statement); 2] {
    [
        (
            "AR-FS-2023",
            "2024-04-30",
            Statement {
                year: 2023,
                title_bs: "AEGEAN ROBOTICS S.A. - STATEMENT OF FINANCIAL POSITION AT 31.12.2023",
                title_is: "AEGEAN ROBOTICS S.A. - INCOME STATEMENT FOR THE YEAR ENDED 31.12.2023",
                assets: [
                    ("Property, plant and equipment", "410.000,00"),
                    ("Intangible assets", "200.000,00"),
                    ("Inventories", "95.000,00"),
                    ("Trade receivables", "330.000,00"),
                    ("Cash and equivalents", "215.000,00"),
                    ("Total assets", "1.250.000,00"),
                ],
                equity: [
                    ("Share capital", "1.000.000,00"),
                    ("Retained earnings", "(490.000,00)"),
                    ("Total equity", "510.000,00"),
                    ("Borrowings", "420.000,00"),
                    ("Trade payables", "320.000,00"),
                    ("Total liabilities", "740.000,00"),
                    ("Total equity and liabilities", "1.250.000,00"),
                ],
                income: [
                    ("Revenue", "980.000,00"),
                    ("Cost of sales", "(610.000,00)"),
                    ("Gross profit", "370.000,00"),
                    ("Operating expenses", "(415.000,00)"),
                    ("EBIT", "(45.000,00)"),
                    ("Finance costs", "(18.000,00)"),
                    ("Loss before tax", "(63.000,00)"),
                ],
            },
        ),
        (
            "AR-FS-2022",
            "2023-05-15",
            Statement {
                year: 2022,
                title_bs: "AEGEAN ROBOTICS S.A. - STATEMENT OF FINANCIAL POSITION AT 31.12.2022",
                title_is: "AEGEAN ROBOTICS S.A. - INCOME STATEMENT FOR THE YEAR ENDED 31.12.2022",
                assets: [
                    ("Property, plant and equipment", "380.000,00"),
                    ("Intangible assets", "150.000,00"),
                    ("Inventories", "80.000,00"),
                    ("Trade receivables", "290.000,00"),
                    ("Cash and equivalents", "180.000,00"),
                    ("Total assets", "1.080.000,00"),
                ],
                equity: [
                    ("Share capital", "750.000,00"),
                    ("Retained earnings", "(427.000,00)"),
                    ("Total equity", "323.000,00"),
                    ("Borrowings", "450.000,00"),
                    ("Trade payables", "307.000,00"),
                    ("Total liabilities", "757.000,00"),
                    ("Total equity and liabilities", "1.080.000,00"),
                ],
                income: [
                    ("Revenue", "812.500,00"),
                    ("Cost of sales", "(520.000,00)"),
                    ("Gross profit", "292.500,00"),
                    ("Operating expenses", "(280.200,00)"),
                    ("EBIT", "12.300,00"),
                    ("Finance costs", "(15.500,00)"),
                    ("Loss before tax", "(3.200,00)"),
                ],
            },
        ),
    ]
}

/// (doc_id, date, title, kind_hint, event kind, description, page lines)
type Modification = (
    &'static str,
    &'static str,
    &'static str,
    &'static str,
    &'static str,
    &'static str,
    [&'static str; 3],
);

fn modifications() -> [Modification; 3] {
    [
        (
            "AR-MOD-2022-11",
            "2022-11-03",
            "Board of directors appointment",
            "Ανακοίνωση μεταβολών",
            "BoardChange",
            "Board of directors reconstituted with Nikos Vlachos appointed chair",
            [
                "AEGEAN ROBOTICS S.A. - ANNOUNCEMENT OF BOARD CHANGE",
                "On 03.11.2022 the general meeting reconstituted the board of directors.",
                "Nikos Vlachos was appointed chair for a term of 5 years.",
            ],
        ),
        (
            "AR-MOD-2023-09",
            "2023-09-12",
            "Share capital increase",
            "Ανακοίνωση μεταβολών",
            "CapitalIncrease",
            "Share capital increased by EUR 250.000,00 to EUR 1.000.000,00",
            [
                "AEGEAN ROBOTICS S.A. - SHARE CAPITAL INCREASE",
                "On 12.09.2023 the general meeting approved a capital increase of 250.000,00 EUR.",
                "The share capital now amounts to 1.000.000,00 EUR.",
            ],
        ),
        (
            "AR-MOD-2024-02",
            "2024-02-20",
            "Amendment of articles of association",
            "Ανακοίνωση μεταβολών",
            "StatutoryModification",
            "Articles of association amended to add robot software services to the corporate purpose",
            [
                "AEGEAN ROBOTICS S.A. - AMENDMENT OF ARTICLES",
                "On 20.02.2024 article 3 was amended to extend the corporate purpose",
                "to the development and licensing of robot control software.",
            ],
        ),
    ]
}

fn main() {
    let root = root();
    let fixtures = root.join("fixtures");
    let prompts = PromptLibrary::bundled();
    let companies = companies();

    write_json(
        &root.join("data/companies.v1"),
        &Value::Array(companies.iter().map(|c| c.record.clone()).collect()),
    );

    // Registry corpus for the two registered companies the portal knows.
    let reg_a = fixtures.join("registry/045612378000");
    let mut index = Vec::new();
    let mut manifest_docs = Vec::new();
    let mut fin_citations = Vec::new();
    let mut fin_records = Vec::new();
    for (doc_id, published, statement) in statements() {
        let bytes = statement_pdf(&statement);
        std::fs::create_dir_all(reg_a.join("docs")).unwrap();
        std::fs::write(reg_a.join("docs").join(format!("{doc_id}.pdf")), &bytes).unwrap();
        index.push(json!({
            "doc_id": doc_id,
            "published_date": published,
            "title": format!("Financial Statements FY{} - balance sheet and income statement", statement.year),
            "kind_hint": "Οικονομικές Καταστάσεις"
        }));
        let planted = [
            ("Assets", statement.assets[5].1, 1),
            ("Liabilities", statement.equity[5].1, 1),
            ("Revenue", statement.income[0].1, 2),
            ("EBIT", statement.income[4].1, 2),
        ];
        let mut line_items = serde_json::Map::new();
        for (metric, raw, page) in planted {
            let idx = fin_citations
                .iter()
                .position(|c: &Value| c["source_ref"] == doc_id && c["page"] == page)
                .unwrap_or_else(|| {
                    fin_citations.push(json!({"source_ref": doc_id, "page": page}));
                    fin_citations.len() - 1
                });
            line_items.insert(metric.into(), json!({"amount": raw, "citation": idx}));
        }
        fin_records.push(json!({"fiscal_year": statement.year, "line_items": line_items}));
        manifest_docs.push(json!({
            "doc_id": doc_id,
            "class": "FinancialStatement",
            "published_date": published,
            "pages": 2,
            "sha256": sha256_hex(&bytes),
            "planted": planted.iter().map(|(metric, raw, page)| json!({
                "fiscal_year": statement.year, "metric": metric, "raw": raw, "page": page
            })).collect::<Vec<_>>()
        }));
    }
    let mut mod_citations = Vec::new();
    let mut mod_events = Vec::new();
    for (k, (doc_id, date, title, hint, kind, description, lines)) in
        modifications().into_iter().enumerate()
    {
        let runs: Vec<Run> = lines
            .iter()
            .enumerate()
            .map(|(n, line)| {
                (
                    72.0,
                    740.0 - 24.0 * n as f32,
                    if n == 0 { 12.0 } else { 10.0 },
                    *line,
                )
            })
            .collect();
        let bytes = pdf(&[runs]);
        std::fs::write(reg_a.join("docs").join(format!("{doc_id}.pdf")), &bytes).unwrap();
        index.push(
            json!({"doc_id": doc_id, "published_date": date, "title": title, "kind_hint": hint}),
        );
        mod_citations.push(json!({"source_ref": doc_id, "page": 1}));
        mod_events
            .push(json!({"date": date, "kind": kind, "description": description, "citation": k}));
        manifest_docs.push(json!({
            "doc_id": doc_id,
            "class": "CorporateModification",
            "published_date": date,
            "pages": 1,
            "sha256": sha256_hex(&bytes),
            "events": [{"date": date, "kind": kind, "page": 1}]
        }));
    }
    write_json(
        &reg_a.join("index.json"),
        &json!({"total": index.len(), "documents": index}),
    );
    std::fs::write(
        reg_a.join("docs/AR-ERROR-PAGE.html"),
        "<html><body><h1>Service temporarily unavailable</h1></body></html>\n",
    )
    .unwrap();
    write_json(
        &fixtures.join("registry/082233441000/index.json"),
        &json!({"total": 0, "documents": []}),
    );
    write_json(
        &fixtures.join("registry/MANIFEST"),
        &json!({
            "note": "Every value planted in the registry fixture corpus. Tests read this file as their oracle.",
            "registrations": {
                "045612378000": {"company_id": "aegean-robotics", "documents": manifest_docs},
                "082233441000": {"company_id": "thessaly-agritech", "documents": []}
            },
            "unknown_registrations": {"099887766000": "cretan-solar"}
        }),
    );

    // Agent completions and the retrieval results they cite.
    let mut all_queries = Vec::new();
    for c in &companies {
        let authored = author_agents(c, &prompts);
        for (slug, completion) in authored.completions {
            write_json(
                &fixtures.join(format!("agents/{}/{slug}.json", c.id)),
                &completion,
            );
        }
        all_queries.extend(authored.queries);
    }
    write_json(
        &fixtures.join("agents/aegean-robotics/fin_summary.json"),
        &json!({"payload": {"records": fin_records}, "citations": fin_citations}),
    );
    write_json(
        &fixtures.join("agents/aegean-robotics/mod_summary.json"),
        &json!({"payload": {"events": mod_events}, "citations": mod_citations}),
    );
    write_json(
        &fixtures.join("retrieval/queries.json"),
        &Value::Array(all_queries),
    );

    // Third-party providers, tried in file-name order.
    write_json(
        &fixtures.join("altfin/01-crunchbase-fixture.json"),
        &json!({
            "provider": "crunchbase-fixture",
            "identifier_key": "crunchbase",
            "retrieved_at": "2024-06-01T10:00:00Z",
            "entries": [
                {"alt_id": "nordic-drones", "name": "Nordic Drones AS",
                 "fields": [
                    {"name": "Total funding", "value": 4200000, "unit": "EUR", "citation": 0},
                    {"name": "Last round", "value": "Series A"},
                    {"name": "Employees", "value": 38, "citation": 1}
                 ],
                 "citations": [
                    {"source_ref": "https://crunchbase.example/organization/nordic-drones", "snippet": "Total funding amount"},
                    {"source_ref": "https://crunchbase.example/organization/nordic-drones/people"}
                 ]},
                {"alt_id": "aegean-robotics", "name": "Aegean Robotics S.A.",
                 "fields": [{"name": "Total funding", "value": 3100000, "unit": "EUR", "citation": 0}],
                 "citations": [{"source_ref": "https://crunchbase.example/organization/aegean-robotics"}]},
                {"name": "Ionian Biotech",
                 "fields": [{"name": "Revenue", "value": 120000, "unit": "EUR"}],
                 "citations": []}
            ]
        }),
    );
    write_json(
        &fixtures.join("altfin/02-dealroom-fixture.json"),
        &json!({
            "provider": "dealroom-fixture",
            "identifier_key": "dealroom",
            "retrieved_at": "2024-06-01T10:05:00Z",
            "entries": [
                {"alt_id": "cretan-solar-systems", "name": "Cretan Solar Systems S.A.",
                 "fields": [
                    {"name": "Revenue estimate", "value": "EUR 2m to 3m", "citation": 0},
                    {"name": "Total funding", "value": 9500000, "unit": "EUR", "citation": 0}
                 ],
                 "citations": [{"source_ref": "https://dealroom.example/companies/cretan-solar-systems"}]}
            ]
        }),
    );
    println!("fixtures written under {}", fixtures.display());
}
