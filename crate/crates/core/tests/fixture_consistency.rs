//! The registry MANIFEST is the oracle for everything planted in the fixture
//! corpus. These tests keep the corpus, the extraction goldens and the
//! rendered reports honest against it.

mod support;

use diligence_core::extract::ExtractedDocument;
use diligence_core::intake::TriggerPayload;
use diligence_core::pipeline::{rendered_report, Pipeline};
use diligence_core::registry::{
    ClassificationTable, DocumentClass, DocumentIndexEntry, FixtureServer,
};
use diligence_core::setup::FixtureLayout;
use serde_json::Value;
use sha2::{Digest, Sha256};

fn manifest(layout: &FixtureLayout) -> Value {
    serde_json::from_str(&std::fs::read_to_string(layout.manifest()).unwrap()).unwrap()
}

fn golden(layout: &FixtureLayout, doc_id: &str) -> ExtractedDocument {
    let path = layout.goldens().join(format!("extraction/{doc_id}.json"));
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn page_text(doc: &ExtractedDocument, page: u64) -> String {
    doc.pages
        .iter()
        .find(|p| u64::from(p.page_number) == page)
        .unwrap_or_else(|| panic!("{} has no page {page}", doc.doc_id))
        .text()
}

fn index_entries(layout: &FixtureLayout, registration: &str) -> Vec<DocumentIndexEntry> {
    let path = layout.registry().join(registration).join("index.json");
    let index: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    serde_json::from_value(index["documents"].clone()).unwrap()
}

#[test]
fn documents_match_manifest_hashes_and_pages() {
    let layout = FixtureLayout::repo();
    let manifest = manifest(&layout);
    let mut documents = 0;
    for (registration, entry) in manifest["registrations"].as_object().unwrap() {
        for doc in entry["documents"].as_array().unwrap() {
            let doc_id = doc["doc_id"].as_str().unwrap();
            let pdf = layout
                .registry()
                .join(format!("{registration}/docs/{doc_id}.pdf"));
            let bytes = std::fs::read(&pdf).unwrap();
            assert_eq!(
                hex::encode(Sha256::digest(&bytes)),
                doc["sha256"].as_str().unwrap(),
                "{doc_id}"
            );
            let extracted = golden(&layout, doc_id);
            assert_eq!(
                extracted.pages.len() as u64,
                doc["pages"].as_u64().unwrap(),
                "{doc_id}"
            );
            documents += 1;
        }
    }
    assert_eq!(documents, 5);
}

#[test]
fn planted_figures_sit_on_their_listed_page_only() {
    let layout = FixtureLayout::repo();
    let plants = support::manifest_plants(&manifest(&layout));
    assert_eq!(plants.len(), 8);
    for (doc_id, page, metric, _, raw) in plants {
        let doc = golden(&layout, &doc_id);
        for p in &doc.pages {
            let here = p.text().contains(&raw);
            assert_eq!(
                here,
                p.page_number == page,
                "{doc_id} {metric} {raw} on page {}",
                p.page_number
            );
        }
    }
}

#[test]
fn event_dates_appear_on_their_page() {
    let layout = FixtureLayout::repo();
    let manifest = manifest(&layout);
    let mut events = 0;
    for entry in manifest["registrations"].as_object().unwrap().values() {
        for doc in entry["documents"].as_array().unwrap() {
            let doc_id = doc["doc_id"].as_str().unwrap();
            for event in doc["events"].as_array().into_iter().flatten() {
                let iso = event["date"].as_str().unwrap();
                let date = chrono::NaiveDate::parse_from_str(iso, "%Y-%m-%d").unwrap();
                let local = date.format("%d.%m.%Y").to_string();
                let text = page_text(&golden(&layout, doc_id), event["page"].as_u64().unwrap());
                assert!(text.contains(&local), "{doc_id}: {local} not in {text:?}");
                events += 1;
            }
        }
    }
    assert_eq!(events, 3);
}

#[test]
fn index_matches_manifest_and_classifies_as_listed() {
    let layout = FixtureLayout::repo();
    let manifest = manifest(&layout);
    let table = ClassificationTable::bundled();
    for (registration, entry) in manifest["registrations"].as_object().unwrap() {
        let index = index_entries(&layout, registration);
        let docs = entry["documents"].as_array().unwrap();
        assert_eq!(index.len(), docs.len(), "{registration}");
        for doc in docs {
            let doc_id = doc["doc_id"].as_str().unwrap();
            let listed = index.iter().find(|e| e.doc_id == doc_id).unwrap();
            assert_eq!(
                listed.published_date.to_string(),
                doc["published_date"].as_str().unwrap()
            );
            let expected = match doc["class"].as_str().unwrap() {
                "FinancialStatement" => DocumentClass::FinancialStatement,
                "CorporateModification" => DocumentClass::CorporateModification,
                other => panic!("unknown class {other}"),
            };
            assert_eq!(table.classify(listed), expected, "{doc_id}");
        }
    }
}

#[test]
fn unknown_registrations_are_absent_from_the_corpus() {
    let layout = FixtureLayout::repo();
    let manifest = manifest(&layout);
    let unknown = manifest["unknown_registrations"].as_object().unwrap();
    assert!(!unknown.is_empty());
    for registration in unknown.keys() {
        assert!(
            !layout.registry().join(registration).exists(),
            "{registration}"
        );
    }
}

#[tokio::test]
async fn verified_report_cites_planted_pages() {
    let layout = FixtureLayout::repo();
    let server = FixtureServer::start(layout.corpus().unwrap())
        .await
        .unwrap();
    let out = tempfile::tempdir().unwrap();
    let pipeline = Pipeline::new(layout.deps(&server.base_url(), out.path()).unwrap()).unwrap();
    let ctx = pipeline
        .run(
            "manifest-check",
            &TriggerPayload::new("aegean-robotics", "analyst@fund.example"),
        )
        .await;
    let html = std::fs::read_to_string(rendered_report(&ctx).unwrap().path).unwrap();
    let checked = support::check_grid_against_manifest(&html, &manifest(&layout)).unwrap();
    assert_eq!(checked, 8);
}

#[test]
fn grid_check_catches_a_wrong_page() {
    let layout = FixtureLayout::repo();
    let html =
        std::fs::read_to_string(layout.goldens().join("reports/aegean-robotics.html")).unwrap();
    let moved = html.replacen("AR-FS-2023, page 1", "AR-FS-2023, page 2", 1);
    assert_ne!(html, moved);
    assert!(support::check_grid_against_manifest(&moved, &manifest(&layout)).is_err());
}
