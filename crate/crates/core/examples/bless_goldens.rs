//! Rewrites `fixtures/goldens` from the current extractor and renderer.
//!
//! cargo run -p diligence-core --example bless_goldens

use std::path::Path;

use diligence_core::extract::{extract_text, TextLayerExtractor};
use diligence_core::intake::TriggerPayload;
use diligence_core::pipeline::{rendered_report, Pipeline};
use diligence_core::registry::{FixtureServer, PdfBlob};
use diligence_core::setup::{FixtureLayout, FIXTURE_CLOCK};

fn write(path: &Path, contents: &str) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, contents).unwrap();
    println!("wrote {}", path.display());
}

#[tokio::main]
async fn main() {
    let layout = FixtureLayout::repo();
    let goldens = layout.goldens();

    let docs = layout.registry().join("045612378000/docs");
    let mut pdfs: Vec<_> = std::fs::read_dir(&docs)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "pdf"))
        .collect();
    pdfs.sort();
    for pdf in pdfs {
        let doc_id = pdf.file_stem().unwrap().to_str().unwrap().to_string();
        let blob = PdfBlob::new(
            &doc_id,
            std::fs::read(&pdf).unwrap(),
            FIXTURE_CLOCK.parse().unwrap(),
        )
        .unwrap();
        let doc = extract_text(&blob, &TextLayerExtractor).unwrap();
        let json = serde_json::to_string_pretty(&doc).unwrap() + "\n";
        write(&goldens.join(format!("extraction/{doc_id}.json")), &json);
    }

    let server = FixtureServer::start(layout.corpus().unwrap())
        .await
        .unwrap();
    let out = tempfile::tempdir().unwrap();
    let pipeline = Pipeline::new(layout.deps(&server.base_url(), out.path()).unwrap()).unwrap();
    for record in layout.company_db().unwrap().records() {
        let company = &record.company_id;
        let trigger = TriggerPayload::new(company.as_str(), "analyst@fund.example");
        let ctx = pipeline.run(&format!("bless-{company}"), &trigger).await;
        let report = rendered_report(&ctx).expect("report rendered");
        let html = std::fs::read_to_string(&report.path).unwrap();
        write(&goldens.join(format!("reports/{company}.html")), &html);
    }
}
