mod support;

use std::collections::BTreeMap;

use diligence_core::agents::AgentRole;
use diligence_core::registry::FixtureServer;
use diligence_core::setup::FixtureLayout;
use support::{adversarial_cases, run_case, AdversarialCase, Attack, FuzzTarget};

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn tampered_outputs_never_reach_the_report() {
    let layout = FixtureLayout::repo();
    let server = FixtureServer::start(layout.corpus().unwrap())
        .await
        .unwrap();
    let out = tempfile::tempdir().unwrap();
    let cases = adversarial_cases(&layout.root, 120, 0xfab);

    let mut by_target: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_attack: BTreeMap<String, usize> = BTreeMap::new();
    for case in &cases {
        let target = match &case.target {
            FuzzTarget::Agent(role) => role.slug().to_string(),
            FuzzTarget::AltProvider(file) => file.clone(),
        };
        *by_target.entry(target).or_default() += 1;
        *by_attack.entry(format!("{:?}", case.attack)).or_default() += 1;
    }
    assert!(by_target.len() >= 10, "{by_target:?}");
    assert_eq!(by_attack.len(), 4, "{by_attack:?}");

    let mut failures = Vec::new();
    for case in &cases {
        let verdict = run_case(case, &layout, &server.base_url(), out.path()).await;
        if !verdict.passed() {
            failures.push((case.clone(), verdict));
        }
    }
    assert!(
        failures.is_empty(),
        "{} of {} cases got through: {:#?}",
        failures.len(),
        cases.len(),
        failures.first()
    );
}

/// Control: a planted numeral that keeps its citation is legitimate, so the
/// verdict must report it as accepted and visible.
#[tokio::test]
async fn cited_numeral_is_accepted_and_rendered() {
    let layout = FixtureLayout::repo();
    let server = FixtureServer::start(layout.corpus().unwrap())
        .await
        .unwrap();
    let out = tempfile::tempdir().unwrap();
    let path = layout.agents().join("aegean-robotics/sector.json");
    let mut doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let text = doc["payload"]["trends"][0]["text"]
        .as_str()
        .unwrap()
        .to_string();
    doc["payload"]["trends"][0]["text"] = format!("{text} Exports grew 612.5% last year.").into();
    let case = AdversarialCase {
        index: 0,
        company: "aegean-robotics".into(),
        target: FuzzTarget::Agent(AgentRole::Sector),
        attack: Attack::InjectAndStrip,
        text: doc.to_string(),
        planted: Some("612.5%".into()),
    };
    let verdict = run_case(&case, &layout, &server.base_url(), out.path()).await;
    assert!(
        !verdict.rejected && verdict.rendered && verdict.leaked,
        "{verdict:?}"
    );
    assert!(verdict.uncited.is_empty());
    assert!(!verdict.passed());
}
