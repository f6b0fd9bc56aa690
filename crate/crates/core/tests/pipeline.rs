use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use mythmark::gateway::{BackendConfig, Clock, Gateway, MockBackend, MockEntry, MockScript, RetryPolicy};
use mythmark::pipeline::{
    annotate_document, lint_document, reconstruct, segment, Gazetteer, LintKind, PassageStatus, PipelineConfig,
    PipelineError,
};
use mythmark::preservation::AlterationKind;
use mythmark::schema::{load_standoff, validate_document, EntityType};

fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn p1_text() -> String {
    std::fs::read_to_string(fixtures().join("p1/texts/p1.txt")).unwrap()
}

fn p1_tagged() -> String {
    std::fs::read_to_string(fixtures().join("p1/tagged.txt")).unwrap()
}

fn gateway(entries: Vec<MockEntry>) -> (Gateway, Arc<MockBackend>) {
    let mock = Arc::new(MockBackend::new(MockScript { entries, ..Default::default() }));
    let g = Gateway::new(mock.clone(), BackendConfig::new("mock://", "mock"))
        .unwrap()
        .with_retry(RetryPolicy { base_delay: Duration::from_millis(1), ..Default::default() })
        .with_clock(Clock::epoch());
    (g, mock)
}

fn entry(passage: &str, replies: &[&str]) -> MockEntry {
    MockEntry {
        passage: passage.into(),
        replies: replies.iter().map(|s| s.to_string()).collect(),
        commentary: None,
    }
}

#[tokio::test]
async fn p1_through_the_mock() {
    let text = p1_text();
    let passage = text.trim_end();
    let tagged = p1_tagged();
    let (g, _) = gateway(vec![entry(passage, &[tagged.trim_end()])]);
    let (doc, report) = annotate_document("p1", &text, &g, &PipelineConfig::default()).await.unwrap();

    let got: Vec<(&str, EntityType)> = doc.annotations.iter().map(|a| (a.surface.as_str(), a.entity_type)).collect();
    assert_eq!(
        got,
        vec![
            ("Calypso", EntityType::Location),
            ("Minos", EntityType::Deity),
            ("Calypso", EntityType::Location),
            ("Minos", EntityType::Deity),
            ("mythologie océanique", EntityType::Concept),
        ]
    );
    assert!(validate_document(&doc).is_valid());
    assert_eq!(report.passages.len(), 1);
    assert_eq!(report.passages[0].status, PassageStatus::Annotated);
    assert_eq!(report.counts.annotated, 1);
    assert_eq!(report.counts.annotations, 5);

    // same annotations as the checked-in prediction file
    let (_, stored) = load_standoff(&fixtures().join("p1/annotations/p1.json")).unwrap();
    assert_eq!(doc.annotations, stored.annotations);
}

#[tokio::test]
async fn untouched_passage_without_tags() {
    let text = "Aucune allusion ici.";
    let (g, _) = gateway(vec![entry(text, &[text])]);
    let (doc, report) = annotate_document("d", text, &g, &PipelineConfig::default()).await.unwrap();
    assert!(doc.annotations.is_empty());
    assert_eq!(report.passages[0].status, PassageStatus::Annotated);
}

#[tokio::test]
async fn calypso_insertion_is_retried_then_fails() {
    let text = "Seulement Calypso n’est plus qu’une femme.";
    let altered = "Seulement île de <mythEntity type=\"location\">Calypso</mythEntity> n’est plus qu’une femme.";
    let (g, mock) = gateway(vec![entry(text, &[altered])]);
    let (doc, report) = annotate_document("d", text, &g, &PipelineConfig::default()).await.unwrap();
    let p = &report.passages[0];
    assert_eq!(p.status, PassageStatus::FailedPreservation);
    assert_eq!(p.requests, 2);
    assert_eq!(mock.calls(), 2);
    assert_eq!(p.alterations.len(), 1);
    let h = &p.alterations[0];
    assert_eq!(h.kind, AlterationKind::Insertion);
    assert_eq!(h.new_text, "île de ");
    assert_eq!((h.orig_start, h.orig_end), (10, 10));
    assert_eq!(p.edit_ratio, Some(7.0 / 49.0));
    assert!(doc.annotations.is_empty());
    assert_eq!(report.counts.failed_preservation, 1);
}

#[tokio::test]
async fn retry_can_recover() {
    let text = "Seulement Calypso n’est plus qu’une femme.";
    let altered = "Seulement île de Calypso n’est plus qu’une femme.";
    let good = "Seulement <mythEntity type=\"deity\">Calypso</mythEntity> n’est plus qu’une femme.";
    let (g, _) = gateway(vec![entry(text, &[altered, good])]);
    let (doc, report) = annotate_document("d", text, &g, &PipelineConfig::default()).await.unwrap();
    assert_eq!(report.passages[0].status, PassageStatus::Annotated);
    assert_eq!(report.passages[0].requests, 2);
    assert_eq!(doc.annotations.len(), 1);
}

#[tokio::test]
async fn small_alteration_is_remapped() {
    // one dropped comma in a long passage: ratio well under 5%
    let text = "Les géographes, les archéologues nous conduisent bien dans l’île de Calypso, exhument bien le palais de Minos.";
    let reply = "Les géographes les archéologues nous conduisent bien dans l’île de <mythEntity type=\"location\">Calypso</mythEntity>, exhument bien le palais de <mythEntity type=\"deity\">Minos</mythEntity>.";
    let (g, _) = gateway(vec![entry(text, &[reply])]);
    let (doc, report) = annotate_document("d", text, &g, &PipelineConfig::default()).await.unwrap();
    assert_eq!(report.passages[0].status, PassageStatus::AnnotatedWithRemap);
    assert_eq!(doc.annotations.len(), 2);
    assert!(validate_document(&doc).is_valid());
    assert_eq!(doc.annotations[0].surface, "Calypso");
}

#[tokio::test]
async fn passage_failures_stay_local() {
    let text = "Diane chasse.\n\nApollon chante.\n\nVénus sourit.";
    let (g, _) = gateway(vec![
        entry("Diane chasse.", &["<mythEntity type=\"deity\">Diane</mythEntity> chasse."]),
        entry("Apollon chante.", &["<mythEntity type=\"deity\">Apollon</mythEntity> chante."]),
        // Vénus has no canned answer: backend error
    ]);
    let (doc, report) = annotate_document("d", text, &g, &PipelineConfig::default()).await.unwrap();
    let statuses: Vec<PassageStatus> = report.passages.iter().map(|p| p.status).collect();
    assert_eq!(
        statuses,
        vec![PassageStatus::Annotated, PassageStatus::Annotated, PassageStatus::BackendError]
    );
    assert_eq!(doc.annotations.len(), 2);
    assert_eq!(doc.annotations[1].start, 15);
    assert!(validate_document(&doc).is_valid());
}

#[tokio::test]
async fn nested_reply_is_a_parse_error() {
    let text = "Diane chasse.";
    let (g, _) = gateway(vec![entry(
        text,
        &["<mythEntity type=\"deity\">Di<mythEntity type=\"hero\">ane</mythEntity></mythEntity> chasse."],
    )]);
    let (_, report) = annotate_document("d", text, &g, &PipelineConfig::default()).await.unwrap();
    assert_eq!(report.passages[0].status, PassageStatus::ParseError);
}

#[tokio::test]
async fn prefilter_skips_without_calling() {
    let text = "Diane chasse.\n\nRien à signaler.";
    let (g, mock) = gateway(vec![entry("Diane chasse.", &["Diane chasse."])]);
    let config = PipelineConfig { gazetteer: Gazetteer::new(["Diane"]), ..Default::default() };
    let (_, report) = annotate_document("d", text, &g, &config).await.unwrap();
    assert_eq!(report.passages[1].status, PassageStatus::SkippedPrefilter);
    assert_eq!(report.counts.skipped_prefilter, 1);
    assert_eq!(mock.calls(), 1);
}

#[tokio::test]
async fn angle_bracket_refused() {
    let (g, _) = gateway(vec![]);
    let err = annotate_document("d", "a < b", &g, &PipelineConfig::default()).await.unwrap_err();
    assert!(matches!(err, PipelineError::DocumentRefused { at: 2, .. }));
}

#[tokio::test]
async fn deterministic_under_mock() {
    let text = p1_text();
    let tagged = p1_tagged();
    let mut runs = Vec::new();
    for _ in 0..2 {
        let (g, _) = gateway(vec![entry(text.trim_end(), &[tagged.trim_end()])]);
        runs.push(annotate_document("p1", &text, &g, &PipelineConfig::default()).await.unwrap());
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn p1_lints() {
    let (_, doc) = load_standoff(&fixtures().join("p1/annotations/p1.json")).unwrap();
    let findings = lint_document(&doc);
    let count = |k| findings.iter().filter(|f| f.kind == k).count();
    assert_eq!(count(LintKind::RepeatedSurface), 2);
    assert_eq!(count(LintKind::SpanSuspect), 2);
    assert_eq!(count(LintKind::TypeConflict), 0);
    let suspects: Vec<usize> = findings
        .iter()
        .filter(|f| f.kind == LintKind::SpanSuspect)
        .map(|f| f.annotations[0])
        .collect();
    assert_eq!(suspects, vec![0, 1]);
    assert!(findings.iter().all(|f| f.annotations.iter().all(|&i| i < doc.annotations.len())));
}

#[test]
fn segmentation_of_p1_is_one_passage() {
    let text = p1_text();
    let p = segment("p1", &text, 1200).unwrap();
    assert_eq!(p.len(), 1);
    assert_eq!(reconstruct(&text, &p), text);
}
