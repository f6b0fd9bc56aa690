//! Scoring predicted annotations against gold.
//!
//! Pairs are formed greedily by decreasing span overlap (Jaccard over code
//! points), so a prediction covering part of a gold span still counts as a
//! recognition; type and exact-span agreement are then measured on the
//! pairs.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::schema::{AnnotatedDocument, Annotation, EntityType};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("prediction and gold annotate different texts ({pred} vs {gold})")]
    TextMismatch { pred: String, gold: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub pred: usize,
    pub gold: usize,
    /// Shared code points.
    pub intersection: usize,
    /// Code points covered by either span.
    pub union: usize,
}

impl Pair {
    pub fn jaccard(&self) -> f64 {
        self.intersection as f64 / self.union as f64
    }

    fn cmp_jaccard(&self, other: &Pair) -> Ordering {
        (self.intersection * other.union).cmp(&(other.intersection * self.union))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingResult {
    pub pairs: Vec<Pair>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gold: Vec<usize>,
}

fn overlap(a: &Annotation, b: &Annotation) -> Option<Pair> {
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    (lo < hi).then(|| Pair {
        pred: 0,
        gold: 0,
        intersection: hi - lo,
        union: a.end.max(b.end) - a.start.min(b.start),
    })
}

/// Greedy one-to-one matching: highest Jaccard first; ties go to pairs of
/// equal type, then to the earlier gold span.
pub fn match_annotations(pred: &[Annotation], gold: &[Annotation]) -> MatchingResult {
    let mut candidates = Vec::new();
    for (pi, p) in pred.iter().enumerate() {
        for (gi, g) in gold.iter().enumerate() {
            if let Some(pair) = overlap(p, g) {
                candidates.push(Pair { pred: pi, gold: gi, ..pair });
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.cmp_jaccard(a)
            .then_with(|| {
                let ta = pred[a.pred].entity_type == gold[a.gold].entity_type;
                let tb = pred[b.pred].entity_type == gold[b.gold].entity_type;
                tb.cmp(&ta)
            })
            .then_with(|| gold[a.gold].start.cmp(&gold[b.gold].start))
            .then_with(|| pred[a.pred].start.cmp(&pred[b.pred].start))
            .then_with(|| (gold[a.gold].end, pred[a.pred].end).cmp(&(gold[b.gold].end, pred[b.pred].end)))
    });

    let mut pred_used = vec![false; pred.len()];
    let mut gold_used = vec![false; gold.len()];
    let mut pairs = Vec::new();
    for c in candidates {
        if !pred_used[c.pred] && !gold_used[c.gold] {
            pred_used[c.pred] = true;
            gold_used[c.gold] = true;
            pairs.push(c);
        }
    }
    pairs.sort_by_key(|p| (gold[p.gold].start, p.gold));
    MatchingResult {
        pairs,
        unmatched_pred: (0..pred.len()).filter(|&i| !pred_used[i]).collect(),
        unmatched_gold: (0..gold.len()).filter(|&i| !gold_used[i]).collect(),
    }
}

/// Matches two documents, refusing pairs built on different texts.
pub fn match_documents(pred: &AnnotatedDocument, gold: &AnnotatedDocument) -> Result<MatchingResult, EvalError> {
    let (p, g) = (pred.text_sha256(), gold.text_sha256());
    if p != g {
        return Err(EvalError::TextMismatch { pred: p, gold: g });
    }
    Ok(match_annotations(&pred.annotations, &gold.annotations))
}

/// Counts over matched pairs, gold type by predicted type.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Confusion {
    counts: [[usize; 10]; 10],
}

fn type_index(t: EntityType) -> usize {
    EntityType::ALL.iter().position(|&x| x == t).expect("closed set")
}

impl Confusion {
    pub fn get(&self, gold: EntityType, pred: EntityType) -> usize {
        self.counts[type_index(gold)][type_index(pred)]
    }

    fn add(&mut self, gold: EntityType, pred: EntityType) {
        self.counts[type_index(gold)][type_index(pred)] += 1;
    }

    pub fn row_total(&self, gold: EntityType) -> usize {
        self.counts[type_index(gold)].iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub gold_total: usize,
    pub pred_total: usize,
    pub matched: usize,
    pub type_equal: usize,
    pub exact_span: usize,
    pub recognition_rate: f64,
    pub type_accuracy: f64,
    pub exact_span_rate: f64,
    pub confusion: Confusion,
    /// Set when the gold set is empty and recognition is reported as 1.0.
    pub empty_gold: bool,
}

fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn compute_metrics(matching: &MatchingResult, pred: &[Annotation], gold: &[Annotation]) -> Metrics {
    let mut confusion = Confusion::default();
    let mut type_equal = 0;
    let mut exact_span = 0;
    for p in &matching.pairs {
        let (a, g) = (&pred[p.pred], &gold[p.gold]);
        confusion.add(g.entity_type, a.entity_type);
        type_equal += usize::from(a.entity_type == g.entity_type);
        exact_span += usize::from(a.start == g.start && a.end == g.end);
    }
    let matched = matching.pairs.len();
    let empty_gold = gold.is_empty();
    Metrics {
        gold_total: gold.len(),
        pred_total: pred.len(),
        matched,
        type_equal,
        exact_span,
        recognition_rate: if empty_gold { 1.0 } else { rate(matched, gold.len()) },
        type_accuracy: rate(type_equal, matched),
        exact_span_rate: rate(exact_span, matched),
        confusion,
        empty_gold,
    }
}

/// Matching plus metrics in one call.
pub fn evaluate(pred: &[Annotation], gold: &[Annotation]) -> (MatchingResult, Metrics) {
    let m = match_annotations(pred, gold);
    let metrics = compute_metrics(&m, pred, gold);
    (m, metrics)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    #[serde(alias = "md")]
    Markdown,
}

pub fn render_report(metrics: &Metrics, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(&report_value(metrics)).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => markdown(metrics),
    }
}

fn report_value(m: &Metrics) -> Value {
    let mut confusion = BTreeMap::new();
    for g in EntityType::ALL {
        let row: BTreeMap<&str, usize> = EntityType::ALL
            .iter()
            .map(|&p| (p.as_str(), m.confusion.get(g, p)))
            .collect();
        confusion.insert(g.as_str(), row);
    }
    json!({
        "counts": {
            "gold": m.gold_total,
            "predicted": m.pred_total,
            "matched": m.matched,
            "type_equal": m.type_equal,
            "exact_span": m.exact_span,
        },
        "recognition_rate": m.recognition_rate,
        "type_accuracy": m.type_accuracy,
        "exact_span_rate": m.exact_span_rate,
        "confusion": confusion,
        "empty_gold": m.empty_gold,
    })
}

fn markdown(m: &Metrics) -> String {
    let mut s = String::from("# Evaluation\n\n");
    s.push_str(&format!("- gold annotations: {}\n", m.gold_total));
    s.push_str(&format!("- predicted annotations: {}\n", m.pred_total));
    s.push_str(&format!("- matched pairs: {}\n", m.matched));
    let recog_den = m.gold_total;
    s.push_str(&format!("- recognition: {:.3} ({}/{})\n", m.recognition_rate, m.matched, recog_den));
    s.push_str(&format!("- type accuracy: {:.3} ({}/{})\n", m.type_accuracy, m.type_equal, m.matched));
    s.push_str(&format!("- exact span: {:.3} ({}/{})\n", m.exact_span_rate, m.exact_span, m.matched));
    if m.empty_gold {
        s.push_str("- warning: the gold set is empty; recognition is reported as 1.000\n");
    }
    s.push_str("\n## Type confusion (rows: gold, columns: predicted)\n\n| gold \\ predicted |");
    for t in EntityType::ALL {
        s.push_str(&format!(" {t} |"));
    }
    s.push_str("\n|---|");
    s.push_str(&"---:|".repeat(EntityType::ALL.len()));
    s.push('\n');
    for g in EntityType::ALL {
        s.push_str(&format!("| {g} |"));
        for p in EntityType::ALL {
            s.push_str(&format!(" {} |", m.confusion.get(g, p)));
        }
        s.push('\n');
    }
    s
}
