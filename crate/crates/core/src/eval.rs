//! Scoring of prediction files against gold labels, and viewpoint
//! distribution analytics over party, outlet, month or actor.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::model::{Claim, ContextConfig, DatasetInstance, EnrichedActor, LearningMode, Prediction};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no prediction for {} instance(s): {}", .0.len(), preview(.0))]
    MissingPrediction(Vec<String>),
    #[error("more than one prediction for {} instance(s): {}", .0.len(), preview(.0))]
    DuplicatePrediction(Vec<String>),
    #[error("predictions for {} unknown instance(s): {}", .0.len(), preview(.0))]
    UnknownInstance(Vec<String>),
    #[error("instance {0} references a claim that is not in the claim file")]
    UnknownClaim(String),
    #[error("prediction file mixes runs ({0})")]
    MixedRuns(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn preview(ids: &[String]) -> String {
    let head: Vec<&str> = ids.iter().take(5).map(String::as_str).collect();
    if ids.len() > 5 {
        format!("{}, ...", head.join(", "))
    } else {
        head.join(", ")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn add(&mut self, gold: bool, predicted: bool) {
        match (gold, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn positives(&self) -> u64 {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> u64 {
        self.fp + self.tn
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionTable {
    pub overall: Confusion,
    pub per_viewpoint: BTreeMap<u32, Confusion>,
    /// Predictions that fell back to the default label.
    pub defaulted: usize,
}

/// Exact confusion counts. Every gold instance needs exactly one
/// prediction and every prediction a gold instance.
pub fn confusion(predictions: &[Prediction], gold: &[DatasetInstance]) -> Result<ConfusionTable, EvalError> {
    let gold_by_id: HashMap<&str, &DatasetInstance> = gold.iter().map(|g| (g.instance_id.as_str(), g)).collect();
    let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
    let mut duplicates = BTreeSet::new();
    let mut unknown = BTreeSet::new();
    for p in predictions {
        if !gold_by_id.contains_key(p.instance_id.as_str()) {
            unknown.insert(p.instance_id.clone());
        } else if by_id.insert(&p.instance_id, p).is_some() {
            duplicates.insert(p.instance_id.clone());
        }
    }
    if !duplicates.is_empty() {
        return Err(EvalError::DuplicatePrediction(duplicates.into_iter().collect()));
    }
    if !unknown.is_empty() {
        return Err(EvalError::UnknownInstance(unknown.into_iter().collect()));
    }
    let missing: Vec<String> = gold.iter().filter(|g| !by_id.contains_key(g.instance_id.as_str())).map(|g| g.instance_id.clone()).collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPrediction(missing));
    }

    let mut table = ConfusionTable::default();
    for g in gold {
        let p = by_id[g.instance_id.as_str()];
        table.overall.add(g.label, p.predicted_label);
        table.per_viewpoint.entry(g.viewpoint_id).or_default().add(g.label, p.predicted_label);
        table.defaulted += usize::from(p.defaulted);
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AveragingMode {
    PositiveClass,
    MacroTwoClass,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// A denominator was zero and the affected metric was set to 0.
    pub zero_division: bool,
}

fn ratio(num: u64, den: u64, flag: &mut bool) -> f64 {
    if den == 0 {
        *flag = true;
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Precision, recall and F1 for one class given its tp/fp/fn counts.
pub fn class_scores(tp: u64, fp: u64, fn_: u64) -> Scores {
    let mut zero_division = false;
    let precision = ratio(tp, tp + fp, &mut zero_division);
    let recall = ratio(tp, tp + fn_, &mut zero_division);
    let f1 = if precision + recall == 0.0 {
        zero_division = true;
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Scores { precision, recall, f1, zero_division }
}

pub fn metrics(c: &Confusion, mode: AveragingMode) -> Scores {
    let positive = class_scores(c.tp, c.fp, c.fn_);
    match mode {
        AveragingMode::PositiveClass => positive,
        AveragingMode::MacroTwoClass => {
            let negative = class_scores(c.tn, c.fn_, c.fp);
            Scores {
                precision: (positive.precision + negative.precision) / 2.0,
                recall: (positive.recall + negative.recall) / 2.0,
                f1: (positive.f1 + negative.f1) / 2.0,
                zero_division: positive.zero_division || negative.zero_division,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub confusion: Confusion,
    pub macro_two_class: Scores,
    pub positive_class: Scores,
    pub support_positive: u64,
    pub support_negative: u64,
}

impl ScoreRow {
    pub fn from_confusion(c: Confusion) -> Self {
        Self {
            confusion: c,
            macro_two_class: metrics(&c, AveragingMode::MacroTwoClass),
            positive_class: metrics(&c, AveragingMode::PositiveClass),
            support_positive: c.positives(),
            support_negative: c.negatives(),
        }
    }

    pub fn headline(&self, mode: AveragingMode) -> &Scores {
        match mode {
            AveragingMode::MacroTwoClass => &self.macro_two_class,
            AveragingMode::PositiveClass => &self.positive_class,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunId {
    pub model_id: String,
    pub context_config: ContextConfig,
    pub learning_mode: LearningMode,
}

pub const AVERAGING_NOTE: &str = "Headline scores use macro-two-class averaging (unweighted mean of the label-1 and label-0 \
scores); positive-class scores are reported alongside. Rare viewpoints with near all-negative predictions score close to \
0.5 under macro averaging and close to 0 under positive-class averaging.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub note: String,
    pub run: RunId,
    pub averaging_mode: AveragingMode,
    pub overall: ScoreRow,
    pub per_viewpoint: BTreeMap<u32, ScoreRow>,
    pub defaulted: usize,
}

/// Scores one prediction file (a single run) against the gold instances.
pub fn evaluate_run(predictions: &[Prediction], gold: &[DatasetInstance]) -> Result<MetricsReport, EvalError> {
    let run = match predictions.first() {
        Some(p) => RunId { model_id: p.model_id.clone(), context_config: p.context_config, learning_mode: p.learning_mode },
        None => RunId { model_id: String::new(), context_config: ContextConfig::Text, learning_mode: LearningMode::ZeroShot },
    };
    if let Some(p) = predictions.iter().find(|p| p.model_id != run.model_id || p.context_config != run.context_config || p.learning_mode != run.learning_mode) {
        return Err(EvalError::MixedRuns(format!("{} / {}", run.model_id, p.model_id)));
    }
    let table = confusion(predictions, gold)?;
    Ok(MetricsReport {
        note: AVERAGING_NOTE.into(),
        run,
        averaging_mode: AveragingMode::MacroTwoClass,
        overall: ScoreRow::from_confusion(table.overall),
        per_viewpoint: table.per_viewpoint.into_iter().map(|(k, c)| (k, ScoreRow::from_confusion(c))).collect(),
        defaulted: table.defaulted,
    })
}

fn pct(x: f64) -> String {
    format!("{:.2}", x * 100.0)
}

/// Aligned text table in percent with two decimals.
pub fn render_text(report: &MetricsReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}", report.note);
    let _ = writeln!(
        out,
        "run: {} | {} | {}  (defaulted predictions: {})",
        report.run.model_id,
        report.run.context_config,
        report.run.learning_mode,
        report.defaulted
    );
    let _ = writeln!(
        out,
        "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6} {:>6}",
        "viewpoint", "P", "R", "F1", "P+", "R+", "F1+", "pos", "neg"
    );
    let mut line = |label: &str, row: &ScoreRow| {
        let (m, p) = (&row.macro_two_class, &row.positive_class);
        let _ = writeln!(
            out,
            "{:<10} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>6} {:>6}",
            label,
            pct(m.precision),
            pct(m.recall),
            pct(m.f1),
            pct(p.precision),
            pct(p.recall),
            pct(p.f1),
            row.support_positive,
            row.support_negative
        );
    };
    for (id, row) in &report.per_viewpoint {
        line(&id.to_string(), row);
    }
    line("overall", &report.overall);
    out
}

pub const REPORT_CSV_HEADER: [&str; 13] = [
    "viewpoint", "tp", "fp", "fn", "tn", "macro_precision", "macro_recall", "macro_f1", "pos_precision", "pos_recall",
    "pos_f1", "support_positive", "support_negative",
];

pub fn render_csv(report: &MetricsReport) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_CSV_HEADER)?;
    let rows = report.per_viewpoint.iter().map(|(id, r)| (id.to_string(), r)).chain(std::iter::once(("overall".to_string(), &report.overall)));
    for (label, r) in rows {
        let c = r.confusion;
        let (m, p) = (&r.macro_two_class, &r.positive_class);
        w.write_record([
            label,
            c.tp.to_string(),
            c.fp.to_string(),
            c.fn_.to_string(),
            c.tn.to_string(),
            pct(m.precision),
            pct(m.recall),
            pct(m.f1),
            pct(p.precision),
            pct(p.recall),
            pct(p.f1),
            r.support_positive.to_string(),
            r.support_negative.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    /// Viewpoint id, or `None` for the overall row.
    pub viewpoint_id: Option<u32>,
    pub f1_a: f64,
    pub f1_b: f64,
    pub delta: f64,
}

/// Headline F1 of `b` minus that of `a`, per viewpoint present in both and
/// overall (last row).
pub fn compare_runs(a: &MetricsReport, b: &MetricsReport) -> Vec<DeltaRow> {
    let mode = a.averaging_mode;
    let row = |id, x: &ScoreRow, y: &ScoreRow| {
        let (fa, fb) = (x.headline(mode).f1, y.headline(mode).f1);
        DeltaRow { viewpoint_id: id, f1_a: fa, f1_b: fb, delta: fb - fa }
    };
    let mut out: Vec<DeltaRow> =
        a.per_viewpoint.iter().filter_map(|(id, x)| b.per_viewpoint.get(id).map(|y| row(Some(*id), x, y))).collect();
    out.push(row(None, &a.overall, &b.overall));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Party,
    Source,
    Month,
    Actor,
}

impl std::str::FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "party" => Ok(Self::Party),
            "source" | "outlet" => Ok(Self::Source),
            "month" => Ok(Self::Month),
            "actor" => Ok(Self::Actor),
            other => Err(format!("unknown dimension {other:?} (party, source, month, actor)")),
        }
    }
}

impl Dimension {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Party => "party",
            Self::Source => "source",
            Self::Month => "month",
            Self::Actor => "actor",
        }
    }
}

pub const UNKNOWN_BUCKET: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsRow {
    pub value: String,
    pub viewpoint_id: u32,
    pub count: u64,
    /// Share of this value's positives that fall on this viewpoint.
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticsTable {
    pub dimension: Dimension,
    pub rows: Vec<AnalyticsRow>,
    pub total_positives: u64,
    /// Actors that could not be given a value and went to `unknown`.
    pub unresolved: Vec<String>,
}

/// Counts positive (claim, viewpoint) rows per dimension value. Positives
/// are gold labels, or predicted labels when `predictions` is given. The
/// party of an actor is the first party on their profile.
pub fn analytics(
    instances: &[DatasetInstance],
    predictions: Option<&[Prediction]>,
    claims: &[Claim],
    profiles: &[EnrichedActor],
    dimension: Dimension,
) -> Result<AnalyticsTable, EvalError> {
    let claims_by_id: HashMap<&str, &Claim> = claims.iter().map(|c| (c.claim_id.as_str(), c)).collect();
    let party: HashMap<&str, Option<&str>> = profiles
        .iter()
        .map(|e| (e.actor_name.as_str(), e.profile.as_ref().and_then(|p| p.parties.first()).map(String::as_str)))
        .collect();
    let predicted: Option<HashMap<&str, bool>> = predictions.map(|ps| ps.iter().map(|p| (p.instance_id.as_str(), p.predicted_label)).collect());

    let mut counts: BTreeMap<String, BTreeMap<u32, u64>> = BTreeMap::new();
    let mut unresolved = BTreeSet::new();
    let mut total = 0u64;
    for inst in instances {
        let positive = match &predicted {
            Some(map) => map.get(inst.instance_id.as_str()).copied().unwrap_or(false),
            None => inst.label,
        };
        if !positive {
            continue;
        }
        let value = match dimension {
            Dimension::Actor => inst.actor_name.clone(),
            Dimension::Party => match party.get(inst.actor_name.as_str()).copied().flatten() {
                Some(p) => p.to_string(),
                None => {
                    unresolved.insert(inst.actor_name.clone());
                    UNKNOWN_BUCKET.to_string()
                }
            },
            Dimension::Source | Dimension::Month => {
                let claim = claims_by_id.get(inst.claim_id.as_str()).ok_or_else(|| EvalError::UnknownClaim(inst.instance_id.clone()))?;
                if dimension == Dimension::Source {
                    claim.source.clone()
                } else {
                    claim.date.format("%Y-%m").to_string()
                }
            }
        };
        *counts.entry(value).or_default().entry(inst.viewpoint_id).or_default() += 1;
        total += 1;
    }
    if !unresolved.is_empty() {
        log::info!("{} actor(s) without a party bucketed as {UNKNOWN_BUCKET}", unresolved.len());
    }

    let mut rows = Vec::new();
    for (value, per_vp) in counts {
        let n: u64 = per_vp.values().sum();
        for (viewpoint_id, count) in per_vp {
            rows.push(AnalyticsRow { value: value.clone(), viewpoint_id, count, share: count as f64 / n as f64 });
        }
    }
    Ok(AnalyticsTable { dimension, rows, total_positives: total, unresolved: unresolved.into_iter().collect() })
}

pub fn analytics_csv(table: &AnalyticsTable) -> Result<String, EvalError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["dimension", "value", "viewpoint_id", "count", "share"])?;
    for r in &table.rows {
        w.write_record([table.dimension.as_str(), &r.value, &r.viewpoint_id.to_string(), &r.count.to_string(), &format!("{:.6}", r.share)])?;
    }
    let bytes = w.into_inner().map_err(|e| EvalError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Split;

    fn gold(id: &str, vp: u32, label: bool) -> DatasetInstance {
        DatasetInstance {
            instance_id: id.into(),
            claim_id: id.split(':').next().unwrap().into(),
            utterance: "u".into(),
            article_url: "url".into(),
            article_body: "b".into(),
            actor_name: "A".into(),
            actor_description: "A.".into(),
            viewpoint_id: vp,
            viewpoint_description: "v".into(),
            label,
            split: Split::Test,
        }
    }

    fn pred(id: &str, label: bool) -> Prediction {
        Prediction {
            instance_id: id.into(),
            predicted_label: label,
            model_id: "m".into(),
            context_config: ContextConfig::Text,
            learning_mode: LearningMode::ZeroShot,
            raw_response: if label { "1" } else { "0" }.into(),
            attempts: 1,
            defaulted: false,
            prompt_digest: String::new(),
        }
    }

    fn fixture(pairs: &[(bool, bool)]) -> (Vec<DatasetInstance>, Vec<Prediction>) {
        let g = pairs.iter().enumerate().map(|(i, (l, _))| gold(&format!("c{i}:1"), 1, *l)).collect();
        let p = pairs.iter().enumerate().map(|(i, (_, l))| pred(&format!("c{i}:1"), *l)).collect();
        (g, p)
    }

    #[test]
    fn counts_and_positive_class_scores() {
        let mut pairs = vec![(true, true); 3];
        pairs.push((false, true));
        pairs.push((true, false));
        pairs.extend(vec![(false, false); 5]);
        let (g, p) = fixture(&pairs);
        let t = confusion(&p, &g).unwrap();
        assert_eq!(t.overall, Confusion { tp: 3, fp: 1, fn_: 1, tn: 5 });
        let s = metrics(&t.overall, AveragingMode::PositiveClass);
        assert!((s.precision - 0.75).abs() < 1e-12 && (s.recall - 0.75).abs() < 1e-12 && (s.f1 - 0.75).abs() < 1e-12);
    }

    #[test]
    fn rare_positive_all_negative() {
        let mut pairs = vec![(true, false)];
        pairs.extend(vec![(false, false); 9]);
        let (g, p) = fixture(&pairs);
        let c = confusion(&p, &g).unwrap().overall;
        let pos = metrics(&c, AveragingMode::PositiveClass);
        assert_eq!(pos.f1, 0.0);
        assert!(pos.zero_division);
        let neg = class_scores(c.tn, c.fn_, c.fp);
        assert!((neg.f1 - 18.0 / 19.0).abs() < 1e-12);
        let m = metrics(&c, AveragingMode::MacroTwoClass);
        assert!((m.f1 - 9.0 / 19.0).abs() < 1e-12);
        assert!((m.f1 - 0.474).abs() < 0.001);
    }

    #[test]
    fn perfect_predictions() {
        let (g, p) = fixture(&[(true, true), (false, false)]);
        let r = evaluate_run(&p, &g).unwrap();
        assert_eq!(r.overall.macro_two_class.f1, 1.0);
        assert_eq!(r.overall.positive_class.f1, 1.0);
        assert!(render_text(&r).contains("100.00"));
    }

    #[test]
    fn missing_duplicate_unknown() {
        let (g, mut p) = fixture(&[(true, true), (false, false), (true, true)]);
        p.truncate(1);
        assert!(matches!(confusion(&p, &g), Err(EvalError::MissingPrediction(ids)) if ids.len() == 2));
        let (g, mut p) = fixture(&[(true, true)]);
        p.push(p[0].clone());
        assert!(matches!(confusion(&p, &g), Err(EvalError::DuplicatePrediction(_))));
        let (g, mut p) = fixture(&[(true, true)]);
        p.push(pred("zz:1", true));
        assert!(matches!(confusion(&p, &g), Err(EvalError::UnknownInstance(_))));
    }

    #[test]
    fn symmetric_errors_make_modes_coincide() {
        let (g, p) = fixture(&[(true, true), (true, true), (true, false), (false, true), (false, false), (false, false)]);
        let c = confusion(&p, &g).unwrap().overall;
        let a = metrics(&c, AveragingMode::PositiveClass).f1;
        let b = metrics(&c, AveragingMode::MacroTwoClass).f1;
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn deltas_subtract() {
        let (g, p) = fixture(&[(true, true), (false, false)]);
        let a = evaluate_run(&p, &g).unwrap();
        let (_, p2) = fixture(&[(true, false), (false, false)]);
        let b = evaluate_run(&p2, &g).unwrap();
        let d = compare_runs(&a, &b);
        assert_eq!(d.len(), 2);
        assert!((d[1].delta - (b.overall.macro_two_class.f1 - 1.0)).abs() < 1e-12);
    }
}
