//! Benchmark construction from raw annotations: disagreement filtering,
//! agreement statistics, majority voting and claim-grouped splitting.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::ids::instance_id;
use crate::model::{
    ActorProfile, AnnotationRecord, ArticleIndex, Claim, DatasetInstance, EnrichedActor, NewsArticle, Split, ViewpointSet,
};
use crate::par::{self, Parallelism};
use crate::wikidata::{render_description, RenderConfig};

pub const ANNOTATORS_PER_PAIR: usize = 3;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("pair ({claim_id}, {viewpoint_id}) has {count} annotations, expected {ANNOTATORS_PER_PAIR}")]
    WrongAnnotatorCount { claim_id: String, viewpoint_id: u32, count: usize },
    #[error("annotator {annotator_id} labelled ({claim_id}, {viewpoint_id}) twice")]
    DuplicateAnnotation { claim_id: String, viewpoint_id: u32, annotator_id: String },
    #[error("annotators {0} and {1} share no items")]
    NoOverlap(String, String),
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("split ratios {0}/{1}/{2} do not sum to 100")]
    RatioError(u32, u32, u32),
    #[error("annotations reference unknown claim {0}")]
    UnknownClaim(String),
    #[error("annotations reference unknown viewpoint {0}")]
    UnknownViewpoint(u32),
    #[error("claim {claim_id} references unknown article {article_id}")]
    UnknownArticle { claim_id: String, article_id: String },
    #[error("no profile entry for actor {0:?}; run enrichment first")]
    MissingProfile(String),
    #[error("published split has no entry for instance {0}")]
    MissingPublishedSplit(String),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatorLabel {
    pub annotator_id: String,
    pub label: bool,
}

/// All labels given to one (claim, viewpoint) pair, sorted by annotator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedPair {
    pub claim_id: String,
    pub viewpoint_id: u32,
    pub labels: Vec<AnnotatorLabel>,
}

impl AnnotatedPair {
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| l.label).count()
    }
}

/// Groups annotations by pair, ordered by (claim_id, viewpoint_id).
pub fn group_pairs(annotations: &[AnnotationRecord]) -> Result<Vec<AnnotatedPair>, DatasetError> {
    let mut pairs: BTreeMap<(String, u32), Vec<AnnotatorLabel>> = BTreeMap::new();
    for a in annotations {
        let labels = pairs.entry((a.claim_id.clone(), a.viewpoint_id)).or_default();
        if labels.iter().any(|l| l.annotator_id == a.annotator_id) {
            return Err(DatasetError::DuplicateAnnotation {
                claim_id: a.claim_id.clone(),
                viewpoint_id: a.viewpoint_id,
                annotator_id: a.annotator_id.clone(),
            });
        }
        labels.push(AnnotatorLabel { annotator_id: a.annotator_id.clone(), label: a.label });
    }
    Ok(pairs
        .into_iter()
        .map(|((claim_id, viewpoint_id), mut labels)| {
            labels.sort_by(|a, b| a.annotator_id.cmp(&b.annotator_id));
            AnnotatedPair { claim_id, viewpoint_id, labels }
        })
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub kept: Vec<AnnotatedPair>,
    pub removed: Vec<AnnotatedPair>,
}

/// Removes every pair labelled aligned by exactly one of its three
/// annotators; every other pattern is kept.
pub fn filter_disagreements(annotations: &[AnnotationRecord]) -> Result<FilterOutcome, DatasetError> {
    let mut out = FilterOutcome::default();
    for pair in group_pairs(annotations)? {
        if pair.labels.len() != ANNOTATORS_PER_PAIR {
            return Err(DatasetError::WrongAnnotatorCount {
                claim_id: pair.claim_id,
                viewpoint_id: pair.viewpoint_id,
                count: pair.labels.len(),
            });
        }
        if pair.positives() == 1 {
            out.removed.push(pair);
        } else {
            out.kept.push(pair);
        }
    }
    Ok(out)
}

/// Label chosen by a strict majority of the pair's annotators.
pub fn majority_vote(pair: &AnnotatedPair) -> bool {
    2 * pair.positives() > pair.labels.len()
}

/// Cohen's kappa from integer tallies, so that the result does not depend
/// on summation order. `p_e = 1` yields 1 when agreement is perfect, else 0.
fn kappa_from_counts(n: u64, agree: u64, a_true: u64, b_true: u64) -> f64 {
    let chance = a_true * b_true + (n - a_true) * (n - b_true);
    let n2 = n * n;
    if chance == n2 {
        log::debug!("degenerate marginals (p_e = 1) over {n} items");
        return if agree == n { 1.0 } else { 0.0 };
    }
    (n as f64 * agree as f64 - chance as f64) / (n2 as f64 - chance as f64)
}

pub fn cohen_kappa(a: &[bool], b: &[bool]) -> Result<f64, DatasetError> {
    if a.len() != b.len() {
        return Err(DatasetError::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(DatasetError::NoOverlap("a".into(), "b".into()));
    }
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as u64;
    let a_true = a.iter().filter(|x| **x).count() as u64;
    let b_true = b.iter().filter(|x| **x).count() as u64;
    Ok(kappa_from_counts(a.len() as u64, agree, a_true, b_true))
}

/// Fleiss' kappa for binary labels. Items whose rater count differs from
/// the most common one are skipped.
pub fn fleiss_kappa(items: &[Vec<bool>]) -> Option<f64> {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for it in items {
        *counts.entry(it.len()).or_default() += 1;
    }
    let (&raters, _) = counts.iter().filter(|(r, _)| **r >= 2).max_by_key(|(r, c)| (**c, **r))?;
    let used: Vec<&Vec<bool>> = items.iter().filter(|i| i.len() == raters).collect();
    let n_items = used.len() as f64;
    let m = raters as f64;
    let mut p_bar = 0.0;
    let mut total_true = 0usize;
    for it in &used {
        let t = it.iter().filter(|x| **x).count();
        total_true += t;
        let f = raters - t;
        p_bar += ((t * t + f * f) as f64 - m) / (m * (m - 1.0));
    }
    p_bar /= n_items;
    let p_true = total_true as f64 / (n_items * m);
    let p_e = p_true * p_true + (1.0 - p_true) * (1.0 - p_true);
    if (1.0 - p_e).abs() < 1e-15 {
        return Some(if (p_bar - 1.0).abs() < 1e-15 { 1.0 } else { 0.0 });
    }
    Some((p_bar - p_e) / (1.0 - p_e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AgreementPhase {
    PreFilter,
    PostFilter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub phase: AgreementPhase,
    /// Mean of pairwise Cohen's kappas over co-annotated claims.
    pub per_viewpoint_kappa: BTreeMap<u32, f64>,
    pub mean_kappa: f64,
    /// Annotator pairs that contributed to each viewpoint's value.
    pub annotator_pairs: BTreeMap<u32, usize>,
    /// Secondary multi-rater statistic.
    pub per_viewpoint_fleiss: BTreeMap<u32, f64>,
    pub mean_fleiss: f64,
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn viewpoint_agreement(pairs: &[&AnnotatedPair]) -> (Option<f64>, usize, Option<f64>) {
    let mut by_annotator: BTreeMap<&str, HashMap<&str, bool>> = BTreeMap::new();
    for p in pairs {
        for l in &p.labels {
            by_annotator.entry(&l.annotator_id).or_default().insert(&p.claim_id, l.label);
        }
    }
    let annotators: Vec<(&str, &HashMap<&str, bool>)> = by_annotator.iter().map(|(k, v)| (*k, v)).collect();
    let mut kappas = Vec::new();
    for i in 0..annotators.len() {
        for j in i + 1..annotators.len() {
            let (a, b) = (annotators[i].1, annotators[j].1);
            let (mut n, mut agree, mut at, mut bt) = (0u64, 0u64, 0u64, 0u64);
            for (claim, &la) in a {
                if let Some(&lb) = b.get(claim) {
                    n += 1;
                    agree += u64::from(la == lb);
                    at += u64::from(la);
                    bt += u64::from(lb);
                }
            }
            if n > 0 {
                kappas.push(kappa_from_counts(n, agree, at, bt));
            }
        }
    }
    let pairwise = (!kappas.is_empty()).then(|| mean(kappas.iter().copied()));
    let items: Vec<Vec<bool>> = pairs.iter().map(|p| p.labels.iter().map(|l| l.label).collect()).collect();
    (pairwise, kappas.len(), fleiss_kappa(&items))
}

/// Per-viewpoint agreement over the given annotations, computed in
/// parallel across viewpoints when `mode` allows.
pub fn agreement_report(
    annotations: &[AnnotationRecord],
    phase: AgreementPhase,
    mode: Parallelism,
) -> Result<AgreementReport, DatasetError> {
    let pairs = group_pairs(annotations)?;
    Ok(agreement_from_pairs(&pairs, phase, mode))
}

pub fn agreement_from_pairs(pairs: &[AnnotatedPair], phase: AgreementPhase, mode: Parallelism) -> AgreementReport {
    let mut by_viewpoint: BTreeMap<u32, Vec<&AnnotatedPair>> = BTreeMap::new();
    for p in pairs {
        by_viewpoint.entry(p.viewpoint_id).or_default().push(p);
    }
    let groups: Vec<(u32, Vec<&AnnotatedPair>)> = by_viewpoint.into_iter().collect();
    let results = par::map(mode, &groups, |(id, ps)| (*id, viewpoint_agreement(ps)));

    let mut report = AgreementReport {
        phase,
        per_viewpoint_kappa: BTreeMap::new(),
        mean_kappa: 0.0,
        annotator_pairs: BTreeMap::new(),
        per_viewpoint_fleiss: BTreeMap::new(),
        mean_fleiss: 0.0,
    };
    for (id, (kappa, n_pairs, fleiss)) in results {
        match kappa {
            Some(k) => {
                report.per_viewpoint_kappa.insert(id, k);
                report.annotator_pairs.insert(id, n_pairs);
            }
            None => log::warn!("viewpoint {id}: no annotator pair shares an item; left out of the mean"),
        }
        if let Some(f) = fleiss {
            report.per_viewpoint_fleiss.insert(id, f);
        }
    }
    report.mean_kappa = mean(report.per_viewpoint_kappa.values().copied());
    report.mean_fleiss = mean(report.per_viewpoint_fleiss.values().copied());
    report
}

/// Integer percentages for train/validation/test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: u32,
    pub validation: u32,
    pub test: u32,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self { train: 70, validation: 10, test: 20 }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.train + self.validation + self.test != 100 {
            return Err(DatasetError::RatioError(self.train, self.validation, self.test));
        }
        Ok(())
    }

    /// Instance targets per split by largest remainder (ties to the
    /// earlier split).
    pub fn targets(&self, total: usize) -> [usize; 3] {
        let shares = [self.train, self.validation, self.test];
        let mut out = [0usize; 3];
        let mut rems = [(0usize, 0usize); 3];
        for (i, &s) in shares.iter().enumerate() {
            let exact = total * s as usize;
            out[i] = exact / 100;
            rems[i] = (exact % 100, i);
        }
        let left = total - out.iter().sum::<usize>();
        rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in rems.iter().take(left) {
            out[i] += 1;
        }
        out
    }
}

/// Assigns each claim group to a split. Claims are sorted, shuffled with a
/// seeded ChaCha8 generator, then each one goes to the split with the
/// largest remaining instance deficit.
pub fn split_dataset(groups: &[(String, usize)], ratios: SplitRatios, seed: u64) -> Result<BTreeMap<String, Split>, DatasetError> {
    ratios.validate()?;
    let mut order: Vec<&(String, usize)> = groups.iter().collect();
    order.sort_by(|a, b| a.0.cmp(&b.0));
    order.dedup_by(|a, b| a.0 == b.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let total: usize = order.iter().map(|g| g.1).sum();
    let targets = ratios.targets(total);
    let mut assigned = [0usize; 3];
    let mut out = BTreeMap::new();
    for (claim_id, size) in order {
        let deficit = |i: usize| targets[i] as i64 - assigned[i] as i64;
        let pick = (0..3).fold(0, |best, i| if deficit(i) > deficit(best) { i } else { best });
        assigned[pick] += size;
        out.insert(claim_id.clone(), Split::ALL[pick]);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub ratios: SplitRatios,
    pub seed: u64,
    /// Released assignment keyed by instance id; bypasses the splitter.
    #[serde(skip)]
    pub published_split: Option<BTreeMap<String, Split>>,
    pub render: RenderConfig,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { ratios: SplitRatios::default(), seed: 42, published_split: None, render: RenderConfig::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub input_annotations: usize,
    pub input_pairs: usize,
    pub removed_pairs: usize,
    pub kept_pairs: usize,
    pub final_instances: usize,
    pub positive_instances: usize,
    pub split_counts: BTreeMap<Split, usize>,
    /// `seeded` or `published`.
    pub split_source: String,
    pub seed: u64,
    pub ratios: SplitRatios,
    pub agreement_pre_filter: AgreementReport,
    pub agreement_post_filter: AgreementReport,
    pub removed: Vec<AnnotatedPair>,
}

fn name_only(name: &str) -> ActorProfile {
    ActorProfile {
        qid: String::new(),
        name: name.to_string(),
        description: String::new(),
        gender: None,
        occupations: vec![],
        positions_held: vec![],
        parties: vec![],
        extra_attributes: BTreeMap::new(),
        retrieved_at: chrono::DateTime::<chrono::Utc>::UNIX_EPOCH,
    }
}

/// Filter, vote and split, attaching article text, the rendered actor
/// description and the viewpoint description to every surviving pair.
/// Instances are ordered by claim id, then viewpoint id.
pub fn build_benchmark(
    claims: &[Claim],
    viewpoints: &ViewpointSet,
    annotations: &[AnnotationRecord],
    profiles: &[EnrichedActor],
    corpus: &[NewsArticle],
    options: &BuildOptions,
    mode: Parallelism,
) -> Result<(Vec<DatasetInstance>, BuildReport), DatasetError> {
    let claims_by_id: HashMap<&str, &Claim> = claims.iter().map(|c| (c.claim_id.as_str(), c)).collect();
    let articles = ArticleIndex::new(corpus.iter().cloned())?;
    let profiles_by_name: HashMap<&str, &EnrichedActor> = profiles.iter().map(|p| (p.actor_name.as_str(), p)).collect();

    let all_pairs = group_pairs(annotations)?;
    let outcome = filter_disagreements(annotations)?;
    let kept_records: Vec<AnnotatedPair> = outcome.kept.clone();

    let mut descriptions: HashMap<&str, String> = HashMap::new();
    let mut instances = Vec::with_capacity(outcome.kept.len());
    for pair in &outcome.kept {
        let claim = *claims_by_id.get(pair.claim_id.as_str()).ok_or_else(|| DatasetError::UnknownClaim(pair.claim_id.clone()))?;
        let viewpoint = viewpoints.get(pair.viewpoint_id).ok_or(DatasetError::UnknownViewpoint(pair.viewpoint_id))?;
        let article = articles.get(&claim.article_id).ok_or_else(|| DatasetError::UnknownArticle {
            claim_id: claim.claim_id.clone(),
            article_id: claim.article_id.clone(),
        })?;
        if !descriptions.contains_key(claim.actor_name.as_str()) {
            let entry = profiles_by_name.get(claim.actor_name.as_str()).ok_or_else(|| DatasetError::MissingProfile(claim.actor_name.clone()))?;
            let rendered = match &entry.profile {
                Some(p) => render_description(p, &options.render),
                None => render_description(&name_only(&claim.actor_name), &options.render),
            };
            descriptions.insert(claim.actor_name.as_str(), rendered);
        }
        instances.push(DatasetInstance {
            instance_id: instance_id(&claim.claim_id, viewpoint.viewpoint_id),
            claim_id: claim.claim_id.clone(),
            utterance: claim.utterance.clone(),
            article_url: article.url.clone(),
            article_body: article.body.clone(),
            actor_name: claim.actor_name.clone(),
            actor_description: descriptions[claim.actor_name.as_str()].clone(),
            viewpoint_id: viewpoint.viewpoint_id,
            viewpoint_description: viewpoint.full_description(),
            label: majority_vote(pair),
            split: Split::Train,
        });
    }

    let split_source = match &options.published_split {
        Some(published) => {
            for inst in &mut instances {
                inst.split = *published.get(&inst.instance_id).ok_or_else(|| DatasetError::MissingPublishedSplit(inst.instance_id.clone()))?;
            }
            "published"
        }
        None => {
            let mut sizes: BTreeMap<String, usize> = BTreeMap::new();
            for inst in &instances {
                *sizes.entry(inst.claim_id.clone()).or_default() += 1;
            }
            let groups: Vec<(String, usize)> = sizes.into_iter().collect();
            let assignment = split_dataset(&groups, options.ratios, options.seed)?;
            for inst in &mut instances {
                inst.split = assignment[&inst.claim_id];
            }
            "seeded"
        }
    };

    let mut split_counts = BTreeMap::new();
    for inst in &instances {
        *split_counts.entry(inst.split).or_insert(0) += 1;
    }
    let report = BuildReport {
        input_annotations: annotations.len(),
        input_pairs: all_pairs.len(),
        removed_pairs: outcome.removed.len(),
        kept_pairs: outcome.kept.len(),
        final_instances: instances.len(),
        positive_instances: instances.iter().filter(|i| i.label).count(),
        split_counts,
        split_source: split_source.into(),
        seed: options.seed,
        ratios: options.ratios,
        agreement_pre_filter: agreement_from_pairs(&all_pairs, AgreementPhase::PreFilter, mode),
        agreement_post_filter: agreement_from_pairs(&kept_records, AgreementPhase::PostFilter, mode),
        removed: outcome.removed,
    };
    Ok((instances, report))
}

/// Claims that appear in more than one split; empty for a sound split.
pub fn leaked_claims(instances: &[DatasetInstance]) -> BTreeSet<String> {
    let mut seen: HashMap<&str, Split> = HashMap::new();
    let mut leaked = BTreeSet::new();
    for i in instances {
        if let Some(prev) = seen.insert(&i.claim_id, i.split) {
            if prev != i.split {
                leaked.insert(i.claim_id.clone());
            }
        }
    }
    leaked
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(claim: &str, vp: u32, annotator: &str, label: bool) -> AnnotationRecord {
        AnnotationRecord { claim_id: claim.into(), viewpoint_id: vp, annotator_id: annotator.into(), label }
    }

    fn triple(claim: &str, vp: u32, labels: [bool; 3]) -> Vec<AnnotationRecord> {
        ["a1", "a2", "a3"].iter().zip(labels).map(|(a, l)| rec(claim, vp, a, l)).collect()
    }

    #[test]
    fn filter_removes_only_single_positive() {
        let mut ann = triple("c1", 1, [true, false, false]);
        ann.extend(triple("c2", 1, [true, true, false]));
        ann.extend(triple("c3", 1, [false, false, false]));
        ann.extend(triple("c4", 1, [false, true, false]));
        let out = filter_disagreements(&ann).unwrap();
        let removed: Vec<&str> = out.removed.iter().map(|p| p.claim_id.as_str()).collect();
        assert_eq!(removed, vec!["c1", "c4"]);
        assert_eq!(out.kept.len(), 2);
        assert!(majority_vote(&out.kept[0]));
        assert!(!majority_vote(&out.kept[1]));
    }

    #[test]
    fn wrong_count_and_duplicates_rejected() {
        let mut ann = triple("c1", 1, [true, true, true]);
        ann.pop();
        assert!(matches!(filter_disagreements(&ann), Err(DatasetError::WrongAnnotatorCount { count: 2, .. })));
        let dup = vec![rec("c", 1, "a", true), rec("c", 1, "a", false)];
        assert!(matches!(group_pairs(&dup), Err(DatasetError::DuplicateAnnotation { .. })));
    }

    #[test]
    fn kappa_worked_example() {
        let a: Vec<bool> = (1..=10).map(|i| i <= 5).collect();
        let b: Vec<bool> = (1..=10).map(|i| i <= 4 || i == 6).collect();
        assert!((cohen_kappa(&a, &b).unwrap() - 0.6).abs() < 1e-9);
    }

    #[test]
    fn kappa_edge_cases() {
        let a = [true, false, true, false];
        assert_eq!(cohen_kappa(&a, &a).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&[true, true], &[true, true]).unwrap(), 1.0);
        assert_eq!(cohen_kappa(&[true, true], &[false, false]).unwrap(), 0.0);
        assert!(matches!(cohen_kappa(&[], &[]), Err(DatasetError::NoOverlap(..))));
        assert!(matches!(cohen_kappa(&[true], &[]), Err(DatasetError::LengthMismatch(1, 0))));
    }

    #[test]
    fn fleiss_perfect_and_textbook() {
        assert_eq!(fleiss_kappa(&[vec![true, true, true], vec![false, false, false]]), Some(1.0));
        // two items, one unanimous, one split 2/1: P_bar = (1 + 1/3)/2, p = 3/6
        let k = fleiss_kappa(&[vec![true, true, true], vec![true, false, false]]).unwrap();
        let p_bar = (1.0 + 1.0 / 3.0) / 2.0;
        let p_true = 4.0 / 6.0;
        let p_e: f64 = p_true * p_true + (1.0f64 - p_true).powi(2);
        assert!((k - (p_bar - p_e) / (1.0 - p_e)).abs() < 1e-12);
    }

    #[test]
    fn ratio_targets_and_errors() {
        let r = SplitRatios::default();
        assert_eq!(r.targets(3308), [2316, 331, 661]);
        assert_eq!(r.targets(10), [7, 1, 2]);
        let bad = SplitRatios { train: 50, validation: 50, test: 10 };
        assert!(matches!(split_dataset(&[], bad, 1), Err(DatasetError::RatioError(50, 50, 10))));
    }

    #[test]
    fn split_is_deterministic_and_grouped() {
        let groups: Vec<(String, usize)> = (0..100).map(|i| (format!("c{i:03}"), 9 - i % 3)).collect();
        let a = split_dataset(&groups, SplitRatios::default(), 7).unwrap();
        let b = split_dataset(&groups, SplitRatios::default(), 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 100);
        let c = split_dataset(&groups, SplitRatios::default(), 8).unwrap();
        assert_ne!(a, c);
    }
}
