//! Shared fixtures for the end-to-end and acceptance tests.
#![allow(dead_code)]

pub mod synthetic;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use newsview_core::classify::ModelSpec;
use newsview_core::config::Config;
use newsview_core::llm::{ChatRequest, ChatResponse, Gateway, LlmError};
use newsview_core::model::{AnnotationRecord, ContextConfig, LearningMode};
use newsview_core::pipeline::{self, ClassifyPlan, Stage, Workspace};
use newsview_core::prompts::PromptTemplates;
use newsview_core::wikidata::OfflineApi;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn e2e() -> PathBuf {
    fixtures().join("e2e")
}

/// Extraction answers per article: (utterance, actor).
pub const CLAIMS: &[(&str, &[(&str, &str)])] = &[
    (
        "Government sets out plan on small boat crossings",
        &[
            ("\"We will smash the smuggling gangs that profit from dangerous crossings.\"", "Keir Starmer"),
            ("Yvette Cooper said that people with no right to stay would be returned more quickly.", "Yvette Cooper"),
            ("\"Without safe and legal routes, desperate families will keep risking their lives at sea.\"", "Maria Lopez"),
        ],
    ),
    (
        "Net migration figures spark fresh row",
        &[
            ("\"Net migration at this level is unsustainable and must be cut sharply.\"", "Nigel Farage"),
            ("\"We cannot staff our care homes without overseas workers.\"", "Priya Shah"),
            ("Keir Starmer said the government would reduce reliance on overseas recruitment by training more workers at home.", "Keir Starmer"),
        ],
    ),
    (
        "Asylum backlog falls as processing resumes",
        &[
            ("\"Clearing the backlog will save the taxpayer billions spent on hotels.\"", "Yvette Cooper"),
            ("\"Refugees fleeing war deserve a fair hearing and a decent welcome.\"", "Maria Lopez"),
            ("\"The boats will keep coming until we leave the convention.\"", "Nigel Farage"),
        ],
    ),
];

/// Consolidated viewpoints with the utterance keywords that make a claim
/// align with each.
pub const VIEWPOINTS: &[(&str, &str, &[&str])] = &[
    ("Border enforcement", "Irregular crossings should be stopped through tougher border enforcement and action against smuggling networks.", &["smuggling", "boats", "returned"]),
    ("Humanitarian protection", "Refugees are owed protection, which requires safe and legal routes and fair treatment of asylum seekers.", &["safe and legal", "refugees", "fair hearing"]),
    ("Lower migration", "Overall migration numbers are too high and should be reduced through tighter policy on visas and recruitment.", &["net migration", "reduce reliance"]),
    ("Economic need", "The economy and public services depend on migrant workers, so shortages make migration necessary.", &["care homes", "overseas workers"]),
];

const CANDIDATES: &str = r#"[
 {"title": "Stop the boats", "description": "Crossings by small boat must be stopped by targeting smugglers and returning people."},
 {"title": "Safe routes", "description": "Refugees need safe and legal routes and a decent welcome."},
 {"title": "Cut numbers", "description": "Net migration is too high and must come down."},
 {"title": "Workforce needs", "description": "Sectors such as social care rely on overseas staff."},
 {"title": "Asylum system costs", "description": "The asylum backlog wastes public money on hotels."}
]"#;

fn prefix(template: &str) -> &str {
    let end = template.find('{').unwrap_or(template.len()).min(48);
    &template[..end]
}

fn lowercase_contains(hay: &str, needle: &str) -> bool {
    hay.to_lowercase().contains(&needle.to_lowercase())
}

fn section<'a>(text: &'a str, start: &str, end: &str) -> &'a str {
    let from = text.find(start).map(|i| i + start.len()).unwrap_or(0);
    let rest = &text[from..];
    rest.find(end).map_or(rest, |i| &rest[..i])
}

/// Deterministic stand-in for the provider: answers extraction, viewpoint
/// and classification prompts from the tables above. The classifier agrees
/// with the keyword rule except where it looks only at the actor profile
/// for a Labour politician, where it says yes to everything.
pub fn scripted_response(templates: &PromptTemplates, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
    let first = &request.messages[0].content;
    let last = &request.messages.last().expect("non-empty request").content;
    if first.starts_with(prefix(&templates.extraction)) {
        let user = &request.messages[1].content;
        let (_, claims) = CLAIMS.iter().find(|(title, _)| user.contains(title)).expect("known article");
        let list: Vec<_> = claims.iter().map(|(u, a)| serde_json::json!({"utterance": u, "actor": a})).collect();
        return Ok(ChatResponse::stop(serde_json::to_string(&list).unwrap()));
    }
    if first.starts_with(prefix(&templates.viewpoint_proposal)) {
        return Ok(ChatResponse::stop(CANDIDATES));
    }
    if first.starts_with(prefix(&templates.viewpoint_consolidation)) {
        let list: Vec<_> = VIEWPOINTS.iter().map(|(t, d, _)| serde_json::json!({"title": t, "description": d})).collect();
        return Ok(ChatResponse::stop(serde_json::to_string_pretty(&list).unwrap()));
    }
    if first.starts_with(prefix(&templates.classification_task)) {
        if request.messages.len() > 2 {
            return Ok(ChatResponse::stop("0"));
        }
        let utterance = section(last, "Utterance: ", "\n");
        let viewpoint = section(last, "Viewpoint:\n", "\n");
        let context = section(last, "Context:\n", "\n\nDoes");
        let (_, _, keywords) = VIEWPOINTS.iter().find(|(_, d, _)| viewpoint.contains(d)).expect("known viewpoint");
        let kg_only = !context.contains("Surrounding article text:") && context.contains("Labour Party");
        let aligned = kg_only || keywords.iter().any(|k| lowercase_contains(utterance, k));
        // One lenient-style answer per cell exercises the strict retry path.
        let text = if utterance.contains("hotels") && request.model_id.starts_with("ft:") { "Answer: 1" } else if aligned { "1" } else { "0" };
        return Ok(ChatResponse::stop(text));
    }
    Err(LlmError::InvalidRequest(format!("scripted backend has no answer for {:?}", prefix(first))))
}

pub fn scripted_gateway() -> Gateway {
    let templates = PromptTemplates::default();
    Gateway::from_fn(move |r| scripted_response(&templates, r))
}

/// Three annotators per pair. Gold follows the keyword rule; annotator
/// `a3` disagrees on a few pairs so that some single-positive pairs are
/// filtered and some two-positive pairs survive.
pub fn annotations(claims: &[newsview_core::model::Claim]) -> Vec<AnnotationRecord> {
    let mut out = Vec::new();
    for (ci, claim) in claims.iter().enumerate() {
        for (vi, (_, _, keywords)) in VIEWPOINTS.iter().enumerate() {
            let gold = keywords.iter().any(|k| lowercase_contains(&claim.utterance, k));
            for (ai, annotator) in ["a1", "a2", "a3"].iter().enumerate() {
                let flip = ai == 2 && (ci + vi) % 5 == 0;
                let one_off = ai == 1 && gold && (ci + vi) % 7 == 3;
                out.push(AnnotationRecord {
                    claim_id: claim.claim_id.clone(),
                    viewpoint_id: vi as u32 + 1,
                    annotator_id: annotator.to_string(),
                    label: (gold != flip) && !one_off,
                });
            }
        }
    }
    out
}

pub fn e2e_config(workspace: &Path) -> Config {
    let mut cfg = Config::load(&e2e().join("config.toml")).expect("fixture config");
    cfg.workspace = workspace.to_path_buf();
    cfg
}

/// Copies the seed profile cache and overrides into a fresh workspace.
pub fn seed_workspace(ws: &Workspace) {
    let cache = ws.profile_cache();
    fs::create_dir_all(&cache).unwrap();
    for entry in fs::read_dir(e2e().join("profile_cache")).unwrap() {
        let path = entry.unwrap().path();
        fs::copy(&path, cache.join(path.file_name().unwrap())).unwrap();
    }
    fs::copy(e2e().join("overrides.tsv"), ws.overrides()).unwrap();
}

/// Runs every stage against `gateway`; returns the summary lines.
pub fn run_pipeline(ws: &Workspace, config: &Config, gateway: &Gateway, annotations: &Path) -> Vec<String> {
    let stage = Stage::new(ws, config).unwrap();
    let mut lines = vec![
        pipeline::ingest(&stage, &e2e().join("articles.raw.jsonl")).unwrap().to_string(),
        pipeline::extract(&stage, gateway).unwrap().to_string(),
        pipeline::propose(&stage, gateway).unwrap().to_string(),
        pipeline::consolidate(&stage, gateway).unwrap().to_string(),
        pipeline::export_review(&stage).unwrap().to_string(),
        pipeline::import_review(&stage, None).unwrap().to_string(),
        pipeline::enrich(&stage, Arc::new(OfflineApi)).unwrap().to_string(),
    ];
    if !annotations.exists() {
        let claims = newsview_core::model::io::load_claims(&ws.claims()).unwrap();
        newsview_core::model::io::save_annotations_csv(annotations, &self::annotations(&claims)).unwrap();
    }
    lines.push(pipeline::build_dataset(&stage, pipeline::BuildInputs { annotations, published_split: None, selection: None }).unwrap().to_string());
    let models: Vec<&ModelSpec> = config.models.iter().collect();
    let plan = ClassifyPlan {
        models,
        contexts: ContextConfig::ALL.to_vec(),
        modes: vec![LearningMode::ZeroShot, LearningMode::FineTuned],
        split: None,
    };
    let cells = pipeline::classify(&stage, gateway, &plan).unwrap();
    for c in &cells {
        lines.push(c.to_string());
        lines.push(pipeline::evaluate(&stage, &c.cell).unwrap().0.to_string());
    }
    lines.push(pipeline::analytics(&stage, newsview_core::eval::Dimension::Party, None).unwrap().0.to_string());
    lines
}

/// Every file under `root`, relative path to bytes.
pub fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                let rel = p.strip_prefix(base).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Replaces every occurrence of the workspace path so snapshots of two
/// different temporary directories compare equal.
pub fn relativize(snap: BTreeMap<String, Vec<u8>>, root: &Path) -> BTreeMap<String, Vec<u8>> {
    let needle = root.display().to_string();
    snap.into_iter()
        .map(|(k, v)| {
            let text = String::from_utf8_lossy(&v).replace(&needle, "<ws>");
            (k, text.into_bytes())
        })
        .collect()
}
