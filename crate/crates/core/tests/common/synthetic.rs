//! Annotation fixture with the shape of the released benchmark: 402 claims
//! by 52 actors, the 9 immigration viewpoints, 3 annotators per pair and
//! exactly 310 pairs with a single positive vote.
#![allow(dead_code)]

use std::path::PathBuf;

use chrono::{NaiveDate, TimeZone, Utc};
use newsview_core::model::io as mio;
use newsview_core::model::{ActorProfile, AnnotationRecord, Claim, EnrichedActor, NewsArticle, ViewpointSet};
use newsview_core::pipeline::Workspace;
use newsview_core::viewpoints::immigration_case_study;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CLAIMS: usize = 402;
pub const ACTORS: usize = 52;
pub const VIEWPOINTS: usize = 9;
pub const ANNOTATORS: [&str; 3] = ["ann-a", "ann-b", "ann-c"];
pub const SINGLE_POSITIVE: usize = 310;

pub struct Synthetic {
    pub articles: Vec<NewsArticle>,
    pub claims: Vec<Claim>,
    pub profiles: Vec<EnrichedActor>,
    pub viewpoints: ViewpointSet,
    pub annotations: Vec<AnnotationRecord>,
}

fn actor(i: usize) -> String {
    format!("Actor Number{i:02}")
}

pub fn build(seed: u64) -> Synthetic {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sources = ["The Daily Ledger", "Northern Courier", "Evening Standard Times", "Coastal Herald"];
    let mut articles = Vec::new();
    let mut claims = Vec::new();
    for a in 0..CLAIMS.div_ceil(3) {
        let date = NaiveDate::from_ymd_opt(2024, 1 + (a % 12) as u32, 1 + (a % 28) as u32).unwrap();
        let utterances: Vec<String> = (0..3).map(|k| format!("Statement {} about migration policy number {k}.", a * 3 + k)).collect();
        let body = format!("Opening line of article {a}. {} Closing line.", utterances.join(" "));
        let article = NewsArticle {
            article_id: format!("art-{a:03}"),
            url: format!("https://example.org/{a}"),
            title: format!("Immigration report {a}"),
            body,
            source: sources[a % sources.len()].to_string(),
            published_date: date,
            topics: vec!["immigration".into()],
        };
        for (k, u) in utterances.iter().enumerate() {
            if claims.len() < CLAIMS {
                claims.push(Claim::new(u, &actor((a * 3 + k) % ACTORS), &article, "immigration"));
            }
        }
        articles.push(article);
    }
    claims.sort_by(|a, b| a.claim_id.cmp(&b.claim_id));

    let parties = ["Labour Party", "Conservative Party", "Reform UK", "Liberal Democrats"];
    let profiles = (0..ACTORS)
        .map(|i| EnrichedActor {
            actor_name: actor(i),
            profile: (i % 4 != 3).then(|| ActorProfile {
                qid: format!("Q{}", 100_000 + i),
                name: actor(i),
                description: "British politician".into(),
                gender: Some(if i % 2 == 0 { "male" } else { "female" }.into()),
                occupations: vec!["politician".into()],
                positions_held: vec![],
                parties: vec![parties[i % parties.len()].into()],
                extra_attributes: Default::default(),
                retrieved_at: Utc.with_ymd_and_hms(2024, 10, 1, 12, 0, 0).unwrap(),
            }),
        })
        .collect();

    let pairs = CLAIMS * VIEWPOINTS;
    let mut kinds: Vec<u8> = (0..pairs).map(|i| if i < SINGLE_POSITIVE { 1 } else { 0 }).collect();
    kinds.shuffle(&mut rng);
    let mut annotations = Vec::with_capacity(pairs * 3);
    for (p, kind) in kinds.iter().enumerate() {
        let claim = &claims[p / VIEWPOINTS];
        let viewpoint_id = (p % VIEWPOINTS) as u32 + 1;
        let votes: [bool; 3] = if *kind == 1 {
            let mut v = [true, false, false];
            v.shuffle(&mut rng);
            v
        } else {
            match rng.gen_range(0..20) {
                0..=14 => [false; 3],
                15..=17 => [true; 3],
                _ => {
                    let mut v = [true, true, false];
                    v.shuffle(&mut rng);
                    v
                }
            }
        };
        for (a, label) in ANNOTATORS.iter().zip(votes) {
            annotations.push(AnnotationRecord { claim_id: claim.claim_id.clone(), viewpoint_id, annotator_id: a.to_string(), label });
        }
    }
    Synthetic { articles, claims, profiles, viewpoints: immigration_case_study(), annotations }
}

/// Writes every build-dataset input into `ws`; returns the annotation CSV.
pub fn write_workspace(ws: &Workspace, fixture: &Synthetic) -> PathBuf {
    mio::save_corpus(&ws.corpus(), &fixture.articles).unwrap();
    mio::save_claims(&ws.claims(), &fixture.claims).unwrap();
    mio::save_profiles(&ws.profiles(), &fixture.profiles).unwrap();
    mio::save_viewpoints(&ws.reviewed_set(), &fixture.viewpoints).unwrap();
    let path = ws.root().join("annotations.csv");
    mio::save_annotations_csv(&path, &fixture.annotations).unwrap();
    path
}
