use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::WikidataError;

/// One `wbsearchentities` hit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub qid: String,
    pub label: String,
    pub description: String,
}

/// Facts used to break ties between candidates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CandidateFacts {
    /// P31 contains Q5.
    pub is_human: bool,
    /// P106 item ids.
    pub occupations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionPolicy {
    /// Occupation item ids that mark a preferred candidate
    /// (politician, journalist).
    pub preferred_occupations: Vec<String>,
    /// Fail with `Ambiguous` instead of falling back to the lowest Q-id.
    pub strict: bool,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self { preferred_occupations: vec!["Q82955".into(), "Q1930187".into()], strict: false }
    }
}

fn numeric(qid: &str) -> u64 {
    qid.trim_start_matches('Q').parse().unwrap_or(u64::MAX)
}

/// Picks one candidate for `name`:
/// 1. keep exact case-insensitive label matches, if any;
/// 2. among those, keep humans with a preferred occupation, if any;
/// 3. lowest numeric Q-id wins (or `Ambiguous` in strict mode).
pub fn select_entity(
    name: &str,
    candidates: &[Candidate],
    facts: &HashMap<String, CandidateFacts>,
    policy: &SelectionPolicy,
) -> Result<String, WikidataError> {
    if candidates.is_empty() {
        return Err(WikidataError::NoCandidates(name.to_string()));
    }
    let wanted = name.trim().to_lowercase();
    let exact: Vec<&Candidate> = candidates.iter().filter(|c| c.label.trim().to_lowercase() == wanted).collect();
    let mut pool: Vec<&Candidate> = if exact.is_empty() { candidates.iter().collect() } else { exact };

    if pool.len() > 1 {
        let preferred: Vec<&Candidate> = pool
            .iter()
            .copied()
            .filter(|c| {
                facts.get(&c.qid).is_some_and(|f| {
                    f.is_human && f.occupations.iter().any(|o| policy.preferred_occupations.contains(o))
                })
            })
            .collect();
        if !preferred.is_empty() {
            pool = preferred;
        }
    }

    pool.sort_by_key(|c| numeric(&c.qid));
    pool.dedup_by(|a, b| a.qid == b.qid);
    if pool.len() > 1 && policy.strict {
        return Err(WikidataError::Ambiguous { name: name.to_string(), tied: pool.iter().map(|c| c.qid.clone()).collect() });
    }
    Ok(pool[0].qid.clone())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(qid: &str, label: &str) -> Candidate {
        Candidate { qid: qid.into(), label: label.into(), description: String::new() }
    }

    #[test]
    fn exact_label_match_wins() {
        let cands = vec![cand("Q5", "Keir Starmer ministry"), cand("Q16515053", "Keir Starmer")];
        let got = select_entity("keir starmer", &cands, &HashMap::new(), &SelectionPolicy::default()).unwrap();
        assert_eq!(got, "Q16515053");
    }

    #[test]
    fn politician_preferred_among_exact_matches() {
        let cands = vec![cand("Q100", "Tom Hunt"), cand("Q200", "Tom Hunt")];
        let mut facts = HashMap::new();
        facts.insert("Q100".to_string(), CandidateFacts { is_human: true, occupations: vec!["Q937857".into()] });
        facts.insert("Q200".to_string(), CandidateFacts { is_human: true, occupations: vec!["Q82955".into()] });
        let got = select_entity("Tom Hunt", &cands, &facts, &SelectionPolicy::default()).unwrap();
        assert_eq!(got, "Q200");
    }

    #[test]
    fn lowest_qid_breaks_ties() {
        let cands = vec![cand("Q300", "Jane Doe"), cand("Q30", "Jane Doe")];
        assert_eq!(select_entity("Jane Doe", &cands, &HashMap::new(), &SelectionPolicy::default()).unwrap(), "Q30");
    }

    #[test]
    fn strict_mode_reports_tie() {
        let cands = vec![cand("Q300", "Jane Doe"), cand("Q30", "Jane Doe")];
        let policy = SelectionPolicy { strict: true, ..Default::default() };
        match select_entity("Jane Doe", &cands, &HashMap::new(), &policy) {
            Err(WikidataError::Ambiguous { tied, .. }) => assert_eq!(tied, vec!["Q30", "Q300"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_candidates() {
        assert!(matches!(
            select_entity("x", &[], &HashMap::new(), &SelectionPolicy::default()),
            Err(WikidataError::NoCandidates(_))
        ));
    }
}
