use serde::{Deserialize, Serialize};

use super::enrich::ExtraProperty;
use crate::model::ActorProfile;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    /// Render only the first K positions (statement order); `None` = all.
    pub position_top_k: Option<usize>,
    /// Extra-attribute clauses, rendered in this order.
    pub extras: Vec<ExtraProperty>,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self { position_top_k: None, extras: ExtraProperty::defaults() }
    }
}

enum Pronoun {
    He,
    She,
    They,
}

impl Pronoun {
    fn from_gender(gender: Option<&str>) -> Self {
        match gender.map(|g| g.trim().to_lowercase()).as_deref() {
            Some("male" | "trans man" | "cisgender male") => Pronoun::He,
            Some("female" | "trans woman" | "cisgender female") => Pronoun::She,
            _ => Pronoun::They,
        }
    }

    fn subject(&self) -> &'static str {
        match self {
            Pronoun::He => "He",
            Pronoun::She => "She",
            Pronoun::They => "They",
        }
    }

    fn has(&self) -> &'static str {
        match self {
            Pronoun::They => "have",
            _ => "has",
        }
    }

    fn is(&self) -> &'static str {
        match self {
            Pronoun::They => "are",
            _ => "is",
        }
    }
}

fn dedup(values: &[String]) -> Vec<&str> {
    let mut out: Vec<&str> = Vec::new();
    for v in values.iter().map(|v| v.trim()).filter(|v| !v.is_empty()) {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Renders the actor sentence used as KG context:
///
/// `{name} ({description}). {Pronoun} has worked as a {occupations} and has
/// held the position of {positions} affiliated with the {parties} with
/// {extra clauses joined by " and "}.`
///
/// Clauses whose field is empty are left out; a profile with only a name
/// renders as `{name}.`.
pub fn render_description(profile: &ActorProfile, config: &RenderConfig) -> String {
    let mut out = profile.name.trim().to_string();
    let description = profile.description.trim();
    if !description.is_empty() {
        out.push_str(&format!(" ({description})"));
    }
    out.push('.');

    let pronoun = Pronoun::from_gender(profile.gender.as_deref());
    let occupations = dedup(&profile.occupations);
    let mut positions = dedup(&profile.positions_held);
    if let Some(k) = config.position_top_k {
        positions.truncate(k);
    }
    let parties = dedup(&profile.parties);

    let mut verbs = Vec::new();
    if !occupations.is_empty() {
        verbs.push(format!("{} worked as a {}", pronoun.has(), occupations.join(", ")));
    }
    if !positions.is_empty() {
        verbs.push(format!("{} held the position of {}", pronoun.has(), positions.join(", ")));
    }
    let mut predicate = verbs.join(" and ");

    if !parties.is_empty() {
        let clause = format!("affiliated with the {}", parties.join(", "));
        predicate = if predicate.is_empty() { format!("{} {clause}", pronoun.is()) } else { format!("{predicate} {clause}") };
    }

    let extras: Vec<String> = config
        .extras
        .iter()
        .filter_map(|x| {
            let values = dedup(profile.extra_attributes.get(&x.key)?);
            (!values.is_empty()).then(|| x.clause.replace("{}", &values.join(", ")))
        })
        .collect();
    if !extras.is_empty() {
        let clause = extras.join(" and ");
        predicate = if predicate.is_empty() { format!("{} {clause}", pronoun.has()) } else { format!("{predicate} with {clause}") };
    }

    if !predicate.is_empty() {
        out.push_str(&format!(" {} {predicate}.", pronoun.subject()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};
    use std::collections::BTreeMap;

    fn bare(name: &str) -> ActorProfile {
        ActorProfile {
            qid: "Q1".into(),
            name: name.into(),
            description: String::new(),
            gender: None,
            occupations: vec![],
            positions_held: vec![],
            parties: vec![],
            extra_attributes: BTreeMap::new(),
            retrieved_at: Utc.with_ymd_and_hms(2025, 1, 1, 0, 0, 0).unwrap(),
        }
    }

    fn starmer() -> ActorProfile {
        let mut p = bare("Keir Starmer");
        p.qid = "Q16515053".into();
        p.description = "Prime Minister of the United Kingdom since 2024".into();
        p.gender = Some("male".into());
        p.occupations = vec!["barrister".into(), "politician".into(), "jurist".into()];
        p.positions_held = vec![
            "Prime Minister of the United Kingdom".into(),
            "member of the 59th Parliament of the United Kingdom".into(),
            "Leader of the Opposition".into(),
            "Leader of the Labour Party".into(),
        ];
        p.parties = vec!["Labour Party".into()];
        p.extra_attributes.insert("religion_or_worldview".into(), vec!["atheism".into()]);
        p.extra_attributes.insert("political_ideology".into(), vec!["social democracy".into()]);
        p
    }

    const STARMER: &str = "Keir Starmer (Prime Minister of the United Kingdom since 2024). He has worked as a barrister, politician, jurist and has held the position of Prime Minister of the United Kingdom, member of the 59th Parliament of the United Kingdom, Leader of the Opposition affiliated with the Labour Party with a religious or philosophical view of atheism and a political ideology of social democracy.";

    #[test]
    fn starmer_golden_with_three_positions() {
        let cfg = RenderConfig { position_top_k: Some(3), ..Default::default() };
        assert_eq!(render_description(&starmer(), &cfg), STARMER);
    }

    #[test]
    fn default_renders_all_positions() {
        let s = render_description(&starmer(), &RenderConfig::default());
        assert!(s.contains("Leader of the Opposition, Leader of the Labour Party affiliated"));
    }

    #[test]
    fn name_only() {
        assert_eq!(render_description(&bare("Jane Doe"), &RenderConfig::default()), "Jane Doe.");
    }

    #[test]
    fn no_gender_uses_they() {
        let mut p = bare("Alex Roe");
        p.occupations = vec!["journalist".into()];
        p.parties = vec!["Green Party".into()];
        assert_eq!(
            render_description(&p, &RenderConfig::default()),
            "Alex Roe. They have worked as a journalist affiliated with the Green Party."
        );
    }

    #[test]
    fn female_party_only_and_extras_only() {
        let mut p = bare("Yvette Cooper");
        p.gender = Some("female".into());
        p.parties = vec!["Labour Party".into()];
        assert_eq!(render_description(&p, &RenderConfig::default()), "Yvette Cooper. She is affiliated with the Labour Party.");

        let mut q = bare("Sam Poe");
        q.extra_attributes.insert("political_ideology".into(), vec!["liberalism".into()]);
        assert_eq!(render_description(&q, &RenderConfig::default()), "Sam Poe. They have a political ideology of liberalism.");
    }

    #[test]
    fn duplicates_collapse() {
        let mut p = bare("A");
        p.gender = Some("male".into());
        p.occupations = vec!["politician".into(), "politician".into()];
        assert_eq!(render_description(&p, &RenderConfig::default()), "A. He has worked as a politician.");
    }
}
