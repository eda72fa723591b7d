//! Deterministic plan-to-text realization: per-sentence template rendering
//! plus date and unit lexicalization.
//!
//! Every template starts with a `{h}` placeholder and mentions `{m}` exactly
//! once after it, so a sentence renders as the head entity followed by its
//! predicates. Chains attach with ", which", siblings with "and". Entity
//! mention order in the output is exactly the plan's pre-order entity
//! sequence, each entity mentioned once.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{EntityKind, Entity, RelationType};
use crate::matcher::{ordinal_suffix, recognize_entities_in, MatchConfig, MatchedExample, MONTHS};
use crate::plan::{Direction, PlanNode, SentencePlan, TextPlan};

#[derive(Debug, Error)]
pub enum RealizerError {
    #[error("bad date {0:?}: expected YYYY-MM-DD")]
    BadDate(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error("invalid template pattern {0:?}")]
    BadPattern(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateSource {
    Induced,
    Default,
}

/// A verbalization pattern for one (relation, direction), with `{h}` and
/// `{m}` placeholders; `{h}` always comes first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub relation: String,
    pub direction: Direction,
    pub pattern: String,
    pub source: TemplateSource,
}

fn pattern_valid(pattern: &str) -> bool {
    let h = pattern.match_indices("{h}").count();
    let m = pattern.match_indices("{m}").count();
    h == 1 && m == 1 && pattern.find("{h}").unwrap() < pattern.find("{m}").unwrap()
}

impl Template {
    fn new(
        relation: &str,
        direction: Direction,
        pattern: String,
        source: TemplateSource,
    ) -> Result<Self, RealizerError> {
        if !pattern_valid(&pattern) || !pattern.starts_with("{h} ") {
            return Err(RealizerError::BadPattern(pattern));
        }
        Ok(Template {
            relation: relation.to_string(),
            direction,
            pattern,
            source,
        })
    }
}

/// The fallback pattern for a relation and direction.
pub fn default_template(relation: &RelationType, direction: Direction) -> Template {
    let tokens = relation.tokens.join(" ");
    let pattern = match direction {
        Direction::Forward => format!("{{h}} 's {tokens} is {{m}}"),
        Direction::Reverse => format!("{{h}} is the {tokens} of {{m}}"),
    };
    Template {
        relation: relation.id.clone(),
        direction,
        pattern,
        source: TemplateSource::Default,
    }
}

/// Per-(relation, direction) templates; lookup always succeeds via the
/// default fallback.
#[derive(Debug, Clone, Default)]
pub struct TemplateBank {
    templates: BTreeMap<(String, Direction), Template>,
    /// (candidate sentences seen, patterns kept).
    pub induction_stats: (usize, usize),
}

impl TemplateBank {
    pub fn lookup(&self, relation: &RelationType, direction: Direction) -> Template {
        self.templates
            .get(&(relation.id.clone(), direction))
            .cloned()
            .unwrap_or_else(|| default_template(relation, direction))
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }
}

/// Induce templates from matched examples: every matched sentence whose plan
/// has exactly one edge and whose entities are both recognized in the text
/// yields a candidate pattern; the most frequent pattern per (relation,
/// direction) wins.
pub fn induce_templates(examples: &[MatchedExample], cfg: &MatchConfig) -> TemplateBank {
    let mut counts: BTreeMap<(String, Direction), BTreeMap<String, usize>> = BTreeMap::new();
    let mut seen = 0usize;
    for example in examples {
        // one candidate per reference; alternative plans repeat the sentence
        if example.plan_rank != 0 {
            continue;
        }
        for (sentence, plan) in example.per_sentence_pairs() {
            let edges = plan.edges();
            if edges.len() != 1 {
                continue;
            }
            seen += 1;
            let (head, edge) = edges[0];
            let pair = [head.clone(), edge.child.entity.clone()];
            let mentions = recognize_entities_in(&sentence, &pair, 0, cfg);
            let head_m = mentions.iter().find(|m| m.entity.id == head.id);
            let mod_m = mentions.iter().find(|m| m.entity.id == edge.child.entity.id);
            let (Some(head_m), Some(mod_m)) = (head_m, mod_m) else {
                continue;
            };
            if head_m.char_span.start >= mod_m.char_span.start {
                continue;
            }
            let mut pattern = String::new();
            pattern.push_str("{h}");
            pattern.push_str(&sentence[head_m.char_span.end..mod_m.char_span.start]);
            pattern.push_str("{m}");
            pattern.push_str(&sentence[mod_m.char_span.end..]);
            let pattern = pattern
                .trim_end()
                .trim_end_matches(['.', '!', '?'])
                .trim_end()
                .to_string();
            if !pattern.starts_with("{h} ") || !pattern_valid(&pattern) {
                continue;
            }
            *counts
                .entry((edge.relation.id.clone(), edge.direction))
                .or_default()
                .entry(pattern)
                .or_insert(0) += 1;
        }
    }
    let mut bank = TemplateBank::default();
    for ((relation, direction), patterns) in counts {
        // mode; ties go to the lexicographically smaller pattern
        let best = patterns
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(p, _)| p.clone())
            .unwrap();
        bank.induction_stats.1 += 1;
        bank.templates.insert(
            (relation.clone(), direction),
            Template {
                relation,
                direction,
                pattern: best,
                source: TemplateSource::Induced,
            },
        );
    }
    bank.induction_stats.0 = seen;
    bank
}

/// `YYYY-MM-DD` to "MonthName D{st|nd|rd|th}, YYYY".
pub fn lexicalize_date(iso: &str) -> Result<String, RealizerError> {
    let bad = || RealizerError::BadDate(iso.to_string());
    let parts: Vec<&str> = iso.split('-').collect();
    if parts.len() != 3 || parts[0].len() != 4 {
        return Err(bad());
    }
    let _year: u32 = parts[0].parse().map_err(|_| bad())?;
    let month: usize = parts[1].parse().map_err(|_| bad())?;
    let day: usize = parts[2].parse().map_err(|_| bad())?;
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return Err(bad());
    }
    Ok(format!(
        "{} {}{}, {}",
        MONTHS[month - 1],
        day,
        ordinal_suffix(day),
        parts[0]
    ))
}

/// `"VALUE"(unit)` parts to "VALUE unit".
pub fn lexicalize_unit(value: &str, unit: &str) -> String {
    format!(
        "{} {}",
        value.trim_matches('"'),
        unit.trim_matches(|c| c == '(' || c == ')' || c == '"')
    )
}

/// Surface rendering of one entity mention.
pub fn mention(entity: &Entity) -> String {
    match &entity.kind {
        EntityKind::DateLiteral => {
            lexicalize_date(&entity.id).unwrap_or_else(|_| entity.surface())
        }
        EntityKind::UnitLiteral { value, unit } => lexicalize_unit(value, unit),
        _ => entity.surface(),
    }
}

fn predicate(pattern: &str, rendered_child: &str) -> String {
    // all bank patterns start with "{h} "
    pattern["{h} ".len()..].replacen("{m}", rendered_child, 1)
}

fn render(node: &PlanNode, is_root: bool, bank: &TemplateBank) -> String {
    let mut out = mention(&node.entity);
    if node.children.is_empty() {
        return out;
    }
    if !is_root {
        out.push_str(", which");
    }
    for (j, edge) in node.children.iter().enumerate() {
        out.push_str(if j == 0 { " " } else { " and " });
        let template = bank.lookup(&edge.relation, edge.direction);
        let child = render(&edge.child, false, bank);
        out.push_str(&predicate(&template.pattern, &child));
    }
    out
}

/// Render one sentence plan: sentence-cased, terminated with ".".
pub fn realize_sentence_plan(plan: &SentencePlan, bank: &TemplateBank) -> String {
    let body = render(&plan.root, true, bank);
    let mut chars = body.chars();
    let cased = match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => body,
    };
    format!("{cased}.")
}

/// Render a full text plan, sentences joined by single spaces.
pub fn realize_text_plan(plan: &TextPlan, bank: &TemplateBank) -> String {
    plan.sentences
        .iter()
        .map(|s| realize_sentence_plan(s, bank))
        .collect::<Vec<_>>()
        .join(" ")
}

// --- Persistence ------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct BankDoc {
    version: u32,
    templates: BTreeMap<String, String>,
}

fn direction_key(d: Direction) -> &'static str {
    match d {
        Direction::Forward => "fwd",
        Direction::Reverse => "rev",
    }
}

/// Serialize a template bank to its JSON format.
pub fn save_templates(bank: &TemplateBank) -> Result<Vec<u8>, RealizerError> {
    let doc = BankDoc {
        version: 1,
        templates: bank
            .templates
            .iter()
            .map(|((rel, dir), t)| (format!("{rel}|{}", direction_key(*dir)), t.pattern.clone()))
            .collect(),
    };
    Ok(serde_json::to_vec_pretty(&doc)?)
}

/// Load a template bank, validating every pattern.
pub fn load_templates(bytes: &[u8]) -> Result<TemplateBank, RealizerError> {
    let doc: BankDoc = serde_json::from_slice(bytes)?;
    if doc.version != 1 {
        return Err(RealizerError::Schema(format!(
            "unsupported template bank version {}",
            doc.version
        )));
    }
    let mut bank = TemplateBank::default();
    for (key, pattern) in doc.templates {
        let (rel, dir) = key
            .rsplit_once('|')
            .ok_or_else(|| RealizerError::Schema(format!("bad template key {key:?}")))?;
        let direction = match dir {
            "fwd" => Direction::Forward,
            "rev" => Direction::Reverse,
            other => return Err(RealizerError::Schema(format!("bad direction {other:?}"))),
        };
        let template = Template::new(rel, direction, pattern, TemplateSource::Induced)?;
        bank.templates.insert((rel.to_string(), direction), template);
    }
    Ok(bank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_triple_line, InputGraph};
    use crate::linearizer::parse_linearized;

    fn graph(lines: &[&str]) -> InputGraph {
        InputGraph::new(lines.iter().map(|l| parse_triple_line(l).unwrap()).collect()).unwrap()
    }

    #[test]
    fn date_lexicalization() {
        assert_eq!(lexicalize_date("1776-07-04").unwrap(), "July 4th, 1776");
        assert_eq!(lexicalize_date("1933-10-17").unwrap(), "October 17th, 1933");
        assert_eq!(lexicalize_date("2000-01-01").unwrap(), "January 1st, 2000");
        assert_eq!(lexicalize_date("2000-02-02").unwrap(), "February 2nd, 2000");
        assert_eq!(lexicalize_date("2000-03-03").unwrap(), "March 3rd, 2000");
        assert_eq!(lexicalize_date("2000-03-11").unwrap(), "March 11th, 2000");
        assert_eq!(lexicalize_date("2000-03-12").unwrap(), "March 12th, 2000");
        assert_eq!(lexicalize_date("2000-03-13").unwrap(), "March 13th, 2000");
        assert_eq!(lexicalize_date("2000-03-21").unwrap(), "March 21st, 2000");
        assert!(lexicalize_date("2000-13-01").is_err());
        assert!(lexicalize_date("not-a-date").is_err());
    }

    #[test]
    fn unit_lexicalization() {
        assert_eq!(lexicalize_unit("5", "minutes"), "5 minutes");
        assert_eq!(lexicalize_unit("8820.0", "minutes"), "8820.0 minutes");
        assert_eq!(lexicalize_unit("1.0", "km"), "1.0 km");
        assert_eq!(lexicalize_unit("\"5\"", "(minutes)"), "5 minutes");
    }

    #[test]
    fn default_templates() {
        let residence = RelationType::new("residence");
        assert_eq!(
            default_template(&residence, Direction::Forward).pattern,
            "{h} 's residence is {m}"
        );
        let capital = RelationType::new("capital");
        assert_eq!(
            default_template(&capital, Direction::Reverse).pattern,
            "{h} is the capital of {m}"
        );
        let birth_place = RelationType::new("birthPlace");
        assert_eq!(
            default_template(&birth_place, Direction::Reverse).pattern,
            "{h} is the birth place of {m}"
        );
    }

    #[test]
    fn realizes_chain() {
        let g = graph(&["John | residence | London", "England | capital | London"]);
        let plan =
            parse_linearized("John -> residence [ London <- capital [ England ] ]", &g).unwrap();
        let bank = TemplateBank::default();
        assert_eq!(
            realize_text_plan(&plan, &bank),
            "John 's residence is London, which is the capital of England."
        );
    }

    #[test]
    fn realizes_siblings() {
        let g = graph(&["John | residence | London", "John | occupation | Bartender"]);
        let plan = parse_linearized(
            "John -> residence [ London ] -> occupation [ Bartender ]",
            &g,
        )
        .unwrap();
        let bank = TemplateBank::default();
        assert_eq!(
            realize_text_plan(&plan, &bank),
            "John 's residence is London and 's occupation is Bartender."
        );
    }

    #[test]
    fn realizes_dates_and_units() {
        let g = graph(&[
            "William_Anders | birthDate | \"1933-10-17\"",
            "William_Anders | timeInSpace | \"8820.0\"(minutes)",
        ]);
        let plan = parse_linearized(
            "William_Anders -> birth date [ 1933-10-17 ] -> time in space [ \"8820.0\"(minutes) ]",
            &g,
        )
        .unwrap();
        let bank = TemplateBank::default();
        let text = realize_text_plan(&plan, &bank);
        assert!(text.contains("October 17th, 1933"), "{text}");
        assert!(text.contains("8820.0 minutes"), "{text}");
    }

    #[test]
    fn mention_order_equals_preorder() {
        let g = graph(&[
            "John | residence | London",
            "England | capital | London",
            "John | occupation | Bartender",
        ]);
        let bank = TemplateBank::default();
        for plan in crate::plan::enumerate_text_plans(&g, None).unwrap() {
            let text = realize_text_plan(&plan, &bank);
            let expected: Vec<String> =
                plan.entity_sequence().iter().map(|e| mention(e)).collect();
            // mentions occur in pre-order
            let mut pos = 0;
            for m in &expected {
                let found = text[pos..].find(m.as_str());
                assert!(found.is_some(), "{m} not found in order in {text:?}");
                pos += found.unwrap() + m.len();
            }
        }
    }

    #[test]
    fn induces_template_from_single_edge_sentence() {
        let cfg = MatchConfig::default();
        let entries = vec![crate::corpus::DatasetEntry {
            graph: graph(&["England | capital | London"]),
            references: vec![
                "London is the capital of England.".into(),
                "London is the capital of England.".into(),
                "London is the well-known capital of England.".into(),
            ],
            category: "City".into(),
            eid: "Id1".into(),
        }];
        let (examples, _) = crate::matcher::build_matched_corpus(&entries, &cfg);
        let bank = induce_templates(&examples, &cfg);
        let capital = RelationType::new("capital");
        let t = bank.lookup(&capital, Direction::Reverse);
        assert_eq!(t.source, TemplateSource::Induced);
        // the two-vote pattern wins over the one-vote variant
        assert_eq!(t.pattern, "{h} is the capital of {m}");
        // un-induced lookups fall back to defaults
        let other = RelationType::new("mayor");
        assert_eq!(
            bank.lookup(&other, Direction::Forward).source,
            TemplateSource::Default
        );
    }

    #[test]
    fn induced_template_realizes_example() {
        let cfg = MatchConfig::default();
        let entries = vec![crate::corpus::DatasetEntry {
            graph: graph(&["John | employer | IBM"]),
            references: vec!["John works for IBM.".into()],
            category: "Person".into(),
            eid: "Id1".into(),
        }];
        let (examples, _) = crate::matcher::build_matched_corpus(&entries, &cfg);
        let bank = induce_templates(&examples, &cfg);
        let g = graph(&["John | employer | IBM"]);
        let plan = parse_linearized("John -> employer [ IBM ]", &g).unwrap();
        assert_eq!(realize_text_plan(&plan, &bank), "John works for IBM.");
    }

    #[test]
    fn bank_round_trip() {
        let cfg = MatchConfig::default();
        let entries = vec![crate::corpus::DatasetEntry {
            graph: graph(&["John | employer | IBM"]),
            references: vec!["John works for IBM.".into()],
            category: "Person".into(),
            eid: "Id1".into(),
        }];
        let (examples, _) = crate::matcher::build_matched_corpus(&entries, &cfg);
        let bank = induce_templates(&examples, &cfg);
        let bytes = save_templates(&bank).unwrap();
        let loaded = load_templates(&bytes).unwrap();
        let employer = RelationType::new("employer");
        assert_eq!(
            loaded.lookup(&employer, Direction::Forward).pattern,
            bank.lookup(&employer, Direction::Forward).pattern
        );
    }

    #[test]
    fn empty_plan_realizes_empty() {
        let plan = TextPlan { sentences: vec![] };
        assert_eq!(realize_text_plan(&plan, &TemplateBank::default()), "");
    }
}
