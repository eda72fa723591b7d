//! Latent-plan recovery: match reference texts to the text plans that could
//! have produced them, building the plan-annotated training corpus.
//!
//! A reference and a plan are consistent when they split into the same
//! sentences, the entities recognized in each sentence form an in-order
//! subsequence of the sentence plan's pre-order entity sequence, and every
//! unrecognized plan entity already appeared earlier in the plan.

use std::collections::BTreeSet;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{DatasetEntry, Entity, EntityKind, InputGraph, Triple};
use crate::plan::{enumerate_ordered_partitions, enumerate_sentence_plans, SentencePlan, TextPlan};

pub const MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

/// Abbreviations that never end a sentence.
const ABBREVIATIONS: [&str; 24] = [
    "mr.", "mrs.", "ms.", "dr.", "prof.", "st.", "no.", "approx.", "etc.", "vs.", "sr.", "jr.",
    "jan.", "feb.", "mar.", "apr.", "jun.", "jul.", "aug.", "sep.", "sept.", "oct.", "nov.",
    "dec.",
];

#[derive(Debug, Error)]
pub enum MatcherError {
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
}

/// Tunable matching parameters.
#[derive(Debug, Clone, Copy)]
pub struct MatchConfig {
    /// Minimum normalized Levenshtein similarity for a token match.
    pub threshold: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig { threshold: 0.80 }
    }
}

// --- Sentence splitting -----------------------------------------------------

/// A reference text split into sentences with their source offsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentenceSplit {
    pub sentences: Vec<String>,
    /// Byte ranges of the sentences in the original text.
    pub offsets: Vec<Range<usize>>,
}

fn is_initials(word: &str) -> bool {
    // "A.", "A.T.", "p.m." style tokens
    !word.is_empty()
        && word.len() % 2 == 0
        && word
            .as_bytes()
            .chunks(2)
            .all(|c| c[0].is_ascii_alphabetic() && c[1] == b'.')
}

/// Split on sentence-final punctuation followed by whitespace and an
/// uppercase letter (or end of text), guarding abbreviations and initials,
/// and never splitting inside quoted spans.
pub fn split_sentences(text: &str) -> SentenceSplit {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut breaks: Vec<usize> = Vec::new(); // byte index just after the punctuation
    let mut in_quote = false;
    for i in 0..chars.len() {
        let (byte, c) = chars[i];
        if c == '"' {
            in_quote = !in_quote;
            continue;
        }
        if !matches!(c, '.' | '!' | '?') || in_quote {
            continue;
        }
        // only break at the end of a punctuation run
        if chars.get(i + 1).is_some_and(|(_, n)| matches!(n, '.' | '!' | '?')) {
            continue;
        }
        let end = byte + c.len_utf8();
        // next non-whitespace character must be uppercase (or end of text)
        let mut j = i + 1;
        if j < chars.len() && !chars[j].1.is_whitespace() {
            continue; // mid-token period, e.g. "8820.0" or "A.T."
        }
        while j < chars.len() && chars[j].1.is_whitespace() {
            j += 1;
        }
        if j == chars.len() {
            break; // final punctuation, no break needed
        }
        if !chars[j].1.is_uppercase() {
            continue;
        }
        if c == '.' {
            // the word ending at this period must not be an abbreviation
            let mut start = i;
            while start > 0 && !chars[start - 1].1.is_whitespace() {
                start -= 1;
            }
            let word: String = chars[start..=i].iter().map(|(_, ch)| ch).collect();
            let lower = word.to_lowercase();
            if ABBREVIATIONS.contains(&lower.as_str()) || is_initials(&word) {
                continue;
            }
        }
        breaks.push(end);
    }

    let mut sentences = Vec::new();
    let mut offsets = Vec::new();
    let mut start = 0usize;
    for &end in breaks.iter().chain(std::iter::once(&text.len())) {
        let raw = &text[start..end];
        let trimmed = raw.trim();
        if !trimmed.is_empty() {
            let lead = raw.len() - raw.trim_start().len();
            offsets.push(start + lead..start + lead + trimmed.len());
            sentences.push(trimmed.to_string());
        }
        start = end;
    }
    if sentences.is_empty() {
        sentences.push(text.trim().to_string());
        offsets.push(0..text.len());
    }
    SentenceSplit { sentences, offsets }
}

// --- Entity recognition -----------------------------------------------------

/// A recognized occurrence of an input entity in a sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityMention {
    pub entity: Entity,
    pub sentence_index: usize,
    /// Token index range within the sentence.
    pub token_span: Range<usize>,
    /// Byte range within the sentence string.
    pub char_span: Range<usize>,
    /// Similarity of the match, in [0, 1].
    pub score: f64,
}

struct SentenceToken {
    norm: String,
    start: usize,
    end: usize,
}

fn normalize_token(tok: &str) -> String {
    tok.chars()
        .filter(|c| c.is_alphanumeric())
        .flat_map(|c| c.to_lowercase())
        .collect()
}

fn tokenize(sentence: &str) -> Vec<SentenceToken> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in sentence.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push(SentenceToken {
                    norm: normalize_token(&sentence[s..i]),
                    start: s,
                    end: i,
                });
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push(SentenceToken {
            norm: normalize_token(&sentence[s..]),
            start: s,
            end: sentence.len(),
        });
    }
    out.retain(|t| !t.norm.is_empty());
    out
}

pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn token_similarity(a: &str, b: &str) -> f64 {
    let max = a.chars().count().max(b.chars().count());
    if max == 0 {
        return 1.0;
    }
    1.0 - levenshtein(a, b) as f64 / max as f64
}

/// Verbalization variants of a date entity, as normalized token sequences.
fn date_variants(iso: &str) -> Vec<Vec<String>> {
    let year = &iso[0..4];
    let month: usize = iso[5..7].parse().unwrap_or(0);
    let day: usize = iso[8..10].parse().unwrap_or(0);
    if month == 0 || month > 12 {
        return vec![vec![normalize_token(iso)]];
    }
    let month_name = normalize_token(MONTHS[month - 1]);
    let day_plain = day.to_string();
    let day_ord = format!("{day_plain}{}", ordinal_suffix(day));
    let mut variants = vec![
        vec![month_name.clone(), day_ord.clone(), year.to_string()],
        vec![month_name.clone(), day_plain.clone(), year.to_string()],
        vec![day_plain.clone(), month_name.clone(), year.to_string()],
        vec![day_ord, month_name, year.to_string()],
        vec![normalize_token(iso)],
        vec![year.to_string()],
    ];
    variants.sort_by_key(|v| std::cmp::Reverse(v.len()));
    variants
}

/// English ordinal suffix for a day number (11/12/13 take "th").
pub fn ordinal_suffix(day: usize) -> &'static str {
    match (day % 10, day % 100) {
        (_, 11..=13) => "th",
        (1, _) => "st",
        (2, _) => "nd",
        (3, _) => "rd",
        _ => "th",
    }
}

struct Candidate {
    entity: Entity,
    token_span: Range<usize>,
    score: f64,
}

fn entity_candidate(entity: &Entity, tokens: &[SentenceToken], cfg: &MatchConfig) -> Option<Candidate> {
    if entity.kind == EntityKind::DateLiteral {
        for variant in date_variants(&entity.id) {
            let k = variant.len();
            if k > tokens.len() {
                continue;
            }
            for start in 0..=tokens.len() - k {
                if (0..k).all(|i| tokens[start + i].norm == variant[i]) {
                    return Some(Candidate {
                        entity: entity.clone(),
                        token_span: start..start + k,
                        score: 1.0,
                    });
                }
            }
        }
        return None;
    }

    let etokens: Vec<String> = entity.tokens().iter().map(|t| normalize_token(t)).collect();
    let etokens: Vec<&String> = etokens.iter().filter(|t| !t.is_empty()).collect();
    let k = etokens.len();
    if k == 0 || k > tokens.len() {
        return None;
    }
    let mut best: Option<(usize, f64, usize)> = None; // (matched, sim sum, start)
    for start in 0..=tokens.len() - k {
        let mut matched = 0usize;
        let mut sim_sum = 0.0;
        for i in 0..k {
            let sim = token_similarity(etokens[i], &tokens[start + i].norm);
            if sim >= cfg.threshold {
                matched += 1;
                sim_sum += sim;
            }
        }
        let enough = if k == 1 { matched == 1 } else { matched * 3 >= k * 2 };
        if enough && best.map_or(true, |(bm, bs, _)| matched > bm || (matched == bm && sim_sum > bs)) {
            best = Some((matched, sim_sum, start));
        }
    }
    best.map(|(matched, sim_sum, start)| Candidate {
        entity: entity.clone(),
        token_span: start..start + k,
        score: sim_sum / matched as f64,
    })
}

/// Recognize input entities in a sentence, in left-to-right textual order.
/// Each entity matches at most once; overlaps resolve greedily
/// longest-span-first.
pub fn recognize_entities_in(
    sentence: &str,
    entities: &[Entity],
    sentence_index: usize,
    cfg: &MatchConfig,
) -> Vec<EntityMention> {
    let tokens = tokenize(sentence);
    let mut candidates: Vec<Candidate> = entities
        .iter()
        .filter_map(|e| entity_candidate(e, &tokens, cfg))
        .collect();
    candidates.sort_by(|a, b| {
        b.token_span
            .len()
            .cmp(&a.token_span.len())
            .then_with(|| b.score.partial_cmp(&a.score).unwrap())
            .then_with(|| a.token_span.start.cmp(&b.token_span.start))
            .then_with(|| a.entity.id.cmp(&b.entity.id))
    });
    let mut taken: Vec<Range<usize>> = Vec::new();
    let mut mentions: Vec<EntityMention> = Vec::new();
    for c in candidates {
        if taken
            .iter()
            .any(|r| r.start < c.token_span.end && c.token_span.start < r.end)
        {
            continue;
        }
        taken.push(c.token_span.clone());
        mentions.push(EntityMention {
            char_span: tokens[c.token_span.start].start..tokens[c.token_span.end - 1].end,
            entity: c.entity,
            sentence_index,
            token_span: c.token_span,
            score: c.score,
        });
    }
    mentions.sort_by_key(|m| m.token_span.start);
    mentions
}

/// Recognize the graph's entities in a sentence.
pub fn recognize_entities(sentence: &str, graph: &InputGraph, cfg: &MatchConfig) -> Vec<EntityMention> {
    recognize_entities_in(sentence, graph.entities(), 0, cfg)
}

// --- Consistency ------------------------------------------------------------

/// True iff every triple of `subset` touches a mentioned entity and every
/// mentioned entity is covered by some triple of `subset`.
pub fn potentially_consistent(subset: &[&Triple], mentions: &[EntityMention]) -> bool {
    let mentioned: BTreeSet<&str> = mentions.iter().map(|m| m.entity.id.as_str()).collect();
    subset.iter().all(|t| {
        mentioned.contains(t.subject.id.as_str()) || mentioned.contains(t.object.id.as_str())
    }) && mentions.iter().all(|m| {
        subset
            .iter()
            .any(|t| t.subject.id == m.entity.id || t.object.id == m.entity.id)
    })
}

/// True iff the recognized sentence entities are an in-order subsequence of
/// the plan's pre-order entity sequence, and every unmatched plan entity is in
/// `prior` (entities occurring earlier in the text plan).
pub fn is_consistent(
    sentence_entities: &[&Entity],
    plan_sentence: &SentencePlan,
    prior: &BTreeSet<String>,
) -> bool {
    let pe = plan_sentence.entity_sequence();
    // entities are unique within a sentence plan, so the embedding is unique
    let mut positions = Vec::with_capacity(sentence_entities.len());
    for se in sentence_entities {
        match pe.iter().position(|p| p.id == se.id) {
            Some(i) => positions.push(i),
            None => return false,
        }
    }
    if positions.windows(2).any(|w| w[0] >= w[1]) {
        return false;
    }
    pe.iter()
        .enumerate()
        .filter(|(i, _)| !positions.contains(i))
        .all(|(_, p)| prior.contains(&p.id))
}

// --- Reference matching -----------------------------------------------------

/// All text plans consistent with `reference`, in deterministic enumeration
/// order. Empty result means unmatched.
pub fn match_reference(graph: &InputGraph, reference: &str, cfg: &MatchConfig) -> Vec<TextPlan> {
    if graph.is_empty() {
        return Vec::new();
    }
    let split = split_sentences(reference);
    let n_sentences = split.sentences.len();
    let n = graph.len();
    if n_sentences > n {
        return Vec::new();
    }
    let mentions: Vec<Vec<EntityMention>> = split
        .sentences
        .iter()
        .enumerate()
        .map(|(i, s)| recognize_entities_in(s, graph.entities(), i, cfg))
        .collect();

    let triples = graph.triples();
    let partitions = match enumerate_ordered_partitions(n, n) {
        Ok(p) => p,
        Err(_) => return Vec::new(),
    };

    let mut out = Vec::new();
    'division: for division in partitions.iter().filter(|p| p.len() == n_sentences) {
        // prior entities per sentence: everything appearing in earlier subsets
        let mut prior: Vec<BTreeSet<String>> = Vec::with_capacity(n_sentences);
        let mut acc = BTreeSet::new();
        for subset in division {
            prior.push(acc.clone());
            for &i in subset {
                acc.insert(triples[i].subject.id.clone());
                acc.insert(triples[i].object.id.clone());
            }
        }

        let mut per_sentence: Vec<Vec<SentencePlan>> = Vec::with_capacity(n_sentences);
        for (si, subset) in division.iter().enumerate() {
            let ts: Vec<&Triple> = subset.iter().map(|&i| &triples[i]).collect();
            if !potentially_consistent(&ts, &mentions[si]) {
                continue 'division;
            }
            let se: Vec<&Entity> = mentions[si].iter().map(|m| &m.entity).collect();
            let candidates: Vec<SentencePlan> = match enumerate_sentence_plans(&ts) {
                Ok(plans) => plans
                    .into_iter()
                    .filter(|p| is_consistent(&se, p, &prior[si]))
                    .collect(),
                Err(_) => continue 'division,
            };
            if candidates.is_empty() {
                continue 'division;
            }
            per_sentence.push(candidates);
        }

        let mut idx = vec![0usize; n_sentences];
        loop {
            out.push(TextPlan {
                sentences: idx
                    .iter()
                    .enumerate()
                    .map(|(si, &i)| per_sentence[si][i].clone())
                    .collect(),
            });
            // odometer over per-sentence candidates
            let mut carry = n_sentences;
            while carry > 0 {
                let d = carry - 1;
                idx[d] += 1;
                if idx[d] < per_sentence[d].len() {
                    break;
                }
                idx[d] = 0;
                carry -= 1;
            }
            if carry == 0 {
                break;
            }
        }
    }
    out
}

// --- Corpus construction ----------------------------------------------------

/// One (graph, reference, plan) training triple.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchedExample {
    pub eid: String,
    pub graph: InputGraph,
    pub reference: String,
    pub plan: TextPlan,
    /// Position of this plan among all consistent plans for the reference.
    pub plan_rank: usize,
    /// Total number of consistent plans found for the reference.
    pub n_consistent: usize,
}

impl MatchedExample {
    /// Reference sentences paired with their sentence plans.
    pub fn per_sentence_pairs(&self) -> Vec<(String, &SentencePlan)> {
        split_sentences(&self.reference)
            .sentences
            .into_iter()
            .zip(self.plan.sentences.iter())
            .collect()
    }
}

/// Aggregate statistics of a matching run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatchReport {
    pub pairs: usize,
    pub matched_pairs: usize,
    /// matched / pairs; absent when there were no pairs.
    pub match_rate: Option<f64>,
    /// Histogram of consistent-plan counts per matched reference:
    /// (plan count, number of references).
    pub plans_per_reference: Vec<(usize, usize)>,
}

/// Run [`match_reference`] over every (graph, reference) pair, keeping all
/// consistent plans per reference.
pub fn build_matched_corpus(
    entries: &[DatasetEntry],
    cfg: &MatchConfig,
) -> (Vec<MatchedExample>, MatchReport) {
    let pairs: Vec<(&DatasetEntry, &String)> = entries
        .iter()
        .flat_map(|e| e.references.iter().map(move |r| (e, r)))
        .collect();
    let matched: Vec<Vec<TextPlan>> = pairs
        .par_iter()
        .map(|(entry, reference)| match_reference(&entry.graph, reference, cfg))
        .collect();

    let mut examples = Vec::new();
    let mut matched_pairs = 0;
    let mut histogram: std::collections::BTreeMap<usize, usize> = std::collections::BTreeMap::new();
    for ((entry, reference), plans) in pairs.iter().zip(matched) {
        if plans.is_empty() {
            continue;
        }
        matched_pairs += 1;
        *histogram.entry(plans.len()).or_insert(0) += 1;
        let n_consistent = plans.len();
        for (rank, plan) in plans.into_iter().enumerate() {
            examples.push(MatchedExample {
                eid: entry.eid.clone(),
                graph: entry.graph.clone(),
                reference: (*reference).clone(),
                plan,
                plan_rank: rank,
                n_consistent,
            });
        }
    }
    let pairs_total = pairs.len();
    let report = MatchReport {
        pairs: pairs_total,
        matched_pairs,
        match_rate: if pairs_total == 0 {
            None
        } else {
            Some(matched_pairs as f64 / pairs_total as f64)
        },
        plans_per_reference: histogram.into_iter().collect(),
    };
    (examples, report)
}

// --- Persistence ------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MatchedDoc {
    version: u32,
    examples: Vec<ExampleDoc>,
}

#[derive(Serialize, Deserialize)]
struct ExampleDoc {
    eid: String,
    reference: String,
    plan: TextPlan,
    plan_rank: usize,
    n_consistent: usize,
}

/// Serialize matched examples into the matched-corpus JSON format.
pub fn save_matched(examples: &[MatchedExample]) -> Result<Vec<u8>, MatcherError> {
    let doc = MatchedDoc {
        version: 1,
        examples: examples
            .iter()
            .map(|e| ExampleDoc {
                eid: e.eid.clone(),
                reference: e.reference.clone(),
                plan: e.plan.clone(),
                plan_rank: e.plan_rank,
                n_consistent: e.n_consistent,
            })
            .collect(),
    };
    Ok(serde_json::to_vec_pretty(&doc)?)
}

/// Load matched examples; the input graph is reconstructed from the plan's
/// expressed triples.
pub fn load_matched(bytes: &[u8]) -> Result<Vec<MatchedExample>, MatcherError> {
    let doc: MatchedDoc = serde_json::from_slice(bytes)?;
    if doc.version != 1 {
        return Err(MatcherError::Schema(format!(
            "unsupported matched-corpus version {}",
            doc.version
        )));
    }
    doc.examples
        .into_iter()
        .map(|e| {
            let graph = graph_from_plan(&e.plan)?;
            Ok(MatchedExample {
                eid: e.eid,
                reference: e.reference,
                graph,
                plan: e.plan,
                plan_rank: e.plan_rank,
                n_consistent: e.n_consistent,
            })
        })
        .collect()
}

/// Reconstruct the input graph a plan expresses.
pub fn graph_from_plan(plan: &TextPlan) -> Result<InputGraph, MatcherError> {
    let mut entities: Vec<Entity> = Vec::new();
    for e in plan.entity_sequence() {
        if !entities.iter().any(|x| x.id == e.id) {
            entities.push(e.clone());
        }
    }
    let by_id = |id: &str| entities.iter().find(|e| e.id == id).unwrap().clone();
    let mut triples = Vec::new();
    let mut seen = BTreeSet::new();
    for s in &plan.sentences {
        for (head, edge) in s.edges() {
            let (s_id, r, o_id) = match edge.direction {
                crate::plan::Direction::Forward => {
                    (head.id.clone(), edge.relation.clone(), edge.child.entity.id.clone())
                }
                crate::plan::Direction::Reverse => {
                    (edge.child.entity.id.clone(), edge.relation.clone(), head.id.clone())
                }
            };
            if seen.insert((s_id.clone(), r.id.clone(), o_id.clone())) {
                triples.push(Triple {
                    subject: by_id(&s_id),
                    relation: r,
                    object: by_id(&o_id),
                });
            }
        }
    }
    Ok(InputGraph::new(triples)?)
}
