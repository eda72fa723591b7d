//! Evaluation harness: plan/realization consistency metrics and corpus BLEU.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matcher::{recognize_entities_in, MatchConfig, MatchReport};
use crate::plan::SentencePlan;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot evaluate an empty pair list")]
    Empty,
    #[error("hypothesis/reference length mismatch: {hypotheses} vs {references}")]
    LengthMismatch {
        hypotheses: usize,
        references: usize,
    },
}

/// Consistency of one realized sentence against its plan.
///
/// `order_ok` is only defined when every plan entity was found: entity order
/// is conditioned on full coverage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConsistencyResult {
    pub all_entities: bool,
    pub order_ok: Option<bool>,
}

/// Aggregate consistency rates: `entity_rate` over all pairs, `order_rate`
/// over the subset whose realizations covered every entity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyTable {
    pub entity_rate: f64,
    pub order_rate: f64,
    pub n: usize,
}

/// Does `text` mention every entity of `plan`, and in the plan's pre-order?
pub fn check_consistency(plan: &SentencePlan, text: &str, cfg: &MatchConfig) -> ConsistencyResult {
    let expected = plan.entity_sequence();
    let entities: Vec<_> = expected.iter().map(|&e| e.clone()).collect();
    let mentions = recognize_entities_in(text, &entities, 0, cfg);
    let found: Vec<&str> = mentions.iter().map(|m| m.entity.id.as_str()).collect();
    let all_entities = expected
        .iter()
        .all(|e| found.contains(&e.id.as_str()));
    if !all_entities {
        return ConsistencyResult {
            all_entities: false,
            order_ok: None,
        };
    }
    let expected_ids: Vec<&str> = expected.iter().map(|e| e.id.as_str()).collect();
    ConsistencyResult {
        all_entities: true,
        order_ok: Some(found == expected_ids),
    }
}

/// Aggregate [`check_consistency`] over (plan, realization) pairs.
pub fn consistency_table(
    pairs: &[(SentencePlan, String)],
    cfg: &MatchConfig,
) -> Result<ConsistencyTable, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut covered = 0usize;
    let mut ordered = 0usize;
    for (plan, text) in pairs {
        let r = check_consistency(plan, text, cfg);
        if r.all_entities {
            covered += 1;
            if r.order_ok == Some(true) {
                ordered += 1;
            }
        }
    }
    Ok(ConsistencyTable {
        entity_rate: covered as f64 / pairs.len() as f64,
        // vacuously ordered when nothing had full coverage
        order_rate: if covered == 0 {
            1.0
        } else {
            ordered as f64 / covered as f64
        },
        n: pairs.len(),
    })
}

/// BLEU tokenization: lowercase; alphanumeric runs are tokens; every other
/// non-whitespace character is its own token.
pub fn bleu_tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars().flat_map(|c| c.to_lowercase()) {
        if c.is_alphanumeric() {
            current.push(c);
        } else {
            if !current.is_empty() {
                tokens.push(std::mem::take(&mut current));
            }
            if !c.is_whitespace() {
                tokens.push(c.to_string());
            }
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

fn ngram_counts(tokens: &[String], n: usize) -> std::collections::HashMap<&[String], u64> {
    let mut counts = std::collections::HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Standard 4-gram corpus BLEU with brevity penalty, on a 0–100 scale.
/// No smoothing: a zero modified precision at any order gives 0.
pub fn corpus_bleu<F: Scalar>(
    hypotheses: &[String],
    references: &[Vec<String>],
) -> Result<F, EvalError> {
    if hypotheses.len() != references.len() {
        return Err(EvalError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut clipped = [0u64; 4];
    let mut total = [0u64; 4];
    let mut hyp_len = 0u64;
    let mut ref_len = 0u64;
    for (hyp, refs) in hypotheses.iter().zip(references) {
        let hyp_tokens = bleu_tokenize(hyp);
        let ref_tokens: Vec<Vec<String>> = refs.iter().map(|r| bleu_tokenize(r)).collect();
        hyp_len += hyp_tokens.len() as u64;
        // closest reference length; ties go to the shorter
        ref_len += ref_tokens
            .iter()
            .map(|r| r.len() as u64)
            .min_by_key(|&l| (l.abs_diff(hyp_tokens.len() as u64), l))
            .unwrap_or(0);
        for n in 1..=4 {
            let hyp_grams = ngram_counts(&hyp_tokens, n);
            let mut max_ref: std::collections::HashMap<&[String], u64> =
                std::collections::HashMap::new();
            for r in &ref_tokens {
                for (gram, count) in ngram_counts(r, n) {
                    let slot = max_ref.entry(gram).or_insert(0);
                    *slot = (*slot).max(count);
                }
            }
            for (gram, count) in hyp_grams {
                total[n - 1] += count;
                clipped[n - 1] += count.min(max_ref.get(gram).copied().unwrap_or(0));
            }
        }
    }
    let zero = F::zero();
    if clipped.iter().any(|&c| c == 0) || total.iter().any(|&t| t == 0) {
        return Ok(zero);
    }
    let mut log_precision = zero;
    for n in 0..4 {
        log_precision =
            log_precision + (F::from_count(clipped[n]) / F::from_count(total[n])).ln();
    }
    let quarter = F::from_f64_lossy(0.25);
    let bp = if hyp_len >= ref_len {
        F::one()
    } else {
        (F::one() - F::from_count(ref_len) / F::from_count(hyp_len.max(1))).exp()
    };
    Ok(F::from_f64_lossy(100.0) * bp * (log_precision * quarter).exp())
}

/// Human-readable summary of a matching run.
pub fn match_report(report: &MatchReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("pairs:   {}\n", report.pairs));
    out.push_str(&format!("matched: {}\n", report.matched_pairs));
    match report.match_rate {
        Some(rate) => out.push_str(&format!("rate:    {rate:.3}\n")),
        None => out.push_str("rate:    n/a\n"),
    }
    out.push_str("plans per reference:\n");
    for (plans, refs) in &report.plans_per_reference {
        out.push_str(&format!("  {plans:>6} -> {refs}\n"));
    }
    out
}
