//! Product-of-experts plan scoring: direction, global direction, sentence
//! split, and relation transition experts, each a Lidstone-smoothed count
//! table fitted from matched training plans.
//!
//! Scores live in the log domain; a plan's total is the sum of the four
//! expert log-probabilities. Ranking is deterministic: ties in the total are
//! broken by the plan's linearization string.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{InputGraph, RelationType};
use crate::linearizer::linearize_text_plan;
use crate::matcher::MatchedExample;
use crate::plan::{enumerate_text_plans, Direction, PlanError, TextPlan};
use crate::Scalar;

/// Reserved transition target marking the end of a sentence.
pub const EOS: &str = "EOS";

/// Default Lidstone smoothing constant.
pub const DEFAULT_LAMBDA: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("cannot fit a scoring model from an empty corpus")]
    EmptyCorpus,
    #[error("relation id {0:?} collides with the reserved EOS token")]
    ReservedRelation(String),
    #[error("bad sentence sizes {sizes:?} for graph size {graph_size}")]
    BadSizes { sizes: Vec<usize>, graph_size: usize },
    #[error("cannot select from an empty ranking")]
    EmptyRanking,
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Linearize(#[from] crate::linearizer::LinearizeError),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema error: {0}")]
    Schema(String),
}

/// Fitted count tables for the four experts plus the smoothing constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoringModel<F: Scalar> {
    pub lambda: F,
    /// relation id → (forward count, reverse count).
    pub dir_counts: BTreeMap<String, (u64, u64)>,
    /// graph size → reversed-edge count → observations.
    pub global_dir: BTreeMap<usize, BTreeMap<usize, u64>>,
    /// graph size → ordered sentence-size sequence → observations.
    pub split_counts: BTreeMap<usize, BTreeMap<Vec<usize>, u64>>,
    /// source relation id → (target relation id or EOS) → observations.
    pub transitions: BTreeMap<String, BTreeMap<String, u64>>,
    pub relation_vocab: BTreeSet<String>,
}

/// Per-expert log-probabilities of one plan; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanScore<F: Scalar> {
    pub total: F,
    pub direction: F,
    pub global_direction: F,
    pub split: F,
    pub transitions: F,
}

/// How `select_plans` picks from a ranked list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SelectMode {
    /// The single top-ranked plan.
    Best,
    /// The first k plans.
    TopK(usize),
    /// One uniform draw from the top ⌈p·N⌉ plans, deterministic in the seed.
    RandomTopPercent { percent: f64, seed: u64 },
}

/// Fit from the rank-0 plan of each matched reference.
pub fn fit<F: Scalar>(
    examples: &[MatchedExample],
    lambda: F,
) -> Result<ScoringModel<F>, ScorerError> {
    fit_with(examples, lambda, false)
}

/// Fit, optionally counting every consistent plan instead of only rank 0.
pub fn fit_with<F: Scalar>(
    examples: &[MatchedExample],
    lambda: F,
    all_plans: bool,
) -> Result<ScoringModel<F>, ScorerError> {
    let mut model = ScoringModel {
        lambda,
        dir_counts: BTreeMap::new(),
        global_dir: BTreeMap::new(),
        split_counts: BTreeMap::new(),
        transitions: BTreeMap::new(),
        relation_vocab: BTreeSet::new(),
    };
    let mut fitted = 0usize;
    for example in examples {
        if !all_plans && example.plan_rank != 0 {
            continue;
        }
        tally_plan(&mut model, &example.plan)?;
        fitted += 1;
    }
    if fitted == 0 {
        return Err(ScorerError::EmptyCorpus);
    }
    Ok(model)
}

fn tally_plan<F: Scalar>(model: &mut ScoringModel<F>, plan: &TextPlan) -> Result<(), ScorerError> {
    let n = plan.size();
    for sentence in &plan.sentences {
        let mut relations: Vec<&str> = Vec::new();
        for (_, edge) in sentence.edges() {
            if edge.relation.id == EOS {
                return Err(ScorerError::ReservedRelation(edge.relation.id.clone()));
            }
            let slot = model.dir_counts.entry(edge.relation.id.clone()).or_insert((0, 0));
            match edge.direction {
                Direction::Forward => slot.0 += 1,
                Direction::Reverse => slot.1 += 1,
            }
            model.relation_vocab.insert(edge.relation.id.clone());
            relations.push(&edge.relation.id);
        }
        for window in relations.windows(2) {
            *model
                .transitions
                .entry(window[0].to_string())
                .or_default()
                .entry(window[1].to_string())
                .or_insert(0) += 1;
        }
        if let Some(last) = relations.last() {
            *model
                .transitions
                .entry(last.to_string())
                .or_default()
                .entry(EOS.to_string())
                .or_insert(0) += 1;
        }
    }
    *model
        .global_dir
        .entry(n)
        .or_default()
        .entry(plan.reversed_edges())
        .or_insert(0) += 1;
    *model
        .split_counts
        .entry(n)
        .or_default()
        .entry(plan.sentence_sizes())
        .or_insert(0) += 1;
    Ok(())
}

fn lidstone<F: Scalar>(count: u64, total: u64, lambda: F, support: F) -> F {
    let denom = F::from_count(total) + support * lambda;
    if denom == F::zero() {
        // untrained and unsmoothed: fall back to uniform
        return F::one() / support;
    }
    (F::from_count(count) + lambda) / denom
}

impl<F: Scalar> ScoringModel<F> {
    /// p(direction | relation), smoothed over the two directions.
    pub fn p_direction(&self, relation: &RelationType, d: Direction) -> F {
        let (fwd, rev) = self.dir_counts.get(&relation.id).copied().unwrap_or((0, 0));
        let count = match d {
            Direction::Forward => fwd,
            Direction::Reverse => rev,
        };
        lidstone(count, fwd + rev, self.lambda, F::from_count(2))
    }

    /// p(n_reversed | graph_size), smoothed over {0..graph_size}.
    pub fn p_global_direction(&self, n_reversed: usize, graph_size: usize) -> F {
        debug_assert!(n_reversed <= graph_size);
        let row = self.global_dir.get(&graph_size);
        let count = row.and_then(|r| r.get(&n_reversed).copied()).unwrap_or(0);
        let total = row.map(|r| r.values().sum()).unwrap_or(0);
        lidstone(count, total, self.lambda, F::from_count(graph_size as u64 + 1))
    }

    /// p(sizes | graph_size), smoothed over the 2^{n-1} ordered compositions.
    pub fn p_split(&self, sizes: &[usize], graph_size: usize) -> Result<F, ScorerError> {
        if sizes.is_empty()
            || sizes.iter().any(|&s| s == 0)
            || sizes.iter().sum::<usize>() != graph_size
        {
            return Err(ScorerError::BadSizes {
                sizes: sizes.to_vec(),
                graph_size,
            });
        }
        let row = self.split_counts.get(&graph_size);
        let count = row.and_then(|r| r.get(sizes).copied()).unwrap_or(0);
        let total = row.map(|r| r.values().sum()).unwrap_or(0);
        let support = F::from_count(2).powi(graph_size as i32 - 1);
        Ok(lidstone(count, total, self.lambda, support))
    }

    /// One smoothed transition factor p(dst | src); `dst` may be [`EOS`].
    pub fn p_transition(&self, src: &str, dst: &str) -> F {
        let row = self.transitions.get(src);
        let count = row.and_then(|r| r.get(dst).copied()).unwrap_or(0);
        let total = row.map(|r| r.values().sum()).unwrap_or(0);
        lidstone(count, total, self.lambda, F::from_count(self.relation_vocab.len() as u64 + 1))
    }

    /// Product over sentences of the chain r_1→…→r_k→EOS: exactly k factors
    /// per k-edge sentence, no initial unigram term.
    pub fn p_transitions(&self, plan: &TextPlan) -> F {
        let mut p = F::one();
        for sentence in &plan.sentences {
            let relations: Vec<&str> = sentence
                .edges()
                .iter()
                .map(|(_, e)| e.relation.id.as_str())
                .collect();
            for window in relations.windows(2) {
                p = p * self.p_transition(window[0], window[1]);
            }
            if let Some(last) = relations.last() {
                p = p * self.p_transition(last, EOS);
            }
        }
        p
    }

    /// Log-domain sum of the four experts.
    pub fn score_plan(&self, plan: &TextPlan) -> Result<PlanScore<F>, ScorerError> {
        let n = plan.size();
        let mut direction = F::zero();
        for sentence in &plan.sentences {
            for (_, edge) in sentence.edges() {
                direction = direction + self.p_direction(&edge.relation, edge.direction).ln();
            }
        }
        let global_direction = self.p_global_direction(plan.reversed_edges(), n).ln();
        let split = self.p_split(&plan.sentence_sizes(), n)?.ln();
        let transitions = self.p_transitions(plan).ln();
        Ok(PlanScore {
            total: direction + global_direction + split + transitions,
            direction,
            global_direction,
            split,
            transitions,
        })
    }

    /// All plans of the graph, best first; ties broken by linearization
    /// string so the order is fully deterministic.
    pub fn rank_plans(
        &self,
        graph: &InputGraph,
    ) -> Result<Vec<(TextPlan, PlanScore<F>)>, ScorerError> {
        let plans = enumerate_text_plans(graph, None)?;
        let mut scored: Vec<(TextPlan, PlanScore<F>, String)> = plans
            .into_iter()
            .map(|plan| {
                let score = self.score_plan(&plan)?;
                let key = linearize_text_plan(&plan)?;
                Ok((plan, score, key))
            })
            .collect::<Result<_, ScorerError>>()?;
        scored.sort_by(|a, b| {
            b.1.total
                .partial_cmp(&a.1.total)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| a.2.cmp(&b.2))
        });
        Ok(scored.into_iter().map(|(p, s, _)| (p, s)).collect())
    }
}

/// Pick plans from a ranked list per the selection mode.
pub fn select_plans<F: Scalar>(
    ranked: &[(TextPlan, PlanScore<F>)],
    mode: SelectMode,
) -> Result<Vec<TextPlan>, ScorerError> {
    if ranked.is_empty() {
        return Err(ScorerError::EmptyRanking);
    }
    Ok(match mode {
        SelectMode::Best => vec![ranked[0].0.clone()],
        SelectMode::TopK(k) => ranked.iter().take(k.max(1)).map(|(p, _)| p.clone()).collect(),
        SelectMode::RandomTopPercent { percent, seed } => {
            let pool = ((percent * ranked.len() as f64).ceil() as usize)
                .clamp(1, ranked.len());
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let idx = rng.gen_range(0..pool);
            vec![ranked[idx].0.clone()]
        }
    })
}

/// Drop ranked plans whose total log-score falls below the cutoff.
pub fn apply_score_cutoff<F: Scalar>(
    ranked: Vec<(TextPlan, PlanScore<F>)>,
    cutoff: F,
) -> Vec<(TextPlan, PlanScore<F>)> {
    ranked.into_iter().filter(|(_, s)| s.total >= cutoff).collect()
}

// --- Persistence ------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ModelDoc {
    version: u32,
    lambda: f64,
    dir: BTreeMap<String, (u64, u64)>,
    global: BTreeMap<String, BTreeMap<String, u64>>,
    split: BTreeMap<String, BTreeMap<String, u64>>,
    trans: BTreeMap<String, BTreeMap<String, u64>>,
}

/// Serialize a model to its JSON format.
pub fn save_model<F: Scalar>(model: &ScoringModel<F>) -> Result<Vec<u8>, ScorerError> {
    let doc = ModelDoc {
        version: 1,
        lambda: model.lambda.to_f64().expect("finite lambda"),
        dir: model.dir_counts.clone(),
        global: model
            .global_dir
            .iter()
            .map(|(n, row)| {
                (
                    n.to_string(),
                    row.iter().map(|(nr, c)| (nr.to_string(), *c)).collect(),
                )
            })
            .collect(),
        split: model
            .split_counts
            .iter()
            .map(|(n, row)| {
                (
                    n.to_string(),
                    row.iter()
                        .map(|(sizes, c)| {
                            let key = sizes
                                .iter()
                                .map(|s| s.to_string())
                                .collect::<Vec<_>>()
                                .join(",");
                            (key, *c)
                        })
                        .collect(),
                )
            })
            .collect(),
        trans: model.transitions.clone(),
    };
    Ok(serde_json::to_vec_pretty(&doc)?)
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T, ScorerError> {
    s.parse()
        .map_err(|_| ScorerError::Schema(format!("bad {what} key {s:?}")))
}

/// Load a model from its JSON format.
pub fn load_model<F: Scalar>(bytes: &[u8]) -> Result<ScoringModel<F>, ScorerError> {
    let doc: ModelDoc = serde_json::from_slice(bytes)?;
    if doc.version != 1 {
        return Err(ScorerError::Schema(format!(
            "unsupported model version {}",
            doc.version
        )));
    }
    let mut global_dir: BTreeMap<usize, BTreeMap<usize, u64>> = BTreeMap::new();
    for (n, row) in doc.global {
        let n: usize = parse_num(&n, "graph size")?;
        let row = row
            .into_iter()
            .map(|(nr, c)| Ok((parse_num::<usize>(&nr, "reversed count")?, c)))
            .collect::<Result<_, ScorerError>>()?;
        global_dir.insert(n, row);
    }
    let mut split_counts: BTreeMap<usize, BTreeMap<Vec<usize>, u64>> = BTreeMap::new();
    for (n, row) in doc.split {
        let n: usize = parse_num(&n, "graph size")?;
        let row = row
            .into_iter()
            .map(|(sizes, c)| {
                let sizes = sizes
                    .split(',')
                    .map(|s| parse_num::<usize>(s, "split size"))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((sizes, c))
            })
            .collect::<Result<_, ScorerError>>()?;
        split_counts.insert(n, row);
    }
    let relation_vocab = doc.dir.keys().cloned().collect();
    Ok(ScoringModel {
        lambda: F::from_f64_lossy(doc.lambda),
        dir_counts: doc.dir,
        global_dir,
        split_counts,
        transitions: doc.trans,
        relation_vocab,
    })
}
