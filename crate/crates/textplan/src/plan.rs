//! Text-plan data structures and exhaustive plan enumeration.
//!
//! A text plan is an ordered sequence of sentence plans; each sentence plan is
//! a labeled ordered tree over entities whose edges carry a relation and the
//! direction in which it is expressed. Enumeration is deterministic: two runs
//! over the same graph yield identical plan streams.

use std::collections::BTreeMap;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Entity, InputGraph, RelationType, Triple};

/// Largest input graph the exhaustive enumerator accepts by default
/// (the WebNLG maximum).
pub const DEFAULT_MAX_TRIPLES: usize = 7;

/// Hard cap on the number of generated text plans.
pub const DEFAULT_PLAN_CAP: usize = 1_000_000;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("graph has {n} triples, exceeding the configured maximum {max}")]
    TooLarge { n: usize, max: usize },
    #[error("triple subset is not a tree: {0:?}")]
    NotATree(SubsetShape),
    #[error("input graph is empty")]
    EmptyGraph,
    #[error("no valid plan exists for the input graph")]
    NoPlans,
}

/// Direction in which an edge expresses its relation: `Forward` keeps the
/// triple's subject as the head, `Reverse` swaps head and modifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "fwd")]
    Forward,
    #[serde(rename = "rev")]
    Reverse,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlanEdge {
    pub relation: RelationType,
    pub direction: Direction,
    pub child: PlanNode,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlanNode {
    pub entity: Entity,
    pub children: Vec<PlanEdge>,
}

/// A labeled ordered tree over entities; child order is realization order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SentencePlan {
    pub root: PlanNode,
}

/// An ordered sequence of sentence plans covering the source graph.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TextPlan {
    pub sentences: Vec<SentencePlan>,
}

impl PlanNode {
    fn collect_entities<'a>(&'a self, out: &mut Vec<&'a Entity>) {
        out.push(&self.entity);
        for edge in &self.children {
            edge.child.collect_entities(out);
        }
    }

    fn collect_edges<'a>(&'a self, out: &mut Vec<(&'a Entity, &'a PlanEdge)>) {
        for edge in &self.children {
            out.push((&self.entity, edge));
            edge.child.collect_edges(out);
        }
    }
}

impl SentencePlan {
    /// Pre-order entity sequence of the tree.
    pub fn entity_sequence(&self) -> Vec<&Entity> {
        let mut out = Vec::new();
        self.root.collect_entities(&mut out);
        out
    }

    /// Edges in pre-order, paired with their head entity.
    pub fn edges(&self) -> Vec<(&Entity, &PlanEdge)> {
        let mut out = Vec::new();
        self.root.collect_edges(&mut out);
        out
    }

    /// Number of edges (= facts expressed by this sentence).
    pub fn size(&self) -> usize {
        self.edges().len()
    }

    /// The triple expressed by an edge, as (subject, relation, object) ids.
    pub fn expressed_triples(&self) -> Vec<(String, String, String)> {
        self.edges()
            .iter()
            .map(|(head, edge)| match edge.direction {
                Direction::Forward => (
                    head.id.clone(),
                    edge.relation.id.clone(),
                    edge.child.entity.id.clone(),
                ),
                Direction::Reverse => (
                    edge.child.entity.id.clone(),
                    edge.relation.id.clone(),
                    head.id.clone(),
                ),
            })
            .collect()
    }
}

impl TextPlan {
    /// Concatenated pre-order entity sequence across sentences.
    pub fn entity_sequence(&self) -> Vec<&Entity> {
        self.sentences
            .iter()
            .flat_map(|s| s.entity_sequence())
            .collect()
    }

    /// Edge count per sentence, in order.
    pub fn sentence_sizes(&self) -> Vec<usize> {
        self.sentences.iter().map(|s| s.size()).collect()
    }

    /// Total number of reversed edges across sentences.
    pub fn reversed_edges(&self) -> usize {
        self.sentences
            .iter()
            .flat_map(|s| s.edges())
            .filter(|(_, e)| e.direction == Direction::Reverse)
            .count()
    }

    /// Total number of edges.
    pub fn size(&self) -> usize {
        self.sentence_sizes().iter().sum()
    }

    /// True iff every triple of `graph` is expressed exactly once across all
    /// sentences (the MATCHING invariant).
    pub fn matches(&self, graph: &InputGraph) -> bool {
        let mut counts: BTreeMap<(String, String, String), usize> = BTreeMap::new();
        for s in &self.sentences {
            for t in s.expressed_triples() {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        graph.len() == counts.values().sum::<usize>()
            && graph.triples().iter().all(|t| {
                counts
                    .get(&(t.subject.id.clone(), t.relation.id.clone(), t.object.id.clone()))
                    == Some(&1)
            })
    }
}

// --- JSON interchange -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    relation: String,
    direction: Direction,
    child: NodeDoc,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    entity: String,
    children: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
struct SentenceDoc {
    root: NodeDoc,
}

#[derive(Serialize, Deserialize)]
struct TextPlanDoc {
    sentences: Vec<SentenceDoc>,
}

fn node_to_doc(node: &PlanNode) -> NodeDoc {
    NodeDoc {
        entity: node.entity.id.clone(),
        children: node
            .children
            .iter()
            .map(|e| EdgeDoc {
                relation: e.relation.id.clone(),
                direction: e.direction,
                child: node_to_doc(&e.child),
            })
            .collect(),
    }
}

fn node_from_doc(doc: &NodeDoc) -> PlanNode {
    PlanNode {
        entity: Entity::from_raw(&doc.entity),
        children: doc
            .children
            .iter()
            .map(|e| PlanEdge {
                relation: RelationType::new(&e.relation),
                direction: e.direction,
                child: node_from_doc(&e.child),
            })
            .collect(),
    }
}

impl Serialize for TextPlan {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        TextPlanDoc {
            sentences: self
                .sentences
                .iter()
                .map(|s| SentenceDoc {
                    root: node_to_doc(&s.root),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TextPlan {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let doc = TextPlanDoc::deserialize(deserializer)?;
        Ok(TextPlan {
            sentences: doc
                .sentences
                .iter()
                .map(|s| SentencePlan {
                    root: node_from_doc(&s.root),
                })
                .collect(),
        })
    }
}

// --- Enumeration ------------------------------------------------------------

/// An ordered partition of triple indices into non-empty disjoint subsets.
pub type OrderedPartition = Vec<Vec<usize>>;

/// Enumerate every ordered sequence of disjoint non-empty subsets covering
/// `{0..n}`. Count equals the ordered Bell number of `n`.
///
/// Order: number of parts ascending, then lexicographic part membership, then
/// all permutations of the parts in lexicographic rank order.
pub fn enumerate_ordered_partitions(n: usize, max: usize) -> Result<Vec<OrderedPartition>, PlanError> {
    if n == 0 {
        return Err(PlanError::EmptyGraph);
    }
    if n > max {
        return Err(PlanError::TooLarge { n, max });
    }
    let mut out = Vec::new();
    for k in 1..=n {
        for blocks in unordered_partitions(n, k) {
            for perm in (0..k).permutations(k) {
                out.push(perm.iter().map(|&i| blocks[i].clone()).collect());
            }
        }
    }
    Ok(out)
}

/// Unordered partitions of `{0..n}` into exactly `k` blocks, via restricted
/// growth strings in lexicographic order. Blocks are listed in order of their
/// smallest element.
fn unordered_partitions(n: usize, k: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    fn rec(rgs: &mut Vec<usize>, i: usize, used: usize, n: usize, k: usize, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            if used == k {
                let mut blocks = vec![Vec::new(); k];
                for (elem, &b) in rgs.iter().enumerate() {
                    blocks[b].push(elem);
                }
                out.push(blocks);
            }
            return;
        }
        // remaining elements must be able to open enough new blocks
        if used + (n - i) < k {
            return;
        }
        for b in 0..=used.min(k - 1) {
            rgs[i] = b;
            let next_used = if b == used { used + 1 } else { used };
            rec(rgs, i + 1, next_used, n, k, out);
        }
    }
    rec(&mut rgs, 0, 0, n, k, &mut out);
    out
}

/// Classification of the undirected multigraph induced by a triple subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SubsetShape {
    Tree,
    Cyclic,
    Disconnected,
    MultiEdge,
}

/// Classify a non-empty triple subset: `Tree` iff connected, acyclic and
/// without parallel edges.
pub fn subset_tree_check(subset: &[&Triple]) -> SubsetShape {
    assert!(!subset.is_empty(), "subset must be non-empty");
    fn index<'a>(id: &'a str, ids: &mut Vec<&'a str>) -> usize {
        match ids.iter().position(|x| *x == id) {
            Some(i) => i,
            None => {
                ids.push(id);
                ids.len() - 1
            }
        }
    }
    let mut ids: Vec<&str> = Vec::new();
    let mut edges = Vec::new();
    for t in subset {
        let a = index(&t.subject.id, &mut ids);
        let b = index(&t.object.id, &mut ids);
        edges.push((a, b));
    }
    let mut pairs = std::collections::BTreeSet::new();
    for &(a, b) in &edges {
        if !pairs.insert((a.min(b), a.max(b))) {
            return SubsetShape::MultiEdge;
        }
    }
    // connectivity by BFS over the undirected graph
    let m = ids.len();
    let mut adj = vec![Vec::new(); m];
    for &(a, b) in &edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; m];
    let mut stack = vec![0usize];
    seen[0] = true;
    let mut visited = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                visited += 1;
                stack.push(w);
            }
        }
    }
    if visited != m {
        SubsetShape::Disconnected
    } else if m != edges.len() + 1 {
        SubsetShape::Cyclic
    } else {
        SubsetShape::Tree
    }
}

/// All rooted ordered trees of a tree-shaped triple subset: every root choice
/// and every permutation of each node's children, in deterministic order.
pub fn enumerate_sentence_plans(subset: &[&Triple]) -> Result<Vec<SentencePlan>, PlanError> {
    match subset_tree_check(subset) {
        SubsetShape::Tree => {}
        shape => return Err(PlanError::NotATree(shape)),
    }
    // entities in order of first occurrence in the subset
    let mut entities: Vec<&Entity> = Vec::new();
    for t in subset {
        for e in [&t.subject, &t.object] {
            if !entities.iter().any(|x| x.id == e.id) {
                entities.push(e);
            }
        }
    }
    let idx_of = |id: &str| entities.iter().position(|e| e.id == id).unwrap();
    // adjacency: entity -> (edge index, neighbor entity)
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); entities.len()];
    for (ei, t) in subset.iter().enumerate() {
        let a = idx_of(&t.subject.id);
        let b = idx_of(&t.object.id);
        adj[a].push((ei, b));
        adj[b].push((ei, a));
    }

    let mut plans = Vec::new();
    for root in 0..entities.len() {
        let variants = ordered_subtrees(root, usize::MAX, &adj, subset, &entities);
        plans.extend(variants.into_iter().map(|root| SentencePlan { root }));
    }
    Ok(plans)
}

/// All ordered versions of the subtree rooted at `node` (entered via edge
/// `via`, `usize::MAX` for the root).
fn ordered_subtrees(
    node: usize,
    via: usize,
    adj: &[Vec<(usize, usize)>],
    subset: &[&Triple],
    entities: &[&Entity],
) -> Vec<PlanNode> {
    let children: Vec<(usize, usize)> = adj[node]
        .iter()
        .copied()
        .filter(|&(e, _)| e != via)
        .collect();
    if children.is_empty() {
        return vec![PlanNode {
            entity: entities[node].clone(),
            children: Vec::new(),
        }];
    }
    // per-child subtree variants, then every permutation of the children
    let child_variants: Vec<Vec<PlanEdge>> = children
        .iter()
        .map(|&(edge_idx, child)| {
            let t = subset[edge_idx];
            let direction = if t.subject.id == entities[node].id {
                Direction::Forward
            } else {
                Direction::Reverse
            };
            ordered_subtrees(child, edge_idx, adj, subset, entities)
                .into_iter()
                .map(|sub| PlanEdge {
                    relation: t.relation.clone(),
                    direction,
                    child: sub,
                })
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    for perm in (0..children.len()).permutations(children.len()) {
        for combo in perm
            .iter()
            .map(|&ci| child_variants[ci].iter())
            .multi_cartesian_product()
        {
            out.push(PlanNode {
                entity: entities[node].clone(),
                children: combo.into_iter().cloned().collect(),
            });
        }
    }
    out
}

/// Exhaustively generate every text plan for `graph`: every valid ordered
/// partition crossed with every combination of per-subset sentence plans.
/// Partitions containing a cyclic, disconnected or parallel-edge subset are
/// skipped. Truncates at `limit` plans if given (and at [`DEFAULT_PLAN_CAP`]
/// regardless).
pub fn enumerate_text_plans(graph: &InputGraph, limit: Option<usize>) -> Result<Vec<TextPlan>, PlanError> {
    enumerate_text_plans_capped(graph, limit, DEFAULT_MAX_TRIPLES, DEFAULT_PLAN_CAP)
}

pub fn enumerate_text_plans_capped(
    graph: &InputGraph,
    limit: Option<usize>,
    max_triples: usize,
    cap: usize,
) -> Result<Vec<TextPlan>, PlanError> {
    if graph.is_empty() {
        return Err(PlanError::EmptyGraph);
    }
    let triples = graph.triples();
    let partitions = enumerate_ordered_partitions(triples.len(), max_triples)?;
    let cap = limit.unwrap_or(cap).min(cap);

    // sentence plans per subset, memoized on the sorted index set
    let mut memo: BTreeMap<Vec<usize>, Option<Vec<SentencePlan>>> = BTreeMap::new();
    let mut out = Vec::new();
    for partition in &partitions {
        let mut all_valid = true;
        for subset in partition {
            let entry = memo.entry(subset.clone()).or_insert_with(|| {
                let ts: Vec<&Triple> = subset.iter().map(|&i| &triples[i]).collect();
                enumerate_sentence_plans(&ts).ok()
            });
            if entry.is_none() {
                all_valid = false;
                break;
            }
        }
        if !all_valid {
            continue;
        }
        let per_subset: Vec<&Vec<SentencePlan>> = partition
            .iter()
            .map(|subset| memo.get(subset).unwrap().as_ref().unwrap())
            .collect();
        for combo in per_subset
            .iter()
            .map(|plans| plans.iter())
            .multi_cartesian_product()
        {
            out.push(TextPlan {
                sentences: combo.into_iter().cloned().collect(),
            });
            if out.len() >= cap {
                return Ok(out);
            }
        }
    }
    if out.is_empty() {
        return Err(PlanError::NoPlans);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_triple_line;

    fn graph(lines: &[&str]) -> InputGraph {
        InputGraph::new(lines.iter().map(|l| parse_triple_line(l).unwrap()).collect()).unwrap()
    }

    #[test]
    fn ordered_partition_counts() {
        assert_eq!(enumerate_ordered_partitions(1, 7).unwrap().len(), 1);
        assert_eq!(enumerate_ordered_partitions(2, 7).unwrap().len(), 3);
        assert_eq!(enumerate_ordered_partitions(3, 7).unwrap().len(), 13);
        assert_eq!(enumerate_ordered_partitions(4, 7).unwrap().len(), 75);
        assert!(matches!(
            enumerate_ordered_partitions(8, 7),
            Err(PlanError::TooLarge { .. })
        ));
    }

    #[test]
    fn ordered_partitions_are_distinct_and_cover() {
        let parts = enumerate_ordered_partitions(3, 7).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for p in &parts {
            assert!(seen.insert(p.clone()), "duplicate partition {p:?}");
            let mut all: Vec<usize> = p.iter().flatten().copied().collect();
            all.sort();
            assert_eq!(all, vec![0, 1, 2]);
        }
    }

    #[test]
    fn tree_check_classification() {
        let g = graph(&["A | r | B"]);
        let ts: Vec<&Triple> = g.triples().iter().collect();
        assert_eq!(subset_tree_check(&ts), SubsetShape::Tree);

        let g = graph(&["A | r1 | B", "B | r2 | A"]);
        let ts: Vec<&Triple> = g.triples().iter().collect();
        assert_eq!(subset_tree_check(&ts), SubsetShape::MultiEdge);

        let g = graph(&["A | r1 | B", "B | r2 | C", "C | r3 | A"]);
        let ts: Vec<&Triple> = g.triples().iter().collect();
        assert_eq!(subset_tree_check(&ts), SubsetShape::Cyclic);

        let g = graph(&["A | r1 | B", "C | r2 | D"]);
        let ts: Vec<&Triple> = g.triples().iter().collect();
        assert_eq!(subset_tree_check(&ts), SubsetShape::Disconnected);
    }

    #[test]
    fn sentence_plan_counts() {
        // single triple: two root choices
        let g = graph(&["A | r | B"]);
        let ts: Vec<&Triple> = g.triples().iter().collect();
        let plans = enumerate_sentence_plans(&ts).unwrap();
        assert_eq!(plans.len(), 2);
        assert_eq!(plans[0].root.entity.id, "A");
        assert_eq!(plans[0].root.children[0].direction, Direction::Forward);
        assert_eq!(plans[1].root.entity.id, "B");
        assert_eq!(plans[1].root.children[0].direction, Direction::Reverse);

        // 2-triple star: center root 2! + two leaf roots
        let g = graph(&["John | birthPlace | London", "John | employer | IBM"]);
        let ts: Vec<&Triple> = g.triples().iter().collect();
        assert_eq!(enumerate_sentence_plans(&ts).unwrap().len(), 4);

        // 3-triple star: 3! + 3 * 2!
        let g = graph(&["C | r1 | A", "C | r2 | B", "C | r3 | D"]);
        let ts: Vec<&Triple> = g.triples().iter().collect();
        assert_eq!(enumerate_sentence_plans(&ts).unwrap().len(), 12);
    }

    #[test]
    fn sentence_plans_reject_non_trees() {
        let g = graph(&["A | r1 | B", "C | r2 | D"]);
        let ts: Vec<&Triple> = g.triples().iter().collect();
        assert!(matches!(
            enumerate_sentence_plans(&ts),
            Err(PlanError::NotATree(SubsetShape::Disconnected))
        ));
    }

    #[test]
    fn john_graph_yields_twelve_plans() {
        let g = graph(&["John | birthPlace | London", "John | employer | IBM"]);
        let plans = enumerate_text_plans(&g, None).unwrap();
        assert_eq!(plans.len(), 12);
        for p in &plans {
            assert!(p.matches(&g));
        }
    }

    #[test]
    fn three_star_yields_108_plans() {
        let g = graph(&["C | r1 | A", "C | r2 | B", "C | r3 | D"]);
        let plans = enumerate_text_plans(&g, None).unwrap();
        assert_eq!(plans.len(), 108);
    }

    #[test]
    fn disconnected_pair_yields_8_plans() {
        let g = graph(&["A | r1 | B", "C | r2 | D"]);
        let plans = enumerate_text_plans(&g, None).unwrap();
        assert_eq!(plans.len(), 8);
        // the combined subset is invalid, so every plan has two sentences
        assert!(plans.iter().all(|p| p.sentences.len() == 2));
    }

    #[test]
    fn enumeration_is_deterministic() {
        let g = graph(&["C | r1 | A", "C | r2 | B", "A | r3 | D"]);
        let a = enumerate_text_plans(&g, None).unwrap();
        let b = enumerate_text_plans(&g, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn limit_truncates() {
        let g = graph(&["C | r1 | A", "C | r2 | B", "C | r3 | D"]);
        let plans = enumerate_text_plans(&g, Some(5)).unwrap();
        assert_eq!(plans.len(), 5);
    }

    #[test]
    fn entity_sequence_is_preorder() {
        let g = graph(&["John | birthPlace | London", "John | employer | IBM"]);
        let plans = enumerate_text_plans(&g, None).unwrap();
        for p in &plans {
            let seq = p.entity_sequence();
            assert_eq!(seq.len(), p.size() + p.sentences.len());
        }
        // single node
        let single = SentencePlan {
            root: PlanNode {
                entity: Entity::from_raw("John"),
                children: vec![],
            },
        };
        assert_eq!(
            single.entity_sequence().iter().map(|e| &e.id).collect::<Vec<_>>(),
            ["John"]
        );
    }

    #[test]
    fn plan_json_round_trip() {
        let g = graph(&["John | birthPlace | London", "John | employer | IBM"]);
        for p in enumerate_text_plans(&g, None).unwrap() {
            let json = serde_json::to_string(&p).unwrap();
            let back: TextPlan = serde_json::from_str(&json).unwrap();
            assert_eq!(back, p);
        }
    }
}
