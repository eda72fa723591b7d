//! Shared helpers for integration tests: random graph generation and an
//! independent brute-force plan enumerator used as an oracle.
//!
//! The oracle enumerates (triple permutation, sentence break mask, edge
//! orientation mask) combinations and keeps those whose per-sentence edge
//! sequences are valid pre-order traversals of ordered trees. It shares no
//! code with the library's recursive enumerator.

// each test target compiles this module separately and uses a subset of it
#![allow(dead_code)]

use std::collections::BTreeSet;

use rand::Rng;

use textplan::corpus::{Entity, InputGraph, RelationType, Triple};
use textplan::plan::{Direction, PlanEdge, PlanNode, SentencePlan, TextPlan};

const ENTITY_POOL: [&str; 6] = ["Alpha", "Bravo", "Carson", "Delphi", "Echo_Lake", "Foxtrot"];
const RELATION_POOL: [&str; 5] = ["leader", "locatedIn", "owner", "successor", "affiliation"];

/// A random graph with `n` distinct triples over small entity/relation pools.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize) -> InputGraph {
    loop {
        let mut triples = Vec::new();
        let mut seen = BTreeSet::new();
        let mut guard = 0;
        while triples.len() < n {
            guard += 1;
            if guard > 1000 {
                break;
            }
            let s = ENTITY_POOL[rng.gen_range(0..ENTITY_POOL.len())];
            let o = ENTITY_POOL[rng.gen_range(0..ENTITY_POOL.len())];
            let r = RELATION_POOL[rng.gen_range(0..RELATION_POOL.len())];
            if s == o || !seen.insert((s, r, o)) {
                continue;
            }
            triples.push(
                Triple::new(Entity::from_raw(s), RelationType::new(r), Entity::from_raw(o))
                    .unwrap(),
            );
        }
        if triples.len() == n {
            if let Ok(g) = InputGraph::new(triples) {
                return g;
            }
        }
    }
}

/// One oriented edge of a candidate pre-order sequence: (parent entity,
/// relation, direction, child entity).
type Oriented = (Entity, RelationType, Direction, Entity);

/// Rebuild the ordered tree whose pre-order edge sequence is `edges`, or None
/// if the sequence is not a valid pre-order (parent not on the path from the
/// root to the previously inserted node, or a repeated entity).
fn tree_from_preorder(edges: &[Oriented]) -> Option<SentencePlan> {
    let mut root = PlanNode {
        entity: edges[0].0.clone(),
        children: Vec::new(),
    };
    // path of child indices from the root to the most recent node, plus the
    // entity ids along it
    let mut path: Vec<usize> = Vec::new();
    let mut ids: Vec<String> = vec![root.entity.id.clone()];
    let mut used: BTreeSet<String> = ids.iter().cloned().collect();
    for (parent, relation, direction, child) in edges {
        while ids.last().map(String::as_str) != Some(parent.id.as_str()) {
            ids.pop();
            path.pop();
            if ids.is_empty() {
                return None;
            }
        }
        if !used.insert(child.id.clone()) {
            return None;
        }
        let mut node = &mut root;
        for &i in &path {
            node = &mut node.children[i].child;
        }
        node.children.push(PlanEdge {
            relation: relation.clone(),
            direction: *direction,
            child: PlanNode {
                entity: child.clone(),
                children: Vec::new(),
            },
        });
        path.push(node.children.len() - 1);
        ids.push(child.id.clone());
    }
    Some(SentencePlan { root })
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for rest in permutations(n - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, n - 1);
            out.push(p);
        }
    }
    out
}

/// Every text plan of `graph`, by exhaustive generate-and-filter.
pub fn oracle_enumerate(graph: &InputGraph) -> BTreeSet<TextPlan> {
    let triples = graph.triples();
    let n = triples.len();
    assert!(n >= 1 && n <= 5, "oracle meant for small graphs");
    let mut plans = BTreeSet::new();
    for perm in permutations(n) {
        for orient_mask in 0u32..(1 << n) {
            let oriented: Vec<Oriented> = perm
                .iter()
                .enumerate()
                .map(|(slot, &i)| {
                    let t = &triples[i];
                    if orient_mask >> slot & 1 == 0 {
                        (
                            t.subject.clone(),
                            t.relation.clone(),
                            Direction::Forward,
                            t.object.clone(),
                        )
                    } else {
                        (
                            t.object.clone(),
                            t.relation.clone(),
                            Direction::Reverse,
                            t.subject.clone(),
                        )
                    }
                })
                .collect();
            for break_mask in 0u32..(1 << (n - 1)) {
                let mut sentences = Vec::new();
                let mut start = 0;
                let mut ok = true;
                for end in 1..=n {
                    if end == n || break_mask >> (end - 1) & 1 == 1 {
                        match tree_from_preorder(&oriented[start..end]) {
                            Some(sp) => sentences.push(sp),
                            None => {
                                ok = false;
                                break;
                            }
                        }
                        start = end;
                    }
                }
                if ok {
                    plans.insert(TextPlan { sentences });
                }
            }
        }
    }
    plans
}
