//! Property-based invariants over randomized inputs.

mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use textplan::eval::check_consistency;
use textplan::linearizer::{linearize_text_plan, parse_linearized};
use textplan::matcher::MatchConfig;
use textplan::plan::enumerate_text_plans;
use textplan::realizer::{realize_sentence_plan, TemplateBank};

fn small_graph() -> impl Strategy<Value = textplan::corpus::InputGraph> {
    (any::<u64>(), 1usize..=4).prop_map(|(seed, n)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        common::random_graph(&mut rng, n)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every enumerated plan expresses every input triple exactly once.
    #[test]
    fn plans_cover_every_triple_exactly_once(g in small_graph()) {
        let expected: BTreeSet<(String, String, String)> = g
            .triples()
            .iter()
            .map(|t| (t.subject.id.clone(), t.relation.id.clone(), t.object.id.clone()))
            .collect();
        for plan in enumerate_text_plans(&g, None).unwrap() {
            prop_assert!(plan.matches(&g));
            let expressed: Vec<_> = plan
                .sentences
                .iter()
                .flat_map(|s| s.expressed_triples())
                .collect();
            prop_assert_eq!(expressed.len(), expected.len());
            let as_set: BTreeSet<_> = expressed.into_iter().collect();
            prop_assert_eq!(&as_set, &expected);
        }
    }

    /// Linearization parses back to the identical plan.
    #[test]
    fn linearize_round_trips(g in small_graph()) {
        for plan in enumerate_text_plans(&g, None).unwrap() {
            let text = linearize_text_plan(&plan).unwrap();
            prop_assert_eq!(parse_linearized(&text, &g).unwrap(), plan);
        }
    }

    /// Enumeration is duplicate-free.
    #[test]
    fn plans_are_distinct(g in small_graph()) {
        let plans = enumerate_text_plans(&g, None).unwrap();
        let set: BTreeSet<_> = plans.iter().cloned().collect();
        prop_assert_eq!(set.len(), plans.len());
    }

    /// Template realization always yields entity-complete, ordered text.
    #[test]
    fn realization_is_always_consistent(g in small_graph()) {
        let bank = TemplateBank::default();
        let cfg = MatchConfig::default();
        for plan in enumerate_text_plans(&g, None).unwrap().into_iter().take(20) {
            for sp in &plan.sentences {
                let text = realize_sentence_plan(sp, &bank);
                let r = check_consistency(sp, &text, &cfg);
                prop_assert!(r.all_entities, "{}", text);
                prop_assert_eq!(r.order_ok, Some(true), "{}", text);
            }
        }
    }
}
