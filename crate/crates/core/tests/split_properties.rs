use std::collections::BTreeSet;

use kbqa_answerability::dataset::{Scenario, Status};
use kbqa_answerability::degrader::{run_degrade, DegradeConfig};
use kbqa_answerability::splitter::{
    build_splits, classify_scenario, train_element_sets, SplitConfig,
};
use kbqa_answerability::synth::{random_corpus, random_kb, KbParams};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn splits_partition_and_never_leak(kb_seed in any::<u64>(), seed in any::<u64>(), p_u in 0.0f64..0.6) {
        let params = KbParams { types: 6, relations: 10, max_entities: 30, facts: 90 };
        let kb = random_kb(kb_seed, &params);
        let questions = random_corpus(&kb, 60, 3, kb_seed.wrapping_add(1));
        prop_assume!(questions.len() >= 20);
        let state = run_degrade(questions, kb, &DegradeConfig::equal_split(p_u, seed)).unwrap();
        let config = SplitConfig { seed, ..SplitConfig::default() };
        let splits = build_splits(state.questions(), state.kb(), state.ideal_kb(), &config).unwrap();

        // partition
        let mut all: Vec<String> = splits.train.iter().chain(&splits.dev).chain(&splits.test).map(|q| q.qid.clone()).collect();
        all.extend(splits.removed_for_leakage.iter().cloned());
        let unique: BTreeSet<&String> = all.iter().collect();
        prop_assert_eq!(unique.len(), all.len());
        let input: BTreeSet<&String> = state.questions().iter().map(|q| &q.qid).collect();
        prop_assert_eq!(unique, input);

        // leakage, by exhaustive scan of train forms
        for g in &splits.zero_shot_elements {
            prop_assert!(g.is_schema());
            prop_assert!(!state.kb().contains(g));
            for q in &splits.train {
                prop_assert!(!q.ideal_lf.elements().contains(g), "{} cites {}", &q.qid, g);
            }
        }

        // scenario soundness
        let (missing, seen) = train_element_sets(&splits.train, state.kb());
        for q in splits.dev.iter().chain(&splits.test) {
            match q.status {
                Status::Answerable => prop_assert_eq!(q.scenario, Scenario::NotApplicable),
                Status::Unanswerable => {
                    prop_assert_eq!(classify_scenario(q, &missing, &seen, state.kb()).unwrap(), q.scenario);
                }
            }
        }
        for q in &splits.train {
            if q.status == Status::Unanswerable {
                prop_assert_eq!(q.scenario, Scenario::Iid);
            }
        }

        let again = build_splits(state.questions(), state.kb(), state.ideal_kb(), &config).unwrap();
        prop_assert_eq!(again, splits);
    }
}
