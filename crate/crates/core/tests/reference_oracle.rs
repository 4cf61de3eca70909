mod common;

use bidsim::netgen::{generate_case_study_org, generate_network, NetGenConfig};
use bidsim::{run, Scenario};
use common::reference::{engine_outcome, reference_run};
use common::{random_scenario, MEDIUM, SMALL};
use proptest::prelude::*;

#[test]
fn agrees_on_fifty_small_scenarios() {
    for seed in 0..50 {
        let s = random_scenario(seed, SMALL);
        let engine = engine_outcome(&run(&s).unwrap());
        assert_eq!(engine, reference_run(&s), "seed {seed}");
    }
}

#[test]
fn agrees_on_case_study_org_with_twelve_tasks() {
    for seed in 0..10 {
        let net = generate_network(&NetGenConfig::new(12, 0.5, seed)).unwrap();
        let mut s = Scenario::with_defaults(generate_case_study_org(0), vec![net], seed);
        s.goal_congruence = 0.6;
        s.micro_management = 0.5;
        let engine = engine_outcome(&run(&s).unwrap());
        assert_eq!(engine, reference_run(&s), "seed {seed}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn agrees_on_random_medium_scenarios(seed in any::<u64>()) {
        let s = random_scenario(seed, MEDIUM);
        let engine = engine_outcome(&run(&s).unwrap());
        prop_assert_eq!(engine, reference_run(&s));
    }
}
