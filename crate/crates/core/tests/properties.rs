mod common;

use common::strategies::*;
use proptest::prelude::*;
use snipsym_core::graph::build_graph;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn graph_count_identities(files in arb_files(6, 8)) {
        check_counts(&files)?;
    }

    #[test]
    fn shared_patterns_symmetric_idempotent(files in arb_files(6, 8)) {
        check_shared_patterns(&files)?;
    }

    #[test]
    fn jsonld_round_trip(files in arb_files(5, 6)) {
        check_jsonld_round_trip(&build_graph(&files).unwrap())?;
    }

    #[test]
    fn parser_round_trip(r in arb_record(7)) {
        check_parser_round_trip(&r)?;
    }

    #[test]
    fn rule_backend_deterministic(s in arb_snippet()) {
        check_rule_determinism(&s)?;
    }
}
