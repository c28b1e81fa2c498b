//! Property tests: folds against the brute-force oracle, wire round trips.

mod common;

use common::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;
use slamkit::ast::{QuantSymbol, Value};
use slamkit::engine;
use slamkit::wire;

fn quant() -> impl Strategy<Value = QuantSymbol> {
    (0..13usize).prop_map(|i| QuantSymbol::ALL[i])
}

fn body() -> impl Strategy<Value = Body> {
    prop_oneof![(-6i64..=6).prop_map(Body::Above), Just(Body::Scale), Just(Body::Tenth)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn seq_folds_match_oracle(sym in quant(), xs in prop::collection::vec(-5i64..=5, 0..=12),
                              filter in prop::option::of(-6i64..=6), body in body()) {
        use QuantSymbol::*;
        // Logical quantifiers need a boolean body, the others a number.
        let body = match (sym, body) {
            (Exists | Forall | Count | Select | Filter, Body::Above(k)) => Body::Above(k),
            (Exists | Forall | Count | Select | Filter, _) => Body::Above(0),
            (_, Body::Above(_)) => Body::Scale,
            (_, b) => b,
        };
        let l = load_text(QUANT_SPEC);
        let coll = Value::Seq(xs.iter().map(|x| Value::Int(*x)).collect());
        let fc = filter.map(|k| Body::Above(k).closure());
        let got = engine::eval_quantifier(&l.prog, sym, &coll, fc.as_ref(), &body.closure(), limits());
        match (got, brute_fold(sym, &xs, filter, body)) {
            (Ok(g), Ok(w)) => prop_assert!(close(&g, &w), "{g} vs {w}"),
            (Err(e), Err(code)) => prop_assert_eq!(e.code, code),
            (g, w) => prop_assert!(false, "{g:?} vs {w:?}"),
        }
    }

    #[test]
    fn wire_round_trip(seed in any::<u64>()) {
        let v = random_wire_value(&mut StdRng::seed_from_u64(seed), 6);
        let text = wire::to_string(&v);
        prop_assert_eq!(wire::parse_value(&text).unwrap(), v);
    }

    #[test]
    fn corrupted_documents_are_rejected(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let v = random_wire_value(&mut rng, 4);
        let doc = wire::write_doc(&"0".repeat(64), &[v]);
        let bad = corrupt(&doc, &mut rng);
        prop_assert_eq!(wire::read_doc(&bad).unwrap_err().code, "MALFORMED_WIRE");
    }

    #[test]
    fn tree_enumeration_is_preorder(xs in prop::collection::vec(-50i64..=50, 0..=15), seed in any::<u64>()) {
        let l = load(&["tree.slam"]);
        let t = random_tree(&mut StdRng::seed_from_u64(seed), &xs);
        let mut want = Vec::new();
        tree_walk(&t, false, &mut want);
        prop_assert_eq!(enumerate_in(&l, &t).unwrap(), want);
    }
}
