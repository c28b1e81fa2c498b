//! The nine acceptance criteria, one line each.

mod common;

use common::*;

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("bank end-to-end", bank_end_to_end),
        ("quantifier oracle", || quantifier_suite(200, 7)),
        ("translation soundness", || translation_soundness(100, 11)),
        ("golden dumps", golden_dumps),
        ("traversal order", traversal_order),
        ("serializer round trip", || serializer_round_trip(1000, 13)),
        ("inheritance dispatch", inheritance_dispatch),
        ("check annotations", check_modes),
        ("overhead ratio", overhead),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let r = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match r {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {} {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} of 9 criteria pass", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
