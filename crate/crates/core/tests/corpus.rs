//! The sample specifications load cleanly and translate in read mode.

use std::path::PathBuf;

use slamkit::ir::translate;
use slamkit::semantics::load_spec;

fn spec(names: &[&str]) -> String {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../specs");
    names.iter().map(|n| std::fs::read_to_string(root.join(n)).unwrap()).collect::<Vec<_>>().join("\n")
}

#[test]
fn corpus_checks_and_translates() {
    for files in [&["point.slam"][..], &["point.slam", "segment.slam"], &["stack.slam"], &["tree.slam"], &["bank.slam"]] {
        let (h, warns) = load_spec(&spec(files)).unwrap_or_else(|e| panic!("{files:?}: {e:#?}"));
        assert!(warns.is_empty(), "{files:?}: {warns:#?}");
        let p = translate(&h);
        assert!(p.check_read_mode().is_empty(), "{files:?}: {:#?}", p.check_read_mode());
        if std::env::var("SHOW_DUMP").is_ok() {
            println!("== {files:?}\n{}", p.dump());
        }
    }
}
