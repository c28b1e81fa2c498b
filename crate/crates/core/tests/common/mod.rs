//! Shared fixtures and the nine end-to-end criteria. Each criterion returns
//! a one-line summary on success and the first discrepancy on failure.
#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use slamkit::ast::{QuantSymbol, Value};
use slamkit::check::{self, Kind, Policy, Verdict};
use slamkit::cli::{self, Loaded};
use slamkit::codegen;
use slamkit::engine::{self, EngineLimits, Query, Solver};
use slamkit::eval::{eval_expr, Evaluator};
use slamkit::ir::{translate, Closure, Term};
use slamkit::ops;
use slamkit::semantics::{load_spec, project_to_ancestor};
use slamkit::skeleton::{self, CheckHooks, HookMode};
use slamkit::wire;

pub type Outcome = Result<String, String>;

pub fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn spec_path(name: &str) -> PathBuf {
    root().join("specs").join(name)
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load(names: &[&str]) -> Loaded {
    let paths: Vec<PathBuf> = names.iter().map(|n| spec_path(n)).collect();
    cli::load(&paths).unwrap_or_else(|ds| panic!("{names:?}: {ds:#?}"))
}

pub fn load_text(src: &str) -> Loaded {
    let (h, warnings) = load_spec(src).unwrap_or_else(|ds| panic!("{ds:#?}"));
    let prog = translate(&h);
    Loaded { h, prog, warnings }
}

pub fn limits() -> EngineLimits {
    EngineLimits::default()
}

/// Runs the command line in-process: (status, stdout, stderr).
pub fn slam(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let argv = std::iter::once("slam").chain(args.iter().copied());
    let code = cli::main_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

pub fn close(a: &Value, b: &Value) -> bool {
    match (a, b) {
        (Value::Real(x), Value::Real(y)) => {
            x == y || (x - y).abs() <= 1e-9 * x.abs().max(y.abs()) || (x - y).abs() < 1e-12
        }
        (Value::Seq(xs), Value::Seq(ys)) => xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| close(x, y)),
        (Value::Con(s, xs), Value::Con(t, ys)) => s == t && xs.len() == ys.len() && xs.iter().zip(ys).all(|(x, y)| close(x, y)),
        (Value::Record(xs), Value::Record(ys)) => {
            xs.len() == ys.len() && xs.iter().zip(ys).all(|((l, x), (m, y))| l == m && close(x, y))
        }
        _ => a == b,
    }
}

// ---------------------------------------------------------------------------
// 1. Bank

pub const TRANSACTIONS: [(&str, &str, i64); 3] = [("A", "B", 10), ("A", "C", 5), ("B", "C", 2)];
pub const BANKS: [&str; 3] = ["A", "B", "C"];

pub fn bank_call() -> String {
    let ts: Vec<String> = TRANSACTIONS.iter().map(|(s, d, a)| format!("tran(\"{s}\", \"{d}\", {a})")).collect();
    let bs: Vec<String> = BANKS.iter().map(|b| format!("\"{b}\"")).collect();
    format!("FinalAmount(ctran([{}]), [{}])", ts.join(", "), bs.join(", "))
}

/// Balance per bank by hand: money sent minus money received.
pub fn bank_oracle() -> Vec<i64> {
    BANKS
        .iter()
        .map(|b| {
            let out: i64 = TRANSACTIONS.iter().filter(|t| t.0 == *b).map(|t| t.2).sum();
            let inn: i64 = TRANSACTIONS.iter().filter(|t| t.1 == *b).map(|t| t.2).sum();
            out - inn
        })
        .collect()
}

pub fn bank_amounts(v: &Value) -> Result<Vec<f64>, String> {
    let Value::Seq(items) = v else { return Err(format!("not a sequence: {v}")) };
    items
        .iter()
        .map(|b| match b {
            Value::Con(_, args) => match args.as_slice() {
                [Value::Record(fs)] => match fs.iter().find(|(l, _)| l == "amount") {
                    Some((_, Value::Real(a))) => Ok(*a),
                    Some((_, Value::Int(a))) => Ok(*a as f64),
                    _ => Err(format!("no amount in {b}")),
                },
                _ => Err(format!("unexpected bank {b}")),
            },
            _ => Err(format!("unexpected bank {b}")),
        })
        .collect()
}

pub fn bank_end_to_end() -> Outcome {
    let start = Instant::now();
    let l = load(&["bank.slam"]);
    let call = bank_call();
    let result = cli::eval_text(&l, &call, false, limits(), None)?;
    let elapsed = start.elapsed();
    let got = bank_amounts(&result)?;
    let want = bank_oracle();
    ensure(want == [15, -8, -7], || format!("oracle drifted: {want:?}"))?;
    ensure(got.len() == want.len() && got.iter().zip(&want).all(|(g, w)| *g == *w as f64), || {
        format!("amounts {got:?}, expected {want:?}")
    })?;
    ensure(elapsed < Duration::from_secs(1), || format!("took {elapsed:?}"))?;

    // The command prints the same sequence.
    let (code, out, err) = slam(&["eval", spec_path("bank.slam").to_str().unwrap(), "-e", &call]);
    ensure(code == 0 && out.contains("amount: -8.0"), || format!("cmd eval: {code} {out} {err}"))?;

    let (_, args) = skeleton::entry_call(&l.h, &call, limits()).map_err(|e| e.to_string())?;
    let mut payload = args.clone();
    payload.push(result);
    let req = check::request(&l.prog, "CTransaction", "FinalAmount", Kind::Post, &payload).map_err(|e| e.to_string())?;
    let rec = check::run_check(&l.prog, &req, limits());
    ensure(rec.verdict == Verdict::Pass, || format!("post check on the correct result: {rec:?}"))?;

    let rec = sign_bug_record(&l)?;
    let locus = rec.locus.clone().ok_or("sign-bug failure has no locus")?;
    ensure(locus.path.ends_with("/and[2]") && locus.path.contains("forall(i=1)"), || {
        format!("locus path {}", locus.path)
    })?;
    ensure(locus.formula.starts_with("Result[i].amount ="), || format!("locus formula {}", locus.formula))?;
    Ok(format!("amounts {got:?} in {:.1} ms; sign bug caught at {}", elapsed.as_secs_f64() * 1e3, locus.path))
}

/// Runs the hand-broken skeleton and returns the failing FinalAmount record.
pub fn sign_bug_record(l: &Loaded) -> Result<check::CheckRecord, String> {
    let sk = skeleton::load_program(&fixture("bank_sign_bug")).map_err(|ds| format!("{ds:?}"))?;
    let entry = skeleton::entry_call(&l.h, &bank_call(), limits()).map_err(|e| e.to_string())?;
    let mut hooks = CheckHooks::new(&l.prog, limits(), Policy::Report, HookMode::InProcess).map_err(|e| e.to_string())?;
    let out = skeleton::run(&sk, &l.h, &mut hooks, entry, limits());
    out.value.map_err(|e| format!("skeleton run: {e}"))?;
    hooks
        .records
        .iter()
        .find(|r| r.function == "CTransaction:FinalAmount" && r.kind == Kind::Post && r.verdict == Verdict::Fail)
        .cloned()
        .ok_or_else(|| format!("no failing post check among {:?}", hooks.records))
}

// ---------------------------------------------------------------------------
// 2. Quantifiers

pub const QUANT_SPEC: &str = "class Q {
  case Q()
  friend Above(Int, Int) : Bool
  friend Scale(Int) : Int
  friend Tenth(Int) : Real
  rule { call: Above(k, x) sol: x > k }
  rule { call: Scale(x) sol: 2 * x - 1 }
  rule { call: Tenth(x) sol: x / 10.0 + 0.05 }
}
";

#[derive(Clone, Copy, Debug)]
pub enum Body {
    Above(i64),
    Scale,
    Tenth,
}

impl Body {
    fn apply(self, x: i64) -> Value {
        match self {
            Body::Above(k) => Value::Bool(x > k),
            Body::Scale => Value::Int(2 * x - 1),
            Body::Tenth => Value::Real(x as f64 / 10.0 + 0.05),
        }
    }

    pub fn closure(self) -> Closure {
        match self {
            Body::Above(k) => Closure { pred: "sol-Above".into(), captures: vec![Term::Val(Value::Int(k))] },
            Body::Scale => Closure { pred: "sol-Scale".into(), captures: vec![] },
            Body::Tenth => Closure { pred: "sol-Tenth".into(), captures: vec![] },
        }
    }
}

fn num(v: &Value) -> f64 {
    match v {
        Value::Int(i) => *i as f64,
        Value::Real(r) => *r,
        _ => f64::NAN,
    }
}

/// Direct fold over an enumerated list.
pub fn brute_fold(sym: QuantSymbol, elems: &[i64], filter: Option<i64>, body: Body) -> Result<Value, &'static str> {
    use QuantSymbol::*;
    let sel: Vec<i64> = elems.iter().copied().filter(|x| filter.is_none_or(|k| *x > k)).collect();
    let bodies: Vec<Value> = sel.iter().map(|x| body.apply(*x)).collect();
    let truth = |v: &Value| matches!(v, Value::Bool(true));
    let extremum = |want_max: bool| -> Option<usize> {
        let mut best: Option<usize> = None;
        for (i, b) in bodies.iter().enumerate() {
            let better = match best {
                None => true,
                Some(j) if want_max => num(b) > num(&bodies[j]),
                Some(j) => num(b) < num(&bodies[j]),
            };
            if better {
                best = Some(i);
            }
        }
        best
    };
    Ok(match sym {
        Exists => Value::Bool(bodies.iter().any(truth)),
        Forall => Value::Bool(bodies.iter().all(truth)),
        Sum | Product => {
            let seed = if matches!(sym, Sum) { 0 } else { 1 };
            if bodies.is_empty() {
                Value::Int(seed)
            } else if matches!(body, Body::Tenth) {
                let xs = bodies.iter().map(num);
                Value::Real(if matches!(sym, Sum) { xs.sum() } else { xs.product() })
            } else {
                // Right fold with overflow detection, as `x1 * (x2 * (... * 1))`.
                let mut acc = seed;
                for b in bodies.iter().rev() {
                    let x = num(b) as i64;
                    acc = if matches!(sym, Sum) { acc.checked_add(x) } else { acc.checked_mul(x) }.ok_or("INT_OVERFLOW")?;
                }
                Value::Int(acc)
            }
        }
        Count => Value::Int(bodies.iter().filter(|b| truth(b)).count() as i64),
        Select => Value::Int(*sel.iter().zip(&bodies).find(|(_, b)| truth(b)).ok_or("EMPTY_SELECTION")?.0),
        Max | Min => bodies[extremum(matches!(sym, Max)).ok_or("EMPTY_EXTREMUM")?].clone(),
        Maximizer | Minimizer => Value::Int(sel[extremum(matches!(sym, Maximizer)).ok_or("EMPTY_EXTREMUM")?]),
        Filter => Value::Seq(sel.iter().zip(&bodies).filter(|(_, b)| !truth(b)).map(|(x, _)| Value::Int(*x)).collect()),
        Map | SeqCons => Value::Seq(bodies),
    })
}

pub fn tree_empty() -> Value {
    Value::con("TreeEmpty", vec![])
}

pub fn tree_node(l: Value, v: i64, r: Value) -> Value {
    Value::con("TreeNode", vec![l, Value::Int(v), r])
}

/// Random tree over `xs`, root drawn from the middle.
pub fn random_tree(rng: &mut StdRng, xs: &[i64]) -> Value {
    if xs.is_empty() {
        return tree_empty();
    }
    let i = rng.gen_range(0..xs.len());
    let (l, r) = (random_tree(rng, &xs[..i]), random_tree(rng, &xs[i + 1..]));
    tree_node(l, xs[i], r)
}

/// Reference enumerator for `traverse Node(ls, root, rs) => [root, ls, rs]`
/// (`inorder` puts the root between the subtrees).
pub fn tree_walk(t: &Value, inorder: bool, out: &mut Vec<i64>) {
    if let Value::Con(tag, args) = t {
        if tag == "TreeNode" {
            let Value::Int(v) = args[1] else { panic!("non-int node {t}") };
            if !inorder {
                out.push(v);
            }
            tree_walk(&args[0], inorder, out);
            if inorder {
                out.push(v);
            }
            tree_walk(&args[2], inorder, out);
        }
    }
}

pub fn body_for(sym: QuantSymbol, case: usize, rng: &mut StdRng) -> Body {
    use QuantSymbol::*;
    match sym {
        Exists | Forall | Count | Select | Filter => Body::Above(rng.gen_range(-6..=6)),
        _ if case.is_multiple_of(2) => Body::Scale,
        _ => Body::Tenth,
    }
}

pub fn quantifier_suite(cases: usize, seed: u64) -> Outcome {
    let start = Instant::now();
    let spec = format!("{QUANT_SPEC}\n{}", std::fs::read_to_string(spec_path("tree.slam")).unwrap());
    let l = load_text(&spec);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut checked = 0;
    for sym in QuantSymbol::ALL {
        for case in 0..cases {
            let n = rng.gen_range(0..=20usize);
            let (coll, elems) = match case % 3 {
                0 => {
                    let xs: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5)).collect();
                    (Value::Seq(xs.iter().map(|x| Value::Int(*x)).collect()), xs)
                }
                1 => {
                    let lo = rng.gen_range(-10..=10);
                    let hi = lo + n as i64 - 1;
                    (ops::range(lo, hi), (lo..=hi).collect())
                }
                _ => {
                    let xs: Vec<i64> = (0..n).map(|_| rng.gen_range(-5..=5)).collect();
                    let t = random_tree(&mut rng, &xs);
                    let mut pre = Vec::new();
                    tree_walk(&t, false, &mut pre);
                    (t, pre)
                }
            };
            let filter = rng.gen_bool(0.6).then(|| rng.gen_range(-6..=6));
            let body = body_for(sym, case, &mut rng);
            let want = brute_fold(sym, &elems, filter, body);
            let fc = filter.map(|k| Body::Above(k).closure());
            let got = engine::eval_quantifier(&l.prog, sym, &coll, fc.as_ref(), &body.closure(), limits());
            let ok = match (&got, &want) {
                (Ok(g), Ok(w)) => close(g, w),
                (Err(e), Err(code)) => e.code == *code,
                _ => false,
            };
            ensure(ok, || {
                format!("{} over {coll} filter {filter:?} body {body:?}: got {got:?}, expected {want:?}", sym.keyword())
            })?;
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("{checked} folds agree across 13 quantifiers in {:.2} s", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------------------
// 3. Translation soundness

pub const CORPUS: [&[&str]; 4] = [&["point.slam", "segment.slam"], &["stack.slam"], &["tree.slam"], &["bank.slam"]];

/// Random value of a declared type, biased towards small shapes.
pub fn random_value(l: &Loaded, ty: &slamkit::ast::TypeExpr, depth: usize, rng: &mut StdRng) -> Value {
    use slamkit::ast::TypeExpr;
    match ty {
        TypeExpr::Record(fs) => Value::Record(fs.iter().map(|(n, t)| (n.clone(), random_value(l, t, depth, rng))).collect()),
        TypeExpr::Named(n, args) => match n.as_str() {
            "Int" => Value::Int(rng.gen_range(-20..=20)),
            "Nat" => Value::Int(rng.gen_range(0..=20)),
            "Real" => Value::Real(rng.gen_range(-400..=400) as f64 / 4.0),
            "Bool" => Value::Bool(rng.gen()),
            "String" => Value::Str(["A", "B", "C"][rng.gen_range(0..3)].to_string()),
            "Seq" => {
                let n = rng.gen_range(0..=4);
                let elem = args.first().cloned().unwrap_or_else(|| TypeExpr::named("Int"));
                Value::Seq((0..n).map(|_| random_value(l, &elem, depth, rng)).collect())
            }
            "Range" => {
                let lo = rng.gen_range(-5..=5);
                ops::range(lo, lo + rng.gen_range(-1..=6))
            }
            class => match l.h.classes.get(class) {
                Some(info) => {
                    let alts: Vec<_> = info
                        .alternatives
                        .iter()
                        .filter(|a| depth > 0 || a.components.iter().all(|(_, t)| t.head() != Some(class)))
                        .collect();
                    let alt = alts[rng.gen_range(0..alts.len())];
                    let comps = alt.components.iter().map(|(_, t)| random_value(l, t, depth.saturating_sub(1), rng)).collect();
                    ops::construct(&alt.qualified, comps, &l.h.schemas).unwrap()
                }
                // Type parameters are instantiated with Int.
                None => Value::Int(rng.gen_range(-20..=20)),
            },
        },
    }
}

pub fn translation_soundness(tuples: usize, seed: u64) -> Outcome {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut rules = 0;
    for files in CORPUS {
        let l = load(files);
        let ev = Evaluator::new(&l.h, limits());
        for (ri, rule) in l.h.rules.iter().enumerate() {
            let Some(sol) = &rule.sol else { continue };
            let f = &rule.rule.fname;
            let info = &l.h.functions[f];
            let mut accepted = 0;
            let mut attempts = 0;
            while accepted < tuples {
                attempts += 1;
                ensure(attempts <= tuples * 200, || format!("{f}: only {accepted} usable tuples"))?;
                let args: Vec<Value> = info.params.iter().map(|t| random_value(&l, t, 3, &mut rng)).collect();
                let Some((chosen, env, _)) = ev.matching_rule(f, &args) else { continue };
                if !std::ptr::eq(chosen, &l.h.rules[ri]) {
                    continue;
                }
                // `sol-f` clauses carry the precondition as a guard.
                if eval_expr(&rule.rule.pre.checked_part, &env, &l.h) != Ok(Value::Bool(true)) {
                    continue;
                }
                let Ok(want) = eval_expr(sol, &env, &l.h) else { continue };
                let got = Solver::new(&l.prog, limits())
                    .first(&Query::call(slamkit::ir::sol_pred(f), args.clone(), 1))
                    .map_err(|e| format!("{f}{args:?}: {e}"))?;
                let got = got.ok_or_else(|| format!("sol-{f} has no solution for {args:?}; eval gives {want}"))?;
                ensure(close(&got[0], &want) || ops::values_equal(&got[0], &want), || {
                    format!("sol-{f} on {args:?}: {} vs eval {want}", got[0])
                })?;
                accepted += 1;
            }
            rules += 1;
        }
    }
    Ok(format!("{rules} executable rules x {tuples} tuples agree"))
}

// ---------------------------------------------------------------------------
// 4. Golden dumps

pub fn golden_dumps() -> Outcome {
    let mut notes = Vec::new();
    for (spec, golden, must) in [
        (
            "point.slam",
            "point.dump",
            &[
                "sol-CoordX(ColouredPointCartesian(X1, X2, X3), Result) :- sol-CoordX(PointCartesian(X1, X2), Result).",
                "to-Point(ColouredPointCartesian(X1, X2, X3), PointCartesian(X1, X2)).",
            ][..],
        ),
        ("bank.slam", "bank.dump", &["in(CTransactionctran(Ts), X) :- in(Ts, X)."][..]),
    ] {
        let (code, out, err) = slam(&["translate", spec_path(spec).to_str().unwrap()]);
        ensure(code == 0, || format!("translate {spec}: {err}"))?;
        let want = std::fs::read_to_string(fixture("golden").join(golden)).map_err(|e| e.to_string())?;
        let (g, w): (Vec<&str>, Vec<&str>) = (out.lines().collect(), want.lines().collect());
        for (i, (a, b)) in g.iter().zip(&w).enumerate() {
            ensure(a == b, || format!("{golden} clause {}: got `{a}`, expected `{b}`", i + 1))?;
        }
        ensure(g.len() == w.len(), || format!("{golden}: {} clauses, expected {}", g.len(), w.len()))?;
        for m in must.iter().chain(&["in(O, X) :- first(O, X).", "in(O, X) :- next(O, O2), inside(O2), in(O2, X)."]) {
            ensure(w.contains(m), || format!("{golden} lacks `{m}`"))?;
        }
        notes.push(format!("{golden} {} clauses", g.len()));
    }
    Ok(notes.join(", "))
}

// ---------------------------------------------------------------------------
// 5. Traversal order

pub fn seven_node_tree() -> Value {
    let leaf = |v| tree_node(tree_empty(), v, tree_empty());
    tree_node(tree_node(leaf(1), 2, leaf(3)), 4, tree_node(leaf(5), 6, leaf(7)))
}

pub fn enumerate_in(l: &Loaded, v: &Value) -> Result<Vec<i64>, String> {
    let sols = engine::solve(&l.prog, &Query::call("in", vec![v.clone()], 1), limits()).map_err(|e| e.to_string())?;
    sols.into_iter()
        .map(|b| match b[0] {
            Value::Int(i) => Ok(i),
            ref other => Err(format!("element {other}")),
        })
        .collect()
}

pub fn traversal_order() -> Outcome {
    let t = seven_node_tree();
    let src = std::fs::read_to_string(spec_path("tree.slam")).unwrap();
    let mut notes = Vec::new();
    for (inorder, text) in [
        (false, src.clone()),
        (true, src.replace("=> [root, ls, rs]", "=> [ls, root, rs]")),
    ] {
        ensure(text.contains(if inorder { "[ls, root, rs]" } else { "[root, ls, rs]" }), || "tree.slam changed".into())?;
        let l = load_text(&text);
        let mut want = Vec::new();
        tree_walk(&t, inorder, &mut want);
        let got = enumerate_in(&l, &t)?;
        ensure(got == want, || format!("clause enumeration {got:?}, expected {want:?}"))?;
        let direct: Vec<Value> = Evaluator::new(&l.h, limits()).elements(&t).map_err(|e| e.to_string())?;
        ensure(direct == want.iter().map(|x| Value::Int(*x)).collect::<Vec<_>>(), || format!("evaluator order {direct:?}"))?;
        notes.push(format!("{} {got:?}", if inorder { "inorder" } else { "preorder" }));
    }
    Ok(notes.join("; "))
}

// ---------------------------------------------------------------------------
// 6. Serializer

const TAGS: [&str; 4] = ["PointCartesian", "TreeEmpty", "Bankbank", "CTransactionctran"];

pub fn random_wire_value(rng: &mut StdRng, depth: usize) -> Value {
    let leaf = depth == 0 || rng.gen_bool(0.4);
    match rng.gen_range(0..if leaf { 4 } else { 7 }) {
        0 => Value::Int(match rng.gen_range(0..4) {
            0 => i64::MIN,
            1 => i64::MAX,
            _ => rng.gen_range(-1000..=1000),
        }),
        1 => Value::Real(match rng.gen_range(0..5) {
            0 => rng.gen::<f64>() * 1e300,
            1 => -0.0,
            2 => f64::from_bits(rng.gen::<u64>() & !(0x7ffu64 << 52) | (rng.gen_range(1..0x7fe) << 52)),
            _ => rng.gen_range(-1e6..1e6),
        }),
        2 => Value::Bool(rng.gen()),
        3 => {
            let pool = ['a', 'Z', ' ', '<', '>', '&', '"', '\'', '\n', '\t', 'é', '→', '0', ';'];
            Value::Str((0..rng.gen_range(0..8)).map(|_| pool[rng.gen_range(0..pool.len())]).collect())
        }
        4 => Value::Seq((0..rng.gen_range(0..4)).map(|_| random_wire_value(rng, depth - 1)).collect()),
        5 => Value::Record(
            (0..rng.gen_range(0..4)).map(|i| (format!("f{i}"), random_wire_value(rng, depth - 1))).collect(),
        ),
        _ => Value::con(
            TAGS[rng.gen_range(0..TAGS.len())],
            (0..rng.gen_range(0..3)).map(|_| random_wire_value(rng, depth - 1)).collect(),
        ),
    }
}

/// A document that differs from `doc` but keeps it valid UTF-8.
pub fn corrupt(doc: &str, rng: &mut StdRng) -> String {
    let body = doc.trim_end_matches('\n');
    let ascii: Vec<usize> = body.char_indices().filter(|(_, c)| c.is_ascii()).map(|(i, _)| i).collect();
    loop {
        let i = ascii[rng.gen_range(0..ascii.len())];
        let bad = match rng.gen_range(0..4) {
            0 => body[..i].to_string(),
            1 => format!("{}{}", &body[..i], &body[i + 1..]),
            2 => format!("{}{}{}", &body[..i], rng.gen_range(b' '..=b'~') as char, &body[i..]),
            _ => format!("{}{}{}", &body[..i], rng.gen_range(b' '..=b'~') as char, &body[i + 1..]),
        };
        if bad != body {
            return bad;
        }
    }
}

pub fn serializer_round_trip(n: usize, seed: u64) -> Outcome {
    let mut rng = StdRng::seed_from_u64(seed);
    let spec = "ab".repeat(32);
    for i in 0..n {
        let v = random_wire_value(&mut rng, 6);
        let text = wire::to_string(&v);
        ensure(text == wire::to_string(&v.clone()), || format!("#{i}: serialization not deterministic"))?;
        let back = wire::parse_value(&text).map_err(|e| format!("#{i}: {e} reading {text}"))?;
        ensure(back == v, || format!("#{i}: {v:?} came back as {back:?}"))?;
        let doc = wire::write_doc(&spec, std::slice::from_ref(&v));
        let d = wire::read_doc(&doc).map_err(|e| format!("#{i}: {e}"))?;
        ensure(d.payload == [v.clone()], || format!("#{i}: document payload differs"))?;
        let bad = corrupt(&doc, &mut rng);
        match wire::read_doc(&bad) {
            Err(e) if e.code == "MALFORMED_WIRE" => {}
            Err(e) => return Err(format!("#{i}: corruption gave {} instead of MALFORMED_WIRE", e.code)),
            Ok(d) => return Err(format!("#{i}: corrupted document decoded to {:?}", d.payload)),
        }
    }
    Ok(format!("{n} values round-trip byte-identically; {n} corruptions rejected"))
}

// ---------------------------------------------------------------------------
// 7. Inheritance dispatch

pub fn inheritance_dispatch() -> Outcome {
    let l = load(&["point.slam"]);
    let cp = Value::con("ColouredPointCartesian", vec![Value::Real(3.0), Value::Real(4.0), Value::con("ColourRed", vec![])]);
    let p = project_to_ancestor(&cp, "Point", &l.h).map_err(|e| e.to_string())?;
    let run = |v: &Value| -> Result<(Option<Value>, Vec<String>), String> {
        let s = Solver::new(&l.prog, limits()).with_trace();
        let r = s.first(&Query::call("sol-CoordX", vec![v.clone()], 1)).map_err(|e| e.to_string())?;
        Ok((r.map(|mut b| b.remove(0)), s.trace()))
    };
    let (on_sub, trace_sub) = run(&cp)?;
    let (on_base, trace_base) = run(&p)?;
    ensure(on_sub.is_some() && on_sub == on_base, || format!("CoordX: {on_sub:?} vs projection {on_base:?}"))?;
    let entries = |t: &[String]| t.iter().filter(|l| l.starts_with("ENTER sol-CoordX/2")).count();
    ensure(entries(&trace_sub) == 2 && entries(&trace_base) == 1, || {
        format!("wrapper not visible in trace: {trace_sub:?} / {trace_base:?}")
    })?;
    Ok(format!("CoordX = {} on both; wrapper hop seen in trace", on_sub.unwrap()))
}

// ---------------------------------------------------------------------------
// 8. Check annotations

pub fn check_modes() -> Outcome {
    let l = cli::load(&[fixture("check_modes.slam")]).map_err(|ds| format!("{ds:?}"))?;
    let acct = |b: i64| Value::con("Acctacct", vec![Value::Str("ann".into()), Value::Int(b)]);
    let mut seen = Vec::new();
    for (f, payload, want, annotation) in [
        ("Deposit", vec![acct(10), Value::Int(5), acct(15)], Verdict::Pass, "conjunct_only"),
        ("Deposit", vec![acct(10), Value::Int(5), acct(5)], Verdict::Fail, "conjunct_only"),
        ("Fee", vec![acct(10), Value::Int(3), Value::Int(2)], Verdict::Pass, "approximation"),
        ("Fee", vec![acct(10), Value::Int(3), Value::Int(-1)], Verdict::Fail, "approximation"),
    ] {
        let req = check::request(&l.prog, "Acct", f, Kind::Post, &payload).map_err(|e| e.to_string())?;
        let rec = check::run_check(&l.prog, &req, limits());
        ensure(rec.verdict == want && rec.annotation == annotation && rec.partial, || {
            format!("{f} on {payload:?}: {rec:?}")
        })?;
        seen.push(format!("{f} {:?}/{}", rec.verdict, rec.annotation));
    }
    Ok(seen.join(", "))
}

// ---------------------------------------------------------------------------
// 9. Overhead

pub fn overhead() -> Outcome {
    let l = load(&["bank.slam"]);
    let dir = skeleton_dir(&l);
    let (code, _, err) = slam(&[
        "run",
        spec_path("bank.slam").to_str().unwrap(),
        "--program",
        dir.path().to_str().unwrap(),
        "--call",
        &bank_call(),
        "--overhead",
    ]);
    ensure(code == 0, || format!("run exited {code}: {err}"))?;
    let line = err.lines().find(|l| l.starts_with("overhead:")).ok_or_else(|| format!("no overhead line in {err}"))?;
    let ratio: f64 = line
        .rsplit("ratio ")
        .next()
        .and_then(|r| r.trim_end_matches('x').parse().ok())
        .ok_or_else(|| format!("unparseable `{line}`"))?;
    ensure(ratio.is_finite() && ratio > 0.0, || format!("ratio {ratio}"))?;
    Ok(line.trim_start_matches("overhead: ").to_string())
}

pub fn skeleton_dir(l: &Loaded) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    for f in codegen::emit_program(&l.h, &l.prog) {
        std::fs::write(dir.path().join(&f.name), &f.text).unwrap();
    }
    dir
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
