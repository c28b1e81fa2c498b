//! Runtime contract checking over serialized calls: verdicts for pre- and
//! postconditions, the failure locus, and the run report.

use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::ast::{CheckModeKind, Expr, LogicOp, QuantSymbol, Value, RESULT};
use crate::diag::SourceSpan;
use crate::engine::{EngineLimits, Query, Solver};
use crate::eval::{Env, Evaluator};
use crate::ir::{post_pred, pre_pred, LogicProgram};
use crate::ops::{self, EvalError, EvalResult};
use crate::wire::{self, WireDoc};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Pre,
    Post,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Pre => "pre",
            Kind::Post => "post",
        }
    }

    pub fn parse(s: &str) -> Option<Kind> {
        match s {
            "pre" => Some(Kind::Pre),
            "post" => Some(Kind::Post),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Error,
}

/// What to do when a check fails while a program is running.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Policy {
    #[default]
    Abort,
    Report,
}

impl Policy {
    pub fn parse(s: &str) -> Option<Policy> {
        match s {
            "abort" => Some(Policy::Abort),
            "report" => Some(Policy::Report),
            _ => None,
        }
    }
}

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ABORTED: i32 = 2;
pub const EXIT_ERROR: i32 = 3;

#[derive(Clone, Debug)]
pub struct CheckRequest {
    pub class: String,
    pub fname: String,
    pub kind: Kind,
    pub doc: WireDoc,
}

/// Where a failing condition stops holding: the first false conjunct,
/// followed through `forall` witnesses and implications.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Locus {
    /// e.g. `post/and[2]/forall(i=1)/and[2]`
    pub path: String,
    pub formula: String,
    /// Quantifier witnesses on the way down.
    pub witnesses: Vec<(String, String)>,
    pub span: Option<SourceSpan>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckRecord {
    pub function: String,
    pub kind: Kind,
    pub verdict: Verdict,
    pub annotation: String,
    /// The verdict covers only part of the condition.
    pub partial: bool,
    pub elapsed_ms: f64,
    /// Argument (and result) bindings, on failure.
    pub bindings: Vec<(String, String)>,
    pub locus: Option<Locus>,
    pub error: Option<String>,
}

/// Raised by `post_return_check` under [`Policy::Abort`].
#[derive(Clone, Debug)]
pub struct Aborted(pub CheckRecord);

pub struct Checker<'p> {
    pub prog: &'p LogicProgram,
    pub limits: EngineLimits,
    pub policy: Policy,
    records: Mutex<Vec<CheckRecord>>,
}

impl<'p> Checker<'p> {
    pub fn new(prog: &'p LogicProgram, limits: EngineLimits, policy: Policy) -> Self {
        Checker { prog, limits, policy, records: Mutex::new(Vec::new()) }
    }

    pub fn records(&self) -> Vec<CheckRecord> {
        self.records.lock().unwrap().clone()
    }

    fn collect(&self, r: CheckRecord) -> CheckRecord {
        self.records.lock().unwrap().push(r.clone());
        r
    }

    pub fn pre_check(&self, req: &CheckRequest) -> CheckRecord {
        self.collect(run_check(self.prog, req, self.limits))
    }

    pub fn post_check(&self, req: &CheckRequest) -> CheckRecord {
        self.collect(run_check(self.prog, req, self.limits))
    }

    /// Checks the postcondition and hands back the result unchanged,
    /// unless the check fails under the abort policy.
    pub fn post_return_check(&self, req: &CheckRequest) -> Result<Value, Aborted> {
        let r = self.post_check(req);
        if r.verdict == Verdict::Fail && self.policy == Policy::Abort {
            return Err(Aborted(r));
        }
        Ok(req.doc.payload.last().cloned().unwrap_or(Value::Bool(true)))
    }
}

fn error_record(function: String, kind: Kind, e: &EvalError, start: Instant) -> CheckRecord {
    CheckRecord {
        function,
        kind,
        verdict: Verdict::Error,
        annotation: CheckModeKind::Full.name().to_string(),
        partial: false,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        bindings: Vec::new(),
        locus: None,
        error: Some(format!("{}: {}", e.code, e.message)),
    }
}

/// One check against the program; never panics on bad input.
pub fn run_check(prog: &LogicProgram, req: &CheckRequest, limits: EngineLimits) -> CheckRecord {
    let start = Instant::now();
    let function = format!("{}:{}", req.class, req.fname);
    let h = &prog.hierarchy;
    let fi = match h.functions.get(&req.fname) {
        Some(fi) if h.is_same_or_subclass(&req.class, &fi.class) => fi,
        _ => {
            let e = EvalError::new("UNKNOWN_FUNCTION", format!("`{function}` is not a specified function"));
            return error_record(function, req.kind, &e, start);
        }
    };
    let expected = fi.params.len() + usize::from(req.kind == Kind::Post);
    if req.doc.payload.len() != expected {
        let e = EvalError::new(
            "ARITY_MISMATCH",
            format!("{} check of `{function}` needs {expected} values, the document has {}", req.kind.name(), req.doc.payload.len()),
        );
        return error_record(function, req.kind, &e, start);
    }
    let pred = match req.kind {
        Kind::Pre => pre_pred(&req.fname),
        Kind::Post => post_pred(&req.fname),
    };
    let solver = Solver::new(prog, limits).with_payload(req.doc.payload.clone());
    let holds = match solver.first(&Query::call(pred, Vec::new(), 0)) {
        Ok(s) => s.is_some(),
        Err(e) => return error_record(function, req.kind, &e, start),
    };

    let n = fi.params.len();
    let ev = Evaluator::new(h, limits);
    let rule = ev.matching_rule(&req.fname, &req.doc.payload[..n]);
    let mode = rule.as_ref().map(|(ri, _, _)| match req.kind {
        Kind::Pre => &ri.rule.pre,
        Kind::Post => &ri.rule.post,
    });
    let annotation = mode.map_or(CheckModeKind::Full, |m| m.mode);
    let mut rec = CheckRecord {
        function,
        kind: req.kind,
        verdict: if holds { Verdict::Pass } else { Verdict::Fail },
        annotation: annotation.name().to_string(),
        partial: annotation != CheckModeKind::Full,
        elapsed_ms: 0.0,
        bindings: Vec::new(),
        locus: None,
        error: None,
    };
    if !holds {
        match &rule {
            Some((ri, env, _)) => {
                let mut env = env.clone();
                if req.kind == Kind::Post {
                    env.insert(RESULT.to_string(), req.doc.payload[n].clone());
                }
                rec.bindings = env.iter().map(|(k, v)| (k.clone(), v.to_string())).collect();
                let mut loc = blame(&ev, &mode.unwrap().checked_part, &env, req.kind.name().to_string(), Vec::new());
                loc.span = ri.rule.origin.0.clone();
                rec.locus = Some(loc);
            }
            None => {
                rec.bindings = req.doc.payload.iter().enumerate().map(|(i, v)| (format!("#{}", i + 1), v.to_string())).collect();
                rec.locus = Some(Locus {
                    path: "call".into(),
                    formula: "no rule pattern matches the arguments".into(),
                    witnesses: Vec::new(),
                    span: None,
                });
            }
        }
    }
    rec.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    rec
}

fn is_true(ev: &Evaluator, e: &Expr, env: &Env) -> Option<bool> {
    ev.eval(e, env).ok().and_then(|v| ops::truth(&v).ok())
}

/// Descends from a false formula to the first sub-formula that is itself
/// false, in evaluation order.
fn blame(ev: &Evaluator, e: &Expr, env: &Env, path: String, witnesses: Vec<(String, String)>) -> Locus {
    match e {
        Expr::Logical(LogicOp::And, xs) => {
            for (i, x) in xs.iter().enumerate() {
                if is_true(ev, x, env) != Some(true) {
                    return blame(ev, x, env, format!("{path}/and[{}]", i + 1), witnesses);
                }
            }
        }
        Expr::Logical(LogicOp::Implies, xs) if xs.len() == 2 => {
            if is_true(ev, &xs[0], env) == Some(true) {
                return blame(ev, &xs[1], env, format!("{path}/implies"), witnesses);
            }
        }
        Expr::Quant(q) if q.symbol == QuantSymbol::Forall => {
            if let Ok(elems) = ev.eval(&q.collection, env).and_then(|c| ev.elements(&c)) {
                let mut inner = env.clone();
                for x in elems {
                    inner.insert(q.bound_var.clone(), x.clone());
                    if is_true(ev, &q.filter, &inner) == Some(true) && is_true(ev, &q.body, &inner) != Some(true) {
                        let mut w = witnesses;
                        w.push((q.bound_var.clone(), x.to_string()));
                        return blame(ev, &q.body, &inner, format!("{path}/forall({}={x})", q.bound_var), w);
                    }
                }
            }
        }
        _ => {}
    }
    Locus { path, formula: e.to_string(), witnesses, span: None }
}

/// Reads a `.slamx` document for `class:f` and checks it.
pub fn check_call(
    prog: &LogicProgram,
    function: &str,
    kind: Kind,
    doc_text: &str,
    limits: EngineLimits,
) -> CheckRecord {
    let start = Instant::now();
    let (class, fname) = function.split_once(':').unwrap_or(("", function));
    let req = match wire::read_doc_for(doc_text, &prog.fingerprint(), &prog.hierarchy) {
        Ok(doc) => CheckRequest { class: class.to_string(), fname: fname.to_string(), kind, doc },
        Err(e) => return error_record(function.to_string(), kind, &e, start),
    };
    run_check(prog, &req, limits)
}

/// Builds a request from in-memory values, going through the wire format
/// so that checks see exactly what a separate checker process would.
pub fn request(prog: &LogicProgram, class: &str, fname: &str, kind: Kind, payload: &[Value]) -> EvalResult<CheckRequest> {
    let text = wire::write_doc(&prog.fingerprint(), payload);
    let doc = wire::read_doc_for(&text, &prog.fingerprint(), &prog.hierarchy)?;
    Ok(CheckRequest { class: class.to_string(), fname: fname.to_string(), kind, doc })
}

pub fn exit_code(records: &[CheckRecord], aborted: bool) -> i32 {
    if aborted {
        EXIT_ABORTED
    } else if records.iter().any(|r| r.verdict == Verdict::Error) {
        EXIT_ERROR
    } else if records.iter().any(|r| r.verdict == Verdict::Fail) {
        EXIT_FAIL
    } else {
        EXIT_PASS
    }
}

#[derive(Serialize)]
struct Summary {
    checks: usize,
    pass: usize,
    fail: usize,
    error: usize,
    partial: usize,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    summary: Summary,
    records: &'a [CheckRecord],
}

pub struct Report {
    pub text: String,
    pub json: String,
}

pub fn run_report(records: &[CheckRecord]) -> Report {
    let count = |v: Verdict| records.iter().filter(|r| r.verdict == v).count();
    let summary = Summary {
        checks: records.len(),
        pass: count(Verdict::Pass),
        fail: count(Verdict::Fail),
        error: count(Verdict::Error),
        partial: records.iter().filter(|r| r.partial).count(),
    };
    let mut text = format!(
        "{} check{}: {} pass, {} fail, {} error",
        summary.checks,
        if summary.checks == 1 { "" } else { "s" },
        summary.pass,
        summary.fail,
        summary.error
    );
    if summary.partial > 0 {
        text.push_str(&format!(" ({} partial)", summary.partial));
    }
    text.push('\n');
    for r in records {
        match r.verdict {
            Verdict::Pass if r.partial => {
                text.push_str(&format!("  partial  {} {}: only the {} part was checked\n", r.kind.name(), r.function, r.annotation));
            }
            Verdict::Pass => {}
            Verdict::Fail => {
                text.push_str(&format!("  FAIL     {} {}", r.kind.name(), r.function));
                if r.partial {
                    text.push_str(&format!(" [{}]", r.annotation));
                }
                text.push('\n');
                if let Some(l) = &r.locus {
                    text.push_str(&format!("    at {}: {}\n", l.path, l.formula));
                    if let Some(s) = &l.span {
                        text.push_str(&format!("    rule at {s}\n"));
                    }
                }
                for (k, v) in &r.bindings {
                    text.push_str(&format!("    {k} = {v}\n"));
                }
            }
            Verdict::Error => {
                text.push_str(&format!("  ERROR    {} {}: {}\n", r.kind.name(), r.function, r.error.as_deref().unwrap_or("")));
            }
        }
    }
    let json = serde_json::to_string_pretty(&ReportDoc { summary, records }).expect("report serializes");
    Report { text, json }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::translate;
    use crate::semantics::load_spec;

    const SPEC: &str = "class A { case K(Int)
      observer F() : Int
      rule { call: F(K(x)) pre: x > 0 post: Result = x + 1 and Result > 1 } }";

    fn prog() -> LogicProgram {
        translate(&load_spec(SPEC).unwrap().0)
    }

    fn k(i: i64) -> Value {
        Value::con("AK", vec![Value::Int(i)])
    }

    #[test]
    fn verdicts_and_locus() {
        let p = prog();
        let c = Checker::new(&p, EngineLimits::default(), Policy::Report);
        let pre = |v| c.pre_check(&request(&p, "A", "F", Kind::Pre, &[v]).unwrap());
        assert_eq!(pre(k(2)).verdict, Verdict::Pass);
        assert_eq!(pre(k(0)).verdict, Verdict::Fail);
        let r = c.post_check(&request(&p, "A", "F", Kind::Post, &[k(2), Value::Int(4)]).unwrap());
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(r.locus.unwrap().path, "post/and[1]");
        let rep = run_report(&c.records());
        assert!(rep.text.starts_with("3 checks: 1 pass, 2 fail, 0 error"), "{}", rep.text);
        assert_eq!(exit_code(&c.records(), false), EXIT_FAIL);
    }

    #[test]
    fn post_return_passes_value_through() {
        let p = prog();
        let c = Checker::new(&p, EngineLimits::default(), Policy::Abort);
        let ok = request(&p, "A", "F", Kind::Post, &[k(2), Value::Int(3)]).unwrap();
        assert_eq!(c.post_return_check(&ok).unwrap(), Value::Int(3));
        let bad = request(&p, "A", "F", Kind::Post, &[k(2), Value::Int(5)]).unwrap();
        assert!(c.post_return_check(&bad).is_err());
    }

    #[test]
    fn empty_report_and_bad_documents() {
        assert!(run_report(&[]).text.starts_with("0 checks"));
        let p = prog();
        let doc = wire::write_doc(&"0".repeat(64), &[k(1)]);
        let r = check_call(&p, "A:F", Kind::Pre, &doc, EngineLimits::default());
        assert_eq!(r.verdict, Verdict::Error);
        assert!(r.error.unwrap().starts_with("FINGERPRINT_MISMATCH"));
    }
}
