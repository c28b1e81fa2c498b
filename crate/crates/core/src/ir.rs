//! Translation of a checked hierarchy into a first-order clause program.
//!
//! Every function `f` yields three predicates sharing one name across the
//! hierarchy: `sol-f` computes the result, `pre-f` and `post-f` check the
//! contracts. Argument patterns of a rule become clause heads directly, so
//! selecting the applicable rule is ordinary head unification. Nested
//! applications are flattened into goals connected by auxiliary variables,
//! and quantifier filters/bodies are lambda-lifted into closure predicates.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use sha2::{Digest, Sha256};

use crate::ast::*;
use crate::ops;
use crate::semantics::ClassHierarchy;

pub type VarId = u32;

#[derive(Clone, Debug, PartialEq)]
pub enum Term {
    Var(VarId),
    Val(Value),
    Con(String, Vec<Term>),
    Seq(Vec<Term>),
    Rec(Vec<(String, Term)>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum Builtin {
    Bin(BinOp),
    Neg,
    Logic(LogicOp),
    Construct(String),
    Field(String),
    Index,
    Fun(String),
    Range,
    MkSeq,
    MkRec(Vec<String>),
    /// Simple enumeration protocol.
    First,
    Next,
    Inside,
    /// Single-element enumeration.
    Unit,
    /// Reads the i-th argument of the wire payload, checking its class.
    Wire(String),
    /// Projection of a record-typed component to the declared type.
    Project(TypeExpr),
}

/// Lambda-lifted closure reference: predicate plus captured terms. The
/// predicate takes the captures, then the element, then the output.
#[derive(Clone, Debug, PartialEq)]
pub struct Closure {
    pub pred: String,
    pub captures: Vec<Term>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Goal {
    /// Arguments that are unbound variables at call time are outputs.
    Call { pred: String, args: Vec<Term> },
    Builtin { op: Builtin, args: Vec<Term>, out: Option<VarId> },
    Eq(Term, Term),
    /// `T == true`.
    Guard(Term),
    Quant { symbol: QuantSymbol, coll: Term, filter: Option<Closure>, body: Closure, out: VarId },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clause {
    pub pred: String,
    pub head: Vec<Term>,
    pub body: Vec<Goal>,
    pub var_names: Vec<String>,
}

impl Clause {
    pub fn n_vars(&self) -> usize {
        self.var_names.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Predicate {
    pub name: String,
    pub arity: usize,
    pub clauses: Vec<Clause>,
}

#[derive(Clone, Debug)]
pub struct LogicProgram {
    pub preds: Vec<Predicate>,
    index: HashMap<(String, usize), usize>,
    pub hierarchy: ClassHierarchy,
}

impl LogicProgram {
    fn new(h: &ClassHierarchy) -> Self {
        LogicProgram { preds: Vec::new(), index: HashMap::new(), hierarchy: h.clone() }
    }

    pub fn add(&mut self, c: Clause) {
        let key = (c.pred.clone(), c.head.len());
        match self.index.get(&key) {
            Some(&i) => self.preds[i].clauses.push(c),
            None => {
                self.index.insert(key, self.preds.len());
                self.preds.push(Predicate { name: c.pred.clone(), arity: c.head.len(), clauses: vec![c] });
            }
        }
    }

    pub fn predicate(&self, name: &str, arity: usize) -> Option<&Predicate> {
        self.index.get(&(name.to_string(), arity)).map(|&i| &self.preds[i])
    }

    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.preds.iter().flat_map(|p| p.clauses.iter())
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for c in self.clauses() {
            s.push_str(&print_clause(c));
            s.push('\n');
        }
        s
    }

    /// SHA-256 of the dump, lowercase hex. Identifies the specification in
    /// wire documents.
    pub fn fingerprint(&self) -> String {
        Sha256::digest(self.dump().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn traversable(&self, class: &str) -> bool {
        self.hierarchy.classes.get(class).is_some_and(|c| c.traversable())
    }

    /// Read-mode discipline: every consumed variable is head-bound or
    /// produced by an earlier goal. Returns one message per violation.
    pub fn check_read_mode(&self) -> Vec<String> {
        let mut out = Vec::new();
        for c in self.clauses() {
            let mut bound = BTreeSet::new();
            for t in &c.head {
                term_vars(t, &mut bound);
            }
            for g in &c.body {
                let mut need = BTreeSet::new();
                let mut gives = BTreeSet::new();
                match g {
                    Goal::Call { args, .. } => {
                        for a in args {
                            match a {
                                Term::Var(v) if !bound.contains(v) => {
                                    gives.insert(*v);
                                }
                                t => term_vars(t, &mut need),
                            }
                        }
                    }
                    Goal::Builtin { args, out, .. } => {
                        args.iter().for_each(|a| term_vars(a, &mut need));
                        gives.extend(out.iter());
                    }
                    Goal::Eq(a, b) => match (a, b) {
                        (Term::Var(v), t) | (t, Term::Var(v)) if !bound.contains(v) => {
                            term_vars(t, &mut need);
                            gives.insert(*v);
                        }
                        _ => {
                            term_vars(a, &mut need);
                            term_vars(b, &mut need);
                        }
                    },
                    Goal::Guard(t) => term_vars(t, &mut need),
                    Goal::Quant { coll, filter, body, out, .. } => {
                        term_vars(coll, &mut need);
                        for cl in filter.iter().chain(std::iter::once(body)) {
                            cl.captures.iter().for_each(|t| term_vars(t, &mut need));
                        }
                        gives.insert(*out);
                    }
                }
                for v in need.difference(&bound) {
                    out.push(format!(
                        "{}: `{}` consumes unbound variable {}",
                        c.pred,
                        print_goal(c, g),
                        c.var_names[*v as usize]
                    ));
                }
                bound.extend(gives);
            }
        }
        out
    }

    /// Copy of the program extended with `query(Result) :- <goals of e>`.
    pub fn with_query(&self, e: &Expr) -> LogicProgram {
        let mut p = self.clone();
        let mut tr = Translator::new(&self.hierarchy);
        let mut cb = ClauseBuilder::default();
        let mut goals = Vec::new();
        let r = cb.named("Result");
        tr.fname = QUERY.to_string();
        tr.expr_to(&mut cb, &mut goals, e, Some(r));
        p.add(cb.finish(QUERY, vec![Term::Var(r)], goals));
        for c in tr.closures.drain(..) {
            p.add(c);
        }
        p
    }
}

pub const QUERY: &str = "query";

pub fn term_vars(t: &Term, out: &mut BTreeSet<VarId>) {
    match t {
        Term::Var(v) => {
            out.insert(*v);
        }
        Term::Val(_) => {}
        Term::Con(_, ts) | Term::Seq(ts) => ts.iter().for_each(|t| term_vars(t, out)),
        Term::Rec(fs) => fs.iter().for_each(|(_, t)| term_vars(t, out)),
    }
}

// ---------------------------------------------------------------------------
// Printing

pub fn print_term(c: &Clause, t: &Term) -> String {
    match t {
        Term::Var(v) => c.var_names[*v as usize].clone(),
        Term::Val(v) => v.to_string(),
        Term::Con(tag, args) if args.is_empty() => tag.clone(),
        Term::Con(tag, args) => format!("{tag}({})", print_terms(c, args)),
        Term::Seq(ts) => format!("[{}]", print_terms(c, ts)),
        Term::Rec(fs) => format!(
            "{{{}}}",
            fs.iter().map(|(l, t)| format!("{l}: {}", print_term(c, t))).collect::<Vec<_>>().join(", ")
        ),
    }
}

fn print_terms(c: &Clause, ts: &[Term]) -> String {
    ts.iter().map(|t| print_term(c, t)).collect::<Vec<_>>().join(", ")
}

fn print_closure(c: &Clause, cl: &Closure) -> String {
    if cl.captures.is_empty() {
        cl.pred.clone()
    } else {
        format!("{}({})", cl.pred, print_terms(c, &cl.captures))
    }
}

pub fn print_goal(c: &Clause, g: &Goal) -> String {
    let v = |id: &VarId| c.var_names[*id as usize].clone();
    match g {
        Goal::Call { pred, args } if args.is_empty() => pred.clone(),
        Goal::Call { pred, args } => format!("{pred}({})", print_terms(c, args)),
        Goal::Eq(a, b) => format!("{} = {}", print_term(c, a), print_term(c, b)),
        Goal::Guard(t) => format!("{} == true", print_term(c, t)),
        Goal::Quant { symbol, coll, filter, body, out } => format!(
            "quan-{}({}, {}, {}, {})",
            symbol.pred_suffix(),
            print_term(c, coll),
            filter.as_ref().map(|f| print_closure(c, f)).unwrap_or_else(|| "true".into()),
            print_closure(c, body),
            v(out)
        ),
        Goal::Builtin { op, args, out } => {
            let a = |i: usize| print_term(c, &args[i]);
            let rhs = match op {
                Builtin::Bin(op) => format!("{} {} {}", a(0), op.symbol(), a(1)),
                Builtin::Neg => format!("-{}", a(0)),
                Builtin::Logic(op) => format!("{}({})", op.name(), print_terms(c, args)),
                Builtin::Construct(tag) if args.is_empty() => tag.clone(),
                Builtin::Construct(tag) => format!("{tag}({})", print_terms(c, args)),
                Builtin::Field(l) => format!("{}.{l}", a(0)),
                Builtin::Index => format!("{}[{}]", a(0), a(1)),
                Builtin::Fun(f) => format!("{f}({})", print_terms(c, args)),
                Builtin::Range => format!("{} .. {}", a(0), a(1)),
                Builtin::MkSeq => format!("[{}]", print_terms(c, args)),
                Builtin::MkRec(ls) => format!(
                    "{{{}}}",
                    ls.iter().zip(args).map(|(l, t)| format!("{l}: {}", print_term(c, t))).collect::<Vec<_>>().join(", ")
                ),
                Builtin::Wire(class) => format!("wire({}, {class})", a(0)),
                Builtin::Project(t) => format!("project({}, {t})", a(0)),
                Builtin::First | Builtin::Next | Builtin::Inside | Builtin::Unit => {
                    let name = match op {
                        Builtin::First => "first",
                        Builtin::Next => "next",
                        Builtin::Inside => "inside",
                        _ => "unit",
                    };
                    let mut all: Vec<String> = args.iter().map(|t| print_term(c, t)).collect();
                    all.extend(out.iter().map(v));
                    return format!("{name}({})", all.join(", "));
                }
            };
            match out {
                Some(o) => format!("{} is {rhs}", v(o)),
                None => rhs,
            }
        }
    }
}

pub fn print_clause(c: &Clause) -> String {
    let head = if c.head.is_empty() { c.pred.clone() } else { format!("{}({})", c.pred, print_terms(c, &c.head)) };
    if c.body.is_empty() {
        format!("{head}.")
    } else {
        format!("{head} :- {}.", c.body.iter().map(|g| print_goal(c, g)).collect::<Vec<_>>().join(", "))
    }
}

// ---------------------------------------------------------------------------
// Translation

#[derive(Default)]
struct ClauseBuilder {
    names: Vec<String>,
    by_src: HashMap<String, VarId>,
    fresh: u32,
}

impl ClauseBuilder {
    fn alloc(&mut self, name: String) -> VarId {
        let mut n = name.clone();
        let mut k = 0;
        while self.names.contains(&n) {
            k += 1;
            n = format!("{name}_{k}");
        }
        self.names.push(n);
        (self.names.len() - 1) as VarId
    }

    /// Variable with a fixed display name (uniquified on clashes).
    fn named(&mut self, name: &str) -> VarId {
        self.alloc(name.to_string())
    }

    /// The clause variable standing for source variable `x`.
    fn src(&mut self, x: &str) -> VarId {
        if let Some(&v) = self.by_src.get(x) {
            return v;
        }
        let display = if x == RESULT { RESULT.to_string() } else { capitalize(x) };
        let v = self.alloc(display);
        self.by_src.insert(x.to_string(), v);
        v
    }

    fn fresh(&mut self) -> VarId {
        self.fresh += 1;
        self.alloc(format!("_V{}", self.fresh))
    }

    fn finish(self, pred: &str, head: Vec<Term>, body: Vec<Goal>) -> Clause {
        Clause { pred: pred.to_string(), head, body, var_names: self.names }
    }
}

fn capitalize(x: &str) -> String {
    let mut cs = x.chars();
    match cs.next() {
        Some(c) => c.to_uppercase().chain(cs).collect(),
        None => String::new(),
    }
}

pub fn sol_pred(f: &str) -> String {
    format!("sol-{f}")
}
pub fn pre_pred(f: &str) -> String {
    format!("pre-{f}")
}
pub fn post_pred(f: &str) -> String {
    format!("post-{f}")
}
pub fn to_pred(c: &str) -> String {
    format!("to-{c}")
}
pub fn read_pred(c: &str) -> String {
    format!("read-{c}")
}
pub const IN: &str = "in";

struct Translator<'h> {
    h: &'h ClassHierarchy,
    fname: String,
    counters: BTreeMap<String, usize>,
    closures: Vec<Clause>,
}

impl<'h> Translator<'h> {
    fn new(h: &'h ClassHierarchy) -> Self {
        Translator { h, fname: String::new(), counters: BTreeMap::new(), closures: Vec::new() }
    }

    fn pattern(&mut self, cb: &mut ClauseBuilder, p: &Pattern) -> Term {
        match p {
            Pattern::Var(x) => Term::Var(cb.src(x)),
            Pattern::Literal(v) => Term::Val(v.clone()),
            Pattern::Constructor(tag, ps) => Term::Con(tag.clone(), ps.iter().map(|p| self.pattern(cb, p)).collect()),
            Pattern::Record(fs) => Term::Rec(fs.iter().map(|(l, p)| (l.clone(), self.pattern(cb, p))).collect()),
        }
    }

    fn expr(&mut self, cb: &mut ClauseBuilder, goals: &mut Vec<Goal>, e: &Expr) -> Term {
        self.expr_to(cb, goals, e, None)
    }

    /// Translates `e`; compound expressions bind `target` (or a fresh
    /// variable). Returns the term holding the value.
    fn expr_to(&mut self, cb: &mut ClauseBuilder, goals: &mut Vec<Goal>, e: &Expr, target: Option<VarId>) -> Term {
        let atomic = match e {
            Expr::Lit(v) => Some(Term::Val(v.clone())),
            Expr::Var(x) => Some(Term::Var(cb.src(x))),
            Expr::ResultVar => Some(Term::Var(cb.src(RESULT))),
            _ => None,
        };
        if let Some(t) = atomic {
            if let Some(o) = target {
                goals.push(Goal::Eq(Term::Var(o), t));
                return Term::Var(o);
            }
            return t;
        }
        let builtin = |this: &mut Self, cb: &mut ClauseBuilder, goals: &mut Vec<Goal>, op: Builtin, args: &[&Expr]| {
            let ts: Vec<Term> = args.iter().map(|a| this.expr(cb, goals, a)).collect();
            let out = target.unwrap_or_else(|| cb.fresh());
            goals.push(Goal::Builtin { op, args: ts, out: Some(out) });
            Term::Var(out)
        };
        match e {
            Expr::Construct(tag, args) => {
                builtin(self, cb, goals, Builtin::Construct(tag.clone()), &args.iter().collect::<Vec<_>>())
            }
            Expr::Call(f, args) if ops::BUILTIN_FUNCTIONS.contains(&f.as_str()) => {
                builtin(self, cb, goals, Builtin::Fun(f.clone()), &args.iter().collect::<Vec<_>>())
            }
            Expr::Call(f, args) => {
                let mut ts: Vec<Term> = args.iter().map(|a| self.expr(cb, goals, a)).collect();
                let out = target.unwrap_or_else(|| cb.fresh());
                ts.push(Term::Var(out));
                goals.push(Goal::Call { pred: sol_pred(f), args: ts });
                Term::Var(out)
            }
            Expr::QualifiedCall(Some(recv), class, f, args) => {
                let r = self.expr(cb, goals, recv);
                let cast = cb.fresh();
                goals.push(Goal::Call { pred: to_pred(class), args: vec![r, Term::Var(cast)] });
                let mut ts = vec![Term::Var(cast)];
                ts.extend(args.iter().map(|a| self.expr(cb, goals, a)));
                let out = target.unwrap_or_else(|| cb.fresh());
                ts.push(Term::Var(out));
                goals.push(Goal::Call { pred: sol_pred(f), args: ts });
                Term::Var(out)
            }
            Expr::DottedCall(recv, f, args) => {
                let mut all = vec![(**recv).clone()];
                all.extend(args.iter().cloned());
                self.expr_to(cb, goals, &Expr::Call(f.clone(), all), target)
            }
            Expr::QualifiedCall(None, _, f, args) => self.expr_to(cb, goals, &Expr::Call(f.clone(), args.clone()), target),
            Expr::Logical(op, args) => builtin(self, cb, goals, Builtin::Logic(*op), &args.iter().collect::<Vec<_>>()),
            Expr::Binary(op, l, r) => builtin(self, cb, goals, Builtin::Bin(*op), &[l, r]),
            Expr::Neg(a) => builtin(self, cb, goals, Builtin::Neg, &[a]),
            Expr::Field(a, l) => builtin(self, cb, goals, Builtin::Field(l.clone()), &[a]),
            Expr::Index(a, i) => builtin(self, cb, goals, Builtin::Index, &[a, i]),
            Expr::Range(a, b) => builtin(self, cb, goals, Builtin::Range, &[a, b]),
            Expr::SeqLit(xs) => builtin(self, cb, goals, Builtin::MkSeq, &xs.iter().collect::<Vec<_>>()),
            Expr::RecordLit(fs) => {
                let labels = fs.iter().map(|(l, _)| l.clone()).collect();
                builtin(self, cb, goals, Builtin::MkRec(labels), &fs.iter().map(|(_, e)| e).collect::<Vec<_>>())
            }
            Expr::Quant(q) => {
                let coll = self.expr(cb, goals, &q.collection);
                let n = {
                    let c = self.counters.entry(self.fname.clone()).or_insert(0);
                    *c += 1;
                    *c
                };
                let sfx = q.symbol.pred_suffix();
                let filter = if matches!(*q.filter, Expr::Lit(Value::Bool(true))) {
                    None
                } else {
                    Some(self.lift(cb, &q.filter, &q.bound_var, &format!("quan-{sfx}-filter-{}-{n}", self.fname)))
                };
                let body = self.lift(cb, &q.body, &q.bound_var, &format!("quan-{sfx}-body-{}-{n}", self.fname));
                let out = target.unwrap_or_else(|| cb.fresh());
                goals.push(Goal::Quant { symbol: q.symbol, coll, filter, body, out });
                Term::Var(out)
            }
            Expr::Lit(_) | Expr::Var(_) | Expr::ResultVar => unreachable!(),
        }
    }

    fn lift(&mut self, outer: &mut ClauseBuilder, e: &Expr, bound: &str, pred: &str) -> Closure {
        let mut caps: Vec<String> = e.free_vars().into_iter().filter(|x| x != bound).collect();
        if e.mentions_result() {
            caps.push(RESULT.to_string());
        }
        let captures = caps.iter().map(|x| Term::Var(outer.src(x))).collect();
        let mut cb = ClauseBuilder::default();
        let mut head: Vec<Term> = caps.iter().map(|x| Term::Var(cb.src(x))).collect();
        head.push(Term::Var(cb.src(bound)));
        let out = cb.named("Out");
        head.push(Term::Var(out));
        let mut goals = Vec::new();
        self.expr_to(&mut cb, &mut goals, e, Some(out));
        self.closures.push(cb.finish(pred, head, goals));
        Closure { pred: pred.to_string(), captures }
    }

    /// `pre-f(pats) :- <goals>, P == true`, and likewise for post; the
    /// sol clause checks the precondition before computing the result.
    fn rule(&mut self, p: &mut LogicProgram, ri: &crate::semantics::RuleInfo) {
        let r = &ri.rule;
        self.fname = r.fname.clone();

        let mut cb = ClauseBuilder::default();
        let head: Vec<Term> = r.args.iter().map(|a| self.pattern(&mut cb, a)).collect();
        let mut goals = Vec::new();
        let t = self.expr(&mut cb, &mut goals, &r.pre.checked_part);
        goals.push(Goal::Guard(t));
        p.add(cb.finish(&pre_pred(&r.fname), head, goals));

        let mut cb = ClauseBuilder::default();
        let mut head: Vec<Term> = r.args.iter().map(|a| self.pattern(&mut cb, a)).collect();
        head.push(Term::Var(cb.src(RESULT)));
        let mut goals = Vec::new();
        let t = self.expr(&mut cb, &mut goals, &r.post.checked_part);
        goals.push(Goal::Guard(t));
        p.add(cb.finish(&post_pred(&r.fname), head, goals));

        if let Some(sol) = &ri.sol {
            let mut cb = ClauseBuilder::default();
            let mut head: Vec<Term> = r.args.iter().map(|a| self.pattern(&mut cb, a)).collect();
            let res = cb.src(RESULT);
            head.push(Term::Var(res));
            let mut goals = Vec::new();
            if !matches!(r.pre.checked_part, Expr::Lit(Value::Bool(true))) {
                let t = self.expr(&mut cb, &mut goals, &r.pre.checked_part);
                goals.push(Goal::Guard(t));
            }
            self.expr_to(&mut cb, &mut goals, sol, Some(res));
            p.add(cb.finish(&sol_pred(&r.fname), head, goals));
        }
    }

    fn traversal(&mut self, p: &mut LogicProgram, class: &str) {
        let c = &self.h.classes[class];
        self.fname = class.to_string();
        for tv in &c.traversal {
            for (item, coll) in tv.items.iter().zip(&tv.item_is_collection) {
                let mut cb = ClauseBuilder::default();
                let shape = self.pattern(&mut cb, &tv.shape);
                let x = cb.named("X");
                let mut goals = Vec::new();
                let t = self.expr(&mut cb, &mut goals, item);
                if *coll {
                    goals.push(Goal::Call { pred: IN.into(), args: vec![t, Term::Var(x)] });
                } else {
                    goals.push(Goal::Builtin { op: Builtin::Unit, args: vec![t], out: Some(x) });
                }
                p.add(cb.finish(IN, vec![shape, Term::Var(x)], goals));
            }
        }
    }

    /// Goals turning the components of `from` (an alternative of a
    /// descendant) into those of the ancestor alternative `to`.
    fn cast_components(
        &self,
        cb: &mut ClauseBuilder,
        goals: &mut Vec<Goal>,
        xs: &[VarId],
        to: &crate::semantics::AltInfo,
        needs_to: &BTreeSet<String>,
    ) -> Vec<Term> {
        let mut out = Vec::new();
        for (x, (_, t)) in xs.iter().zip(&to.components) {
            match t {
                TypeExpr::Named(n, _) if needs_to.contains(n) => {
                    let y = cb.fresh();
                    goals.push(Goal::Call { pred: to_pred(n), args: vec![Term::Var(*x), Term::Var(y)] });
                    out.push(Term::Var(y));
                }
                TypeExpr::Record(_) => {
                    let y = cb.fresh();
                    goals.push(Goal::Builtin { op: Builtin::Project(t.clone()), args: vec![Term::Var(*x)], out: Some(y) });
                    out.push(Term::Var(y));
                }
                _ => out.push(Term::Var(*x)),
            }
        }
        out
    }

    fn to_clauses(&self, p: &mut LogicProgram, class: &str, needs_to: &BTreeSet<String>) {
        let target = &self.h.classes[class];
        let mut sources: Vec<&String> = vec![&target.def.name];
        sources.extend(self.h.classes.keys().filter(|d| self.h.is_subclass(d, class)));
        for d in sources {
            for alt in &self.h.classes[d].alternatives {
                let Some(to) = target.alt(&alt.tag) else { continue };
                let mut cb = ClauseBuilder::default();
                let xs: Vec<VarId> = (1..=alt.components.len()).map(|i| cb.named(&format!("X{i}"))).collect();
                let mut goals = Vec::new();
                let ys = if d == class {
                    xs.iter().map(|x| Term::Var(*x)).collect()
                } else {
                    self.cast_components(&mut cb, &mut goals, &xs, to, needs_to)
                };
                let head = vec![
                    Term::Con(alt.qualified.clone(), xs.iter().map(|x| Term::Var(*x)).collect()),
                    Term::Con(to.qualified.clone(), ys),
                ];
                p.add(cb.finish(&to_pred(class), head, goals));
            }
        }
    }

    fn wrappers(&self, p: &mut LogicProgram, needs_to: &BTreeSet<String>) {
        let mut seen = BTreeSet::new();
        for (f, d) in &self.h.missing {
            let anc = &self.h.dispatch[&(f.clone(), d.clone())];
            let n = self.h.functions[f].params.len();
            for (pred, with_result) in [(sol_pred(f), true), (pre_pred(f), false), (post_pred(f), true)] {
                if p.predicate(&pred, n + with_result as usize).is_none() {
                    continue;
                }
                for alt in &self.h.classes[d].alternatives {
                    let Some(to) = self.h.classes[anc].alt(&alt.tag) else { continue };
                    let mut cb = ClauseBuilder::default();
                    let xs: Vec<VarId> = (1..=alt.components.len()).map(|i| cb.named(&format!("X{i}"))).collect();
                    let rest: Vec<VarId> = (2..=n).map(|i| cb.named(&format!("A{i}"))).collect();
                    let res = with_result.then(|| cb.named(RESULT));
                    let mut goals = Vec::new();
                    let ys = self.cast_components(&mut cb, &mut goals, &xs, to, needs_to);
                    let tail: Vec<Term> = rest.iter().chain(res.iter()).map(|v| Term::Var(*v)).collect();
                    let mut head = vec![Term::Con(alt.qualified.clone(), xs.iter().map(|x| Term::Var(*x)).collect())];
                    head.extend(tail.iter().cloned());
                    let mut args = vec![Term::Con(to.qualified.clone(), ys)];
                    args.extend(tail);
                    goals.push(Goal::Call { pred: pred.clone(), args });
                    let c = cb.finish(&pred, head, goals);
                    if seen.insert(print_clause(&Clause { body: Vec::new(), ..c.clone() })) {
                        p.add(c);
                    }
                }
            }
        }
    }
}

fn read_name(h: &ClassHierarchy, t: &TypeExpr) -> String {
    match t {
        TypeExpr::Named(n, _) if n == "Nat" => "Int".into(),
        TypeExpr::Named(n, _) if h.is_class(n) || crate::semantics::BUILTIN_TYPES.contains(&n.as_str()) => n.clone(),
        _ => "Any".into(),
    }
}

fn entry_clauses(p: &mut LogicProgram, h: &ClassHierarchy, f: &crate::semantics::FunctionInfo) {
    for (pred, with_result) in [(pre_pred(&f.name), false), (post_pred(&f.name), true)] {
        if f.params.is_empty() && !with_result {
            // `pre-f/0` is then the rule predicate itself.
            continue;
        }
        let mut cb = ClauseBuilder::default();
        let mut goals = Vec::new();
        let mut args = Vec::new();
        let mut types: Vec<&TypeExpr> = f.params.iter().collect();
        if with_result {
            types.extend(f.result.iter());
        }
        for (i, t) in types.iter().enumerate() {
            let a = if with_result && i == f.params.len() { cb.named(RESULT) } else { cb.named(&format!("A{}", i + 1)) };
            goals.push(Goal::Call {
                pred: read_pred(&read_name(h, t)),
                args: vec![Term::Val(Value::Int(i as i64 + 1)), Term::Var(a)],
            });
            args.push(Term::Var(a));
        }
        goals.push(Goal::Call { pred: pred.clone(), args });
        p.add(cb.finish(&pred, Vec::new(), goals));
    }
}

const PREDEFINED_READS: &[&str] = &["Any", "Bool", "Int", "Range", "Real", "Seq", "String"];

fn read_clause(class: &str) -> Clause {
    let mut cb = ClauseBuilder::default();
    let i = cb.named("I");
    let x = cb.named("X");
    let goals = vec![Goal::Builtin { op: Builtin::Wire(class.to_string()), args: vec![Term::Var(i)], out: Some(x) }];
    cb.finish(&read_pred(class), vec![Term::Var(i), Term::Var(x)], goals)
}

/// The generic simple-enumeration scheme for built-in collections
/// (sequences, strings, ranges).
fn predefined(p: &mut LogicProgram) {
    let mut cb = ClauseBuilder::default();
    let (o, x) = (cb.named("O"), cb.named("X"));
    let body = vec![Goal::Builtin { op: Builtin::First, args: vec![Term::Var(o)], out: Some(x) }];
    p.add(cb.finish(IN, vec![Term::Var(o), Term::Var(x)], body));

    let mut cb = ClauseBuilder::default();
    let (o, x, o2) = (cb.named("O"), cb.named("X"), cb.named("O2"));
    let body = vec![
        Goal::Builtin { op: Builtin::Next, args: vec![Term::Var(o)], out: Some(o2) },
        Goal::Builtin { op: Builtin::Inside, args: vec![Term::Var(o2)], out: None },
        Goal::Call { pred: IN.into(), args: vec![Term::Var(o2), Term::Var(x)] },
    ];
    p.add(cb.finish(IN, vec![Term::Var(o), Term::Var(x)], body));

    for c in PREDEFINED_READS {
        p.add(read_clause(c));
    }
}

pub fn translate(h: &ClassHierarchy) -> LogicProgram {
    let mut p = LogicProgram::new(h);
    predefined(&mut p);

    // Classes needing cast clauses: those with descendants and targets of
    // qualified calls.
    let mut needs_to: BTreeSet<String> =
        h.classes.keys().filter(|c| h.classes.keys().any(|d| h.is_subclass(d, c))).cloned().collect();
    let mut scan = |e: &Expr| {
        e.walk(&mut |x| {
            if let Expr::QualifiedCall(_, c, _, _) = x {
                if h.is_class(c) {
                    needs_to.insert(c.clone());
                }
            }
        })
    };
    for ri in &h.rules {
        let r = &ri.rule;
        scan(&r.pre.checked_part);
        scan(&r.post.checked_part);
        if let Some(s) = &ri.sol {
            scan(s);
        }
    }

    let mut tr = Translator::new(h);
    for cname in h.classes.keys() {
        p.add(read_clause(cname));
        if needs_to.contains(cname) {
            tr.to_clauses(&mut p, cname, &needs_to);
        }
        tr.traversal(&mut p, cname);
        for ri in h.rules.iter().filter(|r| &r.rule.class == cname) {
            tr.rule(&mut p, ri);
        }
        for f in h.functions.values().filter(|f| &f.class == cname) {
            if h.rules_for(&f.name).next().is_some() {
                entry_clauses(&mut p, h, f);
            }
        }
        for c in tr.closures.drain(..) {
            p.add(c);
        }
    }
    tr.wrappers(&mut p, &needs_to);
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semantics::load_spec;

    fn prog(src: &str) -> LogicProgram {
        translate(&load_spec(src).unwrap().0)
    }

    #[test]
    fn empty_spec_is_only_the_predefined_library() {
        let p = prog("");
        let preds: Vec<&str> = p.preds.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(preds[0], "in");
        assert!(preds[1..].iter().all(|n| n.starts_with("read-")));
        assert_eq!(p.predicate("in", 2).unwrap().clauses.len(), 2);
    }

    #[test]
    fn sol_head_uses_rule_patterns() {
        let p = prog("class Point { case Cartesian(Real, Real) observer CoordX() : Real rule { call: CoordX(Cartesian(x, y)) post: Result = x } }");
        let dump = p.dump();
        assert!(dump.contains("sol-CoordX(PointCartesian(X, Y), Result) :- Result = X."), "{dump}");
        assert!(dump.contains("pre-CoordX(PointCartesian(X, Y)) :- true == true."), "{dump}");
        assert!(p.check_read_mode().is_empty());
    }

    #[test]
    fn quantifier_bodies_are_lifted() {
        let p = prog("class A { case K(Seq(Int)) observer S() : Int rule { call: S(K(xs)) sol: sum x in xs | x > 0 . x * 2 } }");
        let dump = p.dump();
        assert!(dump.contains("quan-sum(Xs, quan-sum-filter-S-1, quan-sum-body-S-1, Result)"), "{dump}");
        assert!(dump.contains("quan-sum-body-S-1(X, Out) :- Out is X * 2."), "{dump}");
        assert!(p.check_read_mode().is_empty());
    }

    #[test]
    fn translation_is_deterministic() {
        let src = "class T { case E() case N(T, Int, T) traverse E() => [] traverse N(l, v, r) => [v, l, r] }";
        assert_eq!(prog(src).dump(), prog(src).dump());
        assert_eq!(prog(src).fingerprint().len(), 64);
    }
}
