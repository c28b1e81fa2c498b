//! Depth-first, clause-order interpreter for translated programs.
//!
//! Unification is read-mode only: clause heads are matched against ground
//! argument values, and output positions (unbound caller variables) are
//! filled from the instantiated head when the callee exits. The machine
//! keeps an explicit continuation and choice-point stack, so solutions are
//! produced lazily and deep recursion does not consume the native stack.

use std::cell::{Cell, RefCell};
use std::collections::VecDeque;
use std::rc::Rc;
use std::time::{Duration, Instant};

use crate::ast::{QuantSymbol, TypeExpr, Value};
use crate::ir::{Builtin, Clause, Closure, Goal, LogicProgram, Predicate, Term, VarId, IN};
use crate::ops::{self, EvalError, EvalResult};
use crate::semantics;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EngineLimits {
    pub max_depth: usize,
    /// Values yielded per quantifier enumeration.
    pub max_enumeration: usize,
    pub timeout: Duration,
}

impl Default for EngineLimits {
    fn default() -> Self {
        EngineLimits { max_depth: 10_000, max_enumeration: 1_000_000, timeout: Duration::from_secs(30) }
    }
}

/// A top-level call: `pred(inputs.., O1..On)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub pred: String,
    pub inputs: Vec<Value>,
    pub n_outputs: usize,
}

impl Query {
    pub fn call(pred: impl Into<String>, inputs: Vec<Value>, n_outputs: usize) -> Query {
        Query { pred: pred.into(), inputs, n_outputs }
    }
}

/// Values of the query's output positions.
pub type Bindings = Vec<Value>;

const RING: usize = 64;

#[derive(Clone, Copy)]
enum Port {
    Enter,
    Exit,
    Fail,
}

/// State shared by a query and all its sub-solves.
struct Ctx<'p> {
    deadline: Instant,
    steps: Cell<u64>,
    ring: RefCell<VecDeque<(Port, &'p str, usize, usize)>>,
    trace: Option<RefCell<Vec<String>>>,
    payload: Option<Vec<Value>>,
}

impl<'p> Ctx<'p> {
    fn event(&self, port: Port, pred: &'p str, arity: usize, depth: usize) {
        let mut ring = self.ring.borrow_mut();
        if ring.len() == RING {
            ring.pop_front();
        }
        ring.push_back((port, pred, arity, depth));
        if let Some(t) = &self.trace {
            t.borrow_mut().push(format_event(port, pred, arity, depth));
        }
    }

    fn recent(&self) -> Vec<String> {
        self.ring.borrow().iter().map(|(p, n, a, d)| format_event(*p, n, *a, *d)).collect()
    }
}

fn format_event(port: Port, pred: &str, arity: usize, depth: usize) -> String {
    let p = match port {
        Port::Enter => "ENTER",
        Port::Exit => "EXIT",
        Port::Fail => "FAIL",
    };
    format!("{p} {pred}/{arity} depth={depth}")
}

enum Arg {
    In(Value),
    /// Absolute store slot of an unbound caller variable.
    Out(usize),
}

struct CallInfo<'p> {
    pred: &'p Predicate,
    depth: usize,
    base: usize,
    clause: &'p Clause,
    outs: Vec<(usize, usize)>,
}

enum Cont<'p> {
    Done,
    Goals { clause: &'p Clause, idx: usize, base: usize, depth: usize, next: Rc<Cont<'p>> },
    Exit { info: CallInfo<'p>, next: Rc<Cont<'p>> },
}

enum Choice<'p> {
    Clauses { pred: &'p Predicate, next: usize, args: Rc<Vec<Arg>>, depth: usize, after: Rc<Cont<'p>>, trail: usize, store: usize },
    CallFail { pred: &'p Predicate, depth: usize },
}

struct Machine<'p, 'c> {
    prog: &'p LogicProgram,
    limits: &'c EngineLimits,
    ctx: &'c Ctx<'p>,
    store: Vec<Option<Value>>,
    trail: Vec<usize>,
    choices: Vec<Choice<'p>>,
    cont: Rc<Cont<'p>>,
    outputs: Vec<usize>,
    started: bool,
    done: bool,
}

impl<'p, 'c> Machine<'p, 'c> {
    fn new(prog: &'p LogicProgram, limits: &'c EngineLimits, ctx: &'c Ctx<'p>) -> Self {
        Machine {
            prog,
            limits,
            ctx,
            store: Vec::new(),
            trail: Vec::new(),
            choices: Vec::new(),
            cont: Rc::new(Cont::Done),
            outputs: Vec::new(),
            started: false,
            done: false,
        }
    }

    fn resource(&self, code: &'static str, msg: String) -> EvalError {
        let mut e = EvalError::new(code, msg);
        e.trace = self.ctx.recent();
        e
    }

    fn start(&mut self, pred: &str, inputs: Vec<Value>, n_outputs: usize, depth: usize) -> EvalResult<bool> {
        let mut args: Vec<Arg> = inputs.into_iter().map(Arg::In).collect();
        for _ in 0..n_outputs {
            self.store.push(None);
            self.outputs.push(self.store.len() - 1);
            args.push(Arg::Out(self.store.len() - 1));
        }
        let after = Rc::new(Cont::Done);
        let arity = args.len();
        match self.prog.predicate(pred, arity) {
            Some(p) => self.call(p, args, depth, after),
            None => Err(EvalError::new("UNKNOWN_PREDICATE", format!("no predicate {pred}/{arity}"))),
        }
    }

    /// Next solution; `Ok(None)` once exhausted.
    fn next_solution(&mut self, start: impl FnOnce(&mut Self) -> EvalResult<bool>) -> EvalResult<Option<Bindings>> {
        if self.done {
            return Ok(None);
        }
        let forward = if self.started {
            false
        } else {
            self.started = true;
            start(self)?
        };
        let found = self.run(forward);
        match found {
            Ok(true) => Ok(Some(
                self.outputs.iter().map(|&s| self.store[s].clone().expect("output bound at exit")).collect(),
            )),
            Ok(false) => {
                self.done = true;
                Ok(None)
            }
            Err(e) => {
                self.done = true;
                Err(e)
            }
        }
    }

    fn tick(&self) -> EvalResult<()> {
        let n = self.ctx.steps.get() + 1;
        self.ctx.steps.set(n);
        if n.is_multiple_of(1024) && Instant::now() > self.ctx.deadline {
            return Err(self.resource("TIMEOUT", format!("query exceeded {:?}", self.limits.timeout)));
        }
        Ok(())
    }

    fn run(&mut self, mut forward: bool) -> EvalResult<bool> {
        loop {
            self.tick()?;
            if !forward {
                forward = match self.choices.pop() {
                    None => return Ok(false),
                    Some(ch) => self.resume(ch)?,
                };
                continue;
            }
            let cont = self.cont.clone();
            match &*cont {
                Cont::Done => return Ok(true),
                Cont::Goals { clause, idx, base, depth, next } => {
                    if *idx == clause.body.len() {
                        self.cont = next.clone();
                        continue;
                    }
                    let after = Rc::new(Cont::Goals {
                        clause,
                        idx: idx + 1,
                        base: *base,
                        depth: *depth,
                        next: next.clone(),
                    });
                    forward = self.exec(&clause.body[*idx], *base, *depth, after)?;
                }
                Cont::Exit { info, next } => {
                    for &(slot, pos) in &info.outs {
                        let v = self.value(&info.clause.head[pos], info.base).ok_or_else(|| {
                            EvalError::new("READ_MODE", format!("{}: output position {} left unbound", info.pred.name, pos + 1))
                        })?;
                        self.bind(slot, v);
                    }
                    self.ctx.event(Port::Exit, &info.pred.name, info.pred.arity, info.depth);
                    self.cont = next.clone();
                }
            }
        }
    }

    fn undo(&mut self, trail: usize, store: usize) {
        while self.trail.len() > trail {
            let s = self.trail.pop().unwrap();
            if s < self.store.len() {
                self.store[s] = None;
            }
        }
        self.store.truncate(store);
    }

    fn resume(&mut self, ch: Choice<'p>) -> EvalResult<bool> {
        match ch {
            Choice::Clauses { pred, next, args, depth, after, trail, store } => {
                self.undo(trail, store);
                self.try_clauses(pred, next, args, depth, after)
            }
            Choice::CallFail { pred, depth } => {
                self.ctx.event(Port::Fail, &pred.name, pred.arity, depth);
                Ok(false)
            }
        }
    }

    fn call(&mut self, pred: &'p Predicate, args: Vec<Arg>, depth: usize, after: Rc<Cont<'p>>) -> EvalResult<bool> {
        if depth > self.limits.max_depth {
            return Err(self.resource(
                "DEPTH_LIMIT",
                format!("call depth exceeded {} at {}/{}", self.limits.max_depth, pred.name, pred.arity),
            ));
        }
        self.ctx.event(Port::Enter, &pred.name, pred.arity, depth);
        self.choices.push(Choice::CallFail { pred, depth });
        self.try_clauses(pred, 0, Rc::new(args), depth, after)
    }

    fn try_clauses(
        &mut self,
        pred: &'p Predicate,
        start: usize,
        args: Rc<Vec<Arg>>,
        depth: usize,
        after: Rc<Cont<'p>>,
    ) -> EvalResult<bool> {
        for i in start..pred.clauses.len() {
            let clause = &pred.clauses[i];
            let (trail, store) = (self.trail.len(), self.store.len());
            let base = self.store.len();
            self.store.resize(base + clause.n_vars(), None);
            let mut outs = Vec::new();
            let mut ok = true;
            for (pos, (t, a)) in clause.head.iter().zip(args.iter()).enumerate() {
                match a {
                    Arg::In(v) => {
                        if !self.unify(t, v, base) {
                            ok = false;
                            break;
                        }
                    }
                    Arg::Out(slot) => outs.push((*slot, pos)),
                }
            }
            if !ok {
                self.undo(trail, store);
                continue;
            }
            if i + 1 < pred.clauses.len() {
                self.choices.push(Choice::Clauses {
                    pred,
                    next: i + 1,
                    args: args.clone(),
                    depth,
                    after: after.clone(),
                    trail,
                    store,
                });
            }
            let exit = Rc::new(Cont::Exit { info: CallInfo { pred, depth, base, clause, outs }, next: after });
            self.cont = Rc::new(Cont::Goals { clause, idx: 0, base, depth, next: exit });
            return Ok(true);
        }
        Ok(false)
    }

    fn bind(&mut self, slot: usize, v: Value) {
        self.store[slot] = Some(v);
        self.trail.push(slot);
    }

    fn unify(&mut self, t: &Term, v: &Value, base: usize) -> bool {
        match (t, v) {
            (Term::Var(x), v) => {
                let slot = base + *x as usize;
                match &self.store[slot] {
                    Some(bound) => ops::values_equal(bound, v),
                    None => {
                        self.bind(slot, v.clone());
                        true
                    }
                }
            }
            (Term::Val(x), v) => ops::values_equal(x, v),
            (Term::Con(tag, ts), Value::Con(t2, vs)) => {
                tag == t2 && ts.len() == vs.len() && ts.iter().zip(vs).all(|(t, v)| self.unify(t, v, base))
            }
            (Term::Seq(ts), Value::Seq(vs)) => {
                ts.len() == vs.len() && ts.iter().zip(vs).all(|(t, v)| self.unify(t, v, base))
            }
            (Term::Rec(fs), Value::Record(vs)) => fs.iter().all(|(l, t)| match vs.iter().find(|(m, _)| m == l) {
                Some((_, v)) => self.unify(t, v, base),
                None => false,
            }),
            _ => false,
        }
    }

    /// Instantiates a term; `None` if a variable is unbound.
    fn value(&self, t: &Term, base: usize) -> Option<Value> {
        Some(match t {
            Term::Var(x) => self.store[base + *x as usize].clone()?,
            Term::Val(v) => v.clone(),
            Term::Con(tag, ts) => Value::Con(tag.clone(), ts.iter().map(|t| self.value(t, base)).collect::<Option<_>>()?),
            Term::Seq(ts) => Value::Seq(ts.iter().map(|t| self.value(t, base)).collect::<Option<_>>()?),
            Term::Rec(fs) => Value::Record(
                fs.iter().map(|(l, t)| Some((l.clone(), self.value(t, base)?))).collect::<Option<_>>()?,
            ),
        })
    }

    fn ground(&self, t: &Term, base: usize, clause: &Clause) -> EvalResult<Value> {
        self.value(t, base).ok_or_else(|| {
            EvalError::new("READ_MODE", format!("{}: consumed an unbound variable", clause.pred))
        })
    }

    /// Binds `out`, or checks it against an already bound value.
    fn put(&mut self, out: VarId, base: usize, v: Value) -> bool {
        let slot = base + out as usize;
        match &self.store[slot] {
            Some(b) => ops::values_equal(b, &v),
            None => {
                self.bind(slot, v);
                true
            }
        }
    }

    fn exec(&mut self, g: &'p Goal, base: usize, depth: usize, after: Rc<Cont<'p>>) -> EvalResult<bool> {
        let Cont::Goals { clause, .. } = &*after else { unreachable!() };
        let clause: &'p Clause = clause;
        match g {
            Goal::Call { pred, args } => {
                let mut a = Vec::with_capacity(args.len());
                for t in args {
                    match t {
                        Term::Var(x) if self.store[base + *x as usize].is_none() => a.push(Arg::Out(base + *x as usize)),
                        t => a.push(Arg::In(self.ground(t, base, clause)?)),
                    }
                }
                match self.prog.predicate(pred, a.len()) {
                    Some(p) => self.call(p, a, depth + 1, after),
                    None => Ok(false),
                }
            }
            Goal::Eq(l, r) => {
                let ok = match (l, r) {
                    (Term::Var(x), t) | (t, Term::Var(x)) if self.store[base + *x as usize].is_none() => {
                        let v = self.ground(t, base, clause)?;
                        self.bind(base + *x as usize, v);
                        true
                    }
                    _ => ops::values_equal(&self.ground(l, base, clause)?, &self.ground(r, base, clause)?),
                };
                self.cont = after;
                Ok(ok)
            }
            Goal::Guard(t) => {
                let ok = ops::truth(&self.ground(t, base, clause)?)?;
                self.cont = after;
                Ok(ok)
            }
            Goal::Builtin { op, args, out } => {
                let vals = args.iter().map(|t| self.ground(t, base, clause)).collect::<EvalResult<Vec<_>>>()?;
                let res = self.builtin(op, vals)?;
                let ok = match (res, out) {
                    (None, _) => false,
                    (Some(_), None) => true,
                    (Some(v), Some(o)) => self.put(*o, base, v),
                };
                self.cont = after;
                Ok(ok)
            }
            Goal::Quant { symbol, coll, filter, body, out } => {
                let c = self.ground(coll, base, clause)?;
                let v = self.quantifier(*symbol, &c, filter.as_ref(), body, base, depth, clause)?;
                let ok = match v {
                    Some(v) => self.put(*out, base, v),
                    None => false,
                };
                self.cont = after;
                Ok(ok)
            }
        }
    }

    /// `Ok(None)` means the goal fails.
    fn builtin(&self, op: &Builtin, mut a: Vec<Value>) -> EvalResult<Option<Value>> {
        let h = &self.prog.hierarchy;
        Ok(Some(match op {
            Builtin::Bin(op) => ops::binary(*op, &a[0], &a[1])?,
            Builtin::Neg => ops::negate(&a[0])?,
            Builtin::Logic(op) => ops::logical(*op, &a)?,
            Builtin::Construct(tag) => ops::construct(tag, a, &h.schemas)?,
            Builtin::Field(l) => ops::field(&a[0], l, &h.schemas)?,
            Builtin::Index => ops::index(&a[0], &a[1])?,
            Builtin::Fun(f) => ops::builtin_function(f, &a)?,
            Builtin::Range => range_value(&a[0], &a[1])?,
            Builtin::MkSeq => Value::Seq(a),
            Builtin::MkRec(labels) => Value::Record(labels.iter().cloned().zip(a.drain(..)).collect()),
            Builtin::First => return Ok(ops::first(&a[0])),
            Builtin::Next => return Ok(ops::next(&a[0])),
            Builtin::Inside => return Ok(ops::inside(&a[0]).then_some(Value::Bool(true))),
            Builtin::Unit => a.swap_remove(0),
            Builtin::Wire(class) => {
                let payload = self.ctx.payload.as_ref().ok_or_else(|| {
                    EvalError::new("MALFORMED_WIRE", "no wire payload is attached to this query")
                })?;
                let i = match a[0] {
                    Value::Int(i) if i >= 1 => i as usize,
                    _ => return Err(EvalError::new("MALFORMED_WIRE", "bad wire argument index")),
                };
                let v = payload.get(i - 1).ok_or_else(|| {
                    EvalError::new("ARITY_MISMATCH", format!("wire document has no argument {i}"))
                })?;
                let ty = if class == "Seq" { TypeExpr::Named("Seq".into(), vec![semantics::any()]) } else { TypeExpr::named(class) };
                if !h.conforms(v, &ty) {
                    return Err(EvalError::new("CLASS_MISMATCH", format!("wire argument {i} is not a {class}: {v}")));
                }
                v.clone()
            }
            Builtin::Project(t) => semantics::project_component(&a[0], t, h)?,
        }))
    }

    fn check_traversable(&self, v: &Value) -> EvalResult<()> {
        let ok = match v {
            Value::Seq(_) | Value::Str(_) => true,
            Value::Con(tag, _) => tag == ops::RANGE_TAG || self.prog.hierarchy.class_of_tag(tag).is_some_and(|c| self.prog.traversable(c)),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(EvalError::new("NOT_TRAVERSABLE", format!("cannot enumerate {} value {v}", v.kind_name())))
        }
    }

    fn sub(&self) -> Machine<'p, 'c> {
        Machine::new(self.prog, self.limits, self.ctx)
    }

    #[allow(clippy::too_many_arguments)]
    fn quantifier(
        &self,
        symbol: QuantSymbol,
        coll: &Value,
        filter: Option<&Closure>,
        body: &Closure,
        base: usize,
        depth: usize,
        clause: &Clause,
    ) -> EvalResult<Option<Value>> {
        self.check_traversable(coll)?;
        let mut m = self.sub();
        let in_pred = self.prog.predicate(IN, 2).expect("enumeration clauses are predefined");
        let mut elems = Vec::new();
        let c = coll.clone();
        let mut first = Some(move |m: &mut Machine<'p, 'c>| {
            m.store.push(None);
            m.outputs.push(0);
            m.call(in_pred, vec![Arg::In(c), Arg::Out(0)], depth + 1, Rc::new(Cont::Done))
        });
        loop {
            let step = match first.take() {
                Some(f) => m.next_solution(f)?,
                None => m.next_solution(|_| Ok(false))?,
            };
            match step {
                Some(mut b) => {
                    if elems.len() == self.limits.max_enumeration {
                        return Err(self.resource(
                            "ENUMERATION_LIMIT",
                            format!("enumeration exceeded {} values", self.limits.max_enumeration),
                        ));
                    }
                    elems.push(b.pop().unwrap());
                }
                None => break,
            }
        }
        let mut sel = Vec::new();
        for x in elems {
            if let Some(f) = filter {
                match self.closure(f, &x, base, depth, clause)? {
                    None => return Ok(None),
                    Some(b) if !ops::truth(&b)? => continue,
                    Some(_) => {}
                }
            }
            match self.closure(body, &x, base, depth, clause)? {
                None => return Ok(None),
                Some(b) => sel.push((x, b)),
            }
        }
        ops::fold_quantifier(symbol, &sel).map(Some)
    }

    fn closure(&self, cl: &Closure, x: &Value, base: usize, depth: usize, clause: &Clause) -> EvalResult<Option<Value>> {
        let mut inputs = cl.captures.iter().map(|t| self.ground(t, base, clause)).collect::<EvalResult<Vec<_>>>()?;
        inputs.push(x.clone());
        let mut m = self.sub();
        let pred = cl.pred.clone();
        let r = m.next_solution(|m| m.start(&pred, inputs, 1, depth + 1))?;
        Ok(r.map(|mut b| b.pop().unwrap()))
    }
}

fn range_value(lo: &Value, hi: &Value) -> EvalResult<Value> {
    match (lo, hi) {
        (Value::Int(a), Value::Int(b)) => Ok(ops::range(*a, *b)),
        _ => Err(EvalError::new("TYPE_ERROR", format!("range bounds must be integers, got {lo} .. {hi}"))),
    }
}

// ---------------------------------------------------------------------------
// Public API

pub struct Solver<'p> {
    prog: &'p LogicProgram,
    limits: EngineLimits,
    ctx: Ctx<'p>,
}

impl<'p> Solver<'p> {
    pub fn new(prog: &'p LogicProgram, limits: EngineLimits) -> Self {
        let ctx = Ctx {
            deadline: Instant::now() + limits.timeout,
            steps: Cell::new(0),
            ring: RefCell::new(VecDeque::new()),
            trace: None,
            payload: None,
        };
        Solver { prog, limits, ctx }
    }

    /// Records one `ENTER|EXIT|FAIL pred/arity depth=n` line per event.
    pub fn with_trace(mut self) -> Self {
        self.ctx.trace = Some(RefCell::new(Vec::new()));
        self
    }

    /// Arguments read by `wire(I, C)` goals.
    pub fn with_payload(mut self, args: Vec<Value>) -> Self {
        self.ctx.payload = Some(args);
        self
    }

    pub fn trace(&self) -> Vec<String> {
        self.ctx.trace.as_ref().map(|t| t.borrow().clone()).unwrap_or_default()
    }

    /// Lazy stream of solutions of `query`, in depth-first clause order.
    pub fn solve<'s>(&'s self, query: &Query) -> Solutions<'p, 's> {
        Solutions { m: Machine::new(self.prog, &self.limits, &self.ctx), query: Some(query.clone()) }
    }

    /// First solution, if any.
    pub fn first(&self, query: &Query) -> EvalResult<Option<Bindings>> {
        self.solve(query).next().transpose()
    }

    pub fn eval_quantifier(
        &self,
        symbol: QuantSymbol,
        coll: &Value,
        filter: Option<&Closure>,
        body: &Closure,
    ) -> EvalResult<Value> {
        let m = Machine::new(self.prog, &self.limits, &self.ctx);
        let empty = Clause { pred: "eval_quantifier".into(), head: Vec::new(), body: Vec::new(), var_names: Vec::new() };
        match m.quantifier(symbol, coll, filter, body, 0, 0, &empty)? {
            Some(v) => Ok(v),
            None => Err(EvalError::new("CLOSURE_FAILED", "a filter or body closure has no solution")),
        }
    }
}

pub struct Solutions<'p, 's> {
    m: Machine<'p, 's>,
    query: Option<Query>,
}

impl Iterator for Solutions<'_, '_> {
    type Item = EvalResult<Bindings>;

    fn next(&mut self) -> Option<Self::Item> {
        let q = self.query.take();
        let r = self.m.next_solution(|m| {
            let q = q.expect("query consumed once");
            m.start(&q.pred, q.inputs, q.n_outputs, 1)
        });
        r.transpose()
    }
}

/// Convenience: all solutions with default machinery.
pub fn solve(prog: &LogicProgram, query: &Query, limits: EngineLimits) -> EvalResult<Vec<Bindings>> {
    let s = Solver::new(prog, limits);
    s.solve(query).collect()
}

/// Folds a quantifier through the program's enumeration clauses.
pub fn eval_quantifier(
    prog: &LogicProgram,
    symbol: QuantSymbol,
    coll: &Value,
    filter: Option<&Closure>,
    body: &Closure,
    limits: EngineLimits,
) -> EvalResult<Value> {
    Solver::new(prog, limits).eval_quantifier(symbol, coll, filter, body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::translate;
    use crate::semantics::load_spec;

    const POINT: &str = "class Point { case Cartesian(Real, Real) case Polar(Real, Real)
        observer CoordX() : Real rule { call: CoordX(Cartesian(x, y)) post: Result = x } }";

    fn prog(src: &str) -> LogicProgram {
        translate(&load_spec(src).unwrap().0)
    }

    #[test]
    fn coordx_has_one_solution() {
        let p = prog(POINT);
        let q = Query::call("sol-CoordX", vec![Value::con("PointCartesian", vec![Value::Int(7), Value::Int(9)])], 1);
        assert_eq!(solve(&p, &q, EngineLimits::default()).unwrap(), vec![vec![Value::Int(7)]]);
        let q = Query::call("sol-CoordX", vec![Value::con("PointPolar", vec![Value::Int(1), Value::Int(1)])], 1);
        assert!(solve(&p, &q, EngineLimits::default()).unwrap().is_empty());
    }

    #[test]
    fn range_enumerates_in_order() {
        let p = prog("");
        let q = Query::call("in", vec![ops::range(1, 3)], 1);
        let got: Vec<Value> = solve(&p, &q, EngineLimits::default()).unwrap().into_iter().map(|mut b| b.remove(0)).collect();
        assert_eq!(got, vec![Value::Int(1), Value::Int(2), Value::Int(3)]);
    }

    #[test]
    fn depth_limit_is_a_resource_error_with_trace() {
        let p = prog("");
        let q = Query::call("in", vec![ops::range(1, 100)], 1);
        let limits = EngineLimits { max_depth: 10, ..Default::default() };
        let err = solve(&p, &q, limits).unwrap_err();
        assert_eq!(err.code, "DEPTH_LIMIT");
        assert!(err.is_resource() && !err.trace.is_empty());
    }

    #[test]
    fn trace_lines_have_stable_format() {
        let p = prog(POINT);
        let s = Solver::new(&p, EngineLimits::default()).with_trace();
        let q = Query::call("sol-CoordX", vec![Value::con("PointCartesian", vec![Value::Int(7), Value::Int(9)])], 1);
        s.first(&q).unwrap();
        assert_eq!(s.trace(), vec!["ENTER sol-CoordX/2 depth=1", "EXIT sol-CoordX/2 depth=1"]);
    }
}
