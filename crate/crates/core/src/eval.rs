//! Big-step evaluation of specification expressions, straight from the
//! elaborated AST. It serves as the reference the clause translation is
//! checked against, so it mirrors the clause semantics: rules are tried in
//! the same order, a rule applies when its argument patterns match and its
//! (checked) precondition holds, and a function inherited without local
//! rules is evaluated on the receiver projected to the defining ancestor.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::time::Instant;

use crate::ast::*;
use crate::engine::EngineLimits;
use crate::ops::{self, EvalError, EvalResult};
use crate::semantics::{project_to_ancestor, ClassHierarchy, RuleInfo};

pub type Env = BTreeMap<String, Value>;

pub struct Evaluator<'h> {
    pub h: &'h ClassHierarchy,
    limits: EngineLimits,
    deadline: Instant,
    depth: Cell<usize>,
    steps: Cell<u64>,
}

/// Matches ground values against patterns, extending `env`.
pub fn match_pattern(p: &Pattern, v: &Value, env: &mut Env) -> bool {
    match (p, v) {
        (Pattern::Var(x), v) => {
            env.insert(x.clone(), v.clone());
            true
        }
        (Pattern::Literal(l), v) => ops::values_equal(l, v),
        (Pattern::Constructor(tag, ps), Value::Con(t, vs)) => {
            tag == t && ps.len() == vs.len() && ps.iter().zip(vs).all(|(p, v)| match_pattern(p, v, env))
        }
        (Pattern::Record(fs), Value::Record(vs)) => fs.iter().all(|(l, p)| match vs.iter().find(|(m, _)| m == l) {
            Some((_, v)) => match_pattern(p, v, env),
            None => false,
        }),
        _ => false,
    }
}

pub fn match_args(ps: &[Pattern], args: &[Value]) -> Option<Env> {
    if ps.len() != args.len() {
        return None;
    }
    let mut env = Env::new();
    ps.iter().zip(args).all(|(p, v)| match_pattern(p, v, &mut env)).then_some(env)
}

pub fn no_rule(f: &str, args: &[Value]) -> EvalError {
    EvalError::new(
        "NO_APPLICABLE_RULE",
        format!(
            "no rule of `{f}` applies to ({})",
            args.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
        ),
    )
}

impl<'h> Evaluator<'h> {
    pub fn new(h: &'h ClassHierarchy, limits: EngineLimits) -> Self {
        Evaluator { h, deadline: Instant::now() + limits.timeout, limits, depth: Cell::new(0), steps: Cell::new(0) }
    }

    fn tick(&self) -> EvalResult<()> {
        let n = self.steps.get() + 1;
        self.steps.set(n);
        if n.is_multiple_of(1024) && Instant::now() > self.deadline {
            return Err(EvalError::new("TIMEOUT", format!("evaluation exceeded {:?}", self.limits.timeout)));
        }
        Ok(())
    }

    /// The rule used for `f(args)` and its pattern bindings: the first
    /// whose patterns match, after projecting the receiver when the
    /// function is fully inherited. Returns the (possibly projected)
    /// arguments too.
    pub fn matching_rule(&self, f: &str, args: &[Value]) -> Option<(&'h RuleInfo, Env, Vec<Value>)> {
        for ri in self.h.rules.iter().filter(|r| r.rule.fname == f) {
            if let Some(env) = match_args(&ri.rule.args, args) {
                return Some((ri, env, args.to_vec()));
            }
        }
        let projected = self.project_receiver(f, args)?;
        self.matching_rule(f, &projected)
    }

    fn project_receiver(&self, f: &str, args: &[Value]) -> Option<Vec<Value>> {
        let fi = self.h.functions.get(f)?;
        if !fi.dispatch_on_first || args.is_empty() {
            return None;
        }
        let d = self.h.class_of_value(&args[0])?;
        if !self.h.missing.contains(&(f.to_string(), d.to_string())) {
            return None;
        }
        let anc = &self.h.dispatch[&(f.to_string(), d.to_string())];
        let v = project_to_ancestor(&args[0], anc, self.h).ok()?;
        let mut out = args.to_vec();
        out[0] = v;
        Some(out)
    }

    pub fn call(&self, f: &str, args: &[Value]) -> EvalResult<Value> {
        if let Some(b) = ops::BUILTIN_FUNCTIONS.iter().find(|b| **b == f) {
            return ops::builtin_function(b, args);
        }
        let d = self.depth.get() + 1;
        if d > self.limits.max_depth {
            return Err(EvalError::new("DEPTH_LIMIT", format!("call depth exceeded {} at `{f}`", self.limits.max_depth)));
        }
        self.depth.set(d);
        let r = self.call_rules(f, args);
        self.depth.set(d - 1);
        r
    }

    fn call_rules(&self, f: &str, args: &[Value]) -> EvalResult<Value> {
        for ri in self.h.rules_for(f) {
            let Some(sol) = &ri.sol else { continue };
            let Some(env) = match_args(&ri.rule.args, args) else { continue };
            if !ops::truth(&self.eval(&ri.rule.pre.checked_part, &env)?)? {
                continue;
            }
            return self.eval(sol, &env);
        }
        match self.project_receiver(f, args) {
            Some(projected) => self.call_rules(f, &projected),
            None => Err(no_rule(f, args)),
        }
    }

    pub fn eval(&self, e: &Expr, env: &Env) -> EvalResult<Value> {
        self.tick()?;
        let all = |xs: &[Expr]| xs.iter().map(|x| self.eval(x, env)).collect::<EvalResult<Vec<_>>>();
        match e {
            Expr::Lit(v) => Ok(v.clone()),
            Expr::Var(x) => env
                .get(x)
                .cloned()
                .ok_or_else(|| EvalError::new("UNBOUND_VAR", format!("variable `{x}` is not bound"))),
            Expr::ResultVar => env
                .get(RESULT)
                .cloned()
                .ok_or_else(|| EvalError::new("UNBOUND_VAR", "`Result` is not bound here")),
            Expr::Construct(tag, args) => ops::construct(tag, all(args)?, &self.h.schemas),
            Expr::Call(f, args) => self.call(f, &all(args)?),
            Expr::DottedCall(r, f, args) => {
                let mut vs = vec![self.eval(r, env)?];
                vs.extend(all(args)?);
                self.call(f, &vs)
            }
            Expr::QualifiedCall(None, _, f, args) => self.call(f, &all(args)?),
            Expr::QualifiedCall(Some(r), class, f, args) => {
                let recv = project_to_ancestor(&self.eval(r, env)?, class, self.h)?;
                let mut vs = vec![recv];
                vs.extend(all(args)?);
                self.call(f, &vs)
            }
            Expr::Logical(op, args) => ops::logical(*op, &all(args)?),
            Expr::Binary(op, l, r) => ops::binary(*op, &self.eval(l, env)?, &self.eval(r, env)?),
            Expr::Neg(a) => ops::negate(&self.eval(a, env)?),
            Expr::Field(a, l) => ops::field(&self.eval(a, env)?, l, &self.h.schemas),
            Expr::Index(a, i) => ops::index(&self.eval(a, env)?, &self.eval(i, env)?),
            Expr::Range(a, b) => match (self.eval(a, env)?, self.eval(b, env)?) {
                (Value::Int(lo), Value::Int(hi)) => Ok(ops::range(lo, hi)),
                (lo, hi) => Err(EvalError::new("TYPE_ERROR", format!("range bounds must be integers, got {lo} .. {hi}"))),
            },
            Expr::SeqLit(xs) => Ok(Value::Seq(all(xs)?)),
            Expr::RecordLit(fs) => Ok(Value::Record(
                fs.iter().map(|(l, x)| Ok((l.clone(), self.eval(x, env)?))).collect::<EvalResult<_>>()?,
            )),
            Expr::Quant(q) => {
                let coll = self.eval(&q.collection, env)?;
                let elems = self.elements(&coll)?;
                let mut inner = env.clone();
                let mut sel = Vec::new();
                for x in elems {
                    inner.insert(q.bound_var.clone(), x.clone());
                    if !ops::truth(&self.eval(&q.filter, &inner)?)? {
                        continue;
                    }
                    sel.push((x, self.eval(&q.body, &inner)?));
                }
                ops::fold_quantifier(q.symbol, &sel)
            }
        }
    }

    /// Enumeration of a traversable value, in traversal order.
    pub fn elements(&self, v: &Value) -> EvalResult<Vec<Value>> {
        let traversable = match v {
            Value::Con(tag, _) if tag != ops::RANGE_TAG => {
                self.h.class_of_tag(tag).and_then(|c| self.h.classes.get(c)).is_some_and(|c| c.traversable())
            }
            other => ops::builtin_elements(other).is_some(),
        };
        if !traversable {
            return Err(EvalError::new("NOT_TRAVERSABLE", format!("cannot enumerate {} value {v}", v.kind_name())));
        }
        let mut out = Vec::new();
        self.enumerate(v, &mut out)?;
        if out.len() > self.limits.max_enumeration {
            return Err(EvalError::new(
                "ENUMERATION_LIMIT",
                format!("enumeration exceeded {} values", self.limits.max_enumeration),
            ));
        }
        Ok(out)
    }

    fn enumerate(&self, v: &Value, out: &mut Vec<Value>) -> EvalResult<()> {
        self.tick()?;
        if let Some(items) = ops::builtin_elements(v) {
            out.extend(items);
            return Ok(());
        }
        let Value::Con(tag, _) = v else { return Ok(()) };
        let Some(class) = self.h.class_of_tag(tag).and_then(|c| self.h.classes.get(c)) else { return Ok(()) };
        for tv in &class.traversal {
            let mut env = Env::new();
            if !match_pattern(&tv.shape, v, &mut env) {
                continue;
            }
            for (item, coll) in tv.items.iter().zip(&tv.item_is_collection) {
                let iv = self.eval(item, &env)?;
                if *coll {
                    self.enumerate(&iv, out)?;
                } else {
                    out.push(iv);
                }
                if out.len() > self.limits.max_enumeration {
                    return Ok(());
                }
            }
        }
        Ok(())
    }
}

/// Evaluates `e` under `env` with default limits.
pub fn eval_expr(e: &Expr, env: &Env, h: &ClassHierarchy) -> EvalResult<Value> {
    Evaluator::new(h, EngineLimits::default()).eval(e, env)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_expr;
    use crate::semantics::{elaborate_query, load_spec};

    fn run(spec: &str, e: &str) -> EvalResult<Value> {
        let (h, _) = load_spec(spec).unwrap();
        let e = elaborate_query(&h, &parse_expr(e).unwrap()).unwrap();
        eval_expr(&e, &Env::new(), &h)
    }

    #[test]
    fn arithmetic_precedence() {
        assert_eq!(run("", "2 + 3 * 4").unwrap(), Value::Int(14));
    }

    #[test]
    fn constructor_in_class_context() {
        let v = run("class Point { case Cartesian(Real, Real) }", "Cartesian(1, 2.5)").unwrap();
        assert_eq!(v, Value::con("PointCartesian", vec![Value::Real(1.0), Value::Real(2.5)]));
    }

    #[test]
    fn rule_less_function_has_no_applicable_rule() {
        let spec = "class A { case K(Int) observer F() : Int rule { call: F(K(x)) pre: x > 0 sol: x } }";
        assert_eq!(run(spec, "F(K(3))").unwrap(), Value::Int(3));
        assert_eq!(run(spec, "F(K(0))").unwrap_err().code, "NO_APPLICABLE_RULE");
    }
}
