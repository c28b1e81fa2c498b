//! Value-level operations shared by the clause engine, the direct evaluator
//! and the skeleton interpreter, so that all three agree bit for bit.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::ast::{BinOp, LogicOp, QuantSymbol, TypeExpr, Value};

/// Tag of the built-in range class value `lo .. hi`.
pub const RANGE_TAG: &str = "RangeInterval";

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{code}: {message}")]
pub struct EvalError {
    pub code: &'static str,
    pub message: String,
    /// Most recent engine events, oldest first; empty outside the engine.
    pub trace: Vec<String>,
}

impl EvalError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        EvalError { code, message: message.into(), trace: Vec::new() }
    }

    /// Resource exhaustion rather than a domain error.
    pub fn is_resource(&self) -> bool {
        matches!(self.code, "DEPTH_LIMIT" | "ENUMERATION_LIMIT" | "TIMEOUT")
    }
}

pub type EvalResult<T> = Result<T, EvalError>;

fn type_error(what: &str, v: &Value) -> EvalError {
    EvalError::new("TYPE_ERROR", format!("{what} applied to {} value {v}", v.kind_name()))
}

/// Declared layout of one qualified constructor.
#[derive(Clone, Debug, PartialEq)]
pub struct TagSchema {
    pub class: String,
    pub tag: String,
    pub components: Vec<(Option<String>, TypeExpr)>,
}

pub type Schemas = BTreeMap<String, TagSchema>;

pub fn range(lo: i64, hi: i64) -> Value {
    Value::Con(RANGE_TAG.to_string(), vec![Value::Int(lo), Value::Int(hi)])
}

pub fn as_range(v: &Value) -> Option<(i64, i64)> {
    match v {
        Value::Con(t, args) if t == RANGE_TAG => match args.as_slice() {
            [Value::Int(lo), Value::Int(hi)] => Some((*lo, *hi)),
            _ => None,
        },
        _ => None,
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Int(i) => Some(*i as f64),
        Value::Real(r) => Some(*r),
        _ => None,
    }
}

/// Real comparison tolerance: |a-b| <= 1e-9 * max(1, |a|, |b|).
pub fn reals_close(a: f64, b: f64) -> bool {
    if a == b {
        return true;
    }
    if a.is_nan() || b.is_nan() {
        return a.is_nan() && b.is_nan();
    }
    (a - b).abs() <= 1e-9 * 1f64.max(a.abs()).max(b.abs())
}

/// Equality used by `=`: exact except for reals, which use [`reals_close`];
/// an int and a real compare numerically.
pub fn values_equal(a: &Value, b: &Value) -> bool {
    use Value::*;
    match (a, b) {
        (Int(x), Int(y)) => x == y,
        (Real(_), _) | (_, Real(_)) => match (as_f64(a), as_f64(b)) {
            (Some(x), Some(y)) => reals_close(x, y),
            _ => false,
        },
        (Bool(x), Bool(y)) => x == y,
        (Str(x), Str(y)) => x == y,
        (Seq(x), Seq(y)) => x.len() == y.len() && x.iter().zip(y).all(|(p, q)| values_equal(p, q)),
        (Record(x), Record(y)) => {
            x.len() == y.len() && x.iter().zip(y).all(|((l, p), (m, q))| l == m && values_equal(p, q))
        }
        (Con(t, x), Con(u, y)) => {
            t == u && x.len() == y.len() && x.iter().zip(y).all(|(p, q)| values_equal(p, q))
        }
        _ => false,
    }
}

pub fn compare(a: &Value, b: &Value) -> EvalResult<Ordering> {
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok(x.cmp(y)),
        (Value::Str(x), Value::Str(y)) => Ok(x.cmp(y)),
        _ => match (as_f64(a), as_f64(b)) {
            (Some(x), Some(y)) => {
                if reals_close(x, y) {
                    Ok(Ordering::Equal)
                } else {
                    x.partial_cmp(&y).ok_or_else(|| EvalError::new("TYPE_ERROR", "comparison with NaN"))
                }
            }
            _ => Err(EvalError::new(
                "TYPE_ERROR",
                format!("cannot order {} against {}", a.kind_name(), b.kind_name()),
            )),
        },
    }
}

fn overflow(op: BinOp) -> EvalError {
    EvalError::new("INT_OVERFLOW", format!("integer overflow in `{}`", op.symbol()))
}

pub fn binary(op: BinOp, a: &Value, b: &Value) -> EvalResult<Value> {
    use BinOp::*;
    match op {
        Eq => Ok(Value::Bool(values_equal(a, b))),
        Ne => Ok(Value::Bool(!values_equal(a, b))),
        Lt => Ok(Value::Bool(compare(a, b)? == Ordering::Less)),
        Le => Ok(Value::Bool(compare(a, b)? != Ordering::Greater)),
        Gt => Ok(Value::Bool(compare(a, b)? == Ordering::Greater)),
        Ge => Ok(Value::Bool(compare(a, b)? != Ordering::Less)),
        Add | Sub | Mul | Div => arith(op, a, b),
    }
}

fn arith(op: BinOp, a: &Value, b: &Value) -> EvalResult<Value> {
    if let (Value::Int(x), Value::Int(y)) = (a, b) {
        let r = match op {
            BinOp::Add => x.checked_add(*y),
            BinOp::Sub => x.checked_sub(*y),
            BinOp::Mul => x.checked_mul(*y),
            _ => {
                if *y == 0 {
                    return Err(EvalError::new("DIVISION_BY_ZERO", "integer division by zero"));
                }
                x.checked_div(*y)
            }
        };
        return r.map(Value::Int).ok_or_else(|| overflow(op));
    }
    if op == BinOp::Add {
        match (a, b) {
            (Value::Str(x), Value::Str(y)) => return Ok(Value::Str(format!("{x}{y}"))),
            (Value::Seq(x), Value::Seq(y)) => {
                return Ok(Value::Seq(x.iter().chain(y).cloned().collect()));
            }
            _ => {}
        }
    }
    let (Some(x), Some(y)) = (as_f64(a), as_f64(b)) else {
        let bad = if as_f64(a).is_none() { a } else { b };
        return Err(type_error(&format!("`{}`", op.symbol()), bad));
    };
    Ok(Value::Real(match op {
        BinOp::Add => x + y,
        BinOp::Sub => x - y,
        BinOp::Mul => x * y,
        _ => x / y,
    }))
}

pub fn negate(v: &Value) -> EvalResult<Value> {
    match v {
        Value::Int(i) => i.checked_neg().map(Value::Int).ok_or_else(|| overflow(BinOp::Sub)),
        Value::Real(r) => Ok(Value::Real(-r)),
        other => Err(type_error("unary `-`", other)),
    }
}

pub fn truth(v: &Value) -> EvalResult<bool> {
    v.as_bool().ok_or_else(|| EvalError::new("NOT_BOOLEAN", format!("expected a boolean, found {v}")))
}

/// Strict logical operators over already-evaluated operands.
pub fn logical(op: LogicOp, args: &[Value]) -> EvalResult<Value> {
    let bs = args.iter().map(truth).collect::<EvalResult<Vec<bool>>>()?;
    let r = match (op, bs.as_slice()) {
        (LogicOp::Not, [a]) => !a,
        (LogicOp::And, _) => bs.iter().all(|b| *b),
        (LogicOp::Or, _) => bs.iter().any(|b| *b),
        (LogicOp::Implies, [a, b]) => !a || *b,
        (LogicOp::Iff, [a, b]) => a == b,
        _ => return Err(EvalError::new("ARITY", format!("`{}` with {} operands", op.name(), bs.len()))),
    };
    Ok(Value::Bool(r))
}

/// Labelled access: records directly, constructor values through their
/// labelled components or through a single record component.
pub fn field(v: &Value, label: &str, schemas: &Schemas) -> EvalResult<Value> {
    match v {
        Value::Record(fs) => fs
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.clone())
            .ok_or_else(|| EvalError::new("UNKNOWN_FIELD", format!("record {v} has no field `{label}`"))),
        Value::Con(tag, args) => {
            if let Some(s) = schemas.get(tag) {
                if let Some(i) = s.components.iter().position(|(l, _)| l.as_deref() == Some(label)) {
                    if let Some(a) = args.get(i) {
                        return Ok(a.clone());
                    }
                }
            }
            match args.as_slice() {
                [inner @ Value::Record(_)] => field(inner, label, schemas),
                _ => Err(EvalError::new("UNKNOWN_FIELD", format!("`{tag}` value has no field `{label}`"))),
            }
        }
        other => Err(type_error(&format!("field `.{label}`"), other)),
    }
}

/// 1-based indexing into sequences and strings.
pub fn index(v: &Value, i: &Value) -> EvalResult<Value> {
    let Value::Int(i) = i else { return Err(type_error("index", i)) };
    let out_of_range = |len: usize| {
        EvalError::new("INDEX_OUT_OF_RANGE", format!("index {i} outside 1..{len}"))
    };
    match v {
        Value::Seq(items) => {
            if *i < 1 || *i as usize > items.len() {
                return Err(out_of_range(items.len()));
            }
            Ok(items[*i as usize - 1].clone())
        }
        Value::Str(s) => {
            let n = s.chars().count();
            if *i < 1 || *i as usize > n {
                return Err(out_of_range(n));
            }
            Ok(Value::Str(s.chars().nth(*i as usize - 1).unwrap().to_string()))
        }
        other => Err(type_error("indexing", other)),
    }
}

pub fn length(v: &Value) -> EvalResult<Value> {
    match v {
        Value::Seq(items) => Ok(Value::Int(items.len() as i64)),
        Value::Str(s) => Ok(Value::Int(s.chars().count() as i64)),
        other => match as_range(other) {
            Some((lo, hi)) => Ok(Value::Int((hi - lo + 1).max(0))),
            None => Err(type_error("length", other)),
        },
    }
}

pub const BUILTIN_FUNCTIONS: &[&str] = &["length", "sqrt", "sqr", "abs"];

pub fn builtin_function(name: &str, args: &[Value]) -> EvalResult<Value> {
    let [a] = args else {
        return Err(EvalError::new("ARITY", format!("`{name}` takes one argument, given {}", args.len())));
    };
    match name {
        "length" => length(a),
        "sqrt" => as_f64(a).map(|x| Value::Real(x.sqrt())).ok_or_else(|| type_error("sqrt", a)),
        "sqr" => binary(BinOp::Mul, a, a),
        "abs" => match a {
            Value::Int(i) => i.checked_abs().map(Value::Int).ok_or_else(|| overflow(BinOp::Sub)),
            Value::Real(r) => Ok(Value::Real(r.abs())),
            other => Err(type_error("abs", other)),
        },
        _ => Err(EvalError::new("UNKNOWN_FUNCTION", format!("no builtin `{name}`"))),
    }
}

/// Converts ints to reals wherever the declared type asks for a real.
pub fn coerce(ty: &TypeExpr, v: Value) -> Value {
    match (ty, v) {
        (TypeExpr::Named(n, _), Value::Int(i)) if n == "Real" => Value::Real(i as f64),
        (TypeExpr::Named(n, args), Value::Seq(items)) if n == "Seq" && args.len() == 1 => {
            Value::Seq(items.into_iter().map(|x| coerce(&args[0], x)).collect())
        }
        (TypeExpr::Record(fts), Value::Record(fs)) => Value::Record(
            fs.into_iter()
                .map(|(l, v)| match fts.iter().find(|(m, _)| *m == l) {
                    Some((_, t)) => {
                        let v = coerce(t, v);
                        (l, v)
                    }
                    None => (l, v),
                })
                .collect(),
        ),
        (_, v) => v,
    }
}

/// Builds a constructor value. A positional argument list over an
/// alternative whose only component is a record fills that record's fields.
pub fn construct(tag: &str, args: Vec<Value>, schemas: &Schemas) -> EvalResult<Value> {
    if tag == RANGE_TAG {
        return Ok(Value::Con(tag.to_string(), args));
    }
    let Some(schema) = schemas.get(tag) else {
        return Err(EvalError::new("UNKNOWN_CONSTRUCTOR", format!("no constructor `{tag}`")));
    };
    let comps = &schema.components;
    let args = match (comps.as_slice(), args.as_slice()) {
        ([(_, TypeExpr::Record(_))], [Value::Record(_)]) => args,
        ([(_, TypeExpr::Record(fields))], _) if args.len() == fields.len() => {
            vec![Value::Record(fields.iter().map(|(l, _)| l.clone()).zip(args).collect())]
        }
        _ => args,
    };
    if args.len() != comps.len() {
        return Err(EvalError::new(
            "ARITY_MISMATCH",
            format!("`{tag}` expects {} components, given {}", comps.len(), args.len()),
        ));
    }
    let args = args.into_iter().zip(comps).map(|(v, (_, t))| coerce(t, v)).collect();
    Ok(Value::Con(tag.to_string(), args))
}

/// One enumerated element with its body value, for elements whose filter held.
pub type Selected = (Value, Value);

/// Folds a quantifier over the filtered elements in traversal order; `sel`
/// pairs each element whose filter held with its body value.
pub fn fold_quantifier(symbol: QuantSymbol, sel: &[Selected]) -> EvalResult<Value> {
    use QuantSymbol::*;
    let bodies = || sel.iter().map(|(_, b)| b);
    match symbol {
        Exists => Ok(Value::Bool(bodies().map(truth).collect::<EvalResult<Vec<_>>>()?.into_iter().any(|b| b))),
        Forall => Ok(Value::Bool(bodies().map(truth).collect::<EvalResult<Vec<_>>>()?.into_iter().all(|b| b))),
        // foldr: x1 + (x2 + (... + seed))
        Sum => sel.iter().rev().try_fold(Value::Int(0), |acc, (_, b)| binary(BinOp::Add, b, &acc)),
        Product => sel.iter().rev().try_fold(Value::Int(1), |acc, (_, b)| binary(BinOp::Mul, b, &acc)),
        Count => {
            let mut n = 0i64;
            for b in bodies() {
                if truth(b)? {
                    n += 1;
                }
            }
            Ok(Value::Int(n))
        }
        Select => {
            for (x, b) in sel {
                if truth(b)? {
                    return Ok(x.clone());
                }
            }
            Err(EvalError::new("EMPTY_SELECTION", "no element satisfies the selection"))
        }
        Max | Min | Maximizer | Minimizer => {
            let want = if matches!(symbol, Max | Maximizer) { Ordering::Greater } else { Ordering::Less };
            let mut best: Option<&Selected> = None;
            for s in sel {
                best = match best {
                    None => Some(s),
                    Some(cur) if compare(&s.1, &cur.1)? == want => Some(s),
                    keep => keep,
                };
            }
            let (x, b) = best.ok_or_else(|| {
                EvalError::new("EMPTY_EXTREMUM", format!("`{}` over an empty collection", symbol.keyword()))
            })?;
            Ok(if matches!(symbol, Max | Min) { b.clone() } else { x.clone() })
        }
        Filter => {
            let mut kept = Vec::new();
            for (x, b) in sel {
                if !truth(b)? {
                    kept.push(x.clone());
                }
            }
            Ok(Value::Seq(kept))
        }
        Map | SeqCons => Ok(Value::Seq(bodies().cloned().collect())),
    }
}

/// Elements of a built-in traversable (sequence, string, range), or `None`.
pub fn builtin_elements(v: &Value) -> Option<Vec<Value>> {
    match v {
        Value::Seq(items) => Some(items.clone()),
        Value::Str(s) => Some(s.chars().map(|c| Value::Str(c.to_string())).collect()),
        other => as_range(other).map(|(lo, hi)| (lo..=hi).map(Value::Int).collect()),
    }
}

/// `first/next/inside`, the simple-enumeration triple.
pub fn first(v: &Value) -> Option<Value> {
    match v {
        Value::Seq(items) => items.first().cloned(),
        Value::Str(s) => s.chars().next().map(|c| Value::Str(c.to_string())),
        other => as_range(other).and_then(|(lo, hi)| (lo <= hi).then_some(Value::Int(lo))),
    }
}

pub fn next(v: &Value) -> Option<Value> {
    match v {
        Value::Seq(items) if !items.is_empty() => Some(Value::Seq(items[1..].to_vec())),
        Value::Str(s) if !s.is_empty() => Some(Value::Str(s.chars().skip(1).collect())),
        other => as_range(other).and_then(|(lo, hi)| (lo <= hi).then(|| range(lo + 1, hi))),
    }
}

pub fn inside(v: &Value) -> bool {
    first(v).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_is_relative() {
        assert!(reals_close(1e12, 1e12 + 1.0));
        assert!(!reals_close(1.0, 1.0 + 1e-6));
        assert!(values_equal(&Value::Int(15), &Value::Real(15.0)));
    }

    #[test]
    fn integer_division_truncates_and_overflow_is_an_error() {
        assert_eq!(binary(BinOp::Div, &Value::Int(-7), &Value::Int(2)).unwrap(), Value::Int(-3));
        assert_eq!(binary(BinOp::Add, &Value::Int(i64::MAX), &Value::Int(1)).unwrap_err().code, "INT_OVERFLOW");
        assert_eq!(binary(BinOp::Div, &Value::Int(1), &Value::Int(0)).unwrap_err().code, "DIVISION_BY_ZERO");
    }

    #[test]
    fn folds_seed_on_empty_input() {
        assert_eq!(fold_quantifier(QuantSymbol::Forall, &[]).unwrap(), Value::Bool(true));
        assert_eq!(fold_quantifier(QuantSymbol::Exists, &[]).unwrap(), Value::Bool(false));
        assert_eq!(fold_quantifier(QuantSymbol::Sum, &[]).unwrap(), Value::Int(0));
        assert_eq!(fold_quantifier(QuantSymbol::Max, &[]).unwrap_err().code, "EMPTY_EXTREMUM");
    }

    #[test]
    fn maximizer_breaks_ties_by_first_occurrence() {
        let sel = vec![
            (Value::Int(1), Value::Int(5)),
            (Value::Int(2), Value::Int(7)),
            (Value::Int(3), Value::Int(7)),
        ];
        assert_eq!(fold_quantifier(QuantSymbol::Maximizer, &sel).unwrap(), Value::Int(2));
        assert_eq!(fold_quantifier(QuantSymbol::Max, &sel).unwrap(), Value::Int(7));
    }

    #[test]
    fn simple_enumeration_triple_over_a_range() {
        let r = range(1, 2);
        assert_eq!(first(&r), Some(Value::Int(1)));
        let r2 = next(&r).unwrap();
        assert_eq!(first(&r2), Some(Value::Int(2)));
        assert!(!inside(&next(&r2).unwrap()));
    }
}
