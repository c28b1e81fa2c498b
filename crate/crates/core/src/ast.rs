//! Abstract syntax of specifications and the runtime values they denote.

use std::fmt;

use crate::diag::SourceSpan;

/// Reserved identifier standing for a function's computed value.
pub const RESULT: &str = "Result";

/// Source position attached to an AST node.
///
/// Positions never take part in equality, so two ASTs parsed from texts that
/// differ only in layout compare equal.
#[derive(Clone, Debug, Default)]
pub struct Origin(pub Option<SourceSpan>);

impl PartialEq for Origin {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Origin {
    pub fn none() -> Self {
        Origin(None)
    }
}

/// Globally unique constructor name: the class name followed by the tag.
pub fn qualify_tag(class: &str, tag: &str) -> String {
    format!("{class}{tag}")
}

#[derive(Clone, Debug)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
    Str(String),
    Seq(Vec<Value>),
    /// Labelled fields in declaration order.
    Record(Vec<(String, Value)>),
    /// Constructor-tagged tuple; the tag is already qualified.
    Con(String, Vec<Value>),
}

// Reals compare by bit pattern so that equality stays reflexive for NaN.
impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        use Value::*;
        match (self, other) {
            (Int(a), Int(b)) => a == b,
            (Real(a), Real(b)) => a.to_bits() == b.to_bits(),
            (Bool(a), Bool(b)) => a == b,
            (Str(a), Str(b)) => a == b,
            (Seq(a), Seq(b)) => a == b,
            (Record(a), Record(b)) => a == b,
            (Con(t, a), Con(u, b)) => t == u && a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Value {
    pub fn str(s: impl Into<String>) -> Value {
        Value::Str(s.into())
    }

    pub fn con(tag: impl Into<String>, args: Vec<Value>) -> Value {
        Value::Con(tag.into(), args)
    }

    pub fn record<I, S>(fields: I) -> Value
    where
        I: IntoIterator<Item = (S, Value)>,
        S: Into<String>,
    {
        Value::Record(fields.into_iter().map(|(l, v)| (l.into(), v)).collect())
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Real(_) => "real",
            Value::Bool(_) => "bool",
            Value::Str(_) => "str",
            Value::Seq(_) => "seq",
            Value::Record(_) => "rec",
            Value::Con(..) => "con",
        }
    }

    /// Nesting depth; primitives have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            Value::Seq(items) | Value::Con(_, items) => {
                1 + items.iter().map(Value::depth).max().unwrap_or(0)
            }
            Value::Record(fields) => 1 + fields.iter().map(|(_, v)| v.depth()).max().unwrap_or(0),
            _ => 1,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r:?}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) => write!(f, "{s:?}"),
            Value::Seq(items) => {
                write!(f, "[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{v}")?;
                }
                write!(f, "]")
            }
            Value::Record(fields) => {
                write!(f, "{{")?;
                for (i, (l, v)) in fields.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{l}: {v}")?;
                }
                write!(f, "}}")
            }
            Value::Con(tag, args) => {
                write!(f, "{tag}")?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, v) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{v}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TypeExpr {
    /// A class, a built-in type (`Int`, `Nat`, `Real`, `Bool`, `String`, `Seq`, `Range`)
    /// or a type parameter, possibly applied to arguments.
    Named(String, Vec<TypeExpr>),
    Record(Vec<(String, TypeExpr)>),
}

impl TypeExpr {
    pub fn named(name: &str) -> TypeExpr {
        TypeExpr::Named(name.to_string(), Vec::new())
    }

    pub fn head(&self) -> Option<&str> {
        match self {
            TypeExpr::Named(n, _) => Some(n),
            TypeExpr::Record(_) => None,
        }
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::Named(n, args) => {
                write!(f, "{n}")?;
                if !args.is_empty() {
                    write!(f, "(")?;
                    for (i, a) in args.iter().enumerate() {
                        if i > 0 {
                            write!(f, ", ")?;
                        }
                        write!(f, "{a}")?;
                    }
                    write!(f, ")")?;
                }
                Ok(())
            }
            TypeExpr::Record(fields) => {
                write!(f, "{{")?;
                for (i, (l, t)) in fields.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{l}: {t}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

/// One alternative representation of a class.
#[derive(Clone, Debug, PartialEq)]
pub struct AttrConstructor {
    pub tag: String,
    pub components: Vec<(Option<String>, TypeExpr)>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum OpKind {
    Constructor,
    Observer,
    Modifier,
    Friend,
}

impl OpKind {
    pub fn keyword(self) -> &'static str {
        match self {
            OpKind::Constructor => "constructor",
            OpKind::Observer => "observer",
            OpKind::Modifier => "modifier",
            OpKind::Friend => "friend",
        }
    }
}

/// Operation signature as written in the class body.
///
/// `arg_types` never includes the implicit receiver of observers and
/// modifiers; [`OpDecl::params`] adds it.
#[derive(Clone, Debug, PartialEq)]
pub struct OpDecl {
    pub kind: OpKind,
    pub name: String,
    pub arg_types: Vec<TypeExpr>,
    pub result_type: Option<TypeExpr>,
}

impl OpDecl {
    /// Full parameter list of the underlying function.
    pub fn params(&self, class: &TypeExpr) -> Vec<TypeExpr> {
        match self.kind {
            OpKind::Observer | OpKind::Modifier => {
                let mut p = vec![class.clone()];
                p.extend(self.arg_types.iter().cloned());
                p
            }
            OpKind::Constructor | OpKind::Friend => self.arg_types.clone(),
        }
    }

    pub fn result(&self, class: &TypeExpr) -> Option<TypeExpr> {
        match self.kind {
            OpKind::Constructor | OpKind::Modifier => Some(class.clone()),
            OpKind::Observer | OpKind::Friend => self.result_type.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckModeKind {
    Full,
    ConjunctOnly,
    Approximation,
}

impl CheckModeKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckModeKind::Full => "full",
            CheckModeKind::ConjunctOnly => "conjunct_only",
            CheckModeKind::Approximation => "approximation",
        }
    }
}

/// A pre- or postcondition together with how much of it is checkable.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckMode {
    pub mode: CheckModeKind,
    pub checked_part: Expr,
    /// Present exactly when `mode` is not `Full`.
    pub unchecked_part: Option<Expr>,
}

impl CheckMode {
    pub fn full(e: Expr) -> CheckMode {
        CheckMode { mode: CheckModeKind::Full, checked_part: e, unchecked_part: None }
    }

    pub fn trivial() -> CheckMode {
        CheckMode::full(Expr::Lit(Value::Bool(true)))
    }

    pub fn is_trivially_true(&self) -> bool {
        self.mode == CheckModeKind::Full && self.checked_part == Expr::Lit(Value::Bool(true))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Pattern {
    Var(String),
    /// Tag as written (unqualified).
    Constructor(String, Vec<Pattern>),
    Literal(Value),
    Record(Vec<(String, Pattern)>),
}

impl Pattern {
    pub fn vars(&self, out: &mut Vec<String>) {
        match self {
            Pattern::Var(v) => out.push(v.clone()),
            Pattern::Constructor(_, ps) => ps.iter().for_each(|p| p.vars(out)),
            Pattern::Literal(_) => {}
            Pattern::Record(fs) => fs.iter().for_each(|(_, p)| p.vars(out)),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionRule {
    pub class: String,
    pub fname: String,
    pub args: Vec<Pattern>,
    pub pre: CheckMode,
    pub post: CheckMode,
    pub sol: Option<Expr>,
    pub origin: Origin,
}

impl FunctionRule {
    pub fn arg_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.args.iter().for_each(|p| p.vars(&mut out));
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraversalRule {
    pub shape: Pattern,
    pub items: Vec<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassDef {
    pub name: String,
    pub type_params: Vec<String>,
    pub parents: Vec<String>,
    pub alternatives: Vec<AttrConstructor>,
    pub traversal_rules: Vec<TraversalRule>,
    pub rules: Vec<FunctionRule>,
    pub op_decls: Vec<OpDecl>,
    pub origin: Origin,
}

impl ClassDef {
    pub fn new(name: &str) -> ClassDef {
        ClassDef {
            name: name.to_string(),
            type_params: Vec::new(),
            parents: Vec::new(),
            alternatives: Vec::new(),
            traversal_rules: Vec::new(),
            rules: Vec::new(),
            op_decls: Vec::new(),
            origin: Origin::none(),
        }
    }

    /// The class viewed as a type, parameters left abstract.
    pub fn self_type(&self) -> TypeExpr {
        TypeExpr::Named(
            self.name.clone(),
            self.type_params.iter().map(|p| TypeExpr::named(p)).collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LogicOp {
    And,
    Or,
    Not,
    Implies,
    Iff,
}

impl LogicOp {
    pub fn name(self) -> &'static str {
        match self {
            LogicOp::And => "and",
            LogicOp::Or => "or",
            LogicOp::Not => "not",
            LogicOp::Implies => "implies",
            LogicOp::Iff => "iff",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BinOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BinOp::Eq => "eq",
            BinOp::Ne => "ne",
            BinOp::Lt => "lt",
            BinOp::Le => "le",
            BinOp::Gt => "gt",
            BinOp::Ge => "ge",
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
        }
    }

    pub fn is_relational(self) -> bool {
        matches!(self, BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge)
    }
}

/// The thirteen quantifier symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QuantSymbol {
    Exists,
    Forall,
    Sum,
    Product,
    Count,
    Select,
    Max,
    Maximizer,
    Min,
    Minimizer,
    Filter,
    Map,
    SeqCons,
}

impl QuantSymbol {
    pub const ALL: [QuantSymbol; 13] = [
        QuantSymbol::Exists,
        QuantSymbol::Forall,
        QuantSymbol::Sum,
        QuantSymbol::Product,
        QuantSymbol::Count,
        QuantSymbol::Select,
        QuantSymbol::Max,
        QuantSymbol::Maximizer,
        QuantSymbol::Min,
        QuantSymbol::Minimizer,
        QuantSymbol::Filter,
        QuantSymbol::Map,
        QuantSymbol::SeqCons,
    ];

    /// Keyword used in source text.
    pub fn keyword(self) -> &'static str {
        match self {
            QuantSymbol::Exists => "exists",
            QuantSymbol::Forall => "forall",
            QuantSymbol::Sum => "sum",
            QuantSymbol::Product => "product",
            QuantSymbol::Count => "count",
            QuantSymbol::Select => "select",
            QuantSymbol::Max => "max",
            QuantSymbol::Maximizer => "argmax",
            QuantSymbol::Min => "min",
            QuantSymbol::Minimizer => "argmin",
            QuantSymbol::Filter => "filter",
            QuantSymbol::Map => "map",
            QuantSymbol::SeqCons => "seqof",
        }
    }

    /// Suffix of the `quan-` predicate in translated programs.
    pub fn pred_suffix(self) -> &'static str {
        match self {
            QuantSymbol::Exists => "exists",
            QuantSymbol::Forall => "forall",
            QuantSymbol::Sum => "sum",
            QuantSymbol::Product => "product",
            QuantSymbol::Count => "count",
            QuantSymbol::Select => "select",
            QuantSymbol::Max => "max",
            QuantSymbol::Maximizer => "maximizer",
            QuantSymbol::Min => "min",
            QuantSymbol::Minimizer => "minimizer",
            QuantSymbol::Filter => "filter",
            QuantSymbol::Map => "map",
            QuantSymbol::SeqCons => "seq",
        }
    }

    pub fn from_keyword(s: &str) -> Option<QuantSymbol> {
        QuantSymbol::ALL.into_iter().find(|q| q.keyword() == s)
    }

    pub fn from_pred_suffix(s: &str) -> Option<QuantSymbol> {
        QuantSymbol::ALL.into_iter().find(|q| q.pred_suffix() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantExpr {
    pub symbol: QuantSymbol,
    pub bound_var: String,
    pub collection: Box<Expr>,
    pub filter: Box<Expr>,
    pub body: Box<Expr>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Lit(Value),
    Var(String),
    ResultVar,
    /// Constructor application; the tag is unqualified and resolved against
    /// the class context at translation or evaluation time.
    Construct(String, Vec<Expr>),
    Call(String, Vec<Expr>),
    DottedCall(Box<Expr>, String, Vec<Expr>),
    /// `recv.C:f(args)` or, without a receiver, `C:f(args)`.
    QualifiedCall(Option<Box<Expr>>, String, String, Vec<Expr>),
    Logical(LogicOp, Vec<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Quant(QuantExpr),
    Field(Box<Expr>, String),
    Index(Box<Expr>, Box<Expr>),
    Range(Box<Expr>, Box<Expr>),
    SeqLit(Vec<Expr>),
    RecordLit(Vec<(String, Expr)>),
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(name.to_string())
    }

    pub fn bool(b: bool) -> Expr {
        Expr::Lit(Value::Bool(b))
    }

    pub fn int(i: i64) -> Expr {
        Expr::Lit(Value::Int(i))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    pub fn and(l: Expr, r: Expr) -> Expr {
        Expr::Logical(LogicOp::And, vec![l, r])
    }

    /// Immediate sub-expressions, in evaluation order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Lit(_) | Expr::Var(_) | Expr::ResultVar => Vec::new(),
            Expr::Construct(_, args) | Expr::Call(_, args) | Expr::SeqLit(args) => {
                args.iter().collect()
            }
            Expr::Logical(_, args) => args.iter().collect(),
            Expr::DottedCall(r, _, args) => std::iter::once(&**r).chain(args.iter()).collect(),
            Expr::QualifiedCall(r, _, _, args) => r.iter().map(|b| &**b).chain(args.iter()).collect(),
            Expr::Binary(_, l, r) | Expr::Index(l, r) | Expr::Range(l, r) => vec![l, r],
            Expr::Neg(e) | Expr::Field(e, _) => vec![e],
            Expr::Quant(q) => vec![&q.collection, &q.filter, &q.body],
            Expr::RecordLit(fs) => fs.iter().map(|(_, e)| e).collect(),
        }
    }

    pub fn mentions_result(&self) -> bool {
        matches!(self, Expr::ResultVar) || self.children().into_iter().any(Expr::mentions_result)
    }

    /// Free variables in order of first occurrence (quantifier-bound names excluded).
    pub fn free_vars(&self) -> Vec<String> {
        fn go(e: &Expr, bound: &mut Vec<String>, out: &mut Vec<String>) {
            match e {
                Expr::Var(v) => {
                    if !bound.contains(v) && !out.contains(v) {
                        out.push(v.clone());
                    }
                }
                Expr::Quant(q) => {
                    go(&q.collection, bound, out);
                    bound.push(q.bound_var.clone());
                    go(&q.filter, bound, out);
                    go(&q.body, bound, out);
                    bound.pop();
                }
                other => {
                    for c in other.children() {
                        go(c, bound, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Applies `f` to every node, outermost first.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Rebuilds the tree bottom-up through `f`.
    pub fn rewrite(self, f: &mut dyn FnMut(Expr) -> Expr) -> Expr {
        let rebuilt = match self {
            Expr::Construct(t, args) => Expr::Construct(t, rw_all(args, f)),
            Expr::Call(n, args) => Expr::Call(n, rw_all(args, f)),
            Expr::DottedCall(r, n, args) => Expr::DottedCall(Box::new(r.rewrite(f)), n, rw_all(args, f)),
            Expr::QualifiedCall(r, c, n, args) => {
                Expr::QualifiedCall(r.map(|r| Box::new(r.rewrite(f))), c, n, rw_all(args, f))
            }
            Expr::Logical(op, args) => Expr::Logical(op, rw_all(args, f)),
            Expr::Binary(op, l, r) => Expr::Binary(op, Box::new(l.rewrite(f)), Box::new(r.rewrite(f))),
            Expr::Neg(e) => Expr::Neg(Box::new(e.rewrite(f))),
            Expr::Quant(q) => Expr::Quant(QuantExpr {
                symbol: q.symbol,
                bound_var: q.bound_var,
                collection: Box::new(q.collection.rewrite(f)),
                filter: Box::new(q.filter.rewrite(f)),
                body: Box::new(q.body.rewrite(f)),
            }),
            Expr::Field(e, l) => Expr::Field(Box::new(e.rewrite(f)), l),
            Expr::Index(a, b) => Expr::Index(Box::new(a.rewrite(f)), Box::new(b.rewrite(f))),
            Expr::Range(a, b) => Expr::Range(Box::new(a.rewrite(f)), Box::new(b.rewrite(f))),
            Expr::SeqLit(es) => Expr::SeqLit(rw_all(es, f)),
            Expr::RecordLit(fs) => {
                Expr::RecordLit(fs.into_iter().map(|(l, e)| (l, e.rewrite(f))).collect())
            }
            leaf => leaf,
        };
        f(rebuilt)
    }
}

fn rw_all(es: Vec<Expr>, f: &mut dyn FnMut(Expr) -> Expr) -> Vec<Expr> {
    es.into_iter().map(|e| e.rewrite(f)).collect()
}

fn join(f: &mut fmt::Formatter<'_>, xs: &[Expr]) -> fmt::Result {
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{x}")?;
    }
    Ok(())
}

/// Source-like rendering; compound operands are parenthesized.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let atom = |f: &mut fmt::Formatter<'_>, e: &Expr| match e {
            Expr::Binary(..) | Expr::Logical(..) | Expr::Quant(_) | Expr::Range(..) => write!(f, "({e})"),
            _ => write!(f, "{e}"),
        };
        match self {
            Expr::Lit(v) => write!(f, "{v}"),
            Expr::Var(x) => write!(f, "{x}"),
            Expr::ResultVar => write!(f, "{RESULT}"),
            Expr::Construct(t, args) | Expr::Call(t, args) => {
                write!(f, "{t}(")?;
                join(f, args)?;
                write!(f, ")")
            }
            Expr::DottedCall(r, m, args) => {
                atom(f, r)?;
                write!(f, ".{m}(")?;
                join(f, args)?;
                write!(f, ")")
            }
            Expr::QualifiedCall(r, c, m, args) => {
                if let Some(r) = r {
                    atom(f, r)?;
                    write!(f, ".")?;
                }
                write!(f, "{c}:{m}(")?;
                join(f, args)?;
                write!(f, ")")
            }
            Expr::Logical(LogicOp::Not, args) => {
                write!(f, "not ")?;
                atom(f, &args[0])
            }
            Expr::Logical(op, args) => {
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, " {} ", op.name())?;
                    }
                    atom(f, a)?;
                }
                Ok(())
            }
            Expr::Binary(op, l, r) => {
                atom(f, l)?;
                write!(f, " {} ", op.symbol())?;
                atom(f, r)
            }
            Expr::Neg(a) => {
                write!(f, "-")?;
                atom(f, a)
            }
            Expr::Quant(q) => write!(f, "{} {} in {} | {} . {}", q.symbol.keyword(), q.bound_var, q.collection, q.filter, q.body),
            Expr::Field(a, l) => {
                atom(f, a)?;
                write!(f, ".{l}")
            }
            Expr::Index(a, i) => {
                atom(f, a)?;
                write!(f, "[{i}]")
            }
            Expr::Range(a, b) => write!(f, "{a}..{b}"),
            Expr::SeqLit(xs) => {
                write!(f, "[")?;
                join(f, xs)?;
                write!(f, "]")
            }
            Expr::RecordLit(fs) => {
                write!(f, "{{")?;
                for (i, (l, x)) in fs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{l}: {x}")?;
                }
                write!(f, "}}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qualify_tag_concatenates_class_and_tag() {
        assert_eq!(qualify_tag("Point", "Cartesian"), "PointCartesian");
        assert_eq!(qualify_tag("Tree", "Empty"), "TreeEmpty");
        assert_eq!(qualify_tag("Bank", "bank"), "Bankbank");
    }

    #[test]
    fn value_equality_is_reflexive_even_for_nan() {
        let v = Value::Seq(vec![Value::Real(f64::NAN), Value::Int(1)]);
        assert_eq!(v, v.clone());
        assert_ne!(Value::Int(1), Value::Real(1.0));
    }

    #[test]
    fn free_vars_skip_quantifier_binders() {
        let q = Expr::Quant(QuantExpr {
            symbol: QuantSymbol::Sum,
            bound_var: "t".into(),
            collection: Box::new(Expr::var("ctrans")),
            filter: Box::new(Expr::binary(BinOp::Eq, Expr::Field(Box::new(Expr::var("t")), "source".into()), Expr::var("n"))),
            body: Box::new(Expr::Field(Box::new(Expr::var("t")), "amount".into())),
        });
        assert_eq!(q.free_vars(), vec!["ctrans".to_string(), "n".to_string()]);
    }
}
