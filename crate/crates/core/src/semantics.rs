//! Class hierarchy resolution, rule elaboration and static checking.
//!
//! Building a hierarchy does three things: it linearizes ancestors and
//! computes every class's effective alternatives (inherited ones are
//! re-qualified with the subclass name, redeclared tags replace them,
//! new tags are appended); it decides, for every function dispatching on
//! its first argument, which class supplies the rules (`dispatch`) and
//! which classes inherit them without local rules (`missing`); and it
//! elaborates rule bodies so that later phases see qualified constructor
//! tags and plain calls only.

use std::collections::{BTreeMap, BTreeSet};

use crate::ast::*;
use crate::diag::{has_errors, Diagnostic, SourceSpan};
use crate::ops::{self, EvalError, EvalResult, Schemas, TagSchema, RANGE_TAG};
use crate::parser;

pub const BUILTIN_TYPES: &[&str] = &["Int", "Nat", "Real", "Bool", "String", "Seq", "Range", "Any"];

pub fn any() -> TypeExpr {
    TypeExpr::named("Any")
}

fn is_any(t: &TypeExpr) -> bool {
    matches!(t, TypeExpr::Named(n, _) if n == "Any")
}

#[derive(Clone, Debug, PartialEq)]
pub struct AltInfo {
    pub tag: String,
    pub qualified: String,
    pub components: Vec<(Option<String>, TypeExpr)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TravInfo {
    /// Elaborated shape (qualified tag).
    pub shape: Pattern,
    pub items: Vec<Expr>,
    /// Per item: enumerate it further (`true`) or yield it as an element.
    pub item_is_collection: Vec<bool>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassInfo {
    pub def: ClassDef,
    pub alternatives: Vec<AltInfo>,
    pub traversal: Vec<TravInfo>,
}

impl ClassInfo {
    pub fn traversable(&self) -> bool {
        !self.def.traversal_rules.is_empty()
    }

    pub fn alt(&self, tag: &str) -> Option<&AltInfo> {
        self.alternatives.iter().find(|a| a.tag == tag)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionInfo {
    pub name: String,
    pub class: String,
    pub decl: OpDecl,
    pub params: Vec<TypeExpr>,
    pub result: Option<TypeExpr>,
    /// First parameter is the declaring class: rules are selected by the
    /// class of the first argument and inherited along the hierarchy.
    pub dispatch_on_first: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RuleInfo {
    /// Elaborated copy of the source rule.
    pub rule: FunctionRule,
    /// Explicit solution, or the right-hand side of an executable
    /// postcondition `Result = e`.
    pub sol: Option<Expr>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ClassHierarchy {
    pub classes: BTreeMap<String, ClassInfo>,
    /// Strict ancestors, nearest first, parents in declaration order.
    pub ancestors: BTreeMap<String, Vec<String>>,
    /// (function, class) -> class whose rules apply.
    pub dispatch: BTreeMap<(String, String), String>,
    /// (function, class) pairs inherited without local rules.
    pub missing: BTreeSet<(String, String)>,
    pub functions: BTreeMap<String, FunctionInfo>,
    /// All rules: classes in name order, then source order.
    pub rules: Vec<RuleInfo>,
    pub schemas: Schemas,
    /// Name-resolution problems found while elaborating; reported by
    /// [`check_rules`].
    pub elab_diags: Vec<Diagnostic>,
}

fn class_span(c: &ClassDef) -> Option<SourceSpan> {
    c.origin.0.clone()
}

// ---------------------------------------------------------------------------
// Construction

pub fn build_hierarchy(defs: &[ClassDef]) -> Result<ClassHierarchy, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut h = ClassHierarchy::default();

    for d in defs {
        if BUILTIN_TYPES.contains(&d.name.as_str()) {
            diags.push(Diagnostic::error(
                "RESERVED_CLASS",
                class_span(d),
                format!("`{}` names a built-in type", d.name),
            ));
            continue;
        }
        if h.classes.contains_key(&d.name) {
            diags.push(Diagnostic::error(
                "DUPLICATE_CLASS",
                class_span(d),
                format!("class `{}` is declared twice", d.name),
            ));
            continue;
        }
        h.classes.insert(
            d.name.clone(),
            ClassInfo { def: d.clone(), alternatives: Vec::new(), traversal: Vec::new() },
        );
    }
    for c in h.classes.values() {
        let d = &c.def;
        for p in &d.parents {
            if !h.classes.contains_key(p) {
                diags.push(Diagnostic::error(
                    "UNKNOWN_PARENT",
                    class_span(d),
                    format!("class `{}` extends undeclared class `{p}`", d.name),
                ));
            }
        }
        let mut seen = BTreeSet::new();
        for a in &d.alternatives {
            if !seen.insert(a.tag.clone()) {
                diags.push(Diagnostic::error(
                    "DUPLICATE_TAG",
                    class_span(d),
                    format!("alternative `{}` declared twice in `{}`", a.tag, d.name),
                ));
            }
            let mut labels = BTreeSet::new();
            for l in a.components.iter().filter_map(|(l, _)| l.as_ref()) {
                if !labels.insert(l) {
                    diags.push(Diagnostic::error(
                        "DUPLICATE_LABEL",
                        class_span(d),
                        format!("label `{l}` repeated in `{}`", a.tag),
                    ));
                }
            }
        }
    }
    if has_errors(&diags) {
        return Err(diags);
    }

    // Cycles, then ancestor linearization.
    let names: Vec<String> = h.classes.keys().cloned().collect();
    for n in &names {
        if reaches(&h, n, n, &mut BTreeSet::new()) {
            diags.push(Diagnostic::error(
                "INHERITANCE_CYCLE",
                class_span(&h.classes[n].def),
                format!("class `{n}` inherits from itself"),
            ));
        }
    }
    if has_errors(&diags) {
        return Err(diags);
    }
    for n in &names {
        let mut out = Vec::new();
        linearize(&h, n, &mut out);
        h.ancestors.insert(n.clone(), out);
    }

    // Effective alternatives, parents before children.
    let mut order: Vec<String> = names.clone();
    order.sort_by_key(|n| (h.ancestors[n].len(), n.clone()));
    for n in &order {
        let alts = effective_alternatives(&h, n, &mut diags);
        h.classes.get_mut(n).unwrap().alternatives = alts;
    }

    // Schemas and qualified-tag uniqueness.
    h.schemas.insert(
        RANGE_TAG.to_string(),
        TagSchema {
            class: "Range".into(),
            tag: "Interval".into(),
            components: vec![(None, TypeExpr::named("Int")), (None, TypeExpr::named("Int"))],
        },
    );
    for (cname, c) in &h.classes {
        for a in &c.alternatives {
            if let Some(prev) = h.schemas.get(&a.qualified) {
                diags.push(Diagnostic::error(
                    "TAG_CLASH",
                    class_span(&c.def),
                    format!(
                        "qualified tag `{}` of `{cname}` collides with `{}`'s `{}`",
                        a.qualified, prev.class, prev.tag
                    ),
                ));
                continue;
            }
            h.schemas.insert(
                a.qualified.clone(),
                TagSchema { class: cname.clone(), tag: a.tag.clone(), components: a.components.clone() },
            );
        }
        if c.traversable() {
            for a in &c.alternatives {
                let covered = c.def.traversal_rules.iter().any(|t| match &t.shape {
                    Pattern::Constructor(tag, _) => *tag == a.tag || *tag == a.qualified,
                    _ => false,
                });
                if !covered {
                    diags.push(Diagnostic::error(
                        "INCOMPLETE_TRAVERSAL",
                        class_span(&c.def),
                        format!("class `{cname}` has no traversal rule for alternative `{}`", a.tag),
                    ));
                }
            }
        }
    }

    // Function table.
    for (cname, c) in &h.classes {
        for d in &c.def.op_decls {
            if let Some(prev) = h.functions.get(&d.name) {
                diags.push(Diagnostic::error(
                    "DUPLICATE_FUNCTION",
                    class_span(&c.def),
                    format!("function `{}` declared in both `{}` and `{cname}`", d.name, prev.class),
                ));
                continue;
            }
            if BUILTIN_FUNCTIONS_RESERVED.contains(&d.name.as_str()) {
                diags.push(Diagnostic::error(
                    "RESERVED_FUNCTION",
                    class_span(&c.def),
                    format!("`{}` is a built-in function", d.name),
                ));
                continue;
            }
            let self_ty = c.def.self_type();
            let params = d.params(&self_ty);
            let dispatch_on_first = params.first().and_then(|t| t.head()) == Some(cname.as_str());
            h.functions.insert(
                d.name.clone(),
                FunctionInfo {
                    name: d.name.clone(),
                    class: cname.clone(),
                    decl: d.clone(),
                    result: d.result(&self_ty),
                    params,
                    dispatch_on_first,
                },
            );
        }
    }
    if has_errors(&diags) {
        return Err(diags);
    }

    compute_dispatch(&mut h, &mut diags);
    if has_errors(&diags) {
        return Err(diags);
    }

    // Elaboration.
    let mut elab = Vec::new();
    let mut rules = Vec::new();
    let mut travs = BTreeMap::new();
    for (cname, c) in &h.classes {
        for r in &c.def.rules {
            let rule = elaborate_rule(&h, r, &mut elab);
            let sol = rule.sol.clone().or_else(|| executable_post(&rule.post));
            rules.push(RuleInfo { rule, sol });
        }
        let mut tv = Vec::new();
        for t in &c.def.traversal_rules {
            tv.push(elaborate_traversal(&h, cname, t, &mut elab));
        }
        travs.insert(cname.clone(), tv);
    }
    for (n, tv) in travs {
        h.classes.get_mut(&n).unwrap().traversal = tv;
    }
    h.rules = rules;
    h.elab_diags = elab;
    Ok(h)
}

const BUILTIN_FUNCTIONS_RESERVED: &[&str] = ops::BUILTIN_FUNCTIONS;

fn reaches(h: &ClassHierarchy, from: &str, target: &str, seen: &mut BTreeSet<String>) -> bool {
    for p in &h.classes[from].def.parents {
        if p == target {
            return true;
        }
        if h.classes.contains_key(p) && seen.insert(p.clone()) && reaches(h, p, target, seen) {
            return true;
        }
    }
    false
}

fn linearize(h: &ClassHierarchy, n: &str, out: &mut Vec<String>) {
    for p in &h.classes[n].def.parents {
        if !out.contains(p) {
            out.push(p.clone());
        }
    }
    for p in &h.classes[n].def.parents {
        let mut sub = Vec::new();
        linearize(h, p, &mut sub);
        for a in sub {
            if !out.contains(&a) {
                out.push(a);
            }
        }
    }
}

fn effective_alternatives(h: &ClassHierarchy, n: &str, diags: &mut Vec<Diagnostic>) -> Vec<AltInfo> {
    let c = &h.classes[n];
    let mut alts: Vec<AltInfo> = Vec::new();
    for p in &c.def.parents {
        for a in &h.classes[p].alternatives {
            if !alts.iter().any(|x| x.tag == a.tag) {
                alts.push(AltInfo { tag: a.tag.clone(), qualified: qualify_tag(n, &a.tag), components: a.components.clone() });
            }
        }
    }
    for own in &c.def.alternatives {
        let new = AltInfo { tag: own.tag.clone(), qualified: qualify_tag(n, &own.tag), components: own.components.clone() };
        match alts.iter().position(|x| x.tag == own.tag) {
            Some(i) => {
                let inherited = &alts[i].components;
                if own.components.len() < inherited.len() {
                    diags.push(Diagnostic::error(
                        "OVERRIDE_ARITY",
                        class_span(&c.def),
                        format!(
                            "`{n}` redeclares `{}` with {} components; the inherited one has {}",
                            own.tag,
                            own.components.len(),
                            inherited.len()
                        ),
                    ));
                } else {
                    for (k, ((_, t_new), (_, t_old))) in own.components.iter().zip(inherited).enumerate() {
                        if !h.is_subtype_strict(t_new, t_old) {
                            diags.push(Diagnostic::error(
                                "ILLEGAL_OVERRIDE",
                                class_span(&c.def),
                                format!(
                                    "component {} of `{}` in `{n}` has type {t_new}, which does not refine {t_old}",
                                    k + 1,
                                    own.tag
                                ),
                            ));
                        }
                    }
                }
                alts[i] = new;
            }
            None => alts.push(new),
        }
    }
    alts
}

fn compute_dispatch(h: &mut ClassHierarchy, diags: &mut Vec<Diagnostic>) {
    let mut has_rules: BTreeSet<(String, String)> = BTreeSet::new();
    for (cname, c) in &h.classes {
        for r in &c.def.rules {
            has_rules.insert((r.fname.clone(), cname.clone()));
        }
    }
    let fns: Vec<FunctionInfo> = h.functions.values().filter(|f| f.dispatch_on_first).cloned().collect();
    for f in fns {
        for cname in h.classes.keys().cloned().collect::<Vec<_>>() {
            if cname != f.class && !h.is_subclass(&cname, &f.class) {
                continue;
            }
            if has_rules.contains(&(f.name.clone(), cname.clone())) {
                h.dispatch.insert((f.name.clone(), cname.clone()), cname.clone());
                continue;
            }
            let cands: Vec<&String> =
                h.ancestors[&cname].iter().filter(|a| has_rules.contains(&(f.name.clone(), (*a).clone()))).collect();
            let nearest: Vec<&String> = cands
                .iter()
                .filter(|a| !cands.iter().any(|b| b != *a && h.is_subclass(b, a)))
                .cloned()
                .collect();
            match nearest.as_slice() {
                [] => {}
                [a] => {
                    h.dispatch.insert((f.name.clone(), cname.clone()), (*a).clone());
                    h.missing.insert((f.name.clone(), cname.clone()));
                }
                many => diags.push(Diagnostic::error(
                    "AMBIGUOUS_DISPATCH",
                    class_span(&h.classes[&cname].def),
                    format!(
                        "`{cname}` inherits rules for `{}` from unrelated classes {}; add a local rule",
                        f.name,
                        many.iter().map(|s| format!("`{s}`")).collect::<Vec<_>>().join(" and ")
                    ),
                )),
            }
        }
    }
}

/// `Result = e` as the postcondition or one conjunct of its top-level
/// conjunction chain.
pub fn executable_post(post: &CheckMode) -> Option<Expr> {
    fn find(e: &Expr) -> Option<Expr> {
        match e {
            Expr::Binary(BinOp::Eq, l, r) => match (&**l, &**r) {
                (Expr::ResultVar, rhs) if !rhs.mentions_result() => Some(rhs.clone()),
                (lhs, Expr::ResultVar) if !lhs.mentions_result() => Some(lhs.clone()),
                _ => None,
            },
            Expr::Logical(LogicOp::And, args) => args.iter().find_map(find),
            _ => None,
        }
    }
    match post.mode {
        CheckModeKind::Full => find(&post.checked_part),
        CheckModeKind::ConjunctOnly => {
            find(&post.checked_part).or_else(|| post.unchecked_part.as_ref().and_then(find))
        }
        CheckModeKind::Approximation => post.unchecked_part.as_ref().and_then(find),
    }
}

// ---------------------------------------------------------------------------
// Queries

impl ClassHierarchy {
    pub fn is_class(&self, n: &str) -> bool {
        self.classes.contains_key(n)
    }

    /// Strict subclass test.
    pub fn is_subclass(&self, sub: &str, sup: &str) -> bool {
        self.ancestors.get(sub).is_some_and(|a| a.iter().any(|x| x == sup))
    }

    pub fn is_same_or_subclass(&self, sub: &str, sup: &str) -> bool {
        sub == sup || self.is_subclass(sub, sup)
    }

    /// Classes declaring `f` rules, with their rules, in clause order.
    pub fn rules_for<'a>(&'a self, f: &'a str) -> impl Iterator<Item = &'a RuleInfo> + 'a {
        self.rules.iter().filter(move |r| r.rule.fname == f)
    }

    /// Class owning a qualified tag (`Range` for ranges).
    pub fn class_of_tag(&self, qtag: &str) -> Option<&str> {
        self.schemas.get(qtag).map(|s| s.class.as_str())
    }

    pub fn class_of_value(&self, v: &Value) -> Option<&str> {
        match v {
            Value::Con(t, _) => self.class_of_tag(t),
            _ => None,
        }
    }

    /// Class whose only representation is a single component of type `T`
    /// accepts plain `T` values, e.g. a transaction collection given as a
    /// sequence of transactions.
    pub fn representation(&self, class: &str) -> Option<&TypeExpr> {
        let c = self.classes.get(class)?;
        match c.alternatives.as_slice() {
            [a] if a.components.len() == 1 => Some(&a.components[0].1),
            _ => None,
        }
    }

    /// Resolves a constructor tag: each context class (inherited
    /// alternatives included) in turn, then the unique root-most class
    /// declaring it.
    pub fn resolve_tag(&self, contexts: &[&str], tag: &str) -> Result<String, String> {
        if self.schemas.contains_key(tag) && !contexts.iter().any(|c| self.classes.get(*c).is_some_and(|ci| ci.alt(tag).is_some())) {
            // Already qualified.
            return Ok(tag.to_string());
        }
        for ctx in contexts {
            if let Some(a) = self.classes.get(*ctx).and_then(|c| c.alt(tag)) {
                return Ok(a.qualified.clone());
            }
        }
        if tag == "Interval" {
            return Ok(RANGE_TAG.to_string());
        }
        let declaring: Vec<&String> = self
            .classes
            .iter()
            .filter(|(_, c)| c.alt(tag).is_some())
            .map(|(n, _)| n)
            .collect();
        let roots: Vec<&String> =
            declaring.iter().filter(|n| !declaring.iter().any(|m| self.is_subclass(n, m))).cloned().collect();
        match roots.as_slice() {
            [] => Err(format!("unknown constructor `{tag}`")),
            [one] => Ok(self.classes[*one].alt(tag).unwrap().qualified.clone()),
            many => Err(format!(
                "constructor `{tag}` is ambiguous between {}; qualify it as `Class:{tag}(...)`",
                many.iter().map(|s| format!("`{s}`")).collect::<Vec<_>>().join(", ")
            )),
        }
    }

    fn normalize(&self, t: &TypeExpr) -> TypeExpr {
        match t {
            TypeExpr::Named(n, args) => {
                if n == "Nat" {
                    return TypeExpr::named("Int");
                }
                if !BUILTIN_TYPES.contains(&n.as_str()) && !self.is_class(n) {
                    return any();
                }
                TypeExpr::Named(n.clone(), args.iter().map(|a| self.normalize(a)).collect())
            }
            TypeExpr::Record(fs) => TypeExpr::Record(fs.iter().map(|(l, t)| (l.clone(), self.normalize(t))).collect()),
        }
    }

    /// Refinement used for overriding: equal, subclass, extended record.
    pub fn is_subtype_strict(&self, sub: &TypeExpr, sup: &TypeExpr) -> bool {
        let (sub, sup) = (self.normalize(sub), self.normalize(sup));
        self.sub_rec(&sub, &sup, false)
    }

    /// Assignability: refinement plus int-to-real widening and the
    /// single-representation rule.
    pub fn is_assignable(&self, sub: &TypeExpr, sup: &TypeExpr) -> bool {
        let (sub, sup) = (self.normalize(sub), self.normalize(sup));
        self.sub_rec(&sub, &sup, true)
    }

    fn sub_rec(&self, sub: &TypeExpr, sup: &TypeExpr, widen: bool) -> bool {
        if is_any(sub) || is_any(sup) {
            return true;
        }
        match (sub, sup) {
            (TypeExpr::Named(a, aa), TypeExpr::Named(b, bb)) => {
                if a == b {
                    return aa.len() != bb.len() || aa.iter().zip(bb).all(|(x, y)| self.sub_rec(x, y, widen));
                }
                if self.is_subclass(a, b) {
                    return true;
                }
                if widen {
                    if a == "Int" && b == "Real" {
                        return true;
                    }
                    if let Some(rep) = self.representation(b) {
                        let rep = self.normalize(rep);
                        return self.sub_rec(sub, &rep, widen);
                    }
                }
                false
            }
            (TypeExpr::Record(xs), TypeExpr::Record(ys)) => {
                xs.len() >= ys.len()
                    && xs.iter().zip(ys).all(|((l, x), (m, y))| l == m && self.sub_rec(x, y, widen))
            }
            (sub, TypeExpr::Named(b, _)) if widen => match self.representation(b) {
                Some(rep) => {
                    let rep = self.normalize(rep);
                    self.sub_rec(sub, &rep, widen)
                }
                None => false,
            },
            _ => false,
        }
    }

    /// Does a runtime value inhabit a declared type?
    pub fn conforms(&self, v: &Value, t: &TypeExpr) -> bool {
        let t = self.normalize(t);
        match (&t, v) {
            (TypeExpr::Named(n, _), _) if n == "Any" => true,
            (TypeExpr::Named(n, _), Value::Int(_)) if n == "Int" || n == "Real" => true,
            (TypeExpr::Named(n, _), Value::Real(_)) if n == "Real" => true,
            (TypeExpr::Named(n, _), Value::Bool(_)) if n == "Bool" => true,
            (TypeExpr::Named(n, _), Value::Str(_)) if n == "String" => true,
            (TypeExpr::Named(n, args), Value::Seq(items)) if n == "Seq" => match args.first() {
                Some(et) => items.iter().all(|x| self.conforms(x, et)),
                None => true,
            },
            (TypeExpr::Named(n, _), v) if n == "Range" => ops::as_range(v).is_some(),
            (TypeExpr::Record(fts), Value::Record(fs)) => {
                fts.len() <= fs.len()
                    && fts.iter().zip(fs).all(|((l, t), (m, x))| l == m && self.conforms(x, t))
            }
            (TypeExpr::Named(n, _), v) if self.is_class(n) => {
                if let Some(c) = self.class_of_value(v) {
                    if self.is_same_or_subclass(c, n) {
                        return true;
                    }
                }
                match self.representation(n) {
                    Some(rep) if !matches!(v, Value::Con(..)) => self.conforms(v, &rep.clone()),
                    _ => false,
                }
            }
            _ => false,
        }
    }

    pub fn is_traversable_type(&self, t: &TypeExpr) -> bool {
        match self.normalize(t) {
            TypeExpr::Named(n, _) => {
                matches!(n.as_str(), "Seq" | "Range" | "String" | "Any")
                    || self.classes.get(&n).is_some_and(|c| c.traversable())
            }
            TypeExpr::Record(_) => false,
        }
    }

    /// Element type of a traversable type.
    pub fn element_type(&self, t: &TypeExpr) -> TypeExpr {
        self.element_type_guarded(t, &mut Vec::new())
    }

    fn element_type_guarded(&self, t: &TypeExpr, seen: &mut Vec<String>) -> TypeExpr {
        match self.normalize(t) {
            TypeExpr::Named(n, args) => match n.as_str() {
                "Seq" => args.first().cloned().unwrap_or_else(any),
                "Range" => TypeExpr::named("Int"),
                "String" => TypeExpr::named("String"),
                _ => {
                    let Some(c) = self.classes.get(&n) else { return any() };
                    if seen.contains(&n) {
                        return any();
                    }
                    seen.push(n.clone());
                    for tv in &c.traversal {
                        let env = self.pattern_env(&tv.shape, &c.def.self_type());
                        for (item, coll) in tv.items.iter().zip(&tv.item_is_collection) {
                            let it = self.infer(item, &env, None);
                            let et = if *coll { self.element_type_guarded(&it, seen) } else { it };
                            if !is_any(&et) {
                                seen.pop();
                                return et;
                            }
                        }
                    }
                    seen.pop();
                    any()
                }
            },
            TypeExpr::Record(_) => any(),
        }
    }

    /// Whether a traversal item of this static type is enumerated further
    /// rather than yielded as an element.
    pub fn item_is_collection(&self, t: &TypeExpr) -> bool {
        match self.normalize(t) {
            TypeExpr::Named(n, _) => {
                matches!(n.as_str(), "Seq" | "Range") || self.classes.get(&n).is_some_and(|c| c.traversable())
            }
            TypeExpr::Record(_) => false,
        }
    }

    /// Component types of a qualified tag as seen by a positional pattern
    /// or construction of the given arity (record fields are spread).
    pub fn spread_components(&self, qtag: &str, arity: usize) -> Option<Vec<(Option<String>, TypeExpr)>> {
        let s = self.schemas.get(qtag)?;
        match s.components.as_slice() {
            [(_, TypeExpr::Record(fs))] if arity == fs.len() && arity != 1 => {
                Some(fs.iter().map(|(l, t)| (Some(l.clone()), t.clone())).collect())
            }
            comps => Some(comps.to_vec()),
        }
    }

    /// Types of the variables bound by a pattern matched against `t`.
    pub fn pattern_env(&self, p: &Pattern, t: &TypeExpr) -> TypeEnv {
        let mut env = TypeEnv::default();
        self.bind_pattern(p, t, &mut env);
        env
    }

    fn bind_pattern(&self, p: &Pattern, t: &TypeExpr, env: &mut TypeEnv) {
        match p {
            Pattern::Var(v) => {
                env.vars.insert(v.clone(), self.normalize(t));
            }
            Pattern::Literal(_) => {}
            Pattern::Constructor(tag, ps) => {
                let comps = self.schemas.get(tag).map(|s| s.components.clone()).unwrap_or_default();
                for (i, sp) in ps.iter().enumerate() {
                    let ct = comps.get(i).map(|c| c.1.clone()).unwrap_or_else(any);
                    self.bind_pattern(sp, &ct, env);
                }
            }
            Pattern::Record(fs) => {
                let fts = match self.normalize(t) {
                    TypeExpr::Record(fts) => fts,
                    _ => Vec::new(),
                };
                for (l, sp) in fs {
                    let ft = fts.iter().find(|(m, _)| m == l).map(|(_, t)| t.clone()).unwrap_or_else(any);
                    self.bind_pattern(sp, &ft, env);
                }
            }
        }
    }

    /// Variable types for a rule body: argument patterns against the
    /// declared parameter types, plus `Result`.
    pub fn rule_env(&self, r: &FunctionRule) -> TypeEnv {
        let mut env = TypeEnv::default();
        if let Some(f) = self.functions.get(&r.fname) {
            for (i, p) in r.args.iter().enumerate() {
                let mut t = f.params.get(i).cloned().unwrap_or_else(any);
                // A rule in a subclass sees its own class for the receiver.
                if i == 0 && f.dispatch_on_first && r.class != f.class {
                    t = TypeExpr::named(&r.class);
                }
                self.bind_pattern(p, &t, &mut env);
            }
            env.result = f.result.as_ref().map(|t| self.normalize(t));
        } else {
            for v in r.arg_vars() {
                env.vars.insert(v, any());
            }
        }
        env
    }

    /// Lenient static type; unknown parts are `Any`.
    pub fn infer(&self, e: &Expr, env: &TypeEnv, _ctx: Option<&str>) -> TypeExpr {
        let named = TypeExpr::named;
        match e {
            Expr::Lit(v) => match v {
                Value::Int(_) => named("Int"),
                Value::Real(_) => named("Real"),
                Value::Bool(_) => named("Bool"),
                Value::Str(_) => named("String"),
                _ => any(),
            },
            Expr::Var(v) => env.vars.get(v).cloned().unwrap_or_else(any),
            Expr::ResultVar => env.result.clone().unwrap_or_else(any),
            Expr::Construct(tag, _) => match self.class_of_tag(tag) {
                Some(c) => {
                    let n = self.classes.get(c).map(|ci| ci.def.type_params.len()).unwrap_or(0);
                    TypeExpr::Named(c.to_string(), vec![any(); n])
                }
                None => any(),
            },
            Expr::Call(f, args) => match f.as_str() {
                "length" => named("Int"),
                "sqrt" => named("Real"),
                "sqr" | "abs" => args.first().map(|a| self.infer(a, env, None)).unwrap_or_else(any),
                _ => self.functions.get(f).and_then(|fi| fi.result.clone()).map(|t| self.normalize(&t)).unwrap_or_else(any),
            },
            Expr::DottedCall(_, f, _) | Expr::QualifiedCall(_, _, f, _) => {
                self.functions.get(f).and_then(|fi| fi.result.clone()).map(|t| self.normalize(&t)).unwrap_or_else(any)
            }
            Expr::Logical(..) => named("Bool"),
            Expr::Binary(op, l, r) => {
                if op.is_relational() {
                    return named("Bool");
                }
                let (lt, rt) = (self.infer(l, env, None), self.infer(r, env, None));
                match (lt.head(), rt.head()) {
                    (Some("Int"), Some("Int")) => named("Int"),
                    (Some("Real"), Some("Int" | "Real")) | (Some("Int"), Some("Real")) => named("Real"),
                    (Some("String"), Some("String")) if *op == BinOp::Add => named("String"),
                    (Some("Seq"), Some("Seq")) if *op == BinOp::Add => lt,
                    _ => any(),
                }
            }
            Expr::Neg(a) => self.infer(a, env, None),
            Expr::Quant(q) => {
                let ct = self.infer(&q.collection, env, None);
                let et = self.element_type(&ct);
                let mut inner = env.clone();
                inner.vars.insert(q.bound_var.clone(), et.clone());
                let bt = || self.infer(&q.body, &inner, None);
                match q.symbol {
                    QuantSymbol::Exists | QuantSymbol::Forall => named("Bool"),
                    QuantSymbol::Count => named("Int"),
                    QuantSymbol::Sum | QuantSymbol::Product | QuantSymbol::Max | QuantSymbol::Min => bt(),
                    QuantSymbol::Select | QuantSymbol::Maximizer | QuantSymbol::Minimizer => et,
                    QuantSymbol::Filter => TypeExpr::Named("Seq".into(), vec![et]),
                    QuantSymbol::Map | QuantSymbol::SeqCons => TypeExpr::Named("Seq".into(), vec![bt()]),
                }
            }
            Expr::Field(a, l) => {
                let at = self.infer(a, env, None);
                self.field_type(&at, l).unwrap_or_else(any)
            }
            Expr::Index(a, _) => match self.normalize(&self.infer(a, env, None)) {
                TypeExpr::Named(n, args) if n == "Seq" => args.first().cloned().unwrap_or_else(any),
                TypeExpr::Named(n, _) if n == "String" => named("String"),
                _ => any(),
            },
            Expr::Range(..) => named("Range"),
            Expr::SeqLit(items) => TypeExpr::Named(
                "Seq".into(),
                vec![items.first().map(|i| self.infer(i, env, None)).unwrap_or_else(any)],
            ),
            Expr::RecordLit(fs) => {
                TypeExpr::Record(fs.iter().map(|(l, e)| (l.clone(), self.infer(e, env, None))).collect())
            }
        }
    }

    /// Type of `.label` on a value of type `t`, when known.
    pub fn field_type(&self, t: &TypeExpr, label: &str) -> Option<TypeExpr> {
        match self.normalize(t) {
            TypeExpr::Record(fs) => fs.iter().find(|(l, _)| l == label).map(|(_, t)| self.normalize(t)),
            TypeExpr::Named(n, _) => {
                let c = self.classes.get(&n)?;
                for a in &c.alternatives {
                    if let Some((_, t)) = a.components.iter().find(|(l, _)| l.as_deref() == Some(label)) {
                        return Some(self.normalize(t));
                    }
                    if let [(_, TypeExpr::Record(fs))] = a.components.as_slice() {
                        if let Some((_, t)) = fs.iter().find(|(l, _)| l == label) {
                            return Some(self.normalize(t));
                        }
                    }
                }
                None
            }
        }
    }

    /// Does a class (or one of its alternatives' records) have this label?
    fn has_field(&self, t: &TypeExpr, label: &str) -> bool {
        match self.normalize(t) {
            TypeExpr::Named(n, _) if n == "Any" => true,
            TypeExpr::Named(n, _) if !self.is_class(&n) => false,
            other => self.field_type(&other, label).is_some(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TypeEnv {
    pub vars: BTreeMap<String, TypeExpr>,
    pub result: Option<TypeExpr>,
}

// ---------------------------------------------------------------------------
// Elaboration

fn elaborate_rule(h: &ClassHierarchy, r: &FunctionRule, diags: &mut Vec<Diagnostic>) -> FunctionRule {
    let span = r.origin.0.clone();
    let f = h.functions.get(&r.fname);
    let mut args = Vec::new();
    for (i, p) in r.args.iter().enumerate() {
        let mut ctx = vec![r.class.as_str()];
        if let Some(head) = f.and_then(|f| f.params.get(i)).and_then(|t| t.head()) {
            ctx.push(head);
        }
        args.push(elaborate_pattern(h, p, &ctx, span.as_ref(), diags));
    }
    let mut scope: Vec<String> = Vec::new();
    args.iter().for_each(|p| p.vars(&mut scope));
    let ctx = [r.class.as_str()];
    let mut ex = |e: &Expr, diags: &mut Vec<Diagnostic>| elaborate_expr(h, e, &ctx, &mut scope.clone(), span.as_ref(), diags);
    let pre = elaborate_check(&r.pre, &mut ex, diags);
    let post = elaborate_check(&r.post, &mut ex, diags);
    let sol = r.sol.as_ref().map(|e| ex(e, diags));
    FunctionRule { class: r.class.clone(), fname: r.fname.clone(), args, pre, post, sol, origin: r.origin.clone() }
}

fn elaborate_check(
    c: &CheckMode,
    ex: &mut impl FnMut(&Expr, &mut Vec<Diagnostic>) -> Expr,
    diags: &mut Vec<Diagnostic>,
) -> CheckMode {
    CheckMode {
        mode: c.mode,
        checked_part: ex(&c.checked_part, diags),
        unchecked_part: c.unchecked_part.as_ref().map(|u| ex(u, diags)),
    }
}

fn elaborate_traversal(h: &ClassHierarchy, class: &str, t: &TraversalRule, diags: &mut Vec<Diagnostic>) -> TravInfo {
    let span = h.classes[class].def.origin.0.clone();
    let shape = elaborate_pattern(h, &t.shape, &[class], span.as_ref(), diags);
    let mut scope = Vec::new();
    shape.vars(&mut scope);
    let items: Vec<Expr> =
        t.items.iter().map(|e| elaborate_expr(h, e, &[class], &mut scope.clone(), span.as_ref(), diags)).collect();
    let env = h.pattern_env(&shape, &h.classes[class].def.self_type());
    let item_is_collection = items.iter().map(|e| h.item_is_collection(&h.infer(e, &env, None))).collect();
    TravInfo { shape, items, item_is_collection }
}

fn elaborate_pattern(
    h: &ClassHierarchy,
    p: &Pattern,
    ctx: &[&str],
    span: Option<&SourceSpan>,
    diags: &mut Vec<Diagnostic>,
) -> Pattern {
    match p {
        Pattern::Var(v) => {
            // A bare nullary tag in pattern position is a constructor.
            if let Ok(q) = h.resolve_tag(ctx, v) {
                if h.schemas.get(&q).is_some_and(|s| s.components.is_empty()) {
                    return Pattern::Constructor(q, Vec::new());
                }
            }
            p.clone()
        }
        Pattern::Literal(_) => p.clone(),
        Pattern::Record(fs) => Pattern::Record(
            fs.iter().map(|(l, sp)| (l.clone(), elaborate_pattern(h, sp, ctx, span, diags))).collect(),
        ),
        Pattern::Constructor(tag, ps) => {
            let q = match h.resolve_tag(ctx, tag) {
                Ok(q) => q,
                Err(msg) => {
                    diags.push(Diagnostic::error("UNKNOWN_CONSTRUCTOR", span.cloned(), msg));
                    tag.clone()
                }
            };
            let sub_ctx: Vec<String> = h
                .spread_components(&q, ps.len())
                .unwrap_or_default()
                .iter()
                .map(|(_, t)| t.head().unwrap_or("").to_string())
                .collect();
            let mut sps = Vec::new();
            for (i, sp) in ps.iter().enumerate() {
                let mut c: Vec<&str> = Vec::new();
                if let Some(s) = sub_ctx.get(i).filter(|s| !s.is_empty()) {
                    c.push(s);
                }
                c.extend_from_slice(ctx);
                sps.push(elaborate_pattern(h, sp, &c, span, diags));
            }
            // Positional patterns over a single-record alternative.
            if let Some(s) = h.schemas.get(&q) {
                if let [(_, TypeExpr::Record(fs))] = s.components.as_slice() {
                    if sps.len() == fs.len() && !(sps.len() == 1 && matches!(sps[0], Pattern::Record(_))) {
                        let rec = Pattern::Record(fs.iter().map(|(l, _)| l.clone()).zip(sps).collect());
                        return Pattern::Constructor(q, vec![rec]);
                    }
                }
            }
            Pattern::Constructor(q, sps)
        }
    }
}

fn elaborate_expr(
    h: &ClassHierarchy,
    e: &Expr,
    ctx: &[&str],
    scope: &mut Vec<String>,
    span: Option<&SourceSpan>,
    diags: &mut Vec<Diagnostic>,
) -> Expr {
    let sub = |x: &Expr, scope: &mut Vec<String>, diags: &mut Vec<Diagnostic>| elaborate_expr(h, x, ctx, scope, span, diags);
    let all = |xs: &[Expr], scope: &mut Vec<String>, diags: &mut Vec<Diagnostic>| {
        xs.iter().map(|x| elaborate_expr(h, x, ctx, scope, span, diags)).collect::<Vec<_>>()
    };
    match e {
        Expr::Var(v) if !scope.contains(v) => {
            if let Ok(q) = h.resolve_tag(ctx, v) {
                if h.schemas.get(&q).is_some_and(|s| s.components.is_empty()) {
                    return Expr::Construct(q, Vec::new());
                }
            }
            e.clone()
        }
        Expr::Lit(_) | Expr::Var(_) | Expr::ResultVar => e.clone(),
        Expr::Construct(tag, args) => {
            let args = all(args, scope, diags);
            match h.resolve_tag(ctx, tag) {
                Ok(q) => Expr::Construct(q, args),
                Err(msg) => {
                    diags.push(Diagnostic::error("UNKNOWN_CONSTRUCTOR", span.cloned(), msg));
                    Expr::Construct(tag.clone(), args)
                }
            }
        }
        Expr::Call(name, args) => {
            let args = all(args, scope, diags);
            if ops::BUILTIN_FUNCTIONS.contains(&name.as_str()) || h.functions.contains_key(name) {
                return Expr::Call(name.clone(), args);
            }
            match h.resolve_tag(ctx, name) {
                Ok(q) => Expr::Construct(q, args),
                Err(_) => Expr::Call(name.clone(), args),
            }
        }
        Expr::DottedCall(r, f, args) => {
            let mut all_args = vec![sub(r, scope, diags)];
            all_args.extend(all(args, scope, diags));
            Expr::Call(f.clone(), all_args)
        }
        Expr::QualifiedCall(recv, class, f, args) => {
            let recv = recv.as_ref().map(|r| sub(r, scope, diags));
            let mut args = all(args, scope, diags);
            if recv.is_none() {
                if let Some(a) = h.classes.get(class).and_then(|c| c.alt(f)) {
                    return Expr::Construct(a.qualified.clone(), args);
                }
                let dispatches = h.functions.get(f).is_some_and(|fi| fi.dispatch_on_first);
                if dispatches && !args.is_empty() {
                    let first = args.remove(0);
                    return Expr::QualifiedCall(Some(Box::new(first)), class.clone(), f.clone(), args);
                }
                return Expr::Call(f.clone(), args);
            }
            if !h.is_class(class) {
                diags.push(Diagnostic::error("UNKNOWN_CLASS", span.cloned(), format!("no class `{class}`")));
            }
            Expr::QualifiedCall(recv.map(Box::new), class.clone(), f.clone(), args)
        }
        Expr::Logical(op, args) => Expr::Logical(*op, all(args, scope, diags)),
        Expr::Binary(op, l, r) => {
            let l = sub(l, scope, diags);
            let r = sub(r, scope, diags);
            Expr::binary(*op, l, r)
        }
        Expr::Neg(a) => Expr::Neg(Box::new(sub(a, scope, diags))),
        Expr::Quant(q) => {
            let collection = sub(&q.collection, scope, diags);
            scope.push(q.bound_var.clone());
            let filter = sub(&q.filter, scope, diags);
            let body = sub(&q.body, scope, diags);
            scope.pop();
            Expr::Quant(QuantExpr {
                symbol: q.symbol,
                bound_var: q.bound_var.clone(),
                collection: Box::new(collection),
                filter: Box::new(filter),
                body: Box::new(body),
            })
        }
        Expr::Field(a, l) => Expr::Field(Box::new(sub(a, scope, diags)), l.clone()),
        Expr::Index(a, i) => {
            let a = sub(a, scope, diags);
            let i = sub(i, scope, diags);
            Expr::Index(Box::new(a), Box::new(i))
        }
        Expr::Range(a, b) => {
            let a = sub(a, scope, diags);
            let b = sub(b, scope, diags);
            Expr::Range(Box::new(a), Box::new(b))
        }
        Expr::SeqLit(xs) => Expr::SeqLit(all(xs, scope, diags)),
        Expr::RecordLit(fs) => {
            Expr::RecordLit(fs.iter().map(|(l, x)| (l.clone(), sub(x, scope, diags))).collect())
        }
    }
}

/// Elaborates a free-standing expression (e.g. from the command line)
/// against the hierarchy, with no class context.
pub fn elaborate_query(h: &ClassHierarchy, e: &Expr) -> Result<Expr, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let out = elaborate_expr(h, e, &[], &mut Vec::new(), None, &mut diags);
    let env = TypeEnv::default();
    check_expr(h, &out, &env, &mut Vec::new(), None, ExprRole::Query, &mut diags);
    if has_errors(&diags) {
        Err(diags)
    } else {
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Rule checks

#[derive(Clone, Copy, PartialEq, Eq)]
enum ExprRole {
    Pre,
    Post,
    Sol,
    Traversal,
    Query,
}

pub fn check_rules(h: &ClassHierarchy) -> Vec<Diagnostic> {
    let mut diags = h.elab_diags.clone();
    for ri in &h.rules {
        let r = &ri.rule;
        let span = r.origin.0.clone();
        let Some(f) = h.functions.get(&r.fname) else {
            diags.push(Diagnostic::error(
                "RULE_WITHOUT_DECL",
                span,
                format!("rule for `{}` in `{}` has no operation declaration", r.fname, r.class),
            ));
            continue;
        };
        let placed_ok = r.class == f.class || (f.dispatch_on_first && h.is_subclass(&r.class, &f.class));
        if !placed_ok {
            diags.push(Diagnostic::error(
                "RULE_WITHOUT_DECL",
                span.clone(),
                format!("rule for `{}` appears in `{}` but the operation is declared in `{}`", r.fname, r.class, f.class),
            ));
        }
        if r.args.len() != f.params.len() {
            diags.push(Diagnostic::error(
                "ARITY",
                span.clone(),
                format!("`{}` takes {} arguments, the call scheme has {}", r.fname, f.params.len(), r.args.len()),
            ));
        }
        let vars = r.arg_vars();
        for (i, v) in vars.iter().enumerate() {
            if vars[..i].contains(v) {
                diags.push(Diagnostic::error(
                    "NONLINEAR_PATTERN",
                    span.clone(),
                    format!("variable `{v}` occurs twice in the call scheme of `{}`", r.fname),
                ));
            }
            if v == RESULT {
                diags.push(Diagnostic::error("RESERVED_IDENT", span.clone(), "`Result` cannot be a pattern variable"));
            }
        }
        for (i, p) in r.args.iter().enumerate() {
            if let Some(t) = f.params.get(i) {
                let t = if i == 0 && f.dispatch_on_first { TypeExpr::named(&r.class) } else { t.clone() };
                check_pattern(h, p, &t, span.as_ref(), &mut diags);
            }
        }
        let env = h.rule_env(r);
        let mut scope = vars.clone();
        for (part, role) in [(&r.pre, ExprRole::Pre), (&r.post, ExprRole::Post)] {
            for e in std::iter::once(&part.checked_part).chain(part.unchecked_part.iter()) {
                check_expr(h, e, &env, &mut scope, span.as_ref(), role, &mut diags);
                expect_bool(h, e, &env, span.as_ref(), &mut diags);
            }
        }
        if let Some(sol) = &r.sol {
            check_expr(h, sol, &env, &mut scope, span.as_ref(), ExprRole::Sol, &mut diags);
        }
        if let (Some(sol), Some(rt)) = (&ri.sol, &f.result) {
            let st = h.infer(sol, &env, None);
            if !h.is_assignable(&st, rt) {
                diags.push(Diagnostic::error(
                    "SOL_TYPE",
                    span.clone(),
                    format!("solution of `{}` has type {st}, but the result type is {rt}", r.fname),
                ));
            }
        }
    }
    for c in h.classes.values() {
        let span = class_span(&c.def);
        for t in &c.traversal {
            match &t.shape {
                Pattern::Constructor(q, _) if h.class_of_tag(q) == Some(c.def.name.as_str()) => {}
                _ => diags.push(Diagnostic::error(
                    "BAD_TRAVERSAL",
                    span.clone(),
                    format!("traversal shape in `{}` must be one of its own alternatives", c.def.name),
                )),
            }
            let env = h.pattern_env(&t.shape, &c.def.self_type());
            let mut scope = Vec::new();
            t.shape.vars(&mut scope);
            for item in &t.items {
                check_expr(h, item, &env, &mut scope, span.as_ref(), ExprRole::Traversal, &mut diags);
            }
        }
    }
    diags
}

fn check_pattern(h: &ClassHierarchy, p: &Pattern, t: &TypeExpr, span: Option<&SourceSpan>, diags: &mut Vec<Diagnostic>) {
    if let Pattern::Constructor(q, ps) = p {
        let Some(schema) = h.schemas.get(q) else { return };
        if let Some(cls) = t.head().filter(|c| h.is_class(c)) {
            if !h.is_same_or_subclass(&schema.class, cls) {
                diags.push(Diagnostic::error(
                    "PATTERN_TYPE",
                    span.cloned(),
                    format!("constructor `{q}` belongs to `{}`, not to `{cls}`", schema.class),
                ));
            }
        }
        if ps.len() != schema.components.len() {
            diags.push(Diagnostic::error(
                "ARITY",
                span.cloned(),
                format!("`{q}` has {} components, the pattern has {}", schema.components.len(), ps.len()),
            ));
            return;
        }
        for (sp, (_, ct)) in ps.iter().zip(&schema.components) {
            check_pattern(h, sp, ct, span, diags);
        }
    }
}

fn expect_bool(h: &ClassHierarchy, e: &Expr, env: &TypeEnv, span: Option<&SourceSpan>, diags: &mut Vec<Diagnostic>) {
    let t = h.infer(e, env, None);
    if !is_any(&t) && t.head() != Some("Bool") {
        diags.push(Diagnostic::error(
            "NOT_BOOLEAN",
            span.cloned(),
            format!("`{}` has type {t}, expected Bool", parser::print_expr(e)),
        ));
    }
}

fn check_expr(
    h: &ClassHierarchy,
    e: &Expr,
    env: &TypeEnv,
    scope: &mut Vec<String>,
    span: Option<&SourceSpan>,
    role: ExprRole,
    diags: &mut Vec<Diagnostic>,
) {
    match e {
        Expr::ResultVar => match role {
            ExprRole::Pre => diags.push(Diagnostic::error("RESULT_IN_PRE", span.cloned(), "`Result` used in a precondition")),
            ExprRole::Sol => diags.push(Diagnostic::error("RESULT_IN_SOL", span.cloned(), "`Result` used in a solution")),
            ExprRole::Traversal | ExprRole::Query => {
                diags.push(Diagnostic::error("UNBOUND_VAR", span.cloned(), "`Result` is only meaningful in postconditions"))
            }
            ExprRole::Post => {}
        },
        Expr::Var(v) => {
            if !scope.contains(v) {
                diags.push(Diagnostic::error("UNBOUND_VAR", span.cloned(), format!("variable `{v}` is not bound")));
            }
        }
        Expr::Call(f, args) => {
            let expected = if ops::BUILTIN_FUNCTIONS.contains(&f.as_str()) {
                Some(1)
            } else {
                h.functions.get(f).map(|fi| fi.params.len())
            };
            match expected {
                None => diags.push(Diagnostic::error("UNKNOWN_FUNCTION", span.cloned(), format!("no function `{f}`"))),
                Some(n) if n != args.len() => diags.push(Diagnostic::error(
                    "ARITY",
                    span.cloned(),
                    format!("`{f}` takes {n} arguments, given {}", args.len()),
                )),
                _ => {}
            }
        }
        Expr::QualifiedCall(_, class, f, args) => match h.functions.get(f) {
            None => diags.push(Diagnostic::error("UNKNOWN_FUNCTION", span.cloned(), format!("no function `{f}`"))),
            Some(fi) => {
                if fi.params.len() != args.len() + 1 {
                    diags.push(Diagnostic::error(
                        "ARITY",
                        span.cloned(),
                        format!("`{class}:{f}` takes {} arguments, given {}", fi.params.len(), args.len() + 1),
                    ));
                }
            }
        },
        Expr::Construct(q, args) => {
            if let Some(s) = h.schemas.get(q) {
                let spread = h.spread_components(q, args.len()).map(|c| c.len()).unwrap_or(0);
                if spread != args.len() && s.components.len() != args.len() {
                    diags.push(Diagnostic::error(
                        "ARITY",
                        span.cloned(),
                        format!("`{q}` has {} components, given {}", s.components.len(), args.len()),
                    ));
                }
            }
        }
        Expr::Logical(_, args) => {
            for a in args {
                expect_bool(h, a, env, span, diags);
            }
        }
        Expr::Field(a, l) => {
            let t = h.infer(a, env, None);
            if !h.has_field(&t, l) {
                diags.push(Diagnostic::error(
                    "UNKNOWN_FIELD",
                    span.cloned(),
                    format!("`{}` of type {t} has no field `{l}`", parser::print_expr(a)),
                ));
            }
        }
        Expr::Quant(q) => {
            check_expr(h, &q.collection, env, scope, span, role, diags);
            if scope.contains(&q.bound_var) {
                diags.push(Diagnostic::error(
                    "SHADOWED_VAR",
                    span.cloned(),
                    format!("quantified variable `{}` shadows an enclosing variable", q.bound_var),
                ));
            }
            if q.bound_var == RESULT {
                diags.push(Diagnostic::error("RESERVED_IDENT", span.cloned(), "`Result` cannot be quantified"));
            }
            if q.filter.mentions_result() {
                diags.push(Diagnostic::warning(
                    "RESULT_IN_FILTER",
                    span.cloned(),
                    "quantifier filter mentions `Result`",
                ));
            }
            let ct = h.infer(&q.collection, env, None);
            let mut inner = env.clone();
            inner.vars.insert(q.bound_var.clone(), h.element_type(&ct));
            scope.push(q.bound_var.clone());
            check_expr(h, &q.filter, &inner, scope, span, role, diags);
            expect_bool(h, &q.filter, &inner, span, diags);
            check_expr(h, &q.body, &inner, scope, span, role, diags);
            if matches!(q.symbol, QuantSymbol::Exists | QuantSymbol::Forall | QuantSymbol::Count | QuantSymbol::Select | QuantSymbol::Filter) {
                expect_bool(h, &q.body, &inner, span, diags);
            }
            scope.pop();
            return;
        }
        _ => {}
    }
    for c in e.children() {
        check_expr(h, c, env, scope, span, role, diags);
    }
}

// ---------------------------------------------------------------------------
// Computability

pub fn check_computability(h: &ClassHierarchy) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let executable: BTreeSet<&str> =
        h.rules.iter().filter(|r| r.sol.is_some()).map(|r| r.rule.fname.as_str()).collect();
    for ri in &h.rules {
        let r = &ri.rule;
        let span = r.origin.0.clone();
        let env = h.rule_env(r);
        let mut parts: Vec<&Expr> = vec![&r.pre.checked_part, &r.post.checked_part];
        parts.extend(ri.sol.iter());
        for e in parts {
            check_quantifiers(h, e, &env, span.as_ref(), &mut diags);
        }
        match &ri.sol {
            None => diags.push(Diagnostic::warning(
                "NOT_EXECUTABLE",
                span.clone(),
                format!(
                    "rule for `{}` in `{}` has no solution and no postcondition of the form `Result = e`",
                    r.fname, r.class
                ),
            )),
            Some(sol) => {
                let mut called = Vec::new();
                collect_calls(sol, &mut called);
                for f in called {
                    if h.functions.contains_key(&f) && !executable.contains(f.as_str()) {
                        diags.push(Diagnostic::error(
                            "NOT_COMPUTABLE",
                            span.clone(),
                            format!("solution of `{}` calls `{f}`, which has no executable rule", r.fname),
                        ));
                    }
                }
            }
        }
    }
    diags
}

fn collect_calls(e: &Expr, out: &mut Vec<String>) {
    e.walk(&mut |x| match x {
        Expr::Call(f, _) | Expr::QualifiedCall(_, _, f, _) | Expr::DottedCall(_, f, _)
            if !out.contains(f) => {
                out.push(f.clone());
            }
        _ => {}
    });
}

fn check_quantifiers(h: &ClassHierarchy, e: &Expr, env: &TypeEnv, span: Option<&SourceSpan>, diags: &mut Vec<Diagnostic>) {
    match e {
        Expr::Quant(q) => {
            check_quantifiers(h, &q.collection, env, span, diags);
            let ct = h.infer(&q.collection, env, None);
            if !h.is_traversable_type(&ct) {
                diags.push(Diagnostic::error(
                    "NOT_TRAVERSABLE",
                    span.cloned(),
                    format!(
                        "`{}` quantifies over `{}` of type {ct}, which has no traversal",
                        q.symbol.keyword(),
                        parser::print_expr(&q.collection)
                    ),
                ));
            }
            let mut inner = env.clone();
            inner.vars.insert(q.bound_var.clone(), h.element_type(&ct));
            check_quantifiers(h, &q.filter, &inner, span, diags);
            check_quantifiers(h, &q.body, &inner, span, diags);
        }
        other => {
            for c in other.children() {
                check_quantifiers(h, c, env, span, diags);
            }
        }
    }
}

/// Builds and fully checks a hierarchy. Errors abort; warnings are
/// returned alongside the hierarchy.
pub fn analyze(defs: &[ClassDef]) -> Result<(ClassHierarchy, Vec<Diagnostic>), Vec<Diagnostic>> {
    let h = build_hierarchy(defs)?;
    let mut diags = check_rules(&h);
    diags.extend(check_computability(&h));
    if has_errors(&diags) {
        return Err(diags);
    }
    Ok((h, diags))
}

/// Parses and analyzes specification text.
pub fn load_spec(src: &str) -> Result<(ClassHierarchy, Vec<Diagnostic>), Vec<Diagnostic>> {
    let defs = parser::parse_spec(src)?;
    analyze(&defs)
}

// ---------------------------------------------------------------------------
// Projection

/// Casts a value of a class (or a descendant) to the given ancestor class:
/// extension components are dropped and overridden components projected.
pub fn project_to_ancestor(v: &Value, target: &str, h: &ClassHierarchy) -> EvalResult<Value> {
    let cast_err = || EvalError::new("CAST_ERROR", format!("cannot cast {v} to `{target}`"));
    let Value::Con(qtag, args) = v else {
        // Plain representation values are already at their class.
        return if h.is_class(target) && h.conforms(v, &TypeExpr::named(target)) { Ok(v.clone()) } else { Err(cast_err()) };
    };
    let schema = h.schemas.get(qtag).ok_or_else(cast_err)?;
    if schema.class == target {
        return Ok(v.clone());
    }
    if !h.is_subclass(&schema.class, target) {
        return Err(cast_err());
    }
    let alt = h.classes[target].alt(&schema.tag).ok_or_else(cast_err)?;
    let mut out = Vec::new();
    for (a, (_, t)) in args.iter().zip(&alt.components) {
        out.push(project_component(a, t, h)?);
    }
    Ok(Value::Con(alt.qualified.clone(), out))
}

pub fn project_component(v: &Value, t: &TypeExpr, h: &ClassHierarchy) -> EvalResult<Value> {
    match (t, v) {
        (TypeExpr::Named(n, _), Value::Con(..)) if h.is_class(n) => project_to_ancestor(v, n, h),
        (TypeExpr::Record(fts), Value::Record(fs)) => {
            let mut out = Vec::new();
            for (l, ft) in fts {
                let x = fs
                    .iter()
                    .find(|(m, _)| m == l)
                    .map(|(_, x)| x)
                    .ok_or_else(|| EvalError::new("CAST_ERROR", format!("record lacks field `{l}`")))?;
                out.push((l.clone(), project_component(x, ft, h)?));
            }
            Ok(Value::Record(out))
        }
        _ => Ok(v.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(src: &str) -> ClassHierarchy {
        build_hierarchy(&parser::parse_spec(src).unwrap()).unwrap()
    }

    const POINTS: &str = "
        class Colour { case Red() case Green() }
        class Point { case Cartesian(Real, Real) case Polar(Real, Real)
          observer CoordX() : Real
          rule { call: CoordX(Cartesian(x, y)) post: Result = x } }
        class ColouredPoint extends Point { case Cartesian(Real, Real, Colour) }";

    #[test]
    fn extension_requalifies_and_appends() {
        let h = h(POINTS);
        let cp = &h.classes["ColouredPoint"];
        let tags: Vec<&str> = cp.alternatives.iter().map(|a| a.qualified.as_str()).collect();
        assert_eq!(tags, ["ColouredPointCartesian", "ColouredPointPolar"]);
        assert_eq!(cp.alternatives[0].components.len(), 3);
        assert!(h.missing.contains(&("CoordX".to_string(), "ColouredPoint".to_string())));
        assert_eq!(h.dispatch[&("CoordX".to_string(), "ColouredPoint".to_string())], "Point");
    }

    #[test]
    fn cycle_and_override_arity_errors() {
        let errs = build_hierarchy(&parser::parse_spec("class A extends A { case X() }").unwrap()).unwrap_err();
        assert_eq!(errs[0].code, "INHERITANCE_CYCLE");
        let errs = build_hierarchy(
            &parser::parse_spec("class P { case C(Real, Real) } class Q extends P { case C(Real) }").unwrap(),
        )
        .unwrap_err();
        assert_eq!(errs[0].code, "OVERRIDE_ARITY");
    }

    #[test]
    fn projection_drops_extension_components() {
        let h = h(POINTS);
        let v = Value::con(
            "ColouredPointCartesian",
            vec![Value::Real(1.0), Value::Real(2.0), Value::con("ColourRed", vec![])],
        );
        let p = project_to_ancestor(&v, "Point", &h).unwrap();
        assert_eq!(p, Value::con("PointCartesian", vec![Value::Real(1.0), Value::Real(2.0)]));
        assert_eq!(project_to_ancestor(&p, "Point", &h).unwrap(), p);
        assert_eq!(project_to_ancestor(&p, "Colour", &h).unwrap_err().code, "CAST_ERROR");
    }

    #[test]
    fn result_in_pre_is_reported() {
        let h = h("class A { case K(Int) observer F() : Int rule { pre: Result > 0 call: F(K(x)) sol: x } }");
        let d = check_rules(&h);
        assert!(d.iter().any(|d| d.code == "RESULT_IN_PRE"), "{d:?}");
    }

    #[test]
    fn quantifier_over_untraversable_class() {
        let h = h("class A { case K(Int) observer F() : Bool rule { call: F(a) sol: exists x in a . true } }");
        let d = check_computability(&h);
        assert!(d.iter().any(|d| d.code == "NOT_TRAVERSABLE"), "{d:?}");
    }

    #[test]
    fn non_executable_rule_is_a_warning() {
        let (_, warns) = load_spec(
            "class A { case K(Int) observer F() : Int rule { call: F(K(x)) post: Result > x } }",
        )
        .unwrap();
        assert!(warns.iter().any(|d| d.code == "NOT_EXECUTABLE" && !d.is_error()));
    }
}
