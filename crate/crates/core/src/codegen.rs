//! Skeleton generation: one `.slimp` file per class plus a `main.slimp`
//! harness. Alternatives become union types, executable rules become
//! function bodies (quantifiers as loops, class traversals as recursive
//! procedures), and every function calls the checker on entry and at each
//! return.

use std::collections::BTreeSet;

use crate::ast::*;
use crate::diag::{Diagnostic, SourceSpan};
use crate::ir::LogicProgram;
use crate::ops::RANGE_TAG;
use crate::semantics::{ClassHierarchy, FunctionInfo, TypeEnv};
use crate::slimp::{self, Module, SExpr, Stmt, POST_CHECK};

pub const MAIN_FILE: &str = "main.slimp";

/// Builtins the skeleton interpreter provides.
pub const SLIMP_BUILTINS: &[&str] = &[
    "length", "sqrt", "sqr", "abs", "append", "concat", "elements", "range", "project", "class_of", "implies", "iff",
    "print", "entry",
];

#[derive(Clone, Debug, PartialEq)]
pub struct EmittedFile {
    pub name: String,
    pub text: String,
}

pub fn elements_proc(class: &str) -> String {
    format!("Elements_{class}")
}

fn ident(x: &str) -> String {
    if slimp::is_keyword(x) || SLIMP_BUILTINS.contains(&x) {
        format!("{x}_")
    } else {
        x.to_string()
    }
}

fn string_lit(s: &str) -> String {
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

struct Emitter<'h> {
    h: &'h ClassHierarchy,
    lines: Vec<String>,
    tmp: usize,
}

impl<'h> Emitter<'h> {
    fn line(&mut self, ind: usize, s: impl AsRef<str>) {
        self.lines.push(format!("{}{}", "  ".repeat(ind), s.as_ref()));
    }

    fn fresh(&mut self, base: &str) -> String {
        self.tmp += 1;
        format!("_{base}{}", self.tmp)
    }

    fn tag(&self, qualified: &str) -> String {
        match self.h.class_of_tag(qualified) {
            Some(c) => format!("{c}::{}", qualified.strip_prefix(c).unwrap_or(qualified)),
            None => qualified.to_string(),
        }
    }

    fn value(&self, v: &Value) -> String {
        match v {
            Value::Int(i) => i.to_string(),
            Value::Real(r) => format!("{r:?}"),
            Value::Bool(b) => b.to_string(),
            Value::Str(s) => string_lit(s),
            Value::Seq(xs) => format!("[{}]", xs.iter().map(|x| self.value(x)).collect::<Vec<_>>().join(", ")),
            Value::Record(fs) => {
                format!("{{{}}}", fs.iter().map(|(l, x)| format!("{l}: {}", self.value(x))).collect::<Vec<_>>().join(", "))
            }
            Value::Con(t, args) if t == RANGE_TAG => {
                format!("range({})", args.iter().map(|x| self.value(x)).collect::<Vec<_>>().join(", "))
            }
            Value::Con(t, args) if args.is_empty() => self.tag(t),
            Value::Con(t, args) => {
                format!("{}({})", self.tag(t), args.iter().map(|x| self.value(x)).collect::<Vec<_>>().join(", "))
            }
        }
    }

    fn pattern(&self, p: &Pattern) -> String {
        match p {
            Pattern::Var(x) => ident(x),
            Pattern::Literal(v) => self.value(v),
            Pattern::Constructor(t, ps) if ps.is_empty() => self.tag(t),
            Pattern::Constructor(t, ps) => {
                format!("{}({})", self.tag(t), ps.iter().map(|p| self.pattern(p)).collect::<Vec<_>>().join(", "))
            }
            Pattern::Record(fs) => {
                format!("{{{}}}", fs.iter().map(|(l, p)| format!("{l}: {}", self.pattern(p))).collect::<Vec<_>>().join(", "))
            }
        }
    }

    fn has_descendants(&self, class: &str) -> bool {
        self.h.classes.keys().any(|c| c != class && self.h.is_subclass(c, class))
    }

    /// Expression that enumerates `v` (of static type `ty`) into a sequence.
    /// The class procedure is called directly only when no other runtime
    /// shape (a subclass value, a raw representation) can arrive.
    fn enumeration(&self, v: String, ty: &TypeExpr) -> String {
        match ty {
            TypeExpr::Named(n, _) if n == "Seq" => v,
            TypeExpr::Named(n, _)
                if self.h.classes.get(n).is_some_and(|c| c.traversable())
                    && !self.has_descendants(n)
                    && self.h.representation(n).is_none() =>
            {
                format!("{}({v})", elements_proc(n))
            }
            _ => format!("elements({v})"),
        }
    }

    fn args(&mut self, xs: &[Expr], env: &TypeEnv, ind: usize) -> String {
        xs.iter().map(|x| self.expr(x, env, ind)).collect::<Vec<_>>().join(", ")
    }

    /// Emits the statements `e` needs at indentation `ind` and returns the
    /// expression text computing it.
    fn expr(&mut self, e: &Expr, env: &TypeEnv, ind: usize) -> String {
        match e {
            Expr::Lit(v) => self.value(v),
            Expr::Var(x) => ident(x),
            Expr::ResultVar => RESULT.to_string(),
            Expr::Construct(t, args) if t == RANGE_TAG => format!("range({})", self.args(args, env, ind)),
            Expr::Construct(t, args) if args.is_empty() => self.tag(t),
            Expr::Construct(t, args) => {
                let a = self.args(args, env, ind);
                format!("{}({a})", self.tag(t))
            }
            Expr::Call(f, args) => format!("{}({})", ident(f), self.args(args, env, ind)),
            Expr::DottedCall(r, f, args) | Expr::QualifiedCall(Some(r), _, f, args) => {
                let mut recv = self.expr(r, env, ind);
                if let Expr::QualifiedCall(_, c, _, _) = e {
                    recv = format!("project({recv}, {})", string_lit(c));
                }
                let rest = self.args(args, env, ind);
                if rest.is_empty() {
                    format!("{}({recv})", ident(f))
                } else {
                    format!("{}({recv}, {rest})", ident(f))
                }
            }
            Expr::QualifiedCall(None, _, f, args) => format!("{}({})", ident(f), self.args(args, env, ind)),
            Expr::Logical(LogicOp::Not, args) => format!("(not {})", self.expr(&args[0], env, ind)),
            Expr::Logical(LogicOp::Implies, args) => format!("implies({})", self.args(args, env, ind)),
            Expr::Logical(LogicOp::Iff, args) => format!("iff({})", self.args(args, env, ind)),
            Expr::Logical(op, args) => {
                let parts: Vec<String> = args.iter().map(|a| self.expr(a, env, ind)).collect();
                format!("({})", parts.join(&format!(" {} ", op.name())))
            }
            Expr::Binary(op, l, r) => {
                let (l, r) = (self.expr(l, env, ind), self.expr(r, env, ind));
                format!("({l} {} {r})", op.symbol())
            }
            Expr::Neg(a) => format!("(-{})", self.expr(a, env, ind)),
            Expr::Field(a, l) => format!("{}.{l}", self.expr(a, env, ind)),
            Expr::Index(a, i) => {
                let (a, i) = (self.expr(a, env, ind), self.expr(i, env, ind));
                format!("{a}[{i}]")
            }
            Expr::Range(a, b) => {
                let (a, b) = (self.expr(a, env, ind), self.expr(b, env, ind));
                format!("range({a}, {b})")
            }
            Expr::SeqLit(xs) => format!("[{}]", self.args(xs, env, ind)),
            Expr::RecordLit(fs) => {
                let parts: Vec<String> = fs.iter().map(|(l, x)| format!("{l}: {}", self.expr(x, env, ind))).collect();
                format!("{{{}}}", parts.join(", "))
            }
            Expr::Quant(q) => self.quant(q, env, ind),
        }
    }

    /// A loop over the collection; `body` emits the per-element statements
    /// with the bound variable in scope.
    fn each(&mut self, q: &QuantExpr, env: &TypeEnv, ind: usize, body: &mut dyn FnMut(&mut Self, &TypeEnv, usize)) {
        let x = ident(&q.bound_var);
        let coll_ty = self.h.infer(&q.collection, env, None);
        let mut inner = env.clone();
        inner.vars.insert(q.bound_var.clone(), self.h.element_type(&coll_ty));
        if let Expr::Range(a, b) = &*q.collection {
            let (a, b) = (self.expr(a, env, ind), self.expr(b, env, ind));
            self.line(ind, format!("for {x} in {a} .. {b} {{"));
            body(self, &inner, ind + 1);
        } else {
            let c = self.expr(&q.collection, env, ind);
            let xs = self.fresh("xs");
            let i = self.fresh("i");
            let en = self.enumeration(c, &coll_ty);
            self.line(ind, format!("var {xs} = {en};"));
            self.line(ind, format!("for {i} in 1 .. length({xs}) {{"));
            self.line(ind + 1, format!("var {x} = {xs}[{i}];"));
            body(self, &inner, ind + 1);
        }
        self.line(ind, "}");
    }

    /// `if <filter> { ... }` inside a loop body.
    fn filtered(&mut self, q: &QuantExpr, env: &TypeEnv, ind: usize, then: &mut dyn FnMut(&mut Self, usize)) {
        if matches!(*q.filter, Expr::Lit(Value::Bool(true))) {
            then(self, ind);
            return;
        }
        let f = self.expr(&q.filter, env, ind);
        self.line(ind, format!("if {f} {{"));
        then(self, ind + 1);
        self.line(ind, "}");
    }

    fn quant(&mut self, q: &QuantExpr, env: &TypeEnv, ind: usize) -> String {
        use QuantSymbol::*;
        let acc = self.fresh("q");
        let x = ident(&q.bound_var);
        match q.symbol {
            Exists | Forall => {
                let (seed, op) = if q.symbol == Exists { ("false", "or") } else { ("true", "and") };
                self.line(ind, format!("var {acc} = {seed};"));
                self.each(q, env, ind, &mut |s, env, ind| {
                    s.filtered(q, env, ind, &mut |s, ind| {
                        let b = s.expr(&q.body, env, ind);
                        s.line(ind, format!("{acc} = ({acc} {op} {b});"));
                    })
                });
                acc
            }
            Sum | Product => {
                // right fold: b1 + (b2 + (... + seed))
                let (seed, op) = if q.symbol == Sum { ("0", "+") } else { ("1", "*") };
                let bs = self.fresh("bs");
                self.line(ind, format!("var {bs} = [];"));
                self.each(q, env, ind, &mut |s, env, ind| {
                    s.filtered(q, env, ind, &mut |s, ind| {
                        let b = s.expr(&q.body, env, ind);
                        s.line(ind, format!("{bs} = append({bs}, {b});"));
                    })
                });
                let j = self.fresh("j");
                self.line(ind, format!("var {acc} = {seed};"));
                self.line(ind, format!("for {j} in length({bs}) downto 1 {{"));
                self.line(ind + 1, format!("{acc} = ({bs}[{j}] {op} {acc});"));
                self.line(ind, "}");
                acc
            }
            Count => {
                self.line(ind, format!("var {acc} = 0;"));
                self.each(q, env, ind, &mut |s, env, ind| {
                    s.filtered(q, env, ind, &mut |s, ind| {
                        let b = s.expr(&q.body, env, ind);
                        s.line(ind, format!("if {b} {{"));
                        s.line(ind + 1, format!("{acc} = ({acc} + 1);"));
                        s.line(ind, "}");
                    })
                });
                acc
            }
            Select => {
                let found = self.fresh("found");
                self.line(ind, format!("var {acc} = 0;"));
                self.line(ind, format!("var {found} = false;"));
                self.each(q, env, ind, &mut |s, env, ind| {
                    s.filtered(q, env, ind, &mut |s, ind| {
                        let b = s.expr(&q.body, env, ind);
                        let bv = s.fresh("b");
                        s.line(ind, format!("var {bv} = {b};"));
                        s.line(ind, format!("if (not {found}) {{"));
                        s.line(ind + 1, format!("if {bv} {{"));
                        s.line(ind + 2, format!("{acc} = {x};"));
                        s.line(ind + 2, format!("{found} = true;"));
                        s.line(ind + 1, "}");
                        s.line(ind, "}");
                    })
                });
                self.line(ind, format!("if (not {found}) {{"));
                self.line(ind + 1, "fail \"EMPTY_SELECTION\";");
                self.line(ind, "}");
                acc
            }
            Max | Min | Maximizer | Minimizer => {
                let cmp = if matches!(q.symbol, Max | Maximizer) { ">" } else { "<" };
                let (found, arg) = (self.fresh("found"), self.fresh("arg"));
                self.line(ind, format!("var {acc} = 0;"));
                self.line(ind, format!("var {arg} = 0;"));
                self.line(ind, format!("var {found} = false;"));
                self.each(q, env, ind, &mut |s, env, ind| {
                    s.filtered(q, env, ind, &mut |s, ind| {
                        let b = s.expr(&q.body, env, ind);
                        let bv = s.fresh("b");
                        s.line(ind, format!("var {bv} = {b};"));
                        s.line(ind, format!("if {found} {{"));
                        s.line(ind + 1, format!("if ({bv} {cmp} {acc}) {{"));
                        s.line(ind + 2, format!("{acc} = {bv};"));
                        s.line(ind + 2, format!("{arg} = {x};"));
                        s.line(ind + 1, "}");
                        s.line(ind, "} else {");
                        s.line(ind + 1, format!("{acc} = {bv};"));
                        s.line(ind + 1, format!("{arg} = {x};"));
                        s.line(ind + 1, format!("{found} = true;"));
                        s.line(ind, "}");
                    })
                });
                self.line(ind, format!("if (not {found}) {{"));
                self.line(ind + 1, "fail \"EMPTY_EXTREMUM\";");
                self.line(ind, "}");
                if matches!(q.symbol, Max | Min) {
                    acc
                } else {
                    arg
                }
            }
            Filter | Map | SeqCons => {
                self.line(ind, format!("var {acc} = [];"));
                self.each(q, env, ind, &mut |s, env, ind| {
                    s.filtered(q, env, ind, &mut |s, ind| {
                        let b = s.expr(&q.body, env, ind);
                        if q.symbol == Filter {
                            // keeps the elements whose body does not hold
                            s.line(ind, format!("if (not {b}) {{"));
                            s.line(ind + 1, format!("{acc} = append({acc}, {x});"));
                            s.line(ind, "}");
                        } else {
                            s.line(ind, format!("{acc} = append({acc}, {b});"));
                        }
                    })
                });
                acc
            }
        }
    }

    fn params(&self, f: &FunctionInfo) -> Vec<String> {
        let rules: Vec<_> = self.h.rules_for(&f.name).collect();
        let mut out: Vec<String> = Vec::new();
        for i in 0..f.params.len() {
            let names: BTreeSet<&str> = rules
                .iter()
                .map(|r| match r.rule.args.get(i) {
                    Some(Pattern::Var(x)) => x.as_str(),
                    _ => "",
                })
                .collect();
            let name = match names.into_iter().collect::<Vec<_>>().as_slice() {
                [x] if !x.is_empty() && !out.contains(&ident(x)) => ident(x),
                _ => format!("arg{}", i + 1),
            };
            out.push(name);
        }
        out
    }

    fn function(&mut self, f: &FunctionInfo) {
        let hook = string_lit(&format!("{}:{}", f.class, f.name));
        let params = self.params(f);
        let plist = params.join(", ");
        let with = |extra: &str| {
            let mut a = vec![hook.clone()];
            a.extend(params.iter().cloned());
            a.push(extra.to_string());
            a.join(", ")
        };
        self.line(0, format!("func {}({plist}) {{", ident(&f.name)));
        let pre_args = if plist.is_empty() { hook.clone() } else { format!("{hook}, {plist}") };
        self.line(1, format!("pre_check({pre_args});"));
        let rules: Vec<_> = self.h.rules_for(&f.name).filter(|r| r.sol.is_some()).collect();
        if rules.is_empty() {
            self.line(1, "fail \"NOT_EXECUTABLE\";");
            self.line(0, "}");
            return;
        }
        for ri in rules {
            let env = self.h.rule_env(&ri.rule);
            let pats: Vec<String> = ri.rule.args.iter().map(|p| self.pattern(p)).collect();
            self.line(1, format!("match ({plist}) {{"));
            self.line(2, format!("case ({}) {{", pats.join(", ")));
            let mut ind = 3;
            let guarded = !ri.rule.pre.is_trivially_true();
            if guarded {
                let p = self.expr(&ri.rule.pre.checked_part, &env, ind);
                self.line(ind, format!("if {p} {{"));
                ind += 1;
            }
            let v = self.expr(ri.sol.as_ref().unwrap(), &env, ind);
            self.line(ind, format!("return {POST_CHECK}({});", with(&v)));
            if guarded {
                self.line(3, "}");
            }
            self.line(2, "}");
            self.line(1, "}");
        }
        let fallbacks: Vec<(String, String)> = self
            .h
            .missing
            .iter()
            .filter(|(g, _)| *g == f.name)
            .map(|(g, d)| (d.clone(), self.h.dispatch[&(g.clone(), d.clone())].clone()))
            .collect();
        for (d, anc) in fallbacks {
            // inherited without local rules: run on the ancestor's view
            let mut call_args = vec![format!("project({}, {})", params[0], string_lit(&anc))];
            call_args.extend(params[1..].iter().cloned());
            let call = format!("{}({})", ident(&f.name), call_args.join(", "));
            self.line(1, format!("if (class_of({}) = {}) {{", params[0], string_lit(&d)));
            self.line(2, format!("return {POST_CHECK}({});", with(&call)));
            self.line(1, "}");
        }
        self.line(1, "fail \"NO_APPLICABLE_RULE\";");
        self.line(0, "}");
    }

    fn elements(&mut self, class: &str) {
        let info = &self.h.classes[class];
        self.line(0, format!("proc {}(o) {{", elements_proc(class)));
        self.line(1, "var out = [];");
        for tv in info.traversal.clone() {
            let env = self.h.pattern_env(&tv.shape, &TypeExpr::named(class));
            self.line(1, "match (o) {");
            self.line(2, format!("case ({}) {{", self.pattern(&tv.shape)));
            for (item, coll) in tv.items.iter().zip(&tv.item_is_collection) {
                let v = self.expr(item, &env, 3);
                if *coll {
                    let ty = self.h.infer(item, &env, None);
                    let en = self.enumeration(v, &ty);
                    self.line(3, format!("out = concat(out, {en});"));
                } else {
                    self.line(3, format!("out = append(out, {v});"));
                }
            }
            self.line(2, "}");
            self.line(1, "}");
        }
        self.line(1, "return out;");
        self.line(0, "}");
    }

    fn type_decl(&mut self, class: &str) {
        let info = &self.h.classes[class];
        let mut head = format!("type {class}");
        if !info.def.parents.is_empty() {
            head.push_str(&format!(" extends {}", info.def.parents.join(", ")));
        }
        let alts: Vec<String> = info
            .alternatives
            .iter()
            .map(|a| {
                let comps = &a.components;
                match comps.as_slice() {
                    [] => a.tag.clone(),
                    [(_, TypeExpr::Record(fs))] => format!(
                        "{}{{{}}}",
                        a.tag,
                        fs.iter().map(|(l, t)| format!("{l}: {t}")).collect::<Vec<_>>().join(", ")
                    ),
                    _ => format!("{}({})", a.tag, comps.iter().map(|(_, t)| t.to_string()).collect::<Vec<_>>().join(", ")),
                }
            })
            .collect();
        if alts.is_empty() {
            self.line(0, format!("{head};"));
        } else {
            self.line(0, format!("{head} = {};", alts.join(" | ")));
        }
    }

    fn take(&mut self) -> String {
        let mut s = std::mem::take(&mut self.lines).join("\n");
        s.push('\n');
        s
    }
}

/// Emits the skeleton program: `<Class>.slimp` per class, then `main.slimp`.
pub fn emit_program(h: &ClassHierarchy, p: &LogicProgram) -> Vec<EmittedFile> {
    let mut em = Emitter { h, lines: Vec::new(), tmp: 0 };
    let mut files = Vec::new();
    for (name, info) in &h.classes {
        em.line(0, format!("// {name}: generated skeleton; edit freely, keep the check hooks."));
        em.line(0, "");
        em.type_decl(name);
        if info.traversable() {
            em.line(0, "");
            em.elements(name);
        }
        for f in h.functions.values().filter(|f| f.class == *name) {
            em.line(0, "");
            em.function(f);
        }
        files.push(EmittedFile { name: format!("{name}.slimp"), text: em.take() });
    }
    em.line(0, format!("// Harness. Specification {}", p.fingerprint()));
    em.line(0, "// Run with: slam run <spec files> --program <this directory> --call \"<call>\"");
    for f in &files {
        em.line(0, format!("import {};", string_lit(&f.name)));
    }
    em.line(0, "main {");
    em.line(1, "print(entry());");
    em.line(0, "}");
    files.push(EmittedFile { name: MAIN_FILE.to_string(), text: em.take() });
    files
}

fn span(file: &str, line: usize) -> Option<SourceSpan> {
    let mut s = SourceSpan::new(line.max(1), 1, 1);
    s.file = Some(file.into());
    Some(s)
}

fn walk_exprs<'a>(stmts: &'a [Stmt], out: &mut Vec<(&'a SExpr, bool, usize)>) {
    for s in stmts {
        match s {
            Stmt::Var(_, e) | Stmt::Assign(_, e) | Stmt::Expr(e) => out.push((e, false, 0)),
            Stmt::Return(e, line) => out.push((e, true, *line)),
            Stmt::If(c, a, b) => {
                out.push((c, false, 0));
                walk_exprs(a, out);
                walk_exprs(b, out);
            }
            Stmt::For { from, to, body, .. } => {
                out.push((from, false, 0));
                out.push((to, false, 0));
                walk_exprs(body, out);
            }
            Stmt::Match(scrut, arms) => {
                scrut.iter().for_each(|e| out.push((e, false, 0)));
                arms.iter().for_each(|a| walk_exprs(&a.body, out));
            }
            Stmt::PreCheck(_, args, _) => args.iter().for_each(|e| out.push((e, false, 0))),
            Stmt::Fail(_) => {}
        }
    }
}

fn count_pre(stmts: &[Stmt]) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            Stmt::PreCheck(..) => 1,
            Stmt::If(_, a, b) => count_pre(a) + count_pre(b),
            Stmt::For { body, .. } => count_pre(body),
            Stmt::Match(_, arms) => arms.iter().map(|a| count_pre(&a.body)).sum(),
            _ => 0,
        })
        .sum()
}

fn calls<'a>(e: &'a SExpr, out: &mut Vec<(&'a str, usize)>) {
    match e {
        SExpr::Call(f, args) => {
            out.push((f, args.len()));
            args.iter().for_each(|a| calls(a, out));
        }
        SExpr::Con(_, xs) | SExpr::Seq(xs) | SExpr::Logic(_, xs) => xs.iter().for_each(|a| calls(a, out)),
        SExpr::Field(a, _) | SExpr::Neg(a) => calls(a, out),
        SExpr::Index(a, b) | SExpr::Bin(_, a, b) => {
            calls(a, out);
            calls(b, out);
        }
        SExpr::Rec(fs) => fs.iter().for_each(|(_, a)| calls(a, out)),
        SExpr::Lit(_) | SExpr::Var(_) => {}
    }
}

/// Structural re-check of skeleton files: syntax, resolvable calls and
/// the hook discipline (one `pre_check` first, every `return` through
/// `post_check` under the same name, `post_check` nowhere else).
pub fn validate_emitted(files: &[EmittedFile]) -> Vec<Diagnostic> {
    let mut diags = Vec::new();
    let mut modules: Vec<(&str, Module)> = Vec::new();
    for f in files {
        match slimp::parse_module(&f.text) {
            Ok(m) => modules.push((&f.name, m)),
            Err(d) => diags.push(d.with_file(std::path::Path::new(&f.name))),
        }
    }
    let mut defined: BTreeSet<&str> = SLIMP_BUILTINS.iter().copied().collect();
    for (file, m) in &modules {
        for func in &m.funcs {
            if !defined.insert(&func.name) && !SLIMP_BUILTINS.contains(&func.name.as_str()) {
                diags.push(Diagnostic::error("DUPLICATE_FUNCTION", span(file, func.line), format!("`{}` is defined twice", func.name)));
            }
        }
        for i in &m.imports {
            if !files.iter().any(|f| &f.name == i) {
                diags.push(Diagnostic::error("MISSING_IMPORT", None, format!("{file} imports `{i}`, which is not part of the program")));
            }
        }
    }
    for (file, m) in &modules {
        let mut bodies: Vec<(&[Stmt], Option<&slimp::Func>)> = m.funcs.iter().map(|f| (f.body.as_slice(), Some(f))).collect();
        if let Some(main) = &m.main {
            bodies.push((main, None));
        }
        for (body, func) in bodies {
            let mut es = Vec::new();
            walk_exprs(body, &mut es);
            let line = func.map_or(1, |f| f.line);
            let hook = match (func, body.first()) {
                (Some(f), Some(Stmt::PreCheck(name, _, _))) if f.hooked => Some(name.clone()),
                _ => None,
            };
            if let Some(f) = func.filter(|f| f.hooked) {
                if hook.is_none() {
                    diags.push(Diagnostic::error("MISSING_PRE_HOOK", span(file, f.line), format!("`{}` does not start with pre_check", f.name)));
                }
                if count_pre(body) > 1 {
                    diags.push(Diagnostic::error("DUPLICATE_PRE_HOOK", span(file, f.line), format!("`{}` has more than one pre_check", f.name)));
                }
            } else if count_pre(body) > 0 {
                diags.push(Diagnostic::error("STRAY_PRE_HOOK", span(file, line), "pre_check outside a hooked function"));
            }
            for (e, is_return, rline) in es {
                let top_post = matches!(e, SExpr::Call(f, _) if f == POST_CHECK);
                if is_return && func.is_some_and(|f| f.hooked) {
                    match e {
                        SExpr::Call(f, args) if f == POST_CHECK => {
                            let name = match args.first() {
                                Some(SExpr::Lit(Value::Str(s))) => Some(s.clone()),
                                _ => None,
                            };
                            if hook.is_some() && name != hook {
                                diags.push(Diagnostic::error("HOOK_MISMATCH", span(file, rline), "post_check names a different function than pre_check"));
                            }
                        }
                        _ => diags.push(Diagnostic::error(
                            "MISSING_POST_HOOK",
                            span(file, rline),
                            format!("return in `{}` does not go through post_check", func.unwrap().name),
                        )),
                    }
                }
                let mut cs = Vec::new();
                calls(e, &mut cs);
                let nested_post = cs.iter().filter(|(f, _)| *f == POST_CHECK).count() - usize::from(top_post && is_return);
                if nested_post > 0 || (top_post && !(is_return && func.is_some_and(|f| f.hooked))) {
                    diags.push(Diagnostic::error("STRAY_POST_HOOK", span(file, rline.max(line)), "post_check outside a return position"));
                }
                for (c, _) in cs {
                    if c != POST_CHECK && !defined.contains(c) {
                        diags.push(Diagnostic::error("UNKNOWN_FUNCTION", span(file, rline.max(line)), format!("call to undefined `{c}`")));
                    }
                }
            }
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::translate;
    use crate::semantics::load_spec;

    fn emit(src: &str) -> Vec<EmittedFile> {
        let h = load_spec(src).unwrap().0;
        let p = translate(&h);
        emit_program(&h, &p)
    }

    #[test]
    fn empty_spec_has_only_the_harness() {
        let fs = emit("");
        assert_eq!(fs.len(), 1);
        assert_eq!(fs[0].name, MAIN_FILE);
        assert!(validate_emitted(&fs).is_empty());
    }

    #[test]
    fn emitted_program_validates_and_breaking_a_hook_is_caught() {
        let mut fs = emit(
            "class A { case K(Int) traverse K(n) => [n]
               observer F() : Int
               rule { call: F(K(x)) pre: x > 0 sol: sum i in 1..x | true . i }
               observer G() : Int }",
        );
        assert_eq!(validate_emitted(&fs), vec![], "{}", fs[0].text);
        assert!(fs[0].text.contains("fail \"NOT_EXECUTABLE\";"));
        let a = &mut fs[0];
        a.text = a
            .text
            .lines()
            .map(|l| if l.contains("return post_check(\"A:F\"") { "        return 0;" } else { l })
            .collect::<Vec<_>>()
            .join("\n");
        let d = validate_emitted(&fs);
        assert!(d.iter().any(|d| d.code == "MISSING_POST_HOOK"), "{d:?}");
    }
}
