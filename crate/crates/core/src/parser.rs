//! Recursive-descent parser for `.slam` specification text, and its inverse
//! pretty printer.
//!
//! Grammar summary:
//!
//! ```text
//! spec    := class*
//! class   := 'class' Name ['(' Param,* ')'] ['extends' Name,*] '{' member* '}'
//! member  := 'case' Tag '(' [label ':'] Type,* ')'
//!          | 'case' [Tag] '{' label ':' Type,* '}'
//!          | 'traverse' Pattern '=>' '[' Expr,* ']'
//!          | ('constructor'|'observer'|'modifier'|'friend') Name '(' Type,* ')' [':' Type]
//!          | 'rule' '{' ('pre:' Checked | 'call:' Call | 'post:' Checked | 'sol:' Expr)* '}'
//! Checked := ['check'] Expr | 'and_check' Expr '::' Expr | 'either_check' Expr '::' Expr
//! Call    := Name '(' Pattern,* ')' | Pattern '.' Name '(' Pattern,* ')'
//! ```
//!
//! Quantifiers are written `Q x in D | filter . body`; the separating dot
//! must be preceded by whitespace, member access must not be.

use crate::ast::*;
use crate::diag::{Diagnostic, SourceSpan};
use crate::lexer::{tokenize, Tok, Token};

type PResult<T> = Result<T, Diagnostic>;

const RESERVED: &[&str] = &["and", "or", "not", "implies", "iff", "true", "false", "in", RESULT];

pub fn parse_spec(source: &str) -> Result<Vec<ClassDef>, Vec<Diagnostic>> {
    let toks = tokenize(source)?;
    let mut p = Parser::new(&toks);
    let mut defs = Vec::new();
    let mut errs = Vec::new();
    while !p.at_eof() {
        match p.class_def() {
            Ok(c) => defs.push(c),
            Err(d) => {
                errs.push(d);
                p.recover_to_class();
            }
        }
    }
    if errs.is_empty() {
        Ok(defs)
    } else {
        Err(errs)
    }
}

pub fn parse_expr(source: &str) -> Result<Expr, Vec<Diagnostic>> {
    let toks = tokenize(source)?;
    let mut p = Parser::new(&toks);
    let e = p.expr().map_err(|d| vec![d])?;
    if !p.at_eof() {
        return Err(vec![p.unexpected("end of expression")]);
    }
    Ok(e)
}

struct Parser<'t> {
    toks: &'t [Token],
    pos: usize,
}

impl<'t> Parser<'t> {
    fn new(toks: &'t [Token]) -> Self {
        Parser { toks, pos: 0 }
    }

    fn peek(&self) -> &'t Token {
        &self.toks[self.pos]
    }

    fn peek_at(&self, n: usize) -> &'t Tok {
        &self.toks[(self.pos + n).min(self.toks.len() - 1)].tok
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek().tok, Tok::Eof)
    }

    fn bump(&mut self) -> &'t Token {
        let t = &self.toks[self.pos];
        if !matches!(t.tok, Tok::Eof) {
            self.pos += 1;
        }
        t
    }

    fn span(&self) -> SourceSpan {
        self.peek().span.clone()
    }

    fn unexpected(&self, wanted: &str) -> Diagnostic {
        let t = self.peek();
        let found = match &t.tok {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Real(r) => format!("`{r}`"),
            Tok::Str(s) => format!("{s:?}"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        };
        Diagnostic::error("UNEXPECTED_TOKEN", Some(t.span.clone()), format!("expected {wanted}, found {found}"))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek().tok, Tok::Sym(x) if x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(x) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, s: &str) -> bool {
        if self.is_kw(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{s}`")))
        }
    }

    fn expect_kw(&mut self, s: &str) -> PResult<()> {
        if self.eat_kw(s) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{s}`")))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match &self.peek().tok {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    /// Identifier usable as a variable binder.
    fn binder(&mut self) -> PResult<String> {
        let span = self.span();
        let name = self.ident()?;
        if RESERVED.contains(&name.as_str()) {
            return Err(Diagnostic::error(
                "RESERVED_IDENT",
                Some(span),
                format!("`{name}` is reserved and cannot name a variable"),
            ));
        }
        Ok(name)
    }

    /// Skips to the next `class` keyword at nesting depth zero.
    fn recover_to_class(&mut self) {
        let mut depth = 0i64;
        // Always make progress.
        if !self.at_eof() {
            if let Tok::Sym(s) = self.bump().tok {
                depth += delim_delta(s);
            }
        }
        while !self.at_eof() {
            if depth <= 0 && self.is_kw("class") {
                return;
            }
            if let Tok::Sym(s) = self.bump().tok {
                depth += delim_delta(s);
            }
        }
    }

    fn comma_list<T>(&mut self, close: &str, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = Vec::new();
        if self.eat_sym(close) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat_sym(close) {
                return Ok(out);
            }
            self.expect_sym(",")?;
        }
    }

    // ---- declarations ----

    fn class_def(&mut self) -> PResult<ClassDef> {
        let span = self.span();
        if !self.is_kw("class") {
            return Err(Diagnostic::error(
                "UNKNOWN_KEYWORD",
                Some(span),
                "expected `class` at top level".to_string(),
            ));
        }
        self.bump();
        let name = self.ident()?;
        let mut class = ClassDef::new(&name);
        class.origin = Origin(Some(span));
        if self.eat_sym("(") {
            class.type_params = self.comma_list(")", |p| p.ident())?;
        }
        if self.eat_kw("extends") {
            loop {
                class.parents.push(self.ident()?);
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym("{")?;
        while !self.eat_sym("}") {
            self.member(&mut class)?;
        }
        Ok(class)
    }

    fn member(&mut self, class: &mut ClassDef) -> PResult<()> {
        let span = self.span();
        let kw = match &self.peek().tok {
            Tok::Ident(s) => s.clone(),
            _ => return Err(self.unexpected("class member")),
        };
        match kw.as_str() {
            "case" => {
                self.bump();
                let alt = self.alternative(&class.name)?;
                class.alternatives.push(alt);
            }
            "traverse" => {
                self.bump();
                let shape = self.pattern()?;
                self.expect_sym("=>")?;
                self.expect_sym("[")?;
                let items = self.comma_list("]", |p| p.expr())?;
                class.traversal_rules.push(TraversalRule { shape, items });
            }
            "constructor" | "observer" | "modifier" | "friend" => {
                self.bump();
                let kind = match kw.as_str() {
                    "constructor" => OpKind::Constructor,
                    "observer" => OpKind::Observer,
                    "modifier" => OpKind::Modifier,
                    _ => OpKind::Friend,
                };
                let name = self.ident()?;
                self.expect_sym("(")?;
                let arg_types = self.comma_list(")", |p| p.type_expr())?;
                let result_type = if self.is_sym(":") {
                    if matches!(kind, OpKind::Constructor | OpKind::Modifier) {
                        return Err(Diagnostic::error(
                            "UNEXPECTED_TOKEN",
                            Some(self.span()),
                            format!("the result type of a {} is implied by its class", kind.keyword()),
                        ));
                    }
                    self.bump();
                    Some(self.type_expr()?)
                } else {
                    None
                };
                class.op_decls.push(OpDecl { kind, name, arg_types, result_type });
            }
            "rule" => {
                self.bump();
                let rule = self.rule(&class.name, span)?;
                class.rules.push(rule);
            }
            other => {
                return Err(Diagnostic::error(
                    "UNKNOWN_KEYWORD",
                    Some(span),
                    format!("unknown class member keyword `{other}`"),
                ))
            }
        }
        Ok(())
    }

    fn alternative(&mut self, class: &str) -> PResult<AttrConstructor> {
        if self.is_sym("{") {
            let rec = self.record_type()?;
            return Ok(AttrConstructor { tag: format!("Mk{class}"), components: vec![(None, rec)] });
        }
        let tag = self.ident()?;
        if self.is_sym("{") {
            let rec = self.record_type()?;
            return Ok(AttrConstructor { tag, components: vec![(None, rec)] });
        }
        self.expect_sym("(")?;
        let components = self.comma_list(")", |p| {
            let label = if matches!(p.peek().tok, Tok::Ident(_)) && matches!(p.peek_at(1), Tok::Sym(":")) {
                let l = p.ident()?;
                p.bump();
                Some(l)
            } else {
                None
            };
            Ok((label, p.type_expr()?))
        })?;
        Ok(AttrConstructor { tag, components })
    }

    fn record_type(&mut self) -> PResult<TypeExpr> {
        self.expect_sym("{")?;
        let fields = self.comma_list("}", |p| {
            let l = p.ident()?;
            p.expect_sym(":")?;
            Ok((l, p.type_expr()?))
        })?;
        Ok(TypeExpr::Record(fields))
    }

    fn type_expr(&mut self) -> PResult<TypeExpr> {
        if self.is_sym("{") {
            return self.record_type();
        }
        let name = self.ident()?;
        let args = if self.eat_sym("(") { self.comma_list(")", |p| p.type_expr())? } else { Vec::new() };
        Ok(TypeExpr::Named(name, args))
    }

    fn rule(&mut self, class: &str, span: SourceSpan) -> PResult<FunctionRule> {
        self.expect_sym("{")?;
        let mut pre = None;
        let mut post = None;
        let mut sol = None;
        let mut call: Option<(String, Vec<Pattern>)> = None;
        while !self.eat_sym("}") {
            let fspan = self.span();
            let field = self.ident()?;
            self.expect_sym(":")?;
            let dup = || Diagnostic::error("DUPLICATE_FIELD", Some(fspan.clone()), format!("rule field `{field}` given twice"));
            match field.as_str() {
                "pre" => {
                    if pre.is_some() {
                        return Err(dup());
                    }
                    pre = Some(self.checked()?);
                }
                "post" => {
                    if post.is_some() {
                        return Err(dup());
                    }
                    post = Some(self.checked()?);
                }
                "sol" => {
                    if sol.is_some() {
                        return Err(dup());
                    }
                    sol = Some(self.expr()?);
                }
                "call" => {
                    if call.is_some() {
                        return Err(dup());
                    }
                    call = Some(self.call_scheme()?);
                }
                other => {
                    return Err(Diagnostic::error(
                        "UNKNOWN_KEYWORD",
                        Some(fspan),
                        format!("unknown rule field `{other}`"),
                    ))
                }
            }
        }
        let (fname, args) = call.ok_or_else(|| {
            Diagnostic::error("MISSING_CALL", Some(span.clone()), "rule has no `call:` scheme")
        })?;
        Ok(FunctionRule {
            class: class.to_string(),
            fname,
            args,
            pre: pre.unwrap_or_else(CheckMode::trivial),
            post: post.unwrap_or_else(CheckMode::trivial),
            sol,
            origin: Origin(Some(span)),
        })
    }

    fn checked(&mut self) -> PResult<CheckMode> {
        if self.eat_kw("check") {
            return Ok(CheckMode::full(self.expr()?));
        }
        for (kw, mode) in [("and_check", CheckModeKind::ConjunctOnly), ("either_check", CheckModeKind::Approximation)] {
            if self.eat_kw(kw) {
                let unchecked = self.expr()?;
                self.expect_sym("::")?;
                let checked = self.expr()?;
                return Ok(CheckMode { mode, checked_part: checked, unchecked_part: Some(unchecked) });
            }
        }
        Ok(CheckMode::full(self.expr()?))
    }

    fn call_scheme(&mut self) -> PResult<(String, Vec<Pattern>)> {
        let span = self.span();
        let first = self.pattern()?;
        if self.is_sym(".") && !self.peek().spaced {
            self.bump();
            let fname = self.ident()?;
            self.expect_sym("(")?;
            let mut args = vec![first];
            args.extend(self.comma_list(")", |p| p.pattern())?);
            return Ok((fname, args));
        }
        match first {
            Pattern::Constructor(name, args) => Ok((name, args)),
            _ => Err(Diagnostic::error("UNEXPECTED_TOKEN", Some(span), "expected a call scheme `f(p1, ..., pn)`")),
        }
    }

    fn pattern(&mut self) -> PResult<Pattern> {
        let span = self.span();
        match self.peek().tok.clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Pattern::Literal(Value::Int(i)))
            }
            Tok::Real(r) => {
                self.bump();
                Ok(Pattern::Literal(Value::Real(r)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Pattern::Literal(Value::Str(s)))
            }
            Tok::Sym("-") => {
                self.bump();
                match self.peek().tok.clone() {
                    Tok::Int(i) => {
                        self.bump();
                        Ok(Pattern::Literal(Value::Int(-i)))
                    }
                    Tok::Real(r) => {
                        self.bump();
                        Ok(Pattern::Literal(Value::Real(-r)))
                    }
                    _ => Err(self.unexpected("numeric literal")),
                }
            }
            Tok::Sym("{") => {
                self.bump();
                let fields = self.comma_list("}", |p| {
                    let l = p.ident()?;
                    p.expect_sym(":")?;
                    Ok((l, p.pattern()?))
                })?;
                Ok(Pattern::Record(fields))
            }
            Tok::Ident(name) => {
                if name == "true" || name == "false" {
                    self.bump();
                    return Ok(Pattern::Literal(Value::Bool(name == "true")));
                }
                if self.is_sym_at(1, "(") && !self.spaced_at(1) {
                    self.bump();
                    self.bump();
                    let args = self.comma_list(")", |p| p.pattern())?;
                    return Ok(Pattern::Constructor(name, args));
                }
                if self.is_sym_at(1, "{") && !self.spaced_at(1) {
                    self.bump();
                    let rec = self.pattern()?;
                    return Ok(Pattern::Constructor(name, vec![rec]));
                }
                let v = self.binder()?;
                let _ = span;
                Ok(Pattern::Var(v))
            }
            _ => Err(self.unexpected("pattern")),
        }
    }

    fn is_sym_at(&self, n: usize, s: &str) -> bool {
        matches!(self.peek_at(n), Tok::Sym(x) if *x == s)
    }

    fn spaced_at(&self, n: usize) -> bool {
        self.toks[(self.pos + n).min(self.toks.len() - 1)].spaced
    }

    // ---- expressions ----

    fn expr(&mut self) -> PResult<Expr> {
        self.iff()
    }

    fn iff(&mut self) -> PResult<Expr> {
        let mut l = self.implies()?;
        while self.eat_kw("iff") {
            let r = self.implies()?;
            l = Expr::Logical(LogicOp::Iff, vec![l, r]);
        }
        Ok(l)
    }

    fn implies(&mut self) -> PResult<Expr> {
        let l = self.or()?;
        if self.eat_kw("implies") {
            let r = self.implies()?;
            return Ok(Expr::Logical(LogicOp::Implies, vec![l, r]));
        }
        Ok(l)
    }

    fn or(&mut self) -> PResult<Expr> {
        let mut l = self.and()?;
        while self.eat_kw("or") {
            let r = self.and()?;
            l = Expr::Logical(LogicOp::Or, vec![l, r]);
        }
        Ok(l)
    }

    fn and(&mut self) -> PResult<Expr> {
        let mut l = self.not()?;
        while self.eat_kw("and") {
            let r = self.not()?;
            l = Expr::Logical(LogicOp::And, vec![l, r]);
        }
        Ok(l)
    }

    fn not(&mut self) -> PResult<Expr> {
        if self.eat_kw("not") {
            let e = self.not()?;
            return Ok(Expr::Logical(LogicOp::Not, vec![e]));
        }
        self.relational()
    }

    fn relational(&mut self) -> PResult<Expr> {
        let l = self.range()?;
        let op = match self.peek().tok {
            Tok::Sym("=") => BinOp::Eq,
            Tok::Sym("!=") => BinOp::Ne,
            Tok::Sym("<") => BinOp::Lt,
            Tok::Sym("<=") => BinOp::Le,
            Tok::Sym(">") => BinOp::Gt,
            Tok::Sym(">=") => BinOp::Ge,
            _ => return Ok(l),
        };
        self.bump();
        let r = self.range()?;
        Ok(Expr::binary(op, l, r))
    }

    fn range(&mut self) -> PResult<Expr> {
        let l = self.additive()?;
        if self.eat_sym("..") {
            let r = self.additive()?;
            return Ok(Expr::Range(Box::new(l), Box::new(r)));
        }
        Ok(l)
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut l = self.multiplicative()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(l),
            };
            self.bump();
            let r = self.multiplicative()?;
            l = Expr::binary(op, l, r);
        }
    }

    fn multiplicative(&mut self) -> PResult<Expr> {
        let mut l = self.unary()?;
        loop {
            let op = match self.peek().tok {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                _ => return Ok(l),
            };
            self.bump();
            let r = self.unary()?;
            l = Expr::binary(op, l, r);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat_sym("-") {
            let e = self.unary()?;
            return Ok(Expr::Neg(Box::new(e)));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        loop {
            if self.is_sym(".") && !self.peek().spaced {
                self.bump();
                let name = self.ident()?;
                if self.is_sym(":") {
                    self.bump();
                    let f = self.ident()?;
                    self.expect_sym("(")?;
                    let args = self.comma_list(")", |p| p.expr())?;
                    e = Expr::QualifiedCall(Some(Box::new(e)), name, f, args);
                } else if self.is_sym("(") && !self.peek().spaced {
                    self.bump();
                    let args = self.comma_list(")", |p| p.expr())?;
                    e = Expr::DottedCall(Box::new(e), name, args);
                } else {
                    e = Expr::Field(Box::new(e), name);
                }
            } else if self.is_sym("[") && !self.peek().spaced {
                self.bump();
                let i = self.expr()?;
                self.expect_sym("]")?;
                e = Expr::Index(Box::new(e), Box::new(i));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek().tok.clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::Lit(Value::Int(i)))
            }
            Tok::Real(r) => {
                self.bump();
                Ok(Expr::Lit(Value::Real(r)))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(Expr::Lit(Value::Str(s)))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("[") => {
                self.bump();
                Ok(Expr::SeqLit(self.comma_list("]", |p| p.expr())?))
            }
            Tok::Sym("{") => {
                self.bump();
                Ok(Expr::RecordLit(self.record_fields()?))
            }
            Tok::Ident(name) => {
                match name.as_str() {
                    "true" | "false" => {
                        self.bump();
                        return Ok(Expr::Lit(Value::Bool(name == "true")));
                    }
                    n if n == RESULT => {
                        self.bump();
                        return Ok(Expr::ResultVar);
                    }
                    _ => {}
                }
                if let Some(q) = QuantSymbol::from_keyword(&name) {
                    if matches!(self.peek_at(1), Tok::Ident(_)) && matches!(self.peek_at(2), Tok::Ident(s) if s == "in") {
                        self.bump();
                        return self.quantifier(q);
                    }
                }
                if RESERVED.contains(&name.as_str()) {
                    return Err(self.unexpected("expression"));
                }
                self.bump();
                if self.is_sym(":") && matches!(self.peek_at(1), Tok::Ident(_)) && self.is_sym_at(2, "(") {
                    self.bump();
                    let f = self.ident()?;
                    self.expect_sym("(")?;
                    let args = self.comma_list(")", |p| p.expr())?;
                    return Ok(Expr::QualifiedCall(None, name, f, args));
                }
                if self.is_sym("(") && !self.peek().spaced {
                    self.bump();
                    let args = self.comma_list(")", |p| p.expr())?;
                    return Ok(Expr::Call(name, args));
                }
                if self.is_sym("{") && !self.peek().spaced {
                    self.bump();
                    let fields = self.record_fields()?;
                    return Ok(Expr::Construct(name, vec![Expr::RecordLit(fields)]));
                }
                Ok(Expr::Var(name))
            }
            _ => Err(self.unexpected("expression")),
        }
    }

    fn record_fields(&mut self) -> PResult<Vec<(String, Expr)>> {
        self.comma_list("}", |p| {
            let l = p.ident()?;
            p.expect_sym(":")?;
            Ok((l, p.expr()?))
        })
    }

    fn quantifier(&mut self, symbol: QuantSymbol) -> PResult<Expr> {
        let bound_var = self.binder()?;
        self.expect_kw("in")?;
        let collection = self.expr()?;
        let filter = if self.eat_sym("|") { self.expr()? } else { Expr::bool(true) };
        if !(self.is_sym(".") && self.peek().spaced) {
            return Err(self.unexpected("` . ` before the quantified expression"));
        }
        self.bump();
        let body = self.expr()?;
        Ok(Expr::Quant(QuantExpr {
            symbol,
            bound_var,
            collection: Box::new(collection),
            filter: Box::new(filter),
            body: Box::new(body),
        }))
    }
}

fn delim_delta(s: &str) -> i64 {
    match s {
        "(" | "[" | "{" => 1,
        ")" | "]" | "}" => -1,
        _ => 0,
    }
}

// ---------------------------------------------------------------------------
// Pretty printing

pub fn pretty_print(defs: &[ClassDef]) -> String {
    let mut out = String::new();
    for (i, c) in defs.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_class(c, &mut out);
    }
    out
}

fn print_class(c: &ClassDef, out: &mut String) {
    out.push_str("class ");
    out.push_str(&c.name);
    if !c.type_params.is_empty() {
        out.push_str(&format!("({})", c.type_params.join(", ")));
    }
    if !c.parents.is_empty() {
        out.push_str(&format!(" extends {}", c.parents.join(", ")));
    }
    out.push_str(" {\n");
    for a in &c.alternatives {
        out.push_str(&format!("  case {}(", a.tag));
        let comps: Vec<String> = a
            .components
            .iter()
            .map(|(l, t)| match l {
                Some(l) => format!("{l}: {t}"),
                None => t.to_string(),
            })
            .collect();
        out.push_str(&comps.join(", "));
        out.push_str(")\n");
    }
    for t in &c.traversal_rules {
        let items: Vec<String> = t.items.iter().map(print_expr).collect();
        out.push_str(&format!("  traverse {} => [{}]\n", print_pattern(&t.shape), items.join(", ")));
    }
    for d in &c.op_decls {
        let args: Vec<String> = d.arg_types.iter().map(|t| t.to_string()).collect();
        out.push_str(&format!("  {} {}({})", d.kind.keyword(), d.name, args.join(", ")));
        if let Some(r) = &d.result_type {
            out.push_str(&format!(" : {r}"));
        }
        out.push('\n');
    }
    for r in &c.rules {
        out.push_str("  rule {\n");
        if !r.pre.is_trivially_true() {
            out.push_str(&format!("    pre: {}\n", print_checked(&r.pre)));
        }
        let args: Vec<String> = r.args.iter().map(print_pattern).collect();
        out.push_str(&format!("    call: {}({})\n", r.fname, args.join(", ")));
        if !r.post.is_trivially_true() {
            out.push_str(&format!("    post: {}\n", print_checked(&r.post)));
        }
        if let Some(s) = &r.sol {
            out.push_str(&format!("    sol: {}\n", print_expr(s)));
        }
        out.push_str("  }\n");
    }
    out.push_str("}\n");
}

pub fn print_checked(c: &CheckMode) -> String {
    match (c.mode, &c.unchecked_part) {
        (CheckModeKind::ConjunctOnly, Some(u)) => {
            format!("and_check {} :: {}", print_expr(u), print_expr(&c.checked_part))
        }
        (CheckModeKind::Approximation, Some(u)) => {
            format!("either_check {} :: {}", print_expr(u), print_expr(&c.checked_part))
        }
        _ => print_expr(&c.checked_part),
    }
}

pub fn print_pattern(p: &Pattern) -> String {
    match p {
        Pattern::Var(v) => v.clone(),
        Pattern::Literal(v) => print_literal(v),
        Pattern::Constructor(t, ps) => {
            let inner: Vec<String> = ps.iter().map(print_pattern).collect();
            format!("{t}({})", inner.join(", "))
        }
        Pattern::Record(fs) => {
            let inner: Vec<String> = fs.iter().map(|(l, p)| format!("{l}: {}", print_pattern(p))).collect();
            format!("{{{}}}", inner.join(", "))
        }
    }
}

pub fn print_literal(v: &Value) -> String {
    match v {
        Value::Int(i) => i.to_string(),
        Value::Real(r) => format!("{r:?}"),
        Value::Bool(b) => b.to_string(),
        Value::Str(s) => {
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
        // Compound values only appear as literals when built programmatically.
        Value::Seq(items) => format!("[{}]", items.iter().map(print_literal).collect::<Vec<_>>().join(", ")),
        Value::Record(fs) => format!(
            "{{{}}}",
            fs.iter().map(|(l, v)| format!("{l}: {}", print_literal(v))).collect::<Vec<_>>().join(", ")
        ),
        Value::Con(t, args) => format!("{t}({})", args.iter().map(print_literal).collect::<Vec<_>>().join(", ")),
    }
}

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Quant(_) => 0,
        Expr::Logical(LogicOp::Iff, _) => 1,
        Expr::Logical(LogicOp::Implies, _) => 2,
        Expr::Logical(LogicOp::Or, _) => 3,
        Expr::Logical(LogicOp::And, _) => 4,
        Expr::Logical(LogicOp::Not, _) => 5,
        Expr::Binary(op, ..) if op.is_relational() => 6,
        Expr::Range(..) => 7,
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => 8,
        Expr::Binary(..) => 9,
        Expr::Neg(_) => 10,
        Expr::Field(..) | Expr::Index(..) | Expr::DottedCall(..) | Expr::QualifiedCall(Some(_), ..) => 11,
        _ => 12,
    }
}

pub fn print_expr(e: &Expr) -> String {
    let mut out = String::new();
    pe(e, 0, &mut out);
    out
}

fn args_str(args: &[Expr]) -> String {
    args.iter().map(print_expr).collect::<Vec<_>>().join(", ")
}

fn pe(e: &Expr, min: u8, out: &mut String) {
    let p = prec(e);
    let paren = p < min;
    if paren {
        out.push('(');
    }
    match e {
        Expr::Lit(v) => out.push_str(&print_literal(v)),
        Expr::Var(v) => out.push_str(v),
        Expr::ResultVar => out.push_str(RESULT),
        Expr::Construct(t, args) => match args.as_slice() {
            [Expr::RecordLit(fs)] => {
                out.push_str(t);
                out.push_str(&print_expr(&Expr::RecordLit(fs.clone())));
            }
            _ => out.push_str(&format!("{t}({})", args_str(args))),
        },
        Expr::Call(f, args) => out.push_str(&format!("{f}({})", args_str(args))),
        Expr::DottedCall(r, f, args) => {
            pe(r, 11, out);
            out.push_str(&format!(".{f}({})", args_str(args)));
        }
        Expr::QualifiedCall(r, c, f, args) => {
            if let Some(r) = r {
                pe(r, 11, out);
                out.push('.');
            }
            out.push_str(&format!("{c}:{f}({})", args_str(args)));
        }
        Expr::Logical(op, args) => match (op, args.as_slice()) {
            (LogicOp::Not, [a]) => {
                out.push_str("not ");
                pe(a, 5, out);
            }
            (LogicOp::Implies, [l, r]) => {
                pe(l, 3, out);
                out.push_str(" implies ");
                pe(r, 2, out);
            }
            (op, [l, r]) => {
                let lp = prec(e);
                pe(l, lp, out);
                out.push_str(&format!(" {} ", op.name()));
                pe(r, lp + 1, out);
            }
            (op, items) => {
                // n-ary forms fold left.
                let lp = prec(e);
                for (i, a) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(&format!(" {} ", op.name()));
                    }
                    pe(a, if i == 0 { lp } else { lp + 1 }, out);
                }
            }
        },
        Expr::Binary(op, l, r) => {
            if op.is_relational() {
                pe(l, 7, out);
                out.push_str(&format!(" {} ", op.symbol()));
                pe(r, 7, out);
            } else {
                pe(l, p, out);
                out.push_str(&format!(" {} ", op.symbol()));
                pe(r, p + 1, out);
            }
        }
        Expr::Neg(a) => {
            out.push('-');
            pe(a, 10, out);
        }
        Expr::Quant(q) => {
            out.push_str(&format!("{} {} in ", q.symbol.keyword(), q.bound_var));
            pe(&q.collection, 1, out);
            out.push_str(" | ");
            pe(&q.filter, 1, out);
            out.push_str(" . ");
            pe(&q.body, 0, out);
        }
        Expr::Field(a, l) => {
            pe(a, 11, out);
            out.push('.');
            out.push_str(l);
        }
        Expr::Index(a, i) => {
            pe(a, 11, out);
            out.push('[');
            pe(i, 0, out);
            out.push(']');
        }
        Expr::Range(l, r) => {
            pe(l, 8, out);
            out.push_str(" .. ");
            pe(r, 8, out);
        }
        Expr::SeqLit(items) => out.push_str(&format!("[{}]", args_str(items))),
        Expr::RecordLit(fs) => {
            let inner: Vec<String> = fs.iter().map(|(l, e)| format!("{l}: {}", print_expr(e))).collect();
            out.push_str(&format!("{{{}}}", inner.join(", ")));
        }
    }
    if paren {
        out.push(')');
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_point_class() {
        let defs = parse_spec("class Point { case Cartesian(Real, Real) }").unwrap();
        assert_eq!(defs.len(), 1);
        assert_eq!(defs[0].name, "Point");
        assert_eq!(defs[0].alternatives[0].tag, "Cartesian");
        assert_eq!(defs[0].alternatives[0].components.len(), 2);
    }

    #[test]
    fn parses_recursive_parameterized_tree() {
        let defs = parse_spec("class Tree(Elem) { case Empty() case Node(Tree(Elem), Elem, Tree(Elem)) }").unwrap();
        let t = &defs[0];
        assert_eq!(t.type_params, vec!["Elem".to_string()]);
        assert_eq!(t.alternatives[0].components.len(), 0);
        assert_eq!(
            t.alternatives[1].components[0].1,
            TypeExpr::Named("Tree".into(), vec![TypeExpr::named("Elem")])
        );
    }

    #[test]
    fn empty_input_is_empty_spec() {
        assert_eq!(parse_spec("").unwrap(), Vec::new());
    }

    #[test]
    fn parses_sum_quantifier_with_filter() {
        let e = parse_expr("sum t in ctrans | t.source = n . t.amount").unwrap();
        let Expr::Quant(q) = e else { panic!("not a quantifier") };
        assert_eq!(q.symbol, QuantSymbol::Sum);
        assert_eq!(q.bound_var, "t");
        assert_eq!(*q.collection, Expr::var("ctrans"));
        assert_eq!(
            *q.filter,
            Expr::binary(BinOp::Eq, Expr::Field(Box::new(Expr::var("t")), "source".into()), Expr::var("n"))
        );
        assert_eq!(*q.body, Expr::Field(Box::new(Expr::var("t")), "amount".into()));
    }

    #[test]
    fn parses_result_equation() {
        let e = parse_expr("Result = Cartesian(x, y)").unwrap();
        assert_eq!(
            e,
            Expr::binary(
                BinOp::Eq,
                Expr::ResultVar,
                Expr::Call("Cartesian".into(), vec![Expr::var("x"), Expr::var("y")])
            )
        );
        assert_eq!(parse_expr("true").unwrap(), Expr::bool(true));
    }

    #[test]
    fn precedence_follows_the_documented_table() {
        let e = parse_expr("2 + 3 * 4").unwrap();
        assert_eq!(
            e,
            Expr::binary(BinOp::Add, Expr::int(2), Expr::binary(BinOp::Mul, Expr::int(3), Expr::int(4)))
        );
        let e = parse_expr("a or b and not c implies d iff e").unwrap();
        let Expr::Logical(LogicOp::Iff, ops) = e else { panic!() };
        assert!(matches!(&ops[0], Expr::Logical(LogicOp::Implies, _)));
    }

    #[test]
    fn qualified_and_dotted_calls() {
        assert_eq!(
            parse_expr("obj.Point:CoordX()").unwrap(),
            Expr::QualifiedCall(Some(Box::new(Expr::var("obj"))), "Point".into(), "CoordX".into(), vec![])
        );
        assert_eq!(
            parse_expr("p.CoordY()").unwrap(),
            Expr::DottedCall(Box::new(Expr::var("p")), "CoordY".into(), vec![])
        );
        assert!(matches!(parse_expr("Point:Cartesian(1, 2)").unwrap(), Expr::QualifiedCall(None, ..)));
    }

    #[test]
    fn check_annotations() {
        let defs = parse_spec(
            "class A { rule { call: F(x) post: and_check G(x) :: Result = x } rule { call: H(x) post: either_check G(x) :: Result > 0 } }",
        )
        .unwrap();
        assert_eq!(defs[0].rules[0].post.mode, CheckModeKind::ConjunctOnly);
        assert_eq!(defs[0].rules[1].post.mode, CheckModeKind::Approximation);
        assert!(defs[0].rules[0].post.unchecked_part.is_some());
    }

    #[test]
    fn receiver_call_scheme_desugars() {
        let defs = parse_spec("class P { case C(Real, Real) observer X() : Real rule { call: C(x, y).X() post: Result = x } }").unwrap();
        let r = &defs[0].rules[0];
        assert_eq!(r.fname, "X");
        assert_eq!(r.args, vec![Pattern::Constructor("C".into(), vec![Pattern::Var("x".into()), Pattern::Var("y".into())])]);
    }

    #[test]
    fn errors_carry_codes_and_suppress_output() {
        let errs = parse_spec("class A { bogus X() }").unwrap_err();
        assert_eq!(errs[0].code, "UNKNOWN_KEYWORD");
        assert!(errs[0].span.is_some());
        let errs = parse_spec("class A { case B( }").unwrap_err();
        assert_eq!(errs[0].code, "UNBALANCED");
        let errs = parse_spec("class A { rule { call: F(Result) } }").unwrap_err();
        assert_eq!(errs[0].code, "RESERVED_IDENT");
    }

    #[test]
    fn errors_in_several_classes_are_all_reported() {
        let errs = parse_spec("class A { bogus } class B { case C() } class D { wrong }").unwrap_err();
        assert_eq!(errs.len(), 2);
    }

    #[test]
    fn round_trip_of_small_specs() {
        for src in [
            "class Point { case Cartesian(Real, Real) case Polar(Real, Real) }",
            "class Tree(Elem) { case Empty() case Node(Tree(Elem), Elem, Tree(Elem)) traverse Empty() => [] traverse Node(ls, root, rs) => [root, ls, rs] }",
            "class Bank { case bank{name: String, amount: Real} constructor MakeBank(String, Real) rule { call: MakeBank(n, a) sol: bank(n, a) } }",
        ] {
            let a = parse_spec(src).unwrap();
            let b = parse_spec(&pretty_print(&a)).unwrap();
            assert_eq!(a, b, "{}", pretty_print(&a));
        }
    }

    #[test]
    fn quantifiers_nested_in_operators_are_parenthesized() {
        let src = "(forall x in s | true . x > 0) and (exists y in s . y = 1)";
        let e = parse_expr(src).unwrap();
        let printed = print_expr(&e);
        assert_eq!(parse_expr(&printed).unwrap(), e, "{printed}");
    }
}
