//! `.slimp`: the small imperative surface generated skeletons are written
//! in. Records, tagged unions, counted loops, pattern matching and calls;
//! nothing else.
//!
//! ```text
//! type Point = Cartesian(Real, Real) | Polar(Real, Real);
//! func CoordX(p) {
//!   pre_check("Point:CoordX", p);
//!   match (p) { case (Point::Cartesian(x, y)) { return post_check("Point:CoordX", p, x); } }
//!   fail "NO_APPLICABLE_RULE";
//! }
//! ```

use crate::ast::{BinOp, LogicOp, Value};
use crate::diag::{Diagnostic, SourceSpan};

#[derive(Clone, Debug, PartialEq)]
pub enum SExpr {
    Lit(Value),
    Var(String),
    Call(String, Vec<SExpr>),
    /// Qualified tag.
    Con(String, Vec<SExpr>),
    Field(Box<SExpr>, String),
    Index(Box<SExpr>, Box<SExpr>),
    Bin(BinOp, Box<SExpr>, Box<SExpr>),
    Logic(LogicOp, Vec<SExpr>),
    Neg(Box<SExpr>),
    Seq(Vec<SExpr>),
    Rec(Vec<(String, SExpr)>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum SPat {
    Var(String),
    Lit(Value),
    Con(String, Vec<SPat>),
    Rec(Vec<(String, SPat)>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Arm {
    pub pats: Vec<SPat>,
    pub body: Vec<Stmt>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Var(String, SExpr),
    Assign(String, SExpr),
    If(SExpr, Vec<Stmt>, Vec<Stmt>),
    For { var: String, from: SExpr, to: SExpr, down: bool, body: Vec<Stmt> },
    Match(Vec<SExpr>, Vec<Arm>),
    Return(SExpr, usize),
    Fail(String),
    PreCheck(String, Vec<SExpr>, usize),
    Expr(SExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TypeDecl {
    pub name: String,
    pub parents: Vec<String>,
    /// Tag and component texts (`label: Type` for record alternatives).
    pub alts: Vec<(String, Vec<String>)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Func {
    pub name: String,
    pub params: Vec<String>,
    pub body: Vec<Stmt>,
    /// `func` (a specified function, carries check hooks) or `proc` (helper).
    pub hooked: bool,
    pub line: usize,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Module {
    pub imports: Vec<String>,
    pub types: Vec<TypeDecl>,
    pub funcs: Vec<Func>,
    pub main: Option<Vec<Stmt>>,
}

pub const POST_CHECK: &str = "post_check";
pub const PRE_CHECK: &str = "pre_check";

const KEYWORDS: &[&str] = &[
    "and", "case", "downto", "else", "extends", "fail", "false", "for", "func", "if", "import", "in", "main",
    "match", "not", "or", "proc", "return", "true", "type", "var",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Num(String),
    Str(String),
    Sym(&'static str),
}

const SYMBOLS: &[&str] = &[
    "::", "..", "!=", "<=", ">=", "(", ")", "{", "}", "[", "]", ",", ";", ":", ".", "=", "<", ">", "+", "-", "*",
    "/", "|",
];

fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Diagnostic {
    Diagnostic::error("SLIMP_SYNTAX", Some(SourceSpan::new(line, col.max(1), 1)), msg)
}

fn lex(src: &str) -> Result<Vec<(Tok, usize, usize)>, Diagnostic> {
    let cs: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let mut out = Vec::new();
    while i < cs.len() {
        let c = cs[i];
        let (l0, c0) = (line, col);
        let adv = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
        } else if c.is_whitespace() {
            adv(1, &mut i, &mut col);
        } else if c == '/' && cs.get(i + 1) == Some(&'/') {
            while i < cs.len() && cs[i] != '\n' {
                i += 1;
            }
        } else if c.is_alphabetic() || c == '_' {
            let s = i;
            while i < cs.len() && (cs[i].is_alphanumeric() || cs[i] == '_') {
                i += 1;
            }
            col += i - s;
            out.push((Tok::Ident(cs[s..i].iter().collect()), l0, c0));
        } else if c.is_ascii_digit() {
            let s = i;
            while i < cs.len() && cs[i].is_ascii_digit() {
                i += 1;
            }
            if cs.get(i) == Some(&'.') && cs.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                i += 1;
                while i < cs.len() && cs[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if matches!(cs.get(i), Some('e' | 'E')) {
                let mut j = i + 1;
                if matches!(cs.get(j), Some('+' | '-')) {
                    j += 1;
                }
                if cs.get(j).is_some_and(|d| d.is_ascii_digit()) {
                    i = j;
                    while i < cs.len() && cs[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            col += i - s;
            out.push((Tok::Num(cs[s..i].iter().collect()), l0, c0));
        } else if c == '"' {
            let mut s = String::new();
            adv(1, &mut i, &mut col);
            loop {
                match cs.get(i) {
                    None | Some('\n') => return Err(syntax(l0, c0, "unterminated string")),
                    Some('"') => {
                        adv(1, &mut i, &mut col);
                        break;
                    }
                    Some('\\') => {
                        let e = match cs.get(i + 1) {
                            Some('n') => '\n',
                            Some('t') => '\t',
                            Some('\\') => '\\',
                            Some('"') => '"',
                            _ => return Err(syntax(line, col, "bad escape")),
                        };
                        s.push(e);
                        adv(2, &mut i, &mut col);
                    }
                    Some(&ch) => {
                        s.push(ch);
                        adv(1, &mut i, &mut col);
                    }
                }
            }
            out.push((Tok::Str(s), l0, c0));
        } else {
            let rest: String = cs[i..cs.len().min(i + 2)].iter().collect();
            let Some(sym) = SYMBOLS.iter().find(|s| rest.starts_with(**s)) else {
                return Err(syntax(line, col, format!("unexpected character `{c}`")));
            };
            adv(sym.len(), &mut i, &mut col);
            out.push((Tok::Sym(sym), l0, c0));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize, usize)>,
    pos: usize,
}

type PResult<T> = Result<T, Diagnostic>;

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.0)
    }

    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(1, |t| t.1)
    }

    fn err<T>(&self, msg: impl Into<String>) -> PResult<T> {
        let (l, c) = self.toks.get(self.pos).or(self.toks.last()).map_or((1, 1), |t| (t.1, t.2));
        Err(syntax(l, c, msg))
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_kw(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == s)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        let hit = self.is_sym(s);
        self.pos += usize::from(hit);
        hit
    }

    fn eat_kw(&mut self, s: &str) -> bool {
        let hit = self.is_kw(s);
        self.pos += usize::from(hit);
        hit
    }

    fn sym(&mut self, s: &str) -> PResult<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn kw(&mut self, s: &str) -> PResult<()> {
        if self.eat_kw(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`"))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(x)) if !is_keyword(x) => {
                let x = x.clone();
                self.pos += 1;
                Ok(x)
            }
            _ => self.err("expected an identifier"),
        }
    }

    /// Field labels may coincide with keywords.
    fn label(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Ident(x)) => {
                let x = x.clone();
                self.pos += 1;
                Ok(x)
            }
            _ => self.err("expected a field label"),
        }
    }

    fn string(&mut self) -> PResult<String> {
        match self.peek() {
            Some(Tok::Str(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => self.err("expected a string"),
        }
    }

    fn list<T>(&mut self, close: &str, mut item: impl FnMut(&mut Self) -> PResult<T>) -> PResult<Vec<T>> {
        let mut out = Vec::new();
        if self.eat_sym(close) {
            return Ok(out);
        }
        loop {
            out.push(item(self)?);
            if self.eat_sym(close) {
                return Ok(out);
            }
            self.sym(",")?;
        }
    }

    fn module(&mut self) -> PResult<Module> {
        let mut m = Module::default();
        while self.peek().is_some() {
            if self.eat_kw("import") {
                m.imports.push(self.string()?);
                self.sym(";")?;
            } else if self.eat_kw("type") {
                m.types.push(self.type_decl()?);
            } else if self.is_kw("func") || self.is_kw("proc") {
                let line = self.line();
                let hooked = self.eat_kw("func");
                if !hooked {
                    self.kw("proc")?;
                }
                let name = self.ident()?;
                self.sym("(")?;
                let params = self.list(")", Self::ident)?;
                let body = self.block()?;
                m.funcs.push(Func { name, params, body, hooked, line });
            } else if self.eat_kw("main") {
                if m.main.is_some() {
                    return self.err("duplicate `main`");
                }
                m.main = Some(self.block()?);
            } else {
                return self.err("expected `import`, `type`, `func`, `proc` or `main`");
            }
        }
        Ok(m)
    }

    fn type_text(&mut self) -> PResult<String> {
        let mut s = self.ident()?;
        if self.eat_sym("(") {
            let args = self.list(")", Self::type_text)?;
            s = format!("{s}({})", args.join(", "));
        }
        Ok(s)
    }

    fn type_decl(&mut self) -> PResult<TypeDecl> {
        let name = self.ident()?;
        let mut parents = Vec::new();
        if self.eat_kw("extends") {
            parents.push(self.ident()?);
            while self.eat_sym(",") {
                parents.push(self.ident()?);
            }
        }
        let mut alts = Vec::new();
        if self.eat_sym(";") {
            return Ok(TypeDecl { name, parents, alts });
        }
        self.sym("=")?;
        loop {
            let tag = self.ident()?;
            let comps = if self.eat_sym("(") {
                self.list(")", Self::type_text)?
            } else if self.eat_sym("{") {
                self.list("}", |p| {
                    let l = p.label()?;
                    p.sym(":")?;
                    Ok(format!("{l}: {}", p.type_text()?))
                })?
            } else {
                Vec::new()
            };
            alts.push((tag, comps));
            if !self.eat_sym("|") {
                break;
            }
        }
        self.sym(";")?;
        Ok(TypeDecl { name, parents, alts })
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.sym("{")?;
        let mut out = Vec::new();
        while !self.eat_sym("}") {
            if self.peek().is_none() {
                return self.err("unterminated block");
            }
            out.push(self.stmt()?);
        }
        Ok(out)
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let line = self.line();
        if self.eat_kw("var") {
            let x = self.ident()?;
            self.sym("=")?;
            let e = self.expr()?;
            self.sym(";")?;
            return Ok(Stmt::Var(x, e));
        }
        if self.eat_kw("if") {
            let c = self.expr()?;
            let then = self.block()?;
            let els = if self.eat_kw("else") {
                if self.is_kw("if") {
                    vec![self.stmt()?]
                } else {
                    self.block()?
                }
            } else {
                Vec::new()
            };
            return Ok(Stmt::If(c, then, els));
        }
        if self.eat_kw("for") {
            let var = self.ident()?;
            self.kw("in")?;
            let from = self.expr()?;
            let down = if self.eat_kw("downto") {
                true
            } else {
                self.sym("..")?;
                false
            };
            let to = self.expr()?;
            let body = self.block()?;
            return Ok(Stmt::For { var, from, to, down, body });
        }
        if self.eat_kw("match") {
            self.sym("(")?;
            let scrut = self.list(")", Self::expr)?;
            self.sym("{")?;
            let mut arms = Vec::new();
            while self.eat_kw("case") {
                self.sym("(")?;
                let pats = self.list(")", Self::pattern)?;
                if pats.len() != scrut.len() {
                    return self.err(format!("case has {} patterns for {} values", pats.len(), scrut.len()));
                }
                arms.push(Arm { pats, body: self.block()? });
            }
            self.sym("}")?;
            return Ok(Stmt::Match(scrut, arms));
        }
        if self.eat_kw("return") {
            let e = self.expr()?;
            self.sym(";")?;
            return Ok(Stmt::Return(e, line));
        }
        if self.eat_kw("fail") {
            let s = self.string()?;
            self.sym(";")?;
            return Ok(Stmt::Fail(s));
        }
        if self.is_kw(PRE_CHECK) {
            self.pos += 1;
            self.sym("(")?;
            let name = self.string()?;
            let mut args = Vec::new();
            while self.eat_sym(",") {
                args.push(self.expr()?);
            }
            self.sym(")")?;
            self.sym(";")?;
            return Ok(Stmt::PreCheck(name, args, line));
        }
        if matches!(self.peek(), Some(Tok::Ident(_))) && matches!(self.peek_at(1), Some(Tok::Sym("="))) {
            let x = self.ident()?;
            self.sym("=")?;
            let e = self.expr()?;
            self.sym(";")?;
            return Ok(Stmt::Assign(x, e));
        }
        let e = self.expr()?;
        self.sym(";")?;
        Ok(Stmt::Expr(e))
    }

    fn pattern(&mut self) -> PResult<SPat> {
        if let Some(v) = self.literal()? {
            return Ok(SPat::Lit(v));
        }
        if self.eat_sym("{") {
            let fs = self.list("}", |p| {
                let l = p.label()?;
                p.sym(":")?;
                Ok((l, p.pattern()?))
            })?;
            return Ok(SPat::Rec(fs));
        }
        let x = self.ident()?;
        if self.eat_sym("::") {
            let tag = format!("{x}{}", self.ident()?);
            let args = if self.eat_sym("(") { self.list(")", Self::pattern)? } else { Vec::new() };
            return Ok(SPat::Con(tag, args));
        }
        Ok(SPat::Var(x))
    }

    /// Number (optionally negated), string or boolean literal.
    fn literal(&mut self) -> PResult<Option<Value>> {
        let neg = self.is_sym("-") && matches!(self.peek_at(1), Some(Tok::Num(_)));
        let at = self.pos + usize::from(neg);
        let v = match self.toks.get(at).map(|t| &t.0) {
            Some(Tok::Num(n)) => {
                let text = if neg { format!("-{n}") } else { n.clone() };
                if text.contains(['.', 'e', 'E']) {
                    match text.parse::<f64>() {
                        Ok(r) => Value::Real(r),
                        Err(_) => return self.err(format!("bad real `{text}`")),
                    }
                } else {
                    match text.parse::<i64>() {
                        Ok(i) => Value::Int(i),
                        Err(_) => return self.err(format!("integer `{text}` out of range")),
                    }
                }
            }
            Some(Tok::Str(s)) if !neg => Value::Str(s.clone()),
            Some(Tok::Ident(k)) if !neg && (k == "true" || k == "false") => Value::Bool(k == "true"),
            _ => return Ok(None),
        };
        self.pos = at + 1;
        Ok(Some(v))
    }

    pub fn expr(&mut self) -> PResult<SExpr> {
        let mut l = self.and_expr()?;
        while self.eat_kw("or") {
            l = SExpr::Logic(LogicOp::Or, vec![l, self.and_expr()?]);
        }
        Ok(l)
    }

    fn and_expr(&mut self) -> PResult<SExpr> {
        let mut l = self.not_expr()?;
        while self.eat_kw("and") {
            l = SExpr::Logic(LogicOp::And, vec![l, self.not_expr()?]);
        }
        Ok(l)
    }

    fn not_expr(&mut self) -> PResult<SExpr> {
        if self.eat_kw("not") {
            return Ok(SExpr::Logic(LogicOp::Not, vec![self.not_expr()?]));
        }
        self.cmp_expr()
    }

    fn cmp_expr(&mut self) -> PResult<SExpr> {
        let l = self.add_expr()?;
        let op = match self.peek() {
            Some(Tok::Sym("=")) => BinOp::Eq,
            Some(Tok::Sym("!=")) => BinOp::Ne,
            Some(Tok::Sym("<")) => BinOp::Lt,
            Some(Tok::Sym("<=")) => BinOp::Le,
            Some(Tok::Sym(">")) => BinOp::Gt,
            Some(Tok::Sym(">=")) => BinOp::Ge,
            _ => return Ok(l),
        };
        self.pos += 1;
        Ok(SExpr::Bin(op, Box::new(l), Box::new(self.add_expr()?)))
    }

    fn add_expr(&mut self) -> PResult<SExpr> {
        let mut l = self.mul_expr()?;
        loop {
            let op = if self.eat_sym("+") {
                BinOp::Add
            } else if self.eat_sym("-") {
                BinOp::Sub
            } else {
                return Ok(l);
            };
            l = SExpr::Bin(op, Box::new(l), Box::new(self.mul_expr()?));
        }
    }

    fn mul_expr(&mut self) -> PResult<SExpr> {
        let mut l = self.unary()?;
        loop {
            let op = if self.eat_sym("*") {
                BinOp::Mul
            } else if self.eat_sym("/") {
                BinOp::Div
            } else {
                return Ok(l);
            };
            l = SExpr::Bin(op, Box::new(l), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> PResult<SExpr> {
        if self.is_sym("-") && !matches!(self.peek_at(1), Some(Tok::Num(_))) {
            self.pos += 1;
            return Ok(SExpr::Neg(Box::new(self.unary()?)));
        }
        let mut e = self.primary()?;
        loop {
            if self.eat_sym(".") {
                e = SExpr::Field(Box::new(e), self.label()?);
            } else if self.eat_sym("[") {
                let i = self.expr()?;
                self.sym("]")?;
                e = SExpr::Index(Box::new(e), Box::new(i));
            } else {
                return Ok(e);
            }
        }
    }

    fn primary(&mut self) -> PResult<SExpr> {
        if let Some(v) = self.literal()? {
            return Ok(SExpr::Lit(v));
        }
        if self.eat_sym("(") {
            let e = self.expr()?;
            self.sym(")")?;
            return Ok(e);
        }
        if self.eat_sym("[") {
            return Ok(SExpr::Seq(self.list("]", Self::expr)?));
        }
        if self.eat_sym("{") {
            let fs = self.list("}", |p| {
                let l = p.label()?;
                p.sym(":")?;
                Ok((l, p.expr()?))
            })?;
            return Ok(SExpr::Rec(fs));
        }
        let x = if self.is_kw(POST_CHECK) {
            self.pos += 1;
            POST_CHECK.to_string()
        } else {
            self.ident()?
        };
        if self.eat_sym("::") {
            let tag = format!("{x}{}", self.ident()?);
            let args = if self.eat_sym("(") { self.list(")", Self::expr)? } else { Vec::new() };
            return Ok(SExpr::Con(tag, args));
        }
        if self.eat_sym("(") {
            return Ok(SExpr::Call(x, self.list(")", Self::expr)?));
        }
        Ok(SExpr::Var(x))
    }
}

pub fn parse_module(src: &str) -> Result<Module, Diagnostic> {
    Parser { toks: lex(src)?, pos: 0 }.module()
}

pub fn parse_sexpr(src: &str) -> Result<SExpr, Diagnostic> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr()?;
    if p.peek().is_some() {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_hooked_function() {
        let m = parse_module(
            "type Point = Cartesian(Real, Real) | Polar(Real, Real);
             func CoordX(p) {
               pre_check(\"Point:CoordX\", p);
               match (p) { case (Point::Cartesian(x, y)) { return post_check(\"Point:CoordX\", p, x); } }
               fail \"NO_APPLICABLE_RULE\";
             }",
        )
        .unwrap();
        assert_eq!(m.types[0].alts.len(), 2);
        let f = &m.funcs[0];
        assert!(f.hooked);
        assert!(matches!(&f.body[0], Stmt::PreCheck(n, a, _) if n == "Point:CoordX" && a.len() == 1));
        let Stmt::Match(_, arms) = &f.body[1] else { panic!() };
        assert_eq!(arms[0].pats[0], SPat::Con("PointCartesian".into(), vec![SPat::Var("x".into()), SPat::Var("y".into())]));
    }

    #[test]
    fn literals_and_precedence() {
        assert_eq!(parse_sexpr("-9223372036854775808").unwrap(), SExpr::Lit(Value::Int(i64::MIN)));
        assert_eq!(parse_sexpr("2.0").unwrap(), SExpr::Lit(Value::Real(2.0)));
        let e = parse_sexpr("a - -1 * b").unwrap();
        assert!(matches!(e, SExpr::Bin(BinOp::Sub, _, r) if matches!(*r, SExpr::Bin(BinOp::Mul, _, _))));
        assert!(parse_module("func f( {").is_err());
    }
}
