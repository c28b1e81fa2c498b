//! Interpreter for `.slimp` skeletons, with the check hooks wired to the
//! contract checker through `.slamx` files.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use crate::ast::Value;
use crate::check::{self, CheckRecord, Kind, Policy, Verdict};
use crate::codegen::{self, EmittedFile, MAIN_FILE};
use crate::diag::Diagnostic;
use crate::engine::EngineLimits;
use crate::eval::Evaluator;
use crate::ir::LogicProgram;
use crate::ops::{self, EvalError, EvalResult};
use crate::semantics::{elaborate_query, project_to_ancestor, ClassHierarchy};
use crate::slimp::{self, Func, SExpr, SPat, Stmt, POST_CHECK};
use crate::{ast::Expr, parser, wire};

pub trait Hooks {
    fn pre(&mut self, function: &str, args: &[Value]) -> EvalResult<()>;
    /// Returns the result to hand back to the caller.
    fn post(&mut self, function: &str, args: &[Value], result: Value) -> EvalResult<Value>;
}

/// Hooks compiled out: the baseline for overhead measurements.
pub struct NoHooks;

impl Hooks for NoHooks {
    fn pre(&mut self, _: &str, _: &[Value]) -> EvalResult<()> {
        Ok(())
    }

    fn post(&mut self, _: &str, _: &[Value], result: Value) -> EvalResult<Value> {
        Ok(result)
    }
}

/// How a hook reaches the checker.
#[derive(Clone, Debug)]
pub enum HookMode {
    /// Write the `.slamx` file and check it in this process.
    InProcess,
    /// Write the `.slamx` file and run `<exe> check-call` on it.
    Spawn { exe: PathBuf, specs: Vec<PathBuf> },
}

pub struct CheckHooks<'p> {
    prog: &'p LogicProgram,
    limits: EngineLimits,
    policy: Policy,
    mode: HookMode,
    dir: tempfile::TempDir,
    seq: usize,
    pub records: Vec<CheckRecord>,
    pub aborted: bool,
}

pub const CHECK_ABORTED: &str = "CHECK_ABORTED";

impl<'p> CheckHooks<'p> {
    pub fn new(prog: &'p LogicProgram, limits: EngineLimits, policy: Policy, mode: HookMode) -> std::io::Result<Self> {
        Ok(CheckHooks { prog, limits, policy, mode, dir: tempfile::tempdir()?, seq: 0, records: Vec::new(), aborted: false })
    }

    fn check(&mut self, function: &str, kind: Kind, payload: &[Value]) -> EvalResult<()> {
        self.seq += 1;
        let path = self.dir.path().join(format!("call{}.{}", self.seq, wire::EXTENSION));
        let io = |e: std::io::Error| EvalError::new("IO", e.to_string());
        std::fs::write(&path, wire::write_doc(&self.prog.fingerprint(), payload)).map_err(io)?;
        let rec = match &self.mode {
            HookMode::InProcess => {
                let text = std::fs::read_to_string(&path).map_err(io)?;
                check::check_call(self.prog, function, kind, &text, self.limits)
            }
            HookMode::Spawn { exe, specs } => spawn_check(exe, specs, function, kind, &path, self.dir.path())?,
        };
        let failed = rec.verdict == Verdict::Fail;
        self.records.push(rec);
        if failed && self.policy == Policy::Abort {
            self.aborted = true;
            return Err(EvalError::new(CHECK_ABORTED, format!("{} check of `{function}` failed", kind.name())));
        }
        Ok(())
    }
}

impl Hooks for CheckHooks<'_> {
    fn pre(&mut self, function: &str, args: &[Value]) -> EvalResult<()> {
        self.check(function, Kind::Pre, args)
    }

    fn post(&mut self, function: &str, args: &[Value], result: Value) -> EvalResult<Value> {
        let mut payload = args.to_vec();
        payload.push(result.clone());
        self.check(function, Kind::Post, &payload)?;
        Ok(result)
    }
}

/// Runs the checker as a separate process; its verdict comes back through
/// the exit status, the details through its JSON report.
fn spawn_check(exe: &Path, specs: &[PathBuf], function: &str, kind: Kind, doc: &Path, dir: &Path) -> EvalResult<CheckRecord> {
    let report = doc.with_extension("json");
    let start = Instant::now();
    let status = Command::new(exe)
        .arg("check-call")
        .args(specs)
        .args(["--fn", function, "--kind", kind.name(), "--file"])
        .arg(doc)
        .arg("--report")
        .arg(&report)
        .current_dir(dir)
        .stdout(std::process::Stdio::null())
        .stderr(std::process::Stdio::null())
        .status()
        .map_err(|e| EvalError::new("IO", format!("cannot run checker: {e}")))?;
    let verdict = match status.code() {
        Some(0) => Verdict::Pass,
        Some(1) => Verdict::Fail,
        _ => Verdict::Error,
    };
    let mut rec = CheckRecord {
        function: function.to_string(),
        kind,
        verdict,
        annotation: "full".into(),
        partial: false,
        elapsed_ms: 0.0,
        bindings: Vec::new(),
        locus: None,
        error: (verdict == Verdict::Error).then(|| format!("checker exited with {status}")),
    };
    if let Some(r) = std::fs::read_to_string(&report)
        .ok()
        .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
        .and_then(|j| j["records"].get(0).cloned())
        .and_then(|r| serde_json::from_value::<CheckRecord>(r).ok())
    {
        rec = r;
    }
    rec.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(rec)
}

/// A loaded skeleton: functions from every imported file plus `main`.
#[derive(Debug, Default)]
pub struct Program {
    pub funcs: HashMap<String, Func>,
    pub main: Option<Vec<Stmt>>,
    pub files: Vec<EmittedFile>,
}

/// Loads `main.slimp` (or a directory holding it) and its imports, and
/// re-validates them.
pub fn load_program(path: &Path) -> Result<Program, Vec<Diagnostic>> {
    let main = if path.is_dir() { path.join(MAIN_FILE) } else { path.to_path_buf() };
    let dir = main.parent().map(Path::to_path_buf).unwrap_or_default();
    let read = |p: &Path| {
        std::fs::read_to_string(p)
            .map_err(|e| vec![Diagnostic::error("IO", None, format!("cannot read {}: {e}", p.display()))])
    };
    let main_name = main.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut files = vec![EmittedFile { name: main_name, text: read(&main)? }];
    let mut i = 0;
    while i < files.len() {
        let m = slimp::parse_module(&files[i].text).map_err(|d| vec![d.with_file(Path::new(&files[i].name))])?;
        for imp in m.imports {
            if !files.iter().any(|f| f.name == imp) {
                files.push(EmittedFile { text: read(&dir.join(&imp))?, name: imp });
            }
        }
        i += 1;
    }
    program_from_files(&files)
}

/// Parses a program from in-memory files (as produced by the emitter).
pub fn program_from_files(files: &[EmittedFile]) -> Result<Program, Vec<Diagnostic>> {
    let diags = codegen::validate_emitted(files);
    if !diags.is_empty() {
        return Err(diags);
    }
    let mut prog = Program { files: files.to_vec(), ..Program::default() };
    for f in files {
        let m = slimp::parse_module(&f.text).map_err(|d| vec![d])?;
        for func in m.funcs {
            prog.funcs.insert(func.name.clone(), func);
        }
        if m.main.is_some() {
            prog.main = m.main;
        }
    }
    Ok(prog)
}

enum Flow {
    Next,
    Ret(Value),
}

pub struct Interp<'a> {
    prog: &'a Program,
    h: &'a ClassHierarchy,
    hooks: &'a mut dyn Hooks,
    limits: EngineLimits,
    deadline: Instant,
    steps: u64,
    depth: usize,
    scopes: Vec<HashMap<String, Value>>,
    entry: Option<(String, Vec<Value>)>,
    pub output: Vec<String>,
}

fn fail_code(s: &str) -> &'static str {
    const KNOWN: &[&str] = &["NOT_EXECUTABLE", "NO_APPLICABLE_RULE", "EMPTY_SELECTION", "EMPTY_EXTREMUM"];
    KNOWN.iter().find(|k| **k == s).copied().unwrap_or("FAIL")
}

fn match_pat(p: &SPat, v: &Value, out: &mut Vec<(String, Value)>) -> bool {
    match (p, v) {
        (SPat::Var(x), v) => {
            out.push((x.clone(), v.clone()));
            true
        }
        (SPat::Lit(l), v) => ops::values_equal(l, v),
        (SPat::Con(t, ps), Value::Con(u, vs)) => {
            t == u && ps.len() == vs.len() && ps.iter().zip(vs).all(|(p, v)| match_pat(p, v, out))
        }
        (SPat::Rec(fs), Value::Record(vs)) => fs.iter().all(|(l, p)| match vs.iter().find(|(m, _)| m == l) {
            Some((_, v)) => match_pat(p, v, out),
            None => false,
        }),
        _ => false,
    }
}

impl<'a> Interp<'a> {
    pub fn new(prog: &'a Program, h: &'a ClassHierarchy, hooks: &'a mut dyn Hooks, limits: EngineLimits) -> Self {
        Interp {
            prog,
            h,
            hooks,
            limits,
            deadline: Instant::now() + limits.timeout,
            steps: 0,
            depth: 0,
            scopes: Vec::new(),
            entry: None,
            output: Vec::new(),
        }
    }

    pub fn with_entry(mut self, f: String, args: Vec<Value>) -> Self {
        self.entry = Some((f, args));
        self
    }

    fn tick(&mut self) -> EvalResult<()> {
        self.steps += 1;
        if self.steps.is_multiple_of(1024) && Instant::now() > self.deadline {
            return Err(EvalError::new("TIMEOUT", format!("skeleton run exceeded {:?}", self.limits.timeout)));
        }
        Ok(())
    }

    pub fn call(&mut self, f: &str, args: Vec<Value>) -> EvalResult<Value> {
        let prog = self.prog;
        let Some(func) = prog.funcs.get(f) else {
            return Err(EvalError::new("UNKNOWN_FUNCTION", format!("no function `{f}` in the skeleton")));
        };
        if func.params.len() != args.len() {
            return Err(EvalError::new("ARITY", format!("`{f}` takes {} arguments, given {}", func.params.len(), args.len())));
        }
        if self.depth >= self.limits.max_depth {
            return Err(EvalError::new("DEPTH_LIMIT", format!("call depth exceeded {} at `{f}`", self.limits.max_depth)));
        }
        self.depth += 1;
        let frame = func.params.iter().cloned().zip(args).collect();
        let saved = std::mem::replace(&mut self.scopes, vec![frame]);
        let r = self.stmts(&func.body);
        self.scopes = saved;
        self.depth -= 1;
        match r? {
            Flow::Ret(v) => Ok(v),
            Flow::Next => Err(EvalError::new("MISSING_RETURN", format!("`{f}` ended without returning"))),
        }
    }

    /// Runs `main`; its printed lines collect in `output`.
    pub fn run_main(&mut self) -> EvalResult<()> {
        let prog = self.prog;
        let main = prog.main.as_ref().ok_or_else(|| EvalError::new("NO_MAIN", "the skeleton has no `main`"))?;
        self.scopes = vec![HashMap::new()];
        self.stmts(main)?;
        Ok(())
    }

    fn block(&mut self, ss: &[Stmt], bind: Vec<(String, Value)>) -> EvalResult<Flow> {
        self.scopes.push(bind.into_iter().collect());
        let r = self.stmts(ss);
        self.scopes.pop();
        r
    }

    fn stmts(&mut self, ss: &[Stmt]) -> EvalResult<Flow> {
        for s in ss {
            if let Flow::Ret(v) = self.stmt(s)? {
                return Ok(Flow::Ret(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &Stmt) -> EvalResult<Flow> {
        self.tick()?;
        match s {
            Stmt::Var(x, e) => {
                let v = self.eval(e)?;
                self.scopes.last_mut().expect("scope").insert(x.clone(), v);
            }
            Stmt::Assign(x, e) => {
                let v = self.eval(e)?;
                match self.scopes.iter_mut().rev().find(|s| s.contains_key(x)) {
                    Some(scope) => {
                        scope.insert(x.clone(), v);
                    }
                    None => return Err(EvalError::new("UNBOUND_VAR", format!("assignment to undeclared `{x}`"))),
                }
            }
            Stmt::If(c, a, b) => {
                let c = ops::truth(&self.eval(c)?)?;
                return self.block(if c { a } else { b }, Vec::new());
            }
            Stmt::For { var, from, to, down, body } => {
                let (Value::Int(lo), Value::Int(hi)) = (self.eval(from)?, self.eval(to)?) else {
                    return Err(EvalError::new("TYPE_ERROR", "loop bounds must be integers"));
                };
                let mut i = lo;
                while if *down { i >= hi } else { i <= hi } {
                    if let Flow::Ret(v) = self.block(body, vec![(var.clone(), Value::Int(i))])? {
                        return Ok(Flow::Ret(v));
                    }
                    i = if *down { i - 1 } else { i + 1 };
                }
            }
            Stmt::Match(scrut, arms) => {
                let vs = scrut.iter().map(|e| self.eval(e)).collect::<EvalResult<Vec<_>>>()?;
                for arm in arms {
                    let mut bind = Vec::new();
                    if arm.pats.iter().zip(&vs).all(|(p, v)| match_pat(p, v, &mut bind)) {
                        return self.block(&arm.body, bind);
                    }
                }
            }
            Stmt::Return(e, _) => return Ok(Flow::Ret(self.eval(e)?)),
            Stmt::Fail(code) => {
                let args: Vec<String> =
                    self.scopes.first().map(|s| s.values().map(|v| v.to_string()).collect()).unwrap_or_default();
                return Err(EvalError::new(fail_code(code), format!("{code} with ({})", args.join(", "))));
            }
            Stmt::PreCheck(name, args, _) => {
                let vs = args.iter().map(|e| self.eval(e)).collect::<EvalResult<Vec<_>>>()?;
                self.hooks.pre(name, &vs)?;
            }
            Stmt::Expr(e) => {
                self.eval(e)?;
            }
        }
        Ok(Flow::Next)
    }

    fn lookup(&self, x: &str) -> EvalResult<Value> {
        self.scopes
            .iter()
            .rev()
            .find_map(|s| s.get(x).cloned())
            .ok_or_else(|| EvalError::new("UNBOUND_VAR", format!("variable `{x}` is not bound")))
    }

    fn eval(&mut self, e: &SExpr) -> EvalResult<Value> {
        match e {
            SExpr::Lit(v) => Ok(v.clone()),
            SExpr::Var(x) => self.lookup(x),
            SExpr::Call(f, args) => {
                let vs = args.iter().map(|a| self.eval(a)).collect::<EvalResult<Vec<_>>>()?;
                self.apply(f, vs)
            }
            SExpr::Con(t, args) => {
                let vs = args.iter().map(|a| self.eval(a)).collect::<EvalResult<Vec<_>>>()?;
                ops::construct(t, vs, &self.h.schemas)
            }
            SExpr::Field(a, l) => ops::field(&self.eval(a)?, l, &self.h.schemas),
            SExpr::Index(a, i) => {
                let a = self.eval(a)?;
                ops::index(&a, &self.eval(i)?)
            }
            SExpr::Bin(op, a, b) => {
                let a = self.eval(a)?;
                ops::binary(*op, &a, &self.eval(b)?)
            }
            SExpr::Logic(op, xs) => {
                let vs = xs.iter().map(|a| self.eval(a)).collect::<EvalResult<Vec<_>>>()?;
                ops::logical(*op, &vs)
            }
            SExpr::Neg(a) => ops::negate(&self.eval(a)?),
            SExpr::Seq(xs) => Ok(Value::Seq(xs.iter().map(|a| self.eval(a)).collect::<EvalResult<_>>()?)),
            SExpr::Rec(fs) => Ok(Value::Record(
                fs.iter().map(|(l, a)| Ok((l.clone(), self.eval(a)?))).collect::<EvalResult<_>>()?,
            )),
        }
    }

    fn apply(&mut self, f: &str, mut vs: Vec<Value>) -> EvalResult<Value> {
        let bad = |what: &str| EvalError::new("TYPE_ERROR", format!("bad arguments to `{what}`"));
        if f == POST_CHECK && vs.len() >= 2 {
            if let Value::Str(name) = vs[0].clone() {
                let result = vs.pop().unwrap();
                return self.hooks.post(&name, &vs[1..], result);
            }
        }
        match (f, vs.as_mut_slice()) {
            ("length" | "sqrt" | "sqr" | "abs", _) => ops::builtin_function(f, &vs),
            ("append", [Value::Seq(xs), x]) => {
                let x = std::mem::replace(x, Value::Bool(false));
                xs.push(x);
                Ok(vs.swap_remove(0))
            }
            ("concat", [Value::Seq(a), Value::Seq(b)]) => {
                let mut a = std::mem::take(a);
                a.append(b);
                Ok(Value::Seq(a))
            }
            ("elements", [v]) => self.elements(v.clone()),
            ("range", [Value::Int(a), Value::Int(b)]) => Ok(ops::range(*a, *b)),
            ("project", [v, Value::Str(c)]) => project_to_ancestor(v, c, self.h),
            ("class_of", [v]) => Ok(Value::Str(self.h.class_of_value(v).unwrap_or("").to_string())),
            ("implies", _) => ops::logical(crate::ast::LogicOp::Implies, &vs),
            ("iff", _) => ops::logical(crate::ast::LogicOp::Iff, &vs),
            ("print", [v]) => {
                self.output.push(v.to_string());
                Ok(v.clone())
            }
            ("entry", []) => {
                let (g, args) = self.entry.clone().ok_or_else(|| EvalError::new("NO_ENTRY", "no entry call given"))?;
                self.call(&g, args)
            }
            (b, _) if codegen::SLIMP_BUILTINS.contains(&b) || b == POST_CHECK => Err(bad(b)),
            _ => self.call(f, vs),
        }
    }

    /// Built-in collections directly; class values through their
    /// generated `Elements_<Class>` procedure.
    fn elements(&mut self, v: Value) -> EvalResult<Value> {
        if let Some(items) = ops::builtin_elements(&v) {
            return Ok(Value::Seq(items));
        }
        let proc_name = self.h.class_of_value(&v).map(codegen::elements_proc);
        match proc_name {
            Some(p) if self.prog.funcs.contains_key(&p) => self.call(&p, vec![v]),
            _ => Err(EvalError::new("NOT_TRAVERSABLE", format!("cannot enumerate {} value {v}", v.kind_name()))),
        }
    }
}

/// Splits an entry call `f(args)` into the function and its evaluated
/// arguments; arguments are ordinary specification expressions.
pub fn entry_call(h: &ClassHierarchy, text: &str, limits: EngineLimits) -> EvalResult<(String, Vec<Value>)> {
    let e = parser::parse_expr(text).map_err(|ds| {
        EvalError::new("SYNTAX", ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))
    })?;
    let e = elaborate_query(h, &e).map_err(|ds| {
        EvalError::new("SEMANTIC", ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))
    })?;
    let Expr::Call(f, args) = e else {
        return Err(EvalError::new("BAD_ENTRY", format!("entry must be a function call, got `{text}`")));
    };
    let ev = Evaluator::new(h, limits);
    let args = args.iter().map(|a| ev.eval(a, &Default::default())).collect::<EvalResult<Vec<_>>>()?;
    Ok((f, args))
}

#[derive(Debug)]
pub struct RunOutcome {
    pub value: EvalResult<Value>,
    pub output: Vec<String>,
    pub elapsed: Duration,
}

/// Runs `main` (or, without one, the entry call directly).
pub fn run(prog: &Program, h: &ClassHierarchy, hooks: &mut dyn Hooks, entry: (String, Vec<Value>), limits: EngineLimits) -> RunOutcome {
    let start = Instant::now();
    let (f, args) = entry;
    let mut it = Interp::new(prog, h, hooks, limits).with_entry(f.clone(), args.clone());
    let value = if prog.main.is_some() {
        it.run_main().map(|_| {
            let out = it.output.last().cloned().unwrap_or_default();
            Value::Str(out)
        })
    } else {
        it.call(&f, args)
    };
    RunOutcome { value, output: it.output, elapsed: start.elapsed() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codegen::emit_program;
    use crate::ir::translate;
    use crate::semantics::load_spec;

    const SPEC: &str = "class A { case K(Int)
        observer F() : Int
        rule { call: F(K(x)) pre: x > 0 post: Result > 0 sol: sum i in 1..x | true . i } }";

    #[test]
    fn emitted_skeleton_runs_with_hooks() {
        let h = load_spec(SPEC).unwrap().0;
        let p = translate(&h);
        let prog = program_from_files(&emit_program(&h, &p)).unwrap();
        let k = |i| Value::con("AK", vec![Value::Int(i)]);
        let mut hooks = CheckHooks::new(&p, EngineLimits::default(), Policy::Abort, HookMode::InProcess).unwrap();
        let v = Interp::new(&prog, &h, &mut hooks, EngineLimits::default()).call("F", vec![k(4)]).unwrap();
        assert_eq!(v, Value::Int(10));
        assert_eq!(hooks.records.iter().map(|r| r.verdict).collect::<Vec<_>>(), vec![Verdict::Pass, Verdict::Pass]);

        let err = Interp::new(&prog, &h, &mut hooks, EngineLimits::default()).call("F", vec![k(0)]).unwrap_err();
        assert_eq!(err.code, CHECK_ABORTED);
        assert!(hooks.aborted);
        let mut none = NoHooks;
        let err = Interp::new(&prog, &h, &mut none, EngineLimits::default()).call("F", vec![k(0)]).unwrap_err();
        assert_eq!(err.code, "NO_APPLICABLE_RULE");
    }
}
