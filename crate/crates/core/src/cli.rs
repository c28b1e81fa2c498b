//! The `slam` command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand};

use crate::ast::Value;
use crate::check::{self, Kind, Policy, Verdict};
use crate::codegen;
use crate::diag::{Diagnostic, SourceSpan};
use crate::engine::{EngineLimits, Query, Solver};
use crate::eval::Evaluator;
use crate::ir::{self, LogicProgram};
use crate::parser;
use crate::semantics::{self, elaborate_query, ClassHierarchy};
use crate::skeleton::{self, CheckHooks, HookMode, NoHooks, CHECK_ABORTED};
use crate::wire;

pub const EXIT_USAGE: i32 = 64;

#[derive(Parser, Debug)]
#[command(name = "slam", version, about = "Executable object-oriented specifications")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(clap::Args, Debug, Clone)]
pub struct Common {
    /// Specification files, loaded together in order.
    #[arg(required = true)]
    pub specs: Vec<PathBuf>,
    /// Resource limits, e.g. `depth=10000,enum=1000000,timeout=30s`.
    #[arg(long, value_parser = parse_limits, default_value = "")]
    pub limits: EngineLimits,
    /// Print engine events to standard error.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Parse only.
    Parse(Common),
    /// Parse and run the static checks.
    Check(Common),
    /// Print the translated clause program.
    Translate(Common),
    /// Evaluate an expression against the specification.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(short, long)]
        expr: String,
        /// Evaluate directly on the syntax tree instead of the clause program.
        #[arg(long)]
        direct: bool,
        /// Print the result in the interchange format.
        #[arg(long)]
        wire: bool,
    },
    /// Generate the skeleton program.
    Gen {
        #[command(flatten)]
        common: Common,
        #[arg(short, long, default_value = "skeleton")]
        out: PathBuf,
    },
    /// Run a skeleton program with its check hooks live.
    Run {
        #[command(flatten)]
        common: Common,
        /// `main.slimp` or the directory holding it.
        #[arg(long)]
        program: PathBuf,
        /// Entry call, e.g. `FinalAmount(ctran([...]), ["A"])`.
        #[arg(long)]
        call: String,
        #[arg(long, value_parser = parse_policy, default_value = "abort")]
        policy: Policy,
        /// Structured report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
        /// Check each hook in a separate `check-call` process.
        #[arg(long)]
        spawn: bool,
        /// Also run with hooks stripped and report the time ratio.
        #[arg(long)]
        overhead: bool,
    },
    /// Check one serialized call.
    CheckCall {
        #[command(flatten)]
        common: Common,
        /// `Class:function`.
        #[arg(long = "fn")]
        function: String,
        #[arg(long, value_parser = parse_kind)]
        kind: Kind,
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

pub fn parse_limits(s: &str) -> Result<EngineLimits, String> {
    let mut l = EngineLimits::default();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected key=value, got `{part}`"))?;
        let num = |v: &str| v.parse::<u64>().map_err(|_| format!("bad number `{v}` for `{k}`"));
        match k {
            "depth" => l.max_depth = num(v)? as usize,
            "enum" => l.max_enumeration = num(v)? as usize,
            "timeout" => {
                l.timeout = if let Some(ms) = v.strip_suffix("ms") {
                    Duration::from_millis(num(ms)?)
                } else {
                    Duration::from_secs(num(v.strip_suffix('s').unwrap_or(v))?)
                }
            }
            _ => return Err(format!("unknown limit `{k}` (depth, enum, timeout)")),
        }
    }
    Ok(l)
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    Policy::parse(s).ok_or_else(|| format!("policy must be `abort` or `report`, got `{s}`"))
}

fn parse_kind(s: &str) -> Result<Kind, String> {
    Kind::parse(s).ok_or_else(|| format!("kind must be `pre` or `post`, got `{s}`"))
}

/// Concatenated specification sources, remembering where each file starts.
pub struct Sources {
    pub text: String,
    starts: Vec<(usize, PathBuf)>,
}

impl Sources {
    pub fn read(paths: &[PathBuf]) -> Result<Sources, Diagnostic> {
        let mut text = String::new();
        let mut starts = Vec::new();
        for p in paths {
            let s = std::fs::read_to_string(p)
                .map_err(|e| Diagnostic::error("IO", None, format!("cannot read {}: {e}", p.display())))?;
            starts.push((text.lines().count() + 1, p.clone()));
            text.push_str(&s);
            if !text.ends_with('\n') {
                text.push('\n');
            }
        }
        Ok(Sources { text, starts })
    }

    /// Points a diagnostic at its own file and line.
    pub fn locate(&self, mut d: Diagnostic) -> Diagnostic {
        if let Some(span) = &mut d.span {
            if let Some((start, path)) = self.starts.iter().rev().find(|(s, _)| *s <= span.line) {
                *span = SourceSpan { file: Some(path.clone()), line: span.line - start + 1, ..span.clone() };
            }
        }
        d
    }
}

pub struct Loaded {
    pub h: ClassHierarchy,
    pub prog: LogicProgram,
    pub warnings: Vec<Diagnostic>,
}

pub fn load(paths: &[PathBuf]) -> Result<Loaded, Vec<Diagnostic>> {
    let src = Sources::read(paths).map_err(|d| vec![d])?;
    let locate = |ds: Vec<Diagnostic>| ds.into_iter().map(|d| src.locate(d)).collect::<Vec<_>>();
    let (h, warnings) = semantics::load_spec(&src.text).map_err(locate)?;
    let prog = ir::translate(&h);
    Ok(Loaded { h, prog, warnings: locate(warnings) })
}

fn print_diags(err: &mut dyn Write, ds: &[Diagnostic]) {
    for d in ds {
        let _ = writeln!(err, "{d}");
    }
}

/// Evaluates `text` through the clause program (or directly).
pub fn eval_text(l: &Loaded, text: &str, direct: bool, limits: EngineLimits, trace: Option<&mut Vec<String>>) -> Result<Value, String> {
    let e = parser::parse_expr(text).map_err(|ds| ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))?;
    let e = elaborate_query(&l.h, &e).map_err(|ds| ds.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n"))?;
    if direct {
        return Evaluator::new(&l.h, limits).eval(&e, &Default::default()).map_err(|e| e.to_string());
    }
    let p = l.prog.with_query(&e);
    let mut solver = Solver::new(&p, limits);
    if trace.is_some() {
        solver = solver.with_trace();
    }
    let r = solver.first(&Query::call(ir::QUERY, Vec::new(), 1));
    if let Some(t) = trace {
        t.extend(solver.trace());
    }
    match r {
        Ok(Some(b)) => Ok(b[0].clone()),
        Ok(None) => {
            // The clause program only says "no"; the direct evaluator names
            // the call that had no applicable rule.
            match Evaluator::new(&l.h, limits).eval(&e, &Default::default()) {
                Err(err) => Err(err.to_string()),
                Ok(_) => Err(format!("NO_APPLICABLE_RULE: `{text}` has no solution")),
            }
        }
        Err(e) => Err(e.to_string()),
    }
}

#[derive(Clone, Debug)]
pub struct Overhead {
    pub hooked: Duration,
    pub stripped: Duration,
}

impl Overhead {
    pub fn ratio(&self) -> f64 {
        self.hooked.as_secs_f64() / self.stripped.as_secs_f64().max(1e-9)
    }
}

/// Median wall time of `reps` runs with hooks on and with hooks stripped.
pub fn measure_overhead(
    l: &Loaded,
    sk: &skeleton::Program,
    entry: &(String, Vec<Value>),
    limits: EngineLimits,
    reps: usize,
) -> Result<Overhead, String> {
    let median = |mut v: Vec<Duration>| {
        v.sort();
        v[v.len() / 2]
    };
    let mut on = Vec::new();
    let mut off = Vec::new();
    for _ in 0..reps.max(1) {
        let mut hooks =
            CheckHooks::new(&l.prog, limits, Policy::Report, HookMode::InProcess).map_err(|e| e.to_string())?;
        let r = skeleton::run(sk, &l.h, &mut hooks, entry.clone(), limits);
        r.value.map_err(|e| e.to_string())?;
        on.push(r.elapsed);
        let r = skeleton::run(sk, &l.h, &mut NoHooks, entry.clone(), limits);
        r.value.map_err(|e| e.to_string())?;
        off.push(r.elapsed);
    }
    Ok(Overhead { hooked: median(on), stripped: median(off) })
}

fn write_report(path: Option<&Path>, json: &str, err: &mut dyn Write) -> bool {
    match path {
        Some(p) => match std::fs::write(p, json) {
            Ok(()) => true,
            Err(e) => {
                let _ = writeln!(err, "error: cannot write report {}: {e}", p.display());
                false
            }
        },
        None => true,
    }
}

/// Runs one invocation; returns the exit status.
pub fn main_with<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    let common = match &cli.cmd {
        Cmd::Parse(c) | Cmd::Check(c) | Cmd::Translate(c) => c,
        Cmd::Eval { common, .. } | Cmd::Gen { common, .. } | Cmd::Run { common, .. } | Cmd::CheckCall { common, .. } => {
            common
        }
    };
    let limits = common.limits;

    if let Cmd::Parse(c) = &cli.cmd {
        let src = match Sources::read(&c.specs) {
            Ok(s) => s,
            Err(d) => {
                print_diags(err, &[d]);
                return 1;
            }
        };
        return match parser::parse_spec(&src.text) {
            Ok(defs) => {
                for d in &defs {
                    let _ = writeln!(
                        out,
                        "class {}: {} alternatives, {} operations, {} rules",
                        d.name,
                        d.alternatives.len(),
                        d.op_decls.len(),
                        d.rules.len()
                    );
                }
                0
            }
            Err(ds) => {
                print_diags(err, &ds.into_iter().map(|d| src.locate(d)).collect::<Vec<_>>());
                1
            }
        };
    }

    let l = match load(&common.specs) {
        Ok(l) => l,
        Err(ds) => {
            print_diags(err, &ds);
            return if matches!(cli.cmd, Cmd::CheckCall { .. } | Cmd::Run { .. }) { check::EXIT_ERROR } else { 1 };
        }
    };
    print_diags(err, &l.warnings);

    match cli.cmd {
        Cmd::Parse(_) => unreachable!(),
        Cmd::Check(_) => {
            let _ = writeln!(
                out,
                "ok: {} classes, {} functions, {} rules",
                l.h.classes.len(),
                l.h.functions.len(),
                l.h.rules.len()
            );
            0
        }
        Cmd::Translate(_) => {
            let _ = write!(out, "{}", l.prog.dump());
            0
        }
        Cmd::Eval { expr, direct, wire: as_wire, common } => {
            let mut trace = Vec::new();
            let r = eval_text(&l, &expr, direct, limits, common.trace.then_some(&mut trace));
            for t in &trace {
                let _ = writeln!(err, "{t}");
            }
            match r {
                Ok(v) if as_wire => {
                    let _ = writeln!(out, "{}", wire::to_string(&v));
                    0
                }
                Ok(v) => {
                    let _ = writeln!(out, "{v}");
                    0
                }
                Err(m) => {
                    let _ = writeln!(err, "error: {m}");
                    1
                }
            }
        }
        Cmd::Gen { out: dir, .. } => {
            let files = codegen::emit_program(&l.h, &l.prog);
            let diags = codegen::validate_emitted(&files);
            if !diags.is_empty() {
                print_diags(err, &diags);
                return 1;
            }
            if let Err(e) = std::fs::create_dir_all(&dir) {
                let _ = writeln!(err, "error: cannot create {}: {e}", dir.display());
                return 1;
            }
            for f in &files {
                let p = dir.join(&f.name);
                if let Err(e) = std::fs::write(&p, &f.text) {
                    let _ = writeln!(err, "error: cannot write {}: {e}", p.display());
                    return 1;
                }
                let _ = writeln!(out, "{}", p.display());
            }
            0
        }
        Cmd::CheckCall { function, kind, file, report, .. } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => {
                    let _ = writeln!(err, "error: cannot read {}: {e}", file.display());
                    return check::EXIT_ERROR;
                }
            };
            let rec = check::check_call(&l.prog, &function, kind, &text, limits);
            let records = vec![rec];
            let rep = check::run_report(&records);
            let _ = write!(err, "{}", rep.text);
            if !write_report(report.as_deref(), &rep.json, err) {
                return check::EXIT_ERROR;
            }
            check::exit_code(&records, false)
        }
        Cmd::Run { program, call, policy, report, spawn, overhead, common } => {
            let sk = match skeleton::load_program(&program) {
                Ok(p) => p,
                Err(ds) => {
                    print_diags(err, &ds);
                    return check::EXIT_ERROR;
                }
            };
            let entry = match skeleton::entry_call(&l.h, &call, limits) {
                Ok(e) => e,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return check::EXIT_ERROR;
                }
            };
            let mode = if spawn {
                match std::env::current_exe() {
                    Ok(exe) => HookMode::Spawn {
                        exe,
                        specs: common.specs.iter().map(|p| std::path::absolute(p).unwrap_or(p.clone())).collect(),
                    },
                    Err(e) => {
                        let _ = writeln!(err, "error: cannot locate the checker executable: {e}");
                        return check::EXIT_ERROR;
                    }
                }
            } else {
                HookMode::InProcess
            };
            let mut hooks = match CheckHooks::new(&l.prog, limits, policy, mode) {
                Ok(h) => h,
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return check::EXIT_ERROR;
                }
            };
            let outcome = skeleton::run(&sk, &l.h, &mut hooks, entry.clone(), limits);
            for line in &outcome.output {
                let _ = writeln!(out, "{line}");
            }
            let rep = check::run_report(&hooks.records);
            let _ = write!(err, "{}", rep.text);
            let mut code = check::exit_code(&hooks.records, hooks.aborted);
            if let Err(e) = &outcome.value {
                if e.code != CHECK_ABORTED {
                    let _ = writeln!(err, "error: {e}");
                    code = check::EXIT_ERROR;
                }
            }
            if overhead {
                match measure_overhead(&l, &sk, &entry, limits, 5) {
                    Ok(o) => {
                        let _ = writeln!(
                            err,
                            "overhead: hooks on {:.3} ms, hooks off {:.3} ms, ratio {:.2}x",
                            o.hooked.as_secs_f64() * 1e3,
                            o.stripped.as_secs_f64() * 1e3,
                            o.ratio()
                        );
                    }
                    Err(m) => {
                        let _ = writeln!(err, "overhead: not measured ({m})");
                    }
                }
            }
            if !write_report(report.as_deref(), &rep.json, err) {
                return check::EXIT_ERROR;
            }
            if hooks.records.iter().any(|r| r.verdict == Verdict::Error) {
                code = code.max(check::EXIT_ERROR);
            }
            code
        }
    }
}
