//! Command-line front end. `cmd_dispatch` returns the process exit code:
//! 0 on success, 1 when a check finds failures, 2 on usage or input errors.

use std::io::Write;
use std::path::Path;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::harness::{self, LimitTarget, TrialConfig, TrialReport};
use crate::mtlc::{CountWindow, eval_mtlc_sets};
use crate::normalize::{branches_to_fo, normalize, validate_hodkinson};
use crate::oracle::{Valuation, eval_fo, eval_q2mlo};
use crate::signal::{Signal, parse_time};
use crate::syntax::{Ast, Dialect, Formula, check_q2mlo, metrics, parse};
use crate::translate::{LemmaVariant, lemma_translate, mtlc_to_q2mlo, translate_branches};

#[derive(Parser, Debug)]
#[command(name = "mtlc", version, about = "MTL with counting, Q2MLO(+1) and bounded FO over dense-time signals")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Formula input: a file path, or the formula text itself.
#[derive(Args, Debug)]
struct Input {
    /// Formula text, or a path to a file holding it
    #[arg(long, short = 'f', alias = "in")]
    formula: String,
}

impl Input {
    fn text(&self) -> Result<String, String> {
        if Path::new(&self.formula).is_file() {
            std::fs::read_to_string(&self.formula).map_err(|e| format!("{}: {e}", self.formula))
        } else {
            Ok(self.formula.clone())
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DialectArg {
    Fo,
    Q2mlo,
    Mtlc,
    Simplified,
}

impl From<DialectArg> for Dialect {
    fn from(d: DialectArg) -> Self {
        match d {
            DialectArg::Fo => Dialect::Fo,
            DialectArg::Q2mlo => Dialect::Q2mlo,
            DialectArg::Mtlc => Dialect::Mtlc,
            DialectArg::Simplified => Dialect::Simplified,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Source {
    /// A simplified form
    Simplified,
    /// An `exists* forall y` first-order formula, normalized first
    Hodkinson,
    /// A counting-fragment MTL+C formula
    Mtlc,
}

#[derive(Args, Debug)]
struct Trials {
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value_t = 2)]
    max_n: usize,
    #[arg(long, default_value_t = 2)]
    alphabet: usize,
    #[arg(long, default_value_t = 12)]
    max_breakpoints: usize,
    #[arg(long, default_value = "4")]
    domain_end: String,
    /// Also write the JSON report here
    #[arg(long)]
    out: Option<String>,
}

impl Trials {
    fn config(&self) -> Result<TrialConfig, String> {
        Ok(TrialConfig {
            seed: self.seed,
            trials: self.trials,
            max_n: self.max_n,
            alphabet_size: self.alphabet,
            max_breakpoints: self.max_breakpoints,
            domain_end: parse_time(&self.domain_end).map_err(|e| e.to_string())?,
        })
    }
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Parse a formula and summarize it
    Parse {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "fo")]
        dialect: DialectArg,
    },
    /// Parse a formula and print it in canonical form
    Print {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "fo")]
        dialect: DialectArg,
    },
    /// Split an `exists* forall y` formula into simplified-form branches
    Normalize {
        #[command(flatten)]
        input: Input,
        /// Print the disjunction as one first-order formula instead
        #[arg(long)]
        fo: bool,
    },
    /// Translate into Q2MLO(+1)
    Translate {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value = "simplified")]
        from: Source,
    },
    /// Evaluate an FO or Q2MLO(+1) formula; one `true`/`false` line per `--at`
    Eval {
        #[command(flatten)]
        input: Input,
        #[arg(long, short = 's')]
        signal: String,
        /// Assignment such as `z=1/2` or `z=0,w=1`; repeatable
        #[arg(long)]
        at: Vec<String>,
        #[arg(long, value_enum, default_value = "q2mlo")]
        dialect: DialectArg,
    },
    /// Satisfaction set of an MTL+C formula, or its value at `--at` points
    MtlcEval {
        #[command(flatten)]
        input: Input,
        #[arg(long, short = 's')]
        signal: String,
        #[arg(long)]
        at: Vec<String>,
        /// Print the set of every subformula
        #[arg(long)]
        all: bool,
    },
    /// Simplified form vs its translation
    CheckLemma {
        #[command(flatten)]
        trials: Trials,
        /// Drop the backward conjunct (mutation test)
        #[arg(long)]
        drop_theta2: bool,
    },
    /// Normalizer input vs the disjunction of its branches
    CheckNormalize {
        #[command(flatten)]
        trials: Trials,
    },
    /// Interval-set MTL+C evaluation vs the oracle
    CheckMtlc {
        #[command(flatten)]
        trials: Trials,
        /// Count over closed unit windows (mutation test)
        #[arg(long)]
        closed_window: bool,
    },
    /// Oracle verdicts with doubled gap samples
    CheckGrid {
        #[command(flatten)]
        trials: Trials,
        #[arg(long, default_value_t = 1)]
        samples: usize,
    },
    /// Prefix truth on the last gap below z+1 vs at z+1
    CheckLimit {
        #[command(flatten)]
        trials: Trials,
        /// Demand only the odd closure for even prefixes
        #[arg(long)]
        closed: bool,
    },
}

enum Failed {
    Usage(String),
    Check,
}

impl<E: std::fmt::Display> From<E> for Failed {
    fn from(e: E) -> Self {
        Failed::Usage(e.to_string())
    }
}

/// Runs the CLI on `argv` (including the program name).
pub fn cmd_dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    cmd_dispatch_to(argv, &mut out, &mut err)
}

pub fn cmd_dispatch_to<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    match run(cli.cmd, out) {
        Ok(()) => 0,
        Err(Failed::Check) => 1,
        Err(Failed::Usage(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

fn read_signal(path: &str) -> Result<Signal, Failed> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{path}: {e}"))?;
    Ok(Signal::from_json(&text)?)
}

fn assignment(text: &str) -> Result<Valuation, Failed> {
    let mut v = Valuation::new();
    for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, value) = part.split_once('=').ok_or_else(|| format!("expected NAME=TIME, got `{part}`"))?;
        v.insert(name.trim().to_string(), parse_time(value.trim())?);
    }
    Ok(v)
}

fn report(r: &TrialReport, trials: &Trials, out: &mut dyn Write) -> Result<(), Failed> {
    let json = r.to_json();
    if let Some(path) = &trials.out {
        std::fs::write(path, &json).map_err(|e| format!("{path}: {e}"))?;
    }
    writeln!(out, "{json}")?;
    if r.passed() { Ok(()) } else { Err(Failed::Check) }
}

fn run(cmd: Cmd, out: &mut dyn Write) -> Result<(), Failed> {
    match cmd {
        Cmd::Parse { input, dialect } => {
            let ast = parse(&input.text()?, dialect.into())?;
            match ast {
                Ast::Fo(f) | Ast::Q2(f) => {
                    let m = metrics(&f);
                    let free: Vec<String> = m.free_vars.into_iter().collect();
                    writeln!(out, "ok")?;
                    writeln!(out, "free: {}", free.join(" "))?;
                    writeln!(out, "quantifier depth: {}", m.quantifier_depth)?;
                    writeln!(out, "q2mlo: {}", check_q2mlo(&f).is_ok())?;
                }
                Ast::Mtlc(f) => {
                    writeln!(out, "ok")?;
                    writeln!(out, "counting fragment: {}", f.in_counting_fragment())?;
                }
                Ast::Simplified(sf) => {
                    writeln!(out, "ok")?;
                    writeln!(out, "n: {}", sf.n())?;
                }
            }
        }
        Cmd::Print { input, dialect } => {
            let text = match parse(&input.text()?, dialect.into())? {
                Ast::Fo(f) | Ast::Q2(f) => f.to_string(),
                Ast::Mtlc(f) => f.to_string(),
                Ast::Simplified(sf) => sf.to_string(),
            };
            writeln!(out, "{text}")?;
        }
        Cmd::Normalize { input, fo } => {
            let Ast::Fo(f) = parse(&input.text()?, Dialect::Fo)? else { unreachable!() };
            let branches = normalize(&validate_hodkinson(&f)?);
            if fo {
                writeln!(out, "{}", branches_to_fo(&branches))?;
            } else {
                for b in &branches {
                    writeln!(out, "{b}")?;
                }
            }
        }
        Cmd::Translate { input, from } => {
            let text = input.text()?;
            let f: Formula = match from {
                Source::Simplified => {
                    let Ast::Simplified(sf) = parse(&text, Dialect::Simplified)? else { unreachable!() };
                    lemma_translate(&[sf])
                }
                Source::Hodkinson => {
                    let Ast::Fo(f) = parse(&text, Dialect::Fo)? else { unreachable!() };
                    translate_branches(&normalize(&validate_hodkinson(&f)?), LemmaVariant::Full)
                }
                Source::Mtlc => {
                    let Ast::Mtlc(f) = parse(&text, Dialect::Mtlc)? else { unreachable!() };
                    mtlc_to_q2mlo(&f)?
                }
            };
            writeln!(out, "{f}")?;
        }
        Cmd::Eval { input, signal, at, dialect } => {
            let s = read_signal(&signal)?;
            let f = match parse(&input.text()?, dialect.into())? {
                Ast::Fo(f) | Ast::Q2(f) => f,
                _ => return Err(Failed::Usage("eval takes an fo or q2mlo formula; use mtlc-eval for MTL+C".into())),
            };
            let points = if at.is_empty() { vec![String::new()] } else { at };
            for p in &points {
                let v = assignment(p)?;
                let b = if f.is_first_order() { eval_fo(&f, &s, &v)? } else { eval_q2mlo(&f, &s, &v)? };
                writeln!(out, "{b}")?;
            }
        }
        Cmd::MtlcEval { input, signal, at, all } => {
            let s = read_signal(&signal)?;
            let Ast::Mtlc(f) = parse(&input.text()?, Dialect::Mtlc)? else { unreachable!() };
            let sets = eval_mtlc_sets(&f, &s)?;
            if all {
                for (g, set) in sets.entries() {
                    writeln!(out, "{g}\t{set}")?;
                }
            } else if at.is_empty() {
                writeln!(out, "{}", sets.root())?;
            }
            for p in &at {
                let t = match p.split_once('=') {
                    Some((_, v)) => parse_time(v.trim())?,
                    None => parse_time(p.trim())?,
                };
                writeln!(out, "{}", sets.root().contains(&t))?;
            }
        }
        Cmd::CheckLemma { trials, drop_theta2 } => {
            let variant = if drop_theta2 { LemmaVariant::DropTheta2 } else { LemmaVariant::Full };
            report(&harness::check_lemma_with(&trials.config()?, variant)?, &trials, out)?;
        }
        Cmd::CheckNormalize { trials } => {
            report(&harness::check_normalize(&trials.config()?)?, &trials, out)?;
        }
        Cmd::CheckMtlc { trials, closed_window } => {
            let window = if closed_window { CountWindow::Closed } else { CountWindow::Open };
            report(&harness::check_mtlc_with(&trials.config()?, window)?, &trials, out)?;
        }
        Cmd::CheckGrid { trials, samples } => {
            report(&harness::check_grid_robustness(&trials.config()?, samples)?, &trials, out)?;
        }
        Cmd::CheckLimit { trials, closed } => {
            let target = if closed { LimitTarget::ClosedPrefix } else { LimitTarget::SamePrefix };
            report(&harness::check_limit_closure(&trials.config()?, target)?, &trials, out)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let argv = std::iter::once("mtlc").chain(args.iter().copied());
        let code = cmd_dispatch_to(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn print_and_parse() {
        let (code, out, _) = call(&["print", "-f", "(exists x (lt (var z) (var x)))"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "(exists x (lt (var z) (var x)))");
        let (code, _, err) = call(&["parse", "-f", "(exists x"]);
        assert_eq!(code, 2);
        assert!(err.contains("syntax error"));
        let (code, _, _) = call(&["frobnicate"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn eval_lines() {
        let dir = tempfile::tempdir().unwrap();
        let sig = dir.path().join("s.json");
        std::fs::write(&sig, r#"{"domain_end": "3", "predicates": {"P": [["(", "0", "1/2", ")"]]}}"#).unwrap();
        let sf = dir.path().join("sf.txt");
        std::fs::write(&sf, "(simplified 1 ((atom P) (not (atom P)) (true)))").unwrap();
        let (code, psi, _) = call(&["translate", "--in", sf.to_str().unwrap()]);
        assert_eq!(code, 0);
        let (code, out, err) = call(&["eval", "-f", psi.trim(), "-s", sig.to_str().unwrap(), "--at", "z=0", "--at", "z=2"]);
        assert_eq!(code, 0, "{err}");
        assert_eq!(out, "true\nfalse\n");
        let (code, out, _) = call(&["mtlc-eval", "-f", "(cnt 2 (atom P))", "-s", sig.to_str().unwrap(), "--at", "0"]);
        assert_eq!((code, out.as_str()), (0, "true\n"));
    }

    #[test]
    fn checks_report_json() {
        let (code, out, _) = call(&["check-lemma", "--trials", "5", "--max-n", "1"]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["trials"], 5);
        let (code, out, _) = call(&["check-mtlc", "--trials", "300", "--closed-window"]);
        assert_eq!(code, 1);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert!(!v["failures"].as_array().unwrap().is_empty());
        let (code, _, _) = call(&["check-normalize", "--domain-end", "1"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn normalize_lines() {
        let (code, out, _) = call(&["normalize", "-f", "(forall y (pred P (var y)))"]);
        assert_eq!(code, 0);
        assert_eq!(out.trim(), "(branch () (simplified 0 ((atom P))))");
        let (code, _, _) = call(&["normalize", "-f", "(forall y (exists x (pred P (var x))))"]);
        assert_eq!(code, 2);
    }
}
