//! Command-line front end.
//!
//! Exit codes: 0 success, 1 verification failed, 2 malformed input or usage,
//! 3 inconclusive analysis, 4 eigensolver failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::error::Error;
use crate::io::{self, FormatError};
use crate::optimize::{analyze, AnalysisReport, Verdict, DEFAULT_TOL_NEG};
use crate::oracle::{ppt_check, verify_decomposition, PptReport};
use crate::reconstruct::reconstruct_quasi;
use crate::sep_eigen::{sep_norm_from, solve_sep_eigen, SolutionSet, SolverConfig, DEFAULT_SEED};
use crate::state::{DensityOperator, Ket, QuasiDistribution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_MALFORMED: i32 = 2;
pub const EXIT_INCONCLUSIVE: i32 = 3;
pub const EXIT_EIGENSOLVER: i32 = 4;

/// Largest residual `verify` accepts.
pub const VERIFY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "entquasi", version, about = "Quasi-probability analysis of bipartite quantum states")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Debug, Args)]
struct Options {
    /// Random restarts of the separability eigenvalue solver.
    #[arg(long, global = true, value_name = "N")]
    restarts: Option<usize>,
    /// RNG seed.
    #[arg(long, global = true, value_name = "S", env = "ENTQUASI_SEED")]
    seed: Option<u64>,
    /// Representatives kept per continuous solution family.
    #[arg(long, global = true, value_name = "K")]
    family_samples: Option<usize>,
    /// Weights below `-X` count as negative.
    #[arg(long, global = true, value_name = "X")]
    tol_neg: Option<f64>,
    /// Keep solutions with `g ~ 0` in the Gram system.
    #[arg(long, global = true)]
    include_trivial: bool,
    #[arg(long, global = true, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimized quasi-distribution and separability verdict.
    Analyze { state: PathBuf },
    /// Unoptimized quasi-distribution from spectral and Schmidt decompositions.
    Reconstruct { state: PathBuf },
    /// Separability eigenvalues and eigenvectors.
    SepEigen { state: PathBuf },
    /// Separability norm.
    Norm { state: PathBuf },
    /// Partial-transpose test.
    Ppt { state: PathBuf },
    /// Max-entry residual of a decomposition against a state.
    Verify { state: PathBuf, decomposition: PathBuf },
}

/// Everything that shapes a run; echoed into reports.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub solver: SolverConfig,
    pub tol_neg: f64,
    pub format: Format,
}

impl Options {
    fn config(&self) -> Config {
        let mut solver = SolverConfig {
            rng_seed: self.seed.unwrap_or(DEFAULT_SEED),
            include_trivial: self.include_trivial,
            ..SolverConfig::default()
        };
        if let Some(r) = self.restarts {
            solver.restarts = r;
        }
        if let Some(k) = self.family_samples {
            solver.family_samples = k;
        }
        Config {
            solver,
            tol_neg: self.tol_neg.unwrap_or(DEFAULT_TOL_NEG),
            format: self.format,
        }
    }
}

enum Failure {
    Input(String),
    Library(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Library(e)
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn located(path: &Path, e: FormatError) -> Failure {
    Failure::Input(format!("{}: {e}", path.display()))
}

fn load_state(path: &Path) -> Result<DensityOperator, Failure> {
    io::parse_state(&read(path)?).map_err(|e| located(path, e))
}

/// Runs one invocation, writing the report to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_MALFORMED;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    let cfg = cli.opts.config();
    if let Err(e) = validate(&cfg) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_MALFORMED;
    }
    match execute(&cli.command, &cfg) {
        Ok((text, code)) => {
            let _ = out.write_all(text.as_bytes());
            code
        }
        Err(Failure::Input(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            EXIT_MALFORMED
        }
        Err(Failure::Library(e)) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::EigensolverFailure(_) => EXIT_EIGENSOLVER,
                _ => EXIT_MALFORMED,
            }
        }
    }
}

fn validate(cfg: &Config) -> Result<(), String> {
    cfg.solver.validate().map_err(|e| e.to_string())?;
    if !(cfg.tol_neg >= 0.0 && cfg.tol_neg.is_finite()) {
        return Err(format!("tol-neg must be a non-negative number, got {}", cfg.tol_neg));
    }
    Ok(())
}

fn execute(cmd: &Command, cfg: &Config) -> Result<(String, i32), Failure> {
    let json = cfg.format == Format::Json;
    match cmd {
        Command::Analyze { state } => {
            let rho = load_state(state)?;
            let rep = analyze(&rho, &cfg.solver, cfg.tol_neg)?;
            let code = if rep.verdict == Verdict::Inconclusive {
                EXIT_INCONCLUSIVE
            } else {
                EXIT_OK
            };
            let text = if json {
                io::to_string(&io::analysis_json(&rep, &cfg.solver))
            } else {
                analysis_text(&rep)
            };
            Ok((text, code))
        }
        Command::Reconstruct { state } => {
            let rho = load_state(state)?;
            let qd = reconstruct_quasi(&rho)?;
            let text = if json {
                io::to_string(&io::decomposition_json(&qd))
            } else {
                terms_text(&qd)
            };
            Ok((text, EXIT_OK))
        }
        Command::SepEigen { state } => {
            let rho = load_state(state)?;
            let set = solve_sep_eigen(rho.as_operator(), &cfg.solver)?;
            let text = if json {
                io::to_string(&io::solution_set_json(&set, &cfg.solver))
            } else {
                solutions_text(&set)
            };
            Ok((text, EXIT_OK))
        }
        Command::Norm { state } => {
            let rho = load_state(state)?;
            let set = solve_sep_eigen(rho.as_operator(), &cfg.solver)?;
            let norm = sep_norm_from(rho.as_operator(), &set);
            let text = if json {
                io::to_string(&json!({
                    "separability_norm": norm,
                    "coverage": set.coverage,
                    "config": io::config_json(&cfg.solver, None),
                }))
            } else {
                format!("separability norm  {norm}\n")
            };
            Ok((text, EXIT_OK))
        }
        Command::Ppt { state } => {
            let rho = load_state(state)?;
            let rep = ppt_check(&rho)?;
            let text = if json {
                io::to_string(&io::ppt_json(&rep))
            } else {
                ppt_text(&rep)
            };
            Ok((text, EXIT_OK))
        }
        Command::Verify { state, decomposition } => {
            let rho = load_state(state)?;
            let qd = io::parse_decomposition(&read(decomposition)?).map_err(|e| located(decomposition, e))?;
            if qd.dims() != rho.dims() {
                return Err(Failure::Input(format!(
                    "{}: field `dims`: does not match the state's dims",
                    decomposition.display()
                )));
            }
            let residual = verify_decomposition(&rho, &qd)?;
            let ok = residual <= VERIFY_TOL;
            let text = if json {
                io::to_string(&json!({ "residual": residual, "tolerance": VERIFY_TOL, "ok": ok }))
            } else {
                format!("residual  {residual:e}\n{}\n", if ok { "ok" } else { "FAILED" })
            };
            Ok((text, if ok { EXIT_OK } else { EXIT_VERIFY_FAILED }))
        }
    }
}

fn ket_text(k: &Ket) -> String {
    let parts: Vec<String> = k
        .amplitudes()
        .iter()
        .map(|z| format!("{:+.6}{:+.6}i", z.re, z.im))
        .collect();
    format!("({})", parts.join(", "))
}

fn terms_text(qd: &QuasiDistribution) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:>12}  {:<w$}  b", "weight", "a", w = 2 + 21 * qd.dims().d_a);
    for t in qd.terms() {
        let _ = writeln!(
            s,
            "{:>12.8}  {:<w$}  {}",
            t.weight,
            ket_text(&t.state.a),
            ket_text(&t.state.b),
            w = 2 + 21 * qd.dims().d_a
        );
    }
    s
}

fn analysis_text(rep: &AnalysisReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verdict              {:?}", rep.verdict);
    let _ = writeln!(s, "min weight           {}", rep.min_weight);
    let _ = writeln!(s, "reassembly residual  {:e}", rep.reassembly_residual);
    let _ = writeln!(s, "gram residual        {:e}", rep.gram_residual);
    let _ = writeln!(s, "purity               {}", rep.purity);
    let _ = writeln!(s, "separability norm    {}", rep.max_g);
    let _ = writeln!(s, "residual split       {}", if rep.used_residual_split { "yes" } else { "no" });
    for d in &rep.diagnostics {
        let _ = writeln!(s, "note: {d}");
    }
    s.push('\n');
    s.push_str(&terms_text(&rep.quasi_dist));
    s
}

fn solutions_text(set: &SolutionSet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "coverage {:?}, {} seeds", set.coverage, set.restarts_used);
    for (i, sol) in set.solutions.iter().enumerate() {
        let family = set.families.iter().position(|f| f.members.contains(&i));
        let _ = writeln!(
            s,
            "{:>12.8}  {}  {}  residual {:.1e}{}{}",
            sol.g,
            ket_text(&sol.state.a),
            ket_text(&sol.state.b),
            sol.residual,
            family.map(|f| format!("  family {f}")).unwrap_or_default(),
            if sol.excluded { "  excluded" } else { "" }
        );
    }
    s
}

fn ppt_text(rep: &PptReport) -> String {
    format!(
        "min partial-transpose eigenvalue  {}\nNPT                               {}\n",
        rep.min_pt_eigenvalue, rep.is_npt
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn flags_fill_config() {
        let cli = Cli::try_parse_from([
            "entquasi",
            "analyze",
            "x.json",
            "--restarts",
            "7",
            "--seed",
            "9",
            "--family-samples",
            "3",
            "--tol-neg",
            "1e-6",
            "--include-trivial",
            "--format",
            "text",
        ])
        .unwrap();
        let cfg = cli.opts.config();
        assert_eq!(cfg.solver.restarts, 7);
        assert_eq!(cfg.solver.rng_seed, 9);
        assert_eq!(cfg.solver.family_samples, 3);
        assert!(cfg.solver.include_trivial);
        assert_eq!(cfg.tol_neg, 1e-6);
        assert_eq!(cfg.format, Format::Text);
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run_args(&["entquasi", "frobnicate"]).0, EXIT_MALFORMED);
        assert_eq!(run_args(&["entquasi", "analyze"]).0, EXIT_MALFORMED);
        assert_eq!(run_args(&["entquasi", "analyze", "x.json", "--restarts", "0"]).0, EXIT_MALFORMED);
        let (code, _, err) = run_args(&["entquasi", "ppt", "/nonexistent/state.json"]);
        assert_eq!(code, EXIT_MALFORMED);
        assert!(err.contains("/nonexistent/state.json"));
    }

    #[test]
    fn help_exits_0() {
        let (code, out, _) = run_args(&["entquasi", "--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("analyze"));
    }
}
