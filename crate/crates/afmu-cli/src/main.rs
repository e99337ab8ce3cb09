//! Batch command-line front end. Machine output is JSON on stdout, human
//! summaries go to stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afmu::formula::{closure, guard, is_alternation_free, is_guarded, ParseError};
use afmu::interpolation::{interpolate, verification, Colour, InterpolationError, Verification};
use afmu::proofs::ProofFormatError;
use afmu::prover::ProverError;
use afmu::semantics::{model_check, SemanticsError};
use afmu::tableaux::{build_tableau, winner, Schedule, TableauError};
use afmu::{check_proof, decide, parse, Formula, KripkeModel, Player, Proof, Verdict, SCHEMA_VERSION};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Parser)]
#[command(name = "afmu", version = version(), about = "Alternation-free modal mu-calculus toolkit")]
struct Cli {
    /// Guard unguarded inputs instead of rejecting them.
    #[arg(long, global = true)]
    auto_guard: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report syntactic properties of a formula.
    CheckFormula { expr: String },
    /// Decide validity of the sequent formed by the expressions.
    Prove {
        #[arg(required = true)]
        exprs: Vec<String>,
        /// Write the cyclic proof as JSON.
        #[arg(long)]
        proof: Option<PathBuf>,
        /// Write the cyclic proof as bussproofs LaTeX.
        #[arg(long)]
        latex: Option<PathBuf>,
        /// Where to write the countermodel of an invalid sequent.
        #[arg(long, default_value = "countermodel.json")]
        countermodel: PathBuf,
    },
    /// Check a proof in JSON format.
    CheckProof {
        file: PathBuf,
        /// Accept open leaves.
        #[arg(long)]
        allow_open: bool,
    },
    /// Evaluate a formula at a world of a model in JSON format.
    ModelCheck { model: PathBuf, world: String, expr: String },
    /// Solve the tableau game of the sequent formed by the expressions.
    Tableau {
        #[arg(required = true)]
        exprs: Vec<String>,
        /// Write the tableau as JSON.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Extract an interpolant for a valid implication phi -> psi.
    Interpolate {
        phi: String,
        psi: String,
        /// Verify the unsimplified interpolant instead of the simplified one.
        #[arg(long)]
        raw: bool,
    },
}

fn version() -> &'static str {
    Box::leak(format!("{} (schema {SCHEMA_VERSION})", env!("CARGO_PKG_VERSION")).into_boxed_str())
}

#[derive(Debug, Error)]
enum CliError {
    #[error("cannot parse {0:?}: {1}")]
    Parse(String, ParseError),
    #[error("{0} is not guarded (use --auto-guard)")]
    Unguarded(Formula),
    #[error("{0} is not alternation-free")]
    NotAlternationFree(Formula),
    #[error("{}: {1}", .0.display())]
    Io(PathBuf, std::io::Error),
    #[error(transparent)]
    ProofFormat(#[from] ProofFormatError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
    #[error(transparent)]
    Tableau(#[from] TableauError),
    #[error(transparent)]
    Prover(#[from] ProverError),
    #[error(transparent)]
    Interpolation(InterpolationError),
}

impl CliError {
    fn to_json(&self) -> Value {
        match self {
            CliError::Parse(_, e) => json!({"error": self.to_string(), "position": e.position()}),
            _ => json!({"error": self.to_string()}),
        }
    }
}

struct Outcome {
    stdout: Value,
    summary: String,
    success: bool,
}

fn emit(value: &Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn parse_arg(text: &str) -> Result<Formula, CliError> {
    parse(text).map_err(|e| CliError::Parse(text.to_string(), e))
}

/// Parses an input formula and enforces the guarded alternation-free fragment.
fn input(text: &str, auto_guard: bool) -> Result<Formula, CliError> {
    let mut f = parse_arg(text)?;
    if !is_guarded(&f) {
        if !auto_guard {
            return Err(CliError::Unguarded(f));
        }
        f = guard(&f);
    }
    if !is_alternation_free(&f) {
        return Err(CliError::NotAlternationFree(f));
    }
    Ok(f)
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn names(set: impl IntoIterator<Item = impl ToString>) -> Vec<String> {
    set.into_iter().map(|n| n.to_string()).collect()
}

fn verification_json(v: &Verification) -> Value {
    json!({
        "vocabulary": v.vocabulary,
        "alternation_free": v.alternation_free,
        "premise_implies_interpolant": v.premise,
        "interpolant_implies_conclusion": v.conclusion,
    })
}

fn run(cli: Cli) -> Result<Outcome, CliError> {
    let guard = cli.auto_guard;
    match cli.command {
        Command::CheckFormula { expr } => {
            let f = parse_arg(&expr)?;
            let out = json!({
                "guarded": is_guarded(&f),
                "alternation_free": is_alternation_free(&f),
                "closure_size": closure([&f]).len(),
                "fv": names(f.free_vars()),
                "bv": names(f.bound_vars()),
            });
            Ok(Outcome { stdout: out, summary: f.to_string(), success: true })
        }
        Command::Prove { exprs, proof, latex, countermodel } => {
            let phi = exprs.iter().map(|e| input(e, guard)).collect::<Result<Vec<_>, _>>()?;
            match decide(&phi)? {
                Verdict::Valid(p) => {
                    if let Some(path) = &proof {
                        write(path, &p.to_json())?;
                    }
                    if let Some(path) = &latex {
                        write(path, &p.to_latex())?;
                    }
                    let out = json!({"verdict": "VALID", "proof_nodes": p.len()});
                    Ok(Outcome { stdout: out, summary: format!("VALID ({} proof nodes)", p.len()), success: true })
                }
                Verdict::Invalid { model, world } => {
                    let m = model.to_json();
                    write(&countermodel, &serde_json::to_string_pretty(&m).expect("serializable"))?;
                    let name = m["worlds"][world].clone();
                    let out = json!({"verdict": "INVALID", "world": name, "countermodel": m});
                    let summary = format!("INVALID (refuted at world {name}, model in {})", countermodel.display());
                    Ok(Outcome { stdout: out, summary, success: false })
                }
            }
        }
        Command::CheckProof { file, allow_open } => {
            let p = Proof::from_json(&read(&file)?)?;
            match check_proof(&p, allow_open) {
                Ok(()) => Ok(Outcome { stdout: json!({"status": "OK", "violations": []}), summary: "OK".into(), success: true }),
                Err(vs) => {
                    let list: Vec<Value> = vs
                        .iter()
                        .map(|v| json!({"node": v.node, "condition": v.condition.id(), "path": v.path, "message": v.message}))
                        .collect();
                    let summary = vs.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n");
                    Ok(Outcome { stdout: json!({"status": "VIOLATIONS", "violations": list}), summary, success: false })
                }
            }
        }
        Command::ModelCheck { model, world, expr } => {
            let m = KripkeModel::from_json(&read(&model)?)?;
            let w = m.world(&world)?;
            let f = input(&expr, guard)?;
            let b = model_check(&f, &m, w)?;
            Ok(Outcome { stdout: json!(b), summary: b.to_string(), success: b })
        }
        Command::Tableau { exprs, dump } => {
            let phi = exprs.iter().map(|e| input(e, guard)).collect::<Result<Vec<_>, _>>()?;
            if let Some(path) = &dump {
                let t = build_tableau(&phi)?;
                write(path, &serde_json::to_string_pretty(&t.to_json()).expect("serializable"))?;
            }
            let w = winner(&phi, Schedule::Least)?;
            let name = match w {
                Player::Exists => "Prover",
                Player::Forall => "Refuter",
            };
            Ok(Outcome { stdout: json!({"winner": name}), summary: format!("{name} wins"), success: w == Player::Exists })
        }
        Command::Interpolate { phi, psi, raw } => {
            let phi = input(&phi, guard)?;
            let psi = input(&psi, guard)?;
            let out = match interpolate(&phi, &psi) {
                Ok(out) => out,
                Err(InterpolationError::Invalid { model, world }) => {
                    let m = model.to_json();
                    let out = json!({"verdict": "INVALID", "world": m["worlds"][world].clone(), "countermodel": m});
                    return Ok(Outcome { stdout: out, summary: "the implication is not valid".into(), success: false });
                }
                Err(e) => return Err(CliError::Interpolation(e)),
            };
            let checked = if raw { &out.raw } else { &out.simplified };
            let v = verification(&phi, &psi, checked)?;
            let classes = out.colouring.class_colours();
            let of = |c: Colour| classes.iter().filter(|&&x| x == c).count();
            let stdout = json!({
                "interpolant": checked.to_string(),
                "raw": out.raw.to_string(),
                "simplified": out.simplified.to_string(),
                "colouring": {
                    "classes": classes.len(),
                    "mu_classes": of(Colour::Mu),
                    "nu_classes": of(Colour::Nu),
                    "transparent_nodes": out.colouring.count(Colour::Transparent),
                },
                "proof_nodes": out.proof_nodes,
                "balanced_nodes": out.balanced_nodes,
                "verification": verification_json(&v),
            });
            Ok(Outcome { stdout, summary: checked.to_string(), success: v.holds() })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(o) => {
            emit(&o.stdout);
            eprintln!("{}", o.summary);
            ExitCode::from(if o.success { 0 } else { 1 })
        }
        Err(e) => {
            emit(&e.to_json());
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
