//! `elan` command line: parse, dump, likelihood, rank, profile and eval.
//!
//! Data goes to `out`, diagnostics to `err`. Exit codes: 0 success,
//! 1 usage error, 2 analysis error.

use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use elan_core::evaluation::{evaluate, render_markdown, shuffle_baseline, ModelEvaluation};
use elan_core::frontend::{decompose_condition, pretty_leaf, pretty_print, visit_stmts};
use elan_core::profiler::{load_inputs, profile, ProfileData, DEFAULT_STEP_LIMIT};
use elan_core::ranker::{normalize_warnings, rank, to_json, to_tsv, TieBreak, WarningFormat};
use elan_core::{build_sdg, parse_program, BranchModel, Engine, ModelKind, Program, Sdg, VertexId};

#[derive(Parser)]
#[command(name = "elan", version, about = "Execution likelihood analysis for MicroC programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Model {
    Simple,
    Heuristic,
}

impl From<Model> for ModelKind {
    fn from(m: Model) -> Self {
        match m {
            Model::Simple => ModelKind::Simple,
            Model::Heuristic => ModelKind::Heuristic,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EvalModel {
    Simple,
    Heuristic,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DumpFormat {
    Json,
    Dot,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RankFormat {
    Tsv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Md,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WarningsFormat {
    Auto,
    Gcc,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Tiebreak {
    Location,
    Severity,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and print it in canonical form.
    Parse {
        file: PathBuf,
        /// Print functions and decomposed conditions as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Print the dependence graph.
    Dump {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: DumpFormat,
        /// Same as `--format json`.
        #[arg(long)]
        json: bool,
    },
    /// Execution likelihood of the vertex on a source line.
    Likelihood {
        file: PathBuf,
        #[arg(long)]
        line: u32,
        /// Function whose entry starts execution (default: main).
        #[arg(long)]
        start: Option<String>,
        #[arg(long, value_enum, default_value = "simple")]
        model: Model,
        #[arg(long)]
        json: bool,
    },
    /// Order warnings by the likelihood of their location.
    Rank {
        file: PathBuf,
        #[arg(long)]
        warnings: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        warnings_format: WarningsFormat,
        #[arg(long)]
        start: Option<String>,
        #[arg(long, value_enum, default_value = "simple")]
        model: Model,
        #[arg(long, value_enum, default_value = "tsv")]
        format: RankFormat,
        /// Same as `--format json`.
        #[arg(long)]
        json: bool,
        /// Worker threads for likelihood annotation.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long, value_enum, default_value = "location")]
        tiebreak: Tiebreak,
    },
    /// Run the program on every input vector and report per-vertex coverage.
    Profile {
        file: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
        step_limit: u64,
        /// Output is always JSON; accepted for uniformity.
        #[arg(long)]
        json: bool,
    },
    /// Compare predicted likelihoods of control points with measured coverage.
    Eval {
        file: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        model: EvalModel,
        #[arg(long, value_enum, default_value = "md")]
        report: ReportFormat,
        /// Same as `--report json`.
        #[arg(long)]
        json: bool,
        /// Seed for the shuffled-ranking baseline.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        shuffles: usize,
        #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
        step_limit: u64,
    },
}

/// An analysis failure: reported on the error stream, exit code 2.
struct Failure(String);

impl<E: Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(()) => 0,
        Err(Failure(msg)) => {
            let _ = writeln!(err, "error: {msg}");
            2
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(format!("cannot read {}: {e}", path.display())))
}

fn load(path: &Path, err: &mut dyn Write) -> Result<(Program, Sdg), Failure> {
    let src = read(path)?;
    let program = parse_program(&src, &path.to_string_lossy())?;
    let sdg = build_sdg(&program);
    for d in sdg.diagnostics() {
        let _ = writeln!(err, "warning: {d}");
    }
    Ok((program, sdg))
}

fn start_vertex(sdg: &Sdg, start: &Option<String>) -> Result<Option<VertexId>, Failure> {
    match start {
        Some(name) => Ok(Some(sdg.entry_of(name)?)),
        None if sdg.entry().is_none() => Err(Failure("program has no 'main'; pass --start".into())),
        None => Ok(None),
    }
}

fn emit(out: &mut dyn Write, text: &str) -> Outcome {
    out.write_all(text.as_bytes())?;
    Ok(())
}

fn emit_json(out: &mut dyn Write, v: &Value) -> Outcome {
    let text = serde_json::to_string_pretty(v)?;
    writeln!(out, "{text}")?;
    Ok(())
}

fn execute(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Outcome {
    match cmd {
        Command::Parse { file, json } => {
            let (program, _) = load(&file, err)?;
            if json {
                emit_json(out, &parse_summary(&program))
            } else {
                emit(out, &pretty_print(&program))
            }
        }
        Command::Dump { file, format, json } => {
            let (_, sdg) = load(&file, err)?;
            if json || format == DumpFormat::Json {
                emit_json(out, &sdg.to_json())
            } else {
                emit(out, &sdg.to_dot())
            }
        }
        Command::Likelihood { file, line, start, model, json } => {
            let (_, sdg) = load(&file, err)?;
            let s = start_vertex(&sdg, &start)?;
            let v = sdg.vertex_at(&file.to_string_lossy(), line)?;
            let engine = Engine::new(&sdg, BranchModel::new(model.into()));
            let r = engine.execution_likelihood(v, s)?;
            let start_name = sdg.vertex(r.start).function.to_string();
            let vertex = sdg.vertex(v);
            if json {
                emit_json(
                    out,
                    &json!({
                        "file": file.to_string_lossy(),
                        "line": line,
                        "vertex_id": v.0,
                        "vertex_kind": vertex.kind.name(),
                        "text": vertex.text,
                        "likelihood": r.likelihood,
                        "reachable": r.reachable,
                        "model": r.model.as_str(),
                        "start": start_name,
                    }),
                )
            } else {
                let note = if r.reachable { "" } else { " (unreachable)" };
                emit(
                    out,
                    &format!(
                        "{}:{line}\t{v}\t{}\t{:.6}{note}\tmodel={}\tstart={start_name}\n",
                        file.display(),
                        vertex.text,
                        r.likelihood,
                        r.model
                    ),
                )
            }
        }
        Command::Rank { file, warnings, warnings_format, start, model, format, json, jobs, tiebreak } => {
            let (_, sdg) = load(&file, err)?;
            let s = start_vertex(&sdg, &start)?;
            let text = read(&warnings)?;
            let wf = match warnings_format {
                WarningsFormat::Gcc => WarningFormat::Gcc,
                WarningsFormat::Json => WarningFormat::Json,
                WarningsFormat::Auto => WarningFormat::detect(&text),
            };
            let n = normalize_warnings(&text, wf);
            if n.malformed > 0 {
                let _ = writeln!(err, "warning: skipped {} malformed warning entries", n.malformed);
            }
            if n.duplicates > 0 {
                let _ = writeln!(err, "note: collapsed {} duplicate warnings", n.duplicates);
            }
            let engine = Engine::new(&sdg, BranchModel::new(model.into()));
            let tie = match tiebreak {
                Tiebreak::Location => TieBreak::Location,
                Tiebreak::Severity => TieBreak::Severity,
            };
            let ranked = if jobs > 1 {
                let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;
                pool.install(|| rank(&engine, &n.records, s, tie, true))?
            } else {
                rank(&engine, &n.records, s, tie, false)?
            };
            if json || format == RankFormat::Json {
                emit_json(out, &to_json(&ranked))
            } else {
                emit(out, &to_tsv(&ranked))
            }
        }
        Command::Profile { file, inputs, step_limit, json: _ } => {
            let (program, sdg) = load(&file, err)?;
            let data = run_profile(&program, &sdg, &inputs, step_limit, err)?;
            emit_json(out, &data.to_json(&sdg))
        }
        Command::Eval { file, inputs, model, report, json, seed, shuffles, step_limit } => {
            let (program, sdg) = load(&file, err)?;
            let data = run_profile(&program, &sdg, &inputs, step_limit, err)?;
            let cps = sdg.control_points();
            if cps.is_empty() {
                return Err(Failure("program has no control points to evaluate".into()));
            }
            let measured: Vec<(VertexId, f64)> = cps.iter().map(|&v| (v, data.fraction(v))).collect();
            let kinds: Vec<ModelKind> = match model {
                EvalModel::Simple => vec![ModelKind::Simple],
                EvalModel::Heuristic => vec![ModelKind::Heuristic],
                EvalModel::Both => vec![ModelKind::Simple, ModelKind::Heuristic],
            };
            let mut evals: Vec<ModelEvaluation> = Vec::new();
            for k in kinds {
                let engine = Engine::new(&sdg, BranchModel::new(k));
                let predicted: Vec<(VertexId, f64)> =
                    engine.batch_likelihood(&cps, None)?.into_iter().map(|r| (r.vertex, r.likelihood)).collect();
                evals.push(evaluate(k.as_str(), &predicted, &measured)?);
            }
            let shuffled = (shuffles > 1).then(|| shuffle_baseline(cps.len(), shuffles, seed));
            if json || report == ReportFormat::Json {
                emit_json(
                    out,
                    &json!({
                        "file": file.to_string_lossy(),
                        "run_count": data.run_count,
                        "runtime_errors": data.runtime_errors,
                        "step_limits": data.step_limits,
                        "control_points": cps.len(),
                        "seed": seed,
                        "shuffled": shuffled.as_ref().map(|s| s.iter().map(|(m, se)| json!({"mean": m, "stderr": se})).collect::<Vec<_>>()),
                        "models": evals,
                    }),
                )
            } else {
                let title = format!("Evaluation of {}", file.display());
                emit(out, &render_markdown(&title, data.run_count, &evals, shuffled.as_deref()))
            }
        }
    }
}

fn run_profile(
    program: &Program,
    sdg: &Sdg,
    inputs: &Path,
    step_limit: u64,
    err: &mut dyn Write,
) -> Result<ProfileData, Failure> {
    let inputs = load_inputs(&read(inputs)?).map_err(|e| Failure(format!("bad inputs file: {e}")))?;
    let data = profile(program, sdg, &inputs, step_limit)?;
    if data.runtime_errors > 0 || data.step_limits > 0 {
        let _ = writeln!(
            err,
            "warning: {} runs hit a runtime error, {} hit the step limit",
            data.runtime_errors, data.step_limits
        );
    }
    Ok(data)
}

fn parse_summary(program: &Program) -> Value {
    let functions: Vec<Value> = program
        .functions
        .iter()
        .map(|f| {
            let mut conditions = Vec::new();
            visit_stmts(&f.body, &mut |s| {
                if let Some(c) = s.kind.condition() {
                    let leaves: Vec<Value> = decompose_condition(c)
                        .iter()
                        .map(|l| {
                            json!({
                                "line": l.span.line_start,
                                "text": pretty_leaf(l),
                                "negated": l.negated,
                            })
                        })
                        .collect();
                    conditions.push(json!({"line": s.span.line_start, "leaves": leaves}));
                }
            });
            json!({
                "name": f.name,
                "params": f.params.iter().map(|p| p.name.clone()).collect::<Vec<_>>(),
                "line_start": f.span.line_start,
                "line_end": f.span.line_end,
                "conditions": conditions,
            })
        })
        .collect();
    json!({"file": &*program.file, "entry": program.entry_name, "functions": functions})
}
