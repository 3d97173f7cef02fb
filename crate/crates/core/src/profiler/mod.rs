//! Reference interpreter and per-vertex run coverage.
//!
//! Pointers are opaque integers with `NULL` = 0. Arithmetic wraps on
//! overflow. Reading past the end of the input vector yields 0.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::frontend::{BinOp, CallExpr, CondExpr, Expr, FunctionDef, Program, Stmt, StmtKind};
use crate::sdg::{Sdg, VertexId};

pub const DEFAULT_STEP_LIMIT: u64 = 1_000_000;
pub const MAX_CALL_DEPTH: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunInput {
    #[serde(default)]
    pub name: String,
    pub values: Vec<i64>,
}

pub fn load_inputs(json: &str) -> Result<Vec<RunInput>, serde_json::Error> {
    serde_json::from_str(json)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Completed,
    StepLimit,
    RuntimeError(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub visited: BTreeSet<VertexId>,
    /// Statements and condition leaves executed.
    pub steps: u64,
    pub outcome: Outcome,
    pub return_value: Option<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProfileError {
    #[error("program has no entry function '{0}'")]
    NoEntry(String),
    #[error("at least one input is required")]
    NoInputs,
}

enum Stop {
    StepLimit,
    Error(String),
}

enum Flow {
    Normal,
    Break,
    Return(i64),
}

struct Interp<'a> {
    program: &'a Program,
    sdg: &'a Sdg,
    input: &'a [i64],
    pos: usize,
    steps: u64,
    limit: u64,
    depth: usize,
    visited: BTreeSet<VertexId>,
}

/// Runs the program's entry function on one input vector.
pub fn interpret(
    program: &Program,
    sdg: &Sdg,
    input: &RunInput,
    step_limit: u64,
) -> Result<ExecutionTrace, ProfileError> {
    let main = program.entry().ok_or_else(|| ProfileError::NoEntry(program.entry_name.clone()))?;
    let mut it = Interp {
        program,
        sdg,
        input: &input.values,
        pos: 0,
        steps: 0,
        limit: step_limit,
        depth: 0,
        visited: BTreeSet::new(),
    };
    let args = vec![0; main.params.len()];
    let (outcome, return_value) = match it.invoke(main, args) {
        Ok(v) => (Outcome::Completed, Some(v)),
        Err(Stop::StepLimit) => (Outcome::StepLimit, None),
        Err(Stop::Error(m)) => (Outcome::RuntimeError(m), None),
    };
    Ok(ExecutionTrace { visited: it.visited, steps: it.steps, outcome, return_value })
}

type Env = HashMap<String, i64>;

impl<'a> Interp<'a> {
    fn mark(&mut self, node: crate::frontend::NodeId) {
        if let Some(v) = self.sdg.vertex_for_node(node) {
            self.visited.insert(v);
        }
    }

    fn step(&mut self) -> Result<(), Stop> {
        if self.steps >= self.limit {
            return Err(Stop::StepLimit);
        }
        self.steps += 1;
        Ok(())
    }

    fn invoke(&mut self, f: &'a FunctionDef, args: Vec<i64>) -> Result<i64, Stop> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Stop::Error(format!("call depth exceeded in '{}'", f.name)));
        }
        if let Ok(entry) = self.sdg.entry_of(&f.name) {
            self.visited.insert(entry);
        }
        self.depth += 1;
        let mut env: Env = f.params.iter().map(|p| p.name.clone()).zip(args).collect();
        let flow = self.block(&f.body, &mut env);
        self.depth -= 1;
        match flow? {
            Flow::Return(v) => Ok(v),
            _ => Ok(0),
        }
    }

    fn block(&mut self, stmts: &'a [Stmt], env: &mut Env) -> Result<Flow, Stop> {
        for s in stmts {
            match self.stmt(s, env)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &'a Stmt, env: &mut Env) -> Result<Flow, Stop> {
        match &s.kind {
            StmtKind::Assign { target, value, .. } => {
                let v = self.expr(value, env)?;
                self.step()?;
                self.mark(s.id);
                env.insert(target.clone(), v);
                Ok(Flow::Normal)
            }
            StmtKind::Expr(e) => {
                self.expr(e, env)?;
                self.step()?;
                self.mark(s.id);
                Ok(Flow::Normal)
            }
            StmtKind::Call(c) => {
                self.step()?;
                self.call(c, env)?;
                Ok(Flow::Normal)
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.expr(e, env)?,
                    None => 0,
                };
                self.step()?;
                self.mark(s.id);
                Ok(Flow::Return(v))
            }
            StmtKind::Break => {
                self.step()?;
                self.mark(s.id);
                Ok(Flow::Break)
            }
            StmtKind::If { cond, then_block, else_block } => {
                if self.cond(cond, false, env)? {
                    self.block(then_block, env)
                } else if let Some(e) = else_block {
                    self.block(e, env)
                } else {
                    Ok(Flow::Normal)
                }
            }
            StmtKind::While { cond, body } => {
                while self.cond(cond, false, env)? {
                    match self.block(body, env)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Normal => {}
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::For { init, cond, step, body } => {
                if let Some(i) = init {
                    self.stmt(i, env)?;
                }
                while self.cond(cond, false, env)? {
                    match self.block(body, env)? {
                        Flow::Break => break,
                        Flow::Return(v) => return Ok(Flow::Return(v)),
                        Flow::Normal => {}
                    }
                    if let Some(st) = step {
                        self.stmt(st, env)?;
                    }
                }
                Ok(Flow::Normal)
            }
            StmtKind::Switch { scrutinee, cases, default, .. } => {
                let v = self.expr(scrutinee, env)?;
                self.step()?;
                self.mark(s.id);
                let start = cases.iter().position(|c| c.label == v).unwrap_or(cases.len());
                let arms = cases[start..].iter().map(|c| &c.body).chain(default.iter());
                for arm in arms {
                    match self.block(arm, env)? {
                        Flow::Normal => {}
                        Flow::Break => return Ok(Flow::Normal),
                        ret => return Ok(ret),
                    }
                }
                Ok(Flow::Normal)
            }
        }
    }

    /// Evaluates `c` (complemented when `negate`) with short-circuiting in
    /// the same leaf order as the condition's control points.
    fn cond(&mut self, c: &'a CondExpr, negate: bool, env: &mut Env) -> Result<bool, Stop> {
        match c {
            CondExpr::Leaf(leaf) => {
                let l = self.expr(&leaf.lhs, env)?;
                let r = self.expr(&leaf.rhs, env)?;
                self.step()?;
                self.mark(leaf.id);
                Ok(leaf.op.apply(l, r) ^ leaf.negated ^ negate)
            }
            CondExpr::Not(inner) => self.cond(inner, !negate, env),
            CondExpr::And(a, b) | CondExpr::Or(a, b) => {
                // Under negation && behaves as || and vice versa.
                let conj = matches!(c, CondExpr::And(..)) != negate;
                let first = self.cond(a, negate, env)?;
                if first != conj {
                    return Ok(first);
                }
                self.cond(b, negate, env)
            }
        }
    }

    fn call(&mut self, c: &'a CallExpr, env: &mut Env) -> Result<i64, Stop> {
        let mut args = Vec::with_capacity(c.args.len());
        for a in &c.args {
            args.push(self.expr(a, env)?);
        }
        self.mark(c.id);
        match self.program.function(&c.name) {
            Some(f) => self.invoke(f, args),
            None => Ok(0),
        }
    }

    fn expr(&mut self, e: &'a Expr, env: &mut Env) -> Result<i64, Stop> {
        Ok(match e {
            Expr::Int(v) => *v,
            Expr::Null => 0,
            Expr::Var(name) => env.get(name).copied().unwrap_or(0),
            Expr::Neg(inner) => self.expr(inner, env)?.wrapping_neg(),
            Expr::Input => {
                let v = self.input.get(self.pos).copied().unwrap_or(0);
                self.pos += 1;
                v
            }
            Expr::Call(c) => self.call(c, env)?,
            Expr::Binary(op, l, r) => {
                let a = self.expr(l, env)?;
                let b = self.expr(r, env)?;
                match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Mul => a.wrapping_mul(b),
                    BinOp::Div | BinOp::Rem if b == 0 => {
                        return Err(Stop::Error("division by zero".into()));
                    }
                    BinOp::Div => a.wrapping_div(b),
                    BinOp::Rem => a.wrapping_rem(b),
                }
            }
        })
    }
}

/// Fraction of runs in which each vertex executed at least once.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileData {
    pub run_count: usize,
    /// Runs that visited each vertex, indexed by vertex id.
    pub counts: Vec<usize>,
    pub runtime_errors: usize,
    pub step_limits: usize,
}

impl ProfileData {
    pub fn fraction(&self, v: VertexId) -> f64 {
        self.counts[v.index()] as f64 / self.run_count as f64
    }

    pub fn fractions(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|i| self.fraction(VertexId(i as u32))).collect()
    }

    /// `{run_count, fractions: {id: f}, lines: {"file:line": f}}`; a line
    /// reports the highest fraction among vertices starting on it.
    pub fn to_json(&self, sdg: &Sdg) -> Value {
        let mut fractions = serde_json::Map::new();
        let mut lines: Vec<(u32, f64)> = Vec::new();
        for v in sdg.vertices() {
            let f = self.fraction(v.id);
            fractions.insert(v.id.0.to_string(), json!(f));
            lines.push((v.span.line_start, f));
        }
        lines.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.total_cmp(&a.1)));
        lines.dedup_by_key(|l| l.0);
        let lines: serde_json::Map<String, Value> =
            lines.into_iter().map(|(l, f)| (format!("{}:{l}", sdg.file()), json!(f))).collect();
        json!({
            "run_count": self.run_count,
            "runtime_errors": self.runtime_errors,
            "step_limits": self.step_limits,
            "fractions": fractions,
            "lines": lines,
        })
    }
}

pub fn profile(
    program: &Program,
    sdg: &Sdg,
    inputs: &[RunInput],
    step_limit: u64,
) -> Result<ProfileData, ProfileError> {
    if inputs.is_empty() {
        return Err(ProfileError::NoInputs);
    }
    let mut data = ProfileData { run_count: 0, counts: vec![0; sdg.len()], runtime_errors: 0, step_limits: 0 };
    for input in inputs {
        let trace = interpret(program, sdg, input, step_limit)?;
        data.run_count += 1;
        for v in &trace.visited {
            data.counts[v.index()] += 1;
        }
        match trace.outcome {
            Outcome::Completed => {}
            Outcome::StepLimit => data.step_limits += 1,
            Outcome::RuntimeError(_) => data.runtime_errors += 1,
        }
    }
    Ok(data)
}
