//! Syntax tree for MicroC.
//!
//! Every statement, condition leaf and call expression carries a [`NodeId`]
//! that is unique within a [`Program`]. Graph construction and the
//! interpreter both key their per-node bookkeeping on it.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

/// Dense identifier assigned by the parser in source order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NodeId(pub u32);

/// Location of a syntactic construct. Lines and columns are 1-based and
/// `col_end` is inclusive.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub line_start: u32,
    pub col_start: u32,
    pub line_end: u32,
    pub col_end: u32,
}

impl SourceSpan {
    pub fn covers_line(&self, line: u32) -> bool {
        self.line_start <= line && line <= self.line_end
    }

    pub fn line_count(&self) -> u32 {
        self.line_end - self.line_start + 1
    }

    /// Smallest span enclosing both `self` and `other`.
    pub fn to(&self, other: &SourceSpan) -> SourceSpan {
        SourceSpan {
            file: self.file.clone(),
            line_start: self.line_start,
            col_start: self.col_start,
            line_end: other.line_end,
            col_end: other.col_end,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line_start, self.col_start)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    Int,
    Pointer,
}

#[derive(Debug, Clone)]
pub struct Program {
    pub file: Arc<str>,
    pub functions: Vec<FunctionDef>,
    pub entry_name: String,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn entry(&self) -> Option<&FunctionDef> {
        self.function(&self.entry_name)
    }
}

#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub ty: ValueType,
}

#[derive(Debug, Clone)]
pub struct FunctionDef {
    pub name: String,
    /// `None` for `void` functions.
    pub ret: Option<ValueType>,
    pub params: Vec<Param>,
    pub body: Block,
    pub span: SourceSpan,
}

impl FunctionDef {
    /// Declared type of a variable: parameters first, then the first
    /// declaration anywhere in the body. Undeclared names are `int`.
    pub fn var_type(&self, name: &str) -> ValueType {
        if let Some(p) = self.params.iter().find(|p| p.name == name) {
            return p.ty;
        }
        let mut found = None;
        visit_stmts(&self.body, &mut |s| {
            if found.is_none() {
                if let StmtKind::Assign { target, decl: Some(ty), .. } = &s.kind {
                    if target == name {
                        found = Some(*ty);
                    }
                }
            }
        });
        found.unwrap_or(ValueType::Int)
    }
}

pub type Block = Vec<Stmt>;

#[derive(Debug, Clone)]
pub struct Stmt {
    pub id: NodeId,
    pub span: SourceSpan,
    pub kind: StmtKind,
}

#[derive(Debug, Clone)]
pub enum StmtKind {
    /// `x = e;` or a declaration `int x = e;` / `int *p;` (implicit zero).
    Assign {
        target: String,
        decl: Option<ValueType>,
        value: Expr,
    },
    If {
        cond: CondExpr,
        then_block: Block,
        else_block: Option<Block>,
    },
    While {
        cond: CondExpr,
        body: Block,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: CondExpr,
        step: Option<Box<Stmt>>,
        body: Block,
    },
    Switch {
        scrutinee: Expr,
        cases: Vec<SwitchCase>,
        default: Option<Block>,
        /// Span of `switch (e)` alone.
        head_span: SourceSpan,
    },
    Break,
    Return(Option<Expr>),
    Call(CallExpr),
    Expr(Expr),
}

#[derive(Debug, Clone)]
pub struct SwitchCase {
    pub label: i64,
    pub body: Block,
}

#[derive(Debug, Clone)]
pub struct CallExpr {
    pub id: NodeId,
    pub name: String,
    pub args: Vec<Expr>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
        }
    }

    pub(crate) fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Expr {
    Int(i64),
    Null,
    Var(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(CallExpr),
    /// Reads the next value of the run's input vector.
    Input,
}

impl Expr {
    /// Call expressions in evaluation order (arguments before the call).
    pub fn calls(&self) -> Vec<&CallExpr> {
        let mut out = Vec::new();
        collect_calls(self, &mut out);
        out
    }

    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::Int(0))
    }
}

fn collect_calls<'a>(e: &'a Expr, out: &mut Vec<&'a CallExpr>) {
    match e {
        Expr::Neg(inner) => collect_calls(inner, out),
        Expr::Binary(_, l, r) => {
            collect_calls(l, out);
            collect_calls(r, out);
        }
        Expr::Call(c) => {
            for a in &c.args {
                collect_calls(a, out);
            }
            out.push(c);
        }
        Expr::Int(_) | Expr::Null | Expr::Var(_) | Expr::Input => {}
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }

    /// Operator that gives the same result with operands swapped.
    pub fn mirrored(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Ge => CmpOp::Le,
            CmpOp::Eq => CmpOp::Eq,
            CmpOp::Ne => CmpOp::Ne,
        }
    }

    pub fn apply(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
        }
    }
}

/// A simple condition. Truthiness tests are stored as `e != 0`.
#[derive(Debug, Clone)]
pub struct ConditionLeaf {
    pub id: NodeId,
    pub span: SourceSpan,
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
    /// Set when an odd number of `!` operators apply to this leaf.
    pub negated: bool,
}

impl ConditionLeaf {
    pub fn calls(&self) -> Vec<&CallExpr> {
        let mut out = self.lhs.calls();
        out.extend(self.rhs.calls());
        out
    }
}

#[derive(Debug, Clone)]
pub enum CondExpr {
    Leaf(ConditionLeaf),
    Not(Box<CondExpr>),
    And(Box<CondExpr>, Box<CondExpr>),
    Or(Box<CondExpr>, Box<CondExpr>),
}

/// A condition with negations pushed onto its leaves.
#[derive(Debug, Clone)]
pub enum NnfCond {
    Leaf(ConditionLeaf),
    And(Box<NnfCond>, Box<NnfCond>),
    Or(Box<NnfCond>, Box<NnfCond>),
}

impl CondExpr {
    pub fn to_nnf(&self) -> NnfCond {
        self.nnf(false)
    }

    fn nnf(&self, negate: bool) -> NnfCond {
        match self {
            CondExpr::Leaf(leaf) => {
                let mut leaf = leaf.clone();
                leaf.negated ^= negate;
                NnfCond::Leaf(leaf)
            }
            CondExpr::Not(inner) => inner.nnf(!negate),
            CondExpr::And(a, b) if !negate => NnfCond::And(Box::new(a.nnf(false)), Box::new(b.nnf(false))),
            CondExpr::And(a, b) => NnfCond::Or(Box::new(a.nnf(true)), Box::new(b.nnf(true))),
            CondExpr::Or(a, b) if !negate => NnfCond::Or(Box::new(a.nnf(false)), Box::new(b.nnf(false))),
            CondExpr::Or(a, b) => NnfCond::And(Box::new(a.nnf(true)), Box::new(b.nnf(true))),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            CondExpr::Leaf(_) => 1,
            CondExpr::Not(c) => c.leaf_count(),
            CondExpr::And(a, b) | CondExpr::Or(a, b) => a.leaf_count() + b.leaf_count(),
        }
    }
}

impl NnfCond {
    pub fn first_leaf(&self) -> &ConditionLeaf {
        match self {
            NnfCond::Leaf(l) => l,
            NnfCond::And(a, _) | NnfCond::Or(a, _) => a.first_leaf(),
        }
    }

    pub fn leaves(&self) -> Vec<&ConditionLeaf> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a ConditionLeaf>) {
        match self {
            NnfCond::Leaf(l) => out.push(l),
            NnfCond::And(a, b) | NnfCond::Or(a, b) => {
                a.collect_leaves(out);
                b.collect_leaves(out);
            }
        }
    }
}

/// Leaves of `c` in left-to-right evaluation order with `!` pushed down.
pub fn decompose_condition(c: &CondExpr) -> Vec<ConditionLeaf> {
    c.to_nnf().leaves().into_iter().cloned().collect()
}

/// Pre-order walk over every statement, including nested blocks and the
/// init/step statements of `for` loops.
pub fn visit_stmts<'a>(block: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in block {
        f(s);
        match &s.kind {
            StmtKind::If { then_block, else_block, .. } => {
                visit_stmts(then_block, f);
                if let Some(e) = else_block {
                    visit_stmts(e, f);
                }
            }
            StmtKind::While { body, .. } => visit_stmts(body, f),
            StmtKind::For { init, step, body, .. } => {
                if let Some(i) = init {
                    f(i);
                }
                if let Some(st) = step {
                    f(st);
                }
                visit_stmts(body, f);
            }
            StmtKind::Switch { cases, default, .. } => {
                for c in cases {
                    visit_stmts(&c.body, f);
                }
                if let Some(d) = default {
                    visit_stmts(d, f);
                }
            }
            _ => {}
        }
    }
}

impl StmtKind {
    pub fn condition(&self) -> Option<&CondExpr> {
        match self {
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } | StmtKind::For { cond, .. } => Some(cond),
            _ => None,
        }
    }
}
