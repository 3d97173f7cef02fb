//! Control-only system dependence graph.
//!
//! Each function contributes an entry vertex, one vertex per statement,
//! per condition leaf, per switch head and per call expression. Vertices
//! are linked by labelled control-dependence edges computed from the
//! function's postdominator tree, and call sites are linked to the entry
//! vertex of their callee.

mod build;
mod dominators;
mod dump;

use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::frontend::{NodeId, SourceSpan};

pub use build::build_sdg;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct VertexId(pub u32);

impl VertexId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "v{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CpKind {
    IfLeaf,
    LoopCond,
    SwitchHead,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VertexKind {
    Entry,
    ControlPoint(CpKind),
    Statement,
    CallSite { callee: String },
}

impl VertexKind {
    pub fn name(&self) -> &'static str {
        match self {
            VertexKind::Entry => "entry",
            VertexKind::ControlPoint(_) => "control_point",
            VertexKind::Statement => "statement",
            VertexKind::CallSite { .. } => "call_site",
        }
    }
}

/// Facts about a control point that decide which branch heuristics apply.
/// All of them are recomputed from the syntax tree on every build.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct HeuristicFlags {
    /// A loop-exiting `break` depends on the True edge.
    pub loop_exit_on_true: bool,
    /// A loop-exiting `break` depends on the False edge.
    pub loop_exit_on_false: bool,
    pub guards_return_on_true: bool,
    pub guards_return_on_false: bool,
    /// Canonical form compares two pointers, or a pointer with NULL, for equality.
    pub compares_pointer: bool,
    /// Canonical form is `e < 0` or `e <= 0` for an integer `e`.
    pub compares_int_nonpositive: bool,
    /// The True edge is taken when the canonical comparison is false.
    pub inverted: bool,
    /// Loop conditions only: the True edge enters the loop body rather than
    /// the next leaf of the same condition.
    pub true_enters_body: bool,
}

impl HeuristicFlags {
    pub fn is_loop_exit_guard(&self) -> bool {
        self.loop_exit_on_true || self.loop_exit_on_false
    }
}

#[derive(Debug, Clone)]
pub struct Vertex {
    pub id: VertexId,
    pub kind: VertexKind,
    pub span: SourceSpan,
    pub function: Arc<str>,
    pub flags: HeuristicFlags,
    /// Syntax node this vertex stands for; `None` for entry vertices.
    pub node: Option<NodeId>,
    /// Short source text used in dumps.
    pub text: String,
}

impl Vertex {
    pub fn is_control_point(&self) -> bool {
        matches!(self.kind, VertexKind::ControlPoint(_))
    }

    pub fn cp_kind(&self) -> Option<CpKind> {
        match self.kind {
            VertexKind::ControlPoint(k) => Some(k),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeLabel {
    True,
    False,
    Case { index: u32, arity: u32 },
    Always,
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EdgeLabel::True => f.write_str("true"),
            EdgeLabel::False => f.write_str("false"),
            EdgeLabel::Case { index, arity } => write!(f, "case:{index}/{arity}"),
            EdgeLabel::Always => f.write_str("always"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CdEdge {
    pub from: VertexId,
    pub to: VertexId,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CallEdge {
    pub from: VertexId,
    pub to: VertexId,
}

#[derive(Debug, Clone)]
pub struct FunctionInfo {
    pub name: Arc<str>,
    pub entry: VertexId,
    /// Vertices of this function occupy `entry.0 .. end`.
    pub end: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SdgError {
    #[error("no vertex covers {file}:{line}")]
    NotFound { file: String, line: u32 },
    #[error("unknown function '{0}'")]
    UnknownFunction(String),
}

/// Outgoing dependence as seen by traversals: call edges appear with the
/// `Always` label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Successor {
    pub to: VertexId,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone)]
pub struct Sdg {
    pub(crate) file: Arc<str>,
    pub(crate) vertices: Vec<Vertex>,
    pub(crate) cd_edges: Vec<CdEdge>,
    pub(crate) call_edges: Vec<CallEdge>,
    pub(crate) entry: Option<VertexId>,
    pub(crate) functions: Vec<FunctionInfo>,
    pub(crate) node_map: HashMap<NodeId, VertexId>,
    pub(crate) succs: Vec<Vec<Successor>>,
    pub(crate) preds: Vec<Vec<VertexId>>,
    pub(crate) diagnostics: Vec<String>,
}

impl Sdg {
    pub fn file(&self) -> &str {
        &self.file
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, v: VertexId) -> &Vertex {
        &self.vertices[v.index()]
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn cd_edges(&self) -> &[CdEdge] {
        &self.cd_edges
    }

    pub fn call_edges(&self) -> &[CallEdge] {
        &self.call_edges
    }

    /// Entry vertex of the program's entry function, if it has one.
    pub fn entry(&self) -> Option<VertexId> {
        self.entry
    }

    pub fn functions(&self) -> &[FunctionInfo] {
        &self.functions
    }

    pub fn entry_of(&self, function: &str) -> Result<VertexId, SdgError> {
        self.functions
            .iter()
            .find(|f| &*f.name == function)
            .map(|f| f.entry)
            .ok_or_else(|| SdgError::UnknownFunction(function.to_string()))
    }

    /// Entry vertex of the function that contains `v`.
    pub fn function_entry(&self, v: VertexId) -> VertexId {
        let i = self.functions.partition_point(|f| f.entry <= v);
        self.functions[i - 1].entry
    }

    pub fn vertex_for_node(&self, node: NodeId) -> Option<VertexId> {
        self.node_map.get(&node).copied()
    }

    pub fn successors(&self, v: VertexId) -> &[Successor] {
        &self.succs[v.index()]
    }

    /// Control-dependence and call predecessors.
    pub fn predecessors(&self, v: VertexId) -> &[VertexId] {
        &self.preds[v.index()]
    }

    pub fn control_points(&self) -> Vec<VertexId> {
        self.vertices.iter().filter(|v| v.is_control_point()).map(|v| v.id).collect()
    }

    /// Warnings produced while building, e.g. calls to undefined functions.
    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    /// Backward closure of `v` over control-dependence and call edges.
    pub fn control_slice(&self, v: VertexId) -> Slice {
        let members = self.backward_reach(v, None);
        self.restrict(v, members)
    }

    /// Vertices on a dependence path from `source` to `target`. Empty when
    /// `target` cannot be reached from `source`.
    pub fn chop(&self, source: VertexId, target: VertexId) -> Slice {
        let backward = self.backward_reach(target, None);
        if !backward[source.index()] {
            return self.restrict(target, vec![false; self.len()]);
        }
        let mut members = vec![false; self.len()];
        let mut queue = VecDeque::from([source]);
        members[source.index()] = true;
        while let Some(w) = queue.pop_front() {
            for s in self.successors(w) {
                if backward[s.to.index()] && !members[s.to.index()] {
                    members[s.to.index()] = true;
                    queue.push_back(s.to);
                }
            }
        }
        self.restrict(target, members)
    }

    /// Vertices that reach `v`. When `stop` is given, its predecessors are
    /// not explored (it is still included if reached).
    pub(crate) fn backward_reach(&self, v: VertexId, stop: Option<VertexId>) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![v];
        seen[v.index()] = true;
        while let Some(w) = stack.pop() {
            if Some(w) == stop {
                continue;
            }
            for &p in self.predecessors(w) {
                if !seen[p.index()] {
                    seen[p.index()] = true;
                    stack.push(p);
                }
            }
        }
        seen
    }

    fn restrict(&self, root: VertexId, members: Vec<bool>) -> Slice {
        let cd_edges =
            self.cd_edges.iter().filter(|e| members[e.from.index()] && members[e.to.index()]).copied().collect();
        let call_edges =
            self.call_edges.iter().filter(|e| members[e.from.index()] && members[e.to.index()]).copied().collect();
        let members = members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| VertexId(i as u32)).collect();
        Slice { root, members, cd_edges, call_edges }
    }

    /// Vertex reported for a source line: among vertices whose span covers
    /// the line, the one spanning the fewest lines; entry vertices lose ties
    /// to any other vertex, remaining ties go to the lowest id.
    pub fn vertex_at(&self, file: &str, line: u32) -> Result<VertexId, SdgError> {
        let not_found = || SdgError::NotFound { file: file.to_string(), line };
        if !same_file(&self.file, file) {
            return Err(not_found());
        }
        self.vertices
            .iter()
            .filter(|v| v.span.covers_line(line))
            .min_by_key(|v| (v.span.line_count(), v.kind == VertexKind::Entry, v.id))
            .map(|v| v.id)
            .ok_or_else(not_found)
    }
}

/// Paths name the same file when equal or when one is a suffix of the
/// other on a component boundary (`src/a.mc` vs `a.mc`).
pub(crate) fn same_file(a: &str, b: &str) -> bool {
    let (a, b) = (a.trim_start_matches("./"), b.trim_start_matches("./"));
    if a == b {
        return true;
    }
    let (long, short) = if a.len() > b.len() { (a, b) } else { (b, a) };
    long.ends_with(short) && long[..long.len() - short.len()].ends_with('/')
}

/// A control slice or chop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slice {
    pub root: VertexId,
    /// Sorted ascending.
    pub members: Vec<VertexId>,
    pub cd_edges: Vec<CdEdge>,
    pub call_edges: Vec<CallEdge>,
}

impl Slice {
    pub fn contains(&self, v: VertexId) -> bool {
        self.members.binary_search(&v).is_ok()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }
}
