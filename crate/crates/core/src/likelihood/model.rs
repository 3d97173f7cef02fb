use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::sdg::{CpKind, EdgeLabel, Vertex, VertexId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Simple,
    Heuristic,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Simple => "simple",
            ModelKind::Heuristic => "heuristic",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "simple" => Ok(ModelKind::Simple),
            "heuristic" => Ok(ModelKind::Heuristic),
            _ => Err(format!("unknown model '{s}' (expected simple or heuristic)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Heuristic {
    LoopBranch,
    Pointer,
    ValueCheck,
    LoopExit,
    Return,
}

/// Probability that the branch a heuristic talks about is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicTable {
    pub loop_branch: f64,
    pub pointer: f64,
    pub value_check: f64,
    pub loop_exit: f64,
    pub ret: f64,
}

impl Default for HeuristicTable {
    fn default() -> Self {
        HeuristicTable { loop_branch: 0.88, pointer: 0.40, value_check: 0.16, loop_exit: 0.20, ret: 0.28 }
    }
}

impl HeuristicTable {
    pub fn get(&self, h: Heuristic) -> f64 {
        match h {
            Heuristic::LoopBranch => self.loop_branch,
            Heuristic::Pointer => self.pointer,
            Heuristic::ValueCheck => self.value_check,
            Heuristic::LoopExit => self.loop_exit,
            Heuristic::Return => self.ret,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("vertex {0} is not a control point")]
    NotControlPoint(VertexId),
    #[error("label {label} does not leave vertex {vertex}")]
    BadLabel { vertex: VertexId, label: EdgeLabel },
    #[error("total conflict")]
    TotalConflict,
}

/// Dempster's rule on the binary frame {taken, not taken} with no mass on
/// ignorance.
pub fn dempster_shafer_combine(p: f64, q: f64) -> Result<f64, ModelError> {
    let agree = p * q;
    let norm = agree + (1.0 - p) * (1.0 - q);
    if norm == 0.0 {
        return Err(ModelError::TotalConflict);
    }
    Ok(agree / norm)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchModel {
    pub kind: ModelKind,
    pub table: HeuristicTable,
}

impl BranchModel {
    pub fn new(kind: ModelKind) -> Self {
        BranchModel { kind, table: HeuristicTable::default() }
    }

    pub fn simple() -> Self {
        Self::new(ModelKind::Simple)
    }

    pub fn heuristic() -> Self {
        Self::new(ModelKind::Heuristic)
    }

    /// Heuristics that apply to a condition leaf, each with the probability
    /// it assigns to the True edge.
    pub fn applicable(&self, w: &Vertex) -> Vec<(Heuristic, f64)> {
        let f = &w.flags;
        let t = &self.table;
        let mut out = Vec::new();
        if w.cp_kind() == Some(CpKind::LoopCond) && f.true_enters_body {
            out.push((Heuristic::LoopBranch, t.loop_branch));
        }
        let orient = |p: f64| if f.inverted { 1.0 - p } else { p };
        if f.compares_pointer {
            out.push((Heuristic::Pointer, orient(t.pointer)));
        }
        if f.compares_int_nonpositive {
            out.push((Heuristic::ValueCheck, orient(t.value_check)));
        }
        match (f.loop_exit_on_true, f.loop_exit_on_false) {
            (true, false) => out.push((Heuristic::LoopExit, t.loop_exit)),
            (false, true) => out.push((Heuristic::LoopExit, 1.0 - t.loop_exit)),
            _ => {}
        }
        match (f.guards_return_on_true, f.guards_return_on_false) {
            (true, false) => out.push((Heuristic::Return, t.ret)),
            (false, true) => out.push((Heuristic::Return, 1.0 - t.ret)),
            _ => {}
        }
        out
    }

    fn combined(&self, w: &Vertex) -> Result<Option<f64>, ModelError> {
        let mut acc: Option<f64> = None;
        for (_, p) in self.applicable(w) {
            acc = Some(match acc {
                None => p,
                Some(a) => dempster_shafer_combine(a, p)?,
            });
        }
        Ok(acc)
    }

    /// True-edge probability of an if-condition leaf.
    pub(crate) fn if_true(&self, w: &Vertex) -> Result<f64, ModelError> {
        match self.kind {
            ModelKind::Simple => Ok(0.5),
            ModelKind::Heuristic => Ok(self.combined(w)?.unwrap_or(0.5)),
        }
    }

    /// Weight applied to paths through a loop condition's True edge.
    pub(crate) fn loop_factor(&self, w: &Vertex) -> Result<f64, ModelError> {
        if !w.flags.true_enters_body {
            return Ok(1.0);
        }
        match self.kind {
            ModelKind::Simple => Ok(1.0),
            ModelKind::Heuristic => Ok(self.combined(w)?.unwrap_or(1.0)),
        }
    }

    /// Probability attached to leaving `w` along `label`. Loop conditions
    /// report the factor applied to that edge's paths, not a split.
    pub fn branch_probability(&self, w: &Vertex, label: EdgeLabel) -> Result<f64, ModelError> {
        let kind = w.cp_kind().ok_or(ModelError::NotControlPoint(w.id))?;
        let bad = || ModelError::BadLabel { vertex: w.id, label };
        match (kind, label) {
            (CpKind::IfLeaf, EdgeLabel::True) => self.if_true(w),
            (CpKind::IfLeaf, EdgeLabel::False) => Ok(1.0 - self.if_true(w)?),
            (CpKind::LoopCond, EdgeLabel::True) => self.loop_factor(w),
            (CpKind::LoopCond, EdgeLabel::False) => Ok(1.0),
            (CpKind::SwitchHead, EdgeLabel::Case { index, arity }) if index < arity => Ok(1.0 / f64::from(arity)),
            _ => Err(bad()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_examples() {
        assert!((dempster_shafer_combine(0.88, 0.40).unwrap() - 0.830188).abs() < 1e-6);
        // 0.0256 / (0.0256 + 0.7056)
        assert!((dempster_shafer_combine(0.16, 0.16).unwrap() - 0.0350109).abs() < 1e-6);
        assert!((dempster_shafer_combine(0.3, 0.5).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(dempster_shafer_combine(1.0, 0.0), Err(ModelError::TotalConflict));
    }

    #[test]
    fn model_names() {
        assert_eq!("heuristic".parse::<ModelKind>().unwrap(), ModelKind::Heuristic);
        assert!("fancy".parse::<ModelKind>().is_err());
        assert_eq!(ModelKind::Simple.to_string(), "simple");
    }

    fn graph(src: &str) -> crate::Sdg {
        crate::build_sdg(&crate::parse_program(src, "t.mc").unwrap())
    }

    #[test]
    fn branch_probability_examples() {
        let g = graph("int main(int n, int x) {\n while (x < 9) {\n  x = x + 1;\n }\n if (n <= 0) {\n  x = 2;\n }\n if (x == 3) {\n  x = 4;\n }\n}\n");
        let at = |line| g.vertex(g.vertex_at("t.mc", line).unwrap());
        let (s, h) = (BranchModel::simple(), BranchModel::heuristic());

        assert_eq!(h.branch_probability(at(2), EdgeLabel::True).unwrap(), 0.88);
        assert_eq!(s.branch_probability(at(2), EdgeLabel::True).unwrap(), 1.0);
        assert_eq!(h.branch_probability(at(5), EdgeLabel::True).unwrap(), 0.16);
        assert!((h.branch_probability(at(5), EdgeLabel::False).unwrap() - 0.84).abs() < 1e-15);
        assert_eq!(h.branch_probability(at(8), EdgeLabel::True).unwrap(), 0.5);
        assert_eq!(s.branch_probability(at(5), EdgeLabel::False).unwrap(), 0.5);
        assert_eq!(h.branch_probability(at(3), EdgeLabel::True), Err(ModelError::NotControlPoint(at(3).id)));
    }

    #[test]
    fn switch_cases_stay_uniform() {
        let g = graph("int main(int k) {\n switch (k) {\n case 1:\n  k = 0;\n case 2:\n  k = 1;\n }\n}\n");
        let head = g.vertex(g.vertex_at("t.mc", 2).unwrap());
        let third = EdgeLabel::Case { index: 2, arity: 3 };
        assert_eq!(BranchModel::heuristic().branch_probability(head, third).unwrap(), 1.0 / 3.0);
    }
}
