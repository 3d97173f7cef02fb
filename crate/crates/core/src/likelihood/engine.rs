use std::collections::HashMap;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::model::{BranchModel, ModelError, ModelKind};
use super::scc;
use crate::sdg::{CpKind, EdgeLabel, Sdg, SdgError, VertexId, VertexKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("program has no entry function; pass a start function")]
    NoEntry,
    #[error("vertex {0} is not in the graph")]
    NoSuchVertex(VertexId),
    #[error(transparent)]
    Sdg(#[from] SdgError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LikelihoodResult {
    pub vertex: VertexId,
    pub likelihood: f64,
    #[serde(serialize_with = "ser_model")]
    pub model: ModelKind,
    pub start: VertexId,
    /// False when no dependence path leads from `start` to `vertex`.
    pub reachable: bool,
}

fn ser_model<S: serde::Serializer>(m: &ModelKind, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(m.as_str())
}

/// Likelihood queries over one graph and one branch model.
///
/// Transition probabilities from a start vertex to function entries are
/// kept across queries; everything else is recomputed per query.
pub struct Engine<'g> {
    sdg: &'g Sdg,
    model: BranchModel,
    comp: Vec<u32>,
    cyclic: Vec<bool>,
    entry_cache: Mutex<HashMap<(VertexId, VertexId), f64>>,
}

impl<'g> Engine<'g> {
    pub fn new(sdg: &'g Sdg, model: BranchModel) -> Self {
        let (comp, cyclic) = scc::components(sdg);
        Engine { sdg, model, comp, cyclic, entry_cache: Mutex::new(HashMap::new()) }
    }

    pub fn sdg(&self) -> &'g Sdg {
        self.sdg
    }

    pub fn model(&self) -> &BranchModel {
        &self.model
    }

    /// Number of persisted start-to-entry probabilities.
    pub fn cached_entries(&self) -> usize {
        self.entry_cache.lock().expect("entry cache poisoned").len()
    }

    fn resolve_start(&self, start: Option<VertexId>) -> Result<VertexId, EngineError> {
        let s = start.or(self.sdg.entry()).ok_or(EngineError::NoEntry)?;
        self.check(s)?;
        Ok(s)
    }

    fn check(&self, v: VertexId) -> Result<(), EngineError> {
        if v.index() < self.sdg.len() {
            Ok(())
        } else {
            Err(EngineError::NoSuchVertex(v))
        }
    }

    /// Probability that `target` executes at least once when execution
    /// begins at `start` (the program entry by default).
    pub fn execution_likelihood(
        &self,
        target: VertexId,
        start: Option<VertexId>,
    ) -> Result<LikelihoodResult, EngineError> {
        let start = self.resolve_start(start)?;
        self.check(target)?;
        let reach = self.sdg.backward_reach(target, Some(start));
        let reachable = reach[start.index()];
        let likelihood = if reachable { self.transition(start, target)? } else { 0.0 };
        assert!((-1e-12..=1.0 + 1e-12).contains(&likelihood), "likelihood {likelihood} out of range for {target}");
        Ok(LikelihoodResult {
            vertex: target,
            likelihood: likelihood.clamp(0.0, 1.0),
            model: self.model.kind,
            start,
            reachable,
        })
    }

    pub fn batch_likelihood(
        &self,
        targets: &[VertexId],
        start: Option<VertexId>,
    ) -> Result<Vec<LikelihoodResult>, EngineError> {
        targets.iter().map(|&t| self.execution_likelihood(t, start)).collect()
    }

    /// Same results as [`Engine::batch_likelihood`], computed on the current
    /// rayon pool.
    pub fn par_batch_likelihood(
        &self,
        targets: &[VertexId],
        start: Option<VertexId>,
    ) -> Result<Vec<LikelihoodResult>, EngineError> {
        targets.par_iter().map(|&t| self.execution_likelihood(t, start)).collect()
    }

    /// p(start -> target), split at the target function's entry when the
    /// start lies in another function.
    fn transition(&self, start: VertexId, target: VertexId) -> Result<f64, EngineError> {
        if start == target {
            return Ok(1.0);
        }
        let entry = self.sdg.function_entry(target);
        if entry == start || self.sdg.function_entry(start) == entry {
            return self.dfs(start, target);
        }
        let to_entry = self.entry_transition(start, entry)?;
        if to_entry == 0.0 {
            return Ok(0.0);
        }
        Ok(to_entry * self.dfs(entry, target)?)
    }

    fn entry_transition(&self, start: VertexId, entry: VertexId) -> Result<f64, EngineError> {
        if let Some(&p) = self.entry_cache.lock().expect("entry cache poisoned").get(&(start, entry)) {
            return Ok(p);
        }
        let p = self.dfs(start, entry)?;
        self.entry_cache.lock().expect("entry cache poisoned").insert((start, entry), p);
        Ok(p)
    }

    /// Enumerates acyclic dependence paths from `root` to `target` and folds
    /// them into a transition probability.
    fn dfs(&self, root: VertexId, target: VertexId) -> Result<f64, EngineError> {
        if root == target {
            return Ok(1.0);
        }
        let g = self.sdg;
        let reach = g.backward_reach(target, Some(root));
        if !reach[root.index()] {
            return Ok(0.0);
        }
        let mut memo: HashMap<(VertexId, Vec<u32>), f64> = HashMap::new();
        let mut on_path = vec![false; g.len()];
        // Path members per cyclic component, in push order.
        let mut comp_path: HashMap<u32, Vec<u32>> = HashMap::new();
        let mut frames: Vec<Frame> = Vec::new();

        let key = |w: VertexId, comp_path: &HashMap<u32, Vec<u32>>| -> (VertexId, Vec<u32>) {
            let c = self.comp[w.index()];
            if !self.cyclic[c as usize] {
                return (w, Vec::new());
            }
            let mut members = comp_path.get(&c).cloned().unwrap_or_default();
            members.sort_unstable();
            (w, members)
        };

        let enter = |w: VertexId,
                     via: Option<EdgeLabel>,
                     frames: &mut Vec<Frame>,
                     on_path: &mut Vec<bool>,
                     comp_path: &mut HashMap<u32, Vec<u32>>,
                     key: (VertexId, Vec<u32>)| {
            on_path[w.index()] = true;
            let c = self.comp[w.index()];
            if self.cyclic[c as usize] {
                comp_path.entry(c).or_default().push(w.0);
            }
            frames.push(Frame { w, via, next: 0, groups: Vec::new(), key });
        };

        let root_key = key(root, &comp_path);
        enter(root, None, &mut frames, &mut on_path, &mut comp_path, root_key);
        loop {
            let top = frames.last_mut().expect("dfs frame");
            let succs = g.successors(top.w);
            if top.next < succs.len() {
                let s = succs[top.next];
                top.next += 1;
                let child = s.to;
                if !reach[child.index()] || on_path[child.index()] {
                    continue;
                }
                if child == target {
                    top.record(s.label, 1.0);
                    continue;
                }
                let k = key(child, &comp_path);
                if let Some(&p) = memo.get(&k) {
                    top.record(s.label, p);
                    continue;
                }
                enter(child, Some(s.label), &mut frames, &mut on_path, &mut comp_path, k);
                continue;
            }
            let frame = frames.pop().expect("dfs frame");
            let p = self.fold(frame.w, &frame.groups)?;
            on_path[frame.w.index()] = false;
            let c = self.comp[frame.w.index()];
            if self.cyclic[c as usize] {
                comp_path.get_mut(&c).and_then(|v| v.pop());
            }
            memo.insert(frame.key, p);
            match (frames.last_mut(), frame.via) {
                (Some(parent), Some(label)) => parent.record(label, p),
                _ => return Ok(p),
            }
        }
    }

    /// Combines per-label groups of `w` into p(w -> target).
    fn fold(&self, w: VertexId, groups: &[(EdgeLabel, f64)]) -> Result<f64, EngineError> {
        // Each group holds the product of (1 - p_i) over its paths.
        let hit =
            |label: EdgeLabel| -> f64 { groups.iter().find(|(l, _)| *l == label).map_or(0.0, |(_, miss)| 1.0 - miss) };
        let v = self.sdg.vertex(w);
        Ok(match v.kind {
            VertexKind::ControlPoint(CpKind::IfLeaf) => {
                let pt = self.model.if_true(v)?;
                pt * hit(EdgeLabel::True) + (1.0 - pt) * hit(EdgeLabel::False)
            }
            VertexKind::ControlPoint(CpKind::LoopCond) => {
                let body = self.model.loop_factor(v)? * hit(EdgeLabel::True);
                1.0 - (1.0 - body) * (1.0 - hit(EdgeLabel::False))
            }
            VertexKind::ControlPoint(CpKind::SwitchHead) => groups
                .iter()
                .map(|&(label, miss)| match label {
                    EdgeLabel::Case { arity, .. } => (1.0 - miss) / f64::from(arity),
                    _ => 0.0,
                })
                .sum(),
            _ => 1.0 - groups.iter().map(|(_, miss)| miss).product::<f64>(),
        })
    }
}

struct Frame {
    w: VertexId,
    via: Option<EdgeLabel>,
    next: usize,
    groups: Vec<(EdgeLabel, f64)>,
    key: (VertexId, Vec<u32>),
}

impl Frame {
    fn record(&mut self, label: EdgeLabel, p: f64) {
        match self.groups.iter_mut().find(|(l, _)| *l == label) {
            Some((_, miss)) => *miss *= 1.0 - p,
            None => self.groups.push((label, 1.0 - p)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_program;
    use crate::sdg::build_sdg;

    fn sdg(src: &str) -> Sdg {
        build_sdg(&parse_program(src, "t.mc").unwrap())
    }

    fn e(g: &Sdg, model: BranchModel, line: u32) -> f64 {
        let v = g.vertex_at("t.mc", line).unwrap();
        Engine::new(g, model).execution_likelihood(v, None).unwrap().likelihood
    }

    #[test]
    fn single_if() {
        let g = sdg("int main() {\n if (c) {\n  s1 = 1;\n }\n s2 = 2;\n}\n");
        assert_eq!(e(&g, BranchModel::simple(), 3), 0.5);
        assert_eq!(e(&g, BranchModel::simple(), 5), 1.0);
        assert_eq!(e(&g, BranchModel::simple(), 1), 1.0);
    }

    #[test]
    fn nested_ifs() {
        let g = sdg("int main() {\n if (a) {\n  if (b) {\n   x = 1;\n  }\n }\n}\n");
        assert_eq!(e(&g, BranchModel::simple(), 4), 0.25);
    }

    #[test]
    fn switch_cases_are_uniform() {
        let g = sdg(
            "int main() {\n switch (x) {\n case 1:\n  a = 1;\n  break;\n case 2:\n  b = 1;\n  break;\n case 3:\n  c = 1;\n  break;\n }\n}\n",
        );
        for line in [4, 7, 10] {
            assert_eq!(e(&g, BranchModel::simple(), line), 0.25);
        }
    }

    #[test]
    fn short_circuit_then_branch() {
        let g = sdg("int main() {\n if (a || b) {\n  t = 1;\n }\n}\n");
        assert_eq!(e(&g, BranchModel::simple(), 3), 0.75);
    }

    #[test]
    fn two_call_sites_noisy_or() {
        let g = sdg("int main() {\n if (a) {\n  f();\n }\n if (b) {\n  f();\n }\n}\nint f() {\n x = 1;\n}\n");
        assert_eq!(e(&g, BranchModel::simple(), 10), 0.75);
    }

    #[test]
    fn pointer_heuristic() {
        let g = sdg("int main(int *p) {\n if (p == NULL) {\n  x = 1;\n }\n}\n");
        assert!((e(&g, BranchModel::heuristic(), 3) - 0.40).abs() < 1e-15);
        assert_eq!(e(&g, BranchModel::simple(), 3), 0.5);
    }

    #[test]
    fn loop_body_inherits_head_under_simple() {
        let src = "int main() {\n if (c) {\n  while (i < 3) {\n   i = i + 1;\n  }\n }\n}\n";
        let g = sdg(src);
        assert_eq!(e(&g, BranchModel::simple(), 4), e(&g, BranchModel::simple(), 3));
        assert_eq!(e(&g, BranchModel::simple(), 4), 0.5);
        assert!((e(&g, BranchModel::heuristic(), 4) - 0.5 * 0.88).abs() < 1e-15);
    }

    #[test]
    fn unreachable_and_start() {
        let g = sdg("int main() {\n return 0;\n x = 1;\n}\nint f() {\n y = 1;\n}\n");
        let eng = Engine::new(&g, BranchModel::simple());
        let dead = eng.execution_likelihood(g.vertex_at("t.mc", 3).unwrap(), None).unwrap();
        assert_eq!((dead.likelihood, dead.reachable), (0.0, false));
        let f = g.entry_of("f").unwrap();
        let y = g.vertex_at("t.mc", 6).unwrap();
        assert_eq!(eng.execution_likelihood(y, None).unwrap().likelihood, 0.0);
        let r = eng.execution_likelihood(y, Some(f)).unwrap();
        assert_eq!((r.likelihood, r.start, r.reachable), (1.0, f, true));
        assert_eq!(eng.execution_likelihood(f, Some(f)).unwrap().likelihood, 1.0);
    }

    #[test]
    fn recursion_is_cut() {
        let g = sdg("int main() {\n f(3);\n}\nint f(int n) {\n if (n > 0) {\n  f(n - 1);\n }\n x = 1;\n}\n");
        assert_eq!(e(&g, BranchModel::simple(), 8), 1.0);
        assert_eq!(e(&g, BranchModel::simple(), 6), 0.5);
    }

    #[test]
    fn batch_matches_single() {
        let g = sdg("int main() {\n if (a || b) {\n  f();\n }\n f();\n}\nint f() {\n if (c) {\n  x = 1;\n }\n}\n");
        let eng = Engine::new(&g, BranchModel::heuristic());
        let all: Vec<VertexId> = g.vertices().iter().map(|v| v.id).collect();
        let batch = eng.batch_likelihood(&all, None).unwrap();
        let par = eng.par_batch_likelihood(&all, None).unwrap();
        for (i, &v) in all.iter().enumerate() {
            let fresh = Engine::new(&g, BranchModel::heuristic()).execution_likelihood(v, None).unwrap();
            assert_eq!(batch[i].likelihood.to_bits(), fresh.likelihood.to_bits());
            assert_eq!(par[i], batch[i]);
        }
        assert!(eng.cached_entries() >= 1);
        assert!(eng.batch_likelihood(&[], None).unwrap().is_empty());
    }
}
