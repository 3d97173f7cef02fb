//! Brute-force reference for loop-free programs: fix an outcome for every
//! control point, walk the syntax tree, and weight each visited set by the
//! probability of its outcome assignment under uniform branches.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use elan_core::frontend::{visit_stmts, CondExpr, Expr, NodeId, Program, Stmt, StmtKind};
use elan_core::sdg::{Sdg, VertexId};
use elan_core::{build_sdg, parse_program};

pub fn load(src: &str, file: &str) -> (Program, Sdg) {
    let p = parse_program(src, file).expect("parses");
    let g = build_sdg(&p);
    (p, g)
}

/// Control points as (node, number of outcomes), in a fixed order.
fn control_points(p: &Program) -> Vec<(NodeId, usize)> {
    let mut out = Vec::new();
    for f in &p.functions {
        visit_stmts(&f.body, &mut |s| match &s.kind {
            StmtKind::If { cond, .. } => collect_leaves(cond, &mut out),
            StmtKind::Switch { cases, .. } => out.push((s.id, cases.len() + 1)),
            StmtKind::While { .. } | StmtKind::For { .. } => panic!("oracle handles loop-free programs only"),
            _ => {}
        });
    }
    out
}

fn collect_leaves(c: &CondExpr, out: &mut Vec<(NodeId, usize)>) {
    match c {
        CondExpr::Leaf(l) => out.push((l.id, 2)),
        CondExpr::Not(i) => collect_leaves(i, out),
        CondExpr::And(a, b) | CondExpr::Or(a, b) => {
            collect_leaves(a, out);
            collect_leaves(b, out);
        }
    }
}

struct Walk<'a> {
    p: &'a Program,
    g: &'a Sdg,
    outcome: &'a HashMap<NodeId, usize>,
    visited: BTreeSet<VertexId>,
    depth: usize,
}

enum Flow {
    Normal,
    Break,
    Return,
}

impl<'a> Walk<'a> {
    fn node(&mut self, id: NodeId) {
        self.visited.insert(self.g.vertex_for_node(id).expect("node has a vertex"));
    }

    fn function(&mut self, name: &str) {
        let Some(f) = self.p.function(name) else { return };
        self.depth += 1;
        assert!(self.depth < 64, "oracle handles recursion-free programs only");
        self.visited.insert(self.g.entry_of(name).unwrap());
        self.block(&f.body);
        self.depth -= 1;
    }

    fn expr(&mut self, e: &Expr) {
        for c in e.calls() {
            self.node(c.id);
            self.function(&c.name);
        }
    }

    /// Leaf outcomes are the value of the leaf including its own negation;
    /// `negate` tracks enclosing `!`.
    fn cond(&mut self, c: &CondExpr, negate: bool) -> bool {
        match c {
            CondExpr::Leaf(l) => {
                self.expr(&l.lhs);
                self.expr(&l.rhs);
                self.node(l.id);
                (self.outcome[&l.id] == 1) ^ negate
            }
            CondExpr::Not(i) => self.cond(i, !negate),
            CondExpr::And(a, b) => {
                if negate {
                    self.cond(a, true) || self.cond(b, true)
                } else {
                    self.cond(a, false) && self.cond(b, false)
                }
            }
            CondExpr::Or(a, b) => {
                if negate {
                    self.cond(a, true) && self.cond(b, true)
                } else {
                    self.cond(a, false) || self.cond(b, false)
                }
            }
        }
    }

    fn block(&mut self, b: &[Stmt]) -> Flow {
        for s in b {
            match self.stmt(s) {
                Flow::Normal => {}
                other => return other,
            }
        }
        Flow::Normal
    }

    fn stmt(&mut self, s: &Stmt) -> Flow {
        match &s.kind {
            StmtKind::Assign { value, .. } | StmtKind::Expr(value) => {
                self.expr(value);
                self.node(s.id);
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(e);
                }
                self.node(s.id);
                return Flow::Return;
            }
            StmtKind::Break => {
                self.node(s.id);
                return Flow::Break;
            }
            StmtKind::Call(c) => {
                for a in &c.args {
                    self.expr(a);
                }
                self.node(c.id);
                self.function(&c.name);
            }
            StmtKind::If { cond, then_block, else_block } => {
                return if self.cond(cond, false) {
                    self.block(then_block)
                } else if let Some(e) = else_block {
                    self.block(e)
                } else {
                    Flow::Normal
                };
            }
            StmtKind::Switch { scrutinee, cases, default, .. } => {
                self.expr(scrutinee);
                self.node(s.id);
                let start = self.outcome[&s.id];
                let arms = cases.iter().skip(start).map(|c| &c.body).chain(default.iter());
                for arm in arms {
                    match self.block(arm) {
                        Flow::Normal => {}
                        Flow::Break => return Flow::Normal,
                        Flow::Return => return Flow::Return,
                    }
                }
            }
            StmtKind::While { .. } | StmtKind::For { .. } => unreachable!(),
        }
        Flow::Normal
    }
}

/// Exact P(v visited) for every vertex, starting at the entry function.
pub fn brute_force(p: &Program, g: &Sdg) -> Vec<f64> {
    let cps = control_points(p);
    let total: usize = cps.iter().map(|(_, k)| k).product();
    assert!(total <= 1 << 20, "too many outcome assignments");
    let weight = 1.0 / total as f64;
    let mut prob = vec![0.0; g.len()];
    let mut outcome: HashMap<NodeId, usize> = cps.iter().map(|(n, _)| (*n, 0)).collect();
    for mut code in 0..total {
        for (n, k) in &cps {
            outcome.insert(*n, code % k);
            code /= k;
        }
        let mut w = Walk { p, g, outcome: &outcome, visited: BTreeSet::new(), depth: 0 };
        w.function(&p.entry_name);
        for v in w.visited {
            prob[v.index()] += weight;
        }
    }
    prob
}

pub fn control_point_count(p: &Program) -> usize {
    control_points(p).len()
}
