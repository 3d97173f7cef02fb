use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use super::dominators::immediate_dominators;
use super::*;
use crate::frontend::{
    pretty_expr, pretty_leaf, CallExpr, CmpOp, ConditionLeaf, Expr, FunctionDef, NnfCond, Program, Stmt, StmtKind,
    ValueType,
};

/// Builds the control-only SDG of `program`. Vertex ids follow source order,
/// so identical input yields identical graphs.
pub fn build_sdg(program: &Program) -> Sdg {
    let mut b = Builder {
        program,
        vertices: Vec::new(),
        node_map: HashMap::new(),
        loop_breaks: HashSet::new(),
        returns: HashSet::new(),
        functions: Vec::new(),
    };
    for f in &program.functions {
        b.allocate_function(f);
    }

    let mut cd_edges = Vec::new();
    let mut body_edges = HashSet::new();
    for (f, info) in program.functions.iter().zip(b.functions.clone()) {
        let mut lower = Lower::new(&b, info.entry.0, info.end);
        let first = lower.block(&f.body, lower.exit, None);
        lower.edge(0, first, Some(EdgeLabel::Always));
        lower.edge(0, lower.exit, None);
        cd_edges.extend(lower.control_dependences());
        body_edges.extend(lower.true_enters_body);
    }
    cd_edges.sort();
    cd_edges.dedup();

    let mut diagnostics = Vec::new();
    let mut call_edges = Vec::new();
    for v in &b.vertices {
        if let VertexKind::CallSite { callee } = &v.kind {
            match b.functions.iter().find(|f| &*f.name == callee) {
                Some(target) => call_edges.push(CallEdge { from: v.id, to: target.entry }),
                None => diagnostics.push(format!("{}: call to undefined function '{callee}'", v.span)),
            }
        }
    }

    let mut vertices = b.vertices;
    for e in &cd_edges {
        let breaks = b.loop_breaks.contains(&e.to);
        let returns = b.returns.contains(&e.to);
        let w = &mut vertices[e.from.index()];
        if !matches!(w.kind, VertexKind::ControlPoint(CpKind::IfLeaf | CpKind::LoopCond)) {
            continue;
        }
        match e.label {
            EdgeLabel::True => {
                w.flags.loop_exit_on_true |= breaks;
                w.flags.guards_return_on_true |= returns;
            }
            EdgeLabel::False => {
                w.flags.loop_exit_on_false |= breaks;
                w.flags.guards_return_on_false |= returns;
            }
            _ => {}
        }
    }
    for v in body_edges {
        vertices[v.index()].flags.true_enters_body = true;
    }

    let n = vertices.len();
    let mut succs: Vec<Vec<Successor>> = vec![Vec::new(); n];
    let mut preds: Vec<Vec<VertexId>> = vec![Vec::new(); n];
    for e in &cd_edges {
        succs[e.from.index()].push(Successor { to: e.to, label: e.label });
        preds[e.to.index()].push(e.from);
    }
    for e in &call_edges {
        succs[e.from.index()].push(Successor { to: e.to, label: EdgeLabel::Always });
        preds[e.to.index()].push(e.from);
    }
    for p in &mut preds {
        p.dedup();
    }

    let entry = b.functions.iter().find(|f| *f.name == *program.entry_name).map(|f| f.entry);
    Sdg {
        file: program.file.clone(),
        vertices,
        cd_edges,
        call_edges,
        entry,
        functions: b.functions,
        node_map: b.node_map,
        succs,
        preds,
        diagnostics,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Breakable {
    Loop,
    Switch,
}

struct Builder<'p> {
    program: &'p Program,
    vertices: Vec<Vertex>,
    node_map: HashMap<NodeId, VertexId>,
    loop_breaks: HashSet<VertexId>,
    returns: HashSet<VertexId>,
    functions: Vec<FunctionInfo>,
}

impl<'p> Builder<'p> {
    fn vertex(&self, node: NodeId) -> usize {
        self.node_map[&node].index()
    }

    fn alloc(
        &mut self,
        kind: VertexKind,
        span: &SourceSpan,
        function: &Arc<str>,
        node: Option<NodeId>,
        text: String,
    ) -> VertexId {
        let id = VertexId(self.vertices.len() as u32);
        self.vertices.push(Vertex {
            id,
            kind,
            span: span.clone(),
            function: function.clone(),
            flags: HeuristicFlags::default(),
            node,
            text,
        });
        if let Some(n) = node {
            self.node_map.insert(n, id);
        }
        id
    }

    fn allocate_function(&mut self, f: &FunctionDef) {
        let name: Arc<str> = Arc::from(f.name.as_str());
        let entry = self.alloc(VertexKind::Entry, &f.span, &name, None, format!("entry {}", f.name));
        let mut ctx = AllocCtx { function: f, name, breakables: Vec::new() };
        self.alloc_block(&f.body, &mut ctx);
        self.functions.push(FunctionInfo { name: ctx.name, entry, end: self.vertices.len() as u32 });
    }

    fn alloc_block(&mut self, stmts: &[Stmt], ctx: &mut AllocCtx) {
        for s in stmts {
            self.alloc_stmt(s, ctx);
        }
    }

    fn alloc_calls(&mut self, e: &Expr, ctx: &AllocCtx) {
        for c in e.calls() {
            self.alloc_call(c, ctx);
        }
    }

    fn alloc_call(&mut self, c: &CallExpr, ctx: &AllocCtx) -> VertexId {
        self.alloc(
            VertexKind::CallSite { callee: c.name.clone() },
            &c.span,
            &ctx.name,
            Some(c.id),
            format!("call {}", c.name),
        )
    }

    fn alloc_stmt(&mut self, s: &Stmt, ctx: &mut AllocCtx) {
        match &s.kind {
            StmtKind::Assign { target, value, .. } => {
                self.alloc_calls(value, ctx);
                let text = format!("{target} = {}", pretty_expr(value));
                self.alloc(VertexKind::Statement, &s.span, &ctx.name, Some(s.id), text);
            }
            StmtKind::Expr(e) => {
                self.alloc_calls(e, ctx);
                self.alloc(VertexKind::Statement, &s.span, &ctx.name, Some(s.id), pretty_expr(e));
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.alloc_calls(e, ctx);
                }
                let text = match e {
                    Some(e) => format!("return {}", pretty_expr(e)),
                    None => "return".to_string(),
                };
                let v = self.alloc(VertexKind::Statement, &s.span, &ctx.name, Some(s.id), text);
                self.returns.insert(v);
            }
            StmtKind::Break => {
                let v = self.alloc(VertexKind::Statement, &s.span, &ctx.name, Some(s.id), "break".into());
                if ctx.breakables.last() == Some(&Breakable::Loop) {
                    self.loop_breaks.insert(v);
                }
            }
            StmtKind::Call(c) => {
                for a in &c.args {
                    self.alloc_calls(a, ctx);
                }
                let v = self.alloc_call(c, ctx);
                self.node_map.insert(s.id, v);
            }
            StmtKind::If { cond, then_block, else_block } => {
                self.alloc_cond(&cond.to_nnf(), CpKind::IfLeaf, ctx);
                self.alloc_block(then_block, ctx);
                if let Some(e) = else_block {
                    self.alloc_block(e, ctx);
                }
            }
            StmtKind::While { cond, body } => {
                self.alloc_cond(&cond.to_nnf(), CpKind::LoopCond, ctx);
                ctx.breakables.push(Breakable::Loop);
                self.alloc_block(body, ctx);
                ctx.breakables.pop();
            }
            StmtKind::For { init, cond, step, body } => {
                if let Some(i) = init {
                    self.alloc_stmt(i, ctx);
                }
                self.alloc_cond(&cond.to_nnf(), CpKind::LoopCond, ctx);
                if let Some(st) = step {
                    self.alloc_stmt(st, ctx);
                }
                ctx.breakables.push(Breakable::Loop);
                self.alloc_block(body, ctx);
                ctx.breakables.pop();
            }
            StmtKind::Switch { scrutinee, cases, default, head_span } => {
                self.alloc_calls(scrutinee, ctx);
                let text = format!("switch ({})", pretty_expr(scrutinee));
                self.alloc(VertexKind::ControlPoint(CpKind::SwitchHead), head_span, &ctx.name, Some(s.id), text);
                ctx.breakables.push(Breakable::Switch);
                for c in cases {
                    self.alloc_block(&c.body, ctx);
                }
                if let Some(d) = default {
                    self.alloc_block(d, ctx);
                }
                ctx.breakables.pop();
            }
        }
    }

    fn alloc_cond(&mut self, cond: &NnfCond, kind: CpKind, ctx: &AllocCtx) {
        for leaf in cond.leaves() {
            self.alloc_calls(&leaf.lhs, ctx);
            self.alloc_calls(&leaf.rhs, ctx);
            let text = if leaf.negated { format!("!({})", pretty_leaf(leaf)) } else { pretty_leaf(leaf) };
            let v = self.alloc(VertexKind::ControlPoint(kind), &leaf.span, &ctx.name, Some(leaf.id), text);
            self.vertices[v.index()].flags = self.leaf_flags(leaf, ctx.function);
        }
    }

    fn is_pointer(&self, e: &Expr, f: &FunctionDef) -> bool {
        match e {
            Expr::Null => true,
            Expr::Var(name) => f.var_type(name) == ValueType::Pointer,
            Expr::Call(c) => self.program.function(&c.name).and_then(|g| g.ret) == Some(ValueType::Pointer),
            _ => false,
        }
    }

    /// Pointer and value-check applicability of a leaf, in canonical form.
    fn leaf_flags(&self, leaf: &ConditionLeaf, f: &FunctionDef) -> HeuristicFlags {
        let mut flags = HeuristicFlags::default();
        let (lp, rp) = (self.is_pointer(&leaf.lhs, f), self.is_pointer(&leaf.rhs, f));
        let (lz, rz) = (leaf.lhs.is_zero_literal(), leaf.rhs.is_zero_literal());
        let mut flip = false;
        if matches!(leaf.op, CmpOp::Eq | CmpOp::Ne) && ((lp && (rp || rz)) || (rp && lz)) {
            flags.compares_pointer = true;
            flip = leaf.op == CmpOp::Ne;
        } else if !lp && !rp && (lz || rz) {
            let (other, op) = if rz { (&leaf.lhs, leaf.op) } else { (&leaf.rhs, leaf.op.mirrored()) };
            if !matches!(other, Expr::Int(_)) {
                match op {
                    CmpOp::Lt | CmpOp::Le => flags.compares_int_nonpositive = true,
                    CmpOp::Gt | CmpOp::Ge => {
                        flags.compares_int_nonpositive = true;
                        flip = true;
                    }
                    _ => {}
                }
            }
        }
        flags.inverted = flip ^ leaf.negated;
        flags
    }
}

struct AllocCtx<'f> {
    function: &'f FunctionDef,
    name: Arc<str>,
    breakables: Vec<Breakable>,
}

/// Per-function CFG over local node indices (`vertex - base`), plus a
/// synthetic exit node.
struct Lower<'b, 'p> {
    builder: &'b Builder<'p>,
    base: u32,
    exit: usize,
    succs: Vec<Vec<(usize, Option<EdgeLabel>)>>,
    true_enters_body: Vec<VertexId>,
}

impl<'b, 'p> Lower<'b, 'p> {
    fn new(builder: &'b Builder<'p>, base: u32, end: u32) -> Self {
        let n = (end - base) as usize;
        Lower { builder, base, exit: n, succs: vec![Vec::new(); n + 1], true_enters_body: Vec::new() }
    }

    fn local(&self, node: NodeId) -> usize {
        self.builder.vertex(node) - self.base as usize
    }

    fn edge(&mut self, from: usize, to: usize, label: Option<EdgeLabel>) {
        self.succs[from].push((to, label));
    }

    /// Chains `nodes` with unconditional edges ending in `next`.
    fn chain(&mut self, nodes: &[usize], next: usize) -> usize {
        for w in nodes.windows(2) {
            self.edge(w[0], w[1], Some(EdgeLabel::Always));
        }
        match nodes.last() {
            Some(&last) => {
                self.edge(last, next, Some(EdgeLabel::Always));
                nodes[0]
            }
            None => next,
        }
    }

    fn call_nodes(&self, e: &Expr) -> Vec<usize> {
        e.calls().iter().map(|c| self.local(c.id)).collect()
    }

    fn block(&mut self, stmts: &[Stmt], next: usize, brk: Option<usize>) -> usize {
        let mut cont = next;
        for s in stmts.iter().rev() {
            cont = self.stmt(s, cont, brk);
        }
        cont
    }

    fn stmt(&mut self, s: &Stmt, next: usize, brk: Option<usize>) -> usize {
        match &s.kind {
            StmtKind::Assign { value: e, .. } | StmtKind::Expr(e) => {
                let mut nodes = self.call_nodes(e);
                nodes.push(self.local(s.id));
                self.chain(&nodes, next)
            }
            StmtKind::Call(c) => {
                let mut nodes: Vec<usize> = c.args.iter().flat_map(|a| self.call_nodes(a)).collect();
                nodes.push(self.local(c.id));
                self.chain(&nodes, next)
            }
            StmtKind::Return(e) => {
                let mut nodes = e.as_ref().map(|e| self.call_nodes(e)).unwrap_or_default();
                nodes.push(self.local(s.id));
                let exit = self.exit;
                self.chain(&nodes, exit)
            }
            StmtKind::Break => {
                let node = self.local(s.id);
                self.chain(&[node], brk.expect("parser rejects break outside loop/switch"))
            }
            StmtKind::If { cond, then_block, else_block } => {
                let t = self.block(then_block, next, brk);
                let f = match else_block {
                    Some(e) => self.block(e, next, brk),
                    None => next,
                };
                self.cond(&cond.to_nnf(), t, f, None)
            }
            StmtKind::While { cond, body } => {
                let nnf = cond.to_nnf();
                let head = self.cond_entry(&nnf);
                let body_entry = self.block(body, head, Some(next));
                self.cond(&nnf, body_entry, next, Some(body_entry))
            }
            StmtKind::For { init, cond, step, body } => {
                let nnf = cond.to_nnf();
                let head = self.cond_entry(&nnf);
                let step_entry = match step {
                    Some(st) => self.stmt(st, head, brk),
                    None => head,
                };
                let body_entry = self.block(body, step_entry, Some(next));
                self.cond(&nnf, body_entry, next, Some(body_entry));
                match init {
                    Some(i) => self.stmt(i, head, brk),
                    None => head,
                }
            }
            StmtKind::Switch { scrutinee, cases, default, .. } => {
                let arity = cases.len() as u32 + 1;
                let mut targets = vec![0usize; arity as usize];
                let mut cont = match default {
                    Some(d) => self.block(d, next, Some(next)),
                    None => next,
                };
                targets[cases.len()] = cont;
                for (i, c) in cases.iter().enumerate().rev() {
                    cont = self.block(&c.body, cont, Some(next));
                    targets[i] = cont;
                }
                let head = self.local(s.id);
                for (index, t) in targets.into_iter().enumerate() {
                    self.edge(head, t, Some(EdgeLabel::Case { index: index as u32, arity }));
                }
                let mut nodes = self.call_nodes(scrutinee);
                nodes.push(head);
                // The head's own edges are already in place.
                let first = nodes[0];
                for w in nodes.windows(2) {
                    self.edge(w[0], w[1], Some(EdgeLabel::Always));
                }
                first
            }
        }
    }

    fn leaf_entry(&self, leaf: &ConditionLeaf) -> usize {
        leaf.calls().first().map(|c| self.local(c.id)).unwrap_or_else(|| self.local(leaf.id))
    }

    fn cond_entry(&self, cond: &NnfCond) -> usize {
        self.leaf_entry(cond.first_leaf())
    }

    /// Short-circuit lowering: control reaches `t` when the condition holds
    /// and `f` otherwise. Returns the first node evaluated.
    fn cond(&mut self, cond: &NnfCond, t: usize, f: usize, body: Option<usize>) -> usize {
        match cond {
            NnfCond::Leaf(leaf) => {
                let node = self.local(leaf.id);
                self.edge(node, t, Some(EdgeLabel::True));
                self.edge(node, f, Some(EdgeLabel::False));
                if body == Some(t) {
                    self.true_enters_body.push(VertexId(self.base + node as u32));
                }
                let calls: Vec<usize> = leaf.calls().iter().map(|c| self.local(c.id)).collect();
                for w in calls.windows(2) {
                    self.edge(w[0], w[1], Some(EdgeLabel::Always));
                }
                if let Some(&last) = calls.last() {
                    self.edge(last, node, Some(EdgeLabel::Always));
                }
                self.leaf_entry(leaf)
            }
            NnfCond::And(a, b) => {
                let eb = self.cond(b, t, f, body);
                self.cond(a, eb, f, body)
            }
            NnfCond::Or(a, b) => {
                let eb = self.cond(b, t, f, body);
                self.cond(a, t, eb, body)
            }
        }
    }

    /// Control dependences from postdominator frontiers. Only nodes
    /// reachable from the entry contribute; dead code gets no incoming edge.
    fn control_dependences(&self) -> Vec<CdEdge> {
        let n = self.succs.len();
        let mut reachable = vec![false; n];
        let mut stack = vec![0usize];
        reachable[0] = true;
        while let Some(a) = stack.pop() {
            for &(b, _) in &self.succs[a] {
                if !reachable[b] {
                    reachable[b] = true;
                    stack.push(b);
                }
            }
        }
        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for a in (0..n).filter(|&a| reachable[a]) {
            for &(b, _) in &self.succs[a] {
                reverse[b].push(a);
            }
        }
        let ipdom = immediate_dominators(self.exit, &reverse);

        let mut out = Vec::new();
        for a in (0..n).filter(|&a| reachable[a]) {
            let Some(stop) = ipdom[a] else { continue };
            for &(b, label) in &self.succs[a] {
                let Some(label) = label else { continue };
                let mut runner = Some(b);
                while let Some(r) = runner {
                    if r == stop || r == self.exit {
                        break;
                    }
                    out.push(CdEdge {
                        from: VertexId(self.base + a as u32),
                        to: VertexId(self.base + r as u32),
                        label,
                    });
                    runner = ipdom[r];
                }
            }
        }
        out
    }
}
