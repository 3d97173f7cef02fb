use std::fmt::Write;

use serde_json::{json, Value};

use super::{Sdg, VertexKind};

impl Sdg {
    pub fn to_json(&self) -> Value {
        let vertices: Vec<Value> = self
            .vertices
            .iter()
            .map(|v| {
                let mut o = json!({
                    "id": v.id.0,
                    "kind": v.kind.name(),
                    "function": &*v.function,
                    "file": &*v.span.file,
                    "line_start": v.span.line_start,
                    "col_start": v.span.col_start,
                    "line_end": v.span.line_end,
                    "col_end": v.span.col_end,
                    "text": v.text,
                });
                match &v.kind {
                    VertexKind::ControlPoint(k) => {
                        o["cp_kind"] = json!(k);
                        o["flags"] = json!(v.flags);
                    }
                    VertexKind::CallSite { callee } => o["callee"] = json!(callee),
                    _ => {}
                }
                o
            })
            .collect();
        let cd: Vec<Value> = self
            .cd_edges
            .iter()
            .map(|e| json!({"from": e.from.0, "to": e.to.0, "label": e.label.to_string()}))
            .collect();
        let calls: Vec<Value> = self.call_edges.iter().map(|e| json!({"from": e.from.0, "to": e.to.0})).collect();
        json!({
            "file": &*self.file,
            "entry": self.entry.map(|v| v.0),
            "vertices": vertices,
            "cd_edges": cd,
            "call_edges": calls,
        })
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph sdg {\n  node [fontname=\"monospace\"];\n");
        for f in &self.functions {
            let _ = writeln!(out, "  subgraph \"cluster_{}\" {{\n    label=\"{}\";", f.name, f.name);
            for v in &self.vertices[f.entry.index()..f.end as usize] {
                let shape = match v.kind {
                    VertexKind::Entry => "box",
                    VertexKind::ControlPoint(_) => "diamond",
                    VertexKind::Statement => "ellipse",
                    VertexKind::CallSite { .. } => "cds",
                };
                let label = format!("{}: {} (line {})", v.id, v.text, v.span.line_start);
                let _ = writeln!(out, "    {} [shape={shape}, label=\"{}\"];", v.id.0, escape(&label));
            }
            out.push_str("  }\n");
        }
        for e in &self.cd_edges {
            let _ = writeln!(out, "  {} -> {} [label=\"{}\"];", e.from.0, e.to.0, e.label);
        }
        for e in &self.call_edges {
            let _ = writeln!(out, "  {} -> {} [style=dashed];", e.from.0, e.to.0);
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
