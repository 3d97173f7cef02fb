//! Canonical source rendering. Re-parsing the output yields the same tree.

use std::fmt::Write;

use super::ast::*;

pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for (i, f) in program.functions.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let ret = match f.ret {
            None => "void",
            Some(ValueType::Int) => "int",
            Some(ValueType::Pointer) => "int *",
        };
        let params: Vec<String> = f.params.iter().map(|p| format!("{}{}", type_prefix(p.ty), p.name)).collect();
        let _ = writeln!(out, "{ret}{}{}({}) {{", if ret.ends_with('*') { "" } else { " " }, f.name, params.join(", "));
        block(&mut out, &f.body, 1);
        out.push_str("}\n");
    }
    out
}

fn type_prefix(ty: ValueType) -> &'static str {
    match ty {
        ValueType::Int => "int ",
        ValueType::Pointer => "int *",
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("    ");
    }
}

fn block(out: &mut String, stmts: &[Stmt], depth: usize) {
    for s in stmts {
        stmt(out, s, depth);
    }
}

fn stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::If { cond: c, then_block, else_block } => {
            let _ = writeln!(out, "if ({}) {{", cond(c));
            block(out, then_block, depth + 1);
            indent(out, depth);
            match else_block {
                Some(e) => {
                    out.push_str("} else {\n");
                    block(out, e, depth + 1);
                    indent(out, depth);
                    out.push_str("}\n");
                }
                None => out.push_str("}\n"),
            }
        }
        StmtKind::While { cond: c, body } => {
            let _ = writeln!(out, "while ({}) {{", cond(c));
            block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::For { init, cond: c, step, body } => {
            let init = init.as_ref().map(|s| simple(s)).unwrap_or_default();
            let step = step.as_ref().map(|s| simple(s)).unwrap_or_default();
            let _ = writeln!(out, "for ({init}; {}; {step}) {{", cond(c));
            block(out, body, depth + 1);
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Switch { scrutinee, cases, default, .. } => {
            let _ = writeln!(out, "switch ({}) {{", expr(scrutinee));
            for case in cases {
                indent(out, depth);
                let _ = writeln!(out, "case {}:", case.label);
                block(out, &case.body, depth + 1);
            }
            if let Some(d) = default {
                indent(out, depth);
                out.push_str("default:\n");
                block(out, d, depth + 1);
            }
            indent(out, depth);
            out.push_str("}\n");
        }
        StmtKind::Break => out.push_str("break;\n"),
        StmtKind::Return(None) => out.push_str("return;\n"),
        StmtKind::Return(Some(e)) => {
            let _ = writeln!(out, "return {};", expr(e));
        }
        _ => {
            let _ = writeln!(out, "{};", simple(s));
        }
    }
}

fn simple(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Assign { target, decl: Some(ty), value } => {
            format!("{}{target} = {}", type_prefix(*ty), expr(value))
        }
        StmtKind::Assign { target, decl: None, value } => format!("{target} = {}", expr(value)),
        StmtKind::Call(c) => call(c),
        StmtKind::Expr(e) => expr(e),
        other => unreachable!("not a simple statement: {other:?}"),
    }
}

fn call(c: &CallExpr) -> String {
    let args: Vec<String> = c.args.iter().map(expr).collect();
    format!("{}({})", c.name, args.join(", "))
}

pub fn expr(e: &Expr) -> String {
    expr_prec(e, 0)
}

fn expr_prec(e: &Expr, min: u8) -> String {
    match e {
        Expr::Int(v) => v.to_string(),
        Expr::Null => "NULL".to_string(),
        Expr::Var(name) => name.clone(),
        Expr::Input => "input()".to_string(),
        Expr::Call(c) => call(c),
        Expr::Neg(inner) => match **inner {
            Expr::Int(_) | Expr::Neg(_) | Expr::Binary(..) => format!("-({})", expr(inner)),
            _ => format!("-{}", expr_prec(inner, 3)),
        },
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            let s = format!("{} {} {}", expr_prec(l, p), op.symbol(), expr_prec(r, p + 1));
            if p < min {
                format!("({s})")
            } else {
                s
            }
        }
    }
}

pub fn leaf(l: &ConditionLeaf) -> String {
    format!("{} {} {}", expr(&l.lhs), l.op.symbol(), expr(&l.rhs))
}

pub fn cond(c: &CondExpr) -> String {
    cond_prec(c, 0)
}

// Precedence: || = 0, && = 1, ! and leaves = 2.
fn cond_prec(c: &CondExpr, min: u8) -> String {
    let (s, p) = match c {
        CondExpr::Leaf(l) => (leaf(l), 2),
        CondExpr::Not(inner) => match **inner {
            CondExpr::Not(_) => (format!("!{}", cond_prec(inner, 2)), 2),
            _ => (format!("!({})", cond(inner)), 2),
        },
        CondExpr::And(a, b) => (format!("{} && {}", cond_prec(a, 1), cond_prec(b, 2)), 1),
        CondExpr::Or(a, b) => (format!("{} || {}", cond_prec(a, 0), cond_prec(b, 1)), 0),
    };
    if p < min {
        format!("({s})")
    } else {
        s
    }
}
