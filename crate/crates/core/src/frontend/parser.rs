use std::collections::HashSet;
use std::sync::Arc;

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

/// Parses MicroC source into a [`Program`] whose entry function is `main`.
pub fn parse_program(source: &str, file: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(source, file)?;
    let mut p = Parser { toks: tokens, pos: 0, file: Arc::from(file), next_id: 0, breakable: 0 };
    let mut functions = Vec::new();
    while p.peek() != &Tok::Eof {
        functions.push(p.function()?);
    }
    let program = Program { file: p.file.clone(), functions, entry_name: "main".to_string() };
    validate(&program)?;
    Ok(program)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    file: Arc<str>,
    next_id: u32,
    /// Number of enclosing loops and switches.
    breakable: u32,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fresh_id(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    fn error_here(&self, message: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError { file: self.file.to_string(), line: t.line, col: t.col, message: message.into() }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            let want = match &tok {
                Tok::Ident(_) => "identifier".to_string(),
                t => t.describe(),
            };
            Err(self.error_here(format!("expected {want}, found {}", self.peek().describe())))
        }
    }

    fn ident(&mut self) -> PResult<String> {
        if let Tok::Ident(name) = self.peek().clone() {
            self.bump();
            Ok(name)
        } else {
            Err(self.error_here(format!("expected identifier, found {}", self.peek().describe())))
        }
    }

    /// Span from token `start` through the last consumed token.
    fn span_from(&self, start: usize) -> SourceSpan {
        let a = &self.toks[start];
        let b = &self.toks[self.pos.saturating_sub(1).max(start)];
        SourceSpan {
            file: self.file.clone(),
            line_start: a.line,
            col_start: a.col,
            line_end: b.end_line,
            col_end: b.end_col,
        }
    }

    fn function(&mut self) -> PResult<FunctionDef> {
        let start = self.pos;
        let ret = match self.peek() {
            Tok::KwInt => {
                self.bump();
                Some(self.pointer_suffix())
            }
            Tok::KwVoid => {
                self.bump();
                None
            }
            other => return Err(self.error_here(format!("expected function definition, found {}", other.describe()))),
        };
        let name = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() == Tok::KwVoid && *self.peek_at(1) == Tok::RParen {
            self.bump();
        }
        while *self.peek() != Tok::RParen {
            if !params.is_empty() {
                self.expect(Tok::Comma)?;
            }
            self.expect(Tok::KwInt)?;
            let ty = self.pointer_suffix();
            let pname = self.ident()?;
            if params.iter().any(|p: &Param| p.name == pname) {
                return Err(self.error_here(format!("duplicate parameter '{pname}'")));
            }
            params.push(Param { name: pname, ty });
        }
        self.expect(Tok::RParen)?;
        let body = self.block()?;
        Ok(FunctionDef { name, ret, params, body, span: self.span_from(start) })
    }

    fn pointer_suffix(&mut self) -> ValueType {
        if *self.peek() == Tok::Star {
            self.bump();
            ValueType::Pointer
        } else {
            ValueType::Int
        }
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return Err(self.error_here("unexpected end of file, expected '}'"));
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(stmts)
    }

    /// A braced block or a single statement.
    fn body(&mut self) -> PResult<Block> {
        if *self.peek() == Tok::LBrace {
            self.block()
        } else {
            Ok(vec![self.stmt()?])
        }
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.pos;
        let id = self.fresh_id();
        let kind = match self.peek() {
            Tok::KwIf => self.if_stmt()?,
            Tok::KwWhile => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.cond()?;
                self.expect(Tok::RParen)?;
                self.breakable += 1;
                let body = self.body();
                self.breakable -= 1;
                StmtKind::While { cond, body: body? }
            }
            Tok::KwFor => self.for_stmt()?,
            Tok::KwSwitch => self.switch_stmt(start)?,
            Tok::KwBreak => {
                if self.breakable == 0 {
                    return Err(self.error_here("break outside loop/switch"));
                }
                self.bump();
                self.expect(Tok::Semi)?;
                StmtKind::Break
            }
            Tok::KwReturn => {
                self.bump();
                let value = if *self.peek() == Tok::Semi { None } else { Some(self.expr()?) };
                self.expect(Tok::Semi)?;
                StmtKind::Return(value)
            }
            Tok::LBrace => return Err(self.error_here("nested blocks are not supported")),
            _ => {
                let kind = self.simple_stmt()?;
                self.expect(Tok::Semi)?;
                kind
            }
        };
        Ok(Stmt { id, span: self.span_from(start), kind })
    }

    /// Declaration, assignment, call or expression without the trailing `;`.
    fn simple_stmt(&mut self) -> PResult<StmtKind> {
        if *self.peek() == Tok::KwInt {
            self.bump();
            let ty = self.pointer_suffix();
            let target = self.ident()?;
            let value = if *self.peek() == Tok::Assign {
                self.bump();
                self.expr()?
            } else {
                Expr::Int(0)
            };
            return Ok(StmtKind::Assign { target, decl: Some(ty), value });
        }
        if let (Tok::Ident(name), Tok::Assign) = (self.peek().clone(), self.peek_at(1)) {
            self.bump();
            self.bump();
            let value = self.expr()?;
            return Ok(StmtKind::Assign { target: name, decl: None, value });
        }
        match self.expr()? {
            Expr::Call(call) => Ok(StmtKind::Call(call)),
            e => Ok(StmtKind::Expr(e)),
        }
    }

    fn simple_stmt_node(&mut self) -> PResult<Box<Stmt>> {
        let start = self.pos;
        let id = self.fresh_id();
        let kind = self.simple_stmt()?;
        Ok(Box::new(Stmt { id, span: self.span_from(start), kind }))
    }

    fn if_stmt(&mut self) -> PResult<StmtKind> {
        self.bump();
        self.expect(Tok::LParen)?;
        let cond = self.cond()?;
        self.expect(Tok::RParen)?;
        let then_block = self.body()?;
        let else_block = if *self.peek() == Tok::KwElse {
            self.bump();
            Some(self.body()?)
        } else {
            None
        };
        Ok(StmtKind::If { cond, then_block, else_block })
    }

    fn for_stmt(&mut self) -> PResult<StmtKind> {
        self.bump();
        self.expect(Tok::LParen)?;
        let init = if *self.peek() == Tok::Semi { None } else { Some(self.simple_stmt_node()?) };
        self.expect(Tok::Semi)?;
        let cond = self.cond()?;
        self.expect(Tok::Semi)?;
        let step = if *self.peek() == Tok::RParen { None } else { Some(self.simple_stmt_node()?) };
        self.expect(Tok::RParen)?;
        self.breakable += 1;
        let body = self.body();
        self.breakable -= 1;
        Ok(StmtKind::For { init, cond, step, body: body? })
    }

    fn switch_stmt(&mut self, start: usize) -> PResult<StmtKind> {
        self.bump();
        self.expect(Tok::LParen)?;
        let scrutinee = self.expr()?;
        self.expect(Tok::RParen)?;
        let head_span = self.span_from(start);
        self.expect(Tok::LBrace)?;
        self.breakable += 1;
        let result = self.switch_arms();
        self.breakable -= 1;
        let (cases, default) = result?;
        self.expect(Tok::RBrace)?;
        Ok(StmtKind::Switch { scrutinee, cases, default, head_span })
    }

    fn switch_arms(&mut self) -> PResult<(Vec<SwitchCase>, Option<Block>)> {
        let mut cases: Vec<SwitchCase> = Vec::new();
        let mut default = None;
        let mut seen = HashSet::new();
        loop {
            match self.peek() {
                Tok::KwCase => {
                    if default.is_some() {
                        return Err(self.error_here("'default' must be the last arm of a switch"));
                    }
                    self.bump();
                    let label = self.case_label()?;
                    if !seen.insert(label) {
                        return Err(self.error_here(format!("duplicate case label {label}")));
                    }
                    self.expect(Tok::Colon)?;
                    let body = self.arm_body()?;
                    cases.push(SwitchCase { label, body });
                }
                Tok::KwDefault => {
                    if default.is_some() {
                        return Err(self.error_here("duplicate default arm"));
                    }
                    self.bump();
                    self.expect(Tok::Colon)?;
                    default = Some(self.arm_body()?);
                }
                Tok::RBrace => return Ok((cases, default)),
                other => {
                    return Err(
                        self.error_here(format!("expected 'case', 'default' or '}}', found {}", other.describe()))
                    )
                }
            }
        }
    }

    fn case_label(&mut self) -> PResult<i64> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(if negative { -v } else { v })
            }
            _ => Err(self.error_here("expected integer case label")),
        }
    }

    fn arm_body(&mut self) -> PResult<Block> {
        let mut stmts = Vec::new();
        while !matches!(self.peek(), Tok::KwCase | Tok::KwDefault | Tok::RBrace | Tok::Eof) {
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    // Conditions ----------------------------------------------------------

    fn cond(&mut self) -> PResult<CondExpr> {
        let mut lhs = self.cond_and()?;
        while *self.peek() == Tok::OrOr {
            self.bump();
            let rhs = self.cond_and()?;
            lhs = CondExpr::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_and(&mut self) -> PResult<CondExpr> {
        let mut lhs = self.cond_unary()?;
        while *self.peek() == Tok::AndAnd {
            self.bump();
            let rhs = self.cond_unary()?;
            lhs = CondExpr::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_unary(&mut self) -> PResult<CondExpr> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(CondExpr::Not(Box::new(self.cond_unary()?)))
            }
            Tok::LParen => {
                // `(` opens either a nested condition or an arithmetic operand
                // such as `(a + b) > 3`; try the former and back off.
                let (saved_pos, saved_id) = (self.pos, self.next_id);
                self.bump();
                if let Ok(inner) = self.cond() {
                    if *self.peek() == Tok::RParen && !continues_operand(self.peek_at(1)) {
                        self.bump();
                        return Ok(inner);
                    }
                }
                self.pos = saved_pos;
                self.next_id = saved_id;
                self.comparison()
            }
            _ => self.comparison(),
        }
    }

    fn comparison(&mut self) -> PResult<CondExpr> {
        let start = self.pos;
        let id = self.fresh_id();
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Lt => Some(CmpOp::Lt),
            Tok::Le => Some(CmpOp::Le),
            Tok::Gt => Some(CmpOp::Gt),
            Tok::Ge => Some(CmpOp::Ge),
            Tok::EqEq => Some(CmpOp::Eq),
            Tok::Ne => Some(CmpOp::Ne),
            _ => None,
        };
        let (op, rhs) = match op {
            Some(op) => {
                self.bump();
                (op, self.expr()?)
            }
            None => (CmpOp::Ne, Expr::Int(0)),
        };
        Ok(CondExpr::Leaf(ConditionLeaf { id, span: self.span_from(start), lhs, op, rhs, negated: false }))
    }

    // Expressions ---------------------------------------------------------

    fn expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                Tok::Percent => BinOp::Rem,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            if let Tok::Int(v) = *self.peek() {
                self.bump();
                return Ok(Expr::Int(-v));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.pos;
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                Ok(Expr::Int(v))
            }
            Tok::KwNull => {
                self.bump();
                Ok(Expr::Null)
            }
            Tok::KwInput => {
                self.bump();
                self.expect(Tok::LParen)?;
                self.expect(Tok::RParen)?;
                Ok(Expr::Input)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() != Tok::LParen {
                    return Ok(Expr::Var(name));
                }
                self.bump();
                let id = self.fresh_id();
                let mut args = Vec::new();
                while *self.peek() != Tok::RParen {
                    if !args.is_empty() {
                        self.expect(Tok::Comma)?;
                    }
                    args.push(self.expr()?);
                }
                self.bump();
                Ok(Expr::Call(CallExpr { id, name, args, span: self.span_from(start) }))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => Err(self.error_here(format!("expected expression, found {}", other.describe()))),
        }
    }
}

fn continues_operand(t: &Tok) -> bool {
    matches!(
        t,
        Tok::Plus
            | Tok::Minus
            | Tok::Star
            | Tok::Slash
            | Tok::Percent
            | Tok::Lt
            | Tok::Le
            | Tok::Gt
            | Tok::Ge
            | Tok::EqEq
            | Tok::Ne
    )
}

fn validate(program: &Program) -> Result<(), ParseError> {
    let mut names = HashSet::new();
    for f in &program.functions {
        if !names.insert(f.name.as_str()) {
            return Err(ParseError::at(&f.span, format!("duplicate function '{}'", f.name)));
        }
    }
    for f in &program.functions {
        let mut err = None;
        for_each_call(&f.body, &mut |call| {
            if err.is_some() {
                return;
            }
            if let Some(callee) = program.function(&call.name) {
                if callee.params.len() != call.args.len() {
                    err = Some(ParseError::at(
                        &call.span,
                        format!("'{}' expects {} argument(s), got {}", call.name, callee.params.len(), call.args.len()),
                    ));
                }
            }
        });
        if let Some(e) = err {
            return Err(e);
        }
    }
    Ok(())
}

fn for_each_call(block: &[Stmt], f: &mut dyn FnMut(&CallExpr)) {
    visit_stmts(block, &mut |s| {
        let mut exprs: Vec<&Expr> = Vec::new();
        match &s.kind {
            StmtKind::Assign { value, .. } => exprs.push(value),
            StmtKind::Return(Some(e)) | StmtKind::Expr(e) => exprs.push(e),
            StmtKind::Switch { scrutinee, .. } => exprs.push(scrutinee),
            StmtKind::Call(c) => {
                for a in &c.args {
                    exprs.push(a);
                }
                f(c);
            }
            kind => {
                if let Some(cond) = kind.condition() {
                    for leaf in decompose_condition(cond) {
                        for c in leaf.calls() {
                            f(c);
                        }
                    }
                }
            }
        }
        for e in exprs {
            for c in e.calls() {
                f(c);
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Program {
        parse_program(src, "t.mc").unwrap()
    }

    #[test]
    fn minimal_program() {
        let p = parse("int main(){ return 0; }");
        assert_eq!(p.functions.len(), 1);
        let body = &p.functions[0].body;
        assert_eq!(body.len(), 1);
        assert!(matches!(body[0].kind, StmtKind::Return(Some(Expr::Int(0)))));
    }

    #[test]
    fn short_circuit_condition_has_two_leaves() {
        let p = parse("int main(){ if (x > 1 || y < 3) { z = 1; } }");
        let StmtKind::If { cond, .. } = &p.functions[0].body[0].kind else { panic!() };
        assert_eq!(cond.leaf_count(), 2);
        let leaves = decompose_condition(cond);
        assert_eq!(leaves[0].op, CmpOp::Gt);
        assert_eq!(leaves[1].op, CmpOp::Lt);
    }

    #[test]
    fn break_outside_loop_is_rejected() {
        let err = parse_program("int main(){ break; }", "t.mc").unwrap_err();
        assert_eq!(err.message, "break outside loop/switch");
        assert_eq!((err.line, err.col), (1, 13));
    }

    #[test]
    fn break_inside_switch_and_loop_is_fine() {
        parse("int main(){ while (1) { break; } switch (x) { case 1: break; } }");
    }

    #[test]
    fn duplicate_function_is_rejected() {
        let err = parse_program("void f(){ }\nvoid f(){ }", "t.mc").unwrap_err();
        assert!(err.message.contains("duplicate function 'f'"));
        assert_eq!(err.line, 2);
    }

    #[test]
    fn duplicate_case_label_is_rejected() {
        let err = parse_program("int main(){ switch (x) { case 1: y = 1; case 1: y = 2; } }", "t.mc").unwrap_err();
        assert!(err.message.contains("duplicate case label 1"));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_program("int main() {\n  x = ;\n}", "bad.mc").unwrap_err();
        assert_eq!((err.line, err.col), (2, 7));
        assert_eq!(err.to_string(), "bad.mc:2:7: expected expression, found ';'");
    }

    #[test]
    fn parenthesised_operand_is_not_a_condition() {
        let p = parse("int main(){ if ((a + b) * 2 > 3 && (c)) { } }");
        let StmtKind::If { cond, .. } = &p.functions[0].body[0].kind else { panic!() };
        let leaves = decompose_condition(cond);
        assert_eq!(leaves.len(), 2);
        assert_eq!(leaves[0].op, CmpOp::Gt);
        assert!(matches!(leaves[0].lhs, Expr::Binary(BinOp::Mul, _, _)));
        assert_eq!(leaves[1].op, CmpOp::Ne);
    }

    #[test]
    fn truthiness_is_canonicalised() {
        let p = parse("int main(){ if (x) { } }");
        let StmtKind::If { cond, .. } = &p.functions[0].body[0].kind else { panic!() };
        let leaf = &decompose_condition(cond)[0];
        assert_eq!(leaf.op, CmpOp::Ne);
        assert!(leaf.rhs.is_zero_literal());
    }

    #[test]
    fn arity_mismatch_is_rejected() {
        let err = parse_program("void f(int a){ }\nint main(){ f(1, 2); }", "t.mc").unwrap_err();
        assert!(err.message.contains("expects 1 argument(s), got 2"));
    }

    #[test]
    fn spans_cover_statements() {
        let p = parse("int main() {\n  x = 1;\n  if (x > 0) {\n    y = 2;\n  }\n}");
        let f = &p.functions[0];
        assert_eq!((f.span.line_start, f.span.line_end), (1, 6));
        let s = &f.body[1];
        assert_eq!((s.span.line_start, s.span.line_end), (3, 5));
        let StmtKind::If { cond, .. } = &s.kind else { panic!() };
        let leaf = &decompose_condition(cond)[0];
        assert_eq!((leaf.span.line_start, leaf.span.col_start, leaf.span.col_end), (3, 7, 11));
        assert_eq!(&*leaf.span.file, "t.mc");
    }

    #[test]
    fn node_ids_are_unique() {
        let p =
            parse("int f(int a) { return a; }\nint main() { for (i = 0; i < 3 && f(i) > 0; i = i + 1) { x = f(2); } }");
        let mut ids = Vec::new();
        for f in &p.functions {
            visit_stmts(&f.body, &mut |s| {
                ids.push(s.id);
                if let Some(c) = s.kind.condition() {
                    for l in decompose_condition(c) {
                        ids.push(l.id);
                        ids.extend(l.calls().iter().map(|c| c.id));
                    }
                }
                if let StmtKind::Assign { value, .. } = &s.kind {
                    ids.extend(value.calls().iter().map(|c| c.id));
                }
            });
        }
        let n = ids.len();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), n);
    }
}
