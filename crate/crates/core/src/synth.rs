//! Seeded generator of random MicroC programs, used for property tests and
//! scale runs.

use std::collections::HashSet;
use std::fmt::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CallPolicy {
    None,
    /// Every function other than `main` is called from at most one site.
    SingleSite,
    Many,
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub functions: usize,
    /// Statements generated per function body, before nesting.
    pub statements: usize,
    pub max_depth: usize,
    pub loops: bool,
    pub switches: bool,
    pub calls: CallPolicy,
    /// Stop emitting conditions once this many leaves exist.
    pub max_control_points: Option<usize>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            functions: 3,
            statements: 6,
            max_depth: 3,
            loops: false,
            switches: true,
            calls: CallPolicy::SingleSite,
            max_control_points: Some(12),
        }
    }
}

struct Gen<'c> {
    cfg: &'c SynthConfig,
    rng: ChaCha8Rng,
    out: String,
    control_points: usize,
    called: HashSet<usize>,
    loop_counter: usize,
}

/// Generates a program whose entry function is `main`. Functions only call
/// functions defined after them, so there is no recursion.
pub fn generate(cfg: &SynthConfig, seed: u64) -> String {
    let mut g = Gen {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(seed),
        out: String::new(),
        control_points: 0,
        called: HashSet::new(),
        loop_counter: 0,
    };
    for f in 0..cfg.functions.max(1) {
        g.function(f);
    }
    g.out
}

impl Gen<'_> {
    fn line(&mut self, depth: usize, text: &str) {
        let _ = writeln!(self.out, "{}{text}", "    ".repeat(depth));
    }

    fn function(&mut self, f: usize) {
        if f == 0 {
            self.line(0, "int main() {");
        } else {
            self.line(0, &format!("int f{f}(int a) {{"));
        }
        self.line(1, "int b = input();");
        self.line(1, "int *p = NULL;");
        for _ in 0..self.cfg.statements {
            self.stmt(f, 1, false);
        }
        self.line(1, "return b;");
        self.line(0, "}");
        self.out.push('\n');
    }

    fn can_branch(&self) -> bool {
        self.cfg.max_control_points.is_none_or(|m| self.control_points + 3 <= m)
    }

    fn callee(&mut self, f: usize) -> Option<usize> {
        let n = self.cfg.functions;
        if self.cfg.calls == CallPolicy::None || f + 1 >= n {
            return None;
        }
        let candidates: Vec<usize> =
            (f + 1..n).filter(|c| self.cfg.calls == CallPolicy::Many || !self.called.contains(c)).collect();
        if candidates.is_empty() {
            return None;
        }
        let c = candidates[self.rng.gen_range(0..candidates.len())];
        self.called.insert(c);
        Some(c)
    }

    fn stmt(&mut self, f: usize, depth: usize, in_loop: bool) {
        let nested = depth < self.cfg.max_depth && self.can_branch();
        let roll = self.rng.gen_range(0..100);
        match roll {
            0..=24 if nested => {
                let c = self.cond();
                self.line(depth, &format!("if ({c}) {{"));
                self.block(f, depth + 1, in_loop);
                if self.rng.gen_bool(0.4) {
                    self.line(depth, "} else {");
                    self.block(f, depth + 1, in_loop);
                }
                self.line(depth, "}");
            }
            25..=34 if nested && self.cfg.loops => {
                self.loop_counter += 1;
                let i = format!("i{}", self.loop_counter);
                let bound = self.rng.gen_range(1..4);
                self.control_points += 1;
                if self.rng.gen_bool(0.5) {
                    self.line(depth, &format!("for ({i} = 0; {i} < {bound}; {i} = {i} + 1) {{"));
                    self.block(f, depth + 1, true);
                } else {
                    self.line(depth, &format!("{i} = 0;"));
                    self.line(depth, &format!("while ({i} < {bound}) {{"));
                    self.line(depth + 1, &format!("{i} = {i} + 1;"));
                    self.block(f, depth + 1, true);
                }
                self.line(depth, "}");
            }
            35..=42 if nested && self.cfg.switches => {
                self.control_points += 1;
                self.line(depth, "switch (input() % 3) {");
                let cases = self.rng.gen_range(1..4);
                for k in 0..cases {
                    self.line(depth, &format!("case {k}:"));
                    self.block(f, depth + 1, false);
                    if self.rng.gen_bool(0.7) {
                        self.line(depth + 1, "break;");
                    }
                }
                if self.rng.gen_bool(0.5) {
                    self.line(depth, "default:");
                    self.block(f, depth + 1, false);
                }
                self.line(depth, "}");
            }
            43..=50 if self.can_branch() && depth < self.cfg.max_depth + 1 => {
                let c = self.cond();
                let exit = if in_loop && self.rng.gen_bool(0.5) { "break;" } else { "return b;" };
                self.line(depth, &format!("if ({c}) {{"));
                self.line(depth + 1, "b = b - 1;");
                self.line(depth + 1, exit);
                self.line(depth, "}");
            }
            51..=64 => match self.callee(f) {
                Some(c) => {
                    if self.rng.gen_bool(0.5) {
                        self.line(depth, &format!("b = f{c}(b + 1);"));
                    } else {
                        self.line(depth, &format!("f{c}(b);"));
                    }
                }
                None => self.line(depth, "b = b + 1;"),
            },
            65..=74 => self.line(depth, "b = input();"),
            75..=79 => self.line(depth, "p = input();"),
            _ => {
                let k = self.rng.gen_range(1..5);
                self.line(depth, &format!("b = b * {k} + 1;"));
            }
        }
    }

    fn block(&mut self, f: usize, depth: usize, in_loop: bool) {
        let n = self.rng.gen_range(1..3);
        for _ in 0..n {
            self.stmt(f, depth, in_loop);
        }
    }

    fn leaf(&mut self) -> String {
        self.control_points += 1;
        match self.rng.gen_range(0..7) {
            0 => "b < 0".into(),
            1 => "p == NULL".into(),
            2 => "p != NULL".into(),
            3 => format!("input() > {}", self.rng.gen_range(0..5)),
            4 => "b".into(),
            5 => "b >= 0".into(),
            _ => format!("b % 2 == {}", self.rng.gen_range(0..2)),
        }
    }

    fn cond(&mut self) -> String {
        let leaves = if self.can_branch() { self.rng.gen_range(1..4) } else { 1 };
        let mut c = self.leaf();
        for _ in 1..leaves {
            let rhs = self.leaf();
            let op = if self.rng.gen_bool(0.5) { "&&" } else { "||" };
            c = format!("({c}) {op} {rhs}");
        }
        if self.rng.gen_bool(0.15) {
            c = format!("!({c})");
        }
        c
    }
}
