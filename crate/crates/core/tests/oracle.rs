mod common;

use common::{brute_force, control_point_count, load};
use elan_core::synth::{generate, CallPolicy, SynthConfig};
use elan_core::{BranchModel, Engine, VertexId};
use proptest::prelude::*;

fn engine_values(g: &elan_core::Sdg) -> Vec<f64> {
    let eng = Engine::new(g, BranchModel::simple());
    let all: Vec<VertexId> = g.vertices().iter().map(|v| v.id).collect();
    eng.batch_likelihood(&all, None).unwrap().iter().map(|r| r.likelihood).collect()
}

fn assert_exact(src: &str) {
    let (p, g) = load(src, "t.mc");
    let exact = brute_force(&p, &g);
    let got = engine_values(&g);
    for (i, (a, b)) in got.iter().zip(&exact).enumerate() {
        assert!((a - b).abs() <= 1e-9, "vertex {i} ({}): engine {a} vs oracle {b}\n{src}", g.vertices()[i].text);
    }
}

#[test]
fn oracle_reproduces_worked_examples() {
    let (p, g) = load("int main() {\n if (c) {\n  s1 = 1;\n }\n s2 = 2;\n}\n", "t.mc");
    let b = brute_force(&p, &g);
    assert_eq!(b[g.vertex_at("t.mc", 3).unwrap().index()], 0.5);
    assert_eq!(b[g.vertex_at("t.mc", 5).unwrap().index()], 1.0);

    let (p, g) = load("int main() {\n if (a || b) {\n  t = 1;\n }\n}\n", "t.mc");
    assert_eq!(brute_force(&p, &g)[g.vertex_at("t.mc", 3).unwrap().index()], 0.75);
}

#[test]
fn exact_on_structured_examples() {
    assert_exact("int main() {\n if (a) {\n  if (b) {\n   x = 1;\n  }\n }\n}\n");
    assert_exact("int main() {\n if ((a && b) || !(c || d)) {\n  x = 1;\n } else {\n  y = 1;\n }\n z = 1;\n}\n");
    assert_exact(
        "int main() {\n switch (k) {\n case 0:\n  if (a) {\n   break;\n  }\n  x = 1;\n case 1:\n  y = 1;\n  break;\n default:\n  return 0;\n }\n w = f(1);\n}\nint f(int q) {\n if (q < 0) {\n  return 1;\n }\n return 2;\n}\n",
    );
    assert_exact("int main() {\n if (a) {\n  return 0;\n }\n if (b) {\n  x = 1;\n }\n y = 1;\n}\n");
}

#[test]
fn converging_call_paths_stay_close() {
    // f is called from two independent 0.5 sites: noisy-or gives 0.75, as does the oracle.
    let src = "int main() {\n if (a) {\n  f();\n }\n if (b) {\n  f();\n }\n}\nint f() {\n x = 1;\n}\n";
    let (p, g) = load(src, "t.mc");
    let x = g.vertex_at("t.mc", 10).unwrap().index();
    assert_eq!(brute_force(&p, &g)[x], 0.75);
    assert_eq!(engine_values(&g)[x], 0.75);
}

fn exact_config(functions: usize, statements: usize) -> SynthConfig {
    SynthConfig {
        functions,
        statements,
        max_depth: 3,
        loops: false,
        switches: true,
        calls: CallPolicy::SingleSite,
        max_control_points: Some(12),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn engine_equals_oracle_on_single_site_programs(seed in any::<u64>(), functions in 1usize..4, statements in 2usize..7) {
        let src = generate(&exact_config(functions, statements), seed);
        let (p, g) = load(&src, "t.mc");
        prop_assume!(control_point_count(&p) <= 14);
        let exact = brute_force(&p, &g);
        let got = engine_values(&g);
        for (i, (a, b)) in got.iter().zip(&exact).enumerate() {
            prop_assert!((a - b).abs() <= 1e-9, "vertex {} engine {} oracle {}\n{}", i, a, b, src);
        }
    }

    #[test]
    fn shared_callees_stay_in_range(seed in any::<u64>()) {
        let cfg = SynthConfig { calls: CallPolicy::Many, ..exact_config(3, 5) };
        let src = generate(&cfg, seed);
        let (_, g) = load(&src, "t.mc");
        let got = engine_values(&g);
        for (v, e) in g.vertices().iter().zip(&got) {
            prop_assert!((0.0..=1.0).contains(e));
            let entry = got[g.function_entry(v.id).index()];
            prop_assert!(*e <= entry + 1e-12);
        }
    }
}
