mod common;

use std::collections::HashSet;

use common::load;
use elan_core::evaluation::{correlation_report, threshold_accuracy, wall_score, RankingPair};
use elan_core::frontend::{pretty_print, visit_stmts, CondExpr};
use elan_core::likelihood::dempster_shafer_combine;
use elan_core::profiler::{interpret, profile, RunInput, DEFAULT_STEP_LIMIT};
use elan_core::sdg::{CpKind, VertexKind};
use elan_core::synth::{generate, CallPolicy, SynthConfig};
use elan_core::{build_sdg, parse_program, BranchModel, Engine, VertexId};
use proptest::prelude::*;

fn loopy(seed: u64) -> String {
    let cfg = SynthConfig {
        functions: 3,
        statements: 5,
        max_depth: 3,
        loops: true,
        switches: true,
        calls: CallPolicy::Many,
        max_control_points: Some(24),
    };
    generate(&cfg, seed)
}

fn leaf_ids(c: &CondExpr, out: &mut Vec<elan_core::frontend::NodeId>) {
    match c {
        CondExpr::Leaf(l) => out.push(l.id),
        CondExpr::Not(i) => leaf_ids(i, out),
        CondExpr::And(a, b) | CondExpr::Or(a, b) => {
            leaf_ids(a, out);
            leaf_ids(b, out);
        }
    }
}

#[test]
fn combine_neutral_and_commutative_on_grid() {
    for i in 1..1000 {
        let p = i as f64 / 1000.0;
        assert!((dempster_shafer_combine(p, 0.5).unwrap() - p).abs() < 1e-12);
        for j in (1..1000).step_by(37) {
            let q = j as f64 / 1000.0;
            assert_eq!(dempster_shafer_combine(p, q).unwrap(), dempster_shafer_combine(q, p).unwrap());
        }
    }
}

#[test]
fn single_if_ranking_matches_oracle_order() {
    let src = "int main() {\n a = 1;\n if (c) {\n  b = 1;\n  d = 2;\n }\n e = 3;\n}\n";
    let (p, g) = load(src, "t.mc");
    let exact = common::brute_force(&p, &g);
    let eng = Engine::new(&g, BranchModel::simple());
    let ids: Vec<VertexId> = g.vertices().iter().map(|v| v.id).collect();
    let got: Vec<f64> = eng.batch_likelihood(&ids, None).unwrap().iter().map(|r| r.likelihood).collect();
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
        idx
    };
    assert_eq!(order(&got), order(&exact));
}

#[test]
fn statistical_convergence_of_measured_fractions() {
    let src = "int main() {\n a = input() % 2;\n b = input() % 2;\n if (a == 0 || b == 0) {\n  x = 1;\n  if (input() % 2 == 0) {\n   y = 1;\n  }\n }\n}\n";
    let (p, g) = load(src, "t.mc");
    let mut rng = 12345u64;
    let mut next = || {
        rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (rng >> 33) as i64
    };
    let n = 4000;
    let inputs: Vec<RunInput> =
        (0..n).map(|i| RunInput { name: i.to_string(), values: (0..3).map(|_| next()).collect() }).collect();
    let d = profile(&p, &g, &inputs, DEFAULT_STEP_LIMIT).unwrap();
    for (line, expected) in [(5u32, 0.75f64), (7, 0.375)] {
        let f = d.fraction(g.vertex_at("t.mc", line).unwrap());
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((f - expected).abs() <= 3.0 * se, "line {line}: {f} vs {expected}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pretty_print_round_trips(seed in any::<u64>()) {
        let src = loopy(seed);
        let once = pretty_print(&parse_program(&src, "a.mc").unwrap());
        let twice = pretty_print(&parse_program(&once, "a.mc").unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn graph_structure(seed in any::<u64>()) {
        let src = loopy(seed);
        let p = parse_program(&src, "a.mc").unwrap();
        let g = build_sdg(&p);
        prop_assert_eq!(g.to_json(), build_sdg(&parse_program(&src, "a.mc").unwrap()).to_json());

        // Condition leaves and control-point vertices are in bijection.
        let mut leaves = Vec::new();
        for f in &p.functions {
            visit_stmts(&f.body, &mut |s| {
                if let Some(c) = s.kind.condition() {
                    leaf_ids(c, &mut leaves);
                }
            });
        }
        let mapped: HashSet<VertexId> = leaves.iter().map(|n| g.vertex_for_node(*n).unwrap()).collect();
        let cps: HashSet<VertexId> = g
            .vertices()
            .iter()
            .filter(|v| matches!(v.kind, VertexKind::ControlPoint(CpKind::IfLeaf | CpKind::LoopCond)))
            .map(|v| v.id)
            .collect();
        prop_assert_eq!(leaves.len(), mapped.len());
        prop_assert_eq!(mapped, cps);

        // Every dependence cycle passes through a loop condition.
        let n = g.len();
        let keep = |v: VertexId| g.vertex(v).cp_kind() != Some(CpKind::LoopCond);
        let mut indeg = vec![0usize; n];
        for e in g.cd_edges().iter().filter(|e| keep(e.from) && keep(e.to)) {
            indeg[e.to.index()] += 1;
        }
        let mut queue: Vec<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop() {
            seen += 1;
            for s in g.successors(VertexId(v as u32)) {
                if keep(VertexId(v as u32)) && keep(s.to) && g.cd_edges().binary_search_by(|e| (e.from, e.to, e.label).cmp(&(VertexId(v as u32), s.to, s.label))).is_ok() {
                    indeg[s.to.index()] -= 1;
                    if indeg[s.to.index()] == 0 {
                        queue.push(s.to.index());
                    }
                }
            }
        }
        prop_assert_eq!(seen, n);

        // Slices are closed under predecessors.
        for v in g.vertices().iter().step_by(7) {
            let s = g.control_slice(v.id);
            for &m in &s.members {
                for &pr in g.predecessors(m) {
                    prop_assert!(s.contains(pr));
                }
            }
        }
    }

    #[test]
    fn likelihood_invariants(seed in any::<u64>(), heuristic in any::<bool>()) {
        let src = loopy(seed);
        let (_, g) = load(&src, "a.mc");
        let model = if heuristic { BranchModel::heuristic() } else { BranchModel::simple() };
        let eng = Engine::new(&g, model);
        let ids: Vec<VertexId> = g.vertices().iter().map(|v| v.id).collect();
        let mut shuffled = ids.clone();
        shuffled.reverse();
        let batch = eng.batch_likelihood(&shuffled, None).unwrap();
        let entry = g.entry().unwrap();
        for r in &batch {
            let fresh = Engine::new(&g, model).execution_likelihood(r.vertex, None).unwrap();
            prop_assert_eq!(r.likelihood.to_bits(), fresh.likelihood.to_bits());
            prop_assert!((0.0..=1.0).contains(&r.likelihood));
            let fe = g.function_entry(r.vertex);
            let e_entry = Engine::new(&g, model).execution_likelihood(fe, None).unwrap().likelihood;
            prop_assert!(r.likelihood <= e_entry + 1e-12);
        }
        prop_assert_eq!(eng.execution_likelihood(entry, None).unwrap().likelihood, 1.0);
    }

    #[test]
    fn profiler_control_consistency(seed in any::<u64>(), values in proptest::collection::vec(-5i64..6, 0..20)) {
        let src = loopy(seed);
        let (p, g) = load(&src, "a.mc");
        let t = interpret(&p, &g, &RunInput { name: "r".into(), values }, 100_000).unwrap();
        prop_assert!(t.visited.contains(&g.entry().unwrap()));
        prop_assert!(t.steps <= 100_000);
        // A visited vertex has a visited dependence predecessor (entry of main excepted).
        for &v in &t.visited {
            if v == g.entry().unwrap() {
                continue;
            }
            prop_assert!(g.predecessors(v).iter().any(|pr| t.visited.contains(pr)), "vertex {} has no visited predecessor", v);
        }
    }

    #[test]
    fn wall_scores_ignore_labels(perm_seed in any::<u64>(), n in 2usize..120) {
        let mut state = perm_seed | 1;
        let mut rand = |k: usize| {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % k as u64) as usize
        };
        let predicted: Vec<(VertexId, f64)> = (0..n).map(|i| (VertexId(i as u32), (rand(10)) as f64 / 10.0)).collect();
        let measured: Vec<(VertexId, f64)> = (0..n).map(|i| (VertexId(i as u32), (rand(5)) as f64 / 4.0)).collect();
        // Relabel by a random permutation, keeping relative id order so ties break identically.
        let mut labels: Vec<u32> = (0..n as u32).map(|i| i * 3 + 7).collect();
        labels.sort_unstable();
        let relabel = |v: &[(VertexId, f64)]| -> Vec<(VertexId, f64)> {
            v.iter().map(|(id, x)| (VertexId(labels[id.index()]), *x)).collect()
        };
        let a = correlation_report(&RankingPair::from_values(&predicted, &measured).unwrap()).unwrap();
        let b = correlation_report(&RankingPair::from_values(&relabel(&predicted), &relabel(&measured)).unwrap()).unwrap();
        prop_assert_eq!(a, b);
        let pair = RankingPair::from_values(&predicted, &measured).unwrap();
        prop_assert_eq!(wall_score(&pair, 1.0).unwrap().score, 1.0);

        // Any bijective relabeling of two fixed rankings keeps every score.
        let mut perm: Vec<u32> = (0..n as u32).collect();
        for i in (1..n).rev() {
            perm.swap(i, rand(i + 1));
        }
        let map = |r: &[VertexId]| -> Vec<VertexId> { r.iter().map(|v| VertexId(perm[v.index()])).collect() };
        let moved = RankingPair::new(map(&pair.predicted), map(&pair.measured)).unwrap();
        for f in elan_core::evaluation::BLOCKS {
            prop_assert_eq!(wall_score(&pair, f).unwrap(), wall_score(&moved, f).unwrap());
        }

        let p: Vec<f64> = predicted.iter().map(|x| x.1).collect();
        let m: Vec<f64> = measured.iter().map(|x| x.1).collect();
        let t = threshold_accuracy(&p, &m).unwrap();
        for rows in [&t.always, &t.never] {
            for w in rows.windows(2) {
                prop_assert!(w[0].predicted <= w[1].predicted);
            }
        }
    }
}
