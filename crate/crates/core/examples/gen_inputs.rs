//! Regenerates `corpus/*.inputs.json` and prints per-program statistics.
//!
//!     cargo run -p elan-core --example gen_inputs -- corpus
//!
//! Every run draws 64 values uniformly from [-8, 8] with a ChaCha8 stream
//! seeded from the file name, so the files are reproducible.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use elan_core::frontend::{visit_stmts, StmtKind};
use elan_core::profiler::{profile, RunInput, DEFAULT_STEP_LIMIT};
use elan_core::{build_sdg, parse_program};

const RUNS: usize = 120;
const VALUES: usize = 64;

fn seed_for(name: &str) -> u64 {
    name.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "corpus".into());
    let mut files: Vec<_> = fs::read_dir(&dir)
        .expect("corpus directory")
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "mc"))
        .collect();
    files.sort();
    println!("{:<28} {:>8} {:>6} {:>6} {:>9} {:>7}", "program", "vertices", "cps", "loops", "max-sites", "errors");
    for path in files {
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let src = fs::read_to_string(&path).unwrap();
        let program = parse_program(&src, &name).unwrap_or_else(|e| panic!("{e}"));
        let g = build_sdg(&program);
        for d in g.diagnostics() {
            eprintln!("{d}");
        }
        let mut loops = 0;
        for f in &program.functions {
            visit_stmts(&f.body, &mut |s| {
                if matches!(s.kind, StmtKind::While { .. } | StmtKind::For { .. }) {
                    loops += 1;
                }
            });
        }
        let max_sites =
            g.functions().iter().map(|f| g.call_edges().iter().filter(|e| e.to == f.entry).count()).max().unwrap_or(0);

        let mut rng = ChaCha8Rng::seed_from_u64(seed_for(&name));
        let inputs: Vec<RunInput> = (0..RUNS)
            .map(|i| RunInput {
                name: format!("run{i:03}"),
                values: (0..VALUES).map(|_| rng.gen_range(-8..=8)).collect(),
            })
            .collect();
        let data = profile(&program, &g, &inputs, DEFAULT_STEP_LIMIT).unwrap();
        let bad = data.runtime_errors + data.step_limits;
        println!(
            "{:<28} {:>8} {:>6} {:>6} {:>9} {:>7}",
            name,
            g.len(),
            g.control_points().len(),
            loops,
            max_sites,
            bad
        );
        let stem = Path::new(&name).file_stem().unwrap().to_string_lossy().to_string();
        let out = Path::new(&dir).join(format!("{stem}.inputs.json"));
        let mut text = String::from("[\n");
        for (i, r) in inputs.iter().enumerate() {
            let vals: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
            let sep = if i + 1 == inputs.len() { "" } else { "," };
            text.push_str(&format!("  {{\"name\": \"{}\", \"values\": [{}]}}{sep}\n", r.name, vals.join(", ")));
        }
        text.push_str("]\n");
        fs::write(out, text).unwrap();
    }
}
