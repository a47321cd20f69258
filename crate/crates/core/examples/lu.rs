//! Factor a random matrix with complete pivoting in each execution mode
//! and compare time, allocations and dispatch counts.

use std::path::Path;
use std::sync::Arc;

use mdl::cli::bench_one;
use mdl::engine::{EngineConfig, Mode};
use mdl::frontend;

fn main() {
    let n: i64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(60);
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus/lu.mdl");
    let m = Arc::new(frontend::load_file(&path).unwrap());
    println!("{:<10} {:<10} {:>10} {:>8} {:>10}", "variant", "mode", "median_s", "allocs", "dispatches");
    for variant in ["lu_naive", "lu_loops"] {
        for mode in [Mode::Dynamic, Mode::Optimized] {
            let m = m.clone();
            let rows = mdl::engine::with_big_stack(move || {
                bench_one(&m, EngineConfig::with_mode(mode), variant, &[n], 5).unwrap()
            });
            let r = &rows[0];
            println!(
                "{:<10} {:<10} {:>10.5} {:>8} {:>10}",
                variant,
                mode.as_str(),
                r.median_time,
                r.allocations,
                r.dynamic_dispatches
            );
        }
    }
}
