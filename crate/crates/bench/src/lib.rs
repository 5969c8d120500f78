//! Shared workloads for the benchmarks.

use haarlab_core::{full_grid, generate, CoefficientFamily, GeneratorSpec, IntervalCollection};

/// Random-budget collection with the given depth and Carleson budget.
pub fn budget_collection(depth: u32, budget: u32, seed: u64) -> IntervalCollection {
    let spec: GeneratorSpec = format!("random-budget:{depth}:{budget}:{seed}")
        .parse()
        .expect("valid spec");
    generate(&spec).expect("generator succeeds")
}

/// Cascade collection with two-level splits.
pub fn cascade_collection(depth: u32, seed: u64) -> IntervalCollection {
    let spec: GeneratorSpec = format!("cascade:2:{depth}:0.01:{seed}")
        .parse()
        .expect("valid spec");
    generate(&spec).expect("generator succeeds")
}

/// Unit scalar coefficients on every member of `D_n`.
pub fn unit_family(n: u32) -> (IntervalCollection, CoefficientFamily) {
    let grid = full_grid(n);
    let mut x = CoefficientFamily::new(1);
    for i in grid.iter() {
        x.set(*i, vec![1.0]).expect("scalar entry");
    }
    (grid, x)
}
