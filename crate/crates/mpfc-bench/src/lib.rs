//! Shared scenario builders for the kernel benchmarks.

use mpfc::verify::ModeSet;
use mpfc::{GridFunction, Params, SchemeState, Stepper};

/// Benchmark parameters at a given resolution on the standard 32 x 32 domain.
pub fn bench_params(m: usize) -> Params {
    Params::new(1.0, 1.0, m, m, 32.0 / m as f64, 0.1)
}

pub fn bench_field(m: usize) -> GridFunction {
    let p = bench_params(m);
    ModeSet::benchmark().sample(p.m, p.n, p.h)
}

/// A stepper plus a state a few steps past the initial transient, so a
/// benchmarked step does representative Newton work.
pub fn warmed_state(m: usize) -> (Stepper, SchemeState) {
    let p = bench_params(m);
    let stepper = Stepper::new(p.clone()).unwrap();
    let mut state = stepper.init(bench_field(m)).unwrap();
    for _ in 0..3 {
        state = stepper.advance_unaudited(&state).unwrap().0;
    }
    (stepper, state)
}
