//! Criterion benchmarks for the model evaluations a fit repeats thousands of
//! times. Run with `cargo bench -p qdvapor-bench`.
