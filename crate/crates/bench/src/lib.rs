//! Criterion benchmarks for `ghzkit`; run with `cargo bench -p ghzkit-bench`.
