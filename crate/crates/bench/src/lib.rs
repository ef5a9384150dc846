//! Criterion benchmarks for the transport solvers and ground-metric cost matrices.
//! Run with `cargo bench -p reshape-ot-bench`.
