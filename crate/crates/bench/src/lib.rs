//! Benchmarks for the volsup hot paths; see `benches/`.
