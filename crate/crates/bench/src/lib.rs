//! Benchmark harness; see benches/.
