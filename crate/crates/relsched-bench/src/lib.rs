//! Benchmark-only crate; see the `pipelines` bench target.
