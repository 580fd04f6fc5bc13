//! Benchmark-only crate. The measurements live in `benches/`:
//!
//! - `solvers`: exact evolution at figure scale, the brute-force
//!   product-basis reference, and the four master-equation integrators;
//! - `angular_momentum`: Clebsch-Gordan evaluation and the collective-spin
//!   degeneracy layer.
//!
//! Run with `cargo bench -p spinstar-bench`, or smoke-test every benchmark
//! body once with `cargo bench -p spinstar-bench -- --test`.
