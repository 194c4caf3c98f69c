//! Benchmark functions, synthetic datasets, CSV tables and corruptions.

mod benchmark;
mod synth;
mod table;

pub use benchmark::BenchmarkFn;
pub use synth::{corrupt, make_blobs, make_two_moons, split, CorruptionKind, CorruptionSpec, MAX_INTENSITY};
pub use table::{load_csv, read_table, save_csv, write_table, Table, TargetColumn};
