//! Data ingestion, synthetic data, benchmark orchestration and result files.

pub mod bench;
pub mod io;
pub mod synth;

pub use bench::{run_benchmark, MethodSpec, Preset, RunReport};
pub use io::{load_csv, load_gram, write_csv, write_gram, Dataset, FitReport, LabelColumn, SolverKind};
pub use synth::{gen_synthetic, SyntheticMode, SyntheticSpec};
