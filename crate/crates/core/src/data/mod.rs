//! Dataset ingestion, synthetic generation and preprocessing.

mod libsvm;
mod synth;
mod transform;

pub use libsvm::{parse_libsvm, read_libsvm_file, write_libsvm};
pub use synth::{synthesize, SpectrumDecay, SyntheticSpec};
pub use transform::{normalize_rows, permute_prefix};
