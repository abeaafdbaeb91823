//! Volume I/O, labeled datasets, splitting and the synthetic phantom generator.

mod dataset;
pub mod format;
mod nifti;
pub mod phantom;
mod volume;

pub use dataset::{
    load_directory, phantom_id, read_labels, save_directory, split_dataset, synthetic_dataset, write_labels,
    LabeledDataset, Provenance, Sample,
};
pub use format::{read_volume, write_volume};
pub use nifti::{decode_nifti, parse_header, read_nifti, NiftiHeader};
pub use phantom::{make_phantom, PhantomConfig};
pub use volume::{normalize_volume, TargetPair, Volume, THRESHOLD_RANGE_DB};
