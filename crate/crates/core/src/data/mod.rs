//! Skeleton sequence data: ingestion, preprocessing, splits and fixtures.

pub mod batch;
pub mod ntu;
pub mod preprocess;
pub mod store;
pub mod synth;

use ndarray::{Array2, Array3};

pub use batch::{Batch, EpochSampler};
pub use ntu::{parse_ntu_filename, parse_ntu_skeleton, read_ntu_dir, FileIds, RawBody, RawRecording};
pub use preprocess::{
    build_split, filter_single_subject, mask_labels, preprocess, split_cross_subject, BodyPolicy, CrossSubjectProtocol,
    FilterConfig, PrepareStats,
};
pub use store::{read_dataset, write_dataset};
pub use synth::{synth_make, SynthSpec};

pub const N_JOINTS: usize = 25;
pub const FRAME_DIM: usize = N_JOINTS * 3;
/// Index of the hip (spine base) joint, the origin after centering.
pub const HIP_JOINT: usize = 0;
pub const MAX_SEQUENCE_LEN: usize = 150;
pub const N_ACTION_CLASSES: usize = 60;

/// A preprocessed, hip-centered motion sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    /// `(T, 25, 3)` joint positions in meters.
    pub frames: Array3<f32>,
    /// Ground-truth action class, when known.
    pub label: Option<usize>,
    pub subject_id: u32,
    /// Whether the label may be used for supervision.
    pub labeled: bool,
}

impl SkeletonSequence {
    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Frames flattened to `(T, 75)` in `f64`, joint-major then xyz.
    pub fn to_matrix(&self) -> Array2<f64> {
        let t = self.len();
        let flat = self.frames.mapv(f64::from);
        flat.into_shape_with_order((t, FRAME_DIM)).expect("contiguous frames")
    }

    /// Label usable for supervision (labeled and present).
    pub fn supervised_label(&self) -> Option<usize> {
        if self.labeled {
            self.label
        } else {
            None
        }
    }
}

/// Train/test partition with the fraction of train labels in use.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<SkeletonSequence>,
    pub test: Vec<SkeletonSequence>,
    pub label_fraction: f64,
}

impl DatasetSplit {
    pub fn labeled_count(&self) -> usize {
        self.train.iter().filter(|s| s.labeled).count()
    }
}
