//! Evaluation and ensemble analysis for volumetric knee-tissue segmentations.
//!
//! The crate covers the whole measurement chain used to compare segmentation
//! models against manual ground truth:
//!
//! * [`volume`]: label volumes, binary masks, the SEGV and NIfTI-1 readers,
//!   and dataset manifests.
//! * [`overlap`]: Dice, VOE, tissue volume, RMS coefficient of variation and
//!   inter-model Dice correlation.
//! * [`surface`]: boundary extraction, exact anisotropic Euclidean distance
//!   transform and average symmetric surface distance.
//! * [`thickness`]: medial-axis cartilage thickness, thickness error,
//!   longitudinal change and Bland–Altman agreement.
//! * [`droid`]: slice-wise Dice along the through-plane axis, normalized to
//!   the ground-truth extent.
//! * [`ensemble`]: k-of-n voting and the true-positive / true-negative oracle
//!   bounds.
//! * [`stats`]: Kruskal–Wallis, Dunn post-hoc with Bonferroni correction and
//!   Pearson correlation.
//! * [`report`]: the batch pipeline that ties everything together.

pub mod droid;
pub mod ensemble;
pub mod error;
pub mod overlap;
pub mod report;
pub mod stats;
pub mod surface;
pub mod synthetic;
pub mod thickness;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{Axis, BinaryMask, Dims, LabelVolume, Tissue, VoxelSpacing};
