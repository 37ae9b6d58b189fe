//! Shared inputs for the criterion benchmarks in `benches/`.

use segeval::synthetic::{self, DEFAULT_SEED};
use segeval::{BinaryMask, Tissue};

/// Femoral cartilage masks from the first synthetic scan: ground truth and
/// each model's prediction.
pub fn femoral_masks() -> (BinaryMask, Vec<BinaryMask>) {
    let scan = synthetic::generate(1, DEFAULT_SEED).swap_remove(0);
    let gt = scan.ground_truth.extract_mask(Tissue::Femoral);
    let preds = scan
        .predictions
        .iter()
        .map(|(_, v)| v.extract_mask(Tissue::Femoral))
        .collect();
    (gt, preds)
}
