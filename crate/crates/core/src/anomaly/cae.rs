use super::fanogan::reconstruction_errors;
use super::{detect, AnomalyScore, Detection, Result};
use crate::ganmodels::frames_to_batch;
use crate::rfdata::IqFrame;
use crate::training::CaeModel;

/// Reconstruction error of `frame` under the autoencoder, thresholded at the
/// model's training threshold.
pub fn cae_score_and_classify(frame: &IqFrame, model: &CaeModel) -> Result<Detection> {
    let x = frames_to_batch(&[frame])?;
    let raw = reconstruction_errors(&model.net, &x)?[0];
    detect(AnomalyScore::new(raw), model.threshold)
}
