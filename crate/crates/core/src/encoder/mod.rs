//! Semantic encoder: backbone + projection head, the cross-correlation
//! redundancy-reduction loss, and its training loop.

pub mod checkpoint;
mod loss;
mod model;
mod train;

pub use loss::{
    cosine_similarity, covariance, cross_correlation, mean_row_cosine, scgir_graph, scgir_loss, CrossCorrMatrix,
    LatentBatch, LossGraph, ScgirLossParts,
};
pub use model::{EncoderConfig, EncoderModel};
pub(crate) use train::batches;
pub use train::{correlation_snapshot, train_encoder, EncoderTrainConfig, TrainReport};

use std::path::Path;

use crate::error::Result;
use crate::numeric::Rng;

impl EncoderModel {
    pub fn save(&self, path: &Path) -> Result<()> {
        checkpoint::save_checkpoint(path, self.store(), &self.config().digest())
    }

    /// Loads a checkpoint written for an identical config.
    pub fn load(config: EncoderConfig, path: &Path) -> Result<Self> {
        let mut model = EncoderModel::new(config, &mut Rng::seed(0))?;
        let store = checkpoint::load_checkpoint(path, &model.config().digest(), model.store())?;
        model.replace_store(store)?;
        Ok(model)
    }
}
