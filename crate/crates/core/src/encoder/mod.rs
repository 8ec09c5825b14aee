//! Attribute-aware document encoder with target and candidate towers,
//! its contrastive pretraining, and the differentiated representations
//! used by the policy.

mod contrastive;
mod params;
mod pretrain;
mod reps;

pub use contrastive::{contrastive_loss, scores, ContrastiveSample, PairSampler};
pub use params::{
    AttentionReport, EncoderConfig, EncoderParams, EncoderWeights, Tower, TowerParams,
};
pub(crate) use pretrain::clip_norm;
pub use pretrain::{pretrain, retrieval_accuracy, PretrainConfig, PretrainReport};
pub use reps::{differentiate, DocReps};
