//! Embedding reward shapers (DistMult, ComplEx), their training objective,
//! the score-table interchange format and the shaped terminal reward.

mod model;
mod reward;
mod table;
mod train;

pub use model::{ShaperCheckpoint, ShaperKind, ShaperModel, SHAPER_FORMAT_VERSION};
pub use reward::{shape, shaped_reward, ScoreProvider};
pub use table::{MissingScore, ScoreTable};
pub use train::{
    loss_and_grad, smooth_targets, train_shaper, training_pairs, ShaperGrad, TrainConfig,
};
