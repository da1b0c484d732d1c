//! Losses, optimization, training, evaluation metrics, the Linear
//! baseline and the leave-one-out protocol.

pub mod baseline;
pub mod eval;
pub mod loo;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod train;

pub use baseline::{linear_baseline, LinearBaseline};
pub use eval::{evaluate, EvalOptions, EvalReport, Predictor, SceneReport};
pub use loo::{leave_one_out, read_fold_file, LooReport};
pub use loss::{batch_loss, l2_loss, total_loss};
pub use metrics::{ade, collision_rate, fde, sampled_collision_rate, scene_collision_rate, CollisionProtocol};
pub use optim::sgd_step;
pub use train::{train, train_on_sequences, write_loss_csv, TrainConfig, TrainOutput};
