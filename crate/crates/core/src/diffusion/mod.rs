//! Denoising diffusion over the movable object's 9-D pose vector:
//! schedule, pose codec, conditional denoiser, sampling and training.

mod model;
mod posevec;
mod schedule;
mod train;

pub use model::{
    backbone, batch_loss, cloud_embedding_cache, draw_batch_noise, gaussian9,
    init_denoiser_params, predict_eps, prepare_instance, sample, NoiseDraw, PreparedInstance,
    SampleOptions,
};
pub use posevec::{pose_to_vector, vector_to_pose, Z_HALF};
pub use schedule::{
    forward_noise, NoiseSchedule, DEFAULT_BETA_END, DEFAULT_BETA_START, DEFAULT_T,
};
pub use train::{train, TrainConfig, TrainReport};

use thiserror::Error;

use crate::encoder::TextError;
use crate::geometry::GeometryError;
use crate::nn::{CheckpointError, NnError};

#[derive(Debug, Error)]
pub enum DiffusionError {
    #[error("timestep {t} outside 1..={t_steps}")]
    BadTimestep { t: usize, t_steps: usize },
    #[error("sampling failed to decode a rotation after {retries} retries")]
    SamplingDegenerate { retries: usize },
    #[error("non-finite loss {value} at epoch {epoch}, step {step}")]
    NonFiniteLoss { epoch: usize, step: u64, value: f64 },
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
