mod bundle;
mod denoiser;
mod diffusion;
mod edit;
mod error;
mod sampler;
mod schedule;
mod train;
mod util;
mod vae;

pub use error::{ModelError, Result};
pub use schedule::{NoiseSchedule, ScheduleConfig};
pub use util::{argmax_rows, kl_normal, normal_tensor, one_hot, softmax_rows, stream_rng};
pub use vae::{ElboTerms, Vae, VaeConfig, VaeLossWeights, VaeNoise, INIT_LOG_SIGMA};
pub use denoiser::{sinusoid, GlobalDenoiser, GlobalDenoiserConfig, PointDenoiser, PointDenoiserConfig, PointLossTerms, SINUSOID_DIM};
pub use train::{
    cloud_inputs, encode_set, labeled_mask, train_diffusion, train_vae, DiffusionTrainConfig, EncodedSet, LossCurve,
    VaeTrainConfig,
};
pub use bundle::LatentModel;
pub use diffusion::{Diffusion, DiffusionConfig, LatentNorm};
pub use sampler::{
    generate, generate_one, sample_global, sample_global_rows, sample_points, EmaLabelState, GlobalEps, PointSample,
    SampleOptions, DEFAULT_EMA_ALPHA,
};
pub use edit::{edit, label_probe, EditOutput, EditRequest, EditStep};
