//! The convolution-structure observation model: noise laws, target
//! densities and exact sampling of `Z = X + εY`.

mod factor;
mod noise;
mod sample;
mod target;

pub use factor::{AxisNoise, Factor1D};
pub use noise::{CharFn, FrequencyProbe, NoiseKind, NoiseModel, NoiseSampler, MIN_MARGIN};
pub use sample::{sample_model, sample_target, Sample, SampleMeta};
pub use target::{MixtureComponent, TargetKind, TargetPdf, TargetSampler, TargetSpec};
