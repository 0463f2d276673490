//! A small, fully differentiable stand-in for the segmentation pipeline:
//! synthetic two-domain data, handcrafted pixel features, three linear
//! models with analytic gradients, and the self-training loop.

pub mod backward;
pub mod features;
pub mod gradcheck;
pub mod models;
pub mod synth;
pub mod train;

pub use backward::{backward_all, Batch, BatchItem, BatchResult, Gradients, Models, Objective};
pub use features::{feature_dim, pixel_features};
pub use gradcheck::{gradcheck, GradcheckReport};
pub use models::{softmax_map, ToyClassifier, ToyDiscriminator, ToySegmenter};
pub use synth::{gen_synthetic, DomainSet, SynthConfig, SyntheticData};
pub use train::{train, train_with_superpixels, EpochRecord, TrainConfig, TrainData, TrainOutcome};
