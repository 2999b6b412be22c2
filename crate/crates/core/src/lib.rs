//! Exemplar-domain aware image-to-image translation.
//!
//! A shared encoder/decoder generator whose decoder weights are produced per
//! exemplar by a parameter network, trained adversarially with cycle and
//! style-statistics losses over unpaired multi-domain image sets.

pub mod arch;
pub mod backbone;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod discriminator;
pub mod domain;
pub mod error;
pub mod evaluation;
pub mod generator;
pub mod losses;
pub mod model;
pub mod ops;
pub mod optim;
pub mod param_net;
pub mod params;
pub mod perceptual;
pub mod trainer;

pub use arch::{BlockSpec, GeneratorSpec};
pub use backbone::{Backbone, BackboneSpec, FeatureExtractor};
pub use config::{AdversarialMode, Config};
pub use discriminator::{Discriminator, PatchLogits};
pub use domain::{DomainLabel, DomainRegistry};
pub use error::{EditError, Result};
pub use evaluation::EvalReport;
pub use generator::{DynamicParams, Generator};
pub use losses::LossReport;
pub use model::EditModel;
pub use param_net::{BlendMode, ParamNet, StyleEmbedding};
pub use params::ParamSet;
pub use trainer::{LrSchedule, ReplayBuffer, StepOptions, TrainState, Trainer};
