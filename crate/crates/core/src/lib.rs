//! Hierarchical multimodal fusion for product classification.
//!
//! Precomputed title and description embeddings from two text encoders are
//! fused with a region-pooled image embedding through three parameter-free
//! fusion slots, then classified by a small fully connected head trained
//! from scratch. Encoders are frozen: their outputs arrive as embedding
//! files and are never modified.
//!
//! The crate is organised bottom-up:
//!
//! * [`numeric`] - dense vectors, linear layers, activations, loss,
//!   optimizers, seeded randomness and a finite-difference gradient checker.
//! * [`fusion`] - fusion operators, region pooling, the image adapter, the
//!   classifier head and the full model.
//! * [`dataset`] - the embedding container format, manifests, stratified
//!   splits and the synthetic benchmark generator.
//! * [`train`] - mini-batch training, evaluation and metrics reports.

pub mod dataset;
pub mod error;
pub mod fusion;
pub mod numeric;
pub mod train;

pub use error::{Error, Result};

pub use numeric::{DenseMatrix, DenseVector, LinearLayer, OptimizerConfig, OptimizerKind, Real, SeededRng};

pub use fusion::{
    build_plan, fuse, fused_dim, ClassifierHead, FusionInput, FusionOpKind, FusionPlan, HeadVariant, HeadWidths,
    ImageAdapter, Modality, ModalitySample, ModelParams, PlanConfig, RegionStack,
};
pub use dataset::{Dataset, DatasetDescriptor, EmbeddingFile, Manifest, Split, SyntheticSpec};
pub use train::{evaluate, train, MetricsReport, TrainConfig, TrainOutcome, TrainedModel};
