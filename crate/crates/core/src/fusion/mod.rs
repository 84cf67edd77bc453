//! Fusion operators, image pooling and adaptation, the classifier head and
//! the assembled model.

pub mod check;
mod head;
mod image;
mod model;
mod ops;
mod plan;

pub use head::{ClassifierHead, HeadCache, HeadVariant, HeadWidths, DEFAULT_DROPOUT};
pub use image::{region_average, AdapterCache, ImageAdapter, RegionStack, DEFAULT_KERNEL_LEN};
pub use model::{model_forward, ForwardCache, FusionInput, Modality, ModalitySample, ModelParams};
pub use ops::{fuse, fuse_backward, fused_dim, FusionOpKind};
pub use plan::{build_plan, FusionPlan, PlanConfig};
