use serde::{Deserialize, Serialize};

use super::ops::{fused_dim, FusionOpKind};
use crate::error::{Error, Result};

/// Slot choices and input dimensions for a fusion graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Fuses title with description, within each text encoder.
    pub slot_inner: FusionOpKind,
    /// Fuses the two encoder branches.
    pub slot_outer: FusionOpKind,
    /// Fuses the image representation with the text representation.
    pub slot_final: FusionOpKind,
    /// Embedding width of the first text encoder.
    pub d_text: usize,
    /// Embedding width of the second text encoder, when it differs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_text_second: Option<usize>,
    pub d_image_raw: usize,
}

impl PlanConfig {
    pub fn uniform(kind: FusionOpKind, d_text: usize, d_image_raw: usize) -> Self {
        PlanConfig {
            slot_inner: kind,
            slot_outer: kind,
            slot_final: kind,
            d_text,
            d_text_second: None,
            d_image_raw,
        }
    }
}

/// A validated fusion graph with every intermediate dimension inferred.
///
/// The graph is `final(P, outer(inner(T1, D1), inner(T2, D2)))`, where `P`
/// is the adapted image vector. Concatenation keeps argument order, so the
/// image occupies the leading positions of the fused vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionPlan {
    pub slot_inner: FusionOpKind,
    pub slot_outer: FusionOpKind,
    pub slot_final: FusionOpKind,
    pub d_text: usize,
    pub d_text_second: usize,
    pub d_image_raw: usize,
    /// Width of each encoder branch after the inner slot.
    pub d_branch_first: usize,
    pub d_branch_second: usize,
    /// Width of the text representation after the outer slot.
    pub d_text_fused: usize,
    /// Output width of the image adapter.
    pub adapter_target: usize,
    pub d_fused: usize,
}

pub fn build_plan(config: &PlanConfig) -> Result<FusionPlan> {
    let d_text = config.d_text;
    let d_text_second = config.d_text_second.unwrap_or(d_text);
    if d_text == 0 || d_text_second == 0 {
        return Err(Error::shape("text embedding width", 1, 0));
    }
    if config.d_image_raw == 0 {
        return Err(Error::shape("image embedding width", 1, 0));
    }
    let inner = config.slot_inner;
    let d_branch_first = fused_dim(inner, d_text, d_text).map_err(|e| e.in_context("slot_inner"))?;
    let d_branch_second =
        fused_dim(inner, d_text_second, d_text_second).map_err(|e| e.in_context("slot_inner"))?;
    let d_text_fused = fused_dim(config.slot_outer, d_branch_first, d_branch_second)
        .map_err(|e| e.in_context("slot_outer"))?;
    let adapter_target = match config.slot_final {
        FusionOpKind::Concatenation => d_text,
        FusionOpKind::Addition | FusionOpKind::Average => d_text_fused,
    };
    let d_fused = fused_dim(config.slot_final, adapter_target, d_text_fused)
        .map_err(|e| e.in_context("slot_final"))?;
    Ok(FusionPlan {
        slot_inner: inner,
        slot_outer: config.slot_outer,
        slot_final: config.slot_final,
        d_text,
        d_text_second,
        d_image_raw: config.d_image_raw,
        d_branch_first,
        d_branch_second,
        d_text_fused,
        adapter_target,
        d_fused,
    })
}

impl FusionPlan {
    /// Short label such as `avg/avg/avg` (inner/outer/final).
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.slot_inner, self.slot_outer, self.slot_final)
    }

    pub fn config(&self) -> PlanConfig {
        PlanConfig {
            slot_inner: self.slot_inner,
            slot_outer: self.slot_outer,
            slot_final: self.slot_final,
            d_text: self.d_text,
            d_text_second: (self.d_text_second != self.d_text).then_some(self.d_text_second),
            d_image_raw: self.d_image_raw,
        }
    }

    /// Whether the image adapter can reach its target from the raw image
    /// width.
    pub fn adapter_feasible(&self) -> bool {
        self.d_image_raw >= self.adapter_target
    }
}
