//! Trained-model file: a JSON header describing the architecture followed
//! by the raw parameters.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "MMPR"
//! 4       2     version (u16 LE, = 1)
//! 6       4     header length H (u32 LE)
//! 10      H     JSON header (UTF-8)
//! 10+H    ...   parameters as f32 LE, in `ModelParams::params` order
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{build_plan, FusionPlan, HeadVariant, HeadWidths, Modality, ModelParams, PlanConfig};
use crate::numeric::SeededRng;

pub const PARAMS_MAGIC: [u8; 4] = *b"MMPR";
pub const PARAMS_VERSION: u16 = 1;

/// Plan, parameters and input mask of a trained model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub plan: FusionPlan,
    pub params: ModelParams<f32>,
    /// Modalities zeroed during training; evaluation applies the same mask.
    pub mask: Vec<Modality>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    plan: PlanConfig,
    classes: usize,
    widths: HeadWidths,
    variant: HeadVariant,
    dropout_p: f64,
    kernel_len: usize,
    mask: Vec<Modality>,
    param_count: usize,
}

impl TrainedModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let head = &self.params.head;
        let header = Header {
            plan: self.plan.config(),
            classes: head.n_classes(),
            widths: HeadWidths {
                hidden1: head.layer1.out_dim(),
                hidden2: head.layer2.out_dim(),
            },
            variant: head.variant,
            dropout_p: head.dropout_p,
            kernel_len: self.params.adapter.kernel.dim(),
            mask: self.mask.clone(),
            param_count: self.params.param_count(),
        };
        let json = serde_json::to_vec(&header)?;
        let flat = self.params.flatten();
        let mut out = Vec::with_capacity(10 + json.len() + 4 * flat.len());
        out.extend_from_slice(&PARAMS_MAGIC);
        out.extend_from_slice(&PARAMS_VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for v in flat {
            out.extend_from_slice(&v.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 10 {
            return Err(Error::format(bytes.len() as u64, "truncated params header"));
        }
        if bytes[..4] != PARAMS_MAGIC {
            return Err(Error::format(0, "bad params magic"));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != PARAMS_VERSION {
            return Err(Error::format(4, format!("unsupported params version {version}")));
        }
        let header_len = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let payload_at = 10 + header_len;
        if bytes.len() < payload_at {
            return Err(Error::format(bytes.len() as u64, "truncated params header"));
        }
        let header: Header = serde_json::from_slice(&bytes[10..payload_at])?;
        let plan = build_plan(&header.plan)?;
        // Shapes come from a throwaway initialisation; values are replaced.
        let mut params = ModelParams::<f32>::init_with(
            &plan,
            header.classes,
            header.widths,
            header.variant,
            header.dropout_p,
            &mut SeededRng::new(0, "init"),
        )?;
        if params.adapter.kernel.dim() != header.kernel_len {
            return Err(Error::config(format!("unsupported adapter kernel length {}", header.kernel_len)));
        }
        let expected = payload_at + 4 * params.param_count();
        if bytes.len() != expected || params.param_count() != header.param_count {
            return Err(Error::format(
                bytes.len().min(expected) as u64,
                format!("params payload should end at byte {expected}"),
            ));
        }
        let flat: Vec<f32> = bytes[payload_at..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        params.load_flat(&flat)?;
        Ok(TrainedModel {
            plan,
            params,
            mask: header.mask,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}
