//! The full fusion model: image adapter, three fusion slots and the head.

use serde::{Deserialize, Serialize};

use super::head::{ClassifierHead, HeadCache, HeadVariant, HeadWidths, DEFAULT_DROPOUT};
use super::image::{region_average, AdapterCache, ImageAdapter, RegionStack, DEFAULT_KERNEL_LEN};
use super::ops::{fuse, fuse_backward};
use super::plan::FusionPlan;
use crate::error::{Error, Result};
use crate::numeric::{DenseVector, LinearLayer, Real, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Text,
    Image,
}

impl std::str::FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(Modality::Text),
            "image" => Ok(Modality::Image),
            other => Err(Error::config(format!("unknown modality {other:?}"))),
        }
    }
}

/// One product: four text embeddings, its image regions and its label.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalitySample<T = f32> {
    pub title_first: DenseVector<T>,
    pub title_second: DenseVector<T>,
    pub desc_first: DenseVector<T>,
    pub desc_second: DenseVector<T>,
    pub regions: RegionStack<T>,
    pub label: usize,
}

impl<T: Real> ModalitySample<T> {
    /// Pools the regions; the result is what the model actually consumes.
    pub fn to_input(&self) -> FusionInput<T> {
        FusionInput {
            title_first: self.title_first.clone(),
            title_second: self.title_second.clone(),
            desc_first: self.desc_first.clone(),
            desc_second: self.desc_second.clone(),
            image: region_average(&self.regions),
        }
    }
}

/// Model input with the image already region-averaged. Region pooling has
/// no parameters, so it can be done once per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionInput<T = f32> {
    pub title_first: DenseVector<T>,
    pub title_second: DenseVector<T>,
    pub desc_first: DenseVector<T>,
    pub desc_second: DenseVector<T>,
    pub image: DenseVector<T>,
}

impl<T: Real> FusionInput<T> {
    /// Copy with the given modalities zeroed.
    pub fn masked(&self, zeroed: &[Modality]) -> Self {
        let mut out = self.clone();
        if zeroed.contains(&Modality::Text) {
            for v in [
                &mut out.title_first,
                &mut out.title_second,
                &mut out.desc_first,
                &mut out.desc_second,
            ] {
                v.fill_zero();
            }
        }
        if zeroed.contains(&Modality::Image) {
            out.image.fill_zero();
        }
        out
    }

    pub fn cast<U: Real>(&self) -> FusionInput<U> {
        FusionInput {
            title_first: self.title_first.cast(),
            title_second: self.title_second.cast(),
            desc_first: self.desc_first.cast(),
            desc_second: self.desc_second.cast(),
            image: self.image.cast(),
        }
    }
}

/// Everything the optimizer may change. Embeddings are inputs and the
/// fusion slots carry no parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T = f32> {
    pub adapter: ImageAdapter<T>,
    pub head: ClassifierHead<T>,
}

/// Intermediate values of one model forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    pub adapter: AdapterCache,
    pub image: DenseVector<T>,
    pub text: DenseVector<T>,
    pub fused: DenseVector<T>,
    pub head: HeadCache<T>,
}

impl<T: Real> ForwardCache<T> {
    pub fn probs(&self) -> &DenseVector<T> {
        &self.head.probs
    }
}

impl<T: Real> ModelParams<T> {
    /// Fresh parameters drawn from the `"init"` stream of `seed`.
    pub fn init(
        plan: &FusionPlan,
        classes: usize,
        widths: HeadWidths,
        variant: HeadVariant,
        seed: u64,
    ) -> Result<Self> {
        Self::init_with(plan, classes, widths, variant, DEFAULT_DROPOUT, &mut SeededRng::new(seed, "init"))
    }

    pub fn init_with(
        plan: &FusionPlan,
        classes: usize,
        widths: HeadWidths,
        variant: HeadVariant,
        dropout_p: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let adapter = ImageAdapter::init_uniform(DEFAULT_KERNEL_LEN, plan.d_image_raw, plan.adapter_target, rng)?;
        let head = ClassifierHead::init(plan.d_fused, classes, widths, variant, dropout_p, rng)?;
        Ok(ModelParams { adapter, head })
    }

    pub fn n_classes(&self) -> usize {
        self.head.n_classes()
    }

    pub fn validate(&self, plan: &FusionPlan) -> Result<()> {
        if self.adapter.input_dim() != plan.d_image_raw {
            return Err(Error::shape("image adapter input", plan.d_image_raw, self.adapter.input_dim()));
        }
        if self.adapter.target_dim() != plan.adapter_target {
            return Err(Error::shape("image adapter output", plan.adapter_target, self.adapter.target_dim()));
        }
        self.head.validate(plan.d_fused)
    }

    pub fn forward(
        &self,
        plan: &FusionPlan,
        input: &FusionInput<T>,
        training: bool,
        rng: &mut SeededRng,
    ) -> Result<ForwardCache<T>> {
        let (image, adapter) = self.adapter.forward(&input.image)?;
        let first = fuse(plan.slot_inner, &input.title_first, &input.desc_first)
            .map_err(|e| e.in_context("slot_inner (first encoder)"))?;
        let second = fuse(plan.slot_inner, &input.title_second, &input.desc_second)
            .map_err(|e| e.in_context("slot_inner (second encoder)"))?;
        let text = fuse(plan.slot_outer, &first, &second).map_err(|e| e.in_context("slot_outer"))?;
        let fused = fuse(plan.slot_final, &image, &text).map_err(|e| e.in_context("slot_final"))?;
        let head = self.head.forward(&fused, training, rng)?;
        Ok(ForwardCache {
            adapter,
            image,
            text,
            fused,
            head,
        })
    }

    /// Accumulates parameter gradients for one sample given the gradient of
    /// the loss with respect to the logits.
    pub fn backward(
        &mut self,
        plan: &FusionPlan,
        input: &FusionInput<T>,
        cache: &ForwardCache<T>,
        grad_logits: &DenseVector<T>,
    ) -> Result<()> {
        let grad_fused = self.head.backward(&cache.head, grad_logits)?;
        let (grad_image, _grad_text) =
            fuse_backward(plan.slot_final, cache.image.dim(), cache.text.dim(), &grad_fused)
                .map_err(|e| e.in_context("slot_final"))?;
        self.adapter.backward(&input.image, &cache.adapter, &grad_image)
    }

    pub fn zero_grad(&mut self) {
        self.adapter.zero_grad();
        self.head.zero_grad();
    }

    /// Parameter tensors in a fixed order: adapter kernel, then each head
    /// layer's weight and bias.
    pub fn params(&self) -> Vec<&[T]> {
        let mut out = vec![self.adapter.kernel.as_slice()];
        for layer in self.head.layers() {
            out.extend(layer.params());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = vec![self.adapter.kernel.as_mut_slice()];
        for layer in self.head.layers_mut() {
            out.extend(layer.params_mut());
        }
        out
    }

    /// Gradient buffers matching [`ModelParams::params`].
    pub fn grads(&mut self) -> Vec<Vec<T>> {
        let mut out = vec![self.adapter.grad_kernel().as_slice().to_vec()];
        for layer in self.head.layers_mut() {
            out.extend(layer.grads().map(<[T]>::to_vec));
        }
        out
    }

    pub fn param_shapes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes().iter().sum()
    }

    pub fn flatten(&self) -> Vec<T> {
        self.params().concat()
    }

    pub fn load_flat(&mut self, flat: &[T]) -> Result<()> {
        let total = self.param_count();
        if flat.len() != total {
            return Err(Error::shape("flat parameter vector", total, flat.len()));
        }
        let mut offset = 0;
        for p in self.params_mut() {
            p.copy_from_slice(&flat[offset..offset + p.len()]);
            offset += p.len();
        }
        Ok(())
    }

    /// Applies one optimizer step with the accumulated gradients, then
    /// clears them.
    pub fn apply_step(&mut self, optimizer: &mut crate::numeric::OptimizerState<T>) -> Result<()> {
        let grads = self.grads();
        let grad_refs: Vec<&[T]> = grads.iter().map(Vec::as_slice).collect();
        let mut params = self.params_mut();
        optimizer.step(&mut params, &grad_refs)?;
        self.zero_grad();
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        ModelParams {
            adapter: self.adapter.cast(),
            head: self.head.cast(),
        }
    }

    pub fn layers(&self) -> Vec<&LinearLayer<T>> {
        self.head.layers()
    }
}

/// Class probabilities for one sample.
pub fn model_forward<T: Real>(
    sample: &ModalitySample<T>,
    plan: &FusionPlan,
    params: &ModelParams<T>,
    training: bool,
    rng: &mut SeededRng,
) -> Result<DenseVector<T>> {
    if sample.regions.dim() != plan.d_image_raw {
        return Err(Error::shape("image regions", plan.d_image_raw, sample.regions.dim()));
    }
    let cache = params.forward(plan, &sample.to_input(), training, rng)?;
    Ok(cache.head.probs)
}
