use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{
    dropout, dropout_backward, relu, relu_backward, softmax, DenseVector, DropoutMask, LinearLayer, Real,
    SeededRng,
};

pub const DEFAULT_DROPOUT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadVariant {
    /// layer1 -> ReLU -> layer2 -> ReLU -> layer3 -> softmax.
    Basic,
    /// Dropout on the fused vector before layer1.
    WithDropout,
    /// Dropout -> extra FC -> ReLU inserted before layer3.
    WithMoreLayers,
}

impl HeadVariant {
    pub const ALL: [HeadVariant; 3] = [HeadVariant::Basic, HeadVariant::WithDropout, HeadVariant::WithMoreLayers];

    pub fn name(self) -> &'static str {
        match self {
            HeadVariant::Basic => "basic",
            HeadVariant::WithDropout => "with-dropout",
            HeadVariant::WithMoreLayers => "with-more-layers",
        }
    }
}

impl fmt::Display for HeadVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "basic" => Ok(HeadVariant::Basic),
            "with-dropout" | "dropout" => Ok(HeadVariant::WithDropout),
            "with-more-layers" | "more-layers" => Ok(HeadVariant::WithMoreLayers),
            other => Err(Error::config(format!("unknown head variant {other:?}"))),
        }
    }
}

/// Hidden widths of the classifier head. The extra layer of
/// [`HeadVariant::WithMoreLayers`] is `hidden2 -> hidden2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadWidths {
    pub hidden1: usize,
    pub hidden2: usize,
}

impl Default for HeadWidths {
    fn default() -> Self {
        HeadWidths {
            hidden1: 512,
            hidden2: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
pub struct ClassifierHead<T = f32> {
    pub layer1: LinearLayer<T>,
    pub layer2: LinearLayer<T>,
    pub layer3: LinearLayer<T>,
    pub variant: HeadVariant,
    pub dropout_p: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_layer: Option<LinearLayer<T>>,
}

/// Intermediate values of one head forward pass.
#[derive(Debug, Clone)]
pub struct HeadCache<T> {
    input: DenseVector<T>,
    input_mask: Option<DropoutMask<T>>,
    pre1: DenseVector<T>,
    act1: DenseVector<T>,
    pre2: DenseVector<T>,
    act2: DenseVector<T>,
    extra: Option<ExtraCache<T>>,
    pub logits: DenseVector<T>,
    pub probs: DenseVector<T>,
}

#[derive(Debug, Clone)]
struct ExtraCache<T> {
    mask: DropoutMask<T>,
    dropped: DenseVector<T>,
    pre: DenseVector<T>,
    act: DenseVector<T>,
}

impl<T: Real> HeadCache<T> {
    /// Smallest |pre-activation| over all ReLUs, a proxy for how close the
    /// forward pass sits to a kink.
    pub fn min_relu_margin(&self) -> f64 {
        let mut all = vec![&self.pre1, &self.pre2];
        if let Some(extra) = &self.extra {
            all.push(&extra.pre);
        }
        all.iter()
            .flat_map(|v| v.as_slice().iter())
            .map(|z| z.abs().as_f64())
            .fold(f64::INFINITY, f64::min)
    }
}

impl<T: Real> ClassifierHead<T> {
    pub fn init(
        d_fused: usize,
        classes: usize,
        widths: HeadWidths,
        variant: HeadVariant,
        dropout_p: f64,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if classes == 0 {
            return Err(Error::config("classifier needs at least one class"));
        }
        if widths.hidden1 == 0 || widths.hidden2 == 0 {
            return Err(Error::config("hidden widths must be positive"));
        }
        if !(0.0..1.0).contains(&dropout_p) {
            return Err(Error::config(format!("dropout probability {dropout_p} outside [0, 1)")));
        }
        let layer1 = LinearLayer::init_uniform(d_fused, widths.hidden1, rng);
        let layer2 = LinearLayer::init_uniform(widths.hidden1, widths.hidden2, rng);
        let extra_layer = (variant == HeadVariant::WithMoreLayers)
            .then(|| LinearLayer::init_uniform(widths.hidden2, widths.hidden2, rng));
        let layer3 = LinearLayer::init_uniform(widths.hidden2, classes, rng);
        Ok(ClassifierHead {
            layer1,
            layer2,
            layer3,
            variant,
            dropout_p,
            extra_layer,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.layer3.out_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.layer1.in_dim()
    }

    pub fn validate(&self, d_fused: usize) -> Result<()> {
        if self.layer1.in_dim() != d_fused {
            return Err(Error::shape("head layer1 input", d_fused, self.layer1.in_dim()));
        }
        if self.layer2.in_dim() != self.layer1.out_dim() {
            return Err(Error::shape("head layer2 input", self.layer1.out_dim(), self.layer2.in_dim()));
        }
        let before_last = match (&self.extra_layer, self.variant) {
            (Some(extra), HeadVariant::WithMoreLayers) => {
                if extra.in_dim() != self.layer2.out_dim() {
                    return Err(Error::shape("head extra layer input", self.layer2.out_dim(), extra.in_dim()));
                }
                extra.out_dim()
            }
            (None, HeadVariant::WithMoreLayers) => {
                return Err(Error::config("with-more-layers head is missing its extra layer"))
            }
            (Some(_), _) => return Err(Error::config("extra layer present on a head variant without one")),
            (None, _) => self.layer2.out_dim(),
        };
        if self.layer3.in_dim() != before_last {
            return Err(Error::shape("head layer3 input", before_last, self.layer3.in_dim()));
        }
        Ok(())
    }

    pub fn forward(&self, fused: &DenseVector<T>, training: bool, rng: &mut SeededRng) -> Result<HeadCache<T>> {
        let (input, input_mask) = if self.variant == HeadVariant::WithDropout {
            let (x, mask) = dropout(fused, self.dropout_p, training, rng)?;
            (x, Some(mask))
        } else {
            (fused.clone(), None)
        };
        let pre1 = self.layer1.forward(&input)?;
        let act1 = relu(&pre1);
        let pre2 = self.layer2.forward(&act1)?;
        let act2 = relu(&pre2);
        let (extra, last_in) = match &self.extra_layer {
            Some(layer) => {
                let (dropped, mask) = dropout(&act2, self.dropout_p, training, rng)?;
                let pre = layer.forward(&dropped)?;
                let act = relu(&pre);
                let out = act.clone();
                (Some(ExtraCache { mask, dropped, pre, act }), out)
            }
            None => (None, act2.clone()),
        };
        let logits = self.layer3.forward(&last_in)?;
        let probs = softmax(&logits);
        Ok(HeadCache {
            input,
            input_mask,
            pre1,
            act1,
            pre2,
            act2,
            extra,
            logits,
            probs,
        })
    }

    /// Backpropagates `grad_logits` and returns the gradient with respect to
    /// the fused input.
    pub fn backward(&mut self, cache: &HeadCache<T>, grad_logits: &DenseVector<T>) -> Result<DenseVector<T>> {
        let mut grad = match (&mut self.extra_layer, &cache.extra) {
            (Some(layer), Some(extra)) => {
                let g = self.layer3.backward(&extra.act, grad_logits)?;
                let g = relu_backward(&extra.pre, &g)?;
                let g = layer.backward(&extra.dropped, &g)?;
                dropout_backward(&extra.mask, &g)?
            }
            _ => self.layer3.backward(&cache.act2, grad_logits)?,
        };
        grad = relu_backward(&cache.pre2, &grad)?;
        grad = self.layer2.backward(&cache.act1, &grad)?;
        grad = relu_backward(&cache.pre1, &grad)?;
        grad = self.layer1.backward(&cache.input, &grad)?;
        if let Some(mask) = &cache.input_mask {
            grad = dropout_backward(mask, &grad)?;
        }
        Ok(grad)
    }

    /// Trainable layers in a fixed order: layer1, layer2, extra, layer3.
    pub fn layers(&self) -> Vec<&LinearLayer<T>> {
        let mut out = vec![&self.layer1, &self.layer2];
        out.extend(self.extra_layer.as_ref());
        out.push(&self.layer3);
        out
    }

    pub fn layers_mut(&mut self) -> Vec<&mut LinearLayer<T>> {
        let mut out = vec![&mut self.layer1, &mut self.layer2];
        out.extend(self.extra_layer.as_mut());
        out.push(&mut self.layer3);
        out
    }

    pub fn zero_grad(&mut self) {
        self.layers_mut().into_iter().for_each(LinearLayer::zero_grad);
    }

    pub fn cast<U: Real>(&self) -> ClassifierHead<U> {
        ClassifierHead {
            layer1: self.layer1.cast(),
            layer2: self.layer2.cast(),
            layer3: self.layer3.cast(),
            variant: self.variant,
            dropout_p: self.dropout_p,
            extra_layer: self.extra_layer.as_ref().map(LinearLayer::cast),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn head(variant: HeadVariant) -> ClassifierHead<f32> {
        let mut rng = SeededRng::new(1, "init");
        ClassifierHead::init(6, 4, HeadWidths { hidden1: 5, hidden2: 3 }, variant, 0.3, &mut rng).unwrap()
    }

    #[test]
    fn variants_have_expected_layers() {
        assert!(head(HeadVariant::Basic).extra_layer.is_none());
        let more = head(HeadVariant::WithMoreLayers);
        let extra = more.extra_layer.as_ref().unwrap();
        assert_eq!((extra.in_dim(), extra.out_dim()), (3, 3));
        assert_eq!(more.layers().len(), 4);
        for v in HeadVariant::ALL {
            head(v).validate(6).unwrap();
        }
        assert!(head(HeadVariant::Basic).validate(7).is_err());
    }

    #[test]
    fn inference_ignores_dropout() {
        let h = head(HeadVariant::WithDropout);
        let x = DenseVector::new(vec![0.5f32, -0.3, 1.0, 0.2, 0.0, -1.0]);
        let a = h.forward(&x, false, &mut SeededRng::new(1, "a")).unwrap();
        let b = h.forward(&x, false, &mut SeededRng::new(2, "b")).unwrap();
        assert_eq!(a.probs, b.probs);
        let sum: f32 = a.probs.as_slice().iter().sum();
        assert!((sum - 1.0).abs() < 1e-6);
    }

    #[test]
    fn variant_names_parse() {
        for v in HeadVariant::ALL {
            assert_eq!(v.name().parse::<HeadVariant>().unwrap(), v);
        }
        assert!("wide".parse::<HeadVariant>().is_err());
    }
}
