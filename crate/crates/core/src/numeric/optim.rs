use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    AdamW,
}

impl std::str::FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "adamw" => Ok(OptimizerKind::AdamW),
            other => Err(Error::config(format!("unknown optimizer {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl OptimizerConfig {
    pub fn adam(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::Adam,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }

    pub fn adamw(lr: f64) -> Self {
        OptimizerConfig {
            kind: OptimizerKind::AdamW,
            weight_decay: 0.01,
            ..Self::adam(lr)
        }
    }

    /// Kind-appropriate defaults for the given learning rate.
    pub fn for_kind(kind: OptimizerKind, lr: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Self::adam(lr),
            OptimizerKind::AdamW => Self::adamw(lr),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::adam(1e-3)
    }
}

/// Adam / AdamW moment buffers for a fixed list of parameter tensors.
#[derive(Debug, Clone)]
pub struct OptimizerState<T = f32> {
    config: OptimizerConfig,
    t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> OptimizerState<T> {
    /// `shapes` gives the flat length of each parameter tensor, in the order
    /// they will be passed to [`OptimizerState::step`].
    pub fn new(config: OptimizerConfig, shapes: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(OptimizerState {
            config,
            t: 0,
            m: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: shapes.iter().map(|&n| vec![T::zero(); n]).collect(),
        })
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [&mut [T]], grads: &[&[T]]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::shape("optimizer parameter count", self.m.len(), params.len()));
        }
        if grads.len() != params.len() {
            return Err(Error::shape("optimizer gradient count", params.len(), grads.len()));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() {
                return Err(Error::shape(format!("optimizer parameter {i}"), self.m[i].len(), p.len()));
            }
            if g.len() != p.len() {
                return Err(Error::shape(format!("optimizer gradient {i}"), p.len(), g.len()));
            }
        }

        self.t += 1;
        let c = &self.config;
        let beta1 = T::lit(c.beta1);
        let beta2 = T::lit(c.beta2);
        let one_minus_beta1 = T::one() - beta1;
        let one_minus_beta2 = T::one() - beta2;
        let bias1 = T::one() - beta1.powi(self.t as i32);
        let bias2 = T::one() - beta2.powi(self.t as i32);
        let lr = T::lit(c.lr);
        let eps = T::lit(c.eps);
        let decay = T::lit(c.weight_decay);
        let coupled_decay = c.kind == OptimizerKind::Adam && c.weight_decay > 0.0;
        let decoupled_decay = c.kind == OptimizerKind::AdamW && c.weight_decay > 0.0;

        for ((param, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            for j in 0..param.len() {
                let theta = param[j];
                let mut g = grad[j];
                if coupled_decay {
                    g = g + decay * theta;
                }
                m[j] = beta1 * m[j] + one_minus_beta1 * g;
                v[j] = beta2 * v[j] + one_minus_beta2 * g * g;
                let m_hat = m[j] / bias1;
                let v_hat = v[j] / bias2;
                let mut update = m_hat / (v_hat.sqrt() + eps);
                if decoupled_decay {
                    update = update + decay * theta;
                }
                param[j] = theta - lr * update;
            }
        }
        Ok(())
    }
}
