use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{macro_f1, ConfusionMatrix};
use super::model_file::TrainedModel;
use super::report::MetricsReport;
use crate::dataset::{validate, Dataset, Split};
use crate::error::{Error, Result};
use crate::fusion::{
    build_plan, FusionInput, FusionPlan, HeadVariant, HeadWidths, Modality, ModelParams, PlanConfig, DEFAULT_DROPOUT,
};
use crate::numeric::{cross_entropy, softmax_cross_entropy_grad, OptimizerConfig, OptimizerState, SeededRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub plan: PlanConfig,
    pub variant: HeadVariant,
    pub widths: HeadWidths,
    pub dropout_p: f64,
    /// Modalities zeroed for every sample, for unimodal baselines.
    pub mask: Vec<Modality>,
}

impl TrainConfig {
    pub fn new(plan: PlanConfig) -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            optimizer: OptimizerConfig::default(),
            seed: 0,
            plan,
            variant: HeadVariant::Basic,
            widths: HeadWidths::default(),
            dropout_p: DEFAULT_DROPOUT,
            mask: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        self.optimizer.validate()
    }
}

/// Per-epoch training statistics. Train accuracy is measured on the
/// training-mode forward passes of the epoch itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub val_macro_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the highest validation macro-F1.
    pub model: TrainedModel,
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    /// Validation report at the best epoch, with the full loss curve.
    pub report: MetricsReport,
}

impl TrainOutcome {
    pub fn loss_curve(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.train_loss).collect()
    }

    /// Per-epoch history and the selected epoch as one JSON document.
    pub fn history_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct History<'a> {
            best_epoch: usize,
            epochs: &'a [EpochRecord],
        }
        Ok(serde_json::to_string_pretty(&History {
            best_epoch: self.best_epoch,
            epochs: &self.history,
        })?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub loss: f64,
    pub accuracy: f64,
}

/// Model inputs and labels for one split, with the mask already applied.
#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub inputs: Vec<FusionInput<f32>>,
    pub labels: Vec<usize>,
}

impl PreparedSplit {
    pub fn from_dataset(dataset: &Dataset, split: Split, mask: &[Modality]) -> Result<Self> {
        Self::from_indices(dataset, &dataset.manifest.indices(split), mask)
    }

    pub fn from_indices(dataset: &Dataset, indices: &[usize], mask: &[Modality]) -> Result<Self> {
        let mut inputs = Vec::with_capacity(indices.len());
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            inputs.push(dataset.input(i)?.masked(mask));
            labels.push(dataset.manifest.rows[i].label);
        }
        Ok(PreparedSplit { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// Stepwise trainer. [`train`] drives it epoch by epoch with validation
/// checkpointing; it is exposed for callers that need finer control.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: TrainConfig,
    plan: FusionPlan,
    params: ModelParams<f32>,
    optimizer: OptimizerState<f32>,
    data: PreparedSplit,
    epoch: usize,
    step: u64,
}

impl Trainer {
    pub fn new(config: TrainConfig, classes: usize, data: PreparedSplit) -> Result<Self> {
        config.validate()?;
        if data.is_empty() {
            return Err(Error::config("training split is empty"));
        }
        if let Some(&bad) = data.labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Index {
                context: "training label".into(),
                index: bad,
                len: classes,
            });
        }
        let plan = build_plan(&config.plan)?;
        let params = ModelParams::init_with(
            &plan,
            classes,
            config.widths,
            config.variant,
            config.dropout_p,
            &mut SeededRng::new(config.seed, "init"),
        )?;
        let optimizer = OptimizerState::new(config.optimizer, &params.param_shapes())?;
        Ok(Trainer {
            config,
            plan,
            params,
            optimizer,
            data,
            epoch: 0,
            step: 0,
        })
    }

    pub fn plan(&self) -> &FusionPlan {
        &self.plan
    }

    pub fn params(&self) -> &ModelParams<f32> {
        &self.params
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    pub fn steps_done(&self) -> u64 {
        self.step
    }

    /// One pass over the training data: seeded shuffle, mini-batches with
    /// the last partial batch kept, batch-mean cross-entropy.
    pub fn run_epoch(&mut self) -> Result<EpochStats> {
        self.epoch += 1;
        let mut order: Vec<usize> = (0..self.data.len()).collect();
        SeededRng::new(self.config.seed, &format!("shuffle:{}", self.epoch)).shuffle(&mut order);

        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for batch in order.chunks(self.config.batch_size) {
            self.step += 1;
            let mut rng = SeededRng::new(self.config.seed, &format!("dropout:head:{}", self.step));
            let inv = 1.0 / batch.len() as f32;
            let mut batch_loss = 0.0f64;
            for &i in batch {
                let input = &self.data.inputs[i];
                let label = self.data.labels[i];
                let cache = self.params.forward(&self.plan, input, true, &mut rng)?;
                let probs = cache.probs();
                batch_loss += cross_entropy(probs, label)? as f64;
                if probs.argmax() == Some(label) {
                    correct += 1;
                }
                let grad = softmax_cross_entropy_grad(probs, label)?.scale(inv);
                self.params.backward(&self.plan, input, &cache, &grad)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite(format!("training loss at step {}", self.step)));
            }
            loss_sum += batch_loss;
            self.params.apply_step(&mut self.optimizer)?;
        }
        Ok(EpochStats {
            loss: loss_sum / self.data.len() as f64,
            accuracy: correct as f64 / self.data.len() as f64,
        })
    }

    pub fn into_model(self) -> TrainedModel {
        TrainedModel {
            plan: self.plan,
            params: self.params,
            mask: self.config.mask,
        }
    }

    pub fn model(&self) -> TrainedModel {
        TrainedModel {
            plan: self.plan,
            params: self.params.clone(),
            mask: self.config.mask.clone(),
        }
    }
}

/// Checks that the dataset is valid and matches the plan's input widths.
pub fn check_compatible(plan: &PlanConfig, dataset: &Dataset) -> Result<()> {
    let report = validate(dataset);
    if let Some(v) = report.violations.first() {
        return Err(Error::config(format!(
            "dataset has {} violation(s); first: {v}",
            report.violations.len()
        )));
    }
    let d = &dataset.descriptor;
    let second = plan.d_text_second.unwrap_or(plan.d_text);
    if d.d_text != plan.d_text || d.d_text != second {
        return Err(Error::shape("dataset text width", plan.d_text, d.d_text));
    }
    if d.d_image_raw != plan.d_image_raw {
        return Err(Error::shape("dataset image width", plan.d_image_raw, d.d_image_raw));
    }
    Ok(())
}

/// Trains on the `train` split and keeps the parameters of the epoch with
/// the best validation macro-F1; ties keep the earliest epoch.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    check_compatible(&config.plan, dataset)?;
    let train_data = PreparedSplit::from_dataset(dataset, Split::Train, &config.mask)?;
    let val_data = PreparedSplit::from_dataset(dataset, Split::Val, &config.mask)?;
    if val_data.is_empty() {
        return Err(Error::config("validation split is empty"));
    }
    let classes = dataset.descriptor.classes;
    let mut trainer = Trainer::new(config.clone(), classes, train_data)?;

    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, TrainedModel, ConfusionMatrix)> = None;
    for _ in 0..config.epochs {
        let stats = trainer.run_epoch()?;
        let confusion = confusion_for(trainer.plan(), trainer.params(), &val_data, classes)?;
        let f1 = macro_f1(&confusion)?;
        history.push(EpochRecord {
            epoch: trainer.epochs_done(),
            train_loss: stats.loss,
            train_accuracy: stats.accuracy,
            val_accuracy: confusion.accuracy(),
            val_macro_f1: f1,
        });
        if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
            best = Some((f1, trainer.model(), confusion));
        }
    }
    let (best_f1, model, confusion) = best.expect("at least one epoch");
    let best_epoch = history
        .iter()
        .find(|r| r.val_macro_f1 == best_f1)
        .map(|r| r.epoch)
        .expect("best epoch is in the history");
    let loss_curve = history.iter().map(|r| r.train_loss).collect();
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        report: MetricsReport::from_confusion(confusion, loss_curve)?,
    })
}

/// Inference-mode predictions in input order; ties resolve to the lowest
/// class index.
pub fn predict(plan: &FusionPlan, params: &ModelParams<f32>, inputs: &[FusionInput<f32>]) -> Result<Vec<usize>> {
    inputs
        .par_iter()
        .map(|input| {
            let mut rng = SeededRng::new(0, "inference");
            let cache = params.forward(plan, input, false, &mut rng)?;
            cache
                .probs()
                .argmax()
                .ok_or_else(|| Error::config("model has no classes"))
        })
        .collect()
}

pub fn confusion_for(
    plan: &FusionPlan,
    params: &ModelParams<f32>,
    data: &PreparedSplit,
    classes: usize,
) -> Result<ConfusionMatrix> {
    let predictions = predict(plan, params, &data.inputs)?;
    ConfusionMatrix::from_predictions(classes, &data.labels, &predictions)
}

/// Evaluates a trained model on one split of `dataset`, applying the mask
/// the model was trained with.
pub fn evaluate(model: &TrainedModel, dataset: &Dataset, split: Split) -> Result<MetricsReport> {
    check_compatible(&model.plan.config(), dataset)?;
    model.params.validate(&model.plan)?;
    let data = PreparedSplit::from_dataset(dataset, split, &model.mask)?;
    if data.is_empty() {
        return Err(Error::config(format!("{} split is empty", split.as_str())));
    }
    let confusion = confusion_for(&model.plan, &model.params, &data, model.params.n_classes())?;
    MetricsReport::from_confusion(confusion, Vec::new())
}
