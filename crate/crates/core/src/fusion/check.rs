//! Finite-difference verification of the whole model's backward pass.
//!
//! Every combination of text-slot operator (inner = outer) and final-slot
//! operator is checked for each head variant. Checks run in `f64` through
//! the same generic code used for `f32` training; single precision cannot
//! resolve central differences to the required tolerance.
//!
//! ReLU and max-pooling are piecewise linear. A probe of size `eps` that
//! crosses a kink measures a one-sided slope, so scenarios whose base point
//! sits within `kink_margin` of a kink are redrawn.

use super::head::{HeadVariant, HeadWidths, DEFAULT_DROPOUT};
use super::model::{FusionInput, ModelParams};
use super::ops::FusionOpKind;
use super::plan::{build_plan, FusionPlan, PlanConfig};
use crate::error::{Error, Result};
use crate::numeric::{cross_entropy, grad_check, softmax_cross_entropy_grad, DenseVector, SeededRng};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckSuite {
    pub d_text: usize,
    pub d_image_raw: usize,
    pub classes: usize,
    pub widths: HeadWidths,
    pub batch: usize,
    pub eps: f64,
    pub tolerance: f64,
    pub kink_margin: f64,
    pub max_attempts: usize,
}

impl Default for GradCheckSuite {
    fn default() -> Self {
        GradCheckSuite {
            d_text: 8,
            d_image_raw: 32,
            classes: 3,
            widths: HeadWidths {
                hidden1: 16,
                hidden2: 12,
            },
            batch: 2,
            eps: 1e-3,
            tolerance: 1e-4,
            kink_margin: 5e-3,
            max_attempts: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckCase {
    pub plan: FusionPlan,
    pub variant: HeadVariant,
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    pub param_count: usize,
    /// Scenarios drawn before one cleared the kink margin.
    pub attempts: usize,
    pub passed: bool,
}

/// `(text slot, final slot)` pairs; the text slot fills both inner and outer.
pub fn plan_combinations() -> Vec<(FusionOpKind, FusionOpKind)> {
    let mut out = Vec::with_capacity(9);
    for text in FusionOpKind::ALL {
        for fin in FusionOpKind::ALL {
            out.push((text, fin));
        }
    }
    out
}

struct Scenario {
    params: ModelParams<f64>,
    inputs: Vec<FusionInput<f64>>,
    labels: Vec<usize>,
}

impl GradCheckSuite {
    pub fn run(&self, seed: u64) -> Result<Vec<GradCheckCase>> {
        let mut cases = Vec::new();
        for (text, fin) in plan_combinations() {
            for variant in HeadVariant::ALL {
                cases.push(self.check_case(seed, text, fin, variant)?);
            }
        }
        Ok(cases)
    }

    pub fn check_case(
        &self,
        seed: u64,
        text: FusionOpKind,
        fin: FusionOpKind,
        variant: HeadVariant,
    ) -> Result<GradCheckCase> {
        let plan = build_plan(&PlanConfig {
            slot_inner: text,
            slot_outer: text,
            slot_final: fin,
            d_text: self.d_text,
            d_text_second: None,
            d_image_raw: self.d_image_raw,
        })?;
        if !plan.adapter_feasible() {
            return Err(Error::config(format!(
                "plan {} needs an image width of at least {}",
                plan.label(),
                plan.adapter_target
            )));
        }
        let tag = format!("gradcheck:{}:{}", plan.label(), variant);
        for attempt in 0..self.max_attempts {
            let scenario = self.draw(&plan, variant, seed, &format!("{tag}:{attempt}"))?;
            if self.near_kink(&plan, &scenario)? {
                continue;
            }
            let flat = scenario.params.flatten();
            let report = grad_check(&flat, self.eps, |p| self.objective(&plan, &scenario, p))?;
            return Ok(GradCheckCase {
                plan,
                variant,
                max_rel_error: report.max_rel_error,
                worst_index: report.worst_index,
                param_count: flat.len(),
                attempts: attempt + 1,
                passed: report.max_rel_error < self.tolerance,
            });
        }
        Err(Error::config(format!(
            "no kink-free scenario for {} / {variant} in {} attempts",
            plan.label(),
            self.max_attempts
        )))
    }

    fn draw(&self, plan: &FusionPlan, variant: HeadVariant, seed: u64, label: &str) -> Result<Scenario> {
        let mut rng = SeededRng::new(seed, label);
        let params = ModelParams::init_with(plan, self.classes, self.widths, variant, DEFAULT_DROPOUT, &mut rng)?;
        let mut vector = |n: usize| DenseVector::new((0..n).map(|_| rng.uniform(-1.0, 1.0)).collect::<Vec<f64>>());
        let inputs: Vec<FusionInput<f64>> = (0..self.batch)
            .map(|_| FusionInput {
                title_first: vector(self.d_text),
                title_second: vector(self.d_text),
                desc_first: vector(self.d_text),
                desc_second: vector(self.d_text),
                image: vector(self.d_image_raw),
            })
            .collect();
        let labels = (0..self.batch).map(|_| rng.below(self.classes as u64) as usize).collect();
        Ok(Scenario { params, inputs, labels })
    }

    fn dropout_rng(label: &str) -> SeededRng {
        SeededRng::new(0, &format!("dropout:{label}:0"))
    }

    fn near_kink(&self, plan: &FusionPlan, scenario: &Scenario) -> Result<bool> {
        let mut rng = Self::dropout_rng("gradcheck");
        for input in &scenario.inputs {
            let cache = scenario.params.forward(plan, input, true, &mut rng)?;
            if cache.head.min_relu_margin() < self.kink_margin || cache.adapter.min_pool_gap < self.kink_margin {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Mean cross-entropy over the scenario batch and its gradient.
    fn objective(&self, plan: &FusionPlan, scenario: &Scenario, flat: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut params = scenario.params.clone();
        params.load_flat(flat)?;
        params.zero_grad();
        // Same dropout masks on every evaluation.
        let mut rng = Self::dropout_rng("gradcheck");
        let scale = 1.0 / scenario.inputs.len() as f64;
        let mut loss = 0.0;
        for (input, &label) in scenario.inputs.iter().zip(&scenario.labels) {
            let cache = params.forward(plan, input, true, &mut rng)?;
            loss += scale * cross_entropy(cache.probs(), label)?;
            let grad = softmax_cross_entropy_grad(cache.probs(), label)?.scale(scale);
            params.backward(plan, input, &cache, &grad)?;
        }
        let grads = params.grads().concat();
        Ok((loss, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nine_combinations() {
        let combos = plan_combinations();
        assert_eq!(combos.len(), 9);
        assert!(combos.contains(&(FusionOpKind::Concatenation, FusionOpKind::Average)));
    }

    #[test]
    fn single_case_passes() {
        let suite = GradCheckSuite::default();
        let case = suite
            .check_case(7, FusionOpKind::Average, FusionOpKind::Average, HeadVariant::WithMoreLayers)
            .unwrap();
        assert!(case.passed, "{case:?}");
        assert!(case.param_count > 9);
    }

    #[test]
    fn corrupted_gradient_would_fail() {
        // Sanity check that the tolerance has teeth: doubling one gradient
        // block must be reported.
        let suite = GradCheckSuite::default();
        let plan = build_plan(&PlanConfig::uniform(FusionOpKind::Average, 8, 32)).unwrap();
        let scenario = suite.draw(&plan, HeadVariant::Basic, 1, "corrupt").unwrap();
        let flat = scenario.params.flatten();
        let report = grad_check(&flat, suite.eps, |p| {
            let (loss, mut grad) = suite.objective(&plan, &scenario, p)?;
            grad.iter_mut().take(9).for_each(|g| *g *= 2.0);
            Ok((loss, grad))
        })
        .unwrap();
        assert!(report.max_rel_error > 0.1, "{report:?}");
    }
}
