use super::{DenseVector, Real, SeededRng};
use crate::error::{Error, Result};

/// Lower bound applied to probabilities before taking the log in
/// [`cross_entropy`].
pub const PROB_FLOOR: f64 = 1e-12;

pub fn relu<T: Real>(x: &DenseVector<T>) -> DenseVector<T> {
    DenseVector::new(x.as_slice().iter().map(|&v| v.max(T::zero())).collect())
}

/// Passes `grad_out` where the forward input was strictly positive.
pub fn relu_backward<T: Real>(x: &DenseVector<T>, grad_out: &DenseVector<T>) -> Result<DenseVector<T>> {
    if x.dim() != grad_out.dim() {
        return Err(Error::shape("relu backward", x.dim(), grad_out.dim()));
    }
    Ok(DenseVector::new(
        x.as_slice()
            .iter()
            .zip(grad_out.as_slice())
            .map(|(&v, &g)| if v > T::zero() { g } else { T::zero() })
            .collect(),
    ))
}

/// Max-subtracted softmax.
pub fn softmax<T: Real>(logits: &DenseVector<T>) -> DenseVector<T> {
    let xs = logits.as_slice();
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = xs.iter().map(|&v| (v - max).exp()).collect();
    let mut sum = T::zero();
    for &e in &exps {
        sum = sum + e;
    }
    DenseVector::new(exps.into_iter().map(|e| e / sum).collect())
}

/// `-ln(probs[target])`, with the probability floored at [`PROB_FLOOR`].
pub fn cross_entropy<T: Real>(probs: &DenseVector<T>, target: usize) -> Result<T> {
    if target >= probs.dim() {
        return Err(Error::Index {
            context: "cross-entropy target".into(),
            index: target,
            len: probs.dim(),
        });
    }
    Ok(-probs[target].max(T::lit(PROB_FLOOR)).ln())
}

/// Gradient of `cross_entropy(softmax(logits), target)` with respect to the
/// logits: `probs - onehot(target)`.
pub fn softmax_cross_entropy_grad<T: Real>(probs: &DenseVector<T>, target: usize) -> Result<DenseVector<T>> {
    if target >= probs.dim() {
        return Err(Error::Index {
            context: "cross-entropy target".into(),
            index: target,
            len: probs.dim(),
        });
    }
    let mut grad = probs.clone();
    grad[target] = grad[target] - T::one();
    Ok(grad)
}

/// Per-element multipliers applied by a dropout forward pass: `0` for
/// dropped elements and `1/(1-p)` for survivors.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask<T = f32>(Vec<T>);

impl<T: Real> DropoutMask<T> {
    pub fn factors(&self) -> &[T] {
        &self.0
    }
}

/// Inverted dropout. At inference, or with `p == 0`, the input is returned
/// unchanged together with an all-ones mask.
pub fn dropout<T: Real>(
    x: &DenseVector<T>,
    p: f64,
    training: bool,
    rng: &mut SeededRng,
) -> Result<(DenseVector<T>, DropoutMask<T>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::config(format!("dropout probability {p} outside [0, 1)")));
    }
    if !training || p == 0.0 {
        return Ok((x.clone(), DropoutMask(vec![T::one(); x.dim()])));
    }
    let keep_scale = T::lit(1.0 / (1.0 - p));
    let factors: Vec<T> = (0..x.dim())
        .map(|_| if rng.next_f64() < p { T::zero() } else { keep_scale })
        .collect();
    let out = x.as_slice().iter().zip(&factors).map(|(&v, &f)| v * f).collect();
    Ok((DenseVector::new(out), DropoutMask(factors)))
}

pub fn dropout_backward<T: Real>(mask: &DropoutMask<T>, grad_out: &DenseVector<T>) -> Result<DenseVector<T>> {
    if mask.0.len() != grad_out.dim() {
        return Err(Error::shape("dropout backward", mask.0.len(), grad_out.dim()));
    }
    Ok(DenseVector::new(
        grad_out.as_slice().iter().zip(&mask.0).map(|(&g, &f)| g * f).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::grad_check;

    fn v(xs: &[f64]) -> DenseVector<f64> {
        DenseVector::new(xs.to_vec())
    }

    #[test]
    fn relu_cases() {
        assert_eq!(relu(&v(&[-1.0, 0.0, 2.0])).as_slice(), &[0.0, 0.0, 2.0]);
        assert_eq!(relu(&v(&[-1.0, -3.0])).as_slice(), &[0.0, 0.0]);
        let g = relu_backward(&v(&[-1.0, 2.0]), &v(&[5.0, 5.0])).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 5.0]);
        assert_eq!(relu_backward(&v(&[0.0]), &v(&[5.0])).unwrap().as_slice(), &[0.0]);
    }

    #[test]
    fn softmax_cases() {
        let p = softmax(&v(&[0.0, 0.0, 0.0]));
        for &x in p.as_slice() {
            assert!((x - 1.0 / 3.0).abs() < 1e-12);
        }
        let p = softmax(&v(&[2f64.ln(), 0.0]));
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn softmax_shift_invariance_f32() {
        let x = DenseVector::new(vec![0.3f32, -1.2, 2.5, 0.0]);
        let shifted = DenseVector::new(x.as_slice().iter().map(|v| v + 100.0).collect());
        let (a, b) = (softmax(&x), softmax(&shifted));
        for i in 0..4 {
            assert!((a[i] - b[i]).abs() < 1e-6);
        }
    }

    #[test]
    fn cross_entropy_cases() {
        assert_eq!(cross_entropy(&v(&[1.0, 0.0, 0.0]), 0).unwrap(), 0.0);
        let uniform = v(&[1.0 / 3.0; 3]);
        for t in 0..3 {
            assert!((cross_entropy(&uniform, t).unwrap() - 3f64.ln()).abs() < 1e-12);
        }
        // Zero probability hits the floor instead of producing infinity.
        let floored = cross_entropy(&v(&[1.0, 0.0]), 1).unwrap();
        assert!((floored - (-(1e-12f64).ln())).abs() < 1e-9);
        assert!(matches!(cross_entropy(&uniform, 3), Err(Error::Index { index: 3, len: 3, .. })));
    }

    #[test]
    fn fused_gradient_matches_finite_differences() {
        let mut rng = SeededRng::new(5, "logits");
        let logits: Vec<f64> = (0..5).map(|_| rng.uniform(-2.0, 2.0)).collect();
        let report = grad_check(&logits, 1e-3, |z| {
            let probs = softmax(&v(z));
            Ok((cross_entropy(&probs, 3)?, softmax_cross_entropy_grad(&probs, 3)?.into_vec()))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }

    #[test]
    fn dropout_identities() {
        let x = DenseVector::new(vec![1.0f32, -2.0, 3.0]);
        let mut rng = SeededRng::new(1, "dropout:head:0");
        assert_eq!(dropout(&x, 0.0, true, &mut rng).unwrap().0, x);
        assert_eq!(dropout(&x, 0.5, false, &mut rng).unwrap().0, x);
        assert!(matches!(dropout(&x, 1.0, true, &mut rng), Err(Error::Config(_))));
    }

    #[test]
    fn dropout_monte_carlo_mean() {
        let n = 8;
        let ones = DenseVector::new(vec![1.0f64; n]);
        let mut sums = vec![0.0; n];
        let trials = 10_000;
        for t in 0..trials {
            let mut rng = SeededRng::new(99, &format!("dropout:mc:{t}"));
            let (out, _) = dropout(&ones, 0.3, true, &mut rng).unwrap();
            for (s, &o) in sums.iter_mut().zip(out.as_slice()) {
                *s += o;
            }
        }
        for s in sums {
            let mean = s / trials as f64;
            assert!((mean - 1.0).abs() < 0.02, "mean {mean}");
        }
    }

    #[test]
    fn dropout_backward_uses_mask() {
        let x = DenseVector::new(vec![1.0f64; 64]);
        let mut rng = SeededRng::new(2, "dropout:head:1");
        let (out, mask) = dropout(&x, 0.5, true, &mut rng).unwrap();
        let g = dropout_backward(&mask, &x).unwrap();
        assert_eq!(g, out);
        assert!(mask.factors().contains(&0.0));
        assert!(mask.factors().contains(&2.0));
    }
}
