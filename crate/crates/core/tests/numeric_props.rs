use hierfuse::numeric::{
    cross_entropy, grad_check, softmax, softmax_cross_entropy_grad, OptimizerConfig, OptimizerState,
};
use hierfuse::{DenseMatrix, DenseVector, LinearLayer, SeededRng};
use proptest::collection::vec;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn softmax_strictly_positive_in_double_precision(z in vec(-80f64..80.0, 1..40)) {
        let p = softmax(&DenseVector::new(z));
        prop_assert!(p.as_slice().iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn softmax_shift_by_exact_offsets_is_bitwise(
        eighths in vec(-640i32..640, 1..30),
        shift in -100i32..100,
    ) {
        let z: Vec<f32> = eighths.iter().map(|&k| k as f32 / 8.0).collect();
        let moved: Vec<f32> = z.iter().map(|&x| x + shift as f32).collect();
        let a = softmax(&DenseVector::new(z));
        let b = softmax(&DenseVector::new(moved));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn adam_and_adamw_agree_without_decay(
        init in vec(-2f32..2.0, 1..8),
        steps in vec(vec(-3f32..3.0, 8), 1..12),
    ) {
        let n = init.len();
        let mut adam_cfg = OptimizerConfig::adam(1e-2);
        adam_cfg.weight_decay = 0.0;
        let mut adamw_cfg = OptimizerConfig::adamw(1e-2);
        adamw_cfg.weight_decay = 0.0;
        let mut a = OptimizerState::<f32>::new(adam_cfg, &[n]).unwrap();
        let mut w = OptimizerState::<f32>::new(adamw_cfg, &[n]).unwrap();
        let (mut pa, mut pw) = (init.clone(), init);
        for g in &steps {
            a.step(&mut [pa.as_mut_slice()], &[&g[..n]]).unwrap();
            w.step(&mut [pw.as_mut_slice()], &[&g[..n]]).unwrap();
        }
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        prop_assert_eq!(bits(&pa), bits(&pw));
    }

    #[test]
    fn linear_forward_is_additive(
        seed in any::<u64>(),
        (x1, x2) in (1usize..12).prop_flat_map(|d| (vec(-1f32..1.0, d), vec(-1f32..1.0, d))),
        out in 1usize..10,
    ) {
        let layer = LinearLayer::<f32>::init_uniform(x1.len(), out, &mut SeededRng::new(seed, "init"));
        let f = |x: &[f32]| layer.forward(&DenseVector::new(x.to_vec())).unwrap();
        let zero = f(&vec![0.0; x1.len()]);
        let sum: Vec<f32> = x1.iter().zip(&x2).map(|(a, b)| a + b).collect();
        let lhs = f(&sum).sub(&zero).unwrap();
        let rhs = f(&x1).sub(&zero).unwrap().add(&f(&x2).sub(&zero).unwrap()).unwrap();
        for (l, r) in lhs.as_slice().iter().zip(rhs.as_slice()) {
            let scale = l.abs().max(r.abs()).max(1.0);
            prop_assert!((l - r).abs() / scale <= 1e-5, "{} vs {}", l, r);
        }
    }
}

#[test]
fn fused_gradient_matches_finite_differences_on_27_classes() {
    let mut rng = SeededRng::new(4, "logits");
    for target in [0usize, 13, 26] {
        let logits: Vec<f64> = (0..27).map(|_| rng.normal() * 2.0).collect();
        let report = grad_check(&logits, 1e-3, |z| {
            let probs = softmax(&DenseVector::new(z.to_vec()));
            let loss = cross_entropy(&probs, target)?;
            Ok((loss, softmax_cross_entropy_grad(&probs, target)?.into_vec()))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "target {target}: {}", report.max_rel_error);
    }
}

#[test]
fn linear_layer_gradients_match_finite_differences() {
    let mut rng = SeededRng::new(8, "init");
    let layer = LinearLayer::<f64>::init_uniform(3, 2, &mut rng);
    let x = DenseVector::new(vec![0.3, -1.2, 0.7]);
    let mut params = layer.weight.as_slice().to_vec();
    params.extend_from_slice(layer.bias.as_slice());
    let report = grad_check(&params, 1e-3, |p| {
        let mut l = LinearLayer::from_parts(
            DenseMatrix::new(2, 3, p[..6].to_vec())?,
            DenseVector::new(p[6..].to_vec()),
        )?;
        let y = l.forward(&x)?;
        let loss = 0.5 * y.as_slice().iter().map(|v| v * v).sum::<f64>();
        l.backward(&x, &y)?;
        let mut grad = l.grad_weight().unwrap().as_slice().to_vec();
        grad.extend_from_slice(l.grad_bias().unwrap().as_slice());
        Ok((loss, grad))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{}", report.max_rel_error);
}
