use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hierfuse::dataset::{split_dataset, synth_generate};
use hierfuse::fusion::{region_average, DEFAULT_KERNEL_LEN};
use hierfuse::numeric::softmax_cross_entropy_grad;
use hierfuse::train::{PreparedSplit, Trainer};
use hierfuse::*;

fn random_vector(rng: &mut SeededRng, dim: usize) -> DenseVector<f32> {
    DenseVector::new((0..dim).map(|_| rng.normal() as f32).collect())
}

fn fusion_ops(c: &mut Criterion) {
    let mut rng = SeededRng::new(1, "bench");
    let a = random_vector(&mut rng, 768);
    let b = random_vector(&mut rng, 768);
    let mut group = c.benchmark_group("fuse_768");
    for kind in FusionOpKind::ALL {
        group.bench_with_input(BenchmarkId::from_parameter(kind), &kind, |bench, &kind| {
            bench.iter(|| fuse(kind, black_box(&a), black_box(&b)).unwrap())
        });
    }
    group.finish();
}

fn image_path(c: &mut Criterion) {
    let mut rng = SeededRng::new(2, "bench");
    let values = (0..256 * 2048).map(|_| rng.normal() as f32).collect();
    let stack = RegionStack::new(DenseMatrix::new(256, 2048, values).unwrap()).unwrap();
    c.bench_function("region_average_256x2048", |bench| bench.iter(|| region_average(black_box(&stack))));

    let adapter = ImageAdapter::<f32>::init_uniform(DEFAULT_KERNEL_LEN, 2048, 768, &mut rng).unwrap();
    let pooled = region_average(&stack);
    c.bench_function("adapter_forward_2048_to_768", |bench| {
        bench.iter(|| adapter.forward(black_box(&pooled)).unwrap())
    });
}

fn model_step(c: &mut Criterion) {
    let plan = build_plan(&PlanConfig::uniform(FusionOpKind::Average, 768, 2048)).unwrap();
    let mut params = ModelParams::<f32>::init(&plan, 27, HeadWidths::default(), HeadVariant::Basic, 3).unwrap();
    let mut rng = SeededRng::new(3, "bench");
    let input = FusionInput {
        title_first: random_vector(&mut rng, 768),
        title_second: random_vector(&mut rng, 768),
        desc_first: random_vector(&mut rng, 768),
        desc_second: random_vector(&mut rng, 768),
        image: random_vector(&mut rng, 2048),
    };
    c.bench_function("model_forward_avg_768", |bench| {
        bench.iter(|| params.forward(&plan, black_box(&input), false, &mut rng).unwrap())
    });
    c.bench_function("model_forward_backward_avg_768", |bench| {
        bench.iter(|| {
            let cache = params.forward(&plan, &input, true, &mut rng).unwrap();
            let grad = softmax_cross_entropy_grad(cache.probs(), 5).unwrap();
            params.backward(&plan, &input, &cache, &grad).unwrap();
        })
    });
}

fn training_epoch(c: &mut Criterion) {
    let spec = SyntheticSpec::default();
    let mut ds = synth_generate(&spec, 1).unwrap();
    ds.manifest = split_dataset(&ds.manifest, 0.1, 1).unwrap();
    let data = PreparedSplit::from_dataset(&ds, Split::Train, &[]).unwrap();
    let config = TrainConfig::new(PlanConfig::uniform(FusionOpKind::Average, spec.d_text, spec.d_image_raw));
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    group.bench_function("synthetic_epoch", |bench| {
        bench.iter_batched(
            || Trainer::new(config.clone(), spec.classes(), data.clone()).unwrap(),
            |mut trainer| trainer.run_epoch().unwrap(),
            criterion::BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, fusion_ops, image_path, model_step, training_epoch);
criterion_main!(benches);
