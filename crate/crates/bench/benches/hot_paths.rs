use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use hct_bench::{experiment_dataset, experiment_network};
use hct_core::data::BalancedSampler;
use hct_core::fairness::{fairness_constraint_gradients, FairnessSpec};
use hct_core::loss::bce_gradient;
use hct_core::net::{backward, forward, GradientVector, ParameterVector};
use hct_core::optim::{AdamState, SslAlm, SslAlmConfig};
use hct_core::problems::make_qp_linear;
use hct_core::rng::rng_from_seed;

fn bench_forward_backward(c: &mut Criterion) {
    let (spec, params) = experiment_network();
    let ds = experiment_dataset();
    let sampler = BalancedSampler::new(&ds, 16, 0).unwrap();
    let batch = sampler.sample(0).unwrap();

    c.bench_function("forward_9_64_32_batch32", |b| {
        b.iter(|| forward(&spec, black_box(&params), &batch.features).unwrap())
    });

    let logits = forward(&spec, &params, &batch.features).unwrap();
    let upstream = bce_gradient(&logits, &batch.labels).unwrap();
    c.bench_function("backward_9_64_32_batch32", |b| {
        b.iter(|| backward(&spec, black_box(&params), &batch.features, &upstream).unwrap())
    });

    let fairness = FairnessSpec::new(ds.group_count, 0.05).unwrap();
    c.bench_function("constraint_jacobian_batch32", |b| {
        b.iter(|| fairness_constraint_gradients(&fairness, &spec, black_box(&params), &batch).unwrap())
    });
}

fn bench_optimizer_steps(c: &mut Criterion) {
    let (spec, params) = experiment_network();
    let grad = GradientVector::from_vec(vec![1e-3; spec.param_count()]);
    c.bench_function("adam_step_2753_params", |b| {
        let mut adam = AdamState::new(params.clone());
        b.iter(|| adam.step(black_box(&grad)).unwrap())
    });

    let problem = make_qp_linear(10, &[1.0; 10], 1.0, 0.01).unwrap();
    c.bench_function("ssl_alm_iteration_qp10", |b| {
        let mut opt = SslAlm::new(ParameterVector::zeros(10), 1, SslAlmConfig::default()).unwrap();
        let mut rng = rng_from_seed(1);
        b.iter(|| {
            let g = problem.sampled_objective_gradient(&opt.state.x, &mut rng);
            let c1 = problem.sampled_constraint_values(&opt.state.x, &mut rng);
            let jac: Vec<GradientVector> = problem
                .sampled_constraint_jacobian(&opt.state.x, &mut rng)
                .into_iter()
                .map(GradientVector::from_vec)
                .collect();
            let c2 = problem.sampled_constraint_values(&opt.state.x, &mut rng);
            opt.iteration(&g, &c1, &jac, &c2).unwrap()
        })
    });
}

fn bench_sampler(c: &mut Criterion) {
    let ds = experiment_dataset();
    let sampler = BalancedSampler::new(&ds, 16, 3).unwrap();
    c.bench_function("balanced_minibatch_32_of_2000", |b| {
        let mut step = 0usize;
        b.iter(|| {
            step += 1;
            sampler.sample(black_box(step)).unwrap()
        })
    });
}

criterion_group!(
    benches,
    bench_forward_backward,
    bench_optimizer_steps,
    bench_sampler
);
criterion_main!(benches);
