//! Micro-benchmarks for the per-iteration cost drivers: posterior cache
//! construction, marginal-likelihood gradients, collapsed Gibbs sweeps,
//! mixture prediction, and acquisition optimization.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rambo_core::{
    ei_mixture, gibbs_sweep, incumbent_input, levy, log_marginal_gradient, mixture_components,
    normalize, optimize_acquisition, piecewise_regime_1d, piecewise_segment, AcquisitionContext,
    BaseMeasure, GibbsOptions, GpPosteriorCache, KernelHyperparams, MixturePrediction,
    ObservationSet, RegimeState,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn theta(sf2: f64, ell: f64, sn2: f64) -> KernelHyperparams {
    KernelHyperparams::new(sf2, ell, sn2).unwrap()
}

/// Seeded uniform design on the 2-D Levy domain.
fn levy_dataset(n: usize) -> ObservationSet {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut data = ObservationSet::empty(vec![(-10.0, 10.0); 2]).unwrap();
    for _ in 0..n {
        let x: Vec<f64> = (0..2).map(|_| rng.random_range(-10.0..10.0)).collect();
        let y = levy(&x).unwrap();
        data.push(x, y).unwrap();
    }
    data
}

/// The standardized piecewise-regime dataset: 60 evenly spaced observations.
fn piecewise_dataset() -> (ObservationSet, Vec<usize>) {
    let mut raw = ObservationSet::empty(vec![(-1.0, 1.0)]).unwrap();
    let mut segments = Vec::with_capacity(60);
    for i in 0..60 {
        let x = -1.0 + 2.0 * i as f64 / 59.0;
        raw.push(vec![x], piecewise_regime_1d(x).unwrap()).unwrap();
        segments.push(piecewise_segment(x));
    }
    let (data, _) = normalize(&raw).unwrap();
    (data, segments)
}

/// Ground-truth partition with one hyperparameter set per segment.
fn segmented_state(data: &ObservationSet, segments: &[usize]) -> RegimeState {
    let thetas = vec![theta(1.0, 0.5, 0.1); 3];
    RegimeState::from_partition(data, segments.to_vec(), thetas, 0.4).unwrap()
}

fn bench_posterior_build(c: &mut Criterion) {
    let mut group = c.benchmark_group("posterior_build");
    for n in [40usize, 80] {
        let data = levy_dataset(n);
        let th = theta(1.0, 2.0, 0.1);
        group.bench_function(format!("n{n}"), |b| {
            b.iter(|| {
                GpPosteriorCache::build(black_box(&data), (0..n).collect(), th).unwrap()
            })
        });
    }
    group.finish();
}

fn bench_log_marginal_gradient(c: &mut Criterion) {
    let data = levy_dataset(60);
    let members: Vec<usize> = (0..60).collect();
    let th = theta(1.0, 2.0, 0.1);
    c.bench_function("log_marginal_gradient/n60", |b| {
        b.iter(|| log_marginal_gradient(black_box(&data), &members, &th).unwrap())
    });
}

fn bench_gibbs_sweep(c: &mut Criterion) {
    let (data, _) = piecewise_dataset();
    let g0 = BaseMeasure::calibrated(1);
    let opts = GibbsOptions::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut state = RegimeState::single_regime(&data, theta(1.0, 0.5, 0.1), 0.4).unwrap();
    for _ in 0..50 {
        gibbs_sweep(&mut state, &data, &g0, &opts, &mut rng).unwrap();
    }
    c.bench_function("gibbs_sweep/n60", |b| {
        b.iter_batched(
            || (state.clone(), rng.clone()),
            |(mut s, mut r)| gibbs_sweep(&mut s, &data, &g0, &opts, &mut r).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_mixture_predict(c: &mut Criterion) {
    let (data, segments) = piecewise_dataset();
    let state = segmented_state(&data, &segments);
    c.bench_function("mixture_components/k3_n60", |b| {
        b.iter(|| mixture_components(black_box(&state), &data, &[0.2], None))
    });
}

fn bench_acquisition_closed_forms(c: &mut Criterion) {
    let pred = MixturePrediction {
        weights: vec![0.3, 0.25, 0.2, 0.15, 0.1],
        means: vec![0.1, -0.4, 0.7, 0.0, -1.2],
        variances: vec![0.5, 1.1, 0.2, 0.8, 1.9],
        mean: 0.0,
        variance: 1.0,
    };
    let ctx = AcquisitionContext::new(0.5).unwrap();
    c.bench_function("ei_mixture/k5", |b| {
        b.iter(|| ei_mixture(black_box(&pred), &ctx))
    });
}

fn bench_optimize_acquisition(c: &mut Criterion) {
    let (data, segments) = piecewise_dataset();
    let state = segmented_state(&data, &segments);
    let ctx = AcquisitionContext::new(
        data.outputs().iter().copied().fold(f64::NEG_INFINITY, f64::max),
    )
    .unwrap();
    let field = |x: &[f64]| ei_mixture(&mixture_components(&state, &data, x, None), &ctx);
    let bounds = vec![(-1.0, 1.0)];
    let incumbent = incumbent_input(&data);
    let mut group = c.benchmark_group("optimize_acquisition");
    group.sample_size(20);
    group.bench_function("ei_restarts5", |b| {
        b.iter_batched(
            || ChaCha8Rng::seed_from_u64(23),
            |mut r| optimize_acquisition(&field, &bounds, 5, &state, &data, &incumbent, &mut r),
            BatchSize::SmallInput,
        )
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_posterior_build,
    bench_log_marginal_gradient,
    bench_gibbs_sweep,
    bench_mixture_predict,
    bench_acquisition_closed_forms,
    bench_optimize_acquisition
);
criterion_main!(benches);
