//! Shared oracle helpers for the integration suites: brute-force partition
//! enumeration with an LU-based marginal (independent of the production
//! Cholesky path) and direct Gaussian-mixture samplers.

#![allow(dead_code)] // each test target compiles its own copy and uses a subset

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rambo_core::{mixture_moments, se_kernel, KernelHyperparams, MixturePrediction, ObservationSet};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

pub fn theta(sf2: f64, ell: f64, sn2: f64) -> KernelHyperparams {
    KernelHyperparams::new(sf2, ell, sn2).unwrap()
}

/// All set partitions of {0..n-1} as restricted growth strings.
pub fn all_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(i: usize, used: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for v in 0..=used {
            cur[i] = v;
            rec(i + 1, used.max(v + 1), cur, out);
        }
    }
    let mut out = Vec::new();
    rec(0, 0, &mut vec![0; n], &mut out);
    out
}

/// Relabel assignments into first-appearance order so partitions compare
/// structurally.
pub fn canonical(z: &[usize]) -> Vec<usize> {
    let mut map: HashMap<usize, usize> = HashMap::new();
    z.iter()
        .map(|&l| {
            let next = map.len();
            *map.entry(l).or_insert(next)
        })
        .collect()
}

/// Dense MVN log-density of a block's outputs under the block GP marginal,
/// computed with an LU factorization rather than the production Cholesky
/// path.
pub fn block_logml_lu(data: &ObservationSet, members: &[usize], th: &KernelHyperparams) -> f64 {
    let n = members.len();
    let mut k = DMatrix::zeros(n, n);
    for (a, &i) in members.iter().enumerate() {
        for (b, &j) in members.iter().enumerate() {
            k[(a, b)] = se_kernel(data.input(i), data.input(j), th)
                + if a == b { th.noise_variance() } else { 0.0 };
        }
    }
    let y = DVector::from_iterator(n, members.iter().map(|&i| data.output(i)));
    let lu = k.clone().lu();
    let sol = lu.solve(&y).expect("covariance is invertible");
    -0.5 * y.dot(&sol) - 0.5 * lu.determinant().ln() - 0.5 * n as f64 * LN_2PI
}

/// Unnormalized log posterior of a partition: block marginals plus the
/// exchangeable partition prior α^K · Π (|B|−1)!.
pub fn partition_log_post(
    data: &ObservationSet,
    rgs: &[usize],
    th: &KernelHyperparams,
    alpha: f64,
) -> f64 {
    let k = rgs.iter().max().unwrap() + 1;
    let mut lp = k as f64 * alpha.ln();
    for block in 0..k {
        let members: Vec<usize> = (0..rgs.len()).filter(|&i| rgs[i] == block).collect();
        lp += statrs::function::gamma::ln_gamma(members.len() as f64);
        lp += block_logml_lu(data, &members, th);
    }
    lp
}

/// Normalized exact partition posterior over all partitions of `data`.
pub fn enumerate_partition_posterior(
    data: &ObservationSet,
    th: &KernelHyperparams,
    alpha: f64,
) -> HashMap<Vec<usize>, f64> {
    let parts = all_partitions(data.len());
    let log_post: Vec<f64> =
        parts.iter().map(|p| partition_log_post(data, p, th, alpha)).collect();
    let max = log_post.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_post.iter().map(|l| (l - max).exp()).collect();
    let z: f64 = weights.iter().sum();
    parts.into_iter().zip(weights.iter().map(|w| w / z)).collect()
}

/// A random mixture with 1–4 components, normalized weights, standard-normal
/// means, and variances in [0.05, 2).
pub fn random_mixture(rng: &mut ChaCha8Rng) -> MixturePrediction {
    let k = rng.random_range(1..=4);
    let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let means: Vec<f64> = (0..k)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            z
        })
        .collect();
    let variances: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..2.0)).collect();
    let (mean, variance) = mixture_moments(&means, &variances, &weights);
    MixturePrediction { weights, means, variances, mean, variance }
}

/// One draw from the mixture.
pub fn sample_from(pred: &MixturePrediction, rng: &mut ChaCha8Rng) -> f64 {
    let mut u: f64 = rng.random();
    let mut k = pred.weights.len() - 1;
    for (i, w) in pred.weights.iter().enumerate() {
        if u < *w {
            k = i;
            break;
        }
        u -= w;
    }
    let z: f64 = StandardNormal.sample(rng);
    pred.means[k] + pred.variances[k].sqrt() * z
}
