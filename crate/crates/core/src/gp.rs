//! Gaussian process regression with a squared-exponential kernel: exact
//! posteriors behind a cached Cholesky factorization, the log marginal
//! likelihood with analytic log-space gradients, and the two hyperparameter
//! update rules used by the sampler (Adam ascent and Metropolis-Hastings).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::util::squared_distance;

/// First jitter level tried when the raw kernel matrix is not positive
/// definite, as a fraction of the signal variance.
pub const JITTER_INITIAL_FACTOR: f64 = 1e-6;
/// Jitter escalates by ×10 until this fraction of the signal variance, after
/// which factorization failure becomes a hard numerical error.
pub const JITTER_MAX_FACTOR: f64 = 1e-2;

/// SE-kernel hyperparameters (signal variance σ²_f, length scale ℓ, noise
/// variance σ²_n). Stored in log-space so positivity is structural; the
/// optimizer and the MH proposal both operate directly on the log values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelHyperparams {
    log_signal_variance: f64,
    log_length_scale: f64,
    log_noise_variance: f64,
}

impl KernelHyperparams {
    pub fn new(signal_variance: f64, length_scale: f64, noise_variance: f64) -> Result<Self> {
        for (name, v) in [
            ("signal_variance", signal_variance),
            ("length_scale", length_scale),
            ("noise_variance", noise_variance),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        Ok(Self {
            log_signal_variance: signal_variance.ln(),
            log_length_scale: length_scale.ln(),
            log_noise_variance: noise_variance.ln(),
        })
    }

    pub fn from_log(log_params: [f64; 3]) -> Self {
        Self {
            log_signal_variance: log_params[0],
            log_length_scale: log_params[1],
            log_noise_variance: log_params[2],
        }
    }

    pub fn to_log(self) -> [f64; 3] {
        [self.log_signal_variance, self.log_length_scale, self.log_noise_variance]
    }

    pub fn signal_variance(&self) -> f64 {
        self.log_signal_variance.exp()
    }

    pub fn length_scale(&self) -> f64 {
        self.log_length_scale.exp()
    }

    pub fn noise_variance(&self) -> f64 {
        self.log_noise_variance.exp()
    }
}

/// The raw dataset: input points with their box bounds and scalar outputs.
/// Inputs are validated against the bounds on insertion, so downstream code
/// can assume feasibility.
#[derive(Clone, Debug)]
pub struct ObservationSet {
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
    bounds: Vec<(f64, f64)>,
}

impl ObservationSet {
    pub fn empty(bounds: Vec<(f64, f64)>) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::InvalidInput("bounds must have dimension ≥ 1".into()));
        }
        for &(lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidInput(format!(
                    "bounds must satisfy lo < hi, got ({lo}, {hi})"
                )));
            }
        }
        Ok(Self { inputs: Vec::new(), outputs: Vec::new(), bounds })
    }

    pub fn from_parts(
        inputs: Vec<Vec<f64>>,
        outputs: Vec<f64>,
        bounds: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let mut set = Self::empty(bounds)?;
        if inputs.len() != outputs.len() {
            return Err(Error::InvalidInput(format!(
                "inputs.len() = {} but outputs.len() = {}",
                inputs.len(),
                outputs.len()
            )));
        }
        for (x, y) in inputs.into_iter().zip(outputs) {
            set.push(x, y)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if x.len() != self.bounds.len() {
            return Err(Error::InvalidInput(format!(
                "point has dimension {} but bounds have dimension {}",
                x.len(),
                self.bounds.len()
            )));
        }
        for (i, (&v, &(lo, hi))) in x.iter().zip(&self.bounds).enumerate() {
            if !v.is_finite() || v < lo || v > hi {
                return Err(Error::InvalidInput(format!(
                    "coordinate {i} = {v} outside bounds [{lo}, {hi}]"
                )));
            }
        }
        if !y.is_finite() {
            return Err(Error::InvalidInput(format!("output must be finite, got {y}")));
        }
        self.inputs.push(x);
        self.outputs.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i]
    }

    pub fn output(&self, i: usize) -> f64 {
        self.outputs[i]
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }
}

/// Squared-exponential covariance σ²_f · exp(−‖x−x′‖² / (2ℓ²)).
pub fn se_kernel(x: &[f64], x_prime: &[f64], theta: &KernelHyperparams) -> f64 {
    assert_eq!(x.len(), x_prime.len(), "se_kernel: dimension mismatch");
    let ell = theta.length_scale();
    theta.signal_variance() * (-squared_distance(x, x_prime) / (2.0 * ell * ell)).exp()
}

/// Posterior state of one GP over a subset of the observations: the lower
/// Cholesky factor of K + σ²_n I (plus any jitter applied), the solved weight
/// vector α = (K + σ²_n I)⁻¹ y, and the member indices into the parent set.
/// Rebuilt from scratch whenever membership or hyperparameters change.
#[derive(Clone, Debug)]
pub struct GpPosteriorCache {
    theta: KernelHyperparams,
    members: Vec<usize>,
    chol_lower: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
    log_marginal: f64,
}

impl GpPosteriorCache {
    pub fn build(data: &ObservationSet, members: Vec<usize>, theta: KernelHyperparams) -> Result<Self> {
        for &i in &members {
            if i >= data.len() {
                return Err(Error::InvalidInput(format!(
                    "member index {i} out of range for {} observations",
                    data.len()
                )));
            }
        }
        let n = members.len();
        if n == 0 {
            return Ok(Self {
                theta,
                members,
                chol_lower: DMatrix::zeros(0, 0),
                alpha: DVector::zeros(0),
                jitter: 0.0,
                log_marginal: 0.0,
            });
        }
        let noisy = kernel_matrix(data, &members, &theta, true);
        let (chol, jitter) = cholesky_with_jitter(&noisy, theta.signal_variance())?;
        let y = DVector::from_iterator(n, members.iter().map(|&i| data.output(i)));
        let alpha = chol.solve(&y);
        let chol_lower = chol.unpack();
        let log_det_half: f64 = (0..n).map(|i| chol_lower[(i, i)].ln()).sum();
        let log_marginal = -0.5 * y.dot(&alpha)
            - log_det_half
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(Self { theta, members, chol_lower, alpha, jitter, log_marginal })
    }

    pub fn theta(&self) -> &KernelHyperparams {
        &self.theta
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Jitter that had to be added to the diagonal (0 when the raw matrix
    /// factorized cleanly).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Log marginal likelihood of the member outputs under this GP
    /// (0 for an empty member set).
    pub fn log_marginal(&self) -> f64 {
        self.log_marginal
    }

    /// Posterior (mean, variance) of the latent function at `x_star`:
    /// μ = k*ᵀ(K+σ²_nI)⁻¹y, σ² = k(x*,x*) − k*ᵀ(K+σ²_nI)⁻¹k*.
    /// With no conditioning points this is the prior (0, k(x*,x*)).
    pub fn predict(&self, data: &ObservationSet, x_star: &[f64]) -> (f64, f64) {
        let prior_var = se_kernel(x_star, x_star, &self.theta);
        if self.members.is_empty() {
            return (0.0, prior_var);
        }
        let k_star = DVector::from_iterator(
            self.members.len(),
            self.members.iter().map(|&i| se_kernel(data.input(i), x_star, &self.theta)),
        );
        let mean = k_star.dot(&self.alpha);
        let v = self
            .chol_lower
            .solve_lower_triangular(&k_star)
            .expect("lower factor has positive diagonal");
        let variance = (prior_var - v.norm_squared()).max(0.0);
        (mean, variance)
    }
}

fn kernel_matrix(
    data: &ObservationSet,
    members: &[usize],
    theta: &KernelHyperparams,
    add_noise: bool,
) -> DMatrix<f64> {
    let n = members.len();
    let mut k = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = se_kernel(data.input(members[a]), data.input(members[b]), theta);
            k[(a, b)] = v;
            k[(b, a)] = v;
        }
    }
    if add_noise {
        let noise = theta.noise_variance();
        for a in 0..n {
            k[(a, a)] += noise;
        }
    }
    k
}

/// Factor `k`, escalating diagonal jitter from 1e−6·σ²_f by ×10 up to
/// 1e−2·σ²_f; returns the factorization plus the jitter actually applied.
fn cholesky_with_jitter(k: &DMatrix<f64>, sf2: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = 0.0;
    loop {
        let trial = if jitter == 0.0 {
            k.clone()
        } else {
            let mut m = k.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
            m
        };
        if let Some(chol) = Cholesky::new(trial) {
            return Ok((chol, jitter));
        }
        jitter = if jitter == 0.0 { JITTER_INITIAL_FACTOR * sf2 } else { jitter * 10.0 };
        if jitter > JITTER_MAX_FACTOR * sf2 * (1.0 + 1e-12) {
            let diag_min = (0..k.nrows()).map(|i| k[(i, i)]).fold(f64::INFINITY, f64::min);
            return Err(Error::Numerical(format!(
                "Cholesky failed for {n}×{n} kernel matrix even with jitter {max:.3e} \
                 (min diagonal {diag_min:.3e}, σ²_f={sf2:.3e})",
                n = k.nrows(),
                max = JITTER_MAX_FACTOR * sf2,
            )));
        }
    }
}

/// Log marginal likelihood log N(y | 0, K + σ²_n I) of a nonempty member
/// subset.
pub fn log_marginal_likelihood(
    data: &ObservationSet,
    members: &[usize],
    theta: &KernelHyperparams,
) -> Result<f64> {
    if members.is_empty() {
        return Err(Error::InvalidInput("log marginal likelihood needs a nonempty subset".into()));
    }
    Ok(GpPosteriorCache::build(data, members.to_vec(), *theta)?.log_marginal())
}

/// Log marginal likelihood together with its gradient w.r.t. the log
/// hyperparameters [log σ²_f, log ℓ, log σ²_n], via the standard identity
/// ∂/∂p = ½ αᵀ(∂A/∂p)α − ½ tr(A⁻¹ ∂A/∂p) with A = K + σ²_n I (+ jitter).
pub fn log_marginal_gradient(
    data: &ObservationSet,
    members: &[usize],
    theta: &KernelHyperparams,
) -> Result<(f64, [f64; 3])> {
    if members.is_empty() {
        return Err(Error::InvalidInput("gradient needs a nonempty subset".into()));
    }
    let n = members.len();
    let (sf2, ell, sn2) = (theta.signal_variance(), theta.length_scale(), theta.noise_variance());

    let mut sq = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let d2 = squared_distance(data.input(members[a]), data.input(members[b]));
            sq[(a, b)] = d2;
            sq[(b, a)] = d2;
        }
    }
    let k_se = sq.map(|d2| sf2 * (-d2 / (2.0 * ell * ell)).exp());
    let mut noisy = k_se.clone();
    for i in 0..n {
        noisy[(i, i)] += sn2;
    }
    let (chol, jitter) = cholesky_with_jitter(&noisy, sf2)?;
    let y = DVector::from_iterator(n, members.iter().map(|&i| data.output(i)));
    let alpha = chol.solve(&y);
    let a_inv = chol.inverse();
    let log_det_half: f64 = {
        let l = chol.l_dirty();
        (0..n).map(|i| l[(i, i)].ln()).sum()
    };
    let logml = -0.5 * y.dot(&alpha)
        - log_det_half
        - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();

    // ∂A/∂log σ²_f = K_se (+ jitter·I since the jitter scales with σ²_f),
    // ∂A/∂log ℓ   = K_se ∘ d²/ℓ²,
    // ∂A/∂log σ²_n = σ²_n·I.
    let mut grad = [0.0f64; 3];
    let mut quad = [0.0f64; 3];
    let mut tr = [0.0f64; 3];
    for a in 0..n {
        for b in 0..n {
            let d_sig = k_se[(a, b)] + if a == b { jitter } else { 0.0 };
            let d_len = k_se[(a, b)] * sq[(a, b)] / (ell * ell);
            let d_noise = if a == b { sn2 } else { 0.0 };
            let aa = alpha[a] * alpha[b];
            let ai = a_inv[(a, b)];
            quad[0] += aa * d_sig;
            quad[1] += aa * d_len;
            quad[2] += aa * d_noise;
            tr[0] += ai * d_sig;
            tr[1] += ai * d_len;
            tr[2] += ai * d_noise;
        }
    }
    for j in 0..3 {
        grad[j] = 0.5 * (quad[j] - tr[j]);
    }
    Ok((logml, grad))
}

/// Settings for the Adam ascent on the log marginal likelihood.
#[derive(Clone, Copy, Debug)]
pub struct AdamOptions {
    pub steps: usize,
    pub learning_rate: f64,
}

impl Default for AdamOptions {
    fn default() -> Self {
        Self { steps: 100, learning_rate: 0.05 }
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Empirical-Bayes hyperparameter fit: Adam ascent in log-parameter space,
/// returning the best iterate seen (never worse than the initializer). A
/// non-finite gradient or a factorization failure aborts the remaining steps
/// and the best-seen value is returned.
pub fn optimize_hyperparams(
    data: &ObservationSet,
    members: &[usize],
    theta_init: KernelHyperparams,
    opts: AdamOptions,
) -> Result<KernelHyperparams> {
    if opts.steps == 0 {
        return Err(Error::InvalidInput("optimizer needs steps ≥ 1".into()));
    }
    if !opts.learning_rate.is_finite() || opts.learning_rate < 0.0 {
        return Err(Error::InvalidInput(format!(
            "learning rate must be finite and ≥ 0, got {}",
            opts.learning_rate
        )));
    }
    let mut u = theta_init.to_log();
    let mut best = (u, f64::NEG_INFINITY);
    let mut m = [0.0f64; 3];
    let mut v = [0.0f64; 3];
    for step in 1..=opts.steps {
        let (logml, grad) = match log_marginal_gradient(data, members, &KernelHyperparams::from_log(u)) {
            Ok(r) => r,
            Err(_) => break,
        };
        if !logml.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            break;
        }
        if logml > best.1 {
            best = (u, logml);
        }
        let b1t = 1.0 - ADAM_BETA1.powi(step as i32);
        let b2t = 1.0 - ADAM_BETA2.powi(step as i32);
        for j in 0..3 {
            m[j] = ADAM_BETA1 * m[j] + (1.0 - ADAM_BETA1) * grad[j];
            v[j] = ADAM_BETA2 * v[j] + (1.0 - ADAM_BETA2) * grad[j] * grad[j];
            u[j] += opts.learning_rate * (m[j] / b1t) / ((v[j] / b2t).sqrt() + ADAM_EPS);
        }
    }
    if let Ok(logml) = log_marginal_likelihood(data, members, &KernelHyperparams::from_log(u)) {
        if logml > best.1 {
            best = (u, logml);
        }
    }
    if best.1.is_finite() {
        Ok(KernelHyperparams::from_log(best.0))
    } else {
        // Every evaluation failed, including the initializer: surface it.
        Err(Error::Numerical(
            "hyperparameter optimization could not evaluate the marginal likelihood".into(),
        ))
    }
}

/// One Metropolis-Hastings update of the hyperparameters: a multiplicative
/// log-normal proposal (a symmetric random walk on the log parameters) scored
/// by logML + log prior, where the prior density is supplied by the caller
/// (the Inverse-Gamma base measure in the sampler) and is evaluated in the
/// log-parameter coordinates, i.e. including the change-of-variables term, so
/// the chain targets the correct posterior.
pub fn mh_update_hyperparams<R: Rng + ?Sized>(
    data: &ObservationSet,
    members: &[usize],
    theta: KernelHyperparams,
    step_scale: f64,
    log_prior: impl Fn(&KernelHyperparams) -> f64,
    rng: &mut R,
) -> Result<(KernelHyperparams, bool)> {
    if !step_scale.is_finite() || step_scale <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "step_scale must be finite and positive, got {step_scale}"
        )));
    }
    let score = |th: &KernelHyperparams| -> Option<f64> {
        let lml = log_marginal_likelihood(data, members, th).ok()?;
        let u: f64 = th.to_log().iter().sum();
        let s = lml + log_prior(th) + u;
        s.is_finite().then_some(s)
    };
    let Some(current) = score(&theta) else {
        return Err(Error::Numerical("MH update cannot score the current state".into()));
    };
    let u = theta.to_log();
    let mut proposal_log = [0.0f64; 3];
    for j in 0..3 {
        let eps: f64 = StandardNormal.sample(rng);
        proposal_log[j] = u[j] + step_scale * eps;
    }
    let proposal = KernelHyperparams::from_log(proposal_log);
    let accept = match score(&proposal) {
        Some(p) => {
            let log_ratio = p - current;
            log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
        }
        None => false,
    };
    Ok(if accept { (proposal, true) } else { (theta, false) })
}
