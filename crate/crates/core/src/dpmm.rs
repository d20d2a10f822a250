//! Dirichlet-process machinery over GP regimes: the Inverse-Gamma base
//! measure, CRP prior, the collapsed Gibbs sweep with Monte Carlo new-cluster
//! likelihoods, the concentration schedule, and regime pruning.

use rand::Rng;
use rand_distr::Distribution;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::gp::{
    mh_update_hyperparams, optimize_hyperparams, se_kernel, AdamOptions, GpPosteriorCache,
    KernelHyperparams, ObservationSet,
};
use crate::util::{logsumexp, sample_index};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Sentinel regime index marking an observation as detached mid-move.
const UNASSIGNED: usize = usize::MAX;

/// Prior over per-regime hyperparameters. The product-of-Inverse-Gamma form
/// is the working prior; the pinned variant fixes the draw to a constant,
/// which turns the sampler into a fixed-hyperparameter partition sampler
/// (used by the exact-enumeration checks and the degenerate single-GP mode).
#[derive(Clone, Copy, Debug)]
pub enum BaseMeasure {
    InvGamma {
        shape_signal: f64,
        scale_signal: f64,
        shape_length: f64,
        scale_length: f64,
        shape_noise: f64,
        scale_noise: f64,
    },
    Pinned(KernelHyperparams),
}

impl BaseMeasure {
    pub fn inv_gamma(
        shape_signal: f64,
        scale_signal: f64,
        shape_length: f64,
        scale_length: f64,
        shape_noise: f64,
        scale_noise: f64,
    ) -> Result<Self> {
        for (name, v) in [
            ("shape_signal", shape_signal),
            ("shape_length", shape_length),
            ("shape_noise", shape_noise),
        ] {
            if !v.is_finite() || v <= 1.0 {
                return Err(Error::InvalidInput(format!(
                    "{name} must be > 1 so the prior mean is finite, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("scale_signal", scale_signal),
            ("scale_length", scale_length),
            ("scale_noise", scale_noise),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(BaseMeasure::InvGamma {
            shape_signal,
            scale_signal,
            shape_length,
            scale_length,
            shape_noise,
            scale_noise,
        })
    }

    /// Shape-2 priors with scales set from the scale of the modeling space:
    /// the signal scale matches the variance of standardized outputs (1), the
    /// noise scale is a tenth of that, and the length scale is a quarter of
    /// the normalized domain diameter 2√d.
    pub fn calibrated(dim: usize) -> Self {
        Self::with_scales(1.0, 2.0 * (dim as f64).sqrt() / 4.0, 0.1)
    }

    /// Shape-2 priors with explicit scales (prior means equal the scales).
    pub fn with_scales(scale_signal: f64, scale_length: f64, scale_noise: f64) -> Self {
        BaseMeasure::InvGamma {
            shape_signal: 2.0,
            scale_signal,
            shape_length: 2.0,
            scale_length,
            shape_noise: 2.0,
            scale_noise,
        }
    }

    pub fn pinned(theta: KernelHyperparams) -> Self {
        BaseMeasure::Pinned(theta)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> KernelHyperparams {
        match *self {
            BaseMeasure::Pinned(theta) => theta,
            BaseMeasure::InvGamma {
                shape_signal,
                scale_signal,
                shape_length,
                scale_length,
                shape_noise,
                scale_noise,
            } => {
                let draw = |shape: f64, scale: f64, rng: &mut R| -> f64 {
                    // Inverse-Gamma(a, b) as the reciprocal of Gamma(a, 1/b)
                    let g = rand_distr::Gamma::new(shape, 1.0 / scale)
                        .expect("validated shape/scale");
                    1.0 / g.sample(rng)
                };
                let sf2 = draw(shape_signal, scale_signal, rng);
                let ell = draw(shape_length, scale_length, rng);
                let sn2 = draw(shape_noise, scale_noise, rng);
                KernelHyperparams::new(sf2, ell, sn2).expect("Inverse-Gamma draws are positive")
            }
        }
    }

    /// Log prior density of `theta`; constant 0 for the pinned variant.
    pub fn log_density(&self, theta: &KernelHyperparams) -> f64 {
        match *self {
            BaseMeasure::Pinned(_) => 0.0,
            BaseMeasure::InvGamma {
                shape_signal,
                scale_signal,
                shape_length,
                scale_length,
                shape_noise,
                scale_noise,
            } => {
                let ln_ig = |x: f64, a: f64, b: f64| {
                    a * b.ln() - ln_gamma(a) - (a + 1.0) * x.ln() - b / x
                };
                ln_ig(theta.signal_variance(), shape_signal, scale_signal)
                    + ln_ig(theta.length_scale(), shape_length, scale_length)
                    + ln_ig(theta.noise_variance(), shape_noise, scale_noise)
            }
        }
    }
}

pub fn sample_base_measure<R: Rng + ?Sized>(g0: &BaseMeasure, rng: &mut R) -> KernelHyperparams {
    g0.sample(rng)
}

/// One regime: its hyperparameters and the posterior cache over its members.
#[derive(Clone, Debug)]
pub struct Regime {
    pub theta: KernelHyperparams,
    pub cache: GpPosteriorCache,
}

impl Regime {
    pub fn count(&self) -> usize {
        self.cache.len()
    }
}

/// Mixture state: per-observation assignments, the live regimes, and the
/// concentration parameter.
#[derive(Clone, Debug)]
pub struct RegimeState {
    assignments: Vec<usize>,
    regimes: Vec<Regime>,
    alpha: f64,
}

impl RegimeState {
    /// All observations in one regime with the given hyperparameters.
    pub fn single_regime(
        data: &ObservationSet,
        theta: KernelHyperparams,
        alpha: f64,
    ) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidInput("state needs at least one observation".into()));
        }
        check_alpha(alpha)?;
        let cache = GpPosteriorCache::build(data, (0..data.len()).collect(), theta)?;
        Ok(Self {
            assignments: vec![0; data.len()],
            regimes: vec![Regime { theta, cache }],
            alpha,
        })
    }

    /// Build a state from an explicit partition, one hyperparameter set per
    /// block (blocks are numbered by the assignment labels 0..K).
    pub fn from_partition(
        data: &ObservationSet,
        assignments: Vec<usize>,
        thetas: Vec<KernelHyperparams>,
        alpha: f64,
    ) -> Result<Self> {
        if assignments.len() != data.len() {
            return Err(Error::InvalidInput("one assignment per observation required".into()));
        }
        check_alpha(alpha)?;
        let k = thetas.len();
        let mut members = vec![Vec::new(); k];
        for (i, &z) in assignments.iter().enumerate() {
            if z >= k {
                return Err(Error::InvalidInput(format!(
                    "assignment {z} out of range for {k} regimes"
                )));
            }
            members[z].push(i);
        }
        if members.iter().any(Vec::is_empty) {
            return Err(Error::InvalidInput("every regime must own ≥ 1 observation".into()));
        }
        let regimes = members
            .into_iter()
            .zip(thetas)
            .map(|(m, theta)| {
                GpPosteriorCache::build(data, m, theta).map(|cache| Regime { theta, cache })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { assignments, regimes, alpha })
    }

    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn regime_count(&self) -> usize {
        self.regimes.len()
    }

    pub fn regimes(&self) -> &[Regime] {
        &self.regimes
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn counts(&self) -> Vec<usize> {
        self.regimes.iter().map(Regime::count).collect()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn set_alpha(&mut self, alpha: f64) -> Result<()> {
        check_alpha(alpha)?;
        self.alpha = alpha;
        Ok(())
    }

    /// Refresh every regime cache against `data` (after output
    /// re-standardization or when new observations were appended elsewhere).
    pub fn rebuild_caches(&mut self, data: &ObservationSet) -> Result<()> {
        for regime in &mut self.regimes {
            regime.cache =
                GpPosteriorCache::build(data, regime.cache.members().to_vec(), regime.theta)?;
        }
        Ok(())
    }

    /// Append a brand-new observation (already present in `data` at index
    /// `data.len()-1`) to an existing regime.
    pub fn attach_appended(&mut self, data: &ObservationSet, regime: usize) -> Result<()> {
        let i = data.len() - 1;
        if self.assignments.len() != i {
            return Err(Error::InvalidInput(
                "attach_appended expects exactly one observation beyond the state".into(),
            ));
        }
        self.assignments.push(UNASSIGNED);
        self.attach_existing(data, i, regime)
    }

    /// Register a brand-new observation (already present in `data` at index
    /// `data.len()-1`) as detached, so its regime can be sampled with
    /// [`assignment_probs`] before attaching.
    pub fn append_detached(&mut self, data: &ObservationSet) -> Result<()> {
        if self.assignments.len() + 1 != data.len() {
            return Err(Error::InvalidInput(
                "append_detached expects exactly one observation beyond the state".into(),
            ));
        }
        self.assignments.push(UNASSIGNED);
        Ok(())
    }

    /// Detach observation `i`: leave-one-out counts and caches, deleting its
    /// regime if `i` was the sole member. Returns the backup of the source
    /// regime so an unmoved observation can be reattached cheaply.
    pub fn detach(&mut self, data: &ObservationSet, i: usize) -> Result<Detached> {
        let src = *self
            .assignments
            .get(i)
            .ok_or_else(|| Error::InvalidInput(format!("no observation {i}")))?;
        if src == UNASSIGNED {
            return Err(Error::InvalidInput(format!("observation {i} is already detached")));
        }
        let backup = self.regimes[src].cache.clone();
        let deleted = self.regimes[src].count() == 1;
        if deleted {
            self.regimes.remove(src);
            for z in &mut self.assignments {
                if *z != UNASSIGNED && *z > src {
                    *z -= 1;
                }
            }
        } else {
            let members: Vec<usize> =
                backup.members().iter().copied().filter(|&m| m != i).collect();
            self.regimes[src].cache =
                GpPosteriorCache::build(data, members, self.regimes[src].theta)?;
        }
        self.assignments[i] = UNASSIGNED;
        Ok(Detached { index: i, source: src, source_deleted: deleted, backup })
    }

    /// Attach a detached observation to the existing regime `k`.
    pub fn attach_existing(&mut self, data: &ObservationSet, i: usize, k: usize) -> Result<()> {
        if self.assignments[i] != UNASSIGNED {
            return Err(Error::InvalidInput(format!("observation {i} is not detached")));
        }
        if k >= self.regimes.len() {
            return Err(Error::InvalidInput(format!("regime {k} does not exist")));
        }
        let mut members = self.regimes[k].cache.members().to_vec();
        // Keep member lists sorted so factorization order is a function of the
        // partition alone, not of the sweep history that produced it.
        let pos = members.partition_point(|&m| m < i);
        members.insert(pos, i);
        self.regimes[k].cache = GpPosteriorCache::build(data, members, self.regimes[k].theta)?;
        self.assignments[i] = k;
        Ok(())
    }

    /// Attach a detached observation to a fresh regime with hyperparameters
    /// `theta`; returns the new regime's index.
    pub fn attach_new(
        &mut self,
        data: &ObservationSet,
        i: usize,
        theta: KernelHyperparams,
    ) -> Result<usize> {
        if self.assignments[i] != UNASSIGNED {
            return Err(Error::InvalidInput(format!("observation {i} is not detached")));
        }
        let cache = GpPosteriorCache::build(data, vec![i], theta)?;
        self.regimes.push(Regime { theta, cache });
        let k = self.regimes.len() - 1;
        self.assignments[i] = k;
        Ok(k)
    }

    /// Undo a detach when the observation resamples its original regime:
    /// restores the saved cache instead of refactorizing.
    fn reattach(&mut self, detached: Detached) {
        let Detached { index, source, source_deleted, backup } = detached;
        if source_deleted {
            let theta = *backup.theta();
            self.regimes.insert(source, Regime { theta, cache: backup });
            for z in &mut self.assignments {
                if *z != UNASSIGNED && *z >= source {
                    *z += 1;
                }
            }
        } else {
            self.regimes[source].cache = backup;
        }
        self.assignments[index] = source;
    }

    /// Σ_k log N(y_k | 0, K_k + σ²_n I) + log CRP(partition; α): the joint
    /// log-likelihood of outputs and partition given the hyperparameters.
    pub fn joint_log_likelihood(&self) -> f64 {
        let n: usize = self.assignments.len();
        let mut ll = self.alpha.ln() * self.regimes.len() as f64 + ln_gamma(self.alpha)
            - ln_gamma(self.alpha + n as f64);
        for regime in &self.regimes {
            ll += ln_gamma(regime.count() as f64);
            ll += regime.cache.log_marginal();
        }
        ll
    }

    /// Check the structural invariants (used by tests and debug assertions).
    pub fn validate(&self, data: &ObservationSet) -> Result<()> {
        if self.assignments.len() != data.len() {
            return Err(Error::InvalidInput("assignment/observation count mismatch".into()));
        }
        let mut counted = vec![0usize; self.regimes.len()];
        for (i, &z) in self.assignments.iter().enumerate() {
            if z >= self.regimes.len() {
                return Err(Error::InvalidInput(format!("observation {i} assigned to dead regime")));
            }
            if !self.regimes[z].cache.members().contains(&i) {
                return Err(Error::InvalidInput(format!(
                    "observation {i} missing from regime {z} cache"
                )));
            }
            counted[z] += 1;
        }
        for (k, regime) in self.regimes.iter().enumerate() {
            if regime.count() == 0 {
                return Err(Error::InvalidInput(format!("regime {k} is empty")));
            }
            if regime.count() != counted[k] {
                return Err(Error::InvalidInput(format!("regime {k} count mismatch")));
            }
        }
        Ok(())
    }
}

/// Bookkeeping handed back by [`RegimeState::detach`].
#[derive(Debug)]
pub struct Detached {
    pub index: usize,
    pub source: usize,
    pub source_deleted: bool,
    backup: GpPosteriorCache,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    Ok(())
}

/// CRP predictive over K existing tables plus a new one:
/// [n_1, …, n_K, α] / (N + α).
pub fn crp_prior_probs(counts: &[usize], alpha: f64) -> Vec<f64> {
    let n: usize = counts.iter().sum();
    let denom = n as f64 + alpha;
    let mut probs: Vec<f64> = counts.iter().map(|&c| c as f64 / denom).collect();
    probs.push(alpha / denom);
    probs
}

/// Monte Carlo marginal likelihood of opening a new regime at (x, y):
/// (1/M) Σ_m N(y | 0, k_θ(m)(x,x) + σ²_n(m)) over base-measure draws.
pub fn new_cluster_likelihood_mc<R: Rng + ?Sized>(
    y: f64,
    x: &[f64],
    g0: &BaseMeasure,
    m: usize,
    rng: &mut R,
) -> Result<f64> {
    Ok(ln_new_cluster_likelihood_mc(y, x, g0, m, rng)?.exp())
}

fn ln_new_cluster_likelihood_mc<R: Rng + ?Sized>(
    y: f64,
    x: &[f64],
    g0: &BaseMeasure,
    m: usize,
    rng: &mut R,
) -> Result<f64> {
    if m == 0 {
        return Err(Error::InvalidInput("Monte Carlo sample count must be ≥ 1".into()));
    }
    let mut ln_terms = Vec::with_capacity(m);
    for _ in 0..m {
        let theta = g0.sample(rng);
        let var = se_kernel(x, x, &theta) + theta.noise_variance();
        ln_terms.push(-0.5 * (LN_2PI + var.ln() + y * y / var));
    }
    Ok(logsumexp(&ln_terms) - (m as f64).ln())
}

fn ln_gaussian(y: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (y - mean) * (y - mean) / var)
}

/// Collapsed-Gibbs conditional for a detached observation: existing regimes
/// weighted by leave-one-out count × GP predictive density (observation
/// noise included), the final entry by α × the Monte Carlo new-regime
/// marginal. Normalized. When `max_regimes` caps K the new entry is omitted.
pub fn assignment_probs<R: Rng + ?Sized>(
    state: &RegimeState,
    data: &ObservationSet,
    i: usize,
    g0: &BaseMeasure,
    mc_samples: usize,
    max_regimes: Option<usize>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if state.assignments[i] != UNASSIGNED {
        return Err(Error::InvalidInput(format!(
            "assignment_probs requires observation {i} to be detached"
        )));
    }
    let y = data.output(i);
    let x = data.input(i);
    let k = state.regimes.len();
    let new_allowed = max_regimes.is_none_or(|cap| k < cap);
    let mut ln_w = Vec::with_capacity(k + 1);
    for regime in &state.regimes {
        let (mu, var) = regime.cache.predict(data, x);
        let obs_var = var + regime.theta.noise_variance();
        ln_w.push((regime.count() as f64).ln() + ln_gaussian(y, mu, obs_var));
    }
    if new_allowed {
        let ln_new = ln_new_cluster_likelihood_mc(y, x, g0, mc_samples, rng)?;
        ln_w.push(state.alpha.ln() + ln_new);
    }
    let lse = logsumexp(&ln_w);
    if !lse.is_finite() {
        return Err(Error::Numerical(format!(
            "assignment probabilities for observation {i} are degenerate (logsumexp = {lse})"
        )));
    }
    Ok(ln_w.iter().map(|w| (w - lse).exp()).collect())
}

/// How regime hyperparameters are refreshed at the end of each sweep.
#[derive(Clone, Copy, Debug)]
pub enum HyperUpdate {
    /// Leave hyperparameters fixed (exact-enumeration tests).
    None,
    /// Empirical Bayes: Adam ascent on the regime marginal likelihood.
    EmpiricalBayes { steps: usize, learning_rate: f64 },
    /// Metropolis-Hastings with a log-normal proposal against the base
    /// measure prior.
    MetropolisHastings { step_scale: f64 },
}

#[derive(Clone, Copy, Debug)]
pub struct GibbsOptions {
    /// Monte Carlo draws per new-cluster likelihood evaluation.
    pub mc_samples: usize,
    /// Adam steps refining a fresh regime's base-measure draw on its single
    /// member (0 keeps the raw draw).
    pub new_regime_refine_steps: usize,
    pub update: HyperUpdate,
    /// Hard cap on the regime count (None = unbounded); with Some(k) the
    /// new-regime option is masked once k regimes exist.
    pub max_regimes: Option<usize>,
}

impl Default for GibbsOptions {
    fn default() -> Self {
        Self {
            mc_samples: 16,
            new_regime_refine_steps: 20,
            update: HyperUpdate::EmpiricalBayes { steps: 10, learning_rate: 0.05 },
            max_regimes: None,
        }
    }
}

/// Per-sweep records from [`run_gibbs`].
#[derive(Clone, Debug, Default)]
pub struct GibbsDiagnostics {
    pub regime_counts: Vec<usize>,
    pub joint_log_likelihood: Vec<f64>,
    /// Fraction of per-regime hyperparameter updates applied in each sweep
    /// (1.0 when no update was attempted).
    pub acceptance_rates: Vec<f64>,
}

impl GibbsDiagnostics {
    pub fn sweep_count(&self) -> usize {
        self.regime_counts.len()
    }
}

/// One collapsed Gibbs sweep: every observation is detached, resampled via
/// [`assignment_probs`], and reattached (fresh regimes get a base-measure
/// draw refined on their single member); afterwards every regime's
/// hyperparameters are refreshed per `opts.update`. A failed update keeps
/// the regime's previous hyperparameters.
pub fn gibbs_sweep<R: Rng + ?Sized>(
    state: &mut RegimeState,
    data: &ObservationSet,
    g0: &BaseMeasure,
    opts: &GibbsOptions,
    rng: &mut R,
) -> Result<SweepStats> {
    for i in 0..data.len() {
        let detached = state.detach(data, i)?;
        let probs = assignment_probs(state, data, i, g0, opts.mc_samples, opts.max_regimes, rng)?;
        let choice = sample_index(&probs, rng);
        if choice < state.regime_count() {
            if !detached.source_deleted && choice == detached.source {
                state.reattach(detached);
            } else {
                state.attach_existing(data, i, choice)?;
            }
        } else {
            let draw = g0.sample(rng);
            let theta = if opts.new_regime_refine_steps > 0 {
                optimize_hyperparams(
                    data,
                    &[i],
                    draw,
                    AdamOptions { steps: opts.new_regime_refine_steps, learning_rate: 0.05 },
                )
                .unwrap_or(draw)
            } else {
                draw
            };
            state.attach_new(data, i, theta)?;
        }
    }

    let mut stats = SweepStats::default();
    match opts.update {
        HyperUpdate::None => {}
        HyperUpdate::EmpiricalBayes { steps, learning_rate } => {
            for k in 0..state.regimes.len() {
                stats.attempted += 1;
                let members = state.regimes[k].cache.members().to_vec();
                let theta = state.regimes[k].theta;
                if let Ok(next) = optimize_hyperparams(
                    data,
                    &members,
                    theta,
                    AdamOptions { steps, learning_rate },
                ) {
                    if next != theta {
                        if let Ok(cache) = GpPosteriorCache::build(data, members, next) {
                            state.regimes[k].theta = next;
                            state.regimes[k].cache = cache;
                            stats.accepted += 1;
                        }
                    }
                }
            }
        }
        HyperUpdate::MetropolisHastings { step_scale } => {
            for k in 0..state.regimes.len() {
                stats.attempted += 1;
                let members = state.regimes[k].cache.members().to_vec();
                let theta = state.regimes[k].theta;
                if let Ok((next, accepted)) = mh_update_hyperparams(
                    data,
                    &members,
                    theta,
                    step_scale,
                    |th| g0.log_density(th),
                    rng,
                ) {
                    if accepted {
                        if let Ok(cache) = GpPosteriorCache::build(data, members, next) {
                            state.regimes[k].theta = next;
                            state.regimes[k].cache = cache;
                            stats.accepted += 1;
                        }
                    }
                }
            }
        }
    }
    debug_assert!(state.validate(data).is_ok());
    Ok(stats)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SweepStats {
    pub accepted: usize,
    pub attempted: usize,
}

impl SweepStats {
    pub fn rate(&self) -> f64 {
        if self.attempted == 0 {
            1.0
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }
}

/// Run `sweeps` Gibbs sweeps, recording per-sweep diagnostics.
pub fn run_gibbs<R: Rng + ?Sized>(
    state: &mut RegimeState,
    data: &ObservationSet,
    g0: &BaseMeasure,
    sweeps: usize,
    opts: &GibbsOptions,
    rng: &mut R,
) -> Result<GibbsDiagnostics> {
    if sweeps == 0 {
        return Err(Error::InvalidInput("run_gibbs needs sweeps ≥ 1".into()));
    }
    let mut diag = GibbsDiagnostics::default();
    for _ in 0..sweeps {
        let stats = gibbs_sweep(state, data, g0, opts, rng)?;
        diag.regime_counts.push(state.regime_count());
        diag.joint_log_likelihood.push(state.joint_log_likelihood());
        diag.acceptance_rates.push(stats.rate());
    }
    Ok(diag)
}

/// Log-Sqrt concentration schedule α_t = α₀·√t / ln(t + e).
pub fn alpha_schedule(t: usize, alpha0: f64) -> f64 {
    assert!(t >= 1, "alpha_schedule needs t ≥ 1");
    assert!(alpha0 > 0.0, "alpha_schedule needs alpha0 > 0");
    let tf = t as f64;
    alpha0 * tf.sqrt() / (tf + std::f64::consts::E).ln()
}

/// E[K_n | α] = Σ_{i=1..n} α/(i−1+α), the exact CRP cluster-count mean.
pub fn expected_clusters(n: usize, alpha: f64) -> f64 {
    assert!(n >= 1 && alpha > 0.0);
    (1..=n).map(|i| alpha / (i as f64 - 1.0 + alpha)).sum()
}

/// Draw a partition of n items from the CRP: returns assignment labels in
/// order of first appearance (a restricted growth string).
pub fn simulate_crp<R: Rng + ?Sized>(n: usize, alpha: f64, rng: &mut R) -> Vec<usize> {
    assert!(n >= 1 && alpha > 0.0);
    let mut counts: Vec<usize> = Vec::new();
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let probs = crp_prior_probs(&counts, alpha);
        let k = sample_index(&probs, rng);
        if k == counts.len() {
            counts.push(1);
        } else {
            counts[k] += 1;
        }
        labels.push(k);
    }
    labels
}

/// Remove empty regimes and regimes whose mixture weight n_k/(N+α) falls
/// below `weight_floor`, reassigning orphaned observations to their
/// highest-probability surviving regime. The last remaining regime is never
/// pruned — if every regime falls below the floor, the heaviest one
/// survives. Returns the number of regimes removed.
pub fn prune_regimes(
    state: &mut RegimeState,
    data: &ObservationSet,
    weight_floor: f64,
) -> Result<usize> {
    if !(0.0..0.5).contains(&weight_floor) {
        return Err(Error::InvalidInput(format!(
            "weight floor must lie in [0, 0.5), got {weight_floor}"
        )));
    }
    if state.regimes.len() <= 1 {
        return Ok(0);
    }
    let n: usize = state.len();
    let denom = n as f64 + state.alpha;
    let keep: Vec<bool> = state
        .regimes
        .iter()
        .map(|r| r.count() > 0 && (r.count() as f64 / denom) >= weight_floor)
        .collect();
    if keep.iter().all(|&k| !k) {
        // everything is below the floor: retain the heaviest regime
        let heaviest = state
            .regimes
            .iter()
            .enumerate()
            .max_by_key(|(_, r)| r.count())
            .map(|(k, _)| k)
            .expect("checked nonempty");
        return prune_with_keep(state, data, |k| k == heaviest);
    }
    prune_with_keep(state, data, |k| keep[k])
}

fn prune_with_keep(
    state: &mut RegimeState,
    data: &ObservationSet,
    keep: impl Fn(usize) -> bool,
) -> Result<usize> {
    let old_count = state.regimes.len();
    let mut new_index = vec![usize::MAX; old_count];
    let mut survivors = Vec::new();
    let mut orphans: Vec<usize> = Vec::new();
    for (k, regime) in state.regimes.drain(..).enumerate() {
        if keep(k) {
            new_index[k] = survivors.len();
            survivors.push(regime);
        } else {
            orphans.extend(regime.cache.members().iter().copied());
        }
    }
    state.regimes = survivors;
    for z in &mut state.assignments {
        *z = new_index[*z]; // orphans map to usize::MAX = detached
    }
    orphans.sort_unstable();
    for i in orphans {
        // highest-probability surviving regime: count × predictive density
        let y = data.output(i);
        let x = data.input(i);
        let best = state
            .regimes
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let (mu, var) = r.cache.predict(data, x);
                (k, (r.count() as f64).ln() + ln_gaussian(y, mu, var + r.theta.noise_variance()))
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k)
            .expect("at least one survivor");
        state.attach_existing(data, i, best)?;
    }
    debug_assert!(state.validate(data).is_ok());
    Ok(old_count - state.regimes.len())
}
