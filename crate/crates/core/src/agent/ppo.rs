//! Proximal policy optimization: advantage estimation, the clipped
//! surrogate loss with analytic gradients, and the Adam update.

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::MlpTape;
use super::policy::{gaussian_entropy, gaussian_log_prob, PolicyParams};
use super::AgentError;
use crate::par;

/// PPO hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpoConfig {
    pub clip: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub max_grad_norm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            clip: 0.2,
            gamma: 0.99,
            lambda: 0.95,
            learning_rate: 3e-4,
            epochs: 10,
            minibatch: 480,
            entropy_coef: 0.005,
            value_coef: 0.5,
            max_grad_norm: 0.5,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::Config(m));
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return bad(format!("clip must lie in (0, 1), got {}", self.clip));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return bad(format!("lambda must lie in (0, 1], got {}", self.lambda));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be >= 0, got {}", self.learning_rate));
        }
        if self.minibatch == 0 {
            return bad("minibatch must be at least 1".into());
        }
        if !(self.max_grad_norm > 0.0) {
            return bad(format!("max_grad_norm must be positive, got {}", self.max_grad_norm));
        }
        Ok(())
    }
}

/// One environment interaction.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    /// Pre-squash action.
    pub raw_action: f64,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

/// A transition with its advantage and value target, ready for the update.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub observation: Vec<f64>,
    pub raw_action: f64,
    /// Gaussian part of the behaviour log-probability (the squash correction
    /// cancels in the ratio).
    pub old_log_prob: f64,
    pub advantage: f64,
    pub value_target: f64,
}

/// Generalized advantage estimation over one trajectory.
///
/// `delta_t = r_t + gamma v_{t+1} - v_t`, `A_t = delta_t + gamma lambda A_{t+1}`,
/// with `v_T = bootstrap`. Returns `(advantages, returns = advantages + values)`.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    bootstrap: f64,
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert_eq!(rewards.len(), values.len());
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut next_value = bootstrap;
    let mut next_adv = 0.0;
    for t in (0..n).rev() {
        let delta = rewards[t] + gamma * next_value - values[t];
        next_adv = delta + gamma * lambda * next_adv;
        adv[t] = next_adv;
        next_value = values[t];
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, ret)
}

/// Shifts and scales to zero mean and unit (population) variance.
pub fn normalize(x: &mut [f64]) {
    if x.is_empty() {
        return;
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let scale = 1.0 / (var.sqrt() + 1e-8);
    x.iter_mut().for_each(|v| *v = (*v - mean) * scale);
}

/// `min(ratio A, clip(ratio, 1 - eps, 1 + eps) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps: f64) -> f64 {
    (ratio * advantage).min(ratio.clamp(1.0 - eps, 1.0 + eps) * advantage)
}

/// Minibatch loss terms (means over the samples).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStats {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub approx_kl: f64,
    pub clip_fraction: f64,
}

impl LossStats {
    fn add_scaled(&mut self, o: &LossStats, w: f64) {
        self.total += w * o.total;
        self.policy += w * o.policy;
        self.value += w * o.value;
        self.entropy += w * o.entropy;
        self.approx_kl += w * o.approx_kl;
        self.clip_fraction += w * o.clip_fraction;
    }
}

/// Samples processed per parallel task when accumulating gradients.
const GRAD_CHUNK: usize = 32;

/// Loss `-surrogate + c_v (V - R)^2 - c_e H` averaged over `batch` and its
/// gradient with respect to [`PolicyParams::flatten`].
pub fn loss_and_grad<T: Float + Send + Sync>(
    params: &PolicyParams<T>,
    batch: &[&Sample],
    cfg: &PpoConfig,
) -> (LossStats, Vec<T>) {
    let n_actor = params.actor.n_params();
    let n_total = params.n_params();
    let n = batch.len().max(1) as f64;
    let log_std = params.log_std;
    let ls = log_std.to_f64().unwrap();
    let inv_var = (-2.0 * ls).exp();
    let chunks = batch.len().div_ceil(GRAD_CHUNK);
    // Fixed chunks combined in order: deterministic for any thread count.
    let partials = par::map_collect(chunks, |c| {
        let lo = c * GRAD_CHUNK;
        let hi = (lo + GRAD_CHUNK).min(batch.len());
        let mut grad = vec![T::zero(); n_total];
        let mut d_log_std = 0.0;
        let mut stats = LossStats::default();
        let mut tape = MlpTape::default();
        for s in &batch[lo..hi] {
            let x: Vec<T> = s.observation.iter().map(|&v| T::from(v).unwrap()).collect();
            let mean = params.actor.forward_tape(&x, &mut tape)[0];
            let logp = gaussian_log_prob(T::from(s.raw_action).unwrap(), mean, log_std)
                .to_f64()
                .unwrap();
            let log_ratio = logp - s.old_log_prob;
            let ratio = log_ratio.exp();
            let a = s.advantage;
            let surr = clipped_surrogate(ratio, a, cfg.clip);
            let clipped = (a >= 0.0 && ratio > 1.0 + cfg.clip) || (a < 0.0 && ratio < 1.0 - cfg.clip);
            stats.policy += -surr;
            stats.approx_kl += ratio - 1.0 - log_ratio;
            if clipped {
                stats.clip_fraction += 1.0;
            } else {
                // d(-ratio A)/d theta = -ratio A d logp / d theta
                let m = mean.to_f64().unwrap();
                let z = s.raw_action - m;
                let coef = -ratio * a / n;
                let d_mean = coef * z * inv_var;
                d_log_std += coef * (z * z * inv_var - 1.0);
                params
                    .actor
                    .backward(&tape, &[T::from(d_mean).unwrap()], &mut grad[..n_actor]);
            }
            let v = params.critic.forward_tape(&x, &mut tape)[0].to_f64().unwrap();
            let err = v - s.value_target;
            stats.value += err * err;
            let d_v = 2.0 * cfg.value_coef * err / n;
            params.critic.backward(
                &tape,
                &[T::from(d_v).unwrap()],
                &mut grad[n_actor..n_total - 1],
            );
        }
        grad[n_total - 1] = T::from(d_log_std).unwrap();
        (stats, grad)
    });
    let mut stats = LossStats::default();
    let mut grad = vec![T::zero(); n_total];
    for (s, g) in partials {
        stats.add_scaled(&s, 1.0 / n);
        grad.iter_mut().zip(&g).for_each(|(a, b)| *a = *a + *b);
    }
    stats.entropy = gaussian_entropy(ls);
    let last = n_total - 1;
    grad[last] = grad[last] - T::from(cfg.entropy_coef).unwrap();
    stats.total = stats.policy + cfg.value_coef * stats.value - cfg.entropy_coef * stats.entropy;
    (stats, grad)
}

/// Adam optimizer state over the flat parameter vector.
#[derive(Clone, Debug)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Float> Adam<T> {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-5,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    /// Gradient-descent step on `params`.
    pub fn step(&mut self, params: &mut [T], grad: &[T]) {
        self.t += 1;
        let c = |x: f64| T::from(x).unwrap();
        let (b1, b2) = (c(self.beta1), c(self.beta2));
        let bc1 = c(1.0 - self.beta1.powi(self.t));
        let bc2 = c(1.0 - self.beta2.powi(self.t));
        let (lr, eps) = (c(self.lr), c(self.eps));
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = b1 * *m + (T::one() - b1) * *g;
            *v = b2 * *v + (T::one() - b2) * *g * *g;
            let mh = *m / bc1;
            let vh = *v / bc2;
            *p = *p - lr * mh / (vh.sqrt() + eps);
        }
    }
}

/// Scales `grad` so its Euclidean norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm<T: Float>(grad: &mut [T], max_norm: f64) -> f64 {
    let norm = grad
        .iter()
        .map(|g| g.to_f64().unwrap().powi(2))
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let s = T::from(max_norm / (norm + 1e-12)).unwrap();
        grad.iter_mut().for_each(|g| *g = *g * s);
    }
    norm
}

/// Learner: parameters plus optimizer state.
#[derive(Clone, Debug)]
pub struct PpoLearner<T> {
    pub params: PolicyParams<T>,
    pub adam: Adam<T>,
    pub config: PpoConfig,
}

/// Summary of one [`PpoLearner::update`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    /// Mean of the minibatch statistics of the final epoch.
    pub last_epoch: LossStats,
    pub grad_norm: f64,
    pub minibatches: usize,
}

impl<T: Float + Send + Sync> PpoLearner<T> {
    pub fn new(params: PolicyParams<T>, config: PpoConfig) -> Self {
        let adam = Adam::new(params.n_params(), config.learning_rate);
        Self {
            params,
            adam,
            config,
        }
    }

    /// Epochs of shuffled minibatch updates. Advantages must already be
    /// normalized by the caller.
    pub fn update<R: Rng + ?Sized>(
        &mut self,
        samples: &[Sample],
        rng: &mut R,
    ) -> Result<UpdateStats, AgentError> {
        if samples.is_empty() {
            return Err(AgentError::Config("empty PPO batch".into()));
        }
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut out = UpdateStats::default();
        let mb = self.config.minibatch.min(samples.len());
        for _ in 0..self.config.epochs {
            order.shuffle(rng);
            let mut epoch = LossStats::default();
            let mut count = 0;
            for idx in order.chunks(mb) {
                let batch: Vec<&Sample> = idx.iter().map(|&i| &samples[i]).collect();
                let (stats, mut grad) = loss_and_grad(&self.params, &batch, &self.config);
                if !stats.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(AgentError::NonFinite("PPO loss".into()));
                }
                out.grad_norm = clip_grad_norm(&mut grad, self.config.max_grad_norm);
                let mut flat = self.params.flatten();
                self.adam.step(&mut flat, &grad);
                self.params.unflatten(&flat);
                self.params.clamp_log_std();
                epoch.add_scaled(&stats, 1.0);
                count += 1;
                out.minibatches += 1;
            }
            let mut last = LossStats::default();
            last.add_scaled(&epoch, 1.0 / count as f64);
            out.last_epoch = last;
        }
        if !self.params.all_finite() {
            return Err(AgentError::NonFinite("parameters after update".into()));
        }
        Ok(out)
    }
}

/// Loss only (no gradient), 64-bit, for finite-difference checks.
pub fn loss_value(params: &PolicyParams<f64>, batch: &[&Sample], cfg: &PpoConfig) -> f64 {
    let n = batch.len() as f64;
    let mut total = 0.0;
    for s in batch {
        let mean = params.actor.forward(&s.observation)[0];
        let logp = gaussian_log_prob(s.raw_action, mean, params.log_std);
        let ratio = (logp - s.old_log_prob).exp();
        let v = params.critic.forward(&s.observation)[0];
        total += -clipped_surrogate(ratio, s.advantage, cfg.clip)
            + cfg.value_coef * (v - s.value_target).powi(2);
    }
    total / n - cfg.entropy_coef * gaussian_entropy(params.log_std)
}

/// Largest relative difference between the analytic gradient and central
/// finite differences (step `1e-5`) over every parameter.
///
/// The relative error of a component is `|a - f| / max(|a|, |f|, 1e-6)`.
/// Central differences at this step carry about `1e-11` of rounding noise,
/// so smaller components cannot be resolved to a useful relative accuracy.
pub fn grad_check(params: &PolicyParams<f64>, batch: &[Sample], cfg: &PpoConfig) -> f64 {
    const STEP: f64 = 1e-5;
    let refs: Vec<&Sample> = batch.iter().collect();
    let (_, grad) = loss_and_grad(params, &refs, cfg);
    let flat = params.flatten();
    let mut work = params.clone();
    let mut worst: f64 = 0.0;
    for k in 0..flat.len() {
        let mut p = flat.clone();
        p[k] = flat[k] + STEP;
        work.unflatten(&p);
        let lp = loss_value(&work, &refs, cfg);
        p[k] = flat[k] - STEP;
        work.unflatten(&p);
        let lm = loss_value(&work, &refs, cfg);
        let fd = (lp - lm) / (2.0 * STEP);
        let denom = grad[k].abs().max(fd.abs()).max(1e-6);
        worst = worst.max((grad[k] - fd).abs() / denom);
    }
    worst
}
