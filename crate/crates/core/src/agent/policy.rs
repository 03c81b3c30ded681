//! Tanh-squashed Gaussian policy over the jet flow rate, plus the value critic.

use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::mlp::Mlp;
use super::AgentError;

/// Bounds applied to the log standard deviation after every update.
pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Whether actions are sampled or taken at the policy mean.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActMode {
    Stochastic,
    Deterministic,
}

/// Output of [`PolicyParams::act`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Action {
    /// Jet mass flow rate, strictly inside `(-q_max, q_max)`.
    pub q: f64,
    /// Pre-squash Gaussian sample.
    pub raw: f64,
    /// Log density of `q` (Gaussian density of `raw` plus the tanh correction).
    pub log_prob: f64,
    pub value: f64,
}

/// Actor and critic networks with a state-independent log standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct PolicyParams<T> {
    pub actor: Mlp<T>,
    pub critic: Mlp<T>,
    pub log_std: T,
    pub q_max: f64,
}

/// Log density of `raw` under `N(mean, exp(log_std)^2)`.
pub fn gaussian_log_prob<T: Float>(raw: T, mean: T, log_std: T) -> T {
    let z = (raw - mean) / log_std.exp();
    let half = T::from(0.5).unwrap();
    -half * z * z - log_std - half * T::from(LN_2PI).unwrap()
}

/// `log |dQ/draw|` for `Q = q_max tanh(raw)`.
pub fn squash_log_jacobian(raw: f64, q_max: f64) -> f64 {
    // log(1 - tanh^2 x) = 2 (log 2 - x - softplus(-2x)), stable for large |x|.
    let x = raw.abs();
    let softplus = (-2.0 * x).exp().ln_1p();
    q_max.ln() + 2.0 * (std::f64::consts::LN_2 - x - softplus)
}

/// Entropy of the pre-squash Gaussian.
pub fn gaussian_entropy<T: Float>(log_std: T) -> T {
    T::from(0.5 + 0.5 * LN_2PI).unwrap() + log_std
}

impl<T: Float> PolicyParams<T> {
    /// Networks `obs_dim -> hidden -> hidden -> 1` for actor and critic.
    pub fn new<R: Rng + ?Sized>(
        obs_dim: usize,
        hidden: usize,
        q_max: f64,
        init_log_std: f64,
        rng: &mut R,
    ) -> Self {
        let dims = [obs_dim, hidden, hidden, 1];
        Self {
            actor: Mlp::new(&dims, rng),
            critic: Mlp::new(&dims, rng),
            log_std: T::from(init_log_std).unwrap(),
            q_max,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.actor.n_in()
    }

    pub fn hidden(&self) -> usize {
        self.actor.layers[0].n_out
    }

    pub fn n_params(&self) -> usize {
        self.actor.n_params() + self.critic.n_params() + 1
    }

    /// `[actor, critic, log_std]`.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.n_params());
        self.actor.flatten(&mut out);
        self.critic.flatten(&mut out);
        out.push(self.log_std);
        out
    }

    pub fn unflatten(&mut self, src: &[T]) {
        assert_eq!(src.len(), self.n_params());
        let k = self.actor.unflatten(src);
        let k = k + self.critic.unflatten(&src[k..]);
        self.log_std = src[k];
    }

    pub fn cast<U: Float>(&self) -> PolicyParams<U> {
        PolicyParams {
            actor: self.actor.cast(),
            critic: self.critic.cast(),
            log_std: U::from(self.log_std).unwrap(),
            q_max: self.q_max,
        }
    }

    pub fn clamp_log_std(&mut self) {
        let lo = T::from(LOG_STD_MIN).unwrap();
        let hi = T::from(LOG_STD_MAX).unwrap();
        self.log_std = self.log_std.max(lo).min(hi);
    }

    pub fn all_finite(&self) -> bool {
        self.actor.all_finite() && self.critic.all_finite() && self.log_std.is_finite()
    }

    fn to_input(obs: &[f64]) -> Vec<T> {
        obs.iter().map(|&x| T::from(x).unwrap()).collect()
    }

    /// Policy mean (pre-squash) for an observation.
    pub fn mean(&self, obs: &[f64]) -> f64 {
        self.actor.forward(&Self::to_input(obs))[0].to_f64().unwrap()
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.critic.forward(&Self::to_input(obs))[0].to_f64().unwrap()
    }

    /// Log density of the flow rate produced by `raw`.
    pub fn log_prob(&self, obs: &[f64], raw: f64) -> f64 {
        let mean = self.mean(obs);
        gaussian_log_prob(raw, mean, self.log_std.to_f64().unwrap())
            - squash_log_jacobian(raw, self.q_max)
    }

    /// Chooses a flow rate for one observation.
    pub fn act<R: Rng + ?Sized>(
        &self,
        obs: &[f64],
        mode: ActMode,
        rng: &mut R,
    ) -> Result<Action, AgentError> {
        if obs.len() != self.obs_dim() {
            return Err(AgentError::Shape {
                expected: self.obs_dim(),
                found: obs.len(),
            });
        }
        if obs.iter().any(|x| !x.is_finite()) {
            return Err(AgentError::NonFinite("observation".into()));
        }
        let mean = self.mean(obs);
        let value = self.value(obs);
        let log_std = self.log_std.to_f64().unwrap();
        if !mean.is_finite() || !value.is_finite() || !log_std.is_finite() {
            return Err(AgentError::NonFinite("network output".into()));
        }
        let raw = match mode {
            ActMode::Deterministic => mean,
            ActMode::Stochastic => {
                let z: f64 = StandardNormal.sample(rng);
                mean + log_std.exp() * z
            }
        };
        let q = self.squash(raw);
        let log_prob = gaussian_log_prob(raw, mean, log_std) - squash_log_jacobian(raw, self.q_max);
        Ok(Action {
            q,
            raw,
            log_prob,
            value,
        })
    }

    /// `q_max tanh(raw)`, kept strictly inside the bounds.
    pub fn squash(&self, raw: f64) -> f64 {
        let q = self.q_max * raw.tanh();
        // tanh saturates to exactly 1 in floating point for |raw| > ~19.
        let edge = self.q_max * (1.0 - f64::EPSILON);
        q.clamp(-edge, edge)
    }
}
