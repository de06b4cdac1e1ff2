//! Bounded Gaussian policy.
//!
//! The actor network maps the normalized UAV position to one pre-squash
//! mean per action dimension; a state-independent learnable log-stddev
//! vector completes the distribution. Samples are squashed into the
//! per-dimension bounds through tanh, and log-densities carry the
//! change-of-variables correction, so every emitted action is valid by
//! construction:
//!
//! - `a = lo + (hi - lo) * (tanh(u) + 1) / 2`, `u ~ Normal(mean, std)`
//! - `log p(a) = log Normal(u) - sum_d log (da_d / du_d)`
//!
//! Flat action vectors are ordered heading, speed, powers, splits,
//! reflection phases, transmission phases.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::env::{Action, State};
use crate::nn::Mlp;
use crate::scenario::ScenarioConfig;

/// Clamp range for the learnable log-stddev.
pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 1.0;

const HALF_LN_2PI: f64 = 0.9189385332046727;

/// Structured action space: dimension layout and per-dimension bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    pub num_ues: usize,
    pub num_ris: usize,
    pub elements: usize,
    pub v_max: f64,
    pub p_max: f64,
}

impl ActionSpace {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        Self {
            num_ues: cfg.num_ues,
            num_ris: cfg.num_ris,
            elements: cfg.elements_per_ris,
            v_max: cfg.v_max,
            p_max: cfg.p_max,
        }
    }

    /// 2 + K + I + 2*M*I.
    pub fn dim(&self) -> usize {
        Action::dim(self.num_ues, self.num_ris, self.elements)
    }

    /// Lower and upper bound of dimension `d`.
    pub fn bounds(&self, d: usize) -> (f64, f64) {
        let k = self.num_ues;
        let i = self.num_ris;
        if d == 0 {
            (0.0, TAU) // heading
        } else if d == 1 {
            (0.0, self.v_max)
        } else if d < 2 + k {
            (0.0, self.p_max)
        } else if d < 2 + k + i {
            (0.0, 1.0) // time split fraction
        } else {
            (0.0, TAU) // phase shift
        }
    }

    /// Structure a flat vector (in layout order) into an [`Action`].
    pub fn unflatten(&self, flat: &[f64]) -> Action {
        debug_assert_eq!(flat.len(), self.dim());
        let k = self.num_ues;
        let i = self.num_ris;
        let m = self.elements;
        let mut idx = 2 + k + i;
        let mut take_panels = |flat: &[f64]| -> Vec<Vec<f64>> {
            (0..i)
                .map(|_| {
                    let slice = flat[idx..idx + m].to_vec();
                    idx += m;
                    slice
                })
                .collect()
        };
        let phases_r = take_panels(flat);
        let phases_t = take_panels(flat);
        Action {
            heading: flat[0],
            speed: flat[1],
            powers: flat[2..2 + k].to_vec(),
            splits: flat[2 + k..2 + k + i].to_vec(),
            phases_r,
            phases_t,
        }
    }
}

/// Pre-squash values beyond this are clamped so tanh stays strictly inside
/// (-1, 1) in f64 and squashed actions never touch a half-open bound.
const SQUASH_LIMIT: f64 = 18.0;

/// Soft bound on the pre-squash policy mean. Without it the mean can drift
/// deep into tanh saturation where per-dimension exploration collapses and
/// the dimension goes dead; bounding keeps a usable gradient everywhere.
const MEAN_LIMIT: f64 = 3.0;

/// Smoothly map a raw network output into (-MEAN_LIMIT, MEAN_LIMIT).
pub(crate) fn bound_mean(raw: f64) -> f64 {
    MEAN_LIMIT * (raw / MEAN_LIMIT).tanh()
}

/// Derivative of [`bound_mean`] at `raw`.
pub(crate) fn bound_mean_grad(raw: f64) -> f64 {
    let t = (raw / MEAN_LIMIT).tanh();
    1.0 - t * t
}

/// Squash an unbounded value into the open interval (lo, hi).
pub fn squash(u: f64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * 0.5 * (u.clamp(-SQUASH_LIMIT, SQUASH_LIMIT).tanh() + 1.0)
}

/// `log (d squash / du)`, computed stably for large |u| via
/// `log(1 - tanh^2 u) = 2 (ln 2 - u - softplus(-2u))`.
pub fn log_squash_jacobian(u: f64, lo: f64, hi: f64) -> f64 {
    let softplus = |x: f64| {
        if x > 30.0 {
            x
        } else {
            x.exp().ln_1p()
        }
    };
    ((hi - lo) * 0.5).ln() + 2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// A pre-squash sample with its executed action and behavior density.
#[derive(Debug, Clone)]
pub struct SampledAction {
    /// Pre-squash Gaussian draw, one entry per action dimension.
    pub u: Vec<f64>,
    /// Squashed flat action vector.
    pub flat: Vec<f64>,
    /// Log-density of the squashed action under the sampling policy.
    pub log_prob: f64,
}

/// Gaussian policy with tanh-squashed output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean_net: Mlp,
    /// Learnable per-dimension log-stddev of the pre-squash Gaussian.
    pub log_std: Vec<f64>,
    pub space: ActionSpace,
    /// Area side length used to normalize the state into the unit square.
    pub area_size: f64,
}

impl GaussianPolicy {
    pub fn new(mean_net: Mlp, init_stddev: f64, space: ActionSpace, area_size: f64) -> Self {
        assert_eq!(mean_net.output_dim(), space.dim());
        let log_std = vec![init_stddev.ln(); space.dim()];
        Self {
            mean_net,
            log_std,
            space,
            area_size,
        }
    }

    pub fn normalize_state(&self, state: &State) -> [f64; 2] {
        [
            state.uav_xy.0 / self.area_size,
            state.uav_xy.1 / self.area_size,
        ]
    }

    pub fn stddev(&self) -> Vec<f64> {
        self.log_std
            .iter()
            .map(|ls| ls.clamp(LOG_STD_MIN, LOG_STD_MAX).exp())
            .collect()
    }

    /// Pre-squash (softly bounded) mean vector at a state.
    pub fn pre_squash_mean(&self, state: &State) -> Vec<f64> {
        self.mean_net
            .forward(&self.normalize_state(state))
            .into_iter()
            .map(bound_mean)
            .collect()
    }

    /// Squashed per-dimension mean and the (strictly positive) stddev.
    pub fn forward(&self, state: &State) -> (Vec<f64>, Vec<f64>) {
        let mu = self.pre_squash_mean(state);
        let mean = mu
            .iter()
            .enumerate()
            .map(|(d, &u)| {
                let (lo, hi) = self.space.bounds(d);
                squash(u, lo, hi)
            })
            .collect();
        (mean, self.stddev())
    }

    /// Deterministic action: the squashed mean.
    pub fn act_deterministic(&self, state: &State) -> Action {
        let (mean, _) = self.forward(state);
        self.space.unflatten(&mean)
    }

    /// Draw an action and record its pre-squash sample and log-density.
    /// Samples are kept inside the squash clamp so the stored pre-squash
    /// value and the executed action stay consistent.
    pub fn sample(&self, state: &State, rng: &mut ChaCha8Rng) -> SampledAction {
        let mu = self.pre_squash_mean(state);
        let std = self.stddev();
        let u: Vec<f64> = mu
            .iter()
            .zip(std.iter())
            .map(|(m, s)| {
                (m + s * rng.sample::<f64, _>(StandardNormal)).clamp(-SQUASH_LIMIT, SQUASH_LIMIT)
            })
            .collect();
        let flat: Vec<f64> = u
            .iter()
            .enumerate()
            .map(|(d, &ud)| {
                let (lo, hi) = self.space.bounds(d);
                squash(ud, lo, hi)
            })
            .collect();
        let log_prob = self.log_prob_given_mean(&mu, &u);
        SampledAction { u, flat, log_prob }
    }

    /// Log-density of the squashed action whose pre-squash sample is `u`.
    pub fn log_prob(&self, state: &State, u: &[f64]) -> f64 {
        let mu = self.pre_squash_mean(state);
        self.log_prob_given_mean(&mu, u)
    }

    pub(crate) fn log_prob_given_mean(&self, mu: &[f64], u: &[f64]) -> f64 {
        let std = self.stddev();
        let mut logp = 0.0;
        for d in 0..u.len() {
            let z = (u[d] - mu[d]) / std[d];
            logp += -0.5 * z * z - std[d].ln() - HALF_LN_2PI;
            let (lo, hi) = self.space.bounds(d);
            logp -= log_squash_jacobian(u[d], lo, hi);
        }
        logp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn desk_space() -> ActionSpace {
        ActionSpace::from_config(&ScenarioConfig::desk())
    }

    fn desk_policy(seed: u64) -> GaussianPolicy {
        let space = desk_space();
        let net = Mlp::new(&[2, 16, space.dim()], &mut rng(seed));
        GaussianPolicy::new(net, 0.5, space, 240.0)
    }

    #[test]
    fn dimensionality_matches_layout() {
        let space = desk_space();
        assert_eq!(space.dim(), 2 + 4 + 2 + 2 * 8 * 2);
        let flat: Vec<f64> = (0..space.dim()).map(|d| d as f64 * 1e-3).collect();
        let action = space.unflatten(&flat);
        assert_eq!(action.powers.len(), 4);
        assert_eq!(action.splits.len(), 2);
        assert_eq!(action.phases_r.len(), 2);
        assert_eq!(action.phases_r[0].len(), 8);
        assert_eq!(action.phases_t[1].len(), 8);
        assert_eq!(action.heading, 0.0);
        assert_eq!(action.phases_t[1][7], flat[space.dim() - 1]);
    }

    #[test]
    fn zero_weights_give_mid_range_means() {
        let space = desk_space();
        let net = Mlp::new(&[2, 8, space.dim()], &mut rng(1)).zeros_like();
        let policy = GaussianPolicy::new(net, 0.5, space.clone(), 240.0);
        let state = State {
            uav_xy: (120.0, 120.0),
            slot: 0,
        };
        let (mean, std) = policy.forward(&state);
        for (d, m) in mean.iter().enumerate() {
            let (lo, hi) = space.bounds(d);
            assert!((m - (lo + hi) / 2.0).abs() < 1e-12, "dim {d} not mid-range");
        }
        assert!(std.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn outputs_finite_at_area_corners() {
        let policy = desk_policy(2);
        for corner in [(0.0, 0.0), (0.0, 240.0), (240.0, 0.0), (240.0, 240.0)] {
            let state = State {
                uav_xy: corner,
                slot: 0,
            };
            let (mean, std) = policy.forward(&state);
            assert!(mean.iter().all(|v| v.is_finite()));
            assert!(std.iter().all(|v| v.is_finite() && *v > 0.0));
        }
    }

    #[test]
    fn samples_respect_bounds() {
        let policy = desk_policy(3);
        let mut r = rng(4);
        let state = State {
            uav_xy: (50.0, 200.0),
            slot: 7,
        };
        for _ in 0..200 {
            let s = policy.sample(&state, &mut r);
            for (d, &v) in s.flat.iter().enumerate() {
                let (lo, hi) = policy.space.bounds(d);
                assert!(v > lo && v < hi, "dim {d} value {v} outside ({lo}, {hi})");
            }
        }
    }

    /// Density oracle: independent Gaussian density plus a numerical
    /// change-of-variables correction.
    #[test]
    fn log_prob_matches_density_oracle() {
        let policy = desk_policy(5);
        let mut r = rng(6);
        let state = State {
            uav_xy: (100.0, 60.0),
            slot: 0,
        };
        let mu = policy.pre_squash_mean(&state);
        let std = policy.stddev();
        for _ in 0..50 {
            let s = policy.sample(&state, &mut r);
            let mut oracle = 0.0;
            for d in 0..s.u.len() {
                // Gaussian pdf evaluated directly.
                let z = (s.u[d] - mu[d]) / std[d];
                let pdf = (-0.5 * z * z).exp() / (std[d] * (2.0 * std::f64::consts::PI).sqrt());
                oracle += pdf.ln();
                // Numerical derivative of the squash map.
                let (lo, hi) = policy.space.bounds(d);
                let h = 1e-6;
                let dsq = (squash(s.u[d] + h, lo, hi) - squash(s.u[d] - h, lo, hi)) / (2.0 * h);
                oracle -= dsq.ln();
            }
            assert!(
                (s.log_prob - oracle).abs() < 1e-6,
                "log_prob {} vs oracle {oracle}",
                s.log_prob
            );
        }
    }

    #[test]
    fn log_jacobian_stable_for_extreme_samples() {
        for u in [-40.0, -5.0, 0.0, 5.0, 40.0] {
            let v = log_squash_jacobian(u, 0.0, TAU);
            assert!(v.is_finite());
        }
    }

    #[test]
    fn deterministic_action_is_valid_and_repeatable() {
        let policy = desk_policy(7);
        let state = State {
            uav_xy: (10.0, 230.0),
            slot: 3,
        };
        let a = policy.act_deterministic(&state);
        let b = policy.act_deterministic(&state);
        assert_eq!(a, b);
        assert!(a.heading >= 0.0 && a.heading < TAU);
        assert!(a.speed >= 0.0 && a.speed <= policy.space.v_max);
    }
}
