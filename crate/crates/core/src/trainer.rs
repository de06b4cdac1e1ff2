//! Lagrangian penalized-reward PPO.
//!
//! Three nested timescales drive the optimization:
//!
//! 1. fast — the critic takes one mean-squared TD-error step per update
//!    round (a round fires when the sample buffer holds `batch_size` steps
//!    or the episode ends, i.e. ceil(N / batch_size) rounds per episode);
//! 2. intermediate — the actor takes one clipped-importance-surrogate
//!    ascent step per round, with the behavior policy re-synced from the
//!    target every `sync_interval` rounds;
//! 3. slow — the Lagrange multipliers move once per episode along the
//!    cumulative constraint values, projected back onto [0, inf).
//!
//! The per-step reward fed to the networks is the penalized reward
//! `r - sum_k lambda_rate_k * c_rate_k - sum_k lambda_energy_k * c_energy_k`,
//! standardized by running statistics for numerical stability (raw values
//! are kept in the traces). Learning-rate ordering
//! `eta_critic > eta_actor > max(eta_lambda_*)` is validated at
//! construction.
//!
//! Training is a single logical sequence; checkpoints capture every piece
//! of mutable state (networks, optimizer accumulators, running statistics,
//! RNG streams), so a reloaded run continues bit-identically.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::ActionOverride;
use crate::env::{Architecture, EpisodeTrace, State, StepOutcome, UplinkEnv};
use crate::error::Error;
use crate::nn::{Mlp, StepRule, Stepper};
use crate::policy::{ActionSpace, GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
use crate::scenario::{Scenario, ScenarioConfig};
use crate::Result;

/// Non-negative Lagrange multipliers, one pair per UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub rate: Vec<f64>,
    pub energy: Vec<f64>,
}

impl Multipliers {
    /// Initial multipliers: all zero.
    pub fn zeros(num_ues: usize) -> Self {
        Self {
            rate: vec![0.0; num_ues],
            energy: vec![0.0; num_ues],
        }
    }

    pub fn all_non_negative(&self) -> bool {
        self.rate.iter().chain(self.energy.iter()).all(|&l| l >= 0.0)
    }

    pub fn mean_rate(&self) -> f64 {
        self.rate.iter().sum::<f64>() / self.rate.len() as f64
    }

    pub fn mean_energy(&self) -> f64 {
        self.energy.iter().sum::<f64>() / self.energy.len() as f64
    }
}

/// How the per-step training reward is formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Raw sum rate; multipliers pinned at zero (the unconstrained case).
    Unconstrained,
    /// Penalized reward with multipliers updated per episode.
    Lagrangian,
    /// Penalized reward with fixed manual coefficients and no adaptation.
    Shaping { chi_rate: f64, chi_energy: f64 },
}

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Critic learning rate (fast timescale).
    pub eta_critic: f64,
    /// Actor learning rate (intermediate timescale).
    pub eta_actor: f64,
    /// Rate-multiplier step size (slow timescale).
    pub eta_lambda_rate: f64,
    /// Energy-multiplier step size (slow timescale).
    pub eta_lambda_energy: f64,
    /// Discount factor for critic targets.
    pub gamma: f64,
    /// Clip width of the importance-weight surrogate.
    pub clip_epsilon: f64,
    /// Update-round buffer size |B|.
    pub batch_size: usize,
    /// Behavior-policy sync period, in update rounds.
    pub sync_interval: usize,
    /// Number of training episodes G.
    pub episodes: usize,
    /// Initial pre-squash exploration stddev (learnable afterwards).
    pub init_stddev: f64,
    /// Hidden layer widths shared by actor and critic.
    pub hidden: Vec<usize>,
    pub step_rule: StepRule,
    /// Clip on the global gradient norm, if any.
    pub grad_clip: Option<f64>,
    /// Standardize advantages within each update round.
    pub normalize_advantages: bool,
    /// Clip the importance ratio itself before multiplying by the
    /// advantage (the literal reading) instead of the pessimistic
    /// min over products.
    pub literal_ratio_clip: bool,
    /// Exponential smoothing of the per-episode constraint estimates used
    /// by the multiplier update; 0 = latest episode only.
    pub lambda_smoothing: f64,
    /// Per-episode decay of the multiplier step sizes:
    /// `eta(g) = eta / (1 + decay * g)`. Damps dual oscillation around the
    /// constraint boundary.
    pub eta_lambda_decay: f64,
    /// Training-time constraint tightening: the penalized reward and the
    /// multiplier updates see thresholds shrunk by this fraction, leaving a
    /// safety margin against the dual's oscillation. Reported traces and
    /// evaluation always use the true thresholds.
    pub constraint_margin: f64,
}

impl TrainConfig {
    /// Defaults sized for the given scenario. Multiplier step sizes are
    /// normalized by the constraint scales so both constraints adapt at
    /// comparable speed while keeping the timescale ordering valid.
    pub fn for_scenario(cfg: &ScenarioConfig) -> Self {
        let eta_actor = 3.0e-3;
        let eta_lambda_energy = eta_actor / 5.0;
        let eta_lambda_rate = if cfg.r_min > 0.0 {
            let scale = cfg.e_max / (cfg.num_slots as f64 * cfg.r_min);
            eta_lambda_energy * scale * scale
        } else {
            0.0
        };
        Self {
            eta_critic: 1.0e-2,
            eta_actor,
            eta_lambda_rate,
            eta_lambda_energy,
            gamma: 0.99,
            clip_epsilon: 0.2,
            batch_size: 64,
            sync_interval: 4,
            episodes: 1500,
            init_stddev: 0.5,
            hidden: vec![128, 128],
            step_rule: StepRule::RmsProp,
            grad_clip: Some(5.0),
            normalize_advantages: true,
            literal_ratio_clip: false,
            lambda_smoothing: 0.93,
            eta_lambda_decay: 1.0e-3,
            constraint_margin: 0.1,
        }
    }

    /// CI-scale defaults: smaller networks, a short episode budget, and a
    /// batch size giving several update rounds per 50-slot episode.
    pub fn desk(cfg: &ScenarioConfig) -> Self {
        Self {
            episodes: 4000,
            hidden: vec![64, 64],
            batch_size: 16,
            ..Self::for_scenario(cfg)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lmax = self.eta_lambda_rate.max(self.eta_lambda_energy);
        if !(self.eta_critic > self.eta_actor && self.eta_actor > lmax) {
            return Err(Error::Config(format!(
                "timescale ordering violated: need eta_critic > eta_actor > max(eta_lambda_*), \
                 got {} / {} / {}",
                self.eta_critic, self.eta_actor, lmax
            )));
        }
        if self.eta_lambda_rate < 0.0 || self.eta_lambda_energy < 0.0 {
            return Err(Error::Config("multiplier step sizes must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config("gamma must lie in [0, 1]".into()));
        }
        if !(self.clip_epsilon > 0.0 && self.clip_epsilon < 1.0) {
            return Err(Error::Config("clip_epsilon must lie in (0, 1)".into()));
        }
        if self.batch_size < 1 || self.sync_interval < 1 || self.episodes < 1 {
            return Err(Error::Config(
                "batch_size, sync_interval and episodes must be >= 1".into(),
            ));
        }
        if !(self.init_stddev > 0.0) {
            return Err(Error::Config("init_stddev must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.lambda_smoothing) {
            return Err(Error::Config("lambda_smoothing must lie in [0, 1)".into()));
        }
        if self.eta_lambda_decay < 0.0 {
            return Err(Error::Config("eta_lambda_decay must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.constraint_margin) {
            return Err(Error::Config("constraint_margin must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Penalized reward: `r - sum_k lr_k c_r_k - sum_k le_k c_e_k`.
pub fn penalized_reward(
    reward: f64,
    c_rate: &[f64],
    c_energy: &[f64],
    lambdas: &Multipliers,
) -> f64 {
    let rate_term: f64 = lambdas
        .rate
        .iter()
        .zip(c_rate.iter())
        .map(|(l, c)| l * c)
        .sum();
    let energy_term: f64 = lambdas
        .energy
        .iter()
        .zip(c_energy.iter())
        .map(|(l, c)| l * c)
        .sum();
    reward - rate_term - energy_term
}

/// Normalize a state into the critic/actor input square.
fn normalize_state(state: &State, area: f64) -> [f64; 2] {
    [state.uav_xy.0 / area, state.uav_xy.1 / area]
}

/// Critic value estimate for a state.
pub fn critic_value(critic: &Mlp, state: &State, area: f64) -> f64 {
    critic.forward(&normalize_state(state, area))[0]
}

/// Discounted backward recursion over one buffer:
/// `V'_j = r̂_j + gamma * V'_{j+1}`, bootstrapped past the last entry
/// with the critic's estimate of the final next state.
pub fn critic_targets(rewards: &[f64], bootstrap_value: f64, gamma: f64) -> Result<Vec<f64>> {
    if rewards.is_empty() {
        return Err(Error::Usage("critic_targets requires a non-empty batch".into()));
    }
    let mut targets = vec![0.0; rewards.len()];
    let mut next = bootstrap_value;
    for j in (0..rewards.len()).rev() {
        next = rewards[j] + gamma * next;
        targets[j] = next;
    }
    Ok(targets)
}

/// Mean squared TD error over the buffer and its gradient with respect to
/// the critic parameters.
pub fn critic_loss_and_grad(
    critic: &Mlp,
    inputs: &[[f64; 2]],
    targets: &[f64],
) -> Result<(f64, Mlp)> {
    if inputs.is_empty() {
        return Err(Error::Usage("empty batch".into()));
    }
    let scale = 1.0 / inputs.len() as f64;
    let mut loss = 0.0;
    let mut grad = critic.zeros_like();
    for (x, &target) in inputs.iter().zip(targets.iter()) {
        let cache = critic.forward_cached(x);
        let v = cache.output()[0];
        let err = v - target;
        loss += scale * err * err;
        critic.backward(&cache, &[2.0 * scale * err], &mut grad);
    }
    if !loss.is_finite() {
        return Err(Error::Usage("non-finite critic loss".into()));
    }
    Ok((loss, grad))
}

/// Clipped-surrogate contribution of one sample: the pessimistic
/// `min(rho * A, clip(rho, 1 - eps, 1 + eps) * A)` with
/// `rho = exp(logp_target - logp_behavior)`.
pub fn importance_weight(
    logp_target: f64,
    logp_behavior: f64,
    advantage: f64,
    epsilon: f64,
) -> f64 {
    contribution_and_gate(logp_target, logp_behavior, advantage, epsilon, false).0
}

/// Returns the surrogate contribution and the derivative factor
/// d(contribution)/d(logp_target) = gate * A * rho.
fn contribution_and_gate(
    logp_target: f64,
    logp_behavior: f64,
    advantage: f64,
    epsilon: f64,
    literal: bool,
) -> (f64, f64) {
    let rho = (logp_target - logp_behavior).exp();
    let clipped = rho.clamp(1.0 - epsilon, 1.0 + epsilon);
    if literal {
        // min over the ratio itself, then multiply by the advantage.
        let iw = rho.min(clipped);
        let active = rho <= 1.0 + epsilon;
        (iw * advantage, if active { advantage * rho } else { 0.0 })
    } else {
        let s_plain = rho * advantage;
        let s_clip = clipped * advantage;
        if s_plain <= s_clip {
            (s_plain, advantage * rho)
        } else {
            // The clipped branch is active and flat outside the band.
            (s_clip, 0.0)
        }
    }
}

/// Batch sample as seen by the update rules.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchEntry {
    pub state: State,
    /// Pre-squash action sample.
    pub u: Vec<f64>,
    /// Behavior-policy log-density of the sample.
    pub logp_behavior: f64,
    /// Raw penalized reward.
    pub reward: f64,
    pub next_state: State,
}

/// Mean clipped surrogate over a buffer and its ascent gradient with
/// respect to the actor mean network and the log-stddev vector.
pub fn actor_surrogate_and_grad(
    policy: &GaussianPolicy,
    batch: &[BatchEntry],
    advantages: &[f64],
    epsilon: f64,
    literal: bool,
) -> Result<(f64, Mlp, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Usage("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let std = policy.stddev();
    let mut surrogate = 0.0;
    let mut grad = policy.mean_net.zeros_like();
    let mut grad_log_std = vec![0.0; policy.log_std.len()];
    for (entry, &adv) in batch.iter().zip(advantages.iter()) {
        let input = policy.normalize_state(&entry.state);
        let cache = policy.mean_net.forward_cached(&input);
        let raw = cache.output();
        let mu: Vec<f64> = raw.iter().map(|&r| crate::policy::bound_mean(r)).collect();
        let logp = policy.log_prob_given_mean(&mu, &entry.u);
        let (contribution, dlogp_factor) =
            contribution_and_gate(logp, entry.logp_behavior, adv, epsilon, literal);
        surrogate += scale * contribution;
        if dlogp_factor != 0.0 {
            let coeff = scale * dlogp_factor;
            // dlogp/dmu_d = (u_d - mu_d) / sigma_d^2, chained through the
            // mean soft bound and backpropagated through the network.
            let seed: Vec<f64> = entry
                .u
                .iter()
                .zip(mu.iter().zip(raw.iter()))
                .zip(std.iter())
                .map(|((u, (m, r)), s)| {
                    coeff * (u - m) / (s * s) * crate::policy::bound_mean_grad(*r)
                })
                .collect();
            policy.mean_net.backward(&cache, &seed, &mut grad);
            // dlogp/dlog_std_d = ((u_d - mu_d)/sigma_d)^2 - 1 while the
            // clamp is inactive.
            for d in 0..grad_log_std.len() {
                if (LOG_STD_MIN..=LOG_STD_MAX).contains(&policy.log_std[d]) {
                    let z = (entry.u[d] - mu[d]) / std[d];
                    grad_log_std[d] += coeff * (z * z - 1.0);
                }
            }
        }
    }
    if !surrogate.is_finite() {
        return Err(Error::Usage("non-finite actor surrogate".into()));
    }
    Ok((surrogate, grad, grad_log_std))
}

/// Projected multiplier ascent along the cumulative constraint values of a
/// complete trace: `lambda' = max(0, lambda + eta * J)`.
pub fn lagrange_update(
    lambdas: &Multipliers,
    trace: &EpisodeTrace,
    expected_slots: usize,
    eta_rate: f64,
    eta_energy: f64,
) -> Result<Multipliers> {
    if trace.num_slots() != expected_slots {
        return Err(Error::Usage(format!(
            "multiplier update needs a complete {expected_slots}-slot trace, got {}",
            trace.num_slots()
        )));
    }
    Ok(Multipliers {
        rate: lambdas
            .rate
            .iter()
            .zip(trace.cumulative_c_rate.iter())
            .map(|(l, j)| (l + eta_rate * j).max(0.0))
            .collect(),
        energy: lambdas
            .energy
            .iter()
            .zip(trace.cumulative_c_energy.iter())
            .map(|(l, j)| (l + eta_energy * j).max(0.0))
            .collect(),
    })
}

/// Running mean/variance of the penalized reward stream.
///
/// Exponentially decayed with bias correction, so the normalizer tracks the
/// reward scale as the multipliers (and with them the penalty magnitude)
/// drift over training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardStats {
    count: u64,
    decay: f64,
    weight: f64,
    mean_acc: f64,
    sq_acc: f64,
}

impl RewardStats {
    pub fn new() -> Self {
        Self {
            count: 0,
            decay: 0.999,
            weight: 0.0,
            mean_acc: 0.0,
            sq_acc: 0.0,
        }
    }

    pub fn update(&mut self, x: f64) {
        self.count += 1;
        self.weight = self.decay * self.weight + (1.0 - self.decay);
        self.mean_acc = self.decay * self.mean_acc + (1.0 - self.decay) * x;
        self.sq_acc = self.decay * self.sq_acc + (1.0 - self.decay) * x * x;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.mean_acc / self.weight
        }
    }

    pub fn std(&self) -> f64 {
        if self.count < 2 {
            1.0
        } else {
            let mean = self.mean();
            let var = (self.sq_acc / self.weight - mean * mean).max(0.0);
            var.sqrt().max(1.0e-8)
        }
    }

    pub fn standardize(&self, x: f64) -> f64 {
        (x - self.mean()) / self.std()
    }
}

impl Default for RewardStats {
    fn default() -> Self {
        Self::new()
    }
}

/// One row of the training log.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    /// Slot-averaged sum rate, bits/s/Hz.
    pub throughput_bpshz: f64,
    /// Worst per-UE average rate this episode, bits/s.
    pub min_avg_rate_bps: f64,
    /// Largest per-UE episode energy, joules.
    pub max_energy_j: f64,
    pub mean_lambda_rate: f64,
    pub mean_lambda_energy: f64,
    /// Mean critic TD loss over this episode's update rounds.
    pub critic_loss: f64,
    /// Mean actor surrogate over this episode's update rounds.
    pub actor_surrogate: f64,
    /// Per-UE cumulative rate-constraint values.
    pub j_rate: Vec<f64>,
    /// Per-UE cumulative energy-constraint values.
    pub j_energy: Vec<f64>,
    /// Update rounds performed in this episode.
    pub rounds: usize,
}

/// Mutable training state; serializable in full so checkpoints resume
/// bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainerState {
    pub config: TrainConfig,
    pub reward_mode: RewardMode,
    pub action_override: ActionOverride,
    pub actor_target: GaussianPolicy,
    pub actor_behavior: GaussianPolicy,
    pub critic: Mlp,
    pub multipliers: Multipliers,
    actor_stepper: Stepper,
    critic_stepper: Stepper,
    reward_stats: RewardStats,
    pub update_rounds: usize,
    pub episodes_done: usize,
    rng_env: ChaCha8Rng,
    rng_policy: ChaCha8Rng,
    smoothed_j_rate: Option<Vec<f64>>,
    smoothed_j_energy: Option<Vec<f64>>,
}

/// Checkpoint envelope: the scenario/architecture pair rebuilds the
/// environment, the state carries everything else.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub scenario: Scenario,
    pub architecture: Architecture,
    pub state: TrainerState,
}

/// The three-timescale trainer.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub env: UplinkEnv,
    pub state: TrainerState,
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 over (seed, stream) for independent substreams.
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

impl Trainer {
    pub fn new(
        env: UplinkEnv,
        config: TrainConfig,
        reward_mode: RewardMode,
        action_override: ActionOverride,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let cfg = &env.scenario.config;
        let space = ActionSpace::from_config(cfg);
        let mut sizes = vec![2];
        sizes.extend_from_slice(&config.hidden);
        let mut actor_sizes = sizes.clone();
        actor_sizes.push(space.dim());
        let mut critic_sizes = sizes;
        critic_sizes.push(1);

        let mut rng_init = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
        let actor_net = Mlp::new(&actor_sizes, &mut rng_init);
        let critic = Mlp::new(&critic_sizes, &mut rng_init);
        let actor_target =
            GaussianPolicy::new(actor_net, config.init_stddev, space, cfg.area_size);
        let actor_behavior = actor_target.clone();
        let actor_stepper = Stepper::new(
            config.step_rule,
            &actor_target.mean_net,
            actor_target.log_std.len(),
        );
        let critic_stepper = Stepper::new(config.step_rule, &critic, 0);
        let multipliers = Multipliers::zeros(cfg.num_ues);

        Ok(Self {
            env,
            state: TrainerState {
                config,
                reward_mode,
                action_override,
                actor_target,
                actor_behavior,
                critic,
                multipliers,
                actor_stepper,
                critic_stepper,
                reward_stats: RewardStats::new(),
                update_rounds: 0,
                episodes_done: 0,
                rng_env: ChaCha8Rng::seed_from_u64(derive_seed(seed, 1)),
                rng_policy: ChaCha8Rng::seed_from_u64(derive_seed(seed, 2)),
                smoothed_j_rate: None,
                smoothed_j_energy: None,
            },
        })
    }

    pub fn policy(&self) -> &GaussianPolicy {
        &self.state.actor_target
    }

    /// Per-slot threshold shifts implementing the training-time margin.
    fn margin_shifts(&self) -> (f64, f64) {
        let cfg = &self.env.scenario.config;
        let m = self.state.config.constraint_margin;
        (m * cfg.r_min, m * cfg.e_max / cfg.num_slots as f64)
    }

    fn step_reward(&self, outcome: &StepOutcome) -> f64 {
        match self.state.reward_mode {
            RewardMode::Unconstrained => outcome.reward,
            RewardMode::Lagrangian => {
                let (dr, de) = self.margin_shifts();
                let c_rate: Vec<f64> = outcome.c_rate.iter().map(|c| c + dr).collect();
                let c_energy: Vec<f64> = outcome.c_energy.iter().map(|c| c + de).collect();
                penalized_reward(
                    outcome.reward,
                    &c_rate,
                    &c_energy,
                    &self.state.multipliers,
                )
            }
            RewardMode::Shaping {
                chi_rate,
                chi_energy,
            } => crate::baselines::reward_shaping_reward(
                outcome.reward,
                &outcome.c_rate,
                &outcome.c_energy,
                chi_rate,
                chi_energy,
            ),
        }
    }

    /// One critic step then one actor step on the buffered samples.
    fn update_round(&mut self, batch: &[BatchEntry]) -> Result<(f64, f64)> {
        let st = &mut self.state;
        let area = self.env.scenario.config.area_size;
        let cfg = &st.config;

        let rewards: Vec<f64> = batch
            .iter()
            .map(|e| st.reward_stats.standardize(e.reward))
            .collect();
        let bootstrap = critic_value(&st.critic, &batch.last().unwrap().next_state, area);
        let targets = critic_targets(&rewards, bootstrap, cfg.gamma)?;

        let inputs: Vec<[f64; 2]> = batch
            .iter()
            .map(|e| normalize_state(&e.state, area))
            .collect();
        let (critic_loss, mut cgrad) = critic_loss_and_grad(&st.critic, &inputs, &targets)?;
        clip_gradient(&mut cgrad, &mut [], cfg.grad_clip);
        st.critic_stepper
            .step(&mut st.critic, &cgrad, cfg.eta_critic, -1.0);

        // Advantages from the just-updated critic.
        let mut advantages: Vec<f64> = batch
            .iter()
            .zip(targets.iter())
            .map(|(e, t)| t - critic_value(&st.critic, &e.state, area))
            .collect();
        if cfg.normalize_advantages {
            standardize_in_place(&mut advantages);
        }

        let (surrogate, mut agrad, mut ls_grad) = actor_surrogate_and_grad(
            &st.actor_target,
            batch,
            &advantages,
            cfg.clip_epsilon,
            cfg.literal_ratio_clip,
        )?;
        clip_gradient(&mut agrad, &mut ls_grad, cfg.grad_clip);
        st.actor_stepper
            .step(&mut st.actor_target.mean_net, &agrad, cfg.eta_actor, 1.0);
        // The exploration scale adapts slower than the mean; fast stddev
        // swings inflate the gap between the stochastic training policy and
        // the deterministic evaluation policy.
        st.actor_stepper
            .step_extra(&mut st.actor_target.log_std, &ls_grad, cfg.eta_actor / 3.0, 1.0);
        for ls in st.actor_target.log_std.iter_mut() {
            *ls = ls.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }

        st.update_rounds += 1;
        if st.update_rounds % cfg.sync_interval == 0 {
            sync_behavior(st);
        }
        Ok((critic_loss, surrogate))
    }

    /// Run one full episode: collect, update per buffer, then move the
    /// multipliers. Returns the episode log row.
    pub fn run_episode(&mut self) -> Result<EpisodeLog> {
        let num_ues = self.env.num_ues();
        let n_slots = self.env.num_slots();
        let v_max = self.env.scenario.config.v_max;

        let mut state = self.env.reset();
        let mut batch: Vec<BatchEntry> = Vec::with_capacity(self.state.config.batch_size);
        let mut steps: Vec<StepOutcome> = Vec::with_capacity(n_slots);
        let mut losses = Vec::new();
        let mut surrogates = Vec::new();

        for n in 0..n_slots {
            let sampled = {
                let st = &mut self.state;
                st.actor_target.sample(&state, &mut st.rng_policy)
            };
            let logp_behavior = self.state.actor_behavior.log_prob(&state, &sampled.u);
            let mut action = self.state.actor_target.space.unflatten(&sampled.flat);
            {
                let st = &mut self.state;
                st.action_override
                    .apply(&mut action, &state, v_max, &mut st.rng_policy);
            }
            let outcome = self.env.step(&state, &action, &mut self.state.rng_env)?;
            let reward = self.step_reward(&outcome);
            self.state.reward_stats.update(reward);
            batch.push(BatchEntry {
                state,
                u: sampled.u,
                logp_behavior,
                reward,
                next_state: outcome.next_state,
            });
            state = outcome.next_state;
            steps.push(outcome);

            if batch.len() == self.state.config.batch_size || n == n_slots - 1 {
                let (loss, surrogate) = self.update_round(&batch)?;
                losses.push(loss);
                surrogates.push(surrogate);
                batch.clear();
            }
        }

        let trace = EpisodeTrace {
            cumulative_reward: steps.iter().map(|s| s.reward).sum(),
            cumulative_c_rate: sum_per_ue(&steps, num_ues, |s, k| s.c_rate[k]),
            cumulative_c_energy: sum_per_ue(&steps, num_ues, |s, k| s.c_energy[k]),
            steps,
        };

        if matches!(self.state.reward_mode, RewardMode::Lagrangian) {
            let (dr, de) = self.margin_shifts();
            let n = n_slots as f64;
            let tightened_rate: Vec<f64> =
                trace.cumulative_c_rate.iter().map(|j| j + n * dr).collect();
            let tightened_energy: Vec<f64> =
                trace.cumulative_c_energy.iter().map(|j| j + n * de).collect();
            let st = &mut self.state;
            let smoothing = st.config.lambda_smoothing;
            let j_rate = smooth(&mut st.smoothed_j_rate, &tightened_rate, smoothing);
            let j_energy = smooth(&mut st.smoothed_j_energy, &tightened_energy, smoothing);
            let surrogate_trace = EpisodeTrace {
                cumulative_c_rate: j_rate,
                cumulative_c_energy: j_energy,
                ..trace.clone()
            };
            let damping = 1.0 + st.config.eta_lambda_decay * st.episodes_done as f64;
            st.multipliers = lagrange_update(
                &st.multipliers,
                &surrogate_trace,
                n_slots,
                st.config.eta_lambda_rate / damping,
                st.config.eta_lambda_energy / damping,
            )?;
        }

        self.state.episodes_done += 1;
        let episode = self.state.episodes_done - 1;

        if !self.state.actor_target.mean_net.all_finite()
            || !self.state.critic.all_finite()
            || self.state.actor_target.log_std.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Diverged {
                episode,
                detail: "non-finite network parameters".into(),
            });
        }

        let (mean_lambda_rate, mean_lambda_energy) = match self.state.reward_mode {
            RewardMode::Shaping {
                chi_rate,
                chi_energy,
            } => (chi_rate, chi_energy),
            _ => (
                self.state.multipliers.mean_rate(),
                self.state.multipliers.mean_energy(),
            ),
        };

        Ok(EpisodeLog {
            episode,
            throughput_bpshz: trace.throughput_bpshz(),
            min_avg_rate_bps: trace
                .avg_rates_bps()
                .into_iter()
                .fold(f64::INFINITY, f64::min),
            max_energy_j: trace
                .total_energies_j()
                .into_iter()
                .fold(f64::NEG_INFINITY, f64::max),
            mean_lambda_rate,
            mean_lambda_energy,
            critic_loss: mean_of(&losses),
            actor_surrogate: mean_of(&surrogates),
            j_rate: trace.cumulative_c_rate.clone(),
            j_energy: trace.cumulative_c_energy.clone(),
            rounds: losses.len(),
        })
    }

    /// Train for the configured number of episodes (continuing from the
    /// current episode counter after a checkpoint reload).
    pub fn train(&mut self) -> Result<Vec<EpisodeLog>> {
        let mut log = Vec::with_capacity(self.state.config.episodes);
        while self.state.episodes_done < self.state.config.episodes {
            log.push(self.run_episode()?);
        }
        Ok(log)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            scenario: self.env.scenario.clone(),
            architecture: self.env.architecture,
            state: self.state.clone(),
        }
    }

    pub fn from_checkpoint(checkpoint: Checkpoint) -> Self {
        let env = UplinkEnv::new(checkpoint.scenario, checkpoint.architecture);
        Self {
            env,
            state: checkpoint.state,
        }
    }

    pub fn save_checkpoint_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.to_checkpoint())?)
    }

    pub fn load_checkpoint_json(json: &str) -> Result<Self> {
        let checkpoint: Checkpoint = serde_json::from_str(json)?;
        Ok(Self::from_checkpoint(checkpoint))
    }
}

/// Copy the target policy into the behavior policy (nets and log-stddev).
pub fn sync_behavior(state: &mut TrainerState) {
    state.actor_behavior = state.actor_target.clone();
}

fn sum_per_ue(
    steps: &[StepOutcome],
    num_ues: usize,
    f: impl Fn(&StepOutcome, usize) -> f64,
) -> Vec<f64> {
    (0..num_ues)
        .map(|k| steps.iter().map(|s| f(s, k)).sum())
        .collect()
}

fn smooth(store: &mut Option<Vec<f64>>, current: &[f64], smoothing: f64) -> Vec<f64> {
    let value = match store.take() {
        Some(prev) if smoothing > 0.0 => prev
            .iter()
            .zip(current.iter())
            .map(|(p, c)| smoothing * p + (1.0 - smoothing) * c)
            .collect(),
        _ => current.to_vec(),
    };
    *store = Some(value.clone());
    value
}

fn mean_of(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

fn standardize_in_place(xs: &mut [f64]) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt() + 1.0e-8;
    for x in xs.iter_mut() {
        *x = (*x - mean) / std;
    }
}

fn clip_gradient(net_grad: &mut Mlp, extra_grad: &mut [f64], clip: Option<f64>) {
    let Some(max_norm) = clip else { return };
    let total = (net_grad.squared_norm()
        + extra_grad.iter().map(|g| g * g).sum::<f64>())
    .sqrt();
    if total > max_norm {
        let scale = max_norm / total;
        net_grad.scale(scale);
        for g in extra_grad.iter_mut() {
            *g *= scale;
        }
    }
}
