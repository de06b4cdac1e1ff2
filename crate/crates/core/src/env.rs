//! The constrained decision process: UAV kinematics, per-slot channel
//! realization and rate/energy accounting, immediate constraint values,
//! and full-episode rollouts.
//!
//! A step moves the UAV (clamped to the area square, never faster than
//! `v_max * tau`), realizes all channels at the new position, computes the
//! per-cluster NOMA (or OMA) rates, and reports the slot reward together
//! with the immediate rate and energy constraint values
//!
//! - `c_rate_k = r_min - rate_bps_k`
//! - `c_energy_k = p_k * tau_side - e_max / N`
//!
//! so that an episode satisfies a constraint exactly when the cumulative
//! sum of its immediate values is <= 0.
//!
//! The environment itself is immutable; rollouts own their RNG stream and
//! trace, so independent rollouts can run in parallel.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::access::{self, PowerAllocation, TimeSplit};
use crate::channel::{self, PhaseConfig};
use crate::error::Error;
use crate::scenario::{associate, Association, Position3D, Scenario, Side};
use crate::Result;

/// Network architecture variant under evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Architecture {
    /// STAR-RIS panels serving both sides, NOMA within clusters.
    StarNoma,
    /// Reflecting-only panels: the cluster on the opposite side of the UAV
    /// loses its RIS-aided path and keeps only the direct link.
    ReflectingNoma,
    /// STAR-RIS panels with orthogonal (OFDMA) access within clusters.
    StarOma,
}

/// Environment state: the UAV 2D position and the slot counter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub uav_xy: (f64, f64),
    pub slot: usize,
}

/// Continuous control vector for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    /// Flight direction in [0, 2*pi).
    pub heading: f64,
    /// Flight speed in [0, v_max].
    pub speed: f64,
    /// Per-UE transmit power in [0, p_max].
    pub powers: Vec<f64>,
    /// Per-RIS left-cluster time share in [0, 1].
    pub splits: Vec<f64>,
    /// Reflection phases, `[ris][element]`, each in [0, 2*pi).
    pub phases_r: Vec<Vec<f64>>,
    /// Transmission phases, `[ris][element]`, each in [0, 2*pi).
    pub phases_t: Vec<Vec<f64>>,
}

impl Action {
    /// Total action dimensionality: 2 + K + I + 2*M*I.
    pub fn dim(num_ues: usize, num_ris: usize, elements: usize) -> usize {
        2 + num_ues + num_ris + 2 * elements * num_ris
    }
}

/// Everything observed from one environment step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    /// Sum of per-UE spectral efficiencies, bits/s/Hz.
    pub reward: f64,
    /// Immediate rate-constraint values, bits/s.
    pub c_rate: Vec<f64>,
    /// Immediate energy-constraint values, joules.
    pub c_energy: Vec<f64>,
    /// Per-UE absolute rates, bits/s.
    pub rates_bps: Vec<f64>,
    /// Per-UE spectral efficiencies, bits/s/Hz.
    pub spectral_efficiency: Vec<f64>,
    /// Per-UE energy spent this slot, joules.
    pub energies_j: Vec<f64>,
    /// Per-UE composite channel power |h_k|^2.
    pub gains: Vec<f64>,
    pub next_state: State,
}

/// Per-slot outcomes of one episode plus cumulative objective/constraint sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub steps: Vec<StepOutcome>,
    /// Sum of slot rewards (bits/s/Hz accumulated over slots).
    pub cumulative_reward: f64,
    /// Per-UE cumulative rate-constraint value J_rate.
    pub cumulative_c_rate: Vec<f64>,
    /// Per-UE cumulative energy-constraint value J_energy.
    pub cumulative_c_energy: Vec<f64>,
}

impl EpisodeTrace {
    fn from_steps(steps: Vec<StepOutcome>, num_ues: usize) -> Self {
        let mut c_rate = vec![0.0; num_ues];
        let mut c_energy = vec![0.0; num_ues];
        let mut reward = 0.0;
        for s in &steps {
            reward += s.reward;
            for k in 0..num_ues {
                c_rate[k] += s.c_rate[k];
                c_energy[k] += s.c_energy[k];
            }
        }
        Self {
            steps,
            cumulative_reward: reward,
            cumulative_c_rate: c_rate,
            cumulative_c_energy: c_energy,
        }
    }

    pub fn num_slots(&self) -> usize {
        self.steps.len()
    }

    /// Episode throughput: slot-averaged sum rate in bits/s/Hz.
    pub fn throughput_bpshz(&self) -> f64 {
        self.cumulative_reward / self.steps.len() as f64
    }

    /// Per-UE slot-averaged rate in bits/s.
    pub fn avg_rates_bps(&self) -> Vec<f64> {
        let n = self.steps.len() as f64;
        let k = self.steps[0].rates_bps.len();
        (0..k)
            .map(|ue| self.steps.iter().map(|s| s.rates_bps[ue]).sum::<f64>() / n)
            .collect()
    }

    /// Per-UE total energy over the episode in joules.
    pub fn total_energies_j(&self) -> Vec<f64> {
        let k = self.steps[0].energies_j.len();
        (0..k)
            .map(|ue| self.steps.iter().map(|s| s.energies_j[ue]).sum::<f64>())
            .collect()
    }

    /// CSV export: one row per slot with position, reward, per-UE rates,
    /// energies and constraint values.
    pub fn to_csv(&self) -> String {
        let k = self.steps[0].rates_bps.len();
        let mut out = String::from("slot,x_m,y_m,reward_bpshz");
        for ue in 0..k {
            let _ = write!(out, ",rate_bps_{ue}");
        }
        for ue in 0..k {
            let _ = write!(out, ",energy_j_{ue}");
        }
        for ue in 0..k {
            let _ = write!(out, ",c_rate_{ue}");
        }
        for ue in 0..k {
            let _ = write!(out, ",c_energy_{ue}");
        }
        out.push('\n');
        for (n, s) in self.steps.iter().enumerate() {
            let _ = write!(
                out,
                "{},{},{},{}",
                n, s.next_state.uav_xy.0, s.next_state.uav_xy.1, s.reward
            );
            for v in &s.rates_bps {
                let _ = write!(out, ",{v}");
            }
            for v in &s.energies_j {
                let _ = write!(out, ",{v}");
            }
            for v in &s.c_rate {
                let _ = write!(out, ",{v}");
            }
            for v in &s.c_energy {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Anything that maps a state to an action under its own RNG stream.
pub trait Policy {
    fn act(&mut self, state: &State, rng: &mut ChaCha8Rng) -> Action;
}

impl<F: FnMut(&State, &mut ChaCha8Rng) -> Action> Policy for F {
    fn act(&mut self, state: &State, rng: &mut ChaCha8Rng) -> Action {
        self(state, rng)
    }
}

/// Immutable simulation environment for one scenario and architecture.
#[derive(Debug, Clone)]
pub struct UplinkEnv {
    pub scenario: Scenario,
    pub association: Association,
    pub architecture: Architecture,
}

impl UplinkEnv {
    pub fn new(scenario: Scenario, architecture: Architecture) -> Self {
        let association = associate(&scenario);
        Self {
            scenario,
            association,
            architecture,
        }
    }

    pub fn num_ues(&self) -> usize {
        self.scenario.num_ues()
    }

    pub fn num_slots(&self) -> usize {
        self.scenario.config.num_slots
    }

    pub fn action_dim(&self) -> usize {
        Action::dim(
            self.scenario.num_ues(),
            self.scenario.num_ris(),
            self.scenario.elements_per_ris(),
        )
    }

    /// Initial state: the configured take-off point at slot 0.
    pub fn reset(&self) -> State {
        State {
            uav_xy: (self.scenario.config.uav_start.x, self.scenario.config.uav_start.y),
            slot: 0,
        }
    }

    fn validate_action(&self, action: &Action) -> Result<()> {
        let cfg = &self.scenario.config;
        if !(0.0..TAU).contains(&action.heading) {
            return Err(Error::Domain(format!(
                "heading {} outside [0, 2*pi)",
                action.heading
            )));
        }
        if !(0.0..=cfg.v_max).contains(&action.speed) {
            return Err(Error::Domain(format!(
                "speed {} outside [0, {}]",
                action.speed, cfg.v_max
            )));
        }
        if action.powers.len() != cfg.num_ues {
            return Err(Error::Shape {
                expected: cfg.num_ues,
                got: action.powers.len(),
            });
        }
        PowerAllocation {
            watts: action.powers.clone(),
        }
        .validate(cfg.p_max)?;
        if action.splits.len() != cfg.num_ris {
            return Err(Error::Shape {
                expected: cfg.num_ris,
                got: action.splits.len(),
            });
        }
        if action.splits.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Domain("time split fraction outside [0, 1]".into()));
        }
        PhaseConfig {
            theta_t: action.phases_t.clone(),
            theta_r: action.phases_r.clone(),
        }
        .validate(cfg.num_ris, cfg.elements_per_ris)?;
        Ok(())
    }

    /// Advance one slot. Validates the action, moves the UAV, realizes the
    /// channels at the new position, and accounts rates, energies and
    /// immediate constraint values.
    pub fn step(&self, state: &State, action: &Action, rng: &mut ChaCha8Rng) -> Result<StepOutcome> {
        self.validate_action(action)?;
        let cfg = &self.scenario.config;
        let tau = cfg.slot_length;

        let step_len = action.speed * tau;
        let nx = (state.uav_xy.0 + step_len * action.heading.cos()).clamp(0.0, cfg.area_size);
        let ny = (state.uav_xy.1 + step_len * action.heading.sin()).clamp(0.0, cfg.area_size);
        let uav = Position3D::new(nx, ny, cfg.uav_height);

        let phases = PhaseConfig {
            theta_t: action.phases_t.clone(),
            theta_r: action.phases_r.clone(),
        };
        let realization = channel::realize_slot(&self.scenario, &self.association, uav, &phases, rng)?;

        // Reflecting-only panels drop the RIS-aided term for clusters on the
        // opposite side of the UAV; recompute those composites from the parts.
        let gains: Vec<f64> = match self.architecture {
            Architecture::StarNoma | Architecture::StarOma => realization.gains(),
            Architecture::ReflectingNoma => (0..cfg.num_ues)
                .map(|k| {
                    let i = self.association.serving_ris[k];
                    let (flag_l, flag_r) = channel::side_flags(uav.x, cfg.ris_positions[i].x);
                    let flag = match self.association.side_of(k) {
                        Side::Left => flag_l,
                        Side::Right => flag_r,
                    };
                    crate::baselines::reflecting_only_channel(
                        &realization.h_ris_ubs[i],
                        &realization.h_ue_ris[k],
                        &action.phases_r[i],
                        flag,
                        realization.h_ue_ubs[k],
                    )
                    .norm_sqr()
                })
                .collect(),
        };

        let split = TimeSplit::new(action.splits.clone(), tau)?;
        let powers = PowerAllocation {
            watts: action.powers.clone(),
        };

        let mut se = vec![0.0; cfg.num_ues];
        for (i, side, members) in self.association.clusters() {
            let tf = match side {
                Side::Left => split.tau_left(i) / tau,
                Side::Right => split.tau_right(i) / tau,
            };
            let g: Vec<f64> = members.iter().map(|&k| gains[k]).collect();
            let p: Vec<f64> = members.iter().map(|&k| action.powers[k]).collect();
            let rates = match self.architecture {
                Architecture::StarOma => {
                    access::oma_cluster_rates(&g, &p, tf, cfg.num_ris, cfg.noise_power)
                }
                _ => access::noma_cluster_rates(&g, &p, tf, cfg.num_ris, cfg.noise_power),
            };
            for (&k, r) in members.iter().zip(rates) {
                se[k] = r;
            }
        }

        let rates_bps: Vec<f64> = se.iter().map(|r| r * cfg.bandwidth).collect();
        let reward: f64 = se.iter().sum();
        let (c_rate, c_energy) = immediate_constraints(
            &rates_bps,
            &powers,
            &split,
            &self.association,
            cfg.r_min,
            cfg.e_max,
            cfg.num_slots,
        );
        let energies_j = access::slot_energy(&powers, &split, &self.association);

        Ok(StepOutcome {
            reward,
            c_rate,
            c_energy,
            rates_bps,
            spectral_efficiency: se,
            energies_j,
            gains,
            next_state: State {
                uav_xy: (nx, ny),
                slot: state.slot + 1,
            },
        })
    }

    /// Roll one full N-slot episode under `policy`.
    pub fn rollout(&self, policy: &mut dyn Policy, rng: &mut ChaCha8Rng) -> Result<EpisodeTrace> {
        let mut state = self.reset();
        let mut steps = Vec::with_capacity(self.num_slots());
        for _ in 0..self.num_slots() {
            let action = policy.act(&state, rng);
            let outcome = self.step(&state, &action, rng)?;
            state = outcome.next_state;
            steps.push(outcome);
        }
        Ok(EpisodeTrace::from_steps(steps, self.num_ues()))
    }
}

/// Immediate constraint values of one slot:
/// `c_rate_k = r_min - rate_bps_k` and
/// `c_energy_k = p_k * tau_side - e_max / N`.
pub fn immediate_constraints(
    rates_bps: &[f64],
    powers: &PowerAllocation,
    split: &TimeSplit,
    association: &Association,
    r_min: f64,
    e_max: f64,
    num_slots: usize,
) -> (Vec<f64>, Vec<f64>) {
    let c_rate: Vec<f64> = rates_bps.iter().map(|r| r_min - r).collect();
    let per_slot_budget = e_max / num_slots as f64;
    let c_energy: Vec<f64> = access::slot_energy(powers, split, association)
        .into_iter()
        .map(|e| e - per_slot_budget)
        .collect();
    (c_rate, c_energy)
}
