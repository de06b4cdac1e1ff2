//! Comparison schemes: fixed-coefficient reward shaping, phase and time
//! overrides, a circular flight pattern, and the reflecting-only channel
//! used by the reflecting-only architecture.
//!
//! Overrides replace specific action components after the policy has
//! produced them and leave every other component untouched, so a baseline
//! trains the remaining degrees of freedom as usual.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::channel::composite_channel;
use crate::env::{Action, Architecture, State};
use crate::scenario::ScenarioConfig;

/// The comparison schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Penalized reward with fixed, manually chosen coefficients.
    RewardShapingPpo,
    /// All phase shifts pinned to zero.
    ZeroPhase,
    /// Phase shifts redrawn uniformly every slot.
    RandomPhase,
    /// Both clusters get half the slot.
    EqualTime,
    /// UAV circles the area at maximum speed.
    CircularTrajectory,
    /// Reflecting-only panels (architecture change).
    ReflectingOnlyRis,
    /// Orthogonal access within clusters (architecture change).
    Oma,
}

impl BaselineKind {
    /// Architecture implied by this baseline, if it changes one.
    pub fn architecture(&self) -> Option<Architecture> {
        match self {
            BaselineKind::ReflectingOnlyRis => Some(Architecture::ReflectingNoma),
            BaselineKind::Oma => Some(Architecture::StarOma),
            _ => None,
        }
    }

    /// Action override implied by this baseline, if any.
    pub fn action_override(&self, cfg: &ScenarioConfig) -> ActionOverride {
        match self {
            BaselineKind::ZeroPhase => ActionOverride::ZeroPhase,
            BaselineKind::RandomPhase => ActionOverride::RandomPhase,
            BaselineKind::EqualTime => ActionOverride::EqualTime,
            BaselineKind::CircularTrajectory => ActionOverride::Circular {
                center: (cfg.area_size / 2.0, cfg.area_size / 2.0),
                radius: cfg.area_size / 2.0,
            },
            _ => ActionOverride::None,
        }
    }

    /// Fixed reward-shaping coefficients, when this baseline uses them.
    /// Defaults normalize each constraint by its scale: `chi_r = 1 / r_min`,
    /// `chi_e = N / e_max`.
    pub fn shaping_coefficients(&self, cfg: &ScenarioConfig) -> Option<(f64, f64)> {
        match self {
            BaselineKind::RewardShapingPpo => Some((
                if cfg.r_min > 0.0 { 1.0 / cfg.r_min } else { 0.0 },
                cfg.num_slots as f64 / cfg.e_max,
            )),
            _ => None,
        }
    }
}

/// Post-policy action transformation applied every slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ActionOverride {
    None,
    ZeroPhase,
    RandomPhase,
    EqualTime,
    Circular { center: (f64, f64), radius: f64 },
}

impl ActionOverride {
    /// Apply the override in place. `RandomPhase` consumes the RNG stream.
    pub fn apply(&self, action: &mut Action, state: &State, v_max: f64, rng: &mut ChaCha8Rng) {
        match self {
            ActionOverride::None => {}
            ActionOverride::ZeroPhase => apply_phase_override(action, PhaseOverride::Zero, rng),
            ActionOverride::RandomPhase => apply_phase_override(action, PhaseOverride::Random, rng),
            ActionOverride::EqualTime => apply_equal_time(action),
            ActionOverride::Circular { center, radius } => {
                let (heading, speed) = circular_policy(state, *center, *radius, v_max);
                action.heading = heading;
                action.speed = speed;
            }
        }
    }
}

/// Which fixed phase pattern to force.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseOverride {
    Zero,
    Random,
}

/// Reward with fixed shaping coefficients:
/// `r - chi_r * sum_k c_rate_k - chi_e * sum_k c_energy_k`.
pub fn reward_shaping_reward(
    reward: f64,
    c_rate: &[f64],
    c_energy: &[f64],
    chi_r: f64,
    chi_e: f64,
) -> f64 {
    reward - chi_r * c_rate.iter().sum::<f64>() - chi_e * c_energy.iter().sum::<f64>()
}

/// Replace every phase shift, leaving all other action components untouched.
pub fn apply_phase_override(action: &mut Action, kind: PhaseOverride, rng: &mut ChaCha8Rng) {
    let fill = |phases: &mut Vec<Vec<f64>>, rng: &mut ChaCha8Rng| {
        for panel in phases.iter_mut() {
            for theta in panel.iter_mut() {
                *theta = match kind {
                    PhaseOverride::Zero => 0.0,
                    PhaseOverride::Random => rng.gen::<f64>() * TAU,
                };
            }
        }
    };
    fill(&mut action.phases_r, rng);
    fill(&mut action.phases_t, rng);
}

/// Force the per-RIS time split to half/half.
pub fn apply_equal_time(action: &mut Action) {
    for f in action.splits.iter_mut() {
        *f = 0.5;
    }
}

/// Heading and speed for a counter-clockwise circuit of `center`: full
/// speed along the tangent at the projection of the current position onto
/// the circle. At the exact center the heading is due east by convention.
pub fn circular_policy(
    state: &State,
    center: (f64, f64),
    _radius: f64,
    v_max: f64,
) -> (f64, f64) {
    let dx = state.uav_xy.0 - center.0;
    let dy = state.uav_xy.1 - center.1;
    let heading = if dx == 0.0 && dy == 0.0 {
        0.0
    } else {
        (dy.atan2(dx) + std::f64::consts::FRAC_PI_2).rem_euclid(TAU)
    };
    (heading, v_max)
}

/// Composite channel of a reflecting-only panel: identical to the STAR
/// composite when the cluster reflects (`flag = 1`); when the UE sits on
/// the opposite side of the UAV (`flag = 0`) the aided term vanishes and
/// only the direct link remains.
pub fn reflecting_only_channel(
    h_ris_ubs: &[Complex64],
    h_ue_ris: &[Complex64],
    theta_r: &[f64],
    flag: u8,
    h_direct: Complex64,
) -> Complex64 {
    if flag == 1 {
        composite_channel(h_ris_ubs, h_ue_ris, theta_r, theta_r, 1, h_direct)
            .expect("matching lengths checked by the caller")
    } else {
        h_direct
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::complex_gaussian;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn sample_action() -> Action {
        Action {
            heading: 1.0,
            speed: 5.0,
            powers: vec![0.3, 0.9],
            splits: vec![0.9],
            phases_r: vec![vec![1.0, 2.0]],
            phases_t: vec![vec![3.0, 4.0]],
        }
    }

    #[test]
    fn reward_shaping_limits() {
        assert_eq!(reward_shaping_reward(5.0, &[1.0], &[2.0], 0.0, 0.0), 5.0);
        // Structural identity with the Lagrangian penalty at lambda = chi.
        let r = 10.0;
        let c_r = [1.0, -2.0];
        let c_e = [0.5, 0.25];
        let (chi_r, chi_e) = (2.0, 4.0);
        let shaped = reward_shaping_reward(r, &c_r, &c_e, chi_r, chi_e);
        let penalized = crate::trainer::penalized_reward(
            r,
            &c_r,
            &c_e,
            &crate::trainer::Multipliers {
                rate: vec![chi_r; 2],
                energy: vec![chi_e; 2],
            },
        );
        assert!((shaped - penalized).abs() < 1e-12);
    }

    #[test]
    fn zero_phase_override() {
        let mut a = sample_action();
        let before = a.clone();
        apply_phase_override(&mut a, PhaseOverride::Zero, &mut rng(1));
        assert!(a.phases_r.iter().flatten().all(|&t| t == 0.0));
        assert!(a.phases_t.iter().flatten().all(|&t| t == 0.0));
        // All other components bit-identical.
        assert_eq!(a.heading, before.heading);
        assert_eq!(a.speed, before.speed);
        assert_eq!(a.powers, before.powers);
        assert_eq!(a.splits, before.splits);
    }

    #[test]
    fn random_phase_reproducible_and_in_range() {
        let mut a = sample_action();
        let mut b = sample_action();
        apply_phase_override(&mut a, PhaseOverride::Random, &mut rng(2));
        apply_phase_override(&mut b, PhaseOverride::Random, &mut rng(2));
        assert_eq!(a, b);
        assert!(a.phases_r.iter().flatten().all(|&t| (0.0..TAU).contains(&t)));
        assert_ne!(a.phases_r, sample_action().phases_r);
    }

    #[test]
    fn equal_time_override() {
        let mut a = sample_action();
        apply_equal_time(&mut a);
        assert_eq!(a.splits, vec![0.5]);
        apply_equal_time(&mut a);
        assert_eq!(a.splits, vec![0.5]);
    }

    #[test]
    fn circular_policy_geometry() {
        let center = (400.0, 400.0);
        let radius = 400.0;
        let v_max = 10.0;
        let tau = 1.0;

        // From any on-circle position, one step stays within v_max * tau of
        // the circle and moves counter-clockwise.
        for i in 0..16 {
            let phi = TAU * i as f64 / 16.0;
            let pos = (center.0 + radius * phi.cos(), center.1 + radius * phi.sin());
            let state = State {
                uav_xy: pos,
                slot: 0,
            };
            let (heading, speed) = circular_policy(&state, center, radius, v_max);
            assert_eq!(speed, v_max);
            let nx = pos.0 + speed * tau * heading.cos();
            let ny = pos.1 + speed * tau * heading.sin();
            let chord = ((nx - pos.0).powi(2) + (ny - pos.1).powi(2)).sqrt();
            assert!(chord <= v_max * tau + 1e-9);
            let r = ((nx - center.0).powi(2) + (ny - center.1).powi(2)).sqrt();
            assert!((r - radius).abs() <= v_max * tau);
            // Counter-clockwise: the polar angle advances.
            let dphi = ((ny - center.1).atan2(nx - center.0) - phi + TAU) % TAU;
            assert!(dphi > 0.0 && dphi < 0.1);
        }

        // Long tangent integrations drift outward only slowly.
        let mut pos = (800.0, 400.0);
        for _ in 0..300 {
            let state = State {
                uav_xy: pos,
                slot: 0,
            };
            let (heading, speed) = circular_policy(&state, center, radius, v_max);
            pos = (
                pos.0 + speed * tau * heading.cos(),
                pos.1 + speed * tau * heading.sin(),
            );
        }
        let r = ((pos.0 - center.0).powi(2) + (pos.1 - center.1).powi(2)).sqrt();
        assert!((r - radius).abs() < 0.15 * radius);

        // A full revolution takes about 2 pi R / v seconds.
        let period = TAU * radius / v_max;
        assert!((period - 251.3).abs() < 1.0);
    }

    #[test]
    fn circular_policy_center_convention() {
        let state = State {
            uav_xy: (400.0, 400.0),
            slot: 0,
        };
        let (heading, speed) = circular_policy(&state, (400.0, 400.0), 400.0, 7.0);
        assert_eq!(heading, 0.0);
        assert_eq!(speed, 7.0);
    }

    #[test]
    fn reflecting_only_channel_cases() {
        let mut r = rng(3);
        let m = 4;
        let a: Vec<Complex64> = (0..m).map(|_| complex_gaussian(&mut r)).collect();
        let b: Vec<Complex64> = (0..m).map(|_| complex_gaussian(&mut r)).collect();
        let theta: Vec<f64> = vec![0.3, 1.1, 2.2, 4.4];
        let direct = complex_gaussian(&mut r);

        let star = composite_channel(&a, &b, &theta, &theta, 1, direct).unwrap();
        let reflecting = reflecting_only_channel(&a, &b, &theta, 1, direct);
        assert_eq!(star, reflecting);

        let blocked = reflecting_only_channel(&a, &b, &theta, 0, direct);
        assert_eq!(blocked, direct);
    }

    #[test]
    fn baseline_kind_mappings() {
        let cfg = ScenarioConfig::desk();
        assert_eq!(
            BaselineKind::ReflectingOnlyRis.architecture(),
            Some(Architecture::ReflectingNoma)
        );
        assert_eq!(BaselineKind::Oma.architecture(), Some(Architecture::StarOma));
        assert_eq!(BaselineKind::ZeroPhase.architecture(), None);
        let (chi_r, chi_e) = BaselineKind::RewardShapingPpo
            .shaping_coefficients(&cfg)
            .unwrap();
        assert!((chi_r - 1.0 / cfg.r_min).abs() < 1e-18);
        assert!((chi_e - cfg.num_slots as f64 / cfg.e_max).abs() < 1e-12);
        assert!(BaselineKind::ZeroPhase.shaping_coefficients(&cfg).is_none());
        assert!(matches!(
            BaselineKind::CircularTrajectory.action_override(&cfg),
            ActionOverride::Circular { .. }
        ));
    }
}
