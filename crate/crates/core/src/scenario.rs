//! Static world geometry: the service area, UE and STAR-RIS placement, the
//! UAV start point, and the nearest-RIS association with its left/right
//! side partition.
//!
//! A [`Scenario`] is immutable once built and safe to share across threads.
//! All quantities are SI (meters, seconds, watts, joules, hertz); gains and
//! Rician factors are linear ratios, not dB.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Speed of light in m/s, used to derive the carrier wavelength.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// A 3D position; `h` is altitude above ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub h: f64,
}

impl Position3D {
    pub fn new(x: f64, y: f64, h: f64) -> Self {
        Self { x, y, h }
    }

    /// Euclidean distance to another position.
    pub fn dist(&self, other: &Position3D) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dh = self.h - other.h;
        (dx * dx + dy * dy + dh * dh).sqrt()
    }

    fn finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.h.is_finite()
    }
}

/// How UE positions are resolved when building a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UePlacement {
    /// Uniform over the area square, seeded by the build seed.
    Random,
    /// Explicit ground positions, one per UE.
    Explicit(Vec<Position3D>),
}

/// Full static configuration of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Side length of the square service area in meters.
    pub area_size: f64,
    /// Number of UEs (K).
    pub num_ues: usize,
    /// Number of STAR-RIS panels (I).
    pub num_ris: usize,
    /// Elements per STAR-RIS (M).
    pub elements_per_ris: usize,
    /// Fixed STAR-RIS positions (length `num_ris`).
    pub ris_positions: Vec<Position3D>,
    /// UE placement rule.
    pub ue_positions: UePlacement,
    /// UAV take-off point.
    pub uav_start: Position3D,
    /// Fixed UAV flight altitude in meters.
    pub uav_height: f64,
    /// Maximum UAV speed in m/s.
    pub v_max: f64,
    /// Slot length tau in seconds.
    pub slot_length: f64,
    /// Number of slots per episode (N).
    pub num_slots: usize,
    /// System bandwidth in Hz.
    pub bandwidth: f64,
    /// Receiver noise power in watts over the full band.
    pub noise_power: f64,
    /// Per-UE maximum transmit power in watts.
    pub p_max: f64,
    /// Per-UE energy budget over the episode in joules.
    pub e_max: f64,
    /// Minimum required per-UE average rate in bits/second.
    pub r_min: f64,
    /// Path-loss exponent of the UE - RIS link.
    pub alpha_ue_ris: f64,
    /// Path-loss exponent of the RIS - UBS link.
    pub alpha_ris_ubs: f64,
    /// Path-loss exponent of the direct UE - UBS link.
    pub alpha_ue_ubs: f64,
    /// Rician factor of the UE - RIS link (linear).
    pub rician_ue_ris: f64,
    /// Rician factor of the RIS - UBS link (linear).
    pub rician_ris_ubs: f64,
    /// Rician factor of the UE - UBS link (linear).
    pub rician_ue_ubs: f64,
    /// Channel power at the 1 m reference distance (linear).
    pub ref_gain: f64,
    /// Carrier frequency in Hz.
    pub carrier_frequency: f64,
}

impl ScenarioConfig {
    /// Full-size configuration matching the published simulation setup:
    /// 800 m area, K = 12 UEs, I = 3 panels at fixed positions, 200 slots,
    /// -60 dBm noise, -45 dB reference gain, 10 dB Rician factors.
    pub fn paper() -> Self {
        Self {
            area_size: 800.0,
            num_ues: 12,
            num_ris: 3,
            elements_per_ris: 40,
            ris_positions: vec![
                Position3D::new(400.0, 600.0, 10.0),
                Position3D::new(200.0, 300.0, 10.0),
                Position3D::new(600.0, 200.0, 10.0),
            ],
            ue_positions: UePlacement::Random,
            uav_start: Position3D::new(0.0, 0.0, 200.0),
            uav_height: 200.0,
            v_max: 10.0,
            slot_length: 1.0,
            num_slots: 200,
            bandwidth: 1.0e6,
            noise_power: 1.0e-9, // -60 dBm
            p_max: 1.0,
            e_max: 180.0,
            r_min: 300_000.0,
            alpha_ue_ris: 2.8,
            alpha_ris_ubs: 2.2,
            alpha_ue_ubs: 3.5,
            rician_ue_ris: 10.0,
            rician_ris_ubs: 10.0,
            rician_ue_ubs: 10.0,
            ref_gain: 10.0_f64.powf(-4.5), // -45 dB
            carrier_frequency: 3.6e9,
        }
    }

    /// Small CI-scale configuration: K = 4, I = 2, M = 8, N = 50.
    ///
    /// The channel scale is synthetic, tuned so that an aligned STAR-RIS
    /// cascade clearly dominates the heavily obstructed direct link while a
    /// misaligned cascade stays below it. Training on this preset converges
    /// in a few hundred episodes on one core.
    pub fn desk() -> Self {
        Self {
            area_size: 240.0,
            num_ues: 4,
            num_ris: 2,
            elements_per_ris: 8,
            ris_positions: vec![
                Position3D::new(60.0, 120.0, 10.0),
                Position3D::new(180.0, 120.0, 10.0),
            ],
            ue_positions: UePlacement::Random,
            uav_start: Position3D::new(60.0, 60.0, 120.0),
            uav_height: 120.0,
            v_max: 10.0,
            slot_length: 1.0,
            num_slots: 50,
            bandwidth: 1.0e6,
            noise_power: 2.0e-17,
            p_max: 1.0,
            e_max: 30.0,
            r_min: 50_000.0,
            alpha_ue_ris: 2.4,
            alpha_ris_ubs: 2.2,
            alpha_ue_ubs: 6.0,
            rician_ue_ris: 100.0,
            rician_ris_ubs: 100.0,
            rician_ue_ubs: 100.0,
            ref_gain: 10.0_f64.powf(-4.5),
            carrier_frequency: 3.6e9,
        }
    }

    /// Carrier wavelength lambda = c / f_c.
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    /// STAR-RIS element spacing, half the carrier wavelength.
    pub fn element_spacing(&self) -> f64 {
        self.wavelength() / 2.0
    }

    fn validate(&self) -> Result<()> {
        if self.num_ues < 1 || self.num_ris < 1 || self.elements_per_ris < 1 {
            return Err(Error::Config(
                "num_ues, num_ris and elements_per_ris must all be >= 1".into(),
            ));
        }
        if self.ris_positions.len() != self.num_ris {
            return Err(Error::Config(format!(
                "expected {} RIS positions, got {}",
                self.num_ris,
                self.ris_positions.len()
            )));
        }
        if !(self.area_size > 0.0) {
            return Err(Error::Config("area_size must be positive".into()));
        }
        for (i, p) in self.ris_positions.iter().enumerate() {
            if !p.finite() {
                return Err(Error::Config(format!("RIS {i} position is not finite")));
            }
            if p.x < 0.0 || p.x > self.area_size || p.y < 0.0 || p.y > self.area_size {
                return Err(Error::Config(format!("RIS {i} lies outside the area")));
            }
        }
        if let UePlacement::Explicit(ues) = &self.ue_positions {
            if ues.len() != self.num_ues {
                return Err(Error::Config(format!(
                    "expected {} UE positions, got {}",
                    self.num_ues,
                    ues.len()
                )));
            }
            for (k, p) in ues.iter().enumerate() {
                if !p.finite() || p.x < 0.0 || p.x > self.area_size || p.y < 0.0 || p.y > self.area_size
                {
                    return Err(Error::Config(format!("UE {k} lies outside the area")));
                }
            }
        }
        // Slot-static position approximation: displacement per slot must stay
        // small against the flight altitude. The 1/10 factor is our reading
        // of "much less than"; see the config docs.
        if !(self.slot_length * self.v_max < self.uav_height / 10.0) {
            return Err(Error::Config(format!(
                "slot_length * v_max = {} must be < uav_height / 10 = {}",
                self.slot_length * self.v_max,
                self.uav_height / 10.0
            )));
        }
        for (name, v) in [
            ("v_max", self.v_max),
            ("slot_length", self.slot_length),
            ("bandwidth", self.bandwidth),
            ("noise_power", self.noise_power),
            ("p_max", self.p_max),
            ("e_max", self.e_max),
            ("ref_gain", self.ref_gain),
            ("carrier_frequency", self.carrier_frequency),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive and finite")));
            }
        }
        if self.r_min < 0.0 || !self.r_min.is_finite() {
            return Err(Error::Config("r_min must be non-negative".into()));
        }
        if self.num_slots < 1 {
            return Err(Error::Config("num_slots must be >= 1".into()));
        }
        Ok(())
    }
}

/// A built scenario: the validated config with every UE position resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ScenarioConfig,
    /// Resolved UE positions, all at ground level.
    pub ue_positions: Vec<Position3D>,
    /// Seed the scenario was built with.
    pub seed: u64,
}

impl Scenario {
    pub fn num_ues(&self) -> usize {
        self.config.num_ues
    }

    pub fn num_ris(&self) -> usize {
        self.config.num_ris
    }

    pub fn elements_per_ris(&self) -> usize {
        self.config.elements_per_ris
    }

    /// Serialize to a JSON document with explicit fields for every entry.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Nearest-RIS association and the left/right side partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    /// Index of the serving RIS for each UE.
    pub serving_ris: Vec<usize>,
    /// Per-RIS indices of served UEs strictly left of the panel (q_k.x < q_i.x).
    pub left_sets: Vec<Vec<usize>>,
    /// Per-RIS indices of served UEs at or right of the panel (q_k.x >= q_i.x).
    pub right_sets: Vec<Vec<usize>>,
}

/// Which side of its serving RIS a UE sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Association {
    /// Side of UE `k` relative to its serving RIS.
    pub fn side_of(&self, k: usize) -> Side {
        let i = self.serving_ris[k];
        if self.left_sets[i].contains(&k) {
            Side::Left
        } else {
            Side::Right
        }
    }

    /// All clusters as (ris index, side, member UE indices), skipping empty ones.
    pub fn clusters(&self) -> Vec<(usize, Side, &[usize])> {
        let mut out = Vec::new();
        for i in 0..self.left_sets.len() {
            if !self.left_sets[i].is_empty() {
                out.push((i, Side::Left, self.left_sets[i].as_slice()));
            }
            if !self.right_sets[i].is_empty() {
                out.push((i, Side::Right, self.right_sets[i].as_slice()));
            }
        }
        out
    }
}

/// Build a scenario from a config and a seed.
///
/// Deterministic: the same `(config, seed)` pair always yields the same
/// scenario. Random UE placement is uniform over the area square; draws that
/// land exactly on a RIS x-coordinate are rejected so the side partition is
/// unambiguous.
pub fn build_scenario(config: &ScenarioConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let ue_positions = match &config.ue_positions {
        UePlacement::Explicit(list) => list.clone(),
        UePlacement::Random => {
            use rand::SeedableRng;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut out = Vec::with_capacity(config.num_ues);
            while out.len() < config.num_ues {
                let x: f64 = rng.gen::<f64>() * config.area_size;
                let y: f64 = rng.gen::<f64>() * config.area_size;
                if config.ris_positions.iter().any(|r| r.x == x) {
                    continue;
                }
                out.push(Position3D::new(x, y, 0.0));
            }
            out
        }
    };
    Ok(Scenario {
        config: config.clone(),
        ue_positions,
        seed,
    })
}

/// Associate every UE with the RIS minimizing 3D Euclidean distance and
/// partition each cluster by x-coordinate. Distance ties go to the lowest
/// RIS index; a UE exactly at its RIS x-coordinate belongs to the right set.
pub fn associate(scenario: &Scenario) -> Association {
    let num_ris = scenario.num_ris();
    let mut serving_ris = Vec::with_capacity(scenario.num_ues());
    let mut left_sets = vec![Vec::new(); num_ris];
    let mut right_sets = vec![Vec::new(); num_ris];
    for (k, ue) in scenario.ue_positions.iter().enumerate() {
        let mut best = 0usize;
        let mut best_d = f64::INFINITY;
        for (i, ris) in scenario.config.ris_positions.iter().enumerate() {
            let d = ue.dist(ris);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        serving_ris.push(best);
        if ue.x < scenario.config.ris_positions[best].x {
            left_sets[best].push(k);
        } else {
            right_sets[best].push(k);
        }
    }
    Association {
        serving_ris,
        left_sets,
        right_sets,
    }
}
