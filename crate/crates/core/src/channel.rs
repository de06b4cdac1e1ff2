//! Per-slot Rician fading channels and the composite STAR-RIS channel.
//!
//! Three link types are modeled, each as large-scale path loss times a
//! Rician mixture of a deterministic ULA line-of-sight component and an
//! i.i.d. circularly-symmetric complex Gaussian scatter component:
//!
//! - UE - RIS: length-M vector, static geometry (UEs and panels are fixed)
//! - RIS - UBS: length-M vector, geometry follows the UAV position
//! - UE - UBS: scalar direct link
//!
//! The composite uplink channel of a UE routes its serving panel's vector
//! legs through the panel's diagonal reflection or transmission phase
//! matrix (selected by the side flag) and adds the direct link:
//!
//! `h_k = h_ris_ubs^H (flag*diag(e^{j theta_r}) + (1-flag)*diag(e^{j theta_t})) h_ue_ris + h_direct`
//!
//! Every function here is pure given an explicit RNG stream, so slots can be
//! realized in parallel with independent streams.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scenario::{Association, Position3D, Scenario, Side};
use crate::Result;

/// Per-RIS transmission and reflection phase shifts, M angles each in [0, 2pi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseConfig {
    /// Transmission phases, indexed `[ris][element]`.
    pub theta_t: Vec<Vec<f64>>,
    /// Reflection phases, indexed `[ris][element]`.
    pub theta_r: Vec<Vec<f64>>,
}

impl PhaseConfig {
    /// All-zero phases for `num_ris` panels of `m` elements.
    pub fn zeros(num_ris: usize, m: usize) -> Self {
        Self {
            theta_t: vec![vec![0.0; m]; num_ris],
            theta_r: vec![vec![0.0; m]; num_ris],
        }
    }

    pub fn validate(&self, num_ris: usize, m: usize) -> Result<()> {
        if self.theta_t.len() != num_ris || self.theta_r.len() != num_ris {
            return Err(Error::Shape {
                expected: num_ris,
                got: self.theta_t.len().min(self.theta_r.len()),
            });
        }
        for list in self.theta_t.iter().chain(self.theta_r.iter()) {
            if list.len() != m {
                return Err(Error::Shape {
                    expected: m,
                    got: list.len(),
                });
            }
            if list.iter().any(|a| !(0.0..TAU).contains(a)) {
                return Err(Error::Domain("phase angle outside [0, 2*pi)".into()));
            }
        }
        Ok(())
    }
}

/// All channel coefficients of one time slot.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// Per-UE vector to the serving RIS, length M.
    pub h_ue_ris: Vec<Vec<Complex64>>,
    /// Per-RIS vector to the UBS, length M.
    pub h_ris_ubs: Vec<Vec<Complex64>>,
    /// Per-UE direct link scalar.
    pub h_ue_ubs: Vec<Complex64>,
    /// Per-UE composite uplink channel.
    pub composite: Vec<Complex64>,
}

impl ChannelRealization {
    /// Per-UE composite channel power |h_k|^2.
    pub fn gains(&self) -> Vec<f64> {
        self.composite.iter().map(|h| h.norm_sqr()).collect()
    }

    /// Debug dump of a complex vector as (re, im) pairs.
    pub fn to_pairs(v: &[Complex64]) -> Vec<(f64, f64)> {
        v.iter().map(|c| (c.re, c.im)).collect()
    }
}

/// Large-scale fading coefficient `xi0 / d^alpha` at distance `d` meters.
pub fn large_scale_gain(distance: f64, alpha: f64, xi0: f64) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!(
            "large_scale_gain requires distance > 0, got {distance}"
        )));
    }
    Ok(xi0 / distance.powf(alpha))
}

/// Uniform-linear-array line-of-sight steering vector.
///
/// Entry m (0-based) is `exp(-j 2 pi d / lambda) * exp(-j 2 pi m s cos(phi) / lambda)`
/// where `s` is the element spacing; every entry has unit modulus.
pub fn ula_los(
    distance: f64,
    cos_angle: f64,
    m: usize,
    spacing: f64,
    wavelength: f64,
) -> Result<Vec<Complex64>> {
    if !(distance > 0.0) {
        return Err(Error::Domain(format!(
            "ula_los requires distance > 0, got {distance}"
        )));
    }
    if m < 1 {
        return Err(Error::Domain("ula_los requires M >= 1".into()));
    }
    if cos_angle.abs() > 1.0 {
        return Err(Error::Domain(format!(
            "ula_los cosine must lie in [-1, 1], got {cos_angle}"
        )));
    }
    let common = Complex64::from_polar(1.0, -TAU * distance / wavelength);
    let step = -TAU * spacing * cos_angle / wavelength;
    Ok((0..m)
        .map(|idx| common * Complex64::from_polar(1.0, step * idx as f64))
        .collect())
}

/// Draw one circularly-symmetric complex Gaussian with zero mean and unit
/// variance: real and imaginary parts i.i.d. N(0, 1/2).
pub fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let scale = 0.5_f64.sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * scale, im * scale)
}

/// Rician factors at or above this are treated as the pure-LoS limit.
pub const PURE_LOS_THRESHOLD: f64 = 1.0e12;

/// Rician sample around a LoS component:
/// `sqrt(xi) * ( sqrt(G/(G+1)) * los + sqrt(1/(G+1)) * w )` with `w`
/// i.i.d. unit-variance complex Gaussian entries. Factors at or above
/// [`PURE_LOS_THRESHOLD`] yield exactly `sqrt(xi) * los`.
pub fn rician_sample(
    los: &[Complex64],
    rician_g: f64,
    xi: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Complex64>> {
    if rician_g < 0.0 {
        return Err(Error::Domain("Rician factor must be >= 0".into()));
    }
    if !(xi > 0.0) {
        return Err(Error::Domain("large-scale gain must be > 0".into()));
    }
    let amp = xi.sqrt();
    if rician_g >= PURE_LOS_THRESHOLD {
        return Ok(los.iter().map(|l| amp * l).collect());
    }
    let los_w = (rician_g / (rician_g + 1.0)).sqrt();
    let nlos_w = (1.0 / (rician_g + 1.0)).sqrt();
    Ok(los
        .iter()
        .map(|l| amp * (los_w * l + nlos_w * complex_gaussian(rng)))
        .collect())
}

/// Reflection/transmission flags of the left and right clusters of a panel
/// at UAV x-coordinate `uav_x`. Left reflects (1) iff `uav_x <= ris_x`;
/// the flags are always complementary.
pub fn side_flags(uav_x: f64, ris_x: f64) -> (u8, u8) {
    if uav_x <= ris_x {
        (1, 0)
    } else {
        (0, 1)
    }
}

/// Composite channel of one UE through one panel.
///
/// `flag = 1` selects the reflection phases, `flag = 0` the transmission
/// phases; the conjugate transpose applies to the RIS - UBS leg.
pub fn composite_channel(
    h_ris_ubs: &[Complex64],
    h_ue_ris: &[Complex64],
    theta_r: &[f64],
    theta_t: &[f64],
    flag: u8,
    h_direct: Complex64,
) -> Result<Complex64> {
    let m = h_ris_ubs.len();
    for len in [h_ue_ris.len(), theta_r.len(), theta_t.len()] {
        if len != m {
            return Err(Error::Shape {
                expected: m,
                got: len,
            });
        }
    }
    let theta = if flag == 1 { theta_r } else { theta_t };
    let mut aided = Complex64::new(0.0, 0.0);
    for idx in 0..m {
        aided += h_ris_ubs[idx].conj()
            * Complex64::from_polar(1.0, theta[idx])
            * h_ue_ris[idx];
    }
    Ok(aided + h_direct)
}

/// Cosine of the arrival/departure angle along the array axis: the
/// x-coordinate difference toward the panel over the 3D distance.
fn cos_toward(ris_x: f64, from_x: f64, distance: f64) -> f64 {
    ((ris_x - from_x) / distance).clamp(-1.0, 1.0)
}

/// Realize all channels of one slot at the given UAV position.
///
/// Sampling order is fixed (panels first, then UEs) so a given RNG stream
/// always produces the same realization.
pub fn realize_slot(
    scenario: &Scenario,
    association: &Association,
    uav_pos: Position3D,
    phases: &PhaseConfig,
    rng: &mut ChaCha8Rng,
) -> Result<ChannelRealization> {
    let cfg = &scenario.config;
    let m = cfg.elements_per_ris;
    let lambda = cfg.wavelength();
    let spacing = cfg.element_spacing();
    phases.validate(cfg.num_ris, m)?;

    let mut h_ris_ubs = Vec::with_capacity(cfg.num_ris);
    for ris in &cfg.ris_positions {
        let d = uav_pos.dist(ris);
        let xi = large_scale_gain(d, cfg.alpha_ris_ubs, cfg.ref_gain)?;
        // AoD cosine: (q_U.x - q_i.x) / d.
        let cos_phi = cos_toward(uav_pos.x, ris.x, d);
        let los = ula_los(d, cos_phi, m, spacing, lambda)?;
        h_ris_ubs.push(rician_sample(&los, cfg.rician_ris_ubs, xi, rng)?);
    }

    let mut h_ue_ris = Vec::with_capacity(cfg.num_ues);
    let mut h_ue_ubs = Vec::with_capacity(cfg.num_ues);
    let mut composite = Vec::with_capacity(cfg.num_ues);
    for (k, ue) in scenario.ue_positions.iter().enumerate() {
        let i = association.serving_ris[k];
        let ris = &cfg.ris_positions[i];

        let d_ki = ue.dist(ris);
        let xi_ki = large_scale_gain(d_ki, cfg.alpha_ue_ris, cfg.ref_gain)?;
        // AoA cosine: (q_i.x - q_k.x) / d.
        let cos_ki = cos_toward(ris.x, ue.x, d_ki);
        let los_ki = ula_los(d_ki, cos_ki, m, spacing, lambda)?;
        let h_ki = rician_sample(&los_ki, cfg.rician_ue_ris, xi_ki, rng)?;

        let d_ku = uav_pos.dist(ue);
        let xi_ku = large_scale_gain(d_ku, cfg.alpha_ue_ubs, cfg.ref_gain)?;
        let los_ku = vec![Complex64::from_polar(1.0, -TAU * d_ku / lambda)];
        let h_ku = rician_sample(&los_ku, cfg.rician_ue_ubs, xi_ku, rng)?[0];

        let (flag_l, flag_r) = side_flags(uav_pos.x, ris.x);
        let flag = match association.side_of(k) {
            Side::Left => flag_l,
            Side::Right => flag_r,
        };
        let h_k = composite_channel(
            &h_ris_ubs[i],
            &h_ki,
            &phases.theta_r[i],
            &phases.theta_t[i],
            flag,
            h_ku,
        )?;

        h_ue_ris.push(h_ki);
        h_ue_ubs.push(h_ku);
        composite.push(h_k);
    }

    Ok(ChannelRealization {
        h_ue_ris,
        h_ris_ubs,
        h_ue_ubs,
        composite,
    })
}
