//! Multiple-access layer: SIC decoding order, NOMA and OMA cluster rates,
//! the per-RIS time-switching split, and per-slot UE energy accounting.
//!
//! Clusters (the UEs on one side of one panel) share their band via NOMA:
//! the receiver decodes in descending channel-gain order, so a UE sees
//! interference only from cluster members decoded after it. Rates here are
//! spectral efficiencies in bits/s/Hz; multiply by the bandwidth for bits/s.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scenario::Association;
use crate::Result;

/// Per-RIS time-switching split. Only the left fraction is stored; the
/// right duration is derived, which keeps `tau_left + tau_right == tau`
/// by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSplit {
    /// Fraction of the slot allocated to the left cluster, in [0, 1].
    pub left_fraction: Vec<f64>,
    /// Slot length tau in seconds.
    pub slot_length: f64,
}

impl TimeSplit {
    pub fn new(left_fraction: Vec<f64>, slot_length: f64) -> Result<Self> {
        if left_fraction.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::Domain("time split fraction outside [0, 1]".into()));
        }
        Ok(Self {
            left_fraction,
            slot_length,
        })
    }

    /// Seconds allocated to the left cluster of panel `i`.
    pub fn tau_left(&self, i: usize) -> f64 {
        self.left_fraction[i] * self.slot_length
    }

    /// Seconds allocated to the right cluster of panel `i`.
    pub fn tau_right(&self, i: usize) -> f64 {
        self.slot_length - self.tau_left(i)
    }
}

/// Per-UE transmit powers in watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub watts: Vec<f64>,
}

impl PowerAllocation {
    pub fn validate(&self, p_max: f64) -> Result<()> {
        if self.watts.iter().any(|p| !(0.0..=p_max).contains(p)) {
            return Err(Error::Domain(format!(
                "transmit power outside [0, {p_max}]"
            )));
        }
        Ok(())
    }
}

/// SIC ranks within one cluster, 1-based; rank 1 is decoded first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodingOrder {
    pub rank: Vec<usize>,
}

/// Decoding order for one cluster: rank 1 for the largest gain, ties broken
/// by the lower position index taking the earlier rank.
pub fn decoding_order(gains: &[f64]) -> DecodingOrder {
    let mut idx: Vec<usize> = (0..gains.len()).collect();
    idx.sort_by(|&a, &b| {
        gains[b]
            .partial_cmp(&gains[a])
            .expect("channel gains must be comparable")
            .then(a.cmp(&b))
    });
    let mut rank = vec![0usize; gains.len()];
    for (pos, &j) in idx.iter().enumerate() {
        rank[j] = pos + 1;
    }
    DecodingOrder { rank }
}

/// NOMA spectral efficiencies of one cluster in bits/s/Hz.
///
/// `time_fraction` is the cluster's share of the slot (tau_side / tau) and
/// `num_ris` the FDMA factor I; each rate is
/// `(time_fraction / I) * log2(1 + p g / (sum of later-decoded p g + sigma^2))`.
pub fn noma_cluster_rates(
    gains: &[f64],
    powers: &[f64],
    time_fraction: f64,
    num_ris: usize,
    sigma2: f64,
) -> Vec<f64> {
    debug_assert_eq!(gains.len(), powers.len());
    let order = decoding_order(gains);
    let prefactor = time_fraction / num_ris as f64;
    (0..gains.len())
        .map(|j| {
            let mut interference = 0.0;
            for j2 in 0..gains.len() {
                if order.rank[j2] > order.rank[j] {
                    interference += powers[j2] * gains[j2];
                }
            }
            let sinr = powers[j] * gains[j] / (interference + sigma2);
            prefactor * (1.0 + sinr).log2()
        })
        .collect()
}

/// OMA (OFDMA) spectral efficiencies of one cluster in bits/s/Hz.
///
/// A cluster of size c splits its band equally; each UE sees a noise share
/// of sigma^2 / c in its subband, i.e.
/// `(time_fraction / (I c)) * log2(1 + p g c / sigma^2)`.
pub fn oma_cluster_rates(
    gains: &[f64],
    powers: &[f64],
    time_fraction: f64,
    num_ris: usize,
    sigma2: f64,
) -> Vec<f64> {
    debug_assert_eq!(gains.len(), powers.len());
    let c = gains.len() as f64;
    let prefactor = time_fraction / (num_ris as f64 * c);
    gains
        .iter()
        .zip(powers.iter())
        .map(|(&g, &p)| prefactor * (1.0 + p * g * c / sigma2).log2())
        .collect()
}

/// Energy each UE spends this slot: its power times its side's duration.
pub fn slot_energy(
    powers: &PowerAllocation,
    split: &TimeSplit,
    association: &Association,
) -> Vec<f64> {
    let mut out = vec![0.0; powers.watts.len()];
    for (i, members) in association.left_sets.iter().enumerate() {
        for &k in members {
            out[k] = powers.watts[k] * split.tau_left(i);
        }
    }
    for (i, members) in association.right_sets.iter().enumerate() {
        for &k in members {
            out[k] = powers.watts[k] * split.tau_right(i);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{associate, build_scenario, Position3D, ScenarioConfig, UePlacement};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn decoding_order_sorts_descending() {
        assert_eq!(decoding_order(&[3.0, 1.0, 2.0]).rank, vec![1, 3, 2]);
        assert_eq!(decoding_order(&[5.0]).rank, vec![1]);
    }

    #[test]
    fn decoding_order_breaks_ties_by_index() {
        assert_eq!(decoding_order(&[1.0, 1.0]).rank, vec![1, 2]);
        assert_eq!(decoding_order(&[2.0, 1.0, 2.0]).rank, vec![1, 3, 2]);
    }

    #[test]
    fn decoding_order_is_permutation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = 1 + (rng.gen::<u32>() % 6) as usize;
            let gains: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let mut ranks = decoding_order(&gains).rank;
            ranks.sort_unstable();
            assert_eq!(ranks, (1..=n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn single_ue_rate() {
        // p g / sigma^2 = 1 with full time share and one panel: log2(2) = 1.
        let r = noma_cluster_rates(&[2.0], &[0.5], 1.0, 1, 1.0);
        assert!((r[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_ue_hand_computed_sinrs() {
        // p1 g1 = 3 sigma^2, p2 g2 = 1 sigma^2: UE 1 decoded first sees UE 2
        // as interference, UE 2 is decoded interference-free.
        let sigma2 = 1.0;
        let tf = 0.5;
        let i = 2;
        let r = noma_cluster_rates(&[3.0, 1.0], &[1.0, 1.0], tf, i, sigma2);
        let pre = tf / i as f64;
        assert!((r[0] - pre * (1.0_f64 + 3.0 / 2.0).log2()).abs() < 1e-12);
        assert!((r[1] - pre * 2.0_f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn sic_telescoping_identity() {
        // Sum of log2(1 + SINR_k) collapses to log2(1 + sum p g / sigma^2).
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let n = 1 + (rng.gen::<u32>() % 6) as usize;
            let gains: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 1e-6).collect();
            let powers: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let sigma2 = 1e-7;
            let rates = noma_cluster_rates(&gains, &powers, 1.0, 1, sigma2);
            let total: f64 = rates.iter().sum();
            let sum_pg: f64 = gains.iter().zip(&powers).map(|(g, p)| g * p).sum();
            let expected = (1.0 + sum_pg / sigma2).log2();
            assert!(
                (total - expected).abs() / expected.abs().max(1e-30) < 1e-9,
                "telescoping violated: {total} vs {expected}"
            );
        }
    }

    #[test]
    fn first_decoded_rate_monotone_in_own_power() {
        let gains = [4.0, 1.0, 0.5];
        let sigma2 = 1.0;
        let mut last = -1.0;
        for step in 0..10 {
            let p0 = 0.1 * (step + 1) as f64;
            let r = noma_cluster_rates(&gains, &[p0, 0.7, 0.3], 1.0, 1, sigma2);
            assert!(r.iter().all(|&x| x >= 0.0));
            assert!(r[0] > last);
            last = r[0];
        }
    }

    #[test]
    fn oma_degenerate_cluster_equals_noma() {
        let r_noma = noma_cluster_rates(&[2.0e-6], &[0.8], 0.7, 3, 1e-6);
        let r_oma = oma_cluster_rates(&[2.0e-6], &[0.8], 0.7, 3, 1e-6);
        assert!((r_noma[0] - r_oma[0]).abs() < 1e-12);
    }

    #[test]
    fn oma_two_ue_formula() {
        // c = 2, p g = sigma^2 each: r = (tf / 2I) log2(3).
        let tf = 1.0;
        let i = 1;
        let r = oma_cluster_rates(&[1.0, 1.0], &[1.0, 1.0], tf, i, 1.0);
        let expected = tf / 2.0 * 3.0_f64.log2();
        assert!((r[0] - expected).abs() < 1e-12);
        assert!((r[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn oma_sum_never_exceeds_noma_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let n = 1 + (rng.gen::<u32>() % 5) as usize;
            let gains: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 1e-5).collect();
            let powers: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
            let sigma2 = 1e-6;
            let noma: f64 = noma_cluster_rates(&gains, &powers, 1.0, 1, sigma2).iter().sum();
            let oma: f64 = oma_cluster_rates(&gains, &powers, 1.0, 1, sigma2).iter().sum();
            assert!(oma <= noma + 1e-12, "OMA sum {oma} exceeded NOMA sum {noma}");
        }
    }

    #[test]
    fn time_split_sums_to_slot_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let f: f64 = rng.gen();
            let split = TimeSplit::new(vec![f], 1.0).unwrap();
            assert_eq!(split.tau_left(0) + split.tau_right(0), 1.0);
        }
        assert!(TimeSplit::new(vec![1.2], 1.0).is_err());
    }

    fn tiny_association() -> (crate::scenario::Scenario, Association) {
        let mut cfg = ScenarioConfig::desk();
        cfg.num_ues = 2;
        cfg.ue_positions = UePlacement::Explicit(vec![
            Position3D::new(40.0, 120.0, 0.0),  // left of RIS 0 at x=60
            Position3D::new(200.0, 120.0, 0.0), // right of RIS 1 at x=180
        ]);
        let sc = build_scenario(&cfg, 0).unwrap();
        let assoc = associate(&sc);
        (sc, assoc)
    }

    #[test]
    fn slot_energy_cases() {
        let (_, assoc) = tiny_association();
        let powers = PowerAllocation { watts: vec![1.0, 1.0] };
        let split = TimeSplit::new(vec![0.5, 0.5], 1.0).unwrap();
        let e = slot_energy(&powers, &split, &assoc);
        assert!((e[0] - 0.5).abs() < 1e-15);
        assert!((e[1] - 0.5).abs() < 1e-15);

        let zero = PowerAllocation { watts: vec![0.0, 0.0] };
        assert_eq!(slot_energy(&zero, &split, &assoc), vec![0.0, 0.0]);

        // Full slot to the left clusters: right-side UE consumes nothing.
        let all_left = TimeSplit::new(vec![1.0, 1.0], 1.0).unwrap();
        let e = slot_energy(&powers, &all_left, &assoc);
        assert!((e[0] - 1.0).abs() < 1e-15);
        assert_eq!(e[1], 0.0);
    }
}
