//! Exact enumeration of the Gibbs measure for one disorder realization.

use alloc::vec::Vec;

use rand_core::RngCore;
use thiserror::Error;

use crate::disorder::DisorderSample;
use crate::math;
use crate::model::{parity_of_state, InteractionFamily, ModelError, SpinConfiguration, DEFAULT_VOLUME_CAP, MASK_BITS};
use crate::stats::{pairwise_sum, pairwise_sum_by};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GibbsError {
    #[error("volume {volume} exceeds the enumeration cap of {cap}")]
    VolumeOverCap { volume: usize, cap: usize },
    #[error("sample has {got} couplings, family has {expected}")]
    CouplingMismatch { expected: usize, got: usize },
    #[error("free energy F = -A/β is undefined at β = 0")]
    ZeroTemperature,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `H(σ) = -Σ_X J_X σ_X` for all `2^N` states in natural binary order.
pub fn energies(family: &InteractionFamily, sample: &DisorderSample) -> Result<Vec<f64>, GibbsError> {
    energies_capped(family, sample, DEFAULT_VOLUME_CAP)
}

/// Fails unless the family can be enumerated under the default cap.
pub fn check_enumerable(family: &InteractionFamily) -> Result<(), GibbsError> {
    if family.volume() > DEFAULT_VOLUME_CAP {
        return Err(GibbsError::VolumeOverCap {
            volume: family.volume(),
            cap: DEFAULT_VOLUME_CAP,
        });
    }
    family.masks_or_err()?;
    Ok(())
}

pub fn energies_capped(
    family: &InteractionFamily,
    sample: &DisorderSample,
    cap: usize,
) -> Result<Vec<f64>, GibbsError> {
    let cap = cap.min(MASK_BITS - 2);
    if family.volume() > cap {
        return Err(GibbsError::VolumeOverCap {
            volume: family.volume(),
            cap,
        });
    }
    if sample.couplings.len() != family.len() {
        return Err(GibbsError::CouplingMismatch {
            expected: family.len(),
            got: sample.couplings.len(),
        });
    }
    let masks = family.masks_or_err()?;
    Ok(energies_from_couplings(masks, family.volume(), &sample.couplings))
}

pub(crate) fn energies_from_couplings(masks: &[u32], volume: usize, couplings: &[f64]) -> Vec<f64> {
    (0..1u32 << volume)
        .map(|state| {
            let mut h = 0.0;
            for (m, j) in masks.iter().zip(couplings) {
                h -= j * parity_of_state(state, *m);
            }
            h
        })
        .collect()
}

/// `ω(σ_target)` for couplings given as a plain slice; used by derivative checks.
pub(crate) fn correlation_at(masks: &[u32], volume: usize, couplings: &[f64], beta: f64, target: u32) -> f64 {
    let table = GibbsTable::from_energies(volume, energies_from_couplings(masks, volume, couplings), beta);
    table.omega_mask(target)
}

/// Boltzmann weights of all configurations at one inverse temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsTable {
    beta: f64,
    volume: usize,
    energies: Vec<f64>,
    log_weights: Vec<f64>,
    log_z: f64,
    probabilities: Vec<f64>,
}

impl GibbsTable {
    pub fn enumerate(family: &InteractionFamily, sample: &DisorderSample, beta: f64) -> Result<Self, GibbsError> {
        Ok(Self::from_energies(family.volume(), energies(family, sample)?, beta))
    }

    /// Table from precomputed state energies (`energies.len() == 2^volume`).
    pub fn from_energies(volume: usize, energies: Vec<f64>, beta: f64) -> Self {
        debug_assert_eq!(energies.len(), 1usize << volume);
        let log_weights: Vec<f64> = energies.iter().map(|e| -beta * e).collect();
        let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let shifted: Vec<f64> = log_weights.iter().map(|lw| math::exp(lw - max)).collect();
        let log_z = max + math::ln(pairwise_sum(&shifted));
        let probabilities = log_weights.iter().map(|lw| math::exp(lw - log_z)).collect();
        Self {
            beta,
            volume,
            energies,
            log_weights,
            log_z,
            probabilities,
        }
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn volume(&self) -> usize {
        self.volume
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `𝒜 = ln 𝒵`.
    pub fn log_partition(&self) -> f64 {
        self.log_z
    }

    /// `(𝒜, 𝓕)` with `𝓕 = -𝒜/β`.
    pub fn free_energy(&self) -> Result<(f64, f64), GibbsError> {
        if self.beta == 0.0 {
            return Err(GibbsError::ZeroTemperature);
        }
        Ok((self.log_z, -self.log_z / self.beta))
    }

    /// Gibbs mean of the energy, `𝒰`.
    pub fn internal_energy(&self) -> f64 {
        pairwise_sum_by(self.energies.len(), &|s| self.probabilities[s] * self.energies[s])
    }

    /// `ω(σ_{X_1} ⋯ σ_{X_m})`; the product reduces to the parity of the
    /// symmetric difference of the masks.
    pub fn omega(&self, targets: &[u32]) -> f64 {
        self.omega_mask(targets.iter().fold(0, |a, m| a ^ m))
    }

    pub fn omega_mask(&self, mask: u32) -> f64 {
        if mask == 0 {
            return 1.0;
        }
        pairwise_sum_by(self.probabilities.len(), &|s| {
            self.probabilities[s] * parity_of_state(s as u32, mask)
        })
    }

    /// `ω(σ_m)` for every mask `m`, by one Walsh-Hadamard transform.
    pub fn parity_expectations(&self) -> Vec<f64> {
        let mut v = self.probabilities.clone();
        signed_walsh_hadamard(&mut v);
        v[0] = 1.0;
        v
    }

    /// `ω(H σ_m)` for every mask `m`.
    pub fn energy_parity_expectations(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .probabilities
            .iter()
            .zip(&self.energies)
            .map(|(p, e)| p * e)
            .collect();
        signed_walsh_hadamard(&mut v);
        v
    }

    pub fn sampler(&self) -> GibbsSampler {
        let mut cdf = Vec::with_capacity(self.probabilities.len());
        let mut acc = 0.0;
        for p in &self.probabilities {
            acc += p;
            cdf.push(acc);
        }
        GibbsSampler {
            cdf,
            volume: self.volume,
        }
    }
}

/// Turns `v[s]` into `Σ_s v[s] σ_m(s)` for every mask `m`.
fn signed_walsh_hadamard(v: &mut [f64]) {
    let n = v.len();
    let mut h = 1;
    while h < n {
        for i in (0..n).step_by(2 * h) {
            for j in i..i + h {
                let a = v[j];
                let b = v[j + h];
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
    // The butterfly computes Σ v[s] (-1)^{|s∧m|} = Σ v[s] Π_{i∈m} (-σ_i).
    for (m, x) in v.iter_mut().enumerate() {
        if (m as u32).count_ones() & 1 == 1 {
            *x = -*x;
        }
    }
}

/// Inverse-CDF sampler over the enumerated states.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsSampler {
    cdf: Vec<f64>,
    volume: usize,
}

impl GibbsSampler {
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> SpinConfiguration {
        let total = *self.cdf.last().expect("nonempty table");
        let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64) * total;
        let state = self.cdf.partition_point(|&c| c <= u).min(self.cdf.len() - 1);
        SpinConfiguration::new(state as u32, self.volume).expect("state within volume")
    }
}

/// One exact draw from the table's distribution.
pub fn gibbs_draw<R: RngCore + ?Sized>(table: &GibbsTable, rng: &mut R) -> SpinConfiguration {
    table.sampler().draw(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::disorder::sample_disorder;
    use crate::model::Preset;
    use alloc::vec;
    use rand_chacha::ChaCha8Rng;
    use rand_core::SeedableRng;

    fn pair_family() -> InteractionFamily {
        InteractionFamily::custom(2, vec![(vec![0, 1], 1.0)], 1.0).unwrap()
    }

    fn with_couplings(c: Vec<f64>) -> DisorderSample {
        DisorderSample {
            couplings: c,
            index: 0,
            seed: 0,
        }
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let f = InteractionFamily::build(&Preset::sk(5)).unwrap();
        let t = GibbsTable::enumerate(&f, &sample_disorder(&f, 1, 0), 0.0).unwrap();
        assert!((t.log_partition() - 5.0 * core::f64::consts::LN_2).abs() < 1e-13);
        assert!(t.internal_energy().abs() < 1e-13);
        assert_eq!(t.free_energy(), Err(GibbsError::ZeroTemperature));
        assert!(t.omega(&[0b11]).abs() < 1e-15);
        assert_eq!(t.omega(&[0b11, 0b11]), 1.0);
    }

    #[test]
    fn zero_couplings_give_flat_landscape() {
        let f = InteractionFamily::build(&Preset::ea(1, 4, true)).unwrap();
        let t = GibbsTable::enumerate(&f, &with_couplings(vec![0.0; 4]), 2.0).unwrap();
        assert!(t.energies().iter().all(|&e| e == 0.0));
        assert!((t.log_partition() - 4.0 * core::f64::consts::LN_2).abs() < 1e-13);
        assert_eq!(t.internal_energy(), 0.0);
    }

    #[test]
    fn two_spin_closed_forms() {
        let f = pair_family();
        for (beta, j) in [(1.0, 1.0), (0.3, -0.8), (2.5, 0.4)] {
            let t = GibbsTable::enumerate(&f, &with_couplings(vec![j]), beta).unwrap();
            let z = 4.0 * (beta * j).cosh();
            assert!((t.log_partition() - z.ln()).abs() < 1e-14);
            assert!((t.internal_energy() + j * (beta * j).tanh()).abs() < 1e-14);
            assert!((t.omega(&[0b11]) - (beta * j).tanh()).abs() < 1e-14);
            let (a, fe) = t.free_energy().unwrap();
            assert_eq!(a, t.log_partition());
            assert!((fe + a / beta).abs() < 1e-15);
        }
        let t = GibbsTable::enumerate(&f, &with_couplings(vec![1.0]), 1.0).unwrap();
        assert!((t.log_partition() - (4.0 * 1f64.cosh()).ln()).abs() < 1e-15);
    }

    #[test]
    fn disjoint_copies_add_log_partition() {
        let f = InteractionFamily::build(&Preset::sk(3)).unwrap();
        let ff = f.disjoint_union(&f).unwrap();
        let a = sample_disorder(&f, 4, 0);
        let b = sample_disorder(&f, 4, 1);
        let mut joint = a.couplings.clone();
        joint.extend_from_slice(&b.couplings);
        let ta = GibbsTable::enumerate(&f, &a, 0.9).unwrap();
        let tb = GibbsTable::enumerate(&f, &b, 0.9).unwrap();
        let tj = GibbsTable::enumerate(&ff, &with_couplings(joint), 0.9).unwrap();
        assert!((tj.log_partition() - ta.log_partition() - tb.log_partition()).abs() < 1e-12);
        let same =
            GibbsTable::enumerate(&ff, &with_couplings([a.couplings.clone(), a.couplings].concat()), 0.9).unwrap();
        assert!((same.log_partition() - 2.0 * ta.log_partition()).abs() < 1e-12);
    }

    #[test]
    fn probabilities_are_normalized_at_low_temperature() {
        let f = InteractionFamily::build(&Preset::sk(10)).unwrap();
        let t = GibbsTable::enumerate(&f, &sample_disorder(&f, 8, 3), 10.0).unwrap();
        let s: f64 = t.probabilities().iter().sum();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(t.log_partition().is_finite());
    }

    #[test]
    fn walsh_table_matches_direct_sums() {
        let f = InteractionFamily::build(&Preset::RandomEnergy { n: 4 }).unwrap();
        let t = GibbsTable::enumerate(&f, &sample_disorder(&f, 2, 7), 1.3).unwrap();
        let w = t.parity_expectations();
        let hw = t.energy_parity_expectations();
        for m in 0..16u32 {
            assert!((w[m as usize] - t.omega_mask(m)).abs() < 1e-14);
            let direct: f64 = (0..16u32)
                .map(|s| t.probabilities()[s as usize] * t.energies()[s as usize] * parity_of_state(s, m))
                .sum();
            assert!((hw[m as usize] - direct).abs() < 1e-13);
        }
        assert!((hw[0] - t.internal_energy()).abs() < 1e-13);
    }

    #[test]
    fn volume_cap_is_enforced() {
        let f = InteractionFamily::build(&Preset::ea(1, 6, true)).unwrap();
        let s = sample_disorder(&f, 0, 0);
        assert!(matches!(
            energies_capped(&f, &s, 5),
            Err(GibbsError::VolumeOverCap { volume: 6, cap: 5 })
        ));
        assert!(matches!(
            energies(&f, &with_couplings(vec![1.0])),
            Err(GibbsError::CouplingMismatch { .. })
        ));
    }

    #[test]
    fn draws_at_infinite_temperature_are_uniform() {
        let f = InteractionFamily::build(&Preset::sk(3)).unwrap();
        let t = GibbsTable::enumerate(&f, &sample_disorder(&f, 1, 1), 0.0).unwrap();
        let sampler = t.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let mut counts = [0usize; 8];
        for _ in 0..n {
            counts[sampler.draw(&mut rng).bits() as usize] += 1;
        }
        let expected = n as f64 / 8.0;
        let sd = (n as f64 * (1.0 / 8.0) * (7.0 / 8.0)).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() < 4.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn draws_concentrate_on_ground_states() {
        let f = pair_family();
        let t = GibbsTable::enumerate(&f, &with_couplings(vec![1.0]), 20.0).unwrap();
        let sampler = t.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let aligned = (0..100_000)
            .filter(|_| {
                let s = sampler.draw(&mut rng);
                s.spin(0) == s.spin(1)
            })
            .count();
        assert!(aligned as f64 / 100_000.0 >= 1.0 - 1e-6);
    }

    #[test]
    fn draws_are_reproducible() {
        let f = InteractionFamily::build(&Preset::sk(4)).unwrap();
        let t = GibbsTable::enumerate(&f, &sample_disorder(&f, 1, 1), 1.0).unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            assert_eq!(gibbs_draw(&t, &mut a), gibbs_draw(&t, &mut b));
        }
    }
}
