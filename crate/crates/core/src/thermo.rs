//! Oscillator spectrum and the thermal (Gibbs) initial state.

use crate::error::{Error, Result};

/// Default residual tail mass discarded by [`thermal_weights`].
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Energy spectrum of the emulated system, in units of `hbar omega`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Spectrum {
    #[default]
    HarmonicOscillator,
}

impl Spectrum {
    pub fn level(&self, n: usize) -> f64 {
        match self {
            Spectrum::HarmonicOscillator => n as f64 + 0.5,
        }
    }

    /// `ln Z(beta)` of the full (untruncated) spectrum.
    pub fn log_partition(&self, beta_hw: f64) -> f64 {
        match self {
            // Z = e^{-b/2} / (1 - e^{-b})
            Spectrum::HarmonicOscillator => -0.5 * beta_hw - (-(-beta_hw).exp_m1()).ln(),
        }
    }
}

/// Boltzmann weights `p_n` over the kept levels `0..=n_cut`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalEnsemble {
    beta_hw: f64,
    weights: Vec<f64>,
    log_partition: f64,
    renormalization: f64,
    spectrum: Spectrum,
}

impl ThermalEnsemble {
    pub fn beta_hw(&self) -> f64 {
        self.beta_hw
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, n: usize) -> f64 {
        self.weights.get(n).copied().unwrap_or(0.0)
    }

    pub fn n_cut(&self) -> usize {
        self.weights.len() - 1
    }

    /// `ln` of the partition function restricted to the kept levels.
    pub fn log_partition(&self) -> f64 {
        self.log_partition
    }

    /// Factor `1 / (1 - tail)` applied to the kept weights.
    pub fn renormalization(&self) -> f64 {
        self.renormalization
    }

    pub fn spectrum(&self) -> Spectrum {
        self.spectrum
    }

    /// Ground state only (`beta -> infinity` limit).
    pub fn ground_state() -> Self {
        Self {
            beta_hw: f64::INFINITY,
            weights: vec![1.0],
            log_partition: f64::NEG_INFINITY,
            renormalization: 1.0,
            spectrum: Spectrum::HarmonicOscillator,
        }
    }
}

/// Thermal weights on `0..=n_cut` for a cutoff chosen by the caller.
pub fn thermal_weights_with_cutoff(beta_hw: f64, n_cut: usize) -> Result<ThermalEnsemble> {
    if !(beta_hw > 0.0) || !beta_hw.is_finite() {
        return Err(Error::DegenerateTemperature(beta_hw));
    }
    Ok(build(beta_hw, n_cut))
}

/// Thermal state of the oscillator at `beta_hw = hbar omega / kT`, cut at
/// the smallest `n_cut` whose discarded tail mass is below `tail_tol`.
pub fn thermal_weights(beta_hw: f64, tail_tol: f64) -> Result<ThermalEnsemble> {
    if !(beta_hw > 0.0) || !beta_hw.is_finite() {
        return Err(Error::DegenerateTemperature(beta_hw));
    }
    if !(tail_tol > 0.0 && tail_tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail_tol must lie in (0, 1), got {tail_tol}"
        )));
    }
    // Mass beyond n_cut is e^{-beta (n_cut + 1)}.
    let mut n_cut = (-tail_tol.ln() / beta_hw - 1.0).floor().max(0.0) as usize;
    while n_cut > 0 && tail_mass(beta_hw, n_cut - 1) < tail_tol {
        n_cut -= 1;
    }
    while tail_mass(beta_hw, n_cut) >= tail_tol {
        n_cut += 1;
    }

    Ok(build(beta_hw, n_cut))
}

fn build(beta_hw: f64, n_cut: usize) -> ThermalEnsemble {
    let tail = tail_mass(beta_hw, n_cut);
    let kept = -(-beta_hw * (n_cut + 1) as f64).exp_m1();
    let ground = -(-beta_hw).exp_m1();
    let renormalization = 1.0 / kept;
    let weights: Vec<f64> = (0..=n_cut)
        .map(|n| ground * (-beta_hw * n as f64).exp() * renormalization)
        .collect();
    let spectrum = Spectrum::HarmonicOscillator;
    let log_partition = spectrum.log_partition(beta_hw) + (-tail).ln_1p();

    ThermalEnsemble {
        beta_hw,
        weights,
        log_partition,
        renormalization,
        spectrum,
    }
}

fn tail_mass(beta_hw: f64, n_cut: usize) -> f64 {
    (-beta_hw * (n_cut + 1) as f64).exp()
}

/// `Delta F = -(1/beta) ln(Z_F / Z_I)` in units of `hbar omega`.
pub fn free_energy_delta(initial: Spectrum, final_: Spectrum, beta_hw: f64) -> f64 {
    if initial == final_ {
        return 0.0;
    }
    -(final_.log_partition(beta_hw) - initial.log_partition(beta_hw)) / beta_hw
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_beta_weights() {
        let ens = thermal_weights(1.0, 1e-12).unwrap();
        let p0 = 1.0 - (-1.0f64).exp();
        assert!((ens.weight(0) - p0).abs() < 1e-11);
        assert!((ens.weight(0) - 0.63212).abs() < 1e-5);
        assert!((ens.weight(1) / ens.weight(0) - (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn cutoff_for_hot_state() {
        // brute force: accumulate the geometric series until the remainder drops below tol
        let beta = 0.1f64;
        let tol = 1e-6;
        let mut mass = 0.0;
        let mut n = 0usize;
        loop {
            mass += (1.0 - (-beta).exp()) * (-beta * n as f64).exp();
            if 1.0 - mass < tol {
                break;
            }
            n += 1;
        }
        let ens = thermal_weights(beta, tol).unwrap();
        assert_eq!(ens.n_cut(), 138);
        assert!((ens.n_cut() as i64 - n as i64).abs() <= 1);
    }

    #[test]
    fn boltzmann_ratio_everywhere() {
        let ens = thermal_weights(0.37, 1e-9).unwrap();
        let r = (-0.37f64).exp();
        for w in ens.weights().windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-13);
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for &beta in &[0.05, 0.1, 1.0, 4.0] {
            let ens = thermal_weights(beta, 1e-8).unwrap();
            let total: f64 = ens.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn log_partition_matches_direct_sum() {
        for &beta in &[0.1, 0.5, 1.0, 3.0] {
            let ens = thermal_weights(beta, 1e-8).unwrap();
            let direct: f64 = (0..=ens.n_cut())
                .map(|n| (-beta * (n as f64 + 0.5)).exp())
                .sum();
            let rel = (ens.log_partition() - direct.ln()).abs() / direct.ln().abs();
            assert!(rel < 1e-12, "beta {beta}: rel {rel}");
        }
    }

    #[test]
    fn cutoff_is_monotone_in_tolerance() {
        let mut last = usize::MAX;
        for &tol in &[1e-14, 1e-10, 1e-8, 1e-4, 1e-2, 0.5] {
            let n = thermal_weights(0.3, tol).unwrap().n_cut();
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn explicit_cutoff_matches_tail_rule() {
        let a = thermal_weights(0.1, 1e-6).unwrap();
        let b = thermal_weights_with_cutoff(0.1, a.n_cut()).unwrap();
        assert_eq!(a, b);
        assert!(thermal_weights_with_cutoff(0.0, 3).is_err());
    }

    #[test]
    fn degenerate_temperature() {
        assert!(matches!(
            thermal_weights(0.0, 1e-8),
            Err(Error::DegenerateTemperature(_))
        ));
        assert!(thermal_weights(-1.0, 1e-8).is_err());
        assert!(thermal_weights(1.0, 0.0).is_err());
    }

    #[test]
    fn identical_spectra_have_no_free_energy_change() {
        let h = Spectrum::HarmonicOscillator;
        for &beta in &[0.1, 1.0, 7.0] {
            assert_eq!(free_energy_delta(h, h, beta), 0.0);
        }
    }
}
