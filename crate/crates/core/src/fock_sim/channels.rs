//! Single-mode bosonic channels in Kraus form, and the detector model.
//!
//! Thermal loss is built as pure loss of transmissivity η/G followed by a
//! quantum-limited amplifier of gain G = 1 + (1−η)n̄; the composition has the
//! same first and second moments as the thermal-loss channel and is Gaussian,
//! so the two are identical.

use super::density::{DensityOperator, SparseImage};
use super::C64;
use crate::combinatorics::binomial;
use crate::error::{domain, Result};
use num_traits::ToPrimitive;

type Kraus = Box<dyn Fn(&[u16]) -> SparseImage>;

fn binom(n: u32, k: u32) -> f64 {
    binomial(n as u64, k as u64).to_f64().unwrap_or(f64::INFINITY)
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain(format!("{name}={x} outside [0,1]")));
    }
    Ok(())
}

fn check_mode(rho: &DensityOperator, mode: usize) -> Result<()> {
    if mode >= rho.modes() {
        return Err(domain(format!("mode {mode} out of range for {} modes", rho.modes())));
    }
    Ok(())
}

/// ⟨n−l|A_l|n⟩ = √(C(n,l)(1−η)^l η^{n−l}).
fn pure_loss_ops(mode: usize, eta: f64, max_n: u16) -> Vec<Kraus> {
    (0..=max_n as u32)
        .map(|l| -> Kraus {
            Box::new(move |b: &[u16]| {
                let n = b[mode] as u32;
                if n < l {
                    return Vec::new();
                }
                let w = binom(n, l) * (1.0 - eta).powi(l as i32) * eta.powi((n - l) as i32);
                if w == 0.0 {
                    return Vec::new();
                }
                let mut o = b.to_vec();
                o[mode] = (n - l) as u16;
                vec![(o, C64::new(w.sqrt(), 0.0))]
            })
        })
        .collect()
}

/// B_l|n⟩ = √(C(n+l,n) G^{−(n+1)} (1−1/G)^l) |n+l⟩, truncated at the cutoff.
fn amplifier_ops(mode: usize, gain: f64, cutoff: u16) -> Vec<Kraus> {
    (0..=cutoff as u32)
        .map(|l| -> Kraus {
            Box::new(move |b: &[u16]| {
                let n = b[mode] as u32;
                if n + l > cutoff as u32 {
                    return Vec::new();
                }
                let w = binom(n + l, n) * gain.powi(-(n as i32 + 1)) * (1.0 - 1.0 / gain).powi(l as i32);
                if w == 0.0 {
                    return Vec::new();
                }
                let mut o = b.to_vec();
                o[mode] = (n + l) as u16;
                vec![(o, C64::new(w.sqrt(), 0.0))]
            })
        })
        .collect()
}

fn max_occupation(rho: &DensityOperator, mode: usize) -> u16 {
    rho.basis().iter().map(|b| b[mode]).max().unwrap_or(0)
}

/// Pure-loss channel of transmissivity η on one mode.
pub fn apply_pure_loss(rho: &DensityOperator, mode: usize, eta: f64) -> Result<DensityOperator> {
    check_unit("eta", eta)?;
    check_mode(rho, mode)?;
    rho.apply_channel(&pure_loss_ops(mode, eta, max_occupation(rho, mode)))
}

/// Quantum-limited amplifier of gain G ≥ 1 on one mode.
pub fn apply_amplifier(rho: &DensityOperator, mode: usize, gain: f64) -> Result<DensityOperator> {
    if !(gain >= 1.0) || !gain.is_finite() {
        return Err(domain(format!("gain {gain} must be >= 1")));
    }
    check_mode(rho, mode)?;
    if gain == 1.0 {
        return Ok(rho.clone());
    }
    rho.apply_channel(&amplifier_ops(mode, gain, rho.cutoff()))
}

/// Thermal-loss channel: transmissivity η, environment occupation n̄.
pub fn apply_thermal_loss(rho: &DensityOperator, mode: usize, eta: f64, nbar: f64) -> Result<DensityOperator> {
    check_unit("eta", eta)?;
    if !(nbar >= 0.0) || !nbar.is_finite() {
        return Err(domain(format!("thermal occupation {nbar} must be >= 0")));
    }
    if nbar == 0.0 || eta == 1.0 {
        return apply_pure_loss(rho, mode, eta);
    }
    let gain = 1.0 + (1.0 - eta) * nbar;
    let lossy = apply_pure_loss(rho, mode, eta / gain)?;
    apply_amplifier(&lossy, mode, gain)
}

/// Photon-number detector behind a phase-insensitive channel: loss η_eff/G
/// then amplification G = 1 + dark_n̄.
///
/// A vacuum input clicks with probability dark_n̄/(1+dark_n̄). For η_eff < 1
/// this is thermal loss with transmissivity η_eff and environment occupation
/// dark_n̄/(1−η_eff).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorModel {
    pub eta_eff: f64,
    pub dark_nbar: f64,
}

impl DetectorModel {
    pub const IDEAL: DetectorModel = DetectorModel { eta_eff: 1.0, dark_nbar: 0.0 };

    pub fn new(eta_eff: f64, dark_nbar: f64) -> Result<Self> {
        check_unit("eta_eff", eta_eff)?;
        if !(dark_nbar >= 0.0) || !dark_nbar.is_finite() {
            return Err(domain(format!("dark occupation {dark_nbar} must be >= 0")));
        }
        Ok(DetectorModel { eta_eff, dark_nbar })
    }

    pub fn is_ideal(&self) -> bool {
        self.eta_eff == 1.0 && self.dark_nbar == 0.0
    }

    /// p(reading `n_out` | `n_in` photons arrive).
    pub fn transition(&self, n_in: u32, n_out: u32) -> f64 {
        if self.is_ideal() {
            return if n_in == n_out { 1.0 } else { 0.0 };
        }
        let gain = 1.0 + self.dark_nbar;
        let tau = self.eta_eff / gain;
        let mut p = 0.0;
        for j in 0..=n_in.min(n_out) {
            let thin = binom(n_in, j) * tau.powi(j as i32) * (1.0 - tau).powi((n_in - j) as i32);
            let l = n_out - j;
            let amp = binom(j + l, j) * gain.powi(-(j as i32 + 1)) * (1.0 - 1.0 / gain).powi(l as i32);
            p += thin * amp;
        }
        p
    }

    /// Maps an ideal photon-number distribution to the detected one, up to `n_max`.
    pub fn apply(&self, ideal: &[f64], n_max: u32) -> Vec<f64> {
        (0..=n_max).map(|n| ideal.iter().enumerate().map(|(k, &p)| p * self.transition(k as u32, n)).sum()).collect()
    }
}

/// Detected statistics for an ideal photon-number distribution.
pub fn detector_model(ideal: &[f64], eta_eff: f64, dark_nbar: f64, n_max: u32) -> Result<Vec<f64>> {
    Ok(DetectorModel::new(eta_eff, dark_nbar)?.apply(ideal, n_max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock_sim::state::FockArray;
    use approx::assert_relative_eq;

    fn number(n: u16, cutoff: u16) -> DensityOperator {
        FockArray::basis(vec![n], cutoff).unwrap().to_density().unwrap()
    }

    #[test]
    fn loss_limits() {
        let rho = number(3, 3);
        let same = apply_pure_loss(&rho, 0, 1.0).unwrap();
        assert!(same.trace_distance(&rho).unwrap() < 1e-15);
        let gone = apply_pure_loss(&rho, 0, 0.0).unwrap();
        assert_eq!(gone.basis(), &[vec![0]]);
        assert_relative_eq!(gone.trace(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn loss_thins_binomially() {
        let out = apply_pure_loss(&number(3, 3), 0, 0.4).unwrap();
        for j in 0..=3u16 {
            let p = binom(3, j as u32) * 0.4f64.powi(j as i32) * 0.6f64.powi(3 - j as i32);
            assert_relative_eq!(out.element(&[j], &[j]).re, p, max_relative = 1e-13);
        }
    }

    #[test]
    fn thermal_limits() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let psi = FockArray::from_terms(1, 6, [(vec![0], C64::new(h, 0.0)), (vec![2], C64::new(h, 0.0))]).unwrap();
        let rho = psi.to_density().unwrap();
        let a = apply_thermal_loss(&rho, 0, 0.6, 0.0).unwrap();
        let b = apply_pure_loss(&rho, 0, 0.6).unwrap();
        assert!(a.trace_distance(&b).unwrap() < 1e-12);
        let c = apply_thermal_loss(&rho, 0, 1.0, 0.3).unwrap();
        assert!(c.trace_distance(&rho).unwrap() < 1e-15);
    }

    #[test]
    fn thermal_first_moment() {
        let out = apply_thermal_loss(&number(0, 12), 0, 0.7, 0.05).unwrap();
        assert!((out.mean_photons(0) - 0.3 * 0.05).abs() < 1e-9);
        assert!((out.trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn thermal_cutoff_too_small_fails() {
        assert!(apply_thermal_loss(&number(0, 1), 0, 0.1, 2.0).is_err());
    }

    #[test]
    fn detector_examples() {
        let ideal = DetectorModel::IDEAL;
        assert_eq!(ideal.apply(&[0.2, 0.5, 0.3], 2), vec![0.2, 0.5, 0.3]);
        let half = DetectorModel::new(0.5, 0.0).unwrap();
        let click: f64 = half.apply(&[0.0, 1.0], 1)[1];
        assert_relative_eq!(click, 0.5, max_relative = 1e-14);
        let dark = DetectorModel::new(1.0, 1e-6).unwrap();
        let vac: f64 = 1.0 - dark.apply(&[1.0], 0)[0];
        assert!((vac - 1e-6).abs() < 1e-11);
        assert!(DetectorModel::new(1.1, 0.0).is_err());
        assert!(detector_model(&[1.0], 0.5, -1.0, 1).is_err());
    }

    #[test]
    fn detector_rows_sum_to_one() {
        let d = DetectorModel::new(0.5, 1e-3).unwrap();
        for n_in in 0..5 {
            let s: f64 = (0..60).map(|n| d.transition(n_in, n)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
