use super::channels::{apply_pure_loss, apply_thermal_loss};
use super::density::DensityOperator;
use super::state::{FockArray, Occupation};
use super::{ChannelModel, C64};
use crate::combinatorics::{binomial, enumerate_codewords, rational_to_f64, resource_norm_s, CodeParams};
use crate::error::{domain, Error, Result};
use num_traits::ToPrimitive;

fn binom(n: u32, k: u32) -> f64 {
    binomial(n as u64, k as u64).to_f64().unwrap_or(f64::INFINITY)
}

/// Σ_μ |μ⟩_A |μ⟩_rails / √d: Alice's offline code state, her m kept rails first.
pub fn encode_maximally_entangled(p: CodeParams) -> Result<FockArray> {
    let words = enumerate_codewords(p)?;
    let a = C64::new(1.0 / (words.len() as f64).sqrt(), 0.0);
    let m = p.m as usize;
    FockArray::from_terms(
        2 * m,
        p.k.max(1) as u16,
        words.iter().map(|w| {
            let mut occ: Occupation = w.0.iter().map(|&n| n as u16).collect();
            occ.extend(w.0.iter().map(|&n| n as u16));
            (occ, a)
        }),
    )
}

/// Resource state Ω on m rails plus an output mode.
///
/// Code word μ (in canonical order, index i) contributes
/// f_μ |k−n_1, …, k−n_m⟩|i⟩ with f_μ = [∏ C(k, n_j)]^{−1/2}; the state is
/// normalized, so the squared coefficients before normalization sum to S_{k,m}.
pub fn build_resource_state(p: CodeParams) -> Result<FockArray> {
    let words = enumerate_codewords(p)?;
    let s = rational_to_f64(&resource_norm_s(p)?);
    let cutoff = (p.k as usize).max(words.len().saturating_sub(1)).max(1);
    let cutoff = u16::try_from(cutoff).map_err(|_| domain("resource state too large for u16 occupations"))?;
    let mut out = FockArray::zero(p.m as usize + 1, cutoff);
    for (i, w) in words.iter().enumerate() {
        let prod: f64 = w.0.iter().map(|&n| binom(p.k, n)).product();
        let mut occ: Occupation = w.0.iter().map(|&n| (p.k - n) as u16).collect();
        occ.push(i as u16);
        out.add(occ, C64::new(1.0 / (prod * s).sqrt(), 0.0))?;
    }
    Ok(out)
}

/// Ideal result of teleporting the rails of `input` into the output mode:
/// rail code word μ becomes output Fock state |index(μ)⟩.
pub fn ideal_transfer_target(p: CodeParams, input: &FockArray) -> Result<FockArray> {
    let m = p.m as usize;
    if input.modes() < m {
        return Err(domain("input has fewer modes than rails"));
    }
    let a = input.modes() - m;
    let words = enumerate_codewords(p)?;
    let cutoff = input.cutoff().max(words.len().saturating_sub(1) as u16);
    let mut out = FockArray::zero(a + 1, cutoff);
    for (occ, amp) in input.terms() {
        let rails: Vec<u32> = occ[a..].iter().map(|&n| n as u32).collect();
        let idx =
            words.iter().position(|w| w.0 == rails).ok_or_else(|| domain("input rails are not in the code space"))?;
        let mut o: Occupation = occ[..a].to_vec();
        o.push(idx as u16);
        out.add(o, *amp)?;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct PurifyOutcome {
    pub success_probability: f64,
    /// Trace-normalized state of Alice's kept modes and Bob's output mode.
    pub output: DensityOperator,
    /// Overlap of the output with the ideal transfer of the input.
    pub fidelity: f64,
    pub purity: f64,
}

fn default_cutoff(p: CodeParams, channel: &ChannelModel) -> u16 {
    let d = enumerate_codewords(p).map(|w| w.len()).unwrap_or(1);
    let extra = if channel.is_noiseless() { 0 } else { 4 };
    ((2 * p.k as usize + extra).max(d.saturating_sub(1)).max(1)) as u16
}

/// Linear-optics purification with a cutoff chosen from the code and noise.
pub fn linear_optics_purify(p: CodeParams, channel: &ChannelModel, input: &FockArray) -> Result<PurifyOutcome> {
    linear_optics_purify_with_cutoff(p, channel, input, default_cutoff(p, channel))
}

/// Sends the last m modes of `input` through the channel, mixes each rail with
/// the matching resource rail on a balanced beamsplitter, and keeps runs where
/// every pair reads (k, 0) or (0, k).
///
/// A (0, k) reading on pair i carries the phase (−1)^{k−n_i} on code word μ;
/// it is undone on the output mode, so both readings contribute coherently.
pub fn linear_optics_purify_with_cutoff(
    p: CodeParams,
    channel: &ChannelModel,
    input: &FockArray,
    cutoff: u16,
) -> Result<PurifyOutcome> {
    let m = p.m as usize;
    let k = p.k as u16;
    if p.k == 0 {
        return Err(domain("the circuit needs k >= 1"));
    }
    if input.modes() < m {
        return Err(domain("input has fewer modes than rails"));
    }
    if input.terms().any(|(o, _)| o.iter().any(|&n| n > cutoff)) {
        return Err(Error::Truncation { lost: 1.0, cutoff: cutoff as usize, tolerance: 0.0 });
    }
    let a = input.modes() - m;
    let words = enumerate_codewords(p)?;
    let target = ideal_transfer_target(p, input)?;
    let input_trace = input.norm_sqr();

    let raised = FockArray::from_terms(input.modes(), cutoff, input.terms().map(|(o, c)| (o.clone(), *c)))?;
    let mut rho = raised.to_density()?;
    for i in 0..m {
        let eta = channel.rail_eta(i);
        rho = if channel.nbar > 0.0 {
            apply_thermal_loss(&rho, a + i, eta, channel.nbar)?
        } else {
            apply_pure_loss(&rho, a + i, eta)?
        };
    }
    let omega = build_resource_state(p)?;
    let omega = FockArray::from_terms(m + 1, cutoff.max(omega.cutoff()), omega.terms().map(|(o, c)| (o.clone(), *c)))?;
    rho = rho.tensor(&omega.to_density()?)?;

    let det = channel.detector();
    for r in (1..=m).rev() {
        let i = r - 1;
        let (rail, res) = (a + i, a + r + i);
        if det.is_ideal() {
            // Beamsplitters conserve the pair total; only total k can read (k,0) or (0,k).
            rho = restrict_pair_total(&rho, rail, res, k)?;
        }
        rho = rho.balanced_beamsplitter(rail, res)?;
        let kk = k as u32;
        let high_low =
            rho.measure(&[rail, res], |n| det.transition(n[0] as u32, kk) * det.transition(n[1] as u32, 0))?;
        let low_high =
            rho.measure(&[rail, res], |n| det.transition(n[0] as u32, 0) * det.transition(n[1] as u32, kk))?;
        let out_mode = a + 2 * (r - 1);
        let corrected = low_high.diagonal_unitary(|b| {
            let idx = b[out_mode] as usize;
            match words.get(idx) {
                Some(w) if (kk - w.0[i]) % 2 == 1 => C64::new(-1.0, 0.0),
                _ => C64::new(1.0, 0.0),
            }
        });
        rho = high_low.plus(&corrected)?;
    }

    let success = rho.trace() / input_trace;
    if !(success > 0.0) {
        return Err(domain("the circuit never succeeds for this input and channel"));
    }
    let fidelity = rho.fidelity_pure(&target);
    let purity = rho.purity();
    Ok(PurifyOutcome { success_probability: success, output: rho.normalized()?, fidelity, purity })
}

fn restrict_pair_total(rho: &DensityOperator, i: usize, j: usize, total: u16) -> Result<DensityOperator> {
    let keep: Vec<usize> = (0..rho.dim()).filter(|&x| rho.basis()[x][i] + rho.basis()[x][j] == total).collect();
    let basis: Vec<Occupation> = keep.iter().map(|&x| rho.basis()[x].clone()).collect();
    let matrix = nalgebra::DMatrix::from_fn(keep.len(), keep.len(), |r, c| rho.matrix()[(keep[r], keep[c])]);
    let mut out = DensityOperator::from_parts(rho.modes(), rho.cutoff(), basis, matrix)?;
    out.add_truncation_loss(rho.truncation_loss());
    Ok(out)
}

/// Two-mode action of the beamsplitter-and-detection gadget on code level k:
/// |c⟩|t⟩ ↦ amplitude · |c⟩|c+t⟩.
///
/// The amplitude is √2 · 2^{−(c+t)/2} √C(c+t, c) / √C(k, c). Only k ≤ 2 and
/// c, t ≤ k are covered.
pub fn distorted_csum(control: u16, target: u16, k: u16) -> Result<((u16, u16), f64)> {
    if !(1..=2).contains(&k) || control > k || target > k {
        return Err(Error::Unsupported(format!("distorted CSUM for k={k}, |{control}>|{target}>")));
    }
    let (c, t) = (control as u32, target as u32);
    let amp = 2f64.sqrt() * 2f64.powf(-((c + t) as f64) / 2.0) * (binom(c + t, c) / binom(k as u32, c)).sqrt();
    Ok(((control, control + target), amp))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cp(k: u32, m: u32) -> CodeParams {
        CodeParams::new(k, m).unwrap()
    }

    #[test]
    fn resource_k1_m2() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let om = build_resource_state(cp(1, 2)).unwrap();
        assert_eq!(om.len(), 2);
        assert_relative_eq!(om.amplitude(&[0, 1, 0]).re, h, max_relative = 1e-14);
        assert_relative_eq!(om.amplitude(&[1, 0, 1]).re, h, max_relative = 1e-14);
    }

    #[test]
    fn resource_k2_m2_coefficients() {
        let om = build_resource_state(cp(2, 2)).unwrap();
        assert_relative_eq!(om.norm_sqr(), 1.0, max_relative = 1e-14);
        // Words (2,0),(1,1),(0,2): f² = 1, 1/4, 1.
        let a20 = om.amplitude(&[0, 2, 0]).re;
        let a11 = om.amplitude(&[1, 1, 1]).re;
        let a02 = om.amplitude(&[2, 0, 2]).re;
        assert_relative_eq!(a11 / a20, 0.5, max_relative = 1e-14);
        assert_relative_eq!(a02, a20, max_relative = 1e-14);
        assert_relative_eq!(a20 * a20, 1.0 / 2.25, max_relative = 1e-14);
    }

    #[test]
    fn qubit_success() {
        let p = cp(1, 2);
        let out =
            linear_optics_purify(p, &ChannelModel::pure_loss(0.5).unwrap(), &encode_maximally_entangled(p).unwrap())
                .unwrap();
        assert!((out.success_probability - 0.25).abs() < 1e-12);
        assert!((out.fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn k2_m2_lossless_success() {
        let p = cp(2, 2);
        let out =
            linear_optics_purify(p, &ChannelModel::pure_loss(1.0).unwrap(), &encode_maximally_entangled(p).unwrap())
                .unwrap();
        assert!((out.success_probability - 1.0 / 9.0).abs() < 1e-12);
        assert!((out.fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csum_tables() {
        let r2 = 2f64.sqrt();
        let k1 = [((0, 0), (0, 0), r2), ((0, 1), (0, 1), 1.0), ((1, 0), (1, 1), 1.0), ((1, 1), (1, 2), 1.0)];
        for ((c, t), out, amp) in k1 {
            let (o, a) = distorted_csum(c, t, 1).unwrap();
            assert_eq!(o, out);
            assert_relative_eq!(a, amp, max_relative = 1e-14);
        }
        let s3 = 3f64.sqrt();
        let k2 = [
            ((0, 0), r2),
            ((0, 1), 1.0),
            ((0, 2), 1.0 / r2),
            ((1, 0), 1.0 / r2),
            ((1, 1), 1.0 / r2),
            ((1, 2), s3 / (2.0 * r2)),
            ((2, 0), 1.0 / r2),
            ((2, 1), s3 / 2.0),
            ((2, 2), s3 / 2.0),
        ];
        for ((c, t), amp) in k2 {
            let (o, a) = distorted_csum(c, t, 2).unwrap();
            assert_eq!(o, (c, c + t));
            assert_relative_eq!(a, amp, max_relative = 1e-14);
        }
        assert!(matches!(distorted_csum(3, 0, 3), Err(Error::Unsupported(_))));
        assert!(matches!(distorted_csum(2, 0, 1), Err(Error::Unsupported(_))));
    }
}
