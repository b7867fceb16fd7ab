use super::channels::apply_pure_loss;
use super::density::DensityOperator;
use super::state::{FockArray, Occupation};
use super::{MeasurementRecord, C64};
use crate::combinatorics::{binomial, enumerate_codewords, CodeParams, SqueezingSpec};
use crate::error::{domain, Error, Result};
use num_traits::ToPrimitive;

/// Two-mode squeezed vacuum √(1−χ²) Σ χⁿ |n,n⟩ up to `cutoff`; the dropped
/// weight χ^{2(cutoff+1)} is recorded as tail weight.
pub fn make_tmsv(s: SqueezingSpec, cutoff: u16) -> Result<FockArray> {
    if cutoff < 1 {
        return Err(domain("cutoff must be at least 1"));
    }
    let chi = s.chi();
    let norm = (1.0 - chi * chi).sqrt();
    let mut terms = Vec::new();
    for n in 0..=cutoff {
        let a = norm * chi.powi(n as i32);
        if a != 0.0 {
            terms.push((vec![n, n], C64::new(a, 0.0)));
        }
    }
    let tail = (chi * chi).powi(cutoff as i32 + 1);
    Ok(FockArray::from_terms(2, cutoff, terms)?.with_tail_weight(tail))
}

/// m TMSV copies ordered as Alice's m modes followed by Bob's m modes.
pub fn tmsv_product(s: SqueezingSpec, m: usize, cutoff: u16) -> Result<FockArray> {
    let one = make_tmsv(s, cutoff)?;
    let mut acc = FockArray::vacuum(0, cutoff);
    for _ in 0..m {
        acc = acc.tensor(&one);
    }
    // Interleaved (A1,B1,A2,B2,…) to (A…, B…).
    let order: Vec<usize> = (0..m).map(|i| 2 * i).chain((0..m).map(|i| 2 * i + 1)).collect();
    acc.permuted(&order)
}

/// QND measurement of total photon number over `modes` on a pure state.
pub fn qnd_total_number(state: &FockArray, modes: &[usize]) -> Result<Vec<MeasurementRecord<FockArray>>> {
    if modes.is_empty() {
        return Err(domain("QND needs at least one mode"));
    }
    let mut out = Vec::new();
    for total in state.totals(modes) {
        let post = state.project_total(modes, total)?;
        let p = post.norm_sqr();
        out.push(MeasurementRecord { outcome: total, probability: p, post_state: post.normalized()? });
    }
    Ok(out)
}

/// QND measurement of total photon number over `modes` on a mixed state.
pub fn qnd_total_number_mixed(
    rho: &DensityOperator,
    modes: &[usize],
) -> Result<Vec<MeasurementRecord<DensityOperator>>> {
    if modes.is_empty() {
        return Err(domain("QND needs at least one mode"));
    }
    let mut totals: Vec<u32> = rho.basis().iter().map(|b| modes.iter().map(|&m| b[m] as u32).sum()).collect();
    totals.sort_unstable();
    totals.dedup();
    let mut out = Vec::new();
    for total in totals {
        let post = rho.project_total(modes, total)?;
        let p = post.trace();
        if p > 0.0 {
            out.push(MeasurementRecord { outcome: total, probability: p, post_state: post.normalized()? });
        }
    }
    Ok(out)
}

fn binom(n: u32, k: u32) -> f64 {
    binomial(n as u64, k as u64).to_f64().unwrap_or(f64::INFINITY)
}

/// Loss patterns l ≤ n with Σl = lost.
fn loss_patterns(n: &[u32], lost: u32) -> Vec<Vec<u32>> {
    fn go(n: &[u32], i: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if i == n.len() {
            if left == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for l in 0..=n[i].min(left) {
            cur.push(l);
            go(n, i + 1, left - l, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(n, 0, lost, &mut Vec::new(), &mut out);
    out
}

/// The tripartite Alice–Bob–environment state heralded by outcomes k1, j1,
/// written down directly as a double constrained sum.
///
/// With `alice = None` Alice's outcome is prepared offline and the squared
/// norm is P_bob; otherwise it is P_alice·P_bob.
pub fn heralded_state_direct(k1: u32, j1: u32, m: u32, eta: f64, alice: Option<SqueezingSpec>) -> Result<FockArray> {
    if j1 > k1 {
        return Err(domain(format!("j1={j1} exceeds k1={k1}")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(domain(format!("transmissivity {eta} outside [0,1]")));
    }
    let p = CodeParams::new(k1, m)?;
    let words = enumerate_codewords(p)?;
    let pre_alice = match alice {
        None => 1.0 / (words.len() as f64).sqrt(),
        Some(s) => (1.0 - s.chi() * s.chi()).powf(m as f64 / 2.0) * s.chi().powi(k1 as i32),
    };
    let lost = k1 - j1;
    let pre = pre_alice * (1.0 - eta).powf(lost as f64 / 2.0) * eta.powf(j1 as f64 / 2.0);
    let m = m as usize;
    let mut out = FockArray::zero(3 * m, k1.max(1) as u16);
    for w in &words {
        for l in loss_patterns(&w.0, lost) {
            let weight: f64 = w.0.iter().zip(&l).map(|(&n, &li)| binom(n, li)).product();
            let mut occ: Occupation = w.0.iter().map(|&n| n as u16).collect();
            occ.extend(w.0.iter().zip(&l).map(|(&n, &li)| (n - li) as u16));
            occ.extend(l.iter().map(|&li| li as u16));
            out.add(occ, C64::new(pre * weight.sqrt(), 0.0))?;
        }
    }
    Ok(out)
}

/// The same heralded state produced by simulation: m TMSV copies (or the
/// offline code state), beamsplitter dilation of every Bob rail with a vacuum
/// environment mode, then QND projections by Alice (k1) and Bob (j1).
pub fn heralded_state_channel_sim(
    k1: u32,
    j1: u32,
    m: u32,
    eta: f64,
    alice: Option<SqueezingSpec>,
    cutoff: u16,
) -> Result<FockArray> {
    let mu = m as usize;
    let a_modes: Vec<usize> = (0..mu).collect();
    let b_modes: Vec<usize> = (mu..2 * mu).collect();
    let shared = match alice {
        Some(s) => {
            let state = tmsv_product(s, mu, cutoff)?;
            if (k1 as usize) > cutoff as usize {
                return Err(Error::Truncation { lost: 1.0, cutoff: cutoff as usize, tolerance: 0.0 });
            }
            state
        }
        None => super::circuit::encode_maximally_entangled(CodeParams::new(k1, m)?)?,
    };
    let mut state = shared.with_vacuum_modes(mu);
    for i in 0..mu {
        state = state.loss_dilation(mu + i, 2 * mu + i, eta)?;
    }
    let state = state.project_total(&a_modes, k1)?;
    state.project_total(&b_modes, j1)
}

/// Alice–Bob density operator for outcomes (k1, j1) via Kraus pure loss.
///
/// Alice's QND acts on her modes only, so it is applied before the channel;
/// the environment never appears explicitly.
pub fn heralded_ab_density(k1: u32, j1: u32, m: u32, eta: f64) -> Result<DensityOperator> {
    let mu = m as usize;
    let code = super::circuit::encode_maximally_entangled(CodeParams::new(k1, m)?)?;
    let mut rho = code.to_density()?;
    for i in 0..mu {
        rho = apply_pure_loss(&rho, mu + i, eta)?;
    }
    let b_modes: Vec<usize> = (mu..2 * mu).collect();
    rho.project_total(&b_modes, j1)
}

/// Reverse coherent information S(ρ_A) − S(ρ_AB), with A given by `a_modes`.
pub fn rci_numeric(rho: &DensityOperator, a_modes: &[usize]) -> Result<f64> {
    let t = rho.trace();
    if !(t > 0.0) {
        return Err(domain("RCI of a zero operator"));
    }
    let min_ev = rho.eigenvalues().last().copied().unwrap_or(0.0) / t;
    if min_ev < -1e-10 {
        return Err(Error::NumericalHealth(format!("negative eigenvalue {min_ev:.3e}")));
    }
    let rho_a = rho.partial_trace(a_modes)?;
    Ok(rho_a.entropy()? - rho.entropy()?)
}

/// Rate of the iterative protocol by direct simulation of states.
///
/// Alice's offline code state crosses the channel through beamsplitter
/// dilations; Bob's QND, and in later rounds both parties' QND on the first
/// m−n+1 rails, are applied as projections. Each success contributes its
/// probability times the numerically computed entanglement entropy of
/// Alice's measured rails.
pub fn brute_force_iterative_rate(k1: u32, m: u32, eta: f64) -> Result<f64> {
    if k1 < 1 || m < 2 {
        return Err(domain("iteration needs k1 >= 1 and m >= 2"));
    }
    let mu = m as usize;
    let code = super::circuit::encode_maximally_entangled(CodeParams::new(k1, m)?)?;
    let mut state = code.with_vacuum_modes(mu);
    for i in 0..mu {
        state = state.loss_dilation(mu + i, 2 * mu + i, eta)?;
    }
    let b_all: Vec<usize> = (mu..2 * mu).collect();
    let mut total = 0.0;
    for rec in qnd_total_number(&state, &b_all)? {
        let branch = state.project_total(&b_all, rec.outcome)?;
        total += round(&branch, k1, rec.outcome, 1, mu)?;
    }
    Ok(total / m as f64)
}

/// Contribution (probability × entanglement) of all continuations of an
/// unnormalized branch after round `n` with outcomes (k, j).
fn round(branch: &FockArray, k: u32, j: u32, n: usize, m: usize) -> Result<f64> {
    let p = branch.norm_sqr();
    if p == 0.0 {
        return Ok(0.0);
    }
    let rails = m - n + 1;
    if k == j {
        let a: Vec<usize> = (0..rails).collect();
        return Ok(p * branch.entanglement_entropy(&a)?);
    }
    if n >= m - 1 {
        return Ok(0.0);
    }
    let next = rails - 1;
    let a: Vec<usize> = (0..next).collect();
    let b: Vec<usize> = (m..m + next).collect();
    let mut acc = 0.0;
    for ka in branch.totals(&a) {
        let pa = branch.project_total(&a, ka)?;
        for jb in pa.totals(&b) {
            let pb = pa.project_total(&b, jb)?;
            acc += round(&pb, ka, jb, n + 1, m)?;
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorics::{herald_prob_alice, herald_prob_bob, tmsv_entropy};
    use approx::assert_relative_eq;

    #[test]
    fn tmsv_basics() {
        let vac = make_tmsv(SqueezingSpec::new(0.0).unwrap(), 3).unwrap();
        assert_eq!(vac.len(), 1);
        assert_relative_eq!(vac.amplitude(&[0, 0]).re, 1.0);
        let s = SqueezingSpec::new(0.6).unwrap();
        let t = make_tmsv(s, 20).unwrap();
        assert!(1.0 - t.norm_sqr() < 1e-8);
        assert_relative_eq!(1.0 - t.norm_sqr(), t.tail_weight(), max_relative = 1e-6);
        assert!(t.check_truncation(1e-8).is_ok());
        assert!(make_tmsv(s, 2).unwrap().check_truncation(1e-8).is_err());
    }

    #[test]
    fn tmsv_entropy_matches_formula() {
        let s = SqueezingSpec::new(0.5).unwrap();
        let t = make_tmsv(s, 40).unwrap();
        assert!((t.entanglement_entropy(&[0]).unwrap() - tmsv_entropy(s)).abs() < 1e-6);
    }

    #[test]
    fn qnd_statistics() {
        let s = SqueezingSpec::new(0.5).unwrap();
        let st = tmsv_product(s, 2, 12).unwrap();
        let recs = qnd_total_number(&st, &[0, 1]).unwrap();
        let total: f64 = recs.iter().map(|r| r.probability).sum();
        assert!((total - st.norm_sqr()).abs() < 1e-12);
        for r in recs.iter().filter(|r| r.outcome <= 6) {
            let p = herald_prob_alice(CodeParams::new(r.outcome, 2).unwrap(), s);
            assert!((r.probability - p).abs() < 1e-10);
        }
        let two = FockArray::basis(vec![2, 0], 2).unwrap();
        let r = qnd_total_number(&two, &[0, 1]).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].outcome, 2);
        assert_relative_eq!(r[0].probability, 1.0);
        assert!(qnd_total_number(&two, &[]).is_err());
    }

    #[test]
    fn direct_state_norm() {
        let s = SqueezingSpec::new(0.4).unwrap();
        let st = heralded_state_direct(3, 1, 2, 0.6, Some(s)).unwrap();
        let expect = herald_prob_alice(CodeParams::new(3, 2).unwrap(), s) * herald_prob_bob(3, 1, 0.6).unwrap();
        assert_relative_eq!(st.norm_sqr(), expect, max_relative = 1e-12);
        let off = heralded_state_direct(3, 1, 2, 0.6, None).unwrap();
        assert_relative_eq!(off.norm_sqr(), herald_prob_bob(3, 1, 0.6).unwrap(), max_relative = 1e-12);
        assert!(heralded_state_direct(1, 2, 2, 0.5, None).is_err());
    }

    #[test]
    fn heralded_rci_example() {
        let rho = heralded_state_direct(2, 1, 3, 0.5, None).unwrap().reduced(&[0, 1, 2, 3, 4, 5]).unwrap();
        assert!((rci_numeric(&rho, &[0, 1, 2]).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn brute_force_single_round() {
        // m = 2 allows one round: η^k log2 d / m.
        let r = brute_force_iterative_rate(2, 2, 0.5).unwrap();
        assert!((r - 0.25 * 3f64.log2() / 2.0).abs() < 1e-12);
    }
}
