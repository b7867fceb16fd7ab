//! Analytic rates: PLOB capacity, heralded-state RCI, single-shot and
//! finite-m iterative purification, entanglement ratios and repeater chains.
//!
//! Rates are in ebits per channel use. Alice's first QND outcome is taken as
//! prepared offline unless a function says otherwise.

use num_traits::ToPrimitive;

use crate::combinatorics::{
    binomial, herald_prob_alice, herald_prob_bob, log2_binomial, tmsv_entropy, CodeParams, SqueezingSpec,
};
use crate::error::{domain, Error, Result};

/// Two-way assisted capacity. η = 1 is reported as `Infinite`, never as a float.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Capacity {
    Finite(f64),
    Infinite,
}

impl Capacity {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Capacity::Finite(c) => Some(*c),
            Capacity::Infinite => None,
        }
    }

    /// rate / capacity, or 0 when the capacity is infinite or zero.
    pub fn ratio(&self, rate: f64) -> f64 {
        match self {
            Capacity::Finite(c) if *c > 0.0 => rate / c,
            _ => 0.0,
        }
    }

    pub fn dominates(&self, rate: f64) -> bool {
        match self {
            Capacity::Finite(c) => rate <= *c * (1.0 + 1e-12) + 1e-300,
            Capacity::Infinite => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateResult {
    pub rate: f64,
    pub probability: f64,
    pub entanglement: f64,
    pub capacity: Capacity,
    pub ratio: f64,
}

impl RateResult {
    pub fn new(rate: f64, probability: f64, entanglement: f64, capacity: Capacity) -> Self {
        RateResult { rate, probability, entanglement, capacity, ratio: capacity.ratio(rate) }
    }
}

/// A fibre link, with η = 10^(−loss·distance/10).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub distance_km: f64,
    pub loss_db_per_km: f64,
}

impl LinkSpec {
    pub const DEFAULT_LOSS_DB_PER_KM: f64 = 0.2;

    pub fn new(distance_km: f64, loss_db_per_km: f64) -> Result<Self> {
        if !(distance_km >= 0.0) || !distance_km.is_finite() {
            return Err(domain(format!("distance {distance_km} km must be finite and nonnegative")));
        }
        if !(loss_db_per_km > 0.0) || !loss_db_per_km.is_finite() {
            return Err(domain(format!("loss {loss_db_per_km} dB/km must be positive")));
        }
        Ok(LinkSpec { distance_km, loss_db_per_km })
    }

    pub fn fibre(distance_km: f64) -> Result<Self> {
        Self::new(distance_km, Self::DEFAULT_LOSS_DB_PER_KM)
    }

    pub fn eta(&self) -> f64 {
        10f64.powf(-self.loss_db_per_km * self.distance_km / 10.0)
    }

    pub fn split(&self, links: u32) -> Result<LinkSpec> {
        if links == 0 {
            return Err(domain("a chain needs at least one link"));
        }
        LinkSpec::new(self.distance_km / links as f64, self.loss_db_per_km)
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(domain(format!("transmissivity {eta} outside [0,1]")));
    }
    Ok(())
}

/// C = −log2(1−η).
pub fn plob_capacity(eta: f64) -> Result<Capacity> {
    check_eta(eta)?;
    if eta == 1.0 {
        return Ok(Capacity::Infinite);
    }
    Ok(Capacity::Finite(-(-eta).ln_1p() / std::f64::consts::LN_2))
}

/// RCI of the state heralded by Alice reading k and Bob reading j:
/// log2[C(k+m−1, k) / C(k−j+m−1, k−j)].
pub fn rci_heralded(k: u32, j: u32, m: u32) -> Result<f64> {
    if j > k {
        return Err(domain(format!("j={j} exceeds k={k}")));
    }
    if m == 0 {
        return Err(domain("m must be positive"));
    }
    let (k, j, m) = (k as u64, j as u64, m as u64);
    Ok(log2_binomial(k + m - 1, k) - log2_binomial(k - j + m - 1, k - j))
}

/// Post-select j = k after one round: rate η^k log2(d) / m.
pub fn single_shot_rate(p: CodeParams, eta: f64) -> Result<RateResult> {
    let capacity = plob_capacity(eta)?;
    let probability = herald_prob_bob(p.k, p.k, eta)?;
    let entanglement = log2_binomial(p.k as u64 + p.m as u64 - 1, p.k as u64);
    let rate = probability * entanglement / p.m as f64;
    Ok(RateResult::new(rate, probability, entanglement, capacity))
}

/// Exhaustive argmax over 1 ≤ k ≤ k_max, 2 ≤ m ≤ m_max. Ties keep the smaller k, then m.
pub fn optimize_single_shot(eta: f64, k_max: u32, m_max: u32) -> Result<(CodeParams, RateResult)> {
    check_eta(eta)?;
    if k_max < 1 || m_max < 2 {
        return Err(domain("need k_max >= 1 and m_max >= 2"));
    }
    let mut best = (CodeParams { k: 1, m: 2 }, f64::NEG_INFINITY);
    for k in 1..=k_max {
        let pk = herald_prob_bob(k, k, eta)?;
        for m in 2..=m_max {
            let r = pk * log2_binomial(k as u64 + m as u64 - 1, k as u64) / m as f64;
            if r > best.1 {
                best = (CodeParams { k, m }, r);
            }
        }
    }
    let p = best.0;
    Ok((p, single_shot_rate(p, eta)?))
}

/// A sequence of (Alice, Bob) outcomes over iteration rounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundOutcome {
    pub rounds: Vec<(u32, u32)>,
}

impl RoundOutcome {
    /// Checks ordering and the failure/success pattern. A final round with
    /// k = j is a success; otherwise the sequence is open.
    pub fn is_consistent(&self) -> bool {
        let r = &self.rounds;
        if r.is_empty() || r.iter().any(|&(k, j)| j > k) {
            return false;
        }
        for w in r.windows(2) {
            let ((k0, j0), (k1, j1)) = (w[0], w[1]);
            if k1 > k0 || j1 > j0 || k0 - k1 < j0 - j1 || k0 == j0 {
                return false;
            }
        }
        true
    }

    pub fn is_success(&self) -> bool {
        self.is_consistent() && self.rounds.last().is_some_and(|&(k, j)| k == j)
    }

    /// Joint probability of the whole sequence with Alice's k1 given.
    pub fn probability(&self, m: u32, eta: f64) -> Result<f64> {
        if !self.is_consistent() {
            return Err(domain("inconsistent round outcome"));
        }
        let n = self.rounds.len() as u64;
        if n > m as u64 {
            return Err(domain("more rounds than rails"));
        }
        let (k1, j1) = self.rounds[0];
        let (kn, jn) = *self.rounds.last().unwrap();
        let m = m as u64;
        let mut log2p = log2_binomial(kn as u64 + m - n, kn as u64) + log2_binomial(kn as u64, jn as u64)
            - log2_binomial(k1 as u64 + m - 1, k1 as u64);
        for w in self.rounds.windows(2) {
            let ((ka, ja), (kb, jb)) = (w[0], w[1]);
            log2p += log2_binomial((ka - kb) as u64, (ja - jb) as u64);
        }
        let loss = if k1 == j1 { 1.0 } else { (1.0 - eta).powi((k1 - j1) as i32) };
        Ok(loss * eta.powi(j1 as i32) * log2p.exp2())
    }

    /// Entanglement of the pure state left on success, log2 C(k_n+m−n, k_n).
    pub fn entanglement(&self, m: u32) -> f64 {
        let n = self.rounds.len() as u64;
        let kn = self.rounds.last().map_or(0, |r| r.0) as u64;
        log2_binomial(kn + m as u64 - n, kn)
    }
}

pub const DEFAULT_OUTCOME_CAP: u64 = 10_000_000;

/// Depth-first list of every successful outcome sequence with at most m−1 rounds.
pub fn enumerate_round_outcomes(k1: u32, m: u32, cap: u64) -> Result<Vec<RoundOutcome>> {
    if m < 2 {
        return Err(domain("iteration needs m >= 2"));
    }
    let mut out = Vec::new();
    let mut visited = 0u64;
    let mut path = Vec::new();
    for j1 in 0..=k1 {
        path.push((k1, j1));
        walk(&mut path, m, cap, &mut visited, &mut out)?;
        path.pop();
    }
    Ok(out)
}

fn walk(path: &mut Vec<(u32, u32)>, m: u32, cap: u64, visited: &mut u64, out: &mut Vec<RoundOutcome>) -> Result<()> {
    *visited += 1;
    if *visited > cap {
        return Err(Error::SizeCap { what: "round-outcome enumeration", size: *visited as u128, cap: cap as u128 });
    }
    let (k, j) = *path.last().unwrap();
    if k == j {
        out.push(RoundOutcome { rounds: path.clone() });
        return Ok(());
    }
    if path.len() as u32 >= m - 1 {
        return Ok(());
    }
    for kn in 0..=k {
        let lo = j.saturating_sub(k - kn);
        for jn in lo..=j.min(kn) {
            path.push((kn, jn));
            walk(path, m, cap, visited, out)?;
            path.pop();
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeRate {
    pub result: RateResult,
    /// S_n: contribution of successes at round n to the rate, already divided by m.
    pub per_round: Vec<f64>,
    pub success_probability: f64,
    /// Probability mass still impure after round m−1.
    pub residual_failure: f64,
}

/// Work units (state transitions) allowed in [`iterative_rate`].
pub const DEFAULT_TRANSITION_CAP: u64 = 200_000_000;

/// Finite-m iterative rate, summing P·E over all outcome sequences up to m−1 rounds.
///
/// Sequences sharing a failed state (k_n, j_n) share their future, so the sum
/// is propagated forward round by round over that state space.
pub fn iterative_rate(k1: u32, m: u32, eta: f64) -> Result<IterativeRate> {
    iterative_rate_capped(k1, m, eta, DEFAULT_TRANSITION_CAP)
}

pub fn iterative_rate_capped(k1: u32, m: u32, eta: f64, cap: u64) -> Result<IterativeRate> {
    check_eta(eta)?;
    if k1 < 1 || m < 2 {
        return Err(domain("iteration needs k1 >= 1 and m >= 2"));
    }
    let capacity = plob_capacity(eta)?;
    let rounds = (m - 1) as usize;
    let mut per_round = vec![0.0; rounds];
    let mut success = 0.0;
    let mut work = 0u64;

    // mass[k][j] for the open states after the current round.
    let side = k1 as usize + 1;
    let mut mass = vec![0.0f64; side * side];
    let entangle1 = log2_binomial(k1 as u64 + m as u64 - 1, k1 as u64);
    for j1 in 0..=k1 {
        let p = herald_prob_bob(k1, j1, eta)?;
        if j1 == k1 {
            per_round[0] += p * entangle1;
            success += p;
        } else {
            mass[k1 as usize * side + j1 as usize] = p;
        }
    }

    for n in 2..=rounds as u64 {
        let mut next = vec![0.0f64; side * side];
        let m = m as u64;
        for kp in 0..side {
            for jp in 0..kp {
                let w = mass[kp * side + jp];
                if w == 0.0 {
                    continue;
                }
                let denom = log2_binomial(kp as u64 + m - n + 1, kp as u64) + log2_binomial(kp as u64, jp as u64);
                for kn in 0..=kp {
                    let dk = log2_binomial(kn as u64 + m - n, kn as u64);
                    let lo = jp.saturating_sub(kp - kn);
                    for jn in lo..=jp.min(kn) {
                        work += 1;
                        if work > cap {
                            return Err(Error::SizeCap {
                                what: "iterative-rate transitions",
                                size: work as u128,
                                cap: cap as u128,
                            });
                        }
                        let l = dk
                            + log2_binomial(kn as u64, jn as u64)
                            + log2_binomial((kp - kn) as u64, (jp - jn) as u64)
                            - denom;
                        let p = w * l.exp2();
                        if kn == jn {
                            per_round[n as usize - 1] += p * dk;
                            success += p;
                        } else {
                            next[kn * side + jn] += p;
                        }
                    }
                }
            }
        }
        mass = next;
    }

    let residual_failure: f64 = mass.iter().sum();
    let m_f = m as f64;
    let total: f64 = per_round.iter().sum();
    for s in per_round.iter_mut() {
        *s /= m_f;
    }
    let rate = total / m_f;
    let entanglement = if success > 0.0 { total / success } else { 0.0 };
    Ok(IterativeRate {
        result: RateResult::new(rate, success, entanglement, capacity),
        per_round,
        success_probability: success,
        residual_failure,
    })
}

/// Round-one average pure-state rate S1 and mixed-state RCI rate F1, per use.
pub fn avg_rci_round1(k1: u32, m: u32, eta: f64) -> Result<(f64, f64)> {
    check_eta(eta)?;
    if m == 0 {
        return Err(domain("m must be positive"));
    }
    let m_f = m as f64;
    let s1 = herald_prob_bob(k1, k1, eta)? * rci_heralded(k1, k1, m)? / m_f;
    let mut f1 = 0.0;
    for j in 0..k1 {
        f1 += herald_prob_bob(k1, j, eta)? * rci_heralded(k1, j, m)?;
    }
    Ok((s1, f1 / m_f))
}

const SERIES_REL_TOL: f64 = 1e-12;
const SERIES_MAX_TERMS: u32 = 50_000_000;

/// Sums Σ_k P_alice(k)·f(k) until a geometric tail bound drops below
/// `SERIES_REL_TOL` of the partial sum.
fn alice_weighted_series(s: SqueezingSpec, m: u32, mut f: impl FnMut(u32) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    let mut prev = 0.0;
    for k in 0..SERIES_MAX_TERMS {
        let term = herald_prob_alice(CodeParams { k, m }, s) * f(k)?;
        total += term;
        if k > 0 && term > 0.0 && prev > 0.0 {
            let r = term / prev;
            // Past the mode the term ratio decreases monotonically toward χ².
            let past_mode = (k as f64) > (m as f64) / (1.0 - s.chi() * s.chi());
            if r < 1.0 && past_mode && term * r / (1.0 - r) < SERIES_REL_TOL * total {
                return Ok(total);
            }
        } else if k > 0 && term == 0.0 && prev == 0.0 && total > 0.0 {
            return Ok(total);
        }
        prev = term;
    }
    Err(Error::Convergence(format!("series in chi={} did not converge", s.chi())))
}

/// Round-one S1 and F1 with Alice's outcome weighted by P_alice instead of fixed.
pub fn avg_rci_round1_squeezed(s: SqueezingSpec, m: u32, eta: f64) -> Result<(f64, f64)> {
    let s1 = alice_weighted_series(s, m, |k| Ok(avg_rci_round1(k, m, eta)?.0))?;
    let f1 = alice_weighted_series(s, m, |k| Ok(avg_rci_round1(k, m, eta)?.1))?;
    Ok((s1, f1))
}

/// Γ1 = Σ_k P_alice(k)·log2 d_{k,m} / (m·E_χ).
pub fn entanglement_ratio_round1(s: SqueezingSpec, m: u32) -> Result<f64> {
    if s.chi() <= 0.0 {
        return Err(domain("entanglement ratio needs chi > 0"));
    }
    if m == 0 {
        return Err(domain("m must be positive"));
    }
    let num = alice_weighted_series(s, m, |k| Ok(log2_binomial(k as u64 + m as u64 - 1, k as u64)))?;
    Ok(num / (m as f64 * tmsv_entropy(s)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundRatio {
    pub value: f64,
    /// Set when the previous round carried no entanglement (denominator zero).
    pub degenerate: bool,
}

/// Γ for round n ≥ 2, tracking entanglement kept when re-encoding onto fewer rails.
pub fn entanglement_ratio_round_n(k_prev: u32, m: u32, n: u32) -> Result<RoundRatio> {
    if n < 2 || n > m {
        return Err(domain(format!("round n={n} must lie in [2, m={m}]")));
    }
    let (kp, m, n) = (k_prev as u64, m as u64, n as u64);
    let log_prev = log2_binomial(kp + m - n + 1, kp);
    if log_prev == 0.0 {
        return Ok(RoundRatio { value: 0.0, degenerate: true });
    }
    let mut acc = 0.0;
    for kn in 0..=kp {
        let l = log2_binomial(kn + m - n, kn);
        acc += (l - log_prev).exp2() * (l / log_prev);
    }
    Ok(RoundRatio { value: acc, degenerate: false })
}

fn big_f64(x: &num_bigint::BigUint) -> f64 {
    x.to_f64().unwrap_or(f64::INFINITY)
}

/// Both sides of the round-n entanglement balance; lhs ≤ rhs means no entanglement is gained.
pub fn round_balance_check(k_prev: u32, j_prev: u32, n: u32, m: u32) -> Result<(f64, f64)> {
    if !(1 <= j_prev && j_prev < k_prev) {
        return Err(domain("need 1 <= j_prev < k_prev"));
    }
    if n < 2 || n > m {
        return Err(domain(format!("round n={n} must lie in [2, m={m}]")));
    }
    let (kp, jp, m, n) = (k_prev as u64, j_prev as u64, m as u64, n as u64);
    let mut lhs = 0.0;
    for kn in 0..=kp {
        let d = binomial(kn + m - n, kn);
        for jn in 0..=kn.min(jp) {
            if kp - kn < jp - jn {
                continue;
            }
            let w = &d * binomial(kn, jn) * binomial(kp - kn, jp - jn);
            let rci = log2_binomial(kn + m - n, kn) - log2_binomial(kn - jn + m - n, kn - jn);
            lhs += big_f64(&w) * rci;
        }
    }
    let d = binomial(kp + m - n + 1, kp);
    let rhs = big_f64(&(&d * binomial(kp, jp)))
        * (log2_binomial(kp + m - n + 1, kp) - log2_binomial(kp - jp + m - n + 1, kp - jp));
    Ok((lhs, rhs))
}

/// Equidistant chain of `links` single-shot links joined by ideal swapping,
/// compared with the repeaterless bound over the whole distance.
pub fn repeater_chain_rate(total: LinkSpec, links: u32, p: CodeParams) -> Result<RateResult> {
    let link = total.split(links)?;
    let per_link = single_shot_rate(p, link.eta())?;
    let capacity = plob_capacity(total.eta())?;
    Ok(RateResult::new(per_link.rate, per_link.probability, per_link.entanglement, capacity))
}

/// Chain rate with (k, m) optimized for the per-link transmissivity.
pub fn optimize_repeater_chain(
    total: LinkSpec,
    links: u32,
    k_max: u32,
    m_max: u32,
) -> Result<(CodeParams, RateResult)> {
    let link = total.split(links)?;
    let (p, _) = optimize_single_shot(link.eta(), k_max, m_max)?;
    Ok((p, repeater_chain_rate(total, links, p)?))
}

/// Smallest distance in [lo, hi] km where the optimized chain beats the
/// repeaterless bound, located by a scan of `step` km then bisection.
pub fn crossover_distance(
    links: u32,
    loss_db_per_km: f64,
    k_max: u32,
    m_max: u32,
    (lo, hi): (f64, f64),
    step: f64,
) -> Result<Option<f64>> {
    if !(step > 0.0) || !(hi > lo) || lo < 0.0 {
        return Err(domain("crossover scan needs 0 <= lo < hi and step > 0"));
    }
    let beats = |d: f64| -> Result<bool> {
        let total = LinkSpec::new(d, loss_db_per_km)?;
        let (_, r) = optimize_repeater_chain(total, links, k_max, m_max)?;
        Ok(match r.capacity {
            Capacity::Finite(c) => r.rate > c,
            Capacity::Infinite => false,
        })
    };
    let mut prev = lo;
    if beats(lo)? {
        return Ok(Some(lo));
    }
    let steps = ((hi - lo) / step).ceil() as u64;
    for i in 1..=steps {
        let d = (lo + i as f64 * step).min(hi);
        if beats(d)? {
            let (mut a, mut b) = (prev, d);
            while b - a > 1e-9 {
                let mid = 0.5 * (a + b);
                if beats(mid)? {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            return Ok(Some(b));
        }
        prev = d;
    }
    Ok(None)
}

/// Fraction of each round's rate assumed to succeed in [`iteration_capacity_series`].
pub const DEFAULT_SUCCESS_SHARE: f64 = 0.5;

/// The large-m recurrence S_n + F_n = (m−1)/m · F_{n−1} with S_1 + F_1 = (m−1)/m · C.
///
/// Each round's total T_n splits as S_n = σ·T_n, F_n = (1−σ)·T_n; the last
/// round (n = m) keeps everything, F_m = 0.
pub fn iteration_capacity_series(m: u32, eta: f64) -> Result<Vec<(f64, f64)>> {
    iteration_capacity_series_with_share(m, eta, DEFAULT_SUCCESS_SHARE)
}

pub fn iteration_capacity_series_with_share(m: u32, eta: f64, share: f64) -> Result<Vec<(f64, f64)>> {
    if m < 2 {
        return Err(domain("iteration needs m >= 2"));
    }
    if !(0.0..=1.0).contains(&share) {
        return Err(domain("success share must lie in [0,1]"));
    }
    let c = plob_capacity(eta)?.finite().ok_or_else(|| domain("the recurrence is undefined at eta = 1"))?;
    let keep = (m as f64 - 1.0) / m as f64;
    let mut out = Vec::with_capacity(m as usize);
    let mut t = keep * c;
    for n in 1..=m {
        let (s, f) = if n == m { (t, 0.0) } else { (share * t, (1.0 - share) * t) };
        out.push((s, f));
        t = keep * f;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cp(k: u32, m: u32) -> CodeParams {
        CodeParams::new(k, m).unwrap()
    }

    #[test]
    fn plob_values() {
        assert_eq!(plob_capacity(0.5).unwrap(), Capacity::Finite(1.0));
        assert_eq!(plob_capacity(0.0).unwrap(), Capacity::Finite(0.0));
        assert_eq!(plob_capacity(1.0).unwrap(), Capacity::Infinite);
        assert!(plob_capacity(1.5).is_err());
        assert!(plob_capacity(-0.1).is_err());
        let eta = LinkSpec::fibre(50.0).unwrap().eta();
        assert_relative_eq!(eta, 0.1, max_relative = 1e-14);
        let c = plob_capacity(eta).unwrap().finite().unwrap();
        assert_relative_eq!(c, -(0.9f64).log2(), max_relative = 1e-13);
        assert!((c - 0.1520).abs() < 1e-4);
        assert_eq!(Capacity::Infinite.ratio(3.0), 0.0);
    }

    #[test]
    fn link_domain() {
        assert!(LinkSpec::fibre(-1.0).is_err());
        assert!(LinkSpec::new(1.0, 0.0).is_err());
        assert_eq!(LinkSpec::fibre(0.0).unwrap().eta(), 1.0);
        assert!(LinkSpec::fibre(10.0).unwrap().split(0).is_err());
    }

    #[test]
    fn rci_values() {
        for (k, m) in [(3, 2), (4, 5), (2, 3)] {
            assert_relative_eq!(
                rci_heralded(k, k, m).unwrap(),
                log2_binomial((k + m - 1) as u64, k as u64),
                max_relative = 1e-14
            );
            assert_eq!(rci_heralded(k, 0, m).unwrap(), 0.0);
        }
        assert_relative_eq!(rci_heralded(2, 1, 3).unwrap(), 1.0, max_relative = 1e-14);
        assert!(rci_heralded(1, 2, 3).is_err());
    }

    #[test]
    fn single_shot_values() {
        for eta in [0.1, 0.5, 0.9] {
            assert_relative_eq!(single_shot_rate(cp(1, 2), eta).unwrap().rate, eta / 2.0, max_relative = 1e-15);
        }
        let r = single_shot_rate(cp(4, 5), 1.0).unwrap();
        assert_relative_eq!(r.rate, 70f64.log2() / 5.0, max_relative = 1e-14);
        assert!((r.rate - 1.22586).abs() < 1e-5);
        assert_eq!(r.capacity, Capacity::Infinite);
        assert_eq!(r.ratio, 0.0);
        assert_eq!(single_shot_rate(cp(0, 4), 0.7).unwrap().rate, 0.0);
    }

    #[test]
    fn optimizer_long_distance() {
        let (p, r) = optimize_single_shot(0.01, 30, 20).unwrap();
        assert_eq!((p.k, p.m), (1, 3));
        assert!((r.ratio - 3f64.ln() / 3.0).abs() < 0.005);
        assert!(optimize_single_shot(0.5, 0, 3).is_err());
        assert!(optimize_single_shot(0.5, 3, 1).is_err());
    }

    #[test]
    fn optimizer_short_distance_tends_to_half() {
        // Ratio climbs toward 1/2 as η → 1, with larger codes.
        let near = optimize_single_shot(LinkSpec::fibre(0.01).unwrap().eta(), 3000, 30).unwrap().1.ratio;
        let mid = optimize_single_shot(LinkSpec::fibre(1.0).unwrap().eta(), 300, 30).unwrap().1.ratio;
        assert!(near > mid);
        assert!(near < 0.5);
    }

    #[test]
    fn iterative_k1_one_equals_single_shot() {
        for m in 2..7 {
            for eta in [0.2, 0.5, 0.8] {
                let it = iterative_rate(1, m, eta).unwrap();
                let ss = single_shot_rate(cp(1, m), eta).unwrap();
                assert_eq!(it.result.rate, ss.rate);
            }
        }
    }

    #[test]
    fn iterative_mass_is_conserved() {
        for (k1, m) in [(3, 4), (4, 5), (6, 6)] {
            let it = iterative_rate(k1, m, 0.6).unwrap();
            assert!((it.success_probability + it.residual_failure - 1.0).abs() < 1e-12);
            let sum: f64 = it.per_round.iter().sum();
            assert_relative_eq!(sum, it.result.rate, max_relative = 1e-12);
        }
    }

    #[test]
    fn iterative_matches_outcome_enumeration() {
        // Oracle: sum P·E over explicitly enumerated sequences.
        for (k1, m) in [(2, 3), (3, 4), (4, 5), (3, 5)] {
            for eta in [0.3, 0.7] {
                let seqs = enumerate_round_outcomes(k1, m, DEFAULT_OUTCOME_CAP).unwrap();
                let mut oracle = 0.0;
                for s in &seqs {
                    assert!(s.is_success());
                    oracle += s.probability(m, eta).unwrap() * s.entanglement(m);
                }
                let it = iterative_rate(k1, m, eta).unwrap();
                assert_relative_eq!(it.result.rate, oracle / m as f64, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn iterative_cap() {
        assert!(matches!(iterative_rate_capped(6, 6, 0.5, 10), Err(Error::SizeCap { .. })));
        assert!(matches!(enumerate_round_outcomes(6, 6, 10), Err(Error::SizeCap { .. })));
    }

    #[test]
    fn outcome_consistency() {
        assert!(RoundOutcome { rounds: vec![(3, 1), (2, 1), (1, 1)] }.is_success());
        assert!(!RoundOutcome { rounds: vec![(3, 1), (3, 2)] }.is_consistent());
        assert!(!RoundOutcome { rounds: vec![(3, 3), (2, 2)] }.is_consistent());
        assert!(!RoundOutcome { rounds: vec![(3, 2), (2, 0)] }.is_consistent());
        assert!(RoundOutcome { rounds: vec![(3, 2), (2, 0)] }.probability(4, 0.5).is_err());
    }

    #[test]
    fn round1_rci_sums() {
        assert_eq!(avg_rci_round1(0, 3, 0.5).unwrap(), (0.0, 0.0));
        let k1 = 2000;
        let norm: f64 = (0..=k1).map(|j| herald_prob_bob(k1, j, 0.5).unwrap()).sum();
        assert!((norm - 1.0).abs() < 1e-10);
        let (s1, f1) = avg_rci_round1(k1, 3, 0.5).unwrap();
        let ratio = 1.5 * (s1 + f1) / plob_capacity(0.5).unwrap().finite().unwrap();
        assert!((ratio - 1.0).abs() < 0.01);
    }

    #[test]
    fn squeezed_round1_weights_alice() {
        let s = SqueezingSpec::new(0.5).unwrap();
        let (s1, f1) = avg_rci_round1_squeezed(s, 2, 0.6).unwrap();
        let mut oracle = (0.0, 0.0);
        for k in 0..400 {
            let pa = herald_prob_alice(cp(k, 2), s);
            let (a, b) = avg_rci_round1(k, 2, 0.6).unwrap();
            oracle.0 += pa * a;
            oracle.1 += pa * b;
        }
        assert_relative_eq!(s1, oracle.0, max_relative = 1e-10);
        assert_relative_eq!(f1, oracle.1, max_relative = 1e-10);
    }

    #[test]
    fn gamma_round1() {
        let g = entanglement_ratio_round1(SqueezingSpec::new(0.999).unwrap(), 2).unwrap();
        assert!(g > 0.45 && g < 0.5, "{g}");

        // Direct series oracle with k ≤ 500.
        let chi: f64 = 0.3;
        let s = SqueezingSpec::new(chi).unwrap();
        let mut num = 0.0;
        for k in 0..=500u32 {
            let d = (k + 1) as f64;
            num += (1.0 - chi * chi).powi(2) * chi.powi(2 * k as i32) * d * d.log2();
        }
        let nbar = chi * chi / (1.0 - chi * chi);
        let e = (nbar + 1.0) * (nbar + 1.0).log2() - nbar * nbar.log2();
        let oracle = num / (2.0 * e);
        assert_relative_eq!(entanglement_ratio_round1(s, 2).unwrap(), oracle, max_relative = 1e-11);
        assert!((oracle - 0.194415).abs() < 1e-6);
        assert!(entanglement_ratio_round1(SqueezingSpec::new(0.0).unwrap(), 2).is_err());
    }

    #[test]
    fn gamma_round1_grows_with_rails() {
        let s = SqueezingSpec::new(0.5).unwrap();
        let g: Vec<f64> = [16, 32, 64, 128].iter().map(|&m| entanglement_ratio_round1(s, m).unwrap()).collect();
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!((g[3] - 1.0).abs() < 0.05);
    }

    #[test]
    fn gamma_round_n() {
        let g = entanglement_ratio_round_n(3, 200, 2).unwrap();
        assert!(!g.degenerate);
        assert!((g.value - 199.0 / 200.0).abs() < 0.01 * 199.0 / 200.0);
        let z = entanglement_ratio_round_n(0, 5, 2).unwrap();
        assert!(z.degenerate);
        assert_eq!(z.value, 0.0);
        // m=3, n=2, k_prev=2: Σ_{k≤2} (k+1) log2(k+1) / (6 log2 6).
        let exact = (2.0 * 2f64.log2() + 3.0 * 3f64.log2()) / (6.0 * 6f64.log2());
        assert_relative_eq!(entanglement_ratio_round_n(2, 3, 2).unwrap().value, exact, max_relative = 1e-14);
        assert!(entanglement_ratio_round_n(2, 3, 1).is_err());
    }

    #[test]
    fn balance() {
        let (l, r) = round_balance_check(3, 1, 2, 50).unwrap();
        assert!((l / r - 49.0 / 50.0).abs() < 0.05 * 49.0 / 50.0);
        for m in 2..=10 {
            for kp in 2..=4 {
                for jp in 1..kp {
                    for n in 2..=m {
                        let (l, r) = round_balance_check(kp, jp, n, m).unwrap();
                        assert!(l <= r * (1.0 + 1e-12), "m={m} kp={kp} jp={jp} n={n}");
                    }
                }
            }
        }
        assert!(round_balance_check(3, 0, 2, 5).is_err());
        assert!(round_balance_check(3, 3, 2, 5).is_err());
    }

    #[test]
    fn chain_single_link_is_single_shot() {
        let total = LinkSpec::fibre(30.0).unwrap();
        let a = repeater_chain_rate(total, 1, cp(2, 3)).unwrap();
        let b = single_shot_rate(cp(2, 3), total.eta()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn chain_qubit_curve() {
        for d in [10.0, 50.0, 120.0] {
            let total = LinkSpec::fibre(d).unwrap();
            let half = LinkSpec::fibre(d / 2.0).unwrap().eta();
            let r = repeater_chain_rate(total, 2, cp(1, 2)).unwrap();
            assert_relative_eq!(r.rate, half / 2.0, max_relative = 1e-14);
            assert_eq!(r.capacity, plob_capacity(total.eta()).unwrap());
        }
    }

    #[test]
    fn capacity_series() {
        let eta = 0.4;
        let c = plob_capacity(eta).unwrap().finite().unwrap();
        let s = iteration_capacity_series(1000, eta).unwrap();
        let total: f64 = s.iter().map(|x| x.0).sum();
        assert!((total - c).abs() / c < 1e-2);
        assert_relative_eq!(s[0].0 + s[0].1, 0.999 * c, max_relative = 1e-14);

        let s2 = iteration_capacity_series(2, eta).unwrap();
        let total2: f64 = s2.iter().map(|x| x.0).sum();
        assert!(total2 <= c / 2.0 + 1e-15);

        assert!(iteration_capacity_series(5, 0.0).unwrap().iter().all(|&(a, b)| a == 0.0 && b == 0.0));
        assert!(iteration_capacity_series(5, 1.0).is_err());
        assert!(iteration_capacity_series(1, 0.5).is_err());
    }
}
