//! Exact multiset counting and the probabilities built from it.
//!
//! Binomials are exact (`BigUint`) wherever an integer is returned. Log-domain
//! helpers are exact up to f64 rounding below [`EXACT_LOG_THRESHOLD`] and
//! switch to log-gamma above it.

use std::sync::OnceLock;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{domain, Error, Result};

/// Above this `n`, [`log2_binomial`] uses log-gamma instead of a factorial table.
pub const EXACT_LOG_THRESHOLD: u64 = 1000;

/// Default cap on the number of code words [`enumerate_codewords`] will build.
pub const DEFAULT_ENUM_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CodeParams {
    pub k: u32,
    pub m: u32,
}

impl CodeParams {
    pub fn new(k: u32, m: u32) -> Result<Self> {
        if m == 0 {
            return Err(domain("code needs at least one rail"));
        }
        Ok(CodeParams { k, m })
    }

    pub fn dim(&self) -> BigUint {
        multiset_dim(*self)
    }

    pub fn log2_dim(&self) -> f64 {
        log2_multiset_dim(*self)
    }
}

/// Photons per rail.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OccupationVector(pub Vec<u32>);

impl OccupationVector {
    pub fn total(&self) -> u64 {
        self.0.iter().map(|&n| n as u64).sum()
    }

    pub fn rails(&self) -> usize {
        self.0.len()
    }
}

/// Two-mode squeezing parameter χ and the quantities derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezingSpec {
    chi: f64,
}

impl SqueezingSpec {
    pub fn new(chi: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&chi) {
            return Err(domain(format!("squeezing chi={chi} outside [0,1)")));
        }
        Ok(SqueezingSpec { chi })
    }

    pub fn chi(&self) -> f64 {
        self.chi
    }

    pub fn r(&self) -> f64 {
        self.chi.atanh()
    }

    /// Mean photon number per mode, sinh²r = χ²/(1−χ²).
    pub fn nbar(&self) -> f64 {
        let c2 = self.chi * self.chi;
        c2 / (1.0 - c2)
    }

    pub fn lambda(&self) -> f64 {
        2.0 * self.nbar() + 1.0
    }

    /// Symplectic variance cosh 2r. Identical to [`Self::lambda`].
    pub fn nu(&self) -> f64 {
        let c2 = self.chi * self.chi;
        (1.0 + c2) / (1.0 - c2)
    }
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

fn binomial_u128(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// log2 of a big integer, accurate to f64 rounding.
pub fn big_log2(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 64 {
        return (x.to_u64().unwrap_or(0) as f64).log2();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX);
    (top as f64).log2() + shift as f64
}

fn log2_factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(EXACT_LOG_THRESHOLD as usize + 1);
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        t.push(0.0);
        for i in 1..=EXACT_LOG_THRESHOLD {
            // Kahan summation keeps the table within a few ulps.
            let y = (i as f64).log2() - comp;
            let s = sum + y;
            comp = (s - sum) - y;
            sum = s;
            t.push(sum);
        }
        t
    })
}

/// log2 C(n, k); `-inf` when k > n.
pub fn log2_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    if n <= 120 {
        if let Some(c) = binomial_u128(n, k) {
            return (c as f64).log2();
        }
    }
    if n <= EXACT_LOG_THRESHOLD {
        let t = log2_factorial_table();
        return t[n as usize] - t[k as usize] - t[(n - k) as usize];
    }
    let ln = libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0);
    ln / std::f64::consts::LN_2
}

/// Natural log of C(n, k).
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    log2_binomial(n, k) * std::f64::consts::LN_2
}

/// d = C(k+m−1, k).
pub fn multiset_dim(p: CodeParams) -> BigUint {
    binomial(p.k as u64 + p.m as u64 - 1, p.k as u64)
}

pub fn log2_multiset_dim(p: CodeParams) -> f64 {
    let n = p.k as u64 + p.m as u64 - 1;
    if n <= EXACT_LOG_THRESHOLD {
        big_log2(&multiset_dim(p))
    } else {
        log2_binomial(n, p.k as u64)
    }
}

/// All code words in descending lexicographic order.
pub fn enumerate_codewords(p: CodeParams) -> Result<Vec<OccupationVector>> {
    enumerate_codewords_capped(p, DEFAULT_ENUM_CAP)
}

pub fn enumerate_codewords_capped(p: CodeParams, cap: u128) -> Result<Vec<OccupationVector>> {
    if p.m == 0 {
        return Err(domain("code needs at least one rail"));
    }
    let d = multiset_dim(p);
    let size = d.to_u128().unwrap_or(u128::MAX);
    if size > cap {
        return Err(Error::SizeCap { what: "code-word enumeration", size, cap });
    }
    let mut out = Vec::with_capacity(size as usize);
    let mut cur = vec![0u32; p.m as usize];
    fill(&mut cur, 0, p.k, &mut out);
    Ok(out)
}

fn fill(cur: &mut [u32], rail: usize, left: u32, out: &mut Vec<OccupationVector>) {
    if rail + 1 == cur.len() {
        cur[rail] = left;
        out.push(OccupationVector(cur.to_vec()));
        return;
    }
    for n in (0..=left).rev() {
        cur[rail] = n;
        fill(cur, rail + 1, left - n, out);
    }
}

/// Probability that Alice's QND over m TMSV halves reads k.
pub fn herald_prob_alice(p: CodeParams, s: SqueezingSpec) -> f64 {
    let chi = s.chi();
    if chi == 0.0 {
        return if p.k == 0 { 1.0 } else { 0.0 };
    }
    let ln = p.m as f64 * (1.0 - chi * chi).ln()
        + 2.0 * p.k as f64 * chi.ln()
        + ln_binomial(p.k as u64 + p.m as u64 - 1, p.k as u64);
    ln.exp()
}

/// Probability that j of k photons survive a pure-loss channel of transmissivity η.
pub fn herald_prob_bob(k: u32, j: u32, eta: f64) -> Result<f64> {
    if j > k {
        return Err(domain(format!("j={j} exceeds k={k}")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(domain(format!("transmissivity {eta} outside [0,1]")));
    }
    let lost = k - j;
    if eta == 0.0 {
        return Ok(if j == 0 { 1.0 } else { 0.0 });
    }
    if eta == 1.0 {
        return Ok(if lost == 0 { 1.0 } else { 0.0 });
    }
    if lost == 0 {
        return Ok(eta.powi(j as i32));
    }
    if j == 0 {
        return Ok((1.0 - eta).powi(lost as i32));
    }
    let ln = ln_binomial(k as u64, j as u64) + j as f64 * eta.ln() + lost as f64 * (-eta).ln_1p();
    Ok(ln.exp())
}

fn rational_from(n: BigUint, d: BigUint) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// S_{k,m} = Σ_μ 1/∏_i C(k, n_i), summed over every code word.
pub fn resource_norm_s(p: CodeParams) -> Result<BigRational> {
    let words = enumerate_codewords(p)?;
    let k = p.k as u64;
    let binoms: Vec<BigUint> = (0..=k).map(|n| binomial(k, n)).collect();
    let mut acc = BigRational::zero();
    for w in &words {
        let mut prod = BigUint::one();
        for &n in &w.0 {
            prod *= &binoms[n as usize];
        }
        acc += rational_from(BigUint::one(), prod);
    }
    Ok(acc)
}

/// Closed forms of S_{k,m} for k ∈ {1, 2, 3, 4}; `None` otherwise.
pub fn resource_norm_s_closed_form(p: CodeParams) -> Option<BigRational> {
    let m = BigUint::from(p.m);
    let m2 = &m * &m;
    let m3 = &m2 * &m;
    let m4 = &m3 * &m;
    let (num, den) = match p.k {
        1 => (m.clone(), BigUint::one()),
        2 => (7u32 * &m + &m2, BigUint::from(8u32)),
        3 => (146u32 * &m + 15u32 * &m2 + &m3, BigUint::from(162u32)),
        4 => (17198u32 * &m + 1153u32 * &m2 + 78u32 * &m3 + 3u32 * &m4, BigUint::from(18432u32)),
        _ => return None,
    };
    Some(rational_from(num, den))
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    let n = big_log2(&r.numer().magnitude().clone());
    let d = big_log2(&r.denom().magnitude().clone());
    if r.numer().is_zero() {
        0.0
    } else {
        (n - d).exp2()
    }
}

/// log2 [C(k+m−1, j) / C(k, j)].
pub fn binom_ratio(k: u32, j: u32, m: u32) -> Result<f64> {
    if j > k {
        return Err(domain(format!("j={j} exceeds k={k}")));
    }
    if m == 0 {
        return Err(domain("m must be positive"));
    }
    Ok(log2_binomial(k as u64 + m as u64 - 1, j as u64) - log2_binomial(k as u64, j as u64))
}

/// log2 of (1 − j/k)^{−(m−1)}, the large-k limit of [`binom_ratio`].
pub fn asymptotic_binom_ratio(k: u32, j: u32, m: u32) -> Result<f64> {
    if j > k {
        return Err(domain(format!("j={j} exceeds k={k}")));
    }
    if m == 0 {
        return Err(domain("m must be positive"));
    }
    if k == 0 {
        return Ok(0.0);
    }
    if j == k && m > 1 {
        return Err(domain("asymptotic ratio diverges at j = k"));
    }
    let frac = j as f64 / k as f64;
    Ok(-((m - 1) as f64) * (-frac).ln_1p() / std::f64::consts::LN_2)
}

/// G(x) = (x+1) log2(x+1) − x log2 x, with G(0) = 0.
pub fn g_entropy(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    (x + 1.0) * (x + 1.0).log2() - x * x.log2()
}

/// Entanglement entropy of one TMSV, G(n̄).
pub fn tmsv_entropy(s: SqueezingSpec) -> f64 {
    g_entropy(s.nbar())
}
