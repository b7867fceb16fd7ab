use std::collections::BTreeMap;

use super::density::DensityOperator;
use super::C64;
use crate::error::{domain, Error, Result};

/// Occupation-number tuple, one entry per mode.
pub type Occupation = Vec<u16>;

/// Sparse pure (possibly subnormalized) state over a truncated multimode Fock basis.
///
/// Keys are occupation tuples in mode order; iteration order is lexicographic
/// on the tuple, which makes every derived quantity deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct FockArray {
    modes: usize,
    cutoff: u16,
    amps: BTreeMap<Occupation, C64>,
    tail_weight: f64,
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * i as f64)
}

fn binom_f64(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

impl FockArray {
    /// The zero vector.
    pub fn zero(modes: usize, cutoff: u16) -> Self {
        FockArray { modes, cutoff, amps: BTreeMap::new(), tail_weight: 0.0 }
    }

    pub fn vacuum(modes: usize, cutoff: u16) -> Self {
        let mut s = Self::zero(modes, cutoff);
        s.amps.insert(vec![0; modes], C64::new(1.0, 0.0));
        s
    }

    pub fn basis(occ: Occupation, cutoff: u16) -> Result<Self> {
        let mut s = Self::zero(occ.len(), cutoff);
        s.add(occ, C64::new(1.0, 0.0))?;
        Ok(s)
    }

    pub fn from_terms(modes: usize, cutoff: u16, terms: impl IntoIterator<Item = (Occupation, C64)>) -> Result<Self> {
        let mut s = Self::zero(modes, cutoff);
        for (occ, a) in terms {
            s.add(occ, a)?;
        }
        Ok(s)
    }

    /// Adds `amp` to the coefficient of `occ`.
    pub fn add(&mut self, occ: Occupation, amp: C64) -> Result<()> {
        if occ.len() != self.modes {
            return Err(domain(format!("occupation has {} modes, state has {}", occ.len(), self.modes)));
        }
        if let Some(&n) = occ.iter().find(|&&n| n > self.cutoff) {
            return Err(domain(format!("occupation {n} exceeds cutoff {}", self.cutoff)));
        }
        *self.amps.entry(occ).or_insert(C64::new(0.0, 0.0)) += amp;
        Ok(())
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> u16 {
        self.cutoff
    }

    /// Norm² discarded by truncation when the state was built.
    pub fn tail_weight(&self) -> f64 {
        self.tail_weight
    }

    pub fn with_tail_weight(mut self, w: f64) -> Self {
        self.tail_weight = w;
        self
    }

    /// Fails when the recorded tail weight exceeds `tol`.
    pub fn check_truncation(&self, tol: f64) -> Result<()> {
        if self.tail_weight > tol {
            return Err(Error::Truncation { lost: self.tail_weight, cutoff: self.cutoff as usize, tolerance: tol });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn amplitude(&self, occ: &[u16]) -> C64 {
        self.amps.get(occ).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &C64)> {
        self.amps.iter()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn scaled(&self, c: C64) -> Self {
        let mut s = self.clone();
        for a in s.amps.values_mut() {
            *a *= c;
        }
        s
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n <= 0.0 {
            return Err(domain("cannot normalize a zero state"));
        }
        Ok(self.scaled(C64::new(1.0 / n.sqrt(), 0.0)))
    }

    /// Drops coefficients with |a|² below `tol`.
    pub fn pruned(&self, tol: f64) -> Self {
        let mut s = self.clone();
        s.amps.retain(|_, a| a.norm_sqr() >= tol);
        s
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &FockArray) -> C64 {
        let (small, big, flip) = if self.len() <= other.len() { (self, other, false) } else { (other, self, true) };
        let mut acc = C64::new(0.0, 0.0);
        for (occ, a) in &small.amps {
            if let Some(b) = big.amps.get(occ) {
                acc += if flip { b.conj() * a } else { a.conj() * b };
            }
        }
        acc
    }

    pub fn plus(&self, other: &FockArray) -> Result<Self> {
        if self.modes != other.modes {
            return Err(domain("mode count mismatch"));
        }
        let mut s = self.clone();
        s.cutoff = s.cutoff.max(other.cutoff);
        for (occ, a) in &other.amps {
            *s.amps.entry(occ.clone()).or_insert(C64::new(0.0, 0.0)) += a;
        }
        s.tail_weight += other.tail_weight;
        Ok(s)
    }

    /// |self⟩ ⊗ |other⟩, modes of `self` first.
    pub fn tensor(&self, other: &FockArray) -> Self {
        let mut s = Self::zero(self.modes + other.modes, self.cutoff.max(other.cutoff));
        for (x, a) in &self.amps {
            for (y, b) in &other.amps {
                let mut occ = x.clone();
                occ.extend_from_slice(y);
                s.amps.insert(occ, a * b);
            }
        }
        s.tail_weight = self.tail_weight + other.tail_weight;
        s
    }

    /// Reorders modes so that new mode `i` is old mode `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.modes];
        if order.len() != self.modes {
            return Err(domain("permutation length mismatch"));
        }
        for &o in order {
            if o >= self.modes || seen[o] {
                return Err(domain("not a permutation"));
            }
            seen[o] = true;
        }
        let mut s = Self::zero(self.modes, self.cutoff);
        s.tail_weight = self.tail_weight;
        for (occ, a) in &self.amps {
            s.amps.insert(order.iter().map(|&o| occ[o]).collect(), *a);
        }
        Ok(s)
    }

    pub fn with_vacuum_modes(&self, extra: usize) -> Self {
        self.tensor(&FockArray::vacuum(extra, 0))
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.modes {
            return Err(domain(format!("mode {mode} out of range for {} modes", self.modes)));
        }
        Ok(())
    }

    /// Two-mode passive transform. Creation operators map as
    /// a_i† → u[0][0] a_i† + u[1][0] a_j† and a_j† → u[0][1] a_i† + u[1][1] a_j†.
    ///
    /// Output occupations above the cutoff are dropped; their weight is added
    /// to the tail weight.
    pub fn two_mode_transform(&self, i: usize, j: usize, u: [[f64; 2]; 2]) -> Result<Self> {
        self.check_mode(i)?;
        self.check_mode(j)?;
        if i == j {
            return Err(domain("two-mode transform needs distinct modes"));
        }
        let mut out = Self::zero(self.modes, self.cutoff);
        out.tail_weight = self.tail_weight;
        let mut dropped = FockArray::zero(self.modes, u16::MAX);
        for (occ, a) in &self.amps {
            let (ni, nj) = (occ[i] as u32, occ[j] as u32);
            let total = ni + nj;
            let pre = 1.0 / (factorial(ni) * factorial(nj)).sqrt();
            for p in 0..=ni {
                let cp = binom_f64(ni, p) * u[0][0].powi(p as i32) * u[1][0].powi((ni - p) as i32);
                if cp == 0.0 {
                    continue;
                }
                for q in 0..=nj {
                    let cq = binom_f64(nj, q) * u[0][1].powi(q as i32) * u[1][1].powi((nj - q) as i32);
                    if cq == 0.0 {
                        continue;
                    }
                    let oi = p + q;
                    let oj = total - oi;
                    let coef = pre * cp * cq * (factorial(oi) * factorial(oj)).sqrt();
                    let mut o = occ.clone();
                    o[i] = oi as u16;
                    o[j] = oj as u16;
                    let target = if oi > self.cutoff as u32 || oj > self.cutoff as u32 {
                        &mut dropped.amps
                    } else {
                        &mut out.amps
                    };
                    *target.entry(o).or_insert(C64::new(0.0, 0.0)) += a * coef;
                }
            }
        }
        out.tail_weight += dropped.norm_sqr();
        out.amps.retain(|_, a| a.norm_sqr() > 0.0);
        Ok(out)
    }

    /// Balanced beamsplitter: a_i† → (a_i† + a_j†)/√2, a_j† → (a_i† − a_j†)/√2.
    pub fn balanced_beamsplitter(&self, i: usize, j: usize) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        self.two_mode_transform(i, j, [[h, h], [h, -h]])
    }

    /// Beamsplitter of transmissivity η coupling `mode` into `env`:
    /// a† → √η a† + √(1−η) e†.
    pub fn loss_dilation(&self, mode: usize, env: usize, eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(domain(format!("transmissivity {eta} outside [0,1]")));
        }
        let (t, r) = (eta.sqrt(), (1.0 - eta).sqrt());
        self.two_mode_transform(mode, env, [[t, -r], [r, t]])
    }

    /// Multiplies each coefficient by `f(occupation)`.
    pub fn map_diagonal(&self, f: impl Fn(&[u16]) -> C64) -> Self {
        let mut s = self.clone();
        for (occ, a) in s.amps.iter_mut() {
            *a *= f(occ);
        }
        s.amps.retain(|_, a| a.norm_sqr() > 0.0);
        s
    }

    /// Keeps terms whose listed modes have the listed occupations, then removes those modes.
    pub fn project(&self, fixed: &[(usize, u16)]) -> Result<Self> {
        for &(m, _) in fixed {
            self.check_mode(m)?;
        }
        let drop: Vec<usize> = fixed.iter().map(|x| x.0).collect();
        let mut s = Self::zero(self.modes - drop.len(), self.cutoff);
        s.tail_weight = self.tail_weight;
        for (occ, a) in &self.amps {
            if fixed.iter().all(|&(m, n)| occ[m] == n) {
                let rest: Occupation = (0..self.modes).filter(|i| !drop.contains(i)).map(|i| occ[i]).collect();
                *s.amps.entry(rest).or_insert(C64::new(0.0, 0.0)) += a;
            }
        }
        Ok(s)
    }

    /// Projects onto total photon number `total` over `modes`, keeping all modes.
    pub fn project_total(&self, modes: &[usize], total: u32) -> Result<Self> {
        for &m in modes {
            self.check_mode(m)?;
        }
        let mut s = self.clone();
        s.amps.retain(|occ, _| modes.iter().map(|&m| occ[m] as u32).sum::<u32>() == total);
        Ok(s)
    }

    /// Distinct total photon numbers present over `modes`, ascending.
    pub fn totals(&self, modes: &[usize]) -> Vec<u32> {
        let mut t: Vec<u32> = self.amps.keys().map(|occ| modes.iter().map(|&m| occ[m] as u32).sum()).collect();
        t.sort_unstable();
        t.dedup();
        t
    }

    /// Reduced density operator on `keep`, tracing out every other mode.
    pub fn reduced(&self, keep: &[usize]) -> Result<DensityOperator> {
        for &m in keep {
            self.check_mode(m)?;
        }
        let traced: Vec<usize> = (0..self.modes).filter(|i| !keep.contains(i)).collect();
        let mut groups: BTreeMap<Occupation, Vec<(Occupation, C64)>> = BTreeMap::new();
        for (occ, a) in &self.amps {
            let env: Occupation = traced.iter().map(|&i| occ[i]).collect();
            let sys: Occupation = keep.iter().map(|&i| occ[i]).collect();
            groups.entry(env).or_default().push((sys, *a));
        }
        DensityOperator::from_ensemble(keep.len(), self.cutoff, groups.into_values())
    }

    pub fn to_density(&self) -> Result<DensityOperator> {
        let all: Vec<usize> = (0..self.modes).collect();
        self.reduced(&all)
    }

    /// Entanglement entropy between `part` and the remaining modes of a pure state.
    pub fn entanglement_entropy(&self, part: &[usize]) -> Result<f64> {
        self.normalized()?.reduced(part)?.entropy()
    }

    /// Trace distance between the pure states |a⟩/‖a‖ and |b⟩/‖b‖.
    ///
    /// Computed from the aligned difference vector, which stays accurate for
    /// nearly identical states where 1 − |⟨a|b⟩|² would cancel.
    pub fn trace_distance_pure(&self, other: &FockArray) -> Result<f64> {
        let a = self.normalized()?;
        let b = other.normalized()?;
        let ov = a.inner(&b);
        let phase = if ov.norm() > 0.0 { ov.conj() / ov.norm() } else { C64::new(1.0, 0.0) };
        let diff = a.plus(&b.scaled(-phase))?;
        let h = diff.norm_sqr() / 2.0;
        Ok((h * (2.0 - h)).max(0.0).sqrt())
    }
}
