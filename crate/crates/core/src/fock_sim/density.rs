use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{DMatrix, SymmetricEigen};

use super::state::{FockArray, Occupation};
use super::{C64, DEFAULT_DIM_BUDGET, TRUNCATION_TOL};
use crate::error::{domain, Error, Result};

/// Mixed state as a dense matrix over an explicit, sorted occupation basis.
///
/// Only occupations in the support are stored, so photon-number sectors that
/// never appear cost nothing.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    modes: usize,
    cutoff: u16,
    basis: Vec<Occupation>,
    index: HashMap<Occupation, usize>,
    matrix: DMatrix<C64>,
    truncation_loss: f64,
}

/// An operator given by its action on basis vectors.
pub type SparseImage = Vec<(Occupation, C64)>;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

fn index_of(basis: &[Occupation]) -> HashMap<Occupation, usize> {
    basis.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect()
}

fn check_budget(dim: usize) -> Result<()> {
    if dim > DEFAULT_DIM_BUDGET {
        return Err(Error::SizeCap {
            what: "dense operator basis",
            size: dim as u128,
            cap: DEFAULT_DIM_BUDGET as u128,
        });
    }
    Ok(())
}

impl DensityOperator {
    pub fn from_parts(modes: usize, cutoff: u16, basis: Vec<Occupation>, matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(domain("matrix does not match basis size"));
        }
        if basis.iter().any(|b| b.len() != modes) {
            return Err(domain("basis vector has wrong mode count"));
        }
        let mut order: Vec<usize> = (0..basis.len()).collect();
        order.sort_by(|&a, &b| basis[a].cmp(&basis[b]));
        let sorted: Vec<Occupation> = order.iter().map(|&i| basis[i].clone()).collect();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(domain("duplicate basis vector"));
        }
        let matrix = DMatrix::from_fn(sorted.len(), sorted.len(), |r, c| matrix[(order[r], order[c])]);
        let index = index_of(&sorted);
        Ok(DensityOperator { modes, cutoff, basis: sorted, index, matrix, truncation_loss: 0.0 })
    }

    /// Σ_g |v_g⟩⟨v_g| for unnormalized vectors v_g.
    pub fn from_ensemble<I, V>(modes: usize, cutoff: u16, vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = V>,
        V: AsRef<[(Occupation, C64)]>,
    {
        let vectors: Vec<V> = vectors.into_iter().collect();
        let set: BTreeSet<&Occupation> = vectors.iter().flat_map(|v| v.as_ref().iter().map(|x| &x.0)).collect();
        let basis: Vec<Occupation> = set.into_iter().cloned().collect();
        check_budget(basis.len())?;
        let index = index_of(&basis);
        let mut matrix = DMatrix::from_element(basis.len(), basis.len(), ZERO);
        for v in &vectors {
            let idx: Vec<(usize, C64)> = v.as_ref().iter().map(|(o, a)| (index[o], *a)).collect();
            for &(r, a) in &idx {
                for &(c, b) in &idx {
                    matrix[(r, c)] += a * b.conj();
                }
            }
        }
        Ok(DensityOperator { modes, cutoff, basis, index, matrix, truncation_loss: 0.0 })
    }

    pub fn from_pure(psi: &FockArray) -> Result<Self> {
        psi.to_density()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn cutoff(&self) -> u16 {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[Occupation] {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Trace dropped by cutoff truncation in channels applied so far.
    pub fn truncation_loss(&self) -> f64 {
        self.truncation_loss
    }

    pub fn element(&self, row: &[u16], col: &[u16]) -> C64 {
        match (self.index.get(row), self.index.get(col)) {
            (Some(&r), Some(&c)) => self.matrix[(r, c)],
            _ => ZERO,
        }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.matrix *= C64::new(s, 0.0);
        out
    }

    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(domain("cannot normalize an operator with zero trace"));
        }
        Ok(self.scaled(1.0 / t))
    }

    /// Largest |ρ − ρ†| entry.
    pub fn hermiticity_error(&self) -> f64 {
        let d = &self.matrix - self.matrix.adjoint();
        d.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn add_truncation_loss(&mut self, lost: f64) {
        self.truncation_loss += lost;
    }

    /// ρ ⊗ σ with the modes of `self` first.
    pub fn tensor(&self, other: &DensityOperator) -> Result<Self> {
        let dim = self.dim() * other.dim();
        check_budget(dim)?;
        // Both bases are sorted, so row-major concatenation stays sorted.
        let basis: Vec<Occupation> = self
            .basis
            .iter()
            .flat_map(|a| other.basis.iter().map(move |b| a.iter().chain(b).copied().collect()))
            .collect();
        let matrix = self.matrix.kronecker(&other.matrix);
        let index = index_of(&basis);
        Ok(DensityOperator {
            modes: self.modes + other.modes,
            cutoff: self.cutoff.max(other.cutoff),
            basis,
            index,
            matrix,
            truncation_loss: self.truncation_loss + other.truncation_loss,
        })
    }

    /// Re-expresses `self` on a larger sorted basis.
    fn embedded(&self, basis: &[Occupation]) -> DMatrix<C64> {
        let pos: Vec<usize> = self.basis.iter().map(|b| basis.binary_search(b).unwrap()).collect();
        let mut m = DMatrix::from_element(basis.len(), basis.len(), ZERO);
        for (r, &pr) in pos.iter().enumerate() {
            for (c, &pc) in pos.iter().enumerate() {
                m[(pr, pc)] = self.matrix[(r, c)];
            }
        }
        m
    }

    fn union_basis(&self, other: &DensityOperator) -> Result<Vec<Occupation>> {
        if self.modes != other.modes {
            return Err(domain("mode count mismatch"));
        }
        let set: BTreeSet<&Occupation> = self.basis.iter().chain(other.basis.iter()).collect();
        Ok(set.into_iter().cloned().collect())
    }

    pub fn plus(&self, other: &DensityOperator) -> Result<Self> {
        let basis = self.union_basis(other)?;
        let matrix = self.embedded(&basis) + other.embedded(&basis);
        let index = index_of(&basis);
        Ok(DensityOperator {
            modes: self.modes,
            cutoff: self.cutoff.max(other.cutoff),
            basis,
            index,
            matrix,
            truncation_loss: self.truncation_loss + other.truncation_loss,
        })
    }

    /// Σ_l K_l ρ K_l†, where `kraus[l]` maps a basis vector to its image.
    ///
    /// Images may leave the current basis; the output basis is the union of
    /// all images that carry weight.
    pub fn apply_kraus<F>(&self, kraus: &[F]) -> Result<Self>
    where
        F: Fn(&[u16]) -> SparseImage,
    {
        let images: Vec<Vec<SparseImage>> = kraus.iter().map(|k| self.basis.iter().map(|b| k(b)).collect()).collect();
        let set: BTreeSet<&Occupation> =
            images.iter().flat_map(|per| per.iter().flat_map(|img| img.iter().map(|x| &x.0))).collect();
        let basis: Vec<Occupation> = set.into_iter().cloned().collect();
        check_budget(basis.len())?;
        let index = index_of(&basis);
        let mut out = DMatrix::from_element(basis.len(), basis.len(), ZERO);
        let n = self.basis.len();
        for per in &images {
            let idx: Vec<Vec<(usize, C64)>> =
                per.iter().map(|img| img.iter().map(|(o, a)| (index[o], *a)).collect()).collect();
            for r in 0..n {
                if idx[r].is_empty() {
                    continue;
                }
                for c in 0..n {
                    let v = self.matrix[(r, c)];
                    if v == ZERO {
                        continue;
                    }
                    for &(p, a) in &idx[r] {
                        let av = a * v;
                        for &(q, b) in &idx[c] {
                            out[(p, q)] += av * b.conj();
                        }
                    }
                }
            }
        }
        let mut res = DensityOperator {
            modes: self.modes,
            cutoff: self.cutoff,
            basis,
            index,
            matrix: out,
            truncation_loss: self.truncation_loss,
        };
        res.prune();
        Ok(res)
    }

    /// Like [`Self::apply_kraus`] for a trace-preserving channel, recording
    /// any trace lost to truncation and failing above the tolerance.
    pub fn apply_channel<F>(&self, kraus: &[F]) -> Result<Self>
    where
        F: Fn(&[u16]) -> SparseImage,
    {
        let before = self.trace();
        let mut out = self.apply_kraus(kraus)?;
        let lost = (before - out.trace()).max(0.0);
        out.truncation_loss += lost;
        let rel = if before > 0.0 { out.truncation_loss / before } else { 0.0 };
        if rel > TRUNCATION_TOL {
            return Err(Error::Truncation { lost: rel, cutoff: self.cutoff as usize, tolerance: TRUNCATION_TOL });
        }
        Ok(out)
    }

    /// Applies a unitary given on basis vectors: U ρ U†.
    pub fn conjugate<F>(&self, u: F) -> Result<Self>
    where
        F: Fn(&[u16]) -> SparseImage,
    {
        self.apply_kraus(&[u])
    }

    /// Applies a two-mode passive transform (see [`FockArray::two_mode_transform`]).
    pub fn two_mode_transform(&self, i: usize, j: usize, u: [[f64; 2]; 2]) -> Result<Self> {
        if i >= self.modes || j >= self.modes || i == j {
            return Err(domain("invalid mode pair"));
        }
        let cutoff = self.cutoff;
        let out = self.apply_channel(&[|b: &[u16]| -> SparseImage {
            match FockArray::basis(b.to_vec(), cutoff).and_then(|s| s.two_mode_transform(i, j, u)) {
                Ok(s) => s.terms().map(|(o, a)| (o.clone(), *a)).collect(),
                Err(_) => Vec::new(),
            }
        }])?;
        Ok(out)
    }

    pub fn balanced_beamsplitter(&self, i: usize, j: usize) -> Result<Self> {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        self.two_mode_transform(i, j, [[h, h], [h, -h]])
    }

    /// Multiplies ρ_{ab} by phase(a)·conj(phase(b)).
    pub fn diagonal_unitary(&self, phase: impl Fn(&[u16]) -> C64) -> Self {
        let mut out = self.clone();
        let ph: Vec<C64> = self.basis.iter().map(|b| phase(b)).collect();
        for r in 0..ph.len() {
            for c in 0..ph.len() {
                out.matrix[(r, c)] *= ph[r] * ph[c].conj();
            }
        }
        out
    }

    /// Diagonal measurement on `modes`: Σ_n w(n) ⟨n|ρ|n⟩ with the measured modes removed.
    ///
    /// `weight` receives the occupations of `modes` in the order given. With
    /// 0/1 weights this is a projective measurement; general weights model
    /// phase-insensitive detectors.
    pub fn measure(&self, modes: &[usize], weight: impl Fn(&[u16]) -> f64) -> Result<Self> {
        if modes.iter().any(|&m| m >= self.modes) {
            return Err(domain("measured mode out of range"));
        }
        let keep: Vec<usize> = (0..self.modes).filter(|i| !modes.contains(i)).collect();
        let split = |b: &Occupation| -> (Occupation, Occupation) {
            (keep.iter().map(|&i| b[i]).collect(), modes.iter().map(|&i| b[i]).collect())
        };
        let parts: Vec<(Occupation, Occupation)> = self.basis.iter().map(split).collect();
        let set: BTreeSet<&Occupation> = parts.iter().map(|p| &p.0).collect();
        let basis: Vec<Occupation> = set.into_iter().cloned().collect();
        let index = index_of(&basis);
        let weights: Vec<f64> = parts.iter().map(|p| weight(&p.1)).collect();
        let mut out = DMatrix::from_element(basis.len(), basis.len(), ZERO);
        let n = self.basis.len();
        for r in 0..n {
            if weights[r] == 0.0 {
                continue;
            }
            for c in 0..n {
                if parts[r].1 == parts[c].1 {
                    let (p, q) = (index[&parts[r].0], index[&parts[c].0]);
                    out[(p, q)] += self.matrix[(r, c)] * weights[r];
                }
            }
        }
        let mut res = DensityOperator {
            modes: keep.len(),
            cutoff: self.cutoff,
            basis,
            index,
            matrix: out,
            truncation_loss: self.truncation_loss,
        };
        res.prune();
        Ok(res)
    }

    /// Traces out every mode not in `keep`; kept modes appear in the order given.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        if keep.iter().any(|&m| m >= self.modes) {
            return Err(domain("kept mode out of range"));
        }
        let traced: Vec<usize> = (0..self.modes).filter(|i| !keep.contains(i)).collect();
        let reduced = self.measure(&traced, |_| 1.0)?;
        // `measure` keeps modes in ascending order; restore the requested order.
        let mut asc: Vec<usize> = keep.to_vec();
        asc.sort_unstable();
        if asc == keep {
            return Ok(reduced);
        }
        let pos: Vec<usize> = keep.iter().map(|k| asc.iter().position(|a| a == k).unwrap()).collect();
        let basis: Vec<Occupation> = reduced.basis.iter().map(|b| pos.iter().map(|&p| b[p]).collect()).collect();
        let mut out = DensityOperator::from_parts(keep.len(), self.cutoff, basis, reduced.matrix)?;
        out.truncation_loss = self.truncation_loss;
        Ok(out)
    }

    /// P ρ P for the projector onto total photon number `total` over `modes`.
    pub fn project_total(&self, modes: &[usize], total: u32) -> Result<Self> {
        if modes.iter().any(|&m| m >= self.modes) {
            return Err(domain("mode out of range"));
        }
        let keep: Vec<usize> = (0..self.basis.len())
            .filter(|&i| modes.iter().map(|&m| self.basis[i][m] as u32).sum::<u32>() == total)
            .collect();
        let basis: Vec<Occupation> = keep.iter().map(|&i| self.basis[i].clone()).collect();
        let matrix = DMatrix::from_fn(keep.len(), keep.len(), |r, c| self.matrix[(keep[r], keep[c])]);
        let index = index_of(&basis);
        Ok(DensityOperator {
            modes: self.modes,
            cutoff: self.cutoff,
            basis,
            index,
            matrix,
            truncation_loss: self.truncation_loss,
        })
    }

    /// Removes basis vectors whose row and column are exactly zero.
    fn prune(&mut self) {
        let n = self.basis.len();
        let live: Vec<usize> =
            (0..n).filter(|&i| self.matrix[(i, i)] != ZERO || (0..n).any(|j| self.matrix[(i, j)] != ZERO)).collect();
        if live.len() == n {
            return;
        }
        self.basis = live.iter().map(|&i| self.basis[i].clone()).collect();
        self.matrix = DMatrix::from_fn(live.len(), live.len(), |r, c| self.matrix[(live[r], live[c])]);
        self.index = index_of(&self.basis);
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.basis.is_empty() {
            return Vec::new();
        }
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = SymmetricEigen::new(herm).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev
    }

    /// Von Neumann entropy in bits of the trace-normalized operator.
    pub fn entropy(&self) -> Result<f64> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(domain("entropy of a zero operator"));
        }
        let mut s = 0.0;
        for ev in self.eigenvalues() {
            let p = ev / t;
            if p < -1e-10 {
                return Err(Error::NumericalHealth(format!("negative eigenvalue {p:.3e}")));
            }
            if p > 0.0 {
                s -= p * p.log2();
            }
        }
        Ok(s.max(0.0))
    }

    /// Tr(ρ²)/Tr(ρ)².
    pub fn purity(&self) -> f64 {
        let t = self.trace();
        let p: f64 = self.matrix.iter().map(|z| z.norm_sqr()).sum();
        p / (t * t)
    }

    /// ⟨ψ|ρ|ψ⟩ / (Tr ρ · ⟨ψ|ψ⟩).
    pub fn fidelity_pure(&self, psi: &FockArray) -> f64 {
        let v: Vec<C64> = self.basis.iter().map(|b| psi.amplitude(b)).collect();
        let mut acc = ZERO;
        for r in 0..v.len() {
            if v[r] == ZERO {
                continue;
            }
            for c in 0..v.len() {
                acc += v[r].conj() * self.matrix[(r, c)] * v[c];
            }
        }
        acc.re / (self.trace() * psi.norm_sqr())
    }

    /// ½ Σ |eig(ρ/Trρ − σ/Trσ)|.
    pub fn trace_distance(&self, other: &DensityOperator) -> Result<f64> {
        let a = self.normalized()?;
        let b = other.normalized()?;
        let basis = a.union_basis(&b)?;
        let diff = a.embedded(&basis) - b.embedded(&basis);
        let herm = (&diff + diff.adjoint()) * C64::new(0.5, 0.0);
        Ok(0.5 * SymmetricEigen::new(herm).eigenvalues.iter().map(|x| x.abs()).sum::<f64>())
    }

    /// Mean photon number of one mode, normalized by the trace.
    pub fn mean_photons(&self, mode: usize) -> f64 {
        let s: f64 = self.basis.iter().enumerate().map(|(i, b)| b[mode] as f64 * self.matrix[(i, i)].re).sum();
        s / self.trace()
    }

    /// Photon-number distribution of one mode (unnormalized diagonal weights).
    pub fn photon_distribution(&self, mode: usize) -> BTreeMap<u16, f64> {
        let mut d = BTreeMap::new();
        for (i, b) in self.basis.iter().enumerate() {
            *d.entry(b[mode]).or_insert(0.0) += self.matrix[(i, i)].re;
        }
        d
    }
}
