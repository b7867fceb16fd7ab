//! Covariance-matrix layer: CV entanglement swapping and asymptotic key rates.
//!
//! Quadratures are ordered `(q1, p1, q2, p2, ...)` and the vacuum has the
//! identity as covariance matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{domain, Error, Result};

/// Tolerance on symmetry of a covariance matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Tolerance below 1 allowed for symplectic eigenvalues.
pub const PHYSICAL_TOL: f64 = 1e-9;
/// Relative singular-value cutoff of the pseudoinverse.
pub const PINV_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quadrature {
    Q,
    P,
}

/// Which party's data is the reference for key distillation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// Bob is the reference.
    #[default]
    Reverse,
    /// Alice is the reference.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRateInputs {
    beta: f64,
    pub direction: Direction,
}

impl KeyRateInputs {
    pub fn new(beta: f64, direction: Direction) -> Result<Self> {
        if !(beta > 0.0 && beta <= 1.0) {
            return Err(domain(format!("beta={beta} outside (0,1]")));
        }
        Ok(KeyRateInputs { beta, direction })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Physical covariance matrix of an N-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    v: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Validates shape, symmetry and the uncertainty principle.
    pub fn new(v: DMatrix<f64>) -> Result<Self> {
        let cm = Self::unchecked(v)?;
        let nus = cm.symplectic_eigenvalues()?;
        if let Some(bad) = nus.iter().find(|&&nu| nu < 1.0 - PHYSICAL_TOL) {
            return Err(Error::NumericalHealth(format!("symplectic eigenvalue {bad} < 1")));
        }
        Ok(cm)
    }

    fn unchecked(v: DMatrix<f64>) -> Result<Self> {
        let n = v.nrows();
        if n == 0 || n != v.ncols() || !n.is_multiple_of(2) {
            return Err(domain(format!("covariance matrix must be 2N x 2N, got {}x{}", n, v.ncols())));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericalHealth("non-finite covariance entry".into()));
        }
        let scale = v.amax().max(1.0);
        let asym = (&v - v.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(domain(format!("covariance matrix not symmetric (max deviation {asym:e})")));
        }
        let v = (&v + v.transpose()) * 0.5;
        Ok(CovarianceMatrix { v })
    }

    pub fn vacuum(modes: usize) -> Self {
        CovarianceMatrix { v: DMatrix::identity(2 * modes, 2 * modes) }
    }

    pub fn modes(&self) -> usize {
        self.v.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.v
    }

    pub fn variance(&self, mode: usize, quad: Quadrature) -> f64 {
        let i = 2 * mode + quad_offset(quad);
        self.v[(i, i)]
    }

    /// Reduced state of the listed modes, in the given order.
    pub fn reduced(&self, modes: &[usize]) -> Result<Self> {
        let idx = self.quadrature_indices(modes)?;
        Ok(CovarianceMatrix { v: self.v.select_rows(&idx).select_columns(&idx) })
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.v.shape() != other.v.shape() {
            return f64::INFINITY;
        }
        (&self.v - &other.v).amax()
    }

    /// Williamson invariants, sorted ascending.
    pub fn symplectic_eigenvalues(&self) -> Result<Vec<f64>> {
        let eig = SymmetricEigen::new(self.v.clone());
        let lmin = eig.eigenvalues.min();
        if !(lmin > 0.0) {
            return Err(Error::NumericalHealth(format!(
                "covariance matrix not positive definite (min eigenvalue {lmin:e})"
            )));
        }
        let sqrt_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt));
        let root = &eig.eigenvectors * sqrt_diag * eig.eigenvectors.transpose();
        let om = omega(self.modes());
        // -(V^½ Ω V^½)² is symmetric with each ν² appearing twice.
        let m = &root * om.transpose() * &self.v * &om * &root;
        let m = (&m + m.transpose()) * 0.5;
        let mut sq: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
        sq.sort_by(f64::total_cmp);
        Ok(sq.chunks(2).map(|p| (0.5 * (p[0] + p[1])).max(0.0).sqrt()).collect())
    }

    fn quadrature_indices(&self, modes: &[usize]) -> Result<Vec<usize>> {
        let n = self.modes();
        let mut idx = Vec::with_capacity(2 * modes.len());
        for (pos, &m) in modes.iter().enumerate() {
            if m >= n {
                return Err(domain(format!("mode {m} out of range for {n} modes")));
            }
            if modes[..pos].contains(&m) {
                return Err(domain(format!("mode {m} listed twice")));
            }
            idx.extend([2 * m, 2 * m + 1]);
        }
        Ok(idx)
    }

    fn check_physical(self) -> Result<Self> {
        let nus = self.symplectic_eigenvalues()?;
        match nus.iter().find(|&&nu| nu < 1.0 - PHYSICAL_TOL) {
            Some(bad) => Err(Error::NumericalHealth(format!("output symplectic eigenvalue {bad} < 1"))),
            None => Ok(self),
        }
    }
}

fn quad_offset(q: Quadrature) -> usize {
    match q {
        Quadrature::Q => 0,
        Quadrature::P => 1,
    }
}

/// Symplectic form ⊕ [[0,1],[-1,0]].
pub fn omega(modes: usize) -> DMatrix<f64> {
    let mut om = DMatrix::zeros(2 * modes, 2 * modes);
    for k in 0..modes {
        om[(2 * k, 2 * k + 1)] = 1.0;
        om[(2 * k + 1, 2 * k)] = -1.0;
    }
    om
}

/// Two-mode squeezed vacuum with local variance `nu`.
pub fn tmsv_cm(nu: f64) -> Result<CovarianceMatrix> {
    if !(nu >= 1.0) || !nu.is_finite() {
        return Err(domain(format!("nu={nu} must be finite and >= 1")));
    }
    Ok(tmsv_from_excess(nu - 1.0))
}

// Parametrized by x = ν − 1 so that √(ν²−1) = √(x(2+x)) keeps precision near vacuum.
fn tmsv_from_excess(x: f64) -> CovarianceMatrix {
    let nu = 1.0 + x;
    let s = (x * (2.0 + x)).sqrt();
    #[rustfmt::skip]
    let v = DMatrix::from_row_slice(4, 4, &[
        nu, 0.0, s, 0.0,
        0.0, nu, 0.0, -s,
        s, 0.0, nu, 0.0,
        0.0, -s, 0.0, nu,
    ]);
    CovarianceMatrix { v }
}

/// TMSV with both cross-correlations sign-flipped, the raw output of a swap.
pub fn phase_flipped_tmsv(nu: f64) -> Result<CovarianceMatrix> {
    let mut cm = tmsv_cm(nu)?;
    for (i, j) in [(0, 2), (2, 0), (1, 3), (3, 1)] {
        cm.v[(i, j)] = -cm.v[(i, j)];
    }
    Ok(cm)
}

pub fn direct_sum(a: &CovarianceMatrix, b: &CovarianceMatrix) -> CovarianceMatrix {
    let (na, nb) = (a.v.nrows(), b.v.nrows());
    let mut v = DMatrix::zeros(na + nb, na + nb);
    v.view_mut((0, 0), (na, na)).copy_from(&a.v);
    v.view_mut((na, na), (nb, nb)).copy_from(&b.v);
    CovarianceMatrix { v }
}

fn apply_symplectic(v: &CovarianceMatrix, s: &DMatrix<f64>) -> CovarianceMatrix {
    let out = s * &v.v * s.transpose();
    CovarianceMatrix { v: (&out + out.transpose()) * 0.5 }
}

fn pair_transform(v: &CovarianceMatrix, i: usize, j: usize, block: [[f64; 2]; 2]) -> Result<CovarianceMatrix> {
    let n = v.modes();
    if i >= n || j >= n || i == j {
        return Err(domain(format!("invalid mode pair ({i},{j}) for {n} modes")));
    }
    let mut s = DMatrix::identity(2 * n, 2 * n);
    for q in 0..2 {
        let (a, b) = (2 * i + q, 2 * j + q);
        s[(a, a)] = block[0][0];
        s[(a, b)] = block[0][1];
        s[(b, a)] = block[1][0];
        s[(b, b)] = block[1][1];
    }
    Ok(apply_symplectic(v, &s))
}

/// 50:50 beamsplitter: x_i → (x_i + x_j)/√2, x_j → (x_j − x_i)/√2.
pub fn balanced_bs(v: &CovarianceMatrix, modes: (usize, usize)) -> Result<CovarianceMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    pair_transform(v, modes.0, modes.1, [[h, h], [-h, h]])
}

/// Inverse of [`balanced_bs`] on the same pair.
pub fn balanced_bs_inverse(v: &CovarianceMatrix, modes: (usize, usize)) -> Result<CovarianceMatrix> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    pair_transform(v, modes.0, modes.1, [[h, -h], [h, h]])
}

/// Phase-space rotation of one mode by `theta`.
pub fn phase_rotation(v: &CovarianceMatrix, mode: usize, theta: f64) -> Result<CovarianceMatrix> {
    let n = v.modes();
    if mode >= n {
        return Err(domain(format!("mode {mode} out of range for {n} modes")));
    }
    let (s, c) = theta.sin_cos();
    let mut r = DMatrix::identity(2 * n, 2 * n);
    r[(2 * mode, 2 * mode)] = c;
    r[(2 * mode, 2 * mode + 1)] = s;
    r[(2 * mode + 1, 2 * mode)] = -s;
    r[(2 * mode + 1, 2 * mode + 1)] = c;
    Ok(apply_symplectic(v, &r))
}

/// Conditional covariance of the other modes after homodyning `mode`.
///
/// The result does not depend on the measurement outcome.
pub fn homodyne_condition(v: &CovarianceMatrix, mode: usize, quadrature: Quadrature) -> Result<CovarianceMatrix> {
    let n = v.modes();
    if mode >= n {
        return Err(domain(format!("mode {mode} out of range for {n} modes")));
    }
    if n == 1 {
        return Err(domain("cannot condition away the only mode"));
    }
    let keep: Vec<usize> = (0..2 * n).filter(|&i| i / 2 != mode).collect();
    let meas = [2 * mode, 2 * mode + 1];
    let gx = v.v.select_rows(&keep).select_columns(&keep);
    let sigma = v.v.select_rows(&keep).select_columns(&meas);
    let mut gy = v.v.select_rows(&meas).select_columns(&meas);
    let drop = 1 - quad_offset(quadrature);
    for k in 0..2 {
        gy[(drop, k)] = 0.0;
        gy[(k, drop)] = 0.0;
    }
    let eps = PINV_REL_TOL * gy.amax();
    let pinv = gy.pseudo_inverse(eps).map_err(|e| Error::NumericalHealth(format!("pseudoinverse failed: {e}")))?;
    let out = gx - &sigma * pinv * sigma.transpose();
    CovarianceMatrix::unchecked(out)?.check_physical()
}

/// Dual-homodyne swap of two two-mode states.
///
/// The inner modes (second of `left`, first of `right`) are mixed on a
/// balanced beamsplitter; q is read on one port and p on the other. Returns
/// the outer modes in order, without any local correction.
pub fn swap_pipeline(left: &CovarianceMatrix, right: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    if left.modes() != 2 || right.modes() != 2 {
        return Err(domain("swap needs two-mode inputs"));
    }
    // Order (inner_left, outer_left, outer_right, inner_right).
    let l = left.reduced(&[1, 0])?;
    let r = right.reduced(&[1, 0])?;
    let v = balanced_bs(&direct_sum(&l, &r), (0, 3))?;
    let v = homodyne_condition(&v, 0, Quadrature::Q)?;
    homodyne_condition(&v, 2, Quadrature::P)
}

/// Swap followed by a π rotation of the far mode, restoring TMSV form.
pub fn swap_corrected(left: &CovarianceMatrix, right: &CovarianceMatrix) -> Result<CovarianceMatrix> {
    phase_rotation(&swap_pipeline(left, right)?, 1, std::f64::consts::PI)
}

/// Local variance after swapping two TMSV(ν).
pub fn swapped_nu(nu: f64) -> f64 {
    (nu * nu + 1.0) / (2.0 * nu)
}

fn swap_chain_excess(nu: f64, links: u32) -> Result<f64> {
    if links == 0 {
        return Err(domain("links must be >= 1"));
    }
    tmsv_cm(nu)?;
    // ν' − 1 = (ν − 1)² / 2ν
    Ok((1..links).fold(nu - 1.0, |x, _| x * x / (2.0 * (1.0 + x))))
}

/// Local variance after `links − 1` nested swap levels.
pub fn swap_chain_nu(nu: f64, links: u32) -> Result<f64> {
    Ok(1.0 + swap_chain_excess(nu, links)?)
}

/// Closed-form chain: each level swaps two copies of the current segment.
pub fn swap_chain(nu: f64, links: u32) -> Result<CovarianceMatrix> {
    Ok(tmsv_from_excess(swap_chain_excess(nu, links)?))
}

/// The same chain evaluated by the explicit matrix pipeline at every level.
pub fn swap_chain_explicit(nu: f64, links: u32) -> Result<CovarianceMatrix> {
    if links == 0 {
        return Err(domain("links must be >= 1"));
    }
    let mut v = tmsv_cm(nu)?;
    for _ in 1..links {
        v = swap_corrected(&v, &v)?;
    }
    Ok(v)
}

/// Entropy of a thermal mode with symplectic eigenvalue `nu`.
pub fn g_function(nu: f64) -> f64 {
    let plus = 0.5 * (nu + 1.0);
    let minus = 0.5 * (nu - 1.0);
    if minus <= 0.0 {
        return 0.0;
    }
    plus * plus.log2() - minus * minus.log2()
}

/// Von Neumann entropy in ebits.
pub fn symplectic_entropy(v: &CovarianceMatrix) -> Result<f64> {
    let nus = v.symplectic_eigenvalues()?;
    if let Some(bad) = nus.iter().find(|&&nu| nu < 1.0 - PHYSICAL_TOL) {
        return Err(Error::NumericalHealth(format!("symplectic eigenvalue {bad} < 1")));
    }
    Ok(nus.iter().map(|&nu| g_function(nu)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyRate {
    /// max(raw, 0).
    pub rate: f64,
    pub raw: f64,
    pub mutual_information: f64,
    pub holevo: f64,
    pub beta: f64,
    pub direction: Direction,
}

/// Devetak–Winter rate β·I(A:B) − χ for homodyne detection on both sides.
pub fn devetak_winter_rate(v_ab: &CovarianceMatrix, inputs: KeyRateInputs) -> Result<KeyRate> {
    if v_ab.modes() != 2 {
        return Err(domain("key rate needs a two-mode state"));
    }
    let (reference, other) = match inputs.direction {
        Direction::Reverse => (1, 0),
        Direction::Direct => (0, 1),
    };
    let q = Quadrature::Q;
    let v_ref = v_ab.variance(reference, q);
    let v_ref_cond = homodyne_condition(v_ab, other, q)?.variance(0, q);
    let mutual_information = 0.5 * (v_ref / v_ref_cond).log2();
    let s_ab = symplectic_entropy(v_ab)?;
    let s_cond = symplectic_entropy(&homodyne_condition(v_ab, reference, q)?)?;
    let holevo = s_ab - s_cond;
    let raw = inputs.beta * mutual_information - holevo;
    Ok(KeyRate { rate: raw.max(0.0), raw, mutual_information, holevo, beta: inputs.beta, direction: inputs.direction })
}
