use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Entrywise tolerance on `a[i][j] - conj(a[j][i])`, relative to the largest
/// entry magnitude (floored at 1).
const HERMITIAN_TOL: f64 = 1e-12;
/// PSD check: eigenvalues must be at least `-PSD_TOL * trace`.
const PSD_TOL: f64 = 1e-10;
/// Eigenvalues closer than this (relative to the spectral radius) are ties.
const TIE_TOL: f64 = 1e-10;

/// Dense complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix(CMatrix);

/// Eigendecomposition `A = U diag(values) U^H` with eigenvalues descending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
}

impl HermitianEigen {
    pub fn reconstruct(&self) -> HermitianMatrix {
        let mut scaled = self.vectors.clone();
        for (j, &l) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(l);
        }
        HermitianMatrix::from_symmetrized(&scaled * self.vectors.adjoint())
    }

    /// Rebuild with eigenvalues mapped through `f`.
    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        HermitianEigen {
            values: self.values.iter().map(|&l| f(l)).collect(),
            vectors: self.vectors.clone(),
        }
        .reconstruct()
    }

    /// Number of eigenvalues above `rel_tol * max(values)`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let top = self.values.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return 0;
        }
        self.values.iter().filter(|&&l| l > rel_tol * top).count()
    }
}

fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

impl HermitianMatrix {
    /// Validates that `m` is square and Hermitian, then stores its exact
    /// Hermitian part.
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("matrix has non-finite entries".into()));
        }
        let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
        let asym = max_asymmetry(&m);
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian(asym));
        }
        Ok(Self::from_symmetrized(m))
    }

    /// Hermitian part `(m + m^H) / 2` of a square matrix known to be
    /// Hermitian up to rounding.
    pub fn from_symmetrized(m: CMatrix) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "matrix must be square");
        let adj = m.adjoint();
        Self((m + adj) * C64::new(0.5, 0.0))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n, n))
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self(CMatrix::identity(n, n) * C64::new(s, 0.0))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// `v v^H` scaled by `s`.
    pub fn outer(v: &CVector, s: f64) -> Self {
        Self::from_symmetrized(v * v.adjoint() * C64::new(s, 0.0))
    }

    /// Congruence `B A B^H` (B need not be square).
    pub fn congruence(&self, b: &CMatrix) -> Self {
        Self::from_symmetrized(b * &self.0 * b.adjoint())
    }

    /// Gram matrix `X X^H / scale`.
    pub fn gram(x: &CMatrix, scale: f64) -> Self {
        Self::from_symmetrized(x * x.adjoint() * C64::new(1.0 / scale, 0.0))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CMatrix {
        self.0
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.0[(i, i)].re).sum()
    }

    /// Entrywise complex conjugate, which for Hermitian matrices is the transpose.
    pub fn transpose(&self) -> Self {
        Self(self.0.map(|z| z.conj()))
    }

    /// Real inner product `Re tr(A B)`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn eig(&self) -> HermitianEigen {
        decompose(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eig().values.last().copied().unwrap_or(0.0)
    }

    pub fn is_psd(&self) -> bool {
        self.check_psd().is_ok()
    }

    pub fn check_psd(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        let tr = self.trace().abs().max(f64::MIN_POSITIVE);
        if min < -PSD_TOL * tr {
            Err(Error::NotPsd(min))
        } else {
            Ok(())
        }
    }

    /// Principal square root, with negative eigenvalues clipped to zero.
    pub fn psd_sqrt(&self) -> Self {
        self.eig().map_values(|l| l.max(0.0).sqrt())
    }

    /// Inverse via Cholesky; `None` when the matrix is not numerically
    /// positive definite.
    pub fn inverse_pd(&self) -> Option<Self> {
        let chol = Cholesky::new(self.0.clone())?;
        let inv = chol.inverse();
        if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return None;
        }
        Some(Self::from_symmetrized(inv))
    }

    /// `ln det` via Cholesky; `None` when not positive definite.
    pub fn ln_det_pd(&self) -> Option<f64> {
        let chol = Cholesky::new(self.0.clone())?;
        let l = chol.l_dirty();
        Some((0..self.dim()).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(&self.0 * C64::new(s, 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl Add for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn add(self, rhs: Self) -> HermitianMatrix {
        HermitianMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn sub(self, rhs: Self) -> HermitianMatrix {
        HermitianMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &HermitianMatrix {
    type Output = HermitianMatrix;
    fn mul(self, rhs: f64) -> HermitianMatrix {
        self.scale(rhs)
    }
}

/// Eigendecomposition of a Hermitian matrix given as a raw complex matrix.
///
/// Eigenvalues are returned in descending order. Each eigenvector is scaled so
/// that its first non-negligible entry is real and positive; eigenvectors of
/// tied eigenvalues are ordered lexicographically (real part, then imaginary
/// part, entry by entry).
pub fn eig_hermitian(a: &CMatrix) -> Result<HermitianEigen> {
    let h = HermitianMatrix::new(a.clone())?;
    Ok(h.eig())
}

fn decompose(m: &CMatrix) -> HermitianEigen {
    let n = m.nrows();
    if n == 0 {
        return HermitianEigen {
            values: Vec::new(),
            vectors: CMatrix::zeros(0, 0),
        };
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut cols: Vec<(f64, CVector)> = (0..n)
        .map(|j| {
            let mut v: CVector = eig.eigenvectors.column(j).into_owned();
            normalize_phase(&mut v);
            (eig.eigenvalues[j], v)
        })
        .collect();

    cols.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(Ordering::Equal));
    let radius = cols.iter().map(|c| c.0.abs()).fold(1.0, f64::max);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (cols[start].0 - cols[end].0).abs() <= TIE_TOL * radius {
            end += 1;
        }
        if end - start > 1 {
            cols[start..end].sort_by(|a, b| lexicographic(&a.1, &b.1));
        }
        start = end;
    }

    let values = cols.iter().map(|c| c.0).collect();
    let vectors = CMatrix::from_fn(n, n, |i, j| cols[j].1[i]);
    HermitianEigen { values, vectors }
}

fn normalize_phase(v: &mut CVector) {
    let norm = v.norm();
    if norm == 0.0 {
        return;
    }
    let threshold = 1e-10 * norm;
    if let Some(lead) = v.iter().find(|z| z.norm() > threshold).copied() {
        let phase = lead.conj() / lead.norm();
        v.scale_mut(1.0 / norm);
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

fn lexicographic(a: &CVector, b: &CVector) -> Ordering {
    const EPS: f64 = 1e-12;
    for (x, y) in a.iter().zip(b.iter()) {
        for (p, q) in [(x.re, y.re), (x.im, y.im)] {
            if (p - q).abs() > EPS {
                return p.partial_cmp(&q).unwrap_or(Ordering::Equal);
            }
        }
    }
    Ordering::Equal
}
