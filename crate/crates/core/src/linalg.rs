//! Dense complex/real matrix helpers shared by the reformulation and the
//! beamforming code.
//!
//! Complex vectors are split into `[Re; Im]` stacks whenever they cross into
//! the conic solver, which only understands real coordinates.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVec = DVector<Complex64>;
pub type CMat = DMatrix<Complex64>;

/// Relative tolerance for symmetry / Hermitian checks.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Relative tolerance (w.r.t. the Frobenius norm) for PSD checks.
pub const PSD_TOL: f64 = 1e-9;

/// A real symmetric positive semidefinite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymPsd(DMatrix<f64>);

impl SymPsd {
    /// Checks symmetry and positive semidefiniteness with the default
    /// tolerances; the stored matrix is the exact symmetrization.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let tol = PSD_TOL * m.norm();
        let sym = symmetrize(&m)?;
        let eig = SymmetricEigen::new(sym.clone());
        let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -tol {
            return Err(Error::NotPsd(min));
        }
        Ok(SymPsd(sym))
    }

    pub fn zeros(n: usize) -> Self {
        SymPsd(DMatrix::zeros(n, n))
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Symmetric square root, see [`psd_sqrt`].
    pub fn sqrt(&self) -> DMatrix<f64> {
        psd_sqrt(&self.0, PSD_TOL * self.0.norm()).expect("validated on construction")
    }

    /// Evaluates `vᵀ S v`.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        v.dot(&(&self.0 * v))
    }
}

/// Largest absolute entry of `m - mᵀ`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Largest absolute entry of `m - mᴴ`.
pub fn non_hermitian(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest absolute entry of `m - mᵀ` for a complex matrix.
pub fn non_symmetric(m: &CMat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).norm());
        }
    }
    worst
}

fn symmetrize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * m.norm().max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Symmetric square root `F` of a PSD matrix, so that `Fᵀ F = S`.
///
/// Eigenvalues in `[-psd_tol, 0)` are clamped to zero, which lets singular
/// blocks (explicit zero rows/columns) factor without trouble.
pub fn psd_sqrt(s: &DMatrix<f64>, psd_tol: f64) -> Result<DMatrix<f64>> {
    let sym = symmetrize(s)?;
    let n = sym.nrows();
    if n == 0 {
        return Ok(sym);
    }
    let eig = SymmetricEigen::new(sym);
    let mut roots = DVector::zeros(n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < -psd_tol {
            return Err(Error::NotPsd(lambda));
        }
        roots[k] = lambda.max(0.0).sqrt();
    }
    let q = &eig.eigenvectors;
    let scaled = q * DMatrix::from_diagonal(&roots);
    Ok(&scaled * q.transpose())
}

/// Splits a covariance/relation pair with real entries into the covariance
/// blocks of the real and imaginary parts: `((Γ + C)/2, (Γ − C)/2)`.
pub fn split_blocks(gamma: &CMat, relation: &CMat) -> Result<(SymPsd, SymPsd)> {
    if gamma.shape() != relation.shape() || !gamma.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "covariance {:?} vs relation {:?}",
            gamma.shape(),
            relation.shape()
        )));
    }
    let scale = gamma.map(|c| c.norm()).norm().max(relation.map(|c| c.norm()).norm());
    let imag = gamma
        .iter()
        .chain(relation.iter())
        .map(|c| c.im.abs())
        .fold(0.0_f64, f64::max);
    if imag > SYMMETRY_TOL * scale.max(1.0) {
        return Err(Error::IndependenceViolated(imag));
    }
    let g = gamma.map(|c| c.re);
    let c = relation.map(|c| c.re);
    let gx = SymPsd::new((&g + &c) * 0.5)?;
    let gy = SymPsd::new((&g - &c) * 0.5)?;
    Ok((gx, gy))
}

/// Real parts of `v`.
pub fn re(v: &CVec) -> DVector<f64> {
    v.map(|c| c.re)
}

/// Imaginary parts of `v`.
pub fn im(v: &CVec) -> DVector<f64> {
    v.map(|c| c.im)
}

/// Stacks `[Re v; Im v]`.
pub fn stack(v: &CVec) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |k, _| if k < n { v[k].re } else { v[k - n].im })
}

/// Inverse of [`stack`].
pub fn unstack(v: &DVector<f64>) -> CVec {
    let n = v.len() / 2;
    CVec::from_fn(n, |k, _| Complex64::new(v[k], v[k + n]))
}

/// Real embedding `[[Re M, −Im M], [Im M, Re M]]`; for Hermitian `M` this
/// satisfies `wᴴ M w = stack(w)ᵀ E stack(w)`.
pub fn real_embedding(m: &CMat) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let v = m[(i, j)];
            out[(i, j)] = v.re;
            out[(i + r, j + c)] = v.re;
            out[(i, j + c)] = -v.im;
            out[(i + r, j)] = v.im;
        }
    }
    out
}

/// Block-diagonal assembly of square blocks.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(n, n);
    let mut at = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((at, at), (k, k)).copy_from(b);
        at += k;
    }
    out
}

/// Lifts a real matrix into a complex one.
pub fn complexify(m: &DMatrix<f64>) -> CMat {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Solves `R x = b` for Hermitian positive definite `R`, adding a ridge of
/// `ridge · tr(R)/n` to the diagonal.
pub fn solve_hpd(r: &CMat, b: &CVec, ridge: f64) -> Result<CVec> {
    let n = r.nrows();
    let trace: f64 = (0..n).map(|i| r[(i, i)].re).sum();
    let mut loaded = r.clone();
    let eps = ridge * trace / n.max(1) as f64;
    for i in 0..n {
        loaded[(i, i)] += Complex64::new(eps, 0.0);
    }
    let chol = loaded.cholesky().ok_or(Error::SingularMatrix)?;
    Ok(chol.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn reconstruct(f: &DMatrix<f64>) -> DMatrix<f64> {
        f.transpose() * f
    }

    #[test]
    fn sqrt_of_identity_is_identity() {
        let f = psd_sqrt(&DMatrix::identity(3, 3), 1e-12).unwrap();
        assert_relative_eq!(f, DMatrix::identity(3, 3), epsilon = 1e-14);
    }

    #[test]
    fn sqrt_of_diagonal() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0]));
        let f = psd_sqrt(&s, 1e-12).unwrap();
        let expected = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        assert_relative_eq!(f, expected, epsilon = 1e-14);
    }

    #[test]
    fn sqrt_reconstructs_gram_matrix() {
        let b = DMatrix::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.7 + 0.1 * j as f64);
        let s = b.transpose() * &b;
        let f = psd_sqrt(&s, PSD_TOL * s.norm()).unwrap();
        assert!((reconstruct(&f) - &s).norm() <= 1e-10 * s.norm());
    }

    #[test]
    fn sqrt_clamps_tiny_negative_eigenvalues() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1e-13]));
        let f = psd_sqrt(&s, 1e-12).unwrap();
        assert_eq!(f[(1, 1)], 0.0);
    }

    #[test]
    fn sqrt_rejects_indefinite_and_asymmetric() {
        let s = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -0.5]));
        assert!(matches!(psd_sqrt(&s, 1e-9), Err(Error::NotPsd(_))));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(psd_sqrt(&a, 1e-9), Err(Error::NotSymmetric(_))));
    }

    #[test]
    fn split_circular_evenly() {
        let g = complexify(&(DMatrix::identity(3, 3) * 2.0));
        let c = CMat::zeros(3, 3);
        let (gx, gy) = split_blocks(&g, &c).unwrap();
        assert_relative_eq!(gx.as_matrix(), &DMatrix::identity(3, 3));
        assert_relative_eq!(gy.as_matrix(), &DMatrix::identity(3, 3));
    }

    #[test]
    fn split_scalar_and_degenerate() {
        let g = CMat::from_element(1, 1, Complex64::new(3.0, 0.0));
        let c = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
        let (gx, gy) = split_blocks(&g, &c).unwrap();
        assert_eq!(gx.as_matrix()[(0, 0)], 2.0);
        assert_eq!(gy.as_matrix()[(0, 0)], 1.0);

        let eye = complexify(&DMatrix::identity(2, 2));
        let (gx, gy) = split_blocks(&eye, &eye).unwrap();
        assert_relative_eq!(gx.as_matrix(), &DMatrix::identity(2, 2));
        assert_eq!(gy.as_matrix().norm(), 0.0);
    }

    #[test]
    fn split_rejects_imaginary_parts() {
        let mut g = complexify(&DMatrix::identity(2, 2));
        g[(0, 1)] = Complex64::new(0.0, 0.2);
        g[(1, 0)] = Complex64::new(0.0, -0.2);
        let c = CMat::zeros(2, 2);
        assert!(matches!(split_blocks(&g, &c), Err(Error::IndependenceViolated(_))));
    }

    #[test]
    fn embedding_matches_hermitian_form() {
        let r = CMat::from_fn(3, 3, |i, j| {
            if i == j {
                Complex64::new(2.0 + i as f64, 0.0)
            } else if i < j {
                Complex64::new(0.3 * (i + j) as f64, 0.2 * (j - i) as f64)
            } else {
                Complex64::new(0.3 * (i + j) as f64, -0.2 * (i - j) as f64)
            }
        });
        let w = CVec::from_vec(vec![
            Complex64::new(0.4, -1.0),
            Complex64::new(1.5, 0.2),
            Complex64::new(-0.7, 0.9),
        ]);
        let direct = (w.adjoint() * &r * &w)[(0, 0)];
        let e = real_embedding(&r);
        let v = stack(&w);
        assert_relative_eq!(direct.re, v.dot(&(&e * &v)), epsilon = 1e-12);
        assert!(direct.im.abs() < 1e-12);
        assert_eq!(unstack(&v), w);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_then_recombine_is_exact(
                entries in proptest::collection::vec(-2.0f64..2.0, 18)
            ) {
                // Γ = BᵀB + DᵀD, C = BᵀB − DᵀD gives PSD blocks.
                let b = DMatrix::from_row_slice(3, 3, &entries[..9]);
                let d = DMatrix::from_row_slice(3, 3, &entries[9..]);
                let px = b.transpose() * &b;
                let py = d.transpose() * &d;
                let g = complexify(&(&px + &py));
                let c = complexify(&(&px - &py));
                let (gx, gy) = split_blocks(&g, &c).unwrap();
                let sum = gx.as_matrix() + gy.as_matrix();
                let diff = gx.as_matrix() - gy.as_matrix();
                prop_assert!((sum - g.map(|x| x.re)).norm() <= 1e-12 * (1.0 + g.norm()));
                prop_assert!((diff - c.map(|x| x.re)).norm() <= 1e-12 * (1.0 + g.norm()));
            }

            #[test]
            fn sqrt_reconstruction_is_stable(
                entries in proptest::collection::vec(-3.0f64..3.0, 16)
            ) {
                let b = DMatrix::from_row_slice(4, 4, &entries);
                let s = b.transpose() * &b;
                let f = psd_sqrt(&s, PSD_TOL * s.norm()).unwrap();
                let s2 = f.transpose() * &f;
                let f2 = psd_sqrt(&s2, PSD_TOL * s2.norm()).unwrap();
                prop_assert!((f2.transpose() * &f2 - &s2).norm() <= 1e-10 * s2.norm().max(1e-300));
            }
        }
    }
}
