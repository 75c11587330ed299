//! Complex normal distributions `N_c(μ, Γ, C)`.
//!
//! `Γ = E[(z−μ)(z−μ)ᴴ]` is the covariance and `C = E[(z−μ)(z−μ)ᵀ]` the
//! relation matrix. Everything numeric goes through the augmented real
//! representation of `[Re z; Im z]`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, CVec, SymPsd, PSD_TOL, SYMMETRY_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexNormal {
    pub mean: CVec,
    pub covariance: CMat,
    pub relation: CMat,
}

/// Mean and variance of a real Gaussian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealGaussStats {
    pub mean: f64,
    pub variance: f64,
}

impl RealGaussStats {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonHermitianCovariance(f64),
    NonSymmetricRelation(f64),
    /// Smallest eigenvalue of `(Γ + C)/2` (real-part block).
    RealBlockNotPsd(f64),
    /// Smallest eigenvalue of `(Γ − C)/2` (imaginary-part block).
    ImagBlockNotPsd(f64),
    /// Smallest eigenvalue of the full augmented covariance.
    AugmentedNotPsd(f64),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DistributionCheck {
    pub violations: Vec<Violation>,
    /// Largest imaginary entry of Γ or C. Zero means the real and imaginary
    /// parts are uncorrelated, which the Gaussian statistics below require.
    pub imaginary_magnitude: f64,
}

impl DistributionCheck {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    nalgebra::SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

impl ComplexNormal {
    pub fn new(mean: CVec, covariance: CMat, relation: CMat) -> Result<Self> {
        let n = mean.len();
        if covariance.shape() != (n, n) || relation.shape() != (n, n) {
            return Err(Error::DimensionMismatch(format!(
                "mean has length {n}, covariance {:?}, relation {:?}",
                covariance.shape(),
                relation.shape()
            )));
        }
        Ok(ComplexNormal { mean, covariance, relation })
    }

    /// Circular law (`C = 0`).
    pub fn circular(mean: CVec, covariance: CMat) -> Result<Self> {
        let n = mean.len();
        Self::new(mean, covariance, CMat::zeros(n, n))
    }

    /// Point mass at `mean`.
    pub fn deterministic(mean: CVec) -> Self {
        let n = mean.len();
        ComplexNormal { mean, covariance: CMat::zeros(n, n), relation: CMat::zeros(n, n) }
    }

    pub fn scalar(mean: Complex64, gamma: f64, relation: Complex64) -> Self {
        ComplexNormal {
            mean: CVec::from_element(1, mean),
            covariance: CMat::from_element(1, 1, Complex64::new(gamma, 0.0)),
            relation: CMat::from_element(1, 1, relation),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Checks Hermitian Γ, symmetric C and PSD augmented blocks.
    pub fn validate(&self, tol: f64) -> DistributionCheck {
        let mut report = DistributionCheck::default();
        let scale = self.covariance.map(|c| c.norm()).norm().max(1.0);
        let herm = linalg::non_hermitian(&self.covariance);
        if herm > tol * scale {
            report.violations.push(Violation::NonHermitianCovariance(herm));
        }
        let sym = linalg::non_symmetric(&self.relation);
        if sym > tol * scale {
            report.violations.push(Violation::NonSymmetricRelation(sym));
        }
        report.imaginary_magnitude = self
            .covariance
            .iter()
            .chain(self.relation.iter())
            .map(|c| c.im.abs())
            .fold(0.0, f64::max);

        let psd_floor = -PSD_TOL * scale;
        let g = self.covariance.map(|c| c.re);
        let c = self.relation.map(|c| c.re);
        let rx = min_eigenvalue(&((&g + &c) * 0.5));
        if rx < psd_floor {
            report.violations.push(Violation::RealBlockNotPsd(rx));
        }
        let ry = min_eigenvalue(&((&g - &c) * 0.5));
        if ry < psd_floor {
            report.violations.push(Violation::ImagBlockNotPsd(ry));
        }
        let aug = min_eigenvalue(&self.augmented_matrix());
        if aug < psd_floor && rx >= psd_floor && ry >= psd_floor {
            report.violations.push(Violation::AugmentedNotPsd(aug));
        }
        report
    }

    fn augmented_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let sum = &self.covariance + &self.relation;
        let diff = &self.relation - &self.covariance;
        let mut cov = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                cov[(i, j)] = 0.5 * sum[(i, j)].re; // Γx
                cov[(i + n, j + n)] = -0.5 * diff[(i, j)].re; // Γy
                cov[(i + n, j)] = 0.5 * sum[(i, j)].im; // Γyx
                cov[(i, j + n)] = 0.5 * diff[(i, j)].im; // Γxy
            }
        }
        cov
    }

    /// Mean and covariance of `[Re z; Im z]`.
    pub fn augmented_real(&self) -> Result<(DVector<f64>, SymPsd)> {
        let mean = linalg::stack(&self.mean);
        let cov = SymPsd::new(self.augmented_matrix())?;
        Ok((mean, cov))
    }

    /// Real-part and imaginary-part covariance blocks; requires `Im Γ = Im C = 0`.
    pub fn independent_blocks(&self) -> Result<(SymPsd, SymPsd)> {
        linalg::split_blocks(&self.covariance, &self.relation)
    }

    pub fn sampler(&self) -> Result<Sampler> {
        let (mean, cov) = self.augmented_real()?;
        Ok(Sampler { mean, factor: cov.sqrt() })
    }

    /// Draws `count` samples as the columns of an `n × count` matrix.
    pub fn sample(&self, count: usize, seed: u64) -> Result<CMat> {
        let sampler = self.sampler()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = CMat::zeros(self.dim(), count);
        for k in 0..count {
            out.set_column(k, &sampler.draw(&mut rng));
        }
        Ok(out)
    }

    /// Law of `A z + b`.
    pub fn affine(&self, a: &CMat, b: &CVec) -> Result<ComplexNormal> {
        if a.ncols() != self.dim() || a.nrows() != b.len() {
            return Err(Error::DimensionMismatch(format!(
                "A is {:?}, z has dimension {}, b has length {}",
                a.shape(),
                self.dim(),
                b.len()
            )));
        }
        Ok(ComplexNormal {
            mean: a * &self.mean + b,
            covariance: a * &self.covariance * a.adjoint(),
            relation: a * &self.relation * a.transpose(),
        })
    }

    /// Statistics of `Re(cᴴ z)` for `c` distributed as `self`.
    ///
    /// The variance is computed as `Re(z)ᵀ Γx Re(z) + Im(z)ᵀ Γy Im(z)`, which
    /// equals `½ Re(zᴴ Γ z + zᴴ C z̄)` when Γ and C are real.
    pub fn re_inner_stats(&self, z: &CVec) -> Result<RealGaussStats> {
        self.check_len(z)?;
        let (gx, gy) = self.independent_blocks()?;
        let mean = self.mean.iter().zip(z.iter()).map(|(m, z)| (m.conj() * z).re).sum();
        let variance = gx.quad_form(&linalg::re(z)) + gy.quad_form(&linalg::im(z));
        Ok(RealGaussStats { mean, variance: variance.max(0.0) })
    }

    fn check_len(&self, z: &CVec) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector of length {} against distribution of dimension {}",
                z.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Variance of `Re(b)` for a scalar `b`: `(Γ_b + Re C_b)/2`.
    pub fn real_part_variance(&self) -> f64 {
        debug_assert_eq!(self.dim(), 1);
        0.5 * (self.covariance[(0, 0)].re + self.relation[(0, 0)].re)
    }
}

/// Statistics of `Re(Aᵢ z − bᵢ)` for an independent random row `Aᵢ` and
/// scalar `bᵢ`.
pub fn re_row_stats(row: &ComplexNormal, b: &ComplexNormal, z: &CVec) -> Result<RealGaussStats> {
    row.check_len(z)?;
    if b.dim() != 1 {
        return Err(Error::DimensionMismatch(format!("b must be scalar, got dimension {}", b.dim())));
    }
    let (gx, gy) = row.independent_blocks()?;
    let b_scale = b.covariance[(0, 0)].norm().max(1.0);
    let b_imag = b.covariance[(0, 0)].im.abs().max(b.relation[(0, 0)].im.abs());
    if b_imag > SYMMETRY_TOL * b_scale {
        return Err(Error::IndependenceViolated(b_imag));
    }
    let mean = row.mean.iter().zip(z.iter()).map(|(a, z)| (a * z).re).sum::<f64>() - b.mean[0].re;
    let variance =
        gx.quad_form(&linalg::re(z)) + gy.quad_form(&linalg::im(z)) + b.real_part_variance();
    Ok(RealGaussStats { mean, variance: variance.max(0.0) })
}

/// Precomputed sampler: `[Re z; Im z] = mean + F g` with `g` standard normal.
#[derive(Debug, Clone)]
pub struct Sampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl Sampler {
    pub fn dim(&self) -> usize {
        self.mean.len() / 2
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        let mut g = DVector::zeros(self.mean.len());
        let mut out = DVector::zeros(self.mean.len());
        self.draw_stacked(rng, &mut g, &mut out);
        linalg::unstack(&out)
    }

    /// Writes one draw of `[Re z; Im z]` into `out`, using `g` as scratch.
    /// Consumes the random stream exactly as [`Sampler::draw`] does.
    pub fn draw_stacked<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        g: &mut DVector<f64>,
        out: &mut DVector<f64>,
    ) {
        for v in g.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        out.copy_from(&self.mean);
        out.gemv(1.0, &self.factor, g, 1.0);
    }
}
