//! Independent oracles shared by the integration tests. Nothing here calls
//! the statistics, quantile or sampling code under test.

#![allow(dead_code)]

use cccp::cnormal::ComplexNormal;
use cccp::linalg::{CMat, CVec};
use cccp::reformulate::{IndividualCccp, JointCccp, RandomRow};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `Φ(x)` from `erfc`.
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `Φ⁻¹(u)` by bisection, comparing upper tails for `u > ½`.
pub fn quantile(u: f64) -> f64 {
    assert!(u > 0.0 && u < 1.0, "quantile of {u}");
    if u < 0.5 {
        return -quantile(1.0 - u);
    }
    let tail = 1.0 - u;
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 0.5 * libm::erfc(mid / std::f64::consts::SQRT_2) > tail {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Real and imaginary covariance blocks `((Γ + C)/2, (Γ − C)/2)`.
pub fn blocks(law: &ComplexNormal) -> (DMatrix<f64>, DMatrix<f64>) {
    let g = law.covariance.map(|v| v.re);
    let r = law.relation.map(|v| v.re);
    ((&g + &r) * 0.5, (&g - &r) * 0.5)
}

fn quad(m: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(m * v))
}

fn parts(z: &CVec) -> (DVector<f64>, DVector<f64>) {
    (z.map(|v| v.re), z.map(|v| v.im))
}

/// Mean and variance of `Re(cᴴz)`.
pub fn inner_stats(law: &ComplexNormal, z: &CVec) -> (f64, f64) {
    let (gx, gy) = blocks(law);
    let (x, y) = parts(z);
    let mean = law.mean.iter().zip(z.iter()).map(|(m, z)| m.re * z.re + m.im * z.im).sum();
    (mean, quad(&gx, &x) + quad(&gy, &y))
}

/// Mean and variance of `Re(A z − b)`.
pub fn row_stats(row: &RandomRow, z: &CVec) -> (f64, f64) {
    let (gx, gy) = blocks(&row.a);
    let (x, y) = parts(z);
    let mean: f64 = row.a.mean.iter().zip(z.iter()).map(|(a, z)| a.re * z.re - a.im * z.im).sum();
    let vb = 0.5 * (row.b.covariance[(0, 0)].re + row.b.relation[(0, 0)].re);
    (mean - row.b.mean[0].re, quad(&gx, &x) + quad(&gy, &y) + vb)
}

/// `μ + Φ⁻¹(p)σ` of a row at `z`; the row holds with probability `p` iff `≤ 0`.
pub fn row_margin(row: &RandomRow, z: &CVec, p: f64) -> f64 {
    let (m, v) = row_stats(row, z);
    m + quantile(p) * v.max(0.0).sqrt()
}

pub fn objective(prob: &IndividualCccp, z: &CVec) -> f64 {
    let (m, v) = inner_stats(&prob.objective, z);
    prob.q1 * m + prob.q2 * v.max(0.0).sqrt()
}

/// Symmetric square root with clamped eigenvalues.
pub fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new((m + m.transpose()) * 0.5);
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| l.max(0.0).sqrt()));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Draws `x ~ N(mean, F Fᵀ)` with `F` a factor.
pub struct Gauss {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
}

impl Gauss {
    pub fn new(mean: DVector<f64>, factor: DMatrix<f64>) -> Self {
        Gauss { mean, factor }
    }

    /// `[Re; Im]` of a complex law with real Γ and C.
    pub fn of(law: &ComplexNormal) -> Self {
        let n = law.dim();
        let (gx, gy) = blocks(law);
        let mut f = DMatrix::zeros(2 * n, 2 * n);
        f.view_mut((0, 0), (n, n)).copy_from(&sqrt_psd(&gx));
        f.view_mut((n, n), (n, n)).copy_from(&sqrt_psd(&gy));
        let mean = DVector::from_iterator(2 * n, law.mean.iter().map(|v| v.re).chain(law.mean.iter().map(|v| v.im)));
        Gauss { mean, factor: f }
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> DVector<f64> {
        let g = DVector::from_fn(self.factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.mean + &self.factor * g
    }
}

/// Empirical frequency of `Re(A z − b) ≤ 0` over `count` joint draws of
/// every row, and of each row separately.
pub fn empirical(rows: &[RandomRow], z: &CVec, count: usize, seed: u64) -> (Vec<f64>, f64) {
    let n = z.len();
    let samplers: Vec<(Gauss, Gauss)> = rows.iter().map(|r| (Gauss::of(&r.a), Gauss::of(&r.b))).collect();
    let mut r = rng(seed);
    let mut hits = vec![0usize; rows.len()];
    let mut all = 0usize;
    for _ in 0..count {
        let mut ok = true;
        for (k, (sa, sb)) in samplers.iter().enumerate() {
            let a = sa.draw(&mut r);
            let b = sb.draw(&mut r);
            let val: f64 = (0..n).map(|j| a[j] * z[j].re - a[n + j] * z[j].im).sum::<f64>() - b[0];
            if val <= 0.0 {
                hits[k] += 1;
            } else {
                ok = false;
            }
        }
        all += ok as usize;
    }
    (hits.iter().map(|&h| h as f64 / count as f64).collect(), all as f64 / count as f64)
}

pub fn circular_row(mean: &[Complex64], gamma: f64, mu_b: f64, var_b: f64) -> RandomRow {
    let n = mean.len();
    RandomRow::new(
        ComplexNormal::circular(CVec::from_vec(mean.to_vec()), CMat::identity(n, n) * c(gamma, 0.0)).unwrap(),
        ComplexNormal::scalar(c(mu_b, 0.0), 2.0 * var_b, c(0.0, 0.0)),
    )
    .unwrap()
}

/// A bounded orthant-constrained instance: rows with positive real and
/// negative imaginary means, objective with negative means.
pub fn random_orthant_individual(n: usize, rows: usize, seed: u64) -> IndividualCccp {
    let mut r = rng(seed);
    let mut u = |lo: f64, hi: f64| r.random_range(lo..hi);
    let mean: Vec<Complex64> = (0..n).map(|_| c(-u(0.3, 1.2), -u(0.2, 0.8))).collect();
    let objective =
        ComplexNormal::circular(CVec::from_vec(mean), CMat::identity(n, n) * c(u(0.0, 0.3), 0.0)).unwrap();
    let mut out_rows = Vec::new();
    let mut levels = Vec::new();
    for _ in 0..rows {
        let a: Vec<Complex64> = (0..n).map(|_| c(u(0.3, 1.2), -u(0.1, 0.6))).collect();
        out_rows.push(circular_row(&a, u(0.05, 0.4), u(1.0, 2.5), u(0.0, 0.2)));
        levels.push(u(0.8, 0.99));
    }
    IndividualCccp { objective, q1: 1.0, q2: u(0.0, 1.0), rows: out_rows, levels, nonneg_z: true }
}

pub fn joint_from(ind: IndividualCccp, p: f64, theta: f64) -> JointCccp {
    JointCccp {
        objective: ind.objective,
        q1: ind.q1,
        q2: ind.q2,
        rows: ind.rows,
        p,
        theta,
        nonneg_z: ind.nonneg_z,
    }
}
