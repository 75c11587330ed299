//! Monte-Carlo estimates of chance-constraint satisfaction.
//!
//! Samples are drawn in blocks of [`BLOCK_SIZE`]; block `k` uses its own
//! stream seeded with `seed + k`, so results do not depend on how blocks
//! are scheduled across threads. Within a sample the rows are drawn in
//! order, `Aᵢ` before `bᵢ`.

use nalgebra::DVector;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cnormal::{ComplexNormal, Sampler};
use crate::error::{Error, Result};
use crate::linalg::{self, CVec};
use crate::reformulate::{IndividualCccp, JointCccp, RandomRow};

pub const BLOCK_SIZE: usize = 8192;
pub const MIN_SAMPLES: usize = 1000;
/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub probability: f64,
    /// `1.96·√(p̂(1−p̂)/count)`.
    pub half_width: f64,
    pub target: f64,
    /// `p̂ ≥ target − 3·half_width`.
    pub pass: bool,
}

impl Estimate {
    fn new(hits: u64, count: usize, target: f64) -> Self {
        let probability = hits as f64 / count as f64;
        let half_width = Z95 * (probability * (1.0 - probability) / count as f64).sqrt();
        Estimate { probability, half_width, target, pass: probability >= target - 3.0 * half_width }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: Vec<Estimate>,
    pub joint: Option<Estimate>,
    pub samples: usize,
    pub seed: u64,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().chain(&self.joint).all(|e| e.pass)
    }
}

struct RowSampler {
    a: Sampler,
    b: Sampler,
    /// `[Re z; −Im z]`, so that `Re(a z) = ⟨[Re a; Im a], zz⟩`.
    zz: DVector<f64>,
}

fn row_samplers(rows: &[RandomRow], z: &CVec) -> Result<Vec<RowSampler>> {
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            if row.a.dim() != z.len() {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has dimension {}, z has {}",
                    row.a.dim(),
                    z.len()
                )));
            }
            let mut zz = linalg::stack(z);
            zz.rows_mut(z.len(), z.len()).neg_mut();
            Ok(RowSampler { a: row.a.sampler()?, b: row.b.sampler()?, zz })
        })
        .collect()
}

fn check_z(z: &CVec) -> Result<()> {
    if z.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Domain("candidate z has non-finite entries".into()))
    }
}

fn block_ranges(count: usize) -> Vec<(u64, usize)> {
    (0..count.div_ceil(BLOCK_SIZE))
        .map(|k| (k as u64, BLOCK_SIZE.min(count - k * BLOCK_SIZE)))
        .collect()
}

/// Per-row and joint hit counts of `Re(Aᵢ z − bᵢ) ≤ 0`.
fn count_hits(rows: &[RandomRow], z: &CVec, count: usize, seed: u64) -> Result<(Vec<u64>, u64)> {
    check_z(z)?;
    if count < MIN_SAMPLES {
        return Err(Error::Domain(format!("need at least {MIN_SAMPLES} samples, got {count}")));
    }
    let samplers = row_samplers(rows, z)?;
    let n2 = 2 * z.len();
    let per_block: Vec<(Vec<u64>, u64)> = block_ranges(count)
        .into_par_iter()
        .map(|(k, len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k));
            let mut g = DVector::zeros(n2);
            let mut a = DVector::zeros(n2);
            let mut g1 = DVector::zeros(2);
            let mut b = DVector::zeros(2);
            let mut hits = vec![0u64; samplers.len()];
            let mut joint = 0u64;
            for _ in 0..len {
                let mut all = true;
                for (h, s) in hits.iter_mut().zip(&samplers) {
                    s.a.draw_stacked(&mut rng, &mut g, &mut a);
                    s.b.draw_stacked(&mut rng, &mut g1, &mut b);
                    if a.dot(&s.zz) - b[0] <= 0.0 {
                        *h += 1;
                    } else {
                        all = false;
                    }
                }
                joint += u64::from(all);
            }
            (hits, joint)
        })
        .collect();
    let mut hits = vec![0u64; rows.len()];
    let mut joint = 0;
    for (h, j) in per_block {
        for (t, v) in hits.iter_mut().zip(h) {
            *t += v;
        }
        joint += j;
    }
    Ok((hits, joint))
}

/// Empirical `P[Re(Aᵢ z − bᵢ) ≤ 0]` for each row against its target.
pub fn estimate_rows(
    rows: &[RandomRow],
    targets: &[f64],
    z: &CVec,
    count: usize,
    seed: u64,
) -> Result<ValidationReport> {
    if targets.len() != rows.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} rows but {} targets",
            rows.len(),
            targets.len()
        )));
    }
    let (hits, _) = count_hits(rows, z, count, seed)?;
    Ok(ValidationReport {
        rows: hits.iter().zip(targets).map(|(&h, &t)| Estimate::new(h, count, t)).collect(),
        joint: None,
        samples: count,
        seed,
    })
}

pub fn estimate_individual(prob: &IndividualCccp, z: &CVec, count: usize, seed: u64) -> Result<ValidationReport> {
    estimate_rows(&prob.rows, &prob.levels, z, count, seed)
}

/// Joint and marginal estimates; rows are sampled independently, which
/// matches the copula only for `θ = 1`. Marginal targets are `p`.
pub fn estimate_joint(prob: &JointCccp, z: &CVec, count: usize, seed: u64) -> Result<ValidationReport> {
    if prob.theta != 1.0 {
        return Err(Error::UnsupportedDependence(prob.theta));
    }
    let (hits, joint) = count_hits(&prob.rows, z, count, seed)?;
    Ok(ValidationReport {
        rows: hits.iter().map(|&h| Estimate::new(h, count, prob.p)).collect(),
        joint: Some(Estimate::new(joint, count, prob.p)),
        samples: count,
        seed,
    })
}

/// Sample mean and unbiased sample variance of `Re(cᴴ z)`.
pub fn objective_stats(c: &ComplexNormal, z: &CVec, count: usize, seed: u64) -> Result<(f64, f64)> {
    check_z(z)?;
    if c.dim() != z.len() {
        return Err(Error::DimensionMismatch(format!(
            "objective has dimension {}, z has {}",
            c.dim(),
            z.len()
        )));
    }
    if count < 2 {
        return Err(Error::Domain(format!("need at least two samples, got {count}")));
    }
    let sampler = c.sampler()?;
    // Re(c̄ z) = ⟨[Re c; Im c], [Re z; Im z]⟩
    let zz = linalg::stack(z);
    let blocks: Vec<(usize, f64, f64)> = block_ranges(count)
        .into_par_iter()
        .map(|(k, len)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k));
            let mut g = DVector::zeros(zz.len());
            let mut x = DVector::zeros(zz.len());
            let (mut mean, mut m2) = (0.0, 0.0);
            for i in 0..len {
                sampler.draw_stacked(&mut rng, &mut g, &mut x);
                let v = x.dot(&zz);
                let d = v - mean;
                mean += d / (i + 1) as f64;
                m2 += d * (v - mean);
            }
            (len, mean, m2)
        })
        .collect();
    // Chan et al. pairwise merge, in block order
    let (mut n, mut mean, mut m2) = (0usize, 0.0, 0.0);
    for (nb, mb, m2b) in blocks {
        let total = n + nb;
        let d = mb - mean;
        mean += d * nb as f64 / total as f64;
        m2 += m2b + d * d * (n as f64) * (nb as f64) / total as f64;
        n = total;
    }
    Ok((mean, m2 / (n - 1) as f64))
}

#[cfg(test)]
mod tests {
    use num_complex::Complex64;

    use super::*;
    use crate::linalg::CMat;
    use crate::normal::normal_quantile;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn det(v: Complex64) -> ComplexNormal {
        ComplexNormal::deterministic(CVec::from_element(1, v))
    }

    /// Row `Re(a z − b) ≤ 0` with `a ~ N_c(1, 2σ², 0)` at `z = 1` and
    /// `b = q σ`, so the probability is exactly `Φ(q)`.
    fn analytic_row(p: f64) -> RandomRow {
        let sigma = 0.7;
        let q = normal_quantile(p).unwrap();
        RandomRow::new(
            ComplexNormal::scalar(c(0.0, 0.0), 2.0 * sigma * sigma, 0.0.into()),
            det(c(q * sigma, 0.0)),
        )
        .unwrap()
    }

    #[test]
    fn deterministic_satisfied_row_is_certain() {
        let row = RandomRow::new(det(c(1.0, 0.0)), det(c(2.0, 0.0))).unwrap();
        let z = CVec::from_element(1, c(1.5, 3.0));
        let r = estimate_rows(&[row], &[0.9], &z, 5000, 1).unwrap();
        assert_eq!(r.rows[0].probability, 1.0);
        assert_eq!(r.rows[0].half_width, 0.0);
    }

    #[test]
    fn analytic_level_is_recovered() {
        let z = CVec::from_element(1, c(1.0, 0.0));
        let r = estimate_rows(&[analytic_row(0.95)], &[0.95], &z, 100_000, 7).unwrap();
        let e = &r.rows[0];
        assert!((e.probability - 0.95).abs() <= 3.0 * e.half_width, "{e:?}");
        assert!(e.pass);
    }

    #[test]
    fn reports_are_seed_deterministic() {
        let z = CVec::from_element(1, c(1.0, 0.0));
        let a = estimate_rows(&[analytic_row(0.9)], &[0.9], &z, 20_000, 3).unwrap();
        let b = estimate_rows(&[analytic_row(0.9)], &[0.9], &z, 20_000, 3).unwrap();
        let d = estimate_rows(&[analytic_row(0.9)], &[0.9], &z, 20_000, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, d);
    }

    fn joint_of(rows: Vec<RandomRow>, p: f64, theta: f64) -> JointCccp {
        JointCccp {
            objective: ComplexNormal::deterministic(CVec::from_element(1, c(1.0, 0.0))),
            q1: 1.0,
            q2: 0.0,
            rows,
            p,
            theta,
            nonneg_z: true,
        }
    }

    #[test]
    fn single_row_joint_equals_individual() {
        let z = CVec::from_element(1, c(1.0, 0.0));
        let prob = joint_of(vec![analytic_row(0.9)], 0.9, 1.0);
        let j = estimate_joint(&prob, &z, 30_000, 11).unwrap();
        let i = estimate_individual(&prob.as_individual(), &z, 30_000, 11).unwrap();
        assert_eq!(j.joint.as_ref().unwrap().probability, i.rows[0].probability);
    }

    #[test]
    fn independent_rows_multiply() {
        let z = CVec::from_element(1, c(1.0, 0.0));
        let prob = joint_of(vec![analytic_row(0.9), analytic_row(0.9)], 0.81, 1.0);
        let r = estimate_joint(&prob, &z, 100_000, 5).unwrap();
        let j = r.joint.unwrap();
        assert!((j.probability - 0.81).abs() <= 3.0 * j.half_width, "{j:?}");
    }

    #[test]
    fn dependent_rows_are_refused() {
        let z = CVec::from_element(1, c(1.0, 0.0));
        let prob = joint_of(vec![analytic_row(0.9)], 0.9, 2.0);
        assert_eq!(estimate_joint(&prob, &z, 5000, 1).unwrap_err(), Error::UnsupportedDependence(2.0));
    }

    #[test]
    fn too_few_samples() {
        let z = CVec::from_element(1, c(1.0, 0.0));
        assert!(estimate_rows(&[analytic_row(0.9)], &[0.9], &z, 999, 1).is_err());
    }

    #[test]
    fn objective_stats_at_zero_and_unit() {
        let d = ComplexNormal::circular(CVec::from_element(1, c(0.5, -0.2)), CMat::from_element(1, 1, c(2.0, 0.0)))
            .unwrap();
        let (m, v) = objective_stats(&d, &CVec::zeros(1), 10_000, 1).unwrap();
        assert_eq!((m, v), (0.0, 0.0));
        let (m, v) = objective_stats(&d, &CVec::from_element(1, c(1.0, 0.0)), 200_000, 2).unwrap();
        let exact = d.re_inner_stats(&CVec::from_element(1, c(1.0, 0.0))).unwrap();
        assert!((v - 1.0).abs() < 0.01, "{v}");
        assert!((m - exact.mean).abs() < 5.0 * (exact.variance / 200_000.0).sqrt());
    }
}
