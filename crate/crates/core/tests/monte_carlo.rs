mod common;

use cccp::beamform::{mismatch_row, sample_covariance, snapshots, solve_mvdr_cccp, BeamformScenario, ConstantMode};
use cccp::cnormal::ComplexNormal;
use cccp::linalg::{CMat, CVec};
use cccp::reformulate::RandomRow;
use cccp::socp::SolverConfig;
use cccp::validate::{estimate_rows, objective_stats};
use common::c;

/// Sample mean, covariance and relation of the columns of `x`.
fn moments(x: &CMat) -> (CVec, CMat, CMat) {
    let k = x.ncols() as f64;
    let mean = x.column_mean();
    let d = CMat::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] - mean[i]);
    let scale = c(1.0 / k, 0.0);
    (mean, &d * d.adjoint() * scale, &d * d.transpose() * scale)
}

#[test]
fn affine_image_matches_in_moments() {
    let law = ComplexNormal::new(
        CVec::from_vec(vec![c(1.0, -0.5), c(0.0, 2.0), c(-1.0, 0.3)]),
        CMat::from_row_slice(3, 3, &[c(2.0, 0.0), c(0.5, 0.0), c(0.0, 0.0), c(0.5, 0.0), c(1.0, 0.0), c(0.2, 0.0), c(0.0, 0.0), c(0.2, 0.0), c(1.5, 0.0)]),
        CMat::from_row_slice(3, 3, &[c(0.8, 0.0), c(0.1, 0.0), c(0.0, 0.0), c(0.1, 0.0), c(-0.4, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)]),
    )
    .unwrap();
    let a = CMat::from_row_slice(2, 3, &[c(1.0, 1.0), c(0.0, -2.0), c(0.5, 0.0), c(0.0, 0.3), c(1.0, 0.0), c(-1.0, 1.0)]);
    let b = CVec::from_vec(vec![c(0.5, 0.5), c(-2.0, 0.0)]);
    let count = 1_000_000;
    let transformed = &a * law.sample(count, 3).unwrap();
    let shifted = CMat::from_fn(2, count, |i, j| transformed[(i, j)] + b[i]);
    let image = law.affine(&a, &b).unwrap();
    let direct = image.sample(count, 4).unwrap();
    let (m1, g1, c1) = moments(&shifted);
    let (m2, g2, c2) = moments(&direct);
    let scale = image.covariance.norm();
    for (u, v, what) in [(&g1, &g2, "covariance"), (&c1, &c2, "relation"), (&g1, &image.covariance, "analytic covariance"), (&c1, &image.relation, "analytic relation")] {
        assert!((u - v).norm() <= 0.02 * scale, "{what}: {u} vs {v}");
    }
    assert!((&m1 - &m2).norm() <= 0.02 * scale.sqrt(), "{m1} vs {m2}");
    assert!((&m1 - &image.mean).norm() <= 0.02 * scale.sqrt());
}

#[test]
fn objective_moments_match_closed_form() {
    let law = ComplexNormal::new(
        CVec::from_vec(vec![c(0.3, -1.0), c(2.0, 0.5)]),
        CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.3, 0.0), c(0.3, 0.0), c(0.6, 0.0)]),
        CMat::from_row_slice(2, 2, &[c(0.2, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-0.1, 0.0)]),
    )
    .unwrap();
    let z = CVec::from_vec(vec![c(1.0, 2.0), c(-0.5, 0.7)]);
    let (mean, var) = objective_stats(&law, &z, 1_000_000, 9).unwrap();
    let (m, v) = common::inner_stats(&law, &z);
    assert!((mean - m).abs() <= 5.0 * (v / 1e6).sqrt());
    assert!((var / v - 1.0).abs() <= 0.01);
}

#[test]
fn confidence_intervals_cover_the_true_level() {
    // Re(A z − b) ~ N(−Φ⁻¹(0.95)σ, σ²) at z = 1, so the level is exactly 0.95
    let sigma = 0.7;
    let row = RandomRow::new(
        ComplexNormal::scalar(c(0.0, 0.0), 2.0 * sigma * sigma, c(0.0, 0.0)),
        ComplexNormal::deterministic(CVec::from_element(1, c(common::quantile(0.95) * sigma, 0.0))),
    )
    .unwrap();
    let z = CVec::from_element(1, c(1.0, 0.0));
    let covered = (0..100)
        .filter(|&k| {
            let e = &estimate_rows(std::slice::from_ref(&row), &[0.95], &z, 10_000, 1000 * k).unwrap().rows[0];
            (e.probability - 0.95).abs() <= e.half_width
        })
        .count();
    assert!(covered >= 90, "covered {covered}/100");
}

#[test]
fn beamformer_meets_its_level_empirically() {
    let sc = BeamformScenario::fig1(20.0);
    let a = sc.presumed_steering();
    let gamma = sc.mismatch_covariance();
    let cfg = SolverConfig::default();
    for (run, snr) in [(0u64, 0.0), (1, 15.0), (2, 30.0)] {
        let r_hat = sample_covariance(&snapshots(&sc, snr, sc.seed ^ run));
        let w = solve_mvdr_cccp(&r_hat, &a, &gamma, sc.confidence, ConstantMode::Derived, &cfg).unwrap().w;
        let row = mismatch_row(&a, &gamma, sc.confidence).unwrap();
        let e = &estimate_rows(&[row], &[sc.confidence], &w, 100_000, 77 + run).unwrap().rows[0];
        assert!(e.probability >= sc.confidence - 0.01, "run {run} SNR {snr}: {e:?}");
    }
}
