use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cnormal::ComplexNormal;
use crate::error::{Error, Result};
use crate::linalg::{self, psd_sqrt, real_embedding, CMat, CVec, PSD_TOL};
use crate::normal::normal_quantile;
use crate::reformulate::RandomRow;
use crate::socp::{self, Cone, ProgramBuilder, SolverConfig};

/// Ridge added to `R̂` before factorization, relative to `tr(R̂)/M`.
pub const COVARIANCE_RIDGE: f64 = 1e-10;

/// Tolerance of the direct re-check of a solved beamformer.
pub const CHECK_TOL: f64 = 1e-6;

/// Tolerance factor of the retry after a stalled solve.
pub const RELAXATION: f64 = 100.0;

/// Scale of `‖Γ_δ^{1/2} w‖` in the deterministic mismatch constraint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConstantMode {
    /// `1/√2`, the standard deviation of `Re(δᴴw)` for circular `δ`.
    #[default]
    Derived,
    /// `1/2`.
    Paper,
}

impl ConstantMode {
    pub fn factor(self) -> f64 {
        match self {
            ConstantMode::Derived => FRAC_1_SQRT_2,
            ConstantMode::Paper => 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowKind {
    /// `P[1 − Re(aᴴw) + Re(δᴴw) ≤ 0] ≥ level`.
    Distortionless { steering: CVec },
    /// `P[Re(aᴴw) + Re(δᴴw) ≤ α] ≥ level`.
    Suppress { steering: CVec, alpha: f64 },
}

/// One chance row on the weights with mismatch `δ ~ N_c(0, Γ_δ, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamRow {
    pub kind: RowKind,
    pub level: f64,
}

impl BeamRow {
    pub fn distortionless(steering: CVec, level: f64) -> Self {
        BeamRow { kind: RowKind::Distortionless { steering }, level }
    }

    pub fn suppress(steering: CVec, alpha: f64, level: f64) -> Self {
        BeamRow { kind: RowKind::Suppress { steering, alpha }, level }
    }

    fn steering(&self) -> &CVec {
        match &self.kind {
            RowKind::Distortionless { steering } | RowKind::Suppress { steering, .. } => steering,
        }
    }

    /// The row as `Re(A w − b) ≤ 0` with random `A`.
    pub fn random_row(&self, mismatch: &CMat) -> Result<RandomRow> {
        let cov = mismatch.map(|v| v.conj());
        let a = self.steering().map(|v| v.conj());
        let (mean, b) = match &self.kind {
            RowKind::Distortionless { .. } => (-a, Complex64::new(-1.0, 0.0)),
            RowKind::Suppress { alpha, .. } => (a, Complex64::new(*alpha, 0.0)),
        };
        RandomRow::new(
            ComplexNormal::circular(mean, cov)?,
            ComplexNormal::deterministic(CVec::from_element(1, b)),
        )
    }

    /// Left side minus right side of the deterministic form; `≤ 0` when met.
    fn deterministic_excess(&self, w: &CVec, spread: f64, kappa: f64) -> Result<f64> {
        let q = normal_quantile(self.level)?;
        let re = self.steering().dotc(w).re;
        Ok(match &self.kind {
            RowKind::Distortionless { .. } => 1.0 - re + kappa * q * spread,
            RowKind::Suppress { alpha, .. } => re + kappa * q * spread - alpha,
        })
    }
}

/// `P[−Re(δᴴw) ≤ Re(aᴴw) − 1] ≥ p` as `Re(A w − b) ≤ 0`.
pub fn mismatch_row(presumed: &CVec, mismatch: &CMat, p: f64) -> Result<RandomRow> {
    BeamRow::distortionless(presumed.clone(), p).random_row(mismatch)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSolution {
    pub w: CVec,
    /// `wᴴ R̂ w` evaluated at `w`.
    pub objective: f64,
    /// Largest excess over all deterministic constraints, by direct evaluation.
    pub max_violation: f64,
    pub iterations: usize,
}

fn ridged(r: &CMat) -> CMat {
    let m = r.nrows();
    let trace: f64 = (0..m).map(|i| r[(i, i)].re).sum();
    let eps = COVARIANCE_RIDGE * trace / m as f64;
    let mut out = (r + r.adjoint()) * Complex64::new(0.5, 0.0);
    for i in 0..m {
        out[(i, i)] += Complex64::new(eps, 0.0);
    }
    out
}

/// Tolerances scaled by [`RELAXATION`], used once when a solve stalls; the
/// direct re-check still applies.
fn relaxed(cfg: &SolverConfig) -> SolverConfig {
    SolverConfig {
        tol_gap: cfg.tol_gap * RELAXATION,
        tol_feas: cfg.tol_feas * RELAXATION,
        ..*cfg
    }
}

/// Largest deterministic-constraint excess at `w`, including
/// `|Im(aᴴw)|` of the first distortionless row.
pub fn check_beam_rows(w: &CVec, rows: &[BeamRow], mismatch: &CMat, mode: ConstantMode) -> Result<f64> {
    let spread = spread(mismatch, w);
    let kappa = mode.factor();
    let mut worst = f64::NEG_INFINITY;
    for row in rows {
        let scale = 1.0 + row.steering().norm() * w.norm();
        worst = worst.max(row.deterministic_excess(w, spread, kappa)? / scale);
    }
    if let Some(row) = rows.iter().find(|r| matches!(r.kind, RowKind::Distortionless { .. })) {
        let scale = 1.0 + row.steering().norm() * w.norm();
        worst = worst.max(row.steering().dotc(w).im.abs() / scale);
    }
    Ok(worst)
}

/// `‖Γ^{1/2} w‖ = √(wᴴ Γ w)`.
pub fn spread(gamma: &CMat, w: &CVec) -> f64 {
    w.dotc(&(gamma * w)).re.max(0.0).sqrt()
}

/// Minimizes `wᴴ R̂ w` subject to the deterministic forms of `rows`, with
/// `Im(aᴴw) = 0` for the first distortionless row.
///
/// Over `v = [Re w; Im w]` the program is: `t ≥ ‖S v‖` with `SᵀS` the real
/// embedding of `R̂`, `ν ≥ ‖G v‖` with `GᵀG` that of `Γ_δ`, and one linear
/// inequality per row in `(v, ν)`.
pub fn solve_beam_rows(
    r_hat: &CMat,
    rows: &[BeamRow],
    mismatch: &CMat,
    mode: ConstantMode,
    cfg: &SolverConfig,
) -> Result<BeamSolution> {
    let m = r_hat.nrows();
    if r_hat.ncols() != m || mismatch.shape() != (m, m) {
        return Err(Error::DimensionMismatch(format!(
            "covariance {:?} and mismatch {:?} for {m} sensors",
            r_hat.shape(),
            mismatch.shape()
        )));
    }
    if rows.iter().any(|r| r.steering().len() != m) {
        return Err(Error::DimensionMismatch("steering vector length".into()));
    }
    let Some(first) = rows.iter().find(|r| matches!(r.kind, RowKind::Distortionless { .. })) else {
        return Err(Error::Domain("a distortionless row is required".into()));
    };
    let kappa = mode.factor();
    let quantiles = rows
        .iter()
        .map(|r| {
            if !(0.5..1.0).contains(&r.level) {
                return Err(Error::Domain(format!("level {} outside [0.5, 1)", r.level)));
            }
            normal_quantile(r.level)
        })
        .collect::<Result<Vec<f64>>>()?;

    let s = psd_sqrt(&real_embedding(&ridged(r_hat)), PSD_TOL * r_hat.norm().max(1.0))?;
    let g = psd_sqrt(&real_embedding(mismatch), PSD_TOL * mismatch.norm().max(1.0))?;
    let d = 2 * m;

    let mut b = ProgramBuilder::new();
    let v = b.add_block("w", Cone::Free(d));
    let t = b.add_block("objective", Cone::SecondOrder(1 + d));
    b.add_cost(t, 1.0);
    for i in 0..d {
        let mut eq = vec![(t + 1 + i, 1.0)];
        eq.extend((0..d).filter(|&k| s[(i, k)] != 0.0).map(|k| (v + k, -s[(i, k)])));
        b.add_eq(eq, 0.0);
    }
    let uses_spread = g.amax() > 0.0 && quantiles.iter().any(|&q| q > 0.0);
    let nu = if uses_spread {
        let nu = b.add_block("spread", Cone::SecondOrder(1 + d));
        for i in 0..d {
            let mut eq = vec![(nu + 1 + i, 1.0)];
            eq.extend((0..d).filter(|&k| g[(i, k)] != 0.0).map(|k| (v + k, -g[(i, k)])));
            b.add_eq(eq, 0.0);
        }
        Some(nu)
    } else {
        None
    };
    let slack = b.add_block("slack", Cone::NonNeg(rows.len()));
    for (j, (row, &q)) in rows.iter().zip(&quantiles).enumerate() {
        let ar = linalg::stack(row.steering());
        let (sign, rhs) = match &row.kind {
            RowKind::Distortionless { .. } => (1.0, 1.0),
            RowKind::Suppress { alpha, .. } => (-1.0, -alpha),
        };
        let mut eq: Vec<(usize, f64)> = (0..d).map(|k| (v + k, sign * ar[k])).collect();
        if let Some(nu) = nu {
            eq.push((nu, -kappa * q));
        }
        eq.push((slack + j, -1.0));
        b.add_eq(eq, rhs);
    }
    let a = first.steering();
    let ai = DVector::from_iterator(d, a.iter().map(|c| -c.im).chain(a.iter().map(|c| c.re)));
    b.add_eq((0..d).map(|k| (v + k, ai[k])).collect(), 0.0);

    let program = b.build();
    let result = match socp::solve(&program, cfg)?.into_optimal() {
        Err(Error::Solver(socp::Status::NumericalError | socp::Status::MaxIterations)) => {
            log::debug!("beamformer solve stalled, retrying at relaxed tolerances");
            socp::solve(&program, &relaxed(cfg))?.into_optimal()?
        }
        other => other?,
    };
    let w = linalg::unstack(&result.primal.rows(v, d).into_owned());
    let max_violation = check_beam_rows(&w, rows, mismatch, mode)?;
    if max_violation > CHECK_TOL {
        log::debug!("beamformer violates its constraints by {max_violation:.3e}");
        return Err(Error::Solver(socp::Status::NumericalError));
    }
    Ok(BeamSolution {
        objective: w.dotc(&(r_hat * &w)).re,
        w,
        max_violation,
        iterations: result.iterations,
    })
}

/// The chance-constrained MVDR beamformer with one mismatch row at level `p`.
pub fn solve_mvdr_cccp(
    r_hat: &CMat,
    presumed: &CVec,
    mismatch: &CMat,
    p: f64,
    mode: ConstantMode,
    cfg: &SolverConfig,
) -> Result<BeamSolution> {
    solve_beam_rows(r_hat, &[BeamRow::distortionless(presumed.clone(), p)], mismatch, mode, cfg)
}

/// `R⁻¹a / (aᴴR⁻¹a)`.
pub fn optimal_weights(r: &CMat, a: &CVec) -> Result<CVec> {
    let ri_a = linalg::solve_hpd(r, a, COVARIANCE_RIDGE)?;
    let denom = a.dotc(&ri_a);
    if !(denom.re > 0.0) {
        return Err(Error::SingularMatrix);
    }
    Ok(ri_a / denom)
}

/// Sample-matrix-inversion beamformer with the presumed steering vector.
pub fn smi_mvdr(r_hat: &CMat, presumed: &CVec) -> Result<CVec> {
    optimal_weights(r_hat, presumed)
}

/// `σ_s² ãᴴ R_{i+n}⁻¹ ã`.
pub fn optimal_sinr(r_in: &CMat, actual: &CVec, signal_power: f64) -> Result<f64> {
    let x = linalg::solve_hpd(r_in, actual, COVARIANCE_RIDGE)?;
    Ok(signal_power * actual.dotc(&x).re)
}

/// `σ_s² |wᴴã|² / (wᴴ R_{i+n} w)`.
pub fn sinr(w: &CVec, r_in: &CMat, actual: &CVec, signal_power: f64) -> f64 {
    signal_power * w.dotc(actual).norm_sqr() / w.dotc(&(r_in * w)).re
}
