//! Linear under- and over-estimators of the composite quantile
//! `g(y) = Φ⁻¹(p^{y^{1/θ}})`, which is convex on `(0, 1]` for `p ≥ 0.5`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal::{normal_quantile, quantile_derivative};

fn check_p_theta(p: f64, theta: f64) -> Result<()> {
    if !(0.5..1.0).contains(&p) {
        return Err(Error::Domain(format!("p must lie in [0.5, 1), got {p}")));
    }
    if !(theta >= 1.0 && theta.is_finite()) {
        return Err(Error::Domain(format!("theta must be >= 1, got {theta}")));
    }
    Ok(())
}

fn check_y(y: f64) -> Result<()> {
    if y > 0.0 && y <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("allocation must lie in (0, 1], got {y}")))
    }
}

/// `p^{y^{1/θ}}`, the per-row level induced by allocation `y`.
pub fn copula_exponent(p: f64, theta: f64, y: f64) -> Result<f64> {
    check_p_theta(p, theta)?;
    check_y(y)?;
    Ok(p.powf(y.powf(1.0 / theta)))
}

/// `Φ⁻¹(p^{y^{1/θ}})`.
pub fn composite_quantile(p: f64, theta: f64, y: f64) -> Result<f64> {
    let u = copula_exponent(p, theta, y)?;
    if u >= 1.0 {
        return Err(Error::Domain(format!("level p^(y^(1/theta)) rounds to 1 at y = {y}")));
    }
    normal_quantile(u)
}

/// Tangent line `a + b·y` of the composite quantile at `r`.
pub fn tangent_coeffs(p: f64, theta: f64, r: f64) -> Result<(f64, f64)> {
    let u = copula_exponent(p, theta, r)?;
    let value = composite_quantile(p, theta, r)?;
    let slope =
        quantile_derivative(u)? * u * p.ln() * r.powf(1.0 / theta - 1.0) / theta;
    Ok((value - slope * r, slope))
}

/// Chord `a + b·y` through the composite quantile at `r_lo < r_hi`.
///
/// Points closer than `1e-9` collapse to the tangent at their midpoint.
pub fn piecewise_coeffs(p: f64, theta: f64, r_lo: f64, r_hi: f64) -> Result<(f64, f64)> {
    check_y(r_lo)?;
    check_y(r_hi)?;
    if r_lo >= r_hi {
        return Err(Error::Domain(format!("chord endpoints must increase, got {r_lo} >= {r_hi}")));
    }
    if r_hi - r_lo < 1e-9 {
        return tangent_coeffs(p, theta, 0.5 * (r_lo + r_hi));
    }
    let g_lo = composite_quantile(p, theta, r_lo)?;
    let g_hi = composite_quantile(p, theta, r_hi)?;
    let width = r_hi - r_lo;
    Ok(((r_hi * g_lo - r_lo * g_hi) / width, (g_hi - g_lo) / width))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApproxKind {
    TangentLower,
    PiecewiseUpper,
}

/// Approximation points `r₁ < … < r_N` in `(0, 1]` and their lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxPoints {
    pub points: Vec<f64>,
    /// `(a, b)` per tangent point, or per consecutive pair for chords.
    pub lines: Vec<(f64, f64)>,
    pub kind: ApproxKind,
}

impl ApproxPoints {
    /// `r_l = l / N`, `l = 1..N`.
    pub fn uniform_points(count: usize) -> Vec<f64> {
        (1..=count).map(|l| l as f64 / count as f64).collect()
    }

    fn check_points(points: &[f64]) -> Result<()> {
        for &r in points {
            check_y(r)?;
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain("approximation points must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn tangent(p: f64, theta: f64, points: Vec<f64>) -> Result<Self> {
        Self::check_points(&points)?;
        if points.is_empty() {
            return Err(Error::Domain("need at least one tangent point".into()));
        }
        let lines = points
            .iter()
            .map(|&r| tangent_coeffs(p, theta, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(ApproxPoints { points, lines, kind: ApproxKind::TangentLower })
    }

    pub fn piecewise(p: f64, theta: f64, points: Vec<f64>) -> Result<Self> {
        Self::check_points(&points)?;
        if points.len() < 2 {
            return Err(Error::Domain("need at least two interpolation points".into()));
        }
        let lines = points
            .windows(2)
            .map(|w| piecewise_coeffs(p, theta, w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(ApproxPoints { points, lines, kind: ApproxKind::PiecewiseUpper })
    }

    /// `max_l (a_l + b_l y)`.
    pub fn eval(&self, y: f64) -> f64 {
        self.lines.iter().map(|(a, b)| a + b * y).fold(f64::NEG_INFINITY, f64::max)
    }
}
