//! Cone algebra: Jordan products, Nesterov–Todd scalings, step lengths and
//! projections for the free, nonnegative and second-order cones.

use nalgebra::{DMatrix, DVector, DVectorView, DVectorViewMut};
use serde::{Deserialize, Serialize};

/// One block of the variable partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cone {
    /// Unrestricted coordinates; the matching dual slack is pinned at zero.
    Free(usize),
    NonNeg(usize),
    /// `{(t, u) : ‖u‖ ≤ t}` of total dimension `d ≥ 1`.
    SecondOrder(usize),
}

impl Cone {
    pub fn dim(&self) -> usize {
        match *self {
            Cone::Free(k) | Cone::NonNeg(k) | Cone::SecondOrder(k) => k,
        }
    }

    /// Contribution to the barrier degree.
    pub fn degree(&self) -> usize {
        match *self {
            Cone::Free(_) => 0,
            Cone::NonNeg(k) => k,
            Cone::SecondOrder(_) => 1,
        }
    }

    /// Writes the identity element `e` of the cone.
    pub fn identity(&self, mut out: DVectorViewMut<f64>) {
        out.fill(0.0);
        match *self {
            Cone::Free(_) => {}
            Cone::NonNeg(_) => out.fill(1.0),
            Cone::SecondOrder(_) => out[0] = 1.0,
        }
    }

    /// Euclidean projection onto the cone (primal side).
    pub fn project(&self, v: DVectorView<f64>) -> DVector<f64> {
        match *self {
            Cone::Free(_) => v.into_owned(),
            Cone::NonNeg(_) => v.map(|x| x.max(0.0)),
            Cone::SecondOrder(_) => project_soc(v),
        }
    }

    /// Euclidean projection onto the dual cone (zero for free blocks, the
    /// cone itself otherwise).
    pub fn project_dual(&self, v: DVectorView<f64>) -> DVector<f64> {
        match *self {
            Cone::Free(k) => DVector::zeros(k),
            _ => self.project(v),
        }
    }

    /// Membership test with absolute slack `tol`.
    pub fn contains(&self, v: DVectorView<f64>, tol: f64) -> bool {
        match *self {
            Cone::Free(_) => true,
            Cone::NonNeg(_) => v.iter().all(|&x| x >= -tol),
            Cone::SecondOrder(_) => v[0] + tol >= v.rows(1, v.len() - 1).norm(),
        }
    }
}

fn project_soc(v: DVectorView<f64>) -> DVector<f64> {
    let t = v[0];
    let u = v.rows(1, v.len() - 1);
    let nu = u.norm();
    if nu <= t {
        return v.into_owned();
    }
    if nu <= -t {
        return DVector::zeros(v.len());
    }
    let a = 0.5 * (t + nu);
    let mut out = DVector::zeros(v.len());
    out[0] = a;
    out.rows_mut(1, v.len() - 1).copy_from(&(u * (a / nu)));
    out
}

/// `u ∘ v` for the second-order cone.
pub fn soc_product(u: &[f64], v: &[f64], out: &mut [f64]) {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    out[0] = dot;
    for k in 1..u.len() {
        out[k] = u[0] * v[k] + v[0] * u[k];
    }
}

/// Solves `λ ∘ q = r` for `q`.
pub fn soc_division(lambda: &[f64], r: &[f64], out: &mut [f64]) {
    let l0 = lambda[0];
    let l1_sq: f64 = lambda[1..].iter().map(|x| x * x).sum();
    let l1_r1: f64 = lambda[1..].iter().zip(&r[1..]).map(|(a, b)| a * b).sum();
    let det = l0 * l0 - l1_sq;
    let q0 = (l0 * r[0] - l1_r1) / det;
    out[0] = q0;
    for k in 1..lambda.len() {
        out[k] = (r[k] - q0 * lambda[k]) / l0;
    }
}

/// `xᵀ J x = x₀² − ‖x₁‖²`.
pub fn soc_det(x: &[f64]) -> f64 {
    let tail: f64 = x[1..].iter().map(|v| v * v).sum();
    (x[0] - tail.sqrt()) * (x[0] + tail.sqrt())
}

/// Nesterov–Todd scaling of one second-order block: `W = β(2vvᵀ − J)` with
/// `W s = W⁻¹ x`.
#[derive(Debug, Clone)]
pub struct SocScaling {
    pub w: DMatrix<f64>,
    pub w_inv: DMatrix<f64>,
    /// `W⁻² = β⁻²(2 J w̄ w̄ᵀ J − J)`.
    pub h: DMatrix<f64>,
}

pub fn soc_nt_scaling(x: &[f64], s: &[f64]) -> SocScaling {
    let d = x.len();
    let xdet = soc_det(x).max(f64::MIN_POSITIVE);
    let sdet = soc_det(s).max(f64::MIN_POSITIVE);
    let beta = (xdet / sdet).powf(0.25);
    let xn = xdet.sqrt();
    let sn = sdet.sqrt();
    let xbar: Vec<f64> = x.iter().map(|v| v / xn).collect();
    let sbar: Vec<f64> = s.iter().map(|v| v / sn).collect();
    let dot: f64 = xbar.iter().zip(&sbar).map(|(a, b)| a * b).sum();
    let gamma = ((1.0 + dot) * 0.5).sqrt();
    // w̄ = (x̄ + J s̄) / (2γ)
    let mut wbar = vec![0.0; d];
    wbar[0] = (xbar[0] + sbar[0]) / (2.0 * gamma);
    for k in 1..d {
        wbar[k] = (xbar[k] - sbar[k]) / (2.0 * gamma);
    }
    // v = w̄^{1/2} = (w̄ + e)/sqrt(2(w̄₀ + 1))
    let denom = (2.0 * (wbar[0] + 1.0)).sqrt();
    let mut v = wbar.clone();
    v[0] += 1.0;
    for e in v.iter_mut() {
        *e /= denom;
    }
    let mut w = DMatrix::zeros(d, d);
    let mut w_inv = DMatrix::zeros(d, d);
    let mut h = DMatrix::zeros(d, d);
    for i in 0..d {
        let ji = if i == 0 { 1.0 } else { -1.0 };
        for j in 0..d {
            let jj = if j == 0 { 1.0 } else { -1.0 };
            let jdiag = if i == j { ji } else { 0.0 };
            w[(i, j)] = beta * (2.0 * v[i] * v[j] - jdiag);
            w_inv[(i, j)] = (2.0 * ji * v[i] * v[j] * jj - jdiag) / beta;
            h[(i, j)] = (2.0 * ji * wbar[i] * wbar[j] * jj - jdiag) / (beta * beta);
        }
    }
    SocScaling { w, w_inv, h }
}

/// Largest `α ≥ 0` (capped at `cap`) with `x + α d` in the nonnegative orthant.
pub fn nonneg_step(x: &[f64], d: &[f64], cap: f64) -> f64 {
    x.iter()
        .zip(d)
        .filter(|(_, &dv)| dv < 0.0)
        .map(|(&xv, &dv)| -xv / dv)
        .fold(cap, f64::min)
}

/// Largest `α ≥ 0` (capped at `cap`) with `x + α d` in the second-order cone,
/// assuming `x` strictly inside.
pub fn soc_step(x: &[f64], d: &[f64], cap: f64) -> f64 {
    let a = d[0] * d[0] - d[1..].iter().map(|v| v * v).sum::<f64>();
    let b = 2.0 * (x[0] * d[0] - x[1..].iter().zip(&d[1..]).map(|(p, q)| p * q).sum::<f64>());
    let c = soc_det(x).max(0.0);
    let mut alpha = cap;
    if d[0] < 0.0 {
        alpha = alpha.min(-x[0] / d[0]);
    }
    // smallest positive root of a α² + b α + c
    let root = if a.abs() <= 1e-14 * (b.abs() + c.abs()).max(1e-300) {
        if b < 0.0 {
            -c / b
        } else {
            f64::INFINITY
        }
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            f64::INFINITY
        } else {
            let sq = disc.sqrt();
            let q = -0.5 * (b + b.signum() * sq);
            let (r1, r2) = (q / a, if q != 0.0 { c / q } else { f64::INFINITY });
            [r1, r2].into_iter().filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min)
        }
    };
    alpha.min(root)
}
