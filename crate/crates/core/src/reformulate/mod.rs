//! Compilation of chance-constrained problems into cone programs.
//!
//! All programs work over the homogenized vector `s = [Re z; Im z; 1]`:
//! a block `z` of length `2n` followed by a free block `one` pinned to 1.

mod approx;
mod grid;
mod individual;
mod joint;
mod problem;

pub use approx::{
    composite_quantile, copula_exponent, piecewise_coeffs, tangent_coeffs, ApproxKind,
    ApproxPoints,
};
pub use grid::{grid_minimize, simplex_grid, solve_joint_grid, JointGridSolution, MAX_GRID_ROWS};
pub use individual::{build_individual_socp, solve_individual, IndividualSolution};
pub use joint::{
    build_joint_lower_socp, build_joint_upper_socp, row_satisfaction, solve_joint_bounds, solve_joint_lower,
    solve_joint_upper,
    BoundSolution, BoundsResult, DEFAULT_APPROX_POINTS,
};
pub use problem::{IndividualCccp, JointCccp, RandomRow};

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, CVec};
use crate::socp::{Cone, ProgramBuilder};

type Terms = Vec<(usize, f64)>;

/// Indices of the homogenized vector `s` inside a program.
#[derive(Debug, Clone, Copy)]
struct Homog {
    z: usize,
    one: usize,
    n: usize,
}

impl Homog {
    fn add(b: &mut ProgramBuilder, n: usize, nonneg: bool) -> Self {
        let cone = if nonneg { Cone::NonNeg(2 * n) } else { Cone::Free(2 * n) };
        let z = b.add_block("z", cone);
        let one = b.add_block("one", Cone::Free(1));
        b.add_eq(vec![(one, 1.0)], 1.0);
        Homog { z, one, n }
    }

    fn dim(&self) -> usize {
        2 * self.n + 1
    }

    fn index(&self, k: usize) -> usize {
        if k < 2 * self.n {
            self.z + k
        } else {
            self.one
        }
    }

    /// `vᵀs` as sparse terms.
    fn dot(&self, v: &DVector<f64>) -> Terms {
        v.iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(k, &c)| (self.index(k), c))
            .collect()
    }

    fn extract(&self, x: &DVector<f64>) -> CVec {
        linalg::unstack(&x.rows(self.z, 2 * self.n).into_owned())
    }
}

/// `scale · M v` as sparse term rows, with `v` given by variable indices.
fn mat_terms(m: &DMatrix<f64>, scale: f64, vars: &[usize]) -> Vec<Terms> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .filter(|&k| m[(i, k)] != 0.0)
                .map(|k| (vars[k], scale * m[(i, k)]))
                .collect()
        })
        .collect()
}

/// Adds `‖u‖ ≤ t` with `uₖ = Σ u_rows[k]` and, when given, `t = Σ t_terms`;
/// a plain `t ≥ 0` when `u_rows` is empty. Returns the index of `t`.
fn add_soc(
    b: &mut ProgramBuilder,
    name: String,
    t_terms: Option<Terms>,
    u_rows: Vec<Terms>,
) -> usize {
    let cone = if u_rows.is_empty() {
        Cone::NonNeg(1)
    } else {
        Cone::SecondOrder(1 + u_rows.len())
    };
    let t = b.add_block(name, cone);
    if let Some(terms) = t_terms {
        let mut eq = vec![(t, 1.0)];
        eq.extend(terms.into_iter().map(|(j, c)| (j, -c)));
        b.add_eq(eq, 0.0);
    }
    for (k, row) in u_rows.into_iter().enumerate() {
        let mut eq = vec![(t + 1 + k, 1.0)];
        eq.extend(row.into_iter().map(|(j, c)| (j, -c)));
        b.add_eq(eq, 0.0);
    }
    t
}

/// `q₁ K₀ᵀs + q₂ ‖F₁ s‖` through an epigraph variable.
fn add_objective(
    b: &mut ProgramBuilder,
    h: &Homog,
    q1: f64,
    q2: f64,
    k0: &DVector<f64>,
    f1: &DMatrix<f64>,
) {
    for (j, c) in h.dot(k0) {
        b.add_cost(j, q1 * c);
    }
    if q2 > 0.0 && f1.nrows() > 0 {
        let s: Vec<usize> = (0..h.dim()).map(|k| h.index(k)).collect();
        let t = add_soc(b, "objective".into(), None, mat_terms(f1, 1.0, &s));
        b.add_cost(t, q2);
    }
}
