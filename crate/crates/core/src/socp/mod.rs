//! Standard-form cone programs
//!
//! ```text
//! minimize    cᵀx
//! subject to  A x = b,   x ∈ K = K₁ × … × K_p
//! ```
//!
//! with each `Kᵢ` free, a nonnegative orthant or a second-order cone, and
//! the primal-dual interior-point solver in [`solve`].

mod cone;
mod dump;
mod ipm;

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use cone::{soc_nt_scaling, Cone};
pub use dump::write_dump;
pub use ipm::solve;

use crate::error::{Error, Result};

/// A named contiguous range of program variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarSlice {
    pub name: String,
    pub start: usize,
    pub len: usize,
}

impl VarSlice {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub objective: DVector<f64>,
    pub eq_matrix: DMatrix<f64>,
    pub eq_rhs: DVector<f64>,
    pub cones: Vec<Cone>,
    pub var_map: Vec<VarSlice>,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_eqs(&self) -> usize {
        self.eq_rhs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        let total: usize = self.cones.iter().map(Cone::dim).sum();
        if total != n {
            return Err(Error::InvalidProgram(format!("cones cover {total} of {n} variables")));
        }
        if self.cones.iter().any(|c| c.dim() == 0) {
            return Err(Error::InvalidProgram("empty cone block".into()));
        }
        if self.eq_matrix.ncols() != n || self.eq_matrix.nrows() != self.num_eqs() {
            return Err(Error::InvalidProgram(format!(
                "equality matrix is {:?}, expected ({}, {n})",
                self.eq_matrix.shape(),
                self.num_eqs()
            )));
        }
        let mut covered = vec![false; n];
        for s in &self.var_map {
            if s.start + s.len > n {
                return Err(Error::InvalidProgram(format!("slice {} out of range", s.name)));
            }
            for k in s.range() {
                if covered[k] {
                    return Err(Error::InvalidProgram(format!("slice {} overlaps", s.name)));
                }
                covered[k] = true;
            }
        }
        let finite = self.objective.iter().chain(self.eq_matrix.iter()).chain(self.eq_rhs.iter());
        if finite.into_iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidProgram("non-finite data".into()));
        }
        Ok(())
    }

    pub fn slice(&self, name: &str) -> Option<&VarSlice> {
        self.var_map.iter().find(|s| s.name == name)
    }

    /// Values of the named slice in `x`.
    pub fn extract(&self, name: &str, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.slice(name).map(|s| x.rows(s.start, s.len).into_owned())
    }

    /// Start offsets of each cone block.
    pub fn cone_offsets(&self) -> Vec<usize> {
        let mut at = 0;
        self.cones
            .iter()
            .map(|c| {
                let start = at;
                at += c.dim();
                start
            })
            .collect()
    }

    pub fn scale_objective(&self, factor: f64) -> ConicProgram {
        ConicProgram { objective: &self.objective * factor, ..self.clone() }
    }
}

/// Incremental construction of a [`ConicProgram`]; variables are laid out in
/// the order their blocks are added.
#[derive(Debug, Default)]
pub struct ProgramBuilder {
    cones: Vec<Cone>,
    var_map: Vec<VarSlice>,
    objective: Vec<f64>,
    rows: Vec<(Vec<(usize, f64)>, f64)>,
}

impl ProgramBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a cone block and returns its first variable index.
    pub fn add_block(&mut self, name: impl Into<String>, cone: Cone) -> usize {
        let start = self.objective.len();
        self.objective.resize(start + cone.dim(), 0.0);
        self.cones.push(cone);
        self.var_map.push(VarSlice { name: name.into(), start, len: cone.dim() });
        start
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_cost(&mut self, var: usize, coef: f64) {
        self.objective[var] += coef;
    }

    /// Adds `Σ coef·x[var] = rhs`; repeated indices are summed.
    pub fn add_eq(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push((terms, rhs));
    }

    pub fn build(self) -> ConicProgram {
        let n = self.objective.len();
        let m = self.rows.len();
        let mut a = DMatrix::zeros(m, n);
        let mut b = DVector::zeros(m);
        for (i, (terms, rhs)) in self.rows.into_iter().enumerate() {
            for (j, v) in terms {
                a[(i, j)] += v;
            }
            b[i] = rhs;
        }
        ConicProgram {
            objective: DVector::from_vec(self.objective),
            eq_matrix: a,
            eq_rhs: b,
            cones: self.cones,
            var_map: self.var_map,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iterations: usize,
    pub tol_gap: f64,
    pub tol_feas: f64,
    pub tol_infeas: f64,
    pub step_fraction: f64,
    pub regularization: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iterations: 100,
            tol_gap: 1e-8,
            tol_feas: 1e-8,
            tol_infeas: 1e-8,
            step_fraction: 0.99,
            regularization: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_gap > 0.0
            && self.tol_feas > 0.0
            && self.tol_infeas > 0.0
            && self.step_fraction > 0.0
            && self.step_fraction < 1.0
            && self.regularization >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("invalid solver configuration {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    PrimalInfeasible,
    DualInfeasible,
    MaxIterations,
    NumericalError,
}

/// Relative primal feasibility, dual feasibility and duality gap.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

impl Residuals {
    pub fn max(&self) -> f64 {
        self.primal.max(self.dual).max(self.gap)
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: Status,
    pub primal: DVector<f64>,
    /// Equality multipliers `y`.
    pub dual: DVector<f64>,
    /// Dual slack `s = c − Aᵀy`.
    pub dual_slack: DVector<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub residuals: Residuals,
    pub iterations: usize,
    pub presolve: PresolveInfo,
}

impl SolveResult {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// `Ok(self)` when optimal, the status as an error otherwise.
    pub fn into_optimal(self) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Solver(self.status))
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PresolveInfo {
    pub removed_rows: usize,
    /// Free variables pinned by a singleton equality row (such as the
    /// homogenizing coordinate of a reformulated chance constraint).
    pub fixed_free_vars: usize,
}

/// Relative residuals of a candidate primal `x` and multipliers `y`.
///
/// The dual slack is recomputed as `c − Aᵀy`; its distance from the dual
/// cone is the dual residual. The primal residual adds the distance of `x`
/// from the cone to `‖Ax − b‖`.
pub fn residuals(p: &ConicProgram, x: &DVector<f64>, y: &DVector<f64>) -> Result<Residuals> {
    if x.len() != p.num_vars() || y.len() != p.num_eqs() {
        return Err(Error::DimensionMismatch(format!(
            "primal {} / dual {} against program with {} variables and {} equalities",
            x.len(),
            y.len(),
            p.num_vars(),
            p.num_eqs()
        )));
    }
    let s = &p.objective - p.eq_matrix.transpose() * y;
    let mut cone_viol = 0.0;
    let mut dual_viol = 0.0;
    for (cone, start) in p.cones.iter().zip(p.cone_offsets()) {
        let xv = x.rows(start, cone.dim());
        cone_viol += (cone.project(xv) - xv).norm_squared();
        let sv = s.rows(start, cone.dim());
        dual_viol += (cone.project_dual(sv) - sv).norm_squared();
    }
    let bnorm = p.eq_rhs.norm().max(1.0);
    let cnorm = p.objective.norm().max(1.0);
    let pobj = p.objective.dot(x);
    let dobj = p.eq_rhs.dot(y);
    Ok(Residuals {
        primal: ((&p.eq_matrix * x - &p.eq_rhs).norm() + cone_viol.sqrt()) / bnorm,
        dual: dual_viol.sqrt() / cnorm,
        gap: (pobj - dobj).abs() / pobj.abs().max(dobj.abs()).max(1.0),
    })
}
