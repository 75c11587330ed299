use crate::error::Result;
use crate::linalg::CVec;
use crate::normal::normal_quantile;
use crate::socp::{self, ConicProgram, ProgramBuilder, SolveResult, SolverConfig};

use super::problem::{objective_data, row_data, IndividualCccp};
use super::{add_objective, add_soc, mat_terms, Homog};

/// Exact second-order cone form of an individually constrained problem:
///
/// ```text
/// min  q₁ K₀ᵀs + q₂ ‖F₁ s‖
/// s.t. Φ⁻¹(pᵢ) ‖Fᵢ s‖ ≤ K₃ᵢᵀ s   for every row
/// ```
///
/// Rows at `pᵢ = 0.5` or without randomness become linear.
pub fn build_individual_socp(prob: &IndividualCccp) -> Result<ConicProgram> {
    Ok(build(prob)?.0)
}

fn build(prob: &IndividualCccp) -> Result<(ConicProgram, Homog)> {
    prob.validate()?;
    let mut b = ProgramBuilder::new();
    let h = Homog::add(&mut b, prob.dim(), prob.nonneg_z);
    let (k0, f1) = objective_data(&prob.objective)?;
    add_objective(&mut b, &h, prob.q1, prob.q2, &k0, &f1);
    let s: Vec<usize> = (0..h.dim()).map(|k| h.index(k)).collect();
    for (i, (row, &p)) in prob.rows.iter().zip(&prob.levels).enumerate() {
        let data = row_data(row)?;
        let q = normal_quantile(p)?;
        let u_rows = if q == 0.0 { Vec::new() } else { mat_terms(&data.factor, q, &s) };
        add_soc(&mut b, format!("row{i}"), Some(h.dot(&data.k3)), u_rows);
    }
    Ok((b.build(), h))
}

#[derive(Debug, Clone)]
pub struct IndividualSolution {
    pub z: CVec,
    /// Objective recomputed from the distribution at `z`.
    pub objective: f64,
    pub result: SolveResult,
}

/// Builds and solves the exact reformulation; any status other than
/// optimal is returned as [`crate::Error::Solver`].
pub fn solve_individual(prob: &IndividualCccp, cfg: &SolverConfig) -> Result<IndividualSolution> {
    let (program, h) = build(prob)?;
    let result = socp::solve(&program, cfg)?.into_optimal()?;
    let z = h.extract(&result.primal);
    let objective = prob.objective_value(&z)?;
    Ok(IndividualSolution { z, objective, result })
}
