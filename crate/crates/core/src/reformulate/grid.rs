use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::socp::{SolverConfig, Status};

use super::individual::solve_individual;
use super::problem::JointCccp;

pub const MAX_GRID_ROWS: usize = 4;

/// Allocations `y = k / K` with positive integer `k` summing to
/// `K = ⌈1/step⌉`, in lexicographic order.
pub fn simplex_grid(rows: usize, step: f64) -> Result<Vec<Vec<f64>>> {
    if !(step > 0.0 && step <= 0.5) {
        return Err(Error::Domain(format!("grid step must lie in (0, 0.5], got {step}")));
    }
    if rows == 0 {
        return Err(Error::DimensionMismatch("grid over zero rows".into()));
    }
    let total = (1.0 / step - 1e-9).ceil() as usize;
    if total < rows {
        return Err(Error::EmptyGrid { rows, step });
    }
    let mut out = Vec::new();
    let mut parts = Vec::with_capacity(rows);
    compositions(total, rows, &mut parts, &mut out);
    Ok(out
        .into_iter()
        .map(|k| k.into_iter().map(|ki| ki as f64 / total as f64).collect())
        .collect())
}

fn compositions(left: usize, slots: usize, parts: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if slots == 1 {
        parts.push(left);
        out.push(parts.clone());
        parts.pop();
        return;
    }
    for k in 1..=left - (slots - 1) {
        parts.push(k);
        compositions(left - k, slots - 1, parts, out);
        parts.pop();
    }
}

/// Evaluates every point concurrently and returns the index, payload and
/// value of the minimum. Ties go to the earliest point, so the result does
/// not depend on scheduling. Points returning `None` are skipped.
pub fn grid_minimize<T, F>(points: &[Vec<f64>], eval: F) -> Option<(usize, T, f64)>
where
    T: Send,
    F: Fn(&[f64]) -> Option<(T, f64)> + Sync,
{
    let values: Vec<Option<(T, f64)>> = points.par_iter().map(|y| eval(y)).collect();
    let mut best: Option<(usize, T, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if let Some((payload, value)) = v {
            if value.is_nan() {
                continue;
            }
            if best.as_ref().is_none_or(|b| value < b.2) {
                best = Some((i, payload, value));
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointGridSolution {
    pub z: CVec,
    pub y: Vec<f64>,
    pub objective: f64,
    pub evaluated: usize,
    pub feasible: usize,
}

/// Minimizes over allocations on a simplex grid, each point an exact
/// individual problem at levels `p^{yᵢ^{1/θ}}`. Every grid point gives a
/// solution feasible for the joint constraint.
pub fn solve_joint_grid(prob: &JointCccp, step: f64, cfg: &SolverConfig) -> Result<JointGridSolution> {
    prob.validate()?;
    let rows = prob.rows.len();
    if rows > MAX_GRID_ROWS {
        return Err(Error::Domain(format!("grid search supports at most {MAX_GRID_ROWS} rows, got {rows}")));
    }
    let points = simplex_grid(rows, step)?;
    let feasible = std::sync::atomic::AtomicUsize::new(0);
    let best = grid_minimize(&points, |y| {
        let sol = prob.at_allocation(y).and_then(|ind| solve_individual(&ind, cfg)).ok()?;
        feasible.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
        Some((sol.z, sol.objective))
    });
    let (idx, z, objective) = best.ok_or(Error::Solver(Status::PrimalInfeasible))?;
    Ok(JointGridSolution {
        z,
        y: points[idx].clone(),
        objective,
        evaluated: points.len(),
        feasible: feasible.into_inner(),
    })
}
