use crate::cnormal::re_row_stats;
use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::normal::normal_cdf;
use crate::socp::{self, Cone, ConicProgram, ProgramBuilder, SolverConfig};

use super::approx::{ApproxKind, ApproxPoints};
use super::problem::{objective_data, row_data, JointCccp, RandomRow};
use super::{add_objective, add_soc, mat_terms, Homog};

pub const DEFAULT_APPROX_POINTS: usize = 10;

struct JointLayout {
    h: Homog,
    /// Start of each row's split block `mᵢ` (length `2n + 1`).
    m: Vec<usize>,
}

/// Shared construction of the lower and upper programs.
///
/// Per row `i` the split `mᵢ ≥ 0` satisfies `Σᵢ mᵢ = s`, so its last entry
/// is the allocation `yᵢ`, and `rᵢ` dominates every line:
/// `rᵢₖ ≥ aₗ sₖ + bₗ mᵢₖ`. The row cone is `‖Fᵢ rᵢ‖ ≤ K₃ᵢᵀ s`. Chord
/// programs also impose `mᵢₖ ≥ r₁ sₖ`, the range where chords dominate.
fn build(prob: &JointCccp, pts: &ApproxPoints) -> Result<(ConicProgram, JointLayout)> {
    prob.validate()?;
    if !prob.nonneg_z {
        return Err(Error::MissingOrthant);
    }
    let rows = prob.rows.len();
    if pts.kind == ApproxKind::PiecewiseUpper && pts.points[0] * rows as f64 > 1.0 + 1e-12 {
        return Err(Error::Domain(format!(
            "first interpolation point {} exceeds 1/{rows}",
            pts.points[0]
        )));
    }
    let mut b = ProgramBuilder::new();
    let h = Homog::add(&mut b, prob.dim(), true);
    let d = h.dim();
    let (k0, f1) = objective_data(&prob.objective)?;
    add_objective(&mut b, &h, prob.q1, prob.q2, &k0, &f1);

    let m: Vec<usize> = (0..rows).map(|i| b.add_block(format!("m{i}"), Cone::NonNeg(d))).collect();
    for k in 0..d {
        let mut eq: Vec<(usize, f64)> = m.iter().map(|&mi| (mi + k, 1.0)).collect();
        eq.push((h.index(k), -1.0));
        b.add_eq(eq, 0.0);
    }

    for (i, row) in prob.rows.iter().enumerate() {
        let data = row_data(row)?;
        let support: Vec<usize> = (0..d).filter(|&k| data.factor.column(k).amax() > 0.0).collect();
        if support.is_empty() {
            add_soc(&mut b, format!("row{i}"), Some(h.dot(&data.k3)), Vec::new());
            continue;
        }
        let r = b.add_block(format!("r{i}"), Cone::Free(support.len()));
        let slack = b.add_block(
            format!("lines{i}"),
            Cone::NonNeg(support.len() * pts.lines.len()),
        );
        for (j, &k) in support.iter().enumerate() {
            for (l, &(a, slope)) in pts.lines.iter().enumerate() {
                let sl = slack + j * pts.lines.len() + l;
                b.add_eq(
                    vec![(r + j, 1.0), (h.index(k), -a), (m[i] + k, -slope), (sl, -1.0)],
                    0.0,
                );
            }
        }
        if pts.kind == ApproxKind::PiecewiseUpper {
            let floor = b.add_block(format!("floor{i}"), Cone::NonNeg(support.len()));
            for (j, &k) in support.iter().enumerate() {
                b.add_eq(
                    vec![(m[i] + k, 1.0), (h.index(k), -pts.points[0]), (floor + j, -1.0)],
                    0.0,
                );
            }
        }
        let factor = data.factor.select_columns(&support);
        let r_vars: Vec<usize> = (r..r + support.len()).collect();
        add_soc(&mut b, format!("row{i}"), Some(h.dot(&data.k3)), mat_terms(&factor, 1.0, &r_vars));
    }
    Ok((b.build(), JointLayout { h, m }))
}

fn check_kind(pts: &ApproxPoints, kind: ApproxKind) -> Result<()> {
    if pts.kind == kind {
        Ok(())
    } else {
        Err(Error::Domain(format!("expected {kind:?} points, got {:?}", pts.kind)))
    }
}

/// Relaxation with every quantile replaced by the maximum of its tangents.
pub fn build_joint_lower_socp(prob: &JointCccp, pts: &ApproxPoints) -> Result<ConicProgram> {
    check_kind(pts, ApproxKind::TangentLower)?;
    Ok(build(prob, pts)?.0)
}

/// Program with every quantile replaced by its piecewise-linear interpolant.
pub fn build_joint_upper_socp(prob: &JointCccp, pts: &ApproxPoints) -> Result<ConicProgram> {
    check_kind(pts, ApproxKind::PiecewiseUpper)?;
    Ok(build(prob, pts)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundSolution {
    /// Optimal value of the approximating program.
    pub objective: f64,
    pub z: CVec,
    /// Allocation `y`, the last entries of the row splits.
    pub y: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsResult {
    pub lower: BoundSolution,
    pub upper: BoundSolution,
    pub gap: f64,
    /// The upper solution is feasible for the joint constraint: some
    /// allocation `y` on the simplex meets `p^{yᵢ^{1/θ}} ≤ Pᵢ` for every row,
    /// where `Pᵢ` is the exact satisfaction probability of row `i` at `z`.
    pub upper_valid: bool,
    /// `p^{Σ yᵢ^{1/θ}} ≤ Pᵢ` for every row, with `y` from the upper program.
    pub paper_condition: bool,
    pub points: usize,
}

fn solve_bound(prob: &JointCccp, pts: &ApproxPoints, cfg: &SolverConfig) -> Result<BoundSolution> {
    let (program, layout) = build(prob, pts)?;
    let result = socp::solve(&program, cfg)?.into_optimal()?;
    let last = layout.h.dim() - 1;
    Ok(BoundSolution {
        objective: result.objective,
        z: layout.h.extract(&result.primal),
        y: layout.m.iter().map(|&mi| result.primal[mi + last]).collect(),
        iterations: result.iterations,
    })
}

/// Optimum of the tangent relaxation with `points` uniform points.
pub fn solve_joint_lower(prob: &JointCccp, points: usize, cfg: &SolverConfig) -> Result<BoundSolution> {
    check_points(points)?;
    solve_bound(prob, &ApproxPoints::tangent(prob.p, prob.theta, ApproxPoints::uniform_points(points))?, cfg)
}

/// Optimum of the chord program with `points` uniform points.
pub fn solve_joint_upper(prob: &JointCccp, points: usize, cfg: &SolverConfig) -> Result<BoundSolution> {
    check_points(points)?;
    solve_bound(prob, &ApproxPoints::piecewise(prob.p, prob.theta, ApproxPoints::uniform_points(points))?, cfg)
}

fn check_points(points: usize) -> Result<()> {
    if points < 2 {
        return Err(Error::Domain(format!("need at least two approximation points, got {points}")));
    }
    Ok(())
}

/// Exact `P[Re(Aᵢz − bᵢ) ≤ 0]` for every row.
pub fn row_satisfaction(rows: &[RandomRow], z: &CVec) -> Result<Vec<f64>> {
    rows.iter()
        .map(|row| {
            let stats = re_row_stats(&row.a, &row.b, z)?;
            let sd = stats.std_dev();
            Ok(if sd > 0.0 {
                normal_cdf(-stats.mean / sd)
            } else if stats.mean <= 0.0 {
                1.0
            } else {
                0.0
            })
        })
        .collect()
}

/// Solves both approximating programs with `points` uniform points.
pub fn solve_joint_bounds(prob: &JointCccp, points: usize, cfg: &SolverConfig) -> Result<BoundsResult> {
    check_points(points)?;
    let r = ApproxPoints::uniform_points(points);
    let lower = solve_bound(prob, &ApproxPoints::tangent(prob.p, prob.theta, r.clone())?, cfg)?;
    let upper = solve_bound(prob, &ApproxPoints::piecewise(prob.p, prob.theta, r)?, cfg)?;

    let sat = row_satisfaction(&prob.rows, &upper.z)?;
    let needed: f64 = sat
        .iter()
        .map(|&pi| if pi >= 1.0 { 0.0 } else { (pi.ln() / prob.p.ln()).powf(prob.theta) })
        .sum();
    let upper_valid = needed <= 1.0 + 1e-6;
    let exponent: f64 = upper.y.iter().map(|&y| y.max(0.0).powf(1.0 / prob.theta)).sum();
    let target = prob.p.powf(exponent);
    let paper_condition = sat.iter().all(|&pi| target <= pi + 1e-9);

    Ok(BoundsResult {
        gap: upper.objective - lower.objective,
        lower,
        upper,
        upper_valid,
        paper_condition,
        points,
    })
}
