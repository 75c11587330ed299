//! JSON problem and result documents.
//!
//! Complex vectors and matrices are stored as separate real and imaginary
//! parts. Every number must be finite; semantic errors carry the path of the
//! offending field, e.g. `rows[0].p`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::cnormal::ComplexNormal;
use crate::error::{Error, Result};
use crate::linalg::{CMat, CVec};
use crate::reformulate::{
    solve_individual, solve_joint_bounds, solve_joint_grid, solve_joint_lower, solve_joint_upper,
    BoundSolution, IndividualCccp, JointCccp, RandomRow, DEFAULT_APPROX_POINTS,
};
use crate::socp::{Residuals, SolverConfig, Status};
use crate::validate::ValidationReport;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn schema<T>(path: impl Into<String>, message: impl fmt::Display) -> Result<T> {
    Err(Error::Schema { path: path.into(), message: message.to_string() })
}

/// Parses JSON, reporting structural errors with their field path.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).or_else(|e| {
        let path = e.path().to_string();
        schema(if path == "." { "$".to_string() } else { path }, e.into_inner())
    })
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Schema { path: "$".into(), message: e.to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Individual,
    Joint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexSpec {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub mean_re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_im: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<MatrixSpec>,
    #[serde(default = "one")]
    pub q1: f64,
    #[serde(default = "one")]
    pub q2: f64,
}

fn one() -> f64 {
    1.0
}

/// Scalar right-hand side `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalarSpec {
    pub mean_re: f64,
    #[serde(default)]
    pub mean_im: f64,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<ComplexSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowSpec {
    pub mean_re: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_im: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<MatrixSpec>,
    pub b: ScalarSpec,
    /// Row level; individual problems only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub kind: ProblemKind,
    pub n: usize,
    pub objective: ObjectiveSpec,
    pub rows: Vec<RowSpec>,
    /// Joint level; joint problems only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    /// Copula parameter, default 1; joint problems only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    /// Impose `Re z ≥ 0` and `Im z ≥ 0`.
    #[serde(default)]
    pub nonneg: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Problem {
    Individual(IndividualCccp),
    Joint(JointCccp),
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::Individual(p) => p.dim(),
            Problem::Joint(p) => p.dim(),
        }
    }
}

fn finite(path: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        schema(path, "number must be finite")
    }
}

fn vector(path: &str, re: &[f64], im: Option<&[f64]>, n: usize) -> Result<CVec> {
    if re.len() != n {
        return schema(format!("{path}_re"), format!("expected length {n}, got {}", re.len()));
    }
    if let Some(im) = im {
        if im.len() != n {
            return schema(format!("{path}_im"), format!("expected length {n}, got {}", im.len()));
        }
    }
    let mut out = CVec::zeros(n);
    for k in 0..n {
        let r = finite(&format!("{path}_re[{k}]"), re[k])?;
        let i = match im {
            Some(im) => finite(&format!("{path}_im[{k}]"), im[k])?,
            None => 0.0,
        };
        out[k] = Complex64::new(r, i);
    }
    Ok(out)
}

fn real_matrix(path: &str, rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n {
        return schema(path, format!("expected {n} rows, got {}", rows.len()));
    }
    let mut m = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return schema(format!("{path}[{i}]"), format!("expected {n} columns, got {}", row.len()));
        }
        for (j, &v) in row.iter().enumerate() {
            m[(i, j)] = finite(&format!("{path}[{i}][{j}]"), v)?;
        }
    }
    Ok(m)
}

fn matrix(path: &str, spec: Option<&MatrixSpec>, n: usize) -> Result<CMat> {
    let Some(spec) = spec else {
        return Ok(CMat::zeros(n, n));
    };
    let re = real_matrix(&format!("{path}.re"), &spec.re, n)?;
    let im = match &spec.im {
        Some(im) => real_matrix(&format!("{path}.im"), im, n)?,
        None => DMatrix::zeros(n, n),
    };
    Ok(CMat::from_fn(n, n, |i, j| Complex64::new(re[(i, j)], im[(i, j)])))
}

/// Builds the law and checks that it is a valid distribution with
/// independent real and imaginary parts.
fn normal(path: &str, mean: CVec, gamma: CMat, relation: CMat) -> Result<ComplexNormal> {
    let law = ComplexNormal::new(mean, gamma, relation).or_else(|e| schema(path, e))?;
    law.independent_blocks().or_else(|e| schema(path, e))?;
    Ok(law)
}

fn level(path: &str, p: f64) -> Result<f64> {
    finite(path, p)?;
    if (0.5..1.0).contains(&p) {
        Ok(p)
    } else {
        schema(path, format!("probability must lie in [0.5, 1), got {p}"))
    }
}

impl ProblemFile {
    pub fn parse(text: &str) -> Result<Problem> {
        from_json::<ProblemFile>(text)?.to_problem()
    }

    pub fn to_problem(&self) -> Result<Problem> {
        let n = self.n;
        if n == 0 {
            return schema("n", "dimension must be positive");
        }
        let o = &self.objective;
        let q1 = finite("objective.q1", o.q1)?;
        let q2 = finite("objective.q2", o.q2)?;
        if q1 < 0.0 {
            return schema("objective.q1", "weight must be nonnegative");
        }
        if q2 < 0.0 {
            return schema("objective.q2", "weight must be nonnegative");
        }
        let objective = normal(
            "objective",
            vector("objective.mean", &o.mean_re, o.mean_im.as_deref(), n)?,
            matrix("objective.gamma", o.gamma.as_ref(), n)?,
            matrix("objective.relation", o.relation.as_ref(), n)?,
        )?;
        if self.rows.is_empty() {
            return schema("rows", "at least one row is required");
        }
        let mut rows = Vec::with_capacity(self.rows.len());
        let mut levels = Vec::with_capacity(self.rows.len());
        for (i, r) in self.rows.iter().enumerate() {
            let path = format!("rows[{i}]");
            let a = normal(
                &path,
                vector(&format!("{path}.mean"), &r.mean_re, r.mean_im.as_deref(), n)?,
                matrix(&format!("{path}.gamma"), r.gamma.as_ref(), n)?,
                matrix(&format!("{path}.relation"), r.relation.as_ref(), n)?,
            )?;
            let bp = format!("{path}.b");
            let rel = r.b.relation.unwrap_or(ComplexSpec { re: 0.0, im: 0.0 });
            let b = ComplexNormal::scalar(
                Complex64::new(finite(&format!("{bp}.mean_re"), r.b.mean_re)?, finite(&format!("{bp}.mean_im"), r.b.mean_im)?),
                finite(&format!("{bp}.gamma"), r.b.gamma)?,
                Complex64::new(finite(&format!("{bp}.relation.re"), rel.re)?, finite(&format!("{bp}.relation.im"), rel.im)?),
            );
            let b = normal(&bp, b.mean, b.covariance, b.relation)?;
            rows.push(RandomRow::new(a, b).or_else(|e| schema(&path, e))?);
            match (self.kind, r.p) {
                (ProblemKind::Individual, Some(p)) => levels.push(level(&format!("{path}.p"), p)?),
                (ProblemKind::Individual, None) => return schema(format!("{path}.p"), "missing row probability"),
                (ProblemKind::Joint, Some(_)) => {
                    return schema(format!("{path}.p"), "row probabilities apply to individual problems only")
                }
                (ProblemKind::Joint, None) => {}
            }
        }
        let problem = match self.kind {
            ProblemKind::Individual => {
                if self.p.is_some() {
                    return schema("p", "a joint level applies to joint problems only");
                }
                if self.theta.is_some() {
                    return schema("theta", "theta applies to joint problems only");
                }
                let prob = IndividualCccp { objective, q1, q2, rows, levels, nonneg_z: self.nonneg };
                prob.validate().or_else(|e| schema("$", e))?;
                Problem::Individual(prob)
            }
            ProblemKind::Joint => {
                let Some(p) = self.p else {
                    return schema("p", "missing joint probability");
                };
                let p = level("p", p)?;
                let theta = finite("theta", self.theta.unwrap_or(1.0))?;
                if theta < 1.0 {
                    return schema("theta", format!("copula parameter must be >= 1, got {theta}"));
                }
                let prob = JointCccp { objective, q1, q2, rows, p, theta, nonneg_z: self.nonneg };
                prob.validate().or_else(|e| schema("$", e))?;
                Problem::Joint(prob)
            }
        };
        Ok(problem)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Individual,
    JointLower,
    JointUpper,
    JointBounds,
    JointGrid,
}

impl SolveMethod {
    pub const ALL: [SolveMethod; 5] = [
        SolveMethod::Individual,
        SolveMethod::JointLower,
        SolveMethod::JointUpper,
        SolveMethod::JointBounds,
        SolveMethod::JointGrid,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SolveMethod::Individual => "individual",
            SolveMethod::JointLower => "joint-lower",
            SolveMethod::JointUpper => "joint-upper",
            SolveMethod::JointBounds => "joint-bounds",
            SolveMethod::JointGrid => "joint-grid",
        }
    }
}

impl fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolveMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Domain(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplexVector {
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexVector {
    pub fn to_cvec(&self) -> Result<CVec> {
        vector("z", &self.re, Some(&self.im), self.re.len())
    }
}

impl From<&CVec> for ComplexVector {
    fn from(z: &CVec) -> Self {
        ComplexVector { re: z.iter().map(|c| c.re).collect(), im: z.iter().map(|c| c.im).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionSpec {
    pub z: ComplexVector,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub points: usize,
    pub lower: f64,
    pub upper: f64,
    pub gap: f64,
    pub upper_valid: bool,
    pub paper_condition: bool,
    pub lower_solution: SolutionSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub step: f64,
    pub evaluated: usize,
    pub feasible: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<Residuals>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultFile {
    pub tool_version: String,
    pub kind: ProblemKind,
    pub method: SolveMethod,
    pub status: Status,
    /// The reported solution: the exact optimum for `individual`, the
    /// approximating program's optimum for the bound methods (the upper one
    /// for `joint-bounds`) and the best grid point for `joint-grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solution: Option<SolutionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl ResultFile {
    pub fn new(kind: ProblemKind, method: SolveMethod, status: Status) -> Self {
        ResultFile {
            tool_version: TOOL_VERSION.to_string(),
            kind,
            method,
            status,
            solution: None,
            bounds: None,
            grid: None,
            solver: None,
            validation: None,
            seed: None,
            message: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        from_json(text)
    }

    pub fn to_json(&self) -> Result<String> {
        to_json(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Approximation points of the bound programs.
    pub points: usize,
    pub grid_step: f64,
    pub solver: SolverConfig,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { points: DEFAULT_APPROX_POINTS, grid_step: 0.05, solver: SolverConfig::default() }
    }
}

fn bound_spec(b: &BoundSolution) -> SolutionSpec {
    SolutionSpec { z: (&b.z).into(), y: Some(b.y.clone()), objective: b.objective }
}

/// Solves `problem` with `method`. Solver outcomes other than optimality are
/// reported through the status of the result; invalid combinations of
/// problem and method are errors. `individual` on a joint problem solves
/// every row at the joint level.
pub fn solve_problem(problem: &Problem, method: SolveMethod, opts: &SolveOptions) -> Result<ResultFile> {
    let kind = match problem {
        Problem::Individual(_) => ProblemKind::Individual,
        Problem::Joint(_) => ProblemKind::Joint,
    };
    let mut out = ResultFile::new(kind, method, Status::Optimal);
    let joint = match (problem, method) {
        (_, SolveMethod::Individual) => None,
        (Problem::Joint(j), _) => Some(j),
        (Problem::Individual(_), _) => {
            return schema("kind", format!("method {method} requires a joint problem"));
        }
    };
    let cfg = &opts.solver;
    let outcome = match (joint, method) {
        (None, _) => {
            let owned;
            let ind = match problem {
                Problem::Individual(p) => p,
                Problem::Joint(j) => {
                    owned = j.as_individual();
                    &owned
                }
            };
            solve_individual(ind, cfg).map(|s| {
                out.solution = Some(SolutionSpec { z: (&s.z).into(), y: None, objective: s.objective });
                out.solver = Some(SolverSpec { iterations: s.result.iterations, residuals: Some(s.result.residuals) });
            })
        }
        (Some(j), SolveMethod::JointLower | SolveMethod::JointUpper) => {
            let solved = if method == SolveMethod::JointLower {
                solve_joint_lower(j, opts.points, cfg)
            } else {
                solve_joint_upper(j, opts.points, cfg)
            };
            solved.map(|b| {
                out.solution = Some(bound_spec(&b));
                out.solver = Some(SolverSpec { iterations: b.iterations, residuals: None });
            })
        }
        (Some(j), SolveMethod::JointBounds) => solve_joint_bounds(j, opts.points, cfg).map(|r| {
            out.solution = Some(bound_spec(&r.upper));
            out.bounds = Some(BoundsSpec {
                points: r.points,
                lower: r.lower.objective,
                upper: r.upper.objective,
                gap: r.gap,
                upper_valid: r.upper_valid,
                paper_condition: r.paper_condition,
                lower_solution: bound_spec(&r.lower),
            });
            out.solver = Some(SolverSpec { iterations: r.lower.iterations + r.upper.iterations, residuals: None });
        }),
        (Some(j), _) => solve_joint_grid(j, opts.grid_step, cfg).map(|g| {
            out.solution = Some(SolutionSpec { z: (&g.z).into(), y: Some(g.y.clone()), objective: g.objective });
            out.grid = Some(GridSpec { step: opts.grid_step, evaluated: g.evaluated, feasible: g.feasible });
        }),
    };
    match outcome {
        Ok(()) => Ok(out),
        Err(Error::Solver(status)) => {
            out.status = status;
            out.message = Some(Error::Solver(status).to_string());
            Ok(out)
        }
        Err(e) => Err(e),
    }
}
