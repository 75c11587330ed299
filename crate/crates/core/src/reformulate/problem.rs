use nalgebra::{DMatrix, DVector};

use crate::cnormal::ComplexNormal;
use crate::error::{Error, Result};
use crate::linalg::{self, CVec, SymPsd};

/// A random constraint row `Re(A z − b) ≤ 0` with independent `A` and `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomRow {
    pub a: ComplexNormal,
    pub b: ComplexNormal,
}

impl RandomRow {
    pub fn new(a: ComplexNormal, b: ComplexNormal) -> Result<Self> {
        if b.dim() != 1 {
            return Err(Error::DimensionMismatch(format!("b must be scalar, got dimension {}", b.dim())));
        }
        Ok(RandomRow { a, b })
    }
}

/// Individually chance-constrained problem
///
/// ```text
/// min  q₁ Re(μ_cᴴ z) + q₂ sd(Re(cᴴ z))
/// s.t. P[Re(Aᵢ z − bᵢ) ≤ 0] ≥ pᵢ   for every row i
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct IndividualCccp {
    pub objective: ComplexNormal,
    pub q1: f64,
    pub q2: f64,
    pub rows: Vec<RandomRow>,
    pub levels: Vec<f64>,
    /// Impose `Re z ≥ 0` and `Im z ≥ 0`.
    pub nonneg_z: bool,
}

/// Jointly chance-constrained problem: `P[Re(A z − b) ≤ 0] ≥ p` over all
/// rows at once, rows coupled through a copula with parameter `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCccp {
    pub objective: ComplexNormal,
    pub q1: f64,
    pub q2: f64,
    pub rows: Vec<RandomRow>,
    pub p: f64,
    pub theta: f64,
    pub nonneg_z: bool,
}

fn check_level(p: f64, what: &str) -> Result<()> {
    if (0.5..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must lie in [0.5, 1), got {p}")))
    }
}

fn check_common(objective: &ComplexNormal, q1: f64, q2: f64, rows: &[RandomRow]) -> Result<()> {
    let n = objective.dim();
    if n == 0 {
        return Err(Error::DimensionMismatch("empty decision vector".into()));
    }
    if !(q1 >= 0.0 && q2 >= 0.0 && q1.is_finite() && q2.is_finite()) {
        return Err(Error::Domain(format!("objective weights must be nonnegative, got ({q1}, {q2})")));
    }
    objective.independent_blocks()?;
    for (i, r) in rows.iter().enumerate() {
        if r.a.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has dimension {}, objective has {n}",
                r.a.dim()
            )));
        }
        r.a.independent_blocks()?;
        r.b.independent_blocks()?;
    }
    Ok(())
}

impl IndividualCccp {
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn validate(&self) -> Result<()> {
        check_common(&self.objective, self.q1, self.q2, &self.rows)?;
        if self.levels.len() != self.rows.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} probability levels",
                self.rows.len(),
                self.levels.len()
            )));
        }
        for (i, &p) in self.levels.iter().enumerate() {
            check_level(p, &format!("level of row {i}"))?;
        }
        Ok(())
    }

    /// `q₁ Re(μ_cᴴ z) + q₂ sd` evaluated directly from the distribution.
    pub fn objective_value(&self, z: &CVec) -> Result<f64> {
        let stats = self.objective.re_inner_stats(z)?;
        Ok(self.q1 * stats.mean + self.q2 * stats.std_dev())
    }
}

impl JointCccp {
    pub fn dim(&self) -> usize {
        self.objective.dim()
    }

    pub fn validate(&self) -> Result<()> {
        check_common(&self.objective, self.q1, self.q2, &self.rows)?;
        check_level(self.p, "joint level p")?;
        if !(self.theta >= 1.0 && self.theta.is_finite()) {
            return Err(Error::Domain(format!("copula parameter must be >= 1, got {}", self.theta)));
        }
        if self.rows.is_empty() {
            return Err(Error::DimensionMismatch("joint problem without rows".into()));
        }
        Ok(())
    }

    /// The individual problem obtained by fixing the allocation `y`, each
    /// row at level `p^{yᵢ^{1/θ}}`.
    pub fn at_allocation(&self, y: &[f64]) -> Result<IndividualCccp> {
        if y.len() != self.rows.len() {
            return Err(Error::DimensionMismatch(format!(
                "allocation of length {} for {} rows",
                y.len(),
                self.rows.len()
            )));
        }
        let levels = y
            .iter()
            .map(|&yi| super::copula_exponent(self.p, self.theta, yi))
            .collect::<Result<Vec<_>>>()?;
        Ok(IndividualCccp {
            objective: self.objective.clone(),
            q1: self.q1,
            q2: self.q2,
            rows: self.rows.clone(),
            levels,
            nonneg_z: self.nonneg_z,
        })
    }

    /// The individual problem with every row at the joint level `p`.
    pub fn as_individual(&self) -> IndividualCccp {
        IndividualCccp {
            objective: self.objective.clone(),
            q1: self.q1,
            q2: self.q2,
            rows: self.rows.clone(),
            levels: vec![self.p; self.rows.len()],
            nonneg_z: self.nonneg_z,
        }
    }
}

/// Real data of one row over `s = [Re z; Im z; 1]`.
pub(crate) struct RowData {
    /// `K₃ = [−Re μ_A; Im μ_A; Re μ_b]`, so that `sᵀK₃ = Re μ_b − Re(μ_A z)`.
    pub k3: DVector<f64>,
    /// Nonzero rows of the square root of `blkdiag(Γx(A), Γy(A), σ_b)`.
    pub factor: DMatrix<f64>,
}

/// Drops all-zero rows of a square-root factor; they add nothing to the norm.
pub(crate) fn compress_rows(f: DMatrix<f64>) -> DMatrix<f64> {
    let scale = f.amax();
    let keep: Vec<usize> = (0..f.nrows())
        .filter(|&i| f.row(i).amax() > 1e-14 * scale.max(f64::MIN_POSITIVE))
        .collect();
    f.select_rows(&keep)
}

pub(crate) fn row_data(row: &RandomRow) -> Result<RowData> {
    let n = row.a.dim();
    let (gx, gy) = row.a.independent_blocks()?;
    row.b.independent_blocks()?;
    let sigma_b = SymPsd::new(DMatrix::from_element(1, 1, row.b.real_part_variance()))?;
    let k = linalg::block_diag(&[gx.as_matrix(), gy.as_matrix(), sigma_b.as_matrix()]);
    let factor = compress_rows(SymPsd::new(k)?.sqrt());
    let mut k3 = DVector::zeros(2 * n + 1);
    for j in 0..n {
        k3[j] = -row.a.mean[j].re;
        k3[n + j] = row.a.mean[j].im;
    }
    k3[2 * n] = row.b.mean[0].re;
    Ok(RowData { k3, factor })
}

/// `K₀ = [Re μ_c; Im μ_c; 0]` and the compressed square root of
/// `K₁ = blkdiag(Γx(c), Γy(c), 0)`.
pub(crate) fn objective_data(c: &ComplexNormal) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = c.dim();
    let (gx, gy) = c.independent_blocks()?;
    let zero = DMatrix::zeros(1, 1);
    let k1 = linalg::block_diag(&[gx.as_matrix(), gy.as_matrix(), &zero]);
    let factor = compress_rows(SymPsd::new(k1)?.sqrt());
    let mut k0 = DVector::zeros(2 * n + 1);
    for j in 0..n {
        k0[j] = c.mean[j].re;
        k0[n + j] = c.mean[j].im;
    }
    Ok((k0, factor))
}
