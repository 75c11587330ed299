//! Infeasible-start primal-dual interior-point method on the homogeneous
//! self-dual embedding
//!
//! ```text
//! A x − b τ = 0,   Aᵀy + s − c τ = 0,   −cᵀx + bᵀy − κ = 0,
//! (x, τ) ∈ K × R₊,  (s, κ) ∈ K* × R₊,
//! ```
//!
//! with Nesterov–Todd scaling and a Mehrotra predictor-corrector. Dense
//! linear algebra throughout; the reduced KKT system is factored once per
//! iteration and reused by both the predictor and the corrector.

use nalgebra::{DMatrix, DVector};

use super::cone::{self, Cone, SocScaling};
use super::{residuals, ConicProgram, PresolveInfo, Residuals, SolveResult, SolverConfig, Status};
use crate::error::Result;

const REFINEMENT_STEPS: usize = 3;

enum BlockScaling {
    Free,
    NonNeg { w: Vec<f64> },
    Soc(SocScaling),
}

struct Blocks {
    cones: Vec<(Cone, usize)>,
    degree: usize,
}

impl Blocks {
    fn new(cones: &[Cone]) -> Self {
        let mut at = 0;
        let cones = cones
            .iter()
            .map(|&c| {
                let s = at;
                at += c.dim();
                (c, s)
            })
            .collect::<Vec<_>>();
        let degree = cones.iter().map(|(c, _)| c.degree()).sum();
        Blocks { cones, degree }
    }
}

struct Direction {
    dx: DVector<f64>,
    dy: DVector<f64>,
    ds: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

/// Row presolve: drops zero and linearly dependent equality rows. Returns the
/// kept row indices, or `None` when a dropped row is inconsistent.
fn presolve_rows(a: &DMatrix<f64>, b: &DVector<f64>) -> (Option<Vec<usize>>, PresolveInfo) {
    let m = a.nrows();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..m {
        let row = a.row(i).transpose();
        let norm = row.norm();
        let mut r = row.clone();
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&r);
                r.axpy(-proj, q, 1.0);
            }
        }
        let rn = r.norm();
        if norm == 0.0 || rn <= 1e-10 * norm {
            dropped.push(i);
        } else {
            basis.push(r / rn);
            kept.push(i);
        }
    }
    let mut info = PresolveInfo { removed_rows: dropped.len(), fixed_free_vars: 0 };
    if !dropped.is_empty() {
        // Minimum-norm solution of the kept rows must satisfy the dropped ones.
        let ak = a.select_rows(&kept);
        let bk = b.select_rows(&kept);
        let gram = &ak * ak.transpose();
        let x0 = match gram.cholesky() {
            Some(ch) => ak.transpose() * ch.solve(&bk),
            None => DVector::zeros(a.ncols()),
        };
        for &i in &dropped {
            let lhs = a.row(i).dot(&x0.transpose());
            if (lhs - b[i]).abs() > 1e-9 * (1.0 + b[i].abs()) {
                return (None, info);
            }
        }
    }
    info.fixed_free_vars = 0;
    (Some(kept), info)
}

fn count_fixed_free(a: &DMatrix<f64>, cones: &Blocks) -> usize {
    let mut free = vec![false; a.ncols()];
    for (c, s) in &cones.cones {
        if let Cone::Free(k) = c {
            free[*s..*s + *k].iter_mut().for_each(|f| *f = true);
        }
    }
    (0..a.nrows())
        .filter(|&i| {
            let nz: Vec<usize> = (0..a.ncols()).filter(|&j| a[(i, j)] != 0.0).collect();
            nz.len() == 1 && free[nz[0]]
        })
        .count()
}

pub fn solve(p: &ConicProgram, cfg: &SolverConfig) -> Result<SolveResult> {
    p.validate()?;
    cfg.validate()?;
    let blocks = Blocks::new(&p.cones);
    let (kept, mut info) = presolve_rows(&p.eq_matrix, &p.eq_rhs);
    let n = p.num_vars();
    let Some(kept) = kept else {
        return Ok(SolveResult {
            status: Status::PrimalInfeasible,
            primal: DVector::zeros(n),
            dual: DVector::zeros(p.num_eqs()),
            dual_slack: DVector::zeros(n),
            objective: f64::NAN,
            dual_objective: f64::NAN,
            residuals: Residuals::default(),
            iterations: 0,
            presolve: info,
        });
    };
    let a = p.eq_matrix.select_rows(&kept);
    let b = p.eq_rhs.select_rows(&kept);
    info.fixed_free_vars = count_fixed_free(&a, &blocks);
    // unit-norm data; the cones are invariant under positive scaling
    let unit = |v: f64| if v > 0.0 && v.is_finite() { v } else { 1.0 };
    let (bs, cs) = (unit(b.norm()), unit(p.objective.norm()));
    let mut ipm = Ipm::new(a, b / bs, &p.objective / cs, blocks, *cfg);
    let (status, iterations) = ipm.run();

    // Map back to the original rows; certificates stay homogeneous.
    let mut dual = DVector::zeros(p.num_eqs());
    let tau = match status {
        Status::PrimalInfeasible | Status::DualInfeasible => 1.0,
        _ => ipm.tau,
    };
    for (k, &i) in kept.iter().enumerate() {
        dual[i] = ipm.y[k] * cs / tau;
    }
    let primal = &ipm.x * (bs / tau);
    let dual_slack = &ipm.s * (cs / tau);
    let res = residuals(p, &primal, &dual)?;
    Ok(SolveResult {
        status,
        objective: p.objective.dot(&primal),
        dual_objective: p.eq_rhs.dot(&dual),
        primal,
        dual,
        dual_slack,
        residuals: res,
        iterations,
        presolve: info,
    })
}

struct Ipm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    blocks: Blocks,
    cfg: SolverConfig,
    x: DVector<f64>,
    y: DVector<f64>,
    s: DVector<f64>,
    tau: f64,
    kappa: f64,
}

impl Ipm {
    fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>, blocks: Blocks, cfg: SolverConfig) -> Self {
        let n = c.len();
        let m = b.len();
        let mut x = DVector::zeros(n);
        let mut s = DVector::zeros(n);
        for (cone, start) in &blocks.cones {
            cone.identity(x.rows_mut(*start, cone.dim()));
            cone.identity(s.rows_mut(*start, cone.dim()));
        }
        Ipm { a, b, c, blocks, cfg, x, y: DVector::zeros(m), s, tau: 1.0, kappa: 1.0 }
    }

    fn mu(&self) -> f64 {
        (self.x.dot(&self.s) + self.tau * self.kappa) / (self.blocks.degree + 1) as f64
    }

    fn run(&mut self) -> (Status, usize) {
        let bnorm = self.b.norm().max(1.0);
        let cnorm = self.c.norm().max(1.0);
        for iter in 0..=self.cfg.max_iterations {
            let rp = &self.b * self.tau - &self.a * &self.x;
            let rd = &self.c * self.tau - self.a.transpose() * &self.y - &self.s;
            let rg = self.kappa + self.c.dot(&self.x) - self.b.dot(&self.y);

            // termination on the de-homogenized iterate
            let pres = rp.norm() / self.tau / bnorm;
            let dres = rd.norm() / self.tau / cnorm;
            let pobj = self.c.dot(&self.x) / self.tau;
            let dobj = self.b.dot(&self.y) / self.tau;
            let gap = (pobj - dobj).abs() / pobj.abs().max(dobj.abs()).max(1.0);
            log::trace!(
                "{iter}: pres {pres:.2e} dres {dres:.2e} gap {gap:.2e} pobj {pobj:.8e} tau {:.2e} kappa {:.2e}",
                self.tau,
                self.kappa
            );
            if pres <= self.cfg.tol_feas && dres <= self.cfg.tol_feas && gap <= self.cfg.tol_gap {
                return (Status::Optimal, iter);
            }
            let by = self.b.dot(&self.y);
            if by > 0.0 {
                let cert = (self.a.transpose() * &self.y + &self.s).norm() / by;
                if cert <= self.cfg.tol_infeas {
                    return (Status::PrimalInfeasible, iter);
                }
            }
            let cx = self.c.dot(&self.x);
            if cx < 0.0 {
                let cert = (&self.a * &self.x).norm() / -cx;
                if cert <= self.cfg.tol_infeas {
                    return (Status::DualInfeasible, iter);
                }
            }
            if iter == self.cfg.max_iterations {
                return (Status::MaxIterations, iter);
            }
            if !self.step(&rp, &rd, rg) {
                return (Status::NumericalError, iter);
            }
        }
        unreachable!()
    }

    fn scalings(&self) -> (Vec<BlockScaling>, DVector<f64>) {
        let mut lambda = DVector::zeros(self.x.len());
        let scalings = self
            .blocks
            .cones
            .iter()
            .map(|(cone, start)| {
                let k = cone.dim();
                let xs = self.x.as_slice()[*start..*start + k].to_vec();
                let ss = self.s.as_slice()[*start..*start + k].to_vec();
                match cone {
                    Cone::Free(_) => BlockScaling::Free,
                    Cone::NonNeg(_) => {
                        let w: Vec<f64> = xs.iter().zip(&ss).map(|(x, s)| (x / s).sqrt()).collect();
                        for i in 0..k {
                            lambda[start + i] = (xs[i] * ss[i]).sqrt();
                        }
                        BlockScaling::NonNeg { w }
                    }
                    Cone::SecondOrder(_) => {
                        let sc = cone::soc_nt_scaling(&xs, &ss);
                        let l = &sc.w * DVector::from_vec(ss);
                        lambda.rows_mut(*start, k).copy_from(&l);
                        BlockScaling::Soc(sc)
                    }
                }
            })
            .collect();
        (scalings, lambda)
    }

    /// Applies `W` (or `W⁻¹`) block-wise; free blocks map to zero.
    fn apply_w(&self, sc: &[BlockScaling], v: &DVector<f64>, inverse: bool) -> DVector<f64> {
        let mut out = DVector::zeros(v.len());
        for ((cone, start), s) in self.blocks.cones.iter().zip(sc) {
            let k = cone.dim();
            match s {
                BlockScaling::Free => {}
                BlockScaling::NonNeg { w } => {
                    for i in 0..k {
                        out[start + i] = if inverse { v[start + i] / w[i] } else { v[start + i] * w[i] };
                    }
                }
                BlockScaling::Soc(sc) => {
                    let m = if inverse { &sc.w_inv } else { &sc.w };
                    let r = m * v.rows(*start, k);
                    out.rows_mut(*start, k).copy_from(&r);
                }
            }
        }
        out
    }

    fn jordan(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(u.len());
        for (cone, start) in &self.blocks.cones {
            let k = cone.dim();
            let r = *start..*start + k;
            match cone {
                Cone::Free(_) => {}
                Cone::NonNeg(_) => {
                    for i in r {
                        out[i] = u[i] * v[i];
                    }
                }
                Cone::SecondOrder(_) => {
                    cone::soc_product(&u.as_slice()[r.clone()], &v.as_slice()[r.clone()], &mut out.as_mut_slice()[r]);
                }
            }
        }
        out
    }

    fn jordan_div(&self, lambda: &DVector<f64>, r: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(r.len());
        for (cone, start) in &self.blocks.cones {
            let k = cone.dim();
            let rg = *start..*start + k;
            match cone {
                Cone::Free(_) => {}
                Cone::NonNeg(_) => {
                    for i in rg {
                        out[i] = r[i] / lambda[i];
                    }
                }
                Cone::SecondOrder(_) => {
                    cone::soc_division(
                        &lambda.as_slice()[rg.clone()],
                        &r.as_slice()[rg.clone()],
                        &mut out.as_mut_slice()[rg],
                    );
                }
            }
        }
        out
    }

    fn identity_scaled(&self, mu: f64) -> DVector<f64> {
        let mut e = DVector::zeros(self.x.len());
        for (cone, start) in &self.blocks.cones {
            cone.identity(e.rows_mut(*start, cone.dim()));
        }
        e * mu
    }

    /// Dense `W` as a block-diagonal matrix, the identity on free blocks.
    fn scaling_matrix(&self, sc: &[BlockScaling]) -> DMatrix<f64> {
        let n = self.x.len();
        let mut w = DMatrix::zeros(n, n);
        for ((cone, start), s) in self.blocks.cones.iter().zip(sc) {
            let k = cone.dim();
            match s {
                BlockScaling::Free => {
                    for i in 0..k {
                        w[(start + i, start + i)] = 1.0;
                    }
                }
                BlockScaling::NonNeg { w: d } => {
                    for i in 0..k {
                        w[(start + i, start + i)] = d[i];
                    }
                }
                BlockScaling::Soc(sc) => w.view_mut((*start, *start), (k, k)).copy_from(&sc.w),
            }
        }
        w
    }

    fn max_step(&self, d: &Direction) -> f64 {
        let mut alpha = f64::INFINITY;
        for (cone, start) in &self.blocks.cones {
            let k = cone.dim();
            let r = *start..*start + k;
            let (x, dx) = (&self.x.as_slice()[r.clone()], &d.dx.as_slice()[r.clone()]);
            let (s, ds) = (&self.s.as_slice()[r.clone()], &d.ds.as_slice()[r]);
            match cone {
                Cone::Free(_) => {}
                Cone::NonNeg(_) => {
                    alpha = cone::nonneg_step(x, dx, alpha);
                    alpha = cone::nonneg_step(s, ds, alpha);
                }
                Cone::SecondOrder(_) => {
                    alpha = cone::soc_step(x, dx, alpha);
                    alpha = cone::soc_step(s, ds, alpha);
                }
            }
        }
        if d.dtau < 0.0 {
            alpha = alpha.min(-self.tau / d.dtau);
        }
        if d.dkappa < 0.0 {
            alpha = alpha.min(-self.kappa / d.dkappa);
        }
        alpha
    }

    fn step(&mut self, rp: &DVector<f64>, rd: &DVector<f64>, rg: f64) -> bool {
        let n = self.x.len();
        let m = self.b.len();
        let (sc, lambda) = self.scalings();
        let reg = self.cfg.regularization;

        // with H = W⁻² and dx = W u the system becomes [[−D, (AW)ᵀ], [AW, 0]], where D is
        // the identity on cone coordinates and zero on free ones
        let wmat = self.scaling_matrix(&sc);
        let aw = &self.a * &wmat;
        let mut kkt = DMatrix::zeros(n + m, n + m);
        for (cone, start) in &self.blocks.cones {
            if !matches!(cone, Cone::Free(_)) {
                for i in *start..*start + cone.dim() {
                    kkt[(i, i)] = -1.0;
                }
            }
        }
        kkt.view_mut((0, n), (n, m)).copy_from(&aw.transpose());
        kkt.view_mut((n, 0), (m, n)).copy_from(&aw);
        let mut kreg = kkt.clone();
        for (cone, start) in &self.blocks.cones {
            if let Cone::Free(k) = cone {
                for i in *start..*start + *k {
                    kreg[(i, i)] -= reg;
                }
            }
        }
        for i in n..n + m {
            kreg[(i, i)] += reg;
        }
        let lu = kreg.lu();
        let solve = |rhs: &DVector<f64>| -> Option<DVector<f64>> {
            let mut scaled = rhs.clone();
            scaled.rows_mut(0, n).copy_from(&(&wmat * rhs.rows(0, n)));
            let mut sol = lu.solve(&scaled)?;
            for _ in 0..REFINEMENT_STEPS {
                let res = &scaled - &kkt * &sol;
                if res.norm() <= 1e-15 * scaled.norm().max(1e-300) {
                    break;
                }
                sol += lu.solve(&res)?;
            }
            let dx = &wmat * sol.rows(0, n);
            sol.rows_mut(0, n).copy_from(&dx);
            sol.iter().all(|v| v.is_finite()).then_some(sol)
        };

        let mut rhs2 = DVector::zeros(n + m);
        rhs2.rows_mut(0, n).copy_from(&self.c);
        rhs2.rows_mut(n, m).copy_from(&self.b);
        let Some(sol2) = solve(&rhs2) else { return false };
        let dx2 = sol2.rows(0, n).into_owned();
        let dy2 = sol2.rows(n, m).into_owned();
        // equals −cᵀdx₂ + bᵀdy₂ + κ/τ, written in its manifestly positive form
        let denom = self.apply_w(&sc, &dx2, true).norm_squared() + self.kappa / self.tau;

        let direction = |eta: f64, rc: &DVector<f64>, rtau: f64| -> Option<Direction> {
            let xi = self.apply_w(&sc, &self.jordan_div(&lambda, rc), true);
            let mut rhs = DVector::zeros(n + m);
            rhs.rows_mut(0, n).copy_from(&(rd * eta - &xi));
            rhs.rows_mut(n, m).copy_from(&(rp * eta));
            let sol1 = solve(&rhs)?;
            let dx1 = sol1.rows(0, n);
            let dy1 = sol1.rows(n, m);
            let num = eta * rg + self.c.dot(&dx1) - self.b.dot(&dy1) + rtau / self.tau;
            let dtau = num / denom;
            if !dtau.is_finite() {
                return None;
            }
            let dx = dx1 + &dx2 * dtau;
            let dy = dy1 + &dy2 * dtau;
            let ds = rd * eta + &self.c * dtau - self.a.transpose() * &dy;
            let dkappa = (rtau - self.kappa * dtau) / self.tau;
            Some(Direction { dx, dy, ds, dtau, dkappa })
        };

        if !(denom.is_finite() && denom > 0.0) {
            return false;
        }
        let mu = self.mu();
        let lam_sq = self.jordan(&lambda, &lambda);

        // predictor
        let Some(aff) = direction(1.0, &(-&lam_sq), -self.tau * self.kappa) else { return false };
        let alpha_aff = self.max_step(&aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector
        let wdx = self.apply_w(&sc, &aff.dx, true);
        let wds = self.apply_w(&sc, &aff.ds, false);
        let rc = self.identity_scaled(sigma * mu) - &lam_sq - self.jordan(&wdx, &wds);
        let rtau = sigma * mu - self.tau * self.kappa - aff.dtau * aff.dkappa;
        let Some(dir) = direction(1.0 - sigma, &rc, rtau) else { return false };
        let alpha = (self.cfg.step_fraction * self.max_step(&dir)).min(1.0);
        if !(alpha.is_finite() && alpha > 0.0) {
            return false;
        }

        self.x += &dir.dx * alpha;
        self.y += &dir.dy * alpha;
        self.s += &dir.ds * alpha;
        self.tau += alpha * dir.dtau;
        self.kappa += alpha * dir.dkappa;
        // free blocks carry no dual slack
        for (cone, start) in &self.blocks.cones {
            if let Cone::Free(k) = cone {
                self.s.rows_mut(*start, *k).fill(0.0);
            }
        }
        self.tau > 0.0 && self.kappa > 0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::socp::ProgramBuilder;

    #[test]
    fn bound_attaining_lp() {
        // min x s.t. x − slack = 3, x, slack ≥ 0
        let mut b = ProgramBuilder::new();
        let v = b.add_block("x", Cone::NonNeg(2));
        b.add_cost(v, 1.0);
        b.add_eq(vec![(v, 1.0), (v + 1, -1.0)], 3.0);
        let p = b.build();
        let r = solve(&p, &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.primal[0] - 3.0).abs() < 1e-7);
    }

    #[test]
    fn norm_of_fixed_vector() {
        let mut b = ProgramBuilder::new();
        let t = b.add_block("soc", Cone::SecondOrder(3));
        b.add_cost(t, 1.0);
        b.add_eq(vec![(t + 1, 1.0)], 1.0);
        b.add_eq(vec![(t + 2, 1.0)], 1.0);
        let r = solve(&b.build(), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.objective - std::f64::consts::SQRT_2).abs() < 1e-7);
    }

    #[test]
    fn duplicate_rows_are_presolved() {
        let mut b = ProgramBuilder::new();
        let v = b.add_block("x", Cone::NonNeg(2));
        b.add_cost(v, 1.0);
        b.add_cost(v + 1, 2.0);
        b.add_eq(vec![(v, 1.0), (v + 1, 1.0)], 1.0);
        b.add_eq(vec![(v, 2.0), (v + 1, 2.0)], 2.0);
        b.add_eq(vec![], 0.0);
        let r = solve(&b.build(), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert_eq!(r.presolve.removed_rows, 2);
        assert!((r.objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn inconsistent_rows_are_infeasible() {
        let mut b = ProgramBuilder::new();
        let v = b.add_block("x", Cone::Free(1));
        b.add_eq(vec![(v, 1.0)], 1.0);
        b.add_eq(vec![(v, 2.0)], 3.0);
        let r = solve(&b.build(), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::PrimalInfeasible);
    }

    #[test]
    fn certificate_for_infeasible_orthant() {
        // x ≥ 0 with x₁ + x₂ = −1
        let mut b = ProgramBuilder::new();
        let v = b.add_block("x", Cone::NonNeg(2));
        b.add_cost(v, 1.0);
        b.add_eq(vec![(v, 1.0), (v + 1, 1.0)], -1.0);
        let r = solve(&b.build(), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::PrimalInfeasible);
    }

    #[test]
    fn certificate_for_unbounded() {
        // min −x₁ s.t. x₁ − x₂ = 0, x ≥ 0
        let mut b = ProgramBuilder::new();
        let v = b.add_block("x", Cone::NonNeg(2));
        b.add_cost(v, -1.0);
        b.add_eq(vec![(v, 1.0), (v + 1, -1.0)], 0.0);
        let r = solve(&b.build(), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::DualInfeasible);
    }

    #[test]
    fn free_variables_with_soc_epigraph() {
        // min t s.t. ‖(u − 1, v + 2)‖ ≤ t with u, v free: optimum 0
        let mut b = ProgramBuilder::new();
        let f = b.add_block("uv", Cone::Free(2));
        let t = b.add_block("soc", Cone::SecondOrder(3));
        b.add_cost(t, 1.0);
        b.add_eq(vec![(t + 1, 1.0), (f, -1.0)], -1.0);
        b.add_eq(vec![(t + 2, 1.0), (f + 1, -1.0)], 2.0);
        let r = solve(&b.build(), &SolverConfig::default()).unwrap();
        assert_eq!(r.status, Status::Optimal);
        assert!((r.primal[0] - 1.0).abs() < 1e-6 && (r.primal[1] + 2.0).abs() < 1e-6);
    }
}
