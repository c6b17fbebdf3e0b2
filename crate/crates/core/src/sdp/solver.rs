//! Infeasible primal-dual path-following with the HKM direction and a
//! Mehrotra predictor-corrector.
//!
//! Inequalities are turned into equalities with nonnegative slacks, so the
//! cone is `H_n^+ x R_+^p` and the standard form is
//!
//! ```text
//!   min <C, X>  s.t.  Tr(A_i X) + s_{j(i)} = b_i,   X >= 0, s >= 0
//!   max b.y     s.t.  C - sum_i y_i A_i = Z >= 0,    -y_ineq = z >= 0
//! ```
//!
//! Arithmetic stays complex; only inner products `Re Tr(A B)` are real, so
//! the Schur complement `M_ij = Re Tr(A_i X A_j Z^-1)` is a real SPD matrix.
//!
//! Infeasibility is detected by objective divergence: if the dual objective
//! exceeds `divergence_bound` the primal has no feasible point (a dual
//! improving ray exists); if the primal objective drops below
//! `-divergence_bound` the dual is infeasible.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use super::{InitialPoint, IterationLog, SdpProblem, SdpSolution, Sense, SolveOptions, SolveStatus};
use crate::linalg::{eig_hermitian_matrix, ComplexMatrix, HermitianOperator};

/// One constraint row in sparse form.
struct Row {
    entries: Vec<(usize, usize, Complex64)>,
    /// Entries grouped by column: `(col, [(row, value)])`.
    by_col: Vec<(usize, Vec<(usize, Complex64)>)>,
    slack: Option<usize>,
    rhs: f64,
}

impl Row {
    fn new(matrix: &HermitianOperator, rhs: f64, slack: Option<usize>) -> Self {
        let m = matrix.matrix();
        let n = m.rows();
        let mut entries = Vec::new();
        let mut by_col: Vec<(usize, Vec<(usize, Complex64)>)> = Vec::new();
        for col in 0..n {
            let mut column = Vec::new();
            for row in 0..n {
                let v = m[(row, col)];
                if v.re != 0.0 || v.im != 0.0 {
                    entries.push((row, col, v));
                    column.push((row, v));
                }
            }
            if !column.is_empty() {
                by_col.push((col, column));
            }
        }
        Self {
            entries,
            by_col,
            slack,
            rhs,
        }
    }

    /// `Re Tr(A m)`
    fn apply(&self, m: &ComplexMatrix) -> f64 {
        self.entries
            .iter()
            .map(|&(a, b, v)| {
                let w = m[(b, a)];
                v.re * w.re - v.im * w.im
            })
            .sum()
    }

    /// `target += s A`
    fn accumulate(&self, target: &mut ComplexMatrix, s: f64) {
        for &(a, b, v) in &self.entries {
            target[(a, b)] += v * s;
        }
    }

    fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, _, v)| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

struct Iterate {
    x: ComplexMatrix,
    xs: Vec<f64>,
    y: Vec<f64>,
    z: ComplexMatrix,
    zs: Vec<f64>,
}

struct Direction {
    dx: ComplexMatrix,
    dxs: Vec<f64>,
    dy: Vec<f64>,
    dz: ComplexMatrix,
    dzs: Vec<f64>,
}

struct Residuals {
    primal: Vec<f64>,
    dual: ComplexMatrix,
    dual_slack: Vec<f64>,
}

struct Context<'a> {
    rows: Vec<Row>,
    cost: ComplexMatrix,
    n: usize,
    opts: &'a SolveOptions,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Context<'_> {
    fn n_slack(&self) -> usize {
        self.rows.iter().filter(|r| r.slack.is_some()).count()
    }

    fn residuals(&self, it: &Iterate) -> Residuals {
        let primal = self
            .rows
            .iter()
            .map(|r| r.rhs - r.apply(&it.x) - r.slack.map_or(0.0, |j| it.xs[j]))
            .collect();
        let mut dual = &self.cost - &it.z;
        let mut dual_slack: Vec<f64> = it.zs.iter().map(|z| -z).collect();
        for (r, &yi) in self.rows.iter().zip(&it.y) {
            r.accumulate(&mut dual, -yi);
            if let Some(j) = r.slack {
                dual_slack[j] -= yi;
            }
        }
        Residuals {
            primal,
            dual,
            dual_slack,
        }
    }

    /// `M_ij = Re Tr(A_i X A_j Z^-1) + [slack] x_j / z_j`
    fn schur(&self, it: &Iterate, zinv: &ComplexMatrix) -> DMatrix<f64> {
        let m = self.rows.len();
        let n = self.n;
        let mut schur = DMatrix::zeros(m, m);
        let mut w = ComplexMatrix::zeros(n, n);
        let mut u = vec![Complex64::new(0.0, 0.0); n];
        for (j, rj) in self.rows.iter().enumerate() {
            w.as_mut_slice().iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
            // W = X A_j Z^-1, built one nonzero column of A_j at a time
            for (d, column) in &rj.by_col {
                u.iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
                for &(c, val) in column {
                    for (r, ur) in u.iter_mut().enumerate() {
                        *ur += it.x[(r, c)] * val;
                    }
                }
                let zrow = zinv.row(*d);
                for (r, &ur) in u.iter().enumerate() {
                    if ur.re == 0.0 && ur.im == 0.0 {
                        continue;
                    }
                    let wrow = &mut w.as_mut_slice()[r * n..(r + 1) * n];
                    for (wv, zv) in wrow.iter_mut().zip(zrow) {
                        *wv += ur * zv;
                    }
                }
            }
            for (i, ri) in self.rows.iter().enumerate() {
                schur[(i, j)] = ri.apply(&w);
            }
            if let Some(s) = rj.slack {
                schur[(j, j)] += it.xs[s] / it.zs[s];
            }
        }
        (&schur + schur.transpose()) * 0.5
    }

    #[allow(clippy::too_many_arguments)]
    fn direction(
        &self,
        it: &Iterate,
        res: &Residuals,
        zinv: &ComplexMatrix,
        chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
        x_rd_zinv: &ComplexMatrix,
        k_zinv: &ComplexMatrix,
        k_lp: &[f64],
    ) -> Direction {
        let shifted = k_zinv - x_rd_zinv;
        let rhs = DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().zip(&res.primal).map(|(r, rp)| {
                let mut v = rp - r.apply(&shifted);
                if let Some(j) = r.slack {
                    v -= (k_lp[j] - it.xs[j] * res.dual_slack[j]) / it.zs[j];
                }
                v
            }),
        );
        let dy = chol.solve(&rhs);
        let mut dz = res.dual.clone();
        let mut dzs = res.dual_slack.clone();
        for (r, &d) in self.rows.iter().zip(dy.iter()) {
            r.accumulate(&mut dz, -d);
            if let Some(j) = r.slack {
                dzs[j] -= d;
            }
        }
        let dx_hat = k_zinv - &it.x.matmul(&dz).matmul(zinv);
        let dx = dx_hat.hermitian_part();
        let dxs = (0..it.xs.len())
            .map(|j| (k_lp[j] - it.xs[j] * dzs[j]) / it.zs[j])
            .collect();
        Direction {
            dx,
            dxs,
            dy: dy.iter().copied().collect(),
            dz: dz.hermitian_part(),
            dzs,
        }
    }

    fn step_lengths(&self, it: &Iterate, d: &Direction) -> Option<(f64, f64)> {
        let gamma = self.opts.step_fraction;
        let ap = max_psd_step(&it.x, &d.dx)?.min(max_lp_step(&it.xs, &d.dxs));
        let ad = max_psd_step(&it.z, &d.dz)?.min(max_lp_step(&it.zs, &d.dzs));
        Some(((gamma * ap).min(1.0), (gamma * ad).min(1.0)))
    }
}

fn max_lp_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, &d)| d < 0.0)
        .map(|(&x, &d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

/// Largest `alpha` keeping `m + alpha dm` positive semidefinite, for PD `m`.
fn max_psd_step(m: &ComplexMatrix, dm: &ComplexMatrix) -> Option<f64> {
    let chol = m.to_nalgebra().cholesky()?;
    let l = chol.l();
    let half = l.solve_lower_triangular(&dm.to_nalgebra())?;
    let scaled = l.solve_lower_triangular(&half.adjoint())?;
    let eig = eig_hermitian_matrix(&ComplexMatrix::from_nalgebra(&scaled)).ok()?;
    let lmin = eig.eigenvalues[0];
    Some(if lmin < 0.0 { -1.0 / lmin } else { f64::INFINITY })
}

fn hermitian_inverse(m: &ComplexMatrix) -> Option<ComplexMatrix> {
    let chol = m.to_nalgebra().cholesky()?;
    Some(ComplexMatrix::from_nalgebra(&chol.inverse()).hermitian_part())
}

fn step(m: &ComplexMatrix, dm: &ComplexMatrix, alpha: f64) -> ComplexMatrix {
    let mut out = m.clone();
    out.add_scaled(dm, alpha);
    out
}

fn step_vec(v: &[f64], dv: &[f64], alpha: f64) -> Vec<f64> {
    v.iter().zip(dv).map(|(a, b)| a + alpha * b).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `p` with a primal-dual interior-point method.
pub fn solve(p: &SdpProblem, opts: &SolveOptions) -> SdpSolution {
    let n = p.variable_dim();
    let n_eq = p.equalities.len();
    let mut rows: Vec<Row> = p.equalities.iter().map(|c| Row::new(&c.matrix, c.rhs, None)).collect();
    rows.extend(
        p.inequalities
            .iter()
            .enumerate()
            .map(|(j, c)| Row::new(&c.matrix, c.rhs, Some(j))),
    );
    let ctx = Context {
        rows,
        cost: p.min_form_objective().into_matrix(),
        n,
        opts,
    };
    let n_slack = ctx.n_slack();
    let m = ctx.rows.len();
    let b: Vec<f64> = ctx.rows.iter().map(|r| r.rhs).collect();
    let b_norm = norm2(&b);
    let c_norm = ctx.cost.frobenius_norm();
    let cone_order = (n + n_slack) as f64;

    let (xi, zeta) = match opts.initial_point {
        InitialPoint::Scaled { primal, dual } => (primal, dual),
        InitialPoint::Auto => {
            let sqrt_n = (n as f64).sqrt();
            let xi = ctx
                .rows
                .iter()
                .map(|r| sqrt_n * (1.0 + r.rhs.abs()) / (1.0 + r.norm()))
                .fold(1.0, f64::max);
            let a_max = ctx.rows.iter().map(Row::norm).fold(c_norm, f64::max);
            (xi, ((1.0 + a_max) / sqrt_n).max(1.0))
        }
    };
    let mut it = Iterate {
        x: ComplexMatrix::identity(n).scale(xi),
        xs: vec![xi; n_slack],
        y: vec![0.0; m],
        z: ComplexMatrix::identity(n).scale(zeta),
        zs: vec![zeta; n_slack],
    };

    let mut history = Vec::new();
    let mut status = SolveStatus::MaxIter;
    let mut detail = format!("iteration cap of {} reached", opts.max_iter);
    let mut iterations = 0;
    let (mut pres, mut dres);

    loop {
        let res = ctx.residuals(&it);
        let pobj = ctx.cost.re_trace_product(&it.x);
        let dobj = dot(&b, &it.y);
        let compl = (it.x.re_trace_product(&it.z) + dot(&it.xs, &it.zs)) / cone_order;
        pres = norm2(&res.primal) / (1.0 + b_norm);
        dres = (res.dual.frobenius_norm() + norm2(&res.dual_slack)) / (1.0 + c_norm);
        let rel_gap = (pobj - dobj).abs() / (1.0 + pobj.abs());
        history.push(IterationLog {
            iteration: iterations,
            primal_value: pobj,
            dual_value: dobj,
            primal_residual: pres,
            dual_residual: dres,
            complementarity: compl,
        });

        if pres <= opts.feas_tol && dres <= opts.feas_tol && rel_gap <= opts.gap_tol {
            status = SolveStatus::Optimal;
            detail.clear();
            break;
        }
        if dobj > opts.divergence_bound * (1.0 + c_norm) {
            status = SolveStatus::Infeasible;
            detail = format!("dual objective diverged to {dobj:e}: primal infeasible");
            break;
        }
        if pobj < -opts.divergence_bound * (1.0 + b_norm) {
            status = SolveStatus::Infeasible;
            detail = format!("primal objective diverged to {pobj:e}: dual infeasible");
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }

        let Some(zinv) = hermitian_inverse(&it.z) else {
            status = SolveStatus::Numerical;
            detail = "dual slack lost positive definiteness".into();
            break;
        };
        let schur = ctx.schur(&it, &zinv);
        // conditioning after symmetric diagonal scaling, which Cholesky is invariant to
        let d: Vec<f64> = (0..m)
            .map(|i| schur[(i, i)].max(f64::MIN_POSITIVE).sqrt().recip())
            .collect();
        let scaled = DMatrix::from_fn(m, m, |i, j| schur[(i, j)] * d[i] * d[j]);
        let eig = SymmetricEigen::new(scaled).eigenvalues;
        let (lmin, lmax) = eig
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
        let cond = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
        if m > 0 && cond > opts.max_condition {
            status = SolveStatus::Numerical;
            detail = format!(
                "Newton system condition number {cond:e} exceeds {:e}",
                opts.max_condition
            );
            break;
        }
        let Some(chol) = schur.cholesky() else {
            status = SolveStatus::Numerical;
            detail = "Schur complement is not positive definite".into();
            break;
        };

        let x_rd_zinv = it.x.matmul(&res.dual).matmul(&zinv);

        // predictor
        let k_lp: Vec<f64> = it.xs.iter().zip(&it.zs).map(|(x, z)| -x * z).collect();
        let minus_x = it.x.scale(-1.0);
        let aff = ctx.direction(&it, &res, &zinv, &chol, &x_rd_zinv, &minus_x, &k_lp);
        let Some((ap, ad)) = ctx.step_lengths(&it, &aff) else {
            status = SolveStatus::Numerical;
            detail = "iterate lost positive definiteness".into();
            break;
        };
        let x_aff = step(&it.x, &aff.dx, ap);
        let z_aff = step(&it.z, &aff.dz, ad);
        let mu_aff = (x_aff.re_trace_product(&z_aff)
            + dot(&step_vec(&it.xs, &aff.dxs, ap), &step_vec(&it.zs, &aff.dzs, ad)))
            / cone_order;
        let sigma = (mu_aff / compl).clamp(0.0, 1.0).powi(3);

        // corrector
        let target = sigma * compl;
        let second_order = aff.dx.matmul(&aff.dz);
        let mut k_zinv = &zinv.scale(target) - &it.x;
        k_zinv.add_scaled(&second_order.matmul(&zinv), -1.0);
        let k_lp: Vec<f64> = (0..n_slack)
            .map(|j| target - it.xs[j] * it.zs[j] - aff.dxs[j] * aff.dzs[j])
            .collect();
        let dir = ctx.direction(&it, &res, &zinv, &chol, &x_rd_zinv, &k_zinv, &k_lp);
        let Some((ap, ad)) = ctx.step_lengths(&it, &dir) else {
            status = SolveStatus::Numerical;
            detail = "iterate lost positive definiteness".into();
            break;
        };

        it.x = step(&it.x, &dir.dx, ap).hermitian_part();
        it.xs = step_vec(&it.xs, &dir.dxs, ap);
        it.y = step_vec(&it.y, &dir.dy, ad);
        it.z = step(&it.z, &dir.dz, ad).hermitian_part();
        it.zs = step_vec(&it.zs, &dir.dzs, ad);
        iterations += 1;
    }

    let pobj = ctx.cost.re_trace_product(&it.x);
    let dobj = dot(&b, &it.y);
    let (primal_value, dual_value) = match p.sense {
        Sense::Min => (pobj, dobj),
        Sense::Max => (-pobj, -dobj),
    };
    let gap = (primal_value - dual_value).abs();
    SdpSolution {
        status,
        primal_value,
        dual_value,
        gap,
        relative_gap: gap / (1.0 + primal_value.abs()),
        iterations,
        x: HermitianOperator::from_hermitian_part(&it.x),
        equality_multipliers: it.y[..n_eq].to_vec(),
        inequality_multipliers: it.y[n_eq..].iter().map(|y| -y).collect(),
        primal_residual: pres,
        dual_residual: dres,
        detail,
        history,
    }
}
