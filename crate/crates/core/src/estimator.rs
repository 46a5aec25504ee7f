//! Distributed set-membership estimator.
//!
//! Each step solves one small semidefinite program: find per-sensor gains
//! `A_hat`, `B_hat`, trigger weights `Psi`, next shape matrices `U_next` and
//! S-procedure multipliers `eps1..eps4` such that the stacked block matrix
//! `[-U_next, Phi; Phi^T, Lambda]` is negative semidefinite, minimizing
//! `trace(U_next)`. Feasibility of that matrix inequality certifies that the
//! true state stays inside every sensor's confidence ellipsoid, provided the
//! realized noises respect their modeled bounds.

use nalgebra::{DMatrix, DVector};

use crate::ellipsoid::{cholesky_lower, LowerTriangularFactor};
use crate::error::{Error, Result};
use crate::network::Topology;
use crate::sdp::{self, ConicProblem, SolveStatus, SolverOptions, VarId};

/// How the Laplace privacy noise enters the S-procedure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignMode {
    /// Treat the privacy noise as bounded with confidence `kappa`:
    /// the eta-block contributes `-eps2 * M^{-1}` and `eps2 * kappa * N`
    /// lands on the scalar block. This keeps the program solvable.
    BoundedPrivacy,
    /// Assemble the eta-block with its positive sign taken literally, which makes
    /// a nonzero diagonal block positive and the program infeasible. Kept for
    /// comparison runs.
    LiteralSign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveMode {
    /// Minimize the summed axis lengths of the next confidence sets.
    TraceUNext,
    /// Pure feasibility.
    Feasibility,
}

/// Per-sensor estimator state: estimates, shape matrices, scales and cached
/// Cholesky factors.
#[derive(Debug, Clone)]
pub struct EstimatorState {
    pub xhat: Vec<DVector<f64>>,
    pub u: Vec<DMatrix<f64>>,
    pub beta: Vec<f64>,
    pub l: Vec<LowerTriangularFactor>,
}

impl EstimatorState {
    pub fn new(xhat: Vec<DVector<f64>>, u: Vec<DMatrix<f64>>, beta: Vec<f64>) -> Result<Self> {
        if xhat.len() != u.len() || xhat.len() != beta.len() {
            return Err(Error::DimensionMismatch {
                expected: xhat.len(),
                got: u.len().min(beta.len()),
                context: "estimator state per-sensor lists",
            });
        }
        if beta.iter().any(|&b| !(b > 0.0)) {
            return Err(Error::InvalidParameter(
                "ellipsoid scale beta must be positive for every sensor".into(),
            ));
        }
        let l = u
            .iter()
            .map(cholesky_lower)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { xhat, u, beta, l })
    }

    pub fn n_sensors(&self) -> usize {
        self.xhat.len()
    }

    pub fn confidence_set(&self, i: usize) -> Result<crate::ellipsoid::Ellipsoid> {
        crate::ellipsoid::Ellipsoid::new(self.xhat[i].clone(), self.u[i].clone(), self.beta[i])
    }
}

/// All step-`k` data the gain LMI depends on.
#[derive(Debug, Clone)]
pub struct StepContext {
    pub k: usize,
    pub n_x: usize,
    pub n_w: usize,
    pub n_y: usize,
    pub n_v: Vec<usize>,
    pub c_k: DMatrix<f64>,
    pub f_k: DMatrix<f64>,
    pub h_k: Vec<DMatrix<f64>>,
    pub d_k: Vec<DMatrix<f64>>,
    pub r_inv: DMatrix<f64>,
    pub q_inv: Vec<DMatrix<f64>>,
    /// Inverse second moment of the privacy noise, `1 / (2 b_k^2)`.
    pub m_inv: f64,
    /// Effective adjacency weights (self-loop handling already applied).
    pub adjacency: DMatrix<f64>,
    pub beta: Vec<f64>,
    pub xhat: Vec<DVector<f64>>,
    pub l: Vec<DMatrix<f64>>,
    pub delta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub theta: Vec<f64>,
    pub kappa: f64,
    pub sign_mode: SignMode,
    pub mu: f64,
    pub objective: ObjectiveMode,
}

impl StepContext {
    pub fn n_sensors(&self) -> usize {
        self.h_k.len()
    }

    fn total_nv(&self) -> usize {
        self.n_v.iter().sum()
    }

    /// Column widths of the stacked quadratic-form partition
    /// `[1, alpha, w, eta, v, h]`.
    pub fn partition(&self) -> [usize; 6] {
        let n = self.n_sensors();
        [
            1,
            n * self.n_x,
            n * self.n_w,
            n * self.n_x,
            self.total_nv(),
            n * self.n_y,
        ]
    }

    pub fn phi_cols(&self) -> usize {
        self.partition().iter().sum()
    }

    pub fn phi_rows(&self) -> usize {
        self.n_sensors() * self.n_x
    }
}

/// Per-step solved gains.
#[derive(Debug, Clone)]
pub struct GainSolution {
    pub a_hat: Vec<DMatrix<f64>>,
    pub b_hat: Vec<DMatrix<f64>>,
    pub psi: Vec<DMatrix<f64>>,
    pub u_next: Vec<DMatrix<f64>>,
    pub eps: [f64; 4],
    /// Certified largest eigenvalue of the assembled block matrix.
    pub lmi_residual: f64,
    pub trace_u_next: f64,
    /// Raw solver assignment, reusable as a warm start for the next step.
    pub assignment: Vec<f64>,
}

/// Decision-variable values for assembly (used both by the solver probe and
/// by the verifier).
#[derive(Debug, Clone)]
pub struct DecisionValues {
    pub u_next: Vec<DMatrix<f64>>,
    pub psi: Vec<DMatrix<f64>>,
    pub a_hat: Vec<DMatrix<f64>>,
    pub b_hat: Vec<DMatrix<f64>>,
    pub eps: [f64; 4],
}

/// Stacked block row `Phi` of the error map, affine in the gains.
pub fn assemble_phi(
    ctx: &StepContext,
    a_hat: &[DMatrix<f64>],
    b_hat: &[DMatrix<f64>],
) -> DMatrix<f64> {
    let n = ctx.n_sensors();
    let nx = ctx.n_x;
    let mut phi = DMatrix::zeros(ctx.phi_rows(), ctx.phi_cols());
    let part = ctx.partition();
    let col_alpha = part[0];
    let col_w = col_alpha + part[1];
    let col_eta = col_w + part[2];
    let col_v = col_eta + part[3];
    let col_h = col_v + part[4];
    let nv_offsets: Vec<usize> = ctx
        .n_v
        .iter()
        .scan(0usize, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    for i in 0..n {
        let row = i * nx;
        // constant column: (C - A_hat^i) xhat^i
        let col0 = (&ctx.c_k - &a_hat[i]) * &ctx.xhat[i];
        phi.view_mut((row, 0), (nx, 1)).copy_from(&col0);
        for j in 0..n {
            let a_ij = ctx.adjacency[(i, j)];
            let sqrt_bj = ctx.beta[j].sqrt();
            // alpha block
            let mut blk = DMatrix::zeros(nx, nx);
            if i == j {
                blk += &ctx.c_k * &ctx.l[j] * sqrt_bj;
            }
            if a_ij != 0.0 {
                blk -= &b_hat[i] * &ctx.h_k[j] * &ctx.l[j] * (a_ij * sqrt_bj);
            }
            phi.view_mut((row, col_alpha + j * nx), (nx, nx)).copy_from(&blk);
            // w block (block diagonal F)
            if i == j {
                phi.view_mut((row, col_w + j * ctx.n_w), (nx, ctx.n_w))
                    .copy_from(&ctx.f_k);
                // eta block (block diagonal C)
                phi.view_mut((row, col_eta + j * nx), (nx, nx))
                    .copy_from(&ctx.c_k);
            }
            // v block: -a_ij B_hat^i D^j
            if a_ij != 0.0 {
                let vb = -(&b_hat[i] * &ctx.d_k[j]) * a_ij;
                phi.view_mut((row, col_v + nv_offsets[j]), (nx, ctx.n_v[j]))
                    .copy_from(&vb);
                // h block: a_ij B_hat^i
                let hb = &b_hat[i] * a_ij;
                phi.view_mut((row, col_h + j * ctx.n_y), (nx, ctx.n_y))
                    .copy_from(&hb);
            }
        }
    }
    phi
}

/// The 6x6 block symmetric matrix `Lambda`, affine in `Psi` and the
/// multipliers.
pub fn assemble_lambda(ctx: &StepContext, psi: &[DMatrix<f64>], eps: &[f64; 4]) -> DMatrix<f64> {
    let n = ctx.n_sensors();
    let nx = ctx.n_x;
    let part = ctx.partition();
    let dim = ctx.phi_cols();
    let off: Vec<usize> = part
        .iter()
        .scan(0usize, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let nv_offsets: Vec<usize> = ctx
        .n_v
        .iter()
        .scan(0usize, |acc, &d| {
            let o = *acc;
            *acc += d;
            Some(o)
        })
        .collect();
    let mut lam = DMatrix::zeros(dim, dim);
    let nf = n as f64;

    // (1,1): -sum beta + (eps1 + eps3 + eps4) N + sum delta (+ eps2 kappa N)
    let mut l11 = -ctx.beta.iter().sum::<f64>()
        + (eps[0] + eps[2] + eps[3]) * nf
        + ctx.delta.iter().sum::<f64>();
    if ctx.sign_mode == SignMode::BoundedPrivacy {
        l11 += eps[1] * ctx.kappa * nf;
    }
    lam[(off[0], off[0])] = l11;

    for i in 0..n {
        let th_sig = ctx.theta[i] * ctx.sigma[i];
        let hl = &ctx.h_k[i] * &ctx.l[i]; // n_y x n_x
        let sqrt_b = ctx.beta[i].sqrt();

        // (2,2): -eps4 I + theta sigma beta (HL)^T psi (HL)
        let a22 = off[1] + i * nx;
        let blk22 = hl.transpose() * &psi[i] * &hl * (th_sig * ctx.beta[i])
            - DMatrix::identity(nx, nx) * eps[3];
        set_block(&mut lam, a22, a22, &blk22);

        // (2,5): theta sigma sqrt(beta) (HL)^T psi D
        let a25 = off[4] + nv_offsets[i];
        let blk25 = hl.transpose() * &psi[i] * &ctx.d_k[i] * (th_sig * sqrt_b);
        set_block_pair(&mut lam, a22, a25, &blk25);

        // (2,6): -theta sigma sqrt(beta) (HL)^T psi
        let a26 = off[5] + i * ctx.n_y;
        let blk26 = hl.transpose() * &psi[i] * (-th_sig * sqrt_b);
        set_block_pair(&mut lam, a22, a26, &blk26);

        // (3,3): -eps1 R^{-1}
        let a33 = off[2] + i * ctx.n_w;
        let blk33 = &ctx.r_inv * (-eps[0]);
        set_block(&mut lam, a33, a33, &blk33);

        // (4,4): privacy block, sign per mode
        let a44 = off[3] + i * nx;
        let sign = match ctx.sign_mode {
            SignMode::BoundedPrivacy => -1.0,
            SignMode::LiteralSign => 1.0,
        };
        let blk44 = DMatrix::identity(nx, nx) * (sign * eps[1] * ctx.m_inv);
        set_block(&mut lam, a44, a44, &blk44);

        // (5,5): -eps3 Q^{-1} + theta sigma D^T psi D
        let a55 = off[4] + nv_offsets[i];
        let blk55 = ctx.d_k[i].transpose() * &psi[i] * &ctx.d_k[i] * th_sig
            - &ctx.q_inv[i] * eps[2];
        set_block(&mut lam, a55, a55, &blk55);

        // (5,6): -theta sigma D^T psi
        let blk56 = ctx.d_k[i].transpose() * &psi[i] * (-th_sig);
        set_block_pair(&mut lam, a55, a26, &blk56);

        // (6,6): theta (sigma - 1) psi
        let blk66 = &psi[i] * (ctx.theta[i] * (ctx.sigma[i] - 1.0));
        set_block(&mut lam, a26, a26, &blk66);
    }
    lam
}

fn set_block(m: &mut DMatrix<f64>, r: usize, c: usize, blk: &DMatrix<f64>) {
    m.view_mut((r, c), (blk.nrows(), blk.ncols())).copy_from(blk);
}

fn set_block_pair(m: &mut DMatrix<f64>, r: usize, c: usize, blk: &DMatrix<f64>) {
    set_block(m, r, c, blk);
    let t = blk.transpose();
    m.view_mut((c, r), (t.nrows(), t.ncols())).copy_from(&t);
}

/// The full symmetric constraint matrix `[-U_next, Phi; Phi^T, Lambda]`.
pub fn assemble_full(ctx: &StepContext, dv: &DecisionValues) -> DMatrix<f64> {
    let n = ctx.n_sensors();
    let nx = ctx.n_x;
    let rows = ctx.phi_rows();
    let cols = ctx.phi_cols();
    let dim = rows + cols;
    let mut m = DMatrix::zeros(dim, dim);
    for i in 0..n {
        let neg = -&dv.u_next[i];
        set_block(&mut m, i * nx, i * nx, &neg);
    }
    let phi = assemble_phi(ctx, &dv.a_hat, &dv.b_hat);
    m.view_mut((0, rows), (rows, cols)).copy_from(&phi);
    m.view_mut((rows, 0), (cols, rows)).copy_from(&phi.transpose());
    let lam = assemble_lambda(ctx, &dv.psi, &dv.eps);
    m.view_mut((rows, rows), (cols, cols)).copy_from(&lam);
    m
}

/// Variable handles of the step problem.
struct LmiVars {
    u: Vec<VarId>,
    psi: Vec<VarId>,
    a: Vec<VarId>,
    b: Vec<VarId>,
    eps: [VarId; 4],
}

fn build_problem(ctx: &StepContext) -> (ConicProblem, LmiVars) {
    let n = ctx.n_sensors();
    let nx = ctx.n_x;
    let ny = ctx.n_y;
    let mut p = ConicProblem::new();
    let u: Vec<VarId> = (0..n)
        .map(|i| p.add_sym_matrix(&format!("u{i}"), nx, Some(ctx.mu)))
        .collect();
    let psi: Vec<VarId> = (0..n)
        .map(|i| p.add_sym_matrix(&format!("psi{i}"), ny, Some(ctx.mu)))
        .collect();
    let a: Vec<VarId> = (0..n)
        .map(|i| p.add_matrix(&format!("a{i}"), nx, nx))
        .collect();
    let b: Vec<VarId> = (0..n)
        .map(|i| p.add_matrix(&format!("b{i}"), nx, ny))
        .collect();
    let eps = [
        p.add_scalar("eps1", Some(ctx.mu)),
        p.add_scalar("eps2", Some(ctx.mu)),
        p.add_scalar("eps3", Some(ctx.mu)),
        p.add_scalar("eps4", Some(ctx.mu)),
    ];
    if ctx.objective == ObjectiveMode::TraceUNext {
        for &ui in &u {
            for d in 0..nx {
                let comp = p.sym_component(ui, d, d);
                p.add_objective_term(comp, 1.0);
            }
        }
    }
    let vars = LmiVars { u, psi, a, b, eps };
    (p, vars)
}

fn decision_from_components(
    p: &ConicProblem,
    vars: &LmiVars,
    v: &[f64],
) -> DecisionValues {
    DecisionValues {
        u_next: vars.u.iter().map(|&id| p.sym_value(id, v)).collect(),
        psi: vars.psi.iter().map(|&id| p.sym_value(id, v)).collect(),
        a_hat: vars.a.iter().map(|&id| p.matrix_value(id, v)).collect(),
        b_hat: vars.b.iter().map(|&id| p.matrix_value(id, v)).collect(),
        eps: [
            p.scalar_value(vars.eps[0], v),
            p.scalar_value(vars.eps[1], v),
            p.scalar_value(vars.eps[2], v),
            p.scalar_value(vars.eps[3], v),
        ],
    }
}

/// Builds a strictly feasible starting point from the problem structure:
/// `A_hat = C` cancels the estimate-dependent column, `B_hat = 0` removes
/// every coupling through the trigger weights, the multipliers split the
/// scalar-block budget in the ratio that minimizes the predicted trace, and
/// each `U_next` block is its sensor's slice of the Schur term
/// `Phi (-Lambda)^{-1} Phi^T` plus a small margin. Returns `None` when no
/// such point exists (in particular in the literal sign mode, whose positive
/// privacy block admits no solution).
fn analytic_start(ctx: &StepContext, p: &ConicProblem, vars: &LmiVars) -> Option<Vec<f64>> {
    let n = ctx.n_sensors();
    let nx = ctx.n_x;
    let nf = n as f64;
    let budget =
        (ctx.beta.iter().sum::<f64>() - ctx.delta.iter().sum::<f64>()) / nf;
    if budget <= 0.0 {
        return None;
    }
    let floor = 2.0 * ctx.mu;
    let kappa_weight = match ctx.sign_mode {
        SignMode::BoundedPrivacy => ctx.kappa.max(1.0),
        SignMode::LiteralSign => 1.0,
    };
    // With `B_hat = 0` the trace of the Schur term separates into one term
    // per multiplier, `a_b / eps_b`; minimizing their sum subject to the
    // weighted budget row gives the classic square-root allocation.
    let r = ctx
        .r_inv
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::identity(ctx.n_w, ctx.n_w));
    let a1: f64 = nf * (&ctx.f_k * r * ctx.f_k.transpose()).trace();
    let a2: f64 = nf * (&ctx.c_k * ctx.c_k.transpose()).trace() / ctx.m_inv;
    let a4: f64 = (0..n)
        .map(|i| ctx.beta[i] * (&ctx.c_k * &ctx.l[i]).norm_squared())
        .sum();
    // The coupled per-sensor `[alpha, v, h]` slice of `Lambda` is
    // `-diag(eps4 I, eps3 Q^{-1}, theta psi) + theta sigma u^T psi u` with
    // `u = [sqrt(beta) HL, D, -I]`, a rank-one update that stays negative
    // definite exactly when
    // `theta sigma psi (beta |HL|^2 / eps4 + D Q D^T / eps3) < 1 - sigma`.
    // Give each of the two terms a quarter of that headroom.
    let psi_val = floor;
    let mut e3_min = floor;
    let mut e4_min = floor;
    for i in 0..n {
        let head = (1.0 - ctx.sigma[i]).max(f64::MIN_POSITIVE) * 0.25;
        let ts_psi = ctx.theta[i] * ctx.sigma[i] * psi_val;
        let q = ctx.q_inv[i]
            .clone()
            .try_inverse()
            .unwrap_or_else(|| DMatrix::identity(ctx.n_v[i], ctx.n_v[i]));
        let dqd = (&ctx.d_k[i] * q * ctx.d_k[i].transpose()).trace();
        let hl_sq = ctx.beta[i] * (&ctx.h_k[i] * &ctx.l[i]).norm_squared();
        e3_min = e3_min.max(ts_psi * dqd / head);
        e4_min = e4_min.max(ts_psi * hl_sq / head);
    }
    let share = 0.99 * budget - e3_min;
    if share <= 0.0 {
        return None;
    }
    let g1 = a1.max(ctx.mu * ctx.mu).sqrt();
    let g2 = (a2.max(ctx.mu * ctx.mu) / kappa_weight).sqrt();
    let g4 = a4.max(ctx.mu * ctx.mu).sqrt();
    let z = g1 + kappa_weight * g2 + g4;
    let eps = [
        (share * g1 / z).max(floor),
        (share * g2 / z).max(floor),
        e3_min,
        (share * g4 / z).max(floor).max(e4_min),
    ];
    let psi: Vec<DMatrix<f64>> = (0..n)
        .map(|_| DMatrix::identity(ctx.n_y, ctx.n_y) * psi_val)
        .collect();
    let a_hat: Vec<DMatrix<f64>> = (0..n).map(|_| ctx.c_k.clone()).collect();
    let b_hat: Vec<DMatrix<f64>> = (0..n).map(|_| DMatrix::zeros(ctx.n_x, ctx.n_y)).collect();
    let lam = assemble_lambda(ctx, &psi, &eps);
    if sdp::lambda_max(&lam) >= -1e-12 {
        return None;
    }
    let phi = assemble_phi(ctx, &a_hat, &b_hat);
    let neg_lam = -lam;
    let chol = nalgebra::Cholesky::new(neg_lam)?;
    let u_req = &phi * chol.solve(&phi.transpose());
    // with `B_hat = 0` the rows of `Phi` touch disjoint columns per sensor,
    // so the Schur term is block diagonal and each block is the minimal
    // admissible `U_next` for these multipliers
    let u_next: Vec<DMatrix<f64>> = (0..n)
        .map(|i| {
            let blk = u_req.view((i * nx, i * nx), (nx, nx));
            let sym = (&blk + blk.transpose()) * 0.5;
            let margin = (1e-6 * (1.0 + sym.trace())).max(10.0 * ctx.mu);
            sym + DMatrix::identity(nx, nx) * margin
        })
        .collect();
    let dv = DecisionValues {
        u_next,
        psi,
        a_hat,
        b_hat,
        eps,
    };
    // strict feasibility of this point is re-checked exactly (and in scaled
    // coordinates) by the solver before it is trusted as a warm start
    let mut v = vec![0.0; p.n_components()];
    for i in 0..n {
        for r in 0..ctx.n_x {
            for c in 0..=r {
                v[p.sym_component(vars.u[i], r, c)] = dv.u_next[i][(r, c)];
            }
        }
        for r in 0..ctx.n_y {
            for c in 0..=r {
                v[p.sym_component(vars.psi[i], r, c)] = dv.psi[i][(r, c)];
            }
        }
        for r in 0..ctx.n_x {
            for c in 0..ctx.n_x {
                v[p.matrix_component(vars.a[i], r, c)] = dv.a_hat[i][(r, c)];
            }
        }
        // b_hat entries are already zero
    }
    for (slot, &e) in vars.eps.iter().zip(dv.eps.iter()) {
        v[p.scalar_component(*slot)] = e;
    }
    Some(v)
}

/// Solves the step-`k` gain design problem.
pub fn design_gains(
    ctx: &StepContext,
    opts: &SolverOptions,
    warm: Option<&[f64]>,
) -> Result<GainSolution> {
    let (mut p, vars) = build_problem(ctx);
    // candidate starts before any constraint is installed: the caller's warm
    // point and the constructed interior point
    let warm_vec: Option<Vec<f64>> = warm.map(<[f64]>::to_vec);
    let analytic = analytic_start(ctx, &p, &vars);
    let candidate = warm_vec.clone().or_else(|| analytic.clone());
    // Diagonal congruence scaling `D M D` keeps the feasible set identical
    // while bringing every block of the constraint to unit magnitude; without
    // it the trigger-weight block sits ten orders below the shape block and
    // both the barrier and the feasibility checks drown in rounding noise.
    let scale: Vec<f64> = {
        let probe_point = candidate.clone().unwrap_or_else(|| p.default_start());
        let dv = decision_from_components(&p, &vars, &probe_point);
        let m0 = assemble_full(ctx, &dv);
        (0..m0.nrows())
            .map(|i| {
                let a = m0[(i, i)].abs();
                if a > 1e-300 {
                    a.sqrt().recip().clamp(1e-8, 1e8)
                } else {
                    1.0
                }
            })
            .collect()
    };
    {
        let ctx = ctx.clone();
        let probe_p = p.clone();
        let probe_vars = LmiVars {
            u: vars.u.clone(),
            psi: vars.psi.clone(),
            a: vars.a.clone(),
            b: vars.b.clone(),
            eps: vars.eps,
        };
        let scale = scale.clone();
        p.set_constraint_by_probe(move |v| {
            let dv = decision_from_components(&probe_p, &probe_vars, v);
            let mut m = assemble_full(&ctx, &dv);
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    m[(r, c)] *= scale[r] * scale[c];
                }
            }
            m
        });
    }
    // prefer the warm point when it is still strictly feasible under the
    // scaled constraint, else the constructed point, else phase 1 searches
    let start: Option<Vec<f64>> = warm_vec
        .filter(|w| p.strictly_feasible(w, opts.box_bound))
        .or_else(|| analytic.filter(|w| p.strictly_feasible(w, opts.box_bound)));
    let sol = sdp::solve_warm(&p, opts, start.as_deref())?;
    if sol.status == SolveStatus::Infeasible {
        return Err(Error::Infeasible {
            step: ctx.k,
            detail: format!(
                "phase-1 slack floor {:.3e} above feasibility margin",
                sol.constraint_lambda_max
            ),
        });
    }
    // Certify in the original (unscaled) coordinates. The solver's own
    // certificate lives in scaled coordinates, where a boundary-hugging
    // iterate can look violated by rounding noise while the actual matrix
    // inequality holds to working precision.
    let dv = decision_from_components(&p, &vars, &sol.assignment);
    let lmi_residual = sdp::lambda_max(&assemble_full(ctx, &dv));
    if lmi_residual > opts.cert_tol || !p.bounds_satisfied(&sol.assignment, opts.bound_tol) {
        return Err(Error::SolverFailure(format!(
            "gain design did not converge at step {} (residual {:.3e})",
            ctx.k, lmi_residual
        )));
    }
    let trace_u_next = dv.u_next.iter().map(|u| u.trace()).sum();
    Ok(GainSolution {
        a_hat: dv.a_hat.clone(),
        b_hat: dv.b_hat.clone(),
        psi: dv.psi.clone(),
        u_next: dv.u_next.clone(),
        eps: dv.eps,
        lmi_residual,
        trace_u_next,
        assignment: sol.assignment,
    })
}

/// Re-assembles the block matrix with solved values and returns its largest
/// eigenvalue. Acceptance requires this residual to stay below `1e-6`.
pub fn verify_lmi(ctx: &StepContext, solution: &GainSolution) -> f64 {
    let dv = DecisionValues {
        u_next: solution.u_next.clone(),
        psi: solution.psi.clone(),
        a_hat: solution.a_hat.clone(),
        b_hat: solution.b_hat.clone(),
        eps: solution.eps,
    };
    sdp::lambda_max(&assemble_full(ctx, &dv))
}

/// One-step prediction: `xhat_{k+1}^i = A_hat^i xhat_k^i +
/// B_hat^i sum_j a_ij ytilde_last^j`.
pub fn predict(
    est: &EstimatorState,
    gains: &GainSolution,
    topology: &Topology,
    last_residuals: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let n = est.n_sensors();
    if last_residuals.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: last_residuals.len(),
            context: "predict residual list",
        });
    }
    let mut next = Vec::with_capacity(n);
    for i in 0..n {
        let mut innovation: DVector<f64> = DVector::zeros(last_residuals[0].len());
        for j in 0..n {
            let w = topology.weight(i, j);
            if w != 0.0 {
                innovation += &last_residuals[j] * w;
            }
        }
        next.push(&gains.a_hat[i] * &est.xhat[i] + &gains.b_hat[i] * innovation);
    }
    Ok(next)
}

/// Installs the solved shape matrices and predicted estimates; `beta` never
/// changes.
pub fn update_confidence(
    est: &EstimatorState,
    gains: &GainSolution,
    next_xhat: Vec<DVector<f64>>,
) -> Result<EstimatorState> {
    let u: Vec<DMatrix<f64>> = gains
        .u_next
        .iter()
        .map(|m| (m + m.transpose()) * 0.5)
        .collect();
    EstimatorState::new(next_xhat, u, est.beta.clone())
}
