//! Minimal conic optimization backend.
//!
//! Solves `minimize c^T v` subject to one affine symmetric-matrix constraint
//! `A_0 + sum_j v_j A_j <= 0`, elementwise scalar lower bounds, and
//! minimum-eigenvalue bounds on symmetric-matrix variables.
//!
//! The solver is a log-det barrier path-following method with a phase-1
//! feasibility stage (minimize the slack `s` in `M(v) <= s I`). Problems in
//! this crate have matrix order below ~50, so the coefficient matrices are
//! kept sparse and each Newton step costs little; robustness matters more
//! than speed. Every optimal result is re-certified with an eigenvalue
//! routine that is independent of the barrier path.

use nalgebra::{Cholesky, DMatrix};

use crate::error::{Error, Result};

/// Structure tag of a declared variable.
#[derive(Debug, Clone)]
pub enum VarKind {
    Scalar { lower: Option<f64> },
    SymMatrix { dim: usize, min_eig: Option<f64> },
    Matrix { rows: usize, cols: usize },
}

impl VarKind {
    fn components(&self) -> usize {
        match self {
            VarKind::Scalar { .. } => 1,
            VarKind::SymMatrix { dim, .. } => dim * (dim + 1) / 2,
            VarKind::Matrix { rows, cols } => rows * cols,
        }
    }
}

/// Handle to a declared variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VarId(usize);

#[derive(Debug, Clone)]
struct VarDecl {
    name: String,
    kind: VarKind,
    offset: usize,
}

/// Sparse symmetric matrix stored as explicit (row, col, value) triplets
/// covering every nonzero entry.
type SparseSym = Vec<(usize, usize, f64)>;

/// A linear matrix-inequality problem over scalar components.
#[derive(Debug, Clone)]
pub struct ConicProblem {
    vars: Vec<VarDecl>,
    n_components: usize,
    objective: Vec<f64>,
    constraint_dim: usize,
    a0: DMatrix<f64>,
    coeffs: Vec<SparseSym>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self {
            vars: Vec::new(),
            n_components: 0,
            objective: Vec::new(),
            constraint_dim: 0,
            a0: DMatrix::zeros(0, 0),
            coeffs: Vec::new(),
        }
    }

    fn add_var(&mut self, name: &str, kind: VarKind) -> VarId {
        let offset = self.n_components;
        self.n_components += kind.components();
        self.objective.resize(self.n_components, 0.0);
        self.vars.push(VarDecl {
            name: name.to_string(),
            kind,
            offset,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_scalar(&mut self, name: &str, lower: Option<f64>) -> VarId {
        self.add_var(name, VarKind::Scalar { lower })
    }

    pub fn add_sym_matrix(&mut self, name: &str, dim: usize, min_eig: Option<f64>) -> VarId {
        self.add_var(name, VarKind::SymMatrix { dim, min_eig })
    }

    pub fn add_matrix(&mut self, name: &str, rows: usize, cols: usize) -> VarId {
        self.add_var(name, VarKind::Matrix { rows, cols })
    }

    pub fn n_components(&self) -> usize {
        self.n_components
    }

    pub fn var_name(&self, id: VarId) -> &str {
        &self.vars[id.0].name
    }

    /// Adds `weight * component` to the objective.
    pub fn add_objective_term(&mut self, component: usize, weight: f64) {
        self.objective[component] += weight;
    }

    /// Component index of entry `(r, c)` of a symmetric-matrix variable
    /// (lower triangle, column-major).
    pub fn sym_component(&self, id: VarId, r: usize, c: usize) -> usize {
        let decl = &self.vars[id.0];
        let dim = match decl.kind {
            VarKind::SymMatrix { dim, .. } => dim,
            _ => panic!("sym_component on non-symmetric variable"),
        };
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        // entries before column c: dim + (dim-1) + ... + (dim-c+1)
        let before: usize = (0..c).map(|j| dim - j).sum();
        decl.offset + before + (r - c)
    }

    /// Component index of entry `(r, c)` of a general matrix variable
    /// (row-major).
    pub fn matrix_component(&self, id: VarId, r: usize, c: usize) -> usize {
        let decl = &self.vars[id.0];
        let cols = match decl.kind {
            VarKind::Matrix { cols, .. } => cols,
            _ => panic!("matrix_component on non-matrix variable"),
        };
        decl.offset + r * cols + c
    }

    pub fn scalar_component(&self, id: VarId) -> usize {
        self.vars[id.0].offset
    }

    /// Reads a symmetric-matrix variable out of an assignment.
    pub fn sym_value(&self, id: VarId, assignment: &[f64]) -> DMatrix<f64> {
        let dim = match self.vars[id.0].kind {
            VarKind::SymMatrix { dim, .. } => dim,
            _ => panic!("sym_value on non-symmetric variable"),
        };
        let mut m = DMatrix::zeros(dim, dim);
        for c in 0..dim {
            for r in c..dim {
                let v = assignment[self.sym_component(id, r, c)];
                m[(r, c)] = v;
                m[(c, r)] = v;
            }
        }
        m
    }

    /// Reads a general matrix variable out of an assignment.
    pub fn matrix_value(&self, id: VarId, assignment: &[f64]) -> DMatrix<f64> {
        let (rows, cols) = match self.vars[id.0].kind {
            VarKind::Matrix { rows, cols } => (rows, cols),
            _ => panic!("matrix_value on non-matrix variable"),
        };
        DMatrix::from_fn(rows, cols, |r, c| assignment[self.matrix_component(id, r, c)])
    }

    pub fn scalar_value(&self, id: VarId, assignment: &[f64]) -> f64 {
        assignment[self.scalar_component(id)]
    }

    /// Installs the matrix constraint by probing an affine assembler at the
    /// origin and at each unit component vector. The assembler must be affine
    /// in the components; `verify_affine` can check that assumption.
    pub fn set_constraint_by_probe<F>(&mut self, assemble: F)
    where
        F: Fn(&[f64]) -> DMatrix<f64>,
    {
        let n = self.n_components;
        let mut v = vec![0.0; n];
        let a0 = assemble(&v);
        let dim = a0.nrows();
        let mut coeffs = Vec::with_capacity(n);
        for j in 0..n {
            v[j] = 1.0;
            let aj = assemble(&v) - &a0;
            v[j] = 0.0;
            let mut sparse = Vec::new();
            for c in 0..dim {
                for r in 0..dim {
                    let val = aj[(r, c)];
                    if val != 0.0 {
                        sparse.push((r, c, val));
                    }
                }
            }
            coeffs.push(sparse);
        }
        self.constraint_dim = dim;
        self.a0 = a0;
        self.coeffs = coeffs;
    }

    /// Midpoint test for affinity of an assembler over this problem's
    /// components. Returns the worst deviation.
    pub fn verify_affine<F>(&self, assemble: F, trials: usize) -> f64
    where
        F: Fn(&[f64]) -> DMatrix<f64>,
    {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(0x5eed);
        let n = self.n_components;
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mid: Vec<f64> = v.iter().zip(&w).map(|(a, b)| 0.5 * (a + b)).collect();
            let mv = assemble(&v);
            let mw = assemble(&w);
            let mm = assemble(&mid);
            let dev = (&mm - (&mv + &mw) * 0.5).amax();
            worst = worst.max(dev);
        }
        worst
    }

    /// Evaluates the constraint matrix `A_0 + sum v_j A_j`.
    pub fn constraint_matrix(&self, v: &[f64]) -> DMatrix<f64> {
        let mut m = self.a0.clone();
        for (j, sparse) in self.coeffs.iter().enumerate() {
            let vj = v[j];
            if vj == 0.0 {
                continue;
            }
            for &(r, c, val) in sparse {
                m[(r, c)] += vj * val;
            }
        }
        m
    }

    /// Largest eigenvalue of the constraint matrix at `v`.
    pub fn constraint_lambda_max(&self, v: &[f64]) -> f64 {
        lambda_max(&self.constraint_matrix(v))
    }

    pub(crate) fn bounds_satisfied(&self, v: &[f64], tol: f64) -> bool {
        for decl in &self.vars {
            match decl.kind {
                VarKind::Scalar { lower: Some(lb) } => {
                    if v[decl.offset] < lb - tol {
                        return false;
                    }
                }
                VarKind::SymMatrix {
                    dim,
                    min_eig: Some(mu),
                } => {
                    let mut m = DMatrix::zeros(dim, dim);
                    let mut idx = decl.offset;
                    for c in 0..dim {
                        for r in c..dim {
                            m[(r, c)] = v[idx];
                            m[(c, r)] = v[idx];
                            idx += 1;
                        }
                    }
                    let eig = nalgebra::SymmetricEigen::new(m);
                    if eig.eigenvalues.min() < mu - tol {
                        return false;
                    }
                }
                _ => {}
            }
        }
        true
    }

    /// Whether `v` is strictly inside the constraint, the variable bounds
    /// and the solver box.
    pub fn strictly_feasible(&self, v: &[f64], box_bound: f64) -> bool {
        if v.len() != self.n_components {
            return false;
        }
        if v.iter().any(|x| x.abs() >= box_bound) {
            return false;
        }
        if !self.bounds_satisfied(v, -1e-12) {
            return false;
        }
        self.constraint_dim == 0 || self.constraint_lambda_max(v) < -1e-12
    }

    /// A default strictly-interior-for-bounds starting point.
    pub(crate) fn default_start(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.n_components];
        for decl in &self.vars {
            match decl.kind {
                VarKind::Scalar { lower: Some(lb) } => v[decl.offset] = lb + 1.0,
                VarKind::SymMatrix { dim, min_eig } => {
                    let diag = min_eig.unwrap_or(0.0) + 1.0;
                    let mut idx = decl.offset;
                    for c in 0..dim {
                        for r in c..dim {
                            v[idx] = if r == c { diag } else { 0.0 };
                            idx += 1;
                        }
                    }
                }
                _ => {}
            }
        }
        v
    }
}

impl Default for ConicProblem {
    fn default() -> Self {
        Self::new()
    }
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    nalgebra::SymmetricEigen::new(sym).eigenvalues.max()
}

/// Solver status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Failed,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: SolveStatus,
    pub assignment: Vec<f64>,
    pub objective_value: f64,
    /// Certified largest eigenvalue of the constraint matrix at the solution.
    pub constraint_lambda_max: f64,
    pub newton_iterations: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// Barrier duality-gap target (`nu / t`).
    pub gap_tol: f64,
    /// Phase-1 early-exit margin: stop once `s` is below `-feas_early`.
    pub feas_early: f64,
    /// Declared infeasible if phase-1 cannot push `s` below `-feas_margin`.
    pub feas_margin: f64,
    /// Residual ceiling for certifying a solution feasible.
    pub cert_tol: f64,
    /// Bound-violation ceiling for certification.
    pub bound_tol: f64,
    /// Per-phase Newton iteration budget.
    pub max_newton: usize,
    /// Box bound `|v_j| <= box_bound` on every component, keeping the
    /// barrier bounded below along directions the constraint leaves free.
    pub box_bound: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            gap_tol: 1e-8,
            feas_early: 1e-4,
            feas_margin: 1e-9,
            cert_tol: 1e-6,
            bound_tol: 1e-9,
            max_newton: 3000,
            box_bound: 1e6,
        }
    }
}

/// One strictly-positive-definite barrier block `G0 + sum v_j G_j > 0`.
struct Block {
    dim: usize,
    g0: DMatrix<f64>,
    /// (component index, sparse coefficient) pairs; only listed components
    /// touch this block.
    coeffs: Vec<(usize, SparseSym)>,
}

impl Block {
    fn eval(&self, v: &[f64]) -> DMatrix<f64> {
        let mut m = self.g0.clone();
        for (j, sparse) in &self.coeffs {
            let vj = v[*j];
            if vj == 0.0 {
                continue;
            }
            for &(r, c, val) in sparse {
                m[(r, c)] += vj * val;
            }
        }
        m
    }
}

struct Barrier {
    blocks: Vec<Block>,
    /// Total barrier parameter (sum of block orders).
    nu: f64,
}

impl Barrier {
    /// Builds the barrier blocks for the problem; when `phase1_slack` is set,
    /// that component is added to the main block diagonal (the `s I` term).
    fn build(p: &ConicProblem, n_total: usize, phase1_slack: Option<usize>, box_bound: f64) -> Self {
        let mut blocks = Vec::new();
        // main block: S = -(A0 + sum v_j A_j) (+ s I in phase 1)
        if p.constraint_dim > 0 {
            let mut coeffs: Vec<(usize, SparseSym)> = Vec::new();
            for (j, sparse) in p.coeffs.iter().enumerate() {
                if sparse.is_empty() {
                    continue;
                }
                let neg: SparseSym = sparse.iter().map(|&(r, c, v)| (r, c, -v)).collect();
                coeffs.push((j, neg));
            }
            if let Some(s_idx) = phase1_slack {
                let ident: SparseSym = (0..p.constraint_dim).map(|i| (i, i, 1.0)).collect();
                coeffs.push((s_idx, ident));
            }
            blocks.push(Block {
                dim: p.constraint_dim,
                g0: -&p.a0,
                coeffs,
            });
        }
        // bound blocks
        for decl in &p.vars {
            match decl.kind {
                VarKind::Scalar { lower: Some(lb) } => {
                    blocks.push(Block {
                        dim: 1,
                        g0: DMatrix::from_element(1, 1, -lb),
                        coeffs: vec![(decl.offset, vec![(0, 0, 1.0)])],
                    });
                }
                VarKind::SymMatrix {
                    dim,
                    min_eig: Some(mu),
                } => {
                    let mut coeffs = Vec::new();
                    let mut idx = decl.offset;
                    for c in 0..dim {
                        for r in c..dim {
                            let sparse: SparseSym = if r == c {
                                vec![(r, c, 1.0)]
                            } else {
                                vec![(r, c, 1.0), (c, r, 1.0)]
                            };
                            coeffs.push((idx, sparse));
                            idx += 1;
                        }
                    }
                    blocks.push(Block {
                        dim,
                        g0: DMatrix::identity(dim, dim) * (-mu),
                        coeffs,
                    });
                }
                _ => {}
            }
        }
        // box blocks `box_bound - v_j > 0` and `box_bound + v_j > 0` on the
        // problem components; the phase-1 slack is exempt (the objective
        // bounds it above, the main block bounds it below)
        let _ = n_total;
        for j in 0..p.n_components {
            blocks.push(Block {
                dim: 1,
                g0: DMatrix::from_element(1, 1, box_bound),
                coeffs: vec![(j, vec![(0, 0, -1.0)])],
            });
            blocks.push(Block {
                dim: 1,
                g0: DMatrix::from_element(1, 1, box_bound),
                coeffs: vec![(j, vec![(0, 0, 1.0)])],
            });
        }
        let nu = blocks.iter().map(|b| b.dim as f64).sum();
        Self { blocks, nu }
    }

    /// Returns `-sum logdet(S_b)` if all blocks are strictly positive
    /// definite at `v`, else `None`.
    fn value(&self, v: &[f64]) -> Option<f64> {
        let mut total = 0.0;
        for b in &self.blocks {
            let s = b.eval(v);
            let chol = Cholesky::new(s)?;
            let mut logdet = 0.0;
            for i in 0..b.dim {
                let d = chol.l_dirty()[(i, i)];
                if !(d > 0.0) {
                    return None;
                }
                logdet += d.ln();
            }
            total -= 2.0 * logdet;
        }
        Some(total)
    }

    fn feasible(&self, v: &[f64]) -> bool {
        self.value(v).is_some()
    }

    /// Gradient and Hessian of the barrier at a strictly feasible `v`.
    fn grad_hess(&self, v: &[f64], n: usize) -> Option<(Vec<f64>, DMatrix<f64>)> {
        let mut grad = vec![0.0; n];
        let mut hess = DMatrix::zeros(n, n);
        for b in &self.blocks {
            let s = b.eval(v);
            let chol = Cholesky::new(s)?;
            let sinv = chol.inverse();
            for (j, gj) in &b.coeffs {
                let mut tr = 0.0;
                for &(r, c, val) in gj {
                    tr += val * sinv[(c, r)];
                }
                grad[*j] -= tr;
            }
            for a_idx in 0..b.coeffs.len() {
                let (j, gj) = &b.coeffs[a_idx];
                for b_idx in a_idx..b.coeffs.len() {
                    let (l, gl) = &b.coeffs[b_idx];
                    let mut h = 0.0;
                    for &(r1, c1, x) in gj {
                        for &(r2, c2, y) in gl {
                            h += x * y * sinv[(c1, r2)] * sinv[(c2, r1)];
                        }
                    }
                    hess[(*j, *l)] += h;
                    if j != l {
                        hess[(*l, *j)] += h;
                    }
                }
            }
        }
        Some((grad, hess))
    }
}

struct CenterOutcome {
    newton_iters: usize,
}

/// Damped-Newton centering of `t * c^T v + barrier(v)`.
///
/// `early_stop` lets phase 1 abandon centering once the slack objective is
/// sufficiently negative.
fn center(
    barrier: &Barrier,
    objective: &[f64],
    t: f64,
    v: &mut Vec<f64>,
    budget: usize,
    early_stop: &dyn Fn(&[f64]) -> bool,
) -> Option<CenterOutcome> {
    let n = v.len();
    let mut iters = 0;
    loop {
        if iters >= budget.min(40) {
            return Some(CenterOutcome {
                newton_iters: iters,
            });
        }
        if early_stop(v) {
            return Some(CenterOutcome {
                newton_iters: iters,
            });
        }
        let (bgrad, bhess) = barrier.grad_hess(v, n)?;
        let grad: Vec<f64> = (0..n).map(|j| t * objective[j] + bgrad[j]).collect();
        // Jacobi-preconditioned, ridge-regularized Newton solve: barrier
        // Hessians span many orders of magnitude near the boundary, so the
        // system is normalized to a unit diagonal before factorization and
        // the ridge is expressed in those units
        let scale: Vec<f64> = (0..n)
            .map(|i| bhess[(i, i)].max(1e-300).sqrt())
            .collect();
        let mut hn = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                hn[(r, c)] = bhess[(r, c)] / (scale[r] * scale[c]);
            }
        }
        let gn = nalgebra::DVector::from_fn(n, |j, _| grad[j] / scale[j]);
        let mut ridge = 0.0;
        let dir = loop {
            let mut h = hn.clone();
            if ridge > 0.0 {
                for i in 0..n {
                    h[(i, i)] += ridge;
                }
            }
            match Cholesky::new(h) {
                Some(ch) => {
                    let y = ch.solve(&-&gn);
                    break nalgebra::DVector::from_fn(n, |j, _| y[j] / scale[j]);
                }
                None => {
                    ridge = if ridge == 0.0 { 1e-12 } else { ridge * 100.0 };
                    if ridge > 1.0 {
                        return None;
                    }
                }
            }
        };
        let decrement: f64 = -(0..n).map(|j| grad[j] * dir[j]).sum::<f64>();
        let f0 = t * dot(objective, v) + barrier.value(v)?;
        // the Newton decrement is affine-invariant and bounds the centering
        // suboptimality, so a modest threshold suffices for path-following
        if decrement * 0.5 < 1e-6 + 1e-12 * f0.abs() {
            return Some(CenterOutcome {
                newton_iters: iters,
            });
        }
        // backtracking line search
        let mut alpha = 1.0;
        let mut accepted = false;
        let mut improvement = 0.0;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..n).map(|j| v[j] + alpha * dir[j]).collect();
            if let Some(bv) = barrier.value(&trial) {
                let f = t * dot(objective, &trial) + bv;
                if f <= f0 - 0.25 * alpha * decrement {
                    improvement = f0 - f;
                    *v = trial;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        iters += 1;
        if !accepted || improvement < 1e-9 * (1.0 + f0.abs()) {
            // either the line search failed outright or progress fell below
            // what is resolvable; both mean this centering is done
            return Some(CenterOutcome {
                newton_iters: iters,
            });
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the problem, optionally warm-starting from a previous assignment.
pub fn solve(p: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution> {
    solve_warm(p, opts, None)
}

pub fn solve_warm(
    p: &ConicProblem,
    opts: &SolverOptions,
    warm: Option<&[f64]>,
) -> Result<ConicSolution> {
    let n = p.n_components;
    let barrier = Barrier::build(p, n, None, opts.box_bound);
    let mut total_newton = 0usize;

    // phase 1: find a strictly feasible point, unless the warm start already is
    let mut v = match warm {
        Some(w) if w.len() == n && barrier.feasible(w) => w.to_vec(),
        _ => {
            match phase1(p, opts, &mut total_newton)? {
                Phase1Outcome::Feasible(v) => v,
                Phase1Outcome::Infeasible(s) => {
                    return Ok(ConicSolution {
                        status: SolveStatus::Infeasible,
                        assignment: vec![0.0; n],
                        objective_value: f64::NAN,
                        constraint_lambda_max: s,
                        newton_iterations: total_newton,
                    });
                }
                Phase1Outcome::Stalled => {
                    return Ok(ConicSolution {
                        status: SolveStatus::Failed,
                        assignment: vec![0.0; n],
                        objective_value: f64::NAN,
                        constraint_lambda_max: f64::NAN,
                        newton_iterations: total_newton,
                    });
                }
            }
        }
    };

    // phase 2: path-following on the real objective, with its own Newton
    // budget so a long phase 1 cannot starve it
    let has_objective = p.objective.iter().any(|&c| c != 0.0);
    if has_objective {
        let mut phase2_newton = 0usize;
        // start t so the objective already carries weight comparable to the
        // barrier; starting at t = 1 would drag a good warm start toward the
        // analytic center before the path pulls it back
        let mut t = (barrier.nu / (0.1 * (1.0 + dot(&p.objective, &v).abs()))).max(1.0);
        loop {
            if phase2_newton >= opts.max_newton {
                break;
            }
            let out = center(
                &barrier,
                &p.objective,
                t,
                &mut v,
                opts.max_newton - phase2_newton,
                &|_| false,
            )
            .ok_or_else(|| Error::SolverFailure("barrier centering lost feasibility".into()))?;
            phase2_newton += out.newton_iters;
            // duality-gap stop, relative to the objective magnitude
            if barrier.nu / t < opts.gap_tol * (1.0 + dot(&p.objective, &v).abs()) {
                break;
            }
            t *= 10.0;
        }
        total_newton += phase2_newton;
    }

    // independent certification
    let lam = if p.constraint_dim > 0 {
        p.constraint_lambda_max(&v)
    } else {
        f64::NEG_INFINITY
    };
    let ok = lam <= opts.cert_tol && p.bounds_satisfied(&v, opts.bound_tol);
    Ok(ConicSolution {
        status: if ok {
            SolveStatus::Optimal
        } else {
            SolveStatus::Failed
        },
        objective_value: dot(&p.objective, &v),
        assignment: v,
        constraint_lambda_max: lam,
        newton_iterations: total_newton,
    })
}

enum Phase1Outcome {
    Feasible(Vec<f64>),
    Infeasible(f64),
    Stalled,
}

fn phase1(
    p: &ConicProblem,
    opts: &SolverOptions,
    total_newton: &mut usize,
) -> Result<Phase1Outcome> {
    let n = p.n_components;
    if p.constraint_dim == 0 {
        return Ok(Phase1Outcome::Feasible(p.default_start()));
    }
    let s_idx = n;
    let barrier = Barrier::build(p, n + 1, Some(s_idx), opts.box_bound);
    let mut v = p.default_start();
    let m0 = p.constraint_matrix(&v);
    let s0 = lambda_max(&m0) + 1.0;
    v.push(s0);
    debug_assert!(barrier.feasible(&v));
    let mut objective = vec![0.0; n + 1];
    objective[s_idx] = 1.0;

    let deep_enough = |v: &[f64]| v[s_idx] <= -opts.feas_early;
    let mut t = (barrier.nu / (0.1 * (1.0 + s0.abs()))).max(1.0);
    loop {
        if *total_newton >= opts.max_newton {
            if v[s_idx] < -opts.feas_margin {
                break;
            }
            return Ok(Phase1Outcome::Stalled);
        }
        let out = center(
            &barrier,
            &objective,
            t,
            &mut v,
            opts.max_newton - *total_newton,
            &deep_enough,
        )
        .ok_or_else(|| Error::SolverFailure("phase-1 centering lost feasibility".into()))?;
        *total_newton += out.newton_iters;
        if deep_enough(&v) {
            break;
        }
        if barrier.nu / t < opts.feas_margin * 0.1 {
            break;
        }
        t *= 10.0;
    }
    let s = v[s_idx];
    if s < -opts.feas_margin {
        v.truncate(n);
        // the point satisfies M(v) <= s I < 0 strictly
        Ok(Phase1Outcome::Feasible(v))
    } else {
        Ok(Phase1Outcome::Infeasible(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn schur_problem(a: f64) -> ConicProblem {
        // minimize u s.t. [[-u, a],[a, -1]] <= 0, optimum u = a^2
        let mut p = ConicProblem::new();
        let u = p.add_scalar("u", None);
        let u_comp = p.scalar_component(u);
        p.add_objective_term(u_comp, 1.0);
        p.set_constraint_by_probe(|v| {
            dmatrix![-v[0], a; a, -1.0]
        });
        p
    }

    #[test]
    fn schur_complement_minimum() {
        let p = schur_problem(2.0);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 4.0).abs() < 1e-5, "{}", sol.objective_value);
        assert!(sol.constraint_lambda_max <= 1e-6);
    }

    #[test]
    fn constant_identity_is_infeasible() {
        let mut p = ConicProblem::new();
        let _x = p.add_scalar("x", None);
        p.set_constraint_by_probe(|_| DMatrix::identity(2, 2));
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn negative_identity_always_feasible() {
        let mut p = ConicProblem::new();
        let _x = p.add_scalar("x", None);
        p.set_constraint_by_probe(|_| -DMatrix::identity(3, 3));
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
    }

    #[test]
    fn scalar_lower_bound_binds() {
        // minimize x s.t. x >= 2 and [ -x ] <= 0
        let mut p = ConicProblem::new();
        let x = p.add_scalar("x", Some(2.0));
        p.add_objective_term(p.scalar_component(x), 1.0);
        p.set_constraint_by_probe(|v| dmatrix![-v[0]]);
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 2.0).abs() < 1e-5);
        assert!(sol.assignment[0] >= 2.0 - 1e-9);
    }

    #[test]
    fn sym_matrix_trace_minimization() {
        // minimize trace(X) s.t. X >= I (as -X + I <= 0) and X >= 0.5 I bound
        let mut p = ConicProblem::new();
        let x = p.add_sym_matrix("X", 2, Some(0.5));
        for i in 0..2 {
            p.add_objective_term(p.sym_component(x, i, i), 1.0);
        }
        let xc = x;
        p.set_constraint_by_probe(move |v| {
            // rebuild X from components: layout [x00, x10, x11]
            let m = dmatrix![v[0], v[1]; v[1], v[2]];
            DMatrix::identity(2, 2) - m
        });
        let _ = xc;
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective_value - 2.0).abs() < 1e-5, "{}", sol.objective_value);
    }

    #[test]
    fn determinism_across_calls() {
        let p = schur_problem(1.5);
        let a = solve(&p, &SolverOptions::default()).unwrap();
        let b = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.objective_value, b.objective_value);
        assert_eq!(a.assignment, b.assignment);
    }

    #[test]
    fn warm_start_skips_phase1() {
        let p = schur_problem(2.0);
        let first = solve(&p, &SolverOptions::default()).unwrap();
        let warmed = solve_warm(&p, &SolverOptions::default(), Some(&first.assignment)).unwrap();
        assert_eq!(warmed.status, SolveStatus::Optimal);
        assert!((warmed.objective_value - 4.0).abs() < 1e-5);
    }

    #[test]
    fn probe_affinity_check() {
        let p = schur_problem(2.0);
        let worst = p.verify_affine(|v| dmatrix![-v[0], 2.0; 2.0, -1.0], 20);
        assert!(worst <= 1e-10);
    }
}
