//! Steady-state second-moment analysis and the differential-privacy budget.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Outcome of the Lyapunov fixed-point iteration.
#[derive(Debug, Clone)]
pub struct SteadyStateReport {
    pub spectral_radius: f64,
    pub converged: bool,
    pub g: DMatrix<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Spectral radius of `C_k` over roughly one sinusoidal period, as
    /// context for time-varying dynamics frozen at `k = 0`.
    pub rho_over_period: Vec<f64>,
}

/// One recursion step `C0 g C0^T + C0 M C0^T + F0 R F0^T`.
pub fn lyapunov_step(
    g: &DMatrix<f64>,
    c0: &DMatrix<f64>,
    f0: &DMatrix<f64>,
    m_k: &DMatrix<f64>,
    r_k: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = c0.nrows();
    if g.nrows() != n || m_k.nrows() != n || f0.nrows() != n || r_k.nrows() != f0.ncols() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.nrows(),
            context: "lyapunov_step operands",
        });
    }
    Ok(c0 * g * c0.transpose() + c0 * m_k * c0.transpose() + f0 * r_k * f0.transpose())
}

pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|e| e.norm()).fold(0.0, f64::max)
}

/// Iterates the recursion from `g = 0` until the residual drops below `tol`.
/// If `rho(C0) >= 1` the report comes back with `converged = false` and the
/// radius filled in; no iteration is attempted.
pub fn solve_steady_state(
    c0: &DMatrix<f64>,
    f0: &DMatrix<f64>,
    m0: &DMatrix<f64>,
    r0: &DMatrix<f64>,
    tol: f64,
    max_iter: usize,
    rho_schedule: Option<&crate::system::MatrixSchedule>,
) -> Result<SteadyStateReport> {
    let rho = spectral_radius(c0);
    let rho_over_period = match rho_schedule {
        Some(s) => (0..=6).map(|k| spectral_radius(&s.eval(k))).collect(),
        None => Vec::new(),
    };
    if rho >= 1.0 {
        return Ok(SteadyStateReport {
            spectral_radius: rho,
            converged: false,
            g: DMatrix::zeros(c0.nrows(), c0.nrows()),
            iterations: 0,
            residual: f64::INFINITY,
            rho_over_period,
        });
    }
    let mut g = DMatrix::zeros(c0.nrows(), c0.nrows());
    for iter in 1..=max_iter {
        let next = lyapunov_step(&g, c0, f0, m0, r0)?;
        let residual = (&next - &g).amax();
        g = next;
        if residual <= tol {
            return Ok(SteadyStateReport {
                spectral_radius: rho,
                converged: true,
                g,
                iterations: iter,
                residual,
                rho_over_period,
            });
        }
    }
    let residual = (lyapunov_step(&g, c0, f0, m0, r0)? - &g).amax();
    Ok(SteadyStateReport {
        spectral_radius: rho,
        converged: false,
        g,
        iterations: max_iter,
        residual,
        rho_over_period,
    })
}

/// Differential-privacy budget `varsigma * q / (c * (q - a_hat))`.
///
/// `a_hat` is a scalar bound on the estimator gain; the decay rate `q` must
/// strictly exceed it for the budget to be defined.
pub fn privacy_epsilon(varsigma: f64, c: f64, q: f64, a_hat: f64) -> Result<f64> {
    if !(varsigma > 0.0) || !(c > 0.0) || !(q > 0.0 && q < 1.0) || !(a_hat >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "privacy_epsilon requires varsigma>0, c>0, q in (0,1), a_hat>=0; \
             got varsigma={varsigma}, c={c}, q={q}, a_hat={a_hat}"
        )));
    }
    if q <= a_hat {
        return Err(Error::BudgetUndefined { q, a_hat });
    }
    Ok(varsigma * q / (c * (q - a_hat)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::MatrixSchedule;
    use nalgebra::dmatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn lyapunov_step_memoryless() {
        let out = lyapunov_step(
            &dmatrix![3.0],
            &dmatrix![0.0],
            &dmatrix![2.0],
            &dmatrix![1.0],
            &dmatrix![0.5],
        )
        .unwrap();
        assert_eq!(out, dmatrix![2.0]); // F R F^T only
    }

    #[test]
    fn lyapunov_step_scalar_arithmetic() {
        let out = lyapunov_step(
            &dmatrix![0.0],
            &dmatrix![0.5],
            &dmatrix![1.0],
            &dmatrix![0.0],
            &dmatrix![1.0],
        )
        .unwrap();
        assert_eq!(out, dmatrix![1.0]);
    }

    #[test]
    fn scalar_fixed_point_four_thirds() {
        // C=0.5, M=0, F=1, R=1: g* = 1/(1-0.25) = 4/3
        let report = solve_steady_state(
            &dmatrix![0.5],
            &dmatrix![1.0],
            &dmatrix![0.0],
            &dmatrix![1.0],
            1e-12,
            10_000,
            None,
        )
        .unwrap();
        assert!(report.converged);
        assert!((report.g[(0, 0)] - 4.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn ship_c0_is_stable() {
        let (c0, f0) = crate::system::ship_matrices(0);
        // characteristic-polynomial oracle for the 2x2 eigenvalues
        let tr = c0[(0, 0)] + c0[(1, 1)];
        let det = c0[(0, 0)] * c0[(1, 1)] - c0[(0, 1)] * c0[(1, 0)];
        let disc = tr * tr - 4.0 * det;
        assert!(disc > 0.0);
        let l1 = (tr + disc.sqrt()) / 2.0;
        let l2 = (tr - disc.sqrt()) / 2.0;
        let rho_oracle = l1.abs().max(l2.abs());
        assert!(rho_oracle < 1.0);

        let report = solve_steady_state(
            &c0,
            &f0,
            &(DMatrix::identity(2, 2) * 2.0),
            &dmatrix![0.4],
            1e-10,
            10_000,
            Some(&MatrixSchedule::ShipC),
        )
        .unwrap();
        assert!(report.converged);
        assert!((report.spectral_radius - rho_oracle).abs() < 1e-12);
        assert_eq!(report.rho_over_period.len(), 7);
        // fixed point satisfies the recursion
        let back = lyapunov_step(
            &report.g,
            &c0,
            &f0,
            &(DMatrix::identity(2, 2) * 2.0),
            &dmatrix![0.4],
        )
        .unwrap();
        assert!((back - &report.g).amax() <= 1e-10);
    }

    #[test]
    fn unstable_scaling_reports_rho() {
        let report = solve_steady_state(
            &(DMatrix::identity(2, 2) * 1.1),
            &DMatrix::identity(2, 2),
            &DMatrix::zeros(2, 2),
            &DMatrix::identity(2, 2),
            1e-10,
            100,
            None,
        )
        .unwrap();
        assert!(!report.converged);
        assert!((report.spectral_radius - 1.1).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_iterates_monotone_from_zero() {
        let (c0, f0) = crate::system::ship_matrices(0);
        let m = DMatrix::identity(2, 2) * 2.0;
        let r = dmatrix![0.4];
        let mut g = DMatrix::zeros(2, 2);
        for _ in 0..200 {
            let next = lyapunov_step(&g, &c0, &f0, &m, &r).unwrap();
            let diff = &next - &g;
            let eig = nalgebra::SymmetricEigen::new((&diff + diff.transpose()) * 0.5);
            assert!(eig.eigenvalues.min() >= -1e-12);
            g = next;
        }
    }

    #[test]
    fn privacy_epsilon_values() {
        assert!((privacy_epsilon(1.0, 1.0, 0.9, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((privacy_epsilon(1.0, 1.0, 0.9, 0.5).unwrap() - 2.25).abs() < 1e-15);
        // doubling c halves epsilon
        let e1 = privacy_epsilon(0.7, 1.3, 0.8, 0.2).unwrap();
        let e2 = privacy_epsilon(0.7, 2.6, 0.8, 0.2).unwrap();
        assert!((e1 / e2 - 2.0).abs() < 1e-12);
        // scale relation in varsigma
        let base = privacy_epsilon(1.0, 1.3, 0.8, 0.2).unwrap();
        let scaled = privacy_epsilon(3.5, 1.3, 0.8, 0.2).unwrap();
        assert_eq!(scaled, 3.5 * base);
    }

    #[test]
    fn privacy_epsilon_undefined_when_q_too_small() {
        assert!(matches!(
            privacy_epsilon(1.0, 1.0, 0.5, 0.5).unwrap_err(),
            Error::BudgetUndefined { .. }
        ));
        assert!(matches!(
            privacy_epsilon(1.0, 1.0, 0.3, 0.6).unwrap_err(),
            Error::BudgetUndefined { .. }
        ));
    }

    #[test]
    fn privacy_epsilon_random_formula_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..100 {
            let varsigma = rng.random_range(0.01..5.0);
            let c = rng.random_range(0.01..5.0);
            let q = rng.random_range(0.05..0.999);
            let a_hat = rng.random_range(0.0..q * 0.99);
            let got = privacy_epsilon(varsigma, c, q, a_hat).unwrap();
            let expect = varsigma * q / (c * (q - a_hat));
            assert!((got - expect).abs() <= 1e-12 * expect.abs());
        }
    }
}
