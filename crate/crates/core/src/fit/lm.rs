//! Damped Gauss-Newton (Levenberg-Marquardt) minimizer for small weighted
//! least-squares problems. Deterministic: no randomness, fixed evaluation order.

use nalgebra::{DMatrix, DVector};

pub(crate) struct LmOptions {
    pub max_iter: usize,
    /// Converged when an accepted step reduces chi2 by less than this relative
    /// amount.
    pub ftol: f64,
    /// Converged when the norm of an accepted step falls below this.
    pub xtol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iter: 500,
            ftol: 1e-10,
            xtol: 1e-12,
        }
    }
}

pub(crate) struct LmOutcome {
    pub params: Vec<f64>,
    pub chi2: f64,
    pub converged: bool,
    #[allow(dead_code)]
    pub n_iter: usize,
}

/// Minimize the squared norm of the residual vector filled by `residuals`.
/// `residuals` and `jacobian` return false for infeasible parameter values, which
/// the damping loop treats as a rejected step.
pub(crate) fn minimize<R, J>(
    p0: &[f64],
    n_res: usize,
    residuals: R,
    jacobian: J,
    opts: &LmOptions,
) -> LmOutcome
where
    R: Fn(&[f64], &mut [f64]) -> bool,
    J: Fn(&[f64], &mut DMatrix<f64>) -> bool,
{
    let n_par = p0.len();
    let mut p = p0.to_vec();
    let mut r = vec![0.0; n_res];
    if !residuals(&p, &mut r) {
        return LmOutcome {
            params: p,
            chi2: f64::INFINITY,
            converged: false,
            n_iter: 0,
        };
    }
    let mut chi2 = sum_sq(&r);
    if !chi2.is_finite() {
        return LmOutcome {
            params: p,
            chi2: f64::INFINITY,
            converged: false,
            n_iter: 0,
        };
    }
    let mut jac = DMatrix::zeros(n_res, n_par);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iter = 0;
    'outer: while iter < opts.max_iter {
        iter += 1;
        if !jacobian(&p, &mut jac) {
            break;
        }
        let rv = DVector::from_column_slice(&r);
        let grad = jac.transpose() * &rv;
        let hess = jac.transpose() * &jac;
        let diag_max = (0..n_par).fold(0.0f64, |m, i| m.max(hess[(i, i)]));
        if !(diag_max.is_finite()) {
            break;
        }
        loop {
            let mut damped = hess.clone();
            for i in 0..n_par {
                let d = hess[(i, i)].max(1e-12 * diag_max).max(1e-300);
                damped[(i, i)] += lambda * d;
            }
            let step = damped
                .clone()
                .cholesky()
                .map(|ch| ch.solve(&(-&grad)))
                .or_else(|| damped.lu().solve(&(-&grad)));
            let accept = step.and_then(|delta| {
                let trial: Vec<f64> = p
                    .iter()
                    .zip(delta.iter())
                    .map(|(&pi, &di)| pi + di)
                    .collect();
                let mut rt = vec![0.0; n_res];
                if !residuals(&trial, &mut rt) {
                    return None;
                }
                let c2 = sum_sq(&rt);
                if c2.is_finite() && c2 <= chi2 {
                    Some((trial, rt, c2, delta.norm()))
                } else {
                    None
                }
            });
            match accept {
                Some((trial, rt, c2, step_norm)) => {
                    let drop = chi2 - c2;
                    p = trial;
                    r = rt;
                    chi2 = c2;
                    lambda = (lambda * 0.1).max(1e-14);
                    if drop <= opts.ftol * chi2.max(f64::MIN_POSITIVE) || step_norm < opts.xtol {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > 1e15 {
                        // no direction improves: at a (possibly flat) minimum
                        converged = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    LmOutcome {
        params: p,
        chi2,
        converged,
        n_iter: iter,
    }
}

/// Parameter covariance (J^T J)^-1 at the solution, for residuals already
/// weighted by 1/sigma. None when the normal matrix is singular.
pub(crate) fn covariance(jac: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let hess = jac.transpose() * jac;
    hess.clone()
        .cholesky()
        .map(|ch| ch.inverse())
        .or_else(|| hess.try_inverse())
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}
