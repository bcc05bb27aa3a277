//! Angle-resolved summary of line fits, with a consistency fit of the cavity
//! constants against the model's angular dependence.
//!
//! The width/shift/asymmetry trends over angle constrain (κ, coupling) only up
//! to a joint rescaling with the linearization slope: scaling all three by s
//! leaves every observable unchanged. The slope is therefore held at its
//! configured value (gauge) and only κ and the coupling are fitted.
//!
//! Rows are taken at face value in grid units; the consistency fit reads each
//! center as a resonance shift and each width in units of γ, which is only
//! meaningful for spectra sampled on a common energy axis (not per-angle
//! rescaled detunings, where width and center are fixed by construction).

use super::lm::{covariance, minimize, LmOptions};
use super::{FanoFitResult, FitError};
use crate::model::PhysicalModel;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleSeriesRow {
    pub delta_theta_urad: f64,
    pub gamma_total: f64,
    pub gamma_err: Option<f64>,
    pub delta_ls: f64,
    pub delta_ls_err: Option<f64>,
    pub q_re: f64,
    pub q_err: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConsistencyFit {
    pub kappa: f64,
    pub coupling_strength: f64,
    /// Gauge: fixed, not fitted (copied from the hint model).
    pub delta_c_slope: f64,
    pub kappa_err: Option<f64>,
    pub coupling_err: Option<f64>,
    pub chi2: f64,
    pub dof: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AngleSeries {
    /// Sorted by angle.
    pub rows: Vec<AngleSeriesRow>,
    /// Present when at least two distinct angles constrain the fit.
    pub consistency: Option<ConsistencyFit>,
    pub single_angle: bool,
}

/// Symmetric-limit rows (and near-symmetric ones, where the reported q is the
/// reciprocal-branch surrogate) carry no usable asymmetry information.
const Q_INFORMATIVE_MAX: f64 = 100.0;

struct SeriesProblem {
    angles: Vec<f64>,
    gamma: f64,
    slope: f64,
    /// (value, weight) per row: width, shift, and optionally q.
    obs: Vec<RowObs>,
}

struct RowObs {
    gamma_total: (f64, f64),
    delta_ls: (f64, f64),
    q: Option<(f64, f64)>,
}

fn predict(gamma: f64, slope: f64, kappa: f64, coupling: f64, angle: f64) -> (f64, f64, f64) {
    let dc = slope * angle;
    let denom = kappa * kappa + dc * dc;
    let gamma_sr = 2.0 * coupling * kappa / denom;
    let total = gamma + gamma_sr;
    let shift = -coupling * dc / denom;
    let qe = if dc == 0.0 {
        f64::INFINITY
    } else {
        let q_re = (gamma_sr / total) * (kappa / dc);
        let q_im = gamma / total;
        let x = q_re * q_re + q_im * q_im - 1.0;
        (x + (x * x + 4.0 * q_re * q_re).sqrt()) / (2.0 * q_re)
    };
    (total, shift, qe)
}

impl SeriesProblem {
    fn n_res(&self) -> usize {
        self.obs.iter().map(|o| 2 + o.q.is_some() as usize).sum()
    }

    /// p = (ln kappa, ln coupling)
    fn residuals(&self, p: &[f64], out: &mut [f64]) -> bool {
        if !p.iter().all(|v| v.is_finite()) {
            return false;
        }
        let (kappa, coupling) = (p[0].exp(), p[1].exp());
        if !(kappa.is_finite() && coupling.is_finite()) {
            return false;
        }
        let mut k = 0;
        for (i, o) in self.obs.iter().enumerate() {
            let (total, shift, qe) =
                predict(self.gamma, self.slope, kappa, coupling, self.angles[i]);
            out[k] = (o.gamma_total.0 - total) / o.gamma_total.1;
            out[k + 1] = (o.delta_ls.0 - shift) / o.delta_ls.1;
            k += 2;
            if let Some((q, w)) = o.q {
                out[k] = (q - qe) / w;
                k += 1;
            }
        }
        out[..k].iter().all(|v| v.is_finite())
    }

    fn jacobian(&self, p: &[f64], out: &mut DMatrix<f64>) -> bool {
        let n = self.n_res();
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        for j in 0..2 {
            let h = 1e-6 * p[j].abs().max(1.0);
            let mut pj = p.to_vec();
            pj[j] = p[j] - h;
            if !self.residuals(&pj, &mut lo) {
                return false;
            }
            pj[j] = p[j] + h;
            if !self.residuals(&pj, &mut hi) {
                return false;
            }
            for i in 0..n {
                out[(i, j)] = (hi[i] - lo[i]) / (2.0 * h);
            }
        }
        true
    }
}

pub fn extract_angle_series(
    entries: &[(f64, FanoFitResult)],
    hint: &PhysicalModel,
) -> Result<AngleSeries, FitError> {
    if entries.is_empty() {
        return Err(FitError::InvalidInput("no fit results supplied".into()));
    }
    hint.validate()
        .map_err(|e| FitError::InvalidInput(e.to_string()))?;
    let mut rows: Vec<AngleSeriesRow> = entries
        .iter()
        .map(|(angle, fit)| {
            if !angle.is_finite() {
                return Err(FitError::InvalidInput(format!("non-finite angle {angle}")));
            }
            Ok(AngleSeriesRow {
                delta_theta_urad: *angle,
                gamma_total: fit.gamma_total,
                gamma_err: fit.errors.as_ref().map(|e| e.gamma_total),
                delta_ls: fit.center,
                delta_ls_err: fit.errors.as_ref().map(|e| e.center),
                q_re: fit.q_re,
                q_err: fit.errors.as_ref().map(|e| e.q_re),
            })
        })
        .collect::<Result<_, _>>()?;
    rows.sort_by(|a, b| a.delta_theta_urad.partial_cmp(&b.delta_theta_urad).unwrap());

    let mut distinct = 1;
    for w in rows.windows(2) {
        if w[1].delta_theta_urad != w[0].delta_theta_urad {
            distinct += 1;
        }
    }
    let single_angle = distinct < 2;
    let consistency = if single_angle {
        None
    } else {
        fit_consistency(&rows, hint)
    };
    Ok(AngleSeries {
        rows,
        consistency,
        single_angle,
    })
}

fn fit_consistency(rows: &[AngleSeriesRow], hint: &PhysicalModel) -> Option<ConsistencyFit> {
    // Fitted errors weight the residuals when every row carries them;
    // otherwise all rows count equally.
    let all_errs = rows.iter().all(|r| {
        r.gamma_err.is_some_and(|e| e.is_finite() && e > 0.0)
            && r.delta_ls_err.is_some_and(|e| e.is_finite() && e > 0.0)
            && r.q_err.is_some_and(|e| e.is_finite() && e > 0.0)
    });
    let obs: Vec<RowObs> = rows
        .iter()
        .map(|r| {
            let w = |e: Option<f64>| if all_errs { e.unwrap() } else { 1.0 };
            let q_used = r.delta_theta_urad != 0.0 && r.q_re.abs() <= Q_INFORMATIVE_MAX;
            RowObs {
                gamma_total: (r.gamma_total, w(r.gamma_err)),
                delta_ls: (r.delta_ls, w(r.delta_ls_err)),
                q: q_used.then(|| (r.q_re, w(r.q_err))),
            }
        })
        .collect();
    let problem = SeriesProblem {
        angles: rows.iter().map(|r| r.delta_theta_urad).collect(),
        gamma: hint.gamma,
        slope: hint.delta_c_slope,
        obs,
    };
    let n = problem.n_res();
    if n < 3 {
        return None;
    }
    let p0 = [hint.kappa.ln(), hint.coupling_strength.max(1e-12).ln()];
    let out = minimize(
        &p0,
        n,
        |p, r| problem.residuals(p, r),
        |p, j| problem.jacobian(p, j),
        &LmOptions::default(),
    );
    if !out.converged || !out.chi2.is_finite() {
        return None;
    }
    let (kappa, coupling) = (out.params[0].exp(), out.params[1].exp());
    let mut jac = DMatrix::zeros(n, 2);
    let errs = problem
        .jacobian(&out.params, &mut jac)
        .then(|| covariance(&jac))
        .flatten()
        .and_then(|cov| {
            let (v0, v1) = (cov[(0, 0)], cov[(1, 1)]);
            (v0.is_finite() && v0 >= 0.0 && v1.is_finite() && v1 >= 0.0)
                .then(|| (kappa * v0.sqrt(), coupling * v1.sqrt()))
        });
    Some(ConsistencyFit {
        kappa,
        coupling_strength: coupling,
        delta_c_slope: hint.delta_c_slope,
        kappa_err: errs.map(|e| e.0),
        coupling_err: errs.map(|e| e.1),
        chi2: out.chi2,
        dof: n - 2,
    })
}
