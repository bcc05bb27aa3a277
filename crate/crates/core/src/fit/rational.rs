//! Quadratic-over-quadratic rational fit,
//! R(x) = (a0 + a1 x + a2 x²)/(1 + b1 x + b2 x²),
//! plus the affine normalization the phase pipeline applies before forming
//! amplitude ratios. Intended for O(1) to O(100) abscissas (the dimensionless
//! detuning); the linearized initialization is not conditioned for 1e5-scale
//! grids.

use super::lm::{covariance, minimize, LmOptions};
use super::{FitError, Points};
use crate::spectrum::Spectrum;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RationalCoeffs {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    /// Fixed to 1 (gauge); kept so the record is self-describing.
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
}

impl RationalCoeffs {
    pub fn eval(&self, x: f64) -> f64 {
        self.num(x) / self.den(x)
    }

    fn num(&self, x: f64) -> f64 {
        self.a0 + x * (self.a1 + x * self.a2)
    }

    fn den(&self, x: f64) -> f64 {
        self.b0 + x * (self.b1 + x * self.b2)
    }

    /// Value approached as |x| → ∞, when it exists.
    pub fn asymptote(&self) -> Option<f64> {
        if self.b2 != 0.0 {
            Some(self.a2 / self.b2)
        } else if self.a2 != 0.0 {
            None
        } else if self.b1 != 0.0 {
            Some(self.a1 / self.b1)
        } else if self.a1 != 0.0 {
            None
        } else {
            Some(self.a0 / self.b0)
        }
    }

    fn den_roots(&self) -> Vec<f64> {
        real_quad_roots(self.b2, self.b1, self.b0)
    }

    /// Stationary points of the curve. The derivative numerator
    /// N'D − ND' is exactly quadratic for this family.
    fn critical_points(&self) -> Vec<f64> {
        let c2 = self.a2 * self.b1 - self.a1 * self.b2;
        let c1 = 2.0 * (self.a2 * self.b0 - self.a0 * self.b2);
        let c0 = self.a1 * self.b0 - self.a0 * self.b1;
        real_quad_roots(c2, c1, c0)
    }
}

fn real_quad_roots(c2: f64, c1: f64, c0: f64) -> Vec<f64> {
    if c2 == 0.0 {
        if c1 == 0.0 {
            return Vec::new();
        }
        return vec![-c0 / c1];
    }
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    let mut roots = Vec::new();
    roots.push(q / c2);
    if q != 0.0 {
        roots.push(c0 / q);
    } else {
        roots.push(0.0);
    }
    roots.retain(|r| r.is_finite());
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup();
    roots
}

/// Affine map applied to the fitted curve: normalized = (raw − offset)/scale.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Normalization {
    pub offset: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RationalFitResult {
    pub coeffs: RationalCoeffs,
    pub normalization: Normalization,
    pub chi2: f64,
    pub dof: usize,
    /// Unmasked fit range; the no-pole guarantee and the normalization
    /// extremes refer to this interval.
    pub x_lo: f64,
    pub x_hi: f64,
    /// Row-major 5x5 covariance of (a0, a1, a2, b1, b2), when available.
    pub cov: Option<Vec<f64>>,
}

impl RationalFitResult {
    pub fn eval_raw(&self, x: f64) -> f64 {
        self.coeffs.eval(x)
    }

    /// Curve mapped so its extremes over the fit range (and the asymptote,
    /// which participates as the off-resonant tail) lie in [0, 1].
    pub fn eval_normalized(&self, x: f64) -> f64 {
        (self.coeffs.eval(x) - self.normalization.offset) / self.normalization.scale
    }

    /// Square root of the normalized intensity, clamped at zero.
    pub fn eval_amplitude(&self, x: f64) -> f64 {
        self.eval_normalized(x).max(0.0).sqrt()
    }

    /// Normalized |x| → ∞ intensity.
    pub fn tail_intensity(&self) -> Option<f64> {
        self.coeffs
            .asymptote()
            .map(|a| (a - self.normalization.offset) / self.normalization.scale)
    }

    pub fn tail_amplitude(&self) -> Option<f64> {
        self.tail_intensity().map(|t| t.max(0.0).sqrt())
    }

    /// Delta-method variance of the raw curve value at x.
    pub fn value_variance(&self, x: f64) -> Option<f64> {
        let cov = self.cov.as_ref()?;
        let d = self.coeffs.den(x);
        let n = self.coeffs.num(x);
        let g = [
            1.0 / d,
            x / d,
            x * x / d,
            -x * n / (d * d),
            -x * x * n / (d * d),
        ];
        let mut var = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                var += g[i] * cov[i * 5 + j] * g[j];
            }
        }
        var.is_finite().then_some(var.max(0.0))
    }

    /// Variance of the normalized curve value (normalization treated as fixed).
    pub fn normalized_value_variance(&self, x: f64) -> Option<f64> {
        self.value_variance(x)
            .map(|v| v / (self.normalization.scale * self.normalization.scale))
    }
}

const NPAR: usize = 5;
const MIN_POINTS: usize = 8;
/// Dense comb used only by the pole-penalty refit.
const N_PEN: usize = 257;
const PEN_MARGIN: f64 = 0.05;

fn coeffs_from(p: &[f64]) -> RationalCoeffs {
    RationalCoeffs {
        a0: p[0],
        a1: p[1],
        a2: p[2],
        b0: 1.0,
        b1: p[3],
        b2: p[4],
    }
}

fn feasible(pts: &Points, p: &[f64]) -> bool {
    if !p.iter().all(|v| v.is_finite()) {
        return false;
    }
    let c = coeffs_from(p);
    pts.x.iter().all(|&x| c.den(x) > 0.0)
}

fn fill_residuals(pts: &Points, p: &[f64], out: &mut [f64]) -> bool {
    if !feasible(pts, p) {
        return false;
    }
    let c = coeffs_from(p);
    for (i, r) in out.iter_mut().enumerate() {
        *r = (pts.y[i] - c.eval(pts.x[i])) / pts.sigma[i];
    }
    true
}

fn fill_jacobian(pts: &Points, p: &[f64], out: &mut DMatrix<f64>) -> bool {
    if !feasible(pts, p) {
        return false;
    }
    let c = coeffs_from(p);
    for i in 0..pts.len() {
        let x = pts.x[i];
        let d = c.den(x);
        let n = c.num(x);
        let w = -1.0 / pts.sigma[i];
        out[(i, 0)] = w / d;
        out[(i, 1)] = w * x / d;
        out[(i, 2)] = w * x * x / d;
        out[(i, 3)] = -w * x * n / (d * d);
        out[(i, 4)] = -w * x * x * n / (d * d);
    }
    true
}

/// Linearized initialization: least squares of
/// w·[y·(1 + b1 x + b2 x²) − (a0 + a1 x + a2 x²)], linear in all five
/// coefficients. A second pass reweights by the first-pass denominator.
fn linear_init(pts: &Points) -> Option<Vec<f64>> {
    let n = pts.len();
    let solve = |extra: Option<&RationalCoeffs>| -> Option<Vec<f64>> {
        let mut a = DMatrix::zeros(n, NPAR);
        let mut b = DVector::zeros(n);
        for i in 0..n {
            let x = pts.x[i];
            let mut w = 1.0 / pts.sigma[i];
            if let Some(c) = extra {
                let d = c.den(x).abs().max(1e-6);
                w /= d;
            }
            a[(i, 0)] = w;
            a[(i, 1)] = w * x;
            a[(i, 2)] = w * x * x;
            a[(i, 3)] = -w * x * pts.y[i];
            a[(i, 4)] = -w * x * x * pts.y[i];
            b[i] = w * pts.y[i];
        }
        let ata = a.transpose() * &a;
        let atb = a.transpose() * b;
        ata.clone()
            .cholesky()
            .map(|ch| ch.solve(&atb))
            .or_else(|| ata.lu().solve(&atb))
            .map(|v| v.iter().cloned().collect())
    };
    let first = solve(None)?;
    let c = coeffs_from(&first);
    solve(Some(&c)).or(Some(first))
}

pub fn fit_rational(spectrum: &Spectrum) -> Result<RationalFitResult, FitError> {
    let pts = Points::from_spectrum(spectrum, MIN_POINTS)?;
    let n = pts.len();
    let (x_lo, x_hi) = (pts.x[0], pts.x[n - 1]);

    let mut p0 = linear_init(&pts).unwrap_or_else(|| {
        let mean = pts.y.iter().sum::<f64>() / n as f64;
        vec![mean, 0.0, 0.0, 0.0, 0.0]
    });
    if !feasible(&pts, &p0) {
        let mean = pts.y.iter().sum::<f64>() / n as f64;
        p0 = vec![mean, 0.0, 0.0, 0.0, 0.0];
    }

    let opts = LmOptions::default();
    let out = minimize(
        &p0,
        n,
        |p, r| fill_residuals(&pts, p, r),
        |p, j| fill_jacobian(&pts, p, j),
        &opts,
    );
    if !out.converged {
        return Err(FitError::NoConvergence { tried: 1 });
    }
    let mut p = out.params;

    let in_range = |r: &f64| *r >= x_lo && *r <= x_hi;
    if coeffs_from(&p).den_roots().iter().any(in_range) {
        p = penalty_refit(&pts, &p, x_lo, x_hi, &opts);
        if let Some(root) = coeffs_from(&p).den_roots().into_iter().find(in_range) {
            return Err(FitError::PoleInRange(root));
        }
    }

    let coeffs = coeffs_from(&p);
    let mut r = vec![0.0; n];
    if !fill_residuals(&pts, &p, &mut r) {
        return Err(FitError::NoConvergence { tried: 1 });
    }
    let chi2 = r.iter().map(|v| v * v).sum();
    let mut jac = DMatrix::zeros(n, NPAR);
    let cov = if fill_jacobian(&pts, &p, &mut jac) {
        covariance(&jac).map(|c| {
            let mut flat = Vec::with_capacity(NPAR * NPAR);
            for i in 0..NPAR {
                for j in 0..NPAR {
                    flat.push(c[(i, j)]);
                }
            }
            flat
        })
    } else {
        None
    };

    let normalization = normalize(&coeffs, x_lo, x_hi)?;
    Ok(RationalFitResult {
        coeffs,
        normalization,
        chi2,
        dof: n - NPAR,
        x_lo,
        x_hi,
        cov,
    })
}

/// Re-run the minimization with hinge penalties that push the denominator
/// above a positive margin across the fit range.
fn penalty_refit(
    pts: &Points,
    p_start: &[f64],
    x_lo: f64,
    x_hi: f64,
    opts: &LmOptions,
) -> Vec<f64> {
    let n = pts.len();
    let step = (x_hi - x_lo) / (N_PEN - 1) as f64;
    let comb: Vec<f64> = (0..N_PEN).map(|k| x_lo + k as f64 * step).collect();
    let pen_w = 1e3;
    let res = |p: &[f64], out: &mut [f64]| -> bool {
        if !p.iter().all(|v| v.is_finite()) {
            return false;
        }
        let c = coeffs_from(p);
        for (i, r) in out.iter_mut().enumerate() {
            *r = (pts.y[i] - c.eval(pts.x[i])) / pts.sigma[i];
            if !r.is_finite() {
                return false;
            }
        }
        for (k, &x) in comb.iter().enumerate() {
            out[n + k] = pen_w * (PEN_MARGIN - c.den(x)).max(0.0);
        }
        true
    };
    let jac = |p: &[f64], out: &mut DMatrix<f64>| -> bool {
        if !p.iter().all(|v| v.is_finite()) {
            return false;
        }
        let c = coeffs_from(p);
        for i in 0..n {
            let x = pts.x[i];
            let d = c.den(x);
            if d == 0.0 {
                return false;
            }
            let nm = c.num(x);
            let w = -1.0 / pts.sigma[i];
            out[(i, 0)] = w / d;
            out[(i, 1)] = w * x / d;
            out[(i, 2)] = w * x * x / d;
            out[(i, 3)] = -w * x * nm / (d * d);
            out[(i, 4)] = -w * x * x * nm / (d * d);
        }
        for (k, &x) in comb.iter().enumerate() {
            let active = c.den(x) < PEN_MARGIN;
            for j in 0..3 {
                out[(n + k, j)] = 0.0;
            }
            out[(n + k, 3)] = if active { -pen_w * x } else { 0.0 };
            out[(n + k, 4)] = if active { -pen_w * x * x } else { 0.0 };
        }
        true
    };
    let out = minimize(p_start, n + N_PEN, res, jac, opts);
    out.params
}

/// Extremes of the curve over the fit range together with the asymptote;
/// offset/scale map them onto [0, 1]. Critical points are exact (quadratic).
fn normalize(coeffs: &RationalCoeffs, x_lo: f64, x_hi: f64) -> Result<Normalization, FitError> {
    let mut candidates = vec![coeffs.eval(x_lo), coeffs.eval(x_hi)];
    for c in coeffs.critical_points() {
        if c > x_lo && c < x_hi {
            candidates.push(coeffs.eval(c));
        }
    }
    if let Some(t) = coeffs.asymptote() {
        candidates.push(t);
    }
    let mut inf = f64::INFINITY;
    let mut sup = f64::NEG_INFINITY;
    for v in candidates {
        if !v.is_finite() {
            return Err(FitError::DegenerateNormalization(format!(
                "non-finite curve extreme {v}"
            )));
        }
        inf = inf.min(v);
        sup = sup.max(v);
    }
    let scale = sup - inf;
    if scale <= 0.0 {
        return Err(FitError::DegenerateNormalization(format!(
            "flat curve: sup - inf = {scale}"
        )));
    }
    Ok(Normalization { offset: inf, scale })
}
