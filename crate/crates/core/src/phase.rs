//! Phase retrieval for the resonant path: build the normalized interference
//! cross term ξ(Δθ, ε) from intensity curves, invert its cosine dependence on
//! the known continuum phase per angle, and assemble the complex coherence
//! estimate up to a global scale.
//!
//! The cross term uses three measurable pieces at each dimensionless detuning:
//! the intensity at the working angle, the symmetric-point amplitude (the
//! resonant path alone), and the off-resonant tail (the continuum alone):
//!   ξ = (I − R0² − T²) / (2·R0·T) = cos(φ + φ_N).
//! With curves taken straight from the forward model this is an algebraic
//! identity; with fitted curves it is exact up to fit error.

use crate::fit::RationalFitResult;
use crate::spectrum::{GridUnits, Spectrum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PhaseError {
    #[error("missing the {0:+} urad curve required for the symmetric-point estimate")]
    MissingAngle(f64),
    #[error("need at least {need} angle curves, have {have}")]
    TooFewAngles { have: usize, need: usize },
    #[error("degenerate tail amplitude {tail} at {delta_theta} urad (angle too close to the reflection minimum)")]
    DegenerateTail { delta_theta: f64, tail: f64 },
    #[error("curves disagree on the evaluation grid: {0}")]
    GridMismatch(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// |ξ| beyond this is flagged and excluded; values in (1, 1.05] still enter
/// the cosine fit, which tolerates slight overshoot under noise.
const XI_CLAMP: f64 = 1.05;
/// Points where the symmetric-point amplitude falls below this fraction of its
/// maximum are flagged: the division amplifies even small absolute errors.
const R0_CONDITIONING: f64 = 1e-2;
/// Dense-scan resolution for the cosine inversion.
const N_SCAN: usize = 721;
/// Scan objective ranges (with mean-normalized weights) below this are flat:
/// the point carries no phase information.
const FLAT_OBJECTIVE: f64 = 1e-3;

/// The normalized cross term for one angle on a common detuning grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct XiCurve {
    pub delta_theta_urad: f64,
    /// Continuum phase φ(Δθ) for this angle.
    pub phi: f64,
    pub grid: Vec<f64>,
    pub xi: Vec<f64>,
    /// Inverse-variance weight per point; 0 means excluded.
    pub weight: Vec<f64>,
    pub valid: Vec<bool>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseCurve {
    pub grid: Vec<f64>,
    /// Retrieved resonant-path phase, principal value; 0 where invalid.
    pub phi_n: Vec<f64>,
    /// Bootstrap band edges (lower, upper); equal to phi_n where degenerate.
    pub err_lo: Vec<f64>,
    pub err_hi: Vec<f64>,
    pub valid: Vec<bool>,
    pub n_angles: Vec<usize>,
}

impl PhaseCurve {
    /// Plot-ready whitespace columns: detuning, phase, band edges, validity.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# epsilon phi_n err_lo err_hi valid\n");
        for i in 0..self.grid.len() {
            out.push_str(&format!(
                "{} {} {} {} {}\n",
                self.grid[i],
                self.phi_n[i],
                self.err_lo[i],
                self.err_hi[i],
                u8::from(self.valid[i])
            ));
        }
        out
    }
}

/// Complex coherence of the two-level system on a detuning grid, known up to
/// one global positive scale (magnitude normalized to peak 1) and the global
/// phase convention carried by the reconstruction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhoEgEstimate {
    pub grid: Vec<f64>,
    pub magnitude: Vec<f64>,
    pub phase: Vec<f64>,
    pub valid: Vec<bool>,
    /// Provenance of the magnitude (spectrum source or model hash).
    pub source_spectrum: Option<String>,
    /// Provenance of the phase curve (set by the caller when staged on disk).
    pub source_phase: Option<String>,
}

impl RhoEgEstimate {
    pub fn value(&self, i: usize) -> num_complex::Complex64 {
        num_complex::Complex64::from_polar(self.magnitude[i], self.phase[i])
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# epsilon magnitude phase re im valid\n");
        for i in 0..self.grid.len() {
            let v = self.value(i);
            out.push_str(&format!(
                "{} {} {} {} {} {}\n",
                self.grid[i],
                self.magnitude[i],
                self.phase[i],
                v.re,
                v.im,
                u8::from(self.valid[i])
            ));
        }
        out
    }
}

/// Mean of the two flanking normalized amplitudes, the stand-in for the
/// symmetric-point curve |R(0, ε)|: odd-in-angle terms cancel to first order.
/// `fits` holds (angle in μrad, normalized fit) pairs; both ±1 μrad entries
/// must be present.
pub fn estimate_r0(
    fits: &[(f64, &RationalFitResult)],
    grid: &[f64],
) -> Result<Vec<f64>, PhaseError> {
    let find = |target: f64| -> Result<&RationalFitResult, PhaseError> {
        fits.iter()
            .find(|(a, _)| (a - target).abs() < 1e-9)
            .map(|(_, f)| *f)
            .ok_or(PhaseError::MissingAngle(target))
    };
    let plus = find(1.0)?;
    let minus = find(-1.0)?;
    Ok(grid
        .iter()
        .map(|&x| 0.5 * (plus.eval_amplitude(x) + minus.eval_amplitude(x)))
        .collect())
}

/// Cross term from explicit values (the no-fitting path used to verify the
/// identity ξ = cos(φ+φ_N) end to end). `variance` holds per-point variances
/// of the intensity; omit it for unit weights.
pub fn xi_from_values(
    delta_theta_urad: f64,
    phi: f64,
    grid: &[f64],
    intensity: &[f64],
    r0_amplitude: &[f64],
    tail_amplitude: f64,
    variance: Option<&[f64]>,
) -> Result<XiCurve, PhaseError> {
    let n = grid.len();
    if intensity.len() != n || r0_amplitude.len() != n || variance.is_some_and(|v| v.len() != n) {
        return Err(PhaseError::GridMismatch(format!(
            "lengths grid={n} intensity={} r0={} differ",
            intensity.len(),
            r0_amplitude.len()
        )));
    }
    if !(tail_amplitude.is_finite() && tail_amplitude > 0.0) {
        return Err(PhaseError::DegenerateTail {
            delta_theta: delta_theta_urad,
            tail: tail_amplitude,
        });
    }
    let r0_max = r0_amplitude.iter().cloned().fold(0.0f64, f64::max);
    if r0_max <= 0.0 {
        return Err(PhaseError::InvalidInput(
            "symmetric-point amplitude vanishes everywhere".into(),
        ));
    }
    let threshold = R0_CONDITIONING * r0_max;
    let mut xi = Vec::with_capacity(n);
    let mut weight = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for i in 0..n {
        let r0 = r0_amplitude[i];
        if r0.is_nan() || r0 < threshold {
            xi.push(0.0);
            weight.push(0.0);
            valid.push(false);
            continue;
        }
        let denom = 2.0 * r0 * tail_amplitude;
        let raw = (intensity[i] - r0 * r0 - tail_amplitude * tail_amplitude) / denom;
        if !raw.is_finite() {
            xi.push(0.0);
            weight.push(0.0);
            valid.push(false);
            continue;
        }
        let clamped = raw.clamp(-XI_CLAMP, XI_CLAMP);
        let ok = raw.abs() <= XI_CLAMP;
        let w = match variance {
            Some(v) => {
                let var_xi = v[i] / (denom * denom);
                if var_xi.is_finite() && var_xi > 0.0 {
                    1.0 / var_xi
                } else {
                    0.0
                }
            }
            None => 1.0,
        };
        xi.push(clamped);
        weight.push(if ok { w } else { 0.0 });
        valid.push(ok && w > 0.0);
    }
    Ok(XiCurve {
        delta_theta_urad,
        phi,
        grid: grid.to_vec(),
        xi,
        weight,
        valid,
    })
}

/// Cross term for one fitted angle: intensity, tail, and value variances all
/// come from the normalized rational fit; R0 is supplied on the same grid.
pub fn xi_curve(
    delta_theta_urad: f64,
    phi: f64,
    fit: &RationalFitResult,
    r0_amplitude: &[f64],
    grid: &[f64],
) -> Result<XiCurve, PhaseError> {
    let tail = fit.tail_amplitude().ok_or(PhaseError::DegenerateTail {
        delta_theta: delta_theta_urad,
        tail: f64::NAN,
    })?;
    let intensity: Vec<f64> = grid.iter().map(|&x| fit.eval_normalized(x)).collect();
    let variance: Option<Vec<f64>> = grid
        .iter()
        .map(|&x| fit.normalized_value_variance(x))
        .collect();
    xi_from_values(
        delta_theta_urad,
        phi,
        grid,
        &intensity,
        r0_amplitude,
        tail,
        variance.as_deref(),
    )
}

/// Map an angle difference into the principal branch (−π, π].
fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(std::f64::consts::TAU);
    if y > std::f64::consts::PI {
        y - std::f64::consts::TAU
    } else {
        y
    }
}

struct ScanTable {
    phis: Vec<f64>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl ScanTable {
    fn new() -> Self {
        let step = std::f64::consts::TAU / N_SCAN as f64;
        let phis: Vec<f64> = (1..=N_SCAN)
            .map(|j| -std::f64::consts::PI + j as f64 * step)
            .collect();
        ScanTable {
            cos: phis.iter().map(|p| p.cos()).collect(),
            sin: phis.iter().map(|p| p.sin()).collect(),
            phis,
        }
    }
}

/// One ε point's data across angles: ξ values, mean-normalized weights, and
/// the per-angle continuum phase split into cos/sin.
struct PointData {
    xi: Vec<f64>,
    w: Vec<f64>,
    cos_a: Vec<f64>,
    sin_a: Vec<f64>,
}

impl PointData {
    fn objective_at(&self, cos_p: f64, sin_p: f64) -> f64 {
        let mut s = 0.0;
        for k in 0..self.xi.len() {
            // cos(φ_a + φ) expanded so the scan table is reusable
            let c = self.cos_a[k] * cos_p - self.sin_a[k] * sin_p;
            let d = self.xi[k] - c;
            s += self.w[k] * d * d;
        }
        s
    }

    fn objective(&self, phi: f64) -> f64 {
        self.objective_at(phi.cos(), phi.sin())
    }

    /// Dense scan plus golden-section refinement; returns (phase, flat?).
    fn solve(&self, table: &ScanTable) -> (f64, bool) {
        let mut best = 0;
        let mut best_v = f64::INFINITY;
        let mut worst_v = f64::NEG_INFINITY;
        for j in 0..N_SCAN {
            let v = self.objective_at(table.cos[j], table.sin[j]);
            if v < best_v {
                best_v = v;
                best = j;
            }
            if v > worst_v {
                worst_v = v;
            }
        }
        let step = std::f64::consts::TAU / N_SCAN as f64;
        let center = table.phis[best];
        let refined = golden_min(|p| self.objective(p), center - step, center + step);
        (wrap_phase(refined), worst_v - best_v < FLAT_OBJECTIVE)
    }
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..64 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Invert ξ(Δθ, ε) = cos(φ(Δθ) + φ_N(ε)) for φ_N at every grid point, by
/// weighted dense scan over the principal branch plus local refinement.
/// Error bands come from a residual bootstrap over angles (n_boot replicas);
/// points with fewer than 3 contributing angles, or with a flat objective,
/// are flagged invalid rather than failing the whole curve.
pub fn fit_phase(curves: &[XiCurve], n_boot: usize, seed: u64) -> Result<PhaseCurve, PhaseError> {
    if curves.len() < 3 {
        return Err(PhaseError::TooFewAngles {
            have: curves.len(),
            need: 3,
        });
    }
    let grid = &curves[0].grid;
    for c in curves {
        if c.grid.len() != grid.len() || c.grid.iter().zip(grid.iter()).any(|(a, b)| a != b) {
            return Err(PhaseError::GridMismatch(format!(
                "curve at {} urad is on a different grid",
                c.delta_theta_urad
            )));
        }
        let n = c.grid.len();
        if c.xi.len() != n || c.weight.len() != n || c.valid.len() != n {
            return Err(PhaseError::InvalidInput(format!(
                "curve at {} urad has inconsistent lengths",
                c.delta_theta_urad
            )));
        }
        if !c.phi.is_finite() {
            return Err(PhaseError::InvalidInput(format!(
                "non-finite continuum phase at {} urad",
                c.delta_theta_urad
            )));
        }
    }

    let table = ScanTable::new();
    let n = grid.len();
    let mut phi_n = vec![0.0; n];
    let mut err_lo = vec![0.0; n];
    let mut err_hi = vec![0.0; n];
    let mut valid = vec![false; n];
    let mut n_angles = vec![0usize; n];

    for i in 0..n {
        let mut xi = Vec::new();
        let mut w = Vec::new();
        let mut cos_a = Vec::new();
        let mut sin_a = Vec::new();
        for c in curves {
            if c.valid[i] && c.weight[i] > 0.0 && c.xi[i].is_finite() {
                xi.push(c.xi[i]);
                w.push(c.weight[i]);
                cos_a.push(c.phi.cos());
                sin_a.push(c.phi.sin());
            }
        }
        let m = xi.len();
        n_angles[i] = m;
        if m < 3 {
            continue;
        }
        // Mean-normalize weights so the flatness threshold is scale-free.
        let mean_w = w.iter().sum::<f64>() / m as f64;
        for wk in w.iter_mut() {
            *wk /= mean_w;
        }
        let point = PointData {
            xi,
            w,
            cos_a,
            sin_a,
        };
        let (phase, flat) = point.solve(&table);
        phi_n[i] = phase;
        if flat {
            continue;
        }
        valid[i] = true;

        if n_boot == 0 {
            err_lo[i] = phase;
            err_hi[i] = phase;
            continue;
        }
        // Residual bootstrap over angles, independent per grid point so the
        // per-point fits stay order-free.
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        );
        let fitted: Vec<f64> = (0..m)
            .map(|k| point.cos_a[k] * phase.cos() - point.sin_a[k] * phase.sin())
            .collect();
        let resid: Vec<f64> = (0..m).map(|k| point.xi[k] - fitted[k]).collect();
        let mut deltas = Vec::with_capacity(n_boot);
        for _ in 0..n_boot {
            let mut rep = PointData {
                xi: Vec::with_capacity(m),
                w: point.w.clone(),
                cos_a: point.cos_a.clone(),
                sin_a: point.sin_a.clone(),
            };
            for &f in &fitted {
                let j = rng.gen_range(0..m);
                rep.xi.push(f + resid[j]);
            }
            let (p_rep, _) = rep.solve(&table);
            deltas.push(wrap_phase(p_rep - phase));
        }
        deltas.sort_by(|a, b| a.partial_cmp(b).unwrap());
        err_lo[i] = phase + quantile(&deltas, 0.16);
        err_hi[i] = phase + quantile(&deltas, 0.84);
    }

    Ok(PhaseCurve {
        grid: grid.clone(),
        phi_n,
        err_lo,
        err_hi,
        valid,
        n_angles,
    })
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[i]
    }
}

/// Phase at x by linear interpolation of the unit phasor between the two
/// nearest valid curve points (robust at branch boundaries). None outside the
/// grid or where a needed endpoint is invalid.
fn interp_phase(curve: &PhaseCurve, x: f64) -> Option<f64> {
    let g = &curve.grid;
    let n = g.len();
    if n == 0 || x < g[0] || x > g[n - 1] {
        return None;
    }
    let k = g.partition_point(|&v| v < x);
    if k < n && g[k] == x {
        return curve.valid[k].then_some(curve.phi_n[k]);
    }
    let (i0, i1) = (k - 1, k);
    if !(curve.valid[i0] && curve.valid[i1]) {
        return None;
    }
    let t = (x - g[i0]) / (g[i1] - g[i0]);
    let c = (1.0 - t) * curve.phi_n[i0].cos() + t * curve.phi_n[i1].cos();
    let s = (1.0 - t) * curve.phi_n[i0].sin() + t * curve.phi_n[i1].sin();
    if c == 0.0 && s == 0.0 {
        return None;
    }
    Some(s.atan2(c))
}

/// Combine the symmetric-point spectrum's magnitude with a retrieved phase
/// curve into the complex coherence, normalized to unit peak magnitude.
/// The spectrum must already be on the dimensionless-detuning grid; `baseline`
/// is subtracted before the square root. Points whose counts undershoot the
/// baseline by more than 3σ are clipped to zero and flagged.
pub fn reconstruct_rho_eg(
    spectrum: &Spectrum,
    phase: &PhaseCurve,
    baseline: f64,
) -> Result<RhoEgEstimate, PhaseError> {
    if spectrum.meta.units != GridUnits::Epsilon {
        return Err(PhaseError::InvalidInput(
            "spectrum must be on the dimensionless-detuning grid".into(),
        ));
    }
    if !baseline.is_finite() || baseline < 0.0 {
        return Err(PhaseError::InvalidInput(format!(
            "baseline must be finite and non-negative, got {baseline}"
        )));
    }
    let n = spectrum.grid.len();
    let mut magnitude = vec![0.0; n];
    let mut phases = vec![0.0; n];
    let mut valid = vec![false; n];
    for i in 0..n {
        let net = spectrum.counts[i] - baseline;
        let hard_clip = net < -3.0 * spectrum.sigma[i];
        magnitude[i] = net.max(0.0).sqrt();
        let ph = interp_phase(phase, spectrum.grid[i]);
        if let Some(p) = ph {
            phases[i] = p;
        }
        valid[i] = !spectrum.mask[i] && !hard_clip && ph.is_some();
    }
    let peak = magnitude
        .iter()
        .zip(valid.iter())
        .filter(|(_, &v)| v)
        .map(|(&m, _)| m)
        .fold(0.0f64, f64::max);
    if peak <= 0.0 {
        return Err(PhaseError::InvalidInput(
            "no valid points with positive magnitude".into(),
        ));
    }
    for m in magnitude.iter_mut() {
        *m /= peak;
    }
    Ok(RhoEgEstimate {
        grid: spectrum.grid.clone(),
        magnitude,
        phase: phases,
        valid,
        source_spectrum: spectrum
            .meta
            .source
            .clone()
            .or_else(|| spectrum.meta.model_hash.clone()),
        source_phase: None,
    })
}
