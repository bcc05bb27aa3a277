//! Reflectance model for a two-level nuclear ensemble in a thin-film cavity.
//!
//! The cavity acts as a two-path interferometer: a broadband continuum path set by
//! the cavity environment and a narrow path through the collectively shifted and
//! broadened nuclear resonance. All energies are in units of the bare nuclear
//! linewidth; angles are rocking-angle offsets in microradians.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("non-finite input {name} = {value}")]
    NonFiniteInput { name: &'static str, value: f64 },
}

fn ensure_finite(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonFiniteInput { name, value })
    }
}

/// Cavity and ensemble parameters in internal units (energies in units of the bare
/// linewidth, angles in microradians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalModel {
    /// Bare single-nucleus linewidth. Unity by convention; kept explicit so outputs
    /// can be rescaled to physical units at the I/O boundary.
    pub gamma: f64,
    /// Transition energy reference in keV. Only offsets from it enter computations.
    pub omega0_kev: f64,
    /// Cavity linewidth.
    pub kappa: f64,
    /// Coupling rate of the driven (input/output) channel.
    pub kappa_r: f64,
    /// Lumped collective coupling of the ensemble to the cavity mode.
    pub coupling_strength: f64,
    /// Cavity detuning per microradian of rocking-angle offset (linearized).
    pub delta_c_slope: f64,
    /// Reference grazing angle in microradians; bookkeeping only.
    pub theta_min_urad: f64,
}

impl PhysicalModel {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("gamma", self.gamma),
            ("kappa", self.kappa),
            ("kappa_r", self.kappa_r),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(ModelError::InvalidModel(format!(
                    "{name} must be finite and positive, got {v}"
                )));
            }
        }
        if !self.coupling_strength.is_finite() || self.coupling_strength < 0.0 {
            return Err(ModelError::InvalidModel(format!(
                "coupling_strength must be finite and non-negative, got {}",
                self.coupling_strength
            )));
        }
        for (name, v) in [
            ("omega0_kev", self.omega0_kev),
            ("delta_c_slope", self.delta_c_slope),
            ("theta_min_urad", self.theta_min_urad),
        ] {
            ensure_finite(name, v)
                .map_err(|_| ModelError::InvalidModel(format!("{name} must be finite, got {v}")))?;
        }
        Ok(())
    }

    /// True when the driven channel carries half the total cavity loss, i.e. the
    /// continuum path alone would be perfectly absorbed on resonance.
    pub fn is_critically_coupled(&self) -> bool {
        (self.kappa - 2.0 * self.kappa_r).abs() <= 1e-12 * self.kappa
    }

    /// Angle-dependent line parameters. Total in the angle offset, including the
    /// on-resonance cavity point `delta_theta_urad = 0`.
    pub fn lineshape(&self, delta_theta_urad: f64) -> LineshapeParams {
        let delta_c = self.delta_c_slope * delta_theta_urad;
        let denom = self.kappa * self.kappa + delta_c * delta_c;
        let sigma0 = delta_c * delta_c / denom;
        let delta_ls = -self.coupling_strength * delta_c / denom;
        let gamma_sr = 2.0 * self.coupling_strength * self.kappa / denom;
        let gamma_total = self.gamma + gamma_sr;
        // q - i is a positive multiple of kappa/delta_c - i, so the continuum phase
        // can be evaluated without the coupling strength. The delta_c = 0 limit is
        // fixed to phi = 0 (vanishing continuum amplitude).
        let (q, phi) = if delta_c == 0.0 {
            (Complex64::new(f64::INFINITY, self.gamma / gamma_total), 0.0)
        } else {
            let q = Complex64::new(
                (gamma_sr / gamma_total) * (self.kappa / delta_c),
                self.gamma / gamma_total,
            );
            (q, Complex64::new(self.kappa / delta_c, -1.0).arg())
        };
        LineshapeParams {
            delta_theta_urad,
            delta_c,
            sigma0,
            delta_ls,
            gamma_sr,
            gamma_total,
            q,
            phi,
        }
    }

    /// Complex reflection amplitude from the input/output relations: the continuum
    /// response of the bare cavity plus the nuclear scattering path. Valid for any
    /// coupling ratio, not only critical coupling. `detuning` is the probe energy
    /// offset from the bare transition, in linewidth units.
    pub fn reflection_amplitude(
        &self,
        delta_theta_urad: f64,
        detuning: f64,
    ) -> Result<Complex64, ModelError> {
        ensure_finite("delta_theta_urad", delta_theta_urad)?;
        ensure_finite("detuning", detuning)?;
        let ls = self.lineshape(delta_theta_urad);
        let cav = Complex64::new(self.kappa, ls.delta_c);
        let r_c = Complex64::new(-1.0, 0.0) + 2.0 * self.kappa_r / cav;
        let r_n = Complex64::new(0.0, -2.0 * self.kappa_r) / (cav * cav) * self.coupling_strength
            / Complex64::new(detuning - ls.delta_ls, 0.5 * ls.gamma_total);
        Ok(r_c + r_n)
    }

    /// Short hex digest of the parameter set, for provenance records.
    pub fn hash_hex(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        for (name, v) in [
            ("gamma", self.gamma),
            ("omega0_kev", self.omega0_kev),
            ("kappa", self.kappa),
            ("kappa_r", self.kappa_r),
            ("coupling_strength", self.coupling_strength),
            ("delta_c_slope", self.delta_c_slope),
            ("theta_min_urad", self.theta_min_urad),
        ] {
            h.update(name.as_bytes());
            h.update(v.to_bits().to_le_bytes());
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Line parameters at a fixed rocking-angle offset.
///
/// `q` follows the convention real(q) = (gamma_sr/gamma_total) * kappa/delta_c,
/// imag(q) = gamma/gamma_total. At delta_c = 0 the real part is stored as +inf and
/// the profile degenerates to a pure Lorentzian; evaluation never divides by
/// delta_c.
#[derive(Debug, Clone, PartialEq)]
pub struct LineshapeParams {
    pub delta_theta_urad: f64,
    pub delta_c: f64,
    /// Off-resonant (continuum) reflectance level, in [0, 1).
    pub sigma0: f64,
    /// Collective level shift of the resonance.
    pub delta_ls: f64,
    /// Collective broadening added to the bare linewidth.
    pub gamma_sr: f64,
    /// Full linewidth gamma + gamma_sr.
    pub gamma_total: f64,
    pub q: Complex64,
    /// Continuum path phase, principal value in (-pi, pi].
    pub phi: f64,
}

impl LineshapeParams {
    /// Reflected intensity as interference of the two paths:
    /// |sqrt(sigma0) e^{-i phi} + (gamma_sr/gamma_total) / (epsilon + i)|^2.
    pub fn reflectance(&self, epsilon: f64) -> Result<f64, ModelError> {
        ensure_finite("epsilon", epsilon)?;
        let continuum = Complex64::from_polar(self.sigma0.sqrt(), -self.phi);
        let nuclear = (self.gamma_sr / self.gamma_total) / Complex64::new(epsilon, 1.0);
        Ok((continuum + nuclear).norm_sqr())
    }

    /// Same intensity written as a Fano profile sigma0 |epsilon + q|^2 / (1 + epsilon^2),
    /// with the delta_c = 0 limit evaluated as a Lorentzian.
    pub fn reflectance_fano(&self, epsilon: f64) -> Result<f64, ModelError> {
        ensure_finite("epsilon", epsilon)?;
        if self.q.re.is_infinite() {
            let a = self.gamma_sr / self.gamma_total;
            Ok(a * a / (1.0 + epsilon * epsilon))
        } else {
            let num = (epsilon + self.q.re).powi(2) + self.q.im * self.q.im;
            Ok(self.sigma0 * num / (1.0 + epsilon * epsilon))
        }
    }

    /// Split the reflected amplitude into the two interferometer arms.
    pub fn channels(&self, epsilon: f64) -> Result<ChannelDecomposition, ModelError> {
        ensure_finite("epsilon", epsilon)?;
        Ok(ChannelDecomposition {
            r_c: self.sigma0.sqrt(),
            r_n: (self.gamma_sr / self.gamma_total) / (1.0 + epsilon * epsilon).sqrt(),
            phi: self.phi,
            // arg(1/(epsilon + i)) = atan2(-1, epsilon), in (-pi, 0)
            phi_n: (-1.0f64).atan2(epsilon),
        })
    }

    /// The real asymmetry parameter that reproduces this profile exactly once
    /// amplitude and baseline are free: matching
    /// A(e+qe)^2 + B(1+e^2) = sigma0 ((e+q_re)^2 + q_im^2)
    /// coefficient by coefficient gives
    /// qe = ((|q|^2-1) + sqrt((|q|^2-1)^2 + 4 q_re^2)) / (2 q_re),
    /// the root of the resulting quadratic with A >= 0. This is what a real-q
    /// line fit of intensity data recovers. Infinite in the symmetric
    /// delta_c = 0 limit; NaN when the profile is flat (gamma_sr = 0).
    pub fn effective_real_q(&self) -> f64 {
        if self.q.re.is_infinite() {
            return f64::INFINITY;
        }
        let x = self.q.norm_sqr() - 1.0;
        (x + (x * x + 4.0 * self.q.re * self.q.re).sqrt()) / (2.0 * self.q.re)
    }

    /// Affine map from the dimensionless offset to the energy offset from the bare
    /// transition: energy = delta_ls + epsilon * gamma_total / 2.
    pub fn epsilon_to_energy(&self, epsilon: f64) -> f64 {
        self.delta_ls + 0.5 * self.gamma_total * epsilon
    }

    /// Inverse of [`Self::epsilon_to_energy`].
    pub fn energy_to_epsilon(&self, energy: f64) -> f64 {
        (energy - self.delta_ls) / (0.5 * self.gamma_total)
    }
}

/// Amplitudes and phases of the continuum and nuclear paths at one `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelDecomposition {
    pub r_c: f64,
    pub r_n: f64,
    pub phi: f64,
    pub phi_n: f64,
}

impl ChannelDecomposition {
    /// |r_c e^{-i phi} + r_n e^{i phi_n}|^2, expanded so the interference term is
    /// explicit.
    pub fn intensity(&self) -> f64 {
        self.r_c * self.r_c
            + self.r_n * self.r_n
            + 2.0 * self.r_c * self.r_n * (self.phi + self.phi_n).cos()
    }
}
