//! Declarative run configuration. One TOML file drives every stage; unknown
//! keys are rejected so typos fail loudly, and a fully resolved copy is
//! written beside the outputs so a run can be reproduced from its artifacts.

use crate::error::CliError;
use fanox::{GridUnits, PhysicalModel};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; per-angle and per-stage seeds are derived from it.
    #[serde(default = "d_seed")]
    pub seed: u64,
    /// Output directory, created on demand. Recorded as configured so two
    /// runs of the same config produce byte-identical artifacts.
    #[serde(default = "d_out_dir")]
    pub out_dir: PathBuf,
    /// Skip counting noise and store expectation values.
    #[serde(default)]
    pub noiseless: bool,
    /// Expected counts at unit reflectance.
    #[serde(default = "d_exposure")]
    pub exposure: f64,
    /// Flat background counts per bin.
    #[serde(default = "d_baseline")]
    pub baseline: f64,
    /// Rocking-angle offsets from the reflection minimum, in microradians.
    #[serde(default = "d_angles")]
    pub angles_urad: Vec<f64>,
    /// Grid intervals to mask out of every spectrum, in grid units.
    #[serde(default)]
    pub mask_intervals: Vec<(f64, f64)>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub phases: PhasesConfig,
}

fn d_seed() -> u64 {
    1
}
fn d_out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn d_exposure() -> f64 {
    1e5
}
fn d_baseline() -> f64 {
    50.0
}
fn d_angles() -> Vec<f64> {
    (-5..=5).map(f64::from).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default = "d_gamma")]
    pub gamma: f64,
    #[serde(default = "d_omega0")]
    pub omega0_kev: f64,
    #[serde(default = "d_kappa")]
    pub kappa: f64,
    #[serde(default = "d_kappa_r")]
    pub kappa_r: f64,
    #[serde(default = "d_coupling")]
    pub coupling_strength: f64,
    #[serde(default = "d_slope")]
    pub delta_c_slope: f64,
    #[serde(default = "d_theta_min")]
    pub theta_min_urad: f64,
}

fn d_gamma() -> f64 {
    1.0
}
fn d_omega0() -> f64 {
    14.4
}
fn d_kappa() -> f64 {
    2.0
}
fn d_kappa_r() -> f64 {
    1.0
}
fn d_coupling() -> f64 {
    1e5
}
fn d_slope() -> f64 {
    0.8
}
fn d_theta_min() -> f64 {
    2400.0
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            gamma: d_gamma(),
            omega0_kev: d_omega0(),
            kappa: d_kappa(),
            kappa_r: d_kappa_r(),
            coupling_strength: d_coupling(),
            delta_c_slope: d_slope(),
            theta_min_urad: d_theta_min(),
        }
    }
}

impl ModelConfig {
    pub fn to_model(&self) -> PhysicalModel {
        PhysicalModel {
            gamma: self.gamma,
            omega0_kev: self.omega0_kev,
            kappa: self.kappa,
            kappa_r: self.kappa_r,
            coupling_strength: self.coupling_strength,
            delta_c_slope: self.delta_c_slope,
            theta_min_urad: self.theta_min_urad,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "d_units")]
    pub units: GridUnits,
    #[serde(default = "d_grid_start")]
    pub start: f64,
    #[serde(default = "d_grid_stop")]
    pub stop: f64,
    #[serde(default = "d_grid_step")]
    pub step: f64,
}

fn d_units() -> GridUnits {
    GridUnits::Energy
}
fn d_grid_start() -> f64 {
    -5e5
}
fn d_grid_stop() -> f64 {
    5e5
}
fn d_grid_step() -> f64 {
    2000.0
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            units: d_units(),
            start: d_grid_start(),
            stop: d_grid_stop(),
            step: d_grid_step(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Randomized starts per line fit.
    #[serde(default = "d_n_starts")]
    pub n_starts: usize,
    /// Bootstrap replicas per line fit; 0 keeps covariance errors only.
    #[serde(default)]
    pub bootstrap: usize,
}

fn d_n_starts() -> usize {
    32
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            n_starts: d_n_starts(),
            bootstrap: 0,
        }
    }
}

/// Where the symmetric-point amplitude comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum R0Source {
    /// The reflection-minimum spectrum's own normalized fit.
    ThetaMin,
    /// Mean of the two curves one microradian either side of the minimum.
    Pm1Mean,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasesConfig {
    /// Common detuning grid for the cross-term inversion.
    #[serde(default = "d_xi_start")]
    pub xi_start: f64,
    #[serde(default = "d_xi_stop")]
    pub xi_stop: f64,
    #[serde(default = "d_xi_step")]
    pub xi_step: f64,
    #[serde(default = "d_r0_source")]
    pub r0_source: R0Source,
    /// Bootstrap replicas for the per-point phase error band.
    #[serde(default = "d_n_boot")]
    pub n_boot: usize,
}

fn d_xi_start() -> f64 {
    -6.0
}
fn d_xi_stop() -> f64 {
    6.0
}
fn d_xi_step() -> f64 {
    0.05
}
fn d_r0_source() -> R0Source {
    R0Source::ThetaMin
}
fn d_n_boot() -> usize {
    200
}

impl Default for PhasesConfig {
    fn default() -> Self {
        PhasesConfig {
            xi_start: d_xi_start(),
            xi_stop: d_xi_stop(),
            xi_step: d_xi_step(),
            r0_source: d_r0_source(),
            n_boot: d_n_boot(),
        }
    }
}

/// Filesystem-safe label for an angle: sign letter plus three decimals,
/// `-5.0` -> `m5_000`. Three decimals also define when two configured angles
/// are "the same" for output purposes, which [`RunConfig::validate`] rejects.
pub fn angle_label(angle_urad: f64) -> String {
    let sign = if angle_urad.is_sign_negative() {
        'm'
    } else {
        'p'
    };
    format!("{sign}{:.3}", angle_urad.abs()).replace('.', "_")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let err = |msg: String| Err(CliError::Config(msg));
        self.model.to_model().validate()?;
        if !(self.exposure.is_finite() && self.exposure >= 0.0) {
            return err(format!(
                "exposure must be finite and >= 0, got {}",
                self.exposure
            ));
        }
        if !(self.baseline.is_finite() && self.baseline >= 0.0) {
            return err(format!(
                "baseline must be finite and >= 0, got {}",
                self.baseline
            ));
        }
        if self.angles_urad.is_empty() {
            return err("angles_urad must not be empty".into());
        }
        let mut labels: Vec<String> = Vec::new();
        for &a in &self.angles_urad {
            if !a.is_finite() {
                return err(format!("angles_urad contains a non-finite value: {a}"));
            }
            let label = angle_label(a);
            if labels.contains(&label) {
                return err(format!(
                    "angles_urad values collide at the 1e-3 urad output resolution: {label}"
                ));
            }
            labels.push(label);
        }
        for (lo, hi) in &self.mask_intervals {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return err(format!("bad mask interval [{lo}, {hi}]"));
            }
        }
        for (name, v) in [
            ("grid.start", self.grid.start),
            ("grid.stop", self.grid.stop),
            ("grid.step", self.grid.step),
            ("phases.xi_start", self.phases.xi_start),
            ("phases.xi_stop", self.phases.xi_stop),
            ("phases.xi_step", self.phases.xi_step),
        ] {
            if !v.is_finite() {
                return err(format!("{name} must be finite, got {v}"));
            }
        }
        if self.grid.step <= 0.0 || self.grid.stop <= self.grid.start {
            return err("grid must satisfy start < stop and step > 0".into());
        }
        if self.phases.xi_step <= 0.0 || self.phases.xi_stop <= self.phases.xi_start {
            return err("phases grid must satisfy xi_start < xi_stop and xi_step > 0".into());
        }
        if self.fit.n_starts == 0 {
            return err("fit.n_starts must be >= 1".into());
        }
        Ok(())
    }

    /// Angles in ascending order with their derived synthesis seeds. The seed
    /// schedule depends only on the sorted position, so the same config always
    /// yields the same data no matter how the list was written.
    pub fn angle_schedule(&self) -> Vec<(f64, u64)> {
        let mut angles = self.angles_urad.clone();
        angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        angles
            .into_iter()
            .enumerate()
            .map(|(i, a)| {
                (
                    a,
                    self.seed
                        .wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
                )
            })
            .collect()
    }

    /// Seed for the line fits at one angle, decorrelated from synthesis.
    pub fn fit_seed(&self, index: usize) -> u64 {
        self.seed
            .wrapping_add(0x517C_C1B7_2722_0A95)
            .wrapping_add((index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    /// Seed for the phase bootstrap.
    pub fn phase_seed(&self) -> u64 {
        self.seed.wrapping_add(0xD1B5_4A32_D192_ED03)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string_pretty(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Hex digest of the resolved configuration, recorded in every manifest.
    pub fn hash_hex(&self) -> Result<String, CliError> {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.to_toml()?.as_bytes());
        let digest = h.finalize();
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_resolves_to_defaults() {
        let c: RunConfig = toml::from_str("").unwrap();
        c.validate().unwrap();
        assert_eq!(c.seed, 1);
        assert_eq!(c.angles_urad.len(), 11);
        assert_eq!(c.model.kappa_r, 1.0);
        assert_eq!(c.grid.units, GridUnits::Energy);
        assert_eq!(c.phases.r0_source, R0Source::ThetaMin);
        assert!(!c.noiseless);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let e = toml::from_str::<RunConfig>("exposur = 5.0").unwrap_err();
        assert!(e.to_string().contains("exposur"), "{e}");
        let e = toml::from_str::<RunConfig>("[model]\nkapa = 2.0").unwrap_err();
        assert!(e.to_string().contains("kapa"), "{e}");
        let e = toml::from_str::<RunConfig>("[phases]\nr0_source = \"midpoint\"").unwrap_err();
        assert!(e.to_string().contains("midpoint"), "{e}");
    }

    #[test]
    fn resolved_round_trip_is_stable() {
        let c: RunConfig = toml::from_str("seed = 9\n[model]\nkappa = 3.5").unwrap();
        let text = c.to_toml().unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back.seed, 9);
        assert_eq!(back.model.kappa, 3.5);
        assert_eq!(back.to_toml().unwrap(), text);
        assert_eq!(c.hash_hex().unwrap(), back.hash_hex().unwrap());
    }

    #[test]
    fn angle_labels_are_path_safe_and_signed() {
        assert_eq!(angle_label(-5.0), "m5_000");
        assert_eq!(angle_label(2.5), "p2_500");
        assert_eq!(angle_label(0.0), "p0_000");
    }

    #[test]
    fn label_collisions_are_a_config_error() {
        let c: RunConfig = toml::from_str("angles_urad = [1.0001, 1.0002]").unwrap();
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn schedule_is_sorted_and_independent_of_input_order() {
        let a: RunConfig = toml::from_str("angles_urad = [3.0, -1.0, 0.0]").unwrap();
        let b: RunConfig = toml::from_str("angles_urad = [0.0, 3.0, -1.0]").unwrap();
        assert_eq!(a.angle_schedule(), b.angle_schedule());
        let sched = a.angle_schedule();
        assert_eq!(sched[0].0, -1.0);
        assert_eq!(sched[2].0, 3.0);
        assert_ne!(sched[0].1, sched[1].1);
    }
}
