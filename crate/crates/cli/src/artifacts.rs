//! On-disk artifact schemas shared between stages, plus small IO helpers that
//! keep every error message anchored to a path.

use crate::error::CliError;
use fanox::{
    AngleSeries, BootstrapErrors, FanoFitResult, PhaseCurve, RationalFitResult, RhoEgEstimate,
};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Inventory of one stage's outputs: relative paths with content digests,
/// sorted by path so the file is reproducible.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub angle_urad: Option<f64>,
    pub seed: Option<u64>,
    pub sha256: String,
}

impl Manifest {
    pub fn sort(&mut self) {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
    }

    pub fn entry_for_angle(&self, angle: f64) -> Option<&ManifestEntry> {
        self.files
            .iter()
            .find(|e| e.angle_urad.is_some_and(|a| (a - angle).abs() < 1e-9))
    }
}

/// Per-spectrum fit report: the line fit and the normalized rational fit on
/// the per-angle detuning axis, or the error that prevented them.
#[derive(Debug, Serialize, Deserialize)]
pub struct AngleFitReport {
    pub angle_urad: f64,
    /// Path of the spectrum this report was fitted from, relative to the run
    /// directory.
    pub input: String,
    pub input_hash: String,
    pub fano: Option<FanoFitResult>,
    pub fano_bootstrap: Option<BootstrapErrors>,
    pub rational: Option<RationalFitResult>,
    pub error: Option<String>,
}

/// Outputs of the phase stage bundled for the report.
#[derive(Debug, Serialize, Deserialize)]
pub struct PhaseArtifacts {
    pub r0_source: String,
    pub grid: Vec<f64>,
    pub r0_amplitude: Vec<f64>,
    /// Angles whose cross term entered the inversion.
    pub angles_used: Vec<f64>,
    /// Angles skipped, with the reason.
    pub skipped: Vec<(f64, String)>,
}

pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: &Path) -> RunPaths {
        RunPaths {
            root: root.to_path_buf(),
        }
    }

    pub fn resolved_config(&self) -> PathBuf {
        self.root.join("config.resolved.toml")
    }

    pub fn spectrum_rel(label: &str) -> String {
        format!("spectra/angle_{label}.txt")
    }

    pub fn spectra_manifest(&self) -> PathBuf {
        self.root.join("spectra/manifest.json")
    }

    pub fn fit_rel(label: &str) -> String {
        format!("fits/angle_{label}.json")
    }

    pub fn fits_manifest(&self) -> PathBuf {
        self.root.join("fits/manifest.json")
    }

    pub fn angle_series_json(&self) -> PathBuf {
        self.root.join("fits/angle_series.json")
    }

    pub fn angle_series_txt(&self) -> PathBuf {
        self.root.join("fits/angle_series.txt")
    }

    pub fn phase_curve_json(&self) -> PathBuf {
        self.root.join("phases/phase_curve.json")
    }

    pub fn phase_curve_txt(&self) -> PathBuf {
        self.root.join("phases/phase_curve.txt")
    }

    pub fn rho_json(&self) -> PathBuf {
        self.root.join("phases/rho_eg.json")
    }

    pub fn rho_txt(&self) -> PathBuf {
        self.root.join("phases/rho_eg.txt")
    }

    pub fn phase_inputs_json(&self) -> PathBuf {
        self.root.join("phases/inputs.json")
    }

    pub fn phase_svg(&self) -> PathBuf {
        self.root.join("phases/phase.svg")
    }

    pub fn report_md(&self) -> PathBuf {
        self.root.join("report.md")
    }
}

/// Everything the report stage reads back.
#[derive(Debug, Serialize, Deserialize)]
pub struct PhaseStageOutput {
    pub curve: PhaseCurve,
    pub rho: RhoEgEstimate,
    pub inputs: PhaseArtifacts,
}

/// Angle series as written by the fit stage.
#[derive(Debug, Serialize, Deserialize)]
pub struct SeriesArtifact {
    pub series: AngleSeries,
    /// Angles that contributed, ascending.
    pub angles_urad: Vec<f64>,
}
