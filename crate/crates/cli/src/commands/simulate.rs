//! Synthesize one counting spectrum per configured angle and an inventory
//! manifest with content digests.

use crate::artifacts::{sha256_hex, write_bytes, write_json, Manifest, ManifestEntry, RunPaths};
use crate::config::{angle_label, RunConfig};
use crate::error::CliError;
use fanox::{build_grid, synthesize, SynthesisOptions};
use rayon::prelude::*;

pub fn cmd_simulate(config: &RunConfig) -> Result<(), CliError> {
    let paths = super::prepare_run(config)?;
    let model = config.model.to_model();
    let grid = build_grid(config.grid.start, config.grid.stop, config.grid.step)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let schedule = config.angle_schedule();

    // Each angle is an independent draw from its own seed; render in parallel,
    // write sequentially in sorted-angle order.
    let rendered: Vec<Result<(f64, u64, String, String), CliError>> = schedule
        .par_iter()
        .map(|&(angle, seed)| {
            let mut spec = synthesize(
                &model,
                angle,
                &grid,
                config.grid.units,
                &SynthesisOptions {
                    exposure: config.exposure,
                    baseline: config.baseline,
                    seed,
                    noiseless: config.noiseless,
                },
            )
            .map_err(|e| CliError::Config(format!("angle {angle}: {e}")))?;
            spec.apply_mask(&config.mask_intervals)
                .map_err(|e| CliError::Config(format!("angle {angle}: {e}")))?;
            Ok((angle, seed, angle_label(angle), spec.to_text()))
        })
        .collect();

    let mut manifest = Manifest {
        config_hash: config.hash_hex()?,
        seed: config.seed,
        files: Vec::new(),
    };
    for item in rendered {
        let (angle, seed, label, text) = item?;
        let rel = RunPaths::spectrum_rel(&label);
        write_bytes(&paths.root.join(&rel), text.as_bytes())?;
        manifest.files.push(ManifestEntry {
            path: rel,
            angle_urad: Some(angle),
            seed: Some(seed),
            sha256: sha256_hex(text.as_bytes()),
        });
    }
    manifest.sort();
    write_json(&paths.spectra_manifest(), &manifest)
}
