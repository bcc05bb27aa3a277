//! Aggregate everything a run produced into one deterministic markdown
//! summary. Stages that have not run yet are reported as absent rather than
//! failing, but a run with no artifacts at all is an error.

use crate::artifacts::{
    read_json, write_bytes, AngleFitReport, Manifest, RunPaths, SeriesArtifact,
};
use crate::config::{angle_label, RunConfig};
use crate::error::CliError;
use fanox::{PhaseCurve, RhoEgEstimate};
use std::fmt::Write as _;

fn fmt(v: f64) -> String {
    if v == 0.0 || (v.abs() >= 1e-3 && v.abs() < 1e6) {
        format!("{v:.6}")
    } else {
        format!("{v:.6e}")
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), fmt)
}

fn fit_section(md: &mut String, config: &RunConfig, paths: &RunPaths) -> bool {
    let manifest: Manifest = match read_json(&paths.fits_manifest()) {
        Ok(m) => m,
        Err(_) => {
            md.push_str("\n## Line fits\n\nNot run.\n");
            return false;
        }
    };
    md.push_str("\n## Line fits\n\n");
    let _ = writeln!(md, "Manifest config hash: `{}`\n", manifest.config_hash);
    md.push_str("| angle (urad) | q | width | center | chi2/dof | note |\n");
    md.push_str("|---:|---:|---:|---:|---:|:---|\n");
    for &(angle, _) in &config.angle_schedule() {
        let report: Result<AngleFitReport, _> =
            read_json(&paths.root.join(RunPaths::fit_rel(&angle_label(angle))));
        match report {
            Ok(r) => {
                let note = r.error.unwrap_or_default();
                match r.fano {
                    Some(f) => {
                        let _ = writeln!(
                            md,
                            "| {} | {} | {} | {} | {} | {} |",
                            fmt(angle),
                            fmt(f.q_re),
                            fmt(f.gamma_total),
                            fmt(f.center),
                            fmt(f.chi2 / f.dof.max(1) as f64),
                            note
                        );
                    }
                    None => {
                        let _ = writeln!(md, "| {} | - | - | - | - | {} |", fmt(angle), note);
                    }
                }
            }
            Err(_) => {
                let _ = writeln!(md, "| {} | - | - | - | - | missing report |", fmt(angle));
            }
        }
    }
    if let Ok(artifact) = read_json::<SeriesArtifact>(&paths.angle_series_json()) {
        md.push_str("\n### Cross-angle consistency\n\n");
        match &artifact.series.consistency {
            Some(c) => {
                let _ = writeln!(
                    md,
                    "Shared-parameter fit over {} angles: kappa = {} +- {}, \
                     coupling strength = {} +- {} (slope gauge {}), chi2/dof = {}.",
                    artifact.angles_urad.len(),
                    fmt(c.kappa),
                    fmt_opt(c.kappa_err),
                    fmt(c.coupling_strength),
                    fmt_opt(c.coupling_err),
                    fmt(c.delta_c_slope),
                    fmt(c.chi2 / c.dof.max(1) as f64),
                );
            }
            None => {
                md.push_str("No cross-angle consistency fit (single angle or normalized axis).\n");
            }
        }
    }
    true
}

fn phase_section(md: &mut String, paths: &RunPaths) -> bool {
    let curve: PhaseCurve = match read_json(&paths.phase_curve_json()) {
        Ok(c) => c,
        Err(_) => {
            md.push_str("\n## Phase retrieval\n\nNot run.\n");
            return false;
        }
    };
    md.push_str("\n## Phase retrieval\n\n");
    if let Ok(inputs) = read_json::<crate::artifacts::PhaseArtifacts>(&paths.phase_inputs_json()) {
        let _ = writeln!(
            md,
            "Symmetric-point amplitude source: {}. Angles used: {}.",
            inputs.r0_source,
            inputs
                .angles_used
                .iter()
                .map(|a| fmt(*a))
                .collect::<Vec<_>>()
                .join(", ")
        );
        for (angle, why) in &inputs.skipped {
            let _ = writeln!(md, "- skipped {}: {}", fmt(*angle), why);
        }
    }
    let n_valid = curve.valid.iter().filter(|&&v| v).count();
    let _ = writeln!(md, "\nValid points: {} of {}.", n_valid, curve.grid.len());
    // Deviation from the ideal two-level reference where the retrieval is
    // trusted; the reference is exact for synthetic data.
    for window in [3.0, 5.0] {
        let mut worst: f64 = 0.0;
        let mut n = 0;
        for (i, &eps) in curve.grid.iter().enumerate() {
            if curve.valid[i] && eps.abs() <= window {
                worst = worst.max((curve.phi_n[i] - (-1.0f64).atan2(eps)).abs());
                n += 1;
            }
        }
        if n > 0 {
            let _ = writeln!(
                md,
                "Largest deviation from the two-level reference for |eps| <= {}: {} rad \
                 over {} points.",
                fmt(window),
                fmt(worst),
                n
            );
        }
    }
    if let Ok(rho) = read_json::<RhoEgEstimate>(&paths.rho_json()) {
        let mut peak = (0usize, 0.0f64);
        for i in 0..rho.grid.len() {
            if rho.valid[i] && rho.magnitude[i] > peak.1 {
                peak = (i, rho.magnitude[i]);
            }
        }
        let _ = writeln!(
            md,
            "\nCoherence estimate: peak magnitude at eps = {}, phase there {} rad, \
             {} of {} points valid.",
            fmt(rho.grid[peak.0]),
            fmt(rho.phase[peak.0]),
            rho.valid.iter().filter(|&&v| v).count(),
            rho.grid.len()
        );
    }
    md.push_str("\nArtifacts: `phases/phase_curve.{json,txt}`, `phases/rho_eg.{json,txt}`, `phases/r0.txt`, `phases/phase.svg`.\n");
    true
}

pub fn cmd_report(config: &RunConfig) -> Result<(), CliError> {
    let paths = super::prepare_run(config)?;
    let mut md = String::new();
    md.push_str("# Run report\n\n");
    let _ = writeln!(md, "Config hash: `{}`", config.hash_hex()?);
    let _ = writeln!(md, "Seed: {}", config.seed);
    let _ = writeln!(
        md,
        "Angles (urad): {}",
        config
            .angle_schedule()
            .iter()
            .map(|(a, _)| fmt(*a))
            .collect::<Vec<_>>()
            .join(", ")
    );
    let _ = writeln!(
        md,
        "Grid: {} from {} to {} step {}; exposure {}, baseline {}, {}.",
        match config.grid.units {
            fanox::GridUnits::Energy => "energy",
            fanox::GridUnits::Epsilon => "detuning",
        },
        fmt(config.grid.start),
        fmt(config.grid.stop),
        fmt(config.grid.step),
        fmt(config.exposure),
        fmt(config.baseline),
        if config.noiseless {
            "noiseless"
        } else {
            "counting noise"
        },
    );
    let _ = writeln!(
        md,
        "Model: gamma {}, kappa {}, kappa_r {}, coupling {}, slope {} per urad.",
        fmt(config.model.gamma),
        fmt(config.model.kappa),
        fmt(config.model.kappa_r),
        fmt(config.model.coupling_strength),
        fmt(config.model.delta_c_slope),
    );

    let spectra = read_json::<Manifest>(&paths.spectra_manifest());
    match &spectra {
        Ok(m) => {
            let _ = writeln!(
                md,
                "\n## Spectra\n\n{} files under `spectra/`.",
                m.files.len()
            );
        }
        Err(_) => md.push_str("\n## Spectra\n\nNot run.\n"),
    }

    let have_fits = fit_section(&mut md, config, &paths);
    let have_phases = phase_section(&mut md, &paths);
    if spectra.is_err() && !have_fits && !have_phases {
        return Err(CliError::Data(format!(
            "no artifacts found under {}",
            paths.root.display()
        )));
    }
    write_bytes(&paths.report_md(), md.as_bytes())
}
