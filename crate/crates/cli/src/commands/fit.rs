//! Fit every simulated spectrum: the asymmetric line fit on the stored grid,
//! then the normalized rational fit on the per-angle detuning axis, and
//! finally the cross-angle width/shift/asymmetry table with its consistency
//! fit. A failure on one spectrum is recorded in that spectrum's report and
//! the run continues.

use crate::artifacts::{
    read_json, sha256_hex, write_bytes, write_json, AngleFitReport, Manifest, ManifestEntry,
    RunPaths, SeriesArtifact,
};
use crate::config::{angle_label, RunConfig};
use crate::error::CliError;
use fanox::{
    bootstrap_errors, extract_angle_series, fit_fano, fit_rational, AngleSeries, FanoFitOptions,
    FanoFitResult, GridUnits, Spectrum,
};
use rayon::prelude::*;
use std::fmt::Write as _;

/// Remap a spectrum from the stored energy axis to the per-angle detuning
/// axis implied by its own line fit.
pub fn to_epsilon_axis(spec: &Spectrum, line: &FanoFitResult) -> Spectrum {
    let mut out = spec.clone();
    out.grid = spec
        .grid
        .iter()
        .map(|&e| (e - line.center) / (line.gamma_total / 2.0))
        .collect();
    out.meta.units = GridUnits::Epsilon;
    out
}

fn fit_one(
    config: &RunConfig,
    paths: &RunPaths,
    index: usize,
    angle: f64,
) -> Result<AngleFitReport, CliError> {
    let rel = RunPaths::spectrum_rel(&angle_label(angle));
    let path = paths.root.join(&rel);
    let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    let input_hash = sha256_hex(&bytes);
    let mut report = AngleFitReport {
        angle_urad: angle,
        input: rel,
        input_hash,
        fano: None,
        fano_bootstrap: None,
        rational: None,
        error: None,
    };

    let text =
        String::from_utf8(bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let spec = match Spectrum::from_text(&text) {
        Ok(s) => s,
        Err(e) => {
            report.error = Some(format!("parse: {e}"));
            return Ok(report);
        }
    };

    let opts = FanoFitOptions {
        n_starts: config.fit.n_starts,
        seed: config.fit_seed(index),
    };
    let line = match fit_fano(&spec, &opts) {
        Ok(f) => f,
        Err(e) => {
            report.error = Some(format!("line fit: {e}"));
            return Ok(report);
        }
    };

    if config.fit.bootstrap > 0 {
        match bootstrap_errors(
            &spec,
            &line,
            config.fit.bootstrap,
            opts.seed.wrapping_add(1),
        ) {
            Ok(b) => report.fano_bootstrap = Some(b),
            Err(e) => report.error = Some(format!("bootstrap: {e}")),
        }
    }

    let eps_spec = if spec.meta.units == GridUnits::Energy {
        to_epsilon_axis(&spec, &line)
    } else {
        spec
    };
    match fit_rational(&eps_spec) {
        Ok(r) => report.rational = Some(r),
        Err(e) => report.error = Some(format!("rational fit: {e}")),
    }
    report.fano = Some(line);
    Ok(report)
}

fn series_text(series: &AngleSeries) -> String {
    let mut out =
        String::from("# angle_urad gamma_total gamma_err delta_ls delta_ls_err q_re q_err\n");
    let fmt_opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |x| x.to_string());
    for r in &series.rows {
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {}",
            r.delta_theta_urad,
            r.gamma_total,
            fmt_opt(r.gamma_err),
            r.delta_ls,
            fmt_opt(r.delta_ls_err),
            r.q_re,
            fmt_opt(r.q_err),
        );
    }
    if let Some(c) = &series.consistency {
        let _ = writeln!(
            out,
            "# consistency: kappa = {} +- {}, coupling_strength = {} +- {}, chi2 = {}, dof = {}, delta_c_slope (fixed gauge) = {}",
            c.kappa,
            fmt_opt(c.kappa_err),
            c.coupling_strength,
            fmt_opt(c.coupling_err),
            c.chi2,
            c.dof,
            c.delta_c_slope
        );
    }
    if series.single_angle {
        out.push_str("# single angle: no cross-angle consistency information\n");
    }
    out
}

pub fn cmd_fit(config: &RunConfig) -> Result<(), CliError> {
    let paths = super::prepare_run(config)?;
    let spectra: Manifest = read_json(&paths.spectra_manifest())?;
    let schedule = config.angle_schedule();

    let reports: Vec<Result<AngleFitReport, CliError>> = schedule
        .par_iter()
        .enumerate()
        .map(|(index, &(angle, _))| fit_one(config, &paths, index, angle))
        .collect();

    let mut manifest = Manifest {
        config_hash: config.hash_hex()?,
        seed: config.seed,
        files: Vec::new(),
    };
    let mut fitted: Vec<(f64, FanoFitResult)> = Vec::new();
    let mut n_ok = 0usize;
    for item in reports {
        let report = item?;
        if let Some(line) = &report.fano {
            fitted.push((report.angle_urad, line.clone()));
            n_ok += 1;
        }
        // Spectra must trace back to the manifest they were simulated into.
        if spectra.entry_for_angle(report.angle_urad).is_none() {
            return Err(CliError::Data(format!(
                "angle {} not present in {}",
                report.angle_urad,
                paths.spectra_manifest().display()
            )));
        }
        let rel = RunPaths::fit_rel(&angle_label(report.angle_urad));
        let text = {
            let mut t =
                serde_json::to_string_pretty(&report).map_err(|e| CliError::Data(e.to_string()))?;
            t.push('\n');
            t
        };
        write_bytes(&paths.root.join(&rel), text.as_bytes())?;
        manifest.files.push(ManifestEntry {
            path: rel,
            angle_urad: Some(report.angle_urad),
            seed: None,
            sha256: sha256_hex(text.as_bytes()),
        });
    }
    if n_ok == 0 {
        return Err(CliError::Numerical(
            "every line fit failed; see the per-angle reports".into(),
        ));
    }

    let model = config.model.to_model();
    let mut series = extract_angle_series(&fitted, &model)?;
    if config.grid.units != GridUnits::Energy {
        // Widths and shifts on a pre-normalized axis carry no cross-angle
        // information, so the consistency fit would be meaningless.
        series.consistency = None;
    }
    let angles: Vec<f64> = series.rows.iter().map(|r| r.delta_theta_urad).collect();
    write_json(
        &paths.angle_series_json(),
        &SeriesArtifact {
            series: series.clone(),
            angles_urad: angles,
        },
    )?;
    write_bytes(&paths.angle_series_txt(), series_text(&series).as_bytes())?;

    manifest.sort();
    write_json(&paths.fits_manifest(), &manifest)
}
