//! Invert the per-angle cross terms into the resonant-path phase and assemble
//! the complex coherence estimate: symmetric-point amplitude, cross terms on a
//! common detuning grid, weighted cosine inversion, magnitude from the
//! reflection-minimum spectrum.

use crate::artifacts::{
    read_json, read_to_string, write_bytes, write_json, AngleFitReport, PhaseArtifacts, RunPaths,
};
use crate::config::{angle_label, R0Source, RunConfig};
use crate::error::CliError;
use crate::svg::phase_svg;
use fanox::{
    build_grid, estimate_r0, fit_phase, reconstruct_rho_eg, xi_curve, RationalFitResult, Spectrum,
    XiCurve,
};
use std::fmt::Write as _;

fn load_report(paths: &RunPaths, angle: f64) -> Result<AngleFitReport, CliError> {
    read_json(&paths.root.join(RunPaths::fit_rel(&angle_label(angle))))
}

fn require_rational<'a>(
    report: &'a AngleFitReport,
    why: &str,
) -> Result<&'a RationalFitResult, CliError> {
    report.rational.as_ref().ok_or_else(|| {
        CliError::Data(format!(
            "angle {} has no usable rational fit ({}) but is required for {why}",
            report.angle_urad,
            report.error.as_deref().unwrap_or("missing"),
        ))
    })
}

pub fn cmd_phases(config: &RunConfig) -> Result<(), CliError> {
    let paths = super::prepare_run(config)?;
    let model = config.model.to_model();
    let grid = build_grid(
        config.phases.xi_start,
        config.phases.xi_stop,
        config.phases.xi_step,
    )
    .map_err(|e| CliError::Config(e.to_string()))?;

    let schedule = config.angle_schedule();
    let mut reports: Vec<AngleFitReport> = Vec::new();
    for &(angle, _) in &schedule {
        reports.push(load_report(&paths, angle)?);
    }

    // Symmetric-point amplitude on the common grid.
    let find = |target: f64| {
        reports
            .iter()
            .find(|r| (r.angle_urad - target).abs() < 1e-9)
    };
    let (r0_amplitude, r0_label): (Vec<f64>, &str) = match config.phases.r0_source {
        R0Source::ThetaMin => {
            let zero = find(0.0).ok_or_else(|| {
                CliError::Data("the reflection-minimum angle (0 urad) is not in this run".into())
            })?;
            let fit = require_rational(zero, "the theta-min symmetric-point amplitude")?;
            (
                grid.iter().map(|&x| fit.eval_amplitude(x)).collect(),
                "theta-min",
            )
        }
        R0Source::Pm1Mean => {
            let mut pair: Vec<(f64, &RationalFitResult)> = Vec::new();
            for target in [1.0, -1.0] {
                let report = find(target).ok_or_else(|| {
                    CliError::Data(format!(
                        "the {target:+} urad flank angle is not in this run; estimating \
                         the reflection-minimum amplitude needs both +1 and -1"
                    ))
                })?;
                pair.push((
                    target,
                    require_rational(report, "the flank-mean amplitude")?,
                ));
            }
            (estimate_r0(&pair, &grid)?, "pm1-mean")
        }
    };

    // Cross terms for every off-minimum angle with a usable fit.
    let mut curves: Vec<XiCurve> = Vec::new();
    let mut used: Vec<f64> = Vec::new();
    let mut skipped: Vec<(f64, String)> = Vec::new();
    for report in &reports {
        let angle = report.angle_urad;
        if angle.abs() < 1e-9 {
            skipped.push((angle, "reflection minimum: no continuum path".into()));
            continue;
        }
        let fit = match &report.rational {
            Some(f) => f,
            None => {
                skipped.push((
                    angle,
                    report.error.clone().unwrap_or_else(|| "no fit".into()),
                ));
                continue;
            }
        };
        match xi_curve(angle, model.lineshape(angle).phi, fit, &r0_amplitude, &grid) {
            Ok(curve) => {
                curves.push(curve);
                used.push(angle);
            }
            Err(e) => skipped.push((angle, e.to_string())),
        }
    }

    let curve = fit_phase(&curves, config.phases.n_boot, config.phase_seed())?;

    // Coherence magnitude from the reflection-minimum spectrum on its own
    // detuning axis.
    let zero_report = find(0.0).ok_or_else(|| {
        CliError::Data("the reflection-minimum angle (0 urad) is not in this run".into())
    })?;
    let zero_line = zero_report.fano.as_ref().ok_or_else(|| {
        CliError::Data(format!(
            "no line fit at the reflection minimum ({})",
            zero_report.error.as_deref().unwrap_or("missing")
        ))
    })?;
    let spec_path = paths.root.join(&zero_report.input);
    let spec = Spectrum::from_text(&read_to_string(&spec_path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", spec_path.display())))?;
    let eps_spec = super::fit::to_epsilon_axis(&spec, zero_line);
    let mut rho = reconstruct_rho_eg(&eps_spec, &curve, config.baseline)?;
    rho.source_spectrum = Some(zero_report.input.clone());
    rho.source_phase = Some("phases/phase_curve.json".into());

    write_json(&paths.phase_curve_json(), &curve)?;
    write_bytes(&paths.phase_curve_txt(), curve.to_text().as_bytes())?;
    write_json(&paths.rho_json(), &rho)?;
    write_bytes(&paths.rho_txt(), rho.to_text().as_bytes())?;
    let mut r0_text = String::from("# epsilon r0_amplitude\n");
    for (x, r) in grid.iter().zip(&r0_amplitude) {
        let _ = writeln!(r0_text, "{x} {r}");
    }
    write_json(
        &paths.phase_inputs_json(),
        &PhaseArtifacts {
            r0_source: r0_label.to_string(),
            grid,
            r0_amplitude,
            angles_used: used,
            skipped,
        },
    )?;
    write_bytes(&paths.root.join("phases/r0.txt"), r0_text.as_bytes())?;
    write_bytes(&paths.phase_svg(), phase_svg(&curve).as_bytes())
}
