//! Counting spectra: synthesis from the forward model, masking, and file I/O.
//!
//! A spectrum holds one rocking-angle offset's counts over an energy grid, either
//! in dimensionless line units (epsilon) or raw energy offsets in linewidth units.
//! The on-disk form is UTF-8 text: `# key=value` header lines followed by four
//! space-separated columns `epsilon counts sigma mask`.

use crate::model::{ModelError, PhysicalModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpectrumError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid synthesis options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("parse error at line {line}, column {column}: {msg}")]
    Parse {
        line: usize,
        column: usize,
        msg: String,
    },
    #[error("inconsistent spectrum: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Units of the spectrum grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridUnits {
    /// Dimensionless offset from the shifted resonance in half-linewidths.
    Epsilon,
    /// Energy offset from the bare transition, in units of the bare linewidth.
    Energy,
}

impl GridUnits {
    fn as_str(self) -> &'static str {
        match self {
            GridUnits::Epsilon => "epsilon",
            GridUnits::Energy => "energy",
        }
    }
}

/// Provenance carried alongside the numeric columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub units: GridUnits,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub model_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub source: Option<String>,
    #[serde(default)]
    pub mask_intervals: Vec<(f64, f64)>,
}

/// One measured or synthetic rocking-angle spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub angle_urad: f64,
    pub grid: Vec<f64>,
    pub counts: Vec<f64>,
    pub sigma: Vec<f64>,
    pub mask: Vec<bool>,
    pub meta: SpectrumMeta,
}

/// Knobs for [`synthesize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisOptions {
    /// Counts-scale factor multiplying the model reflectance.
    pub exposure: f64,
    /// Flat additive count floor (detector background).
    pub baseline: f64,
    pub seed: u64,
    /// Skip Poisson sampling and store the exact expectation values.
    pub noiseless: bool,
}

pub fn validate_grid(grid: &[f64]) -> Result<(), SpectrumError> {
    if grid.is_empty() {
        return Err(SpectrumError::InvalidGrid("grid is empty".into()));
    }
    for (i, &x) in grid.iter().enumerate() {
        if !x.is_finite() {
            return Err(SpectrumError::InvalidGrid(format!(
                "non-finite value {x} at index {i}"
            )));
        }
        if i > 0 && x <= grid[i - 1] {
            return Err(SpectrumError::InvalidGrid(format!(
                "not strictly increasing at index {i} ({} -> {x})",
                grid[i - 1]
            )));
        }
    }
    Ok(())
}

/// Inclusive arithmetic grid `start, start+step, ..` up to `stop` (within one
/// part in 10^9 of a step).
pub fn build_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, SpectrumError> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop <= start
    {
        return Err(SpectrumError::InvalidGrid(format!(
            "bad grid spec start={start} stop={stop} step={step}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if n > 10_000_000 {
        return Err(SpectrumError::InvalidGrid(format!(
            "grid spec produces {n} points"
        )));
    }
    Ok((0..n).map(|i| start + i as f64 * step).collect())
}

/// Draw one spectrum from the forward model. Counts are Poisson samples of
/// `exposure * |R|^2 + baseline` (or the exact expectation when noiseless), and
/// `sigma_i = sqrt(max(counts_i, 1))`. Sampling is sequential in grid order from a
/// stream cipher seeded with `seed`, so output is a pure function of the inputs.
pub fn synthesize(
    model: &PhysicalModel,
    delta_theta_urad: f64,
    grid: &[f64],
    units: GridUnits,
    opts: &SynthesisOptions,
) -> Result<Spectrum, SpectrumError> {
    model.validate()?;
    validate_grid(grid)?;
    if !delta_theta_urad.is_finite() {
        return Err(SpectrumError::InvalidOptions(format!(
            "non-finite angle {delta_theta_urad}"
        )));
    }
    if !opts.exposure.is_finite() || opts.exposure < 0.0 {
        return Err(SpectrumError::InvalidOptions(format!(
            "exposure must be finite and non-negative, got {}",
            opts.exposure
        )));
    }
    if !opts.baseline.is_finite() || opts.baseline < 0.0 {
        return Err(SpectrumError::InvalidOptions(format!(
            "baseline must be finite and non-negative, got {}",
            opts.baseline
        )));
    }
    let ls = model.lineshape(delta_theta_urad);
    let mut rng = (!opts.noiseless).then(|| ChaCha8Rng::seed_from_u64(opts.seed));
    let mut counts = Vec::with_capacity(grid.len());
    for &x in grid {
        let detuning = match units {
            GridUnits::Epsilon => ls.epsilon_to_energy(x),
            GridUnits::Energy => x,
        };
        let r = model.reflection_amplitude(delta_theta_urad, detuning)?;
        let lambda = opts.exposure * r.norm_sqr() + opts.baseline;
        let c = match &mut rng {
            None => lambda,
            Some(rng) if lambda > 0.0 => Poisson::new(lambda)
                .map_err(|e| SpectrumError::InvalidOptions(format!("bad rate {lambda}: {e}")))?
                .sample(rng),
            Some(_) => 0.0,
        };
        counts.push(c);
    }
    let sigma = counts.iter().map(|&c| c.max(1.0).sqrt()).collect();
    Ok(Spectrum {
        angle_urad: delta_theta_urad,
        grid: grid.to_vec(),
        counts,
        sigma,
        mask: vec![false; grid.len()],
        meta: SpectrumMeta {
            units,
            seed: Some(opts.seed),
            model_hash: Some(model.hash_hex()),
            source: None,
            mask_intervals: Vec::new(),
        },
    })
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn unmasked_len(&self) -> usize {
        self.mask.iter().filter(|&&m| !m).count()
    }

    /// Structural consistency: equal column lengths, strictly increasing finite
    /// grid, finite non-negative counts, positive sigma.
    pub fn validate(&self) -> Result<(), SpectrumError> {
        validate_grid(&self.grid)?;
        let n = self.grid.len();
        if self.counts.len() != n || self.sigma.len() != n || self.mask.len() != n {
            return Err(SpectrumError::Inconsistent(format!(
                "column lengths differ: grid {n}, counts {}, sigma {}, mask {}",
                self.counts.len(),
                self.sigma.len(),
                self.mask.len()
            )));
        }
        for i in 0..n {
            if !self.counts[i].is_finite() || self.counts[i] < 0.0 {
                return Err(SpectrumError::Inconsistent(format!(
                    "bad counts {} at index {i}",
                    self.counts[i]
                )));
            }
            if !self.sigma[i].is_finite() || self.sigma[i] <= 0.0 {
                return Err(SpectrumError::Inconsistent(format!(
                    "bad sigma {} at index {i}",
                    self.sigma[i]
                )));
            }
        }
        Ok(())
    }

    /// Mask every grid point lying in any of the closed intervals. Repeated
    /// application with the same intervals is a no-op.
    pub fn apply_mask(&mut self, intervals: &[(f64, f64)]) -> Result<(), SpectrumError> {
        for &(lo, hi) in intervals {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(SpectrumError::InvalidOptions(format!(
                    "bad mask interval [{lo}, {hi}]"
                )));
            }
        }
        for &(lo, hi) in intervals {
            for (i, &x) in self.grid.iter().enumerate() {
                if x >= lo && x <= hi {
                    self.mask[i] = true;
                }
            }
            if !self.meta.mask_intervals.contains(&(lo, hi)) {
                self.meta.mask_intervals.push((lo, hi));
            }
        }
        Ok(())
    }

    /// Serialize to the text format. Round-trips losslessly through
    /// [`Spectrum::from_text`]: floats are written in shortest form that parses
    /// back to the identical bits.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# angle_urad={}", self.angle_urad);
        let _ = writeln!(out, "# units={}", self.meta.units.as_str());
        if let Some(seed) = self.meta.seed {
            let _ = writeln!(out, "# seed={seed}");
        }
        if let Some(hash) = &self.meta.model_hash {
            let _ = writeln!(out, "# model_hash={hash}");
        }
        if let Some(source) = &self.meta.source {
            let _ = writeln!(out, "# source={source}");
        }
        if !self.meta.mask_intervals.is_empty() {
            let spans: Vec<String> = self
                .meta
                .mask_intervals
                .iter()
                .map(|(lo, hi)| format!("{lo}:{hi}"))
                .collect();
            let _ = writeln!(out, "# mask_intervals={}", spans.join(";"));
        }
        for i in 0..self.len() {
            let _ = writeln!(
                out,
                "{} {} {} {}",
                self.grid[i],
                self.counts[i],
                self.sigma[i],
                u8::from(self.mask[i])
            );
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SpectrumError> {
        let mut angle: Option<f64> = None;
        let mut meta = SpectrumMeta {
            units: GridUnits::Epsilon,
            seed: None,
            model_hash: None,
            source: None,
            mask_intervals: Vec::new(),
        };
        let mut saw_units = false;
        let mut grid = Vec::new();
        let mut counts = Vec::new();
        let mut sigma = Vec::new();
        let mut mask = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let body = rest.trim();
                let (key, value) = body.split_once('=').ok_or(SpectrumError::Parse {
                    line: line_no,
                    column: 1,
                    msg: format!("header line without key=value: {body:?}"),
                })?;
                let col = 1 + raw.len() - raw.trim_start_matches('#').trim_start().len();
                match key {
                    "angle_urad" => angle = Some(parse_float(value, line_no, col)?),
                    "units" => {
                        meta.units = match value {
                            "epsilon" => GridUnits::Epsilon,
                            "energy" => GridUnits::Energy,
                            other => {
                                return Err(SpectrumError::Parse {
                                    line: line_no,
                                    column: col,
                                    msg: format!("unknown units {other:?}"),
                                })
                            }
                        };
                        saw_units = true;
                    }
                    "seed" => {
                        meta.seed = Some(value.parse().map_err(|_| SpectrumError::Parse {
                            line: line_no,
                            column: col,
                            msg: format!("bad seed {value:?}"),
                        })?)
                    }
                    "model_hash" => meta.model_hash = Some(value.to_string()),
                    "source" => meta.source = Some(value.to_string()),
                    "mask_intervals" => {
                        for span in value.split(';') {
                            let (lo, hi) = span.split_once(':').ok_or(SpectrumError::Parse {
                                line: line_no,
                                column: col,
                                msg: format!("bad mask interval {span:?}"),
                            })?;
                            meta.mask_intervals.push((
                                parse_float(lo, line_no, col)?,
                                parse_float(hi, line_no, col)?,
                            ));
                        }
                    }
                    other => {
                        return Err(SpectrumError::Parse {
                            line: line_no,
                            column: col,
                            msg: format!("unknown header key {other:?}"),
                        })
                    }
                }
                continue;
            }
            let mut fields = Vec::with_capacity(4);
            let mut start = None;
            for (pos, ch) in line.char_indices().chain([(line.len(), ' ')]) {
                if ch.is_whitespace() {
                    if let Some(s) = start.take() {
                        fields.push((&line[s..pos], s + 1));
                    }
                } else if start.is_none() {
                    start = Some(pos);
                }
            }
            if fields.len() != 4 {
                return Err(SpectrumError::Parse {
                    line: line_no,
                    column: 1,
                    msg: format!("expected 4 columns, found {}", fields.len()),
                });
            }
            let x = parse_finite(fields[0].0, line_no, fields[0].1)?;
            if let Some(&prev) = grid.last() {
                if x <= prev {
                    return Err(SpectrumError::Parse {
                        line: line_no,
                        column: fields[0].1,
                        msg: format!("grid not strictly increasing ({prev} -> {x})"),
                    });
                }
            }
            grid.push(x);
            counts.push(parse_finite(fields[1].0, line_no, fields[1].1)?);
            sigma.push(parse_finite(fields[2].0, line_no, fields[2].1)?);
            mask.push(match fields[3].0 {
                "0" => false,
                "1" => true,
                other => {
                    return Err(SpectrumError::Parse {
                        line: line_no,
                        column: fields[3].1,
                        msg: format!("mask flag must be 0 or 1, found {other:?}"),
                    })
                }
            });
        }
        let angle = angle.ok_or(SpectrumError::Parse {
            line: 1,
            column: 1,
            msg: "missing angle_urad header".into(),
        })?;
        if !saw_units {
            return Err(SpectrumError::Parse {
                line: 1,
                column: 1,
                msg: "missing units header".into(),
            });
        }
        let spectrum = Spectrum {
            angle_urad: angle,
            grid,
            counts,
            sigma,
            mask,
            meta,
        };
        spectrum.validate()?;
        Ok(spectrum)
    }

    pub fn write_file(&self, path: &Path) -> Result<(), SpectrumError> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read_file(path: &Path) -> Result<Self, SpectrumError> {
        let text = std::fs::read_to_string(path)?;
        let mut s = Self::from_text(&text)?;
        if s.meta.source.is_none() {
            s.meta.source = Some(path.display().to_string());
        }
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String, SpectrumError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, SpectrumError> {
        let s: Spectrum = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }
}

fn parse_float(s: &str, line: usize, column: usize) -> Result<f64, SpectrumError> {
    s.trim().parse().map_err(|_| SpectrumError::Parse {
        line,
        column,
        msg: format!("bad float {s:?}"),
    })
}

fn parse_finite(s: &str, line: usize, column: usize) -> Result<f64, SpectrumError> {
    let v = parse_float(s, line, column)?;
    if !v.is_finite() {
        return Err(SpectrumError::Parse {
            line,
            column,
            msg: format!("non-finite value {s:?}"),
        });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn model() -> PhysicalModel {
        PhysicalModel {
            gamma: 0.5,
            omega0_kev: 14.4,
            kappa: 2.0,
            kappa_r: 1.0,
            coupling_strength: 1.0,
            delta_c_slope: 1.0,
            theta_min_urad: 2400.0,
        }
    }

    fn opts(noiseless: bool) -> SynthesisOptions {
        SynthesisOptions {
            exposure: 1e5,
            baseline: 50.0,
            seed: 42,
            noiseless,
        }
    }

    #[test]
    fn grid_builder_matches_reference_spacing() {
        let g = build_grid(-10.0, 10.0, 0.05).unwrap();
        assert_eq!(g.len(), 401);
        assert_eq!(g[0], -10.0);
        assert_relative_eq!(g[400], 10.0, epsilon = 1e-12);
        assert!(build_grid(0.0, -1.0, 0.1).is_err());
        assert!(build_grid(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn noiseless_counts_are_exact_expectations() {
        let m = model();
        let grid = build_grid(-10.0, 10.0, 0.05).unwrap();
        let s = synthesize(&m, 2.0, &grid, GridUnits::Epsilon, &opts(true)).unwrap();
        let ls = m.lineshape(2.0);
        for (i, &x) in grid.iter().enumerate() {
            let expect = 1e5 * ls.reflectance(x).unwrap() + 50.0;
            assert_relative_eq!(s.counts[i], expect, max_relative = 1e-12);
            assert_eq!(s.sigma[i], s.counts[i].max(1.0).sqrt());
        }
    }

    #[test]
    fn sampling_is_a_pure_function_of_the_seed() {
        let m = model();
        let grid = build_grid(-10.0, 10.0, 0.05).unwrap();
        let a = synthesize(&m, 2.0, &grid, GridUnits::Epsilon, &opts(false)).unwrap();
        let b = synthesize(&m, 2.0, &grid, GridUnits::Epsilon, &opts(false)).unwrap();
        assert_eq!(a, b);
        let mut o = opts(false);
        o.seed = 43;
        let c = synthesize(&m, 2.0, &grid, GridUnits::Epsilon, &o).unwrap();
        assert_ne!(a.counts, c.counts);
    }

    #[test]
    fn sample_mean_tracks_expectation() {
        let m = model();
        let grid = build_grid(-10.0, 10.0, 0.05).unwrap();
        let s = synthesize(&m, 2.0, &grid, GridUnits::Epsilon, &opts(false)).unwrap();
        let ls = m.lineshape(2.0);
        let mut expect_sum = 0.0;
        let mut var_sum = 0.0;
        let mut got_sum = 0.0;
        for (i, &x) in grid.iter().enumerate() {
            assert!(s.counts[i] >= 0.0);
            let lambda = 1e5 * ls.reflectance(x).unwrap() + 50.0;
            expect_sum += lambda;
            var_sum += lambda;
            got_sum += s.counts[i];
        }
        let n = grid.len() as f64;
        let diff = (got_sum - expect_sum).abs() / n;
        let se = var_sum.sqrt() / n;
        assert!(diff < 3.0 * se, "mean off by {diff}, se {se}");
    }

    #[test]
    fn zero_exposure_samples_pure_baseline() {
        let m = model();
        let grid = build_grid(-1.0, 1.0, 0.1).unwrap();
        let mut o = opts(false);
        o.exposure = 0.0;
        o.baseline = 30.0;
        let s = synthesize(&m, 2.0, &grid, GridUnits::Epsilon, &o).unwrap();
        let mean = s.counts.iter().sum::<f64>() / s.counts.len() as f64;
        assert!((mean - 30.0).abs() < 3.0 * (30.0f64 / s.len() as f64).sqrt());
        o.noiseless = true;
        let exact = synthesize(&m, 2.0, &grid, GridUnits::Epsilon, &o).unwrap();
        assert!(exact.counts.iter().all(|&c| c == 30.0));
    }

    #[test]
    fn energy_grid_places_the_line_at_the_shifted_center() {
        let m = model();
        let grid = build_grid(-5.0, 5.0, 0.01).unwrap();
        let s = synthesize(&m, 0.0, &grid, GridUnits::Energy, &opts(true)).unwrap();
        // at zero offset the line is an unshifted Lorentzian of width gamma_total
        let peak_idx = (0..s.len())
            .max_by(|&a, &b| s.counts[a].total_cmp(&s.counts[b]))
            .unwrap();
        assert_relative_eq!(s.grid[peak_idx], 0.0, epsilon = 1e-9);
        let ls = m.lineshape(0.0);
        let half = ls.epsilon_to_energy(1.0);
        let at_half = 1e5 * ls.reflectance(1.0).unwrap() + 50.0;
        let idx = s
            .grid
            .iter()
            .position(|&x| (x - half).abs() < 5e-3)
            .unwrap();
        assert_relative_eq!(s.counts[idx], at_half, max_relative = 1e-3);
    }

    #[test]
    fn synthesis_rejects_bad_inputs() {
        let m = model();
        let grid = build_grid(-1.0, 1.0, 0.1).unwrap();
        let mut o = opts(false);
        o.baseline = -1.0;
        assert!(matches!(
            synthesize(&m, 2.0, &grid, GridUnits::Epsilon, &o),
            Err(SpectrumError::InvalidOptions(_))
        ));
        let unsorted = vec![0.0, 1.0, 0.5];
        assert!(matches!(
            synthesize(&m, 2.0, &unsorted, GridUnits::Epsilon, &opts(false)),
            Err(SpectrumError::InvalidGrid(_))
        ));
        assert!(synthesize(&m, 2.0, &[], GridUnits::Epsilon, &opts(false)).is_err());
        assert!(synthesize(&m, f64::NAN, &grid, GridUnits::Epsilon, &opts(false)).is_err());
    }

    #[test]
    fn central_mask_interval_covers_21_points() {
        let m = model();
        let grid = build_grid(-10.0, 10.0, 0.05).unwrap();
        let mut s = synthesize(&m, 2.0, &grid, GridUnits::Epsilon, &opts(true)).unwrap();
        s.apply_mask(&[(-0.5, 0.5)]).unwrap();
        assert_eq!(s.mask.iter().filter(|&&b| b).count(), 21);
        assert_eq!(s.unmasked_len(), 380);
        let once = s.clone();
        s.apply_mask(&[(-0.5, 0.5)]).unwrap();
        assert_eq!(s, once);
        assert!(s.apply_mask(&[(1.0, 0.5)]).is_err());
        assert!(s.apply_mask(&[(f64::NAN, 0.5)]).is_err());
    }

    #[test]
    fn text_round_trip_is_bit_exact() {
        let m = model();
        let grid = build_grid(-10.0, 10.0, 0.05).unwrap();
        let mut s = synthesize(&m, -3.0, &grid, GridUnits::Epsilon, &opts(false)).unwrap();
        s.apply_mask(&[(-0.5, 0.5), (3.0, 4.0)]).unwrap();
        let text = s.to_text();
        let back = Spectrum::from_text(&text).unwrap();
        assert_eq!(s, back);
        assert_eq!(text, back.to_text());
    }

    #[test]
    fn json_round_trip_preserves_schema() {
        let m = model();
        let grid = build_grid(-2.0, 2.0, 0.5).unwrap();
        let s = synthesize(&m, 1.0, &grid, GridUnits::Energy, &opts(false)).unwrap();
        let json = s.to_json().unwrap();
        for key in ["angle_urad", "grid", "counts", "sigma", "mask", "meta"] {
            assert!(json.contains(&format!("\"{key}\"")), "missing {key}");
        }
        let back = Spectrum::from_json(&json).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn parse_errors_name_the_offending_line() {
        let good = "# angle_urad=2\n# units=epsilon\n0 10 3.2 0\n1 11 3.3 0\n";
        assert!(Spectrum::from_text(good).is_ok());

        let nan = "# angle_urad=2\n# units=epsilon\n0 10 3.2 0\n1 NaN 3.3 0\n";
        match Spectrum::from_text(nan) {
            Err(SpectrumError::Parse {
                line: 4, column, ..
            }) => assert_eq!(column, 3),
            other => panic!("expected parse error, got {other:?}"),
        }

        let unsorted = "# angle_urad=2\n# units=epsilon\n1 10 3.2 0\n0 11 3.3 0\n";
        match Spectrum::from_text(unsorted) {
            Err(SpectrumError::Parse { line: 4, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }

        let short = "# angle_urad=2\n# units=epsilon\n0 10 3.2\n";
        match Spectrum::from_text(short) {
            Err(SpectrumError::Parse { line: 3, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }

        let badmask = "# angle_urad=2\n# units=epsilon\n0 10 3.2 2\n";
        match Spectrum::from_text(badmask) {
            Err(SpectrumError::Parse {
                line: 3, column, ..
            }) => assert_eq!(column, 10),
            other => panic!("expected parse error, got {other:?}"),
        }

        let unknown = "# angle_urad=2\n# units=epsilon\n# exposure=5\n0 10 3.2 0\n";
        match Spectrum::from_text(unknown) {
            Err(SpectrumError::Parse { line: 3, .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
