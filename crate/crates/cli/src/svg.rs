//! Minimal hand-rolled SVG plot of the retrieved phase curve: bootstrap band,
//! point estimate, and the ideal resonant-path reference arg(1/(eps + i)).
//! Deterministic output: fixed layout, fixed float formatting, no timestamps.

use fanox::PhaseCurve;
use std::fmt::Write;

const W: f64 = 880.0;
const H: f64 = 560.0;
const ML: f64 = 72.0;
const MR: f64 = 24.0;
const MT: f64 = 24.0;
const MB: f64 = 56.0;

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        ML + (v - self.x_lo) / (self.x_hi - self.x_lo) * (W - ML - MR)
    }

    fn y(&self, v: f64) -> f64 {
        // SVG y grows downward.
        MT + (self.y_hi - v) / (self.y_hi - self.y_lo) * (H - MT - MB)
    }
}

fn poly_points(frame: &Frame, pts: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (i, (x, y)) in pts.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.2},{:.2}", frame.x(*x), frame.y(*y));
    }
    s
}

/// Maximal runs of consecutive valid indices.
fn valid_runs(valid: &[bool]) -> Vec<std::ops::Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in valid.iter().enumerate() {
        match (v, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..valid.len());
    }
    runs
}

pub fn phase_svg(curve: &PhaseCurve) -> String {
    let grid = &curve.grid;
    let (x_lo, x_hi) = (grid[0], grid[grid.len() - 1]);
    let mut y_lo = -std::f64::consts::PI;
    let mut y_hi: f64 = 0.0;
    for i in 0..grid.len() {
        if curve.valid[i] {
            y_lo = y_lo.min(curve.err_lo[i]);
            y_hi = y_hi.max(curve.err_hi[i]);
        }
    }
    let pad = 0.12 * (y_hi - y_lo);
    let frame = Frame {
        x_lo,
        x_hi,
        y_lo: y_lo - pad,
        y_hi: y_hi + pad,
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");

    // Grid lines and labels: x at integer detunings, y at quarter turns.
    let x_first = frame.x_lo.ceil() as i64;
    let x_last = frame.x_hi.floor() as i64;
    for i in x_first..=x_last {
        let x = frame.x(i as f64);
        let _ = writeln!(
            s,
            "<line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#dddddd\"/>",
            frame.y(frame.y_hi),
            frame.y(frame.y_lo)
        );
        let _ = writeln!(
            s,
            "<text x=\"{x:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"middle\" fill=\"#333333\">{i}</text>",
            H - MB + 18.0
        );
    }
    let quarter = std::f64::consts::FRAC_PI_4;
    for k in -4..=0 {
        let v = k as f64 * quarter;
        if v < frame.y_lo || v > frame.y_hi {
            continue;
        }
        let y = frame.y(v);
        let label = match k {
            -4 => "-pi",
            -3 => "-3pi/4",
            -2 => "-pi/2",
            -1 => "-pi/4",
            _ => "0",
        };
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>",
            ML,
            W - MR
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" text-anchor=\"end\" fill=\"#333333\">{label}</text>",
            ML - 8.0,
            y + 4.0
        );
    }

    // Bootstrap band per valid run.
    for run in valid_runs(&curve.valid) {
        if run.len() < 2 {
            continue;
        }
        let mut pts: Vec<(f64, f64)> = run.clone().map(|i| (grid[i], curve.err_hi[i])).collect();
        pts.extend(run.rev().map(|i| (grid[i], curve.err_lo[i])));
        let _ = writeln!(
            s,
            "<polygon points=\"{}\" fill=\"#9ecae1\" fill-opacity=\"0.55\" stroke=\"none\"/>",
            poly_points(&frame, &pts)
        );
    }

    // Ideal reference arg(1/(eps + i)), dashed.
    let reference: Vec<(f64, f64)> = grid.iter().map(|&e| (e, (-1.0f64).atan2(e))).collect();
    let _ = writeln!(
        s,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#888888\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>",
        poly_points(&frame, &reference)
    );

    // Retrieved phase per valid run.
    for run in valid_runs(&curve.valid) {
        let pts: Vec<(f64, f64)> = run.map(|i| (grid[i], curve.phi_n[i])).collect();
        if pts.len() == 1 {
            let _ = writeln!(
                s,
                "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"#08519c\"/>",
                frame.x(pts[0].0),
                frame.y(pts[0].1)
            );
        } else {
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\"/>",
                poly_points(&frame, &pts)
            );
        }
    }

    // Frame and axis titles.
    let _ = writeln!(
        s,
        "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#333333\"/>",
        W - ML - MR,
        H - MT - MB
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" fill=\"#111111\">detuning (half-linewidths)</text>",
        ML + (W - ML - MR) / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        "<text x=\"18\" y=\"{:.2}\" font-size=\"14\" text-anchor=\"middle\" fill=\"#111111\" transform=\"rotate(-90 18 {:.2})\">resonant-path phase (rad)</text>",
        MT + (H - MT - MB) / 2.0,
        MT + (H - MT - MB) / 2.0
    );

    // Legend.
    let lx = W - MR - 240.0;
    let _ = writeln!(
        s,
        "<line x1=\"{lx:.2}\" y1=\"40\" x2=\"{:.2}\" y2=\"40\" stroke=\"#08519c\" stroke-width=\"2\"/>",
        lx + 30.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"44\" font-size=\"13\" fill=\"#111111\">retrieved phase (68% band)</text>",
        lx + 38.0
    );
    let _ = writeln!(
        s,
        "<line x1=\"{lx:.2}\" y1=\"60\" x2=\"{:.2}\" y2=\"60\" stroke=\"#888888\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>",
        lx + 30.0
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"64\" font-size=\"13\" fill=\"#111111\">two-level reference</text>",
        lx + 38.0
    );
    s.push_str("</svg>\n");
    s
}
