//! Randomized checks of the algebraic identities behind the forward model and
//! of the lossless serialization formats.

use fanox::{GridUnits, PhysicalModel, Spectrum, SpectrumMeta};
use proptest::prelude::*;

fn base_model(gamma: f64, kappa: f64, kappa_r: f64, coupling: f64, slope: f64) -> PhysicalModel {
    PhysicalModel {
        gamma,
        omega0_kev: 14.4,
        kappa,
        kappa_r,
        coupling_strength: coupling,
        delta_c_slope: slope,
        theta_min_urad: 2400.0,
    }
}

/// Critically coupled cavity over broad parameter ranges.
fn critical_model() -> impl Strategy<Value = PhysicalModel> {
    (1e-3f64..2.0, 0.5f64..10.0, -2.0f64..6.0, 0.05f64..2.0).prop_map(
        |(gamma, kappa, log_c, slope)| {
            base_model(gamma, kappa, kappa / 2.0, 10f64.powf(log_c), slope)
        },
    )
}

/// The natural width a negligible correction: gamma/gamma_total < 1e-3.
fn collective_model() -> impl Strategy<Value = PhysicalModel> {
    (critical_model(), 1e-9f64..1e-6).prop_map(|(mut m, gamma)| {
        m.gamma = gamma;
        m.coupling_strength = m.coupling_strength.max(1.0);
        m
    })
}

fn offset() -> impl Strategy<Value = f64> {
    prop_oneof![0.05f64..10.0, -10.0f64..-0.05]
}

proptest! {
    /// The interferometer form, the asymmetric-line form, and the explicit
    /// channel split are the same function.
    #[test]
    fn three_reflectance_routes_agree(
        model in critical_model(),
        dth in offset(),
        eps in -50.0f64..50.0,
    ) {
        let ls = model.lineshape(dth);
        let a = ls.reflectance(eps).unwrap();
        let b = ls.reflectance_fano(eps).unwrap();
        let c = ls.channels(eps).unwrap().intensity();
        // Relative to the profile scale: at interference nulls the value
        // itself sits ten orders below the terms that cancel to produce it.
        let scale = a.abs().max(b.abs()).max(c.abs()).max(ls.sigma0).max(1e-30);
        prop_assert!((a - b).abs() <= 1e-12 * scale, "{a} vs {b}");
        prop_assert!((a - c).abs() <= 1e-12 * scale, "{a} vs {c}");
    }

    /// With the natural width negligible the reflected fraction never exceeds
    /// unity beyond rounding.
    #[test]
    fn reflectance_bounded_in_the_collective_limit(
        model in collective_model(),
        dth in offset(),
        eps in -1e3f64..1e3,
    ) {
        let r = model.lineshape(dth).reflectance(eps).unwrap();
        prop_assert!((0.0..=1.01).contains(&r), "R = {r}");
    }

    /// Mirroring the rocking offset mirrors the spectrum in detuning once the
    /// natural width drops out.
    #[test]
    fn mirror_symmetry_in_the_collective_limit(
        model in collective_model(),
        dth in offset(),
        eps in -50.0f64..50.0,
    ) {
        let ls = model.lineshape(dth);
        let a = ls.reflectance(eps).unwrap();
        let b = model.lineshape(-dth).reflectance(-eps).unwrap();
        let scale = a.abs().max(b.abs()).max(ls.sigma0).max(1e-30);
        prop_assert!((a - b).abs() <= 1e-9 * scale, "{a} vs {b}");
    }

    /// Far off resonance the line settles onto the continuum level; the
    /// leading correction is 2 q_re / eps, so a few parts in 1e3 at this range.
    #[test]
    fn line_approaches_continuum_level_off_resonance(
        model in critical_model(),
        dth in offset(),
        sign in prop::bool::ANY,
    ) {
        let ls = model.lineshape(dth);
        let q_mag = ls.q.norm().max(1.0);
        let eps = if sign { 1.0 } else { -1.0 } * 1e3 * q_mag;
        let r = ls.reflectance(eps).unwrap();
        prop_assert!(
            (r - ls.sigma0).abs() <= 3e-3 * ls.sigma0,
            "R = {r}, continuum level = {}",
            ls.sigma0
        );
    }

    /// Both roots of the real-q matching quadratic reproduce the complex-q
    /// profile exactly once amplitude and baseline absorb the rest.
    #[test]
    fn effective_real_q_dual_pair_reproduce_the_profile(
        model in critical_model(),
        dth in offset(),
        eps in -50.0f64..50.0,
    ) {
        let ls = model.lineshape(dth);
        let qe = ls.effective_real_q();
        prop_assume!(qe.is_finite() && qe != 0.0);
        let truth = ls.reflectance_fano(eps).unwrap();
        for root in [qe, -1.0 / qe] {
            let a = ls.sigma0 * ls.q.re / root;
            let b = ls.sigma0 - a;
            let term = a * (eps + root).powi(2) / (1.0 + eps * eps);
            let got = term + b;
            // Tolerance on the intermediate scale (at least the continuum
            // level): near the profile null everything cancels, and the
            // minus-1/qe branch pits a large negative term against a large
            // baseline there.
            let scale = term
                .abs()
                .max(b.abs())
                .max(truth.abs())
                .max(ls.sigma0)
                .max(1e-30);
            prop_assert!((got - truth).abs() <= 1e-12 * scale, "root {root}: {got} vs {truth}");
        }
    }

    /// The continuum phase stays on the principal branch, with the quadrant
    /// set by the sign of the cavity detuning.
    #[test]
    fn continuum_phase_quadrant_follows_detuning(
        model in critical_model(),
        dth in offset(),
    ) {
        let ls = model.lineshape(dth);
        prop_assert!(ls.phi > -std::f64::consts::PI && ls.phi < 0.0);
        if ls.delta_c > 0.0 {
            prop_assert!(ls.phi > -std::f64::consts::FRAC_PI_2);
        } else {
            prop_assert!(ls.phi < -std::f64::consts::FRAC_PI_2);
        }
    }

    /// The resonant path's phase is monotone increasing in detuning.
    #[test]
    fn resonant_phase_increases_with_detuning(
        model in critical_model(),
        dth in offset(),
        e1 in -100.0f64..100.0,
        de in 1e-6f64..10.0,
    ) {
        let ls = model.lineshape(dth);
        let p1 = ls.channels(e1).unwrap().phi_n;
        let p2 = ls.channels(e1 + de).unwrap().phi_n;
        prop_assert!(p2 > p1, "phi_n({e1}) = {p1} !< phi_n({}) = {p2}", e1 + de);
        prop_assert!(p1 > -std::f64::consts::PI && p1 < 0.0);
    }

    /// Detuning/energy maps are mutual inverses.
    #[test]
    fn epsilon_energy_maps_invert(
        model in critical_model(),
        dth in offset(),
        eps in -1e4f64..1e4,
    ) {
        let ls = model.lineshape(dth);
        let back = ls.energy_to_epsilon(ls.epsilon_to_energy(eps));
        prop_assert!((back - eps).abs() <= 1e-9 * eps.abs().max(1.0));
    }
}

fn meta_string() -> impl Strategy<Value = Option<String>> {
    prop::option::of("[a-zA-Z0-9_.-]{1,24}")
}

fn spectrum_strategy() -> impl Strategy<Value = Spectrum> {
    let row = (0.0f64..1e9, 1e-6f64..1e4, prop::bool::ANY);
    (
        -1e3f64..1e3,
        prop::collection::vec((1e-6f64..100.0, row), 2..40),
        -100.0f64..100.0,
        prop::bool::ANY,
        prop::option::of(prop::num::u64::ANY),
        meta_string(),
        meta_string(),
        prop::collection::vec((-1e3f64..1e3, 0.0f64..10.0), 0..3),
    )
        .prop_map(
            |(angle, rows, start, energy, seed, model_hash, source, spans)| {
                let mut x = start;
                let mut grid = Vec::new();
                let mut counts = Vec::new();
                let mut sigma = Vec::new();
                let mut mask = Vec::new();
                for (step, (c, s, m)) in rows {
                    x += step;
                    grid.push(x);
                    counts.push(c);
                    sigma.push(s);
                    mask.push(m);
                }
                Spectrum {
                    angle_urad: angle,
                    grid,
                    counts,
                    sigma,
                    mask,
                    meta: SpectrumMeta {
                        units: if energy {
                            GridUnits::Energy
                        } else {
                            GridUnits::Epsilon
                        },
                        seed,
                        model_hash,
                        source,
                        mask_intervals: spans.into_iter().map(|(lo, w)| (lo, lo + w)).collect(),
                    },
                }
            },
        )
}

fn assert_bit_identical(a: &Spectrum, b: &Spectrum) {
    assert_eq!(a.angle_urad.to_bits(), b.angle_urad.to_bits());
    assert_eq!(a.meta.units, b.meta.units);
    assert_eq!(a.meta.seed, b.meta.seed);
    assert_eq!(a.meta.model_hash, b.meta.model_hash);
    assert_eq!(a.meta.source, b.meta.source);
    assert_eq!(a.meta.mask_intervals.len(), b.meta.mask_intervals.len());
    for (x, y) in a.meta.mask_intervals.iter().zip(&b.meta.mask_intervals) {
        assert_eq!(x.0.to_bits(), y.0.to_bits());
        assert_eq!(x.1.to_bits(), y.1.to_bits());
    }
    assert_eq!(a.len(), b.len());
    for i in 0..a.len() {
        assert_eq!(a.grid[i].to_bits(), b.grid[i].to_bits());
        assert_eq!(a.counts[i].to_bits(), b.counts[i].to_bits());
        assert_eq!(a.sigma[i].to_bits(), b.sigma[i].to_bits());
        assert_eq!(a.mask[i], b.mask[i]);
    }
}

proptest! {
    /// The text format loses nothing: every float comes back bit-identical.
    #[test]
    fn text_round_trip_is_lossless(spec in spectrum_strategy()) {
        let back = Spectrum::from_text(&spec.to_text()).unwrap();
        assert_bit_identical(&spec, &back);
    }

    /// Same for the JSON form.
    #[test]
    fn json_round_trip_is_lossless(spec in spectrum_strategy()) {
        let back = Spectrum::from_json(&spec.to_json().unwrap()).unwrap();
        assert_bit_identical(&spec, &back);
    }
}
