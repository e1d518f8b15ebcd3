//! Randomised checks of symmetries that hold for every parameter choice.

use chiral_spectra::cli::{format_g, parse_spectrum_csv, spectrum_csv};
use chiral_spectra::propagation;
use chiral_spectra::spectra::{self, Engine, Solver};
use chiral_spectra::{DriveConfig, MediumConfig, MoleculeParams, SpectrumPoint};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn swapping_enantiomers_mirrors_the_spectrum(
        dp in -1.0..1.0_f64,
        zeta in 0.0..3.0_f64,
        omega32 in 2.0..60.0_f64,
        delta in -40.0..40.0_f64,
    ) {
        let mol = MoleculeParams::reference();
        let medium = MediumConfig::from_dp(dp, zeta, 1.0).unwrap();
        let solver = Solver::new(Engine::Linear);
        let at = |m: &MediumConfig, d: f64| {
            let drive = DriveConfig::probe_condition(0.1, omega32, d).unwrap();
            solver.transmission(m, &mol, &drive, d).unwrap()
        };
        let t = at(&medium, delta);
        let mirrored = at(&medium.mirrored(), -delta);
        prop_assert!((t - mirrored).abs() <= 1e-12);
    }

    // T alone may exceed 1 when the loop moves power from the 1-3 probe into
    // the 1-2 probe; the dipole-weighted sum of both can only fall.
    #[test]
    fn combined_probe_power_never_grows(
        dp in -1.0..1.0_f64,
        a in 0.2..3.0_f64,
        zeta in 0.1..6.0_f64,
        omega32 in 2.0..60.0_f64,
        delta in -40.0..40.0_f64,
    ) {
        let medium = MediumConfig::from_dp(dp, zeta, a).unwrap();
        let drive = DriveConfig::probe_condition(0.1, omega32, delta).unwrap();
        let depths = spectra::linspace(0.0, zeta, 25);
        let fields =
            propagation::propagate_linear(&medium, &MoleculeParams::reference(), &drive, &depths).unwrap();
        for pair in fields.windows(2) {
            let (before, after) = (pair[0].probe_power(a), pair[1].probe_power(a));
            prop_assert!(after <= before * (1.0 + 1e-12), "{before} -> {after}");
        }
        let t = propagation::transmission(&fields[0], &fields[24]).unwrap();
        prop_assert!(t >= 0.0);
    }

    #[test]
    fn csv_round_trip_keeps_twelve_digits(values in prop::collection::vec(-1e6..1e6_f64, 1..20)) {
        let points: Vec<SpectrumPoint> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| SpectrumPoint {
                delta: i as f64,
                transmission: v,
                absorption: -v,
                normalized: v * 1e-9,
            })
            .collect();
        let back = parse_spectrum_csv(&spectrum_csv(&points)).unwrap();
        for (a, b) in points.iter().zip(&back) {
            prop_assert!((a.transmission - b.transmission).abs() <= 1e-11 * a.transmission.abs().max(1e-300));
            prop_assert!((a.normalized - b.normalized).abs() <= 1e-11 * a.normalized.abs().max(1e-300));
        }
    }

    #[test]
    fn inversion_undoes_the_forward_model(dp in -1.0..1.0_f64) {
        let model = spectra::ForwardModel::new(
            MediumConfig::from_dp(0.0, 0.5, 1.0).unwrap(),
            MoleculeParams::reference(),
            DriveConfig::probe_condition(0.1, 10.0, 0.0).unwrap(),
            Solver::new(Engine::Linear),
        )
        .unwrap();
        let calibration = calibration(model);
        let back = spectra::invert_ee(model.dp_prime(dp).unwrap(), &calibration).unwrap();
        prop_assert!((back - dp).abs() <= 1e-6);
    }
}

fn calibration(model: spectra::ForwardModel) -> spectra::Calibration {
    use std::sync::OnceLock;
    static CAL: OnceLock<spectra::Calibration> = OnceLock::new();
    CAL.get_or_init(|| spectra::Calibration::with_default_grid(model).unwrap())
        .clone()
}

#[test]
fn special_values_format_like_printf() {
    assert_eq!(format_g(f64::NAN), "nan");
    assert_eq!(format_g(f64::INFINITY), "inf");
    assert_eq!(format_g(0.1), "0.1");
    assert_eq!(format_g(1.0), "1");
    assert_eq!(format_g(1e-20), "1e-20");
}
