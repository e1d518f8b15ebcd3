use std::ffi::CStr;
use std::ptr;

use chiral_spectra_ffi::*;

fn reference_molecule() -> ChiralMolecule {
    let mut m = ChiralMolecule {
        gamma31_pop: 0.0,
        gamma21_pop: 0.0,
        gamma32_pop: 0.0,
        gamma12: 0.0,
        gamma13: 0.0,
        gamma23: 0.0,
    };
    assert_eq!(
        unsafe { chiral_molecule_closed(1.0, 1.0, 1.0, &mut m) },
        ChiralStatus::Ok
    );
    m
}

fn fig3_drive() -> ChiralDrive {
    ChiralDrive {
        omega21: 0.1,
        omega31: 0.1,
        omega32: 10.0,
        theta: 0.0,
    }
}

fn simulator(p_plus: f64, zeta: f64, engine: ChiralEngine) -> *mut ChiralSimulator {
    let medium = ChiralMedium {
        p_plus,
        zeta,
        dipole_ratio: 1.0,
    };
    let mut sim = ptr::null_mut();
    let status = unsafe {
        chiral_simulator_new(
            &reference_molecule(),
            &fig3_drive(),
            &medium,
            engine,
            &mut sim,
        )
    };
    assert_eq!(status, ChiralStatus::Ok);
    assert!(!sim.is_null());
    sim
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(chiral_last_error()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn closed_rates() {
    let m = reference_molecule();
    assert_eq!((m.gamma12, m.gamma13, m.gamma23), (0.5, 1.0, 1.5));
}

#[test]
fn steady_state_through_handle() {
    let sim = simulator(1.0, 0.2, ChiralEngine::Full);
    let (mut re, mut im) = ([0.0; 9], [0.0; 9]);
    let status = unsafe {
        chiral_steady_state(
            sim,
            -5.0,
            ChiralHandedness::Left,
            re.as_mut_ptr(),
            im.as_mut_ptr(),
        )
    };
    assert_eq!(status, ChiralStatus::Ok);
    assert!((re[0] + re[4] + re[8] - 1.0).abs() < 1e-12);
    // σ21 sits in row 2, column 1
    assert!((im[3] - 0.0652).abs() < 1e-3, "{}", im[3]);
    let status = unsafe {
        chiral_steady_state(
            sim,
            -5.0,
            ChiralHandedness::Right,
            re.as_mut_ptr(),
            im.as_mut_ptr(),
        )
    };
    assert_eq!(status, ChiralStatus::Ok);
    assert!(im[3].abs() < 5e-3);
    unsafe { chiral_simulator_free(sim) };
}

#[test]
fn peaks_sweep_and_inversion() {
    let sim = simulator(0.75, 0.2, ChiralEngine::Linear);
    let mut peaks = ChiralPeaks::default();
    assert_eq!(unsafe { chiral_peaks(sim, &mut peaks) }, ChiralStatus::Ok);
    assert!(peaks.h_plus > peaks.h_minus);
    assert_eq!(peaks.delta_plus, -5.0);

    let deltas = [-5.0, 0.0, 5.0];
    let mut t = [0.0; 3];
    let status = unsafe { chiral_sweep(sim, deltas.as_ptr(), 3, t.as_mut_ptr()) };
    assert_eq!(status, ChiralStatus::Ok);
    assert!((1.0 - t[0] - peaks.h_plus).abs() < 1e-14);
    assert!((1.0 - t[2] - peaks.h_minus).abs() < 1e-14);

    let mut forward = 0.0;
    assert_eq!(
        unsafe { chiral_forward(sim, 0.37, &mut forward) },
        ChiralStatus::Ok
    );
    let mut dp = 0.0;
    assert_eq!(
        unsafe { chiral_invert(sim, forward, &mut dp) },
        ChiralStatus::Ok
    );
    assert!((dp - 0.37).abs() < 1e-6);

    assert_eq!(
        unsafe { chiral_invert(sim, 3.0, &mut dp) },
        ChiralStatus::OutOfRange
    );
    assert!(last_error().contains("outside calibration range"));
    unsafe { chiral_simulator_free(sim) };
}

#[test]
fn error_codes() {
    let mol = reference_molecule();
    let medium = ChiralMedium {
        p_plus: 0.5,
        zeta: 0.2,
        dipole_ratio: 1.0,
    };
    let mut sim = ptr::null_mut();
    let skewed = ChiralDrive {
        omega31: 0.2,
        ..fig3_drive()
    };
    let status =
        unsafe { chiral_simulator_new(&mol, &skewed, &medium, ChiralEngine::Full, &mut sim) };
    assert_eq!(status, ChiralStatus::InvalidParameter);
    assert!(sim.is_null());
    assert!(!last_error().is_empty());

    let bad_medium = ChiralMedium {
        p_plus: 1.5,
        ..medium
    };
    let status = unsafe {
        chiral_simulator_new(
            &mol,
            &fig3_drive(),
            &bad_medium,
            ChiralEngine::Full,
            &mut sim,
        )
    };
    assert_eq!(status, ChiralStatus::InvalidParameter);

    let status = unsafe {
        chiral_simulator_new(
            ptr::null(),
            &fig3_drive(),
            &medium,
            ChiralEngine::Full,
            &mut sim,
        )
    };
    assert_eq!(status, ChiralStatus::NullPointer);

    let sim = simulator(0.5, 0.2, ChiralEngine::Full);
    assert_eq!(
        unsafe { chiral_peaks(sim, ptr::null_mut()) },
        ChiralStatus::NullPointer
    );
    let unsorted = [1.0, 0.0];
    let mut t = [0.0; 2];
    let status = unsafe { chiral_sweep(sim, unsorted.as_ptr(), 2, t.as_mut_ptr()) };
    assert_eq!(status, ChiralStatus::InvalidParameter);
    let mut peaks = ChiralPeaks::default();
    assert_eq!(unsafe { chiral_peaks(sim, &mut peaks) }, ChiralStatus::Ok);
    assert!(last_error().is_empty());

    let transparent = ChiralMedium {
        zeta: 0.0,
        ..medium
    };
    assert_eq!(
        unsafe { chiral_simulator_set_medium(sim, &transparent) },
        ChiralStatus::Ok
    );
    assert_eq!(
        unsafe { chiral_peaks(sim, &mut peaks) },
        ChiralStatus::Numerical
    );
    unsafe { chiral_simulator_free(sim) };
    unsafe { chiral_simulator_free(ptr::null_mut()) };

    let s = unsafe { CStr::from_ptr(chiral_status_str(ChiralStatus::OutOfRange)) };
    assert_eq!(s.to_str().unwrap(), "out of calibration range");
}

#[test]
fn header_declares_api() {
    let header = std::fs::read_to_string(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/include/chiral_spectra.h"
    ))
    .expect("header generated by the build script");
    for name in [
        "typedef struct ChiralSimulator ChiralSimulator",
        "chiral_simulator_new",
        "chiral_simulator_free",
        "chiral_peaks",
        "chiral_sweep",
        "chiral_invert",
        "chiral_last_error",
        "CHIRAL_STATUS_OUT_OF_RANGE",
    ] {
        assert!(header.contains(name), "missing {name}");
    }
}
