//! C ABI for chiral-spectra.
//!
//! A `ChiralSimulator` handle owns one molecule, drive and medium. Every call
//! returns a `ChiralStatus`; on failure a message is kept per thread and can be
//! read with `chiral_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use chiral_spectra::spectra::{self, Calibration, ForwardModel};
use chiral_spectra::{
    bloch, DriveConfig, Engine, Error, Handedness, MediumConfig, MoleculeParams, Solver,
};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiralStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParameter = 2,
    Numerical = 3,
    OutOfRange = 4,
    Panic = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiralEngine {
    Linear = 0,
    Full = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChiralHandedness {
    Left = 0,
    Right = 1,
}

/// Relaxation rates in units of γ.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ChiralMolecule {
    pub gamma31_pop: f64,
    pub gamma21_pop: f64,
    pub gamma32_pop: f64,
    pub gamma12: f64,
    pub gamma13: f64,
    pub gamma23: f64,
}

/// Entry amplitudes and loop phase. Probes must be equal and `theta` zero.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ChiralDrive {
    pub omega21: f64,
    pub omega31: f64,
    pub omega32: f64,
    pub theta: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ChiralMedium {
    pub p_plus: f64,
    pub zeta: f64,
    pub dipole_ratio: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ChiralPeaks {
    pub delta_plus: f64,
    pub delta_minus: f64,
    pub h_plus: f64,
    pub h_minus: f64,
    pub h_tilde_plus: f64,
    pub h_tilde_minus: f64,
    pub dp_prime: f64,
}

/// Opaque simulation handle.
pub struct ChiralSimulator {
    mol: MoleculeParams,
    drive: DriveConfig,
    medium: MediumConfig,
    solver: Solver,
    calibration: Option<Calibration>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> ChiralStatus {
    match err {
        Error::OutOfRange { .. } => ChiralStatus::OutOfRange,
        e if e.is_config() => ChiralStatus::InvalidParameter,
        _ => ChiralStatus::Numerical,
    }
}

fn guard<F>(f: F) -> ChiralStatus
where
    F: FnOnce() -> Result<(), ChiralStatus>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            ChiralStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(_) => {
            set_last_error("internal panic");
            ChiralStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, ChiralStatus>;
}

impl<T> OrStatus<T> for chiral_spectra::Result<T> {
    fn or_status(self) -> Result<T, ChiralStatus> {
        self.map_err(|e| {
            set_last_error(&e.to_string());
            status_of(&e)
        })
    }
}

fn null() -> ChiralStatus {
    set_last_error("null pointer argument");
    ChiralStatus::NullPointer
}

unsafe fn read<'a, T>(p: *const T) -> Result<&'a T, ChiralStatus> {
    p.as_ref().ok_or_else(null)
}

fn build_medium(m: &ChiralMedium) -> chiral_spectra::Result<MediumConfig> {
    MediumConfig::new(m.p_plus, 1.0 - m.p_plus, m.zeta, m.dipole_ratio)
}

fn engine_of(engine: ChiralEngine) -> Engine {
    match engine {
        ChiralEngine::Linear => Engine::Linear,
        ChiralEngine::Full => Engine::Full,
    }
}

/// Fill `out` with closed-system rates for the given population decay rates.
///
/// # Safety
/// `out` must be null or point to writable memory for one `ChiralMolecule`.
#[no_mangle]
pub unsafe extern "C" fn chiral_molecule_closed(
    gamma31_pop: f64,
    gamma21_pop: f64,
    gamma32_pop: f64,
    out: *mut ChiralMolecule,
) -> ChiralStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(null)?;
        let m =
            MoleculeParams::default_closed(gamma31_pop, gamma21_pop, gamma32_pop).or_status()?;
        *out = ChiralMolecule {
            gamma31_pop: m.gamma31_pop,
            gamma21_pop: m.gamma21_pop,
            gamma32_pop: m.gamma32_pop,
            gamma12: m.gamma12,
            gamma13: m.gamma13,
            gamma23: m.gamma23,
        };
        Ok(())
    })
}

/// Create a simulator. On success `*out` owns a handle that must be released
/// with `chiral_simulator_free`.
///
/// # Safety
/// `mol`, `drive` and `medium` must be null or valid for reads; `out` must be
/// null or valid for one pointer write.
#[no_mangle]
pub unsafe extern "C" fn chiral_simulator_new(
    mol: *const ChiralMolecule,
    drive: *const ChiralDrive,
    medium: *const ChiralMedium,
    engine: ChiralEngine,
    out: *mut *mut ChiralSimulator,
) -> ChiralStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(null)?;
        *out = ptr::null_mut();
        let (m, d, md) = (read(mol)?, read(drive)?, read(medium)?);
        let mol = MoleculeParams::new(
            m.gamma31_pop,
            m.gamma21_pop,
            m.gamma32_pop,
            m.gamma12,
            m.gamma13,
            m.gamma23,
        )
        .or_status()?;
        let drive = DriveConfig::new(d.omega21, d.omega31, d.omega32, 0.0, d.theta).or_status()?;
        if !drive.probe_condition_holds() {
            set_last_error("probe amplitudes must be equal and theta zero");
            return Err(ChiralStatus::InvalidParameter);
        }
        let medium = build_medium(md).or_status()?;
        let sim = ChiralSimulator {
            mol,
            drive,
            medium,
            solver: Solver::new(engine_of(engine)),
            calibration: None,
        };
        *out = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// Release a handle. Null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from `chiral_simulator_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn chiral_simulator_free(sim: *mut ChiralSimulator) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Replace the medium. Drops any cached calibration.
///
/// # Safety
/// `sim` must be a live handle; `medium` must be null or valid for reads.
#[no_mangle]
pub unsafe extern "C" fn chiral_simulator_set_medium(
    sim: *mut ChiralSimulator,
    medium: *const ChiralMedium,
) -> ChiralStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(null)?;
        sim.medium = build_medium(read(medium)?).or_status()?;
        sim.calibration = None;
        Ok(())
    })
}

/// Steady-state density matrix of one enantiomer at detuning `delta`, written
/// row-major into `re[9]` and `im[9]`.
///
/// # Safety
/// `sim` must be a live handle; `re` and `im` must each hold 9 doubles.
#[no_mangle]
pub unsafe extern "C" fn chiral_steady_state(
    sim: *const ChiralSimulator,
    delta: f64,
    hand: ChiralHandedness,
    re: *mut f64,
    im: *mut f64,
) -> ChiralStatus {
    guard(|| {
        let sim = read(sim)?;
        if re.is_null() || im.is_null() {
            return Err(null());
        }
        let hand = match hand {
            ChiralHandedness::Left => Handedness::Left,
            ChiralHandedness::Right => Handedness::Right,
        };
        if !delta.is_finite() {
            set_last_error("detuning must be finite");
            return Err(ChiralStatus::InvalidParameter);
        }
        let sigma =
            bloch::steady_state(&sim.mol, &sim.drive.with_delta(delta), hand).or_status()?;
        let re = std::slice::from_raw_parts_mut(re, 9);
        let im = std::slice::from_raw_parts_mut(im, 9);
        for i in 0..3 {
            for j in 0..3 {
                let z = sigma.get(i + 1, j + 1);
                re[3 * i + j] = z.re;
                im[3 * i + j] = z.im;
            }
        }
        Ok(())
    })
}

/// Characteristic peaks of the configured medium.
///
/// # Safety
/// `sim` must be a live handle; `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn chiral_peaks(
    sim: *const ChiralSimulator,
    out: *mut ChiralPeaks,
) -> ChiralStatus {
    guard(|| {
        let sim = read(sim)?;
        let out = out.as_mut().ok_or_else(null)?;
        let p = sim
            .solver
            .peaks(&sim.medium, &sim.mol, &sim.drive)
            .or_status()?;
        *out = ChiralPeaks {
            delta_plus: p.delta_plus,
            delta_minus: p.delta_minus,
            h_plus: p.h_plus,
            h_minus: p.h_minus,
            h_tilde_plus: p.h_tilde_plus,
            h_tilde_minus: p.h_tilde_minus,
            dp_prime: p.dp_prime,
        };
        Ok(())
    })
}

/// Probe transmission at each of `n` sorted detunings.
///
/// # Safety
/// `sim` must be a live handle; `deltas` and `transmission` must each hold
/// `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn chiral_sweep(
    sim: *const ChiralSimulator,
    deltas: *const f64,
    n: usize,
    transmission: *mut f64,
) -> ChiralStatus {
    guard(|| {
        let sim = read(sim)?;
        if deltas.is_null() || transmission.is_null() {
            return Err(null());
        }
        let grid = std::slice::from_raw_parts(deltas, n);
        let result =
            spectra::sweep(&sim.medium, &sim.mol, &sim.drive, grid, &sim.solver).or_status()?;
        let out = std::slice::from_raw_parts_mut(transmission, n);
        for (o, p) in out.iter_mut().zip(&result.points) {
            *o = p.transmission;
        }
        Ok(())
    })
}

/// Forward model: `δp′` for enantiomeric difference `dp` at the handle's depth.
///
/// # Safety
/// `sim` must be a live handle; `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn chiral_forward(
    sim: *const ChiralSimulator,
    dp: f64,
    out: *mut f64,
) -> ChiralStatus {
    guard(|| {
        let sim = read(sim)?;
        let out = out.as_mut().ok_or_else(null)?;
        let medium = sim.medium.with_dp(dp).or_status()?;
        *out = sim
            .solver
            .dp_prime(&medium, &sim.mol, &sim.drive)
            .or_status()?;
        Ok(())
    })
}

/// Recover `δp` from a measured `δp′`. The calibration curve is built on
/// first use and cached in the handle.
///
/// # Safety
/// `sim` must be a live handle; `out` must be null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn chiral_invert(
    sim: *mut ChiralSimulator,
    dp_prime: f64,
    out: *mut f64,
) -> ChiralStatus {
    guard(|| {
        let sim = sim.as_mut().ok_or_else(null)?;
        let out = out.as_mut().ok_or_else(null)?;
        if sim.calibration.is_none() {
            let model =
                ForwardModel::new(sim.medium, sim.mol, sim.drive, sim.solver).or_status()?;
            sim.calibration = Some(Calibration::with_default_grid(model).or_status()?);
        }
        let calibration = sim.calibration.as_ref().expect("calibration just built");
        *out = spectra::invert_ee(dp_prime, calibration).or_status()?;
        Ok(())
    })
}

/// Message for the last failed call on this thread, empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn chiral_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn chiral_status_str(status: ChiralStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        ChiralStatus::Ok => b"ok\0",
        ChiralStatus::NullPointer => b"null pointer\0",
        ChiralStatus::InvalidParameter => b"invalid parameter\0",
        ChiralStatus::Numerical => b"numerical failure\0",
        ChiralStatus::OutOfRange => b"out of calibration range\0",
        ChiralStatus::Panic => b"internal panic\0",
    };
    s.as_ptr().cast()
}
