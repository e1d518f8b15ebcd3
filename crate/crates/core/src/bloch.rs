//! Rotating-frame optical Bloch equations of the cyclic three-level system.
//!
//! The state is carried as eight real coordinates
//! `(σ11, σ22, Re σ21, Im σ21, Re σ31, Im σ31, Re σ32, Im σ32)`; the remaining
//! population follows from `σ33 = 1 − σ11 − σ22` and the upper triangle from
//! Hermiticity, so trace and Hermiticity hold exactly for every coordinate
//! vector. The equations of motion are affine in these coordinates,
//! `dx/dt = M x + b`.

use nalgebra::{Matrix3, SMatrix, SVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{DensityMatrix, DriveConfig, Handedness, MoleculeParams};

pub type Coords = SVector<f64, 8>;
pub type Generator = SMatrix<f64, 8, 8>;

/// Steady-state residual bound `‖M x + b‖∞`.
pub const STEADY_RESIDUAL_TOL: f64 = 1e-10;

/// Doppler shifts `k_ij·v_z` (units `γ`) of one velocity class.
///
/// The 1–3 shift is `k21·v + k32·v`, which keeps the three drives two-photon
/// resonant for co-propagating beams.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct VelocityShift {
    pub probe21: f64,
    pub control32: f64,
}

impl VelocityShift {
    pub const AT_REST: VelocityShift = VelocityShift {
        probe21: 0.0,
        control32: 0.0,
    };

    pub fn probe31(&self) -> f64 {
        self.probe21 + self.control32
    }
}

/// Effective detunings seen by one velocity class. The control field is
/// resonant at rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Detunings {
    pub d21: f64,
    pub d31: f64,
    pub d32: f64,
}

impl Detunings {
    pub fn new(delta: f64, shift: VelocityShift) -> Self {
        Self {
            d21: delta - shift.probe21,
            d31: delta - shift.probe31(),
            d32: -shift.control32,
        }
    }
}

/// Affine generator `dx/dt = M x + b` in the real coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian {
    pub matrix: Generator,
    pub source: Coords,
}

impl Liouvillian {
    pub fn apply(&self, x: &Coords) -> Coords {
        self.matrix * x + self.source
    }
}

/// Generator for one enantiomer; `hand` maps `Θ` to the loop phase it sees.
pub fn build_liouvillian(
    mol: &MoleculeParams,
    drive: &DriveConfig,
    hand: Handedness,
) -> Result<Liouvillian> {
    build_liouvillian_shifted(mol, drive, hand, VelocityShift::AT_REST)
}

/// As [`build_liouvillian`] for a molecule moving with the given Doppler shifts.
pub fn build_liouvillian_shifted(
    mol: &MoleculeParams,
    drive: &DriveConfig,
    hand: Handedness,
    shift: VelocityShift,
) -> Result<Liouvillian> {
    check_rates(mol)?;
    if !(shift.probe21.is_finite() && shift.control32.is_finite()) {
        return Err(Error::invalid("velocity shift must be finite"));
    }
    let theta = hand.effective_theta(drive.theta());
    let det = Detunings::new(drive.delta, shift);
    Ok(assemble(mol, drive, theta, det))
}

fn check_rates(mol: &MoleculeParams) -> Result<()> {
    let rates = [
        mol.gamma31_pop,
        mol.gamma21_pop,
        mol.gamma32_pop,
        mol.gamma12,
        mol.gamma13,
        mol.gamma23,
    ];
    if rates.iter().all(|r| r.is_finite() && *r >= 0.0) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "rates must be non-negative: {mol:?}"
        )))
    }
}

fn assemble(mol: &MoleculeParams, drive: &DriveConfig, theta: f64, det: Detunings) -> Liouvillian {
    let a = drive.omega21_abs;
    let p = drive.omega31_abs;
    let g = drive.omega32_abs;
    let (s, c) = theta.sin_cos();
    let (g31, g21, g32) = (mol.gamma31_pop, mol.gamma21_pop, mol.gamma32_pop);

    let mut m = Generator::zeros();
    let mut b = Coords::zeros();

    // σ11
    m[(0, 0)] = -g31;
    m[(0, 1)] = g21 - g31;
    m[(0, 3)] = -a;
    m[(0, 5)] = -p;
    b[0] = g31;

    // σ22
    m[(1, 0)] = -g32;
    m[(1, 1)] = -(g21 + g32);
    m[(1, 3)] = a;
    m[(1, 7)] = -g;
    b[1] = g32;

    // Re σ21
    m[(2, 2)] = -mol.gamma12;
    m[(2, 3)] = -det.d21;
    m[(2, 4)] = -0.5 * g * s;
    m[(2, 5)] = -0.5 * g * c;
    m[(2, 6)] = 0.5 * p * s;
    m[(2, 7)] = -0.5 * p * c;

    // Im σ21
    m[(3, 0)] = 0.5 * a;
    m[(3, 1)] = -0.5 * a;
    m[(3, 2)] = det.d21;
    m[(3, 3)] = -mol.gamma12;
    m[(3, 4)] = 0.5 * g * c;
    m[(3, 5)] = -0.5 * g * s;
    m[(3, 6)] = -0.5 * p * c;
    m[(3, 7)] = -0.5 * p * s;

    // Re σ31
    m[(4, 2)] = 0.5 * g * s;
    m[(4, 3)] = -0.5 * g * c;
    m[(4, 4)] = -mol.gamma13;
    m[(4, 5)] = -det.d31;
    m[(4, 6)] = -0.5 * a * s;
    m[(4, 7)] = 0.5 * a * c;

    // Im σ31, with σ33 − σ11 = 1 − 2σ11 − σ22
    m[(5, 0)] = p;
    m[(5, 1)] = 0.5 * p;
    m[(5, 2)] = 0.5 * g * c;
    m[(5, 3)] = 0.5 * g * s;
    m[(5, 4)] = det.d31;
    m[(5, 5)] = -mol.gamma13;
    m[(5, 6)] = -0.5 * a * c;
    m[(5, 7)] = -0.5 * a * s;
    b[5] = -0.5 * p;

    // Re σ32
    m[(6, 2)] = -0.5 * p * s;
    m[(6, 3)] = 0.5 * p * c;
    m[(6, 4)] = 0.5 * a * s;
    m[(6, 5)] = 0.5 * a * c;
    m[(6, 6)] = -mol.gamma23;
    m[(6, 7)] = -det.d32;

    // Im σ32, with σ33 − σ22 = 1 − σ11 − 2σ22
    m[(7, 0)] = 0.5 * g;
    m[(7, 1)] = g;
    m[(7, 2)] = 0.5 * p * c;
    m[(7, 3)] = 0.5 * p * s;
    m[(7, 4)] = -0.5 * a * c;
    m[(7, 5)] = 0.5 * a * s;
    m[(7, 6)] = det.d32;
    m[(7, 7)] = -mol.gamma23;
    b[7] = -0.5 * g;

    Liouvillian {
        matrix: m,
        source: b,
    }
}

/// Real coordinates of a density matrix. Only the lower triangle and the first
/// two populations are read.
pub fn to_coords(sigma: &DensityMatrix) -> Coords {
    let s21 = sigma.get(2, 1);
    let s31 = sigma.get(3, 1);
    let s32 = sigma.get(3, 2);
    Coords::from([
        sigma.get(1, 1).re,
        sigma.get(2, 2).re,
        s21.re,
        s21.im,
        s31.re,
        s31.im,
        s32.re,
        s32.im,
    ])
}

pub fn from_coords(x: &Coords) -> DensityMatrix {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let s21 = c(x[2], x[3]);
    let s31 = c(x[4], x[5]);
    let s32 = c(x[6], x[7]);
    let s33 = 1.0 - x[0] - x[1];
    DensityMatrix(Matrix3::new(
        c(x[0], 0.0),
        s21.conj(),
        s31.conj(),
        s21,
        c(x[1], 0.0),
        s32.conj(),
        s31,
        s32,
        c(s33, 0.0),
    ))
}

/// Solve `M x + b = 0` for the unique fixed point.
pub fn steady_state_of(gen: &Liouvillian) -> Result<DensityMatrix> {
    let lu = gen.matrix.lu();
    let u = lu.u();
    let diag = u.diagonal().map(f64::abs);
    let (lo, hi) = (diag.min(), diag.max());
    if !(hi > 0.0) || lo <= 1e-13 * hi {
        return Err(Error::SingularGenerator {
            residual: f64::INFINITY,
        });
    }
    let x = lu.solve(&(-gen.source)).ok_or(Error::SingularGenerator {
        residual: f64::INFINITY,
    })?;
    let residual = gen.apply(&x).amax();
    if !(residual <= STEADY_RESIDUAL_TOL) {
        return Err(Error::SingularGenerator { residual });
    }
    Ok(from_coords(&x))
}

/// Unique steady state of one enantiomer.
pub fn steady_state(
    mol: &MoleculeParams,
    drive: &DriveConfig,
    hand: Handedness,
) -> Result<DensityMatrix> {
    steady_state_of(&build_liouvillian(mol, drive, hand)?)
}

pub fn steady_state_shifted(
    mol: &MoleculeParams,
    drive: &DriveConfig,
    hand: Handedness,
    shift: VelocityShift,
) -> Result<DensityMatrix> {
    steady_state_of(&build_liouvillian_shifted(mol, drive, hand, shift)?)
}

/// Largest step recommended for [`evolve`]: `0.01` over the fastest scale.
pub fn recommended_step(mol: &MoleculeParams, drive: &DriveConfig) -> f64 {
    let fastest = [
        drive.omega21_abs,
        drive.omega31_abs,
        drive.omega32_abs,
        drive.delta.abs(),
        mol.max_rate(),
    ]
    .into_iter()
    .fold(1e-300, f64::max);
    0.01 / fastest
}

/// Integrate from `sigma0` for a time `t_final` with classical RK4 steps of at
/// most `dt`.
pub fn evolve(
    sigma0: &DensityMatrix,
    mol: &MoleculeParams,
    drive: &DriveConfig,
    hand: Handedness,
    t_final: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    evolve_observed(sigma0, mol, drive, hand, t_final, dt, |_, _| {})
}

/// As [`evolve`], calling `observe(t, σ(t))` at the start and after every step.
pub fn evolve_observed<F>(
    sigma0: &DensityMatrix,
    mol: &MoleculeParams,
    drive: &DriveConfig,
    hand: Handedness,
    t_final: f64,
    dt: f64,
    mut observe: F,
) -> Result<DensityMatrix>
where
    F: FnMut(f64, &DensityMatrix),
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!(
            "time step must be positive, got {dt}"
        )));
    }
    if !(t_final >= 0.0 && t_final.is_finite()) {
        return Err(Error::invalid(format!(
            "final time must be non-negative, got {t_final}"
        )));
    }
    let gen = build_liouvillian(mol, drive, hand)?;
    let steps = (t_final / dt).ceil() as usize;
    let h = if steps == 0 {
        0.0
    } else {
        t_final / steps as f64
    };

    let mut x = to_coords(sigma0);
    observe(0.0, &from_coords(&x));
    for n in 0..steps {
        x = rk4_step(&gen, &x, h);
        let pops = [x[0], x[1], 1.0 - x[0] - x[1]];
        if pops.iter().any(|p| !(-0.01..=1.01).contains(p)) {
            return Err(Error::StepTooLarge(format!(
                "population left [-0.01, 1.01] at t = {} with dt = {h}",
                (n + 1) as f64 * h
            )));
        }
        observe((n + 1) as f64 * h, &from_coords(&x));
    }
    Ok(from_coords(&x))
}

fn rk4_step(gen: &Liouvillian, x: &Coords, h: f64) -> Coords {
    let k1 = gen.apply(x);
    let k2 = gen.apply(&(x + k1 * (h / 2.0)));
    let k3 = gen.apply(&(x + k2 * (h / 2.0)));
    let k4 = gen.apply(&(x + k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}
