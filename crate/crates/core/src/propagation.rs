//! Probe propagation through a mixed-chirality medium.
//!
//! Depth is measured in optical depth `ζ`, so the 1–2 probe obeys
//! `∂Ω21/∂ζ = iΓ21 ⟨σ21⟩ e^{−iθ21}` and the 1–3 probe carries the extra dipole
//! ratio `A`. `⟨·⟩` is the fraction-weighted mixture of the two enantiomers.
//! The control field is not depleted.

use num_complex::Complex64;

use crate::bloch::{self, VelocityShift};
use crate::error::{Error, Result};
use crate::model::{DriveConfig, Handedness, MediumConfig, MoleculeParams};

/// Probe and control amplitudes at one depth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldState {
    pub omega21: Complex64,
    pub omega31: Complex64,
    pub omega32: Complex64,
    pub zeta: f64,
}

impl FieldState {
    /// Fields entering the medium. The probes are taken real and the loop
    /// phase is carried by the control, `Ω32 = |Ω32| e^{−iΘ}`.
    pub fn entry(drive: &DriveConfig) -> Self {
        Self {
            omega21: Complex64::new(drive.omega21_abs, 0.0),
            omega31: Complex64::new(drive.omega31_abs, 0.0),
            omega32: Complex64::from_polar(drive.omega32_abs, -drive.theta()),
            zeta: 0.0,
        }
    }

    /// Loop phase `Θ = θ32 + θ21 − θ31` with `θ_ij = −arg Ω_ij`. A vanishing
    /// probe contributes zero phase.
    pub fn loop_phase(&self) -> f64 {
        let arg = |z: Complex64| if z.norm() > 0.0 { z.arg() } else { 0.0 };
        arg(self.omega31) - arg(self.omega21) - arg(self.omega32)
    }

    /// Local drive seen by the molecules at this depth.
    pub fn local_drive(&self, delta: f64) -> Result<DriveConfig> {
        DriveConfig::new(
            self.omega21.norm(),
            self.omega31.norm(),
            self.omega32.norm(),
            delta,
            self.loop_phase(),
        )
    }

    /// Combined probe power `|Ω21|² + |Ω31|²/A`, which a passive medium can
    /// only reduce.
    pub fn probe_power(&self, dipole_ratio: f64) -> f64 {
        self.omega21.norm_sqr() + self.omega31.norm_sqr() / dipole_ratio
    }
}

/// Transmission `|Ω21(exit)|² / |Ω21(entry)|²` of the 1–2 probe.
pub fn transmission(entry: &FieldState, exit: &FieldState) -> Result<f64> {
    let denom = entry.omega21.norm_sqr();
    if denom == 0.0 {
        return Err(Error::ZeroEntryField);
    }
    Ok(exit.omega21.norm_sqr() / denom)
}

/// How `λ21`, `λ31` and `Z` enter the linearised equations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LambdaMode {
    /// `λ21 = γ12 − iΔ`, `λ31 = γ13 − iΔ`.
    #[default]
    Exact,
    /// Strong-control approximation `λ21 ≃ λ31 ≃ −iΔ`, `Z ≃ −iΔ(γ12 + γ13)`,
    /// meant for the characteristic detunings `Δ = ∓|Ω32|/2`.
    LargeControl,
}

/// Coefficient matrix `K` of `d(Ω21, Ω31)/dζ = K (Ω21, Ω31)`.
pub type Coefficients = [[Complex64; 2]; 2];

fn check_medium(mol: &MoleculeParams) -> Result<()> {
    if mol.gamma21_pop > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "optical depth is normalised by the 2→1 relaxation rate, which must be positive",
        ))
    }
}

/// Linearised propagation coefficients for the enantiomer mixture.
pub fn linear_coefficients(
    mol: &MoleculeParams,
    medium: &MediumConfig,
    omega32: Complex64,
    delta: f64,
    mode: LambdaMode,
) -> Result<Coefficients> {
    linear_coefficients_shifted(mol, medium, omega32, delta, mode, VelocityShift::AT_REST)
}

/// As [`linear_coefficients`] for one velocity class.
pub fn linear_coefficients_shifted(
    mol: &MoleculeParams,
    medium: &MediumConfig,
    omega32: Complex64,
    delta: f64,
    mode: LambdaMode,
    shift: VelocityShift,
) -> Result<Coefficients> {
    check_medium(mol)?;
    let i = Complex64::i();
    let d21 = delta - shift.probe21;
    let d31 = delta - shift.probe31();
    let (l21, l31, z) = match mode {
        LambdaMode::Exact => {
            let l21 = Complex64::new(mol.gamma12, -d21);
            let l31 = Complex64::new(mol.gamma13, -d31);
            (l21, l31, 0.25 * omega32.norm_sqr() + l21 * l31)
        }
        LambdaMode::LargeControl => {
            let l21 = Complex64::new(0.0, -d21);
            let l31 = Complex64::new(0.0, -d31);
            (
                l21,
                l31,
                Complex64::new(0.0, -delta * (mol.gamma12 + mol.gamma13)),
            )
        }
    };
    if z.norm() < 1e-14 {
        return Err(Error::DegenerateDenominator(z.norm()));
    }
    let g = mol.gamma21_pop;
    let a = medium.dipole_ratio;
    let dp = medium.dp();
    Ok([
        [
            -g * l31 / (2.0 * z),
            -i * g * omega32.conj() * dp / (4.0 * z),
        ],
        [
            -i * a * g * omega32 * dp / (4.0 * z),
            -a * g * l21 / (2.0 * z),
        ],
    ])
}

/// `exp(K ζ)` for a 2×2 complex matrix.
pub fn expm2(k: &Coefficients, zeta: f64) -> Coefficients {
    let mu = 0.5 * (k[0][0] + k[1][1]);
    let half_diff = 0.5 * (k[0][0] - k[1][1]);
    let q = (half_diff * half_diff + k[0][1] * k[1][0]).sqrt();
    let qz = q * zeta;
    let cosh = qz.cosh();
    // sinh(qζ)/q, even in q
    let sinhc = if qz.norm() < 1e-4 {
        let q2 = qz * qz;
        zeta * (1.0 + q2 / 6.0 + q2 * q2 / 120.0)
    } else {
        qz.sinh() / q
    };
    let scale = (mu * zeta).exp();
    [
        [scale * (cosh + sinhc * half_diff), scale * sinhc * k[0][1]],
        [scale * sinhc * k[1][0], scale * (cosh - sinhc * half_diff)],
    ]
}

fn apply(m: &Coefficients, v: [Complex64; 2]) -> [Complex64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// Closed-form solution of the linearised probe equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPropagator {
    pub entry: FieldState,
    pub coefficients: Coefficients,
}

impl LinearPropagator {
    pub fn new(
        mol: &MoleculeParams,
        medium: &MediumConfig,
        drive: &DriveConfig,
        mode: LambdaMode,
    ) -> Result<Self> {
        let entry = FieldState::entry(drive);
        let coefficients = linear_coefficients(mol, medium, entry.omega32, drive.delta, mode)?;
        Ok(Self {
            entry,
            coefficients,
        })
    }

    pub fn with_coefficients(drive: &DriveConfig, coefficients: Coefficients) -> Self {
        Self {
            entry: FieldState::entry(drive),
            coefficients,
        }
    }

    pub fn field_at(&self, zeta: f64) -> FieldState {
        let [omega21, omega31] = apply(
            &expm2(&self.coefficients, zeta),
            [self.entry.omega21, self.entry.omega31],
        );
        FieldState {
            omega21,
            omega31,
            omega32: self.entry.omega32,
            zeta,
        }
    }
}

fn check_grid(zeta_grid: &[f64]) -> Result<()> {
    if zeta_grid.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
        return Err(Error::invalid(
            "optical depths must be finite and non-negative",
        ));
    }
    Ok(())
}

/// Fields at each requested depth from the linearised equations.
pub fn propagate_linear(
    medium: &MediumConfig,
    mol: &MoleculeParams,
    drive: &DriveConfig,
    zeta_grid: &[f64],
) -> Result<Vec<FieldState>> {
    propagate_linear_with(medium, mol, drive, zeta_grid, LambdaMode::Exact)
}

pub fn propagate_linear_with(
    medium: &MediumConfig,
    mol: &MoleculeParams,
    drive: &DriveConfig,
    zeta_grid: &[f64],
    mode: LambdaMode,
) -> Result<Vec<FieldState>> {
    check_grid(zeta_grid)?;
    let prop = LinearPropagator::new(mol, medium, drive, mode)?;
    Ok(zeta_grid.iter().map(|&z| prop.field_at(z)).collect())
}

/// Default depth step of the full engine.
pub const DEFAULT_FULL_STEP: f64 = 0.01;

/// Largest relative field change tolerated in a single step.
pub const MAX_STEP_CHANGE: f64 = 0.2;

/// `d(Ω21, Ω31)/dζ` from the exact steady states of both enantiomers.
fn full_rhs(
    mol: &MoleculeParams,
    medium: &MediumConfig,
    delta: f64,
    fields: [Complex64; 2],
    omega32: Complex64,
) -> Result<[Complex64; 2]> {
    let state = FieldState {
        omega21: fields[0],
        omega31: fields[1],
        omega32,
        zeta: 0.0,
    };
    let drive = state.local_drive(delta)?;
    let mut mix21 = Complex64::new(0.0, 0.0);
    let mut mix31 = Complex64::new(0.0, 0.0);
    for hand in [Handedness::Left, Handedness::Right] {
        let weight = medium.fraction(hand);
        if weight == 0.0 {
            continue;
        }
        let sigma = bloch::steady_state(mol, &drive, hand)?;
        mix21 += weight * sigma.get(2, 1);
        mix31 += weight * sigma.get(3, 1);
    }
    // e^{−iθij} = Ω_ij / |Ω_ij|; any phase works for a vanishing field
    let unit = |z: Complex64| {
        if z.norm() > 0.0 {
            z / z.norm()
        } else {
            Complex64::new(1.0, 0.0)
        }
    };
    let i = Complex64::i();
    let g = mol.gamma21_pop;
    Ok([
        i * g * mix21 * unit(fields[0]),
        i * medium.dipole_ratio * g * mix31 * unit(fields[1]),
    ])
}

/// Integrate the probes with classical RK4 in `ζ`, recomputing both
/// enantiomers' steady states from the local fields at every stage. Returns
/// the fields at each depth of `zeta_grid`, which must be non-decreasing.
pub fn propagate_full(
    medium: &MediumConfig,
    mol: &MoleculeParams,
    drive: &DriveConfig,
    zeta_grid: &[f64],
    step: f64,
) -> Result<Vec<FieldState>> {
    check_medium(mol)?;
    check_grid(zeta_grid)?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!(
            "depth step must be positive, got {step}"
        )));
    }
    if zeta_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("depth grid must be non-decreasing"));
    }
    let entry = FieldState::entry(drive);
    let omega32 = entry.omega32;
    let delta = drive.delta;
    let rhs = |f: [Complex64; 2]| full_rhs(mol, medium, delta, f, omega32);
    let axpy = |f: [Complex64; 2], h: f64, k: [Complex64; 2]| [f[0] + h * k[0], f[1] + h * k[1]];

    let mut fields = [entry.omega21, entry.omega31];
    let mut zeta = 0.0;
    let mut out = Vec::with_capacity(zeta_grid.len());
    for &target in zeta_grid {
        let span = target - zeta;
        let steps = (span / step).ceil() as usize;
        if steps > 0 {
            let h = span / steps as f64;
            for _ in 0..steps {
                let k1 = rhs(fields)?;
                let k2 = rhs(axpy(fields, h / 2.0, k1))?;
                let k3 = rhs(axpy(fields, h / 2.0, k2))?;
                let k4 = rhs(axpy(fields, h, k3))?;
                let next = [
                    fields[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
                    fields[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
                ];
                let size = (fields[0].norm_sqr() + fields[1].norm_sqr()).sqrt();
                let change =
                    ((next[0] - fields[0]).norm_sqr() + (next[1] - fields[1]).norm_sqr()).sqrt();
                if size > 0.0 && change > MAX_STEP_CHANGE * size {
                    return Err(Error::StepTooLarge(format!(
                        "probe fields changed by {:.1}% in one depth step of {h}",
                        100.0 * change / size
                    )));
                }
                fields = next;
            }
        }
        zeta = target;
        out.push(FieldState {
            omega21: fields[0],
            omega31: fields[1],
            omega32,
            zeta,
        });
    }
    Ok(out)
}

/// [`propagate_full`] with a step-halving self check: the run is repeated at
/// half the step and must agree to `rel_tol` relative in every field.
pub fn propagate_full_checked(
    medium: &MediumConfig,
    mol: &MoleculeParams,
    drive: &DriveConfig,
    zeta_grid: &[f64],
    step: f64,
    rel_tol: f64,
) -> Result<Vec<FieldState>> {
    let coarse = propagate_full(medium, mol, drive, zeta_grid, step)?;
    let fine = propagate_full(medium, mol, drive, zeta_grid, step / 2.0)?;
    for (c, f) in coarse.iter().zip(&fine) {
        let scale = f.omega21.norm().max(f.omega31.norm()).max(1e-300);
        let diff = (c.omega21 - f.omega21)
            .norm()
            .max((c.omega31 - f.omega31).norm());
        if diff > rel_tol * scale {
            return Err(Error::StepTooLarge(format!(
                "halving the depth step changed the fields by {:e} relative at ζ = {}",
                diff / scale,
                f.zeta
            )));
        }
    }
    Ok(fine)
}
