//! Closed-form weak-probe coherences and characteristic peak heights.

use num_complex::Complex64;

use crate::bloch::{Detunings, VelocityShift};
use crate::error::{Error, Result};
use crate::model::{DriveConfig, Handedness, MediumConfig, MoleculeParams};

/// Below this `B` the peak-height formula switches to its series limit.
pub const DEGENERATE_B: f64 = 1e-12;

/// First-order probe coherences of one enantiomer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakProbeCoherences {
    pub sigma21: Complex64,
    pub sigma31: Complex64,
    /// `Z = |Ω32|²/4 + λ21 λ31`.
    pub z: Complex64,
}

/// `σ21` split into its ladder-EIT and two-photon parametric parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigma21Parts {
    pub eit: Complex64,
    pub parametric: Complex64,
}

fn lambdas(mol: &MoleculeParams, det: Detunings) -> (Complex64, Complex64) {
    (
        Complex64::new(mol.gamma12, -det.d21),
        Complex64::new(mol.gamma13, -det.d31),
    )
}

fn denominator(mol: &MoleculeParams, drive: &DriveConfig, det: Detunings) -> Result<Complex64> {
    let (l21, l31) = lambdas(mol, det);
    let z = 0.25 * drive.omega32_abs * drive.omega32_abs + l21 * l31;
    if z.norm() < 1e-14 {
        return Err(Error::DegenerateDenominator(z.norm()));
    }
    Ok(z)
}

/// Weak-probe coherences for a molecule moving with Doppler shift `shift`.
pub fn weak_coherences_shifted(
    mol: &MoleculeParams,
    drive: &DriveConfig,
    hand: Handedness,
    shift: VelocityShift,
) -> Result<WeakProbeCoherences> {
    let det = Detunings::new(drive.delta, shift);
    let (l21, l31) = lambdas(mol, det);
    let z = denominator(mol, drive, det)?;
    let i = Complex64::i();
    let sign = hand.sign();
    let phase = Complex64::from_polar(1.0, drive.theta());
    let (a, p, g) = (drive.omega21_abs, drive.omega31_abs, drive.omega32_abs);

    let sigma21 = i * l31 * a / (2.0 * z) - sign * p * g * phase / (4.0 * z);
    let sigma31 = i * l21 * p / (2.0 * z) - sign * a * g * phase.conj() / (4.0 * z);
    Ok(WeakProbeCoherences {
        sigma21,
        sigma31,
        z,
    })
}

pub fn weak_coherences(
    mol: &MoleculeParams,
    drive: &DriveConfig,
    hand: Handedness,
) -> Result<WeakProbeCoherences> {
    weak_coherences_shifted(mol, drive, hand, VelocityShift::AT_REST)
}

/// `σ21` to first order in the probes.
pub fn sigma21_weak(
    mol: &MoleculeParams,
    drive: &DriveConfig,
    hand: Handedness,
) -> Result<Complex64> {
    Ok(weak_coherences(mol, drive, hand)?.sigma21)
}

/// `σ31` to first order in the probes.
pub fn sigma31_weak(
    mol: &MoleculeParams,
    drive: &DriveConfig,
    hand: Handedness,
) -> Result<Complex64> {
    Ok(weak_coherences(mol, drive, hand)?.sigma31)
}

/// EIT and parametric contributions to `σ21` of the left-handed molecule; the
/// right-handed one sees `eit − parametric`.
pub fn sigma21_parts(mol: &MoleculeParams, drive: &DriveConfig) -> Result<Sigma21Parts> {
    let det = Detunings::new(drive.delta, VelocityShift::AT_REST);
    let (_, l31) = lambdas(mol, det);
    let z = denominator(mol, drive, det)?;
    let phase = Complex64::from_polar(1.0, drive.theta());
    Ok(Sigma21Parts {
        eit: Complex64::i() * l31 * drive.omega21_abs / (2.0 * z),
        parametric: -drive.omega31_abs * drive.omega32_abs * phase / (4.0 * z),
    })
}

/// Dimensionless constants of the peak-height formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakHeightConstants {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// `Γ21 / (2(γ12 + γ13))`, so that `C = k(1 + A + √B)` and `D = k√B`.
    pub k: f64,
}

impl PeakHeightConstants {
    pub fn new(mol: &MoleculeParams, medium: &MediumConfig) -> Self {
        let a = medium.dipole_ratio;
        let dp = medium.dp();
        let b = ((1.0 - a) * (1.0 - a) + 4.0 * a * dp * dp).max(0.0);
        let k = mol.gamma21_pop / (2.0 * (mol.gamma12 + mol.gamma13));
        let root = b.sqrt();
        Self {
            a,
            b,
            c: k * (1.0 + a + root),
            d: k * root,
            k,
        }
    }
}

/// Which closed form evaluates the peak heights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeightBranch {
    /// Series form when `B` falls below [`DEGENERATE_B`], direct otherwise.
    #[default]
    Auto,
    Direct,
    /// Expansion about `B = 0`.
    Series,
}

/// Peak heights `(h⁺, h⁻)` in the large-control limit, valid at any optical
/// depth.
pub fn peak_heights(mol: &MoleculeParams, medium: &MediumConfig) -> (f64, f64) {
    peak_heights_with(mol, medium, HeightBranch::Auto)
}

pub fn peak_heights_with(
    mol: &MoleculeParams,
    medium: &MediumConfig,
    branch: HeightBranch,
) -> (f64, f64) {
    let consts = PeakHeightConstants::new(mol, medium);
    let height = match branch {
        HeightBranch::Direct => direct_height,
        HeightBranch::Series => series_height,
        HeightBranch::Auto if consts.b < DEGENERATE_B => series_height,
        HeightBranch::Auto => direct_height,
    };
    let dp = medium.dp();
    (
        height(&consts, 1.0 - consts.a + 2.0 * dp, medium.zeta),
        height(&consts, 1.0 - consts.a - 2.0 * dp, medium.zeta),
    )
}

/// `q = 1 − A ± 2δp` selects the peak.
fn direct_height(consts: &PeakHeightConstants, q: f64, zeta: f64) -> f64 {
    let root = consts.b.sqrt();
    let grow = (consts.d * zeta).exp();
    let bracket = q * (1.0 - grow) + root * (1.0 + grow);
    1.0 - (-consts.c * zeta).exp() * bracket * bracket / (4.0 * consts.b)
}

/// Limit of [`direct_height`] as `B → 0`. With `x = Dζ` the bracket over `2√B`
/// equals `(1 + eˣ − q k ζ (eˣ − 1)/x) / 2`; both exponentials are expanded to
/// second order in `x`.
fn series_height(consts: &PeakHeightConstants, q: f64, zeta: f64) -> f64 {
    let x = consts.d * zeta;
    let grow = 1.0 + x + 0.5 * x * x;
    let expm1_over_x = 1.0 + 0.5 * x + x * x / 6.0;
    let half_bracket = 0.5 * (1.0 + grow - q * consts.k * zeta * expm1_over_x);
    1.0 - (-consts.c * zeta).exp() * half_bracket * half_bracket
}

/// Optically thin limit: `h± ≈ 2Γ21ζ p± / (γ12 + γ13)`.
pub fn peak_heights_linear(mol: &MoleculeParams, medium: &MediumConfig) -> (f64, f64) {
    let slope = 2.0 * mol.gamma21_pop * medium.zeta / (mol.gamma12 + mol.gamma13);
    (slope * medium.p_plus(), slope * medium.p_minus())
}
