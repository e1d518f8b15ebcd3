//! Domain types shared by the solvers.
//!
//! Every rate, Rabi frequency and detuning is dimensionless, measured in units
//! of a reference rate `γ`; times are in units of `1/γ`. Propagation distance
//! only enters through the optical depth `ζ`.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hermiticity tolerance for [`DensityMatrix::check`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Trace tolerance for [`DensityMatrix::check`].
pub const TRACE_TOL: f64 = 1e-10;
/// Smallest eigenvalue accepted as positive semidefinite.
pub const POSITIVITY_TOL: f64 = -1e-9;

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter(msg()))
    }
}

/// Relaxation and dephasing rates of the three-level system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoleculeParams {
    /// Population relaxation |3⟩ → |1⟩.
    pub gamma31_pop: f64,
    /// Population relaxation |2⟩ → |1⟩.
    pub gamma21_pop: f64,
    /// Population relaxation |3⟩ → |2⟩.
    pub gamma32_pop: f64,
    /// Decay of the 1–2 coherence.
    pub gamma12: f64,
    /// Decay of the 1–3 coherence.
    pub gamma13: f64,
    /// Decay of the 2–3 coherence.
    pub gamma23: f64,
}

impl MoleculeParams {
    pub fn new(
        gamma31_pop: f64,
        gamma21_pop: f64,
        gamma32_pop: f64,
        gamma12: f64,
        gamma13: f64,
        gamma23: f64,
    ) -> Result<Self> {
        let params = Self {
            gamma31_pop,
            gamma21_pop,
            gamma32_pop,
            gamma12,
            gamma13,
            gamma23,
        };
        params.validate()?;
        Ok(params)
    }

    /// Rates for a closed system whose coherences decay only through the
    /// population relaxation: `γ12 = Γ21/2`, `γ13 = (Γ31+Γ32)/2`,
    /// `γ23 = (Γ21+Γ31+Γ32)/2`.
    pub fn default_closed(gamma31_pop: f64, gamma21_pop: f64, gamma32_pop: f64) -> Result<Self> {
        Self::new(
            gamma31_pop,
            gamma21_pop,
            gamma32_pop,
            gamma21_pop / 2.0,
            (gamma31_pop + gamma32_pop) / 2.0,
            (gamma21_pop + gamma31_pop + gamma32_pop) / 2.0,
        )
    }

    /// All population rates equal to `γ`, coherences from [`Self::default_closed`].
    pub fn reference() -> Self {
        Self::default_closed(1.0, 1.0, 1.0).expect("unit rates are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("gamma31_pop", self.gamma31_pop),
            ("gamma21_pop", self.gamma21_pop),
            ("gamma32_pop", self.gamma32_pop),
            ("gamma12", self.gamma12),
            ("gamma13", self.gamma13),
            ("gamma23", self.gamma23),
        ];
        for (name, value) in rates {
            require(value.is_finite() && value >= 0.0, || {
                format!("{name} must be finite and non-negative, got {value}")
            })?;
        }
        require(
            self.gamma31_pop > 0.0 || self.gamma21_pop > 0.0 || self.gamma32_pop > 0.0,
            || "at least one population relaxation rate must be positive".into(),
        )
    }

    /// Smallest strictly positive rate, used to size relaxation times.
    pub fn min_positive_rate(&self) -> f64 {
        [
            self.gamma31_pop,
            self.gamma21_pop,
            self.gamma32_pop,
            self.gamma12,
            self.gamma13,
            self.gamma23,
        ]
        .into_iter()
        .filter(|r| *r > 0.0)
        .fold(f64::INFINITY, f64::min)
    }

    pub fn max_rate(&self) -> f64 {
        [
            self.gamma31_pop,
            self.gamma21_pop,
            self.gamma32_pop,
            self.gamma12,
            self.gamma13,
            self.gamma23,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Enantiomer handedness. The two forms see loop phases differing by `π`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Handedness {
    Left,
    Right,
}

impl Handedness {
    pub fn effective_theta(self, theta: f64) -> f64 {
        match self {
            Handedness::Left => wrap_phase(theta),
            Handedness::Right => wrap_phase(theta + PI),
        }
    }

    /// `+1` for left-handed, `-1` for right-handed molecules.
    pub fn sign(self) -> f64 {
        match self {
            Handedness::Left => 1.0,
            Handedness::Right => -1.0,
        }
    }
}

/// Reduce a phase to `[0, 2π)`.
pub fn wrap_phase(theta: f64) -> f64 {
    let wrapped = theta.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if wrapped >= TAU {
        0.0
    } else {
        wrapped
    }
}

/// Amplitudes of the three drives, the shared probe detuning and the loop
/// phase `Θ = θ32 + θ21 − θ31`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveConfig {
    pub omega21_abs: f64,
    pub omega31_abs: f64,
    pub omega32_abs: f64,
    pub delta: f64,
    theta: f64,
}

impl DriveConfig {
    pub fn new(
        omega21_abs: f64,
        omega31_abs: f64,
        omega32_abs: f64,
        delta: f64,
        theta: f64,
    ) -> Result<Self> {
        for (name, value) in [
            ("omega21_abs", omega21_abs),
            ("omega31_abs", omega31_abs),
            ("omega32_abs", omega32_abs),
        ] {
            require(value.is_finite() && value >= 0.0, || {
                format!("{name} must be finite and non-negative, got {value}")
            })?;
        }
        require(delta.is_finite(), || {
            format!("detuning must be finite, got {delta}")
        })?;
        require(theta.is_finite(), || {
            format!("theta must be finite, got {theta}")
        })?;
        Ok(Self {
            omega21_abs,
            omega31_abs,
            omega32_abs,
            delta,
            theta: wrap_phase(theta),
        })
    }

    /// Equal probes of amplitude `probe`, a resonant control and `Θ = 0`.
    pub fn probe_condition(probe: f64, omega32_abs: f64, delta: f64) -> Result<Self> {
        Self::new(probe, probe, omega32_abs, delta, 0.0)
    }

    /// Loop phase in `[0, 2π)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = wrap_phase(theta);
        self
    }

    pub fn with_probes(mut self, omega21_abs: f64, omega31_abs: f64) -> Self {
        self.omega21_abs = omega21_abs;
        self.omega31_abs = omega31_abs;
        self
    }

    pub fn probe_condition_holds(&self) -> bool {
        validate_probe_condition(self)
    }
}

/// Equal probe amplitudes (relative tolerance `1e-12`) and `Θ ≡ 0 (mod 2π)`.
pub fn validate_probe_condition(drive: &DriveConfig) -> bool {
    let (a, b) = (drive.omega21_abs, drive.omega31_abs);
    let scale = a.abs().max(b.abs());
    let amplitudes_equal = (a - b).abs() <= 1e-12 * scale;
    let theta = wrap_phase(drive.theta);
    let phase_zero = theta.min(TAU - theta) <= 1e-12;
    amplitudes_equal && phase_zero
}

/// A 3×3 density matrix in the rotating frame, `σ[(i, j)] = σ_{i+1, j+1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix(pub Matrix3<Complex64>);

impl DensityMatrix {
    /// Pure state `|level⟩⟨level|` with `level` in `1..=3`.
    pub fn pure(level: usize) -> Self {
        assert!((1..=3).contains(&level), "level must be 1, 2 or 3");
        let mut m = Matrix3::zeros();
        m[(level - 1, level - 1)] = Complex64::new(1.0, 0.0);
        Self(m)
    }

    /// Element `σ_ij` with one-based indices.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i - 1, j - 1)]
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.0;
        let mut worst = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.min()
    }

    /// Check Hermiticity, unit trace and positivity at the crate tolerances.
    pub fn check(&self) -> Result<()> {
        let herm = self.hermiticity_error();
        require(herm <= HERMITIAN_TOL, || format!("not Hermitian: {herm:e}"))?;
        let tr = (self.trace() - 1.0).norm();
        require(tr <= TRACE_TOL, || {
            format!("trace deviates from 1 by {tr:e}")
        })?;
        let min = self.min_eigenvalue();
        require(min >= POSITIVITY_TOL, || {
            format!("negative eigenvalue {min:e}")
        })
    }

    /// Undo the per-coherence field phases: `ρ31 = σ31 e^{iΘ}`, other entries
    /// unchanged. Positivity holds for this matrix, not for `σ` itself.
    pub fn lab_frame(&self, theta: f64) -> DensityMatrix {
        let mut m = self.0;
        let phase = Complex64::from_polar(1.0, theta);
        m[(2, 0)] *= phase;
        m[(0, 2)] *= phase.conj();
        DensityMatrix(m)
    }

    /// [`Self::check`] on the lab-frame matrix for loop phase `theta`.
    pub fn check_physical(&self, theta: f64) -> Result<()> {
        self.lab_frame(theta).check()
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        (self.0 - other.0)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Composition and optical thickness of the mixed-chirality medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumConfig {
    p_plus: f64,
    p_minus: f64,
    pub zeta: f64,
    /// `A = μ31²ν31 / (μ21²ν21)`.
    pub dipole_ratio: f64,
}

impl MediumConfig {
    pub fn new(p_plus: f64, p_minus: f64, zeta: f64, dipole_ratio: f64) -> Result<Self> {
        for (name, p) in [("p_plus", p_plus), ("p_minus", p_minus)] {
            require((0.0..=1.0).contains(&p), || {
                format!("{name} must lie in [0, 1], got {p}")
            })?;
        }
        require((p_plus + p_minus - 1.0).abs() <= 1e-12, || {
            format!("fractions must sum to 1, got {}", p_plus + p_minus)
        })?;
        require(zeta.is_finite() && zeta >= 0.0, || {
            format!("optical depth must be finite and non-negative, got {zeta}")
        })?;
        require(dipole_ratio.is_finite() && dipole_ratio > 0.0, || {
            format!("dipole ratio must be positive, got {dipole_ratio}")
        })?;
        Ok(Self {
            p_plus,
            p_minus,
            zeta,
            dipole_ratio,
        })
    }

    /// Medium with enantiomeric difference `dp`, i.e. `p± = (1 ± dp)/2`.
    pub fn from_dp(dp: f64, zeta: f64, dipole_ratio: f64) -> Result<Self> {
        require((-1.0..=1.0).contains(&dp), || {
            format!("enantiomeric difference must lie in [-1, 1], got {dp}")
        })?;
        Self::new((1.0 + dp) / 2.0, (1.0 - dp) / 2.0, zeta, dipole_ratio)
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    /// Fraction of the given handedness.
    pub fn fraction(&self, hand: Handedness) -> f64 {
        match hand {
            Handedness::Left => self.p_plus,
            Handedness::Right => self.p_minus,
        }
    }

    pub fn dp(&self) -> f64 {
        self.p_plus - self.p_minus
    }

    pub fn with_zeta(mut self, zeta: f64) -> Result<Self> {
        self.zeta = zeta;
        Self::new(self.p_plus, self.p_minus, zeta, self.dipole_ratio)
    }

    pub fn with_dp(&self, dp: f64) -> Result<Self> {
        Self::from_dp(dp, self.zeta, self.dipole_ratio)
    }

    /// The same medium with the enantiomer fractions exchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            p_plus: self.p_minus,
            p_minus: self.p_plus,
            ..*self
        }
    }
}

/// One detuning of a probe spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub delta: f64,
    pub transmission: f64,
    pub absorption: f64,
    /// `I / (h⁺ + h⁻)`; `NaN` until peaks are known.
    pub normalized: f64,
}

/// Characteristic peak record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peaks {
    /// Detuning of the left-handed marker, `−|Ω32|/2`.
    pub delta_plus: f64,
    /// Detuning of the right-handed marker, `+|Ω32|/2`.
    pub delta_minus: f64,
    pub h_plus: f64,
    pub h_minus: f64,
    pub h_tilde_plus: f64,
    pub h_tilde_minus: f64,
    pub dp_prime: f64,
}

impl Peaks {
    /// Normalise raw heights. Fails when the heights sum below `1e-12`.
    pub fn from_heights(h_plus: f64, h_minus: f64, omega32_abs: f64) -> Result<Self> {
        let total = h_plus + h_minus;
        if !(total >= 1e-12) {
            return Err(Error::DegenerateSpectrum(total));
        }
        let h_tilde_plus = h_plus / total;
        let h_tilde_minus = 1.0 - h_tilde_plus;
        Ok(Self {
            delta_plus: -omega32_abs / 2.0,
            delta_minus: omega32_abs / 2.0,
            h_plus,
            h_minus,
            h_tilde_plus,
            h_tilde_minus,
            dp_prime: h_tilde_plus - h_tilde_minus,
        })
    }
}

/// A swept probe spectrum with its characteristic peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    pub points: Vec<SpectrumPoint>,
    /// `None` when the medium does not absorb at either marker.
    pub peaks: Option<Peaks>,
}

impl SpectrumResult {
    pub fn deltas(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.delta)
    }
}
