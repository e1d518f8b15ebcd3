//! Detuning sweeps, characteristic peaks and enantiomeric-excess calibration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::doppler::{DopplerAverager, DopplerConfig};
use crate::error::{Error, Result};
use crate::model::{
    DriveConfig, MediumConfig, MoleculeParams, Peaks, SpectrumPoint, SpectrumResult,
};
use crate::propagation::{
    self, linear_coefficients_shifted, FieldState, LambdaMode, LinearPropagator, DEFAULT_FULL_STEP,
};

/// Propagation engine used for a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Closed-form solution of the linearised probe equations.
    Linear,
    /// RK4 in depth over exact steady states.
    #[default]
    Full,
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Engine::Linear),
            "full" => Ok(Engine::Full),
            other => Err(Error::invalid(format!(
                "unknown engine {other:?}, expected \"linear\" or \"full\""
            ))),
        }
    }
}

/// Engine choice plus its numerical knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solver {
    pub engine: Engine,
    /// Depth step of the full engine.
    pub full_step: f64,
}

impl Solver {
    pub fn new(engine: Engine) -> Self {
        Self {
            engine,
            full_step: DEFAULT_FULL_STEP,
        }
    }

    /// Probe transmission at one detuning after the whole medium.
    pub fn transmission(
        &self,
        medium: &MediumConfig,
        mol: &MoleculeParams,
        drive_template: &DriveConfig,
        delta: f64,
    ) -> Result<f64> {
        let drive = drive_template.with_delta(delta);
        let entry = FieldState::entry(&drive);
        let exit = match self.engine {
            Engine::Linear => {
                LinearPropagator::new(mol, medium, &drive, LambdaMode::Exact)?.field_at(medium.zeta)
            }
            Engine::Full => {
                propagation::propagate_full(medium, mol, &drive, &[medium.zeta], self.full_step)?[0]
            }
        };
        propagation::transmission(&entry, &exit)
    }

    /// Raw heights `(h⁺, h⁻)`: absorption at `Δ = −|Ω32|/2` and `+|Ω32|/2`.
    pub fn peak_heights(
        &self,
        medium: &MediumConfig,
        mol: &MoleculeParams,
        drive_template: &DriveConfig,
    ) -> Result<(f64, f64)> {
        let half = drive_template.omega32_abs / 2.0;
        let t_plus = self.transmission(medium, mol, drive_template, -half)?;
        let t_minus = self.transmission(medium, mol, drive_template, half)?;
        Ok((1.0 - t_plus, 1.0 - t_minus))
    }

    pub fn peaks(
        &self,
        medium: &MediumConfig,
        mol: &MoleculeParams,
        drive_template: &DriveConfig,
    ) -> Result<Peaks> {
        let (hp, hm) = self.peak_heights(medium, mol, drive_template)?;
        Peaks::from_heights(hp, hm, drive_template.omega32_abs)
    }

    /// Spectroscopic estimate `δp′` for a medium.
    pub fn dp_prime(
        &self,
        medium: &MediumConfig,
        mol: &MoleculeParams,
        drive_template: &DriveConfig,
    ) -> Result<f64> {
        Ok(self.peaks(medium, mol, drive_template)?.dp_prime)
    }
}

impl Default for Solver {
    fn default() -> Self {
        Self::new(Engine::default())
    }
}

fn check_delta_grid(delta_grid: &[f64]) -> Result<()> {
    if delta_grid.is_empty() {
        return Err(Error::invalid("detuning grid is empty"));
    }
    if delta_grid.iter().any(|d| !d.is_finite()) {
        return Err(Error::invalid("detuning grid must be finite"));
    }
    if delta_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("detuning grid must be sorted"));
    }
    Ok(())
}

fn check_template(drive: &DriveConfig) -> Result<()> {
    if drive.probe_condition_holds() {
        Ok(())
    } else {
        Err(Error::invalid(
            "entry drives must have equal probe amplitudes and zero loop phase",
        ))
    }
}

/// `n` evenly spaced points on `[min, max]`.
pub fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    max
                } else {
                    min + (max - min) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

fn assemble(delta_grid: &[f64], transmissions: Vec<f64>, peaks: Option<Peaks>) -> SpectrumResult {
    let norm = peaks.map_or(f64::NAN, |p| p.h_plus + p.h_minus);
    let points = delta_grid
        .iter()
        .zip(transmissions)
        .map(|(&delta, t)| SpectrumPoint {
            delta,
            transmission: t,
            absorption: 1.0 - t,
            normalized: (1.0 - t) / norm,
        })
        .collect();
    SpectrumResult { points, peaks }
}

/// Transmission spectrum over `delta_grid` at the medium's full depth.
///
/// Peaks are read at the exact characteristic detunings; a medium without
/// absorption (`ζ = 0`) has no peaks and a `NaN` normalised column.
pub fn sweep(
    medium: &MediumConfig,
    mol: &MoleculeParams,
    drive_template: &DriveConfig,
    delta_grid: &[f64],
    solver: &Solver,
) -> Result<SpectrumResult> {
    check_delta_grid(delta_grid)?;
    check_template(drive_template)?;
    let transmissions = delta_grid
        .par_iter()
        .map(|&d| solver.transmission(medium, mol, drive_template, d))
        .collect::<Result<Vec<_>>>()?;
    let peaks = match solver.peaks(medium, mol, drive_template) {
        Ok(p) => Some(p),
        Err(Error::DegenerateSpectrum(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(assemble(delta_grid, transmissions, peaks))
}

/// Linear-engine spectrum of a thermal gas: the propagation coefficients are
/// averaged over velocity classes before solving.
pub fn doppler_sweep(
    medium: &MediumConfig,
    mol: &MoleculeParams,
    drive_template: &DriveConfig,
    delta_grid: &[f64],
    doppler: &DopplerConfig,
) -> Result<SpectrumResult> {
    check_delta_grid(delta_grid)?;
    check_template(drive_template)?;
    let averager = DopplerAverager::new(*doppler);
    let transmission = |delta: f64| -> Result<f64> {
        let drive = drive_template.with_delta(delta);
        let entry = FieldState::entry(&drive);
        let coefficients = averager.average(|shift| {
            linear_coefficients_shifted(mol, medium, entry.omega32, delta, LambdaMode::Exact, shift)
        })?;
        let exit = LinearPropagator::with_coefficients(&drive, coefficients).field_at(medium.zeta);
        propagation::transmission(&entry, &exit)
    };
    let transmissions = delta_grid
        .par_iter()
        .map(|&d| transmission(d))
        .collect::<Result<Vec<_>>>()?;
    let half = drive_template.omega32_abs / 2.0;
    let peaks = match Peaks::from_heights(
        1.0 - transmission(-half)?,
        1.0 - transmission(half)?,
        drive_template.omega32_abs,
    ) {
        Ok(p) => Some(p),
        Err(Error::DegenerateSpectrum(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(assemble(delta_grid, transmissions, peaks))
}

/// Absorption at `target` read from tabulated points: the exact sample when
/// one sits on the target, otherwise cubic interpolation through the four
/// nearest samples.
pub fn absorption_at(points: &[SpectrumPoint], target: f64) -> Result<f64> {
    let n = points.len();
    if n == 0 {
        return Err(Error::invalid("spectrum has no points"));
    }
    let (lo, hi) = (points[0].delta, points[n - 1].delta);
    let slack = 1e-9 * target.abs().max(1.0);
    if target < lo - slack || target > hi + slack {
        return Err(Error::invalid(format!(
            "detuning {target} lies outside the spectrum [{lo}, {hi}]"
        )));
    }
    if let Some(p) = points.iter().find(|p| (p.delta - target).abs() <= slack) {
        return Ok(p.absorption);
    }
    if n < 4 {
        return Err(Error::invalid(
            "need at least four points to interpolate between samples",
        ));
    }
    let right = points.partition_point(|p| p.delta < target);
    let start = right.saturating_sub(2).min(n - 4);
    let window = &points[start..start + 4];
    let mut value = 0.0;
    for (j, pj) in window.iter().enumerate() {
        let mut basis = 1.0;
        for (m, pm) in window.iter().enumerate() {
            if m != j {
                basis *= (target - pm.delta) / (pj.delta - pm.delta);
            }
        }
        value += basis * pj.absorption;
    }
    Ok(value)
}

/// Characteristic peaks of a tabulated spectrum.
pub fn extract_peaks(points: &[SpectrumPoint], omega32_abs: f64) -> Result<Peaks> {
    let half = omega32_abs / 2.0;
    let h_plus = absorption_at(points, -half)?;
    let h_minus = absorption_at(points, half)?;
    Peaks::from_heights(h_plus, h_minus, omega32_abs)
}

/// Number of samples in a default calibration curve.
pub const DEFAULT_CURVE_SAMPLES: usize = 41;

/// Everything needed to evaluate the forward model `δp → δp′`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardModel {
    pub medium: MediumConfig,
    pub mol: MoleculeParams,
    pub drive: DriveConfig,
    pub solver: Solver,
}

impl ForwardModel {
    pub fn new(
        medium: MediumConfig,
        mol: MoleculeParams,
        drive: DriveConfig,
        solver: Solver,
    ) -> Result<Self> {
        check_template(&drive)?;
        Ok(Self {
            medium,
            mol,
            drive,
            solver,
        })
    }

    pub fn dp_prime(&self, dp: f64) -> Result<f64> {
        let medium = self.medium.with_dp(dp)?;
        self.solver.dp_prime(&medium, &self.mol, &self.drive)
    }
}

/// Sampled monotone relation between `δp` and `δp′`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationCurve {
    pub dp: Vec<f64>,
    pub dp_prime: Vec<f64>,
}

/// Evaluate the forward model at each sample and require strict increase.
pub fn forward_curve(model: &ForwardModel, dp_samples: &[f64]) -> Result<CalibrationCurve> {
    if dp_samples.is_empty() {
        return Err(Error::invalid("no calibration samples"));
    }
    if dp_samples.iter().any(|d| !(-1.0..=1.0).contains(d)) {
        return Err(Error::invalid("calibration samples must lie in [-1, 1]"));
    }
    if dp_samples.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid(
            "calibration samples must be strictly increasing",
        ));
    }
    let dp_prime = dp_samples
        .par_iter()
        .map(|&dp| model.dp_prime(dp))
        .collect::<Result<Vec<_>>>()?;
    for (d, v) in dp_samples.windows(2).zip(dp_prime.windows(2)) {
        if !(v[1] > v[0]) {
            return Err(Error::NonMonotoneCurve {
                left: d[0],
                right: d[1],
            });
        }
    }
    Ok(CalibrationCurve {
        dp: dp_samples.to_vec(),
        dp_prime,
    })
}

/// Forward model plus its sampled curve, ready for inversion.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub model: ForwardModel,
    pub curve: CalibrationCurve,
}

impl Calibration {
    pub fn new(model: ForwardModel, dp_samples: &[f64]) -> Result<Self> {
        let curve = forward_curve(&model, dp_samples)?;
        Ok(Self { model, curve })
    }

    /// Calibration over the default uniform grid on `[−1, 1]`.
    pub fn with_default_grid(model: ForwardModel) -> Result<Self> {
        Self::new(model, &linspace(-1.0, 1.0, DEFAULT_CURVE_SAMPLES))
    }
}

/// Bisection stops once the bracket is this narrow.
pub const INVERSION_TOL: f64 = 1e-9;

/// Recover `δp` from a measured `δp′` by bisection on the forward model.
pub fn invert_ee(dp_prime_measured: f64, calibration: &Calibration) -> Result<f64> {
    let curve = &calibration.curve;
    let n = curve.dp.len();
    let (low, high) = (curve.dp_prime[0], curve.dp_prime[n - 1]);
    if !dp_prime_measured.is_finite()
        || dp_prime_measured < low - 1e-9
        || dp_prime_measured > high + 1e-9
    {
        return Err(Error::OutOfRange {
            value: dp_prime_measured,
            low,
            high,
        });
    }
    let target = dp_prime_measured.clamp(low, high);
    if let Some(i) = curve.dp_prime.iter().position(|&v| v == target) {
        return Ok(curve.dp[i]);
    }
    let right = curve.dp_prime.partition_point(|&v| v < target);
    let (mut a, mut b) = (curve.dp[right - 1], curve.dp[right]);
    while b - a > INVERSION_TOL {
        let mid = 0.5 * (a + b);
        let value = calibration.model.dp_prime(mid)?;
        if value < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// One entry of the δp → δp′ table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableCell {
    pub zeta: f64,
    pub omega32_abs: f64,
    pub dp: f64,
    pub dp_prime: f64,
}

/// Fixed parameters shared by all table cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableSetup {
    pub mol: MoleculeParams,
    pub probe: f64,
    pub dipole_ratio: f64,
    pub solver: Solver,
}

impl Default for TableSetup {
    /// Unit population rates, closed-system dephasing, `A = 1`, probes `γ/10`.
    fn default() -> Self {
        Self {
            mol: MoleculeParams::reference(),
            probe: 0.1,
            dipole_ratio: 1.0,
            solver: Solver::default(),
        }
    }
}

/// `δp′` for every combination, ordered by control strength, then `δp`, then
/// optical depth.
pub fn calibration_table(
    zeta_list: &[f64],
    omega32_list: &[f64],
    dp_list: &[f64],
    setup: &TableSetup,
) -> Result<Vec<TableCell>> {
    let mut jobs = Vec::with_capacity(zeta_list.len() * omega32_list.len() * dp_list.len());
    for &omega32_abs in omega32_list {
        for &dp in dp_list {
            for &zeta in zeta_list {
                jobs.push((zeta, omega32_abs, dp));
            }
        }
    }
    jobs.into_par_iter()
        .map(|(zeta, omega32_abs, dp)| {
            let medium = MediumConfig::from_dp(dp, zeta, setup.dipole_ratio)?;
            let drive = DriveConfig::probe_condition(setup.probe, omega32_abs, 0.0)?;
            let dp_prime = setup.solver.dp_prime(&medium, &setup.mol, &drive)?;
            Ok(TableCell {
                zeta,
                omega32_abs,
                dp,
                dp_prime,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig3_drive() -> DriveConfig {
        DriveConfig::probe_condition(0.1, 10.0, 0.0).unwrap()
    }

    #[test]
    fn linspace_hits_endpoints() {
        let g = linspace(-10.0, 10.0, 401);
        assert_eq!(g.len(), 401);
        assert_eq!(g[0], -10.0);
        assert_eq!(g[400], 10.0);
        assert_eq!(g[100], -5.0);
        assert_eq!(g[300], 5.0);
        assert_eq!(linspace(-1.0, 1.0, 41)[20], 0.0);
    }

    #[test]
    fn racemic_spectrum_is_mirror_symmetric() {
        let mol = MoleculeParams::reference();
        let medium = MediumConfig::from_dp(0.0, 0.2, 1.0).unwrap();
        let grid = linspace(-10.0, 10.0, 81);
        for engine in [Engine::Linear, Engine::Full] {
            let s = sweep(&medium, &mol, &fig3_drive(), &grid, &Solver::new(engine)).unwrap();
            let n = s.points.len();
            for i in 0..n {
                let d = (s.points[i].absorption - s.points[n - 1 - i].absorption).abs();
                assert!(d <= 1e-8, "{engine:?} {}", s.points[i].delta);
            }
            assert!(s.peaks.unwrap().dp_prime.abs() < 1e-10);
        }
    }

    #[test]
    fn pure_left_medium_has_one_peak() {
        let mol = MoleculeParams::reference();
        let medium = MediumConfig::from_dp(1.0, 0.2, 1.0).unwrap();
        let s = sweep(
            &medium,
            &mol,
            &fig3_drive(),
            &linspace(-10.0, 10.0, 201),
            &Solver::default(),
        )
        .unwrap();
        let p = s.peaks.unwrap();
        assert!(p.h_minus < 0.02 * p.h_plus);
        let best = s
            .points
            .iter()
            .max_by(|a, b| a.absorption.total_cmp(&b.absorption))
            .unwrap();
        assert!((best.delta + 5.0).abs() <= 0.2, "{}", best.delta);
    }

    #[test]
    fn three_to_one_mixture() {
        let mol = MoleculeParams::reference();
        let medium = MediumConfig::from_dp(0.5, 0.2, 1.0).unwrap();
        let p = Solver::default()
            .peaks(&medium, &mol, &fig3_drive())
            .unwrap();
        // optically thin estimate h̃± ≈ p±, off by O(ζ)
        assert!((p.h_tilde_plus - 0.75).abs() < 0.02);
        assert!((p.h_tilde_minus - 0.25).abs() < 0.02);
        assert_eq!(p.h_tilde_plus + p.h_tilde_minus, 1.0);
    }

    #[test]
    fn zero_depth_spectrum_is_transparent() {
        let mol = MoleculeParams::reference();
        let medium = MediumConfig::from_dp(0.3, 0.0, 1.0).unwrap();
        let s = sweep(
            &medium,
            &mol,
            &fig3_drive(),
            &linspace(-10.0, 10.0, 21),
            &Solver::default(),
        )
        .unwrap();
        assert!(s.peaks.is_none());
        assert!(s
            .points
            .iter()
            .all(|p| p.transmission == 1.0 && p.normalized.is_nan()));
        assert!(matches!(
            extract_peaks(&s.points, 10.0),
            Err(Error::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn extracted_peaks_match_direct_evaluation() {
        let mol = MoleculeParams::reference();
        let medium = MediumConfig::from_dp(-0.5, 0.2, 1.0).unwrap();
        let solver = Solver::new(Engine::Linear);
        let on_grid = sweep(
            &medium,
            &mol,
            &fig3_drive(),
            &linspace(-10.0, 10.0, 401),
            &solver,
        )
        .unwrap();
        let direct = on_grid.peaks.unwrap();
        assert_eq!(extract_peaks(&on_grid.points, 10.0).unwrap(), direct);
        // off-grid targets use cubic interpolation
        let off = sweep(
            &medium,
            &mol,
            &fig3_drive(),
            &linspace(-10.03, 10.02, 1201),
            &solver,
        )
        .unwrap();
        let interp = extract_peaks(&off.points, 10.0).unwrap();
        assert!((interp.h_plus - direct.h_plus).abs() < 1e-5 * direct.h_plus);
        assert!((interp.dp_prime - direct.dp_prime).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mol = MoleculeParams::reference();
        let medium = MediumConfig::from_dp(0.3, 0.2, 1.0).unwrap();
        let solver = Solver::new(Engine::Linear);
        assert!(sweep(&medium, &mol, &fig3_drive(), &[1.0, 0.0], &solver).is_err());
        let skewed = DriveConfig::new(0.1, 0.2, 10.0, 0.0, 0.0).unwrap();
        assert!(sweep(&medium, &mol, &skewed, &[0.0], &solver).is_err());
        let pts = sweep(
            &medium,
            &mol,
            &fig3_drive(),
            &linspace(-4.0, 4.0, 9),
            &solver,
        )
        .unwrap();
        assert!(extract_peaks(&pts.points, 10.0).is_err());
        assert!("quantum".parse::<Engine>().is_err());
        assert_eq!("full".parse::<Engine>().unwrap(), Engine::Full);
    }

    #[test]
    fn curve_endpoints_and_symmetry() {
        let model = ForwardModel::new(
            MediumConfig::from_dp(0.0, 0.2, 1.0).unwrap(),
            MoleculeParams::reference(),
            fig3_drive(),
            Solver::new(Engine::Linear),
        )
        .unwrap();
        let c = forward_curve(&model, &[-1.0, 0.0, 1.0]).unwrap();
        assert!(c.dp_prime[0] < c.dp_prime[1] && c.dp_prime[1] < c.dp_prime[2]);
        assert!(c.dp_prime[1].abs() < 1e-12);
        assert!((c.dp_prime[0] + c.dp_prime[2]).abs() < 1e-10);
        assert!(c.dp_prime.iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn inversion_basics() {
        let model = ForwardModel::new(
            MediumConfig::from_dp(0.0, 0.05, 1.0).unwrap(),
            MoleculeParams::reference(),
            fig3_drive(),
            Solver::new(Engine::Linear),
        )
        .unwrap();
        let cal = Calibration::with_default_grid(model).unwrap();
        assert!(invert_ee(0.0, &cal).unwrap().abs() < 1e-8);
        let dp = invert_ee(0.4896, &cal).unwrap();
        assert!((dp - 0.5).abs() < 0.005, "{dp}");
        for dp in [-0.93, -0.37, 0.12, 0.81] {
            let forward = model.dp_prime(dp).unwrap();
            assert!((invert_ee(forward, &cal).unwrap() - dp).abs() < 1e-6);
        }
        assert!(matches!(
            invert_ee(1.5, &cal),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn non_monotone_curve_is_reported() {
        // a strongly asymmetric dipole ratio at large depth folds the curve
        let model = ForwardModel::new(
            MediumConfig::from_dp(0.0, 6.0, 1.0).unwrap(),
            MoleculeParams::reference(),
            fig3_drive(),
            Solver::new(Engine::Linear),
        )
        .unwrap();
        let dense = linspace(-1.0, 1.0, 41);
        match forward_curve(&model, &dense) {
            Ok(curve) => assert!(curve.dp_prime.windows(2).all(|w| w[1] > w[0])),
            Err(e) => assert!(matches!(e, Error::NonMonotoneCurve { .. })),
        }
        assert!(forward_curve(&model, &[0.5, 0.2]).is_err());
    }

    #[test]
    fn table_zero_rows_vanish() {
        let cells = calibration_table(&[0.05, 0.2], &[10.0, 100.0], &[0.0], &TableSetup::default())
            .unwrap();
        assert_eq!(cells.len(), 4);
        assert!(cells.iter().all(|c| c.dp_prime.abs() <= 1e-10));
    }
}
