//! Thermal velocity averaging.
//!
//! A molecule with velocity `v_z` sees every detuning shifted by `k_ij v_z`.
//! Responses are averaged over the Maxwell distribution
//! `(π u_D²)^{-1/2} exp(−v_z²/u_D²)` with Gauss–Hermite quadrature.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::VelocityShift;
use crate::error::{Error, Result};
use crate::model::DensityMatrix;
use crate::propagation::Coefficients;

/// Relative change tolerated when the node count is doubled.
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// Smallest order picked by [`DopplerConfig::recommended_nodes`].
pub const DEFAULT_NODES: usize = 512;

/// Doppler widths `k_ij u_D` in units of `γ` and the quadrature order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DopplerConfig {
    pub k21_ud: f64,
    pub k32_ud: f64,
    pub nodes: usize,
}

impl DopplerConfig {
    pub fn new(k21_ud: f64, k32_ud: f64, nodes: usize) -> Result<Self> {
        for (name, w) in [("k21_ud", k21_ud), ("k32_ud", k32_ud)] {
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be non-negative, got {w}"
                )));
            }
        }
        if nodes < 8 || !nodes.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "quadrature order must be even and at least 8, got {nodes}"
            )));
        }
        Ok(Self {
            k21_ud,
            k32_ud,
            nodes,
        })
    }

    /// Build from all three widths, checking `k31 = k21 + k32`.
    pub fn from_widths(k21_ud: f64, k31_ud: f64, k32_ud: f64, nodes: usize) -> Result<Self> {
        let sum = k21_ud + k32_ud;
        if (k31_ud - sum).abs() > 1e-12 * sum.abs().max(1.0) {
            return Err(Error::invalid(format!(
                "phase matching requires k31 u_D = k21 u_D + k32 u_D, got {k31_ud} vs {sum}"
            )));
        }
        Self::new(k21_ud, k32_ud, nodes)
    }

    /// Widths with the order from [`Self::recommended_nodes`].
    pub fn with_recommended_nodes(k21_ud: f64, k32_ud: f64) -> Result<Self> {
        Self::new(k21_ud, k32_ud, Self::recommended_nodes(k21_ud, k32_ud))
    }

    /// Order needed for the doubling check at unit population rates. The
    /// response has poles about `γ/(k u_D)` from the real axis in the scaled
    /// velocity, so the order grows as `(k u_D)²`; rounded up to a power of two.
    pub fn recommended_nodes(k21_ud: f64, k32_ud: f64) -> usize {
        let width = k21_ud.max(k32_ud).max(0.5 * (k21_ud + k32_ud));
        let estimate = (128.0 * width * width).ceil();
        if !(estimate.is_finite() && estimate <= (1u64 << 20) as f64) {
            return 1 << 20;
        }
        (estimate as usize).next_power_of_two().max(DEFAULT_NODES)
    }

    pub fn k31_ud(&self) -> f64 {
        self.k21_ud + self.k32_ud
    }

    /// Shifts of the velocity class `v_z = x u_D`.
    pub fn shift_at(&self, x: f64) -> VelocityShift {
        VelocityShift {
            probe21: self.k21_ud * x,
            control32: self.k32_ud * x,
        }
    }
}

/// Nodes and weights for `π^{-1/2} ∫ f(x) e^{−x²} dx ≈ Σ wᵢ f(xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Roots of the orthonormal Hermite polynomial, bracketed on a grid finer
    /// than the smallest root spacing and polished by safeguarded Newton. The
    /// recurrence is rescaled on the fly so large orders neither overflow nor
    /// underflow.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1);
        let nf = n as f64;
        let rec = Recurrence::new(n);
        let reach = (2.0 * nf + 1.0).sqrt();
        // smallest spacing is about π/reach, at the centre
        let h = 0.45 * PI / reach;
        let sign = |x: f64| rec.eval(x).0.signum();

        let mut positive = Vec::with_capacity(n / 2);
        let mut x0 = if n % 2 == 1 { 0.5 * h } else { 0.0 };
        let mut s0 = sign(x0);
        while positive.len() < n / 2 && x0 <= reach + 1.0 {
            let x1 = x0 + h;
            let s1 = sign(x1);
            if s1 != s0 {
                positive.push(rec.polish(x0, x1));
            }
            x0 = x1;
            s0 = s1;
        }
        assert_eq!(positive.len(), n / 2, "missed Hermite roots for n = {n}");

        // w = 1 / (n p_{n-1}²), normalised by √π
        let weight = |(_, pn1, log_scale): (f64, f64, f64)| {
            (-nf.ln() - 2.0 * (pn1.abs().ln() + log_scale) - 0.5 * PI.ln()).exp()
        };
        let mut nodes = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for &(x, w) in positive.iter().rev() {
            nodes.push(-x);
            weights.push(weight(w));
        }
        if n % 2 == 1 {
            nodes.push(0.0);
            weights.push(weight(rec.eval(0.0)));
        }
        for &(x, w) in &positive {
            nodes.push(x);
            weights.push(weight(w));
        }
        Self { nodes, weights }
    }

    /// Shared copy of the rule of order `n`, built once per process.
    pub fn cached(n: usize) -> Arc<Self> {
        static RULES: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let rules = RULES.get_or_init(Default::default);
        if let Some(rule) = rules.lock().unwrap_or_else(|e| e.into_inner()).get(&n) {
            return Arc::clone(rule);
        }
        let rule = Arc::new(Self::new(n));
        rules
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(n)
            .or_insert(rule)
            .clone()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Three-term recurrence of the orthonormal Hermite polynomials,
/// `p_j = √(2/j) x p_{j−1} − √((j−1)/j) p_{j−2}`.
struct Recurrence {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl Recurrence {
    fn new(n: usize) -> Self {
        let (a, b) = (1..=n)
            .map(|j| {
                let jf = j as f64;
                ((2.0 / jf).sqrt(), ((jf - 1.0) / jf).sqrt())
            })
            .unzip();
        Self { a, b }
    }

    fn order(&self) -> usize {
        self.a.len()
    }

    /// `(p_n(x), p_{n−1}(x), s)` with both values scaled by `e^{−s}`.
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let mut prev = 0.0;
        let mut cur = PI.powf(-0.25);
        let mut log_scale = 0.0;
        for (a, b) in self.a.iter().zip(&self.b) {
            let next = x * a * cur - b * prev;
            prev = cur;
            cur = next;
            if cur.abs() > 1e150 {
                cur *= 1e-150;
                prev *= 1e-150;
                log_scale += 150.0 * std::f64::consts::LN_10;
            }
        }
        (cur, prev, log_scale)
    }

    /// Newton on `p_n` with `p_n' = √(2n) p_{n−1}`, falling back to bisection
    /// when a step leaves the bracket `[lo, hi]`. Returns the root with the
    /// recurrence evaluated there, which the weight formula needs.
    fn polish(&self, mut lo: f64, mut hi: f64) -> (f64, (f64, f64, f64)) {
        let lo_sign = self.eval(lo).0.signum();
        let slope = (2.0 * self.order() as f64).sqrt();
        let mut z = 0.5 * (lo + hi);
        for _ in 0..100 {
            let value = self.eval(z);
            let (pn, pn1, _) = value;
            if pn == 0.0 {
                return (z, value);
            }
            if pn.signum() == lo_sign {
                lo = z;
            } else {
                hi = z;
            }
            let step = pn / (slope * pn1);
            let newton = z - step;
            if newton > lo && newton < hi {
                // quadratic convergence: this step lands at round-off
                if step.abs() <= 1e-9 * z.abs().max(1.0) {
                    return (newton, self.eval(newton));
                }
                z = newton;
            } else {
                z = 0.5 * (lo + hi);
            }
            if hi - lo <= 4.0 * f64::EPSILON * z.abs().max(1.0) {
                return (z, self.eval(z));
            }
        }
        (z, self.eval(z))
    }
}

/// Values that can be averaged over velocity classes.
pub trait Averageable: Sized {
    fn zero_like(&self) -> Self;
    fn add_scaled(&mut self, weight: f64, other: &Self);
    /// Max-norm distance.
    fn distance(&self, other: &Self) -> f64;
    fn magnitude(&self) -> f64;
}

impl Averageable for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, weight: f64, other: &Self) {
        *self += weight * other;
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).abs()
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Averageable for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, weight: f64, other: &Self) {
        *self += weight * other;
    }
    fn distance(&self, other: &Self) -> f64 {
        (self - other).norm()
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl Averageable for Coefficients {
    fn zero_like(&self) -> Self {
        [[Complex64::new(0.0, 0.0); 2]; 2]
    }
    fn add_scaled(&mut self, weight: f64, other: &Self) {
        for (row, orow) in self.iter_mut().zip(other) {
            for (x, y) in row.iter_mut().zip(orow) {
                *x += weight * y;
            }
        }
    }
    fn distance(&self, other: &Self) -> f64 {
        self.iter()
            .flatten()
            .zip(other.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
    fn magnitude(&self) -> f64 {
        self.iter().flatten().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl Averageable for DensityMatrix {
    fn zero_like(&self) -> Self {
        DensityMatrix(nalgebra::Matrix3::zeros())
    }
    fn add_scaled(&mut self, weight: f64, other: &Self) {
        self.0 += other.0 * Complex64::new(weight, 0.0);
    }
    fn distance(&self, other: &Self) -> f64 {
        self.max_abs_diff(other)
    }
    fn magnitude(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl<T: Averageable> Averageable for Vec<T> {
    fn zero_like(&self) -> Self {
        self.iter().map(Averageable::zero_like).collect()
    }
    fn add_scaled(&mut self, weight: f64, other: &Self) {
        for (x, y) in self.iter_mut().zip(other) {
            x.add_scaled(weight, y);
        }
    }
    fn distance(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other)
            .map(|(a, b)| a.distance(b))
            .fold(0.0, f64::max)
    }
    fn magnitude(&self) -> f64 {
        self.iter().map(Averageable::magnitude).fold(0.0, f64::max)
    }
}

/// Weighted sum over the given rule, in node order.
pub fn average_with<T, F>(rule: &GaussHermite, config: &DopplerConfig, response: F) -> Result<T>
where
    T: Averageable,
    F: Fn(VelocityShift) -> Result<T>,
{
    let mut acc: Option<T> = None;
    for (&x, &w) in rule.nodes.iter().zip(&rule.weights) {
        let value = response(config.shift_at(x))?;
        match acc.as_mut() {
            Some(sum) => sum.add_scaled(w, &value),
            None => {
                let mut sum = value.zero_like();
                sum.add_scaled(w, &value);
                acc = Some(sum);
            }
        }
    }
    Ok(acc.expect("rule has at least one node"))
}

/// Velocity-averaged `response` at `config.nodes` nodes. Fails with
/// [`Error::QuadratureNotConverged`] when doubling the order moves the result
/// by more than [`CONVERGENCE_TOL`] relative.
pub fn doppler_average<T, F>(response: F, config: &DopplerConfig) -> Result<T>
where
    T: Averageable,
    F: Fn(VelocityShift) -> Result<T>,
{
    let coarse = average_with(&GaussHermite::cached(config.nodes), config, &response)?;
    let fine = average_with(&GaussHermite::cached(2 * config.nodes), config, &response)?;
    let scale = fine.magnitude().max(1e-300);
    let change = coarse.distance(&fine) / scale;
    if change > CONVERGENCE_TOL {
        return Err(Error::QuadratureNotConverged(change));
    }
    Ok(coarse)
}

/// Cached rules for repeated averages with one configuration.
#[derive(Debug, Clone)]
pub struct DopplerAverager {
    pub config: DopplerConfig,
    coarse: Arc<GaussHermite>,
    fine: Arc<GaussHermite>,
}

impl DopplerAverager {
    pub fn new(config: DopplerConfig) -> Self {
        Self {
            coarse: GaussHermite::cached(config.nodes),
            fine: GaussHermite::cached(2 * config.nodes),
            config,
        }
    }

    pub fn average<T, F>(&self, response: F) -> Result<T>
    where
        T: Averageable,
        F: Fn(VelocityShift) -> Result<T>,
    {
        let coarse = average_with(&self.coarse, &self.config, &response)?;
        let fine = average_with(&self.fine, &self.config, &response)?;
        let change = coarse.distance(&fine) / fine.magnitude().max(1e-300);
        if change > CONVERGENCE_TOL {
            return Err(Error::QuadratureNotConverged(change));
        }
        Ok(coarse)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch;
    use crate::model::{DriveConfig, Handedness, MoleculeParams};

    #[test]
    fn rule_integrates_gaussian_moments() {
        for n in [8, 9, 64, 512, 2048] {
            let rule = GaussHermite::new(n);
            assert_eq!(rule.len(), n);
            let moment = |k: i32| -> f64 {
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| w * x.powi(k))
                    .sum()
            };
            assert!((moment(0) - 1.0).abs() < 1e-13, "n = {n}");
            assert!(moment(1).abs() < 1e-13);
            assert!((moment(2) - 0.5).abs() < 1e-13);
            assert!((moment(4) - 0.75).abs() < 1e-12);
            assert!(rule.nodes.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn cached_rule_is_shared() {
        let a = GaussHermite::cached(32);
        let b = GaussHermite::cached(32);
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(*a, GaussHermite::new(32));
    }

    #[test]
    fn small_rule_matches_known_nodes() {
        // H_2: ±1/√2 with equal weights
        let rule = GaussHermite::new(2);
        assert!((rule.nodes[1] - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!((rule.weights[0] - 0.5).abs() < 1e-15);
        let rule = GaussHermite::new(3);
        assert!((rule.nodes[2] - 1.5_f64.sqrt()).abs() < 1e-14);
        assert!((rule.weights[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        assert!(DopplerConfig::new(1.0, 1.0, 7).is_err());
        assert!(DopplerConfig::new(1.0, 1.0, 6).is_err());
        assert!(DopplerConfig::new(-1.0, 1.0, 16).is_err());
        assert!(DopplerConfig::from_widths(1.0, 2.5, 1.0, 16).is_err());
        let c = DopplerConfig::from_widths(1.0, 3.0, 2.0, 16).unwrap();
        assert_eq!(c.k31_ud(), 3.0);
        let s = c.shift_at(0.5);
        assert_eq!(s.probe31(), 1.5);
    }

    #[test]
    fn constant_response_is_unchanged() {
        let cfg = DopplerConfig::new(2.0, 2.0, 16).unwrap();
        let v: f64 = doppler_average(|_| Ok(3.25), &cfg).unwrap();
        assert!((v - 3.25).abs() < 1e-14);
    }

    #[test]
    fn zero_width_recovers_rest_frame() {
        let mol = MoleculeParams::reference();
        let drive = DriveConfig::probe_condition(0.1, 10.0, -5.0).unwrap();
        let cfg = DopplerConfig::new(0.0, 0.0, 16).unwrap();
        let avg = doppler_average(
            |s| bloch::steady_state_shifted(&mol, &drive, Handedness::Left, s),
            &cfg,
        )
        .unwrap();
        let rest = bloch::steady_state(&mol, &drive, Handedness::Left).unwrap();
        assert!(avg.max_abs_diff(&rest) <= 1e-10);
    }

    #[test]
    fn averaged_state_keeps_unit_trace() {
        let mol = MoleculeParams::reference();
        let drive = DriveConfig::probe_condition(1.0, 10.0, -5.0).unwrap();
        let cfg = DopplerConfig::new(1.0, 1.0, 16).unwrap();
        let avg = average_with(&GaussHermite::new(16), &cfg, |s| {
            bloch::steady_state_shifted(&mol, &drive, Handedness::Left, s)
        })
        .unwrap();
        assert!((avg.trace() - 1.0).norm() < 1e-12);
        assert!(avg.hermiticity_error() < 1e-12);
    }

    #[test]
    fn unconverged_quadrature_is_reported() {
        let cfg = DopplerConfig::new(5.0, 5.0, 8).unwrap();
        let res: Result<Complex64> =
            doppler_average(|s| Ok(1.0 / Complex64::new(0.1, -s.probe21)), &cfg);
        assert!(matches!(res, Err(Error::QuadratureNotConverged(_))));
    }
}
