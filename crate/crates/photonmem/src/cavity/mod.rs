//! Cavity-QED single-photon source: emission figures of merit, V-STIRAP
//! dynamics, drive-pulse shaping and averaging over the cavity mode.
//!
//! Rates are angular frequencies in rad/us, times in us, lengths in um.
//! Mirror transmittances and scatter losses are dimensionless power
//! fractions (ppm-scale numbers like `2e-6`).

mod mode;
mod shaping;
mod vstirap;

pub use mode::{average_over_mode, GEmission, ModeAverage, ModeDistribution};
pub use shaping::shape_drive_pulse;
pub use vstirap::{simulate_vstirap, EmissionRecord, SolverDiag};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridError, TimeGrid};
use crate::SPEED_OF_LIGHT_UM_PER_US;

#[derive(Debug, Error)]
pub enum CavityError {
    #[error("no output channel: T1 + T2 + 2H must be positive")]
    NoOutputChannel,
    #[error("undefined cooperativity: kappa and gamma must be positive")]
    UndefinedCooperativity,
    #[error("cavity length must be positive")]
    ZeroLength,
    #[error("invalid cavity parameters: {0}")]
    InvalidParams(String),
    #[error("invalid drive pulse: {0}")]
    InvalidDrive(String),
    #[error("target exceeds emission bound: squared norm {norm_sq} > g^2/(gamma kappa + g^2) = {bound}")]
    ExceedsEmissionBound { norm_sq: f64, bound: f64 },
    #[error("target not adiabatically reachable: {0}")]
    NotReachable(String),
    #[error("integration not converged: p_emit changed by {delta:.3e} on step halving (dt = {dt:.3e} us, limit {limit:.1e})")]
    NotConverged { delta: f64, dt: f64, limit: f64 },
    #[error("invalid mode distribution: {0}")]
    InvalidDistribution(String),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Atom-cavity system parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityParams {
    /// Atom-cavity coupling g (rad/us).
    pub g: f64,
    /// Cavity field decay kappa (rad/us).
    pub kappa: f64,
    /// Atomic polarization decay gamma (rad/us).
    pub gamma: f64,
    /// Input-mirror power transmittance T1.
    pub t1: f64,
    /// Output-mirror power transmittance T2.
    pub t2: f64,
    /// Scatter loss H per mirror.
    pub h: f64,
    /// Mirror separation (um).
    pub cavity_length: f64,
    /// Mode waist (um).
    pub mode_waist: f64,
}

impl CavityParams {
    pub fn validate(&self) -> Result<(), CavityError> {
        let fields = [
            ("g", self.g),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
            ("t1", self.t1),
            ("t2", self.t2),
            ("h", self.h),
            ("cavity_length", self.cavity_length),
            ("mode_waist", self.mode_waist),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(CavityError::InvalidParams(format!(
                    "{name} must be finite and non-negative (got {v})"
                )));
            }
        }
        Ok(())
    }

    /// Copy with a different coupling strength.
    pub fn with_g(&self, g: f64) -> Self {
        Self { g, ..*self }
    }

    pub fn mirror_loss_total(&self) -> f64 {
        self.t1 + self.t2 + 2.0 * self.h
    }
}

/// Real, non-negative drive Rabi frequency Omega(t) sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DrivePulse {
    pub grid: TimeGrid,
    pub omega: Vec<f64>,
}

impl DrivePulse {
    pub fn new(grid: TimeGrid, omega: Vec<f64>) -> Result<Self, CavityError> {
        if omega.len() != grid.n {
            return Err(CavityError::InvalidDrive(format!(
                "sample count {} does not match grid ({})",
                omega.len(),
                grid.n
            )));
        }
        if omega.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(CavityError::InvalidDrive(
                "Rabi frequency samples must be finite and non-negative".into(),
            ));
        }
        Ok(Self { grid, omega })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Result<Self, CavityError> {
        let omega = grid.times().map(f).collect();
        Self::new(grid, omega)
    }

    /// Linear interpolation between samples; clamped at the grid ends.
    pub fn value(&self, t: f64) -> f64 {
        let x = (t - self.grid.t_start) / self.grid.dt;
        if x <= 0.0 {
            return self.omega[0];
        }
        let max = (self.grid.n - 1) as f64;
        if x >= max {
            return self.omega[self.grid.n - 1];
        }
        let i = x.floor() as usize;
        let f = x - i as f64;
        self.omega[i] * (1.0 - f) + self.omega[i + 1] * f
    }

    pub fn max_omega(&self) -> f64 {
        self.omega.iter().fold(0.0, |a, &b| a.max(b))
    }
}

/// Photon emission probability P_E = [T2/(T1+T2+2H)] [g^2/(gamma kappa + g^2)].
pub fn emission_probability(p: &CavityParams) -> Result<f64, CavityError> {
    p.validate()?;
    let loss = p.mirror_loss_total();
    if loss <= 0.0 {
        return Err(CavityError::NoOutputChannel);
    }
    if p.g == 0.0 {
        return Ok(0.0);
    }
    let g2 = p.g * p.g;
    Ok((p.t2 / loss) * (g2 / (p.gamma * p.kappa + g2)))
}

/// Cooperativity C = g^2 / (2 kappa gamma).
pub fn cooperativity(p: &CavityParams) -> Result<f64, CavityError> {
    p.validate()?;
    if p.kappa <= 0.0 || p.gamma <= 0.0 {
        return Err(CavityError::UndefinedCooperativity);
    }
    Ok(p.g * p.g / (2.0 * p.kappa * p.gamma))
}

/// Field decay rate of a two-mirror standing-wave cavity,
/// kappa = c (T1 + T2 + 2H) / (4 L).
pub fn kappa_from_mirrors(p: &CavityParams) -> Result<f64, CavityError> {
    p.validate()?;
    if p.cavity_length <= 0.0 {
        return Err(CavityError::ZeroLength);
    }
    Ok(SPEED_OF_LIGHT_UM_PER_US * p.mirror_loss_total() / (4.0 * p.cavity_length))
}

/// One row of an output-mirror asymmetry sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymmetryRow {
    /// Output-mirror transmittance for this row (dimensionless fraction).
    pub t2: f64,
    pub p_emit: f64,
    pub cooperativity: f64,
}

/// Sweep the output-mirror transmittance, recomputing kappa from the mirror
/// losses at each point. T1 and H stay fixed.
pub fn sweep_asymmetry(
    base: &CavityParams,
    t2_values: &[f64],
) -> Result<Vec<AsymmetryRow>, CavityError> {
    if t2_values.is_empty() {
        return Err(CavityError::InvalidParams("t2 sweep list is empty".into()));
    }
    t2_values
        .iter()
        .map(|&t2| {
            if !(t2 > 0.0) {
                return Err(CavityError::InvalidParams(format!(
                    "swept T2 values must be positive (got {t2})"
                )));
            }
            let mut p = *base;
            p.t2 = t2;
            p.kappa = kappa_from_mirrors(&p)?;
            Ok(AsymmetryRow {
                t2,
                p_emit: emission_probability(&p)?,
                cooperativity: cooperativity(&p)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    /// Fig. 3/4-style parameters: g, kappa, gamma = 2pi {15, 12, 3} rad/us,
    /// 2 ppm transmission input mirror, 100 ppm output, 2 ppm scatter each.
    pub(crate) fn reference_params() -> CavityParams {
        CavityParams {
            g: TAU * 15.0,
            kappa: TAU * 12.0,
            gamma: TAU * 3.0,
            t1: 2e-6,
            t2: 100e-6,
            h: 2e-6,
            cavity_length: 100.0,
            mode_waist: 10.0,
        }
    }

    #[test]
    fn emission_probability_reference_value() {
        // (100/106) * (225/261), hand evaluation
        let p = reference_params();
        let expected = (100.0 / 106.0) * (225.0 / 261.0);
        assert_relative_eq!(emission_probability(&p).unwrap(), expected, epsilon = 1e-12);
        assert!((emission_probability(&p).unwrap() - 0.813).abs() < 1e-3);
    }

    #[test]
    fn emission_probability_symmetric_mirrors_strong_coupling() {
        let mut p = reference_params();
        p.t1 = 50e-6;
        p.t2 = 50e-6;
        p.h = 0.0;
        p.g = 1e4; // g^2 >> gamma kappa
        let pe = emission_probability(&p).unwrap();
        assert_relative_eq!(pe, 0.5, epsilon = 1e-4);
    }

    #[test]
    fn emission_probability_no_coupling() {
        let mut p = reference_params();
        p.g = 0.0;
        assert_eq!(emission_probability(&p).unwrap(), 0.0);
    }

    #[test]
    fn emission_probability_degenerate_mirrors() {
        let mut p = reference_params();
        p.t1 = 0.0;
        p.t2 = 0.0;
        p.h = 0.0;
        assert!(matches!(emission_probability(&p), Err(CavityError::NoOutputChannel)));
    }

    #[test]
    fn cooperativity_reference_value() {
        let p = reference_params();
        assert_relative_eq!(cooperativity(&p).unwrap(), 3.125, epsilon = 1e-12);
    }

    #[test]
    fn cooperativity_zero_g_and_quadratic_scaling() {
        let mut p = reference_params();
        p.g = 0.0;
        assert_eq!(cooperativity(&p).unwrap(), 0.0);
        p.g = reference_params().g;
        let c1 = cooperativity(&p).unwrap();
        p.g *= 2.0;
        assert_relative_eq!(cooperativity(&p).unwrap(), 4.0 * c1, epsilon = 1e-12);
    }

    #[test]
    fn cooperativity_undefined_without_decay() {
        let mut p = reference_params();
        p.kappa = 0.0;
        assert!(matches!(cooperativity(&p), Err(CavityError::UndefinedCooperativity)));
    }

    #[test]
    fn kappa_from_mirrors_reference_geometry() {
        // 106 ppm total loss, 100 um cavity -> ~7.95e7 1/s = 79.5 rad/us
        let p = reference_params();
        let kappa = kappa_from_mirrors(&p).unwrap();
        assert_relative_eq!(kappa, 79.445, epsilon = 0.01);
        // consistent with the kappa ~ 2pi 12 MHz convention
        assert!((kappa / TAU - 12.64).abs() < 0.01);
    }

    #[test]
    fn kappa_halves_with_doubled_length_and_vanishes_without_loss() {
        let mut p = reference_params();
        let k1 = kappa_from_mirrors(&p).unwrap();
        p.cavity_length *= 2.0;
        assert_relative_eq!(kappa_from_mirrors(&p).unwrap(), k1 / 2.0, epsilon = 1e-12);
        p.t1 = 0.0;
        p.t2 = 0.0;
        p.h = 0.0;
        assert_eq!(kappa_from_mirrors(&p).unwrap(), 0.0);
        p.cavity_length = 0.0;
        assert!(matches!(kappa_from_mirrors(&p), Err(CavityError::ZeroLength)));
    }

    #[test]
    fn sweep_contains_strong_coupling_high_emission_window() {
        let p = reference_params();
        let t2: Vec<f64> = (1..=400).map(|i| i as f64 * 1e-6).collect();
        let rows = sweep_asymmetry(&p, &t2).unwrap();
        assert!(rows.iter().any(|r| r.p_emit > 0.8 && r.cooperativity > 1.0));
    }

    #[test]
    fn sweep_single_element_matches_scalars() {
        let mut p = reference_params();
        let rows = sweep_asymmetry(&p, &[100e-6]).unwrap();
        p.kappa = kappa_from_mirrors(&p).unwrap();
        assert_relative_eq!(rows[0].p_emit, emission_probability(&p).unwrap());
        assert_relative_eq!(rows[0].cooperativity, cooperativity(&p).unwrap());
    }

    #[test]
    fn sweep_limiting_behaviour() {
        let p = reference_params();
        let rows = sweep_asymmetry(&p, &[1e-6, 1e-2]).unwrap();
        // huge T2: prefactor -> 1 but kappa explodes, so C -> 0
        assert!(rows[1].cooperativity < 0.1);
        assert!(rows[1].p_emit < rows[0].cooperativity);
    }
}
