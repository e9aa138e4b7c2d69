//! EIT vapour-cell quantum memory: slow light, storage as a ground-state
//! spin wave, and retrieval in co- or counter-propagating geometry.
//!
//! Rates are rad/us, times us, lengths cm. The weak-probe Maxwell-Bloch
//! equations are solved in the retarded frame t_r = t - z/c (see
//! [`solver`]); the analytic feasibility bounds and decay laws live here.

mod solver;

pub use solver::{propagate, ConvergenceDiag, FieldSample, PropagationResult, SolverOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{trapezoid, GridError, TimeGrid};

#[derive(Debug, Error)]
pub enum EitError {
    #[error("no medium: alpha must be positive")]
    NoMedium,
    #[error("invalid medium: {0}")]
    InvalidMedium(String),
    #[error("invalid control schedule: {0}")]
    InvalidSchedule(String),
    #[error("schedule shorter than input support: input ends at {input_end} us, {limit}")]
    ScheduleTooShort { input_end: f64, limit: String },
    #[error("nothing stored: stored fraction {0:.2e} is below threshold")]
    NothingStored(f64),
    #[error("propagation not converged: efficiency moved from {eta_coarse:.4} to {eta_fine:.4} (relative change {rel_change:.4}) on grid refinement")]
    NotConverged { eta_coarse: f64, eta_fine: f64, rel_change: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Lambda-medium vapour cell parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaMedium {
    /// Cell length L (cm).
    pub length: f64,
    /// Resonant absorption coefficient alpha (1/cm); optical depth d = alpha L.
    pub alpha: f64,
    /// Natural optical coherence decay (rad/us).
    pub gamma_p_natural: f64,
    /// Buffer-gas pressure broadening added to the optical coherence (rad/us).
    pub collision_rate: f64,
    /// Spin-wave decay gamma_S (rad/us).
    pub gamma_s: f64,
    /// Atomic diffusion constant D (cm^2/us).
    pub diffusion_const: f64,
    /// Control/signal wavevector mismatch delta-k (1/cm).
    pub wavevector_mismatch: f64,
}

impl LambdaMedium {
    pub fn validate(&self) -> Result<(), EitError> {
        let nonneg = [
            ("alpha", self.alpha),
            ("gamma_p_natural", self.gamma_p_natural),
            ("collision_rate", self.collision_rate),
            ("gamma_s", self.gamma_s),
            ("diffusion_const", self.diffusion_const),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < 0.0 {
                return Err(EitError::InvalidMedium(format!(
                    "{name} must be finite and non-negative (got {v})"
                )));
            }
        }
        if !(self.length > 0.0) || !self.length.is_finite() {
            return Err(EitError::InvalidMedium(format!(
                "length must be positive (got {})",
                self.length
            )));
        }
        if !self.wavevector_mismatch.is_finite() {
            return Err(EitError::InvalidMedium("wavevector mismatch must be finite".into()));
        }
        if self.gamma_p() <= 0.0 {
            return Err(EitError::InvalidMedium(
                "effective gamma_P = natural + collision must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Effective optical coherence decay: natural plus pressure broadening.
    pub fn gamma_p(&self) -> f64 {
        self.gamma_p_natural + self.collision_rate
    }

    /// Optical depth d = alpha L.
    pub fn optical_depth(&self) -> f64 {
        self.alpha * self.length
    }

    /// Spin-wave decay including motional dephasing over the wavevector
    /// mismatch grating: gamma_S + D (delta k)^2.
    pub fn gamma_s_eff(&self) -> f64 {
        self.gamma_s + self.diffusion_const * self.wavevector_mismatch * self.wavevector_mismatch
    }
}

/// Readout geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Co,
    Counter,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Direction::Co => write!(f, "co"),
            Direction::Counter => write!(f, "counter"),
        }
    }
}

/// Control-field program: constant write level, raised-cosine switch-off,
/// dark hold, raised-cosine switch-on for readout.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub grid: TimeGrid,
    /// Control Rabi frequency samples on `grid` (rad/us).
    pub omega_c: Vec<f64>,
    /// Write-phase Rabi frequency (rad/us).
    pub level: f64,
    /// Readout Rabi frequency (rad/us); defaults to the write level.
    pub read_level: f64,
    /// Time the switch-off ramp starts (us).
    pub switch_off: f64,
    /// Dark storage duration T (us).
    pub hold_time: f64,
    /// Switch ramp duration (us).
    pub ramp_time: f64,
    pub retrieval_direction: Direction,
}

impl ControlSchedule {
    /// Write / hold / read program. The grid must cover the read ramp.
    pub fn write_hold_read(
        grid: TimeGrid,
        level: f64,
        switch_off: f64,
        hold_time: f64,
        ramp_time: f64,
        direction: Direction,
    ) -> Result<Self, EitError> {
        if !(level >= 0.0) || !level.is_finite() {
            return Err(EitError::InvalidSchedule(format!("control level must be >= 0, got {level}")));
        }
        if !(ramp_time > 0.0) || !(hold_time >= 0.0) || !switch_off.is_finite() {
            return Err(EitError::InvalidSchedule(format!(
                "need ramp_time > 0 and hold_time >= 0 (got ramp {ramp_time}, hold {hold_time})"
            )));
        }
        if switch_off <= grid.t_start {
            return Err(EitError::InvalidSchedule("switch-off precedes the window".into()));
        }
        let read_end = switch_off + 2.0 * ramp_time + hold_time;
        if read_end > grid.t_end() + 1e-12 {
            return Err(EitError::InvalidSchedule(format!(
                "window ends at {} us but the read ramp completes at {read_end} us",
                grid.t_end()
            )));
        }
        let mut s = Self {
            grid,
            omega_c: Vec::new(),
            level,
            read_level: level,
            switch_off,
            hold_time,
            ramp_time,
            retrieval_direction: direction,
        };
        s.omega_c = grid.times().map(|t| s.value(t)).collect();
        Ok(s)
    }

    /// Constant control field over the whole window (slow light, no storage).
    pub fn constant(grid: TimeGrid, level: f64, direction: Direction) -> Result<Self, EitError> {
        if !(level >= 0.0) || !level.is_finite() {
            return Err(EitError::InvalidSchedule(format!("control level must be >= 0, got {level}")));
        }
        Ok(Self {
            grid,
            omega_c: vec![level; grid.n],
            level,
            read_level: level,
            switch_off: f64::INFINITY,
            hold_time: 0.0,
            ramp_time: 0.0,
            retrieval_direction: direction,
        })
    }

    /// Same program with a different readout Rabi frequency.
    pub fn with_read_level(mut self, read_level: f64) -> Result<Self, EitError> {
        if !(read_level >= 0.0) || !read_level.is_finite() {
            return Err(EitError::InvalidSchedule(format!(
                "read level must be >= 0, got {read_level}"
            )));
        }
        self.read_level = read_level;
        self.omega_c = self.grid.times().map(|t| self.value(t)).collect();
        Ok(self)
    }

    pub fn has_storage(&self) -> bool {
        self.switch_off.is_finite() && self.switch_off < self.grid.t_end()
    }

    /// End of the switch-off ramp (start of the dark hold).
    pub fn t_store_start(&self) -> f64 {
        self.switch_off + self.ramp_time
    }

    /// End of the dark hold (start of the read ramp).
    pub fn t_read_start(&self) -> f64 {
        self.switch_off + self.ramp_time + self.hold_time
    }

    pub fn t_read_full(&self) -> f64 {
        self.t_read_start() + self.ramp_time
    }

    /// Control Rabi frequency at time `t` (rad/us).
    pub fn value(&self, t: f64) -> f64 {
        if !self.has_storage() || t < self.switch_off {
            return self.level;
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        if t < self.t_store_start() {
            let x = (t - self.switch_off) / self.ramp_time;
            self.level * (half_pi * x).cos().powi(2)
        } else if t < self.t_read_start() {
            0.0
        } else if t < self.t_read_full() {
            let x = (t - self.t_read_start()) / self.ramp_time;
            self.read_level * (half_pi * x).sin().powi(2)
        } else {
            self.read_level
        }
    }
}

/// Stored ground-state coherence S(z), normalized so that
/// `integral |S|^2 dz` is the stored excitation probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinWave {
    /// Node positions in [0, L] (cm).
    pub z: Vec<f64>,
    /// Complex amplitude at the nodes (cm^-1/2).
    pub amplitude: Vec<num_complex::Complex64>,
}

impl SpinWave {
    /// Stored excitation probability `integral |S|^2 dz`.
    pub fn norm_sq(&self) -> f64 {
        if self.z.len() < 2 {
            return 0.0;
        }
        let dz = self.z[1] - self.z[0];
        trapezoid(dz, self.amplitude.iter().map(|a| a.norm_sqr()))
    }
}

/// Dimensionless margins of the photon-shape bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FeasibilityReport {
    /// (v_g / L) tau; must be << 1 for the pulse to fit in the cell.
    pub lower_margin: f64,
    /// 1 / (tau v_g sqrt(alpha/L)); must be << 1 to fit the transparency window.
    pub upper_margin: f64,
    /// tau d gamma_P; must be >> 1 for adiabatic mapping.
    pub adiabaticity: f64,
}

/// EIT group velocity v_g = 2 |Omega_c|^2 / (alpha gamma_P) in cm/us.
pub fn group_velocity(m: &LambdaMedium, omega_c: f64) -> Result<f64, EitError> {
    m.validate()?;
    if m.alpha <= 0.0 {
        return Err(EitError::NoMedium);
    }
    if !omega_c.is_finite() || omega_c < 0.0 {
        return Err(EitError::InvalidSchedule(format!(
            "control Rabi frequency must be >= 0 (got {omega_c})"
        )));
    }
    Ok(2.0 * omega_c * omega_c / (m.alpha * m.gamma_p()))
}

/// Evaluate the three feasibility margins for a photon of duration `tau`.
pub fn check_feasibility(
    m: &LambdaMedium,
    omega_c: f64,
    tau: f64,
) -> Result<FeasibilityReport, EitError> {
    if !(tau > 0.0) {
        return Err(EitError::InvalidSchedule(format!("tau must be positive (got {tau})")));
    }
    if !(omega_c > 0.0) {
        return Err(EitError::InvalidSchedule(
            "feasibility margins need a positive control field".into(),
        ));
    }
    let v_g = group_velocity(m, omega_c)?;
    Ok(FeasibilityReport {
        lower_margin: v_g * tau / m.length,
        upper_margin: 1.0 / (tau * v_g * (m.alpha / m.length).sqrt()),
        adiabaticity: tau * m.optical_depth() * m.gamma_p(),
    })
}

/// Detected efficiency after a dark hold of duration `hold`:
/// eta0 exp(-2 gamma_S_eff hold).
pub fn storage_efficiency_decay(eta0: f64, m: &LambdaMedium, hold: f64) -> f64 {
    eta0 * (-2.0 * m.gamma_s_eff() * hold).exp()
}

/// Spin-wave profile at the midpoint of the dark hold.
pub fn spin_wave_profile(result: &PropagationResult) -> Result<&SpinWave, EitError> {
    if result.stored_fraction < 1e-4 {
        return Err(EitError::NothingStored(result.stored_fraction));
    }
    Ok(&result.spin_wave_snapshot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn test_medium() -> LambdaMedium {
        LambdaMedium {
            length: 20.0,
            alpha: 0.75,
            gamma_p_natural: std::f64::consts::TAU * 3.0,
            collision_rate: 0.0,
            gamma_s: 0.0,
            diffusion_const: 0.0,
            wavevector_mismatch: 0.0,
        }
    }

    #[test]
    fn group_velocity_hand_value() {
        let m = LambdaMedium {
            length: 1.0,
            alpha: 2.0,
            gamma_p_natural: 1.0,
            collision_rate: 0.0,
            gamma_s: 0.0,
            diffusion_const: 0.0,
            wavevector_mismatch: 0.0,
        };
        assert_relative_eq!(group_velocity(&m, 1.0).unwrap(), 1.0);
        // quadratic in the control field
        assert_relative_eq!(group_velocity(&m, 2.0).unwrap(), 4.0);
        // stopped light
        assert_eq!(group_velocity(&m, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn group_velocity_requires_medium() {
        let mut m = test_medium();
        m.alpha = 0.0;
        assert!(matches!(group_velocity(&m, 1.0), Err(EitError::NoMedium)));
    }

    #[test]
    fn feasibility_boundary_case() {
        // pick omega so that v_g / L = 1 / tau exactly
        let m = test_medium();
        let tau = 1.0;
        let v_g_want = m.length / tau;
        let omega = (v_g_want * m.alpha * m.gamma_p() / 2.0).sqrt();
        let rep = check_feasibility(&m, omega, tau).unwrap();
        assert_relative_eq!(rep.lower_margin, 1.0, epsilon = 1e-12);
        assert!(rep.adiabaticity > 1.0);
    }

    #[test]
    fn feasibility_scales_with_tau() {
        let m = test_medium();
        let a = check_feasibility(&m, 10.0, 1.0).unwrap();
        let b = check_feasibility(&m, 10.0, 10.0).unwrap();
        assert_relative_eq!(b.adiabaticity, 10.0 * a.adiabaticity, max_relative = 1e-12);
        assert_relative_eq!(b.upper_margin, a.upper_margin / 10.0, max_relative = 1e-12);
    }

    #[test]
    fn gamma_s_eff_includes_motional_dephasing() {
        let mut m = test_medium();
        m.gamma_s = 0.01;
        m.diffusion_const = 2e-5;
        m.wavevector_mismatch = 10.0;
        assert_relative_eq!(m.gamma_s_eff(), 0.01 + 2e-5 * 100.0);
    }

    #[test]
    fn hold_decay_identities() {
        let mut m = test_medium();
        m.gamma_s = 0.1;
        assert_relative_eq!(storage_efficiency_decay(0.8, &m, 0.0), 0.8);
        // gamma_S T = ln(2)/2 halves the efficiency
        let t_half = 0.5 * 2.0_f64.ln() / m.gamma_s;
        assert_relative_eq!(storage_efficiency_decay(0.8, &m, t_half), 0.4, max_relative = 1e-12);
    }

    #[test]
    fn schedule_program_shape() {
        let grid = TimeGrid::from_span(0.0, 10.0, 1001).unwrap();
        let s =
            ControlSchedule::write_hold_read(grid, 50.0, 3.0, 2.0, 0.1, Direction::Counter).unwrap();
        assert_relative_eq!(s.value(0.0), 50.0);
        assert_relative_eq!(s.value(2.99), 50.0);
        assert_eq!(s.value(3.05) < 50.0, true);
        assert_eq!(s.value(4.0), 0.0);
        assert_relative_eq!(s.value(9.0), 50.0);
        assert_relative_eq!(s.t_read_start(), 5.1);
    }

    #[test]
    fn schedule_must_cover_read_ramp() {
        let grid = TimeGrid::from_span(0.0, 4.0, 401).unwrap();
        assert!(ControlSchedule::write_hold_read(grid, 50.0, 3.0, 2.0, 0.1, Direction::Co).is_err());
    }

    #[test]
    fn constant_schedule_never_stores() {
        let grid = TimeGrid::from_span(0.0, 4.0, 401).unwrap();
        let s = ControlSchedule::constant(grid, 25.0, Direction::Co).unwrap();
        assert!(!s.has_storage());
        assert_relative_eq!(s.value(2.0), 25.0);
    }
}
