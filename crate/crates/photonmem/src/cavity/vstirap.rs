//! Single-excitation V-STIRAP dynamics.
//!
//! The driven three-level atom plus one cavity mode is closed within the
//! single-excitation manifold: amplitudes `c_u` (start ground state, no
//! photon), `c_e` (excited, no photon) and `c_g` (target ground state, one
//! cavity photon) evolve under
//!
//! ```text
//!   dc_u/dt = -i (Omega/2) c_e
//!   dc_e/dt = -(gamma + i Delta) c_e - i (Omega/2) c_u - i g c_g
//!   dc_g/dt = -kappa c_g - i g c_e
//! ```
//!
//! The emitted photon amplitude is `phi(t) = sqrt(2 kappa) c_g(t)`. Cavity
//! and free-space decay probabilities are accumulated as extra quadrature
//! components of the same Runge-Kutta step, so the probability budget
//! `p_emit + p_spont + p_residual = 1` holds to integrator accuracy.

use num_complex::Complex64;

use super::{CavityError, CavityParams, DrivePulse};
use crate::grid::PhotonWavepacket;

/// Tolerated change of `p_emit` under step halving.
pub const CONVERGENCE_LIMIT: f64 = 1e-4;

/// Per-run integrator diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverDiag {
    /// Internal step actually used (us).
    pub dt: f64,
    /// Change of `p_emit` between the last two refinement levels.
    pub refinement_delta: f64,
}

/// Outcome of a V-STIRAP emission run.
#[derive(Debug, Clone)]
pub struct EmissionRecord {
    pub photon: PhotonWavepacket,
    /// Probability emitted through the cavity mode, 2 kappa int |c_g|^2 dt.
    pub p_emit: f64,
    /// Probability lost to atomic spontaneous decay, 2 gamma int |c_e|^2 dt.
    pub p_spont: f64,
    /// Population left in the atom-cavity system at the end of the window.
    pub p_residual: f64,
    pub diag: SolverDiag,
}

#[derive(Clone, Copy)]
struct State {
    u: Complex64,
    e: Complex64,
    g: Complex64,
    i_emit: f64,
    i_spont: f64,
}

impl State {
    fn initial() -> Self {
        State {
            u: Complex64::ONE,
            e: Complex64::ZERO,
            g: Complex64::ZERO,
            i_emit: 0.0,
            i_spont: 0.0,
        }
    }

    fn axpy(&self, k: &Derivative, h: f64) -> Self {
        State {
            u: self.u + k.u * h,
            e: self.e + k.e * h,
            g: self.g + k.g * h,
            i_emit: self.i_emit + k.i_emit * h,
            i_spont: self.i_spont + k.i_spont * h,
        }
    }
}

#[derive(Clone, Copy)]
struct Derivative {
    u: Complex64,
    e: Complex64,
    g: Complex64,
    i_emit: f64,
    i_spont: f64,
}

struct Rates {
    g: f64,
    kappa: f64,
    gamma: f64,
    detuning: f64,
}

fn rhs(r: &Rates, omega: f64, s: &State) -> Derivative {
    let i = Complex64::I;
    let half = 0.5 * omega;
    Derivative {
        u: -i * half * s.e,
        e: -Complex64::new(r.gamma, r.detuning) * s.e - i * half * s.u - i * r.g * s.g,
        g: -r.kappa * s.g - i * r.g * s.e,
        i_emit: 2.0 * r.kappa * s.g.norm_sqr(),
        i_spont: 2.0 * r.gamma * s.e.norm_sqr(),
    }
}

/// One fixed-step RK4 pass over the drive grid with `n_sub` substeps per
/// grid interval, recording `c_g` at the grid nodes.
fn integrate(r: &Rates, drive: &DrivePulse, n_sub: usize) -> (Vec<Complex64>, State) {
    let grid = drive.grid;
    let h = grid.dt / n_sub as f64;
    let mut s = State::initial();
    let mut cg_nodes = Vec::with_capacity(grid.n);
    cg_nodes.push(s.g);
    for node in 0..grid.n - 1 {
        let t_node = grid.t(node);
        for sub in 0..n_sub {
            let t = t_node + h * sub as f64;
            let om0 = drive.value(t);
            let om_half = drive.value(t + 0.5 * h);
            let om1 = drive.value(t + h);
            let k1 = rhs(r, om0, &s);
            let k2 = rhs(r, om_half, &s.axpy(&k1, 0.5 * h));
            let k3 = rhs(r, om_half, &s.axpy(&k2, 0.5 * h));
            let k4 = rhs(r, om1, &s.axpy(&k3, h));
            s = State {
                u: s.u + (k1.u + 2.0 * (k2.u + k3.u) + k4.u) * (h / 6.0),
                e: s.e + (k1.e + 2.0 * (k2.e + k3.e) + k4.e) * (h / 6.0),
                g: s.g + (k1.g + 2.0 * (k2.g + k3.g) + k4.g) * (h / 6.0),
                i_emit: s.i_emit + (k1.i_emit + 2.0 * (k2.i_emit + k3.i_emit) + k4.i_emit) * (h / 6.0),
                i_spont: s.i_spont
                    + (k1.i_spont + 2.0 * (k2.i_spont + k3.i_spont) + k4.i_spont) * (h / 6.0),
            };
        }
        cg_nodes.push(s.g);
    }
    (cg_nodes, s)
}

/// Integrate the V-STIRAP emission driven by `drive` at one-photon detuning
/// `detuning` (rad/us).
///
/// The internal step is refined until halving it moves `p_emit` by less
/// than [`CONVERGENCE_LIMIT`]; failure to converge is an error.
pub fn simulate_vstirap(
    p: &CavityParams,
    drive: &DrivePulse,
    detuning: f64,
) -> Result<EmissionRecord, CavityError> {
    p.validate()?;
    if !detuning.is_finite() {
        return Err(CavityError::InvalidParams("detuning must be finite".into()));
    }
    let rates = Rates { g: p.g, kappa: p.kappa, gamma: p.gamma, detuning };

    // Resolve the fastest rate in the problem comfortably at the first level.
    let rate_max = [p.g, p.kappa, p.gamma, drive.max_omega(), detuning.abs(), 1.0]
        .into_iter()
        .fold(0.0_f64, f64::max);
    let mut n_sub = (drive.grid.dt * rate_max / 0.05).ceil().max(1.0) as usize;

    let (mut cg, mut end) = integrate(&rates, drive, n_sub);
    let mut p_emit = end.i_emit;
    for _ in 0..8 {
        n_sub *= 2;
        let (cg_f, end_f) = integrate(&rates, drive, n_sub);
        let p_emit_f = end_f.i_emit;
        let delta = (p_emit_f - p_emit).abs();
        cg = cg_f;
        end = end_f;
        p_emit = p_emit_f;
        if delta <= CONVERGENCE_LIMIT {
            let scale = (2.0 * p.kappa).sqrt();
            let amplitude = cg.iter().map(|c| c * scale).collect();
            let photon = PhotonWavepacket::new(drive.grid, amplitude)?;
            return Ok(EmissionRecord {
                photon,
                p_emit,
                p_spont: end.i_spont,
                p_residual: end.u.norm_sqr() + end.e.norm_sqr() + end.g.norm_sqr(),
                diag: SolverDiag { dt: drive.grid.dt / n_sub as f64, refinement_delta: delta },
            });
        }
    }
    Err(CavityError::NotConverged {
        delta: f64::NAN,
        dt: drive.grid.dt / n_sub as f64,
        limit: CONVERGENCE_LIMIT,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::TimeGrid;
    use approx::assert_relative_eq;
    use std::f64::consts::{PI, TAU};

    fn params() -> CavityParams {
        CavityParams {
            g: TAU * 15.0,
            kappa: TAU * 12.0,
            gamma: TAU * 3.0,
            t1: 0.0,
            t2: 100e-6,
            h: 0.0,
            cavity_length: 100.0,
            mode_waist: 10.0,
        }
    }

    fn slow_ramp(grid: TimeGrid, omega_max: f64, t_ramp: f64) -> DrivePulse {
        DrivePulse::from_fn(grid, |t| {
            if t < t_ramp {
                omega_max * (0.5 * PI * t / t_ramp).sin().powi(2)
            } else {
                omega_max
            }
        })
        .unwrap()
    }

    #[test]
    fn no_drive_no_photon() {
        let grid = TimeGrid::from_span(0.0, 2.0, 501).unwrap();
        let drive = DrivePulse::from_fn(grid, |_| 0.0).unwrap();
        let rec = simulate_vstirap(&params(), &drive, 0.0).unwrap();
        assert_eq!(rec.p_emit, 0.0);
        assert!(rec.photon.norm_sq() == 0.0);
        assert_relative_eq!(rec.p_residual, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn probability_budget_closes() {
        let grid = TimeGrid::from_span(0.0, 6.0, 1201).unwrap();
        let p = params();
        let drive = slow_ramp(grid, 0.4 * p.g, 3.0);
        let rec = simulate_vstirap(&p, &drive, 0.0).unwrap();
        let total = rec.p_emit + rec.p_spont + rec.p_residual;
        assert!((total - 1.0).abs() < 1e-6, "budget off by {}", (total - 1.0).abs());
        assert!(rec.p_emit > 0.5);
    }

    #[test]
    fn adiabatic_emission_matches_branching_ratio() {
        // Slow smooth ramp: p_emit approaches g^2/(gamma kappa + g^2).
        let p = params();
        let grid = TimeGrid::from_span(0.0, 14.0, 2801).unwrap();
        let drive = slow_ramp(grid, 0.5 * p.g, 8.0);
        let rec = simulate_vstirap(&p, &drive, 0.0).unwrap();
        assert!(rec.p_residual < 1e-3, "transfer incomplete: {}", rec.p_residual);
        let bound = p.g * p.g / (p.gamma * p.kappa + p.g * p.g);
        assert!(
            (rec.p_emit - bound).abs() / bound < 0.05,
            "p_emit {} vs bound {}",
            rec.p_emit,
            bound
        );
    }

    #[test]
    fn detuned_drive_still_conserves_probability() {
        let p = params();
        let grid = TimeGrid::from_span(0.0, 6.0, 1201).unwrap();
        let drive = slow_ramp(grid, 0.3 * p.g, 2.0);
        let rec = simulate_vstirap(&p, &drive, TAU * 5.0).unwrap();
        let total = rec.p_emit + rec.p_spont + rec.p_residual;
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn refinement_delta_is_reported_small() {
        let p = params();
        let grid = TimeGrid::from_span(0.0, 8.0, 1601).unwrap();
        let drive = slow_ramp(grid, 0.4 * p.g, 4.0);
        let rec = simulate_vstirap(&p, &drive, 0.0).unwrap();
        assert!(rec.diag.refinement_delta < CONVERGENCE_LIMIT);
    }
}
