//! Weak-probe Maxwell-Bloch solver in the retarded frame.
//!
//! With t_r = t - z/c the linearized equations have no time derivative on
//! the field, so the system is marched slice by slice along z:
//!
//! ```text
//!   dP/dt = -(gamma_P + i Delta) P + i E + i Omega_c(t) S
//!   dS/dt = -gamma_S_eff S + i Omega_c(t) P
//!   dE/dz = i (alpha gamma_P / 2) P
//! ```
//!
//! The E-equation prefactor makes the Omega_c = 0 steady state reproduce
//! Beer's law exactly. Per slice, (P, S) is advanced by fourth-order
//! Runge-Kutta; because the system is linear, each time step is an affine
//! map precomputed once per run and shared by every slice. The z march uses
//! second-order Adams-Bashforth with a Heun starter.
//!
//! Counter-propagating retrieval uses the equivalent-geometry transform:
//! the run is cut at the end of the dark hold, the spin wave is spatially
//! reversed, and readout proceeds forward; reported field-map coordinates
//! are mapped back to the physical cell.

use num_complex::Complex64;

use super::{ControlSchedule, Direction, EitError, LambdaMedium, SpinWave};
use crate::grid::{trapezoid, PhotonWavepacket, TimeGrid};

type C64 = Complex64;

/// Numerical controls for [`propagate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Number of z intervals across the cell.
    pub n_z: usize,
    /// Internal time step cap: dt <= dt_factor / max(gamma_P, Omega_c).
    pub dt_factor: f64,
    /// Re-run at (2 n_z, dt/2) and fail if the efficiency moves by > 1%.
    pub check_convergence: bool,
    /// One-photon detuning Delta (rad/us).
    pub detuning: f64,
    /// Approximate field-map resolution (rows along z, columns along t).
    pub fieldmap_z: usize,
    pub fieldmap_t: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n_z: 400,
            dt_factor: 0.02,
            check_convergence: true,
            detuning: 0.0,
            fieldmap_z: 60,
            fieldmap_t: 220,
        }
    }
}

/// Relative efficiency change tolerated under grid refinement.
pub const CONVERGENCE_LIMIT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceDiag {
    pub eta_coarse: f64,
    pub eta_fine: f64,
    pub rel_change: f64,
}

/// One `|E(z, t_r)|^2` sample of the propagation record.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct FieldSample {
    pub z: f64,
    pub t: f64,
    pub intensity: f64,
}

/// Full record of a storage/retrieval run.
#[derive(Debug, Clone)]
pub struct PropagationResult {
    /// Output-port field over the whole window (retarded-time frame).
    pub transmitted: PhotonWavepacket,
    /// Probability that left the cell before the control switch-off completed.
    pub leaked_fraction: f64,
    /// Spin-wave excitation probability at the start of the dark hold.
    pub stored_fraction: f64,
    /// Output field from the readout phase onward.
    pub retrieved: PhotonWavepacket,
    /// Retrieved energy over input energy.
    pub efficiency: f64,
    pub field_map: Vec<FieldSample>,
    /// Spin wave at the midpoint of the dark hold.
    pub spin_wave_snapshot: SpinWave,
    pub direction: Direction,
    pub input_norm: f64,
    pub convergence: Option<ConvergenceDiag>,
}

// -------------------------------------------------------------------------
// 2x2 complex matrices (row-major [m00, m01, m10, m11])

type Mat2 = [C64; 4];

fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

fn mat_axpy(acc: &mut Mat2, m: &Mat2, s: f64) {
    for (a, b) in acc.iter_mut().zip(m) {
        *a += b * s;
    }
}

/// Precomputed affine RK4 step maps: x_{k+1} = a x_k + pe0 E_k + pe1 E_{k+1}.
struct StepMaps {
    a: Vec<Mat2>,
    pe0: Vec<[C64; 2]>,
    pe1: Vec<[C64; 2]>,
}

fn build_maps(
    schedule: &ControlSchedule,
    gamma_p: f64,
    gamma_s_eff: f64,
    detuning: f64,
    t_start: f64,
    dt: f64,
    n_t: usize,
) -> StepMaps {
    let diag_p = -C64::new(gamma_p, detuning);
    let diag_s = -C64::new(gamma_s_eff, 0.0);
    let m_of = |omega: f64| -> Mat2 {
        let c = C64::new(0.0, omega);
        [diag_p, c, c, diag_s]
    };
    let identity: Mat2 = [C64::ONE, C64::ZERO, C64::ZERO, C64::ONE];

    let mut a = Vec::with_capacity(n_t - 1);
    let mut pe0 = Vec::with_capacity(n_t - 1);
    let mut pe1 = Vec::with_capacity(n_t - 1);
    for k in 0..n_t - 1 {
        let t0 = t_start + dt * k as f64;
        let m1 = m_of(schedule.value(t0));
        let mh = m_of(schedule.value(t0 + 0.5 * dt));
        let m2 = m_of(schedule.value(t0 + dt));

        let mh_m1 = mat_mul(&mh, &m1);
        let mh2 = mat_mul(&mh, &mh);
        let m2_mh = mat_mul(&m2, &mh);
        let mh2_m1 = mat_mul(&mh2, &m1);
        let m2_mh2 = mat_mul(&m2, &mh2);
        let m2_mh2_m1 = mat_mul(&m2_mh2, &m1);

        // A = I + dt/6 (M1 + 4 Mh + M2) + dt^2/6 (Mh M1 + Mh^2 + M2 Mh)
        //       + dt^3/12 (Mh^2 M1 + M2 Mh^2) + dt^4/24 M2 Mh^2 M1
        let mut step = identity;
        mat_axpy(&mut step, &m1, dt / 6.0);
        mat_axpy(&mut step, &mh, 4.0 * dt / 6.0);
        mat_axpy(&mut step, &m2, dt / 6.0);
        mat_axpy(&mut step, &mh_m1, dt * dt / 6.0);
        mat_axpy(&mut step, &mh2, dt * dt / 6.0);
        mat_axpy(&mut step, &m2_mh, dt * dt / 6.0);
        mat_axpy(&mut step, &mh2_m1, dt.powi(3) / 12.0);
        mat_axpy(&mut step, &m2_mh2, dt.powi(3) / 12.0);
        mat_axpy(&mut step, &m2_mh2_m1, dt.powi(4) / 24.0);
        a.push(step);

        // forcing f(t) = i E(t) e1, with E at the half step interpolated as
        // the mean of the endpoints:
        // coeff(f0)  = dt/6 [I + dt Mh + dt^2/2 Mh^2 + dt^3/4 M2 Mh^2]
        // coeff(fh)  = dt/6 [4 I + dt (Mh + M2) + dt^2/2 M2 Mh]
        // coeff(f1)  = dt/6 I
        let mut c0 = identity;
        mat_axpy(&mut c0, &mh, dt);
        mat_axpy(&mut c0, &mh2, dt * dt / 2.0);
        mat_axpy(&mut c0, &m2_mh2, dt.powi(3) / 4.0);
        let mut ch: Mat2 = [4.0 * C64::ONE, C64::ZERO, C64::ZERO, 4.0 * C64::ONE];
        mat_axpy(&mut ch, &mh, dt);
        mat_axpy(&mut ch, &m2, dt);
        mat_axpy(&mut ch, &m2_mh, dt * dt / 2.0);

        let i_dt6 = C64::new(0.0, dt / 6.0);
        // matrices applied to e1 = (1, 0): take the first column
        pe0.push([i_dt6 * (c0[0] + 0.5 * ch[0]), i_dt6 * (c0[2] + 0.5 * ch[2])]);
        pe1.push([i_dt6 * (0.5 * ch[0] + 1.0), i_dt6 * (0.5 * ch[2])]);
    }
    StepMaps { a, pe0, pe1 }
}

// -------------------------------------------------------------------------
// z march

struct MarchOut {
    /// E at the exit node over the marched time range.
    e_exit: Vec<C64>,
    /// (P, S) per z node at each requested capture index.
    captures: Vec<Vec<(C64, C64)>>,
    /// (node index, local time index, |E|^2) samples.
    field: Vec<(usize, usize, f64)>,
}

struct March<'a> {
    maps: &'a StepMaps,
    /// First global internal time index of this phase.
    k0: usize,
    /// Number of internal time samples in this phase.
    len: usize,
    n_z: usize,
    dz: f64,
    chi: f64,
    /// (P, S) at the phase start per z node; zeros when absent.
    init_ps: Option<&'a [(C64, C64)]>,
    /// Global internal indices at which to capture (P, S) per node, sorted.
    captures: &'a [usize],
    stride_z: usize,
    stride_t: usize,
    /// Field at the entry node over this phase's time range.
    boundary: &'a [C64],
}

impl March<'_> {
    fn init_at(&self, node: usize) -> (C64, C64) {
        self.init_ps.map_or((C64::ZERO, C64::ZERO), |v| v[node])
    }

    /// Advance (P, S) through the time range at one slice given the local
    /// field, filling `p_out` and recording captures for this node.
    fn integrate_slice(
        &self,
        node: usize,
        e: &[C64],
        p_out: &mut [C64],
        captures_out: Option<&mut Vec<Vec<(C64, C64)>>>,
    ) {
        let (mut pp, mut ss) = self.init_at(node);
        p_out[0] = pp;
        let mut cap_iter = self.captures.iter().enumerate().peekable();
        let mut record = |k_global: usize, pp: C64, ss: C64, out: &mut Option<&mut Vec<Vec<(C64, C64)>>>| {
            while let Some((ci, &ck)) = cap_iter.peek().copied() {
                if ck == k_global {
                    if let Some(ref mut caps) = out {
                        caps[ci][node] = (pp, ss);
                    }
                    cap_iter.next();
                } else {
                    break;
                }
            }
        };
        let mut captures_out = captures_out;
        record(self.k0, pp, ss, &mut captures_out);
        let a = &self.maps.a[self.k0..self.k0 + self.len - 1];
        let p0 = &self.maps.pe0[self.k0..self.k0 + self.len - 1];
        let p1 = &self.maps.pe1[self.k0..self.k0 + self.len - 1];
        for (k, ((m, (b0, b1)), w)) in
            a.iter().zip(p0.iter().zip(p1)).zip(e.windows(2)).enumerate()
        {
            let (e0, e1) = (w[0], w[1]);
            let np = m[0] * pp + m[1] * ss + b0[0] * e0 + b1[0] * e1;
            let ns = m[2] * pp + m[3] * ss + b0[1] * e0 + b1[1] * e1;
            pp = np;
            ss = ns;
            p_out[k + 1] = pp;
            record(self.k0 + k + 1, pp, ss, &mut captures_out);
        }
    }

    fn run(&self) -> MarchOut {
        let len = self.len;
        let mut e: Vec<C64> = self.boundary.to_vec();
        let mut captures = vec![vec![(C64::ZERO, C64::ZERO); self.n_z + 1]; self.captures.len()];
        let mut field = Vec::new();
        let mut e_exit = Vec::new();
        let mut p_curr = vec![C64::ZERO; len];
        let mut f_prev = vec![C64::ZERO; len];
        let i_chi = C64::new(0.0, self.chi);

        for node in 0..=self.n_z {
            self.integrate_slice(node, &e, &mut p_curr, Some(&mut captures));
            if node % self.stride_z == 0 || node == self.n_z {
                for k in (0..len).step_by(self.stride_t) {
                    field.push((node, k, e[k].norm_sqr()));
                }
            }
            if node == self.n_z {
                e_exit = e;
                break;
            }
            // f = i chi P at this node
            let f_curr: Vec<C64> = p_curr.iter().map(|p| i_chi * p).collect();
            if node == 0 {
                // Heun starter: predict, re-evaluate at the next node, correct.
                let e_pred: Vec<C64> =
                    e.iter().zip(&f_curr).map(|(ek, fk)| ek + fk * self.dz).collect();
                let mut p_star = vec![C64::ZERO; len];
                self.integrate_slice(1, &e_pred, &mut p_star, None);
                for ((ek, fk), ps) in e.iter_mut().zip(&f_curr).zip(&p_star) {
                    *ek += (fk + i_chi * ps) * (0.5 * self.dz);
                }
            } else {
                for ((ek, fc), fp) in e.iter_mut().zip(&f_curr).zip(&f_prev) {
                    *ek += (fc * 1.5 - fp * 0.5) * self.dz;
                }
            }
            f_prev = f_curr;
        }
        MarchOut { e_exit, captures, field }
    }
}

// -------------------------------------------------------------------------
// public entry point

/// Propagate `input` through the cell under `schedule`.
///
/// Returns the full storage record; with `opts.check_convergence` the run is
/// repeated at doubled z resolution and halved time step and the refined
/// result is returned, failing if the efficiency moves by more than 1%.
pub fn propagate(
    m: &LambdaMedium,
    input: &PhotonWavepacket,
    schedule: &ControlSchedule,
    opts: &SolverOptions,
) -> Result<PropagationResult, EitError> {
    m.validate()?;
    if opts.n_z < 4 {
        return Err(EitError::InvalidSchedule("need at least 4 z intervals".into()));
    }
    if !(opts.dt_factor > 0.0) {
        return Err(EitError::InvalidSchedule("dt_factor must be positive".into()));
    }
    let rep = schedule.grid;
    let input_end = input.grid().t_end();
    if input_end > rep.t_end() + 1e-9 || input.grid().t_start < rep.t_start - 1e-9 {
        return Err(EitError::ScheduleTooShort {
            input_end,
            limit: format!("window is [{}, {}] us", rep.t_start, rep.t_end()),
        });
    }
    if schedule.has_storage() && input_end > schedule.t_read_start() + 1e-9 {
        return Err(EitError::ScheduleTooShort {
            input_end,
            limit: format!("readout starts at {} us", schedule.t_read_start()),
        });
    }

    let mut result = run_once(m, input, schedule, opts, opts.n_z, opts.dt_factor)?;
    if opts.check_convergence {
        let eta_coarse = result.efficiency;
        let fine = run_once(m, input, schedule, opts, 2 * opts.n_z, 0.5 * opts.dt_factor)?;
        let eta_fine = fine.efficiency;
        let rel_change = (eta_fine - eta_coarse).abs() / eta_fine.abs().max(1e-6);
        if rel_change > CONVERGENCE_LIMIT {
            return Err(EitError::NotConverged { eta_coarse, eta_fine, rel_change });
        }
        result = fine;
        result.convergence = Some(ConvergenceDiag { eta_coarse, eta_fine, rel_change });
    }
    Ok(result)
}

fn run_once(
    m: &LambdaMedium,
    input: &PhotonWavepacket,
    schedule: &ControlSchedule,
    opts: &SolverOptions,
    n_z: usize,
    dt_factor: f64,
) -> Result<PropagationResult, EitError> {
    let rep = schedule.grid;
    let gamma_p = m.gamma_p();
    let gamma_s_eff = m.gamma_s_eff();
    let chi = 0.5 * m.alpha * gamma_p;
    let dz = m.length / n_z as f64;

    let rate_max = gamma_p.max(schedule.level).max(schedule.read_level).max(opts.detuning.abs());
    let m_sub = (rep.dt * rate_max / dt_factor).ceil().max(1.0) as usize;
    let dt = rep.dt / m_sub as f64;
    let n_t = (rep.n - 1) * m_sub + 1;
    let idx = |t: f64| -> usize {
        (((t - rep.t_start) / dt).round().max(0.0) as usize).min(n_t - 1)
    };

    let (k_ramp_end, k_mid_hold, k_handoff) = if schedule.has_storage() {
        (
            idx(schedule.t_store_start()),
            idx(schedule.t_store_start() + 0.5 * schedule.hold_time),
            idx(schedule.t_read_start()),
        )
    } else {
        (n_t - 1, n_t - 1, n_t - 1)
    };

    let maps = build_maps(schedule, gamma_p, gamma_s_eff, opts.detuning, rep.t_start, dt, n_t);

    // boundary field at z = 0 over the write window
    let e_in: Vec<C64> =
        (0..=k_handoff).map(|k| input.sample_at(rep.t_start + dt * k as f64)).collect();
    let input_norm = trapezoid(dt, e_in.iter().map(|e| e.norm_sqr()));
    if input_norm <= 0.0 {
        return Err(EitError::InvalidSchedule("input wavepacket carries no energy".into()));
    }

    let stride_z = (n_z / opts.fieldmap_z.max(1)).max(1);
    let stride_t = (n_t / opts.fieldmap_t.max(1)).max(1);

    let mut captures = vec![k_ramp_end, k_mid_hold, k_handoff];
    captures.sort_unstable();
    captures.dedup();

    let phase_a = March {
        maps: &maps,
        k0: 0,
        len: k_handoff + 1,
        n_z,
        dz,
        chi,
        init_ps: None,
        captures: &captures,
        stride_z,
        stride_t,
        boundary: &e_in,
    }
    .run();

    let cap_pos = |k: usize| captures.iter().position(|&c| c == k).expect("capture present");
    let scale_s = (0.5 * m.alpha * gamma_p).sqrt();

    let at_ramp_end = &phase_a.captures[cap_pos(k_ramp_end)];
    let stored_fraction =
        trapezoid(dz, at_ramp_end.iter().map(|(_, s)| s.norm_sqr())) * scale_s * scale_s;

    let snapshot_raw = &phase_a.captures[cap_pos(k_mid_hold)];
    let spin_wave_snapshot = SpinWave {
        z: (0..=n_z).map(|j| dz * j as f64).collect(),
        amplitude: snapshot_raw.iter().map(|(_, s)| s * scale_s).collect(),
    };

    let leaked_fraction =
        trapezoid(dt, phase_a.e_exit[..=k_ramp_end.min(phase_a.e_exit.len() - 1)]
            .iter()
            .map(|e| e.norm_sqr()))
            / input_norm;

    // readout phase
    let (e_exit_b, field_b, eta) = if schedule.has_storage() && k_handoff < n_t - 1 {
        let at_handoff = &phase_a.captures[cap_pos(k_handoff)];
        let init_b: Vec<(C64, C64)> = match schedule.retrieval_direction {
            Direction::Co => at_handoff.clone(),
            Direction::Counter => (0..=n_z).map(|j| at_handoff[n_z - j]).collect(),
        };
        let len_b = n_t - k_handoff;
        let zeros = vec![C64::ZERO; len_b];
        let phase_b = March {
            maps: &maps,
            k0: k_handoff,
            len: len_b,
            n_z,
            dz,
            chi,
            init_ps: Some(&init_b),
            captures: &[],
            stride_z,
            stride_t,
            boundary: &zeros,
        }
        .run();
        let read_energy = trapezoid(dt, phase_b.e_exit.iter().map(|e| e.norm_sqr()));
        (phase_b.e_exit, phase_b.field, read_energy / input_norm)
    } else {
        (Vec::new(), Vec::new(), 0.0)
    };

    // assemble reporting-grid wavepackets
    let exit_at = |k: usize| -> C64 {
        if k <= k_handoff {
            phase_a.e_exit[k]
        } else {
            e_exit_b[k - k_handoff]
        }
    };
    let transmitted_amp: Vec<C64> = (0..rep.n).map(|i| exit_at(i * m_sub)).collect();
    let transmitted = PhotonWavepacket::new(rep, transmitted_amp)?;

    let i_read0 = k_handoff.div_ceil(m_sub).min(rep.n - 2);
    let read_grid = TimeGrid::new(rep.t(i_read0), rep.dt, rep.n - i_read0)?;
    let retrieved_amp: Vec<C64> = (i_read0..rep.n).map(|i| exit_at(i * m_sub)).collect();
    let retrieved = PhotonWavepacket::new(read_grid, retrieved_amp)?;

    // field map in physical coordinates
    let mut field_map = Vec::with_capacity(phase_a.field.len() + field_b.len());
    for (node, k, intensity) in phase_a.field {
        field_map.push(FieldSample {
            z: dz * node as f64,
            t: rep.t_start + dt * k as f64,
            intensity,
        });
    }
    for (node, k, intensity) in field_b {
        let z = match schedule.retrieval_direction {
            Direction::Co => dz * node as f64,
            Direction::Counter => m.length - dz * node as f64,
        };
        field_map.push(FieldSample {
            z,
            t: rep.t_start + dt * (k_handoff + k) as f64,
            intensity,
        });
    }

    Ok(PropagationResult {
        transmitted,
        leaked_fraction,
        stored_fraction,
        retrieved,
        efficiency: eta,
        field_map,
        spin_wave_snapshot,
        direction: schedule.retrieval_direction,
        input_norm,
        convergence: None,
    })
}
