//! Indistinguishability measures for photon wavepackets: temporal mode
//! overlap and Hong-Ou-Mandel coincidence at a balanced beam splitter,
//! including time-resolved quantum beats between detuned photons.

use num_complex::Complex64;
use thiserror::Error;

use crate::grid::{trapezoid, PhotonWavepacket, TimeGrid};

/// Largest per-axis sample count of a stored coincidence density.
const MAX_DENSITY_N: usize = 1401;
/// Norm tolerance for "unit-norm" single photons fed to the beam splitter.
const UNIT_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum InterferenceError {
    #[error("zero-norm wavepacket has no temporal mode")]
    ZeroNorm,
    #[error("unnormalized input: squared norm {0} (pass unit-norm photons or normalize first)")]
    Unnormalized(f64),
    #[error("incompatible grids: {0}")]
    IncompatibleGrids(String),
}

/// Inner product and normalized overlap fidelity of two wavepackets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapReport {
    /// `integral phi_a^*(t) phi_b(t) dt`.
    pub overlap: Complex64,
    /// `|overlap|^2` normalized by both squared norms; in [0, 1].
    pub fidelity: f64,
}

/// Joint two-detector coincidence statistics behind a 50:50 beam splitter.
#[derive(Debug, Clone)]
pub struct CoincidenceRecord {
    /// Total coincidence probability across the output ports.
    pub integrated: f64,
    /// Time grid shared by both axes of the density.
    pub grid: TimeGrid,
    /// Joint detection density p(t1, t2), row-major over (t1, t2).
    pub density: Vec<f64>,
}

impl CoincidenceRecord {
    pub fn density_at(&self, i: usize, j: usize) -> f64 {
        self.density[i * self.grid.n + j]
    }

    /// Marginal of the density along the detection-time difference
    /// tau = t2 - t1, returned as (tau, value) pairs on the grid spacing.
    pub fn tau_marginal(&self) -> Vec<(f64, f64)> {
        let n = self.grid.n;
        let dt = self.grid.dt;
        (1 - n as isize..n as isize)
            .map(|k| {
                let mut acc = 0.0;
                let (lo, hi) = if k >= 0 { (0, n - k as usize) } else { ((-k) as usize, n) };
                for i in lo..hi {
                    let j = (i as isize + k) as usize;
                    acc += self.density_at(i, j);
                }
                (k as f64 * dt, acc * dt)
            })
            .collect()
    }
}

/// Common grid covering both packets, capped to keep densities tractable.
fn common_grid(a: &PhotonWavepacket, b: &PhotonWavepacket) -> Result<TimeGrid, InterferenceError> {
    let (ga, gb) = (a.grid(), b.grid());
    if ga == gb && ga.n <= MAX_DENSITY_N {
        return Ok(ga);
    }
    let t0 = ga.t_start.min(gb.t_start);
    let t1 = ga.t_end().max(gb.t_end());
    let dt = ga.dt.min(gb.dt);
    let n = ((t1 - t0) / dt).round() as usize + 1;
    let n = n.clamp(2, MAX_DENSITY_N);
    TimeGrid::from_span(t0, t1, n)
        .map_err(|e| InterferenceError::IncompatibleGrids(e.to_string()))
}

/// Trapezoid-rule inner product with the fidelity normalized by both norms.
pub fn mode_overlap(
    a: &PhotonWavepacket,
    b: &PhotonWavepacket,
) -> Result<OverlapReport, InterferenceError> {
    let (a, b) = if a.grid() == b.grid() {
        (a.clone(), b.clone())
    } else {
        let grid = common_grid(a, b)?;
        (a.resampled(grid), b.resampled(grid))
    };
    let na = a.norm_sq();
    let nb = b.norm_sq();
    if na <= 0.0 || nb <= 0.0 {
        return Err(InterferenceError::ZeroNorm);
    }
    let dt = a.grid().dt;
    let re = trapezoid(dt, a.amplitude().iter().zip(b.amplitude()).map(|(x, y)| (x.conj() * y).re));
    let im = trapezoid(dt, a.amplitude().iter().zip(b.amplitude()).map(|(x, y)| (x.conj() * y).im));
    let overlap = Complex64::new(re, im);
    let fidelity = (overlap.norm_sqr() / (na * nb)).clamp(0.0, 1.0);
    Ok(OverlapReport { overlap, fidelity })
}

/// Hong-Ou-Mandel coincidence of two unit-norm single photons.
///
/// The joint density is `p(t1,t2) = |phi_a(t1) phi_b(t2) - phi_a(t2)
/// phi_b(t1)|^2 / 4`, counted over both detector orderings; its quadrature
/// equals `(1 - fidelity)/2`.
pub fn hom_coincidence(
    a: &PhotonWavepacket,
    b: &PhotonWavepacket,
) -> Result<CoincidenceRecord, InterferenceError> {
    for wp in [a, b] {
        let n2 = wp.norm_sq();
        if (n2 - 1.0).abs() > UNIT_TOL {
            return Err(InterferenceError::Unnormalized(n2));
        }
    }
    let grid = common_grid(a, b)?;
    let ar = a.resampled(grid);
    let br = b.resampled(grid);
    let (xa, xb) = (ar.amplitude(), br.amplitude());
    let n = grid.n;
    let mut density = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let exch = xa[i] * xb[j] - xa[j] * xb[i];
            density[i * n + j] = 0.25 * exch.norm_sqr();
        }
    }
    // 2D trapezoid quadrature
    let mut integrated = 0.0;
    for i in 0..n {
        let wi = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        for j in 0..n {
            let wj = if j == 0 || j == n - 1 { 0.5 } else { 1.0 };
            integrated += wi * wj * density[i * n + j];
        }
    }
    integrated *= grid.dt * grid.dt;
    Ok(CoincidenceRecord { integrated, grid, density })
}

/// Compare a retrieved memory output against a fresh source photon.
///
/// The retrieved packet is renormalized (pure loss does not spoil the
/// temporal mode), then interfered with the source on a balanced beam
/// splitter; the integrated coincidence is `(1 - fidelity)/2` with the
/// fidelity of the two shapes.
pub fn storage_interference_test(
    source: &PhotonWavepacket,
    memory_output: &PhotonWavepacket,
) -> Result<CoincidenceRecord, InterferenceError> {
    let src = source.normalized().ok_or(InterferenceError::ZeroNorm)?;
    let out = memory_output.normalized().ok_or(InterferenceError::ZeroNorm)?;
    hom_coincidence(&src, &out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_gaussian(center: f64, sigma: f64) -> PhotonWavepacket {
        let grid = TimeGrid::from_span(-8.0, 8.0, 1201).unwrap();
        PhotonWavepacket::gaussian(grid, center, sigma).unwrap().normalized().unwrap()
    }

    #[test]
    fn identical_packets_have_unit_fidelity() {
        let a = unit_gaussian(0.0, 0.5);
        let r = mode_overlap(&a, &a).unwrap();
        assert_relative_eq!(r.fidelity, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn disjoint_supports_have_zero_fidelity() {
        let grid = TimeGrid::from_span(0.0, 4.0, 801).unwrap();
        let a = PhotonWavepacket::sin_squared(grid, 0.0, 1.0, 1.0).unwrap();
        let b = PhotonWavepacket::sin_squared(grid, 2.5, 1.0, 1.0).unwrap();
        let r = mode_overlap(&a, &b).unwrap();
        assert!(r.fidelity < 1e-12);
    }

    #[test]
    fn gaussian_offset_fidelity_closed_form() {
        let sigma = 0.6;
        for offset in [0.2, 0.7, 1.5] {
            let a = unit_gaussian(0.0, sigma);
            let b = unit_gaussian(offset, sigma);
            let r = mode_overlap(&a, &b).unwrap();
            let expected = (-offset * offset / (4.0 * sigma * sigma)).exp();
            assert_relative_eq!(r.fidelity, expected, max_relative = 1e-4);
        }
    }

    #[test]
    fn zero_norm_is_rejected() {
        let grid = TimeGrid::from_span(0.0, 1.0, 101).unwrap();
        let z = PhotonWavepacket::zero(grid);
        let a = unit_gaussian(0.0, 0.5);
        assert!(matches!(mode_overlap(&a, &z), Err(InterferenceError::ZeroNorm)));
    }

    #[test]
    fn hom_identical_photons_never_coincide() {
        let a = unit_gaussian(0.0, 0.5);
        let rec = hom_coincidence(&a, &a.clone()).unwrap();
        assert!(rec.integrated < 1e-10, "integrated {}", rec.integrated);
    }

    #[test]
    fn hom_orthogonal_photons_coincide_half_the_time() {
        let grid = TimeGrid::from_span(0.0, 6.0, 901).unwrap();
        let a = PhotonWavepacket::sin_squared(grid, 0.2, 1.0, 1.0).unwrap();
        let b = PhotonWavepacket::sin_squared(grid, 3.5, 1.0, 1.0).unwrap();
        let rec = hom_coincidence(&a, &b).unwrap();
        assert_relative_eq!(rec.integrated, 0.5, epsilon = 1e-6);
    }

    #[test]
    fn hom_rejects_unnormalized_input() {
        let grid = TimeGrid::from_span(0.0, 4.0, 401).unwrap();
        let weak = PhotonWavepacket::sin_squared(grid, 0.5, 1.0, 0.5).unwrap();
        let a = unit_gaussian(0.0, 0.5);
        assert!(matches!(hom_coincidence(&weak, &a), Err(InterferenceError::Unnormalized(_))));
    }

    #[test]
    fn hom_consistency_with_overlap() {
        let a = unit_gaussian(-0.2, 0.5);
        let b = unit_gaussian(0.3, 0.7);
        let rec = hom_coincidence(&a, &b).unwrap();
        let f = mode_overlap(&a, &b).unwrap().fidelity;
        assert!((rec.integrated - 0.5 * (1.0 - f)).abs() < 1e-4);
    }

    #[test]
    fn quantum_beat_zero_crossings() {
        let delta_omega = 12.0; // rad/us
        let grid = TimeGrid::from_span(-6.0, 6.0, 1201).unwrap();
        let env = PhotonWavepacket::gaussian(grid, 0.0, 1.0).unwrap();
        let detuned = PhotonWavepacket::new(
            grid,
            grid.times()
                .zip(env.amplitude())
                .map(|(t, a)| a * Complex64::from_polar(1.0, -delta_omega * t))
                .collect(),
        )
        .unwrap();
        let rec = hom_coincidence(&env, &detuned).unwrap();
        let marg = rec.tau_marginal();
        // minima of the beat pattern should be spaced by 2 pi / delta
        let period = std::f64::consts::TAU / delta_omega;
        let near_zero: Vec<f64> = marg
            .windows(3)
            .filter(|w| w[1].1 < w[0].1 && w[1].1 <= w[2].1 && w[1].0.abs() < 2.5)
            .map(|w| w[1].0)
            .collect();
        assert!(near_zero.len() >= 3, "found {} minima", near_zero.len());
        for pair in near_zero.windows(2) {
            assert!(
                ((pair[1] - pair[0]) - period).abs() <= grid.dt + 1e-12,
                "spacing {} vs period {}",
                pair[1] - pair[0],
                period
            );
        }
    }

    #[test]
    fn storage_test_pure_loss_keeps_zero_coincidence() {
        let a = unit_gaussian(0.0, 0.5);
        let lossy = a.scaled(Complex64::new(0.6, 0.0));
        let rec = storage_interference_test(&a, &lossy).unwrap();
        assert!(rec.integrated < 1e-10);
    }
}
