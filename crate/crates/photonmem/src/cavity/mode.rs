//! Averaging photon emission over the distribution of couplings an untrapped
//! atom samples across the cavity mode.

use rayon::prelude::*;
use serde::Serialize;

use super::{simulate_vstirap, CavityError, CavityParams, DrivePulse};
use crate::grid::{trapezoid, PhotonWavepacket};

/// Binned distribution of coupling strengths over the cavity mode.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeDistribution {
    pub g_max: f64,
    /// `(g, weight)` pairs; weights sum to one.
    pub bins: Vec<(f64, f64)>,
    /// Identifier of the weighting rule used to build the bins.
    pub rule: String,
}

impl ModeDistribution {
    /// Single coupling value: reproduces a plain simulation.
    pub fn delta(g_max: f64) -> Result<Self, CavityError> {
        if !(g_max > 0.0) {
            return Err(CavityError::InvalidDistribution("g_max must be positive".into()));
        }
        Ok(Self { g_max, bins: vec![(g_max, 1.0)], rule: "delta".into() })
    }

    /// Radial TEM00 profile g(r) = g_max exp(-r^2/w^2), atoms uniformly
    /// distributed over the transverse mode area r <= w, weighted by the
    /// annular area each coupling bin occupies.
    ///
    /// With equal-width bins in g the annulus area between bin edges is
    /// w^2 ln(g_hi/g_lo), so the weights are exactly ln(g_hi/g_lo) and sum
    /// to one over g in [g_max/e, g_max]. Weaker couplings live on larger
    /// annuli and carry more weight. The bin is represented by the
    /// area-weighted mean coupling (the logarithmic mean of its edges).
    pub fn tem00_radial(g_max: f64, n_bins: usize) -> Result<Self, CavityError> {
        if !(g_max > 0.0) {
            return Err(CavityError::InvalidDistribution("g_max must be positive".into()));
        }
        if n_bins == 0 {
            return Err(CavityError::InvalidDistribution("need at least one bin".into()));
        }
        let g_min = g_max / std::f64::consts::E;
        let width = (g_max - g_min) / n_bins as f64;
        let bins = (0..n_bins)
            .map(|k| {
                let lo = g_min + width * k as f64;
                let hi = g_min + width * (k + 1) as f64;
                let weight = (hi / lo).ln();
                let g_rep = (hi - lo) / (hi / lo).ln();
                (g_rep, weight)
            })
            .collect();
        Ok(Self { g_max, bins, rule: format!("tem00-radial-{n_bins}") })
    }

    pub fn validate(&self) -> Result<(), CavityError> {
        if self.bins.is_empty() {
            return Err(CavityError::InvalidDistribution("no bins".into()));
        }
        let mut total = 0.0;
        for &(g, w) in &self.bins {
            if !(g > 0.0) || g > self.g_max * (1.0 + 1e-12) {
                return Err(CavityError::InvalidDistribution(format!(
                    "bin coupling {g} outside (0, g_max]"
                )));
            }
            if !(w >= 0.0) {
                return Err(CavityError::InvalidDistribution(format!("negative weight {w}")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(CavityError::InvalidDistribution(format!("weights sum to {total}, not 1")));
        }
        Ok(())
    }
}

/// Per-bin emission probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GEmission {
    pub g: f64,
    pub p_emit: f64,
}

/// Result of averaging emission over the mode distribution.
#[derive(Debug, Clone)]
pub struct ModeAverage {
    /// Wavepacket whose intensity is the weight-averaged photon intensity,
    /// normalized to unit area.
    pub averaged: PhotonWavepacket,
    pub table: Vec<GEmission>,
}

/// Run the emission at every binned coupling with a fixed drive and average
/// the resulting intensity profiles by bin weight.
pub fn average_over_mode(
    p: &CavityParams,
    drive: &DrivePulse,
    dist: &ModeDistribution,
) -> Result<ModeAverage, CavityError> {
    dist.validate()?;
    let records: Vec<_> = dist
        .bins
        .par_iter()
        .map(|&(g, w)| simulate_vstirap(&p.with_g(g), drive, 0.0).map(|rec| (g, w, rec)))
        .collect::<Result<_, _>>()?;

    let grid = drive.grid;
    let mut intensity = vec![0.0; grid.n];
    let mut table = Vec::with_capacity(records.len());
    for (g, w, rec) in &records {
        for (acc, amp) in intensity.iter_mut().zip(rec.photon.amplitude()) {
            *acc += w * amp.norm_sqr();
        }
        table.push(GEmission { g: *g, p_emit: rec.p_emit });
    }
    let area = trapezoid(grid.dt, intensity.iter().copied());
    if area <= 0.0 {
        return Err(CavityError::InvalidDrive("averaged intensity vanishes".into()));
    }
    let amplitude =
        intensity.iter().map(|i| num_complex::Complex64::new((i / area).sqrt(), 0.0)).collect();
    Ok(ModeAverage { averaged: PhotonWavepacket::new(grid, amplitude)?, table })
}
