//! Uniform time grids and complex temporal wavepackets.
//!
//! A [`PhotonWavepacket`] holds the complex temporal amplitude of a single
//! photon on a uniform grid; its squared norm is an emission probability and
//! must not exceed one.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance allowed on the unit-probability bound of a wavepacket norm.
pub const NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),
    #[error("invalid wavepacket: {0}")]
    InvalidWavepacket(String),
}

/// Uniform time grid: `n` samples starting at `t_start`, spaced by `dt` (us).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n: usize) -> Result<Self, GridError> {
        if !(dt > 0.0) || !dt.is_finite() || !t_start.is_finite() {
            return Err(GridError::InvalidGrid(format!(
                "dt must be positive and finite (got dt={dt}, t_start={t_start})"
            )));
        }
        if n < 2 {
            return Err(GridError::InvalidGrid(format!("need at least 2 samples (got {n})")));
        }
        Ok(Self { t_start, dt, n })
    }

    /// Grid spanning `[t_start, t_end]` with `n` samples.
    pub fn from_span(t_start: f64, t_end: f64, n: usize) -> Result<Self, GridError> {
        if n < 2 || !(t_end > t_start) {
            return Err(GridError::InvalidGrid(format!(
                "span [{t_start}, {t_end}] with {n} samples is degenerate"
            )));
        }
        Self::new(t_start, (t_end - t_start) / (n - 1) as f64, n)
    }

    #[inline]
    pub fn t(&self, i: usize) -> f64 {
        self.t_start + self.dt * i as f64
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.n - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.t(i))
    }

    /// Index of the sample nearest to `t`, clamped to the grid.
    pub fn index_at(&self, t: f64) -> usize {
        let i = ((t - self.t_start) / self.dt).round();
        (i.max(0.0) as usize).min(self.n - 1)
    }
}

/// Complex temporal amplitude phi(t) on a uniform grid (units us^-1/2).
///
/// The squared norm `integral |phi|^2 dt` is the probability carried by the
/// packet and must satisfy `<= 1` within [`NORM_TOL`].
#[derive(Debug, Clone, PartialEq)]
pub struct PhotonWavepacket {
    grid: TimeGrid,
    amplitude: Vec<Complex64>,
}

impl PhotonWavepacket {
    pub fn new(grid: TimeGrid, amplitude: Vec<Complex64>) -> Result<Self, GridError> {
        if amplitude.len() != grid.n {
            return Err(GridError::InvalidWavepacket(format!(
                "amplitude length {} does not match grid ({} samples)",
                amplitude.len(),
                grid.n
            )));
        }
        if amplitude.iter().any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(GridError::InvalidWavepacket("non-finite amplitude sample".into()));
        }
        let wp = Self { grid, amplitude };
        let n2 = wp.norm_sq();
        if n2 > 1.0 + NORM_TOL {
            return Err(GridError::InvalidWavepacket(format!(
                "squared norm {n2} exceeds 1 (not a single-photon probability)"
            )));
        }
        Ok(wp)
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> Complex64) -> Result<Self, GridError> {
        let amplitude = grid.times().map(f).collect();
        Self::new(grid, amplitude)
    }

    pub fn zero(grid: TimeGrid) -> Self {
        Self { grid, amplitude: vec![Complex64::ZERO; grid.n] }
    }

    /// Real sin^2 pulse supported on `[t0, t0 + width]`, scaled to squared
    /// norm `norm_sq`.
    pub fn sin_squared(
        grid: TimeGrid,
        t0: f64,
        width: f64,
        norm_sq: f64,
    ) -> Result<Self, GridError> {
        if !(width > 0.0) || !(0.0..=1.0 + NORM_TOL).contains(&norm_sq) {
            return Err(GridError::InvalidWavepacket(format!(
                "sin^2 pulse needs width > 0 and norm_sq in [0, 1] (got {width}, {norm_sq})"
            )));
        }
        // integral of sin^4 over one period-half is 3/8 * width
        let amp = (norm_sq / (0.375 * width)).sqrt();
        Self::from_fn(grid, |t| {
            let x = (t - t0) / width;
            if (0.0..=1.0).contains(&x) {
                Complex64::new(amp * (std::f64::consts::PI * x).sin().powi(2), 0.0)
            } else {
                Complex64::ZERO
            }
        })
    }

    /// Unit-norm Gaussian of r.m.s. width `sigma` centred on `t_c`.
    pub fn gaussian(grid: TimeGrid, t_c: f64, sigma: f64) -> Result<Self, GridError> {
        if !(sigma > 0.0) {
            return Err(GridError::InvalidWavepacket(format!("sigma must be > 0 (got {sigma})")));
        }
        let norm = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25);
        Self::from_fn(grid, |t| {
            let x = (t - t_c) / sigma;
            Complex64::new(norm * (-x * x / 4.0).exp(), 0.0)
        })
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn amplitude(&self) -> &[Complex64] {
        &self.amplitude
    }

    /// Trapezoid-rule squared norm `integral |phi|^2 dt`.
    pub fn norm_sq(&self) -> f64 {
        trapezoid(self.grid.dt, self.amplitude.iter().map(|a| a.norm_sqr()))
    }

    /// Copy rescaled to unit squared norm. `None` for an all-zero packet.
    pub fn normalized(&self) -> Option<Self> {
        let n2 = self.norm_sq();
        if n2 <= 0.0 {
            return None;
        }
        let s = 1.0 / n2.sqrt();
        Some(Self {
            grid: self.grid,
            amplitude: self.amplitude.iter().map(|a| a * s).collect(),
        })
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.amplitude.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Time of the intensity maximum, refined by parabolic interpolation.
    pub fn peak_time(&self) -> f64 {
        let intens = self.intensity();
        let (k, _) = intens
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("grid has at least 2 samples");
        if k == 0 || k == self.grid.n - 1 {
            return self.grid.t(k);
        }
        let (ym, y0, yp) = (intens[k - 1], intens[k], intens[k + 1]);
        let denom = ym - 2.0 * y0 + yp;
        let shift = if denom.abs() > 0.0 { 0.5 * (ym - yp) / denom } else { 0.0 };
        self.grid.t(k) + shift.clamp(-0.5, 0.5) * self.grid.dt
    }

    /// Full width at half maximum of the intensity profile, if resolvable.
    pub fn fwhm(&self) -> Option<f64> {
        let intens = self.intensity();
        let (k, &max) = intens.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
        if max <= 0.0 {
            return None;
        }
        let half = 0.5 * max;
        let mut left = None;
        for i in (1..=k).rev() {
            if intens[i - 1] <= half && intens[i] > half {
                let f = (half - intens[i - 1]) / (intens[i] - intens[i - 1]);
                left = Some(self.grid.t(i - 1) + f * self.grid.dt);
                break;
            }
        }
        let mut right = None;
        for i in k..self.grid.n - 1 {
            if intens[i] > half && intens[i + 1] <= half {
                let f = (intens[i] - half) / (intens[i] - intens[i + 1]);
                right = Some(self.grid.t(i) + f * self.grid.dt);
                break;
            }
        }
        match (left, right) {
            (Some(l), Some(r)) if r > l => Some(r - l),
            _ => None,
        }
    }

    /// Amplitude at time `t` by linear interpolation; zero outside the grid.
    pub fn sample_at(&self, t: f64) -> Complex64 {
        let x = (t - self.grid.t_start) / self.grid.dt;
        if x < 0.0 || x > (self.grid.n - 1) as f64 {
            return Complex64::ZERO;
        }
        let i = (x.floor() as usize).min(self.grid.n - 2);
        let f = x - i as f64;
        self.amplitude[i] * (1.0 - f) + self.amplitude[i + 1] * f
    }

    /// Linear-interpolation resample onto `grid` (zero outside the support).
    pub fn resampled(&self, grid: TimeGrid) -> Self {
        let amplitude = grid.times().map(|t| self.sample_at(t)).collect();
        Self { grid, amplitude }
    }

    /// Copy with every sample multiplied by `factor`.
    ///
    /// Unchecked against the unit-norm bound; callers scale down or apply a
    /// pure phase.
    pub fn scaled(&self, factor: Complex64) -> Self {
        Self {
            grid: self.grid,
            amplitude: self.amplitude.iter().map(|a| a * factor).collect(),
        }
    }

    /// Time-reversed copy on the same grid.
    pub fn time_reversed(&self) -> Self {
        let mut amplitude = self.amplitude.clone();
        amplitude.reverse();
        Self { grid: self.grid, amplitude }
    }
}

/// Trapezoid rule on uniformly spaced samples.
pub fn trapezoid(dt: f64, values: impl IntoIterator<Item = f64>) -> f64 {
    let mut it = values.into_iter();
    let Some(first) = it.next() else { return 0.0 };
    let mut sum = 0.0;
    let mut prev = first;
    for v in it {
        sum += 0.5 * (prev + v);
        prev = v;
    }
    sum * dt
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn grid_rejects_degenerate() {
        assert!(TimeGrid::new(0.0, 0.0, 10).is_err());
        assert!(TimeGrid::new(0.0, -0.1, 10).is_err());
        assert!(TimeGrid::new(0.0, 0.1, 1).is_err());
        assert!(TimeGrid::new(f64::NAN, 0.1, 10).is_err());
    }

    #[test]
    fn span_grid_hits_endpoints() {
        let g = TimeGrid::from_span(1.0, 3.0, 5).unwrap();
        assert_relative_eq!(g.dt, 0.5);
        assert_relative_eq!(g.t_end(), 3.0);
    }

    #[test]
    fn sin_squared_norm_matches_request() {
        let g = TimeGrid::from_span(0.0, 4.0, 4001).unwrap();
        let wp = PhotonWavepacket::sin_squared(g, 1.0, 1.0, 0.8).unwrap();
        assert_relative_eq!(wp.norm_sq(), 0.8, max_relative = 1e-6);
    }

    #[test]
    fn gaussian_is_unit_norm() {
        let g = TimeGrid::from_span(-5.0, 5.0, 2001).unwrap();
        let wp = PhotonWavepacket::gaussian(g, 0.0, 0.5).unwrap();
        assert_relative_eq!(wp.norm_sq(), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn norm_bound_enforced() {
        let g = TimeGrid::from_span(0.0, 1.0, 101).unwrap();
        let too_big = vec![Complex64::new(2.0, 0.0); 101];
        assert!(PhotonWavepacket::new(g, too_big).is_err());
    }

    #[test]
    fn fwhm_of_gaussian() {
        let g = TimeGrid::from_span(-6.0, 6.0, 6001).unwrap();
        let sigma = 0.7;
        let wp = PhotonWavepacket::gaussian(g, 0.0, sigma).unwrap();
        // intensity ~ exp(-t^2 / (2 sigma^2)) -> FWHM = 2 sqrt(2 ln 2) sigma
        let expected = 2.0 * (2.0 * 2.0_f64.ln()).sqrt() * sigma;
        assert_relative_eq!(wp.fwhm().unwrap(), expected, max_relative = 1e-4);
    }

    #[test]
    fn peak_time_interpolates() {
        let g = TimeGrid::from_span(0.0, 4.0, 401).unwrap();
        let wp = PhotonWavepacket::gaussian(g, 1.7341, 0.3).unwrap();
        assert_relative_eq!(wp.peak_time(), 1.7341, epsilon = 1e-3);
    }

    #[test]
    fn resample_preserves_shape() {
        let g = TimeGrid::from_span(0.0, 4.0, 2001).unwrap();
        let wp = PhotonWavepacket::gaussian(g, 2.0, 0.5).unwrap();
        let g2 = TimeGrid::from_span(-1.0, 5.0, 1501).unwrap();
        let r = wp.resampled(g2);
        assert_relative_eq!(r.norm_sq(), 1.0, max_relative = 1e-4);
        assert_relative_eq!(r.peak_time(), 2.0, epsilon = 1e-3);
    }
}
