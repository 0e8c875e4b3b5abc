use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::WaveError;

/// Periodic cubic grid in three dimensions, centred on the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Points per axis (a power of two, at least 4).
    pub m: usize,
    /// Box side length.
    pub length: f64,
}

impl GridSpec {
    pub fn new(m: usize, length: f64) -> Result<Self, WaveError> {
        if m < 4 || !m.is_power_of_two() {
            return Err(WaveError::InvalidGrid(format!("points per axis must be a power of two >= 4, got {m}")));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(WaveError::InvalidGrid(format!("box length must be positive, got {length}")));
        }
        Ok(GridSpec { m, length })
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.m as f64
    }

    pub fn points(&self) -> usize {
        self.m * self.m * self.m
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -0.5 * self.length + i as f64 * self.spacing()
    }

    /// Angular wavenumber of FFT bin `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        let signed = if i < self.m / 2 { i as f64 } else { i as f64 - self.m as f64 };
        2.0 * PI * signed / self.length
    }

    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.m + iy) * self.m + iz
    }

    pub fn split(&self, p: usize) -> [usize; 3] {
        [p / (self.m * self.m), (p / self.m) % self.m, p % self.m]
    }

    pub fn position(&self, p: usize) -> [f64; 3] {
        self.split(p).map(|i| self.coordinate(i))
    }

    pub fn wavevector(&self, p: usize) -> [f64; 3] {
        self.split(p).map(|i| self.wavenumber(i))
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }
}

/// Three-dimensional FFT built from one-dimensional passes.
#[derive(Clone)]
pub struct Fft3 {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("m", &self.m).finish()
    }
}

impl Fft3 {
    pub fn new(m: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft3 {
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
    }

    /// Inverse transform including the `1/m³` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse);
        let scale = 1.0 / (self.m * self.m * self.m) as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }

    fn apply(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let m = self.m;
        // z is contiguous
        fft.process(data);
        let mut line = vec![Complex64::default(); m];
        for stride in [m, m * m] {
            for base in 0..m * m {
                let start = if stride == m {
                    (base / m) * m * m + base % m
                } else {
                    base
                };
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[start + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[start + i * stride] = *v;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(16, 16.0).is_ok());
        assert!(GridSpec::new(12, 16.0).is_err());
        assert!(GridSpec::new(2, 16.0).is_err());
        assert!(GridSpec::new(16, 0.0).is_err());
        let g = GridSpec::new(8, 8.0).unwrap();
        assert_eq!(g.coordinate(0), -4.0);
        assert_eq!(g.wavenumber(5), 2.0 * PI * -3.0 / 8.0);
    }

    #[test]
    fn fft_round_trip_and_plane_wave() {
        let g = GridSpec::new(8, 8.0).unwrap();
        let fft = Fft3::new(g.m);
        // plane wave e^{i k·x} with k on bin (1, 2, 7)
        let bins = [1usize, 2, 7];
        let mut data: Vec<Complex64> = (0..g.points())
            .map(|p| {
                let s = g.split(p);
                let phase: f64 = (0..3).map(|a| 2.0 * PI * (bins[a] * s[a]) as f64 / 8.0).sum();
                Complex64::from_polar(1.0, phase)
            })
            .collect();
        let orig = data.clone();
        fft.forward(&mut data);
        let peak = g.index(bins[0], bins[1], bins[2]);
        for (p, v) in data.iter().enumerate() {
            let expect = if p == peak { g.points() as f64 } else { 0.0 };
            assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-9, "bin {p}: {v}");
        }
        fft.inverse(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
