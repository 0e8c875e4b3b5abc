use num_complex::Complex64 as C;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::{Fft3, GridSpec};
use super::operators::{fermion_propagator, photon_propagator, SmallMatrix};
use super::{Species, WaveError};

/// One-particle wave function sampled on the periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleParticleMode {
    pub species: Species,
    pub grid: GridSpec,
    /// `comps[s][p]`: component `s` at grid point `p`.
    pub comps: Vec<Vec<C>>,
}

/// Gaussian wave packet `pol · exp(-|x - x0|²/(4σ²)) · exp(i k0·x)`, using the
/// periodic minimum-image distance to the centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub center: [f64; 3],
    pub sigma: f64,
    /// Spinor or field polarization; `[re, im]` pairs, one per component.
    pub polarization: Vec<[f64; 2]>,
    #[serde(default)]
    pub carrier: [f64; 3],
}

impl SingleParticleMode {
    pub fn zeros(species: Species, grid: GridSpec) -> Self {
        SingleParticleMode {
            species,
            grid,
            comps: vec![vec![C::default(); grid.points()]; species.components()],
        }
    }

    pub fn from_components(species: Species, grid: GridSpec, comps: Vec<Vec<C>>) -> Result<Self, WaveError> {
        if comps.len() != species.components() || comps.iter().any(|c| c.len() != grid.points()) {
            return Err(WaveError::InvalidState(format!(
                "{} mode needs {} components of {} points",
                species.name(),
                species.components(),
                grid.points()
            )));
        }
        let mode = SingleParticleMode { species, grid, comps };
        mode.check_finite()?;
        Ok(mode)
    }

    /// Unit-norm Gaussian packet.
    pub fn gaussian(species: Species, grid: GridSpec, spec: &PacketSpec) -> Result<Self, WaveError> {
        if spec.polarization.len() != species.components() {
            return Err(WaveError::InvalidState(format!(
                "polarization needs {} components, got {}",
                species.components(),
                spec.polarization.len()
            )));
        }
        if !(spec.sigma > 0.0 && spec.sigma.is_finite()) {
            return Err(WaveError::InvalidState("packet width must be positive".into()));
        }
        let pol: Vec<C> = spec.polarization.iter().map(|&[re, im]| C::new(re, im)).collect();
        let len = grid.length;
        let envelope: Vec<C> = (0..grid.points())
            .map(|p| {
                let x = grid.position(p);
                let mut r2 = 0.0;
                let mut phase = 0.0;
                for k in 0..3 {
                    let d = x[k] - spec.center[k];
                    let d = d - len * (d / len).round();
                    r2 += d * d;
                    phase += spec.carrier[k] * x[k];
                }
                C::from_polar((-r2 / (4.0 * spec.sigma * spec.sigma)).exp(), phase)
            })
            .collect();
        let comps = pol.iter().map(|&a| envelope.iter().map(|&e| a * e).collect()).collect();
        let mut mode = SingleParticleMode::from_components(species, grid, comps)?;
        mode.normalize()?;
        Ok(mode)
    }

    /// `pol · exp(i k·x)` with `k` on the reciprocal lattice given by integer bins.
    pub fn plane_wave(species: Species, grid: GridSpec, bins: [i64; 3], pol: &[C]) -> Result<Self, WaveError> {
        if pol.len() != species.components() {
            return Err(WaveError::InvalidState("polarization length mismatch".into()));
        }
        let k = bins.map(|b| 2.0 * std::f64::consts::PI * b as f64 / grid.length);
        let wave: Vec<C> = (0..grid.points())
            .map(|p| {
                let x = grid.position(p);
                C::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])
            })
            .collect();
        let comps = pol.iter().map(|&a| wave.iter().map(|&e| a * e).collect()).collect();
        SingleParticleMode::from_components(species, grid, comps)
    }

    pub fn check_finite(&self) -> Result<(), WaveError> {
        if self.comps.iter().flatten().all(|v| v.re.is_finite() && v.im.is_finite()) {
            Ok(())
        } else {
            Err(WaveError::NonFinite)
        }
    }

    /// `∫ φ†ψ d³x` on the grid.
    pub fn inner(&self, other: &SingleParticleMode) -> C {
        let sum: C = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C>())
            .sum();
        sum * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).re.sqrt()
    }

    pub fn normalize(&mut self) -> Result<(), WaveError> {
        let n = self.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(WaveError::InvalidState("cannot normalize a zero mode".into()));
        }
        self.comps.iter_mut().flatten().for_each(|v| *v /= n);
        Ok(())
    }

    /// Component vector at grid point `p`.
    pub fn at(&self, p: usize) -> Vec<C> {
        self.comps.iter().map(|c| c[p]).collect()
    }

    pub fn max_abs_diff(&self, other: &SingleParticleMode) -> f64 {
        self.comps
            .iter()
            .flatten()
            .zip(other.comps.iter().flatten())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Exact one-step propagator for a species on a grid, tabulated per wave vector.
#[derive(Debug, Clone)]
pub struct Propagator {
    species: Species,
    grid: GridSpec,
    c: f64,
    dt: f64,
    fft: Fft3,
    table: Vec<SmallMatrix>,
}

impl Propagator {
    /// `dt` may be negative, giving the adjoint (backward) propagator.
    pub fn new(species: Species, grid: GridSpec, c: f64, dt: f64) -> Result<Self, WaveError> {
        if !(c > 0.0 && c.is_finite() && dt.is_finite()) {
            return Err(WaveError::InvalidState(format!("invalid propagator parameters c={c}, dt={dt}")));
        }
        let table = (0..grid.points())
            .into_par_iter()
            .map(|p| {
                let k = grid.wavevector(p);
                match species {
                    Species::Photon => photon_propagator(k, c, dt),
                    Species::Fermion { mass } => fermion_propagator(k, c, mass, dt),
                }
            })
            .collect();
        Ok(Propagator {
            species,
            grid,
            c,
            dt,
            fft: Fft3::new(grid.m),
            table,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn apply(&self, mode: &SingleParticleMode) -> Result<SingleParticleMode, WaveError> {
        if mode.species != self.species || mode.grid != self.grid {
            return Err(WaveError::GridMismatch("mode and propagator differ in species or grid".into()));
        }
        mode.check_finite()?;
        let mut spectra = mode.comps.clone();
        spectra.iter_mut().for_each(|s| self.fft.forward(s));
        let d = self.species.components();
        let mut out = vec![vec![C::default(); self.grid.points()]; d];
        let mut v = vec![C::default(); d];
        for (p, u) in self.table.iter().enumerate() {
            for s in 0..d {
                v[s] = spectra[s][p];
            }
            for (s, row) in out.iter_mut().enumerate() {
                row[p] = (0..d).map(|r| u.data[s * d + r] * v[r]).sum();
            }
        }
        out.iter_mut().for_each(|s| self.fft.inverse(s));
        let evolved = SingleParticleMode {
            species: self.species,
            grid: self.grid,
            comps: out,
        };
        evolved.check_finite()?;
        Ok(evolved)
    }
}

/// One propagator step; builds the tables on every call, so prefer
/// [`Propagator`] for repeated steps.
pub fn evolve_mode(mode: &SingleParticleMode, dt: f64, c: f64) -> Result<SingleParticleMode, WaveError> {
    Propagator::new(mode.species, mode.grid, c, dt)?.apply(mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn grid() -> GridSpec {
        GridSpec::new(8, 8.0).unwrap()
    }

    #[test]
    fn zero_field_stays_zero() {
        let zero = SingleParticleMode::zeros(Species::Photon, grid());
        assert_eq!(evolve_mode(&zero, 0.1, 1.0).unwrap(), zero);
    }

    #[test]
    fn circular_eigenmode_phase() {
        let g = grid();
        let pol = [
            C::new(FRAC_1_SQRT_2, 0.0),
            C::new(0.0, FRAC_1_SQRT_2),
            C::default(),
            C::default(),
            C::default(),
            C::default(),
        ];
        let mode = SingleParticleMode::plane_wave(Species::Photon, g, [0, 0, 2], &pol).unwrap();
        let dt = 0.3;
        let k0 = 2.0 * std::f64::consts::PI * 2.0 / g.length;
        let out = evolve_mode(&mode, dt, 1.0).unwrap();
        let phase = C::from_polar(1.0, -k0 * dt);
        let expect = SingleParticleMode {
            comps: mode.comps.iter().map(|c| c.iter().map(|v| v * phase).collect()).collect(),
            ..mode.clone()
        };
        assert!(out.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn forward_backward_and_norm() {
        let g = grid();
        let spec = PacketSpec {
            center: [0.5, -0.3, 0.0],
            sigma: 1.0,
            polarization: vec![[1.0, 0.0], [0.0, 0.5], [0.2, 0.0], [0.0, 0.0]],
            carrier: [0.0, 0.0, 0.8],
        };
        let species = Species::Fermion { mass: 1.0 };
        let mode = SingleParticleMode::gaussian(species, g, &spec).unwrap();
        assert!((mode.norm() - 1.0).abs() < 1e-14);
        let fwd = evolve_mode(&mode, 0.25, 1.0).unwrap();
        assert!((fwd.norm() - 1.0).abs() < 1e-12);
        let back = evolve_mode(&fwd, -0.25, 1.0).unwrap();
        assert!(back.max_abs_diff(&mode) < 1e-12);
    }
}
