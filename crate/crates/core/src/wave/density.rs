use num_complex::Complex64 as C;
use rayon::prelude::*;

use super::state::FactorizedWaveState;
use super::WaveError;

/// Default cap on joint-grid cells for density assembly.
pub const DEFAULT_MAX_CELLS: usize = 2_000_000;

/// Environment variable overriding [`DEFAULT_MAX_CELLS`].
pub const MAX_CELLS_ENV: &str = "MULTICAUSAL_MAX_CELLS";

/// Relative density floor below which the velocity is set to zero.
pub const DENSITY_FLOOR: f64 = 1e-14;

pub fn max_cells_budget() -> usize {
    std::env::var(MAX_CELLS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_CELLS)
}

/// One axis of the (coarsened) joint grid; identical for all `3N` axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAxis {
    pub points: usize,
    pub spacing: f64,
    pub origin: f64,
}

impl JointAxis {
    pub fn coordinate(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing
    }

    pub fn length(&self) -> f64 {
        self.points as f64 * self.spacing
    }
}

/// Joint density `Ψ†Ψ` on `ℝ^{3N}` and the multi-velocity field.
///
/// Cells are indexed row-major over the axes `(x_1, y_1, z_1, x_2, …)`;
/// `velocity[cell * 3N + 3j + k]` is `v^{j,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensitySnapshot {
    pub time: f64,
    pub particles: usize,
    pub axis: JointAxis,
    pub c: f64,
    pub density: Vec<f64>,
    pub velocity: Vec<f64>,
}

impl DensitySnapshot {
    pub fn from_fields(
        time: f64,
        particles: usize,
        axis: JointAxis,
        c: f64,
        density: Vec<f64>,
        velocity: Vec<f64>,
    ) -> Result<Self, WaveError> {
        let cells = axis.points.checked_pow(3 * particles as u32).unwrap_or(usize::MAX);
        if density.len() != cells || velocity.len() != cells * 3 * particles {
            return Err(WaveError::InvalidState(format!(
                "density needs {cells} cells and velocity {} entries",
                cells.saturating_mul(3 * particles)
            )));
        }
        if density.iter().chain(&velocity).any(|v| !v.is_finite()) {
            return Err(WaveError::NonFinite);
        }
        if density.iter().any(|&v| v < 0.0) {
            return Err(WaveError::InvalidState("negative density".into()));
        }
        Ok(DensitySnapshot {
            time,
            particles,
            axis,
            c,
            density,
            velocity,
        })
    }

    pub fn dims(&self) -> usize {
        3 * self.particles
    }

    pub fn cells(&self) -> usize {
        self.density.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axis.spacing.powi(self.dims() as i32)
    }

    pub fn mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn axis_indices(&self, cell: usize) -> Vec<usize> {
        let p = self.axis.points;
        let mut idx = vec![0; self.dims()];
        let mut rest = cell;
        for slot in idx.iter_mut().rev() {
            *slot = rest % p;
            rest /= p;
        }
        idx
    }

    pub fn coordinates(&self, cell: usize) -> Vec<f64> {
        self.axis_indices(cell).into_iter().map(|i| self.axis.coordinate(i)).collect()
    }

    pub fn speed(&self, cell: usize, j: usize) -> f64 {
        let base = cell * self.dims() + 3 * j;
        self.velocity[base..base + 3].iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_speed(&self) -> f64 {
        (0..self.cells())
            .flat_map(|cell| (0..self.particles).map(move |j| (cell, j)))
            .map(|(cell, j)| self.speed(cell, j))
            .fold(0.0, f64::max)
    }

    /// Density with the coordinates of particles `a` and `b` exchanged.
    pub fn swapped_density(&self, a: usize, b: usize) -> Vec<f64> {
        (0..self.cells())
            .map(|cell| {
                let mut idx = self.axis_indices(cell);
                for k in 0..3 {
                    idx.swap(3 * a + k, 3 * b + k);
                }
                let src = idx.iter().fold(0, |acc, &i| acc * self.axis.points + i);
                self.density[src]
            })
            .collect()
    }
}

/// Fraction of the total mass in cells where some coordinate lies within
/// `width` of the periodic box faces.
pub fn boundary_mass_fraction(snap: &DensitySnapshot, width: f64) -> f64 {
    let half = 0.5 * snap.axis.length();
    let near: Vec<bool> = (0..snap.axis.points)
        .map(|i| {
            let x = snap.axis.coordinate(i);
            (x + half).min(half - x) <= width + 1e-12 * half
        })
        .collect();
    let total: f64 = snap.density.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let edge: f64 = (0..snap.cells())
        .filter(|&cell| snap.axis_indices(cell).iter().any(|&i| near[i]))
        .map(|cell| snap.density[cell])
        .sum();
    edge / total
}

struct Assembly<'a> {
    k: usize,
    d: usize,
    n: usize,
    block: usize,
    /// `values[q][a * d + s]`: component `s` of mode `a` at coarse point `q`.
    values: &'a [Vec<C>],
    ops: &'a [Vec<(usize, usize, C)>; 3],
    c: f64,
}

impl Assembly<'_> {
    /// Contracts the leading mode index of `t` (shape `[prefix][k][rest]`)
    /// against the mode values at `q`, giving shape `[prefix][d][rest]`.
    fn contract(&self, t: &[C], rest: usize, q: usize) -> Vec<C> {
        let prefix = t.len() / (self.k * rest);
        let vals = &self.values[q];
        let mut out = vec![C::default(); prefix * self.d * rest];
        for p in 0..prefix {
            for a in 0..self.k {
                let src = &t[(p * self.k + a) * rest..(p * self.k + a + 1) * rest];
                if src.iter().all(|v| *v == C::default()) {
                    continue;
                }
                for s in 0..self.d {
                    let psi = vals[a * self.d + s];
                    let dst = &mut out[(p * self.d + s) * rest..(p * self.d + s + 1) * rest];
                    dst.iter_mut().zip(src).for_each(|(o, v)| *o += psi * v);
                }
            }
        }
        out
    }

    fn descend(&self, level: usize, t: &[C], rho: &mut [f64], vel: &mut [f64]) {
        if level == self.n {
            self.pointwise(t, &mut rho[0], vel);
            return;
        }
        let rest = self.k.pow((self.n - level - 1) as u32);
        let sub = rho.len() / self.block;
        let dims = 3 * self.n;
        for q in 0..self.block {
            let next = self.contract(t, rest, q);
            self.descend(
                level + 1,
                &next,
                &mut rho[q * sub..(q + 1) * sub],
                &mut vel[q * sub * dims..(q + 1) * sub * dims],
            );
        }
    }

    fn pointwise(&self, psi: &[C], rho: &mut f64, vel: &mut [f64]) {
        let density: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
        *rho = density;
        if density <= 0.0 {
            vel.iter_mut().for_each(|v| *v = 0.0);
            return;
        }
        for j in 0..self.n {
            let stride = self.d.pow((self.n - 1 - j) as u32);
            for (k, entries) in self.ops.iter().enumerate() {
                let mut acc = 0.0;
                for (s, v) in psi.iter().enumerate() {
                    let sj = (s / stride) % self.d;
                    for &(a, b, o) in entries {
                        if a == sj {
                            let t = s + b * stride - a * stride;
                            acc += (v.conj() * o * psi[t]).re;
                        }
                    }
                }
                vel[3 * j + k] = self.c * acc / density;
            }
        }
    }
}

/// Evaluates the joint density and multi-velocity field on every
/// `coarsen`-th grid point per axis.
pub fn assemble_density(state: &FactorizedWaveState, coarsen: usize, c: f64) -> Result<DensitySnapshot, WaveError> {
    let grid = state.modes[0].grid;
    if coarsen == 0 || !grid.m.is_multiple_of(coarsen) {
        return Err(WaveError::InvalidGrid(format!(
            "coarsening factor {coarsen} must divide the {} points per axis",
            grid.m
        )));
    }
    let n = state.particles;
    let p = grid.m / coarsen;
    let block = p * p * p;
    let budget = max_cells_budget();
    let cells = block.checked_pow(n as u32).unwrap_or(usize::MAX);
    if cells > budget {
        return Err(WaveError::Budget { cells, budget });
    }
    let d = state.species.components();
    let k = state.modes.len();
    let values: Vec<Vec<C>> = (0..block)
        .map(|q| {
            let (ix, iy, iz) = (q / (p * p), (q / p) % p, q % p);
            let fine = grid.index(ix * coarsen, iy * coarsen, iz * coarsen);
            state.modes.iter().flat_map(|m| m.comps.iter().map(move |c| c[fine])).collect()
        })
        .collect();
    let ops = state.species.velocity_operators().map(|o| o.entries());
    let asm = Assembly {
        k,
        d,
        n,
        block,
        values: &values,
        ops: &ops,
        c,
    };
    let dims = 3 * n;
    let sub = cells / block;
    let mut density = vec![0.0; cells];
    let mut velocity = vec![0.0; cells * dims];
    let rest = k.pow((n - 1) as u32);
    density
        .par_chunks_mut(sub)
        .zip(velocity.par_chunks_mut(sub * dims))
        .enumerate()
        .for_each(|(q, (rho, vel))| {
            let t = asm.contract(&state.coeffs, rest, q);
            asm.descend(1, &t, rho, vel);
        });
    let floor = DENSITY_FLOOR * density.iter().cloned().fold(0.0, f64::max);
    for (cell, &rho) in density.iter().enumerate() {
        if rho < floor {
            velocity[cell * dims..(cell + 1) * dims].iter_mut().for_each(|v| *v = 0.0);
        }
    }
    DensitySnapshot::from_fields(
        state.time,
        n,
        JointAxis {
            points: p,
            spacing: grid.spacing() * coarsen as f64,
            origin: grid.coordinate(0),
        },
        c,
        density,
        velocity,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::grid::GridSpec;
    use crate::wave::mode::{PacketSpec, SingleParticleMode};
    use crate::wave::Species;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn circular_packet_moves_along_z() {
        let g = GridSpec::new(16, 16.0).unwrap();
        let spec = PacketSpec {
            center: [0.0; 3],
            sigma: 1.5,
            polarization: vec![[FRAC_1_SQRT_2, 0.0], [0.0, FRAC_1_SQRT_2], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
            carrier: [0.0; 3],
        };
        let mode = SingleParticleMode::gaussian(Species::Photon, g, &spec).unwrap();
        let state = FactorizedWaveState::new(Species::Photon, 1, vec![mode], vec![C::new(1.0, 0.0)], 0.0).unwrap();
        let snap = assemble_density(&state, 1, 1.0).unwrap();
        assert!((snap.mass() - 1.0).abs() < 1e-9);
        let floor = DENSITY_FLOOR * snap.density.iter().cloned().fold(0.0, f64::max);
        for cell in 0..snap.cells() {
            let v = &snap.velocity[cell * 3..cell * 3 + 3];
            if snap.density[cell] >= floor {
                assert!(v[0].abs() < 1e-12 && v[1].abs() < 1e-12 && (v[2] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fermion_basis_spinor_moves_backwards() {
        let g = GridSpec::new(4, 4.0).unwrap();
        let species = Species::Fermion { mass: 1.0 };
        let one = C::new(1.0, 0.0);
        let zero = C::default();
        let mode = SingleParticleMode::plane_wave(species, g, [0, 0, 1], &[one, zero, zero, zero]).unwrap();
        let state = FactorizedWaveState::new(species, 1, vec![mode], vec![one], 0.0).unwrap();
        let snap = assemble_density(&state, 2, 2.0).unwrap();
        for cell in 0..snap.cells() {
            assert_eq!(&snap.velocity[cell * 3..cell * 3 + 3], &[0.0, 0.0, -2.0]);
        }
    }

    #[test]
    fn budget_is_enforced() {
        let g = GridSpec::new(16, 16.0).unwrap();
        let pol = vec![[1.0, 0.0]; 6];
        let spec = PacketSpec {
            center: [0.0; 3],
            sigma: 1.0,
            polarization: pol,
            carrier: [0.0; 3],
        };
        let mode = SingleParticleMode::gaussian(Species::Photon, g, &spec).unwrap();
        let state = FactorizedWaveState::new(Species::Photon, 2, vec![mode], vec![C::new(1.0, 0.0)], 0.0).unwrap();
        assert!(matches!(assemble_density(&state, 1, 1.0), Err(WaveError::Budget { .. })));
    }
}
