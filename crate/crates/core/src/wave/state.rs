use num_complex::Complex64 as C;
use rayon::prelude::*;

use super::mode::{Propagator, SingleParticleMode};
use super::{Species, WaveError};

const SYMMETRY_TOL: f64 = 1e-12;

/// `Ψ = Σ_α C_α ⊗_j ψ_{α_j}` over `K` modes and `N` particles.
///
/// The coefficient of the multi-index `α` is stored at
/// `Σ_j α_j K^(N-1-j)`. Photon coefficients are symmetric under exchange of
/// indices, fermion coefficients antisymmetric.
#[derive(Debug, Clone)]
pub struct FactorizedWaveState {
    pub species: Species,
    pub particles: usize,
    pub modes: Vec<SingleParticleMode>,
    pub coeffs: Vec<C>,
    pub time: f64,
}

fn multi_index(mut flat: usize, k: usize, n: usize) -> Vec<usize> {
    let mut idx = vec![0; n];
    for slot in idx.iter_mut().rev() {
        *slot = flat % k;
        flat /= k;
    }
    idx
}

fn flat_index(idx: &[usize], k: usize) -> usize {
    idx.iter().fold(0, |acc, &a| acc * k + a)
}

fn permutation_sign(perm: &[usize]) -> f64 {
    let mut seen = vec![false; perm.len()];
    let mut sign = 1.0;
    for start in 0..perm.len() {
        let mut len = 0;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = perm[i];
            len += 1;
        }
        if len > 0 && len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

impl FactorizedWaveState {
    pub fn new(
        species: Species,
        particles: usize,
        modes: Vec<SingleParticleMode>,
        coeffs: Vec<C>,
        time: f64,
    ) -> Result<Self, WaveError> {
        if particles == 0 || modes.is_empty() {
            return Err(WaveError::InvalidState("need at least one particle and one mode".into()));
        }
        let k = modes.len();
        let expected = k.checked_pow(particles as u32).unwrap_or(usize::MAX);
        if coeffs.len() != expected {
            return Err(WaveError::InvalidState(format!(
                "coefficient tensor has {} entries, expected {k}^{particles} = {expected}",
                coeffs.len()
            )));
        }
        if modes.iter().any(|m| m.species != species || m.grid != modes[0].grid) {
            return Err(WaveError::InvalidState("modes must share species and grid".into()));
        }
        if coeffs.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(WaveError::NonFinite);
        }
        for m in &modes {
            m.check_finite()?;
        }
        let state = FactorizedWaveState {
            species,
            particles,
            modes,
            coeffs,
            time,
        };
        let asym = state.exchange_asymmetry();
        let scale = state.coeffs.iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        if asym > SYMMETRY_TOL * scale {
            let kind = match species {
                Species::Photon => "symmetric",
                Species::Fermion { .. } => "antisymmetric",
            };
            return Err(WaveError::InvalidState(format!(
                "coefficients must be {kind} under particle exchange (deviation {asym:.3e})"
            )));
        }
        Ok(state)
    }

    /// Projects arbitrary coefficients onto the symmetric (photon) or
    /// antisymmetric (fermion) subspace and normalizes the joint state.
    pub fn projected(
        species: Species,
        particles: usize,
        modes: Vec<SingleParticleMode>,
        raw: Vec<C>,
        time: f64,
    ) -> Result<Self, WaveError> {
        let k = modes.len();
        if raw.len() != k.checked_pow(particles as u32).unwrap_or(usize::MAX) {
            return Err(WaveError::InvalidState("coefficient tensor has the wrong size".into()));
        }
        let perms = permutations(particles);
        let fermion = matches!(species, Species::Fermion { .. });
        let coeffs = (0..raw.len())
            .map(|flat| {
                let idx = multi_index(flat, k, particles);
                let sum: C = perms
                    .iter()
                    .map(|p| {
                        let permuted: Vec<usize> = p.iter().map(|&j| idx[j]).collect();
                        let sign = if fermion { permutation_sign(p) } else { 1.0 };
                        raw[flat_index(&permuted, k)] * sign
                    })
                    .sum();
                sum / perms.len() as f64
            })
            .collect();
        let mut state = FactorizedWaveState::new(species, particles, modes, coeffs, time)?;
        state.normalize()?;
        Ok(state)
    }

    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        multi_index(flat, self.modes.len(), self.particles)
    }

    /// Largest deviation of `C_α` from `±C_{πα}` over adjacent transpositions.
    pub fn exchange_asymmetry(&self) -> f64 {
        let k = self.modes.len();
        let sign = match self.species {
            Species::Photon => 1.0,
            Species::Fermion { .. } => -1.0,
        };
        let mut worst: f64 = 0.0;
        for flat in 0..self.coeffs.len() {
            let idx = self.multi_index(flat);
            for j in 0..self.particles.saturating_sub(1) {
                let mut swapped = idx.clone();
                swapped.swap(j, j + 1);
                let other = self.coeffs[flat_index(&swapped, k)];
                worst = worst.max((self.coeffs[flat] - other * sign).norm());
            }
        }
        worst
    }

    pub fn gram(&self) -> Vec<C> {
        let k = self.modes.len();
        let mut g = vec![C::default(); k * k];
        for a in 0..k {
            for b in a..k {
                let v = self.modes[a].inner(&self.modes[b]);
                g[a * k + b] = v;
                g[b * k + a] = v.conj();
            }
        }
        g
    }

    /// `∫ Ψ†Ψ d^{3N}x`, computed from the mode Gram matrix.
    pub fn norm_sqr(&self) -> f64 {
        let k = self.modes.len();
        let g = self.gram();
        let nz: Vec<usize> = (0..self.coeffs.len()).filter(|&i| self.coeffs[i] != C::default()).collect();
        let idx: Vec<Vec<usize>> = nz.iter().map(|&i| self.multi_index(i)).collect();
        let mut total = C::default();
        for (x, a) in nz.iter().zip(&idx) {
            for (y, b) in nz.iter().zip(&idx) {
                let overlap: C = a.iter().zip(b).map(|(&i, &j)| g[i * k + j]).product();
                total += self.coeffs[*x].conj() * self.coeffs[*y] * overlap;
            }
        }
        total.re
    }

    pub fn normalize(&mut self) -> Result<(), WaveError> {
        let n = self.norm_sqr().sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(WaveError::InvalidState("state has zero norm".into()));
        }
        self.coeffs.iter_mut().for_each(|v| *v /= n);
        Ok(())
    }

    /// Advances every mode by one propagator step; the coefficients are constant
    /// because the Hamiltonian is a sum of one-particle terms.
    pub fn evolve(&self, propagator: &Propagator) -> Result<Self, WaveError> {
        let modes = self
            .modes
            .par_iter()
            .map(|m| propagator.apply(m))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FactorizedWaveState {
            species: self.species,
            particles: self.particles,
            modes,
            coeffs: self.coeffs.clone(),
            time: self.time + propagator.dt(),
        })
    }
}

/// One-particle marginal density of particle `j` on the fine grid.
pub fn marginal_density(state: &FactorizedWaveState, j: usize) -> Vec<f64> {
    let k = state.modes.len();
    let g = state.gram();
    let nz: Vec<usize> = (0..state.coeffs.len()).filter(|&i| state.coeffs[i] != C::default()).collect();
    let idx: Vec<Vec<usize>> = nz.iter().map(|&i| state.multi_index(i)).collect();
    let mut reduced = vec![C::default(); k * k];
    for (x, a) in nz.iter().zip(&idx) {
        for (y, b) in nz.iter().zip(&idx) {
            let overlap: C = (0..state.particles).filter(|&i| i != j).map(|i| g[a[i] * k + b[i]]).product();
            reduced[a[j] * k + b[j]] += state.coeffs[*x].conj() * state.coeffs[*y] * overlap;
        }
    }
    let points = state.modes[0].grid.points();
    (0..points)
        .into_par_iter()
        .map(|p| {
            let vals: Vec<Vec<C>> = state.modes.iter().map(|m| m.at(p)).collect();
            let mut rho = 0.0;
            for a in 0..k {
                for b in 0..k {
                    let r = reduced[a * k + b];
                    if r == C::default() {
                        continue;
                    }
                    let dot: C = vals[a].iter().zip(&vals[b]).map(|(u, v)| u.conj() * v).sum();
                    rho += (r * dot).re;
                }
            }
            rho.max(0.0)
        })
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    heap(n, &mut current, &mut out);
    out
}

fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if k <= 1 {
        out.push(a.clone());
        return;
    }
    for i in 0..k - 1 {
        heap(k - 1, a, out);
        if k.is_multiple_of(2) {
            a.swap(i, k - 1);
        } else {
            a.swap(0, k - 1);
        }
    }
    heap(k - 1, a, out);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::wave::grid::GridSpec;
    use crate::wave::mode::PacketSpec;

    fn modes(species: Species) -> Vec<SingleParticleMode> {
        let g = GridSpec::new(8, 8.0).unwrap();
        let pol = vec![[1.0, 0.0]; species.components()];
        [-1.5, 1.5]
            .iter()
            .map(|&x| {
                let spec = PacketSpec {
                    center: [x, 0.0, 0.0],
                    sigma: 0.8,
                    polarization: pol.clone(),
                    carrier: [0.0; 3],
                };
                SingleParticleMode::gaussian(species, g, &spec).unwrap()
            })
            .collect()
    }

    #[test]
    fn sign_of_permutations() {
        assert_eq!(permutation_sign(&[0, 1, 2]), 1.0);
        assert_eq!(permutation_sign(&[1, 0, 2]), -1.0);
        assert_eq!(permutation_sign(&[1, 2, 0]), 1.0);
        assert_eq!(permutations(3).len(), 6);
    }

    #[test]
    fn symmetry_is_enforced() {
        let one = C::new(1.0, 0.0);
        let zero = C::default();
        let err = FactorizedWaveState::new(Species::Photon, 2, modes(Species::Photon), vec![zero, one, zero, zero], 0.0);
        assert!(err.is_err());
        let fermion = Species::Fermion { mass: 1.0 };
        let s = FactorizedWaveState::projected(fermion, 2, modes(fermion), vec![zero, one, zero, zero], 0.0).unwrap();
        assert!((s.coeffs[1] + s.coeffs[2]).norm() < 1e-15);
        assert_eq!(s.coeffs[0], zero);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
