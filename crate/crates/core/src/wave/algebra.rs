use num_complex::Complex64 as C;
use rand::Rng;
use serde::Serialize;

use super::operators::{fermion_velocity_operators, spin_matrices};
use super::Species;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlgebraReport {
    pub species: &'static str,
    pub samples: usize,
    /// Largest `(lhs - rhs) / rhs` of the speed inequality; non-positive when it holds.
    pub max_relative_excess: f64,
    /// Largest relative residual of the chiral identity (fermions only).
    pub max_identity_residual: Option<f64>,
}

/// `(Σ_k (u†S_k u - w†S_k w)², (‖u‖² + ‖w‖²)²)`.
pub fn photon_inequality_terms(u: &[C; 3], w: &[C; 3]) -> (f64, f64) {
    let s = spin_matrices();
    let lhs = s.iter().map(|sk| (sk.expectation(u) - sk.expectation(w)).powi(2)).sum();
    let nu: f64 = u.iter().map(|v| v.norm_sqr()).sum();
    let nw: f64 = w.iter().map(|v| v.norm_sqr()).sum();
    (lhs, (nu + nw).powi(2))
}

/// `(Σ_k (z†γ⁰γ^k z)², (z†z)²)`.
pub fn fermion_inequality_terms(z: &[C; 4]) -> (f64, f64) {
    let lhs = fermion_velocity_operators().iter().map(|a| a.expectation(z).powi(2)).sum();
    let n: f64 = z.iter().map(|v| v.norm_sqr()).sum();
    (lhs, n * n)
}

/// Relative residual of `(z†z)² - Σ_k (z†γ⁰γ^k z)² = 4|z⁰z̄² + z¹z̄³|²`.
pub fn fermion_identity_residual(z: &[C; 4]) -> f64 {
    let (lhs, rhs) = fermion_inequality_terms(z);
    let gap = 4.0 * (z[0] * z[2].conj() + z[1] * z[3].conj()).norm_sqr();
    if rhs == 0.0 {
        return 0.0;
    }
    ((rhs - lhs) - gap).abs() / rhs
}

fn random_vec<const D: usize, R: Rng>(rng: &mut R) -> [C; D] {
    // spread magnitudes over several decades so scaling errors show up
    let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
    std::array::from_fn(|_| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale)
}

fn relative_excess(lhs: f64, rhs: f64) -> f64 {
    if rhs == 0.0 {
        if lhs == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (lhs - rhs) / rhs
    }
}

/// Random sweep of the pointwise speed inequality for a species.
pub fn check_subluminality_algebra<R: Rng>(species: Species, samples: usize, rng: &mut R) -> AlgebraReport {
    let mut excess = f64::NEG_INFINITY;
    let mut identity: Option<f64> = None;
    for _ in 0..samples {
        match species {
            Species::Photon => {
                let u = random_vec::<3, _>(rng);
                let w = if rng.gen_bool(0.05) { u } else { random_vec::<3, _>(rng) };
                let (lhs, rhs) = photon_inequality_terms(&u, &w);
                excess = excess.max(relative_excess(lhs, rhs));
            }
            Species::Fermion { .. } => {
                let z = random_vec::<4, _>(rng);
                let (lhs, rhs) = fermion_inequality_terms(&z);
                excess = excess.max(relative_excess(lhs, rhs));
                let r = fermion_identity_residual(&z);
                identity = Some(identity.map_or(r, |m| m.max(r)));
            }
        }
    }
    AlgebraReport {
        species: species.name(),
        samples,
        max_relative_excess: excess,
        max_identity_residual: identity,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn equal_photon_vectors_give_zero() {
        let u = [C::new(0.3, 1.0), C::new(-2.0, 0.1), C::new(0.0, 0.7)];
        let (lhs, rhs) = photon_inequality_terms(&u, &u);
        assert_eq!(lhs, 0.0);
        assert!(rhs > 0.0);
    }

    #[test]
    fn first_chiral_basis_spinor_saturates() {
        let one = C::new(1.0, 0.0);
        let zero = C::default();
        let z = [one, zero, zero, zero];
        assert_eq!(fermion_inequality_terms(&z), (1.0, 1.0));
        assert_eq!(fermion_identity_residual(&z), 0.0);
    }

    #[test]
    fn small_sweeps_hold() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let p = check_subluminality_algebra(Species::Photon, 2000, &mut rng);
        assert!(p.max_relative_excess <= 1e-12);
        let f = check_subluminality_algebra(Species::Fermion { mass: 1.0 }, 2000, &mut rng);
        assert!(f.max_relative_excess <= 1e-12);
        assert!(f.max_identity_residual.unwrap() <= 1e-10);
    }
}
