//! Spin-1 generators, chiral-basis gamma matrices, and the exact one-particle
//! propagators in Fourier space (ħ = 1).

use num_complex::Complex64 as C;

const O: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SmallMatrix {
    pub dim: usize,
    pub data: Vec<C>,
}

impl SmallMatrix {
    pub fn zeros(dim: usize) -> Self {
        SmallMatrix {
            dim,
            data: vec![O; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ONE;
        }
        m
    }

    pub fn from_rows<const D: usize>(rows: [[C; D]; D]) -> Self {
        SmallMatrix {
            dim: D,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> C {
        self.data[i * self.dim + j]
    }

    pub fn mul(&self, other: &SmallMatrix) -> SmallMatrix {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == O {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }

    pub fn add(&self, other: &SmallMatrix) -> SmallMatrix {
        SmallMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, s: C) -> SmallMatrix {
        SmallMatrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a * s).collect(),
        }
    }

    pub fn adjoint(&self) -> SmallMatrix {
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        out
    }

    pub fn apply(&self, v: &[C]) -> Vec<C> {
        let d = self.dim;
        (0..d).map(|i| (0..d).map(|j| self.data[i * d + j] * v[j]).sum()).collect()
    }

    /// `v† M v`, real for Hermitian `M`.
    pub fn expectation(&self, v: &[C]) -> f64 {
        v.iter().zip(self.apply(v)).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// Nonzero entries as `(row, col, value)`.
    pub fn entries(&self) -> Vec<(usize, usize, C)> {
        let d = self.dim;
        (0..d * d)
            .filter(|&p| self.data[p] != O)
            .map(|p| (p / d, p % d, self.data[p]))
            .collect()
    }

    pub fn block_diag(a: &SmallMatrix, b: &SmallMatrix) -> SmallMatrix {
        let d = a.dim + b.dim;
        let mut out = Self::zeros(d);
        for i in 0..a.dim {
            for j in 0..a.dim {
                out.data[i * d + j] = a.get(i, j);
            }
        }
        for i in 0..b.dim {
            for j in 0..b.dim {
                out.data[(a.dim + i) * d + a.dim + j] = b.get(i, j);
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &SmallMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

/// Generators of rotations for spin 1: `(S_k)_{ij} = -i ε_{kij}`.
pub fn spin_matrices() -> [SmallMatrix; 3] {
    [
        SmallMatrix::from_rows([[O, O, O], [O, O, -I], [O, I, O]]),
        SmallMatrix::from_rows([[O, O, I], [O, O, O], [-I, O, O]]),
        SmallMatrix::from_rows([[O, -I, O], [I, O, O], [O, O, O]]),
    ]
}

/// `β S_k = diag(S_k, -S_k)` on the six-component photon wave function.
pub fn photon_velocity_operators() -> [SmallMatrix; 3] {
    spin_matrices().map(|s| SmallMatrix::block_diag(&s, &s.scale(-ONE)))
}

fn pauli() -> [SmallMatrix; 3] {
    [
        SmallMatrix::from_rows([[O, ONE], [ONE, O]]),
        SmallMatrix::from_rows([[O, -I], [I, O]]),
        SmallMatrix::from_rows([[ONE, O], [O, -ONE]]),
    ]
}

fn off_diag(upper: &SmallMatrix, lower: &SmallMatrix) -> SmallMatrix {
    let h = upper.dim;
    let d = 2 * h;
    let mut out = SmallMatrix::zeros(d);
    for i in 0..h {
        for j in 0..h {
            out.data[i * d + h + j] = upper.get(i, j);
            out.data[(h + i) * d + j] = lower.get(i, j);
        }
    }
    out
}

/// `γ^0 … γ^3` in the chiral basis: `γ^0 = offdiag(I, I)`,
/// `γ^k = offdiag(σ^k, -σ^k)`.
pub fn gamma_matrices() -> [SmallMatrix; 4] {
    let id = SmallMatrix::identity(2);
    let [s1, s2, s3] = pauli();
    [
        off_diag(&id, &id),
        off_diag(&s1, &s1.scale(-ONE)),
        off_diag(&s2, &s2.scale(-ONE)),
        off_diag(&s3, &s3.scale(-ONE)),
    ]
}

/// `γ^0 γ^k`, Hermitian with square one.
pub fn fermion_velocity_operators() -> [SmallMatrix; 3] {
    let g = gamma_matrices();
    [g[0].mul(&g[1]), g[0].mul(&g[2]), g[0].mul(&g[3])]
}

fn norm3(k: [f64; 3]) -> f64 {
    (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt()
}

/// `exp(-i H(k) dt)` with `H(k) = c·diag(S·k, -S·k)`.
///
/// `A = S·k̂` satisfies `A³ = A`, so `exp(-iθA) = I - i sinθ A + (cosθ - 1)A²`.
pub fn photon_propagator(k: [f64; 3], c: f64, dt: f64) -> SmallMatrix {
    let kappa = norm3(k);
    if kappa == 0.0 {
        return SmallMatrix::identity(6);
    }
    let s = spin_matrices();
    let a = (0..3).fold(SmallMatrix::zeros(3), |acc, i| acc.add(&s[i].scale(C::new(k[i] / kappa, 0.0))));
    let a2 = a.mul(&a);
    let theta = c * kappa * dt;
    let rot = |th: f64| {
        SmallMatrix::identity(3)
            .add(&a.scale(C::new(0.0, -th.sin())))
            .add(&a2.scale(C::new(th.cos() - 1.0, 0.0)))
    };
    SmallMatrix::block_diag(&rot(theta), &rot(-theta))
}

/// `H(k) = c γ^0γ·k + m c² γ^0`.
pub fn fermion_hamiltonian(k: [f64; 3], c: f64, mass: f64) -> SmallMatrix {
    let alpha = fermion_velocity_operators();
    let g0 = &gamma_matrices()[0];
    (0..3).fold(g0.scale(C::new(mass * c * c, 0.0)), |acc, i| {
        acc.add(&alpha[i].scale(C::new(c * k[i], 0.0)))
    })
}

/// `exp(-i H(k) dt)`; since `H² = E² I`, it equals `cos(E dt) I - i sin(E dt) H / E`.
pub fn fermion_propagator(k: [f64; 3], c: f64, mass: f64, dt: f64) -> SmallMatrix {
    let h = fermion_hamiltonian(k, c, mass);
    let e = ((c * norm3(k)).powi(2) + (mass * c * c).powi(2)).sqrt();
    if e == 0.0 {
        return SmallMatrix::identity(4);
    }
    SmallMatrix::identity(4)
        .scale(C::new((e * dt).cos(), 0.0))
        .add(&h.scale(C::new(0.0, -(e * dt).sin() / e)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn is_unitary(u: &SmallMatrix) -> bool {
        u.mul(&u.adjoint()).max_abs_diff(&SmallMatrix::identity(u.dim)) < 1e-13
    }

    #[test]
    fn spin_algebra() {
        // [S_1, S_2] = i S_3
        let [s1, s2, s3] = spin_matrices();
        let comm = s1.mul(&s2).add(&s2.mul(&s1).scale(-ONE));
        assert!(comm.max_abs_diff(&s3.scale(I)) < 1e-15);
        // S_3 (1, i, 0) = (1, i, 0)
        let u = [ONE, I, O];
        let v = s3.apply(&u);
        assert!(v.iter().zip(&u).all(|(a, b)| (a - b).norm() < 1e-15));
    }

    #[test]
    fn clifford_relations() {
        // γ^μγ^ν + γ^νγ^μ = -2η^{μν} with η = diag(-1, 1, 1, 1)
        let g = gamma_matrices();
        for mu in 0..4 {
            for nu in 0..4 {
                let anti = g[mu].mul(&g[nu]).add(&g[nu].mul(&g[mu]));
                let eta = if mu != nu { 0.0 } else if mu == 0 { -1.0 } else { 1.0 };
                let expect = SmallMatrix::identity(4).scale(C::new(-2.0 * eta, 0.0));
                assert!(anti.max_abs_diff(&expect) < 1e-15, "({mu},{nu})");
            }
        }
        for a in fermion_velocity_operators() {
            assert!(a.max_abs_diff(&a.adjoint()) < 1e-15);
            assert!(a.mul(&a).max_abs_diff(&SmallMatrix::identity(4)) < 1e-15);
        }
    }

    #[test]
    fn chiral_velocity_of_first_basis_spinor() {
        let z = [ONE, O, O, O];
        let ops = fermion_velocity_operators();
        assert_eq!(ops[2].expectation(&z), -1.0);
        assert_eq!(ops[0].expectation(&z), 0.0);
    }

    #[test]
    fn propagators_are_unitary_and_match_series() {
        let k = [0.3, -1.1, 0.7];
        let up = photon_propagator(k, 1.0, 0.37);
        let uf = fermion_propagator(k, 1.0, 0.8, 0.37);
        assert!(is_unitary(&up) && is_unitary(&uf));
        // compare against a truncated exponential series of -iH dt
        let s = spin_matrices();
        let sk = (0..3).fold(SmallMatrix::zeros(3), |acc, i| acc.add(&s[i].scale(C::new(k[i], 0.0))));
        let h_photon = SmallMatrix::block_diag(&sk, &sk.scale(-ONE));
        for (h, u) in [(h_photon, up), (fermion_hamiltonian(k, 1.0, 0.8), uf)] {
            let gen = h.scale(C::new(0.0, -0.37));
            let mut term = SmallMatrix::identity(h.dim);
            let mut sum = term.clone();
            for n in 1..40 {
                term = term.mul(&gen).scale(C::new(1.0 / n as f64, 0.0));
                sum = sum.add(&term);
            }
            assert!(sum.max_abs_diff(&u) < 1e-13);
        }
        assert_eq!(photon_propagator([0.0; 3], 1.0, 1.0), SmallMatrix::identity(6));
    }
}
