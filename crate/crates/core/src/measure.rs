//! Finitely supported probability measures concentrated on one time slice.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use thiserror::Error;

use crate::mass::{rational_from_f64, Mass, Rational};
use crate::spacetime::{GeometryError, ModelParams};

/// Upper bound on atoms per slice.
pub const MAX_ATOMS: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("measure has no atoms")]
    Empty,
    #[error("atom weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("weights sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("{count} atoms exceed the per-slice limit of {limit}")]
    TooManyAtoms { count: usize, limit: usize },
    #[error("particle index {index} out of range for N = {particles}")]
    ParticleIndex { index: usize, particles: usize },
    #[error("factor {0} is not a single-particle measure with matching dimension")]
    BadFactor(usize),
    #[error("slice times must be strictly increasing (t[{index}] = {t})")]
    TimeOrder { index: usize, t: f64 },
    #[error("measures live on different parameter sets")]
    ParamsMismatch,
    #[error("weight {0} has no exact rational form")]
    NotRational(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom<W> {
    pub x: Vec<f64>,
    pub w: W,
}

/// `δ_t × μ` with `μ` a finite sum of weighted Dirac masses.
///
/// Atoms are deduplicated (positions rounded to 12 significant digits decide
/// equality) and sorted lexicographically, so every downstream traversal is
/// deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceMeasure<W = f64> {
    params: ModelParams,
    t: f64,
    atoms: Vec<Atom<W>>,
}

/// Canonical key for duplicate detection.
pub(crate) fn position_key(x: &[f64]) -> Vec<u64> {
    x.iter()
        .map(|v| {
            let r: f64 = format!("{v:.11e}").parse().unwrap_or(*v);
            let r = if r == 0.0 { 0.0 } else { r };
            r.to_bits()
        })
        .collect()
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (u, v) in a.iter().zip(b) {
        match u.total_cmp(v) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

impl<W: Mass> SliceMeasure<W> {
    /// Builds a normalized measure; duplicate positions are merged.
    pub fn new(params: ModelParams, t: f64, atoms: Vec<(Vec<f64>, W)>) -> Result<Self, MeasureError> {
        let measure = Self::unnormalized(params, t, atoms)?;
        let total = measure.total_mass();
        if !W::is_normalized(&total) {
            return Err(MeasureError::NotNormalized(total.to_f64()));
        }
        Ok(measure)
    }

    /// Same as [`SliceMeasure::new`] without the unit-mass check.
    pub(crate) fn unnormalized(params: ModelParams, t: f64, atoms: Vec<(Vec<f64>, W)>) -> Result<Self, MeasureError> {
        params.validate()?;
        if !t.is_finite() {
            return Err(GeometryError::NonFinite.into());
        }
        if atoms.is_empty() {
            return Err(MeasureError::Empty);
        }
        if atoms.len() > MAX_ATOMS {
            return Err(MeasureError::TooManyAtoms {
                count: atoms.len(),
                limit: MAX_ATOMS,
            });
        }
        let mut merged: BTreeMap<Vec<u64>, Atom<W>> = BTreeMap::new();
        for (x, w) in atoms {
            params.check_config(&x)?;
            if w <= W::zero() {
                return Err(MeasureError::NonPositiveWeight(w.to_f64()));
            }
            match merged.entry(position_key(&x)) {
                std::collections::btree_map::Entry::Occupied(mut e) => {
                    let a = e.get_mut();
                    a.w = a.w.clone() + w;
                }
                std::collections::btree_map::Entry::Vacant(e) => {
                    e.insert(Atom { x, w });
                }
            }
        }
        let mut atoms: Vec<Atom<W>> = merged.into_values().collect();
        atoms.sort_by(|a, b| lex_cmp(&a.x, &b.x));
        Ok(SliceMeasure { params, t, atoms })
    }

    pub fn dirac(params: ModelParams, t: f64, x: Vec<f64>) -> Result<Self, MeasureError> {
        Self::new(params, t, vec![(x, W::one())])
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn atoms(&self) -> &[Atom<W>] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> W {
        self.atoms.iter().fold(W::zero(), |acc, a| acc + a.w.clone())
    }

    /// Index of the atom at `x`, if any (same rounding rule as construction).
    pub fn find(&self, x: &[f64]) -> Option<usize> {
        let key = position_key(x);
        self.atoms.iter().position(|a| position_key(&a.x) == key)
    }

    /// The same atoms placed on another slice.
    pub fn at_time(&self, t: f64) -> Self {
        SliceMeasure {
            params: self.params,
            t,
            atoms: self.atoms.clone(),
        }
    }

    /// Atomwise equality with weights compared through [`Mass::close`].
    pub fn same_as(&self, other: &Self, tol: f64) -> bool {
        self.params == other.params
            && self.t == other.t
            && self.atoms.len() == other.atoms.len()
            && self
                .atoms
                .iter()
                .zip(&other.atoms)
                .all(|(a, b)| position_key(&a.x) == position_key(&b.x) && W::close(&a.w, &b.w, tol))
    }

    /// Largest atomwise weight discrepancy, treating missing atoms as zero.
    pub fn weight_distance(&self, other: &Self) -> f64 {
        let mut table: BTreeMap<Vec<u64>, (f64, f64)> = BTreeMap::new();
        for a in &self.atoms {
            table.entry(position_key(&a.x)).or_default().0 += a.w.to_f64();
        }
        for a in &other.atoms {
            table.entry(position_key(&a.x)).or_default().1 += a.w.to_f64();
        }
        table.values().map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
    }

    /// Float copy of an exact measure (or a clone of a float one).
    pub fn to_f64(&self) -> SliceMeasure<f64> {
        SliceMeasure {
            params: self.params,
            t: self.t,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    x: a.x.clone(),
                    w: a.w.to_f64(),
                })
                .collect(),
        }
    }
}

impl SliceMeasure<f64> {
    /// Promotes float weights to rationals; the result must sum to exactly 1.
    pub fn to_exact(&self) -> Result<SliceMeasure<Rational>, MeasureError> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| {
                rational_from_f64(a.w)
                    .map(|w| (a.x.clone(), w))
                    .ok_or(MeasureError::NotRational(a.w))
            })
            .collect::<Result<Vec<_>, _>>()?;
        SliceMeasure::new(self.params, self.t, atoms)
    }

    /// Divides every weight by the total mass.
    pub(crate) fn renormalized(mut self) -> Self {
        let total: f64 = self.atoms.iter().map(|a| a.w).sum();
        for a in &mut self.atoms {
            a.w /= total;
        }
        self
    }
}

/// `δ_t × μ_1 × ... × μ_N` for single-particle factors.
pub fn product_measure<W: Mass>(t: f64, factors: &[SliceMeasure<W>]) -> Result<SliceMeasure<W>, MeasureError> {
    let first = factors.first().ok_or(MeasureError::Empty)?;
    let base = first.params;
    for (i, f) in factors.iter().enumerate() {
        if f.params.particles != 1 || f.params.n != base.n || f.params.c != base.c {
            return Err(MeasureError::BadFactor(i));
        }
        let total = f.total_mass();
        if !W::is_normalized(&total) {
            return Err(MeasureError::NotNormalized(total.to_f64()));
        }
    }
    let count: usize = factors.iter().map(|f| f.len()).product();
    if count > MAX_ATOMS {
        return Err(MeasureError::TooManyAtoms {
            count,
            limit: MAX_ATOMS,
        });
    }
    let mut atoms: Vec<(Vec<f64>, W)> = vec![(Vec::new(), W::one())];
    for f in factors {
        atoms = atoms
            .iter()
            .flat_map(|(x, w)| {
                f.atoms.iter().map(move |a| {
                    let mut y = x.clone();
                    y.extend_from_slice(&a.x);
                    (y, w.clone() * a.w.clone())
                })
            })
            .collect();
    }
    let params = ModelParams {
        particles: factors.len(),
        ..base
    };
    SliceMeasure::new(params, t, atoms)
}

/// All permutations of `0..n` in lexicographic order.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

/// Averages every atom over the `N!` relabellings of the particles.
pub fn symmetrize<W: Mass>(mu: &SliceMeasure<W>) -> Result<SliceMeasure<W>, MeasureError> {
    let params = mu.params;
    let perms = permutations(params.particles);
    let count = perms.len().saturating_mul(mu.len());
    if count > MAX_ATOMS {
        return Err(MeasureError::TooManyAtoms {
            count,
            limit: MAX_ATOMS,
        });
    }
    let share = W::from_ratio(1, perms.len() as u64);
    let n = params.n;
    let mut atoms = Vec::with_capacity(count);
    for a in &mu.atoms {
        for p in &perms {
            let x: Vec<f64> = p.iter().flat_map(|&j| a.x[j * n..(j + 1) * n].iter().copied()).collect();
            atoms.push((x, a.w.clone() * share.clone()));
        }
    }
    SliceMeasure::new(params, mu.t, atoms)
}

/// Pushforward onto particle `j` (zero-based).
pub fn particle_marginal<W: Mass>(mu: &SliceMeasure<W>, j: usize) -> Result<SliceMeasure<W>, MeasureError> {
    let params = mu.params;
    if j >= params.particles {
        return Err(MeasureError::ParticleIndex {
            index: j,
            particles: params.particles,
        });
    }
    let n = params.n;
    let atoms = mu
        .atoms
        .iter()
        .map(|a| (a.x[j * n..(j + 1) * n].to_vec(), a.w.clone()))
        .collect();
    SliceMeasure::new(params.single_particle(), mu.t, atoms)
}

/// Total weight of atoms whose configuration satisfies `region`.
pub fn measure_of_region<W: Mass>(mu: &SliceMeasure<W>, region: impl Fn(&[f64]) -> bool) -> W {
    mu.atoms
        .iter()
        .filter(|a| region(&a.x))
        .fold(W::zero(), |acc, a| acc + a.w.clone())
}

/// Slice measures on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution<W = f64> {
    slices: Vec<SliceMeasure<W>>,
}

impl<W: Mass> Evolution<W> {
    pub fn new(slices: Vec<SliceMeasure<W>>) -> Result<Self, MeasureError> {
        let first = slices.first().ok_or(MeasureError::Empty)?;
        for (i, s) in slices.iter().enumerate() {
            if s.params != first.params {
                return Err(MeasureError::ParamsMismatch);
            }
            if i > 0 && s.t <= slices[i - 1].t {
                return Err(MeasureError::TimeOrder { index: i, t: s.t });
            }
        }
        Ok(Evolution { slices })
    }

    pub fn slices(&self) -> &[SliceMeasure<W>] {
        &self.slices
    }

    pub fn times(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.t).collect()
    }

    pub fn params(&self) -> &ModelParams {
        &self.slices[0].params
    }

    pub fn len(&self) -> usize {
        self.slices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    pub fn into_slices(self) -> Vec<SliceMeasure<W>> {
        self.slices
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> ModelParams {
        ModelParams::new(1.0, 1, 1).unwrap()
    }

    fn m(points: &[(f64, f64)]) -> SliceMeasure {
        SliceMeasure::new(line(), 0.0, points.iter().map(|&(x, w)| (vec![x], w)).collect()).unwrap()
    }

    #[test]
    fn construction_merges_and_sorts() {
        let mu = m(&[(2.0, 0.25), (1.0, 0.5), (2.0 + 1e-15, 0.25)]);
        assert_eq!(mu.len(), 2);
        assert_eq!(mu.atoms()[0].x, vec![1.0]);
        assert_eq!(mu.atoms()[1].w, 0.5);
    }

    #[test]
    fn construction_errors() {
        let p = line();
        assert_eq!(SliceMeasure::<f64>::new(p, 0.0, vec![]).unwrap_err(), MeasureError::Empty);
        assert!(matches!(
            SliceMeasure::new(p, 0.0, vec![(vec![0.0], 0.5)]),
            Err(MeasureError::NotNormalized(_))
        ));
        assert!(matches!(
            SliceMeasure::new(p, 0.0, vec![(vec![0.0], 1.5), (vec![1.0], -0.5)]),
            Err(MeasureError::NonPositiveWeight(_))
        ));
        assert!(matches!(
            SliceMeasure::new(p, 0.0, vec![(vec![0.0, 1.0], 1.0)]),
            Err(MeasureError::Geometry(GeometryError::DimensionMismatch { .. }))
        ));
    }

    #[test]
    fn products() {
        let a = SliceMeasure::<f64>::dirac(line(), 0.0, vec![0.0]).unwrap();
        let b = SliceMeasure::<f64>::dirac(line(), 0.0, vec![1.0]).unwrap();
        let ab = product_measure(0.0, &[a.clone(), b]).unwrap();
        assert_eq!(ab.len(), 1);
        assert_eq!(ab.atoms()[0].x, vec![0.0, 1.0]);
        assert_eq!(ab.atoms()[0].w, 1.0);

        let bc = m(&[(1.0, 0.5), (2.0, 0.5)]);
        let abc = product_measure(0.0, &[a, bc.clone()]).unwrap();
        assert_eq!(abc.len(), 2);
        assert!(abc.atoms().iter().all(|x| x.w == 0.5));

        // enumerate the 2 x 2 product by hand
        let u = m(&[(0.0, 0.5), (3.0, 0.5)]);
        let uv = product_measure(0.0, &[u, bc]).unwrap();
        let expect = [[0.0, 1.0], [0.0, 2.0], [3.0, 1.0], [3.0, 2.0]];
        assert_eq!(uv.len(), 4);
        for (atom, x) in uv.atoms().iter().zip(expect) {
            assert_eq!(atom.x, x.to_vec());
            assert_eq!(atom.w, 0.25);
        }
    }

    #[test]
    fn symmetrization() {
        let a = SliceMeasure::<f64>::dirac(line(), 0.0, vec![0.0]).unwrap();
        let b = SliceMeasure::<f64>::dirac(line(), 0.0, vec![1.0]).unwrap();
        let ab = product_measure(0.0, &[a, b]).unwrap();
        let s = symmetrize(&ab).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.atoms()[0].x, vec![0.0, 1.0]);
        assert_eq!(s.atoms()[1].x, vec![1.0, 0.0]);
        assert!(s.atoms().iter().all(|x| x.w == 0.5));
        assert!(symmetrize(&s).unwrap().same_as(&s, 0.0));

        let p3 = ModelParams::new(1.0, 1, 3).unwrap();
        let abc = SliceMeasure::<Rational>::dirac(p3, 0.0, vec![0.0, 1.0, 2.0]).unwrap();
        let s3 = symmetrize(&abc).unwrap();
        assert_eq!(s3.len(), 6);
        assert!(s3.atoms().iter().all(|x| x.w == Rational::from_ratio(1, 6)));
    }

    #[test]
    fn marginals() {
        let a = SliceMeasure::<f64>::dirac(line(), 0.0, vec![0.0]).unwrap();
        let b = SliceMeasure::<f64>::dirac(line(), 0.0, vec![1.0]).unwrap();
        let s = symmetrize(&product_measure(0.0, &[a, b]).unwrap()).unwrap();
        for j in 0..2 {
            let mj = particle_marginal(&s, j).unwrap();
            assert!(mj.same_as(&m(&[(0.0, 0.5), (1.0, 0.5)]), 0.0));
        }
        assert!(matches!(
            particle_marginal(&s, 2),
            Err(MeasureError::ParticleIndex { .. })
        ));

        // three atoms, two sharing the first coordinate
        let p2 = ModelParams::new(1.0, 1, 2).unwrap();
        let mu = SliceMeasure::new(
            p2,
            0.0,
            vec![(vec![0.0, 1.0], 0.25), (vec![0.0, 2.0], 0.25), (vec![5.0, 2.0], 0.5)],
        )
        .unwrap();
        let m0 = particle_marginal(&mu, 0).unwrap();
        assert!(m0.same_as(&m(&[(0.0, 0.5), (5.0, 0.5)]), 0.0));
        let m1 = particle_marginal(&mu, 1).unwrap();
        assert!(m1.same_as(&m(&[(1.0, 0.25), (2.0, 0.75)]), 0.0));
    }

    #[test]
    fn region_masses() {
        let mu = m(&[(0.0, 0.25), (1.0, 0.25), (2.0, 0.25), (3.0, 0.25)]);
        assert_eq!(measure_of_region(&mu, |_| true), 1.0);
        assert_eq!(measure_of_region(&mu, |_| false), 0.0);
        assert_eq!(measure_of_region(&mu, |x| x[0] < 2.5), 0.75);
    }

    #[test]
    fn exact_promotion() {
        let mu = m(&[(0.0, 0.1), (1.0, 0.9)]);
        let ex = mu.to_exact().unwrap();
        assert_eq!(ex.atoms()[0].w, Rational::from_ratio(1, 10));
        assert_eq!(ex.total_mass(), Rational::from_ratio(1, 1));
    }

    #[test]
    fn evolution_time_order() {
        let a = m(&[(0.0, 1.0)]);
        let b = a.at_time(1.0);
        assert!(Evolution::new(vec![a.clone(), b.clone()]).is_ok());
        assert!(matches!(
            Evolution::new(vec![b, a]),
            Err(MeasureError::TimeOrder { index: 1, .. })
        ));
    }
}
