//! Causal precedence `μ ⪯ ν` between slice measures.
//!
//! `μ ⪯ ν` holds iff some coupling of the two measures is concentrated on
//! causally related atom pairs. For finite supports this is a transshipment
//! feasibility problem: source → μ-atoms (capacity μ_i), causal pairs
//! (unbounded), ν-atoms → sink (capacity ν_j). The relation holds iff the
//! maximum flow carries the full unit mass. When it does not, the source side
//! of the minimum cut restricted to μ's atoms is a set `S` with
//! `μ(S) > ν(J⁺(S))`, i.e. a failed Hall-type inequality.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::flow::FlowNetwork;
use crate::mass::Mass;
use crate::measure::{MeasureError, SliceMeasure};
use crate::spacetime::{
    future_contains_raw, CausalPredicate, CompactRegion, GeometryError, ModelParams, ProductBox,
};

/// Enumeration guard for the subset oracle.
pub const ORACLE_MAX_ATOMS: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrderError {
    #[error("measures live on different parameter sets")]
    ParamsMismatch,
    #[error("subset enumeration limited to {limit} atoms, got {count}")]
    OracleTooLarge { count: usize, limit: usize },
    #[error("coupling invalid: {0}")]
    InvalidCoupling(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingEntry<W> {
    /// Atom index in the source measure.
    pub i: usize,
    /// Atom index in the target measure.
    pub j: usize,
    pub w: W,
}

/// Sparse transport plan between the atoms of two slice measures.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<W = f64> {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<CouplingEntry<W>>,
}

impl<W: Mass> Coupling<W> {
    /// Identity plan of a measure onto itself.
    pub fn identity(mu: &SliceMeasure<W>) -> Self {
        Coupling {
            rows: mu.len(),
            cols: mu.len(),
            entries: mu
                .atoms()
                .iter()
                .enumerate()
                .map(|(i, a)| CouplingEntry { i, j: i, w: a.w.clone() })
                .collect(),
        }
    }

    pub fn row_sums(&self) -> Vec<W> {
        let mut s = vec![W::zero(); self.rows];
        for e in &self.entries {
            s[e.i] = s[e.i].clone() + e.w.clone();
        }
        s
    }

    pub fn col_sums(&self) -> Vec<W> {
        let mut s = vec![W::zero(); self.cols];
        for e in &self.entries {
            s[e.j] = s[e.j].clone() + e.w.clone();
        }
        s
    }

    /// Checks marginals (within `tol` in float mode, exactly otherwise),
    /// nonnegativity, and that every positive entry joins related atoms.
    pub fn validate(
        &self,
        mu: &SliceMeasure<W>,
        nu: &SliceMeasure<W>,
        predicate: CausalPredicate,
        tol: f64,
    ) -> Result<(), OrderError> {
        if self.rows != mu.len() || self.cols != nu.len() {
            return Err(OrderError::InvalidCoupling("shape does not match measures".into()));
        }
        let params = mu.params();
        let dt = nu.t() - mu.t();
        for e in &self.entries {
            if e.i >= self.rows || e.j >= self.cols {
                return Err(OrderError::InvalidCoupling("index out of range".into()));
            }
            if e.w < W::zero() {
                return Err(OrderError::InvalidCoupling(format!("negative entry at ({}, {})", e.i, e.j)));
            }
            if e.w > W::zero() && !predicate.related(params, dt, &mu.atoms()[e.i].x, &nu.atoms()[e.j].x) {
                return Err(OrderError::InvalidCoupling(format!(
                    "entry ({}, {}) joins causally unrelated atoms",
                    e.i, e.j
                )));
            }
        }
        for (i, (s, a)) in self.row_sums().iter().zip(mu.atoms()).enumerate() {
            if !W::close(s, &a.w, tol) {
                return Err(OrderError::InvalidCoupling(format!("row {i} sums to {}", s.to_f64())));
            }
        }
        for (j, (s, a)) in self.col_sums().iter().zip(nu.atoms()).enumerate() {
            if !W::close(s, &a.w, tol) {
                return Err(OrderError::InvalidCoupling(format!("column {j} sums to {}", s.to_f64())));
            }
        }
        Ok(())
    }

    /// Glues `self: μ → ν` and `next: ν → ρ` along the shared marginal `ν`:
    /// `ω(a, c) = Σ_b ω₁(a, b) ω₂(b, c) / ν(b)`.
    pub fn compose(&self, next: &Coupling<W>, middle: &SliceMeasure<W>) -> Result<Coupling<W>, OrderError> {
        if self.cols != middle.len() || next.rows != middle.len() {
            return Err(OrderError::InvalidCoupling("middle marginal does not match".into()));
        }
        let mut outgoing: Vec<Vec<&CouplingEntry<W>>> = vec![Vec::new(); next.rows];
        for e in &next.entries {
            outgoing[e.i].push(e);
        }
        let mut acc: std::collections::BTreeMap<(usize, usize), W> = Default::default();
        for e in &self.entries {
            let mass = &middle.atoms()[e.j].w;
            for f in &outgoing[e.j] {
                let w = e.w.clone() * f.w.clone() / mass.clone();
                let slot = acc.entry((e.i, f.j)).or_insert_with(W::zero);
                *slot = slot.clone() + w;
            }
        }
        Ok(Coupling {
            rows: self.rows,
            cols: next.cols,
            entries: acc.into_iter().map(|((i, j), w)| CouplingEntry { i, j, w }).collect(),
        })
    }
}

/// μ-atoms whose mass cannot be absorbed by their causal future in ν.
#[derive(Debug, Clone, PartialEq)]
pub struct Violator<W = f64> {
    /// Indices into μ's atoms, ascending.
    pub atoms: Vec<usize>,
    /// `μ(S)`.
    pub mu_mass: W,
    /// `ν(J⁺(S))`.
    pub nu_future_mass: W,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrecedenceCertificate<W = f64> {
    Witness(Coupling<W>),
    Violated(Violator<W>),
}

impl<W> PrecedenceCertificate<W> {
    pub fn holds(&self) -> bool {
        matches!(self, PrecedenceCertificate::Witness(_))
    }

    pub fn witness(&self) -> Option<&Coupling<W>> {
        match self {
            PrecedenceCertificate::Witness(c) => Some(c),
            PrecedenceCertificate::Violated(_) => None,
        }
    }

    pub fn violator(&self) -> Option<&Violator<W>> {
        match self {
            PrecedenceCertificate::Witness(_) => None,
            PrecedenceCertificate::Violated(v) => Some(v),
        }
    }
}

/// Verdict of the subset enumeration.
#[derive(Debug, Clone, PartialEq)]
pub enum SubsetVerdict<W = f64> {
    Holds,
    Violated(Violator<W>),
}

impl<W> SubsetVerdict<W> {
    pub fn holds(&self) -> bool {
        matches!(self, SubsetVerdict::Holds)
    }
}

fn check_pair<W: Mass>(mu: &SliceMeasure<W>, nu: &SliceMeasure<W>) -> Result<(), OrderError> {
    if mu.params() != nu.params() {
        return Err(OrderError::ParamsMismatch);
    }
    Ok(())
}

/// Adjacency lists `i -> [j]` of causally related atom pairs.
fn causal_pairs<W: Mass>(mu: &SliceMeasure<W>, nu: &SliceMeasure<W>, predicate: CausalPredicate) -> Vec<Vec<usize>> {
    let params = mu.params();
    let dt = nu.t() - mu.t();
    mu.atoms()
        .iter()
        .map(|a| {
            nu.atoms()
                .iter()
                .enumerate()
                .filter(|(_, b)| predicate.related(params, dt, &a.x, &b.x))
                .map(|(j, _)| j)
                .collect()
        })
        .collect()
}

fn future_mass<W: Mass>(nu: &SliceMeasure<W>, pairs: &[Vec<usize>], subset: &[usize]) -> W {
    let mut hit = vec![false; nu.len()];
    for &i in subset {
        for &j in &pairs[i] {
            hit[j] = true;
        }
    }
    nu.atoms()
        .iter()
        .zip(hit)
        .filter(|(_, h)| *h)
        .fold(W::zero(), |acc, (b, _)| acc + b.w.clone())
}

/// Decides `μ ⪯ ν` exactly (point predicate without slack).
pub fn precedes_measures<W: Mass>(
    mu: &SliceMeasure<W>,
    nu: &SliceMeasure<W>,
) -> Result<PrecedenceCertificate<W>, OrderError> {
    precedes_measures_with(mu, nu, CausalPredicate::Exact)
}

/// Decides precedence under an arbitrary point predicate.
pub fn precedes_measures_with<W: Mass>(
    mu: &SliceMeasure<W>,
    nu: &SliceMeasure<W>,
    predicate: CausalPredicate,
) -> Result<PrecedenceCertificate<W>, OrderError> {
    check_pair(mu, nu)?;
    if mu.t() > nu.t() {
        return Ok(PrecedenceCertificate::Violated(Violator {
            atoms: (0..mu.len()).collect(),
            mu_mass: mu.total_mass(),
            nu_future_mass: W::zero(),
        }));
    }
    let pairs = causal_pairs(mu, nu, predicate);
    let (m, k) = (mu.len(), nu.len());
    let source = 0;
    let sink = m + k + 1;
    let mut net = FlowNetwork::<W>::new(m + k + 2);
    for (i, a) in mu.atoms().iter().enumerate() {
        net.add_edge(source, 1 + i, a.w.clone());
    }
    // Any capacity above the total mass acts as unbounded.
    let unbounded = W::from_ratio(2, 1);
    let mut middle = Vec::new();
    for (i, js) in pairs.iter().enumerate() {
        for &j in js {
            middle.push((i, j, net.add_edge(1 + i, 1 + m + j, unbounded.clone())));
        }
    }
    for (j, b) in nu.atoms().iter().enumerate() {
        net.add_edge(1 + m + j, sink, b.w.clone());
    }
    let flow = net.max_flow(source, sink);
    let total = mu.total_mass();
    let complete = if W::EXACT { flow == total } else { W::le_tol(&total, &flow) };
    if complete {
        let entries = middle
            .into_iter()
            .filter_map(|(i, j, id)| {
                let w = net.flow(id);
                (w > W::zero()).then_some(CouplingEntry { i, j, w })
            })
            .collect();
        return Ok(PrecedenceCertificate::Witness(Coupling {
            rows: m,
            cols: k,
            entries,
        }));
    }
    let reach = net.residual_reachable(source);
    let atoms: Vec<usize> = (0..m).filter(|&i| reach[1 + i]).collect();
    let mu_mass = atoms
        .iter()
        .fold(W::zero(), |acc, &i| acc + mu.atoms()[i].w.clone());
    let nu_future_mass = future_mass(nu, &pairs, &atoms);
    Ok(PrecedenceCertificate::Violated(Violator {
        atoms,
        mu_mass,
        nu_future_mass,
    }))
}

/// Independent check of `μ(S) ≤ ν(J⁺(S))` over every subset `S` of μ's atoms,
/// visited in increasing bitmask order.
pub fn oracle_subset_condition<W: Mass>(
    mu: &SliceMeasure<W>,
    nu: &SliceMeasure<W>,
) -> Result<SubsetVerdict<W>, OrderError> {
    oracle_subset_condition_with(mu, nu, CausalPredicate::Exact)
}

pub fn oracle_subset_condition_with<W: Mass>(
    mu: &SliceMeasure<W>,
    nu: &SliceMeasure<W>,
    predicate: CausalPredicate,
) -> Result<SubsetVerdict<W>, OrderError> {
    check_pair(mu, nu)?;
    let m = mu.len();
    if m > ORACLE_MAX_ATOMS {
        return Err(OrderError::OracleTooLarge {
            count: m,
            limit: ORACLE_MAX_ATOMS,
        });
    }
    let dt = nu.t() - mu.t();
    let params = mu.params();
    let words = nu.len().div_ceil(64);
    let future: Vec<Vec<u64>> = mu
        .atoms()
        .iter()
        .map(|a| {
            let mut bits = vec![0u64; words];
            for (j, b) in nu.atoms().iter().enumerate() {
                if predicate.related(params, dt, &a.x, &b.x) {
                    bits[j / 64] |= 1 << (j % 64);
                }
            }
            bits
        })
        .collect();
    let mut union = vec![0u64; words];
    for mask in 1u64..(1u64 << m) {
        union.iter_mut().for_each(|w| *w = 0);
        let mut mu_mass = W::zero();
        let mut subset = Vec::new();
        for i in 0..m {
            if mask >> i & 1 == 1 {
                subset.push(i);
                mu_mass = mu_mass + mu.atoms()[i].w.clone();
                for (u, f) in union.iter_mut().zip(&future[i]) {
                    *u |= f;
                }
            }
        }
        let nu_future_mass = nu
            .atoms()
            .iter()
            .enumerate()
            .filter(|(j, _)| union[j / 64] >> (j % 64) & 1 == 1)
            .fold(W::zero(), |acc, (_, b)| acc + b.w.clone());
        if !W::le_tol(&mu_mass, &nu_future_mass) {
            return Ok(SubsetVerdict::Violated(Violator {
                atoms: subset,
                mu_mass,
                nu_future_mass,
            }));
        }
    }
    Ok(SubsetVerdict::Holds)
}

/// One instance of the future-set inequality `μ(J⁺(K)) ≤ ν(J⁺(K))`.
#[derive(Debug, Clone, PartialEq)]
pub struct FutureSetCheck<W = f64> {
    pub mu_mass: W,
    pub nu_mass: W,
    pub pass: bool,
}

fn future_set_mass<W: Mass>(mu: &SliceMeasure<W>, k: &CompactRegion) -> W {
    let params = mu.params();
    mu.atoms()
        .iter()
        .filter(|a| future_contains_raw(k, mu.t(), &a.x, params))
        .fold(W::zero(), |acc, a| acc + a.w.clone())
}

/// Necessary condition: fails for some `K` ⇒ `μ ⋠ ν`.
pub fn check_future_set_condition<W: Mass>(
    mu: &SliceMeasure<W>,
    nu: &SliceMeasure<W>,
    ks: &[CompactRegion],
) -> Result<Vec<FutureSetCheck<W>>, OrderError> {
    check_pair(mu, nu)?;
    Ok(ks
        .iter()
        .map(|k| {
            let mu_mass = future_set_mass(mu, k);
            let nu_mass = future_set_mass(nu, k);
            let pass = W::le_tol(&mu_mass, &nu_mass);
            FutureSetCheck { mu_mass, nu_mass, pass }
        })
        .collect())
}

/// `∫ f dμ` for a function on configuration events.
pub fn integrate<W: Mass>(mu: &SliceMeasure<W>, f: impl Fn(f64, &[f64]) -> f64) -> f64 {
    mu.atoms().iter().map(|a| a.w.to_f64() * f(mu.t(), &a.x)).sum()
}

/// `∫τ_K dμ ≤ ∫τ_K dν` for the indicator `τ_K` of `J⁺(K)`, a bounded causal
/// function. Numerically identical to [`check_future_set_condition`].
pub fn check_causal_function_condition<W: Mass>(
    mu: &SliceMeasure<W>,
    nu: &SliceMeasure<W>,
    ks: &[CompactRegion],
) -> Result<Vec<bool>, OrderError> {
    check_pair(mu, nu)?;
    let params = *mu.params();
    Ok(ks
        .iter()
        .map(|k| {
            let tau = |t: f64, x: &[f64]| {
                if future_contains_raw(k, t, x, &params) {
                    1.0
                } else {
                    0.0
                }
            };
            let lhs = integrate(mu, tau);
            let rhs = integrate(nu, tau);
            lhs <= rhs + crate::mass::FLOW_TOL
        })
        .collect())
}

/// Flat-slice version of the Cauchy-hypersurface condition: for each slice
/// time `s`, `μ(J⁺(Σ_s)) ≤ ν(J⁺(Σ_s))`.
pub fn check_flat_slice_condition<W: Mass>(mu: &SliceMeasure<W>, nu: &SliceMeasure<W>, slice_times: &[f64]) -> Vec<bool> {
    slice_times
        .iter()
        .map(|&s| {
            let mu_mass = if mu.t() >= s { 1.0 } else { 0.0 };
            let nu_mass = if nu.t() >= s { 1.0 } else { 0.0 };
            mu_mass <= nu_mass
        })
        .collect()
}

/// Test compacts on μ's slice: singleton atoms, pairwise unions, and product
/// bounding boxes of random atom subsets.
pub fn generate_test_compacts<W: Mass, R: Rng>(mu: &SliceMeasure<W>, boxes: usize, rng: &mut R) -> Vec<CompactRegion> {
    let params: ModelParams = *mu.params();
    let t = mu.t();
    let xs: Vec<&[f64]> = mu.atoms().iter().map(|a| a.x.as_slice()).collect();
    let mut out = Vec::new();
    for x in &xs {
        out.push(CompactRegion {
            t,
            shape: crate::spacetime::RegionShape::Atoms(vec![x.to_vec()]),
        });
    }
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            out.push(CompactRegion {
                t,
                shape: crate::spacetime::RegionShape::Atoms(vec![xs[i].to_vec(), xs[j].to_vec()]),
            });
        }
    }
    for _ in 0..boxes {
        let size = rng.gen_range(1..=xs.len());
        let subset: Vec<&[f64]> = xs.choose_multiple(rng, size).copied().collect();
        if let Ok(b) = ProductBox::bounding(&params, &subset) {
            out.push(CompactRegion {
                t,
                shape: crate::spacetime::RegionShape::Boxes(vec![b]),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mass::Rational;

    fn line() -> ModelParams {
        ModelParams::new(1.0, 1, 1).unwrap()
    }

    fn m(t: f64, pts: &[(f64, f64)]) -> SliceMeasure {
        SliceMeasure::new(line(), t, pts.iter().map(|&(x, w)| (vec![x], w)).collect()).unwrap()
    }

    #[test]
    fn dirac_reduction() {
        let p = m(0.0, &[(0.0, 1.0)]);
        assert!(precedes_measures(&p, &m(1.0, &[(1.0, 1.0)])).unwrap().holds());
        assert!(!precedes_measures(&p, &m(1.0, &[(1.5, 1.0)])).unwrap().holds());
    }

    #[test]
    fn unique_matching_witness() {
        // a=0 reaches c=0.5 only; b=10 reaches d=10.5 only
        let mu = m(0.0, &[(0.0, 0.5), (10.0, 0.5)]);
        let nu = m(1.0, &[(0.5, 0.5), (10.5, 0.5)]);
        let cert = precedes_measures(&mu, &nu).unwrap();
        let w = cert.witness().unwrap();
        assert_eq!(
            w.entries,
            vec![CouplingEntry { i: 0, j: 0, w: 0.5 }, CouplingEntry { i: 1, j: 1, w: 0.5 }]
        );
        w.validate(&mu, &nu, CausalPredicate::Exact, 1e-9).unwrap();
        assert!(oracle_subset_condition(&mu, &nu).unwrap().holds());
    }

    #[test]
    fn blocked_matching_violator() {
        // a ⪯ c, a ⪯ d, b ⪯ c only; ν = ¼δ_c + ¾δ_d
        let mu = m(0.0, &[(0.0, 0.5), (1.0, 0.5)]);
        let nu = m(1.0, &[(0.5, 0.25), (-1.0, 0.75)]);
        // nu atoms sorted: d=-1 (index 0), c=0.5 (index 1)
        let cert = precedes_measures(&mu, &nu).unwrap();
        let v = cert.violator().unwrap();
        assert_eq!(v.atoms, vec![1]);
        assert_eq!(v.mu_mass, 0.5);
        assert_eq!(v.nu_future_mass, 0.25);
        match oracle_subset_condition(&mu, &nu).unwrap() {
            SubsetVerdict::Violated(o) => assert_eq!(o.atoms, vec![1]),
            SubsetVerdict::Holds => panic!("oracle missed the violation"),
        }
    }

    #[test]
    fn orphan_atom_is_a_singleton_violator() {
        let mu = m(0.0, &[(0.0, 0.5), (100.0, 0.5)]);
        let nu = m(1.0, &[(0.0, 1.0)]);
        match oracle_subset_condition(&mu, &nu).unwrap() {
            SubsetVerdict::Violated(v) => {
                assert_eq!(v.atoms, vec![1]);
                assert_eq!(v.nu_future_mass, 0.0);
            }
            SubsetVerdict::Holds => panic!(),
        }
    }

    #[test]
    fn backwards_in_time() {
        let mu = m(1.0, &[(0.0, 1.0)]);
        let nu = m(0.0, &[(0.0, 1.0)]);
        let v = precedes_measures(&mu, &nu).unwrap();
        assert_eq!(v.violator().unwrap().atoms, vec![0]);
        assert!(precedes_measures(&mu, &mu).unwrap().holds());
    }

    #[test]
    fn exact_mode_agrees() {
        let mu = m(0.0, &[(0.0, 0.5), (1.0, 0.5)]).to_exact().unwrap();
        let nu = m(1.0, &[(0.5, 0.25), (-1.0, 0.75)]).to_exact().unwrap();
        let cert = precedes_measures(&mu, &nu).unwrap();
        assert_eq!(cert.violator().unwrap().mu_mass, Rational::from_ratio(1, 2));
    }

    #[test]
    fn oracle_guard() {
        let pts: Vec<(f64, f64)> = (0..21).map(|i| (i as f64, 1.0 / 21.0)).collect();
        let mu = m(0.0, &pts);
        assert!(matches!(
            oracle_subset_condition(&mu, &mu),
            Err(OrderError::OracleTooLarge { .. })
        ));
    }

    #[test]
    fn future_set_checks() {
        let mu = m(0.0, &[(0.0, 0.5), (1.0, 0.5)]);
        let nu = m(1.0, &[(0.5, 0.25), (-1.0, 0.75)]);
        let everything = CompactRegion::boxes(
            &line(),
            -100.0,
            vec![ProductBox::new(vec![crate::spacetime::AxisBox::new(vec![-10.0], vec![10.0]).unwrap()])],
        )
        .unwrap();
        let violator = CompactRegion::atoms(&line(), 0.0, vec![vec![1.0]]).unwrap();
        let nowhere = CompactRegion::atoms(&line(), 0.0, vec![vec![50.0]]).unwrap();
        let checks = check_future_set_condition(&mu, &nu, &[everything.clone(), violator.clone(), nowhere.clone()]).unwrap();
        assert_eq!((checks[0].mu_mass, checks[0].nu_mass, checks[0].pass), (1.0, 1.0, true));
        assert_eq!((checks[1].mu_mass, checks[1].nu_mass, checks[1].pass), (0.5, 0.25, false));
        assert_eq!((checks[2].mu_mass, checks[2].nu_mass, checks[2].pass), (0.0, 0.0, true));
        let f = check_causal_function_condition(&mu, &nu, &[everything, violator, nowhere]).unwrap();
        assert_eq!(f, vec![true, false, true]);
    }

    #[test]
    fn flat_slices() {
        let mu = m(0.0, &[(0.0, 1.0)]);
        let nu = m(1.0, &[(0.0, 1.0)]);
        assert!(check_flat_slice_condition(&mu, &nu, &[-1.0, 0.0, 0.5, 1.0, 2.0]).iter().all(|&b| b));
        assert!(!check_flat_slice_condition(&nu, &mu, &[0.5]).iter().all(|&b| b));
    }

    #[test]
    fn composition_glues_middle_marginal() {
        let mu = m(0.0, &[(0.0, 1.0)]);
        let nu = m(1.0, &[(-0.5, 0.5), (0.5, 0.5)]);
        let rho = m(2.0, &[(-1.0, 0.25), (0.0, 0.5), (1.0, 0.25)]);
        let w1 = precedes_measures(&mu, &nu).unwrap().witness().unwrap().clone();
        let w2 = precedes_measures(&nu, &rho).unwrap().witness().unwrap().clone();
        let w = w1.compose(&w2, &nu).unwrap();
        w.validate(&mu, &rho, CausalPredicate::Exact, 1e-12).unwrap();
    }
}
