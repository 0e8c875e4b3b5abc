//! Point-level causal structure of the N-particle Minkowski configuration
//! spacetime `R x R^{nN}`.
//!
//! An event carries one time coordinate and `N` spatial positions. Event `p`
//! causally precedes `q` when every particle can travel from its position in
//! `p` to its position in `q` no faster than light. All comparisons in this
//! module are exact (squared norms against squared light-travel distances);
//! the tolerant variant adds an explicit additive slack for discretized data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("expected {expected} spatial coordinates, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("empty region")]
    EmptyRegion,
    #[error("malformed box: {0}")]
    MalformedBox(String),
}

/// Speed of light, spatial dimension and particle count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub c: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub particles: usize,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            c: 1.0,
            n: 3,
            particles: 1,
        }
    }
}

impl ModelParams {
    pub fn new(c: f64, n: usize, particles: usize) -> Result<Self, GeometryError> {
        let params = ModelParams { c, n, particles };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.c.is_finite() && self.c > 0.0) {
            return Err(GeometryError::InvalidParams(format!("c must be positive, got {}", self.c)));
        }
        if self.n == 0 {
            return Err(GeometryError::InvalidParams("n must be at least 1".into()));
        }
        if self.particles == 0 {
            return Err(GeometryError::InvalidParams("N must be at least 1".into()));
        }
        Ok(())
    }

    /// Length of a flattened configuration `(x_1, ..., x_N)`.
    pub fn config_len(&self) -> usize {
        self.n * self.particles
    }

    /// The same spacetime with a single particle.
    pub fn single_particle(&self) -> ModelParams {
        ModelParams {
            particles: 1,
            ..*self
        }
    }

    pub fn check_config(&self, x: &[f64]) -> Result<(), GeometryError> {
        if x.len() != self.config_len() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.config_len(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(())
    }
}

/// A point `(t, x_1, ..., x_N)`; positions are stored flattened.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigEvent {
    pub t: f64,
    pub x: Vec<f64>,
}

impl ConfigEvent {
    pub fn new(t: f64, positions: &[Vec<f64>]) -> Self {
        ConfigEvent {
            t,
            x: positions.iter().flatten().copied().collect(),
        }
    }

    pub fn from_flat(t: f64, x: Vec<f64>) -> Self {
        ConfigEvent { t, x }
    }

    pub fn particle<'a>(&'a self, params: &ModelParams, j: usize) -> &'a [f64] {
        &self.x[j * params.n..(j + 1) * params.n]
    }

    fn check(&self, params: &ModelParams) -> Result<(), GeometryError> {
        if !self.t.is_finite() {
            return Err(GeometryError::NonFinite);
        }
        params.check_config(&self.x)
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum()
}

/// Exact causal step test on raw flattened configurations: every particle
/// moves at most `c * dt`. Callers guarantee matching lengths.
pub fn causal_step(params: &ModelParams, dt: f64, a: &[f64], b: &[f64]) -> bool {
    if dt < 0.0 {
        return false;
    }
    let reach2 = (params.c * dt) * (params.c * dt);
    a.chunks_exact(params.n)
        .zip(b.chunks_exact(params.n))
        .all(|(pa, pb)| dist2(pa, pb) <= reach2)
}

/// Strict version of [`causal_step`]: positive elapsed time and every
/// displacement strictly inside the light cone.
pub fn timelike_step(params: &ModelParams, dt: f64, a: &[f64], b: &[f64]) -> bool {
    if dt <= 0.0 {
        return false;
    }
    let reach2 = (params.c * dt) * (params.c * dt);
    a.chunks_exact(params.n)
        .zip(b.chunks_exact(params.n))
        .all(|(pa, pb)| dist2(pa, pb) < reach2)
}

/// Causal step with an additive spatial slack `eta` per particle.
pub fn tolerant_step(params: &ModelParams, dt: f64, a: &[f64], b: &[f64], eta: f64) -> bool {
    if eta == 0.0 {
        return causal_step(params, dt, a, b);
    }
    if dt < 0.0 {
        return false;
    }
    let reach = params.c * dt + eta;
    a.chunks_exact(params.n)
        .zip(b.chunks_exact(params.n))
        .all(|(pa, pb)| dist2(pa, pb).sqrt() <= reach)
}

/// Which point relation to use when deciding precedence of atoms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum CausalPredicate {
    #[default]
    Exact,
    /// Additive slack on every particle displacement.
    Tolerant(f64),
}

impl CausalPredicate {
    pub fn related(&self, params: &ModelParams, dt: f64, a: &[f64], b: &[f64]) -> bool {
        match *self {
            CausalPredicate::Exact => causal_step(params, dt, a, b),
            CausalPredicate::Tolerant(eta) => tolerant_step(params, dt, a, b, eta),
        }
    }
}

/// `p ⪯ q`: `q` lies in the closed causal future of `p`.
pub fn precedes_point(p: &ConfigEvent, q: &ConfigEvent, params: &ModelParams) -> Result<bool, GeometryError> {
    p.check(params)?;
    q.check(params)?;
    Ok(causal_step(params, q.t - p.t, &p.x, &q.x))
}

/// `p ≪ q`: every particle moves along a timelike direction.
pub fn chronologically_precedes_point(
    p: &ConfigEvent,
    q: &ConfigEvent,
    params: &ModelParams,
) -> Result<bool, GeometryError> {
    p.check(params)?;
    q.check(params)?;
    Ok(timelike_step(params, q.t - p.t, &p.x, &q.x))
}

/// Slack-tolerant precedence used on PDE-discretized data.
pub fn precedes_point_tolerant(
    p: &ConfigEvent,
    q: &ConfigEvent,
    params: &ModelParams,
    eta: f64,
) -> Result<bool, GeometryError> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(GeometryError::InvalidParams(format!("slack must be non-negative, got {eta}")));
    }
    p.check(params)?;
    q.check(params)?;
    Ok(tolerant_step(params, q.t - p.t, &p.x, &q.x, eta))
}

/// Closed axis-aligned box in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl AxisBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, GeometryError> {
        if lo.len() != hi.len() {
            return Err(GeometryError::MalformedBox("lo/hi length mismatch".into()));
        }
        if lo.iter().chain(&hi).any(|v| !v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return Err(GeometryError::MalformedBox("lo exceeds hi".into()));
        }
        Ok(AxisBox { lo, hi })
    }

    pub fn point(x: &[f64]) -> Self {
        AxisBox {
            lo: x.to_vec(),
            hi: x.to_vec(),
        }
    }

    /// Squared Euclidean distance from `x` to the box.
    pub fn dist2(&self, x: &[f64]) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .zip(x)
            .map(|((l, h), v)| {
                let d = if v < l {
                    l - v
                } else if v > h {
                    v - h
                } else {
                    0.0
                };
                d * d
            })
            .sum()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.dist2(x) == 0.0
    }

    fn inflate(&self, r: f64) -> AxisBox {
        AxisBox {
            lo: self.lo.iter().map(|v| v - r).collect(),
            hi: self.hi.iter().map(|v| v + r).collect(),
        }
    }
}

/// Product of one box per particle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductBox {
    pub factors: Vec<AxisBox>,
}

impl ProductBox {
    pub fn new(factors: Vec<AxisBox>) -> Self {
        ProductBox { factors }
    }

    /// Smallest product box containing every configuration in `points`.
    pub fn bounding(params: &ModelParams, points: &[&[f64]]) -> Result<Self, GeometryError> {
        let first = points.first().ok_or(GeometryError::EmptyRegion)?;
        let mut lo = first.to_vec();
        let mut hi = first.to_vec();
        for p in &points[1..] {
            for (i, v) in p.iter().enumerate() {
                lo[i] = lo[i].min(*v);
                hi[i] = hi[i].max(*v);
            }
        }
        let factors = (0..params.particles)
            .map(|j| {
                let r = j * params.n..(j + 1) * params.n;
                AxisBox {
                    lo: lo[r.clone()].to_vec(),
                    hi: hi[r].to_vec(),
                }
            })
            .collect();
        Ok(ProductBox { factors })
    }

    pub fn contains(&self, params: &ModelParams, x: &[f64]) -> bool {
        self.factors
            .iter()
            .zip(x.chunks_exact(params.n))
            .all(|(b, p)| b.contains(p))
    }

    /// Every particle within distance `r` of its factor.
    fn within(&self, params: &ModelParams, x: &[f64], r: f64) -> bool {
        let r2 = r * r;
        self.factors
            .iter()
            .zip(x.chunks_exact(params.n))
            .all(|(b, p)| b.dist2(p) <= r2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionShape {
    /// Finite set of flattened configurations.
    Atoms(Vec<Vec<f64>>),
    /// Finite union of product boxes.
    Boxes(Vec<ProductBox>),
}

/// A compact subset of one time slice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactRegion {
    pub t: f64,
    pub shape: RegionShape,
}

impl CompactRegion {
    pub fn atoms(params: &ModelParams, t: f64, atoms: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        if atoms.is_empty() {
            return Err(GeometryError::EmptyRegion);
        }
        for a in &atoms {
            params.check_config(a)?;
        }
        Ok(CompactRegion {
            t,
            shape: RegionShape::Atoms(atoms),
        })
    }

    pub fn boxes(params: &ModelParams, t: f64, boxes: Vec<ProductBox>) -> Result<Self, GeometryError> {
        if boxes.is_empty() {
            return Err(GeometryError::EmptyRegion);
        }
        for b in &boxes {
            if b.factors.len() != params.particles {
                return Err(GeometryError::DimensionMismatch {
                    expected: params.particles,
                    found: b.factors.len(),
                });
            }
            for f in &b.factors {
                if f.lo.len() != params.n {
                    return Err(GeometryError::DimensionMismatch {
                        expected: params.n,
                        found: f.lo.len(),
                    });
                }
                AxisBox::new(f.lo.clone(), f.hi.clone())?;
            }
        }
        Ok(CompactRegion {
            t,
            shape: RegionShape::Boxes(boxes),
        })
    }

    /// Membership of a configuration in the region itself.
    pub fn contains(&self, params: &ModelParams, x: &[f64]) -> bool {
        self.reaches(params, x, 0.0)
    }

    /// Some point of the region lies within per-particle distance `r` of `x`.
    fn reaches(&self, params: &ModelParams, x: &[f64], r: f64) -> bool {
        match &self.shape {
            RegionShape::Atoms(atoms) => {
                let r2 = r * r;
                atoms.iter().any(|a| {
                    a.chunks_exact(params.n)
                        .zip(x.chunks_exact(params.n))
                        .all(|(pa, px)| dist2(pa, px) <= r2)
                })
            }
            RegionShape::Boxes(boxes) => boxes.iter().any(|b| b.within(params, x, r)),
        }
    }
}

/// `q ∈ J⁺(K)`. Boxes are products, so the per-particle constraints decouple
/// and reduce to point-to-box distances.
pub fn future_contains(k: &CompactRegion, q: &ConfigEvent, params: &ModelParams) -> Result<bool, GeometryError> {
    q.check(params)?;
    Ok(future_contains_raw(k, q.t, &q.x, params))
}

pub(crate) fn future_contains_raw(k: &CompactRegion, t: f64, x: &[f64], params: &ModelParams) -> bool {
    if t < k.t {
        return false;
    }
    k.reaches(params, x, params.c * (t - k.t))
}

/// `J⁺(K) ∩ Σ_t`: the base region thickened by the light-travel radius.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceRegion {
    pub t: f64,
    pub radius: f64,
    pub base: CompactRegion,
    /// Outer product-box cover of the thickened region.
    pub outer: Vec<ProductBox>,
    /// The outer cover coincides with the region (no ball rounding lost).
    pub outer_exact: bool,
    /// Requested slice lies before the region.
    pub empty: bool,
}

impl SliceRegion {
    /// Exact membership, independent of the outer cover.
    pub fn contains(&self, params: &ModelParams, x: &[f64]) -> bool {
        !self.empty && self.base.reaches(params, x, self.radius)
    }
}

pub fn slice_future_region(k: &CompactRegion, t: f64, params: &ModelParams) -> SliceRegion {
    if t < k.t {
        return SliceRegion {
            t,
            radius: 0.0,
            base: k.clone(),
            outer: Vec::new(),
            outer_exact: true,
            empty: true,
        };
    }
    let radius = params.c * (t - k.t);
    let outer: Vec<ProductBox> = match &k.shape {
        RegionShape::Atoms(atoms) => atoms
            .iter()
            .map(|a| ProductBox {
                factors: a.chunks_exact(params.n).map(|p| AxisBox::point(p).inflate(radius)).collect(),
            })
            .collect(),
        RegionShape::Boxes(boxes) => boxes
            .iter()
            .map(|b| ProductBox {
                factors: b.factors.iter().map(|f| f.inflate(radius)).collect(),
            })
            .collect(),
    };
    // A ball sum is a box only in one dimension or at zero radius.
    let outer_exact = radius == 0.0 || params.n == 1;
    SliceRegion {
        t,
        radius,
        base: k.clone(),
        outer,
        outer_exact,
        empty: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3(n_particles: usize) -> ModelParams {
        ModelParams::new(1.0, 3, n_particles).unwrap()
    }

    #[test]
    fn single_particle_inside_cone() {
        let p = ConfigEvent::new(0.0, &[vec![0.0, 0.0, 0.0]]);
        let q = ConfigEvent::new(1.0, &[vec![0.5, 0.0, 0.0]]);
        assert!(precedes_point(&p, &q, &p3(1)).unwrap());
        assert!(precedes_point(&p, &p, &p3(1)).unwrap());
    }

    #[test]
    fn all_particles_must_be_causal() {
        let p = ConfigEvent::new(0.0, &[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]]);
        let q = ConfigEvent::new(1.0, &[vec![0.5, 0.0, 0.0], vec![3.0, 0.0, 0.0]]);
        assert!(!precedes_point(&p, &q, &p3(2)).unwrap());
    }

    #[test]
    fn chronological_cases() {
        let params = p3(1);
        let p = ConfigEvent::new(0.0, &[vec![0.0, 0.0, 0.0]]);
        let rest = ConfigEvent::new(1.0, &[vec![0.0, 0.0, 0.0]]);
        let light = ConfigEvent::new(1.0, &[vec![1.0, 0.0, 0.0]]);
        assert!(chronologically_precedes_point(&p, &rest, &params).unwrap());
        assert!(!chronologically_precedes_point(&p, &light, &params).unwrap());
        assert!(precedes_point(&p, &light, &params).unwrap());
        assert!(!chronologically_precedes_point(&p, &p, &params).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = ConfigEvent::new(0.0, &[vec![0.0, 0.0]]);
        let q = ConfigEvent::new(1.0, &[vec![0.0, 0.0, 0.0]]);
        assert!(matches!(
            precedes_point(&p, &q, &p3(1)),
            Err(GeometryError::DimensionMismatch { .. })
        ));
        assert!(ModelParams::new(0.0, 3, 1).is_err());
        assert!(ModelParams::new(1.0, 0, 1).is_err());
        assert!(ModelParams::new(1.0, 3, 0).is_err());
    }

    #[test]
    fn tolerant_predicate() {
        let params = p3(1);
        let p = ConfigEvent::new(0.0, &[vec![0.0, 0.0, 0.0]]);
        let q = ConfigEvent::new(1.0, &[vec![1.2, 0.0, 0.0]]);
        assert!(!precedes_point_tolerant(&p, &q, &params, 0.0).unwrap());
        assert!(precedes_point_tolerant(&p, &q, &params, 0.25).unwrap());
        assert!(precedes_point_tolerant(&p, &q, &params, -1.0).is_err());
    }

    fn unit_cube(params: &ModelParams) -> CompactRegion {
        let b = AxisBox::new(vec![0.0; 3], vec![1.0; 3]).unwrap();
        CompactRegion::boxes(params, 0.0, vec![ProductBox::new(vec![b])]).unwrap()
    }

    #[test]
    fn future_of_atom_and_box() {
        let params = p3(1);
        let k = CompactRegion::atoms(&params, 0.0, vec![vec![0.0; 3]]).unwrap();
        let q = ConfigEvent::new(1.0, &[vec![0.5, 0.0, 0.0]]);
        assert!(future_contains(&k, &q, &params).unwrap());

        let cube = unit_cube(&params);
        let near = ConfigEvent::new(1.0, &[vec![1.5, 0.0, 0.0]]);
        let far = ConfigEvent::new(0.1, &[vec![3.0, 0.0, 0.0]]);
        let past = ConfigEvent::new(-1.0, &[vec![0.5, 0.5, 0.5]]);
        assert!(future_contains(&cube, &near, &params).unwrap());
        assert!(!future_contains(&cube, &far, &params).unwrap());
        assert!(!future_contains(&cube, &past, &params).unwrap());
    }

    #[test]
    fn slice_regions() {
        let params = p3(1);
        let k = CompactRegion::atoms(&params, 0.0, vec![vec![0.0; 3]]).unwrap();
        let s = slice_future_region(&k, 1.0, &params);
        assert_eq!(s.radius, 1.0);
        assert!(!s.outer_exact);
        assert!(s.contains(&params, &[0.6, 0.6, 0.0]));
        assert!(!s.contains(&params, &[0.8, 0.8, 0.0]));
        // the outer box still covers the corner that the ball misses
        assert!(s.outer[0].contains(&params, &[0.8, 0.8, 0.0]));

        let same = slice_future_region(&k, 0.0, &params);
        assert!(same.outer_exact);
        assert!(same.contains(&params, &[0.0; 3]));
        assert!(!same.contains(&params, &[1e-9, 0.0, 0.0]));

        let before = slice_future_region(&k, -1.0, &params);
        assert!(before.empty);
        assert!(!before.contains(&params, &[0.0; 3]));
    }

    #[test]
    fn one_dimensional_slice_is_an_interval() {
        let params = ModelParams::new(1.0, 1, 1).unwrap();
        let k = CompactRegion::boxes(
            &params,
            0.0,
            vec![ProductBox::new(vec![AxisBox::new(vec![0.0], vec![1.0]).unwrap()])],
        )
        .unwrap();
        let s = slice_future_region(&k, 2.0, &params);
        assert!(s.outer_exact);
        assert_eq!(s.outer[0].factors[0], AxisBox { lo: vec![-2.0], hi: vec![3.0] });
        // dense membership sampling reproduces [-2, 3]
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..=10_000 {
            let x = -5.0 + 10.0 * i as f64 / 10_000.0;
            if s.contains(&params, &[x]) {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        assert!((lo + 2.0).abs() < 1e-3 && (hi - 3.0).abs() < 1e-3, "{lo} {hi}");
    }
}
