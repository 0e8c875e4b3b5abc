//! Discrete N-particle causal curves and measures on them.
//!
//! A trajectory is parametrized by coordinate time on a finite grid and
//! interpolated linearly. A causal evolution of slice measures is lifted to a
//! trajectory measure by coupling consecutive slices, joining coupled atoms by
//! straight segments, and concatenating the segments with the product of the
//! conditional measures at every interior slice.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::mass::Mass;
use crate::measure::{position_key, Evolution, MeasureError, SliceMeasure};
use crate::order::{precedes_measures, precedes_measures_with, OrderError, PrecedenceCertificate};
use crate::spacetime::{causal_step, CausalPredicate, ModelParams};

/// Upper bound on trajectories kept by a construction.
pub const MAX_TRAJECTORIES: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("slices {from} -> {to} are not causally ordered")]
    Infeasible {
        from: usize,
        to: usize,
        certificate: Box<PrecedenceCertificate<f64>>,
    },
    #[error("an evolution needs at least two slices")]
    TooFewSlices,
    #[error("time grids do not match: {0}")]
    GridMismatch(String),
    #[error("time {t} outside the grid span [{lo}, {hi}]")]
    OutsideSpan { t: f64, lo: f64, hi: f64 },
    #[error("trajectory {index} violates the light cone on segment {segment}")]
    Superluminal { index: usize, segment: usize },
    #[error("measures are not concatenable: {0}")]
    NotConcatenable(String),
    #[error("trajectory count {0} exceeds the construction limit")]
    TooManyTrajectories(usize),
    #[error(transparent)]
    Order(#[from] OrderError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Positions of all particles at every grid time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub positions: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Linear interpolation; exact grid times return the stored point.
    pub fn at(&self, grid: &[f64], t: f64) -> Option<Vec<f64>> {
        let k = segment_index(grid, t)?;
        if t == grid[k] {
            return Some(self.positions[k].clone());
        }
        if t == grid[k + 1] {
            return Some(self.positions[k + 1].clone());
        }
        let s = (t - grid[k]) / (grid[k + 1] - grid[k]);
        Some(
            self.positions[k]
                .iter()
                .zip(&self.positions[k + 1])
                .map(|(a, b)| a + s * (b - a))
                .collect(),
        )
    }

    /// First segment whose per-particle displacement exceeds `c·Δt`.
    pub fn first_superluminal_segment(&self, params: &ModelParams, grid: &[f64]) -> Option<usize> {
        (0..grid.len().saturating_sub(1))
            .find(|&k| !causal_step(params, grid[k + 1] - grid[k], &self.positions[k], &self.positions[k + 1]))
    }
}

/// Segment `k` with `grid[k] <= t <= grid[k+1]`.
fn segment_index(grid: &[f64], t: f64) -> Option<usize> {
    let (lo, hi) = (*grid.first()?, *grid.last()?);
    if t < lo || t > hi {
        return None;
    }
    if grid.len() < 2 {
        return None;
    }
    let k = grid.partition_point(|&g| g <= t).saturating_sub(1);
    Some(k.min(grid.len() - 2))
}

/// A weighted finite family of trajectories sharing one time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeasure<W = f64> {
    params: ModelParams,
    grid: Vec<f64>,
    paths: Vec<(Trajectory, W)>,
    pruned_mass: f64,
}

impl<W: Mass> TrajectoryMeasure<W> {
    /// Validates grid order, causal segments and unit total weight.
    pub fn new(params: ModelParams, grid: Vec<f64>, paths: Vec<(Trajectory, W)>) -> Result<Self, CurveError> {
        params.validate().map_err(MeasureError::from)?;
        if grid.len() < 2 {
            return Err(CurveError::TooFewSlices);
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CurveError::GridMismatch("grid must be strictly increasing".into()));
        }
        if paths.is_empty() {
            return Err(MeasureError::Empty.into());
        }
        let mut total = W::zero();
        for (index, (tr, w)) in paths.iter().enumerate() {
            if tr.positions.len() != grid.len() {
                return Err(CurveError::GridMismatch(format!("trajectory {index} has wrong length")));
            }
            for x in &tr.positions {
                params.check_config(x).map_err(MeasureError::from)?;
            }
            if *w <= W::zero() {
                return Err(MeasureError::NonPositiveWeight(w.to_f64()).into());
            }
            if let Some(segment) = tr.first_superluminal_segment(&params, &grid) {
                return Err(CurveError::Superluminal { index, segment });
            }
            total = total + w.clone();
        }
        if !W::is_normalized(&total) {
            return Err(MeasureError::NotNormalized(total.to_f64()).into());
        }
        Ok(TrajectoryMeasure {
            params,
            grid,
            paths,
            pruned_mass: 0.0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn paths(&self) -> &[(Trajectory, W)] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    /// Mass discarded by pruning during construction (float mode only).
    pub fn pruned_mass(&self) -> f64 {
        self.pruned_mass
    }

    /// `(ev_t)_♯σ`: each trajectory deposits its weight at its time-`t` point.
    pub fn evaluate(&self, t: f64) -> Result<SliceMeasure<W>, CurveError> {
        let (lo, hi) = (self.grid[0], *self.grid.last().unwrap_or(&self.grid[0]));
        let mut atoms = Vec::with_capacity(self.paths.len());
        for (tr, w) in &self.paths {
            let x = tr.at(&self.grid, t).ok_or(CurveError::OutsideSpan { t, lo, hi })?;
            atoms.push((x, w.clone()));
        }
        Ok(SliceMeasure::unnormalized(self.params, t, atoms)?)
    }

    /// Definition-style concatenation with `next`, whose grid must start where
    /// this one ends and whose initial marginal must equal this final one.
    /// Paths meeting at a junction atom `p` are paired with weight
    /// `w₁ · w₂ / mass(p)`.
    pub fn concatenate(&self, next: &TrajectoryMeasure<W>) -> Result<TrajectoryMeasure<W>, CurveError> {
        let junction = *self.grid.last().ok_or(CurveError::TooFewSlices)?;
        if next.grid[0] != junction {
            return Err(CurveError::NotConcatenable(format!(
                "grids meet at {junction} and {}",
                next.grid[0]
            )));
        }
        if self.params != next.params {
            return Err(CurveError::NotConcatenable("parameter mismatch".into()));
        }
        let end = self.evaluate(junction)?;
        let start = next.evaluate(junction)?;
        if !end.same_as(&start, 1e-9) {
            return Err(CurveError::NotConcatenable("junction marginals differ".into()));
        }
        let mut incoming: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
        for (i, (tr, _)) in self.paths.iter().enumerate() {
            incoming.entry(position_key(tr.positions.last().unwrap())).or_default().push(i);
        }
        let mut outgoing: BTreeMap<Vec<u64>, Vec<usize>> = BTreeMap::new();
        for (i, (tr, _)) in next.paths.iter().enumerate() {
            outgoing.entry(position_key(&tr.positions[0])).or_default().push(i);
        }
        let mut grid = self.grid.clone();
        grid.extend_from_slice(&next.grid[1..]);
        let mut paths = Vec::new();
        let mut pruned = 0.0;
        for atom in end.atoms() {
            let key = position_key(&atom.x);
            let (Some(ins), Some(outs)) = (incoming.get(&key), outgoing.get(&key)) else {
                return Err(CurveError::NotConcatenable("junction atom without paths".into()));
            };
            if ins.len().saturating_mul(outs.len()).saturating_add(paths.len()) > MAX_TRAJECTORIES {
                return Err(CurveError::TooManyTrajectories(ins.len() * outs.len() + paths.len()));
            }
            for &a in ins {
                for &b in outs {
                    let w = self.paths[a].1.clone() * next.paths[b].1.clone() / atom.w.clone();
                    if w.is_negligible() {
                        pruned += w.to_f64();
                        continue;
                    }
                    let mut positions = self.paths[a].0.positions.clone();
                    positions.extend_from_slice(&next.paths[b].0.positions[1..]);
                    paths.push((Trajectory { positions }, w));
                }
            }
        }
        Ok(renormalize(self.params, grid, paths, self.pruned_mass + next.pruned_mass + pruned))
    }
}

fn renormalize<W: Mass>(params: ModelParams, grid: Vec<f64>, mut paths: Vec<(Trajectory, W)>, pruned: f64) -> TrajectoryMeasure<W> {
    if pruned > 0.0 {
        let total = paths.iter().fold(W::zero(), |acc, (_, w)| acc + w.clone());
        for (_, w) in &mut paths {
            *w = w.clone() / total.clone();
        }
    }
    TrajectoryMeasure {
        params,
        grid,
        paths,
        pruned_mass: pruned,
    }
}

/// Straight-segment trajectory measure over one coupled slice pair.
fn segment_measure<W: Mass>(
    mu: &SliceMeasure<W>,
    nu: &SliceMeasure<W>,
    certificate: &PrecedenceCertificate<W>,
) -> Option<TrajectoryMeasure<W>> {
    let coupling = certificate.witness()?;
    let paths = coupling
        .entries
        .iter()
        .map(|e| {
            (
                Trajectory {
                    positions: vec![mu.atoms()[e.i].x.clone(), nu.atoms()[e.j].x.clone()],
                },
                e.w.clone(),
            )
        })
        .collect();
    Some(TrajectoryMeasure {
        params: *mu.params(),
        grid: vec![mu.t(), nu.t()],
        paths,
        pruned_mass: 0.0,
    })
}

fn certificate_to_f64<W: Mass>(cert: &PrecedenceCertificate<W>) -> PrecedenceCertificate<f64> {
    use crate::order::{Coupling, CouplingEntry, Violator};
    match cert {
        PrecedenceCertificate::Witness(c) => PrecedenceCertificate::Witness(Coupling {
            rows: c.rows,
            cols: c.cols,
            entries: c
                .entries
                .iter()
                .map(|e| CouplingEntry {
                    i: e.i,
                    j: e.j,
                    w: e.w.to_f64(),
                })
                .collect(),
        }),
        PrecedenceCertificate::Violated(v) => PrecedenceCertificate::Violated(Violator {
            atoms: v.atoms.clone(),
            mu_mass: v.mu_mass.to_f64(),
            nu_future_mass: v.nu_future_mass.to_f64(),
        }),
    }
}

/// Lifts a causal evolution to a trajectory measure whose evaluation at every
/// grid time reproduces the corresponding slice.
pub fn build_trajectory_measure<W: Mass>(evo: &Evolution<W>) -> Result<TrajectoryMeasure<W>, CurveError> {
    let slices = evo.slices();
    if slices.len() < 2 {
        return Err(CurveError::TooFewSlices);
    }
    let mut sigma: Option<TrajectoryMeasure<W>> = None;
    for k in 0..slices.len() - 1 {
        let (mu, nu) = (&slices[k], &slices[k + 1]);
        let cert = precedes_measures(mu, nu)?;
        let seg = segment_measure(mu, nu, &cert).ok_or_else(|| CurveError::Infeasible {
            from: k,
            to: k + 1,
            certificate: Box::new(certificate_to_f64(&cert)),
        })?;
        sigma = Some(match sigma {
            None => seg,
            Some(s) => s.concatenate(&seg)?,
        });
    }
    Ok(sigma.expect("at least one segment"))
}

/// Pairwise causality matrix of an evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct CausalityReport {
    /// `matrix[s][t]` for `s < t`; `None` on and below the diagonal.
    pub matrix: Vec<Vec<Option<bool>>>,
    pub consecutive_ok: bool,
    pub all_pairs_ok: bool,
}

impl CausalityReport {
    pub fn causal(&self) -> bool {
        self.all_pairs_ok
    }

    /// Failing `(s, t)` pairs in row-major order.
    pub fn failures(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (s, row) in self.matrix.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                if *v == Some(false) {
                    out.push((s, t));
                }
            }
        }
        out
    }
}

/// Checks `μ_s ⪯ μ_t` for every ordered grid pair.
pub fn verify_causal_evolution<W: Mass>(evo: &Evolution<W>) -> Result<CausalityReport, CurveError> {
    verify_causal_evolution_with(evo, CausalPredicate::Exact)
}

pub fn verify_causal_evolution_with<W: Mass>(
    evo: &Evolution<W>,
    predicate: CausalPredicate,
) -> Result<CausalityReport, CurveError> {
    let slices = evo.slices();
    let m = slices.len();
    let mut matrix = vec![vec![None; m]; m];
    for s in 0..m {
        for t in s + 1..m {
            matrix[s][t] = Some(precedes_measures_with(&slices[s], &slices[t], predicate)?.holds());
        }
    }
    let consecutive_ok = (0..m.saturating_sub(1)).all(|s| matrix[s][s + 1] == Some(true));
    let all_pairs_ok = matrix.iter().flatten().all(|v| *v != Some(false));
    Ok(CausalityReport {
        matrix,
        consecutive_ok,
        all_pairs_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> ModelParams {
        ModelParams::new(1.0, 1, 1).unwrap()
    }

    fn m(t: f64, pts: &[(f64, f64)]) -> SliceMeasure {
        SliceMeasure::new(line(), t, pts.iter().map(|&(x, w)| (vec![x], w)).collect()).unwrap()
    }

    #[test]
    fn single_worldline() {
        let evo = Evolution::new(vec![m(0.0, &[(0.0, 1.0)]), m(1.0, &[(0.5, 1.0)]), m(2.0, &[(1.0, 1.0)])]).unwrap();
        let sigma = build_trajectory_measure(&evo).unwrap();
        assert_eq!(sigma.len(), 1);
        assert_eq!(sigma.paths()[0].0.positions, vec![vec![0.0], vec![0.5], vec![1.0]]);
        assert_eq!(sigma.paths()[0].1, 1.0);
        let mid = sigma.evaluate(0.5).unwrap();
        assert_eq!(mid.atoms()[0].x, vec![0.25]);
    }

    #[test]
    fn unique_matching_two_trajectories() {
        let evo = Evolution::new(vec![m(0.0, &[(0.0, 0.5), (10.0, 0.5)]), m(1.0, &[(0.5, 0.5), (10.5, 0.5)])]).unwrap();
        let sigma = build_trajectory_measure(&evo).unwrap();
        assert_eq!(sigma.len(), 2);
        assert!(sigma.paths().iter().all(|(_, w)| *w == 0.5));
    }

    #[test]
    fn proportional_split_through_middle_atom() {
        // the middle atom 0 at t=1 receives ½ from x=0 and splits ¼ + ¼
        let evo = Evolution::new(vec![
            m(0.0, &[(0.0, 0.5), (10.0, 0.5)]),
            m(1.0, &[(0.0, 0.5), (10.0, 0.5)]),
            m(2.0, &[(-1.0, 0.25), (1.0, 0.25), (10.0, 0.5)]),
        ])
        .unwrap();
        let sigma = build_trajectory_measure(&evo).unwrap();
        let through_zero: Vec<f64> = sigma
            .paths()
            .iter()
            .filter(|(tr, _)| tr.positions[1] == vec![0.0])
            .map(|(_, w)| *w)
            .collect();
        assert_eq!(through_zero, vec![0.25, 0.25]);
        for (k, s) in evo.slices().iter().enumerate() {
            assert!(sigma.evaluate(sigma.grid()[k]).unwrap().same_as(s, 1e-12));
        }
    }

    #[test]
    fn crossing_trajectories_merge() {
        let grid = vec![0.0, 2.0];
        let sigma = TrajectoryMeasure::new(
            line(),
            grid,
            vec![
                (Trajectory { positions: vec![vec![-1.0], vec![1.0]] }, 0.5),
                (Trajectory { positions: vec![vec![1.0], vec![-1.0]] }, 0.5),
            ],
        )
        .unwrap();
        let at_cross = sigma.evaluate(1.0).unwrap();
        assert_eq!(at_cross.len(), 1);
        assert_eq!(at_cross.atoms()[0].w, 1.0);
        assert!(matches!(sigma.evaluate(3.0), Err(CurveError::OutsideSpan { .. })));
    }

    #[test]
    fn superluminal_trajectory_rejected() {
        let r = TrajectoryMeasure::new(
            line(),
            vec![0.0, 1.0],
            vec![(Trajectory { positions: vec![vec![0.0], vec![2.0]] }, 1.0)],
        );
        assert!(matches!(r, Err(CurveError::Superluminal { index: 0, segment: 0 })));
    }

    #[test]
    fn infeasible_pair_reported() {
        let evo = Evolution::new(vec![m(0.0, &[(0.0, 1.0)]), m(1.0, &[(0.5, 1.0)]), m(2.0, &[(5.0, 1.0)])]).unwrap();
        match build_trajectory_measure(&evo) {
            Err(CurveError::Infeasible { from: 1, to: 2, certificate }) => assert!(!certificate.holds()),
            other => panic!("unexpected {other:?}"),
        }
        let report = verify_causal_evolution(&evo).unwrap();
        assert!(!report.causal());
        assert_eq!(report.failures(), vec![(0, 2), (1, 2)]);
    }

    #[test]
    fn single_slice_is_vacuously_causal() {
        let evo = Evolution::new(vec![m(0.0, &[(0.0, 1.0)])]).unwrap();
        let r = verify_causal_evolution(&evo).unwrap();
        assert!(r.causal() && r.consecutive_ok);
        assert!(matches!(build_trajectory_measure(&evo), Err(CurveError::TooFewSlices)));
    }
}
