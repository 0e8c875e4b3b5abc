//! Seeded random instances on a dyadic lattice.
//!
//! Positions are integer multiples of [`UNIT`] and slice times are integers,
//! so every distance comparison in the point predicates is exact in floating
//! point and verdicts do not depend on rounding.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::mass::{Mass, Rational};
use crate::measure::{Evolution, SliceMeasure};
use crate::spacetime::ModelParams;

/// Lattice spacing of generated positions.
pub const UNIT: f64 = 0.25;

/// Offset moving an atom out of reach of every generated atom.
const FAR: i64 = 400;

type Point = Vec<i64>;

fn to_position(p: &[i64]) -> Vec<f64> {
    p.iter().map(|&v| v as f64 * UNIT).collect()
}

/// Random integer displacement of one particle with length at most `reach` units.
fn causal_offset<R: Rng>(rng: &mut R, n: usize, reach: i64) -> Vec<i64> {
    loop {
        let d: Vec<i64> = (0..n).map(|_| rng.gen_range(-reach..=reach)).collect();
        if d.iter().map(|v| v * v).sum::<i64>() <= reach * reach {
            return d;
        }
    }
}

fn causal_step<R: Rng>(rng: &mut R, params: &ModelParams, p: &[i64], dt: i64) -> Point {
    let reach = (params.c * dt as f64 / UNIT).floor() as i64;
    p.chunks(params.n)
        .flat_map(|x| {
            let d = causal_offset(rng, params.n, reach);
            x.iter().zip(d).map(|(a, b)| a + b).collect::<Vec<_>>()
        })
        .collect()
}

fn random_point<R: Rng>(rng: &mut R, params: &ModelParams) -> Point {
    (0..params.config_len()).map(|_| rng.gen_range(-4..=4)).collect()
}

fn build<W: Mass>(params: &ModelParams, t: f64, atoms: &[(Point, u64)]) -> SliceMeasure<W> {
    let total: u64 = atoms.iter().map(|a| a.1).sum();
    SliceMeasure::new(
        *params,
        t,
        atoms.iter().map(|(p, w)| (to_position(p), W::from_ratio(*w, total))).collect(),
    )
    .expect("generated measure is valid")
}

/// Random model with `c = 1`, `n ∈ {1,2,3}` and `N ∈ {1,2,3}`.
pub fn random_params<R: Rng>(rng: &mut R) -> ModelParams {
    ModelParams::new(1.0, rng.gen_range(1..=3), rng.gen_range(1..=3)).expect("valid parameters")
}

fn distinct_points<R: Rng>(rng: &mut R, params: &ModelParams, count: usize) -> Vec<Point> {
    let mut pts: Vec<Point> = Vec::new();
    while pts.len() < count {
        let p = random_point(rng, params);
        if !pts.contains(&p) {
            pts.push(p);
        }
    }
    pts
}

/// Random measure with `atoms` distinct atoms and integer-ratio weights.
pub fn random_measure<W: Mass, R: Rng>(rng: &mut R, params: &ModelParams, t: f64, atoms: usize) -> SliceMeasure<W> {
    let pts = distinct_points(rng, params, atoms);
    let weighted: Vec<(Point, u64)> = pts.into_iter().map(|p| (p, rng.gen_range(1..=9))).collect();
    build(params, t, &weighted)
}

/// How a precedence instance was built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    /// `ν` is a causal pushforward of `μ` with random splitting.
    Feasible,
    /// As `Feasible`, but one image atom is moved out of reach of all of `μ`.
    Infeasible,
    /// `ν` drawn independently of `μ`; the verdict is not known in advance.
    Unrelated,
}

#[derive(Debug, Clone)]
pub struct PrecedenceInstance {
    pub kind: InstanceKind,
    pub mu: SliceMeasure<Rational>,
    pub nu: SliceMeasure<Rational>,
}

/// Random pair of measures with 2–8 atoms on each side.
pub fn random_instance<R: Rng>(rng: &mut R, kind: InstanceKind) -> PrecedenceInstance {
    loop {
        let params = random_params(rng);
        let dt = rng.gen_range(1..=2);
        let k = rng.gen_range(2..=8);
        let mu_pts = distinct_points(rng, &params, k);
        let mu_w: Vec<u64> = (0..k).map(|_| rng.gen_range(1..=6) * 2).collect();
        let mu_atoms: Vec<(Point, u64)> = mu_pts.iter().cloned().zip(mu_w.iter().copied()).collect();
        let nu_atoms: Vec<(Point, u64)> = match kind {
            InstanceKind::Unrelated => {
                let m = rng.gen_range(2..=8);
                distinct_points(rng, &params, m)
                    .into_iter()
                    .map(|p| (p, rng.gen_range(1..=9)))
                    .collect()
            }
            _ => {
                let mut images = Vec::new();
                let mut budget = 8usize.saturating_sub(k);
                for (p, w) in &mu_atoms {
                    if budget > 0 && rng.gen_bool(0.4) {
                        budget -= 1;
                        let part = rng.gen_range(1..*w);
                        images.push((causal_step(rng, &params, p, dt), part));
                        images.push((causal_step(rng, &params, p, dt), w - part));
                    } else {
                        images.push((causal_step(rng, &params, p, dt), *w));
                    }
                }
                if kind == InstanceKind::Infeasible {
                    let victim = rng.gen_range(0..images.len());
                    images[victim].0[0] += FAR;
                }
                images
            }
        };
        let mu: SliceMeasure<Rational> = build(&params, 0.0, &mu_atoms);
        let nu: SliceMeasure<Rational> = build(&params, dt as f64, &nu_atoms);
        if (2..=8).contains(&nu.len()) {
            return PrecedenceInstance { kind, mu, nu };
        }
    }
}

/// Pushes every atom along an independent causal step, splitting some.
pub fn causal_successor<W: Mass, R: Rng>(rng: &mut R, mu: &SliceMeasure<W>, dt: i64, max_atoms: usize) -> SliceMeasure<W> {
    let params = *mu.params();
    let mut atoms: Vec<(Vec<f64>, W)> = Vec::new();
    let mut budget = max_atoms.saturating_sub(mu.len());
    for a in mu.atoms() {
        let p: Point = a.x.iter().map(|v| (v / UNIT).round() as i64).collect();
        if budget > 0 && rng.gen_bool(0.3) {
            budget -= 1;
            let half = a.w.clone() * W::from_ratio(1, 2);
            atoms.push((to_position(&causal_step(rng, &params, &p, dt)), half.clone()));
            atoms.push((to_position(&causal_step(rng, &params, &p, dt)), half));
        } else {
            atoms.push((to_position(&causal_step(rng, &params, &p, dt)), a.w.clone()));
        }
    }
    SliceMeasure::new(params, mu.t() + dt as f64, atoms).expect("pushforward is valid")
}

/// A causal evolution drawn as a branching family of lattice worldlines.
#[derive(Debug, Clone)]
pub struct RandomEvolution {
    pub params: ModelParams,
    /// `(positions per slice, weight numerator)`.
    pub paths: Vec<(Vec<Point>, u64)>,
    pub slices: usize,
}

impl RandomEvolution {
    pub fn generate<R: Rng>(rng: &mut R, slices: usize, max_atoms: usize) -> Self {
        let params = ModelParams::new(1.0, rng.gen_range(1..=3), rng.gen_range(1..=2)).expect("valid parameters");
        let roots = rng.gen_range(1..=4);
        let mut paths: Vec<(Vec<Point>, u64)> = distinct_points(rng, &params, roots)
            .into_iter()
            .map(|p| (vec![p], rng.gen_range(1..=8) * 64))
            .collect();
        for _ in 1..slices {
            let mut next = Vec::new();
            let mut budget = max_atoms.saturating_sub(paths.len());
            for (pos, w) in paths {
                let last = pos.last().expect("non-empty path").clone();
                if budget > 0 && w > 1 && rng.gen_bool(0.3) {
                    budget -= 1;
                    let part = rng.gen_range(1..w);
                    for share in [part, w - part] {
                        let mut p = pos.clone();
                        p.push(causal_step(rng, &params, &last, 1));
                        next.push((p, share));
                    }
                } else {
                    let mut p = pos;
                    p.push(causal_step(rng, &params, &last, 1));
                    next.push((p, w));
                }
            }
            paths = next;
        }
        RandomEvolution { params, paths, slices }
    }

    /// Moves every worldline through one atom of slice `to` far away from
    /// slice `to` onwards, breaking exactly the pair `(to - 1, to)`.
    pub fn inject_jump<R: Rng>(&mut self, rng: &mut R, to: usize) {
        let victim = self.paths.choose(rng).expect("non-empty").0[to].clone();
        for (pos, _) in &mut self.paths {
            if pos[to] == victim {
                for p in pos.iter_mut().skip(to) {
                    p[0] += FAR;
                }
            }
        }
    }

    pub fn evolution<W: Mass>(&self) -> Evolution<W> {
        let slices = (0..self.slices)
            .map(|k| {
                let atoms: Vec<(Point, u64)> = self.paths.iter().map(|(p, w)| (p[k].clone(), *w)).collect();
                build(&self.params, k as f64, &atoms)
            })
            .collect();
        Evolution::new(slices).expect("grid times increase")
    }
}

/// Random instance kinds in a fixed round-robin so every kind is represented.
pub fn kind_for(index: usize) -> InstanceKind {
    match index % 3 {
        0 => InstanceKind::Feasible,
        1 => InstanceKind::Infeasible,
        _ => InstanceKind::Unrelated,
    }
}
