use rayon::prelude::*;
use serde::Serialize;

use super::density::{DensitySnapshot, JointAxis};
use super::WaveError;
use crate::measure::{Evolution, SliceMeasure};
use crate::order::{precedes_measures_with, PrecedenceCertificate, Violator};
use crate::spacetime::{causal_step, CausalPredicate, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyOptions {
    /// Mass fraction allowed in the discarded low-density tail.
    pub eps_support: f64,
    /// Multiplier of the per-run slack `atom spacing + c·dt`.
    pub slack: f64,
    pub max_atoms: usize,
    /// Also compare the first and last slices directly.
    pub check_span: bool,
    /// Simulation step used in the slack; defaults to the smallest snapshot gap.
    pub dt_step: Option<f64>,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            eps_support: 1e-3,
            slack: 1.0,
            max_atoms: 4096,
            check_span: true,
            dt_step: None,
        }
    }
}

/// High-density cells of one snapshot carrying at least `1 - eps` of its mass.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportCells {
    pub time: f64,
    pub particles: usize,
    pub axis: JointAxis,
    pub c: f64,
    /// `(axis indices, cell mass)`.
    pub cells: Vec<(Vec<usize>, f64)>,
    /// Mass fraction left out of the support.
    pub discarded: f64,
}

pub fn support_cells(snap: &DensitySnapshot, eps_support: f64) -> Result<SupportCells, WaveError> {
    let vol = snap.cell_volume();
    let total: f64 = snap.density.iter().sum::<f64>() * vol;
    if !(total > 0.0) {
        return Err(WaveError::EmptySupport);
    }
    let mut order: Vec<usize> = (0..snap.cells()).filter(|&c| snap.density[c] > 0.0).collect();
    order.par_sort_unstable_by(|&a, &b| snap.density[b].total_cmp(&snap.density[a]).then(a.cmp(&b)));
    let target = (1.0 - eps_support) * total;
    let mut kept = Vec::new();
    let mut acc = 0.0;
    for cell in order {
        if acc >= target && !kept.is_empty() {
            break;
        }
        let m = snap.density[cell] * vol;
        acc += m;
        kept.push((snap.axis_indices(cell), m));
    }
    if kept.is_empty() {
        return Err(WaveError::EmptySupport);
    }
    Ok(SupportCells {
        time: snap.time,
        particles: snap.particles,
        axis: snap.axis,
        c: snap.c,
        cells: kept,
        discarded: 1.0 - acc / total,
    })
}

fn block_count(support: &SupportCells, block: usize) -> usize {
    let mut keys: Vec<Vec<usize>> = support
        .cells
        .iter()
        .map(|(idx, _)| idx.iter().map(|i| i / block).collect())
        .collect();
    keys.sort_unstable();
    keys.dedup();
    keys.len()
}

/// Merges cells into blocks of `block` cells per axis, with atoms at block centres.
fn block_measure(support: &SupportCells, block: usize) -> Result<SliceMeasure<f64>, WaveError> {
    let params = ModelParams::new(support.c, 3, support.particles).map_err(crate::measure::MeasureError::from)?;
    let axis = support.axis;
    let centre = |b: usize| axis.origin + (b * block) as f64 * axis.spacing + 0.5 * (block - 1) as f64 * axis.spacing;
    let atoms = support
        .cells
        .iter()
        .map(|(idx, m)| (idx.iter().map(|&i| centre(i / block)).collect(), *m))
        .collect();
    Ok(SliceMeasure::unnormalized(params, support.time, atoms)?.renormalized())
}

/// Smallest power-of-two block size keeping every support within `max_atoms`.
pub fn common_block(supports: &[SupportCells], max_atoms: usize) -> usize {
    let points = supports.iter().map(|s| s.axis.points).max().unwrap_or(1);
    let mut block = 1;
    while block < points && supports.iter().any(|s| block_count(s, block) > max_atoms) {
        block *= 2;
    }
    block
}

/// Thresholded, renormalized, block-coarsened slice measures for a run.
pub fn supports_to_measures(
    supports: &[SupportCells],
    max_atoms: usize,
) -> Result<(Vec<SliceMeasure<f64>>, usize), WaveError> {
    if let Some(first) = supports.first() {
        if supports.iter().any(|s| s.axis != first.axis || s.particles != first.particles) {
            return Err(WaveError::GridMismatch("snapshots differ in joint grid".into()));
        }
    }
    let block = common_block(supports, max_atoms);
    let measures = supports
        .iter()
        .map(|s| block_measure(s, block))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((measures, block))
}

/// Single-snapshot conversion with its own block size.
pub fn snapshot_to_measure(snap: &DensitySnapshot, eps_support: f64, max_atoms: usize) -> Result<SliceMeasure<f64>, WaveError> {
    let support = support_cells(snap, eps_support)?;
    let block = common_block(std::slice::from_ref(&support), max_atoms);
    block_measure(&support, block)
}

/// Shifts every particle of every atom by `offset`.
pub fn boost_measure(mu: &SliceMeasure<f64>, offset: [f64; 3]) -> Result<SliceMeasure<f64>, WaveError> {
    let atoms = mu
        .atoms()
        .iter()
        .map(|a| {
            let x = a.x.iter().enumerate().map(|(i, v)| v + offset[i % 3]).collect();
            (x, a.w)
        })
        .collect();
    Ok(SliceMeasure::unnormalized(*mu.params(), mu.t(), atoms)?)
}

/// Mass of `nu` outside the exact causal future of `mu`'s support.
pub fn escaped_mass(mu: &SliceMeasure<f64>, nu: &SliceMeasure<f64>) -> f64 {
    let params = mu.params();
    let dt = nu.t() - mu.t();
    nu.atoms()
        .par_iter()
        .filter(|b| !mu.atoms().iter().any(|a| causal_step(params, dt, &a.x, &b.x)))
        .map(|b| b.w)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub from: usize,
    pub to: usize,
    pub t_from: f64,
    pub t_to: f64,
    pub holds: bool,
    pub escaped_mass: f64,
    /// Whether this is the first-to-last comparison rather than a consecutive pair.
    pub span: bool,
    #[serde(skip)]
    pub violator: Option<Violator<f64>>,
    pub violator_atoms: usize,
    pub violator_mu_mass: Option<f64>,
    pub violator_nu_future_mass: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertificationReport {
    pub options: CertifyOptions,
    /// Additive slack used by the tolerant predicate.
    pub eta: f64,
    pub block: usize,
    pub atom_spacing: f64,
    pub atoms_per_slice: Vec<usize>,
    pub discarded_mass: Vec<f64>,
    pub pairs: Vec<PairReport>,
}

impl CertificationReport {
    pub fn consecutive_hold(&self) -> bool {
        self.pairs.iter().filter(|p| !p.span).all(|p| p.holds)
    }

    pub fn all_hold(&self) -> bool {
        self.pairs.iter().all(|p| p.holds)
    }

    pub fn max_escaped_mass(&self) -> f64 {
        self.pairs.iter().filter(|p| !p.span).map(|p| p.escaped_mass).fold(0.0, f64::max)
    }

    pub fn first_failure(&self) -> Option<&PairReport> {
        self.pairs.iter().find(|p| !p.holds)
    }
}

#[derive(Debug, Clone)]
pub struct Certification {
    pub evolution: Evolution<f64>,
    pub certificates: Vec<PrecedenceCertificate<f64>>,
    pub report: CertificationReport,
}

fn pair_report(
    measures: &[SliceMeasure<f64>],
    from: usize,
    to: usize,
    eta: f64,
    span: bool,
) -> Result<(PairReport, PrecedenceCertificate<f64>), WaveError> {
    let (mu, nu) = (&measures[from], &measures[to]);
    let cert = precedes_measures_with(mu, nu, CausalPredicate::Tolerant(eta))?;
    let violator = cert.violator().cloned();
    Ok((
        PairReport {
            from,
            to,
            t_from: mu.t(),
            t_to: nu.t(),
            holds: cert.holds(),
            escaped_mass: escaped_mass(mu, nu),
            span,
            violator_atoms: violator.as_ref().map_or(0, |v| v.atoms.len()),
            violator_mu_mass: violator.as_ref().map(|v| v.mu_mass),
            violator_nu_future_mass: violator.as_ref().map(|v| v.nu_future_mass),
            violator,
        },
        cert,
    ))
}

/// Runs the tolerant precedence test on consecutive slices (and first-to-last
/// if requested). `atom_spacing` and `dt_step` set the slack
/// `eta = slack · (atom_spacing + c·dt_step)`.
pub fn certify_measures(
    measures: Vec<SliceMeasure<f64>>,
    options: &CertifyOptions,
    atom_spacing: f64,
    block: usize,
    discarded_mass: Vec<f64>,
) -> Result<Certification, WaveError> {
    let evolution = Evolution::new(measures)?;
    let slices = evolution.slices();
    let times = evolution.times();
    let dt_step = options.dt_step.unwrap_or_else(|| {
        times
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
            .min(f64::MAX)
    });
    let dt_step = if dt_step.is_finite() { dt_step } else { 0.0 };
    let c = evolution.params().c;
    let eta = options.slack * (atom_spacing + c * dt_step);
    let mut jobs: Vec<(usize, usize, bool)> = (1..slices.len()).map(|k| (k - 1, k, false)).collect();
    if options.check_span && slices.len() > 2 {
        jobs.push((0, slices.len() - 1, true));
    }
    let results = jobs
        .par_iter()
        .map(|&(a, b, span)| pair_report(slices, a, b, eta, span))
        .collect::<Result<Vec<_>, _>>()?;
    let (pairs, certificates) = results.into_iter().unzip();
    let report = CertificationReport {
        options: *options,
        eta,
        block,
        atom_spacing,
        atoms_per_slice: slices.iter().map(|s| s.len()).collect(),
        discarded_mass,
        pairs,
    };
    Ok(Certification {
        evolution,
        certificates,
        report,
    })
}

/// Converts snapshot supports to measures on a common lattice and certifies them.
pub fn certify_supports(supports: &[SupportCells], options: &CertifyOptions) -> Result<Certification, WaveError> {
    let (measures, block) = supports_to_measures(supports, options.max_atoms)?;
    let spacing = supports.first().map_or(0.0, |s| s.axis.spacing) * block as f64;
    let discarded = supports.iter().map(|s| s.discarded).collect();
    certify_measures(measures, options, spacing, block, discarded)
}

pub fn certify_causal_evolution(snaps: &[DensitySnapshot], options: &CertifyOptions) -> Result<Certification, WaveError> {
    if snaps.windows(2).any(|w| w[1].time < w[0].time) {
        return Err(WaveError::InvalidState("snapshots must be time-ordered".into()));
    }
    let supports = snaps
        .iter()
        .map(|s| support_cells(s, options.eps_support))
        .collect::<Result<Vec<_>, _>>()?;
    certify_supports(&supports, options)
}
