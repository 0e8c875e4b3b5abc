use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64 as C;
use serde::Serialize;

use super::certify::{certify_supports, support_cells, Certification, CertifyOptions, SupportCells};
use super::continuity::continuity_residual;
use super::density::{assemble_density, DensitySnapshot};
use super::grid::GridSpec;
use super::mode::{PacketSpec, Propagator, SingleParticleMode};
use super::state::{marginal_density, FactorizedWaveState};
use super::{Species, WaveError};

/// Mass allowed within two fine cells of the box faces before a run is flagged
/// as possibly wrapping around the periodic boundary.
pub const WRAP_MASS_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub species: Species,
    pub particles: usize,
    pub grid: GridSpec,
    pub c: f64,
    pub dt: f64,
    pub steps: usize,
    pub coarsen: usize,
    pub modes: Vec<PacketSpec>,
    /// Raw coefficient tensor over the modes; projected onto the symmetric or
    /// antisymmetric subspace and normalized before the run.
    pub coeffs: Vec<C>,
    pub certify: Option<CertifyOptions>,
}

fn polarization(v: &[C]) -> Vec<[f64; 2]> {
    v.iter().map(|z| [z.re, z.im]).collect()
}

impl SimulationConfig {
    /// Two particles in two distinct Gaussian modes on a 16³ grid of side 16.
    ///
    /// Photons are circularly polarized packets with carrier along `+z`, so they
    /// travel at nearly `c` towards the box centre; fermions (mass 1) start at
    /// rest with opposite spins.
    pub fn default_for(species: Species) -> Self {
        let o = C::default();
        let r = C::new(FRAC_1_SQRT_2, 0.0);
        let i = C::new(0.0, FRAC_1_SQRT_2);
        let modes = match species {
            Species::Photon => [-1.5, 1.5]
                .iter()
                .map(|&x| PacketSpec {
                    center: [x, 0.0, -1.0],
                    sigma: 0.9,
                    polarization: polarization(&[r, i, o, o, o, o]),
                    carrier: [0.0, 0.0, 1.5],
                })
                .collect(),
            Species::Fermion { .. } => vec![
                PacketSpec {
                    center: [-1.5, 0.0, 0.0],
                    sigma: 0.9,
                    polarization: polarization(&[r, o, r, o]),
                    carrier: [0.0; 3],
                },
                PacketSpec {
                    center: [1.5, 0.0, 0.0],
                    sigma: 0.9,
                    polarization: polarization(&[o, r, o, r]),
                    carrier: [0.0; 3],
                },
            ],
        };
        let one = C::new(1.0, 0.0);
        SimulationConfig {
            species,
            particles: 2,
            grid: GridSpec { m: 16, length: 16.0 },
            c: 1.0,
            dt: 0.05,
            steps: 40,
            coarsen: 2,
            modes,
            coeffs: vec![o, one, o, o],
            certify: Some(CertifyOptions::default()),
        }
    }

    pub fn initial_state(&self) -> Result<FactorizedWaveState, WaveError> {
        GridSpec::new(self.grid.m, self.grid.length)?;
        let modes = self
            .modes
            .iter()
            .map(|spec| SingleParticleMode::gaussian(self.species, self.grid, spec))
            .collect::<Result<Vec<_>, _>>()?;
        FactorizedWaveState::projected(self.species, self.particles, modes, self.coeffs.clone(), 0.0)
    }
}

/// Per-snapshot health of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    /// `∫Ψ†Ψ` from the mode Gram matrix.
    pub norm: f64,
    /// Largest change of a mode norm since the start.
    pub mode_norm_drift: f64,
    /// Mass of the sampled joint density.
    pub sampled_mass: f64,
    pub max_speed: f64,
    /// Relative change of the density under exchange of the first two particles.
    pub exchange_asymmetry: f64,
    /// Largest one-particle mass fraction near the box faces.
    pub boundary_mass: f64,
    /// Continuity residual against the previous snapshot.
    pub continuity_residual: Option<f64>,
    /// Escaped mass of the pair ending at this snapshot.
    pub escaped_mass: Option<f64>,
}

impl StepRecord {
    pub const CSV_HEADER: &'static str =
        "step,time,norm,mode_norm_drift,sampled_mass,max_speed,exchange_asymmetry,boundary_mass,continuity_residual,escaped_mass";

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        format!(
            "{},{},{:e},{:e},{:e},{:e},{:e},{:e},{},{}",
            self.step,
            self.time,
            self.norm,
            self.mode_norm_drift,
            self.sampled_mass,
            self.max_speed,
            self.exchange_asymmetry,
            self.boundary_mass,
            opt(self.continuity_residual),
            opt(self.escaped_mass)
        )
    }
}

#[derive(Debug, Clone)]
pub struct SimulationRun {
    pub records: Vec<StepRecord>,
    pub certification: Option<Certification>,
    pub wrap_flagged: bool,
    pub final_state: FactorizedWaveState,
}

impl SimulationRun {
    pub fn max_speed(&self) -> f64 {
        self.records.iter().map(|r| r.max_speed).fold(0.0, f64::max)
    }

    pub fn max_norm_drift(&self) -> f64 {
        self.records.iter().map(|r| (r.norm - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn boundary_fraction(rho: &[f64], grid: &GridSpec, width: f64) -> f64 {
    let half = 0.5 * grid.length;
    let near: Vec<bool> = (0..grid.m)
        .map(|i| {
            let x = grid.coordinate(i);
            (x + half).min(half - x) <= width + 1e-12 * half
        })
        .collect();
    let total: f64 = rho.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let edge: f64 = rho
        .iter()
        .enumerate()
        .filter(|(p, _)| grid.split(*p).iter().any(|&i| near[i]))
        .map(|(_, v)| v)
        .sum();
    edge / total
}

fn exchange_asymmetry(snap: &DensitySnapshot) -> f64 {
    if snap.particles < 2 {
        return 0.0;
    }
    let max = snap.density.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    snap.swapped_density(0, 1)
        .iter()
        .zip(&snap.density)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        / max
}

/// Evolves the configured state, assembling a density snapshot after every
/// step. Each snapshot is handed to `sink` and then dropped; only the
/// thresholded supports are kept for certification.
pub fn run_simulation(
    config: &SimulationConfig,
    sink: &mut dyn FnMut(&DensitySnapshot) -> std::io::Result<()>,
) -> Result<SimulationRun, WaveError> {
    if !(config.dt > 0.0 && config.dt.is_finite()) {
        return Err(WaveError::InvalidState(format!("time step must be positive, got {}", config.dt)));
    }
    let mut state = config.initial_state()?;
    let initial_norms: Vec<f64> = state.modes.iter().map(|m| m.norm()).collect();
    let propagator = Propagator::new(config.species, config.grid, config.c, config.dt)?;
    let wrap_width = 2.0 * config.grid.spacing();
    let mut records = Vec::with_capacity(config.steps + 1);
    let mut supports: Vec<SupportCells> = Vec::new();
    let mut previous: Option<DensitySnapshot> = None;
    for step in 0..=config.steps {
        if step > 0 {
            state = state.evolve(&propagator)?;
            state.time = step as f64 * config.dt;
        }
        let snap = assemble_density(&state, config.coarsen, config.c)?;
        sink(&snap).map_err(|e| WaveError::Io(e.to_string()))?;
        let boundary = (0..state.particles)
            .map(|j| boundary_fraction(&marginal_density(&state, j), &config.grid, wrap_width))
            .fold(0.0, f64::max);
        let drift = state
            .modes
            .iter()
            .zip(&initial_norms)
            .map(|(m, n0)| (m.norm() - n0).abs())
            .fold(0.0, f64::max);
        let residual = previous.as_ref().map(|p| continuity_residual(p, &snap)).transpose()?;
        if let Some(opts) = &config.certify {
            supports.push(support_cells(&snap, opts.eps_support)?);
        }
        records.push(StepRecord {
            step,
            time: state.time,
            norm: state.norm_sqr(),
            mode_norm_drift: drift,
            sampled_mass: snap.mass(),
            max_speed: snap.max_speed(),
            exchange_asymmetry: exchange_asymmetry(&snap),
            boundary_mass: boundary,
            continuity_residual: residual,
            escaped_mass: None,
        });
        previous = Some(snap);
    }
    let certification = match &config.certify {
        Some(opts) => {
            let mut opts = *opts;
            opts.dt_step.get_or_insert(config.dt);
            let cert = certify_supports(&supports, &opts)?;
            for pair in cert.report.pairs.iter().filter(|p| !p.span) {
                records[pair.to].escaped_mass = Some(pair.escaped_mass);
            }
            Some(cert)
        }
        None => None,
    };
    let wrap_flagged = records.iter().any(|r| r.boundary_mass > WRAP_MASS_LIMIT);
    Ok(SimulationRun {
        records,
        certification,
        wrap_flagged,
        final_state: state,
    })
}
