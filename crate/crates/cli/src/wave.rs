use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use multicausal::format::{parse_modes, parse_tensor, read_density, write_density};
use multicausal::wave::{
    certify_supports, run_simulation, support_cells, CertifyOptions, Complex64, GridSpec, SimulationConfig, Species,
    StepRecord, WaveError,
};
use multicausal::validation::WAVE_STATEMENT;
use serde_json::json;

use crate::config::pick;
use crate::report::{check, read_input, CliError, Report, EXIT_NO, EXIT_YES};
use crate::{CertifyArgs, Context};

pub const SUBLUMINAL: &str = "the multi-velocity field satisfies |v^j| <= c for every particle j";
pub const UNITARY: &str = "the free multi-particle evolution preserves the norm";

/// Relative margin on `c` for the speed check.
const SPEED_MARGIN: f64 = 1e-9;

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
pub enum SpeciesArg {
    Photon,
    Fermion,
}

#[derive(Args, Debug)]
pub struct EvolveArgs {
    #[arg(long, value_enum)]
    species: Option<SpeciesArg>,
    /// Fermion mass.
    #[arg(long)]
    mass: Option<f64>,
    #[arg(long)]
    n_particles: Option<usize>,
    /// Grid points per axis (power of two).
    #[arg(long)]
    grid: Option<usize>,
    /// Side length of the periodic box.
    #[arg(long = "box")]
    box_length: Option<f64>,
    #[arg(long)]
    c: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Keep every k-th grid point per axis in the joint density.
    #[arg(long)]
    coarsen: Option<usize>,
    /// JSON list of single-particle wave packets.
    #[arg(long)]
    modes: Option<PathBuf>,
    /// JSON coefficient tensor over the modes.
    #[arg(long)]
    coeffs: Option<PathBuf>,
    /// Directory for binary density snapshots and the time series.
    #[arg(long)]
    emit_density: Option<PathBuf>,
    /// Time series table (defaults to `timeseries.csv` in the density directory).
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Certify the density evolution as causal.
    #[arg(long)]
    certify: bool,
    #[arg(long)]
    eps_support: Option<f64>,
    /// Multiplier of `atom spacing + c·dt` in the tolerant light cone.
    #[arg(long)]
    slack: Option<f64>,
    #[arg(long)]
    max_atoms: Option<usize>,
}

pub fn wave_error(e: WaveError) -> CliError {
    match e {
        WaveError::Budget { .. } => CliError::Resource(e.to_string()),
        WaveError::Io(_) => CliError::Failed(e.to_string()),
        _ => CliError::Invalid(e.to_string()),
    }
}

fn certify_options(
    ctx: &Context,
    eps_support: Option<f64>,
    slack: Option<f64>,
    max_atoms: Option<usize>,
) -> Result<CertifyOptions, CliError> {
    let d = CertifyOptions::default();
    let opts = CertifyOptions {
        eps_support: pick(eps_support, ctx.file.eps_support, d.eps_support),
        slack: pick(slack, ctx.file.slack, d.slack),
        max_atoms: pick(max_atoms, ctx.file.max_atoms, d.max_atoms),
        ..d
    };
    if !(0.0..1.0).contains(&opts.eps_support) || !(opts.slack >= 0.0 && opts.slack.is_finite()) || opts.max_atoms == 0 {
        return Err(CliError::Invalid(format!(
            "need 0 <= eps-support < 1, finite slack >= 0 and max-atoms > 0, got {}, {}, {}",
            opts.eps_support, opts.slack, opts.max_atoms
        )));
    }
    Ok(opts)
}

/// Unit coefficient on the multi-index `(0, 1, …, N-1)` taken modulo the mode count.
fn default_coeffs(modes: usize, particles: usize) -> Vec<Complex64> {
    let size = modes.pow(particles as u32);
    let flat = (0..particles).fold(0, |acc, j| acc * modes + j % modes);
    let mut out = vec![Complex64::default(); size];
    out[flat] = Complex64::new(1.0, 0.0);
    out
}

fn build_config(ctx: &Context, args: &EvolveArgs) -> Result<SimulationConfig, CliError> {
    let f = &ctx.file;
    let species_name = match (args.species, &f.species) {
        (Some(s), _) => s,
        (None, Some(name)) => SpeciesArg::from_str(name, true)
            .map_err(|_| CliError::Invalid(format!("unknown species {name:?}")))?,
        (None, None) => SpeciesArg::Photon,
    };
    let species = match species_name {
        SpeciesArg::Photon => Species::Photon,
        SpeciesArg::Fermion => {
            let mass = pick(args.mass, f.mass, 1.0);
            if !(mass >= 0.0 && mass.is_finite()) {
                return Err(CliError::Invalid(format!("mass must be finite and nonnegative, got {mass}")));
            }
            Species::Fermion { mass }
        }
    };
    let mut config = SimulationConfig::default_for(species);
    config.particles = pick(args.n_particles, f.n_particles, config.particles);
    if config.particles == 0 {
        return Err(CliError::Invalid("need at least one particle".into()));
    }
    config.grid = GridSpec::new(
        pick(args.grid, f.grid, config.grid.m),
        pick(args.box_length, f.box_length, config.grid.length),
    )
    .map_err(wave_error)?;
    config.c = pick(args.c, f.c, config.c);
    if !(config.c > 0.0 && config.c.is_finite()) {
        return Err(CliError::Invalid(format!("c must be positive, got {}", config.c)));
    }
    config.dt = pick(args.dt, f.dt, config.dt);
    config.steps = pick(args.steps, f.steps, config.steps);
    config.coarsen = pick(args.coarsen, f.coarsen, config.coarsen);
    if config.coarsen == 0 {
        return Err(CliError::Invalid("coarsen must be at least 1".into()));
    }
    if let Some(path) = args.modes.as_ref().or(f.modes.as_ref()) {
        config.modes = parse_modes(&read_input(path)?)?;
    }
    config.coeffs = match args.coeffs.as_ref().or(f.coeffs.as_ref()) {
        Some(path) => {
            let tensor = parse_tensor(&read_input(path)?)?;
            if tensor.particles != config.particles || tensor.modes != config.modes.len() {
                return Err(CliError::Invalid(format!(
                    "coefficient tensor is {} particles over {} modes, run has {} particles and {} modes",
                    tensor.particles,
                    tensor.modes,
                    config.particles,
                    config.modes.len()
                )));
            }
            tensor.to_dense()?
        }
        None if config.modes.is_empty() => return Err(CliError::Invalid("mode list is empty".into())),
        None => default_coeffs(config.modes.len(), config.particles),
    };
    config.certify = if args.certify || f.certify.unwrap_or(false) {
        Some(certify_options(ctx, args.eps_support, args.slack, args.max_atoms)?)
    } else {
        None
    };
    Ok(config)
}

fn write_csv(path: &Path, records: &[StepRecord]) -> Result<(), CliError> {
    let mut text = String::from(StepRecord::CSV_HEADER);
    text.push('\n');
    for r in records {
        text.push_str(&r.csv_row());
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| CliError::Failed(format!("cannot write {}: {e}", path.display())))
}

pub fn evolve(ctx: &Context, args: EvolveArgs) -> Result<u8, CliError> {
    let mut report = Report::new("evolve");
    let config = build_config(ctx, &args)?;
    let density_dir = args.emit_density.clone().or_else(|| ctx.file.emit_density.clone());
    if let Some(dir) = &density_dir {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Failed(format!("cannot create {}: {e}", dir.display())))?;
    }
    let mut written = 0usize;
    let mut sink = |snap: &multicausal::wave::DensitySnapshot| -> std::io::Result<()> {
        if let Some(dir) = &density_dir {
            write_density(dir, written, snap).map_err(std::io::Error::other)?;
        }
        written += 1;
        Ok(())
    };
    let run = run_simulation(&config, &mut sink).map_err(wave_error)?;
    let csv = args
        .csv
        .clone()
        .or_else(|| ctx.file.csv.clone())
        .or_else(|| density_dir.as_ref().map(|d| d.join("timeseries.csv")));
    if let Some(path) = &csv {
        write_csv(path, &run.records)?;
    }

    let max_speed = run.max_speed();
    let subluminal = max_speed <= config.c * (1.0 + SPEED_MARGIN);
    let drift = run.max_norm_drift();
    let residual = run
        .records
        .iter()
        .filter_map(|r| r.continuity_residual)
        .fold(0.0, f64::max);
    let boundary = run.records.iter().map(|r| r.boundary_mass).fold(0.0, f64::max);
    report.set(
        "config",
        json!({
            "species": config.species.name(),
            "mass": match config.species { Species::Fermion { mass } => Some(mass), Species::Photon => None },
            "particles": config.particles,
            "grid": config.grid.m,
            "box": config.grid.length,
            "c": config.c,
            "dt": config.dt,
            "steps": config.steps,
            "coarsen": config.coarsen,
            "modes": config.modes,
        }),
    );
    report.set("max_speed", max_speed);
    report.set("max_norm_drift", drift);
    // discretization-limited on the coarsened grid, so reported rather than judged
    report.set("max_continuity_residual", residual);
    report.set("max_boundary_mass", boundary);
    report.set("wrap_flagged", run.wrap_flagged);
    report.set("density_dir", &density_dir);
    report.set("snapshots_written", density_dir.as_ref().map(|_| written));
    report.set("csv", &csv);
    let mut checks = vec![
        check(SUBLUMINAL, subluminal, json!({ "max_speed": max_speed, "c": config.c })),
        check(UNITARY, drift <= 1e-10, json!({ "max_norm_drift": drift })),
    ];
    if run.wrap_flagged {
        eprintln!("warning: mass near the box faces reached {boundary:.3e}; periodic images may affect the run");
    }
    let mut code = EXIT_YES;
    if let Some(cert) = &run.certification {
        let r = &cert.report;
        let holds = r.all_hold();
        checks.push(check(
            WAVE_STATEMENT,
            holds,
            json!({ "consecutive_hold": r.consecutive_hold(), "max_escaped_mass": r.max_escaped_mass() }),
        ));
        report.set("certification", r);
        report.set("verdict", if holds { "yes" } else { "no" });
        if !holds {
            code = EXIT_NO;
        }
    }
    report.set("checks", checks);
    report.emit(ctx)?;
    Ok(code)
}

fn snapshot_headers(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Invalid(format!("cannot list {}: {e}", dir.display())))?;
    let mut headers: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("density_") && n.ends_with(".json"))
        })
        .collect();
    headers.sort();
    if headers.len() < 2 {
        return Err(CliError::Invalid(format!("{} holds fewer than two density snapshots", dir.display())));
    }
    Ok(headers)
}

pub fn certify_density(ctx: &Context, args: &CertifyArgs) -> Result<u8, CliError> {
    let mut report = Report::new("certify");
    let dir = args.density.clone().expect("checked by the caller");
    let mut opts = certify_options(ctx, args.eps_support, args.slack, args.max_atoms)?;
    opts.dt_step = args.dt_step;
    let mut supports = Vec::new();
    let mut max_speed: f64 = 0.0;
    let mut c = 0.0;
    for header in snapshot_headers(&dir)? {
        let snap = read_density(&header)?;
        max_speed = max_speed.max(snap.max_speed());
        c = snap.c;
        supports.push(support_cells(&snap, opts.eps_support).map_err(wave_error)?);
    }
    let cert = certify_supports(&supports, &opts).map_err(wave_error)?;
    let r = &cert.report;
    let holds = r.all_hold();
    report.set("input", &dir);
    report.set("snapshots", supports.len());
    report.set("max_speed", max_speed);
    report.set("certification", r);
    report.set("verdict", if holds { "yes" } else { "no" });
    report.set(
        "checks",
        [
            check(SUBLUMINAL, max_speed <= c * (1.0 + SPEED_MARGIN), json!({ "max_speed": max_speed, "c": c })),
            check(
                WAVE_STATEMENT,
                holds,
                json!({ "consecutive_hold": r.consecutive_hold(), "max_escaped_mass": r.max_escaped_mass() }),
            ),
        ],
    );
    report.emit(ctx)?;
    Ok(if holds { EXIT_YES } else { EXIT_NO })
}
