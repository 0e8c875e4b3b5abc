//! JSON file formats for measures, evolutions, couplings, violators and
//! trajectory measures, plus the binary density snapshot layout.

use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curves::{CurveError, Trajectory, TrajectoryMeasure};
use crate::mass::{parse_rational, rational_from_f64, Mass, Rational};
use crate::measure::{Evolution, MeasureError, SliceMeasure};
use crate::order::{Coupling, Violator};
use crate::spacetime::ModelParams;
use crate::wave::{DensitySnapshot, PacketSpec};

/// Allowed deviation of loaded weights from unit total mass.
pub const LOAD_MASS_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("cannot parse {what}: {source}")]
    Json {
        what: &'static str,
        #[source]
        source: serde_json::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("weights sum to {0}, expected 1 within 1e-9")]
    Mass(f64),
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A weight given either as a JSON number or as text (`"3/8"`, `"0.125"`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeightRepr {
    Number(f64),
    Text(String),
}

/// Conversion between in-memory weights and their file representation.
pub trait FileWeight: Mass {
    fn to_repr(&self) -> WeightRepr;
    fn from_repr(repr: &WeightRepr) -> Result<Self, FormatError>;
}

impl FileWeight for f64 {
    fn to_repr(&self) -> WeightRepr {
        WeightRepr::Number(*self)
    }

    fn from_repr(repr: &WeightRepr) -> Result<Self, FormatError> {
        match repr {
            WeightRepr::Number(v) => Ok(*v),
            WeightRepr::Text(s) => parse_rational(s)
                .map(|r| r.to_f64())
                .ok_or_else(|| FormatError::Invalid(format!("bad weight {s:?}"))),
        }
    }
}

impl FileWeight for Rational {
    fn to_repr(&self) -> WeightRepr {
        WeightRepr::Text(self.to_string())
    }

    fn from_repr(repr: &WeightRepr) -> Result<Self, FormatError> {
        match repr {
            WeightRepr::Number(v) => {
                rational_from_f64(*v).ok_or_else(|| FormatError::Invalid(format!("weight {v} is not a finite number")))
            }
            WeightRepr::Text(s) => parse_rational(s).ok_or_else(|| FormatError::Invalid(format!("bad weight {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub c: f64,
    pub n: usize,
    #[serde(rename = "N")]
    pub particles: usize,
}

impl From<&ModelParams> for ParamsFile {
    fn from(p: &ModelParams) -> Self {
        ParamsFile {
            c: p.c,
            n: p.n,
            particles: p.particles,
        }
    }
}

impl ParamsFile {
    pub fn to_params(self) -> Result<ModelParams, FormatError> {
        ModelParams::new(self.c, self.n, self.particles).map_err(|e| FormatError::Measure(e.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomFile {
    /// One position per particle.
    pub x: Vec<Vec<f64>>,
    pub w: WeightRepr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFile {
    pub t: f64,
    pub atoms: Vec<AtomFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureFile {
    pub params: ParamsFile,
    pub t: f64,
    pub atoms: Vec<AtomFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionFile {
    pub params: ParamsFile,
    pub slices: Vec<SliceFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub i: usize,
    pub j: usize,
    pub w: WeightRepr,
}

/// A causal coupling: both measures plus the transport entries between their atoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingFile {
    pub params: ParamsFile,
    pub mu: SliceFile,
    pub nu: SliceFile,
    pub pairs: Vec<PairFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolatorDetail {
    /// Indices into `mu.atoms`.
    pub atoms: Vec<usize>,
    pub positions: Vec<Vec<Vec<f64>>>,
    pub mu_mass: WeightRepr,
    pub nu_future_mass: WeightRepr,
}

/// A set `S` of μ-atoms with `μ(S) > ν(J⁺(S))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolatorFile {
    pub params: ParamsFile,
    pub mu: SliceFile,
    pub nu: SliceFile,
    pub violator: ViolatorDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFile {
    pub w: WeightRepr,
    /// Per grid time, one position per particle.
    pub xs: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvesFile {
    pub params: ParamsFile,
    pub grid: Vec<f64>,
    pub trajectories: Vec<TrajectoryFile>,
    #[serde(default)]
    pub pruned_mass: f64,
}

fn split_position(params: &ModelParams, x: &[f64]) -> Vec<Vec<f64>> {
    x.chunks(params.n).map(|c| c.to_vec()).collect()
}

fn join_position(params: &ModelParams, x: &[Vec<f64>]) -> Result<Vec<f64>, FormatError> {
    if x.len() != params.particles || x.iter().any(|p| p.len() != params.n) {
        return Err(FormatError::Invalid(format!(
            "each position needs {} particles with {} coordinates",
            params.particles, params.n
        )));
    }
    Ok(x.concat())
}

pub fn slice_to_file<W: FileWeight>(mu: &SliceMeasure<W>) -> SliceFile {
    SliceFile {
        t: mu.t(),
        atoms: mu
            .atoms()
            .iter()
            .map(|a| AtomFile {
                x: split_position(mu.params(), &a.x),
                w: a.w.to_repr(),
            })
            .collect(),
    }
}

/// Checks the loaded total against 1 within [`LOAD_MASS_TOL`], then divides
/// by the total (exactly, in rational mode).
pub fn slice_from_file<W: FileWeight>(params: &ModelParams, slice: &SliceFile) -> Result<SliceMeasure<W>, FormatError> {
    let atoms = slice
        .atoms
        .iter()
        .map(|a| Ok((join_position(params, &a.x)?, W::from_repr(&a.w)?)))
        .collect::<Result<Vec<_>, FormatError>>()?;
    let total = atoms.iter().fold(W::zero(), |acc, (_, w)| acc + w.clone());
    let t = total.to_f64();
    if !((t - 1.0).abs() <= LOAD_MASS_TOL) {
        return Err(FormatError::Mass(t));
    }
    let atoms = atoms.into_iter().map(|(x, w)| (x, w / total.clone())).collect();
    Ok(SliceMeasure::new(*params, slice.t, atoms)?)
}

pub fn measure_to_file<W: FileWeight>(mu: &SliceMeasure<W>) -> MeasureFile {
    let s = slice_to_file(mu);
    MeasureFile {
        params: mu.params().into(),
        t: s.t,
        atoms: s.atoms,
    }
}

fn parse<T: serde::de::DeserializeOwned>(text: &str, what: &'static str) -> Result<T, FormatError> {
    serde_json::from_str(text).map_err(|source| FormatError::Json { what, source })
}

pub fn parse_measure<W: FileWeight>(text: &str) -> Result<SliceMeasure<W>, FormatError> {
    let file: MeasureFile = parse(text, "measure")?;
    let params = file.params.to_params()?;
    slice_from_file(
        &params,
        &SliceFile {
            t: file.t,
            atoms: file.atoms,
        },
    )
}

pub fn evolution_to_file<W: FileWeight>(evo: &Evolution<W>) -> EvolutionFile {
    EvolutionFile {
        params: evo.params().into(),
        slices: evo.slices().iter().map(slice_to_file).collect(),
    }
}

pub fn parse_evolution<W: FileWeight>(text: &str) -> Result<Evolution<W>, FormatError> {
    let file: EvolutionFile = parse(text, "evolution")?;
    let params = file.params.to_params()?;
    let slices = file
        .slices
        .iter()
        .map(|s| slice_from_file(&params, s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Evolution::new(slices)?)
}

pub fn coupling_to_file<W: FileWeight>(mu: &SliceMeasure<W>, nu: &SliceMeasure<W>, plan: &Coupling<W>) -> CouplingFile {
    CouplingFile {
        params: mu.params().into(),
        mu: slice_to_file(mu),
        nu: slice_to_file(nu),
        pairs: plan
            .entries
            .iter()
            .map(|e| PairFile {
                i: e.i,
                j: e.j,
                w: e.w.to_repr(),
            })
            .collect(),
    }
}

/// Reads a coupling file back into its two measures and the plan.
pub fn parse_coupling<W: FileWeight>(
    text: &str,
) -> Result<(SliceMeasure<W>, SliceMeasure<W>, Coupling<W>), FormatError> {
    let file: CouplingFile = parse(text, "coupling")?;
    let params = file.params.to_params()?;
    let mu = slice_from_file::<W>(&params, &file.mu)?;
    let nu = slice_from_file::<W>(&params, &file.nu)?;
    let entries = file
        .pairs
        .iter()
        .map(|p| {
            if p.i >= mu.len() || p.j >= nu.len() {
                return Err(FormatError::Invalid(format!("pair ({}, {}) is out of range", p.i, p.j)));
            }
            Ok(crate::order::CouplingEntry {
                i: p.i,
                j: p.j,
                w: W::from_repr(&p.w)?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let plan = Coupling {
        rows: mu.len(),
        cols: nu.len(),
        entries,
    };
    Ok((mu, nu, plan))
}

pub fn violator_to_file<W: FileWeight>(mu: &SliceMeasure<W>, nu: &SliceMeasure<W>, v: &Violator<W>) -> ViolatorFile {
    ViolatorFile {
        params: mu.params().into(),
        mu: slice_to_file(mu),
        nu: slice_to_file(nu),
        violator: ViolatorDetail {
            atoms: v.atoms.clone(),
            positions: v
                .atoms
                .iter()
                .map(|&i| split_position(mu.params(), &mu.atoms()[i].x))
                .collect(),
            mu_mass: v.mu_mass.to_repr(),
            nu_future_mass: v.nu_future_mass.to_repr(),
        },
    }
}

pub fn curves_to_file<W: FileWeight>(sigma: &TrajectoryMeasure<W>) -> CurvesFile {
    let params = sigma.params();
    CurvesFile {
        params: params.into(),
        grid: sigma.grid().to_vec(),
        trajectories: sigma
            .paths()
            .iter()
            .map(|(tr, w)| TrajectoryFile {
                w: w.to_repr(),
                xs: tr.positions.iter().map(|x| split_position(params, x)).collect(),
            })
            .collect(),
        pruned_mass: sigma.pruned_mass(),
    }
}

pub fn parse_curves<W: FileWeight>(text: &str) -> Result<TrajectoryMeasure<W>, FormatError> {
    let file: CurvesFile = parse(text, "trajectory measure")?;
    let params = file.params.to_params()?;
    let paths = file
        .trajectories
        .iter()
        .map(|tr| {
            let positions = tr
                .xs
                .iter()
                .map(|x| join_position(&params, x))
                .collect::<Result<Vec<_>, _>>()?;
            Ok((Trajectory { positions }, W::from_repr(&tr.w)?))
        })
        .collect::<Result<Vec<_>, FormatError>>()?;
    Ok(TrajectoryMeasure::new(params, file.grid, paths)?)
}

/// Mode list for the wave simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModesFile {
    pub modes: Vec<PacketSpec>,
}

pub fn parse_modes(text: &str) -> Result<Vec<PacketSpec>, FormatError> {
    let file: ModesFile = parse(text, "mode list")?;
    Ok(file.modes)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    /// Mode index for each particle.
    pub index: Vec<usize>,
    /// `[re, im]`.
    pub value: [f64; 2],
}

/// Sparse coefficient tensor over mode multi-indices; unlisted entries are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    pub particles: usize,
    pub modes: usize,
    pub entries: Vec<TensorEntry>,
}

impl TensorFile {
    /// Dense row-major tensor of `modes^particles` entries.
    pub fn to_dense(&self) -> Result<Vec<Complex64>, FormatError> {
        let size = self
            .modes
            .checked_pow(self.particles as u32)
            .filter(|&s| s > 0 && s <= 1 << 24)
            .ok_or_else(|| FormatError::Invalid("coefficient tensor is empty or too large".into()))?;
        let mut dense = vec![Complex64::default(); size];
        for e in &self.entries {
            if e.index.len() != self.particles || e.index.iter().any(|&a| a >= self.modes) {
                return Err(FormatError::Invalid(format!("tensor index {:?} is out of range", e.index)));
            }
            let flat = e.index.iter().fold(0, |acc, &a| acc * self.modes + a);
            dense[flat] += Complex64::new(e.value[0], e.value[1]);
        }
        Ok(dense)
    }
}

pub fn parse_tensor(text: &str) -> Result<TensorFile, FormatError> {
    parse(text, "coefficient tensor")
}

/// Header written next to each binary density snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityHeader {
    /// Points along each of the `3N` joint axes, slowest first.
    pub dims: Vec<usize>,
    pub dtype: String,
    pub time: f64,
    pub spacing: f64,
    pub origin: f64,
    pub particles: usize,
    pub c: f64,
    pub density_file: String,
    /// `3N` velocity components per cell, interleaved after the cell index.
    pub velocity_file: String,
}

fn write_f64s(path: &Path, values: &[f64]) -> Result<(), FormatError> {
    let io = |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for v in values {
        out.write_all(&v.to_le_bytes()).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes `density_<step>.bin`, `velocity_<step>.bin` and `density_<step>.json`.
pub fn write_density(dir: &Path, step: usize, snap: &DensitySnapshot) -> Result<DensityHeader, FormatError> {
    let density_file = format!("density_{step:05}.bin");
    let velocity_file = format!("velocity_{step:05}.bin");
    write_f64s(&dir.join(&density_file), &snap.density)?;
    write_f64s(&dir.join(&velocity_file), &snap.velocity)?;
    let header = DensityHeader {
        dims: vec![snap.axis.points; snap.dims()],
        dtype: "f64-le".into(),
        time: snap.time,
        spacing: snap.axis.spacing,
        origin: snap.axis.origin,
        particles: snap.particles,
        c: snap.c,
        density_file,
        velocity_file,
    };
    let path = dir.join(format!("density_{step:05}.json"));
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    std::fs::write(&path, text).map_err(|source| FormatError::Io { path, source })?;
    Ok(header)
}

/// Reads a snapshot back from its header path.
pub fn read_density(header_path: &Path) -> Result<DensitySnapshot, FormatError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| FormatError::Io { path, source }
    };
    let text = std::fs::read_to_string(header_path).map_err(io(header_path))?;
    let header: DensityHeader = parse(&text, "density header")?;
    if header.dtype != "f64-le" {
        return Err(FormatError::Invalid(format!("unsupported dtype {}", header.dtype)));
    }
    let dir = header_path.parent().unwrap_or(Path::new("."));
    let read = |name: &str| -> Result<Vec<f64>, FormatError> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(io(&path))?;
        if bytes.len() % 8 != 0 {
            return Err(FormatError::Invalid(format!("{} is not a whole number of f64 values", path.display())));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect())
    };
    let points = header.dims.first().copied().unwrap_or(0);
    if header.dims.len() != 3 * header.particles || header.dims.iter().any(|&d| d != points) {
        return Err(FormatError::Invalid("density dims must be 3N equal axes".into()));
    }
    let axis = crate::wave::JointAxis {
        points,
        spacing: header.spacing,
        origin: header.origin,
    };
    DensitySnapshot::from_fields(
        header.time,
        header.particles,
        axis,
        header.c,
        read(&header.density_file)?,
        read(&header.velocity_file)?,
    )
    .map_err(|e| FormatError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BLOCKED: &str = r#"{"params": {"c": 1, "n": 1, "N": 1}, "t": 1,
        "atoms": [{"x": [[0.5]], "w": "1/4"}, {"x": [[-1]], "w": 0.75}]}"#;

    #[test]
    fn measure_round_trip() {
        let mu: SliceMeasure<f64> = parse_measure(BLOCKED).unwrap();
        assert_eq!(mu.len(), 2);
        let text = serde_json::to_string(&measure_to_file(&mu)).unwrap();
        let back: SliceMeasure<f64> = parse_measure(&text).unwrap();
        assert_eq!(back, mu);
        let exact: SliceMeasure<Rational> = parse_measure(BLOCKED).unwrap();
        assert_eq!(exact.atoms()[1].w, Rational::from_ratio(1, 4));
        let text = serde_json::to_string(&measure_to_file(&exact)).unwrap();
        assert!(text.contains("\"1/4\""));
    }

    #[test]
    fn rejects_unnormalized_and_malformed() {
        let bad = BLOCKED.replace("0.75", "0.7");
        assert!(matches!(parse_measure::<f64>(&bad), Err(FormatError::Mass(_))));
        let bad = BLOCKED.replace("[[0.5]]", "[[0.5, 1.0]]");
        assert!(matches!(parse_measure::<f64>(&bad), Err(FormatError::Invalid(_))));
        assert!(matches!(parse_measure::<f64>("{"), Err(FormatError::Json { .. })));
    }

    #[test]
    fn tensor_to_dense() {
        let t = TensorFile {
            particles: 2,
            modes: 2,
            entries: vec![TensorEntry {
                index: vec![1, 0],
                value: [0.5, -1.0],
            }],
        };
        let d = t.to_dense().unwrap();
        assert_eq!(d[2], Complex64::new(0.5, -1.0));
    }
}
