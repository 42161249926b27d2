//! Run configuration, binary grid/tensor files, CSV output and the experiment runner.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forward_map::{self, add_complex_noise, add_noise, generate, ray_distances, sensitivity_curve, slope_through_origin, sparsity_pattern, ForwardOptions, NoiseMode, NoiseSpec};
use crate::grid::GridSpec;
use crate::helmholtz::{grid_for, beam_rhs, BeamSource, HelmholtzOp, PmlSpec, SolverOptions, WaveField, C64};
use crate::inversion::{fwi_baseline, reconstruct, FwiContext, InversionContext, InversionRun, LbfgsOptions};
use crate::liouville::{self, liouville_dataset, shell_velocity, TraceOptions};
use crate::measurement::MeasurementGrid;
use crate::medium::{BicubicField, MediumField};
use crate::phase_space::{husimi_grid, integrate_m_o, integrate_m_r};
use crate::xray::max_novikov_residual;

pub const REAL_MAGIC: &[u8; 4] = b"WPG1";
pub const COMPLEX_MAGIC: &[u8; 4] = b"WPC1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Experiment {
    Forward,
    Husimi,
    Rays,
    Dataset,
    Sensitivity,
    Sparsity,
    XrayResidual,
    Invert,
    FwiBaseline,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Forward,
        Experiment::Husimi,
        Experiment::Rays,
        Experiment::Dataset,
        Experiment::Sensitivity,
        Experiment::Sparsity,
        Experiment::XrayResidual,
        Experiment::Invert,
        Experiment::FwiBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Forward => "forward",
            Experiment::Husimi => "husimi",
            Experiment::Rays => "rays",
            Experiment::Dataset => "dataset",
            Experiment::Sensitivity => "sensitivity",
            Experiment::Sparsity => "sparsity",
            Experiment::XrayResidual => "xray_residual",
            Experiment::Invert => "invert",
            Experiment::FwiBaseline => "fwi_baseline",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MediumConfig {
    Constant,
    Bump { amplitude: f64, radius: f64 },
    Delocalized { seed: u64, correlation_length: f64, amplitude: f64, radius: f64 },
    SheppLogan { scale: f64, radius: f64 },
    /// Contrast samples from a rank-2 real grid file on `[-half_width, half_width]^2`.
    GridSampled { path: PathBuf, half_width: f64 },
}

impl MediumConfig {
    pub fn build(&self) -> Result<MediumField<f64>> {
        match self {
            MediumConfig::Constant => Ok(MediumField::constant()),
            MediumConfig::Bump { amplitude, radius } => MediumField::bump(*amplitude, *radius),
            MediumConfig::Delocalized { seed, correlation_length, amplitude, radius } => MediumField::delocalized(*seed, *correlation_length, *amplitude, *radius),
            MediumConfig::SheppLogan { scale, radius } => MediumField::shepp_logan(*scale, *radius),
            MediumConfig::GridSampled { path, half_width } => {
                let (dims, values) = read_grid(path)?;
                if dims.len() != 2 || dims[0] != dims[1] {
                    return Err(Error::Format(format!("medium grid must be square rank 2, found {dims:?}")));
                }
                MediumField::grid_sampled(BicubicField::new(GridSpec::new(*half_width, dims[0])?, values)?)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    /// Wavenumbers; single-k experiments use the first entry.
    pub k: Vec<f64>,
    pub sigma: f64,
    /// Right-hand sides per block solve.
    pub block: usize,
    /// Flat source index for `forward` and `husimi`.
    pub source: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HelmholtzConfig {
    pub pml_wavelengths: f64,
    pub log_reflection: f64,
    pub ppw_data: f64,
    pub ppw_inv: f64,
    /// Half-width of the physical square; absent means `R + 4/sqrt(k)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
}

impl HelmholtzConfig {
    pub fn solver(&self) -> SolverOptions {
        SolverOptions { pml: PmlSpec { wavelengths: self.pml_wavelengths, log_reflection: self.log_reflection }, ..SolverOptions::default() }
    }

    fn forward_options(&self, radius: f64, k: f64, ppw: f64, block: usize, threads: usize) -> ForwardOptions {
        ForwardOptions {
            half_width: self.half_width.unwrap_or(radius + 4.0 / k.sqrt()),
            ppw,
            solver: self.solver(),
            block,
            threads,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Relative receiver frame with uniform step `dtheta`.
    Uniform,
    /// Absolute frame with `n_pos` positions and `n_dir` directions.
    FullAperture,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementConfig {
    pub layout: Layout,
    pub radius: f64,
    pub dtheta: f64,
    pub n_pos: usize,
    pub n_dir: usize,
    /// Restricts the source positions; absent keeps the full set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_s: Option<Vec<f64>>,
}

impl MeasurementConfig {
    pub fn build(&self) -> Result<MeasurementGrid> {
        let g = match self.layout {
            Layout::Uniform => MeasurementGrid::uniform(self.radius, self.dtheta)?,
            Layout::FullAperture => MeasurementGrid::full_aperture(self.radius, self.n_pos, self.n_dir)?,
        };
        Ok(match &self.theta_s {
            Some(ts) if ts.is_empty() => return invalid("measurement.theta_s is empty"),
            Some(ts) => {
                let ti = g.theta_i.clone();
                g.with_sources(ts.clone(), ti)
            }
            None => g,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RaysConfig {
    pub step: f64,
    /// Trapping threshold in units of the measurement radius.
    pub max_s_factor: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub level: f64,
    pub mode: NoiseMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensitivityConfig {
    pub amplitudes: Vec<f64>,
    pub bump_radius: f64,
    /// Points with `|A|` up to this value enter the slope fit.
    pub fit_max_amplitude: f64,
    pub threshold: f64,
    pub sparsity_amplitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XrayConfig {
    pub amplitudes: Vec<f64>,
    pub bump_radius: f64,
    pub n_angles: usize,
    pub n_offsets: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionConfig {
    /// Generate data on the inversion grid instead of the finer data grid.
    pub same_solver: bool,
    pub support_radius: f64,
    pub lbfgs: LbfgsOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FwiConfig {
    pub n_dirs: usize,
    pub n_rcv: usize,
    pub receiver_radius: f64,
    pub half_width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub threads: usize,
    pub out_dir: PathBuf,
    pub medium: MediumConfig,
    pub wave: WaveConfig,
    pub helmholtz: HelmholtzConfig,
    pub measurement: MeasurementConfig,
    pub rays: RaysConfig,
    pub noise: NoiseConfig,
    pub sensitivity: SensitivityConfig,
    pub xray: XrayConfig,
    pub inversion: InversionConfig,
    pub fwi: FwiConfig,
}

impl RunConfig {
    /// Defaults for one experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let dtheta = PI / 30.0;
        let convergence = MeasurementConfig {
            layout: Layout::Uniform,
            radius: 0.3,
            dtheta,
            n_pos: 48,
            n_dir: 24,
            theta_s: Some(vec![PI / 4.0]),
        };
        let mut cfg = RunConfig {
            experiment,
            seed: 0,
            threads: 1,
            out_dir: PathBuf::from("out"),
            medium: MediumConfig::Bump { amplitude: -0.5, radius: 0.25 },
            wave: WaveConfig { k: vec![64.0], sigma: 0.125, block: 32, source: 14 },
            helmholtz: HelmholtzConfig { pml_wavelengths: 2.5, log_reflection: 12.0, ppw_data: 12.0, ppw_inv: 8.0, half_width: None },
            measurement: convergence,
            rays: RaysConfig { step: 1e-3, max_s_factor: 100.0 },
            noise: NoiseConfig { level: 0.0, mode: NoiseMode::Multiplicative },
            sensitivity: SensitivityConfig {
                amplitudes: vec![-0.1, -0.2, -0.3, -0.4, -0.5],
                bump_radius: 0.25,
                fit_max_amplitude: 0.3,
                threshold: 0.5,
                sparsity_amplitude: -0.5,
            },
            xray: XrayConfig { amplitudes: vec![-0.05, -0.1, -0.2], bump_radius: 0.25, n_angles: 4, n_offsets: 41 },
            inversion: InversionConfig { same_solver: true, support_radius: 0.2, lbfgs: LbfgsOptions::default() },
            fwi: FwiConfig { n_dirs: 180, n_rcv: 180, receiver_radius: 1.0, half_width: 1.1 },
        };
        let full = MeasurementConfig { layout: Layout::FullAperture, radius: 0.3, dtheta, n_pos: 48, n_dir: 24, theta_s: None };
        match experiment {
            Experiment::Forward | Experiment::Husimi => {}
            Experiment::Rays => cfg.measurement.theta_s = None,
            Experiment::Dataset => cfg.wave.k = vec![32.0, 64.0, 128.0],
            Experiment::Sensitivity | Experiment::Sparsity => {
                cfg.wave.k = vec![16.0, 32.0, 64.0];
                cfg.medium = MediumConfig::Constant;
                cfg.measurement = full;
            }
            Experiment::XrayResidual => cfg.medium = MediumConfig::Constant,
            Experiment::Invert => {
                cfg.medium = MediumConfig::Bump { amplitude: 0.5, radius: 0.2 };
                cfg.wave.sigma = 0.25;
                cfg.helmholtz.half_width = Some(1.0);
                cfg.measurement = MeasurementConfig { radius: 0.4, n_pos: 96, n_dir: 48, ..full };
                cfg.noise.level = 0.05;
            }
            Experiment::FwiBaseline => {
                cfg.medium = MediumConfig::Delocalized { seed: 7, correlation_length: 0.1, amplitude: 0.5, radius: 0.35 };
                cfg.inversion.support_radius = 0.35;
                cfg.noise.level = 0.05;
            }
        }
        cfg
    }

    /// Parses a TOML document on top of the defaults of `experiment`. Sections replace the
    /// defaults key by key; a `[medium]` section with a different `kind` replaces it whole.
    pub fn from_toml(text: &str, experiment: Experiment) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(v) = user.get("experiment") {
            if v.as_str() != Some(experiment.name()) {
                return Err(Error::Config(format!("config names experiment {v}, command line asks for {}", experiment.name())));
            }
        }
        let defaults = toml::Table::try_from(Self::defaults(experiment)).map_err(|e| Error::Config(e.to_string()))?;
        let merged = merge(defaults, user);
        let cfg: RunConfig = merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, experiment: Experiment) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text, experiment)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.wave.k.is_empty() || self.wave.k.iter().any(|k| !(*k > 0.0)) {
            return Err(Error::Config("wave.k must be a nonempty list of positive wavenumbers".into()));
        }
        if !(self.wave.sigma > 0.0) || self.wave.block == 0 || self.threads == 0 {
            return Err(Error::Config("wave.sigma, wave.block and threads must be positive".into()));
        }
        if !(self.noise.level >= 0.0) {
            return Err(Error::Config("noise.level must be nonnegative".into()));
        }
        Ok(())
    }
}

fn merge(mut base: toml::Table, over: toml::Table) -> toml::Table {
    for (key, value) in over {
        let replaced = match (base.remove(&key), value) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => {
                if b.get("kind").is_some() && o.get("kind").is_some() && b.get("kind") != o.get("kind") {
                    toml::Value::Table(o)
                } else {
                    toml::Value::Table(merge(b, o))
                }
            }
            (_, v) => v,
        };
        base.insert(key, replaced);
    }
    base
}

fn encode(magic: &[u8; 4], dims: &[usize], payload: impl Iterator<Item = f64>) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(magic);
    let rank = u32::try_from(dims.len()).map_err(|_| Error::Format("rank overflows u32".into()))?;
    out.extend_from_slice(&rank.to_le_bytes());
    for &d in dims {
        let d = u32::try_from(d).map_err(|_| Error::Format("dimension overflows u32".into()))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

fn decode(magic: &[u8; 4], bytes: &[u8], per_entry: usize) -> Result<(Vec<usize>, Vec<f64>)> {
    let word = |at: usize| -> Result<u32> {
        bytes.get(at..at + 4).map(|b| u32::from_le_bytes(b.try_into().unwrap())).ok_or_else(|| Error::Format("truncated header".into()))
    };
    if bytes.get(..4) != Some(&magic[..]) {
        return Err(Error::Format(format!("expected magic {:?}", std::str::from_utf8(magic).unwrap())));
    }
    let rank = word(4)? as usize;
    let dims: Vec<usize> = (0..rank).map(|i| word(8 + 4 * i).map(|d| d as usize)).collect::<Result<_>>()?;
    let start = 8 + 4 * rank;
    let count = dims.iter().try_fold(per_entry, |a, &d| a.checked_mul(d)).ok_or_else(|| Error::Format("dimensions overflow".into()))?;
    let found = (bytes.len() - start) / 8;
    if (bytes.len() - start) % 8 != 0 || found != count {
        return Err(Error::Format(format!("dimension mismatch: header {dims:?} needs {count} values, payload holds {}", (bytes.len() - start) as f64 / 8.0)));
    }
    Ok((dims, bytes[start..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect()))
}

fn check_dims(dims: &[usize], len: usize) -> Result<()> {
    if dims.iter().product::<usize>() != len {
        return Err(Error::ShapeMismatch { expected: dims.to_vec(), found: vec![len] });
    }
    Ok(())
}

pub fn encode_real(dims: &[usize], data: &[f64]) -> Result<Vec<u8>> {
    check_dims(dims, data.len())?;
    encode(REAL_MAGIC, dims, data.iter().copied())
}

pub fn decode_real(bytes: &[u8]) -> Result<(Vec<usize>, Vec<f64>)> {
    decode(REAL_MAGIC, bytes, 1)
}

pub fn encode_complex(dims: &[usize], data: &[C64]) -> Result<Vec<u8>> {
    check_dims(dims, data.len())?;
    encode(COMPLEX_MAGIC, dims, data.iter().flat_map(|z| [z.re, z.im]))
}

pub fn decode_complex(bytes: &[u8]) -> Result<(Vec<usize>, Vec<C64>)> {
    let (dims, flat) = decode(COMPLEX_MAGIC, bytes, 2)?;
    Ok((dims, flat.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect()))
}

pub fn write_grid(path: &Path, dims: &[usize], data: &[f64]) -> Result<()> {
    Ok(fs::write(path, encode_real(dims, data)?)?)
}

pub fn read_grid(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    decode_real(&fs::read(path)?)
}

pub fn write_grid_complex(path: &Path, dims: &[usize], data: &[C64]) -> Result<()> {
    Ok(fs::write(path, encode_complex(dims, data)?)?)
}

pub fn read_grid_complex(path: &Path) -> Result<(Vec<usize>, Vec<C64>)> {
    decode_complex(&fs::read(path)?)
}

/// Rank-4 real tensor.
pub fn write_tensor(path: &Path, dims: [usize; 4], data: &[f64]) -> Result<()> {
    write_grid(path, &dims, data)
}

pub fn read_tensor(path: &Path) -> Result<([usize; 4], Vec<f64>)> {
    let (dims, data) = read_grid(path)?;
    let dims: [usize; 4] = dims.try_into().map_err(|d: Vec<usize>| Error::Format(format!("expected rank 4, found rank {}", d.len())))?;
    Ok((dims, data))
}

/// One CSV cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Real(f64),
    Text(&'static str),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Int(v as i64)
    }
}

/// 17 significant digits, `.` decimal separator.
pub fn format_real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn csv_string(header: &[&str], rows: &[Vec<Cell>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        for (i, c) in row.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            match c {
                Cell::Int(v) => write!(s, "{v}").unwrap(),
                Cell::Real(v) => s.push_str(&format_real(*v)),
                Cell::Text(v) => s.push_str(v),
            }
        }
        s.push('\n');
    }
    s
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
    if let Some(bad) = rows.iter().find(|r| r.len() != header.len()) {
        return Err(Error::ShapeMismatch { expected: vec![header.len()], found: vec![bad.len()] });
    }
    Ok(fs::write(path, csv_string(header, rows))?)
}

/// What a run produced.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    pub wall_time: f64,
}

struct Outputs {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<()> {
        let p = self.path(name);
        write_csv(&p, header, rows)
    }
}

fn k_label(k: f64) -> String {
    if k.fract() == 0.0 {
        format!("{}", k as i64)
    } else {
        format!("{k}")
    }
}

fn trace_options(cfg: &RunConfig) -> TraceOptions<f64> {
    TraceOptions { step: cfg.rays.step, max_s: Some(cfg.rays.max_s_factor * cfg.measurement.radius) }
}

fn noise_spec(cfg: &RunConfig) -> NoiseSpec {
    NoiseSpec { level: cfg.noise.level, mode: cfg.noise.mode, seed: cfg.seed }
}

fn write_field(out: &mut Outputs, name: &str, u: &WaveField) -> Result<()> {
    let n = u.grid.n();
    write_grid_complex(&out.path(&format!("{name}.wpc")), &[n, n], &u.values)?;
    out.csv(&format!("{name}_grid.csv"), &["half_width", "points_per_axis", "k"], &[vec![u.grid.half_width.into(), n.into(), u.k.into()]])
}

fn single_source_field(cfg: &RunConfig, medium: &MediumField<f64>, mgrid: &MeasurementGrid) -> Result<WaveField> {
    let k = cfg.wave.k[0];
    if cfg.wave.source >= mgrid.n_sources() {
        return Err(Error::Config(format!("wave.source {} out of range ({} sources)", cfg.wave.source, mgrid.n_sources())));
    }
    let fo = cfg.helmholtz.forward_options(mgrid.radius, k, cfg.helmholtz.ppw_data, cfg.wave.block, cfg.threads);
    let op = HelmholtzOp::assemble(medium, k, fo.grid(k)?, &fo.solver)?;
    let (x_s, d) = mgrid.source(cfg.wave.source);
    let src = BeamSource::new(x_s, d, k, cfg.wave.sigma)?;
    op.solve_source(&beam_rhs(&src, &op.layout().extended)).map_err(|e| Error::Source { index: cfg.wave.source, reason: e.to_string() })
}

fn run_forward(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let medium = cfg.medium.build()?;
    let mgrid = cfg.measurement.build()?;
    let u = single_source_field(cfg, &medium, &mgrid)?;
    write_field(out, "field", &u)?;
    if medium.is_smooth() {
        let (x_s, d) = mgrid.source(cfg.wave.source);
        let rec = liouville::in_out(&medium, x_s, shell_velocity(&medium, x_s, d), mgrid.radius, trace_options(cfg))?;
        let traj = liouville::trace(&medium, x_s, shell_velocity(&medium, x_s, d), cfg.rays.step, rec.exit_s)?;
        let rows: Vec<Vec<Cell>> = traj.states.iter().map(|s| vec![s.s.into(), s.x.x.into(), s.x.y.into(), s.v.x.into(), s.v.y.into()]).collect();
        out.csv("ray.csv", &["s", "x", "y", "vx", "vy"], &rows)?;
    }
    Ok(())
}

fn run_husimi(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let medium = cfg.medium.build()?;
    let mgrid = cfg.measurement.build()?;
    let u = single_source_field(cfg, &medium, &mgrid)?;
    let h = husimi_grid(&u, &mgrid, cfg.wave.source)?;
    write_grid(&out.path("husimi.wpg"), &[mgrid.theta_r.len(), mgrid.theta_o.len()], &h)?;
    let m_o = integrate_m_o(&h, &mgrid)?;
    out.csv("m_o.csv", &["theta_r", "m_o"], &mgrid.theta_r.iter().zip(&m_o).map(|(t, v)| vec![(*t).into(), (*v).into()]).collect::<Vec<_>>())?;
    match integrate_m_r(&h, &mgrid) {
        Ok(m_r) => {
            let base = mgrid.theta_r[0];
            let step = mgrid.theta_r.get(1).map_or(0.0, |t| t - base);
            let rows: Vec<Vec<Cell>> = m_r.iter().enumerate().map(|(i, v)| vec![(base + i as f64 * step).into(), (*v).into()]).collect();
            out.csv("m_r.csv", &["theta_or", "m_r"], &rows)?;
        }
        Err(e) => warn!("M_r skipped: {e}"),
    }
    if medium.is_smooth() {
        let (x_s, d) = mgrid.source(cfg.wave.source);
        let rec = liouville::in_out(&medium, x_s, shell_velocity(&medium, x_s, d), mgrid.radius, trace_options(cfg))?;
        let (tr, to) = mgrid.exit_angles(cfg.wave.source, rec.x_r, rec.v_r);
        let (ir, io) = argmax2(&h, mgrid.theta_o.len());
        out.csv(
            "exit.csv",
            &["ray_theta_r", "ray_theta_o", "argmax_theta_r", "argmax_theta_o", "distance"],
            &[vec![tr.into(), to.into(), mgrid.theta_r[ir].into(), mgrid.theta_o[io].into(), MeasurementGrid::angular_distance((mgrid.theta_r[ir], mgrid.theta_o[io]), (tr, to)).into()]],
        )?;
    }
    Ok(())
}

fn argmax2(h: &[f64], n_o: usize) -> (usize, usize) {
    let best = h.iter().enumerate().fold(0, |b, (i, v)| if *v > h[b] { i } else { b });
    (best / n_o, best % n_o)
}

fn ray_rows(mgrid: &MeasurementGrid, records: &[liouville::InOutRecord<f64>]) -> Vec<Vec<Cell>> {
    records
        .iter()
        .enumerate()
        .map(|(src, r)| {
            let (is, ii) = mgrid.source_indices(src);
            let (tr, to) = mgrid.exit_angles(src, r.x_r, r.v_r);
            vec![src.into(), mgrid.theta_s[is].into(), mgrid.theta_i[ii].into(), r.x_r.x.into(), r.x_r.y.into(), r.v_r.x.into(), r.v_r.y.into(), tr.into(), to.into(), r.exit_s.into(), r.trapped.into()]
        })
        .collect()
}

const RAY_HEADER: [&str; 11] = ["source", "theta_s", "theta_i", "x_r", "y_r", "vx_r", "vy_r", "theta_r", "theta_o", "exit_s", "trapped"];

fn run_rays(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let medium = cfg.medium.build()?;
    let mgrid = cfg.measurement.build()?;
    let records = liouville_dataset(&medium, &mgrid, trace_options(cfg))?;
    out.csv("inout.csv", &RAY_HEADER, &ray_rows(&mgrid, &records))
}

fn dataset_sidecar(out: &mut Outputs, name: &str, d: &forward_map::ScatterDataset) -> Result<()> {
    let [a, b, c, e] = d.shape();
    out.csv(
        name,
        &["k", "sigma", "radius", "n_theta_s", "n_theta_i", "n_theta_r", "n_theta_o", "noise_level"],
        &[vec![d.k.into(), d.sigma.into(), d.mgrid.radius.into(), a.into(), b.into(), c.into(), e.into(), d.noise.map_or(0.0, |n| n.level).into()]],
    )?;
    let axes: Vec<Vec<Cell>> = [(0usize, &d.mgrid.theta_s), (1, &d.mgrid.theta_i), (2, &d.mgrid.theta_r), (3, &d.mgrid.theta_o)]
        .iter()
        .flat_map(|(axis, vals)| vals.iter().enumerate().map(move |(i, v)| vec![(*axis).into(), i.into(), (*v).into()]))
        .collect();
    out.csv(&name.replace(".csv", "_axes.csv"), &["axis", "index", "angle"], &axes)
}

fn run_dataset(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let medium = cfg.medium.build()?;
    let mgrid = cfg.measurement.build()?;
    let records = if medium.is_smooth() { Some(liouville_dataset(&medium, &mgrid, trace_options(cfg))?) } else { None };
    let mut conv = Vec::new();
    for &k in &cfg.wave.k {
        let fo = cfg.helmholtz.forward_options(mgrid.radius, k, cfg.helmholtz.ppw_data, cfg.wave.block, cfg.threads);
        let mut d = generate(&medium, k, cfg.wave.sigma, &mgrid, &fo)?;
        if cfg.noise.level > 0.0 {
            d = add_noise(&d, noise_spec(cfg))?;
        }
        let label = k_label(k);
        write_tensor(&out.path(&format!("dataset_k{label}.wpg")), d.shape(), &d.values)?;
        dataset_sidecar(out, &format!("dataset_k{label}.csv"), &d)?;
        if let Some(rec) = &records {
            for (src, dist) in ray_distances(&d, rec)?.into_iter().enumerate() {
                let (ir, io) = d.argmax_receiver(src);
                conv.push(vec![k.into(), src.into(), mgrid.theta_r[ir].into(), mgrid.theta_o[io].into(), dist.into()]);
            }
        }
        info!("dataset k = {k} written");
    }
    if let Some(rec) = &records {
        out.csv("rays.csv", &RAY_HEADER, &ray_rows(&mgrid, rec))?;
        out.csv("convergence.csv", &["k", "source", "argmax_theta_r", "argmax_theta_o", "distance"], &conv)?;
    }
    Ok(())
}

fn run_sensitivity(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let mgrid = cfg.measurement.build()?;
    let s = &cfg.sensitivity;
    let points = sensitivity_curve(&cfg.wave.k, &s.amplitudes, s.bump_radius, cfg.wave.sigma, &mgrid, |k| {
        cfg.helmholtz.forward_options(mgrid.radius, k, cfg.helmholtz.ppw_data, cfg.wave.block, cfg.threads)
    })?;
    let rows: Vec<Vec<Cell>> = points.iter().map(|p| vec![p.k.into(), p.amplitude.into(), p.perturbation.into(), p.distance.into()]).collect();
    out.csv("sensitivity.csv", &["k", "amplitude", "perturbation", "distance"], &rows)?;
    let mut slopes = Vec::new();
    for &k in &cfg.wave.k {
        let fit: Vec<(f64, f64)> = points.iter().filter(|p| p.k == k && p.amplitude.abs() <= s.fit_max_amplitude + 1e-12).map(|p| (p.perturbation, p.distance)).collect();
        slopes.push(vec![k.into(), slope_through_origin(&fit)?.into()]);
    }
    out.csv("slopes.csv", &["k", "slope"], &slopes)
}

fn run_sparsity(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let mgrid = cfg.measurement.build()?;
    let s = &cfg.sensitivity;
    let medium = MediumField::bump(s.sparsity_amplitude, s.bump_radius)?;
    let mut rows = Vec::new();
    for &k in &cfg.wave.k {
        let fo = cfg.helmholtz.forward_options(mgrid.radius, k, cfg.helmholtz.ppw_data, cfg.wave.block, cfg.threads);
        let d = generate(&medium, k, cfg.wave.sigma, &mgrid, &fo)?;
        let p = sparsity_pattern(&d, s.threshold);
        let mask: Vec<f64> = p.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        write_grid(&out.path(&format!("sparsity_k{}.wpg", k_label(k))), &[p.rows, p.cols], &mask)?;
        rows.push(vec![k.into(), p.nnz().into(), p.fraction().into()]);
    }
    out.csv("sparsity.csv", &["k", "nnz", "fraction"], &rows)
}

fn run_xray(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let x = &cfg.xray;
    let mut rows = Vec::new();
    for &a in &x.amplitudes {
        let medium = MediumField::bump(a, x.bump_radius)?;
        let delta = medium.delta_bound(256);
        let res = max_novikov_residual(&medium, cfg.measurement.radius, x.n_angles, x.n_offsets, trace_options(cfg))?;
        rows.push((a, delta, res));
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.1.ln(), r.2.ln())).collect();
    let slope = if pts.len() >= 2 { loglog_slope(&pts) } else { f64::NAN };
    let cells: Vec<Vec<Cell>> = rows.iter().map(|&(a, d, r)| vec![a.into(), d.into(), r.into(), slope.into()]).collect();
    out.csv("xray_residual.csv", &["amplitude", "delta", "max_residual", "fitted_slope"], &cells)
}

/// Least-squares slope of `y` against `x`.
pub fn loglog_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

fn write_run(out: &mut Outputs, run: &InversionRun, grid: &GridSpec<f64>, truth: &[f64]) -> Result<()> {
    let rows: Vec<Vec<Cell>> = run
        .history
        .iter()
        .map(|h| vec![h.iter.into(), h.misfit.into(), h.grad_norm.into(), h.rel_l2.unwrap_or(f64::NAN).into()])
        .collect();
    out.csv("history.csv", &["iter", "misfit", "gradnorm", "rel_l2"], &rows)?;
    let n = grid.n();
    write_grid(&out.path("q.wpg"), &[n, n], &run.q)?;
    write_grid(&out.path("truth.wpg"), &[n, n], truth)?;
    out.csv(
        "result.csv",
        &["status", "iterations", "evaluations", "rel_l2"],
        &[vec![Cell::Text(run.status.name()), (run.history.len() - 1).into(), run.evaluations.into(), run.final_rel_l2().unwrap_or(f64::NAN).into()]],
    )
}

fn run_invert(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let medium = cfg.medium.build()?;
    let mgrid = cfg.measurement.build()?;
    let k = cfg.wave.k[0];
    let half = cfg.helmholtz.half_width.unwrap_or(1.0);
    let grid = grid_for(2.0 * half, k, cfg.helmholtz.ppw_inv)?;
    let mut ctx = InversionContext::new(k, cfg.wave.sigma, mgrid.clone(), grid, cfg.inversion.support_radius, cfg.helmholtz.solver())?;
    ctx.block = cfg.wave.block;
    ctx.threads = cfg.threads;
    let truth = medium.sample_contrast(&grid);
    let clean = if cfg.inversion.same_solver {
        ctx.dataset(&truth)?
    } else {
        let fo = ForwardOptions { half_width: half, ppw: cfg.helmholtz.ppw_data, solver: cfg.helmholtz.solver(), block: cfg.wave.block, threads: cfg.threads };
        generate(&medium, k, cfg.wave.sigma, &mgrid, &fo)?
    };
    let data = if cfg.noise.level > 0.0 { add_noise(&clean, noise_spec(cfg))? } else { clean };
    write_tensor(&out.path("data.wpg"), data.shape(), &data.values)?;
    dataset_sidecar(out, "data.csv", &data)?;
    let run = reconstruct(&data, &ctx, Some(&truth), &cfg.inversion.lbfgs)?;
    write_run(out, &run, &grid, &truth)
}

fn run_fwi(cfg: &RunConfig, out: &mut Outputs) -> Result<()> {
    let medium = cfg.medium.build()?;
    let k = cfg.wave.k[0];
    let grid = grid_for(2.0 * cfg.fwi.half_width, k, cfg.helmholtz.ppw_inv)?;
    let mut ctx = FwiContext::new(k, grid, cfg.fwi.receiver_radius, cfg.fwi.n_dirs, cfg.fwi.n_rcv, cfg.inversion.support_radius, cfg.helmholtz.solver())?;
    ctx.block = cfg.wave.block;
    ctx.threads = cfg.threads;
    let truth = medium.sample_contrast(&grid);
    let clean = ctx.data(&truth)?;
    let data = if cfg.noise.level > 0.0 { add_complex_noise(&clean, noise_spec(cfg))? } else { clean };
    write_grid_complex(&out.path("far_data.wpc"), &[cfg.fwi.n_dirs, cfg.fwi.n_rcv], &data)?;
    let run = fwi_baseline(&data, &ctx, Some(&truth), &cfg.inversion.lbfgs)?;
    write_run(out, &run, &grid, &truth)
}

/// Runs one experiment, writing its outputs and `manifest.toml` into `cfg.out_dir`.
pub fn run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir)?;
    let start = Instant::now();
    let mut out = Outputs { dir: cfg.out_dir.clone(), files: Vec::new() };
    let result = match cfg.experiment {
        Experiment::Forward => run_forward(cfg, &mut out),
        Experiment::Husimi => run_husimi(cfg, &mut out),
        Experiment::Rays => run_rays(cfg, &mut out),
        Experiment::Dataset => run_dataset(cfg, &mut out),
        Experiment::Sensitivity => run_sensitivity(cfg, &mut out),
        Experiment::Sparsity => run_sparsity(cfg, &mut out),
        Experiment::XrayResidual => run_xray(cfg, &mut out),
        Experiment::Invert => run_invert(cfg, &mut out),
        Experiment::FwiBaseline => run_fwi(cfg, &mut out),
    };
    result.map_err(|e| Error::Config(format!("{} failed: {e}", cfg.experiment.name())))?;
    let wall_time = start.elapsed().as_secs_f64();
    let manifest = Manifest {
        tool: "wave2ray".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        wall_time_seconds: wall_time,
        files: out.files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect(),
        config: cfg.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    let path = cfg.out_dir.join("manifest.toml");
    fs::write(&path, text)?;
    out.files.push(path);
    Ok(RunSummary { files: out.files, wall_time })
}

#[derive(Serialize)]
struct Manifest {
    tool: String,
    version: String,
    wall_time_seconds: f64,
    files: Vec<String>,
    config: RunConfig,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        for e in Experiment::ALL {
            let cfg = RunConfig::defaults(e);
            assert_eq!(RunConfig::from_toml(&cfg.to_toml(), e).unwrap(), cfg, "{}", e.name());
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(RunConfig::from_toml("sede = 3", Experiment::Rays), Err(Error::Config(_))));
        assert!(RunConfig::from_toml("[wave]\nsigmma = 0.1", Experiment::Rays).is_err());
        assert!(RunConfig::from_toml("[medium]\nkind = \"bump\"\namplitude = -0.1\nradius = 0.2\nseed = 4", Experiment::Rays).is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = RunConfig::from_toml("seed = 5\n[wave]\nk = [16.0]\n[medium]\nkind = \"shepp_logan\"\nscale = 0.1\nradius = 0.3", Experiment::Dataset).unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.wave.k, vec![16.0]);
        assert_eq!(cfg.wave.sigma, 0.125);
        assert_eq!(cfg.medium, MediumConfig::SheppLogan { scale: 0.1, radius: 0.3 });
    }

    #[test]
    fn experiment_mismatch_is_an_error() {
        assert!(RunConfig::from_toml("experiment = \"rays\"", Experiment::Invert).is_err());
        assert!(RunConfig::from_toml("experiment = \"invert\"", Experiment::Invert).is_ok());
    }

    #[test]
    fn real_and_complex_round_trip() {
        let data: Vec<f64> = (0..6).map(|i| (i as f64).sin() * 1e-300 + i as f64).collect();
        let bytes = encode_real(&[2, 3], &data).unwrap();
        assert_eq!(&bytes[..4], b"WPG1");
        assert_eq!(&bytes[4..8], &2u32.to_le_bytes());
        assert_eq!(decode_real(&bytes).unwrap(), (vec![2, 3], data));
        let z: Vec<C64> = (0..4).map(|i| C64::new(i as f64, -0.5 * i as f64)).collect();
        let bytes = encode_complex(&[1, 4], &z).unwrap();
        assert_eq!(bytes.len(), 4 + 4 + 8 + 64);
        assert_eq!(decode_complex(&bytes).unwrap(), (vec![1, 4], z));
    }

    #[test]
    fn truncation_and_magic_errors() {
        let bytes = encode_real(&[3], &[1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(decode_real(&bytes[..bytes.len() - 8]), Err(Error::Format(_))));
        assert!(matches!(decode_real(&bytes[..bytes.len() - 3]), Err(Error::Format(_))));
        assert!(matches!(decode_real(&bytes[..6]), Err(Error::Format(_))));
        assert!(matches!(decode_complex(&bytes), Err(Error::Format(_))));
        assert!(encode_real(&[2, 2], &[1.0]).is_err());
    }

    #[test]
    fn csv_uses_seventeen_digits() {
        let s = csv_string(&["a", "b"], &[vec![Cell::Int(3), Cell::Real(0.1)]]);
        assert_eq!(s, "a,b\n3,1.0000000000000001e-1\n");
        assert_eq!(format_real(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
