//! Husimi datasets over source and receiver grids, sensitivity and sparsity analyses, and
//! the measurement-noise model.

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::helmholtz::{beam_rhs, grid_for, BeamSource, HelmholtzOp, SolverOptions, C64};
use crate::liouville::InOutRecord;
use crate::measurement::MeasurementGrid;
use crate::parallel::map_blocks;
use crate::medium::MediumField;
use crate::phase_space::HusimiOperator;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridQuality {
    /// 12 points per wavelength.
    Data,
    /// 8 points per wavelength.
    Inversion,
}

impl GridQuality {
    pub fn ppw(self) -> f64 {
        match self {
            GridQuality::Data => 12.0,
            GridQuality::Inversion => 8.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// `D + level * eps * D / |D|`.
    AdditiveSign,
    /// `(1 + level * eps) D`.
    Multiplicative,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: f64,
    pub mode: NoiseMode,
    pub seed: u64,
}

/// Computational domain and discretization for the forward problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ForwardOptions {
    /// Half-width of the physical square.
    pub half_width: f64,
    pub ppw: f64,
    pub solver: SolverOptions,
    /// Right-hand sides per block solve.
    pub block: usize,
    pub threads: usize,
}

impl ForwardOptions {
    pub fn new(half_width: f64, quality: GridQuality) -> Self {
        Self { half_width, ppw: quality.ppw(), solver: SolverOptions::default(), block: 32, threads: 1 }
    }

    /// Half-width `R + 4 / sqrt(k)`: the receiver filter envelope has fallen to `e^{-8}` at the
    /// grid edge.
    pub fn for_receivers(radius: f64, k: f64, quality: GridQuality) -> Self {
        Self::new(radius + 4.0 / k.sqrt(), quality)
    }

    pub fn grid(&self, k: f64) -> Result<GridSpec<f64>> {
        grid_for(2.0 * self.half_width, k, self.ppw)
    }
}

/// Husimi data indexed `(theta_s, theta_i, theta_r, theta_o)`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScatterDataset {
    pub mgrid: MeasurementGrid,
    pub k: f64,
    pub sigma: f64,
    pub values: Vec<f64>,
    pub noise: Option<NoiseSpec>,
}

impl ScatterDataset {
    pub fn new(mgrid: MeasurementGrid, k: f64, sigma: f64, values: Vec<f64>) -> Result<Self> {
        let shape = mgrid.shape();
        if values.len() != shape.iter().product::<usize>() {
            return Err(Error::ShapeMismatch { expected: shape.to_vec(), found: vec![values.len()] });
        }
        Ok(Self { mgrid, k, sigma, values, noise: None })
    }

    pub fn shape(&self) -> [usize; 4] {
        self.mgrid.shape()
    }

    /// Receiver block of one flat source index.
    pub fn source_block(&self, src: usize) -> &[f64] {
        let per = self.mgrid.n_receivers();
        &self.values[src * per..(src + 1) * per]
    }

    /// `(ir, io)` of the largest value for a source.
    pub fn argmax_receiver(&self, src: usize) -> (usize, usize) {
        let block = self.source_block(src);
        let mut best = 0;
        for (i, v) in block.iter().enumerate() {
            if *v > block[best] {
                best = i;
            }
        }
        let n_o = self.mgrid.theta_o.len();
        (best / n_o, best % n_o)
    }
}

/// Circular distance, per source, between the Husimi argmax and the ray exit state.
pub fn ray_distances(d: &ScatterDataset, records: &[InOutRecord<f64>]) -> Result<Vec<f64>> {
    if records.len() != d.mgrid.n_sources() {
        return Err(Error::ShapeMismatch { expected: vec![d.mgrid.n_sources()], found: vec![records.len()] });
    }
    Ok(records
        .iter()
        .enumerate()
        .map(|(src, rec)| {
            let (ir, io) = d.argmax_receiver(src);
            let ray = d.mgrid.exit_angles(src, rec.x_r, rec.v_r);
            MeasurementGrid::angular_distance((d.mgrid.theta_r[ir], d.mgrid.theta_o[io]), ray)
        })
        .collect())
}

/// Fields for sources `first..first + count` on the extended grid, one column each.
pub fn solve_beams(op: &HelmholtzOp, mgrid: &MeasurementGrid, sigma: f64, first: usize, count: usize) -> Result<Mat<C64>> {
    let ext = op.layout().extended;
    let mut rhs = Mat::<C64>::zeros(ext.len(), count);
    for b in 0..count {
        let src = first + b;
        let (x, v) = mgrid.source(src);
        let beam = BeamSource::new(x, v, op.k(), sigma).map_err(|e| Error::Source { index: src, reason: e.to_string() })?;
        let f = op.source_rhs(&beam_rhs(&beam, &ext));
        for (i, val) in f.into_iter().enumerate() {
            rhs[(i, b)] = val;
        }
    }
    op.solve_block(rhs.as_mut()).map_err(|e| Error::Source { index: first, reason: e.to_string() })?;
    Ok(rhs)
}

/// Restricts block solutions to the physical grid.
pub fn restrict_block(op: &HelmholtzOp, ext: &Mat<C64>) -> Mat<C64> {
    let idx = op.layout().physical_indices();
    Mat::from_fn(idx.len(), ext.ncols(), |i, b| ext[(idx[i], b)])
}

/// Source ranges `(first, count)` of the blocks.
pub fn source_blocks(n_src: usize, block: usize) -> Vec<(usize, usize)> {
    let block = block.max(1);
    (0..n_src).step_by(block).map(|first| (first, block.min(n_src - first))).collect()
}

/// Husimi data of all sources for an assembled operator.
pub fn simulate(op: &HelmholtzOp, husimi: &HusimiOperator, mgrid: &MeasurementGrid, sigma: f64, block: usize, threads: usize) -> Result<Vec<f64>> {
    let blocks = source_blocks(mgrid.n_sources(), block);
    let parts = map_blocks(blocks.len(), threads, |b| {
        let (first, count) = blocks[b];
        let ext = solve_beams(op, mgrid, sigma, first, count)?;
        husimi.husimi(restrict_block(op, &ext).as_ref(), first)
    })?;
    Ok(parts.concat())
}

/// Full Husimi dataset of `medium`: one factorization, one beam solve per source.
pub fn generate(medium: &MediumField<f64>, k: f64, sigma: f64, mgrid: &MeasurementGrid, opts: &ForwardOptions) -> Result<ScatterDataset> {
    let grid = opts.grid(k)?;
    let op = HelmholtzOp::assemble(medium, k, grid, &opts.solver)?;
    let husimi = HusimiOperator::new(&grid, k, mgrid)?;
    let values = simulate(&op, &husimi, mgrid, sigma, opts.block, opts.threads)?;
    ScatterDataset::new(mgrid.clone(), k, sigma, values)
}

/// `sqrt(sum (a - b)^2)`.
pub fn frobenius_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch { expected: vec![a.len()], found: vec![b.len()] });
    }
    Ok(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensitivityPoint {
    pub k: f64,
    pub amplitude: f64,
    /// `||n - n_0||_inf = |A| e^{-1}`.
    pub perturbation: f64,
    pub distance: f64,
}

/// Distance between the bump datasets and the constant-medium dataset for every `(k, A)`.
pub fn sensitivity_curve(
    k_list: &[f64],
    amplitudes: &[f64],
    radius: f64,
    sigma: f64,
    mgrid: &MeasurementGrid,
    opts: impl Fn(f64) -> ForwardOptions,
) -> Result<Vec<SensitivityPoint>> {
    let mut out = Vec::new();
    for &k in k_list {
        let fo = opts(k);
        let reference = generate(&MediumField::constant(), k, sigma, mgrid, &fo)?;
        for &a in amplitudes {
            let d = generate(&MediumField::bump(a, radius)?, k, sigma, mgrid, &fo)?;
            out.push(SensitivityPoint {
                k,
                amplitude: a,
                perturbation: a.abs() * (-1.0f64).exp(),
                distance: frobenius_distance(&d.values, &reference.values)?,
            });
        }
    }
    Ok(out)
}

/// Least-squares slope of a line through the origin.
pub fn slope_through_origin(points: &[(f64, f64)]) -> Result<f64> {
    let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
    if sxx == 0.0 {
        return invalid("slope fit needs a nonzero abscissa");
    }
    Ok(points.iter().map(|p| p.0 * p.1).sum::<f64>() / sxx)
}

/// Entries above `threshold_fraction * max`, rows `(theta_r, theta_o)`, columns `(theta_s, theta_i)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparsityPattern {
    pub rows: usize,
    pub cols: usize,
    /// `mask[row * cols + col]`.
    pub mask: Vec<bool>,
}

impl SparsityPattern {
    pub fn nnz(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn fraction(&self) -> f64 {
        self.nnz() as f64 / self.mask.len().max(1) as f64
    }
}

pub fn sparsity_pattern(d: &ScatterDataset, threshold_fraction: f64) -> SparsityPattern {
    let rows = d.mgrid.n_receivers();
    let cols = d.mgrid.n_sources();
    let max = d.values.iter().cloned().fold(0.0, f64::max);
    let mut mask = vec![false; rows * cols];
    if max > 0.0 {
        let t = threshold_fraction * max;
        for src in 0..cols {
            for (r, v) in d.source_block(src).iter().enumerate() {
                mask[r * cols + src] = *v > t;
            }
        }
    }
    SparsityPattern { rows, cols, mask }
}

fn noise_signs(spec: NoiseSpec) -> Result<impl Iterator<Item = f64>> {
    if !(spec.level >= 0.0) {
        return invalid("noise level must be nonnegative");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok(std::iter::repeat_with(move || if rng.random_bool(0.5) { 1.0 } else { -1.0 }))
}

/// Perturbs every entry with an independent symmetric sign.
pub fn add_noise(d: &ScatterDataset, spec: NoiseSpec) -> Result<ScatterDataset> {
    let values = d
        .values
        .iter()
        .zip(noise_signs(spec)?)
        .map(|(&v, eps)| match spec.mode {
            NoiseMode::Multiplicative => (1.0 + spec.level * eps) * v,
            NoiseMode::AdditiveSign if v != 0.0 => v + spec.level * eps * v / v.abs(),
            NoiseMode::AdditiveSign => v,
        })
        .collect();
    Ok(ScatterDataset { values, noise: Some(spec), ..d.clone() })
}

/// Complex counterpart of [`add_noise`]; `D / |D|` is the phase of the entry.
pub fn add_complex_noise(values: &[C64], spec: NoiseSpec) -> Result<Vec<C64>> {
    Ok(values
        .iter()
        .zip(noise_signs(spec)?)
        .map(|(&v, eps)| match spec.mode {
            NoiseMode::Multiplicative => v * (1.0 + spec.level * eps),
            NoiseMode::AdditiveSign if v.norm() > 0.0 => v + v / v.norm() * (spec.level * eps),
            NoiseMode::AdditiveSign => v,
        })
        .collect())
}
