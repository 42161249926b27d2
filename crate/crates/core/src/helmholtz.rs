//! Frequency-domain Helmholtz solves `Delta u + k^2 n u = f` on a square with a PML.
//!
//! The physical grid is padded by `n_pml` nodes on every side. Inside the padding the
//! coordinates are stretched by `s(d) = 1 + i sigma(d)/k`, `sigma(d) = sigma_max (d/delta)^2`,
//! and the equation is used in the symmetric conservative form
//! `d_x(s_y/s_x d_x u) + d_y(s_x/s_y d_y u) + k^2 n s_x s_y u = s_x s_y f`
//! with homogeneous Dirichlet data beyond the padding. Derivatives are fourth-order
//! staggered differences, so the assembled matrix is complex symmetric.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, MatMut};
use log::warn;
use num_complex::Complex;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::medium::MediumField;
use crate::scalar::Vec2;

pub type C64 = Complex<f64>;

/// Absorbing layer parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmlSpec {
    /// Layer thickness in wavelengths.
    pub wavelengths: f64,
    /// Target round-trip amplitude attenuation `ln(1/R)` of the continuous layer at normal
    /// incidence; sets `sigma_max = 3 ln(1/R) / (2 delta)`.
    pub log_reflection: f64,
}

impl Default for PmlSpec {
    fn default() -> Self {
        Self { wavelengths: 2.5, log_reflection: 12.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub pml: PmlSpec,
    /// Minimum points per wavelength accepted by the pollution guard.
    pub min_ppw: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { pml: PmlSpec::default(), min_ppw: 8.0 }
    }
}

/// Smallest grid on `[-L/2, L/2]^2` with at least `ppw` points per wavelength at `k`.
pub fn grid_for(width: f64, k: f64, ppw: f64) -> Result<GridSpec<f64>> {
    let n = (width * ppw * k / (2.0 * PI)).ceil() as usize + 1;
    GridSpec::new(width / 2.0, n)
}

/// Physical grid embedded in the padded computational grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Layout {
    pub physical: GridSpec<f64>,
    pub extended: GridSpec<f64>,
    pub n_pml: usize,
}

impl Layout {
    pub fn new(physical: GridSpec<f64>, k: f64, pml: &PmlSpec) -> Result<Self> {
        if !(k > 0.0) || !(pml.wavelengths >= 0.0) {
            return invalid("wavenumber and PML thickness must be positive");
        }
        let h = physical.spacing();
        let delta = pml.wavelengths * 2.0 * PI / k;
        let n_pml = ((delta / h) - 1e-9).ceil().max(0.0) as usize;
        let extended = GridSpec::new(physical.half_width + n_pml as f64 * h, physical.n() + 2 * n_pml)?;
        Ok(Self { physical, extended, n_pml })
    }

    /// Extended index of physical node `(ix, iy)`.
    #[inline]
    pub fn ext_index(&self, ix: usize, iy: usize) -> usize {
        self.extended.index(ix + self.n_pml, iy + self.n_pml)
    }

    /// Extended index of each physical node in physical order.
    pub fn physical_indices(&self) -> Vec<usize> {
        let n = self.physical.n();
        (0..n * n).map(|i| self.ext_index(i % n, i / n)).collect()
    }

    pub fn restrict<T: Copy>(&self, ext: &[T]) -> Vec<T> {
        self.physical_indices().into_iter().map(|i| ext[i]).collect()
    }

    pub fn prolong<T: Copy + Default>(&self, phys: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); self.extended.len()];
        for (p, e) in self.physical_indices().into_iter().enumerate() {
            out[e] = phys[p];
        }
        out
    }

    pub fn pml_thickness(&self) -> f64 {
        self.n_pml as f64 * self.physical.spacing()
    }
}

/// Complex field on the physical grid.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveField {
    pub grid: GridSpec<f64>,
    pub k: f64,
    pub values: Vec<C64>,
    /// True for the scattered part of a plane-wave problem, false for a total field.
    pub scattered: bool,
}

impl WaveField {
    pub fn at(&self, ix: usize, iy: usize) -> C64 {
        self.values[self.grid.index(ix, iy)]
    }
}

/// Gaussian beam source on the measurement circle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSource {
    pub center: Vec2<f64>,
    pub direction: Vec2<f64>,
    pub k: f64,
    pub sigma: f64,
}

impl BeamSource {
    pub fn new(center: Vec2<f64>, direction: Vec2<f64>, k: f64, sigma: f64) -> Result<Self> {
        if ((direction.norm() - 1.0).abs() > 1e-12) || !(k > 0.0) || !(sigma > 0.0) {
            return invalid("beam needs a unit direction, k > 0 and sigma > 0");
        }
        if center.dot(direction) >= 0.0 {
            return invalid("beam direction must point into the disk");
        }
        Ok(Self { center, direction, k, sigma })
    }

    /// `C(sigma, 2) = sqrt(2) (sigma/sqrt(pi))^{3/2}`.
    pub fn normalization(&self) -> f64 {
        crate::liouville::beam_constant(self.sigma)
    }

    /// `-k^{5/2} C exp(-sigma^2 k^2 |x - x_s|^2 / 2 + i k v_s . (x - x_s))`.
    pub fn value(&self, x: Vec2<f64>) -> C64 {
        let d = x - self.center;
        let amp = -self.k.powf(2.5) * self.normalization();
        let env = (-0.5 * (self.sigma * self.k).powi(2) * d.norm_sq()).exp();
        C64::from_polar(amp * env, self.k * self.direction.dot(d))
    }
}

/// Samples the beam source on every node of `grid`.
pub fn beam_rhs(src: &BeamSource, grid: &GridSpec<f64>) -> Vec<C64> {
    let n = grid.n();
    let mut edge_peak = 0.0f64;
    let out: Vec<C64> = (0..grid.len())
        .map(|i| {
            let v = src.value(grid.node_of(i));
            let (ix, iy) = (i % n, i / n);
            if ix == 0 || iy == 0 || ix == n - 1 || iy == n - 1 {
                edge_peak = edge_peak.max(v.norm());
            }
            v
        })
        .collect();
    let peak = src.k.powf(2.5) * src.normalization();
    if edge_peak > 1e-12 * peak {
        warn!("beam envelope at the grid edge is {:.2e} of its peak", edge_peak / peak);
    }
    out
}

/// Fourth-order staggered derivative weights on nodes `j-1, j, j+1, j+2` for half point `j+1/2`.
const STAGGER: [f64; 4] = [1.0 / 24.0, -27.0 / 24.0, 27.0 / 24.0, -1.0 / 24.0];

struct Stretch {
    k: f64,
    inner: f64,
    delta: f64,
    sigma_max: f64,
}

impl Stretch {
    fn at(&self, x: f64) -> C64 {
        let d = (x.abs() - self.inner).max(0.0);
        if d == 0.0 || self.delta == 0.0 {
            return C64::new(1.0, 0.0);
        }
        let t = d / self.delta;
        C64::new(1.0, self.sigma_max * t * t / self.k)
    }
}

/// Assembled and factorized discrete Helmholtz operator. Immutable once built.
pub struct HelmholtzOp {
    layout: Layout,
    k: f64,
    /// `s_x s_y` per extended node.
    stretch: Vec<C64>,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<C64>,
    lu: Lu<usize, C64>,
}

impl std::fmt::Debug for HelmholtzOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HelmholtzOp").field("layout", &self.layout).field("k", &self.k).finish_non_exhaustive()
    }
}

impl HelmholtzOp {
    /// Samples `n` of `medium` on the padded grid and factorizes.
    pub fn assemble(medium: &MediumField<f64>, k: f64, grid: GridSpec<f64>, opts: &SolverOptions) -> Result<Self> {
        let layout = Layout::new(grid, k, &opts.pml)?;
        let index: Vec<f64> = (0..layout.extended.len()).map(|i| medium.eval(layout.extended.node_of(i)).n).collect();
        Self::from_index(index, k, layout, opts)
    }

    /// Operator for `n = 1 + q` with `q` given on the physical nodes and `n = 1` in the layer.
    pub fn from_contrast(q: &[f64], k: f64, grid: GridSpec<f64>, opts: &SolverOptions) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(Error::ShapeMismatch { expected: vec![grid.n(), grid.n()], found: vec![q.len()] });
        }
        let layout = Layout::new(grid, k, &opts.pml)?;
        let mut index = vec![1.0; layout.extended.len()];
        for (p, e) in layout.physical_indices().into_iter().enumerate() {
            index[e] = 1.0 + q[p];
        }
        Self::from_index(index, k, layout, opts)
    }

    fn from_index(index: Vec<f64>, k: f64, layout: Layout, opts: &SolverOptions) -> Result<Self> {
        let h = layout.physical.spacing();
        let lambda = 2.0 * PI / k;
        if h > lambda / opts.min_ppw {
            return Err(Error::GridTooCoarse { h, ppw: opts.min_ppw, limit: lambda / opts.min_ppw });
        }
        if index.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return invalid("refractive index must be finite and positive");
        }
        let delta = layout.pml_thickness();
        let stretch_fn = Stretch {
            k,
            inner: layout.physical.half_width,
            delta,
            sigma_max: if delta > 0.0 { 1.5 * opts.pml.log_reflection / delta } else { 0.0 },
        };
        let ext = layout.extended;
        let m = ext.n();
        let s_node: Vec<C64> = (0..m).map(|i| stretch_fn.at(ext.coord(i))).collect();
        // half point j + 1/2 for j in -2..=m, stored at j + 2
        let s_half: Vec<C64> = (0..m + 3)
            .map(|j| stretch_fn.at(ext.coord(0) + (j as f64 - 2.0 + 0.5) * h))
            .collect();
        let inv_h2 = 1.0 / (h * h);

        // 1-D band blocks: contribution of -D^T diag(w) D to row p, column p + o, o in -3..=3,
        // with weights w(j) supplied per half point.
        let band = |w: &dyn Fn(usize) -> C64| -> Vec<[C64; 7]> {
            let mut b = vec![[C64::new(0.0, 0.0); 7]; m];
            for jj in 0..m + 3 {
                let j = jj as isize - 2;
                let wj = w(jj) * inv_h2;
                for (a, ca) in STAGGER.iter().enumerate() {
                    let p = j - 1 + a as isize;
                    if p < 0 || p >= m as isize {
                        continue;
                    }
                    for (c, cc) in STAGGER.iter().enumerate() {
                        let q = j - 1 + c as isize;
                        if q < 0 || q >= m as isize {
                            continue;
                        }
                        b[p as usize][(q - p + 3) as usize] -= wj * (ca * cc);
                    }
                }
            }
            b
        };
        let inv_s_half: Vec<C64> = s_half.iter().map(|s| s.inv()).collect();
        let band_x = band(&|jj| inv_s_half[jj]);

        let n_ext = ext.len();
        let mut row_ptr = Vec::with_capacity(n_ext + 1);
        let mut col_idx = Vec::with_capacity(13 * n_ext);
        let mut vals = Vec::with_capacity(13 * n_ext);
        let mut stretch = vec![C64::new(0.0, 0.0); n_ext];
        row_ptr.push(0);
        for iy in 0..m {
            for ix in 0..m {
                let row = ext.index(ix, iy);
                let sxy = s_node[ix] * s_node[iy];
                stretch[row] = sxy;
                // x part: (s_y / s_x) weights, s_y constant along the row
                // y part: (s_x / s_y) weights, s_x constant along the column
                for o in 0..7 {
                    let off = o as isize - 3;
                    let mut entries: [(isize, isize, C64); 2] = [(0, 0, C64::new(0.0, 0.0)); 2];
                    entries[0] = (off, 0, band_x[ix][o] * s_node[iy]);
                    entries[1] = (0, off, band_x[iy][o] * s_node[ix]);
                    if off == 0 {
                        let diag = entries[0].2 + entries[1].2 + sxy * (k * k * index[row]);
                        let v = diag;
                        col_idx.push(row);
                        vals.push(v);
                        continue;
                    }
                    for (dx, dy, v) in entries {
                        let cx = ix as isize + dx;
                        let cy = iy as isize + dy;
                        if cx < 0 || cy < 0 || cx >= m as isize || cy >= m as isize || v == C64::new(0.0, 0.0) {
                            continue;
                        }
                        col_idx.push(ext.index(cx as usize, cy as usize));
                        vals.push(v);
                    }
                }
                row_ptr.push(col_idx.len());
            }
        }
        let mut triplets = Vec::with_capacity(vals.len());
        for r in 0..n_ext {
            for e in row_ptr[r]..row_ptr[r + 1] {
                triplets.push(Triplet::new(r, col_idx[e], vals[e]));
            }
        }
        let mat = SparseColMat::<usize, C64>::try_new_from_triplets(n_ext, n_ext, &triplets)
            .map_err(|e| Error::Factorization(format!("{e:?}")))?;
        let lu = mat.sp_lu().map_err(|e| Error::Factorization(format!("{e:?}")))?;
        Ok(Self { layout, k, stretch, row_ptr, col_idx, vals, lu })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn len(&self) -> usize {
        self.layout.extended.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `A u` for an extended-grid vector.
    pub fn apply(&self, u: &[C64]) -> Vec<C64> {
        (0..self.len())
            .map(|r| (self.row_ptr[r]..self.row_ptr[r + 1]).map(|e| self.vals[e] * u[self.col_idx[e]]).sum())
            .collect()
    }

    /// `A^H u`.
    pub fn apply_adjoint(&self, u: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.len()];
        for r in 0..self.len() {
            for e in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[self.col_idx[e]] += self.vals[e].conj() * u[r];
            }
        }
        out
    }

    /// Converts a physical source `f` on the extended grid into the right-hand side `s_x s_y f`.
    pub fn source_rhs(&self, f: &[C64]) -> Vec<C64> {
        f.iter().zip(&self.stretch).map(|(a, s)| a * s).collect()
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.len() {
            return Err(Error::ShapeMismatch { expected: vec![self.len()], found: vec![len] });
        }
        Ok(())
    }

    /// Solves `A u = rhs` on the extended grid.
    pub fn solve(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        self.check_len(rhs.len())?;
        let mut b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.lu.solve_in_place(b.as_mut());
        Ok(b.col(0).iter().copied().collect())
    }

    /// Solves `A^H v = rhs` on the extended grid.
    pub fn solve_adjoint(&self, rhs: &[C64]) -> Result<Vec<C64>> {
        self.check_len(rhs.len())?;
        let mut b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        self.lu.solve_adjoint_in_place(b.as_mut());
        Ok(b.col(0).iter().copied().collect())
    }

    /// In-place block solve, one right-hand side per column.
    pub fn solve_block(&self, rhs: MatMut<'_, C64>) -> Result<()> {
        self.check_len(rhs.nrows())?;
        self.lu.solve_in_place(rhs);
        Ok(())
    }

    /// In-place adjoint block solve.
    pub fn solve_adjoint_block(&self, rhs: MatMut<'_, C64>) -> Result<()> {
        self.check_len(rhs.nrows())?;
        self.lu.solve_adjoint_in_place(rhs);
        Ok(())
    }

    /// Total field for a physical source sampled on the extended grid.
    pub fn solve_source(&self, f: &[C64]) -> Result<WaveField> {
        self.check_len(f.len())?;
        let u = self.solve(&self.source_rhs(f))?;
        Ok(self.wave_field(&u, false))
    }

    /// Restricts an extended solution to the physical grid.
    pub fn wave_field(&self, ext: &[C64], scattered: bool) -> WaveField {
        WaveField { grid: self.layout.physical, k: self.k, values: self.layout.restrict(ext), scattered }
    }

    /// Right-hand side `k^2 (1 - n) e^{i k d . x}` of the scattered-field equation, given the
    /// index `n` on physical nodes.
    pub fn plane_wave_source(&self, index_phys: &[f64], direction: Vec2<f64>) -> Vec<C64> {
        let k = self.k;
        let phys: Vec<C64> = (0..self.layout.physical.len())
            .map(|i| {
                let x = self.layout.physical.node_of(i);
                C64::from_polar(k * k * (1.0 - index_phys[i]), k * direction.dot(x))
            })
            .collect();
        self.layout.prolong(&phys)
    }

    /// Scattered field for incidence `e^{i k d . x}`, with `n` from `medium`.
    pub fn solve_plane_wave_scattered(&self, medium: &MediumField<f64>, direction: Vec2<f64>) -> Result<WaveField> {
        if (direction.norm() - 1.0).abs() > 1e-12 {
            return invalid("plane-wave direction must be a unit vector");
        }
        let index: Vec<f64> = (0..self.layout.physical.len()).map(|i| medium.eval(self.layout.physical.node_of(i)).n).collect();
        let f = self.plane_wave_source(&index, direction);
        let u = self.solve(&self.source_rhs(&f))?;
        Ok(self.wave_field(&u, true))
    }
}

/// `<a, b> = sum conj(a_i) b_i`.
pub fn inner(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
