//! Husimi-data misfit with its adjoint-state gradient, an L-BFGS driver, and the plane-wave
//! full-waveform baseline.

use std::f64::consts::PI;

use faer::Mat;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forward_map::{restrict_block, solve_beams, source_blocks, ScatterDataset};
use crate::grid::GridSpec;
use crate::helmholtz::{HelmholtzOp, SolverOptions, C64};
use crate::measurement::{dir, MeasurementGrid};
use crate::parallel::map_blocks;
use crate::phase_space::{husimi_prefactor, HusimiOperator};
use crate::scalar::Vec2;

/// Physical node indices inside the open disk of radius `r`.
pub fn support_mask(grid: &GridSpec<f64>, r: f64) -> Vec<usize> {
    (0..grid.len()).filter(|&i| grid.node_of(i).norm() < r).collect()
}

/// Relative discrete L2 error `||a - b|| / ||b||`.
pub fn relative_l2(estimate: &[f64], truth: &[f64]) -> f64 {
    let num: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b) * (a - b)).sum();
    let den: f64 = truth.iter().map(|b| b * b).sum();
    if den == 0.0 {
        num.sqrt()
    } else {
        (num / den).sqrt()
    }
}

fn check_index(q: &[f64]) {
    let min = q.iter().cloned().fold(f64::INFINITY, f64::min);
    if 1.0 + min <= 0.0 {
        warn!("refractive index is not positive: min n = {:.3e}", 1.0 + min);
    }
}

/// Fixed problem data for the Husimi misfit.
pub struct InversionContext {
    pub k: f64,
    pub sigma: f64,
    pub mgrid: MeasurementGrid,
    pub grid: GridSpec<f64>,
    pub solver: SolverOptions,
    pub block: usize,
    pub threads: usize,
    husimi: HusimiOperator,
    mask: Vec<usize>,
}

impl InversionContext {
    pub fn new(k: f64, sigma: f64, mgrid: MeasurementGrid, grid: GridSpec<f64>, support_radius: f64, solver: SolverOptions) -> Result<Self> {
        let husimi = HusimiOperator::new(&grid, k, &mgrid)?;
        let mask = support_mask(&grid, support_radius);
        if mask.is_empty() {
            return invalid("support mask contains no grid nodes");
        }
        Ok(Self { k, sigma, mgrid, grid, solver, block: 32, threads: 1, husimi, mask })
    }

    pub fn mask(&self) -> &[usize] {
        &self.mask
    }

    /// Masked unknowns to a full physical-grid contrast (zero outside the mask).
    pub fn expand(&self, m: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.grid.len()];
        for (&i, &v) in self.mask.iter().zip(m) {
            q[i] = v;
        }
        q
    }

    pub fn restrict(&self, q: &[f64]) -> Vec<f64> {
        self.mask.iter().map(|&i| q[i]).collect()
    }

    fn operator(&self, q: &[f64]) -> Result<HelmholtzOp> {
        if q.len() != self.grid.len() {
            return Err(Error::ShapeMismatch { expected: vec![self.grid.n(), self.grid.n()], found: vec![q.len()] });
        }
        check_index(q);
        HelmholtzOp::from_contrast(q, self.k, self.grid, &self.solver)
    }

    /// Husimi data for contrast `q` on the physical grid.
    pub fn simulate(&self, q: &[f64]) -> Result<Vec<f64>> {
        let op = self.operator(q)?;
        crate::forward_map::simulate(&op, &self.husimi, &self.mgrid, self.sigma, self.block, self.threads)
    }

    /// Dataset generated by this discretization.
    pub fn dataset(&self, q: &[f64]) -> Result<ScatterDataset> {
        ScatterDataset::new(self.mgrid.clone(), self.k, self.sigma, self.simulate(q)?)
    }

    fn check_data(&self, data: &[f64]) -> Result<()> {
        let n = self.mgrid.n_sources() * self.mgrid.n_receivers();
        if data.len() != n {
            return Err(Error::ShapeMismatch { expected: self.mgrid.shape().to_vec(), found: vec![data.len()] });
        }
        Ok(())
    }
}

/// `J = (2 M)^{-1} sum (D - H)^2` with `M` the number of data.
pub fn misfit(ctx: &InversionContext, q: &[f64], data: &[f64]) -> Result<f64> {
    ctx.check_data(data)?;
    let sim = ctx.simulate(q)?;
    Ok(sim.iter().zip(data).map(|(h, d)| (d - h) * (d - h)).sum::<f64>() / (2.0 * data.len() as f64))
}

/// Misfit and its gradient with respect to `q` on the physical grid; entries outside the
/// support mask are zero.
pub fn misfit_gradient(ctx: &InversionContext, q: &[f64], data: &[f64]) -> Result<(f64, Vec<f64>)> {
    ctx.check_data(data)?;
    let op = ctx.operator(q)?;
    let m = data.len() as f64;
    let c0 = husimi_prefactor(ctx.k);
    let scale = 2.0 * c0 * ctx.k * ctx.k / m;
    let per = ctx.mgrid.n_receivers();
    let layout = op.layout();
    let phys_idx = layout.physical_indices();
    let blocks = source_blocks(ctx.mgrid.n_sources(), ctx.block);
    let parts = map_blocks(blocks.len(), ctx.threads, |b| {
        let (first, count) = blocks[b];
        let ext = solve_beams(&op, &ctx.mgrid, ctx.sigma, first, count)?;
        let u = restrict_block(&op, &ext);
        let amps = ctx.husimi.amplitudes(u.as_ref(), first)?;
        let mut j = 0.0;
        let mut w = Vec::with_capacity(amps.len());
        for (i, a) in amps.iter().enumerate() {
            let r = data[first * per + i] - c0 * a.norm_sqr();
            j += r * r;
            w.push(a * r);
        }
        let g = ctx.husimi.adjoint(&w, count, first);
        let mut rhs = Mat::<C64>::zeros(layout.extended.len(), count);
        for c in 0..count {
            for (p, &e) in phys_idx.iter().enumerate() {
                rhs[(e, c)] = g[(p, c)];
            }
        }
        op.solve_adjoint_block(rhs.as_mut()).map_err(|e| Error::Source { index: first, reason: e.to_string() })?;
        let mut grad = vec![0.0; ctx.mask.len()];
        for c in 0..count {
            for (slot, &p) in grad.iter_mut().zip(&ctx.mask) {
                *slot += (u[(p, c)].conj() * rhs[(phys_idx[p], c)]).re;
            }
        }
        Ok((j, grad))
    })?;
    let mut j = 0.0;
    let mut grad_m = vec![0.0; ctx.mask.len()];
    for (pj, pg) in parts {
        j += pj;
        for (a, b) in grad_m.iter_mut().zip(pg) {
            *a += b;
        }
    }
    grad_m.iter_mut().for_each(|g| *g *= scale);
    Ok((j / (2.0 * m), ctx.expand(&grad_m)))
}

pub fn gradient(ctx: &InversionContext, q: &[f64], data: &[f64]) -> Result<Vec<f64>> {
    Ok(misfit_gradient(ctx, q, data)?.1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop when `||g||_inf <= grad_tol`.
    pub grad_tol: f64,
    pub c1: f64,
    pub c2: f64,
    /// Largest entry of the first trial step.
    pub initial_step: f64,
    pub max_line_evals: usize,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self { memory: 10, max_iter: 300, grad_tol: 1e-5, c1: 1e-4, c2: 0.9, initial_step: 0.05, max_line_evals: 25 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
}

impl StopReason {
    pub fn name(self) -> &'static str {
        match self {
            StopReason::GradientTolerance => "gradient_tolerance",
            StopReason::MaxIterations => "max_iterations",
            StopReason::LineSearchFailed => "line_search_failed",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub misfit: f64,
    pub grad_norm: f64,
    pub rel_l2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn axpy(x: &[f64], alpha: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + alpha * b).collect()
}

/// Minimizer of the cubic through `(a, fa, da)` and `(b, fb, db)`, kept inside the middle 80%
/// of the interval.
fn cubic_step(a: f64, fa: f64, da: f64, b: f64, fb: f64, db: f64) -> f64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let width = hi - lo;
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    let mut t = if disc >= 0.0 {
        let d2 = (b - a).signum() * disc.sqrt();
        b - (b - a) * (db + d2 - d1) / (db - da + 2.0 * d2)
    } else {
        f64::NAN
    };
    if !t.is_finite() {
        t = 0.5 * (lo + hi);
    }
    t.clamp(lo + 0.1 * width, hi - 0.1 * width)
}

struct Point {
    alpha: f64,
    f: f64,
    d: f64,
    g: Vec<f64>,
}

/// Strong-Wolfe line search along `dir`. Returns the accepted point or, on failure, the best
/// point with sufficient decrease if one was seen.
fn line_search<F>(eval: &mut F, x: &[f64], f0: f64, d0: f64, dir: &[f64], alpha0: f64, opts: &LbfgsOptions, evals: &mut usize) -> Result<std::result::Result<Point, Option<Point>>>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut probe = |alpha: f64, evals: &mut usize| -> Result<Point> {
        *evals += 1;
        let (f, g) = eval(&axpy(x, alpha, dir))?;
        let d = dot(&g, dir);
        Ok(Point { alpha, f, d, g })
    };
    let armijo = |p: &Point| p.f <= f0 + opts.c1 * p.alpha * d0;
    let curvature = |p: &Point| p.d.abs() <= -opts.c2 * d0;
    let mut best: Option<Point> = None;
    let keep = |best: &mut Option<Point>, p: &Point| {
        if p.f.is_finite() && p.f < f0 + opts.c1 * p.alpha * d0 && best.as_ref().is_none_or(|b| p.f < b.f) {
            *best = Some(Point { alpha: p.alpha, f: p.f, d: p.d, g: p.g.clone() });
        }
    };
    let mut prev = Point { alpha: 0.0, f: f0, d: d0, g: Vec::new() };
    let mut alpha = alpha0;
    let mut used = 0;
    let (mut lo, mut hi) = loop {
        if used >= opts.max_line_evals {
            return Ok(Err(best));
        }
        let p = probe(alpha, evals)?;
        used += 1;
        keep(&mut best, &p);
        if !p.f.is_finite() || !armijo(&p) || (used > 1 && p.f >= prev.f) {
            break (prev, p);
        }
        if curvature(&p) {
            return Ok(Ok(p));
        }
        if p.d >= 0.0 {
            break (p, prev);
        }
        alpha = 2.0 * p.alpha;
        prev = p;
    };
    loop {
        if used >= opts.max_line_evals || (hi.alpha - lo.alpha).abs() <= 1e-14 * lo.alpha.abs().max(1e-300) {
            return Ok(Err(best));
        }
        let trial = if hi.f.is_finite() { cubic_step(lo.alpha, lo.f, lo.d, hi.alpha, hi.f, hi.d) } else { 0.5 * (lo.alpha + hi.alpha) };
        let p = probe(trial, evals)?;
        used += 1;
        keep(&mut best, &p);
        if !p.f.is_finite() || !armijo(&p) || p.f >= lo.f {
            hi = p;
        } else {
            if curvature(&p) {
                return Ok(Ok(p));
            }
            if p.d * (hi.alpha - lo.alpha) >= 0.0 {
                hi = lo;
            }
            lo = p;
        }
    }
}

/// Limited-memory BFGS with a strong-Wolfe line search. `observe` is called with the
/// iteration count, iterate, misfit and gradient after every accepted step (and at start).
pub fn lbfgs<F, O>(x0: Vec<f64>, mut eval: F, opts: &LbfgsOptions, mut observe: O) -> Result<LbfgsResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    O: FnMut(usize, &[f64], f64, &[f64]),
{
    if opts.memory == 0 || !(0.0 < opts.c1 && opts.c1 < opts.c2 && opts.c2 < 1.0) {
        return invalid("L-BFGS needs memory > 0 and 0 < c1 < c2 < 1");
    }
    let mut x = x0;
    let (mut f, mut g) = eval(&x)?;
    let mut evaluations = 1;
    observe(0, &x, f, &g);
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut iter = 0;
    let status = loop {
        if inf_norm(&g) <= opts.grad_tol {
            break StopReason::GradientTolerance;
        }
        if iter >= opts.max_iter {
            break StopReason::MaxIterations;
        }
        // two-loop recursion
        let mut qv: Vec<f64> = g.clone();
        let mut alphas = vec![0.0; s_hist.len()];
        for i in (0..s_hist.len()).rev() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            alphas[i] = rho * dot(&s_hist[i], &qv);
            qv = axpy(&qv, -alphas[i], &y_hist[i]);
        }
        let gamma = match (s_hist.last(), y_hist.last()) {
            (Some(s), Some(y)) => dot(s, y) / dot(y, y),
            _ => opts.initial_step / inf_norm(&g),
        };
        let mut r: Vec<f64> = qv.iter().map(|v| gamma * v).collect();
        for i in 0..s_hist.len() {
            let rho = 1.0 / dot(&y_hist[i], &s_hist[i]);
            let beta = rho * dot(&y_hist[i], &r);
            r = axpy(&r, alphas[i] - beta, &s_hist[i]);
        }
        let mut direction: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut d0 = dot(&g, &direction);
        if !(d0 < 0.0) {
            s_hist.clear();
            y_hist.clear();
            let step = opts.initial_step / inf_norm(&g);
            direction = g.iter().map(|v| -step * v).collect();
            d0 = dot(&g, &direction);
        }
        let accepted = match line_search(&mut eval, &x, f, d0, &direction, 1.0, opts, &mut evaluations)? {
            Ok(p) => p,
            Err(Some(p)) => {
                warn!("line search did not meet the curvature condition; taking the best decrease");
                p
            }
            Err(None) => break StopReason::LineSearchFailed,
        };
        let s: Vec<f64> = direction.iter().map(|v| accepted.alpha * v).collect();
        let y: Vec<f64> = accepted.g.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        x = axpy(&x, 1.0, &s);
        f = accepted.f;
        g = accepted.g;
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            s_hist.push(s);
            y_hist.push(y);
            if s_hist.len() > opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        iter += 1;
        observe(iter, &x, f, &g);
    };
    Ok(LbfgsResult { x, f, grad: g, iterations: iter, evaluations, status })
}

/// Outcome of a reconstruction.
#[derive(Clone, Debug, PartialEq)]
pub struct InversionRun {
    pub history: Vec<IterRecord>,
    /// Final contrast on the physical inversion grid.
    pub q: Vec<f64>,
    pub status: StopReason,
    pub evaluations: usize,
}

impl InversionRun {
    pub fn final_rel_l2(&self) -> Option<f64> {
        self.history.last().and_then(|h| h.rel_l2)
    }
}

fn run_lbfgs<F>(mask_len: usize, expand: impl Fn(&[f64]) -> Vec<f64>, restrict: impl Fn(&[f64]) -> Vec<f64>, eval_full: F, truth: Option<&[f64]>, opts: &LbfgsOptions) -> Result<InversionRun>
where
    F: Fn(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut history = Vec::new();
    let result = lbfgs(
        vec![0.0; mask_len],
        |m| {
            let q = expand(m);
            // trial steps past n = 0 are rejected by the line search
            if q.iter().any(|v| 1.0 + v <= 0.0) {
                return Ok((f64::INFINITY, vec![0.0; m.len()]));
            }
            let (f, g) = eval_full(&q)?;
            Ok((f, restrict(&g)))
        },
        opts,
        |iter, m, f, g| {
            let rel = truth.map(|t| relative_l2(&expand(m), t));
            let rec = IterRecord { iter, misfit: f, grad_norm: inf_norm(g), rel_l2: rel };
            info!("iter {iter}: misfit {f:.6e} |g|inf {:.3e} rel_l2 {:?}", rec.grad_norm, rel);
            history.push(rec);
        },
    )?;
    Ok(InversionRun { history, q: expand(&result.x), status: result.status, evaluations: result.evaluations })
}

/// L-BFGS reconstruction from Husimi data starting at `q = 0`.
pub fn reconstruct(data: &ScatterDataset, ctx: &InversionContext, truth: Option<&[f64]>, opts: &LbfgsOptions) -> Result<InversionRun> {
    if data.shape() != ctx.mgrid.shape() {
        return Err(Error::ShapeMismatch { expected: ctx.mgrid.shape().to_vec(), found: data.shape().to_vec() });
    }
    run_lbfgs(ctx.mask.len(), |m| ctx.expand(m), |q| ctx.restrict(q), |q| misfit_gradient(ctx, q, &data.values), truth, opts)
}

/// Bilinear interpolation weights of a point on the physical grid.
fn bilinear(grid: &GridSpec<f64>, p: Vec2<f64>) -> Result<[(usize, f64); 4]> {
    let n = grid.n();
    let fx = grid.locate(p.x);
    let fy = grid.locate(p.y);
    if !(fx >= 0.0 && fy >= 0.0 && fx <= (n - 1) as f64 && fy <= (n - 1) as f64) {
        return invalid(format!("receiver ({:.3}, {:.3}) outside the grid", p.x, p.y));
    }
    let ix = (fx.floor() as usize).min(n - 2);
    let iy = (fy.floor() as usize).min(n - 2);
    let (tx, ty) = (fx - ix as f64, fy - iy as f64);
    Ok([
        (grid.index(ix, iy), (1.0 - tx) * (1.0 - ty)),
        (grid.index(ix + 1, iy), tx * (1.0 - ty)),
        (grid.index(ix, iy + 1), (1.0 - tx) * ty),
        (grid.index(ix + 1, iy + 1), tx * ty),
    ])
}

/// Plane-wave scattering setup with receivers on a circle.
pub struct FwiContext {
    pub k: f64,
    pub grid: GridSpec<f64>,
    pub solver: SolverOptions,
    /// Incident directions `2 pi i / n`.
    pub directions: Vec<f64>,
    pub block: usize,
    pub threads: usize,
    receivers: Vec<[(usize, f64); 4]>,
    mask: Vec<usize>,
}

impl FwiContext {
    pub fn new(k: f64, grid: GridSpec<f64>, receiver_radius: f64, n_dirs: usize, n_rcv: usize, support_radius: f64, solver: SolverOptions) -> Result<Self> {
        if n_dirs == 0 || n_rcv == 0 {
            return invalid("need at least one direction and one receiver");
        }
        let receivers = (0..n_rcv).map(|j| bilinear(&grid, dir(2.0 * PI * j as f64 / n_rcv as f64) * receiver_radius)).collect::<Result<_>>()?;
        let mask = support_mask(&grid, support_radius);
        if mask.is_empty() {
            return invalid("support mask contains no grid nodes");
        }
        let directions = (0..n_dirs).map(|i| 2.0 * PI * i as f64 / n_dirs as f64).collect();
        Ok(Self { k, grid, solver, directions, block: 32, threads: 1, receivers, mask })
    }

    pub fn n_receivers(&self) -> usize {
        self.receivers.len()
    }

    pub fn mask(&self) -> &[usize] {
        &self.mask
    }

    pub fn expand(&self, m: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.grid.len()];
        for (&i, &v) in self.mask.iter().zip(m) {
            q[i] = v;
        }
        q
    }

    pub fn restrict(&self, q: &[f64]) -> Vec<f64> {
        self.mask.iter().map(|&i| q[i]).collect()
    }

    fn operator(&self, q: &[f64]) -> Result<HelmholtzOp> {
        if q.len() != self.grid.len() {
            return Err(Error::ShapeMismatch { expected: vec![self.grid.n(), self.grid.n()], found: vec![q.len()] });
        }
        check_index(q);
        HelmholtzOp::from_contrast(q, self.k, self.grid, &self.solver)
    }

    /// Scattered fields on the extended grid for directions `first..first + count`, and the
    /// incident fields on the physical grid.
    fn scattered_block(&self, op: &HelmholtzOp, q: &[f64], first: usize, count: usize) -> Result<(Mat<C64>, Mat<C64>)> {
        let layout = op.layout();
        let idx = layout.physical_indices();
        let k = self.k;
        let incident = Mat::from_fn(self.grid.len(), count, |p, c| C64::from_polar(1.0, k * dir(self.directions[first + c]).dot(self.grid.node_of(p))));
        let mut rhs = Mat::<C64>::zeros(layout.extended.len(), count);
        for c in 0..count {
            for (p, &e) in idx.iter().enumerate() {
                rhs[(e, c)] = incident[(p, c)] * (-k * k * q[p]);
            }
        }
        op.solve_block(rhs.as_mut()).map_err(|e| Error::Source { index: first, reason: e.to_string() })?;
        Ok((rhs, incident))
    }

    fn sample(&self, u_ext: &Mat<C64>, idx: &[usize], c: usize) -> Vec<C64> {
        self.receivers.iter().map(|w| w.iter().map(|&(p, t)| u_ext[(idx[p], c)] * t).sum()).collect()
    }

    /// Scattered-field samples, `[direction][receiver]`.
    pub fn data(&self, q: &[f64]) -> Result<Vec<C64>> {
        let op = self.operator(q)?;
        let idx = op.layout().physical_indices();
        let blocks = source_blocks(self.directions.len(), self.block);
        let parts = map_blocks(blocks.len(), self.threads, |b| {
            let (first, count) = blocks[b];
            let (us, _) = self.scattered_block(&op, q, first, count)?;
            Ok((0..count).flat_map(|c| self.sample(&us, &idx, c)).collect::<Vec<_>>())
        })?;
        Ok(parts.concat())
    }

    /// `J = (2 N)^{-1} sum |d - P u^s|^2` and its gradient on the physical grid.
    pub fn misfit_gradient(&self, q: &[f64], data: &[C64]) -> Result<(f64, Vec<f64>)> {
        let n_rcv = self.receivers.len();
        if data.len() != self.directions.len() * n_rcv {
            return Err(Error::ShapeMismatch { expected: vec![self.directions.len(), n_rcv], found: vec![data.len()] });
        }
        let op = self.operator(q)?;
        let layout = op.layout();
        let idx = layout.physical_indices();
        let k = self.k;
        let blocks = source_blocks(self.directions.len(), self.block);
        let parts = map_blocks(blocks.len(), self.threads, |b| {
            let (first, count) = blocks[b];
            let (us, ui) = self.scattered_block(&op, q, first, count)?;
            let mut j = 0.0;
            let mut rhs = Mat::<C64>::zeros(layout.extended.len(), count);
            for c in 0..count {
                let pred = self.sample(&us, &idx, c);
                for (r, (w, p)) in self.receivers.iter().zip(&pred).enumerate() {
                    let res = data[(first + c) * n_rcv + r] - p;
                    j += res.norm_sqr();
                    for &(node, t) in w {
                        rhs[(idx[node], c)] += res * t;
                    }
                }
            }
            op.solve_adjoint_block(rhs.as_mut()).map_err(|e| Error::Source { index: first, reason: e.to_string() })?;
            let mut grad = vec![0.0; self.mask.len()];
            for c in 0..count {
                for (slot, &p) in grad.iter_mut().zip(&self.mask) {
                    let total = ui[(p, c)] + us[(idx[p], c)];
                    *slot += (total.conj() * rhs[(idx[p], c)]).re;
                }
            }
            Ok((j, grad))
        })?;
        let n = data.len() as f64;
        let mut j = 0.0;
        let mut grad_m = vec![0.0; self.mask.len()];
        for (pj, pg) in parts {
            j += pj;
            for (a, b) in grad_m.iter_mut().zip(pg) {
                *a += b;
            }
        }
        grad_m.iter_mut().for_each(|g| *g *= k * k / n);
        Ok((j / (2.0 * n), self.expand(&grad_m)))
    }
}

/// L-BFGS reconstruction from plane-wave scattered data starting at `q = 0`.
pub fn fwi_baseline(data: &[C64], ctx: &FwiContext, truth: Option<&[f64]>, opts: &LbfgsOptions) -> Result<InversionRun> {
    run_lbfgs(ctx.mask.len(), |m| ctx.expand(m), |q| ctx.restrict(q), |q| ctx.misfit_gradient(q, data), truth, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lbfgs_minimizes_rosenbrock() {
        let rosen = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            let (a, b) = (x[0], x[1]);
            let f = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            Ok((f, vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]))
        };
        let mut fs = Vec::new();
        let opts = LbfgsOptions { grad_tol: 1e-10, initial_step: 0.1, ..LbfgsOptions::default() };
        let r = lbfgs(vec![-1.2, 1.0], rosen, &opts, |_, _, f, _| fs.push(f)).unwrap();
        assert_eq!(r.status, StopReason::GradientTolerance);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
        assert!(fs.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn lbfgs_never_accepts_infinite_trials() {
        // minimum at x = -2 lies beyond the wall at x = -1
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            if x[0] <= -1.0 {
                return Ok((f64::INFINITY, vec![0.0]));
            }
            Ok(((x[0] + 2.0).powi(2), vec![2.0 * (x[0] + 2.0)]))
        };
        let mut xs = Vec::new();
        let opts = LbfgsOptions { initial_step: 5.0, ..LbfgsOptions::default() };
        let r = lbfgs(vec![0.0], f, &opts, |_, x, f, _| xs.push((x[0], f))).unwrap();
        assert!(xs.iter().all(|(x, f)| *x > -1.0 && f.is_finite()));
        assert!(r.f < 4.0);
    }

    #[test]
    fn lbfgs_stops_at_stationary_start() {
        let r = lbfgs(vec![0.0; 3], |x| Ok((dot(x, x), x.iter().map(|v| 2.0 * v).collect())), &LbfgsOptions::default(), |_, _, _, _| {}).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.status, StopReason::GradientTolerance);
    }

    #[test]
    fn lbfgs_quadratic_is_exact() {
        let diag = [1.0, 10.0, 100.0, 1000.0];
        let f = |x: &[f64]| -> Result<(f64, Vec<f64>)> {
            Ok((0.5 * x.iter().zip(&diag).map(|(v, d)| d * (v - 1.0) * (v - 1.0)).sum::<f64>(), x.iter().zip(&diag).map(|(v, d)| d * (v - 1.0)).collect()))
        };
        let r = lbfgs(vec![0.0; 4], f, &LbfgsOptions { grad_tol: 1e-12, ..LbfgsOptions::default() }, |_, _, _, _| {}).unwrap();
        assert!(r.x.iter().all(|v| (v - 1.0).abs() < 1e-9));
    }

    #[test]
    fn cubic_step_finds_quadratic_minimum() {
        // f = (t - 0.3)^2 on [0, 1]
        let t = cubic_step(0.0, 0.09, -0.6, 1.0, 0.49, 1.4);
        assert!((t - 0.3).abs() < 1e-12);
    }

    #[test]
    fn relative_error() {
        assert_eq!(relative_l2(&[1.0, 2.0], &[1.0, 2.0]), 0.0);
        assert!((relative_l2(&[0.0, 0.0], &[3.0, 4.0]) - 1.0).abs() < 1e-15);
    }
}
