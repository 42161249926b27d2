//! Husimi and Wigner transforms of wave fields, and the boundary-integrated Husimi curves.
//!
//! The receiver filter is the coherent state
//! `phi_v^k(x) = k^{1/2} pi^{-1/2} exp(-k |x|^2 / 2) exp(-i k v . x)` and the Husimi
//! measurement is `H(x_r, v) = (k / 2 pi)^2 |int u(y) phi_v^k(y - x_r) dy|^2`, which selects
//! plane waves `e^{i k v . x}` travelling along `v`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use log::warn;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::grid::GridSpec;
use crate::helmholtz::{WaveField, C64};
use crate::measurement::{dir, MeasurementGrid};
use crate::scalar::{wrap_angle, Vec2};

/// Envelope level at which the filter is truncated.
pub const FILTER_CUTOFF: f64 = 1e-8;

/// Radius where `exp(-k r^2 / 2)` falls to [`FILTER_CUTOFF`].
pub fn filter_radius(k: f64) -> f64 {
    (-2.0 * FILTER_CUTOFF.ln() / k).sqrt()
}

/// `(k / 2 pi)^2`.
pub fn husimi_prefactor(k: f64) -> f64 {
    (k / (2.0 * PI)).powi(2)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReceiverFilter {
    pub k: f64,
    pub direction: Vec2<f64>,
}

impl ReceiverFilter {
    pub fn new(k: f64, direction: Vec2<f64>) -> Result<Self> {
        if !(k > 0.0) || (direction.norm() - 1.0).abs() > 1e-12 {
            return invalid("filter needs k > 0 and a unit direction");
        }
        Ok(Self { k, direction })
    }

    pub fn value(&self, x: Vec2<f64>) -> C64 {
        let k = self.k;
        let amp = (k / PI).sqrt() * (-0.5 * k * x.norm_sq()).exp();
        C64::from_polar(amp, -k * self.direction.dot(x))
    }
}

/// Physical node indices within the filter ball around `center`, and whether the ball
/// reaches outside the grid.
fn ball_nodes(grid: &GridSpec<f64>, center: Vec2<f64>, radius: f64) -> (Vec<usize>, bool) {
    let xs = grid.index_range(center.x - radius, center.x + radius);
    let ys = grid.index_range(center.y - radius, center.y + radius);
    let r2 = radius * radius;
    let mut nodes = Vec::new();
    for iy in ys {
        for ix in xs.clone() {
            if (grid.node(ix, iy) - center).norm_sq() <= r2 {
                nodes.push(grid.index(ix, iy));
            }
        }
    }
    let clipped = !grid.contains(center + Vec2::new(radius, radius)) || !grid.contains(center - Vec2::new(radius, radius));
    (nodes, clipped)
}

/// `sum_y u(y) phi_v^k(y - x_r) h^2` over the truncation ball.
pub fn filtered_amplitude(u: &WaveField, filter: &ReceiverFilter, x_r: Vec2<f64>) -> C64 {
    let h = u.grid.spacing();
    let (nodes, clipped) = ball_nodes(&u.grid, x_r, filter_radius(filter.k));
    if clipped {
        warn!("filter ball around ({:.3}, {:.3}) leaves the computational domain", x_r.x, x_r.y);
    }
    nodes.iter().map(|&i| u.values[i] * filter.value(u.grid.node_of(i) - x_r)).sum::<C64>() * (h * h)
}

/// Husimi value at one receiver.
pub fn husimi_point(u: &WaveField, filter: &ReceiverFilter, x_r: Vec2<f64>) -> Result<f64> {
    if (filter.k - u.k).abs() > 1e-12 * u.k {
        return invalid("filter and field wavenumbers differ");
    }
    Ok(husimi_prefactor(u.k) * filtered_amplitude(u, filter, x_r).norm_sqr())
}

struct Station {
    nodes: Vec<usize>,
    /// `n_o x n_nodes`, entries `phi_{v_o}(y - x_station) h^2`.
    kernel: Mat<C64>,
}

/// Precomputed receiver kernels for all receivers of a measurement grid on a fixed physical
/// grid. Receivers at the same absolute position share one kernel.
pub struct HusimiOperator {
    k: f64,
    n_phys: usize,
    n_r: usize,
    n_o: usize,
    stations: Vec<Station>,
    /// `route[src * n_r + ir]` = station index.
    route: Vec<usize>,
}

impl HusimiOperator {
    pub fn new(grid: &GridSpec<f64>, k: f64, mgrid: &MeasurementGrid) -> Result<Self> {
        let n_r = mgrid.theta_r.len();
        let n_o = mgrid.theta_o.len();
        let h = grid.spacing();
        let radius = filter_radius(k);
        let mut keys: HashMap<i64, usize> = HashMap::new();
        let mut stations = Vec::new();
        let mut route = Vec::with_capacity(mgrid.n_sources() * n_r);
        let mut clipped_any = false;
        for src in 0..mgrid.n_sources() {
            let base = mgrid.receiver_base(src);
            for &tr in &mgrid.theta_r {
                let a = wrap_angle(base + tr);
                let key = (a * 1e9).round() as i64 % (2.0 * PI * 1e9).round() as i64;
                let idx = match keys.get(&key) {
                    Some(&i) => i,
                    None => {
                        let x = dir(a) * mgrid.radius;
                        let (nodes, clipped) = ball_nodes(grid, x, radius);
                        clipped_any |= clipped;
                        let kernel = Mat::from_fn(n_o, nodes.len(), |io, j| {
                            let f = ReceiverFilter { k, direction: dir(a + mgrid.theta_o[io]) };
                            f.value(grid.node_of(nodes[j]) - x) * (h * h)
                        });
                        stations.push(Station { nodes, kernel });
                        keys.insert(key, stations.len() - 1);
                        stations.len() - 1
                    }
                };
                route.push(idx);
            }
        }
        if clipped_any {
            warn!("receiver filter balls (radius {radius:.3}) leave the computational domain");
        }
        Ok(Self { k, n_phys: grid.len(), n_r, n_o, stations, route })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn receivers_per_source(&self) -> usize {
        self.n_r * self.n_o
    }

    /// Filtered amplitudes `a[b][ir][io]` for fields in the columns of `u`
    /// (physical grid, one column per source starting at `first_src`).
    pub fn amplitudes(&self, u: MatRef<'_, C64>, first_src: usize) -> Result<Vec<C64>> {
        if u.nrows() != self.n_phys {
            return Err(Error::ShapeMismatch { expected: vec![self.n_phys], found: vec![u.nrows()] });
        }
        let nb = u.ncols();
        let per = self.n_r * self.n_o;
        let mut out = vec![C64::new(0.0, 0.0); nb * per];
        // station -> list of (block column, ir)
        let mut uses: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.stations.len()];
        for b in 0..nb {
            for ir in 0..self.n_r {
                uses[self.route[(first_src + b) * self.n_r + ir]].push((b, ir));
            }
        }
        for (s, st) in self.stations.iter().enumerate() {
            if uses[s].is_empty() {
                continue;
            }
            let gathered = Mat::from_fn(st.nodes.len(), nb, |j, b| u[(st.nodes[j], b)]);
            let mut prod = Mat::<C64>::zeros(self.n_o, nb);
            matmul(prod.as_mut(), Accum::Replace, st.kernel.as_ref(), gathered.as_ref(), C64::new(1.0, 0.0), Par::Seq);
            for &(b, ir) in &uses[s] {
                for io in 0..self.n_o {
                    out[b * per + ir * self.n_o + io] = prod[(io, b)];
                }
            }
        }
        Ok(out)
    }

    /// Husimi values for a block of sources, laid out `[b][ir][io]`.
    pub fn husimi(&self, u: MatRef<'_, C64>, first_src: usize) -> Result<Vec<f64>> {
        let c0 = husimi_prefactor(self.k);
        Ok(self.amplitudes(u, first_src)?.iter().map(|a| c0 * a.norm_sqr()).collect())
    }

    /// Adjoint of [`Self::amplitudes`]: for weights `w[b][ir][io]` returns the physical-grid
    /// fields `g_b = sum conj(kernel) w`, one column per source.
    pub fn adjoint(&self, w: &[C64], nb: usize, first_src: usize) -> Mat<C64> {
        let per = self.n_r * self.n_o;
        let mut g = Mat::<C64>::zeros(self.n_phys, nb);
        let mut uses: Vec<Vec<(usize, usize)>> = vec![Vec::new(); self.stations.len()];
        for b in 0..nb {
            for ir in 0..self.n_r {
                uses[self.route[(first_src + b) * self.n_r + ir]].push((b, ir));
            }
        }
        for (s, st) in self.stations.iter().enumerate() {
            if uses[s].is_empty() {
                continue;
            }
            let mut wm = Mat::<C64>::zeros(self.n_o, nb);
            for &(b, ir) in &uses[s] {
                for io in 0..self.n_o {
                    wm[(io, b)] += w[b * per + ir * self.n_o + io];
                }
            }
            let mut part = Mat::<C64>::zeros(st.nodes.len(), nb);
            matmul(part.as_mut(), Accum::Replace, st.kernel.adjoint(), wm.as_ref(), C64::new(1.0, 0.0), Par::Seq);
            for (j, &node) in st.nodes.iter().enumerate() {
                for b in 0..nb {
                    g[(node, b)] += part[(j, b)];
                }
            }
        }
        g
    }
}

/// Husimi values over `(theta_r, theta_o)` for one source, row-major in `theta_o`.
pub fn husimi_grid(u: &WaveField, mgrid: &MeasurementGrid, src: usize) -> Result<Vec<f64>> {
    if src >= mgrid.n_sources() {
        return invalid(format!("source index {src} out of range"));
    }
    let n_r = mgrid.theta_r.len();
    let n_o = mgrid.theta_o.len();
    let mut out = Vec::with_capacity(n_r * n_o);
    for ir in 0..n_r {
        for io in 0..n_o {
            let (x, v) = mgrid.receiver(src, ir, io);
            out.push(husimi_point(u, &ReceiverFilter { k: u.k, direction: v }, x)?);
        }
    }
    Ok(out)
}

fn uniform_step(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return invalid("angle grid needs at least two values");
    }
    let d = values[1] - values[0];
    if values.windows(2).any(|w| ((w[1] - w[0]) - d).abs() > 1e-9 * d.abs().max(1.0)) {
        return invalid("angle grid is not uniform");
    }
    Ok(d)
}

/// `M_o(theta_r) = int H(theta_r, theta_o) d theta_o`, trapezoid rule with zero endpoint values.
pub fn integrate_m_o(h: &[f64], mgrid: &MeasurementGrid) -> Result<Vec<f64>> {
    let n_r = mgrid.theta_r.len();
    let n_o = mgrid.theta_o.len();
    if h.len() != n_r * n_o {
        return Err(Error::ShapeMismatch { expected: vec![n_r, n_o], found: vec![h.len()] });
    }
    let d = uniform_step(&mgrid.theta_o)?;
    Ok((0..n_r).map(|ir| h[ir * n_o..(ir + 1) * n_o].iter().sum::<f64>() * d).collect())
}

/// `M_r(theta_or) = int H(theta_r, theta_or - theta_r) d theta_r` over the admissible `theta_r`,
/// indexed by `theta_or` on the `theta_r` grid. Requires `theta_o` values to be multiples of
/// the `theta_r` step.
pub fn integrate_m_r(h: &[f64], mgrid: &MeasurementGrid) -> Result<Vec<f64>> {
    let n_r = mgrid.theta_r.len();
    let n_o = mgrid.theta_o.len();
    if h.len() != n_r * n_o {
        return Err(Error::ShapeMismatch { expected: vec![n_r, n_o], found: vec![h.len()] });
    }
    let d = uniform_step(&mgrid.theta_r)?;
    if ((n_r as f64) * d - 2.0 * PI).abs() > 1e-9 {
        return invalid("theta_r grid must cover the full circle");
    }
    let shifts: Vec<i64> = mgrid
        .theta_o
        .iter()
        .map(|&t| {
            let s = t / d;
            if (s - s.round()).abs() > 1e-9 {
                Err(Error::InvalidParameter("theta_o is not commensurate with the theta_r step".into()))
            } else {
                Ok(s.round() as i64)
            }
        })
        .collect::<Result<_>>()?;
    let mut out = vec![0.0; n_r];
    for ir in 0..n_r {
        for (io, &s) in shifts.iter().enumerate() {
            let m = (ir as i64 + s).rem_euclid(n_r as i64) as usize;
            out[m] += h[ir * n_o + io] * d;
        }
    }
    Ok(out)
}

/// Separable box window with a raised-cosine taper on the lag variable `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WignerWindow {
    /// Half-width of the lag box.
    pub half_width: f64,
    /// Fraction of the half-width occupied by the taper, in `[0, 1]`.
    pub taper: f64,
}

impl WignerWindow {
    /// Lag half-width `min(domain half-width, 20 / (sigma k))` with a 20% taper.
    pub fn for_beam(grid: &GridSpec<f64>, k: f64, sigma: f64) -> Self {
        Self { half_width: grid.half_width.min(20.0 / (sigma * k)), taper: 0.2 }
    }

    fn weight1(&self, t: f64) -> f64 {
        let a = t.abs();
        let flat = (1.0 - self.taper) * self.half_width;
        if a <= flat {
            1.0
        } else if a >= self.half_width {
            0.0
        } else {
            0.5 * (1.0 + (PI * (a - flat) / (self.half_width - flat)).cos())
        }
    }
}

/// Wigner transform at one grid node on the periodic velocity grid
/// `v = (jx, jy) * v_step`, `j` in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerSlice {
    pub x: Vec2<f64>,
    pub v_step: f64,
    pub size: usize,
    /// `values[jy * size + jx]`.
    pub values: Vec<C64>,
}

impl WignerSlice {
    /// Centered frequency index for FFT position `j`.
    pub fn centered(&self, j: usize) -> i64 {
        if j < self.size / 2 {
            j as i64
        } else {
            j as i64 - self.size as i64
        }
    }

    pub fn velocity(&self, jx: usize, jy: usize) -> Vec2<f64> {
        Vec2::new(self.centered(jx) as f64, self.centered(jy) as f64) * self.v_step
    }

    /// Cell area in velocity space.
    pub fn dv2(&self) -> f64 {
        self.v_step * self.v_step
    }
}

fn check_pair(u1: &WaveField, u2: &WaveField) -> Result<()> {
    if u1.grid != u2.grid || (u1.k - u2.k).abs() > 1e-12 * u1.k {
        return invalid("Wigner transform needs fields on the same grid and wavenumber");
    }
    Ok(())
}

struct Lags {
    m: usize,
    values: Vec<C64>,
    /// Share of `sum |u1(x - z) u2(x + z)|` carried by lags with window weight below one.
    tapered: f64,
}

/// Lag products `w(z) u1(x - z) conj(u2)(x + z)` on the box `|m_x|, |m_y| <= m`, `z = h m`.
/// Near the grid edge the window shrinks per axis to the distance from the edge.
fn lag_products(u1: &WaveField, u2: &WaveField, ix: usize, iy: usize, window: &WignerWindow) -> Lags {
    let g = &u1.grid;
    let h = g.spacing();
    let n = g.n();
    let m = (window.half_width / h + 1e-9).floor() as usize;
    let side = 2 * m + 1;
    let reach = |i: usize| ((i.min(n - 1 - i)) as f64 * h).min(window.half_width);
    let wx = WignerWindow { half_width: reach(ix), taper: window.taper };
    let wy = WignerWindow { half_width: reach(iy), taper: window.taper };
    let (mx_max, my_max) = (((wx.half_width / h) + 1e-9).floor() as i64, ((wy.half_width / h) + 1e-9).floor() as i64);
    let mut values = vec![C64::new(0.0, 0.0); side * side];
    let (mut total, mut cut) = (0.0, 0.0);
    let mi = m as i64;
    for my in -my_max..=my_max {
        let ya = (iy as i64 - my) as usize;
        let yb = (iy as i64 + my) as usize;
        let wyv = if wy.half_width > 0.0 { wy.weight1(my as f64 * h) } else { 1.0 };
        for mx in -mx_max..=mx_max {
            let xa = (ix as i64 - mx) as usize;
            let xb = (ix as i64 + mx) as usize;
            let wxv = if wx.half_width > 0.0 { wx.weight1(mx as f64 * h) } else { 1.0 };
            let raw = u1.values[g.index(xa, ya)] * u2.values[g.index(xb, yb)].conj();
            let w = wxv * wyv;
            let a = raw.norm();
            total += a;
            if w < 1.0 {
                cut += a * (1.0 - w);
            }
            values[((my + mi) as usize) * side + (mx + mi) as usize] = raw * w;
        }
    }
    Lags { m, values, tapered: if total > 0.0 { cut / total } else { 0.0 } }
}

/// Lag products placed periodically into a `size x size` buffer.
fn periodic_lags(m: usize, lag: &[C64], size: usize) -> Vec<C64> {
    let side = 2 * m + 1;
    let mut buf = vec![C64::new(0.0, 0.0); size * size];
    for ly in 0..side {
        let py = (ly as i64 - m as i64).rem_euclid(size as i64) as usize;
        for lx in 0..side {
            let px = (lx as i64 - m as i64).rem_euclid(size as i64) as usize;
            buf[py * size + px] = lag[ly * side + lx];
        }
    }
    buf
}

/// In-place 2D inverse FFT (unnormalized) of a square row-major buffer.
fn ifft2(buf: &mut [C64], size: usize, fft: &Arc<dyn Fft<f64>>, col: &mut Vec<C64>) {
    for row in buf.chunks_mut(size) {
        fft.process(row);
    }
    col.resize(size, C64::new(0.0, 0.0));
    for x in 0..size {
        for y in 0..size {
            col[y] = buf[y * size + x];
        }
        fft.process(col);
        for y in 0..size {
            buf[y * size + x] = col[y];
        }
    }
}

fn wigner_scale(k: f64, h: f64) -> f64 {
    (2.0 * k / (2.0 * PI)).powi(2) * h * h
}

/// Share of lag mass above which a clipping warning is emitted.
const CLIP_WARN: f64 = 1e-3;

fn wigner_slice(u1: &WaveField, u2: &WaveField, ix: usize, iy: usize, window: &WignerWindow, min_size: usize) -> (WignerSlice, f64) {
    let h = u1.grid.spacing();
    let k = u1.k;
    let lags = lag_products(u1, u2, ix, iy, window);
    let size = (2 * lags.m + 1).max(min_size).next_power_of_two();
    let mut buf = periodic_lags(lags.m, &lags.values, size);
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(size);
    ifft2(&mut buf, size, &fft, &mut Vec::new());
    let scale = wigner_scale(k, h);
    for v in buf.iter_mut() {
        *v *= scale;
    }
    (WignerSlice { x: u1.grid.node(ix, iy), v_step: PI / (k * h * size as f64), size, values: buf }, lags.tapered)
}

/// `W^k[u1, u2](x, v) = (2 pi)^{-2} (2k)^2 sum_z h^2 e^{2 i k v . z} w(z) u1(x - z) conj(u2)(x + z)`
/// at node `(ix, iy)` for all velocities of the periodic grid, by FFT. `min_size` pads the
/// lag box to refine the velocity grid.
pub fn wigner_fft(u1: &WaveField, u2: &WaveField, ix: usize, iy: usize, window: &WignerWindow, min_size: usize) -> Result<WignerSlice> {
    check_pair(u1, u2)?;
    let (slice, tapered) = wigner_slice(u1, u2, ix, iy, window, min_size);
    if tapered > CLIP_WARN {
        warn!("Wigner lag window cuts {:.1e} of the lag mass at node ({ix}, {iy})", tapered);
    }
    Ok(slice)
}

/// Same transform evaluated directly at arbitrary velocities.
pub fn wigner_direct(u1: &WaveField, u2: &WaveField, ix: usize, iy: usize, window: &WignerWindow, vs: &[Vec2<f64>]) -> Result<Vec<C64>> {
    check_pair(u1, u2)?;
    let h = u1.grid.spacing();
    let k = u1.k;
    let Lags { m, values: lag, .. } = lag_products(u1, u2, ix, iy, window);
    let side = 2 * m + 1;
    let scale = wigner_scale(k, h);
    Ok(vs
        .iter()
        .map(|v| {
            let mut acc = C64::new(0.0, 0.0);
            for ly in 0..side {
                for lx in 0..side {
                    let a = lag[ly * side + lx];
                    if a == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let z = Vec2::new((lx as f64 - m as f64) * h, (ly as f64 - m as f64) * h);
                    acc += a * C64::from_polar(1.0, 2.0 * k * v.dot(z));
                }
            }
            acc * scale
        })
        .collect())
}

/// Energy density `int W dv` and flux `int v W dv` of a slice.
pub fn slice_moments(w: &WignerSlice) -> (f64, Vec2<f64>) {
    let dv2 = w.dv2();
    let mut e = 0.0;
    let mut f = Vec2::zero();
    for jy in 0..w.size {
        for jx in 0..w.size {
            let val = w.values[jy * w.size + jx].re;
            e += val;
            f += w.velocity(jx, jy) * val;
        }
    }
    (e * dv2, f * dv2)
}

/// Wigner moments of `u` at the given physical node indices.
pub fn wigner_moments(u: &WaveField, nodes: &[usize], window: &WignerWindow) -> Result<Vec<(f64, Vec2<f64>)>> {
    let n = u.grid.n();
    let mut worst: f64 = 0.0;
    let out = nodes
        .iter()
        .map(|&i| {
            let (w, tapered) = wigner_slice(u, u, i % n, i / n, window, 0);
            worst = worst.max(tapered);
            slice_moments(&w)
        })
        .collect();
    if worst > CLIP_WARN {
        warn!("Wigner lag window cuts up to {worst:.1e} of the lag mass");
    }
    Ok(out)
}

/// `(<W[u1], W[u2]>, (k / 2 pi)^2 |<u1, u2>|^2)` with both Wigner transforms on the full
/// periodic velocity grid at every node. Nodes whose lag products are negligible for both
/// fields are skipped.
pub fn moyal_check(u1: &WaveField, u2: &WaveField, window: &WignerWindow) -> Result<(f64, f64)> {
    check_pair(u1, u2)?;
    let g = u1.grid;
    let h = g.spacing();
    let k = u1.k;
    let mass = |u: &WaveField| u.values.iter().map(|v| v.norm_sqr()).sum::<f64>();
    let tiny = 1e-14 * (mass(u1) + mass(u2));
    let m = (window.half_width / h).floor() as usize;
    let size = (2 * m + 1).next_power_of_two();
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(size);
    let mut col = Vec::new();
    let scale = wigner_scale(k, h);
    let dv2 = (PI / (k * h * size as f64)).powi(2);
    let mut lhs = 0.0;
    for iy in 0..g.n() {
        for ix in 0..g.n() {
            let l1 = lag_products(u1, u1, ix, iy, window).values;
            let l2 = lag_products(u2, u2, ix, iy, window).values;
            let n1: f64 = l1.iter().map(|v| v.norm()).sum();
            let n2: f64 = l2.iter().map(|v| v.norm()).sum();
            if n1 < tiny || n2 < tiny {
                continue;
            }
            // W1 and W2 are real, so one transform of l1 + i l2 yields W1 + i W2.
            let packed: Vec<C64> = l1.iter().zip(&l2).map(|(a, b)| a + C64::new(0.0, 1.0) * b).collect();
            let mut buf = periodic_lags(m, &packed, size);
            ifft2(&mut buf, size, &fft, &mut col);
            let s: f64 = buf.iter().map(|w| w.re * w.im).sum();
            lhs += s * scale * scale * dv2 * h * h;
        }
    }
    let ip: C64 = u1.values.iter().zip(&u2.values).map(|(a, b)| a.conj() * b).sum::<C64>() * (h * h);
    Ok((lhs, husimi_prefactor(k) * ip.norm_sqr()))
}

/// `G^k(x, v) = (k / pi)^2 exp(-k (|x|^2 + |v|^2))`.
pub fn coherent_kernel(k: f64, x: Vec2<f64>, v: Vec2<f64>) -> f64 {
    (k / PI).powi(2) * (-k * (x.norm_sq() + v.norm_sq())).exp()
}
