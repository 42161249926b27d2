//! Field generators and independent quadrature oracles shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wave2ray::grid::GridSpec;
use wave2ray::helmholtz::{WaveField, C64};
use wave2ray::Vec2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn field(grid: GridSpec<f64>, k: f64, f: impl Fn(Vec2<f64>) -> C64) -> WaveField {
    WaveField { grid, k, values: (0..grid.len()).map(|i| f(grid.node_of(i))).collect(), scattered: false }
}

#[derive(Clone, Copy, Debug)]
pub struct Packet {
    pub weight: C64,
    pub center: Vec2<f64>,
    pub direction: Vec2<f64>,
}

/// `count` packets with standard complex normal weights, centers uniform in the disk of
/// radius `spread` and uniform unit directions.
pub fn random_packets(count: usize, spread: f64, rng: &mut ChaCha8Rng) -> Vec<Packet> {
    (0..count)
        .map(|_| {
            let weight = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            let r = spread * rng.random::<f64>().sqrt();
            let center = Vec2::from_angle(rng.random::<f64>() * 2.0 * PI) * r;
            let direction = Vec2::from_angle(rng.random::<f64>() * 2.0 * PI);
            Packet { weight, center, direction }
        })
        .collect()
}

/// `sum c exp(-alpha |x - center|^2) e^{i k d . x}`.
pub fn packet_field(grid: GridSpec<f64>, k: f64, alpha: f64, packets: &[Packet]) -> WaveField {
    field(grid, k, |x| {
        packets
            .iter()
            .map(|p| p.weight * C64::from_polar((-alpha * (x - p.center).norm_sq()).exp(), k * p.direction.dot(x)))
            .sum()
    })
}

pub fn inner(a: &WaveField, b: &WaveField) -> C64 {
    let h = a.grid.spacing();
    a.values.iter().zip(&b.values).map(|(x, y)| x.conj() * y).sum::<C64>() * (h * h)
}

/// `(W * G^k)(x0, v0)` with the velocity integral done in closed form:
/// `(k/pi) (2pi)^-2 (2k)^2 int dx e^{-k|x0-x|^2} int dz e^{2ik v0.z} e^{-k|z|^2} u(x-z) conj(u)(x+z)`.
pub fn husimi_from_wigner(u: &WaveField, x0: Vec2<f64>, v0: Vec2<f64>) -> f64 {
    let g = u.grid;
    let h = g.spacing();
    let k = u.k;
    let n = g.n() as i64;
    let cut = (40.0 / k).sqrt();
    let mz = (cut / h).ceil() as i64;
    let big = u.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut total = C64::new(0.0, 0.0);
    for iy in 0..n {
        for ix in 0..n {
            let x = g.node(ix as usize, iy as usize);
            let gx = (-k * (x0 - x).norm_sq()).exp();
            if gx < 1e-18 {
                continue;
            }
            let mut inner = C64::new(0.0, 0.0);
            for my in -mz..=mz {
                let (ya, yb) = (iy - my, iy + my);
                if ya < 0 || yb < 0 || ya >= n || yb >= n {
                    continue;
                }
                for mx in -mz..=mz {
                    let (xa, xb) = (ix - mx, ix + mx);
                    if xa < 0 || xb < 0 || xa >= n || xb >= n {
                        continue;
                    }
                    let a = u.values[g.index(xa as usize, ya as usize)];
                    if a.norm() < 1e-12 * big {
                        continue;
                    }
                    let b = u.values[g.index(xb as usize, yb as usize)];
                    let z = Vec2::new(mx as f64 * h, my as f64 * h);
                    inner += a * b.conj() * C64::from_polar((-k * z.norm_sq()).exp(), 2.0 * k * v0.dot(z));
                }
            }
            total += inner * gx;
        }
    }
    let c = (k / PI) * (2.0 * k / (2.0 * PI)).powi(2) * h.powi(4);
    (total * c).re
}

/// 8th-order central-difference gradient of `u` at an interior node.
pub fn fd_gradient(u: &WaveField, ix: usize, iy: usize) -> [C64; 2] {
    const W: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let h = u.grid.spacing();
    let mut gx = C64::new(0.0, 0.0);
    let mut gy = C64::new(0.0, 0.0);
    for (j, w) in W.iter().enumerate() {
        let s = j + 1;
        gx += (u.at(ix + s, iy) - u.at(ix - s, iy)) * *w;
        gy += (u.at(ix, iy + s) - u.at(ix, iy - s)) * *w;
    }
    [gx / h, gy / h]
}

/// Index of the bump `A = -0.5`, `r = 0.25` at radius `r`.
pub fn bump_index(r: f64) -> f64 {
    if r >= 0.25 {
        1.0
    } else {
        1.0 - 0.5 * (-1.0 / (1.0 - r * r / 0.0625)).exp()
    }
}

/// Scattering angle of the central potential for impact parameter `b`:
/// `pi - 2 [ asin(b / a) + int_{r_min}^{a} b dr / (r^2 sqrt(n(r) - b^2/r^2)) ]`, `a` the support radius,
/// with `r = r_min + t^2` removing the turning-point singularity and a composite midpoint rule.
pub fn deflection_integral(b: f64) -> f64 {
    let a = 0.25;
    let g = |r: f64| bump_index(r) * r * r - b * b;
    let (mut lo, mut hi) = (b, a);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r_min = 0.5 * (lo + hi);
    let t_max = (a - r_min).sqrt();
    let n = 400_000;
    let dt = t_max / n as f64;
    let inner: f64 = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) * dt;
            let r = r_min + t * t;
            2.0 * t * b / (r * r * (bump_index(r) - b * b / (r * r)).sqrt())
        })
        .sum::<f64>()
        * dt;
    PI - 2.0 * ((b / a).asin() + inner)
}
