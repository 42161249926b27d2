//! Hamiltonian ray tracing for the Liouville limit.
//!
//! Characteristics: `dx/ds = v`, `dv/ds = grad n / 2`, conserving `H = |v|^2/2 - n/2`.

use crate::error::{Error, Result};
use crate::measurement::MeasurementGrid;
use crate::medium::MediumField;
use crate::scalar::{Real, Vec2};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayState<T> {
    pub x: Vec2<T>,
    pub v: Vec2<T>,
    pub s: T,
    pub hamiltonian: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T> {
    pub states: Vec<RayState<T>>,
    /// `max |H(s) - H(0)|` over the stored states.
    pub max_drift: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InOutRecord<T> {
    pub x_s: Vec2<T>,
    pub v_s: Vec2<T>,
    pub x_r: Vec2<T>,
    /// Unit exit direction.
    pub v_r: Vec2<T>,
    /// `|v|` at the exit point.
    pub exit_speed: T,
    /// Arc parameter at the exit crossing.
    pub exit_s: T,
    pub trapped: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceOptions<T> {
    pub step: T,
    /// Arc length after which a ray is declared trapped. `None` uses `100 R`.
    pub max_s: Option<T>,
}

impl<T: Real> Default for TraceOptions<T> {
    fn default() -> Self {
        Self { step: T::lit(1e-3), max_s: None }
    }
}

pub fn hamiltonian<T: Real>(medium: &MediumField<T>, x: Vec2<T>, v: Vec2<T>) -> T {
    T::lit(0.5) * (v.norm_sq() - medium.eval(x).n)
}

fn force<T: Real>(medium: &MediumField<T>, x: Vec2<T>) -> Vec2<T> {
    medium.eval(x).grad * T::lit(0.5)
}

/// One classical RK4 step of size `h`.
pub fn rk4_step<T: Real>(medium: &MediumField<T>, x: Vec2<T>, v: Vec2<T>, h: T) -> (Vec2<T>, Vec2<T>) {
    let half = h * T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let a1 = force(medium, x);
    let x2 = x + v * half;
    let v2 = v + a1 * half;
    let a2 = force(medium, x2);
    let x3 = x + v2 * half;
    let v3 = v + a2 * half;
    let a3 = force(medium, x3);
    let x4 = x + v3 * h;
    let v4 = v + a3 * h;
    let a4 = force(medium, x4);
    let xn = x + (v + v2 * two + v3 * two + v4) * sixth;
    let vn = v + (a1 + a2 * two + a3 * two + a4) * sixth;
    (xn, vn)
}

fn require_smooth<T: Real>(medium: &MediumField<T>) -> Result<()> {
    if medium.is_smooth() {
        Ok(())
    } else {
        Err(Error::NonSmoothMedium(medium.kind_name()))
    }
}

/// Integrates with fixed step from `s = 0` to `max_s`, storing every state.
pub fn trace<T: Real>(medium: &MediumField<T>, x0: Vec2<T>, v0: Vec2<T>, step: T, max_s: T) -> Result<Trajectory<T>> {
    require_smooth(medium)?;
    if !(step > T::zero()) || !(max_s >= T::zero()) {
        return crate::error::invalid("trace needs positive step and non-negative max_s");
    }
    let h0 = hamiltonian(medium, x0, v0);
    let mut states = vec![RayState { x: x0, v: v0, s: T::zero(), hamiltonian: h0 }];
    let mut max_drift = T::zero();
    let (mut x, mut v) = (x0, v0);
    let steps = (max_s / step).round().to_usize().unwrap_or(0);
    for i in 1..=steps {
        (x, v) = rk4_step(medium, x, v, step);
        let h = hamiltonian(medium, x, v);
        max_drift = max_drift.max((h - h0).abs());
        states.push(RayState { x, v, s: T::from_usize(i).unwrap() * step, hamiltonian: h });
    }
    Ok(Trajectory { states, max_drift })
}

/// Follows the ray entering at `(x_s, v_s)` until it leaves the disk of radius `radius`.
///
/// The crossing is refined by bisection over a partial RK4 step down to the working precision.
pub fn in_out<T: Real>(
    medium: &MediumField<T>,
    x_s: Vec2<T>,
    v_s: Vec2<T>,
    radius: T,
    opts: TraceOptions<T>,
) -> Result<InOutRecord<T>> {
    require_smooth(medium)?;
    if x_s.dot(v_s) >= T::zero() {
        return crate::error::invalid("launch direction is not inward");
    }
    let step = opts.step;
    let max_s = opts.max_s.unwrap_or(radius * T::lit(100.0));
    let (mut x, mut v) = (x_s, v_s);
    let mut s = T::zero();
    let mut trapped = true;
    let r2 = radius * radius;
    while s < max_s {
        let (xn, vn) = rk4_step(medium, x, v, step);
        if xn.norm_sq() >= r2 {
            let (mut lo, mut hi) = (T::zero(), step);
            let mut best = (xn, vn, step);
            for _ in 0..200 {
                let mid = (lo + hi) * T::lit(0.5);
                let (xm, vm) = rk4_step(medium, x, v, mid);
                let g = xm.norm() - radius;
                best = (xm, vm, mid);
                if g == T::zero() || hi - lo <= T::epsilon() * step {
                    break;
                }
                if g < T::zero() {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            x = best.0;
            v = best.1;
            s += best.2;
            trapped = false;
            break;
        }
        x = xn;
        v = vn;
        s += step;
    }
    let speed = v.norm();
    Ok(InOutRecord {
        x_s,
        v_s,
        x_r: x,
        v_r: v * (T::one() / speed),
        exit_speed: speed,
        exit_s: s,
        trapped,
    })
}

/// Launch velocity on the energy shell `|v| = sqrt(n(x))` along unit direction `d`.
pub fn shell_velocity<T: Real>(medium: &MediumField<T>, x: Vec2<T>, d: Vec2<T>) -> Vec2<T> {
    d.normalized() * medium.eval(x).n.sqrt()
}

/// `C(sigma, 2) = sqrt(2) (sigma / sqrt(pi))^{3/2}`, the beam normalization constant.
pub fn beam_constant<T: Real>(sigma: T) -> T {
    T::SQRT_2() * (sigma / T::PI().sqrt()).powf(T::lit(1.5))
}

/// Angular density `(2 pi)^2 (pi/2) |S_hat(v)|^2` of the limiting source in two dimensions,
/// `|S_hat(v)|^2 = C^2 (2 pi)^{-2} sigma^{-4} exp(-|v - v_s|^2 / sigma^2)`,
/// evaluated at `v` scaled onto the shell `|v| = sqrt(n_at_source)`.
pub fn limiting_source_density<T: Real>(v: Vec2<T>, v_s: Vec2<T>, sigma: T, n_at_source: T) -> T {
    let c = beam_constant(sigma);
    let on_shell = v.normalized() * n_at_source.sqrt();
    let s2 = sigma * sigma;
    T::FRAC_PI_2() * c * c / (s2 * s2) * (-(on_shell - v_s).norm_sq() / s2).exp()
}

/// In-out records for every `(theta_s, theta_i)` node, in source order.
pub fn liouville_dataset(medium: &MediumField<f64>, mgrid: &MeasurementGrid, opts: TraceOptions<f64>) -> Result<Vec<InOutRecord<f64>>> {
    (0..mgrid.n_sources())
        .map(|src| {
            let (x_s, d) = mgrid.source(src);
            let v_s = shell_velocity(medium, x_s, d);
            in_out(medium, x_s, v_s, mgrid.radius, opts)
        })
        .collect()
}
