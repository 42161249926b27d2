//! Refractive-index fields `n(x) = 1 + q(x)` with compactly supported contrast.
//!
//! Every kind guarantees `q(x) = 0` exactly for `|x| >= support_radius()`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Result};
use crate::grid::GridSpec;
use crate::scalar::{Real, Sym2, Vec2};

/// Index value, gradient and smoothness flag at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MediumSample<T> {
    pub n: T,
    pub grad: Vec2<T>,
    /// Set when the gradient is only one-sided (piecewise-constant media).
    pub nonsmooth: bool,
}

/// One ellipse of the Shepp–Logan table: intensity, semi-axes, center, tilt in degrees.
struct Ellipse {
    intensity: f64,
    a: f64,
    b: f64,
    x0: f64,
    y0: f64,
    tilt_deg: f64,
}

const SHEPP_LOGAN: [Ellipse; 10] = [
    Ellipse { intensity: 1.0, a: 0.69, b: 0.92, x0: 0.0, y0: 0.0, tilt_deg: 0.0 },
    Ellipse { intensity: -0.98, a: 0.6624, b: 0.8740, x0: 0.0, y0: -0.0184, tilt_deg: 0.0 },
    Ellipse { intensity: -0.02, a: 0.1100, b: 0.3100, x0: 0.22, y0: 0.0, tilt_deg: -18.0 },
    Ellipse { intensity: -0.02, a: 0.1600, b: 0.4100, x0: -0.22, y0: 0.0, tilt_deg: 18.0 },
    Ellipse { intensity: 0.01, a: 0.2100, b: 0.2500, x0: 0.0, y0: 0.35, tilt_deg: 0.0 },
    Ellipse { intensity: 0.01, a: 0.0460, b: 0.0460, x0: 0.0, y0: 0.1, tilt_deg: 0.0 },
    Ellipse { intensity: 0.01, a: 0.0460, b: 0.0460, x0: 0.0, y0: -0.1, tilt_deg: 0.0 },
    Ellipse { intensity: 0.01, a: 0.0460, b: 0.0230, x0: -0.08, y0: -0.605, tilt_deg: 0.0 },
    Ellipse { intensity: 0.01, a: 0.0230, b: 0.0230, x0: 0.0, y0: -0.606, tilt_deg: 0.0 },
    Ellipse { intensity: 0.01, a: 0.0230, b: 0.0460, x0: 0.06, y0: -0.605, tilt_deg: 0.0 },
];

/// Bicubic (Keys, a = -1/2) interpolant of nodal values; globally C1.
///
/// Values outside the grid are treated as zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BicubicField<T> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
}

fn keys_weight<T: Real>(t: T) -> (T, T) {
    // Returns (w(t), w'(t)) for the cubic convolution kernel with a = -1/2.
    let a = T::lit(-0.5);
    let s = t.abs();
    let sign = if t < T::zero() { -T::one() } else { T::one() };
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    if s <= T::one() {
        let w = (a + two) * s * s * s - (a + three) * s * s + T::one();
        let dw = three * (a + two) * s * s - two * (a + three) * s;
        (w, dw * sign)
    } else if s < two {
        let five = T::lit(5.0);
        let eight = T::lit(8.0);
        let four = T::lit(4.0);
        let w = a * s * s * s - five * a * s * s + eight * a * s - four * a;
        let dw = three * a * s * s - two * five * a * s + eight * a;
        (w, dw * sign)
    } else {
        (T::zero(), T::zero())
    }
}

impl<T: Real> BicubicField<T> {
    pub fn new(grid: GridSpec<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!("expected {} grid values, got {}", grid.len(), values.len()));
        }
        Ok(Self { grid, values })
    }

    /// Interpolated value and gradient at `p`.
    pub fn eval(&self, p: Vec2<T>) -> (T, Vec2<T>) {
        let n = self.grid.n() as isize;
        let h = self.grid.spacing();
        let fx = self.grid.locate(p.x);
        let fy = self.grid.locate(p.y);
        let ix0 = fx.floor().to_isize().unwrap_or(isize::MIN / 2);
        let iy0 = fy.floor().to_isize().unwrap_or(isize::MIN / 2);
        if ix0 < -2 || iy0 < -2 || ix0 > n + 1 || iy0 > n + 1 {
            return (T::zero(), Vec2::zero());
        }
        let mut wx = [(T::zero(), T::zero()); 4];
        let mut wy = [(T::zero(), T::zero()); 4];
        for m in 0..4 {
            let off = m as isize - 1;
            wx[m] = keys_weight(fx - T::from_isize(ix0 + off).unwrap());
            wy[m] = keys_weight(fy - T::from_isize(iy0 + off).unwrap());
        }
        let mut val = T::zero();
        let mut gx = T::zero();
        let mut gy = T::zero();
        for (my, &(wyv, wyd)) in wy.iter().enumerate() {
            let iy = iy0 + my as isize - 1;
            if iy < 0 || iy >= n {
                continue;
            }
            for (mx, &(wxv, wxd)) in wx.iter().enumerate() {
                let ix = ix0 + mx as isize - 1;
                if ix < 0 || ix >= n {
                    continue;
                }
                let f = self.values[self.grid.index(ix as usize, iy as usize)];
                val += f * wxv * wyv;
                gx += f * wxd * wyv;
                gy += f * wxv * wyd;
            }
        }
        (val, Vec2::new(gx / h, gy / h))
    }

    /// Radius of the smallest origin-centered disk outside which the interpolant vanishes.
    pub fn support_radius(&self) -> T {
        let h = self.grid.spacing();
        let reach = T::lit(2.0) * h * T::SQRT_2();
        self.values
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != T::zero())
            .map(|(i, _)| self.grid.node_of(i).norm() + reach)
            .fold(T::zero(), T::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum MediumKind<T> {
    Constant,
    Bump {
        amplitude: T,
        radius: T,
    },
    /// Smoothed white noise, multiplied by a bump cutoff and normalized so `max|q| = amplitude`
    /// over the construction grid.
    Delocalized {
        seed: u64,
        correlation_length: T,
        amplitude: T,
        radius: T,
        field: BicubicField<T>,
        scale: T,
    },
    SheppLogan {
        scale: T,
        radius: T,
    },
    GridSampled {
        field: BicubicField<T>,
        radius: T,
    },
}

/// Refractive index `n = 1 + q`. Immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct MediumField<T> {
    kind: MediumKind<T>,
}

/// C-infinity cutoff `exp(-1/(1 - s))`, `s = |x|^2 / r^2`, with its
/// derivatives with respect to `s`.
fn cutoff<T: Real>(s: T) -> (T, T, T) {
    if s >= T::one() {
        return (T::zero(), T::zero(), T::zero());
    }
    let one = T::one();
    let w = one - s;
    let e = (-one / w).exp();
    let d1 = -one / (w * w);
    let d2 = -T::lit(2.0) / (w * w * w);
    (e, e * d1, e * (d1 * d1 + d2))
}

impl<T: Real> MediumField<T> {
    pub fn constant() -> Self {
        Self { kind: MediumKind::Constant }
    }

    /// `q(x) = A exp(-1/(1 - |x|^2/r^2))` inside `B(r)`, zero outside.
    pub fn bump(amplitude: T, radius: T) -> Result<Self> {
        if !(amplitude > -T::one()) || !amplitude.is_finite() {
            return invalid(format!("bump amplitude must exceed -1 (n > 0), got {amplitude}"));
        }
        if !(radius > T::zero()) {
            return invalid(format!("bump radius must be positive, got {radius}"));
        }
        Ok(Self { kind: MediumKind::Bump { amplitude, radius } })
    }

    pub fn delocalized(seed: u64, correlation_length: T, amplitude: T, radius: T) -> Result<Self> {
        if !(correlation_length > T::zero()) {
            return invalid(format!("correlation length must be positive, got {correlation_length}"));
        }
        if !amplitude.is_finite() || !(radius > T::zero()) {
            return invalid("delocalized medium needs finite amplitude and positive radius");
        }
        if amplitude.abs() >= T::one() {
            return invalid(format!("|amplitude| must stay below 1 to keep n > 0, got {amplitude}"));
        }
        let spacing = (correlation_length / T::lit(4.0)).min(radius / T::lit(16.0));
        let grid = GridSpec::with_max_spacing(radius, spacing)?;
        let n = grid.n();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..grid.len()).map(|_| StandardNormal.sample(&mut rng)).collect();

        // Separable periodic convolution with a sampled Gaussian of std `correlation_length`.
        let h = grid.spacing().as_f64();
        let std_nodes = correlation_length.as_f64() / h;
        let half = (4.0 * std_nodes).ceil() as isize;
        let kernel: Vec<f64> = (-half..=half).map(|m| (-0.5 * (m as f64 / std_nodes).powi(2)).exp()).collect();
        let ksum: f64 = kernel.iter().sum();
        let wrap = |i: isize| i.rem_euclid(n as isize) as usize;
        let mut tmp = vec![0.0; grid.len()];
        for iy in 0..n {
            for ix in 0..n {
                let mut acc = 0.0;
                for (m, w) in kernel.iter().enumerate() {
                    acc += w * noise[iy * n + wrap(ix as isize + m as isize - half)];
                }
                tmp[iy * n + ix] = acc / ksum;
            }
        }
        let mut smooth = vec![0.0; grid.len()];
        for iy in 0..n {
            for ix in 0..n {
                let mut acc = 0.0;
                for (m, w) in kernel.iter().enumerate() {
                    acc += w * tmp[wrap(iy as isize + m as isize - half) * n + ix];
                }
                smooth[iy * n + ix] = acc / ksum;
            }
        }
        let field = BicubicField::new(grid, smooth.iter().map(|&v| T::lit(v)).collect())?;

        let r2 = radius * radius;
        let peak = (0..grid.len())
            .map(|i| {
                let p = grid.node_of(i);
                (field.values[i] * cutoff(p.norm_sq() / r2).0).abs()
            })
            .fold(T::zero(), T::max);
        let scale = if amplitude == T::zero() || peak == T::zero() { T::zero() } else { amplitude.abs() / peak };
        Ok(Self {
            kind: MediumKind::Delocalized { seed, correlation_length, amplitude, radius, field, scale },
        })
    }

    /// Standard Shepp–Logan phantom scaled into `B(r)` with intensities multiplied by `scale`.
    pub fn shepp_logan(scale: T, radius: T) -> Result<Self> {
        if !scale.is_finite() || !(radius > T::zero()) {
            return invalid("Shepp-Logan needs finite scale and positive radius");
        }
        Ok(Self { kind: MediumKind::SheppLogan { scale, radius } })
    }

    pub fn grid_sampled(field: BicubicField<T>) -> Result<Self> {
        if field.values.iter().any(|v| !v.is_finite() || *v <= -T::one()) {
            return invalid("grid-sampled contrast must be finite and > -1");
        }
        let radius = field.support_radius();
        Ok(Self { kind: MediumKind::GridSampled { field, radius } })
    }

    pub fn kind(&self) -> &MediumKind<T> {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            MediumKind::Constant => "constant",
            MediumKind::Bump { .. } => "bump",
            MediumKind::Delocalized { .. } => "delocalized",
            MediumKind::SheppLogan { .. } => "shepp_logan",
            MediumKind::GridSampled { .. } => "grid_sampled",
        }
    }

    /// Radius `r` with `q = 0` on `|x| >= r`. Zero for the constant medium.
    pub fn support_radius(&self) -> T {
        match &self.kind {
            MediumKind::Constant => T::zero(),
            MediumKind::Bump { radius, .. }
            | MediumKind::Delocalized { radius, .. }
            | MediumKind::SheppLogan { radius, .. }
            | MediumKind::GridSampled { radius, .. } => *radius,
        }
    }

    /// True when `n` is at least C1, so rays can be traced.
    pub fn is_smooth(&self) -> bool {
        !matches!(self.kind, MediumKind::SheppLogan { .. })
    }

    /// Contrast `q(x) = n(x) - 1`.
    pub fn contrast(&self, x: Vec2<T>) -> T {
        self.eval(x).n - T::one()
    }

    /// `n(x)` and `grad n(x)`.
    pub fn eval(&self, x: Vec2<T>) -> MediumSample<T> {
        let one = T::one();
        let smooth = |q: T, g: Vec2<T>| MediumSample { n: one + q, grad: g, nonsmooth: false };
        match &self.kind {
            MediumKind::Constant => smooth(T::zero(), Vec2::zero()),
            MediumKind::Bump { amplitude, radius } => {
                let r2 = *radius * *radius;
                let s = x.norm_sq() / r2;
                if s >= one {
                    return smooth(T::zero(), Vec2::zero());
                }
                let (c, dc, _) = cutoff(s);
                let q = *amplitude * c;
                let dqds = *amplitude * dc;
                smooth(q, x * (dqds * T::lit(2.0) / r2))
            }
            MediumKind::Delocalized { radius, field, scale, .. } => {
                let r2 = *radius * *radius;
                let s = x.norm_sq() / r2;
                if s >= one || *scale == T::zero() {
                    return smooth(T::zero(), Vec2::zero());
                }
                let (c, dc, _) = cutoff(s);
                let (g, dg) = field.eval(x);
                let q = *scale * c * g;
                let grad = (dg * c + x * (dc * T::lit(2.0) / r2 * g)) * *scale;
                smooth(q, grad)
            }
            MediumKind::SheppLogan { scale, radius } => {
                let q = if x.norm() >= *radius { T::zero() } else { *scale * shepp_logan_intensity(x * (one / *radius)) };
                MediumSample { n: one + q, grad: Vec2::zero(), nonsmooth: true }
            }
            MediumKind::GridSampled { field, radius } => {
                if x.norm() >= *radius {
                    return smooth(T::zero(), Vec2::zero());
                }
                let (q, g) = field.eval(x);
                smooth(q, g)
            }
        }
    }

    /// Hessian of `q`: closed form for the bump, central differences of the gradient otherwise.
    pub fn hessian(&self, x: Vec2<T>) -> Sym2<T> {
        match &self.kind {
            MediumKind::Constant | MediumKind::SheppLogan { .. } => Sym2::default(),
            MediumKind::Bump { amplitude, radius } => {
                let r2 = *radius * *radius;
                let s = x.norm_sq() / r2;
                if s >= T::one() {
                    return Sym2::default();
                }
                let (_, dc, d2c) = cutoff(s);
                let k = *amplitude;
                let two = T::lit(2.0);
                let gs = x * (two / r2);
                let a = k * d2c;
                let b = k * dc * two / r2;
                Sym2 { xx: a * gs.x * gs.x + b, xy: a * gs.x * gs.y, yy: a * gs.y * gs.y + b }
            }
            _ => {
                let eps = T::lit(1e-5) * self.support_radius().max(T::lit(1e-3));
                let gxp = self.eval(x + Vec2::new(eps, T::zero())).grad;
                let gxm = self.eval(x - Vec2::new(eps, T::zero())).grad;
                let gyp = self.eval(x + Vec2::new(T::zero(), eps)).grad;
                let gym = self.eval(x - Vec2::new(T::zero(), eps)).grad;
                let two_eps = T::lit(2.0) * eps;
                let xx = (gxp.x - gxm.x) / two_eps;
                let yy = (gyp.y - gym.y) / two_eps;
                let xy = T::lit(0.5) * ((gxp.y - gxm.y) / two_eps + (gyp.x - gym.x) / two_eps);
                Sym2 { xx, xy, yy }
            }
        }
    }

    /// Samples `q` on every node of `grid`.
    pub fn sample_contrast(&self, grid: &GridSpec<T>) -> Vec<T> {
        (0..grid.len()).map(|i| self.contrast(grid.node_of(i))).collect()
    }

    /// Minimum of `n(x) + x . grad n(x)` over `sample_count` quasi-random points of `B(r)`.
    ///
    /// A positive value certifies the local repulsivity condition.
    pub fn check_locally_repulsive(&self, sample_count: usize) -> Result<T> {
        if !self.is_smooth() {
            return Err(crate::Error::NonSmoothMedium(self.kind_name()));
        }
        let r = self.sampling_radius();
        Ok(halton_disk(sample_count, r)
            .map(|p| {
                let s = self.eval(p);
                s.n + p.dot(s.grad)
            })
            .fold(T::infinity(), T::min))
    }

    /// Sampled `max(sup |grad q|, sup ||Hess q||_F)`.
    pub fn delta_bound(&self, sample_count: usize) -> T {
        let r = self.sampling_radius();
        halton_disk(sample_count, r)
            .map(|p| self.eval(p).grad.norm().max(self.hessian(p).frobenius()))
            .fold(T::zero(), T::max)
    }

    fn sampling_radius(&self) -> T {
        let r = self.support_radius();
        if r > T::zero() {
            r
        } else {
            T::one()
        }
    }
}

/// Sum of Shepp–Logan intensities at `p` in phantom coordinates (unit disk).
pub fn shepp_logan_intensity<T: Real>(p: Vec2<T>) -> T {
    let (x, y) = (p.x.as_f64(), p.y.as_f64());
    let mut acc = 0.0;
    for e in &SHEPP_LOGAN {
        let (s, c) = e.tilt_deg.to_radians().sin_cos();
        let dx = x - e.x0;
        let dy = y - e.y0;
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        if (u / e.a).powi(2) + (v / e.b).powi(2) <= 1.0 {
            acc += e.intensity;
        }
    }
    T::lit(acc)
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    inv = out;
    inv
}

/// Halton (2, 3) points mapped uniformly into the closed disk of radius `r`.
pub fn halton_disk<T: Real>(count: usize, r: T) -> impl Iterator<Item = Vec2<T>> {
    (1..=count).map(move |i| {
        let u = radical_inverse(i, 2);
        let v = radical_inverse(i, 3);
        let rho = r * T::lit(u.sqrt());
        Vec2::from_angle(T::lit(std::f64::consts::TAU * v)) * rho
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn bump_center_value() {
        let m = MediumField::bump(-0.5f64, 0.25).unwrap();
        let q = m.contrast(Vec2::zero());
        assert!((q - (-0.5 * (-1.0f64).exp())).abs() < 1e-15);
        assert!((q + 0.18394).abs() < 1e-5);
        assert_eq!(m.eval(Vec2::zero()).grad, Vec2::zero());
    }

    #[test]
    fn bump_vanishes_on_boundary() {
        let m = MediumField::bump(-0.5f64, 0.25).unwrap();
        assert_eq!(m.contrast(Vec2::new(0.25, 0.0)), 0.0);
        assert_eq!(m.contrast(Vec2::new(0.0, -0.25)), 0.0);
    }

    #[test]
    fn bump_rejects_nonpositive_index() {
        assert!(MediumField::bump(-1.0f64, 0.2).is_err());
        assert!(MediumField::bump(-1.5f64, 0.2).is_err());
        assert!(MediumField::bump(0.5f64, 0.0).is_err());
    }

    #[test]
    fn bump_hessian_matches_gradient_differences() {
        let m = MediumField::bump(0.5f64, 0.2).unwrap();
        let x = Vec2::new(0.07, -0.05);
        let h = m.hessian(x);
        let eps = 1e-6;
        let gxp = m.eval(x + Vec2::new(eps, 0.0)).grad;
        let gxm = m.eval(x - Vec2::new(eps, 0.0)).grad;
        let gyp = m.eval(x + Vec2::new(0.0, eps)).grad;
        let gym = m.eval(x - Vec2::new(0.0, eps)).grad;
        assert!((h.xx - (gxp.x - gxm.x) / (2.0 * eps)).abs() < 1e-5 * h.frobenius());
        assert!((h.yy - (gyp.y - gym.y) / (2.0 * eps)).abs() < 1e-5 * h.frobenius());
        assert!((h.xy - (gxp.y - gxm.y) / (2.0 * eps)).abs() < 1e-5 * h.frobenius());
    }

    #[test]
    fn constant_medium_is_repulsive_with_unit_margin() {
        let m = MediumField::<f64>::constant();
        assert_eq!(m.check_locally_repulsive(100).unwrap(), 1.0);
        let s = m.eval(Vec2::new(3.0, 4.0));
        assert_eq!((s.n, s.grad), (1.0, Vec2::zero()));
    }

    #[test]
    fn negative_bump_is_repulsive() {
        let m = MediumField::bump(-0.5f64, 0.25).unwrap();
        assert!(m.check_locally_repulsive(4000).unwrap() > 0.0);
        // strongly negative amplitude: valid result, sign not asserted
        let m = MediumField::bump(-0.99f64, 0.25).unwrap();
        assert!(m.check_locally_repulsive(4000).unwrap().is_finite());
    }

    #[test]
    fn shepp_logan_rejected_for_repulsivity() {
        let m = MediumField::shepp_logan(0.1f64, 0.3).unwrap();
        assert!(m.check_locally_repulsive(10).is_err());
        assert!(m.eval(Vec2::new(0.01, 0.02)).nonsmooth);
    }

    #[test]
    fn shepp_logan_zero_scale_and_support() {
        let m = MediumField::shepp_logan(0.0f64, 0.3).unwrap();
        assert_eq!(m.contrast(Vec2::new(0.01, 0.02)), 0.0);
        let m = MediumField::shepp_logan(0.2f64, 0.3).unwrap();
        assert_eq!(m.contrast(Vec2::new(0.3, 0.0)), 0.0);
        assert_eq!(m.contrast(Vec2::new(0.25, 0.25)), 0.0);
    }

    #[test]
    fn delocalized_is_deterministic() {
        let a = MediumField::delocalized(7, 0.05f64, 0.2, 0.25).unwrap();
        let b = MediumField::delocalized(7, 0.05f64, 0.2, 0.25).unwrap();
        assert_eq!(a, b);
        let p = Vec2::new(0.031, -0.1);
        assert_eq!(a.contrast(p).to_bits(), b.contrast(p).to_bits());
        let c = MediumField::delocalized(8, 0.05f64, 0.2, 0.25).unwrap();
        assert_ne!(a.contrast(p), c.contrast(p));
    }

    #[test]
    fn delocalized_zero_amplitude() {
        let m = MediumField::delocalized(3, 0.05f64, 0.0, 0.25).unwrap();
        for p in halton_disk(200, 0.3f64) {
            assert_eq!(m.contrast(p), 0.0);
        }
    }

    #[test]
    fn delocalized_post_conditions_by_grid_scan() {
        let m = MediumField::delocalized(1, 0.05f64, 0.3, 0.25).unwrap();
        let MediumKind::Delocalized { field, .. } = m.kind() else { unreachable!() };
        let mut peak: f64 = 0.0;
        for i in 0..field.grid.len() {
            let p = field.grid.node_of(i);
            let q = m.contrast(p);
            if p.norm() >= 0.25 {
                assert_eq!(q, 0.0);
            }
            peak = peak.max(q.abs());
        }
        assert!((peak - 0.3).abs() < 1e-12, "peak {peak}");
    }

    #[test]
    fn bicubic_reproduces_nodes_and_is_c1() {
        let g = GridSpec::new(1.0f64, 11).unwrap();
        let vals: Vec<f64> = (0..g.len()).map(|i| g.node_of(i).x.sin() * g.node_of(i).y.cos()).collect();
        let f = BicubicField::new(g, vals.clone()).unwrap();
        for i in [12usize, 40, 60, 99] {
            let (v, _) = f.eval(g.node_of(i));
            assert!((v - vals[i]).abs() < 1e-12);
        }
        // gradient continuity across a cell edge
        let x = g.coord(5);
        let (_, gl) = f.eval(Vec2::new(x - 1e-9, 0.13));
        let (_, gr) = f.eval(Vec2::new(x + 1e-9, 0.13));
        assert!((gl - gr).norm() < 1e-6);
    }

    proptest! {
        #[test]
        fn bump_support_is_exact(t in 0.0f64..std::f64::consts::TAU, s in 1.0f64..2.0) {
            let m = MediumField::bump(0.5f64, 0.2).unwrap();
            let p = Vec2::from_angle(t) * (0.2 * s);
            prop_assert_eq!(m.contrast(p), 0.0);
            prop_assert_eq!(m.eval(p).grad, Vec2::zero());
        }

        #[test]
        fn bump_is_radially_symmetric(t in 0.0f64..std::f64::consts::TAU, x in -0.3f64..0.3, y in -0.3f64..0.3) {
            let m = MediumField::bump(-0.5f64, 0.25).unwrap();
            let p = Vec2::new(x, y);
            let a = m.contrast(p);
            let b = m.contrast(p.rotated(t));
            prop_assert!((a - b).abs() <= 1e-15);
        }

        #[test]
        fn gradient_matches_central_difference(x in -0.3f64..0.3, y in -0.3f64..0.3) {
            let eps = 1e-6;
            for m in [MediumField::bump(-0.5f64, 0.25).unwrap(), MediumField::bump(0.5f64, 0.2).unwrap()] {
                let p = Vec2::new(x, y);
                let g = m.eval(p).grad;
                let fx = (m.contrast(p + Vec2::new(eps, 0.0)) - m.contrast(p - Vec2::new(eps, 0.0))) / (2.0 * eps);
                let fy = (m.contrast(p + Vec2::new(0.0, eps)) - m.contrast(p - Vec2::new(0.0, eps))) / (2.0 * eps);
                prop_assert!((g.x - fx).abs() <= 1e-5 && (g.y - fy).abs() <= 1e-5);
            }
        }
    }
}
