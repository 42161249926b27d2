//! X-ray transforms of the contrast, boundary/line projections and the linearization
//! residual between ray in-out data and line integrals.

use crate::error::{invalid, Result};
use crate::liouville::{in_out, shell_velocity, TraceOptions};
use crate::medium::MediumField;
use crate::quadrature::integrate;
use crate::scalar::{Real, Vec2};

/// Oriented line `{t v + x}` with `<v, x> = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineParam<T> {
    pub direction: Vec2<T>,
    pub offset: Vec2<T>,
}

impl<T: Real> LineParam<T> {
    /// Line with unit direction at angle `phi` and signed offset `p` along the left normal.
    pub fn from_angle(phi: T, p: T) -> Self {
        let v = Vec2::from_angle(phi);
        Self { direction: v, offset: Vec2::new(-v.y, v.x) * p }
    }

    /// Signed distance from the origin (offset along the left normal of `direction`).
    pub fn signed_offset(&self) -> T {
        self.direction.cross(self.offset)
    }
}

const XRAY_TOL: f64 = 1e-10;

/// Chord `[t0, t1]` of the line inside the support ball, if any.
fn support_chord<T: Real>(medium: &MediumField<T>, line: &LineParam<T>) -> Option<(T, T)> {
    let r = medium.support_radius();
    let d2 = line.offset.norm_sq();
    if r <= T::zero() || d2 >= r * r {
        return None;
    }
    let half = (r * r - d2).sqrt();
    Some((-half, half))
}

/// `P q (v, x) = int q(t v + x) dt`.
pub fn xray_q<T: Real>(medium: &MediumField<T>, line: &LineParam<T>) -> T {
    match support_chord(medium, line) {
        None => T::zero(),
        Some((a, b)) => {
            integrate(|t| [medium.contrast(line.offset + line.direction * t)], a, b, T::lit(XRAY_TOL), 40)[0]
        }
    }
}

/// `P grad q (v, x) = int grad q(t v + x) dt`.
pub fn xray_grad_q<T: Real>(medium: &MediumField<T>, line: &LineParam<T>) -> Vec2<T> {
    match support_chord(medium, line) {
        None => Vec2::zero(),
        Some((a, b)) => {
            let [gx, gy] = integrate(
                |t| {
                    let g = medium.eval(line.offset + line.direction * t).grad;
                    [g.x, g.y]
                },
                a,
                b,
                T::lit(XRAY_TOL),
                40,
            );
            Vec2::new(gx, gy)
        }
    }
}

/// `(x, v) -> (x - <x, v> v, v)`.
pub fn project<T: Real>(x: Vec2<T>, v: Vec2<T>) -> LineParam<T> {
    LineParam { direction: v, offset: x - v * x.dot(v) }
}

fn chord_half<T: Real>(line: &LineParam<T>, radius: T) -> Result<T> {
    let d2 = line.offset.norm_sq();
    let r2 = radius * radius;
    if d2 >= r2 {
        return invalid(format!("line at distance {} does not cross the circle of radius {radius}", d2.sqrt()));
    }
    Ok((r2 - d2).sqrt())
}

/// Entry point on the circle: the inverse of [`project`] restricted to inward pairs.
pub fn unproject_in<T: Real>(line: &LineParam<T>, radius: T) -> Result<(Vec2<T>, Vec2<T>)> {
    let h = chord_half(line, radius)?;
    Ok((line.offset - line.direction * h, line.direction))
}

/// Exit point on the circle: the inverse of [`project`] restricted to outward pairs.
pub fn unproject_out<T: Real>(line: &LineParam<T>, radius: T) -> Result<(Vec2<T>, Vec2<T>)> {
    let h = chord_half(line, radius)?;
    Ok((line.offset + line.direction * h, line.direction))
}

/// Components of the linearization residual for one line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NovikovResidual<T> {
    /// `2 (<x_r - x_s, v_s> - S) - P q`: travel-length excess against the scalar transform.
    pub scalar: T,
    /// `2 (v_r - v_s) - P grad q`: direction change against the gradient transform.
    pub vector: Vec2<T>,
    /// Offset of the projected exit line minus the entry line offset.
    pub offset_shift: Vec2<T>,
    pub trapped: bool,
}

impl<T: Real> NovikovResidual<T> {
    /// Euclidean norm of `(scalar, vector)`.
    pub fn norm(&self) -> T {
        (self.scalar * self.scalar + self.vector.norm_sq()).sqrt()
    }
}

/// Compares the projected in-out map of the line with its X-ray pair.
///
/// The ray enters on the circle of radius `radius` along the line, is traced through the
/// medium, and its exit `(x_r, v_r)` and exit arc parameter `S` are compared with
/// `(P q, P grad q)`.
pub fn novikov_residual<T: Real>(medium: &MediumField<T>, line: &LineParam<T>, radius: T, opts: TraceOptions<T>) -> Result<NovikovResidual<T>> {
    let (x_s, d) = unproject_in(line, radius)?;
    let v_s = shell_velocity(medium, x_s, d);
    let rec = in_out(medium, x_s, v_s, radius, opts)?;
    let exit_velocity = rec.v_r * rec.exit_speed;
    let two = T::lit(2.0);
    let chord = (rec.x_r - x_s).dot(d);
    let scalar = two * (chord - rec.exit_s) - xray_q(medium, line);
    let vector = (exit_velocity - v_s) * two - xray_grad_q(medium, line);
    let out = project(rec.x_r, rec.v_r);
    Ok(NovikovResidual { scalar, vector, offset_shift: out.offset - line.offset, trapped: rec.trapped })
}

/// Maximum residual norm over `n_offsets` evenly spaced parallel lines crossing the
/// support, for each of `n_angles` directions.
pub fn max_novikov_residual<T: Real>(
    medium: &MediumField<T>,
    radius: T,
    n_angles: usize,
    n_offsets: usize,
    opts: TraceOptions<T>,
) -> Result<T> {
    let r = medium.support_radius().min(radius);
    let mut worst = T::zero();
    for a in 0..n_angles {
        let phi = T::TAU() * T::from_usize(a).unwrap() / T::from_usize(n_angles.max(1)).unwrap();
        for j in 0..n_offsets {
            let frac = (T::from_usize(j).unwrap() + T::lit(0.5)) / T::from_usize(n_offsets).unwrap();
            let p = r * (T::lit(2.0) * frac - T::one());
            let res = novikov_residual(medium, &LineParam::from_angle(phi, p), radius, opts)?;
            if res.trapped {
                return invalid("trapped ray while sampling residual lines");
            }
            worst = worst.max(res.norm());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bump() -> MediumField<f64> {
        MediumField::bump(-0.5, 0.25).unwrap()
    }

    #[test]
    fn line_missing_support() {
        let line = LineParam::from_angle(0.3, 0.26);
        assert_eq!(xray_q(&bump(), &line), 0.0);
        assert_eq!(xray_grad_q(&bump(), &line), Vec2::zero());
    }

    #[test]
    fn central_line_gradient_vanishes() {
        let g = xray_grad_q(&bump(), &LineParam::from_angle(0.0, 0.0));
        assert!(g.norm() < 1e-12);
    }

    #[test]
    fn central_line_matches_riemann_sum() {
        let m = bump();
        let q = xray_q(&m, &LineParam::from_angle(0.0, 0.0));
        let n = 1_000_000;
        let h = 0.5 / n as f64;
        let riemann: f64 = (0..n).map(|i| m.contrast(Vec2::new(-0.25 + (i as f64 + 0.5) * h, 0.0))).sum::<f64>() * h;
        assert!((q - riemann).abs() <= 1e-8 * riemann.abs(), "{q} vs {riemann}");
    }

    #[test]
    fn project_example() {
        let l = project(Vec2::new(0.3, 0.0), Vec2::new(0.0, 1.0));
        assert_eq!(l.offset, Vec2::new(0.3, 0.0));
        assert_eq!(l.direction.dot(l.offset), 0.0);
    }

    #[test]
    fn tangent_rejected() {
        assert!(unproject_in(&LineParam::from_angle(0.0, 0.3), 0.3).is_err());
    }

    #[test]
    fn constant_medium_residual_vanishes() {
        let m = MediumField::<f64>::constant();
        let r = novikov_residual(&m, &LineParam::from_angle(0.4, 0.1), 0.3, TraceOptions::default()).unwrap();
        assert!(r.norm() < 1e-9, "{r:?}");
        assert!(r.offset_shift.norm() < 1e-9);
    }

    proptest! {
        #[test]
        fn project_round_trip(theta in 0.0f64..std::f64::consts::TAU, inc in -1.4f64..1.4) {
            let r = 0.3;
            let (x, v) = crate::measurement::source_pose(r, theta, inc);
            let line = project(x, v);
            prop_assert!(line.direction.dot(line.offset).abs() <= 1e-14);
            let (x2, v2) = unproject_in(&line, r).unwrap();
            prop_assert!((x2 - x).norm() <= 1e-12 && (v2 - v).norm() <= 1e-12);
            let (xo, vo) = unproject_out(&line, r).unwrap();
            let back = project(xo, vo);
            prop_assert!((back.offset - line.offset).norm() <= 1e-12);
            prop_assert!(xo.dot(vo) > 0.0);
        }

        #[test]
        fn xray_is_linear(phi in 0.0f64..6.28, p in -0.2f64..0.2) {
            let line = LineParam::from_angle(phi, p);
            let a = MediumField::bump(-0.3f64, 0.25).unwrap();
            let b = MediumField::bump(0.2f64, 0.25).unwrap();
            let sum = MediumField::bump(-0.1f64, 0.25).unwrap();
            let lhs = xray_q(&sum, &line);
            let rhs = xray_q(&a, &line) + xray_q(&b, &line);
            // each transform carries the 1e-10 absolute quadrature tolerance
            prop_assert!((lhs - rhs).abs() <= 3e-10, "{lhs} vs {rhs}");
        }
    }
}
