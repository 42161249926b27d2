//! Adaptive Gauss–Kronrod (7/15) quadrature for vector-valued integrands.

use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Real, const N: usize>(f: &mut impl FnMut(T) -> [T; N], a: T, b: T) -> ([T; N], T) {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let mut kron = [T::zero(); N];
    let mut gauss = [T::zero(); N];
    let fc = f(mid);
    for c in 0..N {
        kron[c] = fc[c] * T::lit(WGK[7]);
        gauss[c] = fc[c] * T::lit(WG[3]);
    }
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let f1 = f(mid - dx);
        let f2 = f(mid + dx);
        for c in 0..N {
            let s = f1[c] + f2[c];
            kron[c] += s * T::lit(WGK[j]);
            if j % 2 == 1 {
                gauss[c] += s * T::lit(WG[j / 2]);
            }
        }
    }
    let mut err = T::zero();
    for c in 0..N {
        kron[c] *= half;
        gauss[c] *= half;
        err = err.max((kron[c] - gauss[c]).abs());
    }
    (kron, err)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` (max-norm over components)
/// by recursive bisection. Subintervals stop splitting at depth `max_depth`.
pub fn integrate<T: Real, const N: usize>(mut f: impl FnMut(T) -> [T; N], a: T, b: T, tol: T, max_depth: usize) -> [T; N] {
    let mut total = [T::zero(); N];
    if a == b {
        return total;
    }
    let mut stack = vec![(a, b, tol, 0usize)];
    while let Some((lo, hi, t, depth)) = stack.pop() {
        let (val, err) = gk15(&mut f, lo, hi);
        if err <= t || depth >= max_depth {
            for c in 0..N {
                total[c] += val[c];
            }
        } else {
            let mid = (lo + hi) * T::lit(0.5);
            let half_tol = t * T::lit(0.5);
            stack.push((mid, hi, half_tol, depth + 1));
            stack.push((lo, mid, half_tol, depth + 1));
        }
    }
    total
}

/// Scalar convenience wrapper around [`integrate`].
pub fn integrate_scalar<T: Real>(mut f: impl FnMut(T) -> T, a: T, b: T, tol: T) -> T {
    integrate(|t| [f(t)], a, b, tol, 40)[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate_scalar(|x: f64| x.powi(10) - 3.0 * x.powi(3), -1.0, 2.0, 1e-14);
        let exact = (2f64.powi(11) + 1.0) / 11.0 - 0.75 * (16.0 - 1.0);
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn smooth_bump_tail() {
        let v = integrate_scalar(|x: f64| (-1.0 / (1.0 - x * x)).exp(), -1.0 + 1e-15, 1.0 - 1e-15, 1e-13);
        // reference value of the standard mollifier integral
        assert!((v - 0.443_993_816_168_079_4).abs() < 1e-11, "{v}");
    }

    #[test]
    fn vector_components() {
        let [s, c] = integrate(|x: f64| [x.sin(), x.cos()], 0.0, std::f64::consts::PI, 1e-13, 30);
        assert!((s - 2.0).abs() < 1e-12);
        assert!(c.abs() < 1e-12);
    }

    #[test]
    fn single_precision() {
        let v = integrate_scalar(|x: f32| x.exp(), 0.0, 1.0, 1e-6);
        assert!((v - (std::f32::consts::E - 1.0)).abs() < 1e-5);
    }
}
