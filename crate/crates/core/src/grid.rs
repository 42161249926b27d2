//! Uniform square grids on `[-L/2, L/2]^2`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scalar::{Real, Vec2};

/// Uniform tensor grid with `points_per_axis` nodes per side, spacing `L/(N-1)`.
///
/// Arrays on the grid are row-major with the `y` index outermost:
/// `values[iy * n + ix]` sits at `(x_ix, y_iy)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub half_width: T,
    pub points_per_axis: usize,
}

impl<T: Real> GridSpec<T> {
    pub fn new(half_width: T, points_per_axis: usize) -> Result<Self> {
        if points_per_axis < 2 {
            return invalid(format!("grid needs at least 2 points per axis, got {points_per_axis}"));
        }
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return invalid(format!("grid half width must be positive and finite, got {half_width}"));
        }
        Ok(Self { half_width, points_per_axis })
    }

    /// Smallest grid on `[-half_width, half_width]^2` whose spacing does not exceed `max_spacing`.
    pub fn with_max_spacing(half_width: T, max_spacing: T) -> Result<Self> {
        let cells = (T::lit(2.0) * half_width / max_spacing).ceil();
        let cells = cells.to_usize().unwrap_or(1).max(1);
        Self::new(half_width, cells + 1)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.points_per_axis
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points_per_axis * self.points_per_axis
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn width(&self) -> T {
        T::lit(2.0) * self.half_width
    }

    #[inline]
    pub fn spacing(&self) -> T {
        self.width() / T::from_usize(self.points_per_axis - 1).unwrap()
    }

    /// Coordinate of node `i` along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> T {
        -self.half_width + T::from_usize(i).unwrap() * self.spacing()
    }

    #[inline]
    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.points_per_axis + ix
    }

    #[inline]
    pub fn node(&self, ix: usize, iy: usize) -> Vec2<T> {
        Vec2::new(self.coord(ix), self.coord(iy))
    }

    #[inline]
    pub fn node_of(&self, flat: usize) -> Vec2<T> {
        self.node(flat % self.points_per_axis, flat / self.points_per_axis)
    }

    /// Fractional grid coordinate of `x` along one axis.
    #[inline]
    pub fn locate(&self, x: T) -> T {
        (x + self.half_width) / self.spacing()
    }

    pub fn contains(&self, p: Vec2<T>) -> bool {
        p.x.abs() <= self.half_width && p.y.abs() <= self.half_width
    }

    /// Range of node indices whose coordinate lies in `[lo, hi]`, clipped to the grid.
    pub fn index_range(&self, lo: T, hi: T) -> std::ops::Range<usize> {
        let n = self.points_per_axis;
        let a = self.locate(lo).ceil().max(T::zero());
        let b = self.locate(hi).floor();
        if b < T::zero() {
            return 0..0;
        }
        let a = a.to_usize().unwrap_or(0).min(n);
        let b = b.to_usize().unwrap_or(0).min(n - 1);
        if a > b {
            0..0
        } else {
            a..b + 1
        }
    }

    pub fn cast<U: Real>(&self) -> GridSpec<U> {
        GridSpec { half_width: U::lit(self.half_width.as_f64()), points_per_axis: self.points_per_axis }
    }
}
