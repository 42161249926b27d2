//! Angular parameterization of sources and receivers on the measurement circle.
//!
//! A source at polar angle `theta_s` sits at `x_s = R (cos theta_s, sin theta_s)` and fires
//! into the disk along `v_s = -(cos(theta_s + theta_i), sin(theta_s + theta_i))`, so
//! `theta_i = 0` aims at the center. A receiver is described by its polar angle `theta_r`
//! and the outgoing direction `v_r` at angle `theta_o` from the outward normal.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::scalar::{angle_diff, wrap_angle, Vec2};

/// How receiver angles relate to the source.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReceiverFrame {
    /// `theta_r` is measured from `theta_s`: `x_r = R dir(theta_s + theta_r)`.
    Relative,
    /// `theta_r` is the polar angle of the receiver itself.
    Absolute,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementGrid {
    pub radius: f64,
    pub theta_s: Vec<f64>,
    pub theta_i: Vec<f64>,
    pub theta_r: Vec<f64>,
    pub theta_o: Vec<f64>,
    pub frame: ReceiverFrame,
}

/// Unit vector at angle `a`.
#[inline]
pub fn dir(a: f64) -> Vec2<f64> {
    Vec2::from_angle(a)
}

impl MeasurementGrid {
    /// Uniform grid with step `dtheta`: positions `j dtheta` on `[0, 2pi)`, directions
    /// `-pi/2 + j dtheta` strictly inside `(-pi/2, pi/2)`. Receivers are in the relative frame.
    pub fn uniform(radius: f64, dtheta: f64) -> Result<Self> {
        if !(radius > 0.0) || !(dtheta > 0.0) {
            return invalid("measurement grid needs positive radius and angle step");
        }
        let n_pos = (2.0 * PI / dtheta).round() as usize;
        let n_dir = (PI / dtheta).round() as usize;
        if (n_pos as f64 * dtheta - 2.0 * PI).abs() > 1e-9 || n_dir < 2 {
            return invalid(format!("angle step {dtheta} must divide 2pi"));
        }
        let pos: Vec<f64> = (0..n_pos).map(|j| j as f64 * dtheta).collect();
        let dirs: Vec<f64> = (1..n_dir).map(|j| -PI / 2.0 + j as f64 * dtheta).collect();
        Ok(Self {
            radius,
            theta_s: pos.clone(),
            theta_i: dirs.clone(),
            theta_r: pos,
            theta_o: dirs,
            frame: ReceiverFrame::Relative,
        })
    }

    /// Absolute-frame grid with `n_pos` positions and `n_dir` directions for both sources
    /// and receivers. Sources start at `pi`, receivers at `0`; directions are
    /// `-pi/2 + j pi/(n_dir + 1)`, `j = 1..=n_dir`.
    pub fn full_aperture(radius: f64, n_pos: usize, n_dir: usize) -> Result<Self> {
        if !(radius > 0.0) || n_pos == 0 || n_dir == 0 {
            return invalid("measurement grid needs positive radius and nonempty angle sets");
        }
        let step = 2.0 * PI / n_pos as f64;
        let dstep = PI / (n_dir + 1) as f64;
        let dirs: Vec<f64> = (1..=n_dir).map(|j| -PI / 2.0 + j as f64 * dstep).collect();
        Ok(Self {
            radius,
            theta_s: (0..n_pos).map(|i| PI + i as f64 * step).collect(),
            theta_i: dirs.clone(),
            theta_r: (0..n_pos).map(|j| j as f64 * step).collect(),
            theta_o: dirs,
            frame: ReceiverFrame::Absolute,
        })
    }

    /// Replaces the source angles with the given subset.
    pub fn with_sources(mut self, theta_s: Vec<f64>, theta_i: Vec<f64>) -> Self {
        self.theta_s = theta_s;
        self.theta_i = theta_i;
        self
    }

    pub fn n_sources(&self) -> usize {
        self.theta_s.len() * self.theta_i.len()
    }

    pub fn n_receivers(&self) -> usize {
        self.theta_r.len() * self.theta_o.len()
    }

    /// Tensor shape `[theta_s, theta_i, theta_r, theta_o]`.
    pub fn shape(&self) -> [usize; 4] {
        [self.theta_s.len(), self.theta_i.len(), self.theta_r.len(), self.theta_o.len()]
    }

    /// Splits a flat source index into `(i_s, i_i)`.
    pub fn source_indices(&self, src: usize) -> (usize, usize) {
        (src / self.theta_i.len(), src % self.theta_i.len())
    }

    pub fn source(&self, src: usize) -> (Vec2<f64>, Vec2<f64>) {
        let (is, ii) = self.source_indices(src);
        source_pose(self.radius, self.theta_s[is], self.theta_i[ii])
    }

    /// Receiver position and direction for a source and receiver index pair.
    pub fn receiver(&self, src: usize, ir: usize, io: usize) -> (Vec2<f64>, Vec2<f64>) {
        let base = self.receiver_base(src);
        let a = base + self.theta_r[ir];
        (dir(a) * self.radius, dir(a + self.theta_o[io]))
    }

    /// Angle offset added to `theta_r` for this source.
    pub fn receiver_base(&self, src: usize) -> f64 {
        match self.frame {
            ReceiverFrame::Relative => self.theta_s[self.source_indices(src).0],
            ReceiverFrame::Absolute => 0.0,
        }
    }

    /// Receiver angles `(theta_r, theta_o)` of an exit state in this grid's frame.
    pub fn exit_angles(&self, src: usize, x_r: Vec2<f64>, v_r: Vec2<f64>) -> (f64, f64) {
        let pos = x_r.angle();
        let theta_r = wrap_angle(pos - self.receiver_base(src));
        let theta_o = angle_diff(v_r.angle(), pos);
        (theta_r, theta_o)
    }

    /// Largest circular angular distance between two receiver coordinate pairs.
    pub fn angular_distance(a: (f64, f64), b: (f64, f64)) -> f64 {
        angle_diff(a.0, b.0).abs().max(angle_diff(a.1, b.1).abs())
    }
}

/// `(x_s, v_s)` for source angles `(theta_s, theta_i)` on a circle of radius `r`.
pub fn source_pose(r: f64, theta_s: f64, theta_i: f64) -> (Vec2<f64>, Vec2<f64>) {
    (dir(theta_s) * r, -dir(theta_s + theta_i))
}
