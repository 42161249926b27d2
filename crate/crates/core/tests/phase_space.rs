//! Wigner and Husimi transforms against closed forms and independent quadratures.

mod common;

use std::f64::consts::PI;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use wave2ray::grid::GridSpec;
use wave2ray::helmholtz::{beam_rhs, grid_for, BeamSource, HelmholtzOp, SolverOptions, C64};
use wave2ray::measurement::{source_pose, MeasurementGrid};
use wave2ray::medium::MediumField;
use wave2ray::phase_space::*;
use wave2ray::Vec2;

fn moyal_grid() -> GridSpec<f64> {
    GridSpec::new(0.6, 155).unwrap()
}

const MOYAL_ALPHA: f64 = 104.0;
const MOYAL_WINDOW: WignerWindow = WignerWindow { half_width: 0.5, taper: 0.0 };

#[test]
fn moyal_on_random_packet_pairs() {
    let k = 32.0;
    let g = moyal_grid();
    let mut r = rng(11);
    for _ in 0..2 {
        let u1 = packet_field(g, k, MOYAL_ALPHA, &random_packets(3, 0.05, &mut r));
        let u2 = packet_field(g, k, MOYAL_ALPHA, &random_packets(3, 0.05, &mut r));
        let (lhs, rhs) = moyal_check(&u1, &u2, &MOYAL_WINDOW).unwrap();
        assert!((lhs - rhs).abs() <= 1e-3 * rhs, "{lhs} vs {rhs}");
    }
}

#[test]
fn moyal_identity_and_orthogonal_cases() {
    let k = 32.0;
    let g = moyal_grid();
    let coherent = field(g, k, |x| C64::new((k / PI).sqrt() * (-0.5 * k * x.norm_sq()).exp(), 0.0));
    let narrow = WignerWindow { half_width: 0.5, taper: 0.0 };
    let mut r = rng(3);
    let a = packet_field(g, k, MOYAL_ALPHA, &random_packets(2, 0.05, &mut r));
    let b = packet_field(g, k, MOYAL_ALPHA, &random_packets(2, 0.05, &mut r));
    let c = inner(&a, &b) / inner(&a, &a);
    let b_perp = wave2ray::helmholtz::WaveField { values: b.values.iter().zip(&a.values).map(|(y, x)| y - c * x).collect(), ..b.clone() };
    let (lhs, rhs) = moyal_check(&a, &b_perp, &narrow).unwrap();
    let scale = husimi_prefactor(k) * inner(&a, &a).re * inner(&b_perp, &b_perp).re;
    assert!(rhs <= 1e-20 * scale);
    assert!(lhs.abs() <= 1e-3 * scale, "{lhs} vs scale {scale}");
    // coherent state: envelope exp(-k|x|^2/2) is 1e-8 at |x| = 1.07, wider than the grid, so only
    // the normalized identity is checked with the Gaussian truncated inside the lag window
    let unit = inner(&coherent, &coherent).re;
    let (lhs, rhs) = moyal_check(&coherent, &coherent, &narrow).unwrap();
    assert!((rhs - husimi_prefactor(k) * unit * unit).abs() <= 1e-12 * rhs);
    assert!((lhs - rhs).abs() <= 1e-3 * rhs, "{lhs} vs {rhs}");
}

#[test]
fn husimi_is_wigner_smoothed_by_coherent_kernel() {
    let k = 32.0;
    let g = GridSpec::new(0.6, 77).unwrap();
    let mut r = rng(5);
    let packets = random_packets(3, 0.1, &mut r);
    let u = packet_field(g, k, 60.0, &packets);
    for i in 0..3 {
        let p = packets[i % packets.len()];
        let x0 = p.center + Vec2::new(r.random_range(-0.05..0.05), r.random_range(-0.05..0.05));
        let v0 = p.direction.rotated(r.random_range(-0.2..0.2));
        let direct = husimi_point(&u, &ReceiverFilter::new(k, v0).unwrap(), x0).unwrap();
        let oracle = husimi_from_wigner(&u, x0, v0);
        assert!((direct - oracle).abs() <= 1e-3 * direct, "{direct} vs {oracle}");
    }
}

#[test]
fn wigner_of_a_single_field_is_real() {
    let k = 32.0;
    let g = GridSpec::new(0.5, 65).unwrap();
    let u = packet_field(g, k, 60.0, &random_packets(4, 0.15, &mut rng(9)));
    let win = WignerWindow { half_width: 0.4, taper: 0.2 };
    for (ix, iy) in [(32, 32), (20, 40), (45, 30)] {
        let w = wigner_fft(&u, &u, ix, iy, &win, 0).unwrap();
        let peak = w.values.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        let imag = w.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        assert!(imag <= 1e-10 * peak.max(1e-300) + 1e-10, "{imag} vs {peak}");
        let vs = [w.velocity(3, 1), w.velocity(w.size - 2, 5)];
        let direct = wigner_direct(&u, &u, ix, iy, &win, &vs).unwrap();
        assert!((direct[0] - w.values[w.size + 3]).norm() <= 1e-9 * peak);
        assert!((direct[1] - w.values[5 * w.size + w.size - 2]).norm() <= 1e-9 * peak);
    }
}

#[test]
fn beam_wigner_moments_match_density_and_flux() {
    let k = 64.0;
    let sigma = 0.25;
    let grid = grid_for(1.0, k, 12.0).unwrap();
    let op = HelmholtzOp::assemble(&MediumField::bump(-0.5, 0.25).unwrap(), k, grid, &SolverOptions::default()).unwrap();
    let (x, v) = source_pose(0.3, PI / 4.0, 0.2);
    let u = op.solve_source(&beam_rhs(&BeamSource::new(x, v, k, sigma).unwrap(), &op.layout().extended)).unwrap();
    let n = grid.n();
    let big = u.values.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
    // every 5th node inside the measurement disk, where the lag window is not cut by the grid edge
    let nodes: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let (ix, iy) = (i % n, i / n);
            ix % 5 == 0 && iy % 5 == 0 && (4..n - 4).contains(&ix) && (4..n - 4).contains(&iy) && u.values[i].norm_sqr() >= 1e-2 * big
                && grid.node_of(i).norm() <= 0.35
        })
        .collect();
    assert!(nodes.len() > 50);
    let win = WignerWindow::for_beam(&grid, k, sigma);
    let moments = wigner_moments(&u, &nodes, &win).unwrap();
    let mut worst_e: f64 = 0.0;
    let mut worst_f: f64 = 0.0;
    for (&i, (e, f)) in nodes.iter().zip(&moments) {
        let val = u.values[i];
        let [gx, gy] = fd_gradient(&u, i % n, i / n);
        let flux = Vec2::new((val.conj() * gx).im, (val.conj() * gy).im) * (1.0 / k);
        worst_e = worst_e.max((e - val.norm_sqr()).abs() / val.norm_sqr());
        worst_f = worst_f.max((*f - flux).norm() / flux.norm());
    }
    assert!(worst_e <= 1e-12, "energy {worst_e}");
    assert!(worst_f <= 1e-2, "flux {worst_f}");
}

#[test]
fn head_on_husimi_grid_is_mirror_symmetric() {
    let k = 32.0;
    let grid = grid_for(1.2, k, 10.0).unwrap();
    let op = HelmholtzOp::assemble(&MediumField::bump(-0.5, 0.25).unwrap(), k, grid, &SolverOptions::default()).unwrap();
    let mg = MeasurementGrid::uniform(0.3, PI / 30.0).unwrap();
    let ii = mg.theta_i.iter().position(|t| t.abs() < 1e-12).unwrap();
    let src = ii;
    let (x, v) = mg.source(src);
    let u = op.solve_source(&beam_rhs(&BeamSource::new(x, v, k, 0.25).unwrap(), &op.layout().extended)).unwrap();
    let h = husimi_grid(&u, &mg, src).unwrap();
    let (n_r, n_o) = (mg.theta_r.len(), mg.theta_o.len());
    let peak = h.iter().cloned().fold(0.0, f64::max);
    for ir in 0..n_r {
        for io in 0..n_o {
            let a = h[ir * n_o + io];
            let b = h[((n_r - ir) % n_r) * n_o + (n_o - 1 - io)];
            assert!((a - b).abs() <= 1e-6 * peak, "({ir},{io}): {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn husimi_is_nonnegative(seed in 0u64..1000, x in -0.2f64..0.2, y in -0.2f64..0.2, a in 0.0f64..6.28) {
        let g = GridSpec::new(0.4, 41).unwrap();
        let u = packet_field(g, 24.0, 50.0, &random_packets(2, 0.1, &mut rng(seed)));
        let h = husimi_point(&u, &ReceiverFilter::new(24.0, Vec2::from_angle(a)).unwrap(), Vec2::new(x, y)).unwrap();
        prop_assert!(h >= 0.0);
    }
}
