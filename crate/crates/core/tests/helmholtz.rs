//! Discretization-level checks for the Helmholtz solver.

use std::f64::consts::PI;

use wave2ray::grid::GridSpec;
use wave2ray::helmholtz::{beam_rhs, BeamSource, HelmholtzOp, PmlSpec, SolverOptions, WaveField, C64};
use wave2ray::measurement::source_pose;
use wave2ray::medium::MediumField;
use wave2ray::Vec2;

fn beam_solve(m: &MediumField<f64>, k: f64, grid: GridSpec<f64>, opts: &SolverOptions, theta_i: f64) -> WaveField {
    let op = HelmholtzOp::assemble(m, k, grid, opts).unwrap();
    let (x, v) = source_pose(0.3, PI / 4.0, theta_i);
    let src = BeamSource::new(x, v, k, 0.25).unwrap();
    op.solve_source(&beam_rhs(&src, &op.layout().extended)).unwrap()
}

#[test]
fn fourth_order_grid_convergence() {
    let k = 16.0;
    let m = MediumField::bump(-0.5, 0.25).unwrap();
    // layer thickness fixed at 0.5 so all three grids discretize the same continuous problem
    let opts = SolverOptions { pml: PmlSpec { wavelengths: 0.5 * k / (2.0 * PI), ..PmlSpec::default() }, min_ppw: 4.0 };
    let fields: Vec<WaveField> = [33usize, 65, 129].iter().map(|&n| beam_solve(&m, k, GridSpec::new(0.5, n).unwrap(), &opts, 0.2)).collect();
    let diff = |a: &WaveField, b: &WaveField| {
        let ra = (a.grid.n() - 1) / 32;
        let rb = (b.grid.n() - 1) / 32;
        let mut acc = 0.0;
        for iy in 0..33 {
            for ix in 0..33 {
                let r = a.grid.node(ix * ra, iy * ra).norm();
                if (0.25..=0.35).contains(&r) {
                    acc += (a.at(ix * ra, iy * ra) - b.at(ix * rb, iy * rb)).norm_sqr();
                }
            }
        }
        acc.sqrt()
    };
    let e1 = diff(&fields[0], &fields[1]);
    let e2 = diff(&fields[1], &fields[2]);
    let order = (e1 / e2).log2();
    assert!(order >= 3.5, "observed order {order}");
}

#[test]
fn pml_wraparound_is_small() {
    let k = 32.0;
    let m = MediumField::<f64>::constant();
    let opts = SolverOptions { min_ppw: 4.0, ..SolverOptions::default() };
    let h = 1.0 / 60.0;
    let solve = |g: GridSpec<f64>| {
        let op = HelmholtzOp::assemble(&m, k, g, &opts).unwrap();
        let ext = op.layout().extended;
        let f: Vec<C64> = (0..ext.len())
            .map(|i| {
                let p = ext.node_of(i) - Vec2::new(0.2, 0.1);
                C64::new((-p.norm_sq() / (8.0 * h * h)).exp(), 0.0)
            })
            .collect();
        op.solve_source(&f).unwrap()
    };
    let small = solve(GridSpec::new(0.5, 61).unwrap());
    let big = solve(GridSpec::new(1.5, 181).unwrap());
    let (mut num, mut den) = (0.0, 0.0);
    for iy in 0..61 {
        for ix in 0..61 {
            num += (small.at(ix, iy) - big.at(ix + 60, iy + 60)).norm_sqr();
            den += big.at(ix + 60, iy + 60).norm_sqr();
        }
    }
    let rel = (num / den).sqrt();
    assert!(rel <= 1e-3, "relative wrap-around {rel}");
}

#[test]
fn beam_leaves_along_its_chord() {
    let k = 32.0;
    let m = MediumField::<f64>::constant();
    let grid = wave2ray::helmholtz::grid_for(1.0, k, 12.0).unwrap();
    let u = beam_solve(&m, k, grid, &SolverOptions::default(), 0.0);
    let (x_s, v_s) = source_pose(0.3, PI / 4.0, 0.0);
    let x_e = x_s - v_s * (2.0 * x_s.dot(v_s));
    let (mut on, mut off, mut count) = (0.0f64, 0.0f64, 0usize);
    for i in 0..u.grid.len() {
        let p = u.grid.node_of(i);
        if (p.norm() - 0.3).abs() > u.grid.spacing() {
            continue;
        }
        let e = u.values[i].norm_sqr();
        if (p - x_e).norm() < 0.05 {
            on = on.max(e);
        } else if (p - x_e).norm() > 0.2 && (p - x_s).norm() > 0.2 {
            off += e;
            count += 1;
        }
    }
    let off = off / count as f64;
    assert!(on >= 10.0 * off, "on-ray {on:.3e}, off-ray {off:.3e}");
}

#[test]
fn plane_wave_mirror_symmetry() {
    let k = 16.0;
    let m = MediumField::bump(-0.5, 0.25).unwrap();
    let grid = wave2ray::helmholtz::grid_for(1.0, k, 12.0).unwrap();
    let op = HelmholtzOp::assemble(&m, k, grid, &SolverOptions::default()).unwrap();
    let a = 0.4f64;
    let u = op.solve_plane_wave_scattered(&m, Vec2::new(a.cos(), a.sin())).unwrap();
    let w = op.solve_plane_wave_scattered(&m, Vec2::new(a.cos(), -a.sin())).unwrap();
    let n = grid.n();
    let mut worst = 0.0f64;
    let scale = u.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    for iy in 0..n {
        for ix in 0..n {
            worst = worst.max((u.at(ix, iy) - w.at(ix, n - 1 - iy)).norm());
        }
    }
    assert!(worst <= 1e-3 * scale, "{worst} vs {scale}");
    let boundary_energy: f64 = (0..n).map(|i| u.at(i, 0).norm_sqr()).sum();
    assert!(boundary_energy > 0.0);
}
