mod common;

use rand::Rng;
use rand_distr::StandardNormal;
use wave2ray::helmholtz::{grid_for, SolverOptions, C64};
use wave2ray::inversion::{fwi_baseline, misfit, misfit_gradient, reconstruct, FwiContext, InversionContext, LbfgsOptions, StopReason};
use wave2ray::measurement::MeasurementGrid;
use wave2ray::{Grid, Medium};

const SIGMA: f64 = 0.25;

fn context(k: f64, n_pos: usize, n_dir: usize) -> InversionContext {
    let grid = grid_for(2.0, k, 8.0).unwrap();
    let mgrid = MeasurementGrid::full_aperture(0.4, n_pos, n_dir).unwrap();
    InversionContext::new(k, SIGMA, mgrid, grid, 0.2, SolverOptions::default()).unwrap()
}

fn bump(grid: &Grid, amplitude: f64) -> Vec<f64> {
    Medium::bump(amplitude, 0.2).unwrap().sample_contrast(grid)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn random_direction(ctx: &InversionContext, seed: u64) -> Vec<f64> {
    let mut rng = common::rng(seed);
    let m: Vec<f64> = ctx.mask().iter().map(|_| rng.sample(StandardNormal)).collect();
    ctx.expand(&m)
}

#[test]
fn gradient_matches_central_differences() {
    let ctx = context(16.0, 24, 12);
    let data = ctx.simulate(&bump(&ctx.grid, 0.5)).unwrap();
    let q = bump(&ctx.grid, 0.3);
    let (_, g) = misfit_gradient(&ctx, &q, &data).unwrap();
    let eps = 1e-6;
    for seed in 0..5 {
        let dq = random_direction(&ctx, seed);
        let plus: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a - eps * b).collect();
        let fd = (misfit(&ctx, &plus, &data).unwrap() - misfit(&ctx, &minus, &data).unwrap()) / (2.0 * eps);
        let adj = dot(&g, &dq);
        let rel = (fd - adj).abs() / adj.abs();
        assert!(rel <= 1e-5, "direction {seed}: fd {fd:.10e} adjoint {adj:.10e} rel {rel:.2e}");
    }
}

#[test]
fn exact_fit_has_zero_misfit_and_gradient() {
    let ctx = context(16.0, 24, 12);
    let truth = bump(&ctx.grid, 0.5);
    let data = ctx.simulate(&truth).unwrap();
    let (j, g) = misfit_gradient(&ctx, &truth, &data).unwrap();
    assert!(j <= 1e-20, "misfit {j:e}");
    let (_, g0) = misfit_gradient(&ctx, &vec![0.0; truth.len()], &data).unwrap();
    let scale = g0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(gmax <= 1e-10 * scale, "gradient {gmax:e} vs scale {scale:e}");
    assert!(misfit(&ctx, &vec![0.0; truth.len()], &data).unwrap() > 0.0);
}

#[test]
fn misfit_is_symmetric_under_swap() {
    let ctx = context(16.0, 24, 12);
    let qa = bump(&ctx.grid, 0.4);
    let qb: Vec<f64> = ctx.expand(&ctx.restrict(&random_direction(&ctx, 9)).iter().map(|v| 0.05 * v).collect::<Vec<_>>());
    let da = ctx.simulate(&qa).unwrap();
    let db = ctx.simulate(&qb).unwrap();
    let ab = misfit(&ctx, &qa, &db).unwrap();
    let ba = misfit(&ctx, &qb, &da).unwrap();
    assert!((ab - ba).abs() <= 1e-12 * ab, "{ab:e} vs {ba:e}");
}

#[test]
fn gradient_is_masked_and_radially_symmetric() {
    let ctx = context(16.0, 24, 12);
    let data = ctx.simulate(&bump(&ctx.grid, 0.5)).unwrap();
    let (_, g) = misfit_gradient(&ctx, &vec![0.0; ctx.grid.len()], &data).unwrap();
    let inside: std::collections::HashSet<usize> = ctx.mask().iter().copied().collect();
    for (i, v) in g.iter().enumerate() {
        if !inside.contains(&i) {
            assert_eq!(*v, 0.0);
        }
    }
    // quarter turn (x, y) -> (-y, x) maps the source and receiver sets onto themselves
    let n = ctx.grid.n();
    let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for iy in 0..n {
        for ix in 0..n {
            let a = g[ctx.grid.index(ix, iy)];
            let b = g[ctx.grid.index(n - 1 - iy, ix)];
            assert!((a - b).abs() <= 1e-6 * scale, "({ix}, {iy}): {a:e} vs {b:e}");
        }
    }
}

#[test]
fn zero_data_returns_zero_contrast() {
    let ctx = context(16.0, 24, 12);
    let data = ctx.dataset(&vec![0.0; ctx.grid.len()]).unwrap();
    let run = reconstruct(&data, &ctx, None, &LbfgsOptions::default()).unwrap();
    assert!(run.history.len() <= 2);
    assert!(run.q.iter().all(|v| v.abs() < 1e-12));
    assert_eq!(run.status, StopReason::GradientTolerance);
}

#[test]
fn noiseless_bump_misfit_drops_six_orders() {
    let ctx = context(32.0, 24, 12);
    let truth = bump(&ctx.grid, 0.5);
    let data = ctx.dataset(&truth).unwrap();
    // the protocol tolerance is absolute for gradients below 1 and stops well before this depth
    let opts = LbfgsOptions { grad_tol: 1e-8, ..LbfgsOptions::default() };
    let run = reconstruct(&data, &ctx, Some(&truth), &opts).unwrap();
    let first = run.history.first().unwrap().misfit;
    let last = run.history.last().unwrap().misfit;
    assert!(run.history.windows(2).all(|w| w[1].misfit <= w[0].misfit));
    assert!(last <= 1e-6 * first, "misfit {first:e} -> {last:e} ({:?}, {} iterations)", run.status, run.history.len() - 1);
}

fn fwi_context(k: f64, n: usize) -> FwiContext {
    let grid = grid_for(2.2, k, 8.0).unwrap();
    FwiContext::new(k, grid, 1.0, n, n, 0.2, SolverOptions::default()).unwrap()
}

#[test]
fn fwi_gradient_matches_central_differences() {
    let ctx = fwi_context(16.0, 24);
    let data = ctx.data(&bump(&ctx.grid, 0.5)).unwrap();
    let q = bump(&ctx.grid, 0.3);
    let (_, g) = ctx.misfit_gradient(&q, &data).unwrap();
    let eps = 1e-6;
    let mut rng = common::rng(3);
    for _ in 0..3 {
        let m: Vec<f64> = ctx.mask().iter().map(|_| rng.sample(StandardNormal)).collect();
        let dq = ctx.expand(&m);
        let plus: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a + eps * b).collect();
        let minus: Vec<f64> = q.iter().zip(&dq).map(|(a, b)| a - eps * b).collect();
        let fd = (ctx.misfit_gradient(&plus, &data).unwrap().0 - ctx.misfit_gradient(&minus, &data).unwrap().0) / (2.0 * eps);
        let adj = dot(&g, &dq);
        assert!((fd - adj).abs() <= 1e-5 * adj.abs(), "fd {fd:e} adjoint {adj:e}");
    }
}

#[test]
fn fwi_constant_truth_recovers_zero() {
    let ctx = fwi_context(16.0, 24);
    let data = ctx.data(&vec![0.0; ctx.grid.len()]).unwrap();
    assert!(data.iter().all(|d| *d == C64::new(0.0, 0.0)));
    let run = fwi_baseline(&data, &ctx, None, &LbfgsOptions::default()).unwrap();
    assert!(run.q.iter().all(|v| v.abs() < 1e-12));
}
