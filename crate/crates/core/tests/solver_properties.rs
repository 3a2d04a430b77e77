use gflame_core::flow::FlowField;
use gflame_core::grid::{Grid3, ScalarField3};
use gflame_core::solver::{
    eikonal_limit, eikonal_step_with_slope, run, strang_step, SolverConfig, SplitStepPlan, TimeStepRule,
};
use gflame_core::FlowKind;
use std::f64::consts::PI;

fn max_diff(a: &ScalarField3, b: &ScalarField3) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Zero of `G` along the grid line through the centre, walking outward from
/// node `c` in direction `dir` along `axis`.
fn crossing(g: &ScalarField3, axis: usize, c: usize, dir: isize) -> f64 {
    let h = g.grid().h();
    let at = |m: isize| {
        let mut idx = [c as isize; 3];
        idx[axis] += dir * m;
        g.get_wrapped(idx[0], idx[1], idx[2])
    };
    let mut m = 0;
    while at(m + 1) > 0.0 {
        m += 1;
    }
    let (g0, g1) = (at(m), at(m + 1));
    (m as f64 + g0 / (g0 - g1)) * h
}

#[test]
fn shrinking_sphere_radius() {
    let n = 64;
    let grid = Grid3::new(n).unwrap();
    let r0 = 2.0;
    let mut g = ScalarField3::from_fn(grid, |x, y, z| {
        r0 - ((x - PI).powi(2) + (y - PI).powi(2) + (z - PI).powi(2)).sqrt()
    });
    let t_final = 0.5;
    let steps = (t_final / (0.5 * eikonal_limit(grid.h()))).ceil() as usize;
    let dt = t_final / steps as f64;
    for _ in 0..steps {
        g = eikonal_step_with_slope(&g, dt, [0.0; 3]).unwrap();
    }
    let expect = r0 - t_final;
    let c = n / 2;
    for axis in 0..3 {
        for dir in [-1, 1] {
            let r = crossing(&g, axis, c, dir);
            assert!((r - expect).abs() <= 2.0 * grid.h(), "axis {axis} dir {dir}: {r} vs {expect}");
        }
    }
}

#[test]
fn splitting_self_convergence_is_second_order() {
    // coarser grids let interpolation error leak into the time-step ladder
    let grid = Grid3::new(48).unwrap();
    let flow = FlowField::new(FlowKind::Abc, 1.0);
    let plan = SplitStepPlan::strang();
    let t_final = 0.4;
    let solve = |steps: usize| {
        let dt = t_final / steps as f64;
        let mut u = ScalarField3::zeros(grid);
        for _ in 0..steps {
            u = strang_step(&u, &plan, &flow, dt).unwrap();
        }
        u
    };
    let (a, b, c) = (solve(8), solve(16), solve(32));
    let order = (max_diff(&a, &b) / max_diff(&b, &c)).log2();
    assert!(order >= 2.0, "observed order {order}");
}

#[test]
fn zero_intensity_is_pure_eikonal() {
    let grid = Grid3::new(16).unwrap();
    let flow = FlowField::new(FlowKind::Kolmogorov, 0.0);
    let u0 = ScalarField3::from_fn(grid, |x, y, z| 0.2 * x.sin() * (y + z).cos());
    let dt = 0.5 * eikonal_limit(grid.h());
    let mut with = u0.clone();
    let mut without = u0;
    for _ in 0..5 {
        with = strang_step(&with, &SplitStepPlan::strang(), &flow, dt).unwrap();
        without = strang_step(&without, &SplitStepPlan::eikonal_only(), &flow, dt).unwrap();
    }
    assert_eq!(with, without);
}

#[test]
fn mean_decreases_and_growth_is_linear() {
    let cfg = SolverConfig { n: 32, flow: FlowKind::Abc, intensity: 2.0, t_final: 3.0, ..Default::default() };
    let out = run(&cfg).unwrap();
    let dt = cfg.dt();
    let s = &out.series;
    // −mean(U) is nondecreasing up to interpolation drift
    for w in s.mean_regression.windows(2) {
        assert!(w[1] >= w[0] - 1e-3 * dt, "{} -> {}", w[0], w[1]);
    }
    let bound = (2.0 * cfg.intensity + 1.0) * cfg.t_final + 1.0;
    assert!(out.field.max_abs() <= bound);
}

#[test]
fn kolmogorov_solution_inherits_shift_symmetry() {
    let n = 32;
    let grid = Grid3::new(n).unwrap();
    let flow = FlowField::new(FlowKind::Kolmogorov, 3.0);
    let dt = 0.5 * eikonal_limit(grid.h());
    let mut u = ScalarField3::zeros(grid);
    for _ in 0..10 {
        u = strang_step(&u, &SplitStepPlan::strang(), &flow, dt).unwrap();
    }
    // (x, y, z) -> (x, π + y, π − z)
    let h = n as isize / 2;
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let image = u.get_wrapped(i as isize, j as isize + h, h - k as isize);
                worst = worst.max((image - u.get(i, j, k)).abs());
            }
        }
    }
    assert!(u.max_abs() > 0.1);
    assert!(worst < 1e-10, "{worst:e}");
}

#[test]
fn runs_are_bitwise_deterministic() {
    let cfg = SolverConfig { n: 16, flow: FlowKind::Kolmogorov, intensity: 1.5, t_final: 1.0, snapshots: 1, ..Default::default() };
    let a = run(&cfg).unwrap();
    let b = run(&cfg).unwrap();
    assert_eq!(a, b);
}

#[test]
fn speed_grows_with_intensity() {
    let speeds: Vec<(f64, f64, f64)> = [0.0, 0.5, 1.0, 2.0, 4.0]
        .iter()
        .map(|&a| {
            let cfg = SolverConfig { n: 32, flow: FlowKind::Abc, intensity: a, t_final: 4.0, ..Default::default() };
            let s = run(&cfg).unwrap().series;
            (a, s.fitted_slope, s.slope_std_error)
        })
        .collect();
    for w in speeds.windows(2) {
        assert!(w[1].1 >= w[0].1 - w[1].2.max(w[0].2), "{speeds:?}");
    }
}

#[test]
fn laminar_speed_is_unity_for_every_flow() {
    for flow in FlowKind::ALL {
        for rule in [TimeStepRule::Intermediate, TimeStepRule::Eikonal, TimeStepRule::fd_for(flow)] {
            let cfg = SolverConfig { n: 16, flow, intensity: 0.0, t_final: 2.0, dt_rule: rule, ..Default::default() };
            let s = run(&cfg).unwrap().series;
            assert!((s.fitted_slope - 1.0).abs() < 1e-12);
            assert!(s.speeds.iter().all(|v| (v - 1.0).abs() < 1e-12));
        }
    }
}
