//! Control synthesis end to end, free evolution limits and zero padding.

use hermite_reach_core::fd::{cn_run, FdGrid, FdOptions};
use hermite_reach_core::hermite::hermite_functions;
use hermite_reach_core::images::{phi_symmetric, ImagesConfig};
use hermite_reach_core::math::{c64, real, PI};
use hermite_reach_core::quad::GaussLegendre;
use hermite_reach_core::synth::{
    backward_residual, free_evolve, make_cutoff, restrict_pad, synthesize, verify_reach,
    EvolveConfig, ReachGrid, RotatedDatum, SynthesisProblem,
};
use hermite_reach_core::{ControlSignal, Expr, Sequential, C64};

fn problem(g: &str) -> SynthesisProblem {
    SynthesisProblem::new(Expr::parse(g).unwrap(), 1.0, 1.2, 1.5, 0.3).unwrap()
}

fn datum(g: &str) -> RotatedDatum {
    RotatedDatum::new(Expr::parse(g).unwrap(), make_cutoff(1.2, 1.5).unwrap()).unwrap()
}

fn grid_in_square(l: f64, n: usize) -> Vec<C64> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let a = l * (2.0 * i as f64 / (n - 1) as f64 - 1.0);
            let b = l * (2.0 * j as f64 / (n - 1) as f64 - 1.0);
            out.push(c64((a + b) / 2.0, (a - b) / 2.0));
        }
    }
    out
}

#[test]
fn reaches_cos_within_tolerance() {
    let out = synthesize(&Sequential, &problem("cos(z)"), true).unwrap();
    let rep = out.diagnostics.reach.unwrap();
    assert!(rep.sup_residual <= 1e-2, "{rep:?}");
    assert_eq!(rep.core_interval, (-0.9, 0.9));
}

#[test]
fn even_targets_give_equal_controls() {
    let out = synthesize(&Sequential, &problem("cos(z)"), false).unwrap();
    for i in 0..=50 {
        let s = 0.3 * i as f64 / 50.0;
        let (a, b) = (out.u_minus.eval(s).unwrap(), out.u_plus.eval(s).unwrap());
        assert!(
            (a - b).norm() <= 1e-12 * a.norm().max(1.0),
            "s={s}: {a} vs {b}"
        );
    }
}

#[test]
fn zero_target_has_zero_controls_and_residual() {
    let out = synthesize(&Sequential, &problem("0"), true).unwrap();
    assert!(out.u_minus.is_zero() && out.u_plus.is_zero());
    assert!(out.diagnostics.reach.unwrap().sup_residual <= 1e-12);
}

#[test]
fn residual_shrinks_under_oracle_refinement() {
    let mut p = problem("z");
    let out = synthesize(&Sequential, &p, false).unwrap();
    let mut res = Vec::new();
    for (dx, dt) in [(0.02, 0.01), (0.01, 0.005)] {
        p.reach = ReachGrid { dx, dt, core: 0.9 };
        res.push(
            verify_reach(&Sequential, &out.u_minus, &out.u_plus, &p)
                .unwrap()
                .sup_residual,
        );
    }
    // second order would give 4; allow for the synthesis floor
    assert!(res[0] / res[1] >= 3.0, "{res:?}");
    assert!(res[1] <= 1e-2);
}

#[test]
fn corner_values_are_the_target_at_the_edges() {
    let out = synthesize(&Sequential, &problem("exp(z/2)"), false).unwrap();
    let d = &out.diagnostics;
    assert!((d.corner_minus - real((-0.5f64).exp())).norm() < 1e-12);
    assert!((d.corner_plus - real(0.5f64.exp())).norm() < 1e-12);
}

#[test]
fn large_time_is_the_ground_state_projection() {
    let w0 = datum("cos(z)");
    let cfg = EvolveConfig::default();
    let gl = GaussLegendre::new(40);
    let edges: Vec<f64> = (0..=40).map(|i| -1.5 + 3.0 * i as f64 / 40.0).collect();
    let h0 = |x: f64| hermite_functions(0, real(x))[0];
    let coef = gl.integrate_panels_c(&edges, |x| w0.eval(x).unwrap() * h0(x));
    let z = c64(0.3, 0.2);
    let mut prev = f64::INFINITY;
    for t in [1.0, 2.0, 4.0] {
        let v = free_evolve(&w0, t, z, &cfg).unwrap().value;
        let proj = coef * hermite_functions(0, z)[0] * (-t).exp();
        let dev = (v / proj - 1.0).norm();
        assert!(dev < prev, "t={t}: {dev}");
        prev = dev;
    }
    assert!(prev < 1e-3, "{prev}");
}

#[test]
fn small_time_example() {
    let v = free_evolve(
        &datum("cos(z)"),
        1e-3,
        c64(0.2, 0.1),
        &EvolveConfig::default(),
    )
    .unwrap();
    // on the plateau w₀(z) = g(iz)
    let want = (c64(0.2, 0.1) * c64(0.0, 1.0)).cos();
    assert!((v.value - want).norm() <= 1e-3, "{} vs {want}", v.value);
}

#[test]
fn uniform_small_time_convergence() {
    let w0 = datum("exp(z/2) + z^2");
    let cfg = EvolveConfig::default();
    let pts = grid_in_square(0.8 * 1.2, 9);
    let sup = |t: f64| {
        pts.iter()
            .map(|&z| {
                (free_evolve(&w0, t, z, &cfg).unwrap().value - w0.analytic(z).unwrap()).norm()
            })
            .fold(0.0, f64::max)
    };
    let errs: Vec<f64> = [0.05, 0.02, 0.01, 5e-3, 2e-3, 1e-3]
        .iter()
        .map(|&t| sup(t))
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[5] <= 1e-2, "{errs:?}");
}

#[test]
fn tails_obey_the_damping_bound() {
    let w0 = datum("cos(z) + z");
    let cfg = EvolveConfig::default();
    let (l1, l2) = (1.0, 1.2);
    let gl = GaussLegendre::new(40);
    let edges: Vec<f64> = (0..=60).map(|i| -1.5 + 3.0 * i as f64 / 60.0).collect();
    let l1_norm = gl
        .integrate_panels_c(&edges, |x| real(w0.eval(x).unwrap().norm()))
        .re;
    for t in [1e-3, 0.01, 0.05, 0.2] {
        let s2 = libm::sinh(2.0 * t);
        let bound =
            (2.0 * PI * s2).powf(-0.5) * (-(l2 - l1) * (l2 - l1) / (2.0 * s2)).exp() * l1_norm;
        for &z in &grid_in_square(0.99 * l1, 7) {
            let tails = free_evolve(&w0, t, z, &cfg).unwrap().tails;
            assert!(
                tails.norm() <= bound,
                "t={t} z={z}: {} > {bound}",
                tails.norm()
            );
        }
    }
}

#[test]
fn backward_equation_holds_in_the_interior() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
    let cfg = EvolveConfig::default();
    for g in ["cos(z)", "z^2", "exp(z/2)"] {
        let w0 = datum(g);
        for _ in 0..10 {
            let t = rng.gen_range(0.05..0.3);
            let (a, b) = (rng.gen_range(-0.8..0.8), rng.gen_range(-0.8..0.8));
            let x = c64((a + b) / 2.0, (a - b) / 2.0);
            let (res, scale) = backward_residual(&w0, t, x, 2.5e-4, &cfg).unwrap();
            assert!(res <= 1e-4 * scale, "{g} t={t} x={x}: {res} vs {scale}");
        }
    }
}

#[test]
fn padded_traces_vanish_first_and_drive_the_segment() {
    let tau = 0.3;
    let cfg = ImagesConfig::default();
    let l = 3.5;
    let um = ControlSignal::from_expr(Expr::parse("1 + t").unwrap(), tau).unwrap();
    let up = ControlSignal::from_expr(Expr::parse("cos(4*t)").unwrap(), tau).unwrap();
    let pad = restrict_pad(&um, &up, l, &cfg).unwrap();
    for i in 0..=20 {
        let t = tau * i as f64 / 20.0;
        assert!(pad.v0.eval(t).unwrap().norm() <= 1e-10);
        assert!(pad.vpi.eval(t).unwrap().norm() <= 1e-10);
    }
    // the padded state on (0, π) at 2τ solves the segment problem driven by
    // the traces
    let g = FdGrid::with_steps(0.0, PI, PI / 200.0, 1.5e-3, 2.0 * tau).unwrap();
    let sol = cn_run(
        &g,
        &pad.v0,
        &pad.vpi,
        &g.sample(|_| real(0.0)),
        &FdOptions::default(),
    )
    .unwrap();
    let dev = (1..sol.x.len() - 1)
        .step_by(10)
        .map(|i| (sol.w[i] - phi_symmetric(&um, &up, tau, l, real(sol.x[i]), &cfg).unwrap()).norm())
        .fold(0.0, f64::max);
    assert!(dev <= 1e-4, "{dev}");
}

#[test]
fn zero_controls_pad_to_zero_traces() {
    let zero = ControlSignal::zero(0.2).unwrap();
    let pad = restrict_pad(&zero, &zero, PI, &ImagesConfig::default()).unwrap();
    for i in 0..=10 {
        let t = 0.4 * i as f64 / 10.0;
        assert_eq!(pad.v0.eval(t).unwrap(), real(0.0));
        assert_eq!(pad.vpi.eval(t).unwrap(), real(0.0));
    }
}
