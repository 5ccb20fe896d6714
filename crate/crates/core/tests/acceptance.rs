//! Acceptance suite: ten criteria, one PASS/FAIL line each.
//!
//! Run with `cargo test -p vessel-core --test acceptance -- --nocapture --test-threads=1`
//! to see the lines in order.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vessel_core::bem3d1d::{
    assemble_bem, build_boundary_mesh, compare_to_1d, default_probes, solve_3d1d, solve_bem,
    sphere_unit_density_check, BemSettings, PanelQuadrature,
};
use vessel_core::fields::{theta_variation, ExteriorPressure, VelocityAnsatz};
use vessel_core::greens::{segment_potential, sn_apply, KernelContext, LineDensity};
use vessel_core::harness::loglog_slope;
use vessel_core::solver1d::{
    apriori_growth_checks, apriori_step_checks, assemble_system, check_apriori_bounds, poincare_grid,
    poincare_ratio, random_test_function, richardson_order, solve_1d, solve_pressure, AprioriRatios,
    PhysicalParams, SolverSettings,
};
use vessel_core::{Centerline, RadiusProfile, Vec3, VesselGeometry};

fn verdict(n: usize, name: &str, passed: bool, detail: String) {
    println!("criterion {n:>2} [{}] {name}: {detail}", if passed { "PASS" } else { "FAIL" });
    assert!(passed, "criterion {n} ({name}) failed: {detail}");
}

fn within(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t < limit, format!("{:.2}s of {:.0}s", t.as_secs_f64(), limit.as_secs_f64()))
}

fn straight(eps: f64) -> VesselGeometry {
    VesselGeometry::straight_spheroidal(eps).unwrap()
}

fn arc(eps: f64) -> VesselGeometry {
    VesselGeometry::new(Centerline::arc(1.0).unwrap(), RadiusProfile::spheroidal(), eps).unwrap()
}

fn solver(n: usize) -> SolverSettings {
    SolverSettings { intervals: n, ..SolverSettings::default() }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[test]
fn criterion_01_line_potential_oracle() {
    let start = Instant::now();
    let eps: f64 = 0.05;
    let l = (1.0 - eps * eps).sqrt();
    let g = straight(eps);
    let f = LineDensity::uniform(32, |_| 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let probes: Vec<Vec3> = (0..20)
        .map(|_| {
            let rho = rng.random_range(3.0 * eps..0.8);
            let th = rng.random_range(0.0..2.0 * PI);
            Vec3::new(rho * th.cos(), rho * th.sin(), rng.random_range(0.02..1.4))
        })
        .collect();
    let (mut exterior, mut surface): (f64, f64) = (0.0, 0.0);
    for ctx in [KernelContext::free_space(), KernelContext::half_space()] {
        let exact = |x: &Vec3| {
            let rho = x.x.hypot(x.y);
            segment_potential(rho, x.z, l) + if ctx.has_image() { segment_potential(rho, -x.z, l) } else { 0.0 }
        };
        for x in &probes {
            let e = exact(x);
            exterior = exterior.max((sn_apply(&ctx, &g, &f, x).unwrap() - e).abs() / e);
        }
        for k in 0..20 {
            let s = [0.0, 0.01, 0.3, 0.5, 0.77, 0.9, 0.99, 0.999, 0.9999, 0.6][k % 10];
            let x = g.surface_point(s, 0.3 * k as f64).unwrap();
            let e = exact(&x);
            surface = surface.max((sn_apply(&ctx, &g, &f, &x).unwrap() - e).abs() / e);
        }
    }
    let (fast, time) = within(start, Duration::from_secs(1));
    verdict(
        1,
        "line-potential oracle",
        exterior <= 1e-10 && surface <= 1e-6 && fast,
        format!("exterior rel err {exterior:.2e} (<= 1e-10), on-surface {surface:.2e} (<= 1e-6), {time}"),
    );
}

#[test]
fn criterion_02_zero_kappa_exactness() {
    let start = Instant::now();
    let ctx = KernelContext::default();
    let mut worst: f64 = 0.0;
    for p0 in [1.0, -2.0] {
        let params = PhysicalParams { kappa: 0.0, p0, ..PhysicalParams::default() };
        for g in [straight(0.05), arc(0.05)] {
            let sol = solve_1d(&g, &ctx, &solver(256), &params).unwrap();
            worst = worst.max(sol.p.iter().map(|p| (p - p0).abs()).fold(sup(&sol.f), f64::max));
            let mesh = build_boundary_mesh(&g, 40, 16, 0.0025).unwrap();
            let bem = solve_bem(&assemble_bem(&g, &mesh, &params, &ctx).unwrap()).unwrap();
            worst = worst.max(bem.p.iter().map(|p| (p - p0).abs()).fold(sup(&bem.sigma), f64::max));
            worst = worst.max(sup(&bem.q_wall));
        }
    }
    let (fast, time) = within(start, Duration::from_secs(10));
    verdict(
        2,
        "kappa = 0 exactness",
        worst <= 1e-12 && fast,
        format!("max |p - p0|, |F|, |sigma|, |q| = {worst:.2e} (<= 1e-12), {time}"),
    );
}

#[test]
fn criterion_03_linearity_in_p0() {
    let ctx = KernelContext::default();
    let g = arc(0.05);
    let base = PhysicalParams::default();
    let scaled = base.with_p0(-2.5);
    let a = solve_1d(&g, &ctx, &solver(128), &base).unwrap();
    let b = solve_1d(&g, &ctx, &solver(128), &scaled).unwrap();
    let rel = |x: &[f64], y: &[f64]| {
        let s = sup(x).max(f64::MIN_POSITIVE);
        x.iter().zip(y).map(|(u, v)| (-2.5 * u - v).abs()).fold(0.0, f64::max) / (2.5 * s)
    };
    let mut worst = rel(&a.p, &b.p).max(rel(&a.f, &b.f));

    let (fa, fb) = (ExteriorPressure::new(&ctx, &g, &a).unwrap(), ExteriorPressure::new(&ctx, &g, &b).unwrap());
    let pts: Vec<Vec3> = (0..10).map(|k| g.point(0.1 + 0.02 * k as f64, k as f64, 0.05 + 0.09 * k as f64)).collect();
    let qa: Vec<f64> = pts.iter().map(|x| fa.eval(x).unwrap()).collect();
    let qb: Vec<f64> = pts.iter().map(|x| fb.eval(x).unwrap()).collect();
    worst = worst.max(rel(&qa, &qb));

    let (ua, ub) = (VelocityAnsatz::new(&g, &a), VelocityAnsatz::new(&g, &b));
    let mut va = Vec::new();
    let mut vb = Vec::new();
    for k in 0..10 {
        let s = 0.05 + 0.09 * k as f64;
        let r = 0.5 * g.physical_radius(s);
        let (x, y) = (ua.velocity(r, k as f64, s).unwrap(), ub.velocity(r, k as f64, s).unwrap());
        va.extend(x.cartesian.iter());
        vb.extend(y.cartesian.iter());
    }
    worst = worst.max(rel(&va, &vb));
    let ta = theta_variation(&ctx, &g, &a).unwrap().surface_norm;
    let tb = theta_variation(&ctx, &g, &b).unwrap().surface_norm;
    worst = worst.max((2.5 * ta - tb).abs() / (2.5 * ta));

    let mesh = build_boundary_mesh(&g, 20, 8, 0.0025).unwrap();
    let sa = solve_bem(&assemble_bem(&g, &mesh, &base, &ctx).unwrap()).unwrap();
    let sb = solve_bem(&assemble_bem(&g, &mesh, &scaled, &ctx).unwrap()).unwrap();
    worst = worst.max(rel(&sa.p, &sb.p)).max(rel(&sa.sigma, &sb.sigma));
    verdict(
        3,
        "linearity in p0",
        worst <= 1e-12,
        format!("max relative deviation from exact scaling {worst:.2e} (<= 1e-12) over p, F, q, U, theta-variation, sigma"),
    );
}

#[test]
fn criterion_04_weighted_poincare() {
    let start = Instant::now();
    let radius = RadiusProfile::spheroidal();
    let s = poincare_grid(4096);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..100 {
        let f = random_test_function(&mut rng);
        let u: Vec<f64> = s.iter().map(|&x| f(x)).collect();
        assert_eq!(u[0], 0.0);
        let r = poincare_ratio(&radius, &s, &u);
        if r > 2.05 {
            failures += 1;
        }
        worst = worst.max(r);
    }
    let (fast, time) = within(start, Duration::from_secs(1));
    verdict(
        4,
        "weighted Poincare inequality",
        failures == 0 && fast,
        format!("worst ||u|| / ||a^2 u'|| = {worst:.4} over 100 functions (<= 2.05), {failures} violations, {time}"),
    );
}

#[test]
fn criterion_05_theta_independence_scaling() {
    let start = Instant::now();
    let ctx = KernelContext::default();
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let dev: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let sol = solve_1d(&arc(e), &ctx, &solver(256), &PhysicalParams::default()).unwrap();
            theta_variation(&ctx, &arc(e), &sol).unwrap().surface_norm / sol.params.p0.abs()
        })
        .collect();
    let slope = loglog_slope(&eps, &dev);
    let (fast, time) = within(start, Duration::from_secs(300));
    verdict(
        5,
        "theta-independence scaling",
        (0.8..=1.3).contains(&slope) && fast,
        format!("deviations {dev:?}, log-log slope {slope:.4} in [0.8, 1.3], {time}"),
    );
}

#[test]
fn criterion_06_straight_identities() {
    let start = Instant::now();
    let ctx = KernelContext::default();
    let (mut div, mut flux): (f64, f64) = (0.0, 0.0);
    let mut nodes = 0;
    for (eps, mu) in [(0.1, 1.0), (0.05, 1.7), (0.025, 0.6)] {
        let g = straight(eps);
        let params = PhysicalParams { mu, ..PhysicalParams::default() };
        let sol = solve_1d(&g, &ctx, &solver(256), &params).unwrap();
        let u = VelocityAnsatz::new(&g, &sol);
        let scale = eps.powi(4) / (16.0 * mu);
        let fmax = sup(&sol.f);
        for (i, &s) in sol.nodes().iter().enumerate() {
            if s > u.cutoff().inner {
                break;
            }
            nodes += 1;
            for k in 0..8 {
                let th = 2.0 * PI * k as f64 / 8.0;
                flux = flux.max((u.wall_flux_density(s, th).unwrap() - scale * sol.f[i]).abs() / (scale * fmax));
                for r in [0.0, 0.25, 0.5, 0.75, 1.0] {
                    let d = u.divergence(r * g.physical_radius(s), th, s).unwrap();
                    div = div.max(d.abs() / (scale * fmax));
                }
            }
        }
    }
    let (fast, time) = within(start, Duration::from_secs(30));
    verdict(
        6,
        "straight-geometry identities",
        div <= 1e-10 && flux <= 1e-10 && fast,
        format!("{nodes} plateau nodes: div U {div:.2e}, wall-flux identity {flux:.2e} (relative, <= 1e-10), {time}"),
    );
}

#[test]
fn criterion_07_sphere_jump_relation() {
    let start = Instant::now();
    let values = sphere_unit_density_check(16, 16, 1.0, &PanelQuadrature::default());
    let worst = values.iter().map(|v| (v + 1.0).abs()).fold(0.0, f64::max);
    let (fast, time) = within(start, Duration::from_secs(30));
    verdict(
        7,
        "sphere jump relation",
        worst <= 0.02 && values.len() == 256 && fast,
        format!("max |dq/dn + 1| = {worst:.2e} over 256 panels (<= 0.02), {time}"),
    );
}

#[test]
fn criterion_08_coupled_vs_1d_convergence() {
    let start = Instant::now();
    let ctx = KernelContext::default();
    let params = PhysicalParams::default();
    let eps = [0.1, 0.05, 0.025];
    let settings = BemSettings { n_stations: 160, n_theta: 16, ..BemSettings::default() };
    let err: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let g = straight(e);
            let bem = solve_3d1d(&g, &settings, &params, &ctx).unwrap();
            let sol = solve_pressure(&assemble_system(&g, &ctx, &bem.mesh.stations, &params).unwrap()).unwrap();
            compare_to_1d(&bem, &sol, &ctx, &default_probes(&g)).unwrap().ha_error
        })
        .collect();
    let monotone = err.windows(2).all(|w| w[1] < w[0]);
    let order = loglog_slope(&eps, &err);
    let (fast, time) = within(start, Duration::from_secs(1200));
    verdict(
        8,
        "3D-1D vs 1D convergence",
        monotone && order >= 0.4 && fast,
        format!("H^a errors {err:?}, monotone {monotone}, fitted order {order:.3} (>= 0.4), {time}"),
    );
}

#[test]
fn criterion_09_apriori_ratio_boundedness() {
    let ctx = KernelContext::default();
    let sweep: Vec<(f64, AprioriRatios)> = [0.1, 0.05, 0.025]
        .iter()
        .map(|&e| {
            let sol = solve_1d(&straight(e), &ctx, &solver(256), &PhysicalParams::default()).unwrap();
            (e, check_apriori_bounds(&sol))
        })
        .collect();
    let growth = apriori_growth_checks(&sweep, 2.0);
    let steps = apriori_step_checks(&sweep, 2.0);
    let passed = growth.iter().chain(&steps).all(|c| c.passed);
    let detail: Vec<String> = AprioriRatios::NAMES
        .iter()
        .enumerate()
        .map(|(k, n)| format!("{n}: growth {:.3}, per-halving {:.3}", growth[k].value, steps[k].value))
        .collect();
    verdict(9, "a-priori ratio boundedness", passed, format!("{} (all < 2)", detail.join("; ")));
}

#[test]
fn criterion_10_self_convergence() {
    let start = Instant::now();
    let ctx = KernelContext::default();
    let params = PhysicalParams::default();
    let mut orders = Vec::new();
    for g in [straight(0.1), arc(0.05)] {
        let n: Vec<f64> = [64, 128, 256]
            .iter()
            .map(|&k| solve_1d(&g, &ctx, &solver(k), &params).unwrap().ha_norm())
            .collect();
        orders.push(richardson_order(n[0], n[1], n[2]));
    }
    let g = straight(0.1);
    let probes: Vec<Vec3> = default_probes(&g).into_iter().take(10).collect();
    let q: Vec<Vec<f64>> = (0..3)
        .map(|k| {
            let settings = BemSettings { n_stations: (8 << k) + 1, n_theta: 8 << k, ..BemSettings::default() };
            let bem = solve_3d1d(&g, &settings, &params, &ctx).unwrap();
            probes.iter().map(|x| bem.q(x).unwrap()).collect()
        })
        .collect();
    let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let bem_order = (diff(&q[0], &q[1]) / diff(&q[1], &q[2])).log2();
    let reduction = diff(&q[0], &q[2]) / diff(&q[1], &q[2]);
    let min1d = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let (fast, time) = within(start, Duration::from_secs(600));
    verdict(
        10,
        "self-convergence",
        min1d >= 1.9 && bem_order >= 1.0 && fast,
        format!(
            "solver1d Richardson orders {orders:.3?} (>= 1.9); BEM probe order {bem_order:.3} (>= 1.0), error reduction vs finest {reduction:.2}x, {time}"
        ),
    );
}
