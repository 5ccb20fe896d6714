use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use vessel_core::bem3d1d::{assemble_bem, build_boundary_mesh, solve_bem};
use vessel_core::fields::{theta_variation, ExteriorPressure};
use vessel_core::greens::{sn_apply, KernelContext, LineDensity};
use vessel_core::solver1d::{assemble_system, solve_1d, solve_pressure, PhysicalParams, SolverSettings};
use vessel_core::{Centerline, RadiusProfile, Vec3, VesselGeometry};

fn arc(eps: f64) -> VesselGeometry {
    VesselGeometry::new(Centerline::arc(1.0).unwrap(), RadiusProfile::spheroidal(), eps).unwrap()
}

fn kernels(c: &mut Criterion) {
    let ctx = KernelContext::default();
    let g = arc(0.05);
    let params = PhysicalParams::default();
    let f = LineDensity::uniform(128, |t| 1.0 - t * t).unwrap();
    let x = g.surface_point(0.4, 0.7).unwrap();
    c.bench_function("sn_apply_on_surface", |b| b.iter(|| sn_apply(&ctx, &g, &f, black_box(&x)).unwrap()));
    let y = Vec3::new(0.2, 0.1, 0.5);
    c.bench_function("sn_apply_exterior", |b| b.iter(|| sn_apply(&ctx, &g, &f, black_box(&y)).unwrap()));

    let settings = SolverSettings { intervals: 128, ..SolverSettings::default() };
    let mesh = settings.mesh(g.eps()).unwrap();
    c.bench_function("assemble_1d_n128", |b| b.iter(|| assemble_system(&g, &ctx, &mesh, &params).unwrap()));
    let system = assemble_system(&g, &ctx, &mesh, &params).unwrap();
    c.bench_function("solve_pressure_n128", |b| b.iter(|| solve_pressure(&system).unwrap()));

    let sol = solve_1d(&g, &ctx, &settings, &params).unwrap();
    let field = ExteriorPressure::new(&ctx, &g, &sol).unwrap();
    c.bench_function("exterior_pressure_eval", |b| b.iter(|| field.eval(black_box(&y)).unwrap()));
    c.bench_function("theta_variation", |b| b.iter(|| theta_variation(&ctx, &g, &sol).unwrap()));
}

fn boundary_elements(c: &mut Criterion) {
    let ctx = KernelContext::default();
    let g = arc(0.05);
    let params = PhysicalParams::default();
    let mesh = build_boundary_mesh(&g, 20, 8, 0.0025).unwrap();
    let mut group = c.benchmark_group("bem");
    group.sample_size(10);
    group.bench_function("assemble_20x8", |b| b.iter(|| assemble_bem(&g, &mesh, &params, &ctx).unwrap()));
    let system = assemble_bem(&g, &mesh, &params, &ctx).unwrap();
    group.bench_function("solve_20x8", |b| b.iter(|| solve_bem(&system).unwrap()));
    group.finish();
}

criterion_group!(benches, kernels, boundary_elements);
criterion_main!(benches);
