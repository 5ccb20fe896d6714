//! Single-layer collocation for the coupled 3D-1D system: exterior Laplace with Robin
//! data on the vessel wall, coupled to the theta-averaged Poiseuille balance.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{interior_pressure, ExteriorPressure};
use crate::geometry::VesselGeometry;
use crate::greens::{reflect, KernelContext, INTERIOR_TOLERANCE};
use crate::quadrature::UnitRule;
use crate::solver1d::{Mesh1D, PhysicalParams, Solution1D};
use crate::Vec3;

/// Point, unit normal and area element of a parameterized surface.
#[derive(Debug, Clone, Copy)]
pub struct SurfacePoint {
    pub x: Vec3,
    pub normal: Vec3,
    pub jacobian: f64,
}

/// A surface given by `(u, v)` parameters.
pub trait ParametricSurface: Sync {
    fn eval(&self, u: f64, v: f64) -> SurfacePoint;
}

/// The vessel wall with `u = s`, `v = theta`. Valid for `s < 1`.
#[derive(Debug, Clone, Copy)]
pub struct VesselSurface<'a> {
    pub geom: &'a VesselGeometry,
}

impl ParametricSurface for VesselSurface<'_> {
    fn eval(&self, s: f64, theta: f64) -> SurfacePoint {
        let g = self.geom;
        let eps = g.eps();
        let tri = g.triad(s);
        let (a, a_da, _) = g.radius().weighted(s);
        let e_r = tri.e1 * theta.cos() + tri.e2 * theta.sin();
        let kh = tri.kappa1 * theta.cos() + tri.kappa2 * theta.sin();
        let slope = eps * a_da / a;
        SurfacePoint {
            x: g.centerline().position(s) + e_r * (eps * a),
            normal: (e_r - tri.tangent * slope) / (1.0 + slope * slope).sqrt(),
            jacobian: eps * ((a * (1.0 - eps * a * kh)).powi(2) + (eps * a_da).powi(2)).sqrt(),
        }
    }
}

/// Sphere of the given radius centred at the origin, `u` polar and `v` azimuthal angle.
#[derive(Debug, Clone, Copy)]
pub struct Sphere {
    pub radius: f64,
}

impl ParametricSurface for Sphere {
    fn eval(&self, u: f64, v: f64) -> SurfacePoint {
        let n = Vec3::new(u.sin() * v.cos(), u.sin() * v.sin(), u.cos());
        SurfacePoint {
            x: n * self.radius,
            normal: n,
            jacobian: self.radius * self.radius * u.sin(),
        }
    }
}

/// Panel quadrature controls.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PanelQuadrature {
    /// Tensor Gauss–Legendre order on regular panels and sub-panels.
    pub order: usize,
    /// Order of the Duffy rule on each of the four self-panel triangles.
    pub duffy_order: usize,
    /// Sub-panels are split while their diameter exceeds this multiple of the distance.
    pub refine_ratio: f64,
    pub max_depth: u32,
}

impl Default for PanelQuadrature {
    fn default() -> Self {
        Self {
            order: 4,
            duffy_order: 12,
            refine_ratio: 0.6,
            max_depth: 24,
        }
    }
}

/// One parameter rectangle with its collocation data.
#[derive(Debug, Clone)]
pub struct Panel {
    pub u: (f64, f64),
    pub v: (f64, f64),
    /// Parameter midpoint, used as the collocation point.
    pub center: (f64, f64),
    pub point: Vec3,
    pub normal: Vec3,
    pub area: f64,
    pub diameter: f64,
    /// Index of the `u`-strip the panel belongs to.
    pub strip: usize,
    nodes: Vec<(Vec3, f64)>,
}

struct Rules {
    regular: UnitRule,
    duffy: UnitRule,
}

impl PanelQuadrature {
    fn rules(&self) -> Rules {
        Rules {
            regular: UnitRule::gauss_legendre(self.order),
            duffy: UnitRule::gauss_legendre(self.duffy_order),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.order < 2 || self.duffy_order < 2 || !(self.refine_ratio > 0.0) {
            return Err(Error::Config("panel quadrature orders >= 2 and refine_ratio > 0".into()));
        }
        Ok(())
    }

    /// Panels on the tensor lattice `u_edges x [0, 2 pi)` split into `n_v` columns.
    pub fn build_panels<S: ParametricSurface>(
        &self,
        surf: &S,
        u_edges: &[f64],
        v_range: (f64, f64),
        n_v: usize,
    ) -> Vec<Panel> {
        let rules = self.rules();
        let dv = (v_range.1 - v_range.0) / n_v as f64;
        let cells: Vec<(usize, usize)> = (0..u_edges.len() - 1)
            .flat_map(|i| (0..n_v).map(move |k| (i, k)))
            .collect();
        cells
            .par_iter()
            .map(|&(i, k)| {
                let u = (u_edges[i], u_edges[i + 1]);
                let v = (v_range.0 + dv * k as f64, v_range.0 + dv * (k + 1) as f64);
                let center = (0.5 * (u.0 + u.1), 0.5 * (v.0 + v.1));
                let c = surf.eval(center.0, center.1);
                let mut nodes = Vec::with_capacity(rules.regular.len().pow(2));
                for (&xu, &wu) in rules.regular.nodes.iter().zip(&rules.regular.weights) {
                    for (&xv, &wv) in rules.regular.nodes.iter().zip(&rules.regular.weights) {
                        let p = surf.eval(u.0 + (u.1 - u.0) * xu, v.0 + (v.1 - v.0) * xv);
                        nodes.push((p.x, wu * wv * (u.1 - u.0) * (v.1 - v.0) * p.jacobian));
                    }
                }
                let area = nodes.iter().map(|n| n.1).sum();
                let corners = [(u.0, v.0), (u.1, v.0), (u.1, v.1), (u.0, v.1)];
                let diameter = 2.0
                    * corners
                        .iter()
                        .map(|&(a, b)| (surf.eval(a, b).x - c.x).norm())
                        .fold(0.0, f64::max);
                Panel {
                    u,
                    v,
                    center,
                    point: c.x,
                    normal: c.normal,
                    area,
                    diameter,
                    strip: i,
                    nodes,
                }
            })
            .collect()
    }

    /// Visit quadrature points `(y, weight * J)` of `panel` for the target `t`; `apex`
    /// switches to the Duffy rule around that parameter point.
    fn visit<S: ParametricSurface, F: FnMut(&Vec3, f64)>(
        &self,
        rules: &Rules,
        surf: &S,
        panel: &Panel,
        t: &Vec3,
        apex: Option<(f64, f64)>,
        f: &mut F,
    ) {
        if let Some(p) = apex {
            self.visit_duffy(rules, surf, panel, p, f);
        } else if panel.diameter <= self.refine_ratio * (t - panel.point).norm() {
            for (y, w) in &panel.nodes {
                f(y, *w);
            }
        } else {
            self.visit_rect(rules, surf, t, panel.u, panel.v, 0, f);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn visit_rect<S: ParametricSurface, F: FnMut(&Vec3, f64)>(
        &self,
        rules: &Rules,
        surf: &S,
        t: &Vec3,
        u: (f64, f64),
        v: (f64, f64),
        depth: u32,
        f: &mut F,
    ) {
        let (um, vm) = (0.5 * (u.0 + u.1), 0.5 * (v.0 + v.1));
        if depth < self.max_depth {
            let c = surf.eval(um, vm).x;
            let lu = (surf.eval(u.1, vm).x - surf.eval(u.0, vm).x).norm();
            let lv = (surf.eval(um, v.1).x - surf.eval(um, v.0).x).norm();
            if lu.hypot(lv) > self.refine_ratio * (t - c).norm() {
                let split_u = lu > 0.5 * lv;
                let split_v = lv > 0.5 * lu;
                let us: &[(f64, f64)] = if split_u { &[(u.0, um), (um, u.1)] } else { &[u] };
                let vs: &[(f64, f64)] = if split_v { &[(v.0, vm), (vm, v.1)] } else { &[v] };
                for &uu in us {
                    for &vv in vs {
                        self.visit_rect(rules, surf, t, uu, vv, depth + 1, f);
                    }
                }
                return;
            }
        }
        let r = &rules.regular;
        for (&xu, &wu) in r.nodes.iter().zip(&r.weights) {
            for (&xv, &wv) in r.nodes.iter().zip(&r.weights) {
                let p = surf.eval(u.0 + (u.1 - u.0) * xu, v.0 + (v.1 - v.0) * xv);
                f(&p.x, wu * wv * (u.1 - u.0) * (v.1 - v.0) * p.jacobian);
            }
        }
    }

    /// Four triangles from the apex to the panel edges, each mapped to the unit square
    /// so that the `1/r` singularity at the apex is cancelled by the map's Jacobian.
    fn visit_duffy<S: ParametricSurface, F: FnMut(&Vec3, f64)>(
        &self,
        rules: &Rules,
        surf: &S,
        panel: &Panel,
        apex: (f64, f64),
        f: &mut F,
    ) {
        let (u, v) = (panel.u, panel.v);
        let corners = [(u.0, v.0), (u.1, v.0), (u.1, v.1), (u.0, v.1)];
        let r = &rules.duffy;
        for k in 0..4 {
            let a = corners[k];
            let b = corners[(k + 1) % 4];
            let (ax, ay) = (a.0 - apex.0, a.1 - apex.1);
            let (bx, by) = (b.0 - a.0, b.1 - a.1);
            let det = (ax * by - ay * bx).abs();
            if det == 0.0 {
                continue;
            }
            for (&xi, &wxi) in r.nodes.iter().zip(&r.weights) {
                for (&eta, &weta) in r.nodes.iter().zip(&r.weights) {
                    let pu = apex.0 + xi * (ax + eta * bx);
                    let pv = apex.1 + xi * (ay + eta * by);
                    let p = surf.eval(pu, pv);
                    f(&p.x, wxi * weta * xi * det * p.jacobian);
                }
            }
        }
    }
}

/// `V` and `K'` restricted to collocation at panel centres:
/// `V_ij = int_j G(x_i, y) dS`, `K'_ij = int_j dG/dn_x(x_i, y) dS` (weakly singular on the
/// diagonal, integrated with the Duffy rule).
pub fn layer_operators<S: ParametricSurface>(
    ctx: &KernelContext,
    surf: &S,
    panels: &[Panel],
    quad: &PanelQuadrature,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let rules = quad.rules();
    let n = panels.len();
    let rows: Vec<(Vec<f64>, Vec<f64>)> = panels
        .par_iter()
        .map(|pi| {
            let x = pi.point;
            let nx = pi.normal;
            let xs = reflect(&x);
            let ns = reflect(&nx);
            let mut vrow = vec![0.0; n];
            let mut krow = vec![0.0; n];
            for (j, pj) in panels.iter().enumerate() {
                let (mut v, mut k) = (0.0, 0.0);
                let apex = std::ptr::eq(pi, pj).then_some(pi.center);
                quad.visit(&rules, surf, pj, &x, apex, &mut |y, w| {
                    let d = y - x;
                    let r = d.norm();
                    v += w / r;
                    k += w * d.dot(&nx) / (r * r * r);
                });
                if ctx.has_image() {
                    quad.visit(&rules, surf, pj, &xs, None, &mut |y, w| {
                        let d = y - xs;
                        let r = d.norm();
                        v += w / r;
                        k += w * d.dot(&ns) / (r * r * r);
                    });
                }
                vrow[j] = v / (4.0 * PI);
                krow[j] = k / (4.0 * PI);
            }
            (vrow, krow)
        })
        .collect();
    let mut v = DMatrix::zeros(n, n);
    let mut k = DMatrix::zeros(n, n);
    for (i, (vr, kr)) in rows.into_iter().enumerate() {
        for j in 0..n {
            v[(i, j)] = vr[j];
            k[(i, j)] = kr[j];
        }
    }
    (v, k)
}

/// `orientation * (-sigma/2 + K' sigma)` at every panel of a `n_u x n_v` sphere for
/// `sigma = 1` (free-space kernel). Outward orientation (`+1`) gives `-1`.
pub fn sphere_unit_density_check(
    n_u: usize,
    n_v: usize,
    orientation: f64,
    quad: &PanelQuadrature,
) -> Vec<f64> {
    let sphere = Sphere { radius: 1.0 };
    let edges: Vec<f64> = (0..=n_u).map(|i| PI * i as f64 / n_u as f64).collect();
    let panels = quad.build_panels(&sphere, &edges, (0.0, 2.0 * PI), n_v);
    let (_, k) = layer_operators(&KernelContext::free_space(), &sphere, &panels, quad);
    (0..panels.len())
        .map(|i| orientation * (-0.5 + k.row(i).sum()))
        .collect()
}

/// Panels on the vessel wall over the dual cells of a 1D mesh.
#[derive(Debug, Clone)]
pub struct BoundaryMesh {
    pub panels: Vec<Panel>,
    pub stations: Mesh1D,
    pub n_theta: usize,
    /// Wall area beyond the last station, which carries no panels.
    pub tip_cap_area: f64,
    pub quadrature: PanelQuadrature,
}

impl BoundaryMesh {
    pub fn total_area(&self) -> f64 {
        self.panels.iter().map(|p| p.area).sum()
    }

    pub fn max_diameter(&self) -> f64 {
        self.panels.iter().map(|p| p.diameter).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.panels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.panels.is_empty()
    }

    /// Strip edges in `s`: the dual cells of the stations.
    pub fn strip_edges(stations: &Mesh1D) -> Vec<f64> {
        let mut e = vec![0.0];
        e.extend(stations.faces());
        e.push(stations.last());
        e
    }
}

/// `n_s` stations on a graded mesh ending at `1 - h_min`, `n_theta` panels per strip.
pub fn build_boundary_mesh(
    geom: &VesselGeometry,
    n_s: usize,
    n_theta: usize,
    h_min: f64,
) -> Result<BoundaryMesh> {
    let stations = Mesh1D::graded(n_s.saturating_sub(1), 2.0, h_min)?;
    boundary_mesh_on(geom, stations, n_theta, PanelQuadrature::default())
}

pub fn boundary_mesh_on(
    geom: &VesselGeometry,
    stations: Mesh1D,
    n_theta: usize,
    quadrature: PanelQuadrature,
) -> Result<BoundaryMesh> {
    if n_theta < 8 {
        return Err(Error::Config(format!("n_theta must be at least 8, got {n_theta}")));
    }
    quadrature.validate()?;
    if stations.last() >= 1.0 {
        return Err(Error::Config("boundary mesh must stop short of the tip".into()));
    }
    let surf = VesselSurface { geom };
    let edges = BoundaryMesh::strip_edges(&stations);
    let panels = quadrature.build_panels(&surf, &edges, (0.0, 2.0 * PI), n_theta);
    let tip_cap_area = {
        let s0 = stations.last();
        let rule = UnitRule::gauss_legendre(16);
        let dtheta = 2.0 * PI / 32.0;
        rule.integrate(s0, 1.0, |s| {
            (0..32)
                .map(|k| geom.surface_jacobian(s, k as f64 * dtheta).unwrap_or(0.0))
                .sum::<f64>()
                * dtheta
        })
    };
    Ok(BoundaryMesh {
        panels,
        stations,
        n_theta,
        tip_cap_area,
        quadrature,
    })
}

/// Numerical controls of the coupled solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BemSettings {
    pub n_stations: usize,
    pub n_theta: usize,
    /// Tip standoff; `None` uses `eps^2`.
    pub h_min: Option<f64>,
    pub quadrature: PanelQuadrature,
    /// Max-norm residual relative to `|p0|`.
    pub residual_tolerance: f64,
}

impl Default for BemSettings {
    fn default() -> Self {
        Self {
            n_stations: 40,
            n_theta: 16,
            h_min: None,
            quadrature: PanelQuadrature::default(),
            residual_tolerance: 1e-8,
        }
    }
}

impl BemSettings {
    pub fn mesh(&self, geom: &VesselGeometry) -> Result<BoundaryMesh> {
        let h_min = self.h_min.unwrap_or(geom.eps() * geom.eps());
        let stations = Mesh1D::graded(self.n_stations.saturating_sub(1), 2.0, h_min)?;
        boundary_mesh_on(geom, stations, self.n_theta, self.quadrature.clone())
    }
}

/// Assembled dense system in unknowns `(sigma, p_0..p_N, Q_in, Q_tip)`.
#[derive(Debug, Clone)]
pub struct BemSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub v: DMatrix<f64>,
    pub k: DMatrix<f64>,
    pub mesh: BoundaryMesh,
    pub params: PhysicalParams,
    pub geom: VesselGeometry,
    pub ctx: KernelContext,
    /// Linear interpolation weights of `p` at each panel's collocation `s`.
    interp: Vec<(usize, f64)>,
}

impl BemSystem {
    pub fn unknowns(&self) -> usize {
        self.rhs.len()
    }

    /// `max |V_ij/A_j - V_ji/A_i| / max(|V_ij/A_j|, |V_ji/A_i|)` over panel pairs whose
    /// centres are at least `separation` panel diameters apart. Adjacent panels of unequal
    /// size are excluded: one-point collocation is not symmetric there even for an exact
    /// kernel.
    pub fn single_layer_asymmetry(&self, separation: f64) -> f64 {
        let panels = &self.mesh.panels;
        let mut worst: f64 = 0.0;
        for (i, pi) in panels.iter().enumerate() {
            for (j, pj) in panels.iter().enumerate().skip(i + 1) {
                if (pi.point - pj.point).norm() < separation * pi.diameter.max(pj.diameter) {
                    continue;
                }
                let (x, y) = (self.v[(i, j)] / pj.area, self.v[(j, i)] / pi.area);
                worst = worst.max((x - y).abs() / x.abs().max(y.abs()));
            }
        }
        worst
    }
}

fn interpolation_weights(stations: &Mesh1D, s: f64) -> (usize, f64) {
    let nodes = stations.nodes();
    let n = nodes.len() - 1;
    let k = nodes.partition_point(|&x| x <= s).clamp(1, n);
    (k - 1, (s - nodes[k - 1]) / (nodes[k] - nodes[k - 1]))
}

/// Robin rows per panel, flux-balance rows per station, `p_0 = p0`, `Q_tip = 0`.
pub fn assemble_bem(
    geom: &VesselGeometry,
    mesh: &BoundaryMesh,
    params: &PhysicalParams,
    ctx: &KernelContext,
) -> Result<BemSystem> {
    params.validate()?;
    let np = mesh.len();
    let ns = mesh.stations.len();
    let size = np + ns + 2;
    let (pcol, qin, qtip) = (|i: usize| np + i, np + ns, np + ns + 1);
    let surf = VesselSurface { geom };
    let (v, k) = layer_operators(ctx, &surf, &mesh.panels, &mesh.quadrature);

    let beta = params.kappa / (params.zeta * geom.eps());
    let gamma = params.exterior_factor();
    let mut matrix = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    let interp: Vec<(usize, f64)> = mesh
        .panels
        .iter()
        .map(|p| interpolation_weights(&mesh.stations, p.center.0))
        .collect();

    // -dq/dn = beta (p - q), with dq/dn = -sigma/2 + K' sigma and q = V sigma
    for i in 0..np {
        for j in 0..np {
            matrix[(i, j)] = -k[(i, j)] + beta * v[(i, j)];
        }
        matrix[(i, i)] += 0.5;
        let (kk, w) = interp[i];
        matrix[(i, pcol(kk))] -= beta * (1.0 - w);
        matrix[(i, pcol(kk + 1))] -= beta * w;
    }

    // sum over strip of dq/dn * area = -gamma (Q_{i+1/2} - Q_{i-1/2})
    let s = mesh.stations.nodes();
    let faces = mesh.stations.faces();
    let coef: Vec<f64> = (0..ns - 1)
        .map(|m| geom.a(faces[m]).powi(4) / (s[m + 1] - s[m]))
        .collect();
    for (i, p) in mesh.panels.iter().enumerate() {
        let row = np + p.strip;
        for j in 0..np {
            matrix[(row, j)] += p.area * k[(i, j)];
        }
        matrix[(row, i)] -= 0.5 * p.area;
    }
    for st in 0..ns {
        let row = np + st;
        if st + 1 < ns {
            matrix[(row, pcol(st + 1))] += gamma * coef[st];
            matrix[(row, pcol(st))] -= gamma * coef[st];
        } else {
            matrix[(row, qtip)] += gamma;
        }
        if st > 0 {
            matrix[(row, pcol(st))] -= gamma * coef[st - 1];
            matrix[(row, pcol(st - 1))] += gamma * coef[st - 1];
        } else {
            matrix[(row, qin)] -= gamma;
        }
    }

    matrix[(np + ns, pcol(0))] = 1.0;
    rhs[np + ns] = params.p0;
    matrix[(np + ns + 1, qtip)] = 1.0;

    Ok(BemSystem {
        matrix,
        rhs,
        v,
        k,
        mesh: mesh.clone(),
        params: *params,
        geom: geom.clone(),
        ctx: ctx.clone(),
        interp,
    })
}

/// Solved coupled system with a single-layer evaluator for `q`.
#[derive(Debug, Clone)]
pub struct BemSolution {
    pub sigma: Vec<f64>,
    pub p: Vec<f64>,
    /// Inflow `a^4 p'` at `s = 0` and the closed tip flux.
    pub q_in: f64,
    pub q_tip: f64,
    /// `q = V sigma` and `dq/dn` at the collocation points.
    pub q_wall: Vec<f64>,
    pub dqdn: Vec<f64>,
    pub residual: f64,
    pub mesh: BoundaryMesh,
    pub params: PhysicalParams,
    pub geom: VesselGeometry,
    pub ctx: KernelContext,
    interp: Vec<(usize, f64)>,
}

pub fn solve_bem(system: &BemSystem) -> Result<BemSolution> {
    solve_bem_with_tolerance(system, 1e-8)
}

pub fn solve_bem_with_tolerance(system: &BemSystem, tolerance: f64) -> Result<BemSolution> {
    let np = system.mesh.len();
    let ns = system.mesh.stations.len();
    let x = system
        .matrix
        .clone()
        .lu()
        .solve(&system.rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Conditioning {
            context: format!("3D-1D system with {np} panels and {ns} stations"),
            unknowns: system.unknowns(),
            eps: system.geom.eps(),
        })?;
    let residual = (&system.matrix * &x - &system.rhs).amax();
    let bound = tolerance * system.params.p0.abs();
    if residual > bound {
        return Err(Error::Convergence {
            context: "3D-1D solve".into(),
            residual,
            tolerance: bound,
        });
    }
    let sigma = DVector::from_iterator(np, x.rows(0, np).iter().copied());
    let q_wall = (&system.v * &sigma).iter().copied().collect();
    let dqdn = (&system.k * &sigma - &sigma * 0.5).iter().copied().collect();
    Ok(BemSolution {
        sigma: sigma.iter().copied().collect(),
        p: x.rows(np, ns).iter().copied().collect(),
        q_in: x[np + ns],
        q_tip: x[np + ns + 1],
        q_wall,
        dqdn,
        residual,
        mesh: system.mesh.clone(),
        params: system.params,
        geom: system.geom.clone(),
        ctx: system.ctx.clone(),
        interp: system.interp.clone(),
    })
}

/// Mesh, assemble and solve.
pub fn solve_3d1d(
    geom: &VesselGeometry,
    settings: &BemSettings,
    params: &PhysicalParams,
    ctx: &KernelContext,
) -> Result<BemSolution> {
    let mesh = settings.mesh(geom)?;
    let system = assemble_bem(geom, &mesh, params, ctx)?;
    solve_bem_with_tolerance(&system, settings.residual_tolerance)
}

impl BemSolution {
    /// Interior pressure at a panel's collocation point.
    pub fn panel_pressure(&self, i: usize) -> f64 {
        let (k, w) = self.interp[i];
        self.p[k] * (1.0 - w) + self.p[k + 1] * w
    }

    /// `q(x) = sum_j sigma_j int_j G_N(x, y) dS` at an exterior point.
    pub fn q(&self, x: &Vec3) -> Result<f64> {
        Ok(self.potential(x, false)?.0)
    }

    /// Analytic gradient of the single-layer potential.
    pub fn grad_q(&self, x: &Vec3) -> Result<Vec3> {
        Ok(self.potential(x, true)?.1)
    }

    fn potential(&self, x: &Vec3, gradient: bool) -> Result<(f64, Vec3)> {
        self.geom.ensure_exterior(x, INTERIOR_TOLERANCE)?;
        let surf = VesselSurface { geom: &self.geom };
        let quad = &self.mesh.quadrature;
        let rules = quad.rules();
        let xs = reflect(x);
        let mut value = 0.0;
        let mut grad = Vec3::zeros();
        for (p, &sig) in self.mesh.panels.iter().zip(&self.sigma) {
            if sig == 0.0 {
                continue;
            }
            let (mut v, mut g) = (0.0, Vec3::zeros());
            quad.visit(&rules, &surf, p, x, None, &mut |y, w| {
                let d = y - x;
                let r = d.norm();
                v += w / r;
                if gradient {
                    g += d * (w / (r * r * r));
                }
            });
            if self.ctx.has_image() {
                let mut gi = Vec3::zeros();
                quad.visit(&rules, &surf, p, &xs, None, &mut |y, w| {
                    let d = y - xs;
                    let r = d.norm();
                    v += w / r;
                    if gradient {
                        gi += d * (w / (r * r * r));
                    }
                });
                g += reflect(&gi);
            }
            value += sig * v;
            grad += g * sig;
        }
        Ok((value / (4.0 * PI), grad / (4.0 * PI)))
    }

    /// `sum dq/dn * area` over all panels.
    pub fn total_wall_flux(&self) -> f64 {
        self.dqdn
            .iter()
            .zip(&self.mesh.panels)
            .map(|(d, p)| d * p.area)
            .sum()
    }

    /// `|total wall flux - (pi / 8 zeta mu) Q_in| / |(pi / 8 zeta mu) Q_in|`.
    pub fn conservation_error(&self) -> f64 {
        let expected = self.params.exterior_factor() * self.q_in;
        if expected == 0.0 {
            return self.total_wall_flux().abs();
        }
        (self.total_wall_flux() - expected).abs() / expected.abs()
    }

    pub fn ha_norm(&self) -> f64 {
        let s = self.mesh.stations.nodes();
        let a2: Vec<f64> = self.mesh.stations.faces().iter().map(|&m| self.geom.a(m).powi(2)).collect();
        crate::solver1d::ha_norm_parts(s, &self.p, &a2).0
    }

    /// `||p - q||_{L^2(Gamma)}` over the panels.
    pub fn wall_jump_norm(&self) -> f64 {
        (0..self.mesh.len())
            .map(|i| (self.panel_pressure(i) - self.q_wall[i]).powi(2) * self.mesh.panels[i].area)
            .sum::<f64>()
            .sqrt()
    }

    /// CSV with columns `s,p`.
    pub fn stations_csv(&self) -> String {
        let mut out = String::from("s,p\n");
        for (s, p) in self.mesh.stations.nodes().iter().zip(&self.p) {
            let _ = writeln!(out, "{s:.17e},{p:.17e}");
        }
        out
    }

    /// CSV with columns `s,theta,sigma,q,dqdn`.
    pub fn panels_csv(&self) -> String {
        let mut out = String::from("s,theta,sigma,q,dqdn\n");
        for (i, p) in self.mesh.panels.iter().enumerate() {
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                p.center.0, p.center.1, self.sigma[i], self.q_wall[i], self.dqdn[i]
            );
        }
        out
    }
}

/// Differences between the coupled solution and the 1D model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub eps: f64,
    /// `||p^SB - p||_{H^a}`.
    pub ha_error: f64,
    /// `||(p^SB - p) - (q^SB - q)||_{L^2(Gamma_eps)}`.
    pub surface_mismatch: f64,
    /// RMS of `|grad q^SB - grad q|` over the probe set, a finite-sample proxy for the
    /// exterior gradient norm, not the norm itself.
    pub gradient_proxy: f64,
    pub probes: usize,
}

/// Fixed exterior probe points at distance `0.1` from the wall.
pub fn default_probes(geom: &VesselGeometry) -> Vec<Vec3> {
    let mut out = Vec::new();
    for &s in &[0.15, 0.4, 0.65, 0.9] {
        for k in 0..3 {
            let th = 2.0 * PI * k as f64 / 3.0 + 0.3;
            let x = geom.point(geom.physical_radius(s) + 0.1, th, s);
            if x.z > 0.02 {
                out.push(x);
            }
        }
    }
    out
}

/// Compare on matching stations; errors when the meshes differ.
pub fn compare_to_1d(
    bem: &BemSolution,
    sol: &Solution1D,
    ctx: &KernelContext,
    probes: &[Vec3],
) -> Result<ComparisonReport> {
    let st = bem.mesh.stations.nodes();
    if st.len() != sol.nodes().len() || st.iter().zip(sol.nodes()).any(|(a, b)| (a - b).abs() > 1e-14) {
        return Err(Error::Config("1D and 3D-1D solutions use different stations".into()));
    }
    if (bem.geom.eps() - sol.eps).abs() > 0.0 || bem.params != sol.params {
        return Err(Error::Config("1D and 3D-1D solutions use different eps or parameters".into()));
    }
    let ha_error = sol.ha_distance(&bem.p)?;
    let field = ExteriorPressure::new(ctx, &bem.geom, sol)?;
    let mismatch: f64 = (0..bem.mesh.len())
        .into_par_iter()
        .map(|i| {
            let panel = &bem.mesh.panels[i];
            let qsb = field.eval(&panel.point)?;
            let d = (interior_pressure(sol, panel.center.0) - bem.panel_pressure(i)) - (qsb - bem.q_wall[i]);
            Ok(d * d * panel.area)
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    let h = 1e-4;
    let grads: Vec<f64> = probes
        .par_iter()
        .map(|x| {
            let mut diff = Vec3::zeros();
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = h;
                let a = field.eval(&(x + e))? - bem.q(&(x + e))?;
                let b = field.eval(&(x - e))? - bem.q(&(x - e))?;
                diff[k] = (a - b) / (2.0 * h);
            }
            Ok(diff.norm_squared())
        })
        .collect::<Result<_>>()?;
    let mut sorted = grads.clone();
    sorted.sort_by(f64::total_cmp);
    let gradient_proxy = if probes.is_empty() {
        0.0
    } else {
        (sorted.iter().sum::<f64>() / probes.len() as f64).sqrt()
    };
    Ok(ComparisonReport {
        eps: sol.eps,
        ha_error,
        surface_mismatch: mismatch.sqrt(),
        gradient_proxy,
        probes: probes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Centerline, RadiusProfile};
    use crate::solver1d::{assemble_system, solve_pressure};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn straight(eps: f64) -> VesselGeometry {
        VesselGeometry::straight_spheroidal(eps).unwrap()
    }

    #[test]
    fn sphere_jump_relation() {
        let q = PanelQuadrature::default();
        let out = sphere_unit_density_check(16, 16, 1.0, &q);
        assert!(out.iter().all(|v| (v + 1.0).abs() < 0.02), "{:?}", out);
        let flipped = sphere_unit_density_check(16, 16, -1.0, &q);
        assert!(flipped.iter().all(|v| (v - 1.0).abs() < 0.02));
    }

    #[test]
    fn sphere_single_layer_is_constant_inside() {
        // V 1 = 1 on the unit sphere for the free-space kernel
        let sphere = Sphere { radius: 1.0 };
        let q = PanelQuadrature::default();
        let edges: Vec<f64> = (0..=12).map(|i| PI * i as f64 / 12.0).collect();
        let panels = q.build_panels(&sphere, &edges, (0.0, 2.0 * PI), 12);
        let area: f64 = panels.iter().map(|p| p.area).sum();
        assert!((area - 4.0 * PI).abs() < 1e-6);
        let (v, _) = layer_operators(&KernelContext::free_space(), &sphere, &panels, &q);
        for i in 0..panels.len() {
            assert!((v.row(i).sum() - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn boundary_mesh_counts_and_area() {
        let eps: f64 = 0.05;
        let g = straight(eps);
        let m = build_boundary_mesh(&g, 40, 16, eps * eps).unwrap();
        assert_eq!(m.len(), 640);
        let e = (1.0 - eps * eps).sqrt();
        let half = PI * eps * eps * (1.0 + e.asin() / (eps * e));
        assert!(((m.total_area() + m.tip_cap_area) - half).abs() < 0.01 * half);
        assert!((m.total_area() - half).abs() < 0.01 * half);
        assert!(m.panels.iter().all(|p| p.area > 0.0 && (p.normal.norm() - 1.0).abs() < 1e-12));
        let last = m.panels.last().unwrap().area;
        assert!(last < 0.1 * m.panels[m.len() / 2].area);
        assert!(matches!(build_boundary_mesh(&g, 40, 4, 0.0025), Err(Error::Config(_))));
        let fine = build_boundary_mesh(&g, 79, 32, eps * eps).unwrap();
        let ratio = m.max_diameter() / fine.max_diameter();
        assert!((1.7..2.3).contains(&ratio), "{ratio}");
    }

    fn small_system(params: PhysicalParams) -> (VesselGeometry, BemSystem) {
        let g = straight(0.1);
        let mesh = build_boundary_mesh(&g, 12, 8, 0.01).unwrap();
        let sys = assemble_bem(&g, &mesh, &params, &KernelContext::default()).unwrap();
        (g, sys)
    }

    #[test]
    fn zero_kappa_decouples() {
        let (_, sys) = small_system(PhysicalParams { kappa: 0.0, p0: 1.5, ..PhysicalParams::default() });
        assert_eq!(sys.unknowns(), sys.mesh.len() + sys.mesh.stations.len() + 2);
        let sol = solve_bem(&sys).unwrap();
        assert!(sol.sigma.iter().all(|s| s.abs() < 1e-12));
        assert!(sol.p.iter().all(|p| (p - 1.5).abs() < 1e-12));
    }

    #[test]
    fn linear_in_inlet_pressure() {
        let (_, sys) = small_system(PhysicalParams::default());
        let a = solve_bem(&sys).unwrap();
        let mut sys2 = sys.clone();
        sys2.rhs *= -3.0;
        let b = solve_bem(&sys2).unwrap();
        for (x, y) in a.sigma.iter().zip(&b.sigma) {
            assert!((-3.0 * x - y).abs() < 1e-12 * x.abs().max(1.0));
        }
        for (x, y) in a.p.iter().zip(&b.p) {
            assert!((-3.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn conservation_and_wall_neumann() {
        let (g, sys) = small_system(PhysicalParams::default());
        let sol = solve_bem(&sys).unwrap();
        assert!(sol.residual < 1e-8);
        assert!(sol.conservation_error() < 1e-4);
        assert!(sol.q_tip.abs() < 1e-14);
        let qmax = sol.q_wall.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-5;
        let mut n = 0;
        while n < 20 {
            let x = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0);
            if x.norm() < 3.0 * g.eps() {
                continue;
            }
            let d = (sol.q(&(x + Vec3::z() * h)).unwrap() - sol.q(&(x - Vec3::z() * h)).unwrap()) / (2.0 * h);
            assert!(d.abs() < 1e-6 * qmax);
            n += 1;
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (g, sys) = small_system(PhysicalParams::default());
        let sol = solve_bem(&sys).unwrap();
        let x = g.point(0.2, 1.0, 0.5);
        let grad = sol.grad_q(&x).unwrap();
        let h = 1e-5;
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            let fd = (sol.q(&(x + e)).unwrap() - sol.q(&(x - e)).unwrap()) / (2.0 * h);
            assert!((fd - grad[k]).abs() < 1e-7 * grad.norm());
        }
        assert!(sol.q(&g.point(0.001, 0.0, 0.5)).is_err());
    }

    #[test]
    fn single_layer_is_nearly_symmetric() {
        let (_, sys) = small_system(PhysicalParams::default());
        let a = sys.single_layer_asymmetry(2.0);
        assert!(a > 0.0 && a < 0.01, "{a}");
    }

    #[test]
    fn comparison_with_1d_model() {
        let g = straight(0.1);
        let ctx = KernelContext::default();
        let params = PhysicalParams { kappa: 0.0, ..PhysicalParams::default() };
        let mesh = build_boundary_mesh(&g, 12, 8, 0.01).unwrap();
        let bem = solve_bem(&assemble_bem(&g, &mesh, &params, &ctx).unwrap()).unwrap();
        let sol = solve_pressure(&assemble_system(&g, &ctx, &mesh.stations, &params).unwrap()).unwrap();
        let probes = default_probes(&g);
        let rep = compare_to_1d(&bem, &sol, &ctx, &probes).unwrap();
        assert!(rep.ha_error < 1e-12 && rep.surface_mismatch < 1e-12 && rep.gradient_proxy < 1e-12);

        let params = PhysicalParams::default();
        let bem = solve_bem(&assemble_bem(&g, &mesh, &params, &ctx).unwrap()).unwrap();
        let sol = solve_pressure(&assemble_system(&g, &ctx, &mesh.stations, &params).unwrap()).unwrap();
        let a = compare_to_1d(&bem, &sol, &ctx, &probes).unwrap();
        let mut reversed = probes.clone();
        reversed.reverse();
        let b = compare_to_1d(&bem, &sol, &ctx, &reversed).unwrap();
        assert_eq!(a.gradient_proxy, b.gradient_proxy);
        assert!(a.ha_error > 0.0);

        let other = Mesh1D::graded(10, 2.0, 0.01).unwrap();
        let sol2 = solve_pressure(&assemble_system(&g, &ctx, &other, &params).unwrap()).unwrap();
        assert!(matches!(compare_to_1d(&bem, &sol2, &ctx, &probes), Err(Error::Config(_))));
    }

    #[test]
    fn curved_vessel_solves() {
        let g = VesselGeometry::new(Centerline::arc(1.0).unwrap(), RadiusProfile::spheroidal(), 0.1)
            .unwrap();
        let mesh = build_boundary_mesh(&g, 12, 8, 0.01).unwrap();
        let sol = solve_bem(&assemble_bem(&g, &mesh, &PhysicalParams::default(), &KernelContext::default()).unwrap())
            .unwrap();
        assert!(sol.p.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(sol.conservation_error() < 1e-4);
    }
}
