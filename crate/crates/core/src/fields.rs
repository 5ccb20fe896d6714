//! Fields reconstructed from a 1D solution: exterior pressure `q^SB`, the interior
//! velocity ansatz with its tip cutoff, wall flux and theta-variation diagnostics.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VesselGeometry;
use crate::greens::{KernelContext, LineDensity, SlenderOperator};
use crate::solver1d::Solution1D;
use crate::Vec3;

/// `q^SB = (pi / 8 zeta mu) S_N[F]`, prepared for repeated evaluation.
#[derive(Debug, Clone)]
pub struct ExteriorPressure<'a> {
    op: SlenderOperator<'a>,
    density: LineDensity,
    factor: f64,
}

impl<'a> ExteriorPressure<'a> {
    pub fn new(ctx: &'a KernelContext, geom: &'a VesselGeometry, sol: &Solution1D) -> Result<Self> {
        let density = sol.density()?;
        Ok(Self {
            op: SlenderOperator::new(ctx, geom, density.grid())?,
            density,
            factor: sol.params.exterior_factor(),
        })
    }

    pub fn eval(&self, x: &Vec3) -> Result<f64> {
        if self.density.values().iter().all(|&v| v == 0.0) {
            self.op
                .geometry()
                .ensure_exterior(x, crate::greens::INTERIOR_TOLERANCE)?;
            return Ok(0.0);
        }
        Ok(self.factor * self.op.apply(&self.density, x)?)
    }

    /// Centered-difference gradient with step `h`.
    pub fn gradient(&self, x: &Vec3, h: f64) -> Result<Vec3> {
        let mut g = Vec3::zeros();
        for k in 0..3 {
            let mut e = Vec3::zeros();
            e[k] = h;
            g[k] = (self.eval(&(x + e))? - self.eval(&(x - e))?) / (2.0 * h);
        }
        Ok(g)
    }

    /// Values on the cross section at `s` at `n` equally spaced angles.
    pub fn section(&self, s: f64, n: usize) -> Result<Vec<f64>> {
        let geom = self.op.geometry();
        (0..n)
            .map(|k| self.eval(&geom.surface_point(s, 2.0 * PI * k as f64 / n as f64)?))
            .collect()
    }

    /// `(pi / 8 zeta mu) (1 / 2 pi) int_0^1 F dt`, the coefficient of `1/|x|` far away.
    pub fn monopole(&self) -> f64 {
        let t = self.density.grid();
        let f = self.density.values();
        let integral: f64 = (0..t.len() - 1)
            .map(|k| 0.5 * (t[k + 1] - t[k]) * (f[k] + f[k + 1]))
            .sum();
        self.factor * integral / (2.0 * PI)
    }
}

/// `q^SB(x)` at a single point.
pub fn exterior_pressure(
    ctx: &KernelContext,
    geom: &VesselGeometry,
    sol: &Solution1D,
    x: &Vec3,
) -> Result<f64> {
    ExteriorPressure::new(ctx, geom, sol)?.eval(x)
}

/// Cubic Hermite interpolant of the flux `Q = a^4 p'` through the nodal fluxes with
/// slopes `F`, so `Q' = F` at every node.
#[derive(Debug, Clone)]
pub struct FluxInterpolant {
    s: Vec<f64>,
    q: Vec<f64>,
    f: Vec<f64>,
}

impl FluxInterpolant {
    pub fn new(sol: &Solution1D) -> Self {
        Self {
            s: sol.nodes().to_vec(),
            q: sol.node_flux(),
            f: sol.f.clone(),
        }
    }

    /// `(Q, Q')` at `s`; zero beyond the last node.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        let n = self.s.len() - 1;
        if s >= self.s[n] {
            return (0.0, if s == self.s[n] { self.f[n] } else { 0.0 });
        }
        let k = self.s.partition_point(|&x| x <= s).clamp(1, n) - 1;
        let h = self.s[k + 1] - self.s[k];
        let t = (s - self.s[k]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let q = (2.0 * t3 - 3.0 * t2 + 1.0) * self.q[k]
            + (t3 - 2.0 * t2 + t) * h * self.f[k]
            + (-2.0 * t3 + 3.0 * t2) * self.q[k + 1]
            + (t3 - t2) * h * self.f[k + 1];
        let dq = (6.0 * t2 - 6.0 * t) * (self.q[k] - self.q[k + 1]) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * self.f[k]
            + (3.0 * t2 - 2.0 * t) * self.f[k + 1];
        (q, dq)
    }
}

/// Quintic smoothstep cutoff: one on `s <= inner`, zero on `s >= outer`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Cutoff {
    /// Edges `1 - 2 eps^{4/3}` and `1 - eps^{4/3}`.
    pub fn for_eps(eps: f64) -> Self {
        let w = eps.powf(4.0 / 3.0);
        Self {
            inner: 1.0 - 2.0 * w,
            outer: 1.0 - w,
        }
    }

    /// `(phi, phi')` at `s`.
    pub fn eval(&self, s: f64) -> (f64, f64) {
        if s <= self.inner {
            return (1.0, 0.0);
        }
        if s >= self.outer {
            return (0.0, 0.0);
        }
        let w = self.outer - self.inner;
        let t = (s - self.inner) / w;
        let step = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let slope = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        (1.0 - step, -slope / w)
    }

    /// `sup |phi'| = 15 / (8 (outer - inner))`.
    pub fn max_slope(&self) -> f64 {
        15.0 / (8.0 * (self.outer - self.inner))
    }
}

/// Velocity in the local frame: components along `e_r` and `e_t`, plus Cartesian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Velocity {
    pub radial: f64,
    pub axial: f64,
    pub cartesian: Vec3,
}

/// The interior velocity ansatz
/// `U = -(1/16 mu) d_s(phi (r^3 - 2 (eps a)^2 r) p') e_r + (1/4 mu) phi (r^2 - (eps a)^2) p' e_t`.
#[derive(Debug, Clone)]
pub struct VelocityAnsatz<'a> {
    geom: &'a VesselGeometry,
    flux: FluxInterpolant,
    cutoff: Cutoff,
    mu: f64,
}

/// `p'`, `p''` and the radius data at one station.
struct Station {
    eps_a: f64,
    eps2_a_da: f64,
    phi: f64,
    dphi: f64,
    dp: f64,
    ddp: f64,
}

impl<'a> VelocityAnsatz<'a> {
    pub fn new(geom: &'a VesselGeometry, sol: &Solution1D) -> Self {
        Self {
            geom,
            flux: FluxInterpolant::new(sol),
            cutoff: Cutoff::for_eps(geom.eps()),
            mu: sol.params.mu,
        }
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    /// `(p', p'')` from the flux interpolant.
    pub fn pressure_derivatives(&self, s: f64) -> (f64, f64) {
        let (a, a_da, _) = self.geom.radius().weighted(s);
        let (q, dq) = self.flux.eval(s);
        let a4 = a.powi(4);
        if a4 == 0.0 {
            return (0.0, 0.0);
        }
        let dp = q / a4;
        (dp, (dq - 4.0 * a * a * a_da * dp) / a4)
    }

    fn station(&self, r: f64, s: f64) -> Result<Option<Station>> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::domain("s", s, "[0, 1]"));
        }
        let eps = self.geom.eps();
        let (a, a_da, _) = self.geom.radius().weighted(s);
        let eps_a = eps * a;
        if r < 0.0 || r > eps_a * (1.0 + 1e-12) {
            return Err(Error::domain("r", r, format!("[0, {eps_a:e}]")));
        }
        let (phi, dphi) = self.cutoff.eval(s);
        if phi == 0.0 {
            return Ok(None);
        }
        let (dp, ddp) = self.pressure_derivatives(s);
        Ok(Some(Station {
            eps_a,
            eps2_a_da: eps * eps * a_da,
            phi,
            dphi,
            dp,
            ddp,
        }))
    }

    /// `d_s [phi (alpha r^3 - beta (eps a)^2 r) p']` at fixed `r`.
    fn ds_profile(st: &Station, r: f64, alpha: f64, beta: f64) -> f64 {
        let g = alpha * r.powi(3) - beta * st.eps_a * st.eps_a * r;
        let dg = -2.0 * beta * st.eps2_a_da * r;
        st.dphi * g * st.dp + st.phi * (dg * st.dp + g * st.ddp)
    }

    pub fn velocity(&self, r: f64, theta: f64, s: f64) -> Result<Velocity> {
        let Some(st) = self.station(r, s)? else {
            return Ok(Velocity {
                radial: 0.0,
                axial: 0.0,
                cartesian: Vec3::zeros(),
            });
        };
        let radial = -Self::ds_profile(&st, r, 1.0, 2.0) / (16.0 * self.mu);
        let axial = st.phi * (r * r - st.eps_a * st.eps_a) * st.dp / (4.0 * self.mu);
        let tri = self.geom.triad(s);
        let e_r = tri.e1 * theta.cos() + tri.e2 * theta.sin();
        Ok(Velocity {
            radial,
            axial,
            cartesian: e_r * radial + tri.tangent * axial,
        })
    }

    /// `(k_hat / (16 mu (1 - r k_hat))) d_s[phi (5 r^3 - 6 (eps a)^2 r) p']`.
    pub fn divergence(&self, r: f64, theta: f64, s: f64) -> Result<f64> {
        let Some(st) = self.station(r, s)? else {
            return Ok(0.0);
        };
        let kh = self.geom.kappa_hat(s, theta);
        if kh == 0.0 {
            return Ok(0.0);
        }
        Ok(kh / (16.0 * self.mu * (1.0 - r * kh)) * Self::ds_profile(&st, r, 5.0, 6.0))
    }

    /// `(U . n) J_eps` on the wall; only defined where `phi = 1`.
    pub fn wall_flux_density(&self, s: f64, theta: f64) -> Result<f64> {
        if s > self.cutoff.inner {
            return Err(Error::CutoffZone {
                s,
                plateau_end: self.cutoff.inner,
            });
        }
        let u = self.velocity(self.geom.physical_radius(s), theta, s)?;
        let n = self.geom.surface_normal(s, theta)?;
        Ok(u.cartesian.dot(&n) * self.geom.surface_jacobian(s, theta)?)
    }

    /// Tangential part `U - (U . n) n` of the velocity on the wall.
    pub fn wall_tangential_defect(&self, s: f64, theta: f64) -> Result<Vec3> {
        let u = self.velocity(self.geom.physical_radius(s), theta, s)?;
        let n = self.geom.surface_normal(s, theta)?;
        Ok(u.cartesian - n * u.cartesian.dot(&n))
    }
}

/// `int_0^{2 pi} (q - mean q)^2 dtheta` per section, and the full-surface norm.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThetaVariation {
    pub s: Vec<f64>,
    /// `L^2(theta)` deviation of `q^SB` from its theta-mean on each section.
    pub section: Vec<f64>,
    /// `||q^SB - mean_theta q^SB||_{L^2(Gamma_eps)}` over the solver's dual cells.
    pub surface_norm: f64,
}

/// `L^2(theta)` deviation of `q^SB` on the cross section at `s` (trapezoid in theta).
pub fn theta_variation_at(field: &ExteriorPressure<'_>, n_theta: usize, s: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::domain("s", s, "[0, 1)"));
    }
    let values = field.section(s, n_theta)?;
    let mean = values.iter().sum::<f64>() / n_theta as f64;
    let dtheta = 2.0 * PI / n_theta as f64;
    Ok((values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() * dtheta).sqrt())
}

/// Per-section deviations at the solver nodes and the surface norm weighted by `J_eps`.
pub fn theta_variation(
    ctx: &KernelContext,
    geom: &VesselGeometry,
    sol: &Solution1D,
) -> Result<ThetaVariation> {
    let field = ExteriorPressure::new(ctx, geom, sol)?;
    let n = ctx.theta_points;
    let dtheta = 2.0 * PI / n as f64;
    let nodes = sol.nodes();
    let rows: Vec<(f64, f64)> = (0..nodes.len())
        .into_par_iter()
        .map(|i| {
            let s = nodes[i];
            let values = field.section(s, n)?;
            let mean = values.iter().sum::<f64>() / n as f64;
            let mut plain = 0.0;
            let mut weighted = 0.0;
            for (k, v) in values.iter().enumerate() {
                let d2 = (v - mean).powi(2);
                plain += d2;
                weighted += d2 * geom.surface_jacobian(s, k as f64 * dtheta)?;
            }
            let (lo, hi) = sol.mesh.cell(i);
            Ok(((plain * dtheta).sqrt(), weighted * dtheta * (hi - lo)))
        })
        .collect::<Result<_>>()?;
    Ok(ThetaVariation {
        s: nodes.to_vec(),
        section: rows.iter().map(|r| r.0).collect(),
        surface_norm: rows.iter().map(|r| r.1).sum::<f64>().sqrt(),
    })
}

/// Where a sampled point sits relative to the vessel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointTag {
    Interior,
    Exterior,
    Surface,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub point: [f64; 3],
    pub tag: PointTag,
    /// `p^SB(s)` inside, `q^SB` outside and on the wall.
    pub pressure: f64,
    /// Ansatz velocity for interior points.
    pub velocity: Option<[f64; 3]>,
}

/// Sampling lattice: an axis-aligned box or an `(s, theta)` surface lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GridSpec {
    Box {
        min: [f64; 3],
        max: [f64; 3],
        resolution: [usize; 3],
    },
    Surface {
        n_s: usize,
        n_theta: usize,
    },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FieldSampleGrid {
    pub samples: Vec<FieldSample>,
    /// Box points below the wall, which are not part of the domain.
    pub skipped: usize,
}

impl FieldSampleGrid {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,z,tag,value,ux,uy,uz\n");
        for p in &self.samples {
            let tag = match p.tag {
                PointTag::Interior => "interior",
                PointTag::Exterior => "exterior",
                PointTag::Surface => "surface",
            };
            let u = p.velocity.unwrap_or([0.0; 3]);
            let _ = writeln!(
                out,
                "{:.12e},{:.12e},{:.12e},{tag},{:.12e},{:.12e},{:.12e},{:.12e}",
                p.point[0], p.point[1], p.point[2], p.pressure, u[0], u[1], u[2]
            );
        }
        out
    }
}

/// Linear interpolation of the nodal pressure; held constant past the last node.
pub fn interior_pressure(sol: &Solution1D, s: f64) -> f64 {
    let nodes = sol.nodes();
    let n = nodes.len() - 1;
    if s >= nodes[n] {
        return sol.p[n];
    }
    let k = nodes.partition_point(|&x| x <= s).clamp(1, n);
    let w = (s - nodes[k - 1]) / (nodes[k] - nodes[k - 1]);
    sol.p[k - 1] * (1.0 - w) + sol.p[k] * w
}

pub fn sample_fields(
    ctx: &KernelContext,
    geom: &VesselGeometry,
    sol: &Solution1D,
    spec: &GridSpec,
) -> Result<FieldSampleGrid> {
    let field = ExteriorPressure::new(ctx, geom, sol)?;
    let ansatz = VelocityAnsatz::new(geom, sol);
    match spec {
        GridSpec::Surface { n_s, n_theta } => {
            if *n_s < 2 || *n_theta < 1 {
                return Err(Error::Config("surface lattice needs n_s >= 2, n_theta >= 1".into()));
            }
            let s_max = sol.mesh.last();
            let pts: Vec<(f64, f64)> = (0..*n_s)
                .flat_map(|i| {
                    (0..*n_theta).map(move |k| {
                        (
                            s_max * i as f64 / (*n_s - 1) as f64,
                            2.0 * PI * k as f64 / *n_theta as f64,
                        )
                    })
                })
                .collect();
            let samples = pts
                .par_iter()
                .map(|&(s, th)| {
                    let x = geom.surface_point(s, th)?;
                    Ok(FieldSample {
                        point: [x.x, x.y, x.z],
                        tag: PointTag::Surface,
                        pressure: field.eval(&x)?,
                        velocity: None,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(FieldSampleGrid {
                samples,
                skipped: 0,
            })
        }
        GridSpec::Box {
            min,
            max,
            resolution,
        } => {
            if resolution.iter().any(|&r| r == 0) {
                return Err(Error::Config("box resolution must be positive".into()));
            }
            let axis = |d: usize, i: usize| {
                if resolution[d] == 1 {
                    0.5 * (min[d] + max[d])
                } else {
                    min[d] + (max[d] - min[d]) * i as f64 / (resolution[d] - 1) as f64
                }
            };
            let mut pts = Vec::new();
            let mut skipped = 0;
            for i in 0..resolution[0] {
                for j in 0..resolution[1] {
                    for k in 0..resolution[2] {
                        let x = Vec3::new(axis(0, i), axis(1, j), axis(2, k));
                        if x.z < 0.0 {
                            skipped += 1;
                        } else {
                            pts.push(x);
                        }
                    }
                }
            }
            let samples = pts
                .par_iter()
                .map(|x| {
                    let c = geom.to_curvilinear(x);
                    let inside = c.s >= 0.0
                        && c.s < 1.0
                        && c.axial_offset == 0.0
                        && c.r < geom.physical_radius(c.s);
                    if inside {
                        let u = ansatz.velocity(c.r, c.theta, c.s)?;
                        Ok(FieldSample {
                            point: [x.x, x.y, x.z],
                            tag: PointTag::Interior,
                            pressure: interior_pressure(sol, c.s),
                            velocity: Some([u.cartesian.x, u.cartesian.y, u.cartesian.z]),
                        })
                    } else {
                        Ok(FieldSample {
                            point: [x.x, x.y, x.z],
                            tag: PointTag::Exterior,
                            pressure: field.eval(x)?,
                            velocity: None,
                        })
                    }
                })
                .collect::<Result<_>>()?;
            Ok(FieldSampleGrid { samples, skipped })
        }
    }
}
