//! Half-space Neumann Green's function and the slender-body line operator
//! `S_N[f](x) = int_0^1 G_N(x, X(sqrt(1 - eps^2) t)) f(t) dt`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::VesselGeometry;
use crate::quadrature::UnitRule;
use crate::Vec3;

/// Relative slack below the local radius before a target counts as interior.
pub const INTERIOR_TOLERANCE: f64 = 1e-8;

const MAX_DEPTH: u32 = 48;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelVariant {
    /// `(1/4 pi)(1/|x - y| + 1/|x - y*|)` with `y*` the reflection across `z = 0`.
    HalfSpaceNeumann,
    /// `(1/4 pi) 1/|x - y|`, used to test against free-space closed forms.
    FreeSpace,
}

/// Kernel variant and quadrature controls. Immutable once built.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelContext {
    pub variant: KernelVariant,
    /// Singularity subtraction switches on when `dist(x, centerline) < factor * eps a(s_proj)`.
    pub proximity_factor: f64,
    /// Gauss–Legendre points on unrefined density intervals.
    pub regular_order: usize,
    /// Gauss–Legendre points on refined sub-intervals near the target.
    pub singular_order: usize,
    /// Trapezoid points for `theta` averages over a cross section.
    pub theta_points: usize,
    /// A sub-interval is split while its length exceeds this multiple of its distance to `x`.
    pub refine_ratio: f64,
}

impl Default for KernelContext {
    fn default() -> Self {
        Self {
            variant: KernelVariant::HalfSpaceNeumann,
            proximity_factor: 3.0,
            regular_order: 8,
            singular_order: 12,
            theta_points: 32,
            refine_ratio: 0.5,
        }
    }
}

impl KernelContext {
    pub fn half_space() -> Self {
        Self::default()
    }

    pub fn free_space() -> Self {
        Self {
            variant: KernelVariant::FreeSpace,
            ..Self::default()
        }
    }

    pub fn with_theta_points(mut self, n: usize) -> Self {
        self.theta_points = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.proximity_factor >= 0.0 && self.proximity_factor.is_finite()) {
            return Err(Error::Config("proximity_factor must be non-negative".into()));
        }
        if self.regular_order < 2 || self.singular_order < 2 {
            return Err(Error::Config("quadrature orders must be at least 2".into()));
        }
        if self.theta_points < 4 {
            return Err(Error::Config("theta_points must be at least 4".into()));
        }
        if !(self.refine_ratio > 0.0 && self.refine_ratio.is_finite()) {
            return Err(Error::Config("refine_ratio must be positive".into()));
        }
        Ok(())
    }

    pub fn has_image(&self) -> bool {
        self.variant == KernelVariant::HalfSpaceNeumann
    }
}

/// Mirror image across the wall `z = 0`.
pub fn reflect(x: &Vec3) -> Vec3 {
    Vec3::new(x.x, x.y, -x.z)
}

/// Green's function of the selected variant.
pub fn eval_green(ctx: &KernelContext, x: &Vec3, y: &Vec3) -> Result<f64> {
    let d = (x - y).norm();
    if d == 0.0 {
        return Err(Error::Singularity { distance: d });
    }
    let mut g = 1.0 / d;
    if ctx.has_image() {
        let di = (x - reflect(y)).norm();
        if di == 0.0 {
            return Err(Error::Singularity { distance: di });
        }
        g += 1.0 / di;
    }
    Ok(g / (4.0 * PI))
}

/// Gradient of the Green's function with respect to the target `x`.
pub fn green_gradient(ctx: &KernelContext, x: &Vec3, y: &Vec3) -> Result<Vec3> {
    let d = x - y;
    let r = d.norm();
    if r == 0.0 {
        return Err(Error::Singularity { distance: r });
    }
    let mut g = -d / r.powi(3);
    if ctx.has_image() {
        let di = x - reflect(y);
        let ri = di.norm();
        if ri == 0.0 {
            return Err(Error::Singularity { distance: ri });
        }
        g -= di / ri.powi(3);
    }
    Ok(g / (4.0 * PI))
}

/// Closed form of `(1/4 pi) int_0^1 dt / |x - L t e_z|` at cylindrical `(rho, z)`, the
/// free-space potential of a unit density on the segment `[0, L] e_z` in the variable
/// `t = s / L`. The image part of the half-space kernel is the same formula at `-z`.
pub fn segment_potential(rho: f64, z: f64, length: f64) -> f64 {
    let l = length;
    let top = l - z + ((l - z).powi(2) + rho * rho).sqrt();
    let bottom = -z + (z * z + rho * rho).sqrt();
    // the product form avoids cancellation when z > 0 and rho is small
    let ratio = if z > 0.0 {
        top * (z + (z * z + rho * rho).sqrt()) / (rho * rho)
    } else {
        top / bottom
    };
    ratio.ln() / (4.0 * PI * l)
}

/// Piecewise-linear density on a grid covering `t in [0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LineDensity {
    t: Vec<f64>,
    values: Vec<f64>,
}

impl LineDensity {
    pub fn new(t: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_grid(&t)?;
        if values.len() != t.len() {
            return Err(Error::Validation(format!(
                "{} density values for {} grid nodes",
                values.len(),
                t.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("density values must be finite".into()));
        }
        Ok(Self { t, values })
    }

    /// Sample `f` on `n` equal intervals.
    pub fn uniform(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let t: Vec<f64> = (0..=n).map(|i| i as f64 / n.max(1) as f64).collect();
        let values = t.iter().map(|&t| f(t)).collect();
        Self::new(t, values)
    }

    pub fn grid(&self) -> &[f64] {
        &self.t
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn value(&self, t: f64) -> f64 {
        let j = self.t.partition_point(|&x| x <= t).clamp(1, self.t.len() - 1);
        let (t0, t1) = (self.t[j - 1], self.t[j]);
        let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        self.values[j - 1] * (1.0 - w) + self.values[j] * w
    }
}

fn validate_grid(t: &[f64]) -> Result<()> {
    if t.len() < 2 {
        return Err(Error::Validation("density grid needs at least 2 nodes".into()));
    }
    if t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Validation("density grid must be strictly increasing".into()));
    }
    if t[0] != 0.0 || t[t.len() - 1] != 1.0 {
        return Err(Error::Validation("density grid must span [0, 1]".into()));
    }
    Ok(())
}

/// `1/|x - C(t)|` for the tangent chord `C(t) = X0 + T L (t - t0)`, written as
/// `1/sqrt(rho^2 + u^2)` with `u = L (t - t0) - b`.
#[derive(Debug, Clone, Copy)]
struct Chord {
    t0: f64,
    b: f64,
    rho2: f64,
    stretch: f64,
    origin: Vec3,
    tangent: Vec3,
}

impl Chord {
    fn kernel(&self, x: &Vec3, t: f64) -> f64 {
        let p = self.origin + self.tangent * (self.stretch * (t - self.t0));
        1.0 / (x - p).norm()
    }

    fn u(&self, t: f64) -> f64 {
        self.stretch * (t - self.t0) - self.b
    }

    /// `int 1/sqrt(rho^2 + u^2) du` and `int u/sqrt(rho^2 + u^2) du` between `u0` and `u1`.
    fn moments(&self, u0: f64, u1: f64) -> (f64, f64) {
        let r0 = (self.rho2 + u0 * u0).sqrt();
        let r1 = (self.rho2 + u1 * u1).sqrt();
        let m0 = if u0 >= 0.0 {
            ((u1 + r1) / (u0 + r0)).ln()
        } else if u1 <= 0.0 {
            ((r0 - u0) / (r1 - u1)).ln()
        } else {
            let rho = self.rho2.sqrt();
            (u1 / rho).asinh() - (u0 / rho).asinh()
        };
        (m0, r1 - r0)
    }

    /// Exact chord integrals against the two hat functions of `[ta, tb]`.
    fn hat_integrals(&self, ta: f64, tb: f64) -> (f64, f64) {
        let (ua, ub) = (self.u(ta), self.u(tb));
        let (m0, m1) = self.moments(ua, ub);
        // t = ta + (u - ua) / L, dt = du / L
        let h = tb - ta;
        let l = self.stretch;
        let right = (m1 - ua * m0) / (l * l * h);
        (m0 / l - right, right)
    }
}

/// `S_N` prepared on a fixed density grid; reuses curve points on unrefined intervals.
#[derive(Debug, Clone)]
pub struct SlenderOperator<'a> {
    ctx: &'a KernelContext,
    geom: &'a VesselGeometry,
    t: Vec<f64>,
    stretch: f64,
    regular: UnitRule,
    singular: UnitRule,
    nodes: Vec<Vec<Vec3>>,
    mids: Vec<Vec3>,
}

impl<'a> SlenderOperator<'a> {
    pub fn new(ctx: &'a KernelContext, geom: &'a VesselGeometry, t: &[f64]) -> Result<Self> {
        ctx.validate()?;
        validate_grid(t)?;
        let eps = geom.eps();
        let stretch = (1.0 - eps * eps).sqrt();
        let regular = UnitRule::gauss_legendre(ctx.regular_order);
        let singular = UnitRule::gauss_legendre(ctx.singular_order);
        let curve = geom.centerline();
        let mut nodes = Vec::with_capacity(t.len() - 1);
        let mut mids = Vec::with_capacity(t.len() - 1);
        for w in t.windows(2) {
            let h = w[1] - w[0];
            nodes.push(
                regular
                    .nodes
                    .iter()
                    .map(|&xi| curve.position(stretch * (w[0] + h * xi)))
                    .collect(),
            );
            mids.push(curve.position(stretch * 0.5 * (w[0] + w[1])));
        }
        Ok(Self {
            ctx,
            geom,
            t: t.to_vec(),
            stretch,
            regular,
            singular,
            nodes,
            mids,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.t
    }

    pub fn context(&self) -> &KernelContext {
        self.ctx
    }

    pub fn geometry(&self) -> &VesselGeometry {
        self.geom
    }

    /// Weights `w` with `S_N[f](x) = sum_j w_j f(t_j)` for every piecewise-linear `f`.
    pub fn weights(&self, x: &Vec3) -> Result<Vec<f64>> {
        self.geom.ensure_exterior(x, INTERIOR_TOLERANCE)?;
        let mut w = vec![0.0; self.t.len()];
        self.accumulate(x, &mut w)?;
        if self.ctx.has_image() {
            self.accumulate(&reflect(x), &mut w)?;
        }
        let scale = 1.0 / (4.0 * PI);
        w.iter_mut().for_each(|v| *v *= scale);
        Ok(w)
    }

    pub fn apply(&self, f: &LineDensity, x: &Vec3) -> Result<f64> {
        if f.grid() != self.t.as_slice() {
            return Err(Error::Validation("density grid differs from operator grid".into()));
        }
        Ok(dot(&self.weights(x)?, f.values()))
    }

    /// Weights of `int_0^{2 pi} S_N[f](X(s) + eps a(s) e_r(s, theta)) dtheta` (trapezoid in theta).
    pub fn surface_average_weights(&self, s: f64) -> Result<Vec<f64>> {
        let n = self.ctx.theta_points;
        let dtheta = 2.0 * PI / n as f64;
        let mut acc = vec![0.0; self.t.len()];
        for k in 0..n {
            let x = self.geom.surface_point(s, k as f64 * dtheta)?;
            for (a, w) in acc.iter_mut().zip(self.weights(&x)?) {
                *a += w * dtheta;
            }
        }
        Ok(acc)
    }

    pub fn surface_average(&self, f: &LineDensity, s: f64) -> Result<f64> {
        if f.grid() != self.t.as_slice() {
            return Err(Error::Validation("density grid differs from operator grid".into()));
        }
        Ok(dot(&self.surface_average_weights(s)?, f.values()))
    }

    /// Tangent chord at the closest point of `X([0, L])` when `x` is close enough.
    fn chord(&self, x: &Vec3) -> Option<Chord> {
        let curve = self.geom.centerline();
        let s = self.geom.to_curvilinear(x).s.min(self.stretch);
        let (origin, tangent, _) = curve.eval(s);
        let d = x - origin;
        let dist = d.norm();
        if dist >= self.ctx.proximity_factor * self.geom.physical_radius(s) {
            return None;
        }
        let b = d.dot(&tangent);
        Some(Chord {
            t0: s / self.stretch,
            b,
            rho2: (dist * dist - b * b).max(0.0),
            stretch: self.stretch,
            origin,
            tangent,
        })
    }

    fn accumulate(&self, x: &Vec3, w: &mut [f64]) -> Result<()> {
        let chord = self.chord(x);
        if let Some(c) = &chord {
            if c.rho2 == 0.0 && c.b.abs() < f64::EPSILON {
                return Err(Error::Singularity { distance: 0.0 });
            }
        }
        for j in 0..self.t.len() - 1 {
            let (ta, tb) = (self.t[j], self.t[j + 1]);
            let len = self.stretch * (tb - ta);
            let (mut left, mut right) = if len > self.ctx.refine_ratio * (x - self.mids[j]).norm() {
                let mut acc = (0.0, 0.0);
                self.refine(x, chord.as_ref(), ta, tb, ta, tb, 1, &mut acc)?;
                acc
            } else {
                self.leaf_cached(x, chord.as_ref(), j)?
            };
            if let Some(c) = &chord {
                let (l, r) = c.hat_integrals(ta, tb);
                left += l;
                right += r;
            }
            w[j] += left;
            w[j + 1] += right;
        }
        Ok(())
    }

    fn leaf_cached(&self, x: &Vec3, chord: Option<&Chord>, j: usize) -> Result<(f64, f64)> {
        let (ta, tb) = (self.t[j], self.t[j + 1]);
        let h = tb - ta;
        let (mut left, mut right) = (0.0, 0.0);
        for ((&xi, &wq), p) in self.regular.nodes.iter().zip(&self.regular.weights).zip(&self.nodes[j]) {
            let d = (x - p).norm();
            if d == 0.0 {
                return Err(Error::Singularity { distance: d });
            }
            let mut g = 1.0 / d;
            if let Some(c) = chord {
                g -= c.kernel(x, ta + h * xi);
            }
            left += wq * g * (1.0 - xi);
            right += wq * g * xi;
        }
        Ok((left * h, right * h))
    }

    #[allow(clippy::too_many_arguments)]
    fn refine(
        &self,
        x: &Vec3,
        chord: Option<&Chord>,
        ta: f64,
        tb: f64,
        lo: f64,
        hi: f64,
        depth: u32,
        acc: &mut (f64, f64),
    ) -> Result<()> {
        let mid = 0.5 * (lo + hi);
        let curve = self.geom.centerline();
        let len = self.stretch * (hi - lo);
        let dist = (x - curve.position(self.stretch * mid)).norm();
        if depth < MAX_DEPTH && len > self.ctx.refine_ratio * dist {
            self.refine(x, chord, ta, tb, lo, mid, depth + 1, acc)?;
            return self.refine(x, chord, ta, tb, mid, hi, depth + 1, acc);
        }
        let h = tb - ta;
        let span = hi - lo;
        for (&xi, &wq) in self.singular.nodes.iter().zip(&self.singular.weights) {
            let t = lo + span * xi;
            let d = (x - curve.position(self.stretch * t)).norm();
            if d == 0.0 {
                return Err(Error::Singularity { distance: d });
            }
            let mut g = 1.0 / d;
            if let Some(c) = chord {
                g -= c.kernel(x, t);
            }
            let phi = (t - ta) / h;
            acc.0 += wq * span * g * (1.0 - phi);
            acc.1 += wq * span * g * phi;
        }
        Ok(())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `S_N[f](x)`.
pub fn sn_apply(
    ctx: &KernelContext,
    geom: &VesselGeometry,
    f: &LineDensity,
    x: &Vec3,
) -> Result<f64> {
    if f.values().iter().all(|&v| v == 0.0) {
        geom.ensure_exterior(x, INTERIOR_TOLERANCE)?;
        return Ok(0.0);
    }
    SlenderOperator::new(ctx, geom, f.grid())?.apply(f, x)
}

/// `int_0^{2 pi} S_N[f] dtheta` over the cross section at `s`.
pub fn sn_surface_average(
    ctx: &KernelContext,
    geom: &VesselGeometry,
    f: &LineDensity,
    s: f64,
) -> Result<f64> {
    if !(0.0..1.0).contains(&s) {
        return Err(Error::domain("s", s, "[0, 1)"));
    }
    if f.values().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    SlenderOperator::new(ctx, geom, f.grid())?.surface_average(f, s)
}
