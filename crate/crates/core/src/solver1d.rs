//! Degenerate 1D integrodifferential model for the interior pressure:
//! `(a^4 p')' = 16 mu kappa a p - (kappa/zeta) a int_0^{2 pi} S_N[(a^4 p')'] dtheta`,
//! `p(0) = p0`, zero flux at the tip.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::check::Check;
use crate::error::{Error, Result};
use crate::geometry::{RadiusProfile, VesselGeometry};
use crate::greens::{KernelContext, LineDensity, SlenderOperator};

/// Physical constants. `mu`, `zeta` positive; `kappa = 0` decouples the exterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicalParams {
    pub mu: f64,
    pub kappa: f64,
    pub zeta: f64,
    pub p0: f64,
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            mu: 1.0,
            kappa: 1.0,
            zeta: 1.0,
            p0: 1.0,
        }
    }
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.mu) || !ok(self.zeta) {
            return Err(Error::Config(format!(
                "mu and zeta must be positive (mu = {}, zeta = {})",
                self.mu, self.zeta
            )));
        }
        if !(self.kappa.is_finite() && self.kappa >= 0.0) {
            return Err(Error::Config(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if !self.p0.is_finite() {
            return Err(Error::Config("p0 must be finite".into()));
        }
        Ok(())
    }

    pub fn with_p0(mut self, p0: f64) -> Self {
        self.p0 = p0;
        self
    }

    /// `pi / (8 zeta mu)`, the factor between `S_N[F]` and `q^SB`.
    pub fn exterior_factor(&self) -> f64 {
        std::f64::consts::PI / (8.0 * self.zeta * self.mu)
    }
}

/// Nodes `0 = s_0 < ... < s_N = 1 - h_min`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh1D {
    nodes: Vec<f64>,
    grading: f64,
    h_min: f64,
}

impl Mesh1D {
    /// `s_i = (1 - h_min)(1 - (1 - i/N)^grading)`; `grading = 2` gives spacing proportional
    /// to `sqrt(1 - s)`, the local radius scale of a spheroidal tip.
    pub fn graded(intervals: usize, grading: f64, h_min: f64) -> Result<Self> {
        if intervals < 2 {
            return Err(Error::Config(format!("need at least 2 intervals, got {intervals}")));
        }
        if !(grading >= 1.0 && grading.is_finite()) {
            return Err(Error::Config(format!("grading must be >= 1, got {grading}")));
        }
        if !(0.0..0.5).contains(&h_min) {
            return Err(Error::Config(format!("h_min must lie in [0, 0.5), got {h_min}")));
        }
        let s_max = 1.0 - h_min;
        let nodes = (0..=intervals)
            .map(|i| {
                if i == intervals {
                    s_max
                } else {
                    s_max * (1.0 - (1.0 - i as f64 / intervals as f64).powf(grading))
                }
            })
            .collect();
        Ok(Self {
            nodes,
            grading,
            h_min,
        })
    }

    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 3 || nodes[0] != 0.0 {
            return Err(Error::Config("mesh needs >= 3 nodes starting at s = 0".into()));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || *nodes.last().unwrap() > 1.0 {
            return Err(Error::Config("mesh nodes must increase strictly within [0, 1]".into()));
        }
        let h_min = 1.0 - nodes.last().unwrap();
        Ok(Self {
            nodes,
            grading: 1.0,
            h_min,
        })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn last(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    /// Face midpoints `m_{i+1/2}`, `i = 0..N-1`.
    pub fn faces(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Dual cell of node `i`: `[m_{i-1/2}, m_{i+1/2}]`, truncated to `[0, s_N]` at the ends.
    pub fn cell(&self, i: usize) -> (f64, f64) {
        let n = self.intervals();
        let lo = if i == 0 { self.nodes[0] } else { 0.5 * (self.nodes[i - 1] + self.nodes[i]) };
        let hi = if i == n { self.nodes[n] } else { 0.5 * (self.nodes[i] + self.nodes[i + 1]) };
        (lo, hi)
    }

    /// Density grid `t`: the nodes plus `t = 1` when the mesh stops short of the tip.
    pub fn density_grid(&self) -> Vec<f64> {
        let mut t = self.nodes.clone();
        if self.last() < 1.0 {
            t.push(1.0);
        }
        t
    }
}

/// Discretization controls for the 1D solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub intervals: usize,
    pub grading: f64,
    /// Tip standoff; `None` uses `eps^2`.
    pub h_min: Option<f64>,
    /// Residual bound relative to `|p0|`.
    pub residual_tolerance: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            intervals: 256,
            grading: 2.0,
            h_min: None,
            residual_tolerance: 1e-10,
        }
    }
}

impl SolverSettings {
    pub fn mesh(&self, eps: f64) -> Result<Mesh1D> {
        Mesh1D::graded(self.intervals, self.grading, self.h_min.unwrap_or(eps * eps))
    }
}

/// Assembled block system in unknowns `(p_0..p_N, F_0..F_N)`.
#[derive(Debug, Clone)]
pub struct System1D {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    mesh: Mesh1D,
    params: PhysicalParams,
    eps: f64,
    /// `M[i][j]`: weight of `F_j` in `int_0^{2 pi} S_N[F] dtheta` at node `i`.
    integral_block: Vec<Vec<f64>>,
    a: Vec<f64>,
    a_da: Vec<f64>,
    a3_dda: Vec<f64>,
    face_a4: Vec<f64>,
}

impl System1D {
    pub fn mesh(&self) -> &Mesh1D {
        &self.mesh
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    pub fn integral_block(&self) -> &[Vec<f64>] {
        &self.integral_block
    }

    pub fn unknowns(&self) -> usize {
        self.rhs.len()
    }
}

/// Assemble the flux-form differential rows, the integral rows and the two closures.
pub fn assemble_system(
    geom: &VesselGeometry,
    ctx: &KernelContext,
    mesh: &Mesh1D,
    params: &PhysicalParams,
) -> Result<System1D> {
    params.validate()?;
    if mesh.last() >= 1.0 {
        return Err(Error::Config("mesh must stop short of the tip (h_min > 0)".into()));
    }
    let s = mesh.nodes();
    let n = mesh.intervals();
    let size = 2 * (n + 1);
    let (pi, fi) = (|i: usize| i, |i: usize| n + 1 + i);

    let mut a = Vec::with_capacity(n + 1);
    let mut a_da = Vec::with_capacity(n + 1);
    let mut a3_dda = Vec::with_capacity(n + 1);
    for &si in s {
        let (v, d1, d2) = geom.radius().weighted(si);
        a.push(v);
        a_da.push(d1);
        a3_dda.push(d2);
    }
    let face_a4: Vec<f64> = mesh.faces().iter().map(|&m| geom.a(m).powi(4)).collect();

    let integral_block = if params.kappa == 0.0 {
        vec![vec![0.0; n + 1]; n + 1]
    } else {
        let grid = mesh.density_grid();
        let op = SlenderOperator::new(ctx, geom, &grid)?;
        s.par_iter()
            .map(|&si| {
                let mut w = op.surface_average_weights(si)?;
                w.truncate(n + 1);
                Ok(w)
            })
            .collect::<Result<Vec<_>>>()?
    };

    let mut matrix = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    matrix[(0, pi(0))] = 1.0;
    rhs[0] = params.p0;

    let coef: Vec<f64> = (0..n).map(|k| face_a4[k] / (s[k + 1] - s[k])).collect();
    for i in 1..=n {
        let (lo, hi) = mesh.cell(i);
        let row = i;
        matrix[(row, fi(i))] = hi - lo;
        // -(Q_{i+1/2} - Q_{i-1/2}), Q_{N+1/2} = 0
        if i < n {
            matrix[(row, pi(i + 1))] -= coef[i];
            matrix[(row, pi(i))] += coef[i];
        }
        matrix[(row, pi(i))] += coef[i - 1];
        matrix[(row, pi(i - 1))] -= coef[i - 1];
    }

    let couple = params.kappa / params.zeta;
    for i in 0..=n {
        let row = n + 1 + i;
        matrix[(row, fi(i))] += 1.0;
        matrix[(row, pi(i))] -= 16.0 * params.mu * params.kappa * a[i];
        if couple != 0.0 {
            for (j, &m) in integral_block[i].iter().enumerate() {
                matrix[(row, fi(j))] += couple * a[i] * m;
            }
        }
    }

    Ok(System1D {
        matrix,
        rhs,
        mesh: mesh.clone(),
        params: *params,
        eps: geom.eps(),
        integral_block,
        a,
        a_da,
        a3_dda,
        face_a4,
    })
}

/// Nodal pressure and flux density `F = (a^4 p')'` on the solver mesh.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Solution1D {
    pub mesh: Mesh1D,
    pub params: PhysicalParams,
    pub eps: f64,
    pub p: Vec<f64>,
    pub f: Vec<f64>,
    /// `a`, `a a'`, `a^3 a''` at the nodes.
    pub a: Vec<f64>,
    pub a_da: Vec<f64>,
    pub a3_dda: Vec<f64>,
    /// `a^4` at the face midpoints.
    pub face_a4: Vec<f64>,
    /// Max-norm residual of the assembled equations.
    pub residual: f64,
}

/// Dense LU solve with a residual check.
pub fn solve_pressure(system: &System1D) -> Result<Solution1D> {
    solve_pressure_with_tolerance(system, 1e-10)
}

pub fn solve_pressure_with_tolerance(system: &System1D, tolerance: f64) -> Result<Solution1D> {
    let n = system.mesh.intervals();
    let x = system
        .matrix
        .clone()
        .lu()
        .solve(&system.rhs)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Conditioning {
            context: format!(
                "1D system on {} intervals (h_min = {:e})",
                n,
                system.mesh.h_min()
            ),
            unknowns: system.unknowns(),
            eps: system.eps,
        })?;
    let residual = (&system.matrix * &x - &system.rhs).amax();
    let bound = tolerance * system.params.p0.abs();
    if residual > bound {
        return Err(Error::Convergence {
            context: "1D pressure solve".into(),
            residual,
            tolerance: bound,
        });
    }
    Ok(Solution1D {
        mesh: system.mesh.clone(),
        params: system.params,
        eps: system.eps,
        p: x.rows(0, n + 1).iter().copied().collect(),
        f: x.rows(n + 1, n + 1).iter().copied().collect(),
        a: system.a.clone(),
        a_da: system.a_da.clone(),
        a3_dda: system.a3_dda.clone(),
        face_a4: system.face_a4.clone(),
        residual,
    })
}

/// Build the mesh, assemble and solve in one call.
pub fn solve_1d(
    geom: &VesselGeometry,
    ctx: &KernelContext,
    settings: &SolverSettings,
    params: &PhysicalParams,
) -> Result<Solution1D> {
    let mesh = settings.mesh(geom.eps())?;
    let system = assemble_system(geom, ctx, &mesh, params)?;
    solve_pressure_with_tolerance(&system, settings.residual_tolerance)
}

impl Solution1D {
    pub fn nodes(&self) -> &[f64] {
        self.mesh.nodes()
    }

    /// `a^4 p'` on the faces `m_{i+1/2}`.
    pub fn face_flux(&self) -> Vec<f64> {
        let s = self.mesh.nodes();
        (0..self.mesh.intervals())
            .map(|k| self.face_a4[k] * (self.p[k + 1] - self.p[k]) / (s[k + 1] - s[k]))
            .collect()
    }

    /// Nodal `a^4 p'`, reconstructed from the face fluxes and `F` so that the
    /// discrete balance holds exactly; vanishes at the last node.
    pub fn node_flux(&self) -> Vec<f64> {
        let s = self.mesh.nodes();
        let n = self.mesh.intervals();
        let faces = self.face_flux();
        let mut q = vec![0.0; n + 1];
        let (_, m0) = self.mesh.cell(0);
        q[0] = faces[0] - self.f[0] * (m0 - s[0]);
        for i in 1..=n {
            let (lo, _) = self.mesh.cell(i);
            q[i] = faces[i - 1] + self.f[i] * (s[i] - lo);
        }
        q
    }

    /// `F` as a density on `t in [0, 1]` (zero at `t = 1`).
    pub fn density(&self) -> Result<LineDensity> {
        let grid = self.mesh.density_grid();
        let mut values = self.f.clone();
        values.resize(grid.len(), 0.0);
        LineDensity::new(grid, values)
    }

    /// Weighted norm `sqrt(||p||^2 + ||a^2 p'||^2)` over `[0, 1]`; `p` is held at its
    /// last nodal value on `[s_N, 1]`.
    pub fn ha_norm(&self) -> f64 {
        let s = self.mesh.nodes();
        let a2: Vec<f64> = self.face_a4.iter().map(|v| v.sqrt()).collect();
        ha_norm_parts(s, &self.p, &a2).0
    }

    /// `||p||_{H^a}` of `p - other.p` on a shared mesh.
    pub fn ha_distance(&self, p: &[f64]) -> Result<f64> {
        if p.len() != self.p.len() {
            return Err(Error::Config("pressure vectors live on different meshes".into()));
        }
        let diff: Vec<f64> = self.p.iter().zip(p).map(|(a, b)| a - b).collect();
        let a2: Vec<f64> = self.face_a4.iter().map(|v| v.sqrt()).collect();
        Ok(ha_norm_parts(self.mesh.nodes(), &diff, &a2).0)
    }

    /// Flux balance `sum_i F_i |cell_i| + Q(0) - Q(s_N)`.
    pub fn flux_balance(&self) -> f64 {
        let q = self.node_flux();
        let integral: f64 = (0..self.f.len())
            .map(|i| {
                let (lo, hi) = self.mesh.cell(i);
                self.f[i] * (hi - lo)
            })
            .sum();
        integral + q[0] - q[q.len() - 1]
    }

    /// Nodal `a p'` and `a^3 p''` from the flux reconstruction.
    pub fn weighted_derivatives(&self) -> (Vec<f64>, Vec<f64>) {
        let q = self.node_flux();
        let mut adp = Vec::with_capacity(q.len());
        let mut a3ddp = Vec::with_capacity(q.len());
        for i in 0..q.len() {
            let a = self.a[i];
            let a_dp = q[i] / a.powi(3);
            // p'' = (F - 4 a^3 a' p') / a^4
            adp.push(a_dp);
            a3ddp.push(self.f[i] / a - 4.0 * self.a_da[i] * a_dp);
        }
        (adp, a3ddp)
    }

    /// CSV with columns `s,a,p,F,flux`.
    pub fn to_csv(&self) -> String {
        let q = self.node_flux();
        let mut out = String::from("s,a,p,F,flux\n");
        for i in 0..self.p.len() {
            let _ = writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                self.mesh.nodes()[i],
                self.a[i],
                self.p[i],
                self.f[i],
                q[i]
            );
        }
        out
    }
}

/// `(sqrt(||u||^2 + ||a^2 u'||^2), ||u||, ||a^2 u'||)` from nodal values: trapezoid rule for
/// `u^2` and the midpoint rule for `(a^2 u')^2` with `a^2` given at faces. The last value
/// is extended to `s = 1` when the nodes stop short.
pub fn ha_norm_parts(s: &[f64], u: &[f64], face_a2: &[f64]) -> (f64, f64, f64) {
    let mut l2 = 0.0;
    let mut grad = 0.0;
    for k in 0..s.len() - 1 {
        let h = s[k + 1] - s[k];
        l2 += 0.5 * h * (u[k] * u[k] + u[k + 1] * u[k + 1]);
        let d = face_a2[k] * (u[k + 1] - u[k]) / h;
        grad += h * d * d;
    }
    let last = *u.last().unwrap();
    l2 += (1.0 - s[s.len() - 1]) * last * last;
    ((l2 + grad).sqrt(), l2.sqrt(), grad.sqrt())
}

/// The norm ratios bounded uniformly in `eps`, each divided by `|p0|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AprioriRatios {
    pub l2_p: f64,
    pub l2_a2_dp: f64,
    pub linf_p: f64,
    pub linf_a_dp: f64,
    pub linf_a3_ddp: f64,
}

impl AprioriRatios {
    pub fn as_array(&self) -> [f64; 5] {
        [
            self.l2_p,
            self.l2_a2_dp,
            self.linf_p,
            self.linf_a_dp,
            self.linf_a3_ddp,
        ]
    }

    pub const NAMES: [&'static str; 5] = [
        "l2_p",
        "l2_a2_dp",
        "sqrt_eps_linf_p",
        "sqrt_eps_linf_a_dp",
        "sqrt_eps_linf_a3_ddp",
    ];
}

/// `||p||/|p0|`, `||a^2 p'||/|p0|`, `eps^{1/2}` times the sup norms of `p`, `a p'`,
/// `a^3 p''` over `|p0|`. All zero when `p0 = 0`.
pub fn check_apriori_bounds(sol: &Solution1D) -> AprioriRatios {
    let p0 = sol.params.p0.abs();
    if p0 == 0.0 {
        return AprioriRatios {
            l2_p: 0.0,
            l2_a2_dp: 0.0,
            linf_p: 0.0,
            linf_a_dp: 0.0,
            linf_a3_ddp: 0.0,
        };
    }
    let a2: Vec<f64> = sol.face_a4.iter().map(|v| v.sqrt()).collect();
    let (_, l2, grad) = ha_norm_parts(sol.mesh.nodes(), &sol.p, &a2);
    let (adp, a3ddp) = sol.weighted_derivatives();
    let sup = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let se = sol.eps.sqrt();
    AprioriRatios {
        l2_p: l2 / p0,
        l2_a2_dp: grad / p0,
        linf_p: se * sup(&sol.p) / p0,
        linf_a_dp: se * sup(&adp) / p0,
        linf_a3_ddp: se * sup(&a3ddp) / p0,
    }
}

/// Growth of each ratio along a sweep ordered by decreasing `eps`: the largest factor by
/// which a ratio exceeds its value at any larger `eps` must stay below `limit`.
pub fn apriori_growth_checks(sweep: &[(f64, AprioriRatios)], limit: f64) -> Vec<Check> {
    (0..5)
        .map(|k| {
            let mut growth: f64 = 1.0;
            for i in 0..sweep.len() {
                for j in i + 1..sweep.len() {
                    let (a, b) = (sweep[i].1.as_array()[k], sweep[j].1.as_array()[k]);
                    if a > 0.0 {
                        growth = growth.max(b / a);
                    } else if b > 0.0 {
                        growth = f64::INFINITY;
                    }
                }
            }
            let values: Vec<String> = sweep
                .iter()
                .map(|(e, r)| format!("{e}:{:.4}", r.as_array()[k]))
                .collect();
            Check::at_most(format!("apriori_{}", AprioriRatios::NAMES[k]), growth, limit)
                .with_detail(format!("growth {growth:.4} < {limit}; {}", values.join(" ")))
        })
        .collect()
}

/// Cosine-spaced nodes on `[0, 1]`, clustered at both ends, ending exactly at `s = 1`.
pub fn poincare_grid(intervals: usize) -> Vec<f64> {
    (0..=intervals)
        .map(|i| 0.5 * (1.0 - (std::f64::consts::PI * i as f64 / intervals as f64).cos()))
        .collect()
}

/// `||u||_{L^2} / ||a^2 u'||_{L^2}` from nodal values on a grid ending at `s = 1`.
pub fn poincare_ratio(radius: &RadiusProfile, s: &[f64], u: &[f64]) -> f64 {
    let a2: Vec<f64> = s.windows(2).map(|w| radius.value(0.5 * (w[0] + w[1])).powi(2)).collect();
    let (_, l2, grad) = ha_norm_parts(s, u, &a2);
    l2 / grad
}

/// Seeded random function with `u(0) = 0`: a mix of powers `s^alpha` with
/// `alpha in (0.55, 3)`, low sine modes and one smooth ramp near the tip.
pub fn random_test_function<R: Rng>(rng: &mut R) -> impl Fn(f64) -> f64 + use<R> {
    let powers: Vec<(f64, f64)> = (0..3)
        .map(|_| (rng.random_range(-1.0..1.0), rng.random_range(0.55..3.0)))
        .collect();
    let sines: Vec<(f64, f64)> = (1..=3)
        .map(|m| (rng.random_range(-1.0..1.0), m as f64 * std::f64::consts::PI * rng.random_range(0.5..1.5)))
        .collect();
    let ramp = (
        rng.random_range(-1.0..1.0),
        rng.random_range(0.5..0.99),
        rng.random_range(0.005..0.2),
    );
    move |s: f64| {
        let t = ((s - ramp.1) / ramp.2).clamp(0.0, 1.0);
        powers.iter().map(|(c, a)| c * s.powf(*a)).sum::<f64>()
            + sines.iter().map(|(c, w)| c * (w * s).sin()).sum::<f64>()
            + ramp.0 * t * t * (3.0 - 2.0 * t)
    }
}

/// `count` seeded random functions must satisfy `||u|| <= constant * ||a^2 u'||`.
pub fn weighted_poincare_check(radius: &RadiusProfile, seed: u64, count: usize, constant: f64) -> Check {
    let s = poincare_grid(4096);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let worst = (0..count)
        .map(|_| {
            let f = random_test_function(&mut rng);
            let u: Vec<f64> = s.iter().map(|&x| f(x)).collect();
            poincare_ratio(radius, &s, &u)
        })
        .fold(0.0, f64::max);
    Check::at_most("weighted_poincare_random", worst, constant)
        .with_detail(format!("worst ratio over {count} functions, seed {seed}"))
}

/// Smallest constant `C` with `||u|| <= C ||a^2 u'||` over piecewise-linear `u` with
/// `u(0) = 0` on `intervals` cosine-spaced cells (lumped mass).
pub fn sharp_poincare_constant(radius: &RadiusProfile, intervals: usize) -> f64 {
    let s = poincare_grid(intervals);
    let n = intervals;
    let mass: Vec<f64> = (1..=n)
        .map(|i| 0.5 * (s[i] - s[i - 1]) + if i < n { 0.5 * (s[i + 1] - s[i]) } else { 0.0 })
        .collect();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for f in 0..n {
        let h = s[f + 1] - s[f];
        let c = radius.value(0.5 * (s[f] + s[f + 1])).powi(4) / h;
        // face between node f and f+1; node 0 is pinned and dropped
        let (i, j) = (f as isize - 1, f);
        k[(j, j)] += c;
        if i >= 0 {
            let i = i as usize;
            k[(i, i)] += c;
            k[(i, j)] -= c;
            k[(j, i)] -= c;
        }
    }
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] /= (mass[i] * mass[j]).sqrt();
        }
    }
    let lambda = k.symmetric_eigenvalues().min();
    1.0 / lambda.sqrt()
}

/// Two-sided variation between consecutive sweep entries: for each ratio the largest
/// `max(r_i / r_{i+1}, r_{i+1} / r_i)` must stay below `limit`.
pub fn apriori_step_checks(sweep: &[(f64, AprioriRatios)], limit: f64) -> Vec<Check> {
    (0..5)
        .map(|k| {
            let mut factor: f64 = 1.0;
            for w in sweep.windows(2) {
                let (a, b) = (w[0].1.as_array()[k], w[1].1.as_array()[k]);
                if a == 0.0 && b == 0.0 {
                    continue;
                }
                factor = factor.max(if a == 0.0 || b == 0.0 { f64::INFINITY } else { (a / b).max(b / a) });
            }
            Check::at_most(format!("apriori_step_{}", AprioriRatios::NAMES[k]), factor, limit)
                .with_detail(format!("largest change between consecutive eps {factor:.4} < {limit}"))
        })
        .collect()
}

/// Richardson order `log2((n1 - n2) / (n2 - n3))` from three successive refinements.
pub fn richardson_order(coarse: f64, mid: f64, fine: f64) -> f64 {
    ((coarse - mid) / (mid - fine)).abs().log2()
}
