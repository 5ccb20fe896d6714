//! Run configuration, the five commands and the validation suite.
//!
//! Every command writes its artifacts plus `report.json` into the output directory and
//! returns the [`RunReport`]. Errors carry the module context; failed checks are report
//! entries, not errors.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bem3d1d::{
    assemble_bem, compare_to_1d, default_probes, solve_bem_with_tolerance, sphere_unit_density_check,
    BemSettings, ComparisonReport,
};
use crate::check::{all_passed, Check};
use crate::error::{Error, Result};
use crate::fields::{sample_fields, theta_variation, GridSpec, VelocityAnsatz};
use crate::geometry::{Centerline, RadiusProfile, ValidationSettings, VesselGeometry};
use crate::greens::{eval_green, segment_potential, sn_apply, KernelContext, LineDensity};
use crate::solver1d::{
    apriori_growth_checks, apriori_step_checks, assemble_system, check_apriori_bounds, poincare_grid, poincare_ratio,
    richardson_order, solve_1d, solve_pressure_with_tolerance, weighted_poincare_check, AprioriRatios,
    PhysicalParams, Solution1D, SolverSettings,
};
use crate::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CenterlineSpec {
    #[default]
    Straight,
    Arc {
        radius: f64,
    },
    /// Cubic or higher polynomial per component, lowest degree first.
    Polynomial {
        coefficients: [Vec<f64>; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RadiusSpec {
    #[default]
    Spheroidal,
    Tabulated {
        s: Vec<f64>,
        a: Vec<f64>,
        a0: f64,
        delta: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GeometryConfig {
    pub centerline: CenterlineSpec,
    pub radius: RadiusSpec,
    pub eps: f64,
    pub validation: ValidationSettings,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            centerline: CenterlineSpec::Straight,
            radius: RadiusSpec::Spheroidal,
            eps: 0.05,
            validation: ValidationSettings::default(),
        }
    }
}

impl GeometryConfig {
    pub fn build(&self, eps: f64) -> Result<VesselGeometry> {
        let centerline = match &self.centerline {
            CenterlineSpec::Straight => Centerline::straight(),
            CenterlineSpec::Arc { radius } => Centerline::arc(*radius)?,
            CenterlineSpec::Polynomial { coefficients } => Centerline::polynomial(coefficients.clone())?,
        };
        let radius = match &self.radius {
            RadiusSpec::Spheroidal => RadiusProfile::spheroidal(),
            RadiusSpec::Tabulated { s, a, a0, delta } => RadiusProfile::tabulated(s, a, *a0, *delta)?,
        };
        VesselGeometry::new(centerline, radius, eps)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericsConfig {
    pub solver: SolverSettings,
    pub kernel: KernelContext,
    pub bem: BemSettings,
    pub fields: GridSpec,
    /// Constant in `||u|| <= C ||a^2 u'||` held by the validation suite.
    pub poincare_constant: f64,
    pub poincare_samples: usize,
    /// `+1` takes the exterior normal derivative along the outward normal of the sphere
    /// oracle, `-1` along the inward one.
    pub jump_orientation: f64,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        Self {
            solver: SolverSettings::default(),
            kernel: KernelContext::default(),
            bem: BemSettings::default(),
            fields: GridSpec::Box {
                min: [-0.3, -0.3, 0.0],
                max: [0.3, 0.3, 1.2],
                resolution: [7, 7, 13],
            },
            poincare_constant: 2.05,
            poincare_samples: 100,
            jump_orientation: 1.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    /// Strictly decreasing.
    pub eps: Vec<f64>,
    /// Interval counts for the 1D Richardson ladder at the first `eps`.
    pub refinement: Vec<usize>,
    /// Run the 3D-1D comparison at every `eps`.
    pub include_bem: bool,
    pub bem_stations: usize,
    pub growth_limit: f64,
    pub theta_slope_range: [f64; 2],
    pub ha_order_min: f64,
    pub richardson_min: f64,
    pub energy_bound: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            eps: vec![0.1, 0.05, 0.025],
            refinement: vec![64, 128, 256],
            include_bem: true,
            bem_stations: 160,
            growth_limit: 2.0,
            theta_slope_range: [0.8, 1.3],
            ha_order_min: 0.4,
            richardson_min: 1.9,
            energy_bound: 10.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// The single JSON configuration. Missing keys take their defaults, and the full
/// resolved config is written back into every report.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub physics: PhysicalParams,
    pub numerics: NumericsConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        self.physics.validate()?;
        let eps = self.geometry.eps;
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::Config(format!("eps must lie in (0, 1), got {eps}")));
        }
        let v = &self.geometry.validation;
        for (n, x) in [
            ("unit_speed_tol", v.unit_speed_tol),
            ("orthonormality_tol", v.orthonormality_tol),
            ("curvature_identity_tol", v.curvature_identity_tol),
            ("sup_radius_tol", v.sup_radius_tol),
            ("tip_constant", v.tip_constant),
            ("solver.residual_tolerance", self.numerics.solver.residual_tolerance),
            ("solver.grading", self.numerics.solver.grading),
            ("bem.residual_tolerance", self.numerics.bem.residual_tolerance),
            ("poincare_constant", self.numerics.poincare_constant),
            ("growth_limit", self.sweep.growth_limit),
            ("energy_bound", self.sweep.energy_bound),
        ] {
            positive(n, x)?;
        }
        if let Some(h) = self.numerics.solver.h_min {
            positive("solver.h_min", h)?;
        }
        if self.numerics.solver.intervals < 2 {
            return Err(Error::Config("solver.intervals must be at least 2".into()));
        }
        self.numerics.kernel.validate()?;
        self.numerics.bem.quadrature.validate()?;
        if self.numerics.bem.n_theta < 8 {
            return Err(Error::Config("bem.n_theta must be at least 8".into()));
        }
        if self.numerics.jump_orientation.abs() != 1.0 {
            return Err(Error::Config("jump_orientation must be +1 or -1".into()));
        }
        let e = &self.sweep.eps;
        if e.iter().any(|&x| !(x > 0.0 && x < 1.0)) || e.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("sweep.eps must be strictly decreasing values in (0, 1)".into()));
        }
        if self.sweep.refinement.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config("sweep.refinement must be strictly increasing".into()));
        }
        Ok(())
    }

    /// SHA-256 of the resolved config serialized as JSON.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    fn ctx(&self) -> KernelContext {
        self.numerics.kernel.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve1d,
    Solve3d1d,
    Sweep,
    Validate,
    SampleFields,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve1d => "solve-1d",
            Command::Solve3d1d => "solve-3d1d",
            Command::Sweep => "sweep",
            Command::Validate => "validate",
            Command::SampleFields => "sample-fields",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config_hash: String,
    pub config: RunConfig,
    pub passed: bool,
    pub checks: Vec<Check>,
    pub metrics: BTreeMap<String, f64>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
}

impl RunReport {
    fn new(command: Command, config: &RunConfig) -> Self {
        Self {
            command: command.name().into(),
            config_hash: config.hash(),
            config: config.clone(),
            passed: true,
            checks: Vec::new(),
            metrics: BTreeMap::new(),
            timings: BTreeMap::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.timings.insert(stage.into(), t.elapsed().as_secs_f64());
        out
    }

    fn write(&mut self, out: &Path, name: &str, contents: &str) -> Result<()> {
        fs::write(out.join(name), contents)?;
        self.artifacts.push(name.into());
        Ok(())
    }

    fn finish(mut self, out: &Path) -> Result<Self> {
        self.passed = all_passed(&self.checks);
        self.artifacts.push("report.json".into());
        fs::write(out.join("report.json"), serde_json::to_string_pretty(&self)?)?;
        Ok(self)
    }
}

/// Attach the failing module to an error message.
fn tagged<T>(module: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{module}: {m}")),
        Error::Validation(m) => Error::Validation(format!("{module}: {m}")),
        Error::Conditioning { context, unknowns, eps } => Error::Conditioning {
            context: format!("{module}: {context}"),
            unknowns,
            eps,
        },
        Error::Convergence { context, residual, tolerance } => Error::Convergence {
            context: format!("{module}: {context}"),
            residual,
            tolerance,
        },
        other => other,
    })
}

/// Run `command`, writing artifacts into `out`.
pub fn run(command: Command, config: &RunConfig, out: &Path) -> Result<RunReport> {
    config.validate()?;
    fs::create_dir_all(out)?;
    match command {
        Command::Solve1d => cmd_solve_1d(config, out),
        Command::Solve3d1d => cmd_solve_3d1d(config, out),
        Command::Sweep => cmd_sweep(config, out),
        Command::Validate => cmd_validate(config, out),
        Command::SampleFields => cmd_sample_fields(config, out),
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn residual_check(name: &str, sol: &Solution1D, tol: f64) -> Check {
    Check::at_most(name, sol.residual, tol * sol.params.p0.abs().max(f64::MIN_POSITIVE))
}

/// `|sum F |cell| + Q(0) - Q(s_N)|` relative to the largest nodal flux or `|p0|`.
fn flux_balance_check(sol: &Solution1D) -> Check {
    let scale = sup(&sol.node_flux()).max(sol.params.p0.abs()).max(f64::MIN_POSITIVE);
    Check::at_most("solver1d_flux_balance", sol.flux_balance().abs() / scale, 1e-10)
}

/// `||p - p0|| <= C ||a^2 p'||` for the solved pressure (extended by its last value).
fn solver_poincare_check(sol: &Solution1D, geom: &VesselGeometry, constant: f64) -> Check {
    let mut s = sol.nodes().to_vec();
    let mut u: Vec<f64> = sol.p.iter().map(|p| p - sol.params.p0).collect();
    s.push(1.0);
    u.push(*u.last().unwrap());
    let ratio = if u.iter().all(|v| *v == 0.0) { 0.0 } else { poincare_ratio(geom.radius(), &s, &u) };
    Check::at_most("weighted_poincare_solution", ratio, constant)
}

/// Straight-vessel identities at every plateau node: `div U = 0` and
/// `(U.n) J = (eps^4 / 16 mu) F`, both relative to `(eps^4 / 16 mu) max(|F|, |p0|)`.
fn straight_identity_checks(geom: &VesselGeometry, sol: &Solution1D) -> Result<Vec<Check>> {
    let u = VelocityAnsatz::new(geom, sol);
    let scale = geom.eps().powi(4) / (16.0 * sol.params.mu);
    let fmax = sup(&sol.f).max(sol.params.p0.abs()).max(f64::MIN_POSITIVE);
    let (mut flux_err, mut div_max): (f64, f64) = (0.0, 0.0);
    let mut plateau = 0;
    for (i, &s) in sol.nodes().iter().enumerate() {
        if s > u.cutoff().inner {
            break;
        }
        plateau += 1;
        for k in 0..8 {
            let th = 2.0 * PI * k as f64 / 8.0;
            flux_err = flux_err.max((u.wall_flux_density(s, th)? - scale * sol.f[i]).abs());
            for r in [0.0, 0.5, 1.0] {
                div_max = div_max.max(u.divergence(r * geom.physical_radius(s), th, s)?.abs());
            }
        }
    }
    Ok(vec![
        Check::at_most("straight_divergence_free", div_max / (scale * fmax), 1e-10)
            .with_detail(format!("{plateau} plateau nodes")),
        Check::at_most("straight_wall_flux_identity", flux_err / (scale * fmax), 1e-10)
            .with_detail(format!("{plateau} plateau nodes")),
    ])
}

fn insert_ratios(metrics: &mut BTreeMap<String, f64>, prefix: &str, r: &AprioriRatios) {
    for (n, v) in AprioriRatios::NAMES.iter().zip(r.as_array()) {
        metrics.insert(format!("{prefix}{n}"), v);
    }
}

fn cmd_solve_1d(config: &RunConfig, out: &Path) -> Result<RunReport> {
    let mut report = RunReport::new(Command::Solve1d, config);
    let ctx = config.ctx();
    let geom = tagged("geometry", config.geometry.build(config.geometry.eps))?;
    let greport = report.time("geometry", || geom.validate_admissible(&config.geometry.validation));
    report.checks.extend(greport.checks.iter().cloned());
    let sol = report.time("solve", || {
        tagged("solver1d", solve_1d(&geom, &ctx, &config.numerics.solver, &config.physics))
    })?;
    report.checks.push(residual_check("solver1d_residual", &sol, config.numerics.solver.residual_tolerance));
    report.checks.push(flux_balance_check(&sol));
    report
        .checks
        .push(solver_poincare_check(&sol, &geom, config.numerics.poincare_constant));
    let ratios = check_apriori_bounds(&sol);
    insert_ratios(&mut report.metrics, "apriori_", &ratios);
    report.metrics.insert("ha_norm".into(), sol.ha_norm());
    report.metrics.insert("residual".into(), sol.residual);
    report.metrics.insert("inflow_flux".into(), sol.node_flux()[0]);
    report.metrics.insert("max_abs_F".into(), sup(&sol.f));
    let tv = report.time("theta_variation", || tagged("fields", theta_variation(&ctx, &geom, &sol)))?;
    report.metrics.insert("theta_variation".into(), tv.surface_norm);
    if geom.is_straight() {
        report.checks.extend(tagged("fields", straight_identity_checks(&geom, &sol))?);
    }
    report.write(out, "solution_1d.csv", &sol.to_csv())?;
    let sidecar = serde_json::json!({
        "params": sol.params,
        "eps": sol.eps,
        "intervals": sol.mesh.intervals(),
        "residual": sol.residual,
        "ha_norm": sol.ha_norm(),
        "apriori": ratios,
        "theta_variation": tv.surface_norm,
    });
    report.write(out, "solution_1d.json", &serde_json::to_string_pretty(&sidecar)?)?;
    report.finish(out)
}

/// Coupled solve plus the 1D solve on the same stations and their comparison.
struct CoupledRun {
    comparison: ComparisonReport,
    checks: Vec<Check>,
    metrics: BTreeMap<String, f64>,
    stations_csv: String,
    panels_csv: String,
}

fn coupled_run(
    config: &RunConfig,
    geom: &VesselGeometry,
    settings: &BemSettings,
    full_checks: bool,
) -> Result<CoupledRun> {
    let ctx = config.ctx();
    let params = config.physics;
    let mesh = tagged("bem3d1d", settings.mesh(geom))?;
    let system = tagged("bem3d1d", assemble_bem(geom, &mesh, &params, &ctx))?;
    let bem = tagged("bem3d1d", solve_bem_with_tolerance(&system, settings.residual_tolerance))?;
    let sys1 = tagged("solver1d", assemble_system(geom, &ctx, &mesh.stations, &params))?;
    let sol = tagged(
        "solver1d",
        solve_pressure_with_tolerance(&sys1, config.numerics.solver.residual_tolerance),
    )?;
    let comparison = tagged("bem3d1d", compare_to_1d(&bem, &sol, &ctx, &default_probes(geom)))?;

    let p0 = params.p0.abs().max(f64::MIN_POSITIVE);
    let energy_p = bem.ha_norm() / p0;
    let energy_jump = bem.wall_jump_norm() / mesh.total_area().sqrt() / p0;
    let mut checks = vec![
        Check::at_most("bem_residual", bem.residual, settings.residual_tolerance * p0),
        Check::at_most("bem_global_conservation", bem.conservation_error(), 1e-4),
        Check::at_most("bem_energy_ha", energy_p, config.sweep.energy_bound),
        Check::at_most("bem_energy_wall_jump", energy_jump, config.sweep.energy_bound),
    ];
    if full_checks {
        checks.push(
            Check::at_most("bem_single_layer_symmetry", system.single_layer_asymmetry(2.0), 0.01)
                .with_detail("pairs at least two panel diameters apart"),
        );
        let qmax = sup(&bem.q_wall);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut n = 0;
        while n < 50 {
            let x = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0);
            if x.norm() < 3.0 * geom.eps() {
                continue;
            }
            let up = tagged("bem3d1d", bem.q(&(x + Vec3::z() * h)))?;
            let down = tagged("bem3d1d", bem.q(&(x - Vec3::z() * h)))?;
            worst = worst.max(((up - down) / (2.0 * h)).abs());
            n += 1;
        }
        let rel = if qmax > 0.0 { worst / qmax } else { worst };
        checks.push(Check::at_most("bem_wall_neumann", rel, 1e-6).with_detail("50 seeded points on z = 0"));
    }
    let mut metrics = BTreeMap::new();
    metrics.insert("panels".into(), mesh.len() as f64);
    metrics.insert("total_area".into(), mesh.total_area());
    metrics.insert("tip_cap_area".into(), mesh.tip_cap_area);
    metrics.insert("inflow_flux".into(), bem.q_in);
    metrics.insert("total_wall_flux".into(), bem.total_wall_flux());
    metrics.insert("conservation_error".into(), bem.conservation_error());
    metrics.insert("ha_error".into(), comparison.ha_error);
    metrics.insert("surface_mismatch".into(), comparison.surface_mismatch);
    metrics.insert("gradient_proxy".into(), comparison.gradient_proxy);
    metrics.insert("energy_ha".into(), energy_p);
    metrics.insert("energy_wall_jump".into(), energy_jump);
    Ok(CoupledRun {
        comparison,
        checks,
        metrics,
        stations_csv: bem.stations_csv(),
        panels_csv: bem.panels_csv(),
    })
}

fn cmd_solve_3d1d(config: &RunConfig, out: &Path) -> Result<RunReport> {
    let mut report = RunReport::new(Command::Solve3d1d, config);
    let geom = tagged("geometry", config.geometry.build(config.geometry.eps))?;
    let greport = geom.validate_admissible(&config.geometry.validation);
    report.checks.extend(greport.checks.iter().cloned());
    let run = report.time("coupled", || coupled_run(config, &geom, &config.numerics.bem, true))?;
    report.checks.extend(run.checks);
    report.metrics.extend(run.metrics);
    report.write(out, "bem_stations.csv", &run.stations_csv)?;
    report.write(out, "bem_panels.csv", &run.panels_csv)?;
    report.write(out, "comparison.json", &serde_json::to_string_pretty(&run.comparison)?)?;
    report.finish(out)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

/// Slopes of `y` and of `y / |log eps|` against `eps`.
pub fn sweep_slopes(eps: &[f64], y: &[f64]) -> (f64, f64) {
    let corrected: Vec<f64> = eps.iter().zip(y).map(|(e, v)| v / e.ln().abs()).collect();
    (loglog_slope(eps, y), loglog_slope(eps, &corrected))
}

/// One row of the sweep table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub ha_norm_1d: f64,
    pub apriori: AprioriRatios,
    pub theta_variation: f64,
    pub comparison: Option<ComparisonReport>,
    pub bem_checks: Vec<Check>,
}

fn cmd_sweep(config: &RunConfig, out: &Path) -> Result<RunReport> {
    let sw = &config.sweep;
    if sw.eps.len() < 3 {
        return Err(Error::Config(format!("sweep needs at least 3 eps values, got {}", sw.eps.len())));
    }
    let mut report = RunReport::new(Command::Sweep, config);
    let ctx = config.ctx();
    let curved = !config.geometry.build(sw.eps[0])?.is_straight();
    let rows: Vec<SweepRow> = report.time("sweep", || {
        sw.eps
            .par_iter()
            .map(|&eps| {
                let geom = tagged("geometry", config.geometry.build(eps))?;
                let sol = tagged("solver1d", solve_1d(&geom, &ctx, &config.numerics.solver, &config.physics))?;
                let theta = if curved {
                    tagged("fields", theta_variation(&ctx, &geom, &sol))?.surface_norm
                } else {
                    0.0
                };
                let (comparison, bem_checks) = if sw.include_bem {
                    let settings = BemSettings { n_stations: sw.bem_stations, ..config.numerics.bem.clone() };
                    let run = coupled_run(config, &geom, &settings, false)?;
                    (Some(run.comparison), run.checks)
                } else {
                    (None, Vec::new())
                };
                Ok(SweepRow {
                    eps,
                    ha_norm_1d: sol.ha_norm(),
                    apriori: check_apriori_bounds(&sol),
                    theta_variation: theta,
                    comparison,
                    bem_checks,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let eps: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let sweep_ratios: Vec<(f64, AprioriRatios)> = rows.iter().map(|r| (r.eps, r.apriori)).collect();
    report.checks.extend(apriori_growth_checks(&sweep_ratios, sw.growth_limit));
    report.checks.extend(apriori_step_checks(&sweep_ratios, sw.growth_limit));
    let mut slopes = BTreeMap::new();

    if curved {
        let tv: Vec<f64> = rows.iter().map(|r| r.theta_variation / config.physics.p0.abs()).collect();
        let (plain, corrected) = sweep_slopes(&eps, &tv);
        slopes.insert("theta_variation".to_string(), plain);
        slopes.insert("theta_variation_log_corrected".to_string(), corrected);
        let [lo, hi] = sw.theta_slope_range;
        report.checks.push(Check::in_range("theta_variation_slope", plain, lo, hi));
    }
    if sw.include_bem {
        let err: Vec<f64> = rows.iter().map(|r| r.comparison.as_ref().unwrap().ha_error).collect();
        let (plain, corrected) = sweep_slopes(&eps, &err);
        slopes.insert("ha_error".to_string(), plain);
        slopes.insert("ha_error_log_corrected".to_string(), corrected);
        let monotone = err.windows(2).all(|w| w[1] < w[0]);
        report.checks.push(
            Check::at_least("ha_error_order", plain, sw.ha_order_min)
                .with_detail(format!("slope {plain:.4}, monotone decrease: {monotone}")),
        );
        report.checks.push(Check::at_least(
            "ha_error_monotone",
            if monotone { 1.0 } else { 0.0 },
            1.0,
        ));
        for r in &rows {
            for c in &r.bem_checks {
                let mut c = c.clone();
                c.name = format!("{}@eps={}", c.name, r.eps);
                report.checks.push(c);
            }
        }
        for key in ["surface_mismatch", "gradient_proxy"] {
            let v: Vec<f64> = rows
                .iter()
                .map(|r| {
                    let c = r.comparison.as_ref().unwrap();
                    if key == "surface_mismatch" { c.surface_mismatch } else { c.gradient_proxy }
                })
                .collect();
            if v.iter().all(|x| *x > 0.0) {
                let (plain, corrected) = sweep_slopes(&eps, &v);
                slopes.insert(key.to_string(), plain);
                slopes.insert(format!("{key}_log_corrected"), corrected);
            }
        }
    }

    if sw.refinement.len() >= 3 {
        let geom = config.geometry.build(eps[0])?;
        let norms: Vec<f64> = report.time("richardson", || {
            sw.refinement
                .iter()
                .map(|&n| {
                    let s = SolverSettings { intervals: n, ..config.numerics.solver.clone() };
                    Ok(tagged("solver1d", solve_1d(&geom, &ctx, &s, &config.physics))?.ha_norm())
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let k = norms.len();
        let order = richardson_order(norms[k - 3], norms[k - 2], norms[k - 1]);
        slopes.insert("solver1d_richardson".to_string(), order);
        report.checks.push(
            Check::at_least("solver1d_richardson_order", order, sw.richardson_min)
                .with_detail(format!("H^a norms {norms:?} at eps = {}", eps[0])),
        );
    }

    let mut csv = String::from(
        "eps,ha_norm_1d,l2_p,l2_a2_dp,sqrt_eps_linf_p,sqrt_eps_linf_a_dp,sqrt_eps_linf_a3_ddp,theta_variation,ha_error,surface_mismatch,gradient_proxy\n",
    );
    for r in &rows {
        let a = r.apriori.as_array();
        let (h, s, g) = r
            .comparison
            .as_ref()
            .map_or((f64::NAN, f64::NAN, f64::NAN), |c| (c.ha_error, c.surface_mismatch, c.gradient_proxy));
        csv.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r.eps, r.ha_norm_1d, a[0], a[1], a[2], a[3], a[4], r.theta_variation, h, s, g
        ));
    }
    for (k, v) in &slopes {
        report.metrics.insert(format!("slope_{k}"), *v);
    }
    report.write(out, "sweep.csv", &csv)?;
    report.write(out, "slopes.json", &serde_json::to_string_pretty(&slopes)?)?;
    report.write(out, "sweep_rows.json", &serde_json::to_string_pretty(&rows)?)?;
    report.finish(out)
}

/// Closed-form line-potential oracle on the straight vessel: 20 seeded exterior points
/// at `1e-10` and on-surface points at `1e-6`, for both kernel variants.
pub fn greens_oracle_checks(eps: f64, seed: u64) -> Result<Vec<Check>> {
    let geom = VesselGeometry::straight_spheroidal(eps)?;
    let l = (1.0 - eps * eps).sqrt();
    let f = LineDensity::uniform(32, |_| 1.0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probes: Vec<Vec3> = (0..20)
        .map(|_| {
            let rho = rng.random_range(3.0 * eps..0.8);
            let th = rng.random_range(0.0..2.0 * PI);
            Vec3::new(rho * th.cos(), rho * th.sin(), rng.random_range(0.02..1.4))
        })
        .collect();
    let mut checks = Vec::new();
    for ctx in [KernelContext::free_space(), KernelContext::half_space()] {
        let exact = |x: &Vec3| {
            let rho = x.x.hypot(x.y);
            let free = segment_potential(rho, x.z, l);
            if ctx.has_image() { free + segment_potential(rho, -x.z, l) } else { free }
        };
        let mut worst: f64 = 0.0;
        for x in &probes {
            let e = exact(x);
            worst = worst.max((sn_apply(&ctx, &geom, &f, x)? - e).abs() / e);
        }
        let tag = if ctx.has_image() { "half_space" } else { "free_space" };
        checks.push(Check::at_most(format!("greens_line_oracle_{tag}"), worst, 1e-10));
        let mut worst: f64 = 0.0;
        for &s in &[0.0, 0.01, 0.3, 0.77, 0.99, 0.9999] {
            let x = geom.surface_point(s, 0.4)?;
            let e = exact(&x);
            worst = worst.max((sn_apply(&ctx, &geom, &f, &x)? - e).abs() / e);
        }
        checks.push(Check::at_most(format!("greens_surface_oracle_{tag}"), worst, 1e-6));
    }
    // wall Neumann of the half-space kernel by central differences
    let ctx = KernelContext::half_space();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), 0.0);
        let y = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..1.0));
        let g = eval_green(&ctx, &x, &y)?;
        let d = (eval_green(&ctx, &(x + Vec3::z() * h), &y)? - eval_green(&ctx, &(x - Vec3::z() * h), &y)?) / (2.0 * h);
        worst = worst.max(d.abs() / g);
    }
    checks.push(Check::at_most("greens_wall_neumann", worst, 1e-6));
    Ok(checks)
}

/// `kappa = 0` returns `p = p0`, `F = 0` in both solvers.
fn degenerate_checks(config: &RunConfig, geom: &VesselGeometry) -> Result<Vec<Check>> {
    let params = PhysicalParams { kappa: 0.0, ..config.physics };
    let ctx = config.ctx();
    let sol = tagged("solver1d", solve_1d(geom, &ctx, &config.numerics.solver, &params))?;
    let dev1 = sol.p.iter().map(|p| (p - params.p0).abs()).fold(sup(&sol.f), f64::max);
    let settings = BemSettings { n_stations: 12, n_theta: 8, ..config.numerics.bem.clone() };
    let mesh = tagged("bem3d1d", settings.mesh(geom))?;
    let bem = tagged(
        "bem3d1d",
        solve_bem_with_tolerance(&assemble_bem(geom, &mesh, &params, &ctx)?, settings.residual_tolerance),
    )?;
    let dev3 = bem.p.iter().map(|p| (p - params.p0).abs()).fold(sup(&bem.sigma), f64::max);
    let scale = params.p0.abs().max(1.0);
    Ok(vec![
        Check::at_most("solver1d_zero_kappa", dev1 / scale, 1e-12),
        Check::at_most("bem_zero_kappa", dev3 / scale, 1e-12),
    ])
}

/// Solutions scale with `p0`: compare `p0` against `-2.5 p0`.
fn linearity_check(config: &RunConfig, geom: &VesselGeometry, base: &Solution1D) -> Result<Check> {
    let params = config.physics.with_p0(-2.5 * config.physics.p0);
    let sol = tagged("solver1d", solve_1d(geom, &config.ctx(), &config.numerics.solver, &params))?;
    let scale = sup(&base.p).max(sup(&base.f)).max(f64::MIN_POSITIVE);
    let dev = base
        .p
        .iter()
        .zip(&sol.p)
        .chain(base.f.iter().zip(&sol.f))
        .map(|(a, b)| (-2.5 * a - b).abs())
        .fold(0.0, f64::max);
    Ok(Check::at_most("solver1d_linearity", dev / (2.5 * scale), 1e-12))
}

fn cmd_validate(config: &RunConfig, out: &Path) -> Result<RunReport> {
    let mut report = RunReport::new(Command::Validate, config);
    let ctx = config.ctx();
    let eps = config.geometry.eps;
    let geom = tagged("geometry", config.geometry.build(eps))?;

    let greport = report.time("geometry", || geom.validate_admissible(&config.geometry.validation));
    report.checks.extend(greport.checks.iter().cloned());
    report.metrics.insert("c_gamma".into(), greport.c_gamma);
    report.metrics.insert("kappa_max".into(), greport.kappa_max);

    let checks = report.time("greens", || tagged("greens", greens_oracle_checks(eps, config.seed)))?;
    report.checks.extend(checks);

    let sol = report.time("solver1d", || {
        tagged("solver1d", solve_1d(&geom, &ctx, &config.numerics.solver, &config.physics))
    })?;
    report.checks.push(residual_check("solver1d_residual", &sol, config.numerics.solver.residual_tolerance));
    report.checks.push(flux_balance_check(&sol));
    report.checks.push(linearity_check(config, &geom, &sol)?);
    let fine = ctx.clone().with_theta_points(2 * ctx.theta_points);
    let sol2 = tagged("solver1d", solve_1d(&geom, &fine, &config.numerics.solver, &config.physics))?;
    let dev = sol.p.iter().zip(&sol2.p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    report.checks.push(Check::at_most("solver1d_theta_doubling", dev, 1e-9));
    let checks = report.time("degenerate", || degenerate_checks(config, &geom))?;
    report.checks.extend(checks);

    let c = config.numerics.poincare_constant;
    report.checks.push(weighted_poincare_check(
        geom.radius(),
        config.seed,
        config.numerics.poincare_samples,
        c,
    ));
    let s = poincare_grid(8192);
    let witness: Vec<f64> = s.iter().map(|x| x.powf(0.6)).collect();
    report.checks.push(
        Check::at_most("weighted_poincare_witness", poincare_ratio(geom.radius(), &s, &witness), c)
            .with_detail("u(s) = s^0.6"),
    );
    report.checks.push(solver_poincare_check(&sol, &geom, c));

    // exact identities need a straight vessel with the configured radius
    let straight = GeometryConfig { centerline: CenterlineSpec::Straight, ..config.geometry.clone() }.build(eps)?;
    let ssol = if geom.is_straight() {
        sol.clone()
    } else {
        tagged("solver1d", solve_1d(&straight, &ctx, &config.numerics.solver, &config.physics))?
    };
    report.checks.extend(tagged("fields", straight_identity_checks(&straight, &ssol))?);

    let quad = config.numerics.bem.quadrature.clone();
    let orientation = config.numerics.jump_orientation;
    let values = report.time("sphere", || sphere_unit_density_check(16, 16, orientation, &quad));
    let worst = values
        .iter()
        .copied()
        .max_by(|a, b| (a + 1.0).abs().total_cmp(&(b + 1.0).abs()))
        .unwrap_or(f64::NAN);
    report.checks.push(
        Check::in_range("sphere_jump_oracle", worst, -1.02, -0.98)
            .with_detail(format!("worst of 256 collocation values {worst:+.5}, expected -1")),
    );

    let run = report.time("bem3d1d", || coupled_run(config, &geom, &config.numerics.bem, true))?;
    report.checks.extend(run.checks);
    report.metrics.extend(run.metrics);
    report.finish(out)
}

fn cmd_sample_fields(config: &RunConfig, out: &Path) -> Result<RunReport> {
    let mut report = RunReport::new(Command::SampleFields, config);
    let ctx = config.ctx();
    let geom = tagged("geometry", config.geometry.build(config.geometry.eps))?;
    let sol = report.time("solve", || {
        tagged("solver1d", solve_1d(&geom, &ctx, &config.numerics.solver, &config.physics))
    })?;
    report.checks.push(residual_check("solver1d_residual", &sol, config.numerics.solver.residual_tolerance));
    let grid = report.time("sample", || tagged("fields", sample_fields(&ctx, &geom, &sol, &config.numerics.fields)))?;
    report.metrics.insert("samples".into(), grid.samples.len() as f64);
    report.metrics.insert("skipped".into(), grid.skipped as f64);
    report.write(out, "fields.csv", &grid.to_csv())?;
    let manifest = serde_json::json!({
        "grid": config.numerics.fields,
        "samples": grid.samples.len(),
        "skipped": grid.skipped,
        "columns": ["x", "y", "z", "tag", "value", "ux", "uy", "uz"],
        "config_hash": report.config_hash,
    });
    report.write(out, "fields_manifest.json", &serde_json::to_string_pretty(&manifest)?)?;
    report.finish(out)
}

/// Process exit code: `0` success, `2` configuration, `3` numerical failure, `4` failed check.
pub fn exit_code(result: &Result<RunReport>) -> i32 {
    match result {
        Ok(r) if r.passed => 0,
        Ok(_) => 4,
        Err(Error::Config(_) | Error::Json(_) | Error::Io(_)) => 2,
        Err(_) => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("vessel-harness-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn defaults_round_trip_and_hash() {
        let cfg = RunConfig::from_json("{}").unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg.hash(), back.hash());
        assert_eq!(cfg.hash().len(), 64);
        let mut other = cfg.clone();
        other.physics.p0 = 2.0;
        assert_ne!(cfg.hash(), other.hash());
    }

    #[test]
    fn config_validation() {
        for bad in [
            r#"{"sweep": {"eps": [0.05, 0.1, 0.025]}}"#,
            r#"{"physics": {"mu": -1}}"#,
            r#"{"numerics": {"solver": {"residual_tolerance": 0}}}"#,
            r#"{"geometry": {"eps": 1.5}}"#,
            r#"{"numerics": {"bem": {"n_theta": 4}}}"#,
            r#"{"geometry": {"centerline": {"kind": "helix"}}}"#,
        ] {
            assert!(matches!(RunConfig::from_json(bad), Err(Error::Config(_))), "{bad}");
        }
        let cfg = RunConfig::from_json(r#"{"geometry": {"centerline": {"kind": "arc", "radius": 1.0}}, "physics": {"p0": -3}}"#).unwrap();
        assert_eq!(cfg.physics.p0, -3.0);
        assert!(!cfg.geometry.build(0.05).unwrap().is_straight());
    }

    #[test]
    fn slopes_of_power_laws() {
        let eps = [0.1, 0.05, 0.025];
        let y: Vec<f64> = eps.iter().map(|e: &f64| 3.0 * e.powf(1.5)).collect();
        assert!((loglog_slope(&eps, &y) - 1.5).abs() < 1e-12);
        let y: Vec<f64> = eps.iter().map(|e: &f64| e * e.ln().abs()).collect();
        assert!((sweep_slopes(&eps, &y).1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_needs_three_points() {
        let mut cfg = RunConfig::default();
        cfg.sweep.eps = vec![0.1, 0.05];
        let r = run(Command::Sweep, &cfg, &tmp("sweep2"));
        assert!(matches!(r, Err(Error::Config(_))));
        assert_eq!(exit_code(&r), 2);
    }

    #[test]
    fn zero_kappa_solve_1d_report() {
        let mut cfg = RunConfig::default();
        cfg.physics.kappa = 0.0;
        cfg.numerics.solver.intervals = 64;
        let out = tmp("k0");
        let r = run(Command::Solve1d, &cfg, &out).unwrap();
        assert!(r.passed, "{:?}", r.failed());
        assert!(r.metrics["max_abs_F"] < 1e-12 && r.metrics["inflow_flux"].abs() < 1e-12);
        let csv = fs::read_to_string(out.join("solution_1d.csv")).unwrap();
        assert!(csv.lines().skip(1).all(|l| (l.split(',').nth(2).unwrap().parse::<f64>().unwrap() - 1.0).abs() < 1e-12));
        assert!(out.join("report.json").exists());
    }

    #[test]
    fn reruns_are_bit_identical() {
        let mut cfg = RunConfig::default();
        cfg.numerics.solver.intervals = 64;
        let (a, b) = (tmp("det-a"), tmp("det-b"));
        run(Command::Solve1d, &cfg, &a).unwrap();
        run(Command::Solve1d, &cfg, &b).unwrap();
        for f in ["solution_1d.csv", "solution_1d.json"] {
            assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        }
    }

    #[test]
    fn greens_oracle_passes() {
        let checks = greens_oracle_checks(0.05, 3).unwrap();
        assert!(all_passed(&checks), "{checks:?}");
    }
}
