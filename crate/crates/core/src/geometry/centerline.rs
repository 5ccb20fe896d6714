//! Arclength-parameterized vessel centerlines `X : [0, 1] -> R^3_+`.

use crate::error::{Error, Result};
use crate::quadrature::UnitRule;
use crate::Vec3;

/// One cached sample of the centerline.
#[derive(Debug, Clone, Copy)]
pub struct CurveSample {
    pub s: f64,
    pub position: Vec3,
    pub tangent: Vec3,
    pub curvature: Vec3,
}

#[derive(Debug, Clone)]
enum Shape {
    Straight,
    /// Planar arc in the xz-plane, tangent to `e_z` at the origin and bending toward `+x`.
    Arc { radius: f64 },
    Polynomial(PolynomialCurve),
}

/// Unit-length centerline with cached samples of `X`, `X_s` and `X_ss`.
#[derive(Debug, Clone)]
pub struct Centerline {
    shape: Shape,
    samples: Vec<CurveSample>,
}

const DEFAULT_SAMPLES: usize = 512;

impl Centerline {
    /// `X(s) = s e_z`.
    pub fn straight() -> Self {
        Self::with_shape(Shape::Straight)
    }

    /// Circular arc of curvature `1 / radius` lying in the xz-plane.
    pub fn arc(radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::Validation(format!("arc radius must be positive, got {radius}")));
        }
        Ok(Self::with_shape(Shape::Arc { radius }))
    }

    /// Polynomial curve `P(u) = sum_k c_k u^k` per component, re-parameterized by arclength and
    /// rescaled to unit length. `coefficients[d][k]` multiplies `u^k` in component `d`.
    pub fn polynomial(coefficients: [Vec<f64>; 3]) -> Result<Self> {
        Ok(Self::with_shape(Shape::Polynomial(PolynomialCurve::new(coefficients)?)))
    }

    fn with_shape(shape: Shape) -> Self {
        let mut c = Self {
            shape,
            samples: Vec::new(),
        };
        c.samples = (0..=DEFAULT_SAMPLES)
            .map(|i| c.sample(i as f64 / DEFAULT_SAMPLES as f64))
            .collect();
        c
    }

    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Straight => "straight",
            Shape::Arc { .. } => "arc",
            Shape::Polynomial(_) => "polynomial",
        }
    }

    pub fn samples(&self) -> &[CurveSample] {
        &self.samples
    }

    pub fn sample(&self, s: f64) -> CurveSample {
        let (position, tangent, curvature) = self.eval(s);
        CurveSample {
            s,
            position,
            tangent,
            curvature,
        }
    }

    pub fn position(&self, s: f64) -> Vec3 {
        self.eval(s).0
    }

    pub fn tangent(&self, s: f64) -> Vec3 {
        self.eval(s).1
    }

    /// `X_ss(s)`.
    pub fn curvature_vector(&self, s: f64) -> Vec3 {
        self.eval(s).2
    }

    /// `(X, X_s, X_ss)` at `s`. Values outside `[0, 1]` are extrapolated analytically.
    pub fn eval(&self, s: f64) -> (Vec3, Vec3, Vec3) {
        match &self.shape {
            Shape::Straight => (Vec3::new(0.0, 0.0, s), Vec3::z(), Vec3::zeros()),
            Shape::Arc { radius } => {
                let phi = s / radius;
                let (sin, cos) = phi.sin_cos();
                (
                    Vec3::new(radius * (1.0 - cos), 0.0, radius * sin),
                    Vec3::new(sin, 0.0, cos),
                    Vec3::new(cos, 0.0, -sin) / *radius,
                )
            }
            Shape::Polynomial(p) => p.eval_arclength(s),
        }
    }
}

/// Polynomial space curve with an arclength lookup table.
#[derive(Debug, Clone)]
struct PolynomialCurve {
    coefficients: [Vec<f64>; 3],
    length: f64,
    // cumulative arclength at u = i / TABLE
    table: Vec<f64>,
    rule: UnitRule,
}

const TABLE: usize = 256;

impl PolynomialCurve {
    fn new(coefficients: [Vec<f64>; 3]) -> Result<Self> {
        if coefficients.iter().all(|c| c.len() < 2) {
            return Err(Error::Validation("polynomial centerline is degenerate".into()));
        }
        let mut curve = Self {
            coefficients,
            length: 0.0,
            table: vec![0.0; TABLE + 1],
            rule: UnitRule::gauss_legendre(12),
        };
        for i in 0..TABLE {
            let (a, b) = (i as f64 / TABLE as f64, (i + 1) as f64 / TABLE as f64);
            let seg = curve.rule.integrate(a, b, |u| curve.derivatives(u).1.norm());
            curve.table[i + 1] = curve.table[i] + seg;
        }
        curve.length = curve.table[TABLE];
        let min_speed = (0..=TABLE)
            .map(|i| curve.derivatives(i as f64 / TABLE as f64).1.norm())
            .fold(f64::INFINITY, f64::min);
        if !(curve.length > 0.0) || min_speed < 1e-12 * curve.length {
            return Err(Error::Validation(
                "polynomial centerline has a stationary point (zero-length tangent)".into(),
            ));
        }
        Ok(curve)
    }

    fn derivatives(&self, u: f64) -> (Vec3, Vec3, Vec3) {
        let mut out = [[0.0; 3]; 3];
        for (d, coeffs) in self.coefficients.iter().enumerate() {
            // Horner for value, first and second derivative
            let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
            for &c in coeffs.iter().rev() {
                d2 = d2 * u + 2.0 * d1;
                d1 = d1 * u + v;
                v = v * u + c;
            }
            out[0][d] = v;
            out[1][d] = d1;
            out[2][d] = d2;
        }
        (
            Vec3::from(out[0]),
            Vec3::from(out[1]),
            Vec3::from(out[2]),
        )
    }

    fn arclength(&self, u: f64) -> f64 {
        let i = ((u * TABLE as f64).floor() as usize).min(TABLE - 1);
        let a = i as f64 / TABLE as f64;
        self.table[i] + self.rule.integrate(a, u, |v| self.derivatives(v).1.norm())
    }

    fn parameter_at(&self, s: f64) -> f64 {
        let target = s.clamp(0.0, 1.0) * self.length;
        let i = self.table.partition_point(|&l| l <= target).clamp(1, TABLE) - 1;
        let (l0, l1) = (self.table[i], self.table[i + 1]);
        let mut u = (i as f64 + (target - l0) / (l1 - l0)) / TABLE as f64;
        for _ in 0..8 {
            let speed = self.derivatives(u).1.norm();
            let du = (self.arclength(u) - target) / speed;
            u -= du;
            if du.abs() < 1e-15 {
                break;
            }
        }
        u
    }

    fn eval_arclength(&self, s: f64) -> (Vec3, Vec3, Vec3) {
        let u = self.parameter_at(s);
        let (p, dp, ddp) = self.derivatives(u);
        let speed = dp.norm();
        let t = dp / speed;
        let curvature = (ddp - t * ddp.dot(&t)) * (self.length / (speed * speed));
        (p / self.length, t, curvature)
    }
}
