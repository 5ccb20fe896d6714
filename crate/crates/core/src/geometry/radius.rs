//! Radius shape functions `a(s)` on `[0, 1]`.

use super::spline::CubicSpline;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
enum Shape {
    /// `a(s) = sqrt(1 - s^2)`.
    Spheroidal,
    /// Tabulated samples; the ratio `a(s) / sqrt(1 - s^2)` is splined so the
    /// spheroidal tip behaviour is kept exactly.
    Tabulated { ratio: CubicSpline },
    /// `a(s) = start + (end - start) s`. Not admissible near the tip; used for
    /// constant-slope checks.
    Linear { start: f64, end: f64 },
}

/// Radius profile together with the lower-bound parameters `a0` and `delta`.
#[derive(Debug, Clone)]
pub struct RadiusProfile {
    shape: Shape,
    /// Lower bound of `a` on `[0, 1 - delta]`.
    pub a0: f64,
    /// Width of the tip region.
    pub delta: f64,
}

impl RadiusProfile {
    pub fn spheroidal() -> Self {
        // sqrt(1 - s^2) >= a0 on [0, 1 - delta]
        let delta: f64 = 0.1;
        let s = 1.0 - delta;
        Self {
            shape: Shape::Spheroidal,
            a0: (1.0 - s * s).sqrt(),
            delta,
        }
    }

    /// Tabulated profile from `(s, a)` samples with `s < 1` strictly increasing.
    pub fn tabulated(s: &[f64], a: &[f64], a0: f64, delta: f64) -> Result<Self> {
        if s.len() != a.len() || s.len() < 2 {
            return Err(Error::Validation(
                "tabulated radius needs matching s/a samples (at least two)".into(),
            ));
        }
        if s.iter().any(|&x| !(0.0..1.0).contains(&x)) {
            return Err(Error::Validation("tabulated radius samples must satisfy 0 <= s < 1".into()));
        }
        let ratio: Vec<f64> = s
            .iter()
            .zip(a)
            .map(|(&si, &ai)| ai / (1.0 - si * si).sqrt())
            .collect();
        Ok(Self {
            shape: Shape::Tabulated {
                ratio: CubicSpline::natural(s.to_vec(), ratio)?,
            },
            a0,
            delta,
        })
    }

    pub fn linear(start: f64, end: f64) -> Self {
        Self {
            shape: Shape::Linear { start, end },
            a0: start.min(end),
            delta: 0.1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.shape {
            Shape::Spheroidal => "spheroidal",
            Shape::Tabulated { .. } => "tabulated",
            Shape::Linear { .. } => "linear",
        }
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s).0
    }

    pub fn slope(&self, s: f64) -> f64 {
        self.eval(s).1
    }

    /// `(a, a a', a^3 a'')`, finite up to and including a spheroidal tip.
    pub fn weighted(&self, s: f64) -> (f64, f64, f64) {
        match &self.shape {
            Shape::Spheroidal => {
                let w2 = (1.0 - s * s).max(0.0);
                (w2.sqrt(), -s, -1.0)
            }
            Shape::Tabulated { ratio } => {
                let (g, g1, g2) = ratio.eval(s);
                let w2 = (1.0 - s * s).max(0.0);
                let w = w2.sqrt();
                // w w' = -s, w^3 w'' = -1
                let a_da = g * g1 * w2 - g * g * s;
                let a3_dda = g.powi(3) * (g2 * w2 * w2 - 2.0 * g1 * s * w2 - g);
                (g * w, a_da, a3_dda)
            }
            Shape::Linear { .. } => {
                let (a, da, dda) = self.eval(s);
                (a, a * da, a.powi(3) * dda)
            }
        }
    }

    /// `(a, a', a'')`. Derivatives are infinite at `s = 1` for spheroidal tips.
    pub fn eval(&self, s: f64) -> (f64, f64, f64) {
        match &self.shape {
            Shape::Spheroidal => spheroid(s),
            Shape::Tabulated { ratio } => {
                let (g, g1, g2) = ratio.eval(s);
                let (w, w1, w2) = spheroid(s);
                if w == 0.0 {
                    return (0.0, g * w1, g * w2);
                }
                (g * w, g1 * w + g * w1, g2 * w + 2.0 * g1 * w1 + g * w2)
            }
            Shape::Linear { start, end } => (start + (end - start) * s, end - start, 0.0),
        }
    }
}

fn spheroid(s: f64) -> (f64, f64, f64) {
    let w2 = (1.0 - s * s).max(0.0);
    let w = w2.sqrt();
    (w, -s / w, -1.0 / (w2 * w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spheroidal_derivatives_match_finite_differences() {
        let r = RadiusProfile::spheroidal();
        let (s, h) = (0.6, 1e-5);
        let (a, da, dda) = r.eval(s);
        assert!((a - 0.8).abs() < 1e-15);
        assert!((da + 0.75).abs() < 1e-14);
        let fd = (r.slope(s + h) - r.slope(s - h)) / (2.0 * h);
        assert!((fd - dda).abs() < 1e-6);
        assert_eq!(r.value(1.0), 0.0);
    }

    #[test]
    fn tabulated_spheroid_is_reproduced() {
        let s: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let a: Vec<f64> = s.iter().map(|x| (1.0 - x * x).sqrt()).collect();
        let r = RadiusProfile::tabulated(&s, &a, 0.4, 0.1).unwrap();
        for x in [0.0, 0.33, 0.97, 0.999] {
            let (a_t, da_t, _) = r.eval(x);
            let (a_s, da_s, _) = spheroid(x);
            assert!((a_t - a_s).abs() < 1e-13);
            assert!((da_t - da_s).abs() < 1e-10);
        }
        assert_eq!(r.value(1.0), 0.0);
    }

    #[test]
    fn weighted_derivatives_are_finite_at_the_tip() {
        let s: Vec<f64> = (0..10).map(|i| i as f64 / 10.0).collect();
        let a: Vec<f64> = s.iter().map(|x| 0.9 * (1.0 - x * x).sqrt()).collect();
        let tab = RadiusProfile::tabulated(&s, &a, 0.4, 0.1).unwrap();
        for r in [RadiusProfile::spheroidal(), tab] {
            let (a1, ada, a3dda) = r.weighted(1.0);
            assert_eq!(a1, 0.0);
            assert!(ada.is_finite() && a3dda.is_finite());
            let x = 0.7;
            let (a, da, dda) = r.eval(x);
            let (_, w1, w2) = r.weighted(x);
            assert!((w1 - a * da).abs() < 1e-12);
            assert!((w2 - a.powi(3) * dda).abs() < 1e-12);
        }
    }

    #[test]
    fn tabulated_rejects_samples_at_the_tip() {
        assert!(RadiusProfile::tabulated(&[0.0, 1.0], &[1.0, 0.0], 0.5, 0.1).is_err());
    }
}
