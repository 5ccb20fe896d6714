//! Rotation-minimizing (Bishop) frame along the centerline.

use super::centerline::Centerline;
use crate::error::{Error, Result};
use crate::Vec3;

/// Orthonormal triad with the curvature coefficients at one arclength.
#[derive(Debug, Clone, Copy)]
pub struct Triad {
    pub tangent: Vec3,
    pub e1: Vec3,
    pub e2: Vec3,
    pub kappa1: f64,
    pub kappa2: f64,
}

/// Sampled Bishop frame: `e_t' = k1 e1 + k2 e2`, `e1' = -k1 e_t`, `e2' = -k2 e_t`.
#[derive(Debug, Clone)]
pub struct BishopFrame {
    s: Vec<f64>,
    e1: Vec<Vec3>,
    kappa1: Vec<f64>,
    kappa2: Vec<f64>,
    kappa_max: f64,
    centerline: Centerline,
}

/// Integrate the frame from `e1_initial` at `s = 0` with `n_samples` RK4 steps.
pub fn build_bishop_frame(
    centerline: &Centerline,
    n_samples: usize,
    e1_initial: Vec3,
) -> Result<BishopFrame> {
    if n_samples < 2 {
        return Err(Error::Validation("bishop frame needs at least two samples".into()));
    }
    let t0 = centerline.tangent(0.0);
    if (t0.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Validation(format!(
            "centerline tangent at s = 0 has length {}",
            t0.norm()
        )));
    }
    if (e1_initial.norm() - 1.0).abs() > 1e-10 {
        return Err(Error::Validation("initial frame vector must be a unit vector".into()));
    }
    if e1_initial.dot(&t0).abs() > 1e-10 {
        return Err(Error::Validation(
            "initial frame vector is not perpendicular to the tangent".into(),
        ));
    }
    let h = 1.0 / (n_samples - 1) as f64;
    let mut s = Vec::with_capacity(n_samples);
    let mut e1 = Vec::with_capacity(n_samples);
    let mut current = e1_initial;
    for i in 0..n_samples {
        let si = i as f64 * h;
        if i > 0 {
            current = rk4_step(centerline, si - h, h, current);
        }
        s.push(si);
        e1.push(current);
    }
    let mut kappa1 = Vec::with_capacity(n_samples);
    let mut kappa2 = Vec::with_capacity(n_samples);
    let mut kappa_max: f64 = 0.0;
    for (si, v) in s.iter().zip(&e1) {
        let (_, t, k) = centerline.eval(*si);
        let w = t.cross(v);
        kappa1.push(k.dot(v));
        kappa2.push(k.dot(&w));
        kappa_max = kappa_max.max(k.norm());
    }
    Ok(BishopFrame {
        s,
        e1,
        kappa1,
        kappa2,
        kappa_max,
        centerline: centerline.clone(),
    })
}

fn rk4_step(centerline: &Centerline, s: f64, h: f64, e1: Vec3) -> Vec3 {
    let rhs = |s: f64, e: Vec3| {
        let (_, t, k) = centerline.eval(s);
        -t * k.dot(&e)
    };
    let k1 = rhs(s, e1);
    let k2 = rhs(s + 0.5 * h, e1 + k1 * (0.5 * h));
    let k3 = rhs(s + 0.5 * h, e1 + k2 * (0.5 * h));
    let k4 = rhs(s + h, e1 + k3 * h);
    let next = e1 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    // re-orthonormalize against the exact tangent
    let t = centerline.tangent(s + h);
    (next - t * next.dot(&t)).normalize()
}

impl BishopFrame {
    pub fn samples(&self) -> &[f64] {
        &self.s
    }

    pub fn kappa1(&self) -> &[f64] {
        &self.kappa1
    }

    pub fn kappa2(&self) -> &[f64] {
        &self.kappa2
    }

    /// Maximum curvature `max |X_ss|` over the samples.
    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    pub fn centerline(&self) -> &Centerline {
        &self.centerline
    }

    /// Triad at the `i`-th sample.
    pub fn sample_triad(&self, i: usize) -> Triad {
        let t = self.centerline.tangent(self.s[i]);
        Triad {
            tangent: t,
            e1: self.e1[i],
            e2: t.cross(&self.e1[i]),
            kappa1: self.kappa1[i],
            kappa2: self.kappa2[i],
        }
    }

    /// Triad at arbitrary `s`, by one RK4 step from the nearest sample below.
    pub fn triad(&self, s: f64) -> Triad {
        let n = self.s.len();
        let h = self.s[1] - self.s[0];
        let i = ((s / h).floor().max(0.0) as usize).min(n - 1);
        let ds = s - self.s[i];
        let e1 = if ds.abs() < 1e-15 {
            self.e1[i]
        } else {
            rk4_step(&self.centerline, self.s[i], ds, self.e1[i])
        };
        let (_, t, k) = self.centerline.eval(s);
        let e2 = t.cross(&e1);
        Triad {
            tangent: t,
            e1,
            e2,
            kappa1: k.dot(&e1),
            kappa2: k.dot(&e2),
        }
    }

    /// Largest deviation of any sampled triad from orthonormality.
    pub fn orthonormality_residual(&self) -> f64 {
        (0..self.s.len())
            .map(|i| {
                let f = self.sample_triad(i);
                let vs = [f.tangent, f.e1, f.e2];
                let mut worst: f64 = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        let target = if a == b { 1.0 } else { 0.0 };
                        worst = worst.max((vs[a].dot(&vs[b]) - target).abs());
                    }
                }
                worst
            })
            .fold(0.0, f64::max)
    }

    /// Largest `|k1^2 + k2^2 - |X_ss|^2|` over the samples.
    pub fn curvature_identity_residual(&self) -> f64 {
        self.s
            .iter()
            .enumerate()
            .map(|(i, &s)| {
                let k = self.centerline.curvature_vector(s);
                (self.kappa1[i].powi(2) + self.kappa2[i].powi(2) - k.norm_squared()).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Largest residual of the frame equations, using centered differences of the sampled
    /// `e1` and `e2` against `-k1 e_t` and `-k2 e_t`.
    pub fn ode_residual(&self) -> f64 {
        let n = self.s.len();
        let h = self.s[1] - self.s[0];
        (1..n - 1)
            .map(|i| {
                let (prev, cur, next) =
                    (self.sample_triad(i - 1), self.sample_triad(i), self.sample_triad(i + 1));
                let d1 = (next.e1 - prev.e1) / (2.0 * h) + cur.tangent * cur.kappa1;
                let d2 = (next.e2 - prev.e2) / (2.0 * h) + cur.tangent * cur.kappa2;
                d1.norm().max(d2.norm())
            })
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_frame_is_constant() {
        let f = build_bishop_frame(&Centerline::straight(), 65, Vec3::x()).unwrap();
        for i in 0..65 {
            let t = f.sample_triad(i);
            assert_eq!(t.tangent, Vec3::z());
            assert_eq!(t.e1, Vec3::x());
            assert_eq!(t.e2, Vec3::y());
            assert_eq!(t.kappa1, 0.0);
            assert_eq!(t.kappa2, 0.0);
        }
        assert_eq!(f.kappa_max(), 0.0);
    }

    #[test]
    fn planar_arc_has_constant_in_plane_curvature() {
        let radius = 0.7;
        let f = build_bishop_frame(&Centerline::arc(radius).unwrap(), 129, Vec3::x()).unwrap();
        for i in 0..129 {
            assert!((f.kappa1()[i] - 1.0 / radius).abs() < 1e-12);
            assert!(f.kappa2()[i].abs() < 1e-12);
        }
        assert!((f.kappa_max() - 1.0 / radius).abs() < 1e-12);
        // analytic frame: e1 = (cos, 0, -sin)(s / R)
        let s = 0.537;
        let tri = f.triad(s);
        let phi = s / radius;
        assert!((tri.e1 - Vec3::new(phi.cos(), 0.0, -phi.sin())).norm() < 1e-12);
    }

    #[test]
    fn rejects_non_perpendicular_initial_vector() {
        let v = Vec3::new(1.0, 0.0, 1.0).normalize();
        assert!(build_bishop_frame(&Centerline::straight(), 10, v).is_err());
        assert!(build_bishop_frame(&Centerline::straight(), 10, Vec3::x() * 2.0).is_err());
    }

    #[test]
    fn helix_like_curve_frame_matches_dense_reference() {
        // twisted polynomial curve with e_z tangent at the base
        let c = Centerline::polynomial([
            vec![0.0, 0.0, 0.3, -0.1],
            vec![0.0, 0.0, 0.0, 0.25],
            vec![0.0, 1.0, 0.0, -0.05],
        ])
        .unwrap();
        let coarse = build_bishop_frame(&c, 101, Vec3::x()).unwrap();
        let fine = build_bishop_frame(&c, 1001, Vec3::x()).unwrap();
        assert!(coarse.orthonormality_residual() < 1e-9);
        assert!(coarse.curvature_identity_residual() < 1e-8);
        for i in 0..101 {
            let a = coarse.sample_triad(i);
            let b = fine.sample_triad(i * 10);
            assert!((a.e1 - b.e1).norm() < 1e-8, "frame drift at sample {i}");
        }
        assert!(coarse.ode_residual() < 1e-3);
    }
}
