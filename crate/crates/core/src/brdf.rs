//! Reciprocal BRDF models evaluated in a local tangent frame.

use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::types::Direction;

const FRAME_TOLERANCE: f64 = 1e-9;

/// Orthonormal right-handed frame `(tangent, bitangent, normal)` at a surface point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentFrame {
    normal: Direction,
    tangent: Direction,
    bitangent: Direction,
}

impl TangentFrame {
    pub fn new(normal: Direction, tangent: Direction, bitangent: Direction) -> Result<Self> {
        let (n, t, b) = (normal.as_vector(), tangent.as_vector(), bitangent.as_vector());
        let orthogonal = n.dot(t).abs() <= FRAME_TOLERANCE
            && n.dot(b).abs() <= FRAME_TOLERANCE
            && t.dot(b).abs() <= FRAME_TOLERANCE;
        if !orthogonal || (t.cross(b) - n).norm() > FRAME_TOLERANCE {
            return Err(Error::validation(
                "tangent frame",
                "axes must be orthonormal and right-handed",
            ));
        }
        Ok(TangentFrame {
            normal,
            tangent,
            bitangent,
        })
    }

    /// Builds a frame around `normal` whose tangent is the projection of the
    /// world direction `(cos angle, sin angle, 0)` onto the tangent plane.
    /// Falls back to the world y axis when that projection degenerates.
    pub fn from_normal(normal: Direction, angle: f64) -> Self {
        let n = *normal.as_vector();
        let mut reference = Vector3::new(angle.cos(), angle.sin(), 0.0);
        let mut t = reference - n * n.dot(&reference);
        if t.norm() < 1e-6 {
            reference = Vector3::new(-angle.sin(), angle.cos(), 0.0);
            t = reference - n * n.dot(&reference);
        }
        let t = t.normalize();
        let b = n.cross(&t);
        TangentFrame {
            normal,
            tangent: Direction::new_unchecked(t),
            bitangent: Direction::new_unchecked(b),
        }
    }

    pub fn normal(&self) -> Direction {
        self.normal
    }
    pub fn tangent(&self) -> Direction {
        self.tangent
    }
    pub fn bitangent(&self) -> Direction {
        self.bitangent
    }

    /// Coordinates of `w` in (tangent, bitangent, normal).
    fn local(&self, w: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            w.dot(self.tangent.as_vector()),
            w.dot(self.bitangent.as_vector()),
            w.dot(self.normal.as_vector()),
        )
    }
}

/// Rotates tangent and bitangent by `angle` radians about the normal.
pub fn rotate_about_normal(frame: &TangentFrame, angle: f64) -> TangentFrame {
    let (s, c) = angle.sin_cos();
    let t = frame.tangent.as_vector();
    let b = frame.bitangent.as_vector();
    let t2 = t * c + b * s;
    let b2 = b * c - t * s;
    // re-orthonormalize against accumulated rounding
    let n = frame.normal.as_vector();
    let t2 = (t2 - n * n.dot(&t2)).normalize();
    let b2 = (b2 - n * n.dot(&b2) - t2 * t2.dot(&b2)).normalize();
    TangentFrame {
        normal: frame.normal,
        tangent: Direction::new_unchecked(t2),
        bitangent: Direction::new_unchecked(b2),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BrdfModel {
    Lambertian {
        albedo: f64,
    },
    /// Normalized Blinn-Phong lobe over a Lambertian base.
    BlinnPhong {
        diffuse: f64,
        specular: f64,
        exponent: f64,
    },
    /// Ward's anisotropic Gaussian lobe over a Lambertian base.
    WardAnisotropic {
        diffuse: f64,
        specular: f64,
        alpha_x: f64,
        alpha_y: f64,
    },
}

impl BrdfModel {
    pub fn lambertian(albedo: f64) -> Result<Self> {
        BrdfModel::Lambertian { albedo }.validated()
    }

    pub fn blinn_phong(diffuse: f64, specular: f64, exponent: f64) -> Result<Self> {
        BrdfModel::BlinnPhong {
            diffuse,
            specular,
            exponent,
        }
        .validated()
    }

    pub fn ward(diffuse: f64, specular: f64, alpha_x: f64, alpha_y: f64) -> Result<Self> {
        BrdfModel::WardAnisotropic {
            diffuse,
            specular,
            alpha_x,
            alpha_y,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        fn check(key: &str, ok: bool, v: f64, range: &str) -> Result<()> {
            if ok && v.is_finite() {
                Ok(())
            } else {
                Err(Error::validation(key, format!("{v} outside {range}")))
            }
        }
        match self {
            BrdfModel::Lambertian { albedo } => {
                check("albedo", (0.0..=1.0).contains(&albedo), albedo, "[0, 1]")?
            }
            BrdfModel::BlinnPhong {
                diffuse,
                specular,
                exponent,
            } => {
                check("diffuse", diffuse >= 0.0, diffuse, "[0, inf)")?;
                check("specular", specular >= 0.0, specular, "[0, inf)")?;
                check("exponent", exponent >= 1.0, exponent, "[1, inf)")?;
            }
            BrdfModel::WardAnisotropic {
                diffuse,
                specular,
                alpha_x,
                alpha_y,
            } => {
                check("diffuse", diffuse >= 0.0, diffuse, "[0, inf)")?;
                check("specular", specular >= 0.0, specular, "[0, inf)")?;
                check("alpha_x", alpha_x > 0.0, alpha_x, "(0, inf)")?;
                check("alpha_y", alpha_y > 0.0, alpha_y, "(0, inf)")?;
            }
        }
        Ok(self)
    }

    pub fn is_isotropic(&self) -> bool {
        match self {
            BrdfModel::WardAnisotropic {
                alpha_x, alpha_y, ..
            } => alpha_x == alpha_y,
            _ => true,
        }
    }
}

/// Evaluates `f_r(omega_in, omega_out)`; both directions point away from the surface.
pub fn eval_brdf(
    model: &BrdfModel,
    frame: &TangentFrame,
    omega_in: &Direction,
    omega_out: &Direction,
) -> Result<f64> {
    let wi = frame.local(omega_in.as_vector());
    let wo = frame.local(omega_out.as_vector());
    if wi.z <= 0.0 || wo.z <= 0.0 {
        return Err(Error::BelowHorizon);
    }
    let value = match *model {
        BrdfModel::Lambertian { albedo } => albedo / PI,
        BrdfModel::BlinnPhong {
            diffuse,
            specular,
            exponent,
        } => {
            let h = (wi + wo).normalize();
            diffuse / PI + specular * (exponent + 2.0) / (8.0 * PI) * h.z.powf(exponent)
        }
        BrdfModel::WardAnisotropic {
            diffuse,
            specular,
            alpha_x,
            alpha_y,
        } => {
            let h = wi + wo;
            let tx = h.x / alpha_x;
            let ty = h.y / alpha_y;
            let exponent = -(tx * tx + ty * ty) / (h.z * h.z);
            let norm = 4.0 * PI * alpha_x * alpha_y * (wi.z * wo.z).sqrt();
            diffuse / PI + specular * exponent.exp() / norm
        }
    };
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dir(x: f64, y: f64, z: f64) -> Direction {
        Direction::new_normalize(Vector3::new(x, y, z)).unwrap()
    }

    fn up_frame() -> TangentFrame {
        TangentFrame::new(dir(0.0, 0.0, 1.0), dir(1.0, 0.0, 0.0), dir(0.0, 1.0, 0.0)).unwrap()
    }

    fn random_frame(rng: &mut ChaCha8Rng) -> TangentFrame {
        let n = random_unit(rng);
        TangentFrame::from_normal(n, rng.gen_range(0.0..2.0 * PI))
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> Direction {
        loop {
            let v = Vector3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            if v.norm() > 0.1 && v.norm() <= 1.0 {
                return Direction::new_normalize(v).unwrap();
            }
        }
    }

    fn random_above(rng: &mut ChaCha8Rng, frame: &TangentFrame) -> Direction {
        loop {
            let d = random_unit(rng);
            if d.dot(&frame.normal()) > 1e-3 {
                return d;
            }
        }
    }

    fn random_model(rng: &mut ChaCha8Rng, kind: usize) -> BrdfModel {
        match kind {
            0 => BrdfModel::lambertian(rng.gen_range(0.0..1.0)).unwrap(),
            1 => BrdfModel::blinn_phong(
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(1.0..200.0),
            )
            .unwrap(),
            _ => BrdfModel::ward(
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.05..0.8),
                rng.gen_range(0.05..0.8),
            )
            .unwrap(),
        }
    }

    #[test]
    fn lambertian_is_albedo_over_pi() {
        let m = BrdfModel::lambertian(0.5).unwrap();
        let f = eval_brdf(&m, &up_frame(), &dir(0.3, 0.1, 1.0), &dir(-0.5, 0.2, 0.4)).unwrap();
        assert!((f - 0.159_154_943_091_895_34).abs() < 1e-15);
    }

    #[test]
    fn ward_at_normal_incidence_matches_scalar_formula() {
        // d/pi + s/(4 pi ax ay), evaluated independently
        let m = BrdfModel::ward(0.2, 0.3, 0.1, 0.4).unwrap();
        let n = dir(0.0, 0.0, 1.0);
        let f = eval_brdf(&m, &up_frame(), &n, &n).unwrap();
        assert!((f - 0.660_493_013_831_365_6).abs() < 1e-12, "{f}");
    }

    #[test]
    fn below_horizon_is_an_error() {
        let m = BrdfModel::lambertian(0.5).unwrap();
        let r = eval_brdf(&m, &up_frame(), &dir(1.0, 0.0, 0.0), &dir(0.0, 0.0, 1.0));
        assert!(matches!(r, Err(Error::BelowHorizon)));
        let r = eval_brdf(&m, &up_frame(), &dir(0.0, 0.0, 1.0), &dir(0.0, 0.3, -1.0));
        assert!(matches!(r, Err(Error::BelowHorizon)));
    }

    #[test]
    fn parameter_ranges_are_enforced() {
        assert!(BrdfModel::lambertian(1.5).is_err());
        assert!(BrdfModel::blinn_phong(0.1, 0.1, 0.5).is_err());
        let e = BrdfModel::ward(0.2, 0.3, -1.0, 0.4).unwrap_err();
        assert!(e.to_string().contains("alpha_x"));
    }

    #[test]
    fn ward_swap_is_reciprocal() {
        let m = BrdfModel::ward(0.2, 0.3, 0.1, 0.4).unwrap();
        let (a, b) = (dir(0.2, 0.5, 1.0), dir(-0.4, 0.1, 0.7));
        let f_ab = eval_brdf(&m, &up_frame(), &a, &b).unwrap();
        let f_ba = eval_brdf(&m, &up_frame(), &b, &a).unwrap();
        assert!((f_ab - f_ba).abs() <= 1e-12 * f_ab.max(1.0));
    }

    #[test]
    fn reciprocity_holds_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for kind in 0..3 {
            for _ in 0..10_000 {
                let model = random_model(&mut rng, kind);
                let frame = random_frame(&mut rng);
                let a = random_above(&mut rng, &frame);
                let b = random_above(&mut rng, &frame);
                let f_ab = eval_brdf(&model, &frame, &a, &b).unwrap();
                let f_ba = eval_brdf(&model, &frame, &b, &a).unwrap();
                assert!(f_ab >= 0.0 && f_ab.is_finite());
                assert!((f_ab - f_ba).abs() <= 1e-12 * f_ab.max(1.0), "{model:?}");
            }
        }
    }

    #[test]
    fn rotate_about_normal_examples() {
        let f = up_frame();
        assert_eq!(rotate_about_normal(&f, 0.0), f);
        let full = rotate_about_normal(&f, 2.0 * PI);
        assert!((full.tangent().as_vector() - f.tangent().as_vector()).norm() < 1e-9);
        assert!((full.bitangent().as_vector() - f.bitangent().as_vector()).norm() < 1e-9);
        let q = rotate_about_normal(&f, PI / 2.0);
        assert!((q.tangent().as_vector() - f.bitangent().as_vector()).norm() < 1e-12);
        assert!((q.bitangent().as_vector() + f.tangent().as_vector()).norm() < 1e-12);
        assert_eq!(q.normal(), f.normal());
        // still a valid frame
        TangentFrame::new(q.normal(), q.tangent(), q.bitangent()).unwrap();
    }

    #[test]
    fn isotropic_models_ignore_frame_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in 0..2 {
            for _ in 0..2_000 {
                let model = random_model(&mut rng, kind);
                let frame = random_frame(&mut rng);
                let rotated = rotate_about_normal(&frame, rng.gen_range(-PI..PI));
                let a = random_above(&mut rng, &frame);
                let b = random_above(&mut rng, &frame);
                let f0 = eval_brdf(&model, &frame, &a, &b).unwrap();
                let f1 = eval_brdf(&model, &rotated, &a, &b).unwrap();
                assert!((f0 - f1).abs() <= 1e-12 * f0.max(1.0));
            }
        }
    }

    #[test]
    fn ward_anisotropy_witness_exists() {
        let m = BrdfModel::ward(0.2, 0.3, 0.1, 0.4).unwrap();
        let f = up_frame();
        let a = dir(0.3, 0.0, 1.0);
        let b = dir(-0.1, 0.0, 1.0);
        let f0 = eval_brdf(&m, &f, &a, &b).unwrap();
        let f1 = eval_brdf(&m, &rotate_about_normal(&f, PI / 2.0), &a, &b).unwrap();
        assert!((f0 - f1).abs() > 1e-3, "{f0} vs {f1}");
    }
}
