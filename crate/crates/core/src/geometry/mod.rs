//! Pinhole devices, camera-projector rigs and two-view geometry.

mod board;
mod calibrate;
mod rectify;

pub use board::{
    board_corners_world, locate_checkerboard_corners, render_board_image, synthesize_projector_views,
    BoardPose, CheckerboardSpec,
};
pub use calibrate::{calibrate_planar, estimate_homography, Calibration, PlanarView};
pub use rectify::{rectify, warp, RectifiedRig};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::types::{Direction, Point3};

/// Pinhole model shared by the camera and the projector (an inverse camera).
///
/// `rotation` maps world to device coordinates and `translation` is the world
/// origin expressed in the device frame, so `X_dev = R * X_world + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PinholeDevice {
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl PinholeDevice {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        width: usize,
        height: usize,
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let device = PinholeDevice {
            width,
            height,
            fx,
            fy,
            cx,
            cy,
            rotation,
            translation,
        };
        device.validate()?;
        Ok(device)
    }

    /// Device at world position `center` with the given world-to-device rotation.
    pub fn looking(
        width: usize,
        height: usize,
        (fx, fy): (f64, f64),
        (cx, cy): (f64, f64),
        rotation: Matrix3<f64>,
        center: Point3,
    ) -> Result<Self> {
        let translation = -(rotation * center.coords);
        Self::new(width, height, fx, fy, cx, cy, rotation, translation)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::validation("width/height", "device resolution must be nonzero"));
        }
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::validation("fx/fy", "focal lengths must be positive"));
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return Err(Error::validation("cx/cy", "principal point must be finite"));
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::validation("translation", "must be finite"));
        }
        let r = &self.rotation;
        let orthonormal = (r.transpose() * r - Matrix3::identity()).amax() <= 1e-9;
        if !orthonormal || (r.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::validation(
                "rotation",
                "must be orthonormal with determinant +1",
            ));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn intrinsic_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Optical center in world coordinates.
    pub fn center(&self) -> Point3 {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    pub fn to_device(&self, p: &Point3) -> Vector3<f64> {
        self.rotation * p.coords + self.translation
    }

    /// Pixel coordinates of a world point; pixel centers sit at integer coordinates.
    pub fn project(&self, p: &Point3) -> Result<(f64, f64)> {
        let q = self.to_device(p);
        if q.z <= 1e-12 {
            return Err(Error::BehindDevice);
        }
        Ok((self.fx * q.x / q.z + self.cx, self.fy * q.y / q.z + self.cy))
    }

    /// World point at device-frame depth `depth` along the ray through `pixel`.
    pub fn backproject(&self, pixel: (f64, f64), depth: f64) -> Result<Point3> {
        if !(depth > 0.0) {
            return Err(Error::NonpositiveDepth(depth));
        }
        let q = Vector3::new(
            (pixel.0 - self.cx) / self.fx * depth,
            (pixel.1 - self.cy) / self.fy * depth,
            depth,
        );
        Ok(Point3::from(self.rotation.transpose() * (q - self.translation)))
    }

    /// Unit world-space direction of the ray through `pixel`.
    pub fn ray_direction(&self, pixel: (f64, f64)) -> Direction {
        let d = Vector3::new((pixel.0 - self.cx) / self.fx, (pixel.1 - self.cy) / self.fy, 1.0);
        Direction::new_unchecked((self.rotation.transpose() * d).normalize())
    }

    /// Integer pixel whose footprint `[u-1/2, u+1/2) x [v-1/2, v+1/2)` holds the projection.
    pub fn pixel_of(&self, p: &Point3) -> Option<(usize, usize)> {
        let (u, v) = self.project(p).ok()?;
        pixel_containing(u, v, self.width, self.height)
    }
}

pub(crate) fn pixel_containing(u: f64, v: f64, width: usize, height: usize) -> Option<(usize, usize)> {
    let (pu, pv) = ((u + 0.5).floor(), (v + 0.5).floor());
    if pu >= 0.0 && pv >= 0.0 && (pu as usize) < width && (pv as usize) < height {
        Some((pu as usize, pv as usize))
    } else {
        None
    }
}

/// Calibrated camera-projector pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Rig {
    pub camera: PinholeDevice,
    pub projector: PinholeDevice,
}

impl Rig {
    pub fn new(camera: PinholeDevice, projector: PinholeDevice) -> Result<Self> {
        camera.validate()?;
        projector.validate()?;
        if (camera.center() - projector.center()).norm() < 1e-12 {
            return Err(Error::ZeroBaseline);
        }
        Ok(Rig { camera, projector })
    }

    /// The same rig with camera and projector roles exchanged.
    pub fn swapped(&self) -> Rig {
        Rig {
            camera: self.projector.clone(),
            projector: self.camera.clone(),
        }
    }

    pub fn baseline(&self) -> f64 {
        (self.camera.center() - self.projector.center()).norm()
    }
}

/// Midpoint of the common perpendicular between the camera ray through
/// `cam_px` and the projector ray through `proj_px`.
pub fn triangulate(rig: &Rig, cam_px: (f64, f64), proj_px: (f64, f64)) -> Result<Point3> {
    let o1 = rig.camera.center();
    let o2 = rig.projector.center();
    let d1 = *rig.camera.ray_direction(cam_px).as_vector();
    let d2 = *rig.projector.ray_direction(proj_px).as_vector();
    if d1.cross(&d2).norm() < 1e-9 {
        return Err(Error::ParallelRays);
    }
    // minimize |o1 + s d1 - (o2 + t d2)|^2
    let w = o1 - o2;
    let b = d1.dot(&d2);
    let d = d1.dot(&w);
    let e = d2.dot(&w);
    let denom = 1.0 - b * b;
    let s = (b * e - d) / denom;
    let t = (e - b * d) / denom;
    let p1 = o1 + d1 * s;
    let p2 = o2 + d2 * t;
    Ok(Point3::from((p1.coords + p2.coords) * 0.5))
}

/// Rotation (world to device) for a device at `eye` looking at `target`, with
/// image rows growing along the world direction closest to `down`.
pub fn look_at(eye: &Point3, target: &Point3, down: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let z = (target - eye).try_normalize(1e-12).ok_or(Error::CoincidentPoints)?;
    let x = down
        .cross(&z)
        .try_normalize(1e-12)
        .ok_or(Error::validation("look_at", "down vector parallel to view direction"))?;
    let y = z.cross(&x);
    Ok(Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]))
}
