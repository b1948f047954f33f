use nalgebra::{Matrix3, Vector3};

use super::{PinholeDevice, Rig};
use crate::error::{Error, Result};

/// Rig rotated so that both image planes share rows along the baseline.
///
/// `rig` holds the rectified devices; `h_cam` and `h_proj` map raw pixel
/// coordinates of the original devices into the rectified images.
#[derive(Debug, Clone, PartialEq)]
pub struct RectifiedRig {
    pub rig: Rig,
    pub h_cam: Matrix3<f64>,
    pub h_proj: Matrix3<f64>,
    pub baseline: f64,
}

impl RectifiedRig {
    /// Whether the rectified frame coincides with the world frame, i.e. world
    /// x runs along the baseline and world y along image columns.
    pub fn is_canonical(&self) -> bool {
        let id = Matrix3::identity();
        (self.rig.camera.rotation - id).amax() <= 1e-9
            && (self.rig.projector.rotation - id).amax() <= 1e-9
    }

    /// Rectifies `rig` and insists that it was already in canonical form.
    pub fn canonical(rig: &Rig) -> Result<Self> {
        let r = rectify(rig)?;
        if !r.is_canonical() {
            return Err(Error::NotRectified(
                "device rotations must be identity with the baseline along +x",
            ));
        }
        if (r.h_cam - Matrix3::identity()).amax() > 1e-9
            || (r.h_proj - Matrix3::identity()).amax() > 1e-9
        {
            return Err(Error::NotRectified("devices must share fy and cy"));
        }
        Ok(r)
    }
}

/// Applies a homography to a pixel coordinate.
pub fn warp(h: &Matrix3<f64>, px: (f64, f64)) -> (f64, f64) {
    let q = h * Vector3::new(px.0, px.1, 1.0);
    (q.x / q.z, q.y / q.z)
}

/// Rotates both devices about their centers onto a common orientation whose x
/// axis is the baseline, then gives them a shared vertical focal length and
/// principal row.
pub fn rectify(rig: &Rig) -> Result<RectifiedRig> {
    let c1 = rig.camera.center();
    let c2 = rig.projector.center();
    let baseline = (c2 - c1).norm();
    if baseline < 1e-12 {
        return Err(Error::ZeroBaseline);
    }
    let e1 = (c2 - c1) / baseline;
    let axis = rig.camera.rotation.row(2).transpose() + rig.projector.rotation.row(2).transpose();
    let e2 = axis
        .cross(&e1)
        .try_normalize(1e-12)
        .ok_or(Error::NotRectified("optical axes parallel to the baseline"))?;
    let e3 = e1.cross(&e2);
    let r_new = Matrix3::from_rows(&[e1.transpose(), e2.transpose(), e3.transpose()]);

    let fy = 0.5 * (rig.camera.fy + rig.projector.fy);
    let cy = 0.5 * (rig.camera.cy + rig.projector.cy);

    let rect = |d: &PinholeDevice| -> Result<(PinholeDevice, Matrix3<f64>)> {
        let out = PinholeDevice::looking(
            d.width,
            d.height,
            (d.fx, fy),
            (d.cx, cy),
            r_new,
            d.center(),
        )?;
        let k_inv = d
            .intrinsic_matrix()
            .try_inverse()
            .ok_or(Error::validation("intrinsics", "singular"))?;
        let h = out.intrinsic_matrix() * r_new * d.rotation.transpose() * k_inv;
        Ok((out, h / h[(2, 2)]))
    };
    let (cam, h_cam) = rect(&rig.camera)?;
    let (proj, h_proj) = rect(&rig.projector)?;
    // preserve the exact original centers
    let cam = PinholeDevice {
        translation: -(r_new * c1.coords),
        ..cam
    };
    let proj = PinholeDevice {
        translation: -(r_new * c2.coords),
        ..proj
    };
    Ok(RectifiedRig {
        rig: Rig {
            camera: cam,
            projector: proj,
        },
        h_cam,
        h_proj,
        baseline,
    })
}
