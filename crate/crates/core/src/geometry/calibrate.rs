//! Closed-form planar calibration from board-to-image homographies.

use nalgebra::{DMatrix, Matrix3, SVector, Vector3};

use super::{CheckerboardSpec, PinholeDevice};
use crate::error::{Error, Result};

/// Board-plane point to image-pixel correspondences for one board pose.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarView {
    pub correspondences: Vec<((f64, f64), (f64, f64))>,
}

#[derive(Debug, Clone)]
pub struct Calibration {
    /// Intrinsics plus the pose of the first view's board frame.
    pub device: PinholeDevice,
    /// World-to-device `(R, t)` per view, each relative to that view's board.
    pub extrinsics: Vec<(Matrix3<f64>, Vector3<f64>)>,
    pub rms_reprojection: f64,
}

/// Similarity transform that centers points and scales their mean distance to sqrt(2).
fn normalizer(points: &[(f64, f64)]) -> Matrix3<f64> {
    let n = points.len() as f64;
    let (mx, my) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x / n, b + y / n));
    let mean_dist = points
        .iter()
        .map(|(x, y)| ((x - mx).powi(2) + (y - my).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    let s = if mean_dist > 0.0 {
        std::f64::consts::SQRT_2 / mean_dist
    } else {
        1.0
    };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

fn apply(h: &Matrix3<f64>, p: (f64, f64)) -> (f64, f64) {
    let q = h * Vector3::new(p.0, p.1, 1.0);
    (q.x / q.z, q.y / q.z)
}

/// Index of the smallest singular value (nalgebra does not sort them).
fn argmin(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

/// Normalized DLT homography mapping `src` onto `dst`.
pub fn estimate_homography(pairs: &[((f64, f64), (f64, f64))]) -> Result<Matrix3<f64>> {
    if pairs.len() < 4 {
        return Err(Error::InsufficientViews {
            needed: 4,
            got: pairs.len(),
        });
    }
    let src: Vec<_> = pairs.iter().map(|p| p.0).collect();
    let dst: Vec<_> = pairs.iter().map(|p| p.1).collect();
    let ns = normalizer(&src);
    let nd = normalizer(&dst);

    let rows = (2 * pairs.len()).max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (k, (s, d)) in src.iter().zip(&dst).enumerate() {
        let (x, y) = apply(&ns, *s);
        let (u, v) = apply(&nd, *d);
        let r = 2 * k;
        a.row_mut(r)
            .copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1)
            .copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateViews("homography SVD failed"))?;
    let sv = svd.singular_values.as_slice();
    let i = argmin(sv);
    let mut sorted = sv.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[1] <= 1e-12 * sorted[sorted.len() - 1] {
        return Err(Error::DegenerateViews("collinear board points"));
    }
    let h = v_t.row(i);
    let hn = Matrix3::new(h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8]);
    let nd_inv = nd.try_inverse().ok_or(Error::DegenerateViews("singular normalizer"))?;
    let h = nd_inv * hn * ns;
    Ok(h / h[(2, 2)])
}

fn v_ij(h: &Matrix3<f64>, i: usize, j: usize) -> SVector<f64, 6> {
    let hi = h.column(i);
    let hj = h.column(j);
    SVector::<f64, 6>::from_row_slice(&[
        hi[0] * hj[0],
        hi[0] * hj[1] + hi[1] * hj[0],
        hi[1] * hj[1],
        hi[2] * hj[0] + hi[0] * hj[2],
        hi[2] * hj[1] + hi[1] * hj[2],
        hi[2] * hj[2],
    ])
}

/// Homography-based planar calibration: closed-form intrinsics from the
/// orthonormality constraints of each view, then per-view extrinsics.
pub fn calibrate_planar(
    views: &[PlanarView],
    spec: &CheckerboardSpec,
    image_size: (usize, usize),
) -> Result<Calibration> {
    spec.validate()?;
    if views.len() < 3 {
        return Err(Error::InsufficientViews {
            needed: 3,
            got: views.len(),
        });
    }
    let homographies = views
        .iter()
        .map(|v| estimate_homography(&v.correspondences))
        .collect::<Result<Vec<_>>>()?;

    let m = homographies.len();
    let mut vm = DMatrix::<f64>::zeros((2 * m).max(6), 6);
    for (k, h) in homographies.iter().enumerate() {
        let h = h / h.norm();
        let v12 = v_ij(&h, 0, 1);
        let d = v_ij(&h, 0, 0) - v_ij(&h, 1, 1);
        vm.row_mut(2 * k).copy_from(&v12.transpose());
        vm.row_mut(2 * k + 1).copy_from(&d.transpose());
    }
    let svd = vm.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateViews("intrinsics SVD failed"))?;
    let sv = svd.singular_values.as_slice();
    let mut sorted = sv.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[1] <= 1e-9 * sorted[sorted.len() - 1] {
        return Err(Error::DegenerateViews("board poses do not constrain the intrinsics"));
    }
    let b = v_t.row(argmin(sv));
    let (b11, b12, b22, b13, b23, b33) = (b[0], b[1], b[2], b[3], b[4], b[5]);

    let denom = b11 * b22 - b12 * b12;
    if denom.abs() <= 1e-15 * (b11 * b11 + b22 * b22) {
        return Err(Error::DegenerateViews("singular image of the absolute conic"));
    }
    let v0 = (b12 * b13 - b11 * b23) / denom;
    let lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
    let (fx2, fy2) = (lambda / b11, lambda * b11 / denom);
    if !(fx2 > 0.0 && fy2 > 0.0) {
        return Err(Error::DegenerateViews("image of the absolute conic is not positive definite"));
    }
    let fx = fx2.sqrt();
    let fy = fy2.sqrt();
    let skew = -b12 * fx * fx * fy / lambda;
    let u0 = skew * v0 / fy - b13 * fx * fx / lambda;

    let k = Matrix3::new(fx, 0.0, u0, 0.0, fy, v0, 0.0, 0.0, 1.0);
    let k_inv = k.try_inverse().ok_or(Error::DegenerateViews("singular intrinsics"))?;

    let extrinsics: Vec<_> = homographies
        .iter()
        .map(|h| {
            let mut scale = 1.0 / (k_inv * h.column(0)).norm();
            if (k_inv * h.column(2)).z * scale < 0.0 {
                scale = -scale;
            }
            let r1 = k_inv * h.column(0) * scale;
            let r2 = k_inv * h.column(1) * scale;
            let r3 = r1.cross(&r2);
            let t = k_inv * h.column(2) * scale;
            let q = Matrix3::from_columns(&[r1, r2, r3]);
            let svd = q.svd(true, true);
            let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
            let mut r = u * vt;
            if r.determinant() < 0.0 {
                r = -r;
            }
            (r, t)
        })
        .collect();

    let (r0, t0) = extrinsics[0];
    let device = PinholeDevice::new(image_size.0, image_size.1, fx, fy, u0, v0, r0, t0)?;

    let mut sq = 0.0;
    let mut count = 0usize;
    for (view, (r, t)) in views.iter().zip(&extrinsics) {
        for ((bx, by), (u, v)) in &view.correspondences {
            let q = r * Vector3::new(*bx, *by, 0.0) + t;
            let pu = fx * q.x / q.z + u0;
            let pv = fy * q.y / q.z + v0;
            sq += (pu - u).powi(2) + (pv - v).powi(2);
            count += 1;
        }
    }

    Ok(Calibration {
        device,
        extrinsics,
        rms_reprojection: (sq / count.max(1) as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{board_corners_world, look_at, BoardPose};
    use crate::types::Point3;

    fn truth() -> PinholeDevice {
        PinholeDevice::new(64, 64, 70.0, 72.0, 31.0, 33.0, Matrix3::identity(), Vector3::zeros())
            .unwrap()
    }

    fn view(device: &PinholeDevice, spec: &CheckerboardSpec, pose: &BoardPose) -> PlanarView {
        let correspondences = board_corners_world(spec, pose)
            .into_iter()
            .map(|(b, w)| (b, device.project(&w).unwrap()))
            .collect();
        PlanarView { correspondences }
    }

    fn pose(tilt_x: f64, tilt_y: f64, dist: f64) -> BoardPose {
        let eye = Point3::new(tilt_y.sin() * dist, tilt_x.sin() * dist, -dist);
        // rotation whose rows are the board axes in world coordinates
        let r = look_at(&eye, &Point3::origin(), &Vector3::y()).unwrap();
        BoardPose {
            origin: Point3::new(-0.45, -0.3, 4.0),
            axis_u: r.row(0).transpose(),
            axis_v: r.row(1).transpose(),
        }
    }

    #[test]
    fn noiseless_views_recover_intrinsics() {
        let spec = CheckerboardSpec::new(6, 8, 0.1).unwrap();
        let d = truth();
        let views: Vec<_> = [(0.2, 0.0), (-0.2, 0.1), (0.1, 0.3), (0.0, -0.3), (0.25, 0.25)]
            .iter()
            .map(|(a, b)| view(&d, &spec, &pose(*a, *b, 4.0)))
            .collect();
        let cal = calibrate_planar(&views, &spec, (64, 64)).unwrap();
        let rel = |a: f64, b: f64| (a - b).abs() / b;
        assert!(rel(cal.device.fx, 70.0) < 1e-3, "{}", cal.device.fx);
        assert!(rel(cal.device.fy, 72.0) < 1e-3);
        assert!(rel(cal.device.cx, 31.0) < 1e-3);
        assert!(rel(cal.device.cy, 33.0) < 1e-3);
        assert!(cal.rms_reprojection < 1e-6);
    }

    #[test]
    fn two_views_are_insufficient() {
        let spec = CheckerboardSpec::new(6, 8, 0.1).unwrap();
        let d = truth();
        let views = vec![view(&d, &spec, &pose(0.2, 0.0, 4.0)); 2];
        assert!(matches!(
            calibrate_planar(&views, &spec, (64, 64)),
            Err(Error::InsufficientViews { .. })
        ));
    }

    #[test]
    fn identical_poses_are_degenerate() {
        let spec = CheckerboardSpec::new(6, 8, 0.1).unwrap();
        let d = truth();
        let views = vec![view(&d, &spec, &pose(0.2, 0.1, 4.0)); 5];
        assert!(matches!(
            calibrate_planar(&views, &spec, (64, 64)),
            Err(Error::DegenerateViews(_))
        ));
    }

    #[test]
    fn homography_maps_correspondences() {
        let pairs: Vec<_> = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0), (0.5, 0.3)]
            .iter()
            .map(|&(x, y)| {
                let w = 0.1 * x - 0.05 * y + 1.0;
                ((x, y), ((2.0 * x + 0.3 * y + 5.0) / w, (-0.4 * x + 1.5 * y + 2.0) / w))
            })
            .collect();
        let h = estimate_homography(&pairs).unwrap();
        for (s, d) in &pairs {
            let q = apply(&h, *s);
            assert!((q.0 - d.0).abs() < 1e-9 && (q.1 - d.1).abs() < 1e-9);
        }
    }
}
