//! Checkerboard targets: analytic corner layout, rendering into a device, and
//! corner localization in (possibly dual-photographed) images.

use nalgebra::Vector3;

use super::PinholeDevice;
use crate::error::{Error, Result};
use crate::transport::{dual_photograph, TransportMatrix};
use crate::types::{LightFieldVector, Point3};

const WHITE: f64 = 0.9;
const BLACK: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckerboardSpec {
    /// Inner-corner rows.
    pub rows: usize,
    /// Inner-corner columns.
    pub cols: usize,
    pub square_size: f64,
}

impl CheckerboardSpec {
    pub fn new(rows: usize, cols: usize, square_size: f64) -> Result<Self> {
        let spec = CheckerboardSpec {
            rows,
            cols,
            square_size,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows < 2 || self.cols < 2 {
            return Err(Error::validation("spec", "need at least 2x2 inner corners"));
        }
        if !(self.square_size > 0.0 && self.square_size.is_finite()) {
            return Err(Error::validation("square_size", "must be positive"));
        }
        Ok(())
    }

    /// Board-plane coordinates of every inner corner, row-major.
    pub fn corners(&self) -> Vec<(f64, f64)> {
        let s = self.square_size;
        (0..self.rows)
            .flat_map(|r| (0..self.cols).map(move |c| ((c + 1) as f64 * s, (r + 1) as f64 * s)))
            .collect()
    }

    /// Albedo of the printed board at board-plane coordinates; white margin outside.
    pub fn albedo(&self, bx: f64, by: f64) -> f64 {
        let s = self.square_size;
        let w = (self.cols + 1) as f64 * s;
        let h = (self.rows + 1) as f64 * s;
        if !(0.0..w).contains(&bx) || !(0.0..h).contains(&by) {
            return WHITE;
        }
        let k = (bx / s).floor() as i64 + (by / s).floor() as i64;
        if k % 2 == 0 {
            WHITE
        } else {
            BLACK
        }
    }
}

/// Board placement: world position of board coordinate (0, 0) and the world
/// directions of the board's u and v axes (orthonormal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoardPose {
    pub origin: Point3,
    pub axis_u: Vector3<f64>,
    pub axis_v: Vector3<f64>,
}

impl BoardPose {
    pub fn to_world(&self, bx: f64, by: f64) -> Point3 {
        self.origin + self.axis_u * bx + self.axis_v * by
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.axis_u.cross(&self.axis_v)
    }

    /// Board coordinates where a ray hits the board plane.
    fn intersect(&self, origin: &Point3, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let n = self.normal();
        let denom = n.dot(dir);
        if denom.abs() < 1e-12 {
            return None;
        }
        let t = n.dot(&(self.origin - origin)) / denom;
        if t <= 0.0 {
            return None;
        }
        let d = origin + dir * t - self.origin;
        Some((d.dot(&self.axis_u), d.dot(&self.axis_v)))
    }

    /// Board plane as a height field `z = a x + b y + c`, when not edge-on.
    pub fn plane_coefficients(&self) -> Option<(f64, f64, f64)> {
        let n = self.normal();
        if n.z.abs() < 1e-9 {
            return None;
        }
        let a = -n.x / n.z;
        let b = -n.y / n.z;
        let c = self.origin.z - a * self.origin.x - b * self.origin.y;
        Some((a, b, c))
    }
}

/// Inner corners as (board coordinates, world point) pairs.
pub fn board_corners_world(spec: &CheckerboardSpec, pose: &BoardPose) -> Vec<((f64, f64), Point3)> {
    spec.corners()
        .into_iter()
        .map(|b| (b, pose.to_world(b.0, b.1)))
        .collect()
}

/// Camera image of the board, each pixel the albedo averaged over
/// `supersample x supersample` sub-pixel rays.
pub fn render_board_image(
    device: &PinholeDevice,
    spec: &CheckerboardSpec,
    pose: &BoardPose,
    supersample: usize,
) -> LightFieldVector {
    let n = supersample.max(1);
    let center = device.center();
    let mut values = Vec::with_capacity(device.pixel_count());
    for v in 0..device.height {
        for u in 0..device.width {
            let mut acc = 0.0;
            for sy in 0..n {
                for sx in 0..n {
                    let pu = u as f64 - 0.5 + (sx as f64 + 0.5) / n as f64;
                    let pv = v as f64 - 0.5 + (sy as f64 + 0.5) / n as f64;
                    let dir = device.ray_direction((pu, pv));
                    acc += pose
                        .intersect(&center, dir.as_vector())
                        .map(|(bx, by)| spec.albedo(bx, by))
                        .unwrap_or(0.0);
                }
            }
            values.push(acc / (n * n) as f64);
        }
    }
    LightFieldVector::from_raw(values)
}

/// Projector-viewpoint images of camera-captured boards, by dual photography.
pub fn synthesize_projector_views(
    t: &TransportMatrix,
    camera_images_of_board: &[LightFieldVector],
) -> Result<Vec<LightFieldVector>> {
    camera_images_of_board
        .iter()
        .map(|img| dual_photograph(t, img))
        .collect()
}

fn bilinear(img: &[f64], width: usize, height: usize, x: f64, y: f64) -> Option<f64> {
    if !(x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64) {
        return None;
    }
    let i = (x.floor() as usize).min(width - 2);
    let j = (y.floor() as usize).min(height - 2);
    let (s, r) = (x - i as f64, y - j as f64);
    let at = |a: usize, b: usize| img[b * width + a];
    Some(
        at(i, j) * (1.0 - s) * (1.0 - r)
            + at(i + 1, j) * s * (1.0 - r)
            + at(i, j + 1) * (1.0 - s) * r
            + at(i + 1, j + 1) * s * r,
    )
}

/// Point-symmetry residual of the image around `c`; an X-junction is
/// symmetric under a half turn about its center.
fn symmetry_cost(img: &[f64], width: usize, height: usize, c: (f64, f64), radius: f64) -> f64 {
    let steps = (radius * 2.0).round() as i32;
    let mut cost = 0.0;
    for j in -steps..=steps {
        for i in 0..=steps {
            if i == 0 && j <= 0 {
                continue;
            }
            let (dx, dy) = (i as f64 * 0.5, j as f64 * 0.5);
            if dx * dx + dy * dy > radius * radius {
                continue;
            }
            let a = bilinear(img, width, height, c.0 + dx, c.1 + dy);
            let b = bilinear(img, width, height, c.0 - dx, c.1 - dy);
            match (a, b) {
                (Some(a), Some(b)) => cost += (a - b) * (a - b),
                _ => return f64::INFINITY,
            }
        }
    }
    cost
}

/// Dark/bright alternations on a circle around `c`; an X-junction gives four.
fn ring_changes(
    img: &[f64],
    width: usize,
    height: usize,
    c: (f64, f64),
    threshold: f64,
    margin: f64,
) -> Option<usize> {
    const RING: usize = 16;
    let radius = 2.5;
    let mut signs = Vec::with_capacity(RING);
    for k in 0..RING {
        let a = k as f64 * std::f64::consts::TAU / RING as f64;
        let x = bilinear(img, width, height, c.0 + radius * a.cos(), c.1 + radius * a.sin())?;
        if x <= 0.0 {
            return None;
        }
        if (x - threshold).abs() > margin {
            signs.push(x > threshold);
        }
    }
    if signs.len() < RING / 2 {
        return None;
    }
    Some(
        (0..signs.len())
            .filter(|&k| signs[k] != signs[(k + 1) % signs.len()])
            .count(),
    )
}

/// Subpixel checkerboard corners in a row-major image.
///
/// Pixels equal to zero are treated as outside the imaged area. Corners are
/// found as alternating 2x2 patterns of the binarized image, then refined to
/// the center of point symmetry.
pub fn locate_checkerboard_corners(image: &[f64], width: usize, height: usize) -> Vec<(f64, f64)> {
    if width < 2 || height < 2 || image.len() != width * height {
        return Vec::new();
    }
    let (lo, hi) = image
        .iter()
        .filter(|v| **v > 0.0)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if !(hi > lo) {
        return Vec::new();
    }
    let threshold = 0.5 * (lo + hi);
    let margin = 0.1 * (hi - lo);
    let mut candidates: Vec<(f64, f64)> = Vec::new();
    for v in 0..height {
        for u in 0..width {
            let c = (u as f64, v as f64);
            if image[v * width + u] > 0.0 && ring_changes(image, width, height, c, threshold, margin) == Some(4) {
                candidates.push(c);
            }
        }
    }

    // greedy clustering of neighboring candidates
    let mut clusters: Vec<(f64, f64, usize)> = Vec::new();
    for c in candidates {
        match clusters
            .iter_mut()
            .find(|k| (k.0 / k.2 as f64 - c.0).hypot(k.1 / k.2 as f64 - c.1) < 3.0)
        {
            Some(k) => {
                k.0 += c.0;
                k.1 += c.1;
                k.2 += 1;
            }
            None => clusters.push((c.0, c.1, 1)),
        }
    }

    let refined: Vec<(f64, f64)> = clusters
        .into_iter()
        .filter_map(|(sx, sy, n)| {
            let mut c = (sx / n as f64, sy / n as f64);
            let radius = 2.5;
            let mut best = symmetry_cost(image, width, height, c, radius);
            if !best.is_finite() {
                return None;
            }
            let mut step = 0.5;
            while step > 1e-3 {
                let mut improved = false;
                for (dx, dy) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                    let trial = (c.0 + dx, c.1 + dy);
                    let cost = symmetry_cost(image, width, height, trial, radius);
                    if cost < best {
                        best = cost;
                        c = trial;
                        improved = true;
                    }
                }
                if !improved {
                    step *= 0.5;
                }
            }
            Some(c)
        })
        .collect();
    let mut corners: Vec<(f64, f64)> = Vec::new();
    for c in refined {
        if ring_changes(image, width, height, c, threshold, margin) != Some(4) {
            continue;
        }
        if corners.iter().all(|k| (k.0 - c.0).hypot(k.1 - c.1) > 1.0) {
            corners.push(c);
        }
    }
    corners
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix3;

    #[test]
    fn spec_validation() {
        assert!(CheckerboardSpec::new(1, 5, 0.1).is_err());
        assert!(CheckerboardSpec::new(3, 5, 0.0).is_err());
        assert_eq!(CheckerboardSpec::new(2, 3, 1.0).unwrap().corners().len(), 6);
    }

    #[test]
    fn corners_found_in_rendered_camera_image() {
        let device =
            PinholeDevice::new(64, 64, 60.0, 60.0, 31.5, 31.5, Matrix3::identity(), Vector3::zeros())
                .unwrap();
        let spec = CheckerboardSpec::new(4, 5, 0.5).unwrap();
        let pose = BoardPose {
            origin: Point3::new(-1.45, -1.2, 5.0),
            axis_u: Vector3::new(0.96, 0.0, 0.28),
            axis_v: Vector3::y(),
        };
        let img = render_board_image(&device, &spec, &pose, 8);
        let found = locate_checkerboard_corners(img.values(), 64, 64);
        assert_eq!(found.len(), 20, "{found:?}");
        for (_, w) in board_corners_world(&spec, &pose) {
            let (u, v) = device.project(&w).unwrap();
            let nearest = found
                .iter()
                .map(|c| (c.0 - u).hypot(c.1 - v))
                .fold(f64::INFINITY, f64::min);
            assert!(nearest < 0.2, "corner error {nearest}");
        }
    }
}
