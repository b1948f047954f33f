//! Height-field scenes: ray intersection, visibility and surface sampling.

use nalgebra::Vector3;

use crate::brdf::{BrdfModel, TangentFrame};
use crate::error::{Error, Result};
use crate::types::{Direction, HeightField, Point3, SurfaceNormal, SurfaceSample};

/// A height field `z(x, y)` viewed from the negative-z side, with one BRDF and
/// a tangent orientation angle shared by every surface point.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub surface: HeightField,
    pub brdf: BrdfModel,
    /// Azimuth (radians) of the tangent reference direction in the world xy plane.
    pub frame_angle: f64,
    /// Surface samples per grid cell along x and y used for transport integration.
    pub samples_per_cell: (usize, usize),
}

/// One integration sample on the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub point: Point3,
    pub normal: SurfaceNormal,
    /// Surface area represented by the sample.
    pub area: f64,
}

impl SurfacePoint {
    pub fn frame(&self, angle: f64) -> TangentFrame {
        TangentFrame::from_normal(self.normal.unit(), angle)
    }
}

impl Scene {
    pub fn new(surface: HeightField, brdf: BrdfModel) -> Result<Self> {
        Ok(Scene {
            surface,
            brdf: brdf.validated()?,
            frame_angle: 0.0,
            samples_per_cell: (4, 4),
        })
    }

    pub fn with_frame_angle(mut self, angle: f64) -> Self {
        self.frame_angle = angle;
        self
    }

    pub fn with_samples(mut self, sx: usize, sy: usize) -> Result<Self> {
        if sx == 0 || sy == 0 {
            return Err(Error::validation("samples", "must be at least 1 per cell"));
        }
        self.samples_per_cell = (sx, sy);
        Ok(self)
    }

    pub fn surface_at(&self, x: f64, y: f64) -> Option<SurfaceSample> {
        self.surface.sample(x, y)
    }

    pub fn frame_at(&self, normal: &SurfaceNormal) -> TangentFrame {
        TangentFrame::from_normal(normal.unit(), self.frame_angle)
    }

    /// First intersection of the ray `origin + t*dir` with the surface for
    /// `t` in `(t_min, t_max]`.
    pub fn intersect(
        &self,
        origin: &Point3,
        dir: &Vector3<f64>,
        t_min: f64,
        t_max: f64,
    ) -> Option<(f64, Point3)> {
        let h = &self.surface;
        if h.width() < 2 || h.height() < 2 {
            return None;
        }
        let (ox, oy) = h.origin();
        // grid coordinates
        let gx0 = (origin.x - ox) / h.dx();
        let gy0 = (origin.y - oy) / h.dy();
        let gdx = dir.x / h.dx();
        let gdy = dir.y / h.dy();
        let max_i = (h.width() - 1) as f64;
        let max_j = (h.height() - 1) as f64;

        let mut t0 = t_min;
        let mut t1 = t_max;
        // early out once the ray climbs above every surface point
        if dir.z < 0.0 {
            if let Some(zmin) = h.min_depth() {
                let t_top = (zmin - 1e-9 - origin.z) / dir.z;
                t1 = t1.min(t_top.max(t_min));
            }
        }
        for (g0, gd, hi) in [(gx0, gdx, max_i), (gy0, gdy, max_j)] {
            if gd.abs() < 1e-300 {
                if g0 < 0.0 || g0 > hi {
                    return None;
                }
            } else {
                let (a, b) = ((0.0 - g0) / gd, (hi - g0) / gd);
                t0 = t0.max(a.min(b));
                t1 = t1.min(a.max(b));
            }
        }
        if !(t0 <= t1) {
            return None;
        }

        let cell_of = |g: f64, hi: f64| -> usize { (g.floor().max(0.0).min(hi - 1.0)) as usize };
        let mut ci = cell_of(gx0 + gdx * t0, max_i);
        let mut cj = cell_of(gy0 + gdy * t0, max_j);
        let step_i: isize = if gdx > 0.0 { 1 } else { -1 };
        let step_j: isize = if gdy > 0.0 { 1 } else { -1 };
        let next_boundary = |c: usize, step: isize, g0: f64, gd: f64| -> f64 {
            if gd.abs() < 1e-300 {
                return f64::INFINITY;
            }
            let edge = if step > 0 { c as f64 + 1.0 } else { c as f64 };
            (edge - g0) / gd
        };

        let mut t_cur = t0;
        loop {
            let tx = next_boundary(ci, step_i, gx0, gdx);
            let ty = next_boundary(cj, step_j, gy0, gdy);
            let t_exit = tx.min(ty).min(t1);
            if h.cell_valid(ci, cj) {
                if let Some(t) = self.intersect_cell(ci, cj, origin, dir, t_cur, t_exit) {
                    return Some((t, origin + dir * t));
                }
            }
            if t_exit >= t1 {
                return None;
            }
            if tx <= ty {
                let n = ci as isize + step_i;
                if n < 0 || n as f64 > max_i - 1.0 {
                    return None;
                }
                ci = n as usize;
            } else {
                let n = cj as isize + step_j;
                if n < 0 || n as f64 > max_j - 1.0 {
                    return None;
                }
                cj = n as usize;
            }
            t_cur = t_exit;
        }
    }

    /// Ray against the bilinear patch of one cell, restricted to `[ta, tb]`.
    fn intersect_cell(
        &self,
        ci: usize,
        cj: usize,
        origin: &Point3,
        dir: &Vector3<f64>,
        ta: f64,
        tb: f64,
    ) -> Option<f64> {
        let h = &self.surface;
        let [z00, z10, z01, z11] = h.cell_corners(ci, cj);
        let (x0, y0) = h.node_position(ci, cj);
        let s0 = (origin.x - x0) / h.dx();
        let r0 = (origin.y - y0) / h.dy();
        let ds = dir.x / h.dx();
        let dr = dir.y / h.dy();
        let (a, b, c, d) = (z00, z10 - z00, z01 - z00, z00 - z10 - z01 + z11);
        // f(t) = height(t) - z(t); negative means inside the solid
        let qa = d * ds * dr;
        let qb = b * ds + c * dr + d * (s0 * dr + r0 * ds) - dir.z;
        let qc = a + b * s0 + c * r0 + d * s0 * r0 - origin.z;
        let f = |t: f64| (qa * t + qb) * t + qc;
        let scale = 1e-10 * (1.0 + qc.abs() + origin.z.abs());

        if f(ta) < -scale {
            return Some(ta);
        }
        let mut roots = [f64::NAN; 2];
        if qa.abs() < 1e-14 * (qb.abs() + qc.abs() + 1.0) {
            if qb.abs() > 0.0 {
                roots[0] = -qc / qb;
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                let q = -0.5 * (qb + qb.signum() * sq);
                roots = [q / qa, if q != 0.0 { qc / q } else { f64::NAN }];
                if roots[0] > roots[1] {
                    roots.swap(0, 1);
                }
            }
        }
        // roots exactly on a cell boundary may round to either side of it
        let tol = 1e-10 * tb.abs().max(1.0);
        roots
            .into_iter()
            .filter(|r| r.is_finite() && *r >= ta - tol && *r <= tb + tol && *r > 0.0)
            .find(|r| 2.0 * qa * r + qb < 0.0)
            .map(|r| r.clamp(ta, tb))
    }

    /// Whether the straight segment from surface point `p` to `target` is free of occluders.
    pub fn unoccluded(&self, p: &Point3, target: &Point3) -> bool {
        let v = target - p;
        let dist = v.norm();
        if dist < 1e-12 {
            return true;
        }
        let dir = v / dist;
        self.intersect(p, &dir, 1e-9 * (1.0 + dist), dist).is_none()
    }

    /// Surface point seen along a ray, with its normal.
    pub fn trace(&self, origin: &Point3, dir: &Direction) -> Option<(Point3, SurfaceNormal)> {
        let (_, p) = self.intersect(origin, dir.as_vector(), 0.0, f64::INFINITY)?;
        let s = self.surface_at(p.x, p.y)?;
        Some((p, SurfaceNormal::from_gradient(s.dzdx, s.dzdy)))
    }

    /// Deterministically ordered integration samples over every valid cell.
    pub fn surface_points(&self) -> Vec<SurfacePoint> {
        let h = &self.surface;
        let (sx, sy) = self.samples_per_cell;
        let mut out = Vec::new();
        if h.width() < 2 || h.height() < 2 {
            return out;
        }
        for cj in 0..h.height() - 1 {
            for ci in 0..h.width() - 1 {
                out.extend(self.cell_points(ci, cj, sx, sy));
            }
        }
        out
    }

    pub(crate) fn cell_points(
        &self,
        ci: usize,
        cj: usize,
        sx: usize,
        sy: usize,
    ) -> impl Iterator<Item = SurfacePoint> + '_ {
        let h = &self.surface;
        let valid = h.cell_valid(ci, cj);
        let (x0, y0) = h.node_position(ci, cj);
        let base_area = h.dx() * h.dy() / (sx * sy) as f64;
        (0..sy)
            .flat_map(move |l| (0..sx).map(move |k| (k, l)))
            .filter(move |_| valid)
            .filter_map(move |(k, l)| {
                let x = x0 + (k as f64 + 0.5) / sx as f64 * h.dx();
                let y = y0 + (l as f64 + 0.5) / sy as f64 * h.dy();
                let s = h.sample(x, y)?;
                let slope = (1.0 + s.dzdx * s.dzdx + s.dzdy * s.dzdy).sqrt();
                Some(SurfacePoint {
                    point: Point3::new(x, y, s.z),
                    normal: SurfaceNormal::from_gradient(s.dzdx, s.dzdy),
                    area: base_area * slope,
                })
            })
    }
}
