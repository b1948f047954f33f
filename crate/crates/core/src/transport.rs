//! Light transport between a projector and a camera.
//!
//! Entry `(i, j)` of the transport matrix is the BRDF averaged over the
//! surface patch that is seen by camera pixel `i` and lit by projector pixel
//! `j`, with samples weighted by surface area. Swapping the devices yields
//! exactly the transposed matrix.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::brdf::eval_brdf;
use crate::error::{Error, Result};
use crate::geometry::Rig;
use crate::scene::{Scene, SurfacePoint};
use crate::types::{direction_between, LightFieldVector};

/// Dense `rows x cols` matrix, rows indexed by camera pixels and columns by
/// projector pixels, both in row-major pixel order.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TransportMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        TransportMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_dense(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dims("transport entries", rows * cols, data.len()));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::validation(
                "transport",
                format!("entries must be finite and nonnegative, found {v}"),
            ));
        }
        Ok(TransportMatrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// The matrix as stored on disk: every entry rounded to single precision.
    pub fn rounded_to_f32(&self) -> TransportMatrix {
        TransportMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| *v as f32 as f64).collect(),
        }
    }

    pub fn transpose(&self) -> TransportMatrix {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.get(i, j);
            }
        }
        TransportMatrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }
}

/// One surface sample that connects a camera pixel to a projector pixel.
#[derive(Debug, Clone, Copy)]
struct PathSample {
    cam: usize,
    proj: usize,
    area: f64,
    value: f64,
}

fn path_sample(scene: &Scene, rig: &Rig, sp: &SurfacePoint) -> Option<PathSample> {
    let (cu, cv) = rig.camera.pixel_of(&sp.point)?;
    let (pu, pv) = rig.projector.pixel_of(&sp.point)?;
    let cam_center = rig.camera.center();
    let proj_center = rig.projector.center();
    let to_proj = direction_between(&sp.point, &proj_center).ok()?;
    let to_cam = direction_between(&sp.point, &cam_center).ok()?;
    let frame = sp.frame(scene.frame_angle);
    // below the horizon of either device: no light path
    let value = eval_brdf(&scene.brdf, &frame, &to_proj, &to_cam).ok()?;
    if !scene.unoccluded(&sp.point, &cam_center) || !scene.unoccluded(&sp.point, &proj_center) {
        return None;
    }
    Some(PathSample {
        cam: cv * rig.camera.width + cu,
        proj: pv * rig.projector.width + pu,
        area: sp.area,
        value,
    })
}

/// All light paths in deterministic surface order; computed in parallel.
fn path_samples(scene: &Scene, rig: &Rig) -> Vec<PathSample> {
    let h = &scene.surface;
    if h.width() < 2 || h.height() < 2 {
        return Vec::new();
    }
    let (sx, sy) = scene.samples_per_cell;
    let per_row: Vec<Vec<PathSample>> = (0..h.height() - 1)
        .into_par_iter()
        .map(|cj| {
            (0..h.width() - 1)
                .flat_map(|ci| scene.cell_points(ci, cj, sx, sy))
                .filter_map(|sp| path_sample(scene, rig, &sp))
                .collect()
        })
        .collect();
    per_row.into_iter().flatten().collect()
}

/// Area-weighted mean per `(camera, projector)` pair, summed in sample order.
fn accumulate(samples: impl Iterator<Item = PathSample>) -> HashMap<(usize, usize), f64> {
    let mut sums: HashMap<(usize, usize), (f64, f64)> = HashMap::new();
    for s in samples {
        let e = sums.entry((s.cam, s.proj)).or_insert((0.0, 0.0));
        e.0 += s.area * s.value;
        e.1 += s.area;
    }
    sums.into_iter()
        .map(|(k, (wv, w))| (k, if w > 0.0 { wv / w } else { 0.0 }))
        .collect()
}

/// Camera image under a single lit projector pixel: column `proj_pixel` of the transport matrix.
pub fn render_impulse_response(
    scene: &Scene,
    rig: &Rig,
    proj_pixel: usize,
) -> Result<LightFieldVector> {
    let n = rig.projector.pixel_count();
    if proj_pixel >= n {
        return Err(Error::dims("projector pixel index bound", n, proj_pixel));
    }
    let mut out = vec![0.0; rig.camera.pixel_count()];
    let samples = path_samples(scene, rig);
    for ((i, _), v) in accumulate(samples.into_iter().filter(|s| s.proj == proj_pixel)) {
        out[i] = v;
    }
    Ok(LightFieldVector::from_raw(out))
}

/// Full transport matrix, equal column-by-column to [`render_impulse_response`].
pub fn build_transport_matrix(scene: &Scene, rig: &Rig) -> Result<TransportMatrix> {
    rig.camera.validate()?;
    rig.projector.validate()?;
    let mut t = TransportMatrix::zeros(rig.camera.pixel_count(), rig.projector.pixel_count());
    let cols = t.cols;
    for ((i, j), v) in accumulate(path_samples(scene, rig).into_iter()) {
        t.data[i * cols + j] = v;
    }
    Ok(t)
}

/// Camera image `c = T p` for projector pattern `p`.
pub fn apply_transport(t: &TransportMatrix, pattern: &LightFieldVector) -> Result<LightFieldVector> {
    if pattern.len() != t.cols {
        return Err(Error::dims("projector pattern length", t.cols, pattern.len()));
    }
    let p = pattern.values();
    let out = (0..t.rows)
        .map(|i| t.row(i).iter().zip(p).map(|(a, b)| a * b).sum())
        .collect();
    Ok(LightFieldVector::from_raw(out))
}

/// Dual image `p' = T^T c`: the scene seen from the projector, lit from the camera.
pub fn dual_photograph(t: &TransportMatrix, camera_image: &LightFieldVector) -> Result<LightFieldVector> {
    if camera_image.len() != t.rows {
        return Err(Error::dims("camera image length", t.rows, camera_image.len()));
    }
    let mut out = vec![0.0; t.cols];
    for (i, c) in camera_image.values().iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        for (o, a) in out.iter_mut().zip(t.row(i)) {
            *o += a * c;
        }
    }
    Ok(LightFieldVector::from_raw(out))
}

/// `max |T_f[i,j] - T_r[j,i]|`, relative to the largest entry of either
/// matrix (or 1, whichever is larger).
pub fn reciprocity_deviation(forward: &TransportMatrix, reverse: &TransportMatrix) -> Result<f64> {
    if reverse.rows != forward.cols {
        return Err(Error::dims("reverse transport rows", forward.cols, reverse.rows));
    }
    if reverse.cols != forward.rows {
        return Err(Error::dims("reverse transport columns", forward.rows, reverse.cols));
    }
    let mut worst: f64 = 0.0;
    for i in 0..forward.rows {
        for j in 0..forward.cols {
            worst = worst.max((forward.get(i, j) - reverse.get(j, i)).abs());
        }
    }
    let scale = forward.max_entry().max(reverse.max_entry()).max(1.0);
    Ok(worst / scale)
}
