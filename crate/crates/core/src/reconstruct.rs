//! Depth recovery along rectified epipolar rows from an irradiance image and a
//! transport matrix.
//!
//! The rig must be in canonical rectified form: camera at the origin, both
//! devices with identity rotation, the projector displaced along +x and both
//! sharing `fy` and `cy`. Depth maps live on the camera pixel grid.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{triangulate, RectifiedRig};
use crate::scene::Scene;
use crate::transport::TransportMatrix;
use crate::types::{direction_between, HeightField, PixelIndex, Point3};

/// Per-pixel camera irradiance with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct IrradianceImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl IrradianceImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>, valid: Vec<bool>) -> Result<Self> {
        let n = width * height;
        if values.len() != n {
            return Err(Error::dims("irradiance samples", n, values.len()));
        }
        if valid.len() != n {
            return Err(Error::dims("irradiance mask", n, valid.len()));
        }
        if values
            .iter()
            .zip(&valid)
            .any(|(e, ok)| *ok && !(e.is_finite() && *e >= 0.0))
        {
            return Err(Error::validation(
                "irradiance",
                "valid pixels must be finite and nonnegative",
            ));
        }
        Ok(IrradianceImage {
            width,
            height,
            values,
            valid,
        })
    }

    /// Image whose valid pixels hold `f(u, v)`; `None` marks a pixel invalid.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> Option<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        let mut valid = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                let e = f(u, v);
                valid.push(e.is_some());
                values.push(e.unwrap_or(f64::NAN));
            }
        }
        Self::new(width, height, values, valid)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, u: usize, v: usize) -> Option<f64> {
        let k = v * self.width + u;
        if u < self.width && v < self.height && self.valid[k] {
            Some(self.values[k])
        } else {
            None
        }
    }
}

/// Transport scalar linking the projector pixel that lights a point to the
/// camera pixel that sees it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointTransport {
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeedStrategy {
    BrightestCorrespondence,
    FirstValid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructionParams {
    /// Smallest accepted `|omega_x|` of the camera direction.
    pub omega_x_epsilon: f64,
    /// Smallest accepted point transport.
    pub transport_epsilon: f64,
    pub seed_strategy: SeedStrategy,
    /// Refine the triangulated seed to subpixel accuracy using the whole row.
    pub refine_seed: bool,
}

impl Default for ReconstructionParams {
    fn default() -> Self {
        ReconstructionParams {
            omega_x_epsilon: 1e-3,
            transport_epsilon: 1e-9,
            seed_strategy: SeedStrategy::BrightestCorrespondence,
            refine_seed: true,
        }
    }
}

impl ReconstructionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega_x_epsilon > 0.0 && self.omega_x_epsilon.is_finite()) {
            return Err(Error::validation("omega_x_epsilon", "must be positive"));
        }
        if !(self.transport_epsilon > 0.0 && self.transport_epsilon.is_finite()) {
            return Err(Error::validation("transport_epsilon", "must be positive"));
        }
        Ok(())
    }
}

fn check_rig(rig: &RectifiedRig) -> Result<()> {
    if !rig.is_canonical() {
        return Err(Error::NotRectified(
            "device rotations must be identity with the baseline along +x",
        ));
    }
    let (c, p) = (&rig.rig.camera, &rig.rig.projector);
    if (c.fy - p.fy).abs() > 1e-9 * c.fy || (c.cy - p.cy).abs() > 1e-9 {
        return Err(Error::NotRectified("devices must share fy and cy"));
    }
    let offset = p.center() - c.center();
    if c.center().coords.norm() > 1e-9 || offset.x <= 0.0 || offset.y.abs() > 1e-9 || offset.z.abs() > 1e-9 {
        return Err(Error::NotRectified(
            "camera must sit at the origin with the projector along +x",
        ));
    }
    Ok(())
}

fn check_transport(t: &TransportMatrix, rig: &RectifiedRig) -> Result<()> {
    let (nc, np) = (rig.rig.camera.pixel_count(), rig.rig.projector.pixel_count());
    if t.rows() != nc {
        return Err(Error::dims("transport rows (camera pixels)", nc, t.rows()));
    }
    if t.cols() != np {
        return Err(Error::dims("transport columns (projector pixels)", np, t.cols()));
    }
    Ok(())
}

/// Entries of camera pixel `(u, v)` restricted to projector row `v`.
fn epipolar_entries<'a>(t: &'a TransportMatrix, rig: &RectifiedRig, u: usize, v: usize) -> &'a [f64] {
    let cam = &rig.rig.camera;
    let proj = &rig.rig.projector;
    if v >= proj.height {
        return &[];
    }
    let row = t.row(v * cam.width + u);
    &row[v * proj.width..(v + 1) * proj.width]
}

/// Brightest entry of the camera pixel's epipolar row and its projector pixel
/// (linear index). Ties go to the smaller projector column.
pub fn point_transport_from_matrix(
    t: &TransportMatrix,
    rig: &RectifiedRig,
    cam_px: PixelIndex,
    params: &ReconstructionParams,
) -> Result<(PointTransport, usize)> {
    check_transport(t, rig)?;
    let entries = epipolar_entries(t, rig, cam_px.u, cam_px.v);
    let mut best: Option<(usize, f64)> = None;
    for (j, &x) in entries.iter().enumerate() {
        if best.map_or(true, |(_, b)| x > b) {
            best = Some((j, x));
        }
    }
    match best {
        Some((j, x)) if x >= params.transport_epsilon => Ok((
            PointTransport { value: x },
            cam_px.v * rig.rig.projector.width + j,
        )),
        _ => Err(Error::NoCorrespondence),
    }
}

/// Surface slope `dz/dx` at `p` from the irradiance equation
/// `e = T (n . w) / |o - p|^2` with `n = (dz/dx, 0, -1)` and `w` the unit
/// direction from `p` to the camera center `o`.
pub fn slope_from_irradiance(
    e: f64,
    tp: PointTransport,
    p: &Point3,
    rig: &RectifiedRig,
    params: &ReconstructionParams,
) -> Result<f64> {
    if !(tp.value >= params.transport_epsilon) {
        return Err(Error::VanishingTransport(tp.value));
    }
    let o = rig.rig.camera.center();
    let w = direction_between(p, &o)?;
    if w.x().abs() < params.omega_x_epsilon {
        return Err(Error::SingularRay(w.x()));
    }
    let d2 = (o - p).norm_squared();
    Ok((e * d2 / tp.value + w.z()) / w.x())
}

/// Forward irradiance with the same normal convention, for any normal.
pub fn irradiance_from_slope(tp: PointTransport, p: &Point3, normal: [f64; 3], rig: &RectifiedRig) -> Option<f64> {
    let o = rig.rig.camera.center();
    let w = direction_between(p, &o).ok()?;
    let dot = normal[0] * w.x() + normal[1] * w.y() + normal[2] * w.z();
    if dot <= 0.0 {
        return None;
    }
    Some(tp.value * dot / (o - p).norm_squared())
}

/// Cumulative trapezoidal integration of uniformly spaced slopes outward from
/// `seed_x`, halting at the first invalid cell in each direction.
pub fn integrate_epipolar_line(
    slopes: &[f64],
    valid: &[bool],
    seed_x: usize,
    seed_z: f64,
    dx: f64,
) -> Result<(Vec<f64>, Vec<bool>)> {
    if valid.len() != slopes.len() {
        return Err(Error::dims("slope mask", slopes.len(), valid.len()));
    }
    if !(dx > 0.0 && dx.is_finite()) {
        return Err(Error::validation("dx", "must be positive"));
    }
    let ok = |k: usize| valid[k] && slopes[k].is_finite();
    if seed_x >= slopes.len() || !ok(seed_x) {
        return Err(Error::InvalidSeed(seed_x));
    }
    let n = slopes.len();
    let mut z = vec![f64::NAN; n];
    let mut mask = vec![false; n];
    z[seed_x] = seed_z;
    mask[seed_x] = true;
    let mut k = seed_x;
    while k + 1 < n && ok(k + 1) {
        z[k + 1] = z[k] + 0.5 * (slopes[k] + slopes[k + 1]) * dx;
        mask[k + 1] = true;
        k += 1;
    }
    let mut k = seed_x;
    while k > 0 && ok(k - 1) {
        z[k - 1] = z[k] - 0.5 * (slopes[k] + slopes[k - 1]) * dx;
        mask[k - 1] = true;
        k -= 1;
    }
    Ok((z, mask))
}

/// Everything known about one camera row before integration.
struct RowData {
    v: usize,
    /// Camera ray `x/z` per pixel.
    a: Vec<f64>,
    /// Camera ray `y/z` (shared along the row).
    b: f64,
    irradiance: Vec<Option<f64>>,
    /// Transport used in the slope equation.
    transport: Vec<f64>,
    /// Brightest matrix entry and its projector column, from the matrix.
    brightest: Vec<Option<(f64, usize)>>,
    /// First and last projector column with a nonzero entry.
    support: Vec<Option<(usize, usize)>>,
}

impl RowData {
    fn new(
        e: &IrradianceImage,
        t: &TransportMatrix,
        rig: &RectifiedRig,
        v: usize,
        transport_override: Option<f64>,
        params: &ReconstructionParams,
    ) -> Self {
        let cam = &rig.rig.camera;
        let w = cam.width;
        let mut row = RowData {
            v,
            a: (0..w).map(|u| (u as f64 - cam.cx) / cam.fx).collect(),
            b: (v as f64 - cam.cy) / cam.fy,
            irradiance: (0..w).map(|u| e.get(u, v)).collect(),
            transport: vec![0.0; w],
            brightest: vec![None; w],
            support: vec![None; w],
        };
        for u in 0..w {
            let entries = epipolar_entries(t, rig, u, v);
            let px = PixelIndex {
                u,
                v,
                device: crate::types::DeviceKind::Camera,
            };
            if let Ok((tp, j)) = point_transport_from_matrix(t, rig, px, params) {
                row.brightest[u] = Some((tp.value, j - v * rig.rig.projector.width));
            }
            let first = entries.iter().position(|x| *x > 0.0);
            let last = entries.iter().rposition(|x| *x > 0.0);
            if let (Some(f), Some(l)) = (first, last) {
                row.support[u] = Some((f, l));
            }
            row.transport[u] = transport_override.unwrap_or(row.brightest[u].map_or(0.0, |b| b.0));
        }
        row
    }

    fn point(&self, u: usize, z: f64) -> Point3 {
        Point3::new(self.a[u] * z, self.b * z, z)
    }

    /// Slope at pixel `u` for depth `z`, with its derivative in `z`.
    fn slope(&self, u: usize, z: f64, rig: &RectifiedRig, params: &ReconstructionParams) -> Option<(f64, f64)> {
        let e = self.irradiance[u]?;
        let tp = PointTransport {
            value: self.transport[u],
        };
        let p = self.point(u, z);
        let s = slope_from_irradiance(e, tp, &p, rig, params).ok()?;
        let len2 = self.a[u] * self.a[u] + self.b * self.b + 1.0;
        let wx = -self.a[u] / len2.sqrt();
        let ds = 2.0 * e * z * len2 / (tp.value * wx);
        Some((s, ds))
    }

    fn usable(&self, u: usize, rig: &RectifiedRig, params: &ReconstructionParams) -> bool {
        self.slope(u, 1.0, rig, params).is_some()
    }

    /// Implicit trapezoid step in world x from pixel `u0` (depth `z0`) to `u1`.
    fn step(&self, u0: usize, z0: f64, u1: usize, rig: &RectifiedRig, params: &ReconstructionParams) -> Option<f64> {
        let (s0, _) = self.slope(u0, z0, rig, params)?;
        let (a0, a1) = (self.a[u0], self.a[u1]);
        let x0 = a0 * z0;
        // explicit guess: straight line with slope s0
        let denom = 1.0 - s0 * a1;
        let mut z = if denom.abs() > 1e-12 { (z0 - s0 * x0) / denom } else { z0 };
        if !(z > 0.0) {
            z = z0;
        }
        for _ in 0..60 {
            let (s1, ds1) = self.slope(u1, z, rig, params)?;
            let dxw = a1 * z - x0;
            let f = z - z0 - 0.5 * (s0 + s1) * dxw;
            let df = 1.0 - 0.5 * ds1 * dxw - 0.5 * (s0 + s1) * a1;
            if df == 0.0 || !df.is_finite() {
                return None;
            }
            let next = z - f / df;
            if !(next > 0.0 && next.is_finite()) {
                return None;
            }
            let done = (next - z).abs() <= 1e-14 * z.abs().max(1.0);
            z = next;
            if done {
                return Some(z);
            }
        }
        None
    }

    /// Depths along the row from a seed, halting at the first failure each way.
    fn integrate(&self, seed_x: usize, seed_z: f64, rig: &RectifiedRig, params: &ReconstructionParams) -> Vec<Option<f64>> {
        let n = self.a.len();
        let mut z = vec![None; n];
        if !self.usable(seed_x, rig, params) {
            return z;
        }
        z[seed_x] = Some(seed_z);
        let mut k = seed_x;
        while k + 1 < n {
            match self.step(k, z[k].unwrap(), k + 1, rig, params) {
                Some(next) => z[k + 1] = Some(next),
                None => break,
            }
            k += 1;
        }
        let mut k = seed_x;
        while k > 0 {
            match self.step(k, z[k].unwrap(), k - 1, rig, params) {
                Some(next) => z[k - 1] = Some(next),
                None => break,
            }
            k -= 1;
        }
        z
    }

    /// Disagreement between the projector columns predicted by a depth profile
    /// and the observed support of every pixel, in projector pixels.
    ///
    /// The first value measures how far predicted footprints miss projector
    /// columns that are lit; it is zero for the true profile. The second
    /// measures overlap with unlit neighbor columns, which the true profile
    /// may show by up to the sampling resolution of the matrix.
    fn support_violation(&self, z: &[Option<f64>], rig: &RectifiedRig, params: &ReconstructionParams) -> (f64, f64) {
        let proj = &rig.rig.projector;
        let cam = &rig.rig.camera;
        let n = z.len();
        let edge_depth = |u: usize, edge: f64| -> Option<f64> {
            let zu = z[u]?;
            let xu = self.a[u] * zu;
            let nb = if edge > u as f64 { u + 1 } else { u.wrapping_sub(1) };
            let s = match z.get(nb).copied().flatten() {
                Some(zn) => (zn - zu) / (self.a[nb] * zn - xu),
                None => self.slope(u, zu, rig, params)?.0,
            };
            let ae = (edge - cam.cx) / cam.fx;
            let d = 1.0 - s * ae;
            if d.abs() < 1e-12 {
                return None;
            }
            Some((zu - s * xu) / d)
        };
        let (mut hard, mut soft) = (0.0, 0.0);
        for u in 0..n {
            let Some((jmin, jmax)) = self.support[u] else { continue };
            let mut q = [0.0; 2];
            let mut ok = true;
            for (k, edge) in [u as f64 - 0.5, u as f64 + 0.5].into_iter().enumerate() {
                let Some(ze) = edge_depth(u, edge) else {
                    ok = false;
                    break;
                };
                let ae = (edge - cam.cx) / cam.fx;
                match proj.project(&Point3::new(ae * ze, self.b * ze, ze)) {
                    Ok((pu, _)) => q[k] = pu,
                    Err(_) => ok = false,
                }
            }
            if !ok {
                continue;
            }
            let (ql, qr) = (q[0].min(q[1]), q[0].max(q[1]));
            hard += (ql - (jmin as f64 + 0.5)).max(0.0) + ((jmax as f64 - 0.5) - qr).max(0.0);
            // a footprint may run past the lit region at projector borders and next to unlit pixels
            let unlit = |k: Option<usize>| k.map_or(false, |k| k < n && self.support[k].is_none());
            if jmin > 0 && !unlit(u.checked_sub(1)) {
                soft += ((jmin as f64 - 0.5) - ql).max(0.0);
            }
            if jmax + 1 < proj.width && !unlit(Some(u + 1)) {
                soft += (qr - (jmax as f64 + 0.5)).max(0.0);
            }
        }
        (hard, soft)
    }

    fn seed(&self, rig: &RectifiedRig, params: &ReconstructionParams) -> Result<(usize, f64)> {
        let mut pick: Option<(usize, f64)> = None;
        for (u, b) in self.brightest.iter().enumerate() {
            let Some((val, _)) = *b else { continue };
            match params.seed_strategy {
                SeedStrategy::BrightestCorrespondence => {
                    if pick.map_or(true, |(_, best)| val > best) {
                        pick = Some((u, val));
                    }
                }
                SeedStrategy::FirstValid => {
                    if pick.is_none() {
                        pick = Some((u, val));
                    }
                }
            }
        }
        let (u, _) = pick.ok_or(Error::EmptyRow(self.v))?;
        let (_, j) = self.brightest[u].expect("picked pixel has a correspondence");
        let p = triangulate(&rig.rig, (u as f64, self.v as f64), (j as f64, self.v as f64))?;
        let z = rig.rig.camera.to_device(&p).z;
        if !(z > 0.0) {
            return Err(Error::NonpositiveDepth(z));
        }
        Ok((u, z))
    }

    /// Scans seed depths around `z0` and returns the center of the range whose
    /// integrated row agrees with the observed transport support.
    fn refine_seed(&self, seed_x: usize, z0: f64, rig: &RectifiedRig, params: &ReconstructionParams) -> f64 {
        if !self.usable(seed_x, rig, params) {
            return z0;
        }
        let baseline = rig.baseline;
        // depth change for a two projector pixel shift
        let span = 2.0 * z0 * z0 / (rig.rig.projector.fx * baseline);
        let lo = (z0 - span).max(0.5 * z0);
        let hi = z0 + span;
        let cost = |z: f64| self.support_violation(&self.integrate(seed_x, z, rig, params), rig, params);
        const N: usize = 200;
        let grid: Vec<f64> = (0..=N).map(|k| lo + (hi - lo) * k as f64 / N as f64).collect();
        let costs: Vec<(f64, f64)> = grid.iter().map(|z| cost(*z)).collect();
        let argmin = |key: &dyn Fn(&(f64, f64)) -> f64| {
            (0..=N).fold(0, |best, k| if key(&costs[k]) < key(&costs[best]) { k } else { best })
        };
        if !costs.iter().any(|c| c.0 == 0.0) {
            return grid[argmin(&|c| c.0)];
        }
        let k = argmin(&|c| if c.0 == 0.0 { c.1 } else { f64::INFINITY });
        let best = costs[k].1;
        let accept = |z: f64| {
            let (h, s) = cost(z);
            h == 0.0 && s <= best
        };
        if best == 0.0 {
            // widen the consistent range to its exact ends by bisection
            let edge = |inside: f64, outside: f64| {
                let (mut a, mut b) = (inside, outside);
                for _ in 0..40 {
                    let m = 0.5 * (a + b);
                    if accept(m) {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                a
            };
            let kl = (0..=k).rev().take_while(|&j| costs[j] == (0.0, 0.0)).last().unwrap_or(k);
            let kh = (k..=N).take_while(|&j| costs[j] == (0.0, 0.0)).last().unwrap_or(k);
            let zl = if kl > 0 { edge(grid[kl], grid[kl - 1]) } else { grid[kl] };
            let zh = if kh < N { edge(grid[kh], grid[kh + 1]) } else { grid[kh] };
            return 0.5 * (zl + zh);
        }
        // golden-section search on the neighbor-overlap measure
        let penalty = |z: f64| {
            let (h, s) = cost(z);
            s + 1e3 * h
        };
        let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(N)]);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
        let (mut fc, mut fd) = (penalty(c), penalty(d));
        for _ in 0..60 {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = penalty(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = penalty(d);
            }
        }
        0.5 * (a + b)
    }
}

/// Seed pixel and triangulated depth for one camera row, from the transport matrix alone.
///
/// The depth comes from pixel-center correspondences and is therefore
/// quantized to the projector grid; reconstruction refines it further.
pub fn seed_depth(
    t: &TransportMatrix,
    rig: &RectifiedRig,
    row: usize,
    params: &ReconstructionParams,
) -> Result<(usize, f64)> {
    check_rig(rig)?;
    check_transport(t, rig)?;
    let cam = &rig.rig.camera;
    if row >= cam.height {
        return Err(Error::dims("row index bound", cam.height, row));
    }
    let dummy = IrradianceImage::from_fn(cam.width, cam.height, |_, _| None)?;
    RowData::new(&dummy, t, rig, row, None, params).seed(rig, params)
}

pub(crate) fn reconstruct_with(
    e: &IrradianceImage,
    t: &TransportMatrix,
    rig: &RectifiedRig,
    params: &ReconstructionParams,
    transport_override: Option<f64>,
) -> Result<HeightField> {
    params.validate()?;
    check_rig(rig)?;
    check_transport(t, rig)?;
    let cam = &rig.rig.camera;
    if e.width() != cam.width {
        return Err(Error::dims("irradiance width", cam.width, e.width()));
    }
    if e.height() != cam.height {
        return Err(Error::dims("irradiance height", cam.height, e.height()));
    }
    let rows: Vec<Vec<Option<f64>>> = (0..cam.height)
        .into_par_iter()
        .map(|v| {
            let row = RowData::new(e, t, rig, v, transport_override, params);
            let Ok((x0, mut z0)) = row.seed(rig, params) else {
                return vec![None; cam.width];
            };
            if params.refine_seed {
                z0 = row.refine_seed(x0, z0, rig, params);
            }
            row.integrate(x0, z0, rig, params)
        })
        .collect();
    let flat: Vec<Option<f64>> = rows.into_iter().flatten().collect();
    let valid: Vec<bool> = flat.iter().map(|z| z.map_or(false, f64::is_finite)).collect();
    let z: Vec<f64> = flat
        .iter()
        .zip(&valid)
        .map(|(z, ok)| if *ok { z.unwrap() } else { f64::NAN })
        .collect();
    HeightField::new(cam.width, cam.height, 1.0, 1.0, z, valid)
}

/// Camera-grid depth map recovered row by row: seed, slopes, integration.
/// Pixels where any step fails are masked.
pub fn reconstruct_depthmap(
    e: &IrradianceImage,
    t: &TransportMatrix,
    rig: &RectifiedRig,
    params: &ReconstructionParams,
) -> Result<HeightField> {
    reconstruct_with(e, t, rig, params, None)
}

/// Camera irradiance of the scene: per pixel, the surface point `p` on the
/// pixel-center ray gives `e = T (n . w) / |o - p|^2` with `n = (dz/dx,
/// dz/dy, -1)`, `w` the unit direction to the camera center `o` and `T` the
/// pixel's brightest epipolar entry of `t`.
pub fn forward_irradiance(scene: &Scene, rig: &RectifiedRig, t: &TransportMatrix) -> Result<IrradianceImage> {
    check_rig(rig)?;
    check_transport(t, rig)?;
    let cam = &rig.rig.camera;
    let params = ReconstructionParams::default();
    let o = cam.center();
    IrradianceImage::from_fn(cam.width, cam.height, |u, v| {
        let dir = cam.ray_direction((u as f64, v as f64));
        let (p, n) = scene.trace(&o, &dir)?;
        let px = PixelIndex {
            u,
            v,
            device: crate::types::DeviceKind::Camera,
        };
        let tp = point_transport_from_matrix(t, rig, px, &params)
            .map(|r| r.0)
            .unwrap_or(PointTransport { value: 0.0 });
        let nv = n.as_vector();
        irradiance_from_slope(tp, &p, [nv.x, nv.y, nv.z], rig)
    })
}

/// Ground-truth depth map: the camera-frame depth of the surface point on each
/// pixel-center ray.
pub fn render_depth_map(scene: &Scene, rig: &RectifiedRig) -> Result<HeightField> {
    let cam = &rig.rig.camera;
    let o = cam.center();
    let mut z = Vec::with_capacity(cam.pixel_count());
    let mut valid = Vec::with_capacity(cam.pixel_count());
    for v in 0..cam.height {
        for u in 0..cam.width {
            let hit = scene.trace(&o, &cam.ray_direction((u as f64, v as f64)));
            let d = hit.map(|(p, _)| cam.to_device(&p).z);
            valid.push(d.is_some());
            z.push(d.unwrap_or(f64::NAN));
        }
    }
    HeightField::new(cam.width, cam.height, 1.0, 1.0, z, valid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_slope_integrates_exactly() {
        let (z, m) = integrate_epipolar_line(&[2.0; 5], &[true; 5], 0, 5.0, 1.0).unwrap();
        assert_eq!(z, vec![5.0, 7.0, 9.0, 11.0, 13.0]);
        assert!(m.iter().all(|x| *x));
    }

    #[test]
    fn zero_slopes_keep_seed_depth() {
        let (z, _) = integrate_epipolar_line(&[0.0; 7], &[true; 7], 3, 2.5, 0.5).unwrap();
        assert!(z.iter().all(|v| *v == 2.5));
    }

    #[test]
    fn integration_halts_at_invalid_cells() {
        let valid = [true, false, true, true, true, false, true];
        let (z, m) = integrate_epipolar_line(&[1.0; 7], &valid, 3, 0.0, 1.0).unwrap();
        assert_eq!(m, vec![false, false, true, true, true, false, false]);
        assert!(z[0].is_nan() && z[6].is_nan());
        assert!(matches!(
            integrate_epipolar_line(&[1.0; 7], &valid, 1, 0.0, 1.0),
            Err(Error::InvalidSeed(1))
        ));
    }

    #[test]
    fn sine_profile_within_trapezoid_bound() {
        let h = 0.01;
        let n = (std::f64::consts::PI / h).floor() as usize + 1;
        let slopes: Vec<f64> = (0..n).map(|k| (k as f64 * h).cos()).collect();
        let (z, _) = integrate_epipolar_line(&slopes, &vec![true; n], 0, 0.0, h).unwrap();
        let worst = (0..n)
            .map(|k| (z[k] - (k as f64 * h).sin()).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-4, "{worst}");
    }
}
