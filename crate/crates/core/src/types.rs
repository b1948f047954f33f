//! Shared geometric and radiometric value types.

use nalgebra::Vector3;

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;

const UNIT_TOLERANCE: f64 = 1e-9;

/// Unit 3-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction(Vector3<f64>);

impl Direction {
    /// Normalizes `v`; fails when `v` is (numerically) zero or non-finite.
    pub fn new_normalize(v: Vector3<f64>) -> Result<Self> {
        let n = v.norm();
        if !(n.is_finite() && n >= 1e-12) {
            return Err(Error::CoincidentPoints);
        }
        Ok(Direction(v / n))
    }

    /// Wraps an already-unit vector, checking the norm.
    pub fn from_unit(v: Vector3<f64>) -> Result<Self> {
        if (v.norm() - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::validation("direction", "vector is not unit length"));
        }
        Ok(Direction(v))
    }

    pub(crate) fn new_unchecked(v: Vector3<f64>) -> Self {
        Direction(v)
    }

    pub fn x(&self) -> f64 {
        self.0.x
    }
    pub fn y(&self) -> f64 {
        self.0.y
    }
    pub fn z(&self) -> f64 {
        self.0.z
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn dot(&self, other: &Direction) -> f64 {
        self.0.dot(&other.0)
    }
}

impl std::ops::Neg for Direction {
    type Output = Direction;
    fn neg(self) -> Direction {
        Direction(-self.0)
    }
}

/// Unit vector pointing from `from` to `to`.
pub fn direction_between(from: &Point3, to: &Point3) -> Result<Direction> {
    let d = to - from;
    if !(d.norm() >= 1e-12) {
        return Err(Error::CoincidentPoints);
    }
    Direction::new_normalize(d)
}

/// Height-field normal `(dz/dx, dz/dy, -1)`, deliberately left unnormalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceNormal {
    pub nx: f64,
    pub ny: f64,
}

impl SurfaceNormal {
    pub fn from_gradient(dzdx: f64, dzdy: f64) -> Self {
        SurfaceNormal { nx: dzdx, ny: dzdy }
    }

    pub fn nz(&self) -> f64 {
        -1.0
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.nx, self.ny, -1.0)
    }

    /// Unit normal, facing the devices (negative z).
    pub fn unit(&self) -> Direction {
        Direction::new_unchecked(self.as_vector().normalize())
    }
}

/// Discretized light field: one nonnegative radiance sample per device pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct LightFieldVector {
    values: Vec<f64>,
}

impl LightFieldVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::validation(
                "light field",
                format!("sample {i} is negative or non-finite ({})", values[i]),
            ));
        }
        Ok(LightFieldVector { values })
    }

    pub fn zeros(len: usize) -> Self {
        LightFieldVector {
            values: vec![0.0; len],
        }
    }

    pub fn filled(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    /// Unit impulse at `index`.
    pub fn basis(len: usize, index: usize) -> Self {
        let mut values = vec![0.0; len];
        values[index] = 1.0;
        LightFieldVector { values }
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
        LightFieldVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviceKind {
    Camera,
    Projector,
}

/// Integer pixel coordinate on a named device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PixelIndex {
    pub u: usize,
    pub v: usize,
    pub device: DeviceKind,
}

impl PixelIndex {
    pub fn new(u: usize, v: usize, device: DeviceKind, width: usize, height: usize) -> Result<Self> {
        if u >= width || v >= height {
            return Err(Error::validation(
                "pixel",
                format!("({u}, {v}) outside {width}x{height}"),
            ));
        }
        Ok(PixelIndex { u, v, device })
    }

    /// Row-major linear index for a device of the given width.
    pub fn linear(&self, width: usize) -> usize {
        self.v * width + self.u
    }
}

/// Depth `z(x, y)` on a regular grid with a validity mask.
///
/// Node `(i, j)` sits at `(origin_x + i*dx, origin_y + j*dy)`; storage is row-major
/// with `j` selecting the row.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightField {
    width: usize,
    height: usize,
    dx: f64,
    dy: f64,
    origin_x: f64,
    origin_y: f64,
    z: Vec<f64>,
    valid: Vec<bool>,
    zmin: Option<f64>,
}

/// Height and first derivatives of the bilinear surface at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub z: f64,
    pub dzdx: f64,
    pub dzdy: f64,
}

impl HeightField {
    pub fn new(
        width: usize,
        height: usize,
        dx: f64,
        dy: f64,
        z: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        let n = width * height;
        if width == 0 || height == 0 {
            return Err(Error::validation("height field", "empty grid"));
        }
        if z.len() != n {
            return Err(Error::dims("height field depth samples", n, z.len()));
        }
        if valid.len() != n {
            return Err(Error::dims("height field mask", n, valid.len()));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(Error::validation("height field", "grid spacing must be positive"));
        }
        if z.iter().zip(&valid).any(|(z, ok)| *ok && !z.is_finite()) {
            return Err(Error::validation("height field", "non-finite depth in a valid cell"));
        }
        let zmin = z
            .iter()
            .zip(&valid)
            .filter(|(_, ok)| **ok)
            .map(|(z, _)| *z)
            .reduce(f64::min);
        Ok(HeightField {
            width,
            height,
            dx,
            dy,
            origin_x: 0.0,
            origin_y: 0.0,
            z,
            valid,
            zmin,
        })
    }

    /// Samples `f(x, y)` at every node; non-finite results are masked invalid.
    pub fn from_fn(
        width: usize,
        height: usize,
        dx: f64,
        dy: f64,
        origin: (f64, f64),
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mut z = Vec::with_capacity(width * height);
        let mut valid = Vec::with_capacity(width * height);
        for j in 0..height {
            for i in 0..width {
                let v = f(origin.0 + i as f64 * dx, origin.1 + j as f64 * dy);
                valid.push(v.is_finite());
                z.push(if v.is_finite() { v } else { f64::NAN });
            }
        }
        Ok(Self::new(width, height, dx, dy, z, valid)?.with_origin(origin.0, origin.1))
    }

    pub fn with_origin(mut self, x: f64, y: f64) -> Self {
        self.origin_x = x;
        self.origin_y = y;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn origin(&self) -> (f64, f64) {
        (self.origin_x, self.origin_y)
    }
    pub fn depths(&self) -> &[f64] {
        &self.z
    }
    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let k = self.index(i, j);
        self.valid[k].then_some(self.z[k])
    }

    pub fn is_valid(&self, i: usize, j: usize) -> bool {
        self.valid[self.index(i, j)]
    }

    pub fn node_position(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin_x + i as f64 * self.dx,
            self.origin_y + j as f64 * self.dy,
        )
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Min and max over valid cells.
    pub fn depth_range(&self) -> Option<(f64, f64)> {
        self.z
            .iter()
            .zip(&self.valid)
            .filter(|(_, ok)| **ok)
            .fold(None, |acc, (z, _)| match acc {
                None => Some((*z, *z)),
                Some((lo, hi)) => Some((lo.min(*z), hi.max(*z))),
            })
    }

    /// A grid cell (quad between four nodes) is usable only if all corners are valid.
    pub fn cell_valid(&self, ci: usize, cj: usize) -> bool {
        ci + 1 < self.width
            && cj + 1 < self.height
            && self.is_valid(ci, cj)
            && self.is_valid(ci + 1, cj)
            && self.is_valid(ci, cj + 1)
            && self.is_valid(ci + 1, cj + 1)
    }

    /// Corner depths `[z00, z10, z01, z11]` of a valid cell.
    pub(crate) fn cell_corners(&self, ci: usize, cj: usize) -> [f64; 4] {
        [
            self.z[self.index(ci, cj)],
            self.z[self.index(ci + 1, cj)],
            self.z[self.index(ci, cj + 1)],
            self.z[self.index(ci + 1, cj + 1)],
        ]
    }

    /// Evaluates the piecewise-bilinear surface at world `(x, y)`.
    pub fn sample(&self, x: f64, y: f64) -> Option<SurfaceSample> {
        let fx = (x - self.origin_x) / self.dx;
        let fy = (y - self.origin_y) / self.dy;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let max_i = (self.width - 1) as f64;
        let max_j = (self.height - 1) as f64;
        if fx > max_i || fy > max_j || self.width < 2 || self.height < 2 {
            return None;
        }
        let ci = (fx.floor() as usize).min(self.width - 2);
        let cj = (fy.floor() as usize).min(self.height - 2);
        if !self.cell_valid(ci, cj) {
            return None;
        }
        let s = fx - ci as f64;
        let r = fy - cj as f64;
        let [z00, z10, z01, z11] = self.cell_corners(ci, cj);
        let z = z00 * (1.0 - s) * (1.0 - r) + z10 * s * (1.0 - r) + z01 * (1.0 - s) * r + z11 * s * r;
        let dzds = (z10 - z00) * (1.0 - r) + (z11 - z01) * r;
        let dzdr = (z01 - z00) * (1.0 - s) + (z11 - z10) * s;
        Some(SurfaceSample {
            z,
            dzdx: dzds / self.dx,
            dzdy: dzdr / self.dy,
        })
    }

    /// Lowest valid depth, used as an early-out bound when marching rays.
    pub(crate) fn min_depth(&self) -> Option<f64> {
        self.zmin
    }
}

/// Finite-difference gradient `(dz/dx, dz/dy)` at node `(i, j)`.
///
/// Central differences in the interior, one-sided at the border.
pub fn heightfield_gradient(h: &HeightField, cell: (usize, usize)) -> Result<(f64, f64)> {
    let (i, j) = cell;
    if i >= h.width() || j >= h.height() {
        return Err(Error::InvalidNeighborhood(i, j));
    }
    let bad = || Error::InvalidNeighborhood(i, j);
    h.get(i, j).ok_or_else(bad)?;

    let axis = |len: usize, k: usize, at: &dyn Fn(usize) -> Option<f64>, step: f64| -> Result<f64> {
        if len < 2 {
            return Ok(0.0);
        }
        let (lo, hi) = if k == 0 {
            (0, 1)
        } else if k == len - 1 {
            (len - 2, len - 1)
        } else {
            (k - 1, k + 1)
        };
        let zl = at(lo).ok_or_else(bad)?;
        let zh = at(hi).ok_or_else(bad)?;
        Ok((zh - zl) / ((hi - lo) as f64 * step))
    };

    let gx = axis(h.width(), i, &|ii| h.get(ii, j), h.dx())?;
    let gy = axis(h.height(), j, &|jj| h.get(i, jj), h.dy())?;
    Ok((gx, gy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direction_examples() {
        let d = direction_between(&Point3::origin(), &Point3::new(0.0, 0.0, 2.0)).unwrap();
        assert_eq!((d.x(), d.y(), d.z()), (0.0, 0.0, 1.0));
        let d = direction_between(&Point3::origin(), &Point3::new(3.0, 0.0, 4.0)).unwrap();
        assert!((d.x() - 0.6).abs() < 1e-15 && (d.z() - 0.8).abs() < 1e-15);
        let p = Point3::new(1.0, 1.0, 1.0);
        assert!(matches!(direction_between(&p, &p), Err(Error::CoincidentPoints)));
    }

    #[test]
    fn direction_is_antisymmetric() {
        let a = Point3::new(0.3, -1.2, 4.0);
        let b = Point3::new(-2.0, 0.5, 1.5);
        let ab = direction_between(&a, &b).unwrap();
        let ba = direction_between(&b, &a).unwrap();
        assert!((ab.as_vector() + ba.as_vector()).norm() < 1e-15);
        assert!((ab.as_vector().norm() - 1.0).abs() < 1e-12);
    }

    fn field(f: impl Fn(f64, f64) -> f64) -> HeightField {
        HeightField::from_fn(7, 5, 1.0, 1.0, (0.0, 0.0), f).unwrap()
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let h = field(|_, _| 5.0);
        assert_eq!(heightfield_gradient(&h, (3, 2)).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn gradient_of_ramp_is_exact_everywhere() {
        let h = field(|x, y| 2.0 * x - 0.5 * y + 1.0);
        for j in 0..5 {
            for i in 0..7 {
                let (gx, gy) = heightfield_gradient(&h, (i, j)).unwrap();
                assert!((gx - 2.0).abs() < 1e-12 && (gy + 0.5).abs() < 1e-12);
                let n = SurfaceNormal::from_gradient(gx, gy);
                assert_eq!(n.nz(), -1.0);
            }
        }
    }

    #[test]
    fn gradient_of_quadratic_matches_derivative() {
        // central difference of x^2 is exact: ((x+1)^2 - (x-1)^2)/2 = 2x
        let h = field(|x, _| x * x);
        let (gx, gy) = heightfield_gradient(&h, (3, 2)).unwrap();
        assert!((gx - 6.0).abs() < 1e-12);
        assert_eq!(gy, 0.0);
    }

    #[test]
    fn gradient_rejects_masked_neighbor() {
        let mut valid = vec![true; 35];
        valid[2 * 7 + 4] = false;
        let h = HeightField::new(7, 5, 1.0, 1.0, vec![1.0; 35], valid).unwrap();
        assert!(matches!(
            heightfield_gradient(&h, (3, 2)),
            Err(Error::InvalidNeighborhood(3, 2))
        ));
        assert!(heightfield_gradient(&h, (1, 1)).is_ok());
    }

    #[test]
    fn bilinear_sample_reproduces_planes() {
        let h = HeightField::from_fn(9, 9, 0.25, 0.5, (-1.0, 2.0), |x, y| 0.5 * x - y + 3.0).unwrap();
        let s = h.sample(-0.37, 3.11).unwrap();
        assert!((s.z - (0.5 * -0.37 - 3.11 + 3.0)).abs() < 1e-12);
        assert!((s.dzdx - 0.5).abs() < 1e-12 && (s.dzdy + 1.0).abs() < 1e-12);
        assert!(h.sample(-1.5, 3.0).is_none());
    }

    #[test]
    fn light_field_rejects_negative() {
        assert!(LightFieldVector::new(vec![0.0, -1.0]).is_err());
        assert!(LightFieldVector::new(vec![0.0, f64::NAN]).is_err());
        assert_eq!(LightFieldVector::basis(3, 1).values(), &[0.0, 1.0, 0.0]);
    }
}
