#![allow(dead_code)]

use nalgebra::{Matrix3, Vector3};
use rfdepth_core::geometry::{
    board_corners_world, locate_checkerboard_corners, render_board_image, synthesize_projector_views, BoardPose,
    CheckerboardSpec, PinholeDevice, RectifiedRig, Rig,
};
use rfdepth_core::{build_transport_matrix, dual_photograph, BrdfModel, HeightField, LightFieldVector, Point3, Scene};

/// Canonical rectified rig: camera at the origin, projector 1.5 units along +x.
/// The camera's principal point sits left of the image so every column sees
/// rays with positive x.
pub fn desk_rig() -> RectifiedRig {
    let camera = PinholeDevice::looking(64, 64, (96.0, 96.0), (-16.0, 32.0), Matrix3::identity(), Point3::origin())
        .unwrap();
    let projector = PinholeDevice::looking(
        64,
        64,
        (72.0, 96.0),
        (23.0, 32.0),
        Matrix3::identity(),
        Point3::new(1.5, 0.0, 0.0),
    )
    .unwrap();
    RectifiedRig::canonical(&Rig::new(camera, projector).unwrap()).unwrap()
}

pub fn ward() -> BrdfModel {
    BrdfModel::ward(0.2, 0.3, 0.1, 0.4).unwrap()
}

/// Height field over x in [0, 4.8], y in [-2, 2] at 0.05 spacing.
pub fn surface(f: impl Fn(f64, f64) -> f64) -> HeightField {
    HeightField::from_fn(97, 81, 0.05, 0.05, (0.0, -2.0), f).unwrap()
}

pub fn scene(f: impl Fn(f64, f64) -> f64, brdf: BrdfModel) -> Scene {
    Scene::new(surface(f), brdf).unwrap()
}

pub fn ruled_plane() -> Scene {
    scene(|x, _| 0.5 * x + 3.0, ward())
}

pub fn ruled_sine() -> Scene {
    ruled_sine_at(0.01, 1)
}

pub fn ruled_sine_at(spacing: f64, samples: usize) -> Scene {
    let nx = (4.8 / spacing).round() as usize + 1;
    let ny = (4.0 / spacing).round() as usize + 1;
    let h = HeightField::from_fn(nx, ny, spacing, spacing, (0.0, -2.0), |x, _| {
        3.6 + 0.3 * (2.0 * std::f64::consts::PI * x / 2.4).sin()
    })
    .unwrap();
    Scene::new(h, ward()).unwrap().with_samples(samples, samples).unwrap()
}

pub fn unit(v: Vector3<f64>) -> Vector3<f64> {
    v.normalize()
}

pub fn board() -> (CheckerboardSpec, BoardPose) {
    let spec = CheckerboardSpec::new(4, 5, 0.36).unwrap();
    let axis_u = Vector3::new(1.0, 0.0, 0.2).normalize();
    let pose = BoardPose {
        origin: Point3::new(0.85, -0.9, 3.6),
        axis_u,
        axis_v: Vector3::y(),
    };
    (spec, pose)
}

/// Largest distance from an analytically projected corner to its nearest
/// detected corner in the flat-fielded projector view, and the number found.
pub fn projector_corner_error() -> (f64, usize) {
    let rig = desk_rig();
    let (spec, pose) = board();
    let (a, b, c) = pose.plane_coefficients().unwrap();
    let s = scene(|x, y| a * x + b * y + c, BrdfModel::lambertian(1.0).unwrap());
    let t = build_transport_matrix(&s, &rig.rig).unwrap();

    let cam_img = render_board_image(&rig.rig.camera, &spec, &pose, 8);
    let view = &synthesize_projector_views(&t, &[cam_img]).unwrap()[0];
    let white = dual_photograph(&t, &LightFieldVector::filled(t.rows(), 1.0).unwrap()).unwrap();
    let flat: Vec<f64> = view
        .values()
        .iter()
        .zip(white.values())
        .map(|(v, w)| if *w > 0.0 { v / w } else { 0.0 })
        .collect();
    let proj = &rig.rig.projector;
    let found = locate_checkerboard_corners(&flat, proj.width, proj.height);
    let worst = board_corners_world(&spec, &pose)
        .iter()
        .map(|(_, w)| {
            let (u, v) = proj.project(w).unwrap();
            found
                .iter()
                .map(|k| (k.0 - u).hypot(k.1 - v))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    (worst, found.len())
}

/// Cube of side 2 turned 45 degrees about the vertical axis, edge toward the
/// camera, in front of a wall at depth 6.5.
pub fn ward_cube() -> Scene {
    let h = std::f64::consts::SQRT_2;
    scene(
        |x, y| {
            if y.abs() <= 1.0 && (x - 2.2).abs() <= h {
                (5.0 - h + (x - 2.2).abs()).min(6.5)
            } else {
                6.5
            }
        },
        ward(),
    )
}

/// Camera and projector with identical intrinsics, 1.25 units apart: the
/// disparity of a fronto-parallel plane at depth 4 or 10 is a whole number of pixels.
pub fn symmetric_rig() -> RectifiedRig {
    let device = |x: f64| {
        PinholeDevice::looking(64, 64, (96.0, 96.0), (-16.0, 32.0), Matrix3::identity(), Point3::new(x, 0.0, 0.0))
            .unwrap()
    };
    RectifiedRig::canonical(&Rig::new(device(0.0), device(1.25)).unwrap()).unwrap()
}

/// Ward plane tilted so its specular lobe is seen by the camera.
pub fn glossy_plane() -> Scene {
    scene(|x, _| 3.8 - 0.4 * x, ward())
}
