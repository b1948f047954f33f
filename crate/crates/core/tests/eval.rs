mod common;

use common::{desk_rig, glossy_plane, ruled_sine, scene, ward_cube};
use rfdepth_core::eval::{lambertian_baseline, rms_error};
use rfdepth_core::reconstruct::{forward_irradiance, reconstruct_depthmap, render_depth_map, ReconstructionParams};
use rfdepth_core::{build_transport_matrix, BrdfModel, Error, Scene};

fn ordering(s: &Scene) -> (f64, f64) {
    let rig = desk_rig();
    let p = ReconstructionParams::default();
    let t = build_transport_matrix(s, &rig.rig).unwrap();
    let e = forward_irradiance(s, &rig, &t).unwrap();
    let truth = render_depth_map(s, &rig).unwrap();
    let ours = rms_error(&reconstruct_depthmap(&e, &t, &rig, &p).unwrap(), &truth).unwrap();
    // the diffuse part of the Ward model is the most favorable constant
    let fr = 0.2 / std::f64::consts::PI;
    let base = rms_error(&lambertian_baseline(&e, &t, &rig, fr, &p).unwrap(), &truth).unwrap();
    (ours.rms_percent, base.rms_percent)
}

#[test]
fn reflectance_field_beats_lambertian_on_anisotropic_scenes() {
    for (name, s) in [("sine", ruled_sine()), ("glossy", glossy_plane()), ("cube", ward_cube())] {
        let (ours, base) = ordering(&s);
        assert!(ours < base, "{name}: {ours} vs {base}");
    }
}

#[test]
fn matching_constant_reproduces_lambertian_reconstruction() {
    let rig = desk_rig();
    let p = ReconstructionParams::default();
    let albedo = 0.7;
    let s = scene(|x, _| 3.0 + 0.3 * x, BrdfModel::lambertian(albedo).unwrap());
    let t = build_transport_matrix(&s, &rig.rig).unwrap();
    let e = forward_irradiance(&s, &rig, &t).unwrap();
    let ours = reconstruct_depthmap(&e, &t, &rig, &p).unwrap();
    let base = lambertian_baseline(&e, &t, &rig, albedo / std::f64::consts::PI, &p).unwrap();
    assert_eq!(ours.mask(), base.mask());
    for (a, b) in ours.depths().iter().zip(base.depths()).filter(|(a, _)| a.is_finite()) {
        assert!((a - b).abs() <= 1e-6 * a.abs(), "{a} vs {b}");
    }
}

#[test]
fn zero_constant_masks_everything() {
    let rig = desk_rig();
    let s = glossy_plane();
    let t = build_transport_matrix(&s, &rig.rig).unwrap();
    let e = forward_irradiance(&s, &rig, &t).unwrap();
    let z = lambertian_baseline(&e, &t, &rig, 0.0, &ReconstructionParams::default()).unwrap();
    assert!(z.mask().iter().all(|ok| !ok));
    let truth = render_depth_map(&s, &rig).unwrap();
    assert!(matches!(rms_error(&z, &truth), Err(Error::NoOverlap)));
    assert!(lambertian_baseline(&e, &t, &rig, -1.0, &ReconstructionParams::default()).is_err());
}
