//! Depth from reflectance: light transport simulation, dual photography and
//! shape recovery for camera-projector rigs.

pub mod brdf;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod reconstruct;
pub mod scene;
pub mod transport;
pub mod types;

pub use brdf::{eval_brdf, rotate_about_normal, BrdfModel, TangentFrame};
pub use error::{Error, Result};
pub use geometry::{triangulate, PinholeDevice, Rig};
pub use scene::Scene;
pub use transport::{
    apply_transport, build_transport_matrix, dual_photograph, reciprocity_deviation,
    render_impulse_response, TransportMatrix,
};
pub use types::{
    direction_between, heightfield_gradient, Direction, HeightField, LightFieldVector, Point3,
    SurfaceNormal,
};
