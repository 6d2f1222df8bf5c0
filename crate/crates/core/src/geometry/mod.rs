//! Convex surfaces of revolution and the exterior parallel-surface foliation.

mod field;
mod frame;
pub mod quadrature;
mod surface;

pub use field::GridField;
pub use frame::{add_laplacian_phi, frame_at, integrate, laplacian, laplacian_theta, FoliationFrame};
pub use surface::{
    build_surface, ConvexSurface, Resolution, RingGeometry, SurfaceKind, SurfaceSpec,
    PROFILE_OVERSAMPLING,
};
