//! Planar normed spaces: sampled gauges, linear maps between them, and
//! Banach–Mazur geometry.

mod banach_mazur;
mod linear;
mod norm;
mod ops;
pub mod optimize;

pub use banach_mazur::{
    banach_mazur_distance, distance_ellipse, euclidean_distance, john_ellipse,
    twisted_distortion, BanachMazur, DistanceEllipse, Ellipse2, MU_CAP,
};
pub use linear::{LinearMap2, Mat2};
pub use norm::{Norm2, Norm2Json, DEFAULT_SAMPLES};
pub(crate) use norm::is_spd;
pub use ops::{
    linear_dilatations, linear_distortion, linear_jacobian, operator_norm,
    operator_norm_from_euclidean, operator_norm_to_euclidean, Dilatations,
};
