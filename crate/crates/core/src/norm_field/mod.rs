//! Fields of norms over rectangular grids, grid maps between them, and the
//! Beltrami and dilatation fields they induce.

mod domain;
mod field;
mod grid_map;
mod io;

pub use domain::GridDomain;
pub(crate) use field::pushforward_norms;
pub use field::{
    beltrami_field, blended_field, dilatation_fields, global_dilatations, lp_field,
    pullback_field, riemannian_field, smooth_step, BeltramiField, ComplexGrid, DilatationField,
    GlobalDilatations, NormField, ANISOTROPY_LIMIT,
};
pub use grid_map::{GridMap, ImageLocation};
pub use io::{field_from_json, field_to_json, FieldFile};
