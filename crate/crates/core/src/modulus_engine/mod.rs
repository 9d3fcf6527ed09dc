//! Discrete path modulus on field-weighted grid graphs.

mod graph;
mod modulus;
mod ops;

pub use graph::{stencil_steps, MetricGraph, NodeRect, STENCIL_RADIUS};
pub use modulus::{discrete_modulus, discrete_modulus_seeded, CurveFamily, ModulusOptions, ModulusResult};
pub use ops::{
    annulus_modulus, quadrilateral_modulus_results, qc_estimate, quadrilateral_moduli, reciprocality_report, Annulus, QcEstimate,
    Quad, QuadModuli, ReciprocalityReport,
};
