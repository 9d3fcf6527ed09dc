//! Least-squares Beltrami solver and the isothermal-coordinates pipeline.

mod banded;
mod isothermal;
mod solve;

pub use isothermal::{
    isothermal_coordinates, isothermal_coordinates_with, uniqueness_check, IsothermalResult,
    UniquenessReport,
};
pub use solve::{
    radial_bump, self_consistency, solve_beltrami, Anchor, BeltramiProblem, BeltramiSolution, MU_LIMIT,
    RESIDUAL_WARNING,
};
