use num_complex::Complex64;
use serde::Serialize;

use super::solve::{solve_beltrami, Anchor, BeltramiProblem, MU_LIMIT};
use crate::error::{Error, Result};
use crate::norm_field::{
    beltrami_field, dilatation_fields, global_dilatations, pushforward_norms, ComplexGrid,
    DilatationField, GlobalDilatations, GridMap, NormField,
};

/// Isothermal coordinates of a norm field and their verification data.
#[derive(Debug, Clone)]
pub struct IsothermalResult {
    /// The coordinate map `f`; its inverse is the isothermal parametrization.
    pub coords: GridMap,
    /// Beltrami coefficient of the field pushed forward by `coords`.
    pub residual_mu: ComplexGrid,
    /// Dilatations of the parametrization `coords^-1` at every node.
    pub dilatations: DilatationField,
    pub global: GlobalDilatations,
    /// Relative least-squares residual of the Beltrami solve.
    pub solver_residual: f64,
    /// The input Beltrami field.
    pub mu: ComplexGrid,
    /// Nodes of the input field with a degenerate distance-ellipse search.
    pub degenerate_nodes: usize,
    /// The pushforward field, node norms `M o (D f)^-1`.
    pub pushforward: NormField,
}

impl IsothermalResult {
    pub fn max_residual_mu(&self) -> f64 {
        self.residual_mu.max_abs()
    }
}

/// Isothermal coordinates normalized so the two bottom corners stay fixed.
pub fn isothermal_coordinates(field: &NormField) -> Result<IsothermalResult> {
    let d = *field.domain();
    let anchors = vec![Anchor::fixed(&d, (0, 0)), Anchor::fixed(&d, (d.nx() - 1, 0))];
    isothermal_coordinates_with(field, anchors)
}

/// Isothermal coordinates under an explicit anchor normalization.
pub fn isothermal_coordinates_with(field: &NormField, anchors: Vec<Anchor>) -> Result<IsothermalResult> {
    let bf = beltrami_field(field);
    if bf.max_abs() > MU_LIMIT {
        return Err(Error::Precondition(format!(
            "field Beltrami coefficient {} exceeds {MU_LIMIT}",
            bf.max_abs()
        )));
    }
    let degenerate_nodes = bf.degenerate.iter().filter(|d| **d).count();
    let problem = BeltramiProblem::new(bf.mu.clone(), anchors)?;
    let sol = solve_beltrami(&problem)?;
    let pushforward = pushforward_norms(field, &sol.map)?;
    let residual_mu = beltrami_field(&pushforward).mu;
    let dilatations = dilatation_fields(&pushforward);
    let global = global_dilatations(&dilatations);
    Ok(IsothermalResult {
        coords: sol.map,
        residual_mu,
        dilatations,
        global,
        solver_residual: sol.residual,
        mu: bf.mu,
        degenerate_nodes,
        pushforward,
    })
}

/// Conformality of the transition between two coordinate systems of one field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UniquenessReport {
    pub max_coefficient: f64,
    pub mean_coefficient: f64,
}

/// Cell-wise Beltrami coefficient of the transition `f2 o f1^-1`, from
/// `D f2 (D f1)^-1` on every cell.
pub fn uniqueness_check(first: &IsothermalResult, second: &IsothermalResult) -> Result<UniquenessReport> {
    let d = *first.coords.domain();
    if d != *second.coords.domain() {
        return Err(Error::Precondition("isothermal results live on different grids".into()));
    }
    let mut max = 0.0f64;
    let mut sum = 0.0;
    let mut count = 0usize;
    for j in 0..d.ny() - 1 {
        for i in 0..d.nx() - 1 {
            let d1 = first.coords.cell_differential(i, j);
            let d2 = second.coords.cell_differential(i, j);
            let inv = d1.inverse().ok_or(Error::FoldedCell { i, j })?;
            let mu: Complex64 = (d2 * inv).beltrami_coefficient();
            let m = mu.norm();
            max = max.max(m);
            sum += m;
            count += 1;
        }
    }
    Ok(UniquenessReport {
        max_coefficient: max,
        mean_coefficient: sum / count as f64,
    })
}
