//! Evaluators for the chain of inequalities leading to the kinetic energy
//! bound `T >= (1 - eps) K_cl int rho^{1+2/d} - C_d eps^{-(3+4/d)} int |grad sqrt(rho)|^2`.
//!
//! Unknown universal constants are never fixed here. Every inequality is
//! affine in its constant, so each report carries the smallest value of that
//! constant for which the instance holds.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::constants::kinetic_constant;
use crate::error::{ensure_positive, Error, Result};
use crate::lattice::{local_kinetic_lower_bound, LocalBoundMode};
use crate::numeric::log_space;
use crate::partition::{group_constant, CubeGroup, DyadicCube, PartitionTree};
use crate::states::{
    gradient_term, local_gradient_term, local_kinetic_energy, local_mass, local_thomas_fermi_term, sqrt_density_mean,
    thomas_fermi_term, DensityField, OrbitalSet,
};

/// Relative tolerance for inequalities that hold exactly in the continuum
/// but are evaluated on a grid.
pub const DISCRETIZATION_TOLERANCE: f64 = 1e-2;

pub const DEFAULT_EPSILON_RANGE: (f64, f64) = (0.05, 0.85);
pub const DEFAULT_EPSILON_POINTS: usize = 17;

/// 17 geometric points on `[0.05, 0.85]`.
pub fn default_epsilon_grid() -> Vec<f64> {
    log_space(DEFAULT_EPSILON_RANGE.0, DEFAULT_EPSILON_RANGE.1, DEFAULT_EPSILON_POINTS)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InequalityId {
    HoffmannOstenhof,
    LocalBound,
    AggregateBound,
    PoincareSobolev,
    MainTheorem,
}

impl InequalityId {
    pub fn as_str(self) -> &'static str {
        match self {
            InequalityId::HoffmannOstenhof => "hoffmann_ostenhof",
            InequalityId::LocalBound => "local_bound",
            InequalityId::AggregateBound => "aggregate_bound",
            InequalityId::PoincareSobolev => "poincare_sobolev",
            InequalityId::MainTheorem => "main_theorem",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct InequalityParams {
    pub epsilon: Option<f64>,
    pub lambda: Option<f64>,
    pub constant_main: Option<f64>,
    pub constant_ps: Option<f64>,
    pub constant_local: Option<f64>,
    pub constant_group: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CubeTerm {
    pub corner: Vec<f64>,
    pub side: f64,
    pub depth: u32,
    pub mass: f64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InequalityReport {
    pub id: InequalityId,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`.
    pub slack: f64,
    /// Smallest value of the free constant for which this instance holds;
    /// `None` when the inequality has no free constant.
    pub minimal_constant: Option<f64>,
    pub params: InequalityParams,
    /// Named intermediate quantities.
    pub components: BTreeMap<&'static str, f64>,
    pub per_cube: Vec<CubeTerm>,
    /// `u_Q`, the mean of `sqrt(rho)` over the cube.
    pub sqrt_density_mean: Option<f64>,
    pub flags: Vec<&'static str>,
}

impl InequalityReport {
    fn new(id: InequalityId, lhs: f64, rhs: f64) -> Self {
        Self {
            id,
            lhs,
            rhs,
            slack: lhs - rhs,
            minimal_constant: None,
            params: InequalityParams::default(),
            components: BTreeMap::new(),
            per_cube: Vec::new(),
            sqrt_density_mean: None,
            flags: Vec::new(),
        }
    }

    /// True when `slack >= -tolerance * |lhs|`.
    pub fn holds_within(&self, tolerance: f64) -> bool {
        self.slack >= -tolerance * self.lhs.abs()
    }
}

/// Smallest `c >= 0` with `lhs >= base - c * factor`, for `factor >= 0`.
fn minimal_affine_constant(lhs: f64, base: f64, factor: f64) -> f64 {
    let deficit = base - lhs;
    if deficit <= 0.0 {
        0.0
    } else if factor > 0.0 {
        deficit / factor
    } else {
        f64::INFINITY
    }
}

/// `Tr(-Delta gamma) >= int |grad sqrt(rho)|^2`.
pub fn hoffmann_ostenhof_report(state: &OrbitalSet) -> InequalityReport {
    let check = crate::states::hoffmann_ostenhof_check(state);
    InequalityReport::new(InequalityId::HoffmannOstenhof, check.lhs, check.rhs)
}

/// Compares the kinetic energy inside `cube` with the Neumann lower bound
/// for the mass it carries. In closed-form mode the minimal local constant
/// is reported as well.
pub fn local_bound_check(state: &OrbitalSet, cube: &DyadicCube, mode: LocalBoundMode) -> Result<InequalityReport> {
    let d = state.dimension();
    let df = d as f64;
    let lhs = local_kinetic_energy(state, cube)?;
    let mass = local_mass(state.density(), cube)?;
    let volume = cube.volume();
    let bound = local_kinetic_lower_bound(mass, volume, d, mode)?;
    let mut report = InequalityReport::new(InequalityId::LocalBound, lhs, bound.bound);
    report.components.insert("mass", mass);
    report.components.insert("volume", volume);
    report.components.insert("mu_star", bound.mu_star);
    if let LocalBoundMode::BlyClosedForm { c_loc } = mode {
        report.params.constant_local = Some(c_loc);
        let k = kinetic_constant(d, 1)?;
        let scale = k * volume.powf(-2.0 / df);
        report.minimal_constant =
            Some(minimal_affine_constant(lhs, scale * mass.powf(1.0 + 2.0 / df), scale * mass.powf(1.0 + 1.0 / df)));
    }
    Ok(report)
}

/// `T >= K_cl (1 - C Lambda^{-1/d}) sum_Q |Q|^{-2/d} M_Q^{1+2/d}` over the
/// leaves of `tree`, with `C = 4^{d+2}/3`. The minimal constant is the
/// smallest `C` for which the instance holds.
pub fn aggregate_bound(state: &OrbitalSet, tree: &PartitionTree, groups: &[CubeGroup]) -> Result<InequalityReport> {
    let d = state.dimension();
    if tree.dimension != d {
        return Err(Error::InvalidArgument(format!(
            "tree dimension {} does not match state dimension {d}",
            tree.dimension
        )));
    }
    let df = d as f64;
    let lambda = tree.lambda;
    let constant = group_constant(d);
    let k = kinetic_constant(d, 1)?;
    let factor = 1.0 - constant * lambda.powf(-1.0 / df);
    let rho = state.density();

    let mut per_cube = Vec::new();
    let mut sum = 0.0;
    for g in groups {
        for cube in &g.members {
            let term = cube.volume().powf(-2.0 / df) * cube.mass.powf(1.0 + 2.0 / df);
            sum += term;
            per_cube.push(CubeTerm {
                corner: cube.corner.clone(),
                side: cube.side,
                depth: cube.depth,
                mass: local_mass(rho, cube)?,
                lhs: local_kinetic_energy(state, cube)?,
                rhs: k * factor * term,
            });
        }
    }
    let lhs = state.kinetic_energy();
    let mut report = InequalityReport::new(InequalityId::AggregateBound, lhs, k * factor * sum);
    report.params.lambda = Some(lambda);
    report.params.constant_group = Some(constant);
    report.minimal_constant = Some(minimal_affine_constant(lhs, k * sum, k * lambda.powf(-1.0 / df) * sum));
    report.components.insert("cube_sum", sum);
    report.per_cube = per_cube;
    if lambda > state.trace() {
        report.flags.push("lambda_exceeds_trace");
    }
    if factor <= 0.0 {
        report.flags.push("trivial_rhs");
    }
    Ok(report)
}

/// `(lhs, rhs)` of `(1+eps)^{p-1} (a^p + eps^{1-p} b^p) >= (a+b)^p`.
pub fn holder_pointwise_check(a: f64, b: f64, epsilon: f64, p: f64) -> (f64, f64) {
    let lhs = (1.0 + epsilon).powf(p - 1.0) * (a.powf(p) + epsilon.powf(1.0 - p) * b.powf(p));
    (lhs, (a + b).powf(p))
}

/// `|Q|^{-2/d} M^{1+2/d} >= (1+eps)^{-(1+4/d)} int_Q rho^{1+2/d}
///  - C eps^{-(1+4/d)} (int_Q |grad sqrt(rho)|^2) M^{2/d}`.
///
/// `rhs` is evaluated at the minimal constant; the two pieces are in
/// `components`.
pub fn poincare_sobolev_step(rho: &DensityField, cube: &DyadicCube, epsilon: f64) -> Result<InequalityReport> {
    ensure_positive("epsilon", epsilon)?;
    let df = rho.dimension() as f64;
    let mass = local_mass(rho, cube)?;
    let u_q = sqrt_density_mean(rho, cube)?;
    let lhs = cube.volume().powf(-2.0 / df) * mass.powf(1.0 + 2.0 / df);
    let (tf, grad) =
        if mass > 0.0 { (local_thomas_fermi_term(rho, cube)?, local_gradient_term(rho, cube)?) } else { (0.0, 0.0) };
    let power = 1.0 + 4.0 / df;
    let tf_piece = (1.0 + epsilon).powf(-power) * tf;
    let grad_piece = epsilon.powf(-power) * grad * mass.powf(2.0 / df);
    let minimal = minimal_affine_constant(lhs, tf_piece, grad_piece);
    let rhs = if minimal.is_finite() { tf_piece - minimal * grad_piece } else { tf_piece };
    let mut report = InequalityReport::new(InequalityId::PoincareSobolev, lhs, rhs);
    report.params.epsilon = Some(epsilon);
    report.params.constant_ps = Some(minimal);
    report.minimal_constant = Some(minimal);
    report.sqrt_density_mean = Some(u_q);
    report.components.insert("mass", mass);
    report.components.insert("thomas_fermi_piece", tf_piece);
    report.components.insert("gradient_piece", grad_piece);
    Ok(report)
}

/// Smallest `C_d >= 0` with
/// `T >= (1 - eps) K_cl TF - C_d eps^{-(3+4/d)} G`.
pub fn minimal_main_constant(kinetic: f64, thomas_fermi: f64, gradient: f64, d: usize, epsilon: f64) -> Result<f64> {
    let df = d as f64;
    let k = kinetic_constant(d, 1)?;
    Ok(minimal_affine_constant(kinetic, (1.0 - epsilon) * k * thomas_fermi, epsilon.powf(-(3.0 + 4.0 / df)) * gradient))
}

pub fn main_inequality_check(state: &OrbitalSet, epsilon: f64, constant: f64) -> Result<InequalityReport> {
    ensure_positive("epsilon", epsilon)?;
    if constant.is_nan() || constant < 0.0 {
        return Err(Error::InvalidArgument(format!("constant must be non-negative, got {constant}")));
    }
    let d = state.dimension();
    let df = d as f64;
    let rho = state.density();
    let kinetic = state.kinetic_energy();
    let tf = thomas_fermi_term(rho);
    let grad = gradient_term(rho);
    let k = kinetic_constant(d, 1)?;
    let rhs = (1.0 - epsilon) * k * tf - constant * epsilon.powf(-(3.0 + 4.0 / df)) * grad;
    let mut report = InequalityReport::new(InequalityId::MainTheorem, kinetic, rhs);
    report.params.epsilon = Some(epsilon);
    report.params.constant_main = Some(constant);
    report.minimal_constant = Some(minimal_main_constant(kinetic, tf, grad, d, epsilon)?);
    report.components.insert("thomas_fermi", tf);
    report.components.insert("gradient", grad);
    if epsilon >= 1.0 {
        report.flags.push("trivial_rhs");
    }
    let trace = state.trace();
    if trace > 0.0 && epsilon < trace.powf(-1.0 / df) {
        report.flags.push("epsilon_below_trace_scale");
    }
    Ok(report)
}

/// `T / int rho^{1+2/d}`.
pub fn lt_ratio(state: &OrbitalSet) -> Result<f64> {
    let tf = thomas_fermi_term(state.density());
    if tf <= 0.0 {
        return Err(Error::ZeroMass);
    }
    Ok(state.kinetic_energy() / tf)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CalibrationRow {
    pub epsilon: f64,
    /// Maximum over the corpus of the minimal main constant.
    pub constant: f64,
    /// `constant * eps^{3+4/d}`.
    pub scaled: f64,
}

/// Corpus maximum of the minimal main constant at each `eps`.
pub fn calibrate_constant(corpus: &[OrbitalSet], epsilon_grid: &[f64]) -> Result<Vec<CalibrationRow>> {
    let d = match corpus.first() {
        Some(s) => s.dimension(),
        None => return Err(Error::InvalidArgument("corpus is empty".into())),
    };
    if corpus.iter().any(|s| s.dimension() != d) {
        return Err(Error::InvalidArgument("corpus mixes dimensions".into()));
    }
    if epsilon_grid.is_empty() || epsilon_grid.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::InvalidArgument("epsilon grid must be non-empty and inside (0, 1)".into()));
    }
    let terms: Vec<(f64, f64, f64)> = corpus
        .par_iter()
        .map(|s| {
            let rho = s.density();
            (s.kinetic_energy(), thomas_fermi_term(rho), gradient_term(rho))
        })
        .collect();
    let df = d as f64;
    epsilon_grid
        .iter()
        .map(|&epsilon| {
            let mut constant: f64 = 0.0;
            for &(t, tf, g) in &terms {
                constant = constant.max(minimal_main_constant(t, tf, g, d, epsilon)?);
            }
            Ok(CalibrationRow { epsilon, constant, scaled: constant * epsilon.powf(3.0 + 4.0 / df) })
        })
        .collect()
}

/// `max / min` of the positive scaled constants; `None` if there are none.
pub fn scaled_band(rows: &[CalibrationRow]) -> Option<f64> {
    let active: Vec<f64> = rows.iter().map(|r| r.scaled).filter(|&s| s > 0.0 && s.is_finite()).collect();
    if active.is_empty() {
        return None;
    }
    let max = active.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = active.iter().copied().fold(f64::INFINITY, f64::min);
    Some(max / min)
}
