//! Finite-rank one-body density matrices on Dirichlet box grids.
//!
//! A state is a list of real orbitals sampled at the cell centres of an
//! `n^d` grid, orthonormal in the midpoint inner product, with occupations
//! in `[0, 1]`. Only one spin state is modelled; `q` enters through the
//! constants alone.
//!
//! Quadrature is the midpoint rule on cell centres throughout, so every
//! integral is a cell sum and additivity over grid-aligned cubes is exact in
//! the discrete model. Kinetic energies come from the sine interpolant of the
//! orbitals: Parseval for totals, derivative samples at the cell centres for
//! local (per-cube) energies.

mod generate;
pub mod io;
pub(crate) mod spectral;

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::numeric::CompensatedSum;
use crate::partition::DyadicCube;
use spectral::{fold_lines, map_lines, SineTransforms};

pub use generate::{band_limit, box_modes, generate, Family};

/// Tolerance on the discrete orthonormality of orbitals.
pub const ORTHONORMALITY_TOLERANCE: f64 = 1e-10;

/// Relative density floor below which a finite-difference stencil of
/// `sqrt(rho)` is treated as vacuum.
pub const DENSITY_FLOOR: f64 = 1e-14;

/// Axis-aligned box with `n` cells per axis. Cells are stored row-major
/// (last axis fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub corner: Vec<f64>,
    pub sides: Vec<f64>,
    pub n: usize,
}

impl Grid {
    pub fn new(corner: Vec<f64>, sides: Vec<f64>, n: usize) -> Result<Self> {
        let d = corner.len();
        if !(1..=3).contains(&d) || sides.len() != d {
            return Err(Error::InvalidArgument(format!(
                "box must have dimension 1..=3 with matching sides (corner {}, sides {})",
                d,
                sides.len()
            )));
        }
        for &s in &sides {
            ensure_positive("box side", s)?;
        }
        if n < 2 {
            return Err(Error::InvalidArgument(format!("grid needs at least 2 cells per axis, got {n}")));
        }
        Ok(Self { corner, sides, n })
    }

    /// `[0, 1]^d` with `n` cells per axis.
    pub fn unit(d: usize, n: usize) -> Result<Self> {
        Self::new(vec![0.0; d], vec![1.0; d], n)
    }

    pub fn dimension(&self) -> usize {
        self.corner.len()
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dimension() as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_size(&self, axis: usize) -> f64 {
        self.sides[axis] / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dimension()).map(|a| self.cell_size(a)).product()
    }

    pub fn volume(&self) -> f64 {
        self.sides.iter().product()
    }

    pub(crate) fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dimension() - 1 - axis) as u32)
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        (0..self.dimension()).map(|a| (flat / self.stride(a)) % self.n).collect()
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().enumerate().map(|(a, &i)| i * self.stride(a)).sum()
    }

    pub fn cell_center(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .into_iter()
            .enumerate()
            .map(|(a, i)| self.corner[a] + (i as f64 + 0.5) * self.cell_size(a))
            .collect()
    }

    /// The same grid with every length multiplied by `s`.
    pub fn dilated(&self, s: f64) -> Grid {
        Grid {
            corner: self.corner.iter().map(|c| c * s).collect(),
            sides: self.sides.iter().map(|l| l * s).collect(),
            n: self.n,
        }
    }

    /// Cells covered by `cube`, clipped to the grid. Fails unless the cube's
    /// faces lie on cell boundaries.
    pub fn cell_range(&self, cube: &DyadicCube) -> Result<CellRange> {
        let d = self.dimension();
        if cube.corner.len() != d {
            return Err(Error::InvalidArgument(format!(
                "cube dimension {} does not match grid dimension {d}",
                cube.corner.len()
            )));
        }
        let misaligned = || Error::MisalignedCube { corner: cube.corner.clone(), side: cube.side };
        let mut lo = Vec::with_capacity(d);
        let mut hi = Vec::with_capacity(d);
        for a in 0..d {
            let h = self.cell_size(a);
            let start = (cube.corner[a] - self.corner[a]) / h;
            let width = cube.side / h;
            let (s, w) = (start.round(), width.round());
            if (start - s).abs() > 1e-8 || (width - w).abs() > 1e-8 || w < 1.0 {
                return Err(misaligned());
            }
            let (s, e) = (s as i64, s as i64 + w as i64);
            lo.push(s.clamp(0, self.n as i64) as usize);
            hi.push(e.clamp(0, self.n as i64) as usize);
        }
        Ok(CellRange { lo, hi })
    }

    fn for_each_in(&self, range: &CellRange, mut f: impl FnMut(usize)) {
        if range.is_empty() {
            return;
        }
        let d = self.dimension();
        let mut idx = range.lo.clone();
        loop {
            f(self.flat_index(&idx));
            let mut axis = d;
            loop {
                if axis == 0 {
                    return;
                }
                axis -= 1;
                idx[axis] += 1;
                if idx[axis] < range.hi[axis] {
                    break;
                }
                idx[axis] = range.lo[axis];
            }
        }
    }

    /// `sum_{cells in range} field * cell_volume`, compensated.
    pub(crate) fn integrate_over(&self, field: &[f64], range: &CellRange) -> f64 {
        let mut acc = CompensatedSum::new();
        self.for_each_in(range, |i| acc.add(field[i]));
        acc.value() * self.cell_volume()
    }

    pub(crate) fn integrate(&self, field: &[f64]) -> f64 {
        field.iter().copied().sum::<CompensatedSum>().value() * self.cell_volume()
    }
}

/// Half-open cell index box `[lo, hi)` per axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellRange {
    pub lo: Vec<usize>,
    pub hi: Vec<usize>,
}

impl CellRange {
    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l >= h)
    }

    pub fn cell_count(&self) -> usize {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h.saturating_sub(*l)).product()
    }
}

/// A finite-rank density matrix `gamma = sum_i lambda_i |u_i><u_i|`.
#[derive(Clone, Debug)]
pub struct OrbitalSet {
    grid: Grid,
    orbitals: Vec<Vec<f64>>,
    occupations: Vec<f64>,
    cache: StateCache,
}

#[derive(Clone, Debug, Default)]
struct StateCache {
    kinetic: OnceLock<f64>,
    kinetic_cells: OnceLock<Vec<f64>>,
    density: OnceLock<DensityField>,
}

impl OrbitalSet {
    /// Validates occupations, shapes, and discrete orthonormality.
    pub fn new(grid: Grid, orbitals: Vec<Vec<f64>>, occupations: Vec<f64>) -> Result<Self> {
        if orbitals.len() != occupations.len() {
            return Err(Error::InvalidArgument(format!(
                "{} orbitals but {} occupations",
                orbitals.len(),
                occupations.len()
            )));
        }
        for (index, &value) in occupations.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Occupation { index, value });
            }
        }
        if let Some(bad) = orbitals.iter().find(|u| u.len() != grid.len()) {
            return Err(Error::InvalidArgument(format!(
                "orbital has {} samples, grid has {} cells",
                bad.len(),
                grid.len()
            )));
        }
        let deviation = orthonormality_deviation(&grid, &orbitals);
        if deviation > ORTHONORMALITY_TOLERANCE {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(Self::from_parts(grid, orbitals, occupations))
    }

    fn from_parts(grid: Grid, orbitals: Vec<Vec<f64>>, occupations: Vec<f64>) -> Self {
        Self { grid, orbitals, occupations, cache: StateCache::default() }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.grid.dimension()
    }

    pub fn orbitals(&self) -> &[Vec<f64>] {
        &self.orbitals
    }

    pub fn occupations(&self) -> &[f64] {
        &self.occupations
    }

    pub fn rank(&self) -> usize {
        self.orbitals.len()
    }

    pub fn spin_states(&self) -> usize {
        1
    }

    /// `Tr gamma = sum_i lambda_i`.
    pub fn trace(&self) -> f64 {
        self.occupations.iter().copied().sum::<CompensatedSum>().value()
    }

    /// Same orbitals with every occupation multiplied by `t in [0, 1]`.
    pub fn with_scaled_occupations(&self, t: f64) -> Result<Self> {
        let occupations = self.occupations.iter().map(|l| l * t).collect();
        Self::new(self.grid.clone(), self.orbitals.clone(), occupations)
    }

    /// The state dilated by `s`: lengths times `s`, orbital values times
    /// `s^{-d/2}` so that normalization is kept.
    pub fn dilated(&self, s: f64) -> Result<Self> {
        ensure_positive("dilation", s)?;
        let factor = s.powf(-(self.dimension() as f64) / 2.0);
        let orbitals = self.orbitals.iter().map(|u| u.iter().map(|v| v * factor).collect()).collect();
        Ok(Self::from_parts(self.grid.dilated(s), orbitals, self.occupations.clone()))
    }

    /// Cached [`density`].
    pub fn density(&self) -> &DensityField {
        self.cache.density.get_or_init(|| density(self))
    }

    /// Cached [`kinetic_energy`].
    pub fn kinetic_energy(&self) -> f64 {
        *self.cache.kinetic.get_or_init(|| kinetic_energy(self))
    }

    /// Per-cell kinetic energy density `sum_i lambda_i |grad u_i|^2` from the
    /// derivative samples of the sine interpolants.
    pub fn kinetic_density(&self) -> &[f64] {
        self.cache.kinetic_cells.get_or_init(|| kinetic_cells(self))
    }
}

fn orthonormality_deviation(grid: &Grid, orbitals: &[Vec<f64>]) -> f64 {
    let w = grid.cell_volume();
    (0..orbitals.len())
        .into_par_iter()
        .map(|i| {
            (0..=i)
                .map(|j| {
                    let dot = w * orbitals[i].iter().zip(&orbitals[j]).map(|(a, b)| a * b).sum::<f64>();
                    (dot - if i == j { 1.0 } else { 0.0 }).abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// The one-body density `rho_gamma` sampled at cell centres.
#[derive(Clone, Debug)]
pub struct DensityField {
    grid: Grid,
    values: Vec<f64>,
    mass: f64,
    gradient_cells: OnceLock<Vec<f64>>,
}

impl DensityField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "density has {} samples, grid has {} cells",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| v.is_nan() || **v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("density must be finite and non-negative, found {v}")));
        }
        let mass = grid.integrate(&values);
        Ok(Self { grid, values, mass, gradient_cells: OnceLock::new() })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn dimension(&self) -> usize {
        self.grid.dimension()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `int rho`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Per-cell `|grad sqrt(rho)|^2`, see [`gradient_term`].
    pub fn gradient_density(&self) -> &[f64] {
        self.gradient_cells.get_or_init(|| sqrt_gradient_cells(self))
    }
}

/// `rho(x) = sum_i lambda_i u_i(x)^2`.
pub fn density(state: &OrbitalSet) -> DensityField {
    let mut values = vec![0.0; state.grid.len()];
    for (u, &lambda) in state.orbitals.iter().zip(&state.occupations) {
        for (r, v) in values.iter_mut().zip(u) {
            *r += lambda * v * v;
        }
    }
    DensityField::new(state.grid.clone(), values).expect("density of a valid state is non-negative")
}

/// `Tr(-Delta gamma) = sum_i lambda_i int |grad u_i|^2`, by Parseval on the
/// sine coefficients of each orbital.
pub fn kinetic_energy(state: &OrbitalSet) -> f64 {
    let grid = &state.grid;
    let transforms = SineTransforms::new(grid.n);
    let cross_section = |axis: usize| grid.cell_volume() / grid.cell_size(axis);
    let per_orbital: Vec<f64> = state
        .orbitals
        .par_iter()
        .zip(&state.occupations)
        .map(|(u, &lambda)| {
            if lambda == 0.0 {
                return 0.0;
            }
            let mut acc = CompensatedSum::new();
            for axis in 0..grid.dimension() {
                let mut axis_acc = CompensatedSum::new();
                fold_lines(u, grid, axis, |line| axis_acc.add(transforms.line_kinetic(line, grid.sides[axis])));
                acc.add(axis_acc.value() * cross_section(axis));
            }
            lambda * acc.value()
        })
        .collect();
    per_orbital.into_iter().sum::<CompensatedSum>().value()
}

fn kinetic_cells(state: &OrbitalSet) -> Vec<f64> {
    let grid = &state.grid;
    let transforms = SineTransforms::new(grid.n);
    let contributions: Vec<Vec<f64>> = state
        .orbitals
        .par_iter()
        .zip(&state.occupations)
        .filter(|(_, &lambda)| lambda != 0.0)
        .map(|(u, &lambda)| {
            let mut cells = vec![0.0; u.len()];
            for axis in 0..grid.dimension() {
                let mut deriv = u.clone();
                map_lines(&mut deriv, grid, axis, |line| transforms.differentiate(line, grid.sides[axis]));
                for (c, g) in cells.iter_mut().zip(&deriv) {
                    *c += lambda * g * g;
                }
            }
            cells
        })
        .collect();
    let mut total = vec![0.0; grid.len()];
    for cells in contributions {
        for (t, c) in total.iter_mut().zip(cells) {
            *t += c;
        }
    }
    total
}

/// `sum_i lambda_i int_Q |grad u_i|^2` by midpoint quadrature of the
/// derivative samples over the cells of `cube`.
pub fn local_kinetic_energy(state: &OrbitalSet, cube: &DyadicCube) -> Result<f64> {
    let range = state.grid.cell_range(cube)?;
    Ok(state.grid.integrate_over(state.kinetic_density(), &range))
}

// Per-cell |grad v|^2 for v = sqrt(rho), axis by axis. Face differences
// f_j = (v_j - v_{j-1}) / h use the odd reflection v_{-1} = -v_0 at the
// walls, and a face whose two density values both lie below the floor has
// f_j = 0. With a = (f_j^2 + f_{j+1}^2) / 2 (the face energy shared evenly by
// its two cells, so wall faces get trapezoidal weight) and the centred
// difference c = (f_j + f_{j+1}) / 2, a cell contributes (4a - c^2) / 3, which
// cancels the O(h^2) error of either stencil alone. Where f_j and f_{j+1}
// differ in sign (extrema and kinks of v) the cell keeps `a`.
fn sqrt_gradient_cells(rho: &DensityField) -> Vec<f64> {
    let grid = &rho.grid;
    let n = grid.n;
    let max = rho.values.iter().copied().fold(0.0, f64::max);
    let floor = DENSITY_FLOOR * max;
    let sqrt: Vec<f64> = rho.values.iter().map(|r| r.sqrt()).collect();
    let mut cells = vec![0.0; grid.len()];
    if max <= 0.0 {
        return cells;
    }
    let mut faces = vec![0.0; n + 1];
    for axis in 0..grid.dimension() {
        let h = grid.cell_size(axis);
        let stride = grid.stride(axis);
        for base in 0..cells.len() {
            if !(base / stride).is_multiple_of(n) {
                continue;
            }
            let at = |j: usize| base + j * stride;
            for (k, face) in faces.iter_mut().enumerate() {
                let (lo, hi) = (k.saturating_sub(1), k.min(n - 1));
                *face = if rho.values[at(lo)] < floor && rho.values[at(hi)] < floor {
                    0.0
                } else if k == 0 {
                    2.0 * sqrt[at(0)] / h
                } else if k == n {
                    -2.0 * sqrt[at(n - 1)] / h
                } else {
                    (sqrt[at(hi)] - sqrt[at(lo)]) / h
                };
            }
            for j in 0..n {
                let (left, right) = (faces[j], faces[j + 1]);
                let a = 0.5 * (left * left + right * right);
                cells[at(j)] += if left * right > 0.0 {
                    let c = 0.5 * (left + right);
                    (4.0 * a - c * c) / 3.0
                } else {
                    a
                };
            }
        }
    }
    cells
}

/// `int |grad sqrt(rho)|^2` from finite differences of `sqrt(rho)`; stencils
/// whose density values both lie below `DENSITY_FLOOR * max(rho)` contribute
/// nothing.
pub fn gradient_term(rho: &DensityField) -> f64 {
    rho.grid.integrate(rho.gradient_density())
}

pub fn local_gradient_term(rho: &DensityField, cube: &DyadicCube) -> Result<f64> {
    let range = rho.grid.cell_range(cube)?;
    Ok(rho.grid.integrate_over(rho.gradient_density(), &range))
}

fn thomas_fermi_cells(rho: &DensityField) -> Vec<f64> {
    let exponent = 1.0 + 2.0 / rho.dimension() as f64;
    rho.values.iter().map(|r| r.powf(exponent)).collect()
}

/// `int rho^{1+2/d}` by the midpoint rule.
pub fn thomas_fermi_term(rho: &DensityField) -> f64 {
    rho.grid.integrate(&thomas_fermi_cells(rho))
}

pub fn local_thomas_fermi_term(rho: &DensityField, cube: &DyadicCube) -> Result<f64> {
    let range = rho.grid.cell_range(cube)?;
    Ok(rho.grid.integrate_over(&thomas_fermi_cells(rho), &range))
}

/// `int_Q rho` by cell summation.
pub fn local_mass(rho: &DensityField, cube: &DyadicCube) -> Result<f64> {
    let range = rho.grid.cell_range(cube)?;
    Ok(rho.grid.integrate_over(&rho.values, &range))
}

/// `u_Q = |Q|^{-1} int_Q sqrt(rho)`.
pub fn sqrt_density_mean(rho: &DensityField, cube: &DyadicCube) -> Result<f64> {
    let range = rho.grid.cell_range(cube)?;
    let sqrt: Vec<f64> = rho.values.iter().map(|r| r.sqrt()).collect();
    Ok(rho.grid.integrate_over(&sqrt, &range) / cube.volume())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HoffmannOstenhof {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

/// `Tr(-Delta gamma) >= int |grad sqrt(rho)|^2`.
pub fn hoffmann_ostenhof_check(state: &OrbitalSet) -> HoffmannOstenhof {
    let lhs = state.kinetic_energy();
    let rhs = gradient_term(state.density());
    HoffmannOstenhof { lhs, rhs, slack: lhs - rhs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    fn sine_state(n: usize, modes: &[usize]) -> OrbitalSet {
        let grid = Grid::unit(1, n).unwrap();
        let orbitals = modes
            .iter()
            .map(|&m| (0..n).map(|j| 2f64.sqrt() * (m as f64 * PI * (j as f64 + 0.5) / n as f64).sin()).collect())
            .collect();
        OrbitalSet::new(grid, orbitals, vec![1.0; modes.len()]).unwrap()
    }

    fn cube(corner: Vec<f64>, side: f64) -> DyadicCube {
        DyadicCube::new(corner, side, 0, 0.0)
    }

    #[test]
    fn density_of_ground_state() {
        let s = sine_state(128, &[1]);
        let rho = s.density();
        assert!(rel(rho.mass(), 1.0) < 1e-12);
        for (i, r) in rho.values().iter().enumerate() {
            let x = (i as f64 + 0.5) / 128.0;
            assert!((r - 2.0 * (PI * x).sin().powi(2)).abs() < 1e-12);
        }
        assert!(rel(s.density().mass(), 1.0) < 1e-10);
        let two = sine_state(64, &[1, 4]);
        assert!(rel(two.density().mass(), 2.0) < 1e-12);
    }

    #[test]
    fn empty_state_has_zero_density() {
        let empty = OrbitalSet::new(Grid::unit(2, 8).unwrap(), vec![], vec![]).unwrap();
        assert!(empty.density().values().iter().all(|&r| r == 0.0));
        assert_eq!(empty.kinetic_energy(), 0.0);
        assert_eq!(gradient_term(empty.density()), 0.0);
    }

    #[test]
    fn kinetic_energy_of_sine_modes() {
        assert!(rel(sine_state(256, &[1]).kinetic_energy(), PI * PI) < 1e-10);
        for m in [2usize, 5, 17] {
            assert!(rel(sine_state(256, &[m]).kinetic_energy(), (m * m) as f64 * PI * PI) < 1e-10);
        }
        let s = sine_state(64, &[1, 2]).with_scaled_occupations(0.0).unwrap();
        assert_eq!(s.kinetic_energy(), 0.0);
    }

    #[test]
    fn local_kinetic_energy_splits() {
        let s = sine_state(256, &[1]);
        let full = local_kinetic_energy(&s, &cube(vec![0.0], 1.0)).unwrap();
        assert!(rel(full, s.kinetic_energy()) < 1e-10);
        let left = local_kinetic_energy(&s, &cube(vec![0.0], 0.5)).unwrap();
        let right = local_kinetic_energy(&s, &cube(vec![0.5], 0.5)).unwrap();
        assert!(rel(left, PI * PI / 2.0) < 1e-10);
        assert!(rel(right, PI * PI / 2.0) < 1e-10);
        assert!(matches!(local_kinetic_energy(&s, &cube(vec![0.001], 0.5)), Err(Error::MisalignedCube { .. })));
    }

    #[test]
    fn gradient_term_of_ground_state() {
        let s = sine_state(1024, &[1]);
        let g = gradient_term(s.density());
        assert!(rel(g, PI * PI) < 1e-8, "{g}");
        assert!(g <= s.kinetic_energy());
    }

    #[test]
    fn combined_stencil_never_exceeds_the_symbol() {
        // Fourier symbol of (4 face - centred) / 3 against theta^2 on (0, pi].
        for i in 1..=10_000 {
            let theta = PI * i as f64 / 10_000.0;
            let symbol = (16.0 * (theta / 2.0).sin().powi(2) - theta.sin().powi(2)) / 3.0;
            assert!(symbol <= theta * theta);
        }
    }

    #[test]
    fn rank_one_states_with_nodes_keep_the_inequality() {
        for n in [256, 333, 1024] {
            for m in 2..=12 {
                let ho = hoffmann_ostenhof_check(&sine_state(n, &[m]));
                assert!(ho.slack >= -1e-12 * ho.lhs, "n={n} m={m} {ho:?}");
            }
        }
        for seed in 0..8 {
            let grid = Grid::unit(1, 512).unwrap();
            let s = generate(&Family::RandomSlater { count: 1, seed }, &grid).unwrap();
            let ho = hoffmann_ostenhof_check(&s);
            assert!(ho.slack >= -1e-12 * ho.lhs, "seed={seed} {ho:?}");
        }
    }

    #[test]
    fn gradient_term_of_positive_bump_is_accurate() {
        let grid = Grid::unit(1, 1024).unwrap();
        let s = generate(&Family::GaussianBumps { count: 1, seed: 3 }, &grid).unwrap();
        let ho = hoffmann_ostenhof_check(&s);
        assert!(ho.slack.abs() < 1e-6 * ho.lhs, "{ho:?}");
    }

    #[test]
    fn gradient_term_vanishes_on_flat_region() {
        let n = 32;
        let grid = Grid::unit(1, n).unwrap();
        let values: Vec<f64> = (0..n).map(|j| if (8..24).contains(&j) { 3.0 } else { 0.0 }).collect();
        let rho = DensityField::new(grid, values).unwrap();
        let interior = local_gradient_term(&rho, &cube(vec![10.0 / 32.0], 4.0 / 32.0)).unwrap();
        assert_eq!(interior, 0.0);
        assert!(gradient_term(&rho) > 0.0);
    }

    #[test]
    fn gradient_term_between_zero_and_kinetic() {
        let s = sine_state(512, &[1, 2]);
        let g = gradient_term(s.density());
        assert!(g > 0.0 && g < s.kinetic_energy());
    }

    #[test]
    fn thomas_fermi_examples() {
        // int_0^1 (2 sin^2 pi x)^3 = 8 * 5/16
        let s = sine_state(256, &[1]);
        assert!(rel(thomas_fermi_term(s.density()), 2.5) < 1e-12);
        let grid = Grid::new(vec![0.0, 0.0], vec![2.0, 2.0], 8).unwrap();
        let rho = DensityField::new(grid.clone(), vec![0.0; 64]).unwrap();
        assert_eq!(thomas_fermi_term(&rho), 0.0);
        let rho = DensityField::new(grid, vec![1.5; 64]).unwrap();
        assert!(rel(thomas_fermi_term(&rho), 1.5f64.powi(2) * 4.0) < 1e-13);
    }

    #[test]
    fn local_mass_examples() {
        let s = sine_state(128, &[1]);
        let rho = s.density();
        assert!(rel(local_mass(rho, &cube(vec![0.0], 1.0)).unwrap(), rho.mass()) < 1e-14);
        assert!(rel(local_mass(rho, &cube(vec![0.0], 0.5)).unwrap(), rho.mass() / 2.0) < 1e-12);
    }

    #[test]
    fn hoffmann_ostenhof_rank_one_is_tight() {
        let ho = hoffmann_ostenhof_check(&sine_state(1024, &[1]));
        assert!(ho.slack >= 0.0);
        assert!(ho.slack / ho.lhs < 1e-6);
        let many = sine_state(512, &(1..=10).collect::<Vec<_>>());
        assert!(hoffmann_ostenhof_check(&many).slack > 0.0);
        let half = many.with_scaled_occupations(0.5).unwrap();
        assert!(hoffmann_ostenhof_check(&half).slack > 0.0);
    }

    #[test]
    fn rejects_invalid_states() {
        let grid = Grid::unit(1, 8).unwrap();
        let u = vec![1.0; 8];
        assert!(matches!(OrbitalSet::new(grid.clone(), vec![u.clone()], vec![1.5]), Err(Error::Occupation { .. })));
        assert!(matches!(
            OrbitalSet::new(grid.clone(), vec![u.clone(), u.clone()], vec![1.0, 1.0]),
            Err(Error::NotOrthonormal { .. })
        ));
        assert!(OrbitalSet::new(grid, vec![vec![1.0; 7]], vec![1.0]).is_err());
        assert!(Grid::unit(4, 8).is_err());
    }
}
