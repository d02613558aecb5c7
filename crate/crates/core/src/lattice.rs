//! Riesz means of box Laplacian spectra by exhaustive lattice-point
//! enumeration, the Neumann binomial decomposition, the Berezin-Li-Yau
//! comparison, and the mu-optimized local kinetic lower bound.
//!
//! Eigenvalues are measured in units where the unit-cube spectrum is
//! `pi^2 |p|^2`, with `p` running over `N^k` (Dirichlet) or `N_0^k` (Neumann).

use std::f64::consts::PI;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::{eigenvalue_constant_from_kinetic, kinetic_constant, unit_ball_volume};
use crate::error::{ensure_positive, Error, Result};
use crate::numeric::{binomial, golden_section_max_log, log_space, CompensatedSum};

const PI2: f64 = PI * PI;

pub const DEFAULT_POINT_CAP: u64 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Lattice `N^k`, `N = {1, 2, ...}`.
    Dirichlet,
    /// Lattice `N_0^k`, `N_0 = {0, 1, 2, ...}`.
    Neumann,
}

impl Boundary {
    fn first_index(self) -> u64 {
        match self {
            Boundary::Dirichlet => 1,
            Boundary::Neumann => 0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Boundary::Dirichlet => "dirichlet",
            Boundary::Neumann => "neumann",
        }
    }
}

impl std::str::FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dirichlet" => Ok(Boundary::Dirichlet),
            "neumann" => Ok(Boundary::Neumann),
            other => Err(Error::InvalidArgument(format!("unknown boundary {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RieszMeanQuery {
    pub dimension: usize,
    pub mu: f64,
    pub boundary: Boundary,
}

impl RieszMeanQuery {
    pub fn dirichlet(dimension: usize, mu: f64) -> Self {
        Self { dimension, mu, boundary: Boundary::Dirichlet }
    }

    pub fn neumann(dimension: usize, mu: f64) -> Self {
        Self { dimension, mu, boundary: Boundary::Neumann }
    }
}

/// `value = sum_p [pi^2 |p|^2 - mu]_-` and the number of points with
/// `pi^2 |p|^2 < mu`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RieszMeanResult {
    pub value: f64,
    pub contributing_points: u64,
}

pub fn riesz_mean(query: &RieszMeanQuery) -> Result<RieszMeanResult> {
    riesz_mean_capped(query, DEFAULT_POINT_CAP)
}

pub fn riesz_mean_capped(query: &RieszMeanQuery, cap: u64) -> Result<RieszMeanResult> {
    let mu = ensure_positive("mu", query.mu)?;
    let k = query.dimension;
    let start = query.boundary.first_index();

    if k == 0 {
        return Ok(RieszMeanResult { value: -mu, contributing_points: 1 });
    }

    // Every p in N^k with |p| < R - sqrt(k) owns a unit cube inside the
    // orthant ball of radius R, so this volume bounds the count from below.
    let radius = mu.sqrt() / PI;
    let inner = radius - (k as f64).sqrt();
    if inner > 0.0 {
        let lower = unit_ball_volume(k)? * inner.powi(k as i32) / 2f64.powi(k as i32);
        if lower > cap as f64 {
            return Err(Error::EnumerationCap { cap });
        }
    }

    let threshold = mu / PI2;
    let axis_max = radius.floor() as u64;
    if start > axis_max {
        return Ok(RieszMeanResult { value: 0.0, contributing_points: 0 });
    }

    let partials: Vec<(CompensatedSum, u64)> = (start..=axis_max)
        .into_par_iter()
        .map(|lead| {
            let mut acc = CompensatedSum::new();
            let mut count = 0u64;
            let sq = lead * lead;
            if (sq as f64) < threshold {
                enumerate(k - 1, sq, start, threshold, mu, &mut acc, &mut count);
            }
            (acc, count)
        })
        .collect();

    let mut total = CompensatedSum::new();
    let mut count = 0u64;
    for (acc, c) in partials {
        total.merge(acc);
        count += c;
        if count > cap {
            return Err(Error::EnumerationCap { cap });
        }
    }
    Ok(RieszMeanResult { value: total.value(), contributing_points: count })
}

// Lexicographic walk over the remaining coordinates of points below threshold.
fn enumerate(
    remaining: usize,
    partial: u64,
    start: u64,
    threshold: f64,
    mu: f64,
    acc: &mut CompensatedSum,
    count: &mut u64,
) {
    if remaining == 0 {
        acc.add(PI2 * partial as f64 - mu);
        *count += 1;
        return;
    }
    let mut p = start;
    loop {
        let sq = partial + p * p;
        if (sq as f64) >= threshold {
            break;
        }
        enumerate(remaining - 1, sq, start, threshold, mu, acc, count);
        p += 1;
    }
}

/// Returns `(lhs, rhs)` where `lhs` is the Neumann Riesz mean over `N_0^d`
/// and `rhs = sum_k binom(d, k) * (Dirichlet Riesz mean over N^k)`.
pub fn neumann_binomial_decomposition_check(d: usize, mu: f64) -> Result<(f64, f64)> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    let lhs = riesz_mean(&RieszMeanQuery::neumann(d, mu))?.value;
    let mut rhs = CompensatedSum::new();
    for k in 0..=d {
        let term = riesz_mean(&RieszMeanQuery::dirichlet(k, mu))?.value;
        rhs.add(binomial(d, k) as f64 * term);
    }
    Ok((lhs, rhs.value()))
}

/// Semiclassical Riesz-mean constant `L_cl(k)` for one spin state.
/// `k = 0` gives 1: the single point `p = ()` contributes exactly `-mu`.
pub fn riesz_constant(k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let kinetic = kinetic_constant(k, 1).expect("k >= 1");
    eigenvalue_constant_from_kinetic(k, kinetic).expect("K_cl > 0")
}

/// `-L_cl(k) mu^{1 + k/2}`.
pub fn semiclassical_riesz_bound(k: usize, mu: f64) -> f64 {
    -riesz_constant(k) * mu.powf(1.0 + k as f64 / 2.0)
}

/// Dirichlet Riesz mean minus its Berezin-Li-Yau lower bound; non-negative.
pub fn berezin_li_yau_gap(k: usize, mu: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let value = riesz_mean(&RieszMeanQuery::dirichlet(k, mu))?.value;
    Ok(value - semiclassical_riesz_bound(k, mu))
}

/// Ratio of the Dirichlet Riesz mean to its semiclassical value. An empty
/// sum gives 0.
pub fn weyl_ratio(k: usize, mu: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let value = riesz_mean(&RieszMeanQuery::dirichlet(k, mu))?.value;
    Ok(value / semiclassical_riesz_bound(k, mu))
}

/// Sorted distinct Neumann eigenvalues `|p|^2` (in units of `pi^2`) below a
/// threshold, with cumulative multiplicities and sums. Evaluates the Neumann
/// Riesz mean at any `mu` up to the threshold in `O(log n)`.
#[derive(Clone, Debug)]
pub struct NeumannSpectrum {
    levels: Vec<u64>,
    cumulative_count: Vec<u64>,
    cumulative_sum: Vec<u128>,
    mu_max: f64,
}

impl NeumannSpectrum {
    pub fn up_to(d: usize, mu_max: f64, cap: u64) -> Result<Self> {
        let threshold = mu_max / PI2;
        let axis_max = threshold.sqrt().floor() as u64;
        let mut multiplicity = std::collections::BTreeMap::<u64, u64>::new();
        let mut total = 0u64;
        collect_levels(d, 0, axis_max, threshold, &mut multiplicity, &mut total, cap)?;
        let mut levels = Vec::with_capacity(multiplicity.len());
        let mut cumulative_count = Vec::with_capacity(multiplicity.len());
        let mut cumulative_sum = Vec::with_capacity(multiplicity.len());
        let (mut count, mut sum) = (0u64, 0u128);
        for (level, mult) in multiplicity {
            count += mult;
            sum += level as u128 * mult as u128;
            levels.push(level);
            cumulative_count.push(count);
            cumulative_sum.push(sum);
        }
        Ok(Self { levels, cumulative_count, cumulative_sum, mu_max })
    }

    /// `sum_{p in N_0^d} [pi^2 |p|^2 - mu]_-` for `mu <= mu_max`.
    pub fn riesz_mean(&self, mu: f64) -> f64 {
        debug_assert!(mu <= self.mu_max * (1.0 + 1e-12));
        let below = self.levels.partition_point(|&s| PI2 * (s as f64) < mu);
        if below == 0 {
            return 0.0;
        }
        let count = self.cumulative_count[below - 1] as f64;
        let sum = self.cumulative_sum[below - 1] as f64;
        PI2 * sum - mu * count
    }

    /// Distinct eigenvalues `pi^2 |p|^2` below the threshold.
    pub fn eigenvalues(&self) -> impl Iterator<Item = f64> + '_ {
        self.levels.iter().map(|&s| PI2 * s as f64)
    }
}

fn collect_levels(
    remaining: usize,
    partial: u64,
    axis_max: u64,
    threshold: f64,
    out: &mut std::collections::BTreeMap<u64, u64>,
    total: &mut u64,
    cap: u64,
) -> Result<()> {
    if remaining == 0 {
        *out.entry(partial).or_default() += 1;
        *total += 1;
        if *total > cap {
            return Err(Error::EnumerationCap { cap });
        }
        return Ok(());
    }
    for p in 0..=axis_max {
        let sq = partial + p * p;
        if (sq as f64) >= threshold {
            break;
        }
        collect_levels(remaining - 1, sq, axis_max, threshold, out, total, cap)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LocalBoundMode {
    /// Exact Neumann Riesz mean, maximized over `mu`.
    ExactRiesz,
    /// `K_cl V^{-2/d} [M^{1+2/d} - c_loc M^{1+1/d}]`.
    BlyClosedForm { c_loc: f64 },
}

impl LocalBoundMode {
    /// Closed form with the calibrated constant for dimension `d`.
    pub fn calibrated(d: usize) -> Self {
        LocalBoundMode::BlyClosedForm { c_loc: calibrated_local_constant(d) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalBound {
    pub bound: f64,
    /// Maximizing `mu`; 0 when the supremum is the `mu -> 0` limit.
    pub mu_star: f64,
}

const MU_FLOOR: f64 = 1e-3;
const SCAN_POINTS: usize = 64;
const REL_WIDTH: f64 = 1e-10;

fn mu_ceiling(mass: f64, d: usize) -> f64 {
    (PI2 * (2.0 * mass).powf(2.0 / d as f64) * 10.0).max(MU_FLOOR * 1e3)
}

/// Lower bound on `Tr[-Delta_Q gamma_Q]` for a cube of volume `volume`
/// carrying `mass`, from the explicit Neumann spectrum of the cube.
pub fn local_kinetic_lower_bound(mass: f64, volume: f64, d: usize, mode: LocalBoundMode) -> Result<LocalBound> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    if mass.is_nan() || mass < 0.0 || !mass.is_finite() {
        return Err(Error::InvalidArgument(format!("mass must be non-negative, got {mass}")));
    }
    ensure_positive("volume", volume)?;
    if mass == 0.0 {
        return Ok(LocalBound { bound: 0.0, mu_star: 0.0 });
    }
    let df = d as f64;
    let scale = volume.powf(-2.0 / df);
    match mode {
        LocalBoundMode::ExactRiesz => {
            let hi = mu_ceiling(mass, d);
            let spectrum = NeumannSpectrum::up_to(d, hi, DEFAULT_POINT_CAP)?;
            let objective = |mu: f64| mu * mass + spectrum.riesz_mean(mu);
            let (mu, value) = golden_section_max_log(objective, MU_FLOOR, hi, SCAN_POINTS, REL_WIDTH);
            // The mu -> 0 limit of the objective is 0.
            if value > 0.0 {
                Ok(LocalBound { bound: scale * value, mu_star: mu })
            } else {
                Ok(LocalBound { bound: 0.0, mu_star: 0.0 })
            }
        }
        LocalBoundMode::BlyClosedForm { c_loc } => {
            let k = kinetic_constant(d, 1)?;
            let bound = k * scale * (mass.powf(1.0 + 2.0 / df) - c_loc * mass.powf(1.0 + 1.0 / df));
            // Legendre dual of mu M - L mu^{1 + d/2}.
            let mu_star = (mass / ((1.0 + df / 2.0) * riesz_constant(d))).powf(2.0 / df);
            Ok(LocalBound { bound, mu_star })
        }
    }
}

/// `sup_mu [mu M - sum_{k=0}^{d} binom(d,k) L_cl(k) mu^{1+k/2}]`, the
/// supremum of the semiclassical surrogate of the Neumann objective.
pub fn surrogate_supremum(mass: f64, d: usize) -> f64 {
    let coefficients: Vec<(f64, f64)> =
        (0..=d).map(|k| (binomial(d, k) as f64 * riesz_constant(k), 1.0 + k as f64 / 2.0)).collect();
    let g = |mu: f64| mu * mass - coefficients.iter().map(|(c, e)| c * mu.powf(*e)).sum::<f64>();
    let (_, value) = golden_section_max_log(g, 1e-9, mu_ceiling(mass, d), SCAN_POINTS, 1e-13);
    value.max(0.0)
}

/// Smallest constant `c` with
/// `surrogate_supremum(M) >= K_cl [M^{1+2/d} - c M^{1+1/d}]` at this mass.
pub fn local_constant_at(mass: f64, d: usize) -> f64 {
    let df = d as f64;
    let k = kinetic_constant(d, 1).expect("d >= 1");
    let sup = surrogate_supremum(mass, d);
    (k * mass.powf(1.0 + 2.0 / df) - sup) / (k * mass.powf(1.0 + 1.0 / df))
}

/// Mass grid used for calibrating the closed-form local constant.
pub const CALIBRATION_MASS_RANGE: (f64, f64) = (1.0, 1e6);
pub const CALIBRATION_POINTS: usize = 241;

/// The closed-form local constant: the maximum of [`local_constant_at`] over
/// a logarithmic mass grid on `[1, 10^6]`. Cached per dimension.
pub fn calibrated_local_constant(d: usize) -> f64 {
    static CACHE: OnceLock<[f64; 3]> = OnceLock::new();
    let compute = |d: usize| {
        log_space(CALIBRATION_MASS_RANGE.0, CALIBRATION_MASS_RANGE.1, CALIBRATION_POINTS)
            .into_iter()
            .map(|m| local_constant_at(m, d))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    match d {
        1..=3 => CACHE.get_or_init(|| [compute(1), compute(2), compute(3)])[d - 1],
        _ => compute(d),
    }
}
