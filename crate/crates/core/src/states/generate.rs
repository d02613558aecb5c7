//! Seeded corpus generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::spectral::{analyze_all, synthesize_all, SineTransforms};
use super::{Grid, OrbitalSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// The `count` lowest Dirichlet modes of the box, fully occupied.
    BoxEigenstates { count: usize },
    /// `count` orthonormalized random band-limited functions, fully occupied.
    RandomSlater { count: usize, seed: u64 },
    /// `count` orthonormalized displaced Gaussians, fully occupied.
    GaussianBumps { count: usize, seed: u64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::BoxEigenstates { .. } => "box",
            Family::RandomSlater { .. } => "slater",
            Family::GaussianBumps { .. } => "bumps",
        }
    }

    pub fn count(&self) -> usize {
        match *self {
            Family::BoxEigenstates { count }
            | Family::RandomSlater { count, .. }
            | Family::GaussianBumps { count, .. } => count,
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match *self {
            Family::BoxEigenstates { .. } => None,
            Family::RandomSlater { seed, .. } | Family::GaussianBumps { seed, .. } => Some(seed),
        }
    }

    /// Parses `box`, `slater`, or `bumps`.
    pub fn from_name(name: &str, count: usize, seed: u64) -> Result<Self> {
        match name {
            "box" => Ok(Family::BoxEigenstates { count }),
            "slater" => Ok(Family::RandomSlater { count, seed }),
            "bumps" => Ok(Family::GaussianBumps { count, seed }),
            other => Err(Error::InvalidArgument(format!("unknown family {other:?}"))),
        }
    }
}

/// Highest sine index per axis used by the random families: a fixed physical
/// band so that refining the grid leaves the states unchanged.
pub fn band_limit(d: usize, n: usize) -> usize {
    let band = match d {
        1 => 32,
        2 => 12,
        _ => 8,
    };
    band.min(n / 2).max(1)
}

pub fn generate(family: &Family, grid: &Grid) -> Result<OrbitalSet> {
    match *family {
        Family::BoxEigenstates { count } => box_eigenstates(grid, count),
        Family::RandomSlater { count, seed } => random_slater(grid, count, seed),
        Family::GaussianBumps { count, seed } => gaussian_bumps(grid, count, seed),
    }
}

/// Multi-indices `p in [1, n-1]^d` of the `count` lowest Dirichlet modes,
/// ordered by `sum_a (p_a / L_a)^2` then lexicographically.
pub fn box_modes(grid: &Grid, count: usize) -> Result<Vec<Vec<usize>>> {
    let d = grid.dimension();
    let available = (grid.n - 1).pow(d as u32);
    if count > available {
        return Err(Error::Capacity { requested: count, available });
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let energy = |p: &[usize]| -> f64 { p.iter().zip(&grid.sides).map(|(&k, l)| (k as f64 / l).powi(2)).sum() };
    let mut pmax = ((count as f64).powf(1.0 / d as f64).ceil() as usize + 1).min(grid.n - 1);
    loop {
        let mut modes = Vec::new();
        let mut idx = vec![1usize; d];
        'outer: loop {
            modes.push(idx.clone());
            for a in (0..d).rev() {
                idx[a] += 1;
                if idx[a] <= pmax {
                    continue 'outer;
                }
                idx[a] = 1;
            }
            break;
        }
        modes.sort_by(|a, b| energy(a).total_cmp(&energy(b)).then_with(|| a.cmp(b)));
        if modes.len() >= count {
            let cutoff = energy(&modes[count - 1]);
            // Any mode outside the candidate box has some p_a >= pmax + 1.
            let complete = pmax == grid.n - 1
                || (0..d).all(|a| {
                    let outside: f64 = ((pmax + 1) as f64 / grid.sides[a]).powi(2)
                        + (0..d).filter(|&b| b != a).map(|b| grid.sides[b].powi(-2)).sum::<f64>();
                    outside > cutoff
                });
            if complete {
                modes.truncate(count);
                return Ok(modes);
            }
        }
        pmax = (pmax * 2).min(grid.n - 1);
    }
}

fn box_eigenstates(grid: &Grid, count: usize) -> Result<OrbitalSet> {
    let modes = box_modes(grid, count)?;
    let d = grid.dimension();
    let n = grid.n;
    let norm: f64 = grid.sides.iter().map(|l| (2.0 / l).sqrt()).product();
    let orbitals = modes
        .iter()
        .map(|p| {
            let axis_values: Vec<Vec<f64>> = (0..d)
                .map(|a| {
                    (0..n).map(|j| (p[a] as f64 * std::f64::consts::PI * (j as f64 + 0.5) / n as f64).sin()).collect()
                })
                .collect();
            (0..grid.len())
                .map(|flat| {
                    let idx = grid.multi_index(flat);
                    norm * (0..d).map(|a| axis_values[a][idx[a]]).product::<f64>()
                })
                .collect()
        })
        .collect();
    OrbitalSet::new(grid.clone(), orbitals, vec![1.0; count])
}

fn band_capacity(grid: &Grid) -> usize {
    band_limit(grid.dimension(), grid.n).pow(grid.dimension() as u32)
}

fn in_band(grid: &Grid, flat: usize, band: usize) -> bool {
    grid.multi_index(flat).iter().all(|&i| i < band)
}

fn random_slater(grid: &Grid, count: usize, seed: u64) -> Result<OrbitalSet> {
    let available = band_capacity(grid);
    if count > available {
        return Err(Error::Capacity { requested: count, available });
    }
    let band = band_limit(grid.dimension(), grid.n);
    let transforms = SineTransforms::new(grid.n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = band as f64 / 2.0;
    let mut draw = |rng: &mut ChaCha8Rng| {
        let coefficients: Vec<f64> = (0..grid.len())
            .map(|flat| {
                if !in_band(grid, flat, band) {
                    return 0.0;
                }
                // Index i holds sine mode i + 1.
                let k2: f64 = grid.multi_index(flat).iter().map(|&i| ((i + 1) as f64).powi(2)).sum();
                let z: f64 = StandardNormal.sample(rng);
                z * (-k2 / (2.0 * width * width)).exp()
            })
            .collect();
        synthesize_all(&coefficients, grid, &transforms)
    };
    let orbitals = orthonormalize(grid, count, &mut rng, &mut draw)?;
    OrbitalSet::new(grid.clone(), orbitals, vec![1.0; count])
}

fn gaussian_bumps(grid: &Grid, count: usize, seed: u64) -> Result<OrbitalSet> {
    let available = band_capacity(grid);
    if count > available {
        return Err(Error::Capacity { requested: count, available });
    }
    let d = grid.dimension();
    let band = band_limit(d, grid.n);
    let transforms = SineTransforms::new(grid.n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Widths for which the Gaussian spectrum beyond the band is below e^{-12}.
    let sigma_min = 24f64.sqrt() / (std::f64::consts::PI * band as f64);
    let mut draw = |rng: &mut ChaCha8Rng| {
        let center: Vec<f64> = (0..d).map(|_| rng.random_range(0.25..0.75)).collect();
        let sigma = sigma_min * rng.random_range(1.0..2.0);
        let samples: Vec<f64> = (0..grid.len())
            .map(|flat| {
                let idx = grid.multi_index(flat);
                let mut r2 = 0.0;
                let mut window = 1.0;
                for a in 0..d {
                    let t = (idx[a] as f64 + 0.5) / grid.n as f64;
                    r2 += (t - center[a]).powi(2);
                    window *= (std::f64::consts::PI * t).sin();
                }
                window * (-r2 / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let mut coefficients = analyze_all(&samples, grid, &transforms);
        for (flat, c) in coefficients.iter_mut().enumerate() {
            if !in_band(grid, flat, band) {
                *c = 0.0;
            }
        }
        synthesize_all(&coefficients, grid, &transforms)
    };
    let orbitals = orthonormalize(grid, count, &mut rng, &mut draw)?;
    let occupations = vec![1.0; count];
    OrbitalSet::new(grid.clone(), orbitals, occupations)
}

const MAX_REDRAWS: usize = 64;

// Modified Gram-Schmidt, applied twice; nearly dependent draws are replaced.
fn orthonormalize<F>(grid: &Grid, count: usize, rng: &mut ChaCha8Rng, draw: &mut F) -> Result<Vec<Vec<f64>>>
where
    F: FnMut(&mut ChaCha8Rng) -> Vec<f64>,
{
    let w = grid.cell_volume();
    let dot = |a: &[f64], b: &[f64]| w * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(count);
    let mut redraws = 0;
    while basis.len() < count {
        let mut v = draw(rng);
        let original = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm <= 1e-6 * original || norm == 0.0 {
            redraws += 1;
            if redraws > MAX_REDRAWS {
                return Err(Error::InvalidArgument("could not draw linearly independent orbitals".into()));
            }
            continue;
        }
        v.iter_mut().for_each(|x| *x /= norm);
        basis.push(v);
    }
    Ok(basis)
}
