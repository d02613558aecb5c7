//! Semiclassical constants: the Thomas-Fermi kinetic constant `K_cl(d, q)`,
//! the unit-ball volume, and the conversion to the eigenvalue-sum constant
//! `L_cl(d)` used by the Riesz-mean comparisons.

use std::f64::consts::PI;

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{ensure_positive, Error, Result};

/// The closed-form constants for one `(d, q)` pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SemiclassicalConstants {
    pub dimension: usize,
    pub spin_states: usize,
    pub unit_ball_volume: f64,
    pub kinetic_constant: f64,
    pub eigenvalue_constant: f64,
}

impl SemiclassicalConstants {
    pub fn new(dimension: usize, spin_states: usize) -> Result<Self> {
        let kinetic_constant = kinetic_constant(dimension, spin_states)?;
        Ok(Self {
            dimension,
            spin_states,
            unit_ball_volume: unit_ball_volume(dimension)?,
            kinetic_constant,
            eigenvalue_constant: eigenvalue_constant_from_kinetic(dimension, kinetic_constant)?,
        })
    }

    /// Relative error of `K -> L -> K`.
    pub fn round_trip_error(&self) -> f64 {
        let back = kinetic_constant_from_eigenvalue(self.dimension, self.eigenvalue_constant)
            .expect("constants are positive by construction");
        (back - self.kinetic_constant).abs() / self.kinetic_constant
    }
}

fn check_dimension(d: usize) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(d as f64)
}

/// Volume `pi^{d/2} / Gamma(d/2 + 1)` of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> Result<f64> {
    let d = check_dimension(d)?;
    Ok(PI.powf(d / 2.0) / gamma(d / 2.0 + 1.0))
}

/// `K_cl = d/(d+2) * 4 pi^2 / (q omega_d)^{2/d}`.
pub fn kinetic_constant(d: usize, q: usize) -> Result<f64> {
    let df = check_dimension(d)?;
    if q == 0 {
        return Err(Error::InvalidArgument("spin_states must be at least 1".into()));
    }
    let omega = unit_ball_volume(d)?;
    Ok(df / (df + 2.0) * 4.0 * PI * PI / (q as f64 * omega).powf(2.0 / df))
}

/// `L = (1 + d/2)^{-1} [(1 + 2/d) K]^{-d/2}`.
pub fn eigenvalue_constant_from_kinetic(d: usize, kinetic: f64) -> Result<f64> {
    let df = check_dimension(d)?;
    ensure_positive("kinetic constant", kinetic)?;
    Ok(((1.0 + 2.0 / df) * kinetic).powf(-df / 2.0) / (1.0 + df / 2.0))
}

/// Inverse of [`eigenvalue_constant_from_kinetic`]:
/// `K = (1 + 2/d)^{-1} [(1 + d/2) L]^{-2/d}`.
pub fn kinetic_constant_from_eigenvalue(d: usize, eigenvalue: f64) -> Result<f64> {
    let df = check_dimension(d)?;
    ensure_positive("eigenvalue constant", eigenvalue)?;
    Ok(((1.0 + df / 2.0) * eigenvalue).powf(-2.0 / df) / (1.0 + 2.0 / df))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Frozen from a 30-digit mpmath evaluation of the closed forms.
    const K1: f64 = 3.289_868_133_696_453;
    const K3: f64 = 9.115_599_744_691_194;
    const K3_Q2: f64 = 5.742_468_000_376_384;
    const L1: f64 = 0.212_206_590_789_193_78;
    const L2: f64 = 0.039_788_735_772_973_834;
    const L3: f64 = 0.006_754_745_576_155_852;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn unit_ball_volumes() {
        assert!(rel(unit_ball_volume(1).unwrap(), 2.0) < 1e-13);
        assert!(rel(unit_ball_volume(2).unwrap(), PI) < 1e-13);
        assert!(rel(unit_ball_volume(3).unwrap(), 4.0 * PI / 3.0) < 1e-13);
        assert!(unit_ball_volume(0).is_err());
    }

    #[test]
    fn kinetic_constants_match_oracle() {
        assert!(rel(kinetic_constant(1, 1).unwrap(), K1) < 1e-12);
        assert!(rel(kinetic_constant(1, 1).unwrap(), PI * PI / 3.0) < 1e-12);
        assert!(rel(kinetic_constant(3, 1).unwrap(), K3) < 1e-12);
        assert!(rel(kinetic_constant(3, 1).unwrap(), 0.6 * (6.0 * PI * PI).powf(2.0 / 3.0)) < 1e-12);
        assert!(rel(kinetic_constant(3, 2).unwrap(), K3_Q2) < 1e-12);
        assert!(kinetic_constant(0, 1).is_err());
        assert!(kinetic_constant(1, 0).is_err());
    }

    #[test]
    fn eigenvalue_constants_match_oracle() {
        let l = |d| eigenvalue_constant_from_kinetic(d, kinetic_constant(d, 1).unwrap()).unwrap();
        assert!(rel(l(1), L1) < 1e-12);
        assert!(rel(l(1), 2.0 / (3.0 * PI)) < 1e-12);
        assert!(rel(l(2), L2) < 1e-12);
        assert!(rel(l(2), 1.0 / (8.0 * PI)) < 1e-12);
        assert!(rel(l(3), L3) < 1e-12);
        assert!(rel(l(3), 1.0 / (15.0 * PI * PI)) < 1e-12);
        assert!(eigenvalue_constant_from_kinetic(1, 0.0).is_err());
        assert!(eigenvalue_constant_from_kinetic(1, -1.0).is_err());
    }

    #[test]
    fn spin_scaling_and_round_trip() {
        for d in 1..=3 {
            let k1 = kinetic_constant(d, 1).unwrap();
            let k2 = kinetic_constant(d, 2).unwrap();
            assert!(rel(k2, k1 * 2f64.powf(-2.0 / d as f64)) < 1e-12);
            assert!(k2 < k1);
            for q in 1..=2 {
                let c = SemiclassicalConstants::new(d, q).unwrap();
                assert!(c.round_trip_error() <= 1e-12);
                assert!(c.unit_ball_volume > 0.0 && c.eigenvalue_constant > 0.0);
            }
        }
    }
}
