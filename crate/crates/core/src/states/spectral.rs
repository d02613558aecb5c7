//! Sine-series transforms on cell-centred Dirichlet grids.
//!
//! A grid function with samples `u_j` at `x_j = (j + 1/2) h` is identified
//! with its sine interpolant `u(x) = sum_{m=1}^{n} c_m sin(m pi x / L)`, which
//! vanishes on both walls. Forward/backward maps are DST-II/DST-III and the
//! derivative at the cell centres is a DCT-III.

use std::sync::Arc;

use rustdct::{DctPlanner, TransformType2And3};

use super::Grid;

#[derive(Clone)]
pub(crate) struct SineTransforms {
    n: usize,
    dst2: Arc<dyn TransformType2And3<f64>>,
    dst3: Arc<dyn TransformType2And3<f64>>,
    dct3: Arc<dyn TransformType2And3<f64>>,
}

impl SineTransforms {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = DctPlanner::new();
        Self { n, dst2: planner.plan_dst2(n), dst3: planner.plan_dst3(n), dct3: planner.plan_dct3(n) }
    }

    /// Samples to coefficients; `line[m - 1]` becomes `c_m`.
    pub(crate) fn analyze(&self, line: &mut [f64]) {
        self.dst2.process_dst2(line);
        let n = self.n as f64;
        let last = self.n - 1;
        for (i, c) in line.iter_mut().enumerate() {
            *c *= if i == last { 1.0 / n } else { 2.0 / n };
        }
    }

    /// Coefficients to samples; inverse of [`Self::analyze`].
    pub(crate) fn synthesize(&self, line: &mut [f64]) {
        line[self.n - 1] *= 2.0;
        self.dst3.process_dst3(line);
    }

    /// Samples of `u'` at the cell centres, for an axis of length `length`.
    pub(crate) fn differentiate(&self, line: &mut [f64], length: f64) {
        self.analyze(line);
        // Shift c_m into slot m; the Nyquist mode's derivative vanishes at
        // cell centres and drops out.
        for m in (1..self.n).rev() {
            line[m] = line[m - 1] * m as f64 * std::f64::consts::PI / length;
        }
        line[0] = 0.0;
        self.dct3.process_dct3(line);
    }

    /// `int_0^L |u'|^2` of the sine interpolant, by Parseval.
    pub(crate) fn line_kinetic(&self, line: &mut [f64], length: f64) -> f64 {
        self.analyze(line);
        let k = std::f64::consts::PI / length;
        0.5 * length * line.iter().enumerate().map(|(i, c)| (c * (i + 1) as f64 * k).powi(2)).sum::<f64>()
    }
}

/// Applies `f` to every grid line along `axis`, writing results back.
pub(crate) fn map_lines<F>(values: &mut [f64], grid: &Grid, axis: usize, mut f: F)
where
    F: FnMut(&mut [f64]),
{
    let n = grid.n;
    let stride = grid.stride(axis);
    let mut line = vec![0.0; n];
    for base in 0..values.len() {
        if !(base / stride).is_multiple_of(n) {
            continue;
        }
        for (j, slot) in line.iter_mut().enumerate() {
            *slot = values[base + j * stride];
        }
        f(&mut line);
        for (j, v) in line.iter().enumerate() {
            values[base + j * stride] = *v;
        }
    }
}

/// Visits every grid line along `axis` read-only, passing a scratch copy.
pub(crate) fn fold_lines<F>(values: &[f64], grid: &Grid, axis: usize, mut f: F)
where
    F: FnMut(&mut [f64]),
{
    let n = grid.n;
    let stride = grid.stride(axis);
    let mut line = vec![0.0; n];
    for base in 0..values.len() {
        if !(base / stride).is_multiple_of(n) {
            continue;
        }
        for (j, slot) in line.iter_mut().enumerate() {
            *slot = values[base + j * stride];
        }
        f(&mut line);
    }
}

/// Tensor-product sine coefficients of a grid function.
pub(crate) fn analyze_all(values: &[f64], grid: &Grid, transforms: &SineTransforms) -> Vec<f64> {
    let mut out = values.to_vec();
    for axis in 0..grid.dimension() {
        map_lines(&mut out, grid, axis, |line| transforms.analyze(line));
    }
    out
}

/// Inverse of [`analyze_all`].
pub(crate) fn synthesize_all(coefficients: &[f64], grid: &Grid, transforms: &SineTransforms) -> Vec<f64> {
    let mut out = coefficients.to_vec();
    for axis in 0..grid.dimension() {
        map_lines(&mut out, grid, axis, |line| transforms.synthesize(line));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // O(n^2) sums straight from the definitions.
    fn naive_samples(coeffs: &[f64]) -> Vec<f64> {
        let n = coeffs.len();
        (0..n)
            .map(|j| (1..=n).map(|m| coeffs[m - 1] * (m as f64 * PI * (j as f64 + 0.5) / n as f64).sin()).sum())
            .collect()
    }

    fn naive_derivative(coeffs: &[f64], length: f64) -> Vec<f64> {
        let n = coeffs.len();
        (0..n)
            .map(|j| {
                (1..=n)
                    .map(|m| {
                        let k = m as f64 * PI / length;
                        coeffs[m - 1] * k * (k * (j as f64 + 0.5) * length / n as f64).cos()
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn transforms_match_naive_sums() {
        for n in [5usize, 16, 37] {
            let t = SineTransforms::new(n);
            let coeffs: Vec<f64> = (0..n).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect();
            let samples = naive_samples(&coeffs);

            let mut line = coeffs.clone();
            t.synthesize(&mut line);
            for (a, b) in line.iter().zip(&samples) {
                assert!((a - b).abs() < 1e-12);
            }

            let mut back = samples.clone();
            t.analyze(&mut back);
            for (a, b) in back.iter().zip(&coeffs) {
                assert!((a - b).abs() < 1e-12);
            }

            let length = 1.7;
            let mut deriv = samples.clone();
            t.differentiate(&mut deriv, length);
            let expected = naive_derivative(&coeffs, length);
            for (a, b) in deriv.iter().zip(&expected) {
                assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn parseval_for_a_single_mode() {
        let n = 64;
        let t = SineTransforms::new(n);
        let mut line: Vec<f64> = (0..n).map(|j| (3.0 * PI * (j as f64 + 0.5) / n as f64).sin()).collect();
        // int_0^1 |3 pi cos(3 pi x)|^2 = 9 pi^2 / 2
        let e = t.line_kinetic(&mut line, 1.0);
        assert!((e - 4.5 * PI * PI).abs() < 1e-10);
    }
}
