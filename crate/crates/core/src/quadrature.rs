//! Gauss–Hermite quadrature for expectations under a normal distribution.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Nodes and weights such that `Σ w_i f(x_i) ≈ E[f(Z)]`, `Z ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "quadrature nodes",
                value: 0.0,
                reason: "need at least one node",
            });
        }
        let (x, w) = physicists(n)?;
        let sqrt2 = core::f64::consts::SQRT_2;
        let inv_sqrt_pi = 1.0 / libm::sqrt(core::f64::consts::PI);
        Ok(Self {
            nodes: x.iter().map(|v| v * sqrt2).collect(),
            weights: w.iter().map(|v| v * inv_sqrt_pi).collect(),
        })
    }

    /// `E[f(X)]` for `X ~ N(mean, std²)`.
    pub fn expect(&self, mean: f64, std: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * f(mean + std * z))
            .sum()
    }
}

/// Roots and weights for the weight function `exp(−x²)`, via Newton iteration
/// on the orthonormal Hermite recurrence.
fn physicists(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    const PIM4: f64 = 0.751_125_544_464_942_5; // π^(-1/4)
    const MAX_ITER: usize = 100;
    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0_f64;
    for i in 0..m {
        z = match i {
            0 => libm::sqrt(2.0 * nf + 1.0) - 1.85575 * libm::pow(2.0 * nf + 1.0, -0.16667),
            1 => z - 1.14 * libm::pow(nf, 0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        let mut converged = false;
        for _ in 0..MAX_ITER {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * libm::sqrt(2.0 / jf) * p2 - libm::sqrt((jf - 1.0) / jf) * p3;
            }
            pp = libm::sqrt(2.0 * nf) * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: "Gauss-Hermite root",
                iterations: MAX_ITER,
                residual: f64::NAN,
            });
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    Ok((x, w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn integrates_normal_moments_exactly() {
        for n in [1, 2, 5, 20, 80] {
            let q = GaussHermite::new(n).unwrap();
            assert_abs_diff_eq!(q.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
            if n >= 3 {
                assert_abs_diff_eq!(q.expect(0.0, 1.0, |x| x * x), 1.0, epsilon = 1e-12);
                assert_abs_diff_eq!(q.expect(2.0, 0.5, |x| x), 2.0, epsilon = 1e-12);
            }
            if n >= 5 {
                assert_abs_diff_eq!(q.expect(0.0, 1.0, |x| x * x * x * x), 3.0, epsilon = 1e-11);
            }
        }
    }

    #[test]
    fn smooth_expectation_matches_closed_form() {
        // E[exp(X)] = exp(μ + σ²/2)
        let q = GaussHermite::new(40).unwrap();
        assert_abs_diff_eq!(q.expect(0.3, 0.7, libm::exp), libm::exp(0.3 + 0.245), epsilon = 1e-12);
    }
}
