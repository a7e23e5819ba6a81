//! Combination matrices and their Perron data.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

const COLUMN_SUM_TOL: f64 = 1e-12;
const POWER_ITERATION_CAP: usize = 1_000_000;

/// A validated left-stochastic matrix: entry `(j, k)` is the weight agent `k`
/// gives to agent `j`, and every column sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix(Matrix);

impl CombinationMatrix {
    pub fn validate(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::NotSquare {
                rows: matrix.rows(),
                cols: matrix.cols(),
            });
        }
        let k = matrix.rows();
        if k == 0 {
            return Err(Error::Empty);
        }
        for row in 0..k {
            for col in 0..k {
                let value = matrix.get(row, col);
                if !(value >= 0.0) {
                    return Err(Error::NegativeEntry { row, col, value });
                }
            }
        }
        for col in 0..k {
            let sum: f64 = (0..k).map(|row| matrix.get(row, col)).sum();
            let deviation = sum - 1.0;
            if deviation.abs() > COLUMN_SUM_TOL {
                return Err(Error::ColumnSumViolation { col, deviation });
            }
        }
        Ok(Self(matrix))
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::validate(Matrix::from_rows(rows)?)
    }

    /// `a_jk = 1/|N(k)|` for every `j` in the in-neighborhood of `k`, where
    /// `adjacency[j][k]` means `k` listens to `j`.
    pub fn uniform_averaging<R: AsRef<[bool]>>(adjacency: &[R]) -> Result<Self> {
        let k = adjacency.len();
        if k == 0 {
            return Err(Error::Empty);
        }
        for r in adjacency {
            if r.as_ref().len() != k {
                return Err(Error::NotSquare {
                    rows: k,
                    cols: r.as_ref().len(),
                });
            }
        }
        let mut m = Matrix::zeros(k, k);
        for col in 0..k {
            let degree = (0..k).filter(|&j| adjacency[j].as_ref()[col]).count();
            if degree == 0 {
                return Err(Error::IsolatedNode { node: col });
            }
            let w = 1.0 / degree as f64;
            for j in 0..k {
                if adjacency[j].as_ref()[col] {
                    m.set(j, col, w);
                }
            }
        }
        Self::validate(m)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn agents(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.0.get(from, to)
    }

    /// Strong connectivity of the support digraph (edge j→k iff a_jk > 0).
    pub fn is_irreducible(&self) -> bool {
        let k = self.agents();
        let forward = reachable(k, |from, to| self.weight(from, to) > 0.0);
        let backward = reachable(k, |from, to| self.weight(to, from) > 0.0);
        forward && backward
    }

    pub fn is_primitive(&self) -> bool {
        if !self.is_irreducible() {
            return false;
        }
        let k = self.agents();
        if (0..k).any(|i| self.weight(i, i) > 0.0) {
            return true;
        }
        // Wielandt: a primitive K×K matrix has a positive power of order K²−2K+2.
        let exponent = k * k - 2 * k + 2;
        let support: Vec<bool> = self.0.as_slice().iter().map(|&v| v > 0.0).collect();
        boolean_power(&support, k, exponent).iter().all(|&b| b)
    }

    pub fn perron(&self, tol: f64) -> Result<PerronData> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "tol",
                value: tol,
                reason: "must be positive",
            });
        }
        if !self.is_primitive() {
            return Err(Error::NonPrimitive);
        }
        let a = &self.0;
        let k = self.agents();

        let mut v = vec![1.0 / k as f64; k];
        let mut converged = false;
        let mut residual = f64::INFINITY;
        for _ in 0..POWER_ITERATION_CAP {
            let mut next = a.mul_vec(&v);
            let s: f64 = next.iter().sum();
            for x in &mut next {
                *x /= s;
            }
            residual = next
                .iter()
                .zip(&v)
                .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
            v = next;
            if residual < tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::NoConvergence {
                what: "Perron power iteration",
                iterations: POWER_ITERATION_CAP,
                residual,
            });
        }

        let lambda2 = second_eigenvalue_magnitude(a, &v);
        let zeta = 0.5 * (lambda2 + 1.0);
        let i_max = libm::ceil(libm::log(tol) / libm::log(zeta)).max(1.0) as usize;

        let mut kappa = 0.0_f64;
        let mut power = a.clone();
        let mut zeta_i = zeta;
        for i in 1..=i_max {
            if i > 1 {
                power = power.matmul(a);
                zeta_i *= zeta;
            }
            for j in 0..k {
                for col in 0..k {
                    kappa = kappa.max((power.get(j, col) - v[j]).abs() / zeta_i);
                }
            }
        }

        Ok(PerronData {
            vector: v,
            second_eigenvalue_magnitude: lambda2,
            zeta,
            kappa: kappa.max(f64::EPSILON),
            i_max,
        })
    }
}

fn reachable(k: usize, edge: impl Fn(usize, usize) -> bool) -> bool {
    let mut seen = vec![false; k];
    let mut queue = VecDeque::new();
    seen[0] = true;
    queue.push_back(0);
    while let Some(node) = queue.pop_front() {
        for next in 0..k {
            if !seen[next] && edge(node, next) {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    seen.iter().all(|&s| s)
}

fn boolean_product(a: &[bool], b: &[bool], k: usize) -> Vec<bool> {
    let mut out = vec![false; k * k];
    for i in 0..k {
        for l in 0..k {
            if a[i * k + l] {
                for j in 0..k {
                    out[i * k + j] |= b[l * k + j];
                }
            }
        }
    }
    out
}

fn boolean_power(base: &[bool], k: usize, mut exponent: usize) -> Vec<bool> {
    let mut result: Vec<bool> = (0..k * k).map(|i| i / k == i % k).collect();
    let mut square = base.to_vec();
    while exponent > 0 {
        if exponent & 1 == 1 {
            result = boolean_product(&result, &square, k);
        }
        exponent >>= 1;
        if exponent > 0 {
            square = boolean_product(&square, &square, k);
        }
    }
    result
}

/// Spectral radius of `A − v·1ᵀ` by Gelfand's formula on repeated squares.
///
/// The matrix is renormalized after each squaring so that the log-scale is
/// tracked separately and nothing underflows.
fn second_eigenvalue_magnitude(a: &Matrix, v: &[f64]) -> f64 {
    let k = a.rows();
    let mut s = a.clone();
    for j in 0..k {
        for col in 0..k {
            s.set(j, col, a.get(j, col) - v[j]);
        }
    }
    let norm = s.max_abs();
    if norm == 0.0 {
        return 0.0;
    }
    s.scale(1.0 / norm);
    // log ‖B^p‖ is approximated by log_scale + log ‖s‖ with p = 2^level.
    let mut log_scale = libm::log(norm);
    let mut p = 1.0_f64;
    let mut estimate = norm;
    for _ in 0..60 {
        s = s.matmul(&s);
        log_scale *= 2.0;
        p *= 2.0;
        let n = s.max_abs();
        if n == 0.0 {
            return 0.0;
        }
        log_scale += libm::log(n);
        s.scale(1.0 / n);
        let next = libm::exp(log_scale / p);
        if (next - estimate).abs() < 1e-14 {
            return next.min(1.0);
        }
        estimate = next;
    }
    estimate.min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerronData {
    pub vector: Vec<f64>,
    pub second_eigenvalue_magnitude: f64,
    pub zeta: f64,
    pub kappa: f64,
    /// Largest power scanned when estimating `kappa`.
    pub i_max: usize,
}
