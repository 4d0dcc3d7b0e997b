//! Symmetric tridiagonal systems.

use crate::error::{Error, Result};

/// Symmetric tridiagonal matrix: `diag[i]` and `off[i]` coupling `i` and `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiag {
    pub fn zeros(n: usize) -> Self {
        SymTridiag { diag: vec![0.0; n], off: vec![0.0; n.saturating_sub(1)] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.diag[i] * x[i] * x[i];
            if i + 1 < self.len() {
                acc += 2.0 * self.off[i] * x[i] * x[i + 1];
            }
        }
        acc
    }

    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.len() {
            acc += self.diag[i] * x[i] * y[i];
            if i + 1 < self.len() {
                acc += self.off[i] * (x[i] * y[i + 1] + x[i + 1] * y[i]);
            }
        }
        acc
    }
}

/// Thomas elimination on the trailing block `start..n` of `a`; `rhs` is
/// overwritten with the solution there and entries before `start` are left
/// untouched.
pub fn solve_from(a: &SymTridiag, start: usize, rhs: &mut [f64]) -> Result<()> {
    let n = a.len();
    if rhs.len() != n {
        return Err(Error::ShapeMismatch { expected: n, got: rhs.len() });
    }
    if start >= n {
        return Ok(());
    }
    let scale = a.diag[start..].iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let mut c = vec![0.0; n];
    let mut pivot = a.diag[start];
    if !(pivot.abs() > 1e-300 + 1e-14 * scale) {
        return Err(Error::SolveFailure(format!("zero pivot at row {start}")));
    }
    rhs[start] /= pivot;
    for i in start + 1..n {
        c[i - 1] = a.off[i - 1] / pivot;
        pivot = a.diag[i] - a.off[i - 1] * c[i - 1];
        if !(pivot.abs() > 1e-300 + 1e-14 * scale) || !pivot.is_finite() {
            return Err(Error::SolveFailure(format!("zero pivot at row {i}")));
        }
        rhs[i] = (rhs[i] - a.off[i - 1] * rhs[i - 1]) / pivot;
    }
    for i in (start..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Precomputed Thomas elimination of the trailing block `start..n`, for
/// repeated solves with one matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagFactor {
    start: usize,
    off: Vec<f64>,
    inv_pivot: Vec<f64>,
    /// Upper multipliers `c[i] = off[i] / pivot[i]`.
    c: Vec<f64>,
}

impl TridiagFactor {
    pub fn new(a: &SymTridiag, start: usize) -> Result<Self> {
        let n = a.len();
        let mut inv_pivot = vec![0.0; n];
        let mut c = vec![0.0; n];
        if start < n {
            let scale = a.diag[start..].iter().fold(0.0f64, |m, d| m.max(d.abs()));
            let mut pivot = a.diag[start];
            for i in start..n {
                if i > start {
                    pivot = a.diag[i] - a.off[i - 1] * c[i - 1];
                }
                if !(pivot.abs() > 1e-300 + 1e-14 * scale) || !pivot.is_finite() {
                    return Err(Error::SolveFailure(format!("zero pivot at row {i}")));
                }
                inv_pivot[i] = 1.0 / pivot;
                if i + 1 < n {
                    c[i] = a.off[i] / pivot;
                }
            }
        }
        Ok(TridiagFactor { start, off: a.off.clone(), inv_pivot, c })
    }

    /// Overwrites `rhs[start..]` with the solution.
    pub fn solve(&self, rhs: &mut [f64]) -> Result<()> {
        let n = self.inv_pivot.len();
        if rhs.len() != n {
            return Err(Error::ShapeMismatch { expected: n, got: rhs.len() });
        }
        if self.start >= n {
            return Ok(());
        }
        rhs[self.start] *= self.inv_pivot[self.start];
        for i in self.start + 1..n {
            rhs[i] = (rhs[i] - self.off[i - 1] * rhs[i - 1]) * self.inv_pivot[i];
        }
        for i in (self.start..n - 1).rev() {
            rhs[i] -= self.c[i] * rhs[i + 1];
        }
        Ok(())
    }
}
