//! The composed kernel `K(x, x') = 1 / (1 - nu <x, x'>)` over the unit ball,
//! Gram matrices, and the explicit truncated feature map used as a test oracle.
//!
//! At `nu = 1/2` the kernel is the geometric series `sum_j 2^-j <x, x'>^j`, whose
//! feature map carries every monomial `x_{k1} ... x_{kj}` scaled by `2^(-j/2)`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Norms up to `1 + UNIT_BALL_SLACK` are pulled back onto the sphere.
pub const UNIT_BALL_SLACK: f64 = 1e-9;

/// Default cap on the number of entries produced by [`explicit_feature_map`].
pub const DEFAULT_FEATURE_CAP: usize = 10_000_000;

/// A point of the unit ball in `R^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    /// Validates finiteness and `||x|| <= 1`, renormalizing norms within
    /// [`UNIT_BALL_SLACK`] of the sphere.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(invalid("point must have at least one coordinate"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Domain("point coordinates must be finite".into()));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm > 1.0 + UNIT_BALL_SLACK {
            return Err(Error::Domain(format!("point norm {norm} lies outside the unit ball")));
        }
        if norm > 1.0 {
            return Ok(Self(coords.into_iter().map(|c| c / norm).collect()));
        }
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Plain inner product. Panics on dimension mismatch; callers validate first.
    pub fn dot(&self, other: &Point) -> f64 {
        assert_eq!(self.dim(), other.dim(), "point dimensions differ");
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(coords: Vec<f64>) -> Result<Self> {
        Point::new(coords)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.0
    }
}

/// Base inner product the composed kernel is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKernel {
    #[default]
    LinearDot,
}

impl BaseKernel {
    pub fn eval(&self, x: &Point, x2: &Point) -> f64 {
        match self {
            BaseKernel::LinearDot => x.dot(x2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub base: BaseKernel,
    pub nu: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self { base: BaseKernel::LinearDot, nu: 0.5 }
    }
}

impl KernelSpec {
    pub fn new(nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) {
            return Err(invalid(format!("nu must lie in (0, 1), got {nu}")));
        }
        Ok(Self { base: BaseKernel::LinearDot, nu })
    }

    /// Largest value the kernel takes on the unit ball, `1 / (1 - nu)`.
    pub fn max_value(&self) -> f64 {
        1.0 / (1.0 - self.nu)
    }

    pub fn eval(&self, x: &Point, x2: &Point) -> f64 {
        1.0 / (1.0 - self.nu * self.base.eval(x, x2))
    }
}

/// `K(x, x2) = 1 / (1 - nu <x, x2>)`.
pub fn composed_kernel(x: &Point, x2: &Point, spec: &KernelSpec) -> Result<f64> {
    if x.dim() != x2.dim() {
        return Err(invalid(format!("dimension mismatch: {} vs {}", x.dim(), x2.dim())));
    }
    Ok(spec.eval(x, x2))
}

/// Dense symmetric PSD matrix of kernel values.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    spec: KernelSpec,
}

/// Absolute symmetry tolerance for externally supplied matrices.
pub const SYMMETRY_TOL: f64 = 1e-12;

impl GramMatrix {
    /// Wraps an externally supplied matrix, checking symmetry and that the
    /// smallest eigenvalue is at least `-1e-6 * m`.
    pub fn from_entries(entries: DMatrix<f64>, spec: KernelSpec) -> Result<Self> {
        let m = entries.nrows();
        if m == 0 || entries.ncols() != m {
            return Err(invalid(format!(
                "Gram matrix must be square and nonempty, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("Gram matrix has non-finite entries".into()));
        }
        for i in 0..m {
            for j in (i + 1)..m {
                if (entries[(i, j)] - entries[(j, i)]).abs() > SYMMETRY_TOL {
                    return Err(Error::InvalidInput(format!("Gram matrix is not symmetric at ({i}, {j})")));
                }
            }
        }
        let gram = Self { entries, spec };
        let min_eig = gram.min_eigenvalue();
        if min_eig < -1e-6 * m as f64 {
            return Err(Error::InvalidInput(format!(
                "Gram matrix is not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        Ok(gram)
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.size()).map(|i| self.entries[(i, i)]).collect()
    }

    /// Column `j`, which equals row `j` by symmetry.
    pub fn column(&self, j: usize) -> &[f64] {
        let m = self.size();
        &self.entries.as_slice()[j * m..(j + 1) * m]
    }

    /// `K alpha`.
    pub fn mul_vec(&self, alpha: &[f64]) -> Vec<f64> {
        let m = self.size();
        assert_eq!(alpha.len(), m);
        let mut out = vec![0.0; m];
        for (j, &a) in alpha.iter().enumerate() {
            if a != 0.0 {
                for (o, k) in out.iter_mut().zip(self.column(j)) {
                    *o += a * k;
                }
            }
        }
        out
    }

    /// `alpha^T K alpha`, the squared RKHS norm of `sum_j alpha_j psi(x_j)`.
    pub fn quadratic_form(&self, alpha: &[f64]) -> f64 {
        self.mul_vec(alpha).iter().zip(alpha).map(|(k, a)| k * a).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.entries.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

/// Gram matrix of `points` under `spec`. Rows are filled in parallel; every
/// entry is computed independently, so the result does not depend on scheduling.
pub fn gram(points: &[Point], spec: &KernelSpec) -> Result<GramMatrix> {
    let m = points.len();
    if m == 0 {
        return Err(invalid("cannot build a Gram matrix from an empty point list"));
    }
    let dim = points[0].dim();
    if let Some(p) = points.iter().find(|p| p.dim() != dim) {
        return Err(invalid(format!("dimension mismatch: {} vs {dim}", p.dim())));
    }
    // column-major storage: column j holds K(x_i, x_j) for all i
    let mut data = vec![0.0; m * m];
    data.par_chunks_mut(m).enumerate().for_each(|(j, col)| {
        for (i, v) in col.iter_mut().enumerate() {
            *v = spec.eval(&points[i], &points[j]);
        }
    });
    Ok(GramMatrix { entries: DMatrix::from_vec(m, m, data), spec: *spec })
}

/// `sum_{j=0}^{degree} 2^-j <x, x2>^j`, the degree-truncated kernel at `nu = 1/2`.
pub fn truncated_kernel(x: &Point, x2: &Point, degree: usize) -> Result<f64> {
    if x.dim() != x2.dim() {
        return Err(invalid(format!("dimension mismatch: {} vs {}", x.dim(), x2.dim())));
    }
    let t = 0.5 * x.dot(x2);
    let mut term = 1.0;
    let mut sum = 1.0;
    for _ in 0..degree {
        term *= t;
        sum += term;
    }
    Ok(sum)
}

/// Explicit feature vector of the degree-truncated kernel: for `j = 0..=degree`
/// and every tuple `(k1, ..., kj)` in lexicographic order, the entry
/// `2^(-j/2) x_{k1} ... x_{kj}`.
pub fn explicit_feature_map(x: &Point, degree: usize, cap: usize) -> Result<Vec<f64>> {
    let n = x.dim();
    let mut total: usize = 0;
    let mut level: usize = 1;
    for j in 0..=degree {
        if j > 0 {
            level = level.saturating_mul(n);
        }
        total = total.saturating_add(level);
        if total > cap {
            return Err(Error::Resource(format!(
                "feature map of dimension {n} and degree {degree} exceeds {cap} entries"
            )));
        }
    }
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(total);
    let mut current = vec![1.0];
    out.extend_from_slice(&current);
    for _ in 0..degree {
        current = current
            .iter()
            .flat_map(|&prefix| x.coords().iter().map(move |&c| prefix * c * scale))
            .collect();
        out.extend_from_slice(&current);
    }
    Ok(out)
}
