//! Brute-force reference solver for tiny ERM instances, used to validate
//! [`solve_erm`](super::solve_erm).
//!
//! Two independent searches are combined:
//!
//! 1. A uniform grid over the box `[-r, r]^m`, `r = sqrt(B / lambda_min)`, which
//!    contains the feasible ellipsoid. Infeasible grid points are discarded.
//! 2. Exact face enumeration in whitened coordinates `u = Lambda^{1/2} Q^T alpha`,
//!    where the feasible set is the ball `||u||^2 <= B` and predictions are
//!    linear in `u`. An optimum either zeroes a set `S` of residuals and is the
//!    minimum-norm point of that affine set, or minimizes the locally linear
//!    objective over the ball restricted to that affine set, which has a
//!    closed form. Enumerating every `S` and every sign pattern of the
//!    remaining residuals therefore visits an optimum.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{check_labels, mean_abs_residual};
use crate::error::{invalid, Error, Result};
use crate::kernel::GramMatrix;

pub const MAX_ORACLE_SIZE: usize = 6;
pub const MAX_ORACLE_GRID: usize = 41;

/// Relative eigenvalue cutoff below which directions are treated as null.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub alpha: Vec<f64>,
    pub objective: f64,
    /// Best feasible grid objective (stage 1 alone).
    pub grid_objective: f64,
    /// Upper bound on how far the grid optimum can sit above the true optimum
    /// when the optimum is surrounded by feasible grid cells.
    pub grid_slack: f64,
}

/// Exhaustive search for `min (1/m) sum |(K alpha)_i - y_i|` over `alpha^T K alpha <= B`.
pub fn exhaustive_erm_small(gram: &GramMatrix, labels: &[u8], b: f64, grid_resolution: usize) -> Result<OracleResult> {
    let m = gram.size();
    if m > MAX_ORACLE_SIZE {
        return Err(Error::Resource(format!("oracle supports at most {MAX_ORACLE_SIZE} points, got {m}")));
    }
    if !(2..=MAX_ORACLE_GRID).contains(&grid_resolution) {
        return Err(Error::Resource(format!(
            "grid resolution must lie in 2..={MAX_ORACLE_GRID}, got {grid_resolution}"
        )));
    }
    check_labels(labels, m)?;
    if !(b > 0.0 && b.is_finite()) {
        return Err(invalid(format!("B must be positive and finite, got {b}")));
    }

    let eig = SymmetricEigen::new(gram.matrix().clone());
    let lambda_max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    let kept: Vec<usize> = (0..m).filter(|&i| eig.eigenvalues[i] > RANK_TOL * lambda_max.max(1.0)).collect();
    let lambda_min = kept.iter().map(|&i| eig.eigenvalues[i]).fold(f64::INFINITY, f64::min);

    let (grid_alpha, grid_objective, grid_slack) = grid_search(gram, labels, b, lambda_min, grid_resolution);
    let (face_alpha, face_objective) = face_enumeration(gram, labels, b, &eig, &kept);

    let (alpha, objective) =
        if face_objective <= grid_objective { (face_alpha, face_objective) } else { (grid_alpha, grid_objective) };
    Ok(OracleResult { alpha, objective, grid_objective, grid_slack })
}

fn grid_search(gram: &GramMatrix, labels: &[u8], b: f64, lambda_min: f64, resolution: usize) -> (Vec<f64>, f64, f64) {
    let m = gram.size();
    let radius = (b / lambda_min).sqrt();
    let spacing = 2.0 * radius / (resolution - 1) as f64;
    let axis: Vec<f64> = (0..resolution).map(|k| -radius + spacing * k as f64).collect();

    let mut index = vec![0usize; m];
    let mut alpha = vec![0.0; m];
    let mut best_alpha = vec![0.0; m];
    let mut best = mean_abs_residual(&vec![0.0; m], labels);
    loop {
        for (a, &k) in alpha.iter_mut().zip(&index) {
            *a = axis[k];
        }
        let pred = gram.mul_vec(&alpha);
        let norm_sq: f64 = pred.iter().zip(&alpha).map(|(p, a)| p * a).sum();
        if norm_sq <= b {
            let value = mean_abs_residual(&pred, labels);
            if value < best {
                best = value;
                best_alpha.clone_from(&alpha);
            }
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == m {
                let row_abs: f64 = gram.matrix().iter().map(|k| k.abs()).sum();
                let slack = row_abs / m as f64 * spacing / 2.0;
                return (best_alpha, best, slack);
            }
            index[pos] += 1;
            if index[pos] < resolution {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}

fn face_enumeration(
    gram: &GramMatrix,
    labels: &[u8],
    b: f64,
    eig: &SymmetricEigen<f64, nalgebra::Dyn>,
    kept: &[usize],
) -> (Vec<f64>, f64) {
    let m = gram.size();
    let r = kept.len();
    let mut best_alpha = vec![0.0; m];
    let mut best = mean_abs_residual(&vec![0.0; m], labels);
    if r == 0 {
        return (best_alpha, best);
    }

    // predictions = rows * u, alpha = back * u
    let rows = DMatrix::from_fn(m, r, |i, k| eig.eigenvectors[(i, kept[k])] * eig.eigenvalues[kept[k]].sqrt());
    let back = DMatrix::from_fn(m, r, |i, k| eig.eigenvectors[(i, kept[k])] / eig.eigenvalues[kept[k]].sqrt());
    let y = DVector::from_iterator(m, labels.iter().map(|&v| f64::from(v)));

    let mut consider = |u: &DVector<f64>| {
        let mut alpha = &back * u;
        let norm_sq = gram.quadratic_form(alpha.as_slice());
        if norm_sq > b {
            alpha *= (b / norm_sq).sqrt();
        }
        let value = mean_abs_residual(&gram.mul_vec(alpha.as_slice()), labels);
        if value < best {
            best = value;
            best_alpha = alpha.as_slice().to_vec();
        }
    };

    for mask in 0u32..(1 << m) {
        let zeroed: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
        let free: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) == 0).collect();

        let (u0, projector) = if zeroed.is_empty() {
            (DVector::zeros(r), DMatrix::identity(r, r))
        } else {
            let a = rows.select_rows(zeroed.iter());
            let target = y.select_rows(zeroed.iter());
            let Ok(pinv) = a.clone().pseudo_inverse(1e-12) else { continue };
            let u0 = &pinv * &target;
            if (&a * &u0 - &target).amax() > 1e-9 {
                continue;
            }
            (u0, DMatrix::identity(r, r) - &pinv * &a)
        };

        let base_norm_sq = u0.norm_squared();
        if base_norm_sq > b * (1.0 + 1e-12) {
            continue;
        }
        consider(&u0);

        let room = (b - base_norm_sq).max(0.0).sqrt();
        if room == 0.0 || free.is_empty() {
            continue;
        }
        for signs in 0u32..(1 << free.len()) {
            let mut c = DVector::zeros(r);
            for (bit, &i) in free.iter().enumerate() {
                let s = if signs & (1 << bit) != 0 { 1.0 } else { -1.0 };
                c += s * rows.row(i).transpose();
            }
            let direction = &projector * c;
            let len = direction.norm();
            if len > 1e-12 {
                consider(&(&u0 - direction * (room / len)));
            }
        }
    }
    (best_alpha, best)
}
