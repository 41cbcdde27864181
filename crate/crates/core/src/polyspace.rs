//! Polynomials `p(a) = sum_j beta_j a^j` measured by the weighted coefficient
//! norm `sum_j beta_j^2 2^j`, which is the squared RKHS norm of the predictor
//! `x -> p(<w, x>)` under the composed kernel at `nu = 1/2` for unit `w`.
//!
//! This module builds such polynomials for the sigmoid (Chebyshev truncation)
//! and the erf transfer (Maclaurin series), and evaluates the closed-form
//! budget that guarantees an `eps`-approximation of the sigmoid exists.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::{DoubleDouble, NeumaierSum};
use crate::transfer::{erf_transfer, sigmoid, uniform_grid, TransferVariant};

/// Highest Chebyshev degree tried before giving up.
pub const DEFAULT_MAX_DEGREE: usize = 60;
/// Uniform grid size used to measure sup errors.
pub const DEFAULT_GRID_SIZE: usize = 10_001;
/// Chebyshev nodes used for the coefficient quadrature.
const QUADRATURE_NODES: usize = 512;

/// A polynomial in the monomial basis approximating a transfer function on `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialApprox {
    pub beta: Vec<f64>,
    pub pb_norm: f64,
    pub sup_error: f64,
    pub target: TransferVariant,
    pub lipschitz: f64,
}

impl PolynomialApprox {
    /// Degree of the stored coefficient sequence (trailing zeros included).
    pub fn degree(&self) -> usize {
        self.beta.len().saturating_sub(1)
    }

    /// Horner evaluation of the monomial form.
    pub fn eval(&self, a: f64) -> f64 {
        horner(&self.beta, a)
    }

    pub fn log_pb_norm(&self) -> f64 {
        self.pb_norm.ln()
    }

    /// Recomputes the coefficient norm from `beta`.
    pub fn recompute_pb_norm(&self) -> f64 {
        pb_norm(&self.beta)
    }
}

pub(crate) fn horner(beta: &[f64], a: f64) -> f64 {
    beta.iter().rev().fold(0.0, |acc, &b| acc * a + b)
}

/// `sum_j beta_j^2 2^j`, accumulated in increasing `j` with compensated summation.
pub fn pb_norm(beta: &[f64]) -> f64 {
    let mut sum = NeumaierSum::default();
    let mut weight = 1.0;
    for &b in beta {
        sum.add(b * b * weight);
        weight *= 2.0;
    }
    sum.value()
}

/// The natural log of a (possibly astronomically large) budget `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogBudget {
    pub log_b: f64,
}

impl LogBudget {
    pub fn from_value(b: f64) -> Result<Self> {
        if !(b > 0.0 && b.is_finite()) {
            return Err(invalid(format!("budget must be positive and finite, got {b}")));
        }
        Ok(Self { log_b: b.ln() })
    }

    /// `B` itself, or `None` when it does not fit in an `f64`.
    pub fn value(&self) -> Option<f64> {
        let v = self.log_b.exp();
        v.is_finite().then_some(v)
    }
}

/// Sigmoid budget together with a note when `L` is below the regime `L >= 3`
/// the bound is stated for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmoidBudget {
    pub budget: LogBudget,
    pub warning: Option<String>,
}

/// `ln(2 L^4 + exp(7 L ln(2L / eps) + 3))`, evaluated as a log-sum-exp.
pub fn b_bound_sigmoid(lipschitz: f64, eps: f64) -> Result<SigmoidBudget> {
    if !(lipschitz.is_finite() && lipschitz > 0.0) {
        return Err(invalid(format!("L must be positive and finite, got {lipschitz}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    // double-double so the result is correctly rounded in practice
    let l = DoubleDouble::from_f64(lipschitz);
    let poly_term = (l * l * l * l).mul_f64(2.0).ln();
    let exp_term = l.mul_f64(7.0) * (l.mul_f64(2.0) / DoubleDouble::from_f64(eps)).ln() + DoubleDouble::from_f64(3.0);
    let (big, small) = if exp_term.to_f64() >= poly_term.to_f64() { (exp_term, poly_term) } else { (poly_term, exp_term) };
    let log_b = (big + DoubleDouble::from_f64((small - big).to_f64().exp().ln_1p())).to_f64();
    let warning = (lipschitz < 3.0)
        .then(|| format!("L = {lipschitz} is below 3; the sigmoid budget is only established for L >= 3"));
    Ok(SigmoidBudget { budget: LogBudget { log_b }, warning })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChebyshevOptions {
    pub grid_size: usize,
    pub max_degree: usize,
}

impl Default for ChebyshevOptions {
    fn default() -> Self {
        Self { grid_size: DEFAULT_GRID_SIZE, max_degree: DEFAULT_MAX_DEGREE }
    }
}

/// Chebyshev coefficients `c_0..c_{n-1}` of `f` on `[-1, 1]` by Gauss-Chebyshev
/// quadrature (a DCT-II of samples at the first-kind nodes).
pub(crate) fn chebyshev_coefficients(f: impl Fn(f64) -> f64, count: usize) -> Vec<f64> {
    let n = QUADRATURE_NODES.max(count);
    let nf = n as f64;
    let pi = std::f64::consts::PI;
    let samples: Vec<f64> = (0..n).map(|k| f((pi * (k as f64 + 0.5) / nf).cos())).collect();
    (0..count)
        .map(|j| {
            let mut acc = NeumaierSum::default();
            for (k, s) in samples.iter().enumerate() {
                acc.add(s * (pi * j as f64 * (k as f64 + 0.5) / nf).cos());
            }
            let c = 2.0 * acc.value() / nf;
            if j == 0 {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

/// Clenshaw evaluation of `sum_k c_k T_k(a)`.
pub(crate) fn clenshaw(coeffs: &[f64], a: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * a * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().copied().unwrap_or(0.0) + a * b1 - b2
}

/// Integer monomial coefficients of `T_0..=T_degree`; exact in `i128` up to
/// degree 100.
pub(crate) fn chebyshev_monomial_table(degree: usize) -> Vec<Vec<i128>> {
    let mut table: Vec<Vec<i128>> = Vec::with_capacity(degree + 1);
    table.push(vec![1]);
    if degree >= 1 {
        table.push(vec![0, 1]);
    }
    for k in 2..=degree {
        let mut next = vec![0i128; k + 1];
        for (j, &c) in table[k - 1].iter().enumerate() {
            next[j + 1] += 2 * c;
        }
        for (j, &c) in table[k - 2].iter().enumerate() {
            next[j] -= c;
        }
        table.push(next);
    }
    table
}

/// Converts Chebyshev coefficients to monomial ones. Each `beta_j` is
/// accumulated in double-double arithmetic against the exact integer table.
pub(crate) fn chebyshev_to_monomial(coeffs: &[f64], table: &[Vec<i128>]) -> Vec<f64> {
    let degree = coeffs.len().saturating_sub(1);
    (0..=degree)
        .map(|j| {
            let mut acc = DoubleDouble::ZERO;
            for (k, &c) in coeffs.iter().enumerate().skip(j) {
                let t = table[k][j];
                if t != 0 {
                    acc = acc + DoubleDouble::from_i128(t).mul_f64(c);
                }
            }
            acc.to_f64()
        })
        .collect()
}

fn sup_error_on(grid: &[f64], p: impl Fn(f64) -> f64, target: impl Fn(f64) -> f64) -> f64 {
    grid.iter().map(|&a| (p(a) - target(a)).abs()).fold(0.0, f64::max)
}

/// Lowest-degree Chebyshev truncation of the sigmoid whose monomial form is
/// within `eps` of it on a uniform grid of `opts.grid_size` points.
///
/// The monomial form is cross-checked against Clenshaw evaluation of the
/// Chebyshev form; a disagreement above `eps / 10` is reported as a failure.
pub fn approx_sigmoid_chebyshev(lipschitz: f64, eps: f64, opts: &ChebyshevOptions) -> Result<PolynomialApprox> {
    if !(lipschitz.is_finite() && lipschitz >= 0.0) {
        return Err(invalid(format!("L must be nonnegative and finite, got {lipschitz}")));
    }
    if lipschitz > 12.0 {
        return Err(invalid(format!("L = {lipschitz} exceeds the supported range L <= 12")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    if opts.grid_size < 1001 {
        return Err(invalid(format!("grid size must be at least 1001, got {}", opts.grid_size)));
    }
    if opts.max_degree > 100 {
        return Err(invalid("degree cap above 100 is not supported"));
    }

    let target = |a: f64| sigmoid(lipschitz, a);
    let coeffs = chebyshev_coefficients(target, opts.max_degree + 1);
    let table = chebyshev_monomial_table(opts.max_degree);
    let grid = uniform_grid(-1.0, 1.0, opts.grid_size);

    let mut best = (f64::INFINITY, 0usize);
    let mut conversion_failure = None;
    for degree in 0..=opts.max_degree {
        let truncated = &coeffs[..=degree];
        let cheb_err = sup_error_on(&grid, |a| clenshaw(truncated, a), target);
        if cheb_err < best.0 {
            best = (cheb_err, degree);
        }
        if cheb_err > eps {
            continue;
        }
        let beta = chebyshev_to_monomial(truncated, &table);
        let disagreement = sup_error_on(&grid, |a| horner(&beta, a), |a| clenshaw(truncated, a));
        if disagreement > eps / 10.0 {
            conversion_failure = Some(disagreement);
            break;
        }
        let sup_error = sup_error_on(&grid, |a| horner(&beta, a), target);
        if sup_error > eps {
            continue;
        }
        return Ok(PolynomialApprox {
            pb_norm: pb_norm(&beta),
            beta,
            sup_error,
            target: TransferVariant::Sigmoid,
            lipschitz,
        });
    }
    let reason = match conversion_failure {
        Some(d) => format!("monomial form disagrees with the Chebyshev form by {d:e}"),
        None => format!("no degree up to {} reaches eps = {eps}", opts.max_degree),
    };
    Err(Error::Approximation { reason, best_error: best.0, best_degree: best.1 })
}

/// Monomial coefficients of `(1 + erf(sqrt(pi) L a)) / 2` truncated at odd `degree`:
/// `beta_0 = 1/2` and `beta_{2n+1} = (-1)^n pi^n L^(2n+1) / (n! (2n+1))`.
pub fn erf_taylor_coeffs(lipschitz: f64, degree: usize) -> Result<PolynomialApprox> {
    erf_taylor_coeffs_on(lipschitz, degree, DEFAULT_GRID_SIZE)
}

pub fn erf_taylor_coeffs_on(lipschitz: f64, degree: usize, grid_size: usize) -> Result<PolynomialApprox> {
    if degree.is_multiple_of(2) {
        return Err(invalid(format!("erf Taylor degree must be odd, got {degree}")));
    }
    if degree > 80 {
        return Err(invalid(format!("erf Taylor degree must be at most 80, got {degree}")));
    }
    if !(lipschitz.is_finite() && lipschitz >= 0.0) {
        return Err(invalid(format!("L must be nonnegative and finite, got {lipschitz}")));
    }
    if grid_size < 2 {
        return Err(invalid("grid size must be at least 2"));
    }
    let mut beta = vec![0.0; degree + 1];
    beta[0] = 0.5;
    // t_n = (-1)^n pi^n L^(2n+1) / n!
    let mut t = lipschitz;
    let step = -std::f64::consts::PI * lipschitz * lipschitz;
    for n in 0..=(degree - 1) / 2 {
        if n > 0 {
            t *= step / n as f64;
        }
        beta[2 * n + 1] = t / (2 * n + 1) as f64;
    }
    let grid = uniform_grid(-1.0, 1.0, grid_size);
    let sup_error = sup_error_on(&grid, |a| horner(&beta, a), |a| erf_transfer(lipschitz, a));
    Ok(PolynomialApprox { pb_norm: pb_norm(&beta), beta, sup_error, target: TransferVariant::Erf, lipschitz })
}
