//! Transfer functions mapping a score `a = <w, x>` to a probability in `[0, 1]`.
//!
//! Three of them are `L`-Lipschitz surrogates of the zero-one step:
//!
//! ```text
//! sigmoid(a) = 1 / (1 + exp(-4 L a))
//! erf(a)     = (1 + erf(sqrt(pi) L a)) / 2
//! pw(a)      = clamp(1/2 + L a, 0, 1)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Which transfer function, without its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferVariant {
    ZeroOne,
    Sigmoid,
    Erf,
    PiecewiseLinear,
}

/// A transfer function together with its Lipschitz constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum TransferKind {
    ZeroOne,
    Sigmoid { lipschitz: f64 },
    Erf { lipschitz: f64 },
    PiecewiseLinear { lipschitz: f64 },
}

fn check_lipschitz(l: f64) -> Result<f64> {
    if l.is_finite() && l > 0.0 {
        Ok(l)
    } else {
        Err(invalid(format!("Lipschitz constant must be positive and finite, got {l}")))
    }
}

impl TransferKind {
    pub fn sigmoid(lipschitz: f64) -> Result<Self> {
        Ok(Self::Sigmoid { lipschitz: check_lipschitz(lipschitz)? })
    }

    pub fn erf(lipschitz: f64) -> Result<Self> {
        Ok(Self::Erf { lipschitz: check_lipschitz(lipschitz)? })
    }

    pub fn piecewise_linear(lipschitz: f64) -> Result<Self> {
        Ok(Self::PiecewiseLinear { lipschitz: check_lipschitz(lipschitz)? })
    }

    /// Builds a kind from its variant; `lipschitz` is ignored for `ZeroOne`.
    pub fn new(variant: TransferVariant, lipschitz: f64) -> Result<Self> {
        match variant {
            TransferVariant::ZeroOne => Ok(Self::ZeroOne),
            TransferVariant::Sigmoid => Self::sigmoid(lipschitz),
            TransferVariant::Erf => Self::erf(lipschitz),
            TransferVariant::PiecewiseLinear => Self::piecewise_linear(lipschitz),
        }
    }

    pub fn variant(&self) -> TransferVariant {
        match self {
            Self::ZeroOne => TransferVariant::ZeroOne,
            Self::Sigmoid { .. } => TransferVariant::Sigmoid,
            Self::Erf { .. } => TransferVariant::Erf,
            Self::PiecewiseLinear { .. } => TransferVariant::PiecewiseLinear,
        }
    }

    /// The Lipschitz constant, or `None` for the zero-one step.
    pub fn lipschitz(&self) -> Option<f64> {
        match *self {
            Self::ZeroOne => None,
            Self::Sigmoid { lipschitz } | Self::Erf { lipschitz } | Self::PiecewiseLinear { lipschitz } => {
                Some(lipschitz)
            }
        }
    }

    /// Evaluates the transfer function. Total over finite `a`.
    pub fn eval(&self, a: f64) -> Result<f64> {
        if !a.is_finite() {
            return Err(Error::Domain(format!("transfer argument must be finite, got {a}")));
        }
        Ok(self.eval_unchecked(a))
    }

    /// Same as [`eval`](Self::eval) without the finiteness check.
    pub(crate) fn eval_unchecked(&self, a: f64) -> f64 {
        match *self {
            Self::ZeroOne => {
                if a >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::Sigmoid { lipschitz } => sigmoid(lipschitz, a),
            Self::Erf { lipschitz } => erf_transfer(lipschitz, a),
            Self::PiecewiseLinear { lipschitz } => reflect(a, |t| (0.5 + lipschitz * t).min(1.0)),
        }
    }
}

/// Evaluates `upper` on `|a|` and mirrors it, so `f(a) + f(-a) == 1` holds
/// exactly in floating point (`1 - s` is exact for `s` in `[1/2, 1]`).
fn reflect(a: f64, upper: impl Fn(f64) -> f64) -> f64 {
    if a >= 0.0 {
        upper(a)
    } else {
        1.0 - upper(-a)
    }
}

/// `1 / (1 + exp(-4 L a))`, also defined at `L = 0`.
pub(crate) fn sigmoid(lipschitz: f64, a: f64) -> f64 {
    reflect(a, |t| 1.0 / (1.0 + (-4.0 * lipschitz * t).exp()))
}

pub(crate) fn erf_transfer(lipschitz: f64, a: f64) -> f64 {
    let z = std::f64::consts::PI.sqrt() * lipschitz * a;
    0.5 * (1.0 + libm::erf(z))
}

/// Free-function form of [`TransferKind::eval`].
pub fn eval_transfer(kind: &TransferKind, a: f64) -> Result<f64> {
    kind.eval(a)
}

/// Largest finite-difference slope of `kind` over adjacent points of `grid`.
///
/// The grid must be strictly increasing with at least two points.
pub fn lipschitz_check(kind: &TransferKind, grid: &[f64]) -> Result<f64> {
    if grid.len() < 2 {
        return Err(invalid("grid needs at least two points"));
    }
    if grid.iter().any(|a| !a.is_finite()) {
        return Err(invalid("grid points must be finite"));
    }
    let mut max_slope: f64 = 0.0;
    for pair in grid.windows(2) {
        let (lo, hi) = (pair[0], pair[1]);
        if hi <= lo {
            return Err(invalid(format!("grid must be strictly increasing ({lo} then {hi})")));
        }
        let slope = (kind.eval_unchecked(hi) - kind.eval_unchecked(lo)).abs() / (hi - lo);
        max_slope = max_slope.max(slope);
    }
    Ok(max_slope)
}

/// `n` equally spaced points covering `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "uniform grid needs at least two points");
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { hi } else { lo + step * i as f64 })
        .collect()
}
