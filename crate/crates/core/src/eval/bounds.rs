//! Closed-form sample sizes and margin-to-Lipschitz conversions.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::numeric::DoubleDouble;
use crate::polyspace::LogBudget;

fn check_unit_open(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// `((2L + 3 sqrt(2 ln(8/delta))) / eps)^2` before rounding up.
pub fn sample_size_hphi_raw(lipschitz: f64, eps: f64, delta: f64) -> Result<f64> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(invalid(format!("L must be positive and finite, got {lipschitz}")));
    }
    check_unit_open("eps", eps)?;
    check_unit_open("delta", delta)?;
    Ok(hphi_dd(lipschitz, eps, delta).to_f64())
}

fn dd(x: f64) -> DoubleDouble {
    DoubleDouble::from_f64(x)
}

fn hphi_dd(lipschitz: f64, eps: f64, delta: f64) -> DoubleDouble {
    let log_term = (dd(8.0) / dd(delta)).ln().mul_f64(2.0).sqrt().mul_f64(3.0);
    let root = (dd(lipschitz).mul_f64(2.0) + log_term) / dd(eps);
    root * root
}

/// Examples sufficient to learn the class `x -> phi(<w, x>)` of an `L`-Lipschitz transfer.
pub fn sample_size_hphi(lipschitz: f64, eps: f64, delta: f64) -> Result<u64> {
    let raw = sample_size_hphi_raw(lipschitz, eps, delta)?;
    if raw >= u64::MAX as f64 {
        return Err(invalid(format!("sample size {raw:e} does not fit in 64 bits")));
    }
    Ok(hphi_dd(lipschitz, eps, delta).ceil() as u64)
}

/// Which norm-ball sample size to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HbVariant {
    /// ERM over the ball learns it: constant 2.
    Erm,
    /// ERM over the ball competes with the best sigmoid predictor: constant 8.
    Mainres,
}

impl HbVariant {
    fn constant(self) -> f64 {
        match self {
            HbVariant::Erm => 2.0,
            HbVariant::Mainres => 8.0,
        }
    }
}

/// A budget given directly or through its logarithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Value(f64),
    Log(LogBudget),
}

/// A sample size that may exceed the 64-bit signed range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSize {
    /// The size, or `i64::MAX` when saturated.
    pub value: u64,
    pub saturated: bool,
    /// Natural log of the pre-ceiling size.
    pub log_value: f64,
}

/// Largest representable sample size, `2^63 - 1`.
pub const SAMPLE_SIZE_CAP: u64 = i64::MAX as u64;

/// `c B / eps^2 (2 + 9 sqrt(ln(8/delta)))^2` before rounding up, with `c` = 2 or 8.
pub fn sample_size_hb_raw(b: f64, eps: f64, delta: f64, variant: HbVariant) -> Result<f64> {
    if !(b >= 1.0 && b.is_finite()) {
        return Err(invalid(format!("B must be at least 1, got {b}")));
    }
    check_unit_open("eps", eps)?;
    check_unit_open("delta", delta)?;
    Ok(hb_dd(b, eps, delta, variant).to_f64())
}

fn hb_dd(b: f64, eps: f64, delta: f64, variant: HbVariant) -> DoubleDouble {
    let factor = (dd(8.0) / dd(delta)).ln().sqrt().mul_f64(9.0) + dd(2.0);
    let e = dd(eps);
    dd(b).mul_f64(variant.constant()) / (e * e) * (factor * factor)
}

fn log_sample_size_hb(log_b: f64, eps: f64, delta: f64, variant: HbVariant) -> f64 {
    let factor = 2.0 + 9.0 * (8.0 / delta).ln().sqrt();
    variant.constant().ln() + log_b - 2.0 * eps.ln() + 2.0 * factor.ln()
}

/// Examples sufficient for ERM over the ball of squared radius `B`.
pub fn sample_size_hb(budget: Budget, eps: f64, delta: f64, variant: HbVariant) -> Result<SampleSize> {
    check_unit_open("eps", eps)?;
    check_unit_open("delta", delta)?;
    let log_b = match budget {
        Budget::Value(b) => {
            if !(b >= 1.0 && b.is_finite()) {
                return Err(invalid(format!("B must be at least 1, got {b}")));
            }
            b.ln()
        }
        Budget::Log(l) => {
            if !(l.log_b >= 0.0 && l.log_b.is_finite()) {
                return Err(invalid(format!("B must be at least 1, got exp({})", l.log_b)));
            }
            l.log_b
        }
    };
    let log_value = log_sample_size_hb(log_b, eps, delta, variant);
    let saturated = SampleSize { value: SAMPLE_SIZE_CAP, saturated: true, log_value };
    if log_value >= (SAMPLE_SIZE_CAP as f64).ln() {
        return Ok(saturated);
    }
    let b = match budget {
        Budget::Value(b) => b,
        Budget::Log(l) => l.log_b.exp(),
    };
    let raw = sample_size_hb_raw(b, eps, delta, variant)?;
    let value = hb_dd(b, eps, delta, variant).ceil();
    if value > SAMPLE_SIZE_CAP as f64 {
        return Ok(saturated);
    }
    Ok(SampleSize { value: value as u64, saturated: false, log_value: raw.ln() })
}

/// Transfers with a margin-to-Lipschitz conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginTransfer {
    PiecewiseLinear,
    Sigmoid,
}

/// Lipschitz constant at which the transfer's loss is dominated by the
/// `mu`-margin error: `1 / (2 mu)` for piecewise-linear, and
/// `ln((2 - eps) / eps) / (4 mu)` for the sigmoid (up to `eps / 2`).
pub fn l_for_margin(transfer: MarginTransfer, mu: f64, eps: f64) -> Result<f64> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("margin must be positive, got {mu}")));
    }
    match transfer {
        MarginTransfer::PiecewiseLinear => Ok(1.0 / (2.0 * mu)),
        MarginTransfer::Sigmoid => {
            check_unit_open("eps", eps)?;
            let e = DoubleDouble::from_f64(eps);
            let ratio = (DoubleDouble::from_f64(2.0) - e) / e;
            Ok((ratio.ln() / DoubleDouble::from_f64(4.0 * mu)).to_f64())
        }
    }
}
