//! Error measures, closed-form bounds, synthetic data and cross-validation.

mod bounds;
mod data;

pub use bounds::{
    l_for_margin, sample_size_hb, sample_size_hb_raw, sample_size_hphi, sample_size_hphi_raw, Budget, HbVariant,
    MarginTransfer, SampleSize, SAMPLE_SIZE_CAP,
};
pub use data::{generate, Dataset, GeneratorSpec, LabelNoise, LabeledSample, Provenance};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::{gram, Point};
use crate::solver::{clip_prob, train_with_gram, DualPredictor, SolverOptions};
use crate::transfer::TransferKind;

/// Default B grid for cross-validation.
pub const DEFAULT_B_GRID: [f64; 5] = [1.0, 10.0, 100.0, 1000.0, 10000.0];

/// Default fraction of the training data held out for cross-validation.
pub const DEFAULT_HOLDOUT_FRACTION: f64 = 0.2;

/// Float guard for the per-example domination inequality.
pub const DOMINATION_ROUNDING: f64 = 1e-12;

fn require_nonempty(data: &Dataset) -> Result<()> {
    if data.is_empty() {
        Err(invalid("dataset is empty"))
    } else {
        Ok(())
    }
}

/// `(1/m) sum |h(x_i) - y_i|` with `h` clipped to `[0, 1]`.
pub fn abs_error<F>(predict_prob: F, data: &Dataset) -> Result<f64>
where
    F: Fn(&Point) -> Result<f64>,
{
    require_nonempty(data)?;
    let mut total = 0.0;
    for s in data.samples() {
        total += (clip_prob(predict_prob(&s.x)?) - f64::from(s.y)).abs();
    }
    Ok(total / data.len() as f64)
}

/// Fraction of samples whose predicted label differs from `y`.
pub fn zero_one_error<F>(predict_label: F, data: &Dataset) -> Result<f64>
where
    F: Fn(&Point) -> Result<u8>,
{
    require_nonempty(data)?;
    let mut mistakes = 0usize;
    for s in data.samples() {
        if predict_label(&s.x)? != s.y {
            mistakes += 1;
        }
    }
    Ok(mistakes as f64 / data.len() as f64)
}

fn check_unit(w: &Point) -> Result<()> {
    if (w.norm() - 1.0).abs() > 1e-9 {
        return Err(invalid(format!("w must have unit norm, got {}", w.norm())));
    }
    Ok(())
}

/// Whether `(x, y)` is a `mu`-margin mistake of the halfspace `w`: misclassified
/// by `1[<w, x> > 0]` or within `mu` of the boundary.
pub fn is_margin_mistake(score: f64, y: u8, mu: f64) -> bool {
    u8::from(score > 0.0) != y || score.abs() <= mu
}

/// Empirical `mu`-margin error of the halfspace `w`.
pub fn margin_error(w: &Point, mu: f64, data: &Dataset) -> Result<f64> {
    check_unit(w)?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(invalid(format!("margin must be positive, got {mu}")));
    }
    require_nonempty(data)?;
    if data.dim() != Some(w.dim()) {
        return Err(invalid("w and data have different dimensions"));
    }
    let count = data.samples().iter().filter(|s| is_margin_mistake(w.dot(&s.x), s.y, mu)).count();
    Ok(count as f64 / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginErrorEntry {
    pub mu: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub abs_error: f64,
    pub zero_one_error: f64,
    pub margin_errors: Vec<MarginErrorEntry>,
}

/// Absolute and zero-one error of `predictor` on `data`.
pub fn evaluate_predictor(predictor: &DualPredictor, data: &Dataset) -> Result<ErrorReport> {
    if data.dim().is_some_and(|d| d != predictor.dim()) {
        return Err(Error::InvalidInput(format!(
            "dataset has dimension {}, model expects {}",
            data.dim().unwrap_or(0),
            predictor.dim()
        )));
    }
    Ok(ErrorReport {
        abs_error: abs_error(|x| predictor.predict_prob(x), data)?,
        zero_one_error: zero_one_error(|x| predictor.predict_label(x), data)?,
        margin_errors: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub transfer: MarginTransfer,
    pub lipschitz: f64,
    /// Allowed excess over the margin indicator: 0 for piecewise-linear, `eps / 2` for the sigmoid.
    pub slack: f64,
    /// Samples where `|phi(<w, x>) - y| > 1[margin mistake] + slack`.
    pub violations: usize,
    /// Mean of `|phi(<w, x>) - y|`.
    pub mean_loss: f64,
    pub margin_error: f64,
}

/// Checks, sample by sample, that the transfer's loss at the Lipschitz constant
/// from [`l_for_margin`] is dominated by the `mu`-margin error indicator (plus
/// `eps / 2` for the sigmoid).
pub fn margin_domination_check(
    w: &Point,
    mu: f64,
    data: &Dataset,
    transfer: MarginTransfer,
    eps: f64,
) -> Result<DominationReport> {
    let lipschitz = l_for_margin(transfer, mu, eps)?;
    let (kind, slack) = match transfer {
        MarginTransfer::PiecewiseLinear => (TransferKind::piecewise_linear(lipschitz)?, 0.0),
        MarginTransfer::Sigmoid => (TransferKind::sigmoid(lipschitz)?, eps / 2.0),
    };
    let margin = margin_error(w, mu, data)?;
    let mut violations = 0;
    let mut total_loss = 0.0;
    for s in data.samples() {
        let score = w.dot(&s.x);
        let loss = (kind.eval_unchecked(score) - f64::from(s.y)).abs();
        let bound = f64::from(u8::from(is_margin_mistake(score, s.y, mu))) + slack;
        if loss > bound + DOMINATION_ROUNDING {
            violations += 1;
        }
        total_loss += loss;
    }
    Ok(DominationReport {
        transfer,
        lipschitz,
        slack,
        violations,
        mean_loss: total_loss / data.len() as f64,
        margin_error: margin,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvEntry {
    pub b: f64,
    pub train_objective: f64,
    pub holdout_zero_one: f64,
    pub holdout_abs: f64,
    pub iters_used: usize,
    pub constraint_active: bool,
}

#[derive(Debug, Clone)]
pub struct CvResult {
    pub best_b: f64,
    pub predictor: DualPredictor,
    /// One entry per distinct grid value, in increasing `B`.
    pub per_b: Vec<CvEntry>,
}

/// Trains one predictor per `B` on `train`, scores zero-one error on `holdout`,
/// and returns the minimizer; ties go to the smallest `B`.
pub fn cross_validate_b(
    train: &Dataset,
    holdout: &Dataset,
    b_grid: &[f64],
    spec: &crate::kernel::KernelSpec,
    opts: &SolverOptions,
) -> Result<CvResult> {
    if b_grid.is_empty() {
        return Err(invalid("B grid is empty"));
    }
    if let Some(b) = b_grid.iter().find(|b| !(**b > 0.0 && b.is_finite())) {
        return Err(invalid(format!("B values must be positive and finite, got {b}")));
    }
    require_nonempty(train)?;
    require_nonempty(holdout)?;
    if train.dim() != holdout.dim() {
        return Err(invalid("train and holdout have different dimensions"));
    }
    let mut grid = b_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();

    let points = train.points();
    let labels = train.labels();
    let g = gram(&points, spec)?;

    let fitted: Vec<(DualPredictor, CvEntry)> = grid
        .par_iter()
        .map(|&b| {
            let (predictor, report) = train_with_gram(&points, &g, &labels, b, opts)?;
            let scores = evaluate_predictor(&predictor, holdout)?;
            let entry = CvEntry {
                b,
                train_objective: report.final_objective,
                holdout_zero_one: scores.zero_one_error,
                holdout_abs: scores.abs_error,
                iters_used: report.iters_used,
                constraint_active: report.constraint_active,
            };
            Ok((predictor, entry))
        })
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, (_, entry)) in fitted.iter().enumerate() {
        if entry.holdout_zero_one < fitted[best].1.holdout_zero_one {
            best = i;
        }
    }
    let best_b = fitted[best].1.b;
    let per_b = fitted.iter().map(|(_, e)| e.clone()).collect();
    let predictor = fitted.into_iter().nth(best).map(|(p, _)| p).expect("grid is nonempty");
    Ok(CvResult { best_b, predictor, per_b })
}
